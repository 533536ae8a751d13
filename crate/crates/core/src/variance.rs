//! Multiple-imputation variances.
//!
//! The number of stream-1 signals that are true cases is treated as missing
//! and imputed `m` times. Each completed data set yields a point estimate and
//! a within-imputation variance; they are pooled as
//! `T = (1 + 1/m) B + U_bar`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credible::{draw_ppv_weights, ppv10_from_probs};
use crate::domain::{derive_crc_table, CellCounts, CrcTable};
use crate::error::{CrcError, Result};
use crate::estimators::anchor_within_variance;
use crate::rng::{binomial, stream_rng};

/// Imputation count used when the caller does not choose one.
pub const DEFAULT_IMPUTATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiVarianceResult {
    pub total_variance: f64,
    /// Mean within-imputation variance.
    pub within: f64,
    /// Between-imputation variance of the point estimates.
    pub between: f64,
    pub m_imputations: usize,
    /// Mean of the imputed point estimates.
    pub n_mi: f64,
}

impl MiVarianceResult {
    pub fn se(&self) -> f64 {
        self.total_variance.sqrt()
    }
}

/// Pools per-imputation estimates and within variances.
pub fn combine_imputations(estimates: &[f64], within: &[f64]) -> Result<MiVarianceResult> {
    let m = estimates.len();
    if m < 2 {
        return Err(CrcError::TooFew { needed: 2, got: m });
    }
    if within.len() != m {
        return Err(CrcError::InvalidArgument(format!(
            "{} within variances for {m} estimates",
            within.len()
        )));
    }
    let mf = m as f64;
    let n_mi = estimates.iter().sum::<f64>() / mf;
    let between = estimates.iter().map(|e| (e - n_mi).powi(2)).sum::<f64>() / (mf - 1.0);
    let within = within.iter().sum::<f64>() / mf;
    Ok(MiVarianceResult {
        total_variance: (1.0 + 1.0 / mf) * between + within,
        within,
        between,
        m_imputations: m,
        n_mi,
    })
}

fn check_imputations(m: usize) -> Result<()> {
    if m < 2 {
        return Err(CrcError::TooFew { needed: 2, got: m });
    }
    Ok(())
}

fn check_psi(psi: f64) -> Result<()> {
    if !(psi > 0.0 && psi <= 1.0) {
        return Err(CrcError::InvalidArgument(format!(
            "psi={psi} must lie in (0, 1]"
        )));
    }
    Ok(())
}

/// MI variance of the plug-in estimator when PPV1 is known: the true-case
/// count among `m11 + m10` signals is imputed as Binomial(m11 + m10, PPV1).
pub fn mi_variance_known_ppv(
    table: &CrcTable,
    ppv1: f64,
    psi: f64,
    m: usize,
    seed: u64,
) -> Result<MiVarianceResult> {
    check_imputations(m)?;
    check_psi(psi)?;
    if !(0.0..=1.0).contains(&ppv1) {
        return Err(CrcError::InvalidArgument(format!(
            "ppv1={ppv1} is not a probability"
        )));
    }
    let signals = table.m1dot();
    let anchor_only = table.m01 as f64 / psi;
    let within = anchor_within_variance(table.m01, psi);
    let estimates: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, &[j]);
            binomial(signals, ppv1, &mut rng) as f64 + anchor_only
        })
        .collect();
    combine_imputations(&estimates, &vec![within; m])
}

/// MI variance when PPV1 is estimated. Each imputation first draws
/// `(p1, p3, p5)` from the Jeffreys Dirichlet posterior, sets
/// `PPV1 = p1/(p1 + p3)`, then imputes as in [`mi_variance_known_ppv`].
///
/// For the maximum likelihood estimator pass `psi_effective = psi*_hat`.
pub fn mi_variance_estimated_ppv(
    counts: &CellCounts,
    psi_effective: f64,
    m: usize,
    seed: u64,
) -> Result<MiVarianceResult> {
    check_imputations(m)?;
    check_psi(psi_effective)?;
    if counts.n1 + counts.n3 == 0 {
        return Err(CrcError::NoValidatedPositives);
    }
    let table = derive_crc_table(counts);
    let signals = table.m1dot();
    let anchor_only = table.m01 as f64 / psi_effective;
    let within = anchor_within_variance(table.m01, psi_effective);
    let estimates: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, &[j]);
            let [p1, p3, _] = draw_ppv_weights(counts, &mut rng);
            let ppv = p1 / (p1 + p3);
            binomial(signals, ppv, &mut rng) as f64 + anchor_only
        })
        .collect();
    combine_imputations(&estimates, &vec![within; m])
}

/// Lincoln-Petersen point estimate `(n11 + n10)(n11 + n01) / n11`.
pub fn lp_estimate(n11: f64, n10: f64, n01: f64) -> Result<f64> {
    if n11 <= 0.0 {
        return Err(CrcError::NoDualCaptures);
    }
    Ok((n11 + n10) * (n11 + n01) / n11)
}

/// Lincoln-Petersen variance `(n11 + n10)(n11 + n01) n10 n01 / n11^3`.
pub fn lp_variance(n11: f64, n10: f64, n01: f64) -> Result<f64> {
    if n11 <= 0.0 {
        return Err(CrcError::NoDualCaptures);
    }
    Ok((n11 + n10) * (n11 + n01) * n10 * n01 / n11.powi(3))
}

/// MI version of the Lincoln-Petersen variance on misclassification-adjusted
/// cells. Each imputation draws PPV10 from the Dirichlet posterior, imputes
/// the true cases in the `m10` cell as Binomial(m10, PPV10), and evaluates
/// the LP estimate and variance on `(m11, n10_imputed, m01)`.
pub fn lp_variance_mi(counts: &CellCounts, m: usize, seed: u64) -> Result<MiVarianceResult> {
    check_imputations(m)?;
    if counts.n1 == 0 {
        return Err(CrcError::NoDualCaptures);
    }
    let table = derive_crc_table(counts);
    let (n11, n01) = (table.m11 as f64, table.m01 as f64);
    let draws: Vec<(f64, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, &[j]);
            let [p1, p3, p5] = draw_ppv_weights(counts, &mut rng);
            let ppv10 = ppv10_from_probs(p1 / (p1 + p3), p1, p3, p5)
                .expect("posterior weights are strictly positive");
            let n10 = binomial(table.m10, ppv10, &mut rng) as f64;
            (
                lp_estimate(n11, n10, n01).expect("n11 checked positive"),
                lp_variance(n11, n10, n01).expect("n11 checked positive"),
            )
        })
        .collect();
    let (estimates, within): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    combine_imputations(&estimates, &within)
}

/// Harmonic combination `[1/var_rs + 1/var_lp]^-1`.
pub fn composite_variance_b(var_rs: f64, var_lp_mi: f64) -> Result<f64> {
    if !(var_rs > 0.0 && var_lp_mi > 0.0) {
        return Err(CrcError::InvalidArgument(format!(
            "composite variance needs positive inputs, got {var_rs} and {var_lp_mi}"
        )));
    }
    Ok(1.0 / (1.0 / var_rs + 1.0 / var_lp_mi))
}
