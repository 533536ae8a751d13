//! End-to-end inference for one set of cell counts: point estimates, MI
//! standard errors and the credible interval picked by estimated prevalence.

use serde::{Deserialize, Serialize};

use crate::credible::{
    choose_interval, interval_adjusted, interval_unadjusted, posterior_case_count_draws,
    CredibleInterval, CredibleKind, PosteriorDrawConfig,
};
use crate::domain::{derive_crc_table, CellCounts, CrcTable};
use crate::error::{CrcError, Result};
use crate::estimators::{
    estimate_chapman, estimate_mle, estimate_plugin, estimate_rs_from_counts, mle_parameters,
    Estimate, MleParameters,
};
use crate::rng::derive_seed;
use crate::variance::{
    composite_variance_b, lp_variance_mi, mi_variance_estimated_ppv, mi_variance_known_ppv,
    MiVarianceResult, DEFAULT_IMPUTATIONS,
};

/// Fixed seed used when none is supplied, so casual runs are reproducible.
pub const DEFAULT_SEED: u64 = 20_220_501;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub imputations: usize,
    pub s_outer: usize,
    pub t_inner: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            imputations: DEFAULT_IMPUTATIONS,
            s_outer: 100,
            t_inner: 100,
            seed: DEFAULT_SEED,
        }
    }
}

impl AnalysisOptions {
    pub fn mi_seed(&self) -> u64 {
        derive_seed(self.seed, &[1])
    }

    pub fn draws_config(&self) -> PosteriorDrawConfig {
        PosteriorDrawConfig::new(self.s_outer, self.t_inner, derive_seed(self.seed, &[2]))
    }

    pub fn lp_seed(&self) -> u64 {
        derive_seed(self.seed, &[3])
    }
}

/// Both credible intervals for one data set. The adjusted one is absent when
/// its auxiliary variances are undefined (no dual captures, zero RS variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleSet {
    pub unadjusted: CredibleInterval,
    pub adjusted: Option<CredibleInterval>,
    /// Kind recommended by the prevalence rule.
    pub recommended: CredibleKind,
}

impl CredibleSet {
    /// The recommended interval, or the unadjusted one if the adjusted
    /// interval could not be formed.
    pub fn selected(&self) -> &CredibleInterval {
        match (self.recommended, &self.adjusted) {
            (CredibleKind::Adjusted, Some(adj)) => adj,
            _ => &self.unadjusted,
        }
    }

    /// True when the adjusted interval was recommended but unavailable.
    pub fn fell_back(&self) -> bool {
        self.recommended == CredibleKind::Adjusted && self.adjusted.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleAnalysis {
    /// Closed-form point estimate with MI standard error and Wald interval.
    pub estimate: Estimate,
    pub params: MleParameters,
    pub mi: MiVarianceResult,
    pub credible: CredibleSet,
}

/// Adjusted credible interval from precomputed draws.
pub fn adjusted_from_draws(
    counts: &CellCounts,
    draws: &[f64],
    n_hat: f64,
    var_mi: f64,
    imputations: usize,
    lp_seed: u64,
) -> Result<CredibleInterval> {
    let rs = estimate_rs_from_counts(counts)?;
    let var_rs = rs.variance().unwrap_or(0.0);
    let lp = lp_variance_mi(counts, imputations, lp_seed)?;
    let var_b = composite_variance_b(var_rs, lp.total_variance)?;
    let wald = rs
        .interval()
        .ok_or_else(|| CrcError::Internal("RS estimate lacks an interval".into()))?;
    interval_adjusted(draws, n_hat, var_mi, var_b, wald)
}

pub fn credible_set(
    counts: &CellCounts,
    n_hat: f64,
    var_mi: f64,
    opts: &AnalysisOptions,
) -> Result<CredibleSet> {
    let draws = posterior_case_count_draws(counts, &opts.draws_config())?;
    let unadjusted = interval_unadjusted(&draws)?;
    let adjusted = match adjusted_from_draws(
        counts,
        &draws,
        n_hat,
        var_mi,
        opts.imputations,
        opts.lp_seed(),
    ) {
        Ok(ci) => Some(ci),
        Err(CrcError::Internal(msg)) => return Err(CrcError::Internal(msg)),
        Err(_) => None,
    };
    Ok(CredibleSet {
        unadjusted,
        adjusted,
        recommended: choose_interval(n_hat, counts.n_tot),
    })
}

/// MLE with its estimated-PPV MI standard error (psi replaced by psi*) and
/// both credible intervals.
pub fn analyze_mle(counts: &CellCounts, opts: &AnalysisOptions) -> Result<MleAnalysis> {
    let params = mle_parameters(counts)?;
    let point = estimate_mle(counts)?;
    let mi = mi_variance_estimated_ppv(
        counts,
        params.psi_star_hat,
        opts.imputations,
        opts.mi_seed(),
    )?;
    let estimate = point.with_wald(mi.se());
    let credible = credible_set(counts, estimate.n_hat, mi.total_variance, opts)?;
    Ok(MleAnalysis {
        estimate,
        params,
        mi,
        credible,
    })
}

/// Plug-in estimate with known-PPV MI standard error.
pub fn analyze_plugin(
    table: &CrcTable,
    ppv1: f64,
    psi: f64,
    opts: &AnalysisOptions,
) -> Result<(Estimate, MiVarianceResult)> {
    let point = estimate_plugin(table, ppv1, psi)?;
    let mi = mi_variance_known_ppv(table, ppv1, psi, opts.imputations, opts.mi_seed())?;
    Ok((point.with_wald(mi.se()), mi))
}

/// Chapman on the observed (uncorrected) capture table.
pub fn chapman_from_counts(counts: &CellCounts) -> Result<Estimate> {
    let t = derive_crc_table(counts);
    estimate_chapman(t.m11, t.m1dot(), t.mdot1())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_pipeline() {
        let c = CellCounts::new([14, 17, 3, 166, 66, 763], 1029).unwrap();
        let a = analyze_mle(&c, &AnalysisOptions::default()).unwrap();
        assert!((a.estimate.n_hat - 156.2).abs() < 0.05);
        assert!((a.estimate.se.unwrap() - 20.7).abs() < 1.5);
        assert_eq!(a.credible.recommended, CredibleKind::Unadjusted);
        assert!(a.credible.adjusted.is_some());
        let ci = a.credible.selected();
        assert!(ci.lower < 156.2 && ci.upper > 156.2);
    }

    #[test]
    fn adjusted_unavailable_without_dual_captures() {
        // high prevalence, n1 = 0 would fail PPV; use n3 > 0 but n1 = 0
        let c = CellCounts::new([0, 60, 2, 40, 30, 368], 500).unwrap();
        let a = analyze_mle(
            &c,
            &AnalysisOptions {
                s_outer: 20,
                t_inner: 50,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.credible.recommended, CredibleKind::Adjusted);
        assert!(a.credible.fell_back());
        assert_eq!(a.credible.selected().kind, CredibleKind::Unadjusted);
    }
}
