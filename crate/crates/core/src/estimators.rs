//! Closed-form point estimators of the registry case count.

use serde::{Deserialize, Serialize};

use crate::domain::{derive_crc_table, CellCounts, CrcTable};
use crate::error::{CrcError, Result};

/// Normal quantile used for all two-sided 95% intervals.
pub const Z_95: f64 = 1.96;

/// Relative tolerance for the agreement between the two algebraic forms of
/// the maximum likelihood estimate.
pub const MLE_IDENTITY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Anchor sample alone, with finite population correction.
    Rs,
    /// Anchor-stream estimator assuming error-free stream-1 signals.
    AnchorExact,
    /// Classical two-sample Chapman estimator on the observed cells.
    Chapman,
    /// Misclassification-corrected estimator with a known PPV1.
    Plugin,
    /// Maximum likelihood estimator with PPV1 and psi* estimated.
    Mle,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Rs => "rs",
            EstimatorKind::AnchorExact => "anchor_exact",
            EstimatorKind::Chapman => "chapman",
            EstimatorKind::Plugin => "plugin",
            EstimatorKind::Mle => "mle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "rs" => Some(EstimatorKind::Rs),
            "anchor_exact" => Some(EstimatorKind::AnchorExact),
            "chapman" => Some(EstimatorKind::Chapman),
            "plugin" => Some(EstimatorKind::Plugin),
            "mle" => Some(EstimatorKind::Mle),
            _ => None,
        }
    }
}

/// How `ci_lower`/`ci_upper` of an [`Estimate`] were formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Wald,
    /// Log-transformed interval on the uncaptured count. Stands in for the
    /// transformed-logit interval usually reported next to Chapman.
    LogTransformFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub method: EstimatorKind,
    pub n_hat: f64,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub interval: Option<IntervalKind>,
}

impl Estimate {
    pub fn point(method: EstimatorKind, n_hat: f64) -> Self {
        Self {
            method,
            n_hat,
            se: None,
            ci_lower: None,
            ci_upper: None,
            interval: None,
        }
    }

    /// Attaches a standard error and the symmetric Wald interval around `n_hat`.
    pub fn with_wald(mut self, se: f64) -> Self {
        let se = se.max(0.0);
        self.se = Some(se);
        self.ci_lower = Some(self.n_hat - Z_95 * se);
        self.ci_upper = Some(self.n_hat + Z_95 * se);
        self.interval = Some(IntervalKind::Wald);
        self
    }

    pub fn variance(&self) -> Option<f64> {
        self.se.map(|s| s * s)
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        Some((self.ci_lower?, self.ci_upper?))
    }

    pub fn covers(&self, value: f64) -> Option<bool> {
        self.interval().map(|(lo, hi)| lo <= value && value <= hi)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(CrcError::InvalidArgument(format!(
            "{name}={p} is not a probability"
        )));
    }
    Ok(())
}

fn check_sampling_rate(psi: f64) -> Result<()> {
    if !(psi > 0.0 && psi <= 1.0) {
        return Err(CrcError::InvalidArgument(format!(
            "psi={psi} must lie in (0, 1]"
        )));
    }
    Ok(())
}

/// Variance of the anchor-sample prevalence with the finite population
/// correction, `[n(N-n)/(N(n-1))] p(1-p)/n`.
pub fn rs_prevalence_variance(n_pos: u64, n: u64, n_tot: u64) -> Result<f64> {
    if n < 2 {
        return Err(CrcError::InvalidArgument(format!(
            "anchor sample size n={n} < 2, variance undefined"
        )));
    }
    if n > n_tot {
        return Err(CrcError::InvalidArgument(format!(
            "anchor sample size n={n} exceeds n_tot={n_tot}"
        )));
    }
    if n_pos > n {
        return Err(CrcError::InvalidArgument(format!(
            "n_pos={n_pos} exceeds n={n}"
        )));
    }
    let (n_pos, n, n_tot) = (n_pos as f64, n as f64, n_tot as f64);
    let p = n_pos / n;
    Ok(n * (n_tot - n) / (n_tot * (n - 1.0)) * p * (1.0 - p) / n)
}

/// Random-sample estimator `N_tot * n_pos / n` with its FPC Wald interval.
pub fn estimate_rs(n_pos: u64, n: u64, n_tot: u64) -> Result<Estimate> {
    let var_p = rs_prevalence_variance(n_pos, n, n_tot)?;
    let n_tot_f = n_tot as f64;
    let n_hat = n_tot_f * n_pos as f64 / n as f64;
    Ok(Estimate::point(EstimatorKind::Rs, n_hat).with_wald(n_tot_f * var_p.sqrt()))
}

/// [`estimate_rs`] on the anchor cells of a collapsed table.
pub fn estimate_rs_from_counts(counts: &CellCounts) -> Result<Estimate> {
    estimate_rs(
        counts.anchor_positives(),
        counts.anchor_sample_size(),
        counts.n_tot,
    )
}

/// `m11 + m10 + m01/psi`, valid when stream-1 signals are error free.
pub fn estimate_anchor_exact(table: &CrcTable, psi: f64) -> Result<Estimate> {
    check_sampling_rate(psi)?;
    let m01 = table.m01 as f64;
    let n_hat = table.m1dot() as f64 + m01 / psi;
    let var = anchor_within_variance(table.m01, psi);
    Ok(Estimate::point(EstimatorKind::AnchorExact, n_hat).with_wald(var.sqrt()))
}

/// `m01 (1 - psi) / psi^2`.
pub fn anchor_within_variance(m01: u64, psi: f64) -> f64 {
    m01 as f64 * (1.0 - psi) / (psi * psi)
}

/// Chapman's bias-corrected Lincoln-Petersen estimator and variance.
pub fn estimate_chapman(m11: u64, m1dot: u64, mdot1: u64) -> Result<Estimate> {
    if m11 > m1dot.min(mdot1) {
        return Err(CrcError::InvalidArgument(format!(
            "m11={m11} exceeds a margin (m1.={m1dot}, m.1={mdot1})"
        )));
    }
    if m1dot == 0 {
        return Err(CrcError::EmptyCaptureStream(1));
    }
    if mdot1 == 0 {
        return Err(CrcError::EmptyCaptureStream(2));
    }
    let (a, b, c) = (m1dot as f64, mdot1 as f64, m11 as f64);
    let n_hat = (a + 1.0) * (b + 1.0) / (c + 1.0) - 1.0;
    let var = (a + 1.0) * (b + 1.0) * (a - c) * (b - c) / ((c + 1.0).powi(2) * (c + 2.0));
    let captured = (m1dot + mdot1 - m11) as f64;
    let (lo, hi) = log_transform_interval(n_hat, var, captured);
    Ok(Estimate {
        method: EstimatorKind::Chapman,
        n_hat,
        se: Some(var.sqrt()),
        ci_lower: Some(lo),
        ci_upper: Some(hi),
        interval: Some(IntervalKind::LogTransformFallback),
    })
}

/// Log-normal interval on the uncaptured count `f0 = n_hat - captured`:
/// `[captured + f0/C, captured + f0*C]` with `C = exp(z sqrt(ln(1 + var/f0^2)))`.
/// Falls back to a Wald interval floored at `captured` when `f0 <= 0`.
pub fn log_transform_interval(n_hat: f64, var: f64, captured: f64) -> (f64, f64) {
    let f0 = n_hat - captured;
    if f0 <= 0.0 {
        let half = Z_95 * var.max(0.0).sqrt();
        return ((n_hat - half).max(captured), n_hat + half);
    }
    let c = (Z_95 * (1.0 + var.max(0.0) / (f0 * f0)).ln().sqrt()).exp();
    (captured + f0 / c, captured + f0 * c)
}

/// `PPV1 (m11 + m10) + m01/psi`. Standard errors come from the MI machinery.
pub fn estimate_plugin(table: &CrcTable, ppv1: f64, psi: f64) -> Result<Estimate> {
    check_probability("ppv1", ppv1)?;
    check_sampling_rate(psi)?;
    let n_hat = ppv1 * table.m1dot() as f64 + table.m01 as f64 / psi;
    Ok(Estimate::point(EstimatorKind::Plugin, n_hat))
}

/// Overall anchor sampling rate `n / N_tot`, the default psi for the plug-in.
pub fn overall_sampling_rate(counts: &CellCounts) -> f64 {
    counts.anchor_sample_size() as f64 / counts.n_tot as f64
}

/// Identifiable parameters of the collapsed six-cell multinomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleParameters {
    /// Anchor sampling rate.
    pub psi_hat: f64,
    /// Anchor sampling rate among subjects without a stream-1 signal.
    pub psi_star_hat: f64,
    /// Pr(sampled and signaled in stream 1).
    pub theta_hat: f64,
    pub pi_hat: f64,
    pub ppv1_hat: f64,
}

impl MleParameters {
    /// Estimated prevalence `PPV1 theta + pi - theta`.
    pub fn prevalence(&self) -> f64 {
        self.ppv1_hat * self.theta_hat + self.pi_hat - self.theta_hat
    }
}

pub fn mle_parameters(counts: &CellCounts) -> Result<MleParameters> {
    let CellCounts {
        n1,
        n2,
        n3,
        n4,
        n5,
        n6,
        n_tot,
    } = *counts;
    if n1 + n3 == 0 {
        return Err(CrcError::NoValidatedPositives);
    }
    if n2 + n4 == 0 {
        return Err(CrcError::NoAnchorOutsideStream1);
    }
    let nt = n_tot as f64;
    let (n1f, n2f, n3f, n4f, n5f, n6f) = (
        n1 as f64, n2 as f64, n3 as f64, n4 as f64, n5 as f64, n6 as f64,
    );
    let unsignaled = n2f + n4f + n6f;
    let params = MleParameters {
        psi_hat: (n1f + n2f + n3f + n4f) / nt,
        psi_star_hat: (n2f + n4f) / unsignaled,
        theta_hat: (n1f + n3f + n5f) / nt,
        pi_hat: ((n1f + n3f + n5f) + n2f / (n2f + n4f) * unsignaled) / nt,
        ppv1_hat: n1f / (n1f + n3f),
    };
    let prev = params.prevalence();
    if !(-1e-12..=1.0 + 1e-12).contains(&prev) {
        return Err(CrcError::Internal(format!(
            "estimated prevalence {prev} outside [0,1]"
        )));
    }
    Ok(params)
}

/// Re-parameterised cell probabilities of the collapsed table, in n1..n6 order.
pub fn cell_probabilities(psi: f64, theta: f64, pi: f64, ppv1: f64) -> [f64; 6] {
    [
        psi * ppv1 * theta,
        psi * (pi - theta),
        psi * (1.0 - ppv1) * theta,
        psi * (1.0 - pi),
        (1.0 - psi) * theta,
        (1.0 - psi) * (1.0 - theta),
    ]
}

/// Closed-form MLE `PPV1_hat (m11 + m10) + m01 / psi*_hat`.
///
/// The result is cross-checked against `N_tot (PPV1 theta + pi - theta)`;
/// disagreement beyond [`MLE_IDENTITY_RTOL`] is reported as an internal fault.
pub fn estimate_mle(counts: &CellCounts) -> Result<Estimate> {
    let params = mle_parameters(counts)?;
    let table = derive_crc_table(counts);
    let n_hat = params.ppv1_hat * table.m1dot() as f64 + table.m01 as f64 / params.psi_star_hat;
    let via_prevalence = counts.n_tot as f64 * params.prevalence();
    let scale = n_hat.abs().max(via_prevalence.abs()).max(1.0);
    if (n_hat - via_prevalence).abs() > MLE_IDENTITY_RTOL * scale {
        return Err(CrcError::Internal(format!(
            "MLE forms disagree: {n_hat} vs {via_prevalence}"
        )));
    }
    Ok(Estimate::point(EstimatorKind::Mle, n_hat))
}
