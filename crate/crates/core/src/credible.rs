//! Posterior simulation of the case count and the credible intervals built
//! from it.
//!
//! Two nested Dirichlet posteriors (Jeffreys priors) are used. The outer one,
//! on the stream-1 signal cells `(n1, n3, n5)`, propagates uncertainty in the
//! PPV of the `m10` cell. The inner one, on the PPV-corrected capture cells
//! `(m11, m10*, m01)`, propagates the capture-recapture uncertainty. Each
//! inner draw regenerates the captured total from a binomial so the draws are
//! not conditioned on the observed capture count.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{derive_crc_table, CellCounts};
use crate::error::{CrcError, Result};
use crate::estimators::mle_parameters;
use crate::rng::{binomial, dirichlet, stream_rng};

/// Jeffreys prior weight on every Dirichlet cell.
pub const JEFFREYS: f64 = 0.5;

/// Estimated prevalence at or above which the adjusted interval is used.
pub const PREVALENCE_THRESHOLD: f64 = 0.20;

/// Fewer total draws than this makes percentile limits unreliable.
pub const MIN_RECOMMENDED_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosteriorDrawConfig {
    /// PPV-level draws.
    pub s_outer: usize,
    /// Cell-level draws per outer draw.
    pub t_inner: usize,
    pub rng_seed: u64,
}

impl PosteriorDrawConfig {
    pub fn new(s_outer: usize, t_inner: usize, rng_seed: u64) -> Self {
        Self {
            s_outer,
            t_inner,
            rng_seed,
        }
    }

    pub fn total(&self) -> usize {
        self.s_outer * self.t_inner
    }
}

impl Default for PosteriorDrawConfig {
    fn default() -> Self {
        Self {
            s_outer: 100,
            t_inner: 100,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CredibleKind {
    Unadjusted,
    Adjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
    pub kind: CredibleKind,
    pub draws_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_b: Option<f64>,
}

impl CredibleInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// One draw of `(p1, p3, p5)` from Dirichlet(n1 + .5, n3 + .5, n5 + .5).
pub fn draw_ppv_weights<R: rand::Rng + ?Sized>(counts: &CellCounts, rng: &mut R) -> [f64; 3] {
    dirichlet(
        [
            counts.n1 as f64 + JEFFREYS,
            counts.n3 as f64 + JEFFREYS,
            counts.n5 as f64 + JEFFREYS,
        ],
        rng,
    )
}

/// PPV of the `m10` cell from PPV1 and the signal-cell weights:
/// `(1 + r) PPV1 - r` with `r = p1 / (p3 + p5)`, clamped to [0, 1].
pub fn ppv10_from_probs(ppv1: f64, p1: f64, p3: f64, p5: f64) -> Result<f64> {
    if p1 < 0.0 || p3 < 0.0 || p5 < 0.0 {
        return Err(CrcError::InvalidArgument(
            "weights must be nonnegative".into(),
        ));
    }
    if p3 + p5 <= 0.0 {
        return Err(CrcError::InvalidArgument(
            "p3+p5=0: PPV10 ratio undefined".into(),
        ));
    }
    let r = p1 / (p3 + p5);
    Ok(((1.0 + r) * ppv1 - r).clamp(0.0, 1.0))
}

/// Posterior draws of the case count, `s_outer * t_inner` of them, ordered
/// by outer then inner index.
pub fn posterior_case_count_draws(
    counts: &CellCounts,
    cfg: &PosteriorDrawConfig,
) -> Result<Vec<f64>> {
    let params = mle_parameters(counts)?;
    if cfg.total() == 0 {
        return Err(CrcError::InvalidArgument(
            "posterior draw count must be positive".into(),
        ));
    }
    if cfg.total() < MIN_RECOMMENDED_DRAWS {
        warn!(
            "{} posterior draws is below the recommended {}",
            cfg.total(),
            MIN_RECOMMENDED_DRAWS
        );
    }
    let psi = params.psi_star_hat;
    let table = derive_crc_table(counts);
    let (m11, m10, m01) = (table.m11 as f64, table.m10 as f64, table.m01 as f64);

    let blocks: Vec<Vec<f64>> = (0..cfg.s_outer as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(cfg.rng_seed, &[s]);
            let [p1, p3, p5] = draw_ppv_weights(counts, &mut rng);
            let ppv10 = ppv10_from_probs(p1 / (p1 + p3), p1, p3, p5)
                .expect("posterior weights are strictly positive");
            let m10_adj = m10 * ppv10;
            let captured = m11 + m10_adj + m01;
            (0..cfg.t_inner)
                .map(|_| {
                    let [q11, q10, q01] = dirichlet(
                        [m11 + JEFFREYS, m10_adj + JEFFREYS, m01 + JEFFREYS],
                        &mut rng,
                    );
                    let cells = UnconditionalCells::new(q11, q10, q01, psi);
                    let n_given_captured = captured / cells.captured;
                    let size = (n_given_captured + 0.5).floor() as u64;
                    let recaptured = binomial(size, cells.captured, &mut rng) as f64;
                    let [c11, c10, c01] = cells.allocate(recaptured);
                    c11 + c10 + c01 / psi
                })
                .collect()
        })
        .collect();
    Ok(blocks.concat())
}

/// Unconditional probabilities that a case lands in each observed cell,
/// given conditional-on-capture proportions and the anchor rate.
#[derive(Debug, Clone, Copy)]
pub struct UnconditionalCells {
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    /// `p11 + p10 + p01`, the probability a case is captured at all.
    pub captured: f64,
}

impl UnconditionalCells {
    pub fn new(q11: f64, q10: f64, q01: f64, psi: f64) -> Self {
        let s1 = q11 + q10;
        let p1 = psi * s1 / (psi * s1 + q01);
        let p11 = p1 * q11 / s1;
        let p10 = p1 * q10 / s1;
        let p01 = psi * (1.0 - p1);
        Self {
            p11,
            p10,
            p01,
            captured: p11 + p10 + p01,
        }
    }

    /// Splits a captured total across the three cells in proportion to the
    /// unconditional probabilities.
    pub fn allocate(&self, total: f64) -> [f64; 3] {
        let k = total / self.captured;
        [k * self.p11, k * self.p10, k * self.p01]
    }
}

/// Type-7 quantile of sorted data: linear interpolation between order
/// statistics at position `(n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn percentile_limits(draws: &[f64]) -> Result<(f64, f64)> {
    if draws.len() < 2 {
        return Err(CrcError::TooFew {
            needed: 2,
            got: draws.len(),
        });
    }
    if draws.iter().any(|d| !d.is_finite()) {
        return Err(CrcError::Internal("non-finite posterior draw".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        quantile_sorted(&sorted, 0.025),
        quantile_sorted(&sorted, 0.975),
    ))
}

/// (2.5%, 97.5%) percentile interval of the draws.
pub fn interval_unadjusted(draws: &[f64]) -> Result<CredibleInterval> {
    let (lower, upper) = percentile_limits(draws)?;
    Ok(CredibleInterval {
        lower,
        upper,
        kind: CredibleKind::Unadjusted,
        draws_used: draws.len(),
        scale_a: None,
        shift_b: None,
    })
}

/// Scale-and-shift interval. Draws are mapped to `a x + b` with
/// `a = sqrt(var_comp_b / var_mi)` and `b = n_hat (1 - a)`; the percentile
/// limits of the mapped draws are then pulled halfway towards the RS Wald
/// limits whenever that narrows the interval.
pub fn interval_adjusted(
    draws: &[f64],
    n_hat: f64,
    var_mi: f64,
    var_comp_b: f64,
    rs_wald: (f64, f64),
) -> Result<CredibleInterval> {
    if !(var_mi > 0.0 && var_comp_b > 0.0) {
        return Err(CrcError::InvalidArgument(format!(
            "adjusted interval needs positive variances, got var_mi={var_mi}, var_comp_b={var_comp_b}"
        )));
    }
    let a = (var_comp_b / var_mi).sqrt();
    let b = n_hat * (1.0 - a);
    let mapped: Vec<f64> = draws.iter().map(|&x| a * x + b).collect();
    let (ll_ab, ul_ab) = percentile_limits(&mapped)?;
    let (ll_rs, ul_rs) = rs_wald;
    let (lower, upper) = blend_with_rs((ll_ab, ul_ab), (ll_rs, ul_rs));
    Ok(CredibleInterval {
        lower,
        upper,
        kind: CredibleKind::Adjusted,
        draws_used: draws.len(),
        scale_a: Some(a),
        shift_b: Some(b),
    })
}

/// `LL = max(LL_ab, (LL_ab + LL_rs)/2)`, `UL = min(UL_ab, (UL_ab + UL_rs)/2)`.
pub fn blend_with_rs(ab: (f64, f64), rs: (f64, f64)) -> (f64, f64) {
    let lower = ab.0.max((ab.0 + rs.0) / 2.0);
    let upper = ab.1.min((ab.1 + rs.1) / 2.0);
    (lower, upper)
}

/// Unadjusted below 20% estimated prevalence, adjusted at or above it.
pub fn choose_interval(n_hat: f64, n_tot: u64) -> CredibleKind {
    if n_hat / (n_tot as f64) < PREVALENCE_THRESHOLD {
        CredibleKind::Unadjusted
    } else {
        CredibleKind::Adjusted
    }
}
