use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{IntervalMethod, SimConfig, SimStudy};
use super::generate::{generate_replicate, Replicate};
use crate::analysis::{analyze_mle, analyze_plugin, chapman_from_counts, AnalysisOptions};
use crate::domain::{derive_crc_table, tabulate_records, CellCounts};
use crate::error::{CrcError, Result};
use crate::estimators::{
    estimate_anchor_exact, estimate_mle, estimate_rs_from_counts, mle_parameters, Estimate,
    EstimatorKind,
};
use crate::rng::derive_seed;
use crate::variance::mi_variance_estimated_ppv;

/// One estimator's result on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub n_hat: f64,
    pub se: Option<f64>,
    /// `(lower, upper)` per scored interval method.
    pub intervals: BTreeMap<IntervalMethod, (f64, f64)>,
    /// The adjusted credible interval was wanted but unavailable, so the
    /// unadjusted one was scored in its place.
    pub credible_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: u64,
    pub true_n: u64,
    pub cell_counts: CellCounts,
    pub stream1_positives: u64,
    pub stream1_true_positives: u64,
    pub estimates: BTreeMap<EstimatorKind, EstimatorOutcome>,
    /// Estimators that were not identifiable on this replicate, with the reason.
    pub failures: BTreeMap<EstimatorKind, String>,
}

/// Results for every replicate of one labelled setting, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingOutcomes {
    pub label: String,
    pub outcomes: Vec<ReplicateOutcome>,
}

fn replicate_options(cfg: &SimConfig, index: u64) -> AnalysisOptions {
    AnalysisOptions {
        imputations: cfg.imputations,
        s_outer: cfg.s_outer,
        t_inner: cfg.t_inner,
        seed: derive_seed(cfg.seed, &[index, 1]),
    }
}

fn wald_only(est: &Estimate) -> EstimatorOutcome {
    let mut intervals = BTreeMap::new();
    if let Some(ci) = est.interval() {
        intervals.insert(IntervalMethod::Wald, ci);
    }
    EstimatorOutcome {
        n_hat: est.n_hat,
        se: est.se,
        intervals,
        credible_fallback: false,
    }
}

fn evaluate_mle(
    counts: &CellCounts,
    cfg: &SimConfig,
    opts: &AnalysisOptions,
) -> Result<EstimatorOutcome> {
    if !cfg.wants_credible() {
        let params = mle_parameters(counts)?;
        let mi = mi_variance_estimated_ppv(
            counts,
            params.psi_star_hat,
            opts.imputations,
            opts.mi_seed(),
        )?;
        return Ok(wald_only(&estimate_mle(counts)?.with_wald(mi.se())));
    }
    let analysis = analyze_mle(counts, opts)?;
    let mut out = wald_only(&analysis.estimate);
    let set = &analysis.credible;
    for &method in &cfg.interval_methods {
        let ci = match method {
            IntervalMethod::Wald => continue,
            IntervalMethod::Credible => {
                out.credible_fallback |= set.fell_back();
                set.selected()
            }
            IntervalMethod::CredibleUnadjusted => &set.unadjusted,
            IntervalMethod::CredibleAdjusted => match &set.adjusted {
                Some(adj) => adj,
                None => {
                    out.credible_fallback = true;
                    &set.unadjusted
                }
            },
        };
        out.intervals.insert(method, (ci.lower, ci.upper));
    }
    Ok(out)
}

fn evaluate(
    kind: EstimatorKind,
    counts: &CellCounts,
    cfg: &SimConfig,
    opts: &AnalysisOptions,
) -> Result<EstimatorOutcome> {
    match kind {
        EstimatorKind::Rs => Ok(wald_only(&estimate_rs_from_counts(counts)?)),
        EstimatorKind::AnchorExact => {
            let params = mle_parameters(counts)?;
            Ok(wald_only(&estimate_anchor_exact(
                &derive_crc_table(counts),
                params.psi_star_hat,
            )?))
        }
        EstimatorKind::Chapman => Ok(wald_only(&chapman_from_counts(counts)?)),
        EstimatorKind::Plugin => {
            let (est, _) = analyze_plugin(
                &derive_crc_table(counts),
                cfg.true_ppv1(),
                cfg.anchor_rate,
                opts,
            )?;
            Ok(wald_only(&est))
        }
        EstimatorKind::Mle => evaluate_mle(counts, cfg, opts),
    }
}

/// Scores every configured estimator on one generated replicate.
/// Estimator-level failures are recorded; only internal faults propagate.
pub fn run_replicate(
    replicate: &Replicate,
    index: u64,
    cfg: &SimConfig,
) -> Result<ReplicateOutcome> {
    let counts = tabulate_records(&replicate.records, cfg.n_tot)?;
    let opts = replicate_options(cfg, index);
    let mut estimates = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for &kind in &cfg.estimators {
        match evaluate(kind, &counts, cfg, &opts) {
            Ok(out) => {
                estimates.insert(kind, out);
            }
            Err(e @ CrcError::Internal(_)) => return Err(e),
            Err(e) => {
                failures.insert(kind, e.to_string());
            }
        }
    }
    Ok(ReplicateOutcome {
        index,
        true_n: replicate.true_n,
        cell_counts: counts,
        stream1_positives: replicate.stream1_positives,
        stream1_true_positives: replicate.stream1_true_positives,
        estimates,
        failures,
    })
}

/// Generates and scores replicates `0..cfg.replicates` in parallel; output
/// order and content do not depend on the thread count.
pub fn run_setting(cfg: &SimConfig) -> Result<Vec<ReplicateOutcome>> {
    cfg.validate()?;
    (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|i| run_replicate(&generate_replicate(cfg, i)?, i, cfg))
        .collect()
}

pub fn run_study(study: &SimStudy) -> Result<Vec<SettingOutcomes>> {
    study.validate()?;
    study
        .settings
        .iter()
        .map(|s| {
            Ok(SettingOutcomes {
                label: s.label.clone(),
                outcomes: run_setting(&s.config)?,
            })
        })
        .collect()
}
