//! The four simulation designs: a two-stratum registry where stream 1 tests
//! the high-risk stratum (40% of members) about twice as often as the rest.

use std::collections::BTreeSet;

use super::config::{IntervalMethod, SimConfig, SimSetting, SimStudy, StratumSpec};
use crate::estimators::EstimatorKind;

const HIGH_RISK_SHARE: f64 = 0.4;
const HIGH_RISK_PREVALENCE: f64 = 0.182;
const LOW_RISK_PREVALENCE: f64 = 0.046;
const HIGH_RISK_SELECTION: f64 = 0.695;
const LOW_RISK_SELECTION: f64 = 0.347;
const DEFAULT_REPLICATES: usize = 2000;

/// Nominal overall prevalence of the base design.
const BASE_PREVALENCE: f64 = 0.10;

/// Expected share of cases in the high-risk stratum, 0.4 * 0.182 / (0.4 * 0.182 + 0.6 * 0.046).
const HIGH_RISK_CASE_SHARE: f64 = HIGH_RISK_SHARE * HIGH_RISK_PREVALENCE
    / (HIGH_RISK_SHARE * HIGH_RISK_PREVALENCE + (1.0 - HIGH_RISK_SHARE) * LOW_RISK_PREVALENCE);

/// Two strata whose prevalences are the base design's scaled by
/// `prevalence / 0.10`. The case total is fixed at `round(prevalence * n_tot)`
/// and split between strata in expectation-proportional shares.
pub fn two_strata(n_tot: u64, prevalence: f64) -> (Vec<StratumSpec>, Vec<u64>) {
    let scale = prevalence / BASE_PREVALENCE;
    let strata = vec![
        StratumSpec {
            fraction: HIGH_RISK_SHARE,
            prevalence: (HIGH_RISK_PREVALENCE * scale).min(1.0),
            stream1_selection: HIGH_RISK_SELECTION,
        },
        StratumSpec {
            fraction: 1.0 - HIGH_RISK_SHARE,
            prevalence: (LOW_RISK_PREVALENCE * scale).min(1.0),
            stream1_selection: LOW_RISK_SELECTION,
        },
    ];
    let total = (prevalence * n_tot as f64).round() as u64;
    let high = (total as f64 * HIGH_RISK_CASE_SHARE).round() as u64;
    (strata, vec![high, total - high])
}

fn base(
    n_tot: u64,
    prevalence: f64,
    anchor_rate: f64,
    sensitivity: f64,
    specificity: f64,
    seed: u64,
) -> SimConfig {
    let (strata, cases) = two_strata(n_tot, prevalence);
    SimConfig {
        n_tot,
        strata,
        sensitivity,
        specificity,
        anchor_rate,
        fixed_case_counts: Some(cases),
        replicates: DEFAULT_REPLICATES,
        seed,
        estimators: [
            EstimatorKind::Chapman,
            EstimatorKind::Rs,
            EstimatorKind::Plugin,
            EstimatorKind::Mle,
        ]
        .into(),
        interval_methods: [IntervalMethod::Wald, IntervalMethod::Credible].into(),
        imputations: 200,
        s_outer: 100,
        t_inner: 100,
    }
}

fn percent(x: f64) -> u64 {
    (x * 100.0).round() as u64
}

/// N_tot = 1000, 100 cases, Se = 0.9, Sp = 0.95.
pub fn simulation1(anchor_rate: f64) -> SimConfig {
    base(
        1000,
        0.10,
        anchor_rate,
        0.90,
        0.95,
        1_000 + percent(anchor_rate),
    )
}

/// N_tot = 5000, 500 cases, otherwise as simulation 1.
pub fn simulation2(anchor_rate: f64) -> SimConfig {
    base(
        5000,
        0.10,
        anchor_rate,
        0.90,
        0.95,
        2_000 + percent(anchor_rate),
    )
}

/// Simulation 1 at a 10% anchor rate with a less accurate stream 1.
pub fn simulation3(sensitivity: f64, specificity: f64) -> SimConfig {
    base(
        1000,
        0.10,
        0.10,
        sensitivity,
        specificity,
        3_000 + percent(sensitivity) * 100 + percent(specificity),
    )
}

/// N_tot = 1000 at a chosen prevalence, comparing RS with the MLE only.
pub fn simulation4(prevalence: f64, anchor_rate: f64) -> SimConfig {
    let mut cfg = base(
        1000,
        prevalence,
        anchor_rate,
        0.90,
        0.95,
        4_000 + percent(prevalence) * 100 + percent(anchor_rate),
    );
    cfg.estimators = BTreeSet::from([EstimatorKind::Rs, EstimatorKind::Mle]);
    cfg.interval_methods = BTreeSet::from([
        IntervalMethod::Wald,
        IntervalMethod::Credible,
        IntervalMethod::CredibleUnadjusted,
        IntervalMethod::CredibleAdjusted,
    ]);
    cfg
}

/// A 200-member registry with 20 cases, scored on the MLE and its
/// unadjusted credible interval only.
pub fn small_registry(anchor_rate: f64) -> SimConfig {
    let mut cfg = base(
        200,
        0.10,
        anchor_rate,
        0.90,
        0.95,
        5_000 + percent(anchor_rate),
    );
    cfg.estimators = BTreeSet::from([EstimatorKind::Mle]);
    cfg.interval_methods = BTreeSet::from([IntervalMethod::CredibleUnadjusted]);
    cfg
}

pub fn study1() -> SimStudy {
    SimStudy {
        name: "sim1".into(),
        settings: [0.05, 0.10, 0.20, 0.50]
            .iter()
            .map(|&p2| SimSetting {
                label: format!("p2={}%", percent(p2)),
                config: simulation1(p2),
            })
            .collect(),
    }
}

pub fn study2() -> SimStudy {
    SimStudy {
        name: "sim2".into(),
        settings: [0.02, 0.04, 0.10, 0.20]
            .iter()
            .map(|&p2| SimSetting {
                label: format!("p2={}%", percent(p2)),
                config: simulation2(p2),
            })
            .collect(),
    }
}

pub fn study3() -> SimStudy {
    SimStudy {
        name: "sim3".into(),
        settings: [(0.90, 0.95), (0.70, 0.95), (0.90, 0.80), (0.70, 0.80)]
            .iter()
            .map(|&(se, sp)| SimSetting {
                label: format!("Se={se:.2},Sp={sp:.2}"),
                config: simulation3(se, sp),
            })
            .collect(),
    }
}

pub fn study4() -> SimStudy {
    let mut settings = Vec::new();
    for prevalence in [0.10, 0.30, 0.50] {
        for p2 in [0.10, 0.30, 0.50] {
            settings.push(SimSetting {
                label: format!("p={}%,p2={}%", percent(prevalence), percent(p2)),
                config: simulation4(prevalence, p2),
            });
        }
    }
    SimStudy {
        name: "sim4".into(),
        settings,
    }
}
