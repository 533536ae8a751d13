use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{CrcError, Result};
use crate::estimators::EstimatorKind;
use crate::variance::DEFAULT_IMPUTATIONS;

/// One stratum of the simulated registry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    /// Share of `n_tot`.
    pub fraction: f64,
    pub prevalence: f64,
    /// Probability stream 1 tests a member of this stratum.
    pub stream1_selection: f64,
}

/// Interval methods a simulation can score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    /// Each estimator's frequentist interval: Wald for RS, plug-in and MLE,
    /// the log-transform fallback for Chapman.
    Wald,
    /// MLE credible interval of the kind picked by estimated prevalence.
    Credible,
    CredibleUnadjusted,
    CredibleAdjusted,
}

impl IntervalMethod {
    pub const ALL: [IntervalMethod; 4] = [
        IntervalMethod::Wald,
        IntervalMethod::Credible,
        IntervalMethod::CredibleUnadjusted,
        IntervalMethod::CredibleAdjusted,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IntervalMethod::Wald => "wald",
            IntervalMethod::Credible => "credible",
            IntervalMethod::CredibleUnadjusted => "credible_unadjusted",
            IntervalMethod::CredibleAdjusted => "credible_adjusted",
        }
    }

    pub fn is_credible(self) -> bool {
        self != IntervalMethod::Wald
    }
}

fn default_estimators() -> BTreeSet<EstimatorKind> {
    [
        EstimatorKind::Chapman,
        EstimatorKind::Rs,
        EstimatorKind::Plugin,
        EstimatorKind::Mle,
    ]
    .into()
}

fn default_intervals() -> BTreeSet<IntervalMethod> {
    [IntervalMethod::Wald, IntervalMethod::Credible].into()
}

fn default_imputations() -> usize {
    DEFAULT_IMPUTATIONS
}

fn default_draws() -> usize {
    100
}

/// Ground truth and analysis settings for one simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_tot: u64,
    pub strata: Vec<StratumSpec>,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Anchor sampling rate; the anchor is a simple random sample of exactly
    /// `round(anchor_rate * n_tot)` subjects.
    pub anchor_rate: f64,
    /// Per-stratum true case counts, overriding `round(size * prevalence)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_case_counts: Option<Vec<u64>>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: BTreeSet<EstimatorKind>,
    #[serde(default = "default_intervals")]
    pub interval_methods: BTreeSet<IntervalMethod>,
    #[serde(default = "default_imputations")]
    pub imputations: usize,
    #[serde(default = "default_draws")]
    pub s_outer: usize,
    #[serde(default = "default_draws")]
    pub t_inner: usize,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CrcError::InvalidConfig(format!(
            "{name}={p} must lie in [0, 1]"
        )));
    }
    Ok(())
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tot == 0 {
            return Err(CrcError::InvalidConfig("n_tot must be positive".into()));
        }
        if self.strata.is_empty() {
            return Err(CrcError::InvalidConfig(
                "at least one stratum is required".into(),
            ));
        }
        for (i, s) in self.strata.iter().enumerate() {
            check_probability(&format!("strata[{i}].fraction"), s.fraction)?;
            check_probability(&format!("strata[{i}].prevalence"), s.prevalence)?;
            check_probability(
                &format!("strata[{i}].stream1_selection"),
                s.stream1_selection,
            )?;
        }
        let total: f64 = self.strata.iter().map(|s| s.fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CrcError::InvalidConfig(format!(
                "stratum fractions sum to {total}, not 1"
            )));
        }
        check_probability("sensitivity", self.sensitivity)?;
        check_probability("specificity", self.specificity)?;
        check_probability("anchor_rate", self.anchor_rate)?;
        if self.replicates < 2 {
            return Err(CrcError::InvalidConfig(format!(
                "replicates={} but a summary needs at least 2",
                self.replicates
            )));
        }
        if self.imputations < 2 {
            return Err(CrcError::InvalidConfig(
                "imputations must be at least 2".into(),
            ));
        }
        if self.s_outer == 0 || self.t_inner == 0 {
            return Err(CrcError::InvalidConfig(
                "s_outer and t_inner must be positive".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(CrcError::InvalidConfig("no estimators selected".into()));
        }
        let sizes = self.stratum_sizes();
        if let Some(fixed) = &self.fixed_case_counts {
            if fixed.len() != self.strata.len() {
                return Err(CrcError::InvalidConfig(format!(
                    "{} fixed case counts for {} strata",
                    fixed.len(),
                    self.strata.len()
                )));
            }
            for (i, (&k, &size)) in fixed.iter().zip(&sizes).enumerate() {
                if k > size {
                    return Err(CrcError::InvalidConfig(format!(
                        "fixed_case_counts[{i}]={k} exceeds stratum size {size}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Stratum sizes: rounded shares, with the remainder going to the last.
    pub fn stratum_sizes(&self) -> Vec<u64> {
        let mut sizes: Vec<u64> = self
            .strata
            .iter()
            .map(|s| (s.fraction * self.n_tot as f64).round() as u64)
            .collect();
        if let Some(last) = sizes.len().checked_sub(1) {
            let head: u64 = sizes[..last].iter().sum();
            sizes[last] = self.n_tot.saturating_sub(head);
        }
        sizes
    }

    pub fn stratum_case_counts(&self) -> Vec<u64> {
        match &self.fixed_case_counts {
            Some(fixed) => fixed.clone(),
            None => self
                .stratum_sizes()
                .iter()
                .zip(&self.strata)
                .map(|(&size, s)| (size as f64 * s.prevalence).round() as u64)
                .collect(),
        }
    }

    /// True case count in every replicate.
    pub fn true_case_count(&self) -> u64 {
        self.stratum_case_counts().iter().sum()
    }

    pub fn anchor_sample_size(&self) -> u64 {
        (self.anchor_rate * self.n_tot as f64).round() as u64
    }

    /// (true positive, false positive) probabilities per registry member for
    /// a stream-1 signal, using the realised per-stratum prevalences.
    fn signal_probabilities(&self) -> (f64, f64) {
        let n_tot = self.n_tot as f64;
        let mut tp = 0.0;
        let mut fp = 0.0;
        for ((&size, &cases), s) in self
            .stratum_sizes()
            .iter()
            .zip(&self.stratum_case_counts())
            .zip(&self.strata)
        {
            if size == 0 {
                continue;
            }
            let share = size as f64 / n_tot;
            let prev = cases as f64 / size as f64;
            tp += share * prev * s.stream1_selection;
            fp += share * (1.0 - prev) * s.stream1_selection;
        }
        (self.sensitivity * tp, (1.0 - self.specificity) * fp)
    }

    /// PPV1 implied by the ground truth, by the law of total probability.
    pub fn true_ppv1(&self) -> f64 {
        let (tp, fp) = self.signal_probabilities();
        if tp + fp == 0.0 {
            1.0
        } else {
            tp / (tp + fp)
        }
    }

    /// Expected number of stream-1 positive signals.
    pub fn expected_stream1_positives(&self) -> f64 {
        let (tp, fp) = self.signal_probabilities();
        (tp + fp) * self.n_tot as f64
    }

    pub fn wants_credible(&self) -> bool {
        self.estimators.contains(&EstimatorKind::Mle)
            && self.interval_methods.iter().any(|m| m.is_credible())
    }
}

/// A labelled scenario within a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetting {
    pub label: String,
    pub config: SimConfig,
}

/// A named grid of scenarios, e.g. one table of results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudy {
    pub name: String,
    pub settings: Vec<SimSetting>,
}

impl SimStudy {
    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() {
            return Err(CrcError::InvalidConfig("study has no settings".into()));
        }
        for s in &self.settings {
            s.config
                .validate()
                .map_err(|e| CrcError::InvalidConfig(format!("setting `{}`: {e}", s.label)))?;
        }
        Ok(())
    }
}

/// Either a bare scenario or a study; both are accepted by the simulation
/// front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimDocument {
    Study(SimStudy),
    Single(SimConfig),
}

impl SimDocument {
    pub fn into_study(self, default_name: &str) -> SimStudy {
        match self {
            SimDocument::Study(s) => s,
            SimDocument::Single(config) => SimStudy {
                name: default_name.to_string(),
                settings: vec![SimSetting {
                    label: default_name.to_string(),
                    config,
                }],
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::presets;

    #[test]
    fn sim1_truth() {
        let cfg = presets::simulation1(0.10);
        cfg.validate().unwrap();
        assert_eq!(cfg.stratum_sizes(), vec![400, 600]);
        assert_eq!(cfg.true_case_count(), 100);
        assert_eq!(cfg.anchor_sample_size(), 100);
        assert!((cfg.true_ppv1() - 0.72).abs() < 0.01, "{}", cfg.true_ppv1());
    }

    #[test]
    fn law_of_total_probability_with_configured_prevalences() {
        let mut cfg = presets::simulation1(0.10);
        cfg.fixed_case_counts = None;
        cfg.strata[0].prevalence = 0.182;
        cfg.strata[1].prevalence = 0.046;
        // realised prevalences: round(400*.182)=73 of 400, round(600*.046)=28 of 600
        let f = [0.4, 0.6];
        let pi = [73.0 / 400.0, 28.0 / 600.0];
        let phi = [0.695, 0.347];
        let tp: f64 = (0..2).map(|i| f[i] * pi[i] * phi[i]).sum::<f64>() * 0.9;
        let all: f64 = (0..2).map(|i| f[i] * phi[i]).sum();
        let fp = 0.05 * (all - tp / 0.9);
        assert!((cfg.true_ppv1() - tp / (tp + fp)).abs() < 1e-12);
        assert!((cfg.expected_stream1_positives() - 1000.0 * (tp + fp)).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = presets::simulation1(0.10);
        cfg.replicates = 1;
        assert!(
            matches!(cfg.validate(), Err(CrcError::InvalidConfig(m)) if m.contains("replicates"))
        );

        let mut cfg = presets::simulation1(0.10);
        cfg.fixed_case_counts = Some(vec![401, 0]);
        assert!(matches!(cfg.validate(), Err(CrcError::InvalidConfig(m)) if m.contains("exceeds")));

        let mut cfg = presets::simulation1(0.10);
        cfg.strata[0].fraction = 0.5;
        assert!(matches!(cfg.validate(), Err(CrcError::InvalidConfig(m)) if m.contains("sum")));

        let mut cfg = presets::simulation1(0.10);
        cfg.sensitivity = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_defaults() {
        let json = r#"{
            "n_tot": 100,
            "strata": [{"fraction": 1.0, "prevalence": 0.1, "stream1_selection": 0.5}],
            "sensitivity": 0.9, "specificity": 0.95, "anchor_rate": 0.2,
            "replicates": 10, "seed": 1
        }"#;
        let doc: SimDocument = serde_json::from_str(json).unwrap();
        let study = doc.into_study("x");
        let cfg = &study.settings[0].config;
        assert_eq!(cfg.imputations, 200);
        assert_eq!((cfg.s_outer, cfg.t_inner), (100, 100));
        assert!(cfg.estimators.contains(&EstimatorKind::Mle));
        assert!(cfg.interval_methods.contains(&IntervalMethod::Credible));
        assert_eq!(cfg.true_case_count(), 10);
    }
}
