use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::IntervalMethod;
use super::run::{ReplicateOutcome, SettingOutcomes};
use crate::error::{CrcError, Result};
use crate::estimators::EstimatorKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub scored: usize,
    pub covered: usize,
    /// In [0, 100].
    pub coverage_pct: f64,
    pub mean_width: f64,
}

/// Aggregates over the replicates on which an estimator was identifiable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub used: usize,
    pub excluded: usize,
    pub mean_n_hat: f64,
    /// Divisor `used - 1`; absent with a single usable replicate.
    pub empirical_sd: Option<f64>,
    pub avg_se: Option<f64>,
    pub intervals: BTreeMap<IntervalMethod, IntervalSummary>,
    /// Replicates whose adjusted credible interval was replaced by the unadjusted one.
    pub credible_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub label: String,
    pub replicates: usize,
    pub mean_true_n: f64,
    /// Pooled share of stream-1 signals that were true cases.
    pub empirical_ppv1: Option<f64>,
    pub estimators: BTreeMap<EstimatorKind, EstimatorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub name: String,
    pub settings: Vec<MonteCarloSummary>,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

fn summarize_estimator(
    kind: EstimatorKind,
    outcomes: &[ReplicateOutcome],
) -> Result<EstimatorSummary> {
    let rows: Vec<_> = outcomes
        .iter()
        .filter_map(|o| o.estimates.get(&kind).map(|e| (o, e)))
        .collect();
    if rows.is_empty() {
        return Err(CrcError::NoUsableReplicates(kind.label().to_string()));
    }
    let used = rows.len();
    let mean_n_hat = mean(rows.iter().map(|(_, e)| e.n_hat));
    let empirical_sd = (used >= 2).then(|| {
        let ss: f64 = rows
            .iter()
            .map(|(_, e)| (e.n_hat - mean_n_hat).powi(2))
            .sum();
        (ss / (used - 1) as f64).sqrt()
    });
    let ses: Vec<f64> = rows.iter().filter_map(|(_, e)| e.se).collect();
    let avg_se = (!ses.is_empty()).then(|| mean(ses.iter().copied()));

    let methods: BTreeSet<IntervalMethod> = rows
        .iter()
        .flat_map(|(_, e)| e.intervals.keys().copied())
        .collect();
    let mut intervals = BTreeMap::new();
    for method in methods {
        let (mut scored, mut covered, mut width) = (0usize, 0usize, 0.0);
        for (o, e) in &rows {
            if let Some(&(lo, hi)) = e.intervals.get(&method) {
                let truth = o.true_n as f64;
                scored += 1;
                covered += (lo <= truth && truth <= hi) as usize;
                width += hi - lo;
            }
        }
        intervals.insert(
            method,
            IntervalSummary {
                scored,
                covered,
                coverage_pct: 100.0 * covered as f64 / scored as f64,
                mean_width: width / scored as f64,
            },
        );
    }
    Ok(EstimatorSummary {
        used,
        excluded: outcomes.len() - used,
        mean_n_hat,
        empirical_sd,
        avg_se,
        intervals,
        credible_fallbacks: rows.iter().filter(|(_, e)| e.credible_fallback).count(),
    })
}

/// Table-style aggregates. Replicates where an estimator failed are left out
/// of that estimator's figures and counted in `excluded`.
pub fn monte_carlo_summary(
    label: &str,
    outcomes: &[ReplicateOutcome],
) -> Result<MonteCarloSummary> {
    if outcomes.len() < 2 {
        return Err(CrcError::TooFew {
            needed: 2,
            got: outcomes.len(),
        });
    }
    let kinds: BTreeSet<EstimatorKind> = outcomes
        .iter()
        .flat_map(|o| o.estimates.keys().chain(o.failures.keys()).copied())
        .collect();
    let estimators = kinds
        .into_iter()
        .map(|k| Ok((k, summarize_estimator(k, outcomes)?)))
        .collect::<Result<_>>()?;
    let signals: u64 = outcomes.iter().map(|o| o.stream1_positives).sum();
    let hits: u64 = outcomes.iter().map(|o| o.stream1_true_positives).sum();
    Ok(MonteCarloSummary {
        label: label.to_string(),
        replicates: outcomes.len(),
        mean_true_n: mean(outcomes.iter().map(|o| o.true_n as f64)),
        empirical_ppv1: (signals > 0).then(|| hits as f64 / signals as f64),
        estimators,
    })
}

pub fn summarize_study(name: &str, settings: &[SettingOutcomes]) -> Result<StudySummary> {
    Ok(StudySummary {
        name: name.to_string(),
        settings: settings
            .iter()
            .map(|s| monte_carlo_summary(&s.label, &s.outcomes))
            .collect::<Result<_>>()?,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per setting and estimator; interval columns are blank where a
/// method was not scored.
pub fn write_summary_csv<W: Write>(writer: W, study: &StudySummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "study",
        "setting",
        "estimator",
        "replicates",
        "used",
        "excluded",
        "true_n",
        "mean_n_hat",
        "empirical_sd",
        "avg_se",
        "empirical_ppv1",
        "credible_fallbacks",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in IntervalMethod::ALL {
        header.push(format!("{}_coverage_pct", m.label()));
        header.push(format!("{}_mean_width", m.label()));
    }
    w.write_record(&header)?;
    for s in &study.settings {
        for (kind, e) in &s.estimators {
            let mut row = vec![
                study.name.clone(),
                s.label.clone(),
                kind.label().to_string(),
                s.replicates.to_string(),
                e.used.to_string(),
                e.excluded.to_string(),
                s.mean_true_n.to_string(),
                e.mean_n_hat.to_string(),
                opt(e.empirical_sd),
                opt(e.avg_se),
                opt(s.empirical_ppv1),
                e.credible_fallbacks.to_string(),
            ];
            for m in IntervalMethod::ALL {
                let i = e.intervals.get(&m);
                row.push(opt(i.map(|i| i.coverage_pct)));
                row.push(opt(i.map(|i| i.mean_width)));
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| CrcError::Csv(e.to_string()))?;
    Ok(())
}
