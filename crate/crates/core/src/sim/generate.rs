use rand::seq::index;
use rand::Rng;

use super::config::SimConfig;
use crate::domain::{AnchorResult, SubjectRecord};
use crate::error::Result;
use crate::rng::stream_rng;

/// One simulated registry, reduced to the subjects either stream observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub records: Vec<SubjectRecord>,
    pub true_n: u64,
    /// Stream-1 positive signals.
    pub stream1_positives: u64,
    /// Stream-1 positive signals from true cases.
    pub stream1_true_positives: u64,
}

impl Replicate {
    /// Realised PPV of stream 1, `None` without signals.
    pub fn empirical_ppv1(&self) -> Option<f64> {
        (self.stream1_positives > 0)
            .then(|| self.stream1_true_positives as f64 / self.stream1_positives as f64)
    }
}

/// Draws replicate `replicate_index` of `cfg`. Same inputs, same output.
///
/// Cases are placed without replacement within each stratum. Stream 1 tests
/// each subject independently at its stratum's selection rate and keeps only
/// positive signals. The anchor is a simple random sample of exactly
/// `cfg.anchor_sample_size()` subjects, assessed without error.
pub fn generate_replicate(cfg: &SimConfig, replicate_index: u64) -> Result<Replicate> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, &[replicate_index, 0]);
    let n_tot = cfg.n_tot as usize;
    let sizes = cfg.stratum_sizes();
    let cases = cfg.stratum_case_counts();

    let mut is_case = vec![false; n_tot];
    let mut selection = vec![0.0; n_tot];
    let mut start = 0usize;
    for ((&size, &k), spec) in sizes.iter().zip(&cases).zip(&cfg.strata) {
        let size = size as usize;
        for i in index::sample(&mut rng, size, k as usize) {
            is_case[start + i] = true;
        }
        selection[start..start + size].fill(spec.stream1_selection);
        start += size;
    }

    let mut signal = vec![false; n_tot];
    let (mut positives, mut true_positives) = (0u64, 0u64);
    for i in 0..n_tot {
        if rng.random::<f64>() >= selection[i] {
            continue;
        }
        let p = if is_case[i] {
            cfg.sensitivity
        } else {
            1.0 - cfg.specificity
        };
        if rng.random::<f64>() < p {
            signal[i] = true;
            positives += 1;
            true_positives += is_case[i] as u64;
        }
    }

    let mut anchored = vec![false; n_tot];
    for i in index::sample(&mut rng, n_tot, cfg.anchor_sample_size() as usize) {
        anchored[i] = true;
    }

    let records = (0..n_tot)
        .filter(|&i| signal[i] || anchored[i])
        .map(|i| {
            let anchor = if anchored[i] {
                if is_case[i] {
                    AnchorResult::Positive
                } else {
                    AnchorResult::Negative
                }
            } else {
                AnchorResult::NotSampled
            };
            SubjectRecord::new(format!("s{i}"), signal[i], anchor)
        })
        .collect();

    Ok(Replicate {
        records,
        true_n: cfg.true_case_count(),
        stream1_positives: positives,
        stream1_true_positives: true_positives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::tabulate_records;
    use crate::sim::presets;

    #[test]
    fn deterministic_and_distinct() {
        let cfg = presets::simulation1(0.10);
        assert_eq!(
            generate_replicate(&cfg, 3).unwrap(),
            generate_replicate(&cfg, 3).unwrap()
        );
        assert_ne!(
            generate_replicate(&cfg, 3).unwrap(),
            generate_replicate(&cfg, 4).unwrap()
        );
    }

    #[test]
    fn perfect_stream1_signals_only_cases() {
        let mut cfg = presets::simulation1(0.10);
        cfg.sensitivity = 1.0;
        cfg.specificity = 1.0;
        for r in 0..20 {
            let rep = generate_replicate(&cfg, r).unwrap();
            assert_eq!(rep.stream1_positives, rep.stream1_true_positives);
        }
    }

    #[test]
    fn census_anchor_finds_every_case() {
        let cfg = presets::simulation1(1.0);
        for r in 0..5 {
            let rep = generate_replicate(&cfg, r).unwrap();
            let c = tabulate_records(&rep.records, cfg.n_tot).unwrap();
            assert_eq!(c.anchor_positives(), rep.true_n);
            assert_eq!(c.anchor_sample_size(), cfg.n_tot);
        }
    }
}
