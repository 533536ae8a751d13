//! Capture-profile records and the count tables derived from them.
//!
//! A registry of `n_tot` subjects is observed through a non-anchor
//! surveillance stream (stream 1), which only records positive signals, and
//! an anchor stream (stream 2), a random sample assessed with a gold-standard
//! test. Each subject falls into one of six cells:
//!
//! | cell | anchor        | stream 1     |
//! |------|---------------|--------------|
//! | n1   | sampled, +    | signaled     |
//! | n2   | sampled, +    | not signaled |
//! | n3   | sampled, -    | signaled     |
//! | n4   | sampled, -    | not signaled |
//! | n5   | not sampled   | signaled     |
//! | n6   | not sampled   | not signaled |
//!
//! Subjects absent from a record list belong to n6.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{CrcError, Result};

/// Outcome of the anchor stream for one subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorResult {
    NotSampled,
    Negative,
    Positive,
}

impl AnchorResult {
    pub fn from_parts(sampled: bool, positive: Option<bool>) -> Option<Self> {
        match (sampled, positive) {
            (false, None) => Some(AnchorResult::NotSampled),
            (true, Some(false)) => Some(AnchorResult::Negative),
            (true, Some(true)) => Some(AnchorResult::Positive),
            _ => None,
        }
    }

    pub fn is_sampled(self) -> bool {
        self != AnchorResult::NotSampled
    }

    /// `None` when the subject was not sampled.
    pub fn positive(self) -> Option<bool> {
        match self {
            AnchorResult::NotSampled => None,
            AnchorResult::Negative => Some(false),
            AnchorResult::Positive => Some(true),
        }
    }
}

/// One registry member's capture profile.
///
/// Stream-1 negatives and subjects stream 1 never looked at are not
/// distinguished: only positive signals are recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub stream1_positive: bool,
    pub anchor: AnchorResult,
}

impl SubjectRecord {
    pub fn new(
        subject_id: impl Into<String>,
        stream1_positive: bool,
        anchor: AnchorResult,
    ) -> Self {
        Self {
            subject_id: subject_id.into(),
            stream1_positive,
            anchor,
        }
    }

    /// Builds a record from the flat `(sampled, positive)` representation,
    /// rejecting a positive flag without sampling and vice versa.
    pub fn from_flags(
        subject_id: impl Into<String>,
        stream1_positive: bool,
        stream2_sampled: bool,
        stream2_positive: Option<bool>,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        let anchor =
            AnchorResult::from_parts(stream2_sampled, stream2_positive).ok_or_else(|| {
                CrcError::InvalidRecord {
                    id: subject_id.clone(),
                    reason: "stream2_positive must be present exactly when stream2_sampled is set"
                        .into(),
                }
            })?;
        Ok(Self {
            subject_id,
            stream1_positive,
            anchor,
        })
    }

    pub fn stream2_sampled(&self) -> bool {
        self.anchor.is_sampled()
    }

    pub fn stream2_positive(&self) -> Option<bool> {
        self.anchor.positive()
    }

    /// Index 0..=4 of the cell this record belongs to (n1..n5), or 5 for n6.
    pub fn cell_index(&self) -> usize {
        match (self.anchor, self.stream1_positive) {
            (AnchorResult::Positive, true) => 0,
            (AnchorResult::Positive, false) => 1,
            (AnchorResult::Negative, true) => 2,
            (AnchorResult::Negative, false) => 3,
            (AnchorResult::NotSampled, true) => 4,
            (AnchorResult::NotSampled, false) => 5,
        }
    }
}

/// A record observed by several non-anchor streams plus the anchor stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiStreamRecord {
    pub subject_id: String,
    pub stream_signals: Vec<bool>,
    pub anchor: AnchorResult,
}

/// The six collapsed-table counts plus the registry size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCellCounts")]
pub struct CellCounts {
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub n4: u64,
    pub n5: u64,
    pub n6: u64,
    pub n_tot: u64,
}

#[derive(Deserialize)]
struct RawCellCounts {
    n1: u64,
    n2: u64,
    n3: u64,
    n4: u64,
    n5: u64,
    n6: Option<u64>,
    n_tot: u64,
}

impl TryFrom<RawCellCounts> for CellCounts {
    type Error = CrcError;

    fn try_from(raw: RawCellCounts) -> Result<Self> {
        match raw.n6 {
            Some(n6) => CellCounts::new([raw.n1, raw.n2, raw.n3, raw.n4, raw.n5, n6], raw.n_tot),
            None => {
                CellCounts::with_implicit_n6([raw.n1, raw.n2, raw.n3, raw.n4, raw.n5], raw.n_tot)
            }
        }
    }
}

impl CellCounts {
    /// Validates that the six cells add up to `n_tot`.
    pub fn new(cells: [u64; 6], n_tot: u64) -> Result<Self> {
        if n_tot == 0 {
            return Err(CrcError::InvalidArgument("n_tot must be positive".into()));
        }
        let sum: u64 = cells.iter().sum();
        if sum != n_tot {
            return Err(CrcError::InvalidArgument(format!(
                "cell counts sum to {sum} but n_tot={n_tot}"
            )));
        }
        let [n1, n2, n3, n4, n5, n6] = cells;
        Ok(Self {
            n1,
            n2,
            n3,
            n4,
            n5,
            n6,
            n_tot,
        })
    }

    /// n6 is whatever remains of `n_tot` after the first five cells.
    pub fn with_implicit_n6(first_five: [u64; 5], n_tot: u64) -> Result<Self> {
        let sum: u64 = first_five.iter().sum();
        if sum > n_tot {
            return Err(CrcError::InvalidArgument(format!(
                "n1..n5 sum to {sum}, more than n_tot={n_tot}"
            )));
        }
        let [n1, n2, n3, n4, n5] = first_five;
        Self::new([n1, n2, n3, n4, n5, n_tot - sum], n_tot)
    }

    pub fn cells(&self) -> [u64; 6] {
        [self.n1, self.n2, self.n3, self.n4, self.n5, self.n6]
    }

    /// Anchor sample size n1+n2+n3+n4.
    pub fn anchor_sample_size(&self) -> u64 {
        self.n1 + self.n2 + self.n3 + self.n4
    }

    /// Anchor positives n1+n2.
    pub fn anchor_positives(&self) -> u64 {
        self.n1 + self.n2
    }

    /// Stream-1 positive signals n1+n3+n5.
    pub fn stream1_positives(&self) -> u64 {
        self.n1 + self.n3 + self.n5
    }
}

/// Observed two-stream capture-recapture table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrcTable {
    /// Positive in both streams.
    pub m11: u64,
    /// Stream-1 positive, not confirmed by the anchor.
    pub m10: u64,
    /// Anchor positive only.
    pub m01: u64,
}

impl CrcTable {
    pub fn new(m11: u64, m10: u64, m01: u64) -> Self {
        Self { m11, m10, m01 }
    }

    /// Row total m1. (all stream-1 captures).
    pub fn m1dot(&self) -> u64 {
        self.m11 + self.m10
    }

    /// Column total m.1 (all anchor captures).
    pub fn mdot1(&self) -> u64 {
        self.m11 + self.m01
    }

    /// Distinct subjects captured by either stream.
    pub fn captured(&self) -> u64 {
        self.m11 + self.m10 + self.m01
    }
}

/// Classifies records into the six cells. Subjects not listed count toward n6.
pub fn tabulate_records(records: &[SubjectRecord], n_tot: u64) -> Result<CellCounts> {
    if n_tot == 0 {
        return Err(CrcError::InvalidArgument("n_tot must be positive".into()));
    }
    if records.len() as u64 > n_tot {
        return Err(CrcError::TooManyRecords {
            records: records.len(),
            n_tot,
        });
    }
    let mut seen = HashSet::with_capacity(records.len());
    let mut cells = [0u64; 6];
    for r in records {
        if !seen.insert(r.subject_id.as_str()) {
            return Err(CrcError::DuplicateSubject(r.subject_id.clone()));
        }
        cells[r.cell_index()] += 1;
    }
    let listed: u64 = cells[..5].iter().sum();
    if listed > n_tot {
        return Err(CrcError::Internal(format!(
            "n6 would be negative: {listed} classified subjects, n_tot={n_tot}"
        )));
    }
    cells[5] = n_tot - listed;
    CellCounts::new(cells, n_tot)
}

/// Merges all non-anchor streams into one composite stream that flags a
/// subject when any stream does. Anchor results and record order are kept.
pub fn collapse_streams(records: &[MultiStreamRecord]) -> Result<Vec<SubjectRecord>> {
    records
        .iter()
        .map(|r| {
            if r.stream_signals.is_empty() {
                return Err(CrcError::EmptySignals(r.subject_id.clone()));
            }
            Ok(SubjectRecord {
                subject_id: r.subject_id.clone(),
                stream1_positive: r.stream_signals.iter().any(|&s| s),
                anchor: r.anchor,
            })
        })
        .collect()
}

pub fn derive_crc_table(counts: &CellCounts) -> CrcTable {
    CrcTable {
        m11: counts.n1,
        m10: counts.n3 + counts.n5,
        m01: counts.n2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, s1: bool, anchor: AnchorResult) -> SubjectRecord {
        SubjectRecord::new(id, s1, anchor)
    }

    fn example_records() -> Vec<SubjectRecord> {
        let mut out = Vec::new();
        let mut push = |k: usize, s1: bool, a: AnchorResult| {
            for _ in 0..k {
                let id = format!("p{}", out.len());
                out.push(rec(&id, s1, a));
            }
        };
        push(14, true, AnchorResult::Positive);
        push(17, false, AnchorResult::Positive);
        push(3, true, AnchorResult::Negative);
        push(166, false, AnchorResult::Negative);
        push(66, true, AnchorResult::NotSampled);
        out
    }

    #[test]
    fn tabulates_example() {
        let counts = tabulate_records(&example_records(), 1029).unwrap();
        assert_eq!(counts.cells(), [14, 17, 3, 166, 66, 763]);
        assert_eq!(counts.anchor_sample_size(), 200);
    }

    #[test]
    fn empty_records_all_in_n6() {
        let counts = tabulate_records(&[], 10).unwrap();
        assert_eq!(counts.cells(), [0, 0, 0, 0, 0, 10]);
    }

    #[test]
    fn three_hand_classified_records() {
        let records = vec![
            rec("a", true, AnchorResult::Positive),
            rec("b", false, AnchorResult::Negative),
            rec("c", true, AnchorResult::NotSampled),
        ];
        let counts = tabulate_records(&records, 5).unwrap();
        assert_eq!(counts.cells(), [1, 0, 0, 1, 1, 2]);
    }

    #[test]
    fn rejects_duplicates_and_overflow() {
        let dup = vec![
            rec("a", true, AnchorResult::Positive),
            rec("a", false, AnchorResult::Negative),
        ];
        assert_eq!(
            tabulate_records(&dup, 10),
            Err(CrcError::DuplicateSubject("a".into()))
        );

        let many = vec![
            rec("a", true, AnchorResult::Positive),
            rec("b", true, AnchorResult::Positive),
        ];
        assert!(matches!(
            tabulate_records(&many, 1),
            Err(CrcError::TooManyRecords { .. })
        ));
    }

    #[test]
    fn flags_must_agree() {
        assert!(SubjectRecord::from_flags("x", true, false, Some(true)).is_err());
        assert!(SubjectRecord::from_flags("x", true, true, None).is_err());
        let r = SubjectRecord::from_flags("x", false, true, Some(false)).unwrap();
        assert!(r.stream2_sampled());
        assert_eq!(r.stream2_positive(), Some(false));
    }

    #[test]
    fn collapse_is_or() {
        let recs = vec![
            MultiStreamRecord {
                subject_id: "a".into(),
                stream_signals: vec![true, false],
                anchor: AnchorResult::Positive,
            },
            MultiStreamRecord {
                subject_id: "b".into(),
                stream_signals: vec![false, false, false],
                anchor: AnchorResult::NotSampled,
            },
        ];
        let out = collapse_streams(&recs).unwrap();
        assert!(out[0].stream1_positive);
        assert_eq!(out[0].anchor, AnchorResult::Positive);
        assert!(!out[1].stream1_positive);
        assert_eq!(out[1].subject_id, "b");
    }

    #[test]
    fn collapse_rejects_empty_signals() {
        let recs = vec![MultiStreamRecord {
            subject_id: "z".into(),
            stream_signals: vec![],
            anchor: AnchorResult::NotSampled,
        }];
        assert_eq!(
            collapse_streams(&recs),
            Err(CrcError::EmptySignals("z".into()))
        );
    }

    #[test]
    fn crc_table_from_counts() {
        let t6 = CellCounts::new([14, 17, 3, 166, 66, 763], 1029).unwrap();
        assert_eq!(derive_crc_table(&t6), CrcTable::new(14, 69, 17));
        let zero = CellCounts::new([0, 0, 0, 0, 0, 7], 7).unwrap();
        assert_eq!(derive_crc_table(&zero), CrcTable::new(0, 0, 0));
        let small = CellCounts::new([2, 1, 0, 7, 3, 17], 30).unwrap();
        assert_eq!(derive_crc_table(&small), CrcTable::new(2, 3, 1));
    }

    #[test]
    fn counts_json_with_and_without_n6() {
        let c: CellCounts = serde_json::from_str(
            r#"{"n1":14,"n2":17,"n3":3,"n4":166,"n5":66,"n6":763,"n_tot":1029}"#,
        )
        .unwrap();
        assert_eq!(c.n6, 763);
        let c: CellCounts =
            serde_json::from_str(r#"{"n1":14,"n2":17,"n3":3,"n4":166,"n5":66,"n_tot":1029}"#)
                .unwrap();
        assert_eq!(c.n6, 763);
        let bad = serde_json::from_str::<CellCounts>(
            r#"{"n1":14,"n2":17,"n3":3,"n4":166,"n5":66,"n6":1,"n_tot":1029}"#,
        );
        assert!(bad.is_err());
    }
}
