use thiserror::Error;

/// Errors raised by tabulation, estimation and simulation.
///
/// Identifiability failures get their own variants so callers can report
/// which condition on the cell counts was violated.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrcError {
    #[error("duplicate subject_id `{0}`")]
    DuplicateSubject(String),

    #[error("{records} records exceed the population size n_tot={n_tot}")]
    TooManyRecords { records: usize, n_tot: u64 },

    #[error("record `{0}` has no stream signals")]
    EmptySignals(String),

    #[error("record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("n1+n3=0: no validated positives, PPV1 is not identifiable")]
    NoValidatedPositives,

    #[error("n2+n4=0: no anchor-sampled subjects outside stream 1, psi* is not identifiable")]
    NoAnchorOutsideStream1,

    #[error(
        "n11=0: no subjects confirmed by both streams, Lincoln-Petersen variance is undefined"
    )]
    NoDualCaptures,

    #[error("stream {0} captured no one: the Chapman estimate is undefined")]
    EmptyCaptureStream(u8),

    #[error("at least {needed} values are required, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("no usable replicates for estimator `{0}`: every replicate was non-identifiable")]
    NoUsableReplicates(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("internal fault: {0}")]
    Internal(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl CrcError {
    /// True for failures caused by degenerate cell counts rather than bad input.
    pub fn is_identifiability(&self) -> bool {
        matches!(
            self,
            CrcError::NoValidatedPositives
                | CrcError::NoAnchorOutsideStream1
                | CrcError::NoDualCaptures
                | CrcError::EmptyCaptureStream(_)
        )
    }
}

impl From<csv::Error> for CrcError {
    fn from(e: csv::Error) -> Self {
        CrcError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CrcError>;
