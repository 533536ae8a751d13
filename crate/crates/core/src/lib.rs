//! Case-count estimation for surveillance registries that combine an
//! error-prone, non-representative stream with a small random "anchor"
//! sample assessed by a gold standard.
//!
//! Records are tabulated into six cells ([`CellCounts`]) from which the
//! random-sample, Chapman, plug-in and maximum-likelihood estimators are
//! computed. Standard errors come from multiple imputation and interval
//! estimates from a nested Dirichlet posterior. The [`sim`] module reproduces
//! the estimators' operating characteristics on simulated registries.
//!
//! All randomness flows from a `u64` master seed through per-task derived
//! streams, so results do not depend on the number of worker threads.

pub mod analysis;
pub mod credible;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod io;
pub mod rng;
pub mod sim;
pub mod variance;

pub use analysis::{analyze_mle, AnalysisOptions, CredibleSet, MleAnalysis, DEFAULT_SEED};
pub use credible::{CredibleInterval, CredibleKind, PosteriorDrawConfig};
pub use domain::{AnchorResult, CellCounts, CrcTable, MultiStreamRecord, SubjectRecord};
pub use error::{CrcError, Result};
pub use estimators::{Estimate, EstimatorKind, IntervalKind, MleParameters};
pub use variance::MiVarianceResult;
