//! Estimating `E(X_{n+1} | X_0, ..., X_n)` for a stationary real-valued time
//! series, not at every `n` but along data-driven stopping times at which the
//! quantized past recurs.
//!
//! - [`quantize`]: nested dyadic partitions, cell representatives, the past metric.
//! - [`sources`]: seeded stationary sources with exact conditional-mean oracles,
//!   including the countable-state chain on which the quantized scheme diverges.
//! - [`estimator`]: the streaming stopping-time estimator and its exact-match variant.
//! - [`metrics`]: oracles, event detectors and stationarity checks per completion.
//! - [`harness`]: configs, replication, CSV output and preset experiments.

pub mod dyadic;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod metrics;
pub mod quantize;
pub mod sources;

pub use dyadic::{Dyadic, DyadicValue};
pub use error::{Error, Result};
pub use estimator::{
    ExactEstimator, ExactMatch, LevelCompletion, MatchRule, Quantized, QuantizedEstimator,
};
pub use harness::{ExperimentConfig, Seeds, SummaryReport};
pub use quantize::{Cell, CellIndex, PastVector, QuantizedBlock};
pub use sources::{Conditioning, SourceModel, SourceSpec};
