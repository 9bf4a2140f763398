//! Analysis of the interaction log: usage classification, collaboration
//! profiles and taxonomy, clustering, preference aggregation, statistics,
//! stratified comparisons and empathy trends.

pub mod kmeans;
pub mod preferences;
pub mod profiles;
pub mod replay;
pub mod report;
pub mod stats;
pub mod strata;
pub mod taxonomy;
pub mod trend;
pub mod usage;

use stats::StatsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("nothing to analyze: {0}")]
    Empty(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
