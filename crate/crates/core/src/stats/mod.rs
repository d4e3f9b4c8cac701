//! Hypothesis testing over dissimilarity samples and per-category reporting.

mod report;
mod ttest;

pub use image_test::{run_image_test, Comparison, ImageOutcome, ImageTestResult, TestConfig};
pub use report::{aggregate_categories, CategoryReport, CategoryRow};
pub use ttest::{students_t_test, two_sample_t_test, TTest, TestKind};

use thiserror::Error;

use crate::dissimilarity::DissimilarityError;

/// Significance level used throughout (95% confidence).
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("each sample needs at least 2 values (got {a} and {b})")]
    TooFewSamples { a: usize, b: usize },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("{set} comparison for image {image_id}: {source}")]
    Dissimilarity {
        image_id: String,
        set: &'static str,
        #[source]
        source: DissimilarityError,
    },
    #[error("image {0} is not in the manifest")]
    UnknownImage(String),
}
