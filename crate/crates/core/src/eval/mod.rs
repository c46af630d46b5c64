//! Cross-validation of the filter, CSP and SVM chain, subject screening and
//! the statistics used to compare paradigms.

mod cv;
mod stats;

pub use cv::{
    cross_validate, evaluate_split, stratified_folds, CSelection, CvReport, FitScope, FoldOutcome,
    PipelineConfig, C_GRID,
};
pub use stats::{
    likert_summary, paired_t_test, regularized_incomplete_beta, student_t_two_tailed_p, two_sample_t_test,
    LikertSummary, PairedTestResult, TwoSampleTestResult,
};

use serde::{Deserialize, Serialize};

pub const DEFAULT_SCREEN_THRESHOLD: f64 = 0.6;

/// Mean cross-validated accuracy of one subject under both paradigms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectAccuracy {
    pub subject: String,
    pub first: f64,
    pub second: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Screening {
    pub included: Vec<String>,
    pub excluded: Vec<String>,
}

/// A subject is excluded only when accuracy is below `threshold` under
/// both paradigms; a value equal to the threshold counts as passing.
pub fn screen_subjects(subjects: &[SubjectAccuracy], threshold: f64) -> Screening {
    let mut out = Screening::default();
    for s in subjects {
        if s.first < threshold && s.second < threshold {
            out.excluded.push(s.subject.clone());
        } else {
            out.included.push(s.subject.clone());
        }
    }
    out
}
