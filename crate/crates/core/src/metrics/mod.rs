//! Trial scoring and the statistics battery used to analyse trials.
//!
//! Scores: placement accuracy with errors weighted a third of a correct
//! move, the time-centred placement score, and the walk score combining
//! total time, search time and scan counts. Statistics: success rates,
//! paired t-test, one-way repeated-measures ANOVA with the
//! Greenhouse-Geisser (Box ε̂) correction, Bonferroni pairwise follow-ups,
//! Cronbach's alpha and the coefficient of variation. All variances use the
//! n-1 denominator.

pub mod dist;
mod matrix;
mod score;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matrix::DataMatrix;
pub use score::{
    accuracy, score_test3, score_test3_cohort, score_test3_with, score_test4, success_rate,
    ScoreInputs3, ScoreInputs4, SuccessRates, TIME_DIVISOR,
};
pub use stats::{
    bonferroni_pairwise, cronbach_alpha, cv, jarque_bera, mean, paired_t_test, rm_anova_gg,
    sample_sd, AlphaResult, AnovaResult, CvResult, NormalityResult, PairwiseComparison,
    PairwiseResult, TTestResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least {needed} {what}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),
    #[error("degenerate data: {0}")]
    Degenerate(&'static str),
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Any statistics output, tagged by kind for JSON reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatsResult {
    TTest(TTestResult),
    Anova(AnovaResult),
    Alpha(AlphaResult),
    Cv(CvResult),
    SuccessRate(SuccessRates),
    Normality(NormalityResult),
}

/// Analyses runnable directly on a subject × column table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    /// Paired t-test between exactly two columns.
    Ttest,
    /// Repeated-measures ANOVA across two or more columns.
    Anova,
    /// Cronbach's alpha across two or more item columns.
    Alpha,
    /// Coefficient of variation of a single column.
    Cv,
}

impl std::str::FromStr for Analysis {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ttest" => Ok(Analysis::Ttest),
            "anova" => Ok(Analysis::Anova),
            "alpha" => Ok(Analysis::Alpha),
            "cv" => Ok(Analysis::Cv),
            other => Err(MetricsError::InvalidInput(format!(
                "unknown analysis {other:?} (expected ttest, anova, alpha or cv)"
            ))),
        }
    }
}

impl Analysis {
    pub fn run(self, data: &DataMatrix) -> Result<StatsResult> {
        let k = data.cols();
        let shape_err = |want: &str| {
            MetricsError::InvalidInput(format!("{self:?} needs {want}, table has {k} column(s)").to_lowercase())
        };
        match self {
            Analysis::Ttest => {
                if k != 2 {
                    return Err(shape_err("exactly 2 columns"));
                }
                paired_t_test(&data.column(0), &data.column(1)).map(StatsResult::TTest)
            }
            Analysis::Anova => {
                if k < 2 {
                    return Err(shape_err("at least 2 columns"));
                }
                rm_anova_gg(data).map(StatsResult::Anova)
            }
            Analysis::Alpha => {
                if k < 2 {
                    return Err(shape_err("at least 2 columns"));
                }
                cronbach_alpha(data).map(StatsResult::Alpha)
            }
            Analysis::Cv => {
                if k != 1 {
                    return Err(shape_err("exactly 1 column"));
                }
                cv(&data.column(0)).map(StatsResult::Cv)
            }
        }
    }
}
