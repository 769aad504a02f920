use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

/// Number of placements in a box-and-disk trial.
pub const MOVES: u32 = 9;

/// Default divisor applied to the centred time in [`score_test3`].
pub const TIME_DIVISOR: f64 = 3.0;

/// Placement accuracy in percent: `100 · (c − e/3) / 9`.
///
/// Not clamped: many errors and few correct moves give a negative value.
pub fn accuracy(correct: u32, errors: u32) -> f64 {
    100.0 * (f64::from(correct) - f64::from(errors) / 3.0) / f64::from(MOVES)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreInputs3 {
    pub correct: u32,
    pub errors: u32,
    pub time_s: f64,
    /// Mean time of the cohort (and condition) this run belongs to.
    pub mean_time_s: f64,
}

impl ScoreInputs3 {
    pub fn validate(&self) -> Result<()> {
        if self.correct > MOVES {
            return Err(MetricsError::InvalidInput(format!(
                "{} correct moves exceeds {MOVES}",
                self.correct
            )));
        }
        Ok(())
    }
}

/// `accuracy − (t − t̄) / 3`.
pub fn score_test3(inp: &ScoreInputs3) -> f64 {
    score_test3_with(inp, TIME_DIVISOR)
}

pub fn score_test3_with(inp: &ScoreInputs3, time_divisor: f64) -> f64 {
    accuracy(inp.correct, inp.errors) - (inp.time_s - inp.mean_time_s) / time_divisor
}

/// Scores a whole cohort of `(correct, errors, time_s)` runs against the
/// cohort's own mean time.
pub fn score_test3_cohort(runs: &[(u32, u32, f64)]) -> Result<Vec<f64>> {
    if runs.is_empty() {
        return Err(MetricsError::InsufficientData {
            what: "runs",
            needed: 1,
            got: 0,
        });
    }
    let mean_time_s = runs.iter().map(|r| r.2).sum::<f64>() / runs.len() as f64;
    runs.iter()
        .map(|&(correct, errors, time_s)| {
            let inp = ScoreInputs3 {
                correct,
                errors,
                time_s,
                mean_time_s,
            };
            inp.validate().map(|_| score_test3(&inp))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreInputs4 {
    /// Total time for the whole relocation.
    pub total_time_s: f64,
    /// Time until the target object was found.
    pub find_time_s: f64,
    /// Region tags scanned to locate the origin.
    pub origin_scans: u32,
    /// Region tags scanned to locate the destination.
    pub destination_scans: u32,
}

/// `tT / (n1 + n2) + t1 / n1`.
pub fn score_test4(inp: &ScoreInputs4) -> Result<f64> {
    if inp.origin_scans == 0 {
        return Err(MetricsError::DivisionByZero("origin scan count n1 is zero"));
    }
    if inp.destination_scans == 0 {
        return Err(MetricsError::DivisionByZero("destination scan count n2 is zero"));
    }
    if inp.find_time_s > inp.total_time_s {
        return Err(MetricsError::InvalidInput(format!(
            "find time {} exceeds total time {}",
            inp.find_time_s, inp.total_time_s
        )));
    }
    let n1 = f64::from(inp.origin_scans);
    let n2 = f64::from(inp.destination_scans);
    Ok(inp.total_time_s / (n1 + n2) + inp.find_time_s / n1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessRates {
    /// Percentage of subjects who completed every attempt.
    pub task_rate_pct: f64,
    /// Mean of the per-subject completion percentages.
    pub mean_rate_pct: f64,
    pub subjects: usize,
}

/// Success rates from per-subject `(done, attempted)` counts.
pub fn success_rate(outcomes: &[(u32, u32)]) -> Result<SuccessRates> {
    if outcomes.is_empty() {
        return Err(MetricsError::InsufficientData {
            what: "subjects",
            needed: 1,
            got: 0,
        });
    }
    for &(done, attempted) in outcomes {
        if attempted == 0 {
            return Err(MetricsError::DivisionByZero("subject with zero attempts"));
        }
        if done > attempted {
            return Err(MetricsError::InvalidInput(format!("{done} done of {attempted} attempted")));
        }
    }
    let n = outcomes.len() as f64;
    let complete = outcomes.iter().filter(|(d, a)| d == a).count() as f64;
    let mean = outcomes
        .iter()
        .map(|&(d, a)| f64::from(d) / f64::from(a))
        .sum::<f64>()
        / n;
    Ok(SuccessRates {
        task_rate_pct: 100.0 * complete / n,
        mean_rate_pct: 100.0 * mean,
        subjects: outcomes.len(),
    })
}
