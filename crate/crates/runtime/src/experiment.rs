//! Cohort experiments: run synthetic participants through one trial and
//! assemble the scores and statistics into a self-contained report.
//!
//! Reports carry every input needed to re-run them (test id, cohort size,
//! seed, agent and device parameters) and no timestamps, so the same inputs
//! always give byte-identical JSON.

use rfglove_core::agent::{run_cohort, AgentError, AgentParams, TrialSummary, TrialTranscript};
use rfglove_core::device::DeviceConfig;
use rfglove_core::energy::{EnergyProfile, EnergySummary};
use rfglove_core::metrics::{
    accuracy, bonferroni_pairwise, cv, jarque_bera, mean, paired_t_test, rm_anova_gg, sample_sd,
    score_test3_cohort, score_test4, success_rate, DataMatrix, MetricsError, PairwiseResult,
    ScoreInputs4, StatsResult, SuccessRates,
};
use serde::{Deserialize, Serialize};

pub const BATTERY_MAH: f64 = 2000.0;

const NORMALITY_NOTE: &str =
    "normality uses the Jarque-Bera test as a stand-in; the original analysis does not name its test";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub test_id: u8,
    pub participants: u32,
    pub seed: u64,
    pub params: AgentParams,
    /// Tactile-only condition, used by test 3 only.
    pub comparison_params: Option<AgentParams>,
    pub device: DeviceConfig,
}

impl ExperimentSpec {
    pub fn new(test_id: u8, participants: u32, seed: u64) -> Self {
        Self {
            test_id,
            participants,
            seed,
            params: AgentParams::default(),
            comparison_params: (test_id == 3).then(AgentParams::without_glove),
            device: DeviceConfig::default(),
        }
    }

    pub fn with_p_error(mut self, p_error: f64) -> Self {
        self.params.p_error = p_error;
        self
    }
}

/// A statistic that may legitimately be undefined for the data at hand
/// (for example a t-test on identical error counts).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedStat {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<StatsResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl NamedStat {
    fn new(name: &str, r: Result<StatsResult, MetricsError>) -> Self {
        let (result, error) = match r {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            name: name.to_owned(),
            result,
            error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreColumn {
    pub name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl ScoreColumn {
    fn new(name: &str, values: Vec<f64>) -> Self {
        let sd = if values.len() >= 2 { sample_sd(&values) } else { 0.0 };
        Self {
            name: name.to_owned(),
            mean: mean(&values),
            sd,
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub summaries: Vec<TrialSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub comparison_summaries: Vec<TrialSummary>,
    pub success: SuccessRates,
    /// Mean time per attempt, test 1 only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempt_means_s: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<PairwiseResult>,
    pub scores: Vec<ScoreColumn>,
    pub stats: Vec<NamedStat>,
    pub energy: EnergySummary,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn score(&self, name: &str) -> Option<&ScoreColumn> {
        self.scores.iter().find(|s| s.name == name)
    }

    pub fn stat(&self, name: &str) -> Option<&NamedStat> {
        self.stats.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("test id must be 1, 2, 3 or 4, got {0}")]
    UnknownTest(u8),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    if !(1..=4).contains(&spec.test_id) {
        return Err(ExperimentError::UnknownTest(spec.test_id));
    }
    let cohort = run_cohort(spec.test_id, spec.participants, &spec.params, &spec.device, spec.seed)?;
    let energy = EnergySummary::new(EnergyProfile::default(), BATTERY_MAH).expect("default profile is valid");
    let mut report = ExperimentReport {
        spec: spec.clone(),
        summaries: cohort.iter().map(TrialTranscript::summary).collect(),
        comparison_summaries: Vec::new(),
        success: success_rate(&[(0, 1)])?,
        attempt_means_s: None,
        pairwise: None,
        scores: Vec::new(),
        stats: Vec::new(),
        energy,
        notes: Vec::new(),
    };
    match spec.test_id {
        1 => identification(&cohort, &mut report)?,
        2 => placement(&cohort, &mut report)?,
        3 => {
            let tactile_params = spec.comparison_params.clone().unwrap_or_else(AgentParams::without_glove);
            let tactile = run_cohort(3, spec.participants, &tactile_params, &spec.device, spec.seed)?;
            report.comparison_summaries = tactile.iter().map(TrialTranscript::summary).collect();
            comparison(&cohort, &tactile, &mut report)?;
        }
        _ => relocation(&cohort, &mut report)?,
    }
    Ok(report)
}

fn aux(t: &TrialTranscript, key: &str) -> f64 {
    t.aux(key).unwrap_or_else(|| panic!("trial {} lacks {key}", t.test_id))
}

fn identification(cohort: &[TrialTranscript], report: &mut ExperimentReport) -> Result<(), ExperimentError> {
    let outcomes: Vec<(u32, u32)> = cohort
        .iter()
        .map(|t| (aux(t, "done") as u32, aux(t, "attempted") as u32))
        .collect();
    report.success = success_rate(&outcomes)?;
    report.stats.push(NamedStat::new("success_rate", Ok(StatsResult::SuccessRate(report.success))));

    let rows: Vec<Vec<f64>> = cohort.iter().map(|t| t.per_attempt_times_s.clone()).collect();
    let matrix = DataMatrix::from_rows(rows)?;
    report.attempt_means_s = Some((0..matrix.cols()).map(|j| mean(&matrix.column(j))).collect());
    for j in 0..matrix.cols() {
        report.scores.push(ScoreColumn::new(&format!("attempt_{}_time_s", j + 1), matrix.column(j)));
    }
    report
        .stats
        .push(NamedStat::new("attempt_time_anova", rm_anova_gg(&matrix).map(StatsResult::Anova)));
    match bonferroni_pairwise(&matrix) {
        Ok(p) => report.pairwise = Some(p),
        Err(e) => report.notes.push(format!("pairwise comparisons unavailable: {e}")),
    }
    Ok(())
}

fn placement(cohort: &[TrialTranscript], report: &mut ExperimentReport) -> Result<(), ExperimentError> {
    let outcomes: Vec<(u32, u32)> = cohort.iter().map(|t| (aux(t, "c") as u32, 9)).collect();
    report.success = success_rate(&outcomes)?;
    report.stats.push(NamedStat::new("success_rate", Ok(StatsResult::SuccessRate(report.success))));
    let times: Vec<f64> = cohort.iter().map(|t| aux(t, "t_s")).collect();
    let acc: Vec<f64> = cohort.iter().map(|t| accuracy(aux(t, "c") as u32, aux(t, "e") as u32)).collect();
    report
        .stats
        .push(NamedStat::new("time_normality", jarque_bera(&times).map(StatsResult::Normality)));
    report.scores.push(ScoreColumn::new("time_s", times));
    report.scores.push(ScoreColumn::new("accuracy", acc));
    report.notes.push(NORMALITY_NOTE.into());
    Ok(())
}

fn comparison(
    glove: &[TrialTranscript],
    tactile: &[TrialTranscript],
    report: &mut ExperimentReport,
) -> Result<(), ExperimentError> {
    let runs = |c: &[TrialTranscript]| -> Vec<(u32, u32, f64)> {
        c.iter()
            .map(|t| (aux(t, "c") as u32, aux(t, "e") as u32, aux(t, "t_s")))
            .collect()
    };
    let (g, w) = (runs(glove), runs(tactile));
    let outcomes: Vec<(u32, u32)> = g.iter().map(|r| (r.0, 9)).collect();
    report.success = success_rate(&outcomes)?;

    // Each condition is centred on its own mean time.
    let g_score = score_test3_cohort(&g)?;
    let w_score = score_test3_cohort(&w)?;
    let col = |r: &[(u32, u32, f64)], f: fn(&(u32, u32, f64)) -> f64| r.iter().map(f).collect::<Vec<f64>>();
    let (g_time, w_time) = (col(&g, |r| r.2), col(&w, |r| r.2));
    let (g_err, w_err) = (col(&g, |r| f64::from(r.1)), col(&w, |r| f64::from(r.1)));

    let ttest = |x: &[f64], y: &[f64]| paired_t_test(x, y).map(StatsResult::TTest);
    report.stats.push(NamedStat::new("score_glove_vs_tactile", ttest(&g_score, &w_score)));
    report.stats.push(NamedStat::new("time_glove_vs_tactile", ttest(&g_time, &w_time)));
    report.stats.push(NamedStat::new("errors_glove_vs_tactile", ttest(&g_err, &w_err)));
    for (name, x) in [("score_glove", &g_score), ("score_tactile", &w_score)] {
        report
            .stats
            .push(NamedStat::new(&format!("{name}_normality"), jarque_bera(x).map(StatsResult::Normality)));
    }
    report.scores.push(ScoreColumn::new("score_glove", g_score));
    report.scores.push(ScoreColumn::new("score_tactile", w_score));
    report.scores.push(ScoreColumn::new("time_glove_s", g_time));
    report.scores.push(ScoreColumn::new("time_tactile_s", w_time));
    report.scores.push(ScoreColumn::new("errors_glove", g_err));
    report.scores.push(ScoreColumn::new("errors_tactile", w_err));
    report.notes.push(NORMALITY_NOTE.into());
    report
        .notes
        .push("no outliers are removed; every synthetic participant is scored".into());
    Ok(())
}

fn relocation(cohort: &[TrialTranscript], report: &mut ExperimentReport) -> Result<(), ExperimentError> {
    let outcomes: Vec<(u32, u32)> = cohort.iter().map(|t| (u32::from(t.completed), 1)).collect();
    report.success = success_rate(&outcomes)?;
    let scores = cohort
        .iter()
        .map(|t| {
            score_test4(&ScoreInputs4 {
                total_time_s: aux(t, "tT_s"),
                find_time_s: aux(t, "t1_s"),
                origin_scans: aux(t, "n1") as u32,
                destination_scans: aux(t, "n2") as u32,
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    report.stats.push(NamedStat::new("score_cv", cv(&scores).map(StatsResult::Cv)));
    report
        .stats
        .push(NamedStat::new("score_normality", jarque_bera(&scores).map(StatsResult::Normality)));
    report.scores.push(ScoreColumn::new("walk_score", scores));
    report.notes.push(NORMALITY_NOTE.into());
    Ok(())
}
