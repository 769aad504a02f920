use serde::{Deserialize, Serialize};

use super::dist::{chi2_2_sf, f_sf, student_t_two_tailed};
use super::{DataMatrix, MetricsError, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

fn need(what: &'static str, needed: usize, got: usize) -> Result<()> {
    if got < needed {
        Err(MetricsError::InsufficientData { what, needed, got })
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-tailed.
    pub p: f64,
    /// Mean of `x − y`.
    pub mean_diff: f64,
    pub n: usize,
}

/// Two-tailed paired t-test on `x − y`.
///
/// Differences that are all exactly zero give `t = 0, p = 1`; constant but
/// non-zero differences have no finite t and are rejected.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TTestResult> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    need("pairs", 2, x.len())?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len();
    let df = (n - 1) as f64;
    let mean_diff = mean(&d);
    let sd = sample_sd(&d);
    if sd == 0.0 {
        if mean_diff == 0.0 {
            return Ok(TTestResult {
                t: 0.0,
                df,
                p: 1.0,
                mean_diff,
                n,
            });
        }
        return Err(MetricsError::ZeroVariance("paired differences are constant"));
    }
    let t = mean_diff / (sd / (n as f64).sqrt());
    Ok(TTestResult {
        t,
        df,
        p: student_t_two_tailed(t, df),
        mean_diff,
        n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    /// Greenhouse-Geisser corrected: ε̂(k − 1).
    pub df1: f64,
    /// Greenhouse-Geisser corrected: ε̂(k − 1)(n − 1).
    pub df2: f64,
    /// p-value at the corrected degrees of freedom.
    pub p: f64,
    /// Box / Greenhouse-Geisser sphericity estimate.
    pub epsilon: f64,
    /// p-value at the uncorrected degrees of freedom.
    pub p_uncorrected: f64,
    pub ss_conditions: f64,
    pub ss_error: f64,
    pub n_subjects: usize,
    pub k_conditions: usize,
}

/// One-way repeated-measures ANOVA over `subjects × conditions` with the
/// Greenhouse-Geisser correction.
///
/// Data whose subject-by-condition residual is zero (for example, every
/// subject constant across conditions) has no defined F and is rejected.
pub fn rm_anova_gg(data: &DataMatrix) -> Result<AnovaResult> {
    let (n, k) = (data.rows(), data.cols());
    need("subjects", 2, n)?;
    need("conditions", 2, k)?;
    let nf = n as f64;
    let kf = k as f64;

    let row_means: Vec<f64> = (0..n).map(|i| mean(data.row(i))).collect();
    let col_means: Vec<f64> = (0..k).map(|j| mean(&data.column(j))).collect();
    let grand = row_means.iter().sum::<f64>() / nf;

    let ss_conditions = nf * col_means.iter().map(|c| (c - grand).powi(2)).sum::<f64>();
    let mut ss_error = 0.0;
    let mut ss_total = 0.0;
    for i in 0..n {
        for j in 0..k {
            let x = data.get(i, j);
            ss_error += (x - row_means[i] - col_means[j] + grand).powi(2);
            ss_total += (x - grand).powi(2);
        }
    }
    if ss_error <= 1e-12 * ss_total || ss_error == 0.0 {
        return Err(MetricsError::Degenerate("zero residual variance within subjects"));
    }

    let df_cond = kf - 1.0;
    let df_err = df_cond * (nf - 1.0);
    let f = (ss_conditions / df_cond) / (ss_error / df_err);
    let epsilon = box_epsilon(data, &col_means)?;
    let df1 = epsilon * df_cond;
    let df2 = df1 * (nf - 1.0);

    Ok(AnovaResult {
        f,
        df1,
        df2,
        p: f_sf(f, df1, df2),
        epsilon,
        p_uncorrected: f_sf(f, df_cond, df_err),
        ss_conditions,
        ss_error,
        n_subjects: n,
        k_conditions: k,
    })
}

/// ε̂ = (tr S*)² / ((k − 1) Σ s*ᵢⱼ²) with S* the double-centred condition
/// covariance matrix.
fn box_epsilon(data: &DataMatrix, col_means: &[f64]) -> Result<f64> {
    let (n, k) = (data.rows(), data.cols());
    let mut cov = vec![vec![0.0; k]; k];
    for i in 0..n {
        let row = data.row(i);
        for a in 0..k {
            for b in a..k {
                cov[a][b] += (row[a] - col_means[a]) * (row[b] - col_means[b]);
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            cov[a][b] /= n as f64 - 1.0;
            cov[b][a] = cov[a][b];
        }
    }
    let kf = k as f64;
    let row_avg: Vec<f64> = cov.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let grand = row_avg.iter().sum::<f64>() / kf;
    let mut trace = 0.0;
    let mut sum_sq = 0.0;
    for a in 0..k {
        for b in 0..k {
            // cov is symmetric, so column means equal row means.
            let s = cov[a][b] - row_avg[a] - row_avg[b] + grand;
            sum_sq += s * s;
            if a == b {
                trace += s;
            }
        }
    }
    if sum_sq == 0.0 {
        return Err(MetricsError::Degenerate("condition covariance is zero after centring"));
    }
    let lower = 1.0 / (kf - 1.0);
    Ok((trace * trace / ((kf - 1.0) * sum_sq)).clamp(lower, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub i: usize,
    pub j: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub df: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub k: usize,
    pub comparisons: Vec<PairwiseComparison>,
}

impl PairwiseResult {
    /// Symmetric `k × k` matrix of adjusted p-values, 1 on the diagonal.
    pub fn adjusted_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![1.0; self.k]; self.k];
        for c in &self.comparisons {
            m[c.i][c.j] = c.p_adjusted;
            m[c.j][c.i] = c.p_adjusted;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&PairwiseComparison> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.comparisons.iter().find(|c| c.i == i && c.j == j)
    }
}

/// All pairwise paired t-tests between conditions, Bonferroni adjusted.
pub fn bonferroni_pairwise(data: &DataMatrix) -> Result<PairwiseResult> {
    let (n, k) = (data.rows(), data.cols());
    need("subjects", 2, n)?;
    need("conditions", 2, k)?;
    let m = (k * (k - 1) / 2) as f64;
    let cols: Vec<Vec<f64>> = (0..k).map(|j| data.column(j)).collect();
    let mut comparisons = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let t = paired_t_test(&cols[i], &cols[j])?;
            comparisons.push(PairwiseComparison {
                i,
                j,
                mean_diff: t.mean_diff,
                t: t.t,
                df: t.df,
                p_raw: t.p,
                p_adjusted: (t.p * m).min(1.0),
            });
        }
    }
    Ok(PairwiseResult { k, comparisons })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub k_items: usize,
    pub n_subjects: usize,
}

/// Cronbach's alpha over `subjects × items`.
pub fn cronbach_alpha(items: &DataMatrix) -> Result<AlphaResult> {
    let (n, k) = (items.rows(), items.cols());
    need("items", 2, k)?;
    need("subjects", 2, n)?;
    let item_var: f64 = (0..k).map(|j| sample_sd(&items.column(j)).powi(2)).sum();
    let totals: Vec<f64> = (0..n).map(|i| items.row(i).iter().sum()).collect();
    let total_var = sample_sd(&totals).powi(2);
    if total_var == 0.0 {
        return Err(MetricsError::ZeroVariance("total scores are constant"));
    }
    let kf = k as f64;
    Ok(AlphaResult {
        alpha: kf / (kf - 1.0) * (1.0 - item_var / total_var),
        k_items: k,
        n_subjects: n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub cv: f64,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// Coefficient of variation: sample sd over mean.
pub fn cv(x: &[f64]) -> Result<CvResult> {
    need("observations", 2, x.len())?;
    let m = mean(x);
    if m == 0.0 {
        return Err(MetricsError::DivisionByZero("mean is zero"));
    }
    let sd = sample_sd(x);
    Ok(CvResult {
        cv: sd / m,
        mean: m,
        sd,
        n: x.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub test: String,
    pub statistic: f64,
    pub p: f64,
    pub n: usize,
    /// True when p > 0.05.
    pub normal: bool,
}

/// Jarque–Bera normality test (asymptotic χ²₂ tail).
pub fn jarque_bera(x: &[f64]) -> Result<NormalityResult> {
    need("observations", 3, x.len())?;
    let n = x.len() as f64;
    let m = mean(x);
    let moment = |p: i32| x.iter().map(|v| (v - m).powi(p)).sum::<f64>() / n;
    let m2 = moment(2);
    if m2 == 0.0 {
        return Err(MetricsError::ZeroVariance("observations are constant"));
    }
    let skew = moment(3) / m2.powf(1.5);
    let kurt = moment(4) / (m2 * m2);
    let statistic = n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
    let p = chi2_2_sf(statistic);
    Ok(NormalityResult {
        test: "jarque-bera".into(),
        statistic,
        p,
        n: x.len(),
        normal: p > 0.05,
    })
}
