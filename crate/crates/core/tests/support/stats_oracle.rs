//! Reference computations for the statistics battery, built from textbook
//! formulas that share no code with the library.

#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

/// Composite Simpson rule over `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

pub fn t_pdf(x: f64, v: f64) -> f64 {
    let c = ln_gamma((v + 1.0) / 2.0) - ln_gamma(v / 2.0) - 0.5 * (v * std::f64::consts::PI).ln();
    (c - (v + 1.0) / 2.0 * (1.0 + x * x / v).ln()).exp()
}

pub fn f_pdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return if d1 == 2.0 { 1.0 } else { 0.0 };
    }
    let ln_b = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    let ln = 0.5 * d1 * (d1 / d2).ln() + (0.5 * d1 - 1.0) * x.ln()
        - 0.5 * (d1 + d2) * (1.0 + d1 * x / d2).ln()
        - ln_b;
    ln.exp()
}

/// Orthonormal Helmert contrasts for `k` conditions, one row per contrast.
fn helmert(k: usize) -> Vec<Vec<f64>> {
    (1..k)
        .map(|j| {
            let norm = ((j * (j + 1)) as f64).sqrt();
            (0..k)
                .map(|i| {
                    if i < j {
                        1.0 / norm
                    } else if i == j {
                        -(j as f64) / norm
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub struct AnovaRef {
    pub f: f64,
    pub epsilon: f64,
    pub df1: f64,
    pub df2: f64,
}

/// Repeated-measures F and Greenhouse-Geisser ε from the contrast-transformed
/// data: with orthonormal contrasts Z = Y·Cᵀ, the condition sum of squares is
/// n·|z̄|², the error sum of squares is the trace of the centred Z scatter,
/// and ε = tr(S)² / ((k−1)·tr(S²)) for the contrast covariance S.
pub fn anova_ref(rows: &[Vec<f64>]) -> AnovaRef {
    let n = rows.len();
    let k = rows[0].len();
    let c = helmert(k);
    let m = k - 1;
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|y| c.iter().map(|cj| cj.iter().zip(y).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let zbar: Vec<f64> = (0..m).map(|j| z.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut s = vec![vec![0.0; m]; m];
    for r in &z {
        for a in 0..m {
            for b in 0..m {
                s[a][b] += (r[a] - zbar[a]) * (r[b] - zbar[b]);
            }
        }
    }
    let ss_cond = n as f64 * zbar.iter().map(|v| v * v).sum::<f64>();
    let ss_err: f64 = (0..m).map(|a| s[a][a]).sum();
    let f = (ss_cond / m as f64) / (ss_err / (m * (n - 1)) as f64);
    let tr: f64 = (0..m).map(|a| s[a][a]).sum::<f64>() / (n - 1) as f64;
    let tr_sq: f64 = (0..m)
        .flat_map(|a| (0..m).map(move |b| (a, b)))
        .map(|(a, b)| (s[a][b] / (n - 1) as f64).powi(2))
        .sum();
    let epsilon = (tr * tr / (m as f64 * tr_sq)).clamp(1.0 / m as f64, 1.0);
    AnovaRef {
        f,
        epsilon,
        df1: epsilon * m as f64,
        df2: epsilon * (m * (n - 1)) as f64,
    }
}

/// Cronbach's alpha from the item covariance matrix: k/(k−1)·(1 − tr C / ΣC).
pub fn alpha_ref(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len() as f64;
    let k = rows[0].len();
    let means: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut total = 0.0;
    let mut trace = 0.0;
    for a in 0..k {
        for b in 0..k {
            let cov = rows.iter().map(|r| (r[a] - means[a]) * (r[b] - means[b])).sum::<f64>() / (n - 1.0);
            total += cov;
            if a == b {
                trace += cov;
            }
        }
    }
    k as f64 / (k as f64 - 1.0) * (1.0 - trace / total)
}

/// Paired t from raw sums: Σd / sqrt((nΣd² − (Σd)²)/(n−1)).
pub fn paired_t_ref(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let s1: f64 = d.iter().sum();
    let s2: f64 = d.iter().map(|v| v * v).sum();
    s1 / ((n * s2 - s1 * s1) / (n - 1.0)).sqrt()
}
