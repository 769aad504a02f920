#[path = "support/stats_oracle.rs"]
mod stats_oracle;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rfglove_core::metrics::dist::{chi2_2_sf, f_cdf, reg_inc_beta, student_t_cdf, student_t_two_tailed};
use rfglove_core::metrics::{
    accuracy, bonferroni_pairwise, cronbach_alpha, cv, paired_t_test, rm_anova_gg, score_test3_cohort,
    DataMatrix, MetricsError,
};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use stats_oracle::{alpha_ref, anova_ref, f_pdf, paired_t_ref, simpson, t_pdf};

fn normal_rows(seed: u64, n: usize, means: &[f64], sd: f64, subject_sd: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let subject = Normal::new(0.0, subject_sd).unwrap();
    (0..n)
        .map(|_| {
            let s = subject.sample(&mut rng);
            means.iter().map(|m| m + s + noise.sample(&mut rng)).collect()
        })
        .collect()
}

#[test]
fn t_cdf_matches_integrated_density() {
    for &v in &[3.0, 7.0, 16.0] {
        for i in 0..20 {
            let x = -4.0 + 8.0 * i as f64 / 19.0;
            let integral = simpson(|u| t_pdf(u, v), 0.0, x.abs(), 4000);
            let want = if x >= 0.0 { 0.5 + integral } else { 0.5 - integral };
            assert_abs_diff_eq!(student_t_cdf(x, v), want, epsilon = 1e-8);
        }
    }
}

#[test]
fn f_cdf_matches_integrated_density() {
    for &(d1, d2) in &[(2.0, 16.0), (4.0, 10.0), (6.0, 30.0)] {
        for i in 1..=20 {
            let x = 0.25 * i as f64;
            let want = simpson(|u| f_pdf(u, d1, d2), 0.0, x, 8000);
            assert_abs_diff_eq!(f_cdf(x, d1, d2), want, epsilon = 1e-8);
        }
    }
}

#[test]
fn chi2_two_df_matches_integrated_density() {
    for i in 1..=20 {
        let x = 0.5 * i as f64;
        let cdf = simpson(|u| 0.5 * (-u / 2.0).exp(), 0.0, x, 2000);
        assert_abs_diff_eq!(chi2_2_sf(x), 1.0 - cdf, epsilon = 1e-8);
    }
}

#[test]
fn incomplete_beta_matches_reference_library() {
    for &(a, b) in &[(0.5, 0.5), (2.0, 3.0), (8.0, 0.5), (30.0, 40.0)] {
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let want = statrs::function::beta::beta_reg(a, b, x);
            assert_abs_diff_eq!(reg_inc_beta(a, b, x), want, epsilon = 1e-10);
        }
    }
}

#[test]
fn paired_t_matches_reference() {
    let rows = normal_rows(15, 15, &[100.0, 92.0], 6.0, 10.0);
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r[0], r[1])).unzip();
    let r = paired_t_test(&x, &y).unwrap();
    let t = paired_t_ref(&x, &y);
    assert_abs_diff_eq!(r.t, t, epsilon = 1e-9);
    assert_eq!(r.df, 14.0);
    let dist = StudentsT::new(0.0, 1.0, 14.0).unwrap();
    assert_abs_diff_eq!(r.p, 2.0 * dist.cdf(-t.abs()), epsilon = 1e-10);
    assert_abs_diff_eq!(student_t_two_tailed(t, 14.0), r.p, epsilon = 1e-15);
}

#[test]
fn anova_matches_contrast_reference() {
    for (seed, n, means) in [
        (1u64, 17usize, vec![70.0, 55.0, 45.0, 38.0, 33.0, 30.0, 29.0, 28.0]),
        (2, 8, vec![4.0, 4.2, 3.9, 4.1, 4.4, 3.8]),
        (3, 5, vec![1.0, 2.0, 3.0]),
        (4, 30, vec![10.0, 10.0]),
    ] {
        let rows = normal_rows(seed, n, &means, 3.0, 5.0);
        let got = rm_anova_gg(&DataMatrix::from_rows(rows.clone()).unwrap()).unwrap();
        let want = anova_ref(&rows);
        assert_abs_diff_eq!(got.f, want.f, epsilon = 1e-8);
        assert_abs_diff_eq!(got.epsilon, want.epsilon, epsilon = 1e-10);
        assert_abs_diff_eq!(got.df1, want.df1, epsilon = 1e-10);
        assert_abs_diff_eq!(got.df2, want.df2, epsilon = 1e-9);
        let fd = FisherSnedecor::new(want.df1, want.df2).unwrap();
        assert_abs_diff_eq!(got.p, fd.sf(want.f), epsilon = 1e-9);
    }
}

#[test]
fn bonferroni_separates_far_and_equal_columns() {
    let mut rows = normal_rows(9, 17, &[70.0, 30.0], 4.0, 6.0);
    for r in &mut rows {
        let v = r[1];
        r.push(v);
    }
    let res = bonferroni_pairwise(&DataMatrix::from_rows(rows).unwrap()).unwrap();
    assert_eq!(res.comparisons.len(), 3);
    assert!(res.get(0, 1).unwrap().p_adjusted < 0.001);
    assert_eq!(res.get(1, 2).unwrap().p_adjusted, 1.0);
    for c in &res.comparisons {
        assert!(c.p_adjusted >= c.p_raw);
        assert!(c.p_adjusted <= 1.0);
    }
}

#[test]
fn alpha_fixtures() {
    // One latent factor, unit loading, noise variance chosen for alpha 0.782.
    let k = 6.0;
    let target: f64 = 0.782;
    let rho = target / (k - (k - 1.0) * target);
    let noise_sd = (1.0 / rho - 1.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(782);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|_| {
            let f = unit.sample(&mut rng);
            (0..6).map(|_| f + noise_sd * unit.sample(&mut rng)).collect()
        })
        .collect();
    let got = cronbach_alpha(&DataMatrix::from_rows(rows.clone()).unwrap()).unwrap();
    assert_abs_diff_eq!(got.alpha, alpha_ref(&rows), epsilon = 1e-12);
    assert!((got.alpha - target).abs() < 0.02, "{}", got.alpha);

    let independent: Vec<Vec<f64>> = (0..5000)
        .map(|_| (0..6).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let a = cronbach_alpha(&DataMatrix::from_rows(independent).unwrap()).unwrap();
    assert!(a.alpha.abs() < 0.05, "{}", a.alpha);

    let perfect: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; 4]).collect();
    assert_abs_diff_eq!(cronbach_alpha(&DataMatrix::from_rows(perfect).unwrap()).unwrap().alpha, 1.0, epsilon = 1e-12);
}

#[test]
fn anova_degenerate_on_identical_columns() {
    let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64; 3]).collect();
    assert!(matches!(
        rm_anova_gg(&DataMatrix::from_rows(rows).unwrap()),
        Err(MetricsError::Degenerate(_))
    ));
}

fn matrix(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-50.0..50.0f64, k), n)
}

proptest! {
    #[test]
    fn t_antisymmetric(rows in matrix(12, 2)) {
        let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r[0], r[1])).unzip();
        let a = paired_t_test(&x, &y).unwrap();
        let b = paired_t_test(&y, &x).unwrap();
        prop_assert_eq!(a.t, -b.t);
        prop_assert_eq!(a.p, b.p);
        prop_assert!((0.0..=1.0).contains(&a.p));
    }

    #[test]
    fn anova_df_law_and_epsilon_bounds(n in 2usize..20, k in 2usize..7, seed in any::<u64>()) {
        let rows = normal_rows(seed, n, &vec![0.0; k], 1.0, 2.0);
        let r = rm_anova_gg(&DataMatrix::from_rows(rows).unwrap()).unwrap();
        let m = (k - 1) as f64;
        prop_assert!((r.df2 - r.df1 * (n - 1) as f64).abs() <= 1e-9 * r.df2.max(1.0));
        prop_assert!(r.epsilon >= 1.0 / m - 1e-12 && r.epsilon <= 1.0 + 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.p));
    }

    #[test]
    fn cv_scale_invariant(xs in prop::collection::vec(1.0..100.0f64, 2..30), a in 0.01..1000.0f64) {
        let scaled: Vec<f64> = xs.iter().map(|x| x * a).collect();
        let (c1, c2) = (cv(&xs).unwrap().cv, cv(&scaled).unwrap().cv);
        prop_assert!((c1 - c2).abs() <= 1e-9 * c1.max(1e-12));
    }

    /// Cohort-mean score equals the cohort-mean accuracy: the centred time
    /// term sums to zero.
    #[test]
    fn placement_score_cohort_identity(runs in prop::collection::vec((0u32..=9, 0u32..10, 20.0..400.0f64), 1..40)) {
        let runs: Vec<(u32, u32, f64)> = runs.into_iter().map(|(c, e, t)| (c, e.min(9 - c), t)).collect();
        let scores = score_test3_cohort(&runs).unwrap();
        let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
        let mean_acc = runs.iter().map(|&(c, e, _)| accuracy(c, e)).sum::<f64>() / runs.len() as f64;
        prop_assert!((mean_score - mean_acc).abs() < 1e-9);
    }
}
