//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

#[path = "../../core/tests/support/device_ref.rs"]
mod device_ref;
#[path = "../../core/tests/support/rf_oracle.rs"]
mod rf_oracle;
#[path = "../../core/tests/support/stats_oracle.rs"]
mod stats_oracle;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rfglove_core::device::DeviceConfig;
use rfglove_core::energy::{battery_life_h, EnergyProfile};
use rfglove_core::metrics::{
    accuracy, cv, mean, rm_anova_gg, sample_sd, score_test3_cohort, score_test4, success_rate, DataMatrix,
    ScoreInputs4,
};
use rfglove_core::rfmodel::{scan, Material, RfParams};
use rfglove_core::tagdb::{stored_clip_ids, AudioClip, TagDatabase, TagUid};
use rfglove_runtime::experiment::{run_experiment, ExperimentSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

fn success_rates() -> Outcome {
    let mut outcomes = vec![(8, 8); 13];
    outcomes.extend([(7, 8); 3]);
    outcomes.push((6, 8));
    let r = success_rate(&outcomes).map_err(|e| e.to_string())?;
    let msg = format!("task {:.2}%, mean {:.2}%", r.task_rate_pct, r.mean_rate_pct);
    check(
        (r.task_rate_pct - 76.47).abs() <= 0.01 && (r.mean_rate_pct - 96.32).abs() <= 0.01,
        msg.clone(),
        msg,
    )
}

/// Rescales `x` to an exact sample mean and sd.
fn rescale(x: &[f64], m: f64, s: f64) -> Vec<f64> {
    let (xm, xs) = (mean(x), sample_sd(x));
    x.iter().map(|v| m + s * (v - xm) / xs).collect()
}

fn cv_fixture() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(307);
    let raw: Vec<f64> = (0..17).map(|_| rng.random_range(10.0..40.0)).collect();
    // Summary statistics that display as M = 25.43, SD = 7.82.
    let fixture = rescale(&raw, 25.434, 7.816);
    let r = cv(&fixture).map_err(|e| e.to_string())?;
    let shown = format!("{:.2}/{:.2}", r.mean, r.sd);
    // The unrounded quotient 7.82 / 25.43 itself.
    let exact = cv(&rescale(&raw, 25.43, 7.82)).map_err(|e| e.to_string())?;
    let msg = format!(
        "M/SD {shown} -> cv {:.3} (exact 7.82/25.43 = {:.4})",
        r.cv, exact.cv
    );
    check(
        shown == "25.43/7.82" && format!("{:.3}", r.cv) == "0.307" && format!("{:.4}", exact.cv) == "0.3075",
        msg.clone(),
        msg,
    )
}

fn anova_df() -> Outcome {
    let fixtures: [(f64, f64); 2] = [(55.009 / 3.438, 16.0), (34.371 / 4.91, 7.0)];
    for (ratio, want) in fixtures {
        if (ratio - want).abs() > 0.01 {
            return Err(format!("ratio {ratio:.4} vs n-1 = {want}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_f = 0.0f64;
    for case in 0..200 {
        let n = rng.random_range(2..25);
        let k = rng.random_range(2..9);
        let noise = Normal::new(0.0, rng.random_range(0.5..10.0)).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let subject = rng.random_range(-20.0..20.0);
                (0..k).map(|j| j as f64 * 2.0 + subject + noise.sample(&mut rng)).collect()
            })
            .collect();
        let got = rm_anova_gg(&DataMatrix::from_rows(rows.clone()).unwrap()).map_err(|e| format!("case {case}: {e}"))?;
        if (got.df2 - got.df1 * (n - 1) as f64).abs() > 1e-9 * got.df2 {
            return Err(format!("case {case}: df2 {} != df1 {} * {}", got.df2, got.df1, n - 1));
        }
        let want = stats_oracle::anova_ref(&rows);
        worst_f = worst_f.max((got.f - want.f).abs());
    }
    check(
        worst_f < 1e-8,
        format!("df2 = df1*(n-1) on 200 matrices; max |dF| {worst_f:.1e}; 55.009/3.438 and 34.371/4.91 match n-1"),
        format!("max |dF| {worst_f:.1e}"),
    )
}

fn energy_band() -> Outcome {
    let p = EnergyProfile::default();
    let life = battery_life_h(&p, 2000.0);
    if life != 2.5 {
        return Err(format!("defaults give {life} h"));
    }
    for i in 0..=100 {
        let duty = 0.30 + 0.10 * i as f64 / 100.0;
        let l = battery_life_h(&p.with_duty(duty), 2000.0);
        if !(2.5 - 1e-12..=3.0).contains(&l) {
            return Err(format!("duty {duty:.3} gives {l:.4} h"));
        }
    }
    Ok(format!(
        "2.5 h at defaults; duty 0.30..0.40 spans {:.3}..{:.3} h",
        battery_life_h(&p.with_duty(0.40), 2000.0),
        battery_life_h(&p.with_duty(0.30), 2000.0)
    ))
}

fn score_fixtures() -> Outcome {
    if accuracy(9, 0) != 100.0 {
        return Err(format!("accuracy(9,0) = {}", accuracy(9, 0)));
    }
    let s4 = score_test4(&ScoreInputs4 {
        total_time_s: 60.0,
        find_time_s: 20.0,
        origin_scans: 2,
        destination_scans: 2,
    })
    .map_err(|e| e.to_string())?;
    if s4 != 25.0 {
        return Err(format!("walk score {s4}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let runs: Vec<(u32, u32, f64)> = (0..n)
            .map(|_| {
                let c = rng.random_range(0..=9);
                (c, rng.random_range(0..=9 - c), rng.random_range(20.0..500.0))
            })
            .collect();
        let scores = score_test3_cohort(&runs).map_err(|e| e.to_string())?;
        let acc: Vec<f64> = runs.iter().map(|&(c, e, _)| accuracy(c, e)).collect();
        worst = worst.max((mean(&scores) - mean(&acc)).abs());
    }
    check(
        worst < 1e-9,
        format!("accuracy(9,0)=100, walk(60,20,2,2)=25, cohort identity max err {worst:.1e}"),
        format!("cohort identity error {worst:.1e}"),
    )
}

fn state_machine() -> Outcome {
    use device_ref::Sym;
    let cfg = DeviceConfig::default();
    let mut total = 0;
    let mut bad = 0;
    for tick in [1000, 2500, 6000, 11_000] {
        let alphabet = [Sym::ReadKnown, Sym::ReadUnknown, Sym::Button, Sym::Tick(tick)];
        let (c, b) = device_ref::divergences(&alphabet, 5, &cfg);
        total += c;
        bad += b;
    }
    check(
        bad == 0,
        format!("{total} sequences (length <= 5, 4 tick lengths), 0 divergences"),
        format!("{bad} divergences in {total} sequences"),
    )
}

fn rf_winner() -> Outcome {
    let p = RfParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut reads = 0;
    let mut metal_cases = 0;
    for case in 0..1000 {
        let (pose, mut tags) = rf_oracle::random_case(&mut rng);
        let got = scan(&pose, &tags, &p);
        if got.map(|r| r.uid) != rf_oracle::brute_force(&pose, &tags, &p) {
            return Err(format!("case {case}: winner differs from brute force"));
        }
        if let Some(r) = got {
            reads += 1;
            if tags.iter().any(|t| t.uid == r.uid && t.mount == Material::Metal) {
                return Err(format!("case {case}: metal tag won"));
            }
        }
        for t in &mut tags {
            t.mount = Material::Metal;
        }
        if !tags.is_empty() {
            metal_cases += 1;
            if scan(&pose, &tags, &p).is_some() {
                return Err(format!("case {case}: all-metal scene produced a read"));
            }
        }
    }
    Ok(format!("1000 scenes match brute force ({reads} with a read); metal veto held in {metal_cases} all-metal scenes"))
}

fn test2_end_to_end() -> Outcome {
    let spec = ExperimentSpec::new(2, 17, 2024).with_p_error(0.0);
    let a = run_experiment(&spec).map_err(|e| e.to_string())?;
    let b = run_experiment(&spec).map_err(|e| e.to_string())?;
    let identical = a.to_json() == b.to_json();
    let msg = format!(
        "17 participants, task rate {:.1}%, report {} bytes, reproducible: {identical}",
        a.success.task_rate_pct,
        a.to_json().len()
    );
    check(a.success.task_rate_pct == 100.0 && a.success.mean_rate_pct == 100.0 && identical, msg.clone(), msg)
}

fn persistence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let pool: Vec<TagUid> = (0..8u8)
        .map(|i| {
            if i % 2 == 0 {
                TagUid::new(&[0x04, i, 1, 2, 3, 4, 5]).unwrap()
            } else {
                TagUid::new(&[0x08, i, 9, 9]).unwrap()
            }
        })
        .collect();
    let labels = ["cup", "red shirt", "keys", "", "blue hole", "A"];
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut ops_total = 0;
    for seq in 0..500 {
        let dir = root.path().join(format!("db{seq}"));
        let mut db = TagDatabase::open(&dir).map_err(|e| e.to_string())?;
        let mut model = BTreeMap::new();
        for _ in 0..rng.random_range(1..30) {
            ops_total += 1;
            let uid = pool[rng.random_range(0..pool.len())];
            if rng.random_bool(0.7) {
                let label = labels[rng.random_range(0..labels.len())];
                let payload: Vec<u8> = (0..rng.random_range(0..8)).map(|_| rng.random()).collect();
                let clip = AudioClip::record(uid, label, payload, 3000).map_err(|e| e.to_string())?;
                db.bind(uid, clip.clone()).map_err(|e| e.to_string())?;
                model.insert(uid, clip);
            } else {
                db.remove(&uid).map_err(|e| e.to_string())?;
                model.remove(&uid);
            }
        }
        let on_disk = std::fs::read(dir.join("index.tsv")).map_err(|e| e.to_string())?;
        let loaded = TagDatabase::load(&dir).map_err(|e| format!("sequence {seq}: {e}"))?;
        if loaded.index_bytes() != on_disk || on_disk != db.index_bytes() {
            return Err(format!("sequence {seq}: index round trip differs"));
        }
        if loaded.iter().map(|(u, c)| (*u, c.clone())).collect::<BTreeMap<_, _>>() != model {
            return Err(format!("sequence {seq}: loaded bindings differ"));
        }
        let mut live: Vec<String> = model.values().map(|c| c.clip_id.to_string()).collect();
        live.sort();
        if stored_clip_ids(&dir).map_err(|e| e.to_string())? != live {
            return Err(format!("sequence {seq}: orphan or missing payloads"));
        }
    }
    Ok(format!("500 sequences ({ops_total} operations): byte-identical index, 0 orphan payloads"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("success-rate reproduction", Duration::from_secs(1), success_rates),
        ("cv reproduction", Duration::from_secs(1), cv_fixture),
        ("anova df consistency", Duration::from_secs(10), anova_df),
        ("energy band", Duration::from_secs(1), energy_band),
        ("score fixtures", Duration::from_secs(10), score_fixtures),
        ("state machine exhaustive equivalence", Duration::from_secs(10), state_machine),
        ("rf winner optimality", Duration::from_secs(5), rf_winner),
        ("test 2 end to end", Duration::from_secs(30), test2_end_to_end),
        ("persistence", Duration::from_secs(10), persistence),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget {budget:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "{} {name}: {detail} [{:.3}s / {}s]",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
