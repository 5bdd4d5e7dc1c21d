//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs as a plain binary so the lines are always visible.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use statrs::distribution::{Binomial, Discrete};

use reprometa_core::estimators::{
    mh_confidence_interval, mh_log_odds_ratio, mh_rbg_variance, peto_log_odds_ratio_ci, peto_moments,
};
use reprometa_core::model::{logit, sample_dataset, validate_dataset};
use reprometa_core::repro::{gamma_hat, repro_confidence_interval, McPool, NonFinitePolicy};
use reprometa_core::sim::{
    builtin_comparison, builtin_dataset, builtin_roster, run_coverage_study, surrogate_roster_48, ScenarioConfig,
};
use reprometa_core::{MetaDataset, Method, OddsParams, ProbMap, ReproConfig, RngStream, SampleSizeRoster, StudyTable};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn table(x: u32, n: u32, y: u32, m: u32) -> StudyTable {
    StudyTable::new(x, n, y, m).unwrap()
}

fn single() -> MetaDataset {
    MetaDataset::validated("single", vec![table(3, 100, 2, 100)]).unwrap()
}

fn criterion_1() -> Outcome {
    let d = single();
    let (x, n, y, m) = (3.0f64, 100.0f64, 2.0f64, 100.0f64);
    let crude = (y * (n - x) / (x * (m - y))).ln();
    let woolf = 1.0 / x + 1.0 / (n - x) + 1.0 / y + 1.0 / (m - y);
    let big_n = n + m;
    let events = x + y;
    let o_minus_e = y - events * m / big_n;
    let v_oracle = events * (big_n - events) * n * m / (big_n * big_n * (big_n - 1.0));

    let mh = mh_log_odds_ratio(&d, 0.0).unwrap();
    let rbg = mh_rbg_variance(&d).unwrap();
    let peto = peto_log_odds_ratio_ci(&d, 0.95).unwrap();
    let (oe, v) = peto_moments(&d);
    let ok = (mh - crude).abs() < 1e-12
        && (mh - -0.41572).abs() < 5e-6
        && (rbg - woolf).abs() < 1e-6
        && (v - v_oracle).abs() < 1e-6
        && (v - 1.224874).abs() < 1e-6
        && (oe - o_minus_e).abs() < 1e-12
        && (peto.point - o_minus_e / v_oracle).abs() < 1e-6
        && (peto.point - -0.408205).abs() < 1e-6;
    check(
        ok,
        format!(
            "MH {mh:.6} (crude {crude:.6}), RBG {rbg:.7} (Woolf {woolf:.7}; listed 0.853848), Peto psi {:.6}, V {v:.6}",
            peto.point
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut all_equal = true;
    for base in [single(), builtin_dataset('a').unwrap(), builtin_dataset('b').unwrap()] {
        let mut padded = base.clone();
        for i in 0..10 {
            padded.push(table(0, 50 + 37 * i, 0, 80 + 11 * i));
        }
        let padded = validate_dataset(padded).unwrap();
        let a = (mh_confidence_interval(&base, 0.95).unwrap(), peto_log_odds_ratio_ci(&base, 0.95).unwrap());
        let b = (mh_confidence_interval(&padded, 0.95).unwrap(), peto_log_odds_ratio_ci(&padded, 0.95).unwrap());
        let bits = |c: &reprometa_core::EstimateCI| [c.point.to_bits(), c.lower.to_bits(), c.upper.to_bits()];
        all_equal &= bits(&a.0) == bits(&b.0) && bits(&a.1) == bits(&b.1);
    }
    check(all_equal, "MH and Peto outputs bit-identical after appending 10 zero-total studies (3 datasets)".into())
}

/// Exact `P(|W| < t)` for one table by summing over all outcomes.
fn exhaustive_gamma(n: u64, m: u64, p0: f64, p1: f64, theta: f64, t: f64, non_finite_below: bool) -> f64 {
    let bx = Binomial::new(p0, n).unwrap();
    let by = Binomial::new(p1, m).unwrap();
    let mut total = 0.0;
    for x in 0..=n {
        let px = bx.pmf(x);
        for y in 0..=m {
            let w = ((y * (n - x)) as f64 / (x * (m - y)) as f64).ln() - theta;
            let below = if w.is_finite() { w.abs() < t } else { non_finite_below && t > 0.0 };
            if below {
                total += px * by.pmf(y);
            }
        }
    }
    total
}

fn criterion_3() -> Outcome {
    let roster = SampleSizeRoster::new(vec![(100, 100)]).unwrap();
    let pool = McPool::new(&roster, 100_000, 20240613);
    let (theta, eta, t) = (0.0, -7.36792, 0.41572);
    let (p0, p1) = ProbMap::Logit.arm_probs(theta, eta);
    let mut lines = Vec::new();
    let mut ok = true;
    for (policy, below) in [(NonFinitePolicy::NotLess, false), (NonFinitePolicy::Less, true)] {
        let exact = exhaustive_gamma(100, 100, p0, p1, theta, t, below);
        let mc = gamma_hat(&pool, theta, &[eta], t, ProbMap::Logit, policy);
        let tol = 3.0 * (exact * (1.0 - exact) / 100_000.0).sqrt();
        ok &= (mc - exact).abs() <= tol;
        lines.push(format!("{policy:?}: exact {exact:.5} vs MC {mc:.5} (tol {tol:.5})"));
    }
    check(ok, lines.join("; "))
}

fn criterion_4() -> Outcome {
    let mut runs = 0;
    let mut points = 0;
    let mut violations = 0;
    let mut datasets: Vec<MetaDataset> = Vec::new();
    for id in ['a', 'b'] {
        let d = builtin_dataset(id).unwrap();
        datasets.push(validate_dataset(reprometa_core::model::strip_zero_total(&d)).unwrap());
        datasets.push(d);
    }
    let scen = ScenarioConfig::new(1.5f64.ln(), builtin_roster('a').unwrap());
    for rep in 0..8 {
        datasets.push(reprometa_core::sim::generate_scenario_replicate(&scen, rep).unwrap().data);
    }
    for d in &datasets {
        for seed in [1, 2] {
            let cfg = ReproConfig { mc_samples: 500, grid_points: 101, seed, ..Default::default() };
            let r = repro_confidence_interval(d, &cfg).unwrap();
            runs += 1;
            points += r.grid.len();
            violations += r.grid.iter().filter(|e| e.t_value > e.gamma_init).count();
            violations += r.dominance_violations;
        }
    }
    check(violations == 0, format!("{violations} violations over {points} grid points in {runs} runs"))
}

/// Two-sided one-sample Kolmogorov-Smirnov test against U(0, 1).
fn ks_uniform(mut v: Vec<f64>) -> (f64, f64) {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v.iter().enumerate().map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n)).fold(0.0, f64::max);
    let sq = n.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    let p = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum::<f64>()
        .clamp(0.0, 1.0);
    (d, p)
}

fn criterion_5() -> Outcome {
    let roster = SampleSizeRoster::new(vec![(100, 100), (150, 150), (120, 200), (200, 120), (180, 180)]).unwrap();
    let theta0 = 1.5f64.ln();
    let pi0 = 0.2f64;
    let pi1 = 1.0 / (1.0 + (-(theta0 + logit(pi0))).exp());
    let truth = OddsParams::new(theta0, vec![logit(pi1) + logit(pi0); 5]);
    let root = RngStream::new(77);
    let gammas: Vec<f64> = (0..1000u64)
        .map(|i| {
            let d = sample_dataset(&truth, &roster, &root.child(i), ProbMap::Logit).unwrap();
            let t = reprometa_core::estimators::w_statistic(&d, theta0).abs();
            let pool = McPool::new(&roster, 2000, 1_000_000 + i);
            gamma_hat(&pool, theta0, &truth.eta, t, ProbMap::Logit, NonFinitePolicy::default())
        })
        .collect();
    let (d, p) = ks_uniform(gammas);
    check(p > 0.01, format!("KS D = {d:.4}, p = {p:.3} over 1000 datasets (M = 2000)"))
}

fn criterion_6() -> Outcome {
    let cfg = ScenarioConfig {
        replications: 200,
        mc_samples: 500,
        grid_points: 101,
        alpha: 0.95,
        seed: 6,
        methods: vec![Method::Mh, Method::Repro],
        ..ScenarioConfig::new(1.5f64.ln(), builtin_roster('a').unwrap())
    };
    let r = run_coverage_study(&cfg).unwrap();
    let repro = r.method(Method::Repro).unwrap();
    let mh = r.method(Method::Mh).unwrap();
    check(
        repro.coverage >= 0.904,
        format!(
            "Repro CP {:.3} (SE {:.3}, {} failures) >= 0.904; MH CP {:.3}; {} redraws",
            repro.coverage, repro.coverage_se, repro.failures, mh.coverage, r.redraws
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = ScenarioConfig {
        replications: 100,
        seed: 7,
        methods: vec![Method::Mh, Method::Peto, Method::Repro],
        ..ScenarioConfig::new(5f64.ln(), surrogate_roster_48())
    };
    let r = run_coverage_study(&cfg).unwrap();
    let (mh, peto, repro) =
        (r.method(Method::Mh).unwrap(), r.method(Method::Peto).unwrap(), r.method(Method::Repro).unwrap());
    check(
        repro.mean_length >= mh.mean_length && peto.coverage < 0.5 && repro.coverage >= 0.9,
        format!(
            "OR 5, 48 studies: lengths Repro {:.3} >= MH {:.3}; CP Peto {:.3} < 0.5, Repro {:.3} >= 0.9 (MH {:.3})",
            repro.mean_length, mh.mean_length, peto.coverage, repro.coverage, mh.coverage
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for id in ['a', 'b'] {
        let mut worst = f64::NEG_INFINITY;
        for seed in 1..=5 {
            let cfg = ReproConfig { alpha: 0.95, mc_samples: 1000, grid_points: 201, seed, ..Default::default() };
            let c = builtin_comparison(id, &cfg).unwrap();
            ok &= c.full_width() < c.stripped_width();
            worst = worst.max(c.full_width() - c.stripped_width());
        }
        parts.push(format!("({id}) max width(full) - width(stripped) = {worst:.3}"));
    }
    check(ok, format!("{} over seeds 1..5", parts.join(", ")))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    let mut body = String::from("study_id,x_control,n_control,y_treatment,m_treatment\n");
    for (i, s) in builtin_dataset('a').unwrap().studies().iter().enumerate() {
        body.push_str(&format!("{},{},{},{},{}\n", i + 1, s.x, s.n, s.y, s.m));
    }
    std::fs::write(&csv, body).unwrap();
    let run = |workers: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_reprometa"))
            .args([
                "analyze",
                csv.to_str().unwrap(),
                "--output",
                "json",
                "--seed",
                "11",
                "--refine-endpoints",
                "--workers",
                workers,
            ])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let (one, eight) = (run("1"), run("8"));
    check(
        one == eight && !one.is_empty(),
        format!("analyze JSON, {} bytes, identical for --workers 1 and 8", one.len()),
    )
}

fn criterion_10() -> Option<Outcome> {
    let path = std::env::var("REPROMETA_AVANDIA_CSV").ok()?;
    Some((|| {
        let d = validate_dataset(reprometa_core::io::read_dataset_path(&path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let mh = mh_confidence_interval(&d, 0.95).map_err(|e| e.to_string())?;
        let (_, lo, hi) = mh.odds_ratio_scale();
        let r = repro_confidence_interval(&d, &ReproConfig::default()).map_err(|e| e.to_string())?;
        let (rlo, rhi) = r.interval;
        let tol = r.grid_spacing + 0.05;
        let ok = (lo - 1.029).abs() <= 0.01
            && (hi - 1.978).abs() <= 0.01
            && (rlo - 0.982f64.ln()).abs() <= tol
            && (rhi - 2.118f64.ln()).abs() <= tol;
        check(
            ok,
            format!("MH OR ({lo:.3}, {hi:.3}); Repro OR ({:.3}, {:.3}), log tolerance {tol:.3}", rlo.exp(), rhi.exp()),
        )
    })())
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        (1, "estimator oracles", criterion_1),
        (2, "zero-total invariance", criterion_2),
        (3, "gamma vs exhaustive enumeration", criterion_3),
        (4, "dominance", criterion_4),
        (5, "uniformity", criterion_5),
        (6, "coverage", criterion_6),
        (7, "baseline trends", criterion_7),
        (8, "zero-total comparison", criterion_8),
        (9, "determinism across workers", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {id:>2} PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    match criterion_10() {
        None => println!("criterion 10 SKIP  external dataset: set REPROMETA_AVANDIA_CSV to run"),
        Some(Ok(d)) => println!("criterion 10 PASS  external dataset: {d}"),
        Some(Err(d)) => {
            failed += 1;
            println!("criterion 10 FAIL  external dataset: {d}");
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
