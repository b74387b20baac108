//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cdg_cli::{demos, run_scenario, sweep, RunOptions, RunSummary, Scenario};
use cdg_core::checkers::{
    check_gross_substitute, check_homogeneity, homogeneity_residual, replay_violation,
    run_check, scan_equilibria, CheckConfig, Property, ScanConfig, Verdict,
};
use cdg_core::generate::{
    normalize_rows, random_irreducible_ratio, random_irreducible_weights, random_metzler,
    random_orthant_point,
};
use cdg_core::models::{
    linear_equilibrium, square_from_rows, LinearModel, Model, RatioConsensusModel, VectorField,
    WeightSchedule,
};
use cdg_core::ray::{dini_point, lyapunov_series, max_rate};
use cdg_core::sim::{integrate, monitor_box, IntegratorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;
use tempfile::TempDir;

const POSITIVITY_FLOOR: f64 = -1e-9;
const POSITIVITY_BUDGET: Duration = Duration::from_secs(60);
/// Relative rounding allowance on "within one grid spacing".
const SPACING_ROUNDING: f64 = 1e-9;
const SCAN_BUDGET: Duration = Duration::from_secs(120);
const ATTRACTION_BUDGET: Duration = Duration::from_secs(180);
const ATTRACTION_DISTANCE: f64 = 1e-6;
/// Allowed upward step of the Lyapunov series, in units of `h · max ‖g‖_sup`.
const JUMP_FACTOR: f64 = 10.0;
/// Row sum for the attraction instances; see README ("Attraction instances").
const ATTRACTION_ROW_SUM: f64 = 30.0;
const DINI_MAX_C: f64 = 5.0;
const LINEAR_TOL: f64 = 1e-6;
const SOLVE_TOL: f64 = 1e-12;
const CONSENSUS_TOL: f64 = 1e-6;
const SUM_DRIFT_TOL: f64 = 1e-9;
const SLOPE_TOL: f64 = 0.2;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn budget(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {:.1}s, budget {}s", elapsed.as_secs_f64(), limit.as_secs())
    })
}

fn half_range(e: &[f64]) -> f64 {
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / 2.0
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        let pivot = a[c].clone();
        for r in c + 1..n {
            let f = a[r][c] / pivot[c];
            for (x, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * p;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn run_demo(name: &str, dir: &Path, seed: u64) -> Result<RunSummary, String> {
    let sc = demos::demo(name).map_err(|e| e.to_string())?;
    let opts = RunOptions {
        seed,
        ..RunOptions::default()
    };
    run_scenario(&sc, dir, 0, &opts).map_err(|e| format!("{name}: {e}"))
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn f(v: &Value, what: &str) -> Result<f64, String> {
    v.as_f64().ok_or_else(|| format!("{what} missing or not a number"))
}

fn positivity() -> Outcome {
    let start = Instant::now();
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(101);
            rng.set_stream(i);
            let m = rng.gen_range(1..=8);
            let model = random_metzler(&mut rng, m);
            let x0 = random_orthant_point(&mut rng, m);
            let cfg = IntegratorConfig::new(1e-3, 0.0, 20.0).with_sample_every(1);
            let traj = integrate(&model, &x0, &cfg).map_err(|e| format!("system {i}: {e}"))?;
            let low = traj
                .states
                .iter()
                .flatten()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            Ok((low, i, traj.monitor_flags.positivity_ok))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let (low, at, _) = worst
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let flagged = worst.iter().filter(|w| !w.2).count();
    ensure(low >= POSITIVITY_FLOOR, || format!("system {at} reached {low:e}"))?;
    ensure(flagged == 0, || format!("{flagged} runs flagged by the integrator"))?;
    budget(start.elapsed(), POSITIVITY_BUDGET)?;
    Ok(format!("1000 systems, min component {low:e}"))
}

fn equilibrium_scan() -> Outcome {
    let start = Instant::now();
    let cfg = ScanConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0_f64;
    let mut flagged = 0;
    for k in 0..20 {
        let m = 2 + k % 2;
        let model = random_irreducible_ratio(&mut rng, m);
        let rep = scan_equilibria(&model, &cfg).map_err(|e| e.to_string())?;
        ensure(rep.verdict == Verdict::Pass, || format!("instance {k} (m={m}) failed"))?;
        ensure(rep.max_flagged_ray_distance <= rep.spacing * (1.0 + SPACING_ROUNDING), || {
            format!(
                "instance {k}: flagged point at distance {} > spacing {}",
                rep.max_flagged_ray_distance, rep.spacing
            )
        })?;
        ensure(rep.flagged_count > 0, || format!("instance {k}: nothing flagged near the ray"))?;
        worst = worst.max(rep.max_flagged_ray_distance / rep.spacing);
        flagged += rep.flagged_count;
    }
    // Blocks {0, 1} and {2} with no weight between them: every e with
    // e_0 = e_1 has g = 0.
    let blocks = RatioConsensusModel::constant(
        square_from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]])
            .unwrap(),
    )
    .unwrap();
    let rep = scan_equilibria(&blocks, &cfg).map_err(|e| e.to_string())?;
    ensure(rep.verdict == Verdict::Fail, || "two-block model was not flagged".into())?;
    budget(start.elapsed(), SCAN_BUDGET)?;
    Ok(format!(
        "20 instances, {flagged} flagged points, worst distance {worst:.2} spacings; two-block flagged at distance {:.3}",
        rep.max_flagged_ray_distance
    ))
}

fn box_confinement() -> Outcome {
    let violations = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(303);
            rng.set_stream(i);
            let m = rng.gen_range(2..=10);
            // Every other run switches weights at t = 5 and t = 10.
            let entries = if i % 2 == 0 {
                vec![(0.0, random_irreducible_weights(&mut rng, m, 0.5))]
            } else {
                [0.0, 5.0, 10.0]
                    .iter()
                    .map(|&t| (t, random_irreducible_weights(&mut rng, m, 0.5)))
                    .collect()
            };
            let model: Model =
                RatioConsensusModel::new(WeightSchedule::new(entries).unwrap()).into();
            let x0: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect();
            let cfg = IntegratorConfig::new(1e-3, 0.0, 20.0).with_sample_every(1);
            let traj = integrate(&model, &x0, &cfg).map_err(|e| format!("run {i}: {e}"))?;
            let rep = monitor_box(&traj, &model).map_err(|e| e.to_string())?;
            let ok = rep.ok && traj.monitor_flags.box_ok == Some(true);
            Ok(usize::from(!ok))
        })
        .collect::<Result<Vec<_>, String>>()?
        .into_iter()
        .sum::<usize>();
    ensure(violations == 0, || format!("{violations} of 100 runs left their box"))?;
    Ok("100 runs, 0 violations".into())
}

fn attraction() -> Outcome {
    let start = Instant::now();
    let h = 1e-3;
    let runs = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(404);
            rng.set_stream(i);
            let m = rng.gen_range(2..=10);
            let mut w = random_irreducible_weights(&mut rng, m, 1.0);
            normalize_rows(&mut w, ATTRACTION_ROW_SUM);
            let model = RatioConsensusModel::constant(w).map_err(|e| e.to_string())?;
            let x0: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.gen_range(-2.0..=2.0))).collect();
            let cfg = IntegratorConfig::new(h, 0.0, 50.0).with_sample_every(1);
            let traj = integrate(&model, &x0, &cfg).map_err(|e| format!("run {i}: {e}"))?;
            let jump = lyapunov_series(&traj).max_upward_jump;
            let allowed = JUMP_FACTOR * h * max_rate(&traj, &model).map_err(|e| e.to_string())?;
            Ok((half_range(traj.endpoint()), jump <= allowed))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let reached = runs.iter().filter(|r| r.0 < ATTRACTION_DISTANCE).count();
    let worst = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    let jumps_ok = runs.iter().filter(|r| r.1).count();
    ensure(reached == 100, || format!("{reached}/100 within {ATTRACTION_DISTANCE:e}, worst {worst:e}"))?;
    ensure(jumps_ok == 100, || format!("Lyapunov jump bound held in {jumps_ok}/100 runs"))?;
    budget(start.elapsed(), ATTRACTION_BUDGET)?;
    Ok(format!("100/100 within {ATTRACTION_DISTANCE:e}, worst {worst:e}"))
}

fn dini(dir: &Path) -> Outcome {
    let s = run_demo("ratio-n2", dir, 0)?;
    let a = s
        .analyses
        .iter()
        .find(|a| a.name == "dini")
        .ok_or("ratio-n2 has no dini analysis")?;
    let c = f(&a.detail["slack_constant"], "slack_constant")?;
    ensure(a.detail["verdict"] == "pass" && c <= DINI_MAX_C, || {
        format!("dini verdict {} with C = {c}", a.detail["verdict"])
    })?;

    // At [2, 1]: g = [−1/2, 1], both indices active, bound −1/2, and
    // ρ′ = (ġ_0 − ġ_1)/2 = −3/4 to first order.
    let h = 1e-3;
    let pt = dini_point(&RatioConsensusModel::uniform(2), 0.0, &[2.0, 1.0], h)
        .map_err(|e| e.to_string())?;
    ensure(pt.bound == -0.5, || format!("bound {} at [2, 1]", pt.bound))?;
    ensure((pt.forward_difference + 0.75).abs() <= 2.0 * h, || {
        format!("forward difference {} vs hand value -0.75", pt.forward_difference)
    })?;
    ensure(pt.forward_difference <= pt.bound + 2.0 * h, || {
        format!("forward difference {} above bound", pt.forward_difference)
    })?;
    Ok(format!("C = {c:.3}, hand point Δρ/h = {:.6}", pt.forward_difference))
}

fn linear_equilibrium_demo(dir: &Path) -> Outcome {
    let s = run_demo("two-route-linear", dir, 0)?;
    let err = s.endpoint.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    ensure(err < LINEAR_TOL, || format!("endpoint {:?}", s.endpoint))?;

    let a = vec![vec![-2.0, 1.0], vec![1.0, -2.0]];
    let model = LinearModel::metzler(square_from_rows(&a).unwrap(), vec![1.0, 1.0]).unwrap();
    let eq = linear_equilibrium(&model).map_err(|e| e.to_string())?;
    let oracle = solve(a, vec![-1.0, -1.0]);
    let gap = eq.point.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(gap <= SOLVE_TOL, || format!("library {:?} vs oracle {oracle:?}", eq.point))?;
    Ok(format!("endpoint error {err:e}, solve agreement {gap:e}"))
}

fn homogeneity_and_checkers() -> Outcome {
    let cfg = CheckConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let ratios: Vec<Model> = vec![
        RatioConsensusModel::uniform(3).into(),
        random_irreducible_ratio(&mut rng, 6).into(),
    ];
    for r in &ratios {
        let rep = check_homogeneity(r, &cfg).map_err(|e| e.to_string())?;
        ensure(rep.verdict == Verdict::Pass && rep.stats["max_residual"] == 0.0, || {
            format!("{} homogeneity residual {}", r.label(), rep.stats["max_residual"])
        })?;
    }
    let e = [0.25, 3.0, 7.5];
    for lambda in [0.5, 2.0, 10.0] {
        let r = homogeneity_residual(&ratios[0], 0.0, &e, lambda).map_err(|e| e.to_string())?;
        ensure(r == 0.0, || format!("residual {r} at λ = {lambda}"))?;
    }

    let demo = LinearModel::metzler(
        square_from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]]).unwrap(),
        vec![1.0, 1.0],
    )
    .unwrap();
    // g(2e) − g(e) = A·e = [−1, −1] at e = [1, 1].
    let hand = homogeneity_residual(&demo, 0.0, &[1.0, 1.0], 2.0).map_err(|e| e.to_string())?;
    ensure(hand == 1.0, || format!("hand witness residual {hand}"))?;
    let rep = check_homogeneity(&demo, &cfg).map_err(|e| e.to_string())?;
    ensure(rep.verdict == Verdict::Fail, || "linear demo passed homogeneity".into())?;
    let w = rep.violations.first().ok_or("no homogeneity witness")?;
    ensure(
        replay_violation(&demo, Property::Homogeneity, w, rep.tolerance).unwrap_or(false),
        || "homogeneity witness does not replay".into(),
    )?;

    for m in 2..=6 {
        let model = random_metzler(&mut rng, m);
        let rep = check_gross_substitute(&model, &cfg).map_err(|e| e.to_string())?;
        ensure(rep.verdict == Verdict::Pass, || format!("Metzler m={m} failed GS"))?;
    }
    let planted = LinearModel::new(
        square_from_rows(&[vec![-2.0, -1.0], vec![1.0, -2.0]]).unwrap(),
        vec![0.0, 0.0],
    )
    .unwrap();
    let rep = check_gross_substitute(&planted, &cfg).map_err(|e| e.to_string())?;
    ensure(rep.verdict == Verdict::Fail, || "planted model passed GS".into())?;
    let w = rep.violations.first().ok_or("no GS witness")?;
    ensure(
        replay_violation(&planted, Property::GrossSubstitute, w, rep.tolerance).unwrap_or(false),
        || "GS witness does not replay".into(),
    )?;
    Ok(format!("GS witness pivot {:?}, {} violations", w.pivot, rep.violation_count))
}

fn scaled_vs_difference(dir: &Path) -> Outcome {
    run_demo("laplacian-vs-ratio", dir, 0)?;
    let cmp = read_json(&dir.join("comparison.json"))?;
    let d = &cmp["difference"];
    let s = &cmp["scaled"];
    let lap_lambda = f(&d["lambda_star"], "difference.lambda_star")?;
    let lap_dist = f(&d["final_distance"], "difference.final_distance")?;
    let drift = f(&d["invariant_drift"], "difference.invariant_drift")?;
    ensure((lap_lambda - 2.0).abs() + lap_dist < CONSENSUS_TOL, || {
        format!("Laplacian limit {lap_lambda} at distance {lap_dist}")
    })?;
    ensure(drift <= SUM_DRIFT_TOL, || format!("sum drift {drift:e}"))?;

    // The Laplacian endpoint itself, read back from the CSV.
    let csv = fs::read_to_string(dir.join("laplacian_trajectory.csv")).map_err(|e| e.to_string())?;
    let last: Vec<f64> = csv
        .lines()
        .last()
        .ok_or("empty Laplacian CSV")?
        .split(',')
        .skip(1)
        .map(|x| x.parse().map_err(|_| format!("bad CSV value {x}")))
        .collect::<Result<_, _>>()?;
    ensure(last.iter().all(|v| (v - 2.0).abs() < CONSENSUS_TOL), || format!("Laplacian endpoint {last:?}"))?;

    let ratio_lambda = f(&s["lambda_star"], "scaled.lambda_star")?;
    let ratio_dist = f(&s["final_distance"], "scaled.final_distance")?;
    ensure(ratio_lambda > 1.0 && ratio_lambda < 3.0 && ratio_dist < CONSENSUS_TOL, || {
        format!("ratio limit {ratio_lambda} at distance {ratio_dist}")
    })?;
    Ok(format!("Laplacian → {lap_lambda:.9} (drift {drift:e}); ratio → {ratio_lambda:.9}"))
}

fn epsilon_study(dir: &Path) -> Outcome {
    run_demo("two-route-linear", dir, 0)?;
    let study = read_json(&dir.join("epsilon_study.json"))?;
    let rows = study["rows"].as_array().ok_or("no epsilon rows")?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| Ok((f(&r["epsilon"], "epsilon")?, f(&r["discrepancy"], "discrepancy")?)))
        .collect::<Result<_, String>>()?;
    let eps: Vec<f64> = pts.iter().map(|p| p.0).collect();
    ensure(eps == [1e-2, 1e-3, 1e-4], || format!("epsilon list {eps:?}"))?;
    ensure(pts.windows(2).all(|w| w[1].1 < w[0].1), || format!("not strictly decreasing: {pts:?}"))?;
    let logs: Vec<(f64, f64)> = pts.iter().map(|(e, d)| (e.ln(), d.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    ensure((slope - 1.0).abs() <= SLOPE_TOL, || format!("log-log slope {slope}"))?;
    Ok(format!("slope {slope:.4}"))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn without_timestamp(bytes: &[u8]) -> Vec<u8> {
    String::from_utf8_lossy(bytes)
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
        .into_bytes()
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let fa = files_under(a);
    ensure(fa == files_under(b), || format!("file sets differ under {}", a.display()))?;
    for rel in &fa {
        let x = fs::read(a.join(rel)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(rel)).map_err(|e| e.to_string())?;
        ensure(without_timestamp(&x) == without_timestamp(&y), || {
            format!("{} differs", rel.display())
        })?;
    }
    Ok(fa.len())
}

fn determinism(dir: &Path) -> Outcome {
    let mut files = 0;
    for name in demos::demo_names() {
        for side in ["a", "b"] {
            run_demo(name, &dir.join(side).join(name), 7)?;
        }
        files += same_tree(&dir.join("a").join(name), &dir.join("b").join(name))?;
    }

    let sc = Scenario::parse(
        "name = \"det-sweep\"\n[model]\nkind = \"ratio\"\nrandom = { m = 4 }\n\
         [initial]\nrandom = { kind = \"cone\" }\n[integrator]\nt_end = 5.0\n\
         [analyses]\npositivity = true\nconsensus = 1e-6\n",
        "det-sweep",
    )
    .map_err(|e| e.to_string())?;
    let opts = RunOptions {
        seed: 7,
        ..RunOptions::default()
    };
    for side in ["a", "b"] {
        sweep(&sc, 6, &dir.join(side).join("sweep"), &opts).map_err(|e| e.to_string())?;
    }
    files += same_tree(&dir.join("a/sweep"), &dir.join("b/sweep"))?;

    let model: Model = RatioConsensusModel::uniform(3).into();
    let cfg = CheckConfig::default().with_seed(7).with_samples(2000);
    for p in Property::ALL {
        let a = run_check(&model, p, &cfg).map_err(|e| e.to_string())?;
        let b = run_check(&model, p, &cfg).map_err(|e| e.to_string())?;
        ensure(a.to_json() == b.to_json(), || format!("check {p} differs"))?;
    }
    Ok(format!("{files} artifact files identical, check reports identical"))
}

fn main() -> ExitCode {
    let tmp = TempDir::new().expect("temporary directory");
    let dir = |name: &str| tmp.path().join(name);
    let criteria: Vec<Criterion> = vec![
        ("positivity", Box::new(positivity)),
        ("equilibrium-ray uniqueness", Box::new(equilibrium_scan)),
        ("box confinement", Box::new(box_confinement)),
        ("attraction", Box::new(attraction)),
        ("dini bound", Box::new(move || dini(&dir("dini")))),
        ("linear equilibrium", Box::new(move || linear_equilibrium_demo(&dir("linear")))),
        ("homogeneity and checkers", Box::new(homogeneity_and_checkers)),
        ("scaled vs difference consensus", Box::new(move || scaled_vs_difference(&dir("compare")))),
        ("epsilon-limit study", Box::new(move || epsilon_study(&dir("epsilon")))),
        ("determinism", Box::new(move || determinism(&dir("determinism")))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} {:>2} {name}: {detail} [{:.1}s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
