//! Executes scenarios: integration, requested analyses and artifact export.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cdg_core::checkers::{run_check, CheckConfig, CheckReport, Verdict};
use cdg_core::models::{linear_equilibrium, LaplacianModel, Model, VectorField};
use cdg_core::ray::{
    check_dini_bound, compare_scaled_vs_difference, detect_consensus, lyapunov_series, max_rate,
    ray_project, DINI_MAX_SLACK,
};
use cdg_core::sim::{
    epsilon_limit_study, integrate, monitor_box, monitor_positivity, IntegratorConfig, MonitorFlags,
    Trajectory, BOX_SLACK_FACTOR,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{distance_csv, ensure_dir, trajectory_csv, write_json, write_text};
use crate::scenario::Scenario;
use crate::svg::{Plot, Series};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    /// Overrides the scenario's check sample count.
    pub samples: Option<u64>,
    /// Overrides the scenario's check tolerance.
    pub tol: Option<f64>,
    /// Write trajectory/distance CSVs and plots next to the summary.
    pub artifacts: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: None,
            tol: None,
            artifacts: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Reported but not asserted for this model.
    Computed,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisResult {
    pub name: String,
    pub status: Status,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub model: String,
    pub model_kind: String,
    pub claimed_classes: Vec<String>,
    pub dimension: usize,
    pub seed: u64,
    pub initial_state: Vec<f64>,
    pub endpoint: Vec<f64>,
    pub final_time: f64,
    pub monitor_flags: MonitorFlags,
    pub refinement_discrepancy: Option<f64>,
    pub consensus_time: Option<f64>,
    pub lambda_star_final: f64,
    pub final_distance: f64,
    pub dini_worst_margin: Option<f64>,
    pub distance_series: Option<String>,
    pub trajectory: Option<String>,
    pub analyses: Vec<AnalysisResult>,
    pub passed: bool,
    /// The only field that varies between identical runs.
    pub generated_at: String,
}

impl RunSummary {
    pub fn failures(&self) -> Vec<&str> {
        self.analyses
            .iter()
            .filter(|a| a.status == Status::Fail)
            .map(|a| a.name.as_str())
            .collect()
    }
}

pub fn timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!("unix:{secs}")
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn check_status(v: Verdict) -> Status {
    match v {
        Verdict::Fail => Status::Fail,
        Verdict::Pass | Verdict::NotApplicable => Status::Pass,
    }
}

/// Runs `scenario` once with the RNG stream for `run_index` and writes the
/// artifacts into `out_dir`.
pub fn run_scenario(
    scenario: &Scenario,
    out_dir: &Path,
    run_index: u64,
    opts: &RunOptions,
) -> Result<RunSummary, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(run_index);
    let (model, x0) = scenario.instantiate(&mut rng)?;
    log::info!("{} run {run_index}: {} from {x0:?}", scenario.name, model.label());
    ensure_dir(out_dir)?;
    execute(scenario, &model, &x0, out_dir, opts)
}

fn execute(
    scenario: &Scenario,
    model: &Model,
    x0: &[f64],
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, CliError> {
    let cfg = scenario.integrator;
    let a = &scenario.analyses;
    let traj = integrate(model, x0, &cfg)?;
    let block = model.positive_block();
    let series = lyapunov_series(&traj);
    let endpoint_block = &traj.endpoint()[block.clone()];
    let proj = ray_project(endpoint_block)?;
    let mut results = Vec::new();

    if let Some(t) = traj.monitor_flags.domain_exit_at {
        log::warn!("{}: trajectory left the domain at t = {t}", scenario.name);
        results.push(AnalysisResult {
            name: "domain".into(),
            status: Status::Fail,
            detail: json!({ "domain_exit_at": t }),
        });
    }

    if a.positivity {
        let rep = monitor_positivity(&traj);
        results.push(AnalysisResult {
            name: "positivity".into(),
            status: status(rep.ok && traj.monitor_flags.domain_exit_at.is_none()),
            detail: json!(rep),
        });
    }

    if a.box_confinement {
        let rep = monitor_box(&traj, model)?;
        // The integrator checked every step; the replay covers retained samples.
        let full = traj.monitor_flags.box_ok.unwrap_or(true);
        results.push(AnalysisResult {
            name: "box".into(),
            status: status(rep.ok && full),
            detail: json!({
                "retained_samples": rep,
                "full_resolution_ok": full,
                "full_resolution_violation": traj.monitor_flags.box_violation,
            }),
        });
    }

    if a.lyapunov {
        let rate = max_rate(&traj, model)?;
        let bound = BOX_SLACK_FACTOR * cfg.step * rate;
        let asserted = model.claims(cdg_core::ModelClass::MaxMinContraction);
        let ok = series.max_upward_jump <= bound;
        results.push(AnalysisResult {
            name: "lyapunov".into(),
            status: if asserted { status(ok) } else { Status::Computed },
            detail: json!({
                "initial": series.values.first(),
                "final": series.values.last(),
                "max_upward_jump": series.max_upward_jump,
                "jump_bound": bound,
                "max_rate": rate,
            }),
        });
    }

    let mut dini_worst_margin = None;
    if a.dini {
        let full_traj = if traj.is_full_resolution() {
            traj.clone()
        } else {
            let full_cfg = IntegratorConfig {
                sample_every: 1,
                refine: false,
                ..cfg
            };
            integrate(model, x0, &full_cfg)?
        };
        let rep = check_dini_bound(&full_traj, model, DINI_MAX_SLACK)?;
        dini_worst_margin = Some(rep.worst_margin);
        results.push(AnalysisResult {
            name: "dini".into(),
            status: check_status(rep.verdict),
            detail: json!(rep),
        });
    }

    let mut consensus_time = None;
    if let Some(eps) = a.consensus {
        consensus_time = detect_consensus(&traj, eps)?;
        results.push(AnalysisResult {
            name: "consensus".into(),
            status: status(consensus_time.is_some()),
            detail: json!({
                "epsilon": eps,
                "consensus_time": consensus_time,
                "lambda_star": proj.lambda_star,
                "final_distance": proj.distance,
            }),
        });
    }

    if let Some(tol) = a.equilibrium {
        let Model::Linear(lin) = model else {
            return Err(CliError::Usage(
                "equilibrium needs an unshifted linear model".into(),
            ));
        };
        let eq = linear_equilibrium(lin)?;
        let err = traj
            .endpoint()
            .iter()
            .zip(&eq.point)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        results.push(AnalysisResult {
            name: "equilibrium".into(),
            status: status(err < tol),
            detail: json!({
                "point": eq.point,
                "hurwitz": eq.hurwitz,
                "eigenvalues": eq.eigenvalues,
                "endpoint_error": err,
                "tolerance": tol,
            }),
        });
    }

    if let Some(eps_list) = &a.epsilon_study {
        let study = epsilon_limit_study(model, x0, eps_list, &cfg)?;
        write_json(&out_dir.join("epsilon_study.json"), &study)?;
        results.push(AnalysisResult {
            name: "epsilon_study".into(),
            status: status(study.decreasing_within_10pct),
            detail: json!(study),
        });
    }

    if a.compare_difference {
        let Model::Ratio(ratio) = model else {
            return Err(CliError::Usage(
                "compare_difference needs an unshifted ratio model".into(),
            ));
        };
        let w = ratio.schedule().at(cfg.t0).clone();
        let lap = LaplacianModel::new(w)?;
        let lap_traj = integrate(&lap, x0, &cfg)?;
        let cmp = compare_scaled_vs_difference(&traj, &lap_traj, lap.is_symmetric())?;
        let drift_ok = cmp.difference.invariant_drift.is_none_or(|d| d <= 1e-9);
        let ok = cmp.scaled.consensus_time.is_some()
            && cmp.difference.consensus_time.is_some()
            && cmp.scaled.limit_in_initial_box
            && drift_ok;
        write_json(&out_dir.join("comparison.json"), &cmp)?;
        if opts.artifacts {
            write_text(
                &out_dir.join("laplacian_trajectory.csv"),
                &trajectory_csv(&lap_traj, 0),
            )?;
        }
        results.push(AnalysisResult {
            name: "compare_difference".into(),
            status: status(ok),
            detail: json!(cmp),
        });
    }

    if let Some(checks) = &a.checks {
        let cfg = CheckConfig {
            samples: opts.samples.or(checks.samples).unwrap_or(CheckConfig::default().samples),
            seed: checks.seed.unwrap_or(opts.seed),
            tol: opts.tol.or(checks.tol).unwrap_or(CheckConfig::default().tol),
            ..CheckConfig::default()
        };
        let reports: Vec<CheckReport> = checks
            .properties
            .iter()
            .map(|p| run_check(model, *p, &cfg))
            .collect::<Result<_, _>>()?;
        write_json(&out_dir.join("checks.json"), &reports)?;
        for r in &reports {
            results.push(AnalysisResult {
                name: format!("check:{}", r.property),
                status: check_status(r.verdict),
                detail: json!({
                    "verdict": r.verdict,
                    "evaluated": r.evaluated,
                    "violation_count": r.violation_count,
                }),
            });
        }
    }

    let (trajectory, distance_series) = if opts.artifacts {
        write_text(
            &out_dir.join("trajectory.csv"),
            &trajectory_csv(&traj, scenario.vertex_count),
        )?;
        write_text(&out_dir.join("distance.csv"), &distance_csv(&series))?;
        write_plots(out_dir, &traj, scenario)?;
        (Some("trajectory.csv".to_string()), Some("distance.csv".to_string()))
    } else {
        (None, None)
    };

    let passed = results.iter().all(|r| r.status != Status::Fail);
    let summary = RunSummary {
        scenario: scenario.name.clone(),
        model: model.label(),
        model_kind: model.kind().to_string(),
        claimed_classes: model
            .claimed_classes()
            .iter()
            .map(|c| c.code().to_string())
            .collect(),
        dimension: model.dimension(),
        seed: opts.seed,
        initial_state: x0.to_vec(),
        endpoint: traj.endpoint().to_vec(),
        final_time: traj.final_time(),
        monitor_flags: traj.monitor_flags.clone(),
        refinement_discrepancy: traj.refinement_discrepancy,
        consensus_time,
        lambda_star_final: proj.lambda_star,
        final_distance: proj.distance,
        dini_worst_margin,
        distance_series,
        trajectory,
        analyses: results,
        passed,
        generated_at: timestamp(),
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_plots(out_dir: &Path, traj: &Trajectory, scenario: &Scenario) -> Result<(), CliError> {
    let dim = traj.states.first().map_or(0, Vec::len);
    let header = crate::output::trajectory_header(dim, scenario.vertex_count);
    let labels: Vec<&str> = header.split(',').skip(1).collect();
    let components = Plot {
        title: &format!("{}: state", scenario.name),
        x_label: "t",
        y_label: "value",
        log_y: false,
        series: labels
            .iter()
            .enumerate()
            .map(|(i, l)| Series {
                label: l.to_string(),
                points: traj.times.iter().zip(&traj.states).map(|(t, x)| (*t, x[i])).collect(),
            })
            .collect(),
    };
    write_text(&out_dir.join("trajectory.svg"), &components.render())?;
    let series = lyapunov_series(traj);
    let distance = Plot {
        title: &format!("{}: distance to the ray", scenario.name),
        x_label: "t",
        y_label: "V (log scale)",
        log_y: true,
        series: vec![Series {
            label: "V".into(),
            points: series.times.iter().copied().zip(series.values.iter().copied()).collect(),
        }],
    };
    write_text(&out_dir.join("distance.svg"), &distance.render())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub index: u64,
    pub passed: bool,
    pub positivity_ok: bool,
    pub consensus_time: Option<f64>,
    pub final_distance: Option<f64>,
    pub failures: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub scenario: String,
    pub runs: u64,
    pub seed: u64,
    pub passed: u64,
    pub failed: u64,
    pub errored: u64,
    pub positivity_ok: u64,
    pub consensus_reached: u64,
    pub max_final_distance: Option<f64>,
    pub consensus_time: Option<Spread>,
    pub per_run: Vec<RunRecord>,
    pub generated_at: String,
}

fn spread(mut v: Vec<f64>) -> Option<Spread> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    Some(Spread {
        min: v[0],
        median,
        max: v[n - 1],
    })
}

/// Runs `runs` randomized instances in parallel. Each run writes its summary to
/// `out_dir/runs/run_NNNN/`; the aggregate goes to `out_dir/sweep.json`.
pub fn sweep(
    scenario: &Scenario,
    runs: u64,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<SweepReport, CliError> {
    if !scenario.is_randomizable() {
        return Err(CliError::Usage(format!(
            "scenario '{}' has a fixed initial state; sweeps need [initial] random",
            scenario.name
        )));
    }
    ensure_dir(out_dir)?;
    let run_dir = |i: u64| -> PathBuf { out_dir.join("runs").join(format!("run_{i:04}")) };
    let per_run: Vec<RunRecord> = (0..runs)
        .into_par_iter()
        .map(|i| match run_scenario(scenario, &run_dir(i), i, opts) {
            Ok(s) => RunRecord {
                index: i,
                passed: s.passed,
                positivity_ok: s.monitor_flags.positivity_ok,
                consensus_time: s.consensus_time,
                final_distance: Some(s.final_distance),
                failures: s.failures().into_iter().map(str::to_owned).collect(),
                error: None,
            },
            Err(e) => {
                log::warn!("run {i} errored: {e}");
                RunRecord {
                    index: i,
                    passed: false,
                    positivity_ok: false,
                    consensus_time: None,
                    final_distance: None,
                    failures: Vec::new(),
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();

    let report = SweepReport {
        scenario: scenario.name.clone(),
        runs,
        seed: opts.seed,
        passed: per_run.iter().filter(|r| r.passed).count() as u64,
        failed: per_run.iter().filter(|r| !r.passed && r.error.is_none()).count() as u64,
        errored: per_run.iter().filter(|r| r.error.is_some()).count() as u64,
        positivity_ok: per_run.iter().filter(|r| r.positivity_ok).count() as u64,
        consensus_reached: per_run.iter().filter(|r| r.consensus_time.is_some()).count() as u64,
        max_final_distance: per_run
            .iter()
            .filter_map(|r| r.final_distance)
            .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d)))),
        consensus_time: spread(per_run.iter().filter_map(|r| r.consensus_time).collect()),
        per_run,
        generated_at: timestamp(),
    };
    write_json(&out_dir.join("sweep.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_of_even_and_odd() {
        let s = spread(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!((s.min, s.median, s.max), (1.0, 2.0, 3.0));
        assert_eq!(spread(vec![4.0, 1.0]).unwrap().median, 2.5);
        assert!(spread(vec![]).is_none());
    }
}
