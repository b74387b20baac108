//! Geometry of the equilibrium ray `{λ𝟏 : λ > 0}` under the sup-norm.
//!
//! The nearest ray point to `e` is the Chebyshev center of its components,
//! `λ* = (max + min) / 2`, at distance `(max − min) / 2`. The distance
//! `V(e) = d(e, ray)` serves as a Lyapunov function for fields with the
//! max/min contraction property.

use serde::Serialize;

use crate::checkers::Verdict;
use crate::error::{Error, Result};
use crate::models::{ModelClass, VectorField};
use crate::sim::{rk4_step, Trajectory};

/// Relative tolerance for membership in the active set.
pub const ACTIVE_SET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayProjection {
    pub lambda_star: f64,
    pub distance: f64,
    /// Indices whose deviation from `λ*` attains the distance (within tolerance).
    pub active_set: Vec<usize>,
}

pub fn ray_project(e: &[f64]) -> Result<RayProjection> {
    if e.is_empty() {
        return Err(Error::structural("cannot project an empty vector"));
    }
    let (hi, lo) = e
        .iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| {
            (hi.max(v), lo.min(v))
        });
    let lambda_star = 0.5 * (hi + lo);
    let distance = e
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max((v - lambda_star).abs()));
    let cutoff = distance - ACTIVE_SET_TOL * distance;
    let active_set = e
        .iter()
        .enumerate()
        .filter(|(_, &v)| (v - lambda_star).abs() >= cutoff)
        .map(|(i, _)| i)
        .collect();
    Ok(RayProjection {
        lambda_star,
        distance,
        active_set,
    })
}

/// `d(e, ray)` alone.
pub fn ray_distance(e: &[f64]) -> f64 {
    ray_project(e).map(|p| p.distance).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `max_k (ρ_{k+1} − ρ_k)`, or 0 for fewer than two samples.
    pub max_upward_jump: f64,
}

/// `ρ(t_k) = V(e(t_k))` over the retained samples, on the trajectory's monitored block.
pub fn lyapunov_series(traj: &Trajectory) -> LyapunovSeries {
    let block = traj.positive_block.clone();
    let values: Vec<f64> = traj
        .states
        .iter()
        .map(|s| ray_distance(&s[block.clone()]))
        .collect();
    let max_upward_jump = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0_f64, f64::max);
    LyapunovSeries {
        times: traj.times.clone(),
        values,
        max_upward_jump,
    }
}

/// Largest `‖g(t_k, e_k)‖_sup` over the retained samples.
pub fn max_rate<F: VectorField + ?Sized>(traj: &Trajectory, model: &F) -> Result<f64> {
    let mut out = vec![0.0; model.dimension()];
    let mut best = 0.0_f64;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        model.eval_into(*t, x, &mut out)?;
        best = best.max(out.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    }
    Ok(best)
}

/// Classes required before the Dini bound can be asserted.
pub const DINI_CLASSES: [ModelClass; 3] = [
    ModelClass::MaxMinContraction,
    ModelClass::Homogeneous,
    ModelClass::StrongGrossSubstitute,
];

/// Default acceptance ceiling for the recorded slack constant.
pub const DINI_MAX_SLACK: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniReport {
    pub verdict: Verdict,
    pub steps_checked: usize,
    /// `max_k (Δρ/h − bound_k)`; negative when the bound holds everywhere with room.
    pub worst_margin: f64,
    pub worst_at: Option<f64>,
    /// Smallest `C ≥ 0` with `Δρ/h ≤ bound + C·h` at every step.
    pub slack_constant: f64,
    pub max_slack: f64,
    pub note: Option<String>,
}

impl DiniReport {
    fn not_applicable(note: String) -> Self {
        Self {
            verdict: Verdict::NotApplicable,
            steps_checked: 0,
            worst_margin: 0.0,
            worst_at: None,
            slack_constant: 0.0,
            max_slack: DINI_MAX_SLACK,
            note: Some(note),
        }
    }
}

/// `−min_{i ∈ active set} |g_i(t, e)|`.
pub fn dini_bound<F: VectorField + ?Sized>(model: &F, t: f64, e: &[f64]) -> Result<f64> {
    let g = model.eval(t, e)?;
    let proj = ray_project(e)?;
    let min_rate = proj
        .active_set
        .iter()
        .map(|&i| g[i].abs())
        .fold(f64::INFINITY, f64::min);
    Ok(-min_rate)
}

/// Checks the forward difference of `ρ` at every step of a full-resolution
/// trajectory against `−min_{i∈𝕃} |g_i| + C·h`.
pub fn check_dini_bound<F: VectorField + ?Sized>(
    traj: &Trajectory,
    model: &F,
    max_slack: f64,
) -> Result<DiniReport> {
    let missing: Vec<String> = DINI_CLASSES
        .iter()
        .filter(|c| !model.claims(**c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Ok(DiniReport::not_applicable(format!(
            "{} does not claim {}",
            model.label(),
            missing.join(", ")
        )));
    }
    if !traj.is_full_resolution() {
        return Err(Error::config(
            "the Dini check needs an undecimated trajectory (sample_every = 1)",
        ));
    }
    let mut worst_margin = f64::NEG_INFINITY;
    let mut worst_at = None;
    let mut slack_constant = 0.0_f64;
    let mut steps = 0;
    for k in 0..traj.len().saturating_sub(1) {
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        let h = t1 - t0;
        let e0 = &traj.states[k];
        let rho0 = ray_distance(e0);
        if rho0 == 0.0 {
            continue;
        }
        let fd = (ray_distance(&traj.states[k + 1]) - rho0) / h;
        let bound = dini_bound(model, t0, e0)?;
        let margin = fd - bound;
        if margin > worst_margin {
            worst_margin = margin;
            worst_at = Some(t0);
        }
        slack_constant = slack_constant.max(margin / h);
        steps += 1;
    }
    if steps == 0 {
        worst_margin = 0.0;
    }
    let verdict = if slack_constant <= max_slack {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(DiniReport {
        verdict,
        steps_checked: steps,
        worst_margin,
        worst_at,
        slack_constant,
        max_slack,
        note: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniPoint {
    pub forward_difference: f64,
    pub bound: f64,
    pub active_set: Vec<usize>,
}

/// The Dini comparison for a single RK4 step of size `h` from `(t, e)`.
pub fn dini_point<F: VectorField + ?Sized>(
    model: &F,
    t: f64,
    e: &[f64],
    h: f64,
) -> Result<DiniPoint> {
    let next = rk4_step(model, t, e, h)?;
    let proj = ray_project(e)?;
    Ok(DiniPoint {
        forward_difference: (ray_distance(&next) - proj.distance) / h,
        bound: dini_bound(model, t, e)?,
        active_set: proj.active_set,
    })
}

/// Earliest retained sample time with `d(e, ray) < epsilon`.
pub fn detect_consensus(traj: &Trajectory, epsilon: f64) -> Result<Option<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!(
            "consensus threshold must be positive, got {epsilon}"
        )));
    }
    let block = traj.positive_block.clone();
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .find(|(_, s)| ray_distance(&s[block.clone()]) < epsilon)
        .map(|(t, _)| *t))
}

/// Consensus threshold used by [`compare_scaled_vs_difference`].
pub const COMPARISON_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusSummary {
    pub model_id: String,
    pub consensus_time: Option<f64>,
    pub lambda_star: f64,
    pub final_distance: f64,
    pub initial_min: f64,
    pub initial_max: f64,
    /// `λ*` lies in the initial box `[min e0, max e0]`.
    pub limit_in_initial_box: bool,
    /// Name of the quantity the dynamics conserve, when one is asserted.
    pub preserved_invariant: Option<String>,
    /// Largest deviation of the conserved quantity from its initial value.
    pub invariant_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusComparison {
    pub epsilon: f64,
    pub scaled: ConsensusSummary,
    pub difference: ConsensusSummary,
}

fn summarize(traj: &Trajectory, invariant: Option<&str>) -> Result<ConsensusSummary> {
    let first = &traj.states[0];
    let proj = ray_project(traj.endpoint())?;
    let (initial_max, initial_min) = first
        .iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(h, l), &v| {
            (h.max(v), l.min(v))
        });
    let invariant_drift = invariant.map(|_| {
        let s0: f64 = first.iter().sum();
        traj.states
            .iter()
            .map(|s| (s.iter().sum::<f64>() - s0).abs())
            .fold(0.0, f64::max)
    });
    Ok(ConsensusSummary {
        model_id: traj.model_id.clone(),
        consensus_time: detect_consensus(traj, COMPARISON_EPSILON)?,
        lambda_star: proj.lambda_star,
        final_distance: proj.distance,
        initial_min,
        initial_max,
        limit_in_initial_box: (initial_min..=initial_max).contains(&proj.lambda_star),
        preserved_invariant: invariant.map(str::to_owned),
        invariant_drift,
    })
}

/// Side-by-side record of scaled (ratio) and difference (Laplacian) consensus.
/// The sum is reported as the difference-consensus invariant when its weights
/// are symmetric; nothing is asserted for the scaled run.
pub fn compare_scaled_vs_difference(
    ratio_traj: &Trajectory,
    laplacian_traj: &Trajectory,
    laplacian_symmetric: bool,
) -> Result<ConsensusComparison> {
    let a = ratio_traj.states[0].len();
    let b = laplacian_traj.states[0].len();
    if a != b {
        return Err(Error::structural(format!(
            "trajectories have different dimensions ({a} vs {b})"
        )));
    }
    Ok(ConsensusComparison {
        epsilon: COMPARISON_EPSILON,
        scaled: summarize(ratio_traj, None)?,
        difference: summarize(laplacian_traj, laplacian_symmetric.then_some("sum"))?,
    })
}
