//! Fixed-step integration of `ẋ = f(t, x)` with trajectory monitors.
//!
//! The scheme is the classical four-stage Runge–Kutta method with no step-size
//! control, so runs are bit-reproducible. Accuracy is audited by an optional
//! second pass at half the step. Monitors observe every step, independently of
//! output decimation.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{add_epsilon, Domain, Model, ModelClass, VectorField};

/// Components below this value end an open-cone run.
pub const CONE_GUARD: f64 = 1e-12;
/// Orthant positivity tolerance.
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Box slack is `BOX_SLACK_FACTOR · h · (local rate bound)`.
pub const BOX_SLACK_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t0: f64,
    pub t_end: f64,
    /// Keep every `sample_every`-th step (the final state is always kept).
    pub sample_every: usize,
    /// Re-run at `step / 2` and record the endpoint discrepancy.
    pub refine: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            t0: 0.0,
            t_end: 10.0,
            sample_every: 10,
            refine: false,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, t0: f64, t_end: f64) -> Self {
        Self {
            step,
            t0,
            t_end,
            ..Self::default()
        }
    }

    pub fn with_sample_every(mut self, every: usize) -> Self {
        self.sample_every = every;
        self
    }

    pub fn with_refine(mut self, refine: bool) -> Self {
        self.refine = refine;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::config(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !self.t0.is_finite() || !self.t_end.is_finite() || self.t_end <= self.t0 {
            return Err(Error::config(format!(
                "need t_end > t0, got t0 = {}, t_end = {}",
                self.t0, self.t_end
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::config("sample_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land exactly on `t_end`.
    pub fn step_count(&self) -> usize {
        let span = (self.t_end - self.t0) / self.step;
        (span - 1e-9).ceil().max(1.0) as usize
    }

    fn time_at(&self, k: usize, n: usize) -> f64 {
        if k == n {
            self.t_end
        } else {
            self.t0 + k as f64 * self.step
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityViolation {
    pub t: f64,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxViolation {
    pub t: f64,
    pub extreme: Extreme,
    pub previous: f64,
    pub current: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorFlags {
    pub positivity_ok: bool,
    pub positivity_violation: Option<PositivityViolation>,
    /// `None` when the model does not claim the max/min contraction property.
    pub box_ok: Option<bool>,
    pub box_violation: Option<BoxViolation>,
    pub domain_exit_at: Option<f64>,
}

/// Sampled solution with integrator metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub model_id: String,
    pub config: IntegratorConfig,
    pub monitor_flags: MonitorFlags,
    /// Sup-norm endpoint distance between the `h` and `h/2` runs.
    pub refinement_discrepancy: Option<f64>,
    pub domain: Domain,
    pub positive_block: Range<usize>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has at least one state")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn is_full_resolution(&self) -> bool {
        self.config.sample_every == 1
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Tracks the first positivity violation.
#[derive(Debug, Clone)]
pub struct PositivityMonitor {
    strict: bool,
    block: Range<usize>,
    first: Option<PositivityViolation>,
}

impl PositivityMonitor {
    pub fn new(domain: Domain, block: Range<usize>) -> Self {
        Self {
            strict: domain == Domain::OpenCone,
            block,
            first: None,
        }
    }

    pub fn observe(&mut self, t: f64, x: &[f64]) {
        if self.first.is_some() {
            return;
        }
        for i in self.block.clone() {
            let v = x[i];
            let bad = if self.strict {
                !(v > 0.0)
            } else {
                !(v >= -POSITIVITY_TOL)
            };
            if bad {
                self.first = Some(PositivityViolation {
                    t,
                    index: i,
                    value: v,
                });
                return;
            }
        }
    }

    pub fn violation(&self) -> Option<PositivityViolation> {
        self.first
    }
}

/// Checks that the running max never rises and the running min never falls,
/// beyond `BOX_SLACK_FACTOR · h · rate_bound` plus a few ulps of rounding.
#[derive(Debug, Clone)]
pub struct BoxMonitor {
    block: Range<usize>,
    prev: Option<(f64, f64)>,
    first: Option<BoxViolation>,
}

impl BoxMonitor {
    pub fn new(block: Range<usize>) -> Self {
        Self {
            block,
            prev: None,
            first: None,
        }
    }

    /// `rate_bound` bounds `|f_i|` over the step that produced `x`.
    pub fn observe(&mut self, t: f64, x: &[f64], h: f64, rate_bound: f64) {
        let (hi, lo) = extremes(&x[self.block.clone()]);
        if let Some((prev_hi, prev_lo)) = self.prev {
            if self.first.is_none() {
                let rounding = 4.0 * f64::EPSILON * prev_hi.abs().max(prev_lo.abs());
                let slack = BOX_SLACK_FACTOR * h * rate_bound + rounding;
                if hi > prev_hi + slack {
                    self.first = Some(BoxViolation {
                        t,
                        extreme: Extreme::Max,
                        previous: prev_hi,
                        current: hi,
                        slack,
                    });
                } else if lo < prev_lo - slack {
                    self.first = Some(BoxViolation {
                        t,
                        extreme: Extreme::Min,
                        previous: prev_lo,
                        current: lo,
                        slack,
                    });
                }
            }
        }
        self.prev = Some((hi, lo));
    }

    pub fn violation(&self) -> Option<BoxViolation> {
        self.first
    }
}

fn extremes(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| {
            (hi.max(v), lo.min(v))
        })
}

pub(crate) fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Scratch space for one RK4 step.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

enum StepOutcome {
    Ok,
    DomainExit,
}

impl Rk4 {
    fn new(m: usize) -> Self {
        Self {
            k1: vec![0.0; m],
            k2: vec![0.0; m],
            k3: vec![0.0; m],
            k4: vec![0.0; m],
            stage: vec![0.0; m],
        }
    }

    /// Advances `x` in place. Assumes `k1` already holds `f(t, x)`.
    fn step<F: VectorField + ?Sized>(
        &mut self,
        model: &F,
        t: f64,
        h: f64,
        x: &mut [f64],
    ) -> Result<StepOutcome> {
        let cone = model.domain() == Domain::OpenCone;
        let block = model.positive_block();
        let Rk4 {
            k1,
            k2,
            k3,
            k4,
            stage,
        } = self;

        let mut stage_eval = |coef: f64, from: &[f64], tt: f64, out: &mut [f64]| -> Result<bool> {
            for i in 0..x.len() {
                stage[i] = x[i] + coef * from[i];
            }
            if cone && block.clone().any(|i| !(stage[i] > 0.0)) {
                return Ok(false);
            }
            model.eval_into(tt, stage, out)?;
            Ok(true)
        };

        if !stage_eval(0.5 * h, k1, t + 0.5 * h, k2)? {
            return Ok(StepOutcome::DomainExit);
        }
        if !stage_eval(0.5 * h, k2, t + 0.5 * h, k3)? {
            return Ok(StepOutcome::DomainExit);
        }
        if !stage_eval(h, k3, t + h, k4)? {
            return Ok(StepOutcome::DomainExit);
        }
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(StepOutcome::Ok)
    }
}

/// One classical RK4 step from `(t, x)`.
pub fn rk4_step<F: VectorField + ?Sized>(model: &F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut rk = Rk4::new(x.len());
    model.eval_into(t, x, &mut rk.k1)?;
    let mut next = x.to_vec();
    match rk.step(model, t, h, &mut next)? {
        StepOutcome::Ok => Ok(next),
        StepOutcome::DomainExit => Err(Error::domain(format!(
            "RK4 stage left the domain of {} at t = {t}",
            model.label()
        ))),
    }
}

struct Pass {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    endpoint: Vec<f64>,
    flags: MonitorFlags,
}

fn run_pass<F: VectorField + ?Sized>(
    model: &F,
    x0: &[f64],
    cfg: &IntegratorConfig,
    keep_samples: bool,
) -> Result<Pass> {
    let m = x0.len();
    let n = cfg.step_count();
    let cone = model.domain() == Domain::OpenCone;
    let block = model.positive_block();
    let track_box = model.claims(ModelClass::MaxMinContraction);

    let mut positivity = PositivityMonitor::new(model.domain(), block.clone());
    let mut boxm = BoxMonitor::new(block.clone());
    let mut rk = Rk4::new(m);
    let mut x = x0.to_vec();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut domain_exit_at = None;

    positivity.observe(cfg.t0, &x);
    if track_box {
        boxm.observe(cfg.t0, &x, cfg.step, 0.0);
    }
    if keep_samples {
        times.push(cfg.t0);
        states.push(x.clone());
    }

    let mut t = cfg.t0;
    for k in 1..=n {
        let t_next = cfg.time_at(k, n);
        let h = t_next - t;
        model
            .eval_into(t, &x, &mut rk.k1)
            .map_err(|e| with_time(e, t))?;
        let rate_start = sup_norm(&rk.k1);
        let prev = x.clone();
        match rk.step(model, t, h, &mut x).map_err(|e| with_time(e, t))? {
            StepOutcome::DomainExit => {
                domain_exit_at = Some(t_next);
                x = prev;
                break;
            }
            StepOutcome::Ok => {}
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                message: format!("state component {i} became non-finite at t = {t_next}"),
                last_good_time: Some(t),
            });
        }
        if cone && block.clone().any(|i| x[i] < CONE_GUARD) {
            domain_exit_at = Some(t_next);
            positivity.observe(t_next, &x);
            x = prev;
            break;
        }
        positivity.observe(t_next, &x);
        if track_box {
            // Bound the rate over the step by the larger of its endpoint rates.
            let rate_end = model
                .eval(t_next, &x)
                .map(|r| sup_norm(&r))
                .unwrap_or(rate_start);
            boxm.observe(t_next, &x, h, rate_start.max(rate_end));
        }
        t = t_next;
        if keep_samples && (k % cfg.sample_every == 0 || k == n) {
            times.push(t);
            states.push(x.clone());
        }
    }
    if keep_samples && domain_exit_at.is_some() && times.last() != Some(&t) {
        times.push(t);
        states.push(x.clone());
    }

    let positivity_violation = positivity.violation();
    let box_violation = boxm.violation();
    Ok(Pass {
        times,
        states,
        endpoint: x,
        flags: MonitorFlags {
            positivity_ok: positivity_violation.is_none(),
            positivity_violation,
            box_ok: track_box.then_some(box_violation.is_none()),
            box_violation,
            domain_exit_at,
        },
    })
}

fn with_time(err: Error, t: f64) -> Error {
    match err {
        Error::Numeric { message, .. } => Error::Numeric {
            message,
            last_good_time: Some(t),
        },
        other => other,
    }
}

/// Integrates `model` from `x0` over `[cfg.t0, cfg.t_end]`.
pub fn integrate<F: VectorField + ?Sized>(
    model: &F,
    x0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let m = model.dimension();
    if x0.len() != m {
        return Err(Error::structural(format!(
            "initial state has length {}, model {} expects {m}",
            x0.len(),
            model.label()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("initial state is not finite"));
    }
    if model.domain() == Domain::OpenCone {
        if let Some(i) = model.positive_block().find(|&i| !(x0[i] > 0.0)) {
            return Err(Error::domain(format!(
                "{} needs a strictly positive start; component {i} = {}",
                model.label(),
                x0[i]
            )));
        }
    }

    let pass = run_pass(model, x0, cfg, true)?;
    let refinement_discrepancy = if cfg.refine {
        let half = IntegratorConfig {
            step: cfg.step / 2.0,
            refine: false,
            ..*cfg
        };
        let fine = run_pass(model, x0, &half, false)?;
        if pass.flags.domain_exit_at.is_none() && fine.flags.domain_exit_at.is_none() {
            Some(sup_distance(&pass.endpoint, &fine.endpoint))
        } else {
            None
        }
    } else {
        None
    };

    Ok(Trajectory {
        times: pass.times,
        states: pass.states,
        model_id: model.label(),
        config: *cfg,
        monitor_flags: pass.flags,
        refinement_discrepancy,
        domain: model.domain(),
        positive_block: model.positive_block(),
    })
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub ok: bool,
    pub first_violation: Option<PositivityViolation>,
}

/// Positivity verdict for a trajectory: the violation seen during integration
/// if any, otherwise a replay over the retained samples.
pub fn monitor_positivity(traj: &Trajectory) -> PositivityReport {
    // The integrator watched every step; retained samples are a subset.
    if let Some(v) = traj.monitor_flags.positivity_violation {
        return PositivityReport {
            ok: false,
            first_violation: Some(v),
        };
    }
    let mut mon = PositivityMonitor::new(traj.domain, traj.positive_block.clone());
    for (t, x) in traj.times.iter().zip(&traj.states) {
        mon.observe(*t, x);
    }
    PositivityReport {
        ok: mon.violation().is_none(),
        first_violation: mon.violation(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxReport {
    pub ok: bool,
    pub first_violation: Option<BoxViolation>,
    /// Initial box `[β, α]` of the monitored block.
    pub alpha: f64,
    pub beta: f64,
}

/// Box confinement over the retained samples: running max nonincreasing and
/// running min nondecreasing, with slack from the rates at the sample points.
pub fn monitor_box<F: VectorField + ?Sized>(traj: &Trajectory, model: &F) -> Result<BoxReport> {
    let block = traj.positive_block.clone();
    let (alpha, beta) = extremes(&traj.states[0][block.clone()]);
    let mut mon = BoxMonitor::new(block);
    let mut prev_rate = 0.0;
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let rate = sup_norm(&model.eval(*t, x)?);
        let bound = if k == 0 { 0.0 } else { rate.max(prev_rate) };
        mon.observe(*t, x, traj.config.step, bound);
        prev_rate = rate;
    }
    Ok(BoxReport {
        ok: mon.violation().is_none(),
        first_violation: mon.violation(),
        alpha,
        beta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    /// Sup-norm endpoint distance to the unshifted run.
    pub discrepancy: f64,
    /// Smallest monitored component after the first step.
    pub min_after_first_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonStudy {
    pub rows: Vec<EpsilonRow>,
    pub strictly_decreasing: bool,
    /// Each discrepancy is at most 110% of the previous one.
    pub decreasing_within_10pct: bool,
    /// Least-squares slope of `log(discrepancy)` against `log(ε)` over rows with ε > 0.
    pub loglog_slope: Option<f64>,
}

/// Integrates `model + ε·𝟏` for each `ε` (in the given, decreasing order) and
/// compares endpoints with the unshifted run.
pub fn epsilon_limit_study(
    model: &Model,
    x0: &[f64],
    eps_list: &[f64],
    cfg: &IntegratorConfig,
) -> Result<EpsilonStudy> {
    if eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::domain("epsilon values must be nonnegative"));
    }
    let base = integrate(model, x0, cfg)?;
    let first_step = IntegratorConfig {
        t_end: cfg.t0 + cfg.step,
        sample_every: 1,
        refine: false,
        ..*cfg
    };
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (traj, first) = if eps == 0.0 {
            (base.clone(), integrate(model, x0, &first_step)?)
        } else {
            let shifted = add_epsilon(model.clone(), eps)?;
            (
                integrate(&shifted, x0, cfg)?,
                integrate(&shifted, x0, &first_step)?,
            )
        };
        let block = model.positive_block();
        let min_after_first_step = first.endpoint()[block]
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        rows.push(EpsilonRow {
            epsilon: eps,
            discrepancy: sup_distance(traj.endpoint(), base.endpoint()),
            min_after_first_step,
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].discrepancy < w[0].discrepancy);
    let decreasing_within_10pct = rows
        .windows(2)
        .all(|w| w[1].discrepancy <= 1.1 * w[0].discrepancy);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.epsilon > 0.0 && r.discrepancy > 0.0)
        .map(|r| (r.epsilon.ln(), r.discrepancy.ln()))
        .collect();
    let loglog_slope = least_squares_slope(&pts);
    Ok(EpsilonStudy {
        rows,
        strictly_decreasing,
        decreasing_within_10pct,
        loglog_slope,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{square_from_rows, LaplacianModel, LinearModel, RatioConsensusModel};

    fn demo_linear() -> Model {
        LinearModel::metzler(
            square_from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap()
        .into()
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            IntegratorConfig::new(0.0, 0.0, 1.0).validate(),
            Err(Error::Config(_))
        ));
        assert!(IntegratorConfig::new(1e-3, 1.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::new(1e-3, 0.0, 1.0)
            .with_sample_every(0)
            .validate()
            .is_err());
        let m = demo_linear();
        assert!(matches!(
            integrate(&m, &[0.0, 0.0], &IntegratorConfig::new(-1.0, 0.0, 1.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn time_grid_lands_on_t_end() {
        let cfg = IntegratorConfig::new(0.3, 0.0, 1.0).with_sample_every(1);
        assert_eq!(cfg.step_count(), 4);
        let traj = integrate(&demo_linear(), &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.final_time(), 1.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn decimation_keeps_final_state() {
        let cfg = IntegratorConfig::new(0.01, 0.0, 1.05).with_sample_every(10);
        let traj = integrate(&demo_linear(), &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(traj.final_time(), 1.05);
        assert_eq!(traj.times.len(), 12);
    }

    #[test]
    fn linear_converges_to_equilibrium() {
        let cfg = IntegratorConfig::new(1e-3, 0.0, 25.0);
        let traj = integrate(&demo_linear(), &[0.0, 0.0], &cfg).unwrap();
        for v in traj.endpoint() {
            assert!((v - 1.0).abs() < 1e-6);
        }
        assert!(traj.monitor_flags.positivity_ok);
        assert_eq!(traj.monitor_flags.box_ok, None);
    }

    #[test]
    fn equilibrium_start_is_constant() {
        let ratio: Model = RatioConsensusModel::uniform(3).into();
        let cfg = IntegratorConfig::new(1e-2, 0.0, 5.0).with_sample_every(1);
        let traj = integrate(&ratio, &[2.5; 3], &cfg).unwrap();
        assert!(traj.states.iter().all(|s| s == &vec![2.5; 3]));

        let traj = integrate(&demo_linear(), &[1.0, 1.0], &cfg).unwrap();
        assert!(traj.states.iter().all(|s| s == &vec![1.0, 1.0]));
    }

    #[test]
    fn non_metzler_goes_negative() {
        let m: Model = LinearModel::new(
            square_from_rows(&[vec![-2.0, -3.0], vec![1.0, -2.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap()
        .into();
        assert_eq!(m.eval(0.0, &[0.0, 1.0]).unwrap()[0], -3.0);
        let traj = integrate(&m, &[0.0, 1.0], &IntegratorConfig::new(1e-3, 0.0, 1.0)).unwrap();
        let flags = &traj.monitor_flags;
        assert!(!flags.positivity_ok);
        let v = flags.positivity_violation.unwrap();
        assert_eq!(v.index, 0);
        assert!(v.t <= 1e-3 + 1e-15);
        // The standalone monitor sees it in the decimated samples too.
        assert!(!monitor_positivity(&traj).ok);
    }

    #[test]
    fn origin_fixed_point() {
        let m: Model = LinearModel::metzler(
            square_from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap()
        .into();
        let traj = integrate(&m, &[0.0, 0.0], &IntegratorConfig::new(1e-2, 0.0, 2.0)).unwrap();
        assert!(traj.states.iter().all(|s| s.iter().all(|&v| v == 0.0)));
        assert!(traj.monitor_flags.positivity_ok);
    }

    #[test]
    fn cone_start_required() {
        let ratio: Model = RatioConsensusModel::uniform(2).into();
        assert!(matches!(
            integrate(&ratio, &[0.0, 1.0], &IntegratorConfig::default()),
            Err(Error::Domain(_))
        ));
    }

    /// Field that drives the first component to zero in finite time.
    struct Drain;
    impl VectorField for Drain {
        fn dimension(&self) -> usize {
            2
        }
        fn domain(&self) -> Domain {
            Domain::OpenCone
        }
        fn claimed_classes(&self) -> crate::models::ClassSet {
            Default::default()
        }
        fn label(&self) -> String {
            "drain".into()
        }
        fn eval_unchecked(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
            out[0] = -1.0;
            out[1] = 0.0;
        }
    }

    #[test]
    fn domain_exit_truncates() {
        let cfg = IntegratorConfig::new(0.01, 0.0, 2.0).with_sample_every(1);
        let traj = integrate(&Drain, &[0.5, 1.0], &cfg).unwrap();
        let exit = traj.monitor_flags.domain_exit_at.expect("exits the cone");
        assert!((exit - 0.5).abs() < 0.011);
        assert!(traj.final_time() < exit);
        assert!(traj.endpoint()[0] > 0.0);
    }

    /// Field that blows up: ẋ = x².
    struct Blowup;
    impl VectorField for Blowup {
        fn dimension(&self) -> usize {
            1
        }
        fn domain(&self) -> Domain {
            Domain::Orthant
        }
        fn claimed_classes(&self) -> crate::models::ClassSet {
            Default::default()
        }
        fn label(&self) -> String {
            "blowup".into()
        }
        fn eval_unchecked(&self, _t: f64, x: &[f64], out: &mut [f64]) {
            out[0] = x[0] * x[0];
        }
    }

    #[test]
    fn non_finite_reports_last_good_time() {
        let err = integrate(&Blowup, &[1.0], &IntegratorConfig::new(0.01, 0.0, 5.0)).unwrap_err();
        match err {
            Error::Numeric { last_good_time, .. } => {
                let t = last_good_time.expect("time recorded");
                assert!(t > 0.9 && t < 1.1, "blowup near t = 1, got {t}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn refinement_pass_records_discrepancy() {
        let cfg = IntegratorConfig::new(0.05, 0.0, 1.0).with_refine(true);
        let traj = integrate(&demo_linear(), &[0.0, 0.0], &cfg).unwrap();
        let d = traj.refinement_discrepancy.unwrap();
        assert!(d > 0.0 && d < 1e-6);
    }

    #[test]
    fn ratio_box_holds() {
        let ratio: Model = RatioConsensusModel::uniform(2).into();
        let traj = integrate(&ratio, &[3.0, 1.0], &IntegratorConfig::new(1e-3, 0.0, 20.0)).unwrap();
        assert_eq!(traj.monitor_flags.box_ok, Some(true));
        let rep = monitor_box(&traj, &ratio).unwrap();
        assert!(rep.ok);
        assert_eq!((rep.alpha, rep.beta), (3.0, 1.0));
        for s in &traj.states {
            assert!(s.iter().all(|&v| (1.0..=3.0).contains(&v)));
        }
    }

    #[test]
    fn laplacian_box_holds() {
        let lap: Model = LaplacianModel::uniform(2).into();
        let traj = integrate(&lap, &[1.0, 3.0], &IntegratorConfig::new(1e-3, 0.0, 5.0)).unwrap();
        assert_eq!(traj.monitor_flags.box_ok, Some(true));
        assert!(monitor_box(&traj, &lap).unwrap().ok);
    }

    #[test]
    fn box_monitor_flags_growth() {
        let mut mon = BoxMonitor::new(0..2);
        mon.observe(0.0, &[3.0, 1.0], 1e-3, 0.0);
        mon.observe(1e-3, &[3.1, 1.0], 1e-3, 1.0);
        let v = mon.violation().unwrap();
        assert_eq!(v.extreme, Extreme::Max);
    }

    #[test]
    fn epsilon_zero_row_is_exact() {
        let study = epsilon_limit_study(
            &demo_linear(),
            &[0.0, 0.0],
            &[1e-2, 0.0],
            &IntegratorConfig::new(1e-2, 0.0, 5.0),
        )
        .unwrap();
        assert_eq!(study.rows[1].discrepancy, 0.0);
        assert!(study.rows[0].discrepancy > 0.0);
    }

    #[test]
    fn epsilon_from_boundary_enters_interior() {
        let m: Model = LinearModel::metzler(
            square_from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap()
        .into();
        let study = epsilon_limit_study(
            &m,
            &[0.0, 0.0],
            &[1e-2, 1e-3, 1e-4],
            &IntegratorConfig::new(1e-3, 0.0, 2.0),
        )
        .unwrap();
        assert!(study.rows.iter().all(|r| r.min_after_first_step > 0.0));
    }
}
