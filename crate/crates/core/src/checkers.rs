//! Seeded samplers that certify or refute membership in the assumption classes.
//!
//! Every sample draws from its own ChaCha stream `(seed, sample index)`, so a
//! run with more samples extends a run with fewer, and samples can be
//! evaluated in parallel without changing the report.
//!
//! Cone samples are log-uniform on `[1e-3, 1e3]` with the mantissa truncated to
//! 44 bits. Scaling such a point by 0.5, 2 or 10 is then exact in binary
//! floating point, so homogeneity can be checked for exact equality.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{Domain, ModelClass, VectorField};
use crate::ray::ray_distance;

/// Scale factors used by the homogeneity check.
pub const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 10.0];
pub const LOG_SAMPLE_MIN: f64 = 1e-3;
pub const LOG_SAMPLE_MAX: f64 = 1e3;
const MANTISSA_DROP_BITS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "gs")]
    GrossSubstitute,
    #[serde(rename = "strong-gs")]
    StrongGrossSubstitute,
    #[serde(rename = "class-n")]
    ClassN,
    #[serde(rename = "homogeneity")]
    Homogeneity,
    #[serde(rename = "a5")]
    MaxMinContraction,
    #[serde(rename = "lemma1")]
    PairSeparation,
    #[serde(rename = "equilibria-scan")]
    EquilibriumScan,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::GrossSubstitute,
        Property::StrongGrossSubstitute,
        Property::ClassN,
        Property::Homogeneity,
        Property::MaxMinContraction,
        Property::PairSeparation,
        Property::EquilibriumScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::GrossSubstitute => "gs",
            Property::StrongGrossSubstitute => "strong-gs",
            Property::ClassN => "class-n",
            Property::Homogeneity => "homogeneity",
            Property::MaxMinContraction => "a5",
            Property::PairSeparation => "lemma1",
            Property::EquilibriumScan => "equilibria-scan",
        }
    }

    /// The model class the property certifies, where there is one.
    pub fn class(self) -> Option<ModelClass> {
        match self {
            Property::GrossSubstitute => Some(ModelClass::GrossSubstitute),
            Property::StrongGrossSubstitute => Some(ModelClass::StrongGrossSubstitute),
            Property::ClassN => Some(ModelClass::ClassN),
            Property::Homogeneity => Some(ModelClass::Homogeneous),
            Property::MaxMinContraction => Some(ModelClass::MaxMinContraction),
            Property::PairSeparation | Property::EquilibriumScan => None,
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Property::ALL.iter().map(|p| p.name()).collect();
                Error::config(format!(
                    "unknown property '{s}' (expected one of: {})",
                    known.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub samples: u64,
    pub seed: u64,
    /// Slack for non-strict inequalities and the homogeneity residual.
    pub tol: f64,
    /// Witnesses kept in the report (all violations are counted).
    pub max_violations: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            tol: 1e-12,
            max_violations: 20,
        }
    }
}

impl CheckConfig {
    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// A replayable counterexample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sample: u64,
    pub t: f64,
    /// Pivot component for the substitution and boundary checks; the scale
    /// factor index for homogeneity.
    pub pivot: Option<usize>,
    /// Points involved, e.g. `[e′, e″]`, `[e]`, `[e, λe]` or `[u, v]`.
    pub inputs: Vec<Vec<f64>>,
    /// Field values at those points (the compared components, or full vectors).
    pub observed: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub property: Property,
    pub verdict: Verdict,
    pub samples: u64,
    pub evaluated: u64,
    pub skipped: u64,
    pub seed: u64,
    pub tolerance: f64,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
    /// Property-specific statistics (e.g. `max_residual`, `ties`).
    pub stats: BTreeMap<String, f64>,
    pub note: Option<String>,
}

impl CheckReport {
    fn not_applicable(property: Property, cfg: &CheckConfig, note: impl Into<String>) -> Self {
        Self {
            property,
            verdict: Verdict::NotApplicable,
            samples: cfg.samples,
            evaluated: 0,
            skipped: cfg.samples,
            seed: cfg.seed,
            tolerance: cfg.tol,
            violation_count: 0,
            violations: Vec::new(),
            stats: BTreeMap::new(),
            note: Some(note.into()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Outcome of one sample.
enum Outcome {
    Skipped,
    Ok {
        stat: f64,
        tie: bool,
    },
    Violated {
        violation: Violation,
        stat: f64,
        tie: bool,
    },
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Log-uniform on `[LOG_SAMPLE_MIN, LOG_SAMPLE_MAX]` with a short mantissa.
pub fn sample_log_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let lo = LOG_SAMPLE_MIN.log10();
    let hi = LOG_SAMPLE_MAX.log10();
    truncate_mantissa(10f64.powf(rng.gen_range(lo..hi)))
}

/// Clears the low mantissa bits so that products with small integers and
/// powers of two stay exact.
pub fn truncate_mantissa(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & !((1u64 << MANTISSA_DROP_BITS) - 1))
}

pub fn sample_cone_point<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    (0..m).map(|_| sample_log_uniform(rng)).collect()
}

/// Time range covering every regime of the model plus one unit either side.
fn time_range<F: VectorField + ?Sized>(model: &F) -> (f64, f64) {
    let bps = model.breakpoints();
    let lo = bps.iter().copied().fold(0.0_f64, f64::min);
    let hi = bps.iter().copied().fold(0.0_f64, f64::max) + 1.0;
    (lo, hi)
}

fn sample_time<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> f64 {
    rng.gen_range(range.0..range.1)
}

/// Runs `sample` for every index in parallel and assembles the report.
fn run_samples<F>(property: Property, cfg: &CheckConfig, sample: F) -> Result<CheckReport>
where
    F: Fn(u64, &mut ChaCha8Rng) -> Result<Outcome> + Sync,
{
    let outcomes: Vec<Outcome> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i);
            sample(i, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut report = CheckReport {
        property,
        verdict: Verdict::Pass,
        samples: cfg.samples,
        evaluated: 0,
        skipped: 0,
        seed: cfg.seed,
        tolerance: cfg.tol,
        violation_count: 0,
        violations: Vec::new(),
        stats: BTreeMap::new(),
        note: None,
    };
    let mut worst = 0.0_f64;
    let mut ties = 0u64;
    for o in outcomes {
        match o {
            Outcome::Skipped => report.skipped += 1,
            Outcome::Ok { stat, tie } => {
                report.evaluated += 1;
                worst = worst.max(stat);
                ties += tie as u64;
            }
            Outcome::Violated {
                violation,
                stat,
                tie,
            } => {
                report.evaluated += 1;
                worst = worst.max(stat);
                ties += tie as u64;
                report.violation_count += 1;
                if report.violations.len() < cfg.max_violations {
                    report.violations.push(violation);
                }
            }
        }
    }
    report.verdict = if report.violation_count > 0 {
        Verdict::Fail
    } else if report.evaluated == 0 {
        Verdict::NotApplicable
    } else {
        Verdict::Pass
    };
    match property {
        Property::Homogeneity => {
            report.stats.insert("max_residual".into(), worst);
        }
        Property::MaxMinContraction => {
            report.stats.insert("ties".into(), ties as f64);
        }
        _ => {}
    }
    Ok(report)
}

fn scaled_tol(tol: f64, a: f64, b: f64) -> f64 {
    tol * 1f64.max(a.abs()).max(b.abs())
}

/// Non-strict substitution test at one pair; `true` when it is violated.
pub fn gs_pair_violated<F: VectorField + ?Sized>(
    model: &F,
    t: f64,
    pivot: usize,
    lower: &[f64],
    upper: &[f64],
    tol: f64,
) -> Result<(bool, f64, f64)> {
    let a = model.eval(t, lower)?[pivot];
    let b = model.eval(t, upper)?[pivot];
    Ok((a > b + scaled_tol(tol, a, b), a, b))
}

/// Strict substitution test at one pair; equality counts as a violation.
pub fn strong_gs_pair_violated<F: VectorField + ?Sized>(
    model: &F,
    t: f64,
    pivot: usize,
    lower: &[f64],
    upper: &[f64],
) -> Result<(bool, f64, f64)> {
    let a = model.eval(t, lower)?[pivot];
    let b = model.eval(t, upper)?[pivot];
    Ok((!(a < b), a, b))
}

/// Gross substitution: raising the other components never lowers `g_i`.
pub fn check_gross_substitute<F: VectorField + ?Sized>(
    model: &F,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    let m = model.dimension();
    let orthant = model.domain() == Domain::Orthant;
    let trange = time_range(model);
    run_samples(Property::GrossSubstitute, cfg, |i, rng| {
        let t = sample_time(rng, trange);
        let upper = sample_cone_point(rng, m);
        let pivot = rng.gen_range(0..m);
        let lower: Vec<f64> = upper
            .iter()
            .enumerate()
            .map(|(j, &u)| {
                if j == pivot {
                    return u;
                }
                let r: f64 = rng.gen();
                if r < 0.1 {
                    u
                } else if orthant && r < 0.2 {
                    0.0
                } else {
                    truncate_mantissa(u * 10f64.powf(-3.0 * rng.gen::<f64>()))
                }
            })
            .collect();
        let (bad, a, b) = gs_pair_violated(model, t, pivot, &lower, &upper, cfg.tol)?;
        Ok(if bad {
            Outcome::Violated {
                violation: Violation {
                    sample: i,
                    t,
                    pivot: Some(pivot),
                    inputs: vec![lower, upper],
                    observed: vec![vec![a], vec![b]],
                },
                stat: 0.0,
                tie: false,
            }
        } else {
            Outcome::Ok {
                stat: 0.0,
                tie: false,
            }
        })
    })
}

/// Strong gross substitution on the open cone: all other components strictly
/// larger must give a strictly larger `g_i`.
pub fn check_strong_gross_substitute<F: VectorField + ?Sized>(
    model: &F,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    let m = model.dimension();
    if m < 2 {
        return Ok(CheckReport::not_applicable(
            Property::StrongGrossSubstitute,
            cfg,
            "needs at least two components",
        ));
    }
    let trange = time_range(model);
    run_samples(Property::StrongGrossSubstitute, cfg, |i, rng| {
        let t = sample_time(rng, trange);
        let upper = sample_cone_point(rng, m);
        let pivot = rng.gen_range(0..m);
        let lower: Vec<f64> = upper
            .iter()
            .enumerate()
            .map(|(j, &u)| {
                if j == pivot {
                    u
                } else {
                    // Factor in [0.001, 0.999]: strictly below after rounding.
                    truncate_mantissa(u * rng.gen_range(0.001..0.999))
                }
            })
            .collect();
        let (bad, a, b) = strong_gs_pair_violated(model, t, pivot, &lower, &upper)?;
        Ok(if bad {
            Outcome::Violated {
                violation: Violation {
                    sample: i,
                    t,
                    pivot: Some(pivot),
                    inputs: vec![lower, upper],
                    observed: vec![vec![a], vec![b]],
                },
                stat: 0.0,
                tie: false,
            }
        } else {
            Outcome::Ok {
                stat: 0.0,
                tie: false,
            }
        })
    })
}

/// Boundary condition: `g_i ≥ 0` whenever `e_i = 0` and the rest are nonnegative.
pub fn check_class_n<F: VectorField + ?Sized>(model: &F, cfg: &CheckConfig) -> Result<CheckReport> {
    if model.domain() == Domain::OpenCone {
        return Ok(CheckReport::not_applicable(
            Property::ClassN,
            cfg,
            format!("{} is defined on the open cone only", model.label()),
        ));
    }
    let m = model.dimension();
    let trange = time_range(model);
    run_samples(Property::ClassN, cfg, |i, rng| {
        let t = sample_time(rng, trange);
        let pivot = rng.gen_range(0..m);
        let e: Vec<f64> = (0..m)
            .map(|j| {
                if j == pivot || rng.gen::<f64>() < 0.2 {
                    0.0
                } else {
                    sample_log_uniform(rng)
                }
            })
            .collect();
        let g = model.eval(t, &e)?;
        Ok(if g[pivot] < -cfg.tol {
            Outcome::Violated {
                violation: Violation {
                    sample: i,
                    t,
                    pivot: Some(pivot),
                    inputs: vec![e],
                    observed: vec![vec![g[pivot]]],
                },
                stat: 0.0,
                tie: false,
            }
        } else {
            Outcome::Ok {
                stat: 0.0,
                tie: false,
            }
        })
    })
}

/// `‖g(t, λe) − g(t, e)‖_sup`.
pub fn homogeneity_residual<F: VectorField + ?Sized>(
    model: &F,
    t: f64,
    e: &[f64],
    lambda: f64,
) -> Result<f64> {
    let scaled: Vec<f64> = e.iter().map(|v| lambda * v).collect();
    let a = model.eval(t, e)?;
    let b = model.eval(t, &scaled)?;
    Ok(a.iter()
        .zip(&b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs())))
}

/// Degree-zero homogeneity on the open cone for `λ ∈ {0.5, 2, 10}`.
pub fn check_homogeneity<F: VectorField + ?Sized>(
    model: &F,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    let m = model.dimension();
    let trange = time_range(model);
    run_samples(Property::Homogeneity, cfg, |i, rng| {
        let t = sample_time(rng, trange);
        let e = sample_cone_point(rng, m);
        let mut worst = 0.0_f64;
        let mut witness = None;
        for (k, &lambda) in HOMOGENEITY_SCALES.iter().enumerate() {
            let r = homogeneity_residual(model, t, &e, lambda)?;
            if r > worst {
                worst = r;
                if r > cfg.tol {
                    witness = Some((k, lambda));
                }
            }
        }
        Ok(match witness {
            Some((k, lambda)) => {
                let scaled: Vec<f64> = e.iter().map(|v| lambda * v).collect();
                let observed = vec![model.eval(t, &e)?, model.eval(t, &scaled)?];
                Outcome::Violated {
                    violation: Violation {
                        sample: i,
                        t,
                        pivot: Some(k),
                        inputs: vec![e, scaled],
                        observed,
                    },
                    stat: worst,
                    tie: false,
                }
            }
            None => Outcome::Ok {
                stat: worst,
                tie: false,
            },
        })
    })
}

/// Result of the max/min sign test at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A5Point {
    pub on_ray: bool,
    pub holds: bool,
    /// More than one index attains the max or the min.
    pub tie: bool,
}

/// Some index attaining the max has `g_k < 0` and some index attaining the min
/// has `g_l > 0`. Points on the ray are reported as such and not tested.
pub fn a5_at<F: VectorField + ?Sized>(model: &F, t: f64, e: &[f64]) -> Result<A5Point> {
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == lo {
        return Ok(A5Point {
            on_ray: true,
            holds: true,
            tie: false,
        });
    }
    let g = model.eval(t, e)?;
    let at_max: Vec<usize> = (0..e.len()).filter(|&i| e[i] == hi).collect();
    let at_min: Vec<usize> = (0..e.len()).filter(|&i| e[i] == lo).collect();
    let falls = at_max.iter().any(|&k| g[k] < 0.0);
    let rises = at_min.iter().any(|&l| g[l] > 0.0);
    Ok(A5Point {
        on_ray: false,
        holds: falls && rises,
        tie: at_max.len() > 1 || at_min.len() > 1,
    })
}

/// Max/min contraction off the ray, plus `g = 0` on the ray.
///
/// A quarter of the samples are two-level points (a random subset at one value,
/// the rest at another), which exercise ties and block-structured failures.
pub fn check_a5<F: VectorField + ?Sized>(model: &F, cfg: &CheckConfig) -> Result<CheckReport> {
    let m = model.dimension();
    let trange = time_range(model);
    run_samples(Property::MaxMinContraction, cfg, |i, rng| {
        let t = sample_time(rng, trange);
        let e: Vec<f64> = if m >= 2 && rng.gen::<f64>() < 0.25 {
            let a = sample_log_uniform(rng);
            let b = sample_log_uniform(rng);
            let mut idx: Vec<usize> = (0..m).collect();
            idx.shuffle(rng);
            let cut = rng.gen_range(1..m);
            let mut e = vec![b; m];
            for &j in &idx[..cut] {
                e[j] = a;
            }
            e
        } else {
            sample_cone_point(rng, m)
        };
        // Ray clause: g vanishes at the ray point through e_0.
        let ray_point = vec![e[0]; m];
        let g_ray = model.eval(t, &ray_point)?;
        if g_ray.iter().any(|v| v.abs() > cfg.tol) {
            return Ok(Outcome::Violated {
                violation: Violation {
                    sample: i,
                    t,
                    pivot: None,
                    inputs: vec![ray_point],
                    observed: vec![g_ray],
                },
                stat: 0.0,
                tie: false,
            });
        }
        let p = a5_at(model, t, &e)?;
        if p.on_ray {
            return Ok(Outcome::Skipped);
        }
        Ok(if p.holds {
            Outcome::Ok {
                stat: 0.0,
                tie: p.tie,
            }
        } else {
            let g = model.eval(t, &e)?;
            Outcome::Violated {
                violation: Violation {
                    sample: i,
                    t,
                    pivot: None,
                    inputs: vec![e],
                    observed: vec![g],
                },
                stat: 0.0,
                tie: p.tie,
            }
        })
    })
}

/// Whether `u` is a positive multiple of `v` (to rounding).
pub fn proportional(u: &[f64], v: &[f64]) -> bool {
    let ratios = u.iter().zip(v).map(|(a, b)| a / b);
    let (hi, lo) = ratios.fold((f64::NEG_INFINITY, f64::INFINITY), |(h, l), r| {
        (h.max(r), l.min(r))
    });
    hi - lo <= 4.0 * f64::EPSILON * hi
}

/// For non-proportional `u, v > 0`: some `k` has `g_k(u) < g_k(v)` and some `l` has
/// `g_l(u) > g_l(v)`. `None` when the pair is proportional.
pub fn pair_separation_at<F: VectorField + ?Sized>(
    model: &F,
    t: f64,
    u: &[f64],
    v: &[f64],
) -> Result<Option<bool>> {
    if proportional(u, v) {
        return Ok(None);
    }
    let gu = model.eval(t, u)?;
    let gv = model.eval(t, v)?;
    let below = gu.iter().zip(&gv).any(|(a, b)| a < b);
    let above = gu.iter().zip(&gv).any(|(a, b)| a > b);
    Ok(Some(below && above))
}

/// Pair separation for random positive pairs. Every twentieth sample is a
/// proportional pair, which must be skipped.
pub fn check_lemma1<F: VectorField + ?Sized>(model: &F, cfg: &CheckConfig) -> Result<CheckReport> {
    let m = model.dimension();
    let trange = time_range(model);
    run_samples(Property::PairSeparation, cfg, |i, rng| {
        let t = sample_time(rng, trange);
        let v = sample_cone_point(rng, m);
        let u = if i % 20 == 19 {
            v.iter().map(|x| 2.0 * x).collect()
        } else {
            sample_cone_point(rng, m)
        };
        Ok(match pair_separation_at(model, t, &u, &v)? {
            None => Outcome::Skipped,
            Some(true) => Outcome::Ok {
                stat: 0.0,
                tie: false,
            },
            Some(false) => {
                let observed = vec![model.eval(t, &u)?, model.eval(t, &v)?];
                Outcome::Violated {
                    violation: Violation {
                        sample: i,
                        t,
                        pivot: None,
                        inputs: vec![u, v],
                        observed,
                    },
                    stat: 0.0,
                    tie: false,
                }
            }
        })
    })
}

/// Re-evaluates a reported witness in isolation; `true` if it still violates.
pub fn replay_violation<F: VectorField + ?Sized>(
    model: &F,
    property: Property,
    v: &Violation,
    tol: f64,
) -> Result<bool> {
    let input = |k: usize| -> Result<&Vec<f64>> {
        v.inputs
            .get(k)
            .ok_or_else(|| Error::structural("violation is missing inputs"))
    };
    let pivot = || {
        v.pivot
            .ok_or_else(|| Error::structural("violation has no pivot"))
    };
    match property {
        Property::GrossSubstitute => {
            Ok(gs_pair_violated(model, v.t, pivot()?, input(0)?, input(1)?, tol)?.0)
        }
        Property::StrongGrossSubstitute => {
            Ok(strong_gs_pair_violated(model, v.t, pivot()?, input(0)?, input(1)?)?.0)
        }
        Property::ClassN => {
            let e = input(0)?;
            let i = pivot()?;
            if e[i] != 0.0 {
                return Err(Error::structural(
                    "class-N witness is not on the boundary face",
                ));
            }
            Ok(model.eval(v.t, e)?[i] < -tol)
        }
        Property::Homogeneity => {
            let lambda = HOMOGENEITY_SCALES[pivot()?];
            Ok(homogeneity_residual(model, v.t, input(0)?, lambda)? > tol)
        }
        Property::MaxMinContraction => {
            let e = input(0)?;
            let p = a5_at(model, v.t, e)?;
            if p.on_ray {
                Ok(model.eval(v.t, e)?.iter().any(|g| g.abs() > tol))
            } else {
                Ok(!p.holds)
            }
        }
        Property::PairSeparation => {
            Ok(pair_separation_at(model, v.t, input(0)?, input(1)?)? == Some(false))
        }
        Property::EquilibriumScan => {
            let e = input(0)?;
            let spacing = *v
                .observed
                .get(1)
                .and_then(|o| o.first())
                .ok_or_else(|| Error::structural("scan witness is missing its spacing"))?;
            Ok(ray_distance(e) > spacing * (1.0 + 1e-9))
        }
    }
}

/// Grid settings for [`scan_equilibria`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Grid intervals per axis on the simplex `Σe = m`.
    pub resolution: usize,
    /// Points need every component strictly above `delta`.
    pub delta: f64,
    /// Evaluation time.
    pub t: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            resolution: 200,
            delta: 0.05,
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPoint {
    pub point: Vec<f64>,
    pub residual: f64,
    /// Sup-norm distance to the linearized zero of `g`.
    pub zero_offset: f64,
    pub ray_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub verdict: Verdict,
    pub dimension: usize,
    pub resolution: usize,
    pub spacing: f64,
    pub points_scanned: usize,
    pub flagged_count: usize,
    pub max_flagged_ray_distance: f64,
    /// Flagged points, farthest from the ray first (capped).
    pub flagged: Vec<FlaggedPoint>,
}

const SCAN_KEEP: usize = 50;
/// A linearized zero within this many grid steps flags the point. The grid's
/// sup-norm covering radius is 2/3 of a step.
const SCAN_REACH: f64 = 0.75;
/// Largest linear-fit residual, relative to the per-step change of `g`, for
/// the local zero to count as consistent.
const SCAN_LINEAR_FIT: f64 = 0.1;

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Brute-force search for zeros of `g` on the simplex `{Σe = m, e_i > δ}`, `m ≤ 3`.
///
/// At each grid point the Jacobian along the simplex directions is estimated
/// from the neighbours. The point is flagged when `g` vanishes there, or when
/// `‖g‖_sup` is below twice the per-step change and a consistent least-squares
/// zero of the linearization lies within 3/4 of a spacing. The scan passes when
/// every flagged point lies within one spacing of the ray.
pub fn scan_equilibria<F: VectorField + ?Sized>(model: &F, cfg: &ScanConfig) -> Result<ScanReport> {
    let m = model.dimension();
    if m > 3 || m == 0 {
        return Err(Error::UnsupportedDimension {
            dimension: m,
            reason: "the equilibrium scan enumerates a grid and supports m ≤ 3".into(),
        });
    }
    if cfg.resolution < 2 {
        return Err(Error::config("scan resolution must be at least 2"));
    }
    let n = cfg.resolution;
    let spacing = m as f64 / n as f64;
    let kmin = ((cfg.delta / spacing).floor() as usize + 1).max(1);

    // Grid points as integer coordinates k with Σk = n and k_i ≥ kmin.
    let mut coords: Vec<Vec<usize>> = Vec::new();
    match m {
        1 => coords.push(vec![n]),
        2 => {
            for k0 in kmin..=n.saturating_sub(kmin) {
                coords.push(vec![k0, n - k0]);
            }
        }
        _ => {
            for k0 in kmin..=n {
                for k1 in kmin..=n {
                    if k0 + k1 + kmin <= n {
                        coords.push(vec![k0, k1, n - k0 - k1]);
                    }
                }
            }
        }
    }
    let index: BTreeMap<Vec<usize>, usize> = coords
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), i))
        .collect();
    let points: Vec<Vec<f64>> = coords
        .iter()
        .map(|k| k.iter().map(|&ki| ki as f64 * spacing).collect())
        .collect();
    let values: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| model.eval(cfg.t, p))
        .collect::<Result<_>>()?;

    let mut flagged = Vec::new();
    for (pi, k) in coords.iter().enumerate() {
        let g = &values[pi];
        let residual = sup_norm(g);
        let neighbour = |a: usize, up: bool| -> Option<&Vec<f64>> {
            let mut q = k.clone();
            let (inc, dec) = if up { (a, m - 1) } else { (m - 1, a) };
            q[dec] = q[dec].checked_sub(1)?;
            q[inc] += 1;
            index.get(&q).map(|&qi| &values[qi])
        };
        // Columns: change of g per grid step along e_a − e_{m−1}.
        let dirs = m - 1;
        let mut jac = DMatrix::<f64>::zeros(m, dirs);
        let mut slope = 0.0_f64;
        let mut complete = dirs > 0;
        for a in 0..dirs {
            let col: Vec<f64> = match (neighbour(a, true), neighbour(a, false)) {
                (Some(up), Some(down)) => up.iter().zip(down).map(|(u, d)| (u - d) / 2.0).collect(),
                (Some(up), None) => up.iter().zip(g).map(|(u, x)| u - x).collect(),
                (None, Some(down)) => g.iter().zip(down).map(|(x, d)| x - d).collect(),
                (None, None) => {
                    complete = false;
                    break;
                }
            };
            slope = slope.max(sup_norm(&col));
            for (c, v) in col.into_iter().enumerate() {
                jac[(c, a)] = v;
            }
        }
        let candidate = if residual == 0.0 {
            Some(0.0)
        } else if complete && residual < 2.0 * slope {
            // Least-squares step to the first-order zero, in grid steps.
            let rhs = DVector::from_iterator(m, g.iter().map(|v| -v));
            jac.clone()
                .svd(true, true)
                .solve(&rhs, 1e-12 * slope)
                .ok()
                .filter(|step| sup_norm((&jac * step - &rhs).as_slice()) <= SCAN_LINEAR_FIT * slope)
                .map(|step| step.amax().max(step.sum().abs()))
        } else {
            None
        };
        if let Some(offset) = candidate.filter(|&o| o <= SCAN_REACH) {
            flagged.push(FlaggedPoint {
                point: points[pi].clone(),
                residual,
                zero_offset: offset * spacing,
                ray_distance: ray_distance(&points[pi]),
            });
        }
    }
    flagged.sort_by(|a, b| b.ray_distance.total_cmp(&a.ray_distance));
    let max_flagged_ray_distance = flagged.first().map_or(0.0, |f| f.ray_distance);
    let verdict = if flagged
        .iter()
        .all(|f| f.ray_distance <= spacing * (1.0 + 1e-9))
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let flagged_count = flagged.len();
    flagged.truncate(SCAN_KEEP);
    Ok(ScanReport {
        verdict,
        dimension: m,
        resolution: n,
        spacing,
        points_scanned: points.len(),
        flagged_count,
        max_flagged_ray_distance,
        flagged,
    })
}

impl ScanReport {
    /// The scan in the common report shape; off-ray flagged points become violations.
    pub fn to_check_report(&self, t: f64) -> CheckReport {
        let off_ray: Vec<&FlaggedPoint> = self
            .flagged
            .iter()
            .filter(|f| f.ray_distance > self.spacing * (1.0 + 1e-9))
            .collect();
        let violation_count = if self.verdict == Verdict::Fail {
            (self.flagged_count - self.flagged.len() + off_ray.len()) as u64
        } else {
            0
        };
        let mut stats = BTreeMap::new();
        stats.insert("spacing".into(), self.spacing);
        stats.insert("flagged".into(), self.flagged_count as f64);
        stats.insert(
            "max_flagged_ray_distance".into(),
            self.max_flagged_ray_distance,
        );
        stats.insert("resolution".into(), self.resolution as f64);
        CheckReport {
            property: Property::EquilibriumScan,
            verdict: self.verdict,
            samples: self.points_scanned as u64,
            evaluated: self.points_scanned as u64,
            skipped: 0,
            seed: 0,
            tolerance: self.spacing,
            violation_count,
            violations: off_ray
                .into_iter()
                .enumerate()
                .map(|(i, f)| Violation {
                    sample: i as u64,
                    t,
                    pivot: None,
                    inputs: vec![f.point.clone()],
                    observed: vec![vec![f.residual, f.zero_offset], vec![self.spacing]],
                })
                .collect(),
            stats,
            note: None,
        }
    }
}

/// Dispatches a property by name. The scan uses default grid settings.
pub fn run_check<F: VectorField + ?Sized>(
    model: &F,
    property: Property,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    match property {
        Property::GrossSubstitute => check_gross_substitute(model, cfg),
        Property::StrongGrossSubstitute => check_strong_gross_substitute(model, cfg),
        Property::ClassN => check_class_n(model, cfg),
        Property::Homogeneity => check_homogeneity(model, cfg),
        Property::MaxMinContraction => check_a5(model, cfg),
        Property::PairSeparation => check_lemma1(model, cfg),
        Property::EquilibriumScan => {
            let scan_cfg = ScanConfig::default();
            Ok(scan_equilibria(model, &scan_cfg)?.to_check_report(scan_cfg.t))
        }
    }
}
