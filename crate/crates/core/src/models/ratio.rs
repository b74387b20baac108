use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    check_nonnegative_zero_diagonal, is_irreducible, ClassSet, Domain, ModelClass, VectorField,
};
use crate::error::{Error, Result};

/// Piecewise-constant weight matrices. Entry `k` is active on
/// `[breakpoints[k], breakpoints[k + 1])`; the first entry also covers every
/// earlier time and the last every later time.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    breakpoints: Vec<f64>,
    matrices: Vec<DMatrix<f64>>,
}

impl WeightSchedule {
    pub fn new(entries: Vec<(f64, DMatrix<f64>)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::structural("weight schedule is empty"));
        }
        let m = entries[0].1.nrows();
        if m == 0 {
            return Err(Error::structural("weight matrices must be at least 1x1"));
        }
        for (k, (t, w)) in entries.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::structural(format!("breakpoint {k} is not finite")));
            }
            if w.nrows() != m || w.ncols() != m {
                return Err(Error::structural(format!(
                    "schedule entry {k} is {}x{}, expected {m}x{m}",
                    w.nrows(),
                    w.ncols()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::structural(format!(
                    "schedule entry {k} has non-finite weights"
                )));
            }
            check_nonnegative_zero_diagonal(w, "ratio weight matrix")?;
            if k > 0 && entries[k - 1].0 >= *t {
                return Err(Error::structural(format!(
                    "breakpoints must be strictly increasing ({} then {t})",
                    entries[k - 1].0
                )));
            }
        }
        let (breakpoints, matrices) = entries.into_iter().unzip();
        Ok(Self {
            breakpoints,
            matrices,
        })
    }

    pub fn constant(w: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![(0.0, w)])
    }

    pub fn dimension(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn entries(&self) -> impl Iterator<Item = (f64, &DMatrix<f64>)> {
        self.breakpoints.iter().copied().zip(self.matrices.iter())
    }

    pub fn at(&self, t: f64) -> &DMatrix<f64> {
        // Index of the last breakpoint ≤ t, clamped to the first entry.
        let k = self.breakpoints.partition_point(|&b| b <= t);
        &self.matrices[k.saturating_sub(1)]
    }
}

/// Structural facts about a schedule that weaken the model's guarantees.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RatioDiagnostics {
    /// `(schedule entry, row)` pairs with no positive off-diagonal weight.
    pub unsupported_rows: Vec<(usize, usize)>,
    /// Schedule entries whose weight digraph is not strongly connected.
    pub reducible_entries: Vec<usize>,
}

/// Ratio consensus field on the open cone:
/// `g_i(t, e) = Σ_{j≠i} w_ij(t) · (e_j / e_i − 1)`.
///
/// Uses only component ratios, so it is exactly homogeneous of degree zero, and
/// `∂g_i/∂e_j = w_ij / e_i ≥ 0` gives gross substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioConsensusModel {
    schedule: WeightSchedule,
    diagnostics: RatioDiagnostics,
}

impl RatioConsensusModel {
    /// Builds the model. Rows without support or reducible weight digraphs are
    /// accepted with a warning; the corresponding classes are then not claimed.
    pub fn new(schedule: WeightSchedule) -> Self {
        let m = schedule.dimension();
        let mut diagnostics = RatioDiagnostics::default();
        for (k, (_, w)) in schedule.entries().enumerate() {
            for i in 0..m {
                if m > 1 && !(0..m).any(|j| j != i && w[(i, j)] > 0.0) {
                    diagnostics.unsupported_rows.push((k, i));
                }
            }
            if !is_irreducible(w) {
                diagnostics.reducible_entries.push(k);
            }
        }
        if !diagnostics.unsupported_rows.is_empty() {
            log::warn!(
                "ratio weights: rows without positive weight {:?}; strong gross substitution not claimed",
                diagnostics.unsupported_rows
            );
        }
        if !diagnostics.reducible_entries.is_empty() {
            log::warn!(
                "ratio weights: schedule entries {:?} are not strongly connected; consensus is not guaranteed",
                diagnostics.reducible_entries
            );
        }
        Self {
            schedule,
            diagnostics,
        }
    }

    pub fn constant(w: DMatrix<f64>) -> Result<Self> {
        Ok(Self::new(WeightSchedule::constant(w)?))
    }

    /// All off-diagonal weights equal to one.
    pub fn uniform(m: usize) -> Self {
        let w = DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 1.0 });
        Self::constant(w).expect("uniform weights are valid")
    }

    pub fn schedule(&self) -> &WeightSchedule {
        &self.schedule
    }

    pub fn diagnostics(&self) -> &RatioDiagnostics {
        &self.diagnostics
    }

    pub fn is_irreducible(&self) -> bool {
        self.diagnostics.reducible_entries.is_empty()
    }
}

impl VectorField for RatioConsensusModel {
    fn dimension(&self) -> usize {
        self.schedule.dimension()
    }

    fn domain(&self) -> Domain {
        Domain::OpenCone
    }

    fn claimed_classes(&self) -> ClassSet {
        let mut classes = ClassSet::new();
        classes.insert(ModelClass::GrossSubstitute);
        classes.insert(ModelClass::Homogeneous);
        if self.diagnostics.unsupported_rows.is_empty() && self.dimension() > 1 {
            classes.insert(ModelClass::StrongGrossSubstitute);
        }
        if self.is_irreducible() {
            classes.insert(ModelClass::MaxMinContraction);
        }
        classes
    }

    fn label(&self) -> String {
        let m = self.dimension();
        if self.schedule.breakpoints.len() > 1 {
            format!("ratio(m={m}, {} regimes)", self.schedule.breakpoints.len())
        } else {
            format!("ratio(m={m})")
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.schedule.breakpoints.clone()
    }

    fn eval_unchecked(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let w = self.schedule.at(t);
        let m = x.len();
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                if j != i {
                    let wij = w[(i, j)];
                    if wij != 0.0 {
                        acc += wij * (x[j] / x[i] - 1.0);
                    }
                }
            }
            out[i] = acc;
        }
    }
}
