//! Excess-demand vector fields `g(t, e)` and the concrete model families.
//!
//! Every model implements [`VectorField`]. Models declare which assumption
//! classes they claim; the `checkers` module can certify or refute those claims
//! empirically, and the analyses in `sim` and `ray` are gated on them.

mod composite;
mod laplacian;
mod linear;
mod ratio;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DensityVector;

pub use composite::CompositeModel;
pub use laplacian::LaplacianModel;
pub use linear::{is_metzler, linear_equilibrium, LinearEquilibrium, LinearModel, MetzlerCheck};
pub use ratio::{RatioConsensusModel, RatioDiagnostics, WeightSchedule};

/// Assumption classes a vector field may belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelClass {
    /// Raising other components never lowers `g_i`.
    #[serde(rename = "GS")]
    GrossSubstitute,
    /// Strictly raising all other components strictly raises `g_i` (on the open cone).
    #[serde(rename = "strong-GS")]
    StrongGrossSubstitute,
    /// `g_i ≥ 0` on the face `e_i = 0`: the nonnegative orthant is invariant.
    #[serde(rename = "N")]
    ClassN,
    /// Homogeneous of degree zero: `g(t, λe) = g(t, e)` for `λ > 0`.
    #[serde(rename = "H")]
    Homogeneous,
    /// Off the ray, the largest component falls and the smallest rises.
    #[serde(rename = "A5")]
    MaxMinContraction,
}

impl ModelClass {
    pub const ALL: [ModelClass; 5] = [
        ModelClass::GrossSubstitute,
        ModelClass::StrongGrossSubstitute,
        ModelClass::ClassN,
        ModelClass::Homogeneous,
        ModelClass::MaxMinContraction,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ModelClass::GrossSubstitute => "GS",
            ModelClass::StrongGrossSubstitute => "strong-GS",
            ModelClass::ClassN => "N",
            ModelClass::Homogeneous => "H",
            ModelClass::MaxMinContraction => "A5",
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

pub type ClassSet = BTreeSet<ModelClass>;

/// Where a model may be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Closed nonnegative orthant (and beyond; the field is globally defined).
    Orthant,
    /// Open cone of strictly positive vectors; singular on the boundary.
    OpenCone,
}

/// A time-varying vector field `ẋ = f(t, x)`.
pub trait VectorField: Send + Sync {
    fn dimension(&self) -> usize;

    fn domain(&self) -> Domain;

    fn claimed_classes(&self) -> ClassSet;

    /// Short human-readable identifier.
    fn label(&self) -> String;

    /// Components that must stay positive (domain and positivity monitors).
    /// Defaults to the whole state.
    fn positive_block(&self) -> Range<usize> {
        0..self.dimension()
    }

    /// Times at which the field switches between constant regimes.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Raw evaluation. Callers guarantee `x` and `out` have the model dimension
    /// and that `x` lies in the domain.
    fn eval_unchecked(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn claims(&self, class: ModelClass) -> bool {
        self.claimed_classes().contains(&class)
    }

    /// Checked evaluation into a caller buffer.
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.dimension();
        if x.len() != m || out.len() != m {
            return Err(Error::structural(format!(
                "{} expects state of length {m}, got {} (output buffer {})",
                self.label(),
                x.len(),
                out.len()
            )));
        }
        if self.domain() == Domain::OpenCone {
            let block = self.positive_block();
            if let Some(i) = block.clone().find(|&i| !(x[i] > 0.0)) {
                return Err(Error::domain(format!(
                    "{} is defined on the open cone; component {i} = {}",
                    self.label(),
                    x[i]
                )));
            }
        }
        self.eval_unchecked(t, x, out);
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "{} produced non-finite rate {} in component {i} at t = {t}",
                self.label(),
                out[i]
            )));
        }
        Ok(())
    }

    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dimension()];
        self.eval_into(t, x, &mut out)?;
        Ok(out)
    }
}

/// `g(t, e) + ε·𝟏`: the auxiliary system used to push the boundary inward.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedModel {
    inner: Box<Model>,
    epsilon: f64,
}

impl ShiftedModel {
    pub fn inner(&self) -> &Model {
        &self.inner
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl VectorField for ShiftedModel {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn domain(&self) -> Domain {
        self.inner.domain()
    }

    fn claimed_classes(&self) -> ClassSet {
        let keep = [
            ModelClass::GrossSubstitute,
            ModelClass::StrongGrossSubstitute,
            ModelClass::ClassN,
        ];
        self.inner
            .claimed_classes()
            .into_iter()
            .filter(|c| keep.contains(c))
            .collect()
    }

    fn label(&self) -> String {
        format!("{}+eps({:e})", self.inner.label(), self.epsilon)
    }

    fn positive_block(&self) -> Range<usize> {
        self.inner.positive_block()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }

    fn eval_unchecked(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.inner.eval_unchecked(t, x, out);
        for r in out.iter_mut() {
            *r += self.epsilon;
        }
    }
}

/// The model catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Ratio(RatioConsensusModel),
    Laplacian(LaplacianModel),
    Composite(CompositeModel),
    Shifted(ShiftedModel),
}

impl Model {
    fn field(&self) -> &dyn VectorField {
        match self {
            Model::Linear(m) => m,
            Model::Ratio(m) => m,
            Model::Laplacian(m) => m,
            Model::Composite(m) => m,
            Model::Shifted(m) => m,
        }
    }

    /// Short kind tag used in scenario files and summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Ratio(_) => "ratio",
            Model::Laplacian(_) => "laplacian",
            Model::Composite(_) => "composite",
            Model::Shifted(s) => s.inner.kind(),
        }
    }
}

impl VectorField for Model {
    fn dimension(&self) -> usize {
        self.field().dimension()
    }

    fn domain(&self) -> Domain {
        self.field().domain()
    }

    fn claimed_classes(&self) -> ClassSet {
        self.field().claimed_classes()
    }

    fn label(&self) -> String {
        self.field().label()
    }

    fn positive_block(&self) -> Range<usize> {
        self.field().positive_block()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.field().breakpoints()
    }

    fn eval_unchecked(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.field().eval_unchecked(t, x, out)
    }
}

impl From<LinearModel> for Model {
    fn from(m: LinearModel) -> Self {
        Model::Linear(m)
    }
}

impl From<RatioConsensusModel> for Model {
    fn from(m: RatioConsensusModel) -> Self {
        Model::Ratio(m)
    }
}

impl From<LaplacianModel> for Model {
    fn from(m: LaplacianModel) -> Self {
        Model::Laplacian(m)
    }
}

impl From<CompositeModel> for Model {
    fn from(m: CompositeModel) -> Self {
        Model::Composite(m)
    }
}

/// Wraps `model` so every component rate is raised by `epsilon`.
///
/// Only GS, strong-GS and N survive in the claimed classes.
pub fn add_epsilon(model: Model, epsilon: f64) -> Result<Model> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::domain(format!(
            "epsilon must be a positive finite number, got {epsilon}"
        )));
    }
    // Nested shifts collapse so that shifting twice is the same object as one shift by the sum.
    let (inner, epsilon) = match model {
        Model::Shifted(s) => (s.inner, s.epsilon + epsilon),
        other => (Box::new(other), epsilon),
    };
    Ok(Model::Shifted(ShiftedModel { inner, epsilon }))
}

/// Drops the numéraire component and expresses the rest relative to it.
pub fn normalize_prices(raw: &[f64], numeraire_index: usize) -> Result<DensityVector> {
    let reference = *raw.get(numeraire_index).ok_or_else(|| {
        Error::structural(format!(
            "numeraire index {numeraire_index} out of range for {} prices",
            raw.len()
        ))
    })?;
    if !(reference > 0.0) || !reference.is_finite() {
        return Err(Error::domain(format!(
            "numeraire price must be positive, got {reference}"
        )));
    }
    DensityVector::new(
        raw.iter()
            .enumerate()
            .filter(|&(i, _)| i != numeraire_index)
            .map(|(_, &p)| p / reference)
            .collect(),
    )
}

/// Row-major nested rows → square matrix.
pub fn square_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::structural(format!(
            "matrix is not square: row {i} has {} entries, expected {n}",
            r.len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::structural("matrix has non-finite entries"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Strong connectivity of the digraph `i → j` whenever `w[(i, j)] > 0`, `i ≠ j`.
pub fn is_irreducible(w: &DMatrix<f64>) -> bool {
    let n = w.nrows();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let weight = if forward { w[(u, v)] } else { w[(v, u)] };
                if u != v && weight > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

pub(crate) fn check_nonnegative_zero_diagonal(w: &DMatrix<f64>, what: &str) -> Result<()> {
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let v = w[(i, j)];
            if i == j && v != 0.0 {
                return Err(Error::structural(format!(
                    "{what} must have a zero diagonal; entry ({i}, {i}) = {v}"
                )));
            }
            if v < 0.0 {
                return Err(Error::domain(format!(
                    "{what} entries must be nonnegative; entry ({i}, {j}) = {v}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_linear() -> Model {
        LinearModel::metzler(
            square_from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap()
        .into()
    }

    #[test]
    fn epsilon_shift_adds_constant() {
        let m = add_epsilon(demo_linear(), 0.01).unwrap();
        let r = m.eval(0.0, &[0.0, 0.0]).unwrap();
        assert!((r[0] - 1.01).abs() < 1e-15 && (r[1] - 1.01).abs() < 1e-15);
    }

    #[test]
    fn epsilon_shift_composes_additively() {
        let base = demo_linear();
        let twice = add_epsilon(add_epsilon(base.clone(), 0.25).unwrap(), 0.5).unwrap();
        let once = add_epsilon(base, 0.75).unwrap();
        for e in [[0.0, 0.0], [1.5, 0.25], [3.0, 7.0]] {
            assert_eq!(twice.eval(0.3, &e).unwrap(), once.eval(0.3, &e).unwrap());
        }
    }

    #[test]
    fn epsilon_shift_pushes_boundary_inward() {
        let m = add_epsilon(demo_linear(), 1e-3).unwrap();
        let r = m.eval(0.0, &[0.0, 5.0]).unwrap();
        assert!(r[0] >= 1e-3);
    }

    #[test]
    fn epsilon_shift_rejects_nonpositive() {
        assert!(matches!(
            add_epsilon(demo_linear(), 0.0),
            Err(Error::Domain(_))
        ));
        assert!(add_epsilon(demo_linear(), -1.0).is_err());
    }

    #[test]
    fn epsilon_shift_class_reduction() {
        let ratio: Model = RatioConsensusModel::uniform(3).into();
        assert!(ratio.claims(ModelClass::Homogeneous));
        let shifted = add_epsilon(ratio, 0.1).unwrap();
        let classes = shifted.claimed_classes();
        assert!(!classes.contains(&ModelClass::Homogeneous));
        assert!(!classes.contains(&ModelClass::MaxMinContraction));
        assert!(classes.contains(&ModelClass::StrongGrossSubstitute));

        let lin = add_epsilon(demo_linear(), 0.1).unwrap();
        assert!(lin.claims(ModelClass::ClassN));
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_prices(&[2.0, 4.0, 6.0], 0).unwrap().as_slice(),
            &[2.0, 3.0]
        );
        assert_eq!(
            normalize_prices(&[1.0, 0.7, 9.0], 0).unwrap().as_slice(),
            &[0.7, 9.0]
        );
        assert_eq!(
            normalize_prices(&[5.0, 5.0, 5.0], 2).unwrap().as_slice(),
            &[1.0, 1.0]
        );
        assert!(matches!(
            normalize_prices(&[0.0, 1.0], 0),
            Err(Error::Domain(_))
        ));
        assert!(normalize_prices(&[-1.0, 1.0], 0).is_err());
        assert!(matches!(
            normalize_prices(&[1.0], 3),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn irreducibility() {
        let ring = square_from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(is_irreducible(&ring));
        let chain = square_from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(!is_irreducible(&chain));
    }

    #[test]
    fn non_square_rows() {
        assert!(matches!(
            square_from_rows(&[vec![1.0, 2.0], vec![3.0]]),
            Err(Error::Structural(_))
        ));
    }
}
