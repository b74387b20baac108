use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ClassSet, Domain, ModelClass, VectorField};
use crate::error::{Error, Result};
use crate::graph::DensityVector;

/// Affine field `ė = A e + b`.
///
/// [`LinearModel::metzler`] enforces the competitive sign pattern
/// (`a_ii < 0`, `a_ij ≥ 0`, `b ≥ 0`). [`LinearModel::new`] accepts any matrix so
/// that counterexamples can be expressed; claimed classes are then derived from
/// the actual entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

/// Result of a sign-pattern check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetzlerCheck {
    pub is_metzler: bool,
    /// First offending entry in row-major order.
    pub first_violation: Option<(usize, usize)>,
}

/// Strictly negative diagonal and nonnegative off-diagonal entries.
pub fn is_metzler(a: &DMatrix<f64>) -> Result<MetzlerCheck> {
    if !a.is_square() {
        return Err(Error::structural(format!(
            "sign-pattern check needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            let ok = if i == j { v < 0.0 } else { v >= 0.0 };
            if !ok {
                return Ok(MetzlerCheck {
                    is_metzler: false,
                    first_violation: Some((i, j)),
                });
            }
        }
    }
    Ok(MetzlerCheck {
        is_metzler: true,
        first_violation: None,
    })
}

impl LinearModel {
    /// Any square `A` and matching `b`.
    pub fn new(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::structural(format!(
                "A is {}x{} but b has length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::structural("A and b must be finite"));
        }
        Ok(Self {
            a,
            b: DVector::from_vec(b),
        })
    }

    /// Competitive linear model; rejects sign-pattern violations and negative `b`.
    pub fn metzler(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        let model = Self::new(a, b)?;
        let check = is_metzler(&model.a)?;
        if let Some((i, j)) = check.first_violation {
            return Err(Error::domain(format!(
                "A violates the Metzler sign pattern at ({i}, {j}) = {}",
                model.a[(i, j)]
            )));
        }
        if let Some(i) = model.b.iter().position(|&v| v < 0.0) {
            return Err(Error::domain(format!(
                "b must be nonnegative; b[{i}] = {}",
                model.b[i]
            )));
        }
        Ok(model)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    fn off_diagonal_nonnegative(&self) -> bool {
        let n = self.a.nrows();
        (0..n).all(|i| (0..n).all(|j| i == j || self.a[(i, j)] >= 0.0))
    }
}

impl VectorField for LinearModel {
    fn dimension(&self) -> usize {
        self.b.len()
    }

    fn domain(&self) -> Domain {
        Domain::Orthant
    }

    fn claimed_classes(&self) -> ClassSet {
        let mut classes = ClassSet::new();
        let n = self.a.nrows();
        if self.off_diagonal_nonnegative() {
            classes.insert(ModelClass::GrossSubstitute);
            let every_row_coupled = (0..n).all(|i| (0..n).any(|j| i != j && self.a[(i, j)] > 0.0));
            if every_row_coupled {
                classes.insert(ModelClass::StrongGrossSubstitute);
            }
            if self.b.iter().all(|&v| v >= 0.0) {
                classes.insert(ModelClass::ClassN);
            }
        }
        classes
    }

    fn label(&self) -> String {
        format!("linear(m={})", self.dimension())
    }

    fn eval_unchecked(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.b[i];
            for (j, xj) in x.iter().enumerate() {
                acc += self.a[(i, j)] * xj;
            }
            *o = acc;
        }
    }
}

/// Equilibrium `−A⁻¹b` with stability diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearEquilibrium {
    pub point: Vec<f64>,
    /// All eigenvalues have negative real part.
    pub hurwitz: bool,
    pub nonnegative: bool,
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
}

impl LinearEquilibrium {
    /// The equilibrium as a density vector, when it is nonnegative.
    pub fn as_density(&self) -> Option<DensityVector> {
        DensityVector::new(self.point.clone()).ok()
    }
}

pub fn linear_equilibrium(model: &LinearModel) -> Result<LinearEquilibrium> {
    let a = &model.a;
    let n = a.nrows();
    let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let lu = a.clone().lu();
    let det = lu.determinant();
    // Relative singularity test: |det| against the Hadamard-style scale bound.
    if scale == 0.0 || det.abs() <= 1e-13 * scale.powi(n as i32) {
        return Err(Error::SingularMatrix(format!(
            "A is singular or nearly so (det = {det:e})"
        )));
    }
    let rhs = -&model.b;
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SingularMatrix("LU solve failed".into()))?;
    let eigenvalues: Vec<(f64, f64)> = a
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect();
    let hurwitz = eigenvalues.iter().all(|&(re, _)| re < 0.0);
    let point: Vec<f64> = x.iter().copied().collect();
    let nonnegative = point.iter().all(|&v| v >= 0.0);
    Ok(LinearEquilibrium {
        point,
        hurwitz,
        nonnegative,
        eigenvalues,
    })
}
