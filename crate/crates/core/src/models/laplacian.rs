use nalgebra::DMatrix;

use super::{
    check_nonnegative_zero_diagonal, is_irreducible, ClassSet, Domain, ModelClass, VectorField,
};
use crate::error::Result;

/// Difference consensus over a fixed weighted digraph:
/// `v̇_i = −Σ_{j≠i} e_ij (v_i − v_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianModel {
    adjacency: DMatrix<f64>,
}

impl LaplacianModel {
    pub fn new(adjacency: DMatrix<f64>) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(crate::error::Error::structural("adjacency must be square"));
        }
        check_nonnegative_zero_diagonal(&adjacency, "laplacian adjacency")?;
        Ok(Self { adjacency })
    }

    /// Complete graph with unit weights.
    pub fn uniform(n: usize) -> Self {
        Self {
            adjacency: DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }),
        }
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn is_symmetric(&self) -> bool {
        self.adjacency == self.adjacency.transpose()
    }
}

impl VectorField for LaplacianModel {
    fn dimension(&self) -> usize {
        self.adjacency.nrows()
    }

    fn domain(&self) -> Domain {
        Domain::Orthant
    }

    fn claimed_classes(&self) -> ClassSet {
        let mut classes = ClassSet::from([ModelClass::GrossSubstitute, ModelClass::ClassN]);
        // For a strongly connected digraph the kernel is span(𝟏) and some tied
        // maximum always has a strictly smaller in-neighbour.
        if is_irreducible(&self.adjacency) {
            classes.insert(ModelClass::MaxMinContraction);
        }
        classes
    }

    fn label(&self) -> String {
        format!("laplacian(n={})", self.dimension())
    }

    fn eval_unchecked(&self, _t: f64, v: &[f64], out: &mut [f64]) {
        laplacian_rates(&self.adjacency, v, out);
    }
}

/// `out_i = −Σ_{j≠i} w_ij (v_i − v_j)` with `w` read through `weight(i, j)`.
pub(crate) fn laplacian_rates_with(
    n: usize,
    weight: impl Fn(usize, usize) -> f64,
    v: &[f64],
    out: &mut [f64],
) {
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            if j != i {
                acc -= weight(i, j) * (v[i] - v[j]);
            }
        }
        out[i] = acc;
    }
}

fn laplacian_rates(adjacency: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    laplacian_rates_with(adjacency.nrows(), |i, j| adjacency[(i, j)], v, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::models::square_from_rows;

    #[test]
    fn two_agent_hand_values() {
        let m = LaplacianModel::uniform(2);
        assert_eq!(m.eval(0.0, &[1.0, 3.0]).unwrap(), vec![2.0, -2.0]);
    }

    #[test]
    fn agreement_is_equilibrium() {
        let m = LaplacianModel::new(
            square_from_rows(&[
                vec![0.0, 2.0, 0.5],
                vec![0.0, 0.0, 1.0],
                vec![3.0, 0.0, 0.0],
            ])
            .unwrap(),
        )
        .unwrap();
        assert!(m.eval(0.0, &[4.2; 3]).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn symmetric_weights_conserve_sum() {
        // Pairwise cancellation: Σ_i Σ_j w_ij (v_j − v_i) = 0 when w is symmetric.
        let w = square_from_rows(&[
            vec![0.0, 1.5, 0.2],
            vec![1.5, 0.0, 0.7],
            vec![0.2, 0.7, 0.0],
        ])
        .unwrap();
        let m = LaplacianModel::new(w).unwrap();
        assert!(m.is_symmetric());
        let r = m.eval(0.0, &[1.0, -2.0, 5.5]).unwrap();
        assert!(r.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let m = LaplacianModel::uniform(3);
        assert!(matches!(
            m.eval(0.0, &[1.0, 2.0]),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn rejects_negative_weights() {
        let w = square_from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(LaplacianModel::new(w).is_err());
    }
}
