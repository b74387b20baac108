//! Random instances for tests, sweeps and benchmarks.

use nalgebra::DMatrix;
use rand::Rng;

use crate::checkers::sample_log_uniform;
use crate::models::{LinearModel, RatioConsensusModel};

/// Metzler `A` (diagonal in `[-3, -0.5)`, off-diagonals `U[0, 1)` with
/// probability 0.7) and nonnegative `b`.
pub fn random_metzler<R: Rng + ?Sized>(rng: &mut R, m: usize) -> LinearModel {
    let a = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            -rng.gen_range(0.5..3.0)
        } else if rng.gen::<f64>() < 0.7 {
            rng.gen::<f64>()
        } else {
            0.0
        }
    });
    let b = (0..m)
        .map(|_| {
            if rng.gen::<f64>() < 0.8 {
                rng.gen::<f64>()
            } else {
                0.0
            }
        })
        .collect();
    LinearModel::metzler(a, b).expect("generated pattern is Metzler")
}

/// Weights in `[0.1, 2)` on a random sparsity pattern, plus the ring
/// `i → i+1` so that the weight digraph is strongly connected.
pub fn random_irreducible_weights<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    density: f64,
) -> DMatrix<f64> {
    let mut w = DMatrix::from_fn(m, m, |i, j| {
        if i != j && rng.gen::<f64>() < density {
            rng.gen_range(0.1..2.0)
        } else {
            0.0
        }
    });
    if m > 1 {
        for i in 0..m {
            let j = (i + 1) % m;
            if w[(i, j)] == 0.0 {
                w[(i, j)] = rng.gen_range(0.1..2.0);
            }
        }
    }
    w
}

/// Rescales every row to sum to `row_sum`. The ratio field is homogeneous of
/// degree zero, so its time scale is `λ/row_sum`; this pins that scale.
pub fn normalize_rows(w: &mut DMatrix<f64>, row_sum: f64) {
    for mut row in w.row_iter_mut() {
        let s: f64 = row.sum();
        if s > 0.0 {
            row *= row_sum / s;
        }
    }
}

pub fn random_irreducible_ratio<R: Rng + ?Sized>(rng: &mut R, m: usize) -> RatioConsensusModel {
    RatioConsensusModel::constant(random_irreducible_weights(rng, m, 0.5))
        .expect("generated weights are valid")
}

/// Log-uniform components on `[1e-3, 1e3]`.
pub fn random_cone_point<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    (0..m).map(|_| sample_log_uniform(rng)).collect()
}

/// Like [`random_cone_point`] but each component is zero with probability 0.2.
pub fn random_orthant_point<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    (0..m)
        .map(|_| {
            if rng.gen::<f64>() < 0.2 {
                0.0
            } else {
                sample_log_uniform(rng)
            }
        })
        .collect()
}
