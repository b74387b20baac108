//! Named models for the `check` subcommand.

use cdg_core::models::{
    square_from_rows, LaplacianModel, LinearModel, Model, RatioConsensusModel,
};

use crate::error::CliError;

pub const MODEL_SPECS: &str =
    "linear:demo, linear:planted, linear:offset, ratio:n<k>, ratio:two-block, ratio:severed, laplacian:n<k>";

fn rows(r: &[&[f64]]) -> cdg_core::DMatrix<f64> {
    let v: Vec<Vec<f64>> = r.iter().map(|x| x.to_vec()).collect();
    square_from_rows(&v).expect("square literal")
}

fn size(spec: &str, rest: &str) -> Result<usize, CliError> {
    rest.strip_prefix('n')
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k >= 1)
        .ok_or_else(|| CliError::Usage(format!("bad model size in '{spec}' (expected n<k>, k ≥ 1)")))
}

/// Resolves `family:variant` to a model.
pub fn model_from_spec(spec: &str) -> Result<Model, CliError> {
    let (family, variant) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("model spec '{spec}' should look like family:variant ({MODEL_SPECS})")))?;
    let model: Model = match (family, variant) {
        ("linear", "demo") => LinearModel::metzler(rows(&[&[-2.0, 1.0], &[1.0, -2.0]]), vec![1.0, 1.0])?.into(),
        ("linear", "planted") => LinearModel::new(rows(&[&[-2.0, -1.0], &[1.0, -2.0]]), vec![0.0, 0.0])?.into(),
        ("linear", "offset") => LinearModel::new(rows(&[&[-2.0, 1.0], &[1.0, -2.0]]), vec![-1.0, 0.0])?.into(),
        ("ratio", "two-block") => RatioConsensusModel::constant(rows(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]))?
        .into(),
        // Two edges with w_10 = 0: g_1 ignores e_0.
        ("ratio", "severed") => RatioConsensusModel::constant(rows(&[&[0.0, 1.0], &[0.0, 0.0]]))?.into(),
        ("ratio", v) => RatioConsensusModel::uniform(size(spec, v)?).into(),
        ("laplacian", v) => LaplacianModel::uniform(size(spec, v)?).into(),
        _ => return Err(CliError::Usage(format!("unknown model spec '{spec}' (known: {MODEL_SPECS})"))),
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cdg_core::models::VectorField;

    #[test]
    fn resolves_known_specs() {
        assert_eq!(model_from_spec("ratio:n4").unwrap().dimension(), 4);
        assert_eq!(model_from_spec("laplacian:n3").unwrap().dimension(), 3);
        assert_eq!(model_from_spec("ratio:two-block").unwrap().dimension(), 4);
        assert_eq!(model_from_spec("linear:demo").unwrap().kind(), "linear");
    }

    #[test]
    fn rejects_unknown_specs() {
        for s in ["linear", "linear:nope", "ratio:n0", "ratio:nx", "cubic:n2"] {
            assert!(model_from_spec(s).is_err(), "{s}");
        }
    }
}
