//! Built-in scenarios, embedded from `scenarios/`.

use crate::error::CliError;
use crate::scenario::Scenario;

pub const DEMOS: [(&str, &str); 5] = [
    ("two-route-linear", include_str!("../scenarios/two-route-linear.toml")),
    ("ratio-n2", include_str!("../scenarios/ratio-n2.toml")),
    ("ratio-n10-timevarying", include_str!("../scenarios/ratio-n10-timevarying.toml")),
    ("laplacian-vs-ratio", include_str!("../scenarios/laplacian-vs-ratio.toml")),
    ("composite-ve", include_str!("../scenarios/composite-ve.toml")),
];

pub fn demo_names() -> Vec<&'static str> {
    DEMOS.iter().map(|d| d.0).collect()
}

pub fn demo_text(name: &str) -> Option<&'static str> {
    DEMOS.iter().find(|d| d.0 == name).map(|d| d.1)
}

pub fn demo(name: &str) -> Result<Scenario, CliError> {
    let text = demo_text(name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown demo '{name}' (available: {})",
            demo_names().join(", ")
        ))
    })?;
    Scenario::parse(text, &format!("demo:{name}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_demo_parses() {
        for name in demo_names() {
            demo(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(demo("nope").is_err());
    }
}
