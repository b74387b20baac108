//! File emitters: trajectory and distance CSV, JSON documents.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cdg_core::ray::LyapunovSeries;
use cdg_core::sim::Trajectory;
use serde::Serialize;

use crate::error::CliError;

/// Every float in CSV output uses this format (16 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.15e}")
}

/// `t,e_1,…,e_m`, or `t,v_1,…,v_n,e_1,…,e_m` when `vertex_count > 0`.
pub fn trajectory_header(dimension: usize, vertex_count: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=vertex_count).map(|i| format!("v_{i}")));
    cols.extend((1..=dimension - vertex_count).map(|i| format!("e_{i}")));
    cols.join(",")
}

pub fn trajectory_csv(traj: &Trajectory, vertex_count: usize) -> String {
    let dim = traj.states.first().map_or(0, Vec::len);
    let mut out = trajectory_header(dim, vertex_count);
    out.push('\n');
    for (t, x) in traj.times.iter().zip(&traj.states) {
        out.push_str(&fmt_f64(*t));
        for v in x {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn distance_csv(series: &LyapunovSeries) -> String {
    let mut out = String::from("t,V\n");
    for (t, v) in series.times.iter().zip(&series.values) {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::io(format!("cannot write {}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    write_text(path, &text)
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(CliError::io(format!("cannot create {}", path.display())))
}
