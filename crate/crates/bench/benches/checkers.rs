use cdg_core::checkers::{check_a5, check_homogeneity, scan_equilibria, CheckConfig, ScanConfig};
use cdg_core::models::{Model, RatioConsensusModel};
use criterion::{criterion_group, criterion_main, Criterion};

fn sampled_checks(c: &mut Criterion) {
    let model: Model = RatioConsensusModel::uniform(10).into();
    let cfg = CheckConfig::default().with_samples(2_000);
    c.bench_function("homogeneity_m10_2k", |b| b.iter(|| check_homogeneity(&model, &cfg).unwrap()));
    c.bench_function("a5_m10_2k", |b| b.iter(|| check_a5(&model, &cfg).unwrap()));
}

fn grid_scan(c: &mut Criterion) {
    let model: Model = RatioConsensusModel::uniform(3).into();
    let cfg = ScanConfig::default();
    c.bench_function("scan_m3_n200", |b| b.iter(|| scan_equilibria(&model, &cfg).unwrap()));
}

criterion_group!(benches, sampled_checks, grid_scan);
criterion_main!(benches);
