use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use singspec::deficiency::sweep;
use singspec::extensions::{build_context, BoundaryConditionSet};
use singspec::frobenius::OperatorSpec;
use singspec::par::ExecMode;
use singspec::spectrum::{eigenvalues, EigenConfig};

const MODES: [(&str, ExecMode); 2] = [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)];

fn sweep_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_grid");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "m<=3"), &mode, |b, &mode| b.iter(|| sweep(&[1, 2, 3], mode).unwrap()));
    }
    group.finish();
}

fn spectrum_scan(c: &mut Criterion) {
    let ctx = build_context(&OperatorSpec::unit(1, 1, 1).unwrap()).unwrap();
    let mut bc = BoundaryConditionSet::zeros(&ctx);
    bc.a1[(0, 0)] = Complex64::new(1.0, 0.0);
    bc.a2[(1, 0)] = Complex64::new(1.0, 0.0);
    bc.b2[(2, 0)] = Complex64::new(1.0, 0.0);
    let mut group = c.benchmark_group("spectrum_scan");
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = EigenConfig { mode, ..EigenConfig::default() };
        group.bench_with_input(BenchmarkId::new(name, "0..50"), &cfg, |b, cfg| b.iter(|| eigenvalues(&bc, &ctx, (0.0, 50.0), cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, sweep_grid, spectrum_scan);
criterion_main!(benches);
