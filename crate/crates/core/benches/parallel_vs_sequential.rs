use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use hyperwalk::lattice::orbit;
use hyperwalk::lyossul::{ls_discretize, LsConfig, RadialConfig};
use hyperwalk::par::Exec;
use hyperwalk::suite::default_ls_data;
use hyperwalk::walk::{GreenConfig, GreenTable, MeasureFamily};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn orbit_enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("orbit_depth_9");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| orbit(black_box(Complex64::new(0.0, 1.0)), 9, exec))
        });
    }
    g.finish();
}

fn green_table(c: &mut Criterion) {
    let mu = MeasureFamily::uniform_generators();
    let cfg = GreenConfig { horizon: 30, ball_radius: 10, prune: 1e-15 };
    let mut g = c.benchmark_group("green_srw_n30_r10");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| GreenTable::compute(black_box(&mu), cfg, exec))
        });
    }
    g.finish();
}

fn ls_runs(c: &mut Criterion) {
    let orb = orbit(Complex64::new(0.0, 1.0), 4, Exec::Parallel);
    let data = default_ls_data(&orb, &RadialConfig::default(), Exec::Parallel).expect("default ball data");
    let cfg = LsConfig::default();
    let mut g = c.benchmark_group("ls_discretize_2000_runs");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ls_discretize(black_box(&data), &cfg, 2000, 7, exec).expect("runs"))
        });
    }
    g.finish();
}

criterion_group!(benches, orbit_enumeration, green_table, ls_runs);
criterion_main!(benches);
