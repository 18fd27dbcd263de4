use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cmr_isps::cg::Method;
use cmr_isps::experiment::{run_sweep, SweepAxis, SweepSpec};
use cmr_isps::geometry::make_grid;
use cmr_isps::par::Execution;
use cmr_isps::scene::{simulate, Scenario};
use cmr_isps::spectrum::{me_spectrum_with, sample_covariance};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for (name, execution) in MODES {
        let spec = SweepSpec {
            axis: SweepAxis::snr(vec![-10.0, 0.0, 10.0]),
            trials: 16,
            methods: vec![Method::CmrIsps, Method::Smi],
            execution,
            ..SweepSpec::default()
        };
        g.bench_function(name, |b| b.iter(|| run_sweep(&spec).unwrap()));
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let scn = Scenario {
        m: 32,
        ..Scenario::default()
    };
    let snap = simulate(&scn).unwrap();
    let r = sample_covariance(&snap).unwrap();
    let cfg = scn.nominal_array();
    let mut g = c.benchmark_group("me_spectrum");
    for q in [2_000usize, 20_000] {
        let grid = make_grid(q).unwrap();
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, q), &grid, |b, grid| {
                b.iter(|| me_spectrum_with(&r, grid, &cfg, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, sweep, spectrum);
criterion_main!(benches);
