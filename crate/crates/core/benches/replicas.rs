use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ldp_core::dynamics::{ldp_initial, ldp_rates, run_dp_with, DpOptions};
use ldp_core::field::{FieldSampler, Kernel};
use ldp_core::lattice::{Lattice, Orientation, Rect, RectQuad};
use ldp_core::par::{map_indexed, map_indexed_seq};
use ldp_core::perc::Alpha4Calibration;
use ldp_core::rng::derive_seed;

/// One replica of the annealed mixing loop: fresh BRW field, rates, and a
/// run to t = 10 sampling the unit-square crossing twice.
fn replica(lat: &Lattice, sampler: &FieldSampler, cal: &Alpha4Calibration, quad: RectQuad, k: usize) -> bool {
    let seed = derive_seed(3, k as u64);
    let field = sampler.sample(lat, seed).unwrap();
    let rates = ldp_rates(lat, &field, 0.5, f64::INFINITY, cal).unwrap();
    let traj = run_dp_with(lat, &ldp_initial(lat, seed), &rates, 10.0, &[quad], &[0.0, 10.0], seed, &DpOptions::default()).unwrap();
    traj.samples[1][0]
}

fn bench(c: &mut Criterion) {
    let eta = 1.0 / 32.0;
    let lat = Lattice::new(eta, Rect::unit()).unwrap();
    let sampler = FieldSampler::new(&lat, &Kernel::brw(Kernel::min_brw_depth(eta))).unwrap();
    let cal = Alpha4Calibration::power_law(eta, 1.25);
    let quad = RectQuad::new(Rect::unit(), Orientation::LeftRight, &Rect::unit()).unwrap();
    let mut g = c.benchmark_group("replicas");
    g.sample_size(10);
    for n in [16usize, 64] {
        g.bench_with_input(BenchmarkId::new("map_indexed", n), &n, |b, &n| {
            b.iter(|| black_box(map_indexed(n, |k| replica(&lat, &sampler, &cal, quad, k))))
        });
        g.bench_with_input(BenchmarkId::new("map_indexed_seq", n), &n, |b, &n| {
            b.iter(|| black_box(map_indexed_seq(n, |k| replica(&lat, &sampler, &cal, quad, k))))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
