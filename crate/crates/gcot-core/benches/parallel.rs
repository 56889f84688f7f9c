//! Rayon-vs-sequential comparison on the two enumeration-heavy kernels:
//! the half-filling extreme-point scan and the log-domain partition sum.
//! With `--no-default-features` both sides run the sequential path.

use criterion::{criterion_group, criterion_main, Criterion};
use gcot_core::cost::{pairwise_family, riesz};
use gcot_core::density::DiscreteDensity;
use gcot_core::entropic::{log_partition_terms, log_partition_terms_seq};
use gcot_core::halffill::{solve_half_filling, solve_half_filling_seq, HalfFillInstance};
use gcot_core::lp::enumerate_configurations;
use std::hint::black_box;

fn ring_points(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            // two interleaved radii keep the instance non-symmetric
            let r = if i % 2 == 0 { 1.0 } else { 1.37 };
            vec![r * a.cos(), r * a.sin()]
        })
        .collect()
}

fn bench_halffill(c: &mut Criterion) {
    let inst = HalfFillInstance::new(ring_points(16), riesz(1.0).unwrap()).unwrap();
    let mut group = c.benchmark_group("halffill_scan_m16");
    group.bench_function("par", |b| b.iter(|| solve_half_filling(black_box(&inst)).unwrap()));
    group.bench_function("seq", |b| {
        b.iter(|| solve_half_filling_seq(black_box(&inst)).unwrap())
    });
    group.finish();
}

fn bench_partition(c: &mut Criterion) {
    let points = ring_points(20);
    let masses = vec![0.31; 20];
    let rho = DiscreteDensity::new(2, points, masses).unwrap();
    let fam = pairwise_family(riesz(1.0).unwrap());
    let occs = enumerate_configurations(&rho, 6, &fam, 10_000_000).unwrap();
    let prepared = fam.prepare(rho.points());
    let costs: Vec<f64> = occs.iter().map(|o| prepared.cost(o)).collect();
    let psi = vec![0.1; 20];
    let mut group = c.benchmark_group(format!("log_partition_{}_terms", occs.len()));
    group.bench_function("par", |b| {
        b.iter(|| log_partition_terms(black_box(&rho), &occs, &costs, &psi, 0.5))
    });
    group.bench_function("seq", |b| {
        b.iter(|| log_partition_terms_seq(black_box(&rho), &occs, &costs, &psi, 0.5))
    });
    group.finish();
}

criterion_group!(benches, bench_halffill, bench_partition);
criterion_main!(benches);
