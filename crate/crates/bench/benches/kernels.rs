use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use heavylog::matrix::{correlation_from_normalized, log_det_spd, self_normalize};
use heavylog::moments::{permutation_oracle, Rational, Scalar};
use heavylog::perpendiculars::girko_log_det;
use heavylog::sampling::fill_matrix;
use heavylog::{RngStream, TailLaw};

const LAW: TailLaw = TailLaw::StudentT { df: 3.5 };

fn fill(c: &mut Criterion) {
    let mut g = c.benchmark_group("fill_matrix");
    for &(p, n) in &[(100, 200), (250, 500)] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{p}x{n}")), &(p, n), |b, &(p, n)| {
            b.iter(|| fill_matrix(&LAW, p, n, &RngStream::new(1, 0)).unwrap())
        });
    }
    g.finish();
}

fn logdet(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_det");
    g.sample_size(20);
    for &(p, n) in &[(100, 200), (250, 500)] {
        let x = fill_matrix(&LAW, p, n, &RngStream::new(2, 0)).unwrap();
        let y = self_normalize(&x).unwrap();
        g.bench_function(BenchmarkId::new("cholesky", format!("{p}x{n}")), |b| {
            b.iter(|| log_det_spd(correlation_from_normalized(black_box(&y)).as_symmetric()).unwrap())
        });
        g.bench_function(BenchmarkId::new("girko", format!("{p}x{n}")), |b| {
            b.iter(|| girko_log_det(black_box(&y)).unwrap().log_det())
        });
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("permutation_oracle");
    for n in [4usize, 6] {
        let z: Vec<Rational> = (0..n).map(|i| Rational::ratio(i as i64 + 1, 7)).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &z, |b, z| {
            b.iter(|| permutation_oracle(black_box(z), true, 4).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, fill, logdet, oracle);
criterion_main!(benches);
