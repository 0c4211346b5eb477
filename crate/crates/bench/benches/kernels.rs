use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num_rational::Ratio;
use std::hint::black_box;

use thermoform::*;

fn bench_perron(c: &mut Criterion) {
    let sys = SftSystem::full_shift(2);
    let phi = Potential::from_log_matrix(&sys, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    let matrix = transfer_matrix(&sys, &phi).unwrap();
    c.bench_function("perron_2x2", |b| {
        b.iter(|| perron(black_box(&matrix), 1e-12).unwrap().lambda)
    });
}

fn bench_enumeration(c: &mut Criterion) {
    let sys = SftSystem::golden_mean();
    c.bench_function("golden_mean_words_18", |b| {
        b.iter(|| {
            let mut count = 0usize;
            sys.for_each_word(18, |_| count += 1);
            black_box(count)
        })
    });
}

fn bench_gibbs_scan(c: &mut Criterion) {
    let sys = SftSystem::full_shift(2);
    let phi = Potential::from_log_matrix(&sys, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    let mu = equilibrium_measure(&sys, &phi).unwrap();
    let p = pressure(&sys, &phi, PressureMode::Spectral).unwrap().value;
    c.bench_function("gibbs_scan_len18", |b| {
        b.iter(|| gibbs_scan(&sys, &mu, &phi, black_box(p), 2, 17, 1.0).unwrap())
    });
}

fn bench_deviation_dp(c: &mut Criterion) {
    let sys = SftSystem::full_shift(2);
    let mu = CylinderMeasure::bernoulli(&[0.5, 0.5]).unwrap();
    let psi = RationalObservable::indicator(&sys, 1).unwrap();
    c.bench_function("deviation_dp_n1000", |b| {
        b.iter(|| {
            deviation_prob_exact(&sys, &mu, &psi, Ratio::new(3, 4), black_box(1000), true)
                .unwrap()
        })
    });
}

fn bench_orbit_and_detector(c: &mut Criterion) {
    let map = PiecewiseMap::intermittent(0.5).unwrap();
    c.bench_function("intermittent_orbit_1e5", |b| {
        b.iter(|| iterate_orbit(&map, black_box(0.37721), 100_000).unwrap().len())
    });
    let trace = iterate_orbit(&map, 0.37721, 100_000).unwrap();
    c.bench_function("pliss_scan_1e5", |b| {
        b.iter_batched(
            || trace.clone(),
            |t| hyperbolic_times(&t, black_box(0.25)).unwrap().frequency,
            BatchSize::LargeInput,
        )
    });
}

fn bench_katok_classes(c: &mut Criterion) {
    let sys = SftSystem::full_shift(2);
    let mu = CylinderMeasure::bernoulli(&[1.0 / 3.0, 2.0 / 3.0]).unwrap();
    c.bench_function("katok_classes_n2000", |b| {
        b.iter(|| katok_entropy(&sys, &mu, black_box(2000), 1.0, 0.1).unwrap().value)
    });
}

criterion_group!(
    benches,
    bench_perron,
    bench_enumeration,
    bench_gibbs_scan,
    bench_deviation_dp,
    bench_orbit_and_detector,
    bench_katok_classes
);
criterion_main!(benches);
