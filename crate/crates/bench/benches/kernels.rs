use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hcthin_core::{
    ball_intersection_volume, sample_boolean, thin, thin_bruteforce, Dim, LensSpec, ModelSpec,
    RadiusLaw, WeightKernel, Window,
};

fn lens(c: &mut Criterion) {
    for d in 1..=3 {
        let dim = Dim::new(d).unwrap();
        let spec = LensSpec::new(1.3, 0.7, 1.1).unwrap();
        c.bench_function(&format!("lens_d{d}"), |b| {
            b.iter(|| ball_intersection_volume(dim, black_box(spec)))
        });
    }
}

fn thinning(c: &mut Criterion) {
    let law = RadiusLaw::pareto(2.5, 1.0).unwrap();
    let window = Window::cube(Dim::new(2).unwrap(), 256.0, 64.0).unwrap();
    let sample = sample_boolean(0.05, &law, WeightKernel::LargeRetained, &window, 1, 0).unwrap();
    let mut group = c.benchmark_group("thin_256");
    group.sample_size(20);
    group.bench_function("grid", |b| b.iter(|| thin(black_box(&sample))));
    group.bench_function("bruteforce", |b| {
        b.iter(|| thin_bruteforce(black_box(&sample)))
    });
    group.finish();
}

fn covariance(c: &mut Criterion) {
    let law = RadiusLaw::pareto(2.5, 1.0).unwrap();
    let mut group = c.benchmark_group("thinned_covariance_d1");
    group.sample_size(10);
    for kernel in [WeightKernel::IsolatedRetained, WeightKernel::RandomRetained] {
        let spec = ModelSpec::new(0.05, law.clone(), kernel, Dim::new(1).unwrap()).unwrap();
        group.bench_function(kernel.name(), |b| {
            b.iter(|| spec.thinned_covariance(black_box(100.0)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lens, thinning, covariance);
criterion_main!(benches);
