use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use dkrl_bench::{planted_instance, random_matrix, random_vector};
use dkrl_core::bandit::{etc_run, suggest_explore_rounds};
use dkrl_core::estimators::{dkrl_fit, dkrl_fit_indexed, nuclear_fit, DkrlConfig, NuclearConfig};
use dkrl_core::kernels::{gram_sym, krr_fit, KernelSpec};
use dkrl_core::numerics::{ridge_solve, svd, DenseMatrix};
use dkrl_core::presets;
use dkrl_core::seeding;
use rand::Rng;

fn bench_numerics(c: &mut Criterion) {
    let mut group = c.benchmark_group("numerics");
    let m = random_matrix(60, 40, 1);
    group.bench_function("svd_60x40", |b| b.iter(|| svd(black_box(&m)).unwrap()));
    let design = random_matrix(120, 30, 2);
    let y = random_vector(120, 3);
    let penalty = DenseMatrix::identity(30);
    group.bench_function("ridge_solve_120x30", |b| {
        b.iter(|| ridge_solve(black_box(&design), black_box(&y), 0.1, &penalty).unwrap())
    });
    group.finish();
}

fn bench_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernels");
    let pts = random_matrix(200, 8, 4);
    let spec = KernelSpec::Gaussian { lengthscale: 1.0 };
    group.bench_function("gram_200", |b| b.iter(|| gram_sym(&spec, black_box(&pts)).unwrap()));
    let y = random_vector(200, 5);
    group.bench_function("krr_fit_200", |b| {
        b.iter(|| krr_fit(black_box(&pts), black_box(&y), &spec, 0.01).unwrap())
    });
    group.finish();
}

fn bench_estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimators");
    group.sample_size(10);

    let z = random_matrix(80, 4, 6);
    let x = random_matrix(80, 4, 7);
    let y = random_vector(80, 8);
    let spec = KernelSpec::Gaussian { lengthscale: 1.0 };
    let cfg = DkrlConfig { rank: 2, lambda: 1e-4, max_iter: 20, tol: 1e-9, ..DkrlConfig::default() };
    group.bench_function("dkrl_fit_flat_n80_r2", |b| {
        b.iter(|| dkrl_fit(black_box(&z), black_box(&x), black_box(&y), &cfg, &spec, &spec).unwrap())
    });

    let (design, set, spec_g, spec_h) = planted_instance(2, 9);
    let unit = vec![1.0; set.y.len()];
    group.bench_function("dkrl_fit_indexed_d20_n400_r2", |b| {
        b.iter(|| {
            dkrl_fit_indexed(
                &design.z_points(),
                &design.x_points(),
                black_box(&set.indices.e_z),
                black_box(&set.indices.e_x),
                &set.y,
                &unit,
                &cfg,
                &spec_g,
                &spec_h,
            )
            .unwrap()
        })
    });

    let mut rng = seeding::rng(10);
    let cells: Vec<(usize, usize, f64)> = (0..1_000)
        .map(|_| (rng.gen_range(0..20), rng.gen_range(0..20), rng.gen_range(-1.0..1.0)))
        .collect();
    let ncfg = NuclearConfig { lambda: 5e-3, max_iter: 300, tol: 1e-9, step: None };
    group.bench_function("nuclear_fit_20x20", |b| {
        b.iter_batched(
            || cells.clone(),
            |cells| nuclear_fit(black_box(&cells), (20, 20), &ncfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_bandit(c: &mut Criterion) {
    let mut group = c.benchmark_group("bandit");
    group.sample_size(10);
    let design = presets::heterogeneous_bandit_design(10, 10);
    let horizon = 2_000;
    let cfg = presets::default_etc_config(&design, horizon, 42);
    assert_eq!(cfg.explore_rounds, suggest_explore_rounds(horizon, 10, 10, 2));
    group.bench_function("etc_run_T2000", |b| {
        b.iter(|| etc_run(black_box(&design), black_box(&cfg)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_numerics, bench_kernels, bench_estimators, bench_bandit);
criterion_main!(benches);
