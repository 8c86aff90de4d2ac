//! Per-iteration scaling in `n` and `p`, and parallel-vs-sequential
//! multistart throughput.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use trpca::datagen::{gen_data1, GeneratorParams};
use trpca::fit::{self, FitOptions, SubspaceModel, TrimmedSpec};
use trpca::stiefel::random_frame;
use trpca::DataMatrix;

fn random_matrix(n: usize, p: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DataMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

/// One block-coordinate iteration at several (n, p); doubling either should
/// roughly double the time (the per-iteration cost is O(pk(k+n))).
fn bench_step(c: &mut Criterion) {
    let k = 5;
    let mut group = c.benchmark_group("step");
    group.sample_size(20);
    for &(n, p) in &[(500usize, 500usize), (1000, 500), (500, 1000), (1000, 1000)] {
        let x = random_matrix(n, p, 1);
        let t = TrimmedSpec::default_t(n);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("n{n}_p{p}")),
            &(n, p),
            |b, _| {
                let mut rng = ChaCha8Rng::seed_from_u64(2);
                let mut model = SubspaceModel::new(
                    trpca::matrix::column_median(&x),
                    random_frame(p, k, 3).unwrap(),
                )
                .unwrap();
                let res = fit::residuals(&x, &model).unwrap();
                let (_, mut selection) = fit::trimmed_objective(&res, t, &mut rng).unwrap();
                let mut workspace = fit::FitWorkspace::default();
                b.iter(|| {
                    match fit::trpca_step(&x, &mut model, &selection, t, &mut rng, &mut workspace)
                        .unwrap()
                    {
                        fit::StepOutcome::Updated { selection: s, .. } => selection = s,
                        fit::StepOutcome::Stalled => unreachable!("random data never stalls"),
                    }
                    black_box(&model);
                });
            },
        );
    }
    group.finish();
}

/// Multistart with the rayon path (default features) against the forced
/// sequential path on the same instance.
fn bench_multistart(c: &mut Criterion) {
    let params = GeneratorParams {
        n: 200,
        p: 50,
        k: 5,
        sigma_t: 0.05,
        sigma_o: 2.0,
        lambda: 0.3,
        seed: 11,
    };
    let ds = gen_data1(&params).unwrap();
    let spec = TrimmedSpec::new(ds.t_true, params.k);
    let opts = FitOptions::default();

    let mut group = c.benchmark_group("multistart");
    group.sample_size(10);
    group.bench_function("feature_default", |b| {
        b.iter(|| black_box(fit::trpca_multistart(&ds.x, &spec, 10, &opts).unwrap()))
    });
    group.bench_function("serial", |b| {
        b.iter(|| black_box(fit::trpca_multistart_serial(&ds.x, &spec, 10, &opts).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_step, bench_multistart);
criterion_main!(benches);
