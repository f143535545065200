use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polyhardy::instances::{self, MixedParams};
use polyhardy::numkernel::{self, CMatrix};
use polyhardy::subspace::classify;
use polyhardy::theorems::mixed_subspace;
use polyhardy::{Layout, TruncationGrid};

fn random(seed: u64, m: usize, n: usize) -> CMatrix {
    let mut rng = instances::rng(seed);
    CMatrix::from_fn(m, n, |_, _| instances::unit_box(&mut rng))
}

fn products(c: &mut Criterion) {
    let mut g = c.benchmark_group("matmul");
    for n in [64usize, 256] {
        let a = random(1, n, n);
        let b = random(2, n, n);
        g.bench_with_input(BenchmarkId::new("seq", n), &n, |bch, _| bch.iter(|| numkernel::matmul_seq(black_box(&a), black_box(&b))));
        #[cfg(feature = "parallel")]
        g.bench_with_input(BenchmarkId::new("par", n), &n, |bch, _| bch.iter(|| numkernel::matmul_par(black_box(&a), black_box(&b))));
    }
    g.finish();

    // tall-skinny Gram products, the common shape in subspace code
    let mut g = c.benchmark_group("adjoint_matmul");
    for rows in [4096usize] {
        let a = random(3, rows, 64);
        let b = random(4, rows, 64);
        g.bench_with_input(BenchmarkId::new("seq", rows), &rows, |bch, _| {
            bch.iter(|| numkernel::adjoint_matmul_seq(black_box(&a), black_box(&b)))
        });
        #[cfg(feature = "parallel")]
        g.bench_with_input(BenchmarkId::new("par", rows), &rows, |bch, _| {
            bch.iter(|| numkernel::adjoint_matmul_par(black_box(&a), black_box(&b)))
        });
    }
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let grid = TruncationGrid::new(vec![10, 10, 10]).unwrap();
    let inst = instances::mixed_instance(&mut instances::rng(7), &grid, 1, &MixedParams::default()).unwrap();
    let s = mixed_subspace(&inst.theta, &inst.factors, &grid, Layout::Dense).unwrap();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("classify_d3_cap10", |b| b.iter(|| classify(black_box(&s), 1, 1e-8).unwrap()));
    let a = random(5, 1331, 200);
    g.bench_function("orthonormalize_1331x200", |b| {
        b.iter(|| numkernel::orthonormal_columns(black_box(&a), 1e-8).unwrap())
    });
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().without_plots();
    targets = products, pipeline
}
criterion_main!(benches);
