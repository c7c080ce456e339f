use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pi_engine::algebra::{make_b2, TruncationPolicy};
use pi_engine::par::{self, Exec};
use pi_engine::repr::make_so3_algebra;
use pi_engine::tensor::{multiply_with, tensor_space};
use pi_engine::{rng, Role, TensorElement};

fn dense(space: &pi_engine::tensor::Space, seed: u64) -> TensorElement {
    TensorElement::from_dense(space, rng::cvec(&mut rng::seeded(seed), space.size(), 1.0)).unwrap()
}

fn multiply(c: &mut Criterion) {
    let mut g = c.benchmark_group("multiply");
    for n in [4, 8] {
        let b2 = Arc::new(make_b2(n).unwrap());
        let so3 = Arc::new(make_so3_algebra(2, TruncationPolicy::Drop));
        let space = tensor_space(vec![b2.clone(), b2, so3], vec![Role::Positional, Role::Positional, Role::Feature]).unwrap();
        let (x, y) = (dense(&space, 1), dense(&space, 2));
        for (tag, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            g.bench_with_input(BenchmarkId::new(tag, n), &n, |b, _| {
                b.iter(|| multiply_with(exec, black_box(&x), black_box(&y)).unwrap())
            });
        }
    }
    g.finish();
}

fn map_range(c: &mut Criterion) {
    let mut g = c.benchmark_group("map_range");
    let work = |i: usize| (0..20_000).map(|k| ((i * k) as f64).sin()).sum::<f64>();
    for (tag, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_function(tag, |b| b.iter(|| par::map_range(exec, 64, work)));
    }
    g.finish();
}

criterion_group!(benches, multiply, map_range);
criterion_main!(benches);
