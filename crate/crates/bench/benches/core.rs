use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hornlab::exactmath::Rat;
use hornlab::families::{horn_3d, pair_2d, strict_linear_precision_check, tree_2d};
use hornlab::horn::{horn_eval, minimize, validate_horn_pair};
use hornlab::polytope::{hull_in_span, normal_fan, primitive_collections};
use hornlab::stagedtree::{is_balanced, model_invariant_generators, rational_mle, tree_horn_pair};
use hornlab::{Family2DParams, PrismatoidParams, TreeVariant};

fn trapezoid_points(a: i64, b: i64, d: i64) -> Vec<Vec<i64>> {
    let mut pts = Vec::new();
    for j in 0..=b {
        for i in 0..=a + d * (b - j) {
            pts.push(vec![i, j]);
        }
    }
    pts
}

fn bench_polytope(c: &mut Criterion) {
    let mut group = c.benchmark_group("polytope");
    for &b in &[2i64, 4, 8] {
        let pts = trapezoid_points(2, b, 1);
        group.bench_with_input(BenchmarkId::new("hull", b), &pts, |bch, pts| bch.iter(|| hull_in_span(black_box(pts)).unwrap()));
        let (poly, _) = hull_in_span(&pts).unwrap();
        group.bench_with_input(BenchmarkId::new("primitive_collections", b), &poly, |bch, poly| {
            bch.iter(|| primitive_collections(&normal_fan(black_box(poly))))
        });
    }
    group.finish();
}

fn bench_horn(c: &mut Criterion) {
    let mut group = c.benchmark_group("horn");
    for &l in &[1u32, 2] {
        let pair = horn_3d(PrismatoidParams::new(2, 1, 2, 1, 1, l).unwrap());
        group.bench_with_input(BenchmarkId::new("minimize", l), &pair, |b, pair| b.iter(|| minimize(black_box(pair)).unwrap()));
        group.bench_with_input(BenchmarkId::new("validate_20", l), &pair, |b, pair| {
            b.iter(|| validate_horn_pair(black_box(pair), 20, 0))
        });
        let u: Vec<Rat> = (1..=pair.ncols() as i64).map(|x| Rat::from_integer(x.into())).collect();
        group.bench_with_input(BenchmarkId::new("eval", l), &pair, |b, pair| b.iter(|| horn_eval(black_box(pair), &u).unwrap()));
    }
    group.finish();
}

fn bench_tree(c: &mut Criterion) {
    let mut group = c.benchmark_group("stagedtree");
    for &b in &[1u32, 2, 3] {
        let tree = tree_2d(Family2DParams::new(1, b, 1), TreeVariant::Trapezoid).unwrap();
        let u: Vec<u64> = (1..=tree.num_atoms() as u64).collect();
        group.bench_with_input(BenchmarkId::new("rational_mle", b), &tree, |bch, t| bch.iter(|| rational_mle(black_box(t), &u).unwrap()));
        group.bench_with_input(BenchmarkId::new("tree_horn_pair", b), &tree, |bch, t| bch.iter(|| tree_horn_pair(black_box(t))));
        group.bench_with_input(BenchmarkId::new("is_balanced", b), &tree, |bch, t| bch.iter(|| is_balanced(black_box(t)).unwrap()));
        group.bench_with_input(BenchmarkId::new("invariants", b), &tree, |bch, t| {
            bch.iter(|| model_invariant_generators(black_box(t)))
        });
    }
    group.finish();
}

fn bench_strict(c: &mut Criterion) {
    let mut group = c.benchmark_group("strict_precision");
    for &b in &[1u32, 2, 3] {
        let pair = pair_2d(Family2DParams::new(b, b, 0)).unwrap();
        group.bench_with_input(BenchmarkId::new("tensor", b), &pair, |bch, p| bch.iter(|| strict_linear_precision_check(black_box(p))));
    }
    group.finish();
}

criterion_group!(benches, bench_polytope, bench_horn, bench_tree, bench_strict);
criterion_main!(benches);
