use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use projcone_core::cones::{base_cone, ConeOracle, MatElem, MaxOracle, OracleConfig};
use projcone_core::correlations::{build_ns_space, dns_test, is_local, Box, DEFAULT_VERTEX_CAP};
use projcone_core::relspace::{build_space, RelationSet};
use projcone_core::sicpovm::{build_sic_presentation, construct_sic, verify_sic};

fn bench_space_build(c: &mut Criterion) {
    c.bench_function("build_ns_space 3x3", |b| {
        b.iter(|| build_ns_space(black_box(3), black_box(3)).unwrap())
    });
    c.bench_function("build_space single-sum N=16", |b| {
        let rels = RelationSet::resolution_of_identity(16);
        b.iter(|| build_space(black_box(&rels), 1e-10).unwrap())
    });
}

fn bench_oracles(c: &mut Criterion) {
    let s = build_ns_space(2, 2).unwrap();
    let cone = base_cone(&s.space).unwrap();
    let oracle = MaxOracle::new(cone.clone(), OracleConfig::default());
    let x = MatElem::unit_like(&cone.unit, 2);
    c.bench_function("max oracle accept level 2", |b| {
        b.iter(|| oracle.decide(black_box(&x), 1e-8))
    });
    let pr = Box::pr();
    c.bench_function("dns_test pr", |b| b.iter(|| dns_test(black_box(&s), &pr, 1e-7)));
    c.bench_function("is_local tsirelson", |b| {
        let t = Box::tsirelson();
        b.iter(|| is_local(black_box(&t), DEFAULT_VERTEX_CAP, 1e-9).unwrap())
    });
}

fn bench_sic(c: &mut Criterion) {
    c.bench_function("sic presentation d=6", |b| {
        b.iter(|| build_sic_presentation(black_box(6)).unwrap())
    });
    let ps = construct_sic(3).unwrap();
    c.bench_function("verify_sic d=3", |b| b.iter(|| verify_sic(black_box(&ps), 1e-10)));
}

criterion_group!(benches, bench_space_build, bench_oracles, bench_sic);
criterion_main!(benches);
