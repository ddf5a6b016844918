use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use coupling_core::chart::ops::schouten_square;
use coupling_core::coupling::{coupling_generators, dirac_closure_residual};
use coupling_core::examples;
use coupling_core::monodromy::{hopf_sphere_bundle, so3_lattice, transgress, SphereFamily};
use coupling_core::{check_coupling_conditions, CoordinateDomain, Field, Valence};

fn coupling(c: &mut Criterion) {
    let data = examples::so3_coadjoint();
    let points = data.space().samples(16, 1);
    c.bench_function("conditions/so3-coadjoint", |b| {
        b.iter(|| check_coupling_conditions(black_box(&data), &points, 1e-8).unwrap())
    });
    let gens = coupling_generators(&data).unwrap();
    c.bench_function("closure/so3-coadjoint", |b| b.iter(|| dirac_closure_residual(black_box(&data), &gens, &points).unwrap()));
}

fn schouten(c: &mut Criterion) {
    let pi = Field::new(CoordinateDomain::cube(3, 2.0), Valence::BIVECTOR, |x| vec![x[2], -x[1], x[0]]);
    c.bench_function("schouten/so3", |b| b.iter(|| schouten_square(black_box(&pi)).unwrap().eval(&[0.3, -0.4, 0.5])));
}

fn transgression(c: &mut Criterion) {
    let bundle = hopf_sphere_bundle(examples::default_hopf_moment()).unwrap();
    let family = SphereFamily::round_sphere().with_grid(64, 64);
    c.bench_function("transgress/hopf-64", |b| b.iter(|| transgress(&bundle, black_box(&family), &[0.5]).unwrap()));
    let mut group = c.benchmark_group("lattice");
    group.sample_size(10);
    group.bench_function("so3-linear-64", |b| {
        b.iter(|| so3_lattice(Arc::new(|r| r * 2.0 + 1.0), black_box(&[1.0]), 64).unwrap())
    });
    group.finish();
}

criterion_group!(benches, coupling, schouten, transgression);
criterion_main!(benches);
