use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use monosig_core::abm::{self, AgentPopulation, Graph, RunOptions, Selection};
use monosig_core::complete;
use monosig_core::ode::{rk4_step, IntegrateOptions};
use monosig_core::sparse::{RelatedMode, SparseModel};
use monosig_core::{make_kng, make_long, LinkMacrostate, Macrostate, PartialOrder};
use nalgebra::DVector;

fn drift(c: &mut Criterion) {
    let long = make_long();
    let n = DVector::from_vec(vec![0.5, 0.2, 0.3]);
    c.bench_function("drift/long", |b| {
        b.iter(|| complete::drift(&long, black_box(&n)))
    });
    let kng = make_kng(6).unwrap();
    let n7 = DVector::from_element(7, 1.0 / 7.0);
    c.bench_function("drift/kng6", |b| {
        b.iter(|| complete::drift(&kng, black_box(&n7)))
    });
    let model = SparseModel::new(&long, 10.0, RelatedMode::OneSided).unwrap();
    let l = LinkMacrostate::product(&Macrostate::from_slice(&[0.5, 0.2, 0.3]).unwrap());
    c.bench_function("drift/sparse_long", |b| {
        b.iter(|| model.drift(black_box(l.as_vector())))
    });
}

fn rk4(c: &mut Criterion) {
    let long = make_long();
    let n = DVector::from_vec(vec![0.5, 0.2, 0.3]);
    let f = |x: &DVector<f64>| complete::drift(&long, x);
    c.bench_function("rk4/step_long", |b| {
        b.iter(|| rk4_step(&f, black_box(&n), 1e-3))
    });
    let n0 = Macrostate::from_slice(&[0.6, 0.0, 0.4]).unwrap();
    let opts = IntegrateOptions::new(10.0, 1e-3).record_every(1.0);
    c.bench_function("rk4/integrate_long_t10", |b| {
        b.iter(|| complete::integrate(&long, black_box(&n0), &opts).unwrap())
    });
}

fn cone(c: &mut Criterion) {
    let kng = make_kng(5).unwrap();
    let cone = PartialOrder::alpha_chain(&kng).cone();
    let inside = cone.generators() * DVector::from_element(5, 0.1);
    let mut outside = inside.clone();
    outside[0] += 0.05;
    outside[5] -= 0.05;
    c.bench_function("cone_contains/kng5_member", |b| {
        b.iter(|| cone.contains_unchecked(black_box(&inside)))
    });
    c.bench_function("cone_contains/kng5_nonmember", |b| {
        b.iter(|| cone.contains_unchecked(black_box(&outside)))
    });
}

fn abm_step(c: &mut Criterion) {
    let long = make_long();
    let n0 = Macrostate::from_slice(&[0.6, 0.0, 0.4]).unwrap();
    let mut rng = abm::run_rng(1, 0);
    for (name, graph) in [
        (
            "abm_time_unit/complete_1e4",
            Graph::complete(10_000).unwrap(),
        ),
        (
            "abm_time_unit/er_1e4_k10",
            abm::make_er_graph(10_000, 10.0, 1).unwrap(),
        ),
    ] {
        let mut pop = AgentPopulation::from_macrostate(&n0, Arc::new(graph), &mut rng).unwrap();
        // one time unit is N = 10^4 interactions
        let opts = RunOptions {
            t_end: 1.0,
            record_every: 1.0,
            selection: Selection::EdgeFirst,
        };
        c.bench_function(name, |b| {
            b.iter(|| abm::run(&mut pop, &long, &opts, &mut rng).unwrap())
        });
    }
}

criterion_group!(benches, drift, rk4, cone, abm_step);
criterion_main!(benches);
