//! Derived values checked against independent computations.

use std::sync::Arc;

use monosig_core::abm::{self, EnsembleConfig, Graph, RunOptions, Selection};
use monosig_core::complete::{self, Stability};
use monosig_core::ode::IntegrateOptions;
use monosig_core::sparse::{self, RelatedMode, SparseModel};
use monosig_core::{make_long, LinkIndex, LinkMacrostate, Macrostate};
use nalgebra::DVector;

fn long_start() -> Macrostate {
    Macrostate::from_slice(&[0.6, 0.0, 0.4]).unwrap()
}

#[test]
fn majority_a_reaches_a_consensus() {
    let s = make_long();
    let coarse =
        complete::integrate(&s, &long_start(), &IntegrateOptions::new(50.0, 1e-3)).unwrap();
    let fine = complete::integrate(&s, &long_start(), &IntegrateOptions::new(50.0, 1e-4)).unwrap();
    let (c, f) = (coarse.last().unwrap(), fine.last().unwrap());
    assert!((c - f).amax() < 1e-9);
    assert!((c - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-6);
}

#[test]
fn jacobian_at_consensus_matches_one_sided_difference() {
    let s = make_long();
    let a = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let d = DVector::from_vec(vec![-1.0, 1.0, 0.0]);
    let jd = complete::jacobian(&s, &a) * &d;
    for h in [1e-4, 1e-5, 1e-6] {
        let fd = (complete::drift(&s, &(&a + &d * h)) - complete::drift(&s, &a)) / h;
        // quadratic drift: the forward difference is exact up to O(h)
        assert!((&fd - &jd).amax() < 10.0 * h);
    }
}

#[test]
fn committed_slice_has_single_a_dominant_equilibrium() {
    let s = make_long().with_committed(&[("A", 1.0)]).unwrap();
    let c = s.index_of("C_A").unwrap();
    let search = complete::find_equilibria_on_slice(&s, &[(c, 0.2)], 20).unwrap();
    let stable: Vec<_> = search
        .equilibria
        .iter()
        .filter(|e| e.classification == Stability::Stable)
        .collect();
    assert_eq!(stable.len(), 1, "{:?}", search.equilibria);
    assert!(stable[0].state[0] + stable[0].state[c] > 0.9);
    assert_eq!(search.equilibria.len(), 1);
}

#[test]
fn large_committed_fraction_tips_all_b() {
    let s = make_long().with_committed(&[("A", 1.0)]).unwrap();
    let c = s.index_of("C_A").unwrap();
    let p = complete::committed_outcome(&s, c, 0.3, &Default::default()).unwrap();
    assert!(p.target_mass > 0.9, "{p:?}");
}

#[test]
fn isolated_a_b_edge_splits_evenly() {
    let s = make_long();
    let idx = LinkIndex::new(3);
    let trials = 100_000u64;
    let counts = abm::isolated_edge_counts(&s, 0, 2, trials, 3).unwrap();
    let sigma = (trials as f64 * 0.25).sqrt();
    for link in [idx.index(0, 1), idx.index(1, 2)] {
        assert!(
            (counts[link] as f64 - trials as f64 / 2.0).abs() < 3.0 * sigma,
            "{counts:?}"
        );
    }
    assert_eq!(counts.iter().sum::<u64>(), trials);
}

#[test]
fn abm_majority_a_runs_end_in_a() {
    let s = make_long();
    let cfg = EnsembleConfig {
        system: s,
        graph: Arc::new(Graph::complete(10_000).unwrap()),
        initial: long_start(),
        run: RunOptions {
            t_end: 50.0,
            record_every: 50.0,
            selection: Selection::EdgeFirst,
        },
    };
    let runs = 100;
    let majority_a = (0..runs)
        .filter(|&i| {
            let mut rng = abm::run_rng(77, i);
            let mut pop =
                abm::AgentPopulation::from_macrostate(&cfg.initial, cfg.graph.clone(), &mut rng)
                    .unwrap();
            let out = abm::run(&mut pop, &cfg.system, &cfg.run, &mut rng).unwrap();
            let last = out.nodes.last().unwrap();
            last[0] > last[2]
        })
        .count();
    assert!(majority_a >= 95, "{majority_a}/{runs}");
}

#[test]
fn sparse_marginal_drift_agrees_in_sign_with_complete_graph() {
    let s = make_long();
    let n = long_start();
    let l = LinkMacrostate::product(&n);
    let full = complete::drift(&s, n.as_vector());
    for mode in [RelatedMode::OneSided, RelatedMode::TwoSided] {
        let dl = sparse::drift_sparse(&s, 10.0, &l, mode).unwrap();
        let marg = monosig_core::system::pair_matrix_of(3, &dl).column_sum();
        for i in 0..3 {
            if full[i].abs() > 1e-12 {
                assert_eq!(marg[i].signum(), full[i].signum(), "{mode:?} component {i}");
            }
        }
    }
}

/// Link-level ABM on an ER graph against both related-change variants.
/// The one-sided form tracks the simulation more closely.
#[test]
fn er_abm_arbitrates_related_variant() {
    let s = make_long();
    let graph = Arc::new(abm::make_er_graph(10_000, 10.0, 5).unwrap());
    let cfg = EnsembleConfig {
        system: s.clone(),
        graph: graph.clone(),
        initial: long_start(),
        run: RunOptions {
            t_end: 5.0,
            record_every: 0.25,
            selection: Selection::EdgeFirst,
        },
    };
    let out = abm::ensemble(&cfg, 20, 8).unwrap();
    let links = out.links.expect("ER graph has edges");
    let l0 = LinkMacrostate::new(3, links.mean[0].clone()).unwrap();
    let opts = IntegrateOptions::new(5.0, 1e-3).record_every(0.25);
    let dev = |mode| {
        let model = SparseModel::new(&s, graph.mean_degree(), mode).unwrap();
        let traj = model.integrate(&l0, &opts).unwrap();
        abm::compare(&links, &traj, 5.0).sup_deviation
    };
    let (one, two) = (dev(RelatedMode::OneSided), dev(RelatedMode::TwoSided));
    println!("link sup deviation: one-sided {one:.4}, two-sided {two:.4}");
    assert!(one < two);
}
