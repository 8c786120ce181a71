use monosig_core::complete::{drift, jacobian};
use monosig_core::monotonicity::{certify, Verdict};
use monosig_core::order::{compare_in, induced_link_order};
use monosig_core::sample;
use monosig_core::sparse::{self, RelatedMode, SparseModel};
use monosig_core::{
    make_counterexample, make_kng, make_long, Comparison, LinkIndex, LinkMacrostate, Macrostate,
    PairMatrix, PartialOrder, SignallingSystem,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn builder(choice: usize) -> SignallingSystem {
    match choice {
        0 => make_long(),
        1 => make_counterexample(),
        c => make_kng(c - 1).unwrap(),
    }
}

/// A point on the open simplex drawn from the given seed.
fn interior(k: usize, seed: u64) -> DVector<f64> {
    sample::interior(k, 1e-3, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cone_is_closed_under_addition(k in 2usize..6, a in prop::collection::vec(0.0f64..2.0, 5), b in prop::collection::vec(0.0f64..2.0, 5)) {
        let s = make_kng(k).unwrap();
        let cone = PartialOrder::alpha_chain(&s).cone();
        let e = cone.generators().clone();
        let la = DVector::from_iterator(e.ncols(), a.iter().copied().take(e.ncols()));
        let lb = DVector::from_iterator(e.ncols(), b.iter().copied().take(e.ncols()));
        let (da, db) = (&e * la, &e * lb);
        prop_assert!(cone.contains(&da).unwrap().member);
        prop_assert!(cone.contains(&db).unwrap().member);
        prop_assert!(cone.contains(&(da + db)).unwrap().member);
    }

    #[test]
    fn compare_is_antisymmetric(choice in 0usize..5, seed in any::<u64>()) {
        let s = builder(choice);
        let order = PartialOrder::alpha_chain(&s);
        let cone = order.cone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sample::dirichlet(s.k(), &mut rng);
        let above = sample::ordered_above(&n, cone.generators(), &mut rng);
        let other = sample::dirichlet(s.k(), &mut rng);
        for n2 in [above, other] {
            let fwd = compare_in(&cone, &n, &n2);
            let back = compare_in(&cone, &n2, &n);
            let expected = match fwd {
                Comparison::Less => Comparison::Greater,
                Comparison::Greater => Comparison::Less,
                c => c,
            };
            prop_assert_eq!(back, expected);
        }
    }

    #[test]
    fn pair_matrix_round_trip(k in 2usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = LinkMacrostate::new(k, sample::dirichlet(LinkIndex::new(k).len(), &mut rng)).unwrap();
        let m = PairMatrix::from_link(&l);
        prop_assert!((m.matrix() - m.matrix().transpose()).amax() < 1e-15);
        let back = m.to_link();
        prop_assert!((back.as_vector() - l.as_vector()).amax() < 1e-14);
        prop_assert!((m.row_sums().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn drift_conserves_mass(choice in 0usize..7, seed in any::<u64>()) {
        let s = builder(choice);
        let n = interior(s.k(), seed);
        prop_assert!(drift(&s, &n).sum().abs() <= 1e-12);
        let j = jacobian(&s, &n);
        // 1ᵀf ≡ 0 on the whole space, so 1ᵀJ = 0
        prop_assert!(j.row_sum().amax() <= 1e-12);
    }

    #[test]
    fn sparse_drift_conserves_mass(choice in 0usize..5, kd in 1.5f64..50.0, two_sided in any::<bool>(), seed in any::<u64>()) {
        let s = builder(choice);
        let mode = if two_sided { RelatedMode::TwoSided } else { RelatedMode::OneSided };
        let model = SparseModel::new(&s, kd, mode).unwrap();
        let l = interior(LinkIndex::new(s.k()).len(), seed);
        prop_assert!(model.drift(&l).sum().abs() <= 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences(choice in 0usize..7, seed in any::<u64>()) {
        let s = builder(choice);
        let n = interior(s.k(), seed);
        let h = 1e-6;
        let j = jacobian(&s, &n);
        let fd = DMatrix::from_fn(s.k(), s.k(), |r, c| {
            let mut e = DVector::zeros(s.k());
            e[c] = h;
            (drift(&s, &(&n + &e))[r] - drift(&s, &(&n - &e))[r]) / (2.0 * h)
        });
        prop_assert!((j - fd).amax() <= 1e-6);
    }

    #[test]
    fn long_is_symmetric_under_a_b_swap(seed in any::<u64>()) {
        let s = make_long();
        let n = interior(3, seed);
        let swap = |v: &DVector<f64>| DVector::from_vec(vec![v[2], v[1], v[0]]);
        let lhs = drift(&s, &swap(&n));
        let rhs = swap(&drift(&s, &n));
        prop_assert!((lhs - rhs).amax() < 1e-15);
    }

    #[test]
    fn committed_agents_keep_certificates(k in 1usize..6) {
        let base = make_kng(k).unwrap();
        let top = k.to_string();
        let s = base.with_committed(&[(top.as_str(), 1.0), ("0", 0.0)]).unwrap();
        let order = PartialOrder::alpha_chain(&base).extended(s.k());
        prop_assert_eq!(certify(&s, &order).verdict, Verdict::CertifiedMonotone);
    }

    #[test]
    fn decomposition_invariants(k in 2usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = LinkMacrostate::new(k, sample::dirichlet(LinkIndex::new(k).len(), &mut rng)).unwrap();
        let m = PairMatrix::from_link(&l);
        let (u, v) = sparse::decompose(&m);
        let n = m.row_sums();
        prop_assert!((&u - &n * n.transpose()).amax() < 1e-15);
        prop_assert!(v.row_sum().amax() <= 1e-12);
        prop_assert!(v.column_sum().amax() <= 1e-12);
        prop_assert!((&v - v.transpose()).amax() < 1e-15);
        prop_assert!((u + v - m.matrix()).amax() < 1e-15);
    }

    #[test]
    fn product_states_have_no_correlation(k in 2usize..6, seed in any::<u64>()) {
        let n = Macrostate::new(interior(k, seed)).unwrap();
        let (_, v) = sparse::decompose(&PairMatrix::from_link(&LinkMacrostate::product(&n)));
        prop_assert!(v.amax() < 1e-15);
    }

    #[test]
    fn link_order_implies_node_order(k in 2usize..5, seed in any::<u64>()) {
        let s = make_kng(k).unwrap();
        let node = PartialOrder::alpha_chain(&s);
        let link_cone = sparse::link_cone(&node);
        let node_cone = node.cone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = sample::dirichlet(LinkIndex::new(s.k()).len(), &mut rng);
        let l2 = sample::ordered_above(&l, link_cone.generators(), &mut rng);
        prop_assert!(link_cone.contains_unchecked(&(&l2 - &l)).member);
        let marg = |x: &DVector<f64>| PairMatrix::from_link(&LinkMacrostate::renormalized(s.k(), x.clone()).unwrap()).row_sums();
        let d = marg(&l2) - marg(&l);
        prop_assert!(node_cone.contains_unchecked(&d).member);
    }
}

#[test]
fn induced_link_order_is_consistent_with_pure_links() {
    let s = make_long();
    let link = induced_link_order(&PartialOrder::alpha_chain(&s));
    let idx = LinkIndex::new(3);
    // B-B < AB-B < A-B, AB-AB < A-AB < A-A
    let (a, ab, b) = (0, 1, 2);
    assert!(link.less(idx.index(b, b), idx.index(ab, b)));
    assert!(link.less(idx.index(ab, b), idx.index(a, b)));
    assert!(link.less(idx.index(ab, ab), idx.index(a, ab)));
    assert!(link.less(idx.index(a, ab), idx.index(a, a)));
    assert!(!link.less(idx.index(a, b), idx.index(ab, ab)));
    assert!(!link.less(idx.index(ab, ab), idx.index(a, b)));
}
