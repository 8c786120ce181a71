//! Partial orders on spin states, their Hasse generators and the cones they span.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Feasibility};
use crate::system::{LinkIndex, SignallingSystem, SpinSpace};

/// Default sup-norm residual for cone membership.
pub const CONE_TOL: f64 = 1e-9;
/// Componentwise tolerance for treating two macrostates as equal.
pub const EQUAL_TOL: f64 = 1e-10;
/// Default cap on the number of states for exhaustive order enumeration.
pub const DEFAULT_MAX_K: usize = 6;

/// A strict partial order on `0..size`, stored as its transitive closure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialOrder {
    size: usize,
    relation: BTreeSet<(usize, usize)>,
}

impl PartialOrder {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            relation: BTreeSet::new(),
        }
    }

    /// Transitive closure of `edges`, each read as `(less, greater)`.
    pub fn from_edges(
        size: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut reach = vec![vec![false; size]; size];
        for (a, b) in edges {
            if a >= size || b >= size {
                return Err(Error::InvalidParameter(format!(
                    "order edge ({a}, {b}) out of range for {size} elements"
                )));
            }
            if a == b {
                continue;
            }
            reach[a][b] = true;
        }
        // Floyd–Warshall closure
        for m in 0..size {
            let via = reach[m].clone();
            for row in reach.iter_mut().filter(|r| r[m]) {
                row.iter_mut().zip(&via).for_each(|(x, &v)| *x |= v);
            }
        }
        let mut relation = BTreeSet::new();
        for (i, row) in reach.iter().enumerate() {
            if row[i] {
                return Err(Error::InvalidParameter(format!(
                    "order relation has a cycle through element {i}"
                )));
            }
            relation.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, &r)| r)
                    .map(|(j, _)| (i, j)),
            );
        }
        Ok(Self { size, relation })
    }

    /// Builds an order from labelled `(less, greater)` pairs.
    pub fn from_labels(spins: &SpinSpace, edges: &[(&str, &str)]) -> Result<Self> {
        let idx = |l: &str| {
            spins.index_of(l).ok_or_else(|| {
                Error::InvalidParameter(format!("unknown spin state {l:?} in order"))
            })
        };
        let pairs = edges
            .iter()
            .map(|&(a, b)| Ok((idx(a)?, idx(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(spins.len(), pairs)
    }

    /// Chain over the non-committed states sorted by `alpha`, linking
    /// consecutive states whose `alpha` strictly increases.
    pub fn alpha_chain(system: &SignallingSystem) -> Self {
        let mut states: Vec<usize> = (0..system.k())
            .filter(|&i| !system.is_committed(i))
            .collect();
        let alpha = system.alpha();
        states.sort_by(|&a, &b| alpha[a].total_cmp(&alpha[b]).then(a.cmp(&b)));
        let edges = states
            .windows(2)
            .filter(|w| alpha[w[0]] < alpha[w[1]])
            .map(|w| (w[0], w[1]));
        Self::from_edges(system.k(), edges).expect("alpha-increasing edges are acyclic")
    }

    /// The same relation on a larger ground set; new elements are incomparable.
    pub fn extended(&self, size: usize) -> Self {
        assert!(size >= self.size);
        Self {
            size,
            relation: self.relation.clone(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Strictly comparable pairs `(less, greater)`.
    pub fn relation(&self) -> &BTreeSet<(usize, usize)> {
        &self.relation
    }

    pub fn less(&self, a: usize, b: usize) -> bool {
        self.relation.contains(&(a, b))
    }

    pub fn less_eq(&self, a: usize, b: usize) -> bool {
        a == b || self.less(a, b)
    }

    pub fn is_trivial(&self) -> bool {
        self.relation.is_empty()
    }

    /// Covering pairs: `a < b` with nothing strictly between.
    pub fn hasse_pairs(&self) -> Vec<(usize, usize)> {
        self.relation
            .iter()
            .copied()
            .filter(|&(a, b)| !(0..self.size).any(|c| self.less(a, c) && self.less(c, b)))
            .collect()
    }

    pub fn hasse_edges(&self) -> GeneratorSet {
        GeneratorSet::from_pairs(self.size, self.hasse_pairs())
    }

    pub fn cone(&self) -> Cone {
        Cone::new(self.hasse_edges().matrix())
    }

    /// Labelled Hasse edges, `less → greater`.
    pub fn to_document(&self, spins: &SpinSpace) -> OrderDocument {
        OrderDocument {
            edges: self
                .hasse_pairs()
                .into_iter()
                .map(|(a, b)| [spins.label(a).to_string(), spins.label(b).to_string()])
                .collect(),
        }
    }

    /// Human-readable chain-like rendering such as `B≺AB, AB≺A`.
    pub fn describe(&self, spins: &SpinSpace) -> String {
        if self.is_trivial() {
            return "(trivial order)".into();
        }
        let pairs = self.hasse_pairs();
        if let Some(chain) = self.as_chain(&pairs) {
            return chain
                .iter()
                .map(|&i| spins.label(i))
                .collect::<Vec<_>>()
                .join("≺");
        }
        pairs
            .into_iter()
            .map(|(a, b)| format!("{}≺{}", spins.label(a), spins.label(b)))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// The covering pairs as one path from bottom to top, if they form one.
    fn as_chain(&self, pairs: &[(usize, usize)]) -> Option<Vec<usize>> {
        let mut next = vec![None; self.size];
        let mut has_pred = vec![false; self.size];
        for &(a, b) in pairs {
            if next[a].replace(b).is_some() || std::mem::replace(&mut has_pred[b], true) {
                return None;
            }
        }
        let start = pairs.iter().map(|p| p.0).find(|&a| !has_pred[a])?;
        let mut chain = vec![start];
        while let Some(n) = next[*chain.last().expect("nonempty")] {
            chain.push(n);
        }
        (chain.len() == pairs.len() + 1).then_some(chain)
    }
}

/// JSON order document: covering pairs as `[less, greater]` label pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderDocument {
    pub edges: Vec<[String; 2]>,
}

impl OrderDocument {
    pub fn into_order(&self, spins: &SpinSpace) -> Result<PartialOrder> {
        let edges: Vec<(&str, &str)> = self
            .edges
            .iter()
            .map(|[a, b]| (a.as_str(), b.as_str()))
            .collect();
        PartialOrder::from_labels(spins, &edges)
    }
}

/// Difference vectors `σ(greater) − σ(less)` of covering pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSet {
    dim: usize,
    pairs: Vec<(usize, usize)>,
}

impl GeneratorSet {
    pub fn from_pairs(dim: usize, pairs: Vec<(usize, usize)>) -> Self {
        Self { dim, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn vector(&self, g: usize) -> DVector<f64> {
        let (lo, hi) = self.pairs[g];
        let mut v = DVector::zeros(self.dim);
        v[hi] += 1.0;
        v[lo] -= 1.0;
        v
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|g| self.vector(g)).collect()
    }

    /// Generators as the columns of a `dim × |B|` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.dim, self.len());
        for (g, &(lo, hi)) in self.pairs.iter().enumerate() {
            e[(hi, g)] += 1.0;
            e[(lo, g)] -= 1.0;
        }
        e
    }
}

/// The cone of nonnegative combinations of a generator matrix's columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    generators: DMatrix<f64>,
    tol: f64,
}

/// Verdict of a cone membership query.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// `λ >= 0` with `‖E·λ − d‖∞ <= tol`, when a member.
    pub certificate: Option<DVector<f64>>,
    /// Phase-I distance; 0 for members.
    pub infeasibility: f64,
}

impl Cone {
    pub fn new(generators: DMatrix<f64>) -> Self {
        Self {
            generators,
            tol: CONE_TOL,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.generators.nrows()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Membership of a tangent-space vector `d` (components summing to 0).
    pub fn contains(&self, d: &DVector<f64>) -> Result<Membership> {
        if d.len() != self.dim() {
            return Err(Error::Dimension {
                what: "cone query",
                expected: self.dim(),
                got: d.len(),
            });
        }
        let s = d.sum();
        if s.abs() > self.tol {
            return Err(Error::InvalidInput(format!(
                "vector is not in the tangent space: components sum to {s:e}"
            )));
        }
        Ok(self.contains_unchecked(d))
    }

    /// Membership without the tangent-space precondition.
    pub fn contains_unchecked(&self, d: &DVector<f64>) -> Membership {
        let Feasibility {
            certificate,
            infeasibility,
        } = lp::nonneg_solve(&self.generators, d, self.tol);
        Membership {
            member: certificate.is_some(),
            certificate,
            infeasibility,
        }
    }
}

/// Outcome of comparing two macrostates under a cone order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Less,
    Greater,
    Equal,
    Incomparable,
}

/// Compares `n` with `n2`: `Less` iff `n2 − n` lies in the cone.
pub fn compare_in(cone: &Cone, n: &DVector<f64>, n2: &DVector<f64>) -> Comparison {
    if (n - n2).amax() <= EQUAL_TOL {
        return Comparison::Equal;
    }
    let up = cone.contains_unchecked(&(n2 - n)).member;
    let down = cone.contains_unchecked(&(n - n2)).member;
    match (up, down) {
        (true, true) => Comparison::Equal,
        (true, false) => Comparison::Less,
        (false, true) => Comparison::Greater,
        (false, false) => Comparison::Incomparable,
    }
}

pub fn compare(
    order: &PartialOrder,
    n: &crate::system::Macrostate,
    n2: &crate::system::Macrostate,
) -> Comparison {
    compare_in(&order.cone(), n.as_vector(), n2.as_vector())
}

/// Order on link types: `{X, Y} <= {X', Y'}` iff some matching of endpoints
/// is componentwise `<=` in the node order.
pub fn induced_link_order(order: &PartialOrder) -> PartialOrder {
    let idx = LinkIndex::new(order.size());
    let le = |a: usize, b: usize| order.less_eq(a, b);
    let mut edges = Vec::new();
    for (p, &(x, y)) in idx.pairs().iter().enumerate() {
        for (q, &(x2, y2)) in idx.pairs().iter().enumerate() {
            if p != q && ((le(x, x2) && le(y, y2)) || (le(x, y2) && le(y, x2))) {
                edges.push((p, q));
            }
        }
    }
    PartialOrder::from_edges(idx.len(), edges).expect("induced link order is acyclic")
}

/// Link generators `σ(X−Y') − σ(X−Y)` for every node covering pair `Y ⋖ Y'`
/// and every spin `X`, as `(from-link, to-link)` index pairs.
pub fn link_generators(order: &PartialOrder) -> GeneratorSet {
    let idx = LinkIndex::new(order.size());
    let mut pairs = BTreeSet::new();
    for (y, y2) in order.hasse_pairs() {
        for x in 0..order.size() {
            pairs.insert((idx.index(x, y), idx.index(x, y2)));
        }
    }
    GeneratorSet::from_pairs(idx.len(), pairs.into_iter().collect())
}

/// Every partial order whose comparable pairs strictly increase `alpha`,
/// deduplicated and sorted by Hasse-edge count.
pub fn enumerate_orders(system: &SignallingSystem, max_k: usize) -> Result<Vec<PartialOrder>> {
    let k = system.k();
    if k > max_k {
        return Err(Error::Capacity(format!(
            "{k} spin states exceed the enumeration cap of {max_k}; supply an explicit order"
        )));
    }
    let candidates = alpha_consistent_pairs(system);
    let m = candidates.len();
    let mut seen = BTreeSet::new();
    for mask in 0u64..(1u64 << m) {
        let edges = (0..m)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| candidates[i]);
        seen.insert(
            PartialOrder::from_edges(k, edges).expect("alpha-increasing edges are acyclic"),
        );
    }
    let mut orders: Vec<PartialOrder> = seen.into_iter().collect();
    orders.sort_by_cached_key(|o| (o.hasse_pairs().len(), o.relation().len(), o.clone()));
    Ok(orders)
}

/// Candidate covering edges allowed by strict alpha monotonicity.
pub fn alpha_consistent_pairs(system: &SignallingSystem) -> Vec<(usize, usize)> {
    let alpha = system.alpha();
    (0..system.k())
        .flat_map(|a| (0..system.k()).map(move |b| (a, b)))
        .filter(|&(a, b)| alpha[a] < alpha[b])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{make_counterexample, make_kng, make_long, Macrostate};

    fn long_chain() -> PartialOrder {
        PartialOrder::from_labels(make_long().spins(), &[("B", "AB"), ("AB", "A")]).unwrap()
    }

    #[test]
    fn chain_generators() {
        let g = long_chain().hasse_edges();
        let v: Vec<Vec<f64>> = g.vectors().iter().map(|v| v.as_slice().to_vec()).collect();
        assert_eq!(v.len(), 2);
        assert!(v.contains(&vec![1.0, -1.0, 0.0]));
        assert!(v.contains(&vec![0.0, 1.0, -1.0]));
        // closure includes B < A but it is not a covering pair
        assert!(long_chain().less(2, 0));
    }

    #[test]
    fn empty_and_kng() {
        assert!(PartialOrder::empty(3).hasse_edges().is_empty());
        let s = make_kng(3).unwrap();
        let g = PartialOrder::alpha_chain(&s).hasse_edges();
        assert_eq!(g.pairs(), &[(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn cycles_rejected() {
        assert!(PartialOrder::from_edges(3, [(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(PartialOrder::from_edges(2, [(0, 5)]).is_err());
    }

    #[test]
    fn reduction_then_closure_roundtrip() {
        let o = PartialOrder::from_edges(5, [(0, 1), (1, 2), (0, 3), (3, 2), (2, 4)]).unwrap();
        let back = PartialOrder::from_edges(5, o.hasse_pairs()).unwrap();
        assert_eq!(back, o);
    }

    #[test]
    fn cone_membership_examples() {
        let cone = long_chain().cone();
        let m = cone
            .contains(&DVector::from_vec(vec![1.0, -1.0, 0.0]))
            .unwrap();
        assert!(m.member);
        let m = cone
            .contains(&DVector::from_vec(vec![1.0, 0.0, -1.0]))
            .unwrap();
        let l = m.certificate.unwrap();
        assert!((cone.generators() * &l - DVector::from_vec(vec![1.0, 0.0, -1.0])).amax() <= 1e-9);
        assert!(
            !cone
                .contains(&DVector::from_vec(vec![-1.0, 1.0, 0.0]))
                .unwrap()
                .member
        );
        assert!(matches!(
            cone.contains(&DVector::from_vec(vec![1.0, 0.0, 0.0])),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn compare_examples() {
        let o = long_chain();
        let a = Macrostate::pure(3, 0);
        let b = Macrostate::pure(3, 2);
        assert_eq!(compare(&o, &b, &a), Comparison::Less);
        assert_eq!(compare(&o, &a, &b), Comparison::Greater);
        assert_eq!(compare(&o, &a, &a), Comparison::Equal);
        let mid = Macrostate::from_slice(&[0.5, 0.0, 0.5]).unwrap();
        let ab = Macrostate::pure(3, 1);
        assert_eq!(compare(&o, &mid, &ab), Comparison::Incomparable);
    }

    #[test]
    fn incomparable_by_exhaustive_lambda_search() {
        // (0,1,0) - (0.5,0,0.5) = (-0.5, 1, -0.5) = λ1(1,-1,0) + λ2(0,1,-1)
        // forces λ1 = -0.5, so no nonnegative solution; the reverse forces λ2 = -0.5
        let e = long_chain().hasse_edges().matrix();
        let d = DVector::from_vec(vec![-0.5, 1.0, -0.5]);
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let l = DVector::from_vec(vec![i as f64 / 100.0, j as f64 / 100.0]);
                let img = &e * l;
                best = best.min((&img - &d).amax()).min((&img + &d).amax());
            }
        }
        assert!(best >= 0.5 - 1e-12);
    }

    #[test]
    fn describe_chains_and_forests() {
        let spins = SpinSpace::new(["A", "AB", "B"]).unwrap();
        let chain = PartialOrder::from_edges(3, [(2, 1), (1, 0)]).unwrap();
        assert_eq!(chain.describe(&spins), "B≺AB≺A");
        let vee = PartialOrder::from_edges(3, [(2, 1), (2, 0)]).unwrap();
        assert_eq!(vee.describe(&spins), "B≺A, B≺AB");
        assert_eq!(PartialOrder::empty(3).describe(&spins), "(trivial order)");
    }

    #[test]
    fn link_order_of_long() {
        let o = long_chain();
        let link = induced_link_order(&o);
        let hasse = link.hasse_edges();
        assert_eq!(hasse.len(), 6);
        let idx = LinkIndex::new(3);
        // B-B below A-A
        assert!(link.less(idx.index(2, 2), idx.index(0, 0)));
        // A-B and AB-AB incomparable
        let (ab, abab) = (idx.index(0, 2), idx.index(1, 1));
        assert!(!link.less(ab, abab) && !link.less(abab, ab));
        // generator formula agrees with covering pairs of the induced order
        let mut from_formula = link_generators(&o).pairs().to_vec();
        let mut from_hasse = hasse.pairs().to_vec();
        from_formula.sort();
        from_hasse.sort();
        assert_eq!(from_formula, from_hasse);
        assert!(induced_link_order(&PartialOrder::empty(3)).is_trivial());
    }

    #[test]
    fn link_generators_match_hasse_for_kng() {
        for k in 1..=4 {
            let o = PartialOrder::alpha_chain(&make_kng(k).unwrap());
            let mut a = link_generators(&o).pairs().to_vec();
            let mut b = induced_link_order(&o).hasse_pairs();
            a.sort();
            b.sort();
            assert_eq!(a, b, "K = {k}");
        }
    }

    #[test]
    fn enumeration() {
        let long = make_long();
        let orders = enumerate_orders(&long, DEFAULT_MAX_K).unwrap();
        assert!(orders.contains(&long_chain()));
        assert!(orders[0].is_trivial());

        let mut flat = make_long();
        flat = crate::system::SignallingSystem::checked(
            flat.spins().clone(),
            DVector::from_element(3, 0.5),
            flat.g_a().clone(),
            flat.g_b().clone(),
            Default::default(),
        )
        .unwrap();
        assert_eq!(
            enumerate_orders(&flat, 6).unwrap(),
            vec![PartialOrder::empty(3)]
        );

        let c = make_counterexample();
        let cand: BTreeSet<_> = alpha_consistent_pairs(&c).into_iter().collect();
        assert_eq!(cand, BTreeSet::from([(2, 0), (2, 1), (1, 0)]));

        let big = make_kng(7).unwrap();
        assert!(matches!(enumerate_orders(&big, 6), Err(Error::Capacity(_))));
    }
}
