//! Monotonicity certificates for complete-graph signalling dynamics.
//!
//! A system is certified monotone under an order when
//! (a) `gB·σ(γ) ≺ gA·σ(γ)` for every state,
//! (b) `α` strictly increases along the order, and
//! (c) `gA` and `gB` both preserve the order.
//! These conditions are sufficient, not necessary. Checks run on covering
//! pairs only; cone addition extends them to every comparable pair.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complete::message_prob;
use crate::error::Result;
use crate::order::{enumerate_orders, Cone, OrderDocument, PartialOrder};
use crate::sample;
use crate::system::{Message, SignallingSystem};

/// Lower bound on every component of a sampled interior macrostate.
pub const SAMPLE_FLOOR: f64 = 1e-3;

const SUFFICIENT_NOTE: &str = "the three conditions are sufficient for monotonicity, not necessary";
const NO_ORDER_NOTE: &str = "no alpha-consistent order satisfies all three sufficient conditions; \
                             this does not prove the flow is non-monotone";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    CertifiedMonotone,
    NotCertified,
    NoOrderExists,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    A,
    B,
    C,
}

/// One elementary test inside a condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub witness: String,
    pub pass: bool,
    /// For (b): `α(greater) − α(less)`. For cone tests: minus the phase-I
    /// distance of the difference vector from the cone (0 when it is inside).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub name: Condition,
    pub pass: bool,
    /// First failing check, or the tightest passing one.
    pub witness: Option<String>,
    pub margin: f64,
    pub checks: Vec<Check>,
}

impl ConditionResult {
    fn from_checks(name: Condition, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        let pick = checks
            .iter()
            .find(|c| !c.pass)
            .or_else(|| checks.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)));
        Self {
            name,
            pass,
            witness: pick.map(|c| c.witness.clone()),
            margin: pick.map_or(f64::INFINITY, |c| c.margin),
            checks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotonicityReport {
    pub verdict: Verdict,
    pub order: Option<OrderDocument>,
    pub conditions: Vec<ConditionResult>,
    pub note: String,
    /// Number of candidate orders examined by a search, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates_examined: Option<usize>,
}

impl MonotonicityReport {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedMonotone
    }
}

fn cone_check(cone: &Cone, d: &DVector<f64>, witness: String) -> Check {
    let m = cone.contains_unchecked(d);
    Check {
        witness,
        pass: m.member,
        margin: -m.infeasibility,
    }
}

/// (a): `gA·σ(γ) − gB·σ(γ)` lies in the cone for every state `γ`.
pub fn check_condition_a(system: &SignallingSystem, order: &PartialOrder) -> ConditionResult {
    let cone = order.cone();
    let checks = (0..system.k())
        .map(|j| {
            let d = system.g_a().column(j) - system.g_b().column(j);
            cone_check(
                &cone,
                &d,
                format!("gB·σ({0}) ≺ gA·σ({0})", system.labels()[j]),
            )
        })
        .collect();
    ConditionResult::from_checks(Condition::A, checks)
}

/// (b): `α(less) < α(greater)` on every covering pair.
pub fn check_condition_b(system: &SignallingSystem, order: &PartialOrder) -> ConditionResult {
    let alpha = system.alpha();
    let labels = system.labels();
    let checks = order
        .hasse_pairs()
        .into_iter()
        .map(|(lo, hi)| {
            let margin = alpha[hi] - alpha[lo];
            Check {
                witness: format!("α({}) < α({})", labels[lo], labels[hi]),
                pass: margin > 0.0,
                margin,
            }
        })
        .collect();
    ConditionResult::from_checks(Condition::B, checks)
}

/// (c): `G·σ(less) ≺ G·σ(greater)` for `G ∈ {gA, gB}` on every covering pair.
pub fn check_condition_c(system: &SignallingSystem, order: &PartialOrder) -> ConditionResult {
    let cone = order.cone();
    let labels = system.labels();
    let mut checks = Vec::new();
    for (lo, hi) in order.hasse_pairs() {
        for m in [Message::A, Message::B] {
            let g = system.g(m);
            let d = g.column(hi) - g.column(lo);
            checks.push(cone_check(
                &cone,
                &d,
                format!("g{m}·σ({}) ≺ g{m}·σ({})", labels[lo], labels[hi]),
            ));
        }
    }
    ConditionResult::from_checks(Condition::C, checks)
}

pub fn certify(system: &SignallingSystem, order: &PartialOrder) -> MonotonicityReport {
    let conditions = vec![
        check_condition_a(system, order),
        check_condition_b(system, order),
        check_condition_c(system, order),
    ];
    let verdict = if conditions.iter().all(|c| c.pass) {
        Verdict::CertifiedMonotone
    } else {
        Verdict::NotCertified
    };
    MonotonicityReport {
        verdict,
        order: Some(order.to_document(system.spins())),
        conditions,
        note: SUFFICIENT_NOTE.into(),
        candidates_examined: None,
    }
}

/// Searches the alpha-consistent orders for a nontrivial certificate.
pub fn find_order(system: &SignallingSystem, max_k: usize) -> Result<MonotonicityReport> {
    let orders = enumerate_orders(system, max_k)?;
    let examined = orders.len();
    let hit = orders
        .par_iter()
        .filter(|o| !o.is_trivial())
        .map(|o| certify(system, o))
        .find_first(|r| r.is_certified());
    Ok(match hit {
        Some(mut r) => {
            r.candidates_examined = Some(examined);
            r
        }
        None => MonotonicityReport {
            verdict: Verdict::NoOrderExists,
            order: None,
            conditions: Vec::new(),
            note: NO_ORDER_NOTE.into(),
            candidates_examined: Some(examined),
        },
    })
}

/// Directional derivative of the complete-graph drift at `n` along `e`:
/// `(p·gA + (1 − p)·gB − I)·e + (αᵀe)·(gA − gB)·n`.
pub fn directional_derivative(
    system: &SignallingSystem,
    n: &DVector<f64>,
    e: &DVector<f64>,
) -> DVector<f64> {
    let p = message_prob(system, n);
    let q = system.g_a() * p + system.g_b() * (1.0 - p);
    &q * e - e + (system.g_a() - system.g_b()) * n * system.alpha().dot(e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(
    tag = "result",
    rename_all = "snake_case",
    rename_all_fields = "camelCase"
)]
pub enum TypeCOutcome {
    Pass {
        samples: usize,
    },
    Counterexample {
        point: Vec<f64>,
        /// Index of the generator `e_k` (into the order's covering pairs).
        direction: usize,
        direction_label: String,
        derivative: Vec<f64>,
        infeasibility: f64,
    },
}

impl TypeCOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, TypeCOutcome::Pass { .. })
    }
}

/// Interior macrostates used by [`type_c_sampled`].
pub fn type_c_samples(k: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sample::interior(k, SAMPLE_FLOOR, &mut rng))
        .collect()
}

/// Sampled falsifier: at each interior sample and each generator `e_k`,
/// asks whether the directional derivative along `e_k` can be written as
/// `Σ b_i e_i` with `b_i >= 0` for `i ≠ k` (`b_k` free).
pub fn type_c_sampled(
    system: &SignallingSystem,
    order: &PartialOrder,
    sample_count: usize,
    seed: u64,
) -> TypeCOutcome {
    let gens = order.hasse_edges();
    let e = gens.matrix();
    let b = e.ncols();
    let samples = type_c_samples(system.k(), sample_count.max(1), seed);
    // b_k is free: append −e_k as an extra nonnegative column
    let cones: Vec<Cone> = (0..b)
        .map(|k| {
            let mut ext = DMatrix::zeros(e.nrows(), b + 1);
            ext.columns_mut(0, b).copy_from(&e);
            ext.set_column(b, &(-e.column(k)));
            Cone::new(ext)
        })
        .collect();
    let found = samples
        .par_iter()
        .enumerate()
        .flat_map_iter(|(s, n)| (0..b).map(move |k| (s, n, k)))
        .map(|(s, n, k)| {
            let d = directional_derivative(system, n, &e.column(k).into_owned());
            let m = cones[k].contains_unchecked(&d);
            (s, n, k, d, m)
        })
        .find_first(|(.., m)| !m.member);
    match found {
        None => TypeCOutcome::Pass {
            samples: samples.len(),
        },
        Some((_, n, k, d, m)) => {
            let (lo, hi) = gens.pairs()[k];
            TypeCOutcome::Counterexample {
                point: n.iter().copied().collect(),
                direction: k,
                direction_label: format!("σ({}) − σ({})", system.labels()[hi], system.labels()[lo]),
                derivative: d.iter().copied().collect(),
                infeasibility: m.infeasibility,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::DEFAULT_MAX_K;
    use crate::system::{make_counterexample, make_kng, make_long};

    fn chain(s: &SignallingSystem) -> PartialOrder {
        PartialOrder::alpha_chain(s)
    }

    #[test]
    fn long_chain_certified() {
        let s = make_long();
        let r = certify(&s, &chain(&s));
        assert_eq!(r.verdict, Verdict::CertifiedMonotone);
        let b = &r.conditions[1];
        assert_eq!(b.checks.len(), 2);
        assert!(b.checks.iter().all(|c| c.margin == 0.5));
        assert_eq!(r.conditions[0].checks.len(), 3);
    }

    #[test]
    fn kng_margins() {
        let s = make_kng(4).unwrap();
        let r = certify(&s, &chain(&s));
        assert!(r.is_certified());
        assert!(r.conditions[1]
            .checks
            .iter()
            .all(|c| (c.margin - 0.25).abs() < 1e-15));
    }

    #[test]
    fn equal_alpha_edge_fails_b() {
        let s = make_long();
        let o = PartialOrder::from_labels(s.spins(), &[("A", "B")]).unwrap();
        // any edge whose alpha does not strictly increase fails (b)
        let r = check_condition_b(&s, &o);
        assert!(!r.pass);
        let flat = SignallingSystem::checked(
            s.spins().clone(),
            DVector::from_element(3, 0.5),
            s.g_a().clone(),
            s.g_b().clone(),
            Default::default(),
        )
        .unwrap();
        let r = check_condition_b(&flat, &o);
        assert!(!r.pass);
        assert_eq!(r.margin, 0.0);
    }

    #[test]
    fn counterexample_condition_c_fails_on_top_edge() {
        let s = make_counterexample();
        let o = PartialOrder::from_labels(s.spins(), &[("AB", "A")]).unwrap();
        let r = check_condition_c(&s, &o);
        assert!(!r.pass);
        let failing: Vec<_> = r.checks.iter().filter(|c| !c.pass).collect();
        assert_eq!(failing.len(), 1);
        assert!(failing[0].witness.starts_with("gB"));
        // gB·σ(A) − gB·σ(AB) = σ(B) − σ(AB)
        let d = s.g_b().column(0) - s.g_b().column(1);
        assert_eq!(d.as_slice(), &[0.0, -1.0, 1.0]);
    }

    #[test]
    fn committed_zero_difference_passes_a() {
        let s = make_long()
            .with_committed(&[("A", 1.0), ("B", 0.0)])
            .unwrap();
        let o = chain(&make_long()).extended(5);
        let a = check_condition_a(&s, &o);
        assert!(a.pass);
        assert!(certify(&s, &o).is_certified());
    }

    #[test]
    fn search_results() {
        let r = find_order(&make_long(), DEFAULT_MAX_K).unwrap();
        assert!(r.is_certified());
        let mut edges = r.order.unwrap().edges;
        edges.sort();
        assert_eq!(
            edges,
            vec![["AB".to_string(), "A".into()], ["B".into(), "AB".into()]]
        );

        let r = find_order(&make_counterexample(), DEFAULT_MAX_K).unwrap();
        assert_eq!(r.verdict, Verdict::NoOrderExists);
        assert!(r.note.contains("does not prove"));
    }

    #[test]
    fn kng5_full_chain() {
        let s = make_kng(5).unwrap();
        let r = find_order(&s, DEFAULT_MAX_K).unwrap();
        assert!(r.is_certified());
        assert_eq!(r.order.unwrap().edges.len(), 5);
    }

    #[test]
    fn samples_stay_interior() {
        for n in type_c_samples(5, 500, 11) {
            assert!(n.min() >= SAMPLE_FLOOR);
        }
    }

    #[test]
    fn type_c_long_and_counterexample() {
        let s = make_long();
        assert!(type_c_sampled(&s, &chain(&s), 1000, 1).passed());
        let c = make_counterexample();
        let o = chain(&c);
        assert!(!type_c_sampled(&c, &o, 1000, 1).passed());
    }
}
