//! Mean-field dynamics on the complete graph.
//!
//! With `p = αᵀn` the probability that a random speaker says A, the
//! macrostate drifts as `dn/dt = [p·gA + (1 − p)·gB − I]·n` (one time unit is
//! `N` interactions).

use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ode::{self, IntegrateOptions, Trajectory};
use crate::order::{Cone, PartialOrder, CONE_TOL};
use crate::sample;
use crate::system::{Macrostate, SignallingSystem};

/// Maximum sup-norm drift accepted at an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Eigenvalues with `|Re| <=` this are treated as zero.
pub const MARGINAL_TOL: f64 = 1e-8;
/// Two Newton limits closer than this (sup-norm) are the same equilibrium.
pub const DEDUP_TOL: f64 = 1e-6;

/// Probability that a uniformly chosen speaker emits A.
pub fn message_prob(system: &SignallingSystem, n: &DVector<f64>) -> f64 {
    system.alpha().dot(n)
}

/// `p·gA + (1 − p)·gB`.
pub fn mixed_transition(system: &SignallingSystem, p: f64) -> DMatrix<f64> {
    system.g_a() * p + system.g_b() * (1.0 - p)
}

pub fn drift(system: &SignallingSystem, n: &DVector<f64>) -> DVector<f64> {
    let p = message_prob(system, n);
    let mut f = system.g_b() * n;
    f.gemv(p, system.g_a(), n, 1.0 - p);
    f -= n;
    f
}

/// `J = p·gA + (1 − p)·gB − I + (gA − gB)·n·αᵀ`.
pub fn jacobian(system: &SignallingSystem, n: &DVector<f64>) -> DMatrix<f64> {
    let k = system.k();
    let p = message_prob(system, n);
    let diff = system.g_a() - system.g_b();
    mixed_transition(system, p) - DMatrix::identity(k, k) + (diff * n) * system.alpha().transpose()
}

pub fn integrate(
    system: &SignallingSystem,
    n0: &Macrostate,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if n0.len() != system.k() {
        return Err(Error::Dimension {
            what: "initial macrostate",
            expected: system.k(),
            got: n0.len(),
        });
    }
    ode::integrate_on_simplex(|n| drift(system, n), n0.as_vector().clone(), opts)
}

/// Orthonormal basis (as columns) of the vectors that sum to zero and vanish
/// outside `free`.
pub fn tangent_basis(k: usize, free: &[usize]) -> DMatrix<f64> {
    if free.len() < 2 {
        return DMatrix::zeros(k, 0);
    }
    let raw = DMatrix::from_fn(k, free.len() - 1, |i, c| {
        if i == free[0] {
            1.0
        } else if i == free[c + 1] {
            -1.0
        } else {
            0.0
        }
    });
    let mut q = raw.qr().q();
    // Householder reflections leave round-off in the fixed rows
    for i in (0..k).filter(|i| !free.contains(i)) {
        q.row_mut(i).fill(0.0);
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    Marginal,
}

impl Stability {
    pub fn classify(eigenvalues: &[Complex<f64>]) -> Self {
        if eigenvalues.iter().any(|e| e.re.abs() <= MARGINAL_TOL) {
            Stability::Marginal
        } else if eigenvalues.iter().all(|e| e.re < 0.0) {
            Stability::Stable
        } else if eigenvalues.iter().all(|e| e.re > 0.0) {
            Stability::Unstable
        } else {
            Stability::Saddle
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    #[serde(serialize_with = "ser_vec")]
    pub state: DVector<f64>,
    /// Sup-norm of the drift at `state`.
    pub residual: f64,
    pub classification: Stability,
    /// Eigenvalues of the Jacobian restricted to the (slice) tangent space.
    #[serde(serialize_with = "ser_complex")]
    pub eigenvalues: Vec<Complex<f64>>,
}

impl Equilibrium {
    pub fn has_unstable_direction(&self) -> bool {
        self.eigenvalues.iter().any(|e| e.re > MARGINAL_TOL)
    }
}

fn ser_vec<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

fn ser_complex<S: Serializer>(v: &[Complex<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|c| [c.re, c.im]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EquilibriumSearch {
    pub equilibria: Vec<Equilibrium>,
    /// Seeds whose Newton iteration failed or left the simplex.
    pub dropped_seeds: usize,
    pub seeds: usize,
}

/// Equilibria of the complete-graph drift on the whole simplex.
///
/// Committed states, if any, are held at zero; use
/// [`find_equilibria_on_slice`] to fix their fractions.
pub fn find_equilibria(
    system: &SignallingSystem,
    grid_density: usize,
) -> Result<EquilibriumSearch> {
    let fixed: Vec<(usize, f64)> = system.committed().iter().map(|&c| (c, 0.0)).collect();
    find_equilibria_on_slice(system, &fixed, grid_density)
}

/// Equilibria on the slice where the committed states listed in `fixed`
/// carry the given fractions. Committed fractions are conserved by the flow.
pub fn find_equilibria_on_slice(
    system: &SignallingSystem,
    fixed: &[(usize, f64)],
    grid_density: usize,
) -> Result<EquilibriumSearch> {
    if grid_density < 2 {
        return Err(Error::InvalidParameter("grid density must be >= 2".into()));
    }
    let k = system.k();
    let mut base = DVector::zeros(k);
    for &(c, q) in fixed {
        if c >= k || !system.is_committed(c) {
            return Err(Error::InvalidParameter(format!(
                "state {c} is not committed and cannot be held fixed"
            )));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "fixed fraction {q} outside [0,1]"
            )));
        }
        base[c] = q;
    }
    let fixed_mass = base.sum();
    if fixed_mass > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter("fixed fractions exceed 1".into()));
    }
    let free: Vec<usize> = (0..k)
        .filter(|i| !fixed.iter().any(|&(c, _)| c == *i))
        .collect();
    let mass = 1.0 - fixed_mass;
    let basis = tangent_basis(k, &free);

    let seeds = simplex_grid(free.len(), grid_density);
    let n_seeds = seeds.len();
    let results: Vec<Option<DVector<f64>>> = seeds
        .into_par_iter()
        .map(|c| {
            let mut n = base.clone();
            for (slot, &i) in free.iter().enumerate() {
                n[i] = mass * c[slot] as f64 / grid_density as f64;
            }
            newton(system, n, &basis, &free, mass)
        })
        .collect();

    let mut dropped = 0;
    let mut found: Vec<DVector<f64>> = Vec::new();
    for r in results {
        match r {
            None => dropped += 1,
            Some(n) => {
                if !found.iter().any(|f| (f - &n).amax() <= DEDUP_TOL) {
                    found.push(n);
                }
            }
        }
    }
    found.sort_by(|a, b| {
        b.iter()
            .zip(a.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let equilibria = found
        .into_iter()
        .map(|n| {
            let jt = basis.transpose() * jacobian(system, &n) * &basis;
            let eigenvalues: Vec<Complex<f64>> = if jt.nrows() == 0 {
                Vec::new()
            } else {
                jt.complex_eigenvalues().iter().copied().collect()
            };
            Equilibrium {
                residual: drift(system, &n).amax(),
                classification: Stability::classify(&eigenvalues),
                eigenvalues,
                state: n,
            }
        })
        .collect();
    Ok(EquilibriumSearch {
        equilibria,
        dropped_seeds: dropped,
        seeds: n_seeds,
    })
}

/// All compositions of `density` into `parts` nonnegative integers.
fn simplex_grid(parts: usize, density: usize) -> Vec<Vec<usize>> {
    fn rec(parts: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(parts - 1, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(parts, density, &mut Vec::new(), &mut out);
    }
    out
}

fn newton(
    system: &SignallingSystem,
    mut n: DVector<f64>,
    basis: &DMatrix<f64>,
    free: &[usize],
    mass: f64,
) -> Option<DVector<f64>> {
    if basis.ncols() > 0 {
        for _ in 0..100 {
            let f = drift(system, &n);
            if f.amax() <= 1e-15 {
                break;
            }
            let jt = basis.transpose() * jacobian(system, &n) * basis;
            let rhs = -(basis.transpose() * &f);
            let step = jt.lu().solve(&rhs)?;
            n += basis * &step;
            if !n.iter().all(|x| x.is_finite()) || n.amax() > 1e3 {
                return None;
            }
            if step.amax() <= 1e-16 {
                break;
            }
        }
    }
    if free.iter().any(|&i| n[i] < -1e-9) {
        return None;
    }
    let s: f64 = free.iter().map(|&i| n[i].max(0.0)).sum();
    if s > 0.0 {
        for &i in free {
            n[i] = n[i].max(0.0) * mass / s;
        }
    }
    (drift(system, &n).amax() <= EQUILIBRIUM_TOL).then_some(n)
}

/// Terminal-state class of a committed-fraction run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutcome {
    /// Target opinion (including its committed state) holds more than the threshold.
    TargetDominant,
    /// Opposing consensus state holds a strict majority.
    OpposingDominant,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub dt: f64,
    pub t_end: f64,
    pub threshold: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 200.0,
            threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepPoint {
    pub q: f64,
    pub outcome: SweepOutcome,
    pub target_mass: f64,
    pub opposing_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub qc: f64,
    pub bracket: [f64; 2],
    pub classifications: Vec<SweepPoint>,
    pub committed: String,
    pub target: String,
    pub opposing: String,
}

/// The free-state opinion a committed state backs and the one it opposes:
/// the non-committed states with the closest and the most distant `alpha`.
pub fn committed_roles(system: &SignallingSystem, committed: usize) -> Result<(usize, usize)> {
    if committed >= system.k() || !system.is_committed(committed) {
        return Err(Error::InvalidParameter(format!(
            "state {committed} is not a committed state"
        )));
    }
    let a = system.alpha()[committed];
    let free: Vec<usize> = (0..system.k())
        .filter(|&i| !system.is_committed(i))
        .collect();
    if free.is_empty() {
        return Err(Error::InvalidParameter("system has no free states".into()));
    }
    let dist = |i: &usize| (system.alpha()[*i] - a).abs();
    let target = *free
        .iter()
        .min_by(|x, y| dist(x).total_cmp(&dist(y)).then(x.cmp(y)))
        .expect("nonempty");
    let opposing = *free
        .iter()
        .max_by(|x, y| dist(x).total_cmp(&dist(y)).then(y.cmp(x)))
        .expect("nonempty");
    Ok((target, opposing))
}

/// Integrates from the opposing consensus with fraction `q` committed and
/// classifies the terminal state.
pub fn committed_outcome(
    system: &SignallingSystem,
    committed: usize,
    q: f64,
    opts: &SweepOptions,
) -> Result<SweepPoint> {
    let (target, opposing) = committed_roles(system, committed)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "committed fraction {q} outside [0,1]"
        )));
    }
    let mut n0 = DVector::zeros(system.k());
    n0[committed] = q;
    n0[opposing] += 1.0 - q;
    let traj = integrate(
        system,
        &Macrostate::new(n0)?,
        &IntegrateOptions::new(opts.t_end, opts.dt).record_every(opts.t_end),
    )?;
    let last = traj.last().expect("nonempty trajectory");
    let target_mass = last[target] + last[committed];
    let opposing_mass = last[opposing];
    let outcome = if target_mass > opts.threshold {
        SweepOutcome::TargetDominant
    } else if opposing_mass > 0.5 {
        SweepOutcome::OpposingDominant
    } else {
        SweepOutcome::Mixed
    };
    Ok(SweepPoint {
        q,
        outcome,
        target_mass,
        opposing_mass,
    })
}

/// Bisection for the smallest committed fraction that tips the population
/// from the opposing consensus to target dominance.
pub fn sweep_committed(
    system: &SignallingSystem,
    committed: usize,
    q_low: f64,
    q_high: f64,
    tol: f64,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if !(0.0 <= q_low && q_low < q_high && q_high <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= qLow < qHigh <= 1, got [{q_low}, {q_high}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(
            "bisection tolerance must be > 0".into(),
        ));
    }
    let (target, opposing) = committed_roles(system, committed)?;
    let tips = |p: &SweepPoint| p.outcome == SweepOutcome::TargetDominant;
    let lo_pt = committed_outcome(system, committed, q_low, opts)?;
    let hi_pt = committed_outcome(system, committed, q_high, opts)?;
    if tips(&lo_pt) == tips(&hi_pt) {
        return Err(Error::NoTransition {
            low: q_low,
            high: q_high,
            class: if tips(&lo_pt) {
                "target-dominant"
            } else {
                "not target-dominant"
            }
            .into(),
        });
    }
    let low_tips = tips(&lo_pt);
    let (mut lo, mut hi) = (q_low, q_high);
    let mut classifications = vec![lo_pt, hi_pt];
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let pt = committed_outcome(system, committed, mid, opts)?;
        if tips(&pt) == low_tips {
            lo = mid;
        } else {
            hi = mid;
        }
        classifications.push(pt);
    }
    let labels = system.labels();
    Ok(SweepResult {
        qc: 0.5 * (lo + hi),
        bracket: [lo, hi],
        classifications,
        committed: labels[committed].clone(),
        target: labels[target].clone(),
        opposing: labels[opposing].clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessOptions {
    pub pairs: usize,
    pub t_end: f64,
    pub checkpoints: usize,
    pub seed: u64,
    pub dt: f64,
}

impl HarnessOptions {
    pub fn new(pairs: usize, t_end: f64, checkpoints: usize, seed: u64) -> Self {
        Self {
            pairs,
            t_end,
            checkpoints,
            seed,
            dt: 1e-3,
        }
    }
}

/// An ordered pair whose images stopped being ordered.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderViolation {
    pub pair: usize,
    pub time: f64,
    /// Phase-I distance of `φ_t(n') − φ_t(n)` from the cone.
    pub infeasibility: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Checks `n ≺ n' ⇒ φ_t(n) ≺ φ_t(n')` at `checkpoints` evenly spaced times
/// for `pairs` random ordered pairs under an arbitrary flow.
pub fn order_harness_with<F>(
    dim: usize,
    cone: &Cone,
    flow: F,
    opts: &HarnessOptions,
) -> Result<Vec<OrderViolation>>
where
    F: Fn(&DVector<f64>, &IntegrateOptions) -> Result<Trajectory> + Sync,
{
    if opts.checkpoints == 0 {
        return Err(Error::InvalidParameter(
            "need at least one checkpoint".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = (0..opts.pairs)
        .map(|_| {
            let n = sample::dirichlet(dim, &mut rng);
            let n2 = sample::ordered_above(&n, cone.generators(), &mut rng);
            (n, n2)
        })
        .collect();
    let iopts = IntegrateOptions::new(opts.t_end, opts.dt)
        .record_every(opts.t_end / opts.checkpoints as f64);
    let per_pair: Vec<Result<Vec<OrderViolation>>> = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, (n, n2))| {
            let lo = flow(n, &iopts)?;
            let hi = flow(n2, &iopts)?;
            let mut out = Vec::new();
            for ((t, a), b) in lo.times.iter().zip(&lo.states).zip(&hi.states) {
                let m = cone.contains_unchecked(&(b - a));
                if !m.member {
                    out.push(OrderViolation {
                        pair: idx,
                        time: *t,
                        infeasibility: m.infeasibility,
                        lower: a.iter().copied().collect(),
                        upper: b.iter().copied().collect(),
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_pair {
        all.extend(r?);
    }
    Ok(all)
}

/// Empirical order-preservation check for the complete-graph flow.
pub fn order_harness(
    system: &SignallingSystem,
    order: &PartialOrder,
    opts: &HarnessOptions,
) -> Result<Vec<OrderViolation>> {
    if order.size() != system.k() {
        return Err(Error::Dimension {
            what: "order",
            expected: system.k(),
            got: order.size(),
        });
    }
    let cone = order.cone().with_tolerance(CONE_TOL);
    order_harness_with(
        system.k(),
        &cone,
        |n, o| ode::integrate_on_simplex(|x| drift(system, x), n.clone(), o),
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{make_kng, make_long};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn message_probabilities() {
        let s = make_long();
        assert_eq!(message_prob(&s, &v(&[1.0, 0.0, 0.0])), 1.0);
        assert!((message_prob(&s, &v(&[1.0 / 3.0; 3])) - 0.5).abs() < 1e-15);
        assert_eq!(message_prob(&s, &v(&[0.0, 0.0, 1.0])), 0.0);
    }

    #[test]
    fn drift_examples() {
        let s = make_long();
        assert_eq!(drift(&s, &v(&[1.0, 0.0, 0.0])).amax(), 0.0);
        assert!(drift(&s, &v(&[1.0 / 3.0; 3])).amax() < 1e-15);
        // f_A = p·n_AB − (1 − p)·n_A with p = 0.6
        let f = drift(&s, &v(&[0.6, 0.0, 0.4]));
        assert!((f[0] + 0.24).abs() < 1e-15);
        assert!(f.sum().abs() < 1e-15);
    }

    #[test]
    fn jacobian_conserves_mass() {
        let s = make_kng(4).unwrap();
        let j = jacobian(&s, &DVector::from_element(5, 0.2));
        for c in j.column_iter() {
            assert!(c.sum().abs() < 1e-14);
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let p = tangent_basis(5, &[0, 2, 3]);
        assert_eq!(p.shape(), (5, 2));
        let g = p.transpose() * &p;
        assert!((g - DMatrix::identity(2, 2)).amax() < 1e-14);
        for c in p.column_iter() {
            assert!(c.sum().abs() < 1e-14);
            assert_eq!(c[1], 0.0);
            assert_eq!(c[4], 0.0);
        }
    }

    #[test]
    fn grid_size() {
        // compositions of 4 into 3 parts: C(6, 2)
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert_eq!(simplex_grid(1, 4), vec![vec![4]]);
    }

    #[test]
    fn classification_rules() {
        let c = |re: f64| Complex::new(re, 0.0);
        assert_eq!(Stability::classify(&[c(-1.0), c(-0.5)]), Stability::Stable);
        assert_eq!(Stability::classify(&[c(1.0), c(-0.5)]), Stability::Saddle);
        assert_eq!(Stability::classify(&[c(1.0), c(0.5)]), Stability::Unstable);
        assert_eq!(
            Stability::classify(&[c(1e-9), c(-0.5)]),
            Stability::Marginal
        );
    }

    #[test]
    fn constant_from_consensus() {
        let s = make_long();
        let tr = integrate(
            &s,
            &Macrostate::pure(3, 0),
            &IntegrateOptions::new(5.0, 1e-2),
        )
        .unwrap();
        assert!(tr.states.iter().all(|x| x.as_slice() == [1.0, 0.0, 0.0]));
    }

    #[test]
    fn sweep_preconditions() {
        let s = make_long();
        assert!(sweep_committed(&s, 0, 0.0, 0.3, 1e-3, &SweepOptions::default()).is_err());
        let c = s.with_committed(&[("A", 1.0)]).unwrap();
        assert!(sweep_committed(&c, 3, 0.3, 0.1, 1e-3, &SweepOptions::default()).is_err());
        assert_eq!(committed_roles(&c, 3).unwrap(), (0, 2));
    }
}
