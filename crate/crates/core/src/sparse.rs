//! Pairwise (link-based) mean-field dynamics on sparse random graphs.
//!
//! The state is the distribution `l` of links over unordered endpoint-spin
//! pairs. Each interaction picks a link and orients it uniformly into
//! (speaker, listener). The picked link changes directly (operator `D`) and
//! the listener's other `⟨k⟩ − 1` links change with it (operator `R(l)`):
//!
//! `dl/dt = 2·[(1/⟨k⟩)·(D − I) + ((⟨k⟩ − 1)/⟨k⟩)·(R(l) − I)]·l`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::complete::{order_harness_with, HarnessOptions, OrderViolation};
use crate::error::{Error, Result};
use crate::ode::{self, IntegrateOptions, Trajectory};
use crate::order::{induced_link_order, Cone, PartialOrder, CONE_TOL};
use crate::system::{
    link_vector_of, pair_matrix_of, LinkIndex, LinkMacrostate, PairMatrix, SignallingSystem,
};

/// How the listener's kernel acts on the pair matrix of related links.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelatedMode {
    /// `M ↦ ½(W̄·M + M·W̄ᵀ)` with the listener-conditional kernel
    /// [`listener_kernel`]: only the listener end of a related link moves.
    #[default]
    OneSided,
    /// `M ↦ W·M·Wᵀ` with the link-mixture kernel [`related_kernel`].
    TwoSided,
}

impl std::str::FromStr for RelatedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_sided" => Ok(RelatedMode::OneSided),
            "two_sided" => Ok(RelatedMode::TwoSided),
            other => Err(Error::InvalidParameter(format!(
                "unknown related-change mode {other:?} (expected one_sided or two_sided)"
            ))),
        }
    }
}

/// Transition matrix of the selected link, in generator form `D − I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectGenerator {
    stochastic: DMatrix<f64>,
}

impl DirectGenerator {
    /// Column-stochastic `D`: entry `(p, q)` is the probability that a
    /// selected link of type `q` becomes type `p`.
    pub fn stochastic(&self) -> &DMatrix<f64> {
        &self.stochastic
    }

    /// `D − I`, with zero column sums.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.stochastic.nrows();
        &self.stochastic - DMatrix::identity(n, n)
    }
}

/// Builds `D`: each endpoint of the selected link is the listener with
/// probability 1/2 and updates on the message sent by the other endpoint.
pub fn build_direct(system: &SignallingSystem) -> DirectGenerator {
    let idx = LinkIndex::new(system.k());
    let mut d = DMatrix::zeros(idx.len(), idx.len());
    for (col, &(a, b)) in idx.pairs().iter().enumerate() {
        for (listener, speaker) in [(a, b), (b, a)] {
            let heard = system.heard_column(speaker, listener);
            for (i, &pr) in heard.iter().enumerate() {
                if pr != 0.0 {
                    d[(idx.index(i, speaker), col)] += 0.5 * pr;
                }
            }
        }
    }
    DirectGenerator { stochastic: d }
}

/// Link-mixture spin kernel `W(l) = Σ_k l_k·W_k`.
///
/// For link type `k = {a, b}`, each endpoint is the listener with probability
/// 1/2; the column of a listener in spin `j` is its heard column, and every
/// spin that is not the listener keeps an identity column.
pub fn related_kernel(system: &SignallingSystem, l: &LinkMacrostate) -> DMatrix<f64> {
    let k = system.k();
    let idx = LinkIndex::new(k);
    let mut w = DMatrix::zeros(k, k);
    for (p, &(a, b)) in idx.pairs().iter().enumerate() {
        let weight = l.as_vector()[p];
        if weight == 0.0 {
            continue;
        }
        for (listener, speaker) in [(a, b), (b, a)] {
            let heard = system.heard_column(speaker, listener);
            for j in 0..k {
                if j == listener {
                    for i in 0..k {
                        w[(i, j)] += 0.5 * weight * heard[i];
                    }
                } else {
                    w[(j, j)] += 0.5 * weight;
                }
            }
        }
    }
    w
}

/// Kernel of a listener conditioned on its own spin: column `j` is the
/// average heard column over the neighbour distribution `M_{j·}/n_j`.
/// Spins absent from every link keep an identity column.
pub fn listener_kernel(system: &SignallingSystem, l: &LinkMacrostate) -> DMatrix<f64> {
    listener_kernel_of(system, &pair_matrix_of(l.k(), l.as_vector()))
}

fn listener_kernel_of(system: &SignallingSystem, m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = system.k();
    let mut w = DMatrix::zeros(k, k);
    for j in 0..k {
        let nj: f64 = m.row(j).sum();
        if nj > 0.0 {
            for s in 0..k {
                let weight = m[(j, s)] / nj;
                if weight != 0.0 {
                    let heard = system.heard_column(s, j);
                    for i in 0..k {
                        w[(i, j)] += weight * heard[i];
                    }
                }
            }
        } else {
            w[(j, j)] = 1.0;
        }
    }
    w
}

/// `W(l)·M(l′)·W(l)ᵀ` mapped back to link space.
pub fn related_apply(
    system: &SignallingSystem,
    l: &LinkMacrostate,
    l_prime: &LinkMacrostate,
) -> DVector<f64> {
    let w = related_kernel(system, l);
    let m = pair_matrix_of(l_prime.k(), l_prime.as_vector());
    link_vector_of(&(&w * m * w.transpose()))
}

/// Related change `(R(l) − I)·l` under the chosen mode.
pub fn related_change(
    system: &SignallingSystem,
    l: &DVector<f64>,
    mode: RelatedMode,
) -> DVector<f64> {
    let k = system.k();
    let m = pair_matrix_of(k, l);
    let image = match mode {
        RelatedMode::OneSided => {
            let w = listener_kernel_of(system, &m);
            let wm = &w * &m;
            (&wm + wm.transpose()) * 0.5
        }
        RelatedMode::TwoSided => {
            let lm =
                LinkMacrostate::renormalized(k, l.clone()).expect("link state has positive mass");
            let w = related_kernel(system, &lm);
            &w * &m * w.transpose()
        }
    };
    link_vector_of(&image) - l
}

/// Split `M = u + v` with `u = n·nᵀ` (`n` the row sums) and `v` symmetric
/// with zero row and column sums.
pub fn decompose(m: &PairMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.row_sums();
    let u = &n * n.transpose();
    let v = m.matrix() - &u;
    (u, v)
}

/// Sparse-network mean-field model.
#[derive(Debug, Clone)]
pub struct SparseModel<'a> {
    system: &'a SignallingSystem,
    mean_degree: f64,
    mode: RelatedMode,
    direct: DMatrix<f64>,
}

impl<'a> SparseModel<'a> {
    pub fn new(system: &'a SignallingSystem, mean_degree: f64, mode: RelatedMode) -> Result<Self> {
        if !(mean_degree > 1.0) || !mean_degree.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mean degree must be > 1, got {mean_degree}"
            )));
        }
        Ok(Self {
            system,
            mean_degree,
            mode,
            direct: build_direct(system).generator(),
        })
    }

    pub fn system(&self) -> &SignallingSystem {
        self.system
    }

    pub fn mode(&self) -> RelatedMode {
        self.mode
    }

    pub fn drift(&self, l: &DVector<f64>) -> DVector<f64> {
        let kd = self.mean_degree;
        let direct = &self.direct * l;
        let related = related_change(self.system, l, self.mode);
        (direct / kd + related * ((kd - 1.0) / kd)) * 2.0
    }

    pub fn integrate(&self, l0: &LinkMacrostate, opts: &IntegrateOptions) -> Result<Trajectory> {
        if l0.k() != self.system.k() {
            return Err(Error::Dimension {
                what: "initial link macrostate",
                expected: self.system.k(),
                got: l0.k(),
            });
        }
        ode::integrate_on_simplex(|l| self.drift(l), l0.as_vector().clone(), opts)
    }

    /// Order-preservation check on link space under the order induced by
    /// `node_order`.
    pub fn order_harness(
        &self,
        node_order: &PartialOrder,
        opts: &HarnessOptions,
    ) -> Result<Vec<OrderViolation>> {
        if node_order.size() != self.system.k() {
            return Err(Error::Dimension {
                what: "order",
                expected: self.system.k(),
                got: node_order.size(),
            });
        }
        let cone = link_cone(node_order);
        let dim = cone.dim();
        order_harness_with(
            dim,
            &cone,
            |l, o| ode::integrate_on_simplex(|x| self.drift(x), l.clone(), o),
            opts,
        )
    }
}

/// Convenience wrapper for a single drift evaluation.
pub fn drift_sparse(
    system: &SignallingSystem,
    mean_degree: f64,
    l: &LinkMacrostate,
    mode: RelatedMode,
) -> Result<DVector<f64>> {
    Ok(SparseModel::new(system, mean_degree, mode)?.drift(l.as_vector()))
}

/// Cone on link space generated by the covering pairs of the induced link order.
pub fn link_cone(node_order: &PartialOrder) -> Cone {
    induced_link_order(node_order)
        .cone()
        .with_tolerance(CONE_TOL)
}

/// Node macrostates (row sums of the pair matrix) along a link trajectory.
pub fn node_marginals(k: usize, traj: &Trajectory) -> Trajectory {
    Trajectory {
        times: traj.times.clone(),
        states: traj
            .states
            .iter()
            .map(|l| PairMatrix::from_matrix(pair_matrix_of(k, l)).row_sums())
            .collect(),
    }
}
