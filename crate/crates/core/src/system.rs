//! Signalling systems and their macrostate spaces.
//!
//! A system is a finite set of spin states together with the probability
//! `alpha[k]` that a speaker in state `k` emits message A, and two listener
//! transition matrices `g_a`, `g_b`. Matrices are column-stochastic: entry
//! `(i, j)` is the probability that a listener in state `j` moves to state `i`.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column sums of constructed transition matrices must be 1 within this.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Population fractions must sum to 1 within this.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// The ordered spin-state space of a system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct SpinSpace {
    labels: Vec<String>,
}

impl SpinSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidParameter(
                "spin space must be nonempty".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if l.is_empty() {
                return Err(Error::InvalidParameter(
                    "spin labels must be nonempty".into(),
                ));
            }
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate spin label {l:?}"
                )));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl TryFrom<Vec<String>> for SpinSpace {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpinSpace> for Vec<String> {
    fn from(s: SpinSpace) -> Self {
        s.labels
    }
}

/// Which message a transition matrix responds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    A,
    B,
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::A => f.write_str("A"),
            Message::B => f.write_str("B"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Column `column` of the given matrix does not sum to 1.
    ColumnSum {
        message: Message,
        column: usize,
        residual: f64,
    },
    /// Entry outside [0, 1].
    EntryRange {
        message: Message,
        row: usize,
        column: usize,
        value: f64,
    },
    AlphaRange {
        index: usize,
        value: f64,
    },
    /// A committed state whose column is not the unit vector.
    CommittedColumn {
        message: Message,
        state: usize,
        residual: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::ColumnSum {
                message,
                column,
                residual,
            } => write!(f, "g{message} column {column} sums to 1{residual:+e}"),
            Violation::EntryRange {
                message,
                row,
                column,
                value,
            } => write!(f, "g{message}[{row},{column}] = {value} outside [0,1]"),
            Violation::AlphaRange { index, value } => {
                write!(f, "alpha[{index}] = {value} outside [0,1]")
            }
            Violation::CommittedColumn {
                message,
                state,
                residual,
            } => write!(
                f,
                "committed state {state} has non-identity g{message} column (residual {residual:e})"
            ),
        }
    }
}

/// Outcome of [`SignallingSystem::validate`]; empty iff the system is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignallingSystem {
    spins: SpinSpace,
    alpha: DVector<f64>,
    g_a: DMatrix<f64>,
    g_b: DMatrix<f64>,
    committed: BTreeSet<usize>,
}

impl SignallingSystem {
    /// Assembles a system, checking only shapes and index ranges.
    ///
    /// Probabilistic invariants are reported by [`validate`](Self::validate);
    /// use [`checked`](Self::checked) to reject invalid systems outright.
    pub fn from_parts(
        spins: SpinSpace,
        alpha: DVector<f64>,
        g_a: DMatrix<f64>,
        g_b: DMatrix<f64>,
        committed: BTreeSet<usize>,
    ) -> Result<Self> {
        let k = spins.len();
        if alpha.len() != k {
            return Err(Error::Dimension {
                what: "alpha",
                expected: k,
                got: alpha.len(),
            });
        }
        for (what, g) in [("gA", &g_a), ("gB", &g_b)] {
            if g.nrows() != k || g.ncols() != k {
                return Err(Error::Dimension {
                    what,
                    expected: k,
                    got: if g.nrows() != k { g.nrows() } else { g.ncols() },
                });
            }
        }
        if let Some(&c) = committed.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidParameter(format!(
                "committed index {c} out of range for {k} states"
            )));
        }
        Ok(Self {
            spins,
            alpha,
            g_a,
            g_b,
            committed,
        })
    }

    /// Like [`from_parts`](Self::from_parts) but fails on any validation violation.
    pub fn checked(
        spins: SpinSpace,
        alpha: DVector<f64>,
        g_a: DMatrix<f64>,
        g_b: DMatrix<f64>,
        committed: BTreeSet<usize>,
    ) -> Result<Self> {
        let s = Self::from_parts(spins, alpha, g_a, g_b, committed)?;
        let report = s.validate();
        if report.is_valid() {
            Ok(s)
        } else {
            Err(Error::InvalidSystem(report.violations))
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (message, g) in [(Message::A, &self.g_a), (Message::B, &self.g_b)] {
            for j in 0..self.k() {
                let col = g.column(j);
                for (i, &v) in col.iter().enumerate() {
                    if !(0.0..=1.0).contains(&v) {
                        violations.push(Violation::EntryRange {
                            message,
                            row: i,
                            column: j,
                            value: v,
                        });
                    }
                }
                let residual = col.sum() - 1.0;
                if residual.abs() > STOCHASTIC_TOL || residual.is_nan() {
                    violations.push(Violation::ColumnSum {
                        message,
                        column: j,
                        residual,
                    });
                }
            }
        }
        for (index, &value) in self.alpha.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                violations.push(Violation::AlphaRange { index, value });
            }
        }
        for &state in &self.committed {
            for (message, g) in [(Message::A, &self.g_a), (Message::B, &self.g_b)] {
                let residual = g
                    .column(state)
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (v - if i == state { 1.0 } else { 0.0 }).abs())
                    .fold(0.0, f64::max);
                if residual > STOCHASTIC_TOL {
                    violations.push(Violation::CommittedColumn {
                        message,
                        state,
                        residual,
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    /// Number of spin states.
    pub fn k(&self) -> usize {
        self.spins.len()
    }

    pub fn spins(&self) -> &SpinSpace {
        &self.spins
    }

    pub fn labels(&self) -> &[String] {
        self.spins.labels()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn g_a(&self) -> &DMatrix<f64> {
        &self.g_a
    }

    pub fn g_b(&self) -> &DMatrix<f64> {
        &self.g_b
    }

    pub fn g(&self, message: Message) -> &DMatrix<f64> {
        match message {
            Message::A => &self.g_a,
            Message::B => &self.g_b,
        }
    }

    pub fn committed(&self) -> &BTreeSet<usize> {
        &self.committed
    }

    pub fn is_committed(&self, state: usize) -> bool {
        self.committed.contains(&state)
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.spins
            .index_of(label)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown spin state {label:?}")))
    }

    /// Listener transition column for a listener in `listener` hearing a
    /// speaker in `speaker`: `α_s·gA[:, j] + (1 − α_s)·gB[:, j]`.
    pub fn heard_column(&self, speaker: usize, listener: usize) -> DVector<f64> {
        let p = self.alpha[speaker];
        self.g_a.column(listener) * p + self.g_b.column(listener) * (1.0 - p)
    }

    /// Appends one committed state per `(base, alpha)` entry, labelled `C_<base>`.
    ///
    /// Committed states never change and no state transitions into them.
    pub fn with_committed(&self, entries: &[(&str, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Ok(self.clone());
        }
        let k = self.k();
        let k2 = k + entries.len();
        let mut labels = self.labels().to_vec();
        let mut alpha = DVector::zeros(k2);
        alpha.rows_mut(0, k).copy_from(&self.alpha);
        for (idx, &(base, a)) in entries.iter().enumerate() {
            self.index_of(base)?;
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "committed alpha {a} for {base:?} outside [0,1]"
                )));
            }
            labels.push(format!("C_{base}"));
            alpha[k + idx] = a;
        }
        let spins = SpinSpace::new(labels)?;
        let extend = |g: &DMatrix<f64>| {
            let mut out = DMatrix::zeros(k2, k2);
            out.view_mut((0, 0), (k, k)).copy_from(g);
            for c in k..k2 {
                out[(c, c)] = 1.0;
            }
            out
        };
        let mut committed = self.committed.clone();
        committed.extend(k..k2);
        Self::checked(
            spins,
            alpha,
            extend(&self.g_a),
            extend(&self.g_b),
            committed,
        )
    }
}

/// Builds a system whose listener transitions are deterministic maps.
fn deterministic(
    labels: Vec<String>,
    alpha: Vec<f64>,
    on_a: impl Fn(usize) -> usize,
    on_b: impl Fn(usize) -> usize,
) -> SignallingSystem {
    let k = labels.len();
    let mut g_a = DMatrix::zeros(k, k);
    let mut g_b = DMatrix::zeros(k, k);
    for j in 0..k {
        g_a[(on_a(j), j)] = 1.0;
        g_b[(on_b(j), j)] = 1.0;
    }
    SignallingSystem::checked(
        SpinSpace::new(labels).expect("builder labels are unique"),
        DVector::from_vec(alpha),
        g_a,
        g_b,
        BTreeSet::new(),
    )
    .expect("builder output is valid")
}

const A: usize = 0;
const AB: usize = 1;
const B: usize = 2;

/// Binary listener-only naming game over states `(A, AB, B)`.
pub fn make_long() -> SignallingSystem {
    deterministic(
        vec!["A".into(), "AB".into(), "B".into()],
        vec![1.0, 0.5, 0.0],
        |j| match j {
            A | AB => A,
            _ => AB,
        },
        |j| match j {
            A => AB,
            _ => B,
        },
    )
}

/// The `K`-stubbornness naming game over states `0..=K`.
pub fn make_kng(k: usize) -> Result<SignallingSystem> {
    if k < 1 {
        return Err(Error::InvalidParameter("K-NG requires K >= 1".into()));
    }
    Ok(deterministic(
        (0..=k).map(|i| i.to_string()).collect(),
        (0..=k).map(|i| i as f64 / k as f64).collect(),
        |j| (j + 1).min(k),
        |j| j.saturating_sub(1),
    ))
}

/// Same as [`make_long`] except that message B sends `A` straight to `B`
/// and leaves `AB` unchanged. Admits no nontrivial monotone order.
pub fn make_counterexample() -> SignallingSystem {
    deterministic(
        vec!["A".into(), "AB".into(), "B".into()],
        vec![1.0, 0.5, 0.0],
        |j| match j {
            A | AB => A,
            _ => AB,
        },
        |j| match j {
            A => B,
            other => other,
        },
    )
}

fn check_simplex(v: &DVector<f64>, what: &str) -> Result<()> {
    if let Some((i, &x)) = v.iter().enumerate().find(|(_, &x)| !(x >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "{what} component {i} = {x} is negative"
        )));
    }
    let s = v.sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidInput(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Population fractions per spin state.
#[derive(Debug, Clone, PartialEq)]
pub struct Macrostate(DVector<f64>);

impl Macrostate {
    pub fn new(n: DVector<f64>) -> Result<Self> {
        check_simplex(&n, "macrostate")?;
        Ok(Self(n))
    }

    pub fn from_slice(n: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(n))
    }

    /// The pure macrostate with every agent in `state`.
    pub fn pure(k: usize, state: usize) -> Self {
        let mut v = DVector::zeros(k);
        v[state] = 1.0;
        Self(v)
    }

    pub fn uniform(k: usize) -> Self {
        Self(DVector::from_element(k, 1.0 / k as f64))
    }

    /// Clamps tiny negatives to zero and rescales to unit mass.
    pub fn renormalized(mut n: DVector<f64>) -> Result<Self> {
        n.iter_mut().for_each(|x| *x = x.max(0.0));
        let s = n.sum();
        if !(s > 0.0) {
            return Err(Error::InvalidInput(
                "cannot renormalize a zero vector".into(),
            ));
        }
        n /= s;
        Ok(Self(n))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

impl std::ops::Index<usize> for Macrostate {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Canonical enumeration of the unordered spin pairs `(i, j)`, `i <= j`,
/// in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkIndex {
    k: usize,
    pairs: Vec<(usize, usize)>,
}

impl LinkIndex {
    pub fn new(k: usize) -> Self {
        let pairs = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
        Self { k, pairs }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of link types, `K(K+1)/2`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair(&self, idx: usize) -> (usize, usize) {
        self.pairs[idx]
    }

    /// Index of the unordered pair `{a, b}`.
    pub fn index(&self, a: usize, b: usize) -> usize {
        let (i, j) = if a <= b { (a, b) } else { (b, a) };
        // rows 0..i contribute k, k-1, ..., k-i+1 pairs
        i * self.k - i * i.saturating_sub(1) / 2 + (j - i)
    }

    /// Labels of the form `X-Y`.
    pub fn labels(&self, spins: &SpinSpace) -> Vec<String> {
        self.pairs
            .iter()
            .map(|&(i, j)| format!("{}-{}", spins.label(i), spins.label(j)))
            .collect()
    }
}

/// Fractions of links per unordered endpoint-spin pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMacrostate {
    k: usize,
    l: DVector<f64>,
}

impl LinkMacrostate {
    pub fn new(k: usize, l: DVector<f64>) -> Result<Self> {
        let expected = k * (k + 1) / 2;
        if l.len() != expected {
            return Err(Error::Dimension {
                what: "link macrostate",
                expected,
                got: l.len(),
            });
        }
        check_simplex(&l, "link macrostate")?;
        Ok(Self { k, l })
    }

    /// All links of the type `{a, b}`.
    pub fn pure(k: usize, a: usize, b: usize) -> Self {
        let idx = LinkIndex::new(k);
        let mut l = DVector::zeros(idx.len());
        l[idx.index(a, b)] = 1.0;
        Self { k, l }
    }

    /// Uncorrelated link state whose endpoint spins are drawn independently from `n`.
    pub fn product(n: &Macrostate) -> Self {
        PairMatrix(n.as_vector() * n.as_vector().transpose()).to_link()
    }

    pub fn renormalized(k: usize, mut l: DVector<f64>) -> Result<Self> {
        l.iter_mut().for_each(|x| *x = x.max(0.0));
        let s = l.sum();
        if !(s > 0.0) {
            return Err(Error::InvalidInput(
                "cannot renormalize a zero vector".into(),
            ));
        }
        l /= s;
        Self::new(k, l)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.l
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.l
    }

    pub fn as_slice(&self) -> &[f64] {
        self.l.as_slice()
    }

    pub fn pair_matrix(&self) -> PairMatrix {
        PairMatrix::from_link(self)
    }

    pub fn node_marginal(&self) -> Macrostate {
        self.pair_matrix().node_marginal()
    }
}

/// Symmetric matrix encoding of a link macrostate: diagonal `(i, i)` carries
/// the `i-i` link fraction, off-diagonal entries carry half of the `i-j` fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix(DMatrix<f64>);

impl PairMatrix {
    pub fn from_link(l: &LinkMacrostate) -> Self {
        Self(pair_matrix_of(l.k, &l.l))
    }

    /// Wraps an arbitrary square matrix; the caller guarantees symmetry.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Inverse of [`from_link`](Self::from_link).
    pub fn to_link(&self) -> LinkMacrostate {
        let k = self.0.nrows();
        LinkMacrostate {
            k,
            l: link_vector_of(&self.0),
        }
    }

    /// Row sums, i.e. the node macrostate.
    pub fn node_marginal(&self) -> Macrostate {
        Macrostate(self.row_sums())
    }

    pub fn row_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.nrows(), self.0.row_iter().map(|r| r.sum()))
    }
}

/// Pair-matrix encoding of any link-space vector (not necessarily on the simplex).
pub fn pair_matrix_of(k: usize, l: &DVector<f64>) -> DMatrix<f64> {
    let idx = LinkIndex::new(k);
    let mut m = DMatrix::zeros(k, k);
    for (p, &(i, j)) in idx.pairs().iter().enumerate() {
        if i == j {
            m[(i, i)] = l[p];
        } else {
            m[(i, j)] = 0.5 * l[p];
            m[(j, i)] = 0.5 * l[p];
        }
    }
    m
}

/// Link-space vector of a symmetric pair matrix.
pub fn link_vector_of(m: &DMatrix<f64>) -> DVector<f64> {
    let idx = LinkIndex::new(m.nrows());
    DVector::from_iterator(
        idx.len(),
        idx.pairs().iter().map(|&(i, j)| {
            if i == j {
                m[(i, i)]
            } else {
                m[(i, j)] + m[(j, i)]
            }
        }),
    )
}

/// JSON system document. `gA`/`gB` are column-major: the inner arrays are columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub labels: Vec<String>,
    pub alpha: Vec<f64>,
    #[serde(rename = "gA")]
    pub g_a: Vec<Vec<f64>>,
    #[serde(rename = "gB")]
    pub g_b: Vec<Vec<f64>>,
    #[serde(default)]
    pub committed: Vec<String>,
}

impl SystemDocument {
    pub fn from_system(s: &SignallingSystem) -> Self {
        let cols = |g: &DMatrix<f64>| {
            g.column_iter()
                .map(|c| c.iter().copied().collect())
                .collect()
        };
        Self {
            labels: s.labels().to_vec(),
            alpha: s.alpha.iter().copied().collect(),
            g_a: cols(&s.g_a),
            g_b: cols(&s.g_b),
            committed: s.committed.iter().map(|&c| s.labels()[c].clone()).collect(),
        }
    }

    /// Converts to a validated system.
    pub fn into_system(self) -> Result<SignallingSystem> {
        let spins = SpinSpace::new(self.labels)?;
        let k = spins.len();
        let matrix = |what: &'static str, cols: Vec<Vec<f64>>| -> Result<DMatrix<f64>> {
            if cols.len() != k {
                return Err(Error::Dimension {
                    what,
                    expected: k,
                    got: cols.len(),
                });
            }
            if let Some(c) = cols.iter().find(|c| c.len() != k) {
                return Err(Error::Dimension {
                    what,
                    expected: k,
                    got: c.len(),
                });
            }
            Ok(DMatrix::from_iterator(k, k, cols.into_iter().flatten()))
        };
        let g_a = matrix("gA", self.g_a)?;
        let g_b = matrix("gB", self.g_b)?;
        let committed = self
            .committed
            .iter()
            .map(|c| {
                spins.index_of(c).ok_or_else(|| {
                    Error::InvalidParameter(format!("unknown committed state {c:?}"))
                })
            })
            .collect::<Result<_>>()?;
        SignallingSystem::checked(spins, DVector::from_vec(self.alpha), g_a, g_b, committed)
    }
}

impl SignallingSystem {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<SystemDocument>(s)?.into_system()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SystemDocument::from_system(self))
            .expect("system document serializes")
    }
}
