//! Agent-based Monte Carlo simulation of signalling systems.
//!
//! Each step picks a (speaker, listener) pair, the speaker emits A with
//! probability `alpha[speaker spin]`, and the listener's new spin is drawn
//! from the matching column of `gA` or `gB`. One time unit is `N` steps.

use std::sync::Arc;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Trajectory;
use crate::system::{LinkIndex, Macrostate, Message, SignallingSystem};

/// Name of the random generator recorded in run outputs.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = run index";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Graph {
    Complete(usize),
    EdgeList {
        n: usize,
        edges: Vec<(u32, u32)>,
        neighbours: Vec<Vec<u32>>,
    },
}

impl Graph {
    /// Undirected graph from an edge list; rejects self-loops and duplicates.
    pub fn from_edges(n: usize, edges: Vec<(u32, u32)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 agents, got {n}"
            )));
        }
        let mut neighbours = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate edge ({a}, {b})"
                )));
            }
            neighbours[a as usize].push(b);
            neighbours[b as usize].push(a);
        }
        Ok(Graph::EdgeList {
            n,
            edges,
            neighbours,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 agents, got {n}"
            )));
        }
        Ok(Graph::Complete(n))
    }

    pub fn n(&self) -> usize {
        match self {
            Graph::Complete(n) => *n,
            Graph::EdgeList { n, .. } => *n,
        }
    }

    pub fn edge_count(&self) -> usize {
        match self {
            Graph::Complete(n) => n * (n - 1) / 2,
            Graph::EdgeList { edges, .. } => edges.len(),
        }
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.n() as f64
    }

    /// Number of connected components, isolated vertices included.
    pub fn components(&self) -> usize {
        match self {
            Graph::Complete(_) => 1,
            Graph::EdgeList { n, edges, .. } => {
                let mut parent: Vec<usize> = (0..*n).collect();
                fn find(p: &mut [usize], mut x: usize) -> usize {
                    while p[x] != x {
                        p[x] = p[p[x]];
                        x = p[x];
                    }
                    x
                }
                let mut comps = *n;
                for &(a, b) in edges {
                    let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
                    if ra != rb {
                        parent[ra] = rb;
                        comps -= 1;
                    }
                }
                comps
            }
        }
    }
}

/// Erdős–Rényi `G(N, p)` with `p = meanDegree / (N − 1)`, sampled by
/// geometric skipping over the `N(N−1)/2` vertex pairs.
pub fn make_er_graph(n: usize, mean_degree: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 agents, got {n}"
        )));
    }
    if !(mean_degree >= 0.0) || mean_degree >= (n - 1) as f64 {
        return Err(Error::InvalidParameter(format!(
            "mean degree must lie in [0, N-1), got {mean_degree} for N = {n}"
        )));
    }
    let p = mean_degree / (n - 1) as f64;
    let mut edges = Vec::new();
    if p > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log_q = (1.0 - p).ln();
        // walk the strictly lower triangle (v, w), w < v, in row order
        let (mut v, mut w): (usize, i64) = (1, -1);
        while v < n {
            let r: f64 = 1.0 - rng.random::<f64>();
            w += 1 + (r.ln() / log_q).floor() as i64;
            while v < n && w >= v as i64 {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                edges.push((w as u32, v as u32));
            }
        }
    }
    Graph::from_edges(n, edges)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Uniform edge, uniform orientation.
    #[default]
    EdgeFirst,
    /// Uniform speaker, uniform neighbour as listener.
    SpeakerFirst,
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge_first" => Ok(Selection::EdgeFirst),
            "speaker_first" => Ok(Selection::SpeakerFirst),
            other => Err(Error::InvalidParameter(format!(
                "unknown selection {other:?} (expected edge_first or speaker_first)"
            ))),
        }
    }
}

/// Cumulative transition columns for fast sampling.
#[derive(Debug, Clone)]
struct Sampler {
    alpha: Vec<f64>,
    cdf_a: Vec<Vec<f64>>,
    cdf_b: Vec<Vec<f64>>,
}

impl Sampler {
    fn new(system: &SignallingSystem) -> Self {
        let cdfs = |m: Message| {
            system
                .g(m)
                .column_iter()
                .map(|c| {
                    let mut acc = 0.0;
                    c.iter()
                        .map(|&x| {
                            acc += x;
                            acc
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            alpha: system.alpha().iter().copied().collect(),
            cdf_a: cdfs(Message::A),
            cdf_b: cdfs(Message::B),
        }
    }

    fn respond<R: Rng + ?Sized>(&self, speaker: usize, listener: usize, rng: &mut R) -> usize {
        let says_a = rng.random::<f64>() < self.alpha[speaker];
        let cdf = if says_a {
            &self.cdf_a[listener]
        } else {
            &self.cdf_b[listener]
        };
        let u = rng.random::<f64>() * cdf[cdf.len() - 1];
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    }
}

/// Microstate of a simulation: one spin per agent on a shared graph.
#[derive(Debug, Clone)]
pub struct AgentPopulation {
    spins: Vec<u16>,
    graph: Arc<Graph>,
    counts: Vec<usize>,
    link_counts: Option<Vec<usize>>,
    k: usize,
}

impl AgentPopulation {
    pub fn new(spins: Vec<u16>, graph: Arc<Graph>, k: usize) -> Result<Self> {
        if spins.len() != graph.n() {
            return Err(Error::Dimension {
                what: "agent spins",
                expected: graph.n(),
                got: spins.len(),
            });
        }
        if let Some(&s) = spins.iter().find(|&&s| s as usize >= k) {
            return Err(Error::InvalidParameter(format!(
                "spin index {s} >= K = {k}"
            )));
        }
        let mut counts = vec![0; k];
        for &s in &spins {
            counts[s as usize] += 1;
        }
        let link_counts = match graph.as_ref() {
            Graph::Complete(_) => None,
            Graph::EdgeList { edges, .. } => {
                let idx = LinkIndex::new(k);
                let mut lc = vec![0; idx.len()];
                for &(a, b) in edges {
                    lc[idx.index(spins[a as usize] as usize, spins[b as usize] as usize)] += 1;
                }
                Some(lc)
            }
        };
        Ok(Self {
            spins,
            graph,
            counts,
            link_counts,
            k,
        })
    }

    /// Assigns spins with counts rounded from `n` (largest remainder), then
    /// shuffles them over the agents.
    pub fn from_macrostate<R: Rng + ?Sized>(
        n: &Macrostate,
        graph: Arc<Graph>,
        rng: &mut R,
    ) -> Result<Self> {
        let total = graph.n();
        let k = n.len();
        let exact: Vec<f64> = n.as_slice().iter().map(|x| x * total as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            (exact[b] - exact[b].floor())
                .total_cmp(&(exact[a] - exact[a].floor()))
                .then(a.cmp(&b))
        });
        let mut left = total - counts.iter().sum::<usize>();
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        let mut spins: Vec<u16> = counts
            .iter()
            .enumerate()
            .flat_map(|(s, &c)| std::iter::repeat_n(s as u16, c))
            .collect();
        spins.shuffle(rng);
        Self::new(spins, graph, k)
    }

    pub fn spins(&self) -> &[u16] {
        &self.spins
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    pub fn macrostate(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.k, self.counts.iter().map(|&c| c as f64 / n))
    }

    /// Link-type fractions; `None` on complete graphs and edgeless graphs.
    pub fn link_macrostate(&self) -> Option<DVector<f64>> {
        let lc = self.link_counts.as_ref()?;
        let m: usize = lc.iter().sum();
        if m == 0 {
            return None;
        }
        Some(DVector::from_iterator(
            lc.len(),
            lc.iter().map(|&c| c as f64 / m as f64),
        ))
    }

    /// Picks `(speaker, listener)` or `None` if the graph has no usable edge.
    fn pick<R: Rng + ?Sized>(&self, selection: Selection, rng: &mut R) -> Option<(usize, usize)> {
        match self.graph.as_ref() {
            Graph::Complete(n) => {
                let speaker = rng.random_range(0..*n);
                let mut listener = rng.random_range(0..*n - 1);
                if listener >= speaker {
                    listener += 1;
                }
                Some((speaker, listener))
            }
            Graph::EdgeList {
                n,
                edges,
                neighbours,
            } => match selection {
                Selection::EdgeFirst => {
                    if edges.is_empty() {
                        return None;
                    }
                    let (a, b) = edges[rng.random_range(0..edges.len())];
                    let (a, b) = (a as usize, b as usize);
                    Some(if rng.random::<bool>() { (a, b) } else { (b, a) })
                }
                Selection::SpeakerFirst => {
                    let speaker = rng.random_range(0..*n);
                    let nb = &neighbours[speaker];
                    if nb.is_empty() {
                        return None;
                    }
                    Some((speaker, nb[rng.random_range(0..nb.len())] as usize))
                }
            },
        }
    }

    fn set_spin(&mut self, agent: usize, new: usize) {
        let old = self.spins[agent] as usize;
        if old == new {
            return;
        }
        self.spins[agent] = new as u16;
        self.counts[old] -= 1;
        self.counts[new] += 1;
        if let (Some(lc), Graph::EdgeList { neighbours, .. }) =
            (self.link_counts.as_mut(), self.graph.as_ref())
        {
            let idx = LinkIndex::new(self.k);
            for &x in &neighbours[agent] {
                let sx = self.spins[x as usize] as usize;
                lc[idx.index(old, sx)] -= 1;
                lc[idx.index(new, sx)] += 1;
            }
        }
    }
}

/// Result of a single interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEvent {
    pub speaker: usize,
    pub listener: usize,
    pub old: usize,
    pub new: usize,
}

/// One interaction. At most the listener changes.
pub fn step<R: Rng + ?Sized>(
    pop: &mut AgentPopulation,
    system: &SignallingSystem,
    selection: Selection,
    rng: &mut R,
) -> Option<StepEvent> {
    let sampler = Sampler::new(system);
    step_with(pop, &sampler, selection, rng)
}

fn step_with<R: Rng + ?Sized>(
    pop: &mut AgentPopulation,
    sampler: &Sampler,
    selection: Selection,
    rng: &mut R,
) -> Option<StepEvent> {
    let (speaker, listener) = pop.pick(selection, rng)?;
    let old = pop.spins[listener] as usize;
    let new = sampler.respond(pop.spins[speaker] as usize, old, rng);
    pop.set_spin(listener, new);
    Some(StepEvent {
        speaker,
        listener,
        old,
        new,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Duration in time units (`N` steps each).
    pub t_end: f64,
    pub record_every: f64,
    pub selection: Selection,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub nodes: Trajectory,
    /// Present for edge-list graphs with at least one edge.
    pub links: Option<Trajectory>,
}

/// Simulates `t_end` time units, recording every `record_every` units.
pub fn run<R: Rng + ?Sized>(
    pop: &mut AgentPopulation,
    system: &SignallingSystem,
    opts: &RunOptions,
    rng: &mut R,
) -> Result<RunOutput> {
    if !(opts.t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be >= 0, got {}",
            opts.t_end
        )));
    }
    if !(opts.record_every > 0.0) {
        return Err(Error::InvalidParameter(
            "record interval must be > 0".into(),
        ));
    }
    if pop.k != system.k() {
        return Err(Error::Dimension {
            what: "population spin space",
            expected: system.k(),
            got: pop.k,
        });
    }
    let sampler = Sampler::new(system);
    let n = pop.n();
    let total_steps = (opts.t_end * n as f64).round() as u64;
    let stride = ((opts.record_every * n as f64).round() as u64).max(1);
    let mut out = RunOutput::default();
    let mut links = pop.link_macrostate().map(|_| Trajectory::default());
    let record =
        |pop: &AgentPopulation, s: u64, out: &mut RunOutput, links: &mut Option<Trajectory>| {
            let t = s as f64 / n as f64;
            out.nodes.push(t, pop.macrostate());
            if let (Some(tr), Some(l)) = (links.as_mut(), pop.link_macrostate()) {
                tr.push(t, l);
            }
        };
    record(pop, 0, &mut out, &mut links);
    for s in 1..=total_steps {
        step_with(pop, &sampler, opts.selection, rng);
        if s % stride == 0 {
            record(pop, s, &mut out, &mut links);
        }
    }
    out.links = links;
    Ok(out)
}

/// Per-run generator: `seed` with stream `run_index`.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub system: SignallingSystem,
    pub graph: Arc<Graph>,
    pub initial: Macrostate,
    pub run: RunOptions,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<DVector<f64>>,
    /// Standard error of the mean, per component.
    pub stderr: Vec<DVector<f64>>,
    pub runs: usize,
}

impl EnsembleStats {
    fn from_runs(runs: &[Trajectory]) -> Self {
        let Some(first) = runs.first() else {
            return Self::default();
        };
        let r = runs.len() as f64;
        let mut mean = Vec::with_capacity(first.len());
        let mut stderr = Vec::with_capacity(first.len());
        for i in 0..first.len() {
            let m = runs
                .iter()
                .map(|t| &t.states[i])
                .fold(DVector::zeros(first.states[i].len()), |acc, x| acc + x)
                / r;
            let se = if runs.len() > 1 {
                let var = runs
                    .iter()
                    .map(|t| (&t.states[i] - &m).map(|x| x * x))
                    .fold(DVector::zeros(m.len()), |acc, x| acc + x)
                    / (r - 1.0);
                var.map(|v| (v / r).sqrt())
            } else {
                DVector::zeros(m.len())
            };
            mean.push(m);
            stderr.push(se);
        }
        Self {
            times: first.times.clone(),
            mean,
            stderr,
            runs: runs.len(),
        }
    }

    pub fn mean_trajectory(&self) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.mean.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnsembleOutput {
    pub nodes: EnsembleStats,
    pub links: Option<EnsembleStats>,
}

/// Runs `runs` independent replicas in parallel; replica `i` uses
/// [`run_rng`]`(seed, i)` for both its initial shuffle and its dynamics.
pub fn ensemble(config: &EnsembleConfig, runs: usize, seed: u64) -> Result<EnsembleOutput> {
    if runs < 1 {
        return Err(Error::InvalidParameter("need at least one run".into()));
    }
    let outputs: Vec<Result<RunOutput>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(seed, i as u64);
            let mut pop =
                AgentPopulation::from_macrostate(&config.initial, config.graph.clone(), &mut rng)?;
            run(&mut pop, &config.system, &config.run, &mut rng)
        })
        .collect();
    let outputs: Vec<RunOutput> = outputs.into_iter().collect::<Result<_>>()?;
    let nodes: Vec<Trajectory> = outputs.iter().map(|o| o.nodes.clone()).collect();
    let links: Option<Vec<Trajectory>> = outputs.iter().map(|o| o.links.clone()).collect();
    Ok(EnsembleOutput {
        nodes: EnsembleStats::from_runs(&nodes),
        links: links.map(|l| EnsembleStats::from_runs(&l)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviationReport {
    /// Max over record times `<= t_max` and components of `|mean − reference|`.
    pub sup_deviation: f64,
    pub at_time: f64,
    pub component: usize,
}

/// Compares an ensemble mean with a reference (mean-field) trajectory.
pub fn compare(stats: &EnsembleStats, reference: &Trajectory, t_max: f64) -> DeviationReport {
    let mut best = DeviationReport {
        sup_deviation: 0.0,
        at_time: 0.0,
        component: 0,
    };
    for (t, m) in stats.times.iter().zip(&stats.mean) {
        if *t > t_max + 1e-12 {
            break;
        }
        let diff = m - reference.at(*t);
        let (c, v) = diff.iamax_full_abs();
        if v > best.sup_deviation {
            best = DeviationReport {
                sup_deviation: v,
                at_time: *t,
                component: c,
            };
        }
    }
    best
}

trait IamaxFull {
    fn iamax_full_abs(&self) -> (usize, f64);
}

impl IamaxFull for DVector<f64> {
    fn iamax_full_abs(&self) -> (usize, f64) {
        let i = self.iamax();
        (i, self[i].abs())
    }
}

/// Outcome counts of single interactions on an isolated edge.
///
/// The edge starts in link type `(a, b)` every trial; the returned vector
/// counts the link type after one edge-first step, in [`LinkIndex`] order.
pub fn isolated_edge_counts(
    system: &SignallingSystem,
    a: usize,
    b: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    let k = system.k();
    if a >= k || b >= k {
        return Err(Error::InvalidParameter(format!(
            "link ({a}, {b}) out of range for K = {k}"
        )));
    }
    let graph = Arc::new(Graph::from_edges(2, vec![(0, 1)])?);
    let idx = LinkIndex::new(k);
    let sampler = Sampler::new(system);
    let mut rng = run_rng(seed, 0);
    let mut counts = vec![0u64; idx.len()];
    let mut pop = AgentPopulation::new(vec![a as u16, b as u16], graph, k)?;
    for _ in 0..trials {
        pop.set_spin(0, a);
        pop.set_spin(1, b);
        step_with(&mut pop, &sampler, Selection::EdgeFirst, &mut rng);
        counts[idx.index(pop.spins[0] as usize, pop.spins[1] as usize)] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of `observed` counts against `expected`
/// probabilities. Categories with zero expected probability must be empty;
/// otherwise the p-value is 0.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<ChiSquare> {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    if observed.len() != expected.len() {
        return Err(Error::Dimension {
            what: "expected probabilities",
            expected: observed.len(),
            got: expected.len(),
        });
    }
    let total: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(expected) {
        if p <= 0.0 {
            if o > 0 {
                return Ok(ChiSquare {
                    statistic: f64::INFINITY,
                    dof: 0,
                    p_value: 0.0,
                });
            }
            continue;
        }
        let e = p * total as f64;
        statistic += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64)
            .map_err(|e| Error::InvalidParameter(format!("chi-square: {e}")))?;
        1.0 - dist.cdf(statistic)
    };
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
    })
}
