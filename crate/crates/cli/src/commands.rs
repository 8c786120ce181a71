use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use monosig_core::abm::{self, EnsembleConfig, Graph, RunOptions};
use monosig_core::complete::{self, HarnessOptions, OrderViolation, SweepOptions};
use monosig_core::format::trajectory_csv;
use monosig_core::monotonicity::{self, MonotonicityReport, TypeCOutcome};
use monosig_core::ode::IntegrateOptions;
use monosig_core::sparse::{self, RelatedMode, SparseModel};
use monosig_core::{
    LinkIndex, LinkMacrostate, Macrostate, OrderDocument, PartialOrder, SignallingSystem,
};
use nalgebra::DVector;
use serde::Serialize;

use crate::output::{emit, to_json, write};
use crate::{builder, Command, HarnessArgs, OrderArgs, SystemArgs, TimeArgs};

const STRICT_FAILURE: u8 = 2;

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Check {
            sys,
            order,
            strict,
            out,
        } => {
            let s = load_system(&sys)?;
            let o = load_order(&s, &order)?;
            let report = monotonicity::certify(&s, &o);
            print_report(&s, &report);
            finish_report(&report, out.as_deref(), strict)
        }
        Command::SearchOrder {
            sys,
            max_k,
            strict,
            out,
        } => {
            let s = load_system(&sys)?;
            let report = monotonicity::find_order(&s, max_k)?;
            print_report(&s, &report);
            finish_report(&report, out.as_deref(), strict)
        }
        Command::TypeC {
            sys,
            order,
            samples,
            seed,
            strict,
            out,
        } => {
            let s = load_system(&sys)?;
            let o = load_order(&s, &order)?;
            let outcome = monotonicity::type_c_sampled(&s, &o, samples, seed);
            match &outcome {
                TypeCOutcome::Pass { samples } => {
                    println!("type C: no counterexample in {samples} samples (order {})", o.describe(s.spins()))
                }
                TypeCOutcome::Counterexample {
                    point,
                    direction_label,
                    infeasibility,
                    ..
                } => println!(
                    "type C: counterexample at n = {} along {direction_label} (cone distance {infeasibility:.3e})",
                    fmt_vec(point)
                ),
            }
            #[derive(Serialize)]
            struct Doc<'a> {
                order: OrderDocument,
                seed: u64,
                #[serde(flatten)]
                outcome: &'a TypeCOutcome,
            }
            if let Some(p) = out.as_deref() {
                write(
                    p,
                    &to_json(&Doc {
                        order: o.to_document(s.spins()),
                        seed,
                        outcome: &outcome,
                    })?,
                )?;
            }
            Ok(if strict && !outcome.passed() {
                STRICT_FAILURE
            } else {
                0
            })
        }
        Command::Integrate {
            sys,
            n0,
            time,
            method,
            record_every,
            out,
        } => {
            let s = load_system(&sys)?;
            let n0 = parse_macrostate(&n0, &s)?;
            let opts = integrate_options(&time, 50.0, record_every).method(method);
            let traj = complete::integrate(&s, &n0, &opts)?;
            emit(out.as_deref(), &trajectory_csv(&traj, s.labels()))?;
            if out.is_some() {
                println!(
                    "integrated to t = {}: n = {}",
                    opts.t_end,
                    fmt_vec(traj.last().expect("nonempty").as_slice())
                );
            }
            Ok(0)
        }
        Command::IntegrateSparse {
            sys,
            n0,
            l0,
            mean_degree,
            related,
            time,
            record_every,
            out,
            marginals_out,
        } => {
            let s = load_system(&sys)?;
            let l0 = match (n0, l0) {
                (Some(n0), _) => LinkMacrostate::product(&parse_macrostate(&n0, &s)?),
                (None, Some(l0)) => LinkMacrostate::new(s.k(), parse_vector(&l0)?)
                    .context("initial link macrostate")?,
                (None, None) => bail!("one of --n0 or --l0 is required"),
            };
            let model = SparseModel::new(&s, mean_degree, related)?;
            let opts = integrate_options(&time, 50.0, record_every);
            let traj = model.integrate(&l0, &opts)?;
            let link_labels = LinkIndex::new(s.k()).labels(s.spins());
            emit(out.as_deref(), &trajectory_csv(&traj, &link_labels))?;
            let marg = sparse::node_marginals(s.k(), &traj);
            if let Some(p) = marginals_out.as_deref() {
                write(p, &trajectory_csv(&marg, s.labels()))?;
            }
            if out.is_some() {
                println!(
                    "integrated link ODE (<k> = {mean_degree}, {}) to t = {}: node marginal {}",
                    mode_name(related),
                    opts.t_end,
                    fmt_vec(marg.last().expect("nonempty").as_slice())
                );
            }
            Ok(0)
        }
        Command::Abm {
            sys,
            n0,
            n_agents,
            runs,
            seed,
            mean_degree,
            graph_seed,
            selection,
            related,
            time,
            record_every,
            out,
            summary,
            links_out,
        } => {
            let s = load_system(&sys)?;
            let n0 = parse_macrostate(&n0, &s)?;
            let t_end = time.t_end.unwrap_or(10.0);
            let graph = match mean_degree {
                None => Graph::complete(n_agents)?,
                Some(kd) => abm::make_er_graph(n_agents, kd, graph_seed.unwrap_or(seed))?,
            };
            if links_out.is_some()
                && (matches!(graph, Graph::Complete(_)) || graph.edge_count() == 0)
            {
                bail!(
                    "--links-out needs an Erdős–Rényi graph with at least one edge (--mean-degree)"
                );
            }
            let mut warnings = Vec::new();
            let components = graph.components();
            if components > 1 {
                let w = format!("graph has {components} connected components");
                eprintln!("warning: {w}");
                warnings.push(w);
            }
            let graph = Arc::new(graph);
            let cfg = EnsembleConfig {
                system: s.clone(),
                graph: graph.clone(),
                initial: n0.clone(),
                run: RunOptions {
                    t_end,
                    record_every,
                    selection,
                },
            };
            let result = abm::ensemble(&cfg, runs, seed)?;
            emit(
                out.as_deref(),
                &trajectory_csv(&result.nodes.mean_trajectory(), s.labels()),
            )?;
            let link_labels = LinkIndex::new(s.k()).labels(s.spins());
            if let Some(p) = links_out.as_deref() {
                let l = result
                    .links
                    .as_ref()
                    .expect("edge-list graph with edges records links");
                write(p, &trajectory_csv(&l.mean_trajectory(), &link_labels))?;
            }

            // mean-field reference for the recorded horizon
            let ode_opts = IntegrateOptions::new(t_end.max(f64::MIN_POSITIVE), time.dt)
                .record_every(record_every);
            let (reference, link_dev) = match (graph.as_ref(), &result.links) {
                (Graph::EdgeList { .. }, Some(links))
                    if graph.mean_degree() > 1.0 && t_end > 0.0 =>
                {
                    let model = SparseModel::new(&s, graph.mean_degree(), related)?;
                    let l0 = LinkMacrostate::renormalized(s.k(), links.mean[0].clone())?;
                    let traj = model.integrate(&l0, &ode_opts)?;
                    let dev = abm::compare(links, &traj, t_end);
                    (Some(sparse::node_marginals(s.k(), &traj)), Some(dev))
                }
                (Graph::Complete(_), _) if t_end > 0.0 => {
                    (Some(complete::integrate(&s, &n0, &ode_opts)?), None)
                }
                _ => (None, None),
            };
            let node_dev = reference
                .as_ref()
                .map(|r| abm::compare(&result.nodes, r, t_end));

            #[derive(Serialize)]
            #[serde(rename_all = "camelCase")]
            struct Summary {
                runs: usize,
                seed: u64,
                rng: &'static str,
                n_agents: usize,
                graph: &'static str,
                #[serde(skip_serializing_if = "Option::is_none")]
                graph_seed: Option<u64>,
                edges: usize,
                realized_mean_degree: f64,
                components: usize,
                selection: monosig_core::abm::Selection,
                t_end: f64,
                record_every: f64,
                reference: &'static str,
                sup_deviation: Option<f64>,
                sup_deviation_time: Option<f64>,
                sup_deviation_state: Option<String>,
                noise_bound: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                link_sup_deviation: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                link_sup_deviation_state: Option<String>,
                final_mean: Vec<f64>,
                final_stderr: Vec<f64>,
                warnings: Vec<String>,
            }
            let is_er = mean_degree.is_some();
            let doc = Summary {
                runs,
                seed,
                rng: abm::RNG_ALGORITHM,
                n_agents,
                graph: if is_er { "erdos_renyi" } else { "complete" },
                graph_seed: is_er.then(|| graph_seed.unwrap_or(seed)),
                edges: graph.edge_count(),
                realized_mean_degree: graph.mean_degree(),
                components,
                selection,
                t_end,
                record_every,
                reference: match (&reference, is_er) {
                    (None, _) => "none",
                    (Some(_), false) => "complete_graph_ode",
                    (Some(_), true) => match related {
                        RelatedMode::OneSided => "sparse_ode_one_sided",
                        RelatedMode::TwoSided => "sparse_ode_two_sided",
                    },
                },
                sup_deviation: node_dev.as_ref().map(|d| d.sup_deviation),
                sup_deviation_time: node_dev.as_ref().map(|d| d.at_time),
                sup_deviation_state: node_dev.as_ref().map(|d| s.labels()[d.component].clone()),
                noise_bound: 5.0 / (n_agents as f64).sqrt(),
                link_sup_deviation: link_dev.as_ref().map(|d| d.sup_deviation),
                link_sup_deviation_state: link_dev
                    .as_ref()
                    .map(|d| link_labels[d.component].clone()),
                final_mean: result.nodes.mean.last().map(vec_of).unwrap_or_default(),
                final_stderr: result.nodes.stderr.last().map(vec_of).unwrap_or_default(),
                warnings,
            };
            if let Some(p) = summary.as_deref() {
                write(p, &to_json(&doc)?)?;
            }
            if out.is_some() {
                print!(
                    "{runs} runs, N = {n_agents}, t = {t_end}: mean n = {}",
                    fmt_vec(&doc.final_mean)
                );
                match doc.sup_deviation {
                    Some(d) => println!(
                        "; sup deviation from mean field {d:.4} (5/sqrt(N) = {:.4})",
                        doc.noise_bound
                    ),
                    None => println!(),
                }
            }
            Ok(0)
        }
        Command::SweepCommitted {
            sys,
            committed,
            q_low,
            q_high,
            tol,
            threshold,
            time,
            out,
        } => {
            let s = load_system(&sys)?;
            let c =
                match committed {
                    Some(label) => s.index_of(&label)?,
                    None => *s.committed().iter().next().context(
                        "system has no committed state; use e.g. --builder committed:A=1",
                    )?,
                };
            let opts = SweepOptions {
                dt: time.dt,
                t_end: time.t_end.unwrap_or(SweepOptions::default().t_end),
                threshold,
            };
            let result = complete::sweep_committed(&s, c, q_low, q_high, tol, &opts)?;
            println!(
                "tipping point for {} (backing {} against {}): qc = {} in [{}, {}]",
                result.committed,
                result.target,
                result.opposing,
                monosig_core::format::sig(result.qc, 6),
                monosig_core::format::sig(result.bracket[0], 6),
                monosig_core::format::sig(result.bracket[1], 6)
            );
            if let Some(p) = out.as_deref() {
                write(p, &to_json(&result)?)?;
            }
            Ok(0)
        }
        Command::VerifyOrder {
            sys,
            order,
            harness,
            time,
            out,
        } => {
            let s = load_system(&sys)?;
            let o = load_order(&s, &order)?;
            let opts = harness_options(&harness, &time);
            let violations = complete::order_harness(&s, &o, &opts)?;
            finish_harness(&s, &o, &harness, &opts, violations, out.as_deref(), None)
        }
        Command::VerifyOrderSparse {
            sys,
            order,
            harness,
            time,
            mean_degree,
            related,
            out,
        } => {
            let s = load_system(&sys)?;
            let o = load_order(&s, &order)?;
            let opts = harness_options(&harness, &time);
            let model = SparseModel::new(&s, mean_degree, related)?;
            let violations = model.order_harness(&o, &opts)?;
            finish_harness(
                &s,
                &o,
                &harness,
                &opts,
                violations,
                out.as_deref(),
                Some((mean_degree, related)),
            )
        }
        Command::Equilibria {
            sys,
            grid,
            slice,
            out,
        } => {
            let s = load_system(&sys)?;
            let fixed = match slice {
                Some(entries) => parse_slice(&entries, &s)?,
                None => s.committed().iter().map(|&c| (c, 0.0)).collect(),
            };
            let search = complete::find_equilibria_on_slice(&s, &fixed, grid)?;
            println!(
                "{} equilibria ({} seeds):",
                search.equilibria.len(),
                search.seeds
            );
            for e in &search.equilibria {
                println!(
                    "  n = {}  {:?}  residual {:.1e}",
                    fmt_vec(e.state.as_slice()),
                    e.classification,
                    e.residual
                );
            }
            #[derive(Serialize)]
            struct Doc<'a> {
                labels: &'a [String],
                #[serde(flatten)]
                search: &'a complete::EquilibriumSearch,
            }
            if let Some(p) = out.as_deref() {
                write(
                    p,
                    &to_json(&Doc {
                        labels: s.labels(),
                        search: &search,
                    })?,
                )?;
            }
            Ok(0)
        }
    }
}

fn load_system(args: &SystemArgs) -> Result<SignallingSystem> {
    match (&args.builder, &args.system) {
        (Some(b), _) => builder::build(b),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            SignallingSystem::from_json(&text).with_context(|| format!("in {}", path.display()))
        }
        (None, None) => bail!("one of --builder or --system is required"),
    }
}

fn load_order(system: &SignallingSystem, args: &OrderArgs) -> Result<PartialOrder> {
    match &args.order {
        None => Ok(PartialOrder::alpha_chain(system)),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let doc: OrderDocument = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            Ok(doc.into_order(system.spins())?)
        }
    }
}

fn parse_vector(s: &str) -> Result<DVector<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {x:?} in {s:?}"))
        })
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(v))
}

fn parse_macrostate(s: &str, system: &SignallingSystem) -> Result<Macrostate> {
    let v = parse_vector(s)?;
    if v.len() != system.k() {
        bail!(
            "--n0 has {} entries but the system has {} states ({})",
            v.len(),
            system.k(),
            system.labels().join(", ")
        );
    }
    Ok(Macrostate::new(v)?)
}

fn parse_slice(entries: &str, system: &SignallingSystem) -> Result<Vec<(usize, f64)>> {
    entries
        .split(',')
        .map(|entry| {
            let (label, q) = entry
                .split_once('=')
                .with_context(|| format!("slice entry {entry:?} must look like LABEL=fraction"))?;
            let idx = system.index_of(label.trim())?;
            let q: f64 = q
                .trim()
                .parse()
                .with_context(|| format!("bad fraction in {entry:?}"))?;
            Ok((idx, q))
        })
        .collect()
}

fn integrate_options(
    time: &TimeArgs,
    default_t_end: f64,
    record_every: Option<f64>,
) -> IntegrateOptions {
    let opts = IntegrateOptions::new(time.t_end.unwrap_or(default_t_end), time.dt);
    match record_every {
        Some(r) => opts.record_every(r),
        None => opts,
    }
}

fn harness_options(h: &HarnessArgs, time: &TimeArgs) -> HarnessOptions {
    HarnessOptions {
        dt: time.dt,
        ..HarnessOptions::new(h.pairs, time.t_end.unwrap_or(50.0), h.checkpoints, h.seed)
    }
}

fn mode_name(m: RelatedMode) -> &'static str {
    match m {
        RelatedMode::OneSided => "one_sided",
        RelatedMode::TwoSided => "two_sided",
    }
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| monosig_core::format::sig(*x, 6)).collect();
    format!("({})", parts.join(", "))
}

fn print_report(s: &SignallingSystem, r: &MonotonicityReport) {
    let order = match &r.order {
        Some(doc) => doc
            .into_order(s.spins())
            .map(|o| o.describe(s.spins()))
            .unwrap_or_default(),
        None => "none".into(),
    };
    println!("verdict: {:?}", r.verdict);
    println!("order: {order}");
    for c in &r.conditions {
        println!(
            "  condition ({:?}): {}{}",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.witness
                .as_ref()
                .map(|w| format!(" [{w}, margin {}]", monosig_core::format::sig(c.margin, 6)))
                .unwrap_or_default()
        );
    }
    if let Some(n) = r.candidates_examined {
        println!("candidate orders examined: {n}");
    }
    println!("note: {}", r.note);
}

fn finish_report(r: &MonotonicityReport, out: Option<&Path>, strict: bool) -> Result<u8> {
    if let Some(p) = out {
        write(p, &to_json(r)?)?;
    }
    Ok(if strict && !r.is_certified() {
        STRICT_FAILURE
    } else {
        0
    })
}

fn finish_harness(
    s: &SignallingSystem,
    o: &PartialOrder,
    h: &HarnessArgs,
    opts: &HarnessOptions,
    violations: Vec<OrderViolation>,
    out: Option<&Path>,
    sparse: Option<(f64, RelatedMode)>,
) -> Result<u8> {
    let pairs_violated = {
        let mut p: Vec<usize> = violations.iter().map(|v| v.pair).collect();
        p.dedup();
        p.len()
    };
    println!(
        "{} violations in {} of {} ordered pairs (order {}, t_end {}, {} checkpoints)",
        violations.len(),
        pairs_violated,
        h.pairs,
        o.describe(s.spins()),
        opts.t_end,
        opts.checkpoints
    );
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Doc<'a> {
        order: OrderDocument,
        pairs: usize,
        t_end: f64,
        checkpoints: usize,
        seed: u64,
        dt: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        mean_degree: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        related: Option<RelatedMode>,
        pairs_violated: usize,
        violations: &'a [OrderViolation],
    }
    if let Some(p) = out {
        write(
            p,
            &to_json(&Doc {
                order: o.to_document(s.spins()),
                pairs: h.pairs,
                t_end: opts.t_end,
                checkpoints: opts.checkpoints,
                seed: opts.seed,
                dt: opts.dt,
                mean_degree: sparse.map(|x| x.0),
                related: sparse.map(|x| x.1),
                pairs_violated,
                violations: &violations,
            })?,
        )?;
    }
    Ok(if h.strict && !violations.is_empty() {
        STRICT_FAILURE
    } else {
        0
    })
}
