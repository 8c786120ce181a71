//! `monosig`: command-line front end for monosig-core.
//!
//! Exit codes: 0 on success, 1 on configuration or validation errors and 2
//! when `--strict` is set and the result is negative.

mod builder;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use monosig_core::abm::Selection;
use monosig_core::ode::Method;
use monosig_core::sparse::RelatedMode;

#[derive(Debug, Parser)]
#[command(
    name = "monosig",
    version,
    about = "Monotonicity analysis and simulation of binary signalling systems"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Named builder: long, kng:K, counterexample, committed:[base:]X[=alpha],...
    #[arg(long, conflicts_with = "system")]
    pub builder: Option<String>,
    /// JSON system document (gA/gB as lists of columns).
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OrderArgs {
    /// JSON order document {"edges": [[less, greater], ...]}; defaults to
    /// the chain of free states sorted by alpha.
    #[arg(long)]
    pub order: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TimeArgs {
    /// Integration horizon.
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// RK4 step size.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
}

#[derive(Debug, Clone, Args)]
pub struct HarnessArgs {
    /// Number of random ordered pairs.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Number of evenly spaced comparison times.
    #[arg(long, default_value_t = 20)]
    pub checkpoints: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with status 2 if any violation is found.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the three sufficient conditions for a given order.
    Check {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        order: OrderArgs,
        /// Exit with status 2 unless certified.
        #[arg(long)]
        strict: bool,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search all alpha-consistent orders for a certificate.
    SearchOrder {
        #[command(flatten)]
        sys: SystemArgs,
        /// Largest spin-space size accepted for exhaustive search.
        #[arg(long = "max-k", default_value_t = monosig_core::DEFAULT_MAX_K)]
        max_k: usize,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled falsification of the type-C condition.
    TypeC {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        order: OrderArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the complete-graph mean-field ODE; writes a CSV trajectory.
    Integrate {
        #[command(flatten)]
        sys: SystemArgs,
        /// Initial macrostate, comma separated in label order.
        #[arg(long)]
        n0: String,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long, default_value = "rk4")]
        method: Method,
        #[arg(long = "record-every")]
        record_every: Option<f64>,
        /// CSV path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the sparse-network link ODE; writes a CSV link trajectory.
    IntegrateSparse {
        #[command(flatten)]
        sys: SystemArgs,
        /// Initial node macrostate; links start from the product state.
        #[arg(long, conflicts_with = "l0", required_unless_present = "l0")]
        n0: Option<String>,
        /// Initial link macrostate in X-Y lexicographic order.
        #[arg(long)]
        l0: Option<String>,
        #[arg(long = "mean-degree")]
        mean_degree: f64,
        #[arg(long, default_value = "one_sided")]
        related: RelatedMode,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long = "record-every")]
        record_every: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional CSV of the node marginals.
        #[arg(long = "marginals-out")]
        marginals_out: Option<PathBuf>,
    },
    /// Agent-based ensemble on a complete or Erdős–Rényi graph.
    Abm {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        n0: String,
        #[arg(long = "n-agents", default_value_t = 10_000)]
        n_agents: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use G(N, p) with this mean degree instead of the complete graph.
        #[arg(long = "mean-degree")]
        mean_degree: Option<f64>,
        /// Seed for the graph; defaults to --seed.
        #[arg(long = "graph-seed")]
        graph_seed: Option<u64>,
        #[arg(long, default_value = "edge_first")]
        selection: Selection,
        /// Related-change form of the sparse ODE used for comparison.
        #[arg(long, default_value = "one_sided")]
        related: RelatedMode,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long = "record-every", default_value_t = 0.1)]
        record_every: f64,
        /// CSV of the ensemble-mean node trajectory; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON ensemble summary.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// CSV of the ensemble-mean link trajectory (graphs with edges).
        #[arg(long = "links-out")]
        links_out: Option<PathBuf>,
    },
    /// Bisect for the committed fraction that tips the opposing consensus.
    SweepCommitted {
        #[command(flatten)]
        sys: SystemArgs,
        /// Committed state label; defaults to the first committed state.
        #[arg(long)]
        committed: Option<String>,
        #[arg(long = "q-low", default_value_t = 0.0)]
        q_low: f64,
        #[arg(long = "q-high", default_value_t = 0.3)]
        q_high: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical order preservation of the complete-graph flow.
    VerifyOrder {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        order: OrderArgs,
        #[command(flatten)]
        harness: HarnessArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical order preservation of the sparse link flow under the induced link order.
    VerifyOrderSparse {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        order: OrderArgs,
        #[command(flatten)]
        harness: HarnessArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long = "mean-degree")]
        mean_degree: f64,
        #[arg(long, default_value = "one_sided")]
        related: RelatedMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate and classify complete-graph equilibria.
    Equilibria {
        #[command(flatten)]
        sys: SystemArgs,
        /// Seed-grid resolution (points per unit along each axis).
        #[arg(long, default_value_t = 20)]
        grid: usize,
        /// Fixed committed fractions, e.g. C_A=0.2,C_B=0.05.
        #[arg(long)]
        slice: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = config::limit_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
