// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use graphnls::discretize::{AssembledForms, Mesh};
use graphnls::dynamics::{orbital_probe, EvolveOptions, ProbeDirection};
use graphnls::format::round_sig;
use graphnls::ground_state::{continue_branch, find_ground_state, ground_state_sweep, write_branch_csv, write_sweep_csv, SearchOptions};
use graphnls::metric_graph::{MetricGraph, VertexId};
use graphnls::nls_energy::{mu1_from_lambda2, ConstantReport, NlsParams};
use graphnls::spectral::{eigen_smallest, lambda2_pair};
use graphnls::stability::{classify_with_forms, mu1_asymptotics_study, study_is_monotone, write_study_csv};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Spectra, ground states, stability and dynamics of the NLS equation on metric graphs.
#[derive(Parser, Debug)]
#[command(name = "graphnls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Topology, spectral gap and thresholds of a graph.
    Analyze(AnalyzeArgs),
    /// Ground state at a fixed mass.
    Groundstate(MassArgs),
    /// Stability verdict for the constant state.
    Stability(MassArgs),
    /// Time evolution of a perturbed constant state.
    Evolve(EvolveArgs),
    /// Ground states over a mass grid, or thresholds over a bridge-length grid.
    Sweep(SweepArgs),
    /// Nonconstant branch bifurcating from the constant state.
    Branch(BranchArgs),
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// Graph description file (text or JSON).
    #[arg(long)]
    graph: PathBuf,
    /// Nonlinearity exponent, 2 < p ≤ 6.
    #[arg(long, default_value_t = 6.0)]
    p: f64,
    /// Target element width; defaults to min(shortest edge / 8, total length / 100).
    #[arg(long)]
    h: Option<f64>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Number of eigenpairs to export.
    #[arg(long, default_value_t = 6)]
    k: usize,
}

#[derive(Args, Debug, Serialize)]
struct MassArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long)]
    mass: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random starts on top of the deterministic ones.
    #[arg(long, default_value_t = 4)]
    starts: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Direction {
    Random,
    Eigenmode,
}

#[derive(Args, Debug, Serialize)]
struct EvolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long)]
    mass: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    t_end: f64,
    /// H¹ size of the initial perturbation.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Direction::Random)]
    direction: Direction,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace row every this many steps.
    #[arg(long, default_value_t = 100)]
    record_every: usize,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// `a:b:n` (n evenly spaced points) or a comma-separated list.
    #[arg(long, conflicts_with = "ell_grid", required_unless_present = "ell_grid")]
    mass_grid: Option<String>,
    /// Bridge lengths joining two copies of the graph; same syntax as `--mass-grid`.
    #[arg(long)]
    ell_grid: Option<String>,
    /// Attachment vertex label for `--ell-grid`; defaults to the first vertex.
    #[arg(long)]
    attach: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    starts: usize,
}

#[derive(Args, Debug, Serialize)]
struct BranchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Mass to start searching for the bifurcation from.
    #[arg(long)]
    mass: f64,
    /// Arclength step.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long, default_value_t = 40)]
    steps: usize,
}

/// Exit categories.
mod exit {
    pub const FAILURE: u8 = 1;
    pub const INPUT: u8 = 3;
    pub const SUPERCRITICAL: u8 = 4;
    pub const NUMERICAL: u8 = 5;
}

fn category(err: &anyhow::Error) -> (u8, &'static str) {
    use graphnls::Error as E;
    match err.downcast_ref::<graphnls::Error>() {
        Some(E::SupercriticalMass { .. }) => (
            exit::SUPERCRITICAL,
            "choose a mass at or below the critical mass, or a subcritical p < 6",
        ),
        Some(E::Parse { .. } | E::InvalidGraph(_) | E::UnknownVertex(_) | E::Json(_)) => {
            (exit::INPUT, "fix the graph file; the grammar is documented in the README")
        }
        Some(E::InvalidParameter(_) | E::DimensionMismatch { .. }) => (exit::INPUT, "check the command-line values"),
        Some(
            E::SingularPivot { .. }
            | E::EigenNonConvergence { .. }
            | E::SpectralBoundViolated { .. }
            | E::NoConvergedStart(_)
            | E::NewtonDivergence(_)
            | E::BacktrackingExhausted(_),
        ) => (exit::NUMERICAL, "try a different --h, --seed or --starts"),
        Some(E::NoSignChange { .. } | E::NoBifurcationNearby(_) | E::DegenerateCrossing(_)) => {
            (exit::NUMERICAL, "adjust the starting mass or the grid")
        }
        _ => (exit::FAILURE, "see the message above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(exit::INPUT);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, hint) = category(&e);
            eprintln!("error: {e:#}");
            eprintln!("hint: {hint}");
            ExitCode::from(code)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("GRAPHNLS_THREADS") {
        let n: usize = v.parse().with_context(|| format!("GRAPHNLS_THREADS = `{v}` is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Analyze(a) => analyze(&a),
        Command::Groundstate(a) => groundstate(&a),
        Command::Stability(a) => stability(&a),
        Command::Evolve(a) => evolve(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Branch(a) => branch(&a),
    }
}

/// Graph, mesh and output directory shared by every command.
struct Setup {
    graph: MetricGraph,
    forms: AssembledForms,
    target_h: f64,
    hash: String,
    out: PathBuf,
}

impl Setup {
    fn new<C: Serialize + AsRef<Common>>(name: &str, config: &C) -> anyhow::Result<Self> {
        let common = config.as_ref();
        let text = fs::read_to_string(&common.graph).with_context(|| format!("reading {}", common.graph.display()))?;
        let graph = MetricGraph::parse(&text)?;
        let target_h = common.h.unwrap_or_else(|| Mesh::default_target_h(&graph));
        if !(target_h > 0.0) {
            bail!(graphnls::Error::InvalidParameter(format!("--h {target_h} must be positive")));
        }
        let mesh = Mesh::build(&graph, target_h)?;
        let forms = AssembledForms::assemble(&mesh);
        let mut hasher = Sha256::new();
        hasher.update(name.as_bytes());
        hasher.update(serde_json::to_vec(config)?);
        hasher.update(text.as_bytes());
        fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
        Ok(Self {
            graph,
            forms,
            target_h,
            hash: hex::encode(hasher.finalize()),
            out: common.out.clone(),
        })
    }

    fn mesh(&self) -> &Arc<Mesh> {
        &self.forms.mesh
    }

    fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.out.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    }

    fn report<C: Serialize>(&self, command: &str, config: &C, result: Value) -> anyhow::Result<()> {
        let mesh = self.mesh();
        let mut doc = json!({
            "command": command,
            "config_hash": self.hash,
            "config": config,
            "mesh": {
                "target_h": self.target_h,
                "h_max": mesh.h_max(),
                "h_min": mesh.h_min(),
                "nodes": mesh.node_count(),
                "elements": mesh.element_count(),
            },
            "result": result,
        });
        round_numbers(&mut doc);
        let text = serde_json::to_string_pretty(&doc)?;
        fs::write(self.out.join("report.json"), format!("{text}\n"))?;
        println!("{text}");
        Ok(())
    }
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x))) {
                *n = x;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let bad = || graphnls::Error::InvalidParameter(format!("grid `{s}` is neither a:b:n nor a comma list"));
    let grid: Vec<f64> = if let [a, b, n] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        let n: usize = n.parse().map_err(|_| bad())?;
        match n {
            0 => bail!(bad()),
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        }
    } else {
        s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if grid.iter().any(|x| !(*x > 0.0)) {
        bail!(graphnls::Error::InvalidParameter(format!("grid `{s}` must be positive")));
    }
    Ok(grid)
}

fn search_options(seed: u64, starts: usize) -> SearchOptions {
    SearchOptions {
        n_random_starts: starts,
        seed,
        ..SearchOptions::default()
    }
}

fn analyze(a: &AnalyzeArgs) -> anyhow::Result<()> {
    let s = Setup::new("analyze", a)?;
    let g = &s.graph;
    let ell = g.total_length();
    let k = a.k.clamp(2, s.forms.dim());
    let spectrum = eigen_smallest(&s.forms, k)?;
    spectrum.write_csv(s.create("eigenvalues.csv")?)?;
    for i in 0..spectrum.len() {
        spectrum.eigenfunction(i).write_csv(s.create(&format!("eigenvector_{i}.csv"))?)?;
    }
    let (lambda2, _) = lambda2_pair(&s.forms)?;
    let mu1 = mu1_from_lambda2(ell, lambda2, a.common.p);
    let mu1_critical = mu1_from_lambda2(ell, lambda2, 6.0);
    let covering = g.has_cycle_covering();
    let label = |e: &graphnls::metric_graph::EdgeId| g.edge(*e).label.clone();
    let result = json!({
        "graph": g.name(),
        "vertices": g.vertex_count(),
        "edges": g.edge_count(),
        "total_length": ell,
        "terminal_edges": g.terminal_edges().iter().map(label).collect::<Vec<_>>(),
        "bridges": g.bridges().iter().map(label).collect::<Vec<_>>(),
        "cycle_covering": covering,
        "lambda2": lambda2,
        "mu1": mu1,
        "mu1_p6": mu1_critical,
        "critical_mass": g.critical_mass(),
        "bound_half_pi_ok": mu1_critical >= std::f64::consts::FRAC_PI_2 - 1e-4,
        "bound_pi_ok": !covering || mu1_critical >= std::f64::consts::PI - 1e-4,
    });
    s.report("analyze", a, result)
}

fn groundstate(a: &MassArgs) -> anyhow::Result<()> {
    let s = Setup::new("groundstate", a)?;
    let params = NlsParams::new(a.common.p, a.mass)?;
    let r = find_ground_state(&s.forms, params, &search_options(a.seed, a.starts))?;
    r.best.u.write_csv(s.create("ground_state.csv")?)?;
    let result = json!({
        "graph": s.graph.name(),
        "p": a.common.p,
        "mass": a.mass,
        "energy": r.energy,
        "energy_constant": r.energy_constant,
        "is_constant": r.is_constant,
        "gap_to_constant": r.gap_to_constant,
        "degenerate": r.degenerate,
        "multiplier": r.best.multiplier,
        "pde_residual": r.best.pde_residual,
        "flux_defect": r.best.flux_defect,
        "starts_used": r.starts_used,
        "converged_starts": r.converged_starts,
        "iterations": r.iterations,
        "local_minima": r.all_local_minima,
        "constant": ConstantReport::compute(&s.forms, params)?,
    });
    s.report("groundstate", a, result)
}

fn stability(a: &MassArgs) -> anyhow::Result<()> {
    let s = Setup::new("stability", a)?;
    let report = classify_with_forms(&s.forms, NlsParams::new(a.common.p, a.mass)?)?;
    s.report("stability", a, serde_json::to_value(report)?)
}

fn evolve(a: &EvolveArgs) -> anyhow::Result<()> {
    let s = Setup::new("evolve", a)?;
    let params = NlsParams::new(a.common.p, a.mass)?;
    let direction = match a.direction {
        Direction::Random => ProbeDirection::Random,
        Direction::Eigenmode => ProbeDirection::Eigenmode,
    };
    let opts = EvolveOptions {
        dt: a.dt,
        t_end: a.t_end,
        record_every: a.record_every,
    };
    let r = orbital_probe(&s.forms, params, a.delta, direction, a.seed, &opts)?;
    r.trace.write_csv(s.create("trace.csv")?)?;
    r.trace.final_state.write_csv(s.create("final_state.csv")?)?;
    let lambda2 = lambda2_pair(&s.forms)?.0;
    let result = json!({
        "graph": s.graph.name(),
        "p": a.common.p,
        "mass": a.mass,
        "mu1": mu1_from_lambda2(s.graph.total_length(), lambda2, a.common.p),
        "steps": r.trace.steps,
        "initial_distance": r.initial_distance,
        "max_distance": r.max_distance,
        "max_relative_mass_drift": r.trace.max_relative_mass_drift(),
        "max_energy_drift": r.trace.max_energy_drift(),
    });
    s.report("evolve", a, result)
}

fn sweep(a: &SweepArgs) -> anyhow::Result<()> {
    let s = Setup::new("sweep", a)?;
    if let Some(grid) = &a.mass_grid {
        let masses = parse_grid(grid)?;
        let rows = ground_state_sweep(&s.forms, a.common.p, &masses, &search_options(a.seed, a.starts))?;
        write_sweep_csv(&rows, s.create("sweep.csv")?)?;
        s.report("sweep", a, json!({ "kind": "mass", "rows": rows }))
    } else {
        let grid = parse_grid(a.ell_grid.as_deref().unwrap_or_default())?;
        let v = match &a.attach {
            Some(label) => s.graph.vertex_by_label(label).ok_or_else(|| graphnls::Error::UnknownVertex(label.clone()))?,
            None => VertexId(0),
        };
        let rows = mu1_asymptotics_study(&s.graph, &s.graph, v, v, &grid)?;
        write_study_csv(&rows, s.create("study.csv")?)?;
        let monotone = study_is_monotone(&rows);
        s.report("sweep", a, json!({ "kind": "bridge_length", "monotone": monotone, "rows": rows }))
    }
}

fn branch(a: &BranchArgs) -> anyhow::Result<()> {
    let s = Setup::new("branch", a)?;
    let b = continue_branch(&s.forms, a.common.p, a.mass, a.step, a.steps)?;
    write_branch_csv(&b, s.create("branch.csv")?)?;
    let result = json!({
        "graph": s.graph.name(),
        "p": a.common.p,
        "bifurcation_mass": b.bifurcation_mass,
        "bracket": [b.bracket.0, b.bracket.1],
        "points": b.points.len(),
        "folds": b.folds,
    });
    s.report("branch", a, result)
}

impl AsRef<Common> for AnalyzeArgs {
    fn as_ref(&self) -> &Common {
        &self.common
    }
}

impl AsRef<Common> for MassArgs {
    fn as_ref(&self) -> &Common {
        &self.common
    }
}

impl AsRef<Common> for EvolveArgs {
    fn as_ref(&self) -> &Common {
        &self.common
    }
}

impl AsRef<Common> for SweepArgs {
    fn as_ref(&self) -> &Common {
        &self.common
    }
}

impl AsRef<Common> for BranchArgs {
    fn as_ref(&self) -> &Common {
        &self.common
    }
}
