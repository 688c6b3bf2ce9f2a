//! Command-line front end: load a model file, integrate its dynamics with
//! divergence / free-energy / conservation monitors, or run equilibrium
//! analyses, and emit machine-readable output.
//!
//! Exit codes: 0 success (analysis holds / balanced), 1 analysis negative or
//! runtime failure, 2 usage or parse error, 3 a channel requested via
//! `--monotone` increased beyond `--slack`, 4 analysis inconclusive.
//!
//! All output is deterministic: the same flags, files, and seed produce
//! byte-identical trajectories, reports, and analysis printouts.

use crate::game::{
    is_dominant, is_ess, is_symmetric_nash, is_thomas_ess, replicator_field, FitnessModel, GameMatrix,
    StrategyVerdict, VerdictStatus, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL,
};
use crate::info::{population_relative_information_raw, relative_information_raw, Population, ProbDist};
use crate::markov::{
    energies_from_steady_state, free_energy, hamiltonian, master_field, steady_states, MarkovProcess,
};
use crate::ode::{integrate, IntegratorConfig, Method, Monitor, OdeError, Trajectory};
use crate::output::{trajectory_csv, trajectory_json};
use crate::reaction::{conservation_laws, is_complex_balanced, rate_field, ReactionNetwork};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "relent",
    version,
    about = "Simulate and analyze replicator, master-equation, and reaction-network dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a model's dynamics and write the trajectory
    Simulate(SimulateArgs),
    /// Check equilibrium, balance, and energy properties of a model
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dynamics {
    /// Replicator flow on the simplex, driven by a payoff matrix
    Replicator,
    /// Master equation of a Markov process
    Master,
    /// Mass-action rate equation of a reaction network
    Rate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Rk4,
    Rk45,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrajectoryFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    /// Payoff matrix (.mat)
    Mat,
    /// Markov process (.mk)
    Mk,
    /// Reaction network (.rn)
    Rn,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model file: payoff matrix (.mat), Markov process (.mk), or reaction network (.rn)
    #[arg(long)]
    model: PathBuf,
    /// Override the model kind inferred from the file extension
    #[arg(long, value_enum)]
    kind: Option<ModelKind>,
    #[arg(long, value_enum)]
    dynamics: Dynamics,
    /// Initial state, comma separated
    #[arg(long)]
    initial: String,
    #[arg(long = "t-end", allow_negative_numbers = true)]
    t_end: f64,
    #[arg(long, value_enum, default_value = "rk45")]
    method: MethodArg,
    /// Fixed step for rk4, initial trial step for rk45
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    step: f64,
    #[arg(long = "rel-tol", default_value_t = 1e-8, allow_negative_numbers = true)]
    rel_tol: f64,
    #[arg(long = "abs-tol", default_value_t = 1e-10, allow_negative_numbers = true)]
    abs_tol: f64,
    /// Reference state: enables the divergence channels I(ref,state) and I(state,ref)
    #[arg(long = "ref")]
    reference: Option<String>,
    /// Inverse temperature: enables the free_energy channel (master dynamics only)
    #[arg(long)]
    beta: Option<f64>,
    /// Write the trajectory here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TrajectoryFormat,
    /// Accepted for interface symmetry; the simulation itself is deterministic
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Channels that must be nonincreasing (comma separated names, or `all`;
    /// commas inside parentheses are part of the name); a violation beyond
    /// --slack exits with code 3
    #[arg(long)]
    monotone: Option<String>,
    /// Permitted inter-grid increase for monotone channels
    #[arg(long, default_value_t = 1e-6, allow_negative_numbers = true)]
    slack: f64,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Game-theoretic checks of a strategy against a payoff matrix
    Game(GameArgs),
    /// List the steady states of a Markov process
    SteadyStates(SteadyStatesArgs),
    /// Test whether a population is complex balanced
    ComplexBalance(ComplexBalanceArgs),
    /// Derive energies and a partition function from a Markov steady state
    Energies(EnergiesArgs),
}

#[derive(Args)]
struct CommonAnalyzeArgs {
    #[arg(long, default_value_t = DEFAULT_TOL, allow_negative_numbers = true)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GameCheck {
    /// Symmetric Nash equilibrium
    Nash,
    /// Evolutionarily stable state
    Ess,
    /// Dominance against every mixed strategy
    Dominant,
    /// Nash combined with dominance
    Thomas,
}

#[derive(Args)]
struct GameArgs {
    /// Payoff matrix file
    #[arg(long)]
    matrix: PathBuf,
    /// Strategy to test, comma separated
    #[arg(long)]
    strategy: String,
    #[arg(long, value_enum)]
    check: GameCheck,
    #[command(flatten)]
    common: CommonAnalyzeArgs,
}

#[derive(Args)]
struct SteadyStatesArgs {
    /// Markov process file
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    common: CommonAnalyzeArgs,
}

#[derive(Args)]
struct ComplexBalanceArgs {
    /// Reaction network file
    #[arg(long)]
    model: PathBuf,
    /// Population to test, comma separated
    #[arg(long)]
    point: String,
    #[command(flatten)]
    common: CommonAnalyzeArgs,
}

#[derive(Args)]
struct EnergiesArgs {
    /// Markov process file
    #[arg(long)]
    model: PathBuf,
    /// Inverse temperature
    #[arg(long)]
    beta: f64,
    /// Ground state name (default: the most probable state)
    #[arg(long)]
    ground: Option<String>,
    #[command(flatten)]
    common: CommonAnalyzeArgs,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn runtime(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Analyze(cmd) => cmd_analyze(&cmd),
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

// ---------------------------------------------------------------------------
// Model loading
// ---------------------------------------------------------------------------

enum Model {
    Matrix(GameMatrix),
    Markov(MarkovProcess),
    Network(ReactionNetwork),
}

impl Model {
    fn kind_name(&self) -> &'static str {
        match self {
            Model::Matrix(_) => "payoff matrix",
            Model::Markov(_) => "Markov process",
            Model::Network(_) => "reaction network",
        }
    }
}

fn detect_kind(path: &Path, explicit: Option<ModelKind>) -> Result<ModelKind, Failure> {
    if let Some(kind) = explicit {
        return Ok(kind);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("mat") => Ok(ModelKind::Mat),
        Some("mk") => Ok(ModelKind::Mk),
        Some("rn") => Ok(ModelKind::Rn),
        _ => Err(usage(format!(
            "cannot infer the model kind of `{}`; use --kind {{mat|mk|rn}}",
            path.display()
        ))),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads and parses a model file, returning the model and the content hash.
fn load_model(path: &Path, explicit: Option<ModelKind>) -> Result<(Model, String), Failure> {
    let kind = detect_kind(path, explicit)?;
    let bytes = std::fs::read(path)
        .map_err(|e| usage(format!("cannot read `{}`: {e}", path.display())))?;
    let hash = sha256_hex(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| usage(format!("`{}` is not valid UTF-8", path.display())))?;
    let parse_err = |e: crate::parse::ParseError| usage(format!("{}: {e}", path.display()));
    let model = match kind {
        ModelKind::Mat => Model::Matrix(GameMatrix::parse(&text).map_err(parse_err)?),
        ModelKind::Mk => Model::Markov(MarkovProcess::parse(&text).map_err(parse_err)?),
        ModelKind::Rn => {
            let parsed = ReactionNetwork::parse(&text).map_err(parse_err)?;
            for warning in &parsed.warnings {
                eprintln!("warning: {}: {warning}", path.display());
            }
            Model::Network(parsed.network)
        }
    };
    Ok((model, hash))
}

fn parse_csv_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(usage(format!("{what} must be a comma-separated list of numbers, got `{text}`"))),
    }
}

fn check_dim(got: usize, expected: usize, what: &str) -> Result<(), Failure> {
    if got == expected {
        Ok(())
    } else {
        Err(usage(format!("{what} has {got} entries but the model needs {expected}")))
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(args: &SimulateArgs) -> Result<i32, Failure> {
    let (model, hash) = load_model(&args.model, args.kind)?;
    let initial = parse_csv_list(&args.initial, "--initial")?;
    let reference = match &args.reference {
        Some(text) => Some(parse_csv_list(text, "--ref")?),
        None => None,
    };
    if args.beta.is_some() && args.dynamics != Dynamics::Master {
        return Err(usage("--beta only applies to master dynamics"));
    }
    let config = IntegratorConfig {
        method: match args.method {
            MethodArg::Rk4 => Method::Rk4,
            MethodArg::Rk45 => Method::Rk45,
        },
        step: args.step,
        rel_tol: args.rel_tol,
        abs_tol: args.abs_tol,
        ..IntegratorConfig::default()
    };

    let dist_from = |values: &[f64], what: &str| -> Result<ProbDist, Failure> {
        ProbDist::new(values.to_vec()).map_err(|e| usage(format!("{what} is not a probability distribution: {e}")))
    };

    let (traj, state_names) = match (args.dynamics, &model) {
        (Dynamics::Replicator, Model::Matrix(a)) => {
            check_dim(initial.len(), a.n(), "--initial")?;
            let p0 = dist_from(&initial, "--initial")?;
            let mut monitors = Vec::new();
            if let Some(reference) = &reference {
                check_dim(reference.len(), a.n(), "--ref")?;
                let q = dist_from(reference, "--ref")?;
                monitors.extend(divergence_monitors(q.weights().to_vec(), false));
            }
            let fitness = FitnessModel::linear(a.clone());
            let field = replicator_field(&fitness);
            let traj = run_integration(field, p0.weights(), args.t_end, &config, &monitors)?;
            let names: Vec<String> = (0..a.n()).map(|i| format!("s{i}")).collect();
            (traj, names)
        }
        (Dynamics::Master, Model::Markov(process)) => {
            check_dim(initial.len(), process.n(), "--initial")?;
            let p0 = dist_from(&initial, "--initial")?;
            let mut monitors = Vec::new();
            let q_ref = match &reference {
                Some(reference) => {
                    check_dim(reference.len(), process.n(), "--ref")?;
                    let q = dist_from(reference, "--ref")?;
                    monitors.extend(divergence_monitors(q.weights().to_vec(), false));
                    Some(q)
                }
                None => None,
            };
            if let Some(beta) = args.beta {
                let q_energy = match q_ref {
                    Some(q) => q,
                    None => {
                        let mut list = steady_states(process, 1e-9);
                        if list.len() != 1 {
                            return Err(usage(format!(
                                "--beta without --ref needs a unique steady state; the model has {}",
                                list.len()
                            )));
                        }
                        list.pop().expect("checked length")
                    }
                };
                let energy_model = energies_from_steady_state(&q_energy, beta, None, process.states())
                    .map_err(|e| usage(format!("cannot build an energy model: {e}")))?;
                let energies: Vec<f64> = energy_model.energies().to_vec();
                let temperature = energy_model.temperature();
                monitors.push(Monitor::new("free_energy", move |p: &[f64]| {
                    let mean: f64 = p.iter().zip(&energies).map(|(w, e)| w * e).sum();
                    let entropy: f64 = -p.iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum::<f64>();
                    mean - temperature * entropy
                }));
            }
            let h = hamiltonian(process);
            let field = master_field(&h);
            let traj = run_integration(field, p0.weights(), args.t_end, &config, &monitors)?;
            (traj, process.states().to_vec())
        }
        (Dynamics::Rate, Model::Network(network)) => {
            check_dim(initial.len(), network.k(), "--initial")?;
            let p0 = Population::new(initial.clone())
                .map_err(|e| usage(format!("--initial is not a population: {e}")))?;
            let mut monitors = Vec::new();
            if let Some(reference) = &reference {
                check_dim(reference.len(), network.k(), "--ref")?;
                Population::new(reference.clone())
                    .map_err(|e| usage(format!("--ref is not a population: {e}")))?;
                monitors.extend(divergence_monitors(reference.clone(), true));
            }
            for (index, law) in conservation_laws(network, 1e-10).into_iter().enumerate() {
                let coefficients: Vec<f64> = law.iter().copied().collect();
                monitors.push(Monitor::new(format!("conserved_{index}"), move |p: &[f64]| {
                    p.iter().zip(&coefficients).map(|(a, b)| a * b).sum()
                }));
            }
            let field = rate_field(network);
            let traj = run_integration(field, p0.counts(), args.t_end, &config, &monitors)?;
            (traj, network.species().to_vec())
        }
        (dynamics, model) => {
            let needed = match dynamics {
                Dynamics::Replicator => "a payoff matrix (.mat)",
                Dynamics::Master => "a Markov process (.mk)",
                Dynamics::Rate => "a reaction network (.rn)",
            };
            return Err(usage(format!(
                "{} dynamics needs {needed}, but `{}` is a {}",
                match dynamics {
                    Dynamics::Replicator => "replicator",
                    Dynamics::Master => "master",
                    Dynamics::Rate => "rate",
                },
                args.model.display(),
                model.kind_name()
            )));
        }
    };

    let exit_code = monotone_exit_code(&traj, args)?;

    let rendered = match args.format {
        TrajectoryFormat::Csv => trajectory_csv(&traj, &state_names),
        TrajectoryFormat::Json => trajectory_json(&traj, &state_names),
    };
    match &args.out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| runtime(format!("cannot write `{}`: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(rendered.as_bytes())
                .map_err(|e| runtime(format!("cannot write to standard output: {e}")))?;
        }
    }

    let report = simulate_report(args, &hash, &config, &traj, exit_code);
    eprint!("{report}");
    Ok(exit_code)
}

fn run_integration(
    field: impl FnMut(f64, &[f64], &mut [f64]),
    x0: &[f64],
    t_end: f64,
    config: &IntegratorConfig,
    monitors: &[Monitor],
) -> Result<Trajectory, Failure> {
    integrate(field, x0, t_end, config, monitors).map_err(|e| match e {
        OdeError::Invalid(_) => usage(e.to_string()),
        _ => runtime(e.to_string()),
    })
}

/// The two divergence channels against a fixed reference; `population` picks
/// the unnormalized variant used under rate dynamics.
fn divergence_monitors(reference: Vec<f64>, population: bool) -> Vec<Monitor> {
    let q_forward = reference.clone();
    let q_backward = reference;
    if population {
        vec![
            Monitor::new("I(ref,state)", move |p: &[f64]| {
                population_relative_information_raw(&q_forward, p)
            }),
            Monitor::new("I(state,ref)", move |p: &[f64]| {
                population_relative_information_raw(p, &q_backward)
            }),
        ]
    } else {
        vec![
            Monitor::new("I(ref,state)", move |p: &[f64]| relative_information_raw(&q_forward, p)),
            Monitor::new("I(state,ref)", move |p: &[f64]| relative_information_raw(p, &q_backward)),
        ]
    }
}

/// Largest increase between consecutive grid points, treating equal
/// infinities as flat.
fn worst_increase(series: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for w in series.windows(2) {
        let (prev, next) = (w[0], w[1]);
        if next <= prev || (prev.is_infinite() && next.is_infinite() && prev == next) {
            continue;
        }
        worst = worst.max(next - prev);
    }
    worst
}

/// Splits a channel list on commas, except inside parentheses: the
/// divergence channels are themselves named with commas.
fn split_channel_list(request: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for c in request.chars() {
        match c {
            '(' => {
                depth += 1;
                current.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                current.push(c);
            }
            ',' if depth == 0 => {
                out.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(c),
        }
    }
    out.push(current.trim().to_string());
    out
}

fn monotone_exit_code(traj: &Trajectory, args: &SimulateArgs) -> Result<i32, Failure> {
    let Some(request) = &args.monotone else {
        return Ok(0);
    };
    let available: Vec<&str> = traj.channels.iter().map(|(name, _)| name.as_str()).collect();
    let requested: Vec<String> = if request == "all" {
        available.iter().map(|s| s.to_string()).collect()
    } else {
        split_channel_list(request)
    };
    let mut violated = false;
    for name in &requested {
        let series = traj
            .channel(name)
            .ok_or_else(|| usage(format!("--monotone names unknown channel `{name}`; available: {available:?}")))?;
        if worst_increase(series) > args.slack {
            violated = true;
        }
    }
    Ok(if violated { 3 } else { 0 })
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

fn argv_echo() -> String {
    std::env::args().skip(1).collect::<Vec<_>>().join(" ")
}

fn channel_stats(series: &[f64]) -> (f64, f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in series {
        if v < min {
            min = v;
        }
        if v > max {
            max = v;
        }
    }
    (min, max, *series.last().expect("nonempty series"))
}

fn simulate_report(
    args: &SimulateArgs,
    hash: &str,
    config: &IntegratorConfig,
    traj: &Trajectory,
    exit_code: i32,
) -> String {
    let mut report = String::new();
    report.push_str(&format!("model: {} sha256={hash}\n", args.model.display()));
    report.push_str(&format!("command: {}\n", argv_echo()));
    report.push_str(&format!(
        "integrator: method={} step={} rel-tol={} abs-tol={}\n",
        match config.method {
            Method::Rk4 => "rk4",
            Method::Rk45 => "rk45",
        },
        fmt(config.step),
        fmt(config.rel_tol),
        fmt(config.abs_tol),
    ));
    report.push_str(&format!(
        "points: {} accepted={} rejected={} clamped={}\n",
        traj.len(),
        traj.stats.accepted_steps,
        traj.stats.rejected_steps,
        traj.stats.clamp_events,
    ));
    for (name, series) in &traj.channels {
        let (min, max, last) = channel_stats(series);
        let worst = worst_increase(series);
        let verdict = if worst <= args.slack { "nonincreasing" } else { "increasing" };
        report.push_str(&format!(
            "channel {name}: min={} max={} final={} monotone={verdict} worst-increase={} slack={}\n",
            fmt(min),
            fmt(max),
            fmt(last),
            fmt(worst),
            fmt(args.slack),
        ));
    }
    report.push_str(&format!("exit: {exit_code}\n"));
    report
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn cmd_analyze(cmd: &AnalyzeCommand) -> Result<i32, Failure> {
    match cmd {
        AnalyzeCommand::Game(args) => analyze_game(args),
        AnalyzeCommand::SteadyStates(args) => analyze_steady_states(args),
        AnalyzeCommand::ComplexBalance(args) => analyze_complex_balance(args),
        AnalyzeCommand::Energies(args) => analyze_energies(args),
    }
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")
}

fn json_list(values: &[f64]) -> String {
    let rendered: Vec<String> = values
        .iter()
        .map(|v| if v.is_finite() { format!("{v}") } else { format!("\"{}\"", fmt(*v)) })
        .collect();
    format!("[{}]", rendered.join(","))
}

fn analyze_game(args: &GameArgs) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(&args.matrix)
        .map_err(|e| usage(format!("cannot read `{}`: {e}", args.matrix.display())))?;
    let matrix = GameMatrix::parse(&text)
        .map_err(|e| usage(format!("{}: {e}", args.matrix.display())))?;
    let values = parse_csv_list(&args.strategy, "--strategy")?;
    check_dim(values.len(), matrix.n(), "--strategy")?;
    let q = ProbDist::new(values)
        .map_err(|e| usage(format!("--strategy is not a probability distribution: {e}")))?;
    if args.common.tol <= 0.0 {
        return Err(usage("--tol must be positive"));
    }
    let (name, verdict) = match args.check {
        GameCheck::Nash => ("nash", is_symmetric_nash(&q, &matrix, args.common.tol)),
        GameCheck::Ess => {
            ("ess", is_ess(&q, &matrix, args.common.tol, args.common.samples, args.common.seed))
        }
        GameCheck::Dominant => {
            ("dominant", is_dominant(&q, &matrix, args.common.tol, args.common.samples, args.common.seed))
        }
        GameCheck::Thomas => {
            ("thomas", is_thomas_ess(&q, &matrix, args.common.tol, args.common.samples, args.common.seed))
        }
    };
    print_game_verdict(name, &verdict, args.common.format);
    Ok(match verdict.status {
        VerdictStatus::Holds => 0,
        VerdictStatus::Fails => 1,
        VerdictStatus::Inconclusive => 4,
    })
}

fn print_game_verdict(check: &str, verdict: &StrategyVerdict, format: ReportFormat) {
    let status = match verdict.status {
        VerdictStatus::Holds => "holds",
        VerdictStatus::Fails => "fails",
        VerdictStatus::Inconclusive => "inconclusive",
    };
    match format {
        ReportFormat::Text => {
            println!("check: {check}");
            println!("status: {status}");
            println!("margin: {}", fmt(verdict.margin));
            match &verdict.witness {
                Some(w) => println!("witness: {}", csv_row(w.weights())),
                None => println!("witness: none"),
            }
        }
        ReportFormat::Json => {
            let witness = match &verdict.witness {
                Some(w) => json_list(w.weights()),
                None => "null".to_string(),
            };
            println!(
                "{{\"check\":\"{check}\",\"status\":\"{status}\",\"margin\":{},\"witness\":{witness}}}",
                if verdict.margin.is_finite() {
                    format!("{}", verdict.margin)
                } else {
                    format!("\"{}\"", fmt(verdict.margin))
                }
            );
        }
    }
}

fn analyze_steady_states(args: &SteadyStatesArgs) -> Result<i32, Failure> {
    let (model, _) = load_model(&args.model, None)?;
    let Model::Markov(process) = model else {
        return Err(usage(format!(
            "steady-state analysis needs a Markov process (.mk), but `{}` is a {}",
            args.model.display(),
            model.kind_name()
        )));
    };
    if args.common.tol <= 0.0 {
        return Err(usage("--tol must be positive"));
    }
    let h = hamiltonian(&process);
    let list = steady_states(&process, args.common.tol);
    let residual = |q: &ProbDist| (h.matrix() * DVector::from_column_slice(q.weights())).amax();
    match args.common.format {
        ReportFormat::Text => {
            println!("states: {}", process.states().join(","));
            for (i, q) in list.iter().enumerate() {
                println!("steady-state {i}: {} residual={}", csv_row(q.weights()), fmt(residual(q)));
            }
        }
        ReportFormat::Json => {
            let entries: Vec<String> = list
                .iter()
                .map(|q| {
                    format!(
                        "{{\"distribution\":{},\"residual\":{}}}",
                        json_list(q.weights()),
                        fmt(residual(q))
                    )
                })
                .collect();
            println!("{{\"steady_states\":[{}]}}", entries.join(","));
        }
    }
    Ok(0)
}

fn analyze_complex_balance(args: &ComplexBalanceArgs) -> Result<i32, Failure> {
    let (model, _) = load_model(&args.model, None)?;
    let Model::Network(network) = model else {
        return Err(usage(format!(
            "complex-balance analysis needs a reaction network (.rn), but `{}` is a {}",
            args.model.display(),
            model.kind_name()
        )));
    };
    let values = parse_csv_list(&args.point, "--point")?;
    check_dim(values.len(), network.k(), "--point")?;
    let point = Population::new(values).map_err(|e| usage(format!("--point is not a population: {e}")))?;
    if args.common.tol <= 0.0 {
        return Err(usage("--tol must be positive"));
    }
    let report = is_complex_balanced(&network, &point, args.common.tol);
    match args.common.format {
        ReportFormat::Text => {
            println!("balanced: {}", report.balanced);
            println!("tolerance: {}", fmt(report.tolerance));
            println!("scale: {}", fmt(report.scale));
            for (i, residual) in report.residuals.iter().enumerate() {
                println!("complex {}: residual={}", network.complex_display(i), fmt(*residual));
            }
        }
        ReportFormat::Json => {
            let residuals: Vec<String> = report
                .residuals
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    format!("{{\"complex\":\"{}\",\"residual\":{}}}", network.complex_display(i), fmt(*r))
                })
                .collect();
            println!(
                "{{\"balanced\":{},\"tolerance\":{},\"scale\":{},\"residuals\":[{}]}}",
                report.balanced,
                fmt(report.tolerance),
                fmt(report.scale),
                residuals.join(",")
            );
        }
    }
    Ok(if report.balanced { 0 } else { 1 })
}

fn analyze_energies(args: &EnergiesArgs) -> Result<i32, Failure> {
    let (model, _) = load_model(&args.model, None)?;
    let Model::Markov(process) = model else {
        return Err(usage(format!(
            "energy analysis needs a Markov process (.mk), but `{}` is a {}",
            args.model.display(),
            model.kind_name()
        )));
    };
    let ground = match &args.ground {
        Some(name) => Some(
            process
                .state_index(name)
                .ok_or_else(|| usage(format!("unknown ground state `{name}`")))?,
        ),
        None => None,
    };
    if args.common.tol <= 0.0 {
        return Err(usage("--tol must be positive"));
    }
    let list = steady_states(&process, args.common.tol);
    if list.len() != 1 {
        return Err(runtime(format!(
            "energy extraction needs a unique steady state; the model has {}",
            list.len()
        )));
    }
    let q = &list[0];
    let energy_model = energies_from_steady_state(q, args.beta, ground, process.states())
        .map_err(|e| runtime(e.to_string()))?;
    let f_q = free_energy(q, &energy_model);
    match args.common.format {
        ReportFormat::Text => {
            println!("beta: {}", fmt(energy_model.beta()));
            println!("partition: {}", fmt(energy_model.partition()));
            println!("free-energy: {}", fmt(f_q));
            for (i, name) in process.states().iter().enumerate() {
                println!(
                    "state {name}: energy={} probability={}",
                    fmt(energy_model.energies()[i]),
                    fmt(q.weights()[i])
                );
            }
        }
        ReportFormat::Json => {
            let states: Vec<String> = process
                .states()
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    format!(
                        "{{\"state\":\"{name}\",\"energy\":{},\"probability\":{}}}",
                        fmt(energy_model.energies()[i]),
                        fmt(q.weights()[i])
                    )
                })
                .collect();
            println!(
                "{{\"beta\":{},\"partition\":{},\"free_energy\":{},\"states\":[{}]}}",
                fmt(energy_model.beta()),
                fmt(energy_model.partition()),
                fmt(f_q),
                states.join(",")
            );
        }
    }
    Ok(0)
}
