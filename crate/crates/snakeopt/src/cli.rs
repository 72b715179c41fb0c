//! Command-line interface: eight subcommands wiring processor construction,
//! simulated characterization, weight training, optimization, healing,
//! stitching, simulation sweeps, and benchmark reporting into reproducible
//! artifact bundles.
//!
//! Every command writes its artifacts into the `--out` directory through
//! atomic renames and closes the bundle with a `manifest.json` recording the
//! tool version, command, seed, input hashes, and output names. Exit codes:
//! 0 success, 1 internal/module failure, 2 bad arguments (including a
//! missing seed on a stochastic command), 3 unreadable or unparsable input,
//! 4 numerical failure. The `SNAKEOPT_SEED` environment variable overrides
//! `--seed` so CI can pin whole pipelines externally.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::benchlab::{
    outlier_fraction, report_table_csv, run_mitigation_sweep, run_runtime_sweep,
    run_scaling_sweep, run_scope_sweep, MitigationSweepOptions, PercentileReport, ReportRow,
    RuntimeSweepOptions, ScalingSweepOptions, ScopeSweepOptions,
};
use crate::error::{Error, Result};
use crate::estimator::{
    hard_bounds, BenchmarkPrediction, Bounds, BoundsOptions, ConfigFile, Estimator,
    MitigationFlags, WeightTable,
};
use crate::fileio::{
    read_input, read_json, sha256_file, sha256_hex, write_atomic, write_json_atomic, CharFile,
    RunManifest,
};
use crate::genmodel::{generate, GenerativeSpec, Priors, SynthesisConfig};
use crate::snake::{
    heal, optimize, select_heal_targets, stitch, HealThresholds, InnerSolver, Scope, SeedOutcome,
    SeedStrategy, SnakeParams, StepRecord, StitchPlan, TraversalHeuristic, TraversalRule,
    DEFAULT_GRID_STEP,
};
use crate::topology::{
    build_surface_code_lattice, color_cz_layers, GateVariableGraph, ProcessorGraph, VarId,
};
use crate::train::{
    synthesize_training_set, train_weights, SynthesisOptions, TrainOptions, TrainingSample,
};

// ====================== Top-level command ======================

/// Frequency placement for lattices of tunable coupled qubits.
#[derive(Debug, Parser)]
#[command(name = "snakeopt", version, about)]
pub struct Cli {
    /// Worker threads for multi-seed optimization and sweeps
    /// [default: logical cores].
    #[arg(long, global = true, value_name = "K")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit a processor description (qubit grid and couplers).
    Topo(TopoArgs),
    /// Draw simulated characterization data for a processor.
    Gen(GenArgs),
    /// Fit error-model weights from benchmark samples.
    Train(TrainArgs),
    /// Optimize a full frequency configuration.
    Optimize(OptimizeArgs),
    /// Re-optimize outlier neighborhoods of an existing configuration.
    Heal(HealArgs),
    /// Optimize column regions in parallel, then reconcile the seams.
    Stitch(StitchArgs),
    /// Run a simulation study (scope, mitigation, scaling, or runtime).
    Sweep(SweepArgs),
    /// Predict benchmark distributions for a configuration.
    Report(ReportArgs),
}

/// Parses the process arguments, installs the worker pool, runs the chosen
/// command, and maps failures to the documented exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Args(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Module(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse(_) => 3,
                Error::Numerical(_) => 4,
                _ => 1,
            }
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Topo(a) => cmd_topo(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Heal(a) => cmd_heal(a),
        Command::Stitch(a) => cmd_stitch(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    }
}

// ====================== Failure plumbing ======================

/// A command failure: either an argument problem (exit 2) or a module error
/// mapped through the error taxonomy (exit 3 for parse, 4 for numerical,
/// 1 otherwise).
#[derive(Debug)]
enum Failure {
    Args(String),
    Module(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Module(e)
    }
}

fn bad_args(msg: impl Into<String>) -> Failure {
    Failure::Args(msg.into())
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Serializes one result document, routing serializer errors through the
/// module taxonomy.
fn to_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Resolves the run seed: `SNAKEOPT_SEED` wins over `--seed`, and a
/// stochastic command with neither is an argument error.
fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Ok(s) = std::env::var("SNAKEOPT_SEED") {
        return s
            .trim()
            .parse()
            .map_err(|_| bad_args(format!("SNAKEOPT_SEED must be an unsigned integer, got {s:?}")));
    }
    flag.ok_or_else(|| bad_args("a seed is required: pass --seed <N> or set SNAKEOPT_SEED"))
}

// ====================== Shared solver flags ======================

/// Optimizer knobs shared by `optimize`, `heal`, and `stitch`.
#[derive(Debug, Args)]
pub struct SolverOpts {
    /// Optimization scope: a bounded radius such as `2`, or `global`.
    #[arg(long, default_value = "2", value_name = "S")]
    pub scope: String,

    /// Traversal rule: nearest | next-nearest | ring
    /// [default: next-nearest for scope ≤ 3, ring otherwise].
    #[arg(long, value_name = "RULE")]
    pub rule: Option<String>,

    /// Traversal heuristic: breadth | depth | random.
    #[arg(long, default_value = "breadth", value_name = "H")]
    pub heuristic: String,

    /// Seed variables: `all`, or a count drawn at random.
    #[arg(long, default_value = "3", value_name = "N")]
    pub seeds: String,

    /// Sub-problem solver: auto | exhaustive | stochastic.
    #[arg(long, default_value = "auto", value_name = "SOLVER")]
    pub solver: String,

    /// Frequency grid pitch in GHz.
    #[arg(long, default_value_t = DEFAULT_GRID_STEP, value_name = "GHZ")]
    pub step: f64,

    /// Evaluation budget per sub-problem for stochastic solves.
    #[arg(long, default_value_t = 600, value_name = "EVALS")]
    pub budget: usize,
}

impl SolverOpts {
    /// Builds and validates the optimizer parameterization; any invalid
    /// value or combination is an argument error.
    fn params(&self, seed: u64) -> CliResult<SnakeParams> {
        let scope = match self.scope.as_str() {
            "global" => Scope::Global,
            s => Scope::Bounded(
                s.parse::<u32>()
                    .ok()
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| bad_args(format!("--scope must be `global` or ≥ 1, got {s:?}")))?,
            ),
        };
        let rule = match self.rule.as_deref() {
            Some("nearest") => TraversalRule::Nearest,
            Some("next-nearest") => TraversalRule::NextNearest,
            Some("ring") => TraversalRule::Ring,
            Some(other) => {
                return Err(bad_args(format!(
                    "--rule must be nearest, next-nearest, or ring, got {other:?}"
                )))
            }
            None => match scope {
                Scope::Bounded(s) if s <= 3 => TraversalRule::NextNearest,
                _ => TraversalRule::Ring,
            },
        };
        let heuristic = match self.heuristic.as_str() {
            "breadth" => TraversalHeuristic::Breadth,
            "depth" => TraversalHeuristic::Depth,
            "random" => TraversalHeuristic::Random,
            other => {
                return Err(bad_args(format!(
                    "--heuristic must be breadth, depth, or random, got {other:?}"
                )))
            }
        };
        let seeds = match self.seeds.as_str() {
            "all" => SeedStrategy::AllSeeds,
            s => SeedStrategy::RandomSubset(
                s.parse::<usize>()
                    .ok()
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| bad_args(format!("--seeds must be `all` or ≥ 1, got {s:?}")))?,
            ),
        };
        let solver = match self.solver.as_str() {
            "auto" => InnerSolver::Auto {
                step: self.step,
                budget: self.budget,
            },
            "exhaustive" => InnerSolver::ExhaustiveGrid { step: self.step },
            "stochastic" => InnerSolver::StochasticGlobal {
                step: self.step,
                budget: self.budget,
            },
            other => {
                return Err(bad_args(format!(
                    "--solver must be auto, exhaustive, or stochastic, got {other:?}"
                )))
            }
        };
        let params = SnakeParams {
            scope,
            rule,
            heuristic,
            seeds,
            solver,
            seed,
        };
        params.validate().map_err(|e| bad_args(e.to_string()))?;
        Ok(params)
    }
}

// ====================== Shared model loading ======================

/// Everything the optimization commands need, loaded from a characterization
/// bundle and an optional weight table.
struct ModelContext {
    char: CharFile,
    graph: Arc<GateVariableGraph>,
    est: Estimator,
    bounds: Bounds,
    /// Joint digest of the characterization and weight inputs; identifies
    /// the error model a configuration was optimized against.
    estimator_digest: String,
}

fn load_context(char_path: &Path, weights_path: Option<&Path>) -> Result<ModelContext> {
    let char_bytes = read_input(char_path)?;
    let char: CharFile = serde_json::from_slice(&char_bytes)
        .map_err(|e| Error::parse(format!("{}: {e}", char_path.display())))?;
    let char_hash = sha256_hex(&char_bytes);
    let (weights, weights_hash) = match weights_path {
        Some(p) => (read_json::<WeightTable>(p)?, sha256_file(p)?),
        None => {
            let w = WeightTable::reference();
            let hash = sha256_hex(serde_json::to_string(&w)?.as_bytes());
            (w, hash)
        }
    };
    let graph = Arc::new(GateVariableGraph::from_processor(&char.processor));
    let layers = color_cz_layers(&char.processor)?;
    let est = Estimator::build(
        graph.clone(),
        Arc::new(char.data.clone()),
        &layers,
        MitigationFlags::all(),
        weights,
    )?;
    let bounds = hard_bounds(&char.data, &graph, &BoundsOptions::default())?;
    let estimator_digest = sha256_hex(format!("{char_hash}{weights_hash}").as_bytes());
    Ok(ModelContext {
        char,
        graph,
        est,
        bounds,
        estimator_digest,
    })
}

// ====================== Configuration documents ======================

/// Provenance block attached to every configuration the tool writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub params: SnakeParams,
    /// Joint digest of the characterization and weight inputs.
    pub estimator: String,
    /// Full-model error sum at the stored configuration.
    pub total_error: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub closure: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seam: Vec<String>,
}

impl Provenance {
    fn new(command: &str, seed: u64, params: SnakeParams, ctx: &ModelContext, total: f64) -> Self {
        Provenance {
            tool: "snakeopt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            params,
            estimator: ctx.estimator_digest.clone(),
            total_error: total,
            targets: Vec::new(),
            closure: Vec::new(),
            regions: None,
            seam: Vec::new(),
        }
    }
}

/// On-disk configuration: the variable map and bounds plus how they were
/// produced. Hand-written configurations may omit the provenance block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigDocument {
    #[serde(flatten)]
    pub config: ConfigFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Per-step trace of an optimization run; written only on request since
/// wall-clock fields make it inherently run-specific.
#[derive(Debug, Serialize)]
struct TraceDocument<'a> {
    best_seed: String,
    seeds: &'a [SeedOutcome],
    steps: &'a [StepRecord],
}

/// Trace of a healing run: its single thread's steps.
#[derive(Debug, Serialize)]
struct HealTrace<'a> {
    steps: &'a [StepRecord],
}

fn names(graph: &GateVariableGraph, vars: &[VarId]) -> Vec<String> {
    vars.iter().map(|&v| graph.name(v)).collect()
}

// ====================== topo ======================

#[derive(Debug, Args)]
pub struct TopoArgs {
    /// Surface-code distance d; yields a 2d²−1-qubit lattice.
    #[arg(long, value_name = "D", conflicts_with = "standard68")]
    pub distance: Option<u32>,

    /// Emit the bundled 68-qubit processor instead.
    #[arg(long)]
    pub standard68: bool,

    /// Output bundle directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

fn cmd_topo(args: TopoArgs) -> CliResult<()> {
    let processor = match args.distance {
        Some(d) => build_surface_code_lattice(d)?,
        None if args.standard68 => ProcessorGraph::standard68(),
        None => return Err(bad_args("pass --distance <D> or --standard68")),
    };
    let mut manifest = RunManifest::new("topo", None);
    write_json_atomic(&args.out.join("proc.json"), &processor)?;
    manifest.record_output("proc.json");
    manifest.write(&args.out)?;
    println!(
        "wrote {}: {} with {} qubits, {} couplers",
        args.out.join("proc.json").display(),
        processor.name(),
        processor.n_qubits(),
        processor.couplers().len()
    );
    Ok(())
}

// ====================== gen ======================

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Processor description file (JSON).
    #[arg(long, value_name = "FILE")]
    pub proc: PathBuf,

    /// Optional prior/synthesis overrides: JSON with `priors` and/or
    /// `synthesis` objects.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,

    /// Master seed for the generative draw.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Output bundle directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

/// Partial generative-spec file: absent sections keep their defaults.
#[derive(Debug, Default, Deserialize)]
struct SpecOverrides {
    #[serde(default)]
    priors: Option<Priors>,
    #[serde(default)]
    synthesis: Option<SynthesisConfig>,
}

fn cmd_gen(args: GenArgs) -> CliResult<()> {
    let seed = resolve_seed(args.seed)?;
    let processor: ProcessorGraph = read_json(&args.proc)?;
    let mut spec = GenerativeSpec::new(processor, seed);
    if let Some(path) = &args.spec {
        let overrides: SpecOverrides = read_json(path)?;
        if let Some(p) = overrides.priors {
            spec.priors = p;
        }
        if let Some(s) = overrides.synthesis {
            spec.synthesis = s;
        }
    }
    let data = generate(&spec)?;
    let bundle = CharFile {
        processor: spec.processor.clone(),
        data,
    };
    let mut manifest = RunManifest::new("gen", Some(seed));
    manifest.record_input(&args.proc)?;
    if let Some(path) = &args.spec {
        manifest.record_input(path)?;
    }
    write_json_atomic(&args.out.join("genspec.json"), &spec)?;
    manifest.record_output("genspec.json");
    write_json_atomic(&args.out.join("char.json"), &bundle)?;
    manifest.record_output("char.json");
    manifest.write(&args.out)?;
    println!(
        "wrote {}: {} qubits characterized (seed {seed})",
        args.out.join("char.json").display(),
        bundle.data.qubits.len()
    );
    Ok(())
}

// ====================== train ======================

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Characterization bundle (char.json).
    #[arg(long = "char", value_name = "FILE")]
    pub characterization: PathBuf,

    /// Measured training samples, one JSON object per line; synthesized
    /// from the characterization when absent.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,

    /// Synthesized samples per circuit context (isolated and parallel).
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,

    /// Multiplicative measurement noise σ for synthesized samples.
    #[arg(long, value_name = "SIGMA")]
    pub noise: Option<f64>,

    /// Gradient iterations per training phase.
    #[arg(long, value_name = "N")]
    pub iterations: Option<usize>,

    /// Gradient step size.
    #[arg(long, value_name = "LR")]
    pub learning_rate: Option<f64>,

    /// Fraction of targets held out for fit-quality reporting.
    #[arg(long, value_name = "FRAC")]
    pub holdout: Option<f64>,

    /// Seed for synthesis and the train/holdout split.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Output bundle directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

/// Parses a JSON-lines training file, naming the line in any error.
fn read_training_lines(path: &Path, n_vars: usize) -> Result<Vec<TrainingSample>> {
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample: TrainingSample = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("{} line {}: {e}", path.display(), i + 1)))?;
        if sample.config.len() != n_vars {
            return Err(Error::parse(format!(
                "{} line {}: configuration has {} variables, processor has {n_vars}",
                path.display(),
                i + 1,
                sample.config.len()
            )));
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::parse(format!(
            "{}: no training samples",
            path.display()
        )));
    }
    Ok(samples)
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let seed = resolve_seed(args.seed)?;
    let ctx = load_context(&args.characterization, None)?;
    let samples = match &args.data {
        Some(path) => read_training_lines(path, ctx.est.n_vars())?,
        None => {
            let defaults = SynthesisOptions::default();
            let opts = SynthesisOptions {
                n_isolated: args.samples.unwrap_or(defaults.n_isolated),
                n_parallel: args.samples.unwrap_or(defaults.n_parallel),
                noise: args.noise.unwrap_or(defaults.noise),
                seed,
            };
            synthesize_training_set(&ctx.est, &ctx.bounds, &opts)?
        }
    };
    let defaults = TrainOptions::default();
    let opts = TrainOptions {
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        iterations: args.iterations.unwrap_or(defaults.iterations),
        holdout_fraction: args.holdout.unwrap_or(defaults.holdout_fraction),
        seed,
    };
    let report = train_weights(&ctx.est, &samples, &opts)?;
    let mut manifest = RunManifest::new("train", Some(seed));
    manifest.record_input(&args.characterization)?;
    if let Some(path) = &args.data {
        manifest.record_input(path)?;
    }
    write_json_atomic(&args.out.join("weights.json"), &report.weights)?;
    manifest.record_output("weights.json");
    write_json_atomic(&args.out.join("train_report.json"), &report)?;
    manifest.record_output("train_report.json");
    manifest.write(&args.out)?;
    let last = report.phases.last();
    println!(
        "wrote {}: {} samples, {} phases, holdout MAE {}",
        args.out.join("weights.json").display(),
        samples.len(),
        report.phases.len(),
        last.map_or("n/a".into(), |p| format!("{:.3e}", p.holdout_mae))
    );
    Ok(())
}

// ====================== optimize ======================

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Characterization bundle (char.json).
    #[arg(long = "char", value_name = "FILE")]
    pub characterization: PathBuf,

    /// Trained weight table [default: reference weights].
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,

    #[command(flatten)]
    pub solver: SolverOpts,

    /// Also write a per-step trace (trace.json, wall-clock included).
    #[arg(long)]
    pub trace: bool,

    /// Master seed for traversal and solver randomness.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Output bundle directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

fn cmd_optimize(args: OptimizeArgs) -> CliResult<()> {
    let seed = resolve_seed(args.seed)?;
    let ctx = load_context(&args.characterization, args.weights.as_deref())?;
    let params = args.solver.params(seed)?;
    let result = optimize(&ctx.est, &ctx.bounds, &params)?;
    let doc = ConfigDocument {
        config: ConfigFile::from_state(&ctx.graph, &result.values, &ctx.bounds),
        provenance: Some(Provenance::new("optimize", seed, params, &ctx, result.total)),
    };
    let mut manifest = RunManifest::new("optimize", Some(seed));
    manifest.record_input(&args.characterization)?;
    if let Some(path) = &args.weights {
        manifest.record_input(path)?;
    }
    write_json_atomic(&args.out.join("config.json"), &doc)?;
    manifest.record_output("config.json");
    if args.trace {
        let trace = TraceDocument {
            best_seed: ctx.graph.name(result.best_seed),
            seeds: &result.seeds,
            steps: &result.steps,
        };
        write_json_atomic(&args.out.join("trace.json"), &trace)?;
        manifest.record_output("trace.json");
    }
    manifest.write(&args.out)?;
    println!(
        "wrote {}: total error {:.6e} (best seed {}, {} threads)",
        args.out.join("config.json").display(),
        result.total,
        ctx.graph.name(result.best_seed),
        result.seeds.len()
    );
    Ok(())
}

// ====================== heal ======================

#[derive(Debug, Args)]
pub struct HealArgs {
    /// Characterization bundle (char.json).
    #[arg(long = "char", value_name = "FILE")]
    pub characterization: PathBuf,

    /// Trained weight table [default: reference weights].
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,

    /// Configuration to heal (config.json).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,

    /// `auto` (benchmark-threshold selection) or a comma-separated list of
    /// gate-variable names.
    #[arg(long, default_value = "auto", value_name = "WHICH")]
    pub targets: String,

    /// Interaction outlier threshold on the cycle error.
    #[arg(long, value_name = "E")]
    pub interaction_threshold: Option<f64>,

    /// Idle outlier threshold on the single-qubit error.
    #[arg(long, value_name = "E")]
    pub idle_threshold: Option<f64>,

    /// Outlier-pair count that flags a shared qubit.
    #[arg(long, value_name = "N")]
    pub outlier_membership: Option<usize>,

    #[command(flatten)]
    pub solver: SolverOpts,

    /// Also write a per-step trace (heal_trace.json).
    #[arg(long)]
    pub trace: bool,

    /// Master seed for traversal and solver randomness.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Output bundle directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

fn cmd_heal(args: HealArgs) -> CliResult<()> {
    let seed = resolve_seed(args.seed)?;
    let ctx = load_context(&args.characterization, args.weights.as_deref())?;
    let doc: ConfigDocument = read_json(&args.config)?;
    let (vals, file_bounds) = doc.config.into_state(&ctx.graph)?;
    let targets: Vec<VarId> = if args.targets == "auto" {
        let defaults = HealThresholds::default();
        let thresholds = HealThresholds {
            interaction: args.interaction_threshold.unwrap_or(defaults.interaction),
            idle: args.idle_threshold.unwrap_or(defaults.idle),
            outlier_membership: args
                .outlier_membership
                .unwrap_or(defaults.outlier_membership),
        };
        let prediction = ctx.est.predict_benchmarks(&vals)?;
        select_heal_targets(&ctx.graph, &prediction, &thresholds)
    } else {
        args.targets
            .split(',')
            .map(|name| {
                ctx.graph
                    .lookup_name(name.trim())
                    .map_err(|e| bad_args(format!("--targets: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()?
    };

    let params = args.solver.params(seed)?;
    let mut manifest = RunManifest::new("heal", Some(seed));
    manifest.record_input(&args.characterization)?;
    if let Some(path) = &args.weights {
        manifest.record_input(path)?;
    }
    manifest.record_input(&args.config)?;

    if targets.is_empty() {
        // Nothing above thresholds: pass the configuration through unchanged.
        let total = ctx.est.evaluate(&vals)?;
        let out_doc = ConfigDocument {
            config: ConfigFile::from_state(&ctx.graph, &vals, &file_bounds),
            provenance: Some(Provenance::new("heal", seed, params, &ctx, total)),
        };
        write_json_atomic(&args.out.join("healed.json"), &out_doc)?;
        manifest.record_output("healed.json");
        manifest.write(&args.out)?;
        println!(
            "wrote {}: no gates above outlier thresholds, configuration unchanged (total error {:.6e})",
            args.out.join("healed.json").display(),
            total
        );
        return Ok(());
    }

    let result = heal(&ctx.est, &file_bounds, &vals, &targets, &params)?;
    let mut provenance = Provenance::new("heal", seed, params, &ctx, result.total);
    provenance.targets = names(&ctx.graph, &targets);
    provenance.closure = names(&ctx.graph, &result.closure);
    let out_doc = ConfigDocument {
        config: ConfigFile::from_state(&ctx.graph, &result.values, &file_bounds),
        provenance: Some(provenance),
    };
    write_json_atomic(&args.out.join("healed.json"), &out_doc)?;
    manifest.record_output("healed.json");
    if args.trace {
        let trace = HealTrace {
            steps: &result.steps,
        };
        write_json_atomic(&args.out.join("heal_trace.json"), &trace)?;
        manifest.record_output("heal_trace.json");
    }
    manifest.write(&args.out)?;
    println!(
        "wrote {}: healed {} targets via {} free variables, total error {:.6e}",
        args.out.join("healed.json").display(),
        targets.len(),
        result.closure.len(),
        result.total
    );
    Ok(())
}

// ====================== stitch ======================

#[derive(Debug, Args)]
pub struct StitchArgs {
    /// Characterization bundle (char.json).
    #[arg(long = "char", value_name = "FILE")]
    pub characterization: PathBuf,

    /// Trained weight table [default: reference weights].
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,

    /// Number of column regions optimized in parallel.
    #[arg(long, default_value_t = 2, value_name = "R")]
    pub regions: usize,

    #[command(flatten)]
    pub solver: SolverOpts,

    /// Also write per-region outcomes (stitch_trace.json).
    #[arg(long)]
    pub trace: bool,

    /// Master seed for traversal and solver randomness.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Output bundle directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

fn cmd_stitch(args: StitchArgs) -> CliResult<()> {
    let seed = resolve_seed(args.seed)?;
    let ctx = load_context(&args.characterization, args.weights.as_deref())?;
    let params = args.solver.params(seed)?;
    let plan = StitchPlan::by_columns(&ctx.char.processor, &ctx.graph, args.regions, params)?;
    let result = stitch(&ctx.est, &ctx.bounds, &plan)?;
    let mut provenance = Provenance::new("stitch", seed, params, &ctx, result.total);
    provenance.regions = Some(args.regions);
    provenance.seam = names(&ctx.graph, &result.seam);
    let doc = ConfigDocument {
        config: ConfigFile::from_state(&ctx.graph, &result.values, &ctx.bounds),
        provenance: Some(provenance),
    };
    let mut manifest = RunManifest::new("stitch", Some(seed));
    manifest.record_input(&args.characterization)?;
    if let Some(path) = &args.weights {
        manifest.record_input(path)?;
    }
    write_json_atomic(&args.out.join("stitched.json"), &doc)?;
    manifest.record_output("stitched.json");
    if args.trace {
        write_json_atomic(&args.out.join("stitch_trace.json"), &result.regions)?;
        manifest.record_output("stitch_trace.json");
    }
    manifest.write(&args.out)?;
    println!(
        "wrote {}: {} regions, {} seam variables, total error {:.6e}",
        args.out.join("stitched.json").display(),
        args.regions,
        result.seam.len(),
        result.total
    );
    Ok(())
}

// ====================== sweep ======================

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Optimization scope comparison (bounded scopes vs budget-matched global).
    Scope,
    /// Error-mitigation subset comparison on one lattice.
    Mitigation,
    /// Error saturation vs processor size, against random baselines.
    Scaling,
    /// Wall-clock scaling vs processor size (inherently run-specific).
    Runtime,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Which study to run.
    #[arg(value_enum)]
    pub kind: SweepKind,

    /// Sweep options file (JSON matching the study's options document)
    /// [default: the study's built-in options].
    #[arg(long, value_name = "FILE")]
    pub options: Option<PathBuf>,

    /// Base seed; per-instance seeds are rebased from it.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Output bundle directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

/// Replaces a seed list with `count` consecutive seeds from `base`, keeping
/// the list length from the options document.
fn rebase_seeds(seeds: &mut Vec<u64>, base: u64) {
    let n = seeds.len() as u64;
    *seeds = (base..base + n).collect();
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let seed = resolve_seed(args.seed)?;
    let mut manifest = RunManifest::new("sweep", Some(seed));
    if let Some(path) = &args.options {
        manifest.record_input(path)?;
    }
    let (json_name, csv_name, json_text, csv_text) = match args.kind {
        SweepKind::Scope => {
            let mut opts: ScopeSweepOptions = match &args.options {
                Some(p) => read_json(p)?,
                None => ScopeSweepOptions::default(),
            };
            rebase_seeds(&mut opts.master_seeds, seed);
            let result = run_scope_sweep(&opts)?;
            let csv = report_table_csv(&result.rows());
            ("scope.json", "scope.csv", to_pretty(&result)?, csv)
        }
        SweepKind::Mitigation => {
            let mut opts: MitigationSweepOptions = match &args.options {
                Some(p) => read_json(p)?,
                None => MitigationSweepOptions::default(),
            };
            rebase_seeds(&mut opts.master_seeds, seed);
            let result = run_mitigation_sweep(&opts)?;
            let n_qubits = 2 * opts.distance * opts.distance - 1;
            let rows: Vec<ReportRow> = result
                .entries
                .iter()
                .map(|e| ReportRow {
                    benchmark: "czxeb".into(),
                    n: n_qubits,
                    configurations: Some(1),
                    label: format!("{}-seed-{}", e.mitigation, e.master_seed),
                    stats: e.stats,
                })
                .collect();
            let csv = report_table_csv(&rows);
            (
                "mitigation.json",
                "mitigation.csv",
                to_pretty(&result)?,
                csv,
            )
        }
        SweepKind::Scaling => {
            let mut opts: ScalingSweepOptions = match &args.options {
                Some(p) => read_json(p)?,
                None => ScalingSweepOptions::default(),
            };
            opts.base_seed = seed;
            let result = run_scaling_sweep(&opts)?;
            let csv = report_table_csv(&result.rows);
            (
                "scaling.json",
                "scaling.csv",
                to_pretty(&result)?,
                csv,
            )
        }
        SweepKind::Runtime => {
            let mut opts: RuntimeSweepOptions = match &args.options {
                Some(p) => read_json(p)?,
                None => RuntimeSweepOptions::default(),
            };
            opts.master_seed = seed;
            let result = run_runtime_sweep(&opts)?;
            let mut csv = String::from("distance,n_qubits,n_vars,wall_seconds\n");
            for p in &result.points {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    p.distance, p.n_qubits, p.n_vars, p.wall
                ));
            }
            (
                "runtime.json",
                "runtime.csv",
                to_pretty(&result)?,
                csv,
            )
        }
    };
    let mut json_text = json_text;
    json_text.push('\n');
    write_atomic(&args.out.join(json_name), json_text.as_bytes())?;
    manifest.record_output(json_name);
    write_atomic(&args.out.join(csv_name), csv_text.as_bytes())?;
    manifest.record_output(csv_name);
    manifest.write(&args.out)?;
    println!(
        "wrote {} and {}",
        args.out.join(json_name).display(),
        args.out.join(csv_name).display()
    );
    Ok(())
}

// ====================== report ======================

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Characterization bundle (char.json).
    #[arg(long = "char", value_name = "FILE")]
    pub characterization: PathBuf,

    /// Trained weight table [default: reference weights].
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,

    /// Configuration to score (config.json).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,

    /// Output bundle directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

/// Benchmark prediction bundle for one configuration.
#[derive(Debug, Serialize, Deserialize)]
pub struct BenchmarksDocument {
    pub total_error: f64,
    pub median_cycle_error: f64,
    pub outlier_fraction: f64,
    pub stats: PercentileReport,
    pub prediction: BenchmarkPrediction,
}

fn cmd_report(args: ReportArgs) -> CliResult<()> {
    let ctx = load_context(&args.characterization, args.weights.as_deref())?;
    let doc: ConfigDocument = read_json(&args.config)?;
    let (vals, _) = doc.config.into_state(&ctx.graph)?;
    let total = ctx.est.evaluate(&vals)?;
    let prediction = ctx.est.predict_benchmarks(&vals)?;
    let cycles = prediction.cycle_errors();
    let stats = PercentileReport::from_values(&cycles)?;
    let bundle = BenchmarksDocument {
        total_error: total,
        median_cycle_error: prediction.median_cycle_error(),
        outlier_fraction: outlier_fraction(&cycles),
        stats,
        prediction,
    };
    let row = ReportRow {
        benchmark: "czxeb".into(),
        n: ctx.char.processor.n_qubits() as u32,
        configurations: Some(1),
        label: "predicted".into(),
        stats,
    };
    let mut manifest = RunManifest::new("report", None);
    manifest.record_input(&args.characterization)?;
    if let Some(path) = &args.weights {
        manifest.record_input(path)?;
    }
    manifest.record_input(&args.config)?;
    write_json_atomic(&args.out.join("benchmarks.json"), &bundle)?;
    manifest.record_output("benchmarks.json");
    write_atomic(
        &args.out.join("benchmarks.csv"),
        report_table_csv(&[row]).as_bytes(),
    )?;
    manifest.record_output("benchmarks.csv");
    manifest.write(&args.out)?;
    println!(
        "wrote {}: median cycle error {:.6e}, outlier fraction {:.4}",
        args.out.join("benchmarks.json").display(),
        bundle.median_cycle_error,
        bundle.outlier_fraction
    );
    Ok(())
}

// ====================== Tests ======================
