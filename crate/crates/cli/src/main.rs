use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use treeising::bounds::{BoundInputs, BoundReport};
use treeising::harness::{self, ExperimentConfig};
use treeising::moments::tree_moment;
use treeising::predictive::FittedJson;
use treeising::tree::{ModelJson, TopologyJson};
use treeising::{
    apply_channel, chow_liu, derive_seed, empirical_correlations, exact_moment, fit_distribution, matching_pairs,
    oracle, sample_hidden, Error, FittedTreeDistribution, IsingTreeModel, NoiseChannel, SampleBatch, TreeDistribution,
    TreeTopology,
};

/// Tree-structured Ising models observed through a binary symmetric channel.
#[derive(Parser)]
#[command(name = "treeising", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a model, optionally through the channel.
    Sample(SampleArgs),
    /// Learn the Chow-Liu tree from a sample CSV.
    Learn(LearnArgs),
    /// Fit edge correlations on a tree (learned if not given).
    Fit(FitArgs),
    /// Path matching and moment of a vertex subset.
    Moments(MomentsArgs),
    /// Evaluate every sample-complexity bound.
    Bounds(BoundsArgs),
    /// Run a Monte Carlo sweep and write heatmap.csv and manifest.json.
    Sweep(SweepArgs),
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Model JSON: {"p": int, "edges": [[i, j, theta], ...]}.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    /// Crossover probability; 0 writes the hidden samples.
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    samples: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Crossover the samples went through; defaults to the one recorded in the CSV.
    #[arg(long)]
    q: Option<f64>,
    /// Tree JSON: {"p": int, "edges": [[i, j], ...]}.
    #[arg(long)]
    tree: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    /// Model JSON with theta per edge.
    #[arg(long, conflicts_with = "fitted", required_unless_present = "fitted")]
    model: Option<PathBuf>,
    /// Fitted JSON as written by `fit`.
    #[arg(long)]
    fitted: Option<PathBuf>,
    /// Comma-separated vertices.
    #[arg(long, value_delimiter = ',', required = true)]
    subset: Vec<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0.1)]
    eta_s: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration instead of a file.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(ExperimentConfig::PRESETS))]
    preset: Option<String>,
    /// Output directory; falls back to the config's output_path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides TREEISING_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn print_compact<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn load_model(path: &Path) -> Result<IsingTreeModel> {
    Ok(IsingTreeModel::from_json(&read_json::<ModelJson>(path)?)?)
}

fn load_samples(path: &Path) -> Result<SampleBatch> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    SampleBatch::read_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn sample(args: SampleArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let channel = NoiseChannel::new(args.q)?;
    let hidden = sample_hidden(&model, args.n, derive_seed(args.seed, &[0]))?;
    let batch = if args.q > 0.0 { apply_channel(&hidden, &channel, derive_seed(args.seed, &[1]))? } else { hidden };
    match args.out {
        Some(path) => {
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            batch.write_csv(BufWriter::new(file))?;
        }
        None => batch.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn learn(args: LearnArgs) -> Result<()> {
    let batch = load_samples(&args.samples)?;
    let tree = chow_liu(&empirical_correlations(&batch))?;
    print_compact(&TopologyJson::from(&tree))
}

fn fit(args: FitArgs) -> Result<()> {
    let batch = load_samples(&args.samples)?;
    let corr = empirical_correlations(&batch);
    let tree = match args.tree {
        Some(path) => TreeTopology::try_from(&read_json::<TopologyJson>(&path)?)?,
        None => chow_liu(&corr)?,
    };
    let fitted = fit_distribution(&tree, &corr, args.q.unwrap_or(batch.q_used()))?;
    print_compact(&fitted.to_json())
}

#[derive(Serialize)]
struct MomentReport {
    subset: Vec<usize>,
    moment: f64,
    /// Absent for odd subsets.
    pairs: Option<Vec<(usize, usize)>>,
    edge_union: Option<Vec<(usize, usize)>>,
}

fn moments(args: MomentsArgs) -> Result<()> {
    let (topology, moment) = match (&args.model, &args.fitted) {
        (Some(path), _) => {
            let model = load_model(path)?;
            let m = exact_moment(&model, &args.subset)?;
            (model.topology().clone(), m)
        }
        (None, Some(path)) => {
            let fitted = FittedTreeDistribution::from_json(&read_json::<FittedJson>(path)?)?;
            let m = tree_moment(&fitted, &args.subset)?;
            (fitted.topology().clone(), m)
        }
        (None, None) => bail!("one of --model or --fitted is required"),
    };
    let matching = args.subset.len().is_multiple_of(2).then(|| matching_pairs(&topology, &args.subset)).transpose()?;
    print_json(&MomentReport {
        subset: args.subset,
        moment,
        pairs: matching.as_ref().map(|m| m.pairs.clone()),
        edge_union: matching.map(|m| m.edge_union.iter().map(|&e| topology.edges()[e]).collect()),
    })
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let inputs =
        BoundInputs::new(args.p, args.alpha, args.beta, args.q, args.delta).with_eta(args.eta).with_eta_s(args.eta_s);
    print_json(&BoundReport::new(inputs)?)
}

/// Exit code for configuration errors.
const EXIT_BAD_CONFIG: u8 = 2;

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let loaded = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::from_file(path),
        (None, Some(name)) => Ok(ExperimentConfig::preset(name).expect("clap checked the name")),
        (None, None) => bail!("one of --config or --preset is required"),
    };
    let cfg = match loaded {
        Ok(cfg) => cfg,
        Err(Error::Io(e)) => bail!("reading config: {e}"),
        Err(e) => {
            eprintln!("invalid config: {e}");
            return Ok(ExitCode::from(EXIT_BAD_CONFIG));
        }
    };
    if args.print_config {
        print_json(&cfg)?;
        return Ok(ExitCode::SUCCESS);
    }
    let Some(out) = args.out.or_else(|| cfg.output_path.clone().map(PathBuf::from)) else {
        eprintln!("invalid config: no --out given and no output_path in the config");
        return Ok(ExitCode::from(EXIT_BAD_CONFIG));
    };
    let result = harness::run_sweep(&cfg, args.workers)?;
    harness::write_outputs(&cfg, &result, &out)?;
    eprintln!("wrote {} cells to {}", result.cells.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct OracleReport {
    p: usize,
    q: f64,
    /// Bit b of the index set means vertex b is -1.
    probs: Vec<f64>,
}

fn oracle_table(args: OracleArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let table = oracle::enumerate_noisy(&model, args.q).or_else(|e| match e {
        Error::Unsupported(_) if args.q == 0.0 => oracle::enumerate_hidden(&model),
        other => Err(other),
    })?;
    print_json(&OracleReport { p: table.p(), q: args.q, probs: table.probs().to_vec() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(a) => sample(a).map(|_| ExitCode::SUCCESS),
        Command::Learn(a) => learn(a).map(|_| ExitCode::SUCCESS),
        Command::Fit(a) => fit(a).map(|_| ExitCode::SUCCESS),
        Command::Moments(a) => moments(a).map(|_| ExitCode::SUCCESS),
        Command::Bounds(a) => bounds(a).map(|_| ExitCode::SUCCESS),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle_table(a).map(|_| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
