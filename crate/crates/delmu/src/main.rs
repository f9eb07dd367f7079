//! `delmu` command line: dataset generation, surrogate training, single
//! solves, batch evaluation, dynamic-scenario replay and link capacity
//! computation.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use delmu::data;
use delmu::formats;
use delmu::harness;
use delmu_core::baseline::{brute_force_solve, greedy_solve};
use delmu_core::channel::{link_capacity, ChannelGains};
use delmu_core::globalsearch::{multistart_solve, GsOptions};
use delmu_core::model::builtin_topology;
use delmu_core::nn::{self, TrainConfig};
use delmu_core::repair::repair;
use delmu_core::utility::total_utility;
use delmu_core::{Topology, UtilityParams};

#[derive(Parser)]
#[command(
    name = "delmu",
    about = "Utility-maximal rate allocation for sliced mm-wave backhauls: \
             global search, greedy baseline, and a learned surrogate with \
             feasibility repair"
)]
struct Cli {
    /// Base seed for data generation, training and solvers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Utility parameter file (JSON list of {kind, alpha, beta}); the
    /// built-in defaults cover the four standard slices.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate demand instances and label them with the global search.
    GenData(GenDataArgs),
    /// Train the surrogate network on a labelled dataset.
    Train(TrainArgs),
    /// Solve one instance with a chosen solver; prints the allocation
    /// as a CSV row.
    Solve(SolveArgs),
    /// Evaluate greedy and the surrogate against stored labels.
    Eval(EvalArgs),
    /// Replay a timed event script with the surrogate.
    Replay(ReplayArgs),
    /// Water-filling link capacity for given eigen-channel gains.
    Capacity(CapacityArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Built-in topology index (1..=4).
    #[arg(long)]
    topology: usize,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    /// Multistart count used for labelling.
    #[arg(long, default_value_t = 100)]
    starts: usize,
    /// Ignore an existing dataset file at --out instead of resuming.
    #[arg(long)]
    no_resume: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Labelled dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Train/test split ratio; the model sees only the training side.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Optional per-epoch loss CSV.
    #[arg(long)]
    loss_out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// greedy | brute | gs | delmu
    #[arg(long)]
    solver: String,
    #[arg(long)]
    topology: usize,
    /// Demand instance JSON ({min_rate_mbps, max_demand_mbps}).
    #[arg(long)]
    instance: PathBuf,
    /// Greedy step size in Mbps.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Brute-force grid in Mbps.
    #[arg(long, default_value_t = 50.0)]
    grid: f64,
    /// Multistart count for the gs solver.
    #[arg(long, default_value_t = 100)]
    starts: usize,
    /// Trained model file (required for the delmu solver).
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    topology: usize,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Report directory (utility_dist.csv, runtimes.csv, per_slice.csv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    topology: usize,
    #[arg(long)]
    model: PathBuf,
    /// Event script JSON; defaults to the shipped dynamic scenario.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Report directory (replay.csv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CapacityArgs {
    /// Comma-separated eigen-channel gains (eigenvalues of H*H^H).
    #[arg(long)]
    gains: String,
    /// Noise power (Watts).
    #[arg(long)]
    noise: f64,
    /// Transmit power budget (Watts).
    #[arg(long)]
    pmax: f64,
    /// Channel bandwidth (Hz).
    #[arg(long)]
    bandwidth: f64,
}

fn load_params_arg(path: &Option<PathBuf>) -> Result<UtilityParams> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(formats::load_params(&text)?)
        }
        None => Ok(UtilityParams::default_four_slices()),
    }
}

fn load_builtin(index: usize) -> Result<Topology> {
    Ok(builtin_topology(index)?)
}

fn allocation_csv(allocation: &delmu_core::RateAllocation) -> String {
    allocation
        .rates()
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let params = load_params_arg(&cli.params)?;
    match cli.command {
        Command::GenData(args) => gen_data(args, &params, cli.seed),
        Command::Train(args) => train(args, cli.seed),
        Command::Solve(args) => solve(args, &params, cli.seed),
        Command::Eval(args) => eval(args, &params, cli.seed),
        Command::Replay(args) => replay(args, &params),
        Command::Capacity(args) => capacity(args),
    }
}

fn gen_data(args: GenDataArgs, params: &UtilityParams, seed: u64) -> Result<()> {
    let topology = load_builtin(args.topology)?;
    let (instances, resampled) = data::generate_instances(args.topology, args.count, seed)?;
    if resampled > 0 {
        eprintln!("resampled {resampled} infeasible instances");
    }
    let prior = if !args.no_resume && args.out.exists() {
        let prior = data::load_dataset(&args.out)?;
        if prior.topology_index != args.topology || prior.seed != seed {
            bail!(
                "existing dataset at {} was generated with topology {} and seed {}; \
                 refusing to resume with different settings",
                args.out.display(),
                prior.topology_index,
                prior.seed
            );
        }
        eprintln!("resuming: {} rows already labelled", prior.rows.len());
        Some(prior)
    } else {
        None
    };
    let options = GsOptions {
        n_starts: args.starts,
        ..GsOptions::default()
    };
    let dataset = data::label_instances(
        &topology,
        args.topology,
        &instances,
        params,
        &options,
        seed,
        prior.as_ref(),
    )?;
    data::save_dataset(&dataset, &args.out)?;
    println!(
        "labelled {} instances on {} -> {}",
        dataset.rows.len(),
        topology.name(),
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs, seed: u64) -> Result<()> {
    let dataset = data::load_dataset(&args.data)?;
    let (train_set, _) = data::split_dataset(&dataset, args.split, seed)?;
    let samples = data::to_train_samples(&train_set)?;
    let config = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed,
        ..TrainConfig::default()
    };
    eprintln!(
        "training on {} samples for {} epochs (lr {}, batch {})",
        samples.len(),
        config.epochs,
        config.learning_rate,
        config.batch_size
    );
    let (model, history) = nn::train(&samples, &config)?;
    std::fs::write(&args.out, formats::save_model(&model))?;
    if let Some(loss_out) = &args.loss_out {
        let mut csv = String::from("epoch,loss\n");
        for (epoch, loss) in history.iter().enumerate() {
            csv.push_str(&format!("{epoch},{loss}\n"));
        }
        std::fs::write(loss_out, csv)?;
    }
    println!(
        "trained: loss {} -> {} over {} epochs, model at {}",
        history.first().unwrap(),
        history.last().unwrap(),
        history.len(),
        args.out.display()
    );
    Ok(())
}

fn solve(args: SolveArgs, params: &UtilityParams, seed: u64) -> Result<()> {
    let topology = load_builtin(args.topology)?;
    let text = std::fs::read_to_string(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let instance = formats::load_instance(&text)?;
    let allocation = match args.solver.as_str() {
        "greedy" => greedy_solve(&topology, &instance, params, args.step)?,
        "brute" => brute_force_solve(&topology, &instance, params, args.grid)?,
        "gs" => {
            let options = GsOptions {
                n_starts: args.starts,
                seed,
                ..GsOptions::default()
            };
            multistart_solve(&topology, &instance, params, &options)?
        }
        "delmu" => {
            let model_path = args
                .model
                .as_ref()
                .context("--model is required for the delmu solver")?;
            let model = formats::load_model(&std::fs::read_to_string(model_path)?)?;
            let raw = nn::infer(&model, &instance, args.topology)?;
            repair(&topology, &instance, params, &raw)?
        }
        other => bail!("unknown solver {other:?} (expected greedy|brute|gs|delmu)"),
    };
    println!("{}", allocation_csv(&allocation));
    eprintln!("utility: {}", total_utility(params, &allocation)?);
    Ok(())
}

fn eval(args: EvalArgs, params: &UtilityParams, seed: u64) -> Result<()> {
    let topology = load_builtin(args.topology)?;
    let dataset = data::load_dataset(&args.data)?;
    if dataset.topology_index != args.topology {
        bail!(
            "dataset was labelled on topology {}, not {}",
            dataset.topology_index,
            args.topology
        );
    }
    let (_, test_set) = data::split_dataset(&dataset, args.split, seed)?;
    let model = formats::load_model(&std::fs::read_to_string(&args.model)?)?;
    let report = harness::evaluate(&topology, args.topology, &test_set.rows, &model, params)?;
    harness::write_eval_csvs(&report, &args.out)?;
    println!(
        "evaluated {} rows on {}: medians gs {:.4} / greedy {:.4} / delmu {:.4}; \
         mean seconds gs {:.4} / greedy {:.6} / delmu {:.6}; reports in {}",
        report.rows_evaluated,
        topology.name(),
        report.gs.median,
        report.greedy.median,
        report.delmu.median,
        report.gs.mean_seconds,
        report.greedy.mean_seconds,
        report.delmu.mean_seconds,
        args.out.display()
    );
    Ok(())
}

fn replay(args: ReplayArgs, params: &UtilityParams) -> Result<()> {
    let topology = load_builtin(args.topology)?;
    let script = match &args.script {
        Some(path) => formats::load_event_script(&std::fs::read_to_string(path)?)?,
        None => harness::fig7_default_script(),
    };
    let model = formats::load_model(&std::fs::read_to_string(&args.model)?)?;
    let points = harness::replay(&topology, args.topology, &script, &model, params)?;
    harness::write_replay_csv(&points, &args.out)?;
    for point in &points {
        println!(
            "t={}ms solve={:.3}ms rates=[{}]",
            point.t_ms,
            point.solve_seconds * 1e3,
            allocation_csv(&point.allocation)
        );
    }
    Ok(())
}

fn capacity(args: CapacityArgs) -> Result<()> {
    let gains: Vec<f64> = args
        .gains
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .context("parsing --gains")?;
    let gains = ChannelGains::new(gains)?;
    let capacity = link_capacity(&gains, args.noise, args.pmax, args.bandwidth)?;
    println!("{capacity}");
    Ok(())
}
