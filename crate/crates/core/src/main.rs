use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rlcausal::pipeline::{self, PipelineConfig, SynthConfig};
use rlcausal::scoring::RegressionKind;
use rlcausal::sim::MechanismKind;
use rlcausal::Error;

#[derive(Parser)]
#[command(name = "rlcausal", version, about = "Causal discovery with reinforcement-learning search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a causal graph from a CSV file and write graph, report and logs.
    Discover(DiscoverArgs),
    /// Generate a random structural model, its samples and the true graph.
    Synth(SynthArgs),
    /// Print the BIC of a given graph on a dataset.
    Score(ScoreArgs),
}

#[derive(Args)]
struct DiscoverArgs {
    /// JSON config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Learning rate for both actor and critic.
    #[arg(long)]
    lr: Option<f64>,
    /// Initial cycle-indicator weight (unit set by the config's penalty scale).
    #[arg(long)]
    lambda1: Option<f64>,
    /// Initial acyclicity-penalty weight (unit set by the config's penalty scale).
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    graphs_per_iter: Option<usize>,
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    prune_threshold: Option<f64>,
    /// Sampled DAGs refined by hill climbing; 0 disables refinement.
    #[arg(long)]
    refine_candidates: Option<usize>,
    #[arg(long, value_parser = parse_kind)]
    regression: Option<RegressionKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    edge_prob: f64,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value = "linear", value_parser = parse_mechanism)]
    mechanism: MechanismKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synth")]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "linear", value_parser = parse_kind)]
    regression: RegressionKind,
    /// Score the raw columns instead of z-scored ones.
    #[arg(long)]
    raw: bool,
}

fn parse_kind(s: &str) -> Result<RegressionKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mechanism(s: &str) -> Result<MechanismKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn discover(args: DiscoverArgs) -> rlcausal::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = args.data {
        cfg.data = v;
    }
    if let Some(v) = args.schema {
        cfg.schema = Some(v);
    }
    if let Some(v) = args.target {
        cfg.target = Some(v);
    }
    if let Some(v) = args.iterations {
        cfg.trainer.iterations = v;
    }
    if let Some(v) = args.lr {
        cfg.trainer.actor_learning_rate = v;
        cfg.trainer.critic_learning_rate = v;
    }
    if let Some(v) = args.lambda1 {
        cfg.trainer.reward.lambda1 = v;
    }
    if let Some(v) = args.lambda2 {
        cfg.trainer.reward.lambda2 = v;
    }
    if let Some(v) = args.batch_size {
        cfg.trainer.batch_size = v;
    }
    if let Some(v) = args.graphs_per_iter {
        cfg.trainer.graphs_per_iteration = v;
    }
    if let Some(v) = args.d_model {
        cfg.trainer.encoder.d_model = v;
    }
    if let Some(v) = args.prune_threshold {
        cfg.prune_threshold = v;
    }
    if let Some(v) = args.refine_candidates {
        cfg.trainer.refine_candidates = v;
    }
    if let Some(v) = args.regression {
        cfg.regression = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.out {
        cfg.out_dir = v;
    }
    let run = pipeline::run(&cfg)?;
    for (stage, secs) in &run.timings {
        log::info!("{stage}: {secs:.2}s");
    }
    println!("{}", run.paths.graph_json.display());
    println!("{}", run.paths.dot.display());
    println!("{}", run.paths.report.display());
    println!("{}", run.paths.metrics.display());
    println!("{}", run.paths.config_snapshot.display());
    Ok(())
}

fn synth(args: SynthArgs) -> rlcausal::Result<()> {
    let cfg = SynthConfig {
        d: args.d,
        edge_probability: args.edge_prob,
        samples: args.samples,
        mechanism: args.mechanism,
        seed: args.seed,
        out_dir: args.out,
    };
    let (data, truth) = pipeline::generate_synthetic(&cfg)?;
    println!("{}", data.display());
    println!("{}", truth.display());
    Ok(())
}

fn score(args: ScoreArgs) -> rlcausal::Result<()> {
    let summary = pipeline::score_graph(&args.data, &args.graph, args.regression, !args.raw)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Discover(a) => discover(a),
        Command::Synth(a) => synth(a),
        Command::Score(a) => score(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Stage { manifest, .. } = &e {
                for p in manifest {
                    eprintln!("  written: {}", p.display());
                }
            }
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
