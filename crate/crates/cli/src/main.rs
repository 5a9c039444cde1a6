//! Command-line front end: training, baselines, checkpoint evaluation,
//! sweeps, watermark calibration and schedule traces.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use orbmark::baselines::BaselineKind;
use orbmark::config::ScenarioConfig;
use orbmark::experiment::{
    evaluate_baseline, evaluate_policy, evaluation_tasks, run_sweep, train_on, write_outcome_csv, write_sweep_csv,
    PolicyReport, SweepAxis, SweepSpec,
};
use orbmark::ppo::{load_checkpoint, save_checkpoint, write_metrics_csv};
use orbmark::seeds::derive_seed;
use orbmark::timeline::write_trace_csv;
use orbmark::watermark::{
    calibrate_mse, mse_table_toml, synthetic_corpus, AlgorithmKind, GrayImage, PayloadPattern, PayloadSpec,
    CALIBRATION_SEED,
};

#[derive(Parser)]
#[command(name = "orbmark", version, about = "LEO watermark-offloading simulator with a PPO scheduler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one PPO policy and compare it with both baselines.
    Train {
        #[command(flatten)]
        common: Common,
        /// Override the configured number of environment steps.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Run one baseline on the evaluation task sets.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// `sequential`, `random` (1000 trials) or `randomK`.
        #[arg(long, default_value = "random")]
        kind: String,
    },
    /// Greedy rollouts of a saved checkpoint on the evaluation task sets.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and compare across the values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// satellites, tasks, n-step or lr.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `5,10,15`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Measure the mean embedding MSE of each codec on an image corpus.
    Calibrate(CalibrateArgs),
    /// Dump the per-task schedule of one episode as CSV.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Satellite per task, comma-separated; defaults to round robin.
        #[arg(long, value_delimiter = ',')]
        assignment: Option<Vec<usize>>,
    },
    /// Print the fully resolved configuration.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario used when no config file is given.
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    preset: Preset,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (or file, for `calibrate` and `trace`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    Toy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Payload {
    Random,
    Ones,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Directory of binary PGM (P5) images.
    #[arg(long, conflicts_with = "synthetic")]
    corpus: Option<PathBuf>,
    /// Use this many synthetic images instead of a corpus directory.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Side length of synthetic images.
    #[arg(long, default_value_t = 64)]
    side: usize,
    #[arg(long, value_enum, default_value_t = Payload::Random)]
    payload: Payload,
    /// Fraction of each codec's capacity to fill.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    /// Codec parameters are read from this config's watermark section.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = CALIBRATION_SEED)]
    seed: u64,
    /// Write the MSE table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => match self.preset {
                Preset::Default => ScenarioConfig::default(),
                Preset::Toy => ScenarioConfig::toy(),
            },
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }

    fn out_dir(&self, config: &ScenarioConfig, name: &str) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .unwrap_or_else(|| Path::new(&config.output_dir).join(name));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

fn write_config_echo(dir: &Path, config: &ScenarioConfig) -> Result<()> {
    fs::write(dir.join("config.toml"), config.resolved().to_toml_string()?)?;
    Ok(())
}

fn print_reports(reports: &[PolicyReport]) {
    println!("{:<14} {:>12} {:>16} {:>9}", "policy", "mean_cost", "mean_penalized", "feasible");
    for r in reports {
        println!(
            "{:<14} {:>12.6} {:>16.6} {:>9.3}",
            r.name, r.mean_cost, r.mean_penalized_cost, r.feasible_fraction
        );
    }
}

fn train(common: &Common, steps: Option<u64>) -> Result<()> {
    let mut config = common.load()?;
    if let Some(steps) = steps {
        config.ppo.total_steps = steps;
        config.validate()?;
    }
    let dir = common.out_dir(&config, "train")?;
    write_config_echo(&dir, &config)?;
    let scenario = Arc::new(config.build()?);
    let task_sets = evaluation_tasks(&config, &scenario)?;
    let trained = train_on(&config, &scenario, config.seed)?;
    write_metrics_csv(&trained.metrics, File::create(dir.join("metrics.csv"))?)?;
    save_checkpoint(dir.join("checkpoint.bin"), &trained.policy, &trained.value)?;
    let reports = vec![
        evaluate_policy("ppo", &trained.policy, &scenario, &task_sets)?,
        evaluate_baseline(
            BaselineKind::RandomBestOf(config.evaluation.random_trials),
            &scenario,
            &task_sets,
            config.seed,
        )?,
        evaluate_baseline(BaselineKind::Sequential, &scenario, &task_sets, config.seed)?,
    ];
    write_outcome_csv(&reports, File::create(dir.join("outcome.csv"))?)?;
    print_reports(&reports);
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn baseline(common: &Common, kind: &str) -> Result<()> {
    let config = common.load()?;
    let kind: BaselineKind = kind.parse()?;
    let dir = common.out_dir(&config, "baseline")?;
    write_config_echo(&dir, &config)?;
    let scenario = config.build()?;
    let task_sets = evaluation_tasks(&config, &scenario)?;
    let report = evaluate_baseline(kind, &scenario, &task_sets, config.seed)?;
    write_outcome_csv(std::slice::from_ref(&report), File::create(dir.join("outcome.csv"))?)?;
    print_reports(&[report]);
    Ok(())
}

fn evaluate(common: &Common, checkpoint: &Path) -> Result<()> {
    let config = common.load()?;
    let (policy, _) = load_checkpoint(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
    let scenario = Arc::new(config.build()?);
    let expected = orbmark::env::observation_dim(scenario.task_count, scenario.satellite_count());
    if policy.mlp.input_dim() != expected || policy.action_count() != scenario.satellite_count() {
        bail!(
            "checkpoint expects {} features and {} actions; the scenario has {expected} and {}",
            policy.mlp.input_dim(),
            policy.action_count(),
            scenario.satellite_count()
        );
    }
    let dir = common.out_dir(&config, "evaluate")?;
    write_config_echo(&dir, &config)?;
    let task_sets = evaluation_tasks(&config, &scenario)?;
    let report = evaluate_policy("ppo", &policy, &scenario, &task_sets)?;
    write_outcome_csv(std::slice::from_ref(&report), File::create(dir.join("outcome.csv"))?)?;
    print_reports(&[report]);
    Ok(())
}

fn sweep(common: &Common, axis: &str, values: Vec<f64>, reps: usize) -> Result<()> {
    let config = common.load()?;
    let spec = SweepSpec {
        axis: axis.parse::<SweepAxis>()?,
        values,
        repetitions: reps,
    };
    spec.validate()?;
    let dir = common.out_dir(&config, "sweep")?;
    write_config_echo(&dir, &config)?;
    let rows = run_sweep(&spec, &config, Some(&dir))?;
    write_sweep_csv(&rows, File::create(dir.join("sweep.csv"))?)?;
    write_sweep_csv(&rows, std::io::stdout().lock())?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed; see the status column");
    }
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<Vec<GrayImage>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .pgm files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| GrayImage::load(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    let corpus = match (&args.corpus, args.synthetic) {
        (Some(dir), _) => load_corpus(dir)?,
        (None, Some(n)) => synthetic_corpus(n, args.side, args.side, args.seed),
        (None, None) => bail!("give --corpus DIR or --synthetic N"),
    };
    if !(0.0..=1.0).contains(&args.density) {
        bail!("--density must lie in [0, 1]");
    }
    let payload = PayloadSpec {
        pattern: match args.payload {
            Payload::Random => PayloadPattern::Random,
            Payload::Ones => PayloadPattern::Ones,
        },
        density: args.density,
    };
    let rows = AlgorithmKind::ALL
        .iter()
        .map(|&kind| {
            let alg = config.watermark.algorithm(kind);
            calibrate_mse(&corpus, &alg, &payload, args.seed).map(|mse| (kind, mse))
        })
        .collect::<orbmark::Result<Vec<_>>>()?;
    let table = mse_table_toml(&rows);
    match &args.out {
        Some(path) => fs::write(path, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn trace(common: &Common, assignment: Option<Vec<usize>>) -> Result<()> {
    let config = common.load()?;
    let scenario = config.build()?;
    let tasks = scenario.generate_tasks(derive_seed(config.seed, "trace"))?;
    let count = scenario.satellite_count();
    let assignment = assignment.unwrap_or_else(|| (0..tasks.len()).map(|i| i % count).collect());
    if assignment.len() != tasks.len() {
        bail!("{} satellites given for {} tasks", assignment.len(), tasks.len());
    }
    let evaluation = scenario.evaluate(&tasks, &assignment)?;
    match &common.out {
        Some(path) => write_trace_csv(&evaluation.schedule.traces, File::create(path)?)?,
        None => write_trace_csv(&evaluation.schedule.traces, std::io::stdout().lock())?,
    }
    let o = &evaluation.outcome;
    eprintln!(
        "total_time_s={} energy_j={} price={} quality_db={} failure_prob={} cost={} feasible={}",
        o.total_time_s, o.energy_j, o.price, o.quality_db, o.failure_prob, o.cost, o.feasible
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { common, steps } => train(&common, steps),
        Command::Baseline { common, kind } => baseline(&common, &kind),
        Command::Evaluate { common, checkpoint } => evaluate(&common, &checkpoint),
        Command::Sweep {
            common,
            axis,
            values,
            reps,
        } => sweep(&common, &axis, values, reps),
        Command::Calibrate(args) => calibrate(&args),
        Command::Trace { common, assignment } => trace(&common, assignment),
        Command::Config { common } => {
            let config = common.load()?;
            let text = config.resolved().to_toml_string()?;
            match &common.out {
                Some(path) => fs::write(path, text)?,
                None => std::io::stdout().lock().write_all(text.as_bytes())?,
            }
            Ok(())
        }
    }
}
