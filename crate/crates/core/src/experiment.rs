//! Experiment orchestration: one train-and-compare cell, parameter sweeps,
//! and the CSV files a run directory holds.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;

use crate::baselines::{run_baseline, BaselineKind};
use crate::config::ScenarioConfig;
use crate::economics::EpisodeOutcome;
use crate::env::OffloadEnv;
use crate::error::{Error, Result};
use crate::ppo::{train, ActMode, Environment, PolicyNet, TrainOutcome};
use crate::scenario::{Evaluation, Scenario};
use crate::seeds::{derive_seed, stream};
use crate::timeline::TaskSpec;

/// Held-out task sets drawn from the "evaluation" sub-stream of the
/// config seed, shared by every policy and repetition.
pub fn evaluation_tasks(config: &ScenarioConfig, scenario: &Scenario) -> Result<Vec<Vec<TaskSpec>>> {
    let mut rng = stream(config.seed, "evaluation");
    (0..config.evaluation.episodes)
        .map(|_| scenario.generate_tasks(rng.next_u64()))
        .collect()
}

/// Rolls out `policy` on `tasks` and returns the chosen assignment.
pub fn rollout(policy: &PolicyNet, scenario: &Arc<Scenario>, tasks: &[TaskSpec], mode: ActMode, seed: u64) -> Result<(Vec<usize>, Evaluation)> {
    let mut env = OffloadEnv::new(scenario.clone())?;
    let mut rng = stream(seed, "act");
    let mut state = env.reset_with_tasks(tasks.to_vec())?;
    while !env.is_done() {
        let (action, _) = policy.act(&state, mode, &mut rng)?;
        state = env.step_detailed(action)?.state;
    }
    Ok((env.assignment().to_vec(), env.evaluation().clone()))
}

/// One policy's results on the evaluation task sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyReport {
    pub name: String,
    pub outcomes: Vec<EpisodeOutcome>,
    pub assignments: Vec<Vec<usize>>,
    pub mean_cost: f64,
    /// Mean of `cost + penalty·|violated|`, the objective every policy minimises.
    pub mean_penalized_cost: f64,
    pub feasible_fraction: f64,
}

impl PolicyReport {
    fn new(name: String, scenario: &Scenario, runs: Vec<(Vec<usize>, EpisodeOutcome)>) -> Self {
        let n = runs.len().max(1) as f64;
        let mean_cost = runs.iter().map(|(_, o)| o.cost).sum::<f64>() / n;
        let mean_penalized_cost = runs.iter().map(|(_, o)| scenario.penalized_cost(o)).sum::<f64>() / n;
        let feasible_fraction = runs.iter().filter(|(_, o)| o.feasible).count() as f64 / n;
        let (assignments, outcomes) = runs.into_iter().unzip();
        Self {
            name,
            outcomes,
            assignments,
            mean_cost,
            mean_penalized_cost,
            feasible_fraction,
        }
    }
}

pub fn evaluate_policy(
    name: &str,
    policy: &PolicyNet,
    scenario: &Arc<Scenario>,
    task_sets: &[Vec<TaskSpec>],
) -> Result<PolicyReport> {
    let runs = task_sets
        .iter()
        .map(|tasks| rollout(policy, scenario, tasks, ActMode::Greedy, 0).map(|(a, e)| (a, e.outcome)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyReport::new(name.into(), scenario, runs))
}

/// Runs a baseline on every task set; set `e` uses the seed
/// `derive_seed(seed, "episode-e")`.
pub fn evaluate_baseline(kind: BaselineKind, scenario: &Scenario, task_sets: &[Vec<TaskSpec>], seed: u64) -> Result<PolicyReport> {
    let runs = task_sets
        .iter()
        .enumerate()
        .map(|(e, tasks)| {
            run_baseline(kind, scenario, tasks, derive_seed(seed, &format!("episode-{e}")))
                .map(|r| (r.assignment, r.evaluation.outcome))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyReport::new(kind.to_string(), scenario, runs))
}

pub fn train_on(config: &ScenarioConfig, scenario: &Arc<Scenario>, seed: u64) -> Result<TrainOutcome> {
    train(|| OffloadEnv::new(scenario.clone()), &config.ppo, seed)
}

/// PPO and both baselines on one config, all scored on the same task sets.
#[derive(Debug, Clone)]
pub struct CellReport {
    pub training: TrainOutcome,
    /// PPO first, then best-of-K random, then sequential.
    pub policies: Vec<PolicyReport>,
}

pub fn run_cell(config: &ScenarioConfig, seed: u64) -> Result<CellReport> {
    let scenario = Arc::new(config.build()?);
    let task_sets = evaluation_tasks(config, &scenario)?;
    let training = train_on(config, &scenario, seed)?;
    let ppo = evaluate_policy("ppo", &training.policy, &scenario, &task_sets)?;
    let random = evaluate_baseline(
        BaselineKind::RandomBestOf(config.evaluation.random_trials),
        &scenario,
        &task_sets,
        seed,
    )?;
    let sequential = evaluate_baseline(BaselineKind::Sequential, &scenario, &task_sets, seed)?;
    Ok(CellReport {
        training,
        policies: vec![ppo, random, sequential],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SatelliteCount,
    TaskCount,
    NStep,
    LearningRate,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::SatelliteCount => "satellites",
            SweepAxis::TaskCount => "tasks",
            SweepAxis::NStep => "n-step",
            SweepAxis::LearningRate => "lr",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "satellites" | "satellite-count" => Ok(SweepAxis::SatelliteCount),
            "tasks" | "task-count" => Ok(SweepAxis::TaskCount),
            "n-step" | "nstep" => Ok(SweepAxis::NStep),
            "lr" | "learning-rate" => Ok(SweepAxis::LearningRate),
            other => Err(Error::Argument(format!(
                "unknown sweep axis `{other}` (satellites, tasks, n-step, lr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub repetitions: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Argument("sweep needs at least one value".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Argument("sweep needs at least one repetition".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("sweep values must be finite".into()));
        }
        Ok(())
    }
}

fn as_count(axis: SweepAxis, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 {
        Ok(value as usize)
    } else {
        Err(Error::Argument(format!("{axis} needs a positive integer, got {value}")))
    }
}

/// `base` with the swept parameter set to `value`.
pub fn apply_axis(base: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut c = base.clone();
    match axis {
        SweepAxis::SatelliteCount => {
            if c.constellation.phase_offsets_deg.is_some() {
                return Err(Error::Argument("cannot sweep satellite count with explicit phase offsets".into()));
            }
            c.constellation.satellite_count = as_count(axis, value)?;
        }
        SweepAxis::TaskCount => {
            if c.tasks.fixed_sizes_bits.is_some() {
                return Err(Error::Argument("cannot sweep task count with fixed task sizes".into()));
            }
            c.tasks.count = as_count(axis, value)?;
        }
        SweepAxis::NStep => c.ppo.n_step = as_count(axis, value)?,
        SweepAxis::LearningRate => c.ppo.lr_start = value,
    }
    c.validate()?;
    Ok(c)
}

/// Training seed for repetition `rep` of a sweep cell.
pub fn repetition_seed(root: u64, rep: usize) -> u64 {
    derive_seed(root, &format!("rep-{rep}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub rep: usize,
    pub seed: u64,
    pub policy: String,
    pub mean_cost: f64,
    pub mean_penalized_cost: f64,
    pub feasible_fraction: f64,
    /// Mean episode reward of the last PPO update; empty for baselines.
    pub final_reward: Option<f64>,
    /// `ok`, or the error that stopped the cell.
    pub status: String,
}

pub const SWEEP_HEADER: [&str; 10] = [
    "axis",
    "value",
    "rep",
    "seed",
    "policy",
    "mean_cost",
    "mean_penalized_cost",
    "feasible_fraction",
    "final_reward",
    "status",
];

/// Runs every (value, repetition) cell. A cell whose training diverges or
/// fails is recorded with its error and the sweep moves on. When `out_dir`
/// is given, each cell's metrics are written under `value-V/rep-R/`.
pub fn run_sweep(spec: &SweepSpec, base: &ScenarioConfig, out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &value in &spec.values {
        let config = apply_axis(base, spec.axis, value)?;
        for rep in 0..spec.repetitions {
            let seed = repetition_seed(base.seed, rep);
            match run_cell(&config, seed) {
                Ok(cell) => {
                    if let Some(dir) = out_dir {
                        let cell_dir = dir.join(format!("value-{value}")).join(format!("rep-{rep}"));
                        std::fs::create_dir_all(&cell_dir)?;
                        crate::ppo::write_metrics_csv(
                            &cell.training.metrics,
                            std::fs::File::create(cell_dir.join("metrics.csv"))?,
                        )?;
                        write_outcome_csv(&cell.policies, std::fs::File::create(cell_dir.join("outcome.csv"))?)?;
                    }
                    let final_reward = cell.training.metrics.last().map(|m| m.mean_reward);
                    for (i, p) in cell.policies.iter().enumerate() {
                        rows.push(SweepRow {
                            axis: spec.axis,
                            value,
                            rep,
                            seed,
                            policy: p.name.clone(),
                            mean_cost: p.mean_cost,
                            mean_penalized_cost: p.mean_penalized_cost,
                            feasible_fraction: p.feasible_fraction,
                            final_reward: if i == 0 { final_reward } else { None },
                            status: "ok".into(),
                        });
                    }
                }
                Err(e) => rows.push(SweepRow {
                    axis: spec.axis,
                    value,
                    rep,
                    seed,
                    policy: "ppo".into(),
                    mean_cost: f64::NAN,
                    mean_penalized_cost: f64::NAN,
                    feasible_fraction: f64::NAN,
                    final_reward: None,
                    status: format!("failed: {e}"),
                }),
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.axis.to_string(),
            r.value.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.policy.clone(),
            r.mean_cost.to_string(),
            r.mean_penalized_cost.to_string(),
            r.feasible_fraction.to_string(),
            r.final_reward.map(|v| v.to_string()).unwrap_or_default(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (policy, evaluation episode): the policy name, the episode
/// index, the assignment as `a0 a1 ...`, then the episode outcome columns.
pub fn write_outcome_csv<W: Write>(reports: &[PolicyReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["policy", "episode", "assignment"];
    header.extend(EpisodeOutcome::CSV_HEADER);
    w.write_record(&header)?;
    for report in reports {
        for (e, (outcome, assignment)) in report.outcomes.iter().zip(&report.assignments).enumerate() {
            let mut record = vec![
                report.name.clone(),
                e.to_string(),
                assignment.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "),
            ];
            record.extend(outcome.csv_fields());
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}
