//! A fully-resolved experiment scenario and the single cost pipeline that
//! every policy (PPO, baselines, replays) is scored through.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::batch_reliability;
use crate::economics::{
    check_constraints, total_price, total_quality, weighted_cost, Constraints, CostComponents,
    EpisodeOutcome, NormalizationScales, ObjectiveWeights,
};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::timeline::{Network, ScheduleResult, TaskImage, TaskSpec};
use crate::watermark::{image_mse, synthetic_image, AlgorithmKind, PayloadSpec, WatermarkAlgorithm};

/// How task sizes are drawn at every episode reset.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSizes {
    /// Uniform over `[min_bits, max_bits]`.
    Uniform { min_bits: f64, max_bits: f64 },
    /// The same sizes every episode.
    Fixed(Vec<f64>),
}

/// Runs the real codecs on a synthetic image per task instead of using the
/// calibrated per-satellite MSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerTaskCodec {
    pub image_side: usize,
    /// Codec parameters per kind, indexed by [`AlgorithmKind::index`].
    pub algorithms: [WatermarkAlgorithm; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Network,
    pub task_count: usize,
    pub task_sizes: TaskSizes,
    pub per_task_codec: Option<PerTaskCodec>,
    pub weights: ObjectiveWeights,
    pub constraints: Constraints,
    pub scales: NormalizationScales,
    /// Cost added per violated constraint at episode end.
    pub penalty: f64,
    pub peak: f64,
    pub start_time_s: f64,
    /// End an episode as soon as the reliability constraint is already lost.
    pub early_abort: bool,
}

/// Schedule plus scored outcome of one assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub schedule: ScheduleResult,
    pub outcome: EpisodeOutcome,
}

impl Scenario {
    pub fn satellite_count(&self) -> usize {
        self.network.satellite_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.weights.validate()?;
        self.constraints.validate()?;
        self.scales.validate()?;
        match &self.task_sizes {
            TaskSizes::Uniform { min_bits, max_bits } => {
                if !(*min_bits > 0.0 && min_bits <= max_bits && max_bits.is_finite()) {
                    return Err(Error::config(
                        "tasks.size_bits",
                        "need 0 < min <= max, both finite",
                    ));
                }
            }
            TaskSizes::Fixed(sizes) => {
                if sizes.len() != self.task_count {
                    return Err(Error::config(
                        "tasks.fixed_sizes_bits",
                        format!("{} sizes for {} tasks", sizes.len(), self.task_count),
                    ));
                }
                if sizes.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                    return Err(Error::config("tasks.fixed_sizes_bits", "sizes must be positive"));
                }
            }
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(Error::config("objective.penalty", "must be non-negative"));
        }
        if !(self.peak > 0.0) {
            return Err(Error::config("watermark.peak", "must be positive"));
        }
        if !(self.start_time_s >= 0.0 && self.start_time_s.is_finite()) {
            return Err(Error::config("constellation.start_time_s", "must be non-negative"));
        }
        Ok(())
    }

    /// Largest task size the distribution can produce.
    pub fn max_task_bits(&self) -> f64 {
        match &self.task_sizes {
            TaskSizes::Uniform { max_bits, .. } => *max_bits,
            TaskSizes::Fixed(sizes) => sizes.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Draws one episode's tasks; identical seeds give identical tasks.
    pub fn generate_tasks(&self, seed: u64) -> Result<Vec<TaskSpec>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tasks = Vec::with_capacity(self.task_count);
        for i in 0..self.task_count {
            let size_bits = match &self.task_sizes {
                TaskSizes::Uniform { min_bits, max_bits } if min_bits < max_bits => {
                    rng.random_range(*min_bits..=*max_bits)
                }
                TaskSizes::Uniform { min_bits, .. } => *min_bits,
                TaskSizes::Fixed(sizes) => sizes[i],
            };
            let image = match &self.per_task_codec {
                Some(codec) => {
                    let image_seed = rng.random::<u64>();
                    let img = synthetic_image(codec.image_side, codec.image_side, image_seed);
                    let mut mse = [0.0; 3];
                    for kind in AlgorithmKind::ALL {
                        mse[kind.index()] = image_mse(
                            &img,
                            &codec.algorithms[kind.index()],
                            &PayloadSpec::default(),
                            derive_seed(image_seed, "payload"),
                        )?;
                    }
                    Some(TaskImage {
                        seed: image_seed,
                        mse,
                    })
                }
                None => None,
            };
            tasks.push(TaskSpec {
                index: i,
                size_bits,
                image,
            });
        }
        Ok(tasks)
    }

    /// Schedules and scores an assignment. The assignment may cover only a
    /// prefix of `tasks`.
    pub fn evaluate(&self, tasks: &[TaskSpec], assignment: &[usize]) -> Result<Evaluation> {
        let tasks = tasks.get(..assignment.len()).ok_or_else(|| {
            Error::Shape(format!(
                "{} assignments for {} tasks",
                assignment.len(),
                tasks.len()
            ))
        })?;
        let schedule = self.network.simulate(assignment, tasks, self.start_time_s)?;
        let sizes: Vec<f64> = tasks.iter().map(|t| t.size_bits).collect();
        let reliability = batch_reliability(&schedule.bers, &sizes)?;
        let raw = CostComponents {
            time_s: schedule.total_time,
            energy_j: schedule.transmission_energy,
            price: total_price(tasks, assignment, &self.network.servers),
            quality_db: total_quality(tasks, assignment, &self.network.servers, self.peak),
        };
        let cost = weighted_cost(&raw.normalized(&self.scales), &self.weights);
        let violated = check_constraints(
            raw.time_s,
            reliability.failure,
            raw.quality_db,
            &self.constraints,
        );
        let outcome = EpisodeOutcome {
            total_time_s: raw.time_s,
            energy_j: raw.energy_j,
            price: raw.price,
            quality_db: raw.quality_db,
            failure_prob: reliability.failure,
            cost,
            feasible: violated.is_empty(),
            violated,
        };
        Ok(Evaluation { schedule, outcome })
    }

    /// Cost plus the per-constraint penalty: the quantity every policy minimises.
    pub fn penalized_cost(&self, outcome: &EpisodeOutcome) -> f64 {
        outcome.penalized_cost(self.penalty)
    }
}
