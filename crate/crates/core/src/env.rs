//! The offloading MDP: one decision per task, in upload order, choosing the
//! satellite that receives it.
//!
//! The reward for a step is the drop in scalar cost, `C(prev) - C(now)`, with
//! the empty assignment costing zero. The terminal step additionally pays
//! `-penalty` per violated constraint, so an episode's return is
//! `-C(final) - penalty·|violated|`.

use std::sync::Arc;

use crate::economics::EpisodeOutcome;
use crate::error::{Error, Result};
use crate::geometry::zenith_separation;
use crate::ppo::{Environment, Transition};
use crate::scenario::{Evaluation, Scenario};
use crate::timeline::TaskSpec;

/// Features per satellite: backlog, visibility, signed angle, price, speed,
/// uplink rate.
pub const SATELLITE_FEATURES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Outcome of the assignment so far.
    pub outcome: EpisodeOutcome,
}

#[derive(Debug, Clone)]
pub struct OffloadEnv {
    scenario: Arc<Scenario>,
    tasks: Vec<TaskSpec>,
    assignment: Vec<usize>,
    evaluation: Evaluation,
    done: bool,
    max_price: f64,
    max_speed: f64,
}

/// Observation width for `tasks` tasks and `satellites` satellites.
pub fn observation_dim(tasks: usize, satellites: usize) -> usize {
    1 + 2 * tasks + SATELLITE_FEATURES * satellites
}

impl OffloadEnv {
    pub fn new(scenario: Arc<Scenario>) -> Result<Self> {
        scenario.validate()?;
        let max_price = scenario
            .network
            .servers
            .iter()
            .map(|s| s.unit_price_per_byte)
            .fold(0.0, f64::max);
        let max_speed = scenario
            .network
            .servers
            .iter()
            .map(|s| s.compute_speed_bps)
            .fold(0.0, f64::max);
        let evaluation = scenario.evaluate(&[], &[])?;
        Ok(Self {
            scenario,
            tasks: Vec::new(),
            assignment: Vec::new(),
            evaluation,
            done: true,
            max_price,
            max_speed,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Schedule and outcome of the assignment so far.
    pub fn evaluation(&self) -> &Evaluation {
        &self.evaluation
    }

    /// Starts an episode with tasks drawn from `seed`.
    pub fn reset_seeded(&mut self, seed: u64) -> Result<Vec<f64>> {
        let tasks = self.scenario.generate_tasks(seed)?;
        self.reset_with_tasks(tasks)
    }

    /// Starts an episode with explicit tasks.
    pub fn reset_with_tasks(&mut self, tasks: Vec<TaskSpec>) -> Result<Vec<f64>> {
        if tasks.len() != self.scenario.task_count {
            return Err(Error::Shape(format!(
                "{} tasks for a {}-task scenario",
                tasks.len(),
                self.scenario.task_count
            )));
        }
        self.tasks = tasks;
        self.assignment.clear();
        self.evaluation = self.scenario.evaluate(&self.tasks, &[])?;
        self.done = self.tasks.is_empty();
        self.observe()
    }

    /// Assigns the next task to `action` and returns the shaped reward.
    pub fn step_detailed(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        let count = self.scenario.satellite_count();
        if action >= count {
            return Err(Error::IndexOutOfRange {
                what: "satellites",
                index: action,
                len: count,
            });
        }
        let previous = self.evaluation.outcome.cost;
        self.assignment.push(action);
        let evaluation = match self.scenario.evaluate(&self.tasks, &self.assignment) {
            Ok(e) => e,
            Err(e) => {
                self.assignment.pop();
                return Err(e);
            }
        };
        let outcome = &evaluation.outcome;
        let all_assigned = self.assignment.len() == self.tasks.len();
        let lost = self.scenario.early_abort && outcome.failure_prob >= self.scenario.constraints.max_failure;
        self.done = all_assigned || lost;
        let mut reward = previous - outcome.cost;
        if self.done {
            reward -= self.scenario.penalty * outcome.violated.len() as f64;
        }
        self.evaluation = evaluation;
        Ok(StepResult {
            state: self.observe()?,
            reward,
            done: self.done,
            outcome: self.evaluation.outcome.clone(),
        })
    }

    /// Encodes the current state; every feature lies in `[-1, 1]`.
    pub fn observe(&self) -> Result<Vec<f64>> {
        let sc = &*self.scenario;
        let net = &sc.network;
        let count = sc.satellite_count();
        let horizon = sc.scales.time_s;
        let traces = &self.evaluation.schedule.traces;
        let now = traces.last().map_or(sc.start_time_s, |t| t.upload_end);

        let mut state = Vec::with_capacity(observation_dim(self.tasks.len(), count));
        state.push((now - sc.start_time_s) / horizon);

        let max_bits = sc.max_task_bits();
        for (i, task) in self.tasks.iter().enumerate() {
            state.push(if i < self.assignment.len() { 1.0 } else { 0.0 });
            state.push(task.size_bits / max_bits);
        }

        let mut busy_until = vec![now; count];
        for t in traces {
            let b = &mut busy_until[t.assigned_sat];
            *b = b.max(t.comp_end);
        }
        let mut rates = Vec::with_capacity(count);
        let mut poses = Vec::with_capacity(count);
        for j in 0..count {
            poses.push(net.constellation.pose_at(j, now)?);
            rates.push(net.uplink(j, now)?.rate_bps);
        }
        let max_rate = rates.iter().copied().fold(0.0, f64::max);
        for j in 0..count {
            let server = &net.servers[j];
            let pose = &poses[j];
            let signed = if pose.geocentric_angle > std::f64::consts::PI {
                -zenith_separation(pose.geocentric_angle)
            } else {
                pose.geocentric_angle
            };
            state.push((busy_until[j] - now) / horizon);
            state.push(if pose.visible { 1.0 } else { 0.0 });
            state.push(signed / std::f64::consts::PI);
            state.push(ratio(server.unit_price_per_byte, self.max_price));
            state.push(ratio(server.compute_speed_bps, self.max_speed));
            state.push(ratio(rates[j], max_rate));
        }
        for v in &mut state {
            *v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        }
        Ok(state)
    }
}

fn ratio(value: f64, max: f64) -> f64 {
    if max > 0.0 {
        value / max
    } else {
        0.0
    }
}

impl Environment for OffloadEnv {
    fn observation_dim(&self) -> usize {
        observation_dim(self.scenario.task_count, self.scenario.satellite_count())
    }

    fn action_count(&self) -> usize {
        self.scenario.satellite_count()
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.reset_seeded(seed)
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        let r = self.step_detailed(action)?;
        Ok(Transition {
            state: r.state,
            reward: r.reward,
            done: r.done,
        })
    }

    fn is_done(&self) -> bool {
        self.done
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SatelliteProfile, ScenarioConfig};
    use crate::watermark::AlgorithmKind;
    use proptest::prelude::*;

    fn env_for(config: &ScenarioConfig) -> OffloadEnv {
        OffloadEnv::new(Arc::new(config.build().unwrap())).unwrap()
    }

    fn two_by_two() -> ScenarioConfig {
        let mut c = ScenarioConfig::toy();
        c.constellation.satellite_count = 2;
        c.satellites.profiles.truncate(2);
        c.tasks.count = 2;
        c.tasks.fixed_sizes_bits = Some(vec![4e6, 1e6]);
        c
    }

    fn run(env: &mut OffloadEnv, seed: u64, actions: &[usize]) -> (f64, EpisodeOutcome) {
        env.reset_seeded(seed).unwrap();
        let mut total = 0.0;
        let mut last = None;
        for &a in actions {
            let r = env.step_detailed(a).unwrap();
            total += r.reward;
            let done = r.done;
            last = Some(r.outcome);
            if done {
                break;
            }
        }
        (total, last.unwrap())
    }

    #[test]
    fn reset_is_deterministic() {
        let mut env = env_for(&ScenarioConfig::default());
        let a = env.reset_seeded(42).unwrap();
        let b = env.reset_seeded(42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), env.observation_dim());
        assert_ne!(a, env.reset_seeded(43).unwrap());
    }

    #[test]
    fn features_stay_in_unit_box() {
        let mut env = env_for(&ScenarioConfig::default());
        let mut state = env.reset_seeded(3).unwrap();
        let mut k = 0;
        loop {
            assert!(state.iter().all(|v| (-1.0..=1.0).contains(v)), "{state:?}");
            let r = env.step_detailed(k % 15).unwrap();
            state = r.state;
            k += 7;
            if r.done {
                break;
            }
        }
    }

    #[test]
    fn empty_episode_is_done_immediately() {
        let mut c = ScenarioConfig::toy();
        c.tasks.count = 0;
        c.tasks.fixed_sizes_bits = Some(vec![]);
        let mut env = env_for(&c);
        env.reset_seeded(1).unwrap();
        assert!(env.is_done());
        assert_eq!(env.evaluation().outcome.cost, 0.0);
        assert!(matches!(env.step_detailed(0), Err(Error::Contract(_))));
    }

    #[test]
    fn stepping_a_finished_episode_is_a_contract_error() {
        let mut env = env_for(&two_by_two());
        run(&mut env, 0, &[0, 1]);
        assert!(matches!(env.step_detailed(0), Err(Error::Contract(_))));
        env.reset_seeded(0).unwrap();
        assert!(matches!(env.step_detailed(5), Err(Error::IndexOutOfRange { .. })));
        // A rejected action leaves the episode untouched.
        assert!(env.assignment().is_empty());
    }

    #[test]
    fn task_sizes_match_configured_mean() {
        let config = ScenarioConfig::default();
        let scenario = config.build().unwrap();
        let mut sum = 0.0;
        let mut n = 0.0;
        for seed in 0..100 {
            for t in scenario.generate_tasks(seed).unwrap() {
                sum += t.size_bits;
                n += 1.0;
            }
        }
        let mean = (config.tasks.min_bits + config.tasks.max_bits) / 2.0;
        assert!((sum / n - mean).abs() < 0.05 * mean, "{} vs {mean}", sum / n);
    }

    #[test]
    fn two_by_two_rewards_telescope() {
        let config = two_by_two();
        let scenario = config.build().unwrap();
        let mut env = env_for(&config);
        for actions in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let (total, outcome) = run(&mut env, 0, &actions);
            let tasks = scenario.generate_tasks(0).unwrap();
            let offline = scenario.evaluate(&tasks, &actions).unwrap().outcome;
            assert_eq!(outcome, offline);
            let expected = -offline.cost - scenario.penalty * offline.violated.len() as f64;
            assert!((total - expected).abs() < 1e-12, "{actions:?}: {total} vs {expected}");
        }
    }

    #[test]
    fn single_satellite_return_is_forced() {
        let mut c = ScenarioConfig::toy();
        c.constellation.satellite_count = 1;
        c.satellites.profiles.truncate(1);
        let scenario = c.build().unwrap();
        let mut env = env_for(&c);
        let (total, outcome) = run(&mut env, 5, &[0; 4]);
        let tasks = scenario.generate_tasks(5).unwrap();
        let offline = scenario.evaluate(&tasks, &[0; 4]).unwrap().outcome;
        assert_eq!(outcome, offline);
        assert!((total + offline.cost + scenario.penalty * offline.violated.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn crawling_satellite_violates_time() {
        let mut c = two_by_two();
        c.satellites.profiles[1] = SatelliteProfile {
            bandwidth_hz: 30e6,
            compute_speed_bps: 1e-3,
            unit_price_per_byte: 1e-6,
            algorithm: AlgorithmKind::Lsb,
        };
        let mut env = env_for(&c);
        env.reset_seeded(0).unwrap();
        env.step_detailed(1).unwrap();
        let last = env.step_detailed(0).unwrap();
        assert!(last.done);
        assert!(last.outcome.violated.contains(&crate::economics::ConstraintKind::Time));
        let previous = env.scenario().evaluate(env.tasks(), &[1]).unwrap().outcome.cost;
        let penalty = env.scenario().penalty * last.outcome.violated.len() as f64;
        assert!((last.reward - (previous - last.outcome.cost - penalty)).abs() < 1e-9);
    }

    #[test]
    fn hopeless_reliability_ends_the_episode_early() {
        let mut c = two_by_two();
        c.link.reference_gain = 1e-6;
        let mut env = env_for(&c);
        env.reset_seeded(0).unwrap();
        let r = env.step_detailed(0).unwrap();
        assert!(r.done);
        assert_eq!(env.assignment().len(), 1);
        assert!(r.outcome.violated.contains(&crate::economics::ConstraintKind::Reliability));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn returns_telescope_on_the_default_scenario(
            seed in 0u64..1000,
            actions in prop::collection::vec(0usize..15, 20),
        ) {
            let config = ScenarioConfig::default();
            let scenario = config.build().unwrap();
            let mut env = OffloadEnv::new(Arc::new(scenario.clone())).unwrap();
            let (total, outcome) = run(&mut env, seed, &actions);
            let taken = env.assignment().to_vec();
            let offline = scenario.evaluate(&scenario.generate_tasks(seed).unwrap(), &taken).unwrap();
            prop_assert_eq!(&outcome, &offline.outcome);
            prop_assert_eq!(&env.evaluation().schedule, &offline.schedule);
            let expected = -offline.outcome.cost - scenario.penalty * offline.outcome.violated.len() as f64;
            prop_assert!((total - expected).abs() < 1e-9);
        }
    }
}
