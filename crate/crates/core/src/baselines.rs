//! Non-learning reference policies, scored through the same pipeline as PPO.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scenario::{Evaluation, Scenario};
use crate::seeds::stream;
use crate::timeline::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// K uniformly random assignments; the cheapest one wins.
    RandomBestOf(usize),
    /// Task `i` goes to satellite `i mod J`.
    Sequential,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineKind::RandomBestOf(k) => write!(f, "random{k}"),
            BaselineKind::Sequential => f.write_str("sequential"),
        }
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    /// Accepts `sequential`, `random` (K = 1000) or `randomK`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        if s == "sequential" {
            return Ok(BaselineKind::Sequential);
        }
        if let Some(k) = s.strip_prefix("random") {
            let k = if k.is_empty() {
                1000
            } else {
                k.parse()
                    .map_err(|_| Error::Argument(format!("bad trial count in `{s}`")))?
            };
            if k == 0 {
                return Err(Error::Argument("random baseline needs at least one trial".into()));
            }
            return Ok(BaselineKind::RandomBestOf(k));
        }
        Err(Error::Argument(format!("unknown baseline `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub assignment: Vec<usize>,
    pub evaluation: Evaluation,
    /// `cost + penalty·|violated|`, the quantity minimised.
    pub penalized_cost: f64,
}

fn scored(scenario: &Scenario, tasks: &[TaskSpec], assignment: Vec<usize>) -> Result<BaselineResult> {
    let evaluation = scenario.evaluate(tasks, &assignment)?;
    let penalized_cost = scenario.penalized_cost(&evaluation.outcome);
    Ok(BaselineResult {
        assignment,
        evaluation,
        penalized_cost,
    })
}

/// Runs a baseline on one task set. Random draws come from the "baseline"
/// sub-stream of `seed`; candidates are ranked by penalized cost and the
/// first of equal candidates is kept.
pub fn run_baseline(kind: BaselineKind, scenario: &Scenario, tasks: &[TaskSpec], seed: u64) -> Result<BaselineResult> {
    let count = scenario.satellite_count();
    match kind {
        BaselineKind::Sequential => scored(scenario, tasks, (0..tasks.len()).map(|i| i % count).collect()),
        BaselineKind::RandomBestOf(k) => {
            if k == 0 {
                return Err(Error::Argument("random baseline needs at least one trial".into()));
            }
            let mut rng = stream(seed, "baseline");
            let mut best: Option<BaselineResult> = None;
            for _ in 0..k {
                let assignment: Vec<usize> = (0..tasks.len()).map(|_| rng.random_range(0..count)).collect();
                let candidate = scored(scenario, tasks, assignment)?;
                if best.as_ref().is_none_or(|b| candidate.penalized_cost < b.penalized_cost) {
                    best = Some(candidate);
                }
            }
            Ok(best.expect("k >= 1"))
        }
    }
}

/// Enumerates all `J^N` assignments and returns the cheapest. Only for small
/// instances; refuses more than `limit` candidates.
pub fn exhaustive_optimum(scenario: &Scenario, tasks: &[TaskSpec], limit: usize) -> Result<BaselineResult> {
    let count = scenario.satellite_count();
    let total = (count as u128).checked_pow(tasks.len() as u32).unwrap_or(u128::MAX);
    if total > limit as u128 {
        return Err(Error::Argument(format!("{total} assignments exceed the limit of {limit}")));
    }
    let mut assignment = vec![0usize; tasks.len()];
    let mut best: Option<BaselineResult> = None;
    loop {
        let candidate = scored(scenario, tasks, assignment.clone())?;
        if best.as_ref().is_none_or(|b| candidate.penalized_cost < b.penalized_cost) {
            best = Some(candidate);
        }
        // Odometer increment; the last digit moves fastest.
        let mut i = tasks.len();
        loop {
            if i == 0 {
                return best.ok_or_else(|| Error::Argument("no assignments".into()));
            }
            i -= 1;
            assignment[i] += 1;
            if assignment[i] < count {
                break;
            }
            assignment[i] = 0;
        }
    }
}
