//! Pricing, watermark-quality aggregation, and the constrained scalar cost
//!
//! ```text
//! C = w1·T/T_s + w2·E/E_s + w3·P/P_s − w4·V/V_s
//! ```
//!
//! Each raw component is divided by a configured scale so the weights act on
//! unit-free quantities.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::timeline::{SatelliteServer, TaskSpec};
use crate::watermark::psnr_from_mse;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub time: f64,
    pub energy: f64,
    pub price: f64,
    pub quality: f64,
}

impl ObjectiveWeights {
    pub fn new(time: f64, energy: f64, price: f64, quality: f64) -> Result<Self> {
        let w = Self {
            time,
            energy,
            price,
            quality,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.time, self.energy, self.price, self.quality]
    }

    pub fn validate(&self) -> Result<()> {
        let ws = self.as_array();
        if ws.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::config("objective.weights", "each weight must be non-negative"));
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::config(
                "objective.weights",
                format!("weights must sum to 1, got {sum}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    /// Completion time must stay strictly below this, seconds.
    pub max_time_s: f64,
    /// Transmission failure probability must stay strictly below this.
    pub max_failure: f64,
    /// Total PSNR must reach at least this, dB.
    pub min_quality_db: f64,
}

impl Constraints {
    pub fn validate(&self) -> Result<()> {
        if !self.max_time_s.is_finite() {
            return Err(Error::config("constraints.max_time_s", "must be finite"));
        }
        if !(self.max_failure > 0.0 && self.max_failure <= 1.0) {
            return Err(Error::config("constraints.max_failure", "must lie in (0, 1]"));
        }
        if !self.min_quality_db.is_finite() {
            return Err(Error::config("constraints.min_quality_db", "must be finite"));
        }
        Ok(())
    }
}

/// Divisors applied to each raw component before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationScales {
    pub time_s: f64,
    pub energy_j: f64,
    pub price: f64,
    pub quality_db: f64,
}

impl NormalizationScales {
    pub const UNIT: Self = Self {
        time_s: 1.0,
        energy_j: 1.0,
        price: 1.0,
        quality_db: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("time_s", self.time_s),
            ("energy_j", self.energy_j),
            ("price", self.price),
            ("quality_db", self.quality_db),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("objective.scales.{name}"), "must be positive"));
            }
        }
        Ok(())
    }
}

/// Raw (unnormalised) objective components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostComponents {
    pub time_s: f64,
    pub energy_j: f64,
    pub price: f64,
    pub quality_db: f64,
}

impl CostComponents {
    pub fn normalized(&self, scales: &NormalizationScales) -> CostComponents {
        CostComponents {
            time_s: self.time_s / scales.time_s,
            energy_j: self.energy_j / scales.energy_j,
            price: self.price / scales.price,
            quality_db: self.quality_db / scales.quality_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintKind {
    Time,
    Reliability,
    Quality,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::Time => "time",
            ConstraintKind::Reliability => "reliability",
            ConstraintKind::Quality => "quality",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub total_time_s: f64,
    pub energy_j: f64,
    pub price: f64,
    pub quality_db: f64,
    pub failure_prob: f64,
    pub cost: f64,
    pub feasible: bool,
    pub violated: BTreeSet<ConstraintKind>,
}

impl EpisodeOutcome {
    pub fn components(&self) -> CostComponents {
        CostComponents {
            time_s: self.total_time_s,
            energy_j: self.energy_j,
            price: self.price,
            quality_db: self.quality_db,
        }
    }

    /// Cost plus `penalty` per violated constraint.
    pub fn penalized_cost(&self, penalty: f64) -> f64 {
        self.cost + penalty * self.violated.len() as f64
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "total_time_s",
        "energy_j",
        "price",
        "quality_db",
        "failure_prob",
        "cost",
        "feasible",
        "violated",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.total_time_s.to_string(),
            self.energy_j.to_string(),
            self.price.to_string(),
            self.quality_db.to_string(),
            self.failure_prob.to_string(),
            self.cost.to_string(),
            self.feasible.to_string(),
            self.violated
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("|"),
        ]
    }
}

/// `Σ (Dᵢ/8)·UP_{a(i)}`: price is charged per byte.
pub fn total_price(tasks: &[TaskSpec], assignment: &[usize], servers: &[SatelliteServer]) -> f64 {
    tasks
        .iter()
        .zip(assignment)
        .map(|(t, &j)| t.size_bits / 8.0 * servers[j].unit_price_per_byte)
        .sum()
}

/// MSE that task `task` incurs on `server`: the per-image measurement when
/// one exists, else the server's calibrated constant.
pub fn task_mse(task: &TaskSpec, server: &SatelliteServer) -> f64 {
    match &task.image {
        Some(image) => image.mse[server.kind().index()],
        None => server.mse,
    }
}

/// `Σ 10·log₁₀(peak²/Mse[a(i)])`; `+∞` if any task is lossless.
pub fn total_quality(
    tasks: &[TaskSpec],
    assignment: &[usize],
    servers: &[SatelliteServer],
    peak: f64,
) -> f64 {
    tasks
        .iter()
        .zip(assignment)
        .map(|(t, &j)| psnr_from_mse(task_mse(t, &servers[j]), peak))
        .sum()
}

pub fn weighted_cost(normalized: &CostComponents, weights: &ObjectiveWeights) -> f64 {
    weights.time * normalized.time_s + weights.energy * normalized.energy_j + weights.price * normalized.price
        - weights.quality * normalized.quality_db
}

pub fn scalar_cost(
    raw: &CostComponents,
    weights: &ObjectiveWeights,
    scales: &NormalizationScales,
) -> Result<f64> {
    weights.validate()?;
    Ok(weighted_cost(&raw.normalized(scales), weights))
}

/// Constraints violated by a measured episode; strict `<` for time and
/// reliability, `≥` for quality.
pub fn check_constraints(
    total_time_s: f64,
    failure_prob: f64,
    quality_db: f64,
    constraints: &Constraints,
) -> BTreeSet<ConstraintKind> {
    let mut violated = BTreeSet::new();
    if !(total_time_s < constraints.max_time_s) {
        violated.insert(ConstraintKind::Time);
    }
    if !(failure_prob < constraints.max_failure) {
        violated.insert(ConstraintKind::Reliability);
    }
    if !(quality_db >= constraints.min_quality_db) {
        violated.insert(ConstraintKind::Quality);
    }
    violated
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::TaskImage;
    use crate::watermark::WatermarkAlgorithm;

    fn server(price: f64, mse: f64) -> SatelliteServer {
        SatelliteServer {
            compute_speed_bps: 1.0,
            unit_price_per_byte: price,
            algorithm: WatermarkAlgorithm::Lsb { plane: 0 },
            mse,
        }
    }

    fn raw(t: f64, e: f64, p: f64, v: f64) -> CostComponents {
        CostComponents {
            time_s: t,
            energy_j: e,
            price: p,
            quality_db: v,
        }
    }

    #[test]
    fn price_examples() {
        let tasks = vec![TaskSpec::new(0, 800.0)];
        assert!((total_price(&tasks, &[0], &[server(0.01, 1.0)]) - 1.0).abs() < 1e-12);
        assert_eq!(total_price(&tasks, &[0], &[server(0.0, 1.0)]), 0.0);
    }

    #[test]
    fn price_resummation() {
        let sizes = [1200.0, 96.0, 4000.0, 8.0, 640.0];
        let tasks: Vec<_> = sizes.iter().enumerate().map(|(i, &d)| TaskSpec::new(i, d)).collect();
        let servers = [server(0.5, 1.0), server(0.02, 1.0), server(3.0, 1.0)];
        let assignment = [2, 0, 1, 2, 0];
        let oracle = 1200.0 / 8.0 * 3.0 + 96.0 / 8.0 * 0.5 + 4000.0 / 8.0 * 0.02 + 1.0 * 3.0 + 80.0 * 0.5;
        assert!((total_price(&tasks, &assignment, &servers) - oracle).abs() < 1e-9);
    }

    #[test]
    fn quality_examples() {
        let tasks: Vec<_> = (0..3).map(|i| TaskSpec::new(i, 1.0)).collect();
        let peak = 255.0;
        let flat = [server(0.0, peak * peak)];
        assert_eq!(total_quality(&tasks, &[0, 0, 0], &flat, peak), 0.0);
        let one = [server(0.0, 2.0)];
        let single = total_quality(&tasks[..1], &[0], &one, peak);
        assert!((total_quality(&tasks, &[0, 0, 0], &one, peak) - 3.0 * single).abs() < 1e-12);
        let lossless = [server(0.0, 0.0)];
        assert_eq!(total_quality(&tasks, &[0, 0, 0], &lossless, peak), f64::INFINITY);
    }

    #[test]
    fn quality_matches_per_task_psnr() {
        use crate::watermark::{psnr, GrayImage};
        // Each server's MSE is realised by an actual image pair.
        let base = GrayImage::filled(4, 4, 100);
        let mut shifted = base.clone();
        shifted.pixels_mut()[..4].iter_mut().for_each(|p| *p += 2); // mse = 1
        let mut noisier = base.clone();
        noisier.pixels_mut().iter_mut().for_each(|p| *p += 3); // mse = 9
        let q1 = psnr(&base, &shifted, 255.0).unwrap();
        let q2 = psnr(&base, &noisier, 255.0).unwrap();
        let servers = [server(0.0, q1.mse), server(0.0, q2.mse)];
        let tasks: Vec<_> = (0..4).map(|i| TaskSpec::new(i, 1.0)).collect();
        let assignment = [0, 1, 1, 0];
        let oracle = 2.0 * q1.psnr_db + 2.0 * q2.psnr_db;
        assert!((total_quality(&tasks, &assignment, &servers, 255.0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn per_task_image_overrides_calibration() {
        let mut task = TaskSpec::new(0, 1.0);
        task.image = Some(TaskImage {
            seed: 0,
            mse: [4.0, 5.0, 6.0],
        });
        assert_eq!(task_mse(&task, &server(0.0, 1.0)), 4.0);
    }

    #[test]
    fn scalar_cost_examples() {
        let u = NormalizationScales::UNIT;
        let c = |w: [f64; 4], parts| {
            scalar_cost(&parts, &ObjectiveWeights::new(w[0], w[1], w[2], w[3]).unwrap(), &u).unwrap()
        };
        assert_eq!(c([1.0, 0.0, 0.0, 0.0], raw(5.0, 9.0, 9.0, 9.0)), 5.0);
        assert_eq!(c([0.0, 0.0, 0.0, 1.0], raw(9.0, 9.0, 9.0, 3.0)), -3.0);
        assert_eq!(c([0.25; 4], raw(4.0, 2.0, 8.0, 6.0)), 2.0);
    }

    #[test]
    fn scales_divide_components() {
        let w = ObjectiveWeights::new(0.5, 0.0, 0.0, 0.5).unwrap();
        let scales = NormalizationScales {
            time_s: 2.0,
            quality_db: 4.0,
            ..NormalizationScales::UNIT
        };
        assert_eq!(scalar_cost(&raw(8.0, 0.0, 0.0, 8.0), &w, &scales).unwrap(), 1.0);
    }

    #[test]
    fn weight_validation() {
        assert!(ObjectiveWeights::new(0.3, 0.3, 0.3, 0.0).is_err());
        assert!(ObjectiveWeights::new(1.2, -0.2, 0.0, 0.0).is_err());
        let err = ObjectiveWeights::new(0.3, 0.3, 0.2, 0.1).unwrap_err();
        assert!(err.to_string().contains("objective.weights"));
        assert!(ObjectiveWeights::new(0.1, 0.2, 0.3, 0.4).is_ok());
    }

    #[test]
    fn constraint_boundaries() {
        let k = Constraints {
            max_time_s: 10.0,
            max_failure: 0.1,
            min_quality_db: 30.0,
        };
        assert_eq!(
            check_constraints(10.0, 0.0, 40.0, &k),
            BTreeSet::from([ConstraintKind::Time])
        );
        assert!(check_constraints(9.0, 0.05, 30.0, &k).is_empty());
        assert_eq!(
            check_constraints(9.0, 0.1, 29.9, &k),
            BTreeSet::from([ConstraintKind::Reliability, ConstraintKind::Quality])
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn weights() -> impl Strategy<Value = ObjectiveWeights> {
            proptest::array::uniform4(0.01f64..1.0).prop_map(|w| {
                let s: f64 = w.iter().sum();
                ObjectiveWeights {
                    time: w[0] / s,
                    energy: w[1] / s,
                    price: w[2] / s,
                    quality: 1.0 - (w[0] + w[1] + w[2]) / s,
                }
            })
        }

        proptest! {
            #[test]
            fn more_quality_lowers_cost(w in weights(), v in 0.0f64..100.0, dv in 0.01f64..10.0) {
                let u = NormalizationScales::UNIT;
                let a = scalar_cost(&raw(1.0, 2.0, 3.0, v), &w, &u).unwrap();
                let b = scalar_cost(&raw(1.0, 2.0, 3.0, v + dv), &w, &u).unwrap();
                prop_assert!(b < a);
            }

            #[test]
            fn argmin_invariant_to_common_rescale(
                w in weights(),
                parts in proptest::collection::vec(proptest::array::uniform4(0.0f64..50.0), 2..8),
                k in 0.1f64..10.0,
            ) {
                let s = NormalizationScales { time_s: 2.0, energy_j: 0.5, price: 7.0, quality_db: 40.0 };
                let scaled = NormalizationScales {
                    time_s: s.time_s * k,
                    energy_j: s.energy_j * k,
                    price: s.price * k,
                    quality_db: s.quality_db * k,
                };
                let argmin = |sc: &NormalizationScales| {
                    parts
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (i, scalar_cost(&raw(p[0], p[1], p[2], p[3]), &w, sc).unwrap()))
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap()
                };
                let (i, ci) = argmin(&s);
                let (j, cj) = argmin(&scaled);
                // Ties may swap under rounding; the cost ordering must not.
                prop_assert!(i == j || (ci * 1.0 / k - cj).abs() <= 1e-9 * ci.abs().max(1.0));
            }

            #[test]
            fn violated_set_matches_direct_checks(
                t in 0.0f64..20.0, r in 0.0f64..1.0, v in 0.0f64..60.0,
            ) {
                let k = Constraints { max_time_s: 10.0, max_failure: 0.3, min_quality_db: 30.0 };
                let got = check_constraints(t, r, v, &k);
                prop_assert_eq!(got.contains(&ConstraintKind::Time), t >= 10.0);
                prop_assert_eq!(got.contains(&ConstraintKind::Reliability), r >= 0.3);
                prop_assert_eq!(got.contains(&ConstraintKind::Quality), v < 30.0);
            }
        }
    }
}
