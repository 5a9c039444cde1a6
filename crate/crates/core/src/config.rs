//! TOML scenario configuration: schema, defaults, validation and the
//! mapping onto a [`Scenario`].
//!
//! Every section and field is optional; missing values take the defaults
//! below and unknown keys are rejected. [`ScenarioConfig::resolved`] expands
//! generated satellites into explicit profiles and fills derived scales, so
//! the echoed file reloads to the identical scenario.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::LinkParams;
use crate::economics::{Constraints, NormalizationScales, ObjectiveWeights};
use crate::error::{Error, Result};
use crate::geometry::ConstellationConfig;
use crate::ppo::PpoHyperparams;
use crate::scenario::{PerTaskCodec, Scenario, TaskSizes};
use crate::seeds::stream;
use crate::timeline::{Network, SatelliteServer};
use crate::watermark::{
    AlgorithmKind, WatermarkAlgorithm, CALIBRATED_MSE_DCT, CALIBRATED_MSE_DWT, CALIBRATED_MSE_LSB,
    DEFAULT_DCT_STRENGTH, DEFAULT_DWT_STRENGTH, DEFAULT_LSB_PLANE, PEAK_8BIT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Root seed; every random component uses a named sub-stream of it.
    pub seed: u64,
    pub output_dir: String,
    pub constellation: ConstellationSection,
    pub link: LinkSection,
    pub satellites: SatellitesSection,
    pub watermark: WatermarkSection,
    pub tasks: TasksSection,
    pub objective: ObjectiveSection,
    pub constraints: ConstraintsSection,
    pub ppo: PpoHyperparams,
    pub evaluation: EvaluationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstellationSection {
    pub earth_radius_km: f64,
    pub altitude_km: f64,
    pub satellite_count: usize,
    /// Orbital period; 0 freezes the ring.
    pub period_s: f64,
    pub visibility_half_angle_deg: f64,
    /// Phase of satellite 0 for an evenly spaced ring.
    pub base_phase_deg: f64,
    /// Explicit phases, one per satellite, overriding even spacing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_offsets_deg: Option<Vec<f64>>,
    /// Simulation time at which every episode starts.
    pub start_time_s: f64,
}

impl Default for ConstellationSection {
    fn default() -> Self {
        Self {
            earth_radius_km: 6371.0,
            altitude_km: 780.0,
            satellite_count: 15,
            period_s: 6000.0,
            visibility_half_angle_deg: 90.0,
            base_phase_deg: 0.0,
            phase_offsets_deg: None,
            start_time_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    /// Channel power gain at 1 m.
    pub reference_gain: f64,
    pub noise_power_w: f64,
    pub tx_power_w: f64,
    pub path_loss_exponent: f64,
    /// Inter-satellite relay speed, bit/s.
    pub migrate_speed_bps: f64,
    /// Downlink rate as a multiple of the uplink rate.
    pub downlink_factor: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            reference_gain: 0.125,
            noise_power_w: 1e-9,
            tx_power_w: 2.0,
            path_loss_exponent: 1.0,
            migrate_speed_bps: 5e7,
            downlink_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteProfile {
    pub bandwidth_hz: f64,
    pub compute_speed_bps: f64,
    pub unit_price_per_byte: f64,
    pub algorithm: AlgorithmKind,
}

/// Random satellite parameters drawn from the "satellites" sub-stream.
/// Satellite `j` gets the same draw whatever the satellite count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSpec {
    pub bandwidth_hz: [f64; 2],
    pub compute_speed_bps: [f64; 2],
    pub unit_price_per_byte: [f64; 2],
    /// How strongly price follows compute speed, in `[0, 1]`.
    pub price_speed_correlation: f64,
    /// Codecs assigned uniformly at random.
    pub algorithms: Vec<AlgorithmKind>,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        Self {
            bandwidth_hz: [20e6, 50e6],
            compute_speed_bps: [10e6, 40e6],
            unit_price_per_byte: [1e-6, 5e-6],
            price_speed_correlation: 0.7,
            algorithms: AlgorithmKind::ALL.to_vec(),
        }
    }
}

/// Either explicit profiles (cycled when there are fewer than satellites)
/// or a generator. An absent section means the default generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatellitesSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<SatelliteProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSpec>,
}

impl Default for SatellitesSection {
    fn default() -> Self {
        Self {
            profiles: Vec::new(),
            generate: Some(GenerateSpec::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MseTable {
    pub lsb: f64,
    pub dct: f64,
    pub dwt: f64,
}

impl Default for MseTable {
    fn default() -> Self {
        Self {
            lsb: CALIBRATED_MSE_LSB,
            dct: CALIBRATED_MSE_DCT,
            dwt: CALIBRATED_MSE_DWT,
        }
    }
}

impl MseTable {
    pub fn get(&self, kind: AlgorithmKind) -> f64 {
        match kind {
            AlgorithmKind::Lsb => self.lsb,
            AlgorithmKind::Dct => self.dct,
            AlgorithmKind::Dwt => self.dwt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WatermarkSection {
    pub peak: f64,
    pub lsb_plane: u8,
    pub dct_strength: f64,
    pub dwt_strength: f64,
    /// Mean MSE per codec, used unless `per_task_codec` is set.
    pub mse: MseTable,
    /// Embed into a synthetic image per task and use its measured MSE.
    pub per_task_codec: bool,
    pub codec_image_side: usize,
}

impl Default for WatermarkSection {
    fn default() -> Self {
        Self {
            peak: PEAK_8BIT,
            lsb_plane: DEFAULT_LSB_PLANE,
            dct_strength: DEFAULT_DCT_STRENGTH,
            dwt_strength: DEFAULT_DWT_STRENGTH,
            mse: MseTable::default(),
            per_task_codec: false,
            codec_image_side: 64,
        }
    }
}

impl WatermarkSection {
    pub fn algorithm(&self, kind: AlgorithmKind) -> WatermarkAlgorithm {
        match kind {
            AlgorithmKind::Lsb => WatermarkAlgorithm::Lsb { plane: self.lsb_plane },
            AlgorithmKind::Dct => WatermarkAlgorithm::Dct {
                strength: self.dct_strength,
            },
            AlgorithmKind::Dwt => WatermarkAlgorithm::Dwt {
                strength: self.dwt_strength,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TasksSection {
    pub count: usize,
    pub min_bits: f64,
    pub max_bits: f64,
    /// Same sizes every episode; overrides the uniform range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_sizes_bits: Option<Vec<f64>>,
}

impl Default for TasksSection {
    fn default() -> Self {
        Self {
            count: 20,
            min_bits: 2e6,
            max_bits: 8e6,
            fixed_sizes_bits: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub time: f64,
    pub energy: f64,
    pub price: f64,
    pub quality: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self {
            time: 0.35,
            energy: 0.15,
            price: 0.3,
            quality: 0.2,
        }
    }
}

/// Normalisation scales; time and quality default to the constraint bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_s: Option<f64>,
    pub energy_j: f64,
    pub price: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_db: Option<f64>,
}

impl Default for ScalesSection {
    fn default() -> Self {
        Self {
            time_s: None,
            energy_j: 1.0,
            price: 50.0,
            quality_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveSection {
    pub weights: WeightsSection,
    /// Cost added per violated constraint at episode end.
    pub penalty: f64,
    /// End episodes once the reliability bound is already exceeded.
    pub early_abort: bool,
    pub scales: ScalesSection,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Self {
            weights: WeightsSection::default(),
            penalty: 5.0,
            early_abort: true,
            scales: ScalesSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintsSection {
    pub max_time_s: f64,
    pub max_failure: f64,
    pub min_quality_db: f64,
}

impl Default for ConstraintsSection {
    fn default() -> Self {
        Self {
            max_time_s: 4.0,
            max_failure: 0.05,
            min_quality_db: 840.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    /// Held-out task sets every policy is scored on.
    pub episodes: usize,
    /// K for the best-of-K random baseline.
    pub random_trials: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            episodes: 20,
            random_trials: 1000,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: "runs".into(),
            constellation: ConstellationSection::default(),
            link: LinkSection::default(),
            satellites: SatellitesSection::default(),
            watermark: WatermarkSection::default(),
            tasks: TasksSection::default(),
            objective: ObjectiveSection::default(),
            constraints: ConstraintsSection::default(),
            ppo: PpoHyperparams::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

fn parse_error(message: impl Into<String>) -> Error {
    Error::Format {
        what: "config",
        message: message.into(),
    }
}

fn check_range(field: &str, range: [f64; 2], allow_zero: bool) -> Result<()> {
    let [lo, hi] = range;
    let low_ok = if allow_zero { lo >= 0.0 } else { lo > 0.0 };
    if !(low_ok && lo <= hi && hi.is_finite()) {
        return Err(Error::config(field, format!("need 0 {} min <= max, got [{lo}, {hi}]", if allow_zero { "<=" } else { "<" })));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| parse_error(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| parse_error(e.to_string()))
    }

    /// Checks every field by building the scenario.
    pub fn validate(&self) -> Result<()> {
        let c = &self.constellation;
        if !(c.period_s >= 0.0 && c.period_s.is_finite()) {
            return Err(Error::config("constellation.period_s", "must be non-negative (0 freezes the ring)"));
        }
        if !(c.visibility_half_angle_deg > 0.0 && c.visibility_half_angle_deg <= 180.0) {
            return Err(Error::config(
                "constellation.visibility_half_angle_deg",
                "must lie in (0, 180]",
            ));
        }
        let s = &self.satellites;
        match (&s.generate, s.profiles.is_empty()) {
            (Some(_), false) => {
                return Err(Error::config("satellites", "give either profiles or generate, not both"))
            }
            (None, true) => return Err(Error::config("satellites", "give profiles or generate")),
            _ => {}
        }
        if let Some(g) = &s.generate {
            check_range("satellites.generate.bandwidth_hz", g.bandwidth_hz, false)?;
            check_range("satellites.generate.compute_speed_bps", g.compute_speed_bps, false)?;
            check_range("satellites.generate.unit_price_per_byte", g.unit_price_per_byte, true)?;
            if !(0.0..=1.0).contains(&g.price_speed_correlation) {
                return Err(Error::config(
                    "satellites.generate.price_speed_correlation",
                    "must lie in [0, 1]",
                ));
            }
            if g.algorithms.is_empty() {
                return Err(Error::config("satellites.generate.algorithms", "must not be empty"));
            }
        }
        let w = &self.watermark;
        for kind in AlgorithmKind::ALL {
            let mse = w.mse.get(kind);
            if !(mse > 0.0 && mse.is_finite()) {
                return Err(Error::config(format!("watermark.mse.{kind}"), "must be positive"));
            }
            w.algorithm(kind)
                .validate()
                .map_err(|e| Error::config(format!("watermark.{kind}"), e.to_string()))?;
        }
        if w.per_task_codec && w.codec_image_side < 8 {
            return Err(Error::config("watermark.codec_image_side", "must be at least 8"));
        }
        if self.evaluation.random_trials == 0 {
            return Err(Error::config("evaluation.random_trials", "must be at least 1"));
        }
        self.ppo.validate()?;
        self.build().map(|_| ())
    }

    /// Satellite profiles after generation and cycling.
    pub fn satellite_profiles(&self) -> Vec<SatelliteProfile> {
        let count = self.constellation.satellite_count;
        match &self.satellites.generate {
            Some(g) => {
                let mut rng = stream(self.seed, "satellites");
                (0..count)
                    .map(|_| {
                        let speed_frac: f64 = rng.random();
                        let noise: f64 = rng.random();
                        let bw_frac: f64 = rng.random();
                        let alg = g.algorithms[rng.random_range(0..g.algorithms.len())];
                        let lerp = |r: [f64; 2], f: f64| r[0] + (r[1] - r[0]) * f;
                        let c = g.price_speed_correlation;
                        SatelliteProfile {
                            bandwidth_hz: lerp(g.bandwidth_hz, bw_frac),
                            compute_speed_bps: lerp(g.compute_speed_bps, speed_frac),
                            unit_price_per_byte: lerp(g.unit_price_per_byte, c * speed_frac + (1.0 - c) * noise),
                            algorithm: alg,
                        }
                    })
                    .collect()
            }
            None => (0..count)
                .map(|j| self.satellites.profiles[j % self.satellites.profiles.len()])
                .collect(),
        }
    }

    pub fn scales(&self) -> NormalizationScales {
        let s = &self.objective.scales;
        NormalizationScales {
            time_s: s.time_s.unwrap_or(self.constraints.max_time_s),
            energy_j: s.energy_j,
            price: s.price,
            quality_db: s.quality_db.unwrap_or(self.constraints.min_quality_db),
        }
    }

    /// Maps the config onto a validated scenario.
    pub fn build(&self) -> Result<Scenario> {
        let c = &self.constellation;
        let angular_velocity = if c.period_s > 0.0 { 2.0 * PI / c.period_s } else { 0.0 };
        let half_angle = c.visibility_half_angle_deg.to_radians();
        let constellation = match &c.phase_offsets_deg {
            Some(phases) => {
                if phases.len() != c.satellite_count {
                    return Err(Error::config(
                        "constellation.phase_offsets_deg",
                        format!("{} phases for {} satellites", phases.len(), c.satellite_count),
                    ));
                }
                ConstellationConfig {
                    earth_radius_km: c.earth_radius_km,
                    altitude_km: c.altitude_km,
                    angular_velocity,
                    visibility_half_angle: half_angle,
                    phase_offsets: phases.iter().map(|d| d.to_radians()).collect(),
                }
            }
            None => ConstellationConfig::uniform(
                c.earth_radius_km,
                c.altitude_km,
                c.satellite_count,
                angular_velocity,
                half_angle,
                c.base_phase_deg.to_radians(),
            )?,
        };
        let profiles = self.satellite_profiles();
        let w = &self.watermark;
        let servers = profiles
            .iter()
            .map(|p| SatelliteServer {
                compute_speed_bps: p.compute_speed_bps,
                unit_price_per_byte: p.unit_price_per_byte,
                algorithm: w.algorithm(p.algorithm),
                mse: w.mse.get(p.algorithm),
            })
            .collect();
        let l = &self.link;
        let network = Network {
            constellation,
            link: LinkParams {
                reference_gain: l.reference_gain,
                noise_power_w: l.noise_power_w,
                tx_power_w: l.tx_power_w,
                uplink_bandwidth_hz: profiles.iter().map(|p| p.bandwidth_hz).collect(),
                path_loss_exponent: l.path_loss_exponent,
            },
            servers,
            migrate_speed_bps: l.migrate_speed_bps,
            downlink_factor: l.downlink_factor,
        };
        let t = &self.tasks;
        let task_sizes = match &t.fixed_sizes_bits {
            Some(sizes) => TaskSizes::Fixed(sizes.clone()),
            None => TaskSizes::Uniform {
                min_bits: t.min_bits,
                max_bits: t.max_bits,
            },
        };
        let ow = &self.objective.weights;
        let scenario = Scenario {
            network,
            task_count: t.count,
            task_sizes,
            per_task_codec: w.per_task_codec.then(|| PerTaskCodec {
                image_side: w.codec_image_side,
                algorithms: AlgorithmKind::ALL.map(|k| w.algorithm(k)),
            }),
            weights: ObjectiveWeights {
                time: ow.time,
                energy: ow.energy,
                price: ow.price,
                quality: ow.quality,
            },
            constraints: Constraints {
                max_time_s: self.constraints.max_time_s,
                max_failure: self.constraints.max_failure,
                min_quality_db: self.constraints.min_quality_db,
            },
            scales: self.scales(),
            penalty: self.objective.penalty,
            peak: w.peak,
            start_time_s: c.start_time_s,
            early_abort: self.objective.early_abort,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Small enumerable scenario: four fixed-size tasks on a frozen
    /// three-satellite ring where only satellite 0 is visible.
    pub fn toy() -> Self {
        let profile = |bandwidth_hz, compute_speed_bps, unit_price_per_byte, algorithm| SatelliteProfile {
            bandwidth_hz,
            compute_speed_bps,
            unit_price_per_byte,
            algorithm,
        };
        Self {
            constellation: ConstellationSection {
                satellite_count: 3,
                period_s: 0.0,
                ..ConstellationSection::default()
            },
            satellites: SatellitesSection {
                profiles: vec![
                    profile(30e6, 20e6, 3e-6, AlgorithmKind::Dct),
                    profile(40e6, 40e6, 4e-6, AlgorithmKind::Lsb),
                    profile(20e6, 15e6, 1e-6, AlgorithmKind::Dwt),
                ],
                generate: None,
            },
            tasks: TasksSection {
                count: 4,
                fixed_sizes_bits: Some(vec![3e6, 5e6, 2e6, 6e6]),
                ..TasksSection::default()
            },
            objective: ObjectiveSection {
                scales: ScalesSection {
                    time_s: None,
                    energy_j: 0.5,
                    price: 10.0,
                    quality_db: None,
                },
                ..ObjectiveSection::default()
            },
            constraints: ConstraintsSection {
                max_time_s: 3.0,
                max_failure: 0.05,
                min_quality_db: 160.0,
            },
            ..Self::default()
        }
    }

    /// The config with generated satellites written out as profiles and
    /// derived scales filled in.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.satellites = SatellitesSection {
            profiles: self.satellite_profiles(),
            generate: None,
        };
        let scales = self.scales();
        out.objective.scales = ScalesSection {
            time_s: Some(scales.time_s),
            energy_j: scales.energy_j,
            price: scales.price,
            quality_db: Some(scales.quality_db),
        };
        out
    }
}
