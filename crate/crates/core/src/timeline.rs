//! Upload → queue → compute → migrate → downlink schedule for one assignment.
//!
//! The UE has a single uplink, so uploads run back to back in task order.
//! Each satellite runs one task at a time in upload-completion order:
//!
//! ```text
//! comp_start(k) = max(comp_end(k-1 on same satellite), upload_end(k))
//! ```
//!
//! After computing, a result held by an invisible satellite hops along the
//! ring to the nearest visible one (`λ·D / V_migrate` seconds), then comes
//! down at `downlink_factor` times that satellite's uplink rate.

use crate::channel::LinkParams;
use crate::error::{Error, Result};
use crate::geometry::ConstellationConfig;
use crate::watermark::{AlgorithmKind, WatermarkAlgorithm};

/// Per-task image measurements, used when the codec runs inside episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskImage {
    pub seed: u64,
    /// Measured MSE of each codec on this task's image, indexed by
    /// [`AlgorithmKind::index`].
    pub mse: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub index: usize,
    pub size_bits: f64,
    pub image: Option<TaskImage>,
}

impl TaskSpec {
    pub fn new(index: usize, size_bits: f64) -> Self {
        Self {
            index,
            size_bits,
            image: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteServer {
    pub compute_speed_bps: f64,
    pub unit_price_per_byte: f64,
    pub algorithm: WatermarkAlgorithm,
    /// Calibrated mean MSE of `algorithm`.
    pub mse: f64,
}

impl SatelliteServer {
    pub fn kind(&self) -> AlgorithmKind {
        self.algorithm.kind()
    }
}

/// Everything the schedule depends on besides the tasks themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub constellation: ConstellationConfig,
    pub link: LinkParams,
    pub servers: Vec<SatelliteServer>,
    pub migrate_speed_bps: f64,
    /// Downlink rate as a multiple of the uplink rate.
    pub downlink_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskTrace {
    pub task: usize,
    pub assigned_sat: usize,
    pub return_sat: usize,
    pub migrate_hops: usize,
    pub upload_start: f64,
    pub upload_end: f64,
    pub comp_start: f64,
    pub comp_end: f64,
    pub migrate_end: f64,
    pub download_start: f64,
    pub download_end: f64,
    pub t_end: f64,
}

impl TaskTrace {
    pub fn upload_duration(&self) -> f64 {
        self.upload_end - self.upload_start
    }

    pub fn timestamps(&self) -> [f64; 8] {
        [
            self.upload_start,
            self.upload_end,
            self.comp_start,
            self.comp_end,
            self.migrate_end,
            self.download_start,
            self.download_end,
            self.t_end,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleResult {
    pub traces: Vec<TaskTrace>,
    /// Makespan measured from the start time.
    pub total_time: f64,
    pub transmission_energy: f64,
    /// Uplink bit-error rate of each task.
    pub bers: Vec<f64>,
}

impl Network {
    pub fn satellite_count(&self) -> usize {
        self.servers.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.constellation.validate()?;
        self.link.validate()?;
        let count = self.constellation.satellite_count();
        if self.servers.len() != count || self.link.uplink_bandwidth_hz.len() != count {
            return Err(Error::config(
                "satellites",
                format!(
                    "{} servers and {} bandwidths for {count} satellites",
                    self.servers.len(),
                    self.link.uplink_bandwidth_hz.len()
                ),
            ));
        }
        for (j, s) in self.servers.iter().enumerate() {
            if !(s.compute_speed_bps > 0.0) {
                return Err(Error::config(
                    format!("satellites[{j}].compute_speed_bps"),
                    "must be positive",
                ));
            }
            if !(s.unit_price_per_byte >= 0.0 && s.unit_price_per_byte.is_finite()) {
                return Err(Error::config(
                    format!("satellites[{j}].unit_price_per_byte"),
                    "must be non-negative",
                ));
            }
            if !(s.mse >= 0.0 && s.mse.is_finite()) {
                return Err(Error::config(format!("satellites[{j}].mse"), "must be non-negative"));
            }
            s.algorithm
                .validate()
                .map_err(|e| Error::config(format!("satellites[{j}].algorithm"), e.to_string()))?;
        }
        if !(self.migrate_speed_bps > 0.0) {
            return Err(Error::config("link.migrate_speed_bps", "must be positive"));
        }
        if !(self.downlink_factor > 0.0 && self.downlink_factor.is_finite()) {
            return Err(Error::config("link.downlink_factor", "must be positive"));
        }
        Ok(())
    }

    /// Uplink rate and bit-error rate to `sat` at time `t`.
    pub fn uplink(&self, sat: usize, t: f64) -> Result<crate::channel::LinkQuality> {
        let pose = self.constellation.pose_at(sat, t)?;
        self.link.link_quality(pose.distance_km, sat)
    }

    /// Schedules `tasks[i]` on satellite `assignment[i]`, starting at `t0`.
    pub fn simulate(&self, assignment: &[usize], tasks: &[TaskSpec], t0: f64) -> Result<ScheduleResult> {
        if assignment.len() != tasks.len() {
            return Err(Error::Shape(format!(
                "{} assignments for {} tasks",
                assignment.len(),
                tasks.len()
            )));
        }
        let count = self.satellite_count();
        let mut sat_free = vec![f64::NEG_INFINITY; count];
        let mut uplink_free = t0;
        let mut traces = Vec::with_capacity(tasks.len());
        let mut bers = Vec::with_capacity(tasks.len());

        for (task, &sat) in tasks.iter().zip(assignment) {
            if sat >= count {
                return Err(Error::IndexOutOfRange {
                    what: "satellites",
                    index: sat,
                    len: count,
                });
            }
            let size = task.size_bits;
            let up = self.uplink(sat, uplink_free)?;
            let upload_start = uplink_free;
            let upload_end = upload_start + size / up.rate_bps;
            uplink_free = upload_end;

            let comp_start = sat_free[sat].max(upload_end);
            let comp_end = comp_start + size / self.servers[sat].compute_speed_bps;
            sat_free[sat] = comp_end;

            let hop = self.constellation.hops_to_visible(sat, comp_end)?;
            let migrate_end = if hop.hops == 0 {
                comp_end
            } else {
                comp_end + hop.hops as f64 * size / self.migrate_speed_bps
            };
            let down = self.uplink(hop.target, migrate_end)?;
            let download_end = migrate_end + size / (self.downlink_factor * down.rate_bps);

            bers.push(up.ber);
            traces.push(TaskTrace {
                task: task.index,
                assigned_sat: sat,
                return_sat: hop.target,
                migrate_hops: hop.hops,
                upload_start,
                upload_end,
                comp_start,
                comp_end,
                migrate_end,
                download_start: migrate_end,
                download_end,
                t_end: download_end,
            });
        }

        let total_time = traces.iter().map(|t| t.t_end - t0).fold(0.0, f64::max);
        let transmission_energy = transmission_energy(self.link.tx_power_w, &traces);
        Ok(ScheduleResult {
            traces,
            total_time,
            transmission_energy,
            bers,
        })
    }
}

/// UE transmit energy: power times total upload time.
pub fn transmission_energy(tx_power_w: f64, traces: &[TaskTrace]) -> f64 {
    tx_power_w * traces.iter().map(TaskTrace::upload_duration).sum::<f64>()
}

/// Writes one CSV row per task with every timestamp.
pub fn write_trace_csv<W: std::io::Write>(traces: &[TaskTrace], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "task",
        "assigned_sat",
        "return_sat",
        "migrate_hops",
        "upload_start_s",
        "upload_end_s",
        "comp_start_s",
        "comp_end_s",
        "migrate_end_s",
        "download_start_s",
        "download_end_s",
        "t_end_s",
    ])?;
    for t in traces {
        let mut row = vec![
            t.task.to_string(),
            t.assigned_sat.to_string(),
            t.return_sat.to_string(),
            t.migrate_hops.to_string(),
        ];
        row.extend(t.timestamps().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::geometry::ConstellationConfig;

    /// Frozen ring where every link has rate `rate` bit/s (all satellites at
    /// the zenith, unit bandwidth) and every server computes at `speed`.
    pub fn unit_network(count: usize, rate: f64, speed: f64) -> Network {
        // Zenith range H = 1 km = 1000 m; choose gain so SNR = 2^rate - 1.
        let snr = 2f64.powf(rate) - 1.0;
        Network {
            constellation: ConstellationConfig {
                earth_radius_km: 6371.0,
                altitude_km: 1.0,
                angular_velocity: 0.0,
                visibility_half_angle: std::f64::consts::FRAC_PI_2,
                phase_offsets: vec![0.0; count],
            },
            link: LinkParams {
                reference_gain: snr * 1000.0,
                noise_power_w: 1.0,
                tx_power_w: 1.0,
                uplink_bandwidth_hz: vec![1.0; count],
                path_loss_exponent: 1.0,
            },
            servers: vec![
                SatelliteServer {
                    compute_speed_bps: speed,
                    unit_price_per_byte: 0.0,
                    algorithm: WatermarkAlgorithm::Lsb { plane: 0 },
                    mse: 1.0,
                };
                count
            ],
            migrate_speed_bps: 1.0,
            downlink_factor: 10.0,
        }
    }

    pub fn tasks(sizes: &[f64]) -> Vec<TaskSpec> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, &d)| TaskSpec::new(i, d))
            .collect()
    }
}
