//! UE-satellite link model: gain, SNR, Shannon rate, BPSK bit-error rate,
//! and the all-or-nothing reliability of a batch of uploads.
//!
//! The gain law is `h = β₀ / s^n` with `s` in metres. The default exponent is
//! 1, not the textbook free-space 2; set `path_loss_exponent = 2` for the
//! conventional inverse-square law.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    /// Power gain at a reference distance of one metre.
    pub reference_gain: f64,
    pub noise_power_w: f64,
    pub tx_power_w: f64,
    /// Uplink bandwidth of each satellite, Hz.
    pub uplink_bandwidth_hz: Vec<f64>,
    pub path_loss_exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuality {
    pub gain: f64,
    /// Linear SNR.
    pub snr: f64,
    pub rate_bps: f64,
    pub ber: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reliability {
    pub success: f64,
    pub failure: f64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.reference_gain) {
            return Err(Error::config("link.reference_gain", "must be positive"));
        }
        if !positive(self.noise_power_w) {
            return Err(Error::config("link.noise_power_w", "must be positive"));
        }
        if !positive(self.tx_power_w) {
            return Err(Error::config("link.tx_power_w", "must be positive"));
        }
        if !positive(self.path_loss_exponent) {
            return Err(Error::config("link.path_loss_exponent", "must be positive"));
        }
        if let Some(j) = self.uplink_bandwidth_hz.iter().position(|&b| !positive(b)) {
            return Err(Error::config(
                format!("satellites[{j}].bandwidth_hz"),
                "must be positive",
            ));
        }
        Ok(())
    }

    pub fn link_quality(&self, distance_km: f64, sat_index: usize) -> Result<LinkQuality> {
        let bandwidth = *self
            .uplink_bandwidth_hz
            .get(sat_index)
            .ok_or(Error::IndexOutOfRange {
                what: "uplink bandwidths",
                index: sat_index,
                len: self.uplink_bandwidth_hz.len(),
            })?;
        if !(distance_km > 0.0) {
            return Err(Error::Domain(format!(
                "distance must be positive, got {distance_km} km"
            )));
        }
        let gain = self.reference_gain / (distance_km * 1e3).powf(self.path_loss_exponent);
        let snr = self.tx_power_w * gain / self.noise_power_w;
        Ok(LinkQuality {
            gain,
            snr,
            rate_bps: shannon_rate(bandwidth, snr),
            ber: bpsk_ber(snr),
        })
    }
}

pub fn shannon_rate(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

/// BPSK bit-error probability over an AWGN link.
pub fn bpsk_ber(snr: f64) -> f64 {
    (0.5 * erfc(snr.max(0.0).sqrt())).clamp(0.0, 0.5)
}

/// Probability that every bit of every upload arrives intact.
///
/// Works in the log domain: `ln r = Σ Dᵢ·ln(1 − bᵢ)`.
pub fn batch_reliability(bers: &[f64], sizes_bits: &[f64]) -> Result<Reliability> {
    if bers.len() != sizes_bits.len() {
        return Err(Error::Shape(format!(
            "{} bit-error rates for {} task sizes",
            bers.len(),
            sizes_bits.len()
        )));
    }
    let mut log_success = 0.0;
    for (&ber, &size) in bers.iter().zip(sizes_bits) {
        if !(0.0..=1.0).contains(&ber) {
            return Err(Error::Domain(format!("bit-error rate {ber} outside [0, 1]")));
        }
        if !(size >= 0.0) {
            return Err(Error::Domain(format!("task size {size} is negative")));
        }
        if size == 0.0 {
            continue;
        }
        if ber == 1.0 {
            return Ok(Reliability {
                success: 0.0,
                failure: 1.0,
            });
        }
        log_success += size * (-ber).ln_1p();
    }
    let success = log_success.exp();
    Ok(Reliability {
        success,
        failure: -log_success.exp_m1(),
    })
}

/// Complementary error function, relative error below 1e-13 on the real line.
///
/// A positive-term series handles `|x| < 2.5`; a Lentz continued fraction
/// handles the tail.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        1.0 - erf_series(x)
    } else if x > 27.3 {
        0.0
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > sum * 1e-17 {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d.abs() < TINY { TINY } else { d };
        c = x + a / c;
        c = if c.abs() < TINY { TINY } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LinkParams {
        LinkParams {
            reference_gain: 1.0,
            noise_power_w: 1.0,
            tx_power_w: 1.0,
            uplink_bandwidth_hz: vec![1.0, 2.0],
            path_loss_exponent: 1.0,
        }
    }

    #[test]
    fn erfc_matches_extended_precision_reference() {
        // Reference values from a 40-digit evaluation.
        let cases = [
            (0.1, 0.887_537_083_981_715_101_6),
            (0.5, 0.479_500_122_186_953_462_3),
            (1.0, 0.157_299_207_050_285_130_7),
            (2.0, 0.004_677_734_981_047_265_838),
            (3.0, 2.209_049_699_858_544_137e-5),
            (5.0, 1.537_459_794_428_034_850e-12),
        ];
        for (x, want) in cases {
            let got = erfc(x);
            assert!(((got - want) / want).abs() < 1e-13, "erfc({x}) = {got}");
        }
        assert!((erfc(-1.0) - (2.0 - 0.157_299_207_050_285_130_7)).abs() < 1e-15);
        assert_eq!(erfc(0.0), 1.0);
    }

    #[test]
    fn erfc_agrees_with_statrs_everywhere() {
        for i in 0..=600 {
            let x = i as f64 * 0.01;
            let want = statrs::function::erf::erfc(x);
            let got = erfc(x);
            // statrs is only good to ~1e-10 near x = 0.5.
            assert!(((got - want) / want).abs() < 1e-9, "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn zero_snr_gives_coin_flip() {
        assert_eq!(bpsk_ber(0.0), 0.5);
    }

    #[test]
    fn unit_snr_unit_bandwidth_is_one_bit() {
        assert!((shannon_rate(1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn snr_four() {
        // erfc(2)/2
        let want = 0.002_338_867_490_523_632_919;
        assert!(((bpsk_ber(4.0) - want) / want).abs() < 1e-12);
    }

    #[test]
    fn link_quality_formulae() {
        let mut p = params();
        p.reference_gain = 2000.0; // h = 2000 / 1000 m = 2 at 1 km
        let q = p.link_quality(1.0, 1).unwrap();
        assert!((q.gain - 2.0).abs() < 1e-15);
        assert!((q.snr - 2.0).abs() < 1e-15);
        assert!((q.rate_bps - 2.0 * 3f64.log2()).abs() < 1e-12);
        p.path_loss_exponent = 2.0;
        let q2 = p.link_quality(1.0, 1).unwrap();
        assert!((q2.gain - 0.002).abs() < 1e-15);
    }

    #[test]
    fn link_quality_rejects_bad_inputs() {
        let p = params();
        assert!(matches!(p.link_quality(0.0, 0), Err(Error::Domain(_))));
        assert!(matches!(p.link_quality(-1.0, 0), Err(Error::Domain(_))));
        assert!(matches!(
            p.link_quality(1.0, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn reliability_edge_cases() {
        let r = batch_reliability(&[0.0, 0.0], &[100.0, 5.0]).unwrap();
        assert_eq!((r.success, r.failure), (1.0, 0.0));
        let r = batch_reliability(&[0.5], &[2.0]).unwrap();
        assert!((r.success - 0.25).abs() < 1e-15);
        let r = batch_reliability(&[1.0], &[8.0]).unwrap();
        assert_eq!(r.success, 0.0);
        let r = batch_reliability(&[1.0], &[0.0]).unwrap();
        assert_eq!(r.success, 1.0);
        assert!(batch_reliability(&[0.1], &[]).is_err());
    }

    #[test]
    fn tiny_failure_is_not_lost() {
        let r = batch_reliability(&[1e-15], &[1000.0]).unwrap();
        assert!((r.failure - 1e-12).abs() < 1e-24);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ber_monotone_in_snr(a in 0.0f64..200.0, b in 0.0f64..200.0) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(bpsk_ber(hi) <= bpsk_ber(lo));
                prop_assert!(shannon_rate(3.0, hi) >= shannon_rate(3.0, lo));
            }

            #[test]
            fn gain_decreases_with_distance(d in 1.0f64..20000.0, extra in 1e-3f64..1000.0) {
                let p = LinkParams {
                    reference_gain: 0.1,
                    noise_power_w: 1e-9,
                    tx_power_w: 1.0,
                    uplink_bandwidth_hz: vec![1e6],
                    path_loss_exponent: 1.0,
                };
                let near = p.link_quality(d, 0).unwrap();
                let far = p.link_quality(d + extra, 0).unwrap();
                prop_assert!(far.gain < near.gain);
                prop_assert!((0.0..=0.5).contains(&far.ber));
            }

            #[test]
            fn adding_a_task_never_helps(
                bers in proptest::collection::vec(0.0f64..0.01, 1..6),
                extra_ber in 0.0f64..0.01,
                extra_size in 0.0f64..1e4,
            ) {
                let sizes: Vec<f64> = bers.iter().map(|_| 1000.0).collect();
                let base = batch_reliability(&bers, &sizes).unwrap();
                let mut b2 = bers.clone();
                let mut s2 = sizes.clone();
                b2.push(extra_ber);
                s2.push(extra_size);
                let more = batch_reliability(&b2, &s2).unwrap();
                prop_assert!(more.success <= base.success);
                prop_assert!((0.0..=1.0).contains(&more.success));
            }
        }
    }
}
