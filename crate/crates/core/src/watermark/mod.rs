//! Watermark codecs (LSB, block-DCT, Haar DWT) on 8-bit grayscale images,
//! plus the PSNR/MSE measurements that feed the simulator's quality model.

mod dct;
mod dwt;
mod image;
mod lsb;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::image::GrayImage;
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

pub const PEAK_8BIT: f64 = 255.0;
pub const DEFAULT_LSB_PLANE: u8 = 0;
pub const DEFAULT_DCT_STRENGTH: f64 = 12.0;
pub const DEFAULT_DWT_STRENGTH: f64 = 8.0;

/// Mean MSE of each codec at its default strength, full-capacity random
/// payload, on [`calibration_corpus`] with [`CALIBRATION_SEED`].
/// Regenerate with `orbmark calibrate --synthetic`.
pub const CALIBRATED_MSE_LSB: f64 = 0.500_976_562_5;
pub const CALIBRATED_MSE_DCT: f64 = 1.537_670_898_437_5;
pub const CALIBRATED_MSE_DWT: f64 = 5.481_591_796_875;
pub const CALIBRATION_SEED: u64 = 2024;
pub const CALIBRATION_IMAGES: usize = 10;
pub const CALIBRATION_SIDE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Lsb,
    Dct,
    Dwt,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 3] = [AlgorithmKind::Lsb, AlgorithmKind::Dct, AlgorithmKind::Dwt];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Lsb => "lsb",
            AlgorithmKind::Dct => "dct",
            AlgorithmKind::Dwt => "dwt",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lsb" => Ok(AlgorithmKind::Lsb),
            "dct" => Ok(AlgorithmKind::Dct),
            "dwt" => Ok(AlgorithmKind::Dwt),
            other => Err(Error::Argument(format!("unknown watermark algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WatermarkAlgorithm {
    /// Overwrites bit-plane `plane` (0..=3).
    Lsb { plane: u8 },
    Dct { strength: f64 },
    Dwt { strength: f64 },
}

impl WatermarkAlgorithm {
    pub fn default_for(kind: AlgorithmKind) -> Self {
        match kind {
            AlgorithmKind::Lsb => WatermarkAlgorithm::Lsb {
                plane: DEFAULT_LSB_PLANE,
            },
            AlgorithmKind::Dct => WatermarkAlgorithm::Dct {
                strength: DEFAULT_DCT_STRENGTH,
            },
            AlgorithmKind::Dwt => WatermarkAlgorithm::Dwt {
                strength: DEFAULT_DWT_STRENGTH,
            },
        }
    }

    pub fn kind(&self) -> AlgorithmKind {
        match self {
            WatermarkAlgorithm::Lsb { .. } => AlgorithmKind::Lsb,
            WatermarkAlgorithm::Dct { .. } => AlgorithmKind::Dct,
            WatermarkAlgorithm::Dwt { .. } => AlgorithmKind::Dwt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WatermarkAlgorithm::Lsb { plane } if plane > 3 => Err(Error::Argument(format!(
                "LSB bit-plane must be in 0..=3, got {plane}"
            ))),
            WatermarkAlgorithm::Dct { strength } | WatermarkAlgorithm::Dwt { strength }
                if !(strength > 0.0 && strength.is_finite()) =>
            {
                Err(Error::Argument(format!("strength must be positive, got {strength}")))
            }
            _ => Ok(()),
        }
    }

    /// Payload bits the codec can carry in `img`.
    pub fn capacity(&self, img: &GrayImage) -> usize {
        match self {
            WatermarkAlgorithm::Lsb { .. } => img.width() * img.height(),
            WatermarkAlgorithm::Dct { .. } => dct::capacity(img),
            WatermarkAlgorithm::Dwt { .. } => dwt::capacity(img),
        }
    }

    fn check_fits(&self, img: &GrayImage, bits: usize) -> Result<()> {
        self.validate()?;
        let capacity = self.capacity(img);
        if bits > capacity {
            return Err(Error::Capacity {
                requested: bits,
                capacity,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    /// `f64::INFINITY` when the images are identical.
    pub psnr_db: f64,
}

impl QualityReport {
    pub fn from_mse(mse: f64, peak: f64) -> Self {
        Self {
            mse,
            psnr_db: psnr_from_mse(mse, peak),
        }
    }

    pub fn is_lossless(&self) -> bool {
        self.mse == 0.0
    }
}

/// `10·log₁₀(peak²/mse)`, or `+∞` for a lossless result.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Embeds `payload` and returns the stego image.
pub fn embed(img: &GrayImage, payload: &[bool], alg: &WatermarkAlgorithm) -> Result<GrayImage> {
    alg.check_fits(img, payload.len())?;
    let mut out = img.clone();
    match *alg {
        WatermarkAlgorithm::Lsb { plane } => lsb::embed(&mut out, payload, plane),
        WatermarkAlgorithm::Dct { strength } => dct::embed(&mut out, payload, strength),
        WatermarkAlgorithm::Dwt { strength } => dwt::embed(&mut out, payload, strength),
    }
    Ok(out)
}

pub fn extract(img: &GrayImage, alg: &WatermarkAlgorithm, payload_len: usize) -> Result<Vec<bool>> {
    alg.check_fits(img, payload_len)?;
    Ok(match *alg {
        WatermarkAlgorithm::Lsb { plane } => lsb::extract(img, payload_len, plane),
        WatermarkAlgorithm::Dct { .. } => dct::extract(img, payload_len),
        WatermarkAlgorithm::Dwt { strength } => dwt::extract(img, payload_len, strength),
    })
}

pub fn psnr(original: &GrayImage, stego: &GrayImage, peak: f64) -> Result<QualityReport> {
    if original.width() != stego.width() || original.height() != stego.height() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            original.width(),
            original.height(),
            stego.width(),
            stego.height()
        )));
    }
    let n = original.pixels().len();
    if n == 0 {
        return Ok(QualityReport::from_mse(0.0, peak));
    }
    let sum: f64 = original
        .pixels()
        .iter()
        .zip(stego.pixels())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(QualityReport::from_mse(sum / n as f64, peak))
}

/// How calibration payloads are generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PayloadPattern {
    /// Uniform random bits.
    Random,
    /// All ones.
    Ones,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadSpec {
    pub pattern: PayloadPattern,
    /// Fraction of the codec capacity filled, in `[0, 1]`.
    pub density: f64,
}

impl Default for PayloadSpec {
    fn default() -> Self {
        Self {
            pattern: PayloadPattern::Random,
            density: 1.0,
        }
    }
}

impl PayloadSpec {
    pub fn generate(&self, capacity: usize, seed: u64) -> Vec<bool> {
        let len = ((capacity as f64) * self.density.clamp(0.0, 1.0)).floor() as usize;
        match self.pattern {
            PayloadPattern::Ones => vec![true; len],
            PayloadPattern::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..len).map(|_| rng.random::<bool>()).collect()
            }
        }
    }
}

/// Mean embed-then-measure MSE of `alg` over `corpus`.
///
/// Image `i` gets the payload generated from `derive_seed(seed, i)`.
pub fn calibrate_mse(
    corpus: &[GrayImage],
    alg: &WatermarkAlgorithm,
    payload: &PayloadSpec,
    seed: u64,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Argument("calibration corpus is empty".into()));
    }
    let mut total = 0.0;
    for (i, img) in corpus.iter().enumerate() {
        total += image_mse(img, alg, payload, derive_seed(seed, &format!("image-{i}")))?;
    }
    Ok(total / corpus.len() as f64)
}

/// MSE of a single embed at the given payload spec.
pub fn image_mse(
    img: &GrayImage,
    alg: &WatermarkAlgorithm,
    payload: &PayloadSpec,
    seed: u64,
) -> Result<f64> {
    let bits = payload.generate(alg.capacity(img), seed);
    let stego = embed(img, &bits, alg)?;
    Ok(psnr(img, &stego, PEAK_8BIT)?.mse)
}

/// Deterministic smooth-plus-texture test image: a gradient, a few random
/// sinusoids, a bright disc, and mild noise.
pub fn synthetic_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: f64 = rng.random_range(40.0..200.0);
    let gx: f64 = rng.random_range(-60.0..60.0);
    let gy: f64 = rng.random_range(-60.0..60.0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(5.0..30.0),
                rng.random_range(0.02..0.4),
                rng.random_range(0.02..0.4),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let (cx, cy) = (rng.random_range(0.0..width as f64), rng.random_range(0.0..height as f64));
    let radius = rng.random_range(0.1..0.35) * width.min(height) as f64;
    let disc: f64 = rng.random_range(-50.0..50.0);
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let u = xf / width.max(1) as f64 - 0.5;
            let v = yf / height.max(1) as f64 - 0.5;
            let mut value = base + gx * u + gy * v;
            for &(amp, fx, fy, phase) in &waves {
                value += amp * (fx * xf + fy * yf + phase).sin();
            }
            if (xf - cx).powi(2) + (yf - cy).powi(2) < radius * radius {
                value += disc;
            }
            value += rng.random_range(-6.0..6.0);
            pixels.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(width, height, pixels).expect("dimensions match by construction")
}

pub fn synthetic_corpus(count: usize, width: usize, height: usize, seed: u64) -> Vec<GrayImage> {
    (0..count)
        .map(|i| synthetic_image(width, height, derive_seed(seed, &format!("corpus-{i}"))))
        .collect()
}

/// The corpus the default MSE constants were calibrated on.
pub fn calibration_corpus() -> Vec<GrayImage> {
    synthetic_corpus(
        CALIBRATION_IMAGES,
        CALIBRATION_SIDE,
        CALIBRATION_SIDE,
        CALIBRATION_SEED,
    )
}

pub fn calibrated_mse(kind: AlgorithmKind) -> f64 {
    match kind {
        AlgorithmKind::Lsb => CALIBRATED_MSE_LSB,
        AlgorithmKind::Dct => CALIBRATED_MSE_DCT,
        AlgorithmKind::Dwt => CALIBRATED_MSE_DWT,
    }
}

/// Serialises an algorithm → mean-MSE table as TOML.
pub fn mse_table_toml(rows: &[(AlgorithmKind, f64)]) -> String {
    let mut out = String::from("[mse]\n");
    for (kind, mse) in rows {
        out.push_str(&format!("{} = {:?}\n", kind.name(), mse));
    }
    out
}
