//! Block-DCT codec: one bit per 8×8 block, carried by the sign of the
//! difference between two mid-band coefficients.

use std::sync::OnceLock;

use super::GrayImage;

const N: usize = 8;
/// Mid-band coefficient pair, (row, col) in the 8×8 DCT block.
const COEFF_A: (usize, usize) = (4, 1);
const COEFF_B: (usize, usize) = (3, 2);
const MAX_ATTEMPTS: usize = 8;

type Block = [[f64; N]; N];

fn basis() -> &'static Block {
    static BASIS: OnceLock<Block> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [[0.0; N]; N];
        for (k, row) in c.iter_mut().enumerate() {
            let scale = if k == 0 { (1.0 / N as f64).sqrt() } else { (2.0 / N as f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = scale
                    * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * N) as f64).cos();
            }
        }
        c
    })
}

/// Orthonormal 2-D DCT-II: `F = C X Cᵀ`.
pub(crate) fn forward(x: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; N]; N];
    for k in 0..N {
        for j in 0..N {
            tmp[k][j] = (0..N).map(|n| c[k][n] * x[n][j]).sum();
        }
    }
    let mut out = [[0.0; N]; N];
    for k in 0..N {
        for l in 0..N {
            out[k][l] = (0..N).map(|j| tmp[k][j] * c[l][j]).sum();
        }
    }
    out
}

/// Inverse of [`forward`]: `X = Cᵀ F C`.
pub(crate) fn inverse(f: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; N]; N];
    for n in 0..N {
        for l in 0..N {
            tmp[n][l] = (0..N).map(|k| c[k][n] * f[k][l]).sum();
        }
    }
    let mut out = [[0.0; N]; N];
    for n in 0..N {
        for m in 0..N {
            out[n][m] = (0..N).map(|l| tmp[n][l] * c[l][m]).sum();
        }
    }
    out
}

pub(super) fn capacity(img: &GrayImage) -> usize {
    (img.width() / N) * (img.height() / N)
}

fn block_origin(img: &GrayImage, index: usize) -> (usize, usize) {
    let per_row = img.width() / N;
    ((index % per_row) * N, (index / per_row) * N)
}

fn read_block(img: &GrayImage, x0: usize, y0: usize) -> Block {
    let mut b = [[0.0; N]; N];
    for (y, row) in b.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            *v = img.get(x0 + x, y0 + y) as f64;
        }
    }
    b
}

fn write_block(img: &mut GrayImage, x0: usize, y0: usize, b: &Block) {
    for (y, row) in b.iter().enumerate() {
        for (x, v) in row.iter().enumerate() {
            img.set(x0 + x, y0 + y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
}

fn coefficient_gap(f: &Block) -> f64 {
    f[COEFF_A.0][COEFF_A.1] - f[COEFF_B.0][COEFF_B.1]
}

pub(super) fn embed(img: &mut GrayImage, payload: &[bool], strength: f64) {
    for (index, &bit) in payload.iter().enumerate() {
        let (x0, y0) = block_origin(img, index);
        let original = read_block(img, x0, y0);
        let coeffs = forward(&original);
        let sign = if bit { 1.0 } else { -1.0 };
        if sign * coefficient_gap(&coeffs) >= strength {
            continue;
        }
        // Rounding and clamping can eat the margin; widen it until the bit reads back.
        let mut margin = strength;
        for _ in 0..MAX_ATTEMPTS {
            let mut f = coeffs;
            let shift = (sign * margin - coefficient_gap(&f)) / 2.0;
            f[COEFF_A.0][COEFF_A.1] += shift;
            f[COEFF_B.0][COEFF_B.1] -= shift;
            write_block(img, x0, y0, &inverse(&f));
            if read_bit(img, x0, y0) == bit {
                break;
            }
            margin *= 2.0;
        }
    }
}

fn read_bit(img: &GrayImage, x0: usize, y0: usize) -> bool {
    coefficient_gap(&forward(&read_block(img, x0, y0))) > 0.0
}

pub(super) fn extract(img: &GrayImage, len: usize) -> Vec<bool> {
    (0..len)
        .map(|index| {
            let (x0, y0) = block_origin(img, index);
            read_bit(img, x0, y0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_is_orthonormal() {
        let mut x = [[0.0; N]; N];
        for (i, row) in x.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = ((i * 31 + j * 17) % 256) as f64;
            }
        }
        let f = forward(&x);
        let energy_x: f64 = x.iter().flatten().map(|v| v * v).sum();
        let energy_f: f64 = f.iter().flatten().map(|v| v * v).sum();
        assert!((energy_x - energy_f).abs() < 1e-8 * energy_x);
        let back = inverse(&f);
        for (a, b) in x.iter().flatten().zip(back.iter().flatten()) {
            assert!((a - b).abs() < 1e-10);
        }
        // DC term of a constant block is 8·value.
        let flat = forward(&[[3.0; N]; N]);
        assert!((flat[0][0] - 24.0).abs() < 1e-12);
    }
}
