//! Single-level Haar codec: one bit per 2×2 block, written into the diagonal
//! detail (HH) coefficient by parity quantisation with step `strength`.

use super::GrayImage;

const MAX_CANDIDATES: i64 = 6;

pub(super) fn capacity(img: &GrayImage) -> usize {
    (img.width() / 2) * (img.height() / 2)
}

fn block_origin(img: &GrayImage, index: usize) -> (usize, usize) {
    let per_row = img.width() / 2;
    ((index % per_row) * 2, (index / per_row) * 2)
}

fn quad(img: &GrayImage, x0: usize, y0: usize) -> [f64; 4] {
    [
        img.get(x0, y0) as f64,
        img.get(x0 + 1, y0) as f64,
        img.get(x0, y0 + 1) as f64,
        img.get(x0 + 1, y0 + 1) as f64,
    ]
}

/// Orthonormal Haar diagonal detail of a 2×2 block `[a b; c d]`.
pub(crate) fn diagonal_detail([a, b, c, d]: [f64; 4]) -> f64 {
    (a - b - c + d) / 2.0
}

fn bit_of(detail: f64, step: f64) -> bool {
    ((detail / step).round() as i64).rem_euclid(2) == 1
}

pub(super) fn embed(img: &mut GrayImage, payload: &[bool], strength: f64) {
    for (index, &bit) in payload.iter().enumerate() {
        let (x0, y0) = block_origin(img, index);
        let original = quad(img, x0, y0);
        let detail = diagonal_detail(original);
        let level = (detail / strength).round() as i64;
        let parity = i64::from(bit);
        // Lattice points of the right parity, nearest first.
        let mut candidates: Vec<i64> = (-MAX_CANDIDATES..=MAX_CANDIDATES)
            .map(|k| level + k)
            .filter(|q| q.rem_euclid(2) == parity)
            .collect();
        candidates.sort_by(|a, b| {
            let da = (*a as f64 * strength - detail).abs();
            let db = (*b as f64 * strength - detail).abs();
            da.total_cmp(&db)
        });
        for q in candidates {
            let half = (q as f64 * strength - detail) / 2.0;
            let signs = [1.0, -1.0, -1.0, 1.0];
            let coords = [(x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)];
            for ((x, y), (v, s)) in coords.into_iter().zip(original.iter().zip(signs)) {
                img.set(x, y, (v + s * half).round().clamp(0.0, 255.0) as u8);
            }
            if bit_of(diagonal_detail(quad(img, x0, y0)), strength) == bit {
                break;
            }
        }
    }
}

pub(super) fn extract(img: &GrayImage, len: usize, strength: f64) -> Vec<bool> {
    (0..len)
        .map(|index| {
            let (x0, y0) = block_origin(img, index);
            bit_of(diagonal_detail(quad(img, x0, y0)), strength)
        })
        .collect()
}
