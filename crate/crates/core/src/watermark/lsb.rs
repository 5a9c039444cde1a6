use super::GrayImage;

pub(super) fn embed(img: &mut GrayImage, payload: &[bool], plane: u8) {
    let mask = 1u8 << plane;
    for (px, &bit) in img.pixels_mut().iter_mut().zip(payload) {
        *px = if bit { *px | mask } else { *px & !mask };
    }
}

pub(super) fn extract(img: &GrayImage, len: usize, plane: u8) -> Vec<bool> {
    img.pixels()[..len]
        .iter()
        .map(|px| (px >> plane) & 1 == 1)
        .collect()
}
