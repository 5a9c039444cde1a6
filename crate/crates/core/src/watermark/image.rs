use std::io::{Read, Write};

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width * height != pixels.len() {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Reads a binary (P5) portable graymap with maxval 255.
    pub fn read_pgm<R: Read>(mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let mut pos = 0;
        let mut fields = [0usize; 3];
        let magic = next_token(&bytes, &mut pos).ok_or_else(|| pgm_error("missing magic"))?;
        if magic != b"P5" {
            return Err(pgm_error("expected P5 magic"));
        }
        for (slot, name) in fields.iter_mut().zip(["width", "height", "maxval"]) {
            let token =
                next_token(&bytes, &mut pos).ok_or_else(|| pgm_error(format!("missing {name}")))?;
            *slot = std::str::from_utf8(token)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| pgm_error(format!("bad {name}")))?;
        }
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(pgm_error(format!("only 8-bit maxval 255 is supported, got {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let raster = bytes
            .get(pos..pos + width * height)
            .ok_or_else(|| pgm_error("truncated raster"))?;
        Self::new(width, height, raster.to_vec())
    }

    pub fn write_pgm<W: Write>(&self, mut writer: W) -> Result<()> {
        write!(writer, "P5\n{} {}\n255\n", self.width, self.height)?;
        writer.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read_pgm(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pgm(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn pgm_error(message: impl Into<String>) -> Error {
    Error::Format {
        what: "PGM",
        message: message.into(),
    }
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_roundtrip_with_comment() {
        let img = GrayImage::new(3, 2, vec![0, 10, 20, 30, 255, 32]).unwrap();
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert_eq!(GrayImage::read_pgm(&buf[..]).unwrap(), img);

        let mut commented = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(img.pixels());
        assert_eq!(GrayImage::read_pgm(&commented[..]).unwrap(), img);
    }

    #[test]
    fn pgm_rejects_garbage() {
        assert!(GrayImage::read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(GrayImage::read_pgm(&b"P5\n2 2\n255\n\x00"[..]).is_err());
        assert!(GrayImage::read_pgm(&b"P5\n1 1\n65535\n\x00\x00"[..]).is_err());
    }

    #[test]
    fn shape_checked() {
        assert!(matches!(GrayImage::new(2, 2, vec![0; 3]), Err(Error::Shape(_))));
    }
}
