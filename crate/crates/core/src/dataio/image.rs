use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{check_len, Error, Result};

const RAW_MAGIC: &[u8; 8] = b"RAWF64LE";

/// How colour inputs are reduced to one channel; recorded in run metadata.
pub const COLOUR_CONVERSION: &str = "unweighted mean of R, G, B";

/// Grayscale image, `n1` rows by `n2` columns, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    pub n1: usize,
    pub n2: usize,
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(n1: usize, n2: usize, data: Vec<f64>) -> Result<Self> {
        check_len(n1 * n2, data.len())?;
        Ok(Self { n1, n2, data })
    }

    pub fn filled(n1: usize, n2: usize, value: f64) -> Self {
        Self {
            n1,
            n2,
            data: vec![value; n1 * n2],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n2 + c]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n1: self.n1,
            n2: self.n2,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Pnm,
    RawF64,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
        {
            Some(e) if matches!(e.as_str(), "pgm" | "ppm" | "pnm") => Ok(ImageFormat::Pnm),
            Some(e) if e == "f64" => Ok(ImageFormat::RawF64),
            _ => Err(Error::format(
                path,
                "unsupported image format (use .pgm, .ppm, .pnm or .f64)",
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SaveReport {
    /// Pixels outside `[0, 255]` that were clipped by an 8-bit container.
    pub clipped: usize,
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(RAW_MAGIC) {
        return parse_raw(path, &bytes);
    }
    match ImageFormat::from_path(path)? {
        ImageFormat::Pnm => parse_pnm(path, &bytes),
        ImageFormat::RawF64 => parse_raw(path, &bytes),
    }
}

pub fn save_image(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<SaveReport> {
    let path = path.as_ref();
    check_len(img.n1 * img.n2, img.data.len())?;
    let (bytes, clipped) = match ImageFormat::from_path(path)? {
        ImageFormat::Pnm => encode_pgm(img),
        ImageFormat::RawF64 => (encode_raw(img), 0),
    };
    write_atomic(path, &bytes)?;
    Ok(SaveReport { clipped })
}

/// Write through a temporary sibling and rename, so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn encode_raw(img: &ImageBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * img.data.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(img.n1 as u64).to_le_bytes());
    out.extend_from_slice(&(img.n2 as u64).to_le_bytes());
    for v in &img.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_raw(path: &Path, bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.len() < 24 || &bytes[..8] != RAW_MAGIC {
        return Err(Error::format(path, "missing raw image header"));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().expect("8 bytes"));
    let (n1, n2) = (word(8) as usize, word(16) as usize);
    let n = n1
        .checked_mul(n2)
        .ok_or_else(|| Error::format(path, "image dimensions overflow"))?;
    if bytes.len() != 24 + 8 * n {
        return Err(Error::format(
            path,
            format!("expected {} data bytes, found {}", 8 * n, bytes.len() - 24),
        ));
    }
    let data = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(ImageBuffer { n1, n2, data })
}

fn encode_pgm(img: &ImageBuffer) -> (Vec<u8>, usize) {
    let mut out = format!("P5\n{} {}\n255\n", img.n2, img.n1).into_bytes();
    let mut clipped = 0;
    for &v in &img.data {
        if !(0.0..=255.0).contains(&v) {
            clipped += 1;
        }
        out.push(v.round().clamp(0.0, 255.0) as u8);
    }
    (out, clipped)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn token(&mut self) -> Option<&[u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, path: &Path) -> Result<usize> {
        self.token()
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format(path, "malformed header"))
    }
}

fn parse_pnm(path: &Path, bytes: &[u8]) -> Result<ImageBuffer> {
    let mut h = Header { bytes, pos: 0 };
    let magic = h
        .token()
        .ok_or_else(|| Error::format(path, "empty file"))?
        .to_vec();
    let channels = match magic.as_slice() {
        b"P2" | b"P5" => 1,
        b"P3" | b"P6" => 3,
        _ => return Err(Error::format(path, "unsupported any-map variant")),
    };
    let n2 = h.number(path)?;
    let n1 = h.number(path)?;
    let maxval = h.number(path)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(path, "maxval must lie in 1..=65535"));
    }
    let n = n1 * n2 * channels;
    let samples: Vec<f64> = if magic[1] == b'2' || magic[1] == b'3' {
        (0..n)
            .map(|_| h.number(path).map(|v| v as f64))
            .collect::<Result<_>>()?
    } else {
        // exactly one whitespace byte separates the header from the raster
        let start = h.pos + 1;
        let width = if maxval < 256 { 1 } else { 2 };
        let raster = bytes
            .get(start..start + n * width)
            .ok_or_else(|| Error::format(path, "truncated raster"))?;
        if width == 1 {
            raster.iter().map(|&b| b as f64).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect()
        }
    };
    let scale = 255.0 / maxval as f64;
    let data = samples
        .chunks_exact(channels)
        .map(|px| px.iter().sum::<f64>() / channels as f64 * scale)
        .collect();
    Ok(ImageBuffer { n1, n2, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.f64");
        let img =
            ImageBuffer::new(3, 2, vec![0.1, -7.25, 1e300, f64::MIN_POSITIVE, 255.5, 3.0]).unwrap();
        assert_eq!(save_image(&p, &img).unwrap().clipped, 0);
        let back = load_image(&p).unwrap();
        assert_eq!(back.n1, 3);
        assert_eq!(back.n2, 2);
        for (a, b) in img.data.iter().zip(&back.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pgm_round_trip_for_integer_images() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img =
            ImageBuffer::new(512, 768, (0..512 * 768).map(|i| (i % 256) as f64).collect()).unwrap();
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!((back.n1, back.n2), (512, 768));
        assert_eq!(back, img);
    }

    #[test]
    fn over_range_values_are_clipped_on_save_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        let img = ImageBuffer::new(1, 4, vec![-3.0, 10.0, 300.0, 255.0]).unwrap();
        assert_eq!(save_image(&p, &img).unwrap().clipped, 2);
        assert_eq!(load_image(&p).unwrap().data, vec![0.0, 10.0, 255.0, 255.0]);
        assert_eq!(img.data[2], 300.0);
    }

    #[test]
    fn ascii_and_colour_variants() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        fs::write(&p, "P2\n# comment\n2 1\n15\n0 15\n").unwrap();
        assert_eq!(load_image(&p).unwrap().data, vec![0.0, 255.0]);
        let q = dir.path().join("b.ppm");
        let mut bytes = b"P6 1 1 255\n".to_vec();
        bytes.extend_from_slice(&[30, 60, 90]);
        fs::write(&q, bytes).unwrap();
        assert_eq!(load_image(&q).unwrap().data, vec![60.0]);
    }

    #[test]
    fn bad_inputs_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        fs::write(&p, b"nope").unwrap();
        assert!(load_image(&p).is_err());
        let q = dir.path().join("t.pgm");
        fs::write(&q, b"P5 4 4 255\n\x00\x01").unwrap();
        assert!(load_image(&q).is_err());
        assert!(load_image(dir.path().join("missing.pgm")).is_err());
    }
}
