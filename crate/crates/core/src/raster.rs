//! Square grayscale images with values in `[0, 1]` (ink = 1).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    size: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn zeros(size: usize) -> Self {
        Raster { size, data: vec![0.0; size * size] }
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Raster { size, data: vec![value.clamp(0.0, 1.0); size * size] }
    }

    /// Row-major data, `size * size` values in `[0, 1]`.
    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::DimensionMismatch { expected: size * size, actual: data.len() });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("raster", "pixel outside [0, 1]"));
        }
        Ok(Raster { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.size + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.size + x] = v.clamp(0.0, 1.0);
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v > 0.0).count()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Sets every pixel touched by the segment between two points given in
    /// continuous pixel coordinates (x right, y down). Hard-edged, 1 px wide.
    pub fn draw_segment(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let steps = ((len / 0.25).ceil() as usize).max(1);
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let x = x0 + (x1 - x0) * t;
            let y = y0 + (y1 - y0) * t;
            if x >= 0.0 && y >= 0.0 {
                let (ix, iy) = (x.floor() as usize, y.floor() as usize);
                if ix < self.size && iy < self.size {
                    self.data[iy * self.size + ix] = 1.0;
                }
            }
        }
    }

    /// Binary PGM (P5), maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend(self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // Skip whitespace and comments.
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Parse { offset: pos, reason: "truncated PGM header".into() });
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        pos += 1; // single whitespace byte before the raster
        if fields[0] != "P5" {
            return Err(Error::Parse { offset: 0, reason: format!("bad magic {:?}", fields[0]) });
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse { offset: 0, reason: format!("bad number {s:?}") })
        };
        let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if w != h {
            return Err(Error::Parse { offset: 0, reason: format!("raster must be square, got {w}x{h}") });
        }
        if maxval == 0 || maxval > 255 {
            return Err(Error::Parse { offset: 0, reason: format!("unsupported maxval {maxval}") });
        }
        let body = bytes.get(pos..pos + w * h).ok_or(Error::Parse {
            offset: pos,
            reason: "truncated PGM body".into(),
        })?;
        let data = body.iter().map(|b| f64::from(*b) / maxval as f64).collect();
        Ok(Raster { size: w, data })
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Raster::from_pgm(&bytes)
    }
}

impl AsRef<[f64]> for Raster {
    fn as_ref(&self) -> &[f64] {
        &self.data
    }
}
