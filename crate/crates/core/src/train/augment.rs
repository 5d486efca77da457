use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Random resized crop, horizontal flip, then Gaussian blur.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    /// Crop area as a fraction of the image, drawn uniformly from this range.
    pub crop_scale_range: (f64, f64),
    pub flip_prob: f64,
    /// Blur standard deviation in pixels.
    pub blur_sigma_range: (f64, f64),
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self { crop_scale_range: (0.5, 1.0), flip_prob: 0.5, blur_sigma_range: (0.0, 1.0) }
    }
}

impl AugmentSpec {
    pub const IDENTITY: AugmentSpec =
        AugmentSpec { crop_scale_range: (1.0, 1.0), flip_prob: 0.0, blur_sigma_range: (0.0, 0.0) };

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.crop_scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::invalid("crop_scale_range", "need 0 < lo <= hi <= 1"));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::invalid("flip_prob", "must lie in [0, 1]"));
        }
        let (lo, hi) = self.blur_sigma_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid("blur_sigma_range", "need 0 <= lo <= hi"));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo < hi { rng.random_range(lo..hi) } else { lo }
}

fn crop_resize(src: &Raster, ox: f64, oy: f64, side: f64) -> Raster {
    let n = src.size();
    let last = (n - 1) as f64;
    let mut out = Raster::zeros(n);
    let step = side / n as f64;
    for j in 0..n {
        let sy = (oy + (j as f64 + 0.5) * step - 0.5).clamp(0.0, last);
        let (y0, fy) = (sy.floor() as usize, sy - sy.floor());
        let y1 = (y0 + 1).min(n - 1);
        for i in 0..n {
            let sx = (ox + (i as f64 + 0.5) * step - 0.5).clamp(0.0, last);
            let (x0, fx) = (sx.floor() as usize, sx - sx.floor());
            let x1 = (x0 + 1).min(n - 1);
            let top = src.get(x0, y0) * (1.0 - fx) + src.get(x1, y0) * fx;
            let bottom = src.get(x0, y1) * (1.0 - fx) + src.get(x1, y1) * fx;
            out.set(i, j, top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

pub fn hflip(src: &Raster) -> Raster {
    let n = src.size();
    let mut out = Raster::zeros(n);
    for y in 0..n {
        for x in 0..n {
            out.set(n - 1 - x, y, src.get(x, y));
        }
    }
    out
}

/// Separable Gaussian blur with zero padding outside the image.
pub fn gaussian_blur(src: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return src.clone();
    }
    let n = src.size();
    let r = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    let pass = |data: &[f64], horizontal: bool| {
        let mut out = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let off = k as isize - r;
                    let (sx, sy) = if horizontal { (x as isize + off, y as isize) } else { (x as isize, y as isize + off) };
                    if sx >= 0 && sy >= 0 && (sx as usize) < n && (sy as usize) < n {
                        acc += w * data[sy as usize * n + sx as usize];
                    }
                }
                out[y * n + x] = acc.clamp(0.0, 1.0);
            }
        }
        out
    };
    let h = pass(src.data(), true);
    let v = pass(&h, false);
    Raster::from_vec(n, v).expect("clamped")
}

pub fn augment<R: Rng + ?Sized>(src: &Raster, spec: &AugmentSpec, rng: &mut R) -> Raster {
    let n = src.size() as f64;
    let area = uniform(rng, spec.crop_scale_range);
    let side = area.sqrt() * n;
    let ox = uniform(rng, (0.0, n - side));
    let oy = uniform(rng, (0.0, n - side));
    let mut out = crop_resize(src, ox, oy, side);
    if spec.flip_prob > 0.0 && rng.random_bool(spec.flip_prob) {
        out = hflip(&out);
    }
    let sigma = uniform(rng, spec.blur_sigma_range);
    gaussian_blur(&out, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn sample_raster() -> Raster {
        let mut r = Raster::zeros(32);
        r.draw_segment(5.0, 6.0, 27.0, 20.0);
        r.draw_segment(10.0, 25.0, 24.0, 9.5);
        r
    }

    #[test]
    fn identity_spec_is_identity() {
        let r = sample_raster();
        let mut rng = seeded(1);
        assert_eq!(augment(&r, &AugmentSpec::IDENTITY, &mut rng), r);
    }

    #[test]
    fn double_flip() {
        let r = sample_raster();
        let spec = AugmentSpec { flip_prob: 1.0, ..AugmentSpec::IDENTITY };
        let mut rng = seeded(2);
        let once = augment(&r, &spec, &mut rng);
        assert_ne!(once, r);
        assert_eq!(augment(&once, &spec, &mut rng), r);
    }

    #[test]
    fn blur_keeps_interior_mass() {
        let r = sample_raster();
        let b = gaussian_blur(&r, 1.5);
        assert!((b.mean() - r.mean()).abs() <= 0.02 * r.mean());
    }

    #[test]
    fn output_in_range() {
        let r = sample_raster();
        let mut rng = seeded(3);
        for _ in 0..20 {
            let a = augment(&r, &AugmentSpec::default(), &mut rng);
            assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn validation() {
        assert!(AugmentSpec::default().validate().is_ok());
        let bad = AugmentSpec { crop_scale_range: (0.9, 0.5), ..AugmentSpec::default() };
        assert!(bad.validate().is_err());
        let bad = AugmentSpec { flip_prob: 1.5, ..AugmentSpec::default() };
        assert!(bad.validate().is_err());
    }
}
