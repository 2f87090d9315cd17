//! Label-preserving affine + noise augmentation of 100x100 images.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Image, IMAGE_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub max_rotation_deg: f64,
    pub scale_range: (f64, f64),
    pub allow_reflection: bool,
    pub max_shear: f64,
    pub noise_sigma: f64,
    pub copies_per_image: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            max_rotation_deg: 5.0,
            scale_range: (0.95, 1.05),
            allow_reflection: false,
            max_shear: 0.05,
            noise_sigma: 0.02,
            copies_per_image: 1,
        }
    }
}

impl AugmentConfig {
    /// A configuration whose every draw is the identity.
    pub fn identity() -> Self {
        AugmentConfig {
            max_rotation_deg: 0.0,
            scale_range: (1.0, 1.0),
            allow_reflection: false,
            max_shear: 0.0,
            noise_sigma: 0.0,
            copies_per_image: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "augment scale_range ({lo}, {hi}) must satisfy 0 < low <= high"
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig("augment noise_sigma must be >= 0".into()));
        }
        if !(self.max_rotation_deg >= 0.0) || !(self.max_shear >= 0.0) {
            return Err(Error::InvalidConfig(
                "augment rotation and shear bounds must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// One concrete draw of the affine part of an augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub rotation_deg: f64,
    pub scale: f64,
    pub reflect: bool,
    pub shear: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        rotation_deg: 0.0,
        scale: 1.0,
        reflect: false,
        shear: 0.0,
    };

    /// Forward map `rotation * shear * scale * reflection` as a 2x2 matrix
    /// acting on (column, row) offsets from the image centre.
    fn forward(&self) -> [[f64; 2]; 2] {
        let th = self.rotation_deg.to_radians();
        let (s, c) = th.sin_cos();
        let f = if self.reflect { -1.0 } else { 1.0 };
        // [c -s; s c] * [1 sh; 0 1] * diag(scale*f, scale)
        let k = self.scale;
        let m00 = c * k * f;
        let m01 = (c * self.shear - s) * k;
        let m10 = s * k * f;
        let m11 = (s * self.shear + c) * k;
        [[m00, m01], [m10, m11]]
    }
}

/// Apply an affine map about the image centre with bilinear sampling and
/// zero fill outside the source.
pub fn apply_affine(img: &Image, p: &AffineParams) -> Result<Image> {
    let [[a, b], [c, d]] = p.forward();
    let det = a * d - b * c;
    if !(det.abs() > 1e-12) {
        return Err(Error::InvalidInput("singular affine transform".into()));
    }
    let inv = [[d / det, -b / det], [-c / det, a / det]];
    let n = IMAGE_SIZE;
    let centre = (n as f64 - 1.0) / 2.0;
    let px = img.pixels();
    let fetch = |r: isize, col: isize| -> f64 {
        if r < 0 || col < 0 || r >= n as isize || col >= n as isize {
            0.0
        } else {
            px[r as usize * n + col as usize]
        }
    };
    let mut out = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let dx = col as f64 - centre;
            let dy = row as f64 - centre;
            let sx = inv[0][0] * dx + inv[0][1] * dy + centre;
            let sy = inv[1][0] * dx + inv[1][1] * dy + centre;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as isize, y0 as isize);
            let top = fetch(y0, x0) * (1.0 - fx) + fetch(y0, x0 + 1) * fx;
            let bot = fetch(y0 + 1, x0) * (1.0 - fx) + fetch(y0 + 1, x0 + 1) * fx;
            out.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
        }
    }
    Image::from_pixels(out)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Random affine transform followed by Gaussian pixel noise and clamping.
pub fn augment_image<R: Rng + ?Sized>(
    img: &Image,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Image> {
    cfg.validate()?;
    let params = AffineParams {
        rotation_deg: uniform(rng, -cfg.max_rotation_deg, cfg.max_rotation_deg),
        scale: uniform(rng, cfg.scale_range.0, cfg.scale_range.1),
        reflect: rng.random::<bool>() && cfg.allow_reflection,
        shear: uniform(rng, -cfg.max_shear, cfg.max_shear),
    };
    let warped = apply_affine(img, &params)?;
    if cfg.noise_sigma == 0.0 {
        return Ok(warped);
    }
    let noise = Normal::new(0.0, cfg.noise_sigma)
        .map_err(|e| Error::InvalidConfig(format!("noise_sigma: {e}")))?;
    let px = warped
        .into_pixels()
        .into_iter()
        .map(|p| (p + noise.sample(rng)).clamp(0.0, 1.0))
        .collect();
    Image::from_pixels(px)
}

/// Keep every original and append `copies_per_image` augmented variants of
/// each, so `m` inputs yield `m * (copies + 1)` outputs in input order.
pub fn augment_set<T: Clone, R: Rng + ?Sized>(
    items: &[(Image, T)],
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Vec<(Image, T)>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(items.len() * (cfg.copies_per_image + 1));
    for (img, tag) in items {
        out.push((img.clone(), tag.clone()));
        for _ in 0..cfg.copies_per_image {
            out.push((augment_image(img, cfg, rng)?, tag.clone()));
        }
    }
    Ok(out)
}
