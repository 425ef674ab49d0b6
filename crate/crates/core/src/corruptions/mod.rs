//! Seeded common-corruption generators (noise, blur, weather, digital) with
//! a five-level severity table, image I/O and PSNR.

mod blur;
mod digital;
mod image;
mod noise;
mod rng;
mod severity;
mod weather;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::blur::{disk_kernel, gaussian_kernel, gaussian_kernel_1d, motion_kernel};
pub use self::digital::{displacement_field, hsv_to_rgb, rgb_to_hsv};
pub use self::image::{reference_image, Image};
pub use self::rng::CounterRng;
pub use self::severity::{
    check_severity, severity_params, CorruptionKind, CorruptionParams, MAX_SEVERITY, MIN_SEVERITY,
    OUT_OF_SCOPE_KINDS,
};
pub use self::weather::plasma_fractal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8, seed: u64) -> Result<Self> {
        check_severity(severity)?;
        Ok(Self { kind, severity, seed })
    }
}

/// Applies the table parameters for `spec.kind` at `spec.severity`.
pub fn corrupt(image: &Image, spec: &CorruptionSpec) -> Result<Image> {
    let params = severity_params(spec.kind, spec.severity)?;
    apply_params(image, &params, spec.seed)
}

/// Applies explicit generator parameters, bypassing the severity table.
pub fn apply_params(image: &Image, params: &CorruptionParams, seed: u64) -> Result<Image> {
    let rng = CounterRng::new(seed, params.kind().stream());
    let out = match *params {
        CorruptionParams::GaussianNoise { sigma } => noise::gaussian(image, sigma, rng),
        CorruptionParams::ShotNoise { rate } => {
            positive("shot_noise rate", rate)?;
            noise::shot(image, rate, rng)
        }
        CorruptionParams::ImpulseNoise { amount } => {
            if !(0.0..=1.0).contains(&amount) {
                return Err(Error::InvalidParam(format!("impulse_noise amount {amount} not in [0, 1]")));
            }
            noise::impulse(image, amount, rng)
        }
        CorruptionParams::SpeckleNoise { sigma } => noise::speckle(image, sigma, rng),
        CorruptionParams::GaussianBlur { sigma } => blur::separable(image, &gaussian_kernel_1d(sigma)),
        CorruptionParams::DefocusBlur { radius } => {
            positive("defocus_blur radius", radius)?;
            blur::convolve(image, &disk_kernel(radius))
        }
        CorruptionParams::MotionBlur { length } => {
            positive("motion_blur length", length)?;
            let angle = rng.uniform_at(0) * std::f64::consts::PI;
            blur::convolve(image, &motion_kernel(length, angle))
        }
        CorruptionParams::ZoomBlur { max_zoom, steps } => {
            if max_zoom < 1.0 {
                return Err(Error::InvalidParam(format!("zoom_blur max_zoom {max_zoom} below 1")));
            }
            blur::zoom(image, max_zoom, steps)
        }
        CorruptionParams::Fog { amplitude, decay } => {
            positive("fog decay", decay)?;
            weather::fog(image, amplitude, decay, rng)
        }
        CorruptionParams::Contrast { factor } => digital::contrast(image, factor),
        CorruptionParams::Brightness { shift } => digital::brightness(image, shift),
        CorruptionParams::Saturate { scale, shift } => digital::saturate(image, scale, shift),
        CorruptionParams::Pixelate { block } => {
            if block == 0 {
                return Err(Error::InvalidParam("pixelate block must be at least 1".into()));
            }
            digital::pixelate(image, block)
        }
        CorruptionParams::ElasticTransform { amplitude, smoothing } => {
            digital::elastic(image, amplitude, smoothing, rng)
        }
    };
    Ok(out)
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{what} must be positive, got {v}")))
    }
}

/// Value reported for identical images (and the ceiling for all others).
pub const PSNR_CAP_DB: f64 = 99.0;

/// `10 log10(1 / MSE)` over all channel values, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::dim(
            "psnr",
            (a.height(), a.width()),
            (b.height(), b.width()),
        ));
    }
    let mse = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.pixels().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}
