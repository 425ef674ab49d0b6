//! Corruption kinds and the per-kind severity table.
//!
//! The constants are this crate's own; every kind's parameters move
//! strictly in the direction of more distortion as severity goes 1 → 5.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    SpeckleNoise,
    GaussianBlur,
    DefocusBlur,
    MotionBlur,
    ZoomBlur,
    Fog,
    Contrast,
    Brightness,
    Saturate,
    Pixelate,
    ElasticTransform,
}

/// Kinds deliberately not implemented (texture assets, codecs or cost).
pub const OUT_OF_SCOPE_KINDS: [&str; 5] = ["frost", "snow", "spatter", "glass_blur", "jpeg_compression"];

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 14] = [
        Self::GaussianNoise,
        Self::ShotNoise,
        Self::ImpulseNoise,
        Self::SpeckleNoise,
        Self::GaussianBlur,
        Self::DefocusBlur,
        Self::MotionBlur,
        Self::ZoomBlur,
        Self::Fog,
        Self::Contrast,
        Self::Brightness,
        Self::Saturate,
        Self::Pixelate,
        Self::ElasticTransform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GaussianNoise => "gaussian_noise",
            Self::ShotNoise => "shot_noise",
            Self::ImpulseNoise => "impulse_noise",
            Self::SpeckleNoise => "speckle_noise",
            Self::GaussianBlur => "gaussian_blur",
            Self::DefocusBlur => "defocus_blur",
            Self::MotionBlur => "motion_blur",
            Self::ZoomBlur => "zoom_blur",
            Self::Fog => "fog",
            Self::Contrast => "contrast",
            Self::Brightness => "brightness",
            Self::Saturate => "saturate",
            Self::Pixelate => "pixelate",
            Self::ElasticTransform => "elastic_transform",
        }
    }

    /// Whether the output depends on the seed.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Self::GaussianNoise
                | Self::ShotNoise
                | Self::ImpulseNoise
                | Self::SpeckleNoise
                | Self::MotionBlur
                | Self::Fog
                | Self::ElasticTransform
        )
    }

    pub fn is_photometric(self) -> bool {
        matches!(self, Self::Contrast | Self::Brightness | Self::Saturate)
    }

    pub(crate) fn stream(self) -> u64 {
        self as u64 + 1
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        if let Some(kind) = Self::ALL.iter().find(|k| k.name() == key) {
            return Ok(*kind);
        }
        let valid = if OUT_OF_SCOPE_KINDS.contains(&key.as_str()) {
            format!(
                "{} ({key} is out of scope: it needs external assets or a codec)",
                Self::valid_names()
            )
        } else {
            Self::valid_names()
        };
        Err(Error::UnsupportedKind {
            name: s.to_string(),
            valid,
        })
    }
}

/// Generator parameters for one (kind, severity) cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorruptionParams {
    /// Additive N(0, σ²) per channel value.
    GaussianNoise { sigma: f64 },
    /// `Poisson(x · rate) / rate`; smaller rate is noisier.
    ShotNoise { rate: f64 },
    /// Each channel value replaced by 0 or 1 with probability `amount`.
    ImpulseNoise { amount: f64 },
    /// `x + x · N(0, σ²)`.
    SpeckleNoise { sigma: f64 },
    /// Separable Gaussian, truncated at 3σ.
    GaussianBlur { sigma: f64 },
    /// Uniform disk of the given radius.
    DefocusBlur { radius: f64 },
    /// Line of `length` pixels at a seed-chosen angle.
    MotionBlur { length: f64 },
    /// Mean of `steps` centered zooms up to `max_zoom`, plus the original.
    ZoomBlur { max_zoom: f64, steps: usize },
    /// Diamond-square plasma blended additively; `decay` is the roughness decay.
    Fog { amplitude: f64, decay: f64 },
    /// `(x − mean) · factor + mean`; smaller factor is stronger.
    Contrast { factor: f64 },
    /// Adds `shift` to the HSV value channel.
    Brightness { shift: f64 },
    /// HSV saturation `s · scale + shift`.
    Saturate { scale: f64, shift: f64 },
    /// Block averages of `block x block` pixels, nearest-neighbour upscale.
    Pixelate { block: usize },
    /// Displacement field of RMS `amplitude` pixels from white noise smoothed at `smoothing`.
    ElasticTransform { amplitude: f64, smoothing: f64 },
}

impl CorruptionParams {
    pub fn kind(&self) -> CorruptionKind {
        match self {
            Self::GaussianNoise { .. } => CorruptionKind::GaussianNoise,
            Self::ShotNoise { .. } => CorruptionKind::ShotNoise,
            Self::ImpulseNoise { .. } => CorruptionKind::ImpulseNoise,
            Self::SpeckleNoise { .. } => CorruptionKind::SpeckleNoise,
            Self::GaussianBlur { .. } => CorruptionKind::GaussianBlur,
            Self::DefocusBlur { .. } => CorruptionKind::DefocusBlur,
            Self::MotionBlur { .. } => CorruptionKind::MotionBlur,
            Self::ZoomBlur { .. } => CorruptionKind::ZoomBlur,
            Self::Fog { .. } => CorruptionKind::Fog,
            Self::Contrast { .. } => CorruptionKind::Contrast,
            Self::Brightness { .. } => CorruptionKind::Brightness,
            Self::Saturate { .. } => CorruptionKind::Saturate,
            Self::Pixelate { .. } => CorruptionKind::Pixelate,
            Self::ElasticTransform { .. } => CorruptionKind::ElasticTransform,
        }
    }

    /// Scalar keys that must all be nondecreasing (and at least one strictly
    /// increasing) from one severity to the next.
    pub fn distortion_keys(&self) -> Vec<f64> {
        match *self {
            Self::GaussianNoise { sigma } | Self::SpeckleNoise { sigma } => vec![sigma],
            Self::ShotNoise { rate } => vec![1.0 / rate],
            Self::ImpulseNoise { amount } => vec![amount],
            Self::GaussianBlur { sigma } => vec![sigma],
            Self::DefocusBlur { radius } => vec![radius],
            Self::MotionBlur { length } => vec![length],
            Self::ZoomBlur { max_zoom, steps } => vec![max_zoom, steps as f64],
            Self::Fog { amplitude, decay } => vec![amplitude, -decay],
            Self::Contrast { factor } => vec![-factor],
            Self::Brightness { shift } => vec![shift],
            Self::Saturate { scale, shift } => vec![scale, shift],
            Self::Pixelate { block } => vec![block as f64],
            Self::ElasticTransform { amplitude, smoothing } => vec![amplitude, -smoothing],
        }
    }
}

pub const MIN_SEVERITY: u8 = 1;
pub const MAX_SEVERITY: u8 = 5;

pub fn check_severity(severity: u8) -> Result<()> {
    if (MIN_SEVERITY..=MAX_SEVERITY).contains(&severity) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "severity {severity} outside the valid range {MIN_SEVERITY}-{MAX_SEVERITY}"
        )))
    }
}

/// Table lookup for `(kind, severity)`, severity in 1..=5.
pub fn severity_params(kind: CorruptionKind, severity: u8) -> Result<CorruptionParams> {
    check_severity(severity)?;
    let i = (severity - 1) as usize;
    use CorruptionParams as P;
    Ok(match kind {
        CorruptionKind::GaussianNoise => P::GaussianNoise {
            sigma: [0.08, 0.12, 0.18, 0.26, 0.38][i],
        },
        CorruptionKind::ShotNoise => P::ShotNoise {
            rate: [60.0, 25.0, 12.0, 5.0, 3.0][i],
        },
        CorruptionKind::ImpulseNoise => P::ImpulseNoise {
            amount: [0.03, 0.06, 0.09, 0.17, 0.27][i],
        },
        CorruptionKind::SpeckleNoise => P::SpeckleNoise {
            sigma: [0.15, 0.2, 0.35, 0.45, 0.6][i],
        },
        CorruptionKind::GaussianBlur => P::GaussianBlur {
            sigma: [0.6, 1.0, 1.5, 2.0, 3.0][i],
        },
        CorruptionKind::DefocusBlur => P::DefocusBlur {
            radius: [1.0, 1.5, 2.0, 3.0, 4.0][i],
        },
        CorruptionKind::MotionBlur => P::MotionBlur {
            length: [3.0, 5.0, 7.0, 9.0, 12.0][i],
        },
        CorruptionKind::ZoomBlur => P::ZoomBlur {
            max_zoom: [1.06, 1.11, 1.16, 1.21, 1.26][i],
            steps: [6, 8, 10, 12, 14][i],
        },
        CorruptionKind::Fog => P::Fog {
            amplitude: [0.3, 0.45, 0.6, 0.8, 1.0][i],
            decay: 2.0,
        },
        CorruptionKind::Contrast => P::Contrast {
            factor: [0.4, 0.3, 0.2, 0.1, 0.05][i],
        },
        CorruptionKind::Brightness => P::Brightness {
            shift: [0.1, 0.2, 0.3, 0.4, 0.5][i],
        },
        CorruptionKind::Saturate => P::Saturate {
            scale: [1.5, 2.5, 4.0, 7.0, 12.0][i],
            shift: [0.0, 0.02, 0.05, 0.1, 0.2][i],
        },
        CorruptionKind::Pixelate => P::Pixelate {
            block: [2, 3, 5, 6, 9][i],
        },
        CorruptionKind::ElasticTransform => P::ElasticTransform {
            amplitude: [0.5, 1.0, 1.5, 2.0, 2.5][i],
            smoothing: 3.0,
        },
    })
}
