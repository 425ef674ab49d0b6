use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::Path;

use crate::error::{Error, Result};

/// H x W RGB image with channel values in `[0, 1]`, row-major, interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        if pixels.len() != height * width * 3 {
            return Err(Error::Shape(format!(
                "{} values for a {height}x{width}x3 image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { stage: "image pixels".into() });
        }
        let mut img = Self { height, width, pixels };
        img.clamp();
        Ok(img)
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend(f(y, x).map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self { height, width, pixels }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * 3 + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.pixels[(y * self.width + x) * 3 + c] = v;
    }

    pub fn rgb(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_rgb(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn clamp(&mut self) {
        for v in &mut self.pixels {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| self.rgb(y, self.width - 1 - x))
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Hash of the exact bit patterns of all values.
    pub fn content_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.height.hash(&mut h);
        self.width.hash(&mut h);
        for v in &self.pixels {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Values quantized to 1/255 steps, as stored by the 8-bit writers.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|v| quantize(*v)).collect()
    }

    pub fn from_u8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// 8-bit RGB PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.to_u8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        Self::from_u8(img.height() as usize, img.width() as usize, img.as_raw())
    }

    /// ASCII PPM (P3), maxval 255.
    pub fn to_ppm(&self) -> String {
        let mut out = format!("P3\n{} {}\n255\n", self.width, self.height);
        for y in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .flat_map(|x| self.rgb(y, x).map(|v| quantize(v).to_string()))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_ppm(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        if tokens.next() != Some("P3") {
            return Err(Error::Format("not an ASCII PPM (P3) file".into()));
        }
        let mut number = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Format(format!("PPM truncated before {what}")))?
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("PPM {what}: {e}")))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Format(format!("PPM maxval {maxval} out of range")));
        }
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height * 3 {
            let v = number("pixel data")?;
            if v > maxval {
                return Err(Error::Format(format!("PPM sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 / maxval as f64);
        }
        Self::new(height, width, pixels)
    }

    pub fn save_ppm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ppm())?;
        Ok(())
    }

    pub fn load_ppm(path: &Path) -> Result<Self> {
        Self::from_ppm(&fs::read_to_string(path)?)
    }

    /// Dispatches on the file extension (`.png` or `.ppm`).
    pub fn load(path: &Path) -> Result<Self> {
        match extension(path).as_deref() {
            Some("ppm") => Self::load_ppm(path),
            Some("png") => Self::load_png(path),
            other => Err(Error::Format(format!("unsupported image extension {other:?}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match extension(path).as_deref() {
            Some("ppm") => self.save_ppm(path),
            Some("png") => self.save_png(path),
            other => Err(Error::Format(format!("unsupported image extension {other:?}"))),
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Deterministic 64 x 64 test card: smooth gradients, a checkerboard patch,
/// colored shapes and fine stripes, so every corruption family has structure
/// to destroy.
pub fn reference_image() -> Image {
    const SIZE: usize = 64;
    Image::from_fn(SIZE, SIZE, |y, x| {
        let (fy, fx) = (y as f64 / (SIZE - 1) as f64, x as f64 / (SIZE - 1) as f64);
        let mut rgb = [0.15 + 0.6 * fx, 0.2 + 0.5 * fy, 0.55 - 0.3 * fx * fy];
        if y < 20 && x < 20 && ((y / 4) + (x / 4)) % 2 == 0 {
            rgb = [0.9, 0.9, 0.85];
        }
        let (dy, dx) = (y as f64 - 40.0, x as f64 - 22.0);
        if dy * dy + dx * dx < 100.0 {
            rgb = [0.85, 0.2, 0.15];
        }
        if (30..56).contains(&y) && (38..58).contains(&x) {
            rgb = [0.1, 0.35, 0.8];
        }
        if y >= 58 && x % 2 == 0 {
            rgb = [0.05, 0.05, 0.05];
        }
        rgb
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_quantizes() {
        let img = reference_image();
        let back = Image::from_ppm(&img.to_ppm()).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        // A second round trip is lossless.
        assert_eq!(Image::from_ppm(&back.to_ppm()).unwrap(), back);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ref.png");
        let img = Image::from_u8(64, 64, &reference_image().to_u8()).unwrap();
        img.save(&path).unwrap();
        assert_eq!(Image::load(&path).unwrap(), img);
    }

    #[test]
    fn ppm_errors() {
        assert!(Image::from_ppm("P6\n1 1\n255\n0 0 0").is_err());
        assert!(Image::from_ppm("P3\n1 1\n255\n0 0").is_err());
        assert!(Image::from_ppm("P3\n1 1\n255\n0 0 300").is_err());
        let img = Image::from_ppm("P3 # comment\n1 1\n255\n255 0 51\n").unwrap();
        assert_eq!(img.rgb(0, 0), [1.0, 0.0, 0.2]);
    }

    #[test]
    fn construction_clamps() {
        let img = Image::new(1, 1, vec![-0.5, 0.5, 2.0]).unwrap();
        assert_eq!(img.rgb(0, 0), [0.0, 0.5, 1.0]);
        assert!(Image::new(1, 2, vec![0.0; 3]).is_err());
    }
}
