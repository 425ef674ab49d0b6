use super::blur::{sample_bilinear, smooth_field};
use super::image::Image;
use super::rng::CounterRng;

/// Per-channel mean, summed in mirrored pairs `(x, w − 1 − x)` so the result
/// is bit-identical for a horizontally flipped image.
fn channel_means(img: &Image) -> [f64; 3] {
    let (h, w) = (img.height(), img.width());
    let mut sums = [0.0; 3];
    for y in 0..h {
        for x in 0..w.div_ceil(2) {
            let mirror = w - 1 - x;
            let a = img.rgb(y, x);
            let b = img.rgb(y, mirror);
            for c in 0..3 {
                sums[c] += if mirror == x { a[c] } else { a[c] + b[c] };
            }
        }
    }
    sums.map(|s| s / (h * w) as f64)
}

pub(super) fn contrast(img: &Image, factor: f64) -> Image {
    let means = channel_means(img);
    let mut out = img.clone();
    for (i, v) in out.pixels_mut().iter_mut().enumerate() {
        let m = means[i % 3];
        *v = (*v - m) * factor + m;
    }
    out.clamp();
    out
}

pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    [h, s, max]
}

pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = (h * 6.0).rem_euclid(6.0);
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u8 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn map_hsv(img: &Image, f: impl Fn([f64; 3]) -> [f64; 3]) -> Image {
    let mut out = img.clone();
    for px in out.pixels_mut().chunks_exact_mut(3) {
        let rgb = hsv_to_rgb(f(rgb_to_hsv([px[0], px[1], px[2]])));
        px.copy_from_slice(&rgb);
    }
    out.clamp();
    out
}

pub(super) fn brightness(img: &Image, shift: f64) -> Image {
    map_hsv(img, |[h, s, v]| [h, s, (v + shift).clamp(0.0, 1.0)])
}

pub(super) fn saturate(img: &Image, scale: f64, shift: f64) -> Image {
    map_hsv(img, |[h, s, v]| [h, (s * scale + shift).clamp(0.0, 1.0), v])
}

/// Block averages anchored at the top-left corner; edge blocks may be partial.
pub(super) fn pixelate(img: &Image, block: usize) -> Image {
    let (h, w) = (img.height(), img.width());
    let block = block.max(1);
    let mut out = img.clone();
    for by in (0..h).step_by(block) {
        for bx in (0..w).step_by(block) {
            let (ey, ex) = ((by + block).min(h), (bx + block).min(w));
            let mut acc = [0.0; 3];
            for y in by..ey {
                for x in bx..ex {
                    let p = img.rgb(y, x);
                    for c in 0..3 {
                        acc[c] += p[c];
                    }
                }
            }
            let n = ((ey - by) * (ex - bx)) as f64;
            let avg = acc.map(|a| a / n);
            for y in by..ey {
                for x in bx..ex {
                    out.set_rgb(y, x, avg);
                }
            }
        }
    }
    out
}

/// Smoothed uniform noise rescaled to RMS 1, one field per axis.
pub fn displacement_field(height: usize, width: usize, smoothing: f64, rng: CounterRng) -> (Vec<f64>, Vec<f64>) {
    let n = height * width;
    let field = |offset: usize| {
        let raw: Vec<f64> = (0..n).map(|i| 2.0 * rng.uniform_at((offset + i) as u64) - 1.0).collect();
        let mut smooth = smooth_field(&raw, height, width, smoothing);
        let rms = (smooth.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        if rms > 0.0 {
            smooth.iter_mut().for_each(|v| *v /= rms);
        }
        smooth
    };
    (field(0), field(n))
}

pub(super) fn elastic(img: &Image, amplitude: f64, smoothing: f64, rng: CounterRng) -> Image {
    let (h, w) = (img.height(), img.width());
    let (dy, dx) = displacement_field(h, w, smoothing, rng);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let p = sample_bilinear(img, y as f64 + amplitude * dy[i], x as f64 + amplitude * dx[i]);
            out.set_rgb(y, x, p);
        }
    }
    out.clamp();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_round_trip() {
        for rgb in [
            [0.0, 0.0, 0.0],
            [1.0, 1.0, 1.0],
            [0.2, 0.4, 0.6],
            [0.9, 0.1, 0.3],
            [0.5, 0.5, 0.1],
            [0.3, 0.8, 0.8],
        ] {
            let back = hsv_to_rgb(rgb_to_hsv(rgb));
            for c in 0..3 {
                assert!((back[c] - rgb[c]).abs() < 1e-12, "{rgb:?} -> {back:?}");
            }
        }
        assert_eq!(rgb_to_hsv([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        assert!((rgb_to_hsv([0.0, 1.0, 0.0])[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn contrast_preserves_channel_means() {
        let img = Image::from_fn(5, 7, |y, x| [0.1 * y as f64, 0.05 * x as f64, 0.4]);
        let out = contrast(&img, 0.3);
        let (a, b) = (channel_means(&img), channel_means(&out));
        for c in 0..3 {
            assert!((a[c] - b[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn pixelate_blocks_are_constant() {
        let img = Image::from_fn(7, 7, |y, x| [y as f64 / 7.0, x as f64 / 7.0, 0.5]);
        let out = pixelate(&img, 3);
        assert_eq!(out.rgb(0, 0), out.rgb(2, 2));
        assert_eq!(out.rgb(6, 6), img.rgb(6, 6));
        assert!((out.get(0, 0, 0) - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(pixelate(&img, 1), img);
    }

    #[test]
    fn displacement_has_unit_rms() {
        let (dy, dx) = displacement_field(16, 12, 3.0, CounterRng::new(1, 2));
        for f in [dy, dx] {
            let rms = (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt();
            assert!((rms - 1.0).abs() < 1e-12);
        }
    }
}
