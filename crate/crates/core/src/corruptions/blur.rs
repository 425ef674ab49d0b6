use crate::tensor::Matrix;

use super::image::Image;

/// Mirror index into `[0, n)`, edge sample repeated (`d c b a | a b c d`).
#[inline]
pub(super) fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

/// Normalized Gaussian taps truncated at radius `ceil(3σ)`.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Outer product of the 1-D Gaussian taps.
pub fn gaussian_kernel(sigma: f64) -> Matrix {
    let taps = gaussian_kernel_1d(sigma);
    Matrix::from_fn(taps.len(), taps.len(), |r, c| taps[r] * taps[c])
}

/// Disk of the given radius with a one-pixel linear falloff at the rim
/// (weight `clamp(radius + 0.5 − distance, 0, 1)`), normalized.
pub fn disk_kernel(radius: f64) -> Matrix {
    let r = (radius + 0.5).ceil() as isize;
    let size = (2 * r + 1) as usize;
    let mut k = Matrix::from_fn(size, size, |y, x| {
        let (dy, dx) = (y as f64 - r as f64, x as f64 - r as f64);
        (radius + 0.5 - (dy * dy + dx * dx).sqrt()).clamp(0.0, 1.0)
    });
    let total = k.sum();
    k.data_mut().iter_mut().for_each(|v| *v /= total);
    k
}

/// Line segment of `length` pixels through the center at angle `angle`
/// (radians), rasterized with bilinear splatting and normalized.
pub fn motion_kernel(length: f64, angle: f64) -> Matrix {
    let half = ((length - 1.0) / 2.0).max(0.0);
    let r = half.ceil() as usize + 1;
    let size = 2 * r + 1;
    let mut k = Matrix::zeros(size, size);
    let samples = (4.0 * length).ceil().max(1.0) as usize + 1;
    let (sin, cos) = angle.sin_cos();
    for s in 0..samples {
        let t = if samples == 1 {
            0.0
        } else {
            -half + 2.0 * half * s as f64 / (samples - 1) as f64
        };
        let (py, px) = (r as f64 + t * sin, r as f64 + t * cos);
        let (y0, x0) = (py.floor(), px.floor());
        let (fy, fx) = (py - y0, px - x0);
        for (dy, wy) in [(0usize, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0usize, 1.0 - fx), (1, fx)] {
                let (y, x) = (y0 as usize + dy, x0 as usize + dx);
                if y < size && x < size {
                    k.set(y, x, k.get(y, x) + wy * wx);
                }
            }
        }
    }
    let total = k.sum();
    k.data_mut().iter_mut().for_each(|v| *v /= total);
    k
}

/// Centered 2-D convolution (correlation) with reflected borders.
pub(super) fn convolve(img: &Image, kernel: &Matrix) -> Image {
    let (kh, kw) = kernel.shape();
    let (ry, rx) = ((kh / 2) as isize, (kw / 2) as isize);
    let (h, w) = (img.height(), img.width());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for ky in 0..kh {
                let sy = reflect(y as isize + ky as isize - ry, h);
                for kx in 0..kw {
                    let wgt = kernel.get(ky, kx);
                    if wgt == 0.0 {
                        continue;
                    }
                    let sx = reflect(x as isize + kx as isize - rx, w);
                    let p = img.rgb(sy, sx);
                    for c in 0..3 {
                        acc[c] += wgt * p[c];
                    }
                }
            }
            out.set_rgb(y, x, acc);
        }
    }
    out.clamp();
    out
}

/// Separable convolution: rows then columns, reflected borders.
pub(super) fn separable(img: &Image, taps: &[f64]) -> Image {
    let r = (taps.len() / 2) as isize;
    let (h, w) = (img.height(), img.width());
    let mut tmp = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, t) in taps.iter().enumerate() {
                let p = img.rgb(y, reflect(x as isize + k as isize - r, w));
                for c in 0..3 {
                    acc[c] += t * p[c];
                }
            }
            tmp.set_rgb(y, x, acc);
        }
    }
    let mut out = tmp.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, t) in taps.iter().enumerate() {
                let p = tmp.rgb(reflect(y as isize + k as isize - r, h), x);
                for c in 0..3 {
                    acc[c] += t * p[c];
                }
            }
            out.set_rgb(y, x, acc);
        }
    }
    out.clamp();
    out
}

/// Field smoothing used by the elastic transform (single channel, reflected).
pub(super) fn smooth_field(field: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let taps = gaussian_kernel_1d(sigma);
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * field[y * w + reflect(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Bilinear sample with coordinates clamped to the image.
pub(super) fn sample_bilinear(img: &Image, y: f64, x: f64) -> [f64; 3] {
    let (h, w) = (img.height(), img.width());
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let (a, b, c, d) = (img.rgb(y0, x0), img.rgb(y0, x1), img.rgb(y1, x0), img.rgb(y1, x1));
    let mut out = [0.0; 3];
    for ch in 0..3 {
        let top = a[ch] * (1.0 - fx) + b[ch] * fx;
        let bottom = c[ch] * (1.0 - fx) + d[ch] * fx;
        out[ch] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

pub(super) fn zoom(img: &Image, max_zoom: f64, steps: usize) -> Image {
    let (h, w) = (img.height(), img.width());
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let mut acc = img.pixels().to_vec();
    for s in 1..=steps {
        let z = 1.0 + (max_zoom - 1.0) * s as f64 / steps as f64;
        for y in 0..h {
            for x in 0..w {
                let p = sample_bilinear(img, cy + (y as f64 - cy) / z, cx + (x as f64 - cx) / z);
                for c in 0..3 {
                    acc[(y * w + x) * 3 + c] += p[c];
                }
            }
        }
    }
    let n = (steps + 1) as f64;
    Image::new(h, w, acc.into_iter().map(|v| v / n).collect()).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_sum_to_one() {
        for s in [0.6, 1.0, 1.5, 2.0, 3.0] {
            assert!((gaussian_kernel(s).sum() - 1.0).abs() < 1e-12);
            assert!((gaussian_kernel_1d(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(gaussian_kernel_1d(s).len(), 2 * (3.0 * s).ceil() as usize + 1);
        }
        for r in [1.0, 1.5, 2.0, 3.0, 4.0] {
            assert!((disk_kernel(r).sum() - 1.0).abs() < 1e-12);
        }
        for (l, a) in [(3.0, 0.0), (5.0, 0.7), (7.0, 2.0), (12.0, 3.1)] {
            let k = motion_kernel(l, a);
            assert!((k.sum() - 1.0).abs() < 1e-12);
            assert!(k.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(11, 4), 3);
        assert_eq!(reflect(2, 4), 2);
    }

    #[test]
    fn constant_image_is_blur_invariant() {
        let img = Image::filled(9, 11, [0.25, 0.5, 0.75]);
        let out = separable(&img, &gaussian_kernel_1d(2.0));
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
        let out = convolve(&img, &disk_kernel(3.0));
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
