use super::image::Image;
use super::rng::CounterRng;

/// Diamond-square plasma on the smallest `2^k + 1` square grid covering
/// `height x width`, rescaled to `[0, 1]` and cropped. Noise amplitude is
/// divided by `decay` at every level, so larger decay gives smoother fog.
pub fn plasma_fractal(height: usize, width: usize, decay: f64, rng: CounterRng) -> Vec<f64> {
    let mut n = 2usize;
    while n + 1 < height.max(width) {
        n *= 2;
    }
    let size = n + 1;
    let noise = |y: usize, x: usize, scale: f64| (2.0 * rng.uniform_at((y * size + x) as u64) - 1.0) * scale;

    let mut grid = vec![0.0; size * size];
    let mut scale = 1.0;
    for (y, x) in [(0, 0), (0, n), (n, 0), (n, n)] {
        grid[y * size + x] = noise(y, x, scale);
    }
    let mut step = n;
    while step > 1 {
        let half = step / 2;
        scale /= decay;
        for y in (half..size).step_by(step) {
            for x in (half..size).step_by(step) {
                let avg = (grid[(y - half) * size + x - half]
                    + grid[(y - half) * size + x + half]
                    + grid[(y + half) * size + x - half]
                    + grid[(y + half) * size + x + half])
                    / 4.0;
                grid[y * size + x] = avg + noise(y, x, scale);
            }
        }
        for y in (0..size).step_by(half) {
            let start = if (y / half) % 2 == 0 { half } else { 0 };
            for x in (start..size).step_by(step) {
                let mut total = 0.0;
                let mut count = 0.0;
                if y >= half {
                    total += grid[(y - half) * size + x];
                    count += 1.0;
                }
                if y + half < size {
                    total += grid[(y + half) * size + x];
                    count += 1.0;
                }
                if x >= half {
                    total += grid[y * size + x - half];
                    count += 1.0;
                }
                if x + half < size {
                    total += grid[y * size + x + half];
                    count += 1.0;
                }
                grid[y * size + x] = total / count + noise(y, x, scale);
            }
        }
        step = half;
    }

    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        out.extend_from_slice(&grid[y * size..y * size + width]);
    }
    let lo = out.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for v in &mut out {
        *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
    }
    out
}

/// `x' = (x + a · plasma) · m / (m + a)` with `m` the image maximum.
pub(super) fn fog(img: &Image, amplitude: f64, decay: f64, rng: CounterRng) -> Image {
    let (h, w) = (img.height(), img.width());
    let plasma = plasma_fractal(h, w, decay, rng);
    let max = img.pixels().iter().copied().fold(0.0, f64::max);
    let norm = if max + amplitude > 0.0 { max / (max + amplitude) } else { 1.0 };
    let mut out = img.clone();
    for (i, v) in out.pixels_mut().iter_mut().enumerate() {
        *v = (*v + amplitude * plasma[i / 3]) * norm;
    }
    out.clamp();
    out
}
