use super::image::Image;
use super::rng::CounterRng;

pub(super) fn gaussian(img: &Image, sigma: f64, rng: CounterRng) -> Image {
    map_indexed(img, |i, v| v + sigma * rng.normal_at(i))
}

pub(super) fn shot(img: &Image, rate: f64, rng: CounterRng) -> Image {
    map_indexed(img, |i, v| rng.poisson_at(i, v * rate) / rate)
}

pub(super) fn impulse(img: &Image, amount: f64, rng: CounterRng) -> Image {
    map_indexed(img, |i, v| {
        if rng.uniform_at(2 * i) < amount {
            if rng.uniform_at(2 * i + 1) < 0.5 {
                0.0
            } else {
                1.0
            }
        } else {
            v
        }
    })
}

pub(super) fn speckle(img: &Image, sigma: f64, rng: CounterRng) -> Image {
    map_indexed(img, |i, v| v + v * sigma * rng.normal_at(i))
}

fn map_indexed(img: &Image, f: impl Fn(u64, f64) -> f64) -> Image {
    let mut out = img.clone();
    for (i, v) in out.pixels_mut().iter_mut().enumerate() {
        *v = f(i as u64, *v);
    }
    out.clamp();
    out
}
