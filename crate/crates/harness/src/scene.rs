//! Synthetic token scenes: colored shapes on a textured background.

use ibkit_core::corruptions::{hsv_to_rgb, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const SCENE_SIZE: usize = 32;
pub const PATCH: usize = 4;
pub const GRID: usize = SCENE_SIZE / PATCH;
pub const NUM_TOKENS: usize = GRID * GRID;
pub const NUM_CLASSES: usize = 4;

/// Shape hue of each class, as a fraction of the color wheel.
const CLASS_HUES: [f64; NUM_CLASSES] = [0.0, 0.17, 0.42, 0.67];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Square,
    Triangle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub kind: ShapeKind,
    pub center: (f64, f64),
    pub radius: f64,
    pub rgb: [f64; 3],
}

impl Shape {
    pub fn contains(&self, y: f64, x: f64) -> bool {
        let (dy, dx) = (y - self.center.0, x - self.center.1);
        match self.kind {
            ShapeKind::Disk => dy * dy + dx * dx <= self.radius * self.radius,
            ShapeKind::Square => dy.abs() <= self.radius * 0.85 && dx.abs() <= self.radius * 0.85,
            ShapeKind::Triangle => {
                // Apex up, base at +radius.
                dy <= self.radius && dy >= -self.radius && dx.abs() <= (dy + self.radius) * 0.55
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyScene {
    pub image: Image,
    pub label: usize,
    pub shapes: Vec<Shape>,
    /// Row-major over the 8 x 8 patch grid; true where a patch overlaps a shape.
    pub token_mask: Vec<bool>,
}

impl ToyScene {
    pub fn foreground_tokens(&self) -> usize {
        self.token_mask.iter().filter(|&&m| m).count()
    }
}

/// `n_scenes` scenes with labels cycling through the classes before
/// shuffling, so class counts differ by at most one.
pub fn make_toy_dataset(seed: u64, n_scenes: usize) -> Vec<ToyScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n_scenes).map(|i| i % NUM_CLASSES).collect();
    for i in (1..labels.len()).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    labels.into_iter().map(|label| render_scene(label, &mut rng)).collect()
}

pub fn render_scene<R: Rng + ?Sized>(label: usize, rng: &mut R) -> ToyScene {
    let background = background_fn(rng);
    let count = rng.random_range(1..=3);
    let mut shapes: Vec<Shape> = Vec::with_capacity(count);
    while shapes.len() < count {
        let candidate = random_shape(label, rng);
        // Keep shapes apart so none is hidden by another.
        let clear = shapes.iter().all(|s| {
            let (dy, dx) = (s.center.0 - candidate.center.0, s.center.1 - candidate.center.1);
            (dy * dy + dx * dx).sqrt() > s.radius + candidate.radius + 1.0
        });
        if clear {
            shapes.push(candidate);
        }
    }
    let image = Image::from_fn(SCENE_SIZE, SCENE_SIZE, |y, x| {
        let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
        shapes
            .iter()
            .rev()
            .find(|s| s.contains(py, px))
            .map(|s| s.rgb)
            .unwrap_or_else(|| background(y, x))
    });
    let token_mask = (0..NUM_TOKENS)
        .map(|t| {
            let (gy, gx) = (t / GRID, t % GRID);
            (0..PATCH * PATCH).any(|k| {
                let (py, px) = ((gy * PATCH + k / PATCH) as f64 + 0.5, (gx * PATCH + k % PATCH) as f64 + 0.5);
                shapes.iter().any(|s| s.contains(py, px))
            })
        })
        .collect();
    ToyScene {
        image,
        label,
        shapes,
        token_mask,
    }
}

fn random_shape<R: Rng + ?Sized>(label: usize, rng: &mut R) -> Shape {
    let kind = [ShapeKind::Disk, ShapeKind::Square, ShapeKind::Triangle][rng.random_range(0..3)];
    let radius = rng.random_range(3.5..6.5);
    let margin = radius + 0.5;
    let center = (
        rng.random_range(margin..SCENE_SIZE as f64 - margin),
        rng.random_range(margin..SCENE_SIZE as f64 - margin),
    );
    let hue = CLASS_HUES[label] + rng.random_range(-0.03..0.03);
    let rgb = hsv_to_rgb([hue.rem_euclid(1.0), rng.random_range(0.55..0.85), rng.random_range(0.6..0.9)]);
    Shape {
        kind,
        center,
        radius,
        rgb,
    }
}

/// Low-saturation tint with an oriented grating and per-pixel grain.
fn background_fn<R: Rng + ?Sized>(rng: &mut R) -> impl Fn(usize, usize) -> [f64; 3] {
    let tint = hsv_to_rgb([rng.random(), rng.random_range(0.0..0.25), rng.random_range(0.3..0.55)]);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let freq = rng.random_range(0.3..0.9);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let amp = rng.random_range(0.03..0.08);
    let grain: Vec<f64> = (0..SCENE_SIZE * SCENE_SIZE).map(|_| rng.random_range(-0.03..0.03)).collect();
    let (sin, cos) = angle.sin_cos();
    move |y, x| {
        let t = (freq * (x as f64 * cos + y as f64 * sin) + phase).sin() * amp + grain[y * SCENE_SIZE + x];
        tint.map(|c| c + t)
    }
}
