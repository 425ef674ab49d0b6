//! Frozen patch embedding: each 4 x 4 RGB patch (48 values) times a fixed
//! seeded random projection. Never trained.

use ibkit_core::corruptions::Image;
use ibkit_core::tensor::Matrix;
use ibkit_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scene::{GRID, NUM_TOKENS, PATCH, SCENE_SIZE};

pub const PATCH_DIM: usize = PATCH * PATCH * 3;
pub const TOKEN_DIM: usize = 32;
pub const FROZEN_ENCODER_SEED: u64 = 0x1b_e5c0de;

#[derive(Clone, Debug)]
pub struct FrozenEncoder {
    projection: Matrix,
}

impl FrozenEncoder {
    /// Entries i.i.d. N(0, 1).
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            projection: Matrix::from_fn(PATCH_DIM, TOKEN_DIM, |_, _| StandardNormal.sample(&mut rng)),
        }
    }

    pub fn projection(&self) -> &Matrix {
        &self.projection
    }

    /// 64 x 48 matrix of raw patches, row-major over the patch grid.
    pub fn patches(image: &Image) -> Result<Matrix> {
        if image.height() != SCENE_SIZE || image.width() != SCENE_SIZE {
            return Err(Error::Shape(format!(
                "encoder expects {SCENE_SIZE}x{SCENE_SIZE} images, got {}x{}",
                image.height(),
                image.width()
            )));
        }
        Ok(Matrix::from_fn(NUM_TOKENS, PATCH_DIM, |t, k| {
            let (gy, gx) = (t / GRID, t % GRID);
            let (py, rest) = (k / (PATCH * 3), k % (PATCH * 3));
            let (px, c) = (rest / 3, rest % 3);
            image.get(gy * PATCH + py, gx * PATCH + px, c)
        }))
    }

    pub fn encode(&self, image: &Image) -> Result<Matrix> {
        Self::patches(image)?.matmul(&self.projection)
    }
}

impl Default for FrozenEncoder {
    fn default() -> Self {
        Self::new(FROZEN_ENCODER_SEED)
    }
}
