//! Stateless counter-based random numbers: every draw is a pure function of
//! `(seed, stream, index)`, so results do not depend on evaluation order.

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: mix64(mix64(seed ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(stream.wrapping_mul(0xd1b5_4a32_d192_ed03))),
        }
    }

    #[inline]
    pub fn u64_at(&self, index: u64) -> u64 {
        mix64(self.key ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform_at(&self, index: u64) -> f64 {
        (self.u64_at(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe for logarithms.
    #[inline]
    pub fn open_uniform_at(&self, index: u64) -> f64 {
        ((self.u64_at(index) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on draws `2i` and `2i + 1`.
    #[inline]
    pub fn normal_at(&self, index: u64) -> f64 {
        let u1 = self.open_uniform_at(2 * index);
        let u2 = self.uniform_at(2 * index + 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Poisson sample by the product-of-uniforms method (sub-draws
    /// `1024 i .. 1024 i + 1023`); rates above 100 use a rounded normal
    /// approximation.
    pub fn poisson_at(&self, index: u64, rate: f64) -> f64 {
        if rate <= 0.0 {
            return 0.0;
        }
        if rate > 100.0 {
            return (rate + rate.sqrt() * self.normal_at(index)).round().max(0.0);
        }
        let limit = (-rate).exp();
        let base = index.wrapping_mul(1024);
        let mut product = 1.0;
        let mut k = 0u64;
        loop {
            product *= self.uniform_at(base + k);
            if product <= limit || k >= 1023 {
                return k as f64;
            }
            k += 1;
        }
    }
}
