//! Feature consistency (token-mean cosine) and two-cluster grouping purity.

use ibkit_core::tensor::Matrix;
use ibkit_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Mean over tokens of the cosine similarity between corresponding rows.
/// A row pair where either side is all zeros contributes 0.
pub fn feature_consistency(clean: &Matrix, corrupted: &Matrix) -> Result<f64> {
    if clean.shape() != corrupted.shape() {
        return Err(Error::Shape(format!(
            "feature_consistency: {:?} vs {:?}",
            clean.shape(),
            corrupted.shape()
        )));
    }
    let mut total = 0.0;
    for r in 0..clean.rows() {
        let (a, b) = (clean.row(r), corrupted.row(r));
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na > 0.0 && nb > 0.0 {
            total += (dot / (na * nb)).clamp(-1.0, 1.0);
        }
    }
    Ok(total / clean.rows() as f64)
}

pub const KMEANS_MAX_ITERATIONS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub purity: f64,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// All tokens coincide; purity falls back to the majority-mask fraction.
    pub degenerate: bool,
}

/// Lloyd's algorithm with K = 2 and k-means++ seeding, then the better of
/// the two cluster-to-label matchings against `mask`.
pub fn kmeans2_grouping(z: &Matrix, mask: &[bool], seed: u64) -> Result<Grouping> {
    let n = z.rows();
    if n < 2 || mask.len() != n {
        return Err(Error::Shape(format!("{n} tokens with a mask of length {}", mask.len())));
    }
    let fg = mask.iter().filter(|&&m| m).count();
    if fg == 0 || fg == n {
        return Err(Error::InvalidParam("mask must contain both foreground and background".into()));
    }
    let majority = fg.max(n - fg) as f64 / n as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let dist: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), z.row(first))).collect();
    let total: f64 = dist.iter().sum();
    if total == 0.0 {
        return Ok(Grouping {
            purity: majority,
            assignments: vec![0; n],
            iterations: 0,
            degenerate: true,
        });
    }
    let mut target = rng.random::<f64>() * total;
    let mut second = n - 1;
    for (i, d) in dist.iter().enumerate() {
        if target < *d {
            second = i;
            break;
        }
        target -= d;
    }
    let mut centers = [z.row(first).to_vec(), z.row(second).to_vec()];
    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    for it in 1..=KMEANS_MAX_ITERATIONS {
        iterations = it;
        let mut changed = false;
        for (i, slot) in assignments.iter_mut().enumerate() {
            let k = usize::from(sq_dist(z.row(i), &centers[1]) < sq_dist(z.row(i), &centers[0]));
            changed |= *slot != k;
            *slot = k;
        }
        if !changed {
            break;
        }
        for (k, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == k).collect();
            if members.is_empty() {
                continue;
            }
            center.iter_mut().for_each(|c| *c = 0.0);
            for &i in &members {
                for (c, v) in center.iter_mut().zip(z.row(i)) {
                    *c += v;
                }
            }
            center.iter_mut().for_each(|c| *c /= members.len() as f64);
        }
    }
    let agree = assignments.iter().zip(mask).filter(|(&a, &m)| (a == 1) == m).count() as f64 / n as f64;
    Ok(Grouping {
        purity: agree.max(1.0 - agree),
        assignments,
        iterations,
        degenerate: false,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn consistency_examples() {
        let z = Matrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.0, 0.0]]).unwrap();
        // The zero row scores 0 even against itself.
        assert!((feature_consistency(&z, &z).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let full = Matrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3]]).unwrap();
        assert!((feature_consistency(&full, &full.scale(2.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((feature_consistency(&full, &full.scale(-1.0)).unwrap() + 1.0).abs() < 1e-15);
        assert!(feature_consistency(&full, &z).is_err());
    }

    #[test]
    fn separated_groups_are_pure() {
        let z = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![10.0], vec![10.0]]).unwrap();
        let g = kmeans2_grouping(&z, &[false, false, true, true], 0).unwrap();
        assert_eq!(g.purity, 1.0);
        assert!(!g.degenerate);
    }

    #[test]
    fn identical_tokens_are_flagged() {
        let z = Matrix::filled(5, 3, 0.7);
        let g = kmeans2_grouping(&z, &[true, false, false, false, true], 0).unwrap();
        assert!(g.degenerate);
        assert!((g.purity - 0.6).abs() < 1e-15);
        assert!(kmeans2_grouping(&z, &[false; 5], 0).is_err());
    }

    #[test]
    fn random_features_stay_near_chance() {
        let mask: Vec<bool> = (0..64).map(|i| i % 2 == 0).collect();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = Matrix::from_fn(64, 32, |_, _| StandardNormal.sample(&mut rng));
            let g = kmeans2_grouping(&z, &mask, seed).unwrap();
            assert!(g.purity < 0.65, "seed {seed}: {}", g.purity);
        }
    }
}
