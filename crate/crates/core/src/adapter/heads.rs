use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Splits `x` (N x D) into `heads` contiguous channel blocks of width D / heads.
pub fn partition_heads(x: &Matrix, heads: usize) -> Result<Vec<Matrix>> {
    let d = head_width(x.cols(), heads)?;
    (0..heads).map(|h| x.column_block(h * d, d)).collect()
}

/// Inverse of [`partition_heads`].
pub fn merge_heads(parts: &[Matrix]) -> Result<Matrix> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Shape("merge_heads needs at least one head".into()))?;
    let (n, d) = first.shape();
    let mut out = Matrix::zeros(n, d * parts.len());
    for (h, part) in parts.iter().enumerate() {
        if part.shape() != (n, d) {
            return Err(Error::dim("merge_heads", (n, d), part.shape()));
        }
        out.set_column_block(h * d, part)?;
    }
    Ok(out)
}

pub(crate) fn head_width(dim: usize, heads: usize) -> Result<usize> {
    if heads == 0 || dim % heads != 0 {
        return Err(Error::Shape(format!(
            "channel dimension {dim} is not divisible into {heads} heads"
        )));
    }
    Ok(dim / heads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn splits_contiguous_blocks() {
        let x = Matrix::from_rows(&[vec![1., 2., 3., 4.], vec![5., 6., 7., 8.]]).unwrap();
        let parts = partition_heads(&x, 2).unwrap();
        assert_eq!(parts[0].data(), &[1., 2., 5., 6.]);
        assert_eq!(parts[1].data(), &[3., 4., 7., 8.]);
        assert_eq!(partition_heads(&x, 1).unwrap()[0], x);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_fn(8, 32, |_, _| rng.random_range(-3.0..3.0));
        assert_eq!(merge_heads(&partition_heads(&x, 4).unwrap()).unwrap(), x);
    }

    #[test]
    fn indivisible_is_rejected() {
        assert!(partition_heads(&Matrix::zeros(2, 6), 4).is_err());
        assert!(partition_heads(&Matrix::zeros(2, 6), 0).is_err());
    }
}
