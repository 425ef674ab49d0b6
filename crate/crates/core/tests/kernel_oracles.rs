use ibkit_core::tensor::{gelu, io, normal_cdf, Matrix};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn normal_cdf_matches_statrs() {
    // statrs is accurate to a few parts in 1e11, so that is the bound here;
    // the tabulated values below pin the last digits.
    let phi = Normal::new(0.0, 1.0).unwrap();
    for i in -800..=800 {
        let x = i as f64 / 100.0;
        let diff = (normal_cdf(x) - phi.cdf(x)).abs();
        assert!(diff < 5e-11, "x={x} diff {diff}");
        assert!((gelu(x) - x * phi.cdf(x)).abs() < 5e-10, "x={x}");
    }
}

#[test]
fn normal_cdf_matches_tabulated_values() {
    // 0.5 * erfc(-x / sqrt 2) evaluated with a correctly rounded erfc.
    let table = [
        (-8.0, 6.220960574271819e-16),
        (-5.0, 2.866515718791946e-07),
        (-3.0, 0.0013498980316300957),
        (-2.0, 0.02275013194817922),
        (-1.5, 0.06680720126885809),
        (-1.0, 0.15865525393145707),
        (-0.5, 0.3085375387259869),
        (-0.1, 0.460172162722971),
        (0.3, 0.6179114221889526),
        (1.0, 0.8413447460685429),
        (2.0, 0.9772498680518208),
        (4.0, 0.9999683287581669),
    ];
    for (x, expected) in table {
        let got = normal_cdf(x);
        // 1 + erf cancels in the lower tail, so the bound is absolute.
        assert!((got - expected).abs() <= 1e-15, "x={x}: {got} vs {expected}");
    }
    assert!((gelu(1.0) - 0.8413447461).abs() < 1e-10);
    assert!((gelu(-1.0) + 0.1586552539).abs() < 1e-10);
}

#[test]
fn ibmat_header_is_little_endian() {
    let m = Matrix::from_rows(&[vec![1.0, -2.5]]).unwrap();
    let bytes = io::to_bytes(&m);
    assert_eq!(&bytes[..8], b"IBMAT\0\0\0");
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1);
    assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
    assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), -2.5);
}

proptest! {
    #[test]
    fn matmul_matches_nalgebra(
        (r, k, c) in (1usize..6, 1usize..6, 1usize..6),
        seed in any::<u64>(),
    ) {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let a = Matrix::from_fn(r, k, |_, _| next());
        let b = Matrix::from_fn(k, c, |_, _| next());
        let ours = a.matmul(&b).unwrap();
        let na = nalgebra::DMatrix::from_row_slice(r, k, a.data())
            * nalgebra::DMatrix::from_row_slice(k, c, b.data());
        for i in 0..r {
            for j in 0..c {
                prop_assert!((ours.get(i, j) - na[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
