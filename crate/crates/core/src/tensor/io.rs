//! `IBMAT` binary matrix format: 8-byte magic, two little-endian `u64`
//! dimensions (rows, cols), then row-major little-endian `f64` values.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::Matrix;

pub const MAGIC: &[u8; 8] = b"IBMAT\0\0\0";

pub fn encoded_len(m: &Matrix) -> usize {
    8 + 16 + 8 * m.len()
}

pub fn write_matrix<W: Write>(w: &mut W, m: &Matrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<Matrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad IBMAT magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows
        .checked_mul(cols)
        .filter(|&c| c <= 1 << 32)
        .ok_or_else(|| Error::Format(format!("implausible IBMAT dims {rows}x{cols}")))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn to_bytes(m: &Matrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(encoded_len(m));
    write_matrix(&mut buf, m).expect("writing to a Vec cannot fail");
    buf
}

pub fn from_bytes(bytes: &[u8]) -> Result<Matrix> {
    let mut cursor = bytes;
    let m = read_matrix(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after IBMAT block", cursor.len())));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let bytes = to_bytes(&m);
        assert_eq!(&bytes[..8], b"IBMAT\0\0\0");
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), encoded_len(&m));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let m = Matrix::identity(2);
        let mut bytes = to_bytes(&m);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in proptest::collection::vec(-1e300f64..1e300, 36),
        ) {
            let m = Matrix::from_vec(rows, cols, seed[..rows * cols].to_vec()).unwrap();
            let back = from_bytes(&to_bytes(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
