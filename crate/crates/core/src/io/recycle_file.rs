//! Binary recycle-space files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `RBRSPACE` |
//! | 4     | format version (`u32`, currently 1) |
//! | 8     | `n` (`u64`) |
//! | 8     | `k` (`u64`) |
//! | 1     | scalar tag: 0 real, 1 complex |
//! | ...   | `U` then `Ũ`, each `n × k` column-major; complex values as `(re, im)` pairs |
//!
//! Only the bases are stored. The images and `Dc` depend on the matrix and
//! are recomputed on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::IoError;
use crate::operator::LinearOperator;
use crate::recycle::{biorthonormalize, RecycleSpace};
use crate::scalar::Scalar;

pub const MAGIC: [u8; 8] = *b"RBRSPACE";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 1;

fn write_block<W: Write, T: Scalar>(out: &mut W, m: &DMatrix<T>) -> std::io::Result<()> {
    // nalgebra stores column-major, so iteration order is already correct.
    for &v in m.iter() {
        let z = v.to_c64();
        out.write_all(&z.re.to_le_bytes())?;
        if T::IS_COMPLEX {
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn recycle_save<T: Scalar>(
    path: impl AsRef<Path>,
    space: &RecycleSpace<T>,
) -> Result<(), IoError> {
    if space.is_empty() {
        return Err(IoError::EmptyRecycleSpace);
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(space.n() as u64).to_le_bytes())?;
    out.write_all(&(space.k() as u64).to_le_bytes())?;
    out.write_all(&[T::TAG])?;
    write_block(&mut out, space.u())?;
    write_block(&mut out, space.ut())?;
    out.flush()?;
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> IoError {
    IoError::CorruptRecycleFile(msg.into())
}

/// Reads `U` and `Ũ` and rebuilds the space against `op`.
pub fn recycle_load<T: Scalar, O: LinearOperator<T> + ?Sized>(
    path: impl AsRef<Path>,
    op: &O,
) -> Result<RecycleSpace<T>, IoError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if bytes[..8] != MAGIC {
        return Err(corrupt("not a recycle-space file (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(8);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let n = usize::try_from(u64_at(12)).map_err(|_| corrupt("n does not fit in memory"))?;
    let k = usize::try_from(u64_at(20)).map_err(|_| corrupt("k does not fit in memory"))?;
    let tag = bytes[28];
    if tag > 1 {
        return Err(corrupt(format!("unknown scalar tag {tag}")));
    }
    if tag != T::TAG {
        return Err(IoError::ScalarMismatch {
            file: tag,
            expected: T::TAG,
        });
    }
    if n != op.dim() {
        return Err(IoError::DimensionMismatch {
            expected: op.dim(),
            found: n,
        });
    }
    let per = if T::IS_COMPLEX { 16 } else { 8 };
    let want = n
        .checked_mul(k)
        .and_then(|nk| nk.checked_mul(2 * per))
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or_else(|| corrupt("payload size overflows"))?;
    if bytes.len() != want {
        return Err(corrupt(format!(
            "expected {want} bytes for n = {n}, k = {k}, found {}",
            bytes.len()
        )));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let block = |start: usize| {
        DMatrix::<T>::from_fn(n, k, |i, j| {
            let o = start + (j * n + i) * per;
            let im = if T::IS_COMPLEX { f64_at(o + 8) } else { 0.0 };
            T::from_c64(Complex64::new(f64_at(o), im))
        })
    };
    let u = block(HEADER_LEN);
    let ut = block(HEADER_LEN + n * k * per);
    Ok(biorthonormalize(&u, &ut, op)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recycle::principal_angle_cosines;
    use crate::sparse::SparseMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::TempDir;

    fn system(n: usize, seed: u64) -> (SparseMatrix<f64>, RecycleSpace<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dense = DMatrix::<f64>::from_fn(n, n, |i, j| {
            f64::sample_unit(&mut rng) + if i == j { 6.0 } else { 0.0 }
        });
        let a = SparseMatrix::from_dense(&dense);
        let u = DMatrix::<f64>::from_fn(n, 3, |_, _| f64::sample_unit(&mut rng));
        let ut = DMatrix::<f64>::from_fn(n, 3, |_, _| f64::sample_unit(&mut rng));
        let space = biorthonormalize(&u, &ut, &a).unwrap();
        (a, space)
    }

    #[test]
    fn same_matrix_round_trip_keeps_span_and_coupling() {
        let dir = TempDir::new().unwrap();
        let (a, space) = system(20, 1);
        let p = dir.path().join("s.rbr");
        recycle_save(&p, &space).unwrap();
        let back = recycle_load(&p, &a).unwrap();
        assert_eq!(back.k(), space.k());
        for (x, y) in back.dc().iter().zip(space.dc()) {
            assert!((x - y).abs() <= 1e-10 * y);
        }
        let cos = principal_angle_cosines(back.u(), space.u()).unwrap();
        assert!(cos.iter().all(|&c| c > 1.0 - 1e-10));
    }

    #[test]
    fn load_against_a_perturbed_matrix_recomputes_images() {
        let dir = TempDir::new().unwrap();
        let (a, space) = system(20, 2);
        let p = dir.path().join("s.rbr");
        recycle_save(&p, &space).unwrap();
        let pert =
            SparseMatrix::linear_combination(&[(1.0, &a), (1e-3, &SparseMatrix::identity(20))])
                .unwrap();
        let back = recycle_load(&p, &pert).unwrap();
        back.validate(&pert, 1e-10).unwrap();
    }

    #[test]
    fn bad_files_are_rejected() {
        let dir = TempDir::new().unwrap();
        let (a, space) = system(20, 3);
        let p = dir.path().join("s.rbr");
        recycle_save(&p, &space).unwrap();
        let small = SparseMatrix::<f64>::identity(10);
        assert!(matches!(
            recycle_load(&p, &small),
            Err(IoError::DimensionMismatch {
                expected: 10,
                found: 20
            })
        ));
        let c = SparseMatrix::<Complex64>::identity(20);
        assert!(matches!(
            recycle_load(&p, &c),
            Err(IoError::ScalarMismatch {
                file: 0,
                expected: 1
            })
        ));

        let bytes = std::fs::read(&p).unwrap();
        let q = dir.path().join("t.rbr");
        std::fs::write(&q, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(
            recycle_load(&q, &a),
            Err(IoError::CorruptRecycleFile(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&q, &bad).unwrap();
        assert!(matches!(
            recycle_load(&q, &a),
            Err(IoError::CorruptRecycleFile(_))
        ));
        assert!(matches!(
            recycle_save(&q, &RecycleSpace::<f64>::empty(20)),
            Err(IoError::EmptyRecycleSpace)
        ));
    }
}
