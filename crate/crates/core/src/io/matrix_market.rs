//! Matrix Market coordinate (sparse) and array (dense vector) files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use super::IoError;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Complex,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

#[derive(Debug, Clone, Copy)]
struct Banner {
    format: Format,
    field: Field,
    symmetry: Symmetry,
}

fn parse_banner(line: &str) -> Result<Banner, IoError> {
    let bad = |msg: String| Err(IoError::Banner(msg));
    let words: Vec<String> = line
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" {
        return bad(format!(
            "expected '%%MatrixMarket matrix <format> <field> <symmetry>', got '{line}'"
        ));
    }
    if words[1] != "matrix" {
        return bad(format!("unsupported object '{}'", words[1]));
    }
    let format = match words[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return bad(format!("unsupported format '{other}'")),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        other => return bad(format!("unsupported field '{other}'")),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return bad(format!("unsupported symmetry '{other}'")),
    };
    if format == Format::Array && field == Field::Pattern {
        return bad("array format cannot have a pattern field".into());
    }
    Ok(Banner {
        format,
        field,
        symmetry,
    })
}

/// Lines after the banner with comments and blank lines removed, numbered from 1.
struct Body<R> {
    lines: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Body<R> {
    fn next_line(&mut self) -> Result<Option<(usize, String)>, IoError> {
        for line in self.lines.by_ref() {
            let line = line?;
            self.number += 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            return Ok(Some((self.number, t.to_string())));
        }
        Ok(None)
    }
}

fn open(path: &Path) -> Result<(Banner, Body<BufReader<File>>), IoError> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = match lines.next() {
        Some(l) => l?,
        None => return Err(IoError::Banner("empty file".into())),
    };
    let banner = parse_banner(&first)?;
    Ok((banner, Body { lines, number: 1 }))
}

fn parse_sizes(line: &str, number: usize, expected: usize) -> Result<Vec<usize>, IoError> {
    let sizes: Result<Vec<usize>, _> = line.split_whitespace().map(str::parse::<usize>).collect();
    match sizes {
        Ok(s) if s.len() == expected => Ok(s),
        _ => Err(IoError::Header(format!(
            "line {number}: expected {expected} nonnegative integers, got '{line}'"
        ))),
    }
}

fn parse_value<T: Scalar>(tokens: &[&str], field: Field, number: usize) -> Result<T, IoError> {
    let num = |s: &str| {
        s.parse::<f64>().map_err(|_| IoError::Entry {
            line: number,
            message: format!("'{s}' is not a number"),
        })
    };
    let want = match field {
        Field::Pattern => 0,
        Field::Complex => 2,
        Field::Real | Field::Integer => 1,
    };
    if tokens.len() != want {
        return Err(IoError::Entry {
            line: number,
            message: format!("expected {want} value fields, got {}", tokens.len()),
        });
    }
    let z = match field {
        Field::Pattern => Complex64::new(1.0, 0.0),
        Field::Complex => Complex64::new(num(tokens[0])?, num(tokens[1])?),
        Field::Real | Field::Integer => Complex64::new(num(tokens[0])?, 0.0),
    };
    Ok(T::from_c64(z))
}

fn check_field<T: Scalar>(field: Field) -> Result<(), IoError> {
    if field == Field::Complex && !T::IS_COMPLEX {
        return Err(IoError::Banner(
            "complex file cannot be read into a real matrix".into(),
        ));
    }
    Ok(())
}

/// Reads a sparse matrix in coordinate format. Symmetric, skew-symmetric
/// and Hermitian storage is expanded to the full pattern; duplicate entries
/// are summed.
pub fn mm_read<T: Scalar>(path: impl AsRef<Path>) -> Result<SparseMatrix<T>, IoError> {
    let (banner, mut body) = open(path.as_ref())?;
    if banner.format != Format::Coordinate {
        return Err(IoError::Banner(
            "expected a coordinate (sparse) matrix, found array format".into(),
        ));
    }
    check_field::<T>(banner.field)?;
    let (number, line) = body
        .next_line()?
        .ok_or_else(|| IoError::Header("missing size line".into()))?;
    let sizes = parse_sizes(&line, number, 3)?;
    let (nrows, ncols, nnz) = (sizes[0], sizes[1], sizes[2]);
    if banner.symmetry != Symmetry::General && nrows != ncols {
        return Err(IoError::Header(format!(
            "symmetric storage needs a square matrix, got {nrows}x{ncols}"
        )));
    }
    let mut entries = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (number, line) = body.next_line()?.ok_or_else(|| IoError::Entry {
            line: body.number,
            message: format!("file ends before the {nnz} declared entries"),
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 2 {
            return Err(IoError::Entry {
                line: number,
                message: "missing row or column index".into(),
            });
        }
        let index = |s: &str| {
            s.parse::<usize>().map_err(|_| IoError::Entry {
                line: number,
                message: format!("'{s}' is not an index"),
            })
        };
        let (row, col) = (index(tokens[0])?, index(tokens[1])?);
        if row == 0 || col == 0 || row > nrows || col > ncols {
            return Err(IoError::IndexOverflow {
                line: number,
                row,
                col,
                nrows,
                ncols,
            });
        }
        let v: T = parse_value(&tokens[2..], banner.field, number)?;
        let (i, j) = (row - 1, col - 1);
        entries.push((i, j, v));
        if i != j {
            match banner.symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => entries.push((j, i, v)),
                Symmetry::SkewSymmetric => entries.push((j, i, -v)),
                Symmetry::Hermitian => entries.push((j, i, v.conjugate())),
            }
        }
    }
    if let Some((number, _)) = body.next_line()? {
        return Err(IoError::Entry {
            line: number,
            message: format!("more than the {nnz} declared entries"),
        });
    }
    Ok(SparseMatrix::from_triplets(nrows, ncols, &entries).expect("indices checked above"))
}

fn write_value<W: Write, T: Scalar>(out: &mut W, v: T) -> std::io::Result<()> {
    let z = v.to_c64();
    if T::IS_COMPLEX {
        write!(out, "{:e} {:e}", z.re, z.im)
    } else {
        write!(out, "{:e}", z.re)
    }
}

fn field_name<T: Scalar>() -> &'static str {
    if T::IS_COMPLEX {
        "complex"
    } else {
        "real"
    }
}

/// Writes every stored entry (explicit zeros included) in general
/// coordinate format, row by row. Values use the shortest round-trip form.
pub fn mm_write<T: Scalar>(path: impl AsRef<Path>, a: &SparseMatrix<T>) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "%%MatrixMarket matrix coordinate {} general",
        field_name::<T>()
    )?;
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            write!(out, "{} {} ", i + 1, j + 1)?;
            write_value(&mut out, v)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a vector stored as an `n × 1` matrix, either in array format or
/// in general coordinate format.
pub fn mm_read_vector<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<T>, IoError> {
    let (banner, mut body) = open(path.as_ref())?;
    check_field::<T>(banner.field)?;
    if banner.symmetry != Symmetry::General {
        return Err(IoError::Banner(
            "a vector file must use general storage".into(),
        ));
    }
    match banner.format {
        Format::Coordinate => {
            drop(body);
            let m = mm_read::<T>(path)?;
            if m.ncols() != 1 {
                return Err(IoError::Header(format!(
                    "expected a single column, got {} columns",
                    m.ncols()
                )));
            }
            Ok((0..m.nrows()).map(|i| m.get(i, 0)).collect())
        }
        Format::Array => {
            let (number, line) = body
                .next_line()?
                .ok_or_else(|| IoError::Header("missing size line".into()))?;
            let sizes = parse_sizes(&line, number, 2)?;
            if sizes[1] != 1 {
                return Err(IoError::Header(format!(
                    "expected a single column, got {} columns",
                    sizes[1]
                )));
            }
            let mut out = Vec::with_capacity(sizes[0]);
            for _ in 0..sizes[0] {
                let (number, line) = body.next_line()?.ok_or_else(|| IoError::Entry {
                    line: body.number,
                    message: format!("file ends before the {} declared values", sizes[0]),
                })?;
                let tokens: Vec<&str> = line.split_whitespace().collect();
                out.push(parse_value(&tokens, banner.field, number)?);
            }
            if let Some((number, _)) = body.next_line()? {
                return Err(IoError::Entry {
                    line: number,
                    message: "more values than declared".into(),
                });
            }
            Ok(out)
        }
    }
}

/// Writes a vector in array format.
pub fn mm_write_vector<T: Scalar>(path: impl AsRef<Path>, v: &[T]) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "%%MatrixMarket matrix array {} general",
        field_name::<T>()
    )?;
    writeln!(out, "{} 1", v.len())?;
    for &x in v {
        write_value(&mut out, x)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::example1_operator;
    use tempfile::TempDir;

    fn write_file(dir: &TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn one_by_one_round_trips() {
        let dir = TempDir::new().unwrap();
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 5.0)]).unwrap();
        let p = dir.path().join("a.mtx");
        mm_write(&p, &a).unwrap();
        let b: SparseMatrix<f64> = mm_read(&p).unwrap();
        assert_eq!(b.to_dense(), a.to_dense());
    }

    #[test]
    fn symmetric_storage_is_expanded() {
        let dir = TempDir::new().unwrap();
        let p = write_file(
            &dir,
            "s.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -1\n3 2 -1\n3 3 2\n",
        );
        let a: SparseMatrix<f64> = mm_read(&p).unwrap();
        assert_eq!(a.nnz(), 2 * 4 - 2);
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 2), -1.0);
    }

    #[test]
    fn example_operator_round_trips_bit_for_bit() {
        let dir = TempDir::new().unwrap();
        let (a, _) = example1_operator(12).unwrap();
        let p = dir.path().join("e1.mtx");
        mm_write(&p, &a).unwrap();
        let b: SparseMatrix<f64> = mm_read(&p).unwrap();
        assert_eq!(a.row_ptr(), b.row_ptr());
        assert_eq!(a.col_idx(), b.col_idx());
        let bits =
            |m: &SparseMatrix<f64>| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn complex_hermitian_is_conjugated() {
        let dir = TempDir::new().unwrap();
        let p = write_file(
            &dir,
            "h.mtx",
            "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n1 1 1 0\n2 1 0 1\n",
        );
        let a: SparseMatrix<Complex64> = mm_read(&p).unwrap();
        assert_eq!(a.get(1, 0), Complex64::new(0.0, 1.0));
        assert_eq!(a.get(0, 1), Complex64::new(0.0, -1.0));
        assert!(matches!(mm_read::<f64>(&p), Err(IoError::Banner(_))));
    }

    #[test]
    fn errors_are_distinguished() {
        let dir = TempDir::new().unwrap();
        let banner = write_file(
            &dir,
            "b.mtx",
            "%%MatrixMarket vector coordinate real general\n1 1 1\n1 1 1\n",
        );
        assert!(matches!(mm_read::<f64>(&banner), Err(IoError::Banner(_))));
        let header = write_file(
            &dir,
            "h.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2\n",
        );
        assert!(matches!(mm_read::<f64>(&header), Err(IoError::Header(_))));
        let overflow = write_file(
            &dir,
            "o.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
        );
        assert!(matches!(
            mm_read::<f64>(&overflow),
            Err(IoError::IndexOverflow { row: 3, .. })
        ));
        let short = write_file(
            &dir,
            "s.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
        );
        assert!(matches!(mm_read::<f64>(&short), Err(IoError::Entry { .. })));
        assert!(matches!(
            mm_read::<f64>(dir.path().join("missing.mtx")),
            Err(IoError::Io(_))
        ));
    }

    #[test]
    fn vectors_round_trip_in_both_formats() {
        let dir = TempDir::new().unwrap();
        let v = vec![1.5, -0.1, 1e-300, 3.0];
        let p = dir.path().join("v.mtx");
        mm_write_vector(&p, &v).unwrap();
        assert_eq!(mm_read_vector::<f64>(&p).unwrap(), v);
        let q = write_file(
            &dir,
            "c.mtx",
            "%%MatrixMarket matrix coordinate real general\n3 1 1\n2 1 7\n",
        );
        assert_eq!(mm_read_vector::<f64>(&q).unwrap(), vec![0.0, 7.0, 0.0]);
    }
}
