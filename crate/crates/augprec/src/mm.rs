//! Matrix Market coordinate-format reader and writer.
//!
//! Supports real general and real symmetric matrices. Symmetric files store
//! the lower triangle; off-diagonal entries are mirrored on read. Values are
//! written with the shortest decimal rendering that round-trips exactly, so
//! write-then-read reproduces a canonical CSR matrix bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

#[derive(Debug, Error)]
pub enum MmError {
    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("unsupported Matrix Market field or symmetry: {0}")]
    UnsupportedField(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> MmError {
    MmError::ParseError {
        line,
        msg: msg.into(),
    }
}

/// Reads a coordinate-format Matrix Market file.
pub fn read_matrix_market<T: Scalar>(path: impl AsRef<Path>) -> Result<SparseMatrix<T>, MmError> {
    let file = File::open(path)?;
    read_matrix_market_from(BufReader::new(file))
}

/// Reader-based entry point (used directly by the tests).
pub fn read_matrix_market_from<T: Scalar, R: Read>(
    reader: BufReader<R>,
) -> Result<SparseMatrix<T>, MmError> {
    let mut lines = reader.lines().enumerate();

    let (lineno, banner) = match lines.next() {
        Some((i, l)) => (i + 1, l?),
        None => return Err(parse_err(1, "empty file")),
    };
    let tokens: Vec<String> = banner.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5 || !banner.starts_with("%%MatrixMarket") {
        return Err(parse_err(lineno, "missing %%MatrixMarket banner"));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(MmError::UnsupportedField(format!(
            "{} {}",
            tokens[1], tokens[2]
        )));
    }
    if tokens[3] != "real" {
        return Err(MmError::UnsupportedField(tokens[3].clone()));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(MmError::UnsupportedField(other.to_string())),
    };

    // size line: first non-comment line
    let (lineno, size_line) = loop {
        match lines.next() {
            Some((i, l)) => {
                let l = l?;
                if l.trim().is_empty() || l.starts_with('%') {
                    continue;
                }
                break (i + 1, l);
            }
            None => return Err(parse_err(0, "missing size line")),
        }
    };
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(parse_err(lineno, "size line must be `nrows ncols nnz`"));
    }
    let nrows: usize = dims[0]
        .parse()
        .map_err(|_| parse_err(lineno, "bad row count"))?;
    let ncols: usize = dims[1]
        .parse()
        .map_err(|_| parse_err(lineno, "bad column count"))?;
    let nnz: usize = dims[2]
        .parse()
        .map_err(|_| parse_err(lineno, "bad entry count"))?;
    if symmetric && nrows != ncols {
        return Err(parse_err(lineno, "symmetric matrix must be square"));
    }

    let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(if symmetric {
        2 * nnz
    } else {
        nnz
    });
    let mut seen = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(lineno, "entry must be `row col value`"));
        }
        let r: usize = parts[0]
            .parse()
            .map_err(|_| parse_err(lineno, "bad row index"))?;
        let c: usize = parts[1]
            .parse()
            .map_err(|_| parse_err(lineno, "bad column index"))?;
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| parse_err(lineno, "bad value"))?;
        if r == 0 || c == 0 || r > nrows || c > ncols {
            return Err(parse_err(lineno, "index outside matrix (1-based)"));
        }
        let value = T::from_f64(v).ok_or_else(|| parse_err(lineno, "value not representable"))?;
        if !value.is_finite() {
            return Err(parse_err(lineno, "non-finite value"));
        }
        triplets.push((r - 1, c - 1, value));
        if symmetric && r != c {
            triplets.push((c - 1, r - 1, value));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(0, format!("expected {} entries, found {}", nnz, seen)));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
        .map_err(|e| parse_err(0, format!("invalid triplets: {}", e)))
}

/// Writes a matrix in coordinate real general format.
pub fn write_matrix_market<T: Scalar>(
    path: impl AsRef<Path>,
    m: &SparseMatrix<T>,
) -> Result<(), MmError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_matrix_market_to(&mut w, m)
}

pub fn write_matrix_market_to<T: Scalar, W: Write>(
    w: &mut W,
    m: &SparseMatrix<T>,
) -> Result<(), MmError> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for i in 0..m.nrows() {
        for (j, v) in m.row(i) {
            writeln!(w, "{} {} {}", i + 1, j + 1, v.format_exact())?;
        }
    }
    Ok(())
}

/// Writes a vector as an `n x 1` coordinate matrix.
pub fn write_vector<T: Scalar>(path: impl AsRef<Path>, v: &[T]) -> Result<(), MmError> {
    let trip: Vec<(usize, usize, T)> = v
        .iter()
        .enumerate()
        .filter(|(_, &x)| x != T::zero())
        .map(|(i, &x)| (i, 0, x))
        .collect();
    let m = SparseMatrix::from_triplets(v.len(), 1, &trip)
        .expect("vector triplets are always in range");
    write_matrix_market(path, &m)
}

/// Reads an `n x 1` coordinate matrix back into a dense vector.
pub fn read_vector<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<T>, MmError> {
    let m = read_matrix_market::<T>(path)?;
    if m.ncols() != 1 {
        return Err(MmError::UnsupportedField(format!(
            "expected a column vector, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = vec![T::zero(); m.nrows()];
    for i in 0..m.nrows() {
        for (_, v) in m.row(i) {
            out[i] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    fn read_str(s: &str) -> Result<SparseMatrix<f64>, MmError> {
        read_matrix_market_from(BufReader::new(s.as_bytes()))
    }

    #[test]
    fn minimal_general_file() {
        let m = read_str("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.5\n")
            .unwrap();
        assert_eq!(m.nrows(), 1);
        assert_eq!(m.get(0, 0), 2.5);
    }

    #[test]
    fn symmetric_entries_mirrored() {
        let m = read_str(
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 1.0\n2 1 3.0\n",
        )
        .unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(0, 0), 1.0);
    }

    #[test]
    fn rejects_complex_field() {
        let r = read_str("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 2 3\n");
        assert!(matches!(r, Err(MmError::UnsupportedField(_))));
    }

    #[test]
    fn rejects_pattern_field() {
        let r = read_str("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n");
        assert!(matches!(r, Err(MmError::UnsupportedField(_))));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let r = read_str("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 2.0\n");
        match r {
            Err(MmError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn one_based_indices_enforced() {
        let r = read_str("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 2.0\n");
        assert!(matches!(r, Err(MmError::ParseError { line: 3, .. })));
    }

    #[test]
    fn duplicates_summed() {
        let m = read_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 2.0\n1 1 3.0\n",
        )
        .unwrap();
        assert_eq!(m.get(0, 0), 5.0);
    }

    #[test]
    fn roundtrip_is_lossless() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut trip = Vec::new();
        for i in 0..7 {
            for j in 0..9 {
                if rng.random::<f64>() < 0.4 {
                    trip.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let m = SparseMatrix::from_triplets(7, 9, &trip).unwrap();
        let mut buf = Vec::new();
        write_matrix_market_to(&mut buf, &m).unwrap();
        let back: SparseMatrix<f64> =
            read_matrix_market_from(BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(m, back);
        for (a, b) in m.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn vector_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mtx");
        let v = vec![1.5, 0.0, -2.25, 1.0e-17];
        write_vector(&path, &v).unwrap();
        let back: Vec<f64> = read_vector(&path).unwrap();
        assert_eq!(v, back);
    }
}
