//! Compressed sparse row matrices and Matrix Market exchange.
//!
//! Column indices are sorted within each row and duplicate entries are
//! summed at construction, so products traverse memory in a fixed order
//! and results are reproducible bit for bit.

use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) outside {nrows}x{ncols}")]
    OutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("matrix market parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from unordered triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, SparseError> {
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(SparseError::OutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            by_row[r].push((c, v));
        }
        Ok(Self::from_rows(ncols, by_row))
    }

    /// Builds from per-row entry lists; entries are sorted by column and
    /// duplicates summed.
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                debug_assert!(c < ncols);
                if last == Some(c) {
                    *values.last_mut().expect("entry exists") += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = (&[usize], &[f64])> {
        (0..self.nrows).map(move |r| self.row(r))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "vector length differs from ncols");
        self.iter_rows()
            .map(|(cols, vals)| cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum())
            .collect()
    }

    pub fn mul_transpose_vec(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.nrows, "vector length differs from nrows");
        let mut out = vec![0.0; self.ncols];
        for (r, (cols, vals)) in self.iter_rows().enumerate() {
            let wr = w[r];
            if wr != 0.0 {
                for (&c, &v) in cols.iter().zip(vals) {
                    out[c] += v * wr;
                }
            }
        }
        out
    }

    /// Writes the coordinate Matrix Market form, one-based indices, with
    /// enough digits to round-trip every value.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, (cols, vals)) in self.iter_rows().enumerate() {
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Self, SparseError> {
        let parse = |line: usize, reason: &str| SparseError::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = r.lines().enumerate();
        let (n, header) = lines
            .next()
            .ok_or_else(|| parse(1, "empty file"))
            .and_then(|(n, l)| Ok((n, l?)))?;
        let head = header.to_ascii_lowercase();
        if !head.starts_with("%%matrixmarket matrix coordinate real") {
            return Err(parse(n + 1, "expected coordinate real matrix header"));
        }
        let mut size: Option<(usize, usize, usize)> = None;
        let mut triplets = Vec::new();
        for (n, line) in lines {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('%') {
                continue;
            }
            let mut parts = text.split_whitespace();
            if size.is_none() {
                let dims: Vec<usize> = parts
                    .by_ref()
                    .map(|t| t.parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| parse(n + 1, &format!("size line: {e}")))?;
                if dims.len() != 3 {
                    return Err(parse(n + 1, "size line needs rows cols nnz"));
                }
                size = Some((dims[0], dims[1], dims[2]));
                continue;
            }
            let row: usize = parts
                .next()
                .ok_or_else(|| parse(n + 1, "missing row index"))?
                .parse()
                .map_err(|e| parse(n + 1, &format!("row index: {e}")))?;
            let col: usize = parts
                .next()
                .ok_or_else(|| parse(n + 1, "missing column index"))?
                .parse()
                .map_err(|e| parse(n + 1, &format!("column index: {e}")))?;
            let val: f64 = parts
                .next()
                .ok_or_else(|| parse(n + 1, "missing value"))?
                .parse()
                .map_err(|e| parse(n + 1, &format!("value: {e}")))?;
            if row == 0 || col == 0 {
                return Err(parse(n + 1, "indices are one-based"));
            }
            triplets.push((row - 1, col - 1, val));
        }
        let (nrows, ncols, nnz) =
            size.ok_or_else(|| parse(0, "missing size line"))?;
        if triplets.len() != nnz {
            return Err(parse(
                0,
                &format!("expected {nnz} entries, found {}", triplets.len()),
            ));
        }
        Self::from_triplets(nrows, ncols, triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            2,
            3,
            vec![(0, 2, 3.0), (0, 0, 1.0), (1, 1, 2.5), (0, 0, 0.5)],
        )
        .unwrap()
    }

    #[test]
    fn construction_sorts_and_merges() {
        let m = sample();
        assert_eq!(m.nnz(), 3);
        let (cols, vals) = m.row(0);
        assert_eq!(cols, &[0, 2]);
        assert_eq!(vals, &[1.5, 3.0]);
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let r = CsrMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]);
        assert!(matches!(r, Err(SparseError::OutOfBounds { row: 2, .. })));
    }

    #[test]
    fn products_match_dense_arithmetic() {
        let m = sample();
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![1.5 + 9.0, 5.0]);
        assert_eq!(m.mul_transpose_vec(&[2.0, 1.0]), vec![3.0, 2.5, 6.0]);
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let back = CsrMatrix::read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_market_rejects_garbage() {
        let r = CsrMatrix::read_matrix_market("not a header\n1 1 0\n".as_bytes());
        assert!(matches!(r, Err(SparseError::Parse { .. })));
        let r = CsrMatrix::read_matrix_market(
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 3.0\n".as_bytes(),
        );
        assert!(matches!(r, Err(SparseError::Parse { .. })));
    }
}
