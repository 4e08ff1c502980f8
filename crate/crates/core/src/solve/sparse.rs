//! Compressed sparse row matrices and triplet assembly.

use crate::error::{FemError, Result};
use nalgebra::DMatrix;

/// Coordinate-format accumulator. Duplicates are summed in insertion order
/// when converted, so assembly order fully determines the result.
#[derive(Debug, Clone, Default)]
pub struct TripletMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletMatrix {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletMatrix {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn to_csr(mut self) -> CsrMatrix {
        // stable sort keeps insertion order within a (row, col) key
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
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
    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = TripletMatrix::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push(i, j, m[(i, j)]);
                }
            }
        }
        t.to_csr()
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

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> (&[usize], &mut [f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &mut self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ncols, x.len())?;
        Ok((0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
            })
            .collect())
    }

    /// `Aᵀ x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.nrows, x.len())?;
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletMatrix::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push(j, i, v);
            }
        }
        t.to_csr()
    }

    /// `diag(left) · A · diag(right)`.
    pub fn scale(&self, left: Option<&[f64]>, right: Option<&[f64]>) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..out.nrows {
            let l = left.map_or(1.0, |l| l[i]);
            let (cols, vals) = out.row_mut(i);
            for (v, &j) in vals.iter_mut().zip(cols) {
                *v *= l * right.map_or(1.0, |r| r[j]);
            }
        }
        out
    }

    /// `self + alpha · other` (same shape).
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        check_len(self.nrows, other.nrows)?;
        check_len(self.ncols, other.ncols)?;
        let mut t = TripletMatrix::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push(i, j, x);
            }
            let (c, v) = other.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push(i, j, alpha * x);
            }
        }
        Ok(t.to_csr())
    }

    /// `Aᵀ diag(d) A`, accumulated row by row of `A`.
    pub fn gram_weighted(&self, d: &[f64]) -> Result<CsrMatrix> {
        check_len(self.nrows, d.len())?;
        let mut t = TripletMatrix::new(self.ncols, self.ncols);
        for (i, &di) in d.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&r, &vr) in cols.iter().zip(vals) {
                for (&c, &vc) in cols.iter().zip(vals) {
                    t.push(r, c, di * vr * vc);
                }
            }
        }
        Ok(t.to_csr())
    }

    /// Rows and columns restricted to the given index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = TripletMatrix::new(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            let (c, v) = self.row(r);
            for (&j, &x) in c.iter().zip(v) {
                if col_map[j] != usize::MAX {
                    t.push(ri, col_map[j], x);
                }
            }
        }
        t.to_csr()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut m: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m = m.max((v - t.get(i, j)).abs());
            }
        }
        m
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FemError::DimensionMismatch { expected, got })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_sparse(rng: &mut impl Rng, n: usize, m: usize) -> (CsrMatrix, DMatrix<f64>) {
        let mut t = TripletMatrix::new(n, m);
        let mut d = DMatrix::zeros(n, m);
        for _ in 0..(n * m / 4) {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..m));
            let v: f64 = rng.gen_range(-1.0..1.0);
            t.push(i, j, v);
            d[(i, j)] += v;
        }
        (t.to_csr(), d)
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let (a, d) = random_sparse(&mut rng, 20, 20);
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = a.matvec(&x).unwrap();
        let yd = &d * nalgebra::DVector::from_vec(x.clone());
        for i in 0..20 {
            assert!((y[i] - yd[i]).abs() < 1e-13);
        }
        let z = a.transpose_matvec(&x).unwrap();
        let zd = d.transpose() * nalgebra::DVector::from_vec(x);
        for i in 0..20 {
            assert!((z[i] - zd[i]).abs() < 1e-13);
        }
        assert_eq!(a.to_dense(), d);
    }

    #[test]
    fn gram_and_submatrix() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let (a, d) = random_sparse(&mut rng, 7, 5);
        let w: Vec<f64> = (0..7).map(|_| rng.gen_range(0.5..2.0)).collect();
        let g = a.gram_weighted(&w).unwrap().to_dense();
        let gd = d.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w)) * &d;
        assert!((g - gd).abs().max() < 1e-13);
        let s = a.submatrix(&[1, 4], &[0, 3]).to_dense();
        assert_eq!(s[(1, 1)], d[(4, 3)]);
        assert_eq!(s[(0, 0)], d[(1, 0)]);
    }

    #[test]
    fn dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(
            a.matvec(&[1.0, 2.0]),
            Err(FemError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }
}
