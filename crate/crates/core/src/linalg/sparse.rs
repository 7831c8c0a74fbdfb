use super::{Scalar, C64};
use std::fmt::Write as _;

/// Compressed sparse row matrix. Column indices are sorted within each row
/// and free of duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

/// Coordinate-format accumulator; duplicate entries are summed on build.
#[derive(Debug, Clone)]
pub struct TripletBuilder<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> TripletBuilder<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        assert!(row < self.nrows && col < self.ncols, "entry ({row},{col}) out of bounds");
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix<T> {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
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
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
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

    /// `(column, value)` pairs of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => T::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let mut s = T::zero();
                for (j, v) in self.row(i) {
                    s += v * x[j];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.triplets() {
            t.push(j, i, v);
        }
        t.build()
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Extracts the block with the given row and column index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    t.push(ri, col_map[j], v);
                }
            }
        }
        t.build()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.triplets()
            .all(|(i, j, v)| (v - self.get(j, i).conj()).modulus() <= tol * scale)
    }

    /// `x^H A x`.
    pub fn quad_form(&self, x: &[T]) -> T {
        super::dot(x, &self.mul_vec(x))
    }

    /// Coordinate text dump: header line `rows cols nnz`, then `i j value`
    /// lines (0-based, values in round-trip precision).
    pub fn to_coordinate_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{i} {j} {v:?}");
        }
        s
    }
}

impl SparseMatrix<f64> {
    /// Real matrix applied to a complex vector.
    pub fn mul_cvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let mut s = C64::new(0.0, 0.0);
                for (j, v) in self.row(i) {
                    s += x[j] * v;
                }
                s
            })
            .collect()
    }

    /// Real matrix applied to a vector of any scalar type.
    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let mut s = T::zero();
                for (j, v) in self.row(i) {
                    s += T::from_real(v) * x[j];
                }
                s
            })
            .collect()
    }

    /// `x^H A y` for a real matrix and complex vectors.
    pub fn form(&self, x: &[C64], y: &[C64]) -> C64 {
        super::dot(x, &self.mul_cvec(y))
    }

    pub fn to_complex(&self) -> SparseMatrix<C64> {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    /// Sum `Σ c_k A_k` of real matrices with complex weights.
    pub fn complex_combination(terms: &[(C64, &SparseMatrix<f64>)]) -> SparseMatrix<C64> {
        let (nr, nc) = (terms[0].1.nrows, terms[0].1.ncols);
        let cap = terms.iter().map(|t| t.1.nnz()).sum();
        let mut t = TripletBuilder::with_capacity(nr, nc, cap);
        for (c, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nr, nc));
            for (i, j, v) in m.triplets() {
                t.push(i, j, *c * v);
            }
        }
        t.build()
    }

    /// Sum `Σ c_k A_k` of real matrices with real weights.
    pub fn combination(terms: &[(f64, &SparseMatrix<f64>)]) -> SparseMatrix<f64> {
        let (nr, nc) = (terms[0].1.nrows, terms[0].1.ncols);
        let cap = terms.iter().map(|t| t.1.nnz()).sum();
        let mut t = TripletBuilder::with_capacity(nr, nc, cap);
        for (c, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nr, nc));
            for (i, j, v) in m.triplets() {
                t.push(i, j, *c * v);
            }
        }
        t.build()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }
}

impl SparseMatrix<C64> {
    pub fn to_dense(&self) -> nalgebra::DMatrix<C64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }
}
