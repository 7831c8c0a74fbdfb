use super::{reverse_cuthill_mckee, LinalgError, Scalar, SparseMatrix, C64};

/// Fill-reducing ordering and band widths for one sparsity pattern.
#[derive(Debug, Clone)]
pub struct BandSymbolic {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv[old] = new`
    inv: Vec<usize>,
    lower: usize,
    upper: usize,
}

impl BandSymbolic {
    pub fn analyze<T: Scalar>(a: &SparseMatrix<T>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "band analysis needs a square matrix");
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut lower, mut upper) = (0, 0);
        for (r, c, _) in a.triplets() {
            let (i, j) = (inv[r], inv[c]);
            if i > j {
                lower = lower.max(i - j);
            } else {
                upper = upper.max(j - i);
            }
        }
        Self {
            n,
            perm,
            inv,
            lower,
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(lower, upper)` bandwidth after reordering.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    /// Solve with the conjugate transpose.
    Conj,
}

/// Banded LU factorization with partial pivoting, in the reordered basis.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    sym: BandSymbolic,
    width: usize,
    data: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn factor(sym: &BandSymbolic, a: &SparseMatrix<T>) -> Result<Self, LinalgError> {
        let n = sym.n;
        if a.nrows() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: a.nrows(),
            });
        }
        let (kl, ku) = (sym.lower, sym.upper);
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            sym: sym.clone(),
            width,
            data: vec![T::zero(); n * width],
            piv: vec![0; n],
        };
        for (r, c, v) in a.triplets() {
            let (i, j) = (sym.inv[r], sym.inv[c]);
            if j + kl < i || j > i + ku {
                return Err(LinalgError::PatternMismatch { row: r, col: c });
            }
            *lu.at_mut(i, j) += v;
        }
        let scale = a.max_abs();
        let threshold = scale * 1e-14;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let (mut p, mut best) = (k, lu.at(k, k).modulus());
            for i in k + 1..=last_row {
                let m = lu.at(i, k).modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if !(best > threshold) {
                return Err(LinalgError::Singular {
                    index: sym.perm[k],
                    magnitude: best,
                    scale,
                });
            }
            lu.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (ik, ip) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(ik, ip);
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let u = lu.at(k, j);
                    *lu.at_mut(i, j) -= l * u;
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.sym.lower - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    pub fn dim(&self) -> usize {
        self.sym.n
    }

    pub fn solve(&self, b: &[T], op: Transpose) -> Vec<T> {
        let n = self.sym.n;
        assert_eq!(b.len(), n);
        let (kl, ku) = (self.sym.lower, self.sym.upper);
        let mut y: Vec<T> = self.sym.perm.iter().map(|&o| b[o]).collect();
        match op {
            Transpose::No => {
                for k in 0..n {
                    y.swap(k, self.piv[k]);
                    let yk = y[k];
                    for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                        y[i] -= self.at(i, k) * yk;
                    }
                }
                for i in (0..n).rev() {
                    let mut s = y[i];
                    for j in i + 1..=(i + kl + ku).min(n - 1) {
                        s -= self.at(i, j) * y[j];
                    }
                    y[i] = s / self.at(i, i);
                }
            }
            Transpose::Conj => {
                for i in 0..n {
                    let mut s = y[i];
                    for j in i.saturating_sub(kl + ku)..i {
                        s -= self.at(j, i).conj() * y[j];
                    }
                    y[i] = s / self.at(i, i).conj();
                }
                for k in (0..n).rev() {
                    let mut s = y[k];
                    for i in k + 1..=(k + kl).min(n - 1) {
                        s -= self.at(i, k).conj() * y[i];
                    }
                    y[k] = s;
                    y.swap(k, self.piv[k]);
                }
            }
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.sym.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Banded Cholesky factorization `P A Pᵀ = L Lᵀ` of a real SPD matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    sym: BandSymbolic,
    kd: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(sym: &BandSymbolic, a: &SparseMatrix<f64>) -> Result<Self, LinalgError> {
        let n = sym.n;
        if a.nrows() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: a.nrows(),
            });
        }
        let kd = sym.lower.max(sym.upper);
        let w = kd + 1;
        let mut data = vec![0.0; n * w];
        for (r, c, v) in a.triplets() {
            let (i, j) = (sym.inv[r], sym.inv[c]);
            if i >= j {
                data[i * w + (j + kd - i)] += v;
            }
        }
        let diag_scale = (0..n).map(|i| data[i * w + kd].abs()).fold(0.0, f64::max);
        for i in 0..n {
            let j0 = i.saturating_sub(kd);
            for j in j0..=i {
                let mut s = data[i * w + (j + kd - i)];
                let k0 = j0.max(j.saturating_sub(kd));
                for k in k0..j {
                    s -= data[i * w + (k + kd - i)] * data[j * w + (k + kd - j)];
                }
                if i == j {
                    if !(s > diag_scale * 1e-15) {
                        return Err(LinalgError::NotPositiveDefinite {
                            index: sym.perm[i],
                            value: s,
                        });
                    }
                    data[i * w + kd] = s.sqrt();
                } else {
                    data[i * w + (j + kd - i)] = s / data[j * w + kd];
                }
            }
        }
        Ok(Self {
            sym: sym.clone(),
            kd,
            data,
        })
    }

    pub fn new(a: &SparseMatrix<f64>) -> Result<Self, LinalgError> {
        Self::factor(&BandSymbolic::analyze(a), a)
    }

    pub fn dim(&self) -> usize {
        self.sym.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.sym.n;
        assert_eq!(b.len(), n);
        let (kd, w) = (self.kd, self.kd + 1);
        let mut y: Vec<f64> = self.sym.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(kd)..i {
                s -= self.data[i * w + (k + kd - i)] * y[k];
            }
            y[i] = s / self.data[i * w + kd];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..=(i + kd).min(n.saturating_sub(1)) {
                s -= self.data[k * w + (i + kd - k)] * y[k];
            }
            y[i] = s / self.data[i * w + kd];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.sym.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn solve_c(&self, b: &[C64]) -> Vec<C64> {
        let re: Vec<f64> = b.iter().map(|v| v.re).collect();
        let im: Vec<f64> = b.iter().map(|v| v.im).collect();
        let (xr, xi) = (self.solve(&re), self.solve(&im));
        xr.into_iter().zip(xi).map(|(r, i)| C64::new(r, i)).collect()
    }
}
