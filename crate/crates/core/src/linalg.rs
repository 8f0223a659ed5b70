//! Determinants by LU with partial pivoting, dense and banded.

use num_complex::Complex64 as C64;

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub data: Vec<C64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn mul(&self, other: &Dense) -> Dense {
        let n = self.n;
        let mut out = Dense::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out.data[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn scaled(&self, s: C64) -> Dense {
        Dense { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Dense) -> Dense {
        Dense { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// det(self) by Gaussian elimination with partial pivoting. A zero pivot yields 0.
    pub fn det(&self) -> C64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = C64::new(1.0, 0.0);
        for j in 0..n {
            let p = (j..n).max_by(|&x, &y| a[x * n + j].norm().total_cmp(&a[y * n + j].norm())).unwrap_or(j);
            let piv = a[p * n + j];
            if piv.norm() == 0.0 {
                return C64::new(0.0, 0.0);
            }
            if p != j {
                for c in j..n {
                    a.swap(j * n + c, p * n + c);
                }
                det = -det;
            }
            det *= piv;
            for i in j + 1..n {
                let l = a[i * n + j] / piv;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in j + 1..n {
                    let v = a[j * n + c];
                    a[i * n + c] -= l * v;
                }
            }
        }
        det
    }
}

impl std::ops::Index<(usize, usize)> for Dense {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Dense {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored by rows
/// with `kl` extra columns on the right for pivoting fill-in.
#[derive(Clone, Debug)]
pub struct Banded {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    width: usize,
    data: Vec<C64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, width, data: vec![C64::new(0.0, 0.0); n * width] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// Whether (i, j) lies inside the declared band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.n);
        for i in 0..self.n {
            for j in i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n) {
                d[(i, j)] = self.get(i, j);
            }
        }
        d
    }

    /// Determinant by banded LU with partial pivoting; consumes the storage.
    pub fn det(mut self) -> C64 {
        let (n, kl) = (self.n, self.kl);
        let reach = kl + self.ku;
        let mut det = C64::new(1.0, 0.0);
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let last_col = (j + reach).min(n - 1);
            let mut p = j;
            let mut best = self.data[self.slot(j, j)].norm();
            for i in j + 1..=last_row {
                let v = self.data[self.slot(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return C64::new(0.0, 0.0);
            }
            if p != j {
                for c in j..=last_col {
                    let (a, b) = (self.slot(j, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
                det = -det;
            }
            let piv = self.data[self.slot(j, j)];
            det *= piv;
            let row_j = self.slot(j, j);
            for i in j + 1..=last_row {
                let s = self.slot(i, j);
                let l = self.data[s] / piv;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                let row_i = s;
                for off in 1..=last_col - j {
                    let v = self.data[row_j + off];
                    self.data[row_i + off] -= l * v;
                }
            }
        }
        det
    }
}

/// Regularized det_n(I - A) = det(I - A) exp(sum_{k<n} tr(A^k)/k), n >= 1.
pub fn det_n(a: &Dense, order: usize) -> C64 {
    let id = Dense::identity(a.n);
    let base = id.add(&a.scaled(C64::new(-1.0, 0.0))).det();
    let mut power = id;
    let mut exponent = C64::new(0.0, 0.0);
    for k in 1..order {
        power = power.mul(a);
        exponent += power.trace() / k as f64;
    }
    base * exponent.exp()
}
