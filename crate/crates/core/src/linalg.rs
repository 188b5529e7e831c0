//! Tiny dense linear algebra for the n ≤ 3 Jacobians used by the field code.

use crate::scalar::Real;

/// Row-major square matrix of size `n × n` stored in a fixed 3×3 buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMat<T> {
    pub n: usize,
    pub a: [[T; 3]; 3],
}

impl<T: Real> SmallMat<T> {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "matrix size must be 1..=3");
        Self {
            n,
            a: [[T::zero(); 3]; 3],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), rows.len());
            for (j, &v) in r.iter().enumerate() {
                m.a[i][j] = v;
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i][j]
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] += other.a[i][j];
            }
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] -= other.a[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: T) -> Self {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] *= s;
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[i][j] * v[j]).sum())
            .collect()
    }

    /// `AᵀA`, symmetric positive semidefinite.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                g.a[i][j] = (0..self.n).map(|k| self.a[k][i] * self.a[k][j]).sum();
            }
        }
        g
    }

    pub fn det(&self) -> T {
        let a = &self.a;
        match self.n {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    pub fn frobenius(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    /// Spectral norm `σ_max`.
    pub fn op_norm(&self) -> T {
        let (_, hi) = sym_eig_extremes(&self.gram());
        hi.max(T::zero()).sqrt()
    }

    /// Smallest singular value `σ_min`.
    pub fn sigma_min(&self) -> T {
        let (lo, _) = sym_eig_extremes(&self.gram());
        lo.max(T::zero()).sqrt()
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix with n ≤ 3, in closed form.
pub fn sym_eig_extremes<T: Real>(m: &SmallMat<T>) -> (T, T) {
    let a = &m.a;
    match m.n {
        1 => (a[0][0], a[0][0]),
        2 => {
            let half = T::lit(0.5);
            let mean = (a[0][0] + a[1][1]) * half;
            let d = (a[0][0] - a[1][1]) * half;
            let r = (d * d + a[0][1] * a[0][1]).sqrt();
            (mean - r, mean + r)
        }
        _ => {
            // Trigonometric solution of the characteristic cubic.
            let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            let tr = a[0][0] + a[1][1] + a[2][2];
            let q = tr / T::lit(3.0);
            let d0 = a[0][0] - q;
            let d1 = a[1][1] - q;
            let d2 = a[2][2] - q;
            let p2 = d0 * d0 + d1 * d1 + d2 * d2 + T::lit(2.0) * p1;
            if p2 <= T::epsilon() * T::epsilon() * (tr * tr).max(T::min_positive_value()) {
                return (q, q);
            }
            let p = (p2 / T::lit(6.0)).sqrt();
            let mut b = SmallMat::zeros(3);
            for i in 0..3 {
                for j in 0..3 {
                    b.a[i][j] = (a[i][j] - if i == j { q } else { T::zero() }) / p;
                }
            }
            let r = (b.det() * T::lit(0.5)).max(-T::one()).min(T::one());
            let phi = r.acos() / T::lit(3.0);
            let two_pi_3 = T::lit(2.0 * std::f64::consts::PI / 3.0);
            let e1 = q + T::lit(2.0) * p * phi.cos();
            let e3 = q + T::lit(2.0) * p * (phi + two_pi_3).cos();
            (e3, e1)
        }
    }
}
