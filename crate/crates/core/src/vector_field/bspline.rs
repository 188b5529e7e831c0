//! Uniform cubic B-spline kernels, tensor-product evaluation and interpolation solves.

use super::{Geometry, Support, MAX_DIM};
use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::scalar::{fmax, Real};

/// Weights of nodes `i−1, i, i+1, i+2` at fractional offset `t ∈ [0, 1)`, and their `t`-derivatives.
#[inline]
fn kernel<T: Real>(t: T) -> ([T; 4], [T; 4]) {
    let one = T::one();
    let sixth = T::lit(1.0 / 6.0);
    let half = T::lit(0.5);
    let s = one - t;
    let t2 = t * t;
    let t3 = t2 * t;
    let w = [
        s * s * s * sixth,
        (T::lit(3.0) * t3 - T::lit(6.0) * t2 + T::lit(4.0)) * sixth,
        (-T::lit(3.0) * t3 + T::lit(3.0) * t2 + T::lit(3.0) * t + one) * sixth,
        t3 * sixth,
    ];
    let d = [
        -s * s * half,
        T::lit(1.5) * t2 - T::lit(2.0) * t,
        -T::lit(1.5) * t2 + t + half,
        t2 * half,
    ];
    (w, d)
}

pub(super) fn evaluate<T: Real>(
    geom: &Geometry<T>,
    coeffs: &[T],
    x: &[T],
    val: &mut [T],
    mut jac: Option<&mut SmallMat<T>>,
) {
    let dim = geom.dim;
    val.iter_mut().for_each(|v| *v = T::zero());
    if let Some(j) = jac.as_deref_mut() {
        *j = SmallMat::zeros(dim);
    }
    if !geom.in_support(x) {
        return;
    }
    let inv_h = geom.h.recip();
    let mut base = [0i64; MAX_DIM];
    let mut w = [[T::zero(); 4]; MAX_DIM];
    let mut dw = [[T::zero(); 4]; MAX_DIM];
    for a in 0..dim {
        let u = (x[a] - geom.lo[a]) * inv_h;
        let mut cell = u.floor();
        if geom.support == Support::Compact {
            let max_cell = T::from_usize_(geom.counts[a] - 2);
            cell = cell.max(T::zero()).min(max_cell);
        }
        let t = u - cell;
        let (k, dk) = kernel(t);
        w[a] = k;
        for o in 0..4 {
            dw[a][o] = dk[o] * inv_h;
        }
        base[a] = cell.to_i64().expect("finite cell index") - 1;
    }
    let combos = 1usize << (2 * dim);
    for combo in 0..combos {
        let mut flat = 0usize;
        let mut skip = false;
        let mut off = [0usize; MAX_DIM];
        for a in 0..dim {
            let o = (combo >> (2 * a)) & 3;
            off[a] = o;
            let n = geom.counts[a] as i64;
            let mut j = base[a] + o as i64;
            match geom.support {
                Support::Compact => {
                    if j < 0 || j >= n {
                        skip = true;
                        break;
                    }
                }
                Support::Periodic => j = j.rem_euclid(n),
            }
            flat = flat * geom.counts[a] + j as usize;
        }
        if skip {
            continue;
        }
        let c = &coeffs[flat * dim..(flat + 1) * dim];
        if c.iter().all(|v| *v == T::zero()) {
            continue;
        }
        let mut weight = T::one();
        for a in 0..dim {
            weight *= w[a][off[a]];
        }
        for (v, &ci) in val.iter_mut().zip(c) {
            *v += weight * ci;
        }
        if let Some(j) = jac.as_deref_mut() {
            for k in 0..dim {
                let mut dk = T::one();
                for a in 0..dim {
                    dk *= if a == k { dw[a][off[a]] } else { w[a][off[a]] };
                }
                for i in 0..dim {
                    j.a[i][k] += dk * c[i];
                }
            }
        }
    }
}

/// Solves `(x_{i−1} + 4 x_i + x_{i+1}) / 6 = f_i` with `x_{−1} = x_m = 0`, in place.
fn solve_tridiagonal<T: Real>(f: &mut [T], scratch: &mut Vec<T>) {
    let m = f.len();
    if m == 0 {
        return;
    }
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    scratch.clear();
    scratch.resize(m, T::zero());
    // Forward sweep: c'_i = 1 / (4 − c'_{i−1}), d'_i = (6 f_i − d'_{i−1}) c'_i.
    let mut cp = four.recip();
    scratch[0] = cp;
    f[0] = six * f[0] * cp;
    for i in 1..m {
        cp = (four - scratch[i - 1]).recip();
        scratch[i] = cp;
        f[i] = (six * f[i] - f[i - 1]) * cp;
    }
    for i in (0..m - 1).rev() {
        f[i] -= scratch[i] * f[i + 1];
    }
}

/// Cyclic variant `(x_{i−1} + 4 x_i + x_{i+1}) / 6 = f_i` with periodic indices (Sherman–Morrison).
fn solve_cyclic<T: Real>(f: &mut [T], scratch: &mut Vec<T>) {
    let m = f.len();
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let gamma = -four;
    // Modified system T' = T − u vᵀ with u = (γ, 0, …, 0, 1), v = (1, 0, …, 0, 1/γ).
    let mut diag = vec![four; m];
    diag[0] = four - gamma;
    diag[m - 1] = four - gamma.recip();
    let rhs: Vec<T> = f.iter().map(|&v| v * six).collect();
    let mut u = vec![T::zero(); m];
    u[0] = gamma;
    u[m - 1] = T::one();
    let y = thomas(&diag, &rhs, scratch);
    let z = thomas(&diag, &u, scratch);
    let factor = (y[0] + y[m - 1] / gamma) / (T::one() + z[0] + z[m - 1] / gamma);
    for i in 0..m {
        f[i] = y[i] - factor * z[i];
    }
}

/// Thomas algorithm for unit off-diagonals and the given diagonal.
fn thomas<T: Real>(diag: &[T], rhs: &[T], scratch: &mut Vec<T>) -> Vec<T> {
    let m = diag.len();
    scratch.clear();
    scratch.resize(m, T::zero());
    let mut x = rhs.to_vec();
    let mut denom = diag[0];
    scratch[0] = denom.recip();
    x[0] /= denom;
    for i in 1..m {
        denom = diag[i] - scratch[i - 1];
        scratch[i] = denom.recip();
        x[i] = (x[i] - x[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        x[i] = x[i] - scratch[i] * x[i + 1];
    }
    x
}

/// Coefficients whose spline reproduces `values` at every free node.
pub(super) fn interpolate<T: Real>(geom: &Geometry<T>, values: &[T]) -> Result<Vec<T>> {
    let dim = geom.dim;
    let nodes = geom.node_count();
    if values.len() != nodes * dim {
        return Err(Error::DimensionMismatch {
            expected: nodes * dim,
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("node value".into()));
    }
    let mut c: Vec<T> = values.to_vec();
    for node in 0..nodes {
        if !geom.is_free_node(node) {
            c[node * dim..(node + 1) * dim].iter_mut().for_each(|v| *v = T::zero());
        }
    }
    let mut line = Vec::new();
    let mut scratch = Vec::new();
    for axis in 0..dim {
        let stride = geom.stride(axis);
        let n = geom.counts[axis];
        let (first, len) = match geom.support {
            Support::Compact => (2, n - 4),
            Support::Periodic => (0, n),
        };
        for node in 0..nodes {
            let m = geom.multi(node);
            if m[axis] != 0 {
                continue;
            }
            // Lines whose other indices sit in the margin carry only zeros.
            if geom.support == Support::Compact
                && (0..dim).any(|a| a != axis && (m[a] < 2 || m[a] + 2 >= geom.counts[a]))
            {
                continue;
            }
            for comp in 0..dim {
                line.clear();
                line.extend((0..len).map(|j| c[(node + (first + j) * stride) * dim + comp]));
                match geom.support {
                    Support::Compact => solve_tridiagonal(&mut line, &mut scratch),
                    Support::Periodic => solve_cyclic(&mut line, &mut scratch),
                }
                for (j, &v) in line.iter().enumerate() {
                    c[(node + (first + j) * stride) * dim + comp] = v;
                }
            }
        }
    }
    Ok(c)
}

/// `max |v_{j−2} − 4v_{j−1} + 6v_j − 4v_{j+1} + v_{j+2}|` along every axis and component.
pub(super) fn max_fourth_difference<T: Real>(geom: &Geometry<T>, values: &[T]) -> T {
    let dim = geom.dim;
    let nodes = geom.node_count();
    let coef = [T::one(), -T::lit(4.0), T::lit(6.0), -T::lit(4.0), T::one()];
    let mut best = T::zero();
    for axis in 0..dim {
        let stride = geom.stride(axis);
        let n = geom.counts[axis] as i64;
        for node in 0..nodes {
            let m = geom.multi(node);
            let j = m[axis] as i64;
            let periodic = geom.support == Support::Periodic;
            if !periodic && (j < 2 || j + 2 >= n) {
                continue;
            }
            let base = node as i64 - j * stride as i64;
            for comp in 0..dim {
                let mut acc = T::zero();
                for (o, &k) in coef.iter().enumerate() {
                    let jj = (j + o as i64 - 2).rem_euclid(n);
                    acc += k * values[((base + jj * stride as i64) as usize) * dim + comp];
                }
                best = fmax(best, acc.abs());
            }
        }
    }
    best
}
