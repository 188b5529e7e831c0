//! Vector fields on `R^n` (compactly supported) and on the flat torus, stored as
//! uniform cubic B-spline coefficient grids with analytic Jacobians.
//!
//! Both field kinds share [`SplineCore`]; the [`VectorField`] trait exposes the
//! common calculus (evaluation, Jacobians, the seminorm `α`, composition with a
//! displacement) so that the group and evolution code can be written once.

mod bspline;
mod compact;
pub mod generate;
mod periodic;

pub use compact::CompactField;
pub use periodic::PeriodicField;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::scalar::{fmax, Real};

pub const MAX_DIM: usize = 3;

/// Safety factor applied to the lattice estimate of `sup_x ‖DF(x)‖_op`.
pub const ALPHA_SAFETY: f64 = 1.05;
/// Lattice refinement (points per grid spacing) used by the `α` estimate.
pub const ALPHA_LATTICE: usize = 4;
/// Constant in the declared resampling tolerance `C · max |Δ⁴ v|`.
pub const RESAMPLE_CONSTANT: f64 = 0.05;

/// Boundary behaviour of a spline grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Zero outside the box `K`; two layers of zero coefficients at each face.
    Compact,
    /// Periodic on `[0, 1)^d`.
    Periodic,
}

/// Uniform node grid shared by every field of a computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry<T> {
    dim: usize,
    counts: [usize; MAX_DIM],
    lo: [T; MAX_DIM],
    h: T,
    support: Support,
}

impl<T: Real> Geometry<T> {
    /// Box `K = ∏ [lo_i, lo_i + (counts_i − 1) h]` with zero margins.
    pub fn compact(lo: &[T], counts: &[usize], h: T) -> Result<Self> {
        let dim = lo.len();
        if !(1..=MAX_DIM).contains(&dim) || counts.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "field dimension must be 1..=3, got {dim}"
            )));
        }
        if counts.iter().any(|&c| c < 5) {
            return Err(Error::InvalidArgument(
                "compact grids need at least 5 nodes per axis".into(),
            ));
        }
        if !(h > T::zero()) || !h.is_finite() || lo.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid spacing must be positive and finite".into(),
            ));
        }
        let mut c = [1; MAX_DIM];
        let mut l = [T::zero(); MAX_DIM];
        c[..dim].copy_from_slice(counts);
        l[..dim].copy_from_slice(lo);
        Ok(Self {
            dim,
            counts: c,
            lo: l,
            h,
            support: Support::Compact,
        })
    }

    /// Box `[lo, hi]` with spacing `h`; `(hi − lo)/h` must be an integer on every axis.
    pub fn compact_box(lo: &[T], hi: &[T], h: T) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let counts = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| {
                let r = ((b - a) / h).to_f64_();
                let n = r.round();
                if (r - n).abs() > 1e-9 * r.abs().max(1.0) || n < 1.0 {
                    Err(Error::InvalidArgument(format!(
                        "box side {} is not a multiple of h = {h}",
                        b - a
                    )))
                } else {
                    Ok(n as usize + 1)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::compact(lo, &counts, h)
    }

    /// Square box `[lo, hi]^dim` with `nodes` nodes per axis.
    pub fn compact_cube(dim: usize, lo: T, hi: T, nodes: usize) -> Result<Self> {
        if nodes < 5 || !(lo < hi) {
            return Err(Error::InvalidArgument("cube needs lo < hi and at least 5 nodes".into()));
        }
        let h = (hi - lo) / T::from_usize_(nodes - 1);
        Self::compact(&vec![lo; dim], &vec![nodes; dim], h)
    }

    /// Periodic grid on `[0, 1)^dim` with `nodes` nodes per axis.
    pub fn periodic(dim: usize, nodes: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) || nodes < 4 {
            return Err(Error::InvalidArgument(
                "periodic grids need dim 1..=3 and at least 4 nodes".into(),
            ));
        }
        let mut c = [1; MAX_DIM];
        c[..dim].iter_mut().for_each(|x| *x = nodes);
        Ok(Self {
            dim,
            counts: c,
            lo: [T::zero(); MAX_DIM],
            h: T::from_usize_(nodes).recip(),
            support: Support::Periodic,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }
    #[inline]
    pub fn lo(&self) -> &[T] {
        &self.lo[..self.dim]
    }
    pub fn hi(&self) -> Vec<T> {
        (0..self.dim)
            .map(|a| match self.support {
                Support::Compact => self.lo[a] + self.h * T::from_usize_(self.counts[a] - 1),
                Support::Periodic => T::one(),
            })
            .collect()
    }
    #[inline]
    pub fn h(&self) -> T {
        self.h
    }
    #[inline]
    pub fn support(&self) -> Support {
        self.support
    }

    pub fn node_count(&self) -> usize {
        self.counts().iter().product()
    }

    fn multi(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            m[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        m
    }

    fn stride(&self, axis: usize) -> usize {
        self.counts[axis + 1..self.dim].iter().product()
    }

    pub fn node_position(&self, flat: usize) -> Vec<T> {
        let m = self.multi(flat);
        (0..self.dim)
            .map(|a| self.lo[a] + self.h * T::from_usize_(m[a]))
            .collect()
    }

    /// Nodes whose coefficients are free (interior of the zero margin for compact grids).
    pub fn is_free_node(&self, flat: usize) -> bool {
        match self.support {
            Support::Periodic => true,
            Support::Compact => {
                let m = self.multi(flat);
                (0..self.dim).all(|a| m[a] >= 2 && m[a] + 2 < self.counts[a])
            }
        }
    }

    /// True when `x` lies in the open box (always true for periodic grids).
    pub fn in_support(&self, x: &[T]) -> bool {
        match self.support {
            Support::Periodic => true,
            Support::Compact => {
                let hi = self.hi();
                (0..self.dim).all(|a| x[a] > self.lo[a] && x[a] < hi[a])
            }
        }
    }

    /// Sampling lattice with `div` points per grid spacing; flat, `dim` values per point.
    pub fn lattice(&self, div: usize) -> Vec<T> {
        let div = div.max(1);
        let per_axis: Vec<usize> = (0..self.dim)
            .map(|a| match self.support {
                Support::Compact => (self.counts[a] - 1) * div + 1,
                Support::Periodic => self.counts[a] * div,
            })
            .collect();
        let total: usize = per_axis.iter().product();
        let step = self.h / T::from_usize_(div);
        let mut out = Vec::with_capacity(total * self.dim);
        for mut flat in 0..total {
            let mut idx = [0; MAX_DIM];
            for a in (0..self.dim).rev() {
                idx[a] = flat % per_axis[a];
                flat /= per_axis[a];
            }
            for a in 0..self.dim {
                out.push(self.lo[a] + step * T::from_usize_(idx[a]));
            }
        }
        out
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Coefficient grid shared by [`CompactField`] and [`PeriodicField`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplineCore<T> {
    geom: Geometry<T>,
    /// Node-major, component-minor: `coeffs[node * dim + i]`.
    coeffs: Vec<T>,
}

impl<T: Real> SplineCore<T> {
    pub fn new(geom: Geometry<T>, coeffs: Vec<T>) -> Result<Self> {
        let expected = geom.node_count() * geom.dim();
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("field coefficient".into()));
        }
        let dim = geom.dim();
        if geom.support() == Support::Compact {
            for node in 0..geom.node_count() {
                if !geom.is_free_node(node) && coeffs[node * dim..(node + 1) * dim].iter().any(|c| *c != T::zero()) {
                    return Err(Error::InvalidArgument("non-zero coefficient in the zero margin".into()));
                }
            }
        }
        Ok(Self { geom, coeffs })
    }

    pub fn zeros(geom: Geometry<T>) -> Self {
        let n = geom.node_count() * geom.dim();
        Self {
            geom,
            coeffs: vec![T::zero(); n],
        }
    }

    /// Coefficients `f(node)` on free nodes, zero on the margin.
    pub fn from_coefficient_fn(geom: Geometry<T>, f: impl Fn(&[T]) -> Vec<T>) -> Result<Self> {
        let dim = geom.dim();
        let mut coeffs = vec![T::zero(); geom.node_count() * dim];
        for node in 0..geom.node_count() {
            if geom.is_free_node(node) {
                let v = f(&geom.node_position(node));
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: v.len(),
                    });
                }
                coeffs[node * dim..(node + 1) * dim].copy_from_slice(&v);
            }
        }
        Self::new(geom, coeffs)
    }

    /// Interpolant of node values (all nodes, `dim` values each).
    pub fn from_node_values(geom: Geometry<T>, values: &[T]) -> Result<Self> {
        let coeffs = bspline::interpolate(&geom, values)?;
        Self::new(geom, coeffs)
    }

    pub fn from_fn(geom: Geometry<T>, f: impl Fn(&[T]) -> Vec<T> + Sync) -> Result<Self> {
        let values = sample_nodes(&geom, f)?;
        Self::from_node_values(geom, &values)
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry<T> {
        &self.geom
    }
    #[inline]
    pub fn coefficients(&self) -> &[T] {
        &self.coeffs
    }

    pub(crate) fn map_coeffs(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            geom: self.geom.clone(),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    pub(crate) fn zip_coeffs(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.geom.check_same(&other.geom)?;
        Ok(Self {
            geom: self.geom.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == T::zero())
    }

    /// Value and (optionally) Jacobian at `x`; exact zeros outside a compact support.
    pub fn eval_into(&self, x: &[T], val: &mut [T], jac: Option<&mut SmallMat<T>>) {
        bspline::evaluate(&self.geom, &self.coeffs, x, val, jac);
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        let mut v = vec![T::zero(); self.geom.dim()];
        self.eval_into(x, &mut v, None);
        v
    }

    pub fn jacobian(&self, x: &[T]) -> SmallMat<T> {
        let mut v = vec![T::zero(); self.geom.dim()];
        let mut j = SmallMat::zeros(self.geom.dim());
        self.eval_into(x, &mut v, Some(&mut j));
        j
    }

    pub fn node_values(&self) -> Vec<T> {
        let geom = &self.geom;
        let dim = geom.dim();
        let mut out = vec![T::zero(); geom.node_count() * dim];
        out.par_chunks_mut(dim).enumerate().for_each(|(node, slot)| {
            self.eval_into(&geom.node_position(node), slot, None);
        });
        out
    }

    /// Lattice maxima of `|F|` and `‖DF‖_op` with `div` points per spacing.
    pub fn lattice_sup(&self, div: usize) -> (T, T) {
        let dim = self.geom.dim();
        let pts = self.geom.lattice(div);
        let per_point: Vec<(T, T)> = pts
            .par_chunks(dim)
            .map(|x| {
                let mut v = [T::zero(); MAX_DIM];
                let mut j = SmallMat::zeros(dim);
                self.eval_into(x, &mut v[..dim], Some(&mut j));
                (crate::scalar::norm2(&v[..dim]), j.op_norm())
            })
            .collect();
        per_point
            .into_iter()
            .fold((T::zero(), T::zero()), |(a, b), (x, y)| (fmax(a, x), fmax(b, y)))
    }
}

impl<T: Real> SplineCore<T> {
    /// Upper bound on `sup_x ‖D²F(x)‖` (Frobenius over all second partials), from coefficient differences.
    ///
    /// Each second partial of a cubic spline is a convex combination of the
    /// corresponding coefficient second differences divided by `h²`.
    pub fn second_derivative_bound(&self) -> T {
        let geom = &self.geom;
        let dim = geom.dim;
        let coeff = |m: &[i64; MAX_DIM], comp: usize| -> T {
            let mut flat = 0usize;
            for a in 0..dim {
                let n = geom.counts[a] as i64;
                let j = match geom.support {
                    Support::Periodic => m[a].rem_euclid(n),
                    Support::Compact => {
                        if m[a] < 0 || m[a] >= n {
                            return T::zero();
                        }
                        m[a]
                    }
                };
                flat = flat * geom.counts[a] + j as usize;
            }
            self.coeffs[flat * dim + comp]
        };
        let mut sum = T::zero();
        for comp in 0..dim {
            for a in 0..dim {
                for b in a..dim {
                    let mut best = T::zero();
                    for node in 0..geom.node_count() {
                        let mu = geom.multi(node);
                        let mut m = [0i64; MAX_DIM];
                        for k in 0..dim {
                            m[k] = mu[k] as i64;
                        }
                        let d = if a == b {
                            let mut p = m;
                            let mut q = m;
                            p[a] += 1;
                            q[a] -= 1;
                            coeff(&p, comp) - T::lit(2.0) * coeff(&m, comp) + coeff(&q, comp)
                        } else {
                            let mut pa = m;
                            pa[a] += 1;
                            let mut pb = m;
                            pb[b] += 1;
                            let mut pab = pa;
                            pab[b] += 1;
                            coeff(&pab, comp) - coeff(&pa, comp) - coeff(&pb, comp) + coeff(&m, comp)
                        };
                        best = fmax(best, d.abs());
                    }
                    let mult = if a == b { T::one() } else { T::lit(2.0) };
                    sum += mult * best * best;
                }
            }
        }
        sum.sqrt() / (geom.h * geom.h)
    }
}

/// Values of `f` at every node.
pub(crate) fn sample_nodes<T: Real>(geom: &Geometry<T>, f: impl Fn(&[T]) -> Vec<T> + Sync) -> Result<Vec<T>> {
    let dim = geom.dim();
    let mut out = vec![T::zero(); geom.node_count() * dim];
    out.par_chunks_mut(dim).enumerate().try_for_each(|(node, slot)| {
        let v = f(&geom.node_position(node));
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        slot.copy_from_slice(&v);
        Ok(())
    })?;
    Ok(out)
}

/// Declared resampling tolerance `C · max |Δ⁴ v|` over axes and components.
pub fn resampling_tolerance<T: Real>(geom: &Geometry<T>, node_values: &[T]) -> T {
    T::lit(RESAMPLE_CONSTANT) * bspline::max_fourth_difference(geom, node_values)
}

/// A field resampled onto a grid, with its declared resampling tolerance.
#[derive(Debug, Clone)]
pub struct Resampled<T, F> {
    pub field: F,
    pub tolerance: T,
}

/// Common calculus of spline vector fields.
pub trait VectorField<T: Real>: Clone + std::fmt::Debug + Send + Sync + Sized {
    fn core(&self) -> &SplineCore<T>;
    fn from_core(core: SplineCore<T>) -> Result<Self>;

    fn geometry(&self) -> &Geometry<T> {
        self.core().geometry()
    }

    fn dim(&self) -> usize {
        self.geometry().dim()
    }

    fn eval(&self, x: &[T]) -> Vec<T> {
        self.core().eval(x)
    }

    fn eval_into(&self, x: &[T], out: &mut [T]) {
        self.core().eval_into(x, out, None)
    }

    /// Analytic Jacobian `J[i][k] = ∂F_i/∂x_k`.
    fn jacobian(&self, x: &[T]) -> SmallMat<T> {
        self.core().jacobian(x)
    }

    /// Points whose trajectories are fixed by construction (outside the support).
    fn outside_support(&self, x: &[T]) -> bool {
        !self.geometry().in_support(x)
    }

    fn zeros_like(&self) -> Self {
        Self::from_core(SplineCore::zeros(self.geometry().clone())).expect("zero field")
    }

    fn is_zero(&self) -> bool {
        self.core().is_zero()
    }

    fn scale(&self, s: T) -> Self {
        Self::from_core(self.core().map_coeffs(|c| c * s)).expect("scaled field")
    }

    fn add(&self, other: &Self) -> Result<Self> {
        Self::from_core(self.core().zip_coeffs(other.core(), |a, b| a + b)?)
    }

    fn sub(&self, other: &Self) -> Result<Self> {
        Self::from_core(self.core().zip_coeffs(other.core(), |a, b| a - b)?)
    }

    /// `self + s · other`.
    fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        Self::from_core(self.core().zip_coeffs(other.core(), |a, b| a + s * b)?)
    }

    /// Interpolant of node values on this field's grid.
    fn with_node_values(&self, values: &[T]) -> Result<Self> {
        Self::from_core(SplineCore::from_node_values(self.geometry().clone(), values)?)
    }

    fn node_values(&self) -> Vec<T> {
        self.core().node_values()
    }

    /// Upper estimate of `α(F) = sup_x ‖DF(x)‖_op`.
    fn alpha(&self) -> T {
        self.alpha_raw() * T::lit(ALPHA_SAFETY)
    }

    /// Lattice maximum of `‖DF‖_op` before the safety factor.
    fn alpha_raw(&self) -> T {
        self.core().lattice_sup(ALPHA_LATTICE).1
    }

    /// Lattice estimate of `sup_x |F(x)|`.
    fn sup_norm(&self) -> T {
        self.core().lattice_sup(ALPHA_LATTICE).0
    }

    /// `sup |F| + sup ‖DF‖_op`, estimated on a lattice of pitch `h/2`.
    fn cr_seminorm(&self) -> T {
        let (a, b) = self.core().lattice_sup(2);
        a + b
    }

    /// `x ↦ F(x + φ(x))` resampled onto this field's grid.
    fn compose_displacement(&self, phi: &Self) -> Result<Resampled<T, Self>> {
        if phi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: phi.dim(),
            });
        }
        let geom = self.geometry();
        let dim = geom.dim();
        let mut values = vec![T::zero(); geom.node_count() * dim];
        values.par_chunks_mut(dim).enumerate().try_for_each(|(node, slot)| {
            let mut y = geom.node_position(node);
            let d = phi.eval(&y);
            for (yi, di) in y.iter_mut().zip(&d) {
                *yi += *di;
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("composition argument".into()));
            }
            self.eval_into(&y, slot);
            Ok(())
        })?;
        let tolerance = resampling_tolerance(geom, &values);
        Ok(Resampled {
            field: self.with_node_values(&values)?,
            tolerance,
        })
    }
}

/// Seminorms on field values, mirroring [`crate::lp_space::Seminorm`] for vectors.
pub trait FieldSeminorm<T: Real, F: VectorField<T>>: Sync {
    fn tag(&self) -> crate::lp_space::SeminormTag;
    fn eval(&self, f: &F) -> T;
}

/// The seminorm `α`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlphaSeminorm;

/// The `C^1` sup-seminorm `sup |F| + sup ‖DF‖`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrSeminorm;

impl<T: Real, F: VectorField<T>> FieldSeminorm<T, F> for AlphaSeminorm {
    fn tag(&self) -> crate::lp_space::SeminormTag {
        crate::lp_space::SeminormTag::FieldAlpha
    }
    fn eval(&self, f: &F) -> T {
        f.alpha()
    }
}

impl<T: Real, F: VectorField<T>> FieldSeminorm<T, F> for CrSeminorm {
    fn tag(&self) -> crate::lp_space::SeminormTag {
        crate::lp_space::SeminormTag::FieldCr
    }
    fn eval(&self, f: &F) -> T {
        f.cr_seminorm()
    }
}

pub fn vf_eval<T: Real, F: VectorField<T>>(f: &F, x: &[T]) -> Vec<T> {
    f.eval(x)
}

pub fn vf_jacobian<T: Real, F: VectorField<T>>(f: &F, x: &[T]) -> SmallMat<T> {
    f.jacobian(x)
}

pub fn vf_alpha<T: Real, F: VectorField<T>>(f: &F) -> T {
    f.alpha()
}

pub fn vf_compose_displacement<T: Real, F: VectorField<T>>(f: &F, phi: &F) -> Result<Resampled<T, F>> {
    f.compose_displacement(phi)
}
