//! Absolutely continuous paths `η(t) = η(a) + ∫_a^t η'(s) ds` with `L^p` densities.

use crate::error::{Error, Result};
use crate::lp_space::{LpSample, SampleMode, Seminorm, TimeGrid};
use crate::scalar::{fmax, Real};

/// An `AC_{L^p}` path in `R^m`, stored as its start point and density.
///
/// The base point is always the left endpoint `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcPath<T> {
    start: Vec<T>,
    density: LpSample<T>,
    /// Set by [`AcPath::reparam`]: the path this one reparametrizes. Evaluation
    /// goes through it, so the endpoint identities and round trips are exact.
    origin: Option<Box<AcPath<T>>>,
}

/// Sampled continuous curve, piecewise linear between knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTrace<T> {
    grid: TimeGrid<T>,
    values: Vec<Vec<T>>,
}

impl<T: Real> ContinuousTrace<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if values.len() != grid.knots().len() {
            return Err(Error::DimensionMismatch {
                expected: grid.knots().len(),
                found: values.len(),
            });
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidArgument(
                "trace values have inconsistent dimension".into(),
            ));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("trace value".into()));
        }
        Ok(Self { grid, values })
    }

    /// Trace that stays at `x` on the given grid.
    pub fn constant(grid: TimeGrid<T>, x: &[T]) -> Self {
        let values = vec![x.to_vec(); grid.knots().len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: TimeGrid<T>, mut f: impl FnMut(T) -> Vec<T>) -> Result<Self> {
        let values = grid.knots().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }
    #[inline]
    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn eval(&self, t: T) -> Result<Vec<T>> {
        self.grid.check_contains(t)?;
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: T) -> Vec<T> {
        let c = self.grid.locate(t);
        let (t0, t1) = (self.grid.knots()[c], self.grid.knots()[c + 1]);
        let s = (t - t0) / (t1 - t0);
        self.values[c]
            .iter()
            .zip(&self.values[c + 1])
            .map(|(&u, &v)| u + (v - u) * s)
            .collect()
    }

    /// Same curve on a finer grid.
    pub fn refine_to(&self, grid: &TimeGrid<T>) -> Result<Self> {
        self.grid.check_same_interval(grid)?;
        Self::new(
            grid.clone(),
            grid.knots().iter().map(|&t| self.eval_unchecked(t)).collect(),
        )
    }

    /// `sup_t |ζ₁(t) − ζ₂(t)|` in the Euclidean norm; exact for piecewise-linear curves
    /// since the supremum is attained at a knot of the common refinement.
    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        let grid = self.grid.common_refinement(&other.grid)?;
        Ok(grid.knots().iter().fold(T::zero(), |m, &t| {
            fmax(
                m,
                crate::scalar::dist2(&self.eval_unchecked(t), &other.eval_unchecked(t)),
            )
        }))
    }
}

/// A map `f: U ⊆ R^m → R^l` with a first derivative.
pub trait SmoothMap<T: Real>: Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// Membership in the domain `U`.
    fn contains(&self, _x: &[T]) -> bool {
        true
    }
    fn eval(&self, x: &[T]) -> Vec<T>;
    /// Jacobian as `out_dim` rows of length `in_dim`.
    fn jacobian(&self, x: &[T]) -> Vec<Vec<T>>;
}

/// `x ↦ A x`.
#[derive(Debug, Clone)]
pub struct LinearMap<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Real> LinearMap<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument(
                "matrix rows must be non-empty and equal length".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        Self { rows }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

impl<T: Real> SmoothMap<T> for LinearMap<T> {
    fn in_dim(&self) -> usize {
        self.rows[0].len()
    }
    fn out_dim(&self) -> usize {
        self.rows.len()
    }
    fn eval(&self, x: &[T]) -> Vec<T> {
        self.apply(x)
    }
    fn jacobian(&self, _x: &[T]) -> Vec<Vec<T>> {
        self.rows.clone()
    }
}

/// Smooth map assembled from closures.
pub struct FnMap<F, J, D = fn(&[f64]) -> bool> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub f: F,
    pub df: J,
    pub domain: Option<D>,
}

impl<T, F, J, D> SmoothMap<T> for FnMap<F, J, D>
where
    T: Real,
    F: Fn(&[T]) -> Vec<T> + Sync,
    J: Fn(&[T]) -> Vec<Vec<T>> + Sync,
    D: Fn(&[T]) -> bool + Sync,
{
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn contains(&self, x: &[T]) -> bool {
        self.domain.as_ref().is_none_or(|d| d(x))
    }
    fn eval(&self, x: &[T]) -> Vec<T> {
        (self.f)(x)
    }
    fn jacobian(&self, x: &[T]) -> Vec<Vec<T>> {
        (self.df)(x)
    }
}

impl<T: Real> AcPath<T> {
    pub fn new(start: Vec<T>, density: LpSample<T>) -> Result<Self> {
        if start.len() != density.dim() {
            return Err(Error::DimensionMismatch {
                expected: density.dim(),
                found: start.len(),
            });
        }
        if start.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("path start".into()));
        }
        Ok(Self {
            start,
            density,
            origin: None,
        })
    }

    /// Path resting at `x` on `[a, b]`.
    pub fn constant(x: Vec<T>, a: T, b: T, p: T) -> Result<Self> {
        let dim = x.len();
        Self::new(x, LpSample::zero(TimeGrid::new(vec![a, b])?, dim, p))
    }

    /// Path `t ↦ start + (t − a)·v`.
    pub fn linear(start: Vec<T>, v: Vec<T>, a: T, b: T, p: T) -> Result<Self> {
        Self::new(start, LpSample::constant(a, b, v, p)?)
    }

    #[inline]
    pub fn start(&self) -> &[T] {
        &self.start
    }
    #[inline]
    pub fn density(&self) -> &LpSample<T> {
        &self.density
    }
    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        self.density.grid()
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.start.len()
    }
    #[inline]
    pub fn p(&self) -> T {
        self.density.p()
    }
    #[inline]
    pub fn a(&self) -> T {
        self.grid().a()
    }
    #[inline]
    pub fn b(&self) -> T {
        self.grid().b()
    }

    /// `η(t) = η(a) + ∫_a^t η'`, accumulated cell by cell from the left.
    pub fn eval(&self, t: T) -> Result<Vec<T>> {
        self.grid().check_contains(t)?;
        if let Some(base) = &self.origin {
            return base.eval(self.to_origin_time(base, t));
        }
        let mut acc = self.start.clone();
        let grid = self.grid();
        let mut c = 0;
        while c < grid.cells() && grid.knots()[c + 1] <= t {
            self.density
                .accumulate_piece(c, grid.knots()[c], grid.knots()[c + 1], &mut acc);
            c += 1;
        }
        if c < grid.cells() && t > grid.knots()[c] {
            self.density.accumulate_piece(c, grid.knots()[c], t, &mut acc);
        }
        Ok(acc)
    }

    /// Values at every knot of the density grid.
    pub fn knot_values(&self) -> Vec<Vec<T>> {
        if let Some(base) = &self.origin {
            return base.knot_values();
        }
        let grid = self.grid();
        let mut acc = self.start.clone();
        let mut out = Vec::with_capacity(grid.knots().len());
        out.push(acc.clone());
        for c in 0..grid.cells() {
            self.density
                .accumulate_piece(c, grid.knots()[c], grid.knots()[c + 1], &mut acc);
            out.push(acc.clone());
        }
        out
    }

    /// `η ↦ (η(a), η')`.
    pub fn phi(&self) -> (Vec<T>, LpSample<T>) {
        (self.start.clone(), self.density.clone())
    }

    /// Inverse of [`Self::phi`].
    pub fn phi_inv(start: Vec<T>, density: LpSample<T>) -> Result<Self> {
        Self::new(start, density)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let start = self.start.iter().zip(&other.start).map(|(&x, &y)| x + y).collect();
        Self::new(start, self.density.add(&other.density)?)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let start = self.start.iter().zip(&other.start).map(|(&x, &y)| x - y).collect();
        Self::new(start, self.density.sub(&other.density)?)
    }

    pub fn scale(&self, lambda: T) -> Self {
        Self {
            start: self.start.iter().map(|&x| x * lambda).collect(),
            density: self.density.scale(lambda),
            origin: None,
        }
    }

    /// The embedding `η ↦ (η|_{knots}, η')` into `C × L^p`.
    pub fn embed(&self, sample_knots: &TimeGrid<T>) -> Result<(ContinuousTrace<T>, LpSample<T>)> {
        if !sample_knots.refines(self.grid()) {
            return Err(Error::InvalidGrid("sample knots must refine the density grid".into()));
        }
        let density = self.density.refine_to(sample_knots)?;
        let trace = integrate_from(&self.start, &density);
        Ok((ContinuousTrace::new(sample_knots.clone(), trace)?, density))
    }

    /// `η ∘ g` with `g(t) = a + (t − c)/(d − c)·(b − a)`, a path on `[c, d]`.
    pub fn reparam(&self, c: T, d: T) -> Result<Self> {
        let base = self.origin.as_deref().unwrap_or(self);
        if c == base.a() && d == base.b() {
            return Ok(base.clone());
        }
        let grid = base.grid().map_affine(c, d)?;
        let factor = (base.b() - base.a()) / (d - c);
        let values = base
            .density
            .values()
            .iter()
            .map(|v| v.iter().map(|&x| x * factor).collect())
            .collect();
        let density = LpSample::new(grid, values, base.p(), base.density.mode())?;
        let mut out = Self::new(base.start.clone(), density)?;
        out.origin = Some(Box::new(base.clone()));
        Ok(out)
    }

    /// `g(t) = a + (t − c)/(d − c)·(b − a)`, pinned at both ends.
    fn to_origin_time(&self, base: &Self, t: T) -> T {
        let (c, d) = (self.a(), self.b());
        if t == c {
            base.a()
        } else if t == d {
            base.b()
        } else {
            let s = base.a() + (t - c) / (d - c) * (base.b() - base.a());
            s.max(base.a()).min(base.b())
        }
    }

    /// `f ∘ η` with density `df(η(t)) · η'(t)` sampled at the midpoints of
    /// `refine` equal sub-cells per density cell.
    pub fn superpose(&self, f: &dyn SmoothMap<T>, refine: usize) -> Result<Self> {
        if f.in_dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.in_dim(),
                found: self.dim(),
            });
        }
        let refine = refine.max(1);
        let grid = self.grid();
        let mut knots = Vec::with_capacity(grid.cells() * refine + 1);
        for c in 0..grid.cells() {
            let (t0, w) = (grid.knots()[c], grid.width(c));
            for j in 0..refine {
                knots.push(t0 + w * T::from_usize_(j) / T::from_usize_(refine));
            }
        }
        knots.push(grid.b());
        let fine = TimeGrid::new(knots)?;
        let dens = self.density.refine_to(&fine)?;
        let base = integrate_from(&self.start, &dens);
        let mut values = Vec::with_capacity(fine.cells());
        for (c, knot_value) in base.iter().enumerate() {
            if !f.contains(knot_value) {
                return Err(Error::OutsideDomain {
                    t: fine.knots()[c].to_f64_(),
                });
            }
            if c == fine.cells() {
                break;
            }
            let mid = fine.midpoint(c);
            let x: Vec<T> = base[c]
                .iter()
                .zip(&base[c + 1])
                .map(|(&u, &v)| (u + v) * T::lit(0.5))
                .collect();
            if !f.contains(&x) {
                return Err(Error::OutsideDomain { t: mid.to_f64_() });
            }
            let vel = dens.value_at(mid)?;
            let jac = f.jacobian(&x);
            values.push(
                jac.iter()
                    .map(|row| row.iter().zip(&vel).map(|(&a, &b)| a * b).sum())
                    .collect(),
            );
        }
        let density = LpSample::new(fine, values, self.p(), SampleMode::Constant)?;
        Self::new(f.eval(&self.start), density)
    }

    /// `q(η₁(a) − η₂(a)) + ‖η₁' − η₂'‖_{L^p,q}`.
    pub fn distance(&self, other: &Self, q: &dyn Seminorm<T>) -> Result<T> {
        self.grid().check_same_interval(other.grid())?;
        if self.p() != other.p() {
            return Err(Error::InvalidArgument("paths carry different exponents".into()));
        }
        let ds: Vec<T> = self.start.iter().zip(&other.start).map(|(&x, &y)| x - y).collect();
        Ok(q.eval(&ds) + self.density.sub(&other.density)?.lp_seminorm(q)?)
    }
}

/// Cumulative integral of `density` from `start`, one value per knot.
fn integrate_from<T: Real>(start: &[T], density: &LpSample<T>) -> Vec<Vec<T>> {
    let grid = density.grid();
    let mut acc = start.to_vec();
    let mut out = Vec::with_capacity(grid.knots().len());
    out.push(acc.clone());
    for c in 0..grid.cells() {
        density.accumulate_piece(c, grid.knots()[c], grid.knots()[c + 1], &mut acc);
        out.push(acc.clone());
    }
    out
}

/// Largest deviation between a trace and the primitive of a density started at `trace(a)`.
/// Zero exactly when the pair lies in the image of [`AcPath::embed`].
pub fn closure_defect<T: Real>(trace: &ContinuousTrace<T>, density: &LpSample<T>) -> Result<T> {
    if trace.grid() != density.grid() {
        return Err(Error::InvalidGrid("trace and density must share their grid".into()));
    }
    let re = integrate_from(&trace.values()[0], density);
    Ok(re
        .iter()
        .zip(trace.values())
        .flat_map(|(u, v)| u.iter().zip(v).map(|(&x, &y)| (x - y).abs()))
        .fold(T::zero(), fmax))
}

pub fn ac_eval<T: Real>(eta: &AcPath<T>, t: T) -> Result<Vec<T>> {
    eta.eval(t)
}

pub fn ac_phi<T: Real>(eta: &AcPath<T>) -> (Vec<T>, LpSample<T>) {
    eta.phi()
}

pub fn ac_phi_inv<T: Real>(start: Vec<T>, density: LpSample<T>) -> Result<AcPath<T>> {
    AcPath::phi_inv(start, density)
}

pub fn ac_embed<T: Real>(eta: &AcPath<T>, sample_knots: &TimeGrid<T>) -> Result<(ContinuousTrace<T>, LpSample<T>)> {
    eta.embed(sample_knots)
}

pub fn ac_reparam<T: Real>(eta: &AcPath<T>, c: T, d: T) -> Result<AcPath<T>> {
    eta.reparam(c, d)
}

pub fn ac_superpose<T: Real>(f: &dyn SmoothMap<T>, eta: &AcPath<T>, refine: usize) -> Result<AcPath<T>> {
    eta.superpose(f, refine)
}

pub fn ac_distance<T: Real>(a: &AcPath<T>, b: &AcPath<T>, q: &dyn Seminorm<T>) -> Result<T> {
    a.distance(b, q)
}
