//! Step-function and piecewise-linear representatives of `L^p([a,b], R^m)`.
//!
//! An [`LpSample`] is a concrete representative of an equivalence class of
//! `p`-integrable functions. Piecewise-constant samples admit exact quadrature
//! and exact subdivision, which keeps every seminorm identity in this module
//! free of discretisation error.

use crate::error::{Error, Result};
use crate::scalar::{fmax, Real};

/// Strictly increasing knots `a = s_0 < s_1 < … < s_M = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    knots: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(knots: Vec<T>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidGrid("need at least two knots".into()));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidGrid("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("knots must be strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    /// `cells` equal cells on `[a, b]`; the last knot is exactly `b`.
    pub fn uniform(a: T, b: T, cells: usize) -> Result<Self> {
        if cells == 0 || !(a < b) {
            return Err(Error::InvalidGrid(format!(
                "uniform grid with {cells} cells on [{a}, {b}]"
            )));
        }
        let n = T::from_usize_(cells);
        let mut knots: Vec<T> = (0..cells).map(|i| a + (b - a) * T::from_usize_(i) / n).collect();
        knots.push(b);
        Self::new(knots)
    }

    pub fn unit(cells: usize) -> Self {
        Self::uniform(T::zero(), T::one(), cells).expect("unit grid")
    }

    #[inline]
    pub fn a(&self) -> T {
        self.knots[0]
    }

    #[inline]
    pub fn b(&self) -> T {
        *self.knots.last().unwrap()
    }

    #[inline]
    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.knots.len() - 1
    }

    #[inline]
    pub fn width(&self, cell: usize) -> T {
        self.knots[cell + 1] - self.knots[cell]
    }

    #[inline]
    pub fn midpoint(&self, cell: usize) -> T {
        (self.knots[cell] + self.knots[cell + 1]) * T::lit(0.5)
    }

    pub fn contains(&self, t: T) -> bool {
        t >= self.a() && t <= self.b()
    }

    pub fn check_contains(&self, t: T) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t: t.to_f64_(),
                a: self.a().to_f64_(),
                b: self.b().to_f64_(),
            })
        }
    }

    /// Index of the cell `[s_i, s_{i+1})` containing `t`; `b` belongs to the last cell.
    pub fn locate(&self, t: T) -> usize {
        let idx = self.knots.partition_point(|&k| k <= t);
        idx.saturating_sub(1).min(self.cells() - 1)
    }

    pub fn same_interval(&self, other: &Self) -> bool {
        self.a() == other.a() && self.b() == other.b()
    }

    pub fn check_same_interval(&self, other: &Self) -> Result<()> {
        if self.same_interval(other) {
            Ok(())
        } else {
            Err(Error::IntervalMismatch {
                a0: self.a().to_f64_(),
                b0: self.b().to_f64_(),
                a1: other.a().to_f64_(),
                b1: other.b().to_f64_(),
            })
        }
    }

    /// Union of both knot sets. Both grids must share their endpoints.
    pub fn common_refinement(&self, other: &Self) -> Result<Self> {
        self.check_same_interval(other)?;
        let mut knots = Vec::with_capacity(self.knots.len() + other.knots.len());
        let (mut i, mut j) = (0, 0);
        while i < self.knots.len() || j < other.knots.len() {
            let next = match (self.knots.get(i), other.knots.get(j)) {
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(&x), Some(&y)) if y < x => {
                    j += 1;
                    y
                }
                (Some(&x), Some(_)) => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            if knots.last().is_none_or(|&l| next > l) {
                knots.push(next);
            }
        }
        Self::new(knots)
    }

    /// True when every knot of `coarse` is a knot of `self`.
    pub fn refines(&self, coarse: &Self) -> bool {
        self.same_interval(coarse)
            && coarse
                .knots
                .iter()
                .all(|k| self.knots.binary_search_by(|x| x.partial_cmp(k).unwrap()).is_ok())
    }

    /// Affine image of the grid on `[c, d]`; endpoints map exactly.
    pub fn map_affine(&self, c: T, d: T) -> Result<Self> {
        if !(c < d) {
            return Err(Error::InvalidArgument(format!(
                "reparametrisation needs c < d, got [{c}, {d}]"
            )));
        }
        let (a, b) = (self.a(), self.b());
        let last = self.knots.len() - 1;
        let knots = self
            .knots
            .iter()
            .enumerate()
            .map(|(i, &s)| match i {
                0 => c,
                i if i == last => d,
                _ => c + (s - a) * (d - c) / (b - a),
            })
            .collect();
        Self::new(knots)
    }

    /// Grid of `t ↦ (k + t)/n` restricted to `[0, 1]`, together with the source
    /// cell of every new cell. Requires the grid to live on `[0, 1]`.
    pub fn subdivision_window(&self, n: usize, k: usize) -> Result<(Self, Vec<usize>)> {
        if n == 0 || k >= n {
            return Err(Error::InvalidArgument(format!(
                "subdivision index k = {k} with n = {n}"
            )));
        }
        if self.a() != T::zero() || self.b() != T::one() {
            return Err(Error::InvalidArgument("subdivision requires a grid on [0, 1]".into()));
        }
        let nn = T::from_usize_(n);
        let kk = T::from_usize_(k);
        let lo = kk / nn;
        let hi = (kk + T::one()) / nn;
        let mut knots = vec![T::zero()];
        for &s in &self.knots {
            if s > lo && s < hi {
                let t = s * nn - kk;
                if t > *knots.last().unwrap() && t < T::one() {
                    knots.push(t);
                }
            }
        }
        knots.push(T::one());
        let grid = Self::new(knots)?;
        let sources = (0..grid.cells())
            .map(|c| self.locate((kk + grid.midpoint(c)) / nn))
            .collect();
        Ok((grid, sources))
    }
}

/// Continuous seminorm on `R^m`.
///
/// Implement this trait to plug additional seminorms into the `L^p` calculus.
pub trait Seminorm<T: Real>: Send + Sync {
    fn tag(&self) -> SeminormTag;
    /// Required input dimension, when the seminorm has one.
    fn dim(&self) -> Option<usize> {
        None
    }
    fn eval(&self, v: &[T]) -> T;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeminormTag {
    Euclidean,
    Sup,
    Weighted,
    FieldAlpha,
    FieldCr,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl<T: Real> Seminorm<T> for Euclidean {
    fn tag(&self) -> SeminormTag {
        SeminormTag::Euclidean
    }
    fn eval(&self, v: &[T]) -> T {
        crate::scalar::norm2(v)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SupNorm;

impl<T: Real> Seminorm<T> for SupNorm {
    fn tag(&self) -> SeminormTag {
        SeminormTag::Sup
    }
    fn eval(&self, v: &[T]) -> T {
        v.iter().fold(T::zero(), |m, x| fmax(m, x.abs()))
    }
}

/// `sqrt(Σ w_i v_i²)` with nonnegative weights; a genuine seminorm when some weights vanish.
#[derive(Debug, Clone)]
pub struct Weighted<T> {
    weights: Vec<T>,
}

impl<T: Real> Weighted<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        Ok(Self { weights })
    }
}

impl<T: Real> Seminorm<T> for Weighted<T> {
    fn tag(&self) -> SeminormTag {
        SeminormTag::Weighted
    }
    fn dim(&self) -> Option<usize> {
        Some(self.weights.len())
    }
    fn eval(&self, v: &[T]) -> T {
        self.weights.iter().zip(v).map(|(&w, &x)| w * x * x).sum::<T>().sqrt()
    }
}

/// Interpretation of the stored values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// One value per cell.
    Constant,
    /// One value per knot, linear in between.
    Linear,
}

/// Finite representative of `[γ] ∈ L^p([a,b], R^m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSample<T> {
    grid: TimeGrid<T>,
    dim: usize,
    values: Vec<Vec<T>>,
    p: T,
    mode: SampleMode,
}

/// Validates an exponent `p ∈ [1, ∞]`.
pub fn check_exponent<T: Real>(p: T) -> Result<()> {
    if p >= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("exponent p = {p} must lie in [1, inf]")))
    }
}

// Composite 5-point Gauss–Legendre rule used for non-polynomial integrands on linear cells.
const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];
const GAUSS_PANELS: usize = 16;

impl<T: Real> LpSample<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<Vec<T>>, p: T, mode: SampleMode) -> Result<Self> {
        check_exponent(p)?;
        let expected = match mode {
            SampleMode::Constant => grid.cells(),
            SampleMode::Linear => grid.knots().len(),
        };
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        let dim = values[0].len();
        if let Some(bad) = values.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sample value".into()));
        }
        Ok(Self {
            grid,
            dim,
            values,
            p,
            mode,
        })
    }

    pub fn zero(grid: TimeGrid<T>, dim: usize, p: T) -> Self {
        let values = vec![vec![T::zero(); dim]; grid.cells()];
        Self::new(grid, values, p, SampleMode::Constant).expect("zero sample")
    }

    /// Constant function `value` on `[a, b]` (single cell).
    pub fn constant(a: T, b: T, value: Vec<T>, p: T) -> Result<Self> {
        Self::new(TimeGrid::new(vec![a, b])?, vec![value], p, SampleMode::Constant)
    }

    /// Piecewise-constant sample from a closure evaluated at cell midpoints.
    pub fn from_cell_fn(grid: TimeGrid<T>, p: T, f: impl Fn(T) -> Vec<T>) -> Result<Self> {
        let values = (0..grid.cells()).map(|c| f(grid.midpoint(c))).collect();
        Self::new(grid, values, p, SampleMode::Constant)
    }

    /// Piecewise-linear sample from a closure evaluated at the knots.
    pub fn from_knot_fn(grid: TimeGrid<T>, p: T, f: impl Fn(T) -> Vec<T>) -> Result<Self> {
        let values = grid.knots().iter().map(|&t| f(t)).collect();
        Self::new(grid, values, p, SampleMode::Linear)
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }
    #[inline]
    pub fn p(&self) -> T {
        self.p
    }
    #[inline]
    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    pub fn with_exponent(mut self, p: T) -> Result<Self> {
        check_exponent(p)?;
        self.p = p;
        Ok(self)
    }

    /// Value of the representative at `t` (right-continuous for step functions).
    pub fn value_at(&self, t: T) -> Result<Vec<T>> {
        self.grid.check_contains(t)?;
        let c = self.grid.locate(t);
        Ok(match self.mode {
            SampleMode::Constant => self.values[c].clone(),
            SampleMode::Linear => self.lerp_in_cell(c, t),
        })
    }

    fn lerp_in_cell(&self, c: usize, t: T) -> Vec<T> {
        let (t0, t1) = (self.grid.knots()[c], self.grid.knots()[c + 1]);
        let s = (t - t0) / (t1 - t0);
        self.values[c]
            .iter()
            .zip(&self.values[c + 1])
            .map(|(&u, &v)| u + (v - u) * s)
            .collect()
    }

    /// Representation on a finer grid; exact for both modes.
    pub fn refine_to(&self, grid: &TimeGrid<T>) -> Result<Self> {
        if !grid.refines(&self.grid) {
            return Err(Error::InvalidGrid("target grid does not refine the sample grid".into()));
        }
        let values = match self.mode {
            SampleMode::Constant => (0..grid.cells())
                .map(|c| self.values[self.grid.locate(grid.midpoint(c))].clone())
                .collect(),
            SampleMode::Linear => grid
                .knots()
                .iter()
                .map(|&t| self.lerp_in_cell(self.grid.locate(t), t))
                .collect(),
        };
        Self::new(grid.clone(), values, self.p, self.mode)
    }

    pub fn scale(&self, lambda: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().flatten().for_each(|x| *x *= lambda);
        out
    }

    /// Pointwise combination on the common refinement; both samples must share mode.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.mode != other.mode {
            return Err(Error::InvalidArgument(
                "cannot combine constant and linear samples".into(),
            ));
        }
        let grid = self.grid.common_refinement(&other.grid)?;
        let (a, b) = (self.refine_to(&grid)?, other.refine_to(&grid)?);
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(u, v)| u.iter().zip(v).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Self::new(grid, values, self.p, self.mode)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    /// Equality of `L^p` classes: agreement of the common refinement's values within `tol`.
    pub fn ae_eq(&self, other: &Self, tol: T) -> bool {
        match self.sub(other) {
            Ok(d) => d.values.iter().flatten().all(|x| x.abs() <= tol),
            Err(_) => false,
        }
    }

    fn check_seminorm(&self, q: &dyn Seminorm<T>) -> Result<()> {
        match q.dim() {
            Some(d) if d != self.dim => Err(Error::DimensionMismatch {
                expected: d,
                found: self.dim,
            }),
            _ => Ok(()),
        }
    }

    /// `(∫_a^b q(f(t))^p dt)^{1/p}`, or the essential supremum for `p = ∞`.
    pub fn lp_seminorm(&self, q: &dyn Seminorm<T>) -> Result<T> {
        self.lp_seminorm_with(q, self.p)
    }

    /// Same as [`Self::lp_seminorm`] with an explicit exponent.
    pub fn lp_seminorm_with(&self, q: &dyn Seminorm<T>, p: T) -> Result<T> {
        check_exponent(p)?;
        self.check_seminorm(q)?;
        if p.is_infinite() {
            return self.ess_sup_seminorm(q);
        }
        let total = match self.mode {
            SampleMode::Constant => (0..self.grid.cells())
                .map(|c| self.grid.width(c) * q.eval(&self.values[c]).powf(p))
                .sum::<T>(),
            SampleMode::Linear => (0..self.grid.cells())
                .map(|c| self.gauss_cell(c, |v| q.eval(v).powf(p)))
                .sum::<T>(),
        };
        Ok(if p == T::one() { total } else { total.powf(p.recip()) })
    }

    fn gauss_cell(&self, c: usize, g: impl Fn(&[T]) -> T) -> T {
        let (t0, t1) = (self.grid.knots()[c], self.grid.knots()[c + 1]);
        let panel = (t1 - t0) / T::from_usize_(GAUSS_PANELS);
        let half = panel * T::lit(0.5);
        let mut acc = T::zero();
        let mut v = vec![T::zero(); self.dim];
        for j in 0..GAUSS_PANELS {
            let mid = t0 + panel * (T::from_usize_(j) + T::lit(0.5));
            for (&x, &w) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS) {
                let t = mid + half * T::lit(x);
                let s = (t - t0) / (t1 - t0);
                for (i, vi) in v.iter_mut().enumerate() {
                    let (u0, u1) = (self.values[c][i], self.values[c + 1][i]);
                    *vi = u0 + (u1 - u0) * s;
                }
                acc += half * T::lit(w) * g(&v);
            }
        }
        acc
    }

    /// Essential supremum of `q ∘ f`: a cell maximum, or a knot maximum for linear samples
    /// (a convex function on a segment peaks at an endpoint).
    pub fn ess_sup_seminorm(&self, q: &dyn Seminorm<T>) -> Result<T> {
        self.check_seminorm(q)?;
        Ok(self.values.iter().fold(T::zero(), |m, v| fmax(m, q.eval(v))))
    }

    /// Exact integral over `[t0, t1] ⊆ [a, b]`.
    pub fn weak_integral(&self, t0: T, t1: T) -> Result<Vec<T>> {
        if t0 > t1 {
            return Err(Error::InvalidArgument(format!(
                "integration bounds reversed: {t0} > {t1}"
            )));
        }
        self.grid.check_contains(t0)?;
        self.grid.check_contains(t1)?;
        let mut acc = vec![T::zero(); self.dim];
        if t0 == t1 {
            return Ok(acc);
        }
        let first = self.grid.locate(t0);
        let last = self.grid.locate(t1);
        for c in first..=last {
            let lo = fmax(self.grid.knots()[c], t0);
            let hi = self.grid.knots()[c + 1].min(t1);
            if hi > lo {
                self.accumulate_piece(c, lo, hi, &mut acc);
            }
        }
        Ok(acc)
    }

    /// Adds `∫_lo^hi f` for `[lo, hi]` inside cell `c`.
    pub(crate) fn accumulate_piece(&self, c: usize, lo: T, hi: T, acc: &mut [T]) {
        let w = hi - lo;
        match self.mode {
            SampleMode::Constant => {
                for (a, &v) in acc.iter_mut().zip(&self.values[c]) {
                    *a += w * v;
                }
            }
            SampleMode::Linear => {
                let (t0, t1) = (self.grid.knots()[c], self.grid.knots()[c + 1]);
                let s = ((lo + hi) * T::lit(0.5) - t0) / (t1 - t0);
                for (i, a) in acc.iter_mut().enumerate() {
                    let (u0, u1) = (self.values[c][i], self.values[c + 1][i]);
                    *a += w * (u0 + (u1 - u0) * s);
                }
            }
        }
    }

    /// `γ_{n,k}(t) = γ((k + t)/n) / n` on `[0, 1]`.
    pub fn subdivide(&self, n: usize, k: usize) -> Result<Self> {
        let (grid, sources) = self.grid.subdivision_window(n, k)?;
        let inv = T::from_usize_(n).recip();
        let nn = T::from_usize_(n);
        let kk = T::from_usize_(k);
        let values = match self.mode {
            SampleMode::Constant => sources
                .iter()
                .map(|&c| self.values[c].iter().map(|&v| v * inv).collect())
                .collect(),
            SampleMode::Linear => grid
                .knots()
                .iter()
                .map(|&t| {
                    let s = (kk + t) / nn;
                    self.lerp_in_cell(self.grid.locate(s), s)
                        .into_iter()
                        .map(|v| v * inv)
                        .collect()
                })
                .collect(),
        };
        Self::new(grid, values, self.p, self.mode)
    }
}

/// Free-function form of [`LpSample::lp_seminorm`].
pub fn lp_seminorm<T: Real>(f: &LpSample<T>, q: &dyn Seminorm<T>) -> Result<T> {
    f.lp_seminorm(q)
}

/// Free-function form of [`LpSample::ess_sup_seminorm`].
pub fn ess_sup_seminorm<T: Real>(f: &LpSample<T>, q: &dyn Seminorm<T>) -> Result<T> {
    f.ess_sup_seminorm(q)
}

/// Free-function form of [`LpSample::weak_integral`].
pub fn weak_integral<T: Real>(f: &LpSample<T>, t0: T, t1: T) -> Result<Vec<T>> {
    f.weak_integral(t0, t1)
}

/// Free-function form of [`LpSample::subdivide`].
pub fn subdivide<T: Real>(f: &LpSample<T>, n: usize, k: usize) -> Result<LpSample<T>> {
    f.subdivide(n, k)
}
