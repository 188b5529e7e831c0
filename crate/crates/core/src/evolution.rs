//! The evolution map: Picard iteration for `η(t) = ∫_0^t γ(s)∘(id + η(s)) ds`
//! inside the contraction ball, and the subdivision scheme that glues local
//! solutions with the group product.
//!
//! Time integration follows the step representation of `γ`: on a solver cell
//! of width `w` the integrand is sampled at the midpoint of the current
//! iterate, so the discrete operator
//!
//! ```text
//! T(γ, x, ζ)(s_{i+1}) = x + Σ_{c ≤ i} w_c · γ_c((ζ(s_c) + ζ(s_{c+1})) / 2)
//! ```
//!
//! is a contraction with constant `Σ w_c α(γ_c)` in the sup norm over knots.

use rayon::prelude::*;

use crate::ac_path::{AcPath, ContinuousTrace};
use crate::diff_group::{star_fields, GroupPath};
use crate::error::{Error, Result};
use crate::lp_space::{Euclidean, LpSample, SampleMode, TimeGrid};
use crate::scalar::{dist2, fmax, Real};
use crate::vector_field::{resampling_tolerance, CrSeminorm, VectorField};

/// Solver settings shared by [`picard_point`], [`local_evolve`] and [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions<T> {
    /// Per-segment contraction budget `L_max`.
    pub l_max: T,
    /// Picard stopping threshold on the sup change over knots.
    pub tol: T,
    pub max_iter: usize,
    /// Uniform time cells added to the grid of `γ` on `[0, 1]`.
    pub time_cells: usize,
    pub forced_n: Option<usize>,
    pub max_subdivision: usize,
    pub compute_residual: bool,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            l_max: T::lit(0.5),
            tol: T::lit(1e-12),
            max_iter: 200,
            time_cells: 128,
            forced_n: None,
            max_subdivision: 1 << 16,
            compute_residual: true,
        }
    }
}

/// Piecewise-constant-in-time velocity `[γ] ∈ L^p([0,1], C_K)`.
#[derive(Debug, Clone)]
pub struct TimeVelocity<T, F> {
    grid: TimeGrid<T>,
    fields: Vec<F>,
    alphas: Vec<T>,
    p: T,
}

/// `‖γ‖_{L¹,α}` and `‖γ‖_{L^p,α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionBound<T> {
    pub l1: T,
    pub lp: T,
}

impl<T: Real, F: VectorField<T>> TimeVelocity<T, F> {
    pub fn new(grid: TimeGrid<T>, fields: Vec<F>, p: T) -> Result<Self> {
        let alphas = fields.iter().map(|f| f.alpha()).collect();
        Self::with_alphas(grid, fields, alphas, p)
    }

    fn with_alphas(grid: TimeGrid<T>, fields: Vec<F>, alphas: Vec<T>, p: T) -> Result<Self> {
        crate::lp_space::check_exponent(p)?;
        if fields.len() != grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.cells(),
                found: fields.len(),
            });
        }
        for f in &fields[1..] {
            fields[0].geometry().check_same(f.geometry())?;
        }
        Ok(Self {
            grid,
            fields,
            alphas,
            p,
        })
    }

    /// The same field at every time of `[0, 1]`.
    pub fn constant(field: F, p: T) -> Result<Self> {
        Self::new(TimeGrid::unit(1), vec![field], p)
    }

    pub fn zero(like: &F, p: T) -> Result<Self> {
        Self::constant(like.zeros_like(), p)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn fields(&self) -> &[F] {
        &self.fields
    }

    pub fn field(&self, cell: usize) -> &F {
        &self.fields[cell]
    }

    /// Field active at time `t` (right-continuous).
    pub fn field_at(&self, t: T) -> Result<&F> {
        self.grid.check_contains(t)?;
        Ok(&self.fields[self.grid.locate(t)])
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.fields[0].dim()
    }

    pub fn is_zero(&self) -> bool {
        self.fields.iter().all(|f| f.is_zero())
    }

    /// Same velocity on a refining grid.
    pub fn refine_to(&self, grid: &TimeGrid<T>) -> Result<Self> {
        self.grid.check_same_interval(grid)?;
        let src: Vec<usize> = (0..grid.cells()).map(|c| self.grid.locate(grid.midpoint(c))).collect();
        Self::with_alphas(
            grid.clone(),
            src.iter().map(|&c| self.fields[c].clone()).collect(),
            src.iter().map(|&c| self.alphas[c]).collect(),
            self.p,
        )
    }

    /// `s ↦ α(γ(s))` as a scalar step function.
    pub fn alpha_sample(&self) -> LpSample<T> {
        let values = self.alphas.iter().map(|&a| vec![a]).collect();
        LpSample::new(self.grid.clone(), values, self.p, SampleMode::Constant).expect("alpha sample")
    }

    pub fn contraction_bound(&self) -> ContractionBound<T> {
        let s = self.alpha_sample();
        ContractionBound {
            l1: s.lp_seminorm_with(&Euclidean, T::one()).expect("scalar sample"),
            lp: s.lp_seminorm(&Euclidean).expect("scalar sample"),
        }
    }

    /// `γ_{n,k}(t) = γ((k + t)/n) / n`.
    pub fn subdivide(&self, n: usize, k: usize) -> Result<Self> {
        let (grid, sources) = self.grid.subdivision_window(n, k)?;
        let inv = T::from_usize_(n).recip();
        Self::with_alphas(
            grid,
            sources.iter().map(|&c| self.fields[c].scale(inv)).collect(),
            sources.iter().map(|&c| self.alphas[c] * inv).collect(),
            self.p,
        )
    }

    /// `∫_{k/n}^{(k+1)/n} α(γ(s)) ds` for every `k`, from the subdivided step sample.
    pub fn subdivision_budgets(&self, n: usize) -> Result<Vec<T>> {
        let s = self.alpha_sample();
        (0..n)
            .map(|k| s.subdivide(n, k)?.lp_seminorm_with(&Euclidean, T::one()))
            .collect()
    }

    /// `λ·γ`.
    pub fn scale(&self, lambda: T) -> Self {
        Self {
            grid: self.grid.clone(),
            fields: self.fields.iter().map(|f| f.scale(lambda)).collect(),
            alphas: self.alphas.iter().map(|&a| a * lambda.abs()).collect(),
            p: self.p,
        }
    }

    /// `γ + s·δ` on the common refinement of both grids.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        let grid = self.grid.common_refinement(&other.grid)?;
        let fields = (0..grid.cells())
            .map(|c| {
                let m = grid.midpoint(c);
                self.fields[self.grid.locate(m)].axpy(s, &other.fields[other.grid.locate(m)])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, fields, self.p)
    }

    /// `γ¹` run on `[0, ½]` followed by `γ²` on `[½, 1]`, both sped up by 2.
    pub fn concat(first: &Self, second: &Self) -> Result<Self> {
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let mut knots: Vec<T> = first.grid.knots().iter().map(|&t| t * half).collect();
        knots.extend(second.grid.knots()[1..].iter().map(|&t| half + t * half));
        let last = knots.len() - 1;
        knots[last] = T::one();
        let fields: Vec<F> = first
            .fields
            .iter()
            .chain(&second.fields)
            .map(|f| f.scale(two))
            .collect();
        let alphas = first.alphas.iter().chain(&second.alphas).map(|&a| a * two).collect();
        Self::with_alphas(TimeGrid::new(knots)?, fields, alphas, first.p)
    }

    fn check_unit(&self) -> Result<()> {
        if self.grid.a() != T::zero() || self.grid.b() != T::one() {
            return Err(Error::InvalidArgument("velocity must live on [0, 1]".into()));
        }
        Ok(())
    }
}

/// Solution of the point problem `ζ = T(γ, x, ζ)`.
#[derive(Debug, Clone)]
pub struct PointTrajectory<T> {
    /// `ζ` as an AC path: start `x`, density `t ↦ γ(t)(ζ(t))` sampled per cell.
    pub path: AcPath<T>,
    pub iterations: usize,
    /// Last sup change between Picard iterates (or 0 for explicit schemes).
    pub last_change: T,
    /// A posteriori error bound `tol / (1 − L)`.
    pub bound: T,
}

impl<T: Real> PointTrajectory<T> {
    pub fn end(&self) -> Vec<T> {
        self.path.eval(self.path.b()).expect("endpoint in domain")
    }

    pub fn eval(&self, t: T) -> Result<Vec<T>> {
        self.path.eval(t)
    }
}

/// Diagnostics of one subdivision segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport<T> {
    pub index: usize,
    pub contraction: T,
    pub contraction_lp: T,
    pub iterations: usize,
    /// Residual of the local problem, when computed.
    pub residual: Option<T>,
    /// Declared tolerance of the local solution.
    pub tolerance: T,
    /// Resampling tolerance of the right translation by the previous endpoint.
    pub star_tolerance: T,
}

/// Output of [`evolve`] and [`local_evolve`].
#[derive(Debug, Clone)]
pub struct EvolutionResult<T, F> {
    pub n: usize,
    pub segments: Vec<SegmentReport<T>>,
    pub path: GroupPath<T, F>,
    pub residual: Option<T>,
    /// Declared tolerance of the whole path.
    pub tolerance: T,
}

impl<T: Real, F: VectorField<T>> EvolutionResult<T, F> {
    pub fn iterations(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.iterations).collect()
    }
}

/// Per-cell view of a velocity on a solver grid.
struct Cells<'a, T, F> {
    knots: &'a [T],
    fields: Vec<&'a F>,
}

impl<'a, T: Real, F: VectorField<T>> Cells<'a, T, F> {
    fn on(gamma: &'a TimeVelocity<T, F>, grid: &'a TimeGrid<T>) -> Self {
        let fields = (0..grid.cells())
            .map(|c| &gamma.fields[gamma.grid.locate(grid.midpoint(c))])
            .collect();
        Self {
            knots: grid.knots(),
            fields,
        }
    }

    fn count(&self) -> usize {
        self.fields.len()
    }

    /// Picard iteration for one start point; `out` holds `(cells + 1) · dim` knot values.
    fn picard(&self, x: &[T], tol: T, max_iter: usize, out: &mut [T]) -> (usize, T) {
        let dim = x.len();
        for chunk in out.chunks_mut(dim) {
            chunk.copy_from_slice(x);
        }
        let mut old = vec![T::zero(); dim];
        let mut mid = vec![T::zero(); dim];
        let mut v = vec![T::zero(); dim];
        let mut change = T::infinity();
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            change = T::zero();
            old.copy_from_slice(x);
            for c in 0..self.count() {
                let w = self.knots[c + 1] - self.knots[c];
                let next = &out[(c + 1) * dim..(c + 2) * dim];
                for i in 0..dim {
                    mid[i] = (old[i] + next[i]) * T::lit(0.5);
                }
                self.fields[c].eval_into(&mid, &mut v);
                old.copy_from_slice(next);
                for i in 0..dim {
                    let updated = out[c * dim + i] + w * v[i];
                    change = fmax(change, (updated - old[i]).abs());
                    out[(c + 1) * dim + i] = updated;
                }
            }
            if change < tol {
                break;
            }
        }
        (iterations, change)
    }

    /// Midpoint samples `γ_c(ζ(mid_c))` of a knot sequence.
    fn along(&self, z: &[T], dim: usize) -> Vec<Vec<T>> {
        (0..self.count())
            .map(|c| {
                let mid: Vec<T> = (0..dim)
                    .map(|i| (z[c * dim + i] + z[(c + 1) * dim + i]) * T::lit(0.5))
                    .collect();
                self.fields[c].eval(&mid)
            })
            .collect()
    }
}

fn solver_grid<T: Real>(grid: &TimeGrid<T>, cells: usize) -> Result<TimeGrid<T>> {
    if cells == 0 {
        return Ok(grid.clone());
    }
    grid.common_refinement(&TimeGrid::uniform(grid.a(), grid.b(), cells)?)
}

/// `t ↦ γ(t)(ζ(t))` sampled at the midpoints of the common refinement.
pub fn apply_along<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    zeta: &ContinuousTrace<T>,
) -> Result<LpSample<T>> {
    let grid = gamma.grid.common_refinement(zeta.grid())?;
    let values = (0..grid.cells())
        .map(|c| {
            let m = grid.midpoint(c);
            gamma.fields[gamma.grid.locate(m)].eval(&zeta.eval_unchecked(m))
        })
        .collect();
    LpSample::new(grid, values, gamma.p, SampleMode::Constant)
}

/// One application of the Picard operator `T(γ, x, ζ)`, exact in time for the midpoint samples.
pub fn picard_operator<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    x: &[T],
    zeta: &ContinuousTrace<T>,
) -> Result<ContinuousTrace<T>> {
    if x.len() != gamma.dim() || zeta.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: gamma.dim(),
            found: x.len().max(zeta.dim()),
        });
    }
    let density = apply_along(gamma, zeta)?;
    let path = AcPath::new(x.to_vec(), density)?;
    let grid = path.grid().clone();
    ContinuousTrace::new(grid, path.knot_values())
}

/// `‖γ‖_{L¹,α}` and `‖γ‖_{L^p,α}`.
pub fn contraction_bound<T: Real, F: VectorField<T>>(gamma: &TimeVelocity<T, F>) -> ContractionBound<T> {
    gamma.contraction_bound()
}

fn require_contractive<T: Real>(bound: T, limit: T) -> Result<()> {
    if bound < limit {
        Ok(())
    } else {
        Err(Error::NotContractive {
            bound: bound.to_f64_(),
            limit: limit.to_f64_(),
        })
    }
}

fn trajectory_from_knots<T: Real, F: VectorField<T>>(
    cells: &Cells<'_, T, F>,
    grid: &TimeGrid<T>,
    x: &[T],
    z: &[T],
    p: T,
) -> Result<AcPath<T>> {
    // The returned iterate is T(previous); its density is what that step integrated.
    let dim = x.len();
    let density: Vec<Vec<T>> = (0..cells.count())
        .map(|c| {
            let w = grid.width(c);
            (0..dim).map(|i| (z[(c + 1) * dim + i] - z[c * dim + i]) / w).collect()
        })
        .collect();
    AcPath::new(
        x.to_vec(),
        LpSample::new(grid.clone(), density, p, SampleMode::Constant)?,
    )
}

/// Banach fixed point of `T(γ, x, ·)` from `ζ₀ ≡ x` on `γ`'s grid refined by `opts.time_cells`.
pub fn picard_point<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    x: &[T],
    opts: &EvolveOptions<T>,
) -> Result<PointTrajectory<T>> {
    if x.len() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: gamma.dim(),
            found: x.len(),
        });
    }
    let l = gamma.contraction_bound().l1;
    require_contractive(l, T::one())?;
    let grid = solver_grid(&gamma.grid, opts.time_cells)?;
    let cells = Cells::on(gamma, &grid);
    let mut z = vec![T::zero(); grid.knots().len() * x.len()];
    let (iterations, change) = cells.picard(x, opts.tol, opts.max_iter, &mut z);
    if !(change < opts.tol) {
        return Err(Error::NoConvergence {
            iterations,
            last_change: change.to_f64_(),
        });
    }
    Ok(PointTrajectory {
        path: trajectory_from_knots(&cells, &grid, x, &z, gamma.p)?,
        iterations,
        last_change: change,
        bound: opts.tol / (T::one() - l),
    })
}

/// `sup_i |ζ(s_i) − x − ∫_0^{s_i} γ(s)(ζ(s)) ds|` with the midpoint rule on the trajectory's grid.
pub fn point_residual<T: Real, F: VectorField<T>>(gamma: &TimeVelocity<T, F>, traj: &PointTrajectory<T>) -> Result<T> {
    let grid = traj.path.grid().common_refinement(&gamma.grid)?;
    let cells = Cells::on(gamma, &grid);
    let dim = traj.path.dim();
    let z: Vec<T> = grid
        .knots()
        .iter()
        .flat_map(|&t| traj.path.eval(t).expect("knot"))
        .collect();
    let samples = cells.along(&z, dim);
    let mut acc = traj.path.start().to_vec();
    let mut res = T::zero();
    for c in 0..cells.count() {
        let w = grid.width(c);
        for i in 0..dim {
            acc[i] += w * samples[c][i];
        }
        res = fmax(res, dist2(&acc, &z[(c + 1) * dim..(c + 2) * dim]));
    }
    Ok(res)
}

/// Field-valued Picard iteration for `γ` inside the ball `‖γ‖_{L¹,α} < L_max`.
pub fn local_evolve<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    opts: &EvolveOptions<T>,
) -> Result<EvolutionResult<T, F>> {
    gamma.check_unit()?;
    let bound = gamma.contraction_bound();
    require_contractive(bound.l1, opts.l_max)?;
    let grid = solver_grid(&gamma.grid, opts.time_cells)?;
    let refined = gamma.refine_to(&grid)?;
    let (path, report) = evolve_segment(&refined, 0, opts)?;
    Ok(EvolutionResult {
        n: 1,
        residual: report.residual,
        tolerance: report.tolerance,
        segments: vec![report],
        path,
    })
}

/// Solves the local problem on `γ`'s own grid (no further refinement).
fn evolve_segment<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    index: usize,
    opts: &EvolveOptions<T>,
) -> Result<(GroupPath<T, F>, SegmentReport<T>)> {
    let bound = gamma.contraction_bound();
    let like = &gamma.fields[0];
    let grid = gamma.grid.clone();
    if gamma.is_zero() {
        let zero = like.zeros_like();
        let path = GroupPath::new(grid.clone(), vec![zero; grid.knots().len()], gamma.p)?;
        let report = SegmentReport {
            index,
            contraction: T::zero(),
            contraction_lp: T::zero(),
            iterations: 0,
            residual: opts.compute_residual.then(T::zero),
            tolerance: T::zero(),
            star_tolerance: T::zero(),
        };
        return Ok((path, report));
    }
    let geom = like.geometry();
    let dim = geom.dim();
    let nk = grid.knots().len();
    let cells = Cells::on(gamma, &grid);
    let nodes = geom.node_count();
    let mut traj = vec![T::zero(); nodes * nk * dim];
    let stats: Vec<(usize, T)> = traj
        .par_chunks_mut(nk * dim)
        .enumerate()
        .map(|(node, out)| {
            if !geom.is_free_node(node) {
                return (0, T::zero());
            }
            let x = geom.node_position(node);
            let (it, ch) = cells.picard(&x, opts.tol, opts.max_iter, out);
            for chunk in out.chunks_mut(dim) {
                for (v, xi) in chunk.iter_mut().zip(&x) {
                    *v -= *xi;
                }
            }
            (it, ch)
        })
        .collect();
    let (iterations, change) = stats
        .into_iter()
        .fold((0, T::zero()), |(i, c), (a, b)| (i.max(a), fmax(c, b)));
    if !(change < opts.tol) {
        return Err(Error::NoConvergence {
            iterations,
            last_change: change.to_f64_(),
        });
    }
    let knot_fields: Vec<(F, T)> = (0..nk)
        .into_par_iter()
        .map(|j| -> Result<(F, T)> {
            let mut values = vec![T::zero(); nodes * dim];
            for node in 0..nodes {
                let src = &traj[(node * nk + j) * dim..(node * nk + j + 1) * dim];
                values[node * dim..(node + 1) * dim].copy_from_slice(src);
            }
            let tol = resampling_tolerance(geom, &values);
            Ok((like.with_node_values(&values)?, tol))
        })
        .collect::<Result<_>>()?;
    let resample = knot_fields.iter().fold(T::zero(), |m, (_, t)| fmax(m, *t));
    let knots: Vec<F> = knot_fields.into_iter().map(|(f, _)| f).collect();
    let path = GroupPath::new(grid, knots, gamma.p)?;
    let l = bound.l1;
    let tolerance = opts.tol / (T::one() - l) + (T::one() + l) * resample;
    let residual = if opts.compute_residual {
        Some(residual(gamma, &path)?)
    } else {
        None
    };
    Ok((
        path,
        SegmentReport {
            index,
            contraction: l,
            contraction_lp: bound.lp,
            iterations,
            residual,
            tolerance,
            star_tolerance: T::zero(),
        },
    ))
}

/// Smallest power of two `n` with every segment budget below `l_max`.
pub fn choose_subdivision<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    l_max: T,
    limit: usize,
) -> Result<usize> {
    let mut n = 1;
    loop {
        let worst = gamma.subdivision_budgets(n)?.into_iter().fold(T::zero(), fmax);
        if worst < l_max {
            return Ok(n);
        }
        if n >= limit {
            return Err(Error::SubdivisionLimit(n));
        }
        n *= 2;
    }
}

/// The evolution `Evol(γ)` for an arbitrary velocity on `[0, 1]`.
///
/// Segment `k` solves the rescaled problem `γ_{n,k}` locally and is moved
/// into place by right translation with the product of earlier endpoints:
/// `η(t) = η_k(nt − k) ∗ P_k`, `P_{k+1} = η_k(1) ∗ P_k`.
pub fn evolve<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    opts: &EvolveOptions<T>,
) -> Result<EvolutionResult<T, F>> {
    gamma.check_unit()?;
    if gamma.is_zero() {
        let zero = gamma.fields[0].zeros_like();
        let path = GroupPath::new(gamma.grid.clone(), vec![zero; gamma.grid.knots().len()], gamma.p)?;
        return Ok(EvolutionResult {
            n: 1,
            segments: vec![SegmentReport {
                index: 0,
                contraction: T::zero(),
                contraction_lp: T::zero(),
                iterations: 0,
                residual: opts.compute_residual.then(T::zero),
                tolerance: T::zero(),
                star_tolerance: T::zero(),
            }],
            path,
            residual: opts.compute_residual.then(T::zero),
            tolerance: T::zero(),
        });
    }
    let n = match opts.forced_n {
        Some(0) => return Err(Error::InvalidArgument("forced subdivision must be positive".into())),
        Some(n) => n,
        None => choose_subdivision(gamma, opts.l_max, opts.max_subdivision)?,
    };
    let per = opts.time_cells.div_ceil(n).max(1);
    let grid = solver_grid(&gamma.grid, n * per)?;
    let refined = gamma.refine_to(&grid)?;
    let budgets = refined.subdivision_budgets(n)?;
    let worst = budgets.iter().copied().fold(T::zero(), fmax);
    require_contractive(worst, opts.l_max)?;

    let local_opts = EvolveOptions {
        compute_residual: false,
        ..opts.clone()
    };
    let nn = T::from_usize_(n);
    let mut knots_t: Vec<T> = vec![T::zero()];
    let mut fields: Vec<F> = vec![gamma.fields[0].zeros_like()];
    let mut segments = Vec::with_capacity(n);
    let mut prefix = gamma.fields[0].zeros_like();
    let mut tolerance = T::zero();
    for k in 0..n {
        let local = refined.subdivide(n, k)?;
        let (path, mut report) = evolve_segment(&local, k, &local_opts)?;
        let lk = report.contraction;
        let moved: Vec<(F, T)> = if k == 0 {
            path.knots()[1..].iter().map(|f| (f.clone(), T::zero())).collect()
        } else {
            path.knots()[1..]
                .par_iter()
                .map(|f| star_fields(f, &prefix).map(|r| (r.field, r.tolerance)))
                .collect::<Result<_>>()?
        };
        let star_tol = moved.iter().fold(T::zero(), |m, (_, t)| fmax(m, *t));
        report.star_tolerance = star_tol;
        // Errors carried in P_k are moved by id + η_k, whose Lipschitz constant is at most 1/(1 − L_k).
        tolerance = tolerance / (T::one() - lk) + report.tolerance + star_tol;
        let kk = T::from_usize_(k);
        let local_knots = path.grid().knots();
        for (j, (f, _)) in moved.into_iter().enumerate() {
            let s = local_knots[j + 1];
            let t = if j + 2 == local_knots.len() {
                T::from_usize_(k + 1) / nn
            } else {
                (kk + s) / nn
            };
            knots_t.push(t);
            fields.push(f);
        }
        prefix = fields.last().expect("segment endpoint").clone();
        segments.push(report);
    }
    let path = GroupPath::new(TimeGrid::new(knots_t)?, fields, gamma.p)?;
    let residual = if opts.compute_residual {
        Some(residual(gamma, &path)?)
    } else {
        None
    };
    Ok(EvolutionResult {
        n,
        segments,
        path,
        residual,
        tolerance,
    })
}

/// `(id + η(t))(x)`.
pub fn flow_point<T: Real, F: VectorField<T>>(result: &EvolutionResult<T, F>, t: T, x: &[T]) -> Result<Vec<T>> {
    result.path.apply(t, x)
}

/// `sup_{t_i, x} |η(t_i)(x) − ∫_0^{t_i} γ(s)((id + η(s))(x)) ds|` over the path knots and
/// a lattice of pitch `h/2`, with the midpoint rule in time.
pub fn residual<T: Real, F: VectorField<T>>(gamma: &TimeVelocity<T, F>, eta: &GroupPath<T, F>) -> Result<T> {
    let grid = eta.grid().common_refinement(&gamma.grid)?;
    let geom = gamma.fields[0].geometry();
    let dim = geom.dim();
    let pts = geom.lattice(2);
    let knots = grid.knots();
    let cells = Cells::on(gamma, &grid);
    let per_point: Vec<T> = pts
        .par_chunks(dim)
        .map(|x| -> Result<T> {
            let mut acc = vec![T::zero(); dim];
            let mut prev = eta.apply(knots[0], x)?;
            let mut res = dist2(&prev, x);
            let mut mid = vec![T::zero(); dim];
            let mut v = vec![T::zero(); dim];
            for c in 0..cells.count() {
                let next = eta.apply(knots[c + 1], x)?;
                for i in 0..dim {
                    mid[i] = (prev[i] + next[i]) * T::lit(0.5);
                }
                cells.fields[c].eval_into(&mid, &mut v);
                let w = knots[c + 1] - knots[c];
                let mut err = T::zero();
                for i in 0..dim {
                    acc[i] += w * v[i];
                    let d = next[i] - x[i] - acc[i];
                    err += d * d;
                }
                res = fmax(res, err.sqrt());
                prev = next;
            }
            Ok(res)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().fold(T::zero(), fmax))
}

/// Classical RK4 with step `1/steps`, splitting steps at the cells of `γ`.
pub fn rk4_oracle<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    x: &[T],
    steps: usize,
) -> Result<PointTrajectory<T>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("rk4 needs at least one step".into()));
    }
    let grid = gamma
        .grid
        .common_refinement(&TimeGrid::uniform(gamma.grid.a(), gamma.grid.b(), steps)?)?;
    let dim = x.len();
    let mut z = x.to_vec();
    let mut density = Vec::with_capacity(grid.cells());
    let half = T::lit(0.5);
    let sixth = T::lit(1.0 / 6.0);
    let add = |a: &[T], b: &[T], s: T| -> Vec<T> { a.iter().zip(b).map(|(u, v)| *u + s * *v).collect() };
    for c in 0..grid.cells() {
        let f = &gamma.fields[gamma.grid.locate(grid.midpoint(c))];
        let w = grid.width(c);
        let k1 = f.eval(&z);
        let k2 = f.eval(&add(&z, &k1, w * half));
        let k3 = f.eval(&add(&z, &k2, w * half));
        let k4 = f.eval(&add(&z, &k3, w));
        let slope: Vec<T> = (0..dim)
            .map(|i| (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]) * sixth)
            .collect();
        z = add(&z, &slope, w);
        density.push(slope);
    }
    let path = AcPath::new(x.to_vec(), LpSample::new(grid, density, gamma.p, SampleMode::Constant)?)?;
    Ok(PointTrajectory {
        path,
        iterations: steps,
        last_change: T::zero(),
        bound: T::zero(),
    })
}

/// One row of [`continuity_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityLevel<T> {
    pub level: usize,
    pub scale: T,
    pub distance: T,
    pub n: usize,
}

/// Distances `d_k` between `Evol(γ + 2^{−k}δ)` and `Evol(γ)` under the `C¹` group-path distance.
pub fn continuity_probe<T: Real, F: VectorField<T>>(
    gamma: &TimeVelocity<T, F>,
    delta: &TimeVelocity<T, F>,
    levels: usize,
    opts: &EvolveOptions<T>,
) -> Result<Vec<ContinuityLevel<T>>> {
    if levels < 2 {
        return Err(Error::InvalidArgument(
            "continuity probe needs at least two levels".into(),
        ));
    }
    let opts = EvolveOptions {
        compute_residual: false,
        ..opts.clone()
    };
    let base = evolve(gamma, &opts)?;
    (0..levels)
        .map(|k| {
            let scale = T::lit(0.5).powi(k as i32);
            let perturbed = evolve(&gamma.axpy(scale, delta)?, &opts)?;
            Ok(ContinuityLevel {
                level: k,
                scale,
                distance: perturbed.path.distance(&base.path, &CrSeminorm)?,
                n: perturbed.n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector_field::generate::{self, Cutoff};
    use crate::vector_field::{CompactField, Geometry};
    use rand::{Rng, SeedableRng};

    fn geom() -> Geometry<f64> {
        Geometry::<f64>::compact_cube(2, -2.0, 2.0, 41).unwrap()
    }

    fn rotation(omega: f64) -> TimeVelocity<f64, CompactField<f64>> {
        let g = Geometry::<f64>::compact_cube(2, -3.0, 3.0, 61).unwrap();
        let f = generate::plateau_rotation(g, omega, Cutoff::new(0.8, 2.8)).unwrap();
        TimeVelocity::constant(f, 1.0).unwrap()
    }

    fn random_gamma(seed: u64, cells: usize, bound: f64) -> TimeVelocity<f64, CompactField<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let fields: Vec<_> = (0..cells)
            .map(|_| generate::random_smooth(geom(), &mut rng, 3, 1.0).unwrap())
            .collect();
        let g = TimeVelocity::new(TimeGrid::unit(cells), fields, 1.0).unwrap();
        let l = g.contraction_bound().l1;
        g.scale(bound / l)
    }

    #[test]
    fn zero_velocity_is_trivial() {
        let g = TimeVelocity::zero(&CompactField::zeros(geom()).unwrap(), 1.0).unwrap();
        let opts = EvolveOptions::default();
        let t = picard_point(&g, &[0.3, 0.1], &opts).unwrap();
        assert_eq!(t.iterations, 1);
        assert_eq!(t.end(), vec![0.3, 0.1]);
        let r = evolve(&g, &opts).unwrap();
        assert!(r.path.end().is_zero());
        assert_eq!(r.residual, Some(0.0));
        assert_eq!(contraction_bound(&g).l1, 0.0);
        let r = local_evolve(&g, &opts).unwrap();
        assert!(r.path.knots().iter().all(|f| f.is_zero()));
    }

    #[test]
    fn rotation_closed_form() {
        let g = rotation(0.3);
        let opts = EvolveOptions::default();
        let x = [0.35, -0.3];
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let exact = [c * x[0] - s * x[1], s * x[0] + c * x[1]];
        let t = picard_point(&g, &x, &opts).unwrap();
        assert!(dist2(&t.end(), &exact) < 1e-6, "{:e}", dist2(&t.end(), &exact));
        let rk = rk4_oracle(&g, &x, 10_000).unwrap();
        assert!(dist2(&rk.end(), &exact) < 1e-8);
        let r = evolve(&g, &opts).unwrap();
        let y = flow_point(&r, 1.0, &x).unwrap();
        assert!(dist2(&y, &exact) < 1e-5);
        assert_eq!(flow_point(&r, 0.6, &[3.5, 0.0]).unwrap(), vec![3.5, 0.0]);
        assert_eq!(flow_point(&r, 0.0, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let g = rotation(1.1);
        let x = [0.4, 0.2];
        let (c, s) = (1.1f64.cos(), 1.1f64.sin());
        let exact = [c * x[0] - s * x[1], s * x[0] + c * x[1]];
        let e1 = dist2(&rk4_oracle(&g, &x, 8).unwrap().end(), &exact);
        let e2 = dist2(&rk4_oracle(&g, &x, 16).unwrap().end(), &exact);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
    }

    #[test]
    fn picard_contraction_inequality() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for seed in 0..10 {
            let bound = rng.gen_range(0.1..0.9);
            let g = random_gamma(seed, 3, bound);
            let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            let grid = TimeGrid::unit(17);
            let mut trace = || {
                ContinuousTrace::from_fn(grid.clone(), |_| {
                    vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]
                })
                .unwrap()
            };
            let (z1, z2) = (trace(), trace());
            let t1 = picard_operator(&g, &x, &z1).unwrap();
            let t2 = picard_operator(&g, &x, &z2).unwrap();
            let l = g.contraction_bound().l1;
            assert!(t1.sup_distance(&t2).unwrap() <= l * z1.sup_distance(&z2).unwrap() + 1e-12);
        }
    }

    #[test]
    fn picard_iteration_count_bound() {
        let g = random_gamma(5, 2, 0.4);
        let opts = EvolveOptions::default();
        let x = [0.2, -0.4];
        let t = picard_point(&g, &x, &opts).unwrap();
        let grid = solver_grid(g.grid(), opts.time_cells).unwrap();
        let first = picard_operator(&g, &x, &ContinuousTrace::constant(grid, &x)).unwrap();
        let d0 = first.values().iter().map(|v| dist2(v, &x)).fold(0.0, f64::max);
        let l: f64 = 0.4;
        let limit = ((opts.tol * (1.0 - l) / d0).ln() / l.ln()).ceil() as usize + 1;
        assert!(t.iterations <= limit, "{} > {limit}", t.iterations);
        assert!(point_residual(&g, &t).unwrap() <= t.bound);
    }

    #[test]
    fn local_matches_pointwise_and_rk4() {
        let g = random_gamma(11, 4, 0.3);
        let opts = EvolveOptions::default();
        let r = local_evolve(&g, &opts).unwrap();
        assert!(r.residual.unwrap() <= r.tolerance, "{:?} {}", r.residual, r.tolerance);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let y = flow_point(&r, 1.0, &x).unwrap();
            let p = picard_point(&g, &x, &opts).unwrap().end();
            let o = rk4_oracle(&g, &x, 4096).unwrap().end();
            assert!(dist2(&y, &p) <= r.tolerance + 1e-12);
            assert!(dist2(&y, &o) <= 1e-4);
        }
    }

    #[test]
    fn translation_plateau() {
        let f = generate::plateau_constant(geom(), &[0.2, -0.1], Cutoff::new(1.2, 1.8)).unwrap();
        let g = TimeVelocity::constant(f, 1.0).unwrap();
        let r = evolve(&g, &EvolveOptions::default()).unwrap();
        for x in [[0.0, 0.0], [0.5, 0.5], [-0.6, 0.3]] {
            for t in [0.25, 0.5, 1.0] {
                let y = flow_point(&r, t, &x).unwrap();
                let e = dist2(&y, &[x[0] + 0.2 * t, x[1] - 0.1 * t]);
                assert!(e < 1e-8 && e <= r.tolerance);
            }
        }
    }

    #[test]
    fn subdivision_doubling_and_budgets() {
        let g = random_gamma(3, 5, 1.7);
        let total = g.contraction_bound().l1;
        for n in [1usize, 2, 4, 8] {
            let b = g.subdivision_budgets(n).unwrap();
            let s: f64 = b.iter().sum();
            assert!((s - total).abs() <= 1e-14 * total);
        }
        assert!(choose_subdivision(&g, 0.5, 1 << 10).unwrap() >= 4);
        let r = evolve(&g, &EvolveOptions::default()).unwrap();
        assert!(r.n >= 4);
        assert!(r.residual.unwrap() <= r.tolerance, "{:?} {}", r.residual, r.tolerance);
        let knots = r.path.grid().knots();
        for k in 1..r.n {
            let t = k as f64 / r.n as f64;
            assert!(knots.contains(&t));
        }
    }

    #[test]
    fn n_and_2n_agree() {
        let g = random_gamma(21, 3, 0.9);
        let mut opts = EvolveOptions::default();
        opts.forced_n = Some(2);
        let a = evolve(&g, &opts).unwrap();
        opts.forced_n = Some(4);
        let b = evolve(&g, &opts).unwrap();
        let d = a.path.distance(&b.path, &CrSeminorm).unwrap();
        assert!(
            d <= 10.0 * (a.tolerance + b.tolerance),
            "{d:e} {:e} {:e}",
            a.tolerance,
            b.tolerance
        );
    }

    #[test]
    fn composition_law_at_one() {
        let g1 = random_gamma(31, 2, 0.3);
        let g2 = random_gamma(32, 3, 0.3);
        let opts = EvolveOptions::default();
        let cat = TimeVelocity::concat(&g1, &g2).unwrap();
        let whole = evolve(&cat, &opts).unwrap();
        let e1 = evolve(&g1, &opts).unwrap();
        let e2 = evolve(&g2, &opts).unwrap();
        let glued = star_fields(e2.path.end(), e1.path.end()).unwrap();
        let d = whole.path.end().sub(&glued.field).unwrap().sup_norm();
        let tol = whole.tolerance + e1.tolerance + e2.tolerance + glued.tolerance;
        assert!(d <= 10.0 * tol, "{d:e} {tol:e}");
    }

    #[test]
    fn residual_of_neutral_path() {
        let g = random_gamma(41, 2, 0.3);
        let zero = g.field(0).zeros_like();
        let flat = GroupPath::new(g.grid().clone(), vec![zero; 3], 1.0).unwrap();
        let r = residual(&g, &flat).unwrap();
        // sup_{t,x} |∫_0^t γ(s)(x) ds| on the same lattice.
        let pts = g.field(0).geometry().lattice(2);
        let mut expect: f64 = 0.0;
        for x in pts.chunks(2) {
            let a = g.field(0).eval(x);
            let b = g.field(1).eval(x);
            expect = expect.max(dist2(&[a[0] * 0.5, a[1] * 0.5], &[0.0, 0.0]));
            expect = expect.max(dist2(&[(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5], &[0.0, 0.0]));
        }
        assert!((r - expect).abs() < 1e-15 && r > 0.0);
    }

    #[test]
    fn continuity_zero_perturbation() {
        let g = random_gamma(51, 2, 0.3);
        let zero = TimeVelocity::zero(g.field(0), 1.0).unwrap();
        let mut opts = EvolveOptions::default();
        opts.time_cells = 16;
        let rows = continuity_probe(&g, &zero, 3, &opts).unwrap();
        assert!(rows.iter().all(|r| r.distance == 0.0));
    }
}
