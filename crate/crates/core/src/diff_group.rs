//! The group `Diff_K(R^n)` (and `Diff(T^d)`) in its global chart of displacements.
//!
//! An element `φ` stands for the diffeomorphism `id + φ`; the product is
//! `φ ∗ ψ = ψ + φ∘(id + ψ)`, i.e. `(id + φ)∘(id + ψ)`. Every composition is
//! resampled onto the grid immediately and reports its resampling tolerance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::lp_space::TimeGrid;
use crate::scalar::{fmax, Real};
use crate::vector_field::{resampling_tolerance, FieldSeminorm, Resampled, VectorField, ALPHA_LATTICE};

/// Default lower bound on `det(I + Dφ)` for the fallback chart certificate.
pub const DEFAULT_MIN_DET: f64 = 1e-3;

/// A displacement `φ` with `id + φ` a diffeomorphism; caches `α(φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<T, F> {
    displacement: F,
    alpha: T,
}

impl<T: Real, F: VectorField<T>> GroupElement<T, F> {
    /// Validates membership with [`in_chart_check`].
    pub fn new(displacement: F) -> Result<Self> {
        let d = in_chart_check(&displacement);
        if !d.ok {
            return Err(Error::OutsideChart {
                alpha: d.alpha.to_f64_(),
                min_det: d.min_det.to_f64_(),
            });
        }
        Ok(Self {
            alpha: d.alpha,
            displacement,
        })
    }

    pub(crate) fn trusted(displacement: F) -> Self {
        Self {
            alpha: displacement.alpha(),
            displacement,
        }
    }

    pub fn neutral(like: &F) -> Self {
        Self {
            displacement: like.zeros_like(),
            alpha: T::zero(),
        }
    }

    pub fn displacement(&self) -> &F {
        &self.displacement
    }

    pub fn into_displacement(self) -> F {
        self.displacement
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// `(id + φ)(x)`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let d = self.displacement.eval(x);
        x.iter().zip(d).map(|(a, b)| *a + b).collect()
    }
}

/// Chart membership diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDiagnostic<T> {
    pub ok: bool,
    pub alpha: T,
    /// Lattice minimum of `det(I + Dφ)`.
    pub min_det: T,
    /// Lattice minimum of `σ_min(I + Dφ)` minus the second-derivative bound times the cell radius.
    pub certified_margin: T,
}

/// `φ ∗ ψ = ψ + φ∘(id + ψ)`.
pub fn star<T: Real, F: VectorField<T>>(
    phi: &GroupElement<T, F>,
    psi: &GroupElement<T, F>,
) -> Result<Resampled<T, GroupElement<T, F>>> {
    let r = star_fields(&phi.displacement, &psi.displacement)?;
    let elem = GroupElement::new(r.field)?;
    Ok(Resampled {
        field: elem,
        tolerance: r.tolerance,
    })
}

/// [`star`] on bare displacements, without the membership check.
pub fn star_fields<T: Real, F: VectorField<T>>(phi: &F, psi: &F) -> Result<Resampled<T, F>> {
    if phi.is_zero() {
        return Ok(Resampled {
            field: psi.clone(),
            tolerance: T::zero(),
        });
    }
    let r = phi.compose_displacement(psi)?;
    Ok(Resampled {
        field: psi.add(&r.field)?,
        tolerance: r.tolerance,
    })
}

/// Result of [`inverse`].
#[derive(Debug, Clone)]
pub struct InverseReport<T, F> {
    pub element: GroupElement<T, F>,
    pub iterations: usize,
    pub last_change: T,
    pub tolerance: T,
}

/// Fixed point of `ψ = −φ∘(id + ψ)` from `ψ₀ = −φ`.
///
/// The iteration acts independently on every node value, since a resampled
/// iterate reproduces its node values; the node-wise sequences are therefore
/// run to the common stopping rule and interpolated once.
pub fn inverse<T: Real, F: VectorField<T>>(
    phi: &GroupElement<T, F>,
    tol: T,
    max_iter: usize,
) -> Result<InverseReport<T, F>> {
    if !(phi.alpha < T::one()) {
        return Err(Error::NotContractive {
            bound: phi.alpha.to_f64_(),
            limit: 1.0,
        });
    }
    let f = &phi.displacement;
    if f.is_zero() {
        return Ok(InverseReport {
            element: GroupElement::neutral(f),
            iterations: 0,
            last_change: T::zero(),
            tolerance: T::zero(),
        });
    }
    let geom = f.geometry();
    let dim = geom.dim();
    let mut values: Vec<T> = f.node_values().into_iter().map(|v| -v).collect();
    let mut iterations = 0;
    let mut change = T::infinity();
    while iterations < max_iter {
        iterations += 1;
        let changes: Vec<T> = values
            .par_chunks_mut(dim)
            .enumerate()
            .map(|(node, psi)| {
                let x = geom.node_position(node);
                let y: Vec<T> = x.iter().zip(psi.iter()).map(|(a, b)| *a + *b).collect();
                let next = f.eval(&y);
                let mut c = T::zero();
                for (p, n) in psi.iter_mut().zip(next) {
                    c = fmax(c, (*p + n).abs());
                    *p = -n;
                }
                c
            })
            .collect();
        change = changes.into_iter().fold(T::zero(), fmax);
        if change < tol {
            break;
        }
    }
    if !(change < tol) {
        return Err(Error::NoConvergence {
            iterations,
            last_change: change.to_f64_(),
        });
    }
    let field = f.with_node_values(&values)?;
    let tolerance = resampling_tolerance(geom, &values);
    Ok(InverseReport {
        element: GroupElement::trusted(field),
        iterations,
        last_change: change,
        tolerance,
    })
}

/// Right-translation derivative `(ψ, ϕ) ↦ ϕ∘(id + ψ)`.
pub fn d_rho<T: Real, F: VectorField<T>>(psi: &GroupElement<T, F>, varphi: &F) -> Result<Resampled<T, F>> {
    varphi.compose_displacement(&psi.displacement)
}

/// Membership test for the chart: `α(φ) < 1`, or a lattice certificate that
/// `det(I + Dφ) > 0` holds everywhere with `det ≥` [`DEFAULT_MIN_DET`] on the lattice.
///
/// A local diffeomorphism of `R^n` that equals the identity outside a compact
/// set is proper, hence a covering of `R^n`, hence bijective; the same holds on
/// the torus for maps homotopic to the identity.
pub fn in_chart_check<T: Real, F: VectorField<T>>(phi: &F) -> ChartDiagnostic<T> {
    in_chart_check_with(phi, T::lit(DEFAULT_MIN_DET))
}

pub fn in_chart_check_with<T: Real, F: VectorField<T>>(phi: &F, min_det_required: T) -> ChartDiagnostic<T> {
    let geom = phi.geometry();
    let dim = geom.dim();
    let pts = geom.lattice(ALPHA_LATTICE);
    let per_point: Vec<(T, T, T)> = pts
        .par_chunks(dim)
        .map(|x| {
            let j = phi.jacobian(x);
            let m = SmallMat::identity(dim).add(&j);
            (j.op_norm(), m.det(), m.sigma_min())
        })
        .collect();
    let (raw_alpha, min_det, min_sigma) = per_point
        .into_iter()
        .fold((T::zero(), T::infinity(), T::infinity()), |(a, d, s), (x, y, z)| {
            (fmax(a, x), d.min(y), s.min(z))
        });
    let alpha = raw_alpha * T::lit(crate::vector_field::ALPHA_SAFETY);
    let pitch = geom.h() / T::from_usize_(ALPHA_LATTICE);
    let radius = pitch * T::lit(0.5) * T::from_usize_(dim).sqrt();
    let certified_margin = min_sigma - phi.core().second_derivative_bound() * radius;
    let ok = alpha < T::one() || (min_det >= min_det_required && certified_margin > T::zero());
    ChartDiagnostic {
        ok,
        alpha,
        min_det,
        certified_margin,
    }
}

/// An absolutely continuous path of group elements, piecewise linear between knots.
///
/// The density on each cell is the constant field `(η_{i+1} − η_i) / w_i`.
#[derive(Debug, Clone)]
pub struct GroupPath<T, F> {
    grid: TimeGrid<T>,
    knots: Vec<F>,
    p: T,
}

impl<T: Real, F: VectorField<T>> GroupPath<T, F> {
    pub fn new(grid: TimeGrid<T>, knots: Vec<F>, p: T) -> Result<Self> {
        crate::lp_space::check_exponent(p)?;
        if knots.len() != grid.knots().len() {
            return Err(Error::DimensionMismatch {
                expected: grid.knots().len(),
                found: knots.len(),
            });
        }
        for k in &knots[1..] {
            knots[0].geometry().check_same(k.geometry())?;
        }
        Ok(Self { grid, knots, p })
    }

    /// Path sitting at `start` over `[a, b]`.
    pub fn constant(start: F, a: T, b: T, p: T) -> Result<Self> {
        let grid = TimeGrid::uniform(a, b, 1)?;
        Self::new(grid, vec![start.clone(), start], p)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn knots(&self) -> &[F] {
        &self.knots
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn start(&self) -> &F {
        &self.knots[0]
    }

    pub fn end(&self) -> &F {
        self.knots.last().expect("at least two knots")
    }

    /// Displacement at `t` (coefficient-wise linear interpolation between knots).
    pub fn eval(&self, t: T) -> Result<F> {
        self.grid.check_contains(t)?;
        let knots = self.grid.knots();
        if let Ok(i) = knots.binary_search_by(|k| k.partial_cmp(&t).expect("finite knots")) {
            return Ok(self.knots[i].clone());
        }
        let c = self.grid.locate(t);
        let theta = (t - knots[c]) / self.grid.width(c);
        self.knots[c].axpy(theta, &self.knots[c + 1].sub(&self.knots[c])?)
    }

    /// `(id + η(t))(x)`.
    pub fn apply(&self, t: T, x: &[T]) -> Result<Vec<T>> {
        let knots = self.grid.knots();
        self.grid.check_contains(t)?;
        let c = self.grid.locate(t);
        let (d0, d1) = (self.knots[c].eval(x), self.knots[c + 1].eval(x));
        let theta = if t == knots[c] {
            T::zero()
        } else if t == knots[c + 1] {
            T::one()
        } else {
            (t - knots[c]) / self.grid.width(c)
        };
        Ok(x.iter()
            .zip(d0.iter().zip(&d1))
            .map(|(&xi, (&a, &b))| {
                if theta == T::zero() {
                    xi + a
                } else if theta == T::one() {
                    xi + b
                } else {
                    xi + a + theta * (b - a)
                }
            })
            .collect())
    }

    pub fn density(&self, cell: usize) -> Result<F> {
        let w = self.grid.width(cell);
        Ok(self.knots[cell + 1].sub(&self.knots[cell])?.scale(w.recip()))
    }

    /// `q(η₁(a) − η₂(a)) + (∫ q(η₁′ − η₂′)^p)^{1/p}` on the common refinement of the grids.
    pub fn distance(&self, other: &Self, q: &dyn FieldSeminorm<T, F>) -> Result<T> {
        self.grid.check_same_interval(&other.grid)?;
        let start = q.eval(&self.start().sub(other.start())?);
        let common = self.grid.common_refinement(&other.grid)?;
        let cells: Vec<(usize, usize, T)> = (0..common.cells())
            .map(|c| {
                let m = common.midpoint(c);
                (self.grid.locate(m), other.grid.locate(m), common.width(c))
            })
            .collect();
        let terms: Vec<(T, T)> = cells
            .iter()
            .map(|&(i, j, w)| -> Result<(T, T)> {
                let d = self.density(i)?.sub(&other.density(j)?)?;
                Ok((w, q.eval(&d)))
            })
            .collect::<Result<_>>()?;
        let density = if self.p.is_infinite() {
            terms.iter().fold(T::zero(), |acc, &(_, v)| fmax(acc, v))
        } else {
            let s: T = terms.iter().map(|&(w, v)| w * v.powf(self.p)).sum();
            s.powf(self.p.recip())
        };
        Ok(start + density)
    }
}

/// Distance of two group paths under a field seminorm (see [`GroupPath::distance`]).
pub fn group_path_distance<T: Real, F: VectorField<T>>(
    a: &GroupPath<T, F>,
    b: &GroupPath<T, F>,
    q: &dyn FieldSeminorm<T, F>,
) -> Result<T> {
    a.distance(b, q)
}
