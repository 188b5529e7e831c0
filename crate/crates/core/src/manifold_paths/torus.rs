use super::{path_through, ChartSegment, LocalAddition, ManifoldAcPath, ManifoldTag};
use crate::ac_path::AcPath;
use crate::error::{Error, Result};
use crate::evolution::{evolve, flow_point, EvolutionResult, EvolveOptions, TimeVelocity};
use crate::lp_space::{LpSample, TimeGrid};
use crate::scalar::{fmax, Real};
use crate::vector_field::{PeriodicField, VectorField};

/// Representative in `[0, 1)`.
pub fn wrap<T: Real>(x: T) -> T {
    let r = x - x.floor();
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// Representative in `(−1/2, 1/2]`; `±1/2` maps to `+1/2`.
pub fn wrap_diff<T: Real>(d: T) -> T {
    d - (d - T::lit(0.5)).ceil()
}

/// `T^d = R^d / Z^d` with `Σ(p, v) = p + v mod 1` on `Ω = {|v|_∞ < 1/2}`.
///
/// The single chart is the lift: path coordinates live in `R^d` and points are
/// their classes mod 1, so a coordinate path never needs to be cut at wrap-around.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatTorus {
    dim: usize,
}

impl FlatTorus {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("torus dimension must be positive".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn sup<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &x| fmax(a, x.abs()))
}

fn wrapped_difference<T: Real>(q: &[T], p: &[T]) -> Option<Vec<T>> {
    let w: Vec<T> = q.iter().zip(p).map(|(&a, &b)| wrap_diff(a - b)).collect();
    (sup(&w) < T::lit(0.5)).then_some(w)
}

impl<T: Real> LocalAddition<T> for FlatTorus {
    fn tag(&self) -> ManifoldTag {
        ManifoldTag::Torus(self.dim)
    }

    fn point_dim(&self) -> usize {
        self.dim
    }

    fn chart_dim(&self) -> usize {
        self.dim
    }

    fn radius(&self) -> T {
        T::lit(0.5)
    }

    fn in_omega(&self, _p: &[T], v: &[T]) -> bool {
        sup(v) < T::lit(0.5)
    }

    fn sigma(&self, p: &[T], v: &[T]) -> Vec<T> {
        p.iter().zip(v).map(|(&x, &y)| wrap(x + y)).collect()
    }

    fn theta_inv(&self, p: &[T], q: &[T]) -> Option<Vec<T>> {
        wrapped_difference(q, p)
    }

    fn point_distance(&self, p: &[T], q: &[T]) -> T {
        p.iter()
            .zip(q)
            .fold(T::zero(), |a, (&x, &y)| fmax(a, wrap_diff(x - y).abs()))
    }

    fn chart_count(&self) -> usize {
        1
    }

    fn in_chart(&self, _chart: usize, _p: &[T]) -> bool {
        true
    }

    fn choose_chart(&self, _p: &[T]) -> usize {
        0
    }

    fn to_chart(&self, _chart: usize, p: &[T]) -> Vec<T> {
        p.to_vec()
    }

    fn from_chart(&self, _chart: usize, u: &[T]) -> Vec<T> {
        u.iter().map(|&x| wrap(x)).collect()
    }

    fn d_to_chart(&self, _chart: usize, _p: &[T], v: &[T]) -> Vec<T> {
        v.to_vec()
    }

    fn d_from_chart(&self, _chart: usize, _u: &[T], du: &[T]) -> Vec<T> {
        du.to_vec()
    }

    fn flat(&self) -> bool {
        true
    }

    fn sigma_chart(&self, _chart: usize, u: &[T], tau: &[T]) -> Option<Vec<T>> {
        (sup(tau) < T::lit(0.5)).then(|| u.iter().zip(tau).map(|(&x, &y)| x + y).collect())
    }

    fn theta_inv_chart(&self, _chart: usize, u: &[T], q: &[T]) -> Option<Vec<T>> {
        wrapped_difference(q, u)
    }
}

fn slice_path<T: Real>(path: &AcPath<T>, range: std::ops::Range<usize>) -> Result<AcPath<T>> {
    let d = path.density();
    let values = d.values().iter().map(|v| v[range.clone()].to_vec()).collect();
    AcPath::new(
        path.start()[range.clone()].to_vec(),
        LpSample::new(d.grid().clone(), values, d.p(), d.mode())?,
    )
}

/// Splits a path on `T^{d1+d2}` into its components on `T^{d1}` and `T^{d2}`.
pub fn split_product<T: Real>(eta: &ManifoldAcPath<T>, d1: usize) -> Result<(ManifoldAcPath<T>, ManifoldAcPath<T>)> {
    let ManifoldTag::Torus(d) = eta.tag() else {
        return Err(Error::InvalidArgument("products are split on tori only".into()));
    };
    if d1 == 0 || d1 >= d {
        return Err(Error::InvalidArgument(format!(
            "cannot split T^{d} after {d1} coordinates"
        )));
    }
    let (m1, m2) = (FlatTorus::new(d1)?, FlatTorus::new(d - d1)?);
    let part = |m: &FlatTorus, range: std::ops::Range<usize>| -> Result<ManifoldAcPath<T>> {
        let segments = eta
            .segments()
            .iter()
            .map(|s| {
                Ok(ChartSegment {
                    chart: 0,
                    path: slice_path(&s.path, range.clone())?,
                })
            })
            .collect::<Result<_>>()?;
        ManifoldAcPath::new(m, eta.partition().clone(), segments)
    };
    Ok((part(&m1, 0..d1)?, part(&m2, d1..d)?))
}

/// Inverse of [`split_product`]; both factors must share their partition.
pub fn join_product<T: Real>(first: &ManifoldAcPath<T>, second: &ManifoldAcPath<T>) -> Result<ManifoldAcPath<T>> {
    let (ManifoldTag::Torus(d1), ManifoldTag::Torus(d2)) = (first.tag(), second.tag()) else {
        return Err(Error::InvalidArgument("products are joined on tori only".into()));
    };
    if first.partition() != second.partition() {
        return Err(Error::InvalidArgument("factors must share their partition".into()));
    }
    let m = FlatTorus::new(d1 + d2)?;
    let segments = first
        .segments()
        .iter()
        .zip(second.segments())
        .map(|(a, b)| {
            let grid = a.path.grid().common_refinement(b.path.grid())?;
            let (da, db) = (a.path.density().refine_to(&grid)?, b.path.density().refine_to(&grid)?);
            if da.mode() != db.mode() {
                return Err(Error::InvalidArgument(
                    "factors mix constant and linear densities".into(),
                ));
            }
            let values = da
                .values()
                .iter()
                .zip(db.values())
                .map(|(x, y)| x.iter().chain(y).copied().collect())
                .collect();
            let start = a.path.start().iter().chain(b.path.start()).copied().collect();
            Ok(ChartSegment {
                chart: 0,
                path: AcPath::new(start, LpSample::new(grid, values, da.p(), da.mode())?)?,
            })
        })
        .collect::<Result<_>>()?;
    ManifoldAcPath::new(&m, first.partition().clone(), segments)
}

/// `Evol(γ)` for a periodic velocity on `T^d`; `(id + η(t)) mod 1` is the flow.
pub fn evolve_torus<T: Real>(
    gamma: &TimeVelocity<T, PeriodicField<T>>,
    opts: &EvolveOptions<T>,
) -> Result<EvolutionResult<T, PeriodicField<T>>> {
    evolve(gamma, opts)
}

/// `(x + η(t)(x)) mod 1`.
pub fn torus_flow_point<T: Real>(result: &EvolutionResult<T, PeriodicField<T>>, t: T, x: &[T]) -> Result<Vec<T>> {
    Ok(flow_point(result, t, x)?.into_iter().map(wrap).collect())
}

/// The trajectory `t ↦ (x + η(t)(x)) mod 1` as a torus path through the knots of `η`.
pub fn torus_trajectory<T: Real>(result: &EvolutionResult<T, PeriodicField<T>>, x: &[T]) -> Result<ManifoldAcPath<T>> {
    let path = &result.path;
    let m = FlatTorus::new(path.start().geometry().dim())?;
    let values = path
        .grid()
        .knots()
        .iter()
        .map(|&t| path.apply(t, x))
        .collect::<Result<_>>()?;
    let grid: TimeGrid<T> = path.grid().clone();
    ManifoldAcPath::single(&m, 0, path_through(grid, values, path.p())?)
}
