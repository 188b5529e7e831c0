//! Manifolds of absolutely continuous paths through a local addition.
//!
//! Two finite-dimensional instances are provided: the flat torus `T^d`
//! ([`FlatTorus`]) and the round circle with its two stereographic charts
//! ([`Circle`]). Compact manifolds beyond the torus are not glued from
//! local charts; [`evolve_torus`] stands in for the general atlas construction.
//!
//! Points are stored in ambient coordinates (`[0,1)^d` for the torus, unit
//! vectors of `R²` for the circle). A [`ManifoldAcPath`] is a partition with one
//! chart-coordinate [`AcPath`] per interval. Sections along a base path are
//! [`SectionTuple`]s: chart-coordinate tangent paths, one per interval, subject to
//! knot compatibility.

mod circle;
mod torus;

use std::fmt;
use std::str::FromStr;

pub use circle::Circle;
pub use torus::{
    evolve_torus, join_product, split_product, torus_flow_point, torus_trajectory, wrap, wrap_diff, FlatTorus,
};

use crate::ac_path::AcPath;
use crate::error::{Error, Result};
use crate::lp_space::{LpSample, SampleMode, TimeGrid};
use crate::scalar::{fmax, Real};

/// Tolerance for continuity of a path and compatibility of a section at shared knots.
pub const KNOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldTag {
    Torus(usize),
    Circle,
}

impl fmt::Display for ManifoldTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldTag::Torus(d) => write!(f, "torus_{d}"),
            ManifoldTag::Circle => f.write_str("circle_stereo"),
        }
    }
}

impl FromStr for ManifoldTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "circle_stereo" {
            return Ok(ManifoldTag::Circle);
        }
        s.strip_prefix("torus_")
            .and_then(|d| d.parse().ok())
            .filter(|&d: &usize| d > 0)
            .map(ManifoldTag::Torus)
            .ok_or_else(|| Error::Format(format!("unknown manifold tag {s:?}")))
    }
}

/// A local addition `Σ: Ω ⊆ TN → N` together with the atlas used for path coordinates.
pub trait LocalAddition<T: Real>: Send + Sync {
    fn tag(&self) -> ManifoldTag;
    /// Length of the ambient point and tangent representation.
    fn point_dim(&self) -> usize;
    fn chart_dim(&self) -> usize;
    /// `ρ_Ω`: `v ∈ Ω` iff `|v| < ρ_Ω` in the manifold's norm.
    fn radius(&self) -> T;
    fn in_omega(&self, p: &[T], v: &[T]) -> bool;
    fn sigma(&self, p: &[T], v: &[T]) -> Vec<T>;
    /// `θ⁻¹(p, q)` as a tangent vector at `p`, `None` outside `Ω′`.
    fn theta_inv(&self, p: &[T], q: &[T]) -> Option<Vec<T>>;
    fn point_distance(&self, p: &[T], q: &[T]) -> T;

    fn theta(&self, p: &[T], v: &[T]) -> (Vec<T>, Vec<T>) {
        (p.to_vec(), self.sigma(p, v))
    }

    fn chart_count(&self) -> usize;
    fn in_chart(&self, chart: usize, p: &[T]) -> bool;
    /// A chart whose domain contains `p` comfortably.
    fn choose_chart(&self, p: &[T]) -> usize;
    fn to_chart(&self, chart: usize, p: &[T]) -> Vec<T>;
    #[allow(clippy::wrong_self_convention)]
    fn from_chart(&self, chart: usize, u: &[T]) -> Vec<T>;
    /// `dφ(p) v`.
    fn d_to_chart(&self, chart: usize, p: &[T], v: &[T]) -> Vec<T>;
    /// `d(φ⁻¹)(u) du`.
    fn d_from_chart(&self, chart: usize, u: &[T], du: &[T]) -> Vec<T>;

    /// True when charts are translations of the ambient coordinates, so sections
    /// embed by restriction.
    fn flat(&self) -> bool {
        false
    }

    /// Chart coordinates of `Σ(φ⁻¹(u), dφ⁻¹(u) τ)`, `None` when leaving `Ω` or the chart.
    fn sigma_chart(&self, chart: usize, u: &[T], tau: &[T]) -> Option<Vec<T>> {
        let p = self.from_chart(chart, u);
        let v = self.d_from_chart(chart, u, tau);
        if !self.in_omega(&p, &v) {
            return None;
        }
        let q = self.sigma(&p, &v);
        self.in_chart(chart, &q).then(|| self.to_chart(chart, &q))
    }

    /// Chart coordinates of `θ⁻¹(φ⁻¹(u), q)`.
    fn theta_inv_chart(&self, chart: usize, u: &[T], q: &[T]) -> Option<Vec<T>> {
        let p = self.from_chart(chart, u);
        let v = self.theta_inv(&p, q)?;
        Some(self.d_to_chart(chart, &p, &v))
    }

    /// `φ_to ∘ φ_from⁻¹`.
    fn chart_transition(&self, from: usize, to: usize, u: &[T]) -> Vec<T> {
        self.to_chart(to, &self.from_chart(from, u))
    }

    /// Tangent map of [`Self::chart_transition`] at `u`.
    fn d_chart_transition(&self, from: usize, to: usize, u: &[T], du: &[T]) -> Vec<T> {
        let p = self.from_chart(from, u);
        self.d_to_chart(to, &p, &self.d_from_chart(from, u, du))
    }
}

/// One interval of a [`ManifoldAcPath`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSegment<T> {
    pub chart: usize,
    pub path: AcPath<T>,
}

/// `η: [a,b] → N` with `φ_j ∘ η|_{[t_{j−1}, t_j]}` absolutely continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldAcPath<T> {
    tag: ManifoldTag,
    partition: TimeGrid<T>,
    segments: Vec<ChartSegment<T>>,
}

fn check_segments<T: Real>(
    m: &dyn LocalAddition<T>,
    partition: &TimeGrid<T>,
    paths: impl Iterator<Item = (usize, usize, T, T, T)>,
) -> Result<()> {
    let mut p_common: Option<T> = None;
    let mut count = 0;
    for (j, (chart, dim, a, b, p)) in paths.enumerate() {
        count += 1;
        if chart >= m.chart_count() {
            return Err(Error::InvalidArgument(format!("chart {chart} does not exist")));
        }
        if dim != m.chart_dim() {
            return Err(Error::DimensionMismatch {
                expected: m.chart_dim(),
                found: dim,
            });
        }
        if j >= partition.cells() || a != partition.knots()[j] || b != partition.knots()[j + 1] {
            return Err(Error::InvalidGrid(format!(
                "segment {j} does not span its partition interval"
            )));
        }
        if p_common.is_some_and(|q| q != p) {
            return Err(Error::InvalidArgument("segments carry different exponents".into()));
        }
        p_common = Some(p);
    }
    if count != partition.cells() {
        return Err(Error::InvalidArgument(format!(
            "{} partition intervals but {count} segments",
            partition.cells()
        )));
    }
    Ok(())
}

impl<T: Real> ManifoldAcPath<T> {
    pub fn new(m: &dyn LocalAddition<T>, partition: TimeGrid<T>, segments: Vec<ChartSegment<T>>) -> Result<Self> {
        check_segments(
            m,
            &partition,
            segments
                .iter()
                .map(|s| (s.chart, s.path.dim(), s.path.a(), s.path.b(), s.path.p())),
        )?;
        let tol = T::lit(KNOT_TOL);
        for j in 1..segments.len() {
            let (l, r) = (&segments[j - 1], &segments[j]);
            let end = m.from_chart(l.chart, &l.path.eval(l.path.b())?);
            let start = m.from_chart(r.chart, r.path.start());
            let defect = m.point_distance(&end, &start);
            if !(defect <= tol) {
                return Err(Error::Incompatible {
                    t: partition.knots()[j].to_f64_(),
                    defect: defect.to_f64_(),
                });
            }
        }
        Ok(Self {
            tag: m.tag(),
            partition,
            segments,
        })
    }

    /// A path covered by one chart.
    pub fn single(m: &dyn LocalAddition<T>, chart: usize, path: AcPath<T>) -> Result<Self> {
        let partition = TimeGrid::new(vec![path.a(), path.b()])?;
        Self::new(m, partition, vec![ChartSegment { chart, path }])
    }

    pub fn tag(&self) -> ManifoldTag {
        self.tag
    }

    pub fn partition(&self) -> &TimeGrid<T> {
        &self.partition
    }

    pub fn segments(&self) -> &[ChartSegment<T>] {
        &self.segments
    }

    pub fn a(&self) -> T {
        self.partition.a()
    }

    pub fn b(&self) -> T {
        self.partition.b()
    }

    pub fn p(&self) -> T {
        self.segments[0].path.p()
    }

    pub fn charts(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.chart).collect()
    }

    /// Chart coordinates of segment `j` at `t`.
    pub fn coords(&self, j: usize, t: T) -> Result<Vec<T>> {
        self.segments[j].path.eval(t)
    }

    /// `η(t)` in ambient coordinates.
    pub fn point_eval(&self, m: &dyn LocalAddition<T>, t: T) -> Result<Vec<T>> {
        check_tag(m, self.tag)?;
        self.partition.check_contains(t)?;
        let j = self.partition.locate(t);
        let s = &self.segments[j];
        Ok(m.from_chart(s.chart, &s.path.eval(t)?))
    }
}

/// `ζ_q`: the constant path at `q`.
pub fn const_path<T: Real>(m: &dyn LocalAddition<T>, q: &[T], a: T, b: T, p: T) -> Result<ManifoldAcPath<T>> {
    if q.len() != m.point_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.point_dim(),
            found: q.len(),
        });
    }
    let chart = m.choose_chart(q);
    ManifoldAcPath::single(m, chart, AcPath::constant(m.to_chart(chart, q), a, b, p)?)
}

pub fn point_eval<T: Real>(m: &dyn LocalAddition<T>, eta: &ManifoldAcPath<T>, t: T) -> Result<Vec<T>> {
    eta.point_eval(m, t)
}

/// An element of `Γ_AC(η)` through the embedding `Φ_{η,P}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionTuple<T> {
    base: ManifoldAcPath<T>,
    parts: Vec<AcPath<T>>,
}

impl<T: Real> SectionTuple<T> {
    /// Checks `τ_i(t_i) = dφ_i ∘ (Tφ_{i+1})⁻¹(φ_{i+1}η(t_i), τ_{i+1}(t_i))` at interior knots.
    pub fn new(m: &dyn LocalAddition<T>, base: ManifoldAcPath<T>, parts: Vec<AcPath<T>>) -> Result<Self> {
        check_tag(m, base.tag)?;
        if parts.len() != base.segments.len() {
            return Err(Error::InvalidArgument(format!(
                "{} segments but {} section parts",
                base.segments.len(),
                parts.len()
            )));
        }
        check_segments(
            m,
            &base.partition,
            base.segments
                .iter()
                .zip(&parts)
                .map(|(s, tau)| (s.chart, tau.dim(), tau.a(), tau.b(), tau.p())),
        )?;
        let tol = T::lit(KNOT_TOL);
        for j in 1..parts.len() {
            let t = base.partition.knots()[j];
            let (cl, cr) = (base.segments[j - 1].chart, base.segments[j].chart);
            let u = base.segments[j].path.start();
            let expected = m.d_chart_transition(cr, cl, u, parts[j].start());
            let got = parts[j - 1].eval(t)?;
            let defect = expected
                .iter()
                .zip(&got)
                .fold(T::zero(), |acc, (&x, &y)| fmax(acc, (x - y).abs()));
            if !(defect <= tol) {
                return Err(Error::Incompatible {
                    t: t.to_f64_(),
                    defect: defect.to_f64_(),
                });
            }
        }
        Ok(Self { base, parts })
    }

    /// The zero section along `base`.
    pub fn zero(m: &dyn LocalAddition<T>, base: &ManifoldAcPath<T>) -> Result<Self> {
        let parts = base
            .segments
            .iter()
            .map(|s| AcPath::constant(vec![T::zero(); s.path.dim()], s.path.a(), s.path.b(), s.path.p()))
            .collect::<Result<_>>()?;
        Self::new(m, base.clone(), parts)
    }

    pub fn base(&self) -> &ManifoldAcPath<T> {
        &self.base
    }

    pub fn parts(&self) -> &[AcPath<T>] {
        &self.parts
    }

    pub fn charts(&self) -> Vec<usize> {
        self.base.charts()
    }

    /// `s·σ`, linear in every chart.
    pub fn scale(&self, s: T) -> Self {
        Self {
            base: self.base.clone(),
            parts: self.parts.iter().map(|p| p.scale(s)).collect(),
        }
    }

    /// `σ₁ + σ₂` over the same base.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::InvalidArgument("sections live over different base paths".into()));
        }
        let parts = self
            .parts
            .iter()
            .zip(&other.parts)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            base: self.base.clone(),
            parts,
        })
    }

    /// Largest coordinate difference at the knots of both tuples' grids.
    pub fn max_difference(&self, other: &Self) -> Result<T> {
        if self.parts.len() != other.parts.len() {
            return Err(Error::InvalidArgument("tuples have different lengths".into()));
        }
        let mut worst = T::zero();
        for (a, b) in self.parts.iter().zip(&other.parts) {
            let grid = a.grid().common_refinement(b.grid())?;
            for &t in grid.knots() {
                for (x, y) in a.eval(t)?.iter().zip(b.eval(t)?) {
                    worst = fmax(worst, (*x - y).abs());
                }
            }
        }
        Ok(worst)
    }
}

fn check_tag<T: Real>(m: &dyn LocalAddition<T>, tag: ManifoldTag) -> Result<()> {
    if m.tag() == tag {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "path lives on {tag}, not on {}",
            m.tag()
        )))
    }
}

/// Knots of `grids` inside `[c, d]`, plus both endpoints.
fn knots_within<T: Real>(grids: &[&TimeGrid<T>], c: T, d: T) -> Result<TimeGrid<T>> {
    let mut k: Vec<T> = grids
        .iter()
        .flat_map(|g| g.knots().iter().copied())
        .filter(|&t| t > c && t < d)
        .collect();
    k.push(c);
    k.push(d);
    k.sort_by(|x, y| x.partial_cmp(y).expect("finite knots"));
    k.dedup();
    TimeGrid::new(k)
}

/// Values of `path` at the knots of `grid`, which must refine the path's grid.
fn values_on<T: Real>(path: &AcPath<T>, grid: &TimeGrid<T>) -> Result<Vec<Vec<T>>> {
    Ok(path.embed(grid)?.0.values().to_vec())
}

/// The AC path through `values` at the knots of `grid`, linear in between.
fn path_through<T: Real>(grid: TimeGrid<T>, values: Vec<Vec<T>>, p: T) -> Result<AcPath<T>> {
    let density = (0..grid.cells())
        .map(|c| {
            let w = grid.width(c);
            values[c]
                .iter()
                .zip(&values[c + 1])
                .map(|(&x, &y)| (y - x) / w)
                .collect()
        })
        .collect();
    let start = values.into_iter().next().expect("at least one knot");
    AcPath::new(start, LpSample::new(grid, density, p, SampleMode::Constant)?)
}

/// Restriction of an AC path to `[c, d]`; the density keeps its values.
fn restrict<T: Real>(path: &AcPath<T>, c: T, d: T) -> Result<AcPath<T>> {
    let fine = knots_within(&[path.grid()], c, d)?;
    let full = path
        .grid()
        .common_refinement(&knots_within(&[path.grid(), &fine], path.a(), path.b())?)?;
    let dens = path.density().refine_to(&full)?;
    let lo = full.knots().iter().position(|&t| t == c).expect("c is a knot");
    let hi = full.knots().iter().position(|&t| t == d).expect("d is a knot");
    let values = match dens.mode() {
        SampleMode::Constant => dens.values()[lo..hi].to_vec(),
        SampleMode::Linear => dens.values()[lo..=hi].to_vec(),
    };
    AcPath::new(path.eval(c)?, LpSample::new(fine, values, path.p(), dens.mode())?)
}

/// Joins consecutive AC paths; each piece's start is dropped after the first.
fn concat<T: Real>(pieces: &[AcPath<T>]) -> Result<AcPath<T>> {
    let mode = pieces[0].density().mode();
    let mut knots = vec![pieces[0].a()];
    let mut values: Vec<Vec<T>> = Vec::new();
    for (i, piece) in pieces.iter().enumerate() {
        if piece.density().mode() != mode {
            return Err(Error::InvalidArgument(
                "pieces mix constant and linear densities".into(),
            ));
        }
        knots.extend_from_slice(&piece.grid().knots()[1..]);
        let v = piece.density().values();
        match mode {
            SampleMode::Constant => values.extend_from_slice(v),
            SampleMode::Linear if i == 0 => values.extend_from_slice(v),
            SampleMode::Linear => {
                let last = values.last().expect("earlier piece");
                if last != &v[0] {
                    return Err(Error::InvalidArgument("linear densities jump at a junction".into()));
                }
                values.extend_from_slice(&v[1..]);
            }
        }
    }
    AcPath::new(
        pieces[0].start().to_vec(),
        LpSample::new(TimeGrid::new(knots)?, values, pieces[0].p(), mode)?,
    )
}

/// `Ψ_η(τ) = Σ ∘ τ`, evaluated per knot; densities are the difference quotients.
pub fn chart_psi<T: Real>(
    m: &dyn LocalAddition<T>,
    eta: &ManifoldAcPath<T>,
    tau: &SectionTuple<T>,
) -> Result<ManifoldAcPath<T>> {
    check_tag(m, eta.tag)?;
    if tau.base.partition != eta.partition || tau.base.charts() != eta.charts() {
        return Err(Error::InvalidArgument("section is not along the given path".into()));
    }
    let segments = eta
        .segments
        .iter()
        .zip(&tau.parts)
        .map(|(s, part)| {
            let grid = s.path.grid().common_refinement(part.grid())?;
            let (us, ws) = (values_on(&s.path, &grid)?, values_on(part, &grid)?);
            let values = grid
                .knots()
                .iter()
                .zip(us.iter().zip(&ws))
                .map(|(&t, (u, w))| {
                    m.sigma_chart(s.chart, u, w)
                        .ok_or(Error::OutsideDomain { t: t.to_f64_() })
                })
                .collect::<Result<_>>()?;
            Ok(ChartSegment {
                chart: s.chart,
                path: path_through(grid, values, s.path.p())?,
            })
        })
        .collect::<Result<_>>()?;
    ManifoldAcPath::new(m, eta.partition.clone(), segments)
}

/// `Ψ_η⁻¹(γ) = θ⁻¹ ∘ (η, γ)` in the charts of `η`.
pub fn chart_psi_inv<T: Real>(
    m: &dyn LocalAddition<T>,
    eta: &ManifoldAcPath<T>,
    gamma: &ManifoldAcPath<T>,
) -> Result<SectionTuple<T>> {
    check_tag(m, eta.tag)?;
    check_tag(m, gamma.tag)?;
    eta.partition.check_same_interval(&gamma.partition)?;
    let gamma_grids: Vec<&TimeGrid<T>> = gamma.segments.iter().map(|s| s.path.grid()).collect();
    let mut parts = Vec::with_capacity(eta.segments.len());
    for (j, s) in eta.segments.iter().enumerate() {
        let (c, d) = (eta.partition.knots()[j], eta.partition.knots()[j + 1]);
        let mut grids = gamma_grids.clone();
        grids.push(s.path.grid());
        let grid = knots_within(&grids, c, d)?;
        let us = values_on(&s.path, &grid)?;
        let values = grid
            .knots()
            .iter()
            .zip(&us)
            .map(|(&t, u)| {
                let q = gamma_point_near(m, gamma, t, j, eta)?;
                m.theta_inv_chart(s.chart, u, &q)
                    .ok_or(Error::OutsideDomain { t: t.to_f64_() })
            })
            .collect::<Result<_>>()?;
        parts.push(path_through(grid, values, s.path.p())?);
    }
    SectionTuple::new(m, eta.clone(), parts)
}

/// `γ(t)`, read from the segment of `γ` aligned with segment `j` of `η` when both share a partition.
fn gamma_point_near<T: Real>(
    m: &dyn LocalAddition<T>,
    gamma: &ManifoldAcPath<T>,
    t: T,
    j: usize,
    eta: &ManifoldAcPath<T>,
) -> Result<Vec<T>> {
    if gamma.partition == eta.partition {
        let s = &gamma.segments[j];
        Ok(m.from_chart(s.chart, &s.path.eval(t)?))
    } else {
        gamma.point_eval(m, t)
    }
}

/// `Λ_{ξ,η} = Ψ_ξ⁻¹ ∘ Ψ_η`: re-expresses a section along `η` as one along `ξ`.
pub fn transition<T: Real>(
    m: &dyn LocalAddition<T>,
    xi: &ManifoldAcPath<T>,
    eta: &ManifoldAcPath<T>,
    sigma: &SectionTuple<T>,
) -> Result<SectionTuple<T>> {
    chart_psi_inv(m, xi, &chart_psi(m, eta, sigma)?)
}

/// `Φ_{η,P}`: a section given in ambient tangent coordinates, split into chart coordinates
/// `dφ_i ∘ σ` along the partition and charts of `η`.
pub fn section_embed<T: Real>(
    m: &dyn LocalAddition<T>,
    eta: &ManifoldAcPath<T>,
    sigma: &AcPath<T>,
) -> Result<SectionTuple<T>> {
    check_tag(m, eta.tag)?;
    eta.partition.check_same_interval(sigma.grid())?;
    if sigma.dim() != m.point_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.point_dim(),
            found: sigma.dim(),
        });
    }
    let mut parts = Vec::with_capacity(eta.segments.len());
    for (j, s) in eta.segments.iter().enumerate() {
        let (c, d) = (eta.partition.knots()[j], eta.partition.knots()[j + 1]);
        if m.flat() {
            parts.push(restrict(sigma, c, d)?);
            continue;
        }
        let local = restrict(sigma, c, d)?;
        let grid = local.grid().common_refinement(s.path.grid())?;
        let (us, vs) = (values_on(&s.path, &grid)?, values_on(&local, &grid)?);
        let values = us
            .iter()
            .zip(&vs)
            .map(|(u, v)| m.d_to_chart(s.chart, &m.from_chart(s.chart, u), v))
            .collect();
        parts.push(path_through(grid, values, s.path.p())?);
    }
    SectionTuple::new(m, eta.clone(), parts)
}

/// Inverse of [`section_embed`]; compatibility was verified when the tuple was built.
pub fn section_glue<T: Real>(m: &dyn LocalAddition<T>, tau: &SectionTuple<T>) -> Result<AcPath<T>> {
    check_tag(m, tau.base.tag)?;
    if m.flat() {
        return concat(&tau.parts);
    }
    let mut knots = Vec::new();
    let mut values = Vec::new();
    for (j, (s, part)) in tau.base.segments.iter().zip(&tau.parts).enumerate() {
        let grid = s.path.grid().common_refinement(part.grid())?;
        let (us, ws) = (values_on(&s.path, &grid)?, values_on(part, &grid)?);
        let skip = usize::from(j > 0);
        for (k, &t) in grid.knots().iter().enumerate().skip(skip) {
            knots.push(t);
            values.push(m.d_from_chart(s.chart, &us[k], &ws[k]));
        }
    }
    path_through(TimeGrid::new(knots)?, values, tau.base.p())
}

/// Smallest margin `ρ_Ω − |θ⁻¹(η(t), γ(t))|` over the knots of both paths; positive iff
/// `γ ∈ U_η` at those knots.
pub fn overlap_margin<T: Real>(
    m: &dyn LocalAddition<T>,
    eta: &ManifoldAcPath<T>,
    gamma: &ManifoldAcPath<T>,
) -> Result<T> {
    check_tag(m, eta.tag)?;
    check_tag(m, gamma.tag)?;
    let grids: Vec<&TimeGrid<T>> = eta
        .segments
        .iter()
        .chain(&gamma.segments)
        .map(|s| s.path.grid())
        .collect();
    let grid = knots_within(&grids, eta.a(), eta.b())?;
    let mut margin = m.radius();
    for &t in grid.knots() {
        let (p, q) = (eta.point_eval(m, t)?, gamma.point_eval(m, t)?);
        let r = match m.theta_inv(&p, &q) {
            Some(v) => m.radius() - tangent_norm(m, &v),
            None => T::zero(),
        };
        margin = margin.min(r);
    }
    Ok(margin)
}

/// The norm defining `Ω`: sup norm on the torus, Euclidean on the circle.
fn tangent_norm<T: Real>(m: &dyn LocalAddition<T>, v: &[T]) -> T {
    match m.tag() {
        ManifoldTag::Torus(_) => v.iter().fold(T::zero(), |a, &x| fmax(a, x.abs())),
        ManifoldTag::Circle => crate::scalar::norm2(v),
    }
}

#[cfg(test)]
mod tests;
