//! On-disk representations.
//!
//! JSON documents mirror the in-memory types with `f64` numbers; an exponent
//! `p = ∞` is written as the string `"inf"`. Spline fields are stored in the
//! binary `CFLD` layout (little endian):
//!
//! ```text
//! b"CFLD"  u32 dim  u64 counts[dim]  f64 lo[dim]  f64 hi[dim]  f64 h  f64 coeffs[nodes * dim]
//! ```
//!
//! with coefficients node-major (last axis fastest), component-minor, and a JSON
//! sidecar `{kind, chart, r, alpha}` next to the file (same stem, `.json`).
//! Manifests reference field files by paths relative to the manifest directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::ac_path::AcPath;
use crate::diff_group::GroupPath;
use crate::error::{Error, Result};
use crate::evolution::{EvolutionResult, SegmentReport, TimeVelocity};
use crate::lp_space::{LpSample, SampleMode, TimeGrid};
use crate::manifold_paths::{ChartSegment, LocalAddition, ManifoldAcPath, ManifoldTag};
use crate::scalar::Real;
use crate::vector_field::{Geometry, SplineCore, Support, VectorField};

const MAGIC: &[u8; 4] = b"CFLD";

/// `p ∈ [1, ∞]`: a number, or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(InfTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

impl Exponent {
    pub fn from_real<T: Real>(p: T) -> Self {
        if p.is_infinite() {
            Exponent::Named(InfTag::Inf)
        } else {
            Exponent::Finite(p.to_f64_())
        }
    }

    pub fn to_real<T: Real>(self) -> T {
        match self {
            Exponent::Finite(p) => T::lit(p),
            Exponent::Named(InfTag::Inf) => T::infinity(),
        }
    }
}

fn to_f64s<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_()).collect()
}

fn from_f64s<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSampleDoc {
    pub a: f64,
    pub b: f64,
    pub p: Exponent,
    pub mode: String,
    pub knots: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl LpSampleDoc {
    pub fn from_sample<T: Real>(s: &LpSample<T>) -> Self {
        Self {
            a: s.grid().a().to_f64_(),
            b: s.grid().b().to_f64_(),
            p: Exponent::from_real(s.p()),
            mode: match s.mode() {
                SampleMode::Constant => "constant".into(),
                SampleMode::Linear => "linear".into(),
            },
            knots: to_f64s(s.grid().knots()),
            values: s.values().iter().map(|v| to_f64s(v)).collect(),
        }
    }

    pub fn to_sample<T: Real>(&self) -> Result<LpSample<T>> {
        let mode = match self.mode.as_str() {
            "constant" => SampleMode::Constant,
            "linear" => SampleMode::Linear,
            other => return Err(Error::Format(format!("unknown sample mode {other:?}"))),
        };
        let grid: TimeGrid<T> = TimeGrid::new(from_f64s(&self.knots))?;
        if grid.a().to_f64_() != self.a || grid.b().to_f64_() != self.b {
            return Err(Error::Format("interval does not match the knots".into()));
        }
        let values = self.values.iter().map(|v| from_f64s(v)).collect();
        LpSample::new(grid, values, self.p.to_real(), mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcPathDoc {
    pub start: Vec<f64>,
    pub density: LpSampleDoc,
}

impl AcPathDoc {
    pub fn from_path<T: Real>(p: &AcPath<T>) -> Self {
        Self {
            start: to_f64s(p.start()),
            density: LpSampleDoc::from_sample(p.density()),
        }
    }

    pub fn to_path<T: Real>(&self) -> Result<AcPath<T>> {
        AcPath::new(from_f64s(&self.start), self.density.to_sample()?)
    }
}

/// JSON sidecar of a `CFLD` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    /// `"compact"` or `"periodic"`.
    pub kind: String,
    /// `"global"` for `Diff_K(R^n)`, `"torus"` for `Diff(T^d)`.
    pub chart: String,
    pub r: u32,
    pub alpha: f64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `field` to `path` and its sidecar next to it.
pub fn write_field<T: Real, F: VectorField<T>>(path: &Path, field: &F) -> Result<()> {
    let geom = field.geometry();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(geom.dim() as u32)?;
    for &c in geom.counts() {
        w.write_u64::<LittleEndian>(c as u64)?;
    }
    for &x in geom.lo() {
        w.write_f64::<LittleEndian>(x.to_f64_())?;
    }
    for x in geom.hi() {
        w.write_f64::<LittleEndian>(x.to_f64_())?;
    }
    w.write_f64::<LittleEndian>(geom.h().to_f64_())?;
    for &c in field.core().coefficients() {
        w.write_f64::<LittleEndian>(c.to_f64_())?;
    }
    w.flush()?;
    let (kind, chart) = match geom.support() {
        Support::Compact => ("compact", "global"),
        Support::Periodic => ("periodic", "torus"),
    };
    let meta = FieldMeta {
        kind: kind.into(),
        chart: chart.into(),
        r: 1,
        alpha: field.alpha().to_f64_(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a `CFLD` file. The support kind follows from the header (`hi − lo = counts · h`
/// for periodic grids) and must agree with the sidecar when one exists.
pub fn read_field<T: Real, F: VectorField<T>>(path: &Path) -> Result<F> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{} is not a CFLD file", path.display())));
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    if !(1..=crate::vector_field::MAX_DIM).contains(&dim) {
        return Err(Error::Format(format!("unsupported field dimension {dim}")));
    }
    let counts = (0..dim)
        .map(|_| Ok(r.read_u64::<LittleEndian>()? as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut floats = |n: usize| -> Result<Vec<f64>> { (0..n).map(|_| Ok(r.read_f64::<LittleEndian>()?)).collect() };
    let lo = floats(dim)?;
    let hi = floats(dim)?;
    let h = floats(1)?[0];
    let periodic = lo
        .iter()
        .zip(&hi)
        .zip(&counts)
        .all(|((&l, &u), &c)| l == 0.0 && u == 1.0 && (h * c as f64 - 1.0).abs() < 1e-12)
        && counts.iter().all(|&c| c == counts[0]);
    let geom = if periodic {
        Geometry::periodic(dim, counts[0])?
    } else {
        Geometry::compact(&from_f64s::<T>(&lo), &counts, T::lit(h))?
    };
    let n = geom.node_count() * dim;
    let coeffs = floats(n)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!(
            "{} trailing bytes after coefficients",
            rest.len()
        )));
    }
    let side = sidecar_path(path);
    if side.exists() {
        let meta: FieldMeta = read_json(&side)?;
        let expected = if periodic { "periodic" } else { "compact" };
        if meta.kind != expected {
            return Err(Error::Format(format!(
                "sidecar declares a {} field but the header describes a {expected} grid",
                meta.kind
            )));
        }
    }
    F::from_core(SplineCore::new(geom, from_f64s(&coeffs))?)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn resolve(dir: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

/// `{p, knots[], field_files[]}`: one field per time cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeVelocityManifest {
    pub p: Exponent,
    pub knots: Vec<f64>,
    pub field_files: Vec<String>,
}

/// Writes the manifest to `path` and fields as `<prefix>_<cell>.cfld` beside it.
pub fn write_time_velocity<T: Real, F: VectorField<T>>(
    path: &Path,
    gamma: &TimeVelocity<T, F>,
    prefix: &str,
) -> Result<()> {
    let dir = parent(path);
    let mut files = Vec::with_capacity(gamma.fields().len());
    for (c, f) in gamma.fields().iter().enumerate() {
        let name = format!("{prefix}_{c:04}.cfld");
        write_field(&dir.join(&name), f)?;
        files.push(name);
    }
    write_json(
        path,
        &TimeVelocityManifest {
            p: Exponent::from_real(gamma.p()),
            knots: to_f64s(gamma.grid().knots()),
            field_files: files,
        },
    )
}

pub fn read_time_velocity<T: Real, F: VectorField<T>>(path: &Path) -> Result<TimeVelocity<T, F>> {
    let m: TimeVelocityManifest = read_json(path)?;
    let dir = parent(path);
    let fields = m
        .field_files
        .iter()
        .map(|f| read_field(&resolve(dir, f)))
        .collect::<Result<Vec<F>>>()?;
    TimeVelocity::new(TimeGrid::new(from_f64s(&m.knots))?, fields, m.p.to_real())
}

/// `{p, knots[], start, density_files[]}`: the start displacement and one constant
/// density field per time cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPathManifest {
    pub p: Exponent,
    pub knots: Vec<f64>,
    pub start: String,
    pub density_files: Vec<String>,
}

pub fn write_group_path<T: Real, F: VectorField<T>>(
    dir: &Path,
    path: &GroupPath<T, F>,
    prefix: &str,
) -> Result<GroupPathManifest> {
    let start = format!("{prefix}_start.cfld");
    write_field(&dir.join(&start), path.start())?;
    let mut files = Vec::with_capacity(path.grid().cells());
    for c in 0..path.grid().cells() {
        let name = format!("{prefix}_density_{c:04}.cfld");
        write_field(&dir.join(&name), &path.density(c)?)?;
        files.push(name);
    }
    Ok(GroupPathManifest {
        p: Exponent::from_real(path.p()),
        knots: to_f64s(path.grid().knots()),
        start,
        density_files: files,
    })
}

/// Rebuilds knot displacements by accumulating `w_c · density_c` from the start.
pub fn read_group_path<T: Real, F: VectorField<T>>(dir: &Path, m: &GroupPathManifest) -> Result<GroupPath<T, F>> {
    let grid = TimeGrid::new(from_f64s(&m.knots))?;
    if m.density_files.len() != grid.cells() {
        return Err(Error::Format(format!(
            "{} cells but {} density files",
            grid.cells(),
            m.density_files.len()
        )));
    }
    let mut knots: Vec<F> = vec![read_field(&resolve(dir, &m.start))?];
    for (c, f) in m.density_files.iter().enumerate() {
        let d: F = read_field(&resolve(dir, f))?;
        let next = knots[c].axpy(grid.width(c), &d)?;
        knots.push(next);
    }
    GroupPath::new(grid, knots, m.p.to_real())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub index: usize,
    pub contraction: f64,
    pub contraction_lp: f64,
    pub iterations: usize,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub star_tolerance: f64,
}

impl SegmentDoc {
    pub fn from_report<T: Real>(s: &SegmentReport<T>) -> Self {
        Self {
            index: s.index,
            contraction: s.contraction.to_f64_(),
            contraction_lp: s.contraction_lp.to_f64_(),
            iterations: s.iterations,
            residual: s.residual.map(|r| r.to_f64_()),
            tolerance: s.tolerance.to_f64_(),
            star_tolerance: s.star_tolerance.to_f64_(),
        }
    }

    pub fn to_report<T: Real>(&self) -> SegmentReport<T> {
        SegmentReport {
            index: self.index,
            contraction: T::lit(self.contraction),
            contraction_lp: T::lit(self.contraction_lp),
            iterations: self.iterations,
            residual: self.residual.map(T::lit),
            tolerance: T::lit(self.tolerance),
            star_tolerance: T::lit(self.star_tolerance),
        }
    }
}

/// `{n, segments[], residual, iterations[], tolerance, path}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionManifest {
    pub n: usize,
    pub segments: Vec<SegmentDoc>,
    pub residual: Option<f64>,
    pub iterations: Vec<usize>,
    pub tolerance: f64,
    pub path: GroupPathManifest,
}

/// Writes `result` as `path` with field files `<prefix>_*.cfld` beside it.
pub fn write_evolution<T: Real, F: VectorField<T>>(
    path: &Path,
    result: &EvolutionResult<T, F>,
    prefix: &str,
) -> Result<()> {
    let gp = write_group_path(parent(path), &result.path, prefix)?;
    write_json(
        path,
        &EvolutionManifest {
            n: result.n,
            segments: result.segments.iter().map(SegmentDoc::from_report).collect(),
            residual: result.residual.map(|r| r.to_f64_()),
            iterations: result.iterations(),
            tolerance: result.tolerance.to_f64_(),
            path: gp,
        },
    )
}

pub fn read_evolution<T: Real, F: VectorField<T>>(path: &Path) -> Result<EvolutionResult<T, F>> {
    let m: EvolutionManifest = read_json(path)?;
    if m.segments.len() != m.n || m.iterations.len() != m.n {
        return Err(Error::Format(format!(
            "manifest lists {} segments for n = {}",
            m.segments.len(),
            m.n
        )));
    }
    if m.segments.iter().zip(&m.iterations).any(|(s, &i)| s.iterations != i) {
        return Err(Error::Format(
            "iteration counts disagree with the segment reports".into(),
        ));
    }
    Ok(EvolutionResult {
        n: m.n,
        segments: m.segments.iter().map(SegmentDoc::to_report).collect(),
        path: read_group_path(parent(path), &m.path)?,
        residual: m.residual.map(T::lit),
        tolerance: T::lit(m.tolerance),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSegmentDoc {
    pub chart: usize,
    pub acpath: AcPathDoc,
}

/// `{manifold, partition[], segments: [{chart, acpath}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPathManifest {
    pub manifold: String,
    pub partition: Vec<f64>,
    pub segments: Vec<ChartSegmentDoc>,
}

impl ManifoldPathManifest {
    pub fn from_path<T: Real>(eta: &ManifoldAcPath<T>) -> Self {
        Self {
            manifold: eta.tag().to_string(),
            partition: to_f64s(eta.partition().knots()),
            segments: eta
                .segments()
                .iter()
                .map(|s| ChartSegmentDoc {
                    chart: s.chart,
                    acpath: AcPathDoc::from_path(&s.path),
                })
                .collect(),
        }
    }

    pub fn to_path<T: Real>(&self, m: &dyn LocalAddition<T>) -> Result<ManifoldAcPath<T>> {
        let tag: ManifoldTag = self.manifold.parse()?;
        if tag != m.tag() {
            return Err(Error::Format(format!("manifest is on {tag}, expected {}", m.tag())));
        }
        let segments = self
            .segments
            .iter()
            .map(|s| {
                Ok(ChartSegment {
                    chart: s.chart,
                    path: s.acpath.to_path()?,
                })
            })
            .collect::<Result<_>>()?;
        ManifoldAcPath::new(m, TimeGrid::new(from_f64s(&self.partition))?, segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve, EvolveOptions};
    use crate::manifold_paths::{Circle, FlatTorus};
    use crate::vector_field::generate;
    use crate::vector_field::{CompactField, PeriodicField};
    use rand::SeedableRng;

    #[test]
    fn exponent_encoding() {
        assert_eq!(
            serde_json::to_string(&Exponent::from_real(f64::INFINITY)).unwrap(),
            "\"inf\""
        );
        assert_eq!(serde_json::to_string(&Exponent::from_real(2.0f64)).unwrap(), "2.0");
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(e.to_real::<f64>().is_infinite());
        assert!(serde_json::from_str::<Exponent>("\"infinity\"").is_err());
    }

    #[test]
    fn lp_and_ac_documents_roundtrip() {
        let grid = TimeGrid::new(vec![0.0, 0.3, 1.0]).unwrap();
        let s = LpSample::new(
            grid,
            vec![vec![1.5, -2.0], vec![0.1, 1e-300]],
            f64::INFINITY,
            SampleMode::Constant,
        )
        .unwrap();
        let json = serde_json::to_string(&LpSampleDoc::from_sample(&s)).unwrap();
        let back: LpSample<f64> = serde_json::from_str::<LpSampleDoc>(&json).unwrap().to_sample().unwrap();
        assert_eq!(back, s);
        let eta = AcPath::new(vec![0.25, -1.0], s).unwrap();
        let doc = AcPathDoc::from_path(&eta);
        assert_eq!(doc.to_path::<f64>().unwrap(), eta);
        let mut bad = doc.density.clone();
        bad.mode = "cubic".into();
        assert!(bad.to_sample::<f64>().is_err());
    }

    #[test]
    fn field_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let geom = Geometry::<f64>::compact_cube(2, -1.0, 1.0, 17).unwrap();
        let f = generate::random_smooth(geom, &mut rng, 3, 0.4).unwrap();
        let path = dir.path().join("f.cfld");
        write_field(&path, &f).unwrap();
        let g: CompactField<f64> = read_field(&path).unwrap();
        assert_eq!(g.coefficients(), f.coefficients());
        assert_eq!(g.geometry(), f.geometry());
        let meta: FieldMeta = read_json(&sidecar_path(&path)).unwrap();
        assert_eq!(meta.kind, "compact");
        assert!((meta.alpha - f.alpha()).abs() < 1e-15);

        let p = generate::random_periodic(Geometry::<f64>::periodic(2, 12).unwrap(), &mut rng, 2, 0.3).unwrap();
        let path = dir.path().join("p.cfld");
        write_field(&path, &p).unwrap();
        let q: PeriodicField<f64> = read_field(&path).unwrap();
        assert_eq!(q.coefficients(), p.coefficients());
        assert!(read_field::<f64, CompactField<f64>>(&path).is_err());

        std::fs::write(dir.path().join("junk.cfld"), b"NOPE").unwrap();
        assert!(matches!(
            read_field::<f64, CompactField<f64>>(&dir.path().join("junk.cfld")),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn evolution_manifest_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let geom = Geometry::<f64>::compact_cube(2, -1.0, 1.0, 17).unwrap();
        let fields: Vec<_> = (0..2)
            .map(|_| generate::random_smooth(geom.clone(), &mut rng, 2, 0.3).unwrap())
            .collect();
        let gamma = TimeVelocity::new(TimeGrid::unit(2), fields, 2.0).unwrap();
        let vpath = dir.path().join("gamma.json");
        write_time_velocity(&vpath, &gamma, "gamma").unwrap();
        let back: TimeVelocity<f64, CompactField<f64>> = read_time_velocity(&vpath).unwrap();
        assert_eq!(back.grid(), gamma.grid());
        assert_eq!(back.alphas(), gamma.alphas());

        let opts = EvolveOptions {
            time_cells: 16,
            ..EvolveOptions::default()
        };
        let res = evolve(&gamma, &opts).unwrap();
        let rpath = dir.path().join("result.json");
        write_evolution(&rpath, &res, "eta").unwrap();
        let again: EvolutionResult<f64, CompactField<f64>> = read_evolution(&rpath).unwrap();
        assert_eq!(again.n, res.n);
        assert_eq!(again.segments, res.segments);
        assert_eq!(again.residual, res.residual);
        for (a, b) in again.path.knots().iter().zip(res.path.knots()) {
            let d = a.sub(b).unwrap();
            assert!(d.coefficients().iter().all(|c| c.abs() < 1e-14));
        }
    }

    #[test]
    fn manifold_manifest_roundtrip() {
        let c = Circle;
        let eta = ManifoldAcPath::new(
            &c,
            TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap(),
            vec![
                ChartSegment {
                    chart: 0,
                    path: AcPath::constant(vec![2.0], 0.0, 0.5, 2.0).unwrap(),
                },
                ChartSegment {
                    chart: 1,
                    path: AcPath::constant(vec![0.5], 0.5, 1.0, 2.0).unwrap(),
                },
            ],
        )
        .unwrap();
        let doc = ManifoldPathManifest::from_path(&eta);
        assert_eq!(doc.manifold, "circle_stereo");
        let json = serde_json::to_string(&doc).unwrap();
        let back = serde_json::from_str::<ManifoldPathManifest>(&json)
            .unwrap()
            .to_path(&c)
            .unwrap();
        assert_eq!(back, eta);
        assert!(doc.to_path::<f64>(&FlatTorus::new(1).unwrap()).is_err());
    }
}
