//! Experiment configuration: one JSON file per run.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use evolflow::evolution::{EvolveOptions, TimeVelocity};
use evolflow::formats;
use evolflow::vector_field::generate::{self, Cutoff};
use evolflow::{CompactField, Geometry, PeriodicField, TimeGrid, VectorField};
use rand::Rng;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: Option<u64>,
    pub velocity: VelocitySpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub evolve: EvolveSpec,
    #[serde(default)]
    pub continuity: Option<ContinuitySpec>,
    #[serde(default)]
    pub subdivision: Option<SubdivisionSpec>,
    #[serde(default)]
    pub properties: Option<PropertySpec>,
    /// Directory of the config file; manifest paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A velocity read from a manifest or produced by a generator.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum VelocitySpec {
    Manifest { manifest: String },
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub nodes: usize,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub plateau: f64,
    pub zero: f64,
}

fn default_p() -> f64 {
    1.0
}

fn default_cells() -> usize {
    1
}

fn default_modes() -> usize {
    3
}

/// Velocity generators. `bound` fixes `‖γ‖_{L¹,α}` by rescaling.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Zero {
        grid: GridSpec,
        #[serde(default = "default_p")]
        p: f64,
    },
    RandomSmooth {
        grid: GridSpec,
        #[serde(default = "default_cells")]
        cells: usize,
        #[serde(default = "default_modes")]
        modes: usize,
        bound: f64,
        #[serde(default = "default_p")]
        p: f64,
    },
    /// One random field repeated in every cell, so `α` is constant in time.
    ConstantAlpha {
        grid: GridSpec,
        cells: usize,
        #[serde(default = "default_modes")]
        modes: usize,
        bound: f64,
        #[serde(default = "default_p")]
        p: f64,
    },
    PlateauRotation {
        grid: GridSpec,
        omega: f64,
        cutoff: CutoffSpec,
        #[serde(default = "default_p")]
        p: f64,
    },
    PlateauConstant {
        grid: GridSpec,
        vector: Vec<f64>,
        cutoff: CutoffSpec,
        #[serde(default = "default_p")]
        p: f64,
    },
    RandomPeriodic {
        grid: GridSpec,
        #[serde(default = "default_cells")]
        cells: usize,
        #[serde(default = "default_modes")]
        modes: usize,
        bound: f64,
        #[serde(default = "default_p")]
        p: f64,
    },
    PeriodicConstant {
        grid: GridSpec,
        vector: Vec<f64>,
        #[serde(default = "default_p")]
        p: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub l_max: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub time_cells: usize,
    pub forced_n: Option<usize>,
    pub max_subdivision: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = EvolveOptions::<f64>::default();
        Self {
            l_max: d.l_max,
            tol: d.tol,
            max_iter: d.max_iter,
            time_cells: d.time_cells,
            forced_n: d.forced_n,
            max_subdivision: d.max_subdivision,
        }
    }
}

impl SolverSpec {
    pub fn options(&self) -> EvolveOptions<f64> {
        EvolveOptions {
            l_max: self.l_max,
            tol: self.tol,
            max_iter: self.max_iter,
            time_cells: self.time_cells,
            forced_n: self.forced_n,
            max_subdivision: self.max_subdivision,
            compute_residual: true,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.l_max > 0.0 && self.l_max < 1.0, "solver.l_max must lie in (0, 1)");
        ensure!(self.tol > 0.0, "solver.tol must be positive");
        ensure!(self.max_iter > 0, "solver.max_iter must be positive");
        ensure!(self.forced_n != Some(0), "solver.forced_n must be positive");
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSpec {
    /// Independent velocities drawn from the generator, seeded `seed + i`.
    pub instances: usize,
    /// Random start points per instance for the oracle comparison.
    pub points: usize,
    pub oracle_steps: usize,
    /// Check: `|flow − oracle| ≤ max_oracle_error` at every point.
    pub max_oracle_error: Option<f64>,
    /// Check: residual within the declared tolerance.
    pub check_residual: bool,
    /// Instances whose manifests are written (and re-loaded).
    pub manifests: usize,
}

impl Default for EvolveSpec {
    fn default() -> Self {
        Self {
            instances: 1,
            points: 0,
            oracle_steps: 4096,
            max_oracle_error: None,
            check_residual: false,
            manifests: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuitySpec {
    pub delta: GeneratorSpec,
    pub levels: usize,
    pub threshold: f64,
    #[serde(default = "default_monotone")]
    pub monotone_factor: f64,
}

fn default_monotone() -> f64 {
    1.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubdivisionSpec {
    pub ns: Vec<usize>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySpec {
    pub checks: Vec<String>,
    #[serde(default = "default_property_instances")]
    pub instances: usize,
}

fn default_property_instances() -> usize {
    10
}

pub const PROPERTY_CHECKS: [&str; 4] = ["contraction", "group_axioms", "chart_calculus", "ac_identities"];

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Config = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if let VelocitySpec::Generator(g) = &self.velocity {
            g.validate()?;
        }
        let e = &self.evolve;
        ensure!(e.instances > 0, "evolve.instances must be positive");
        ensure!(e.oracle_steps > 0, "evolve.oracle_steps must be positive");
        if let Some(m) = e.max_oracle_error {
            ensure!(m > 0.0, "evolve.max_oracle_error must be positive");
        }
        if let Some(c) = &self.continuity {
            c.delta.validate()?;
            ensure!(c.levels >= 2, "continuity.levels must be at least 2");
            ensure!(c.threshold > 0.0, "continuity.threshold must be positive");
            ensure!(
                c.monotone_factor >= 1.0,
                "continuity.monotone_factor must be at least 1"
            );
        }
        if let Some(s) = &self.subdivision {
            ensure!(
                !s.ns.is_empty() && s.ns.iter().all(|&n| n > 0),
                "subdivision.ns must list positive counts"
            );
            ensure!(s.rel_tol > 0.0, "subdivision.rel_tol must be positive");
        }
        if let Some(p) = &self.properties {
            ensure!(p.instances > 0, "properties.instances must be positive");
            for c in &p.checks {
                ensure!(PROPERTY_CHECKS.contains(&c.as_str()), "unknown property check {c:?}");
            }
        }
        Ok(())
    }

    pub fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn compact_velocity(&self, rng: &mut impl Rng) -> Result<TimeVelocity<f64, CompactField<f64>>> {
        match &self.velocity {
            VelocitySpec::Manifest { manifest } => {
                Ok(formats::read_time_velocity(&self.resolve(manifest)).context("loading velocity manifest")?)
            }
            VelocitySpec::Generator(g) => g.compact(rng),
        }
    }

    pub fn periodic_velocity(&self, rng: &mut impl Rng) -> Result<TimeVelocity<f64, PeriodicField<f64>>> {
        match &self.velocity {
            VelocitySpec::Manifest { manifest } => {
                Ok(formats::read_time_velocity(&self.resolve(manifest)).context("loading velocity manifest")?)
            }
            VelocitySpec::Generator(g) => g.periodic(rng),
        }
    }
}

impl GridSpec {
    fn compact(&self) -> Result<Geometry<f64>> {
        let (Some(lo), Some(hi)) = (self.lo, self.hi) else {
            bail!("compact grids need lo and hi");
        };
        ensure!(hi > lo, "grid hi must exceed lo");
        Ok(Geometry::compact_cube(self.dim, lo, hi, self.nodes)?)
    }

    fn periodic(&self) -> Result<Geometry<f64>> {
        ensure!(
            self.lo.is_none() && self.hi.is_none(),
            "periodic grids live on [0, 1) and take no lo/hi"
        );
        Ok(Geometry::periodic(self.dim, self.nodes)?)
    }
}

fn scaled<F: VectorField<f64>>(fields: Vec<F>, p: f64, bound: f64) -> Result<TimeVelocity<f64, F>> {
    let cells = fields.len();
    let g = TimeVelocity::new(TimeGrid::unit(cells), fields, p)?;
    let l = g.contraction_bound().l1;
    ensure!(l > 0.0, "generated velocity vanishes");
    Ok(g.scale(bound / l))
}

impl GeneratorSpec {
    fn validate(&self) -> Result<()> {
        use GeneratorSpec::*;
        let p = match self {
            Zero { p, .. }
            | RandomSmooth { p, .. }
            | ConstantAlpha { p, .. }
            | PlateauRotation { p, .. }
            | PlateauConstant { p, .. }
            | RandomPeriodic { p, .. }
            | PeriodicConstant { p, .. } => *p,
        };
        ensure!(p >= 1.0, "exponent p must be at least 1");
        match self {
            RandomSmooth { cells, bound, .. }
            | ConstantAlpha { cells, bound, .. }
            | RandomPeriodic { cells, bound, .. } => {
                ensure!(*cells > 0, "generator cells must be positive");
                ensure!(*bound > 0.0, "generator bound must be positive");
            }
            PlateauRotation { cutoff, .. } | PlateauConstant { cutoff, .. } => {
                ensure!(
                    cutoff.plateau > 0.0 && cutoff.zero > cutoff.plateau,
                    "cutoff needs 0 < plateau < zero"
                );
            }
            _ => {}
        }
        Ok(())
    }

    pub fn compact(&self, rng: &mut impl Rng) -> Result<TimeVelocity<f64, CompactField<f64>>> {
        use GeneratorSpec::*;
        match self {
            Zero { grid, p } => Ok(TimeVelocity::zero(&CompactField::zeros(grid.compact()?)?, *p)?),
            RandomSmooth {
                grid,
                cells,
                modes,
                bound,
                p,
            } => {
                let geom = grid.compact()?;
                let fields = (0..*cells)
                    .map(|_| generate::random_smooth(geom.clone(), rng, *modes, 1.0))
                    .collect::<evolflow::Result<Vec<_>>>()?;
                scaled(fields, *p, *bound)
            }
            ConstantAlpha {
                grid,
                cells,
                modes,
                bound,
                p,
            } => {
                let f = generate::random_smooth(grid.compact()?, rng, *modes, 1.0)?;
                scaled(vec![f; *cells], *p, *bound)
            }
            PlateauRotation { grid, omega, cutoff, p } => {
                let f = generate::plateau_rotation(grid.compact()?, *omega, Cutoff::new(cutoff.plateau, cutoff.zero))?;
                Ok(TimeVelocity::constant(f, *p)?)
            }
            PlateauConstant {
                grid,
                vector,
                cutoff,
                p,
            } => {
                ensure!(vector.len() == grid.dim, "vector length must match the grid dimension");
                let f = generate::plateau_constant(grid.compact()?, vector, Cutoff::new(cutoff.plateau, cutoff.zero))?;
                Ok(TimeVelocity::constant(f, *p)?)
            }
            RandomPeriodic { .. } | PeriodicConstant { .. } => {
                bail!("periodic generators need the torus-evolve command")
            }
        }
    }

    pub fn periodic(&self, rng: &mut impl Rng) -> Result<TimeVelocity<f64, PeriodicField<f64>>> {
        use GeneratorSpec::*;
        match self {
            Zero { grid, p } => Ok(TimeVelocity::zero(&PeriodicField::zeros(grid.periodic()?)?, *p)?),
            RandomPeriodic {
                grid,
                cells,
                modes,
                bound,
                p,
            } => {
                let geom = grid.periodic()?;
                let fields = (0..*cells)
                    .map(|_| generate::random_periodic(geom.clone(), rng, *modes, 1.0))
                    .collect::<evolflow::Result<Vec<_>>>()?;
                scaled(fields, *p, *bound)
            }
            PeriodicConstant { grid, vector, p } => {
                ensure!(vector.len() == grid.dim, "vector length must match the grid dimension");
                Ok(TimeVelocity::constant(
                    PeriodicField::constant(grid.periodic()?, vector)?,
                    *p,
                )?)
            }
            _ => bail!("generator {self:?} produces compactly supported fields"),
        }
    }
}
