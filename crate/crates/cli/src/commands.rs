use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use evolflow::evolution::{continuity_probe, flow_point, rk4_oracle, EvolutionResult, TimeVelocity};
use evolflow::formats::{self, ManifoldPathManifest};
use evolflow::manifold_paths::{torus_flow_point, torus_trajectory, wrap, wrap_diff, FlatTorus};
use evolflow::scalar::dist2;
use evolflow::{evolve, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Config;
use crate::output::{deformed_grid_svg, Table};
use crate::{properties, row};

const RELOAD_TOL: f64 = 1e-12;

pub enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Checks(Vec<String>),
}

pub type Outcome = std::result::Result<(), Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn solver_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Solver(e.into())
}

pub struct Ctx {
    pub out: PathBuf,
    pub seed: u64,
    pub render: bool,
    pub verbose: bool,
}

impl Ctx {
    fn rng(&self, instance: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(instance as u64))
    }

    fn log(&self, msg: impl FnOnce() -> String) {
        if self.verbose {
            eprintln!("{}", msg());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn finish(failed: Vec<String>) -> Outcome {
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

fn box_points(rng: &mut impl Rng, lo: &[f64], hi: &[f64], count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| lo.iter().zip(hi).map(|(a, b)| rng.gen_range(*a..*b)).collect())
        .collect()
}

fn segment_rows<F>(table: &mut Table, instance: usize, r: &EvolutionResult<f64, F>) {
    for s in &r.segments {
        table.push(row![
            instance,
            s.index,
            s.contraction,
            s.contraction_lp,
            s.iterations,
            s.residual.map_or(String::new(), |v| v.to_string()),
            s.tolerance,
            s.star_tolerance,
        ]);
    }
}

fn segment_table() -> Table {
    Table::new(&[
        "instance",
        "segment",
        "contraction",
        "contraction_lp",
        "iterations",
        "residual",
        "tolerance",
        "star_tolerance",
    ])
}

fn summary_table() -> Table {
    Table::new(&[
        "instance",
        "bound",
        "n",
        "max_iterations",
        "residual",
        "tolerance",
        "max_oracle_error",
    ])
}

/// Writes the evolution manifest and checks that it reloads to the same path.
fn save_and_reload<F: VectorField<f64>>(dir: &Path, r: &EvolutionResult<f64, F>) -> anyhow::Result<Option<String>> {
    std::fs::create_dir_all(dir)?;
    let manifest = dir.join("evolution.json");
    formats::write_evolution(&manifest, r, "eta")?;
    let back: EvolutionResult<f64, F> = formats::read_evolution(&manifest)?;
    // Knots are rebuilt by summing stored densities, so equality holds up to rounding.
    let drift = back
        .path
        .knots()
        .iter()
        .zip(r.path.knots())
        .map(|(a, b)| a.sub(b).map(|d| d.sup_norm()))
        .collect::<evolflow::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let same = back.n == r.n && back.path.grid().knots() == r.path.grid().knots() && drift <= RELOAD_TOL;
    Ok((!same).then(|| {
        format!(
            "manifest {} does not reload to the computed path (drift {drift:e})",
            manifest.display()
        )
    }))
}

fn residual_check(failed: &mut Vec<String>, instance: usize, residual: Option<f64>, tolerance: f64) {
    match residual {
        Some(r) if r <= tolerance => {}
        Some(r) => failed.push(format!(
            "instance {instance}: residual {r:e} exceeds tolerance {tolerance:e}"
        )),
        None => failed.push(format!("instance {instance}: residual not computed")),
    }
}

pub fn evolve_cmd(cfg: &Config, ctx: &Ctx) -> Outcome {
    let spec = &cfg.evolve;
    let opts = cfg.solver.options();
    let mut summary = summary_table();
    let mut segments = segment_table();
    let mut points = Table::new(&["instance", "point", "x", "flow", "oracle", "error"]);
    let mut failed = Vec::new();
    for i in 0..spec.instances {
        let mut rng = ctx.rng(i);
        let gamma = cfg.compact_velocity(&mut rng).map_err(config_err)?;
        let r = evolve(&gamma, &opts).map_err(solver_err)?;
        ctx.log(|| format!("instance {i}: n = {}, tolerance = {:e}", r.n, r.tolerance));
        let geom = gamma.field(0).geometry();
        let xs = box_points(&mut rng, geom.lo(), &geom.hi(), spec.points);
        let rows = xs
            .par_iter()
            .map(|x| -> anyhow::Result<(Vec<f64>, Vec<f64>, f64)> {
                let y = flow_point(&r, 1.0, x)?;
                let o = rk4_oracle(&gamma, x, spec.oracle_steps)?.end();
                let e = dist2(&y, &o);
                Ok((y, o, e))
            })
            .collect::<anyhow::Result<Vec<_>>>()
            .map_err(solver_err)?;
        let mut worst: f64 = 0.0;
        for (j, (x, (y, o, e))) in xs.iter().zip(&rows).enumerate() {
            worst = worst.max(*e);
            points.push(row![i, j, join(x), join(y), join(o), e]);
        }
        summary.push(row![
            i,
            gamma.contraction_bound().l1,
            r.n,
            r.iterations().into_iter().max().unwrap_or(0),
            r.residual.map_or(String::new(), |v| v.to_string()),
            r.tolerance,
            worst,
        ]);
        segment_rows(&mut segments, i, &r);
        if let Some(limit) = spec.max_oracle_error {
            if worst > limit {
                failed.push(format!("instance {i}: oracle error {worst:e} exceeds {limit:e}"));
            }
        }
        if spec.check_residual {
            residual_check(&mut failed, i, r.residual, r.tolerance);
        }
        if i < spec.manifests {
            let dir = ctx.path(&format!("instance_{i:03}"));
            if let Some(msg) = save_and_reload(&dir, &r).map_err(solver_err)? {
                failed.push(msg);
            }
        }
        if ctx.render && i == 0 {
            render(ctx, geom.lo(), &geom.hi(), |x| {
                flow_point(&r, 1.0, x).unwrap_or_else(|_| x.to_vec())
            })
            .map_err(solver_err)?;
        }
    }
    summary.write(&ctx.path("summary.csv")).map_err(solver_err)?;
    segments.write(&ctx.path("segments.csv")).map_err(solver_err)?;
    points.write(&ctx.path("points.csv")).map_err(solver_err)?;
    finish(failed)
}

pub fn torus_cmd(cfg: &Config, ctx: &Ctx) -> Outcome {
    let spec = &cfg.evolve;
    let opts = cfg.solver.options();
    let mut summary = summary_table();
    let mut segments = segment_table();
    let mut points = Table::new(&["instance", "point", "x", "flow", "oracle", "error"]);
    let mut failed = Vec::new();
    for i in 0..spec.instances {
        let mut rng = ctx.rng(i);
        let gamma = cfg.periodic_velocity(&mut rng).map_err(config_err)?;
        let dim = gamma.dim();
        let r = evolve(&gamma, &opts).map_err(solver_err)?;
        ctx.log(|| format!("instance {i}: n = {}, tolerance = {:e}", r.n, r.tolerance));
        let xs = box_points(&mut rng, &vec![0.0; dim], &vec![1.0; dim], spec.points);
        let rows = xs
            .par_iter()
            .map(|x| -> anyhow::Result<(Vec<f64>, Vec<f64>, f64)> {
                let y = torus_flow_point(&r, 1.0, x)?;
                let o: Vec<f64> = rk4_oracle(&gamma, x, spec.oracle_steps)?
                    .end()
                    .into_iter()
                    .map(wrap)
                    .collect();
                let d: Vec<f64> = y.iter().zip(&o).map(|(a, b)| wrap_diff(a - b)).collect();
                Ok((y, o, d.iter().map(|v| v * v).sum::<f64>().sqrt()))
            })
            .collect::<anyhow::Result<Vec<_>>>()
            .map_err(solver_err)?;
        let mut worst: f64 = 0.0;
        for (j, (x, (y, o, e))) in xs.iter().zip(&rows).enumerate() {
            worst = worst.max(*e);
            points.push(row![i, j, join(x), join(y), join(o), e]);
        }
        summary.push(row![
            i,
            gamma.contraction_bound().l1,
            r.n,
            r.iterations().into_iter().max().unwrap_or(0),
            r.residual.map_or(String::new(), |v| v.to_string()),
            r.tolerance,
            worst,
        ]);
        segment_rows(&mut segments, i, &r);
        if let Some(limit) = spec.max_oracle_error {
            if worst > limit {
                failed.push(format!("instance {i}: oracle error {worst:e} exceeds {limit:e}"));
            }
        }
        if spec.check_residual {
            residual_check(&mut failed, i, r.residual, r.tolerance);
        }
        if i < spec.manifests {
            let dir = ctx.path(&format!("instance_{i:03}"));
            if let Some(msg) = save_and_reload(&dir, &r).map_err(solver_err)? {
                failed.push(msg);
            }
            if let Some(x) = xs.first() {
                let traj = torus_trajectory(&r, x).map_err(solver_err)?;
                let doc = ManifoldPathManifest::from_path(&traj);
                formats::write_json(&dir.join("trajectory.json"), &doc).map_err(solver_err)?;
                let torus = FlatTorus::new(dim).map_err(solver_err)?;
                doc.to_path::<f64>(&torus)
                    .context("reloading trajectory")
                    .map_err(solver_err)?;
            }
        }
        if ctx.render && i == 0 {
            render(ctx, &vec![0.0; dim], &vec![1.0; dim], |x| {
                r.path.apply(1.0, x).unwrap_or_else(|_| x.to_vec())
            })
            .map_err(solver_err)?;
        }
    }
    summary.write(&ctx.path("summary.csv")).map_err(solver_err)?;
    segments.write(&ctx.path("segments.csv")).map_err(solver_err)?;
    points.write(&ctx.path("points.csv")).map_err(solver_err)?;
    finish(failed)
}

pub fn continuity_cmd(cfg: &Config, ctx: &Ctx) -> Outcome {
    let spec = cfg
        .continuity
        .as_ref()
        .ok_or_else(|| config_err(anyhow!("continuity-study needs a continuity block")))?;
    let mut rng = ctx.rng(0);
    let gamma = cfg.compact_velocity(&mut rng).map_err(config_err)?;
    let delta = spec.delta.compact(&mut rng).map_err(config_err)?;
    let delta = TimeVelocity::new(delta.grid().clone(), delta.fields().to_vec(), gamma.p()).map_err(config_err)?;
    let levels = continuity_probe(&gamma, &delta, spec.levels, &cfg.solver.options()).map_err(solver_err)?;
    let mut table = Table::new(&["level", "scale", "distance", "n"]);
    let mut failed = Vec::new();
    for (k, l) in levels.iter().enumerate() {
        ctx.log(|| format!("level {}: distance {:e}", l.level, l.distance));
        table.push(row![l.level, l.scale, l.distance, l.n]);
        if k > 0 && l.distance > spec.monotone_factor * levels[k - 1].distance {
            failed.push(format!(
                "level {}: distance {:e} exceeds {} x previous {:e}",
                l.level,
                l.distance,
                spec.monotone_factor,
                levels[k - 1].distance
            ));
        }
    }
    let last = levels.last().map_or(f64::INFINITY, |l| l.distance);
    if !(last < spec.threshold) {
        failed.push(format!("final distance {last:e} is not below {:e}", spec.threshold));
    }
    table.write(&ctx.path("continuity.csv")).map_err(solver_err)?;
    finish(failed)
}

pub fn subdivision_cmd(cfg: &Config, ctx: &Ctx) -> Outcome {
    let spec = cfg
        .subdivision
        .as_ref()
        .ok_or_else(|| config_err(anyhow!("subdivision-study needs a subdivision block")))?;
    let gamma = cfg.compact_velocity(&mut ctx.rng(0)).map_err(config_err)?;
    let total = gamma.contraction_bound().l1;
    let mut table = Table::new(&["n", "total", "max_budget", "total_over_n", "rel_error"]);
    let mut failed = Vec::new();
    for &n in &spec.ns {
        let budgets = gamma.subdivision_budgets(n).map_err(solver_err)?;
        let max = budgets.iter().copied().fold(0.0, f64::max);
        let expected = total / n as f64;
        let rel = (max - expected).abs() / expected;
        table.push(row![n, total, max, expected, rel]);
        if !(rel <= spec.rel_tol) {
            failed.push(format!("n = {n}: relative error {rel:e} exceeds {:e}", spec.rel_tol));
        }
    }
    table.write(&ctx.path("subdivision.csv")).map_err(solver_err)?;
    finish(failed)
}

pub fn property_cmd(cfg: &Config, ctx: &Ctx) -> Outcome {
    let spec = cfg
        .properties
        .as_ref()
        .ok_or_else(|| config_err(anyhow!("property-check needs a properties block")))?;
    let mut table = Table::new(&["check", "case", "value", "limit", "pass"]);
    let mut failed = Vec::new();
    for name in &spec.checks {
        let rows = properties::run(name, spec.instances, ctx.seed).map_err(solver_err)?;
        for m in rows {
            let pass = m.value <= m.limit;
            ctx.log(|| format!("{name} {}: {:e} <= {:e}", m.case, m.value, m.limit));
            if !pass {
                failed.push(format!("{name} {}: {:e} exceeds {:e}", m.case, m.value, m.limit));
            }
            table.push(row![name, m.case, m.value, m.limit, pass]);
        }
    }
    table.write(&ctx.path("properties.csv")).map_err(solver_err)?;
    finish(failed)
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn render(ctx: &Ctx, lo: &[f64], hi: &[f64], map: impl Fn(&[f64]) -> Vec<f64>) -> anyhow::Result<()> {
    if lo.len() != 2 {
        ctx.log(|| "render skipped: only planar grids are drawn".into());
        return Ok(());
    }
    let svg = deformed_grid_svg([lo[0], lo[1]], [hi[0], hi[1]], 16, |p| {
        let y = map(&p);
        [y[0], y[1]]
    });
    std::fs::write(ctx.path("deformed.svg"), svg)?;
    Ok(())
}
