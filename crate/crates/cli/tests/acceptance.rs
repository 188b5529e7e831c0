//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use evolflow::ac_path::{closure_defect, ContinuousTrace, FnMap, SmoothMap};
use evolflow::diff_group::{inverse, star, star_fields};
use evolflow::evolution::{choose_subdivision, flow_point, picard_operator, EvolveOptions};
use evolflow::manifold_paths::{chart_psi, chart_psi_inv, section_embed, transition, ChartSegment};
use evolflow::scalar::dist2;
use evolflow::vector_field::generate::{self, Cutoff};
use evolflow::vector_field::CrSeminorm;
use evolflow::{
    evolve, AcPath, Circle, CompactField, FlatTorus, Geometry, GroupElement, LocalAddition, LpSample, ManifoldAcPath,
    SampleMode, SectionTuple, TimeGrid, TimeVelocity, VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Velocity = TimeVelocity<f64, CompactField<f64>>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn square(lo: f64, hi: f64, nodes: usize) -> Geometry<f64> {
    Geometry::compact_cube(2, lo, hi, nodes).unwrap()
}

fn random_gamma(r: &mut ChaCha8Rng, geom: &Geometry<f64>, cells: usize, bound: f64) -> Velocity {
    let fields = (0..cells)
        .map(|_| generate::random_smooth(geom.clone(), r, 3, 1.0).unwrap())
        .collect();
    let g = TimeVelocity::new(TimeGrid::unit(cells), fields, 1.0).unwrap();
    let l = g.contraction_bound().l1;
    g.scale(bound / l)
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_cli(command: &str, config: &str, out: &Path, threads: usize) -> (bool, Duration) {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_evolflow"))
        .arg(command)
        .arg("--config")
        .arg(root().join("configs").join(config))
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .status()
        .expect("running evolflow");
    (status.success(), start.elapsed())
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn contraction() -> Verdict {
    let start = Instant::now();
    let mut r = rng(1);
    let geom = square(-2.0, 2.0, 32);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let cells = r.gen_range(1..4);
        let bound = r.gen_range(0.1..0.9);
        let g = random_gamma(&mut r, &geom, cells, bound);
        let x = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
        let grid = TimeGrid::unit(r.gen_range(4..33));
        let mut trace = || {
            ContinuousTrace::from_fn(grid.clone(), |_| vec![r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)]).unwrap()
        };
        let (z1, z2) = (trace(), trace());
        let lhs = picard_operator(&g, &x, &z1)
            .unwrap()
            .sup_distance(&picard_operator(&g, &x, &z2).unwrap())
            .unwrap();
        let rhs = g.contraction_bound().l1 * z1.sup_distance(&z2).unwrap();
        worst = worst.max(lhs - rhs);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-10 && secs < 30.0,
        format!("max excess {worst:e} (slack 1e-10), {secs:.1}s"),
    )
}

fn oracle(out: &Path) -> Verdict {
    let (ok, took) = run_cli("evolve", "oracle.json", out, 1);
    if !ok {
        return verdict(false, "evolve exited with a failure");
    }
    let rows = read_csv(&out.join("points.csv"));
    let worst = rows.iter().map(|r| r[5].parse::<f64>().unwrap()).fold(0.0, f64::max);
    let bounds_ok = read_csv(&out.join("summary.csv"))
        .iter()
        .all(|r| r[1].parse::<f64>().unwrap() <= 0.4 + 1e-12);
    let secs = took.as_secs_f64();
    verdict(
        rows.len() == 1000 && bounds_ok && worst <= 1e-4 && secs < 120.0,
        format!("{} points, max |flow - rk4| {worst:e}, {secs:.1}s", rows.len()),
    )
}

fn closed_forms() -> Verdict {
    let opts = EvolveOptions::default();
    let mut r = rng(3);
    let omega = 0.3;
    let geom = square(-3.0, 3.0, 61);
    let f = generate::plateau_rotation(geom, omega, Cutoff::new(0.8, 2.8)).unwrap();
    let rot = evolve(&TimeVelocity::constant(f, 1.0).unwrap(), &opts).unwrap();
    let mut rot_err: f64 = 0.0;
    for _ in 0..100 {
        let (rad, phase) = (r.gen_range(0.0..0.75), r.gen_range(0.0..std::f64::consts::TAU));
        let x = [rad * phase.cos(), rad * phase.sin()];
        for t in [0.25, 0.5, 1.0] {
            let (c, s) = ((omega * t).cos(), (omega * t).sin());
            let exact = [c * x[0] - s * x[1], s * x[0] + c * x[1]];
            rot_err = rot_err.max(dist2(&flow_point(&rot, t, &x).unwrap(), &exact));
        }
    }
    let v = [0.2, -0.1];
    let f = generate::plateau_constant(square(-2.0, 2.0, 41), &v, Cutoff::new(1.2, 1.8)).unwrap();
    let tr = evolve(&TimeVelocity::constant(f, 1.0).unwrap(), &opts).unwrap();
    let mut tr_err: f64 = 0.0;
    for _ in 0..100 {
        let x = [r.gen_range(-0.9..0.9), r.gen_range(-0.9..0.9)];
        for t in [0.25, 0.5, 1.0] {
            let exact = [x[0] + v[0] * t, x[1] + v[1] * t];
            tr_err = tr_err.max(dist2(&flow_point(&tr, t, &x).unwrap(), &exact));
        }
    }
    let mut outside: f64 = 0.0;
    for x in [[3.5, 0.0], [-3.0001, 2.0], [10.0, -10.0], [0.0, -4.0]] {
        for t in [0.0, 0.4, 1.0] {
            outside = outside.max(dist2(&flow_point(&rot, t, &x).unwrap(), &x));
        }
    }
    for x in [[2.5, 0.0], [-7.0, 1.0]] {
        outside = outside.max(dist2(&flow_point(&tr, 1.0, &x).unwrap(), &x));
    }
    verdict(
        rot_err <= 1e-5 && tr_err <= 1e-5 && outside == 0.0,
        format!("rotation {rot_err:e}, translation {tr_err:e}, outside K {outside:e}"),
    )
}

fn subdivision_consistency() -> Verdict {
    let mut r = rng(4);
    let geom = square(-2.0, 2.0, 32);
    let base = EvolveOptions::default();
    let (mut worst_nn, mut worst_comp) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let cells = r.gen_range(1..4);
        let bound = r.gen_range(0.3..1.5);
        let g = random_gamma(&mut r, &geom, cells, bound);
        let n = choose_subdivision(&g, base.l_max, base.max_subdivision).unwrap();
        let a = evolve(
            &g,
            &EvolveOptions {
                forced_n: Some(n),
                ..base.clone()
            },
        )
        .unwrap();
        let b = evolve(
            &g,
            &EvolveOptions {
                forced_n: Some(2 * n),
                ..base.clone()
            },
        )
        .unwrap();
        let d = a.path.distance(&b.path, &CrSeminorm).unwrap();
        worst_nn = worst_nn.max(d / (a.tolerance + b.tolerance));

        let (c1, b1, c2, b2) = (
            r.gen_range(1..3),
            r.gen_range(0.1..0.4),
            r.gen_range(1..3),
            r.gen_range(0.1..0.4),
        );
        let g1 = random_gamma(&mut r, &geom, c1, b1);
        let g2 = random_gamma(&mut r, &geom, c2, b2);
        let whole = evolve(&TimeVelocity::concat(&g1, &g2).unwrap(), &base).unwrap();
        let e1 = evolve(&g1, &base).unwrap();
        let e2 = evolve(&g2, &base).unwrap();
        let glued = star_fields(e2.path.end(), e1.path.end()).unwrap();
        let d = whole.path.end().sub(&glued.field).unwrap().sup_norm();
        let tol = whole.tolerance + e1.tolerance + e2.tolerance + glued.tolerance;
        worst_comp = worst_comp.max(d / tol);
    }
    verdict(
        worst_nn <= 10.0 && worst_comp <= 10.0,
        format!("n vs 2n {worst_nn:.3} x tolerance, composition {worst_comp:.3} x tolerance (limit 10)"),
    )
}

fn group_axioms() -> Verdict {
    let mut r = rng(5);
    let geom = square(-2.0, 2.0, 41);
    let mut element =
        |alpha: f64| GroupElement::new(generate::random_smooth(geom.clone(), &mut r, 3, alpha).unwrap()).unwrap();
    let (mut neutral, mut inv_worst, mut assoc) = (true, 0.0f64, 0.0f64);
    for i in 0..20 {
        let alpha = 0.05 + 0.25 * i as f64 / 19.0;
        let (a, b, c) = (element(alpha), element(0.2), element(0.25));
        let e = GroupElement::neutral(a.displacement());
        for s in [star(&e, &a).unwrap(), star(&a, &e).unwrap()] {
            neutral &= s.field.displacement().sub(a.displacement()).unwrap().sup_norm() <= s.tolerance;
        }
        let inv = inverse(&a, 1e-10, 200).unwrap();
        inv_worst = inv_worst.max(star(&a, &inv.element).unwrap().field.displacement().sup_norm());
        let ab = star(&a, &b).unwrap();
        let bc = star(&b, &c).unwrap();
        let lhs = star(&ab.field, &c).unwrap();
        let rhs = star(&a, &bc.field).unwrap();
        let d = lhs
            .field
            .displacement()
            .sub(rhs.field.displacement())
            .unwrap()
            .sup_norm();
        assoc = assoc.max(d / (ab.tolerance + bc.tolerance + lhs.tolerance + rhs.tolerance));
    }
    verdict(
        neutral && inv_worst <= 1e-8 && assoc <= 10.0,
        format!("neutral laws {neutral}, inverse {inv_worst:e}, associativity {assoc:.3} x tolerance"),
    )
}

fn subdivision_decay() -> Verdict {
    let mut r = rng(6);
    let geom = square(-2.0, 2.0, 24);
    let mut worst: f64 = 0.0;
    for cells in [1, 3, 5, 16] {
        let f = generate::random_smooth(geom.clone(), &mut r, 3, 1.0).unwrap();
        let g = TimeVelocity::new(TimeGrid::unit(cells), vec![f; cells], 1.0).unwrap();
        let g = g.scale(r.gen_range(0.5..4.0));
        let total = g.contraction_bound().l1;
        for n in [1usize, 2, 4, 8, 16] {
            let max = g.subdivision_budgets(n).unwrap().into_iter().fold(0.0, f64::max);
            let expected = total / n as f64;
            worst = worst.max((max - expected).abs() / expected);
        }
    }
    verdict(worst <= 1e-12, format!("max relative error {worst:e}"))
}

fn continuity(out: &Path) -> Verdict {
    let (ok, took) = run_cli("continuity-study", "continuity.json", out, 1);
    if !ok {
        return verdict(false, "continuity-study exited with a failure");
    }
    let d: Vec<f64> = read_csv(&out.join("continuity.csv"))
        .iter()
        .map(|r| r[2].parse().unwrap())
        .collect();
    let monotone = d.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let last = d.last().copied().unwrap_or(f64::INFINITY);
    verdict(
        d.len() == 6 && monotone && last < 1e-3,
        format!(
            "distances {}, final {last:e}, {:.1}s",
            d.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" "),
            took.as_secs_f64()
        ),
    )
}

fn random_ac(r: &mut ChaCha8Rng, a: f64, b: f64, cells: usize, start: f64, speed: f64) -> AcPath<f64> {
    let grid = TimeGrid::uniform(a, b, cells).unwrap();
    let vals = (0..cells)
        .map(|_| vec![r.gen_range(-speed..speed), r.gen_range(-speed..speed)])
        .collect();
    let x0 = vec![r.gen_range(-start..start), r.gen_range(-start..start)];
    AcPath::new(x0, LpSample::new(grid, vals, 2.0, SampleMode::Constant).unwrap()).unwrap()
}

/// Two chart segments, the second lift shifted by an integer vector.
fn torus_path(r: &mut ChaCha8Rng, m: &FlatTorus) -> ManifoldAcPath<f64> {
    let first = random_ac(r, 0.0, 0.4, 3, 2.0, 3.0);
    let end = first.eval(0.4).unwrap();
    let second = random_ac(r, 0.4, 1.0, 5, 1.0, 3.0);
    let shifted: Vec<f64> = end.iter().map(|x| x - 1.0).collect();
    let second = AcPath::new(shifted, second.density().clone()).unwrap();
    ManifoldAcPath::new(
        m,
        TimeGrid::new(vec![0.0, 0.4, 1.0]).unwrap(),
        vec![
            ChartSegment { chart: 0, path: first },
            ChartSegment { chart: 0, path: second },
        ],
    )
    .unwrap()
}

fn chart_calculus() -> Verdict {
    let mut r = rng(8);
    let t = FlatTorus::new(2).unwrap();
    let (mut roundtrip, mut cocycle, mut fd_worst) = (0.0f64, 0.0f64, 0.0f64);
    let mut cases = 0;
    while cases < 50 {
        let eta = torus_path(&mut r, &t);
        let sigma = section_embed(&t, &eta, &random_ac(&mut r, 0.0, 1.0, 7, 0.1, 0.2)).unwrap();
        let back = chart_psi_inv(&t, &eta, &chart_psi(&t, &eta, &sigma).unwrap()).unwrap();
        roundtrip = roundtrip.max(back.max_difference(&sigma).unwrap());

        let small = section_embed(&t, &eta, &random_ac(&mut r, 0.0, 1.0, 7, 0.1, 0.2))
            .unwrap()
            .scale(0.3);
        let xi = chart_psi(&t, &eta, &small).unwrap();
        let half = sigma.scale(0.5);
        let Ok(there) = transition(&t, &xi, &eta, &half) else {
            continue;
        };
        let again = transition(&t, &eta, &xi, &there).unwrap();
        cocycle = cocycle.max(again.max_difference(&half).unwrap());

        let eps = 1e-5;
        let plus = chart_psi(&t, &eta, &sigma.scale(eps)).unwrap();
        let minus = chart_psi(&t, &eta, &sigma.scale(-eps)).unwrap();
        for j in 0..2 {
            for &s in sigma.parts()[j].grid().knots() {
                let v = sigma.parts()[j].eval(s).unwrap();
                let (p, m) = (plus.coords(j, s).unwrap(), minus.coords(j, s).unwrap());
                let norm = v.iter().fold(1.0f64, |a, b| a.max(b.abs()));
                for i in 0..2 {
                    fd_worst = fd_worst.max(((p[i] - m[i]) / (2.0 * eps) - v[i]).abs() / norm);
                }
            }
        }
        cases += 1;
    }

    let c: &dyn LocalAddition<f64> = &Circle;
    let eta = ManifoldAcPath::new(
        c,
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
    let mut circle: f64 = 0.0;
    for w in [1.0, -0.3, 2.5, 1e-3] {
        circle = circle.max((c.d_chart_transition(0, 1, &[2.0], &[w])[0] + w / 4.0).abs());
        let sigma = AcPath::constant(c.d_from_chart(0, &[2.0], &[w]), 0.0, 1.0, 2.0).unwrap();
        let tuple: SectionTuple<f64> = section_embed(c, &eta, &sigma).unwrap();
        circle = circle.max((tuple.parts()[0].eval(0.25).unwrap()[0] - w).abs());
        circle = circle.max((tuple.parts()[1].eval(0.75).unwrap()[0] + w / 4.0).abs());
        let eps = 1e-5;
        let plus = chart_psi(c, &eta, &tuple.scale(eps)).unwrap();
        let minus = chart_psi(c, &eta, &tuple.scale(-eps)).unwrap();
        for (j, s) in [(0, 0.25), (1, 0.75)] {
            let v = tuple.parts()[j].eval(s).unwrap()[0];
            let fd = (plus.coords(j, s).unwrap()[0] - minus.coords(j, s).unwrap()[0]) / (2.0 * eps);
            fd_worst = fd_worst.max((fd - v).abs() / v.abs().max(1.0));
        }
    }
    verdict(
        roundtrip <= 1e-11 && cocycle <= 1e-11 && circle <= 1e-12 && fd_worst <= 1e-6,
        format!("torus roundtrip {roundtrip:e}, cocycle {cocycle:e}, circle -w/4 {circle:e}, finite differences {fd_worst:e}"),
    )
}

fn ac_identities() -> Verdict {
    let f = FnMap {
        in_dim: 2,
        out_dim: 2,
        f: |x: &[f64]| vec![x[0].sin() * x[1], x[0] * x[0] - x[1].cos()],
        df: |x: &[f64]| vec![vec![x[0].cos() * x[1], x[0].sin()], vec![2.0 * x[0], x[1].sin()]],
        domain: None::<fn(&[f64]) -> bool>,
    };
    let mut r = rng(9);
    let (mut phi, mut closure, mut ends) = (true, 0.0f64, true);
    let mut chain = f64::NEG_INFINITY;
    for _ in 0..200 {
        let cells = r.gen_range(1..6);
        let (a, b) = (r.gen_range(-1.0..0.5), r.gen_range(0.6..2.0));
        let eta = random_ac(&mut r, a, b, cells, 1.0, 1.0);
        let (x0, d) = eta.phi();
        phi &= AcPath::phi_inv(x0, d).unwrap() == eta;
        let split = r.gen_range(1..5);
        let coarse = eta.grid().knots();
        let mut knots: Vec<f64> = coarse
            .windows(2)
            .flat_map(|w| (0..split).map(move |j| w[0] + (w[1] - w[0]) * j as f64 / split as f64))
            .collect();
        knots.push(b);
        let fine = TimeGrid::new(knots).unwrap();
        let (trace, dens) = eta.embed(&fine).unwrap();
        closure = closure.max(closure_defect(&trace, &dens).unwrap());

        let (c, d) = (r.gen_range(-3.0..0.0), r.gen_range(0.1..3.0));
        let rp = eta.reparam(c, d).unwrap();
        ends &= rp.eval(c).unwrap() == eta.eval(a).unwrap();
        ends &= rp.eval(d).unwrap() == eta.eval(b).unwrap();
        ends &= rp.reparam(a, b).unwrap() == eta;

        let unit = random_ac(&mut r, 0.0, 1.0, cells, 1.0, 1.0);
        let s = unit.superpose(&f, r.gen_range(1..6)).unwrap();
        for k in 0..s.grid().cells() {
            let (m, h) = (s.grid().midpoint(k), s.grid().width(k));
            let fp = f.eval(&unit.eval(m + h / 2.0).unwrap());
            let fm = f.eval(&unit.eval(m - h / 2.0).unwrap());
            for i in 0..2 {
                let excess = ((fp[i] - fm[i]) / h - s.density().values()[k][i]).abs() - 10.0 * h * h;
                chain = chain.max(excess);
            }
        }
    }
    verdict(
        phi && closure == 0.0 && ends && chain <= 0.0,
        format!("phi roundtrip {phi}, closure {closure:e}, reparam endpoints {ends}, chain rule excess over 10h^2 {chain:e}"),
    )
}

fn same_bytes(a: &Path, b: &Path, files: &[&str]) -> Vec<String> {
    files
        .iter()
        .filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok())
        .map(|f| f.to_string())
        .collect()
}

fn determinism(oracle_dir: &Path, continuity_dir: &Path, scratch: &Path) -> Verdict {
    let o8 = scratch.join("oracle_t8");
    let c8 = scratch.join("continuity_t8");
    let (ok_o, _) = run_cli("evolve", "oracle.json", &o8, 8);
    let (ok_c, _) = run_cli("continuity-study", "continuity.json", &c8, 8);
    if !(ok_o && ok_c) {
        return verdict(false, "runs with 8 threads failed");
    }
    let mut differ = same_bytes(oracle_dir, &o8, &["points.csv", "summary.csv", "segments.csv"]);
    differ.extend(same_bytes(continuity_dir, &c8, &["continuity.csv"]));
    verdict(
        differ.is_empty(),
        if differ.is_empty() {
            "CSV output identical for 1 and 8 threads".to_string()
        } else {
            format!("differing files: {differ:?}")
        },
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let oracle_dir = scratch.path().join("oracle_t1");
    let continuity_dir = scratch.path().join("continuity_t1");
    let criteria: Vec<Criterion> = vec![
        ("1 contraction inequality", Box::new(contraction)),
        ("2 oracle equivalence", Box::new(|| oracle(&oracle_dir))),
        ("3 closed-form flows", Box::new(closed_forms)),
        ("4 subdivision consistency", Box::new(subdivision_consistency)),
        ("5 group axioms", Box::new(group_axioms)),
        ("6 subdivision decay", Box::new(subdivision_decay)),
        ("7 continuity", Box::new(|| continuity(&continuity_dir))),
        ("8 chart calculus", Box::new(chart_calculus)),
        ("9 AC identities", Box::new(ac_identities)),
        (
            "10 determinism",
            Box::new(|| determinism(&oracle_dir, &continuity_dir, scratch.path())),
        ),
    ];
    let mut failures = 0;
    for (name, check) in &criteria {
        let v = check();
        println!("{} criterion {name}: {}", if v.ok { "PASS" } else { "FAIL" }, v.detail);
        failures += usize::from(!v.ok);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
