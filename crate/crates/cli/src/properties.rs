//! Randomized property checks reported as `value <= limit` rows.

use anyhow::{bail, Result};
use evolflow::ac_path::{closure_defect, ContinuousTrace, FnMap, SmoothMap};
use evolflow::diff_group::{inverse, star};
use evolflow::evolution::picard_operator;
use evolflow::manifold_paths::{chart_psi, chart_psi_inv, section_embed, transition, ChartSegment};
use evolflow::vector_field::generate;
use evolflow::{
    AcPath, Circle, CompactField, FlatTorus, Geometry, GroupElement, LocalAddition, LpSample, ManifoldAcPath,
    SampleMode, SectionTuple, TimeGrid, TimeVelocity, VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Measurement {
    pub case: String,
    pub value: f64,
    pub limit: f64,
}

fn m(case: impl Into<String>, value: f64, limit: f64) -> Measurement {
    Measurement {
        case: case.into(),
        value,
        limit,
    }
}

pub fn run(name: &str, instances: usize, seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "contraction" => contraction(&mut rng, instances),
        "group_axioms" => group_axioms(&mut rng, instances),
        "chart_calculus" => chart_calculus(&mut rng, instances),
        "ac_identities" => ac_identities(&mut rng, instances),
        other => bail!("unknown property check {other:?}"),
    }
}

fn square(nodes: usize) -> Result<Geometry<f64>> {
    Ok(Geometry::compact_cube(2, -2.0, 2.0, nodes)?)
}

fn contraction(rng: &mut ChaCha8Rng, instances: usize) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    for i in 0..instances {
        let bound = rng.gen_range(0.1..0.9);
        let geom = square(32)?;
        let fields = (0..3)
            .map(|_| generate::random_smooth(geom.clone(), rng, 3, 1.0))
            .collect::<evolflow::Result<Vec<_>>>()?;
        let g = TimeVelocity::new(TimeGrid::unit(3), fields, 1.0)?;
        let g = g.scale(bound / g.contraction_bound().l1);
        let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let mut trace = || {
            ContinuousTrace::from_fn(TimeGrid::unit(17), |_| {
                vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]
            })
        };
        let (z1, z2) = (trace()?, trace()?);
        let lhs = picard_operator(&g, &x, &z1)?.sup_distance(&picard_operator(&g, &x, &z2)?)?;
        let rhs = g.contraction_bound().l1 * z1.sup_distance(&z2)?;
        out.push(m(format!("instance_{i}"), lhs - rhs, 1e-10));
    }
    Ok(out)
}

fn element(rng: &mut ChaCha8Rng, alpha: f64) -> Result<GroupElement<f64, CompactField<f64>>> {
    Ok(GroupElement::new(generate::random_smooth(square(41)?, rng, 3, alpha)?)?)
}

fn group_axioms(rng: &mut ChaCha8Rng, instances: usize) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    for i in 0..instances {
        let (a, b, c) = (element(rng, 0.3)?, element(rng, 0.2)?, element(rng, 0.2)?);
        let e = GroupElement::neutral(a.displacement());
        let left = star(&e, &a)?;
        let d = left.field.displacement().sub(a.displacement())?.sup_norm();
        out.push(m(format!("neutral_left_{i}"), d, left.tolerance));
        let right = star(&a, &e)?;
        let d = right.field.displacement().sub(a.displacement())?.sup_norm();
        out.push(m(format!("neutral_right_{i}"), d, right.tolerance));
        let inv = inverse(&a, 1e-10, 200)?;
        let cancel = star(&a, &inv.element)?;
        out.push(m(format!("inverse_{i}"), cancel.field.displacement().sup_norm(), 1e-8));
        let ab = star(&a, &b)?;
        let bc = star(&b, &c)?;
        let l = star(&ab.field, &c)?;
        let r = star(&a, &bc.field)?;
        let d = l.field.displacement().sub(r.field.displacement())?.sup_norm();
        let tol = ab.tolerance + bc.tolerance + l.tolerance + r.tolerance;
        out.push(m(format!("associativity_{i}"), d, 10.0 * tol));
    }
    Ok(out)
}

fn random_ac(
    rng: &mut ChaCha8Rng,
    dim: usize,
    a: f64,
    b: f64,
    cells: usize,
    start: f64,
    speed: f64,
) -> Result<AcPath<f64>> {
    let grid = TimeGrid::uniform(a, b, cells)?;
    let vals = (0..cells)
        .map(|_| (0..dim).map(|_| rng.gen_range(-speed..speed)).collect())
        .collect();
    let x0 = (0..dim).map(|_| rng.gen_range(-start..start)).collect();
    Ok(AcPath::new(x0, LpSample::new(grid, vals, 2.0, SampleMode::Constant)?)?)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn chart_calculus(rng: &mut ChaCha8Rng, instances: usize) -> Result<Vec<Measurement>> {
    let torus = FlatTorus::new(2)?;
    let mut out = Vec::new();
    for i in 0..instances {
        let eta = ManifoldAcPath::single(&torus, 0, random_ac(rng, 2, 0.0, 1.0, 5, 2.0, 3.0)?)?;
        let sigma = section_embed(&torus, &eta, &random_ac(rng, 2, 0.0, 1.0, 7, 0.1, 0.2)?)?;
        let gamma = chart_psi(&torus, &eta, &sigma)?;
        let back = chart_psi_inv(&torus, &eta, &gamma)?;
        out.push(m(format!("torus_roundtrip_{i}"), back.max_difference(&sigma)?, 1e-11));
        let small = section_embed(&torus, &eta, &random_ac(rng, 2, 0.0, 1.0, 7, 0.1, 0.2)?)?.scale(0.3);
        let xi = chart_psi(&torus, &eta, &small)?;
        let there = transition(&torus, &xi, &eta, &sigma.scale(0.5))?;
        let again = transition(&torus, &eta, &xi, &there)?;
        out.push(m(
            format!("torus_cocycle_{i}"),
            again.max_difference(&sigma.scale(0.5))?,
            1e-11,
        ));

        let eps = 1e-5;
        let plus = chart_psi(&torus, &eta, &sigma.scale(eps))?;
        let minus = chart_psi(&torus, &eta, &sigma.scale(-eps))?;
        let mut worst: f64 = 0.0;
        for &s in sigma.parts()[0].grid().knots() {
            let fd: Vec<f64> = plus
                .coords(0, s)?
                .iter()
                .zip(minus.coords(0, s)?)
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect();
            let v = sigma.parts()[0].eval(s)?;
            let scale = v.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            worst = worst.max(sup_diff(&fd, &v) / scale);
        }
        out.push(m(format!("torus_local_addition_fd_{i}"), worst, 1e-6));
    }
    let c: &dyn LocalAddition<f64> = &Circle;
    let eta = ManifoldAcPath::new(
        c,
        TimeGrid::new(vec![0.0, 0.5, 1.0])?,
        vec![
            ChartSegment {
                chart: 0,
                path: AcPath::constant(vec![2.0], 0.0, 0.5, 2.0)?,
            },
            ChartSegment {
                chart: 1,
                path: AcPath::constant(vec![0.5], 0.5, 1.0, 2.0)?,
            },
        ],
    )?;
    for w in [1.0, -0.3, 2.5] {
        let sigma = AcPath::constant(c.d_from_chart(0, &[2.0], &[w]), 0.0, 1.0, 2.0)?;
        let tuple: SectionTuple<f64> = section_embed(c, &eta, &sigma)?;
        let got = tuple.parts()[1].eval(0.75)?[0];
        out.push(m(format!("circle_transition_w{w}"), (got + w / 4.0).abs(), 1e-12));
    }
    Ok(out)
}

fn ac_identities(rng: &mut ChaCha8Rng, instances: usize) -> Result<Vec<Measurement>> {
    let f = FnMap {
        in_dim: 2,
        out_dim: 2,
        f: |x: &[f64]| vec![x[0].sin() * x[1], x[0] * x[0] - x[1].cos()],
        df: |x: &[f64]| vec![vec![x[0].cos() * x[1], x[0].sin()], vec![2.0 * x[0], x[1].sin()]],
        domain: None::<fn(&[f64]) -> bool>,
    };
    let mut out = Vec::new();
    for i in 0..instances {
        let cells = rng.gen_range(1..6);
        let eta = random_ac(rng, 2, 0.0, 1.0, cells, 1.0, 1.0)?;
        let (x0, d) = eta.phi();
        let back = AcPath::phi_inv(x0, d)?;
        out.push(m(format!("phi_roundtrip_{i}"), f64::from(u8::from(back != eta)), 0.0));
        let (trace, dens) = eta.embed(&TimeGrid::unit(cells * 4))?;
        out.push(m(format!("closure_{i}"), closure_defect(&trace, &dens)?, 0.0));
        let (c, d) = (rng.gen_range(-2.0..0.0), rng.gen_range(0.5..3.0));
        let r = eta.reparam(c, d)?;
        let e0 = sup_diff(&r.eval(c)?, &eta.eval(0.0)?);
        let e1 = sup_diff(&r.eval(d)?, &eta.eval(1.0)?);
        out.push(m(format!("reparam_endpoints_{i}"), e0.max(e1), 0.0));
        let refine = rng.gen_range(1..6);
        let s = eta.superpose(&f, refine)?;
        let mut excess = f64::NEG_INFINITY;
        for k in 0..s.grid().cells() {
            let (mid, h) = (s.grid().midpoint(k), s.grid().width(k));
            let fp = f.eval(&eta.eval(mid + h / 2.0)?);
            let fm = f.eval(&eta.eval(mid - h / 2.0)?);
            for j in 0..2 {
                let fd = (fp[j] - fm[j]) / h;
                excess = excess.max((fd - s.density().values()[k][j]).abs() - 10.0 * h * h);
            }
        }
        out.push(m(format!("chain_rule_{i}"), excess, 0.0));
    }
    Ok(out)
}
