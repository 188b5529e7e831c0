use super::*;
use crate::evolution::{rk4_oracle, EvolveOptions, TimeVelocity};
use crate::vector_field::generate;
use crate::vector_field::{Geometry, PeriodicField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(wrap_diff(x - y).abs()))
}

fn random_ac(r: &mut ChaCha8Rng, dim: usize, a: f64, b: f64, cells: usize, start: f64, speed: f64) -> AcPath<f64> {
    let grid = TimeGrid::uniform(a, b, cells).unwrap();
    let vals = (0..cells)
        .map(|_| (0..dim).map(|_| r.gen_range(-speed..speed)).collect())
        .collect();
    let x0 = (0..dim)
        .map(|_| if start > 0.0 { r.gen_range(-start..start) } else { 0.0 })
        .collect();
    AcPath::new(x0, LpSample::new(grid, vals, 2.0, SampleMode::Constant).unwrap()).unwrap()
}

/// A two-segment torus path whose second lift is shifted by an integer vector.
fn random_torus_path(r: &mut ChaCha8Rng, dim: usize) -> ManifoldAcPath<f64> {
    let m = FlatTorus::new(dim).unwrap();
    let first = random_ac(r, dim, 0.0, 0.4, 3, 2.0, 3.0);
    let end = first.eval(0.4).unwrap();
    let mut second = random_ac(r, dim, 0.4, 1.0, 5, 0.0, 3.0);
    let shifted: Vec<f64> = end.iter().map(|x| x + 1.0).collect();
    second = AcPath::new(shifted, second.density().clone()).unwrap();
    let partition = TimeGrid::new(vec![0.0, 0.4, 1.0]).unwrap();
    ManifoldAcPath::new(
        &m,
        partition,
        vec![
            ChartSegment { chart: 0, path: first },
            ChartSegment { chart: 0, path: second },
        ],
    )
    .unwrap()
}

/// A section along `eta` with `|τ| ≤ 0.3`.
fn random_torus_section(r: &mut ChaCha8Rng, eta: &ManifoldAcPath<f64>) -> SectionTuple<f64> {
    let m = FlatTorus::new(eta.segments()[0].path.dim()).unwrap();
    let dim = m.dim();
    let sigma = random_ac(r, dim, 0.0, 1.0, 7, 0.1, 0.2);
    section_embed(&m, eta, &sigma).unwrap()
}

fn unit(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}

#[test]
fn tags_roundtrip() {
    for tag in [ManifoldTag::Torus(2), ManifoldTag::Torus(1), ManifoldTag::Circle] {
        assert_eq!(tag.to_string().parse::<ManifoldTag>().unwrap(), tag);
    }
    assert!("torus_0".parse::<ManifoldTag>().is_err());
    assert!("sphere".parse::<ManifoldTag>().is_err());
}

#[test]
fn wrap_conventions() {
    assert_eq!(wrap(1.25), 0.25);
    assert_eq!(wrap(-0.25), 0.75);
    assert_eq!(wrap(-1e-20), 0.0);
    assert_eq!(wrap_diff(0.5), 0.5);
    assert_eq!(wrap_diff(-0.5), 0.5);
    assert_eq!(wrap_diff(1.5), 0.5);
    assert!((wrap_diff(0.7f64) + 0.3).abs() < 1e-15);
    assert!((wrap_diff(-0.2f64) + 0.2).abs() < 1e-15);
}

#[test]
fn local_addition_axioms_on_the_torus() {
    let m = FlatTorus::new(3).unwrap();
    let mut r = rng(1);
    for _ in 0..200 {
        let p: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let v: Vec<f64> = (0..3).map(|_| r.gen_range(-0.49..0.49)).collect();
        assert_eq!(m.sigma(&p, &[0.0; 3]), p);
        let q = m.sigma(&p, &v);
        assert!(sup_diff(&m.theta_inv(&p, &q).unwrap(), &v) < 1e-14);
        let (p2, q2) = m.theta(&p, &m.theta_inv(&p, &q).unwrap());
        assert_eq!(p2, p);
        assert!(torus_dist(&q2, &q) < 1e-15);
        let eps = 1e-6;
        let plus = m.sigma(&p, &v.iter().map(|x| x * eps).collect::<Vec<_>>());
        let minus = m.sigma(&p, &v.iter().map(|x| -x * eps).collect::<Vec<_>>());
        let fd: Vec<f64> = plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| wrap_diff(a - b) / (2.0 * eps))
            .collect();
        assert!(sup_diff(&fd, &v) < 1e-6);
    }
    assert!(m.theta_inv(&[0.0; 3], &[0.5, 0.0, 0.0]).is_none());
}

#[test]
fn local_addition_axioms_on_the_circle() {
    let m: &dyn LocalAddition<f64> = &Circle;
    let mut r = rng(2);
    for _ in 0..200 {
        let p = unit(r.gen_range(0.0..std::f64::consts::TAU));
        let s = r.gen_range(-3.0..3.0);
        let v = vec![-p[1] * s, p[0] * s];
        assert_eq!(m.sigma(&p, &[0.0, 0.0]), p);
        let q = m.sigma(&p, &v);
        assert!((q[0] * q[0] + q[1] * q[1] - 1.0).abs() < 1e-14);
        assert!(sup_diff(&m.theta_inv(&p, &q).unwrap(), &v) < 1e-12);
        let eps = 1e-6;
        let plus = m.sigma(&p, &[v[0] * eps, v[1] * eps]);
        let minus = m.sigma(&p, &[-v[0] * eps, -v[1] * eps]);
        let fd = [(plus[0] - minus[0]) / (2.0 * eps), (plus[1] - minus[1]) / (2.0 * eps)];
        assert!(sup_diff(&fd, &v) < 1e-6);
    }
    assert!(m.theta_inv(&[1.0, 0.0], &[-1.0, 0.0]).is_none());
}

#[test]
fn stereographic_charts() {
    let m: &dyn LocalAddition<f64> = &Circle;
    let mut r = rng(3);
    for _ in 0..100 {
        let u = [r.gen_range(-5.0..5.0)];
        for chart in 0..2 {
            let p = m.from_chart(chart, &u);
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-14);
            assert!((m.to_chart(chart, &p)[0] - u[0]).abs() < 1e-12 * (1.0 + u[0].abs()));
            let du = [r.gen_range(-1.0..1.0)];
            let v = m.d_from_chart(chart, &u, &du);
            assert!((v[0] * p[0] + v[1] * p[1]).abs() < 1e-14);
            assert!((m.d_to_chart(chart, &p, &v)[0] - du[0]).abs() < 1e-12 * (1.0 + u[0] * u[0]));
        }
        if u[0].abs() > 1e-3 {
            assert!((m.chart_transition(0, 1, &u)[0] - 1.0 / u[0]).abs() < 1e-12 / u[0].abs());
            let d = m.d_chart_transition(0, 1, &u, &[1.0])[0];
            assert!((d + 1.0 / (u[0] * u[0])).abs() < 1e-11 / (u[0] * u[0]));
        }
    }
}

#[test]
fn constant_paths_and_point_evaluation() {
    let t = FlatTorus::new(2).unwrap();
    let q = vec![0.2, 0.9];
    let z = const_path(&t, &q, 0.0, 1.0, 2.0).unwrap();
    assert_eq!(point_eval(&t, &z, 0.37).unwrap(), q);
    assert!(z.segments()[0]
        .path
        .density()
        .values()
        .iter()
        .flatten()
        .all(|&x| x == 0.0));
    let c: &dyn LocalAddition<f64> = &Circle;
    for angle in [0.3, 1.7, -1.2, 3.0] {
        let q = unit(angle);
        let z = const_path(c, &q, 0.0, 1.0, 2.0).unwrap();
        assert!(sup_diff(&point_eval(c, &z, 0.37).unwrap(), &q) < 1e-15);
    }
    assert!(matches!(point_eval(&t, &z, 1.5), Err(Error::OutOfDomain { .. })));
    assert!(point_eval(c, &z, 0.5).is_err());
}

#[test]
fn torus_linear_path_wraps() {
    let t = FlatTorus::new(2).unwrap();
    let v = vec![1.7, -0.45];
    let start = vec![0.8, 0.1];
    let eta = ManifoldAcPath::single(&t, 0, AcPath::linear(start.clone(), v.clone(), 0.0, 1.0, 2.0).unwrap()).unwrap();
    for &s in &[0.0, 0.25, 0.5, 0.9, 1.0] {
        let expected: Vec<f64> = start.iter().zip(&v).map(|(a, b)| wrap(a + s * b)).collect();
        assert!(torus_dist(&point_eval(&t, &eta, s).unwrap(), &expected) < 1e-15);
    }
}

#[test]
fn psi_of_zero_is_the_base_path() {
    let t = FlatTorus::new(2).unwrap();
    let eta = random_torus_path(&mut rng(4), 2);
    let out = chart_psi(&t, &eta, &SectionTuple::zero(&t, &eta).unwrap()).unwrap();
    for i in 0..=20 {
        let s = i as f64 / 20.0;
        assert!(torus_dist(&point_eval(&t, &out, s).unwrap(), &point_eval(&t, &eta, s).unwrap()) < 1e-15);
    }
}

#[test]
fn torus_constant_section_translates() {
    let t = FlatTorus::new(2).unwrap();
    let p = vec![0.9, 0.3];
    let v = vec![0.3, -0.4];
    let eta = const_path(&t, &p, 0.0, 1.0, 2.0).unwrap();
    let tau = SectionTuple::new(
        &t,
        eta.clone(),
        vec![AcPath::constant(v.clone(), 0.0, 1.0, 2.0).unwrap()],
    )
    .unwrap();
    let out = chart_psi(&t, &eta, &tau).unwrap();
    for &s in &[0.0, 0.5, 1.0] {
        assert!(torus_dist(&point_eval(&t, &out, s).unwrap(), &[0.2, 0.9]) < 1e-15);
    }
}

#[test]
fn torus_chart_roundtrip() {
    let t = FlatTorus::new(2).unwrap();
    let mut r = rng(5);
    for _ in 0..50 {
        let eta = random_torus_path(&mut r, 2);
        let tau = random_torus_section(&mut r, &eta);
        let gamma = chart_psi(&t, &eta, &tau).unwrap();
        let back = chart_psi_inv(&t, &eta, &gamma).unwrap();
        assert!(back.max_difference(&tau).unwrap() <= 1e-12);
    }
}

#[test]
fn circle_chart_roundtrip() {
    let c: &dyn LocalAddition<f64> = &Circle;
    let mut r = rng(6);
    for _ in 0..20 {
        let u = random_ac(&mut r, 1, 0.0, 1.0, 4, 0.8, 0.8);
        let eta = ManifoldAcPath::single(c, 0, u).unwrap();
        let tau_path = random_ac(&mut r, 1, 0.0, 1.0, 3, 0.1, 0.2);
        let tau = SectionTuple::new(c, eta.clone(), vec![tau_path]).unwrap();
        let gamma = chart_psi(c, &eta, &tau).unwrap();
        let back = chart_psi_inv(c, &eta, &gamma).unwrap();
        assert!(back.max_difference(&tau).unwrap() <= 1e-12);
    }
}

#[test]
fn leaving_the_domain_reports_the_time() {
    let t = FlatTorus::new(1).unwrap();
    let eta = const_path(&t, &[0.0], 0.0, 1.0, 1.0).unwrap();
    let density = LpSample::new(TimeGrid::unit(4), vec![vec![1.0]; 4], 1.0, SampleMode::Constant).unwrap();
    let tau = SectionTuple::new(&t, eta.clone(), vec![AcPath::new(vec![0.0], density).unwrap()]).unwrap();
    match chart_psi(&t, &eta, &tau) {
        Err(Error::OutsideDomain { t }) => assert_eq!(t, 0.5),
        other => panic!("expected a domain error, got {other:?}"),
    }
}

#[test]
fn transition_identity_and_closed_form() {
    let t = FlatTorus::new(2).unwrap();
    let mut r = rng(7);
    let eta = random_torus_path(&mut r, 2);
    let sigma = random_torus_section(&mut r, &eta);
    let same = transition(&t, &eta, &eta, &sigma).unwrap();
    assert!(same.max_difference(&sigma).unwrap() < 1e-14);

    let (p, q) = (vec![0.95, 0.5], vec![0.1, 0.3]);
    let xi = const_path(&t, &q, 0.0, 1.0, 2.0).unwrap();
    let eta = const_path(&t, &p, 0.0, 1.0, 2.0).unwrap();
    let out = transition(&t, &xi, &eta, &SectionTuple::zero(&t, &eta).unwrap()).unwrap();
    let expected: Vec<f64> = p.iter().zip(&q).map(|(a, b)| wrap_diff(a - b)).collect();
    for &s in &[0.0, 0.3, 1.0] {
        assert!(sup_diff(&out.parts()[0].eval(s).unwrap(), &expected) < 1e-15);
    }
}

#[test]
fn transition_cocycle() {
    let t = FlatTorus::new(2).unwrap();
    let mut r = rng(8);
    let mut checked = 0;
    while checked < 30 {
        let eta = random_torus_path(&mut r, 2);
        let small = random_torus_section(&mut r, &eta).scale(0.3);
        let xi = chart_psi(&t, &eta, &small).unwrap();
        let sigma = random_torus_section(&mut r, &eta).scale(0.5);
        let Ok(there) = transition(&t, &xi, &eta, &sigma) else {
            continue;
        };
        let back = transition(&t, &eta, &xi, &there).unwrap();
        assert!(back.max_difference(&sigma).unwrap() <= 1e-11);
        checked += 1;
    }
}

#[test]
fn transition_is_affine_in_the_section() {
    let t = FlatTorus::new(2).unwrap();
    let mut r = rng(9);
    for _ in 0..10 {
        let eta = random_torus_path(&mut r, 2);
        let xi = chart_psi(&t, &eta, &random_torus_section(&mut r, &eta).scale(0.2)).unwrap();
        let sigma = random_torus_section(&mut r, &eta).scale(0.3);
        let d1 = random_torus_section(&mut r, &eta);
        let d2 = random_torus_section(&mut r, &eta);
        let eps = 1e-4;
        let deriv = |d: &SectionTuple<f64>| {
            let plus = transition(&t, &xi, &eta, &sigma.add(&d.scale(eps)).unwrap()).unwrap();
            let minus = transition(&t, &xi, &eta, &sigma.add(&d.scale(-eps)).unwrap()).unwrap();
            (plus, minus)
        };
        let lin = |(p, m): (SectionTuple<f64>, SectionTuple<f64>)| -> Vec<f64> {
            let g = p.parts()[1].grid().clone();
            g.knots()
                .iter()
                .flat_map(|&s| {
                    let (a, b) = (p.parts()[1].eval(s).unwrap(), m.parts()[1].eval(s).unwrap());
                    a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * eps)).collect::<Vec<_>>()
                })
                .collect()
        };
        let sum = d1.add(&d2).unwrap();
        let (a, b, c) = (lin(deriv(&d1)), lin(deriv(&d2)), lin(deriv(&sum)));
        for i in 0..a.len() {
            assert!((a[i] + b[i] - c[i]).abs() < 1e-6);
        }
    }
}

#[test]
fn torus_embedding_is_identity_and_glue_inverts() {
    let t = FlatTorus::new(2).unwrap();
    let mut r = rng(10);
    for _ in 0..20 {
        let eta = random_torus_path(&mut r, 2);
        let sigma = random_ac(&mut r, 2, 0.0, 1.0, 9, 0.3, 0.3);
        let tuple = section_embed(&t, &eta, &sigma).unwrap();
        for part in tuple.parts() {
            for &s in part.grid().knots() {
                assert!(sup_diff(&part.eval(s).unwrap(), &sigma.eval(s).unwrap()) < 1e-14);
            }
        }
        let back = section_glue(&t, &tuple).unwrap();
        assert_eq!(back.start(), sigma.start());
        assert!(back.density().ae_eq(sigma.density(), 0.0));
    }
}

/// North-chart base at `u = 2` on `[0, 1/2]`, continued in the south chart at `u = 1/2`.
fn circle_two_chart_base() -> ManifoldAcPath<f64> {
    let c: &dyn LocalAddition<f64> = &Circle;
    ManifoldAcPath::new(
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
    .unwrap()
}

#[test]
fn circle_knot_compatibility_example() {
    let c: &dyn LocalAddition<f64> = &Circle;
    let eta = circle_two_chart_base();
    for w in [1.0, -0.3, 2.5] {
        assert!((c.d_chart_transition(0, 1, &[2.0], &[w])[0] + w / 4.0).abs() < 1e-12);
        let v = c.d_from_chart(0, &[2.0], &[w]);
        let sigma = AcPath::constant(v, 0.0, 1.0, 2.0).unwrap();
        let tuple = section_embed(c, &eta, &sigma).unwrap();
        assert!((tuple.parts()[0].eval(0.2).unwrap()[0] - w).abs() < 1e-12);
        assert!((tuple.parts()[1].eval(0.7).unwrap()[0] + w / 4.0).abs() < 1e-12);
        let glued = section_glue(c, &tuple).unwrap();
        for &s in glued.grid().knots() {
            assert!(sup_diff(&glued.eval(s).unwrap(), &sigma.eval(s).unwrap()) < 1e-14);
        }
    }
    let bad = vec![
        AcPath::constant(vec![1.0], 0.0, 0.5, 2.0).unwrap(),
        AcPath::constant(vec![0.25], 0.5, 1.0, 2.0).unwrap(),
    ];
    assert!(matches!(
        SectionTuple::new(c, eta.clone(), bad),
        Err(Error::Incompatible { .. })
    ));
    let good = vec![
        AcPath::constant(vec![1.0], 0.0, 0.5, 2.0).unwrap(),
        AcPath::constant(vec![-0.25], 0.5, 1.0, 2.0).unwrap(),
    ];
    assert!(SectionTuple::new(c, eta, good).is_ok());
}

#[test]
fn discontinuous_paths_are_rejected() {
    let t = FlatTorus::new(1).unwrap();
    let r = ManifoldAcPath::new(
        &t,
        TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap(),
        vec![
            ChartSegment {
                chart: 0,
                path: AcPath::constant(vec![0.1], 0.0, 0.5, 1.0).unwrap(),
            },
            ChartSegment {
                chart: 0,
                path: AcPath::constant(vec![0.2], 0.5, 1.0, 1.0).unwrap(),
            },
        ],
    );
    assert!(matches!(r, Err(Error::Incompatible { .. })));
}

#[test]
fn tangent_identification_by_finite_differences() {
    let t = FlatTorus::new(2).unwrap();
    let mut r = rng(11);
    let eta = random_torus_path(&mut r, 2);
    let sigma = random_torus_section(&mut r, &eta);
    let eps = 1e-5;
    let plus = chart_psi(&t, &eta, &sigma.scale(eps)).unwrap();
    let minus = chart_psi(&t, &eta, &sigma.scale(-eps)).unwrap();
    for j in 0..2 {
        let g = sigma.parts()[j].grid().clone();
        for &s in g.knots() {
            let fd: Vec<f64> = plus
                .coords(j, s)
                .unwrap()
                .iter()
                .zip(minus.coords(j, s).unwrap())
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect();
            assert!(sup_diff(&fd, &sigma.parts()[j].eval(s).unwrap()) < 1e-6);
        }
    }

    let c: &dyn LocalAddition<f64> = &Circle;
    let eta = circle_two_chart_base();
    let v = c.d_from_chart(0, &[2.0], &[0.7]);
    let sigma = section_embed(c, &eta, &AcPath::constant(v, 0.0, 1.0, 2.0).unwrap()).unwrap();
    let plus = chart_psi(c, &eta, &sigma.scale(eps)).unwrap();
    let minus = chart_psi(c, &eta, &sigma.scale(-eps)).unwrap();
    for (j, s) in [(0, 0.25), (1, 0.75)] {
        let fd = (plus.coords(j, s).unwrap()[0] - minus.coords(j, s).unwrap()[0]) / (2.0 * eps);
        assert!((fd - sigma.parts()[j].eval(s).unwrap()[0]).abs() < 1e-6);
    }
}

#[test]
fn overlap_membership_is_open() {
    let t = FlatTorus::new(2).unwrap();
    let mut r = rng(12);
    for _ in 0..20 {
        let eta = random_torus_path(&mut r, 2);
        let gamma = chart_psi(&t, &eta, &random_torus_section(&mut r, &eta)).unwrap();
        let margin = overlap_margin(&t, &eta, &gamma).unwrap();
        assert!(margin > 0.0);
        for _ in 0..5 {
            let bump = random_ac(&mut r, 2, 0.0, 1.0, 4, 0.25 * margin, 0.25 * margin);
            let moved = chart_psi(&t, &gamma, &section_embed(&t, &gamma, &bump).unwrap()).unwrap();
            assert!(overlap_margin(&t, &eta, &moved).unwrap() > 0.0);
            assert!(chart_psi_inv(&t, &eta, &moved).is_ok());
        }
    }
}

#[test]
fn product_split_and_join() {
    let mut r = rng(13);
    let eta = random_torus_path(&mut r, 3);
    let (a, b) = split_product(&eta, 1).unwrap();
    assert_eq!(a.tag(), ManifoldTag::Torus(1));
    assert_eq!(b.tag(), ManifoldTag::Torus(2));
    assert_eq!(join_product(&a, &b).unwrap(), eta);
    assert!(split_product(&eta, 3).is_err());
}

fn torus_geom() -> Geometry<f64> {
    Geometry::periodic(2, 24).unwrap()
}

#[test]
fn torus_evolution_of_zero_and_constant_fields() {
    let zero = TimeVelocity::zero(&PeriodicField::zeros(torus_geom()).unwrap(), 1.0).unwrap();
    let r = evolve_torus(&zero, &EvolveOptions::default()).unwrap();
    assert!(r.path.end().is_zero());
    let v = [0.37, -1.3];
    let gamma = TimeVelocity::constant(PeriodicField::constant(torus_geom(), &v).unwrap(), 1.0).unwrap();
    let r = evolve_torus(&gamma, &EvolveOptions::default()).unwrap();
    assert_eq!(r.n, 1);
    for &s in &[0.25, 0.5, 1.0] {
        for x in [[0.1, 0.2], [0.77, 0.05]] {
            let y = torus_flow_point(&r, s, &x).unwrap();
            let expected = [wrap(x[0] + s * v[0]), wrap(x[1] + s * v[1])];
            assert!(torus_dist(&y, &expected) < 1e-14);
        }
    }
    let traj = torus_trajectory(&r, &[0.1, 0.2]).unwrap();
    let p = point_eval(&FlatTorus::new(2).unwrap(), &traj, 1.0).unwrap();
    assert!(torus_dist(&p, &[wrap(0.47), wrap(0.2 - 1.3)]) < 1e-14);
}

#[test]
fn torus_evolution_matches_periodic_rk4() {
    let mut r = rng(14);
    let fields: Vec<_> = (0..2)
        .map(|_| generate::random_periodic(Geometry::periodic(2, 32).unwrap(), &mut r, 2, 1.0).unwrap())
        .collect();
    let gamma = TimeVelocity::new(TimeGrid::unit(2), fields, 1.0).unwrap();
    let gamma = gamma.scale(0.4 / gamma.contraction_bound().l1);
    let res = evolve_torus(&gamma, &EvolveOptions::default()).unwrap();
    for _ in 0..50 {
        let x = [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)];
        let y = torus_flow_point(&res, 1.0, &x).unwrap();
        let rk = rk4_oracle(&gamma, &x, 4096).unwrap().end();
        let rk: Vec<f64> = rk.into_iter().map(wrap).collect();
        assert!(torus_dist(&y, &rk) <= 1e-4, "{:e}", torus_dist(&y, &rk));
    }
}
