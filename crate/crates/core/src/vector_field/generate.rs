//! Reference and random fields used by tests, benchmarks and the CLI.

use rand::Rng;

use super::{CompactField, Geometry, PeriodicField, Support, VectorField};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Radial-in-`ℓ∞` cutoff around the box centre: `1` for `|x − c|_∞ ≤ plateau`, `0` beyond `zero`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub plateau: f64,
    pub zero: f64,
}

impl Cutoff {
    pub fn new(plateau: f64, zero: f64) -> Self {
        assert!(0.0 <= plateau && plateau < zero, "cutoff needs 0 <= plateau < zero");
        Self { plateau, zero }
    }

    /// Product of quintic smoothsteps over the axes (C² in `x`).
    pub fn weight<T: Real>(&self, x: &[T], center: &[T]) -> T {
        let mut w = 1.0;
        for (xi, ci) in x.iter().zip(center) {
            let r = (*xi - *ci).to_f64_().abs();
            w *= if r <= self.plateau {
                1.0
            } else if r >= self.zero {
                0.0
            } else {
                let t = (r - self.plateau) / (self.zero - self.plateau);
                1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
            };
        }
        T::lit(w)
    }
}

fn center<T: Real>(geom: &Geometry<T>) -> Vec<T> {
    let hi = geom.hi();
    geom.lo()
        .iter()
        .zip(&hi)
        .map(|(&a, &b)| (a + b) * T::lit(0.5))
        .collect()
}

fn require_compact<T: Real>(geom: &Geometry<T>) -> Result<()> {
    if geom.support() != Support::Compact {
        return Err(Error::InvalidArgument("generator needs a compact grid".into()));
    }
    Ok(())
}

/// Coefficients `χ(node)·v`; the spline equals `v` wherever all contributing nodes lie on the plateau.
pub fn plateau_constant<T: Real>(geom: Geometry<T>, v: &[T], cutoff: Cutoff) -> Result<CompactField<T>> {
    require_compact(&geom)?;
    let c = center(&geom);
    CompactField::from_coefficient_fn(geom, |x| {
        let w = cutoff.weight(x, &c);
        v.iter().map(|&vi| vi * w).collect()
    })
}

/// Planar rotation `ω J (x − c)` on the plateau, cut off smoothly; needs `dim = 2`.
///
/// Cubic B-splines reproduce affine data, so the field is exactly `ωJ(x − c)`
/// at distance `2h` inside the plateau.
pub fn plateau_rotation<T: Real>(geom: Geometry<T>, omega: T, cutoff: Cutoff) -> Result<CompactField<T>> {
    require_compact(&geom)?;
    if geom.dim() != 2 {
        return Err(Error::InvalidArgument("rotation field needs dim 2".into()));
    }
    let c = center(&geom);
    CompactField::from_coefficient_fn(geom, |x| {
        let w = cutoff.weight(x, &c) * omega;
        vec![-(x[1] - c[1]) * w, (x[0] - c[0]) * w]
    })
}

/// Interpolant of `χ(x)·sin(2π(x − c))` on a 1D grid.
pub fn plateau_sine_1d<T: Real>(geom: Geometry<T>, cutoff: Cutoff) -> Result<CompactField<T>> {
    require_compact(&geom)?;
    if geom.dim() != 1 {
        return Err(Error::InvalidArgument("sine field needs dim 1".into()));
    }
    let c = center(&geom);
    let tau = T::lit(std::f64::consts::TAU);
    CompactField::from_fn(geom, |x| vec![cutoff.weight(x, &c) * (tau * (x[0] - c[0])).sin()])
}

#[derive(Debug, Clone)]
struct Mode {
    amp: f64,
    k: [f64; 3],
    phase: f64,
}

fn random_modes<R: Rng + ?Sized>(rng: &mut R, dim: usize, count: usize, kmax: i32, signed: bool) -> Vec<Vec<Mode>> {
    (0..dim)
        .map(|_| {
            (0..count)
                .map(|_| {
                    let mut k = [0.0; 3];
                    for ki in k.iter_mut().take(dim) {
                        *ki = if signed {
                            rng.gen_range(-kmax..=kmax) as f64
                        } else {
                            rng.gen_range(1..=kmax) as f64
                        };
                    }
                    let k2: f64 = k.iter().map(|v| v * v).sum();
                    Mode {
                        amp: rng.gen_range(-1.0..1.0) / (1.0 + k2),
                        k,
                        phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    }
                })
                .collect()
        })
        .collect()
}

fn eval_modes(modes: &[Vec<Mode>], u: &[f64], freq: f64) -> Vec<f64> {
    modes
        .iter()
        .map(|comp| {
            comp.iter()
                .map(|m| {
                    let arg: f64 = m.k.iter().zip(u).map(|(k, x)| k * x).sum();
                    m.amp * (freq * arg + m.phase).sin()
                })
                .sum()
        })
        .collect()
}

/// Rescales `f` so that `f.alpha() == alpha` (up to rounding).
pub fn scale_to_alpha<T: Real, F: VectorField<T>>(f: &F, alpha: T) -> Result<F> {
    let a = f.alpha();
    if !(a > T::zero()) {
        return Err(Error::InvalidArgument("cannot rescale a field with zero alpha".into()));
    }
    Ok(f.scale(alpha / a))
}

/// Smooth random field on a compact grid: a `(1 − u²)³` bump times a few sine modes, scaled to `alpha`.
pub fn random_smooth<T: Real, R: Rng + ?Sized>(
    geom: Geometry<T>,
    rng: &mut R,
    modes: usize,
    alpha: T,
) -> Result<CompactField<T>> {
    require_compact(&geom)?;
    let dim = geom.dim();
    let lo: Vec<f64> = geom.lo().iter().map(|v| v.to_f64_()).collect();
    let hi: Vec<f64> = geom.hi().iter().map(|v| v.to_f64_()).collect();
    let m = random_modes(rng, dim, modes.max(1), 3, false);
    let f = CompactField::from_fn(geom, |x| {
        let u: Vec<f64> = (0..dim)
            .map(|a| 2.0 * (x[a].to_f64_() - lo[a]) / (hi[a] - lo[a]) - 1.0)
            .collect();
        let bump: f64 = u.iter().map(|v| (1.0 - v * v).max(0.0).powi(3)).product();
        eval_modes(&m, &u, std::f64::consts::PI)
            .into_iter()
            .map(|v| T::lit(bump * v))
            .collect()
    })?;
    scale_to_alpha(&f, alpha)
}

/// Smooth random 1-periodic field on the torus, scaled to `alpha`.
pub fn random_periodic<T: Real, R: Rng + ?Sized>(
    geom: Geometry<T>,
    rng: &mut R,
    modes: usize,
    alpha: T,
) -> Result<PeriodicField<T>> {
    if geom.support() != Support::Periodic {
        return Err(Error::InvalidArgument("generator needs a periodic grid".into()));
    }
    let dim = geom.dim();
    let m = random_modes(rng, dim, modes.max(1), 2, true);
    let f = PeriodicField::from_fn(geom, |x| {
        let u: Vec<f64> = x.iter().map(|v| v.to_f64_()).collect();
        eval_modes(&m, &u, std::f64::consts::TAU)
            .into_iter()
            .map(T::lit)
            .collect()
    })?;
    if f.alpha() > T::zero() {
        scale_to_alpha(&f, alpha)
    } else {
        Ok(f)
    }
}
