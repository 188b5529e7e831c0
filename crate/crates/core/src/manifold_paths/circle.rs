use super::{LocalAddition, ManifoldTag};
use crate::scalar::{dist2, norm2, Real};

/// Guard keeping stereographic coordinates finite near the projection pole.
const POLE_GAP: f64 = 1e-12;

/// The unit circle in `R²` with the geodesic local addition
/// `Σ(p, v) = cos|v| p + sin|v| v/|v|` on `|v| < π`.
///
/// Chart 0 projects from the north pole, `u = x/(1 − y)`; chart 1 from the
/// south pole, `u = x/(1 + y)`. On the overlap `u₁ = 1/u₀` and `du₁ = −du₀/u₀²`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Circle;

impl<T: Real> LocalAddition<T> for Circle {
    fn tag(&self) -> ManifoldTag {
        ManifoldTag::Circle
    }

    fn point_dim(&self) -> usize {
        2
    }

    fn chart_dim(&self) -> usize {
        1
    }

    fn radius(&self) -> T {
        T::lit(std::f64::consts::PI)
    }

    fn in_omega(&self, _p: &[T], v: &[T]) -> bool {
        norm2(v) < T::lit(std::f64::consts::PI)
    }

    fn sigma(&self, p: &[T], v: &[T]) -> Vec<T> {
        let r = norm2(v);
        if r == T::zero() {
            return p.to_vec();
        }
        let (s, c) = r.sin_cos();
        vec![c * p[0] + s * v[0] / r, c * p[1] + s * v[1] / r]
    }

    fn theta_inv(&self, p: &[T], q: &[T]) -> Option<Vec<T>> {
        let angle = (p[0] * q[1] - p[1] * q[0]).atan2(p[0] * q[0] + p[1] * q[1]);
        (angle.abs() < T::lit(std::f64::consts::PI)).then(|| vec![-p[1] * angle, p[0] * angle])
    }

    fn point_distance(&self, p: &[T], q: &[T]) -> T {
        dist2(p, q)
    }

    fn chart_count(&self) -> usize {
        2
    }

    fn in_chart(&self, chart: usize, p: &[T]) -> bool {
        let gap = T::lit(POLE_GAP);
        match chart {
            0 => T::one() - p[1] > gap,
            _ => T::one() + p[1] > gap,
        }
    }

    fn choose_chart(&self, p: &[T]) -> usize {
        usize::from(p[1] > T::zero())
    }

    fn to_chart(&self, chart: usize, p: &[T]) -> Vec<T> {
        match chart {
            0 => vec![p[0] / (T::one() - p[1])],
            _ => vec![p[0] / (T::one() + p[1])],
        }
    }

    fn from_chart(&self, chart: usize, u: &[T]) -> Vec<T> {
        let u = u[0];
        let (uu, one) = (u * u, T::one());
        let den = one + uu;
        let y = (uu - one) / den;
        vec![T::lit(2.0) * u / den, if chart == 0 { y } else { -y }]
    }

    fn d_to_chart(&self, chart: usize, p: &[T], v: &[T]) -> Vec<T> {
        match chart {
            0 => {
                let s = T::one() - p[1];
                vec![v[0] / s + p[0] * v[1] / (s * s)]
            }
            _ => {
                let s = T::one() + p[1];
                vec![v[0] / s - p[0] * v[1] / (s * s)]
            }
        }
    }

    fn d_from_chart(&self, chart: usize, u: &[T], du: &[T]) -> Vec<T> {
        let u = u[0];
        let den = T::one() + u * u;
        let den2 = den * den;
        let dx = T::lit(2.0) * (T::one() - u * u) / den2;
        let dy = T::lit(4.0) * u / den2;
        vec![dx * du[0], if chart == 0 { dy } else { -dy } * du[0]]
    }
}
