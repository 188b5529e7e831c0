use super::{Geometry, SplineCore, Support, VectorField};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A `C²` vector field on the flat torus `[0, 1)^d`, evaluated with wrap-around.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField<T> {
    core: SplineCore<T>,
}

impl<T: Real> PeriodicField<T> {
    pub fn zeros(geom: Geometry<T>) -> Result<Self> {
        Self::from_core(SplineCore::zeros(geom))
    }

    /// Spline through `f` at every node; `f` should itself be 1-periodic.
    pub fn from_fn(geom: Geometry<T>, f: impl Fn(&[T]) -> Vec<T> + Sync) -> Result<Self> {
        Self::from_core(SplineCore::from_fn(geom, f)?)
    }

    pub fn from_coefficient_fn(geom: Geometry<T>, f: impl Fn(&[T]) -> Vec<T>) -> Result<Self> {
        Self::from_core(SplineCore::from_coefficient_fn(geom, f)?)
    }

    /// Field with every coefficient equal to `v`, i.e. the constant field `v`.
    pub fn constant(geom: Geometry<T>, v: &[T]) -> Result<Self> {
        Self::from_coefficient_fn(geom, |_| v.to_vec())
    }

    pub fn coefficients(&self) -> &[T] {
        self.core.coefficients()
    }
}

impl<T: Real> VectorField<T> for PeriodicField<T> {
    fn core(&self) -> &SplineCore<T> {
        &self.core
    }

    fn from_core(core: SplineCore<T>) -> Result<Self> {
        if core.geometry().support() != Support::Periodic {
            return Err(Error::InvalidArgument("periodic field needs a periodic grid".into()));
        }
        Ok(Self { core })
    }

    fn outside_support(&self, _x: &[T]) -> bool {
        false
    }
}
