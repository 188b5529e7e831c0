use super::{Geometry, SplineCore, Support, VectorField};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A `C²` vector field on `R^n` supported in the box `K` of its grid.
///
/// Two layers of zero coefficients along each face make the field and its
/// first two derivatives vanish identically outside `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactField<T> {
    core: SplineCore<T>,
}

impl<T: Real> CompactField<T> {
    pub fn zeros(geom: Geometry<T>) -> Result<Self> {
        Self::from_core(SplineCore::zeros(geom))
    }

    /// Spline through `f` sampled at the free nodes.
    pub fn from_fn(geom: Geometry<T>, f: impl Fn(&[T]) -> Vec<T> + Sync) -> Result<Self> {
        Self::from_core(SplineCore::from_fn(geom, f)?)
    }

    /// Spline whose coefficients are `f(node)` (quasi-interpolation; exact on affine data).
    pub fn from_coefficient_fn(geom: Geometry<T>, f: impl Fn(&[T]) -> Vec<T>) -> Result<Self> {
        Self::from_core(SplineCore::from_coefficient_fn(geom, f)?)
    }

    pub fn from_coefficients(geom: Geometry<T>, coeffs: Vec<T>) -> Result<Self> {
        Self::from_core(SplineCore::new(geom, coeffs)?)
    }

    pub fn coefficients(&self) -> &[T] {
        self.core.coefficients()
    }
}

impl<T: Real> VectorField<T> for CompactField<T> {
    fn core(&self) -> &SplineCore<T> {
        &self.core
    }

    fn from_core(core: SplineCore<T>) -> Result<Self> {
        if core.geometry().support() != Support::Compact {
            return Err(Error::InvalidArgument("compact field needs a compact grid".into()));
        }
        Ok(Self { core })
    }
}
