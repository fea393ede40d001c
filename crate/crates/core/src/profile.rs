//! Built-in analytic height profiles and their exact sampling onto grids.

use thiserror::Error;

use crate::grid::{GridError, GridSpec, ScalarField};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile expects dimension {expected}, grid has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid box leaves the profile's domain: {0}")]
    OutsideDomain(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// A height function `u : R^n -> R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `u = a . x`.
    Plane(Vec<f64>),
    /// Upper half of the round sphere of radius `sqrt(2n)` about the origin,
    /// `u = sqrt(2n - |x|^2)`.
    SphereCap,
    /// `u = c |x|^2`.
    Paraboloid(f64),
    /// `u = slope * x1 + amplitude * sin(wavenumber * x1)`.
    Sinusoid {
        slope: f64,
        amplitude: f64,
        wavenumber: f64,
    },
    /// Grid samples, evaluated off-node by multilinear interpolation.
    Tabulated(ScalarField),
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Plane(_) => "plane",
            Profile::SphereCap => "sphere_cap",
            Profile::Paraboloid(_) => "paraboloid",
            Profile::Sinusoid { .. } => "sinusoid",
            Profile::Tabulated(_) => "tabulated",
        }
    }

    /// Value at `x`, or `None` where the profile is undefined.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            Profile::Plane(a) => Some(a.iter().zip(x).map(|(a, x)| a * x).sum()),
            Profile::SphereCap => {
                let rest = 2.0 * x.len() as f64 - r2;
                (rest > 0.0).then(|| rest.sqrt())
            }
            Profile::Paraboloid(c) => Some(c * r2),
            Profile::Sinusoid {
                slope,
                amplitude,
                wavenumber,
            } => Some(slope * x[0] + amplitude * (wavenumber * x[0]).sin()),
            Profile::Tabulated(field) => field.interpolate(x),
        }
    }

    /// Checks that the profile can be sampled at every node of `spec`.
    pub fn check_grid(&self, spec: &GridSpec) -> Result<(), ProfileError> {
        let n = spec.dim();
        match self {
            Profile::Plane(a) if a.len() != n => Err(ProfileError::DimensionMismatch {
                expected: a.len(),
                got: n,
            }),
            Profile::SphereCap => {
                // The box corner is the farthest node from the origin.
                let corner_sq = n as f64 * spec.half_width().powi(2);
                if corner_sq >= 2.0 * n as f64 {
                    Err(ProfileError::OutsideDomain(format!(
                        "sphere cap needs every node inside |x| < sqrt({}), box corner is at sqrt({corner_sq})",
                        2 * n
                    )))
                } else {
                    Ok(())
                }
            }
            Profile::Tabulated(field) => {
                let inner = field.spec();
                if inner.dim() != n {
                    Err(ProfileError::DimensionMismatch {
                        expected: inner.dim(),
                        got: n,
                    })
                } else if spec.half_width() > inner.half_width() * (1.0 + 1e-12) {
                    Err(ProfileError::OutsideDomain(
                        "target box exceeds tabulated box".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Exact pointwise sampling at every node.
    pub fn discretize(&self, spec: &GridSpec) -> Result<ScalarField, ProfileError> {
        self.check_grid(spec)?;
        let values: Vec<f64> = (0..spec.len())
            .map(|idx| {
                let x = spec.point(idx);
                self.eval(&x[..spec.dim()])
                    .ok_or_else(|| ProfileError::OutsideDomain(format!("node {idx}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(ScalarField::new(*spec, values)?)
    }
}
