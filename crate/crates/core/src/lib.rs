//! Structural stability analysis of planar replicator vector fields
//! `X = (x(x-1) f, y(y-1) g)` and their compactification on the Poincaré
//! sphere.
//!
//! The pipeline runs bottom-up: [`model`] builds a field, [`singular`] and
//! [`compactify`] locate and classify its singular points, [`polycycle`]
//! examines the boundary of the unit square, [`cycles`] searches for limit
//! cycles, [`perturb`] implements the rotated family and Melnikov-type
//! integrals, and [`certify`] assembles the membership certificate.

pub mod certify;
pub mod compactify;
pub mod cycles;
pub mod model;
pub mod ode;
pub mod perturb;
pub mod poly;
pub mod polycycle;
pub mod singular;

use thiserror::Error;

/// Umbrella error for pipelines that cross module boundaries.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Compactify(#[from] compactify::CompactifyError),
    #[error(transparent)]
    Singular(#[from] singular::SingularError),
    #[error(transparent)]
    Polycycle(#[from] polycycle::PolycycleError),
    #[error(transparent)]
    Cycle(#[from] cycles::CycleError),
    #[error(transparent)]
    Perturb(#[from] perturb::PerturbError),
    #[error(transparent)]
    Ode(#[from] ode::OdeError),
}
