//! Thermal state preparation by repeated collisions of a `d`-level system with
//! fresh thermal qubit ancillas.
//!
//! The numerical core is generic over the real scalar ([`scalar::Real`], for
//! `f32` and `f64`). Concrete aliases for both precisions are exported here.

// `!(x > 0)` guards are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod experiments;
pub mod linalg;
pub mod models;
pub mod scalar;
pub mod sim_time;
pub mod spectral;

use thiserror::Error;

pub use scalar::{Real, C};

/// Any error the library can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Collision(#[from] collision::CollisionError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    SimTime(#[from] sim_time::SimTimeError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
}

pub type ComplexF64 = C<f64>;
pub type ComplexF32 = C<f32>;
pub type ComplexMatrixF64 = linalg::ComplexMatrix<f64>;
pub type ComplexMatrixF32 = linalg::ComplexMatrix<f32>;
pub type DensityMatrixF64 = linalg::DensityMatrix<f64>;
pub type DensityMatrixF32 = linalg::DensityMatrix<f32>;
pub type ModelF64 = models::Model<f64>;
pub type ModelF32 = models::Model<f32>;
pub type InteractionF64 = models::Interaction<f64>;
pub type InteractionF32 = models::Interaction<f32>;
pub type CollisionConfigF64 = collision::CollisionConfig<f64>;
pub type CollisionConfigF32 = collision::CollisionConfig<f32>;
pub type TridiagonalF64 = spectral::Tridiagonal<f64>;
pub type TridiagonalF32 = spectral::Tridiagonal<f32>;
pub type SlowModeSummaryF64 = spectral::SlowModeSummary<f64>;
pub type SlowModeSummaryF32 = spectral::SlowModeSummary<f32>;
pub type ThermalizationResultF64 = sim_time::ThermalizationResult<f64>;
pub type ThermalizationResultF32 = sim_time::ThermalizationResult<f32>;
