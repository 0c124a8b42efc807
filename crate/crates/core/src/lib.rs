//! Low-rank matrix sensing from rank-one Gaussian measurements.
//!
//! A planted d×d matrix `W*` of rank `k` is observed through
//! `b_i = x_iᵀ W* y_i` with Gaussian `x_i, y_i`. [`altmin::fast_matrix_sensing`]
//! recovers it by spectral initialization followed by alternating least
//! squares with fresh samples per half-step, using either normal equations or
//! a sketch-preconditioned iterative solver for each step.
//!
//! Numerics are generic over [`Scalar`] (`f32`, `f64`); the aliases below fix
//! the common `f64` instantiations.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod altmin;
pub mod diagnostics;
mod error;
pub mod geometry;
pub mod numerics;
pub mod regression;
pub mod rng;
mod scalar;
pub mod sensing;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use altmin::{fast_matrix_sensing, ConvergenceTrace, FinalFit, SensingRun, SolverConfig};
pub use error::{Error, Result};
pub use numerics::DenseMatrix;
pub use regression::{InnerSolver, Method};
pub use scalar::Scalar;
pub use sensing::{make_ground_truth, sample_ensemble, GroundTruth, MeasurementEnsemble, SpectrumShape};

pub type Matrix = DenseMatrix<f64>;
pub type Matrix32 = DenseMatrix<f32>;
pub type GroundTruth64 = GroundTruth<f64>;
pub type GroundTruth32 = GroundTruth<f32>;
pub type Ensemble = MeasurementEnsemble<f64>;
pub type Ensemble32 = MeasurementEnsemble<f32>;
pub type Run = SensingRun<f64>;
pub type Run32 = SensingRun<f32>;

/// Types that can be checked after deserialization.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

impl<T: Scalar> Validate for DenseMatrix<T> {
    fn validate(&self) -> Result<()> {
        DenseMatrix::validate(self)
    }
}

impl<T: Scalar> Validate for GroundTruth<T> {
    fn validate(&self) -> Result<()> {
        GroundTruth::validate(self)
    }
}

impl<T: Scalar> Validate for MeasurementEnsemble<T> {
    fn validate(&self) -> Result<()> {
        MeasurementEnsemble::validate(self)
    }
}

pub fn save_json<V: Serialize>(value: &V, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush()?;
    Ok(())
}

/// Read a JSON value and reject it unless it passes [`Validate`].
pub fn load_json<V: DeserializeOwned + Validate>(path: impl AsRef<Path>) -> Result<V> {
    let value: V = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    value.validate()?;
    Ok(value)
}
