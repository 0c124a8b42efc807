//! Gaussian moment and `‖Z_i‖` checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{norm2, spectral_norm, DenseMatrix};
use crate::sensing::{GroundTruth, MeasurementEnsemble, CHUNK};
use crate::{rng, Error, Result, Scalar};

/// Monte Carlo estimate of `E[x xᵀ x xᵀ] = E[‖x‖² x xᵀ]` for `x ~ N(0, σ²I_d)`.
///
/// Returns the empirical d×d average and its relative spectral deviation
/// from `(d + 2)σ⁴ I_d`. Chunk sums are reduced in chunk order.
pub fn fourth_moment_check(d: usize, sigma: f64, n_samples: usize, seed: u64) -> Result<(DenseMatrix<f64>, f64)> {
    if d == 0 || n_samples == 0 {
        return Err(Error::param("need d >= 1 and at least one sample"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma = {sigma} must be positive")));
    }
    let partials: Vec<Vec<f64>> = (0..n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut r = rng::stream(seed, rng::domain::MOMENT, c as u64);
            let mut acc = vec![0.0; d * d];
            for _ in 0..count {
                let x: Vec<f64> = rng::gaussian_vec::<f64, _>(&mut r, d).into_iter().map(|z| sigma * z).collect();
                let sq: f64 = x.iter().map(|v| v * v).sum();
                for i in 0..d {
                    let w = sq * x[i];
                    for j in 0..d {
                        acc[i * d + j] += w * x[j];
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; d * d];
    for p in partials {
        total.iter_mut().zip(p).for_each(|(t, v)| *t += v);
    }
    let inv_n = 1.0 / n_samples as f64;
    let empirical = DenseMatrix::new(d, d, total.into_iter().map(|v| v * inv_n).collect())?;
    let level = (d as f64 + 2.0) * sigma.powi(4);
    let target = DenseMatrix::identity(d).scale(level);
    let deviation = spectral_norm(&(&empirical - &target)) / level;
    Ok((empirical, deviation))
}

/// Largest `‖Z_i‖` over an ensemble, with `Z_i = x_i x_iᵀ W* y_i y_iᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZNormCheck {
    pub max_norm: f64,
    pub argmax: usize,
    pub mean_norm: f64,
    /// `C² k² σ₁*`.
    pub bound: f64,
    /// `max_norm / bound`.
    pub ratio: f64,
}

/// `‖Z_i‖` for every pair without forming d×d products.
///
/// `Z_i = β_i x_i y_iᵀ` with `β_i = x_iᵀ W* y_i`, so `‖Z_i‖ = |β_i| ‖x_i‖ ‖y_i‖`.
pub fn z_norms<T: Scalar>(g: &GroundTruth<T>, e: &MeasurementEnsemble<T>) -> Result<Vec<f64>> {
    let beta = g.measure(e)?;
    Ok((0..e.m).map(|i| (beta[i].abs() * norm2(e.x.row(i)) * norm2(e.y.row(i))).as_f64()).collect())
}

pub fn z_norm_check<T: Scalar>(g: &GroundTruth<T>, e: &MeasurementEnsemble<T>, c: f64) -> Result<ZNormCheck> {
    if !(c > 0.0) {
        return Err(Error::param(format!("constant C = {c} must be positive")));
    }
    let norms = z_norms(g, e)?;
    let (argmax, max_norm) =
        norms.iter().copied().enumerate().fold((0, 0.0f64), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let mean_norm = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
    let k = g.k as f64;
    let bound = c * c * k * k * g.sigma_max().as_f64();
    Ok(ZNormCheck { max_norm, argmax, mean_norm, bound, ratio: max_norm / bound })
}
