//! The least-squares step inside each alternating iteration.
//!
//! Fixing `U`, the sensing objective `Σᵢ (tr(A_iᵀUVᵀ) − b_i)²` is the
//! ordinary regression `‖Mv − b‖²` with `M_{i,*} = vec(UᵀA_i)` and
//! `v = vec(Vᵀ)`, under column-stacking `vec`.

pub mod bench;
pub mod container;
pub mod sketch;

use serde::{Deserialize, Serialize};

use crate::numerics::linsolve::{solve_spd, solve_upper};
use crate::numerics::{norm2, row_kron, singular_values, thin_qr, DenseMatrix};
use crate::sensing::MeasurementEnsemble;
use crate::{Error, Result, Scalar};

pub use sketch::{FaceSplitting, LinearOperator, SketchConfig, SketchKind, SketchSize, SketchedSolution};

/// Design matrix, responses, and the factor shape they encode.
#[derive(Clone, Debug)]
pub struct RegressionProblem<T> {
    pub design: DenseMatrix<T>,
    pub b: Vec<T>,
    pub d: usize,
    pub k: usize,
    /// Factored form of `design`, used by the sketched solver when present.
    pub factors: Option<FaceSplitting<T>>,
}

impl<T: Scalar> RegressionProblem<T> {
    pub fn new(design: DenseMatrix<T>, b: Vec<T>, d: usize, k: usize) -> Result<Self> {
        if design.cols() != d * k {
            return Err(Error::dims(format!("design has {} columns, expected d·k = {}", design.cols(), d * k)));
        }
        if design.rows() != b.len() {
            return Err(Error::dims(format!("{} responses for {} rows", b.len(), design.rows())));
        }
        if design.rows() < d * k {
            return Err(Error::param(format!("underdetermined: m = {} < d·k = {}", design.rows(), d * k)));
        }
        Ok(RegressionProblem { design, b, d, k, factors: None })
    }

    /// Problem for fixed `U` over an ensemble.
    pub fn from_sensing(u: &DenseMatrix<T>, e: &MeasurementEnsemble<T>, b: &[T]) -> Result<Self> {
        if u.rows() != e.d {
            return Err(Error::dims(format!("U has {} rows, ensemble d = {}", u.rows(), e.d)));
        }
        let factors = FaceSplitting::new(e.x.matmul(u), e.y.clone())?;
        let mut p = Self::new(factors.to_dense(), b.to_vec(), e.d, u.cols())?;
        p.factors = Some(factors);
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.design.rows()
    }

    pub fn residual_norm(&self, v: &[T]) -> T {
        let fit = self.design.matvec(v);
        let r: Vec<T> = fit.iter().zip(&self.b).map(|(&f, &b)| f - b).collect();
        norm2(&r)
    }
}

/// `M` with rows `vec(UᵀA_i)`, built as `vec((Uᵀx_i) y_iᵀ)` without ever
/// forming `A_i`. Identical to `row_kron(XU, Y)`.
pub fn build_design_matrix<T: Scalar>(u: &DenseMatrix<T>, e: &MeasurementEnsemble<T>) -> Result<DenseMatrix<T>> {
    if u.rows() != e.d {
        return Err(Error::dims(format!("U has {} rows, ensemble d = {}", u.rows(), e.d)));
    }
    row_kron(&e.x.matmul(u), &e.y)
}

/// Normal-equations solve `(MᵀM)⁻¹Mᵀb`.
pub fn solve_naive<T: Scalar>(p: &RegressionProblem<T>) -> Result<Vec<T>> {
    let gram = p.design.gram();
    let rhs = p.design.t_matvec(&p.b);
    solve_spd(&gram, &rhs)
}

/// Householder least squares `R⁻¹Qᵀb`, the reference for the other solvers.
pub fn solve_qr<T: Scalar>(p: &RegressionProblem<T>) -> Result<Vec<T>> {
    let qr = thin_qr(&p.design)?;
    Ok(solve_upper(&qr.r, &qr.q.t_matvec(&p.b)))
}

/// Sketched solve with the default sparse embedding.
pub fn solve_sketched<T: Scalar>(p: &RegressionProblem<T>, eps: f64, delta: f64, seed: u64) -> Result<Vec<T>> {
    Ok(solve_sketched_with(p, &SketchConfig::default(), eps, delta, seed)?.v)
}

pub fn solve_sketched_with<T: Scalar>(
    p: &RegressionProblem<T>,
    config: &SketchConfig,
    eps: f64,
    delta: f64,
    seed: u64,
) -> Result<SketchedSolution<T>> {
    match &p.factors {
        Some(f) => sketch::solve_sketched_with(f, &p.b, config, eps, delta, seed),
        None => sketch::solve_sketched_with(&p.design, &p.b, config, eps, delta, seed),
    }
}

/// `σ_max(M) / σ_min(M)` from a full SVD.
pub fn condition_number<T: Scalar>(m: &DenseMatrix<T>) -> Result<T> {
    let s = singular_values(m);
    let (hi, lo) = (s[0], *s.last().expect("nonempty"));
    let ratio = if hi > T::zero() { (lo / hi).as_f64() } else { 0.0 };
    if m.rows() < m.cols() || !(ratio > T::RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(hi / lo)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Naive,
    Sketched,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Method::Naive),
            "sketched" => Ok(Method::Sketched),
            other => Err(Error::param(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Naive => "naive",
            Method::Sketched => "sketched",
        })
    }
}

/// Inner least-squares solver selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolver {
    pub method: Method,
    pub sketch_eps: f64,
    pub sketch_delta: f64,
    pub sketch: SketchConfig,
}

impl Default for InnerSolver {
    fn default() -> Self {
        InnerSolver { method: Method::Naive, sketch_eps: 1e-6, sketch_delta: 0.01, sketch: SketchConfig::default() }
    }
}

impl InnerSolver {
    pub fn naive() -> Self {
        Self::default()
    }

    pub fn sketched(eps: f64, delta: f64) -> Self {
        InnerSolver { method: Method::Sketched, sketch_eps: eps, sketch_delta: delta, ..Self::default() }
    }

    pub fn solve<T: Scalar>(&self, p: &RegressionProblem<T>, seed: u64) -> Result<Vec<T>> {
        match self.method {
            Method::Naive => solve_naive(p),
            Method::Sketched => Ok(solve_sketched_with(p, &self.sketch, self.sketch_eps, self.sketch_delta, seed)?.v),
        }
    }
}

/// Result of one half-step of alternating minimization.
#[derive(Clone, Debug)]
pub struct SensingStep<T> {
    /// The d×k minimizer `V̂`.
    pub v_hat: DenseMatrix<T>,
    /// `‖Mv − b‖₂` at the returned solution.
    pub residual_norm: T,
}

/// `argmin_V Σᵢ (x_iᵀ U Vᵀ y_i − b_i)²`, unvectorized with `v = vec(V̂ᵀ)`.
pub fn solve_sensing_step<T: Scalar>(
    u: &DenseMatrix<T>,
    e: &MeasurementEnsemble<T>,
    b: &[T],
    solver: &InnerSolver,
    seed: u64,
) -> Result<SensingStep<T>> {
    let p = RegressionProblem::from_sensing(u, e, b)?;
    let v = solver.solve(&p, seed)?;
    let residual_norm = p.residual_norm(&v);
    let k = u.cols();
    // vec(V̂ᵀ) stacks the k×d columns of V̂ᵀ, i.e. the rows of V̂.
    let v_hat = DenseMatrix::new(e.d, k, v)?;
    Ok(SensingStep { v_hat, residual_norm })
}
