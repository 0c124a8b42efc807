//! Planted low-rank targets and rank-one Gaussian measurement ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{dot, thin_qr, DenseMatrix};
use crate::{rng, Error, Result, Scalar};

/// Samples per independently seeded generation chunk.
pub const CHUNK: usize = 1024;

/// How the interior of the planted spectrum interpolates between κ and 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumShape {
    #[default]
    Geometric,
    Linear,
}

impl std::str::FromStr for SpectrumShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(SpectrumShape::Geometric),
            "linear" => Ok(SpectrumShape::Linear),
            other => Err(Error::param(format!("unknown spectrum shape {other:?}"))),
        }
    }
}

/// The planted rank-k matrix `W* = U* diag(σ*) V*ᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T> {
    pub d: usize,
    pub k: usize,
    pub u_star: DenseMatrix<T>,
    /// Descending, `σ₁* = κ` and `σ_k* = 1`.
    pub sigma_star: Vec<T>,
    pub v_star: DenseMatrix<T>,
    pub kappa: T,
    pub seed: u64,
}

pub fn make_ground_truth<T: Scalar>(
    d: usize,
    k: usize,
    kappa: f64,
    shape: SpectrumShape,
    seed: u64,
) -> Result<GroundTruth<T>> {
    if k == 0 || k > d {
        return Err(Error::param(format!("rank k = {k} must lie in 1..={d}")));
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::param(format!("kappa = {kappa} must be >= 1")));
    }
    if k == 1 && kappa != 1.0 {
        return Err(Error::param("a rank-one target has condition number 1"));
    }
    let sigma_star: Vec<T> = (0..k)
        .map(|p| {
            if k == 1 {
                return T::of(kappa);
            }
            let frac = p as f64 / (k - 1) as f64;
            let s = match shape {
                SpectrumShape::Geometric => kappa.powf(1.0 - frac),
                SpectrumShape::Linear => kappa + (1.0 - kappa) * frac,
            };
            T::of(s)
        })
        .collect();
    let basis = |stream: u64| -> Result<DenseMatrix<T>> {
        let mut r = rng::stream(seed, rng::domain::GROUND_TRUTH, stream);
        let g = DenseMatrix::from_fn(d, k, |_, _| rng::gaussian(&mut r));
        Ok(thin_qr(&g)?.q)
    };
    Ok(GroundTruth { d, k, u_star: basis(0)?, sigma_star, v_star: basis(1)?, kappa: T::of(kappa), seed })
}

impl<T: Scalar> GroundTruth<T> {
    /// Dense `W*`.
    pub fn matrix(&self) -> DenseMatrix<T> {
        let scaled = DenseMatrix::from_fn(self.d, self.k, |i, p| self.u_star[(i, p)] * self.sigma_star[p]);
        scaled.matmul_t(&self.v_star)
    }

    pub fn sigma_max(&self) -> T {
        self.sigma_star[0]
    }

    pub fn sigma_min(&self) -> T {
        self.sigma_star[self.k - 1]
    }

    /// Exact measurements through the factors: `b_i = (U*ᵀx_i)ᵀ Σ* (V*ᵀy_i)`.
    pub fn measure(&self, e: &MeasurementEnsemble<T>) -> Result<Vec<T>> {
        if e.d != self.d {
            return Err(Error::dims(format!("ensemble d = {} vs target d = {}", e.d, self.d)));
        }
        let a = e.x.matmul(&self.u_star);
        let c = e.y.matmul(&self.v_star);
        Ok((0..e.m)
            .map(|i| a.row(i).iter().zip(c.row(i)).zip(&self.sigma_star).map(|((&ap, &cp), &s)| ap * s * cp).sum())
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.u_star.validate()?;
        self.v_star.validate()?;
        if self.u_star.shape() != (self.d, self.k) || self.v_star.shape() != (self.d, self.k) {
            return Err(Error::dims("factor shapes disagree with (d, k)"));
        }
        if self.sigma_star.len() != self.k {
            return Err(Error::dims("spectrum length disagrees with k"));
        }
        Ok(())
    }
}

/// `m` rank-one sensing matrices `A_i = x_i y_iᵀ`, stored as the stacked
/// rows `X` (m×d) and `Y` (m×d).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEnsemble<T> {
    pub d: usize,
    pub m: usize,
    pub x: DenseMatrix<T>,
    pub y: DenseMatrix<T>,
    /// Seed of the generating stream, `None` for hand-built ensembles.
    pub seed: Option<u64>,
    /// Position of the first pair within the seeded stream.
    pub offset: usize,
}

/// `m` i.i.d. pairs `x_i, y_i ~ N(0, I_d)`.
///
/// Pair `i` comes from chunk `i / CHUNK`, and each chunk has its own stream,
/// so generation parallelizes without changing a single bit.
pub fn sample_ensemble<T: Scalar>(d: usize, m: usize, seed: u64) -> Result<MeasurementEnsemble<T>> {
    if d == 0 || m == 0 {
        return Err(Error::param(format!("need d >= 1 and m >= 1, got d = {d}, m = {m}")));
    }
    let chunks: Vec<(Vec<T>, Vec<T>)> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(m - c * CHUNK);
            let mut r = rng::stream(seed, rng::domain::ENSEMBLE, c as u64);
            let mut xs = Vec::with_capacity(count * d);
            let mut ys = Vec::with_capacity(count * d);
            for _ in 0..count {
                xs.extend(rng::gaussian_vec::<T, _>(&mut r, d));
                ys.extend(rng::gaussian_vec::<T, _>(&mut r, d));
            }
            (xs, ys)
        })
        .collect();
    let mut xs = Vec::with_capacity(m * d);
    let mut ys = Vec::with_capacity(m * d);
    for (cx, cy) in chunks {
        xs.extend(cx);
        ys.extend(cy);
    }
    Ok(MeasurementEnsemble {
        d,
        m,
        x: DenseMatrix::new(m, d, xs)?,
        y: DenseMatrix::new(m, d, ys)?,
        seed: Some(seed),
        offset: 0,
    })
}

impl<T: Scalar> MeasurementEnsemble<T> {
    /// Ensemble from explicit stacked vectors.
    pub fn from_pairs(x: DenseMatrix<T>, y: DenseMatrix<T>) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::dims("x and y stacks differ in shape"));
        }
        x.validate()?;
        y.validate()?;
        Ok(MeasurementEnsemble { d: x.cols(), m: x.rows(), x, y, seed: None, offset: 0 })
    }

    /// Dense `A_i = x_i y_iᵀ`.
    pub fn sensing_matrix(&self, i: usize) -> DenseMatrix<T> {
        let (x, y) = (self.x.row(i), self.y.row(i));
        DenseMatrix::from_fn(self.d, self.d, |a, b| x[a] * y[b])
    }

    /// The same pairs with the roles of `x` and `y` exchanged, i.e. `A_iᵀ`.
    pub fn swapped(&self) -> Self {
        MeasurementEnsemble { x: self.y.clone(), y: self.x.clone(), ..self.clone() }
    }

    /// Pairs `range` as a sub-ensemble.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        MeasurementEnsemble {
            d: self.d,
            m: range.len(),
            x: self.x.row_block(range.clone()),
            y: self.y.row_block(range.clone()),
            seed: self.seed,
            offset: self.offset + range.start,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.y.validate()?;
        if self.x.shape() != (self.m, self.d) || self.y.shape() != (self.m, self.d) {
            return Err(Error::dims("stack shapes disagree with (m, d)"));
        }
        Ok(())
    }
}

/// `b_i = x_iᵀ W y_i` for every pair.
pub fn evaluate<T: Scalar>(w: &DenseMatrix<T>, e: &MeasurementEnsemble<T>) -> Result<Vec<T>> {
    if w.shape() != (e.d, e.d) {
        return Err(Error::dims(format!("W is {}x{} but the ensemble has d = {}", w.rows(), w.cols(), e.d)));
    }
    let wy = e.y.matmul_t(w);
    Ok((0..e.m).map(|i| dot(e.x.row(i), wy.row(i))).collect())
}

/// Order-preserving partition into `num_blocks` equal blocks.
pub fn split_ensemble<T: Scalar>(
    e: &MeasurementEnsemble<T>,
    b: &[T],
    num_blocks: usize,
) -> Result<Vec<(MeasurementEnsemble<T>, Vec<T>)>> {
    if b.len() != e.m {
        return Err(Error::dims(format!("{} responses for {} pairs", b.len(), e.m)));
    }
    if num_blocks == 0 || !e.m.is_multiple_of(num_blocks) {
        return Err(Error::param(format!("m = {} is not divisible into {num_blocks} blocks", e.m)));
    }
    let size = e.m / num_blocks;
    Ok((0..num_blocks)
        .map(|j| {
            let r = j * size..(j + 1) * size;
            (e.slice(r.clone()), b[r].to_vec())
        })
        .collect())
}

/// Anything that can answer rank-one measurement queries.
///
/// The solver only talks to its target through this trait; the ground truth
/// is exposed separately so diagnostics can score the run.
pub trait MeasurementSource<T: Scalar> {
    fn dim(&self) -> usize;
    fn measure(&self, e: &MeasurementEnsemble<T>) -> Result<Vec<T>>;
    fn ground_truth(&self) -> Option<&GroundTruth<T>> {
        None
    }
}

impl<T: Scalar> MeasurementSource<T> for GroundTruth<T> {
    fn dim(&self) -> usize {
        self.d
    }

    fn measure(&self, e: &MeasurementEnsemble<T>) -> Result<Vec<T>> {
        GroundTruth::measure(self, e)
    }

    fn ground_truth(&self) -> Option<&GroundTruth<T>> {
        Some(self)
    }
}

/// A dense unknown matrix with no planted factorization.
impl<T: Scalar> MeasurementSource<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn measure(&self, e: &MeasurementEnsemble<T>) -> Result<Vec<T>> {
        evaluate(self, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{singular_values, spectral_norm};

    #[test]
    fn ground_truth_examples() {
        let g = make_ground_truth::<f64>(3, 1, 1.0, SpectrumShape::Geometric, 4).unwrap();
        assert_eq!(g.sigma_star, vec![1.0]);
        assert!((spectral_norm(&g.matrix()) - 1.0).abs() < 1e-12);

        let g = make_ground_truth::<f64>(5, 2, 4.0, SpectrumShape::Geometric, 4).unwrap();
        assert_eq!(g.sigma_star, vec![4.0, 1.0]);

        for shape in [SpectrumShape::Geometric, SpectrumShape::Linear] {
            let g = make_ground_truth::<f64>(12, 4, 7.5, shape, 9).unwrap();
            assert!(g.u_star.orthonormality_defect() < 1e-10);
            assert!(g.v_star.orthonormality_defect() < 1e-10);
            let s = singular_values(&g.matrix());
            assert!((s[0] / s[3] - 7.5).abs() < 1e-9);
            assert!(s[4] < 1e-12 * s[0], "rank exactly k");
        }
        let lin = make_ground_truth::<f64>(6, 3, 5.0, SpectrumShape::Linear, 1).unwrap();
        assert_eq!(lin.sigma_star, vec![5.0, 3.0, 1.0]);
    }

    #[test]
    fn ground_truth_rejects_bad_parameters() {
        assert!(make_ground_truth::<f64>(3, 4, 1.0, SpectrumShape::Geometric, 0).is_err());
        assert!(make_ground_truth::<f64>(3, 2, 0.5, SpectrumShape::Geometric, 0).is_err());
        assert!(make_ground_truth::<f64>(3, 1, 2.0, SpectrumShape::Geometric, 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_ensemble::<f64>(7, 3000, 42).unwrap();
        let b = sample_ensemble::<f64>(7, 3000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble::<f64>(7, 3000, 43).unwrap();
        assert_ne!(a.x, c.x);
        // A prefix of a longer draw is the shorter draw.
        let short = sample_ensemble::<f64>(7, 1500, 42).unwrap();
        assert_eq!(short.x, a.slice(0..1500).x);
        assert!(sample_ensemble::<f64>(0, 3, 1).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let e = MeasurementEnsemble::from_pairs(
            DenseMatrix::new(1, 2, vec![1.0, 0.0]).unwrap(),
            DenseMatrix::new(1, 2, vec![0.0, 1.0]).unwrap(),
        )
        .unwrap();
        let w = DenseMatrix::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(evaluate(&w, &e).unwrap(), vec![1.0]);
        assert_eq!(evaluate(&DenseMatrix::zeros(2, 2), &e).unwrap(), vec![0.0]);
        assert!(evaluate(&DenseMatrix::zeros(3, 3), &e).is_err());
    }

    #[test]
    fn evaluate_matches_trace_and_factors() {
        let g = make_ground_truth::<f64>(6, 2, 3.0, SpectrumShape::Geometric, 2).unwrap();
        let e = sample_ensemble::<f64>(6, 20, 5).unwrap();
        let w = g.matrix();
        let b = evaluate(&w, &e).unwrap();
        let via_factors = g.measure(&e).unwrap();
        for i in 0..e.m {
            let tr = e.sensing_matrix(i).t_matmul(&w).trace();
            assert!((b[i] - tr).abs() < 1e-12 * tr.abs().max(1.0));
            assert!((b[i] - via_factors[i]).abs() < 1e-12 * tr.abs().max(1.0));
        }
    }

    #[test]
    fn split_examples() {
        let e = sample_ensemble::<f64>(2, 6, 1).unwrap();
        let b: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let blocks = split_ensemble(&e, &b, 3).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[1].1, vec![2.0, 3.0]);
        assert_eq!(blocks[1].0.x.row(0), e.x.row(2));
        assert_eq!(blocks[2].0.offset, 4);
        let one = split_ensemble(&e, &b, 1).unwrap();
        assert_eq!(one[0].0.x, e.x);
        assert!(matches!(split_ensemble(&e, &b, 4), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = make_ground_truth::<f64>(4, 2, 2.0, SpectrumShape::Geometric, 3).unwrap();
        let back: GroundTruth<f64> = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
