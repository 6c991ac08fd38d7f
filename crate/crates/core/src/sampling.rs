//! Exact field synthesis by running the shell chain forward from the
//! boundary, plus sample-covariance helpers for validating it.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::shells::ShellDecomposition;
use crate::telescoping::TelescopingModel;

/// Relative zero-pivot tolerance (times the trace) for factoring `Σ_b`.
pub const BOUNDARY_PIVOT_TOL: f64 = 1e-12;

/// Standard normal stream: Box-Muller over a seeded ChaCha8 counter stream.
/// Output is bit-identical across platforms for a given seed.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let (u1, u2) = (self.uniform(), self.uniform());
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normals(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.next_normal())
    }
}

/// One realization of the field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    /// `z_0` in clockwise boundary order.
    pub boundary: DVector<f64>,
    /// Interior values, `N x M`.
    pub interior: DMatrix<f64>,
    pub seed: u64,
}

impl FieldSample {
    /// Interior values stacked row-major.
    pub fn interior_row_major(&self) -> Vec<f64> {
        self.interior.transpose().as_slice().to_vec()
    }
}

/// Precomputed square-root factors of `Σ_b` and every `Q_k`.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    model: &'a TelescopingModel,
    dec: &'a ShellDecomposition,
    boundary_factor: DMatrix<f64>,
    noise_factors: Vec<DMatrix<f64>>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a TelescopingModel, dec: &'a ShellDecomposition) -> Result<Self> {
        if model.sizes() != dec.sizes() {
            return Err(Error::Dimension("telescoping model does not match the shell decomposition".into()));
        }
        let boundary_factor = linalg::psd_factor(model.boundary_cov(), BOUNDARY_PIVOT_TOL)?;
        let noise_factors = (1..=model.tau())
            .map(|k| linalg::spd_factor(model.q(k)).map(|c| c.unpack()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sampler { model, dec, boundary_factor, noise_factors })
    }

    /// Normals are consumed shell by shell, in clockwise node order.
    pub fn sample(&self, seed: u64) -> FieldSample {
        let mut stream = NormalStream::new(seed);
        let boundary = &self.boundary_factor * stream.normals(self.boundary_factor.ncols());
        let spec = self.dec.spec();
        let mut z = Vec::with_capacity(spec.interior_len());
        let mut prev = boundary.clone();
        for k in 1..=self.model.tau() {
            let l = &self.noise_factors[k - 1];
            let zk = self.model.f(k) * &prev + l * stream.normals(l.ncols());
            z.extend_from_slice(zk.as_slice());
            prev = zk;
        }
        let x = self.dec.to_row_major(&z);
        let interior = DMatrix::from_row_slice(spec.n_rows(), spec.n_cols(), &x);
        FieldSample { boundary, interior, seed }
    }
}

/// Draws one field from the chain. Deterministic in `(model, seed)`.
pub fn sample_field(model: &TelescopingModel, dec: &ShellDecomposition, seed: u64) -> Result<FieldSample> {
    Ok(Sampler::new(model, dec)?.sample(seed))
}

/// Streaming mean and co-moment accumulator (Welford).
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    count: usize,
    mean: DVector<f64>,
    comoment: DMatrix<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        MomentAccumulator { count: 0, mean: DVector::zeros(dim), comoment: DMatrix::zeros(dim, dim) }
    }

    pub fn push(&mut self, x: &DVector<f64>) {
        self.count += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = x - &self.mean;
        self.comoment.ger(1.0, &delta, &delta2, 1.0);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Unbiased (`1/(n-1)`) covariance.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        if self.count < 2 {
            return Err(Error::Invalid("need at least two samples".into()));
        }
        Ok(linalg::symmetrize(&(&self.comoment / (self.count - 1) as f64)))
    }
}

fn check_shapes(samples: &[FieldSample]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::Invalid("need at least two samples".into()));
    }
    let shape = (samples[0].interior.shape(), samples[0].boundary.len());
    if samples.iter().any(|s| (s.interior.shape(), s.boundary.len()) != shape) {
        return Err(Error::Dimension("samples have different shapes".into()));
    }
    Ok(())
}

/// Unbiased sample covariance of the row-major interior.
pub fn empirical_covariance(samples: &[FieldSample]) -> Result<DMatrix<f64>> {
    check_shapes(samples)?;
    let mut acc = MomentAccumulator::new(samples[0].interior.len());
    for s in samples {
        acc.push(&DVector::from_vec(s.interior_row_major()));
    }
    acc.covariance()
}

/// Unbiased sample cross-covariance `Cov(x, x_b)` (interior rows, boundary columns).
pub fn empirical_cross_covariance(samples: &[FieldSample]) -> Result<DMatrix<f64>> {
    check_shapes(samples)?;
    let n = samples[0].interior.len();
    let nb = samples[0].boundary.len();
    let mut acc = MomentAccumulator::new(n + nb);
    for s in samples {
        let mut v = s.interior_row_major();
        v.extend_from_slice(s.boundary.as_slice());
        acc.push(&DVector::from_vec(v));
    }
    Ok(acc.covariance()?.view((0, n), (n, nb)).into_owned())
}
