//! Noncausal second-order lattice model in matrix form,
//! `A x = A_b x_b + v` with `E[v vᵀ] = A` and `v` independent of `x_b`.
//!
//! Interior nodes `(i, j)`, `1 <= i <= N`, `1 <= j <= M`, are stacked row-major.
//! Boundary nodes of the `(N+2) x (M+2)` frame are listed clockwise starting
//! at `(0, 0)`.

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, PivotReport};

pub type SpdReport = PivotReport;

/// Largest interior size accepted by the dense covariance oracle.
pub const DENSE_ORACLE_CAP: usize = 4096;

/// The eight chebyshev-distance-1 neighbor offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Offset {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Offset {
    pub const ALL: [Offset; 8] = [
        Offset::N,
        Offset::NE,
        Offset::E,
        Offset::SE,
        Offset::S,
        Offset::SW,
        Offset::W,
        Offset::NW,
    ];

    /// `(row delta, column delta)`; rows grow downwards.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Offset::N => (-1, 0),
            Offset::NE => (-1, 1),
            Offset::E => (0, 1),
            Offset::SE => (1, 1),
            Offset::S => (1, 0),
            Offset::SW => (1, -1),
            Offset::W => (0, -1),
            Offset::NW => (-1, -1),
        }
    }

    pub fn opposite(self) -> Offset {
        match self {
            Offset::N => Offset::S,
            Offset::NE => Offset::SW,
            Offset::E => Offset::W,
            Offset::SE => Offset::NW,
            Offset::S => Offset::N,
            Offset::SW => Offset::NE,
            Offset::W => Offset::E,
            Offset::NW => Offset::SE,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Offset::N => "n",
            Offset::NE => "ne",
            Offset::E => "e",
            Offset::SE => "se",
            Offset::S => "s",
            Offset::SW => "sw",
            Offset::W => "w",
            Offset::NW => "nw",
        }
    }

    pub fn from_name(name: &str) -> Option<Offset> {
        Offset::ALL.into_iter().find(|o| o.name() == name)
    }
}

/// Lattice dimensions: `N` interior rows, `M` interior columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    n_rows: usize,
    n_cols: usize,
}

impl LatticeSpec {
    pub fn new(n_rows: usize, n_cols: usize) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Invalid(format!(
                "lattice needs at least one interior row and column, got {n_rows}x{n_cols}"
            )));
        }
        Ok(LatticeSpec { n_rows, n_cols })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// `N * M`.
    pub fn interior_len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// `2(N+1) + 2(M+1)`.
    pub fn boundary_len(&self) -> usize {
        2 * (self.n_rows + 1) + 2 * (self.n_cols + 1)
    }

    pub fn is_interior(&self, row: isize, col: isize) -> bool {
        row >= 1 && col >= 1 && row <= self.n_rows as isize && col <= self.n_cols as isize
    }

    /// Row-major position of interior node `(row, col)` (1-based coordinates).
    pub fn interior_index(&self, row: usize, col: usize) -> usize {
        debug_assert!(self.is_interior(row as isize, col as isize));
        (row - 1) * self.n_cols + (col - 1)
    }

    pub fn interior_node(&self, index: usize) -> (usize, usize) {
        (index / self.n_cols + 1, index % self.n_cols + 1)
    }

    /// Boundary frame nodes, clockwise from `(0, 0)`.
    pub fn boundary_nodes(&self) -> Vec<(usize, usize)> {
        ring(0, self.n_rows + 1, 0, self.n_cols + 1)
    }

    /// Position of `(row, col)` in [`Self::boundary_nodes`], if it is on the frame.
    pub fn boundary_index(&self, row: usize, col: usize) -> Option<usize> {
        let (last_r, last_c) = (self.n_rows + 1, self.n_cols + 1);
        if row > last_r || col > last_c {
            return None;
        }
        if row == 0 {
            Some(col)
        } else if col == last_c {
            Some(last_c + row)
        } else if row == last_r {
            Some(last_c + last_r + (last_c - col))
        } else if col == 0 {
            Some(2 * last_c + last_r + (last_r - row))
        } else {
            None
        }
    }
}

/// Clockwise traversal of the rectangle `[r0, r1] x [c0, c1]` starting at its
/// top-left node. Single rows run left to right, single columns top to bottom.
pub(crate) fn ring(r0: usize, r1: usize, c0: usize, c1: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for c in c0..=c1 {
        out.push((r0, c));
    }
    for r in (r0 + 1)..=r1 {
        out.push((r, c1));
    }
    if r1 > r0 {
        for c in (c0..c1).rev() {
            out.push((r1, c));
        }
    }
    if c1 > c0 {
        for r in ((r0 + 1)..r1).rev() {
            out.push((r, c0));
        }
    }
    out
}

/// Interaction weights: `alpha` on the diagonal and `beta` per node and
/// offset, stored row-major over the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodCoefficients {
    spec: LatticeSpec,
    alpha: Vec<f64>,
    beta: Vec<[f64; 8]>,
    homogeneous: bool,
}

impl NeighborhoodCoefficients {
    /// The same `alpha` and per-offset `beta` at every node. `beta` is indexed
    /// in [`Offset::ALL`] order.
    pub fn homogeneous(spec: LatticeSpec, alpha: f64, beta: [f64; 8]) -> Result<Self> {
        let c = NeighborhoodCoefficients {
            spec,
            alpha: vec![alpha; spec.interior_len()],
            beta: vec![beta; spec.interior_len()],
            homogeneous: true,
        };
        c.validate()?;
        Ok(c)
    }

    /// Same `beta` on all eight offsets.
    pub fn isotropic(spec: LatticeSpec, alpha: f64, beta: f64) -> Result<Self> {
        Self::homogeneous(spec, alpha, [beta; 8])
    }

    pub fn heterogeneous(spec: LatticeSpec, alpha: Vec<f64>, beta: Vec<[f64; 8]>) -> Result<Self> {
        let c = NeighborhoodCoefficients { spec, alpha, beta, homogeneous: false };
        c.validate()?;
        Ok(c)
    }

    /// Per-node `alpha` with homogeneous `beta`.
    pub fn with_alpha_field(spec: LatticeSpec, alpha: Vec<f64>, beta: [f64; 8]) -> Result<Self> {
        let n = alpha.len();
        Self::heterogeneous(spec, alpha, vec![beta; n])
    }

    /// Symmetric heterogeneous `beta` drawn uniformly from `[lo, hi)` with a
    /// seeded generator, constant `alpha`.
    pub fn random_symmetric(spec: LatticeSpec, alpha: f64, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.interior_len();
        let mut beta = vec![[f64::NAN; 8]; n];
        for p in 0..n {
            let (r, c) = spec.interior_node(p);
            for o in Offset::ALL {
                if !beta[p][o.index()].is_nan() {
                    continue;
                }
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                let b = lo + (hi - lo) * u;
                beta[p][o.index()] = b;
                let (dr, dc) = o.delta();
                let (qr, qc) = (r as isize + dr, c as isize + dc);
                if spec.is_interior(qr, qc) {
                    let q = spec.interior_index(qr as usize, qc as usize);
                    beta[q][o.opposite().index()] = b;
                }
            }
        }
        Self::heterogeneous(spec, vec![alpha; n], beta)
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn alpha(&self, index: usize) -> f64 {
        self.alpha[index]
    }

    pub fn beta(&self, index: usize, offset: Offset) -> f64 {
        self.beta[index][offset.index()]
    }

    fn validate(&self) -> Result<()> {
        let n = self.spec.interior_len();
        if self.alpha.len() != n || self.beta.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n} alpha/beta entries, got {}/{}",
                self.alpha.len(),
                self.beta.len()
            )));
        }
        for (p, &a) in self.alpha.iter().enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                let (r, c) = self.spec.interior_node(p);
                return Err(Error::Coefficients(format!("alpha at ({r}, {c}) must be positive, got {a}")));
            }
        }
        for (p, row) in self.beta.iter().enumerate() {
            let (r, c) = self.spec.interior_node(p);
            for o in Offset::ALL {
                let b = row[o.index()];
                if !b.is_finite() {
                    return Err(Error::Coefficients(format!("beta.{} at ({r}, {c}) is not finite", o.name())));
                }
                if self.homogeneous {
                    if b != row[o.opposite().index()] {
                        return Err(Error::Coefficients(format!(
                            "beta.{} != beta.{} in a homogeneous model",
                            o.name(),
                            o.opposite().name()
                        )));
                    }
                    continue;
                }
                let (dr, dc) = o.delta();
                let (qr, qc) = (r as isize + dr, c as isize + dc);
                if self.spec.is_interior(qr, qc) {
                    let q = self.spec.interior_index(qr as usize, qc as usize);
                    if self.beta[q][o.opposite().index()] != b {
                        return Err(Error::Coefficients(format!(
                            "beta not symmetric between ({r}, {c}) and ({qr}, {qc})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `A`, `A_b` and the boundary covariance `Σ_b`.
#[derive(Debug, Clone)]
pub struct PrecisionSystem {
    pub spec: LatticeSpec,
    pub a: DMatrix<f64>,
    pub a_b: DMatrix<f64>,
    pub boundary_cov: DMatrix<f64>,
}

/// Assembles `A` (α on the diagonal, −β for interior neighbors) and `A_b`
/// (+β for boundary neighbors) and checks `Σ_b`.
pub fn build_precision(
    spec: LatticeSpec,
    coeffs: &NeighborhoodCoefficients,
    boundary_cov: DMatrix<f64>,
) -> Result<PrecisionSystem> {
    if coeffs.spec != spec {
        return Err(Error::Dimension(format!(
            "coefficients are for a {}x{} lattice, expected {}x{}",
            coeffs.spec.n_rows, coeffs.spec.n_cols, spec.n_rows, spec.n_cols
        )));
    }
    check_boundary_cov(&spec, &boundary_cov)?;

    let n = spec.interior_len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut a_b = DMatrix::<f64>::zeros(n, spec.boundary_len());
    for p in 0..n {
        let (r, c) = spec.interior_node(p);
        a[(p, p)] = coeffs.alpha[p];
        for o in Offset::ALL {
            let b = coeffs.beta[p][o.index()];
            if b == 0.0 {
                continue;
            }
            let (dr, dc) = o.delta();
            let (qr, qc) = (r as isize + dr, c as isize + dc);
            if spec.is_interior(qr, qc) {
                a[(p, spec.interior_index(qr as usize, qc as usize))] = -b;
            } else {
                let bi = spec
                    .boundary_index(qr as usize, qc as usize)
                    .expect("second-order neighbor of an interior node lies on the frame");
                a_b[(p, bi)] = b;
            }
        }
    }
    Ok(PrecisionSystem { spec, a, a_b, boundary_cov })
}

fn check_boundary_cov(spec: &LatticeSpec, cov: &DMatrix<f64>) -> Result<()> {
    let nb = spec.boundary_len();
    if cov.nrows() != nb || cov.ncols() != nb {
        return Err(Error::Dimension(format!(
            "boundary covariance must be {nb}x{nb}, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::BoundaryCovariance("non-finite entry".into()));
    }
    let scale = linalg::max_abs(cov);
    let asym = linalg::asymmetry(cov);
    if asym > 1e-10 * scale {
        return Err(Error::BoundaryCovariance(format!("asymmetry {asym:e} exceeds 1e-10 x {scale:e}")));
    }
    linalg::psd_factor(cov, 1e-12)?;
    Ok(())
}

/// Dense Cholesky attempt on `A`.
pub fn validate_spd(sys: &PrecisionSystem) -> SpdReport {
    linalg::cholesky_pivots(&sys.a)
}

/// Dense `(Cov(x), Cov(x, x_b))` from `x = A⁻¹(A_b x_b + v)`:
/// `Cov(x) = A⁻¹ A_b Σ_b A_bᵀ A⁻¹ + A⁻¹`, `Cov(x, x_b) = A⁻¹ A_b Σ_b`.
pub fn joint_covariance(sys: &PrecisionSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = sys.spec.interior_len();
    if n > DENSE_ORACLE_CAP {
        return Err(Error::TooLarge { size: n, cap: DENSE_ORACLE_CAP });
    }
    let chol = linalg::spd_factor(&sys.a)?;
    let a_inv = chol.inverse();
    let gain = chol.solve(&sys.a_b);
    let cov_xb = &gain * &sys.boundary_cov;
    let cov_xx = &cov_xb * gain.transpose() + a_inv;
    Ok((linalg::symmetrize(&cov_xx), cov_xb))
}

/// Covariance of the stacked vector `[x; x_b]`.
pub fn stacked_covariance(sys: &PrecisionSystem) -> Result<DMatrix<f64>> {
    let (cxx, cxb) = joint_covariance(sys)?;
    let (n, nb) = (sys.spec.interior_len(), sys.spec.boundary_len());
    let mut full = DMatrix::<f64>::zeros(n + nb, n + nb);
    full.view_mut((0, 0), (n, n)).copy_from(&cxx);
    full.view_mut((0, n), (n, nb)).copy_from(&cxb);
    full.view_mut((n, 0), (nb, n)).copy_from(&cxb.transpose());
    full.view_mut((n, n), (nb, nb)).copy_from(&sys.boundary_cov);
    Ok(full)
}
