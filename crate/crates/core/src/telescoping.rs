//! Shell chain `z_k = F_k z_{k-1} + w_k`, `w_k ~ N(0, Q_k)`, `z_0 ~ N(0, Σ_b)`.
//!
//! [`factorize`] runs the backward block recursion on `P A Pᵀ`:
//! `Q_tau = (M0_tau)⁻¹`, then `Q_k⁻¹ = M0_k - M+_k F_{k+1}` for
//! `k = tau-1, ..., 1`, with `F_k = Q_k M-_k` throughout.
//! [`factorize_oracle`] computes the same parameters from second moments
//! alone and exists to cross-check it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, PivotReport};
use crate::shells::{BlockTridiagonal, ShellDecomposition};

#[derive(Debug, Clone, PartialEq)]
pub struct TelescopingModel {
    tau: usize,
    f: Vec<DMatrix<f64>>,
    q: Vec<DMatrix<f64>>,
    boundary_cov: DMatrix<f64>,
}

impl TelescopingModel {
    pub fn tau(&self) -> usize {
        self.tau
    }

    /// `F_k`, `k = 1..=tau`.
    pub fn f(&self, k: usize) -> &DMatrix<f64> {
        &self.f[k - 1]
    }

    /// `Q_k`, `k = 1..=tau`.
    pub fn q(&self, k: usize) -> &DMatrix<f64> {
        &self.q[k - 1]
    }

    /// Covariance of `z_0`.
    pub fn boundary_cov(&self) -> &DMatrix<f64> {
        &self.boundary_cov
    }

    /// `M^z_k`, `k = 0..=tau`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.boundary_cov.nrows()).chain(self.q.iter().map(|q| q.nrows())).collect()
    }

    /// Covariance of `[z_0; z_1; ...; z_tau]` implied by propagating the chain.
    pub fn implied_covariance(&self) -> DMatrix<f64> {
        let sizes = self.sizes();
        let starts: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, s| {
                let st = *acc;
                *acc += s;
                Some(st)
            })
            .collect();
        let total: usize = sizes.iter().sum();
        let mut cov = DMatrix::<f64>::zeros(total, total);
        cov.view_mut((0, 0), (sizes[0], sizes[0])).copy_from(&self.boundary_cov);
        for k in 1..=self.tau {
            let f = self.f(k);
            let (sk, st) = (sizes[k], starts[k]);
            let prev = starts[k - 1];
            // Cov(z_k, z_j) = F_k Cov(z_{k-1}, z_j) for j < k
            for j in 0..k {
                let block = f * cov.view((prev, starts[j]), (sizes[k - 1], sizes[j]));
                cov.view_mut((st, starts[j]), (sk, sizes[j])).copy_from(&block);
                cov.view_mut((starts[j], st), (sizes[j], sk)).copy_from(&block.transpose());
            }
            let own = f * cov.view((prev, st), (sizes[k - 1], sk)) + self.q(k);
            cov.view_mut((st, st), (sk, sk)).copy_from(&linalg::symmetrize(&own));
        }
        cov
    }
}

fn stage_factor(stage: usize, a: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    linalg::spd_factor(a).map_err(|_| {
        let pivot = match linalg::cholesky_pivots(a) {
            PivotReport::Failed { index, .. } => index,
            PivotReport::Positive { .. } => 0,
        };
        Error::StageNotPositiveDefinite { stage, pivot }
    })
}

/// Backward block recursion for `F_k`, `Q_k`.
pub fn factorize(bt: &BlockTridiagonal, boundary_cov: &DMatrix<f64>) -> Result<TelescopingModel> {
    let tau = bt.tau();
    if boundary_cov.nrows() != bt.lower(1).ncols() || boundary_cov.ncols() != boundary_cov.nrows() {
        return Err(Error::Dimension(format!(
            "boundary covariance must be {0}x{0}",
            bt.lower(1).ncols()
        )));
    }
    let mut f = vec![DMatrix::zeros(0, 0); tau];
    let mut q = vec![DMatrix::zeros(0, 0); tau];
    for k in (1..=tau).rev() {
        let q_inv = if k == tau {
            bt.diag(k).clone()
        } else {
            linalg::symmetrize(&(bt.diag(k) - bt.upper(k) * &f[k]))
        };
        let chol = stage_factor(k, &q_inv)?;
        f[k - 1] = chol.solve(bt.lower(k));
        q[k - 1] = linalg::symmetrize(&chol.inverse());
    }
    Ok(TelescopingModel { tau, f, q, boundary_cov: boundary_cov.clone() })
}

/// `F_k = E[z_k z_{k-1}ᵀ] E[z_{k-1} z_{k-1}ᵀ]⁻¹`, `Q_k = E[z_k z_kᵀ] - F_k E[z_{k-1} z_kᵀ]`
/// from the dense joint covariances.
pub fn factorize_oracle(
    cov_xx: &DMatrix<f64>,
    cov_xb: &DMatrix<f64>,
    boundary_cov: &DMatrix<f64>,
    dec: &ShellDecomposition,
) -> Result<TelescopingModel> {
    let spec = dec.spec();
    let n = spec.interior_len();
    if n > crate::lattice::DENSE_ORACLE_CAP {
        return Err(Error::TooLarge { size: n, cap: crate::lattice::DENSE_ORACLE_CAP });
    }
    let nb = spec.boundary_len();
    if cov_xx.shape() != (n, n) || cov_xb.shape() != (n, nb) || boundary_cov.shape() != (nb, nb) {
        return Err(Error::Dimension("covariance shapes do not match the lattice".into()));
    }
    // Row-major interior indices of each shell; shell 0 uses boundary order.
    let idx: Vec<Vec<usize>> = (0..=dec.tau())
        .map(|k| {
            if k == 0 {
                (0..nb).collect()
            } else {
                dec.shell(k).iter().map(|&(r, c)| spec.interior_index(r, c)).collect()
            }
        })
        .collect();
    let moment = |k: usize, l: usize| -> DMatrix<f64> {
        let (ik, il) = (&idx[k], &idx[l]);
        match (k, l) {
            (0, 0) => boundary_cov.clone(),
            (0, _) => DMatrix::from_fn(ik.len(), il.len(), |i, j| cov_xb[(il[j], ik[i])]),
            (_, 0) => DMatrix::from_fn(ik.len(), il.len(), |i, j| cov_xb[(ik[i], il[j])]),
            _ => DMatrix::from_fn(ik.len(), il.len(), |i, j| cov_xx[(ik[i], il[j])]),
        }
    };

    let tau = dec.tau();
    let mut f = Vec::with_capacity(tau);
    let mut q = Vec::with_capacity(tau);
    for k in 1..=tau {
        let prev = moment(k - 1, k - 1);
        let chol = linalg::spd_factor(&prev)
            .map_err(|_| Error::Singular(format!("E[z_{0} z_{0}ᵀ] is not invertible", k - 1)))?;
        let cross = moment(k - 1, k);
        let fk = chol.solve(&cross).transpose();
        let qk = linalg::symmetrize(&(moment(k, k) - &fk * &cross));
        f.push(fk);
        q.push(qk);
    }
    Ok(TelescopingModel { tau, f, q, boundary_cov: boundary_cov.clone() })
}

/// Builds the block bidiagonal `L` with `P A Pᵀ = Lᵀ L` from the chain:
/// diagonal blocks `L_k` (upper triangular, `L_kᵀ L_k = Q_k⁻¹`) and
/// sub-diagonal blocks `-L_k⁻ᵀ M-_k`. Used to check the factorization.
pub fn cholesky_blocks(bt: &BlockTridiagonal, model: &TelescopingModel) -> Result<DMatrix<f64>> {
    let tau = bt.tau();
    let sizes: Vec<usize> = (1..=tau).map(|k| bt.diag(k).nrows()).collect();
    let n: usize = sizes.iter().sum();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut start = 0;
    for k in 1..=tau {
        let q_inv = linalg::spd_inverse(model.q(k))?;
        let lower = linalg::spd_factor(&q_inv)?.unpack();
        let lk = lower.transpose();
        let sk = sizes[k - 1];
        l.view_mut((start, start), (sk, sk)).copy_from(&lk);
        if k >= 2 {
            // L_kᵀ is lower triangular
            let p = lower
                .solve_lower_triangular(bt.lower(k))
                .ok_or_else(|| Error::Singular(format!("L_{k} is singular")))?;
            let sp = sizes[k - 2];
            l.view_mut((start, start - sp), (sk, sp)).copy_from(&(-p));
        }
        start += sk;
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_precision, joint_covariance, LatticeSpec, NeighborhoodCoefficients};
    use crate::shells::{permute_system, shells};

    fn setup(n: usize, m: usize, alpha: f64, beta: f64) -> (crate::PrecisionSystem, ShellDecomposition, BlockTridiagonal) {
        let s = LatticeSpec::new(n, m).unwrap();
        let c = NeighborhoodCoefficients::isotropic(s, alpha, beta).unwrap();
        let sys = build_precision(s, &c, DMatrix::identity(s.boundary_len(), s.boundary_len())).unwrap();
        let d = shells(s);
        let bt = permute_system(&sys, &d).unwrap();
        (sys, d, bt)
    }

    #[test]
    fn white_model_is_decoupled() {
        let (sys, d, bt) = setup(4, 5, 1.0, 0.0);
        let tm = factorize(&bt, &sys.boundary_cov).unwrap();
        for k in 1..=tm.tau() {
            assert!(tm.f(k).iter().all(|v| *v == 0.0));
            assert_eq!(tm.q(k), &DMatrix::identity(d.size(k), d.size(k)));
        }
        let (cxx, cxb) = joint_covariance(&sys).unwrap();
        let oracle = factorize_oracle(&cxx, &cxb, &sys.boundary_cov, &d).unwrap();
        for k in 1..=tm.tau() {
            assert!(oracle.f(k).iter().all(|v| *v == 0.0));
            assert_eq!(oracle.q(k), &DMatrix::identity(d.size(k), d.size(k)));
        }
    }

    #[test]
    fn three_by_three_two_stage_recursion() {
        let (sys, d, bt) = setup(3, 3, 9.0, 1.0);
        let tm = factorize(&bt, &sys.boundary_cov).unwrap();
        // center node: conditional mean is the average weight 1/9 of its 8 neighbors
        assert!((tm.q(2)[(0, 0)] - 1.0 / 9.0).abs() < 1e-16);
        for j in 0..8 {
            assert!((tm.f(2)[(0, j)] - 1.0 / 9.0).abs() < 1e-16);
        }
        // Q_1⁻¹ = M0_1 - M+_1 F_2 = M0_1 - (1/9) 1 1ᵀ
        let expect = bt.diag(1) - DMatrix::from_element(8, 8, 1.0 / 9.0);
        let got = linalg::spd_inverse(tm.q(1)).unwrap();
        assert!((got - expect).norm() < 1e-13);

        let (cxx, cxb) = joint_covariance(&sys).unwrap();
        let oracle = factorize_oracle(&cxx, &cxb, &sys.boundary_cov, &d).unwrap();
        for k in 1..=2 {
            assert!(linalg::relative_deviation(tm.f(k), oracle.f(k)) < 1e-10);
            assert!(linalg::relative_deviation(tm.q(k), oracle.q(k)) < 1e-10);
        }
    }

    #[test]
    fn heterogeneous_matches_oracle() {
        let s = LatticeSpec::new(5, 5).unwrap();
        let c = NeighborhoodCoefficients::random_symmetric(s, 9.0, 0.0, 1.0, 17).unwrap();
        let sys = build_precision(s, &c, DMatrix::identity(24, 24)).unwrap();
        let d = shells(s);
        let bt = permute_system(&sys, &d).unwrap();
        let tm = factorize(&bt, &sys.boundary_cov).unwrap();
        let (cxx, cxb) = joint_covariance(&sys).unwrap();
        let oracle = factorize_oracle(&cxx, &cxb, &sys.boundary_cov, &d).unwrap();
        for k in 1..=tm.tau() {
            assert!(linalg::relative_deviation(tm.f(k), oracle.f(k)) < 1e-9);
            assert!(linalg::relative_deviation(tm.q(k), oracle.q(k)) < 1e-9);
        }
    }

    #[test]
    fn reassembly_and_implied_covariance() {
        let (sys, d, bt) = setup(6, 4, 9.0, 1.0);
        let tm = factorize(&bt, &sys.boundary_cov).unwrap();
        let l = cholesky_blocks(&bt, &tm).unwrap();
        let pa = bt.assemble();
        assert!((l.transpose() * &l - &pa).norm() / pa.norm() < 1e-10);

        let implied = tm.implied_covariance();
        let nb = sys.spec.boundary_len();
        let (cxx, cxb) = joint_covariance(&sys).unwrap();
        let p = d.permutation_matrix();
        let zz = &p * cxx * p.transpose();
        let zb = &p * cxb;
        let n = sys.spec.interior_len();
        let got_zz = implied.view((nb, nb), (n, n)).into_owned();
        let got_zb = implied.view((nb, 0), (n, nb)).into_owned();
        assert!((got_zz - &zz).norm() / zz.norm() < 1e-8);
        assert!((got_zb - &zb).norm() / (1.0 + zb.norm()) < 1e-8);
    }

    #[test]
    fn indefinite_model_reports_stage() {
        let s = LatticeSpec::new(3, 3).unwrap();
        let c = NeighborhoodCoefficients::isotropic(s, 1.0, 1.0).unwrap();
        let sys = build_precision(s, &c, DMatrix::identity(16, 16)).unwrap();
        let bt = permute_system(&sys, &shells(s)).unwrap();
        match factorize(&bt, &sys.boundary_cov) {
            Err(Error::StageNotPositiveDefinite { stage, .. }) => assert_eq!(stage, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oracle_rejects_singular_boundary() {
        let s = LatticeSpec::new(2, 2).unwrap();
        let c = NeighborhoodCoefficients::isotropic(s, 9.0, 1.0).unwrap();
        let sys = build_precision(s, &c, DMatrix::zeros(12, 12)).unwrap();
        let (cxx, cxb) = joint_covariance(&sys).unwrap();
        assert!(matches!(
            factorize_oracle(&cxx, &cxb, &sys.boundary_cov, &shells(s)),
            Err(Error::Singular(_))
        ));
    }
}
