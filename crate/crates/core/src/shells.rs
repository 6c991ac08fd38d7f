//! Nested rectangular shells `∂T_k = T_k \ T_{k+1}` with
//! `T_k = [k, N+1-k] x [k, M+1-k]`, and the block-tridiagonal form of the
//! precision matrix in shell order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{ring, LatticeSpec, PrecisionSystem};

/// Lattice node `(row, col)` on the full `(N+2) x (M+2)` frame.
pub type Node = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShellDecomposition {
    spec: LatticeSpec,
    tau: usize,
    shells: Vec<Vec<Node>>,
    /// `perm[row_major] = shell-order position` over the interior.
    perm: Vec<usize>,
    /// Inverse of `perm`.
    order: Vec<usize>,
    /// Start of shell `k` (k >= 1) inside the stacked interior vector `[z_1; ...; z_tau]`.
    starts: Vec<usize>,
}

impl ShellDecomposition {
    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    /// Number of interior shells, `ceil(min(N, M) / 2)`.
    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Shell `k` in clockwise order, `k = 0..=tau`.
    pub fn shell(&self, k: usize) -> &[Node] {
        &self.shells[k]
    }

    pub fn shells(&self) -> &[Vec<Node>] {
        &self.shells
    }

    /// `M^z_k` for `k = 0..=tau`.
    pub fn sizes(&self) -> Vec<usize> {
        self.shells.iter().map(Vec::len).collect()
    }

    pub fn size(&self, k: usize) -> usize {
        self.shells[k].len()
    }

    /// Row-major interior index to shell-order position.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Shell-order position to row-major interior index.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Range of shell `k >= 1` inside the stacked interior vector.
    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        assert!(k >= 1 && k <= self.tau, "interior shell index out of range");
        self.starts[k - 1]..self.starts[k - 1] + self.shells[k].len()
    }

    /// Shell index of every interior node, row-major.
    pub fn shell_of_interior(&self) -> Vec<usize> {
        let mut out = vec![0; self.spec.interior_len()];
        for k in 1..=self.tau {
            for &(r, c) in &self.shells[k] {
                out[self.spec.interior_index(r, c)] = k;
            }
        }
        out
    }

    /// `P x`: row-major interior vector to shell order.
    pub fn to_shell_order(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; x.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            z[p] = x[i];
        }
        z
    }

    /// `Pᵀ z`: shell order back to row-major.
    pub fn to_row_major(&self, z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; z.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            x[i] = z[pos];
        }
        x
    }

    /// Dense permutation matrix `P` (for checks on small lattices).
    pub fn permutation_matrix(&self) -> DMatrix<f64> {
        let n = self.perm.len();
        let mut p = DMatrix::<f64>::zeros(n, n);
        for (i, &pos) in self.perm.iter().enumerate() {
            p[(pos, i)] = 1.0;
        }
        p
    }
}

/// Telescoping shell decomposition of the lattice.
pub fn shells(spec: LatticeSpec) -> ShellDecomposition {
    let (n, m) = (spec.n_rows(), spec.n_cols());
    let tau = n.min(m).div_ceil(2);
    let mut shells = Vec::with_capacity(tau + 1);
    shells.push(spec.boundary_nodes());
    for k in 1..=tau {
        // T_k = [k, N+1-k] x [k, M+1-k] is nonempty for k <= tau.
        shells.push(ring(k, n + 1 - k, k, m + 1 - k));
    }
    let mut perm = vec![0; spec.interior_len()];
    let mut order = Vec::with_capacity(spec.interior_len());
    let mut starts = Vec::with_capacity(tau);
    for shell in &shells[1..] {
        starts.push(order.len());
        for &(r, c) in shell {
            let idx = spec.interior_index(r, c);
            perm[idx] = order.len();
            order.push(idx);
        }
    }
    ShellDecomposition { spec, tau, shells, perm, order, starts }
}

/// `P A Pᵀ` in block form,
///
/// ```text
/// [ M0_1   -M+_1                  ]
/// [ -M-_2   M0_2   -M+_2          ]
/// [          ...    ...     ...   ]
/// [                -M-_tau  M0_tau]
/// ```
///
/// with `P A_b = [M-_1; 0; ...; 0]`. The off-diagonal blocks are stored with
/// the sign flipped relative to `P A Pᵀ`, so that `M-_k` carries `+β` like
/// `A_b` does and `M+_k = (M-_{k+1})ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    tau: usize,
    diag: Vec<DMatrix<f64>>,
    lower: Vec<DMatrix<f64>>,
    upper: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    pub fn tau(&self) -> usize {
        self.tau
    }

    /// `M0_k`, `k = 1..=tau`.
    pub fn diag(&self, k: usize) -> &DMatrix<f64> {
        &self.diag[k - 1]
    }

    /// `M-_k` (`M^z_k x M^z_{k-1}`), `k = 1..=tau`.
    pub fn lower(&self, k: usize) -> &DMatrix<f64> {
        &self.lower[k - 1]
    }

    /// `M+_k` (`M^z_k x M^z_{k+1}`), `k = 1..tau`.
    pub fn upper(&self, k: usize) -> &DMatrix<f64> {
        &self.upper[k - 1]
    }

    /// Reassembles `P A Pᵀ`.
    pub fn assemble(&self) -> DMatrix<f64> {
        let sizes: Vec<usize> = self.diag.iter().map(|d| d.nrows()).collect();
        let n: usize = sizes.iter().sum();
        let mut out = DMatrix::<f64>::zeros(n, n);
        let mut start = 0;
        for k in 0..self.tau {
            let sk = sizes[k];
            out.view_mut((start, start), (sk, sk)).copy_from(&self.diag[k]);
            if k + 1 < self.tau {
                let sn = sizes[k + 1];
                out.view_mut((start, start + sk), (sk, sn)).copy_from(&(-&self.upper[k]));
                out.view_mut((start + sk, start), (sn, sk)).copy_from(&(-&self.lower[k + 1]));
            }
            start += sk;
        }
        out
    }

    /// Reassembles `P A_b`.
    pub fn assemble_boundary_coupling(&self) -> DMatrix<f64> {
        let n: usize = self.diag.iter().map(|d| d.nrows()).sum();
        let m1 = &self.lower[0];
        let mut out = DMatrix::<f64>::zeros(n, m1.ncols());
        out.view_mut((0, 0), (m1.nrows(), m1.ncols())).copy_from(m1);
        out
    }
}

/// Extracts the shell blocks of `P A Pᵀ` and `P A_b`, checking that nothing
/// couples shells more than one step apart.
pub fn permute_system(sys: &PrecisionSystem, dec: &ShellDecomposition) -> Result<BlockTridiagonal> {
    let spec = sys.spec;
    if dec.spec != spec {
        return Err(Error::Dimension("shell decomposition built for a different lattice".into()));
    }
    let n = spec.interior_len();
    if sys.a.nrows() != n || sys.a.ncols() != n || sys.a_b.nrows() != n || sys.a_b.ncols() != spec.boundary_len()
    {
        return Err(Error::Dimension("precision system does not match its lattice".into()));
    }
    let shell_of = dec.shell_of_interior();

    // Envelope: A[p, q] may be nonzero only for |shell(p) - shell(q)| <= 1.
    for p in 0..n {
        let sp = shell_of[p];
        for (q, &sq) in shell_of.iter().enumerate() {
            let v = sys.a[(p, q)];
            if v != 0.0 && sq.abs_diff(sp) > 1 {
                return Err(Error::Envelope { row: dec.perm[p], col: dec.perm[q], value: v });
            }
        }
        if sp > 1 {
            for b in 0..sys.a_b.ncols() {
                let v = sys.a_b[(p, b)];
                if v != 0.0 {
                    return Err(Error::Envelope { row: dec.perm[p], col: b, value: v });
                }
            }
        }
    }

    let tau = dec.tau;
    let block = |k: usize, l: usize| -> DMatrix<f64> {
        let (rk, rl) = (&dec.shells[k], &dec.shells[l]);
        DMatrix::from_fn(rk.len(), rl.len(), |i, j| {
            let p = spec.interior_index(rk[i].0, rk[i].1);
            let q = spec.interior_index(rl[j].0, rl[j].1);
            sys.a[(p, q)]
        })
    };

    let mut diag = Vec::with_capacity(tau);
    let mut lower = Vec::with_capacity(tau);
    let mut upper = Vec::with_capacity(tau.saturating_sub(1));
    let s1 = &dec.shells[1];
    lower.push(DMatrix::from_fn(s1.len(), spec.boundary_len(), |i, b| {
        sys.a_b[(spec.interior_index(s1[i].0, s1[i].1), b)]
    }));
    for k in 1..=tau {
        diag.push(block(k, k));
        if k >= 2 {
            lower.push(-block(k, k - 1));
        }
        if k < tau {
            upper.push(-block(k, k + 1));
        }
    }
    for k in 1..tau {
        if upper[k - 1] != lower[k].transpose() {
            return Err(Error::Invalid(format!("M+_{k} differs from (M-_{})ᵀ: A is not symmetric", k + 1)));
        }
    }
    Ok(BlockTridiagonal { tau, diag, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_precision, NeighborhoodCoefficients};

    fn spec(n: usize, m: usize) -> LatticeSpec {
        LatticeSpec::new(n, m).unwrap()
    }

    #[test]
    fn shell_sizes() {
        assert_eq!(shells(spec(3, 3)).sizes(), vec![16, 8, 1]);
        assert_eq!(shells(spec(2, 3)).sizes(), vec![14, 6]);
        assert_eq!(shells(spec(5, 5)).sizes(), vec![24, 16, 8, 1]);
        assert_eq!(shells(spec(1, 1)).sizes(), vec![8, 1]);
        assert_eq!(shells(spec(3, 5)).sizes(), vec![20, 12, 3]);
        assert_eq!(shells(spec(3, 3)).tau(), 2);
    }

    #[test]
    fn clockwise_from_top_left() {
        let d = shells(spec(2, 3));
        assert_eq!(d.shell(1), &[(1, 1), (1, 2), (1, 3), (2, 3), (2, 2), (2, 1)]);
        let d = shells(spec(5, 5));
        assert_eq!(d.shell(3), &[(3, 3)]);
        assert_eq!(&d.shell(2)[..4], &[(2, 2), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(*d.shell(2).last().unwrap(), (3, 2));
    }

    #[test]
    fn degenerate_shells_run_left_right_then_down() {
        let d = shells(spec(3, 6));
        assert_eq!(d.shell(2), &[(2, 2), (2, 3), (2, 4), (2, 5)]);
        let d = shells(spec(5, 3));
        assert_eq!(d.shell(2), &[(2, 2), (3, 2), (4, 2)]);
        let d = shells(spec(1, 4));
        assert_eq!(d.shell(1), &[(1, 1), (1, 2), (1, 3), (1, 4)]);
    }

    #[test]
    fn vector_reordering_round_trip() {
        let d = shells(spec(4, 5));
        let x: Vec<f64> = (0..20).map(|v| v as f64).collect();
        let z = d.to_shell_order(&x);
        assert_eq!(d.to_row_major(&z), x);
        let p = d.permutation_matrix();
        let pz = &p * nalgebra::DVector::from_vec(x.clone());
        assert_eq!(pz.as_slice(), z.as_slice());
    }

    fn model(n: usize, m: usize, alpha: f64, beta: f64) -> PrecisionSystem {
        let s = spec(n, m);
        let c = NeighborhoodCoefficients::isotropic(s, alpha, beta).unwrap();
        build_precision(s, &c, DMatrix::identity(s.boundary_len(), s.boundary_len())).unwrap()
    }

    #[test]
    fn identity_blocks() {
        let sys = model(4, 4, 1.0, 0.0);
        let d = shells(sys.spec);
        let bt = permute_system(&sys, &d).unwrap();
        for k in 1..=bt.tau() {
            assert_eq!(bt.diag(k), &DMatrix::identity(d.size(k), d.size(k)));
            assert!(bt.lower(k).iter().all(|v| *v == 0.0));
            if k < bt.tau() {
                assert!(bt.upper(k).iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn center_node_couples_to_whole_ring() {
        let sys = model(3, 3, 9.0, 1.0);
        let d = shells(sys.spec);
        let bt = permute_system(&sys, &d).unwrap();
        assert_eq!(bt.diag(2), &DMatrix::from_element(1, 1, 9.0));
        // stored with the sign flipped: P A Pᵀ holds -1 in this off-diagonal block
        assert_eq!(bt.lower(2), &DMatrix::from_element(1, 8, 1.0));
        assert_eq!(bt.upper(1), &bt.lower(2).transpose());
        let pa = bt.assemble();
        let p = d.permutation_matrix();
        assert_eq!(pa, &p * &sys.a * p.transpose());
        assert_eq!(bt.assemble_boundary_coupling(), &p * &sys.a_b);
    }

    #[test]
    fn wide_neighborhood_is_rejected() {
        let mut sys = model(5, 5, 9.0, 1.0);
        let s = sys.spec;
        let (p, q) = (s.interior_index(1, 1), s.interior_index(3, 3));
        sys.a[(p, q)] = -0.5;
        sys.a[(q, p)] = -0.5;
        assert!(matches!(permute_system(&sys, &shells(s)), Err(Error::Envelope { .. })));
    }
}
