//! Kalman filtering and RTS smoothing over the shell chain, with a dense
//! normal-equations solve as the reference answer.
//!
//! The chain state at step `k` is `z_k`. The filter starts at the boundary
//! (`z_0 ~ N(0, Σ_b)`) and moves inward; the smoother runs back out. All
//! observations on one shell are absorbed in a single block update.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{joint_covariance, stacked_covariance, LatticeSpec, PrecisionSystem};
use crate::linalg;
use crate::shells::ShellDecomposition;
use crate::telescoping::TelescopingModel;

/// Gain and noise variance of one pointwise observation `y = g x + n`, `n ~ N(0, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensor {
    pub gain: f64,
    pub variance: f64,
}

/// Which nodes are observed, and how. The boundary is unobserved unless
/// sensors are placed on it explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    spec: LatticeSpec,
    interior: Vec<Option<Sensor>>,
    boundary: Vec<Option<Sensor>>,
}

impl ObservationModel {
    pub fn none(spec: LatticeSpec) -> Self {
        ObservationModel {
            spec,
            interior: vec![None; spec.interior_len()],
            boundary: vec![None; spec.boundary_len()],
        }
    }

    /// Every interior node observed with the same sensor.
    pub fn full(spec: LatticeSpec, gain: f64, variance: f64) -> Result<Self> {
        Self::from_mask(spec, &vec![true; spec.interior_len()], gain, variance)
    }

    /// Interior nodes flagged in the row-major `mask` observed with one sensor.
    pub fn from_mask(spec: LatticeSpec, mask: &[bool], gain: f64, variance: f64) -> Result<Self> {
        if mask.len() != spec.interior_len() {
            return Err(Error::Dimension(format!(
                "mask has {} entries, lattice has {}",
                mask.len(),
                spec.interior_len()
            )));
        }
        let mut obs = Self::none(spec);
        for (p, &on) in mask.iter().enumerate() {
            if on {
                obs.observe_index(p, gain, variance)?;
            }
        }
        Ok(obs)
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    fn sensor(gain: f64, variance: f64) -> Result<Sensor> {
        if !(variance > 0.0) || !variance.is_finite() || !gain.is_finite() {
            return Err(Error::Invalid(format!(
                "observation needs finite gain and positive variance, got g={gain}, r={variance}"
            )));
        }
        Ok(Sensor { gain, variance })
    }

    /// Observe interior node at row-major `index`.
    pub fn observe_index(&mut self, index: usize, gain: f64, variance: f64) -> Result<()> {
        if index >= self.interior.len() {
            return Err(Error::Dimension(format!("interior index {index} out of range")));
        }
        self.interior[index] = Some(Self::sensor(gain, variance)?);
        Ok(())
    }

    /// Observe node `(row, col)` of the full frame; frame nodes go to the boundary.
    pub fn observe(&mut self, row: usize, col: usize, gain: f64, variance: f64) -> Result<()> {
        if self.spec.is_interior(row as isize, col as isize) {
            self.observe_index(self.spec.interior_index(row, col), gain, variance)
        } else if let Some(b) = self.spec.boundary_index(row, col) {
            self.boundary[b] = Some(Self::sensor(gain, variance)?);
            Ok(())
        } else {
            Err(Error::Invalid(format!("node ({row}, {col}) is outside the lattice")))
        }
    }

    pub fn interior_sensor(&self, index: usize) -> Option<Sensor> {
        self.interior[index]
    }

    pub fn boundary_sensor(&self, index: usize) -> Option<Sensor> {
        self.boundary[index]
    }

    pub fn observes_boundary(&self) -> bool {
        self.boundary.iter().any(Option::is_some)
    }

    pub fn observed_count(&self) -> usize {
        self.interior.iter().chain(&self.boundary).filter(|s| s.is_some()).count()
    }

    /// Sensors of shell `k` as `(position in shell, sensor)`.
    fn shell_sensors(&self, dec: &ShellDecomposition, k: usize) -> Vec<(usize, Sensor)> {
        dec.shell(k)
            .iter()
            .enumerate()
            .filter_map(|(pos, &(r, c))| {
                let s = if k == 0 {
                    self.boundary[pos]
                } else {
                    self.interior[self.spec.interior_index(r, c)]
                };
                s.map(|s| (pos, s))
            })
            .collect()
    }
}

/// Splits a measurement vector into interior (row-major) and boundary parts.
/// `y` holds `N*M` interior values optionally followed by the boundary values.
fn split_values(spec: LatticeSpec, y: &[f64]) -> Result<(&[f64], Option<&[f64]>)> {
    let n = spec.interior_len();
    if y.len() == n {
        Ok((y, None))
    } else if y.len() == n + spec.boundary_len() {
        Ok((&y[..n], Some(&y[n..])))
    } else {
        Err(Error::Dimension(format!(
            "expected {n} or {} measurement values, got {}",
            n + spec.boundary_len(),
            y.len()
        )))
    }
}

/// Forward pass: predicted and filtered moments for `k = 0..=tau`.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
}

/// Filtered and smoothed moments of every shell.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub filter: FilterOutput,
    pub smoothed_means: Vec<DVector<f64>>,
    pub smoothed_covs: Vec<DMatrix<f64>>,
}

impl EstimationResult {
    /// Smoothed interior means on the `N x M` grid.
    pub fn interior_mean(&self, dec: &ShellDecomposition) -> DMatrix<f64> {
        self.interior_grid(dec, |k| self.smoothed_means[k].as_slice().to_vec())
    }

    /// Smoothed per-node posterior variances on the `N x M` grid.
    pub fn interior_variance(&self, dec: &ShellDecomposition) -> DMatrix<f64> {
        self.interior_grid(dec, |k| self.smoothed_covs[k].diagonal().as_slice().to_vec())
    }

    fn interior_grid(&self, dec: &ShellDecomposition, per_shell: impl Fn(usize) -> Vec<f64>) -> DMatrix<f64> {
        let spec = dec.spec();
        let z: Vec<f64> = (1..=dec.tau()).flat_map(per_shell).collect();
        DMatrix::from_row_slice(spec.n_rows(), spec.n_cols(), &dec.to_row_major(&z))
    }
}

/// Forward Kalman sweep from the boundary inward. Covariances use the Joseph
/// form.
pub fn kalman_filter(
    model: &TelescopingModel,
    dec: &ShellDecomposition,
    obs: &ObservationModel,
    y: &[f64],
) -> Result<FilterOutput> {
    let spec = dec.spec();
    if obs.spec != spec || model.sizes() != dec.sizes() {
        return Err(Error::Dimension("model, shells and observations disagree on the lattice".into()));
    }
    let (y_int, y_bnd) = split_values(spec, y)?;
    if obs.observes_boundary() && y_bnd.is_none() {
        return Err(Error::Dimension("boundary is observed but no boundary values were given".into()));
    }

    let tau = model.tau();
    let mut out = FilterOutput {
        predicted_means: Vec::with_capacity(tau + 1),
        predicted_covs: Vec::with_capacity(tau + 1),
        filtered_means: Vec::with_capacity(tau + 1),
        filtered_covs: Vec::with_capacity(tau + 1),
    };
    let mut mean = DVector::zeros(dec.size(0));
    let mut cov = model.boundary_cov().clone();
    for k in 0..=tau {
        if k > 0 {
            let f = model.f(k);
            mean = f * &out.filtered_means[k - 1];
            cov = linalg::symmetrize(&(f * &out.filtered_covs[k - 1] * f.transpose() + model.q(k)));
        }
        out.predicted_means.push(mean.clone());
        out.predicted_covs.push(cov.clone());

        let sensors = obs.shell_sensors(dec, k);
        if !sensors.is_empty() {
            let values: Vec<f64> = sensors
                .iter()
                .map(|&(pos, _)| {
                    if k == 0 {
                        y_bnd.expect("checked above")[pos]
                    } else {
                        let (r, c) = dec.shell(k)[pos];
                        y_int[spec.interior_index(r, c)]
                    }
                })
                .collect();
            let (m_new, c_new) = update(&mean, &cov, &sensors, &values, k)?;
            mean = m_new;
            cov = c_new;
        }
        out.filtered_means.push(mean.clone());
        out.filtered_covs.push(cov.clone());
    }
    Ok(out)
}

fn update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    sensors: &[(usize, Sensor)],
    values: &[f64],
    stage: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = mean.len();
    let m = sensors.len();
    let mut h = DMatrix::<f64>::zeros(m, dim);
    let mut r = DMatrix::<f64>::zeros(m, m);
    for (i, &(pos, s)) in sensors.iter().enumerate() {
        h[(i, pos)] = s.gain;
        r[(i, i)] = s.variance;
    }
    let y = DVector::from_column_slice(values);
    let ph_t = cov * h.transpose();
    let innovation_cov = linalg::symmetrize(&(&h * &ph_t + &r));
    let chol = linalg::spd_factor(&innovation_cov)
        .map_err(|_| Error::Singular(format!("innovation covariance at shell {stage} is not positive definite")))?;
    let gain = chol.solve(&ph_t.transpose()).transpose();
    let new_mean = mean + &gain * (y - &h * mean);
    let i_kh = DMatrix::<f64>::identity(dim, dim) - &gain * &h;
    let new_cov = &i_kh * cov * i_kh.transpose() + &gain * r * gain.transpose();
    Ok((new_mean, linalg::symmetrize(&new_cov)))
}

/// Backward RTS sweep from the innermost shell out to the boundary.
pub fn rts_smoother(model: &TelescopingModel, filtered: FilterOutput) -> Result<EstimationResult> {
    let tau = model.tau();
    if filtered.filtered_means.len() != tau + 1 {
        return Err(Error::Dimension("filter output does not match the chain length".into()));
    }
    let mut means = filtered.filtered_means.clone();
    let mut covs = filtered.filtered_covs.clone();
    for k in (0..tau).rev() {
        let f = model.f(k + 1);
        let pred = &filtered.predicted_covs[k + 1];
        let chol = linalg::spd_factor(pred)
            .map_err(|_| Error::Singular(format!("predicted covariance at shell {} is singular", k + 1)))?;
        let filt_cov = &filtered.filtered_covs[k];
        // J = Σ_{k|k} Fᵀ Σ_{k+1|k}⁻¹
        let j = chol.solve(&(f * filt_cov)).transpose();
        let mean = &filtered.filtered_means[k] + &j * (&means[k + 1] - &filtered.predicted_means[k + 1]);
        let cov = filt_cov + &j * (&covs[k + 1] - pred) * j.transpose();
        means[k] = mean;
        covs[k] = linalg::symmetrize(&cov);
    }
    Ok(EstimationResult { filter: filtered, smoothed_means: means, smoothed_covs: covs })
}

/// Filter followed by smoother.
pub fn estimate(
    model: &TelescopingModel,
    dec: &ShellDecomposition,
    obs: &ObservationModel,
    y: &[f64],
) -> Result<EstimationResult> {
    rts_smoother(model, kalman_filter(model, dec, obs, y)?)
}

/// Dense posterior of the interior.
#[derive(Debug, Clone)]
pub struct DirectMmse {
    /// Row-major interior posterior mean.
    pub mean: DVector<f64>,
    /// Interior posterior covariance.
    pub covariance: DMatrix<f64>,
}

/// Solves `(Σ⁻¹ + Hᵀ R⁻¹ H) x̂ = Hᵀ R⁻¹ y` with `Σ = Cov(x)`. When the
/// boundary is observed, `Σ` is the covariance of `[x; x_b]` and only the
/// interior part is returned.
pub fn direct_mmse(sys: &PrecisionSystem, obs: &ObservationModel, y: &[f64]) -> Result<DirectMmse> {
    let spec = sys.spec;
    if obs.spec != spec {
        return Err(Error::Dimension("observations built for a different lattice".into()));
    }
    let (y_int, y_bnd) = split_values(spec, y)?;
    let n = spec.interior_len();
    let with_boundary = obs.observes_boundary();
    let prior = if with_boundary {
        if y_bnd.is_none() {
            return Err(Error::Dimension("boundary is observed but no boundary values were given".into()));
        }
        stacked_covariance(sys)?
    } else {
        joint_covariance(sys)?.0
    };
    let dim = prior.nrows();
    let mut info = linalg::spd_inverse(&prior)
        .map_err(|_| Error::Singular("prior covariance is singular".into()))?;
    let mut rhs = DVector::<f64>::zeros(dim);
    let sensors = obs
        .interior
        .iter()
        .enumerate()
        .map(|(i, s)| (i, *s, y_int[i]))
        .chain(obs.boundary.iter().enumerate().filter(|_| with_boundary).map(|(b, s)| {
            (n + b, *s, y_bnd.map_or(0.0, |v| v[b]))
        }));
    for (i, s, value) in sensors {
        if let Some(s) = s {
            info[(i, i)] += s.gain * s.gain / s.variance;
            rhs[i] += s.gain * value / s.variance;
        }
    }
    let chol = linalg::spd_factor(&info).map_err(|_| Error::Singular("posterior precision".into()))?;
    let mean = chol.solve(&rhs);
    let covariance = linalg::symmetrize(&chol.inverse());
    Ok(DirectMmse {
        mean: mean.rows(0, n).into_owned(),
        covariance: covariance.view((0, 0), (n, n)).into_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_precision, NeighborhoodCoefficients};
    use crate::sampling::NormalStream;
    use crate::shells::{permute_system, shells};
    use crate::telescoping::factorize;

    struct Fixture {
        sys: PrecisionSystem,
        dec: ShellDecomposition,
        model: TelescopingModel,
    }

    fn fixture(n: usize, m: usize, alpha: f64, beta: f64) -> Fixture {
        let s = LatticeSpec::new(n, m).unwrap();
        let c = NeighborhoodCoefficients::isotropic(s, alpha, beta).unwrap();
        let nb = s.boundary_len();
        let sys = build_precision(s, &c, DMatrix::identity(nb, nb)).unwrap();
        let dec = shells(s);
        let model = factorize(&permute_system(&sys, &dec).unwrap(), &sys.boundary_cov).unwrap();
        Fixture { sys, dec, model }
    }

    fn seeded_mask(len: usize, frac: f64, seed: u64) -> Vec<bool> {
        let mut s = NormalStream::new(seed);
        (0..len).map(|_| s.uniform() <= frac).collect()
    }

    #[test]
    fn no_observations_returns_prior() {
        let fx = fixture(4, 4, 9.0, 1.0);
        let obs = ObservationModel::none(fx.sys.spec);
        let out = kalman_filter(&fx.model, &fx.dec, &obs, &[0.0; 16]).unwrap();
        let implied = fx.model.implied_covariance();
        let mut start = 0;
        for k in 0..=fx.model.tau() {
            let sz = fx.dec.size(k);
            assert!(out.filtered_means[k].iter().all(|v| *v == 0.0));
            let prior = implied.view((start, start), (sz, sz));
            assert!((&out.filtered_covs[k] - prior).norm() < 1e-12);
            start += sz;
        }
        let res = rts_smoother(&fx.model, out).unwrap();
        assert!(res.smoothed_means.iter().all(|m| m.iter().all(|v| *v == 0.0)));
        let direct = direct_mmse(&fx.sys, &obs, &[0.0; 16]).unwrap();
        assert!(direct.mean.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_conjugate_update() {
        let fx = fixture(3, 3, 1.0, 0.0);
        let obs = ObservationModel::full(fx.sys.spec, 1.0, 1.0).unwrap();
        let y: Vec<f64> = (0..9).map(|i| i as f64 - 4.0).collect();
        let res = estimate(&fx.model, &fx.dec, &obs, &y).unwrap();
        let mean = res.interior_mean(&fx.dec);
        let var = res.interior_variance(&fx.dec);
        for (i, yi) in y.iter().enumerate() {
            let (r, c) = (i / 3, i % 3);
            assert!((mean[(r, c)] - yi / 2.0).abs() < 1e-14);
            assert!((var[(r, c)] - 0.5).abs() < 1e-14);
        }
        // decoupled chain: smoothing adds nothing
        for k in 0..res.filter.filtered_means.len() {
            assert!((&res.smoothed_means[k] - &res.filter.filtered_means[k]).norm() < 1e-15);
        }
        let direct = direct_mmse(&fx.sys, &obs, &y).unwrap();
        for (d, yi) in direct.mean.iter().zip(&y) {
            assert!((d - yi / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn chain_matches_dense_posterior() {
        let fx = fixture(5, 5, 9.0, 1.0);
        let mask = seeded_mask(25, 0.6, 3);
        let obs = ObservationModel::from_mask(fx.sys.spec, &mask, 1.0, 0.25).unwrap();
        let mut s = NormalStream::new(11);
        let y: Vec<f64> = (0..25).map(|_| s.next_normal()).collect();
        let res = estimate(&fx.model, &fx.dec, &obs, &y).unwrap();
        let direct = direct_mmse(&fx.sys, &obs, &y).unwrap();
        let mean = res.interior_mean(&fx.dec);
        let var = res.interior_variance(&fx.dec);
        for i in 0..25 {
            let (r, c) = (i / 5, i % 5);
            assert!((mean[(r, c)] - direct.mean[i]).abs() < 1e-8);
            assert!((var[(r, c)] - direct.covariance[(i, i)]).abs() < 1e-7);
        }
        for k in 0..res.smoothed_covs.len() {
            assert!(linalg::asymmetry(&res.smoothed_covs[k]) < 1e-10);
            assert!(linalg::asymmetry(&res.filter.filtered_covs[k]) < 1e-10);
            for i in 0..res.smoothed_covs[k].nrows() {
                assert!(res.smoothed_covs[k][(i, i)] <= res.filter.filtered_covs[k][(i, i)] + 1e-10);
            }
        }
    }

    #[test]
    fn filtered_estimates_use_data_up_to_shell() {
        let fx = fixture(5, 5, 9.0, 1.0);
        let mask = seeded_mask(25, 0.6, 5);
        let obs = ObservationModel::from_mask(fx.sys.spec, &mask, 1.0, 0.25).unwrap();
        let mut s = NormalStream::new(2);
        let y: Vec<f64> = (0..25).map(|_| s.next_normal()).collect();
        let out = kalman_filter(&fx.model, &fx.dec, &obs, &y).unwrap();
        let shell_of = fx.dec.shell_of_interior();
        for k in 1..=fx.model.tau() {
            let partial: Vec<bool> = (0..25).map(|i| mask[i] && shell_of[i] <= k).collect();
            let po = ObservationModel::from_mask(fx.sys.spec, &partial, 1.0, 0.25).unwrap();
            let direct = direct_mmse(&fx.sys, &po, &y).unwrap();
            for (pos, &(r, c)) in fx.dec.shell(k).iter().enumerate() {
                let i = fx.sys.spec.interior_index(r, c);
                assert!((out.filtered_means[k][pos] - direct.mean[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn observing_the_boundary() {
        let fx = fixture(4, 3, 9.0, 1.0);
        let spec = fx.sys.spec;
        let mut obs = ObservationModel::from_mask(spec, &seeded_mask(12, 0.5, 8), 1.0, 0.3).unwrap();
        obs.observe(0, 0, 1.0, 0.2).unwrap();
        obs.observe(2, 4, 0.5, 0.1).unwrap();
        obs.observe(5, 2, 2.0, 0.4).unwrap();
        let mut s = NormalStream::new(4);
        let y: Vec<f64> = (0..12 + spec.boundary_len()).map(|_| s.next_normal()).collect();
        let res = estimate(&fx.model, &fx.dec, &obs, &y).unwrap();
        let direct = direct_mmse(&fx.sys, &obs, &y).unwrap();
        let mean = res.interior_mean(&fx.dec);
        let var = res.interior_variance(&fx.dec);
        for i in 0..12 {
            let (r, c) = (i / 3, i % 3);
            assert!((mean[(r, c)] - direct.mean[i]).abs() < 1e-8);
            assert!((var[(r, c)] - direct.covariance[(i, i)]).abs() < 1e-7);
        }
        // boundary values are required once the boundary is observed
        assert!(kalman_filter(&fx.model, &fx.dec, &obs, &y[..12]).is_err());
    }

    #[test]
    fn extra_observation_never_increases_variance() {
        let fx = fixture(4, 5, 9.0, 1.0);
        let spec = fx.sys.spec;
        let y = vec![0.3; 20];
        let mut mask = seeded_mask(20, 0.3, 1);
        let mut prev = estimate(&fx.model, &fx.dec, &ObservationModel::from_mask(spec, &mask, 1.0, 0.5).unwrap(), &y)
            .unwrap()
            .interior_variance(&fx.dec);
        for i in 0..20 {
            if mask[i] {
                continue;
            }
            mask[i] = true;
            let obs = ObservationModel::from_mask(spec, &mask, 1.0, 0.5).unwrap();
            let var = estimate(&fx.model, &fx.dec, &obs, &y).unwrap().interior_variance(&fx.dec);
            for (a, b) in var.iter().zip(prev.iter()) {
                assert!(*a <= *b + 1e-12);
            }
            prev = var;
        }
    }

    #[test]
    fn invalid_sensors_and_shapes() {
        let spec = LatticeSpec::new(2, 2).unwrap();
        let mut obs = ObservationModel::none(spec);
        assert!(obs.observe(1, 1, 1.0, 0.0).is_err());
        assert!(obs.observe(7, 7, 1.0, 1.0).is_err());
        assert!(ObservationModel::from_mask(spec, &[true], 1.0, 1.0).is_err());
        let fx = fixture(2, 2, 9.0, 1.0);
        assert!(kalman_filter(&fx.model, &fx.dec, &obs, &[0.0; 3]).is_err());
    }
}
