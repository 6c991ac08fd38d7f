//! Image denoising with the shell-chain smoother: every pixel is one noisy
//! unit-gain observation of the interior node it sits on.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimation::{estimate, ObservationModel};
use crate::io::GrayImage;
use crate::shells::ShellDecomposition;
use crate::telescoping::TelescopingModel;

/// Posterior mean of the interior given `values` (row-major) observed with
/// unit gain and variance `noise_var`. The data are centred on their mean
/// first and the mean is added back afterwards.
pub fn smooth_field(
    model: &TelescopingModel,
    dec: &ShellDecomposition,
    values: &[f64],
    noise_var: f64,
) -> Result<Vec<f64>> {
    let spec = dec.spec();
    if values.len() != spec.interior_len() {
        return Err(Error::Dimension(format!(
            "field has {} values, model expects {}×{}",
            values.len(),
            spec.n_rows(),
            spec.n_cols()
        )));
    }
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::Invalid(format!("noise variance must be positive, got {noise_var}")));
    }
    let offset = mean(values);
    let centred: Vec<f64> = values.iter().map(|v| v - offset).collect();
    let obs = ObservationModel::full(spec, 1.0, noise_var)?;
    let post = estimate(model, dec, &obs, &centred)?;
    let grid = post.interior_mean(dec);
    let m = spec.n_cols();
    Ok((0..values.len()).map(|p| grid[(p / m, p % m)] + offset).collect())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseReport {
    pub rows: usize,
    pub cols: usize,
    pub noise_var: f64,
    /// Mean intensity removed before smoothing.
    pub offset: f64,
    pub mse_input: Option<f64>,
    pub mse_output: Option<f64>,
}

impl DenoiseReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rows={}", self.rows);
        let _ = writeln!(out, "cols={}", self.cols);
        let _ = writeln!(out, "noise_var={}", self.noise_var);
        let _ = writeln!(out, "offset={}", self.offset);
        if let (Some(i), Some(o)) = (self.mse_input, self.mse_output) {
            let _ = writeln!(out, "mse_input={i}");
            let _ = writeln!(out, "mse_output={o}");
        }
        out
    }
}

/// Smooths an `N×M` image and clamps the result to 8-bit gray levels. With a
/// clean `reference` the report carries input and output MSE against it.
pub fn denoise_image(
    model: &TelescopingModel,
    dec: &ShellDecomposition,
    image: &GrayImage,
    noise_var: f64,
    reference: Option<&GrayImage>,
) -> Result<(GrayImage, DenoiseReport)> {
    let spec = dec.spec();
    let (n, m) = (spec.n_rows(), spec.n_cols());
    if (image.rows, image.cols) != (n, m) {
        return Err(Error::Dimension(format!(
            "image is {}×{} but the model expects {n}×{m}",
            image.rows, image.cols
        )));
    }
    if let Some(r) = reference {
        if (r.rows, r.cols) != (n, m) {
            return Err(Error::Dimension(format!(
                "reference image is {}×{} but the model expects {n}×{m}",
                r.rows, r.cols
            )));
        }
    }
    let input = image.intensities();
    let smoothed = smooth_field(model, dec, &input, noise_var)?;
    let output = GrayImage::from_intensities(n, m, &smoothed)?;
    let clean = reference.map(GrayImage::intensities);
    let report = DenoiseReport {
        rows: n,
        cols: m,
        noise_var,
        offset: mean(&input),
        mse_input: clean.as_ref().map(|c| mse(&input, c)),
        mse_output: clean.as_ref().map(|c| mse(&output.intensities(), c)),
    };
    Ok((output, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::direct_mmse;
    use crate::lattice::{build_precision, LatticeSpec, NeighborhoodCoefficients};
    use crate::sampling::{sample_field, NormalStream};
    use crate::shells::{permute_system, shells};
    use crate::telescoping::factorize;
    use nalgebra::DMatrix;

    fn setup(n: usize, m: usize) -> (crate::lattice::PrecisionSystem, TelescopingModel, ShellDecomposition) {
        let spec = LatticeSpec::new(n, m).unwrap();
        let coeffs = NeighborhoodCoefficients::isotropic(spec, 9.0, 1.0).unwrap();
        let sys = build_precision(spec, &coeffs, DMatrix::identity(spec.boundary_len(), spec.boundary_len())).unwrap();
        let dec = shells(spec);
        let model = factorize(&permute_system(&sys, &dec).unwrap(), &sys.boundary_cov).unwrap();
        (sys, model, dec)
    }

    fn test_image(n: usize, m: usize) -> GrayImage {
        let px = (0..n * m).map(|p| ((p * 37 + (p / m) * 11) % 200 + 20) as u16).collect();
        GrayImage::new(n, m, 255, px).unwrap()
    }

    #[test]
    fn tiny_noise_returns_the_input() {
        let (_, model, dec) = setup(6, 5);
        let img = test_image(6, 5);
        let (out, report) = denoise_image(&model, &dec, &img, 1e-6, Some(&img)).unwrap();
        for (a, b) in out.pixels.iter().zip(&img.pixels) {
            assert!((f64::from(*a) - f64::from(*b)).abs() <= 0.5);
        }
        assert_eq!(report.mse_input, Some(0.0));
    }

    #[test]
    fn huge_noise_returns_the_mean() {
        let (_, model, dec) = setup(6, 5);
        let img = test_image(6, 5);
        let smoothed = smooth_field(&model, &dec, &img.intensities(), 1e12).unwrap();
        let avg = mean(&img.intensities());
        assert!(smoothed.iter().all(|v| (v - avg).abs() <= 0.5));
    }

    #[test]
    fn size_mismatch_names_the_expected_shape() {
        let (_, model, dec) = setup(6, 5);
        let err = denoise_image(&model, &dec, &test_image(5, 6), 1.0, None).unwrap_err();
        assert!(err.to_string().contains("6×5"), "{err}");
        assert!(smooth_field(&model, &dec, &[0.0; 30], 0.0).is_err());
    }

    #[test]
    fn synthetic_field_gets_closer_to_truth() {
        let (sys, model, dec) = setup(16, 16);
        let truth = sample_field(&model, &dec, 21).unwrap().interior_row_major();
        let mut noise = NormalStream::new(22);
        let noisy: Vec<f64> = truth.iter().map(|v| v + 0.5 * noise.next_normal()).collect();
        let smoothed = smooth_field(&model, &dec, &noisy, 0.25).unwrap();

        let offset = mean(&noisy);
        let centred: Vec<f64> = noisy.iter().map(|v| v - offset).collect();
        let obs = ObservationModel::full(sys.spec, 1.0, 0.25).unwrap();
        let dense: Vec<f64> = direct_mmse(&sys, &obs, &centred).unwrap().mean.iter().map(|v| v + offset).collect();

        let (observed, posterior) = (mse(&noisy, &truth), mse(&smoothed, &truth));
        assert!(posterior < observed, "{posterior} vs {observed}");
        assert!((posterior - mse(&dense, &truth)).abs() < 1e-6);
    }
}
