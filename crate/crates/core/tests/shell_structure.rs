use gmrf_telescope::sampling::{MomentAccumulator, Sampler};
use gmrf_telescope::{
    build_precision, factorize, permute_system, shells, LatticeSpec, NeighborhoodCoefficients,
};
use nalgebra::{DMatrix, DVector};

/// Nodes two shells apart never touch, for every lattice up to 64 × 64.
#[test]
fn shells_separate_under_second_order_neighbourhoods() {
    for n in 1..=64usize {
        for m in 1..=64usize {
            let spec = LatticeSpec::new(n, m).unwrap();
            let dec = shells(spec);
            let total: usize = dec.sizes().iter().skip(1).sum();
            assert_eq!(total, n * m);
            // Shell index on the full frame: 0 on the boundary ring.
            let mut level = vec![usize::MAX; (n + 2) * (m + 2)];
            for k in 0..=dec.tau() {
                for &(r, c) in dec.shell(k) {
                    assert_eq!(level[r * (m + 2) + c], usize::MAX, "node ({r}, {c}) in two shells");
                    level[r * (m + 2) + c] = k;
                }
            }
            assert!(level.iter().all(|&k| k != usize::MAX));
            for r in 0..n + 2 {
                for c in 0..m + 2 {
                    let k = level[r * (m + 2) + c];
                    for dr in -1isize..=1 {
                        for dc in -1isize..=1 {
                            let (rr, cc) = (r as isize + dr, c as isize + dc);
                            if rr < 0 || cc < 0 || rr >= (n + 2) as isize || cc >= (m + 2) as isize {
                                continue;
                            }
                            let j = level[rr as usize * (m + 2) + cc as usize];
                            assert!(k.abs_diff(j) <= 1, "{n}x{m}: ({r},{c}) shell {k} touches shell {j}");
                        }
                    }
                }
            }
        }
    }
}

fn standardized_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

#[test]
fn white_noise_samples_look_gaussian() {
    let spec = LatticeSpec::new(2, 2).unwrap();
    let coeffs = NeighborhoodCoefficients::isotropic(spec, 1.0, 0.0).unwrap();
    let nb = spec.boundary_len();
    let sys = build_precision(spec, &coeffs, DMatrix::zeros(nb, nb)).unwrap();
    let dec = shells(spec);
    let model = factorize(&permute_system(&sys, &dec).unwrap(), &sys.boundary_cov).unwrap();
    let sampler = Sampler::new(&model, &dec).unwrap();
    let n = 200_000u64;
    let mut per_node: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n as usize)).collect();
    let mut acc = MomentAccumulator::new(4);
    for seed in 0..n {
        let x = sampler.sample(seed).interior_row_major();
        for (node, v) in x.iter().enumerate() {
            per_node[node].push(*v);
        }
        acc.push(&DVector::from_vec(x));
    }
    for values in &per_node {
        let (skew, kurt) = standardized_moments(values);
        assert!(skew.abs() < 0.05, "skew {skew}");
        assert!((kurt - 3.0).abs() < 0.1, "kurtosis {kurt}");
    }
    let cov = acc.covariance().unwrap();
    for i in 0..4 {
        assert!((cov[(i, i)] - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }
}
