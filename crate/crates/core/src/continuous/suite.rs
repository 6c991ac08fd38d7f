//! The full battery of continuous-index checks behind `verify`.

use super::bridge::{bb_covariance, bb_markov_residual, bb_predict, bb_ratio, bb_telescope_sample};
use super::isotropic::{
    c_lambda_isotropic, c_lambda_numeric, polar_distance, w_increment_moments, NoiseSpec,
    RadialCovariance, INCREMENT_TOL, JUMP_STEP, UPSILON_PRIME_STEP,
};
use super::whittle::{whittle_upsilon, whittle_upsilon_prime, whittle_upsilon_with_tol, DEFAULT_TOL};
use crate::sampling::NormalStream;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Achieved error; compared against `tolerance` with `<`, or `≤` for exact checks.
    pub error: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub settings: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, error: f64, tolerance: f64) {
        let passed = error.is_finite() && error < tolerance;
        self.checks.push(Check { name: name.to_owned(), passed, error, tolerance });
    }

    fn push_exact(&mut self, name: &str, error: f64, tolerance: f64) {
        let passed = error.is_finite() && error <= tolerance;
        self.checks.push(Check { name: name.to_owned(), passed, error, tolerance });
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.settings.push((key.to_owned(), value.to_string()));
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.settings {
            let _ = writeln!(out, "setting.{k}={v}");
        }
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "fail" };
            let _ = writeln!(
                out,
                "check={} status={} error={:e} tolerance={:e}",
                c.name, status, c.error, c.tolerance
            );
        }
        let _ = writeln!(out, "summary={}", if self.all_passed() { "pass" } else { "fail" });
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub bridge_paths: usize,
    pub bridge_steps: usize,
    pub bridge_triples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, bridge_paths: 100_000, bridge_steps: 4, bridge_triples: 100 }
    }
}

const LAMBDA_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const ANGLE_GRID: [f64; 5] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI];
const THETA_BASE: f64 = 0.3;

pub fn run_suite(opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    report.set("jump_step", JUMP_STEP);
    report.set("upsilon_prime_step", UPSILON_PRIME_STEP);
    report.set("increment_quadrature_tol", INCREMENT_TOL);
    report.set("whittle_quadrature_tol", DEFAULT_TOL);
    report.set("jump_grid", "5 lambda x 5 angle");
    report.set("seed", opts.seed);
    report.set("bridge_paths", opts.bridge_paths);
    report.set("bridge_steps", opts.bridge_steps);
    report.set("bridge_triples", opts.bridge_triples);

    distance_checks(&mut report);
    jump_checks(&mut report);
    increment_checks(&mut report);
    whittle_checks(&mut report);
    bridge_checks(&mut report, opts);
    report
}

fn distance_checks(report: &mut VerifyReport) {
    let err = polar_distance(0.4, 0.4, 1.1, 1.1)
        .max((polar_distance(0.0, 1.0, 0.7, -2.0) - 1.0).abs())
        .max((polar_distance(0.0, 0.0, PI, 0.0) - 2.0).abs());
    report.push("polar_distance_examples", err, 1e-14);
}

fn jump_checks(report: &mut VerifyReport) {
    let exp1 = RadialCovariance::exponential(1.0).expect("positive rate");
    let diag = c_lambda_isotropic(&exp1, 0.5, 0.0, 0.0);
    report.push_exact("jump_exponential_closed_form", (diag - 2.0).abs(), 0.0);
    let numeric = c_lambda_numeric(&exp1, 0.5, 0.0, 0.0);
    report.push("jump_exponential_numeric", (numeric - 2.0).abs(), 1e-4);
    let off = LAMBDA_GRID
        .iter()
        .map(|&l| c_lambda_numeric(&exp1, l, 0.0, PI / 2.0).abs())
        .fold(0.0, f64::max);
    report.push("jump_off_diagonal_numeric", off, 1e-4);

    let families = [
        ("exp1", exp1),
        ("exp2", RadialCovariance::exponential(2.0).expect("positive rate")),
        ("whittle", RadialCovariance::whittle()),
    ];
    for (label, cov) in &families {
        let mut worst = 0.0f64;
        for &lambda in &LAMBDA_GRID {
            for &delta in &ANGLE_GRID {
                let (t1, t2) = (THETA_BASE, THETA_BASE + delta);
                let closed = c_lambda_isotropic(cov, lambda, t1, if delta == 0.0 { t1 } else { t2 });
                let fd = c_lambda_numeric(cov, lambda, t1, t2);
                worst = worst.max((closed - fd).abs());
            }
        }
        report.push(&format!("jump_grid_agreement_{label}"), worst, 1e-4);
    }
}

fn increment_checks(report: &mut VerifyReport) {
    let specs = [
        ("exp1_closed_form", NoiseSpec::analytic(RadialCovariance::exponential(1.0).expect("rate"))),
        ("exp2_numeric", NoiseSpec::numeric(RadialCovariance::exponential(2.0).expect("rate"))),
    ];
    let windows = [(0.7, 0.2), (1.0, 0.0), (0.55, 0.45)];
    for (label, spec) in &specs {
        let mut worst = 0.0f64;
        for &(b, a) in &windows {
            match w_increment_moments(spec, b, a, 0.4, 0.4) {
                Ok((_, var)) => worst = worst.max((var - (b - a)).abs()),
                Err(_) => worst = f64::INFINITY,
            }
        }
        report.push(&format!("increment_variance_{label}"), worst, 1e-7);
    }
    let (same, _) = w_increment_moments(&specs[0].1, 0.7, 0.2, 0.4, 1.9).unwrap_or((f64::NAN, 0.0));
    report.push("same_level_cross_covariance", same.abs(), 1e-12);
}

fn whittle_checks(report: &mut VerifyReport) {
    let at_zero = whittle_upsilon(0.0).unwrap_or(f64::NAN);
    report.push("whittle_upsilon_at_zero", (at_zero - 0.5).abs(), 1e-7);
    let slope = whittle_upsilon_prime(0.0).unwrap_or(f64::NAN);
    report.push("whittle_upsilon_prime_at_zero", slope.abs(), 1e-6);

    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let values: Vec<f64> = grid.iter().map(|&t| whittle_upsilon(t).unwrap_or(f64::NAN)).collect();
    // Smallest drop between neighbours; negative means not decreasing.
    let min_drop = values.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    report.push("whittle_monotone_on_unit_interval", if min_drop > 0.0 { 0.0 } else { 1.0 }, 0.5);

    let mut drift = 0.0f64;
    for i in 0..=8 {
        let t = 0.5 * i as f64;
        let coarse = whittle_upsilon_with_tol(t, DEFAULT_TOL);
        let fine = whittle_upsilon_with_tol(t, 0.5 * DEFAULT_TOL);
        drift = match (coarse, fine) {
            (Ok(a), Ok(b)) => drift.max((a - b).abs()),
            _ => f64::INFINITY,
        };
    }
    report.push("whittle_tolerance_stability", drift, 1e-7);
}

fn bridge_checks(report: &mut VerifyReport, opts: &VerifyOptions) {
    let mut worst = 0.0f64;
    for i in 1..=5 {
        for j in 1..=10 {
            let r = 0.15 * i as f64;
            let s = r + (0.999 - r) * j as f64 / 10.5;
            let coeff = bb_predict(r, s).unwrap_or(f64::NAN);
            worst = worst.max((coeff - bb_ratio(r, s)).abs() / coeff.abs().max(f64::MIN_POSITIVE));
        }
    }
    report.push("bridge_coefficient_ratio", worst, 4.0 * f64::EPSILON);

    let mut draws = NormalStream::new(opts.seed);
    let mut uniform = move || draws.uniform();
    let mut worst = 0.0f64;
    for _ in 0..opts.bridge_triples {
        let mut v = [uniform(), uniform(), uniform()];
        v.sort_by(f64::total_cmp);
        let [t, r, s] = v;
        if r >= s || s >= 1.0 {
            continue;
        }
        worst = worst.max(bb_markov_residual(t, r, s).unwrap_or(f64::INFINITY));
    }
    report.push("bridge_markov_identity", worst, 1e-14);

    let (var_err, var_tol, cross_err, cross_tol) = bridge_moments(opts);
    report.push("bridge_simulated_variance", var_err, var_tol);
    report.push("bridge_simulated_cross_covariance", cross_err, cross_tol);
}

/// `(|Var x(½) − R(½,½)|, 5 s.e., |E x(¼)x(¾) − R(¼,¾)|, 5 s.e.)` over
/// `bridge_paths` paths with seeds `seed, seed+1, ...`.
pub fn bridge_moments(opts: &VerifyOptions) -> (f64, f64, f64, f64) {
    let n = opts.bridge_steps;
    let (quarter, half, three_quarter) = (n / 4, n / 2, 3 * n / 4);
    let grid = |i: usize| i as f64 / n as f64;
    let mut sq = (0.0, 0.0);
    let mut cross = (0.0, 0.0);
    for p in 0..opts.bridge_paths {
        let path = match bb_telescope_sample(n, opts.seed.wrapping_add(p as u64)) {
            Ok(path) => path,
            Err(_) => return (f64::INFINITY, 0.0, f64::INFINITY, 0.0),
        };
        let a = path[half] * path[half];
        let b = path[quarter] * path[three_quarter];
        sq = (sq.0 + a, sq.1 + a * a);
        cross = (cross.0 + b, cross.1 + b * b);
    }
    let count = opts.bridge_paths as f64;
    let stat = |(sum, sum_sq): (f64, f64), target: f64| {
        let mean = sum / count;
        let var = (sum_sq / count - mean * mean).max(0.0) * count / (count - 1.0);
        ((mean - target).abs(), 5.0 * (var / count).sqrt())
    };
    let (e1, t1) = stat(sq, bb_covariance(grid(half), grid(half)));
    let (e2, t2) = stat(cross, bb_covariance(grid(quarter), grid(three_quarter)));
    (e1, t1, e2, t2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_suite_passes() {
        let opts = VerifyOptions { bridge_paths: 20_000, ..VerifyOptions::default() };
        let report = run_suite(&opts);
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
        let text = report.to_text();
        assert!(text.contains("setting.jump_step=0.00001"));
        assert!(text.ends_with("summary=pass\n"));
    }
}
