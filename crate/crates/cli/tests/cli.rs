use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gmrf_telescope::io::read_matrix_csv;

const MODEL: &str = "n_rows = 5\nn_cols = 4\nalpha = 9.0\nboundary_cov = \"identity:1.0\"\n\
                     beta.n = 1\nbeta.s = 1\nbeta.e = 1\nbeta.w = 1\n";

fn cli(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmrf-telescope"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = cli(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sample_then_estimate_recovers_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = d.join("model.toml");
    fs::write(&model, MODEL).unwrap();
    let model = model.to_str().unwrap();

    ok(d, &["build", "--model", model]);
    let report = fs::read_to_string(d.join("build_report.txt")).unwrap();
    assert!(report.contains("spd=true"), "{report}");
    assert_eq!(read_matrix_csv(&d.join("A.csv")).unwrap().shape(), (20, 20));

    ok(d, &["factorize", "--model", model, "--check-oracle"]);
    let manifest = fs::read_to_string(d.join("manifest.txt")).unwrap();
    assert!(manifest.contains("tau=2"), "{manifest}");
    let dev: f64 = manifest
        .lines()
        .find_map(|l| l.strip_prefix("oracle_max_relative_deviation="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev < 1e-9);

    ok(d, &["--seed", "11", "sample", "--model", model]);
    let truth = read_matrix_csv(&d.join("sample_0000.csv")).unwrap();
    let mut obs = String::new();
    for r in 0..5 {
        for c in 0..4 {
            obs.push_str(&format!("{},{},1,1e-9,{}\n", r + 1, c + 1, truth[(r, c)]));
        }
    }
    fs::write(d.join("obs.csv"), obs).unwrap();
    ok(d, &["estimate", "--model", model, "--obs", d.join("obs.csv").to_str().unwrap(), "--prefix", "rt"]);
    let mean = read_matrix_csv(&d.join("rt_mean.csv")).unwrap();
    let var = read_matrix_csv(&d.join("rt_variance.csv")).unwrap();
    assert!((mean - &truth).abs().max() < 1e-3);
    assert!(var.max() < 1e-8);
}

#[test]
fn denoise_size_mismatch_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("model.toml"), MODEL).unwrap();
    fs::write(d.join("img.pgm"), b"P2\n5 4\n255\n0 0 0 0 0\n0 0 0 0 0\n0 0 0 0 0\n0 0 0 0 0\n").unwrap();
    let o = cli(
        d,
        &[
            "denoise",
            "--model",
            d.join("model.toml").to_str().unwrap(),
            "--in",
            d.join("img.pgm").to_str().unwrap(),
            "--noise-var",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("5×4"), "{err}");
}

#[test]
fn malformed_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("model.toml"), MODEL).unwrap();
    let model = d.join("model.toml");
    let model = model.to_str().unwrap();
    for (name, body) in [("dup.csv", "1,1,1,1,0\n1,1,1,1,0\n"), ("off.csv", "9,9,1,1,0\n"), ("frac.csv", "1.5,1,1,1,0\n")] {
        fs::write(d.join(name), body).unwrap();
        let o = cli(d, &["estimate", "--model", model, "--obs", d.join(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}");
    }
    fs::write(d.join("bad.toml"), "n_rows = 2\n").unwrap();
    let o = cli(d, &["build", "--model", d.join("bad.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.toml"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(dir.path(), &["shells", "--rows", "x", "--cols", "2"]).status.code(), Some(2));
    assert_eq!(cli(dir.path(), &["surfaces", "--center", "1"]).status.code(), Some(2));
}

#[test]
fn shells_listing_covers_every_node_once() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["shells", "--rows", "4", "--cols", "6"]);
    let text = fs::read_to_string(dir.path().join("shells.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("shell_index,order_in_shell,row,col"));
    let mut nodes: Vec<(usize, usize)> = lines
        .map(|l| {
            let f: Vec<usize> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[2], f[3])
        })
        .collect();
    nodes.sort();
    assert_eq!(nodes.len(), 6 * 8);
    nodes.dedup();
    assert_eq!(nodes.len(), 6 * 8);
}

#[test]
fn surfaces_report_flags_a_growing_ellipse() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["surfaces", "--kind", "ellipse", "--exponents=-1,1", "--samples", "64", "--levels", "16"]);
    let report = fs::read_to_string(dir.path().join("surfaces_report.txt")).unwrap();
    assert!(report.contains("property=P1 status=fail"), "{report}");
    assert!(dir.path().join("surfaces.svg").exists());
}
