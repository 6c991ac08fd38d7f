use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gmrf_telescope::config::ModelConfig;
use gmrf_telescope::continuous::{run_suite, VerifyOptions};
use gmrf_telescope::denoise::denoise_image;
use gmrf_telescope::estimation::estimate;
use gmrf_telescope::homotopy::{
    check_star_center_default, surface, surfaces_csv, surfaces_svg, uniform_levels, validate_homotopy, Boundary,
    HomotopySpec, PlanarDomain, Point, ValidationGrid,
};
use gmrf_telescope::io::{read_matrix_csv, read_pgm, write_matrix_csv, write_pgm, GrayImage};
use gmrf_telescope::linalg::{relative_deviation, PivotReport};
use gmrf_telescope::sampling::Sampler;
use gmrf_telescope::{
    factorize, factorize_oracle, joint_covariance, permute_system, shells, validate_spd, Error,
    LatticeSpec, ObservationModel, PrecisionSystem, Result, ShellDecomposition, TelescopingModel,
};
use nalgebra::DMatrix;

use crate::{Cli, Command, SampleFormat, SurfaceKind};

pub fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => match (x.parse(), y.parse()) {
            (Ok(x), Ok(y)) => Ok([x, y]),
            _ => Err(format!("`{s}` is not a pair of numbers")),
        },
        _ => Err(format!("expected `x,y`, got `{s}`")),
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Self { dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, body).map_err(|e| io_error(&path, e))
    }

    fn matrix(&self, name: &str, m: &DMatrix<f64>) -> Result<()> {
        write_matrix_csv(&self.path(name), m)
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_owned(), source }
}

/// Built system, shells and chain for a config file.
struct Chain {
    sys: PrecisionSystem,
    dec: ShellDecomposition,
    model: TelescopingModel,
}

fn load_system(path: &Path) -> Result<PrecisionSystem> {
    let sys = ModelConfig::load(path)?.build()?;
    if let PivotReport::Failed { index, .. } = validate_spd(&sys) {
        return Err(Error::NotPositiveDefinite { index });
    }
    Ok(sys)
}

fn load_chain(path: &Path) -> Result<Chain> {
    let sys = load_system(path)?;
    let dec = shells(sys.spec);
    let blocks = permute_system(&sys, &dec)?;
    let model = factorize(&blocks, &sys.boundary_cov)?;
    Ok(Chain { sys, dec, model })
}

pub fn run(cli: Cli) -> Result<()> {
    let out = Output::new(cli.out)?;
    let seed = cli.seed;
    match cli.command {
        Command::Shells { rows, cols } => run_shells(&out, rows, cols),
        Command::Build { model } => run_build(&out, &model),
        Command::Factorize { model, check_oracle } => run_factorize(&out, &model, check_oracle),
        Command::Sample { model, count, format } => run_sample(&out, &model, seed, count, format),
        Command::Estimate { model, obs, prefix } => run_estimate(&out, &model, &obs, &prefix),
        Command::Denoise { model, input, noise_var, reference, output } => {
            run_denoise(&out, &model, &input, noise_var, reference.as_deref(), &output)
        }
        Command::Verify { bridge_paths } => run_verify(&out, seed, bridge_paths),
        Command::Surfaces { kind, center, domain, exponents, samples, levels, coverage_points } => {
            let grid = ValidationGrid { boundary_samples: samples, levels, coverage_points, seed };
            run_surfaces(&out, kind, center, &domain, exponents, &grid)
        }
    }
}

fn run_shells(out: &Output, rows: usize, cols: usize) -> Result<()> {
    let dec = shells(LatticeSpec::new(rows, cols)?);
    let mut csv = String::from("shell_index,order_in_shell,row,col\n");
    for k in 0..=dec.tau() {
        for (i, (r, c)) in dec.shell(k).iter().enumerate() {
            let _ = writeln!(csv, "{k},{i},{r},{c}");
        }
    }
    out.text("shells.csv", &csv)
}

fn run_build(out: &Output, model: &Path) -> Result<()> {
    let sys = ModelConfig::load(model)?.build()?;
    let report = validate_spd(&sys);
    let mut text = format!(
        "n_rows={}\nn_cols={}\ninterior_nodes={}\nboundary_nodes={}\n",
        sys.spec.n_rows(),
        sys.spec.n_cols(),
        sys.spec.interior_len(),
        sys.spec.boundary_len()
    );
    match report {
        PivotReport::Positive { min_pivot } => {
            let _ = writeln!(text, "spd=true\nmin_pivot={min_pivot}");
        }
        PivotReport::Failed { index, pivot } => {
            let _ = writeln!(text, "spd=false\nfailed_pivot_index={index}\nfailed_pivot={pivot}");
        }
    }
    out.matrix("A.csv", &sys.a)?;
    out.matrix("A_b.csv", &sys.a_b)?;
    out.matrix("boundary_cov.csv", &sys.boundary_cov)?;
    out.text("build_report.txt", &text)?;
    match report {
        PivotReport::Positive { .. } => Ok(()),
        PivotReport::Failed { index, .. } => Err(Error::NotPositiveDefinite { index }),
    }
}

fn run_factorize(out: &Output, model: &Path, check_oracle: bool) -> Result<()> {
    let chain = load_chain(model)?;
    let tau = chain.model.tau();
    let mut manifest = format!("tau={tau}\n");
    for (k, size) in chain.model.sizes().iter().enumerate() {
        let _ = writeln!(manifest, "stage.{k}.size={size}");
    }
    for k in 1..=tau {
        let (f, q) = (format!("F_{k}.csv"), format!("Q_{k}.csv"));
        out.matrix(&f, chain.model.f(k))?;
        out.matrix(&q, chain.model.q(k))?;
        let _ = writeln!(manifest, "stage.{k}.transition={f}\nstage.{k}.noise={q}");
    }
    if check_oracle {
        let (cxx, cxb) = joint_covariance(&chain.sys)?;
        let oracle = factorize_oracle(&cxx, &cxb, &chain.sys.boundary_cov, &chain.dec)?;
        let worst = (1..=tau)
            .map(|k| {
                relative_deviation(chain.model.f(k), oracle.f(k)).max(relative_deviation(chain.model.q(k), oracle.q(k)))
            })
            .fold(0.0, f64::max);
        let _ = writeln!(manifest, "oracle_max_relative_deviation={worst:e}");
    }
    out.text("manifest.txt", &manifest)
}

fn run_sample(out: &Output, model: &Path, seed: u64, count: usize, format: SampleFormat) -> Result<()> {
    let chain = load_chain(model)?;
    let sampler = Sampler::new(&chain.model, &chain.dec)?;
    let (n, m) = (chain.sys.spec.n_rows(), chain.sys.spec.n_cols());
    for i in 0..count {
        let sample = sampler.sample(seed.wrapping_add(i as u64));
        match format {
            SampleFormat::Csv => out.matrix(&format!("sample_{i:04}.csv"), &sample.interior)?,
            SampleFormat::Pgm => {
                let values = sample.interior_row_major();
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
                let scaled: Vec<f64> = values.iter().map(|v| (v - lo) * scale).collect();
                let img = GrayImage::from_intensities(n, m, &scaled)?;
                write_pgm(&out.path(&format!("sample_{i:04}.pgm")), &img)?;
                out.text(
                    &format!("sample_{i:04}.txt"),
                    &format!("seed={}\nminimum={lo}\nmaximum={hi}\nscale={scale}\n", sample.seed),
                )?;
            }
        }
    }
    Ok(())
}

fn run_estimate(out: &Output, model: &Path, obs_path: &Path, prefix: &str) -> Result<()> {
    let chain = load_chain(model)?;
    let spec = chain.sys.spec;
    let table = read_matrix_csv(obs_path)?;
    if table.nrows() > 0 && table.ncols() != 5 {
        return Err(Error::parse(obs_path, format!("expected 5 columns (row,col,gain,variance,value), found {}", table.ncols())));
    }
    let mut obs = ObservationModel::none(spec);
    let n = spec.interior_len();
    let mut y = vec![0.0; n + spec.boundary_len()];
    let mut seen = vec![false; y.len()];
    for i in 0..table.nrows() {
        let (r, c) = (table[(i, 0)], table[(i, 1)]);
        if r < 0.0 || c < 0.0 || r.fract() != 0.0 || c.fract() != 0.0 {
            return Err(Error::parse(obs_path, format!("row {}: node ({r}, {c}) is not a lattice position", i + 1)));
        }
        let (r, c) = (r as usize, c as usize);
        obs.observe(r, c, table[(i, 2)], table[(i, 3)])?;
        let slot = if spec.is_interior(r as isize, c as isize) {
            spec.interior_index(r, c)
        } else {
            n + spec.boundary_index(r, c).expect("observe accepted the node")
        };
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::parse(obs_path, format!("row {}: node ({r}, {c}) observed twice", i + 1)));
        }
        y[slot] = table[(i, 4)];
    }
    if !obs.observes_boundary() {
        y.truncate(n);
    }
    let post = estimate(&chain.model, &chain.dec, &obs, &y)?;
    out.matrix(&format!("{prefix}_mean.csv"), &post.interior_mean(&chain.dec))?;
    out.matrix(&format!("{prefix}_variance.csv"), &post.interior_variance(&chain.dec))?;
    out.text(
        &format!("{prefix}_report.txt"),
        &format!(
            "n_rows={}\nn_cols={}\ntau={}\nobserved_nodes={}\nboundary_observed={}\n",
            spec.n_rows(),
            spec.n_cols(),
            chain.model.tau(),
            obs.observed_count(),
            obs.observes_boundary()
        ),
    )
}

fn run_denoise(
    out: &Output,
    model: &Path,
    input: &Path,
    noise_var: f64,
    reference: Option<&Path>,
    output: &str,
) -> Result<()> {
    let chain = load_chain(model)?;
    let image = read_pgm(input)?;
    let clean = reference.map(read_pgm).transpose()?;
    let (denoised, report) = denoise_image(&chain.model, &chain.dec, &image, noise_var, clean.as_ref())?;
    write_pgm(&out.path(output), &denoised)?;
    out.text("denoise_report.txt", &report.to_text())
}

fn run_verify(out: &Output, seed: u64, bridge_paths: usize) -> Result<()> {
    let opts = VerifyOptions { seed, bridge_paths, ..VerifyOptions::default() };
    let report = run_suite(&opts);
    out.text("verify_report.txt", &report.to_text())?;
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Error::Invalid(format!(
            "{failed} of {} continuous checks failed (see verify_report.txt)",
            report.checks.len()
        )));
    }
    Ok(())
}

fn load_domain(name: &str) -> Result<PlanarDomain> {
    match name {
        "square" => Ok(PlanarDomain::unit_square()),
        "l-shape" => Ok(PlanarDomain::l_shape()),
        "u-shape" => Ok(PlanarDomain::u_shape()),
        path => {
            let table = read_matrix_csv(Path::new(path))?;
            if table.ncols() != 2 {
                return Err(Error::parse(path, "polygon CSV needs two columns `x,y`"));
            }
            PlanarDomain::new((0..table.nrows()).map(|i| [table[(i, 0)], table[(i, 1)]]).collect())
        }
    }
}

fn run_surfaces(
    out: &Output,
    kind: SurfaceKind,
    center: Option<Point>,
    domain: &str,
    exponents: [f64; 2],
    grid: &ValidationGrid,
) -> Result<()> {
    if grid.boundary_samples < gmrf_telescope::homotopy::MIN_SAMPLES || grid.levels < 2 {
        return Err(Error::Invalid("surfaces need at least 8 samples and 2 levels".into()));
    }
    let disc = || PlanarDomain::unit_disc(grid.boundary_samples);
    let (h, region) = match kind {
        SurfaceKind::Radial => (HomotopySpec::radial(), disc()?),
        SurfaceKind::Shifted => (HomotopySpec::shifted_circle(center.unwrap_or([0.0, 0.0])), disc()?),
        SurfaceKind::Ellipse => {
            let [p, q] = exponents;
            (HomotopySpec::ellipse(move |l| (1.0 - l).powf(p), move |l| (1.0 - l).powf(q)), disc()?)
        }
        SurfaceKind::Affine => {
            let region = load_domain(domain)?;
            let c = center.unwrap_or_else(|| region.centroid());
            (HomotopySpec::affine(Boundary::Polygon(region.clone()), c), region)
        }
    };
    let sampled: Vec<(f64, Vec<Point>)> = uniform_levels(grid.levels)
        .into_iter()
        .map(|l| surface(&h, l, grid.boundary_samples).map(|s| (l, s)))
        .collect::<Result<_>>()?;
    out.text("surfaces.csv", &surfaces_csv(&sampled))?;
    out.text("surfaces.svg", &surfaces_svg(&region, &sampled))?;
    let report = validate_homotopy(&h, &region, grid);
    let label = match kind {
        SurfaceKind::Radial => "radial",
        SurfaceKind::Shifted => "shifted",
        SurfaceKind::Ellipse => "ellipse",
        SurfaceKind::Affine => "affine",
    };
    let mut text = format!("kind={label}\nfamily={}\n", h.kind().name());
    let c = h.center();
    let _ = writeln!(text, "center={},{}", c[0], c[1]);
    if matches!(kind, SurfaceKind::Affine) {
        let _ = writeln!(text, "star_center={}", check_star_center_default(&region, c));
    }
    text.push_str(&report.to_text());
    out.text("surfaces_report.txt", &text)
}
