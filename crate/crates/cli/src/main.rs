//! Command line front end: moment tables, density grids and verification
//! suites for exponential functionals of Lévy processes, with a manifest of
//! checksummed outputs so every run is reproducible.
//!
//! Exit codes: 0 success, 1 verification suite failed (report still
//! written), 2 invalid configuration, 3 numeric failure, 4 evaluation point
//! outside a validity region.

use clap::{Parser, Subcommand};
use expfun::config::parse_config;
use expfun::density::{
    exp_jumps_density_y, inverse_gamma_density, specneg_density_integral,
    stable_ladder_density_integral, DensityGrid, GridMeta,
};
use expfun::gou::residual_norm;
use expfun::levy::{find_theta_roots, FamilyParams, LevyModel};
use expfun::mc::{factorization_test, sample_exp_functional, PathConfig};
use expfun::moments::{mc_mellin, mellin_recursion_residual, moments_h, neg_moments_y};
use expfun::render_f64;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "expfun", version, about = "Exponential functionals of Lévy processes")]
struct Cli {
    /// Worker threads for the parallel kernels (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Positive moments of the ladder-height functional and negative
    /// moments of the auxiliary functional, as CSV tables
    Moments {
        /// Model configuration file (key = value lines)
        #[arg(long)]
        config: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Largest moment order
        #[arg(long, default_value_t = 10)]
        n: u32,
        /// Worst tolerated log-convexity violation of a moment sequence
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Tabulated density of the exponential functional with a
    /// normalization report
    Density {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid spec lo:hi:points (default chosen per family)
        #[arg(long)]
        grid: Option<String>,
        /// Tolerated deviation of the total mass from 1
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Verification suites: factorization of the law, stationarity
    /// residual, Mellin functional equation
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One of: factorize, residual, mellin, all
        #[arg(long, default_value = "all")]
        suite: String,
        /// Monte Carlo sample count
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Override of the suite's documented pass threshold
        #[arg(long)]
        tol: Option<f64>,
        /// Candidate density CSV (x,density) for the residual suite;
        /// default is the family's own tabulated density
        #[arg(long)]
        density_csv: Option<PathBuf>,
        #[arg(long)]
        grid: Option<String>,
    },
}

/// Failure modes mapped to process exit codes.
enum Failure {
    Config(String),  // 2
    Numeric(String), // 3
    Validity(String), // 4
}

impl Failure {
    fn exit(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Numeric(_) => ExitCode::from(3),
            Failure::Validity(_) => ExitCode::from(4),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numeric(m) | Failure::Validity(m) => m,
        }
    }
}

fn lift(e: expfun::Error) -> Failure {
    match e {
        expfun::Error::ValidityRadius(_) | expfun::Error::StripViolation(_) => {
            Failure::Validity(e.to_string())
        }
        _ => Failure::Numeric(e.to_string()),
    }
}

#[derive(Serialize)]
struct OutputEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    params_file: String,
    seed: Option<u64>,
    outputs: Vec<OutputEntry>,
    versions: Versions,
    wall_time: f64,
}

#[derive(Serialize)]
struct Versions {
    tool: String,
    library: String,
}

/// Collects output payloads, writes them under one directory and records
/// checksums for the manifest.
struct OutDir {
    dir: PathBuf,
    outputs: Vec<OutputEntry>,
}

impl OutDir {
    fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Numeric(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| Failure::Numeric(format!("cannot write {}: {e}", path.display())))?;
        let digest = Sha256::digest(content.as_bytes());
        self.outputs.push(OutputEntry {
            path: name.to_string(),
            sha256: format!("{digest:x}"),
        });
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        params_file: &Path,
        seed: Option<u64>,
        started: Instant,
    ) -> Result<(), Failure> {
        let manifest = RunManifest {
            command: command.to_string(),
            params_file: params_file.display().to_string(),
            seed,
            outputs: std::mem::take(&mut self.outputs),
            versions: Versions {
                tool: env!("CARGO_PKG_VERSION").to_string(),
                library: expfun::VERSION.to_string(),
            },
            wall_time: started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())
            .map_err(|e| Failure::Numeric(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

fn load_model(path: &Path) -> Result<(FamilyParams, LevyModel), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let params = parse_config(&text).map_err(|e| Failure::Config(e.to_string()))?;
    let model = LevyModel::new(params.clone()).map_err(|e| Failure::Config(e.to_string()))?;
    Ok((params, model))
}

fn parse_grid_spec(spec: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::Config(format!("grid spec '{spec}': expected lo:hi:points"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let points: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo) || points < 8 {
        return Err(Failure::Config(format!(
            "grid spec '{spec}': need 0 < lo < hi and points >= 8"
        )));
    }
    Ok((lo, hi, points))
}

fn default_grid(params: &FamilyParams) -> (f64, f64, usize) {
    match params {
        FamilyParams::BrownianDrift { .. } => (1e-3, 5e3, 2048),
        FamilyParams::SpectrallyNegative { .. } => (5e-3, 2e4, 1024),
        // the m_Y series hits its cancellation floor near z ~ 0.08; the
        // heavy right tail needs a wide grid instead
        FamilyParams::ExpPositiveJumps { .. } => (0.08, 1e6, 2048),
        FamilyParams::StableLadder { .. } => (1e-4, 1e3, 1024),
    }
}

/// Tabulates the family's density and returns the grid plus a
/// family-specific consistency report for the meta JSON.
fn family_density(
    params: &FamilyParams,
    model: &LevyModel,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<(DensityGrid, serde_json::Value), Failure> {
    match params {
        FamilyParams::BrownianDrift { gamma } => {
            let g = *gamma;
            let meta = GridMeta::new("inverse_gamma", &params.name()).with_tail_power(-g - 1.0);
            let grid = DensityGrid::build(lo, hi, points, |x| Ok(inverse_gamma_density(g, x)), meta)
                .map_err(lift)?;
            // x^{g+1} m(x) -> 1/Gamma(g) at the right edge
            let limit = expfun::special::gamma(g).map_err(lift)?.recip();
            let ratio = hi.powf(g + 1.0) * grid.eval(hi) / limit;
            Ok((
                grid,
                serde_json::json!({ "tail_limit_ratio": render_f64(ratio) }),
            ))
        }
        FamilyParams::SpectrallyNegative { alpha, gamma } => {
            let (a, g) = (*alpha, *gamma);
            let meta = GridMeta::new("specneg_integral", &params.name())
                .with_head_power(1.0 / a - 1.0)
                .with_tail_power(-g - 1.0);
            let grid =
                DensityGrid::build(lo, hi, points, |x| specneg_density_integral(a, g, x), meta)
                    .map_err(lift)?;
            // x^{g+1} m(x) -> Gamma(a g + 1)/Gamma(g) at the right edge
            let limit = (expfun::special::log_gamma(a * g + 1.0).map_err(lift)?
                - expfun::special::log_gamma(g).map_err(lift)?)
            .exp();
            let ratio = hi.powf(g + 1.0) * grid.eval(hi) / limit;
            Ok((
                grid,
                serde_json::json!({ "tail_limit_ratio": render_f64(ratio) }),
            ))
        }
        FamilyParams::ExpPositiveJumps { .. } => {
            let (theta1, _theta2) = find_theta_roots(params).map_err(lift)?;
            let p = params.clone();
            let meta =
                GridMeta::new("exp_jumps_m_y", &params.name()).with_tail_power(-theta1 - 1.0);
            let grid = DensityGrid::build(lo, hi, points, |z| exp_jumps_density_y(&p, z), meta)
                .map_err(lift)?;
            Ok((
                grid,
                serde_json::json!({ "tail_power": render_f64(-theta1 - 1.0) }),
            ))
        }
        FamilyParams::StableLadder { .. } => {
            let m = model.clone();
            let meta = GridMeta::new("stable_ladder_integral", &params.name());
            let grid =
                DensityGrid::build(lo, hi, points, |x| stable_ladder_density_integral(&m, x), meta)
                    .map_err(lift)?;
            Ok((grid, serde_json::json!({})))
        }
    }
}

fn cmd_moments(config: &Path, out: &Path, m_max: u32, tol: f64) -> Result<(), Failure> {
    let started = Instant::now();
    let (params, model) = load_model(config)?;
    let name = params.name();
    let table_h = moments_h(&model.pair.descending, m_max, &name).map_err(lift)?;
    let table_y = neg_moments_y(&model.pair, m_max, &name).map_err(lift)?;
    for table in [&table_h, &table_y] {
        let v = table.worst_log_convexity_violation();
        if v > tol {
            return Err(Failure::Numeric(format!(
                "moment log-convexity violated in {} table (worst {v:e} > {tol:e})",
                table.kind
            )));
        }
    }
    let mut dir = OutDir::new(out)?;
    dir.write("moments_h.csv", &table_h.to_csv())?;
    dir.write("neg_moments_y.csv", &table_y.to_csv())?;
    let doc = serde_json::json!({
        "family": name,
        "m_max": m_max,
        "tables": [&table_h, &table_y],
        "worst_log_convexity": [
            render_f64(table_h.worst_log_convexity_violation()),
            render_f64(table_y.worst_log_convexity_violation()),
        ],
    });
    dir.write("moments.json", &serde_json::to_string_pretty(&doc).unwrap())?;
    dir.finish("moments", config, None, started)
}

fn cmd_density(
    config: &Path,
    out: &Path,
    grid_spec: Option<&str>,
    tol: f64,
) -> Result<(), Failure> {
    let started = Instant::now();
    let (params, model) = load_model(config)?;
    let (lo, hi, points) = match grid_spec {
        Some(s) => parse_grid_spec(s)?,
        None => default_grid(&params),
    };
    let (grid, extra) = family_density(&params, &model, lo, hi, points)?;
    let mass = grid.mass();
    if (mass - 1.0).abs() > tol {
        return Err(Failure::Numeric(format!(
            "density normalization off: mass = {mass} (|mass - 1| > {tol:e}); widen the grid"
        )));
    }
    let mut dir = OutDir::new(out)?;
    dir.write("density.csv", &grid.to_csv())?;
    dir.write("density_meta.json", &grid.meta_json())?;
    let doc = serde_json::json!({
        "family": params.name(),
        "mass": render_f64(mass),
        "tolerance": render_f64(tol),
        "consistency": extra,
    });
    dir.write(
        "normalization.json",
        &serde_json::to_string_pretty(&doc).unwrap(),
    )?;
    dir.finish("density", config, None, started)
}

fn load_density_csv(path: &Path, family: &str) -> Result<DensityGrid, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.trim() == "x,density" {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            Failure::Config(format!("{}: line {}: expected x,density", path.display(), i + 1))
        })?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Failure::Config(format!("{}: line {}: not a number: {s}", path.display(), i + 1))
            })
        };
        xs.push(parse(a)?);
        vals.push(parse(b)?);
    }
    // Infer power-law extensions from the endpoint slopes in log-log
    // scale, so evaluation stays continuous past the tabulated range.
    let mut meta = GridMeta::new("provided", family);
    let n = xs.len();
    if n >= 8 {
        let slope = |i: usize, j: usize| -> Option<f64> {
            if vals[i] > 0.0 && vals[j] > 0.0 && xs[i] > 0.0 {
                Some((vals[j] / vals[i]).ln() / (xs[j] / xs[i]).ln())
            } else {
                None
            }
        };
        if let Some(p) = slope(n - n / 8 - 1, n - 1) {
            if p < -1.001 {
                meta = meta.with_tail_power(p);
            }
        }
        if let Some(h) = slope(0, n / 8) {
            if h > -0.999 && h.abs() < 50.0 {
                meta = meta.with_head_power(h);
            }
        }
    }
    DensityGrid::from_values(xs, vals, meta).map_err(|e| Failure::Config(e.to_string()))
}

fn cmd_verify(
    config: &Path,
    out: &Path,
    suite: &str,
    n: usize,
    seed: u64,
    tol: Option<f64>,
    density_csv: Option<&Path>,
    grid_spec: Option<&str>,
) -> Result<bool, Failure> {
    let started = Instant::now();
    let (params, model) = load_model(config)?;
    let run_factorize = matches!(suite, "factorize" | "all");
    let run_residual = matches!(suite, "residual" | "all");
    let run_mellin = matches!(suite, "mellin" | "all");
    if !(run_factorize || run_residual || run_mellin) {
        return Err(Failure::Config(format!(
            "unknown suite '{suite}': expected factorize, residual, mellin or all"
        )));
    }
    let mut dir = OutDir::new(out)?;
    let mut summary = Vec::new();
    let mut all_pass = true;

    let grid_for = |spec: Option<&str>| -> Result<DensityGrid, Failure> {
        let (lo, hi, points) = match spec {
            Some(s) => parse_grid_spec(s)?,
            None => default_grid(&params),
        };
        Ok(family_density(&params, &model, lo, hi, points)?.0)
    };

    if run_factorize {
        let cfg = PathConfig::adaptive(0.01, seed);
        let mut report = factorization_test(&model, &model.pair, &cfg, n).map_err(lift)?;
        if let Some(t) = tol {
            report.threshold = t;
            report.pass = report.p_value > t;
        }
        all_pass &= report.pass;
        dir.write(
            "factorize.json",
            &serde_json::to_string_pretty(&report).unwrap(),
        )?;
        summary.push(serde_json::json!({
            "suite": "factorize",
            "statistic": render_f64(report.statistic),
            "p_value": render_f64(report.p_value),
            "pass": report.pass,
        }));
    }

    if run_residual {
        let grid = match density_csv {
            Some(p) => load_density_csv(p, &params.name())?,
            None => grid_for(grid_spec)?,
        };
        let mut report = residual_norm(&grid, &model).map_err(lift)?;
        if let Some(t) = tol {
            report.certify_tol = t;
            report.pass = report.sup_rel <= t;
        }
        all_pass &= report.pass;
        dir.write("residual.json", &report.to_json())?;
        summary.push(serde_json::json!({
            "suite": "residual",
            "sup_rel": render_f64(report.sup_rel),
            "threshold": render_f64(report.certify_tol),
            "pass": report.pass,
        }));
    }

    if run_mellin {
        let grid = grid_for(grid_spec)?;
        let zs = [0.25, 0.5, 0.75];
        let residuals =
            mellin_recursion_residual(&|z: f64| grid.moment(z - 1.0), &model, &zs).map_err(lift)?;
        let rec_tol = tol.unwrap_or(1e-4);
        let rec_pass = residuals.iter().all(|&r| r <= rec_tol);
        // Monte Carlo cross-check of the transform at one interior point
        let pool = sample_exp_functional(&model, &PathConfig::adaptive(0.01, seed), n)
            .map_err(lift)?;
        let z_mc = 0.5;
        let (mc_val, mc_se) = mc_mellin(&pool.values, z_mc, 200, seed).map_err(lift)?;
        let reference = grid.moment(z_mc - 1.0).map_err(lift)?;
        // 3 bootstrap SEs plus a small allowance for discretization bias
        let mc_margin = 3.0 * mc_se + 5e-3 * reference.abs();
        let mc_pass = (mc_val - reference).abs() <= mc_margin;
        let pass = rec_pass && mc_pass;
        all_pass &= pass;
        let doc = serde_json::json!({
            "family": params.name(),
            "recursion_points": zs,
            "recursion_residuals": residuals.iter().map(|&r| render_f64(r)).collect::<Vec<_>>(),
            "recursion_tol": render_f64(rec_tol),
            "recursion_pass": rec_pass,
            "mc_point": render_f64(z_mc),
            "mc_value": render_f64(mc_val),
            "mc_se": render_f64(mc_se),
            "reference": render_f64(reference),
            "mc_margin": render_f64(mc_margin),
            "mc_pass": mc_pass,
            "pass": pass,
        });
        dir.write("mellin.json", &serde_json::to_string_pretty(&doc).unwrap())?;
        summary.push(serde_json::json!({
            "suite": "mellin",
            "pass": pass,
        }));
    }

    let doc = serde_json::json!({
        "family": params.name(),
        "suites": summary,
        "all_pass": all_pass,
        "n": n,
        "seed": seed,
    });
    dir.write("verify.json", &serde_json::to_string_pretty(&doc).unwrap())?;
    dir.finish("verify", config, Some(seed), started)?;
    Ok(all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let outcome = match &cli.cmd {
        Cmd::Moments { config, out, n, tol } => cmd_moments(config, out, *n, *tol).map(|_| true),
        Cmd::Density {
            config,
            out,
            grid,
            tol,
        } => cmd_density(config, out, grid.as_deref(), *tol).map(|_| true),
        Cmd::Verify {
            config,
            out,
            suite,
            n,
            seed,
            tol,
            density_csv,
            grid,
        } => cmd_verify(
            config,
            out,
            suite,
            *n,
            *seed,
            *tol,
            density_csv.as_deref(),
            grid.as_deref(),
        ),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification suite failed (see report)");
            ExitCode::from(1)
        }
        Err(f) => {
            eprintln!("{}", f.message());
            f.exit()
        }
    }
}
