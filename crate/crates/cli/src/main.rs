//! `sparse-kacrice`: expected real zeros of Gaussian exponential sums.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sparse_kacrice::algebra::{aronszajn, aronszajn_power, default_merge_tol, kostlan, tensor};
use sparse_kacrice::complexcase::{bkk_total, ComplexExpSum};
use sparse_kacrice::integrate::{esol_pspace, esol_total, Estimate, Quadrature, Region};
use sparse_kacrice::mc::{estimate_esol, McConfig};
use sparse_kacrice::monotonicity::{ray_scan_unbounded, region_scan, witness_interior, ScanSpace};
use sparse_kacrice::{selftest, Augmentation, Error, ExpSum, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "sparse-kacrice",
    version,
    about = "Expected real zeros of Gaussian exponential sums"
)]
struct Cli {
    /// Worker threads; 0 picks the number of cores.
    #[arg(
        long,
        global = true,
        env = "SPARSE_KACRICE_THREADS",
        default_value_t = 0
    )]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected number of real zeros over ℝ^m or a box.
    Analyze {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// `auto`, a half-width R for [-R,R]^m, or lo1,hi1,lo2,hi2,...
        #[arg(long = "box", default_value = "auto", allow_hyphen_values = true)]
        region: String,
        #[arg(long, value_enum, default_value_t = Route::X)]
        route: Route,
        /// Integrand evaluation budget.
        #[arg(long, default_value_t = 20_000_000)]
        max_evals: usize,
    },
    /// Kac-Rice density on a grid, as CSV.
    DensityGrid {
        #[command(flatten)]
        input: Input,
        /// lo1,hi1[,lo2,hi2,...]
        #[arg(long, allow_hyphen_values = true)]
        bounds: String,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Ψ and the U₋/U₊ classification on a grid in P or in x.
    PsiGrid {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        aug: AugArgs,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = Space::P)]
        space: Space,
        /// lo1,hi1,...; defaults to the bounding box of the support in p-space.
        #[arg(long, allow_hyphen_values = true)]
        bounds: Option<String>,
        /// Written as JSON if the name ends in `.json`, CSV otherwise.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// The point μ⁻¹(a₀) where Ψ < 1, for a₀ interior to P.
    Witness {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        aug: AugArgs,
    },
    /// Ψ along a ray t·dir.
    Ray {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        aug: AugArgs,
        #[arg(long, allow_hyphen_values = true)]
        dir: String,
        #[arg(long, default_value_t = 40.0)]
        t_max: f64,
        #[arg(long, default_value_t = 40)]
        steps: usize,
    },
    /// Monte-Carlo zero count for univariate sums.
    Mc {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// lo,hi; defaults to center ± 12/(smallest exponent gap).
        #[arg(long, allow_hyphen_values = true)]
        interval: Option<String>,
    },
    /// Tensor and Aronszajn products, powers and Kostlan systems.
    Algebra {
        #[command(subcommand)]
        op: AlgebraOp,
    },
    /// Density-route BKK total against n!·vol(P).
    Bkk {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Closed-form checks as a pass/fail table.
    Selftest,
}

#[derive(Subcommand)]
enum AlgebraOp {
    Tensor {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    Aronszajn {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        merge_tol: Option<f64>,
    },
    Power {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        d: usize,
    },
    Kostlan {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
    },
}

#[derive(Args)]
struct Input {
    /// ExpSum JSON file.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct AugArgs {
    /// New exponent a₀ as a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    a0: String,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Route {
    X,
    P,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    P,
    X,
}

/// Failure with its exit code: 2 for input problems, 3 for numerical ones.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

fn input_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load(path: &Path) -> std::result::Result<ExpSum, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_failure(format!("cannot read {}: {e}", path.display())))?;
    ExpSum::from_json_str(&text).map_err(|e| input_failure(format!("{}: {e}", path.display())))
}

fn parse_list(s: &str, what: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| input_failure(format!("{what}: cannot parse '{t}' as a number")))
        })
        .collect()
}

fn parse_bounds(s: &str, m: usize, what: &str) -> std::result::Result<Vec<(f64, f64)>, Failure> {
    let v = parse_list(s, what)?;
    if v.len() != 2 * m {
        return Err(input_failure(format!(
            "{what}: expected {} numbers (lo,hi per axis), got {}",
            2 * m,
            v.len()
        )));
    }
    Ok(v.chunks(2).map(|c| (c[0], c[1])).collect())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
fn out(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
    {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(2);
    }
}

fn emit(v: Value) {
    out(&format!(
        "{}\n",
        serde_json::to_string_pretty(&v).expect("JSON values serialize")
    ));
}

fn write_or_print(path: Option<&Path>, body: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, body)
            .map_err(|e| input_failure(format!("cannot write {}: {e}", p.display()))),
        None => {
            out(body);
            Ok(())
        }
    }
}

fn estimate_json(route: &str, est: &Estimate) -> Value {
    json!({
        "schema": SCHEMA_VERSION,
        "value": est.value,
        "error": est.error,
        "route": route,
        "cells": est.cells,
        "evals": est.evals,
        "inversion_failures": est.inversion_failures,
    })
}

fn analyze(input: &Input, tol: f64, region: &str, route: Route, max_evals: usize) -> Outcome {
    let e = load(&input.input)?;
    let mut q = Quadrature::with_tol(tol);
    q.max_evals = max_evals;
    q.region = match region.trim() {
        "auto" => Region::Auto,
        s => {
            let v = parse_list(s, "--box")?;
            let m = e.dim();
            if v.len() == 1 {
                Region::Box {
                    lo: vec![-v[0]; m],
                    hi: vec![v[0]; m],
                }
            } else {
                let b = parse_bounds(s, m, "--box")?;
                Region::Box {
                    lo: b.iter().map(|p| p.0).collect(),
                    hi: b.iter().map(|p| p.1).collect(),
                }
            }
        }
    };
    let x = || esol_total(&e, &q).map(|est| estimate_json("x", &est));
    let p = || esol_pspace(&e, &q).map(|est| estimate_json("p", &est));
    let value = match route {
        Route::X => x()?,
        Route::P => p()?,
        Route::Both => {
            let (xv, pv) = (x()?, p()?);
            let diff = (xv["value"].as_f64().unwrap_or(f64::NAN)
                - pv["value"].as_f64().unwrap_or(f64::NAN))
            .abs();
            json!({ "schema": SCHEMA_VERSION, "route": "both", "x": xv, "p": pv, "abs_diff": diff })
        }
    };
    emit(value);
    Ok(())
}

fn density_grid(input: &Input, bounds: &str, resolution: usize, output: Option<&Path>) -> Outcome {
    let e = load(&input.input)?;
    let m = e.dim();
    let b = parse_bounds(bounds, m, "--bounds")?;
    if resolution < 2 {
        return Err(input_failure("--resolution must be at least 2"));
    }
    let mut csv = String::new();
    let header: Vec<String> = (1..=m)
        .map(|i| format!("x{i}"))
        .chain(["density".to_string()])
        .collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    let total = resolution
        .checked_pow(m as u32)
        .ok_or_else(|| input_failure("grid too large"))?;
    for idx in 0..total {
        let mut r = idx;
        let mut x = vec![0.0; m];
        for axis in (0..m).rev() {
            let (lo, hi) = b[axis];
            x[axis] = lo + (hi - lo) * (r % resolution) as f64 / (resolution - 1) as f64;
            r /= resolution;
        }
        let d = e.density(&x)?;
        let row: Vec<String> = x.iter().chain([&d]).map(|v| v.to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_or_print(output, &csv)
}

fn augmentation(e: &ExpSum, aug: &AugArgs) -> std::result::Result<Augmentation, Failure> {
    let a0 = parse_list(&aug.a0, "--a0")?;
    if a0.len() != e.dim() {
        return Err(input_failure(format!(
            "--a0 has {} coordinates, the sum has dimension {}",
            a0.len(),
            e.dim()
        )));
    }
    Ok(Augmentation::new(a0, aug.alpha0)?)
}

fn psi_grid(
    input: &Input,
    aug: &AugArgs,
    resolution: usize,
    space: Space,
    bounds: Option<&str>,
    output: Option<&Path>,
) -> Outcome {
    let e = load(&input.input)?;
    let a = augmentation(&e, aug)?;
    let m = e.dim();
    let b = match bounds {
        Some(s) => parse_bounds(s, m, "--bounds")?,
        None => match space {
            Space::P => (0..m)
                .map(|i| {
                    let vals: Vec<f64> = e.support().points().map(|p| p[i]).collect();
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    (lo, vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                })
                .collect(),
            Space::X => return Err(input_failure("--bounds is required for --space x")),
        },
    };
    let space = match space {
        Space::P => ScanSpace::P,
        Space::X => ScanSpace::X,
    };
    let scan = region_scan(&e, &a, &b, resolution, space)?;
    let as_json = output.is_some_and(|p| p.extension().is_some_and(|x| x == "json"));
    let body = if as_json {
        scan.to_json_string()
    } else {
        scan.to_csv()
    };
    write_or_print(output, &body)?;
    if output.is_some() {
        emit(json!({
            "schema": SCHEMA_VERSION,
            "nodes": scan.nodes.len(),
            "u_minus": scan.count(sparse_kacrice::Classification::UMinus),
            "u_plus": scan.count(sparse_kacrice::Classification::UPlus),
            "u_minus_components": scan.u_minus_components(),
        }));
    }
    Ok(())
}

fn algebra(op: &AlgebraOp) -> Outcome {
    let result = match op {
        AlgebraOp::Tensor { left, right } => tensor(&load(left)?, &load(right)?)?,
        AlgebraOp::Aronszajn {
            left,
            right,
            merge_tol,
        } => {
            let (a, b) = (load(left)?, load(right)?);
            let tol = merge_tol.unwrap_or_else(|| default_merge_tol(&a, &b));
            aronszajn(&a, &b, tol)?
        }
        AlgebraOp::Power { input, d } => aronszajn_power(&load(input)?, *d)?,
        AlgebraOp::Kostlan { m, d } => kostlan(*m, *d)?,
    };
    out(&format!("{}\n", result.to_json_string()));
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Analyze {
            input,
            tol,
            region,
            route,
            max_evals,
        } => analyze(input, *tol, region, *route, *max_evals),
        Command::DensityGrid {
            input,
            bounds,
            resolution,
            output,
        } => density_grid(input, bounds, *resolution, output.as_deref()),
        Command::PsiGrid {
            input,
            aug,
            resolution,
            space,
            bounds,
            output,
        } => psi_grid(
            input,
            aug,
            *resolution,
            *space,
            bounds.as_deref(),
            output.as_deref(),
        ),
        Command::Witness { input, aug } => {
            let e = load(&input.input)?;
            let w = witness_interior(&e, &augmentation(&e, aug)?, 1e-12)?;
            emit(json!({ "schema": SCHEMA_VERSION, "x0": w.x0, "eval": w.eval }));
            Ok(())
        }
        Command::Ray {
            input,
            aug,
            dir,
            t_max,
            steps,
        } => {
            let e = load(&input.input)?;
            let d = parse_list(dir, "--dir")?;
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !n.is_finite() || n <= 0.0 {
                return Err(input_failure("--dir must be a nonzero vector"));
            }
            let unit: Vec<f64> = d.iter().map(|v| v / n).collect();
            let scan = ray_scan_unbounded(&e, &augmentation(&e, aug)?, &unit, *t_max, *steps)?;
            emit(json!({ "schema": SCHEMA_VERSION, "scan": scan }));
            Ok(())
        }
        Command::Mc {
            input,
            samples,
            seed,
            interval,
        } => {
            let e = load(&input.input)?;
            let mut cfg = McConfig::for_sum(&e, *samples, *seed)?;
            if let Some(s) = interval {
                let b = parse_bounds(s, 1, "--interval")?;
                cfg = cfg.with_interval(&e, b[0].0, b[0].1);
            }
            let r = estimate_esol(&e, &cfg)?;
            emit(json!({
                "schema": SCHEMA_VERSION,
                "mean": r.mean,
                "stderr": r.stderr,
                "samples": r.samples,
                "interval": [r.interval.0, r.interval.1],
                "tail_mean": r.tail_mean,
                "tail_ok": r.tail_ok,
            }));
            Ok(())
        }
        Command::Algebra { op } => algebra(op),
        Command::Bkk { input, tol } => {
            let e = load(&input.input)?;
            let r = bkk_total(&ComplexExpSum::new(e), &Quadrature::with_tol(*tol))?;
            emit(json!({
                "schema": SCHEMA_VERSION,
                "density_route_total": r.density_route_total,
                "n_factorial_vol": r.n_factorial_vol,
                "abs_diff": r.abs_diff,
            }));
            Ok(())
        }
        Command::Selftest => {
            let rows = selftest::run()?;
            out(&selftest::render(&rows));
            let failed = rows.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(Failure {
                    code: 3,
                    message: format!("{failed} self-test checks failed"),
                });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Only fails if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
