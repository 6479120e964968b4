//! The `starbody` command line.
//!
//! Exit codes: 0 success, 2 input or parse error, 3 numerical failure,
//! 4 verification failure.

mod reproduce;
mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::density::{rho_analytic, rho_empirical, QuadratureSettings, RadialProfile, DEFAULT_BANDWIDTH};
use crate::error::{Error, Result};
use crate::grid::SphericalGrid;
use crate::io;
use crate::learn::{fit, Family, FitConfig};
use crate::optimizer::{check_convexity, check_convexity_with, optimal_body, ConvexityMethod};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "starbody", version, about = "Optimal star-body regularizers from data")]
pub struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of sphere grid nodes.
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    /// Relative tolerance of the command's main numerical routine.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file (or directory for `reproduce`). Default: stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// JSON file with defaults for the global flags and a `fit` section.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Radial statistic ρ_P on a grid.
    Rho(InputArgs),
    /// Optimal body K★ with boundary export and convexity verdict.
    Optimal {
        #[command(flatten)]
        input: InputArgs,
        /// Trials for the sampled convexity check.
        #[arg(long, default_value_t = 4000)]
        trials: usize,
    },
    /// Convexity verdict for a body descriptor.
    Convexity {
        #[arg(long)]
        body: PathBuf,
        #[arg(long, default_value_t = 4000)]
        trials: usize,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Samples from the Gibbs density exp(-‖x‖_K)/Z_K.
    GibbsSample {
        #[arg(long)]
        body: PathBuf,
        #[arg(short = 'n', long, default_value_t = 1000)]
        n: usize,
    },
    /// Empirical risk minimization over a body family.
    Fit(FitArgs),
    /// Runs a verification suite; exit code 4 on failure.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Regenerates the data behind a reference figure.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Density shorthand (gaussian-identity-2d, gaussian-diag:<v1>,<v2>,
    /// gmm-eps:<ε>, uniform-ball-2d, uniform-l1-2d) or a JSON descriptor.
    #[arg(long, required_unless_present = "samples", conflicts_with = "samples")]
    density: Option<String>,
    /// Sample CSV.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Kernel bandwidth for sample input.
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
    bandwidth: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    data: PathBuf,
    /// Held-out samples for the generalization gap.
    #[arg(long)]
    held_out: Option<PathBuf>,
    /// Report JSON path; `-` or absent means stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Dictionary columns.
    #[arg(long)]
    p: Option<usize>,
    /// Union parts.
    #[arg(long)]
    parts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    /// Inner width floor r.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    no_volume_normalization: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Ellipsoid,
    Dictionary,
    Union,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact2d,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lutwak,
    Gibbs,
    Lipschitz,
    Noise,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    L2Supports,
    GmmBodies,
    GmmCriticalEps,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    grid_n: Option<usize>,
    tol: Option<f64>,
    format: Option<Format>,
    fit: Option<FitConfig>,
}

/// Global flags merged over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub grid_n: usize,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    fit: Option<FitConfig>,
}

impl Settings {
    fn resolve(g: &Global) -> Result<Self> {
        let cfg: ConfigFile = match &g.config {
            Some(p) => {
                serde_json::from_value(io::read_json(p)?).map_err(|e| Error::Descriptor(format!("config: {e}")))?
            }
            None => ConfigFile::default(),
        };
        let s = Settings {
            seed: g.seed.or(cfg.seed).unwrap_or(0),
            grid_n: g.grid_n.or(cfg.grid_n).unwrap_or(crate::grid::DEFAULT_NODES),
            tol: g.tol.or(cfg.tol),
            out: g.out.clone(),
            format: g.format.or(cfg.format),
            fit: cfg.fit,
        };
        if s.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::invalid("--tol must be positive"));
        }
        Ok(s)
    }

    pub fn grid(&self, dim: usize) -> Result<Arc<SphericalGrid>> {
        Ok(Arc::new(if dim == 2 {
            SphericalGrid::uniform2d(self.grid_n)?
        } else {
            SphericalGrid::quasi_uniform(dim, self.grid_n)?
        }))
    }

    fn format_or(&self, default: Format, allowed: &[Format]) -> Result<Format> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(Error::Unsupported(format!("format {f:?} is not available for this command")))
        }
    }

    /// Writes the primary output to `--out` or stdout.
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => io::write_atomic(p, text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

/// `out` with its extension replaced by `suffix`, e.g. `k.json` → `k.meta.json`.
fn companion(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if let Some(n) = std::env::var("STARBODY_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        crate::par::set_threads(n);
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(true) => 0,
        Ok(false) => EXIT_VERIFY,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

/// Returns whether every verification in the command passed.
fn execute(cli: Cli) -> Result<bool> {
    let s = Settings::resolve(&cli.global)?;
    match cli.command {
        Command::Rho(input) => cmd_rho(&s, &input).map(|_| true),
        Command::Optimal { input, trials } => cmd_optimal(&s, &input, trials).map(|_| true),
        Command::Convexity { body, trials, method } => {
            s.format_or(Format::Json, &[Format::Json])?;
            let body = io::read_body(&body)?;
            let method = method.map(|m| match m {
                MethodArg::Exact2d => ConvexityMethod::Exact2d,
                MethodArg::Sampled => ConvexityMethod::SampledSubadditivity,
            });
            let tol = crate::geometry::GeometryTolerances::default();
            let rep = check_convexity_with(&body, trials, s.seed, method, &tol)?;
            s.emit(&io::json_text(&serde_json::to_value(rep)?))?;
            Ok(true)
        }
        Command::GibbsSample { body, n } => {
            let f = s.format_or(Format::Csv, &[Format::Csv, Format::Json])?;
            let body = io::read_body(&body)?;
            let grid = s.grid(body.dim())?;
            let x = crate::gibbs::sample_gibbs(&body, n, s.seed, &grid)?;
            let text = match f {
                Format::Csv => io::samples_to_csv(&x),
                _ => io::json_text(&json!({ "dim": x.dim(), "points": x.rows().collect::<Vec<_>>() })),
            };
            s.emit(&text)?;
            Ok(true)
        }
        Command::Fit(args) => cmd_fit(&s, &args).map(|_| true),
        Command::Verify { suite } => {
            s.format_or(Format::Json, &[Format::Json])?;
            let report = verify::run(suite, &s)?;
            let pass = report["pass"].as_bool().unwrap_or(false);
            s.emit(&io::json_text(&report))?;
            Ok(pass)
        }
        Command::Reproduce { figure } => {
            s.format_or(Format::Json, &[Format::Json])?;
            let dir = s.out.clone().unwrap_or_else(|| PathBuf::from(figure.to_possible_value().unwrap().get_name()));
            let summary = reproduce::run(figure, &dir, &s)?;
            let pass = summary["pass"].as_bool().unwrap_or(true);
            io::write_atomic(&dir.join("summary.json"), io::json_text(&summary).as_bytes())?;
            print!("{}", io::json_text(&summary));
            Ok(pass)
        }
    }
}

fn input_profile(s: &Settings, input: &InputArgs) -> Result<(RadialProfile, Value)> {
    match (&input.density, &input.samples) {
        (Some(d), _) => {
            let spec = io::resolve_density(d)?;
            let grid = s.grid(spec.dim())?;
            let quad = QuadratureSettings { rel_tol: s.tol.unwrap_or(QuadratureSettings::default().rel_tol) };
            let p = rho_analytic(&spec, &grid, input.alpha, quad)?;
            Ok((p, json!({ "density": d })))
        }
        (None, Some(path)) => {
            if input.alpha != 1.0 {
                return Err(Error::Unsupported("sample input supports alpha = 1 only".into()));
            }
            let x = io::read_samples(path)?;
            let grid = s.grid(x.dim())?;
            let p = rho_empirical(&x, &grid, input.bandwidth)?;
            Ok((p, json!({ "samples": path.display().to_string(), "m": x.len(), "bandwidth": input.bandwidth })))
        }
        (None, None) => Err(Error::invalid("give --density or --samples")),
    }
}

fn cmd_rho(s: &Settings, input: &InputArgs) -> Result<()> {
    let f = s.format_or(Format::Csv, &[Format::Csv, Format::Json])?;
    let (p, source) = input_profile(s, input)?;
    let meta = json!({
        "source": source,
        "alpha": p.alpha(),
        "dim": p.grid().dim(),
        "nodes": p.grid().len(),
        "spread": p.spread(),
        "max_relative_deviation": p.max_relative_deviation(),
    });
    match f {
        Format::Csv => {
            s.emit(&io::profile_to_csv(&p))?;
            if let Some(out) = &s.out {
                io::write_atomic(&companion(out, ".meta.json"), io::json_text(&meta).as_bytes())?;
            }
        }
        _ => {
            let mut v = meta;
            v["values"] = json!(p.values());
            s.emit(&io::json_text(&v))?;
        }
    }
    Ok(())
}

fn cmd_optimal(s: &Settings, input: &InputArgs, trials: usize) -> Result<()> {
    let f = s.format_or(Format::Json, &[Format::Json, Format::Csv, Format::Svg])?;
    let (p, source) = input_profile(s, input)?;
    let r = optimal_body(&p)?;
    let conv = check_convexity(&r.k_star, trials, s.seed)?;
    let mut meta = io::optimal_metadata_json(&r, &conv);
    meta["source"] = source;
    let body = io::body_to_json(&r.k_star);
    let boundary = if p.grid().dim() == 2 { Some(io::boundary_points(&r.k_star, p.grid())?) } else { None };
    match &s.out {
        Some(out) => {
            io::write_atomic(out, io::json_text(&body).as_bytes())?;
            io::write_atomic(&companion(out, ".meta.json"), io::json_text(&meta).as_bytes())?;
            if let Some(b) = &boundary {
                io::write_atomic(&companion(out, ".boundary.csv"), io::boundary_csv(b).as_bytes())?;
                io::write_atomic(&companion(out, ".svg"), io::boundary_svg(b).as_bytes())?;
            }
        }
        None => {
            let text = match (f, &boundary) {
                (Format::Csv, Some(b)) => io::boundary_csv(b),
                (Format::Svg, Some(b)) => io::boundary_svg(b),
                (Format::Json, _) => io::json_text(&json!({ "meta": meta, "body": body })),
                _ => return Err(Error::Unsupported("boundary export is planar only".into())),
            };
            print!("{text}");
        }
    }
    Ok(())
}

fn cmd_fit(s: &Settings, a: &FitArgs) -> Result<()> {
    s.format_or(Format::Json, &[Format::Json])?;
    let mut cfg = s.fit.unwrap_or_default();
    cfg.seed = s.seed;
    if let Some(f) = a.family {
        cfg.family = match f {
            FamilyArg::Ellipsoid => Family::Ellipsoid,
            FamilyArg::Dictionary => {
                Family::Dictionary { p: a.p.ok_or_else(|| Error::invalid("dictionary needs --p"))? }
            }
            FamilyArg::Union => Family::UnionEllipsoids { parts: a.parts.unwrap_or(2) },
        };
    } else if s.fit.is_none() {
        return Err(Error::invalid("give --family or a config file with a fit section"));
    }
    match (&mut cfg.family, a.p, a.parts) {
        (Family::Dictionary { p }, Some(v), _) => *p = v,
        (Family::UnionEllipsoids { parts }, _, Some(v)) => *parts = v,
        _ => {}
    }
    if let Some(v) = a.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = a.step_size {
        cfg.step_size = v;
    }
    if let Some(v) = a.floor {
        cfg.inner_width_floor = v;
    }
    if let Some(v) = s.tol {
        cfg.tol = v;
    }
    if a.no_volume_normalization {
        cfg.volume_normalization = false;
    }
    let x = io::read_samples(&a.data)?;
    let mut rep = fit(&x, &cfg)?;
    if let Some(h) = &a.held_out {
        rep = rep.with_held_out(&io::read_samples(h)?)?;
    }
    let report = io::risk_report_json(&rep);
    if let Some(out) = &s.out {
        io::write_atomic(out, io::json_text(&io::body_to_json(&rep.body)).as_bytes())?;
    }
    match &a.report {
        Some(p) if p.as_os_str() != "-" => io::write_atomic(p, io::json_text(&report).as_bytes()),
        _ => {
            print!("{}", io::json_text(&report));
            Ok(())
        }
    }
}
