//! Persistence: JSON descriptors for bodies and densities, CSV for samples
//! and radial profiles, boundary exports, and atomic file writes.
//!
//! CSV numbers are written with 17 significant digits. JSON numbers use the
//! shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::density::{DensitySpec, Profile, RadialProfile, SampleSet, ShellFunction};
use crate::error::{Error, Result};
use crate::geometry::StarBody;
use crate::grid::{GridKind, SphericalGrid};
use crate::learn::RiskReport;
use crate::optimizer::{ConvexityReport, OptimalBodyResult};

/// `v` in scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridDescriptor {
    Uniform2d {
        n: usize,
        #[serde(default, skip_serializing_if = "is_zero")]
        theta0: f64,
    },
    QuasiUniform {
        dim: usize,
        n: usize,
    },
    Nodes {
        dim: usize,
        nodes: Vec<Vec<f64>>,
    },
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl GridDescriptor {
    pub fn of(grid: &SphericalGrid) -> Self {
        match grid.kind() {
            GridKind::Uniform2d => GridDescriptor::Uniform2d { n: grid.len(), theta0: 0.0 },
            GridKind::Explicit if grid.dim() == 2 => GridDescriptor::Uniform2d { n: grid.len(), theta0: grid.theta0() },
            GridKind::Spiral => GridDescriptor::QuasiUniform { dim: grid.dim(), n: grid.len() },
            GridKind::Explicit => {
                GridDescriptor::Nodes { dim: grid.dim(), nodes: grid.nodes().map(|u| u.to_vec()).collect() }
            }
        }
    }

    pub fn build(&self) -> Result<SphericalGrid> {
        match self {
            GridDescriptor::Uniform2d { n, theta0 } if *theta0 == 0.0 => SphericalGrid::uniform2d(*n),
            GridDescriptor::Uniform2d { n, theta0 } => SphericalGrid::uniform2d_offset(*n, *theta0, GridKind::Explicit),
            GridDescriptor::QuasiUniform { dim, n } => SphericalGrid::quasi_uniform(*dim, *n),
            GridDescriptor::Nodes { dim, nodes } => SphericalGrid::from_nodes(*dim, nodes),
        }
    }
}

/// JSON form of a [`StarBody`]. Matrices are arrays of rows. The `ball`,
/// `l1_ball` and `ellipsoid_diag` forms are accepted on input only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BodyDescriptor {
    RadialGrid {
        grid: GridDescriptor,
        radii: Vec<f64>,
    },
    Ellipsoid {
        matrix: Vec<Vec<f64>>,
    },
    Dictionary {
        matrix: Vec<Vec<f64>>,
        #[serde(default = "default_feas_tol")]
        feas_tol: f64,
    },
    Union {
        parts: Vec<BodyDescriptor>,
    },
    Dilate {
        base: Box<BodyDescriptor>,
        factor: f64,
    },
    Ball {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    L1Ball {
        dim: usize,
    },
    EllipsoidDiag {
        semi_axes: Vec<f64>,
    },
}

fn default_feas_tol() -> f64 {
    1e-8
}

fn one() -> f64 {
    1.0
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(Error::Descriptor("matrix must be a non-empty array of equal-length rows".into()));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

impl BodyDescriptor {
    pub fn of(body: &StarBody) -> Self {
        match body {
            StarBody::RadialGrid(b) => {
                BodyDescriptor::RadialGrid { grid: GridDescriptor::of(b.grid()), radii: b.radii().to_vec() }
            }
            StarBody::Ellipsoid(e) => BodyDescriptor::Ellipsoid { matrix: rows(e.matrix()) },
            StarBody::Dictionary(p) => BodyDescriptor::Dictionary { matrix: rows(p.columns()), feas_tol: p.feas_tol() },
            StarBody::Union(u) => BodyDescriptor::Union { parts: u.parts().iter().map(Self::of).collect() },
            StarBody::Dilate(d) => BodyDescriptor::Dilate { base: Box::new(Self::of(d.base())), factor: d.factor() },
        }
    }

    pub fn build(&self) -> Result<StarBody> {
        match self {
            BodyDescriptor::RadialGrid { grid, radii } => StarBody::radial_grid(Arc::new(grid.build()?), radii.clone()),
            BodyDescriptor::Ellipsoid { matrix: m } => StarBody::ellipsoid(matrix(m)?),
            BodyDescriptor::Dictionary { matrix: m, feas_tol } => StarBody::dictionary_with_tol(matrix(m)?, *feas_tol),
            BodyDescriptor::Union { parts } => StarBody::union(parts.iter().map(Self::build).collect::<Result<_>>()?),
            BodyDescriptor::Dilate { base, factor } => StarBody::dilate(base.build()?, *factor),
            BodyDescriptor::Ball { dim, radius } => StarBody::ball(*dim, *radius),
            BodyDescriptor::L1Ball { dim } => StarBody::l1_ball(*dim),
            BodyDescriptor::EllipsoidDiag { semi_axes } => StarBody::ellipsoid_diag(semi_axes),
        }
    }
}

/// JSON form of a [`DensitySpec`]. A missing Gaussian mean is the origin; a
/// missing gauge-induced normalization is computed by quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DensityDescriptor {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        covariance: Vec<Vec<f64>>,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<DensityDescriptor>,
    },
    UniformOverBody {
        body: BodyDescriptor,
    },
    GaugeInduced {
        body: BodyDescriptor,
        profile: Profile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        normalization: Option<f64>,
    },
    UniformShell {
        dim: usize,
        inner: ShellFunction,
    },
}

impl DensityDescriptor {
    pub fn of(spec: &DensitySpec) -> Self {
        match spec {
            DensitySpec::Gaussian { mean, covariance } => {
                DensityDescriptor::Gaussian { mean: Some(mean.clone()), covariance: rows(covariance) }
            }
            DensitySpec::Mixture { weights, components } => DensityDescriptor::Mixture {
                weights: weights.clone(),
                components: components.iter().map(Self::of).collect(),
            },
            DensitySpec::UniformOverBody { body } => {
                DensityDescriptor::UniformOverBody { body: BodyDescriptor::of(body) }
            }
            DensitySpec::GaugeInduced { body, profile, normalization } => DensityDescriptor::GaugeInduced {
                body: BodyDescriptor::of(body),
                profile: *profile,
                normalization: Some(*normalization),
            },
            DensitySpec::UniformShell { dim, inner } => {
                DensityDescriptor::UniformShell { dim: *dim, inner: inner.clone() }
            }
        }
    }

    pub fn build(&self) -> Result<DensitySpec> {
        match self {
            DensityDescriptor::Gaussian { mean, covariance } => {
                let c = matrix(covariance)?;
                let mean = mean.clone().unwrap_or_else(|| vec![0.0; c.nrows()]);
                DensitySpec::gaussian(mean, c)
            }
            DensityDescriptor::Mixture { weights, components } => {
                DensitySpec::mixture(weights.clone(), components.iter().map(Self::build).collect::<Result<_>>()?)
            }
            DensityDescriptor::UniformOverBody { body } => {
                let s = DensitySpec::uniform_over_body(body.build()?);
                s.validate()?;
                Ok(s)
            }
            DensityDescriptor::GaugeInduced { body, profile, normalization } => {
                let body = body.build()?;
                match normalization {
                    Some(c) => DensitySpec::gauge_induced_with_normalization(body, *profile, *c),
                    None => {
                        let d = body.dim();
                        let grid = if d == 2 {
                            SphericalGrid::uniform2d(4096)?
                        } else {
                            SphericalGrid::quasi_uniform(d, 20_000)?
                        };
                        DensitySpec::gauge_induced(body, *profile, &grid)
                    }
                }
            }
            DensityDescriptor::UniformShell { dim, inner } => DensitySpec::uniform_shell(*dim, inner.clone()),
        }
    }
}

pub fn body_to_json(body: &StarBody) -> Value {
    serde_json::to_value(BodyDescriptor::of(body)).expect("descriptor serializes")
}

pub fn body_from_json(v: &Value) -> Result<StarBody> {
    let d: BodyDescriptor = serde_json::from_value(v.clone()).map_err(|e| Error::Descriptor(e.to_string()))?;
    d.build()
}

pub fn density_to_json(spec: &DensitySpec) -> Value {
    serde_json::to_value(DensityDescriptor::of(spec)).expect("descriptor serializes")
}

pub fn density_from_json(v: &Value) -> Result<DensitySpec> {
    let d: DensityDescriptor = serde_json::from_value(v.clone()).map_err(|e| Error::Descriptor(e.to_string()))?;
    d.build()
}

/// Reads a file, naming the path in the error.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
}

pub fn read_body(path: &Path) -> Result<StarBody> {
    body_from_json(&read_json(path)?)
}

pub fn read_density(path: &Path) -> Result<DensitySpec> {
    density_from_json(&read_json(path)?)
}

/// Built-in densities: `gaussian-identity-2d`, `gaussian-diag:<a>,<b>,..`
/// (variances), `gmm-eps:<ε>`, `uniform-ball-2d`, `uniform-l1-2d`.
pub fn density_shorthand(name: &str) -> Result<DensitySpec> {
    let bad = |msg: String| Error::invalid(format!("density shorthand `{name}`: {msg}"));
    if let Some(v) = name.strip_prefix("gmm-eps:") {
        let eps: f64 = v.trim().parse().map_err(|_| bad("ε is not a number".into()))?;
        return DensitySpec::gmm_cross(eps);
    }
    if let Some(v) = name.strip_prefix("gaussian-diag:") {
        let vars = v
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad(format!("`{t}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        return DensitySpec::centered_gaussian(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vars)));
    }
    match name {
        "gaussian-identity-2d" => Ok(DensitySpec::standard_gaussian(2)),
        "uniform-ball-2d" => Ok(DensitySpec::uniform_over_body(StarBody::ball(2, 1.0)?)),
        "uniform-l1-2d" => Ok(DensitySpec::uniform_over_body(StarBody::l1_ball(2)?)),
        _ => Err(bad("unknown name".into())),
    }
}

/// A `--density` argument: a shorthand, or a path to a JSON descriptor.
pub fn resolve_density(arg: &str) -> Result<DensitySpec> {
    match density_shorthand(arg) {
        Ok(s) => Ok(s),
        Err(_) if Path::new(arg).exists() => read_density(Path::new(arg)),
        Err(e) => Err(e),
    }
}

/// Parses sample CSV: comma-separated rows, `#` comments, an optional
/// `# dim=<d>` line and an optional header of column names.
pub fn parse_samples(text: &str) -> Result<SampleSet> {
    let mut dim: Option<usize> = None;
    let mut points = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.split_whitespace().find_map(|t| t.strip_prefix("dim=")) {
                let d: usize =
                    v.trim().parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad dim `{v}`") })?;
                if dim.is_some_and(|x| x != d) {
                    return Err(Error::Parse { line: line_no, msg: "dim header disagrees with the data".into() });
                }
                dim = Some(d);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if !seen_data && parsed.iter().all(Option::is_none) {
            // column names
            seen_data = true;
            continue;
        }
        seen_data = true;
        let mut row = Vec::with_capacity(fields.len());
        for (f, p) in fields.iter().zip(parsed) {
            match p {
                Some(v) if v.is_finite() => row.push(v),
                _ => return Err(Error::Parse { line: line_no, msg: format!("`{f}` is not a finite number") }),
            }
        }
        match dim {
            Some(d) if d != row.len() => {
                return Err(Error::Parse { line: line_no, msg: format!("expected {d} columns, found {}", row.len()) })
            }
            None => dim = Some(row.len()),
            _ => {}
        }
        points.extend(row);
    }
    let d = dim.ok_or_else(|| Error::Empty("sample file has no rows".into()))?;
    if points.is_empty() {
        return Err(Error::Empty("sample file has no rows".into()));
    }
    SampleSet::new(d, points)
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let text = read_text(path)?;
    let s = parse_samples(&text)?;
    Ok(s.with_source(crate::density::SampleSource { path: Some(path.display().to_string()), seed: None }))
}

pub fn samples_to_csv(s: &SampleSet) -> String {
    let mut out = format!("# dim={}\n", s.dim());
    for x in s.rows() {
        let line: Vec<String> = x.iter().map(|v| fmt17(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// One row per grid node: the direction, its quadrature weight and `ρ`.
pub fn profile_to_csv(p: &RadialProfile) -> String {
    let g = p.grid();
    let d = g.dim();
    let mut out = format!("# grid_dim={d} alpha={}\n", p.alpha());
    let cols: Vec<String> = (1..=d).map(|i| format!("u{i}")).chain(["weight".into(), "rho".into()]).collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for (j, v) in p.values().iter().enumerate() {
        let mut line: Vec<String> = g.node(j).iter().map(|c| fmt17(*c)).collect();
        line.push(fmt17(g.weight(j)));
        line.push(fmt17(*v));
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Reads the output of [`profile_to_csv`]. The grid is rebuilt from the node
/// columns.
pub fn parse_profile(text: &str) -> Result<RadialProfile> {
    let mut alpha = 1.0;
    for (i, line) in text.lines().enumerate() {
        if let Some(c) = line.trim().strip_prefix('#') {
            for tok in c.split_whitespace() {
                if let Some(v) = tok.strip_prefix("alpha=") {
                    alpha = v.parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad alpha `{v}`") })?;
                }
            }
        }
    }
    let table = parse_samples(text)?;
    let cols = table.dim();
    if cols < 4 {
        return Err(Error::Parse { line: 1, msg: "profile needs direction, weight and rho columns".into() });
    }
    let d = cols - 2;
    let nodes: Vec<Vec<f64>> = table.rows().map(|r| r[..d].to_vec()).collect();
    let values: Vec<f64> = table.rows().map(|r| r[d + 1]).collect();
    let grid = Arc::new(SphericalGrid::from_nodes(d, &nodes)?);
    RadialProfile::new(grid, values, alpha)
}

/// Planar boundary polyline `ρ(u_j) u_j` over the grid nodes.
pub fn boundary_points(body: &StarBody, grid: &SphericalGrid) -> Result<Vec<[f64; 2]>> {
    if grid.dim() != 2 || body.dim() != 2 {
        return Err(Error::Unsupported("boundary export is planar only".into()));
    }
    let r = body.radial_values(grid)?;
    Ok(grid.nodes().zip(&r).map(|(u, r)| [r * u[0], r * u[1]]).collect())
}

pub fn boundary_csv(points: &[[f64; 2]]) -> String {
    let mut out = String::from("x,y\n");
    for p in points {
        let _ = writeln!(out, "{},{}", fmt17(p[0]), fmt17(p[1]));
    }
    out
}

/// A 512×512 SVG with one closed path, scaled so the farthest boundary point
/// sits just inside the frame.
pub fn boundary_svg(points: &[[f64; 2]]) -> String {
    polylines_svg(&[points])
}

/// Several closed paths on one 512×512 canvas with a shared scale.
pub fn polylines_svg(paths: &[&[[f64; 2]]]) -> String {
    let size = 512.0;
    let c = size / 2.0;
    let rmax = paths.iter().flat_map(|p| p.iter()).map(|p| p[0].hypot(p[1])).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let s = 0.45 * size / rmax;
    let mut out = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"512\" height=\"512\" viewBox=\"0 0 512 512\">\n\
         <rect width=\"512\" height=\"512\" fill=\"white\"/>\n\
         <line x1=\"0\" y1=\"256\" x2=\"512\" y2=\"256\" stroke=\"#ccc\"/>\n\
         <line x1=\"256\" y1=\"0\" x2=\"256\" y2=\"512\" stroke=\"#ccc\"/>\n",
    );
    for points in paths {
        let mut d = String::new();
        for (i, p) in points.iter().enumerate() {
            let _ = write!(d, "{}{:.3} {:.3} ", if i == 0 { "M" } else { "L" }, c + s * p[0], c - s * p[1]);
        }
        d.push('Z');
        let _ = writeln!(out, "<path d=\"{d}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>");
    }
    out.push_str("</svg>\n");
    out
}

pub fn risk_report_json(r: &RiskReport) -> Value {
    json!({
        "trace": r.trace,
        "iterations": r.iterations(),
        "empirical_risk": r.empirical_risk,
        "held_out_risk": r.held_out_risk,
        "population_risk": r.population_risk,
        "gap": r.gap,
        "events": r.events,
        "config": r.config,
        "body": body_to_json(&r.body),
    })
}

pub fn optimal_metadata_json(r: &OptimalBodyResult, convexity: &ConvexityReport) -> Value {
    json!({
        "alpha": r.alpha,
        "achieved_risk": r.achieved_risk,
        "volume_check": r.volume_check,
        "volume_l_p": r.volume_l_p,
        "convexity": convexity,
    })
}

/// Pretty JSON with a trailing newline.
pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

/// Writes through a temporary file in the same directory, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::invalid("output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}
