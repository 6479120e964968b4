//! Data behind the reference figures, written as CSV, JSON and SVG files.

use std::path::Path;

use serde_json::{json, Value};

use super::{Figure, Settings};
use crate::density::{
    rho_analytic, rho_empirical, sample_density_seeded, DensitySpec, Harmonic, QuadratureSettings, ShellFunction,
    DEFAULT_BANDWIDTH,
};
use crate::error::Result;
use crate::io::{self, write_atomic};
use crate::learn::sub_seed;
use crate::optimizer::{check_convexity, critical_epsilon_gmm, gmm_profile, optimal_body};

pub fn run(figure: Figure, dir: &Path, s: &Settings) -> Result<Value> {
    std::fs::create_dir_all(dir)?;
    match figure {
        Figure::L2Supports => l2_supports(dir, s),
        Figure::GmmBodies => gmm_bodies(dir, s),
        Figure::GmmCriticalEps => gmm_critical(dir, s),
    }
}

/// The four inner boundaries used for the shell supports.
pub fn shell_functions() -> Vec<(&'static str, ShellFunction)> {
    let h = |order, cos, sin| Harmonic { order, cos, sin };
    vec![
        ("disk", ShellFunction::constant(0.0)),
        ("annulus", ShellFunction::constant(0.8)),
        ("trefoil", ShellFunction { base: 0.5, harmonics: vec![h(3, 0.4, 0.0)] }),
        ("lopsided", ShellFunction { base: 0.6, harmonics: vec![h(2, 0.0, 0.3), h(5, 0.2, 0.0)] }),
    ]
}

fn l2_supports(dir: &Path, s: &Settings) -> Result<Value> {
    let grid = s.grid(2)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for (i, (name, f)) in shell_functions().into_iter().enumerate() {
        let inner: Vec<[f64; 2]> = grid.nodes().map(|u| scaled(u, f.eval(u))).collect();
        let outer: Vec<[f64; 2]> = grid.nodes().map(|u| scaled(u, f.outer(u, 2))).collect();
        let spec = DensitySpec::uniform_shell(2, f)?;
        let p = rho_analytic(&spec, &grid, 1.0, QuadratureSettings::default())?;
        let x = sample_density_seeded(&spec, 100_000, sub_seed(s.seed, i as u64))?;
        let pe = rho_empirical(&x, &grid, DEFAULT_BANDWIDTH)?;
        write_atomic(&dir.join(format!("{name}.profile.csv")), io::profile_to_csv(&p).as_bytes())?;
        write_atomic(&dir.join(format!("{name}.sampled_profile.csv")), io::profile_to_csv(&pe).as_bytes())?;
        let paths: Vec<&[[f64; 2]]> =
            if inner.iter().all(|p| p[0] == 0.0 && p[1] == 0.0) { vec![&outer] } else { vec![&outer, &inner] };
        write_atomic(&dir.join(format!("{name}.svg")), io::polylines_svg(&paths).as_bytes())?;
        let ok = p.max_relative_deviation() < 0.02 && pe.max_relative_deviation() < 0.05;
        pass &= ok;
        rows.push(json!({
            "name": name,
            "value": p.values()[0],
            "analytic_max_relative_deviation": p.max_relative_deviation(),
            "sampled_max_relative_deviation": pe.max_relative_deviation(),
            "pass": ok,
        }));
    }
    Ok(json!({ "figure": "l2-supports", "pass": pass, "supports": rows }))
}

fn scaled(u: &[f64], r: f64) -> [f64; 2] {
    [r * u[0], r * u[1]]
}

fn gmm_bodies(dir: &Path, s: &Settings) -> Result<Value> {
    let grid = s.grid(2)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for eps in [0.01, 0.1, 0.25, 0.75] {
        let r = optimal_body(&gmm_profile(eps, &grid)?)?;
        let conv = check_convexity(&r.k_star, 4000, s.seed)?;
        let b = io::boundary_points(&r.k_star, &grid)?;
        let stem = format!("eps_{eps}");
        write_atomic(&dir.join(format!("{stem}.csv")), io::boundary_csv(&b).as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.svg")), io::boundary_svg(&b).as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.json")), io::json_text(&io::body_to_json(&r.k_star)).as_bytes())?;
        if eps == 0.1 {
            pass &= !conv.is_convex;
        }
        if eps == 0.75 {
            pass &= conv.is_convex;
        }
        rows.push(json!({ "epsilon": eps, "convexity": conv, "achieved_risk": r.achieved_risk }));
    }
    Ok(json!({ "figure": "gmm-bodies", "pass": pass, "bodies": rows }))
}

fn gmm_critical(dir: &Path, s: &Settings) -> Result<Value> {
    let grid = s.grid(2)?;
    let c = critical_epsilon_gmm(&grid, 0.05, 0.95, s.tol.unwrap_or(1e-3))?;
    let v = json!({
        "figure": "gmm-critical-eps",
        "epsilon": c.epsilon,
        "pass": c.epsilon > 0.3 && c.epsilon < 0.45,
        "trace": c.trace,
    });
    write_atomic(&dir.join("critical.json"), io::json_text(&v).as_bytes())?;
    Ok(v)
}
