//! Verification suites behind `starbody verify`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{Settings, Suite};
use crate::density::{rho_analytic, sample_density_seeded, DensitySpec, QuadratureSettings};
use crate::error::Result;
use crate::geometry::{self, StarBody};
use crate::gibbs::{ks_gamma, sample_gibbs};
use crate::learn::{noise_robustness, sub_seed};
use crate::optimizer::random_unit;
use crate::random::{random_ellipsoid, random_radial_body, random_rotation, random_well_conditioned};
use crate::vecmath::dist;

pub fn run(suite: Suite, s: &Settings) -> Result<Value> {
    let (name, checks) = match suite {
        Suite::Lutwak => ("lutwak", lutwak(s)?),
        Suite::Gibbs => ("gibbs", gibbs(s)?),
        Suite::Lipschitz => ("lipschitz", lipschitz(s)?),
        Suite::Noise => ("noise", noise(s)?),
        Suite::Mixture => ("mixture", mixture(s)?),
    };
    let pass = checks.iter().all(|c| c["pass"].as_bool() == Some(true));
    Ok(json!({ "suite": name, "seed": s.seed, "pass": pass, "checks": checks }))
}

fn rng(s: &Settings, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(s.seed, k))
}

/// `Ṽ₋₁(K,L)^d ≥ vol(K)^{-1} vol(L)^{d+1}` on random pairs, with equality for
/// dilates.
fn lutwak(s: &Settings) -> Result<Vec<Value>> {
    let mut out = Vec::new();
    for (d, pairs) in [(2usize, 80usize), (3, 20)] {
        let grid = s.grid(d)?;
        let mut r = rng(s, d as u64);
        let mut worst = f64::INFINITY;
        let mut worst_dilate = 0.0f64;
        for _ in 0..pairs {
            let k = random_radial_body(&grid, 0.5, &mut r)?;
            let l = random_radial_body(&grid, 0.5, &mut r)?;
            worst = worst.min(lutwak_slack(&k, &l, &grid)?);
            let t = r.random_range(0.3..2.5);
            let dl = geometry::dilate(&k, t)?;
            worst_dilate = worst_dilate.max(lutwak_slack(&k, &dl, &grid)?.abs());
        }
        out.push(json!({
            "name": format!("inequality d={d}"), "pairs": pairs, "min_slack": worst, "pass": worst >= -1e-6,
        }));
        out.push(json!({
            "name": format!("dilate equality d={d}"), "pairs": pairs, "max_residual": worst_dilate,
            "pass": worst_dilate <= 1e-6,
        }));
    }
    Ok(out)
}

fn lutwak_slack(k: &StarBody, l: &StarBody, grid: &crate::grid::SphericalGrid) -> Result<f64> {
    let d = grid.dim() as f64;
    let v = geometry::dual_mixed_volume(k, l, -1.0, grid)?;
    let vk = geometry::volume(k, grid)?;
    let vl = geometry::volume(l, grid)?;
    // relative form: the inequality is homogeneous of degree d(d+1)
    Ok(v.powf(d) * vk / vl.powf(d + 1.0) - 1.0)
}

/// Gauges of Gibbs samples against `Gamma(d, 1)`.
fn gibbs(s: &Settings) -> Result<Vec<Value>> {
    let n = 100_000;
    let crit = 1.63 / (n as f64).sqrt();
    let g2 = s.grid(2)?;
    let g3 = s.grid(3)?;
    let mut r = rng(s, 10);
    let bodies = [
        random_radial_body(&g2, 0.4, &mut r)?,
        random_radial_body(&g2, 0.6, &mut r)?,
        random_ellipsoid(2, 0.3, 2.0, &mut r)?,
        StarBody::union(vec![random_ellipsoid(2, 0.3, 1.5, &mut r)?, StarBody::l1_ball(2)?])?,
        random_ellipsoid(3, 0.5, 1.5, &mut r)?,
    ];
    let mut out = Vec::new();
    for (i, b) in bodies.iter().enumerate() {
        let grid = if b.dim() == 2 { &g2 } else { &g3 };
        let x = sample_gibbs(b, n, sub_seed(s.seed, 100 + i as u64), grid)?;
        let g = crate::density::gauges(b, &x)?;
        let ks = ks_gamma(&g, b.dim());
        out.push(json!({ "name": format!("body {i} (d={})", b.dim()), "n": n, "ks": ks, "critical": crit, "pass": ks < crit }));
    }
    Ok(out)
}

/// `|‖x‖_K - ‖y‖_L| ≤ δ(K,L)/r² + ‖x - y‖/r` for unit `x, y` and bodies whose
/// kernel contains `r·B²`.
fn lipschitz(s: &Settings) -> Result<Vec<Value>> {
    let rad = 0.5;
    let grid = s.grid(2)?;
    let mut r = rng(s, 20);
    let mut worst = f64::NEG_INFINITY;
    let trials = 1000;
    for _ in 0..trials {
        let k = random_well_conditioned(2, rad, &mut r)?;
        let l = random_well_conditioned(2, rad, &mut r)?;
        let x = random_unit(2, &mut r);
        let y = random_unit(2, &mut r);
        let delta = geometry::radial_distance(&k, &l, &grid)?;
        let lhs = (k.gauge(&x)? - l.gauge(&y)?).abs();
        let bound = delta / (rad * rad) + dist(&x, &y) / rad;
        worst = worst.max(lhs - bound);
    }
    Ok(vec![
        json!({ "name": "radial Lipschitz bound", "trials": trials, "r": rad, "max_violation": worst, "pass": worst <= 1e-6 }),
    ])
}

/// Sup deviation of empirical risks under additive Gaussian noise.
fn noise(s: &Settings) -> Result<Vec<Value>> {
    let rad = 0.5;
    let mut r = rng(s, 30);
    let bodies: Vec<StarBody> = (0..10).map(|_| random_ellipsoid(2, rad, 2.0, &mut r)).collect::<Result<_>>()?;
    let spec = DensitySpec::centered_gaussian(DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.7]))?;
    let z = DensitySpec::standard_gaussian(2);
    let grid = s.grid(2)?;
    let sigmas = [0.0, 0.05, 0.1, 0.2, 0.5];
    let rep = noise_robustness(&spec, &bodies, rad, &sigmas, &z, 100_000, sub_seed(s.seed, 31), &grid)?;
    let mut out: Vec<Value> = rep
        .rows
        .iter()
        .map(|row| {
            json!({
                "name": format!("sigma={}", row.sigma), "sup_deviation": row.sup_deviation,
                "bound": row.bound, "slack": row.slack, "pass": row.pass,
            })
        })
        .collect();
    let mc = sample_density_seeded(&z, 100_000, sub_seed(s.seed, 32))?;
    let norms: Vec<f64> = mc.rows().map(crate::vecmath::norm).collect();
    let est = crate::density::mean_and_error(&norms);
    out.push(json!({
        "name": "closed-form noise norm vs Monte Carlo", "closed_form": rep.noise_mean_norm,
        "monte_carlo": est.value, "std_error": est.std_error,
        "pass": (est.value - rep.noise_mean_norm).abs() <= 4.0 * est.std_error,
    }));
    Ok(out)
}

fn random_gaussian(d: usize, r: &mut ChaCha8Rng) -> Result<DensitySpec> {
    let q = random_rotation(d, r);
    let ev: Vec<f64> = (0..d).map(|_| r.random_range(0.2..2.0)).collect();
    let c = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(ev)) * q.transpose();
    DensitySpec::centered_gaussian((&c + c.transpose()) * 0.5)
}

/// `ρ_P^{d+α}` of a mixture equals the weighted sum over its components.
fn mixture(s: &Settings) -> Result<Vec<Value>> {
    let mut r = rng(s, 40);
    let cases = vec![
        ("gmm cross eps=0.1", DensitySpec::gmm_cross(0.1)?),
        ("three random gaussians", {
            let comps = (0..3).map(|_| random_gaussian(2, &mut r)).collect::<Result<Vec<_>>>()?;
            DensitySpec::mixture(vec![0.2, 0.3, 0.5], comps)?
        }),
        ("gaussian + uniform l1 ball", {
            let g = random_gaussian(2, &mut r)?;
            DensitySpec::mixture(vec![0.6, 0.4], vec![g, DensitySpec::uniform_over_body(StarBody::l1_ball(2)?)])?
        }),
        ("3-d pair", {
            let comps = (0..2).map(|_| random_gaussian(3, &mut r)).collect::<Result<Vec<_>>>()?;
            DensitySpec::mixture(vec![0.5, 0.5], comps)?
        }),
    ];
    let quad = QuadratureSettings { rel_tol: s.tol.unwrap_or(1e-9) };
    let mut out = Vec::new();
    for (name, spec) in &cases {
        let DensitySpec::Mixture { weights, components } = spec else { unreachable!() };
        let grid = s.grid(spec.dim())?;
        let d = spec.dim() as f64;
        for alpha in [1.0, 2.0] {
            let e = d + alpha;
            let total = rho_analytic(spec, &grid, alpha, quad)?;
            let parts = components.iter().map(|c| rho_analytic(c, &grid, alpha, quad)).collect::<Result<Vec<_>>>()?;
            let mut worst = 0.0f64;
            for j in 0..grid.len() {
                let lhs = total.values()[j].powf(e);
                let rhs: f64 = weights.iter().zip(&parts).map(|(w, p)| w * p.values()[j].powf(e)).sum();
                worst = worst.max((lhs - rhs).abs() / lhs);
            }
            out.push(json!({ "name": format!("{name}, alpha={alpha}"), "max_relative_residual": worst, "pass": worst < 1e-6 }));
        }
    }
    Ok(out)
}
