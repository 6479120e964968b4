//! The optimal body `K★ = vol(L_P)^{-1/d} L_P`, convexity diagnostics and
//! directional-max support bodies.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::density::{risk_from_profile, RadialProfile, SampleSet};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{self, GeometryTolerances, StarBody};
use crate::grid::SphericalGrid;
use crate::vecmath::{add, norm, scaled};

#[derive(Debug, Clone)]
pub struct OptimalBodyResult {
    pub l_p: StarBody,
    pub k_star: StarBody,
    pub alpha: f64,
    /// `d·Ṽ_{-α}(K★, L_P)`, the population risk of `K★`.
    pub achieved_risk: f64,
    /// Quadrature volume of `K★`.
    pub volume_check: f64,
    /// `vol(L_P)`.
    pub volume_l_p: f64,
}

pub fn optimal_body(profile: &RadialProfile) -> Result<OptimalBodyResult> {
    let grid = profile.grid();
    let l_p = profile.to_body()?;
    let volume_l_p = geometry::volume(&l_p, grid)?;
    let factor = volume_l_p.powf(-1.0 / grid.dim() as f64);
    let radii: Vec<f64> = profile.values().iter().map(|v| v * factor).collect();
    let k_star = StarBody::radial_grid(grid.clone(), radii)?;
    let volume_check = geometry::volume(&k_star, grid)?;
    let achieved_risk = risk_from_profile(&k_star, profile)?;
    Ok(OptimalBodyResult { l_p, k_star, alpha: profile.alpha(), achieved_risk, volume_check, volume_l_p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityMethod {
    Exact2d,
    SampledSubadditivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub is_convex: bool,
    pub margin: f64,
    pub method: ConvexityMethod,
    pub trials: usize,
}

/// Convexity verdict with the default method: exact for planar grid bodies
/// (and their dilates), sampled subadditivity otherwise.
pub fn check_convexity(body: &StarBody, trials: usize, seed: u64) -> Result<ConvexityReport> {
    check_convexity_with(body, trials, seed, None, &GeometryTolerances::default())
}

pub fn check_convexity_with(
    body: &StarBody,
    trials: usize,
    seed: u64,
    method: Option<ConvexityMethod>,
    tol: &GeometryTolerances,
) -> Result<ConvexityReport> {
    tol.validate()?;
    let planar = planar_vertices(body);
    let method = method.unwrap_or(if planar.is_some() {
        ConvexityMethod::Exact2d
    } else {
        ConvexityMethod::SampledSubadditivity
    });
    let (margin, trials) = match method {
        ConvexityMethod::Exact2d => {
            let (grid, radii) =
                planar.ok_or_else(|| Error::Unsupported("exact convexity needs a planar grid body".into()))?;
            (polygon_margin(&grid, &radii), radii.len())
        }
        ConvexityMethod::SampledSubadditivity => {
            if trials == 0 {
                return Err(Error::invalid("convexity check needs at least one trial"));
            }
            (subadditivity_margin(body, trials, seed)?, trials)
        }
    };
    Ok(ConvexityReport { is_convex: margin >= -tol.convexity_margin_tol, margin, method, trials })
}

fn planar_vertices(body: &StarBody) -> Option<(Arc<SphericalGrid>, Vec<f64>)> {
    match body {
        StarBody::RadialGrid(b) if b.grid().dim() == 2 => Some((b.grid().clone(), b.radii().to_vec())),
        StarBody::Dilate(d) => {
            planar_vertices(d.base()).map(|(g, r)| (g, r.into_iter().map(|x| x * d.factor()).collect()))
        }
        _ => None,
    }
}

/// Minimum over consecutive edge pairs of `(e_j × e_{j+1}) / (|e_j||e_{j+1}|)`
/// for the boundary polygon with vertices `ρ_j u_j`.
fn polygon_margin(grid: &SphericalGrid, radii: &[f64]) -> f64 {
    let n = radii.len();
    let b: Vec<[f64; 2]> = (0..n)
        .map(|j| {
            let u = grid.node(j);
            [radii[j] * u[0], radii[j] * u[1]]
        })
        .collect();
    let mut margin = f64::INFINITY;
    for j in 0..n {
        let (p, q, r) = (b[j], b[(j + 1) % n], b[(j + 2) % n]);
        let e1 = [q[0] - p[0], q[1] - p[1]];
        let e2 = [r[0] - q[0], r[1] - q[1]];
        let c = (e1[0] * e2[1] - e1[1] * e2[0]) / (e1[0].hypot(e1[1]) * e2[0].hypot(e2[1]));
        margin = margin.min(c);
    }
    margin
}

/// Minimum of `(1 - ‖x + y‖_K) / ‖x + y‖_K` over `x = tρ(u)u`, `y = (1-t)ρ(v)v`
/// with random unit `u, v` and `t ∈ (0, 1)`. Since `‖x‖_K + ‖y‖_K = 1` this
/// is the normalized subadditivity gap.
fn subadditivity_margin(body: &StarBody, trials: usize, seed: u64) -> Result<f64> {
    let d = body.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vec<f64>, Vec<f64>, f64)> =
        (0..trials).map(|_| (random_unit(d, &mut rng), random_unit(d, &mut rng), rng.random::<f64>())).collect();
    let margins = crate::par::try_map_indexed(trials, |i| -> Result<f64> {
        let (u, v, t) = &draws[i];
        let x = scaled(u, t * body.radial(u)?);
        let y = scaled(v, (1.0 - t) * body.radial(v)?);
        let s = add(&x, &y);
        if norm(&s) < 1e-12 {
            return Ok(f64::INFINITY);
        }
        let g = body.gauge(&s)?;
        let lhs = body.gauge(&x)? + body.gauge(&y)?;
        Ok((lhs - g) / g)
    })?;
    Ok(margins.into_iter().fold(f64::INFINITY, f64::min))
}

pub fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s = norm(&v);
        if s > 1e-12 {
            return scaled(&v, 1.0 / s);
        }
    }
}

/// Closed-form `ρ_{P_ε}` of `½N(0, diag(1, ε)) + ½N(0, diag(ε, 1))`:
/// `ρ³ = Σ_i ½ det(2πΣ_i)^{-1/2} √(π/2) ‖Σ_i^{-1/2} u‖^{-3}`.
pub fn gmm_profile(eps: f64, grid: &Arc<SphericalGrid>) -> Result<RadialProfile> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported("the GMM family is planar".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("ε must be positive"));
    }
    let c = 0.5 * (2.0 * std::f64::consts::PI * eps.sqrt()).recip() * (std::f64::consts::PI / 2.0).sqrt();
    let values = grid
        .nodes()
        .map(|u| {
            let (a, b) = (u[0] * u[0], u[1] * u[1]);
            let q1 = a + b / eps;
            let q2 = a / eps + b;
            (c * (q1.powf(-1.5) + q2.powf(-1.5))).cbrt()
        })
        .collect();
    RadialProfile::new(grid.clone(), values, 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct BisectionStep {
    pub epsilon: f64,
    pub is_convex: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalEpsilon {
    pub epsilon: f64,
    pub trace: Vec<BisectionStep>,
}

/// Bisects the convex/nonconvex transition of the optimal GMM body in
/// `[lo, hi]`, assuming a single transition.
pub fn critical_epsilon_gmm(grid: &Arc<SphericalGrid>, lo: f64, hi: f64, tol: f64) -> Result<CriticalEpsilon> {
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::invalid("bisection needs 0 < lo < hi and tol > 0"));
    }
    let mut trace = Vec::new();
    let mut probe = |eps: f64| -> Result<bool> {
        let r = check_convexity(&optimal_body(&gmm_profile(eps, grid)?)?.k_star, 1, 0)?;
        trace.push(BisectionStep { epsilon: eps, is_convex: r.is_convex, margin: r.margin });
        Ok(r.is_convex)
    };
    let (c_lo, c_hi) = (probe(lo)?, probe(hi)?);
    if c_lo == c_hi {
        return Err(Error::NoSignChange { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if probe(m)? == c_lo {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(CriticalEpsilon { epsilon: 0.5 * (a + b), trace })
}

/// Directional-max estimate of the support of the samples, as a grid body
/// containing every sample.
///
/// In the plane each sample raises the two vertices of its polygon edge far
/// enough that the chord passes outside it. In higher dimension each sample
/// raises its 8 nearest nodes, whose weighted average defines the radial
/// function there. Nodes no sample reaches take the value of the nearest node
/// that was reached.
pub fn support_body(samples: &SampleSet, grid: &Arc<SphericalGrid>) -> Result<StarBody> {
    check_dim(samples.dim(), grid.dim())?;
    if samples.len() < samples.dim() {
        return Err(Error::Empty("support body needs at least d samples".into()));
    }
    let n = grid.len();
    let mut rho = vec![0.0f64; n];
    for x in samples.rows() {
        let r = norm(x);
        if r == 0.0 {
            continue;
        }
        if grid.dim() == 2 {
            let h = grid.step();
            let (j, t) = grid.locate_angle(x[1].atan2(x[0]));
            let need = r * ((h * (1.0 - t)).sin() + (h * t).sin()) / h.sin();
            rho[j] = rho[j].max(need);
            let k = (j + 1) % n;
            rho[k] = rho[k].max(need);
        } else {
            let u = scaled(x, 1.0 / r);
            for (k, _) in grid.neighbors(&u, 8) {
                rho[k] = rho[k].max(r * (1.0 + 1e-12));
            }
        }
    }
    let filled: Vec<usize> = (0..n).filter(|&j| rho[j] > 0.0).collect();
    if filled.is_empty() {
        return Err(Error::Empty("all samples are zero".into()));
    }
    let source = rho.clone();
    for j in 0..n {
        if source[j] == 0.0 {
            let k = if grid.dim() == 2 {
                *filled.iter().min_by_key(|&&k| cyclic_distance(j, k, n)).unwrap()
            } else {
                let u = grid.node(j);
                *filled
                    .iter()
                    .max_by(|&&a, &&b| {
                        crate::vecmath::dot(u, grid.node(a)).total_cmp(&crate::vecmath::dot(u, grid.node(b)))
                    })
                    .unwrap()
            };
            rho[j] = source[k];
        }
    }
    StarBody::radial_grid(grid.clone(), rho)
}

fn cyclic_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}
