//! Browser bindings for three demo operations: the optimal body of the
//! planar Gaussian mixture, the optimal ellipse of a Gaussian (analytic and
//! from samples), and the critical mixture parameter.

use std::sync::Arc;

use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

use starbody::density::{
    rho_analytic, rho_empirical, sample_density_seeded, DensitySpec, QuadratureSettings, RadialProfile,
};
use starbody::io::boundary_points;
use starbody::optimizer::{check_convexity, critical_epsilon_gmm, gmm_profile, optimal_body};
use starbody::{Result, SphericalGrid};

/// Boundary of an optimal body with its convexity verdict.
#[wasm_bindgen]
pub struct Outline {
    points: Vec<f64>,
    convex: bool,
    margin: f64,
    risk: f64,
}

#[wasm_bindgen]
impl Outline {
    /// Interleaved `x, y` boundary coordinates, one pair per grid node.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn convex(&self) -> bool {
        self.convex
    }

    #[wasm_bindgen(getter)]
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Expected gauge of the body under the source distribution.
    #[wasm_bindgen(getter)]
    pub fn risk(&self) -> f64 {
        self.risk
    }
}

fn js(e: starbody::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn grid(nodes: usize) -> Result<Arc<SphericalGrid>> {
    Ok(Arc::new(SphericalGrid::uniform2d(nodes)?))
}

fn outline(profile: &RadialProfile) -> Result<Outline> {
    let r = optimal_body(profile)?;
    let c = check_convexity(&r.k_star, 1, 0)?;
    let points = boundary_points(&r.k_star, profile.grid())?.into_iter().flatten().collect();
    Ok(Outline { points, convex: c.is_convex, margin: c.margin, risk: r.achieved_risk })
}

fn covariance(s11: f64, s12: f64, s22: f64) -> Result<DensitySpec> {
    DensitySpec::centered_gaussian(DMatrix::from_row_slice(2, 2, &[s11, s12, s12, s22]))
}

pub fn gmm_outline(eps: f64, nodes: usize) -> Result<Outline> {
    outline(&gmm_profile(eps, &grid(nodes)?)?)
}

pub fn gaussian_outline(s11: f64, s12: f64, s22: f64, nodes: usize) -> Result<Outline> {
    let spec = covariance(s11, s12, s22)?;
    outline(&rho_analytic(&spec, &grid(nodes)?, 1.0, QuadratureSettings::default())?)
}

pub fn sampled_gaussian_outline(
    s11: f64,
    s12: f64,
    s22: f64,
    m: usize,
    seed: u64,
    bandwidth: f64,
    nodes: usize,
) -> Result<Outline> {
    let x = sample_density_seeded(&covariance(s11, s12, s22)?, m, seed)?;
    outline(&rho_empirical(&x, &grid(nodes)?, bandwidth)?)
}

/// Optimal body for `½N(0, diag(1, ε)) + ½N(0, diag(ε, 1))`.
#[wasm_bindgen(js_name = gmmOptimal)]
pub fn gmm_optimal(eps: f64, nodes: usize) -> std::result::Result<Outline, JsError> {
    gmm_outline(eps, nodes).map_err(js)
}

/// Optimal ellipse for `N(0, Σ)`.
#[wasm_bindgen(js_name = gaussianOptimal)]
pub fn gaussian_optimal(s11: f64, s12: f64, s22: f64, nodes: usize) -> std::result::Result<Outline, JsError> {
    gaussian_outline(s11, s12, s22, nodes).map_err(js)
}

/// The same body estimated from `m` samples.
#[wasm_bindgen(js_name = gaussianSampled)]
pub fn gaussian_sampled(
    s11: f64,
    s12: f64,
    s22: f64,
    m: usize,
    seed: u32,
    bandwidth: f64,
    nodes: usize,
) -> std::result::Result<Outline, JsError> {
    sampled_gaussian_outline(s11, s12, s22, m, seed as u64, bandwidth, nodes).map_err(js)
}

/// Smallest ε in `[0.05, 0.95]` whose optimal body is convex.
#[wasm_bindgen(js_name = criticalEpsilon)]
pub fn critical_epsilon(nodes: usize, tol: f64) -> std::result::Result<f64, JsError> {
    let g = grid(nodes).map_err(js)?;
    critical_epsilon_gmm(&g, 0.05, 0.95, tol).map(|c| c.epsilon).map_err(js)
}
