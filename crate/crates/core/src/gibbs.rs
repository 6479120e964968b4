//! Gibbs densities `p_K(x) = exp(-‖x‖_K^α) / Z_K`.
//!
//! By the layer-cake formula `Z_K = vol(K)·Γ(d/α + 1)`, so for `α = 1` the
//! normalizer is `vol(K)·Γ(d+1)`. The general-`α` normalizer is provided but
//! the sampler only handles `α = 1`.

use std::f64::consts::PI;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::density::{expected_gauge, validate_alpha, Data, MonteCarlo, SampleSet, SampleSource};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{self, StarBody};
use crate::grid::SphericalGrid;
use crate::vecmath::norm;

/// A Gibbs density with its normalizer cached at construction.
#[derive(Debug, Clone)]
pub struct GibbsDensity {
    body: StarBody,
    alpha: f64,
    log_z: f64,
}

impl GibbsDensity {
    pub fn new(body: StarBody, alpha: f64, grid: &SphericalGrid) -> Result<Self> {
        let log_z = log_normalizer_alpha(&body, alpha, grid)?;
        Ok(GibbsDensity { body, alpha, log_z })
    }

    /// The member of the dilation family with `vol(K) = 1`, equivalently
    /// `Z_K = Γ(d/α + 1)`.
    pub fn standardized(body: &StarBody, alpha: f64, grid: &SphericalGrid) -> Result<Self> {
        Self::new(geometry::volume_normalize(body, grid)?, alpha, grid)
    }

    pub fn body(&self) -> &StarBody {
        &self.body
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        Ok(-self.body.gauge(x)?.powf(self.alpha) - self.log_z)
    }

    /// Cross-entropy `E_P[‖x‖_K^α] + log Z_K`.
    pub fn nll(&self, data: Data<'_>, mc: MonteCarlo) -> Result<f64> {
        Ok(expected_gauge(&self.body, data, self.alpha, mc)?.value + self.log_z)
    }

    pub fn sample(&self, n: usize, seed: u64, grid: &SphericalGrid) -> Result<SampleSet> {
        if self.alpha != 1.0 {
            return Err(Error::Unsupported(format!("Gibbs sampling needs α = 1, got {}", self.alpha)));
        }
        sample_gibbs(&self.body, n, seed, grid)
    }
}

/// `log(vol(K)·Γ(d+1))`.
pub fn log_normalizer(body: &StarBody, grid: &SphericalGrid) -> Result<f64> {
    log_normalizer_alpha(body, 1.0, grid)
}

/// `log(vol(K)·Γ(d/α + 1))`. Experimental for `α ≠ 1`.
pub fn log_normalizer_alpha(body: &StarBody, alpha: f64, grid: &SphericalGrid) -> Result<f64> {
    validate_alpha(alpha)?;
    let d = body.dim() as f64;
    Ok(geometry::volume(body, grid)?.ln() + ln_gamma(d / alpha + 1.0))
}

/// `E_P‖x‖_K + log Z_K` for `α = 1`.
pub fn nll(body: &StarBody, data: Data<'_>, grid: &SphericalGrid, mc: MonteCarlo) -> Result<f64> {
    Ok(expected_gauge(body, data, 1.0, mc)?.value + log_normalizer(body, grid)?)
}

/// `λ_K = E_P‖x‖_K / d`, the dilate of `K` with minimal cross-entropy.
pub fn optimal_dilate(body: &StarBody, data: Data<'_>, mc: MonteCarlo) -> Result<f64> {
    let m = expected_gauge(body, data, 1.0, mc)?.value;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Numerical(format!("mean gauge must be positive and finite, got {m}")));
    }
    Ok(m / body.dim() as f64)
}

/// Polar sampler for `p_K` with `α = 1`: a direction `u` drawn over the grid
/// nodes with probability `∝ w_j ρ_K(u_j)^d`, jittered within its cell, and a
/// radius `s = ρ_K(u)·G` with `G ~ Gamma(d, 1)`. The gauges `‖x‖_K = G` are
/// exactly Gamma distributed whatever the grid.
pub fn sample_gibbs(body: &StarBody, n: usize, seed: u64, grid: &SphericalGrid) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let d = body.dim();
    check_dim(d, grid.dim())?;
    let rho = body.radial_values(grid)?;
    let probs: Vec<f64> = rho.iter().zip(grid.weights()).map(|(r, w)| w * r.powi(d as i32)).collect();
    let index = WeightedIndex::new(&probs).map_err(|e| Error::Numerical(e.to_string()))?;
    let gamma = Gamma::new(d as f64, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
    // angular half-width of a cell for d ≥ 3: the cap of solid angle area/n
    let jitter = if d == 2 {
        grid.step()
    } else {
        (grid.total_weight() / grid.len() as f64).powf(1.0 / (d as f64 - 1.0)) / PI.sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n * d);
    for _ in 0..n {
        let j = index.sample(&mut rng);
        let u = if d == 2 {
            let t = grid.angle(j) + (rng.random::<f64>() - 0.5) * jitter;
            vec![t.cos(), t.sin()]
        } else {
            let v: Vec<f64> = grid.node(j).iter().map(|c| c + jitter * rng.sample::<f64, _>(StandardNormal)).collect();
            let s = norm(&v);
            v.iter().map(|c| c / s).collect()
        };
        let s = body.radial(&u)? * gamma.sample(&mut rng);
        pts.extend(u.iter().map(|c| c * s));
    }
    Ok(SampleSet::new(d, pts)?.with_source(SampleSource { path: None, seed: Some(seed) }))
}

/// Kolmogorov–Smirnov distance between `values` and the Gamma(k, 1) law, for
/// integer shape `k`.
pub fn ks_gamma(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let cdf = |x: f64| {
        // 1 - e^{-x} Σ_{i<k} x^i / i!
        let (mut term, mut s) = (1.0, 0.0);
        for i in 0..k {
            if i > 0 {
                term *= x / i as f64;
            }
            s += term;
        }
        1.0 - (-x).exp() * s
    };
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
