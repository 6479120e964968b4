//! Repeatable experiments over seeded draws. Every arm derives its own seed
//! from the experiment seed and its index, so results do not depend on the
//! thread count or on which arms run.

use std::sync::Arc;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::{fit, FitConfig};
use crate::density::{
    rho_analytic, risk_from_profile, sample_density_seeded, DensitySpec, QuadratureSettings, SampleSet,
};
use crate::error::{Error, Result};
use crate::geometry::{self, StarBody};
use crate::grid::SphericalGrid;
use crate::optimizer::optimal_body;
use crate::vecmath::norm;

/// Deterministic child seed: splitmix64 of `seed` mixed with `k`.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(k))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("slope needs at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Numerical("log-log slope needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope needs distinct x values"));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub m: Vec<usize>,
    /// Radial distance from each fit to the population optimum.
    pub distances: Vec<f64>,
    pub empirical_risks: Vec<f64>,
    /// Population risk of the optimum.
    pub optimal_risk: f64,
}

impl ConvergenceReport {
    pub fn decreased(&self) -> bool {
        match (self.distances.first(), self.distances.last()) {
            (Some(a), Some(b)) => b < a,
            _ => false,
        }
    }
}

/// Fits `cfg.family` on fresh draws of each size and measures the radial
/// distance to `K★` of the analytic profile at `α = 1`.
pub fn convergence_experiment(
    spec: &DensitySpec,
    cfg: &FitConfig,
    m_schedule: &[usize],
    seed: u64,
    grid: &Arc<SphericalGrid>,
) -> Result<ConvergenceReport> {
    let profile = rho_analytic(spec, grid, 1.0, QuadratureSettings::default())?;
    let opt = optimal_body(&profile)?;
    let mut distances = Vec::with_capacity(m_schedule.len());
    let mut empirical_risks = Vec::with_capacity(m_schedule.len());
    for (i, &m) in m_schedule.iter().enumerate() {
        let s = sample_density_seeded(spec, m, sub_seed(seed, i as u64))?;
        let r = fit(&s, &FitConfig { seed: sub_seed(seed, 1000 + i as u64), ..*cfg })?;
        distances.push(geometry::radial_distance(&r.body, &opt.k_star, grid)?);
        empirical_risks.push(r.empirical_risk);
    }
    Ok(ConvergenceReport { m: m_schedule.to_vec(), distances, empirical_risks, optimal_risk: opt.achieved_risk })
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnReport {
    pub m: Vec<usize>,
    /// `max_K |F(K; P_m) - F(K; P)|` for each sample size.
    pub sup_deviation: Vec<f64>,
    /// `F(K; P)` per body, from the profile quadrature.
    pub population: Vec<f64>,
}

/// Uniform law of large numbers over a finite family of bodies.
pub fn uniform_lln_probe(
    spec: &DensitySpec,
    bodies: &[StarBody],
    m_schedule: &[usize],
    seed: u64,
    grid: &Arc<SphericalGrid>,
) -> Result<LlnReport> {
    if bodies.is_empty() {
        return Err(Error::invalid("the body family is empty"));
    }
    let profile = rho_analytic(spec, grid, 1.0, QuadratureSettings::default())?;
    let population = bodies.iter().map(|k| risk_from_profile(k, &profile)).collect::<Result<Vec<_>>>()?;
    let mut sup_deviation = Vec::with_capacity(m_schedule.len());
    for (i, &m) in m_schedule.iter().enumerate() {
        let s = sample_density_seeded(spec, m, sub_seed(seed, i as u64))?;
        let mut sup = 0.0f64;
        for (k, f) in bodies.iter().zip(&population) {
            sup = sup.max((super::empirical_risk(k, &s)? - f).abs());
        }
        sup_deviation.push(sup);
    }
    Ok(LlnReport { m: m_schedule.to_vec(), sup_deviation, population })
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub sup_deviation: f64,
    /// `σ E‖z‖ / r`
    pub bound: f64,
    /// Four standard errors of the sampled noise norm, scaled like the bound.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseReport {
    pub r: f64,
    pub m: usize,
    pub family_size: usize,
    pub noise_mean_norm: f64,
    /// True when `E‖z‖` came from the standard Gaussian closed form.
    pub closed_form_mean: bool,
    pub rows: Vec<NoiseRow>,
}

impl NoiseReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Compares `F(K; P_m)` with `F(K; (P * Q_σ)_m)` on the same base draw, the
/// noisy set being `x_i + σ z_i`.
#[allow(clippy::too_many_arguments)]
pub fn noise_robustness(
    spec: &DensitySpec,
    bodies: &[StarBody],
    r: f64,
    sigmas: &[f64],
    noise: &DensitySpec,
    m: usize,
    seed: u64,
    grid: &SphericalGrid,
) -> Result<NoiseReport> {
    if !(r > 0.0) {
        return Err(Error::invalid("inner radius r must be positive"));
    }
    if bodies.is_empty() {
        return Err(Error::invalid("the body family is empty"));
    }
    for (i, k) in bodies.iter().enumerate() {
        let lo = geometry::min_radial(k, grid)?;
        if lo < r - 1e-9 {
            return Err(Error::invalid(format!("body {i} does not contain r·B: min radial {lo} < {r}")));
        }
    }
    if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::invalid("noise levels must be nonnegative"));
    }
    let x = sample_density_seeded(spec, m, sub_seed(seed, 0))?;
    let z = sample_density_seeded(noise, m, sub_seed(seed, 1))?;
    let norms: Vec<f64> = z.rows().map(norm).collect();
    let mean = norms.iter().sum::<f64>() / m as f64;
    let sd = (norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m.max(2) - 1) as f64).sqrt();
    let (noise_mean_norm, closed_form_mean) = match standard_gaussian_mean_norm(noise) {
        Some(v) => (v, true),
        None => {
            let big = sample_density_seeded(noise, 1_000_000, sub_seed(seed, 2))?;
            (big.mean_norm(), false)
        }
    };
    let base: Vec<f64> = bodies.iter().map(|k| super::empirical_risk(k, &x)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let sup_deviation = if sigma == 0.0 {
            0.0
        } else {
            let y = x.perturbed(&z, sigma)?;
            let mut sup = 0.0f64;
            for (k, f) in bodies.iter().zip(&base) {
                sup = sup.max((super::empirical_risk(k, &y)? - f).abs());
            }
            sup
        };
        let bound = sigma * noise_mean_norm / r;
        let slack = 4.0 * sigma * sd / (r * (m as f64).sqrt());
        rows.push(NoiseRow { sigma, sup_deviation, bound, slack, pass: sup_deviation <= bound + slack });
    }
    Ok(NoiseReport { r, m, family_size: bodies.len(), noise_mean_norm, closed_form_mean, rows })
}

/// `E‖z‖ = √2 Γ((d+1)/2) / Γ(d/2)` when `noise` is `N(0, I)`.
fn standard_gaussian_mean_norm(noise: &DensitySpec) -> Option<f64> {
    let DensitySpec::Gaussian { mean, covariance } = noise else { return None };
    let d = mean.len();
    let identity = covariance.shape() == (d, d)
        && (0..d).all(|i| (0..d).all(|j| covariance[(i, j)] == if i == j { 1.0 } else { 0.0 }));
    if !identity || mean.iter().any(|v| *v != 0.0) {
        return None;
    }
    let h = d as f64 / 2.0;
    Some(std::f64::consts::SQRT_2 * (ln_gamma(h + 0.5) - ln_gamma(h)).exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub m: Vec<usize>,
    /// `|train - held-out|` per size, one entry per trial.
    pub gaps: Vec<Vec<f64>>,
    pub mean_gap: Vec<f64>,
    pub mean_risk: Vec<f64>,
    pub slope: f64,
    /// Whether the slope lies in `[-0.65, -0.35]`.
    pub consistent_with_root_m: bool,
}

/// Train/held-out gaps with a held-out set of `10 m` samples per trial.
pub fn generalization_gap(
    spec: &DensitySpec,
    cfg: &FitConfig,
    m_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<GapReport> {
    if trials == 0 || m_list.is_empty() {
        return Err(Error::invalid("need at least one trial and one sample size"));
    }
    let mut gaps = Vec::with_capacity(m_list.len());
    let mut mean_gap = Vec::with_capacity(m_list.len());
    let mut mean_risk = Vec::with_capacity(m_list.len());
    for (i, &m) in m_list.iter().enumerate() {
        let mut row = Vec::with_capacity(trials);
        let mut risk = 0.0;
        for t in 0..trials {
            let arm = sub_seed(seed, (i * trials + t) as u64);
            let train = sample_density_seeded(spec, m, sub_seed(arm, 0))?;
            let held: SampleSet = sample_density_seeded(spec, 10 * m, sub_seed(arm, 1))?;
            let rep = fit(&train, &FitConfig { seed: sub_seed(arm, 2), ..*cfg })?.with_held_out(&held)?;
            row.push(rep.gap.unwrap_or(0.0));
            risk += rep.held_out_risk.unwrap_or(rep.empirical_risk);
        }
        mean_gap.push(row.iter().sum::<f64>() / trials as f64);
        mean_risk.push(risk / trials as f64);
        gaps.push(row);
    }
    let xs: Vec<f64> = m_list.iter().map(|m| *m as f64).collect();
    let slope = if m_list.len() >= 2 { log_log_slope(&xs, &mean_gap)? } else { f64::NAN };
    Ok(GapReport {
        m: m_list.to_vec(),
        gaps,
        mean_gap,
        mean_risk,
        slope,
        consistent_with_root_m: (-0.65..=-0.35).contains(&slope),
    })
}
