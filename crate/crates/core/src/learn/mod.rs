//! Empirical risk minimization over parametric star-body families, and the
//! experiments that probe consistency, noise robustness and generalization.

mod dictionary;
mod ellipsoid;
mod experiments;
mod union;

use serde::{Deserialize, Serialize};

pub use dictionary::{fit_dictionary, inner_radius};
pub use ellipsoid::fit_ellipsoid;
pub use experiments::{
    convergence_experiment, generalization_gap, log_log_slope, noise_robustness, sub_seed, uniform_lln_probe,
    ConvergenceReport, GapReport, LlnReport, NoiseReport, NoiseRow,
};
pub use union::fit_union_ellipsoids;

use crate::density::{expected_gauge, Data, MonteCarlo, SampleSet};
use crate::error::{Error, Result};
use crate::geometry::StarBody;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Ellipsoid,
    Dictionary { p: usize },
    UnionEllipsoids { parts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub family: Family,
    pub max_iters: usize,
    /// Initial step of the dictionary line search.
    pub step_size: f64,
    /// Every fitted body must contain `r·B^d`.
    pub inner_width_floor: f64,
    /// Rescale ellipsoid and union fits to unit volume. Dictionaries keep
    /// unit columns instead.
    pub volume_normalization: bool,
    pub seed: u64,
    /// Relative risk decrease below which iteration stops.
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            family: Family::Ellipsoid,
            max_iters: 500,
            step_size: 1.0,
            inner_width_floor: 1e-3,
            volume_normalization: true,
            seed: 0,
            tol: 1e-10,
        }
    }
}

impl FitConfig {
    pub fn ellipsoid() -> Self {
        FitConfig::default()
    }

    pub fn dictionary(p: usize) -> Self {
        FitConfig { family: Family::Dictionary { p }, ..FitConfig::default() }
    }

    pub fn union_ellipsoids(parts: usize) -> Self {
        FitConfig { family: Family::UnionEllipsoids { parts }, ..FitConfig::default() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.inner_width_floor > 0.0) {
            return Err(Error::invalid("inner width floor r must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.step_size > 0.0) || !(self.tol >= 0.0) {
            return Err(Error::invalid("step size must be positive and tol nonnegative"));
        }
        match self.family {
            Family::Dictionary { p } if p < dim => {
                Err(Error::invalid(format!("dictionary needs p >= d = {dim}, got {p}")))
            }
            Family::UnionEllipsoids { parts: 0 } => Err(Error::invalid("union needs at least one part")),
            _ => Ok(()),
        }
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone)]
pub struct RiskReport {
    /// Empirical risk after each accepted iteration, starting from the
    /// initialization. Union traces are evaluated with quadrature volumes, so
    /// their last entry can differ from `empirical_risk` in the last digits.
    pub trace: Vec<f64>,
    pub body: StarBody,
    pub empirical_risk: f64,
    pub held_out_risk: Option<f64>,
    pub population_risk: Option<f64>,
    pub gap: Option<f64>,
    /// Clamps, reseeds and reinitializations, in order.
    pub events: Vec<String>,
    pub config: FitConfig,
}

impl RiskReport {
    /// Attaches the risk of the fitted body on held-out samples.
    pub fn with_held_out(mut self, held_out: &SampleSet) -> Result<Self> {
        let h = expected_gauge(&self.body, Data::Samples(held_out), 1.0, MonteCarlo::default())?.value;
        self.held_out_risk = Some(h);
        self.gap = Some((self.empirical_risk - h).abs());
        Ok(self)
    }

    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Dispatches on `cfg.family`.
pub fn fit(samples: &SampleSet, cfg: &FitConfig) -> Result<RiskReport> {
    match cfg.family {
        Family::Ellipsoid => fit_ellipsoid(samples, cfg),
        Family::Dictionary { .. } => fit_dictionary(samples, cfg),
        Family::UnionEllipsoids { .. } => fit_union_ellipsoids(samples, cfg),
    }
}

pub(crate) fn empirical_risk(body: &StarBody, samples: &SampleSet) -> Result<f64> {
    Ok(expected_gauge(body, Data::Samples(samples), 1.0, MonteCarlo::default())?.value)
}
