//! Data sources and the radial statistic `ρ_P`.
//!
//! A data source is either an analytic [`DensitySpec`] or a finite
//! [`SampleSet`]. Both reduce to a [`RadialProfile`], the values of
//! `ρ_{P,α}(u) = (∫₀^∞ r^{d+α-1} p(ru) dr)^{1/(d+α)}` on a spherical grid.

mod rho;
mod sample;
mod spec;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use rho::{rho_analytic, rho_empirical, QuadratureSettings, DEFAULT_BANDWIDTH};
pub use sample::{sample_density, sample_density_seeded};
pub use spec::{DensitySpec, Harmonic, Profile, ShellFunction};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::geometry::StarBody;
use crate::grid::SphericalGrid;
use crate::vecmath::norm;

/// Where a sample set came from, for reports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSource {
    pub path: Option<String>,
    pub seed: Option<u64>,
}

/// `m` points in `ℝ^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    points: Vec<f64>,
    pub source: SampleSource,
}

impl SampleSet {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("sample dimension must be at least 2"));
        }
        if points.is_empty() {
            return Err(Error::Empty("sample set".into()));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::invalid("point buffer is not a multiple of the dimension"));
        }
        check_finite(&points)?;
        Ok(SampleSet { dim, points, source: SampleSource::default() })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).ok_or_else(|| Error::Empty("sample set".into()))?;
        for r in rows {
            check_dim(dim, r.len())?;
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn with_source(mut self, source: SampleSource) -> Self {
        self.source = source;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Sub-collection of the given row indices.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut pts = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            pts.extend_from_slice(self.row(i));
        }
        Self::new(self.dim, pts)
    }

    /// Every point multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        SampleSet { dim: self.dim, points: self.points.iter().map(|x| x * t).collect(), source: self.source.clone() }
    }

    /// Every point mapped through `q` (d×d).
    pub fn transformed(&self, q: &DMatrix<f64>) -> Result<Self> {
        check_dim(self.dim, q.ncols())?;
        let mut pts = Vec::with_capacity(self.points.len());
        for x in self.rows() {
            for i in 0..q.nrows() {
                pts.push((0..self.dim).map(|j| q[(i, j)] * x[j]).sum());
            }
        }
        Self::new(q.nrows(), pts)
    }

    /// Row-wise sum `self + scale·other`.
    pub fn perturbed(&self, other: &SampleSet, scale: f64) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        if self.len() != other.len() {
            return Err(Error::invalid("sample sets differ in length"));
        }
        let pts = self.points.iter().zip(&other.points).map(|(a, b)| a + scale * b).collect();
        Self::new(self.dim, pts)
    }

    pub fn concat(&self, other: &SampleSet) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Self::new(self.dim, pts)
    }

    pub fn mean_norm(&self) -> f64 {
        self.rows().map(norm).sum::<f64>() / self.len() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for x in self.rows() {
            for (a, b) in m.iter_mut().zip(x) {
                *a += b;
            }
        }
        m.iter().map(|v| v / self.len() as f64).collect()
    }

    /// Second-moment matrix `(1/m) Σ x xᵀ`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut s = DMatrix::zeros(d, d);
        for x in self.rows() {
            for i in 0..d {
                for j in 0..d {
                    s[(i, j)] += x[i] * x[j];
                }
            }
        }
        s / self.len() as f64
    }
}

/// Values of `ρ_{P,α}` on the nodes of a grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    grid: Arc<SphericalGrid>,
    values: Vec<f64>,
    alpha: f64,
}

impl RadialProfile {
    pub fn new(grid: Arc<SphericalGrid>, values: Vec<f64>, alpha: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("profile length differs from grid"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Numerical(format!("radial statistic must be positive and finite, got {v}")));
        }
        validate_alpha(alpha)?;
        Ok(RadialProfile { grid, values, alpha })
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `max / min` of the values; 1 for a constant profile.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.values.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        hi / lo
    }

    /// Largest relative deviation from the mean value.
    pub fn max_relative_deviation(&self) -> f64 {
        let mean = self.values.iter().sum::<f64>() / self.values.len() as f64;
        self.values.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max)
    }

    /// The summary body `L_P` with this profile as its radial function.
    pub fn to_body(&self) -> Result<StarBody> {
        StarBody::radial_grid(self.grid.clone(), self.values.clone())
    }
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if (1.0..=8.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::invalid(format!("homogeneity degree α must lie in [1, 8], got {alpha}")))
    }
}

/// A data source for risk evaluations.
#[derive(Debug, Clone, Copy)]
pub enum Data<'a> {
    Samples(&'a SampleSet),
    Density(&'a DensitySpec),
}

impl<'a> From<&'a SampleSet> for Data<'a> {
    fn from(s: &'a SampleSet) -> Self {
        Data::Samples(s)
    }
}

impl<'a> From<&'a DensitySpec> for Data<'a> {
    fn from(s: &'a DensitySpec) -> Self {
        Data::Density(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo { samples: 100_000, seed: 0 }
    }
}

/// A mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub std_error: f64,
    pub count: usize,
}

/// `F(K; P) = E_P ‖x‖_K^α`. Exact empirical mean for a sample set; a Monte
/// Carlo estimate for an analytic density.
pub fn expected_gauge(body: &StarBody, data: Data<'_>, alpha: f64, mc: MonteCarlo) -> Result<RiskEstimate> {
    validate_alpha(alpha)?;
    match data {
        Data::Samples(s) => empirical_risk(body, s, alpha),
        Data::Density(spec) => {
            let s = sample_density_seeded(spec, mc.samples, mc.seed)?;
            empirical_risk(body, &s, alpha)
        }
    }
}

/// Gauge of every sample under `body`.
pub fn gauges(body: &StarBody, samples: &SampleSet) -> Result<Vec<f64>> {
    check_dim(body.dim(), samples.dim())?;
    crate::par::try_map_indexed(samples.len(), |i| body.gauge(samples.row(i)))
}

fn empirical_risk(body: &StarBody, samples: &SampleSet, alpha: f64) -> Result<RiskEstimate> {
    let g = gauges(body, samples)?;
    let vals: Vec<f64> = if alpha == 1.0 { g } else { g.into_iter().map(|v| v.powf(alpha)).collect() };
    Ok(mean_and_error(&vals))
}

pub(crate) fn mean_and_error(vals: &[f64]) -> RiskEstimate {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    RiskEstimate { value: mean, std_error: (var / n as f64).sqrt(), count: n }
}

/// Population risk from a profile: `Σ_j w_j ρ_K(u_j)^{-α} ρ_P(u_j)^{d+α} = d Ṽ_{-α}(K, L_P)`.
pub fn risk_from_profile(body: &StarBody, profile: &RadialProfile) -> Result<f64> {
    let grid = profile.grid();
    let rk = body.radial_values(grid)?;
    let a = profile.alpha();
    let d = grid.dim() as f64;
    Ok(grid
        .weights()
        .iter()
        .zip(rk.iter().zip(profile.values()))
        .map(|(w, (k, p))| w * k.powf(-a) * p.powf(d + a))
        .sum())
}
