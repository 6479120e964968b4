use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{self, StarBody};
use crate::grid::SphericalGrid;
use crate::vecmath::{norm, sphere_area};

/// Radial profile `ψ` of a gauge-induced density `p(x) = c·ψ(‖x‖_L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `exp(-t)`
    Exponential,
    /// `exp(-t²/2)`
    HalfGaussian,
    /// `1{t ≤ 1}`
    Indicator,
    /// `(1 + t)^{-s}`; integrable against `t^k` only when `s > k + 1`.
    PowerLaw { exponent: f64 },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Exponential => (-t).exp(),
            Profile::HalfGaussian => (-0.5 * t * t).exp(),
            Profile::Indicator => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::PowerLaw { exponent } => (1.0 + t).powf(-exponent),
        }
    }

    /// Closed form of `∫₀^∞ t^k ψ(t) dt`.
    pub fn moment(&self, k: f64) -> Result<f64> {
        use statrs::function::gamma::{gamma, ln_gamma};
        Ok(match *self {
            Profile::Exponential => gamma(k + 1.0),
            Profile::HalfGaussian => 2f64.powf((k - 1.0) / 2.0) * gamma((k + 1.0) / 2.0),
            Profile::Indicator => 1.0 / (k + 1.0),
            Profile::PowerLaw { exponent: s } => {
                if s <= k + 1.0 {
                    return Err(Error::NonIntegrable(format!(
                        "power-law profile with exponent {s} has no finite moment of order {k}"
                    )));
                }
                (ln_gamma(k + 1.0) + ln_gamma(s - k - 1.0) - ln_gamma(s)).exp()
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            Profile::Exponential => "exp".into(),
            Profile::HalfGaussian => "half_gaussian".into(),
            Profile::Indicator => "indicator".into(),
            Profile::PowerLaw { exponent } => format!("power_law:{exponent}"),
        }
    }
}

/// One Fourier term `a cos(kθ) + b sin(kθ)` of a planar shell function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    pub cos: f64,
    pub sin: f64,
}

/// A bounded nonnegative function `f` on the sphere, the inner boundary of the
/// shell `A_f = { f(x/|x|) ≤ |x| ≤ (1 + f^{d+1})^{1/(d+1)} }`. Harmonics are
/// only meaningful in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellFunction {
    pub base: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
}

impl ShellFunction {
    pub fn constant(base: f64) -> Self {
        ShellFunction { base, harmonics: Vec::new() }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        if self.harmonics.is_empty() {
            return self.base.max(0.0);
        }
        let theta = u[1].atan2(u[0]);
        let v = self.harmonics.iter().fold(self.base, |acc, h| {
            let k = h.order as f64;
            acc + h.cos * (k * theta).cos() + h.sin * (k * theta).sin()
        });
        v.max(0.0)
    }

    pub fn outer(&self, u: &[f64], d: usize) -> f64 {
        let f = self.eval(u);
        (1.0 + f.powi(d as i32 + 1)).powf(1.0 / (d as f64 + 1.0))
    }

    /// An upper bound of `f` over the sphere.
    pub fn sup_bound(&self) -> f64 {
        let s: f64 = self.harmonics.iter().map(|h| h.cos.hypot(h.sin)).sum();
        (self.base + s).max(0.0)
    }
}

/// Analytic density descriptors.
#[derive(Debug, Clone)]
pub enum DensitySpec {
    Gaussian {
        mean: Vec<f64>,
        covariance: DMatrix<f64>,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<DensitySpec>,
    },
    UniformOverBody {
        body: StarBody,
    },
    /// `p(x) = normalization · ψ(‖x‖_L)`
    GaugeInduced {
        body: StarBody,
        profile: Profile,
        normalization: f64,
    },
    /// Uniform distribution over the shell `A_f`.
    UniformShell {
        dim: usize,
        inner: ShellFunction,
    },
}

impl DensitySpec {
    pub fn gaussian(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let s = DensitySpec::Gaussian { mean, covariance };
        s.validate()?;
        Ok(s)
    }

    pub fn centered_gaussian(covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        Self::gaussian(vec![0.0; d], covariance)
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        DensitySpec::Gaussian { mean: vec![0.0; dim], covariance: DMatrix::identity(dim, dim) }
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<DensitySpec>) -> Result<Self> {
        let s = DensitySpec::Mixture { weights, components };
        s.validate()?;
        Ok(s)
    }

    pub fn uniform_over_body(body: StarBody) -> Self {
        DensitySpec::UniformOverBody { body }
    }

    /// Gauge-induced density with its normalizing constant computed from
    /// `∫ ψ(‖x‖_L) dx = d·vol(L)·∫₀^∞ t^{d-1} ψ(t) dt`.
    pub fn gauge_induced(body: StarBody, profile: Profile, grid: &SphericalGrid) -> Result<Self> {
        let d = body.dim();
        let vol = geometry::volume(&body, grid)?;
        let z = d as f64 * vol * profile.moment(d as f64 - 1.0)?;
        Self::gauge_induced_with_normalization(body, profile, 1.0 / z)
    }

    /// Gauge-induced density with a caller-supplied constant, checked to
    /// integrate to one within 2% by Monte Carlo over directions.
    pub fn gauge_induced_with_normalization(body: StarBody, profile: Profile, normalization: f64) -> Result<Self> {
        if !(normalization > 0.0 && normalization.is_finite()) {
            return Err(Error::invalid("normalization must be positive"));
        }
        let mass = mc_total_mass(&body, profile, normalization)?;
        if (mass - 1.0).abs() > 0.02 {
            return Err(Error::invalid(format!("gauge-induced density integrates to {mass:.4}, not 1")));
        }
        Ok(DensitySpec::GaugeInduced { body, profile, normalization })
    }

    pub fn uniform_shell(dim: usize, inner: ShellFunction) -> Result<Self> {
        let s = DensitySpec::UniformShell { dim, inner };
        s.validate()?;
        Ok(s)
    }

    /// `½N(0, diag(1, ε)) + ½N(0, diag(ε, 1))` in the plane.
    pub fn gmm_cross(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::invalid("ε must be positive"));
        }
        let c1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, eps]);
        let c2 = DMatrix::from_row_slice(2, 2, &[eps, 0.0, 0.0, 1.0]);
        Self::mixture(vec![0.5, 0.5], vec![Self::centered_gaussian(c1)?, Self::centered_gaussian(c2)?])
    }

    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Gaussian { mean, .. } => mean.len(),
            DensitySpec::Mixture { components, .. } => components.first().map(|c| c.dim()).unwrap_or(0),
            DensitySpec::UniformOverBody { body } | DensitySpec::GaugeInduced { body, .. } => body.dim(),
            DensitySpec::UniformShell { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DensitySpec::Gaussian { mean, covariance } => {
                if mean.len() < 2 {
                    return Err(Error::invalid("dimension must be at least 2"));
                }
                check_dim(mean.len(), covariance.nrows())?;
                check_dim(mean.len(), covariance.ncols())?;
                if (covariance - covariance.transpose()).amax() > 1e-12 * covariance.amax().max(1.0) {
                    return Err(Error::invalid("covariance must be symmetric"));
                }
                if covariance.clone().cholesky().is_none() {
                    return Err(Error::invalid("covariance must be positive definite"));
                }
                Ok(())
            }
            DensitySpec::Mixture { weights, components } => {
                if components.is_empty() || weights.len() != components.len() {
                    return Err(Error::invalid("mixture needs one positive weight per component"));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::invalid("mixture weights must be positive"));
                }
                if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("mixture weights must sum to 1"));
                }
                let d = components[0].dim();
                for c in components {
                    check_dim(d, c.dim())?;
                    c.validate()?;
                }
                Ok(())
            }
            DensitySpec::UniformOverBody { .. } => Ok(()),
            DensitySpec::GaugeInduced { normalization, .. } => {
                if *normalization > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("normalization must be positive"))
                }
            }
            DensitySpec::UniformShell { dim, inner } => {
                if *dim < 2 {
                    return Err(Error::invalid("dimension must be at least 2"));
                }
                if *dim > 2 && !inner.harmonics.is_empty() {
                    return Err(Error::Unsupported("shell harmonics are only defined in the plane".into()));
                }
                if !(inner.base.is_finite() && inner.harmonics.iter().all(|h| h.cos.is_finite() && h.sin.is_finite())) {
                    return Err(Error::invalid("shell function must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Fails for Gaussians (or mixtures containing them) with nonzero mean.
    pub fn require_centered(&self) -> Result<()> {
        match self {
            DensitySpec::Gaussian { mean, .. } if mean.iter().any(|m| *m != 0.0) => {
                Err(Error::Unsupported("radial statistic needs centered Gaussians".into()))
            }
            DensitySpec::Mixture { components, .. } => components.iter().try_for_each(|c| c.require_centered()),
            _ => Ok(()),
        }
    }
}

fn mc_total_mass(body: &StarBody, profile: Profile, c: f64) -> Result<f64> {
    use rand::SeedableRng;
    let d = body.dim();
    let moment = profile.moment(d as f64 - 1.0)?;
    let n = 20_000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut acc = 0.0;
    for i in 0..n {
        let u: Vec<f64> = if d == 2 {
            // stratified angles
            let t = 2.0 * std::f64::consts::PI * (i as f64 + rng.random::<f64>()) / n as f64;
            vec![t.cos(), t.sin()]
        } else {
            loop {
                let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
                let s = norm(&v);
                if s > 1e-12 {
                    break v.iter().map(|x| x / s).collect();
                }
            }
        };
        acc += body.radial(&u)?.powi(d as i32);
    }
    Ok(c * moment * sphere_area(d) * acc / n as f64)
}
