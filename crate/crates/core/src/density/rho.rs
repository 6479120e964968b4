use std::sync::Arc;

use nalgebra::DMatrix;

use super::spec::{DensitySpec, Profile, ShellFunction};
use super::{validate_alpha, RadialProfile, SampleSet};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{self, StarBody};
use crate::grid::SphericalGrid;
use crate::quadrature;
use crate::vecmath::{dot, norm};

/// Default angular bandwidth (radians) of the empirical kernel estimator.
pub const DEFAULT_BANDWIDTH: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { rel_tol: 1e-3 }
    }
}

/// Per-node evaluator of `∫₀^∞ r^k p(ru) dr`, with volumes precomputed.
enum Moment {
    Gaussian { inv_cov: DMatrix<f64>, scale: f64 },
    Mixture(Vec<(f64, Moment)>),
    Uniform { body: StarBody, inv_vol: f64 },
    Gauge { body: StarBody, profile: Profile, c: f64 },
    Shell { f: ShellFunction, dim: usize, inv_vol: f64 },
}

impl Moment {
    fn build(spec: &DensitySpec, grid: &SphericalGrid) -> Result<Self> {
        Ok(match spec {
            DensitySpec::Gaussian { covariance, .. } => {
                let d = covariance.nrows();
                let inv_cov =
                    covariance.clone().try_inverse().ok_or_else(|| Error::Numerical("singular covariance".into()))?;
                let det = covariance.determinant();
                let scale = ((2.0 * std::f64::consts::PI).powi(d as i32) * det).powf(-0.5);
                Moment::Gaussian { inv_cov, scale }
            }
            DensitySpec::Mixture { weights, components } => Moment::Mixture(
                weights
                    .iter()
                    .zip(components)
                    .map(|(w, c)| Ok((*w, Moment::build(c, grid)?)))
                    .collect::<Result<_>>()?,
            ),
            DensitySpec::UniformOverBody { body } => {
                Moment::Uniform { body: body.clone(), inv_vol: 1.0 / geometry::volume(body, grid)? }
            }
            DensitySpec::GaugeInduced { body, profile, normalization } => {
                Moment::Gauge { body: body.clone(), profile: *profile, c: *normalization }
            }
            DensitySpec::UniformShell { dim, inner } => {
                let d = *dim as i32;
                let vals: Vec<f64> =
                    grid.nodes().map(|u| inner.outer(u, *dim).powi(d) - inner.eval(u).powi(d)).collect();
                let vol = grid.integrate(&vals) / d as f64;
                Moment::Shell { f: inner.clone(), dim: *dim, inv_vol: 1.0 / vol }
            }
        })
    }

    fn eval(&self, u: &[f64], k: f64, tol: f64) -> Result<f64> {
        Ok(match self {
            Moment::Gaussian { inv_cov, scale } => {
                let d = u.len();
                let mut q = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        q += u[i] * inv_cov[(i, j)] * u[j];
                    }
                }
                let upper = gaussian_cutoff(k) / q.sqrt();
                let f = |r: f64| r.powf(k) * (-0.5 * q * r * r).exp();
                scale * quadrature::adaptive(&f, 0.0, upper, tol)
            }
            Moment::Mixture(parts) => {
                let mut s = 0.0;
                for (w, m) in parts {
                    s += w * m.eval(u, k, tol)?;
                }
                s
            }
            Moment::Uniform { body, inv_vol } => {
                let rho = body.radial(u)?;
                inv_vol * quadrature::adaptive(&|r: f64| r.powf(k), 0.0, rho, tol)
            }
            Moment::Gauge { body, profile, c } => {
                let g = body.gauge(u)?;
                let v = match profile {
                    Profile::Exponential => {
                        let f = |r: f64| r.powf(k) * (-r * g).exp();
                        quadrature::adaptive(&f, 0.0, (40.0 + 2.0 * k) / g, tol)
                    }
                    Profile::HalfGaussian => {
                        let f = |r: f64| r.powf(k) * (-0.5 * (r * g).powi(2)).exp();
                        quadrature::adaptive(&f, 0.0, gaussian_cutoff(k) / g, tol)
                    }
                    Profile::Indicator => quadrature::adaptive(&|r: f64| r.powf(k), 0.0, 1.0 / g, tol),
                    Profile::PowerLaw { exponent: s } => {
                        if *s <= k + 1.0 {
                            return Err(Error::NonIntegrable(format!(
                                "power-law exponent {s} needs to exceed {} for a finite radial moment",
                                k + 1.0
                            )));
                        }
                        // t = e^v: both tails decay exponentially in v
                        let lo = -36.0 / (k + 1.0);
                        let hi = 36.0 / (s - k - 1.0);
                        let f = |v: f64| (v * (k + 1.0)).exp() * (1.0 + v.exp()).powf(-s);
                        g.powf(-(k + 1.0)) * quadrature::adaptive(&f, lo, hi, tol)
                    }
                };
                c * v
            }
            Moment::Shell { f, dim, inv_vol } => {
                let (a, b) = (f.eval(u), f.outer(u, *dim));
                inv_vol * quadrature::adaptive(&|r: f64| r.powf(k), a, b, tol)
            }
        })
    }
}

/// Point beyond which `t^k e^{-t²/2}` carries negligible mass.
fn gaussian_cutoff(k: f64) -> f64 {
    10.0 + 2.0 * k.max(0.0).sqrt()
}

/// `ρ_{P,α}` of an analytic density on every node of `grid` by 1-D quadrature
/// along each ray.
pub fn rho_analytic(
    spec: &DensitySpec,
    grid: &Arc<SphericalGrid>,
    alpha: f64,
    quad: QuadratureSettings,
) -> Result<RadialProfile> {
    validate_alpha(alpha)?;
    spec.validate()?;
    spec.require_centered()?;
    check_dim(spec.dim(), grid.dim())?;
    if !(quad.rel_tol > 0.0) {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    let d = grid.dim() as f64;
    let k = d + alpha - 1.0;
    let moment = Moment::build(spec, grid)?;
    // inner tolerance well below the requested accuracy of the statistic
    let tol = (quad.rel_tol * 1e-3).min(1e-10);
    let values: Vec<f64> = (0..grid.len())
        .map(|j| moment.eval(grid.node(j), k, tol).map(|m| m.powf(1.0 / (d + alpha))))
        .collect::<Result<_>>()?;
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NonIntegrable(format!("radial statistic evaluated to {v}")));
    }
    RadialProfile::new(grid.clone(), values, alpha)
}

const CHUNK: usize = 2048;

/// Kernel estimate of `ρ_P` from samples:
/// `ρ(u_j)^{d+1} = (1/m) Σ_i ‖x_i‖ κ_h(u_j, x_i/‖x_i‖)` with
/// `κ_h(u, v) ∝ exp(cos∠(u,v)/h²)` normalized so that `Σ_j w_j κ_h(u_j, v) = 1`.
pub fn rho_empirical(samples: &SampleSet, grid: &Arc<SphericalGrid>, bandwidth: f64) -> Result<RadialProfile> {
    check_dim(samples.dim(), grid.dim())?;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let kept: Vec<usize> = (0..samples.len()).filter(|&i| norm(samples.row(i)) > 0.0).collect();
    if kept.is_empty() {
        return Err(Error::Empty("no nonzero samples".into()));
    }
    let dropped = samples.len() - kept.len();
    if dropped > 0 {
        log_warn(&format!("rho_empirical: dropped {dropped} zero-norm samples"));
    }
    let n = grid.len();
    let inv_h2 = 1.0 / (bandwidth * bandwidth);
    let nchunks = kept.len().div_ceil(CHUNK);
    let partials = crate::par::map_indexed(nchunks, |c| {
        let mut acc = vec![0.0; n];
        let mut kern = vec![0.0; n];
        for &i in &kept[c * CHUNK..((c + 1) * CHUNK).min(kept.len())] {
            let x = samples.row(i);
            let r = norm(x);
            let v: Vec<f64> = x.iter().map(|c| c / r).collect();
            let mut z = 0.0;
            for (j, u) in grid.nodes().enumerate() {
                let e = (dot(u, &v) - 1.0) * inv_h2;
                let kv = if e < -60.0 { 0.0 } else { e.exp() };
                kern[j] = kv;
                z += grid.weight(j) * kv;
            }
            let s = r / z;
            for (a, kv) in acc.iter_mut().zip(&kern) {
                *a += s * kv;
            }
        }
        acc
    });
    let mut total = vec![0.0; n];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let m = kept.len() as f64;
    let e = 1.0 / (grid.dim() as f64 + 1.0);
    let values: Vec<f64> = total.into_iter().map(|t| (t / m).powf(e)).collect();
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Numerical("kernel estimate vanished at some node; increase the bandwidth".into()));
    }
    RadialProfile::new(grid.clone(), values, 1.0)
}

fn log_warn(msg: &str) {
    #[cfg(not(target_arch = "wasm32"))]
    eprintln!("warning: {msg}");
    #[cfg(target_arch = "wasm32")]
    let _ = msg;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{sample_density_seeded, Harmonic};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<SphericalGrid> {
        Arc::new(SphericalGrid::uniform2d(n).unwrap())
    }

    /// det(2πΣ)^{-1/(2(d+1))} (∫ t^d e^{-t²/2} dt)^{1/(d+1)} / ‖Σ^{-1/2}u‖ for d = 2.
    fn gaussian_closed_form(sigma: [f64; 2], u: &[f64]) -> f64 {
        let det = (2.0 * PI).powi(2) * sigma[0] * sigma[1];
        let m2 = (PI / 2.0).sqrt();
        let q = (u[0] * u[0] / sigma[0] + u[1] * u[1] / sigma[1]).sqrt();
        det.powf(-1.0 / 6.0) * m2.powf(1.0 / 3.0) / q
    }

    #[test]
    fn standard_gaussian_profile() {
        let g = grid(256);
        let p = rho_analytic(&DensitySpec::standard_gaussian(2), &g, 1.0, QuadratureSettings::default()).unwrap();
        // oracle: ((2π)^{-1} √(π/2))^{1/3}
        let oracle = ((2.0 * PI).recip() * (PI / 2.0).sqrt()).powf(1.0 / 3.0);
        assert_relative_eq!(oracle, 0.5848, epsilon = 1e-3);
        for v in p.values() {
            assert_relative_eq!(*v, oracle, max_relative = 1e-9);
        }
    }

    #[test]
    fn anisotropic_gaussian_profile() {
        let g = grid(128);
        let spec = DensitySpec::centered_gaussian(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        let p = rho_analytic(&spec, &g, 1.0, QuadratureSettings::default()).unwrap();
        for (u, v) in g.nodes().zip(p.values()) {
            assert_relative_eq!(*v, gaussian_closed_form([4.0, 1.0], u), max_relative = 1e-9);
        }
    }

    #[test]
    fn uniform_disk_profile() {
        let g = grid(256);
        let spec = DensitySpec::uniform_over_body(StarBody::ball(2, 1.0).unwrap());
        let p = rho_analytic(&spec, &g, 1.0, QuadratureSettings::default()).unwrap();
        let c = (3.0 * PI).powf(-1.0 / 3.0);
        assert_relative_eq!(c, 0.4736, epsilon = 1e-3);
        for v in p.values() {
            assert_relative_eq!(*v, c, max_relative = 1e-10);
        }
    }

    #[test]
    fn gauge_induced_profile_is_proportional_to_body() {
        let g = grid(256);
        let body = StarBody::ellipsoid_diag(&[2.0, 0.6]).unwrap();
        for profile in
            [Profile::Exponential, Profile::HalfGaussian, Profile::Indicator, Profile::PowerLaw { exponent: 12.0 }]
        {
            let spec = DensitySpec::gauge_induced(body.clone(), profile, &g).unwrap();
            for alpha in [1.0, 2.0, 3.5] {
                let p = rho_analytic(&spec, &g, alpha, QuadratureSettings::default()).unwrap();
                let rl = body.radial_values(&g).unwrap();
                let ratios: Vec<f64> = p.values().iter().zip(&rl).map(|(a, b)| a / b).collect();
                for r in &ratios {
                    assert!((r / ratios[0] - 1.0).abs() < 1e-6, "{profile:?} α={alpha}");
                }
            }
        }
    }

    #[test]
    fn heavy_tail_is_rejected() {
        let g = grid(64);
        let body = StarBody::ball(2, 1.0).unwrap();
        let spec = DensitySpec::GaugeInduced { body, profile: Profile::PowerLaw { exponent: 3.5 }, normalization: 1.0 };
        // order d+α-1 = 2 is finite for s = 3.5, order 3 is not
        assert!(rho_analytic(&spec, &g, 1.0, QuadratureSettings::default()).is_ok());
        assert!(matches!(rho_analytic(&spec, &g, 2.0, QuadratureSettings::default()), Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn non_centered_gaussian_is_unsupported() {
        let g = grid(64);
        let spec = DensitySpec::gaussian(vec![0.5, 0.0], DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(rho_analytic(&spec, &g, 1.0, QuadratureSettings::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn shell_profiles_are_constant() {
        let g = grid(512);
        let f = ShellFunction { base: 0.3, harmonics: vec![Harmonic { order: 4, cos: 0.2, sin: 0.0 }] };
        let spec = DensitySpec::uniform_shell(2, f).unwrap();
        let p = rho_analytic(&spec, &g, 1.0, QuadratureSettings::default()).unwrap();
        assert!(p.max_relative_deviation() < 1e-9);
    }

    #[test]
    fn mixture_profile_is_additive_in_power() {
        let g = grid(128);
        let a = DensitySpec::centered_gaussian(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.2])).unwrap();
        let b = DensitySpec::uniform_over_body(StarBody::l1_ball(2).unwrap());
        let mix = DensitySpec::mixture(vec![0.3, 0.7], vec![a.clone(), b.clone()]).unwrap();
        let q = QuadratureSettings::default();
        let (pa, pb, pm) = (
            rho_analytic(&a, &g, 1.0, q).unwrap(),
            rho_analytic(&b, &g, 1.0, q).unwrap(),
            rho_analytic(&mix, &g, 1.0, q).unwrap(),
        );
        for j in 0..g.len() {
            let lhs = pm.values()[j].powi(3);
            let rhs = 0.3 * pa.values()[j].powi(3) + 0.7 * pb.values()[j].powi(3);
            assert!((lhs - rhs).abs() < 1e-9 * rhs);
        }
    }

    #[test]
    fn three_dimensional_gaussian_profile() {
        let g = Arc::new(SphericalGrid::quasi_uniform(3, 200).unwrap());
        let p = rho_analytic(&DensitySpec::standard_gaussian(3), &g, 1.0, QuadratureSettings::default()).unwrap();
        // (2π)^{-3/2} ∫ t³ e^{-t²/2} dt = 2 (2π)^{-3/2}
        let oracle = (2.0 * (2.0 * PI).powf(-1.5)).powf(0.25);
        for v in p.values() {
            assert_relative_eq!(*v, oracle, max_relative = 1e-9);
        }
    }

    #[test]
    fn empirical_profile_errors() {
        let g = grid(64);
        let s = SampleSet::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(matches!(rho_empirical(&s, &g, 0.1), Err(Error::Empty(_))));
        let s = SampleSet::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(rho_empirical(&s, &g, 0.0).is_err());
        let s3 = SampleSet::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(rho_empirical(&s3, &g, 0.1).is_err());
    }

    #[test]
    fn empirical_profile_on_circle_is_constant() {
        let g = grid(256);
        let n = 20_000;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                vec![2.0 * t.cos(), 2.0 * t.sin()]
            })
            .collect();
        let p = rho_empirical(&SampleSet::from_rows(&rows).unwrap(), &g, 0.1).unwrap();
        // μ_P has density 2/(2π) w.r.t. arc length
        let c = (2.0 / (2.0 * PI)).powf(1.0 / 3.0);
        for v in p.values() {
            assert_relative_eq!(*v, c, max_relative = 1e-3);
        }
    }

    #[test]
    fn empirical_scaling_is_linear_in_power() {
        let g = grid(128);
        let s = sample_density_seeded(&DensitySpec::standard_gaussian(2), 3000, 1).unwrap();
        let a = rho_empirical(&s, &g, 0.2).unwrap();
        let b = rho_empirical(&s.scaled(2.5), &g, 0.2).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_relative_eq!(y.powi(3), 2.5 * x.powi(3), max_relative = 1e-12);
        }
    }
}
