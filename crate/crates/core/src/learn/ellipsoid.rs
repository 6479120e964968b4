//! Ellipsoid ERM as a majorize–minimize fixed point.
//!
//! With `M = A^{-2}` the risk is `f(M) = (1/m) Σ √(xᵢᵀ M xᵢ)` over `det M = 1`.
//! Majorizing each square root by its tangent at the current `M₀` gives the
//! linear surrogate `tr(M S)` with `S = (1/m) Σ xᵢxᵢᵀ / (2√(xᵢᵀM₀xᵢ))`, whose
//! minimizer on `det M = 1` is `det(S)^{1/d} S^{-1}`. Each step therefore
//! cannot increase `f`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{FitConfig, RiskReport};
use crate::density::SampleSet;
use crate::error::{Error, Result};
use crate::geometry::StarBody;
use crate::vecmath::unit_ball_volume;

pub fn fit_ellipsoid(samples: &SampleSet, cfg: &FitConfig) -> Result<RiskReport> {
    let d = samples.dim();
    cfg.validate(d)?;
    if samples.len() < d {
        return Err(Error::invalid(format!("ellipsoid fit needs at least d = {d} samples")));
    }
    let kappa = unit_ball_volume(d);
    let (scale, axis_floor) = if cfg.volume_normalization {
        (kappa.powf(-1.0 / d as f64), cfg.inner_width_floor * kappa.powf(1.0 / d as f64))
    } else {
        (1.0, cfg.inner_width_floor)
    };
    let init = initial_shape(samples)?;
    let fit = fit_shape(samples, init, axis_floor, cfg.max_iters, cfg.tol)?;
    let body = StarBody::ellipsoid(shape_to_axes(&fit.m).scale(scale))?;
    let trace: Vec<f64> = fit.trace.iter().map(|f| f / scale).collect();
    let empirical_risk = *trace.last().unwrap();
    Ok(RiskReport {
        trace,
        body,
        empirical_risk,
        held_out_risk: None,
        population_risk: None,
        gap: None,
        events: fit.events,
        config: *cfg,
    })
}

pub(crate) struct ShapeFit {
    pub m: DMatrix<f64>,
    /// `f(M)` after each accepted step, starting at the projected init.
    pub trace: Vec<f64>,
    pub events: Vec<String>,
}

/// `det(S)^{1/d} S^{-1}` for the second-moment matrix `S`; errors when the
/// samples do not span.
pub(crate) fn initial_shape(samples: &SampleSet) -> Result<DMatrix<f64>> {
    let s = samples.second_moment();
    let eig = SymmetricEigen::new(s.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 1e-12 * hi) {
        return Err(Error::invalid("samples do not span the ambient space"));
    }
    Ok(unit_det_inverse(&s))
}

fn unit_det_inverse(s: &DMatrix<f64>) -> DMatrix<f64> {
    let d = s.nrows() as f64;
    let eig = SymmetricEigen::new(s.clone());
    let g = eig.eigenvalues.iter().map(|v| v.ln()).sum::<f64>() / d;
    let inv = eig.eigenvalues.map(|v| (g - v.ln()).exp());
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// `A = M^{-1/2}`.
pub(crate) fn shape_to_axes(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let a = eig.eigenvalues.map(|v| v.powf(-0.5));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&a) * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Caps the eigenvalues of a unit-determinant `M` at `cap ≥ 1`, raising the
/// rest uniformly in log scale so the determinant stays 1. Returns whether
/// the cap was active.
fn project(m: &DMatrix<f64>, cap: f64) -> (DMatrix<f64>, bool) {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.len();
    let mut mu: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut capped = vec![false; d];
    let mut active = false;
    loop {
        let mut changed = false;
        for i in 0..d {
            if !capped[i] && mu[i] > cap {
                capped[i] = true;
                changed = true;
                active = true;
            }
        }
        if !changed {
            break;
        }
        let free: Vec<usize> = (0..d).filter(|&i| !capped[i]).collect();
        let log_cap = cap.ln() * (d - free.len()) as f64;
        let log_free: f64 = free.iter().map(|&i| mu[i].ln()).sum();
        let shift = if free.is_empty() { 0.0 } else { (-log_cap - log_free) / free.len() as f64 };
        for i in 0..d {
            mu[i] = if capped[i] { cap } else { (mu[i].ln() + shift).exp() };
        }
    }
    let out =
        &eig.eigenvectors * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(mu)) * eig.eigenvectors.transpose();
    ((&out + out.transpose()) * 0.5, active)
}

fn objective(m: &DMatrix<f64>, samples: &SampleSet) -> f64 {
    samples.rows().map(|x| quad(m, x).max(0.0).sqrt()).sum::<f64>() / samples.len() as f64
}

fn quad(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut q = 0.0;
    for i in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            s += m[(i, j)] * x[j];
        }
        q += x[i] * s;
    }
    q
}

/// Runs the MM iteration from `init` subject to semi-axes `≥ axis_floor`
/// (in the unit-determinant scale). Steps that would increase the risk after
/// the floor projection are rejected, which ends the iteration.
pub(crate) fn fit_shape(
    samples: &SampleSet,
    init: DMatrix<f64>,
    axis_floor: f64,
    max_iters: usize,
    tol: f64,
) -> Result<ShapeFit> {
    let d = samples.dim();
    if axis_floor > 1.0 {
        return Err(Error::invalid(format!(
            "inner width floor is infeasible: unit-determinant semi-axes cannot all exceed {axis_floor:.4}"
        )));
    }
    let cap = axis_floor.powi(-2);
    let mut events = Vec::new();
    let (mut m, hit) = project(&init, cap);
    if hit {
        events.push("eigenvalue floor clamped the initialization".to_string());
    }
    let mut f = objective(&m, samples);
    let mut trace = vec![f];
    let mut floor_reported = hit;
    for _ in 0..max_iters {
        let mut s = DMatrix::zeros(d, d);
        for x in samples.rows() {
            let q = quad(&m, x);
            if q <= 0.0 {
                continue;
            }
            let w = 0.5 / q.sqrt();
            for i in 0..d {
                for j in 0..d {
                    s[(i, j)] += w * x[i] * x[j];
                }
            }
        }
        let eig = SymmetricEigen::new(s.clone());
        if !(eig.eigenvalues.min() > 1e-300) {
            return Err(Error::invalid("samples do not span the ambient space"));
        }
        let (next, hit) = project(&unit_det_inverse(&s), cap);
        let f_next = objective(&next, samples);
        if hit && !floor_reported {
            events.push("eigenvalue floor active".to_string());
            floor_reported = true;
        }
        if !(f_next <= f) {
            if hit {
                events.push("projected step rejected at the eigenvalue floor".to_string());
            }
            break;
        }
        let done = f - f_next <= tol * f;
        m = next;
        f = f_next;
        trace.push(f);
        if done {
            break;
        }
    }
    Ok(ShapeFit { m, trace, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{sample_density_seeded, DensitySpec};
    use crate::geometry::{min_radial, volume};
    use crate::grid::SphericalGrid;
    use approx::assert_relative_eq;

    fn gaussian(a: f64, b: f64, n: usize, seed: u64) -> SampleSet {
        let spec = DensitySpec::centered_gaussian(DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])).unwrap();
        sample_density_seeded(&spec, n, seed).unwrap()
    }

    #[test]
    fn recovers_gaussian_axis_ratio() {
        let s = gaussian(4.0, 1.0, 100_000, 1);
        let r = fit_ellipsoid(&s, &FitConfig::ellipsoid()).unwrap();
        let StarBody::Ellipsoid(e) = &r.body else { panic!() };
        let ax = e.semi_axes();
        assert!((ax[1] / ax[0] / 2.0 - 1.0).abs() < 0.02, "{ax:?}");
        let g = SphericalGrid::uniform2d(2048).unwrap();
        assert_relative_eq!(volume(&r.body, &g).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn trace_is_monotone_and_beats_identity() {
        let s = gaussian(3.0, 0.5, 5000, 2);
        let r = fit_ellipsoid(&s, &FitConfig::ellipsoid()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        let disk = StarBody::ball(2, std::f64::consts::PI.powf(-0.5)).unwrap();
        let id_risk = super::super::empirical_risk(&disk, &s).unwrap();
        assert!(r.empirical_risk <= id_risk);
        assert_relative_eq!(r.empirical_risk, super::super::empirical_risk(&r.body, &s).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn isotropic_samples_give_a_disk() {
        let s = gaussian(1.0, 1.0, 100_000, 3);
        let r = fit_ellipsoid(&s, &FitConfig::ellipsoid()).unwrap();
        let StarBody::Ellipsoid(e) = &r.body else { panic!() };
        let a = e.matrix() * std::f64::consts::PI.sqrt();
        assert!(a[(0, 1)].abs() < 1e-2 && (a[(0, 0)] - 1.0).abs() < 2e-2, "{a}");
    }

    #[test]
    fn floor_is_respected() {
        let s = gaussian(25.0, 0.01, 4000, 4);
        let cfg = FitConfig { inner_width_floor: 0.3, ..FitConfig::ellipsoid() };
        let r = fit_ellipsoid(&s, &cfg).unwrap();
        let g = SphericalGrid::uniform2d(1024).unwrap();
        assert!(min_radial(&r.body, &g).unwrap() >= 0.3 - 1e-9);
        assert!(!r.events.is_empty());
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        let infeasible = FitConfig { inner_width_floor: 0.7, ..FitConfig::ellipsoid() };
        assert!(fit_ellipsoid(&s, &infeasible).is_err());
    }

    #[test]
    fn rank_deficient_samples_are_rejected() {
        let s = SampleSet::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![-1.0, -1.0]]).unwrap();
        assert!(fit_ellipsoid(&s, &FitConfig::ellipsoid()).is_err());
    }

    #[test]
    fn rotation_equivariance() {
        let s = gaussian(4.0, 1.0, 3000, 5);
        let t: f64 = 0.7;
        let q = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let a = fit_ellipsoid(&s, &FitConfig::ellipsoid()).unwrap();
        let b = fit_ellipsoid(&s.transformed(&q).unwrap(), &FitConfig::ellipsoid()).unwrap();
        let (StarBody::Ellipsoid(ea), StarBody::Ellipsoid(eb)) = (&a.body, &b.body) else { panic!() };
        let rotated = &q * ea.matrix() * q.transpose();
        assert!((rotated - eb.matrix()).amax() < 1e-6);
    }

    #[test]
    fn three_dimensional_fit() {
        let spec =
            DensitySpec::centered_gaussian(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0, 0.25])))
                .unwrap();
        let s = sample_density_seeded(&spec, 50_000, 6).unwrap();
        let r = fit_ellipsoid(&s, &FitConfig::ellipsoid()).unwrap();
        let StarBody::Ellipsoid(e) = &r.body else { panic!() };
        let ax = e.semi_axes();
        assert!((ax[2] / ax[1] / 2.0 - 1.0).abs() < 0.03 && (ax[1] / ax[0] / 2.0 - 1.0).abs() < 0.03, "{ax:?}");
    }
}
