//! Dictionary ERM: alternating ℓ₁ coding (one LP per sample) and projected
//! subgradient steps on unit-norm columns.
//!
//! At the LP optimum `z` with dual certificate `y` the gauge is
//! `max { ⟨y, x⟩ : ‖Aᵀy‖_∞ ≤ 1 }`, so its derivative in `A` is `-y zᵀ`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Family, FitConfig, RiskReport};
use crate::density::SampleSet;
use crate::error::{Error, Result};
use crate::geometry::StarBody;
use crate::grid::SphericalGrid;
use crate::optimizer::random_unit;
use crate::vecmath::{norm, scaled};

const MAX_HALVINGS: usize = 30;

pub fn fit_dictionary(samples: &SampleSet, cfg: &FitConfig) -> Result<RiskReport> {
    let d = samples.dim();
    cfg.validate(d)?;
    let Family::Dictionary { p } = cfg.family else {
        return Err(Error::invalid("fit_dictionary needs the dictionary family"));
    };
    if samples.len() < p {
        return Err(Error::invalid(format!("dictionary fit needs m >= p = {p} samples")));
    }
    let grid = floor_grid(d)?;
    let r = cfg.inner_width_floor;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut events = Vec::new();
    let mut a = initial_columns(samples, p, &mut rng, &mut events);
    let mut tries = 0;
    while !admissible(&a, r, &grid) {
        tries += 1;
        if tries > 100 {
            return Err(Error::Numerical("could not initialize a dictionary above the inner width floor".into()));
        }
        let j = rng.random_range(0..p);
        let u = random_unit(d, &mut rng);
        a.set_column(j, &nalgebra::DVector::from_vec(u));
        events.push(format!("reinitialized column {j}: below the inner width floor"));
    }
    let (mut risk, mut grad) = risk_and_gradient(&a, samples)?;
    let mut trace = vec![risk];
    for _ in 0..cfg.max_iters {
        let mut eta = cfg.step_size;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = normalize_columns(&(&a - &grad * eta));
            if admissible(&cand, r, &grid) {
                let (cr, cg) = risk_and_gradient(&cand, samples)?;
                if cr < risk {
                    accepted = Some((cand, cr, cg));
                    break;
                }
            }
            eta *= 0.5;
        }
        let Some((cand, cr, cg)) = accepted else { break };
        let done = risk - cr <= cfg.tol * risk;
        a = cand;
        risk = cr;
        grad = cg;
        trace.push(risk);
        if done {
            break;
        }
    }
    let body = StarBody::dictionary(a)?;
    Ok(RiskReport {
        trace,
        body,
        empirical_risk: risk,
        held_out_risk: None,
        population_risk: None,
        gap: None,
        events,
        config: *cfg,
    })
}

/// `min_u ‖Aᵀu‖_∞` over the nodes of `grid`: the inradius of `A(B_ℓ₁)`.
pub fn inner_radius(a: &DMatrix<f64>, grid: &SphericalGrid) -> f64 {
    let (d, p) = a.shape();
    grid.nodes()
        .map(|u| (0..p).map(|j| (0..d).map(|i| a[(i, j)] * u[i]).sum::<f64>().abs()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

fn floor_grid(d: usize) -> Result<SphericalGrid> {
    if d == 2 {
        SphericalGrid::uniform2d(720)
    } else {
        SphericalGrid::quasi_uniform(d, 4000)
    }
}

fn admissible(a: &DMatrix<f64>, r: f64, grid: &SphericalGrid) -> bool {
    a.iter().all(|v| v.is_finite()) && inner_radius(a, grid) >= r
}

fn normalize_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for mut c in out.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    out
}

/// Mean gauge over the samples and its gradient `-(1/m) Σ yᵢ zᵢᵀ`.
fn risk_and_gradient(a: &DMatrix<f64>, samples: &SampleSet) -> Result<(f64, DMatrix<f64>)> {
    let (d, p) = a.shape();
    let sols = crate::par::try_map_indexed(samples.len(), |i| crate::lp::l1_gauge(a, samples.row(i), 1e-9))?;
    let mut g = DMatrix::zeros(d, p);
    let mut risk = 0.0;
    for s in &sols {
        risk += s.value;
        for i in 0..d {
            for j in 0..p {
                g[(i, j)] -= s.certificate[i] * s.coefficients[j];
            }
        }
    }
    let m = samples.len() as f64;
    Ok((risk / m, g / m))
}

/// Directional k-means++ seeding with the sign-blind distance `1 - cos²`.
/// Once every sample direction is covered, the remaining columns are random.
fn initial_columns<R: Rng>(samples: &SampleSet, p: usize, rng: &mut R, events: &mut Vec<String>) -> DMatrix<f64> {
    let d = samples.dim();
    let dirs: Vec<Vec<f64>> = samples
        .rows()
        .filter_map(|x| {
            let n = norm(x);
            (n > 0.0).then(|| scaled(x, 1.0 / n))
        })
        .collect();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    cols.push(if dirs.is_empty() { random_unit(d, rng) } else { dirs[rng.random_range(0..dirs.len())].clone() });
    let mut dist: Vec<f64> = dirs.iter().map(|u| sign_blind(u, &cols[0])).collect();
    while cols.len() < p {
        let total: f64 = dist.iter().map(|v| v * v).sum();
        let next = if total > 1e-12 {
            let mut t = rng.random::<f64>() * total;
            let mut k = dist.len() - 1;
            for (i, v) in dist.iter().enumerate() {
                t -= v * v;
                if t <= 0.0 && *v > 0.0 {
                    k = i;
                    break;
                }
            }
            dirs[k].clone()
        } else {
            events.push(format!("column {} seeded at random: sample directions exhausted", cols.len()));
            random_unit(d, rng)
        };
        for (v, u) in dist.iter_mut().zip(&dirs) {
            *v = v.min(sign_blind(u, &next));
        }
        cols.push(next);
    }
    DMatrix::from_iterator(d, p, cols.into_iter().flatten())
}

fn sign_blind(u: &[f64], v: &[f64]) -> f64 {
    let c = crate::vecmath::dot(u, v);
    (1.0 - c * c).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planted(q: &DMatrix<f64>, m: usize, seed: u64) -> SampleSet {
        let (d, p) = q.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::with_capacity(m * d);
        for _ in 0..m {
            let j = rng.random_range(0..p);
            let c: f64 = rng.random_range(-2.0..2.0);
            pts.extend((0..d).map(|i| c * q[(i, j)]));
        }
        SampleSet::new(d, pts).unwrap()
    }

    fn rotation(t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    }

    #[test]
    fn inner_radius_of_l1_ball() {
        let g = SphericalGrid::uniform2d(720).unwrap();
        assert_relative_eq!(
            inner_radius(&DMatrix::identity(2, 2), &g),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-5
        );
    }

    #[test]
    fn planted_identity_risk_is_attained() {
        let q = DMatrix::identity(2, 2);
        let s = planted(&q, 400, 1);
        let planted_risk = super::super::empirical_risk(&StarBody::dictionary(q).unwrap(), &s).unwrap();
        for p in [2, 4] {
            let r = fit_dictionary(&s, &FitConfig::dictionary(p)).unwrap();
            assert!(r.empirical_risk <= planted_risk + 1e-3, "p={p}: {} vs {planted_risk}", r.empirical_risk);
            assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn columns_stay_unit_and_risk_descends() {
        let q = rotation(0.4);
        let s = planted(&q, 300, 2);
        // start away from the planted atoms by adding isotropic noise
        let noise =
            crate::density::sample_density_seeded(&crate::density::DensitySpec::standard_gaussian(2), 300, 9).unwrap();
        let s = s.perturbed(&noise, 0.3).unwrap();
        let r = fit_dictionary(&s, &FitConfig { max_iters: 50, ..FitConfig::dictionary(2) }).unwrap();
        let StarBody::Dictionary(dp) = &r.body else { panic!() };
        for c in dp.columns().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(!r.trace.is_empty());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s =
            crate::density::sample_density_seeded(&crate::density::DensitySpec::standard_gaussian(2), 50, 3).unwrap();
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.2, -0.5, 0.1, 1.0, 0.8]);
        let (f0, g) = risk_and_gradient(&a, &s).unwrap();
        let h = 1e-7;
        for i in 0..2 {
            for j in 0..3 {
                let mut b = a.clone();
                b[(i, j)] += h;
                let (f1, _) = risk_and_gradient(&b, &s).unwrap();
                assert!(((f1 - f0) / h - g[(i, j)]).abs() < 1e-4, "({i},{j})");
            }
        }
    }

    #[test]
    fn wrong_family_is_rejected() {
        let s = planted(&DMatrix::identity(2, 2), 10, 1);
        assert!(fit_dictionary(&s, &FitConfig::ellipsoid()).is_err());
        assert!(fit_dictionary(&s, &FitConfig::dictionary(20)).is_err());
    }
}
