//! Unions of ellipsoids by hard-assignment alternation: each sample goes to
//! the part of smallest gauge (lowest index on ties), then every part is
//! refit on its own samples by warm-started ellipsoid steps. Both steps lower
//! `(1/m) Σ minₖ ‖xᵢ‖_{Kₖ}` with the parts held at unit determinant.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ellipsoid::{fit_shape, shape_to_axes};
use super::{empirical_risk, fit_ellipsoid, Family, FitConfig, RiskReport};
use crate::density::SampleSet;
use crate::error::{Error, Result};
use crate::geometry::{self, StarBody};
use crate::grid::SphericalGrid;
use crate::vecmath::{dot, norm, unit_ball_volume};

type Run = (Vec<DMatrix<f64>>, Vec<f64>, Vec<String>);
const INNER_ITERS: usize = 25;

pub fn fit_union_ellipsoids(samples: &SampleSet, cfg: &FitConfig) -> Result<RiskReport> {
    let d = samples.dim();
    cfg.validate(d)?;
    let Family::UnionEllipsoids { parts } = cfg.family else {
        return Err(Error::invalid("fit_union_ellipsoids needs the union family"));
    };
    if parts == 1 {
        let mut r = fit_ellipsoid(samples, &FitConfig { family: Family::Ellipsoid, ..*cfg })?;
        r.config = *cfg;
        return Ok(r);
    }
    let m = samples.len();
    if m < parts * d {
        return Err(Error::invalid(format!("union of {parts} parts needs at least {} samples", parts * d)));
    }
    let kappa = unit_ball_volume(d);
    let axis_floor = if cfg.volume_normalization {
        cfg.inner_width_floor * (parts as f64 * kappa).powf(1.0 / d as f64)
    } else {
        cfg.inner_width_floor
    };
    if axis_floor > 1.0 {
        return Err(Error::invalid("inner width floor is infeasible for this many parts"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = volume_grid(d)?;
    let run = Alternation { samples, floor: axis_floor, cfg, grid: &grid };

    // directional k-means++ start
    let centers = seed_directions(samples, parts, &mut rng);
    let assign: Vec<usize> = samples
        .rows()
        .map(|x| {
            let mut best = (0, f64::NEG_INFINITY);
            for (k, c) in centers.iter().enumerate() {
                let v = dot(x, c).abs();
                if v > best.1 {
                    best = (k, v);
                }
            }
            best.0
        })
        .collect();
    let shapes: Vec<DMatrix<f64>> = (0..parts)
        .map(|k| {
            let idx: Vec<usize> = (0..m).filter(|&i| assign[i] == k).collect();
            regularized_shape(samples, &idx, d)
        })
        .collect();
    let a = run.go(shapes)?;

    // start from copies of the single ellipsoid fit; under the volume
    // objective the union can then never do worse than one part
    let single = fit_shape(samples, super::ellipsoid::initial_shape(samples)?, axis_floor, cfg.max_iters, cfg.tol)?;
    let b = run.go(vec![single.m; parts])?;

    let (shapes, trace, events) = if b.1.last() < a.1.last() { b } else { a };

    let axes: Vec<DMatrix<f64>> = shapes.iter().map(shape_to_axes).collect();
    let raw = StarBody::union(axes.iter().map(|a| StarBody::ellipsoid(a.clone())).collect::<Result<_>>()?)?;
    let body = if cfg.volume_normalization {
        let s = geometry::normalizing_factor(&raw, &grid)?;
        StarBody::union(axes.iter().map(|a| StarBody::ellipsoid(a * s)).collect::<Result<_>>()?)?
    } else {
        raw
    };
    let empirical_risk = empirical_risk(&body, samples)?;
    Ok(RiskReport {
        trace,
        body,
        empirical_risk,
        held_out_risk: None,
        population_risk: None,
        gap: None,
        events,
        config: *cfg,
    })
}

struct Alternation<'a> {
    samples: &'a SampleSet,
    floor: f64,
    cfg: &'a FitConfig,
    grid: &'a SphericalGrid,
}

impl Alternation<'_> {
    /// The tracked objective: the mean minimum gauge, times `vol(U)^{1/d}`
    /// under volume normalization so it equals the risk of the rescaled union.
    fn objective(&self, shapes: &[DMatrix<f64>], mean_gauge: f64) -> Result<f64> {
        if !self.cfg.volume_normalization {
            return Ok(mean_gauge);
        }
        let parts = shapes.iter().map(|m| StarBody::ellipsoid(shape_to_axes(m))).collect::<Result<_>>()?;
        let v = geometry::volume(&StarBody::union(parts)?, self.grid)?;
        Ok(mean_gauge * v.powf(1.0 / self.samples.dim() as f64))
    }

    /// Returns the shapes with the objective trace and events.
    fn go(&self, mut shapes: Vec<DMatrix<f64>>) -> Result<Run> {
        let samples = self.samples;
        let (m, d, parts) = (samples.len(), samples.dim(), shapes.len());
        let mut events = Vec::new();
        let mut assign = vec![0; m];
        let mut mins = vec![0.0; m];
        let j = assign_step(samples, &shapes, &mut assign, &mut mins);
        let mut objective = self.objective(&shapes, j)?;
        let mut trace = vec![objective];
        for _ in 0..self.cfg.max_iters {
            let mut next = shapes.clone();
            #[allow(clippy::needless_range_loop)]
            for k in 0..parts {
                let idx: Vec<usize> = (0..m).filter(|&i| assign[i] == k).collect();
                if idx.is_empty() {
                    // the worst-fit samples seed a new part
                    let mut order: Vec<usize> = (0..m).collect();
                    order.sort_by(|&a, &b| mins[b].total_cmp(&mins[a]).then(a.cmp(&b)));
                    let take = (m / (4 * parts)).max(d + 1).min(m);
                    next[k] = fit_shape(
                        &samples.select(&order[..take])?,
                        regularized_shape(samples, &order[..take], d),
                        self.floor,
                        INNER_ITERS,
                        0.0,
                    )
                    .map(|f| f.m)
                    .unwrap_or_else(|_| regularized_shape(samples, &order[..take], d));
                    events.push(format!("part {k} emptied; reseeded from {take} worst-fit samples"));
                    continue;
                }
                let sub = samples.select(&idx)?;
                match fit_shape(&sub, next[k].clone(), self.floor, INNER_ITERS, 0.0) {
                    Ok(f) => next[k] = f.m,
                    Err(_) => events.push(format!("part {k} kept: its samples do not span")),
                }
            }
            let mut next_assign = assign.clone();
            let mut next_mins = mins.clone();
            let j = assign_step(samples, &next, &mut next_assign, &mut next_mins);
            let cand = self.objective(&next, j)?;
            if !(cand <= objective) {
                events.push("alternation stopped: step raised the objective".into());
                break;
            }
            let done = objective - cand <= self.cfg.tol * objective;
            shapes = next;
            assign = next_assign;
            mins = next_mins;
            objective = cand;
            trace.push(objective);
            if done {
                break;
            }
        }
        Ok((shapes, trace, events))
    }
}

/// Assigns each sample to its part of smallest gauge and returns the mean of
/// those gauges.
fn assign_step(samples: &SampleSet, shapes: &[DMatrix<f64>], assign: &mut [usize], mins: &mut [f64]) -> f64 {
    let d = samples.dim();
    let mut total = 0.0;
    for (i, x) in samples.rows().enumerate() {
        let mut best = (0, f64::INFINITY);
        for (k, m) in shapes.iter().enumerate() {
            let mut q = 0.0;
            for a in 0..d {
                for b in 0..d {
                    q += x[a] * m[(a, b)] * x[b];
                }
            }
            let g = q.max(0.0).sqrt();
            if g < best.1 {
                best = (k, g);
            }
        }
        assign[i] = best.0;
        mins[i] = best.1;
        total += best.1;
    }
    total / samples.len() as f64
}

/// Unit-determinant shape from the second moment of the selected samples,
/// with a small ridge so thin clusters still give an ellipsoid.
fn regularized_shape(samples: &SampleSet, idx: &[usize], d: usize) -> DMatrix<f64> {
    let mut s = DMatrix::<f64>::zeros(d, d);
    for &i in idx {
        let x = samples.row(i);
        for a in 0..d {
            for b in 0..d {
                s[(a, b)] += x[a] * x[b];
            }
        }
    }
    if !idx.is_empty() {
        s /= idx.len() as f64;
    }
    let ridge = 1e-3 * (s.trace() / d as f64).max(1e-12);
    s += DMatrix::identity(d, d) * ridge;
    let eig = nalgebra::SymmetricEigen::new(s);
    let g = eig.eigenvalues.iter().map(|v| v.ln()).sum::<f64>() / d as f64;
    let inv = eig.eigenvalues.map(|v| (g - v.ln()).exp());
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// k-means++ over sample directions with the sign-blind distance `1 - cos²`.
fn seed_directions<R: Rng>(samples: &SampleSet, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let dirs: Vec<Vec<f64>> = samples
        .rows()
        .filter_map(|x| {
            let n = norm(x);
            (n > 0.0).then(|| x.iter().map(|c| c / n).collect())
        })
        .collect();
    let d = samples.dim();
    if dirs.is_empty() {
        return (0..k).map(|_| crate::optimizer::random_unit(d, rng)).collect();
    }
    let mut centers = vec![dirs[rng.random_range(0..dirs.len())].clone()];
    let dist = |u: &[f64], c: &[f64]| {
        let v = dot(u, c);
        (1.0 - v * v).max(0.0)
    };
    let mut best: Vec<f64> = dirs.iter().map(|u| dist(u, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().map(|v| v * v).sum();
        let next = if total > 1e-12 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = dirs.len() - 1;
            for (i, v) in best.iter().enumerate() {
                t -= v * v;
                if t <= 0.0 && *v > 0.0 {
                    pick = i;
                    break;
                }
            }
            dirs[pick].clone()
        } else {
            crate::optimizer::random_unit(d, rng)
        };
        for (b, u) in best.iter_mut().zip(&dirs) {
            *b = b.min(dist(u, &next));
        }
        centers.push(next);
    }
    centers
}

fn volume_grid(d: usize) -> Result<SphericalGrid> {
    if d == 2 {
        SphericalGrid::uniform2d(4096)
    } else {
        SphericalGrid::quasi_uniform(d, 20_000)
    }
}
