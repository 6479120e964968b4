//! Star bodies and the integral functionals of dual Brunn–Minkowski theory.
//!
//! All functionals are quadratures over a [`SphericalGrid`]:
//!
//! * volume: `(1/d) Σ_j w_j ρ_K(u_j)^d`
//! * dual mixed volume: `Ṽ_i(K, L) = (1/d) Σ_j w_j ρ_K(u_j)^i ρ_L(u_j)^{d-i}`
//! * radial metric: `δ(K, L) = max_j |ρ_K(u_j) - ρ_L(u_j)|`

mod body;

use std::sync::Arc;

pub use body::{DictionaryPolytope, DilateBody, Ellipsoid, RadialGridBody, StarBody, UnionBody};

use crate::error::{check_dim, Error, Result};
use crate::grid::SphericalGrid;
use crate::vecmath::unit_ball_volume;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryTolerances {
    pub quadrature_rel_tol: f64,
    pub lp_feas_tol: f64,
    pub convexity_margin_tol: f64,
}

impl Default for GeometryTolerances {
    fn default() -> Self {
        GeometryTolerances { quadrature_rel_tol: 1e-3, lp_feas_tol: 1e-8, convexity_margin_tol: 1e-6 }
    }
}

impl GeometryTolerances {
    pub fn validate(&self) -> Result<()> {
        if self.quadrature_rel_tol > 0.0 && self.lp_feas_tol > 0.0 && self.convexity_margin_tol > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("tolerances must be strictly positive"))
        }
    }
}

pub fn volume(body: &StarBody, grid: &SphericalGrid) -> Result<f64> {
    check_dim(body.dim(), grid.dim())?;
    let d = grid.dim() as i32;
    let rho = body.radial_values(grid)?;
    Ok(grid.weights().iter().zip(&rho).map(|(w, r)| w * r.powi(d)).sum::<f64>() / d as f64)
}

/// Dual mixed volume `Ṽ_i(K, L)`; `i` may be any real, including negative.
pub fn dual_mixed_volume(k: &StarBody, l: &StarBody, i: f64, grid: &SphericalGrid) -> Result<f64> {
    check_dim(k.dim(), l.dim())?;
    check_dim(k.dim(), grid.dim())?;
    let rk = k.radial_values(grid)?;
    let rl = l.radial_values(grid)?;
    Ok(dual_mixed_volume_values(&rk, &rl, i, grid))
}

pub(crate) fn dual_mixed_volume_values(rk: &[f64], rl: &[f64], i: f64, grid: &SphericalGrid) -> f64 {
    let d = grid.dim() as f64;
    grid.weights().iter().zip(rk.iter().zip(rl)).map(|(w, (a, b))| w * a.powf(i) * b.powf(d - i)).sum::<f64>() / d
}

pub fn dilate(body: &StarBody, factor: f64) -> Result<StarBody> {
    StarBody::dilate(body.clone(), factor)
}

/// Factor `vol(K)^{-1/d}` that rescales `K` to unit volume.
pub fn normalizing_factor(body: &StarBody, grid: &SphericalGrid) -> Result<f64> {
    let v = volume(body, grid)?;
    Ok(v.powf(-1.0 / grid.dim() as f64))
}

pub fn volume_normalize(body: &StarBody, grid: &SphericalGrid) -> Result<StarBody> {
    dilate(body, normalizing_factor(body, grid)?)
}

pub fn radial_distance(k: &StarBody, l: &StarBody, grid: &SphericalGrid) -> Result<f64> {
    check_dim(k.dim(), l.dim())?;
    let rk = k.radial_values(grid)?;
    let rl = l.radial_values(grid)?;
    Ok(rk.iter().zip(&rl).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Max of `|h_K - h_L|` over grid directions. Only meaningful for convex
/// bodies, where it approximates the Hausdorff distance.
pub fn support_distance(k: &StarBody, l: &StarBody, grid: &SphericalGrid) -> Result<f64> {
    check_dim(k.dim(), l.dim())?;
    let mut best = 0.0f64;
    for u in grid.nodes() {
        best = best.max((k.support(u)? - l.support(u)?).abs());
    }
    Ok(best)
}

pub fn star_union(parts: Vec<StarBody>) -> Result<StarBody> {
    StarBody::union(parts)
}

/// Smallest radial value over the grid nodes.
pub fn min_radial(body: &StarBody, grid: &SphericalGrid) -> Result<f64> {
    Ok(body.radial_values(grid)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Outer radius `(d+1) / (r^{d-1} κ_{d-1})` bounding every unit-volume star
/// body whose kernel contains `rB^d`.
pub fn outer_radius_bound(r: f64, d: usize) -> Result<f64> {
    if !(r > 0.0) || d < 2 {
        return Err(Error::invalid("outer radius bound needs r > 0 and d >= 2"));
    }
    Ok((d as f64 + 1.0) / (r.powi(d as i32 - 1) * unit_ball_volume(d - 1)))
}

/// Harmonic Blaschke combination `M` of `K` and `L`:
/// `ρ_M^{d+1}/vol(M) = ρ_K^{d+1}/vol(K) + ρ_L^{d+1}/vol(L)` at every node.
pub fn harmonic_blaschke(k: &StarBody, l: &StarBody, grid: &Arc<SphericalGrid>) -> Result<StarBody> {
    check_dim(k.dim(), l.dim())?;
    check_dim(k.dim(), grid.dim())?;
    let d = grid.dim() as i32;
    let rk = k.radial_values(grid)?;
    let rl = l.radial_values(grid)?;
    let vk = volume(k, grid)?;
    let vl = volume(l, grid)?;
    let g: Vec<f64> = rk
        .iter()
        .zip(&rl)
        .map(|(a, b)| (a.powi(d + 1) / vk + b.powi(d + 1) / vl).powf(1.0 / (d as f64 + 1.0)))
        .collect();
    let c = grid.weights().iter().zip(&g).map(|(w, x)| w * x.powi(d)).sum::<f64>() / d as f64;
    StarBody::radial_grid(grid.clone(), g.into_iter().map(|x| c * x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn grid(n: usize) -> Arc<SphericalGrid> {
        Arc::new(SphericalGrid::uniform2d(n).unwrap())
    }

    #[test]
    fn volume_examples() {
        let g = grid(2048);
        assert_relative_eq!(volume(&StarBody::ball(2, 1.0).unwrap(), &g).unwrap(), PI, epsilon = 1e-6);
        assert_relative_eq!(volume(&StarBody::l1_ball(2).unwrap(), &g).unwrap(), 2.0, epsilon = 1e-3);
        assert_relative_eq!(
            volume(&StarBody::ellipsoid_diag(&[2.0, 1.0]).unwrap(), &g).unwrap(),
            2.0 * PI,
            epsilon = 1e-3
        );
        assert!(volume(&StarBody::ball(3, 1.0).unwrap(), &g).is_err());
    }

    #[test]
    fn volume_in_three_dimensions() {
        let g = SphericalGrid::quasi_uniform(3, 4000).unwrap();
        let e = StarBody::ellipsoid_diag(&[1.0, 2.0, 0.5]).unwrap();
        assert_relative_eq!(volume(&e, &g).unwrap(), 4.0 * PI / 3.0, max_relative = 1e-2);
    }

    #[test]
    fn dual_mixed_volume_examples() {
        let g = grid(1024);
        let b = StarBody::ball(2, 1.0).unwrap();
        let b2 = StarBody::ball(2, 2.0).unwrap();
        assert_relative_eq!(dual_mixed_volume(&b, &b, -1.0, &g).unwrap(), PI, epsilon = 1e-12);
        // λ^{d+1} vol(K) with λ = 2, d = 2
        assert_relative_eq!(dual_mixed_volume(&b, &b2, -1.0, &g).unwrap(), 8.0 * PI, epsilon = 1e-11);
        let e = StarBody::ellipsoid_diag(&[1.5, 0.7]).unwrap();
        let v = volume(&e, &g).unwrap();
        for i in [-2.0, -1.0, 0.5, 2.0] {
            assert_relative_eq!(dual_mixed_volume(&e, &e, i, &g).unwrap(), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn dilate_examples() {
        let g = grid(512);
        let b = StarBody::ball(2, 1.0).unwrap();
        assert_relative_eq!(volume(&dilate(&b, 2.0).unwrap(), &g).unwrap(), 4.0 * PI, epsilon = 1e-12);
        let e = StarBody::ellipsoid_diag(&[1.3, 0.4]).unwrap();
        let same = dilate(&e, 1.0).unwrap();
        for k in 0..20 {
            let x = [(k as f64).sin() * 3.0, (k as f64 * 1.7).cos()];
            assert_eq!(same.gauge(&x).unwrap(), e.gauge(&x).unwrap());
        }
        let ab = dilate(&dilate(&e, 1.5).unwrap(), 0.4).unwrap();
        let direct = dilate(&e, 0.6).unwrap();
        let (ra, rb) = (ab.radial_values(&g).unwrap(), direct.radial_values(&g).unwrap());
        for (a, b) in ra.iter().zip(&rb) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        assert!(dilate(&e, -1.0).is_err());
    }

    #[test]
    fn volume_normalize_examples() {
        let g = grid(2048);
        let b = StarBody::ball(2, 1.0).unwrap();
        assert_relative_eq!(normalizing_factor(&b, &g).unwrap(), PI.powf(-0.5), epsilon = 1e-9);
        let n = volume_normalize(&b, &g).unwrap();
        assert_relative_eq!(volume(&n, &g).unwrap(), 1.0, epsilon = 1e-12);
        let l1 = StarBody::l1_ball(2).unwrap();
        assert_relative_eq!(normalizing_factor(&l1, &g).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-4);
        let n = volume_normalize(&l1, &g).unwrap();
        assert_relative_eq!(volume(&n, &g).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(normalizing_factor(&n, &g).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn radial_distance_examples() {
        let g = grid(256);
        let e = StarBody::ellipsoid_diag(&[1.3, 0.4]).unwrap();
        assert_eq!(radial_distance(&e, &e, &g).unwrap(), 0.0);
        let b = StarBody::ball(2, 1.0).unwrap();
        let b2 = StarBody::ball(2, 2.0).unwrap();
        assert_relative_eq!(radial_distance(&b, &b2, &g).unwrap(), 1.0, epsilon = 1e-14);
        let eps = 0.01;
        let max_r = e.radial_values(&g).unwrap().into_iter().fold(0.0, f64::max);
        let de = dilate(&e, 1.0 + eps).unwrap();
        assert_relative_eq!(radial_distance(&e, &de, &g).unwrap(), eps * max_r, max_relative = 1e-10);
    }

    #[test]
    fn union_examples() {
        let g = grid(360);
        let e = StarBody::ellipsoid_diag(&[1.3, 0.4]).unwrap();
        let u = star_union(vec![e.clone()]).unwrap();
        for x in [[1.0, 2.0], [-0.3, 0.1], [5.0, -7.0]] {
            assert_eq!(u.gauge(&x).unwrap(), e.gauge(&x).unwrap());
        }
        let absorbed = star_union(vec![StarBody::ball(2, 1.0).unwrap(), StarBody::ball(2, 2.0).unwrap()]).unwrap();
        assert!(absorbed.radial_values(&g).unwrap().iter().all(|r| (r - 2.0).abs() < 1e-14));
        let eps = 0.1;
        let e1 = StarBody::ellipsoid_diag(&[1.0, eps]).unwrap();
        let e2 = StarBody::ellipsoid_diag(&[eps, 1.0]).unwrap();
        let cross = star_union(vec![e1.clone(), e2.clone()]).unwrap();
        assert_relative_eq!(cross.radial(&[1.0, 0.0]).unwrap(), 1.0, epsilon = 1e-14);
        let diag = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        // per-part radial: (cos²/a² + sin²/b²)^{-1/2}
        let per_part = (0.5 / 1.0 + 0.5 / (eps * eps)).powf(-0.5);
        assert_relative_eq!(cross.radial(&diag).unwrap(), per_part, epsilon = 1e-14);
        // pointwise min of gauges at every node
        for u in g.nodes() {
            let m = e1.gauge(u).unwrap().min(e2.gauge(u).unwrap());
            assert_eq!(cross.gauge(u).unwrap(), m);
        }
        assert!(star_union(vec![e, StarBody::ball(3, 1.0).unwrap()]).is_err());
    }

    #[test]
    fn outer_radius_examples() {
        assert_relative_eq!(outer_radius_bound(1.0, 2).unwrap(), 1.5, epsilon = 1e-14);
        assert_relative_eq!(outer_radius_bound(0.5, 2).unwrap(), 3.0, epsilon = 1e-14);
        assert_relative_eq!(outer_radius_bound(1.0, 3).unwrap(), 4.0 / PI, epsilon = 1e-14);
        assert!(outer_radius_bound(0.0, 2).is_err());
    }

    #[test]
    fn harmonic_blaschke_examples() {
        let g = grid(512);
        let b = StarBody::ball(2, 1.0).unwrap();
        let m = harmonic_blaschke(&b, &b, &g).unwrap();
        let r = m.radial_values(&g).unwrap();
        assert!(r.iter().all(|x| (x - r[0]).abs() < 1e-12));

        let k = StarBody::ellipsoid_diag(&[2.0, 0.5]).unwrap();
        let l = StarBody::dictionary(DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.6, 0.0, 1.0, 0.8])).unwrap();
        let m = harmonic_blaschke(&k, &l, &g).unwrap();
        let (rk, rl, rm) = (k.radial_values(&g).unwrap(), l.radial_values(&g).unwrap(), m.radial_values(&g).unwrap());
        let (vk, vl, vm) = (volume(&k, &g).unwrap(), volume(&l, &g).unwrap(), volume(&m, &g).unwrap());
        for j in 0..g.len() {
            let lhs = rm[j].powi(3) / vm;
            let rhs = rk[j].powi(3) / vk + rl[j].powi(3) / vl;
            assert!((lhs - rhs).abs() < 1e-6 * rhs.max(1.0), "node {j}: {lhs} vs {rhs}");
        }
        let m2 = harmonic_blaschke(&l, &k, &g).unwrap();
        for (a, b) in rm.iter().zip(m2.radial_values(&g).unwrap()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
