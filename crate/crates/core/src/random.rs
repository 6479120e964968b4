//! Seeded random star bodies for experiments and verification suites.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::geometry::StarBody;
use crate::grid::SphericalGrid;
use crate::optimizer::random_unit;

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Rotated ellipsoid with semi-axes drawn uniformly from `[lo, hi]`.
pub fn random_ellipsoid<R: Rng + ?Sized>(d: usize, lo: f64, hi: f64, rng: &mut R) -> Result<StarBody> {
    let q = random_rotation(d, rng);
    let axes: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();
    let a = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(axes)) * q.transpose();
    StarBody::ellipsoid((&a + a.transpose()) * 0.5)
}

/// Smooth non-convex body on `grid`: `ρ = s·exp(Σ aₖ cos(kθ + φₖ))`
/// in the plane, a few Gaussian bumps in higher dimension. `wobble` bounds
/// `|log ρ - log s|`.
pub fn random_radial_body<R: Rng + ?Sized>(grid: &Arc<SphericalGrid>, wobble: f64, rng: &mut R) -> Result<StarBody> {
    let scale = rng.random_range(0.6..1.6);
    let d = grid.dim();
    let radii: Vec<f64> = if d == 2 {
        let terms: Vec<(f64, f64, f64)> =
            (1..=4).map(|k| (k as f64, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI))).collect();
        let total: f64 = terms.iter().map(|t| t.1.abs()).sum::<f64>().max(1e-12);
        grid.nodes()
            .map(|u| {
                let th = u[1].atan2(u[0]);
                let e: f64 = terms.iter().map(|(k, a, ph)| a * (k * th + ph).cos()).sum();
                scale * (wobble * e / total).exp()
            })
            .collect()
    } else {
        let bumps: Vec<(Vec<f64>, f64)> = (0..4).map(|_| (random_unit(d, rng), rng.random_range(-1.0..1.0))).collect();
        let total: f64 = bumps.iter().map(|b| b.1.abs()).sum::<f64>().max(1e-12);
        grid.nodes()
            .map(|u| {
                let e: f64 = bumps.iter().map(|(v, a)| a * (4.0 * (crate::vecmath::dot(u, v) - 1.0)).exp()).sum();
                scale * (wobble * e / total).exp()
            })
            .collect()
    };
    StarBody::radial_grid(grid.clone(), radii)
}

/// A convex body containing `r·B^d` (ellipsoid or polytope), or a union of
/// two such bodies, whose kernel then still contains `r·B^d`.
pub fn random_well_conditioned<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Result<StarBody> {
    match rng.random_range(0..3) {
        0 => random_ellipsoid(d, r, 3.0 * r, rng),
        1 => random_polytope(d, r, rng),
        _ => StarBody::union(vec![random_ellipsoid(d, r, 3.0 * r, rng)?, random_polytope(d, r, rng)?]),
    }
}

/// `A(B_ℓ₁)` with `2d` random columns, rescaled so its inradius is at least `r`.
pub fn random_polytope<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Result<StarBody> {
    let p = 2 * d;
    let cols: Vec<f64> = (0..p).flat_map(|_| random_unit(d, rng)).collect();
    let a = DMatrix::from_column_slice(d, p, &cols);
    let grid = if d == 2 { SphericalGrid::uniform2d(2048)? } else { SphericalGrid::quasi_uniform(d, 4000)? };
    let inner = crate::learn::inner_radius(&a, &grid);
    // the grid minimum overestimates the true inradius by O(grid spacing)
    let margin = if d == 2 { 1.02 } else { 1.15 };
    let s = rng.random_range(margin..2.0) * r / inner.max(1e-3);
    StarBody::dictionary(a * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::min_radial;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotations_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_rotation(3, &mut rng);
        assert!((&q * q.transpose() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn well_conditioned_bodies_contain_the_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = SphericalGrid::uniform2d(1024).unwrap();
        for _ in 0..20 {
            let b = random_well_conditioned(2, 0.4, &mut rng).unwrap();
            assert!(min_radial(&b, &g).unwrap() >= 0.4 - 1e-6);
        }
    }

    #[test]
    fn radial_wobble_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Arc::new(SphericalGrid::uniform2d(256).unwrap());
        let b = random_radial_body(&g, 0.3, &mut rng).unwrap();
        let r = b.radial_values(&g).unwrap();
        let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(hi / lo <= (0.6f64).exp() + 1e-12);
    }
}
