use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::grid::SphericalGrid;
use crate::lp;
use crate::vecmath::{dot, norm, scaled};

/// Neighbours used for radial interpolation on grids in d >= 3.
const KERNEL_NEIGHBORS: usize = 8;

/// A star body stored by its radial function on a spherical grid.
///
/// In the plane the boundary between consecutive nodes is the straight chord
/// `b_j b_{j+1}` with `b_j = ρ_j u_j`, so the body is exactly the star-shaped
/// polygon through the nodes. In higher dimension the radius is a normalized
/// kernel average over the nearest nodes.
#[derive(Debug, Clone)]
pub struct RadialGridBody {
    grid: Arc<SphericalGrid>,
    radii: Vec<f64>,
}

impl RadialGridBody {
    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    fn gauge_of_unit(&self, u: &[f64]) -> f64 {
        if self.grid.dim() == 2 {
            let (j, t) = self.grid.locate_angle(u[1].atan2(u[0]));
            let n = self.radii.len();
            let h = self.grid.step();
            let (r0, r1) = (self.radii[j], self.radii[(j + 1) % n]);
            let s = h.sin();
            ((h * (1.0 - t)).sin() / r0 + (h * t).sin() / r1) / s
        } else {
            1.0 / self.kernel_radius(u)
        }
    }

    fn kernel_radius(&self, u: &[f64]) -> f64 {
        let k = KERNEL_NEIGHBORS.min(self.radii.len() - 1);
        let nb = self.grid.neighbors(u, k + 1);
        if nb[0].1 < 1e-14 {
            return self.radii[nb[0].0];
        }
        let cutoff = 1.0 / nb[k].1;
        let mut num = 0.0;
        let mut den = 0.0;
        for &(j, d) in &nb[..k] {
            let w = 1.0 / d - cutoff;
            num += w * self.radii[j];
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            nb[..k].iter().map(|&(j, _)| self.radii[j]).sum::<f64>() / k as f64
        }
    }
}

/// The ellipsoid `A(B^d)` for a symmetric positive-definite `A`; its gauge is
/// `‖A⁻¹x‖₂`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl Ellipsoid {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Semi-axis lengths in ascending order.
    pub fn semi_axes(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// The linear image `A(B_ℓ₁)` of the cross-polytope; its gauge is
/// `min { ‖z‖₁ : Az = x }`.
#[derive(Debug, Clone)]
pub struct DictionaryPolytope {
    columns: DMatrix<f64>,
    feas_tol: f64,
}

impl DictionaryPolytope {
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn feas_tol(&self) -> f64 {
        self.feas_tol
    }

    /// Full LP solution at `x`, including the coefficient vector and dual certificate.
    pub fn solve(&self, x: &[f64]) -> Result<lp::L1Gauge> {
        lp::l1_gauge(&self.columns, x, self.feas_tol)
    }

    /// Support function `h(u) = ‖Aᵀu‖_∞`.
    pub fn support(&self, u: &[f64]) -> f64 {
        let (d, p) = self.columns.shape();
        (0..p).map(|j| (0..d).map(|i| self.columns[(i, j)] * u[i]).sum::<f64>().abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct UnionBody {
    parts: Vec<StarBody>,
}

impl UnionBody {
    pub fn parts(&self) -> &[StarBody] {
        &self.parts
    }
}

#[derive(Debug, Clone)]
pub struct DilateBody {
    base: Box<StarBody>,
    factor: f64,
}

impl DilateBody {
    pub fn base(&self) -> &StarBody {
        &self.base
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

/// Star body representations. Every variant is validated at construction, so
/// the radial function is strictly positive and finite in every direction.
#[derive(Debug, Clone)]
pub enum StarBody {
    RadialGrid(RadialGridBody),
    Ellipsoid(Ellipsoid),
    Dictionary(DictionaryPolytope),
    Union(UnionBody),
    Dilate(DilateBody),
}

impl StarBody {
    pub fn radial_grid(grid: Arc<SphericalGrid>, radii: Vec<f64>) -> Result<Self> {
        if radii.len() != grid.len() {
            return Err(Error::invalid(format!("{} radii for a grid of {} nodes", radii.len(), grid.len())));
        }
        if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::invalid(format!("radial values must be positive and finite, got {r}")));
        }
        if grid.dim() > 2 && grid.len() < 2 {
            return Err(Error::invalid("grid too small for kernel interpolation"));
        }
        Ok(StarBody::RadialGrid(RadialGridBody { grid, radii }))
    }

    pub fn ellipsoid(matrix: DMatrix<f64>) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c || r < 2 {
            return Err(Error::invalid("ellipsoid matrix must be square with dimension >= 2"));
        }
        check_finite(matrix.as_slice())?;
        let scale = matrix.amax();
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale.max(1.0) {
            return Err(Error::invalid("ellipsoid matrix must be symmetric"));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        if ev[0] <= 0.0 {
            return Err(Error::invalid("ellipsoid matrix must be positive definite"));
        }
        let inverse =
            sym.clone().try_inverse().ok_or_else(|| Error::Numerical("ellipsoid matrix not invertible".into()))?;
        Ok(StarBody::Ellipsoid(Ellipsoid { matrix: sym, inverse, eigenvalues: ev }))
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn ellipsoid_diag(semi_axes: &[f64]) -> Result<Self> {
        Self::ellipsoid(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(semi_axes)))
    }

    /// Euclidean ball of radius `r`.
    pub fn ball(dim: usize, r: f64) -> Result<Self> {
        Self::ellipsoid_diag(&vec![r; dim])
    }

    pub fn dictionary(columns: DMatrix<f64>) -> Result<Self> {
        Self::dictionary_with_tol(columns, 1e-8)
    }

    pub fn dictionary_with_tol(columns: DMatrix<f64>, feas_tol: f64) -> Result<Self> {
        let (d, p) = columns.shape();
        if d < 2 || p < d {
            return Err(Error::invalid(format!("dictionary must be d×p with p >= d >= 2, got {d}×{p}")));
        }
        check_finite(columns.as_slice())?;
        if !(feas_tol > 0.0) {
            return Err(Error::invalid("LP feasibility tolerance must be positive"));
        }
        let sv = columns.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        // min_u ‖Aᵀu‖_∞ > 0 iff A has full row rank
        if !(smin > 1e-10 * smax.max(1e-300)) {
            return Err(Error::invalid("dictionary must have full row rank (origin must be interior)"));
        }
        Ok(StarBody::Dictionary(DictionaryPolytope { columns, feas_tol }))
    }

    /// The ℓ₁ ball in dimension `dim`.
    pub fn l1_ball(dim: usize) -> Result<Self> {
        Self::dictionary(DMatrix::identity(dim, dim))
    }

    pub fn union(parts: Vec<StarBody>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Empty("union of zero bodies".into()))?;
        let d = first.dim();
        for p in &parts {
            check_dim(d, p.dim())?;
        }
        Ok(StarBody::Union(UnionBody { parts }))
    }

    pub fn dilate(base: StarBody, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("dilation factor must be positive, got {factor}")));
        }
        Ok(match base {
            StarBody::Dilate(DilateBody { base, factor: f0 }) => {
                StarBody::Dilate(DilateBody { base, factor: f0 * factor })
            }
            other => StarBody::Dilate(DilateBody { base: Box::new(other), factor }),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            StarBody::RadialGrid(b) => b.grid.dim(),
            StarBody::Ellipsoid(e) => e.matrix.nrows(),
            StarBody::Dictionary(p) => p.columns.nrows(),
            StarBody::Union(u) => u.parts[0].dim(),
            StarBody::Dilate(d) => d.base.dim(),
        }
    }

    /// The gauge (Minkowski functional) `‖x‖_K = inf { t > 0 : x ∈ tK }`.
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_finite(x)?;
        self.gauge_unchecked(x)
    }

    fn gauge_unchecked(&self, x: &[f64]) -> Result<f64> {
        match self {
            StarBody::RadialGrid(b) => {
                let n = norm(x);
                if n == 0.0 {
                    return Ok(0.0);
                }
                let u = scaled(x, 1.0 / n);
                Ok(n * b.gauge_of_unit(&u))
            }
            StarBody::Ellipsoid(e) => {
                let d = x.len();
                let mut s = 0.0;
                for i in 0..d {
                    let yi: f64 = (0..d).map(|j| e.inverse[(i, j)] * x[j]).sum();
                    s += yi * yi;
                }
                Ok(s.sqrt())
            }
            StarBody::Dictionary(p) => Ok(p.solve(x)?.value),
            StarBody::Union(u) => {
                let mut best = f64::INFINITY;
                for part in &u.parts {
                    best = best.min(part.gauge_unchecked(x)?);
                }
                Ok(best)
            }
            StarBody::Dilate(d) => Ok(d.base.gauge_unchecked(x)? / d.factor),
        }
    }

    /// Radial function `ρ_K(u) = 1/‖u‖_K` for a unit vector `u`.
    pub fn radial(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        check_finite(u)?;
        if (norm(u) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("radial function needs a unit direction"));
        }
        self.radial_unchecked(u)
    }

    fn radial_unchecked(&self, u: &[f64]) -> Result<f64> {
        let r = match self {
            StarBody::RadialGrid(b) if b.grid.dim() > 2 => b.kernel_radius(u),
            StarBody::Union(un) => {
                let mut best = 0.0f64;
                for p in &un.parts {
                    best = best.max(p.radial_unchecked(u)?);
                }
                best
            }
            StarBody::Dilate(d) => d.factor * d.base.radial_unchecked(u)?,
            _ => 1.0 / self.gauge_unchecked(u)?,
        };
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::DegenerateDirection(u.to_vec()));
        }
        Ok(r)
    }

    /// Radial values at every node of `grid`.
    pub fn radial_values(&self, grid: &SphericalGrid) -> Result<Vec<f64>> {
        check_dim(self.dim(), grid.dim())?;
        if let StarBody::RadialGrid(b) = self {
            if same_grid(&b.grid, grid) {
                return Ok(b.radii.clone());
            }
        }
        if let StarBody::Dilate(d) = self {
            return Ok(d.base.radial_values(grid)?.into_iter().map(|r| r * d.factor).collect());
        }
        crate::par::try_map_indexed(grid.len(), |j| self.radial_unchecked(grid.node(j)))
    }

    /// Support function `h_K(u) = sup_{y ∈ K} ⟨u, y⟩`. Exact for ellipsoids and
    /// dictionaries; a max over boundary vertices for grid bodies.
    pub fn support(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        Ok(match self {
            StarBody::RadialGrid(b) => {
                b.grid.nodes().zip(&b.radii).map(|(v, r)| r * dot(u, v)).fold(f64::NEG_INFINITY, f64::max)
            }
            StarBody::Ellipsoid(e) => {
                let d = u.len();
                (0..d).map(|i| (0..d).map(|j| e.matrix[(i, j)] * u[j]).sum::<f64>().powi(2)).sum::<f64>().sqrt()
            }
            StarBody::Dictionary(p) => p.support(u),
            StarBody::Union(un) => {
                let mut best = f64::NEG_INFINITY;
                for p in &un.parts {
                    best = best.max(p.support(u)?);
                }
                best
            }
            StarBody::Dilate(d) => d.factor * d.base.support(u)?,
        })
    }

    /// An upper bound on `sup_u ρ_K(u)`, exact for every representation.
    pub fn circumradius(&self) -> f64 {
        match self {
            StarBody::RadialGrid(b) => b.radii.iter().copied().fold(0.0, f64::max),
            StarBody::Ellipsoid(e) => *e.eigenvalues.last().unwrap(),
            StarBody::Dictionary(p) => p.columns.column_iter().map(|c| c.norm()).fold(0.0, f64::max),
            StarBody::Union(u) => u.parts.iter().map(|p| p.circumradius()).fold(0.0, f64::max),
            StarBody::Dilate(d) => d.factor * d.base.circumradius(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.gauge(x)? <= 1.0)
    }
}

fn same_grid(a: &SphericalGrid, b: &SphericalGrid) -> bool {
    if std::ptr::eq(a, b) {
        return true;
    }
    a.dim() == b.dim()
        && a.len() == b.len()
        && if a.dim() == 2 { a.theta0() == b.theta0() } else { a.nodes().zip(b.nodes()).all(|(x, y)| x == y) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn gauge_examples() {
        let e = StarBody::ellipsoid_diag(&[2.0, 1.0]).unwrap();
        assert_relative_eq!(e.gauge(&[2.0, 0.0]).unwrap(), 1.0, epsilon = 1e-15);
        let l1 = StarBody::l1_ball(2).unwrap();
        assert_relative_eq!(l1.gauge(&[0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-12);
        let u = StarBody::union(vec![StarBody::ball(2, 1.0).unwrap(), StarBody::ball(2, 2.0).unwrap()]).unwrap();
        assert_relative_eq!(u.gauge(&[3.0, 0.0]).unwrap(), 1.5, epsilon = 1e-15);
        assert_eq!(e.gauge(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn radial_examples() {
        let e = StarBody::ellipsoid_diag(&[2.0, 1.0]).unwrap();
        assert_relative_eq!(e.radial(&[1.0, 0.0]).unwrap(), 2.0, epsilon = 1e-15);
        let l1 = StarBody::l1_ball(2).unwrap();
        assert_relative_eq!(l1.radial(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-12);
        let d = StarBody::dilate(StarBody::ball(2, 1.0).unwrap(), 3.0).unwrap();
        for t in [0.0, 1.0, 2.5] {
            assert_relative_eq!(d.radial(&[f64::cos(t), f64::sin(t)]).unwrap(), 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn input_errors() {
        let e = StarBody::ball(2, 1.0).unwrap();
        assert!(matches!(e.gauge(&[1.0, f64::NAN]), Err(Error::InvalidArgument(_))));
        assert!(matches!(e.gauge(&[1.0, 0.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(e.radial(&[2.0, 0.0]).is_err());
        assert!(StarBody::ellipsoid_diag(&[1.0, -1.0]).is_err());
        assert!(StarBody::ellipsoid(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(StarBody::dictionary(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])).is_err());
        assert!(StarBody::union(vec![]).is_err());
        assert!(StarBody::dilate(e.clone(), 0.0).is_err());
        let g = Arc::new(SphericalGrid::uniform2d(8).unwrap());
        assert!(StarBody::radial_grid(g.clone(), vec![1.0; 7]).is_err());
        assert!(StarBody::radial_grid(g, vec![0.0; 8]).is_err());
    }

    #[test]
    fn planar_grid_body_is_the_vertex_polygon() {
        // square with vertices on the axes: the ℓ₁ ball with 4 nodes
        let g = Arc::new(SphericalGrid::uniform2d(4).unwrap());
        let b = StarBody::radial_grid(g, vec![1.0; 4]).unwrap();
        let l1 = StarBody::l1_ball(2).unwrap();
        for k in 0..50 {
            let t = 2.0 * PI * k as f64 / 50.0 + 0.013;
            let x = [2.0 * t.cos(), 2.0 * t.sin()];
            assert_relative_eq!(b.gauge(&x).unwrap(), l1.gauge(&x).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_body_reproduces_node_values() {
        let g = Arc::new(SphericalGrid::quasi_uniform(3, 300).unwrap());
        let radii: Vec<f64> = g.nodes().map(|u| 1.0 + 0.3 * u[0] * u[0]).collect();
        let b = StarBody::radial_grid(g.clone(), radii.clone()).unwrap();
        for j in [0, 5, 123, 299] {
            assert_relative_eq!(b.radial(g.node(j)).unwrap(), radii[j], epsilon = 1e-12);
        }
        // off-node value is a convex combination of nearby values
        let u = crate::vecmath::normalized(&[0.3, -0.2, 0.9]).unwrap();
        let r = b.radial(&u).unwrap();
        assert!(r > 1.0 && r < 1.3);
    }

    #[test]
    fn support_functions() {
        let e = StarBody::ellipsoid_diag(&[2.0, 1.0]).unwrap();
        assert_relative_eq!(e.support(&[1.0, 0.0]).unwrap(), 2.0);
        let l1 = StarBody::l1_ball(2).unwrap();
        assert_relative_eq!(l1.support(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap(), FRAC_1_SQRT_2);
        assert_relative_eq!(l1.circumradius(), 1.0);
    }
}
