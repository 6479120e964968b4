//! Quadrature grids on the unit sphere.
//!
//! In the plane the grid is `n` equally spaced angles with trapezoidal weights
//! `2π/n`, which integrates smooth periodic functions spectrally. In higher
//! dimensions nodes are placed quasi-uniformly (a Fibonacci spiral for d = 3,
//! a Halton sequence pushed through the Gaussian quantile map otherwise) and
//! carry equal weights.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::vecmath::{dot, norm, sphere_area};

/// Default node count used when the caller does not choose one.
pub const DEFAULT_NODES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Equally spaced angles in the plane.
    Uniform2d,
    /// Quasi-uniform spiral / low-discrepancy placement for d >= 3.
    Spiral,
    /// Caller-supplied nodes.
    Explicit,
}

#[derive(Debug, Clone)]
pub struct SphericalGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: GridKind,
    // angle of node 0 for planar grids
    theta0: f64,
}

impl SphericalGrid {
    /// `n` equally spaced directions on the circle starting at angle 0.
    pub fn uniform2d(n: usize) -> Result<Self> {
        Self::uniform2d_offset(n, 0.0, GridKind::Uniform2d)
    }

    pub(crate) fn uniform2d_offset(n: usize, theta0: f64, kind: GridKind) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("planar grid needs at least 3 nodes"));
        }
        let step = 2.0 * PI / n as f64;
        let mut nodes = Vec::with_capacity(2 * n);
        for j in 0..n {
            let t = theta0 + step * j as f64;
            nodes.push(t.cos());
            nodes.push(t.sin());
        }
        Ok(SphericalGrid { dim: 2, nodes, weights: vec![step; n], kind, theta0 })
    }

    /// Quasi-uniform grid of `n` directions in dimension `dim`.
    pub fn quasi_uniform(dim: usize, n: usize) -> Result<Self> {
        match dim {
            0 | 1 => Err(Error::invalid("dimension must be at least 2")),
            2 => Self::uniform2d(n),
            _ => {
                if n < 2 * dim {
                    return Err(Error::invalid(format!("need at least {} nodes", 2 * dim)));
                }
                let nodes = if dim == 3 { fibonacci_sphere(n) } else { halton_sphere(dim, n) };
                let w = sphere_area(dim) / n as f64;
                Ok(SphericalGrid { dim, nodes, weights: vec![w; n], kind: GridKind::Spiral, theta0: 0.0 })
            }
        }
    }

    /// Builds a grid from explicit unit vectors. Planar grids must be sorted by
    /// angle and equally spaced.
    pub fn from_nodes(dim: usize, nodes: &[Vec<f64>]) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dimension must be at least 2"));
        }
        if nodes.is_empty() {
            return Err(Error::Empty("grid nodes".into()));
        }
        for u in nodes {
            crate::error::check_dim(dim, u.len())?;
            if (norm(u) - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("grid node is not a unit vector"));
            }
        }
        if dim == 2 {
            let n = nodes.len();
            let theta0 = nodes[0][1].atan2(nodes[0][0]);
            let g = Self::uniform2d_offset(n, theta0, GridKind::Explicit)?;
            for (j, u) in nodes.iter().enumerate() {
                if (u[0] - g.node(j)[0]).abs() > 1e-9 || (u[1] - g.node(j)[1]).abs() > 1e-9 {
                    return Err(Error::invalid("planar grid nodes must be sorted and equally spaced"));
                }
            }
            return Ok(g);
        }
        let flat: Vec<f64> = nodes.iter().flatten().copied().collect();
        let w = sphere_area(dim) / nodes.len() as f64;
        Ok(SphericalGrid { dim, nodes: flat, weights: vec![w; nodes.len()], kind: GridKind::Explicit, theta0: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.dim..(j + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum of the weights; the surface area of the sphere.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integrates `f(u_j)` against the quadrature weights.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Angular spacing of a planar grid.
    pub fn step(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }

    /// Angle of node `j` (planar grids only).
    pub fn angle(&self, j: usize) -> f64 {
        self.theta0 + self.step() * j as f64
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// For a planar grid, returns the node index `j` and fraction `t ∈ [0,1)`
    /// such that the angle of `u` lies between node `j` and node `j+1`.
    pub fn locate_angle(&self, theta: f64) -> (usize, f64) {
        let n = self.len();
        let mut s = (theta - self.theta0) / self.step();
        s = s.rem_euclid(n as f64);
        let j = (s.floor() as usize).min(n - 1);
        let t = (s - j as f64).clamp(0.0, 1.0);
        (j, t)
    }

    /// Index of the node closest to the direction `u`.
    pub fn nearest(&self, u: &[f64]) -> usize {
        if self.dim == 2 {
            let (j, t) = self.locate_angle(u[1].atan2(u[0]));
            return if t < 0.5 { j } else { (j + 1) % self.len() };
        }
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (j, v) in self.nodes().enumerate() {
            let c = dot(u, v);
            if c > best_dot {
                best_dot = c;
                best = j;
            }
        }
        best
    }

    /// The `k` closest nodes to `u` by chordal distance, sorted ascending.
    pub fn neighbors(&self, u: &[f64], k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.len());
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        for (j, v) in self.nodes().enumerate() {
            let d2 = (2.0 - 2.0 * dot(u, v)).max(0.0);
            if best.len() < k || d2 < best[best.len() - 1].1 {
                let pos = best.partition_point(|&(_, e)| e <= d2);
                best.insert(pos, (j, d2));
                best.truncate(k);
            }
        }
        best.into_iter().map(|(j, d2)| (j, d2.sqrt())).collect()
    }
}

fn fibonacci_sphere(n: usize) -> Vec<f64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(3 * n);
    for j in 0..n {
        let z = 1.0 - (2.0 * j as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * j as f64;
        let v = [r * phi.cos(), r * phi.sin(), z];
        let s = norm(&v);
        out.extend(v.iter().map(|c| c / s));
    }
    out
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn halton_sphere(dim: usize, n: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton grid supports up to {} dimensions", PRIMES.len());
    let mut out = Vec::with_capacity(dim * n);
    let mut i = 1u64;
    while out.len() < dim * n {
        let v: Vec<f64> = PRIMES[..dim]
            .iter()
            .map(|&b| {
                let p = radical_inverse(i, b);
                std::f64::consts::SQRT_2 * statrs::function::erf::erf_inv(2.0 * p - 1.0)
            })
            .collect();
        i += 1;
        let s = norm(&v);
        if s > 1e-8 && s.is_finite() {
            out.extend(v.iter().map(|c| c / s));
        }
    }
    out
}
