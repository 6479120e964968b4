//! Dense two-phase simplex for small standard-form linear programs, and the
//! ℓ₁ coefficient gauge of a dictionary built on top of it.
//!
//! Problems here are tiny (d equality rows, 2p columns), so a full tableau with
//! Bland's rule is both simple and fast enough.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub primal: Vec<f64>,
    /// Multipliers `y` of the equality rows: `value = bᵀy`, `Aᵀy ≤ c`.
    pub dual: Vec<f64>,
}

struct Tableau {
    rows: usize,
    cols: usize, // structural + artificial, rhs stored separately
    data: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let p = self.at(r, c);
        for j in 0..cols {
            self.data[r * cols + j] /= p;
        }
        self.rhs[r] /= p;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f == 0.0 {
                continue;
            }
            for j in 0..cols {
                self.data[i * cols + j] -= f * self.data[r * cols + j];
            }
            self.rhs[i] -= f * self.rhs[r];
        }
        self.basis[r] = c;
    }

    /// Reduced costs for cost vector `cost` over all columns.
    fn reduced(&self, cost: &[f64]) -> Vec<f64> {
        let mut red = cost.to_vec();
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for (j, r) in red.iter_mut().enumerate() {
                *r -= cb * self.at(i, j);
            }
        }
        red
    }

    /// Runs Bland's rule over the columns `< allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: usize, tol: f64) -> std::result::Result<(), LpStatus> {
        let limit = 50 * (self.rows + self.cols) + 100;
        for _ in 0..limit {
            let red = self.reduced(cost);
            let Some(enter) = (0..allowed).find(|&j| red[j] < -tol) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, enter);
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-15 || (ratio <= best + 1e-15 && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(LpStatus::Unbounded),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
        Err(LpStatus::IterationLimit)
    }
}

/// Minimizes `cᵀx` subject to `Ax = b`, `x ≥ 0`, with `A` given row-major as
/// `rows × c.len()`.
pub fn solve_standard(c: &[f64], a: &[f64], b: &[f64], feas_tol: f64) -> std::result::Result<LpSolution, LpStatus> {
    let m = b.len();
    let n = c.len();
    assert_eq!(a.len(), m * n, "constraint matrix shape");
    let cols = n + m;
    let mut data = vec![0.0; m * cols];
    let mut rhs = vec![0.0; m];
    let mut sign = vec![1.0; m];
    for i in 0..m {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        sign[i] = s;
        for j in 0..n {
            data[i * cols + j] = s * a[i * n + j];
        }
        data[i * cols + n + i] = 1.0;
        rhs[i] = s * b[i];
    }
    let mut t = Tableau { rows: m, cols, data, rhs, basis: (n..n + m).collect() };

    // phase 1: minimize the sum of artificials
    let mut cost1 = vec![0.0; cols];
    for v in cost1.iter_mut().skip(n) {
        *v = 1.0;
    }
    t.optimize(&cost1, n, PIVOT_TOL)?;
    let infeas: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rhs[i]).sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeas > feas_tol * scale {
        return Err(LpStatus::Infeasible);
    }
    // drive zero-level artificials out of the basis
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t.at(i, j).abs() > 1e-9) {
                t.pivot(i, j);
            }
        }
    }

    let mut cost2 = vec![0.0; cols];
    cost2[..n].copy_from_slice(c);
    t.optimize(&cost2, n, 1e-12)?;

    let mut primal = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            primal[t.basis[i]] = t.rhs[i].max(0.0);
        }
    }
    let red = t.reduced(&cost2);
    let dual: Vec<f64> = (0..m).map(|i| -red[n + i] * sign[i]).collect();
    let value = c.iter().zip(&primal).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { value, primal, dual })
}

/// Result of the ℓ₁ coefficient gauge `min { ‖z‖₁ : Az = x }`.
#[derive(Debug, Clone)]
pub struct L1Gauge {
    pub value: f64,
    /// Optimal coefficients `z` (length p).
    pub coefficients: Vec<f64>,
    /// Dual certificate `y` with `‖Aᵀy‖_∞ ≤ 1` and `⟨x, y⟩ = value`.
    pub certificate: Vec<f64>,
}

/// Gauge of the dictionary body `A(B_ℓ₁)` at `x`, solved as an LP in 2p
/// nonnegative variables.
pub fn l1_gauge(a: &DMatrix<f64>, x: &[f64], feas_tol: f64) -> Result<L1Gauge> {
    let (d, p) = a.shape();
    crate::error::check_dim(d, x.len())?;
    if x.iter().all(|v| *v == 0.0) {
        return Ok(L1Gauge { value: 0.0, coefficients: vec![0.0; p], certificate: vec![0.0; d] });
    }
    let mut rows = vec![0.0; d * 2 * p];
    for i in 0..d {
        for j in 0..p {
            rows[i * 2 * p + j] = a[(i, j)];
            rows[i * 2 * p + p + j] = -a[(i, j)];
        }
    }
    let cost = vec![1.0; 2 * p];
    match solve_standard(&cost, &rows, x, feas_tol) {
        Ok(sol) => {
            let z: Vec<f64> = (0..p).map(|j| sol.primal[j] - sol.primal[p + j]).collect();
            // ⟨x, y⟩ recovers the same optimum; keep the primal value
            Ok(L1Gauge { value: sol.value, coefficients: z, certificate: sol.dual })
        }
        Err(LpStatus::Infeasible) => Err(Error::UnboundedGauge),
        Err(LpStatus::Unbounded) => Err(Error::Numerical("ℓ₁ gauge LP reported unbounded".into())),
        Err(LpStatus::IterationLimit) => Err(Error::Numerical("simplex iteration limit".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_standard_lp() {
        // min -x1 - x2 s.t. x1 + 2x2 + s1 = 4, 3x1 + x2 + s2 = 6
        let c = [-1.0, -1.0, 0.0, 0.0];
        let a = [1.0, 2.0, 1.0, 0.0, 3.0, 1.0, 0.0, 1.0];
        let b = [4.0, 6.0];
        let s = solve_standard(&c, &a, &b, 1e-9).unwrap();
        assert_relative_eq!(s.value, -2.8, epsilon = 1e-12);
        assert_relative_eq!(s.primal[0], 1.6, epsilon = 1e-12);
        assert_relative_eq!(s.primal[1], 1.2, epsilon = 1e-12);
        // strong duality
        let by: f64 = b.iter().zip(&s.dual).map(|(x, y)| x * y).sum();
        assert_relative_eq!(by, s.value, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_lp() {
        // x1 + x2 = -1 with x >= 0
        let r = solve_standard(&[1.0, 1.0], &[1.0, 1.0], &[-1.0], 1e-9);
        assert_eq!(r.unwrap_err(), LpStatus::Infeasible);
    }

    #[test]
    fn identity_dictionary_is_l1_norm() {
        let a = DMatrix::<f64>::identity(2, 2);
        let g = l1_gauge(&a, &[0.5, 0.5], 1e-8).unwrap();
        assert_relative_eq!(g.value, 1.0, epsilon = 1e-12);
        let g = l1_gauge(&a, &[-0.3, 0.9], 1e-8).unwrap();
        assert_relative_eq!(g.value, 1.2, epsilon = 1e-12);
        assert_relative_eq!(g.coefficients[0], -0.3, epsilon = 1e-12);
        // certificate: sign vector
        assert_relative_eq!(g.certificate[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(g.certificate[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn overcomplete_dictionary_certificate_is_dual_feasible() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, s, -s, 0.0, 1.0, s, s]);
        for x in [[1.0, 1.0], [0.3, -2.0], [-1.5, 0.2]] {
            let g = l1_gauge(&a, &x, 1e-8).unwrap();
            let y = &g.certificate;
            let xy = x[0] * y[0] + x[1] * y[1];
            assert_relative_eq!(xy, g.value, epsilon = 1e-10);
            for j in 0..4 {
                let aty = a[(0, j)] * y[0] + a[(1, j)] * y[1];
                assert!(aty.abs() <= 1.0 + 1e-10);
            }
            let z = &g.coefficients;
            for i in 0..2 {
                let r: f64 = (0..4).map(|j| a[(i, j)] * z[j]).sum();
                assert_relative_eq!(r, x[i], epsilon = 1e-10);
            }
        }
        // (1,1) is reached by a single column of length 1 scaled by √2
        let g = l1_gauge(&a, &[1.0, 1.0], 1e-8).unwrap();
        assert_relative_eq!(g.value, 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_dictionary_rejects_outside_points() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        assert!(matches!(l1_gauge(&a, &[0.0, 1.0], 1e-8), Err(Error::UnboundedGauge)));
        assert_relative_eq!(l1_gauge(&a, &[2.0, 0.0], 1e-8).unwrap().value, 1.0, epsilon = 1e-12);
    }
}
