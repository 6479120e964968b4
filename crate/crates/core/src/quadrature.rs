//! Composite Gauss–Legendre quadrature on finite intervals.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

const ORDER: usize = 20;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(ORDER).unwrap()))
}

/// Composite rule with `panels` equal panels on `[a, b]`.
pub fn composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let g = rule();
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + h * p as f64;
            g.integrate(lo, lo + h, f)
        })
        .sum()
}

/// Doubles the panel count until two successive estimates agree to `rel_tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut panels = 4;
    let mut prev = composite(f, a, b, panels);
    while panels < 1 << 14 {
        panels *= 2;
        let next = composite(f, a, b, panels);
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        prev = next;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn exact_for_polynomials() {
        // ∫ x^38 over [-1,1] = 2/39 with a single panel of the 20-point rule
        assert_relative_eq!(composite(&|x: f64| x.powi(38), -1.0, 1.0, 1), 2.0 / 39.0, epsilon = 1e-14);
        assert_relative_eq!(composite(&|x: f64| x * x, 0.0, 3.0, 7), 9.0, epsilon = 1e-13);
    }

    #[test]
    fn gaussian_moment() {
        // ∫₀^∞ t² e^{-t²/2} dt = √(π/2)
        let v = adaptive(&|t: f64| t * t * (-0.5 * t * t).exp(), 0.0, 14.0, 1e-13);
        assert_relative_eq!(v, (PI / 2.0).sqrt(), epsilon = 1e-12);
    }
}
