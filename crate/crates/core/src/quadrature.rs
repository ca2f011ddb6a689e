//! Gauss-Legendre rules with refinement by doubling the number of panels.

use crate::error::{Error, Result};

const ORDER: usize = 20;
const MAX_PANELS: usize = 1 << 12;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn composite(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        total += rule
            .0
            .iter()
            .zip(&rule.1)
            .map(|(x, w)| w * f(mid + 0.5 * width * x))
            .sum::<f64>()
            * 0.5
            * width;
    }
    total
}

/// Integrate `f` over `[a, b]`, doubling panels until two successive
/// estimates agree to `rel_tol` (relative).
pub fn adaptive_gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let rule = gauss_legendre(ORDER);
    let mut panels = 1;
    let mut prev = composite(&f, a, b, panels, &rule);
    while panels < MAX_PANELS {
        panels *= 2;
        let next = composite(&f, a, b, panels, &rule);
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "quadrature did not reach relative tolerance {rel_tol:e}"
    )))
}

/// Tensor-product version of [`adaptive_gauss`] over a rectangle.
pub fn adaptive_gauss_2d(
    f: impl Fn(f64, f64) -> f64,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    rel_tol: f64,
) -> Result<f64> {
    let rule = gauss_legendre(ORDER);
    let inner = |panels: usize| {
        composite(
            &|y| composite(&|x| f(x, y), ax, bx, panels, &rule),
            ay,
            by,
            panels,
            &rule,
        )
    };
    let mut panels = 1;
    let mut prev = inner(panels);
    while panels < 64 {
        panels *= 2;
        let next = inner(panels);
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "2D quadrature did not reach relative tolerance {rel_tol:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 8 is within 2n-1 = 9
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((int - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_integrals() {
        let v = adaptive_gauss(f64::exp, 0.0, 1.0, 1e-15).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
        let v = adaptive_gauss_2d(|x, y| x * y, (0.0, 1.0), (0.0, 2.0), 1e-15).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }
}
