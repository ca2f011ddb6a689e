use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MAX_DIM;

/// Proxy surface used to stand in for the far field during compression.
///
/// The surface is a circle or sphere centred on the box with radius
/// `radius_factor` times the box side length. Active points inside that
/// radius are kept as exact interaction rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    pub radius_factor: f64,
    pub points_2d: usize,
    pub points_3d: usize,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            radius_factor: 1.5,
            points_2d: 64,
            points_3d: 288,
        }
    }
}

impl ProxyConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.radius_factor > 1.0) || !self.radius_factor.is_finite() {
            return Err(Error::config(format!(
                "proxy radius factor must exceed 1 (got {})",
                self.radius_factor
            )));
        }
        let count = self.count(dim);
        if count < 4 * dim {
            return Err(Error::config(format!(
                "at least {} proxy points are needed in dimension {dim} (got {count})",
                4 * dim
            )));
        }
        Ok(())
    }

    pub fn count(&self, dim: usize) -> usize {
        if dim == 3 {
            self.points_3d
        } else {
            self.points_2d
        }
    }
}

/// Proxy points around `center` at distance `radius`.
///
/// Uniform on a circle for `dim <= 2` (the line problem lives in the plane),
/// a Fibonacci lattice on the sphere for `dim == 3`.
pub fn proxy_points(dim: usize, count: usize, center: &[f64; MAX_DIM], radius: f64) -> Vec<[f64; MAX_DIM]> {
    let mut out = Vec::with_capacity(count);
    if dim == 3 {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for k in 0..count {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            out.push([
                center[0] + radius * rho * phi.cos(),
                center[1] + radius * rho * phi.sin(),
                center[2] + radius * z,
            ]);
        }
    } else {
        for k in 0..count {
            let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            out.push([center[0] + radius * t.cos(), center[1] + radius * t.sin(), 0.0]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_lie_on_surface() {
        let c = [0.5, 0.25, -1.0];
        for (dim, count) in [(2, 64), (3, 288)] {
            let pts = proxy_points(dim, count, &c, 0.3);
            assert_eq!(pts.len(), count);
            for p in &pts {
                let r = (0..dim).map(|a| (p[a] - c[a]).powi(2)).sum::<f64>().sqrt();
                assert!((r - 0.3).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_points_are_spread() {
        let pts = proxy_points(3, 288, &[0.0; 3], 1.0);
        let mean: Vec<f64> = (0..3).map(|a| pts.iter().map(|p| p[a]).sum::<f64>() / 288.0).collect();
        assert!(mean.iter().all(|m| m.abs() < 1e-2));
        let mut min_gap = f64::INFINITY;
        for i in 0..pts.len() {
            for j in 0..i {
                let d = (0..3).map(|a| (pts[i][a] - pts[j][a]).powi(2)).sum::<f64>().sqrt();
                min_gap = min_gap.min(d);
            }
        }
        assert!(min_gap > 0.1, "{min_gap}");
    }

    #[test]
    fn validation() {
        assert!(ProxyConfig::default().validate(2).is_ok());
        assert!(ProxyConfig::default().validate(3).is_ok());
        let bad = ProxyConfig { radius_factor: 0.9, ..Default::default() };
        assert!(bad.validate(2).is_err());
        let few = ProxyConfig { points_3d: 8, ..Default::default() };
        assert!(few.validate(3).is_err());
    }
}
