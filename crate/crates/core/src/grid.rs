use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform periodic 1-D grid in internal length units.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    length: f64,
    points: usize,
    origin: f64,
}

impl SpatialGrid {
    /// Grid of `points` samples (a power of two) on `[origin, origin + length)`.
    pub fn new(length: f64, points: usize, origin: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two ≥ 2, got {points}"
            )));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { length, points, origin })
    }

    /// Like [`SpatialGrid::new`] but also requires spacing ≤ π/(8k), i.e. at least four samples
    /// per period π/(2k) of the shortest potential grating.
    pub fn for_wavenumber(length: f64, points: usize, origin: f64, k: f64) -> Result<Self> {
        let grid = Self::new(length, points, origin)?;
        grid.check_resolves(k)?;
        Ok(grid)
    }

    /// Symmetric grid centred on zero.
    pub fn centered(length: f64, points: usize) -> Result<Self> {
        Self::new(length, points, -0.5 * length)
    }

    pub fn check_resolves(&self, k: f64) -> Result<()> {
        if k <= 0.0 {
            return Ok(());
        }
        let limit = PI / (8.0 * k);
        if self.spacing() > limit * (1.0 + 1e-12) {
            return Err(Error::UnresolvedPotential { spacing: self.spacing(), limit });
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |j| self.position(j))
    }

    /// Spacing 2π/L of the dual momentum grid.
    pub fn momentum_spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Signed FFT frequency index of slot `j`.
    pub fn momentum_index(&self, j: usize) -> i64 {
        let n = self.points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Momentum of FFT slot `j` (standard FFT ordering).
    pub fn momentum(&self, j: usize) -> f64 {
        self.momentum_index(j) as f64 * self.momentum_spacing()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.momentum(j)).collect()
    }

    /// Shortest distance between two points on the periodic domain.
    pub fn periodic_distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(self.length);
        d.min(self.length - d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(SpatialGrid::new(1.0, 1000, 0.0).is_err());
        assert!(SpatialGrid::new(-1.0, 1024, 0.0).is_err());
        assert!(SpatialGrid::new(1.0, 1, 0.0).is_err());
    }

    #[test]
    fn spacing_and_dual_grid() {
        let g = SpatialGrid::new(8.0, 16, -4.0).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.position(0), -4.0);
        assert!((g.momentum_spacing() - PI / 4.0).abs() < 1e-15);
        assert_eq!(g.momentum_index(7), 7);
        assert_eq!(g.momentum_index(8), -8);
        assert_eq!(g.momentum_index(15), -1);
    }

    #[test]
    fn resolution_requirement() {
        // k = 200: shortest period π/(2k), spacing must be ≤ π/1600
        let limit = PI / 1600.0;
        let n = 4096;
        assert!(SpatialGrid::for_wavenumber(limit * n as f64, n, 0.0, 200.0).is_ok());
        assert!(SpatialGrid::for_wavenumber(limit * n as f64 * 1.01, n, 0.0, 200.0).is_err());
    }

    #[test]
    fn periodic_distance_wraps() {
        let g = SpatialGrid::new(10.0, 16, 0.0).unwrap();
        assert!((g.periodic_distance(0.5, 9.5) - 1.0).abs() < 1e-12);
    }
}
