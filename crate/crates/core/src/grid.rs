//! Cell-centered radial mesh on the ball B_R(0) ⊂ ℝⁿ.
//!
//! Cell i spans `[faces[i], faces[i+1]]` with `faces[0] = 0` and
//! `faces[N] = R`. The origin is a face, never a cell center, so no value
//! is ever evaluated at r = 0.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Geometric widths `h_min·ρ^i` summing to R.
    Geometric { h_min: f64, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n: usize,
    radius: f64,
    grading: Grading,
    faces: Vec<f64>,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    /// Surface measure ω_n r^{n−1} at every face (zero at the origin).
    areas: Vec<f64>,
}

/// Surface area of the unit sphere in ℝⁿ.
pub fn unit_sphere_area(n: usize) -> f64 {
    // 2π^{n/2}/Γ(n/2) via the recursion ω_{n+2} = 2π ω_n / n.
    let (mut area, mut k) = if n % 2 == 0 { (2.0 * PI, 2) } else { (2.0, 1) };
    while k < n {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

impl RadialGrid {
    pub fn uniform(n: usize, radius: f64, cells: usize) -> Result<Self> {
        Self::validate(n, radius, cells)?;
        let h = radius / cells as f64;
        let faces = (0..=cells)
            .map(|i| if i == cells { radius } else { h * i as f64 })
            .collect();
        Ok(Self::from_faces(n, radius, Grading::Uniform, faces))
    }

    /// Geometrically graded mesh whose innermost cell has width `h_min`.
    ///
    /// Falls back to a uniform mesh when `cells · h_min ≥ R`.
    pub fn graded(n: usize, radius: f64, cells: usize, h_min: f64) -> Result<Self> {
        Self::validate(n, radius, cells)?;
        if !(h_min > 0.0) {
            return Err(Error::Precondition(format!("h_min = {h_min} must be positive")));
        }
        if h_min * cells as f64 >= radius {
            return Self::uniform(n, radius, cells);
        }
        // Solve h_min (ρ^N − 1)/(ρ − 1) = R for ρ > 1 by bisection.
        let total = |rho: f64| h_min * ((rho.powi(cells as i32) - 1.0) / (rho - 1.0));
        let (mut lo, mut hi) = (1.0 + 1e-15, 2.0);
        while total(hi) < radius {
            hi = 1.0 + 2.0 * (hi - 1.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(mid) < radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let ratio = 0.5 * (lo + hi);
        let mut faces = Vec::with_capacity(cells + 1);
        faces.push(0.0);
        let mut width = h_min;
        let mut r = 0.0;
        for _ in 0..cells - 1 {
            r += width;
            faces.push(r);
            width *= ratio;
        }
        faces.push(radius);
        if faces.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(format!(
                "graded mesh with h_min = {h_min} and {cells} cells is degenerate"
            )));
        }
        Ok(Self::from_faces(
            n,
            radius,
            Grading::Geometric { h_min, ratio },
            faces,
        ))
    }

    fn validate(n: usize, radius: f64, cells: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::Precondition(format!("n = {n} must be >= 2")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Precondition(format!("radius {radius} must be positive")));
        }
        if cells < 2 {
            return Err(Error::Precondition(format!("need at least 2 cells, got {cells}")));
        }
        Ok(())
    }

    fn from_faces(n: usize, radius: f64, grading: Grading, faces: Vec<f64>) -> Self {
        let omega = unit_sphere_area(n);
        let nf = n as f64;
        let centers = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let volumes = faces
            .windows(2)
            .map(|w| omega / nf * (w[1].powi(n as i32) - w[0].powi(n as i32)))
            .collect();
        let areas = faces.iter().map(|&r| omega * r.powi(n as i32 - 1)).collect();
        Self {
            n,
            radius,
            grading,
            faces,
            centers,
            volumes,
            areas,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Face areas, indexed like `faces`.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Width of the innermost cell.
    pub fn h_min(&self) -> f64 {
        self.faces[1]
    }

    /// |B_R| = ω_n Rⁿ / n.
    pub fn ball_volume(&self) -> f64 {
        unit_sphere_area(self.n) / self.n as f64 * self.radius.powi(self.n as i32)
    }

    /// Distance between the centers adjacent to interior face `j` (1 ≤ j ≤ N−1).
    #[inline]
    pub fn center_gap(&self, j: usize) -> f64 {
        self.centers[j] - self.centers[j - 1]
    }

    /// Σ vol_i · values_i.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.volumes.iter().zip(values).map(|(w, x)| w * x).sum()
    }
}

/// Cell averages of a scalar on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::Precondition(format!(
                "field has {} values for {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at cell {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.centers().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<RadialGrid>, value: f64) -> Result<Self> {
        let cells = grid.cells();
        Self::new(grid, vec![value; cells])
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// max_i r_i^power · |x_i|.
    pub fn weighted_sup(&self, power: f64) -> f64 {
        self.grid
            .centers()
            .iter()
            .zip(&self.values)
            .map(|(&r, &x)| r.powf(power) * x.abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn volumes_sum_to_ball() {
        for n in 2..=5 {
            for grid in [
                RadialGrid::uniform(n, 1.3, 97).unwrap(),
                RadialGrid::graded(n, 0.1, 2048, 1e-6).unwrap(),
            ] {
                let total: f64 = grid.volumes().iter().sum();
                let rel = (total - grid.ball_volume()).abs() / grid.ball_volume();
                assert!(rel < 1e-13, "n = {n}: rel {rel}");
                assert!(grid.faces().windows(2).all(|w| w[1] > w[0]));
                assert!(grid.volumes().iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn graded_grid_hits_requested_h_min() {
        let g = RadialGrid::graded(3, 1.0, 512, 1e-4).unwrap();
        assert!((g.h_min() - 1e-4).abs() < 1e-18);
        assert_eq!(*g.faces().last().unwrap(), 1.0);
        assert!(matches!(g.grading(), Grading::Geometric { ratio, .. } if ratio > 1.0));
        // Coarse request falls back to uniform.
        let g = RadialGrid::graded(3, 1.0, 16, 0.5).unwrap();
        assert_eq!(g.grading(), Grading::Uniform);
    }

    #[test]
    fn field_rejects_bad_input() {
        let grid = Arc::new(RadialGrid::uniform(2, 1.0, 4).unwrap());
        assert!(RadialField::new(grid.clone(), vec![0.0; 3]).is_err());
        assert!(RadialField::new(grid, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
