//! The periodic channel `[0, Lx) x [0, Ly]` with solid walls at `y = 0` and `y = Ly`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `d(x) < a`
    Near,
    /// `d(x) >= a`
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    Bottom,
    Top,
}

impl Wall {
    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Wall::Bottom => [0.0, -1.0],
            Wall::Top => [0.0, 1.0],
        }
    }

    /// Unit tangent `(-n2, n1)`.
    pub fn tangent(self) -> [f64; 2] {
        let n = self.normal();
        [-n[1], n[0]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDomain {
    grid: Grid2,
}

impl ChannelDomain {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Ok(Self {
            grid: Grid2::new(lx, ly, nx, ny)?,
        })
    }

    pub fn from_grid(grid: Grid2) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn lx(&self) -> f64 {
        self.grid.lx
    }

    pub fn ly(&self) -> f64 {
        self.grid.ly
    }

    /// Width below which the nearest wall point is unique.
    pub fn h_omega(&self) -> f64 {
        0.5 * self.grid.ly
    }

    pub fn tie_tolerance(&self) -> f64 {
        0.5 * self.grid.dy()
    }

    fn check_inside(&self, p: [f64; 2]) -> Result<()> {
        if !(p[1] >= 0.0 && p[1] <= self.grid.ly) || !p[0].is_finite() {
            return Err(Error::domain(format!(
                "point ({}, {}) lies outside the channel 0 <= y <= {}",
                p[0], p[1], self.grid.ly
            )));
        }
        Ok(())
    }

    pub fn distance(&self, p: [f64; 2]) -> Result<f64> {
        self.check_inside(p)?;
        Ok(p[1].min(self.grid.ly - p[1]))
    }

    /// Distance of grid row `j` from the nearest wall.
    pub fn row_distance(&self, j: usize) -> f64 {
        let y = self.grid.y(j);
        y.min(self.grid.ly - y)
    }

    /// Nearest wall of `p`, or an error inside the tie band around the midline.
    pub fn nearest_wall(&self, p: [f64; 2]) -> Result<Wall> {
        self.check_inside(p)?;
        let mid = 0.5 * self.grid.ly;
        if (p[1] - mid).abs() <= self.tie_tolerance() {
            return Err(Error::NonUniqueProjection { y: p[1] });
        }
        Ok(if p[1] < mid { Wall::Bottom } else { Wall::Top })
    }

    /// Nearest wall of grid row `j`; `None` for a midline row.
    pub fn row_wall(&self, j: usize) -> Option<Wall> {
        self.nearest_wall([0.0, self.grid.y(j)]).ok()
    }

    /// Outward normal of the nearer wall for grid row `j`, without the tie
    /// band; `None` only on an exact midline row.
    pub fn row_normal(&self, j: usize) -> Option<[f64; 2]> {
        let y = self.grid.y(j);
        let mid = 0.5 * self.grid.ly;
        if y < mid {
            Some(Wall::Bottom.normal())
        } else if y > mid {
            Some(Wall::Top.normal())
        } else {
            None
        }
    }

    /// `π(x)` and the outward normal there.
    pub fn project_to_wall(&self, p: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
        let wall = self.nearest_wall(p)?;
        let y = match wall {
            Wall::Bottom => 0.0,
            Wall::Top => self.grid.ly,
        };
        Ok(([p[0], y], wall.normal()))
    }

    /// Rows with `d < a` (near) or `d >= a` (far).
    pub fn strip_region(&self, a: f64, side: Side) -> Result<Region> {
        if !(a > 0.0 && a < self.h_omega()) {
            return Err(Error::domain(format!(
                "strip width {a} must lie in (0, {})",
                self.h_omega()
            )));
        }
        Ok(self.distance_region(|d| match side {
            Side::Near => d < a,
            Side::Far => d >= a,
        }))
    }

    /// Rows whose wall distance satisfies `pred`.
    pub fn distance_region(&self, pred: impl Fn(f64) -> bool) -> Region {
        Region::from_rows(&self.grid, |j| pred(self.row_distance(j)))
    }

    /// Rows with `lo <= d < hi`.
    pub fn band(&self, lo: f64, hi: f64) -> Region {
        self.distance_region(|d| d >= lo && d < hi)
    }

    /// `∫_{Ω_h} f(d(x)) dx = ∫_0^h f(y) |N(y)| dy` with `|N(y)| = 2 Lx`.
    ///
    /// The `y` integral samples `f` at the grid nodes and weights each node by
    /// the part of its control volume `[y_j - Δy/2, y_j + Δy/2]` lying in
    /// `[0, h]`, so `f ≡ 1` integrates exactly.
    pub fn tube_integral(&self, f: impl Fn(f64) -> f64, h: f64) -> Result<f64> {
        if !(h > 0.0 && h < self.h_omega()) {
            return Err(Error::domain(format!(
                "tube width {h} must lie in (0, {})",
                self.h_omega()
            )));
        }
        let dy = self.grid.dy();
        let mut acc = 0.0;
        for j in 0..self.grid.ny {
            let y = j as f64 * dy;
            let lo = (y - 0.5 * dy).max(0.0);
            let hi = (y + 0.5 * dy).min(h);
            if hi <= lo {
                break;
            }
            acc += f(y) * (hi - lo);
        }
        Ok(2.0 * self.grid.lx * acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dom() -> ChannelDomain {
        ChannelDomain::new(2.0 * PI, 2.0, 32, 41).unwrap()
    }

    #[test]
    fn distance_examples() {
        let d = dom();
        assert_eq!(d.distance([0.7, 0.3]).unwrap(), 0.3);
        assert!((d.distance([0.7, 1.9]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(d.distance([0.7, 1.0]).unwrap(), 1.0);
        assert!(d.distance([0.7, -0.1]).is_err());
        assert!(d.distance([0.7, 2.1]).is_err());
    }

    #[test]
    fn projection_examples() {
        let d = dom();
        assert_eq!(
            d.project_to_wall([0.7, 0.3]).unwrap(),
            ([0.7, 0.0], [0.0, -1.0])
        );
        assert_eq!(
            d.project_to_wall([0.7, 1.9]).unwrap(),
            ([0.7, 2.0], [0.0, 1.0])
        );
        assert!(matches!(
            d.project_to_wall([0.7, 1.0]),
            Err(Error::NonUniqueProjection { .. })
        ));
    }

    #[test]
    fn tangents() {
        assert_eq!(Wall::Bottom.tangent(), [1.0, 0.0]);
        assert_eq!(Wall::Top.tangent(), [-1.0, 0.0]);
    }

    #[test]
    fn strips_partition() {
        let d = dom();
        let a = d.ly() / 4.0;
        let near = d.strip_region(a, Side::Near).unwrap();
        let far = d.strip_region(a, Side::Far).unwrap();
        assert!(near.intersect(&far).is_empty());
        assert_eq!(near.union(&far), Region::full(d.grid()));
        assert!(d.strip_region(0.0, Side::Near).is_err());
        assert!(d.strip_region(1.0, Side::Near).is_err());
    }

    #[test]
    fn half_cell_strip_is_the_wall_rows() {
        let d = dom();
        let near = d.strip_region(d.grid().dy() / 2.0, Side::Near).unwrap();
        let rows: Vec<_> = near.rows().collect();
        assert_eq!(rows, vec![0, d.grid().top()]);
    }

    #[test]
    fn tube_integral_examples() {
        let d = ChannelDomain::new(2.0 * PI, 2.0, 16, 201).unwrap();
        let v = d.tube_integral(|_| 1.0, 0.1).unwrap();
        assert!((v - 2.0 * 2.0 * PI * 0.1).abs() < 1e-12);
        let h = 0.3;
        let v = d.tube_integral(|y| y, h).unwrap();
        assert!((v - d.lx() * h * h).abs() < d.lx() * d.grid().dy().powi(2));
    }

    #[test]
    fn distance_gradient_is_minus_normal() {
        let d = dom();
        let g = *d.grid();
        let dist = crate::fields::ScalarField2::from_row_fn(&g, |j| d.row_distance(j));
        let grad = dist.gradient();
        for j in 0..g.ny {
            let y = g.y(j);
            if d.row_distance(j) >= d.h_omega() - g.dy() || (y - g.ly / 2.0).abs() < 2.0 * g.dy() {
                continue;
            }
            let n = d.row_wall(j).unwrap().normal();
            for i in 0..g.nx {
                assert!((grad.c[0].at(i, j) + n[0]).abs() < 1e-12);
                assert!((grad.c[1].at(i, j) + n[1]).abs() < 1e-12);
            }
        }
    }
}
