//! Gridded fields on the channel.
//!
//! Nodes are periodic in `x` (`nx` nodes, spacing `Lx/nx`) and include both
//! wall rows in `y` (`ny` nodes, spacing `Ly/(ny-1)`). Storage is row-major
//! with rows running along `x`: node `(i, j)` lives at `j * nx + i`.
//!
//! Every region used by the diagnostics is a union of whole rows because the
//! wall distance depends on `y` only, so [`Region`] is a row mask.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default tolerance for imposed no-slip rows.
pub const BC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::domain(format!(
                "channel lengths must be positive, got Lx={lx}, Ly={ly}"
            )));
        }
        if nx < 8 || ny < 8 {
            return Err(Error::domain(format!(
                "grid needs at least 8x8 nodes, got {nx}x{ny}"
            )));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.ly
        } else {
            j as f64 * self.dy()
        }
    }

    /// Index of the last row (the top wall).
    #[inline]
    pub fn top(&self) -> usize {
        self.ny - 1
    }

    #[inline]
    pub fn is_wall_row(&self, j: usize) -> bool {
        j == 0 || j == self.top()
    }

    /// Trapezoid weight in `y`: half cells on the wall rows.
    #[inline]
    pub fn row_weight(&self, j: usize) -> f64 {
        if self.is_wall_row(j) {
            0.5 * self.dy()
        } else {
            self.dy()
        }
    }

    /// Quadrature weight of a single node.
    #[inline]
    pub fn node_weight(&self, j: usize) -> f64 {
        self.dx() * self.row_weight(j)
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub(crate) fn wrap_x(&self, i: i64) -> usize {
        i.rem_euclid(self.nx as i64) as usize
    }
}

/// A grid offset `r`, stored in whole cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Offset {
    pub di: i64,
    pub dj: i64,
}

impl Offset {
    pub const ZERO: Offset = Offset { di: 0, dj: 0 };

    pub fn new(di: i64, dj: i64) -> Self {
        Self { di, dj }
    }

    /// Snap a physical offset to the nearest grid multiple.
    pub fn snap(grid: &Grid2, r: [f64; 2]) -> Self {
        Self {
            di: (r[0] / grid.dx()).round() as i64,
            dj: (r[1] / grid.dy()).round() as i64,
        }
    }

    pub fn physical(&self, grid: &Grid2) -> [f64; 2] {
        [self.di as f64 * grid.dx(), self.dj as f64 * grid.dy()]
    }

    pub fn norm(&self, grid: &Grid2) -> f64 {
        let [a, b] = self.physical(grid);
        a.hypot(b)
    }
}

impl Add for Offset {
    type Output = Offset;
    fn add(self, o: Offset) -> Offset {
        Offset::new(self.di + o.di, self.dj + o.dj)
    }
}

/// Set of whole grid rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    grid: Grid2,
    rows: Vec<bool>,
}

impl Region {
    pub fn full(grid: &Grid2) -> Self {
        Self {
            grid: *grid,
            rows: vec![true; grid.ny],
        }
    }

    pub fn empty(grid: &Grid2) -> Self {
        Self {
            grid: *grid,
            rows: vec![false; grid.ny],
        }
    }

    pub fn from_rows(grid: &Grid2, mut pred: impl FnMut(usize) -> bool) -> Self {
        Self {
            grid: *grid,
            rows: (0..grid.ny).map(&mut pred).collect(),
        }
    }

    /// Rows whose `y` coordinate satisfies `pred`.
    pub fn from_y(grid: &Grid2, mut pred: impl FnMut(f64) -> bool) -> Self {
        Self::from_rows(grid, |j| pred(grid.y(j)))
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    #[inline]
    pub fn contains_row(&self, j: usize) -> bool {
        self.rows.get(j).copied().unwrap_or(false)
    }

    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(j, _)| j)
    }

    pub fn row_count(&self) -> usize {
        self.rows.iter().filter(|&&r| r).count()
    }

    /// Number of grid nodes in the region.
    pub fn len(&self) -> usize {
        self.row_count() * self.grid.nx
    }

    pub fn is_empty(&self) -> bool {
        self.row_count() == 0
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.contains_row(idx / self.grid.nx)
    }

    pub fn intersect(&self, other: &Region) -> Region {
        Region {
            grid: self.grid,
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn union(&self, other: &Region) -> Region {
        Region {
            grid: self.grid,
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn complement(&self) -> Region {
        Region {
            grid: self.grid,
            rows: self.rows.iter().map(|r| !r).collect(),
        }
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.rows.iter().zip(&other.rows).all(|(a, b)| !*a || *b)
    }

    /// `U ∩ (U - r)`: rows `j` of this region whose shifted row `j + dj` is
    /// also in the region.
    pub fn shift_valid(&self, r: Offset) -> Region {
        Region::from_rows(&self.grid, |j| {
            let k = j as i64 + r.dj;
            self.contains_row(j)
                && k >= 0
                && (k as usize) < self.grid.ny
                && self.contains_row(k as usize)
        })
    }

    /// Quadrature measure of the region.
    pub fn measure(&self) -> f64 {
        self.rows()
            .map(|j| self.grid.nx as f64 * self.grid.node_weight(j))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2 {
    grid: Grid2,
    data: Vec<f64>,
}

impl ScalarField2 {
    pub fn zeros(grid: &Grid2) -> Self {
        Self {
            grid: *grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid2, c: f64) -> Self {
        Self {
            grid: *grid,
            data: vec![c; grid.len()],
        }
    }

    pub fn from_vec(grid: &Grid2, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::domain(format!(
                "field has {} values, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid: *grid, data })
    }

    pub fn from_fn(grid: &Grid2, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let mut data = vec![0.0; grid.len()];
        data.par_chunks_mut(grid.nx)
            .enumerate()
            .for_each(|(j, row)| {
                let y = grid.y(j);
                for (i, v) in row.iter_mut().enumerate() {
                    *v = f(grid.x(i), y);
                }
            });
        Self { grid: *grid, data }
    }

    /// Field from a function of the row index only.
    pub fn from_row_fn(grid: &Grid2, f: impl Fn(usize) -> f64) -> Self {
        let mut data = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            let v = f(j);
            data[j * grid.nx..(j + 1) * grid.nx].fill(v);
        }
        Self { grid: *grid, data }
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.grid.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.grid.nx + i] = v;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.grid.nx..(j + 1) * self.grid.nx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Zero every row outside `region`.
    pub fn masked(&self, region: &Region) -> Self {
        let mut out = self.clone();
        let nx = self.grid.nx;
        for j in 0..self.grid.ny {
            if !region.contains_row(j) {
                out.data[j * nx..(j + 1) * nx].fill(0.0);
            }
        }
        out
    }

    /// Weighted integral over the whole grid.
    pub fn integral(&self) -> f64 {
        self.integral_over(&Region::full(&self.grid))
    }

    pub fn integral_over(&self, region: &Region) -> f64 {
        region
            .rows()
            .map(|j| self.grid.node_weight(j) * self.row(j).iter().sum::<f64>())
            .sum()
    }

    /// Weighted mean over the region.
    pub fn mean_over(&self, region: &Region) -> Result<f64> {
        if region.is_empty() {
            return Err(Error::EmptyRegion("mean over empty region".into()));
        }
        Ok(self.integral_over(region) / region.measure())
    }

    pub fn shift(&self, r: Offset) -> Result<Restricted<ScalarField2>> {
        let g = self.grid;
        if r.dj.unsigned_abs() as usize >= g.ny - 1 {
            return Err(Error::EmptyRegion(format!(
                "shift by {} rows leaves no valid rows (|r2| >= Ly)",
                r.dj
            )));
        }
        let region = Region::full(&g).shift_valid(r);
        let mut out = ScalarField2::zeros(&g);
        for j in region.rows() {
            let k = (j as i64 + r.dj) as usize;
            for i in 0..g.nx {
                out.data[g.idx(i, j)] = self.data[g.idx(g.wrap_x(i as i64 + r.di), k)];
            }
        }
        Ok(Restricted { field: out, region })
    }

    /// `δf(r; x) = f(x + r) - f(x)` on the valid rows.
    pub fn increment(&self, r: Offset) -> Result<Restricted<ScalarField2>> {
        let shifted = self.shift(r)?;
        let mut field = shifted.field;
        for j in shifted.region.rows() {
            let nx = self.grid.nx;
            for i in 0..nx {
                field.data[j * nx + i] -= self.data[j * nx + i];
            }
        }
        Ok(Restricted {
            field,
            region: shifted.region,
        })
    }

    pub fn d_dx(&self) -> ScalarField2 {
        let g = self.grid;
        let inv = 1.0 / (2.0 * g.dx());
        let mut out = ScalarField2::zeros(&g);
        out.data
            .par_chunks_mut(g.nx)
            .enumerate()
            .for_each(|(j, row)| {
                let src = &self.data[j * g.nx..(j + 1) * g.nx];
                for i in 0..g.nx {
                    let ip = if i + 1 == g.nx { 0 } else { i + 1 };
                    let im = if i == 0 { g.nx - 1 } else { i - 1 };
                    row[i] = (src[ip] - src[im]) * inv;
                }
            });
        out
    }

    pub fn d_dy(&self) -> ScalarField2 {
        let g = self.grid;
        let n = g.top();
        let inv = 1.0 / (2.0 * g.dy());
        let f = |i: usize, j: usize| self.data[j * g.nx + i];
        let mut out = ScalarField2::zeros(&g);
        out.data
            .par_chunks_mut(g.nx)
            .enumerate()
            .for_each(|(j, row)| {
                for (i, v) in row.iter_mut().enumerate() {
                    *v = if j == 0 {
                        (-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) * inv
                    } else if j == n {
                        (3.0 * f(i, n) - 4.0 * f(i, n - 1) + f(i, n - 2)) * inv
                    } else {
                        (f(i, j + 1) - f(i, j - 1)) * inv
                    };
                }
            });
        out
    }

    pub fn gradient(&self) -> VectorField2 {
        VectorField2::new(self.d_dx(), self.d_dy())
    }

    /// `∇⊥f = (-∂y f, ∂x f)`, so that a stream function `ψ` gives `v = ∇⊥ψ`.
    pub fn perp_gradient(&self) -> VectorField2 {
        VectorField2::new(self.d_dy().scale(-1.0), self.d_dx())
    }

    /// Second-order Laplacian.
    ///
    /// Away from the walls (rows `2..=ny-3`) this is the wide stencil obtained
    /// by composing the centred first differences, so `div(grad f)` and
    /// `laplacian(f)` coincide there. Rows next to the walls use the compact
    /// three-point stencil and the wall rows a one-sided four-point stencil.
    pub fn laplacian(&self) -> ScalarField2 {
        let g = self.grid;
        let n = g.top();
        let (dx, dy) = (g.dx(), g.dy());
        let wx = 1.0 / (4.0 * dx * dx);
        let wy = 1.0 / (4.0 * dy * dy);
        let cy = 1.0 / (dy * dy);
        let f = |i: usize, j: usize| self.data[j * g.nx + i];
        let mut out = ScalarField2::zeros(&g);
        out.data
            .par_chunks_mut(g.nx)
            .enumerate()
            .for_each(|(j, row)| {
                for (i, v) in row.iter_mut().enumerate() {
                    let ip = g.wrap_x(i as i64 + 2);
                    let im = g.wrap_x(i as i64 - 2);
                    let lxx = (f(ip, j) - 2.0 * f(i, j) + f(im, j)) * wx;
                    let lyy = if j == 0 {
                        (2.0 * f(i, 0) - 5.0 * f(i, 1) + 4.0 * f(i, 2) - f(i, 3)) * cy
                    } else if j == n {
                        (2.0 * f(i, n) - 5.0 * f(i, n - 1) + 4.0 * f(i, n - 2) - f(i, n - 3)) * cy
                    } else if j == 1 || j + 1 == n {
                        (f(i, j - 1) - 2.0 * f(i, j) + f(i, j + 1)) * cy
                    } else {
                        (f(i, j + 2) - 2.0 * f(i, j) + f(i, j - 2)) * wy
                    };
                    *v = lxx + lyy;
                }
            });
        out
    }
}

impl Add for &ScalarField2 {
    type Output = ScalarField2;
    fn add(self, o: &ScalarField2) -> ScalarField2 {
        self.zip_map(o, |a, b| a + b)
    }
}

impl Sub for &ScalarField2 {
    type Output = ScalarField2;
    fn sub(self, o: &ScalarField2) -> ScalarField2 {
        self.zip_map(o, |a, b| a - b)
    }
}

impl Mul<&ScalarField2> for &ScalarField2 {
    type Output = ScalarField2;
    fn mul(self, o: &ScalarField2) -> ScalarField2 {
        self.zip_map(o, |a, b| a * b)
    }
}

/// A field together with the rows on which it is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Restricted<F> {
    pub field: F,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    pub c: [ScalarField2; 2],
    /// Set when the field is a velocity with imposed no-slip wall rows.
    pub no_slip: bool,
}

impl VectorField2 {
    pub fn new(x: ScalarField2, y: ScalarField2) -> Self {
        assert_eq!(x.grid, y.grid, "components on different grids");
        Self {
            c: [x, y],
            no_slip: false,
        }
    }

    pub fn zeros(grid: &Grid2) -> Self {
        Self::new(ScalarField2::zeros(grid), ScalarField2::zeros(grid))
    }

    pub fn from_fn(grid: &Grid2, f: impl Fn(f64, f64) -> [f64; 2] + Sync) -> Self {
        Self::new(
            ScalarField2::from_fn(grid, |x, y| f(x, y)[0]),
            ScalarField2::from_fn(grid, |x, y| f(x, y)[1]),
        )
    }

    pub fn grid(&self) -> &Grid2 {
        self.c[0].grid()
    }

    pub fn components(&self) -> [&ScalarField2; 2] {
        [&self.c[0], &self.c[1]]
    }

    pub fn magnitude(&self) -> ScalarField2 {
        self.c[0].zip_map(&self.c[1], |a, b| a.hypot(b))
    }

    pub fn magnitude_sq(&self) -> ScalarField2 {
        self.c[0].zip_map(&self.c[1], |a, b| a * a + b * b)
    }

    pub fn dot(&self, o: &VectorField2) -> ScalarField2 {
        &(&self.c[0] * &o.c[0]) + &(&self.c[1] * &o.c[1])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            c: [self.c[0].scale(s), self.c[1].scale(s)],
            no_slip: self.no_slip,
        }
    }

    pub fn sub(&self, o: &VectorField2) -> Self {
        Self::new(&self.c[0] - &o.c[0], &self.c[1] - &o.c[1])
    }

    pub fn add(&self, o: &VectorField2) -> Self {
        Self::new(&self.c[0] + &o.c[0], &self.c[1] + &o.c[1])
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(ScalarField2::is_finite)
    }

    /// Largest velocity magnitude on the two wall rows.
    pub fn wall_max(&self) -> f64 {
        let g = *self.grid();
        [0, g.top()]
            .iter()
            .flat_map(|&j| (0..g.nx).map(move |i| (i, j)))
            .map(|(i, j)| self.c[0].at(i, j).hypot(self.c[1].at(i, j)))
            .fold(0.0, f64::max)
    }

    /// Zero the wall rows and tag the field as no-slip.
    pub fn impose_no_slip(&mut self) {
        let g = *self.grid();
        for comp in &mut self.c {
            let nx = g.nx;
            comp.data_mut()[..nx].fill(0.0);
            let top = g.top();
            comp.data_mut()[top * nx..].fill(0.0);
        }
        self.no_slip = true;
    }

    pub fn check_no_slip(&self, tol: f64) -> Result<()> {
        if !self.no_slip {
            return Err(Error::domain("velocity is not tagged no-slip"));
        }
        let m = self.wall_max();
        if m > tol {
            return Err(Error::domain(format!(
                "wall velocity {m:e} exceeds no-slip tolerance {tol:e}"
            )));
        }
        Ok(())
    }

    pub fn shift(&self, r: Offset) -> Result<Restricted<VectorField2>> {
        let a = self.c[0].shift(r)?;
        let b = self.c[1].shift(r)?;
        Ok(Restricted {
            field: VectorField2::new(a.field, b.field),
            region: a.region,
        })
    }

    pub fn increment(&self, r: Offset) -> Result<Restricted<VectorField2>> {
        let a = self.c[0].increment(r)?;
        let b = self.c[1].increment(r)?;
        Ok(Restricted {
            field: VectorField2::new(a.field, b.field),
            region: a.region,
        })
    }

    /// `(∇u)_{ab} = ∂_a u_b`.
    pub fn gradient(&self) -> TensorField2 {
        let [gx, gy] = [self.c[0].gradient(), self.c[1].gradient()];
        TensorField2 {
            c: [
                [gx.c[0].clone(), gy.c[0].clone()],
                [gx.c[1].clone(), gy.c[1].clone()],
            ],
        }
    }

    pub fn divergence(&self) -> ScalarField2 {
        &self.c[0].d_dx() + &self.c[1].d_dy()
    }

    pub fn laplacian(&self) -> VectorField2 {
        VectorField2::new(self.c[0].laplacian(), self.c[1].laplacian())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorField2 {
    pub c: [[ScalarField2; 2]; 2],
}

impl TensorField2 {
    pub fn zeros(grid: &Grid2) -> Self {
        let z = ScalarField2::zeros(grid);
        Self {
            c: [[z.clone(), z.clone()], [z.clone(), z]],
        }
    }

    pub fn grid(&self) -> &Grid2 {
        self.c[0][0].grid()
    }

    /// Pointwise Frobenius norm.
    pub fn frobenius(&self) -> ScalarField2 {
        let g = *self.grid();
        let mut out = ScalarField2::zeros(&g);
        for (k, v) in out.data_mut().iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += self.c[a][b].data()[k].powi(2);
                }
            }
            *v = s.sqrt();
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .flatten()
            .map(ScalarField2::max_abs)
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().flatten().all(ScalarField2::is_finite)
    }
}

/// `‖f‖_{L^p(region)}` by grid quadrature; `p = ∞` gives the maximum.
pub fn region_norm(field: &ScalarField2, region: &Region, p: f64) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::EmptyRegion("norm over empty region".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::domain(format!(
            "norm exponent must be >= 1, got {p}"
        )));
    }
    let g = field.grid();
    if p.is_infinite() {
        return Ok(region
            .rows()
            .flat_map(|j| field.row(j).iter())
            .fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    let s: f64 = region
        .rows()
        .map(|j| g.node_weight(j) * field.row(j).iter().map(|v| v.abs().powf(p)).sum::<f64>())
        .sum();
    Ok(s.powf(1.0 / p))
}

/// `‖g‖_{L^q(0,T)}` for samples `(t, g(t))`: composite trapezoid for finite `q`,
/// maximum for `q = ∞`. A single sample returns its magnitude.
pub fn time_norm(series: &[(f64, f64)], q: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptyRegion("time norm of empty series".into()));
    }
    if q.is_infinite() || series.len() == 1 {
        return Ok(series.iter().fold(0.0, |m: f64, (_, v)| m.max(v.abs())));
    }
    let s = trapezoid(series.iter().map(|&(t, v)| (t, v.abs().powf(q))));
    Ok(s.powf(1.0 / q))
}

/// Composite trapezoid rule over samples `(t, f(t))`.
pub fn trapezoid(samples: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut it = samples.into_iter();
    let Some(mut prev) = it.next() else {
        return 0.0;
    };
    let mut acc = 0.0;
    for cur in it {
        acc += 0.5 * (cur.0 - prev.0) * (cur.1 + prev.1);
        prev = cur;
    }
    acc
}

/// Running trapezoid integral `∫_0^{t_k} f` for every sample.
pub fn cumulative_trapezoid(samples: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    for (k, s) in samples.iter().enumerate() {
        if k > 0 {
            let p = samples[k - 1];
            acc += 0.5 * (s.0 - p.0) * (s.1 + p.1);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid2 {
        Grid2::new(2.0 * PI, 2.0, 32, 33).unwrap()
    }

    #[test]
    fn grid_rejects_small_or_degenerate() {
        assert!(Grid2::new(1.0, 1.0, 4, 16).is_err());
        assert!(Grid2::new(0.0, 1.0, 16, 16).is_err());
        assert!(Grid2::new(1.0, -1.0, 16, 16).is_err());
    }

    #[test]
    fn shift_identity_and_periodicity() {
        let g = grid();
        let f = ScalarField2::from_fn(&g, |x, y| x.sin() + y * y);
        let s0 = f.shift(Offset::ZERO).unwrap();
        assert_eq!(s0.field, f);
        assert_eq!(s0.region.row_count(), g.ny);
        let s = f.shift(Offset::snap(&g, [g.lx, 0.0])).unwrap();
        assert_eq!(s.field, f);
    }

    #[test]
    fn shift_in_y_invalidates_top_row() {
        let g = grid();
        let f = ScalarField2::from_fn(&g, |_, y| y);
        let s = f.shift(Offset::new(0, 1)).unwrap();
        assert!(!s.region.contains_row(g.top()));
        for j in 0..g.top() {
            assert!(s.region.contains_row(j));
            assert!((s.field.at(3, j) - (g.y(j) + g.dy())).abs() < 1e-14);
        }
        assert!(f.shift(Offset::new(0, (g.ny - 1) as i64)).is_err());
    }

    #[test]
    fn increments() {
        let g = grid();
        let c = ScalarField2::constant(&g, 3.5);
        assert_eq!(
            c.increment(Offset::new(3, -2)).unwrap().field.max_abs(),
            0.0
        );

        let f = ScalarField2::from_fn(&g, |x, _| (2.0 * PI * x / g.lx).sin());
        let d = f.increment(Offset::new(g.nx as i64 / 2, 0)).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let want = -2.0 * (2.0 * PI * g.x(i) / g.lx).sin();
                assert!((d.field.at(i, j) - want).abs() < 1e-12);
            }
        }

        let f = ScalarField2::from_fn(&g, |_, y| y * y);
        let r = Offset::new(0, 3);
        let s = r.physical(&g)[1];
        let d = f.increment(r).unwrap();
        for j in d.region.rows() {
            let y = g.y(j);
            assert!((d.field.at(0, j) - (2.0 * y * s + s * s)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_exactness() {
        let g = grid();
        let f = ScalarField2::from_fn(&g, |_, y| y);
        let gr = f.gradient();
        assert!(gr.c[0].max_abs() < 1e-14);
        assert!(gr.c[1].map(|v| v - 1.0).max_abs() < 1e-12);

        let v = VectorField2::from_fn(&g, |x, y| [-y, x]);
        // x is not periodic; check away from the seam
        let div = v.divergence();
        for j in 0..g.ny {
            for i in 2..g.nx - 2 {
                assert!(div.at(i, j).abs() < 1e-12);
            }
        }

        let q = ScalarField2::from_fn(&g, |_, y| 3.0 * y * y - y + 2.0);
        let lap = q.laplacian();
        assert!(lap.map(|v| v - 6.0).max_abs() < 1e-9);
    }

    #[test]
    fn laplacian_is_second_order() {
        let err = |n: usize| {
            let g = Grid2::new(1.0, 1.0, n, n + 1).unwrap();
            let k = 2.0 * PI;
            let f = ScalarField2::from_fn(&g, |x, _| (k * x).sin());
            let lap = f.laplacian();
            let exact = ScalarField2::from_fn(&g, |x, _| -k * k * (k * x).sin());
            (&lap - &exact).max_abs()
        };
        let (e1, e2) = (err(32), err(64));
        let slope = (e1 / e2).log2();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn div_grad_matches_laplacian_in_interior() {
        let g = grid();
        let f = ScalarField2::from_fn(&g, |x, y| (x).sin() * (1.3 * y).cos() + y * y * y);
        let a = f.gradient().divergence();
        let b = f.laplacian();
        for j in 2..g.ny - 2 {
            for i in 0..g.nx {
                assert!((a.at(i, j) - b.at(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn norms() {
        let g = grid();
        let full = Region::full(&g);
        let one = ScalarField2::constant(&g, 1.0);
        let l2 = region_norm(&one, &full, 2.0).unwrap();
        assert!((l2 - (g.lx * g.ly).sqrt()).abs() < 1e-12);

        let s = ScalarField2::from_fn(&g, |x, _| (2.0 * PI * x / g.lx).sin());
        let l2 = region_norm(&s, &full, 2.0).unwrap();
        assert!((l2 * l2 - g.lx * g.ly / 2.0).abs() < 1e-10);

        let a = 0.5;
        let strip = Region::from_y(&g, |y| y < a);
        let yf = ScalarField2::from_fn(&g, |_, y| y);
        let linf = region_norm(&yf, &strip, f64::INFINITY).unwrap();
        assert!((linf - a).abs() <= g.dy());
        assert!(region_norm(&yf, &Region::empty(&g), 2.0).is_err());
    }

    #[test]
    fn time_norms() {
        let series: Vec<_> = (0..=100).map(|k| (k as f64 / 100.0, 2.0)).collect();
        assert!((time_norm(&series, 3.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(time_norm(&series, f64::INFINITY).unwrap(), 2.0);
        assert_eq!(time_norm(&[(0.0, -4.0)], 3.0).unwrap(), 4.0);
    }
}
