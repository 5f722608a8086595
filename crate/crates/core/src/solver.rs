//! Incompressible Navier–Stokes in the periodic channel with no-slip walls.
//!
//! Velocity and pressure are collocated on the grid nodes. Each step is a
//! two-stage Runge–Kutta (Heun) update of skew-symmetric advection, compact
//! diffusion and an optional body force, with a pressure projection after
//! every stage. The projection uses the same centred differences as the
//! divergence check, so the projected velocity is discretely solenoidal on
//! every interior row up to round-off.
//!
//! In `x` the pressure equation is diagonalized by an FFT. In `y` the
//! composition of centred difference operators only couples rows of equal
//! parity, so each Fourier mode splits into two tridiagonal chains. The two
//! extra degrees of freedom per mode (the pressures on the wall rows) are
//! fixed by a one-sided second-order Neumann condition written on the chain
//! itself, `φ_0 = (4φ_2 - φ_4)/3`, which keeps the systems tridiagonal. For the
//! modes with a vanishing `x` symbol the closure instead removes the full
//! wall-normal velocity on the rows next to the walls, as incompressibility
//! forces.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2, ScalarField2, VectorField2};
use crate::mollify::simpson;
use crate::snapshot::Snapshot;

/// Default bound on the interior divergence after projection.
pub const DIV_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid2> {
        Grid2::new(self.lx, self.ly, self.nx, self.ny)
    }
}

impl From<Grid2> for GridSpec {
    fn from(g: Grid2) -> Self {
        Self {
            lx: g.lx,
            ly: g.ly,
            nx: g.nx,
            ny: g.ny,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// Start from rest under the body force `(g, 0)`.
    Poiseuille { g: f64 },
    /// `u = (sin(nπy/Ly), 0)`.
    DecayingShear {
        #[serde(default = "one")]
        n: u32,
    },
    /// Counter-rotating Gaussian vortex pair heading for the bottom wall.
    DipoleWall {
        #[serde(default = "one_f")]
        amplitude: f64,
    },
    /// Initial velocity read from an `OBL1` file on the configured grid.
    CustomSnapshot { path: PathBuf },
}

fn one() -> u32 {
    1
}

fn one_f() -> f64 {
    1.0
}

fn default_cfl() -> f64 {
    0.5
}

fn default_cadence() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub nu: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub grid: GridSpec,
    pub scenario: Scenario,
    /// Snapshot every `cadence` steps (the initial and final states are
    /// always included).
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default = "default_cfl")]
    pub cfl_limit: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<Grid2> {
        let grid = self.grid.grid().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!(
                "viscosity must be positive, got {}",
                self.nu
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be at least 1".into()));
        }
        if !(self.cfl_limit > 0.0 && self.cfl_limit <= 1.0) {
            return Err(Error::Config(format!(
                "cfl_limit must lie in (0, 1], got {}",
                self.cfl_limit
            )));
        }
        if let Scenario::DecayingShear { n } = self.scenario {
            if n == 0 {
                return Err(Error::Config("decaying shear mode must be >= 1".into()));
            }
        }
        Ok(grid)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn force(&self) -> [f64; 2] {
        match self.scenario {
            Scenario::Poiseuille { g } => [g, 0.0],
            _ => [0.0, 0.0],
        }
    }
}

/// `sin(nπy/Ly) exp(-ν (nπ/Ly)² t)`.
pub fn decaying_shear_exact(n: u32, ly: f64, nu: f64, y: f64, t: f64) -> f64 {
    let k = n as f64 * std::f64::consts::PI / ly;
    (k * y).sin() * (-nu * k * k * t).exp()
}

/// `G y (Ly - y) / (2ν)`.
pub fn poiseuille_exact(g: f64, ly: f64, nu: f64, y: f64) -> f64 {
    g * y * (ly - y) / (2.0 * nu)
}

type Column = Vec<Complex<f64>>;

/// Result of one projection.
#[derive(Debug, Clone)]
pub struct Projection {
    pub u: VectorField2,
    /// Potential with `u = u* - ∇φ`, zero weighted mean.
    pub phi: ScalarField2,
    /// Constant removed from `φ` to reach zero mean.
    pub gauge: f64,
    /// Largest interior divergence after projection.
    pub max_div: f64,
}

/// FFT-in-x / tridiagonal-in-y projection onto discretely solenoidal fields.
pub struct Projector {
    grid: Grid2,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `sin(k dx)/dx` per mode, exactly zero for the mean and Nyquist modes.
    symbol: Vec<f64>,
}

impl std::fmt::Debug for Projector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Projector")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Projector {
    pub fn new(grid: &Grid2) -> Self {
        let mut planner = FftPlanner::new();
        let nx = grid.nx;
        let symbol = (0..nx)
            .map(|k| {
                if k == 0 || 2 * k == nx {
                    0.0
                } else {
                    (2.0 * std::f64::consts::PI * k as f64 / nx as f64).sin() / grid.dx()
                }
            })
            .collect();
        Self {
            grid: *grid,
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
            symbol,
        }
    }

    fn rows_forward(&self, f: &ScalarField2) -> Vec<Vec<Complex<f64>>> {
        let nx = self.grid.nx;
        (0..self.grid.ny)
            .into_par_iter()
            .map(|j| {
                let mut row: Vec<Complex<f64>> =
                    f.row(j).iter().map(|&v| Complex::new(v, 0.0)).collect();
                self.fwd.process(&mut row);
                debug_assert_eq!(row.len(), nx);
                row
            })
            .collect()
    }

    fn rows_inverse(&self, rows: Vec<Vec<Complex<f64>>>) -> ScalarField2 {
        let nx = self.grid.nx;
        let scale = 1.0 / nx as f64;
        let data: Vec<f64> = rows
            .into_par_iter()
            .flat_map_iter(|mut row| {
                self.inv.process(&mut row);
                row.into_iter().map(move |c| c.re * scale)
            })
            .collect();
        ScalarField2::from_vec(&self.grid, data).expect("row layout matches grid")
    }

    /// Project `ustar` (wall rows are treated as zero).
    pub fn project(&self, ustar: &VectorField2) -> Result<Projection> {
        let g = self.grid;
        let (nx, n) = (g.nx, g.top());
        let dy = g.dy();
        let uh = self.rows_forward(&ustar.c[0]);
        let mut vh = self.rows_forward(&ustar.c[1]);
        vh[0].iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        vh[n].iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));

        // Solve every mode independently; results are columns of φ̂ and ĝ.
        let cols: Vec<(Column, Column)> = (0..nx)
            .into_par_iter()
            .map(|k| {
                let s = self.symbol[k];
                let singular = s == 0.0;
                let i = Complex::new(0.0, 1.0);
                // R_j = -(D u*)_j on interior rows
                let rhs: Vec<Complex<f64>> = (0..=n)
                    .map(|j| {
                        if j == 0 || j == n {
                            Complex::new(0.0, 0.0)
                        } else {
                            -(i * s * uh[j][k] + (vh[j + 1][k] - vh[j - 1][k]) / (2.0 * dy))
                        }
                    })
                    .collect();
                // Wall-normal correction g_m as a known part plus a linear
                // combination of same-parity potentials.
                let zero = Complex::new(0.0, 0.0);
                let lin = |m: usize| -> (Complex<f64>, [(usize, f64); 2]) {
                    let c = 1.0 / (2.0 * dy);
                    if m == 0 || m == n {
                        (zero, [(m, 0.0), (m, 0.0)])
                    } else if singular && (m == 1 || m == n - 1) {
                        (vh[m][k], [(m, 0.0), (m, 0.0)])
                    } else if m == 1 {
                        // φ_0 = (4φ_2 - φ_4)/3: one-sided Neumann on the chain
                        (zero, [(2, -1.0 / (6.0 * dy)), (4, 1.0 / (6.0 * dy))])
                    } else if m == n - 1 {
                        (
                            zero,
                            [(n - 4, -1.0 / (6.0 * dy)), (n - 2, 1.0 / (6.0 * dy))],
                        )
                    } else {
                        (zero, [(m - 1, -c), (m + 1, c)])
                    }
                };
                let mut phi = vec![zero; n + 1];
                for parity in 0..2 {
                    let rows: Vec<usize> = (1..n).filter(|j| j % 2 == parity).collect();
                    let m = rows.len();
                    let mut lower = vec![0.0; m];
                    let mut diag = vec![s * s; m];
                    let mut upper = vec![0.0; m];
                    let mut b = vec![zero; m];
                    for (r, &j) in rows.iter().enumerate() {
                        b[r] = rhs[j];
                        // s²φ_j - (g_{j+1} - g_{j-1})/(2dy) = R_j
                        for (mm, sign) in [(j + 1, -1.0), (j - 1, 1.0)] {
                            let (known, terms) = lin(mm);
                            b[r] -= sign * known / (2.0 * dy);
                            for (idx, c) in terms {
                                if c == 0.0 {
                                    continue;
                                }
                                let coef = sign * c / (2.0 * dy);
                                match idx as i64 - j as i64 {
                                    -2 => lower[r] += coef,
                                    0 => diag[r] += coef,
                                    2 => upper[r] += coef,
                                    _ => unreachable!("pressure stencil leaves its chain"),
                                }
                            }
                        }
                    }
                    if singular {
                        diag[0] = 1.0;
                        upper[0] = 0.0;
                        b[0] = zero;
                    }
                    let x = thomas(&lower, &diag, &upper, &b);
                    let mean = if singular {
                        x.iter().sum::<Complex<f64>>() / m as f64
                    } else {
                        zero
                    };
                    for (r, &j) in rows.iter().enumerate() {
                        phi[j] = x[r] - mean;
                    }
                }
                let mut gcol = vec![zero; n + 1];
                for (j, g) in gcol.iter_mut().enumerate().take(n).skip(1) {
                    let (known, terms) = lin(j);
                    *g = known
                        + terms
                            .iter()
                            .map(|&(idx, c)| phi[idx] * c)
                            .sum::<Complex<f64>>();
                }
                phi[0] = phi[2] - 2.0 * dy * gcol[1];
                phi[n] = phi[n - 2] + 2.0 * dy * gcol[n - 1];
                (phi, gcol)
            })
            .collect();

        let mut phi_rows = vec![vec![Complex::new(0.0, 0.0); nx]; n + 1];
        let mut g_rows = vec![vec![Complex::new(0.0, 0.0); nx]; n + 1];
        for (k, (p, gc)) in cols.into_iter().enumerate() {
            for j in 0..=n {
                phi_rows[j][k] = p[j];
                g_rows[j][k] = gc[j];
            }
        }
        let phi = self.rows_inverse(phi_rows);
        let gy = self.rows_inverse(g_rows);
        if !phi.is_finite() || !gy.is_finite() {
            return Err(Error::Numerical(
                "pressure solve produced non-finite values".into(),
            ));
        }
        let phix = phi.d_dx();
        let mut u = ustar.clone();
        for j in 0..=n {
            for i in 0..nx {
                let idx = g.idx(i, j);
                if j == 0 || j == n {
                    u.c[0].data_mut()[idx] = 0.0;
                    u.c[1].data_mut()[idx] = 0.0;
                } else {
                    u.c[0].data_mut()[idx] -= phix.data()[idx];
                    u.c[1].data_mut()[idx] -= gy.data()[idx];
                }
            }
        }
        u.no_slip = true;
        let gauge = phi.integral() / (g.lx * g.ly);
        let phi = phi.map(|v| v - gauge);
        let max_div = interior_divergence(&u);
        Ok(Projection {
            u,
            phi,
            gauge,
            max_div,
        })
    }
}

/// Tridiagonal solve with real coefficients and complex right-hand side.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], b: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![Complex::new(0.0, 0.0); m];
    c[0] = upper[0] / diag[0];
    d[0] = b[0] / diag[0];
    for r in 1..m {
        let den = diag[r] - lower[r] * c[r - 1];
        c[r] = upper[r] / den;
        d[r] = (b[r] - lower[r] * d[r - 1]) / den;
    }
    let mut x = vec![Complex::new(0.0, 0.0); m];
    x[m - 1] = d[m - 1];
    for r in (0..m - 1).rev() {
        x[r] = d[r] - c[r] * x[r + 1];
    }
    x
}

/// Largest `|∇·u|` over the interior rows.
pub fn interior_divergence(u: &VectorField2) -> f64 {
    let g = *u.grid();
    let div = u.divergence();
    (1..g.top())
        .flat_map(|j| div.row(j).iter())
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Pointwise density of `ν|∇u|²` whose weighted integral equals the
/// dissipation of the solver's discrete diffusion operator exactly.
///
/// Squared edge differences are shared between the two end nodes; the wall
/// rows carry half weight in the quadrature, so they take the whole of their
/// adjacent wall-normal edge.
pub fn dissipation_density(u: &VectorField2, nu: f64) -> ScalarField2 {
    let g = *u.grid();
    let (nx, n) = (g.nx, g.top());
    let (dx, dy) = (g.dx(), g.dy());
    let mut out = ScalarField2::zeros(&g);
    out.data_mut()
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(j, row)| {
            for (i, o) in row.iter_mut().enumerate() {
                let ip = if i + 1 == nx { 0 } else { i + 1 };
                let im = if i == 0 { nx - 1 } else { i - 1 };
                let mut e = 0.0;
                for c in &u.c {
                    let f = |ii: usize, jj: usize| c.data()[jj * nx + ii];
                    let ex =
                        ((f(ip, j) - f(i, j)) / dx).powi(2) + ((f(i, j) - f(im, j)) / dx).powi(2);
                    let up = if j < n {
                        ((f(i, j + 1) - f(i, j)) / dy).powi(2)
                    } else {
                        0.0
                    };
                    let dn = if j > 0 {
                        ((f(i, j) - f(i, j - 1)) / dy).powi(2)
                    } else {
                        0.0
                    };
                    let ey = if j == 0 || j == n {
                        up + dn
                    } else {
                        0.5 * (up + dn)
                    };
                    e += 0.5 * ex + ey;
                }
                *o = nu * e;
            }
        });
    out
}

/// `½ ∫ |u|²`.
pub fn kinetic_energy(u: &VectorField2) -> f64 {
    0.5 * u.magnitude_sq().integral()
}

/// Steady shear flow `v = (V(y), 0)` with stream function `ψ`, `v = ∇⊥ψ`.
#[derive(Debug, Clone)]
pub struct EulerReference {
    pub v: VectorField2,
    pub psi: ScalarField2,
    /// `‖∇v‖_∞ = max |V'|`, sampled densely.
    pub grad_sup: f64,
}

/// Build the shear reference for a zero-mean profile `V`. `ψ(y) = -∫_0^y V`
/// vanishes on both walls.
pub fn euler_reference(grid: &Grid2, profile: impl Fn(f64) -> f64) -> Result<EulerReference> {
    let ly = grid.ly;
    let total = simpson(&profile, 0.0, ly, 20_000);
    let scale = simpson(|y| profile(y).abs(), 0.0, ly, 20_000);
    if total.abs() > 1e-10 * scale.max(1e-300) && total.abs() > 1e-14 {
        return Err(Error::domain(format!(
            "shear profile has mean {total:e}; the stream function cannot vanish on both walls"
        )));
    }
    let mut psi_rows = vec![0.0; grid.ny];
    for j in 1..grid.ny {
        let (y0, y1) = (grid.y(j - 1), grid.y(j));
        psi_rows[j] = psi_rows[j - 1] - simpson(&profile, y0, y1, 64);
    }
    let psi = ScalarField2::from_row_fn(grid, |j| psi_rows[j]);
    let v = VectorField2::new(
        ScalarField2::from_row_fn(grid, |j| profile(grid.y(j))),
        ScalarField2::zeros(grid),
    );
    let m = 4096;
    let h = ly / m as f64;
    let grad_sup = (0..=m)
        .map(|k| {
            let y = k as f64 * h;
            let (a, b) = ((y - 0.5 * h).max(0.0), (y + 0.5 * h).min(ly));
            ((profile(b) - profile(a)) / (b - a)).abs()
        })
        .fold(0.0, f64::max);
    Ok(EulerReference { v, psi, grad_sup })
}

/// Initial velocity for a scenario, projected and with no-slip imposed.
pub fn initial_velocity(cfg: &SolverConfig, grid: &Grid2) -> Result<VectorField2> {
    let mut u = match &cfg.scenario {
        Scenario::Poiseuille { .. } => VectorField2::zeros(grid),
        Scenario::DecayingShear { n } => {
            let k = *n as f64 * std::f64::consts::PI / grid.ly;
            VectorField2::new(
                ScalarField2::from_row_fn(grid, |j| (k * grid.y(j)).sin()),
                ScalarField2::zeros(grid),
            )
        }
        Scenario::DipoleWall { amplitude } => dipole(grid, *amplitude),
        Scenario::CustomSnapshot { path } => {
            let s = Snapshot::read(path)?;
            if s.grid() != grid {
                return Err(Error::Config(format!(
                    "snapshot {} is on a {}x{} grid, configuration says {}x{}",
                    path.display(),
                    s.grid().nx,
                    s.grid().ny,
                    grid.nx,
                    grid.ny
                )));
            }
            s.u
        }
    };
    u.impose_no_slip();
    if matches!(
        cfg.scenario,
        Scenario::DipoleWall { .. } | Scenario::CustomSnapshot { .. }
    ) {
        u = Projector::new(grid).project(&u)?.u;
    }
    Ok(u)
}

/// Two Gaussian vortices of radius `Ly/10` centred `Ly/4` above the bottom
/// wall; the left one turns clockwise, so the pair self-propels downwards.
fn dipole(grid: &Grid2, amplitude: f64) -> VectorField2 {
    let (lx, ly) = (grid.lx, grid.ly);
    let r0 = ly / 10.0;
    let yc = ly / 4.0;
    let sep = 1.2 * r0;
    let centres = [(0.5 * lx - sep, amplitude), (0.5 * lx + sep, -amplitude)];
    let psi = ScalarField2::from_fn(grid, |x, y| {
        let mut s = 0.0;
        for &(xc, a) in &centres {
            for img in -1..=1 {
                let dxp = x - xc + img as f64 * lx;
                s += a * r0 * (-(dxp * dxp + (y - yc).powi(2)) / (r0 * r0)).exp();
            }
        }
        s
    });
    psi.perp_gradient()
}

/// One row of the energy ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    pub kinetic_energy: f64,
    /// `ν‖∇u‖²` from the solver's diffusion operator.
    pub dissipation_rate: f64,
    /// `ν∫_0^t ‖∇u‖²` by the trapezoid rule.
    pub cumulative_dissipation: f64,
    /// `∫ f·u`.
    pub forcing_power: f64,
    /// `∫_0^t ∫ f·u`.
    pub forcing_work: f64,
    pub max_divergence: f64,
    /// Constant removed from the pressure to fix its mean.
    pub pressure_gauge: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    /// Largest `|KE(t) + D(t) - KE(0) - W(t)|`, the defect of the energy identity.
    pub fn max_imbalance(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        self.rows
            .iter()
            .map(|r| {
                (r.kinetic_energy + r.cumulative_dissipation
                    - first.kinetic_energy
                    - r.forcing_work)
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `KE(t) + D(t) - KE(0) - W(t)`.
    pub fn max_excess(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        self.rows
            .iter()
            .map(|r| {
                r.kinetic_energy + r.cumulative_dissipation - first.kinetic_energy - r.forcing_work
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The discrete energy inequality with slack `rel_slack · max KE`.
    pub fn energy_inequality_holds(&self, rel_slack: f64) -> bool {
        let kmax = self
            .rows
            .iter()
            .map(|r| r.kinetic_energy)
            .fold(0.0, f64::max);
        self.max_excess() <= rel_slack * kmax + 1e-14
    }
}

/// Time integrator state.
pub struct Solver {
    cfg: SolverConfig,
    grid: Grid2,
    projector: Projector,
    u: VectorField2,
    t: f64,
    step: usize,
    force: [f64; 2],
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        let grid = cfg.validate()?;
        let u = initial_velocity(&cfg, &grid)?;
        Self::with_velocity(cfg, u)
    }

    /// Start from a given no-slip velocity instead of the scenario's.
    pub fn with_velocity(cfg: SolverConfig, mut u: VectorField2) -> Result<Self> {
        let grid = cfg.validate()?;
        if *u.grid() != grid {
            return Err(Error::Config(
                "initial velocity is not on the configured grid".into(),
            ));
        }
        u.impose_no_slip();
        let force = cfg.force();
        Ok(Self {
            projector: Projector::new(&grid),
            cfg,
            grid,
            u,
            t: 0.0,
            step: 0,
            force,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn velocity(&self) -> &VectorField2 {
        &self.u
    }

    /// `-A(u) + νΔ_h u + f` on interior rows, zero on the walls.
    fn rhs(&self, u: &VectorField2) -> VectorField2 {
        let g = self.grid;
        let (nx, n) = (g.nx, g.top());
        let (dx, dy) = (g.dx(), g.dy());
        let nu = self.cfg.nu;
        let uu = u.c[0].data();
        let vv = u.c[1].data();
        let mut out = [ScalarField2::zeros(&g), ScalarField2::zeros(&g)];
        for (c, field) in out.iter_mut().enumerate() {
            let w = u.c[c].data();
            let fc = self.force[c];
            field
                .data_mut()
                .par_chunks_mut(nx)
                .enumerate()
                .for_each(|(j, row)| {
                    if j == 0 || j == n {
                        return;
                    }
                    let at = |i: usize, jj: usize| jj * nx + i;
                    for (i, o) in row.iter_mut().enumerate() {
                        let ip = if i + 1 == nx { 0 } else { i + 1 };
                        let im = if i == 0 { nx - 1 } else { i - 1 };
                        let k = at(i, j);
                        let (e, west, north, south) =
                            (at(ip, j), at(im, j), at(i, j + 1), at(i, j - 1));
                        let conv = uu[k] * (w[e] - w[west]) / (2.0 * dx)
                            + vv[k] * (w[north] - w[south]) / (2.0 * dy);
                        let divf = (uu[e] * w[e] - uu[west] * w[west]) / (2.0 * dx)
                            + (vv[north] * w[north] - vv[south] * w[south]) / (2.0 * dy);
                        let lap = (w[e] - 2.0 * w[k] + w[west]) / (dx * dx)
                            + (w[north] - 2.0 * w[k] + w[south]) / (dy * dy);
                        *o = -0.5 * (conv + divf) + nu * lap + fc;
                    }
                });
        }
        let [a, b] = out;
        VectorField2::new(a, b)
    }

    /// Stability limit `cfl · min(h/‖u‖_∞, h²/(4ν))` with `h = min(Δx, Δy)`.
    pub fn stable_dt(&self) -> f64 {
        let h = self.grid.dx().min(self.grid.dy());
        let umax = self.u.magnitude().max_abs();
        let adv = if umax > 0.0 { h / umax } else { f64::INFINITY };
        self.cfg.cfl_limit * adv.min(h * h / (4.0 * self.cfg.nu))
    }

    pub fn step(&mut self) -> Result<()> {
        let dt = self.cfg.dt;
        let limit = self.stable_dt();
        if dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        let f0 = self.rhs(&self.u);
        let stage = self.u.add(&f0.scale(dt));
        let p1 = self.projector.project(&stage)?;
        let f1 = self.rhs(&p1.u);
        let stage2 = self.u.add(&p1.u).add(&f1.scale(dt)).scale(0.5);
        let p2 = self.projector.project(&stage2)?;
        if !p2.u.is_finite() {
            return Err(Error::Numerical(format!(
                "velocity blew up at t = {}",
                self.t + dt
            )));
        }
        if p2.max_div > DIV_TOLERANCE {
            return Err(Error::Numerical(format!(
                "projection left divergence {:e} above tolerance {DIV_TOLERANCE:e}",
                p2.max_div
            )));
        }
        self.u = p2.u;
        self.step += 1;
        self.t = self.step as f64 * dt;
        Ok(())
    }

    /// Pressure consistent with the current velocity: the potential removed
    /// when projecting the momentum right-hand side.
    pub fn pressure(&self) -> Result<(ScalarField2, f64)> {
        let p = self.projector.project(&self.rhs(&self.u))?;
        Ok((p.phi, p.gauge))
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        Ok(self.snapshot_with_gauge()?.0)
    }

    fn snapshot_with_gauge(&self) -> Result<(Snapshot, f64)> {
        let (p, gauge) = self.pressure()?;
        let mut u = self.u.clone();
        u.no_slip = true;
        Ok((
            Snapshot {
                t: self.t,
                nu: self.cfg.nu,
                u,
                p,
            },
            gauge,
        ))
    }

    fn ledger_row(&self, prev: Option<&LedgerRow>, gauge: f64) -> LedgerRow {
        let rate = dissipation_density(&self.u, self.cfg.nu).integral();
        let power = self.force[0] * self.u.c[0].integral() + self.force[1] * self.u.c[1].integral();
        let (cum, work) = match prev {
            Some(p) => {
                let dt = self.t - p.t;
                (
                    p.cumulative_dissipation + 0.5 * dt * (p.dissipation_rate + rate),
                    p.forcing_work + 0.5 * dt * (p.forcing_power + power),
                )
            }
            None => (0.0, 0.0),
        };
        LedgerRow {
            t: self.t,
            kinetic_energy: kinetic_energy(&self.u),
            dissipation_rate: rate,
            cumulative_dissipation: cum,
            forcing_power: power,
            forcing_work: work,
            max_divergence: interior_divergence(&self.u),
            pressure_gauge: gauge,
        }
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub ledger: EnergyLedger,
    pub steps: usize,
    pub snapshots: usize,
}

/// Integrate to the horizon, handing every cadence snapshot to `observer`.
/// The energy ledger records every step.
pub fn run(
    cfg: &SolverConfig,
    observer: impl FnMut(&Snapshot) -> Result<()>,
) -> Result<RunSummary> {
    let solver = Solver::new(cfg.clone())?;
    run_solver(solver, observer)
}

pub fn run_solver(
    mut solver: Solver,
    mut observer: impl FnMut(&Snapshot) -> Result<()>,
) -> Result<RunSummary> {
    let steps = solver.cfg.steps();
    let cadence = solver.cfg.cadence;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut count = 0;
    let (snap, gauge) = solver.snapshot_with_gauge()?;
    rows.push(solver.ledger_row(None, gauge));
    observer(&snap)?;
    count += 1;
    for k in 1..=steps {
        solver.step()?;
        let emit = k % cadence == 0 || k == steps;
        let gauge = if emit {
            let (snap, gauge) = solver.snapshot_with_gauge()?;
            observer(&snap)?;
            count += 1;
            gauge
        } else {
            f64::NAN
        };
        let row = solver.ledger_row(rows.last(), gauge);
        rows.push(row);
    }
    Ok(RunSummary {
        ledger: EnergyLedger { rows },
        steps,
        snapshots: count,
    })
}

/// Run and keep every emitted snapshot in memory.
pub fn run_collect(cfg: &SolverConfig) -> Result<(Vec<Snapshot>, RunSummary)> {
    let mut snaps = Vec::new();
    let summary = run(cfg, |s| {
        snaps.push(s.clone());
        Ok(())
    })?;
    Ok((snaps, summary))
}
