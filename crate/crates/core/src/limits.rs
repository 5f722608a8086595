//! Vanishing-viscosity experiments: boundary-layer scale selection, the
//! viscosity sweep with its hypothesis table, near-wall (Kato layer)
//! dissipation and the relative energy of Navier-Stokes solutions against a
//! steady Euler shear.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{besov_seminorm, dyadic_probes, loglog_slope, max_octave, SlopeFit};
use crate::budget::{check_uniform, weak_wall_modulus, Budget, BudgetScales};
use crate::error::{Error, Result};
use crate::fields::{
    cumulative_trapezoid, region_norm, time_norm, Grid2, Region, ScalarField2, VectorField2,
};
use crate::geometry::{ChannelDomain, Side};
use crate::mollify::CutoffProfile;
use crate::snapshot::Snapshot;
use crate::solver::{
    dissipation_density, initial_velocity, run, EulerReference, GridSpec, Scenario, SolverConfig,
};

/// `β = min{1, 1/(2(1−σ))}` for `σ ∈ [1/3, 1]`.
pub fn beta(sigma: f64) -> Result<f64> {
    if !(1.0 / 3.0 - 1e-15..=1.0).contains(&sigma) {
        return Err(Error::domain(format!(
            "sigma must lie in [1/3, 1], got {sigma}"
        )));
    }
    if sigma >= 0.5 {
        return Ok(1.0);
    }
    Ok((0.5 / (1.0 - sigma)).min(1.0))
}

/// `(h, ℓ) = (¾ν^β, h/6)`.
pub fn layer_scales(nu: f64, beta: f64) -> (f64, f64) {
    let h = 0.75 * nu.powf(beta);
    (h, h / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KatoValue {
    pub a: f64,
    /// `ν ∫₀ᵀ ∫_{Ω_a} |∇u|²`
    pub value: f64,
}

/// Streaming strip dissipation over a ladder of widths. `a = Ly/2` means
/// the whole channel.
#[derive(Debug, Clone)]
pub struct KatoLadder {
    ladder: Vec<f64>,
    regions: Vec<Region>,
    series: Vec<(f64, Vec<f64>)>,
}

impl KatoLadder {
    pub fn new(grid: &Grid2, ladder: &[f64]) -> Result<Self> {
        let dom = ChannelDomain::from_grid(*grid);
        let half = dom.h_omega();
        let regions = ladder
            .iter()
            .map(|&a| {
                if !(a > 0.0) || a > half * (1.0 + 1e-12) {
                    return Err(Error::domain(format!(
                        "strip width {a} must lie in (0, {half}]"
                    )));
                }
                Ok(if a >= half * (1.0 - 1e-12) {
                    Region::full(grid)
                } else {
                    dom.distance_region(|d| d < a)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ladder: ladder.to_vec(),
            regions,
            series: Vec::new(),
        })
    }

    /// Instantaneous rates `ν ∫_{Ω_a} |∇u|²`.
    pub fn rates(&self, snap: &Snapshot) -> Vec<f64> {
        let density = dissipation_density(&snap.u, snap.nu);
        self.regions
            .iter()
            .map(|r| density.integral_over(r))
            .collect()
    }

    pub fn push(&mut self, snap: &Snapshot) {
        let rates = self.rates(snap);
        self.series.push((snap.t, rates));
    }

    pub fn finish(self) -> Result<Vec<KatoValue>> {
        let times: Vec<f64> = self.series.iter().map(|s| s.0).collect();
        check_uniform(&times)?;
        Ok(self
            .ladder
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let s: Vec<(f64, f64)> = self.series.iter().map(|(t, r)| (*t, r[k])).collect();
                KatoValue {
                    a,
                    value: cumulative_trapezoid(&s).last().copied().unwrap_or(0.0),
                }
            })
            .collect())
    }
}

pub fn kato_dissipation(snapshots: &[Snapshot], ladder: &[f64]) -> Result<Vec<KatoValue>> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::domain("no snapshots"))?;
    let mut k = KatoLadder::new(first.grid(), ladder)?;
    let rates: Vec<Vec<f64>> = snapshots.par_iter().map(|s| k.rates(s)).collect();
    k.series = snapshots.iter().map(|s| s.t).zip(rates).collect();
    k.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareRatio {
    pub value: f64,
    /// The gradient vanishes on the strip; the value is 0 by convention.
    pub degenerate: bool,
}

/// `‖u‖_{L²(Ω_a)} / (a ‖∇u‖_{L²(Ω_a)})` for a no-slip field.
pub fn poincare_strip_ratio(u: &VectorField2, a: f64) -> Result<PoincareRatio> {
    if !u.no_slip {
        return Err(Error::domain(
            "Poincare strip ratio needs a field tagged no-slip",
        ));
    }
    let dom = ChannelDomain::from_grid(*u.grid());
    let strip = dom.strip_region(a, Side::Near)?;
    let num = u.magnitude_sq().integral_over(&strip).sqrt();
    let den = u
        .gradient()
        .frobenius()
        .map(|v| v * v)
        .integral_over(&strip)
        .sqrt();
    if den == 0.0 {
        return Ok(PoincareRatio {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(PoincareRatio {
        value: num / (a * den),
        degenerate: false,
    })
}

fn check_wall_values(psi: &ScalarField2) -> Result<()> {
    let g = psi.grid();
    let m = psi
        .row(0)
        .iter()
        .chain(psi.row(g.top()))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 1e-10 {
        return Err(Error::domain(format!(
            "stream function does not vanish on the walls (|ψ| = {m:e})"
        )));
    }
    Ok(())
}

fn check_half_width(grid: &Grid2, h: f64) -> Result<ChannelDomain> {
    let dom = ChannelDomain::from_grid(*grid);
    if !(h > 0.0 && h < dom.h_omega()) {
        return Err(Error::domain(format!(
            "localization width {h} must lie in (0, {})",
            dom.h_omega()
        )));
    }
    Ok(dom)
}

/// `v^h = ∇⊥(θ_h ψ)` with `θ_h = η(d/h)`, by centred differences.
pub fn localized_euler(psi: &ScalarField2, h: f64) -> Result<VectorField2> {
    check_wall_values(psi)?;
    let dom = check_half_width(psi.grid(), h)?;
    let theta = CutoffProfile::half_width(h).cutoff_field(&dom);
    Ok((&theta * psi).perp_gradient())
}

/// `θ_h v − η'_h τ̂ ψ`, the pointwise form of `v^h`; `η'_h` is the derivative
/// in `d`.
pub fn localized_euler_decomposition(
    v: &VectorField2,
    psi: &ScalarField2,
    h: f64,
) -> Result<VectorField2> {
    check_wall_values(psi)?;
    let g = *psi.grid();
    let dom = check_half_width(&g, h)?;
    let profile = CutoffProfile::half_width(h);
    let mut out = VectorField2::zeros(&g);
    for j in 0..g.ny {
        let d = dom.row_distance(j);
        let th = profile.eta(d);
        let ep = profile.eta_prime(d);
        let tau = match dom.row_normal(j) {
            Some(n) => [-n[1], n[0]],
            None if ep == 0.0 => [0.0; 2],
            None => return Err(Error::NonUniqueProjection { y: g.y(j) }),
        };
        for i in 0..g.nx {
            let k = g.idx(i, j);
            for c in 0..2 {
                out.c[c].data_mut()[k] = th * v.c[c].data()[k] - ep * tau[c] * psi.data()[k];
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeEnergyRow {
    pub t: f64,
    /// `½‖u(t) − v‖²`
    pub measured: f64,
    pub gronwall_bound: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelativeEnergyReport {
    pub nu: f64,
    pub h: f64,
    /// `‖∇v‖_∞` used in the envelope.
    pub grad_sup: f64,
    pub rows: Vec<RelativeEnergyRow>,
    /// `measured <= bound + 1e-6 KE(0)` at every reported time.
    pub holds: bool,
    pub max_excess: f64,
}

impl RelativeEnergyReport {
    pub fn sup_measured(&self) -> f64 {
        self.rows.iter().fold(0.0, |m: f64, r| m.max(r.measured))
    }
}

#[derive(Debug, Clone, Copy)]
struct Rates {
    t: f64,
    measured: f64,
    /// `½(‖u − v‖² − ‖u − v^h‖²)`
    e1_part: f64,
    e2: f64,
    e3: f64,
    e4: f64,
}

/// Relative energy of a Navier-Stokes run against a steady shear `v`, with
/// the error terms of the Grönwall argument assembled by quadrature.
///
/// The shear reference has constant pressure and `∂ₜψ = 0`, so those parts
/// of the band flux drop out.
#[derive(Debug, Clone)]
pub struct RelativeEnergy {
    nu: f64,
    h: f64,
    v: VectorField2,
    vh: VectorField2,
    lap_vh: VectorField2,
    grad_sup: f64,
    /// `η'_h(d)` and the outward normal per row.
    band: Vec<(f64, [f64; 2])>,
    u0: Option<VectorField2>,
    rates: Vec<Rates>,
}

impl RelativeEnergy {
    pub fn new(reference: &EulerReference, nu: f64, h: f64) -> Result<Self> {
        let g = *reference.v.grid();
        let dom = check_half_width(&g, h)?;
        if h < g.dy() {
            warn!("localization width h = {h} is below the grid spacing {}; the cutoff band holds no grid rows", g.dy());
        }
        let vh = localized_euler(&reference.psi, h)?;
        let lap_vh = vh.laplacian();
        let profile = CutoffProfile::half_width(h);
        let band = (0..g.ny)
            .map(|j| {
                let ep = profile.eta_prime(dom.row_distance(j));
                (ep, dom.row_normal(j).unwrap_or([0.0; 2]))
            })
            .collect();
        Ok(Self {
            nu,
            h,
            v: reference.v.clone(),
            vh,
            lap_vh,
            grad_sup: reference.grad_sup,
            band,
            u0: None,
            rates: Vec::new(),
        })
    }

    pub fn push(&mut self, snap: &Snapshot) -> Result<()> {
        let u = &snap.u;
        if self.u0.is_none() {
            let err = u.sub(&self.v).magnitude_sq().integral().sqrt();
            let norm = self.v.magnitude_sq().integral().sqrt();
            if err > 1e-8 * norm.max(1e-300) {
                return Err(Error::domain(format!(
                    "initial velocity differs from the reference by {:e} (relative L2)",
                    err / norm
                )));
            }
            self.u0 = Some(u.clone());
        }
        self.rates.push(self.rates_at(snap.t, u));
        Ok(())
    }

    fn rates_at(&self, t: f64, u: &VectorField2) -> Rates {
        let g = *u.grid();
        let measured = 0.5 * u.sub(&self.v).magnitude_sq().integral();
        let e1_part = measured - 0.5 * u.sub(&self.vh).magnitude_sq().integral();
        let (mut e2, mut e3) = (0.0, 0.0);
        for (j, &(ep, n)) in self.band.iter().enumerate() {
            if ep == 0.0 {
                continue;
            }
            let wall = if n[1] < 0.0 { 0 } else { g.top() };
            let w = g.node_weight(j);
            for i in 0..g.nx {
                // pinned increment w = u(x) − u(π(x))
                let wv = [
                    u.c[0].at(i, j) - u.c[0].at(i, wall),
                    u.c[1].at(i, j) - u.c[1].at(i, wall),
                ];
                let vv = [self.v.c[0].at(i, j), self.v.c[1].at(i, j)];
                let nw = n[0] * wv[0] + n[1] * wv[1];
                e2 += w * ep * nw * (wv[0] * wv[0] + wv[1] * wv[1]);
                let nd = n[0] * (vv[0] - wv[0]) + n[1] * (vv[1] - wv[1]);
                e3 += w * ep * nd * 0.5 * (vv[0] * vv[0] + vv[1] * vv[1]);
            }
        }
        let e4 = self.nu * self.lap_vh.dot(u).integral();
        Rates {
            t,
            measured,
            e1_part,
            e2,
            e3,
            e4,
        }
    }

    pub fn finish(self) -> Result<RelativeEnergyReport> {
        let u0 = self
            .u0
            .as_ref()
            .ok_or_else(|| Error::domain("no snapshots"))?;
        let times: Vec<f64> = self.rates.iter().map(|r| r.t).collect();
        check_uniform(&times)?;
        let vh_sq = self.vh.magnitude_sq().integral();
        let u0_sq = u0.magnitude_sq().integral();
        let cross = u0.dot(&self.vh).integral();
        let e1_const = 0.5 * (vh_sq + u0_sq - 2.0 * cross);
        let integrate = |f: fn(&Rates) -> f64| {
            cumulative_trapezoid(&self.rates.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>())
        };
        let (e2, e3, e4) = (
            integrate(|r| r.e2),
            integrate(|r| r.e3),
            integrate(|r| r.e4),
        );
        let k = self.grad_sup;
        let mut rows = Vec::with_capacity(self.rates.len());
        let mut conv = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for (n, r) in self.rates.iter().enumerate() {
            let e1 = r.e1_part + e1_const;
            let e = e1.abs() + e2[n].abs() + e3[n].abs() + e4[n].abs();
            // I(t) = ∫₀ᵗ E(s) K exp(K(t − s)) ds
            if let Some((tp, ep)) = prev {
                let dt = r.t - tp;
                let grow = (k * dt).exp();
                conv = grow * conv + 0.5 * dt * k * (ep * grow + e);
            }
            prev = Some((r.t, e));
            rows.push(RelativeEnergyRow {
                t: r.t,
                measured: r.measured,
                gronwall_bound: e + conv,
                e1,
                e2: e2[n],
                e3: e3[n],
                e4: e4[n],
            });
        }
        let ke0 = 0.5 * u0_sq;
        let max_excess = rows.iter().fold(f64::NEG_INFINITY, |m, r| {
            m.max(r.measured - r.gronwall_bound)
        });
        Ok(RelativeEnergyReport {
            nu: self.nu,
            h: self.h,
            grad_sup: k,
            holds: max_excess <= 1e-6 * ke0,
            max_excess,
            rows,
        })
    }
}

pub fn relative_energy(
    snapshots: &[Snapshot],
    reference: &EulerReference,
    nu: f64,
    h: f64,
) -> Result<RelativeEnergyReport> {
    let mut re = RelativeEnergy::new(reference, nu, h)?;
    for s in snapshots {
        re.push(s)?;
    }
    re.finish()
}

fn default_factor() -> f64 {
    2.0
}

fn default_p() -> f64 {
    3.0
}

fn default_cfl() -> f64 {
    0.5
}

fn default_cadence() -> usize {
    1
}

/// One viscosity ladder on a fixed grid and initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Strictly decreasing.
    pub nus: Vec<f64>,
    pub sigma: f64,
    pub scenario: Scenario,
    pub grid: GridSpec,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Fixed time step; when absent each run uses 90% of its stability limit.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default = "default_cfl")]
    pub cfl_limit: f64,
    #[serde(default = "default_factor")]
    pub uniformity_factor: f64,
    /// Integrability exponent of the interior Besov seminorm.
    #[serde(default = "default_p")]
    pub besov_p: f64,
}

impl SweepSpec {
    fn validate(&self) -> Result<f64> {
        let b = beta(self.sigma)?;
        if self.nus.is_empty() {
            return Err(Error::Config("viscosity list is empty".into()));
        }
        if self.nus.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return Err(Error::Config("viscosities must be positive".into()));
        }
        if self.nus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "viscosity list must be strictly decreasing".into(),
            ));
        }
        if !(self.uniformity_factor >= 1.0) {
            return Err(Error::Config(format!(
                "uniformity factor must be >= 1, got {}",
                self.uniformity_factor
            )));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be at least 1".into()));
        }
        self.grid.grid().map_err(|e| Error::Config(e.to_string()))?;
        Ok(b)
    }

    /// Solver configuration for one viscosity. The step count is a multiple of
    /// the cadence so that snapshots are equally spaced.
    pub fn solver_config(&self, nu: f64) -> Result<SolverConfig> {
        let mut cfg = SolverConfig {
            nu,
            dt: 1.0,
            t_end: self.t_end,
            grid: self.grid,
            scenario: self.scenario.clone(),
            cadence: self.cadence,
            cfl_limit: self.cfl_limit,
        };
        let grid = cfg.validate()?;
        let dt_max = match self.dt {
            Some(dt) => dt,
            None => {
                let u0 = initial_velocity(&cfg, &grid)?;
                let h = grid.dx().min(grid.dy());
                let umax = u0.magnitude().max_abs();
                let adv = if umax > 0.0 { h / umax } else { f64::INFINITY };
                0.9 * self.cfl_limit * adv.min(h * h / (4.0 * nu))
            }
        };
        let blocks = (self.t_end / (dt_max * self.cadence as f64))
            .ceil()
            .max(1.0);
        let steps = blocks as usize * self.cadence;
        cfg.dt = self.t_end / steps as f64;
        if self.t_end == 0.0 {
            cfg.dt = dt_max;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub nu: f64,
    pub sigma: f64,
    pub beta: f64,
    pub h: f64,
    pub ell: f64,
    pub dt: f64,
    pub steps: usize,
    /// `‖ [u]_{B^σ_p}(Ω∖Ω_{ν^β/2}) ‖_{L³_t}`
    pub besov_seminorm: f64,
    /// `‖u‖_{L³_t L^∞(Ω_{ν^β})}`
    pub u_sup_l3: f64,
    /// `‖p‖_{L^{3/2}_t L^∞(Ω_{ν^β})}`
    pub p_sup_l3_2: f64,
    /// `‖u‖_{L^∞_t L^∞(Ω_{ν^β})}`
    pub u_sup_linf: f64,
    /// `‖p‖_{L²_t L^∞(Ω_{ν^β})}`
    pub p_sup_l2: f64,
    /// `‖sup_{Ω_{ν^β}} |u|‖_{L³_t}`, which should vanish with `ν`.
    pub equicontinuity: f64,
    /// `L³_t` norm of the weak near-wall modulus at `(ℓ, h)`.
    pub weak_modulus_l3: f64,
    pub kato_nu: f64,
    pub kato_nu_beta: f64,
    /// `ν ∫∫_{Ω_{ν^β}} |∇u|² / ν^{1−β}`
    pub kato_normalized: f64,
    pub total_dissipation: f64,
    pub budget_residual: f64,
    pub ke0: f64,
    /// `max |u₀|`, the velocity scale for the comparison floors.
    pub u_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// Which family of near-wall hypotheses a verdict row belongs to: the
/// `L³`/`L^{3/2}` bounds with interior Besov regularity, or the `L^∞`/`L²`
/// bounds with vanishing normalized near-wall dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisSet {
    Integrable,
    Bounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub hypothesis: String,
    pub set: HypothesisSet,
    /// `uniformity` or `non_increasing`.
    pub rule: String,
    pub measured: Vec<f64>,
    /// `max / first` for uniformity rows, `last / first` otherwise.
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: Status,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub sigma: f64,
    pub beta: f64,
    pub uniformity_factor: f64,
    pub records: Vec<SweepRecord>,
    /// Viscosities whose `ℓ` the grid cannot resolve.
    pub excluded: Vec<f64>,
    pub verdicts: Vec<Verdict>,
    /// Log-log slope of total dissipation against `ν`.
    pub dissipation_slope: Option<SlopeFit>,
}

impl SweepOutcome {
    pub fn rows_pass(&self, set: HypothesisSet) -> bool {
        self.verdicts
            .iter()
            .filter(|v| v.set == set)
            .all(|v| v.verdict == Status::Pass)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn uniformity(
    name: &str,
    set: HypothesisSet,
    values: Vec<f64>,
    factor: f64,
    floor: f64,
) -> Verdict {
    let first = values[0];
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = max <= factor * first || max <= floor;
    Verdict {
        hypothesis: name.into(),
        set,
        rule: "uniformity".into(),
        statistic: ratio(max, first),
        threshold: factor,
        measured: values,
        verdict: if pass { Status::Pass } else { Status::Fail },
    }
}

fn non_increasing(name: &str, set: HypothesisSet, values: Vec<f64>, floor: f64) -> Verdict {
    let pass = values
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) || w[1] <= floor);
    Verdict {
        hypothesis: name.into(),
        set,
        rule: "non_increasing".into(),
        statistic: ratio(*values.last().unwrap(), values[0]),
        threshold: 1.0,
        measured: values,
        verdict: if pass { Status::Pass } else { Status::Fail },
    }
}

/// Run the solver and every diagnostic for one viscosity. `None` when the
/// grid cannot resolve the mollification scale.
pub fn sweep_entry(spec: &SweepSpec, nu: f64) -> Result<Option<SweepRecord>> {
    let b = spec.validate()?;
    let cfg = spec.solver_config(nu)?;
    let grid = cfg.validate()?;
    let dom = ChannelDomain::from_grid(grid);
    let width = nu.powf(b);
    let (h, ell) = layer_scales(nu, b);
    if ell < 2.0 * grid.dx() || ell < 2.0 * grid.dy() {
        warn!("nu = {nu}: ell = {ell:.3e} is below two grid cells; excluded from the sweep");
        return Ok(None);
    }
    if width >= dom.h_omega() {
        return Err(Error::Scale(format!(
            "boundary layer nu^beta = {width} exceeds half the channel"
        )));
    }
    let budget = Budget::new(
        &grid,
        BudgetScales {
            sigma: Some(spec.sigma),
            ..BudgetScales::ns(ell, h, nu)
        },
    )?;
    let mut acc = budget.accumulator();
    let mut kato = KatoLadder::new(&grid, &[nu.min(width), width])?;
    let near = dom.distance_region(|d| d < width);
    let interior = dom.strip_region(0.5 * width, Side::Far)?;
    let probes = dyadic_probes(&grid, 0..=max_octave(&grid));
    struct Sample {
        t: f64,
        besov: f64,
        u_sup: f64,
        p_sup: f64,
        weak: f64,
    }
    let mut samples = Vec::new();
    let mut u_scale = 0.0;
    let summary = run(&cfg, |s| {
        if samples.is_empty() {
            u_scale = s.u.magnitude().max_abs();
        }
        acc.push(s)?;
        kato.push(s);
        samples.push(Sample {
            t: s.t,
            besov: besov_seminorm(&s.u, spec.besov_p, spec.sigma, &interior, &probes)?.seminorm,
            u_sup: region_norm(&s.u.magnitude(), &near, f64::INFINITY)?,
            p_sup: region_norm(&s.p, &near, f64::INFINITY)?,
            weak: weak_wall_modulus(&s.u, ell, h)?,
        });
        Ok(())
    })?;
    let report = acc.finish()?;
    let kv = kato.finish()?;
    let series = |f: fn(&Sample) -> f64| -> Vec<(f64, f64)> {
        samples.iter().map(|s| (s.t, f(s))).collect()
    };
    let rows = &summary.ledger.rows;
    let equicontinuity = time_norm(&series(|s| s.u_sup), 3.0)?;
    Ok(Some(SweepRecord {
        nu,
        sigma: spec.sigma,
        beta: b,
        h,
        ell,
        dt: cfg.dt,
        steps: summary.steps,
        besov_seminorm: time_norm(&series(|s| s.besov), 3.0)?,
        u_sup_l3: equicontinuity,
        p_sup_l3_2: time_norm(&series(|s| s.p_sup), 1.5)?,
        u_sup_linf: time_norm(&series(|s| s.u_sup), f64::INFINITY)?,
        p_sup_l2: time_norm(&series(|s| s.p_sup), 2.0)?,
        equicontinuity,
        weak_modulus_l3: time_norm(&series(|s| s.weak), 3.0)?,
        kato_nu: kv[0].value,
        kato_nu_beta: kv[1].value,
        kato_normalized: kv[1].value / nu.powf(1.0 - b),
        total_dissipation: rows.last().map_or(0.0, |r| r.cumulative_dissipation),
        budget_residual: report.final_residual(),
        ke0: rows[0].kinetic_energy,
        u_scale,
    }))
}

/// Run the whole ladder (entries in parallel) and assemble the verdict table.
pub fn sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    let b = spec.validate()?;
    let results = spec
        .nus
        .par_iter()
        .map(|&nu| sweep_entry(spec, nu))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for (nu, r) in spec.nus.iter().zip(results) {
        match r {
            Some(r) => records.push(r),
            None => excluded.push(*nu),
        }
    }
    if records.is_empty() {
        return Err(Error::Resolution(
            "no viscosity in the sweep is resolved by the grid".into(),
        ));
    }
    let f = spec.uniformity_factor;
    let u = records.iter().fold(0.0f64, |m, r| m.max(r.u_scale));
    let (vfloor, pfloor) = (1e-10 * u, 1e-10 * u * u);
    let col = |g: fn(&SweepRecord) -> f64| records.iter().map(g).collect::<Vec<_>>();
    use HypothesisSet::{Bounded, Integrable};
    let verdicts = vec![
        uniformity(
            "interior_besov",
            Integrable,
            col(|r| r.besov_seminorm),
            f,
            vfloor,
        ),
        uniformity(
            "near_wall_velocity_l3",
            Integrable,
            col(|r| r.u_sup_l3),
            f,
            vfloor,
        ),
        uniformity(
            "near_wall_pressure_l3_2",
            Integrable,
            col(|r| r.p_sup_l3_2),
            f,
            pfloor,
        ),
        non_increasing(
            "equicontinuity",
            Integrable,
            col(|r| r.equicontinuity),
            vfloor,
        ),
        uniformity(
            "interior_besov",
            Bounded,
            col(|r| r.besov_seminorm),
            f,
            vfloor,
        ),
        uniformity(
            "near_wall_velocity_linf",
            Bounded,
            col(|r| r.u_sup_linf),
            f,
            vfloor,
        ),
        uniformity(
            "near_wall_pressure_l2",
            Bounded,
            col(|r| r.p_sup_l2),
            f,
            pfloor,
        ),
        non_increasing(
            "near_wall_dissipation_normalized",
            Bounded,
            col(|r| r.kato_normalized),
            vfloor * u,
        ),
    ];
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.nu, r.total_dissipation))
        .collect();
    Ok(SweepOutcome {
        sigma: spec.sigma,
        beta: b,
        uniformity_factor: f,
        dissipation_slope: loglog_slope(&pts),
        records,
        excluded,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        assert!((beta(1.0 / 3.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(beta(0.5).unwrap(), 1.0);
        assert_eq!(beta(1.0).unwrap(), 1.0);
        assert!(beta(0.2).is_err());
        assert!(beta(1.1).is_err());
    }

    #[test]
    fn scales_follow_the_layer() {
        let (h, ell) = layer_scales(0.01, 0.75);
        assert!((h - 0.75 * 0.01f64.powf(0.75)).abs() < 1e-15);
        assert_eq!(h, 6.0 * ell);
    }

    #[test]
    fn spec_rejects_bad_ladders() {
        let spec = SweepSpec {
            nus: vec![0.01, 0.02],
            sigma: 0.5,
            scenario: Scenario::DecayingShear { n: 1 },
            grid: GridSpec {
                lx: 1.0,
                ly: 1.0,
                nx: 8,
                ny: 65,
            },
            t_end: 0.1,
            dt: None,
            cadence: 1,
            cfl_limit: 0.5,
            uniformity_factor: 2.0,
            besov_p: 3.0,
        };
        assert!(matches!(sweep(&spec), Err(Error::Config(_))));
        let s = SweepSpec { sigma: 0.2, ..spec };
        assert!(matches!(sweep(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn auto_step_is_a_cadence_multiple() {
        let spec = SweepSpec {
            nus: vec![0.01],
            sigma: 0.5,
            scenario: Scenario::DecayingShear { n: 1 },
            grid: GridSpec {
                lx: 1.0,
                ly: 1.0,
                nx: 8,
                ny: 65,
            },
            t_end: 0.1,
            dt: None,
            cadence: 7,
            cfl_limit: 0.5,
            uniformity_factor: 2.0,
            besov_p: 3.0,
        };
        let cfg = spec.solver_config(0.01).unwrap();
        assert_eq!(cfg.steps() % 7, 0);
        assert!((cfg.steps() as f64 * cfg.dt - 0.1).abs() < 1e-12);
    }
}
