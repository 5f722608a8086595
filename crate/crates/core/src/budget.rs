//! Localized resolved energy balance.
//!
//! For a cutoff `θ = η_{ℓ,h}(d)` that vanishes near the walls the resolved
//! energy `∫ θ ½|ū|²` changes through the bulk flux `Π = θ ∇ū : τ`, the
//! boundary production `B = ∇θ · J` on the cutoff band and, with viscosity,
//! the resolved dissipation `D = νθ|∇ū|²`:
//!
//! `ΔKE = ∫∫Π + ∫∫B − ∫∫D + residual`.
//!
//! Gradients of mollified fields always use the increment formula.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    cumulative_trapezoid, time_norm, Grid2, Region, Restricted, ScalarField2, TensorField2,
    VectorField2,
};
use crate::geometry::ChannelDomain;
use crate::mollify::{check_scales, CutoffProfile, MollifierKernel};
use crate::snapshot::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Euler,
    Ns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulusKind {
    Normal,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetScales {
    pub ell: f64,
    pub h: f64,
    /// Ignored in Euler mode.
    #[serde(default)]
    pub nu: f64,
    /// Assumed interior Besov exponent, carried into reports.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Near-wall assumption width; when set the full ordering up to `h(Ω)` is checked.
    #[serde(default)]
    pub eps: Option<f64>,
    pub mode: Mode,
    /// Widths at which the wall moduli are reported; defaults to `[ℓ]`.
    #[serde(default)]
    pub deltas: Vec<f64>,
}

impl BudgetScales {
    pub fn euler(ell: f64, h: f64) -> Self {
        Self {
            ell,
            h,
            nu: 0.0,
            sigma: None,
            eps: None,
            mode: Mode::Euler,
            deltas: Vec::new(),
        }
    }

    pub fn ns(ell: f64, h: f64, nu: f64) -> Self {
        Self {
            nu,
            mode: Mode::Ns,
            ..Self::euler(ell, h)
        }
    }

    fn viscosity(&self) -> f64 {
        match self.mode {
            Mode::Euler => 0.0,
            Mode::Ns => self.nu,
        }
    }

    pub fn validate(&self, dom: &ChannelDomain) -> Result<()> {
        let h_omega = dom.h_omega();
        check_scales(self.ell, self.h, self.eps, h_omega)?;
        if self.h >= h_omega {
            return Err(Error::Scale(format!(
                "h = {} must be below h_omega = {h_omega}, where the wall projection is unique",
                self.h
            )));
        }
        if self.mode == Mode::Ns && !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::domain(format!(
                "Navier-Stokes mode needs nu > 0, got {}",
                self.nu
            )));
        }
        for &d in &self.deltas {
            if !(d > 0.0 && d < h_omega) {
                return Err(Error::domain(format!(
                    "wall modulus width {d} must lie in (0, {h_omega})"
                )));
            }
        }
        Ok(())
    }
}

/// `sup_{Ω_δ} |n̂(π(x))·u|` or `sup_{Ω_δ} |u|`.
pub fn wall_modulus(u: &VectorField2, delta: f64, which: ModulusKind) -> Result<f64> {
    let g = *u.grid();
    let dom = ChannelDomain::from_grid(g);
    if !(delta > 0.0 && delta < dom.h_omega()) {
        return Err(Error::domain(format!(
            "wall modulus width {delta} must lie in (0, {})",
            dom.h_omega()
        )));
    }
    let mut m: f64 = 0.0;
    for j in dom.distance_region(|d| d < delta).rows() {
        let n = dom.row_normal(j).unwrap_or([0.0; 2]);
        for i in 0..g.nx {
            let (a, b) = (u.c[0].at(i, j), u.c[1].at(i, j));
            let v = match which {
                ModulusKind::Normal => (n[0] * a + n[1] * b).abs(),
                ModulusKind::Full => a.hypot(b),
            };
            m = m.max(v);
        }
    }
    Ok(m)
}

/// `(1/ℓ) sup_{|r|<ℓ} ∫_{Ω_h∖Ω_{h−ℓ}} |n̂(π(x+r))·u(x+r)| dx` over grid offsets.
///
/// The integrand is summed over whole periodic rows, so only the wall-normal
/// part of the offset matters.
pub fn weak_wall_modulus(u: &VectorField2, ell: f64, h: f64) -> Result<f64> {
    let g = *u.grid();
    let dom = ChannelDomain::from_grid(g);
    if !(ell > 0.0 && ell < h && h < dom.h_omega()) {
        return Err(Error::domain(format!(
            "weak wall modulus needs 0 < ell < h < {}, got ell = {ell}, h = {h}",
            dom.h_omega()
        )));
    }
    let band = dom.band(h - ell, h);
    let row_flux: Vec<f64> = (0..g.ny)
        .map(|k| {
            let n = dom.row_normal(k).unwrap_or([0.0; 2]);
            u.c[0]
                .row(k)
                .iter()
                .zip(u.c[1].row(k))
                .map(|(a, b)| (n[0] * a + n[1] * b).abs())
                .sum::<f64>()
        })
        .collect();
    let mj = (ell / g.dy()).ceil() as i64;
    let mut best: f64 = 0.0;
    for dj in -mj..=mj {
        if (dj as f64 * g.dy()).abs() >= ell {
            continue;
        }
        let mut acc = 0.0;
        for j in band.rows() {
            let k = j as i64 + dj;
            if k < 0 || k as usize >= g.ny {
                continue;
            }
            acc += g.node_weight(j) * row_flux[k as usize];
        }
        best = best.max(acc);
    }
    Ok(best / ell)
}

/// Mollified quantities shared by all budget terms.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub u: VectorField2,
    pub p: Option<ScalarField2>,
    /// `(∇ū)_{ab} = ∂_a ū_b` by increments.
    pub grad: TensorField2,
    pub tau: TensorField2,
    /// Rows on which the mollified fields are defined.
    pub region: Region,
}

/// Pointwise budget densities of one snapshot.
#[derive(Debug, Clone)]
pub struct BudgetFields {
    pub energy: ScalarField2,
    pub pi: ScalarField2,
    pub b: ScalarField2,
    pub d: ScalarField2,
    pub j: Restricted<VectorField2>,
}

/// Scalar budget terms of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotTerms {
    pub t: f64,
    pub resolved_ke: f64,
    pub pi: f64,
    pub b: f64,
    pub d: f64,
    pub pi_l1: f64,
    pub b_l1: f64,
    pub d_l1: f64,
    /// `∫ ∇·(θJ)`, zero up to discretization since `θ` vanishes at the walls.
    pub div_term: f64,
    pub wall_modulus_normal: f64,
    pub wall_modulus_full: f64,
    pub weak_wall_modulus: f64,
}

/// Budget machinery for one `(ℓ, h)` pair on one grid.
#[derive(Debug, Clone)]
pub struct Budget {
    dom: ChannelDomain,
    scales: BudgetScales,
    kernel: MollifierKernel,
    theta: ScalarField2,
    /// `∇θ = −η'(d) n̂` per row.
    grad_theta: Vec<[f64; 2]>,
    /// `Ω^{h−ℓ}`
    inner: Region,
    /// `Ω_h ∖ Ω_{h−ℓ}`
    band: Region,
}

impl Budget {
    pub fn new(grid: &Grid2, scales: BudgetScales) -> Result<Self> {
        let dom = ChannelDomain::from_grid(*grid);
        scales.validate(&dom)?;
        let kernel = MollifierKernel::new(grid, scales.ell)?;
        let profile = CutoffProfile::new(scales.ell, scales.h)?;
        let theta = profile.cutoff_field(&dom);
        let grad_theta = (0..grid.ny)
            .map(|j| {
                let ep = profile.eta_prime(dom.row_distance(j));
                if ep == 0.0 {
                    return Ok([0.0; 2]);
                }
                let n = dom
                    .row_normal(j)
                    .ok_or(Error::NonUniqueProjection { y: grid.y(j) })?;
                Ok([-ep * n[0], -ep * n[1]])
            })
            .collect::<Result<Vec<_>>>()?;
        let (ell, h) = (scales.ell, scales.h);
        Ok(Self {
            inner: dom.distance_region(|d| d >= h - ell),
            band: dom.band(h - ell, h),
            dom,
            scales,
            kernel,
            theta,
            grad_theta,
        })
    }

    pub fn scales(&self) -> &BudgetScales {
        &self.scales
    }

    pub fn kernel(&self) -> &MollifierKernel {
        &self.kernel
    }

    pub fn theta(&self) -> &ScalarField2 {
        &self.theta
    }

    /// `Ω^{h−ℓ}`, the support region of `Π` and `D`.
    pub fn inner_region(&self) -> &Region {
        &self.inner
    }

    /// `Ω_h ∖ Ω_{h−ℓ}`, the support region of `B`.
    pub fn band_region(&self) -> &Region {
        &self.band
    }

    fn deltas(&self) -> Vec<f64> {
        if self.scales.deltas.is_empty() {
            vec![self.scales.ell]
        } else {
            self.scales.deltas.clone()
        }
    }

    pub fn resolve(&self, u: &VectorField2, p: Option<&ScalarField2>) -> Result<Resolved> {
        let ub = self.kernel.mollify_vector(u)?;
        let pb = p
            .map(|p| self.kernel.mollify(p).map(|r| r.field))
            .transpose()?;
        let grad = self.kernel.mollified_vector_gradient(u)?.field;
        let tau = self.kernel.cet_commutator(u, u)?.field;
        Ok(Resolved {
            u: ub.field,
            p: pb,
            grad,
            tau,
            region: ub.region,
        })
    }

    /// `J = (½|ū|² + p̄) ū + ū·τ − ν ∇ū·ū` on `Ω^{h−ℓ}`, zero elsewhere.
    pub fn spatial_current(
        &self,
        u: &VectorField2,
        p: Option<&ScalarField2>,
    ) -> Result<Restricted<VectorField2>> {
        let p = p.ok_or(Error::MissingPressure)?;
        let r = self.resolve(u, Some(p))?;
        Ok(self.current(&r))
    }

    fn current(&self, r: &Resolved) -> Restricted<VectorField2> {
        let g = *self.dom.grid();
        let nu = self.scales.viscosity();
        let mut j = VectorField2::zeros(&g);
        let pb = r.p.as_ref();
        for row in self.inner.rows() {
            for i in 0..g.nx {
                let k = g.idx(i, row);
                let ub = [r.u.c[0].data()[k], r.u.c[1].data()[k]];
                let e = 0.5 * (ub[0] * ub[0] + ub[1] * ub[1]) + pb.map_or(0.0, |p| p.data()[k]);
                for a in 0..2 {
                    let mut v = e * ub[a];
                    for (b, ubb) in ub.iter().enumerate() {
                        v += ubb * r.tau.c[b][a].data()[k];
                        v -= nu * r.grad.c[a][b].data()[k] * ubb;
                    }
                    j.c[a].data_mut()[k] = v;
                }
            }
        }
        Restricted {
            field: j,
            region: self.inner.clone(),
        }
    }

    /// `Π = θ ∇ū : τ`.
    pub fn bulk_flux(&self, u: &VectorField2) -> Result<ScalarField2> {
        let r = self.resolve(u, None)?;
        Ok(self.flux(&r))
    }

    fn flux(&self, r: &Resolved) -> ScalarField2 {
        self.theta_weighted(|k| {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += r.grad.c[a][b].data()[k] * r.tau.c[a][b].data()[k];
                }
            }
            s
        })
    }

    /// `D = νθ|∇ū|²`; Navier-Stokes mode only.
    pub fn resolved_dissipation(&self, u: &VectorField2) -> Result<ScalarField2> {
        if self.scales.mode != Mode::Ns {
            return Err(Error::domain(
                "resolved dissipation needs Navier-Stokes mode with nu > 0",
            ));
        }
        let r = self.resolve(u, None)?;
        Ok(self.dissipation(&r))
    }

    fn dissipation(&self, r: &Resolved) -> ScalarField2 {
        let nu = self.scales.viscosity();
        if nu == 0.0 {
            return ScalarField2::zeros(self.dom.grid());
        }
        self.theta_weighted(|k| {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += r.grad.c[a][b].data()[k].powi(2);
                }
            }
            nu * s
        })
    }

    /// `θ(x) f(k)` evaluated only where `θ > 0`.
    fn theta_weighted(&self, f: impl Fn(usize) -> f64) -> ScalarField2 {
        let g = *self.dom.grid();
        let mut out = ScalarField2::zeros(&g);
        for j in 0..g.ny {
            let th = self.theta.at(0, j);
            if th == 0.0 {
                continue;
            }
            for i in 0..g.nx {
                let k = g.idx(i, j);
                out.data_mut()[k] = th * f(k);
            }
        }
        out
    }

    /// `B = ∇θ·J = −η'(d)[(½|ū|² + p̄) n̂·ū + ū·τ·n̂ − ν n̂·∇ū·ū]`.
    pub fn boundary_production(
        &self,
        u: &VectorField2,
        p: Option<&ScalarField2>,
    ) -> Result<ScalarField2> {
        let p = p.ok_or(Error::MissingPressure)?;
        let r = self.resolve(u, Some(p))?;
        Ok(self.production(&self.current(&r)))
    }

    fn production(&self, j: &Restricted<VectorField2>) -> ScalarField2 {
        let g = *self.dom.grid();
        let mut out = ScalarField2::zeros(&g);
        for (row, gt) in self.grad_theta.iter().enumerate() {
            if *gt == [0.0; 2] {
                continue;
            }
            for i in 0..g.nx {
                let k = g.idx(i, row);
                out.data_mut()[k] = gt[0] * j.field.c[0].data()[k] + gt[1] * j.field.c[1].data()[k];
            }
        }
        out
    }

    /// All pointwise densities; the pressure is required.
    pub fn fields(&self, u: &VectorField2, p: Option<&ScalarField2>) -> Result<BudgetFields> {
        let p = p.ok_or(Error::MissingPressure)?;
        let r = self.resolve(u, Some(p))?;
        let j = self.current(&r);
        let fields = BudgetFields {
            energy: self.theta_weighted(|k| {
                0.5 * (r.u.c[0].data()[k].powi(2) + r.u.c[1].data()[k].powi(2))
            }),
            pi: self.flux(&r),
            b: self.production(&j),
            d: self.dissipation(&r),
            j,
        };
        self.check_support(&fields)?;
        Ok(fields)
    }

    /// Largest value of `Π`, `D` on `Ω_{h−ℓ}` and of `B` off the band.
    pub fn support_violation(&self, f: &BudgetFields) -> f64 {
        let outer = self.inner.complement();
        let off_band = self.band.complement();
        let sup = |s: &ScalarField2, r: &Region| {
            r.rows()
                .flat_map(|j| s.row(j).iter())
                .fold(0.0f64, |m, v| m.max(v.abs()))
        };
        sup(&f.pi, &outer)
            .max(sup(&f.d, &outer))
            .max(sup(&f.b, &off_band))
    }

    fn check_support(&self, f: &BudgetFields) -> Result<()> {
        let v = self.support_violation(f);
        if v != 0.0 {
            return Err(Error::Numerical(format!(
                "budget term nonzero outside its support (|value| = {v:e})"
            )));
        }
        Ok(())
    }

    pub fn terms(&self, snap: &Snapshot) -> Result<SnapshotTerms> {
        let f = self.fields(&snap.u, Some(&snap.p))?;
        let abs_int = |s: &ScalarField2| s.map(f64::abs).integral();
        let theta_j =
            VectorField2::new(&self.theta * &f.j.field.c[0], &self.theta * &f.j.field.c[1]);
        let deltas = self.deltas();
        let delta = deltas.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(SnapshotTerms {
            t: snap.t,
            resolved_ke: f.energy.integral(),
            pi: f.pi.integral(),
            b: f.b.integral(),
            d: f.d.integral(),
            pi_l1: abs_int(&f.pi),
            b_l1: abs_int(&f.b),
            d_l1: abs_int(&f.d),
            div_term: theta_j.divergence().integral(),
            wall_modulus_normal: wall_modulus(&snap.u, delta, ModulusKind::Normal)?,
            wall_modulus_full: wall_modulus(&snap.u, delta, ModulusKind::Full)?,
            weak_wall_modulus: weak_wall_modulus(&snap.u, self.scales.ell, self.scales.h)?,
        })
    }

    /// Balance over a time series, processed in parallel.
    pub fn balance_residual(&self, snapshots: &[Snapshot]) -> Result<BudgetReport> {
        let terms = snapshots
            .par_iter()
            .map(|s| self.terms(s))
            .collect::<Result<Vec<_>>>()?;
        let moduli = snapshots
            .par_iter()
            .map(|s| self.moduli(&s.u))
            .collect::<Result<Vec<_>>>()?;
        assemble(self.scales.clone(), terms, moduli)
    }

    fn moduli(&self, u: &VectorField2) -> Result<Vec<[f64; 2]>> {
        self.deltas()
            .iter()
            .map(|&d| {
                Ok([
                    wall_modulus(u, d, ModulusKind::Normal)?,
                    wall_modulus(u, d, ModulusKind::Full)?,
                ])
            })
            .collect()
    }

    /// Streaming form of [`Budget::balance_residual`].
    pub fn accumulator(self) -> BudgetAccumulator {
        BudgetAccumulator {
            budget: self,
            terms: Vec::new(),
            moduli: Vec::new(),
        }
    }
}

/// Collects per-snapshot terms so that snapshots need not be kept.
#[derive(Debug, Clone)]
pub struct BudgetAccumulator {
    budget: Budget,
    terms: Vec<SnapshotTerms>,
    moduli: Vec<Vec<[f64; 2]>>,
}

impl BudgetAccumulator {
    pub fn push(&mut self, snap: &Snapshot) -> Result<()> {
        self.terms.push(self.budget.terms(snap)?);
        self.moduli.push(self.budget.moduli(&snap.u)?);
        Ok(())
    }

    pub fn finish(self) -> Result<BudgetReport> {
        assemble(self.budget.scales, self.terms, self.moduli)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetRow {
    pub t: f64,
    pub ell: f64,
    pub h: f64,
    pub nu: f64,
    pub resolved_ke: f64,
    pub pi_int: f64,
    pub b_int: f64,
    pub d_int: f64,
    pub residual: f64,
    pub wall_modulus_normal: f64,
    pub wall_modulus_full: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WallModulusSeries {
    pub delta: f64,
    pub normal: Vec<f64>,
    pub full: Vec<f64>,
    pub normal_l3: f64,
    pub full_l3: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetReport {
    pub scales: BudgetScales,
    pub terms: Vec<SnapshotTerms>,
    pub rows: Vec<BudgetRow>,
    pub moduli: Vec<WallModulusSeries>,
    pub weak_wall_modulus_l3: f64,
    pub max_div_term: f64,
}

impl BudgetReport {
    pub fn final_residual(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.residual)
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.rows
            .iter()
            .fold(0.0, |m: f64, r| m.max(r.residual.abs()))
    }
}

fn assemble(
    scales: BudgetScales,
    terms: Vec<SnapshotTerms>,
    moduli: Vec<Vec<[f64; 2]>>,
) -> Result<BudgetReport> {
    if terms.is_empty() {
        return Err(Error::domain("budget needs at least one snapshot"));
    }
    check_uniform(&terms.iter().map(|t| t.t).collect::<Vec<_>>())?;
    let series = |f: fn(&SnapshotTerms) -> f64| -> Vec<(f64, f64)> {
        terms.iter().map(|t| (t.t, f(t))).collect()
    };
    let pi_int = cumulative_trapezoid(&series(|t| t.pi));
    let b_int = cumulative_trapezoid(&series(|t| t.b));
    let d_int = cumulative_trapezoid(&series(|t| t.d));
    let ke0 = terms[0].resolved_ke;
    let rows = terms
        .iter()
        .enumerate()
        .map(|(k, t)| BudgetRow {
            t: t.t,
            ell: scales.ell,
            h: scales.h,
            nu: scales.viscosity(),
            resolved_ke: t.resolved_ke,
            pi_int: pi_int[k],
            b_int: b_int[k],
            d_int: d_int[k],
            residual: (t.resolved_ke - ke0) - pi_int[k] - b_int[k] + d_int[k],
            wall_modulus_normal: t.wall_modulus_normal,
            wall_modulus_full: t.wall_modulus_full,
        })
        .collect();
    let deltas = if scales.deltas.is_empty() {
        vec![scales.ell]
    } else {
        scales.deltas.clone()
    };
    let moduli = deltas
        .iter()
        .enumerate()
        .map(|(n, &delta)| {
            let normal: Vec<f64> = moduli.iter().map(|m| m[n][0]).collect();
            let full: Vec<f64> = moduli.iter().map(|m| m[n][1]).collect();
            let norm = |v: &[f64]| -> Result<f64> {
                let s: Vec<(f64, f64)> = terms.iter().zip(v).map(|(t, x)| (t.t, *x)).collect();
                time_norm(&s, 3.0)
            };
            Ok(WallModulusSeries {
                delta,
                normal_l3: norm(&normal)?,
                full_l3: norm(&full)?,
                normal,
                full,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weak_wall_modulus_l3 = time_norm(&series(|t| t.weak_wall_modulus), 3.0)?;
    let max_div_term = terms.iter().fold(0.0, |m: f64, t| m.max(t.div_term.abs()));
    Ok(BudgetReport {
        scales,
        terms,
        rows,
        moduli,
        weak_wall_modulus_l3,
        max_div_term,
    })
}

/// Snapshot times must be equally spaced.
pub fn check_uniform(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::domain("snapshot times must increase"));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(w[1].abs() * 1e-6) {
            return Err(Error::domain(format!(
                "snapshot spacing is not uniform: {} vs {dt}",
                w[1] - w[0]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid2 {
        Grid2::new(2.0 * PI, 2.0, 64, 129).unwrap()
    }

    #[test]
    fn scale_gates() {
        let g = grid();
        assert!(matches!(
            Budget::new(&g, BudgetScales::euler(0.3, 1.0)),
            Err(Error::Scale(_))
        ));
        assert!(matches!(
            Budget::new(&g, BudgetScales::euler(0.2, 1.0)),
            Err(Error::Scale(_))
        ));
        assert!(Budget::new(&g, BudgetScales::ns(0.2, 0.9, 0.0)).is_err());
        assert!(Budget::new(&g, BudgetScales::ns(0.2, 0.9, 1e-2)).is_ok());
    }

    #[test]
    fn missing_pressure() {
        let g = grid();
        let b = Budget::new(&g, BudgetScales::euler(0.2, 0.9)).unwrap();
        let u = VectorField2::zeros(&g);
        assert!(matches!(
            b.spatial_current(&u, None),
            Err(Error::MissingPressure)
        ));
    }

    #[test]
    fn uniform_spacing() {
        assert!(check_uniform(&[0.0, 0.1, 0.2, 0.3]).is_ok());
        assert!(check_uniform(&[0.0, 0.1, 0.25]).is_err());
    }

    #[test]
    fn moduli_examples() {
        let g = grid();
        let c = 0.7;
        let u = VectorField2::from_fn(&g, |_, _| [0.0, c]);
        for delta in [0.05, 0.3, 0.9] {
            assert_eq!(wall_modulus(&u, delta, ModulusKind::Normal).unwrap(), c);
        }
        let w = weak_wall_modulus(&u, 0.2, 0.9).unwrap();
        assert!(
            (w - 2.0 * c * g.lx).abs() < 2.0 * c * g.lx * g.dy() / 0.2 + 1e-12,
            "{w} {}",
            2.0 * c * g.lx
        );
        let dom = ChannelDomain::from_grid(g);
        let s = VectorField2::from_fn(&g, |_, y| [y.min(2.0 - y), 0.0]);
        let delta = 0.3;
        assert_eq!(wall_modulus(&s, delta, ModulusKind::Normal).unwrap(), 0.0);
        let full = wall_modulus(&s, delta, ModulusKind::Full).unwrap();
        assert!(full <= delta && full > delta - g.dy());
        assert!(wall_modulus(&s, dom.h_omega(), ModulusKind::Full).is_err());
        assert!(weak_wall_modulus(&s, 0.2, 0.9).unwrap() < 1e-12);
    }
}
