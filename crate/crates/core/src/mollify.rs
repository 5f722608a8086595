//! Discrete mollifier `G_ℓ`, the wall cutoff `η_{ℓ,h}` / `θ_{ℓ,h}`, and the
//! filtered quantities built from them.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{Grid2, Offset, Region, Restricted, ScalarField2, TensorField2, VectorField2};
use crate::geometry::ChannelDomain;

/// Unnormalized bump `exp(-1/(1-q))` of `q = |ρ|²`, zero for `q >= 1`.
#[inline]
pub fn bump(q: f64) -> f64 {
    if q < 1.0 {
        (-1.0 / (1.0 - q)).exp()
    } else {
        0.0
    }
}

/// Simpson's rule with `n` (rounded up to even) subintervals.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Normalization of the one-dimensional bump on `[-1, 1]`.
fn bump_1d_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| simpson(|s| bump(s * s), -1.0, 1.0, 20_000))
}

/// One stencil entry of the kernel.
#[derive(Debug, Clone, Copy)]
pub struct Tap {
    pub offset: Offset,
    /// `w(r) G_ℓ(r)`; these sum to one.
    pub weight: f64,
    /// `-(1/ℓ) w(r) (∇G)_ℓ(r)`, so that `∇f̄ = Σ grad δf(r)`.
    pub grad: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct MollifierKernel {
    grid: Grid2,
    ell: f64,
    taps: Vec<Tap>,
}

impl MollifierKernel {
    pub fn new(grid: &Grid2, ell: f64) -> Result<Self> {
        if !(ell > 0.0 && ell < 0.5 * grid.ly) {
            return Err(Error::Scale(format!(
                "mollifier scale {ell} must lie in (0, Ly/2)"
            )));
        }
        if ell < 2.0 * grid.dx() || ell < 2.0 * grid.dy() {
            return Err(Error::Resolution(format!(
                "mollifier scale {ell} is below two grid cells (dx = {}, dy = {})",
                grid.dx(),
                grid.dy()
            )));
        }
        let (dx, dy) = (grid.dx(), grid.dy());
        let mi = (ell / dx).ceil() as i64;
        let mj = (ell / dy).ceil() as i64;
        let mut taps = Vec::new();
        for dj in -mj..=mj {
            for di in -mi..=mi {
                let r = [di as f64 * dx, dj as f64 * dy];
                let rho = [r[0] / ell, r[1] / ell];
                let q = rho[0] * rho[0] + rho[1] * rho[1];
                if q >= 1.0 {
                    continue;
                }
                let g = bump(q);
                // ∇G(ρ) = -2ρ G(ρ) / (1 - q)²
                let s = -2.0 * g / (1.0 - q).powi(2);
                taps.push(Tap {
                    offset: Offset::new(di, dj),
                    weight: g,
                    grad: [s * rho[0], s * rho[1]],
                });
            }
        }
        if taps.is_empty() {
            return Err(Error::Resolution(format!(
                "no grid offsets inside the kernel radius {ell}"
            )));
        }
        let total: f64 = taps.iter().map(|t| t.weight).sum();
        for t in &mut taps {
            t.weight /= total;
        }
        // Zero discrete mean, then fix the first moment so that linear fields
        // have exact mollified gradients.
        for k in 0..2 {
            let mean = taps.iter().map(|t| t.grad[k]).sum::<f64>() / taps.len() as f64;
            for t in &mut taps {
                t.grad[k] -= mean;
            }
            let moment: f64 = taps
                .iter()
                .map(|t| -t.grad[k] * t.offset.physical(grid)[k])
                .sum();
            if !(moment.abs() > 0.0) {
                return Err(Error::Numerical("degenerate kernel gradient moment".into()));
            }
            for t in &mut taps {
                t.grad[k] = -t.grad[k] / moment;
            }
        }
        Ok(Self {
            grid: *grid,
            ell,
            taps,
        })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    /// Discrete `m₂ = Σ w G_ℓ(r) (r₁/ℓ)²`.
    pub fn second_moment(&self) -> f64 {
        let dx = self.grid.dx();
        self.taps
            .iter()
            .map(|t| t.weight * (t.offset.di as f64 * dx / self.ell).powi(2))
            .sum()
    }

    /// Rows with `d(x) >= ℓ`, on which every tap stays inside the channel.
    pub fn valid_region(&self) -> Region {
        let dom = ChannelDomain::from_grid(self.grid);
        dom.distance_region(|d| d >= self.ell - 1e-12 * self.grid.ly)
    }

    fn check(&self, grid: &Grid2) -> Result<()> {
        if *grid != self.grid {
            return Err(Error::domain("field and kernel live on different grids"));
        }
        Ok(())
    }

    /// `Σ coef(tap) f(x + r)` on the valid rows.
    fn apply(
        &self,
        f: &ScalarField2,
        coef: impl Fn(&Tap) -> f64 + Sync,
    ) -> Restricted<ScalarField2> {
        let g = self.grid;
        let region = self.valid_region();
        let nx = g.nx;
        let mut out = ScalarField2::zeros(&g);
        let src = f.data();
        out.data_mut()
            .par_chunks_mut(nx)
            .enumerate()
            .for_each(|(j, row)| {
                if !region.contains_row(j) {
                    return;
                }
                for t in &self.taps {
                    let c = coef(t);
                    if c == 0.0 {
                        continue;
                    }
                    let k = (j as i64 + t.offset.dj) as usize;
                    let s = &src[k * nx..(k + 1) * nx];
                    let shift = t.offset.di.rem_euclid(nx as i64) as usize;
                    // out[i] += c * s[(i + shift) mod nx], as two contiguous runs
                    let split = nx - shift;
                    for (o, v) in row[..split].iter_mut().zip(&s[shift..]) {
                        *o += c * v;
                    }
                    for (o, v) in row[split..].iter_mut().zip(&s[..shift]) {
                        *o += c * v;
                    }
                }
            });
        Restricted { field: out, region }
    }

    /// `f̄_ℓ` on `Ω^ℓ`.
    pub fn mollify(&self, f: &ScalarField2) -> Result<Restricted<ScalarField2>> {
        self.check(f.grid())?;
        Ok(self.apply(f, |t| t.weight))
    }

    pub fn mollify_vector(&self, u: &VectorField2) -> Result<Restricted<VectorField2>> {
        let a = self.mollify(&u.c[0])?;
        let b = self.mollify(&u.c[1])?;
        Ok(Restricted {
            field: VectorField2::new(a.field, b.field),
            region: a.region,
        })
    }

    /// `∇f̄_ℓ = -(1/ℓ) Σ w (∇G)_ℓ(r) δf(r; x)` on `Ω^ℓ`.
    pub fn mollified_gradient(&self, f: &ScalarField2) -> Result<Restricted<VectorField2>> {
        self.check(f.grid())?;
        let gx = self.increment_sum(f, 0);
        let gy = self.increment_sum(f, 1);
        Ok(Restricted {
            field: VectorField2::new(gx.field, gy.field),
            region: gx.region,
        })
    }

    fn increment_sum(&self, f: &ScalarField2, k: usize) -> Restricted<ScalarField2> {
        // Σ c_k(r) (f(x+r) - f(x)) = Σ c_k(r) f(x+r) - f(x) Σ c_k(r)
        let total: f64 = self.taps.iter().map(|t| t.grad[k]).sum();
        let mut out = self.apply(f, |t| t.grad[k]);
        let nx = self.grid.nx;
        let rows: Vec<usize> = out.region.rows().collect();
        let data = out.field.data_mut();
        for j in rows {
            for i in 0..nx {
                data[j * nx + i] -= total * f.data()[j * nx + i];
            }
        }
        out
    }

    /// `(∇ū_ℓ)_{ab} = ∂_a ū_b` via increments.
    pub fn mollified_vector_gradient(&self, u: &VectorField2) -> Result<Restricted<TensorField2>> {
        let g0 = self.mollified_gradient(&u.c[0])?;
        let g1 = self.mollified_gradient(&u.c[1])?;
        let [a0, a1] = g0.field.c;
        let [b0, b1] = g1.field.c;
        Ok(Restricted {
            field: TensorField2 {
                c: [[a0, b0], [a1, b1]],
            },
            region: g0.region,
        })
    }

    /// `τ_ℓ(f, g)` in increment form:
    /// `Σ w G δf ⊗ δg - (Σ w G δf) ⊗ (Σ w G δg)`.
    pub fn cet_commutator(
        &self,
        f: &VectorField2,
        g: &VectorField2,
    ) -> Result<Restricted<TensorField2>> {
        self.check(f.grid())?;
        self.check(g.grid())?;
        let grid = self.grid;
        let region = self.valid_region();
        let nx = grid.nx;
        let fs = [f.c[0].data(), f.c[1].data()];
        let gs = [g.c[0].data(), g.c[1].data()];
        // Per row: 4 second moments and 4 first moments of the increments.
        let rows: Vec<[Vec<f64>; 4]> = (0..grid.ny)
            .into_par_iter()
            .map(|j| {
                let mut out: [Vec<f64>; 4] = Default::default();
                for o in &mut out {
                    o.resize(nx, 0.0);
                }
                if !region.contains_row(j) {
                    return out;
                }
                let mut m1f = [vec![0.0; nx], vec![0.0; nx]];
                let mut m1g = [vec![0.0; nx], vec![0.0; nx]];
                for t in &self.taps {
                    let k = (j as i64 + t.offset.dj) as usize;
                    for i in 0..nx {
                        let ii = grid.wrap_x(i as i64 + t.offset.di);
                        let a = k * nx + ii;
                        let b = j * nx + i;
                        let df = [fs[0][a] - fs[0][b], fs[1][a] - fs[1][b]];
                        let dg = [gs[0][a] - gs[0][b], gs[1][a] - gs[1][b]];
                        for p in 0..2 {
                            m1f[p][i] += t.weight * df[p];
                            m1g[p][i] += t.weight * dg[p];
                            for q in 0..2 {
                                out[2 * p + q][i] += t.weight * df[p] * dg[q];
                            }
                        }
                    }
                }
                for p in 0..2 {
                    for q in 0..2 {
                        for i in 0..nx {
                            out[2 * p + q][i] -= m1f[p][i] * m1g[q][i];
                        }
                    }
                }
                out
            })
            .collect();
        let mut t = TensorField2::zeros(&grid);
        for (j, r) in rows.iter().enumerate() {
            for p in 0..2 {
                for q in 0..2 {
                    t.c[p][q].data_mut()[j * nx..(j + 1) * nx].copy_from_slice(&r[2 * p + q]);
                }
            }
        }
        Ok(Restricted { field: t, region })
    }

    /// `τ_ℓ(f, g)` in direct form `(f ⊗ g)‾_ℓ - f̄_ℓ ⊗ ḡ_ℓ`.
    pub fn cet_commutator_direct(
        &self,
        f: &VectorField2,
        g: &VectorField2,
    ) -> Result<Restricted<TensorField2>> {
        let fb = self.mollify_vector(f)?;
        let gb = self.mollify_vector(g)?;
        let mut t = TensorField2::zeros(&self.grid);
        for p in 0..2 {
            for q in 0..2 {
                let prod = &f.c[p] * &g.c[q];
                let m = self.mollify(&prod)?.field;
                t.c[p][q] = &m - &(&fb.field.c[p] * &gb.field.c[q]);
            }
        }
        Ok(Restricted {
            field: t,
            region: fb.region,
        })
    }
}

/// The standing ordering `0 < ℓ < h/4`, extended to `h/4 < ε/8 < h(Ω)` when
/// a near-wall width `ε` is supplied.
pub fn check_scales(ell: f64, h: f64, eps: Option<f64>, h_omega: f64) -> Result<()> {
    if !(ell > 0.0 && ell < h / 4.0) {
        return Err(Error::Scale(format!(
            "need 0 < ell < h/4, got ell = {ell}, h = {h}"
        )));
    }
    if let Some(eps) = eps {
        if !(h / 4.0 < eps / 8.0 && eps / 8.0 < h_omega) {
            return Err(Error::Scale(format!(
                "need h/4 < eps/8 < h_omega, got h = {h}, eps = {eps}, h_omega = {h_omega}"
            )));
        }
    }
    Ok(())
}

/// Smooth non-decreasing cutoff obtained by mollifying the ramp that rises
/// linearly from 0 at `a` to 1 at `b` with a one-dimensional bump of width `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub ell: f64,
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
}

impl CutoffProfile {
    /// `η_{ℓ,h}`: 0 below `h - ℓ`, 1 above `h`. Requires `0 < ℓ < h/4`.
    pub fn new(ell: f64, h: f64) -> Result<Self> {
        check_scales(ell, h, None, f64::INFINITY)?;
        Ok(Self::centered(ell, h))
    }

    /// Same construction without the scale gate, for any `0 < ℓ <= h`.
    pub fn centered(ell: f64, h: f64) -> Self {
        Self {
            ell,
            h,
            a: h - 0.5 * ell - 0.125 * ell,
            b: h - 0.5 * ell + 0.125 * ell,
            eps: 0.25 * ell,
        }
    }

    /// The profile `η(d/h)` that vanishes for `d <= h/2` and is one for `d >= h`.
    pub fn half_width(h: f64) -> Self {
        Self::centered(0.5 * h, h)
    }

    /// Left end of the support of `η'`.
    pub fn rise_start(&self) -> f64 {
        self.a - self.eps
    }

    /// Right end of the support of `η'`.
    pub fn rise_end(&self) -> f64 {
        self.b + self.eps
    }

    fn phi(&self, s: f64) -> f64 {
        let z = s / self.eps;
        bump(z * z) / (bump_1d_mass() * self.eps)
    }

    fn ramp(&self, y: f64) -> f64 {
        ((y - self.a) / (self.b - self.a)).clamp(0.0, 1.0)
    }

    pub fn eta(&self, y: f64) -> f64 {
        if y <= self.rise_start() {
            return 0.0;
        }
        if y >= self.rise_end() {
            return 1.0;
        }
        // ∫ φ_ε(s) ramp(y - s) ds, split where the ramp has kinks
        let e = self.eps;
        let mut knots = vec![-e, e, y - self.b, y - self.a];
        knots.retain(|&k| k >= -e && k <= e);
        knots.sort_by(|p, q| p.total_cmp(q));
        let v: f64 = knots
            .windows(2)
            .map(|w| simpson(|s| self.phi(s) * self.ramp(y - s), w[0], w[1], 400))
            .sum();
        v.clamp(0.0, 1.0)
    }

    pub fn eta_prime(&self, y: f64) -> f64 {
        if y <= self.rise_start() || y >= self.rise_end() {
            return 0.0;
        }
        // ramp' = 1/(b-a) on (a, b): ∫_{y-b}^{y-a} φ_ε
        let lo = (y - self.b).max(-self.eps);
        let hi = (y - self.a).min(self.eps);
        (simpson(|s| self.phi(s), lo, hi, 400) / (self.b - self.a)).max(0.0)
    }

    /// `θ(x) = η(d(x))` on the grid.
    pub fn cutoff_field(&self, dom: &ChannelDomain) -> ScalarField2 {
        let rows: Vec<f64> = (0..dom.grid().ny)
            .map(|j| self.eta(dom.row_distance(j)))
            .collect();
        ScalarField2::from_row_fn(dom.grid(), |j| rows[j])
    }

    /// `η'(d(x))` on the grid.
    pub fn derivative_field(&self, dom: &ChannelDomain) -> ScalarField2 {
        let rows: Vec<f64> = (0..dom.grid().ny)
            .map(|j| self.eta_prime(dom.row_distance(j)))
            .collect();
        ScalarField2::from_row_fn(dom.grid(), |j| rows[j])
    }

    /// `∇θ = -η'(d) n̂(π(x))`, supported on the rise band.
    pub fn cutoff_gradient(&self, dom: &ChannelDomain) -> Result<VectorField2> {
        let g = *dom.grid();
        let mut rows = vec![[0.0; 2]; g.ny];
        for (j, r) in rows.iter_mut().enumerate() {
            let ep = self.eta_prime(dom.row_distance(j));
            if ep == 0.0 {
                continue;
            }
            let n = dom
                .row_wall(j)
                .ok_or(Error::NonUniqueProjection { y: g.y(j) })?
                .normal();
            *r = [-ep * n[0], -ep * n[1]];
        }
        Ok(VectorField2::new(
            ScalarField2::from_row_fn(&g, |j| rows[j][0]),
            ScalarField2::from_row_fn(&g, |j| rows[j][1]),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid2 {
        Grid2::new(2.0 * PI, 2.0, 64, 65).unwrap()
    }

    #[test]
    fn kernel_invariants() {
        let g = grid();
        let k = MollifierKernel::new(&g, 0.3).unwrap();
        let s: f64 = k.taps().iter().map(|t| t.weight).sum();
        assert!((s - 1.0).abs() < 1e-14);
        for c in 0..2 {
            let m: f64 = k
                .taps()
                .iter()
                .map(|t| t.weight * t.offset.physical(&g)[c])
                .sum();
            assert!(m.abs() < 1e-14);
            let z: f64 = k.taps().iter().map(|t| t.grad[c]).sum();
            assert!(z.abs() < 1e-10);
        }
        assert!(k
            .taps()
            .iter()
            .all(|t| t.weight >= 0.0 && t.offset.norm(&g) < 0.3));
    }

    #[test]
    fn kernel_rejects_underresolved() {
        let g = grid();
        assert!(matches!(
            MollifierKernel::new(&g, 0.1),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            MollifierKernel::new(&g, 1.5),
            Err(Error::Scale(_))
        ));
    }

    #[test]
    fn mollify_constant_and_linear() {
        let g = grid();
        let k = MollifierKernel::new(&g, 0.3).unwrap();
        let c = k.mollify(&ScalarField2::constant(&g, 2.5)).unwrap();
        for j in c.region.rows() {
            assert!((c.field.at(5, j) - 2.5).abs() < 1e-13);
        }
        let y = ScalarField2::from_fn(&g, |_, y| y);
        let m = k.mollify(&y).unwrap();
        for j in m.region.rows() {
            assert!((m.field.at(5, j) - g.y(j)).abs() < 1e-13);
        }
        let gr = k.mollified_gradient(&y).unwrap();
        for j in gr.region.rows() {
            assert!(gr.field.c[0].at(3, j).abs() < 1e-10);
            assert!((gr.field.c[1].at(3, j) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mollify_sine_matches_kernel_quadrature() {
        let g = grid();
        let k = MollifierKernel::new(&g, 0.4).unwrap();
        let f = ScalarField2::from_fn(&g, |x, _| (2.0 * PI * x / g.lx).sin());
        let m = k.mollify(&f).unwrap();
        let c: f64 = k
            .taps()
            .iter()
            .map(|t| t.weight * (2.0 * PI * t.offset.physical(&g)[0] / g.lx).cos())
            .sum();
        for j in m.region.rows() {
            for i in 0..g.nx {
                assert!((m.field.at(i, j) - c * f.at(i, j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cutoff_shape() {
        let p = CutoffProfile::new(0.1, 0.6).unwrap();
        assert_eq!(p.eta(0.5), 0.0);
        assert_eq!(p.eta(0.6), 1.0);
        let mut prev = 0.0;
        for k in 0..=1000 {
            let y = 0.45 + 0.2 * k as f64 / 1000.0;
            let e = p.eta(y);
            assert!(e >= prev - 1e-12 && (0.0..=1.0).contains(&e));
            prev = e;
            assert!(p.eta_prime(y) <= 8.0 / p.ell);
        }
        assert!((p.eta(p.h - 0.5 * p.ell) - 0.5).abs() < 1e-9);
        assert!(CutoffProfile::new(0.2, 0.6).is_err());
    }

    #[test]
    fn cutoff_derivative_is_consistent() {
        let p = CutoffProfile::new(0.1, 0.6).unwrap();
        let h = 1e-5;
        for k in 1..50 {
            let y = p.rise_start() + (p.rise_end() - p.rise_start()) * k as f64 / 50.0;
            let fd = (p.eta(y + h) - p.eta(y - h)) / (2.0 * h);
            assert!(
                (fd - p.eta_prime(y)).abs() < 1e-4,
                "y={y} fd={fd} {}",
                p.eta_prime(y)
            );
        }
    }

    #[test]
    fn scale_chain() {
        assert!(check_scales(0.1, 0.5, None, 1.0).is_ok());
        assert!(check_scales(0.1, 0.5, Some(1.1), 1.0).is_ok());
        assert!(check_scales(0.1, 0.5, Some(0.5), 1.0).is_err());
        assert!(check_scales(0.1, 0.5, Some(9.0), 1.0).is_err());
    }
}
