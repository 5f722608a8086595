//! Increment statistics: structure functions, Besov seminorm estimates and
//! the vanishing-ratio test for the little Besov spaces.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{region_norm, Grid2, Offset, Region, ScalarField2, VectorField2};
use crate::report::number;

/// Anything whose pointwise magnitude is the Euclidean norm of a list of
/// scalar components on one grid.
pub trait Components: Sync {
    fn components(&self) -> Vec<&ScalarField2>;
}

impl Components for ScalarField2 {
    fn components(&self) -> Vec<&ScalarField2> {
        vec![self]
    }
}

impl Components for VectorField2 {
    fn components(&self) -> Vec<&ScalarField2> {
        vec![&self.c[0], &self.c[1]]
    }
}

/// A probed offset with its octave and direction label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    #[serde(skip)]
    pub offset: Offset,
    pub octave: u32,
    pub direction: &'static str,
    /// `|r|` in physical units.
    pub r: f64,
}

const DIRECTIONS: [(&str, i64, i64); 8] = [
    ("+x", 1, 0),
    ("-x", -1, 0),
    ("+y", 0, 1),
    ("-y", 0, -1),
    ("+xy", 1, 1),
    ("-xy", -1, -1),
    ("+x-y", 1, -1),
    ("-x+y", -1, 1),
];

/// Offsets of `2^k` cells for `k` in `octaves`, along both axes and both
/// diagonals, in both senses.
pub fn dyadic_probes(grid: &Grid2, octaves: std::ops::RangeInclusive<u32>) -> Vec<Probe> {
    let mut out = Vec::new();
    for k in octaves {
        let m = 1i64 << k;
        for (name, a, b) in DIRECTIONS {
            let offset = Offset::new(a * m, b * m);
            out.push(Probe {
                offset,
                octave: k,
                direction: name,
                r: offset.norm(grid),
            });
        }
    }
    out
}

/// Largest octave whose offsets stay below a quarter of both the period and
/// the wall gap.
pub fn max_octave(grid: &Grid2) -> u32 {
    let lim = (grid.nx / 4).min((grid.ny - 1) / 4).max(1);
    lim.ilog2()
}

/// `Σ w |δf(r)|^p` and `Σ w` over `U ∩ (U - r)`.
fn increment_moment<F: Components + ?Sized>(
    f: &F,
    r: Offset,
    region: &Region,
    p: f64,
) -> Option<(f64, f64)> {
    let comps = f.components();
    let g = *comps[0].grid();
    if r.dj.unsigned_abs() as usize >= g.ny {
        return None;
    }
    let valid = region.shift_valid(r);
    if valid.is_empty() {
        return None;
    }
    let nx = g.nx;
    let mut sum = 0.0;
    for j in valid.rows() {
        let k = (j as i64 + r.dj) as usize;
        let w = g.node_weight(j);
        let mut row = 0.0;
        for i in 0..nx {
            let ii = g.wrap_x(i as i64 + r.di);
            let mut s2 = 0.0;
            for c in &comps {
                let d = c.data()[k * nx + ii] - c.data()[j * nx + i];
                s2 += d * d;
            }
            row += if p == 2.0 { s2 } else { s2.sqrt().powf(p) };
        }
        sum += w * row;
    }
    Some((sum, valid.measure()))
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureEntry {
    #[serde(flatten)]
    pub probe: Probe,
    /// `S_p(r)`, absent when the valid region is empty.
    pub value: Option<f64>,
    /// `‖δf(r)‖_{L^p(U ∩ (U - r))}`.
    pub lp_norm: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureFunctionTable {
    pub t: f64,
    pub p: f64,
    pub entries: Vec<StructureEntry>,
}

/// `S_p(r) = ⟨|δf(r; ·)|^p⟩` averaged over `U ∩ (U - r)` for every probe.
pub fn structure_function<F: Components + ?Sized>(
    f: &F,
    p: f64,
    probes: &[Probe],
    region: &Region,
    t: f64,
) -> Result<StructureFunctionTable> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::domain(format!(
            "structure function order must be finite and >= 1, got {p}"
        )));
    }
    let entries = probes
        .par_iter()
        .map(|probe| {
            let m = increment_moment(f, probe.offset, region, p);
            StructureEntry {
                probe: *probe,
                value: m.map(|(s, meas)| s / meas),
                lp_norm: m.map(|(s, _)| s.powf(1.0 / p)),
            }
        })
        .collect();
    Ok(StructureFunctionTable { t, p, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// Two standard errors either side of the slope.
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Ordinary least squares slope of `log y` against `log x`; points with
/// non-positive coordinates are dropped.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let se = if n > 2 {
        let rss: f64 = pts
            .iter()
            .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(SlopeFit {
        slope,
        lo: slope - 2.0 * se,
        hi: slope + 2.0 * se,
        points: n,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BesovEstimate {
    pub sigma: f64,
    pub p: f64,
    /// `max_r ‖δf(r)‖_{L^p}/|r|^σ` over the probes.
    pub seminorm: f64,
    /// `‖f‖_{L^p(U)}`.
    pub lp_norm: f64,
    /// `‖f‖_{L^p} + seminorm`.
    pub norm: f64,
    /// `(|r|, ‖δf(r)‖_{L^p}/|r|^σ)` for each probe with a valid region.
    pub ratio_curve: Vec<(f64, f64)>,
    /// Log-log slope of `‖δf(r)‖_{L^p}` against `|r|`, with at least 4 probes.
    pub fitted_sigma: Option<SlopeFit>,
}

pub fn besov_seminorm<F: Components + ?Sized>(
    f: &F,
    p: f64,
    sigma: f64,
    region: &Region,
    probes: &[Probe],
) -> Result<BesovEstimate> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::domain(format!(
            "Besov exponent must lie in (0, 1], got {sigma}"
        )));
    }
    let octaves: std::collections::BTreeSet<u32> = probes.iter().map(|q| q.octave).collect();
    if octaves.len() < 2 {
        return Err(Error::domain(
            "at least two dyadic offset magnitudes are required",
        ));
    }
    let table = structure_function(f, p, probes, region, 0.0)?;
    let norms: Vec<(f64, f64)> = table
        .entries
        .iter()
        .filter_map(|e| e.lp_norm.map(|n| (e.probe.r, n)))
        .collect();
    let ratio_curve: Vec<(f64, f64)> = norms.iter().map(|&(r, n)| (r, n / r.powf(sigma))).collect();
    let seminorm = ratio_curve.iter().fold(0.0, |m: f64, &(_, v)| m.max(v));
    let mag = magnitude(f);
    let lp_norm = region_norm(&mag, region, p)?;
    let fitted_sigma = if norms.len() >= 4 {
        loglog_slope(&norms)
    } else {
        None
    };
    Ok(BesovEstimate {
        sigma,
        p,
        seminorm,
        lp_norm,
        norm: lp_norm + seminorm,
        ratio_curve,
        fitted_sigma,
    })
}

fn magnitude<F: Components + ?Sized>(f: &F) -> ScalarField2 {
    let comps = f.components();
    let mut out = ScalarField2::zeros(comps[0].grid());
    for c in comps {
        for (o, v) in out.data_mut().iter_mut().zip(c.data()) {
            *o += v * v;
        }
    }
    out.map(f64::sqrt)
}

#[derive(Debug, Clone, Serialize)]
pub struct LittleBesovReport {
    pub sigma: f64,
    pub p: f64,
    pub q: f64,
    /// `(|r|, max over directions of ‖δf(r)‖_{L^q_t L^p_x}/|r|^σ)`, from the
    /// largest octave down to the smallest.
    pub curve: Vec<(f64, f64)>,
    /// Smallest-octave ratio at most half the largest-octave ratio.
    pub consistent: bool,
}

/// Vanishing-ratio diagnostic over a time series of fields.
pub fn little_besov_test<F: Components>(
    series: &[(f64, &F)],
    p: f64,
    sigma: f64,
    region: &Region,
    q: f64,
    probes: &[Probe],
) -> Result<LittleBesovReport> {
    if series.is_empty() {
        return Err(Error::EmptyRegion(
            "little Besov test needs at least one snapshot".into(),
        ));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::domain(format!(
            "Besov exponent must lie in (0, 1], got {sigma}"
        )));
    }
    // ‖δf(r)‖_{L^p_x} per probe and time
    let per_time: Vec<Vec<Option<f64>>> = series
        .par_iter()
        .map(|(_, f)| {
            probes
                .iter()
                .map(|pr| increment_moment(*f, pr.offset, region, p).map(|(s, _)| s.powf(1.0 / p)))
                .collect()
        })
        .collect();
    let mut by_octave: std::collections::BTreeMap<u32, (f64, f64)> = Default::default();
    for (k, pr) in probes.iter().enumerate() {
        let samples: Option<Vec<(f64, f64)>> = series
            .iter()
            .zip(&per_time)
            .map(|((t, _), vals)| vals[k].map(|v| (*t, v)))
            .collect();
        let Some(samples) = samples else { continue };
        let tn = crate::fields::time_norm(&samples, q)?;
        let ratio = tn / pr.r.powf(sigma);
        let nominal = (1u64 << pr.octave) as f64 * region.grid().dx();
        let e = by_octave.entry(pr.octave).or_insert((nominal, 0.0));
        e.1 = e.1.max(ratio);
    }
    let curve: Vec<(f64, f64)> = by_octave.values().rev().copied().collect();
    if curve.len() < 2 {
        return Err(Error::domain(
            "at least two dyadic offset magnitudes are required",
        ));
    }
    let first = curve.first().unwrap().1;
    let last = curve.last().unwrap().1;
    Ok(LittleBesovReport {
        sigma,
        p,
        q,
        consistent: last <= 0.5 * first,
        curve,
    })
}

/// CSV rows `(t, |r|, direction, p, S_p, ratio_sigma)` for a table.
pub fn csv_rows(table: &StructureFunctionTable, sigma: f64) -> Vec<[String; 6]> {
    table
        .entries
        .iter()
        .filter_map(|e| {
            let (v, n) = (e.value?, e.lp_norm?);
            Some([
                number(table.t),
                number(e.probe.r),
                e.probe.direction.to_string(),
                number(table.p),
                number(v),
                number(n / e.probe.r.powf(sigma)),
            ])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid2 {
        Grid2::new(2.0 * PI, 2.0, 64, 65).unwrap()
    }

    #[test]
    fn probes_cover_axes_and_diagonals() {
        let g = grid();
        let p = dyadic_probes(&g, 0..=2);
        assert_eq!(p.len(), 24);
        assert!(p.iter().any(|q| q.offset == Offset::new(4, -4)));
        assert_eq!(max_octave(&g), 4);
    }

    #[test]
    fn constant_field_has_zero_increments() {
        let g = grid();
        let f = VectorField2::from_fn(&g, |_, _| [1.0, -2.0]);
        let probes = dyadic_probes(&g, 0..=3);
        let t = structure_function(&f, 2.0, &probes, &Region::full(&g), 0.0).unwrap();
        assert!(t.entries.iter().all(|e| e.value == Some(0.0)));
        let b = besov_seminorm(&f, 3.0, 0.5, &Region::full(&g), &probes).unwrap();
        assert_eq!(b.seminorm, 0.0);
    }

    #[test]
    fn scaling_covariance() {
        let g = grid();
        let f = ScalarField2::from_fn(&g, |x, y| x.sin() * y.cos());
        let f3 = f.scale(-3.0);
        let probes = dyadic_probes(&g, 0..=3);
        let full = Region::full(&g);
        let a = besov_seminorm(&f, 3.0, 0.5, &full, &probes).unwrap();
        let b = besov_seminorm(&f3, 3.0, 0.5, &full, &probes).unwrap();
        assert!((b.seminorm - 3.0 * a.seminorm).abs() < 1e-12 * b.seminorm);
        let sa = structure_function(&f, 3.0, &probes, &full, 0.0).unwrap();
        let sb = structure_function(&f3, 3.0, &probes, &full, 0.0).unwrap();
        for (x, y) in sa.entries.iter().zip(&sb.entries) {
            let (x, y) = (x.value.unwrap(), y.value.unwrap());
            assert!((y - 27.0 * x).abs() <= 1e-12 * y.max(1e-300));
        }
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let pts: Vec<_> = (0..6)
            .map(|k| (2f64.powi(k), 3.0 * 2f64.powi(k).powf(0.4)))
            .collect();
        let fit = loglog_slope(&pts).unwrap();
        assert!((fit.slope - 0.4).abs() < 1e-12);
        assert!(fit.hi - fit.lo < 1e-10);
    }
}
