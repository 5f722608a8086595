mod common;

use std::f64::consts::PI;

use common::{spectral_synthesis, x_probes};
use proptest::prelude::*;
use wallflux::besov::{
    besov_seminorm, dyadic_probes, little_besov_test, loglog_slope, structure_function, Probe,
};
use wallflux::fields::{Grid2, Offset, ScalarField2, VectorField2};
use wallflux::{ChannelDomain, Region, Side};

/// `S₂` of `(sin x, 0)` at an x offset `s`, by dense midpoint quadrature of
/// `(1/2π) ∫ (sin(x + s) − sin x)² dx`.
fn s2_sine(s: f64) -> f64 {
    let n = 200_000;
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|k| {
            let x = (k as f64 + 0.5) * h;
            ((x + s).sin() - x.sin()).powi(2)
        })
        .sum::<f64>()
        * h
        / (2.0 * PI)
}

#[test]
fn sine_structure_function() {
    let g = Grid2::new(2.0 * PI, 2.0, 64, 65).unwrap();
    let u = VectorField2::from_fn(&g, |x, _| [x.sin(), 0.0]);
    let mut probes = dyadic_probes(&g, 0..=4);
    let half = Offset::new(32, 0);
    probes.push(Probe {
        offset: half,
        octave: 5,
        direction: "+x",
        r: half.norm(&g),
    });
    let t = structure_function(&u, 2.0, &probes, &Region::full(&g), 0.0).unwrap();
    for e in &t.entries {
        let s = e.probe.offset.physical(&g)[0];
        let v = e.value.unwrap();
        assert!(
            (v - s2_sine(s)).abs() < 1e-6,
            "{} {s}: {v}",
            e.probe.direction
        );
        assert!((v - (1.0 - s.cos())).abs() < 1e-6);
    }
    let last = t.entries.last().unwrap().value.unwrap();
    assert!((last - 2.0).abs() < 1e-12);
}

#[test]
fn linear_field_seminorm() {
    // |δf| = |r₂| exactly, so ‖δf(r)‖_{L³} = |r₂| · meas(U ∩ (U − r))^{1/3}
    let g = Grid2::new(1.0, 2.0, 32, 129).unwrap();
    let dom = ChannelDomain::from_grid(g);
    let region = dom.strip_region(0.2, Side::Far).unwrap();
    let f = ScalarField2::from_fn(&g, |_, y| y);
    let probes = dyadic_probes(&g, 0..=4);
    let b = besov_seminorm(&f, 3.0, 1.0, &region, &probes).unwrap();
    let rows: Vec<usize> = region.rows().collect();
    let mut best = 0.0f64;
    for (pr, &(r, ratio)) in probes.iter().zip(&b.ratio_curve) {
        assert_eq!(pr.r, r);
        let valid = rows
            .iter()
            .filter(|&&j| rows.contains(&((j as i64 + pr.offset.dj) as usize)))
            .count();
        let meas = valid as f64 * g.dy() * g.lx;
        let want = (pr.offset.dj as f64 * g.dy()).abs() * meas.cbrt() / r;
        assert!(
            (ratio - want).abs() < 1e-12,
            "{}: {ratio} vs {want}",
            pr.direction
        );
        best = best.max(want);
    }
    assert!((b.seminorm - best).abs() < 1e-12);
    assert!(b.seminorm <= region.measure().cbrt());
}

#[test]
fn spectral_synthesis_exponent() {
    let g = Grid2::new(2.0 * PI, 1.0, 2048, 9).unwrap();
    let f = spectral_synthesis(&g, 1.0 / 3.0, 7);
    let probes = x_probes(&g, 2..=7);
    let b = besov_seminorm(&f, 2.0, 1.0 / 3.0, &Region::full(&g), &probes).unwrap();
    let fit = b.fitted_sigma.unwrap();
    assert!((fit.slope - 1.0 / 3.0).abs() <= 0.05, "{}", fit.slope);
}

#[test]
fn mean_value_bound() {
    let g = Grid2::new(2.0 * PI, 2.0, 128, 129).unwrap();
    let f = ScalarField2::from_fn(&g, |x, y| (2.0 * x).sin() * (1.5 * y).cos());
    let lip = 2.0f64.hypot(1.5);
    let probes = dyadic_probes(&g, 0..=4);
    let full = Region::full(&g);
    let area = full.measure();
    let t = structure_function(&f, 3.0, &probes, &full, 0.0).unwrap();
    for e in &t.entries {
        let avg = e.lp_norm.unwrap() / area.cbrt();
        assert!(avg / e.probe.r <= lip + g.dx());
    }
}

#[test]
fn little_besov_verdicts() {
    let g = Grid2::new(2.0 * PI, 2.0, 128, 129).unwrap();
    let dom = ChannelDomain::from_grid(g);
    let region = dom.strip_region(0.3, Side::Far).unwrap();
    let probes = dyadic_probes(&g, 0..=4);
    let smooth = ScalarField2::from_fn(&g, |x, y| x.sin() * y.cos());
    let r = little_besov_test(
        &[(0.0, &smooth), (1.0, &smooth)],
        3.0,
        1.0 / 3.0,
        &region,
        3.0,
        &probes,
    )
    .unwrap();
    assert!(r.consistent);
    let lin = ScalarField2::from_fn(&g, |_, y| y);
    let r = little_besov_test(&[(0.0, &lin)], 3.0, 1.0, &region, 3.0, &probes).unwrap();
    assert!(!r.consistent);
    let c = ScalarField2::constant(&g, 4.0);
    let r = little_besov_test(&[(0.0, &c)], 3.0, 1.0 / 3.0, &region, 3.0, &probes).unwrap();
    assert!(r.consistent && r.curve.iter().all(|p| p.1 == 0.0));
}

#[test]
fn tube_integral_refines_at_second_order() {
    // worst case over many h, since for a fixed h the error oscillates with
    // the position of h inside a cell
    let worst = |ny: usize| {
        let dom = ChannelDomain::new(1.0, 2.0, 8, ny).unwrap();
        (1..40)
            .map(|k| {
                let h = 0.1 + 0.6 * k as f64 / 40.0;
                (dom.tube_integral(|y| y, h).unwrap() - dom.lx() * h * h).abs()
            })
            .fold(0.0, f64::max)
    };
    let pts: Vec<(f64, f64)> = [65, 129, 257, 513]
        .iter()
        .map(|&n| (2.0 / (n - 1) as f64, worst(n)))
        .collect();
    let fit = loglog_slope(&pts).unwrap();
    assert!(fit.slope >= 1.9, "{pts:?}");
    let dy = pts.last().unwrap().0;
    assert!(pts.last().unwrap().1 <= dy * dy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn seminorm_is_monotone_in_region(a in 0.05f64..0.9, b in 0.05f64..0.9, seed in any::<u64>()) {
        let g = Grid2::new(2.0 * PI, 2.0, 32, 65).unwrap();
        let f = common::random_smooth_vector(&g, seed);
        let dom = ChannelDomain::from_grid(g);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let inner = dom.strip_region(hi, Side::Far).unwrap();
        let outer = dom.strip_region(lo, Side::Far).unwrap();
        let probes = dyadic_probes(&g, 0..=3);
        let si = besov_seminorm(&f, 3.0, 0.5, &inner, &probes).unwrap().seminorm;
        let so = besov_seminorm(&f, 3.0, 0.5, &outer, &probes).unwrap().seminorm;
        prop_assert!(si <= so * (1.0 + 1e-12));
    }

    #[test]
    fn strips_partition_the_channel(a in 0.01f64..0.99) {
        let dom = ChannelDomain::new(1.0, 2.0, 8, 101).unwrap();
        let near = dom.strip_region(a, Side::Near).unwrap();
        let far = dom.strip_region(a, Side::Far).unwrap();
        prop_assert!(near.intersect(&far).is_empty());
        prop_assert_eq!(near.union(&far), Region::full(dom.grid()));
        prop_assert!((near.measure() + far.measure() - 2.0).abs() < 1e-12);
    }
}
