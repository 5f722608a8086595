mod common;

use std::f64::consts::PI;

use common::{min_eig, random_smooth_vector};
use proptest::prelude::*;
use wallflux::besov::loglog_slope;
use wallflux::fields::{Grid2, ScalarField2, VectorField2};
use wallflux::{ChannelDomain, CutoffProfile, MollifierKernel, Region};

fn grid() -> Grid2 {
    Grid2::new(1.0, 1.0, 64, 65).unwrap()
}

#[test]
fn commutator_forms_agree_and_are_psd() {
    let g = grid();
    for ell in [0.05, 0.1, 0.2] {
        let k = MollifierKernel::new(&g, ell).unwrap();
        for seed in 0..10 {
            let u = random_smooth_vector(&g, seed);
            let a = k.cet_commutator(&u, &u).unwrap();
            let b = k.cet_commutator_direct(&u, &u).unwrap();
            assert_eq!(a.region, b.region);
            for j in a.region.rows() {
                for i in 0..g.nx {
                    let t = &a.field.c;
                    for p in 0..2 {
                        for q in 0..2 {
                            assert!((t[p][q].at(i, j) - b.field.c[p][q].at(i, j)).abs() <= 1e-12);
                        }
                    }
                    let m = min_eig(t[0][0].at(i, j), t[0][1].at(i, j), t[1][1].at(i, j));
                    assert!(m >= -1e-12, "ell {ell} seed {seed}: {m}");
                }
            }
        }
    }
}

#[test]
fn commutator_of_linear_field() {
    let g = grid();
    let ell = 0.1;
    let k = MollifierKernel::new(&g, ell).unwrap();
    let reach = (ell / g.dx()).ceil() as usize;
    // x is not periodic, so stay clear of the seam
    let ux = VectorField2::from_fn(&g, |x, _| [x, 0.0]);
    let t = k.cet_commutator(&ux, &ux).unwrap();
    let m2 = k.second_moment();
    for j in t.region.rows() {
        for i in reach..g.nx - reach {
            assert!((t.field.c[0][0].at(i, j) - ell * ell * m2).abs() < 1e-14);
            assert_eq!(
                [
                    t.field.c[0][1].at(i, j),
                    t.field.c[1][0].at(i, j),
                    t.field.c[1][1].at(i, j)
                ],
                [0.0; 3]
            );
        }
    }
    // the same in y, with the moment taken straight from the stencil
    let uy = VectorField2::from_fn(&g, |_, y| [y, 0.0]);
    let t = k.cet_commutator(&uy, &uy).unwrap();
    let m2y: f64 = k
        .taps()
        .iter()
        .map(|tap| tap.weight * (tap.offset.dj as f64 * g.dy()).powi(2))
        .sum();
    for j in t.region.rows() {
        for i in 0..g.nx {
            assert!((t.field.c[0][0].at(i, j) - m2y).abs() < 1e-14);
        }
    }
}

#[test]
fn mollified_gradient_examples() {
    let g = grid();
    let k = MollifierKernel::new(&g, 0.1).unwrap();
    let c = k
        .mollified_gradient(&ScalarField2::constant(&g, 2.5))
        .unwrap();
    for j in c.region.rows() {
        for i in 0..g.nx {
            assert!(c.field.c[0].at(i, j).abs() < 1e-13 && c.field.c[1].at(i, j).abs() < 1e-13);
        }
    }
    let y = k
        .mollified_gradient(&ScalarField2::from_fn(&g, |_, y| y))
        .unwrap();
    for j in y.region.rows() {
        for i in 0..g.nx {
            assert!(y.field.c[0].at(i, j).abs() < 1e-10);
            assert!((y.field.c[1].at(i, j) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn mollified_gradient_matches_differenced_mollification() {
    let errs: Vec<f64> = [64, 128]
        .iter()
        .map(|&n| {
            let g = Grid2::new(1.0, 1.0, n, n + 1).unwrap();
            let f =
                ScalarField2::from_fn(&g, |x, y| (2.0 * PI * x).sin() * (3.0 * y).cos() + y * y);
            let k = MollifierKernel::new(&g, 0.15).unwrap();
            let a = k.mollified_gradient(&f).unwrap();
            let b = k.mollify(&f).unwrap().field.gradient();
            let dom = ChannelDomain::from_grid(g);
            let inner = dom.distance_region(|d| d >= 0.15 + 2.0 * g.dy());
            let mut m = 0.0f64;
            for j in inner.rows() {
                for i in 0..g.nx {
                    for c in 0..2 {
                        m = m.max((a.field.c[c].at(i, j) - b.c[c].at(i, j)).abs());
                    }
                }
            }
            m
        })
        .collect();
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn mollification_converges_like_ell_squared() {
    let g = Grid2::new(1.0, 1.0, 256, 257).unwrap();
    let f = ScalarField2::from_fn(&g, |x, y| (2.0 * PI * x).sin() * (2.0 * y).cos());
    let dom = ChannelDomain::from_grid(g);
    let inner = dom.distance_region(|d| d >= 0.25);
    let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&ell| {
            let m = MollifierKernel::new(&g, ell)
                .unwrap()
                .mollify(&f)
                .unwrap()
                .field;
            let e = (&m - &f).map(|v| v * v).integral_over(&inner).sqrt();
            (ell, e)
        })
        .collect();
    let fit = loglog_slope(&pts).unwrap();
    assert!(fit.slope >= 1.9, "{pts:?}");
}

#[test]
fn cutoff_field_examples() {
    let g = Grid2::new(1.0, 2.0, 64, 401).unwrap();
    let dom = ChannelDomain::from_grid(g);
    let (ell, h) = (0.05, 0.4);
    let p = CutoffProfile::new(ell, h).unwrap();
    let theta = p.cutoff_field(&dom);
    assert_eq!(theta.at(0, 0), 0.0);
    assert_eq!(theta.at(0, g.top()), 0.0);
    assert_eq!(theta.at(0, g.ny / 2), 1.0);
    let grad = p.cutoff_gradient(&dom).unwrap();
    for j in 0..g.ny {
        let d = dom.row_distance(j);
        let nonzero = grad.c[1].at(0, j) != 0.0;
        if nonzero {
            assert!(d > h - ell && d < h, "gradient at d = {d}");
        }
        assert!(p.eta_prime(d) <= 8.0 / ell);
    }
    // θ is monotone in the wall distance
    let mut rows: Vec<(f64, f64)> = (0..g.ny)
        .map(|j| (dom.row_distance(j), theta.at(0, j)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(rows.windows(2).all(|w| w[1].1 >= w[0].1));

    // where θ > 0 the mollifier is defined
    let k = MollifierKernel::new(&g, ell).unwrap();
    let support = Region::from_rows(&g, |j| theta.at(0, j) > 0.0);
    let far_h = dom.distance_region(|d| d >= h - ell);
    let far_3 = dom.distance_region(|d| d >= 3.0 * ell);
    assert!(support.is_subset(&far_h));
    assert!(far_h.is_subset(&far_3));
    assert!(far_3.is_subset(&k.valid_region()));
}

fn small_grid() -> Grid2 {
    Grid2::new(1.0, 1.0, 32, 33).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn commutator_identity_and_psd(seed in any::<u64>(), ell in 0.07f64..0.2) {
        let g = small_grid();
        let u = random_smooth_vector(&g, seed);
        let k = MollifierKernel::new(&g, ell).unwrap();
        let a = k.cet_commutator(&u, &u).unwrap();
        let b = k.cet_commutator_direct(&u, &u).unwrap();
        for j in a.region.rows() {
            for i in 0..g.nx {
                let t = &a.field.c;
                for p in 0..2 {
                    for q in 0..2 {
                        prop_assert!((t[p][q].at(i, j) - b.field.c[p][q].at(i, j)).abs() <= 1e-12);
                    }
                }
                prop_assert!(min_eig(t[0][0].at(i, j), t[0][1].at(i, j), t[1][1].at(i, j)) >= -1e-12);
            }
        }
    }

    #[test]
    fn mollification_contracts_sup_norm(seed in any::<u64>(), ell in 0.07f64..0.2) {
        let g = small_grid();
        let f = random_smooth_vector(&g, seed).c[0].clone();
        let m = MollifierKernel::new(&g, ell).unwrap().mollify(&f).unwrap();
        prop_assert!(m.field.masked(&m.region).max_abs() <= f.max_abs() * (1.0 + 1e-14));
    }
}
