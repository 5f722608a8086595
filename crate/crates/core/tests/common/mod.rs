#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wallflux::besov::{dyadic_probes, Probe};
use wallflux::fields::{Grid2, ScalarField2, VectorField2};

/// Sum of a few random Fourier modes per component: periodic in x, arbitrary
/// in y.
pub fn random_smooth_vector(g: &Grid2, seed: u64) -> VectorField2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for c in 0..2 {
        for _ in 0..6 {
            let m: i32 = rng.gen_range(-3..=3);
            let ky = rng.gen_range(-3.0..3.0) * PI / g.ly;
            let amp = rng.gen_range(-1.0..1.0);
            let phase = rng.gen_range(0.0..2.0 * PI);
            modes.push((c, 2.0 * PI * m as f64 / g.lx, ky, amp, phase));
        }
    }
    VectorField2::from_fn(g, |x, y| {
        let mut v = [0.0; 2];
        for &(c, kx, ky, a, ph) in &modes {
            v[c] += a * (kx * x + ky * y + ph).cos();
        }
        v
    })
}

/// Random-phase field with `|a_k|² = k^{-1-2σ₀}` along x for `k < nx/2`, so
/// that `S₂(r) ∝ r^{2σ₀}` across the resolved octaves.
pub fn spectral_synthesis(g: &Grid2, sigma0: f64, seed: u64) -> ScalarField2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kmax = g.nx / 2;
    let modes: Vec<(f64, f64, f64, f64)> = (1..kmax)
        .map(|k| {
            let kx = 2.0 * PI * k as f64 / g.lx;
            let amp = (k as f64).powf(-(1.0 + 2.0 * sigma0) / 2.0);
            let ky = rng.gen_range(-2..=2) as f64 * PI / g.ly;
            (kx, ky, amp, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    ScalarField2::from_fn(g, |x, y| {
        modes
            .iter()
            .map(|&(kx, ky, a, ph)| a * (kx * x + ky * y + ph).cos())
            .sum()
    })
}

/// Dyadic probes along ±x only.
pub fn x_probes(g: &Grid2, octaves: std::ops::RangeInclusive<u32>) -> Vec<Probe> {
    dyadic_probes(g, octaves)
        .into_iter()
        .filter(|p| p.offset.dj == 0)
        .collect()
}

/// Smallest eigenvalue of the symmetric 2×2 matrix `[[a, b], [b, d]]`.
pub fn min_eig(a: f64, b: f64, d: f64) -> f64 {
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
}
