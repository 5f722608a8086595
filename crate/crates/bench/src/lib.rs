//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use wallflux::{Grid2, VectorField2};

/// Periodic-in-x test field with a few modes and no-slip walls.
pub fn smooth_field(nx: usize, ny: usize) -> VectorField2 {
    let g = Grid2::new(2.0 * PI, 2.0, nx, ny).expect("valid grid");
    let mut u = VectorField2::from_fn(&g, |x, y| {
        let s = (0.5 * PI * y).sin();
        [
            (2.0 * x).sin() * s + 0.3 * (x + 1.5 * y).cos(),
            (3.0 * x).cos() * s * s,
        ]
    });
    u.impose_no_slip();
    u
}
