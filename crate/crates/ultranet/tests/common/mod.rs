#![allow(dead_code)]

use num_complex::Complex64;
use ultranet::mollifier::{default_mollifier, mollifier_net, MollifierNet};
use ultranet::net::{EpsilonLadder, GevreyOrder, Grid};

pub fn order() -> GevreyOrder {
    GevreyOrder::new(2.0).unwrap()
}

pub fn grid_1d() -> Grid {
    Grid::new(1, 8.0, 4096).unwrap()
}

/// Mollifier net on L = 8, N = 4096 with the ladder 2^{−2}..2^{−10}
/// (truncated to 2^{−6} by the grid).
pub fn mnet_1d() -> MollifierNet {
    let phi = default_mollifier(order()).unwrap();
    mollifier_net(&phi, &EpsilonLadder::geometric(2.0, 2, 10).unwrap(), &grid_1d()).unwrap()
}

pub fn mnet_2d() -> MollifierNet {
    let phi = default_mollifier(order()).unwrap();
    let g = Grid::new(2, 2.0, 512).unwrap();
    mollifier_net(&phi, &EpsilonLadder::geometric(2.0, 2, 7).unwrap(), &g).unwrap()
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
