//! Scaled discrete Fourier transforms on the periodic grid.
//!
//! The continuous convention is f̂(ξ) = ∫ f(x) e^{+i x·ξ} dx, so ∂_x becomes
//! multiplication by −iξ. Spatial samples are stored in ascending coordinate
//! order (index N/2 is x = 0); spectra are stored in FFT order, see
//! [`Grid::wavenumber`].

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::net::Grid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    // e^{+i k n / N}, unnormalized
    Plus,
    // e^{-i k n / N}, unnormalized
    Minus,
}

fn transform_rows(buf: &mut [Complex64], n: usize, dir: Direction) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let fft = match dir {
            Direction::Plus => p.plan_fft_inverse(n),
            Direction::Minus => p.plan_fft_forward(n),
        };
        fft.process(buf);
    });
}

fn transpose(buf: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    out[j * n + i] = buf[i * n + j];
                }
            }
        }
    }
    out
}

/// Rotates every axis by N/2; for even N this is both fftshift and ifftshift.
fn half_shift(data: &[Complex64], grid: &Grid) -> Vec<Complex64> {
    let n = grid.points();
    let h = n / 2;
    match grid.dim() {
        1 => {
            let mut out = data.to_vec();
            out.rotate_left(h);
            out
        }
        _ => {
            let mut out = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                let si = (i + h) % n;
                let src = &data[si * n..(si + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                dst[..n - h].copy_from_slice(&src[h..]);
                dst[n - h..].copy_from_slice(&src[..h]);
            }
            out
        }
    }
}

fn transform_all(buf: &mut Vec<Complex64>, grid: &Grid, dir: Direction) {
    let n = grid.points();
    transform_rows(buf, n, dir);
    if grid.dim() == 2 {
        let mut t = transpose(buf, n);
        transform_rows(&mut t, n, dir);
        *buf = transpose(&t, n);
    }
}

/// Spectrum f̂ on the dual grid (FFT order) of spatial samples `f`.
pub fn forward(grid: &Grid, f: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(f.len(), grid.len());
    let mut buf = half_shift(f, grid);
    transform_all(&mut buf, grid, Direction::Plus);
    let w = grid.cell_volume();
    for v in buf.iter_mut() {
        *v *= w;
    }
    buf
}

/// Spectrum restricted to wave numbers |k_i| ≤ m_max·dk, of samples that
/// vanish outside the periodic index box `start[i] .. start[i] + len[i]`.
///
/// Entries outside the restriction are zero; entries inside equal [`forward`].
pub fn forward_window(grid: &Grid, f: &[Complex64], start: &[usize], len: &[usize], m_max: usize) -> Vec<Complex64> {
    let n = grid.points();
    let ms: Vec<i64> = (-(m_max as i64)..=m_max as i64).collect();
    let slot = |m: i64| m.rem_euclid(n as i64) as usize;
    // e^{+i k x} with k = m·dk, x = (i − N/2)h reduces to e^{2πi m i / N}(−1)^m
    let twiddles = |axis: usize| -> Vec<Complex64> {
        let mut t = Vec::with_capacity(ms.len() * len[axis]);
        for &m in &ms {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            for r in 0..len[axis] {
                let i = (start[axis] + r) % n;
                let e = (m * i as i64).rem_euclid(n as i64) as f64 / n as f64;
                t.push(Complex64::from_polar(sign, 2.0 * PI * e));
            }
        }
        t
    };
    let w = grid.cell_volume();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    match grid.dim() {
        1 => {
            let tw = twiddles(0);
            for (a, &m) in ms.iter().enumerate() {
                let row = &tw[a * len[0]..(a + 1) * len[0]];
                let mut acc = Complex64::new(0.0, 0.0);
                for (r, t) in row.iter().enumerate() {
                    acc += f[(start[0] + r) % n] * t;
                }
                out[slot(m)] = acc * w;
            }
        }
        _ => {
            let (tx, ty) = (twiddles(0), twiddles(1));
            let nm = ms.len();
            // partial[r][b]: row r of the box transformed along the second axis
            let mut partial = vec![Complex64::new(0.0, 0.0); len[0] * nm];
            for r in 0..len[0] {
                let i = (start[0] + r) % n;
                let vals: Vec<Complex64> = (0..len[1]).map(|c| f[i * n + (start[1] + c) % n]).collect();
                for b in 0..nm {
                    let t = &ty[b * len[1]..(b + 1) * len[1]];
                    partial[r * nm + b] = vals.iter().zip(t).map(|(v, t)| v * t).sum();
                }
            }
            for (a, &m1) in ms.iter().enumerate() {
                let t = &tx[a * len[0]..(a + 1) * len[0]];
                for (b, &m2) in ms.iter().enumerate() {
                    let acc: Complex64 = (0..len[0]).map(|r| partial[r * nm + b] * t[r]).sum();
                    out[slot(m1) * n + slot(m2)] = acc * w;
                }
            }
        }
    }
    out
}

/// Spatial samples whose spectrum is `spec`; exact inverse of [`forward`].
pub fn inverse(grid: &Grid, spec: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(spec.len(), grid.len());
    let mut buf = spec.to_vec();
    transform_all(&mut buf, grid, Direction::Minus);
    let w = 1.0 / (grid.len() as f64 * grid.cell_volume());
    let mut out = half_shift(&buf, grid);
    for v in out.iter_mut() {
        *v *= w;
    }
    out
}

/// Spatial samples of the inverse transform of a multiplier evaluated on the
/// wavenumbers, `m(k)` with k = (k_1[, k_2]).
pub fn inverse_of(grid: &Grid, m: impl Fn(&[f64]) -> Complex64) -> Vec<Complex64> {
    let d = grid.dim();
    let spec: Vec<Complex64> = (0..grid.len()).map(|i| m(&grid.wavevector(i)[..d])).collect();
    inverse(grid, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn round_trip_1d_and_2d() {
        for grid in [Grid::new(1, 3.0, 64).unwrap(), Grid::new(2, 3.0, 32).unwrap()] {
            let f: Vec<Complex64> = (0..grid.len())
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let back = inverse(&grid, &forward(&grid, &f));
            let err = f.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn gaussian_matches_continuous_transform() {
        // ∫ e^{-x²/2} e^{ixξ} dx = √(2π) e^{-ξ²/2}
        let grid = Grid::new(1, 12.0, 256).unwrap();
        let f: Vec<Complex64> = (0..grid.len()).map(|i| c((-grid.coord(i).powi(2) / 2.0).exp())).collect();
        let spec = forward(&grid, &f);
        for (i, v) in spec.iter().enumerate() {
            let k = grid.wavenumber(i);
            let want = (2.0 * std::f64::consts::PI).sqrt() * (-k * k / 2.0).exp();
            assert!((v - c(want)).norm() < 1e-12);
        }
    }

    #[test]
    fn window_matches_full_transform() {
        for grid in [Grid::new(1, 2.0, 64).unwrap(), Grid::new(2, 2.0, 32).unwrap()] {
            let n = grid.points();
            let (start, len) = (n - 3, 9);
            let inside = |i: usize| (i + n - start) % n < len;
            let f: Vec<Complex64> = (0..grid.len())
                .map(|i| {
                    let ok = if grid.dim() == 1 { inside(i) } else { inside(i / n) && inside(i % n) };
                    if ok {
                        Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos())
                    } else {
                        c(0.0)
                    }
                })
                .collect();
            let full = forward(&grid, &f);
            let starts = vec![start; grid.dim()];
            let lens = vec![len; grid.dim()];
            let part = forward_window(&grid, &f, &starts, &lens, 5);
            for i in 0..grid.len() {
                let k = grid.wavevector(i);
                let m = k.iter().map(|v| (v / grid.dk()).round().abs() as usize).max().unwrap();
                if m <= 5 {
                    assert!((full[i] - part[i]).norm() < 1e-12);
                } else {
                    assert_eq!(part[i], c(0.0));
                }
            }
        }
    }

    #[test]
    fn shifted_delta_has_plus_phase() {
        // a unit mass at x0 transforms to e^{+i x0 ξ}
        let grid = Grid::new(1, 4.0, 32).unwrap();
        let mut f = vec![c(0.0); 32];
        let i0 = 19;
        f[i0] = c(1.0 / grid.spacing());
        let x0 = grid.coord(i0);
        let spec = forward(&grid, &f);
        for (i, v) in spec.iter().enumerate() {
            let want = Complex64::from_polar(1.0, x0 * grid.wavenumber(i));
            assert!((v - want).norm() < 1e-12);
        }
    }
}
