//! Gevrey mollifier φ built as the inverse Fourier transform of a frequency
//! cutoff that equals 1 near the origin, and its scaled net φ_ε.
//!
//! All moments ∫ x^α φ vanish for α ≥ 1 because the cutoff is flat at 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier;
use crate::net::{EpsilonLadder, GevreyOrder, Grid, SampledNet};

/// Gluing function exp(−t^{−1/(p−1)}) for t > 0, zero otherwise; p is the
/// profile order.
pub fn glue(t: f64, profile: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-t.powf(-1.0 / (profile - 1.0))).exp()
    }
}

/// Smooth step: 1 for u ≤ 0, 0 for u ≥ 1, glue(1−u)/(glue(1−u)+glue(u)) between.
pub fn smooth_step(u: f64, profile: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let a = glue(1.0 - u, profile);
    let b = glue(u, profile);
    a / (a + b)
}

/// Radial cutoff: 1 on r ≤ r1, 0 on r ≥ r2.
pub fn radial_cutoff(r: f64, r1: f64, r2: f64, profile: f64) -> f64 {
    smooth_step((r.abs() - r1) / (r2 - r1), profile)
}

/// Profile order of the default frequency cutoff, strictly between 1 and s.
pub fn default_profile(order: GevreyOrder) -> f64 {
    (1.0 + order.s()) / 2.0
}

/// Frequency cutoff χ with plateau radius r1 and support radius r2.
///
/// In 2D the cutoff is the tensor product χ(ξ1)χ(ξ2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyBump {
    pub order: GevreyOrder,
    pub profile: f64,
    pub r1: f64,
    pub r2: f64,
    pub grid: Grid,
    /// χ on the wavenumbers of `grid` (FFT order).
    pub samples: Vec<f64>,
}

impl GevreyBump {
    /// Cutoff value at a wave vector.
    pub fn value(&self, xi: &[f64]) -> f64 {
        xi.iter().map(|&k| radial_cutoff(k, self.r1, self.r2, self.profile)).product()
    }

    fn axis_value(&self, k: f64) -> f64 {
        radial_cutoff(k, self.r1, self.r2, self.profile)
    }
}

pub fn build_gevrey_bump(order: GevreyOrder, r1: f64, r2: f64, freq_grid: &Grid) -> Result<GevreyBump> {
    build_gevrey_bump_with_profile(order, default_profile(order), r1, r2, freq_grid)
}

pub fn build_gevrey_bump_with_profile(order: GevreyOrder, profile: f64, r1: f64, r2: f64, freq_grid: &Grid) -> Result<GevreyBump> {
    if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
        return Err(invalid("mollifier radii", format!("need 0 < r1 < r2, got r1 = {r1}, r2 = {r2}")));
    }
    if !(profile > 1.0 && profile.is_finite()) {
        return Err(invalid("mollifier profile", format!("must exceed 1, got {profile}")));
    }
    if r2 >= freq_grid.nyquist() {
        return Err(Error::Aliasing(format!(
            "r2 = {r2} is not below the Nyquist wavenumber {}",
            freq_grid.nyquist()
        )));
    }
    let mut bump = GevreyBump {
        order,
        profile,
        r1,
        r2,
        grid: *freq_grid,
        samples: Vec::new(),
    };
    let d = freq_grid.dim();
    bump.samples = (0..freq_grid.len()).map(|i| bump.value(&freq_grid.wavevector(i)[..d])).collect();
    Ok(bump)
}

/// Tolerances and truncations used by [`build_mollifier_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    pub alpha_moment_max: usize,
    pub mass_tolerance: f64,
    pub moment_tolerance: f64,
    pub seminorm_b: Vec<f64>,
    pub seminorm_trunc: (usize, usize),
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            alpha_moment_max: 5,
            mass_tolerance: 1e-8,
            moment_tolerance: 1e-6,
            seminorm_b: vec![1.0, 2.0, 4.0],
            seminorm_trunc: (8, 8),
        }
    }
}

/// One-dimensional mollifier φ with its moment residuals and seminorm
/// estimates; 2D nets use φ(x)φ(y).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub order: GevreyOrder,
    pub profile: f64,
    pub r1: f64,
    pub r2: f64,
    /// One-dimensional grid carrying `phi`.
    pub grid: Grid,
    pub phi: Vec<f64>,
    /// (α, |∫φ − 1|) for α = 0, (α, |∫x^α φ|) otherwise.
    pub moment_residuals: Vec<(usize, f64)>,
    pub seminorm_estimates: Vec<(f64, f64)>,
}

/// Trapezoid weights on the periodic grid with the unpaired node −L split
/// between −L and its periodic image +L; returns (x, weight) pairs, the image
/// appended last.
fn quadrature_nodes(grid: &Grid) -> Vec<(usize, f64, f64)> {
    let h = grid.spacing();
    let l = grid.half_length();
    let mut nodes: Vec<(usize, f64, f64)> = (1..grid.points()).map(|i| (i, grid.coord(i), h)).collect();
    nodes.push((0, -l, h / 2.0));
    nodes.push((0, l, h / 2.0));
    nodes
}

fn integrate(grid: &Grid, f: impl Fn(f64, usize) -> f64) -> f64 {
    quadrature_nodes(grid).into_iter().map(|(i, x, w)| w * f(x, i)).sum()
}

fn axis_grid(grid: &Grid) -> Grid {
    Grid::new(1, grid.half_length(), grid.points()).expect("axis of a valid grid")
}

pub fn build_mollifier(bump: &GevreyBump, spatial_grid: &Grid) -> Result<Mollifier> {
    build_mollifier_with(bump, spatial_grid, &MomentConfig::default())
}

pub fn build_mollifier_with(bump: &GevreyBump, spatial_grid: &Grid, cfg: &MomentConfig) -> Result<Mollifier> {
    if bump.grid != *spatial_grid {
        return Err(Error::Incompatible("cutoff and spatial grids are not Fourier duals".into()));
    }
    let grid = axis_grid(spatial_grid);
    let spec: Vec<Complex64> = (0..grid.len()).map(|i| Complex64::new(bump.axis_value(grid.wavenumber(i)), 0.0)).collect();
    let raw = fourier::inverse(&grid, &spec);
    let peak = raw.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let imag = raw.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if imag > 1e-12 * peak.max(1.0) {
        return Err(Error::InvalidNet(format!("mollifier has imaginary residue {imag:e}")));
    }
    // φ is even; pair node i with N − i
    let n = grid.points();
    let mut phi: Vec<f64> = raw.iter().map(|v| v.re).collect();
    for i in 1..n / 2 {
        let m = 0.5 * (phi[i] + phi[n - i]);
        phi[i] = m;
        phi[n - i] = m;
    }
    let mut moment_residuals = Vec::new();
    for alpha in 0..=cfg.alpha_moment_max {
        let m = integrate(&grid, |x, i| x.powi(alpha as i32) * phi[i]);
        let (residual, tol) = if alpha == 0 {
            ((m - 1.0).abs(), cfg.mass_tolerance)
        } else {
            (m.abs(), cfg.moment_tolerance)
        };
        if residual > tol {
            return Err(Error::ConstructionFailed {
                alpha,
                residual,
                tolerance: tol,
            });
        }
        moment_residuals.push((alpha, residual));
    }
    let mut m = Mollifier {
        order: bump.order,
        profile: bump.profile,
        r1: bump.r1,
        r2: bump.r2,
        grid,
        phi,
        moment_residuals,
        seminorm_estimates: Vec::new(),
    };
    let derivs = m.derivatives(cfg.seminorm_trunc.0);
    m.seminorm_estimates = cfg.seminorm_b.iter().map(|&b| (b, seminorm_from(&m, &derivs, b, cfg.seminorm_trunc))).collect();
    Ok(m)
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn seminorm_from(m: &Mollifier, derivs: &[Vec<f64>], b: f64, trunc: (usize, usize)) -> f64 {
    let s = m.order.s();
    let mut best: f64 = 0.0;
    for (alpha, d) in derivs.iter().enumerate().take(trunc.0 + 1) {
        for beta in 0..=trunc.1 {
            let integral = integrate(&m.grid, |x, i| x.abs().powi(beta as i32) * d[i].abs());
            let log_den = (alpha + beta) as f64 * b.ln() + s * (ln_factorial(alpha) + ln_factorial(beta));
            best = best.max(integral * (-log_den).exp());
        }
    }
    best
}

impl Mollifier {
    /// Cutoff value χ(ξ) along one axis.
    pub fn multiplier(&self, k: f64) -> f64 {
        radial_cutoff(k, self.r1, self.r2, self.profile)
    }

    /// ∂^α φ for α = 0..=max on the mollifier grid.
    pub fn derivatives(&self, max: usize) -> Vec<Vec<f64>> {
        (0..=max)
            .map(|alpha| {
                let spec: Vec<Complex64> = (0..self.grid.len())
                    .map(|i| {
                        let k = self.grid.wavenumber(i);
                        Complex64::new(0.0, -k).powu(alpha as u32) * self.multiplier(k)
                    })
                    .collect();
                fourier::inverse(&self.grid, &spec).iter().map(|v| v.re).collect()
            })
            .collect()
    }

    /// φ(0), the value at the centre node.
    pub fn value_at_origin(&self) -> f64 {
        self.phi[self.grid.points() / 2]
    }

    /// ∫|φ| by the same quadrature as the moments.
    pub fn l1_norm(&self) -> f64 {
        integrate(&self.grid, |_, i| self.phi[i].abs())
    }
}

/// Truncated σ_{b,s}(φ) = sup_{α ≤ α_max, β ≤ β_max} ∫ |x|^β |∂^α φ| / (b^{α+β} α!^s β!^s).
pub fn seminorm_estimate(phi: &Mollifier, b: f64, trunc: (usize, usize)) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid("seminorm b", format!("must be positive, got {b}")));
    }
    let derivs = phi.derivatives(trunc.0);
    Ok(seminorm_from(phi, &derivs, b, trunc))
}

/// Scaled slices φ_ε(x) = ε^{−m} φ(x/ε) sampled on a spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierNet {
    pub base: Mollifier,
    pub ladder: EpsilonLadder,
    pub grid: Grid,
    pub slices: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Largest-first ladder entries ε with ε ≥ 4h and r2/ε below Nyquist.
pub fn compatible_ladder(ladder: &EpsilonLadder, grid: &Grid, r2: f64) -> Result<(EpsilonLadder, Vec<String>)> {
    let h = grid.spacing();
    let nyq = grid.nyquist();
    let ok = |e: f64| e >= 4.0 * h * (1.0 - 1e-12) && r2 / e <= nyq;
    let kept = ladder
        .truncate_while(ok)
        .map_err(|_| Error::Incompatible(format!("fewer than 4 ladder entries satisfy ε ≥ 4h = {} and r2/ε ≤ {nyq}", 4.0 * h)))?;
    let mut warnings = Vec::new();
    if kept.len() < ladder.len() {
        warnings.push(format!(
            "ladder truncated from {} to {} entries (finest ε = {}) by the grid compatibility check",
            ladder.len(),
            kept.len(),
            kept.finest()
        ));
    }
    Ok((kept, warnings))
}

pub fn mollifier_net(phi: &Mollifier, ladder: &EpsilonLadder, grid: &Grid) -> Result<MollifierNet> {
    let (ladder, warnings) = compatible_ladder(ladder, grid, phi.r2)?;
    let d = grid.dim();
    let slices = ladder
        .values()
        .iter()
        .map(|&e| {
            fourier::inverse_of(grid, |k| Complex64::new(k.iter().map(|&ki| phi.multiplier(e * ki)).product(), 0.0))
                .iter()
                .map(|v| v.re)
                .collect()
        })
        .collect();
    debug_assert!(d == 1 || d == 2);
    Ok(MollifierNet {
        base: phi.clone(),
        ladder,
        grid: *grid,
        slices,
        warnings,
    })
}

impl MollifierNet {
    /// Frequency multiplier of φ_ε at a wave vector, Π χ(ε ξ_i).
    pub fn multiplier(&self, eps: f64, k: &[f64]) -> f64 {
        k.iter().map(|&ki| self.base.multiplier(eps * ki)).product()
    }

    pub fn order(&self) -> GevreyOrder {
        self.base.order
    }

    pub fn as_net(&self) -> Result<SampledNet> {
        let samples = self.slices.iter().map(|s| s.iter().map(|&v| Complex64::new(v, 0.0)).collect()).collect();
        Ok(SampledNet::new(self.base.order, self.ladder.clone(), self.grid, samples, None)?.with_warnings(self.warnings.iter().cloned()))
    }
}

/// Mollifier with the default radii r1 = 6.5, r2 = 12.5 on L = 64, N = 4096.
pub fn default_mollifier(order: GevreyOrder) -> Result<Mollifier> {
    let grid = Grid::new(1, 64.0, 4096)?;
    let bump = build_gevrey_bump(order, DEFAULT_R1, DEFAULT_R2, &grid)?;
    build_mollifier(&bump, &grid)
}

pub const DEFAULT_R1: f64 = 6.5;
pub const DEFAULT_R2: f64 = 12.5;
