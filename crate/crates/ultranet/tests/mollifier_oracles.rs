use std::f64::consts::PI;

use num_complex::Complex64;
use ultranet::fourier;
use ultranet::mollifier::{default_mollifier, radial_cutoff, seminorm_estimate, Mollifier};
use ultranet::net::GevreyOrder;

fn phi() -> Mollifier {
    default_mollifier(GevreyOrder::new(2.0).unwrap()).unwrap()
}

/// Trapezoid nodes on [0, r2] for the even frequency integrals.
fn half_band(m: &Mollifier, dxi: f64) -> Vec<(f64, f64)> {
    let n = (m.r2 / dxi).ceil() as usize;
    let step = m.r2 / n as f64;
    (0..=n)
        .map(|i| {
            let xi = i as f64 * step;
            let w = if i == 0 || i == n { step / 2.0 } else { step };
            (xi, w * radial_cutoff(xi, m.r1, m.r2, m.profile))
        })
        .collect()
}

/// ∂^α φ(x) = (1/π) ∫_0^{r2} ξ^α χ(ξ) Re[(−i)^α e^{−ixξ}] dξ for α = 0..=max.
fn direct_derivatives(nodes: &[(f64, f64)], x: f64, max: usize) -> Vec<f64> {
    let mut out = vec![0.0; max + 1];
    for &(xi, w) in nodes {
        let (s, c) = (x * xi).sin_cos();
        let mut p = w;
        for (a, o) in out.iter_mut().enumerate() {
            let trig = match a % 4 {
                0 => c,
                1 => -s,
                2 => -c,
                _ => s,
            };
            *o += p * trig;
            p *= xi;
        }
    }
    out.iter().map(|v| v / PI).collect()
}

#[test]
fn value_at_origin_is_band_integral() {
    let m = phi();
    let band: f64 = half_band(&m, 1e-4).iter().map(|(_, w)| w).sum::<f64>() / PI;
    assert!((m.value_at_origin() - band).abs() < 1e-8, "{} vs {band}", m.value_at_origin());
}

#[test]
fn moments_meet_tolerances() {
    let m = phi();
    for &(a, r) in &m.moment_residuals {
        let tol = if a == 0 { 1e-8 } else { 1e-6 };
        assert!(r <= tol, "α = {a}: {r:e}");
    }
    assert_eq!(m.moment_residuals.len(), 6);
}

#[test]
fn transform_is_plateau_then_cutoff() {
    let m = phi();
    let f: Vec<Complex64> = m.phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spec = fourier::forward(&m.grid, &f);
    for (i, v) in spec.iter().enumerate() {
        let k = m.grid.wavenumber(i);
        assert!((v - m.multiplier(k)).norm() < 1e-8, "ξ = {k}: {v}");
        if k.abs() <= m.r1 {
            assert!((v.re - 1.0).abs() < 1e-8);
        }
        if k.abs() >= m.r2 {
            assert!(v.norm() < 1e-8);
        }
    }
}

#[test]
fn seminorm_agrees_with_direct_quadrature_at_double_resolution() {
    let m = phi();
    let trunc = (8, 8);
    let nodes = half_band(&m, 0.01);
    let l = m.grid.half_length();
    let n = 2 * m.grid.points();
    let h = 2.0 * l / n as f64;
    // ∫|x|^β |∂^α φ| on [−L, L], trapezoid at spacing h/2
    let mut integrals = vec![vec![0.0; trunc.1 + 1]; trunc.0 + 1];
    for i in 0..=n {
        let x = -l + i as f64 * h;
        let w = if i == 0 || i == n { h / 2.0 } else { h };
        let d = direct_derivatives(&nodes, x, trunc.0);
        for (a, row) in integrals.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v += w * x.abs().powi(b as i32) * d[a].abs();
            }
        }
    }
    let lnfact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    for b in [1.0, 2.0, 4.0] {
        let mut oracle: f64 = 0.0;
        for (a, row) in integrals.iter().enumerate() {
            for (be, v) in row.iter().enumerate() {
                let den = ((a + be) as f64 * f64::ln(b) + 2.0 * (lnfact(a) + lnfact(be))).exp();
                oracle = oracle.max(v / den);
            }
        }
        let est = seminorm_estimate(&m, b, trunc).unwrap();
        assert!((est - oracle).abs() <= 0.01 * oracle, "b = {b}: {est} vs {oracle}");
    }
}

#[test]
fn seminorm_rejects_nonpositive_b() {
    assert!(seminorm_estimate(&phi(), 0.0, (2, 2)).is_err());
}
