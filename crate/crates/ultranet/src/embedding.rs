//! Embeddings of classical objects into the net algebra.
//!
//! Distributions are embedded by spectral convolution with the mollifier net,
//! T ↦ (T ∗ φ_ε)_ε; Gevrey functions also have the canonical embedding
//! f ↦ (f)_ε. Boundary values 1/(x ∓ i0) additionally have an analytic
//! representative whose slice ε is the periodization of 1/(x − x0 ∓ iε).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classify::{Classifier, GrowthClass, GrowthVerdict};
use crate::error::{Error, Result};
use crate::fourier;
use crate::lstsq::least_squares;
use crate::mollifier::MollifierNet;
use crate::net::{derivative_symbol, multi_indices, net_sub, order_of, BoxRegion, EpsilonLadder, GevreyOrder, Grid, MultiIndex, SampledNet};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRepr {
    /// Periodization of 1/(x − x0 ∓ iε).
    #[default]
    Analytic,
    /// Convolution of the boundary value with φ_ε.
    Mollified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub spec: DistributionSpec,
}

/// Textual description of a distribution to embed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Dirac {
        location: Vec<f64>,
    },
    /// H(x − location), one-dimensional.
    Heaviside {
        location: f64,
    },
    /// 1/(x − location − i0), one-dimensional.
    BoundaryValueMinus {
        location: f64,
        #[serde(default)]
        representation: BoundaryRepr,
    },
    /// 1/(x − location + i0), one-dimensional.
    BoundaryValuePlus {
        location: f64,
        #[serde(default)]
        representation: BoundaryRepr,
    },
    /// δ along the line {y = offset} (axis x) or {x = offset} (axis y).
    #[serde(rename = "line_delta_2d")]
    LineDelta2d {
        axis: Axis,
        #[serde(default)]
        offset: f64,
    },
    /// exp(−1/(1 − |x−c|²/w²)) on |x − c| < w, used as a density.
    GevreyBumpFunction {
        center: Vec<f64>,
        width: f64,
    },
    FiniteLinearCombination {
        terms: Vec<Term>,
    },
}

impl DistributionSpec {
    pub fn dirac(location: &[f64]) -> Self {
        Self::Dirac { location: location.to_vec() }
    }

    pub fn bump(center: &[f64], width: f64) -> Self {
        Self::GevreyBumpFunction {
            center: center.to_vec(),
            width,
        }
    }

    /// Box H(x − a) − H(x − b).
    pub fn box_function(a: f64, b: f64) -> Self {
        Self::FiniteLinearCombination {
            terms: vec![
                Term {
                    coeff: 1.0,
                    spec: Self::Heaviside { location: a },
                },
                Term {
                    coeff: -1.0,
                    spec: Self::Heaviside { location: b },
                },
            ],
        }
    }

    /// Closed support box, when the support is compact.
    pub fn support(&self) -> Option<BoxRegion> {
        match self {
            Self::Dirac { location } => Some(BoxRegion::around(location, 0.0)),
            Self::GevreyBumpFunction { center, width } => Some(BoxRegion::around(center, *width)),
            Self::FiniteLinearCombination { terms } => {
                let boxes: Option<Vec<BoxRegion>> = terms.iter().map(|t| t.spec.support()).collect();
                let boxes = boxes?;
                let first = boxes.first()?.clone();
                Some(boxes.iter().skip(1).fold(first, |acc, b| BoxRegion {
                    lo: acc.lo.iter().zip(&b.lo).map(|(u, v)| u.min(*v)).collect(),
                    hi: acc.hi.iter().zip(&b.hi).map(|(u, v)| u.max(*v)).collect(),
                }))
            }
            _ => None,
        }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        let one_d = |what: &str| {
            if grid.dim() != 1 {
                Err(Error::Domain(format!("{what} is one-dimensional, grid is {}D", grid.dim())))
            } else {
                Ok(())
            }
        };
        let inside = |p: f64| p.abs() < grid.half_length() - 8.0 * grid.spacing();
        match self {
            Self::Dirac { location } | Self::GevreyBumpFunction { center: location, .. } => {
                if location.len() != grid.dim() {
                    return Err(Error::Domain("location dimension differs from the grid".into()));
                }
            }
            Self::Heaviside { location } => {
                one_d("heaviside")?;
                if !inside(*location) {
                    return Err(Error::Wraparound(format!("heaviside jump at {location} is too close to the boundary")));
                }
            }
            Self::BoundaryValueMinus { location, .. } | Self::BoundaryValuePlus { location, .. } => {
                one_d("boundary value")?;
                if !inside(*location) {
                    return Err(Error::Wraparound(format!("singularity at {location} is too close to the boundary")));
                }
            }
            Self::LineDelta2d { offset, .. } => {
                if grid.dim() != 2 {
                    return Err(Error::Domain("line_delta_2d needs a 2D grid".into()));
                }
                if !inside(*offset) {
                    return Err(Error::Wraparound(format!("line offset {offset} is too close to the boundary")));
                }
            }
            Self::FiniteLinearCombination { terms } => {
                for t in terms {
                    t.spec.check(grid)?;
                }
            }
        }
        if let Some(b) = self.support() {
            if b.margin(grid) < 8.0 * grid.spacing() {
                return Err(Error::Wraparound("support is within 8 spacings of the periodic boundary".into()));
            }
        }
        if let Self::GevreyBumpFunction { width, .. } = self {
            if !(*width > 0.0) {
                return Err(Error::Domain("bump width must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Samples of exp(−1/(1 − |x−c|²/w²)) on the grid.
pub fn gevrey_bump_samples(grid: &Grid, center: &[f64], width: f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            let r2: f64 = center.iter().enumerate().map(|(a, c)| (grid.periodic_offset(p[a], *c) / width).powi(2)).sum();
            if r2 < 1.0 {
                Complex64::new((-1.0 / (1.0 - r2)).exp(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Net with every slice equal to `f`; the support box is the bounding box of
/// the nonzero samples when it stays inside the domain.
pub fn canonical_embed(order: GevreyOrder, ladder: &EpsilonLadder, grid: &Grid, f: &[Complex64]) -> Result<SampledNet> {
    if f.len() != grid.len() {
        return Err(Error::InvalidNet(format!("{} samples on a grid of {}", f.len(), grid.len())));
    }
    let samples = vec![f.to_vec(); ladder.len()];
    let net = SampledNet::new(order, ladder.clone(), *grid, samples.clone(), None)?;
    let d = grid.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (i, v) in f.iter().enumerate() {
        if v.norm() > 0.0 {
            let p = grid.point(i);
            for a in 0..d {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
    }
    let l = grid.half_length();
    let h = grid.spacing();
    if lo.iter().all(|v| v.is_finite()) && lo.iter().all(|&v| v > -l) && hi.iter().all(|&v| v < l - h) {
        let b = BoxRegion { lo, hi };
        return SampledNet::new(order, ladder.clone(), *grid, samples, Some(b));
    }
    Ok(net)
}

/// Spectrum of the distribution itself (before mollification) at a wave vector,
/// for the kinds whose slices are T̂ · χ_ε.
fn distribution_symbol(spec: &DistributionSpec, grid: &Grid, k: &[f64]) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    match spec {
        DistributionSpec::Dirac { location } => {
            let phase: f64 = location.iter().zip(k).map(|(x, k)| x * k).sum();
            Complex64::from_polar(1.0, phase)
        }
        DistributionSpec::BoundaryValueMinus { location, .. } => {
            let k = k[0];
            let phase = Complex64::from_polar(1.0, location * k);
            if k > 0.0 {
                2.0 * PI * i * phase
            } else if k == 0.0 {
                PI * i
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        DistributionSpec::BoundaryValuePlus { location, .. } => {
            let k = k[0];
            let phase = Complex64::from_polar(1.0, location * k);
            if k < 0.0 {
                -2.0 * PI * i * phase
            } else if k == 0.0 {
                -PI * i
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        DistributionSpec::LineDelta2d { axis, offset } => {
            // constant along the line: only the zero transverse mode survives
            let (along, across) = match axis {
                Axis::X => (k[0], k[1]),
                Axis::Y => (k[1], k[0]),
            };
            if along == 0.0 {
                Complex64::from_polar(2.0 * grid.half_length(), offset * across)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        _ => unreachable!("kind has no closed-form symbol"),
    }
}

fn slices_from_symbol(grid: &Grid, ladder: &EpsilonLadder, symbol: impl Fn(f64, &[f64]) -> Complex64) -> Vec<Vec<Complex64>> {
    ladder.values().iter().map(|&e| fourier::inverse_of(grid, |k| symbol(e, k))).collect()
}

fn embed_slices(spec: &DistributionSpec, mnet: &MollifierNet) -> Result<Vec<Vec<Complex64>>> {
    let grid = &mnet.grid;
    let ladder = &mnet.ladder;
    Ok(match spec {
        DistributionSpec::Dirac { .. } | DistributionSpec::LineDelta2d { .. } => {
            slices_from_symbol(grid, ladder, |e, k| distribution_symbol(spec, grid, k) * mnet.multiplier(e, k))
        }
        DistributionSpec::BoundaryValueMinus { representation, .. } | DistributionSpec::BoundaryValuePlus { representation, .. } => match representation {
            BoundaryRepr::Analytic => slices_from_symbol(grid, ladder, |e, k| distribution_symbol(spec, grid, k) * (-e * k[0].abs()).exp()),
            BoundaryRepr::Mollified => slices_from_symbol(grid, ladder, |e, k| distribution_symbol(spec, grid, k) * mnet.multiplier(e, k)),
        },
        DistributionSpec::Heaviside { location } => {
            let h = grid.spacing();
            let dirac = DistributionSpec::Dirac { location: vec![*location] };
            embed_slices(&dirac, mnet)?
                .into_iter()
                .map(|slice| {
                    let mut acc = 0.0;
                    slice
                        .iter()
                        .map(|v| {
                            acc += v.re * h;
                            Complex64::new(acc, 0.0)
                        })
                        .collect()
                })
                .collect()
        }
        DistributionSpec::GevreyBumpFunction { center, width } => {
            let f = gevrey_bump_samples(grid, center, *width);
            let spec_f = fourier::forward(grid, &f);
            let d = grid.dim();
            ladder
                .values()
                .iter()
                .map(|&e| {
                    let prod: Vec<Complex64> = spec_f
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v * mnet.multiplier(e, &grid.wavevector(i)[..d]))
                        .collect();
                    fourier::inverse(grid, &prod)
                })
                .collect()
        }
        DistributionSpec::FiniteLinearCombination { terms } => {
            let mut acc = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; ladder.len()];
            for t in terms {
                let s = embed_slices(&t.spec, mnet)?;
                for (a, b) in acc.iter_mut().zip(s) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += t.coeff * y;
                    }
                }
            }
            acc
        }
    })
}

/// Support of a line delta: the full circle along its axis.
fn torus_support(spec: &DistributionSpec, grid: &Grid) -> Option<BoxRegion> {
    let l = grid.half_length();
    match spec {
        DistributionSpec::LineDelta2d { axis: Axis::X, offset } => Some(BoxRegion {
            lo: vec![-l, *offset],
            hi: vec![l, *offset],
        }),
        DistributionSpec::LineDelta2d { axis: Axis::Y, offset } => Some(BoxRegion {
            lo: vec![*offset, -l],
            hi: vec![*offset, l],
        }),
        _ => None,
    }
}

/// T ↦ (T ∗ φ_ε)_ε, or the analytic representative for boundary values.
pub fn embed_distribution(spec: &DistributionSpec, mnet: &MollifierNet) -> Result<SampledNet> {
    spec.check(&mnet.grid)?;
    let slices = embed_slices(spec, mnet)?;
    Ok(SampledNet::new(mnet.order(), mnet.ladder.clone(), mnet.grid, slices, None)?
        .with_source_support(spec.support().or_else(|| torus_support(spec, &mnet.grid)))
        .with_warnings(mnet.warnings.iter().cloned()))
}

/// Verdict on f − f ∗ φ_ε with the per-α prefactor pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollificationReport {
    pub verdict: GrowthVerdict,
    /// (|α|, fitted log prefactor of ln sup |∂^α(f − f∗φ_ε)| against ε^{−a}).
    pub log_prefactors: Vec<(usize, f64)>,
    /// ln C from c_α − s·ln α! ≈ c_0 + |α| ln C.
    pub log_c: f64,
    pub pattern_residual: f64,
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Negligibility of the mollification error of a Gevrey function.
pub fn mollification_error(f: &[Complex64], mnet: &MollifierNet, classifier: &Classifier) -> Result<MollificationReport> {
    let grid = &mnet.grid;
    if f.len() != grid.len() {
        return Err(Error::InvalidNet("sample count differs from the grid".into()));
    }
    let spec_f = fourier::forward(grid, f);
    let d = grid.dim();
    let slices: Vec<Vec<Complex64>> = mnet
        .ladder
        .values()
        .iter()
        .map(|&e| {
            let prod: Vec<Complex64> = spec_f
                .iter()
                .enumerate()
                .map(|(i, v)| v * (1.0 - mnet.multiplier(e, &grid.wavevector(i)[..d])))
                .collect();
            fourier::inverse(grid, &prod)
        })
        .collect();
    let diff = SampledNet::new(mnet.order(), mnet.ladder.clone(), *grid, slices, None)?;
    let verdict = classifier.classify_net(&diff, &BoxRegion::domain(grid))?;
    Ok(prefactor_pattern(verdict, mnet.order()))
}

fn prefactor_pattern(verdict: GrowthVerdict, order: GevreyOrder) -> MollificationReport {
    let mut by_order: Vec<(usize, f64)> = Vec::new();
    for a in &verdict.per_alpha {
        let n = order_of(&a.alpha);
        match by_order.iter_mut().find(|(m, _)| *m == n) {
            Some(entry) => entry.1 = entry.1.max(a.intercept),
            None => by_order.push((n, a.intercept)),
        }
    }
    let x: Vec<f64> = by_order.iter().map(|(n, _)| *n as f64).collect();
    let y: Vec<f64> = by_order.iter().map(|(n, c)| c - order.s() * ln_factorial(*n)).collect();
    let ones = vec![1.0; x.len()];
    let (log_c, pattern_residual) = least_squares(&[&ones, &x], &y).map(|(c, r)| (c[1], r)).unwrap_or((0.0, 0.0));
    MollificationReport {
        verdict,
        log_prefactors: by_order,
        log_c,
        pattern_residual,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramReport {
    pub verdict: GrowthVerdict,
    pub passed: bool,
}

/// Compares the canonical embedding of f with the embedding of f as a
/// density; passes when the difference is negligible.
pub fn diagram_check(f: &[Complex64], density: &DistributionSpec, mnet: &MollifierNet, classifier: &Classifier) -> Result<DiagramReport> {
    let canonical = canonical_embed(mnet.order(), &mnet.ladder, &mnet.grid, f)?;
    let embedded = embed_distribution(density, mnet)?;
    let diff = net_sub(&canonical, &embedded)?;
    let verdict = classifier.classify_net(&diff, &BoxRegion::domain(&mnet.grid))?;
    Ok(DiagramReport {
        passed: verdict.class == GrowthClass::Negligible,
        verdict,
    })
}

/// Truncated ultradifferential operator P(D) = Σ a_γ ∂^γ with
/// |a_γ| ≤ c h^{|γ|}/(γ!)^s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UltradiffOperator {
    pub order: GevreyOrder,
    pub coeffs: Vec<(MultiIndex, Complex64)>,
    pub c: f64,
    pub h: f64,
}

fn ln_multi_factorial(g: &[usize]) -> f64 {
    g.iter().map(|&n| ln_factorial(n)).sum()
}

impl UltradiffOperator {
    pub fn new(order: GevreyOrder, coeffs: Vec<(MultiIndex, Complex64)>, c: f64, h: f64) -> Result<Self> {
        if !(c > 0.0 && h > 0.0) {
            return Err(Error::InvalidOperator("bound parameters c and h must be positive".into()));
        }
        for (g, a) in &coeffs {
            let bound = c * h.powi(order_of(g) as i32) * (-order.s() * ln_multi_factorial(g)).exp();
            if a.norm() > bound * (1.0 + 1e-12) {
                return Err(Error::InvalidOperator(format!("|a_{g:?}| = {} exceeds c h^|γ| / γ!^s = {bound}", a.norm())));
            }
        }
        Ok(Self { order, coeffs, c, h })
    }

    pub fn identity(order: GevreyOrder, dim: usize) -> Self {
        Self {
            order,
            coeffs: vec![(vec![0; dim], Complex64::new(1.0, 0.0))],
            c: 1.0,
            h: 1.0,
        }
    }

    /// a_γ = c h^{|γ|}/(γ!)^s for every |γ| ≤ γ_max (per axis in 2D).
    pub fn gevrey_series(order: GevreyOrder, dim: usize, c: f64, h: f64, gamma_max: usize) -> Result<Self> {
        let coeffs = match dim {
            1 => (0..=gamma_max).map(|g| vec![g]).collect::<Vec<_>>(),
            _ => (0..=gamma_max).flat_map(|a| (0..=gamma_max).map(move |b| vec![a, b])).collect(),
        }
        .into_iter()
        .map(|g| {
            let a = c * h.powi(order_of(&g) as i32) * (-order.s() * ln_multi_factorial(&g)).exp();
            (g, Complex64::new(a, 0.0))
        })
        .collect();
        Self::new(order, coeffs, c, h)
    }

    pub fn symbol(&self, k: &[f64]) -> Complex64 {
        self.coeffs.iter().map(|(g, a)| a * derivative_symbol(g, k)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UltradiffOutput {
    pub net: SampledNet,
    /// Bound on the sup of the omitted terms Σ_{γ not stored} c h^{|γ|} |ξ^γ| / γ!^s |f̂|.
    pub tail_estimate: f64,
}

pub fn apply_ultradiff(p: &UltradiffOperator, net: &SampledNet) -> Result<UltradiffOutput> {
    if p.order != net.order() {
        return Err(Error::Incompatible("operator and net have different Gevrey orders".into()));
    }
    let grid = *net.grid();
    let d = grid.dim();
    if p.coeffs.iter().any(|(g, _)| g.len() != d) {
        return Err(Error::InvalidOperator("multi-index length differs from the grid dimension".into()));
    }
    let symbols: Vec<Complex64> = (0..grid.len()).map(|i| p.symbol(&grid.wavevector(i)[..d])).collect();
    let half_nyq = grid.nyquist() / 2.0;
    let gamma_cap = p.coeffs.iter().map(|(g, _)| order_of(g)).max().unwrap_or(0) + 40;
    let stored: Vec<&MultiIndex> = p.coeffs.iter().map(|(g, _)| g).collect();
    let mut tail_estimate: f64 = 0.0;
    let mut aliased = false;
    let mut samples = Vec::with_capacity(net.ladder().len());
    for slice in net.samples() {
        let mut spec = fourier::forward(&grid, slice);
        let max = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut band = vec![0.0f64; d];
        let mut l1 = 0.0;
        for (i, v) in spec.iter().enumerate() {
            let n = v.norm();
            l1 += n;
            if n > 1e-14 * max {
                let k = grid.wavevector(i);
                for a in 0..d {
                    band[a] = band[a].max(k[a].abs());
                    if k[a].abs() > half_nyq && n > 1e-12 * max {
                        aliased = true;
                    }
                }
            }
        }
        let sup_bound = l1 / (2.0 * grid.half_length()).powi(d as i32);
        let mut tail = 0.0;
        for g in multi_indices(d, gamma_cap) {
            if stored.contains(&&g) {
                continue;
            }
            let ln_term = (p.c).ln() + order_of(&g) as f64 * p.h.ln() + g.iter().zip(&band).map(|(&gi, &b)| gi as f64 * b.max(1e-300).ln()).sum::<f64>()
                - p.order.s() * ln_multi_factorial(&g);
            tail += ln_term.exp();
        }
        tail_estimate = tail_estimate.max(tail * sup_bound);
        for (v, m) in spec.iter_mut().zip(&symbols) {
            *v *= m;
        }
        samples.push(fourier::inverse(&grid, &spec));
    }
    let mut out = net.with_samples(samples)?.with_warnings(net.warnings().iter().cloned());
    if aliased {
        out = out.with_warning("ultradifferential operator applied to a net with content above Nyquist/2");
    }
    Ok(UltradiffOutput { net: out, tail_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify_net;
    use crate::mollifier::{default_mollifier, mollifier_net};
    use crate::net::{net_mul, spectral_derivative};

    fn setup() -> MollifierNet {
        let o = GevreyOrder::new(2.0).unwrap();
        let m = default_mollifier(o).unwrap();
        let grid = Grid::new(1, 8.0, 4096).unwrap();
        mollifier_net(&m, &EpsilonLadder::geometric(2.0, 2, 10).unwrap(), &grid).unwrap()
    }

    #[test]
    fn dirac_equals_mollifier_net() {
        let mnet = setup();
        let d = embed_distribution(&DistributionSpec::dirac(&[0.0]), &mnet).unwrap();
        for (a, b) in d.samples().iter().zip(&mnet.slices) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn heaviside_reaches_one() {
        let mnet = setup();
        let h = embed_distribution(&DistributionSpec::Heaviside { location: 0.0 }, &mnet).unwrap();
        let g = mnet.grid;
        let i = (0..g.len()).find(|&i| g.coord(i) >= 7.0).unwrap();
        for s in h.samples() {
            assert!((s[i].re - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn boundary_value_sup_and_class() {
        let mnet = setup();
        let spec = DistributionSpec::BoundaryValueMinus {
            location: 0.0,
            representation: BoundaryRepr::Analytic,
        };
        let bv = embed_distribution(&spec, &mnet).unwrap();
        for (s, &e) in bv.samples().iter().zip(mnet.ladder.values()) {
            let sup = s.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!((sup * e - 1.0).abs() < 2e-3, "{e} {sup}");
        }
        let v = classify_net(&bv, 1, &BoxRegion::domain(&mnet.grid)).unwrap();
        assert_eq!(v.class, GrowthClass::Moderate);
    }

    #[test]
    fn linear_combination_is_exact() {
        let mnet = setup();
        let a = DistributionSpec::dirac(&[0.5]);
        let b = DistributionSpec::Heaviside { location: -1.0 };
        let combo = DistributionSpec::FiniteLinearCombination {
            terms: vec![Term { coeff: 2.0, spec: a.clone() }, Term { coeff: -3.0, spec: b.clone() }],
        };
        let ea = embed_distribution(&a, &mnet).unwrap();
        let eb = embed_distribution(&b, &mnet).unwrap();
        let ec = embed_distribution(&combo, &mnet).unwrap();
        for k in 0..mnet.ladder.len() {
            for i in 0..mnet.grid.len() {
                let want = 2.0 * ea.slice(k)[i] - 3.0 * eb.slice(k)[i];
                assert_eq!(ec.slice(k)[i], want);
            }
        }
    }

    #[test]
    fn near_boundary_rejected() {
        let mnet = setup();
        let r = embed_distribution(&DistributionSpec::dirac(&[7.99]), &mnet);
        assert!(matches!(r, Err(Error::Wraparound(_))));
        let r = embed_distribution(&DistributionSpec::LineDelta2d { axis: Axis::X, offset: 0.0 }, &mnet);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn canonical_product_is_product_of_canonicals() {
        let mnet = setup();
        let o = mnet.order();
        let g = mnet.grid;
        let f = gevrey_bump_samples(&g, &[0.0], 1.0);
        let h: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new(g.coord(i).sin(), 0.0)).collect();
        let fh: Vec<Complex64> = f.iter().zip(&h).map(|(a, b)| a * b).collect();
        let lhs = net_mul(
            &canonical_embed(o, &mnet.ladder, &g, &f).unwrap(),
            &canonical_embed(o, &mnet.ladder, &g, &h).unwrap(),
        )
        .unwrap();
        let rhs = canonical_embed(o, &mnet.ladder, &g, &fh).unwrap();
        assert_eq!(lhs.samples(), rhs.samples());
        assert!(canonical_embed(o, &mnet.ladder, &g, &f).unwrap().support_box().is_some());
    }

    #[test]
    fn zero_function_error_is_negligible() {
        let mnet = setup();
        let zero = vec![Complex64::new(0.0, 0.0); mnet.grid.len()];
        let r = mollification_error(&zero, &mnet, &Classifier::default()).unwrap();
        assert_eq!(r.verdict.class, GrowthClass::Negligible);
    }

    #[test]
    fn operator_bounds() {
        let o = GevreyOrder::new(2.0).unwrap();
        assert!(UltradiffOperator::new(o, vec![(vec![2], Complex64::new(1.0, 0.0))], 1.0, 1.0).is_err());
        assert!(UltradiffOperator::new(o, vec![(vec![2], Complex64::new(0.25, 0.0))], 1.0, 1.0).is_ok());
        assert!(UltradiffOperator::gevrey_series(o, 2, 1.0, 0.5, 8).is_ok());
    }

    #[test]
    fn identity_and_first_derivative() {
        let o = GevreyOrder::new(2.0).unwrap();
        let g = Grid::new(1, PI, 64).unwrap();
        let l = EpsilonLadder::geometric(2.0, 2, 6).unwrap();
        let net = SampledNet::from_fn(o, l, g, |_, p| Complex64::new(p[0].sin(), 0.0)).unwrap();
        let id = apply_ultradiff(&UltradiffOperator::identity(o, 1), &net).unwrap();
        for (a, b) in id.net.samples().iter().zip(net.samples()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).norm() < 1e-14);
            }
        }
        let p = UltradiffOperator::new(o, vec![(vec![1], Complex64::new(1.0, 0.0))], 1.0, 1.0).unwrap();
        let out = apply_ultradiff(&p, &net).unwrap();
        let oracle = spectral_derivative(&net, &[1]).unwrap();
        for (a, b) in out.net.samples().iter().zip(oracle.samples()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).norm() <= 1e-10);
            }
        }
    }
}
