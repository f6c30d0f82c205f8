//! Nets of grid samples representing generalized Gevrey ultradistributions.
//!
//! A [`SampledNet`] stores one representative (f_ε)_ε on a finite ladder of ε
//! values. Equality in the quotient algebra is never decided here; two nets
//! represent the same element when their difference classifies as negligible.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier;

/// Gevrey order s > 1 with the derived exponents a = 1/(2s−1) and 1/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GevreyOrder {
    s: f64,
    a: f64,
    inv_s: f64,
}

impl GevreyOrder {
    pub fn new(s: f64) -> Result<Self> {
        if !s.is_finite() || s <= 1.0 {
            return Err(invalid("GevreyOrder", format!("s must be finite and > 1, got {s}")));
        }
        Ok(Self {
            s,
            a: 1.0 / (2.0 * s - 1.0),
            inv_s: 1.0 / s,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Growth exponent 1/(2s−1).
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Frequency exponent 1/s.
    pub fn inv_s(&self) -> f64 {
        self.inv_s
    }
}

impl TryFrom<f64> for GevreyOrder {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<GevreyOrder> for f64 {
    fn from(o: GevreyOrder) -> f64 {
        o.s
    }
}

/// Strictly decreasing ε values in (0, 1), at least four of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EpsilonLadder {
    values: Vec<f64>,
}

impl EpsilonLadder {
    pub const MIN_LEN: usize = 4;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < Self::MIN_LEN {
            return Err(invalid(
                "EpsilonLadder",
                format!("need at least {} entries, got {}", Self::MIN_LEN, values.len()),
            ));
        }
        if values.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(invalid("EpsilonLadder", "entries must lie in (0, 1)"));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("EpsilonLadder", "entries must be strictly decreasing"));
        }
        Ok(Self { values })
    }

    /// ε_j = base^{−j} for j = j_min..=j_max.
    pub fn geometric(base: f64, j_min: i32, j_max: i32) -> Result<Self> {
        if !(base > 1.0) {
            return Err(invalid("EpsilonLadder", format!("base must exceed 1, got {base}")));
        }
        Self::new((j_min..=j_max).map(|j| base.powi(-j)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn finest(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Keeps the leading entries accepted by `keep`; the ladder is cut at the
    /// first rejected entry.
    pub fn truncate_while(&self, keep: impl Fn(f64) -> bool) -> Result<Self> {
        let n = self.values.iter().take_while(|&&e| keep(e)).count();
        Self::new(self.values[..n].to_vec())
    }
}

impl TryFrom<Vec<f64>> for EpsilonLadder {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EpsilonLadder> for Vec<f64> {
    fn from(l: EpsilonLadder) -> Vec<f64> {
        l.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct GridSpec {
    dim: usize,
    half_length: f64,
    points: usize,
}

/// Periodic grid on [−L, L)^m with N points per axis, m ∈ {1, 2}.
///
/// Node i sits at x_i = (i − N/2)·h with h = 2L/N. In 2D the flat index is
/// i·N + j with i along the first axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    half_length: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_length: f64, points: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(invalid("Grid.dim", format!("must be 1 or 2, got {dim}")));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(invalid("Grid.half_length", format!("must be positive, got {half_length}")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(invalid("Grid.points", format!("must be a power of two ≥ 8, got {points}")));
        }
        Ok(Self { dim, half_length, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Total number of nodes, N^m.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// h^m, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of node i along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.points / 2) as f64) * self.spacing()
    }

    /// Position of a flat node index; the second entry is 0 in 1D.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coord(flat), 0.0],
            _ => [self.coord(flat / self.points), self.coord(flat % self.points)],
        }
    }

    /// Spacing of the dual grid, π/L.
    pub fn dk(&self) -> f64 {
        std::f64::consts::PI / self.half_length
    }

    /// Nyquist wavenumber π/h.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// Wavenumber of spectral index i along one axis (FFT order).
    pub fn wavenumber(&self, i: usize) -> f64 {
        let n = self.points as i64;
        let m = i as i64;
        let m = if m < n / 2 { m } else { m - n };
        m as f64 * self.dk()
    }

    /// Wave vector of a flat spectral index; the second entry is 0 in 1D.
    pub fn wavevector(&self, flat: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.wavenumber(flat), 0.0],
            _ => [self.wavenumber(flat / self.points), self.wavenumber(flat % self.points)],
        }
    }

    /// Minimum-image displacement x − c along one axis of the periodic domain.
    pub fn periodic_offset(&self, x: f64, c: f64) -> f64 {
        let period = 2.0 * self.half_length;
        let d = x - c;
        d - period * (d / period).round()
    }
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(g: GridSpec) -> Result<Self> {
        Self::new(g.dim, g.half_length, g.points)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> GridSpec {
        GridSpec {
            dim: g.dim,
            half_length: g.half_length,
            points: g.points,
        }
    }
}

/// Closed axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 {
            return Err(Error::Domain("box corners must have matching dimension 1 or 2".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::Domain("box has lo > hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// The whole periodic domain of a grid.
    pub fn domain(grid: &Grid) -> Self {
        let l = grid.half_length();
        Self {
            lo: vec![-l; grid.dim()],
            hi: vec![l; grid.dim()],
        }
    }

    /// Cube of half-width r around c.
    pub fn around(c: &[f64], r: f64) -> Self {
        Self {
            lo: c.iter().map(|v| v - r).collect(),
            hi: c.iter().map(|v| v + r).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.lo.iter().zip(&self.hi).zip(p).all(|((lo, hi), x)| *lo <= *x && *x <= *hi)
    }

    pub fn intersect(&self, other: &BoxRegion) -> Option<BoxRegion> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        BoxRegion::new(lo, hi).ok()
    }

    /// Smallest distance from the box to the boundary of the grid domain;
    /// axes spanned in full are periodic and do not count.
    pub fn margin(&self, grid: &Grid) -> f64 {
        let l = grid.half_length();
        self.lo
            .iter()
            .zip(&self.hi)
            .filter(|(lo, hi)| !(**lo <= -l && **hi >= l))
            .map(|(lo, hi)| (lo + l).min(l - hi))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Multi-index α with one entry per grid axis.
pub type MultiIndex = Vec<usize>;

pub fn order_of(alpha: &[usize]) -> usize {
    alpha.iter().sum()
}

/// All multi-indices of dimension `dim` with |α| ≤ max, ordered by |α| then
/// lexicographically.
pub fn multi_indices(dim: usize, max: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for total in 0..=max {
        match dim {
            1 => out.push(vec![total]),
            _ => {
                for i in (0..=total).rev() {
                    out.push(vec![i, total - i]);
                }
            }
        }
    }
    out
}

/// Relative threshold below which samples count as vanishing outside a support box.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

/// ε-indexed family of grid samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledNet {
    order: GevreyOrder,
    ladder: EpsilonLadder,
    grid: Grid,
    samples: Vec<Vec<Complex64>>,
    support_box: Option<BoxRegion>,
    #[serde(default)]
    source_support: Option<BoxRegion>,
    #[serde(default)]
    warnings: Vec<String>,
}

impl SampledNet {
    /// Validates shapes, finiteness and, when given, the support box.
    pub fn new(order: GevreyOrder, ladder: EpsilonLadder, grid: Grid, samples: Vec<Vec<Complex64>>, support_box: Option<BoxRegion>) -> Result<Self> {
        if samples.len() != ladder.len() {
            return Err(Error::InvalidNet(format!("{} slices for a ladder of {} entries", samples.len(), ladder.len())));
        }
        for (k, slice) in samples.iter().enumerate() {
            if slice.len() != grid.len() {
                return Err(Error::InvalidNet(format!("slice {k} has {} samples, grid has {}", slice.len(), grid.len())));
            }
            if slice.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::InvalidNet(format!("slice {k} (ε = {}) has non-finite samples", ladder.values()[k])));
            }
        }
        let net = Self {
            order,
            ladder,
            grid,
            samples,
            support_box,
            source_support: None,
            warnings: Vec::new(),
        };
        if let Some(b) = &net.support_box {
            if b.dim() != grid.dim() {
                return Err(Error::Domain("support box dimension differs from the grid".into()));
            }
            net.check_support(b)?;
        }
        Ok(net)
    }

    /// Net with slices f_ε(x) = f(ε, x).
    pub fn from_fn(order: GevreyOrder, ladder: EpsilonLadder, grid: Grid, f: impl Fn(f64, [f64; 2]) -> Complex64) -> Result<Self> {
        let samples = ladder
            .values()
            .iter()
            .map(|&e| (0..grid.len()).map(|i| f(e, grid.point(i))).collect())
            .collect();
        Self::new(order, ladder, grid, samples, None)
    }

    fn check_support(&self, b: &BoxRegion) -> Result<()> {
        for (k, slice) in self.samples.iter().enumerate() {
            let max = slice.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let tol = SUPPORT_TOLERANCE * max;
            for (i, v) in slice.iter().enumerate() {
                let p = self.grid.point(i);
                if !b.contains(&p[..self.grid.dim()]) && v.norm() > tol {
                    return Err(Error::InvalidNet(format!(
                        "slice {k} does not vanish outside the support box at {:?}",
                        &p[..self.grid.dim()]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn order(&self) -> GevreyOrder {
        self.order
    }

    pub fn ladder(&self) -> &EpsilonLadder {
        &self.ladder
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Vec<Complex64>] {
        &self.samples
    }

    pub fn slice(&self, k: usize) -> &[Complex64] {
        &self.samples[k]
    }

    pub fn support_box(&self) -> Option<&BoxRegion> {
        self.support_box.as_ref()
    }

    /// Support of the embedded distribution, for nets whose slices are not
    /// compactly supported on the grid (mollified embeddings).
    pub fn source_support(&self) -> Option<&BoxRegion> {
        self.source_support.as_ref()
    }

    pub fn with_source_support(mut self, b: Option<BoxRegion>) -> Self {
        self.source_support = b;
        self
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }

    pub(crate) fn with_warnings(mut self, ws: impl IntoIterator<Item = String>) -> Self {
        self.warnings.extend(ws);
        self
    }

    /// Same discretization, new samples; supports are dropped.
    pub fn with_samples(&self, samples: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::new(self.order, self.ladder.clone(), self.grid, samples, None)
    }

    fn map_samples(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for slice in out.samples.iter_mut() {
            for v in slice.iter_mut() {
                *v = f(*v);
            }
        }
        out
    }

    /// Multiplies every sample by a constant.
    pub fn scale(&self, c: Complex64) -> Self {
        self.map_samples(|v| v * c)
    }

    /// Multiplies slice ε by c(ε).
    pub fn scale_by(&self, c: impl Fn(f64) -> Complex64) -> Self {
        let mut out = self.clone();
        for (slice, &e) in out.samples.iter_mut().zip(self.ladder.values()) {
            let f = c(e);
            for v in slice.iter_mut() {
                *v *= f;
            }
        }
        out
    }

    /// Keeps the slices of the finest `n` ladder entries.
    pub fn finest_slices(&self, n: usize) -> (&[f64], &[Vec<Complex64>]) {
        let k = self.ladder.len().saturating_sub(n);
        (&self.ladder.values()[k..], &self.samples[k..])
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().flat_map(|s| s.iter()).map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &SampledNet) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Incompatible("grids differ".into()));
        }
        if self.ladder != other.ladder {
            return Err(Error::Incompatible("ladders differ".into()));
        }
        if self.order != other.order {
            return Err(Error::Incompatible("Gevrey orders differ".into()));
        }
        Ok(())
    }

    fn zip_with(&self, other: &SampledNet, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        let mut out = Self::new(self.order, self.ladder.clone(), self.grid, samples, None)?;
        out.warnings = self.warnings.iter().chain(&other.warnings).cloned().collect();
        Ok(out)
    }
}

/// Slice-wise sum; a support box survives only when both nets carry one
/// (the hull of the two boxes).
pub fn net_add(a: &SampledNet, b: &SampledNet) -> Result<SampledNet> {
    let mut out = a.zip_with(b, |x, y| x + y)?;
    out.support_box = match (&a.support_box, &b.support_box) {
        (Some(p), Some(q)) => Some(BoxRegion {
            lo: p.lo.iter().zip(&q.lo).map(|(u, v)| u.min(*v)).collect(),
            hi: p.hi.iter().zip(&q.hi).map(|(u, v)| u.max(*v)).collect(),
        }),
        _ => None,
    };
    Ok(out)
}

pub fn net_sub(a: &SampledNet, b: &SampledNet) -> Result<SampledNet> {
    net_add(a, &b.scale(Complex64::new(-1.0, 0.0)))
}

/// Slice-wise product; the support box is the intersection of the boxes
/// present (a single box is kept as is).
pub fn net_mul(a: &SampledNet, b: &SampledNet) -> Result<SampledNet> {
    let mut out = a.zip_with(b, |x, y| x * y)?;
    out.support_box = match (&a.support_box, &b.support_box) {
        (Some(p), Some(q)) => match p.intersect(q) {
            Some(r) => Some(r),
            None => {
                // disjoint supports: the product vanishes identically
                let c = p.lo.clone();
                Some(BoxRegion { lo: c.clone(), hi: c })
            }
        },
        (Some(p), None) | (None, Some(p)) => Some(p.clone()),
        _ => None,
    };
    Ok(out)
}

/// Spectral coefficients at or below this fraction of the slice maximum are
/// round-off and are cleared before differentiation.
pub const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Multiplier (−iξ)^α of ∂^α under the +i Fourier convention.
pub fn derivative_symbol(alpha: &[usize], k: &[f64]) -> Complex64 {
    let mut m = Complex64::new(1.0, 0.0);
    for (&a, &ki) in alpha.iter().zip(k) {
        m *= Complex64::new(0.0, -ki).powu(a as u32);
    }
    m
}

/// ∂^α of every slice, computed in frequency space.
///
/// When the net's support box lies within 8 spacings of the periodic
/// boundary the result carries a wraparound warning.
pub fn spectral_derivative(net: &SampledNet, alpha: &[usize]) -> Result<SampledNet> {
    let grid = *net.grid();
    if alpha.len() != grid.dim() {
        return Err(Error::Domain(format!("multi-index of length {} on a {}D grid", alpha.len(), grid.dim())));
    }
    if order_of(alpha) == 0 {
        return Ok(net.clone());
    }
    let symbols: Vec<Complex64> = (0..grid.len()).map(|i| derivative_symbol(alpha, &grid.wavevector(i)[..grid.dim()])).collect();
    let samples = net
        .samples()
        .iter()
        .map(|slice| {
            let mut spec = fourier::forward(&grid, slice);
            let max = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (v, m) in spec.iter_mut().zip(&symbols) {
                if v.norm() <= ROUNDOFF_FLOOR * max {
                    *v = Complex64::new(0.0, 0.0);
                } else {
                    *v *= m;
                }
            }
            fourier::inverse(&grid, &spec)
        })
        .collect();
    let mut out = SampledNet::new(net.order(), net.ladder().clone(), grid, samples, None)?.with_warnings(net.warnings().iter().cloned());
    out.source_support = net.source_support.clone();
    let support = net.support_box().or(net.source_support());
    if let Some(b) = support {
        if b.margin(&grid) < 8.0 * grid.spacing() {
            out = out.with_warning("wraparound: support within 8 spacings of the periodic boundary");
        }
        // derivatives keep the support of a compactly supported net
        if net.support_box().is_some() {
            let candidate = b.clone();
            if out.check_support(&candidate).is_ok() {
                out.support_box = Some(candidate);
            }
        }
    }
    Ok(out)
}

/// ε-indexed generalized number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedScalar {
    pub order: GevreyOrder,
    pub ladder: EpsilonLadder,
    pub values: Vec<Complex64>,
}

impl GeneralizedScalar {
    pub fn new(order: GevreyOrder, ladder: EpsilonLadder, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != ladder.len() {
            return Err(Error::InvalidNet("one value per ladder entry required".into()));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidNet("non-finite generalized number".into()));
        }
        Ok(Self { order, ladder, values })
    }

    pub fn from_fn(order: GevreyOrder, ladder: EpsilonLadder, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = ladder.values().iter().map(|&e| f(e)).collect();
        Self::new(order, ladder, values)
    }
}
