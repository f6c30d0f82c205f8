//! Spectra of nets and the decay model
//! log |f̂_ε(ξ)| ≈ c0 + k1·ε^{−1/(2s−1)} − k2·|ξ|^{1/s}
//! fitted per direction bin on shell maxima.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier;
use crate::lstsq::least_squares;
use crate::mollifier::DEFAULT_R1;
use crate::net::{EpsilonLadder, GevreyOrder, Grid, SampledNet};

/// Where a spectrum was localized, when it was.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowProvenance {
    pub center: Vec<f64>,
    pub scale: f64,
}

/// Per-ε spectra on the dual grid (FFT order).
#[derive(Clone, Debug, PartialEq)]
pub struct NetSpectrum {
    pub order: GevreyOrder,
    pub ladder: EpsilonLadder,
    pub grid: Grid,
    pub spectra: Vec<Vec<Complex64>>,
    pub window: Option<WindowProvenance>,
}

pub fn fourier_net(net: &SampledNet) -> NetSpectrum {
    NetSpectrum {
        order: net.order(),
        ladder: net.ladder().clone(),
        grid: *net.grid(),
        spectra: net.samples().iter().map(|s| fourier::forward(net.grid(), s)).collect(),
        window: None,
    }
}

impl NetSpectrum {
    /// Spatial slices recovered from the spectra.
    pub fn inverse(&self) -> Vec<Vec<Complex64>> {
        self.spectra.iter().map(|s| fourier::inverse(&self.grid, s)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.spectra.iter().flat_map(|s| s.iter()).map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest relative Parseval mismatch over the slices,
    /// |h^m Σ|f|² − (2L)^{−m} Σ|f̂|²| / h^m Σ|f|².
    pub fn parseval_defect(&self, net: &SampledNet) -> f64 {
        let g = &self.grid;
        let dual = (2.0 * g.half_length()).powi(g.dim() as i32);
        net.samples()
            .iter()
            .zip(&self.spectra)
            .map(|(f, s)| {
                let e_x: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume();
                let e_k: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / dual;
                if e_x == 0.0 {
                    e_k
                } else {
                    (e_x - e_k).abs() / e_x
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Angular partition of the frequency space.
///
/// 1D: bin 0 is ξ > 0, bin 1 is ξ < 0. 2D: B equal sectors, bin b centred on
/// angle 2πb/B, so bin 0 contains +e_x.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionBins {
    dim: usize,
    count: usize,
}

impl DirectionBins {
    pub fn new(dim: usize, count: usize) -> Result<Self> {
        match dim {
            1 if count == 2 => Ok(Self { dim, count }),
            1 => Err(invalid("bins", format!("1D uses the two sign bins, got {count}"))),
            2 if count >= 4 && count.is_multiple_of(2) => Ok(Self { dim, count }),
            2 => Err(invalid("bins", format!("2D needs an even count ≥ 4, got {count}"))),
            _ => Err(invalid("bins", format!("unsupported dimension {dim}"))),
        }
    }

    /// Sign bins in 1D, `count` sectors in 2D.
    pub fn for_grid(grid: &Grid, count: usize) -> Result<Self> {
        Self::new(grid.dim(), if grid.dim() == 1 { 2 } else { count })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn width(&self) -> f64 {
        2.0 * PI / self.count as f64
    }

    /// Bin of a nonzero frequency vector.
    pub fn bin_of(&self, k: &[f64]) -> Option<usize> {
        match self.dim {
            1 => {
                if k[0] > 0.0 {
                    Some(0)
                } else if k[0] < 0.0 {
                    Some(1)
                } else {
                    None
                }
            }
            _ => {
                if k[0] == 0.0 && k[1] == 0.0 {
                    return None;
                }
                Some(self.bin_of_angle(k[1].atan2(k[0])))
            }
        }
    }

    pub fn bin_of_angle(&self, theta: f64) -> usize {
        let w = self.width();
        let t = (theta + w / 2.0).rem_euclid(2.0 * PI);
        ((t / w).floor() as usize) % self.count
    }

    pub fn antipodal(&self, b: usize) -> usize {
        (b + self.count / 2) % self.count
    }

    /// Centre angle of a bin.
    pub fn angle(&self, b: usize) -> f64 {
        match self.dim {
            1 => {
                if b == 0 {
                    0.0
                } else {
                    PI
                }
            }
            _ => b as f64 * self.width(),
        }
    }

    /// Cyclic distance between two bins.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b) % self.count;
        d.min(self.count - d)
    }

    pub fn label(&self, b: usize) -> String {
        match (self.dim, b) {
            (1, 0) => "+".into(),
            (1, _) => "-".into(),
            _ => b.to_string(),
        }
    }
}

/// Thresholds and window parameters of the decay fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub kappa_reg: f64,
    pub rho_max: f64,
    pub min_samples: usize,
    /// Samples below this fraction of the reference maximum are excluded.
    pub noise_floor: f64,
    /// Number of finest ladder entries entering the fit.
    pub fit_slices: usize,
    /// Inner window radius in units of the dual spacing π/L.
    pub r_min_bins: f64,
    /// Shell width in units of π/L; 4 in 1D and 2 in 2D when absent.
    pub shell_width_bins: Option<f64>,
    /// Outer window radius; derived from the plateau radius when absent.
    pub r_max: Option<f64>,
    /// Plateau radius of the mollifier cutoff.
    pub plateau_radius: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kappa_reg: 0.5,
            rho_max: 1.0,
            min_samples: 30,
            noise_floor: 1e-14,
            fit_slices: 3,
            r_min_bins: 8.0,
            shell_width_bins: None,
            r_max: None,
            plateau_radius: DEFAULT_R1,
        }
    }
}

/// Radial fit window [r_min, r_max] cut into shells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialWindow {
    pub r_min: f64,
    pub r_max: f64,
    pub shell_width: f64,
    pub shells: usize,
}

impl FitConfig {
    /// r_max = min(Nyquist/2, r1 / (2^{NF−1} ε_min)) unless set explicitly:
    /// the plateau of the coarsest fitted slice covers the window.
    pub fn window(&self, grid: &Grid, ladder: &EpsilonLadder) -> Result<RadialWindow> {
        let dk = grid.dk();
        let width_bins = self.shell_width_bins.unwrap_or(if grid.dim() == 1 { 4.0 } else { 2.0 });
        let r_max = self.r_max.unwrap_or_else(|| {
            let nf = self.fit_slices.max(1) as i32;
            (grid.nyquist() / 2.0).min(self.plateau_radius / (2f64.powi(nf - 1) * ladder.finest()))
        });
        let r_min = self.r_min_bins * dk;
        let shells = ((r_max / dk - self.r_min_bins) / width_bins + 1e-9).floor();
        if !(shells >= 1.0) {
            return Err(invalid("fit window", format!("[{r_min}, {r_max}] holds no shell of width {}", width_bins * dk)));
        }
        Ok(RadialWindow {
            r_min,
            r_max,
            shell_width: width_bins * dk,
            shells: shells as usize,
        })
    }
}

/// Assignment of spectral indices to (bin, shell) slots.
#[derive(Clone, Debug)]
pub struct ShellLayout {
    pub bins: DirectionBins,
    pub window: RadialWindow,
    /// (spectral index, bin·shells + shell) for every index inside the window.
    members: Vec<(usize, usize)>,
    /// Mean |ξ| of the members of each shell.
    pub centers: Vec<f64>,
}

impl ShellLayout {
    pub fn new(grid: &Grid, bins: DirectionBins, window: RadialWindow) -> Self {
        let dk = grid.dk();
        let w_bins = window.shell_width / dk;
        let r_min_bins = window.r_min / dk;
        let mut members = Vec::new();
        let mut sums = vec![0.0; window.shells];
        let mut counts = vec![0usize; window.shells];
        let d = grid.dim();
        for i in 0..grid.len() {
            let k = grid.wavevector(i);
            let r = k[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            let u = (r / dk - r_min_bins) / w_bins;
            if u < 0.0 {
                continue;
            }
            let shell = (u + 1e-9).floor() as usize;
            if shell >= window.shells {
                continue;
            }
            if let Some(b) = bins.bin_of(&k[..d]) {
                members.push((i, b * window.shells + shell));
                sums[shell] += r;
                counts[shell] += 1;
            }
        }
        let centers = sums.iter().zip(&counts).map(|(s, &c)| s / c.max(1) as f64).collect();
        Self {
            bins,
            window,
            members,
            centers,
        }
    }

    /// Largest |f̂| per (bin, shell), indexed bin·shells + shell.
    pub fn shell_max(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bins.count() * self.window.shells];
        for &(i, slot) in &self.members {
            let v = spectrum[i].norm();
            if v > out[slot] {
                out[slot] = v;
            }
        }
        out
    }

    /// Single-bin layout over all directions.
    pub fn all_directions(grid: &Grid, window: RadialWindow) -> (Self, DirectionBins) {
        let bins = DirectionBins {
            dim: grid.dim(),
            count: if grid.dim() == 1 { 2 } else { 4 },
        };
        let mut l = Self::new(grid, bins, window);
        let shells = l.window.shells;
        for m in l.members.iter_mut() {
            m.1 %= shells;
        }
        (l, bins)
    }
}

/// Fitted decay model of one bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c0: f64,
    /// Coefficient of ε^{−a}, clamped at 0 by refitting without it.
    pub k1: f64,
    /// Decay coefficient of |ξ|^{1/s}.
    pub k2: f64,
    pub residual_rms: f64,
    pub samples: usize,
    /// Samples excluded below the noise floor.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DecayOutcome {
    /// No sample above the floor in the finest fitted slice, or the bin vanishes as ε → 0.
    Vacuous {
        excluded: usize,
    },
    Fitted(DecayFit),
}

impl DecayOutcome {
    pub fn fit(&self) -> Option<&DecayFit> {
        match self {
            DecayOutcome::Fitted(f) => Some(f),
            DecayOutcome::Vacuous { .. } => None,
        }
    }
}

/// Shell maxima of the fitted slices of one spectrum family.
#[derive(Clone, Debug)]
pub struct ShellValues {
    pub eps: Vec<f64>,
    /// One row per fitted slice, indexed bin·shells + shell.
    pub values: Vec<Vec<f64>>,
}

impl ShellValues {
    pub fn from_spectra(layout: &ShellLayout, eps: &[f64], spectra: &[Vec<Complex64>]) -> Self {
        Self {
            eps: eps.to_vec(),
            values: spectra.iter().map(|s| layout.shell_max(s)).collect(),
        }
    }
}

/// Largest ratio between the last two ladder steps of a vanishing bin.
pub const VANISHING_RATIO: f64 = 0.25;

/// The bin maximum decreases over the last three slices and drops by at
/// least 1/[`VANISHING_RATIO`] in the last step.
fn vanishing(sv: &ShellValues, bin: usize, shells: usize) -> bool {
    let n = sv.values.len();
    if n < 3 {
        return false;
    }
    let peak = |row: &[f64]| row[bin * shells..(bin + 1) * shells].iter().copied().fold(0.0, f64::max);
    let (p0, p1, p2) = (peak(&sv.values[n - 3]), peak(&sv.values[n - 2]), peak(&sv.values[n - 1]));
    p1 < p0 && p2 <= VANISHING_RATIO * p1
}

/// Joint least-squares fit of one bin over all (ε, shell) samples above `floor`.
pub fn fit_bin(layout: &ShellLayout, sv: &ShellValues, bin: usize, floor: f64, order: GevreyOrder, cfg: &FitConfig) -> Result<DecayOutcome> {
    let shells = layout.window.shells;
    let mut y = Vec::new();
    let mut x1 = Vec::new();
    let mut t = Vec::new();
    let mut excluded = 0;
    let mut finest_hits = 0;
    let last = sv.values.len().saturating_sub(1);
    for (j, (row, &e)) in sv.values.iter().zip(&sv.eps).enumerate() {
        let xe = e.powf(-order.a());
        for s in 0..shells {
            let v = row[bin * shells + s];
            if v > floor && v > 0.0 {
                y.push(v.ln());
                x1.push(xe);
                t.push(-layout.centers[s].powf(order.inv_s()));
                if j == last {
                    finest_hits += 1;
                }
            } else {
                excluded += 1;
            }
        }
    }
    if y.is_empty() || finest_hits == 0 || vanishing(sv, bin, shells) {
        return Ok(DecayOutcome::Vacuous { excluded });
    }
    if y.len() < cfg.min_samples {
        return Err(Error::Underdetermined {
            samples: y.len(),
            required: cfg.min_samples,
        });
    }
    let ones = vec![1.0; y.len()];
    let (mut c0, mut k1, mut k2, mut res) = match least_squares(&[&ones, &x1, &t], &y) {
        Some((c, r)) => (c[0], c[1], c[2], r),
        None => (0.0, -1.0, 0.0, 0.0),
    };
    if k1 < 0.0 {
        let (c, r) = least_squares(&[&ones, &t], &y).ok_or(Error::Underdetermined {
            samples: y.len(),
            required: cfg.min_samples,
        })?;
        c0 = c[0];
        k1 = 0.0;
        k2 = c[1];
        res = r;
    }
    Ok(DecayOutcome::Fitted(DecayFit {
        c0,
        k1,
        k2,
        residual_rms: res,
        samples: y.len(),
        excluded,
    }))
}

/// Fit of one bin of a full net spectrum with the self-relative noise floor.
pub fn fit_decay(spec: &NetSpectrum, bins: &DirectionBins, bin: usize, order: GevreyOrder, cfg: &FitConfig) -> Result<DecayOutcome> {
    if bin >= bins.count() {
        return Err(invalid("bin", format!("{bin} out of range for {} bins", bins.count())));
    }
    let layout = ShellLayout::new(&spec.grid, *bins, cfg.window(&spec.grid, &spec.ladder)?);
    let sv = fitted_shell_values(&layout, spec, cfg);
    fit_bin(&layout, &sv, bin, cfg.noise_floor * spec.max_abs(), order, cfg)
}

fn fitted_shell_values(layout: &ShellLayout, spec: &NetSpectrum, cfg: &FitConfig) -> ShellValues {
    let k = spec.ladder.len().saturating_sub(cfg.fit_slices);
    ShellValues::from_spectra(layout, &spec.ladder.values()[k..], &spec.spectra[k..])
}

/// Verdict of one bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub bin: usize,
    pub outcome: Option<DecayOutcome>,
    /// Samples available when the fit was underdetermined.
    pub undetermined_samples: Option<usize>,
    /// Underdetermined, with the outermost shell of the finest slice below the floor.
    pub decayed: bool,
    pub regular: bool,
}

impl BinReport {
    /// `decayed` tells whether the finest slice has fallen below the floor at the window edge.
    pub fn from_result(bin: usize, r: Result<DecayOutcome>, decayed: bool, cfg: &FitConfig) -> Result<Self> {
        match r {
            Ok(o) => {
                let regular = match &o {
                    DecayOutcome::Vacuous { .. } => true,
                    DecayOutcome::Fitted(f) => f.k2 >= cfg.kappa_reg && f.residual_rms <= cfg.rho_max,
                };
                Ok(Self {
                    bin,
                    outcome: Some(o),
                    undetermined_samples: None,
                    decayed: false,
                    regular,
                })
            }
            // not certified regular unless the spectrum left the floor inside the window
            Err(Error::Underdetermined { samples, .. }) => Ok(Self {
                bin,
                outcome: None,
                undetermined_samples: Some(samples),
                decayed,
                regular: decayed,
            }),
            Err(e) => Err(e),
        }
    }

    pub fn fit(&self) -> Option<&DecayFit> {
        self.outcome.as_ref().and_then(|o| o.fit())
    }

    pub fn verdict(&self) -> &'static str {
        match (&self.outcome, self.regular) {
            (Some(DecayOutcome::Vacuous { .. }), _) => "vacuous",
            (None, true) => "decayed",
            (None, false) => "undetermined",
            (_, true) => "regular",
            (_, false) => "singular",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    pub bins: Vec<BinReport>,
}

/// Fits every bin of a spectrum family above an absolute floor.
pub fn bin_reports(layout: &ShellLayout, sv: &ShellValues, floor: f64, order: GevreyOrder, cfg: &FitConfig) -> Result<Vec<BinReport>> {
    let shells = layout.window.shells;
    (0..layout.bins.count())
        .map(|b| {
            let decayed = sv.values.last().is_some_and(|row| row[(b + 1) * shells - 1] <= floor);
            BinReport::from_result(b, fit_bin(layout, sv, b, floor, order, cfg), decayed, cfg)
        })
        .collect()
}

/// True iff every bin decays with k2 ≥ κ_reg and residual ≤ ρ_max, or is vacuous.
pub fn regularity_test(net: &SampledNet, bins: &DirectionBins, cfg: &FitConfig) -> Result<RegularityReport> {
    let spec = fourier_net(net);
    let layout = ShellLayout::new(net.grid(), *bins, cfg.window(net.grid(), net.ladder())?);
    let sv = fitted_shell_values(&layout, &spec, cfg);
    let reports = bin_reports(&layout, &sv, cfg.noise_floor * spec.max_abs(), net.order(), cfg)?;
    Ok(RegularityReport {
        regular: reports.iter().all(|r| r.regular),
        bins: reports,
    })
}

/// Result of the compact-support Fourier bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub c0: f64,
    pub k1: f64,
    /// Coefficient of +|ξ|^{1/s}; the bound holds for every k2 > 0 when it is ≤ 0.1.
    pub growth: f64,
    pub residual_rms: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Fits shell maxima over all directions against {1, ε^{−a}, |ξ|^{1/s}}.
pub fn compact_support_bound_check(net: &SampledNet, cfg: &FitConfig) -> Result<BoundReport> {
    if net.support_box().is_none() && net.source_support().is_none() {
        return Err(Error::Precondition("compact_support_bound_check needs a support box".into()));
    }
    let spec = fourier_net(net);
    let window = cfg.window(net.grid(), net.ladder())?;
    let (layout, _) = ShellLayout::all_directions(net.grid(), window);
    let sv = fitted_shell_values(&layout, &spec, cfg);
    let floor = cfg.noise_floor * spec.max_abs();
    let order = net.order();
    let mut y = Vec::new();
    let mut x1 = Vec::new();
    let mut t = Vec::new();
    for (row, &e) in sv.values.iter().zip(&sv.eps) {
        for (s, c) in layout.centers.iter().enumerate() {
            let v = row[s];
            if v > floor && v > 0.0 {
                y.push(v.ln());
                x1.push(e.powf(-order.a()));
                t.push(c.powf(order.inv_s()));
            }
        }
    }
    if y.len() < 3 {
        return Ok(BoundReport {
            c0: 0.0,
            k1: 0.0,
            growth: 0.0,
            residual_rms: 0.0,
            samples: y.len(),
            passed: true,
        });
    }
    let ones = vec![1.0; y.len()];
    let (mut c, mut r) = least_squares(&[&ones, &x1, &t], &y).ok_or(Error::Underdetermined { samples: y.len(), required: 3 })?;
    if c[1] < 0.0 {
        let (c2, r2) = least_squares(&[&ones, &t], &y).ok_or(Error::Underdetermined { samples: y.len(), required: 2 })?;
        c = vec![c2[0], 0.0, c2[1]];
        r = r2;
    }
    Ok(BoundReport {
        c0: c[0],
        k1: c[1],
        growth: c[2],
        residual_rms: r,
        samples: y.len(),
        passed: c[2] <= 0.1 && r <= cfg.rho_max,
    })
}
