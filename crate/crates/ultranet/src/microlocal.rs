//! Singular cones, singular support and wave front estimates.
//!
//! The local cone at x0 is the intersection of the singular cones of ψ_j·f
//! over Gevrey localizers ψ_j of radius r_j = r_0·3^{−j} centred at x0.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier;
use crate::mollifier::radial_cutoff;
use crate::net::{net_mul, spectral_derivative, Grid, SampledNet};
use crate::spectral::{bin_reports, regularity_test, BinReport, DirectionBins, FitConfig, ShellLayout, ShellValues};

/// Set of direction bins.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSet {
    pub bins: DirectionBins,
    pub members: BTreeSet<usize>,
}

impl ConeSet {
    pub fn empty(bins: DirectionBins) -> Self {
        Self {
            bins,
            members: BTreeSet::new(),
        }
    }

    pub fn full(bins: DirectionBins) -> Self {
        Self::from_bins(bins, 0..bins.count())
    }

    pub fn from_bins(bins: DirectionBins, members: impl IntoIterator<Item = usize>) -> Self {
        let members = members.into_iter().map(|b| b % bins.count()).collect();
        Self { bins, members }
    }

    pub fn contains(&self, b: usize) -> bool {
        self.members.contains(&b)
    }

    pub fn insert(&mut self, b: usize) {
        self.members.insert(b % self.bins.count());
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn union(&self, other: &ConeSet) -> ConeSet {
        Self {
            bins: self.bins,
            members: self.members.union(&other.members).copied().collect(),
        }
    }

    pub fn intersection(&self, other: &ConeSet) -> ConeSet {
        Self {
            bins: self.bins,
            members: self.members.intersection(&other.members).copied().collect(),
        }
    }

    pub fn is_subset(&self, other: &ConeSet) -> bool {
        self.members.is_subset(&other.members)
    }

    /// Cyclic one-bin neighbourhood; in 1D the two sign bins are not neighbours.
    pub fn dilate(&self) -> ConeSet {
        if self.bins.dim() == 1 {
            return self.clone();
        }
        let n = self.bins.count();
        Self::from_bins(self.bins, self.iter().flat_map(|b| [b, (b + 1) % n, (b + n - 1) % n]))
    }

    pub fn labels(&self) -> Vec<String> {
        self.iter().map(|b| self.bins.label(b)).collect()
    }
}

/// Bins that fail the regularity criterion, vacuous bins excluded.
pub fn sigma_cone(net: &SampledNet, bins: &DirectionBins, cfg: &FitConfig) -> Result<ConeSet> {
    let r = regularity_test(net, bins, cfg)?;
    Ok(ConeSet::from_bins(*bins, r.bins.iter().filter(|b| !b.regular).map(|b| b.bin)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrolocalConfig {
    pub fit: FitConfig,
    /// Bin count in 2D; 1D always uses the two sign bins.
    pub bins: usize,
    /// Localized samples below this fraction of the unlocalized spectral maximum are excluded.
    pub significance: f64,
    pub base_radius: f64,
    pub radius_ratio: f64,
    pub j_max: usize,
    /// Smallest localizer support diameter, in grid spacings.
    pub min_support_spacings: f64,
    /// Cell width in grid points.
    pub cell_points: usize,
}

impl Default for MicrolocalConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            bins: 16,
            significance: 1e-5,
            base_radius: 0.5,
            radius_ratio: 3.0,
            j_max: 7,
            min_support_spacings: 16.0,
            cell_points: 8,
        }
    }
}

impl MicrolocalConfig {
    pub fn direction_bins(&self, grid: &Grid) -> Result<DirectionBins> {
        DirectionBins::for_grid(grid, self.bins)
    }

    /// Plateau radii r_j for j = 0..=j_max with support diameter 4r_j above the resolution floor.
    pub fn radii(&self, grid: &Grid) -> Vec<(usize, f64)> {
        (0..=self.j_max)
            .map(|j| (j, self.base_radius * self.radius_ratio.powi(-(j as i32))))
            .take_while(|&(_, r)| 4.0 * r >= self.min_support_spacings * grid.spacing() * (1.0 - 1e-12))
            .collect()
    }

    pub fn cell_width(&self, grid: &Grid) -> f64 {
        self.cell_points as f64 * grid.spacing()
    }
}

/// Spatial cell index, one entry per axis.
pub type Cell = Vec<i64>;

/// Cell whose centre c·w is nearest to x.
pub fn cell_of(grid: &Grid, cfg: &MicrolocalConfig, x: &[f64]) -> Cell {
    let w = cfg.cell_width(grid);
    x[..grid.dim()].iter().map(|v| (v / w).round() as i64).collect()
}

pub fn cell_center(grid: &Grid, cfg: &MicrolocalConfig, c: &[i64]) -> Vec<f64> {
    let w = cfg.cell_width(grid);
    c.iter().map(|&i| i as f64 * w).collect()
}

/// All cells of the grid, lexicographically sorted.
pub fn all_cells(grid: &Grid, cfg: &MicrolocalConfig) -> Vec<Cell> {
    let half = (grid.points() / cfg.cell_points / 2) as i64;
    let axis: Vec<i64> = (-half..half).collect();
    match grid.dim() {
        1 => axis.iter().map(|&c| vec![c]).collect(),
        _ => axis.iter().flat_map(|&a| axis.iter().map(move |&b| vec![a, b])).collect(),
    }
}

/// Nonzero samples of ψ(x) = cutoff(|x − x0|; r, 2r) with minimum-image distance.
pub fn localizer_stencil(grid: &Grid, x0: &[f64], r: f64, profile: f64) -> Vec<(usize, f64)> {
    let n = grid.points() as i64;
    let h = grid.spacing();
    let reach = (2.0 * r / h).ceil() as i64 + 1;
    let axis = |c: f64| -> Vec<(usize, f64)> {
        let centre = (c / h).round() as i64 + n / 2;
        let span = reach.min(n / 2);
        (centre - span..centre + span.max(1))
            .map(|i| i.rem_euclid(n) as usize)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|i| (i, grid.periodic_offset(grid.coord(i), c)))
            .collect()
    };
    let mut out = Vec::new();
    match grid.dim() {
        1 => {
            for (i, d) in axis(x0[0]) {
                let w = radial_cutoff(d.abs(), r, 2.0 * r, profile);
                if w > 0.0 {
                    out.push((i, w));
                }
            }
        }
        _ => {
            let ax = axis(x0[0]);
            let ay = axis(x0[1]);
            for &(i, dx) in &ax {
                for &(j, dy) in &ay {
                    let w = radial_cutoff((dx * dx + dy * dy).sqrt(), r, 2.0 * r, profile);
                    if w > 0.0 {
                        out.push((i * grid.points() + j, w));
                    }
                }
            }
        }
    }
    out
}

/// Localizer as a net constant in ε.
pub fn localizer_net(net: &SampledNet, x0: &[f64], r: f64) -> Result<SampledNet> {
    let grid = net.grid();
    let mut psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (i, w) in localizer_stencil(grid, x0, r, net.order().s()) {
        psi[i] = Complex64::new(w, 0.0);
    }
    SampledNet::new(net.order(), net.ladder().clone(), *grid, vec![psi; net.ladder().len()], None)
}

/// Localizer scales whose cutoff passes the regularity test on its own.
pub fn admissible_radii(net: &SampledNet, cfg: &MicrolocalConfig) -> Result<Vec<(usize, f64)>> {
    let bins = cfg.direction_bins(net.grid())?;
    let origin = vec![0.0; net.grid().dim()];
    let mut out = Vec::new();
    for (j, r) in cfg.radii(net.grid()) {
        if regularity_test(&localizer_net(net, &origin, r)?, &bins, &cfg.fit)?.regular {
            out.push((j, r));
        }
    }
    Ok(out)
}

/// Singular cone of ψ_j·f at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub j: usize,
    pub radius: f64,
    pub cone: ConeSet,
    /// Per-bin fits; empty when the L1 bound already puts every bin below the floor.
    pub bins: Vec<BinReport>,
    pub below_floor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedSigma {
    pub x0: Vec<f64>,
    pub sigma: ConeSet,
    /// Evaluated scales in increasing j.
    pub scales: Vec<ScaleReport>,
    /// Σ(ψ_{j+1}f) ⊆ Σ(ψ_j f) up to one bin over the evaluated scales.
    pub nested: bool,
}

/// Shared state of localized fits over one net.
pub struct LocalScan<'a> {
    net: &'a SampledNet,
    cfg: &'a MicrolocalConfig,
    bins: DirectionBins,
    layout: ShellLayout,
    first_fitted: usize,
    floor: f64,
    radii: Vec<(usize, f64)>,
    /// Stencils centred at the origin, one per admissible radius.
    stencils: Vec<Vec<(usize, f64)>>,
    /// Largest index offset of each cached stencil along an axis.
    reach: Vec<usize>,
    /// Largest wave number index inside the fit window.
    m_max: usize,
}

/// Periodic index box: start and length per axis.
type IndexBox = (Vec<usize>, Vec<usize>);

impl<'a> LocalScan<'a> {
    pub fn new(net: &'a SampledNet, cfg: &'a MicrolocalConfig) -> Result<Self> {
        let grid = net.grid();
        let bins = cfg.direction_bins(grid)?;
        let layout = ShellLayout::new(grid, bins, cfg.fit.window(grid, net.ladder())?);
        let first_fitted = net.ladder().len().saturating_sub(cfg.fit.fit_slices);
        let global = net.samples()[first_fitted..]
            .iter()
            .map(|s| fourier::forward(grid, s).iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let radii = admissible_radii(net, cfg)?;
        let origin = vec![0.0; grid.dim()];
        let stencils: Vec<Vec<(usize, f64)>> = radii.iter().map(|&(_, r)| localizer_stencil(grid, &origin, r, net.order().s())).collect();
        let p = grid.points();
        let reach = stencils
            .iter()
            .map(|st| {
                st.iter()
                    .flat_map(|&(i, _)| if grid.dim() == 1 { vec![i] } else { vec![i / p, i % p] })
                    .map(|i| i.abs_diff(p / 2))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let m_max = (layout.window.r_max / grid.dk()).ceil() as usize + 1;
        Ok(Self {
            net,
            cfg,
            bins,
            layout,
            first_fitted,
            floor: cfg.significance * global,
            radii,
            stencils,
            reach,
            m_max,
        })
    }

    pub fn bins(&self) -> DirectionBins {
        self.bins
    }

    pub fn radii(&self) -> &[(usize, f64)] {
        &self.radii
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Stencil at x0, translated from the cached one when x0 is a grid point,
    /// with its periodic index box (start, length) per axis in that case.
    fn stencil(&self, x0: &[f64], k: usize) -> (Vec<(usize, f64)>, Option<IndexBox>) {
        let grid = self.net.grid();
        let h = grid.spacing();
        let shift: Vec<i64> = x0.iter().map(|v| (v / h).round() as i64).collect();
        if x0.iter().zip(&shift).any(|(v, &s)| (v / h - s as f64).abs() > 1e-9) {
            return (localizer_stencil(grid, x0, self.radii[k].1, self.net.order().s()), None);
        }
        let n = grid.points() as i64;
        let mv = |i: usize, d: i64| (i as i64 + d).rem_euclid(n) as usize;
        let reach = self.reach[k] as i64;
        let span = ((2 * reach + 1).min(n)) as usize;
        let starts = shift.iter().map(|&d| (n / 2 + d - reach).rem_euclid(n) as usize).collect();
        let boxed = Some((starts, vec![span; grid.dim()]));
        let st = self.stencils[k]
            .iter()
            .map(|&(i, w)| match grid.dim() {
                1 => (mv(i, shift[0]), w),
                _ => {
                    let p = grid.points();
                    (mv(i / p, shift[0]) * p + mv(i % p, shift[1]), w)
                }
            })
            .collect();
        (st, boxed)
    }

    fn scale(&self, x0: &[f64], k: usize) -> Result<ScaleReport> {
        let grid = self.net.grid();
        let (j, r) = self.radii[k];
        let (stencil, boxed) = self.stencil(x0, k);
        let finest = self.net.samples().last().expect("ladder is nonempty");
        let l1: f64 = stencil.iter().map(|&(i, w)| w * finest[i].norm()).sum::<f64>() * grid.cell_volume();
        if l1 <= self.floor {
            return Ok(ScaleReport {
                j,
                radius: r,
                cone: ConeSet::empty(self.bins),
                bins: Vec::new(),
                below_floor: true,
            });
        }
        let spectra: Vec<Vec<Complex64>> = self.net.samples()[self.first_fitted..]
            .iter()
            .map(|s| {
                let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
                for &(i, w) in &stencil {
                    buf[i] = s[i] * w;
                }
                match &boxed {
                    Some((start, len)) if len[0] <= grid.points() / 4 => fourier::forward_window(grid, &buf, start, len, self.m_max),
                    _ => fourier::forward(grid, &buf),
                }
            })
            .collect();
        let sv = ShellValues::from_spectra(&self.layout, &self.net.ladder().values()[self.first_fitted..], &spectra);
        let reports = bin_reports(&self.layout, &sv, self.floor, self.net.order(), &self.cfg.fit)?;
        Ok(ScaleReport {
            j,
            radius: r,
            cone: ConeSet::from_bins(self.bins, reports.iter().filter(|b| !b.regular).map(|b| b.bin)),
            bins: reports,
            below_floor: false,
        })
    }

    /// Local cone at x0 over scales j ≤ j_max, smallest scale first, stopping at ∅.
    pub fn at(&self, x0: &[f64], j_max: usize) -> Result<LocalizedSigma> {
        let mut sigma = ConeSet::full(self.bins);
        let mut scales = Vec::new();
        for k in (0..self.radii.len()).rev().filter(|&k| self.radii[k].0 <= j_max) {
            let rep = self.scale(x0, k)?;
            sigma = sigma.intersection(&rep.cone);
            scales.push(rep);
            if sigma.is_empty() {
                break;
            }
        }
        if scales.is_empty() {
            return Err(Error::Precondition("no admissible localizer scale on this grid".into()));
        }
        scales.reverse();
        let nested = scales.windows(2).all(|w| w[1].cone.is_subset(&w[0].cone.dilate()));
        Ok(LocalizedSigma {
            x0: x0.to_vec(),
            sigma,
            scales,
            nested,
        })
    }
}

fn check_interior(grid: &Grid, x0: &[f64]) -> Result<()> {
    if x0.len() != grid.dim() {
        return Err(Error::Domain(format!("point has dimension {}, grid {}", x0.len(), grid.dim())));
    }
    if x0.iter().any(|v| !v.is_finite() || v.abs() > grid.half_length()) {
        return Err(Error::Precondition(format!("x0 = {x0:?} lies outside [−{0}, {0}]", grid.half_length())));
    }
    Ok(())
}

/// Intersection over localizer scales j = 0..=j_max of the singular cones of ψ_j·f.
pub fn sigma_localized(net: &SampledNet, x0: &[f64], j_max: usize, cfg: &MicrolocalConfig) -> Result<LocalizedSigma> {
    check_interior(net.grid(), x0)?;
    LocalScan::new(net, cfg)?.at(x0, j_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: Cell,
    pub local: LocalizedSigma,
}

/// Estimated wave front over the cell decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavefrontEstimate {
    pub bins: DirectionBins,
    pub cell_width: f64,
    /// Localizer radii used.
    pub radii: Vec<f64>,
    pub floor: f64,
    pub pairs: BTreeSet<(Cell, usize)>,
    /// Reports of the cells with a nonempty local cone.
    pub cells: Vec<CellReport>,
    /// Cells whose scales violated nestedness.
    pub not_nested: Vec<Cell>,
}

/// One CSV row per wave front pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavefrontRow {
    pub cell_x: i64,
    pub cell_y: Option<i64>,
    pub bin_index: usize,
    pub bin_angle: f64,
    pub verdict: String,
    pub k2: Option<f64>,
    pub residual: Option<f64>,
}

impl WavefrontEstimate {
    pub fn sing_supp(&self) -> BTreeSet<Cell> {
        self.pairs.iter().map(|(c, _)| c.clone()).collect()
    }

    pub fn cone_at(&self, cell: &[i64]) -> ConeSet {
        ConeSet::from_bins(self.bins, self.pairs.iter().filter(|(c, _)| c.as_slice() == cell).map(|(_, b)| *b))
    }

    /// Rows with the fit of the finest scale for each pair.
    pub fn rows(&self) -> Vec<WavefrontRow> {
        let mut rows = Vec::new();
        for c in &self.cells {
            let finest = c.local.scales.last();
            for b in c.local.sigma.iter() {
                let rep = finest.and_then(|s| s.bins.iter().find(|r| r.bin == b));
                rows.push(WavefrontRow {
                    cell_x: c.cell[0],
                    cell_y: c.cell.get(1).copied(),
                    bin_index: b,
                    bin_angle: self.bins.angle(b),
                    verdict: rep.map_or("singular", |r| r.verdict()).to_string(),
                    k2: rep.and_then(|r| r.fit()).map(|f| f.k2),
                    residual: rep.and_then(|r| r.fit()).map(|f| f.residual_rms),
                });
            }
        }
        rows
    }
}

/// Pairs (cell, bin) with bin in the local cone at the cell centre.
pub fn wavefront(net: &SampledNet, cfg: &MicrolocalConfig) -> Result<WavefrontEstimate> {
    let scan = LocalScan::new(net, cfg)?;
    let grid = net.grid();
    let reports: Vec<Result<Option<CellReport>>> = all_cells(grid, cfg)
        .into_par_iter()
        .map(|cell| {
            let local = scan.at(&cell_center(grid, cfg, &cell), cfg.j_max)?;
            Ok((!local.sigma.is_empty() || !local.nested).then_some(CellReport { cell, local }))
        })
        .collect();
    let mut pairs = BTreeSet::new();
    let mut cells = Vec::new();
    let mut not_nested = Vec::new();
    for r in reports {
        let Some(c) = r? else { continue };
        if !c.local.nested {
            not_nested.push(c.cell.clone());
        }
        if c.local.sigma.is_empty() {
            continue;
        }
        for b in c.local.sigma.iter() {
            pairs.insert((c.cell.clone(), b));
        }
        cells.push(c);
    }
    Ok(WavefrontEstimate {
        bins: scan.bins(),
        cell_width: cfg.cell_width(grid),
        radii: scan.radii().iter().map(|&(_, r)| r).collect(),
        floor: scan.floor(),
        pairs,
        cells,
        not_nested,
    })
}

/// Cells with a nonempty local cone.
pub fn sing_supp(net: &SampledNet, cfg: &MicrolocalConfig) -> Result<BTreeSet<Cell>> {
    Ok(wavefront(net, cfg)?.sing_supp())
}

/// One-cell (Chebyshev) and one-bin neighbourhood of a pair set.
pub fn dilate_pairs(pairs: &BTreeSet<(Cell, usize)>, bins: &DirectionBins) -> BTreeSet<(Cell, usize)> {
    let mut out = BTreeSet::new();
    for (c, b) in pairs {
        let cone = ConeSet::from_bins(*bins, [*b]).dilate();
        let shifts: Vec<Vec<i64>> = match c.len() {
            1 => (-1..=1).map(|d| vec![d]).collect(),
            _ => (-1..=1).flat_map(|a| (-1..=1).map(move |d| vec![a, d])).collect(),
        };
        for s in shifts {
            let cell: Cell = c.iter().zip(&s).map(|(a, d)| a + d).collect();
            for b2 in cone.iter() {
                out.insert((cell.clone(), b2));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub holds: bool,
    /// Pairs outside the dilated allowed set, with the local reports of their cells.
    pub violations: Vec<(Cell, usize)>,
    pub violating_cells: Vec<CellReport>,
}

/// Checks `estimate` ⊆ dilate(`allowed`).
pub fn inclusion(estimate: &WavefrontEstimate, allowed: &BTreeSet<(Cell, usize)>) -> InclusionReport {
    let dilated = dilate_pairs(allowed, &estimate.bins);
    let violations: Vec<(Cell, usize)> = estimate.pairs.iter().filter(|p| !dilated.contains(*p)).cloned().collect();
    let bad: BTreeSet<&Cell> = violations.iter().map(|(c, _)| c).collect();
    InclusionReport {
        holds: violations.is_empty(),
        violating_cells: estimate.cells.iter().filter(|c| bad.contains(&c.cell)).cloned().collect(),
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfPropertyReport {
    pub alpha: Vec<usize>,
    pub factor_regular: bool,
    pub wavefront: WavefrontEstimate,
    pub derivative: InclusionReport,
    pub factor: InclusionReport,
    /// Projection of the pairs equals the singular support of the same run, for all three estimates.
    pub projection_ok: bool,
    pub nested: bool,
}

impl WfPropertyReport {
    pub fn passed(&self) -> bool {
        self.factor_regular && self.derivative.holds && self.factor.holds && self.projection_ok
    }
}

/// WF(∂^α f) ⊆ WF(f) and WF(g·f) ⊆ WF(f) up to one cell and one bin, g regular.
pub fn check_wf_properties(net: &SampledNet, alpha: &[usize], regular_factor: &SampledNet, cfg: &MicrolocalConfig) -> Result<WfPropertyReport> {
    if alpha.len() != net.grid().dim() {
        return Err(invalid("alpha", format!("length {} for a {}D net", alpha.len(), net.grid().dim())));
    }
    let bins = cfg.direction_bins(net.grid())?;
    let factor_regular = regularity_test(regular_factor, &bins, &cfg.fit)?.regular;
    let wf = wavefront(net, cfg)?;
    let wf_d = wavefront(&spectral_derivative(net, alpha)?, cfg)?;
    let wf_g = wavefront(&net_mul(regular_factor, net)?, cfg)?;
    let projection_ok = [&wf, &wf_d, &wf_g].iter().all(|w| {
        let cells: BTreeSet<Cell> = w.cells.iter().map(|c| c.cell.clone()).collect();
        cells == w.sing_supp()
    });
    let nested = [&wf, &wf_d, &wf_g].iter().all(|w| w.not_nested.is_empty());
    Ok(WfPropertyReport {
        alpha: alpha.to_vec(),
        factor_regular,
        derivative: inclusion(&wf_d, &wf.pairs),
        factor: inclusion(&wf_g, &wf.pairs),
        wavefront: wf,
        projection_ok,
        nested,
    })
}
