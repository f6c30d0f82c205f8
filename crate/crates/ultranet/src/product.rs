//! Cone arithmetic and the product wave front inclusion
//! WF(fg) ⊆ (WF f + WF g) ∪ WF f ∪ WF g under (x, 0) ∉ WF f + WF g.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microlocal::{inclusion, wavefront, Cell, ConeSet, InclusionReport, MicrolocalConfig, WavefrontEstimate};
use crate::net::{net_mul, SampledNet};
use crate::spectral::DirectionBins;

/// Sampling parameters of direction-set sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSumConfig {
    pub directions_per_bin: usize,
    /// Magnitude ratios used for the cancellation test.
    pub ratios: Vec<f64>,
    pub cancellation: f64,
}

impl Default for ConeSumConfig {
    fn default() -> Self {
        Self {
            directions_per_bin: 8,
            ratios: (-4..=4).map(|k| 2f64.powi(k)).collect(),
            cancellation: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConePair {
    /// 0 ∉ A + B.
    pub sum_defined: bool,
    pub sum: ConeSet,
    /// sum ∪ A ∪ B.
    pub closure_union: ConeSet,
}

impl ConeSumConfig {
    /// Sample angles of a bin at offsets (i + ½)/n across its width.
    pub fn directions(&self, bins: &DirectionBins, b: usize) -> Vec<f64> {
        let n = self.directions_per_bin.max(1);
        let w = bins.width();
        (0..n).map(|i| bins.angle(b) + ((i as f64 + 0.5) / n as f64 - 0.5) * w).collect()
    }
}

fn wrap_angle(t: f64) -> f64 {
    let t = t.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Bins met by the directions of u + ρv, ρ > 0: the open shorter arc from θu to θv.
fn arc_bins(bins: &DirectionBins, tu: f64, tv: f64, out: &mut BTreeSet<usize>) {
    let n = bins.count();
    let start = bins.bin_of_angle(tu);
    let end = bins.bin_of_angle(tv);
    let step = if wrap_angle(tv - tu) >= 0.0 { 1 } else { n - 1 };
    let mut b = start;
    out.insert(b);
    while b != end {
        b = (b + step) % n;
        out.insert(b);
    }
}

/// Bin-level Minkowski sum of two cones.
pub fn cone_sum(a: &ConeSet, b: &ConeSet) -> ConePair {
    cone_sum_with(a, b, &ConeSumConfig::default())
}

pub fn cone_sum_with(a: &ConeSet, b: &ConeSet, cfg: &ConeSumConfig) -> ConePair {
    let bins = a.bins;
    let mut defined = true;
    let mut sum = BTreeSet::new();
    if bins.dim() == 1 {
        for x in a.iter() {
            for y in b.iter() {
                if x == y {
                    sum.insert(x);
                } else {
                    defined = false;
                    sum.extend([0, 1]);
                }
            }
        }
    } else {
        for x in a.iter() {
            let du = cfg.directions(&bins, x);
            for y in b.iter() {
                let dv = cfg.directions(&bins, y);
                for &tu in &du {
                    for &tv in &dv {
                        let (u, v) = ((tu.cos(), tu.sin()), (tv.cos(), tv.sin()));
                        let cancels = cfg.ratios.iter().any(|&r| {
                            let (sx, sy) = (u.0 + r * v.0, u.1 + r * v.1);
                            sx.hypot(sy) < cfg.cancellation * r.max(1.0)
                        });
                        if cancels {
                            defined = false;
                            sum.extend(0..bins.count());
                        } else {
                            arc_bins(&bins, tu, tv, &mut sum);
                        }
                    }
                }
            }
        }
    }
    let sum = ConeSet::from_bins(bins, sum);
    let closure_union = sum.union(a).union(b);
    ConePair {
        sum_defined: defined,
        sum,
        closure_union,
    }
}

/// Greedy maximal dilations Γ1 ⊇ A, Γ2 ⊇ B with closure(Γ1 + Γ2) ⊆ Γ.
///
/// Γ1 grows first, then Γ2, one neighbouring bin at a time, lowest index first.
pub fn cone_separation(a: &ConeSet, b: &ConeSet, gamma: &ConeSet) -> Result<(ConeSet, ConeSet)> {
    let fits = |x: &ConeSet, y: &ConeSet| -> std::result::Result<(), usize> {
        let p = cone_sum(x, y);
        if let Some(bad) = p.closure_union.iter().find(|b| !gamma.contains(*b)) {
            return Err(bad);
        }
        if !p.sum_defined {
            return Err(p.sum.iter().next().unwrap_or(0));
        }
        Ok(())
    };
    fits(a, b).map_err(|bin| Error::SeparationFailed { bin })?;
    let mut g1 = a.clone();
    let mut g2 = b.clone();
    for first in [true, false] {
        loop {
            let cur = if first { &g1 } else { &g2 };
            let candidates: BTreeSet<usize> = cur.dilate().iter().filter(|c| !cur.contains(*c)).collect();
            let mut grown = false;
            for c in candidates {
                let mut next = cur.clone();
                next.insert(c);
                let ok = if first { fits(&next, &g2) } else { fits(&g1, &next) };
                if ok.is_ok() {
                    if first {
                        g1 = next;
                    } else {
                        g2 = next;
                    }
                    grown = true;
                    break;
                }
            }
            if !grown {
                break;
            }
        }
    }
    Ok((g1, g2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSum {
    pub cell: Cell,
    pub f: ConeSet,
    pub g: ConeSet,
    pub pair: ConePair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfSum {
    pub pairs: BTreeSet<(Cell, usize)>,
    pub cells: Vec<CellSum>,
    pub hypothesis_ok: bool,
    /// Shared cells where the local sum contains 0.
    pub violating_cells: Vec<Cell>,
}

fn cones_by_cell(wf: &WavefrontEstimate) -> BTreeMap<Cell, ConeSet> {
    let mut m: BTreeMap<Cell, ConeSet> = BTreeMap::new();
    for (c, b) in &wf.pairs {
        m.entry(c.clone()).or_insert_with(|| ConeSet::empty(wf.bins)).insert(*b);
    }
    m
}

/// {(x, ξ + η)} over shared cells, with the no-cancellation hypothesis.
pub fn wf_sum(wf_f: &WavefrontEstimate, wf_g: &WavefrontEstimate) -> Result<WfSum> {
    if wf_f.bins != wf_g.bins || wf_f.cell_width != wf_g.cell_width {
        return Err(Error::Incompatible("wave fronts use different cells or bins".into()));
    }
    let cf = cones_by_cell(wf_f);
    let cg = cones_by_cell(wf_g);
    let mut pairs = BTreeSet::new();
    let mut cells = Vec::new();
    let mut violating = Vec::new();
    for (cell, f) in &cf {
        let Some(g) = cg.get(cell) else { continue };
        let pair = cone_sum(f, g);
        if !pair.sum_defined {
            violating.push(cell.clone());
        }
        for b in pair.sum.iter() {
            pairs.insert((cell.clone(), b));
        }
        cells.push(CellSum {
            cell: cell.clone(),
            f: f.clone(),
            g: g.clone(),
            pair,
        });
    }
    Ok(WfSum {
        pairs,
        cells,
        hypothesis_ok: violating.is_empty(),
        violating_cells: violating,
    })
}

/// Cones of one cell across the three estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HormanderCell {
    pub cell: Cell,
    pub f: Vec<usize>,
    pub g: Vec<usize>,
    pub fg: Vec<usize>,
    pub allowed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HormanderReport {
    pub hypothesis_ok: bool,
    pub violating_cells: Vec<Cell>,
    /// Present only when the hypothesis holds.
    pub inclusion: Option<InclusionReport>,
    pub cells: Vec<HormanderCell>,
    pub wf_f: WavefrontEstimate,
    pub wf_g: WavefrontEstimate,
    pub wf_fg: WavefrontEstimate,
}

impl HormanderReport {
    /// Inclusion holds, or the theorem does not apply.
    pub fn consistent(&self) -> bool {
        self.inclusion.as_ref().is_none_or(|i| i.holds)
    }

    pub fn verdict(&self) -> &'static str {
        match &self.inclusion {
            None => "hypothesis violated: theorem not applicable",
            Some(i) if i.holds => "inclusion holds",
            Some(_) => "inclusion violated",
        }
    }
}

/// Estimates WF f, WF g, WF(fg) and checks WF(fg) ⊆ dilate((WF f + WF g) ∪ WF f ∪ WF g).
pub fn hormander_check(f: &SampledNet, g: &SampledNet, cfg: &MicrolocalConfig) -> Result<HormanderReport> {
    let fg = net_mul(f, g)?;
    let wf_f = wavefront(f, cfg)?;
    let wf_g = wavefront(g, cfg)?;
    let wf_fg = wavefront(&fg, cfg)?;
    let sum = wf_sum(&wf_f, &wf_g)?;
    let mut allowed: BTreeSet<(Cell, usize)> = sum.pairs.clone();
    allowed.extend(wf_f.pairs.iter().cloned());
    allowed.extend(wf_g.pairs.iter().cloned());
    let inclusion = sum.hypothesis_ok.then(|| inclusion(&wf_fg, &allowed));

    let (cf, cg, cfg_) = (cones_by_cell(&wf_f), cones_by_cell(&wf_g), cones_by_cell(&wf_fg));
    let mut all_cells: BTreeSet<Cell> = cf.keys().cloned().collect();
    all_cells.extend(cg.keys().cloned());
    all_cells.extend(cfg_.keys().cloned());
    let list = |m: &BTreeMap<Cell, ConeSet>, c: &Cell| m.get(c).map(|s| s.iter().collect()).unwrap_or_default();
    let cells = all_cells
        .into_iter()
        .map(|c| HormanderCell {
            f: list(&cf, &c),
            g: list(&cg, &c),
            fg: list(&cfg_, &c),
            allowed: allowed.iter().filter(|(x, _)| *x == c).map(|(_, b)| *b).collect(),
            cell: c,
        })
        .collect();
    Ok(HormanderReport {
        hypothesis_ok: sum.hypothesis_ok,
        violating_cells: sum.violating_cells,
        inclusion,
        cells,
        wf_f,
        wf_g,
        wf_fg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b1() -> DirectionBins {
        DirectionBins::new(1, 2).unwrap()
    }

    fn b16() -> DirectionBins {
        DirectionBins::new(2, 16).unwrap()
    }

    #[test]
    fn signs() {
        let p = ConeSet::from_bins(b1(), [0]);
        let m = ConeSet::from_bins(b1(), [1]);
        let s = cone_sum(&p, &p);
        assert!(s.sum_defined);
        assert_eq!(s.closure_union, p);
        assert!(!cone_sum(&p, &m).sum_defined);
    }

    #[test]
    fn crossed_axes_fill_everything() {
        let ey = ConeSet::from_bins(b16(), [4, 12]);
        let ex = ConeSet::from_bins(b16(), [0, 8]);
        let s = cone_sum(&ey, &ex);
        assert!(s.sum_defined);
        assert_eq!(s.closure_union, ConeSet::full(b16()));
        for q in [2, 6, 10, 14] {
            assert!(s.sum.contains(q));
        }
    }

    #[test]
    fn antipodal_bins_cancel() {
        let a = ConeSet::from_bins(b16(), [3]);
        let b = ConeSet::from_bins(b16(), [11]);
        assert!(!cone_sum(&a, &b).sum_defined);
    }

    #[test]
    fn separation_quadrant() {
        let a = ConeSet::from_bins(b16(), [4]);
        let b = ConeSet::from_bins(b16(), [0]);
        let gamma = ConeSet::from_bins(b16(), 0..=4);
        let (g1, g2) = cone_separation(&a, &b, &gamma).unwrap();
        assert!(g1.len() > 1 && g2.len() > 1);
        assert!(cone_sum(&g1, &g2).closure_union.is_subset(&gamma));
    }

    #[test]
    fn separation_fails_with_witness() {
        let a = ConeSet::from_bins(b16(), [4]);
        let b = ConeSet::from_bins(b16(), [0]);
        let gamma = ConeSet::from_bins(b16(), [0, 4]);
        assert!(matches!(cone_separation(&a, &b, &gamma), Err(Error::SeparationFailed { bin: 1 })));
    }
}
