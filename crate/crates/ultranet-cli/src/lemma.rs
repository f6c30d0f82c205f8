//! Seeded trials of the closure formula closure(A + B) = (A + B) ∪ A ∪ B
//! against a brute-force sweep of sampled direction sums.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use ultranet::microlocal::ConeSet;
use ultranet::product::{cone_sum_with, ConeSumConfig};
use ultranet::spectral::DirectionBins;

/// Largest angular step of the brute-force sweep.
const SWEEP_STEP: f64 = 2e-3;

#[derive(Clone, Debug, Serialize)]
pub struct Trial {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub formula: Vec<usize>,
    pub brute_force: Vec<usize>,
    pub equal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialSummary {
    pub bins: usize,
    pub seed: u64,
    pub trials: Vec<Trial>,
    /// Drawn pairs whose sum contains 0, redrawn.
    pub undefined_skipped: usize,
    pub equal: usize,
}

fn sector(count: usize, theta: f64) -> usize {
    let w = 2.0 * PI / count as f64;
    (((theta + w / 2.0).rem_euclid(2.0 * PI) / w).floor() as usize) % count
}

fn sample_angles(s: &ConeSet, per: usize) -> Vec<f64> {
    let w = 2.0 * PI / s.bins.count() as f64;
    s.iter()
        .flat_map(|b| (0..per).map(move |i| b as f64 * w + ((i as f64 + 0.5) / per as f64 - 0.5) * w))
        .collect()
}

/// Sectors met by ρu + v for ρ swept densely over (0, ∞), over all sampled
/// pairs, joined with A and B; None when some pair is antipodal.
pub fn brute_force_closure(a: &ConeSet, b: &ConeSet, per: usize) -> Option<BTreeSet<usize>> {
    let n = a.bins.count();
    let mut out: BTreeSet<usize> = a.iter().chain(b.iter()).collect();
    let (ua, vb) = (sample_angles(a, per), sample_angles(b, per));
    for &tu in &ua {
        for &tv in &vb {
            let d = (tu - tv).rem_euclid(2.0 * PI);
            let delta = d.min(2.0 * PI - d);
            if (delta - PI).abs() < 1e-12 {
                return None;
            }
            let steps = (delta / SWEEP_STEP).ceil().max(2.0) as usize;
            for k in 1..steps {
                let t = k as f64 / steps as f64;
                let rho = if delta < 1e-15 { 1.0 } else { (t * delta).sin() / ((1.0 - t) * delta).sin() };
                let (x, y) = (rho * tu.cos() + tv.cos(), rho * tu.sin() + tv.sin());
                out.insert(sector(n, y.atan2(x)));
            }
        }
    }
    Some(out)
}

/// Contiguous arc of 1..=4 bins at a uniform start.
fn random_arc(rng: &mut ChaCha8Rng, bins: DirectionBins) -> ConeSet {
    let n = bins.count();
    let start = rng.random_range(0..n);
    let len = rng.random_range(1..=4);
    ConeSet::from_bins(bins, (0..len).map(|i| (start + i) % n))
}

pub fn run_trials(trials: usize, seed: u64, bins: usize) -> ultranet::Result<TrialSummary> {
    let db = DirectionBins::new(2, bins)?;
    let cfg = ConeSumConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    let mut skipped = 0;
    while out.len() < trials {
        let a = random_arc(&mut rng, db);
        let b = random_arc(&mut rng, db);
        let pair = cone_sum_with(&a, &b, &cfg);
        let brute = brute_force_closure(&a, &b, cfg.directions_per_bin);
        if !pair.sum_defined || brute.is_none() {
            skipped += 1;
            continue;
        }
        let brute: Vec<usize> = brute.into_iter().flatten().collect();
        let formula: Vec<usize> = pair.closure_union.iter().collect();
        out.push(Trial {
            a: a.iter().collect(),
            b: b.iter().collect(),
            equal: formula == brute,
            formula,
            brute_force: brute,
        });
    }
    let equal = out.iter().filter(|t| t.equal).count();
    Ok(TrialSummary {
        bins,
        seed,
        trials: out,
        undefined_skipped: skipped,
        equal,
    })
}
