mod common;

use common::{mnet_1d, mnet_2d, order};
use num_complex::Complex64;
use ultranet::embedding::{canonical_embed, embed_distribution, gevrey_bump_samples, Axis, BoundaryRepr, DistributionSpec};
use ultranet::mollifier::radial_cutoff;
use ultranet::net::{net_mul, SampledNet};
use ultranet::spectral::{compact_support_bound_check, fit_decay, fourier_net, regularity_test, DecayOutcome, DirectionBins, FitConfig};

fn bins_1d() -> DirectionBins {
    DirectionBins::new(1, 2).unwrap()
}

fn bump_net() -> SampledNet {
    let m = mnet_1d();
    canonical_embed(order(), &m.ladder, &m.grid, &gevrey_bump_samples(&m.grid, &[0.0], 1.0)).unwrap()
}

#[test]
fn bump_is_regular_in_both_directions() {
    let r = regularity_test(&bump_net(), &bins_1d(), &FitConfig::default()).unwrap();
    assert!(r.regular);
    for b in &r.bins {
        let fit = b.fit().unwrap();
        assert!(fit.k2 >= 0.5 && fit.residual_rms <= 1.0, "{fit:?}");
    }
}

#[test]
fn dirac_is_singular_with_flat_spectrum() {
    let net = embed_distribution(&DistributionSpec::dirac(&[0.0]), &mnet_1d()).unwrap();
    let r = regularity_test(&net, &bins_1d(), &FitConfig::default()).unwrap();
    assert!(!r.regular);
    for b in &r.bins {
        let fit = b.fit().unwrap();
        assert!(fit.k2.abs() <= 0.05 && fit.residual_rms <= 1.0, "{fit:?}");
    }
    let bound = compact_support_bound_check(&net, &FitConfig::default()).unwrap();
    assert!(bound.passed, "{bound:?}");
    assert!(bound.k1.abs() < 0.05);
}

#[test]
fn dirac_spectrum_is_one_on_the_plateau() {
    let m = mnet_1d();
    let net = embed_distribution(&DistributionSpec::dirac(&[0.0]), &m).unwrap();
    let s = fourier_net(&net);
    for (spec, &e) in s.spectra.iter().zip(m.ladder.values()) {
        for (i, v) in spec.iter().enumerate() {
            if e * m.grid.wavenumber(i).abs() <= m.base.r1 {
                assert!((v - 1.0).norm() < 1e-10, "ε = {e}: {v}");
            }
        }
    }
}

#[test]
fn boundary_value_minus_lives_on_positive_frequencies() {
    let m = mnet_1d();
    let cfg = FitConfig::default();
    for repr in [BoundaryRepr::Analytic, BoundaryRepr::Mollified] {
        let spec = DistributionSpec::BoundaryValueMinus {
            location: 0.0,
            representation: repr,
        };
        let s = fourier_net(&embed_distribution(&spec, &m).unwrap());
        let top = s.max_abs();
        for spec in &s.spectra {
            for (i, v) in spec.iter().enumerate() {
                if m.grid.wavenumber(i) < 0.0 {
                    assert!(v.norm() <= 1e-6 * top, "{repr:?}: {v}");
                }
            }
        }
        let plus = fit_decay(&s, &bins_1d(), 0, order(), &cfg).unwrap();
        let minus = fit_decay(&s, &bins_1d(), 1, order(), &cfg).unwrap();
        assert!(matches!(minus, DecayOutcome::Vacuous { .. }), "{repr:?}: {minus:?}");
        assert!(plus.fit().unwrap().k2 < 0.5, "{repr:?}: {plus:?}");
    }
}

#[test]
fn parseval_holds_on_the_grid() {
    let m = mnet_1d();
    for spec in [
        DistributionSpec::dirac(&[0.3]),
        DistributionSpec::BoundaryValuePlus {
            location: 0.0,
            representation: BoundaryRepr::Analytic,
        },
        DistributionSpec::box_function(-1.0, 1.0),
    ] {
        let net = embed_distribution(&spec, &m).unwrap();
        let d = fourier_net(&net).parseval_defect(&net);
        assert!(d < 1e-8, "{spec:?}: {d:e}");
    }
}

#[test]
fn real_nets_have_antipodally_symmetric_spectra() {
    let m = mnet_1d();
    let n = m.grid.points();
    let net = embed_distribution(&DistributionSpec::box_function(-0.25, 0.5), &m).unwrap();
    for spec in fourier_net(&net).spectra {
        let top = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 1..n {
            assert!((spec[i] - spec[n - i].conj()).norm() <= 1e-12 * top);
        }
    }
}

#[test]
fn growth_factor_shifts_k1_by_one() {
    let cfg = FitConfig::default();
    let a = order().a();
    let net = embed_distribution(&DistributionSpec::dirac(&[0.0]), &mnet_1d()).unwrap();
    let boosted = net.scale_by(|e| Complex64::new(e.powf(-a).exp(), 0.0));
    for b in 0..2 {
        let k1 = fit_decay(&fourier_net(&net), &bins_1d(), b, order(), &cfg).unwrap().fit().unwrap().k1;
        let k1b = fit_decay(&fourier_net(&boosted), &bins_1d(), b, order(), &cfg).unwrap().fit().unwrap().k1;
        assert!((k1b - k1 - 1.0).abs() <= 0.05, "bin {b}: {k1} → {k1b}");
    }
}

#[test]
fn localized_heaviside_is_singular_both_ways() {
    let m = mnet_1d();
    let h = embed_distribution(&DistributionSpec::Heaviside { location: 0.0 }, &m).unwrap();
    let g = m.grid;
    let cut = SampledNet::from_fn(order(), m.ladder.clone(), g, |_, p| {
        Complex64::new(radial_cutoff(p[0].abs(), 1.0, 2.0, order().s()), 0.0)
    })
    .unwrap();
    let r = regularity_test(&net_mul(&h, &cut).unwrap(), &bins_1d(), &FitConfig::default()).unwrap();
    assert!(!r.regular);
    assert!(r.bins.iter().all(|b| !b.regular), "{r:?}");
}

#[test]
fn line_delta_obeys_the_compact_support_bound() {
    let m = mnet_2d();
    let net = embed_distribution(&DistributionSpec::LineDelta2d { axis: Axis::X, offset: 0.0 }, &m).unwrap();
    let b = compact_support_bound_check(&net, &FitConfig::default()).unwrap();
    assert!(b.passed, "{b:?}");
}
