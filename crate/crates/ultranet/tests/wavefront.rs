mod common;

use std::collections::BTreeSet;

use common::{mnet_1d, mnet_2d, order};
use num_complex::Complex64;
use ultranet::embedding::{canonical_embed, embed_distribution, gevrey_bump_samples, Axis, BoundaryRepr, DistributionSpec};
use ultranet::microlocal::{cell_of, check_wf_properties, sigma_localized, wavefront, MicrolocalConfig};
use ultranet::mollifier::radial_cutoff;
use ultranet::net::SampledNet;

fn labels(spec: &DistributionSpec, x0: f64) -> Vec<String> {
    let net = embed_distribution(spec, &mnet_1d()).unwrap();
    sigma_localized(&net, &[x0], 7, &MicrolocalConfig::default()).unwrap().sigma.labels()
}

#[test]
fn dirac_is_singular_only_at_its_location() {
    let d = DistributionSpec::dirac(&[0.0]);
    assert_eq!(labels(&d, 0.0), ["+", "-"]);
    assert!(labels(&d, 1.0).is_empty());
}

#[test]
fn heaviside_jump_is_singular_both_ways() {
    assert_eq!(labels(&DistributionSpec::Heaviside { location: 0.0 }, 0.0), ["+", "-"]);
}

#[test]
fn boundary_values_are_one_sided() {
    for repr in [BoundaryRepr::Analytic, BoundaryRepr::Mollified] {
        let minus = DistributionSpec::BoundaryValueMinus {
            location: 0.0,
            representation: repr,
        };
        let plus = DistributionSpec::BoundaryValuePlus {
            location: 0.0,
            representation: repr,
        };
        assert_eq!(labels(&minus, 0.0), ["+"], "{repr:?}");
        assert_eq!(labels(&plus, 0.0), ["-"], "{repr:?}");
    }
}

#[test]
fn analytic_and_mollified_boundary_values_agree() {
    let m = mnet_1d();
    let cfg = MicrolocalConfig::default();
    let wf = |repr| {
        let spec = DistributionSpec::BoundaryValueMinus {
            location: 0.0,
            representation: repr,
        };
        wavefront(&embed_distribution(&spec, &m).unwrap(), &cfg).unwrap()
    };
    let a = wf(BoundaryRepr::Analytic);
    let b = wf(BoundaryRepr::Mollified);
    assert_eq!(a.pairs, b.pairs);
    assert!(a.pairs.iter().all(|(_, bin)| *bin == 0));
    assert!(a.pairs.contains(&(vec![0], 0)));
}

#[test]
fn gevrey_bump_has_empty_wavefront() {
    let m = mnet_1d();
    let net = canonical_embed(order(), &m.ladder, &m.grid, &gevrey_bump_samples(&m.grid, &[0.0], 1.0)).unwrap();
    let wf = wavefront(&net, &MicrolocalConfig::default()).unwrap();
    assert!(wf.pairs.is_empty(), "{:?}", wf.pairs);
    assert!(wf.sing_supp().is_empty());
}

#[test]
fn wavefront_moves_with_the_distribution() {
    let m = mnet_1d();
    let cfg = MicrolocalConfig::default();
    let shift = cell_of(&m.grid, &cfg, &[0.5])[0] - cell_of(&m.grid, &cfg, &[0.0])[0];
    let a = wavefront(&embed_distribution(&DistributionSpec::dirac(&[0.0]), &m).unwrap(), &cfg).unwrap();
    let b = wavefront(&embed_distribution(&DistributionSpec::dirac(&[0.5]), &m).unwrap(), &cfg).unwrap();
    let moved: BTreeSet<_> = a.pairs.iter().map(|(c, bin)| (vec![c[0] + shift], *bin)).collect();
    assert_eq!(moved, b.pairs);
}

#[test]
fn wavefront_properties_hold_for_a_jump() {
    let m = mnet_1d();
    let net = embed_distribution(&DistributionSpec::box_function(0.0, 0.5), &m).unwrap();
    let factor = SampledNet::from_fn(order(), m.ladder.clone(), m.grid, |_, p| {
        Complex64::new(radial_cutoff(p[0].abs(), 1.0, 2.0, order().s()) * (1.0 + 0.5 * (3.0 * p[0]).sin()), 0.0)
    })
    .unwrap();
    let r = check_wf_properties(&net, &[1], &factor, &MicrolocalConfig::default()).unwrap();
    assert!(r.factor_regular);
    assert!(r.projection_ok);
    assert!(r.derivative.holds, "{:?}", r.derivative.violations);
    assert!(r.factor.holds, "{:?}", r.factor.violations);
    let proj: BTreeSet<_> = r.wavefront.pairs.iter().map(|(c, _)| c.clone()).collect();
    assert_eq!(proj, r.wavefront.sing_supp());
}

#[test]
fn line_delta_is_conormal() {
    let m = mnet_2d();
    let cfg = MicrolocalConfig::default();
    let net = embed_distribution(&DistributionSpec::LineDelta2d { axis: Axis::X, offset: 0.0 }, &m).unwrap();
    let on = sigma_localized(&net, &[0.0, 0.0], 7, &cfg).unwrap().sigma;
    assert!(on.contains(4) && on.contains(12), "{:?}", on.members);
    assert!(!on.contains(0) && !on.contains(8), "{:?}", on.members);
    let off = sigma_localized(&net, &[0.0, 1.0], 7, &cfg).unwrap().sigma;
    assert!(off.is_empty(), "{:?}", off.members);
}
