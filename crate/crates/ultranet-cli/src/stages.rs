//! Stage pipelines: each stage returns JSON results, named checks, CSV
//! tables and plots; nothing here writes to disk.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use ultranet::classify::{negligible_trend, Classifier, ClosedForm, GrowthClass, GrowthVerdict};
use ultranet::embedding::{canonical_embed, diagram_check, embed_distribution, gevrey_bump_samples, mollification_error, BoundaryRepr, DistributionSpec};
use ultranet::fourier;
use ultranet::microlocal::{check_wf_properties, sigma_cone, sigma_localized, wavefront, ConeSet, MicrolocalConfig, WavefrontEstimate};
use ultranet::mollifier::{build_gevrey_bump, build_mollifier, mollifier_net, radial_cutoff, Mollifier, MollifierNet};
use ultranet::net::{net_mul, BoxRegion, EpsilonLadder, GevreyOrder, Grid, SampledNet};
use ultranet::product::hormander_check;
use ultranet::spectral::{fourier_net, regularity_test, DirectionBins, FitConfig, RegularityReport, ShellLayout, ShellValues};

use crate::config::{CanonicalBump, Expectation, ExperimentConfig, ResolvedStage, StageKind};
use crate::lemma::run_trials;
use crate::plots::{Plot, Series};
use crate::RunError;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug)]
pub struct StageOutput {
    pub result: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    /// (file name, contents) written next to the tables.
    pub files: Vec<(String, String)>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
}

impl StageOutput {
    fn new() -> Self {
        Self {
            result: Value::Null,
            checks: Vec::new(),
            tables: Vec::new(),
            plots: Vec::new(),
            files: Vec::new(),
            summary: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

/// Number formatting shared by every CSV file: shortest round-trip form.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Run-wide objects built once.
pub struct RunContext {
    pub order: GevreyOrder,
    pub mollifier: Mollifier,
    pub classifier: Classifier,
    pub fit: FitConfig,
    pub micro: MicrolocalConfig,
    pub seed: u64,
}

impl RunContext {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, RunError> {
        let order = cfg.s;
        let mgrid = Grid::new(1, 64.0, 4096)?;
        let bump = build_gevrey_bump(order, cfg.mollifier.r1, cfg.mollifier.r2, &mgrid)?;
        let mollifier = build_mollifier(&bump, &mgrid)?;
        let fit = FitConfig {
            kappa_reg: cfg.thresholds.kappa_reg,
            rho_max: cfg.thresholds.rho_max,
            plateau_radius: cfg.mollifier.r1,
            ..FitConfig::default()
        };
        Ok(Self {
            order,
            mollifier,
            classifier: Classifier {
                k_min: cfg.thresholds.k_min,
                ..Classifier::default()
            },
            micro: MicrolocalConfig {
                fit: fit.clone(),
                bins: cfg.bins,
                ..MicrolocalConfig::default()
            },
            fit,
            seed: cfg.seed,
        })
    }
}

struct Stage<'a> {
    ctx: &'a RunContext,
    name: &'a str,
    grid: Grid,
    mnet: MollifierNet,
}

impl Stage<'_> {
    fn ladder(&self) -> &EpsilonLadder {
        &self.mnet.ladder
    }

    fn bins(&self) -> Result<DirectionBins, RunError> {
        Ok(DirectionBins::for_grid(&self.grid, self.ctx.micro.bins)?)
    }

    fn embed(&self, spec: &DistributionSpec) -> Result<SampledNet, RunError> {
        Ok(embed_distribution(spec, &self.mnet)?)
    }

    fn canonical(&self, b: &CanonicalBump) -> Result<SampledNet, RunError> {
        let f = gevrey_bump_samples(&self.grid, &b.center, b.width);
        Ok(canonical_embed(self.ctx.order, self.ladder(), &self.grid, &f)?)
    }

    fn file(&self, suffix: &str) -> String {
        format!("{}_{suffix}", self.name)
    }
}

pub fn run_stage(ctx: &RunContext, st: &ResolvedStage) -> Result<StageOutput, RunError> {
    let mnet = mollifier_net(&ctx.mollifier, &st.ladder, &st.grid)?;
    let stage = Stage {
        ctx,
        name: &st.name,
        grid: st.grid,
        mnet,
    };
    let mut out = StageOutput::new();
    out.warnings = stage.mnet.warnings.clone();
    match &st.kind {
        StageKind::Classify { closed_forms, specs } => classify(&stage, closed_forms, specs, &mut out)?,
        StageKind::Ideal => ideal(&stage, &mut out)?,
        StageKind::Mollifier => mollifier(&stage, &mut out)?,
        StageKind::Mollification { bumps } => mollification(&stage, bumps, &mut out)?,
        StageKind::Diagram { bump } => diagram(&stage, bump, &mut out)?,
        StageKind::Regularity { regular, singular } => regularity(&stage, regular, singular, &mut out)?,
        StageKind::Embed { specs } => embed(&stage, specs, &mut out)?,
        StageKind::Sigma { specs } => sigma(&stage, specs, &mut out)?,
        StageKind::Wavefront { specs } => wavefronts(&stage, specs, &mut out)?,
        StageKind::OneSided => one_sided(&stage, &mut out)?,
        StageKind::WfProperties { specs, canonical, alpha } => wf_properties(&stage, specs, canonical, alpha, &mut out)?,
        StageKind::LemmaTrials { trials, seed, bins } => lemma_trials(*trials, seed.unwrap_or(ctx.seed), *bins, &mut out)?,
        StageKind::Hormander { cases } => hormander(&stage, cases, &mut out)?,
    }
    Ok(out)
}

pub fn spec_label(spec: &DistributionSpec) -> String {
    match spec {
        DistributionSpec::Dirac { location } => format!("dirac{location:?}"),
        DistributionSpec::Heaviside { location } => format!("heaviside({location})"),
        DistributionSpec::BoundaryValueMinus { location, representation } => format!("bv_minus({location}, {})", repr_label(*representation)),
        DistributionSpec::BoundaryValuePlus { location, representation } => format!("bv_plus({location}, {})", repr_label(*representation)),
        DistributionSpec::LineDelta2d { axis, offset } => format!("line_delta({axis:?}, {offset})").to_lowercase(),
        DistributionSpec::GevreyBumpFunction { center, width } => format!("bump{center:?}/{width}"),
        DistributionSpec::FiniteLinearCombination { terms } => terms
            .iter()
            .map(|t| format!("{}·{}", t.coeff, spec_label(&t.spec)))
            .collect::<Vec<_>>()
            .join(" + "),
    }
}

fn repr_label(r: BoundaryRepr) -> &'static str {
    match r {
        BoundaryRepr::Analytic => "analytic",
        BoundaryRepr::Mollified => "mollified",
    }
}

fn bump_label(b: &CanonicalBump) -> String {
    format!("canonical_bump{:?}/{}", b.center, b.width)
}

/// Point at which a spec is singular, for localized Σ.
fn focus(spec: &DistributionSpec, dim: usize) -> Vec<f64> {
    match spec {
        DistributionSpec::Dirac { location } => location.clone(),
        DistributionSpec::Heaviside { location }
        | DistributionSpec::BoundaryValueMinus { location, .. }
        | DistributionSpec::BoundaryValuePlus { location, .. } => vec![*location],
        DistributionSpec::GevreyBumpFunction { center, .. } => center.clone(),
        DistributionSpec::FiniteLinearCombination { terms } => terms.first().map_or(vec![0.0; dim], |t| focus(&t.spec, dim)),
        DistributionSpec::LineDelta2d { .. } => vec![0.0; dim],
    }
}

fn closed_form_name(l: &ClosedForm) -> String {
    match l {
        ClosedForm::ExpNegInv => "exp(-1/eps)".into(),
        ClosedForm::One => "1".into(),
        ClosedForm::ExpInv => "exp(1/eps)".into(),
        ClosedForm::ExpGrowthRate => "exp(eps^-a)".into(),
        ClosedForm::Power { p } => format!("eps^-{p}"),
    }
}

fn expected_class(l: &ClosedForm) -> GrowthClass {
    match l {
        ClosedForm::ExpNegInv => GrowthClass::Negligible,
        ClosedForm::ExpInv => GrowthClass::NonModerate,
        _ => GrowthClass::Moderate,
    }
}

fn classify_domain(stage: &Stage, net: &SampledNet) -> Result<GrowthVerdict, RunError> {
    Ok(stage.ctx.classifier.classify_net(net, &BoxRegion::domain(&stage.grid))?)
}

fn indicator_rows(label: &str, v: &GrowthVerdict, rows: &mut Vec<Vec<String>>) {
    for a in &v.per_alpha {
        for &(e, g) in &a.series {
            rows.push(vec![label.to_string(), format!("{:?}", a.alpha), num(e), num(g)]);
        }
    }
}

fn classify(stage: &Stage, laws: &[ClosedForm], specs: &[DistributionSpec], out: &mut StageOutput) -> Result<(), RunError> {
    let order = stage.ctx.order;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for l in laws {
        let name = closed_form_name(l);
        let net = l.net(order, stage.ladder().clone(), stage.grid)?;
        let v = classify_domain(stage, &net)?;
        let mut worst: f64 = 0.0;
        let mut analytic = Vec::new();
        for &(e, g) in &v.indicator_series {
            let want = l.indicator(order, e);
            let rel = if want == 0.0 { g.abs() } else { ((g - want) / want).abs() };
            worst = worst.max(rel);
            analytic.push((e, want));
            rows.push(vec![name.clone(), num(e), num(g), num(want)]);
        }
        let expect = expected_class(l);
        out.check(format!("{name} is {expect}"), v.class == expect, format!("classified {}", v.class));
        out.check(
            format!("{name} indicator matches closed form"),
            worst <= 1e-6,
            format!("max relative error {worst:e}"),
        );
        out.summary.push(format!("{name}: {}", v.class));
        curves.push(Series {
            label: name.clone(),
            points: v.indicator_series.iter().map(|&(e, g)| (e.log2(), g)).collect(),
            scatter: true,
        });
        curves.push(Series {
            label: format!("{name} (closed form)"),
            points: analytic.iter().map(|&(e, g)| (e.log2(), g)).collect(),
            scatter: false,
        });
        results.push(json!({"net": name, "class": v.class, "fitted_k": v.fitted_k, "max_relative_error": worst, "indicator": v.indicator_series}));
    }
    if !laws.is_empty() {
        out.tables.push(Table {
            file: "indicator.csv".into(),
            header: vec!["net", "eps", "g", "g_closed_form"],
            rows,
        });
        out.plots.push(Plot {
            file: stage.file("indicator.svg"),
            title: "growth indicator G(ε) at α = 0".into(),
            x_label: "log2 ε".into(),
            y_label: "G".into(),
            series: curves,
        });
    }
    let mut spec_rows = Vec::new();
    for spec in specs {
        let label = spec_label(spec);
        let v = classify_domain(stage, &stage.embed(spec)?)?;
        out.check(
            format!("embedded {label} is moderate"),
            v.class == GrowthClass::Moderate,
            format!("classified {}", v.class),
        );
        out.summary.push(format!("{label}: {}", v.class));
        indicator_rows(&label, &v, &mut spec_rows);
        results.push(json!({"net": label, "class": v.class, "fitted_k": v.fitted_k, "per_alpha": v.per_alpha}));
    }
    if !specs.is_empty() {
        out.tables.push(Table {
            file: "embedded_indicator.csv".into(),
            header: vec!["net", "alpha", "eps", "g"],
            rows: spec_rows,
        });
    }
    out.result = json!({ "verdicts": results });
    Ok(())
}

fn ideal(stage: &Stage, out: &mut StageOutput) -> Result<(), RunError> {
    let order = stage.ctx.order;
    let l = stage.ladder().clone();
    let g = stage.grid;
    let dim = g.dim();
    // the mollification error is negligible with too thin a margin on the truncated ladder to absorb ε^-3 factors
    let damped = regular_factor(order, &l, &g)?.scale_by(|e| Complex64::new((-1.0 / e).exp(), 0.0));
    let nets: Vec<(String, SampledNet, GrowthClass)> = vec![
        ("1".into(), ClosedForm::One.net(order, l.clone(), g)?, GrowthClass::Moderate),
        ("eps^-3".into(), ClosedForm::Power { p: 3.0 }.net(order, l.clone(), g)?, GrowthClass::Moderate),
        ("exp(eps^-a)".into(), ClosedForm::ExpGrowthRate.net(order, l.clone(), g)?, GrowthClass::Moderate),
        ("dirac".into(), stage.embed(&DistributionSpec::dirac(&vec![0.0; dim]))?, GrowthClass::Moderate),
        ("exp(-1/eps)".into(), ClosedForm::ExpNegInv.net(order, l, g)?, GrowthClass::Negligible),
        ("exp(-1/eps)·g".into(), damped, GrowthClass::Negligible),
    ];
    let mut classes = Vec::new();
    for (name, net, expect) in &nets {
        let v = classify_domain(stage, net)?;
        out.check(format!("{name} is {expect}"), v.class == *expect, format!("classified {}", v.class));
        classes.push(v.class);
    }
    let mut rows = Vec::new();
    let mut applicable = 0;
    let mut held = 0;
    for (i, (nf, f, _)) in nets.iter().enumerate() {
        for (j, (ng, gn, _)) in nets.iter().enumerate() {
            let moderate = |c: GrowthClass| c != GrowthClass::NonModerate;
            let applies = moderate(classes[i]) && moderate(classes[j]) && (classes[i] == GrowthClass::Negligible || classes[j] == GrowthClass::Negligible);
            let class = if applies {
                Some(classify_domain(stage, &net_mul(f, gn)?)?.class)
            } else {
                None
            };
            if applies {
                applicable += 1;
                if class == Some(GrowthClass::Negligible) {
                    held += 1;
                }
            }
            rows.push(vec![
                nf.clone(),
                ng.clone(),
                applies.to_string(),
                class.map(|c| c.to_string()).unwrap_or_default(),
            ]);
        }
    }
    out.check(
        "moderate × negligible is negligible",
        held == applicable && applicable > 0,
        format!("{held}/{applicable} applicable ordered pairs of 36"),
    );
    out.summary.push(format!("ideal property: {held}/{applicable} applicable pairs negligible"));
    out.result = json!({
        "nets": nets.iter().zip(&classes).map(|((n, _, _), c)| json!({"net": n, "class": c})).collect::<Vec<_>>(),
        "applicable_pairs": applicable,
        "negligible_products": held,
    });
    out.tables.push(Table {
        file: "pairs.csv".into(),
        header: vec!["f", "g", "applicable", "product_class"],
        rows,
    });
    Ok(())
}

fn mollifier(stage: &Stage, out: &mut StageOutput) -> Result<(), RunError> {
    let m = &stage.ctx.mollifier;
    for &(a, r) in &m.moment_residuals {
        let (name, tol) = if a == 0 {
            ("|∫φ − 1|".to_string(), 1e-8)
        } else {
            (format!("|∫x^{a} φ|"), 1e-6)
        };
        out.check(name, r <= tol, format!("{r:e} (tolerance {tol:e})"));
    }
    let f: Vec<Complex64> = m.phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spec = fourier::forward(&m.grid, &f);
    let mut plateau: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for (i, v) in spec.iter().enumerate() {
        let k = m.grid.wavenumber(i).abs();
        if k <= m.r1 {
            plateau = plateau.max((v - 1.0).norm());
        } else if k >= m.r2 {
            tail = tail.max(v.norm());
        }
    }
    out.check("φ̂ = 1 on the plateau", plateau <= 1e-8, format!("{plateau:e}"));
    out.check("φ̂ = 0 beyond r2", tail <= 1e-8, format!("{tail:e}"));
    out.summary.push(format!(
        "mollifier: φ(0) = {:.6}, worst moment residual {:e}",
        m.value_at_origin(),
        m.moment_residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    ));
    out.result = json!({
        "r1": m.r1, "r2": m.r2, "profile": m.profile,
        "value_at_origin": m.value_at_origin(),
        "l1_norm": m.l1_norm(),
        "moment_residuals": m.moment_residuals,
        "seminorm_estimates": m.seminorm_estimates,
        "plateau_error": plateau,
        "tail_max": tail,
        "ladder": stage.ladder().values(),
    });
    let rows = (0..m.grid.points()).map(|i| vec![num(m.grid.coord(i)), num(m.phi[i])]).collect();
    out.tables.push(Table {
        file: "phi.csv".into(),
        header: vec!["x", "phi"],
        rows,
    });
    out.tables.push(Table {
        file: "moments.csv".into(),
        header: vec!["alpha", "residual"],
        rows: m.moment_residuals.iter().map(|(a, r)| vec![a.to_string(), num(*r)]).collect(),
    });
    out.plots.push(Plot {
        file: stage.file("phi.svg"),
        title: "mollifier φ".into(),
        x_label: "x".into(),
        y_label: "φ".into(),
        series: vec![Series {
            label: "φ".into(),
            points: (0..m.grid.points()).map(|i| (m.grid.coord(i), m.phi[i])).filter(|p| p.0.abs() <= 8.0).collect(),
            scatter: false,
        }],
    });
    Ok(())
}

/// Per-α negligibility checks: strictly decreasing tail and final value below −k_min.
fn negligibility_checks(label: &str, v: &GrowthVerdict, k_min: f64, out: &mut StageOutput, rows: &mut Vec<Vec<String>>, curves: &mut Vec<Series>) {
    for a in &v.per_alpha {
        let ok = negligible_trend(&a.series, k_min);
        let last = a.series.last().map_or(f64::NAN, |s| s.1);
        out.check(format!("{label} α = {:?} negligible", a.alpha), ok, format!("final G = {last:.4}"));
        for &(e, g) in &a.series {
            rows.push(vec![label.to_string(), format!("{:?}", a.alpha), num(e), num(g)]);
        }
        curves.push(Series {
            label: format!("{label} α = {:?}", a.alpha),
            points: a.series.iter().map(|&(e, g)| (e.log2(), g)).collect(),
            scatter: false,
        });
    }
}

fn mollification(stage: &Stage, bumps: &[CanonicalBump], out: &mut StageOutput) -> Result<(), RunError> {
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut results = Vec::new();
    for b in bumps {
        let f = gevrey_bump_samples(&stage.grid, &b.center, b.width);
        let r = mollification_error(&f, &stage.mnet, &stage.ctx.classifier)?;
        let label = bump_label(b);
        negligibility_checks(&label, &r.verdict, stage.ctx.classifier.k_min, out, &mut rows, &mut curves);
        out.summary.push(format!("{label}: f − f∗φ_ε is {}", r.verdict.class));
        results.push(json!({"bump": b, "class": r.verdict.class, "log_prefactors": r.log_prefactors, "log_c": r.log_c, "pattern_residual": r.pattern_residual, "per_alpha": r.verdict.per_alpha}));
    }
    out.result = json!({ "bumps": results });
    out.tables.push(Table {
        file: "indicator.csv".into(),
        header: vec!["net", "alpha", "eps", "g"],
        rows,
    });
    out.plots.push(Plot {
        file: stage.file("indicator.svg"),
        title: "G(ε) of f − f∗φ_ε".into(),
        x_label: "log2 ε".into(),
        y_label: "G".into(),
        series: curves,
    });
    Ok(())
}

fn diagram(stage: &Stage, b: &CanonicalBump, out: &mut StageOutput) -> Result<(), RunError> {
    let f = gevrey_bump_samples(&stage.grid, &b.center, b.width);
    let r = diagram_check(&f, &DistributionSpec::bump(&b.center, b.width), &stage.mnet, &stage.ctx.classifier)?;
    let label = bump_label(b);
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    negligibility_checks(&label, &r.verdict, stage.ctx.classifier.k_min, out, &mut rows, &mut curves);
    out.check(
        "canonical − mollified embedding is negligible",
        r.passed,
        format!("classified {}", r.verdict.class),
    );
    out.summary
        .push(format!("diagram for {label}: {}", if r.passed { "commutes" } else { "does not commute" }));
    out.result = json!({"bump": b, "passed": r.passed, "class": r.verdict.class, "per_alpha": r.verdict.per_alpha});
    out.tables.push(Table {
        file: "indicator.csv".into(),
        header: vec!["net", "alpha", "eps", "g"],
        rows,
    });
    out.plots.push(Plot {
        file: stage.file("indicator.svg"),
        title: "G(ε) of canonical − mollified embedding".into(),
        x_label: "log2 ε".into(),
        y_label: "G".into(),
        series: curves,
    });
    Ok(())
}

fn bin_rows(label: &str, bins: &DirectionBins, r: &RegularityReport, rows: &mut Vec<Vec<String>>) {
    for b in &r.bins {
        let f = b.fit();
        rows.push(vec![
            label.to_string(),
            bins.label(b.bin),
            b.verdict().to_string(),
            opt_num(f.map(|f| f.c0)),
            opt_num(f.map(|f| f.k1)),
            opt_num(f.map(|f| f.k2)),
            opt_num(f.map(|f| f.residual_rms)),
            f.map(|f| f.samples.to_string()).unwrap_or_default(),
        ]);
    }
}

/// Finest fitted slice of each bin against its fitted line.
fn decay_series(stage: &Stage, label: &str, net: &SampledNet, bins: &DirectionBins, r: &RegularityReport) -> Result<Vec<Series>, RunError> {
    let cfg = &stage.ctx.fit;
    let spec = fourier_net(net);
    let window = cfg.window(&stage.grid, net.ladder())?;
    let layout = ShellLayout::new(&stage.grid, *bins, window);
    let (eps, spectra) = {
        let n = spec.spectra.len();
        let k = cfg.fit_slices.min(n);
        (&net.ladder().values()[n - k..], &spec.spectra[n - k..])
    };
    let sv = ShellValues::from_spectra(&layout, eps, spectra);
    let order = stage.ctx.order;
    let e = *eps.last().expect("ladder is non-empty");
    let row = sv.values.last().expect("one row per slice");
    let shells = layout.window.shells;
    let mut series = Vec::new();
    for b in &r.bins {
        let pts: Vec<(f64, f64)> = (0..shells)
            .filter_map(|s| {
                let v = row[b.bin * shells + s];
                (v > 0.0).then(|| (layout.centers[s].powf(order.inv_s()), v.ln()))
            })
            .collect();
        let tag = format!("{label} {}", bins.label(b.bin));
        if let Some(f) = b.fit() {
            series.push(Series {
                label: format!("{tag} fit"),
                points: pts.iter().map(|&(t, _)| (t, f.c0 + f.k1 * e.powf(-order.a()) - f.k2 * t)).collect(),
                scatter: false,
            });
        }
        series.push(Series {
            label: tag,
            points: pts,
            scatter: true,
        });
    }
    Ok(series)
}

fn regularity(stage: &Stage, regular: &[CanonicalBump], singular: &[DistributionSpec], out: &mut StageOutput) -> Result<(), RunError> {
    let bins = stage.bins()?;
    let cfg = &stage.ctx.fit;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut series = Vec::new();
    let mut cases: Vec<(String, SampledNet, bool)> = Vec::new();
    for b in regular {
        cases.push((bump_label(b), stage.canonical(b)?, true));
    }
    for s in singular {
        cases.push((spec_label(s), stage.embed(s)?, false));
    }
    for (label, net, expect_regular) in &cases {
        let r = regularity_test(net, &bins, cfg)?;
        out.check(
            format!("{label} is {}", if *expect_regular { "regular" } else { "singular" }),
            r.regular == *expect_regular,
            format!("regularity_test = {}", r.regular),
        );
        for b in &r.bins {
            let name = format!("{label} bin {}", bins.label(b.bin));
            match b.fit() {
                Some(f) if *expect_regular => out.check(
                    format!("{name}: k2 ≥ {} and residual ≤ {}", cfg.kappa_reg, cfg.rho_max),
                    f.k2 >= cfg.kappa_reg && f.residual_rms <= cfg.rho_max,
                    format!("k2 = {:.4}, residual = {:.4}", f.k2, f.residual_rms),
                ),
                Some(f) => out.check(
                    format!("{name}: k2 ≤ 0.05 and residual ≤ {}", cfg.rho_max),
                    f.k2 <= 0.05 && f.residual_rms <= cfg.rho_max,
                    format!("k2 = {:.4}, residual = {:.4}", f.k2, f.residual_rms),
                ),
                None => out.check(format!("{name}: fitted"), false, b.verdict().to_string()),
            }
        }
        bin_rows(label, &bins, &r, &mut rows);
        series.extend(decay_series(stage, label, net, &bins, &r)?);
        out.summary.push(format!("{label}: {}", if r.regular { "regular" } else { "singular" }));
        results.push(json!({"net": label, "regular": r.regular, "bins": r.bins}));
    }
    out.result = json!({ "nets": results });
    out.tables.push(Table {
        file: "fits.csv".into(),
        header: vec!["net", "bin", "verdict", "c0", "k1", "k2", "residual_rms", "samples"],
        rows,
    });
    out.plots.push(Plot {
        file: stage.file("decay_fits.svg"),
        title: "shell maxima at the finest ε and fitted decay".into(),
        x_label: "|ξ|^(1/s)".into(),
        y_label: "ln |f̂_ε|".into(),
        series,
    });
    Ok(())
}

fn embed(stage: &Stage, specs: &[DistributionSpec], out: &mut StageOutput) -> Result<(), RunError> {
    let g = stage.grid;
    let n = g.points();
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for spec in specs {
        let label = spec_label(spec);
        let net = stage.embed(spec)?;
        let v = classify_domain(stage, &net)?;
        out.check(
            format!("embedded {label} is moderate"),
            v.class == GrowthClass::Moderate,
            format!("classified {}", v.class),
        );
        out.summary.push(format!("{label}: {} slices, {}", net.ladder().len(), v.class));
        // order, ladder, grid and row-major complex samples per ε
        let text = serde_json::to_string(&net).map_err(|e| RunError::Io(e.to_string()))?;
        out.files.push((format!("net_{}.json", results.len()), text));
        out.warnings.extend(net.warnings().iter().cloned());
        // 1D: every node; 2D: the cut through the origin along the first axis
        for (k, &e) in net.ladder().values().iter().enumerate() {
            let s = net.slice(k);
            for i in 0..n {
                let idx = if g.dim() == 1 { i } else { i * n + n / 2 };
                rows.push(vec![label.clone(), num(e), num(g.coord(i)), num(s[idx].re), num(s[idx].im)]);
            }
        }
        results.push(json!({
            "net": label,
            "class": v.class,
            "sup": net.samples().iter().map(|s| s.iter().map(|v| v.norm()).fold(0.0, f64::max)).collect::<Vec<_>>(),
            "source_support": net.source_support(),
        }));
    }
    out.result = json!({ "ladder": stage.ladder().values(), "nets": results });
    out.tables.push(Table {
        file: "slices.csv".into(),
        header: vec!["net", "eps", "x", "re", "im"],
        rows,
    });
    Ok(())
}

fn sigma(stage: &Stage, specs: &[DistributionSpec], out: &mut StageOutput) -> Result<(), RunError> {
    let bins = stage.bins()?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for spec in specs {
        let label = spec_label(spec);
        let net = stage.embed(spec)?;
        let global = sigma_cone(&net, &bins, &stage.ctx.fit)?;
        let x0 = focus(spec, stage.grid.dim());
        let local = sigma_localized(&net, &x0, stage.ctx.micro.j_max, &stage.ctx.micro)?;
        out.summary.push(format!(
            "{label}: Σ = {{{}}}, Σ at {x0:?} = {{{}}}",
            global.labels().join(", "),
            local.sigma.labels().join(", ")
        ));
        for b in 0..bins.count() {
            rows.push(vec![
                label.clone(),
                bins.label(b),
                global.contains(b).to_string(),
                local.sigma.contains(b).to_string(),
            ]);
        }
        results.push(json!({
            "net": label,
            "members": global.iter().collect::<Vec<_>>(),
            "labels": global.labels(),
            "at": x0,
            "localized_members": local.sigma.iter().collect::<Vec<_>>(),
            "localized_labels": local.sigma.labels(),
            "nested": local.nested,
            "scales": local.scales.iter().map(|s| json!({"j": s.j, "radius": s.radius, "members": s.cone.iter().collect::<Vec<_>>()})).collect::<Vec<_>>(),
        }));
    }
    out.result = json!({ "nets": results });
    out.tables.push(Table {
        file: "sigma.csv".into(),
        header: vec!["net", "bin", "global", "localized"],
        rows,
    });
    Ok(())
}

fn wf_summary(wf: &WavefrontEstimate) -> Value {
    let cells = wf.sing_supp();
    let range = |axis: usize| -> Option<(i64, i64)> {
        let v: Vec<i64> = cells.iter().map(|c| c[axis]).collect();
        Some((*v.iter().min()?, *v.iter().max()?))
    };
    json!({
        "pairs": wf.pairs.len(),
        "cells": cells.len(),
        "cell_range": (0..wf.bins.dim()).map(range).collect::<Vec<_>>(),
        "bins": wf.pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>(),
        "cell_width": wf.cell_width,
        "radii": wf.radii,
        "floor": wf.floor,
        "not_nested": wf.not_nested.len(),
    })
}

fn wf_rows(label: &str, wf: &WavefrontEstimate, rows: &mut Vec<Vec<String>>) {
    for r in wf.rows() {
        rows.push(vec![
            label.to_string(),
            r.cell_x.to_string(),
            r.cell_y.map(|c| c.to_string()).unwrap_or_default(),
            r.bin_index.to_string(),
            num(r.bin_angle),
            r.verdict,
            opt_num(r.k2),
            opt_num(r.residual),
        ]);
    }
}

const WF_HEADER: [&str; 8] = ["net", "cell_x", "cell_y", "bin", "bin_angle", "verdict", "k2", "residual"];

/// 1D: (x, bin angle) per pair; 2D: singular-support cell centres.
fn wf_series(label: &str, wf: &WavefrontEstimate) -> Series {
    let w = wf.cell_width;
    let points = if wf.bins.dim() == 1 {
        wf.pairs.iter().map(|(c, b)| (c[0] as f64 * w, wf.bins.angle(*b))).collect()
    } else {
        wf.sing_supp().iter().map(|c| (c[0] as f64 * w, c[1] as f64 * w)).collect()
    };
    Series {
        label: label.to_string(),
        points,
        scatter: true,
    }
}

fn wf_plot(stage: &Stage, series: Vec<Series>) -> Plot {
    let two_d = stage.grid.dim() == 2;
    Plot {
        file: stage.file("wavefront.svg"),
        title: if two_d {
            "singular support of the wave front estimate".into()
        } else {
            "wave front estimate".into()
        },
        x_label: "x".into(),
        y_label: if two_d { "y".into() } else { "direction angle".into() },
        series,
    }
}

fn wavefronts(stage: &Stage, specs: &[DistributionSpec], out: &mut StageOutput) -> Result<(), RunError> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for spec in specs {
        let label = spec_label(spec);
        let wf = wavefront(&stage.embed(spec)?, &stage.ctx.micro)?;
        let proj: BTreeSet<_> = wf.cells.iter().map(|c| c.cell.clone()).collect();
        out.check(
            format!("{label}: projection equals singular support"),
            proj == wf.sing_supp(),
            format!("{} cells", proj.len()),
        );
        out.summary
            .push(format!("{label}: {} pairs over {} cells", wf.pairs.len(), wf.sing_supp().len()));
        wf_rows(&label, &wf, &mut rows);
        series.push(wf_series(&label, &wf));
        results.push(json!({"net": label, "estimate": wf_summary(&wf)}));
    }
    out.result = json!({ "nets": results });
    out.tables.push(Table {
        file: "wavefront.csv".into(),
        header: WF_HEADER.to_vec(),
        rows,
    });
    out.plots.push(wf_plot(stage, series));
    Ok(())
}

fn one_sided(stage: &Stage, out: &mut StageOutput) -> Result<(), RunError> {
    if stage.grid.dim() != 1 {
        return Err(RunError::Config {
            field: "grid".into(),
            reason: "the one-sided stage runs in 1D".into(),
        });
    }
    let bins = stage.bins()?;
    let micro = &stage.ctx.micro;
    let plus = ConeSet::from_bins(bins, [0]);
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut found = Vec::new();
    for repr in [BoundaryRepr::Analytic, BoundaryRepr::Mollified] {
        let spec = DistributionSpec::BoundaryValueMinus {
            location: 0.0,
            representation: repr,
        };
        let label = spec_label(&spec);
        let net = stage.embed(&spec)?;
        let global = sigma_cone(&net, &bins, &stage.ctx.fit)?;
        let local = sigma_localized(&net, &[0.0], micro.j_max, micro)?;
        let wf = wavefront(&net, micro)?;
        wf_rows(&label, &wf, &mut rows);
        series.push(wf_series(&label, &wf));
        found.push((repr, label, global, local.sigma, wf));
    }
    let (_, label, global, local, wf) = &found[0];
    out.check("Σ(1/(x − i0)) = {+}", *global == plus, format!("{{{}}}", global.labels().join(", ")));
    out.check("Σ at x = 0 is {+}", *local == plus, format!("{{{}}}", local.labels().join(", ")));
    let exact: BTreeSet<(Vec<i64>, usize)> = [(vec![0], 0)].into_iter().collect();
    let cells = wf.sing_supp();
    out.check(
        "WF = {(cell(0), +)}",
        wf.pairs == exact,
        format!(
            "{} pairs, cells {:?}..{:?}, bins {:?}",
            wf.pairs.len(),
            cells.first(),
            cells.last(),
            wf.pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>()
        ),
    );
    let (_, mlabel, mglobal, mlocal, mwf) = &found[1];
    out.check(
        "mollified embedding agrees bin-for-bin",
        mglobal == global && mlocal == local && mwf.pairs == wf.pairs,
        format!("Σ {{{}}}, {} pairs", mglobal.labels().join(", "), mwf.pairs.len()),
    );
    for (_, l, g, lo, w) in &found {
        out.summary.push(format!(
            "{l}: Σ = {{{}}}, Σ at 0 = {{{}}}, WF over {} cells",
            g.labels().join(", "),
            lo.labels().join(", "),
            w.sing_supp().len()
        ));
    }
    out.result = json!({
        "nets": [label, mlabel],
        "sigma": [global.labels(), mglobal.labels()],
        "localized_sigma": [local.labels(), mlocal.labels()],
        "wavefront": [wf_summary(wf), wf_summary(mwf)],
    });
    out.tables.push(Table {
        file: "wavefront.csv".into(),
        header: WF_HEADER.to_vec(),
        rows,
    });
    out.plots.push(wf_plot(stage, series));
    Ok(())
}

/// Gevrey cutoff (plateau radius 1, support radius 2) × (1 + ½ sin 3x).
pub fn regular_factor(order: GevreyOrder, ladder: &EpsilonLadder, grid: &Grid) -> Result<SampledNet, RunError> {
    let d = grid.dim();
    Ok(SampledNet::from_fn(order, ladder.clone(), *grid, |_, p| {
        let r = p[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        Complex64::new(radial_cutoff(r, 1.0, 2.0, order.s()) * (1.0 + 0.5 * (3.0 * p[0]).sin()), 0.0)
    })?)
}

fn wf_properties(stage: &Stage, specs: &[DistributionSpec], canonical: &[CanonicalBump], alpha: &[usize], out: &mut StageOutput) -> Result<(), RunError> {
    let factor = regular_factor(stage.ctx.order, stage.ladder(), &stage.grid)?;
    let mut cases: Vec<(String, SampledNet)> = Vec::new();
    for s in specs {
        cases.push((spec_label(s), stage.embed(s)?));
    }
    for b in canonical {
        cases.push((bump_label(b), stage.canonical(b)?));
    }
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for (label, net) in &cases {
        let r = check_wf_properties(net, alpha, &factor, &stage.ctx.micro)?;
        out.check(format!("{label}: factor is regular"), r.factor_regular, "");
        out.check(
            format!("{label}: WF(∂^{alpha:?} f) ⊆ dilated WF(f)"),
            r.derivative.holds,
            format!("{} violations", r.derivative.violations.len()),
        );
        out.check(
            format!("{label}: WF(g f) ⊆ dilated WF(f)"),
            r.factor.holds,
            format!("{} violations", r.factor.violations.len()),
        );
        out.check(format!("{label}: projection equals singular support"), r.projection_ok, "");
        out.summary
            .push(format!("{label}: {}", if r.passed() { "properties hold" } else { "properties violated" }));
        wf_rows(label, &r.wavefront, &mut rows);
        results.push(json!({
            "net": label,
            "passed": r.passed(),
            "wavefront": wf_summary(&r.wavefront),
            "derivative_violations": r.derivative.violations,
            "factor_violations": r.factor.violations,
            "projection_ok": r.projection_ok,
            "nested": r.nested,
        }));
    }
    out.result = json!({ "alpha": alpha, "nets": results });
    out.tables.push(Table {
        file: "wavefront.csv".into(),
        header: WF_HEADER.to_vec(),
        rows,
    });
    Ok(())
}

fn lemma_trials(trials: usize, seed: u64, bins: usize, out: &mut StageOutput) -> Result<(), RunError> {
    let s = run_trials(trials, seed, bins)?;
    out.check(
        "closure formula equals brute force",
        s.equal == s.trials.len(),
        format!("{}/{} exact equalities", s.equal, s.trials.len()),
    );
    out.summary
        .push(format!("{}/{} exact equalities (B = {bins}, seed {seed})", s.equal, s.trials.len()));
    let join = |v: &[usize]| v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
    out.tables.push(Table {
        file: "trials.csv".into(),
        header: vec!["trial", "a", "b", "formula", "brute_force", "equal"],
        rows: s
            .trials
            .iter()
            .enumerate()
            .map(|(i, t)| {
                vec![
                    i.to_string(),
                    join(&t.a),
                    join(&t.b),
                    join(&t.formula),
                    join(&t.brute_force),
                    t.equal.to_string(),
                ]
            })
            .collect(),
    });
    out.result = serde_json::to_value(&s).map_err(|e| RunError::Io(e.to_string()))?;
    Ok(())
}

fn hormander(stage: &Stage, cases: &[crate::config::ProductCase], out: &mut StageOutput) -> Result<(), RunError> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for case in cases {
        let label = format!("{} × {}", spec_label(&case.f), spec_label(&case.g));
        let f = stage.embed(&case.f)?;
        let g = stage.embed(&case.g)?;
        let r = hormander_check(&f, &g, &stage.ctx.micro)?;
        out.check(format!("{label}: consistent with the theorem"), r.consistent(), r.verdict());
        match case.expect {
            Some(Expectation::Inclusion) => out.check(
                format!("{label}: hypothesis holds and WF(fg) is included"),
                r.hypothesis_ok && r.inclusion.as_ref().is_some_and(|i| i.holds),
                r.verdict(),
            ),
            Some(Expectation::NotApplicable) => out.check(format!("{label}: hypothesis violated"), !r.hypothesis_ok && r.inclusion.is_none(), r.verdict()),
            None => {}
        }
        out.summary.push(format!("{label}: {}", r.verdict()));
        let join = |v: &[usize]| v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
        for c in &r.cells {
            rows.push(vec![
                label.clone(),
                c.cell.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
                join(&c.f),
                join(&c.g),
                join(&c.fg),
                join(&c.allowed),
            ]);
        }
        results.push(json!({
            "case": label,
            "hypothesis_ok": r.hypothesis_ok,
            "violating_cells": r.violating_cells,
            "verdict": r.verdict(),
            "inclusion_violations": r.inclusion.as_ref().map(|i| i.violations.clone()),
            "wf_f": wf_summary(&r.wf_f),
            "wf_g": wf_summary(&r.wf_g),
            "wf_fg": wf_summary(&r.wf_fg),
            "origin": r.cells.iter().find(|c| c.cell.iter().all(|&v| v == 0)),
        }));
    }
    out.result = json!({ "cases": results });
    out.tables.push(Table {
        file: "cells.csv".into(),
        header: vec!["case", "cell", "f", "g", "fg", "allowed"],
        rows,
    });
    Ok(())
}
