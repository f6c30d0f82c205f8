//! Experiment configuration: JSON with a versioned schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ultranet::classify::ClosedForm;
use ultranet::embedding::DistributionSpec;
use ultranet::net::{EpsilonLadder, GevreyOrder, Grid};

use crate::RunError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub base: f64,
    pub j_min: i32,
    pub j_max: i32,
}

impl LadderSpec {
    pub fn default_for(dim: usize) -> Self {
        Self {
            base: 2.0,
            j_min: 2,
            j_max: if dim == 1 { 10 } else { 7 },
        }
    }

    pub fn build(&self) -> ultranet::Result<EpsilonLadder> {
        EpsilonLadder::geometric(self.base, self.j_min, self.j_max)
    }
}

/// Default grids: L = 8, N = 4096 in 1D and L = 2, N = 512 in 2D.
pub fn default_grid(dim: usize) -> Grid {
    match dim {
        1 => Grid::new(1, 8.0, 4096),
        _ => Grid::new(2, 2.0, 512),
    }
    .expect("default grids are valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierSpec {
    pub r1: f64,
    pub r2: f64,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        Self {
            r1: ultranet::mollifier::DEFAULT_R1,
            r2: ultranet::mollifier::DEFAULT_R2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub kappa_reg: f64,
    pub rho_max: f64,
    pub k_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            kappa_reg: 0.5,
            rho_max: 1.0,
            k_min: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalBump {
    pub center: Vec<f64>,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductCase {
    pub f: DistributionSpec,
    pub g: DistributionSpec,
    /// "inclusion" or "not_applicable"; unchecked when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Inclusion,
    NotApplicable,
}

fn default_bumps() -> Vec<CanonicalBump> {
    vec![CanonicalBump { center: vec![0.0], width: 1.0 }, CanonicalBump { center: vec![0.5], width: 1.5 }]
}

fn default_bump() -> CanonicalBump {
    CanonicalBump { center: vec![0.0], width: 1.0 }
}

fn default_alpha() -> Vec<usize> {
    vec![1]
}

fn default_trials() -> usize {
    100
}

fn default_lemma_bins() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageKind {
    /// Closed-form nets against their known classes, then embedded specs.
    Classify {
        #[serde(default)]
        closed_forms: Vec<ClosedForm>,
        #[serde(default)]
        specs: Vec<DistributionSpec>,
    },
    /// Moderate × negligible over the fixed six-net corpus.
    Ideal,
    Mollifier,
    Mollification {
        #[serde(default = "default_bumps")]
        bumps: Vec<CanonicalBump>,
    },
    Diagram {
        #[serde(default = "default_bump")]
        bump: CanonicalBump,
    },
    Regularity {
        #[serde(default)]
        regular: Vec<CanonicalBump>,
        #[serde(default)]
        singular: Vec<DistributionSpec>,
    },
    Embed {
        #[serde(default)]
        specs: Vec<DistributionSpec>,
    },
    Sigma {
        #[serde(default)]
        specs: Vec<DistributionSpec>,
    },
    Wavefront {
        #[serde(default)]
        specs: Vec<DistributionSpec>,
    },
    /// Σ and WF of 1/(x − i0), analytic against mollified.
    OneSided,
    WfProperties {
        #[serde(default)]
        specs: Vec<DistributionSpec>,
        #[serde(default)]
        canonical: Vec<CanonicalBump>,
        #[serde(default = "default_alpha")]
        alpha: Vec<usize>,
    },
    LemmaTrials {
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default = "default_lemma_bins")]
        bins: usize,
    },
    Hormander {
        cases: Vec<ProductCase>,
    },
}

impl StageKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            StageKind::Classify { .. } => "classify",
            StageKind::Ideal => "ideal",
            StageKind::Mollifier => "mollifier",
            StageKind::Mollification { .. } => "mollification",
            StageKind::Diagram { .. } => "diagram",
            StageKind::Regularity { .. } => "regularity",
            StageKind::Embed { .. } => "embed",
            StageKind::Sigma { .. } => "sigma",
            StageKind::Wavefront { .. } => "wavefront",
            StageKind::OneSided => "one_sided",
            StageKind::WfProperties { .. } => "wf_properties",
            StageKind::LemmaTrials { .. } => "lemma_trials",
            StageKind::Hormander { .. } => "hormander",
        }
    }

    /// Specs the stage embeds, used to pick the default grid dimension.
    fn specs(&self) -> Vec<&DistributionSpec> {
        match self {
            StageKind::Classify { specs, .. }
            | StageKind::Embed { specs }
            | StageKind::Sigma { specs }
            | StageKind::Wavefront { specs }
            | StageKind::WfProperties { specs, .. } => specs.iter().collect(),
            StageKind::Regularity { singular, .. } => singular.iter().collect(),
            StageKind::Hormander { cases } => cases.iter().flat_map(|c| [&c.f, &c.g]).collect(),
            _ => Vec::new(),
        }
    }

    fn canonical(&self) -> Vec<&CanonicalBump> {
        match self {
            StageKind::Mollification { bumps } => bumps.iter().collect(),
            StageKind::Diagram { bump } => vec![bump],
            StageKind::Regularity { regular, .. } => regular.iter().collect(),
            StageKind::WfProperties { canonical, .. } => canonical.iter().collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderSpec>,
    #[serde(flatten)]
    pub kind: StageKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub s: GevreyOrder,
    /// Applies to every stage without its own ladder; per-dimension default otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub mollifier: MollifierSpec,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Default specs of stages that list none.
    #[serde(default)]
    pub corpus: Vec<DistributionSpec>,
    pub pipeline: Vec<StageSpec>,
}

fn default_bins() -> usize {
    16
}

fn default_seed() -> u64 {
    7
}

/// Grid, ladder and name of one stage after defaults.
#[derive(Clone, Debug)]
pub struct ResolvedStage {
    pub name: String,
    pub grid: Grid,
    pub ladder: EpsilonLadder,
    pub kind: StageKind,
}

fn spec_dim(spec: &DistributionSpec) -> usize {
    match spec {
        DistributionSpec::Dirac { location } => location.len(),
        DistributionSpec::GevreyBumpFunction { center, .. } => center.len(),
        DistributionSpec::LineDelta2d { .. } => 2,
        DistributionSpec::FiniteLinearCombination { terms } => terms.iter().map(|t| spec_dim(&t.spec)).max().unwrap_or(1),
        _ => 1,
    }
}

fn field_error(field: impl Into<String>, reason: impl std::fmt::Display) -> RunError {
    RunError::Config {
        field: field.into(),
        reason: reason.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field_error(if path.is_empty() || path == "." { "config".to_string() } else { path }, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills in the corpus where stages list no specs.
    fn stage_kind(&self, kind: &StageKind) -> StageKind {
        let mut kind = kind.clone();
        match &mut kind {
            StageKind::Classify { specs, closed_forms } if specs.is_empty() && closed_forms.is_empty() => *specs = self.corpus.clone(),
            StageKind::Embed { specs } | StageKind::Sigma { specs } | StageKind::Wavefront { specs } if specs.is_empty() => *specs = self.corpus.clone(),
            StageKind::WfProperties { specs, canonical, .. } if specs.is_empty() && canonical.is_empty() => *specs = self.corpus.clone(),
            _ => {}
        }
        kind
    }

    pub fn resolve(&self) -> Result<Vec<ResolvedStage>, RunError> {
        self.pipeline
            .iter()
            .enumerate()
            .map(|(i, st)| {
                let kind = self.stage_kind(&st.kind);
                let field = |f: &str| format!("pipeline[{i}].{f}");
                let dim = kind
                    .specs()
                    .iter()
                    .map(|s| spec_dim(s))
                    .chain(kind.canonical().iter().map(|b| b.center.len()))
                    .max()
                    .unwrap_or(1);
                let grid = st.grid.or(self.grid).unwrap_or_else(|| default_grid(dim));
                if grid.dim() != dim && !(kind.specs().is_empty() && kind.canonical().is_empty()) {
                    return Err(field_error(field("grid"), format!("{}D grid for {dim}D specs", grid.dim())));
                }
                let ladder_spec = st
                    .ladder
                    .clone()
                    .or_else(|| self.ladder.clone())
                    .unwrap_or_else(|| LadderSpec::default_for(grid.dim()));
                let ladder = ladder_spec.build().map_err(|e| field_error(field("ladder"), e))?;
                Ok(ResolvedStage {
                    name: st.name.clone().unwrap_or_else(|| format!("{:02}_{}", i + 1, kind.kind_name())),
                    grid,
                    ladder,
                    kind,
                })
            })
            .collect()
    }

    fn validate(&self) -> Result<(), RunError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field_error(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let m = &self.mollifier;
        if !(m.r1 > 0.0 && m.r2 > m.r1) {
            return Err(field_error("mollifier", format!("need 0 < r1 < r2, got r1 = {}, r2 = {}", m.r1, m.r2)));
        }
        if self.bins < 4 || !self.bins.is_multiple_of(2) {
            return Err(field_error("bins", format!("need an even count ≥ 4, got {}", self.bins)));
        }
        let t = &self.thresholds;
        if !(t.kappa_reg > 0.0 && t.rho_max > 0.0 && t.k_min > 0.0) {
            return Err(field_error("thresholds", "kappa_reg, rho_max and k_min must be positive"));
        }
        if self.pipeline.is_empty() {
            return Err(field_error("pipeline", "no stages"));
        }
        let mut names = std::collections::BTreeSet::new();
        for st in self.resolve()? {
            if !names.insert(st.name.clone()) {
                return Err(field_error("pipeline", format!("duplicate stage name {}", st.name)));
            }
            if let StageKind::LemmaTrials { bins, trials, .. } = &st.kind {
                if *bins < 4 || bins % 2 != 0 || *trials == 0 {
                    return Err(field_error("pipeline.lemma_trials", "bins must be even ≥ 4 and trials positive"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!(r#"{{"schema_version": 1, "s": 2.0, {extra} "pipeline": [{{"stage": "mollifier"}}]}}"#)
    }

    #[test]
    fn order_one_names_the_field() {
        let text = minimal("").replace("2.0", "1.0");
        match ExperimentConfig::from_json(&text) {
            Err(RunError::Config { field, reason }) => {
                assert_eq!(field, "s");
                assert!(reason.contains("GevreyOrder"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(&minimal(r#""colour": 1,"#)).is_err());
    }

    #[test]
    fn stage_grid_follows_spec_dimension() {
        let text = r#"{"schema_version": 1, "s": 2.0, "pipeline": [
            {"stage": "wavefront", "specs": [{"kind": "line_delta_2d", "axis": "x"}]},
            {"stage": "sigma", "specs": [{"kind": "dirac", "location": [0.0]}]}]}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let st = cfg.resolve().unwrap();
        assert_eq!(st[0].grid.dim(), 2);
        assert_eq!(st[0].name, "01_wavefront");
        assert_eq!(st[1].grid.points(), 4096);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_json(&minimal(r#""bins": 32,"#)).unwrap();
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&echoed).unwrap(), cfg);
    }
}
