//! Experiment configuration (TOML) and its validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elliptic::CoefficientSource;
use crate::error::{LabError, Result};
use crate::lab::{deterministic::exponent_threshold, Family, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ConicalRatio,
    WeightedL2,
    ClassicalVsConical,
    Offdiag,
    DeterministicRatio,
    Picard,
    AtomSuite,
    ApertureSuite,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ConicalRatio => "conical_ratio",
            ExperimentKind::WeightedL2 => "weighted_l2",
            ExperimentKind::ClassicalVsConical => "classical_vs_conical",
            ExperimentKind::Offdiag => "offdiag",
            ExperimentKind::DeterministicRatio => "deterministic_ratio",
            ExperimentKind::Picard => "picard",
            ExperimentKind::AtomSuite => "atom_suite",
            ExperimentKind::ApertureSuite => "aperture_suite",
        }
    }

    fn uses_families(&self) -> bool {
        matches!(
            self,
            ExperimentKind::ConicalRatio | ExperimentKind::WeightedL2 | ExperimentKind::DeterministicRatio
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one_usize")]
    pub n: usize,
    #[serde(rename = "N")]
    pub points: Vec<usize>,
    #[serde(rename = "L", default = "one_f64")]
    pub side: f64,
    #[serde(default)]
    pub t_min: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(rename = "M", default = "default_nodes")]
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TentConfig {
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
}

impl Default for TentConfig {
    fn default() -> Self {
        Self {
            p: default_p(),
            beta: default_beta(),
            alpha: default_alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "one_usize")]
    pub d_h: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    /// When set, the horizon becomes `steps · dt`.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            d_h: 1,
            dt: None,
            steps: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            levels: default_levels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffDiagConfig {
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
    /// Box widths and gaps in lattice sites; probe times in units of `h²`.
    #[serde(default = "two")]
    pub source_width: usize,
    #[serde(default = "two")]
    pub target_width: usize,
    #[serde(default = "default_gaps")]
    pub gaps: Vec<usize>,
    #[serde(default = "default_time_factors")]
    pub time_factors: Vec<f64>,
}

impl Default for OffDiagConfig {
    fn default() -> Self {
        Self {
            q: default_q(),
            source_width: 2,
            target_width: 2,
            gaps: default_gaps(),
            time_factors: default_time_factors(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    /// Fixed slope of `b(x) = λ (x·v)`.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Alternatively, pick `λ = target / K` with `K` measured on the cell.
    #[serde(default)]
    pub kl_target: Option<f64>,
    #[serde(default = "default_direction")]
    pub direction: Vec<f64>,
    #[serde(default = "default_picard_seeds")]
    pub seeds: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "one_f64")]
    pub beta0: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            kl_target: None,
            direction: default_direction(),
            seeds: default_picard_seeds(),
            max_iter: default_max_iter(),
            tol: default_tol(),
            beta0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    /// Radii in units of the lattice spacing.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_atom_seeds")]
    pub seeds: usize,
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self {
            radii: default_radii(),
            seeds: default_atom_seeds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureConfig {
    #[serde(default = "default_fields")]
    pub fields: usize,
}

impl Default for ApertureConfig {
    fn default() -> Self {
        Self {
            fields: default_fields(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Stem of the output files; defaults to the config file stem.
    #[serde(default)]
    pub output: Option<String>,
    pub grid: GridConfig,
    #[serde(default = "identity")]
    pub operator: CoefficientSource,
    #[serde(default)]
    pub tent: TentConfig,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub offdiag: OffDiagConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub atoms: AtomConfig,
    #[serde(default)]
    pub aperture: ApertureConfig,
}

fn one_usize() -> usize {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn default_nodes() -> usize {
    64
}
fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_beta() -> Vec<f64> {
    vec![0.5]
}
fn default_alpha() -> Vec<f64> {
    vec![1.0]
}
fn default_levels() -> Vec<usize> {
    (0..5).collect()
}
fn default_q() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn default_gaps() -> Vec<usize> {
    vec![3, 5, 7, 9]
}
fn default_time_factors() -> Vec<f64> {
    vec![4.0, 6.0, 8.0, 12.0, 16.0]
}
fn default_direction() -> Vec<f64> {
    vec![1.0]
}
fn default_picard_seeds() -> usize {
    4
}
fn default_max_iter() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-6
}
fn default_radii() -> Vec<f64> {
    vec![4.0, 8.0, 16.0]
}
fn default_atom_seeds() -> usize {
    50
}
fn default_fields() -> usize {
    100
}
fn default_trials() -> usize {
    200
}
fn identity() -> CoefficientSource {
    CoefficientSource::Identity
}
fn default_families() -> Vec<Family> {
    vec![Family::Adapted]
}

/// One point of the `(p, β, α, N)` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub p: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("{field}: {msg}"))
}

fn non_empty<T>(field: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(field_error(field, "list must not be empty"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string().trim_end().to_string()))
    }

    /// Grid parameters for one `N`.
    pub fn grid_spec(&self, points: usize) -> GridSpec {
        let mut spec = GridSpec::new(self.grid.n, points).with_nodes(self.grid.nodes);
        spec.side = self.grid.side;
        spec.t_min = self.grid.t_min;
        spec.t_max = self.grid.t_max;
        spec.dt = self.noise.dt;
        if let Some(steps) = self.noise.steps {
            let dt = self.noise.dt.unwrap_or_else(|| {
                let h = self.grid.side / points as f64;
                self.grid.t_min.unwrap_or(h * h) / 2.0
            });
            spec.dt = Some(dt);
            spec.t_max = Some(steps as f64 * dt);
        }
        spec
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &p in &self.tent.p {
            for &beta in &self.tent.beta {
                for &alpha in &self.tent.alpha {
                    for &points in &self.grid.points {
                        out.push(Cell { p, beta, alpha, points });
                    }
                }
            }
        }
        out
    }

    /// Checks every module precondition that can be decided without computing.
    pub fn validate(&self) -> Result<()> {
        non_empty("grid.N", &self.grid.points)?;
        non_empty("tent.p", &self.tent.p)?;
        non_empty("tent.beta", &self.tent.beta)?;
        non_empty("tent.alpha", &self.tent.alpha)?;
        if self.grid.n == 0 {
            return Err(field_error("grid.n", "dimension must be at least 1"));
        }
        if self.grid.nodes < 2 {
            return Err(field_error("grid.M", "need at least 2 time nodes"));
        }
        if let Some(&n) = self.grid.points.iter().find(|&&n| n < 2) {
            return Err(field_error("grid.N", format!("need at least 2 points per axis, got {n}")));
        }
        if let (Some(_), Some(_)) = (self.grid.t_max, self.noise.steps) {
            return Err(field_error("noise.steps", "set either grid.t_max or noise.steps, not both"));
        }
        if self.trials == 0 {
            return Err(field_error("trials", "need at least one trial"));
        }
        if self.noise.d_h == 0 {
            return Err(field_error("noise.d_h", "need at least one H-mode"));
        }
        for &p in &self.tent.p {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(field_error("tent.p", format!("exponent must lie in [1, ∞), got {p}")));
            }
        }
        for &b in &self.tent.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(field_error("tent.beta", format!("weight must be non-negative, got {b}")));
            }
        }
        for &a in &self.tent.alpha {
            if !(a >= 1.0 && a.is_finite()) {
                return Err(field_error("tent.alpha", format!("aperture must be at least 1, got {a}")));
            }
        }
        if self.kind.uses_families() {
            non_empty("families", &self.families)?;
        }
        match self.kind {
            ExperimentKind::ConicalRatio | ExperimentKind::ClassicalVsConical => {
                if let Some(b) = self.tent.beta.iter().find(|b| **b <= 0.0) {
                    return Err(field_error("tent.beta", format!("stochastic ratios need β > 0, got {b}")));
                }
            }
            _ => {}
        }
        match self.kind {
            ExperimentKind::ClassicalVsConical => {
                non_empty("classical.levels", &self.classical.levels)?;
                if let Some(p) = self.tent.p.iter().find(|p| **p >= 2.0) {
                    return Err(field_error("tent.p", format!("classical comparison needs p < 2, got {p}")));
                }
            }
            ExperimentKind::Offdiag => {
                non_empty("offdiag.q", &self.offdiag.q)?;
                if let Some(q) = self.offdiag.q.iter().find(|q| **q != 1.0 && **q != 2.0) {
                    return Err(field_error("offdiag.q", format!("must be 1 or 2, got {q}")));
                }
                if self.offdiag.gaps.iter().any(|g| *g == 0) {
                    return Err(field_error("offdiag.gaps", "gap 0 makes the boxes touch"));
                }
                if self.offdiag.gaps.len() * self.offdiag.time_factors.len() < 8 {
                    return Err(field_error("offdiag", "need at least 8 (gap, time) pairs"));
                }
            }
            ExperimentKind::DeterministicRatio => {
                if let Some(f) = self.families.iter().find(|f| !f.is_deterministic()) {
                    return Err(field_error("families", format!("{} depends on the noise", f.tag())));
                }
                for &p in &self.tent.p {
                    for &b in &self.tent.beta {
                        let th = exponent_threshold(self.grid.n, b);
                        if !(p > th) {
                            return Err(field_error("tent.p", format!("need p > {th} at β = {b}, got {p}")));
                        }
                    }
                }
            }
            ExperimentKind::Picard => {
                let pc = &self.picard;
                if pc.lambda.is_some() == pc.kl_target.is_some() {
                    return Err(field_error("picard", "set exactly one of `lambda` or `kl_target`"));
                }
                if pc.direction.len() != self.grid.n {
                    return Err(field_error("picard.direction", "length must equal grid.n"));
                }
                if pc.seeds == 0 || pc.max_iter == 0 || !(pc.tol > 0.0) {
                    return Err(field_error("picard", "need seeds ≥ 1, max_iter ≥ 1 and tol > 0"));
                }
                if self.noise.d_h != 1 {
                    return Err(field_error("noise.d_h", "the nonlinear problem uses a scalar Brownian motion"));
                }
                if let Some(b) = self.tent.beta.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
                    return Err(field_error("tent.beta", format!("Picard needs β ∈ (0, 1), got {b}")));
                }
                if let Some(p) = self.tent.p.iter().find(|p| **p <= 1.0) {
                    return Err(field_error("tent.p", format!("Picard needs p > 1, got {p}")));
                }
            }
            ExperimentKind::AtomSuite => {
                non_empty("atoms.radii", &self.atoms.radii)?;
                if self.atoms.seeds == 0 {
                    return Err(field_error("atoms.seeds", "need at least one seed"));
                }
                if let Some(r) = self.atoms.radii.iter().find(|r| !(**r >= 1.0)) {
                    return Err(field_error("atoms.radii", format!("radius must be at least one spacing, got {r}")));
                }
            }
            ExperimentKind::ApertureSuite => {
                if self.aperture.fields == 0 {
                    return Err(field_error("aperture.fields", "need at least one field"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
