//! Run configuration: one JSON document with a block per module.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certificates::{FtRegularityConfig, KernelLattice, MonitorId, MonitorSet, RhoSource};
use crate::error::{Error, Result};
use crate::evolve::StepperConfig;
use crate::grid::{
    BoundaryMode, EllipticityBounds, Grid, InterfaceState, Scenario, ScenarioSpec,
    DEFAULT_BOUNDARY_TOL,
};
use crate::modulus::{m_required, Family, ModulusSpec};
use crate::quadrature::QuadratureSpec;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub stepper: Option<StepperConfig>,
    #[serde(default)]
    pub modulus: Option<ModulusBlock>,
    #[serde(default)]
    pub monitors: MonitorsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of `dx`, `period` (periodic mode) or `x1` (compact mode, right end) sets the spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    #[serde(default)]
    pub x0: f64,
    pub boundary_mode: BoundaryMode,
    #[serde(default = "default_boundary_tol")]
    pub boundary_tol: f64,
}

fn default_boundary_tol() -> f64 {
    DEFAULT_BOUNDARY_TOL
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        let given = [self.dx.is_some(), self.period.is_some(), self.x1.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(Error::Config(
                "grid: give exactly one of dx, period, x1".into(),
            ));
        }
        if !(self.boundary_tol >= 0.0) {
            return Err(Error::Config(format!(
                "grid: boundary_tol = {}",
                self.boundary_tol
            )));
        }
        match (self.boundary_mode, self.dx, self.period, self.x1) {
            (_, Some(dx), _, _) => Grid::new(self.n, dx, self.x0, self.boundary_mode),
            (BoundaryMode::Periodic, _, Some(p), _) => Grid::periodic(self.x0, p, self.n),
            (BoundaryMode::Compact, _, _, Some(x1)) => Grid::compact(self.x0, x1, self.n),
            _ => Err(Error::Config(
                "grid: `period` is for periodic and `x1` for compact mode".into(),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoWord {
    #[serde(rename = "auto")]
    Auto,
}

/// `"auto"` or an explicit block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModulusBlock {
    Auto(AutoWord),
    Explicit(ModulusConfig),
}

impl ModulusBlock {
    pub fn config(&self) -> ModulusConfig {
        match self {
            ModulusBlock::Auto(_) => ModulusConfig::default(),
            ModulusBlock::Explicit(c) => c.clone(),
        }
    }
}

fn default_a() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    1.0
}

/// Without `delta`/`gamma` the pair is found by the feasibility search.
/// `lambda`, `Lambda`, `slope_sup` default to the values of the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusConfig {
    #[serde(default = "default_family")]
    pub family: Family,
    #[serde(rename = "A", default = "default_a")]
    pub a: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "Lambda", default, skip_serializing_if = "Option::is_none")]
    pub big_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_sup: Option<f64>,
}

fn default_family() -> Family {
    Family::Kiselev
}

impl Default for ModulusConfig {
    fn default() -> Self {
        ModulusConfig {
            family: Family::Kiselev,
            a: 1.0,
            eps: 1.0,
            delta: None,
            gamma: None,
            lambda: None,
            big_lambda: None,
            slope_sup: None,
        }
    }
}

/// Ellipticity constants and slope bound the modulus is built for.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub slope_sup: f64,
}

impl ModulusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::Config(format!("modulus: A = {}", self.a)));
        }
        if self.delta.is_some() != self.gamma.is_some() {
            return Err(Error::Config(
                "modulus: give both delta and gamma, or neither".into(),
            ));
        }
        if self.family == Family::HoelderEps && !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Config(format!(
                "modulus: eps = {} outside (0, 1]",
                self.eps
            )));
        }
        for (k, v) in [
            ("lambda", self.lambda),
            ("Lambda", self.big_lambda),
            ("slope_sup", self.slope_sup),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::Config(format!("modulus: {k} = {v}")));
                }
            }
        }
        if let Some(l) = self.lambda {
            if l <= 0.0 {
                return Err(Error::Config(format!(
                    "modulus: lambda = {l}; beta >= 1 carries no guarantee"
                )));
            }
        }
        Ok(())
    }

    pub fn is_auto(&self) -> bool {
        self.delta.is_none()
    }

    /// Explicit values first, then the initial state's bounds.
    pub fn constants(&self, initial: Option<&EllipticityBounds>) -> Result<Constants> {
        let pick = |v: Option<f64>, from: fn(&EllipticityBounds) -> f64, name: &str| {
            v.or_else(|| initial.map(from)).ok_or_else(|| {
                Error::Config(format!(
                    "modulus: `{name}` is needed when no scenario is given"
                ))
            })
        };
        let c = Constants {
            lambda: pick(self.lambda, |b| b.lambda, "lambda")?,
            big_lambda: pick(self.big_lambda, |b| b.big_lambda, "Lambda")?,
            slope_sup: pick(self.slope_sup, |b| b.slope_sup, "slope_sup")?,
        };
        if c.slope_sup < 0.0 || (c.lambda > 0.0 && c.big_lambda < c.lambda) {
            return Err(Error::Config(format!(
                "modulus: inconsistent constants {c:?}"
            )));
        }
        Ok(c)
    }

    /// The explicitly configured ω, if δ and γ are given.
    pub fn fixed_spec(&self, c: &Constants) -> Result<Option<ModulusSpec>> {
        let (Some(delta), Some(gamma)) = (self.delta, self.gamma) else {
            return Ok(None);
        };
        let spec = ModulusSpec {
            family: self.family,
            delta,
            gamma,
            eps: self.eps,
            rescale: None,
            slope_sup: c.slope_sup,
            a: self.a,
            m: m_required(self.a, c.slope_sup, c.lambda),
            lambda: c.lambda,
            big_lambda: c.big_lambda,
        };
        spec.validate()
            .map_err(|e| Error::Config(format!("modulus: {e}")))?;
        Ok(Some(spec))
    }
}

fn default_enabled() -> Vec<MonitorId> {
    vec![
        MonitorId::MaxPrinciple,
        MonitorId::Ellipticity,
        MonitorId::Modulus,
        MonitorId::CurvatureDecay,
        MonitorId::FtRegularity,
    ]
}

fn default_difference_samples() -> usize {
    4096
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorsConfig {
    #[serde(default = "default_enabled")]
    pub enabled: Vec<MonitorId>,
    #[serde(default)]
    pub tolerances: BTreeMap<MonitorId, f64>,
    #[serde(default)]
    pub lattice: KernelLattice,
    #[serde(default)]
    pub ft_regularity: FtRegularityConfig,
    #[serde(default = "default_difference_samples")]
    pub difference_samples: usize,
}

impl Default for MonitorsConfig {
    fn default() -> Self {
        MonitorsConfig {
            enabled: default_enabled(),
            tolerances: BTreeMap::new(),
            lattice: KernelLattice::default(),
            ft_regularity: FtRegularityConfig::default(),
            difference_samples: default_difference_samples(),
        }
    }
}

impl MonitorsConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some((k, v)) = self
            .tolerances
            .iter()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::Config(format!(
                "monitors: tolerance {v} for {}",
                k.as_str()
            )));
        }
        if self.lattice.nx == 0
            || self.lattice.nh == 0
            || !(self.lattice.h_min_cells > 0.0)
            || !(self.lattice.h_max_fraction > 0.0)
        {
            return Err(Error::Config(
                "monitors: empty or degenerate kernel lattice".into(),
            ));
        }
        let f = &self.ft_regularity;
        if f.pairs == 0
            || !(f.factor >= 1.0)
            || f.ranges
                .iter()
                .any(|r| !(r.0 > 0.0 && r.1 > r.0 && r.1 < 1.0))
        {
            return Err(Error::Config(
                "monitors: ft_regularity needs pairs > 0, factor ≥ 1 and ranges inside (0, 1)"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn monitor_set(&self, rho: RhoSource, omega: Option<ModulusSpec>) -> MonitorSet {
        let mut enabled = Vec::new();
        for id in &self.enabled {
            if !enabled.contains(id) {
                enabled.push(*id);
            }
        }
        MonitorSet {
            enabled,
            tolerances: self.tolerances.clone(),
            rho,
            omega,
            lattice: self.lattice,
            ft: self.ft_regularity,
            difference_samples: self.difference_samples,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_out_stride() -> usize {
    1
}

/// `stride` thins the state files: every stride-th snapshot (and the last) is written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_out_stride")]
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            stride: default_out_stride(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} (this build reads {SCHEMA_VERSION})",
                c.schema_version
            )));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates the blocks shared by all commands.
    pub fn validate_common(&self) -> Result<()> {
        self.monitors.validate()?;
        if self.output.stride == 0 {
            return Err(Error::Config("output: stride must be positive".into()));
        }
        if let Some(m) = &self.modulus {
            m.config().validate()?;
        }
        if let Some(g) = &self.grid {
            let grid = g.build()?;
            self.quadrature.validate(&grid)?;
        }
        if let Some(s) = &self.stepper {
            s.validate()?;
        }
        if let Some(s) = &self.scenario {
            Scenario::parse(&s.name, &s.params)?;
        }
        Ok(())
    }

    /// Initial state from the scenario and grid blocks, if both are present.
    pub fn initial_state(&self) -> Result<Option<InterfaceState>> {
        match (&self.scenario, &self.grid) {
            (Some(s), Some(g)) => {
                let grid = g.build()?;
                Ok(Some(
                    Scenario::parse(&s.name, &s.params)?.sample(&grid, g.boundary_tol)?,
                ))
            }
            (None, None) => Ok(None),
            _ => Err(Error::Config(
                "scenario and grid blocks come together".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "scenario": {"name": "gaussian", "params": {"amplitude": 1.0}},
        "grid": {"n": 401, "x0": -20.0, "x1": 20.0, "boundary_mode": "compact"},
        "stepper": {"t_end": 0.5},
        "modulus": "auto",
        "monitors": {"tolerances": {"max-principle": 1e-4}},
        "output": {"dir": "runs/g"}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_json(SAMPLE).unwrap();
        c.validate_common().unwrap();
        assert_eq!(c.modulus, Some(ModulusBlock::Auto(AutoWord::Auto)));
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.grid.as_ref().unwrap().build().unwrap().dx(), 0.1);
    }

    #[test]
    fn rejects_unknown_and_inconsistent_blocks() {
        assert!(RunConfig::from_json(r#"{"stepper": {"t_end": 1, "bogus": 2}}"#).is_err());
        let c = RunConfig::from_json(
            r#"{"grid": {"n": 64, "dx": 0.1, "x1": 3, "boundary_mode": "compact"}}"#,
        )
        .unwrap();
        assert!(c.validate_common().is_err());
        let c = RunConfig::from_json(r#"{"modulus": {"lambda": 0.0}}"#).unwrap();
        assert!(c.validate_common().is_err());
        let c = RunConfig::from_json(r#"{"modulus": {"delta": 0.1}}"#).unwrap();
        assert!(c.validate_common().is_err());
        assert!(RunConfig::from_json(r#"{"schema_version": 7}"#).is_err());
    }
}
