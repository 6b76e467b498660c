//! Scenario files: TOML documents naming a metric, a chart, integrator
//! settings, tolerance overrides and the rays to work on.

use std::path::Path;

use lightray_core::spacetime::{CoordBox, MetricSpec};
use lightray_core::{CauchyChart, SpacetimeModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    GeodesicDemo,
    JacobiSuite,
    ConformalInvariance,
    ContactSuite,
    ReductionSuite,
    NonhausdorffDemo,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::GeodesicDemo => "geodesic_demo",
            ScenarioKind::JacobiSuite => "jacobi_suite",
            ScenarioKind::ConformalInvariance => "conformal_invariance",
            ScenarioKind::ContactSuite => "contact_suite",
            ScenarioKind::ReductionSuite => "reduction_suite",
            ScenarioKind::NonhausdorffDemo => "nonhausdorff_demo",
        }
    }
}

/// The region `V` (a coordinate box) and the slice height `c0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub c0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSpec {
    /// RK4 steps per unit of affine parameter.
    pub n_steps: usize,
    /// Parameter span of each integrated ray; must contain 0.
    pub span: [f64; 2],
    /// Step for finite differences across a family of rays.
    pub ds: f64,
    /// Step for finite differences of the metric.
    pub h_fd: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            n_steps: lightray_core::defaults::STEPS_PER_UNIT,
            span: [-1.0, 1.5],
            ds: 2.5e-3,
            h_fd: lightray_core::defaults::H_FD,
        }
    }
}

impl IntegratorSpec {
    pub fn steps_for(&self, span: (f64, f64)) -> usize {
        ((span.1 - span.0) * self.n_steps as f64).ceil().max(16.0) as usize
    }
}

/// Tolerance overrides; anything omitted keeps its default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub flat: f64,
    pub null_drift: f64,
    pub affine: f64,
    pub geodesic: f64,
    pub pairing: f64,
    pub linearity: f64,
    pub class: f64,
    pub oracle: f64,
    pub contact: f64,
    pub hyperplane: f64,
    pub gauge: f64,
    pub spray: f64,
    pub control: f64,
    pub hamiltonian: f64,
    pub liouville: f64,
    pub two_path: f64,
    pub order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            flat: 1e-12,
            null_drift: 1e-8,
            affine: 1e-9,
            geodesic: 1e-6,
            pairing: 1e-7,
            linearity: 1e-9,
            class: 1e-6,
            oracle: 1e-5,
            contact: lightray_core::defaults::TOL_CONTACT,
            hyperplane: 1e-10,
            gauge: 1e-10,
            spray: 1e-8,
            control: 1e-3,
            hamiltonian: 1e-6,
            liouville: 1e-8,
            two_path: 1e-8,
            order: 1.9,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 17] {
        [
            ("flat", self.flat),
            ("null_drift", self.null_drift),
            ("affine", self.affine),
            ("geodesic", self.geodesic),
            ("pairing", self.pairing),
            ("linearity", self.linearity),
            ("class", self.class),
            ("oracle", self.oracle),
            ("contact", self.contact),
            ("hyperplane", self.hyperplane),
            ("gauge", self.gauge),
            ("spray", self.spray),
            ("control", self.control),
            ("hamiltonian", self.hamiltonian),
            ("liouville", self.liouville),
            ("two_path", self.two_path),
            ("order", self.order),
        ]
    }
}

/// Either a number of random rays or explicit chart coordinates. A missing
/// `[rays]` table means 20 random rays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<Vec<f64>>>,
}

impl Default for RaySpec {
    fn default() -> Self {
        Self {
            count: Some(20),
            list: None,
        }
    }
}

/// Second conformal factor for `conformal_invariance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalSpec {
    pub sigma: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub rays: RaySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal: Option<ConformalSpec>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn field(name: &str, message: impl Into<String>) -> CliError {
    CliError::Field {
        field: name.into(),
        message: message.into(),
    }
}

impl Scenario {
    pub fn from_toml(text: &str, path: &Path) -> CliResult<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> CliResult<()> {
        for (name, value) in self.tolerances.entries() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(field(&format!("tolerances.{name}"), "must be positive and finite"));
            }
        }
        let it = &self.integrator;
        if it.n_steps < 16 {
            return Err(field("integrator.n_steps", "must be at least 16"));
        }
        if !(it.span[0] <= 0.0 && 0.0 <= it.span[1] && it.span[0] < it.span[1]) {
            return Err(field("integrator.span", "must be an interval containing 0"));
        }
        if !(it.ds > 0.0 && it.h_fd > 0.0) {
            return Err(field("integrator", "ds and h_fd must be positive"));
        }
        match (&self.rays.count, &self.rays.list) {
            (Some(_), Some(_)) => return Err(field("rays", "give either `count` or `list`, not both")),
            (None, None) => return Err(field("rays", "give `count` or `list`")),
            _ => {}
        }
        let model = self.model()?;
        let m = model.dim();
        if let Some(list) = &self.rays.list {
            if let Some(bad) = list.iter().position(|c| c.len() != 2 * m - 3) {
                return Err(field(&format!("rays.list[{bad}]"), format!("needs {} chart coordinates", 2 * m - 3)));
            }
        }
        if let Some(c) = &self.chart {
            if c.lo.len() != m || c.hi.len() != m {
                return Err(field("chart", format!("lo and hi need {m} entries")));
            }
        }
        if self.kind == ScenarioKind::ConformalInvariance && self.conformal.is_none() {
            return Err(field("conformal.sigma", "required for conformal_invariance"));
        }
        if let Some(c) = &self.conformal {
            lightray_core::Expr::parse(&c.sigma).map_err(|e| field("conformal.sigma", e.to_string()))?;
        }
        Ok(())
    }

    pub fn model(&self) -> CliResult<SpacetimeModel> {
        let model = self.metric.build().map_err(|e| field("metric", e.to_string()))?;
        Ok(model.with_h_fd(self.integrator.h_fd))
    }

    pub fn chart(&self) -> CliResult<CauchyChart> {
        let model = self.model()?;
        let m = model.dim();
        let (region, c0) = match &self.chart {
            Some(c) => (
                CoordBox::new(c.lo.clone(), c.hi.clone()).map_err(|e| field("chart", e.to_string()))?,
                c.c0,
            ),
            None => {
                let d = model.domain();
                let lo = (0..m).map(|i| d.lo[i].max(-2.0)).collect();
                let hi = (0..m).map(|i| d.hi[i].min(2.0)).collect();
                (CoordBox::new(lo, hi).map_err(|e| field("chart", e.to_string()))?, 0.0)
            }
        };
        CauchyChart::build(&model, region, c0).map_err(|e| field("chart", e.to_string()))
    }
}
