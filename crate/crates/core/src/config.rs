//! Run configuration: TOML file plus command-line overrides.
//!
//! Every experiment reads one resolved `Config`; the manifest echoes it back
//! so a run can be reproduced from its output directory alone.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::KropinaError;
use crate::integrate::IntegratorConfig;
use crate::navigation::{KropinaMetric, NavigationData};
use crate::scenario::{constant_wind_nav, generalized_nav, scaled_nav};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricChoice {
    Original,
    Generalized,
    Both,
}

impl MetricChoice {
    pub fn wants_original(self) -> bool {
        matches!(self, MetricChoice::Original | MetricChoice::Both)
    }

    pub fn wants_generalized(self) -> bool {
        matches!(self, MetricChoice::Generalized | MetricChoice::Both)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    /// Builtin scenario: "swirl", "constant-wind", or "uniform-speed".
    pub id: String,
    pub metric: MetricChoice,
    /// Wind vector for "constant-wind".
    pub wind: [f64; 2],
    /// Wind strength for "uniform-speed".
    pub speed: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            id: "swirl".to_string(),
            metric: MetricChoice::Both,
            wind: [1.0, 0.0],
            speed: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub origin: [f64; 2],
    /// Heading for single-ray experiments.
    pub phi0: f64,
    pub phi_start: f64,
    pub dphi: f64,
    pub count: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            origin: [0.0, 0.0],
            phi0: 0.0,
            phi_start: 0.0,
            dphi: PI / 8.0,
            count: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrateSection {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub output_stride: f64,
}

impl Default for IntegrateSection {
    fn default() -> Self {
        IntegrateSection {
            t_end: 10.0,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            output_stride: 0.01,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsochroneSection {
    pub times: Vec<f64>,
    /// Headings per metric in the sweep behind the fronts.
    pub count: usize,
}

impl Default for IsochroneSection {
    fn default() -> Self {
        IsochroneSection {
            times: vec![1.0, 2.0, 3.0],
            count: 256,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReachableSection {
    pub dphi: f64,
    pub t_end: f64,
    pub alpha_factor: f64,
    /// Decimation cell size; 0 picks half the alpha radius.
    pub snap: f64,
}

impl Default for ReachableSection {
    fn default() -> Self {
        ReachableSection {
            dphi: PI / 180.0,
            t_end: 50.0,
            alpha_factor: 2.0,
            snap: 0.0,
        }
    }
}

/// The long-horizon sweep settings enabled by `--full-scale`.
pub const FULL_SCALE_DPHI: f64 = PI / 720.0;
pub const FULL_SCALE_T_END: f64 = 500.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Explicit targets; when empty they are sampled from the slow fan.
    pub targets: Vec<[f64; 2]>,
    pub sample_t: f64,
    pub sample_count: usize,
    /// Horizon for the shooting runs.
    pub t_end: f64,
    /// Step tolerance for shooting; the heading search, not the integrator,
    /// limits the accuracy of the reported times.
    pub rel_tol: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            targets: Vec::new(),
            sample_t: 3.0,
            sample_count: 8,
            t_end: 6.0,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".to_string(),
            svg: false,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub scenario: ScenarioSection,
    pub sweep: SweepSection,
    pub integrate: IntegrateSection,
    pub isochrone: IsochroneSection,
    pub reachable: ReachableSection,
    pub compare: CompareSection,
    pub output: OutputSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, KropinaError> {
        toml::from_str(text).map_err(|e| KropinaError::Config {
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Config, KropinaError> {
        let text = std::fs::read_to_string(path).map_err(|e| KropinaError::Config {
            detail: format!("{}: {e}", path.display()),
        })?;
        Config::from_toml(&text)
    }

    /// Navigation data of the configured scenario (the "generalized" side).
    pub fn scenario_nav(&self) -> Result<NavigationData, KropinaError> {
        match self.scenario.id.as_str() {
            "swirl" => Ok(generalized_nav()),
            "constant-wind" => Ok(constant_wind_nav(self.scenario.wind)),
            "uniform-speed" => Ok(scaled_nav(self.scenario.speed)),
            other => Err(KropinaError::Config {
                detail: format!(
                    "unknown scenario id {other:?}; expected swirl, constant-wind, or uniform-speed"
                ),
            }),
        }
    }

    /// The metric pair for the configured scenario: the scenario data itself
    /// and its full-speed companion with the wind rescaled to unit strength.
    pub fn metric_pair(&self) -> Result<(KropinaMetric, KropinaMetric), KropinaError> {
        let nav = self.scenario_nav()?;
        let original = KropinaMetric::new(nav.unit_wind_data());
        let generalized = KropinaMetric::new(nav);
        Ok((original, generalized))
    }

    pub fn integrator(&self, t_end: f64) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.integrate.rel_tol,
            abs_tol: self.integrate.abs_tol,
            t_end,
            output_stride: self.integrate.output_stride,
            ..IntegratorConfig::default()
        }
    }
}
