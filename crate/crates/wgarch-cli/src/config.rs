//! On-disk input formats. Everything is strict JSON: unknown keys are
//! rejected so a mistyped field can never silently fall back to a
//! default.

use serde::{Deserialize, Serialize};
use wgarch::params::{ContinuousParams, DiscreteGarchParams, KurtosisSpec};
use wgarch::pricing::OptionSpec;
use wgarch::simulate::SimConfig;

/// Discrete GARCH parameters with their unconditional kurtosis: the
/// aggregation commands' input and output, and the limit command's input.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteParamsFile {
    pub params: DiscreteGarchParams,
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_factor: Option<f64>,
}

/// Continuous parameters with the limiting unconditional kurtosis: the
/// discretize command's input and the limit command's output.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousParamsFile {
    pub params: ContinuousParams,
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconsistent: Option<bool>,
}

/// Full input of one simulate/price/smile run. `option` and `strikes`
/// are only needed by the pricing commands; `maturities` defaults to the
/// option template's maturity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub continuous: ContinuousParams,
    #[serde(default)]
    pub kurtosis: KurtosisSpec,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<OptionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strikes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturities: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// Default strike grid: moneyness 0.7 to 1.3 in 13 points.
    pub fn resolved_strikes(&self, spot: f64) -> Vec<f64> {
        match &self.strikes {
            Some(s) => s.clone(),
            None => (0..13).map(|i| spot * (0.70 + 0.05 * i as f64)).collect(),
        }
    }
}
