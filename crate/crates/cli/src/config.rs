use std::path::Path;

use concentra::copula::Band;
use concentra::portfolio::{FeasibleSet, Mode};
use serde::Deserialize;

use crate::CliError;

/// Schema version accepted in `--config` files.
pub const CONFIG_VERSION: u32 = 1;

/// Parameters shared by all commands. Values given on the command line
/// override those read from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: Option<u32>,
    pub p: Option<f64>,
    pub eps: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub measure: Option<String>,
    pub n_points: Option<usize>,
    pub constraints: Option<FeasibleSet>,
    pub mode: Option<Mode>,
    pub length: Option<usize>,
    pub replications: Option<usize>,
    pub band: Option<Band>,
    pub band_sigmas: Option<f64>,
    pub floor: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        match cfg.version {
            Some(CONFIG_VERSION) => Ok(cfg),
            Some(v) => Err(CliError::Input(format!(
                "{}: config version {v} is not supported (expected {CONFIG_VERSION})",
                path.display()
            ))),
            None => Err(CliError::Input(format!("{}: missing \"version\"", path.display()))),
        }
    }

    pub fn level(&self) -> Result<f64, CliError> {
        let p = self
            .p
            .ok_or_else(|| CliError::Input("a level is required (--p or \"p\" in the config)".into()))?;
        if p > 0.0 && p < 1.0 {
            Ok(p)
        } else {
            Err(CliError::Input(format!("p = {p} is outside (0, 1)")))
        }
    }

    pub fn positive(name: &str, v: f64) -> Result<f64, CliError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Input(format!("{name} = {v} must be positive")))
        }
    }

    /// Overlays command-line values.
    pub fn merge(mut self, p: Option<f64>, eps: Option<f64>, seed: Option<u64>) -> Self {
        self.p = p.or(self.p);
        self.eps = eps.or(self.eps);
        self.seed = seed.or(self.seed);
        self
    }
}
