//! TOML model files.
//!
//! Energies are integers in units of `quantum`; `beta` is in inverse energy units.
//!
//! ```toml
//! beta = 0.6931471805599453
//! quantum = 1.0
//!
//! [system]
//! levels = [[0, 2]]          # [energy, multiplicity]
//! populations = [1.0, 0.0]   # one entry per basis state, levels in order
//!
//! [bath]
//! mode = "concrete"          # or "ideal" with m0
//! lowest = 0
//! highest = 8
//! m_lowest = 1               # or an explicit `levels = [[0, 1], [1, 2], ...]`
//!
//! [weight]
//! spacing = 1
//! max_level = 4
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use singleshot_core::model::{DiagonalState, Level, Spectrum, ThermalContext};
use singleshot_core::shells::{BathModel, Caps, CompositeModel, ConcreteBath, WeightModel};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub beta: f64,
    pub quantum: f64,
    pub system: SystemConfig,
    pub bath: BathConfig,
    pub weight: WeightConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<CapsConfig>,
    /// Target state for `formation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formation: Option<FormationConfig>,
    /// Final and weight states for `transfer-check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub levels: Vec<[u64; 2]>,
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BathMode {
    Ideal,
    Concrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub mode: BathMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<[u64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowest: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highest: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_lowest: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub spacing: u64,
    pub max_level: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsConfig {
    pub shell_dim: usize,
    pub matrix_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationConfig {
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    /// Final system populations; the initial ones are `system.populations`.
    pub system_final: Vec<f64>,
    pub weight_initial: Vec<f64>,
    pub weight_final: Vec<f64>,
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("cannot parse model file: {}", e.message())))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML rendering; parsing it yields the same config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn ctx(&self) -> Result<ThermalContext, CliError> {
        Ok(ThermalContext::new(self.beta)?)
    }

    pub fn system_spectrum(&self) -> Result<Spectrum, CliError> {
        let levels = self.system.levels.iter().map(|&[e, m]| Level::new(e, m)).collect();
        Ok(Spectrum::new(self.quantum, levels)?)
    }

    fn bath_model(&self, ctx: ThermalContext) -> Result<BathModel, CliError> {
        let b = &self.bath;
        match b.mode {
            BathMode::Ideal => {
                if b.levels.is_some() || b.lowest.is_some() || b.highest.is_some() || b.m_lowest.is_some() {
                    return Err(CliError::Config("ideal bath takes only m0".into()));
                }
                let m0 = b.m0.ok_or_else(|| CliError::Config("ideal bath needs m0".into()))?;
                if !(m0.is_finite() && m0 > 0.0) {
                    return Err(CliError::Config(format!("bath m0 must be positive, got {m0}")));
                }
                Ok(BathModel::Ideal { m0 })
            }
            BathMode::Concrete => {
                if b.m0.is_some() {
                    return Err(CliError::Config("concrete bath takes levels or lowest/highest/m_lowest, not m0".into()));
                }
                let bath = match (&b.levels, b.lowest, b.highest, b.m_lowest) {
                    (Some(levels), None, None, None) => {
                        let levels = levels.iter().map(|&[e, m]| Level::new(e, m)).collect();
                        ConcreteBath::new(Spectrum::new(self.quantum, levels)?, ctx)?
                    }
                    (None, Some(lo), Some(hi), Some(m)) => ConcreteBath::exponential(self.quantum, ctx, m, lo, hi)?,
                    _ => {
                        return Err(CliError::Config(
                            "concrete bath needs either `levels` or all of `lowest`, `highest`, `m_lowest`".into(),
                        ))
                    }
                };
                Ok(BathModel::Concrete(bath))
            }
        }
    }

    pub fn build(&self) -> Result<CompositeModel, CliError> {
        let ctx = self.ctx()?;
        let system = self.system_spectrum()?;
        let state = DiagonalState::new(&system, self.system.populations.clone())?;
        let weight = WeightModel::new(self.weight.spacing, self.weight.max_level)?;
        let mut model = CompositeModel::new(system, state, self.bath_model(ctx)?, weight, ctx)?;
        if let Some(t) = self.truncation {
            model = model.with_truncation(t)?;
        }
        if let Some(c) = &self.caps {
            model = model.with_caps(Caps { shell_dim: c.shell_dim, matrix_entries: c.matrix_entries });
        }
        Ok(model)
    }

    /// Converts an energy to a ladder level in quanta, rejecting values off the ladder.
    pub fn weight_level(&self, w: f64) -> Result<u64, CliError> {
        let step = self.weight.spacing as f64 * self.quantum;
        let k = (w / step).round();
        if !(w >= 0.0) || (w / step - k).abs() > 1e-9 || k as u64 > self.weight.max_level {
            return Err(CliError::Infeasible(format!(
                "w = {w} is not on the weight ladder (multiples of {step} up to {})",
                step * self.weight.max_level as f64
            )));
        }
        Ok(k as u64 * self.weight.spacing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
beta = 0.6931471805599453
quantum = 1.0

[system]
levels = [[0, 2]]
populations = [1.0, 0.0]

[bath]
mode = "concrete"
lowest = 0
highest = 6
m_lowest = 1

[weight]
spacing = 1
max_level = 2
"#;

    #[test]
    fn echo_is_idempotent() {
        let c = ModelConfig::parse(SAMPLE).unwrap();
        let again = ModelConfig::parse(&c.canonical()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.canonical(), again.canonical());
        assert_eq!(c.hash(), again.hash());
    }

    #[test]
    fn builds_a_model() {
        let m = ModelConfig::parse(SAMPLE).unwrap().build().unwrap();
        assert_eq!(m.window_shells().unwrap(), vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn rejects_bad_multiplicities_and_unknown_keys() {
        let bad = SAMPLE.replace("lowest = 0\nhighest = 6\nm_lowest = 1", "levels = [[0, 1], [1, 3]]");
        let err = ModelConfig::parse(&bad).unwrap().build().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("multiplicity"));
        assert!(ModelConfig::parse(&SAMPLE.replace("quantum", "quanta")).is_err());
    }

    #[test]
    fn weight_levels() {
        let c = ModelConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.weight_level(1.0).unwrap(), 1);
        assert_eq!(c.weight_level(0.5).unwrap_err().exit_code(), 2);
        assert_eq!(c.weight_level(3.0).unwrap_err().exit_code(), 2);
    }
}
