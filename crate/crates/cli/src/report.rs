//! Report documents and their JSON and CSV renderings.

use serde::Serialize;
use serde_json::Value;

use crate::config::ModelConfig;
use crate::CliError;

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub inputs: Inputs,
    pub conventions: Conventions,
    pub results: Value,
    pub series: Vec<Series>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Inputs {
    pub model: ModelConfig,
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Flags {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub w: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    /// Trace distance is `trace_norm_factor · ‖ρ − σ‖₁`.
    pub trace_norm_factor: f64,
    pub entropy_unit: &'static str,
    pub boltzmann_constant: f64,
    /// Energies in the model file are integer multiples of this.
    pub energy_quantum: f64,
}

impl Conventions {
    pub fn new(quantum: f64) -> Self {
        Conventions { trace_norm_factor: 0.5, entropy_unit: "nats", boltzmann_constant: 1.0, energy_quantum: quantum }
    }
}

/// `(x, y)` data for external plotting.
#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub name: String,
    pub x: String,
    pub y: String,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub version: &'static str,
    pub config_sha256: String,
}

impl Report {
    pub fn new(command: &str, config: &ModelConfig, flags: Flags, results: impl Serialize) -> Result<Self, CliError> {
        let seed = flags.seed;
        Ok(Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_owned(),
            conventions: Conventions::new(config.quantum),
            inputs: Inputs { model: config.clone(), flags },
            results: to_value(results)?,
            series: Vec::new(),
            provenance: Provenance { seed, version: env!("CARGO_PKG_VERSION"), config_sha256: config.hash() },
        })
    }

    pub fn with_series(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// One `path,value` row per leaf of the JSON document, keys in sorted order.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let doc = to_value(self)?;
        let mut rows = Vec::new();
        flatten("", &doc, &mut rows);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "value"]).map_err(|e| CliError::Io(e.to_string()))?;
        for (k, v) in rows {
            w.write_record([k, v]).map_err(|e| CliError::Io(e.to_string()))?;
        }
        String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn to_value(v: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_owned() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_owned(), s.clone())),
        // Numbers keep serde_json's rendering so both formats carry identical digits.
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}
