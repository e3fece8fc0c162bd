//! Tool configuration: one strict JSON document plus dotted overrides.
//!
//! Every section is optional; absent keys take their defaults, unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::{BenchmarkPlan, CalibrationSource};
use crate::circuit::{builtin_circuit, Circuit};
use crate::error::{Error, Result};
use crate::fcm::FcmConfig;
use crate::matrices::InversionPolicy;
use crate::metrics::HellingerConvention;
use crate::mitigation::NegativityPolicy;
use crate::noise::NoiseModel;
use crate::register::RegisterSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    /// Master seed for all sampling.
    pub seed: u64,
    pub register: RegisterSpec,
    pub noise: NoiseSection,
    pub fcm: FcmConfig,
    pub calibration: CalibrationSection,
    pub benchmark: BenchmarkSection,
    pub io: IoSection,
    pub conventions: Conventions,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            register: RegisterSpec::q0_q2(),
            noise: NoiseSection::default(),
            fcm: FcmConfig::default(),
            calibration: CalibrationSection::default(),
            benchmark: BenchmarkSection::default(),
            io: IoSection::default(),
            conventions: Conventions::default(),
        }
    }
}

/// Either a named preset or an explicit model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub preset: Option<String>,
    pub model: Option<NoiseModel>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { preset: Some("paper-like".into()), model: None }
    }
}

impl NoiseSection {
    pub fn resolve(&self, register: &RegisterSpec) -> Result<NoiseModel> {
        match (&self.preset, &self.model) {
            (Some(name), None) => NoiseModel::preset(name, register),
            (None, Some(model)) => {
                model.validate()?;
                Ok(model.clone())
            }
            _ => Err(Error::Config("noise needs exactly one of `preset` or `model`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub t: usize,
    pub shots: u64,
    /// Imported count records; when set, calibration uses them instead of
    /// the simulator.
    pub records: Option<PathBuf>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { t: 10, shots: 760, records: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    /// Built-in circuit names or paths to circuit files.
    pub circuits: Vec<String>,
    /// Basis-state labels; empty means all of them.
    pub initial_states: Vec<String>,
    pub repetitions: usize,
    pub shots: u64,
    pub calibration: CalibrationSource,
    pub recalibrate_per_repetition: bool,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            circuits: ["h-x45-x90", "h-y90", "cnot", "h-cnot"].map(String::from).to_vec(),
            initial_states: Vec::new(),
            repetitions: 5,
            shots: 760,
            calibration: CalibrationSource::Fresh,
            recalibrate_per_repetition: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub out_dir: PathBuf,
}

impl Default for IoSection {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Conventions {
    pub hellinger: HellingerConvention,
    pub negativity: NegativityPolicy,
    pub inversion: InversionPolicy,
}

impl ToolConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. An artifact carrying an embedded `config`
    /// object (calibration or benchmark output) yields that config.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        match value {
            Value::Object(mut map) if map.contains_key("schema_version") => match map.remove("config") {
                Some(cfg @ Value::Object(_)) => Self::from_value(cfg),
                _ => Err(Error::Config(format!("{} embeds no config", path.display()))),
            },
            other => Self::from_value(other),
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Applies `key.path=value` overrides. Values parse as JSON, falling back
    /// to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut value = self.to_value();
        for item in overrides {
            set_dotted(&mut value, item.as_ref())?;
        }
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        self.fcm.validate()?;
        self.noise.resolve(&self.register)?;
        if self.calibration.shots == 0 || self.benchmark.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        Ok(())
    }

    pub fn benchmark_plan(&self) -> Result<BenchmarkPlan> {
        let circuits = self
            .benchmark
            .circuits
            .iter()
            .map(|c| resolve_circuit(c))
            .collect::<Result<Vec<_>>>()?;
        let initial_states = if self.benchmark.initial_states.is_empty() {
            (0..self.register.dimension()).map(|i| self.register.basis_label(i)).collect()
        } else {
            self.benchmark.initial_states.clone()
        };
        let plan = BenchmarkPlan {
            register: self.register.clone(),
            circuits,
            initial_states,
            repetitions: self.benchmark.repetitions,
            shots: self.benchmark.shots,
            noise: self.noise.resolve(&self.register)?,
            calibration: self.benchmark.calibration.clone(),
            recalibrate_per_repetition: self.benchmark.recalibrate_per_repetition,
            t_experiments: self.calibration.t,
            calibration_shots: self.calibration.shots,
            fcm: self.fcm.clone(),
            inversion: self.conventions.inversion,
            negativity: self.conventions.negativity,
            convention: self.conventions.hellinger,
            master_seed: self.seed,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// A built-in circuit name or a path to a circuit file.
pub fn resolve_circuit(spec: &str) -> Result<Circuit> {
    if let Some(c) = builtin_circuit(spec) {
        return Ok(c);
    }
    let path = Path::new(spec);
    if path.exists() {
        return Circuit::from_json(&std::fs::read_to_string(path)?);
    }
    Err(Error::Config(format!("unknown circuit {spec:?}: neither a built-in name nor a file")))
}

fn set_dotted(root: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("override key {key:?} has an empty segment")));
        }
        let map = match node {
            Value::Object(map) => map,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().unwrap()
            }
            _ => return Err(Error::Config(format!("override key {key:?} descends into a non-object"))),
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one segment")
}
