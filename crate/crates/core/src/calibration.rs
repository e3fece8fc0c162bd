//! Dataset creation, fuzzy step and assembly of `M` and `S`.
//!
//! For each basis state the register is prepared and read out `t` times.
//! FCM clusters each dataset's probability vectors; the instance with the
//! most evenly spread membership becomes that basis state's column of `M`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::circuit::{ideal_distribution_from, Circuit};
use crate::error::{Error, Result};
use crate::fcm::{most_uncertain_instance, select_best_c, Dataset, FcmConfig, FuzzyPartition};
use crate::linalg::Matrix;
use crate::matrices::{invert_calibration, CalibrationMatrix, InversionMethod, InversionPolicy, MitigationMatrix, Provenance};
use crate::noise::{sample_noisy_counts, NoiseModel};
use crate::register::{counts_to_probability, OutcomeCounts, RegisterSpec};
use crate::rng::{StreamSeed, TAG_CALIBRATION};

pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

pub const SELECTION_RULE: &str = "fcm-best-fpc/max-membership-entropy";

/// One imported experiment: `{"basis_state": "01", "shots": 760, "counts": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRecord {
    pub basis_state: String,
    pub shots: u64,
    pub counts: Vec<u64>,
}

pub fn read_count_records(path: &Path) -> Result<Vec<CountRecord>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Simulator(NoiseModel),
    /// External counts, e.g. from hardware. Records for one basis state are
    /// taken in file order.
    Imported(Vec<CountRecord>),
}

/// Summary of the source stored in the calibration artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceInfo {
    Simulator { noise: NoiseModel },
    Imported { records: usize },
}

impl DatasetSource {
    pub fn info(&self) -> SourceInfo {
        match self {
            DatasetSource::Simulator(noise) => SourceInfo::Simulator { noise: noise.clone() },
            DatasetSource::Imported(records) => SourceInfo::Imported { records: records.len() },
        }
    }
}

/// Builds one dataset per basis state, in basis index order.
///
/// Simulated experiment `e` of basis state `b` samples from stream
/// `seed.path(TAG_CALIBRATION, [b, e])`.
pub fn build_datasets(
    register: &RegisterSpec,
    source: &DatasetSource,
    t: usize,
    shots: u64,
    seed: StreamSeed,
) -> Result<Vec<Dataset>> {
    if t == 0 {
        return Err(Error::Config("t must be at least 1".into()));
    }
    if shots == 0 {
        return Err(Error::EmptyExperiment);
    }
    let dim = register.dimension();
    match source {
        DatasetSource::Simulator(noise) => {
            noise.validate()?;
            let init = Circuit::empty("initialization", register.clone());
            (0..dim)
                .into_par_iter()
                .map(|b| {
                    let ideal = ideal_distribution_from(&init, b)?;
                    let label = register.basis_label(b);
                    let mut instances = Vec::with_capacity(t);
                    let mut ids = Vec::with_capacity(t);
                    for e in 0..t {
                        let stream = seed.path(TAG_CALIBRATION, &[b as u64, e as u64]);
                        let counts = sample_noisy_counts(&ideal, noise, shots, stream)?;
                        instances.push(counts_to_probability(&counts)?.into_values());
                        ids.push(format!("calib/{:04}/{label}/{e}", b * t + e));
                    }
                    Dataset::new(register.clone(), b, instances, ids)
                })
                .collect()
        }
        DatasetSource::Imported(records) => {
            let mut grouped: Vec<(Vec<Vec<f64>>, Vec<String>)> = vec![(vec![], vec![]); dim];
            for (i, rec) in records.iter().enumerate() {
                let b = register.parse_basis(&rec.basis_state)?;
                if rec.counts.len() != dim {
                    return Err(Error::Import(format!(
                        "record {i} has {} counts for a {dim}-outcome register",
                        rec.counts.len()
                    )));
                }
                if rec.shots != shots {
                    return Err(Error::Import(format!("record {i} has {} shots, expected {shots}", rec.shots)));
                }
                let counts = OutcomeCounts::new(register.clone(), rec.counts.clone())?;
                if counts.shots() != rec.shots {
                    return Err(Error::Import(format!(
                        "record {i} counts sum to {}, declared {}",
                        counts.shots(),
                        rec.shots
                    )));
                }
                grouped[b].0.push(counts_to_probability(&counts)?.into_values());
                grouped[b].1.push(format!("import/{i:04}/{}", rec.basis_state));
            }
            grouped
                .into_iter()
                .enumerate()
                .map(|(b, (instances, ids))| {
                    if instances.len() != t {
                        return Err(Error::Import(format!(
                            "basis state {} has {} records, expected {t}",
                            register.basis_label(b),
                            instances.len()
                        )));
                    }
                    Dataset::new(register.clone(), b, instances, ids)
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyStep {
    pub partitions: Vec<FuzzyPartition>,
    pub selected_indices: Vec<usize>,
}

/// Per dataset: best-`C` partition, then its most uncertain instance.
pub fn run_fuzzy_step(datasets: &[Dataset], cfg: &FcmConfig) -> Result<FuzzyStep> {
    cfg.validate()?;
    let needed = cfg.max_candidate();
    if let Some(d) = datasets.iter().find(|d| d.len() < needed) {
        return Err(Error::MoreClustersThanInstances { clusters: needed, instances: d.len() });
    }
    let partitions: Vec<FuzzyPartition> =
        datasets.par_iter().map(|d| select_best_c(d, cfg)).collect::<Result<_>>()?;
    let selected_indices = partitions.iter().map(most_uncertain_instance).collect();
    Ok(FuzzyStep { partitions, selected_indices })
}

/// Column `i` of `M` is the selected instance of dataset `i`.
pub fn assemble_calibration(datasets: &[Dataset], selected_indices: &[usize]) -> Result<CalibrationMatrix> {
    let register = datasets.first().ok_or(Error::DatasetOrder)?.register().clone();
    if datasets.len() != register.dimension() || selected_indices.len() != datasets.len() {
        return Err(Error::DimensionMismatch { expected: register.dimension(), found: datasets.len() });
    }
    if datasets.iter().enumerate().any(|(i, d)| d.basis_index() != i || d.register() != &register) {
        return Err(Error::DatasetOrder);
    }
    let mut columns = Vec::with_capacity(datasets.len());
    let mut ids = Vec::with_capacity(datasets.len());
    for (d, &j) in datasets.iter().zip(selected_indices) {
        let x = d.instances().get(j).ok_or_else(|| {
            Error::InvalidCalibration(format!("selected instance {j} out of range for dataset {}", d.basis_state()))
        })?;
        columns.push(x.clone());
        ids.push(d.experiment_ids()[j].clone());
    }
    let provenance = Provenance { selection_rule: SELECTION_RULE.into(), dataset_ids: ids, timestamp: None };
    CalibrationMatrix::from_columns(register, &columns, provenance)
}

/// Persisted outcome of a full calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRun {
    pub schema_version: u32,
    pub register: RegisterSpec,
    pub t_experiments: usize,
    pub shots: u64,
    pub seed: StreamSeed,
    pub source: SourceInfo,
    pub fcm_config: FcmConfig,
    pub datasets: Vec<Dataset>,
    pub partitions: Vec<FuzzyPartition>,
    pub selected_indices: Vec<usize>,
    pub chosen_c: Vec<usize>,
    pub calibration: CalibrationMatrix,
    pub mitigation: MitigationMatrix,
    /// Effective tool configuration, when produced from the command line.
    #[serde(default)]
    pub config: Value,
}

impl CalibrationRun {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let run: CalibrationRun = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if run.schema_version != CALIBRATION_SCHEMA_VERSION {
            return Err(Error::Import(format!("unsupported calibration schema_version {}", run.schema_version)));
        }
        run.verify()?;
        Ok(run)
    }

    /// Re-checks the artifact's internal consistency.
    pub fn verify(&self) -> Result<()> {
        if self.datasets.len() != self.register.dimension() {
            return Err(Error::InvalidCalibration("one dataset per basis state required".into()));
        }
        for (i, (d, &j)) in self.datasets.iter().zip(&self.selected_indices).enumerate() {
            if j >= d.len() || d.instances()[j] != self.calibration.matrix().column(i) {
                return Err(Error::InvalidCalibration(format!("column {i} is not the selected instance")));
            }
        }
        if self.mitigation.method() == InversionMethod::Lu {
            let product = self.mitigation.matrix().mul(self.calibration.matrix());
            let err = product.max_abs_diff(&Matrix::identity(self.register.dimension()));
            if err > 1e-9 {
                return Err(Error::InvalidCalibration(format!("S*M deviates from identity by {err:e}")));
            }
        }
        Ok(())
    }
}

/// Full pipeline: datasets, fuzzy step, `M`, `S`.
pub fn calibrate(
    register: &RegisterSpec,
    source: &DatasetSource,
    t: usize,
    shots: u64,
    cfg: &FcmConfig,
    seed: StreamSeed,
    policy: InversionPolicy,
) -> Result<CalibrationRun> {
    cfg.validate()?;
    if t < cfg.max_candidate() {
        return Err(Error::MoreClustersThanInstances { clusters: cfg.max_candidate(), instances: t });
    }
    let datasets = build_datasets(register, source, t, shots, seed)?;
    let step = run_fuzzy_step(&datasets, cfg)?;
    let calibration = assemble_calibration(&datasets, &step.selected_indices)?;
    let mitigation = invert_calibration(&calibration, policy)?;
    let chosen_c = step.partitions.iter().map(FuzzyPartition::clusters).collect();
    Ok(CalibrationRun {
        schema_version: CALIBRATION_SCHEMA_VERSION,
        register: register.clone(),
        t_experiments: t,
        shots,
        seed,
        source: source.info(),
        fcm_config: cfg.clone(),
        datasets,
        partitions: step.partitions,
        selected_indices: step.selected_indices,
        chosen_c,
        calibration,
        mitigation,
        config: Value::Null,
    })
}
