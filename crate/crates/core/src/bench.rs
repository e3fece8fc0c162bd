//! Validation benchmark: circuits x initial states x repetitions, scored
//! with and without mitigation, plus the calibration stability report.
//!
//! Result files:
//! - `bench_result.jsonl`: one [`BenchRecord`] per line, in plan order
//!   (circuit, then state, then repetition);
//! - `bench_summary.json`: [`BenchSummary`];
//! - `bench_fidelity.csv`: one row per (circuit, state) with both fidelities;
//! - `bench_table.txt`: the printed summary table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calibration::{calibrate, CalibrationRun, DatasetSource};
use crate::circuit::{builtin_circuits, ideal_distribution_from, Circuit};
use crate::error::{Error, Result};
use crate::fcm::{Dataset, FcmConfig};
use crate::matrices::InversionPolicy;
use crate::metrics::{hellinger_fidelity, improvement_stats, FidelityReport, HellingerConvention, ImprovementSummary, RepetitionFidelity};
use crate::mitigation::{mitigate, MitigatedResult, NegativityPolicy};
use crate::noise::{sample_noisy_counts_detailed, NoiseModel, RealizedNoise};
use crate::register::{counts_to_probability, RegisterSpec};
use crate::rng::{StreamSeed, TAG_BENCH, TAG_CALIBRATION};

pub const BENCH_SCHEMA_VERSION: u32 = 1;

pub const RESULT_FILE: &str = "bench_result.jsonl";
pub const SUMMARY_FILE: &str = "bench_summary.json";
pub const CSV_FILE: &str = "bench_fidelity.csv";
pub const TABLE_FILE: &str = "bench_table.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CalibrationSource {
    /// Calibrate under the plan's noise model before benchmarking.
    Fresh,
    /// Load a persisted calibration artifact.
    Reuse { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkPlan {
    pub register: RegisterSpec,
    pub circuits: Vec<Circuit>,
    pub initial_states: Vec<String>,
    pub repetitions: usize,
    pub shots: u64,
    pub noise: NoiseModel,
    pub calibration: CalibrationSource,
    /// Build a new calibration for every repetition instead of one shared `S`.
    pub recalibrate_per_repetition: bool,
    pub t_experiments: usize,
    pub calibration_shots: u64,
    pub fcm: FcmConfig,
    pub inversion: InversionPolicy,
    pub negativity: NegativityPolicy,
    pub convention: HellingerConvention,
    pub master_seed: u64,
}

impl BenchmarkPlan {
    /// Built-in circuits, all basis states, 5 repetitions of 760 shots,
    /// fresh calibration with `t = 10`.
    pub fn default_for(noise: NoiseModel, master_seed: u64) -> Self {
        let register = RegisterSpec::q0_q2();
        let initial_states = (0..register.dimension()).map(|i| register.basis_label(i)).collect();
        Self {
            register,
            circuits: builtin_circuits(),
            initial_states,
            repetitions: 5,
            shots: 760,
            noise,
            calibration: CalibrationSource::Fresh,
            recalibrate_per_repetition: false,
            t_experiments: 10,
            calibration_shots: 760,
            fcm: FcmConfig::default(),
            inversion: InversionPolicy::default(),
            negativity: NegativityPolicy::default(),
            convention: HellingerConvention::default(),
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Plan("repetitions must be at least 1".into()));
        }
        if self.shots == 0 {
            return Err(Error::Plan("shots must be at least 1".into()));
        }
        if self.circuits.is_empty() || self.initial_states.is_empty() {
            return Err(Error::Plan("plan has no circuits or no initial states".into()));
        }
        if let Some(c) = self.circuits.iter().find(|c| c.register() != &self.register) {
            return Err(Error::Plan(format!("circuit {} is over {}, plan register is {}", c.name(), c.register(), self.register)));
        }
        if self.negativity == NegativityPolicy::RawOnly {
            return Err(Error::Plan("raw-only negativity policy produces no distribution to score".into()));
        }
        if matches!(self.calibration, CalibrationSource::Reuse { .. }) && self.recalibrate_per_repetition {
            return Err(Error::Plan("per-repetition recalibration needs a fresh calibration source".into()));
        }
        for s in &self.initial_states {
            self.register.parse_basis(s)?;
        }
        self.noise.validate()?;
        self.fcm.validate()
    }

    /// Stream for calibration round `round`. A single shared calibration uses
    /// the bare master seed, matching a stand-alone calibration run.
    pub fn calibration_seed(&self, round: usize) -> StreamSeed {
        let base = StreamSeed::new(self.master_seed);
        if self.recalibrate_per_repetition {
            base.child(TAG_CALIBRATION, round as u64)
        } else {
            base
        }
    }

    /// Stream of one benchmark cell, keyed by circuit name and basis index so
    /// that filtering the plan leaves the remaining cells unchanged.
    pub fn cell_seed(&self, circuit: &str, basis_index: usize, rep: usize) -> StreamSeed {
        StreamSeed::new(self.master_seed).path(TAG_BENCH, &[name_key(circuit), basis_index as u64, rep as u64])
    }
}

/// FNV-1a.
fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub circuit: String,
    pub initial_state: String,
    pub rep: usize,
    pub seed: StreamSeed,
    pub calibration_round: usize,
    pub ideal: Vec<f64>,
    pub noisy_counts: Vec<u64>,
    pub realized_noise: RealizedNoise,
    pub mitigated: MitigatedResult,
    pub hf_unmitigated: f64,
    pub hf_mitigated: f64,
}

/// Digest of one calibration used by the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDigest {
    pub round: usize,
    pub calibration: Vec<Vec<f64>>,
    pub mitigation: Vec<Vec<f64>>,
    pub condition_number: f64,
    pub chosen_c: Vec<usize>,
    pub selected_indices: Vec<usize>,
}

impl CalibrationDigest {
    fn of(round: usize, run: &CalibrationRun) -> Self {
        let rows = |m: &crate::linalg::Matrix| (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
        Self {
            round,
            calibration: rows(run.calibration.matrix()),
            mitigation: rows(run.mitigation.matrix()),
            condition_number: run.mitigation.condition_number(),
            chosen_c: run.chosen_c.clone(),
            selected_indices: run.selected_indices.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub schema_version: u32,
    /// Effective tool configuration, when run from the command line.
    pub config: Value,
    pub plan: BenchmarkPlan,
    pub calibrations: Vec<CalibrationDigest>,
    pub record_count: usize,
    pub reports: Vec<FidelityReport>,
    pub summary: ImprovementSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub records: Vec<BenchRecord>,
    pub summary: BenchSummary,
    /// Full calibration artifacts, one per round.
    pub calibration_runs: Vec<CalibrationRun>,
}

fn obtain_calibrations(plan: &BenchmarkPlan) -> Result<Vec<CalibrationRun>> {
    match &plan.calibration {
        CalibrationSource::Reuse { path } => {
            let run = CalibrationRun::read(path)?;
            if run.register != plan.register {
                return Err(Error::InvalidRegister(format!(
                    "calibration is over {}, plan register is {}",
                    run.register, plan.register
                )));
            }
            Ok(vec![run])
        }
        CalibrationSource::Fresh => {
            let rounds = if plan.recalibrate_per_repetition { plan.repetitions } else { 1 };
            let source = DatasetSource::Simulator(plan.noise.clone());
            (0..rounds)
                .map(|r| {
                    calibrate(
                        &plan.register,
                        &source,
                        plan.t_experiments,
                        plan.calibration_shots,
                        &plan.fcm,
                        plan.calibration_seed(r),
                        plan.inversion,
                    )
                })
                .collect()
        }
    }
}

fn run_cell(plan: &BenchmarkPlan, circuit: &Circuit, state: &str, rep: usize, cal: &[CalibrationRun]) -> Result<BenchRecord> {
    let index = plan.register.parse_basis(state)?;
    let ideal = ideal_distribution_from(circuit, index)?;
    let seed = plan.cell_seed(circuit.name(), index, rep);
    let (counts, realized_noise) = sample_noisy_counts_detailed(&ideal, &plan.noise, plan.shots, seed)?;
    let noisy = counts_to_probability(&counts)?;
    let round = if cal.len() > 1 { rep } else { 0 };
    let mitigated = mitigate(&noisy, &cal[round].mitigation, plan.negativity)?;
    let normalized = mitigated.normalized.as_ref().ok_or(Error::EmptySupport)?;
    Ok(BenchRecord {
        circuit: circuit.name().to_string(),
        initial_state: plan.register.basis_label(index),
        rep,
        seed,
        calibration_round: round,
        hf_unmitigated: hellinger_fidelity(ideal.values(), noisy.values(), plan.convention)?,
        hf_mitigated: hellinger_fidelity(ideal.values(), normalized.values(), plan.convention)?,
        ideal: ideal.into_values(),
        noisy_counts: counts.counts().to_vec(),
        realized_noise,
        mitigated,
    })
}

/// Runs the plan on `jobs` worker threads (0 = rayon default). Output does
/// not depend on `jobs`.
pub fn run_benchmark(plan: &BenchmarkPlan, jobs: usize) -> Result<BenchmarkResult> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let calibration_runs = obtain_calibrations(plan)?;
        let cells: Vec<(&Circuit, &String, usize)> = plan
            .circuits
            .iter()
            .flat_map(|c| plan.initial_states.iter().flat_map(move |s| (0..plan.repetitions).map(move |r| (c, s, r))))
            .collect();
        let records: Vec<BenchRecord> = cells
            .par_iter()
            .map(|&(c, s, r)| run_cell(plan, c, s, r, &calibration_runs))
            .collect::<Result<_>>()?;
        let (reports, summary) = aggregate(&records)?;
        let summary = BenchSummary {
            schema_version: BENCH_SCHEMA_VERSION,
            config: Value::Null,
            plan: plan.clone(),
            calibrations: calibration_runs.iter().enumerate().map(|(i, r)| CalibrationDigest::of(i, r)).collect(),
            record_count: records.len(),
            reports,
            summary,
        };
        Ok(BenchmarkResult { records, summary, calibration_runs })
    })
}

/// Groups records into (circuit, state) cells in first-appearance order and
/// summarizes the improvements.
pub fn aggregate(records: &[BenchRecord]) -> Result<(Vec<FidelityReport>, ImprovementSummary)> {
    let mut cells: Vec<((&str, &str), Vec<RepetitionFidelity>)> = Vec::new();
    for r in records {
        let key = (r.circuit.as_str(), r.initial_state.as_str());
        let rep = RepetitionFidelity { rep: r.rep, hf_unmitigated: r.hf_unmitigated, hf_mitigated: r.hf_mitigated };
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, reps)) => reps.push(rep),
            None => cells.push((key, vec![rep])),
        }
    }
    let reports: Vec<FidelityReport> = cells
        .into_iter()
        .map(|((c, s), reps)| FidelityReport::from_repetitions(c, s, reps))
        .collect::<Result<_>>()?;
    let summary = improvement_stats(&reports)?;
    Ok((reports, summary))
}

impl BenchmarkResult {
    pub fn records_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn summary_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.summary)?;
        text.push('\n');
        Ok(text)
    }

    pub fn fidelity_csv(&self) -> String {
        let mut out = String::from(
            "circuit,initial_state,hf_unmitigated,hf_unmitigated_std,hf_mitigated,hf_mitigated_std,improvement,improvement_err\n",
        );
        for r in &self.summary.reports {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.circuit,
                r.initial_state,
                r.hf_unmitigated,
                r.hf_unmitigated_std,
                r.hf_mitigated,
                r.hf_mitigated_std,
                r.improvement,
                r.improvement_err
            );
        }
        out
    }

    pub fn table(&self) -> String {
        render_table(&self.summary.reports, &self.summary.summary)
    }

    /// Writes the result files into `dir`, returning their paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files = [
            (RESULT_FILE, self.records_jsonl()?),
            (SUMMARY_FILE, self.summary_json()?),
            (CSV_FILE, self.fidelity_csv()),
            (TABLE_FILE, self.table()),
        ];
        files
            .into_iter()
            .map(|(name, text)| {
                let path = dir.join(name);
                std::fs::write(&path, text)?;
                Ok(path)
            })
            .collect()
    }
}

pub fn read_records(path: &Path) -> Result<Vec<BenchRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Fidelities as mean ± sample std per cell, improvements and a
/// Mean/Min/Max footer.
pub fn render_table(reports: &[FidelityReport], summary: &ImprovementSummary) -> String {
    let width = reports.iter().map(|r| r.circuit.len()).max().unwrap_or(7).max(7);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:<5}  {:>15}  {:>15}  {:>16}", "circuit", "state", "HF unmitigated", "HF mitigated", "improvement");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:<5}  {:>7.4} ± {:.4}  {:>7.4} ± {:.4}  {:>+8.4} ± {:.4}",
            r.circuit,
            r.initial_state,
            r.hf_unmitigated,
            r.hf_unmitigated_std,
            r.hf_mitigated,
            r.hf_mitigated_std,
            signed(r.improvement),
            r.improvement_err
        );
    }
    let pad = width + 43;
    let _ = writeln!(out, "{:<pad$}  {:>+8.4} ± {:.4}", "Mean", signed(summary.mean), summary.mean_err);
    let _ = writeln!(out, "{:<pad$}  {:>+8.4} ± {:.4}", "Min", signed(summary.min), summary.min_err);
    let _ = writeln!(out, "{:<pad$}  {:>+8.4} ± {:.4}", "Max", signed(summary.max), summary.max_err);
    out
}

/// Values that print as zero at four decimals are shown as `+0.0000`.
fn signed(x: f64) -> f64 {
    if x.abs() < 5e-5 {
        0.0
    } else {
        x
    }
}

/// Readout probabilities of one prepared state across its experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStability {
    pub basis_state: String,
    /// `series[k][e]`: probability of outcome `k` in experiment `e`.
    pub series: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Per-outcome drift: sample std across experiments.
    pub drift: Vec<f64>,
    /// Per-outcome binomial bound `3 sqrt(p (1 - p) / shots)` at the mean.
    pub bound: Vec<f64>,
    pub max_drift: f64,
    /// Some outcome drifts more than shot noise allows.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub shots: u64,
    pub states: Vec<StateStability>,
}

impl StabilityReport {
    pub fn any_flagged(&self) -> bool {
        self.states.iter().any(|s| s.flagged)
    }
}

pub fn stability_report(datasets: &[Dataset], shots: u64) -> StabilityReport {
    let states = datasets
        .iter()
        .map(|d| {
            let dim = d.instances().first().map_or(0, Vec::len);
            let series: Vec<Vec<f64>> = (0..dim).map(|k| d.instances().iter().map(|x| x[k]).collect()).collect();
            let mean: Vec<f64> = series.iter().map(|s| crate::metrics::mean(s)).collect();
            let drift: Vec<f64> = series.iter().map(|s| crate::metrics::sample_std(s)).collect();
            let bound: Vec<f64> = mean.iter().map(|p| 3.0 * (p * (1.0 - p) / shots as f64).max(0.0).sqrt()).collect();
            let max_drift = drift.iter().copied().fold(0.0, f64::max);
            let flagged = drift.iter().zip(&bound).any(|(d, b)| d > b);
            StateStability { basis_state: d.basis_state().to_string(), series, mean, drift, bound, max_drift, flagged }
        })
        .collect();
    StabilityReport { shots, states }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{paper_like_params, PatternMixture, WeightedPattern};

    fn zero_plan() -> BenchmarkPlan {
        let noise = NoiseModel::preset("zero", &RegisterSpec::q0_q2()).unwrap();
        BenchmarkPlan { repetitions: 2, shots: 100, ..BenchmarkPlan::default_for(noise, 3) }
    }

    #[test]
    fn zero_noise_is_perfect() {
        let result = run_benchmark(&zero_plan(), 2).unwrap();
        assert_eq!(result.records.len(), 4 * 4 * 2);
        for r in &result.records {
            // Only shot noise remains; deterministic outputs are read exactly.
            if r.ideal.contains(&1.0) {
                assert_eq!(r.hf_unmitigated, 1.0);
            }
            assert!((r.hf_mitigated - r.hf_unmitigated).abs() < 1e-9);
        }
        for rep in &result.summary.reports {
            assert!(rep.improvement.abs() < 1e-9);
        }
    }

    #[test]
    fn single_cell_plan() {
        let mut plan = zero_plan();
        plan.circuits.truncate(1);
        plan.initial_states = vec!["10".into()];
        plan.repetitions = 1;
        let result = run_benchmark(&plan, 1).unwrap();
        assert_eq!(result.records.len(), 1);
        assert_eq!(result.summary.reports.len(), 1);
    }

    #[test]
    fn invalid_plans() {
        let mut plan = zero_plan();
        plan.repetitions = 0;
        assert!(matches!(plan.validate(), Err(Error::Plan(_))));
        let mut plan = zero_plan();
        plan.negativity = NegativityPolicy::RawOnly;
        assert!(matches!(plan.validate(), Err(Error::Plan(_))));
        let mut plan = zero_plan();
        plan.register = RegisterSpec::new(["Q0", "Q1"]).unwrap();
        assert!(matches!(plan.validate(), Err(Error::Plan(_))));
    }

    #[test]
    fn filtering_keeps_cell_streams() {
        let plan = zero_plan();
        let mut only = plan.clone();
        only.circuits.retain(|c| c.name() == "cnot");
        assert_eq!(plan.cell_seed("cnot", 2, 1), only.cell_seed("cnot", 2, 1));
        assert_ne!(plan.cell_seed("cnot", 2, 1), plan.cell_seed("cnot", 2, 0));
    }

    #[test]
    fn table_has_footer() {
        let result = run_benchmark(&zero_plan(), 1).unwrap();
        let table = result.table();
        assert_eq!(table.lines().count(), 1 + 16 + 3);
        assert!(table.lines().rev().take(3).all(|l| l.contains("+0.0000")));
    }

    #[test]
    fn stability_edges() {
        let r = RegisterSpec::q0_q2();
        let d = Dataset::new(r.clone(), 0, vec![vec![0.7, 0.1, 0.1, 0.1]], vec!["x".into()]).unwrap();
        let rep = stability_report(&[d], 760);
        assert_eq!(rep.states[0].series[0].len(), 1);
        assert_eq!(rep.states[0].max_drift, 0.0);
        assert!(!rep.any_flagged());
    }

    #[test]
    fn separated_patterns_are_flagged() {
        let r = RegisterSpec::q0_q2();
        let nominal = paper_like_params(&r);
        let noise = NoiseModel::Confusion(PatternMixture {
            patterns: vec![
                WeightedPattern { weight: 0.5, qubits: nominal.clone() },
                WeightedPattern { weight: 0.5, qubits: nominal.shifted(0.1) },
            ],
            jitter_sigma: 0.0,
        });
        let ds = crate::calibration::build_datasets(&r, &DatasetSource::Simulator(noise), 10, 760, StreamSeed::new(1)).unwrap();
        assert!(stability_report(&ds, 760).any_flagged());
    }
}
