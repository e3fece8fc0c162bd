//! Readout-error mitigation with Fuzzy C-Means calibration.
//!
//! A small noisy-register simulator produces calibration experiments; FCM
//! picks one representative outcome distribution per basis state to build
//! the calibration matrix `M`, whose inverse `S` corrects noisy outcomes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod calibration;
pub mod circuit;
pub mod config;
pub mod error;
pub mod fcm;
pub mod linalg;
pub mod matrices;
pub mod metrics;
pub mod mitigation;
pub mod noise;
pub mod register;
pub mod rng;

pub use bench::{run_benchmark, stability_report, BenchRecord, BenchmarkPlan, BenchmarkResult, CalibrationSource};
pub use calibration::{assemble_calibration, build_datasets, calibrate, run_fuzzy_step, CalibrationRun, CountRecord, DatasetSource};
pub use circuit::{builtin_circuit, builtin_circuits, ideal_distribution, Circuit, Gate, GateSpec, Statevector};
pub use config::ToolConfig;
pub use error::{Error, Result};
pub use fcm::{fcm_cluster, fpc, most_uncertain_instance, select_best_c, Dataset, FcmConfig, FuzzyPartition};
pub use linalg::Matrix;
pub use matrices::{invert_calibration, CalibrationMatrix, InversionMode, InversionPolicy, MitigationMatrix};
pub use metrics::{hellinger_distance, hellinger_fidelity, HellingerConvention};
pub use mitigation::{mitigate, MitigatedResult, NegativityPolicy};
pub use noise::{effective_confusion, sample_noisy_counts, NoiseModel};
pub use register::{OutcomeCounts, ProbabilityVector, QuasiProbabilityVector, RegisterSpec};
pub use rng::StreamSeed;
