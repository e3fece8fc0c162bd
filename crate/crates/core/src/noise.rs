//! Phenomenological readout noise.
//!
//! Two interchangeable models turn an ideal distribution into sampled
//! counts: independent per-qubit bit flips drawn from a mixture of error
//! patterns, or Gaussian I-Q blobs discriminated by a threshold on the axis
//! joining the two state centroids.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matrices::{CalibrationMatrix, Provenance};
use crate::register::{OutcomeCounts, ProbabilityVector, RegisterSpec};
use crate::rng::StreamSeed;

/// Flip probabilities of one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitConfusion {
    /// P(read 1 | prepared 0).
    pub p01: f64,
    /// P(read 0 | prepared 1).
    pub p10: f64,
}

impl QubitConfusion {
    pub fn new(p01: f64, p10: f64) -> Result<Self> {
        let q = Self { p01, p10 };
        q.validate("qubit")?;
        Ok(q)
    }

    fn validate(&self, label: &str) -> Result<()> {
        for p in [self.p01, self.p10] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!("flip rate {p} of {label} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Column-stochastic 2x2 assignment matrix `((1-p01, p10), (p01, 1-p10))`.
    pub fn matrix(&self) -> Matrix {
        Matrix::from_rows(&[[1.0 - self.p01, self.p10], [self.p01, 1.0 - self.p10]]).expect("2x2")
    }
}

/// Per-qubit confusion parameters keyed by qubit label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionParams(pub BTreeMap<String, QubitConfusion>);

impl ConfusionParams {
    pub fn uniform(register: &RegisterSpec, q: QubitConfusion) -> Self {
        Self(register.labels().iter().map(|l| (l.clone(), q)).collect())
    }

    pub fn get(&self, label: &str) -> Result<QubitConfusion> {
        self.0.get(label).copied().ok_or_else(|| Error::MissingQubitParams(label.into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.0.iter().try_for_each(|(l, q)| q.validate(l))
    }

    fn for_register(&self, register: &RegisterSpec) -> Result<Vec<QubitConfusion>> {
        register.labels().iter().map(|l| self.get(l)).collect()
    }

    /// Every flip rate raised by `delta`, clamped to [0, 1].
    pub fn shifted(&self, delta: f64) -> Self {
        Self(
            self.0
                .iter()
                .map(|(l, q)| {
                    let p01 = (q.p01 + delta).clamp(0.0, 1.0);
                    let p10 = (q.p10 + delta).clamp(0.0, 1.0);
                    (l.clone(), QubitConfusion { p01, p10 })
                })
                .collect(),
        )
    }
}

/// Ground-truth assignment matrix: Kronecker product of the per-qubit
/// 2x2 matrices in register order.
pub fn effective_confusion(params: &ConfusionParams, register: &RegisterSpec) -> Result<CalibrationMatrix> {
    let per_qubit = params.for_register(register)?;
    let m = per_qubit
        .iter()
        .map(QubitConfusion::matrix)
        .reduce(|acc, m| acc.kron(&m))
        .expect("register has at least one qubit");
    CalibrationMatrix::new(register.clone(), m, Provenance::new("effective-confusion"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedPattern {
    pub weight: f64,
    pub qubits: ConfusionParams,
}

/// A set of error patterns; each experiment draws one pattern by weight and
/// perturbs its flip rates with Gaussian jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternMixture {
    pub patterns: Vec<WeightedPattern>,
    #[serde(default)]
    pub jitter_sigma: f64,
}

impl PatternMixture {
    pub fn single(params: ConfusionParams) -> Self {
        Self { patterns: vec![WeightedPattern { weight: 1.0, qubits: params }], jitter_sigma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patterns.is_empty() {
            return Err(Error::InvalidNoise("mixture has no patterns".into()));
        }
        if self.patterns.iter().any(|p| !(p.weight >= 0.0)) {
            return Err(Error::InvalidNoise("pattern weights must be non-negative".into()));
        }
        let total: f64 = self.patterns.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidNoise(format!("pattern weights sum to {total}")));
        }
        if !(self.jitter_sigma >= 0.0) {
            return Err(Error::InvalidNoise("jitter_sigma must be non-negative".into()));
        }
        self.patterns.iter().try_for_each(|p| p.qubits.validate())
    }

    /// Draws the parameters one experiment runs with.
    pub fn realize(&self, rng: &mut ChaCha8Rng) -> ConfusionParams {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &self.patterns[self.patterns.len() - 1];
        for p in &self.patterns {
            acc += p.weight;
            if u < acc {
                chosen = p;
                break;
            }
        }
        if self.jitter_sigma == 0.0 {
            return chosen.qubits.clone();
        }
        let mut jitter = |p: f64| {
            let z: f64 = rng.sample(StandardNormal);
            (p + self.jitter_sigma * z).clamp(0.0, 1.0)
        };
        ConfusionParams(
            chosen
                .qubits
                .0
                .iter()
                .map(|(l, q)| {
                    let p01 = jitter(q.p01);
                    let p10 = jitter(q.p10);
                    (l.clone(), QubitConfusion { p01, p10 })
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    /// Equal-density point of the two projected Gaussians (midpoint if none lies between the means).
    Intersection,
    Midpoint,
}

/// Readout blobs of one qubit in the I-Q plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqQubit {
    pub mean0: [f64; 2],
    pub mean1: [f64; 2],
    pub std0: f64,
    pub std1: f64,
}

impl IqQubit {
    fn separation(&self) -> f64 {
        (self.mean1[0] - self.mean0[0]).hypot(self.mean1[1] - self.mean0[1])
    }

    fn axis(&self) -> [f64; 2] {
        let l = self.separation();
        [(self.mean1[0] - self.mean0[0]) / l, (self.mean1[1] - self.mean0[1]) / l]
    }

    /// Coordinate of `point` along the axis from `mean0` towards `mean1`.
    pub fn project(&self, point: [f64; 2]) -> f64 {
        let a = self.axis();
        (point[0] - self.mean0[0]) * a[0] + (point[1] - self.mean0[1]) * a[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqModel {
    pub qubits: BTreeMap<String, IqQubit>,
    pub threshold_rule: ThresholdRule,
}

impl IqModel {
    /// Same blob geometry on every qubit: means `separation` apart on the I axis.
    pub fn symmetric(register: &RegisterSpec, separation: f64, std: f64, threshold_rule: ThresholdRule) -> Self {
        let q = IqQubit { mean0: [0.0, 0.0], mean1: [separation, 0.0], std0: std, std1: std };
        Self { qubits: register.labels().iter().map(|l| (l.clone(), q)).collect(), threshold_rule }
    }

    pub fn qubit(&self, label: &str) -> Result<&IqQubit> {
        self.qubits.get(label).ok_or_else(|| Error::MissingQubitParams(label.into()))
    }

    pub fn validate(&self) -> Result<()> {
        for (label, q) in &self.qubits {
            if !(q.std0 > 0.0 && q.std1 > 0.0) {
                return Err(Error::InvalidNoise(format!("non-positive blob width on {label}")));
            }
            if !(q.separation() > 0.0) {
                return Err(Error::CoincidentMeans(label.clone()));
            }
        }
        Ok(())
    }
}

/// Discrimination threshold of `label`, measured along the projection axis
/// from the projected `|0>` mean (so the `|1>` mean sits at the separation).
pub fn iq_threshold(model: &IqModel, label: &str) -> Result<f64> {
    let q = model.qubit(label)?;
    let l = q.separation();
    if !(l > 0.0) {
        return Err(Error::CoincidentMeans(label.into()));
    }
    let midpoint = l / 2.0;
    if model.threshold_rule == ThresholdRule::Midpoint || q.std0 == q.std1 {
        return Ok(midpoint);
    }
    // ln N(x; 0, s0) = ln N(x; l, s1)  <=>  a x^2 + b x + c = 0
    let (v0, v1) = (q.std0 * q.std0, q.std1 * q.std1);
    let a = 1.0 / (2.0 * v1) - 1.0 / (2.0 * v0);
    let b = -l / v1;
    let c = l * l / (2.0 * v1) + (q.std1 / q.std0).ln();
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Ok(midpoint);
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let qq = -0.5 * (b + b.signum() * sq);
    let roots = [qq / a, c / qq];
    Ok(roots
        .into_iter()
        .filter(|x| x.is_finite() && (0.0..=l).contains(x))
        .min_by(|x, y| (x - midpoint).abs().total_cmp(&(y - midpoint).abs()))
        .unwrap_or(midpoint))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    Confusion(PatternMixture),
    Iq(IqModel),
}

/// Noise parameters in force for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum RealizedNoise {
    Confusion(ConfusionParams),
    Iq(IqModel),
}

pub const PRESET_NAMES: &[&str] = &["zero", "paper-like", "paper-like-static"];

/// Flip rates read off the single-qubit readout fidelities of the `<Q0, Q2>`
/// device: `Q0` keeps ~80% for `|0>` and ~60% for `|1>`, other qubits ~80%.
pub fn paper_like_params(register: &RegisterSpec) -> ConfusionParams {
    ConfusionParams(
        register
            .labels()
            .iter()
            .map(|l| {
                let q = if l == "Q0" {
                    QubitConfusion { p01: 0.2, p10: 0.4 }
                } else {
                    QubitConfusion { p01: 0.2, p10: 0.2 }
                };
                (l.clone(), q)
            })
            .collect(),
    )
}

impl NoiseModel {
    /// Named presets:
    /// - `zero`: perfect readout;
    /// - `paper-like`: nominal rates (weight 0.8) mixed with an elevated
    ///   pattern at +0.05 on every rate (weight 0.2), jitter 0.01;
    /// - `paper-like-static`: nominal rates only, no jitter.
    pub fn preset(name: &str, register: &RegisterSpec) -> Result<NoiseModel> {
        let nominal = paper_like_params(register);
        Ok(match name {
            "zero" => NoiseModel::Confusion(PatternMixture::single(ConfusionParams::uniform(
                register,
                QubitConfusion { p01: 0.0, p10: 0.0 },
            ))),
            "paper-like" => NoiseModel::Confusion(PatternMixture {
                patterns: vec![
                    WeightedPattern { weight: 0.8, qubits: nominal.clone() },
                    WeightedPattern { weight: 0.2, qubits: nominal.shifted(0.05) },
                ],
                jitter_sigma: 0.01,
            }),
            "paper-like-static" => NoiseModel::Confusion(PatternMixture::single(nominal)),
            other => {
                return Err(Error::InvalidNoise(format!(
                    "unknown preset {other:?} (known: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Confusion(m) => m.validate(),
            NoiseModel::Iq(m) => m.validate(),
        }
    }

    pub fn realize(&self, rng: &mut ChaCha8Rng) -> RealizedNoise {
        match self {
            NoiseModel::Confusion(m) => RealizedNoise::Confusion(m.realize(rng)),
            NoiseModel::Iq(m) => RealizedNoise::Iq(m.clone()),
        }
    }
}

/// Samples `shots` noisy readouts of `ideal`, deterministic in `seed`.
pub fn sample_noisy_counts(
    ideal: &ProbabilityVector,
    noise: &NoiseModel,
    shots: u64,
    seed: StreamSeed,
) -> Result<OutcomeCounts> {
    sample_noisy_counts_detailed(ideal, noise, shots, seed).map(|(c, _)| c)
}

/// As [`sample_noisy_counts`], also returning the parameters the experiment
/// actually ran with.
pub fn sample_noisy_counts_detailed(
    ideal: &ProbabilityVector,
    noise: &NoiseModel,
    shots: u64,
    seed: StreamSeed,
) -> Result<(OutcomeCounts, RealizedNoise)> {
    if shots == 0 {
        return Err(Error::EmptyExperiment);
    }
    noise.validate()?;
    let register = ideal.register();
    let n = register.n_qubits();
    let mut rng = seed.rng();
    let realized = noise.realize(&mut rng);

    let cumulative: Vec<f64> = ideal
        .values()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let draw_true = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
        cumulative.iter().position(|&c| u < c).unwrap_or_else(|| {
            // u landed on the top edge; take the last outcome with mass.
            ideal.values().iter().rposition(|&p| p > 0.0).unwrap_or(0)
        })
    };

    let mut counts = vec![0u64; register.dimension()];
    match &realized {
        RealizedNoise::Confusion(params) => {
            let rates = params.for_register(register)?;
            for _ in 0..shots {
                let truth = draw_true(&mut rng);
                let mut read = 0usize;
                for (q, rate) in rates.iter().enumerate() {
                    let bit = register.bit(truth, q);
                    let flip_p = if bit == 0 { rate.p01 } else { rate.p10 };
                    let flipped = rng.random::<f64>() < flip_p;
                    read |= (bit ^ usize::from(flipped)) << (n - 1 - q);
                }
                counts[read] += 1;
            }
        }
        RealizedNoise::Iq(model) => {
            let blobs: Vec<(IqQubit, f64)> = register
                .labels()
                .iter()
                .map(|l| Ok((*model.qubit(l)?, iq_threshold(model, l)?)))
                .collect::<Result<_>>()?;
            for _ in 0..shots {
                let truth = draw_true(&mut rng);
                let mut read = 0usize;
                for (q, (blob, threshold)) in blobs.iter().enumerate() {
                    let (mean, std) =
                        if register.bit(truth, q) == 0 { (blob.mean0, blob.std0) } else { (blob.mean1, blob.std1) };
                    let zi: f64 = rng.sample(StandardNormal);
                    let zq: f64 = rng.sample(StandardNormal);
                    let point = [mean[0] + std * zi, mean[1] + std * zq];
                    if blob.project(point) > *threshold {
                        read |= 1 << (n - 1 - q);
                    }
                }
                counts[read] += 1;
            }
        }
    }
    Ok((OutcomeCounts::new(register.clone(), counts)?, realized))
}
