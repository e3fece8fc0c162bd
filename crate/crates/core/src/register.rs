//! Register layout and the outcome/probability value types.
//!
//! Outcome index `i` encodes the first register label as its most
//! significant bit: for labels `[Q0, Q2]`, index 1 is `|Q0=0, Q2=1>`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the dense simulator and calibration pipeline accept.
pub const MAX_QUBITS: usize = 5;

/// Tolerance used when validating that a vector sums to one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Ordered qubit labels of a register.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct RegisterSpec {
    labels: Vec<String>,
}

impl RegisterSpec {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidRegister("register has no qubits".into()));
        }
        if labels.len() > MAX_QUBITS {
            return Err(Error::InvalidRegister(format!(
                "{} qubits exceeds the cap of {MAX_QUBITS}",
                labels.len()
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::InvalidRegister("empty qubit label".into()));
            }
            if labels[..i].contains(label) {
                return Err(Error::InvalidRegister(format!("duplicate qubit label {label}")));
            }
        }
        Ok(Self { labels })
    }

    /// The two-qubit `<Q0, Q2>` register used throughout the validation experiment.
    pub fn q0_q2() -> Self {
        Self { labels: vec!["Q0".into(), "Q2".into()] }
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dimension(&self) -> usize {
        1 << self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Bit of qubit `position` inside outcome `index`.
    pub fn bit(&self, index: usize, position: usize) -> usize {
        (index >> (self.n_qubits() - 1 - position)) & 1
    }

    /// Bitstring label of an outcome index, e.g. `2 -> "10"`.
    pub fn basis_label(&self, index: usize) -> String {
        (0..self.n_qubits())
            .map(|q| if self.bit(index, q) == 1 { '1' } else { '0' })
            .collect()
    }

    /// Parses a bitstring (optionally written as a ket, `|01>`) into an outcome index.
    pub fn parse_basis(&self, label: &str) -> Result<usize> {
        let bits = label
            .trim()
            .trim_start_matches('|')
            .trim_end_matches(['>', '⟩']);
        if bits.len() != self.n_qubits() || !bits.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::InvalidBasisState(label.to_string()));
        }
        Ok(bits.chars().fold(0, |acc, c| (acc << 1) | usize::from(c == '1')))
    }

    pub fn is_disjoint(&self, other: &RegisterSpec) -> bool {
        self.labels.iter().all(|l| !other.labels.contains(l))
    }

    /// `self` followed by `other`; `self` occupies the most significant bits.
    pub fn concat(&self, other: &RegisterSpec) -> Result<RegisterSpec> {
        if !self.is_disjoint(other) {
            return Err(Error::InvalidRegister("registers overlap".into()));
        }
        RegisterSpec::new(self.labels.iter().chain(&other.labels).cloned())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), found: len });
        }
        Ok(())
    }
}

impl TryFrom<Vec<String>> for RegisterSpec {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        RegisterSpec::new(labels)
    }
}

impl From<RegisterSpec> for Vec<String> {
    fn from(r: RegisterSpec) -> Self {
        r.labels
    }
}

impl fmt::Display for RegisterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.labels.join(","))
    }
}

/// Event counts of one experiment over all computational-basis outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCounts")]
pub struct OutcomeCounts {
    register: RegisterSpec,
    counts: Vec<u64>,
    shots: u64,
}

#[derive(Deserialize)]
struct RawCounts {
    register: RegisterSpec,
    counts: Vec<u64>,
    shots: Option<u64>,
}

impl TryFrom<RawCounts> for OutcomeCounts {
    type Error = Error;

    fn try_from(raw: RawCounts) -> Result<Self> {
        let c = OutcomeCounts::new(raw.register, raw.counts)?;
        match raw.shots {
            Some(s) if s != c.shots => Err(Error::Import(format!(
                "shots {s} does not match count total {}",
                c.shots
            ))),
            _ => Ok(c),
        }
    }
}

impl OutcomeCounts {
    pub fn new(register: RegisterSpec, counts: Vec<u64>) -> Result<Self> {
        register.check_len(counts.len())?;
        let shots = counts.iter().sum();
        Ok(Self { register, counts, shots })
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn to_probability(&self) -> Result<ProbabilityVector> {
        counts_to_probability(self)
    }
}

/// Normalizes counts by the shot total.
pub fn counts_to_probability(c: &OutcomeCounts) -> Result<ProbabilityVector> {
    if c.shots == 0 {
        return Err(Error::EmptyExperiment);
    }
    let shots = c.shots as f64;
    let p = c.counts.iter().map(|&n| n as f64 / shots).collect();
    Ok(ProbabilityVector { register: c.register.clone(), p })
}

/// A non-negative vector summing to one over the register's outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVector", into = "RawVector")]
pub struct ProbabilityVector {
    register: RegisterSpec,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawVector {
    register: RegisterSpec,
    values: Vec<f64>,
}

impl TryFrom<RawVector> for ProbabilityVector {
    type Error = Error;

    fn try_from(raw: RawVector) -> Result<Self> {
        ProbabilityVector::new(raw.register, raw.values)
    }
}

impl From<ProbabilityVector> for RawVector {
    fn from(p: ProbabilityVector) -> Self {
        RawVector { register: p.register, values: p.p }
    }
}

impl ProbabilityVector {
    pub fn new(register: RegisterSpec, p: Vec<f64>) -> Result<Self> {
        register.check_len(p.len())?;
        validate_distribution(&p)?;
        Ok(Self { register, p })
    }

    /// All mass on outcome `index`.
    pub fn basis(register: RegisterSpec, index: usize) -> Result<Self> {
        let mut p = vec![0.0; register.dimension()];
        *p.get_mut(index)
            .ok_or_else(|| Error::InvalidBasisState(index.to_string()))? = 1.0;
        Ok(Self { register, p })
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn into_values(self) -> Vec<f64> {
        self.p
    }
}

pub(crate) fn validate_distribution(p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidProbability(format!("entry {x} is negative or non-finite")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidProbability(format!("entries sum to {total}")));
    }
    Ok(())
}

/// Output of a mitigation matrix: sums to one but may hold negative entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiProbabilityVector {
    register: RegisterSpec,
    values: Vec<f64>,
}

impl QuasiProbabilityVector {
    pub fn new(register: RegisterSpec, values: Vec<f64>) -> Result<Self> {
        register.check_len(values.len())?;
        Ok(Self { register, values })
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Total magnitude of the negative entries.
    pub fn negativity(&self) -> f64 {
        self.values.iter().map(|q| (-q).max(0.0)).sum()
    }
}

/// Joint distribution of two independent registers; `a` takes the high bits.
pub fn tensor_probability(a: &ProbabilityVector, b: &ProbabilityVector) -> Result<ProbabilityVector> {
    let register = a.register.concat(&b.register)?;
    let p = a
        .p
        .iter()
        .flat_map(|&x| b.p.iter().map(move |&y| x * y))
        .collect();
    Ok(ProbabilityVector { register, p })
}
