//! Hellinger distance/fidelity and improvement statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HellingerConvention {
    /// `H = sqrt(1/2 * sum (sqrt p - sqrt q)^2)`, range [0, 1].
    #[default]
    Standard,
    /// `H = 1/2 * sqrt(sum (sqrt p - sqrt q)^2)`, the literal typeset form.
    PaperVerbatim,
}

fn check_same_len(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    Ok(())
}

/// Squared Hellinger distance, `1 - BC` (standard) or `(1 - BC) / 2`
/// (verbatim), with the Bhattacharyya coefficient taken over the
/// mass-normalized inputs. Identical inputs give exactly 0, disjoint
/// supports exactly 1 (standard) or 1/2 (verbatim).
pub fn hellinger_distance_squared(p: &[f64], q: &[f64], convention: HellingerConvention) -> Result<f64> {
    check_same_len(p, q)?;
    let overlap: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    let mass = (p.iter().sum::<f64>() * q.iter().sum::<f64>()).sqrt();
    let bc = if mass > 0.0 { (overlap / mass).min(1.0) } else { 0.0 };
    Ok(match convention {
        HellingerConvention::Standard => 1.0 - bc,
        HellingerConvention::PaperVerbatim => 0.5 * (1.0 - bc),
    })
}

pub fn hellinger_distance(p: &[f64], q: &[f64], convention: HellingerConvention) -> Result<f64> {
    hellinger_distance_squared(p, q, convention).map(f64::sqrt)
}

/// `HF = (1 - H^2)^2`.
pub fn hellinger_fidelity(p: &[f64], q: &[f64], convention: HellingerConvention) -> Result<f64> {
    let h2 = hellinger_distance_squared(p, q, convention)?;
    Ok((1.0 - h2).powi(2))
}

pub fn bhattacharyya_coefficient(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q)?;
    Ok(p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionFidelity {
    pub rep: usize,
    pub hf_unmitigated: f64,
    pub hf_mitigated: f64,
}

/// Fidelities of one (circuit, initial state) cell across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub circuit: String,
    pub initial_state: String,
    pub hf_unmitigated: f64,
    pub hf_unmitigated_std: f64,
    pub hf_mitigated: f64,
    pub hf_mitigated_std: f64,
    pub improvement: f64,
    /// `sqrt(std_mit^2 + std_unmit^2)`.
    pub improvement_err: f64,
    pub repetitions: Vec<RepetitionFidelity>,
}

impl FidelityReport {
    pub fn from_repetitions(circuit: &str, initial_state: &str, repetitions: Vec<RepetitionFidelity>) -> Result<Self> {
        if repetitions.is_empty() {
            return Err(Error::Plan("fidelity report needs at least one repetition".into()));
        }
        let unmit: Vec<f64> = repetitions.iter().map(|r| r.hf_unmitigated).collect();
        let mit: Vec<f64> = repetitions.iter().map(|r| r.hf_mitigated).collect();
        let (hf_unmitigated, hf_mitigated) = (mean(&unmit), mean(&mit));
        let (su, sm) = (sample_std(&unmit), sample_std(&mit));
        Ok(Self {
            circuit: circuit.into(),
            initial_state: initial_state.into(),
            hf_unmitigated,
            hf_unmitigated_std: su,
            hf_mitigated,
            hf_mitigated_std: sm,
            improvement: hf_mitigated - hf_unmitigated,
            improvement_err: su.hypot(sm),
            repetitions,
        })
    }
}

/// Mean/min/max improvement across cells with propagated errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementSummary {
    pub cells: usize,
    pub mean: f64,
    /// `sqrt(sum err_i^2) / n`.
    pub mean_err: f64,
    /// Sample standard deviation of the per-cell improvements.
    pub std: f64,
    pub min: f64,
    pub min_err: f64,
    pub max: f64,
    pub max_err: f64,
}

/// Summary over `(improvement, error)` pairs.
pub fn summarize_improvements(items: &[(f64, f64)]) -> Result<ImprovementSummary> {
    if items.is_empty() {
        return Err(Error::Plan("no fidelity reports to summarize".into()));
    }
    let values: Vec<f64> = items.iter().map(|i| i.0).collect();
    let n = items.len() as f64;
    let min = items.iter().copied().reduce(|a, b| if b.0 < a.0 { b } else { a }).unwrap();
    let max = items.iter().copied().reduce(|a, b| if b.0 > a.0 { b } else { a }).unwrap();
    Ok(ImprovementSummary {
        cells: items.len(),
        mean: mean(&values),
        mean_err: items.iter().map(|i| i.1 * i.1).sum::<f64>().sqrt() / n,
        std: sample_std(&values),
        min: min.0,
        min_err: min.1,
        max: max.0,
        max_err: max.1,
    })
}

pub fn improvement_stats(reports: &[FidelityReport]) -> Result<ImprovementSummary> {
    let items: Vec<(f64, f64)> = reports.iter().map(|r| (r.improvement, r.improvement_err)).collect();
    summarize_improvements(&items)
}
