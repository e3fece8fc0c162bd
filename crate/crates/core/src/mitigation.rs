//! Applying `S` to noisy outcomes and mapping the resulting
//! quasi-probabilities back onto the probability simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrices::MitigationMatrix;
use crate::register::{counts_to_probability, OutcomeCounts, ProbabilityVector, QuasiProbabilityVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativityPolicy {
    /// Zero the negative entries, then rescale to unit mass.
    #[default]
    ClipRenormalize,
    /// Euclidean projection onto the simplex.
    SimplexProjection,
    /// Keep only the raw quasi-probabilities.
    RawOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigatedResult {
    pub raw_quasi: QuasiProbabilityVector,
    /// `None` only under [`NegativityPolicy::RawOnly`].
    pub normalized: Option<ProbabilityVector>,
    pub policy: NegativityPolicy,
    pub negativity: f64,
}

/// `S · p_noisy`, normalized per `policy`.
pub fn mitigate(noisy: &ProbabilityVector, s: &MitigationMatrix, policy: NegativityPolicy) -> Result<MitigatedResult> {
    let d = s.register().dimension();
    if noisy.values().len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: noisy.values().len() });
    }
    if noisy.register() != s.register() {
        return Err(Error::InvalidRegister(format!(
            "outcomes over {} but mitigation matrix over {}",
            noisy.register(),
            s.register()
        )));
    }
    let raw_quasi = QuasiProbabilityVector::new(s.register().clone(), s.matrix().mul_vec(noisy.values()))?;
    let negativity = raw_quasi.negativity();
    let normalized = match policy {
        NegativityPolicy::RawOnly => None,
        NegativityPolicy::ClipRenormalize => Some(clip_renormalize(raw_quasi.values())?),
        NegativityPolicy::SimplexProjection => Some(project_to_simplex(raw_quasi.values())),
    }
    .map(|p| ProbabilityVector::new(s.register().clone(), p))
    .transpose()?;
    Ok(MitigatedResult { raw_quasi, normalized, policy, negativity })
}

pub fn mitigate_counts(noisy: &OutcomeCounts, s: &MitigationMatrix, policy: NegativityPolicy) -> Result<MitigatedResult> {
    mitigate(&counts_to_probability(noisy)?, s, policy)
}

pub fn clip_renormalize(q: &[f64]) -> Result<Vec<f64>> {
    let clipped: Vec<f64> = q.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptySupport);
    }
    Ok(clipped.into_iter().map(|x| x / total).collect())
}

/// Closest point of the probability simplex in Euclidean distance
/// (sort-and-threshold algorithm).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let mut p: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::matrices::{invert_calibration, reported_q0_q2_matrix, CalibrationMatrix, InversionPolicy, Provenance};
    use crate::register::RegisterSpec;

    fn one() -> RegisterSpec {
        RegisterSpec::new(["Q0"]).unwrap()
    }

    fn flip_s() -> MitigationMatrix {
        let m = Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap();
        let m = CalibrationMatrix::new(one(), m, Provenance::new("test")).unwrap();
        invert_calibration(&m, InversionPolicy::default()).unwrap()
    }

    #[test]
    fn identity_is_a_no_op() {
        let r = RegisterSpec::q0_q2();
        let s = invert_calibration(&CalibrationMatrix::identity(r.clone()), InversionPolicy::default()).unwrap();
        let p = ProbabilityVector::new(r, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let out = mitigate(&p, &s, NegativityPolicy::ClipRenormalize).unwrap();
        assert_eq!(out.raw_quasi.values(), p.values());
        assert_eq!(out.normalized.unwrap().values(), p.values());
        assert_eq!(out.negativity, 0.0);
    }

    #[test]
    fn reported_columns_recover_basis_states() {
        let m = reported_q0_q2_matrix();
        let s = invert_calibration(&m, InversionPolicy::default()).unwrap();
        let col = ProbabilityVector::new(m.register().clone(), m.matrix().column(0)).unwrap();
        let out = mitigate(&col, &s, NegativityPolicy::ClipRenormalize).unwrap();
        for (a, b) in out.raw_quasi.values().iter().zip([1.0, 0.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn one_qubit_hand_example() {
        let p = ProbabilityVector::new(one(), vec![1.0, 0.0]).unwrap();
        let out = mitigate(&p, &flip_s(), NegativityPolicy::ClipRenormalize).unwrap();
        let raw = out.raw_quasi.values();
        assert!((raw[0] - 1.125).abs() < 1e-15 && (raw[1] + 0.125).abs() < 1e-15);
        assert_eq!(out.normalized.unwrap().values(), &[1.0, 0.0]);
        assert!((out.negativity - 0.125).abs() < 1e-15);

        let raw_only = mitigate(&p, &flip_s(), NegativityPolicy::RawOnly).unwrap();
        assert!(raw_only.normalized.is_none());
    }

    #[test]
    fn dimension_mismatch() {
        let p = ProbabilityVector::new(RegisterSpec::q0_q2(), vec![0.25; 4]).unwrap();
        assert!(matches!(
            mitigate(&p, &flip_s(), NegativityPolicy::ClipRenormalize),
            Err(Error::DimensionMismatch { expected: 2, found: 4 })
        ));
    }

    #[test]
    fn empty_support() {
        assert!(matches!(clip_renormalize(&[-0.5, 0.0, -0.5]), Err(Error::EmptySupport)));
        assert!(Error::EmptySupport.is_numerical());
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_to_simplex(&[1.125, -0.125]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.6, 0.6, -0.2]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15 && p[2] == 0.0);
        let p = project_to_simplex(&[0.1, 0.2, 0.3, 0.4]);
        for (a, b) in p.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn quasi() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-0.5f64..1.5, 4).prop_map(|v| {
                let shift = (1.0 - v.iter().sum::<f64>()) / 4.0;
                v.iter().map(|x| x + shift).collect()
            })
        }

        fn dist() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0f64..1.0, 4).prop_filter_map("non-zero", |v| {
                let s: f64 = v.iter().sum();
                (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
            })
        }

        proptest! {
            #[test]
            fn projection_is_closest_simplex_point(v in quasi(), other in dist()) {
                let p = project_to_simplex(&v);
                prop_assert!(p.iter().all(|x| *x >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let d = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
                prop_assert!(d(&p) <= d(&other) + 1e-12);
            }

            #[test]
            fn policies_agree_without_negativity(p in dist()) {
                let clip = clip_renormalize(&p).unwrap();
                let proj = project_to_simplex(&p);
                for (a, b) in clip.iter().zip(&proj) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
