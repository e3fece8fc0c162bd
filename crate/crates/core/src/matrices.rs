//! Calibration matrix `M` (column `i` = outcome distribution when basis
//! state `i` is prepared) and its inverse, the mitigation matrix `S`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::register::{RegisterSpec, NORMALIZATION_TOL};

/// Where a calibration matrix came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub selection_rule: String,
    #[serde(default)]
    pub dataset_ids: Vec<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
}

impl Provenance {
    pub fn new(selection_rule: impl Into<String>) -> Self {
        Self { selection_rule: selection_rule.into(), ..Default::default() }
    }
}

/// On-disk layout shared by every matrix and vector:
/// `{"register": [...], "shape": [r, c], "data": [row-major], "provenance": {...}}`.
/// Vectors are written as single columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub register: RegisterSpec,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
    #[serde(default)]
    pub provenance: Value,
}

impl MatrixDocument {
    pub fn from_matrix(register: &RegisterSpec, m: &Matrix, provenance: Value) -> Self {
        Self {
            register: register.clone(),
            shape: [m.rows(), m.cols()],
            data: m.as_row_major().to_vec(),
            provenance,
        }
    }

    pub fn from_vector(register: &RegisterSpec, v: &[f64], provenance: Value) -> Self {
        Self { register: register.clone(), shape: [v.len(), 1], data: v.to_vec(), provenance }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        let [r, c] = self.shape;
        Matrix::from_row_major(r, c, self.data.clone()).ok_or(Error::DimensionMismatch {
            expected: r * c,
            found: self.data.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDocument", into = "MatrixDocument")]
pub struct CalibrationMatrix {
    register: RegisterSpec,
    m: Matrix,
    provenance: Provenance,
}

impl CalibrationMatrix {
    /// Validates that `m` is square over the register, entries lie in
    /// [0, 1] and every column sums to one.
    pub fn new(register: RegisterSpec, m: Matrix, provenance: Provenance) -> Result<Self> {
        let d = register.dimension();
        if m.rows() != d || m.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.rows().max(m.cols()) });
        }
        if let Some(x) = m.as_row_major().iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidCalibration(format!("entry {x} outside [0, 1]")));
        }
        for (j, s) in m.column_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidCalibration(format!("column {j} sums to {s}")));
            }
        }
        Ok(Self { register, m, provenance })
    }

    pub fn from_columns(register: RegisterSpec, columns: &[Vec<f64>], provenance: Provenance) -> Result<Self> {
        let m = Matrix::from_columns(columns).ok_or(Error::DimensionMismatch {
            expected: register.dimension(),
            found: columns.len(),
        })?;
        Self::new(register, m, provenance)
    }

    pub fn identity(register: RegisterSpec) -> Self {
        let d = register.dimension();
        Self { register, m: Matrix::identity(d), provenance: Provenance::new("identity") }
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Applies the readout channel to an ideal distribution.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.register.check_len(p.len())?;
        Ok(self.m.mul_vec(p))
    }
}

impl TryFrom<MatrixDocument> for CalibrationMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDocument) -> Result<Self> {
        let m = doc.to_matrix()?;
        let provenance = if doc.provenance.is_null() {
            Provenance::new("imported")
        } else {
            serde_json::from_value(doc.provenance)?
        };
        CalibrationMatrix::new(doc.register, m, provenance)
    }
}

impl From<CalibrationMatrix> for MatrixDocument {
    fn from(c: CalibrationMatrix) -> Self {
        let provenance = serde_json::to_value(&c.provenance).expect("provenance serializes");
        MatrixDocument::from_matrix(&c.register, &c.m, provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversionMode {
    /// Fail when `M` is numerically singular.
    Strict,
    /// Fall back to the Moore-Penrose pseudo-inverse.
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionPolicy {
    pub mode: InversionMode,
    /// Largest accepted 1-norm condition number.
    pub max_condition: f64,
}

impl Default for InversionPolicy {
    fn default() -> Self {
        Self { mode: InversionMode::Strict, max_condition: 1e12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversionMethod {
    Lu,
    PseudoInverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MitigationProvenance {
    condition_number: f64,
    method: InversionMethod,
    source: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDocument", into = "MatrixDocument")]
pub struct MitigationMatrix {
    register: RegisterSpec,
    s: Matrix,
    condition_number: f64,
    method: InversionMethod,
    source: Provenance,
}

impl MitigationMatrix {
    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn matrix(&self) -> &Matrix {
        &self.s
    }

    /// 1-norm condition number of the inverted calibration matrix.
    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    pub fn method(&self) -> InversionMethod {
        self.method
    }

    pub fn source(&self) -> &Provenance {
        &self.source
    }
}

impl TryFrom<MatrixDocument> for MitigationMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDocument) -> Result<Self> {
        let s = doc.to_matrix()?;
        let d = doc.register.dimension();
        if s.rows() != d || s.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: s.rows().max(s.cols()) });
        }
        let p: MitigationProvenance = serde_json::from_value(doc.provenance)?;
        Ok(Self {
            register: doc.register,
            s,
            condition_number: p.condition_number,
            method: p.method,
            source: p.source,
        })
    }
}

impl From<MitigationMatrix> for MatrixDocument {
    fn from(m: MitigationMatrix) -> Self {
        let provenance = serde_json::to_value(MitigationProvenance {
            condition_number: m.condition_number,
            method: m.method,
            source: m.source,
        })
        .expect("provenance serializes");
        MatrixDocument::from_matrix(&m.register, &m.s, provenance)
    }
}

/// Inverts `M` by LU with partial pivoting.
///
/// The condition number is `||M||_1 * ||M^-1||_1`. A zero pivot counts as
/// infinite condition. Above `policy.max_condition` the strict mode fails;
/// the least-squares mode returns the pseudo-inverse instead.
pub fn invert_calibration(m: &CalibrationMatrix, policy: InversionPolicy) -> Result<MitigationMatrix> {
    let lu = Lu::factor(&m.m);
    let (inverse, condition_number) = match &lu {
        Some(lu) => {
            let inv = lu.inverse();
            let cond = m.m.norm_1() * inv.norm_1();
            (Some(inv), if cond.is_finite() { cond } else { f64::INFINITY })
        }
        None => (None, f64::INFINITY),
    };
    let source = m.provenance.clone();
    match inverse {
        Some(s) if condition_number <= policy.max_condition => Ok(MitigationMatrix {
            register: m.register.clone(),
            s,
            condition_number,
            method: InversionMethod::Lu,
            source,
        }),
        _ => match policy.mode {
            InversionMode::Strict => Err(Error::SingularCalibration { condition_number }),
            InversionMode::LeastSquares => Ok(MitigationMatrix {
                register: m.register.clone(),
                s: pseudo_inverse(&m.m),
                condition_number,
                method: InversionMethod::PseudoInverse,
                source,
            }),
        },
    }
}

fn pseudo_inverse(m: &Matrix) -> Matrix {
    let a = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_row_major());
    let pinv = a
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse with non-negative epsilon");
    let data: Vec<f64> = (0..pinv.nrows())
        .flat_map(|i| (0..pinv.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| pinv[(i, j)])
        .collect();
    Matrix::from_row_major(pinv.nrows(), pinv.ncols(), data).expect("shape")
}

/// The 4x4 calibration matrix reported for the `<Q0, Q2>` register.
pub fn reported_q0_q2_matrix() -> CalibrationMatrix {
    let m = Matrix::from_rows(&[
        [0.74, 0.16, 0.36, 0.08],
        [0.13, 0.67, 0.07, 0.33],
        [0.11, 0.03, 0.48, 0.12],
        [0.02, 0.14, 0.09, 0.47],
    ])
    .expect("4x4");
    CalibrationMatrix::new(RegisterSpec::q0_q2(), m, Provenance::new("reported"))
        .expect("reported matrix is column-stochastic")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> RegisterSpec {
        RegisterSpec::new(["A"]).unwrap()
    }

    #[test]
    fn identity_inverts_to_identity() {
        let m = CalibrationMatrix::identity(RegisterSpec::q0_q2());
        let s = invert_calibration(&m, InversionPolicy::default()).unwrap();
        assert_eq!(s.matrix(), &Matrix::identity(4));
        assert_eq!(s.condition_number(), 1.0);
    }

    #[test]
    fn symmetric_flip_closed_form() {
        let m = Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap();
        let m = CalibrationMatrix::new(one(), m, Provenance::new("test")).unwrap();
        let s = invert_calibration(&m, InversionPolicy::default()).unwrap();
        let expected = Matrix::from_rows(&[[1.125, -0.125], [-0.125, 1.125]]).unwrap();
        assert!(s.matrix().max_abs_diff(&expected) < 1e-15);
        // ||M||_1 = 1, ||S||_1 = 1.25
        assert!((s.condition_number() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn reported_matrix_inverse_against_frozen_values() {
        // Frozen from an independent LAPACK solve (numpy.linalg.inv).
        let frozen = [
            [1.588874514877102, -0.39042690815006464, -1.192496765847348, 0.30815006468305295],
            [-0.3178783958602846, 1.827011642949547, 0.212522639068564, -1.2829495472186285],
            [-0.3686675291073739, 0.11257438551099609, 2.464450194049159, -0.6455109961190167],
            [0.09767141009055627, -0.5491591203104785, -0.4844760672703751, 2.6203104786545923],
        ];
        let m = reported_q0_q2_matrix();
        let s = invert_calibration(&m, InversionPolicy::default()).unwrap();
        let expected = Matrix::from_rows(&frozen).unwrap();
        assert!(s.matrix().max_abs_diff(&expected) < 1e-12);
        assert!(s.matrix().mul(m.matrix()).max_abs_diff(&Matrix::identity(4)) < 1e-9);
        assert!((s.condition_number() - 4.856921086675291).abs() < 1e-9);
        for c in s.matrix().column_sums() {
            assert!((c - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_strict_and_fallback() {
        let m = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let m = CalibrationMatrix::new(one(), m, Provenance::new("test")).unwrap();
        let err = invert_calibration(&m, InversionPolicy::default()).unwrap_err();
        assert!(err.to_string().starts_with("singular calibration matrix"));
        assert!(err.is_numerical());

        let policy = InversionPolicy { mode: InversionMode::LeastSquares, ..Default::default() };
        let s = invert_calibration(&m, policy).unwrap();
        assert_eq!(s.method(), InversionMethod::PseudoInverse);
        let expected = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        assert!(s.matrix().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn ill_conditioned_above_cap_is_rejected() {
        let eps = 1e-9;
        let m = Matrix::from_rows(&[[0.5 + eps, 0.5], [0.5 - eps, 0.5]]).unwrap();
        let m = CalibrationMatrix::new(one(), m, Provenance::new("test")).unwrap();
        let policy = InversionPolicy { max_condition: 1e6, ..Default::default() };
        match invert_calibration(&m, policy) {
            Err(Error::SingularCalibration { condition_number }) => assert!(condition_number > 1e6),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn calibration_validation() {
        let bad = Matrix::from_rows(&[[0.9, 0.2], [0.1, 0.9]]).unwrap();
        assert!(CalibrationMatrix::new(one(), bad, Provenance::default()).is_err());
        let neg = Matrix::from_rows(&[[1.1, 0.0], [-0.1, 1.0]]).unwrap();
        assert!(CalibrationMatrix::new(one(), neg, Provenance::default()).is_err());
    }

    #[test]
    fn json_schema_and_exact_round_trip() {
        let m = reported_q0_q2_matrix();
        let s = invert_calibration(&m, InversionPolicy::default()).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["shape"], serde_json::json!([4, 4]));
        assert_eq!(v["register"], serde_json::json!(["Q0", "Q2"]));
        assert_eq!(v["data"].as_array().unwrap().len(), 16);
        let back: MitigationMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.matrix().as_row_major().iter().zip(s.matrix().as_row_major()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let text = serde_json::to_string(&m).unwrap();
        let back: CalibrationMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Diagonally dominant column-stochastic 4x4 matrices.
        fn calibration() -> impl Strategy<Value = CalibrationMatrix> {
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 4).prop_map(|cols| {
                let cols: Vec<Vec<f64>> = cols
                    .into_iter()
                    .enumerate()
                    .map(|(j, mut c)| {
                        c[j] += 4.0;
                        let s: f64 = c.iter().sum();
                        c.iter().map(|x| x / s).collect()
                    })
                    .collect();
                CalibrationMatrix::from_columns(RegisterSpec::q0_q2(), &cols, Provenance::default()).unwrap()
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
            fn inverse_undoes_channel(m in calibration(), p in dist()) {
                let s = invert_calibration(&m, InversionPolicy::default()).unwrap();
                let back = s.matrix().mul_vec(&m.apply(&p).unwrap());
                for (a, b) in back.iter().zip(&p) {
                    prop_assert!((a - b).abs() < 1e-8);
                }
                for c in s.matrix().column_sums() {
                    prop_assert!((c - 1.0).abs() < 1e-9);
                }
                prop_assert!(s.matrix().mul(m.matrix()).max_abs_diff(&Matrix::identity(4)) < 1e-9);
            }
        }
    }
}
