//! Dense statevector simulation with the `Rxy(theta, phi)` rotation and CZ.
//!
//! Composite gates (Hadamard, CNOT) are expanded into native rotations the
//! way the hardware builds them, so they match the textbook gates only up
//! to phases that never show up in outcome probabilities.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::register::{ProbabilityVector, RegisterSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateKind {
    /// Rotation by `theta` about the equatorial axis at angle `phi` from x.
    Rxy { theta: f64, phi: f64 },
    Cz,
    Identity,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cz => 2,
            _ => 1,
        }
    }

    /// Unitary of the gate on its own qubits; row/column index uses the
    /// first target as the high bit.
    pub fn unitary(&self) -> Vec<Vec<Complex64>> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match *self {
            GateKind::Rxy { theta, phi } => {
                let (s, co) = (theta / 2.0).sin_cos();
                let minus_i_sin = c(0.0, -s);
                vec![
                    vec![c(co, 0.0), minus_i_sin * Complex64::from_polar(1.0, -phi)],
                    vec![minus_i_sin * Complex64::from_polar(1.0, phi), c(co, 0.0)],
                ]
            }
            GateKind::Identity => vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]],
            GateKind::Cz => (0..4)
                .map(|i| {
                    (0..4)
                        .map(|j| match (i == j, i) {
                            (true, 3) => c(-1.0, 0.0),
                            (true, _) => c(1.0, 0.0),
                            _ => c(0.0, 0.0),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    #[serde(flatten)]
    pub kind: GateKind,
    pub targets: Vec<String>,
}

impl Gate {
    pub fn rxy(theta: f64, phi: f64, target: &str) -> Self {
        Self { kind: GateKind::Rxy { theta, phi }, targets: vec![target.into()] }
    }

    pub fn x180(target: &str) -> Self {
        Self::rxy(PI, 0.0, target)
    }

    pub fn x90(target: &str) -> Self {
        Self::rxy(FRAC_PI_2, 0.0, target)
    }

    pub fn x45(target: &str) -> Self {
        Self::rxy(FRAC_PI_4, 0.0, target)
    }

    pub fn y90(target: &str) -> Self {
        Self::rxy(FRAC_PI_2, FRAC_PI_2, target)
    }

    pub fn y180(target: &str) -> Self {
        Self::rxy(PI, FRAC_PI_2, target)
    }

    pub fn identity(target: &str) -> Self {
        Self { kind: GateKind::Identity, targets: vec![target.into()] }
    }

    pub fn cz(a: &str, b: &str) -> Self {
        Self { kind: GateKind::Cz, targets: vec![a.into(), b.into()] }
    }

    fn validate(&self, register: &RegisterSpec) -> Result<Vec<usize>> {
        if self.targets.len() != self.kind.arity() {
            return Err(Error::InvalidCircuit(format!(
                "{:?} takes {} target(s), got {}",
                self.kind,
                self.kind.arity(),
                self.targets.len()
            )));
        }
        let positions = self
            .targets
            .iter()
            .map(|t| {
                register
                    .position(t)
                    .ok_or_else(|| Error::InvalidCircuit(format!("qubit {t} not in register {register}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if positions.len() == 2 && positions[0] == positions[1] {
            return Err(Error::InvalidCircuit(format!("gate targets {} twice", self.targets[0])));
        }
        Ok(positions)
    }
}

/// Hadamard up to phase: `Y90` followed by `X180`.
pub fn compose_hadamard(target: &str) -> Vec<Gate> {
    vec![Gate::y90(target), Gate::x180(target)]
}

/// CNOT as `H(target) . CZ . H(target)`.
pub fn compose_cnot(control: &str, target: &str) -> Result<Vec<Gate>> {
    if control == target {
        return Err(Error::InvalidCircuit(format!("CNOT control and target are both {control}")));
    }
    let mut gates = compose_hadamard(target);
    gates.push(Gate::cz(control, target));
    gates.extend(compose_hadamard(target));
    Ok(gates)
}

/// Gate as written in circuit definition files. Composite entries expand
/// into native gates when the circuit is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase", deny_unknown_fields)]
pub enum GateSpec {
    Rxy { theta: f64, phi: f64, target: String },
    X180 { target: String },
    X90 { target: String },
    X45 { target: String },
    Y180 { target: String },
    Y90 { target: String },
    #[serde(alias = "i")]
    Identity { target: String },
    H { target: String },
    Cz { qubits: [String; 2] },
    Cnot { control: String, target: String },
}

impl GateSpec {
    pub fn expand(&self) -> Result<Vec<Gate>> {
        Ok(match self {
            GateSpec::Rxy { theta, phi, target } => vec![Gate::rxy(*theta, *phi, target)],
            GateSpec::X180 { target } => vec![Gate::x180(target)],
            GateSpec::X90 { target } => vec![Gate::x90(target)],
            GateSpec::X45 { target } => vec![Gate::x45(target)],
            GateSpec::Y180 { target } => vec![Gate::y180(target)],
            GateSpec::Y90 { target } => vec![Gate::y90(target)],
            GateSpec::Identity { target } => vec![Gate::identity(target)],
            GateSpec::H { target } => compose_hadamard(target),
            GateSpec::Cz { qubits: [a, b] } => vec![Gate::cz(a, b)],
            GateSpec::Cnot { control, target } => compose_cnot(control, target)?,
        })
    }
}

/// Editable circuit definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub name: String,
    pub register: RegisterSpec,
    pub gates: Vec<GateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitFile", into = "CircuitFile")]
pub struct Circuit {
    name: String,
    register: RegisterSpec,
    source: Vec<GateSpec>,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(name: impl Into<String>, register: RegisterSpec, specs: Vec<GateSpec>) -> Result<Self> {
        let mut gates = Vec::new();
        for spec in &specs {
            for gate in spec.expand()? {
                gate.validate(&register)?;
                gates.push(gate);
            }
        }
        Ok(Self { name: name.into(), register, source: specs, gates })
    }

    pub fn empty(name: impl Into<String>, register: RegisterSpec) -> Self {
        Self { name: name.into(), register, source: vec![], gates: vec![] }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    /// Native gates after expansion of composites.
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn source(&self) -> &[GateSpec] {
        &self.source
    }

    /// Gates preparing basis state `index` from `|0..0>`: X180 on every
    /// qubit that must read 1, identity elsewhere.
    pub fn preparation(register: &RegisterSpec, index: usize) -> Vec<Gate> {
        register
            .labels()
            .iter()
            .enumerate()
            .map(|(q, label)| if register.bit(index, q) == 1 { Gate::x180(label) } else { Gate::identity(label) })
            .collect()
    }
}

impl TryFrom<CircuitFile> for Circuit {
    type Error = Error;

    fn try_from(f: CircuitFile) -> Result<Self> {
        Circuit::new(f.name, f.register, f.gates)
    }
}

impl From<Circuit> for CircuitFile {
    fn from(c: Circuit) -> Self {
        CircuitFile { name: c.name, register: c.register, gates: c.source }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    register: RegisterSpec,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn basis(register: RegisterSpec, index: usize) -> Result<Self> {
        let d = register.dimension();
        if index >= d {
            return Err(Error::InvalidBasisState(index.to_string()));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); d];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { register, amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies a gate in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        let positions = gate.validate(&self.register)?;
        let n = self.register.n_qubits();
        let u = gate.kind.unitary();
        match *positions.as_slice() {
            [q] => {
                let mask = 1 << (n - 1 - q);
                for i in 0..self.amplitudes.len() {
                    if i & mask == 0 {
                        let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | mask]);
                        self.amplitudes[i] = u[0][0] * a0 + u[0][1] * a1;
                        self.amplitudes[i | mask] = u[1][0] * a0 + u[1][1] * a1;
                    }
                }
            }
            [qa, qb] => {
                let (ma, mb) = (1 << (n - 1 - qa), 1 << (n - 1 - qb));
                for i in 0..self.amplitudes.len() {
                    if i & (ma | mb) == 0 {
                        let idx = [i, i | mb, i | ma, i | ma | mb];
                        let old = idx.map(|k| self.amplitudes[k]);
                        for (r, &k) in idx.iter().enumerate() {
                            self.amplitudes[k] = (0..4).map(|c| u[r][c] * old[c]).sum();
                        }
                    }
                }
            }
            _ => unreachable!("validated arity"),
        }
        Ok(())
    }
}

/// Returns the state after applying `gate`.
pub fn apply_gate(state: &Statevector, gate: &Gate) -> Result<Statevector> {
    let mut next = state.clone();
    next.apply(gate)?;
    Ok(next)
}

/// Noiseless outcome distribution of `circuit` started from the basis state
/// written as `initial` (e.g. `"01"`).
pub fn ideal_distribution(circuit: &Circuit, initial: &str) -> Result<ProbabilityVector> {
    let index = circuit.register.parse_basis(initial)?;
    ideal_distribution_from(circuit, index)
}

pub fn ideal_distribution_from(circuit: &Circuit, index: usize) -> Result<ProbabilityVector> {
    let register = circuit.register.clone();
    let mut state = Statevector::basis(register.clone(), 0)?;
    for gate in Circuit::preparation(&register, index).iter().chain(&circuit.gates) {
        state.apply(gate)?;
    }
    let mut p = state.probabilities();
    // Rounding only; the norm is preserved to ~1e-15.
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    ProbabilityVector::new(register, p)
}

/// The four validation circuits on `<Q0, Q2>`, as shipped in `fixtures/circuits`.
pub fn builtin_circuits() -> Vec<Circuit> {
    [
        include_str!("../fixtures/circuits/h-x45-x90.json"),
        include_str!("../fixtures/circuits/h-y90.json"),
        include_str!("../fixtures/circuits/cnot.json"),
        include_str!("../fixtures/circuits/h-cnot.json"),
    ]
    .iter()
    .map(|text| Circuit::from_json(text).expect("builtin circuit fixture parses"))
    .collect()
}

pub fn builtin_circuit(name: &str) -> Option<Circuit> {
    builtin_circuits().into_iter().find(|c| c.name == name)
}
