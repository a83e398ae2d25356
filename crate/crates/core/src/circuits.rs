//! Gate-level circuits: builders for the cooling protocols, multi-controlled
//! X decomposition, transpilation to `{CX, SX, RZ}`, and unitary extraction.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dc::mirror_pairs;
use crate::error::{Error, Result};
use crate::linalg::{gates, qubit_mask, ComplexMatrix};

/// Largest register for which [`circuit_unitary`] builds a dense matrix.
pub const MAX_UNITARY_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    X(usize),
    SX(usize),
    RZ { theta: f64, qubit: usize },
    CX { control: usize, target: usize },
    MCX { controls: Vec<usize>, target: usize },
}

impl Gate {
    /// All qubits the gate touches, controls first.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::X(q) | Gate::SX(q) | Gate::RZ { qubit: q, .. } => vec![*q],
            Gate::CX { control, target } => vec![*control, *target],
            Gate::MCX { controls, target } => controls.iter().copied().chain([*target]).collect(),
        }
    }

    pub fn is_basis(&self) -> bool {
        matches!(self, Gate::SX(_) | Gate::RZ { .. } | Gate::CX { .. })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::X(q) => write!(f, "X {q}"),
            Gate::SX(q) => write!(f, "SX {q}"),
            Gate::RZ { theta, qubit } => write!(f, "RZ {theta:?} {qubit}"),
            Gate::CX { control, target } => write!(f, "CX {control} {target}"),
            Gate::MCX { controls, target } => {
                let list: Vec<String> = controls.iter().map(usize::to_string).collect();
                write!(f, "MCX {} {target}", list.join(","))
            }
        }
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("malformed gate line {line:?}"));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["X", q] => Ok(Gate::X(idx(q)?)),
            ["SX", q] => Ok(Gate::SX(idx(q)?)),
            ["RZ", theta, q] => Ok(Gate::RZ { theta: theta.parse().map_err(|_| bad())?, qubit: idx(q)? }),
            ["CX", c, t] => Ok(Gate::CX { control: idx(c)?, target: idx(t)? }),
            ["MCX", cs, t] => {
                Ok(Gate::MCX { controls: cs.split(',').map(idx).collect::<Result<_>>()?, target: idx(t)? })
            }
            _ => Err(bad()),
        }
    }
}

/// An ordered gate list on a fixed number of qubits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends a gate after checking that its qubits are distinct and in range.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::InvalidQubits(format!("qubit {q} on a {}-qubit circuit", self.n_qubits)));
        }
        let mut sorted = qs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != qs.len() {
            return Err(Error::InvalidQubits(format!("repeated qubit in {gate}")));
        }
        if let Gate::MCX { controls, .. } = &gate {
            if controls.is_empty() {
                return Err(Error::InvalidQubits("MCX needs at least one control".into()));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        gates.into_iter().try_for_each(|g| self.push(g))
    }

    pub fn is_transpiled(&self) -> bool {
        self.gates.iter().all(Gate::is_basis)
    }

    /// One gate per line, e.g. `CX 0 1` or `MCX 1,2 0`.
    pub fn to_text(&self) -> String {
        self.gates.iter().map(|g| format!("{g}\n")).collect()
    }

    pub fn from_text(n_qubits: usize, text: &str) -> Result<Self> {
        let mut c = Self::new(n_qubits);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            c.push(line.parse()?)?;
        }
        Ok(c)
    }

    /// The circuit repeated `times` times.
    pub fn repeated(&self, times: usize) -> Self {
        let gates = (0..times).flat_map(|_| self.gates.iter().cloned()).collect();
        Self { n_qubits: self.n_qubits, gates }
    }
}

fn mcx(controls: Vec<usize>, target: usize) -> Gate {
    if controls.len() == 1 {
        Gate::CX { control: controls[0], target }
    } else {
        Gate::MCX { controls, target }
    }
}

/// The TSAC compression circuit on `n` qubits; the last qubit is the reset
/// qubit and qubit 0 the target.
pub fn build_tsac_circuit(n: usize) -> Result<Circuit> {
    if n < 2 {
        return Err(Error::param(format!("TSAC needs at least two qubits, got {n}")));
    }
    let reset = n - 1;
    let ladder = |i: usize| mcx(((i + 1)..n).collect(), i);
    let mut c = Circuit::new(n);
    c.push(Gate::X(reset))?;
    c.extend((0..n - 1).rev().map(ladder))?;
    c.push(mcx((0..reset).collect(), reset))?;
    c.push(Gate::X(reset))?;
    c.extend((0..n - 1).map(ladder))?;
    c.push(Gate::X(reset))?;
    Ok(c)
}

/// Mirror-protocol dynamic-cooling circuit: one transposition per flagged
/// complement pair.
pub fn build_dc_mirror_circuit(n: usize) -> Result<Circuit> {
    if n < 2 {
        return Err(Error::param(format!("dynamic cooling needs at least two qubits, got {n}")));
    }
    let mut c = Circuit::new(n);
    for pair in mirror_pairs(n).into_iter().filter(|p| p.swap) {
        let fan_out: Vec<Gate> = (1..n).map(|j| Gate::CX { control: 0, target: j }).collect();
        // After the fan-out both members agree on qubits 1..n and differ on qubit 0.
        let reduced = pair.x ^ if pair.x & qubit_mask(n, 0) != 0 { (1 << (n - 1)) - 1 } else { 0 };
        let flips: Vec<Gate> = (1..n).filter(|&j| reduced & qubit_mask(n, j) == 0).map(Gate::X).collect();
        c.extend(fan_out.iter().cloned())?;
        c.extend(flips.iter().cloned())?;
        c.push(mcx((1..n).collect(), 0))?;
        c.extend(flips.into_iter().rev())?;
        c.extend(fan_out.into_iter().rev())?;
    }
    Ok(c)
}

fn hadamard(q: usize) -> [Gate; 3] {
    [Gate::RZ { theta: FRAC_PI_2, qubit: q }, Gate::SX(q), Gate::RZ { theta: FRAC_PI_2, qubit: q }]
}

fn toffoli(a: usize, b: usize, t: usize) -> Vec<Gate> {
    let cx = |control, target| Gate::CX { control, target };
    let rz = |theta, qubit| Gate::RZ { theta, qubit };
    let mut g = Vec::with_capacity(21);
    g.extend(hadamard(t));
    g.extend([cx(b, t), rz(-FRAC_PI_4, t), cx(a, t), rz(FRAC_PI_4, t), cx(b, t), rz(-FRAC_PI_4, t), cx(a, t)]);
    g.extend([rz(FRAC_PI_4, b), rz(FRAC_PI_4, t)]);
    g.extend(hadamard(t));
    g.extend([cx(a, b), rz(FRAC_PI_4, a), rz(-FRAC_PI_4, b), cx(a, b)]);
    g
}

/// Diagonal phase `(-1)^{x_0 x_1 ... x_{m-1}}` over `qubits`, built from
/// parity rotations walked in Gray-code order.
fn multi_controlled_z(qubits: &[usize]) -> Vec<Gate> {
    let m = qubits.len();
    let weight = PI / (1u64 << (m - 1)) as f64;
    let angle = |size: u32| if size % 2 == 1 { weight } else { -weight };
    let mut out = Vec::new();
    for end in (0..m).rev() {
        let last = qubits[end];
        let rest = &qubits[..end];
        out.push(Gate::RZ { theta: angle(1), qubit: last });
        for step in 1..(1usize << rest.len()) {
            let flipped = step.trailing_zeros() as usize;
            let gray = step ^ (step >> 1);
            out.push(Gate::CX { control: rest[flipped], target: last });
            out.push(Gate::RZ { theta: angle(gray.count_ones() + 1), qubit: last });
        }
        if let Some(&top) = rest.last() {
            out.push(Gate::CX { control: top, target: last });
        }
    }
    out
}

/// Decomposes a multi-controlled X into `{CX, SX, RZ}` without ancillas.
///
/// One control gives a single CX and two controls the standard 6-CX Toffoli
/// network. Larger gates conjugate a multi-controlled Z by Hadamards on the
/// target and use `2^(k+1) - 2` CX gates for `k` controls.
pub fn mcx_decompose(controls: &[usize], target: usize) -> Vec<Gate> {
    match controls {
        [] => vec![Gate::X(target)],
        [c] => vec![Gate::CX { control: *c, target }],
        [a, b] => toffoli(*a, *b, target),
        _ => {
            let mut qubits = controls.to_vec();
            qubits.push(target);
            let mut out = hadamard(target).to_vec();
            out.extend(multi_controlled_z(&qubits));
            out.extend(hadamard(target));
            out
        }
    }
}

/// Rewrites every gate in terms of `{CX, SX, RZ}`, up to global phase.
pub fn transpile(c: &Circuit) -> Circuit {
    let mut gates = Vec::with_capacity(c.len());
    for g in &c.gates {
        match g {
            Gate::X(q) => gates.extend([Gate::SX(*q), Gate::SX(*q)]),
            Gate::MCX { controls, target } => gates.extend(mcx_decompose(controls, *target)),
            other => gates.push(other.clone()),
        }
    }
    Circuit { n_qubits: c.n_qubits, gates }
}

fn require_transpiled(c: &Circuit) -> Result<()> {
    match c.gates.iter().find(|g| matches!(g, Gate::MCX { .. })) {
        Some(g) => Err(Error::NotTranspiled(g.to_string())),
        None => Ok(()),
    }
}

/// Number of CX gates.
pub fn count_cx(c: &Circuit) -> Result<usize> {
    require_transpiled(c)?;
    Ok(c.gates.iter().filter(|g| matches!(g, Gate::CX { .. })).count())
}

/// Position and `(control, target)` of every CX, in circuit order.
pub fn cnot_locations(c: &Circuit) -> Result<Vec<(usize, (usize, usize))>> {
    require_transpiled(c)?;
    Ok(c.gates
        .iter()
        .enumerate()
        .filter_map(|(i, g)| match g {
            Gate::CX { control, target } => Some((i, (*control, *target))),
            _ => None,
        })
        .collect())
}

/// Left-multiplies `m` by the full-space matrix of `gate`.
pub(crate) fn left_apply(m: &mut ComplexMatrix, n: usize, gate: &Gate) {
    let d = m.rows();
    let cols = m.cols();
    let data = m.as_mut_slice();
    let swap_rows = |data: &mut [Complex64], a: usize, b: usize| {
        for j in 0..cols {
            data.swap(a * cols + j, b * cols + j);
        }
    };
    match gate {
        Gate::X(q) | Gate::SX(q) | Gate::RZ { qubit: q, .. } => {
            let g = match gate {
                Gate::X(_) => gates::x(),
                Gate::SX(_) => gates::sx(),
                Gate::RZ { theta, .. } => gates::rz(*theta),
                _ => unreachable!(),
            };
            let mask = qubit_mask(n, *q);
            for i in (0..d).filter(|i| i & mask == 0) {
                let (lo, hi) = (i * cols, (i | mask) * cols);
                for j in 0..cols {
                    let (a, b) = (data[lo + j], data[hi + j]);
                    data[lo + j] = g[(0, 0)] * a + g[(0, 1)] * b;
                    data[hi + j] = g[(1, 0)] * a + g[(1, 1)] * b;
                }
            }
        }
        Gate::CX { control, target } => {
            let (cm, tm) = (qubit_mask(n, *control), qubit_mask(n, *target));
            for i in (0..d).filter(|i| i & cm != 0 && i & tm == 0) {
                swap_rows(data, i, i | tm);
            }
        }
        Gate::MCX { controls, target } => {
            let cm: usize = controls.iter().map(|&q| qubit_mask(n, q)).sum();
            let tm = qubit_mask(n, *target);
            for i in (0..d).filter(|i| i & cm == cm && i & tm == 0) {
                swap_rows(data, i, i | tm);
            }
        }
    }
}

/// Dense unitary of the whole circuit.
pub fn circuit_unitary(c: &Circuit) -> Result<ComplexMatrix> {
    if c.n_qubits > MAX_UNITARY_QUBITS {
        return Err(Error::SizeLimit(format!(
            "dense unitary of {} qubits exceeds the {MAX_UNITARY_QUBITS}-qubit cap",
            c.n_qubits
        )));
    }
    let mut u = ComplexMatrix::identity(1 << c.n_qubits);
    for g in &c.gates {
        left_apply(&mut u, c.n_qubits, g);
    }
    Ok(u)
}

/// Number of CX gates in the transpiled TSAC circuit on `n` qubits.
pub fn tsac_cx_count(n: usize) -> Result<usize> {
    count_cx(&transpile(&build_tsac_circuit(n)?))
}

/// Number of CX gates in the transpiled dynamic-cooling circuit on `n` qubits.
pub fn dc_cx_count(n: usize) -> Result<usize> {
    count_cx(&transpile(&build_dc_mirror_circuit(n)?))
}
