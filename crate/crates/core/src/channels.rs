//! Kraus channels, two-qubit gate-noise models, and the depolarizing and
//! reset maps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gates, kron, local, qubit_mask, ComplexMatrix, DensityMatrix};

/// Completeness tolerance for `sum K^dagger K = I`.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// A completely positive trace-preserving map given by Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    n_qubits: usize,
    ops: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Builds a channel, checking shapes and completeness.
    pub fn new(n_qubits: usize, ops: Vec<ComplexMatrix>) -> Result<Self> {
        let d = 1usize << n_qubits;
        if ops.is_empty() {
            return Err(Error::InvalidInput("a channel needs at least one Kraus operator".into()));
        }
        if let Some(bad) = ops.iter().find(|k| k.rows() != d || k.cols() != d) {
            return Err(Error::dims(format!("{}x{} Kraus operator on {n_qubits} qubits", bad.rows(), bad.cols())));
        }
        let ch = Self { n_qubits, ops };
        let err = ch.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(Error::InvalidInput(format!("Kraus operators are incomplete (deviation {err:.3e})")));
        }
        Ok(ch)
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self { n_qubits, ops: vec![ComplexMatrix::identity(1 << n_qubits)] }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    /// Largest entrywise deviation of `sum K^dagger K` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let d = self.dim();
        let mut sum = ComplexMatrix::zeros(d, d);
        for k in &self.ops {
            sum = sum.add(&k.adjoint().matmul(k).expect("square")).expect("same shape");
        }
        sum.max_abs_diff(&ComplexMatrix::identity(d))
    }
}

/// Trace of the channel as a superoperator, `sum_i |Tr K_i|^2`.
pub fn superop_trace(ch: &KrausChannel) -> f64 {
    ch.ops.iter().map(|k| k.trace().norm_sqr()).sum()
}

/// Twirled survival weight `(Tr(channel) - 1) / (d^2 - 1)`.
pub fn q_param(ch: &KrausChannel, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::param(format!("dimension {d} must be at least 2")));
    }
    if d != ch.dim() {
        return Err(Error::dims(format!("channel acts on dimension {}, not {d}", ch.dim())));
    }
    let d2 = (d * d) as f64;
    Ok((superop_trace(ch) - 1.0) / (d2 - 1.0))
}

/// Which physical two-qubit error process follows every CX.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Bitflip,
    Timekeeping,
    Depolarizing,
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::None => "none",
            NoiseKind::Bitflip => "bitflip",
            NoiseKind::Timekeeping => "timekeeping",
            NoiseKind::Depolarizing => "depolarizing",
        })
    }
}

/// A two-qubit noise process in the form `(1 - p) rho + p Lambda(rho)`.
#[derive(Debug, Clone)]
pub struct GateNoiseModel {
    kind: NoiseKind,
    parameter: f64,
    error_probability: f64,
    error_part: KrausChannel,
    channel: KrausChannel,
    local_ops: Vec<LocalOp>,
}

#[derive(Debug, Clone)]
enum LocalOp {
    Monomial(local::Monomial),
    General(ComplexMatrix),
}

fn pauli(idx: usize) -> ComplexMatrix {
    match idx {
        0 => ComplexMatrix::identity(2),
        1 => gates::x(),
        2 => gates::y(),
        _ => gates::z(),
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl GateNoiseModel {
    fn assemble(kind: NoiseKind, parameter: f64, p: f64, error_part: KrausChannel, ops: Vec<ComplexMatrix>) -> Self {
        let channel = KrausChannel::new(2, ops).expect("noise models are complete by construction");
        let local_ops = channel
            .ops
            .iter()
            .map(|k| match local::Monomial::from_matrix(k) {
                Some(m) => LocalOp::Monomial(m),
                None => LocalOp::General(k.clone()),
            })
            .collect();
        Self { kind, parameter, error_probability: p, error_part, channel, local_ops }
    }

    /// Noiseless gates.
    pub fn none() -> Self {
        Self::assemble(NoiseKind::None, 0.0, 0.0, KrausChannel::identity(2), vec![ComplexMatrix::identity(4)])
    }

    /// Independent bit flips with probability `chi` on each qubit of the pair.
    pub fn bitflip(chi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&chi) {
            return Err(Error::param(format!("bit-flip probability {chi} outside [0, 1]")));
        }
        let i2 = ComplexMatrix::identity(2);
        let xi = kron(&gates::x(), &i2);
        let ix = kron(&i2, &gates::x());
        let xx = kron(&gates::x(), &gates::x());
        let p = 2.0 * chi - chi * chi;
        let single = chi * (1.0 - chi);
        let error_part = if p > 0.0 {
            let ops: Vec<ComplexMatrix> = [(single, &xi), (single, &ix), (chi * chi, &xx)]
                .into_iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, k)| k.scale(real((w / p).sqrt())))
                .collect();
            KrausChannel::new(2, ops)?
        } else {
            KrausChannel::identity(2)
        };
        let ops = vec![
            ComplexMatrix::identity(4).scale(real(1.0 - chi)),
            xi.scale(real(single.sqrt())),
            ix.scale(real(single.sqrt())),
            xx.scale(real(chi)),
        ];
        Ok(Self::assemble(NoiseKind::Bitflip, chi, p, error_part, ops))
    }

    /// With probability `p` the gate fires once more, i.e. an extra CX acts
    /// with the first qubit of the pair as control.
    pub fn timekeeping(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param(format!("timekeeping probability {p} outside [0, 1)")));
        }
        let extra = gates::cx();
        let error_part = KrausChannel::new(2, vec![extra.clone()])?;
        let ops = vec![ComplexMatrix::identity(4).scale(real((1.0 - p).sqrt())), extra.scale(real(p.sqrt()))];
        Ok(Self::assemble(NoiseKind::Timekeeping, p, p, error_part, ops))
    }

    /// Two-qubit depolarizing noise `(1 - s) rho + s * I/4 (x) Tr(rho)`,
    /// written as a uniform Pauli mixture.
    pub fn depolarizing(strength: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::param(format!("depolarizing strength {strength} outside [0, 1]")));
        }
        let paulis: Vec<ComplexMatrix> =
            (0..16).map(|i| kron(&pauli(i / 4), &pauli(i % 4)).scale(real(0.25))).collect();
        let error_part = KrausChannel::new(2, paulis.clone())?;
        let mut ops = vec![ComplexMatrix::identity(4).scale(real((1.0 - strength).sqrt()))];
        ops.extend(paulis.iter().map(|k| k.scale(real(strength.sqrt()))));
        Ok(Self::assemble(NoiseKind::Depolarizing, strength, strength, error_part, ops))
    }

    pub fn from_kind(kind: NoiseKind, parameter: f64) -> Result<Self> {
        match kind {
            NoiseKind::None => Ok(Self::none()),
            NoiseKind::Bitflip => Self::bitflip(parameter),
            NoiseKind::Timekeeping => Self::timekeeping(parameter),
            NoiseKind::Depolarizing => Self::depolarizing(parameter),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// The model's own parameter (`chi`, `p`, or the strength).
    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    /// Probability `p` that an error occurs at all.
    pub fn error_probability(&self) -> f64 {
        self.error_probability
    }

    /// Normalized error map `Lambda`.
    pub fn error_part(&self) -> &KrausChannel {
        &self.error_part
    }

    /// The full two-qubit channel.
    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn is_noiseless(&self) -> bool {
        self.error_probability == 0.0
    }

    /// Applies the full channel to qubits `(first, second)` of an `n`-qubit
    /// matrix by local contraction. The first tensor factor of each Kraus
    /// operator acts on `first`.
    pub fn apply_local(&self, m: &ComplexMatrix, n: usize, first: usize, second: usize) -> ComplexMatrix {
        if self.is_noiseless() {
            return m.clone();
        }
        let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
        for op in &self.local_ops {
            match op {
                LocalOp::Monomial(k) => local::accumulate_monomial(&mut out, m, n, first, second, k),
                LocalOp::General(k) => local::accumulate_general(&mut out, m, n, first, second, k),
            }
        }
        out
    }
}

/// Places a two-qubit channel on `pair` of an `n`-qubit register, acting as
/// the identity on the remaining qubits. The first tensor factor of each
/// Kraus operator lands on `pair.0`.
pub fn embed_two_qubit(ch: &KrausChannel, pair: (usize, usize), n: usize) -> Result<KrausChannel> {
    let (a, b) = pair;
    if ch.n_qubits != 2 {
        return Err(Error::dims(format!("expected a two-qubit channel, got {} qubits", ch.n_qubits)));
    }
    if a == b || a >= n || b >= n {
        return Err(Error::InvalidQubits(format!("pair ({a}, {b}) on {n} qubits")));
    }
    let d = 1usize << n;
    let (ma, mb) = (qubit_mask(n, a), qubit_mask(n, b));
    let local_of = |i: usize| (usize::from(i & ma != 0) << 1) | usize::from(i & mb != 0);
    let rest = !(ma | mb);
    let ops = ch
        .ops
        .iter()
        .map(|k| {
            let mut full = ComplexMatrix::zeros(d, d);
            for i in 0..d {
                for j in (0..d).filter(|j| j & rest == i & rest) {
                    full[(i, j)] = k[(local_of(i), local_of(j))];
                }
            }
            full
        })
        .collect();
    Ok(KrausChannel { n_qubits: n, ops })
}

/// `sum_i K_i rho K_i^dagger` with full-space Kraus operators.
pub fn apply_channel(rho: &DensityMatrix, ch: &KrausChannel) -> Result<DensityMatrix> {
    if ch.dim() != rho.dim() {
        return Err(Error::dims(format!("channel on dimension {} applied to dimension {}", ch.dim(), rho.dim())));
    }
    let d = rho.dim();
    let mut out = ComplexMatrix::zeros(d, d);
    for k in &ch.ops {
        let term = k.matmul(rho.matrix())?.matmul(&k.adjoint())?;
        out.add_scaled_assign(&term, real(1.0));
    }
    Ok(DensityMatrix::from_trusted(out))
}

/// `(1 - eta) rho + eta I/d`.
pub fn depolarize(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param(format!("depolarizing strength {eta} outside [0, 1]")));
    }
    let mut m = rho.matrix().scale(real(1.0 - eta));
    let shift = eta / rho.dim() as f64;
    for i in 0..rho.dim() {
        m[(i, i)] += shift;
    }
    Ok(DensityMatrix::from_trusted(m))
}

/// Ground and excited populations of a qubit with polarization `epsilon`:
/// `(e^eps, e^-eps) / (e^eps + e^-eps)`.
pub fn thermal_populations(epsilon: f64) -> (f64, f64) {
    let ground = 1.0 / (1.0 + (-2.0 * epsilon).exp());
    let excited = 1.0 / (1.0 + (2.0 * epsilon).exp());
    (ground, excited)
}

/// Discards the last qubit and replaces it with a fresh thermal qubit of
/// polarization `epsilon`.
pub fn reset_channel(rho: &DensityMatrix, epsilon: f64) -> Result<DensityMatrix> {
    if rho.n_qubits() < 2 {
        return Err(Error::dims("reset needs at least two qubits"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("polarization {epsilon} must be positive")));
    }
    let (g, e) = thermal_populations(epsilon);
    let d = rho.dim();
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..d / 2 {
        for j in 0..d / 2 {
            let reduced = m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)];
            out[(2 * i, 2 * j)] = reduced * g;
            out[(2 * i + 1, 2 * j + 1)] = reduced * e;
        }
    }
    Ok(DensityMatrix::from_trusted(out))
}
