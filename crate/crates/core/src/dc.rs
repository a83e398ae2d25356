//! Single-shot dynamic cooling with the mirror protocol.

use serde::Serialize;

use crate::channels::depolarize;
use crate::error::{Error, Result};
use crate::gda::{eta_timekeeping, GdaEstimate};
use crate::linalg::{ComplexMatrix, DensityMatrix};

/// Planck constant in J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Largest register handled by the dense routines here.
pub const MAX_DC_QUBITS: usize = 12;

/// A basis state and its bitwise complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MirrorPair {
    pub x: usize,
    pub x_bar: usize,
    /// Whether the protocol exchanges the two populations.
    pub swap: bool,
}

/// All complement pairs on `n` qubits, smaller index first.
///
/// A pair is swapped when its members have different Hamming weight and the
/// lighter one has the target qubit (qubit 0) excited.
pub fn mirror_pairs(n: usize) -> Vec<MirrorPair> {
    let all = (1usize << n) - 1;
    let target = 1usize << (n - 1);
    (0..=all)
        .filter(|&x| x < x ^ all)
        .map(|x| {
            let x_bar = x ^ all;
            let (wx, wb) = (x.count_ones(), x_bar.count_ones());
            let lighter = if wx < wb { x } else { x_bar };
            MirrorPair { x, x_bar, swap: wx != wb && lighter & target != 0 }
        })
        .collect()
}

/// Image of each basis state under the mirror protocol.
pub fn dc_permutation(n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..1usize << n).collect();
    for p in mirror_pairs(n).into_iter().filter(|p| p.swap) {
        perm.swap(p.x, p.x_bar);
    }
    perm
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::param(format!("dynamic cooling needs at least two qubits, got {n}")));
    }
    if n > MAX_DC_QUBITS {
        return Err(Error::SizeLimit(format!("{n} qubits exceeds the {MAX_DC_QUBITS}-qubit cap")));
    }
    Ok(())
}

/// Permutation matrix of the mirror protocol.
pub fn dc_unitary(n: usize) -> Result<ComplexMatrix> {
    check_size(n)?;
    let perm = dc_permutation(n);
    let mut u = ComplexMatrix::zeros(perm.len(), perm.len());
    for (src, &dst) in perm.iter().enumerate() {
        u[(dst, src)] = num_complex::Complex64::new(1.0, 0.0);
    }
    Ok(u)
}

/// A qubit with transition frequency `frequency` (Hz, gap `h f`) in
/// equilibrium at `temperature` (K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalSpec {
    pub temperature: f64,
    pub frequency: f64,
}

impl ThermalSpec {
    pub fn new(temperature: f64, frequency: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::param(format!("temperature {temperature} K must be positive")));
        }
        if !(frequency > 0.0) {
            return Err(Error::param(format!("frequency {frequency} Hz must be positive")));
        }
        Ok(Self { temperature, frequency })
    }

    /// `h f / (k_B T)`.
    pub fn reduced_gap(&self) -> f64 {
        PLANCK * self.frequency / (BOLTZMANN * self.temperature)
    }

    pub fn ground_probability(&self) -> f64 {
        1.0 / (1.0 + (-self.reduced_gap()).exp())
    }

    pub fn excited_probability(&self) -> f64 {
        1.0 / (1.0 + self.reduced_gap().exp())
    }

    /// The same qubit's polarization `eps = h f / (2 k_B T)`.
    pub fn polarization(&self) -> f64 {
        0.5 * self.reduced_gap()
    }
}

/// Equilibrium single-qubit state `diag(p0, p1)`.
pub fn thermal_qubit(spec: &ThermalSpec) -> Result<DensityMatrix> {
    ThermalSpec::new(spec.temperature, spec.frequency)?;
    DensityMatrix::from_probabilities(&[spec.ground_probability(), spec.excited_probability()])
}

/// Target-qubit state after the exact mirror permutation on `n` thermal qubits.
pub fn ideal_dc_output(n: usize, spec: &ThermalSpec) -> Result<DensityMatrix> {
    check_size(n)?;
    let (g, e) = (spec.ground_probability(), spec.excited_probability());
    let perm = dc_permutation(n);
    let target = 1usize << (n - 1);
    let mut ground = 0.0;
    for (src, &dst) in perm.iter().enumerate() {
        if dst & target == 0 {
            let ones = src.count_ones() as i32;
            ground += g.powi(n as i32 - ones) * e.powi(ones);
        }
    }
    DensityMatrix::from_probabilities(&[ground, 1.0 - ground])
}

/// Ideal output mixed with `I/2` at the timekeeping strength for `n_tg` gates.
pub fn gda_dc_output(n: usize, spec: &ThermalSpec, p: f64, n_tg: usize) -> Result<(DensityMatrix, GdaEstimate)> {
    let ideal = ideal_dc_output(n, spec)?;
    let est = eta_timekeeping(p, n_tg, 1 << n)?;
    Ok((depolarize(&ideal, est.eta)?, est))
}

/// Temperature at which a qubit of frequency `f` has the populations of the
/// diagonal single-qubit state `rho`. A state with no excited population
/// gives zero.
pub fn effective_temperature(rho: &DensityMatrix, f: f64) -> Result<f64> {
    if rho.n_qubits() != 1 {
        return Err(Error::dims(format!("expected a single qubit, got {}", rho.n_qubits())));
    }
    if !(f > 0.0) {
        return Err(Error::param(format!("frequency {f} Hz must be positive")));
    }
    let probs = rho.probabilities();
    let (p0, p1) = (probs[0], probs[1]);
    if p1 >= p0 {
        return Err(Error::NegativeTemperature { p0, p1 });
    }
    if p1 <= 0.0 {
        return Ok(0.0);
    }
    Ok(PLANCK * f / (BOLTZMANN * (p0 / p1).ln()))
}
