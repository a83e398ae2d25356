//! Exact gate-level density-matrix simulation with Kraus noise after every CX.

use serde::Serialize;

use crate::channels::{apply_channel, embed_two_qubit, q_param, reset_channel, GateNoiseModel};
use crate::circuits::{build_dc_mirror_circuit, build_tsac_circuit, cnot_locations, transpile, Circuit, Gate};
use crate::dc::{effective_temperature, ThermalSpec};
use crate::error::{Error, Result};
use crate::linalg::{fidelity, local, partial_trace, trace_distance, ComplexMatrix, DensityMatrix, Tolerances};
use num_complex::Complex64;

/// Largest register accepted by the gate-level simulator.
pub const MAX_SIM_QUBITS: usize = 10;
/// Default convergence threshold on the trace distance between rounds.
pub const DEFAULT_CONV_TOL: f64 = 1e-12;
/// Default cap on the number of TSAC rounds.
pub const DEFAULT_MAX_ROUNDS: usize = 10_000;
/// Registers up to this many qubits get an exact trace distance every round.
const EXACT_STEP_QUBITS: usize = 6;

fn check_circuit(c: &Circuit, rho: &DensityMatrix) -> Result<()> {
    if let Some(g) = c.gates().iter().find(|g| !g.is_basis()) {
        return Err(Error::NotTranspiled(g.to_string()));
    }
    if c.n_qubits() != rho.n_qubits() {
        return Err(Error::dims(format!("{}-qubit circuit on a {}-qubit state", c.n_qubits(), rho.n_qubits())));
    }
    if c.n_qubits() > MAX_SIM_QUBITS {
        return Err(Error::SizeLimit(format!(
            "{} qubits exceeds the {MAX_SIM_QUBITS}-qubit simulator cap",
            c.n_qubits()
        )));
    }
    Ok(())
}

fn evolve(m: &mut ComplexMatrix, n: usize, c: &Circuit, noise: &GateNoiseModel) {
    let sx = crate::linalg::gates::sx();
    for g in c.gates() {
        match *g {
            Gate::SX(q) => local::conjugate_1q(m, n, q, &sx),
            Gate::RZ { theta, qubit } => local::conjugate_rz(m, n, qubit, theta),
            Gate::CX { control, target } => {
                local::conjugate_cx(m, n, control, target);
                if !noise.is_noiseless() {
                    *m = noise.apply_local(m, n, control, target);
                }
            }
            Gate::X(_) | Gate::MCX { .. } => unreachable!("checked by check_circuit"),
        }
    }
}

/// Runs a transpiled circuit, applying `noise` to each CX's qubit pair
/// (control as the first factor) right after the gate.
pub fn simulate_noisy_circuit(c: &Circuit, rho0: &DensityMatrix, noise: &GateNoiseModel) -> Result<DensityMatrix> {
    check_circuit(c, rho0)?;
    let mut m = rho0.matrix().clone();
    evolve(&mut m, c.n_qubits(), c, noise);
    Ok(DensityMatrix::from_trusted(m))
}

/// Reset of the last qubit followed by the noisy compression circuit.
pub fn tsac_round(rho: &DensityMatrix, c: &Circuit, noise: &GateNoiseModel, epsilon: f64) -> Result<DensityMatrix> {
    let reset = reset_channel(rho, epsilon)?;
    simulate_noisy_circuit(c, &reset, noise)
}

/// Settings for an iterated TSAC simulation.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub noise: GateNoiseModel,
    /// Polarization of the reset qubit and of the initial register.
    pub epsilon: f64,
    pub max_rounds: usize,
    pub conv_tol: f64,
}

impl SimConfig {
    pub fn new(n: usize, noise: GateNoiseModel, epsilon: f64) -> Self {
        Self { n, noise, epsilon, max_rounds: DEFAULT_MAX_ROUNDS, conv_tol: DEFAULT_CONV_TOL }
    }

    fn validate(&self) -> Result<()> {
        if !(2..=MAX_SIM_QUBITS).contains(&self.n) {
            return Err(Error::param(format!("qubit count {} outside [2, {MAX_SIM_QUBITS}]", self.n)));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::param(format!("convergence tolerance {} must be positive", self.conv_tol)));
        }
        if self.max_rounds == 0 {
            return Err(Error::param("at least one round is required"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param(format!("polarization {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Ground population of the target qubit after this round.
    pub population: f64,
    /// Trace distance to the previous round's state. Registers above six
    /// qubits report the upper bound `sqrt(d) ||diff||_F / 2` instead.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsacRun {
    /// Round 0 is the initial thermal register.
    pub trajectory: Vec<RoundRecord>,
    pub population: f64,
    pub converged: bool,
    /// False if step sizes grew during the last quarter of the run.
    pub tail_monotone: bool,
}

/// Decides `trace_distance(a, b) <= tol`, returning the distance (or an
/// upper bound for large registers) alongside.
fn step_size(a: &ComplexMatrix, b: &ComplexMatrix, n: usize, tol: f64) -> Result<(f64, bool)> {
    let frob = a.sub(b)?.frobenius_norm();
    let upper = 0.5 * (a.rows() as f64).sqrt() * frob;
    if n <= EXACT_STEP_QUBITS {
        let exact = trace_distance(a, b)?;
        return Ok((exact, exact <= tol));
    }
    if 0.5 * frob > tol {
        return Ok((upper, false));
    }
    if upper <= tol {
        return Ok((upper, true));
    }
    let exact = trace_distance(a, b)?;
    Ok((exact, exact <= tol))
}

/// Iterates TSAC rounds from the thermal product state until successive
/// states are within `conv_tol` in trace distance or `max_rounds` is hit.
pub fn run_tsac(cfg: &SimConfig) -> Result<TsacRun> {
    cfg.validate()?;
    let n = cfg.n;
    let circuit = transpile(&build_tsac_circuit(n)?);
    let p0 = crate::channels::thermal_populations(cfg.epsilon).0;
    let mut rho = DensityMatrix::product_diagonal(n, p0)?;
    let mut trajectory = vec![RoundRecord { round: 0, population: rho.ground_population(0), step: f64::NAN }];
    let mut converged = false;
    for round in 1..=cfg.max_rounds {
        let next = tsac_round(&rho, &circuit, &cfg.noise, cfg.epsilon)?;
        if cfg!(debug_assertions) {
            next.validate(&Tolerances::default()).expect("simulated state stays a density matrix");
        }
        let (step, done) = step_size(next.matrix(), rho.matrix(), n, cfg.conv_tol)?;
        rho = next;
        trajectory.push(RoundRecord { round, population: rho.ground_population(0), step });
        if done {
            converged = true;
            break;
        }
    }
    let tail_start = trajectory.len() - trajectory.len() / 4;
    let tail_monotone =
        trajectory[tail_start.max(2)..].windows(2).all(|w| w[1].step <= w[0].step * (1.0 + 1e-6) + 1e-15);
    Ok(TsacRun { population: rho.ground_population(0), trajectory, converged, tail_monotone })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcRun {
    pub ground_population: f64,
    pub temperature: f64,
    #[serde(skip)]
    pub target: DensityMatrix,
}

/// Runs the transpiled mirror circuit with gate noise on `n` thermal qubits
/// and reads off the target qubit.
pub fn run_dc(n: usize, spec: &ThermalSpec, noise: &GateNoiseModel) -> Result<DcRun> {
    if n > 8 {
        return Err(Error::SizeLimit(format!("gate-level dynamic cooling is limited to 8 qubits, got {n}")));
    }
    let circuit = transpile(&build_dc_mirror_circuit(n)?);
    let rho0 = DensityMatrix::product_diagonal(n, spec.ground_probability())?;
    let out = simulate_noisy_circuit(&circuit, &rho0, noise)?;
    let dims = vec![2; n];
    let target = partial_trace(&out, &[0], &dims)?;
    let temperature = effective_temperature(&target, spec.frequency)?;
    Ok(DcRun { ground_population: target.probabilities()[0], temperature, target })
}

/// Mean fidelity for one repetition count of the 2-design check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoDesignRow {
    pub repetitions: usize,
    pub locations: usize,
    pub fidelity: f64,
}

/// Checks how closely noise inserted at one CX location, averaged over the
/// noiseless circuit around it, resembles a depolarizing channel.
///
/// For each qubit pair `k` carrying a CX, the error map of `noise` (lower
/// qubit as first factor) is conjugated by every circuit prefix `D_j` that
/// ends on a CX of that pair and averaged:
/// `mean_j D_j^dagger Lambda_k D_j (rho0)`. The result is compared with
/// `q_k rho0 + (1 - q_k) I/d`, and fidelities are averaged over pairs. Zero
/// repetitions means no conjugation (`D = I`), with pairs taken from a
/// single repetition.
pub fn twodesign_validation(
    n: usize,
    repetitions: &[usize],
    p_init: f64,
    noise: &GateNoiseModel,
) -> Result<Vec<TwoDesignRow>> {
    if !(2..=6).contains(&n) {
        return Err(Error::param(format!("2-design check supports 2 to 6 qubits, got {n}")));
    }
    let base = transpile(&build_tsac_circuit(n)?);
    let rho0 = DensityMatrix::product_diagonal(n, p_init)?;
    let d = 1usize << n;
    let identity = ComplexMatrix::identity(d);

    let pair_of = |(c, t): (usize, usize)| (c.min(t), c.max(t));
    let mut pairs: Vec<(usize, usize)> = cnot_locations(&base)?.into_iter().map(|(_, p)| pair_of(p)).collect();
    pairs.sort_unstable();
    pairs.dedup();

    let mut error_maps = Vec::with_capacity(pairs.len());
    for &pair in &pairs {
        let lambda = embed_two_qubit(noise.error_part(), pair, n)?;
        let q = q_param(&lambda, d)?;
        let target = rho0
            .matrix()
            .scale(Complex64::new(q, 0.0))
            .add(&identity.scale(Complex64::new((1.0 - q) / d as f64, 0.0)))?;
        error_maps.push((lambda, DensityMatrix::from_trusted(target)));
    }

    let mut rows = Vec::with_capacity(repetitions.len());
    for &reps in repetitions {
        let mut sums = vec![ComplexMatrix::zeros(d, d); pairs.len()];
        let mut counts = vec![0usize; pairs.len()];
        if reps == 0 {
            for (k, (lambda, _)) in error_maps.iter().enumerate() {
                sums[k] = apply_channel(&rho0, lambda)?.into_matrix();
                counts[k] = 1;
            }
        } else {
            let circuit = base.repeated(reps);
            let mut prefix = ComplexMatrix::identity(d);
            for g in circuit.gates() {
                crate::circuits::left_apply(&mut prefix, n, g);
                if let Gate::CX { control, target } = *g {
                    let k = pairs.binary_search(&pair_of((control, target))).expect("pair listed");
                    let forward = prefix.matmul(rho0.matrix())?.matmul(&prefix.adjoint())?;
                    let noisy = apply_channel(&DensityMatrix::from_trusted(forward), &error_maps[k].0)?;
                    let back = prefix.adjoint().matmul(noisy.matrix())?.matmul(&prefix)?;
                    sums[k].add_scaled_assign(&back, Complex64::new(1.0, 0.0));
                    counts[k] += 1;
                }
            }
        }
        let mut total = 0.0;
        for (k, (_, reference)) in error_maps.iter().enumerate() {
            let mean = sums[k].scale(Complex64::new(1.0 / counts[k] as f64, 0.0));
            total += fidelity(&DensityMatrix::from_trusted(mean), reference)?;
        }
        rows.push(TwoDesignRow { repetitions: reps, locations: pairs.len(), fidelity: total / pairs.len() as f64 });
    }
    Ok(rows)
}
