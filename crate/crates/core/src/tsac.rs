//! Markov model of iterative two-sort algorithmic cooling (TSAC).
//!
//! One round resets the last qubit to a thermal state of polarization `eps`
//! and applies a fixed permutation of the basis. On the `d_c = 2^{n_c}`
//! diagonal entries of the computational register this acts as a
//! column-stochastic matrix; global depolarizing noise of strength `eta`
//! mixes each column with the uniform distribution. The steady state has the
//! closed form
//!
//! ```text
//! v_k = z1 * lambda1^(k-1) + z2 * lambda2^(k-1) + 1/d_c,   k = 1..d_c
//! ```
//!
//! where `lambda1 >= 1 >= lambda2` solve
//! `(1 + E) lambda^2 - (2 + d_c C) lambda + (1 - E) = 0` with `E = tanh eps`
//! and `C = 2 eta / (d_c (1 - eta))`.

use serde::Serialize;

use crate::channels::{thermal_populations, NoiseKind};
use crate::circuits::tsac_cx_count;
use crate::error::{Error, Result};
use crate::gda::{eta_for, Regime};

/// Below this strength the noiseless closed form is used.
pub const IDEAL_SWITCH: f64 = 1e-12;
/// Iteration cap for [`steady_state_power`].
pub const POWER_MAX_ITERATIONS: usize = 10_000_000;
/// Largest computational register supported by the transition-matrix model.
pub const MAX_COMPUTATIONAL_QUBITS: usize = 24;

/// Round-to-round transition matrix of the computational diagonal,
/// `(1 - eta) T + eta / d_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    n_c: usize,
    epsilon: f64,
    eta: f64,
    up: f64,
    down: f64,
}

fn check_register(n_c: usize, epsilon: f64) -> Result<()> {
    if n_c == 0 || n_c > MAX_COMPUTATIONAL_QUBITS {
        return Err(Error::param(format!("computational qubit count {n_c} outside [1, {MAX_COMPUTATIONAL_QUBITS}]")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("polarization {epsilon} must be positive and finite")));
    }
    Ok(())
}

/// The noiseless transition matrix.
pub fn ideal_transition(n_c: usize, epsilon: f64) -> Result<TransitionMatrix> {
    noisy_transition(n_c, epsilon, 0.0)
}

/// The transition matrix under a global depolarizing channel of strength
/// `eta` applied once per round.
pub fn noisy_transition(n_c: usize, epsilon: f64, eta: f64) -> Result<TransitionMatrix> {
    check_register(n_c, epsilon)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param(format!("depolarizing strength {eta} outside [0, 1]")));
    }
    let (up, down) = thermal_populations(epsilon);
    Ok(TransitionMatrix { n_c, epsilon, eta, up, down })
}

impl TransitionMatrix {
    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn dim(&self) -> usize {
        1 << self.n_c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn ideal_entry(&self, i: usize, j: usize) -> f64 {
        let last = self.dim() - 1;
        let mut x = 0.0;
        if i + 1 == j || (i == 0 && j == 0) {
            x += self.up;
        }
        if j + 1 == i || (i == last && j == last) {
            x += self.down;
        }
        x
    }

    /// Entry in row `i`, column `j` (zero-based).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (1.0 - self.eta) * self.ideal_entry(i, j) + self.eta / self.dim() as f64
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|idx| self.entry(idx / d, idx % d)).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|j| (0..d).map(|i| self.entry(i, j)).sum()).collect()
    }

    /// `out = T' v`, using the band structure of the ideal matrix.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(v.len(), d);
        let keep = 1.0 - self.eta;
        let background = self.eta / d as f64 * v.iter().sum::<f64>();
        if d == 1 {
            out[0] = v[0];
            return;
        }
        for i in 0..d {
            let from_above = if i + 1 < d { self.up * v[i + 1] } else { self.down * v[i] };
            let from_below = if i > 0 { self.down * v[i - 1] } else { self.up * v[i] };
            out[i] = keep * (from_above + from_below) + background;
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }
}

/// Stationary vector found by repeated multiplication from the uniform
/// distribution, stopping once `||T v - v||_1 <= tol`.
pub fn steady_state_power(t: &TransitionMatrix, tol: f64) -> Result<Vec<f64>> {
    let d = t.dim();
    let mut v = vec![1.0 / d as f64; d];
    let mut next = vec![0.0; d];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERATIONS {
        t.apply_into(&v, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        if residual <= tol {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence { iterations: POWER_MAX_ITERATIONS, residual })
}

/// Closed-form steady state of the noisy TSAC chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolingLimit {
    pub n_c: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `z1`; may underflow to zero for large registers, see `z1_ln_abs`.
    pub z1: f64,
    /// `ln |z1|`; `z1` is never positive.
    pub z1_ln_abs: f64,
    pub z2: f64,
    pub v: Vec<f64>,
}

impl CoolingLimit {
    pub fn dim(&self) -> usize {
        1 << self.n_c
    }
}

/// Analytic steady state for `0 <= eta < 1`.
pub fn steady_state_analytic(n_c: usize, epsilon: f64, eta: f64) -> Result<CoolingLimit> {
    check_register(n_c, epsilon)?;
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::param(format!("depolarizing strength {eta} outside [0, 1)")));
    }
    let d = 1usize << n_c;
    let df = d as f64;
    let ln_lambda2_ideal = -2.0 * epsilon;

    if eta < IDEAL_SWITCH {
        let z2 = (-2.0 * epsilon).exp_m1() / (-2.0 * df * epsilon).exp_m1();
        let v = (0..d).map(|k| z2 * (k as f64 * ln_lambda2_ideal).exp()).collect();
        return Ok(CoolingLimit {
            n_c,
            epsilon,
            eta,
            lambda1: 1.0,
            lambda2: ln_lambda2_ideal.exp(),
            z1: -1.0 / df,
            z1_ln_abs: -df.ln(),
            z2,
            v,
        });
    }

    let e = epsilon.tanh();
    let one_plus_e = 1.0 + e;
    // d_c * C simplifies to 2 eta / (1 - eta).
    let dc = 2.0 * eta / (1.0 - eta);
    // lambda1 - 1 is the positive root of (1+E) x^2 + (2E - dC) x - dC = 0.
    let b = 2.0 * e - dc;
    let root = (b * b + 4.0 * one_plus_e * dc).sqrt();
    let delta1 = if b > 0.0 { 2.0 * dc / (b + root) } else { (root - b) / (2.0 * one_plus_e) };
    let ln1 = delta1.ln_1p();
    let ln2 = ln_lambda2_ideal - ln1;

    let scale = 2.0 * e / (df * one_plus_e);
    let r = (df * (ln2 - ln1)).exp();
    let geometric2 = (df * ln2).exp_m1() / ln2.exp_m1();
    let z1_ln_abs = (scale * geometric2 / (1.0 - r)).ln() - df * ln1;
    let z2 = scale * -(-df * ln1).exp_m1() / delta1 / (1.0 - r);

    let background = 1.0 / df;
    let v = (0..d)
        .map(|k| {
            let kf = k as f64;
            -(z1_ln_abs + kf * ln1).exp() + z2 * (kf * ln2).exp() + background
        })
        .collect();

    Ok(CoolingLimit {
        n_c,
        epsilon,
        eta,
        lambda1: 1.0 + delta1,
        lambda2: ln2.exp(),
        z1: -z1_ln_abs.exp(),
        z1_ln_abs,
        z2,
        v,
    })
}

/// First-order eigenvalues `(1 + eta / tanh eps, e^{-2 eps} (1 - eta / tanh eps))`.
pub fn perturbative_eigs(epsilon: f64, eta: f64) -> (f64, f64) {
    let shift = eta / epsilon.tanh();
    (1.0 + shift, (-2.0 * epsilon).exp() * (1.0 - shift))
}

/// Ground population of the target (most significant) computational qubit.
pub fn target_population(limit: &CoolingLimit) -> f64 {
    population_of(&limit.v)
}

fn population_of(v: &[f64]) -> f64 {
    v[..v.len().div_ceil(2)].iter().sum()
}

/// Diagonal of `n_c` independent thermal qubits of polarization `epsilon`.
pub fn thermal_product(n_c: usize, epsilon: f64) -> Vec<f64> {
    let (g, e) = thermal_populations(epsilon);
    (0..1usize << n_c)
        .map(|i| {
            let ones = i.count_ones() as i32;
            g.powi(n_c as i32 - ones) * e.powi(ones)
        })
        .collect()
}

/// Target population after each of `rounds` rounds, starting with `v0`.
/// The first entry is the population of `v0` itself.
pub fn iterate_dynamics(n_c: usize, epsilon: f64, eta: f64, v0: &[f64], rounds: usize) -> Result<Vec<f64>> {
    let t = noisy_transition(n_c, epsilon, eta)?;
    if v0.len() != t.dim() {
        return Err(Error::dims(format!("initial vector has {} entries, expected {}", v0.len(), t.dim())));
    }
    let total: f64 = v0.iter().sum();
    if (total - 1.0).abs() > 1e-10 || v0.iter().any(|&x| x < -1e-12) {
        return Err(Error::InvalidInput(format!("initial vector is not a distribution (sum {total})")));
    }
    let mut v = v0.to_vec();
    let mut next = vec![0.0; v.len()];
    let mut out = Vec::with_capacity(rounds + 1);
    out.push(population_of(&v));
    for _ in 0..rounds {
        t.apply_into(&v, &mut next);
        std::mem::swap(&mut v, &mut next);
        out.push(population_of(&v));
    }
    Ok(out)
}

/// Basis permutation performed by the TSAC compression step on `n` qubits:
/// `perm[i]` is the image of basis state `i`. It swaps `2c+1` with `2c+2`.
pub fn compression_permutation(n: usize) -> Vec<usize> {
    let d = 1usize << n;
    (0..d)
        .map(|i| match i {
            0 => 0,
            _ if i == d - 1 => i,
            _ if i % 2 == 1 => i + 1,
            _ => i - 1,
        })
        .collect()
}

/// One row of an optimal-size scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: usize,
    pub n_tg: usize,
    pub eta: f64,
    pub regime: Regime,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub n_opt: usize,
    pub p_max: f64,
    pub rows: Vec<ScanRow>,
}

/// Steady-state target population predicted by the depolarizing model for
/// an `n`-qubit TSAC machine, together with its gate count and strength.
pub fn model_population(n: usize, p: f64, epsilon: f64, kind: NoiseKind) -> Result<ScanRow> {
    let n_tg = tsac_cx_count(n)?;
    let est = eta_for(kind, p, n_tg, 1 << n)?;
    let population =
        if est.eta >= 1.0 { 0.5 } else { target_population(&steady_state_analytic(n - 1, epsilon, est.eta)?) };
    Ok(ScanRow { n, n_tg, eta: est.eta, regime: est.regime, population })
}

/// Picks the qubit count with the highest steady-state target population;
/// ties go to the smaller count.
pub fn optimal_scan(p: f64, epsilon: f64, n_range: &[usize], kind: NoiseKind) -> Result<ScanResult> {
    if n_range.is_empty() {
        return Err(Error::param("empty qubit range"));
    }
    if let Some(&bad) = n_range.iter().find(|&&n| !(2..=10).contains(&n)) {
        return Err(Error::param(format!("qubit count {bad} outside [2, 10]")));
    }
    let rows = n_range.iter().map(|&n| model_population(n, p, epsilon, kind)).collect::<Result<Vec<_>>>()?;
    let best = select_optimum(rows.iter().map(|r| (r.n, r.population)));
    Ok(ScanResult { n_opt: best.0, p_max: best.1, rows })
}

/// `(n, population)` with the largest population, preferring smaller `n`.
pub fn select_optimum(points: impl IntoIterator<Item = (usize, f64)>) -> (usize, f64) {
    let mut points: Vec<(usize, f64)> = points.into_iter().collect();
    points.sort_by_key(|&(n, _)| n);
    points.into_iter().fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}
