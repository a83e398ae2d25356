//! Global depolarizing approximation: effective depolarizing strength of a
//! noisy circuit, expectation-value mitigation, and 2-design sampling bounds.

use serde::Serialize;

use crate::channels::{depolarize, NoiseKind};
use crate::error::{Error, Result};
use crate::linalg::DensityMatrix;

/// Accumulated error `p * n_tg` at which the first-order picture is suspect.
pub const WARN_THRESHOLD: f64 = 0.1;
/// Accumulated error `p * n_tg` at which `eta` is clamped.
pub const CLAMP_THRESHOLD: f64 = 1.0;

/// How far the estimate is from the small-error regime it assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `p * n_tg < 0.1`.
    Valid,
    /// `0.1 <= p * n_tg < 1`.
    Marginal,
    /// `p * n_tg >= 1` or `eta > 1`; `eta` was clamped to `[0, 1]`.
    Clamped,
}

/// Effective global depolarizing strength of a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GdaEstimate {
    pub p: f64,
    pub n_tg: usize,
    pub q: f64,
    pub eta: f64,
    pub d: usize,
    pub regime: Regime,
}

/// `eta = p * n_tg * (1 - q)`.
pub fn eta_general(p: f64, n_tg: usize, q: f64, d: usize) -> Result<GdaEstimate> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param(format!("error probability {p} outside [0, 1)")));
    }
    if q.is_nan() || q > 1.0 {
        return Err(Error::param(format!("q = {q} must not exceed 1")));
    }
    Ok(estimate(p, n_tg, q, d))
}

fn estimate(p: f64, n_tg: usize, q: f64, d: usize) -> GdaEstimate {
    let load = p * n_tg as f64;
    let raw = load * (1.0 - q);
    let regime = if load >= CLAMP_THRESHOLD || raw > 1.0 {
        Regime::Clamped
    } else if load >= WARN_THRESHOLD {
        Regime::Marginal
    } else {
        Regime::Valid
    };
    GdaEstimate { p, n_tg, q, eta: raw.clamp(0.0, 1.0), d, regime }
}

fn check_dim(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::param(format!("dimension {d} must be at least 2")));
    }
    Ok(d as f64)
}

/// Timekeeping noise: `eta = p * n_tg * (3 d^2 / 4) / (d^2 - 1)`.
pub fn eta_timekeeping(p: f64, n_tg: usize, d: usize) -> Result<GdaEstimate> {
    let df = check_dim(d)?;
    let d2 = df * df;
    eta_general(p, n_tg, (d2 / 4.0 - 1.0) / (d2 - 1.0), d)
}

/// Two-qubit bit-flip noise: `eta = (2 chi - chi^2) * n_tg * d^2 / (d^2 - 1)`.
pub fn eta_bitflip(chi: f64, n_tg: usize, d: usize) -> Result<GdaEstimate> {
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::param(format!("bit-flip probability {chi} outside [0, 1]")));
    }
    let df = check_dim(d)?;
    let q = -1.0 / (df * df - 1.0);
    // p = 1 at chi = 1 lies outside eta_general's domain, so build directly.
    Ok(estimate(2.0 * chi - chi * chi, n_tg, q, d))
}

/// Two-qubit depolarizing noise of strength `s`, whose error part has
/// superoperator trace `d^2 / 16`.
pub fn eta_depolarizing(s: f64, n_tg: usize, d: usize) -> Result<GdaEstimate> {
    let df = check_dim(d)?;
    let d2 = df * df;
    if !(0.0..1.0).contains(&s) {
        return Err(Error::param(format!("depolarizing strength {s} outside [0, 1)")));
    }
    eta_general(s, n_tg, (d2 / 16.0 - 1.0) / (d2 - 1.0), d)
}

/// Dispatches on the noise model; `parameter` is the model's own parameter.
pub fn eta_for(kind: NoiseKind, parameter: f64, n_tg: usize, d: usize) -> Result<GdaEstimate> {
    match kind {
        NoiseKind::None => eta_general(0.0, n_tg, 1.0, d),
        NoiseKind::Timekeeping => eta_timekeeping(parameter, n_tg, d),
        NoiseKind::Bitflip => eta_bitflip(parameter, n_tg, d),
        NoiseKind::Depolarizing => eta_depolarizing(parameter, n_tg, d),
    }
}

/// Recovers the noiseless expectation of a traceless observable.
pub fn mitigate_expectation(noisy: f64, eta: f64) -> Result<f64> {
    if eta >= 1.0 || eta.is_nan() {
        return Err(Error::Unmitigable(eta));
    }
    if eta < 0.0 {
        return Err(Error::param(format!("depolarizing strength {eta} is negative")));
    }
    Ok(noisy / (1.0 - eta))
}

fn check_bounds(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::param(format!("accuracy {eps} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("failure probability {delta} outside (0, 1)")));
    }
    Ok(())
}

/// Samples per location, `(2 ||O|| / eps^2) ln(2 / delta)`.
pub fn mk_samples(o_norm: f64, eps: f64, delta: f64) -> Result<f64> {
    check_bounds(eps, delta)?;
    Ok(2.0 * o_norm / (eps * eps) * (2.0 / delta).ln())
}

/// Circuit depth estimate `n (n - 1) * mk_samples(...)`.
pub fn twodesign_depth(n: usize, o_norm: f64, eps: f64, delta: f64) -> Result<f64> {
    let pairs = (n * n.saturating_sub(1)) as f64;
    Ok(pairs * mk_samples(o_norm, eps, delta)?)
}

/// The approximated noisy output `(1 - eta) rho + eta I/d`.
pub fn apply_gda(rho_ideal: &DensityMatrix, est: &GdaEstimate) -> Result<DensityMatrix> {
    if rho_ideal.dim() != est.d {
        return Err(Error::dims(format!("estimate for dimension {} applied to dimension {}", est.d, rho_ideal.dim())));
    }
    depolarize(rho_ideal, est.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{embed_two_qubit, q_param, GateNoiseModel};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn general_examples() {
        assert_eq!(eta_general(0.0, 20, 0.3, 8).unwrap().eta, 0.0);
        assert_eq!(eta_general(0.01, 20, 1.0, 8).unwrap().eta, 0.0);
        let e = eta_general(1e-3, 20, 15.0 / 63.0, 8).unwrap();
        assert_abs_diff_eq!(e.eta, 1.52e-2, epsilon = 1e-4);
        assert_eq!(e.regime, Regime::Valid);
        assert!(matches!(eta_general(1.0, 1, 0.0, 4), Err(Error::InvalidParam(_))));
        assert!(matches!(eta_general(-0.1, 1, 0.0, 4), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn regime_flags() {
        assert_eq!(eta_general(0.01, 10, 0.0, 4).unwrap().regime, Regime::Marginal);
        let e = eta_general(0.2, 10, 0.0, 4).unwrap();
        assert_eq!(e.regime, Regime::Clamped);
        assert_eq!(e.eta, 1.0);
    }

    #[test]
    fn timekeeping_examples() {
        let e = eta_timekeeping(1e-3, 20, 8).unwrap();
        assert_abs_diff_eq!(e.eta, 1.52e-2, epsilon = 1e-4);
        assert_relative_eq!(e.eta, 1e-3 * 20.0 * 48.0 / 63.0, max_relative = 1e-14);
        assert_eq!(eta_timekeeping(0.0, 20, 8).unwrap().eta, 0.0);
        let big = eta_timekeeping(1e-4, 10, 1 << 10).unwrap();
        assert_relative_eq!(big.eta, 0.75 * 1e-4 * 10.0, max_relative = 1e-3);
    }

    #[test]
    fn bitflip_examples() {
        assert_eq!(eta_bitflip(0.0, 10, 16).unwrap().eta, 0.0);
        let e = eta_bitflip(1.0, 1, 2).unwrap();
        assert_eq!(e.regime, Regime::Clamped);
        assert_eq!(e.eta, 1.0);
        let e = eta_bitflip(0.01, 10, 16).unwrap();
        assert_relative_eq!(e.eta, 0.0199 * 10.0 * 256.0 / 255.0, max_relative = 1e-13);
        let g = eta_general(0.0199, 10, -1.0 / 255.0, 16).unwrap();
        assert_relative_eq!(e.eta, g.eta, max_relative = 1e-13);
        assert!(matches!(eta_bitflip(1.2, 1, 4), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn closed_forms_agree_with_channel_q() {
        let tk = GateNoiseModel::timekeeping(0.1).unwrap();
        let bf = GateNoiseModel::bitflip(0.1).unwrap();
        let dp = GateNoiseModel::depolarizing(0.1).unwrap();
        for n in 2..=5 {
            let d = 1 << n;
            let qt = q_param(&embed_two_qubit(tk.error_part(), (0, 1), n).unwrap(), d).unwrap();
            let qb = q_param(&embed_two_qubit(bf.error_part(), (0, 1), n).unwrap(), d).unwrap();
            let qd = q_param(&embed_two_qubit(dp.error_part(), (0, 1), n).unwrap(), d).unwrap();
            for &p in &[1e-5, 1e-3, 2e-2] {
                for &n_tg in &[1, 20, 132] {
                    let a = eta_timekeeping(p, n_tg, d).unwrap().eta;
                    assert_relative_eq!(a, eta_general(p, n_tg, qt, d).unwrap().eta, max_relative = 1e-12);
                    let a = eta_depolarizing(p, n_tg, d).unwrap().eta;
                    assert_relative_eq!(a, eta_general(p, n_tg, qd, d).unwrap().eta, max_relative = 1e-12);
                    let chi = p;
                    let a = eta_bitflip(chi, n_tg, d).unwrap().eta;
                    let pb = 2.0 * chi - chi * chi;
                    assert_relative_eq!(a, eta_general(pb, n_tg, qb, d).unwrap().eta, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn linear_in_p_and_gate_count() {
        let base = eta_timekeeping(1e-4, 10, 16).unwrap().eta;
        assert_relative_eq!(eta_timekeeping(3e-4, 10, 16).unwrap().eta, 3.0 * base, max_relative = 1e-12);
        assert_relative_eq!(eta_timekeeping(1e-4, 70, 16).unwrap().eta, 7.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn mitigation() {
        assert_eq!(mitigate_expectation(0.3, 0.0).unwrap(), 0.3);
        assert_eq!(mitigate_expectation(0.5, 0.5).unwrap(), 1.0);
        assert!(matches!(mitigate_expectation(0.5, 1.0), Err(Error::Unmitigable(_))));
    }

    #[test]
    fn mitigation_inverts_depolarizing_for_traceless_observable() {
        let rho = DensityMatrix::product_diagonal(2, 0.9).unwrap();
        let z0 = |r: &DensityMatrix| 2.0 * r.ground_population(0) - 1.0;
        for &eta in &[0.0, 0.1, 0.6] {
            let noisy = depolarize(&rho, eta).unwrap();
            assert_abs_diff_eq!(mitigate_expectation(z0(&noisy), eta).unwrap(), z0(&rho), epsilon = 1e-12);
        }
    }

    #[test]
    fn sampling_bounds() {
        let delta = 2.0 * (-2.0f64).exp();
        assert_relative_eq!(mk_samples(1.0, 1.0, delta).unwrap(), 4.0, max_relative = 1e-14);
        let d = twodesign_depth(3, 1.0, 0.1, 0.05).unwrap();
        assert_relative_eq!(d, 6.0 * 200.0 * 40f64.ln(), max_relative = 1e-12);
        let near_one = twodesign_depth(3, 1.0, 1.0, 0.999_999).unwrap();
        assert!(near_one > 0.0 && near_one < 6.0 * 2.0 * 2f64.ln() * 1.01);
        let half = twodesign_depth(4, 1.0, 0.2, 0.1).unwrap();
        assert_relative_eq!(twodesign_depth(4, 1.0, 0.4, 0.1).unwrap(), half / 4.0, max_relative = 1e-12);
        assert!(mk_samples(1.0, 0.1, 0.1).unwrap() > mk_samples(1.0, 0.2, 0.1).unwrap());
        assert!(matches!(mk_samples(1.0, 0.0, 0.1), Err(Error::InvalidParam(_))));
        assert!(matches!(mk_samples(1.0, 0.1, 1.0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn apply_gda_checks_dimension() {
        let est = eta_timekeeping(1e-3, 20, 8).unwrap();
        let rho = DensityMatrix::product_diagonal(3, 0.85).unwrap();
        let out = apply_gda(&rho, &est).unwrap();
        assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-14);
        let small = DensityMatrix::product_diagonal(2, 0.85).unwrap();
        assert!(matches!(apply_gda(&small, &est), Err(Error::InvalidDims(_))));
    }
}
