//! Config-driven experiment grids and their tabular output.
//!
//! A config file holds a single `[experiment]` table:
//!
//! ```toml
//! [experiment]
//! kind = "tsac_scan"
//! p = [1e-3, 1e-4]
//! n = [2, 3, 4]
//! p_initial = 0.85
//! ```
//!
//! [`run_experiment`] evaluates every grid point (in parallel when the
//! `parallel` feature is on) and returns records sorted by grid key, so the
//! same config always yields byte-identical CSV.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channels::{depolarize, GateNoiseModel, NoiseKind};
use crate::circuits::{dc_cx_count, tsac_cx_count};
use crate::dc::{effective_temperature, ideal_dc_output, ThermalSpec, MAX_DC_QUBITS};
use crate::gda::eta_for;
use crate::par;
use crate::sim::{run_dc, run_tsac, twodesign_validation, SimConfig, MAX_SIM_QUBITS};
use crate::tsac::{
    iterate_dynamics, model_population, select_optimum, steady_state_analytic, target_population, thermal_product,
    MAX_COMPUTATIONAL_QUBITS,
};
use crate::{Error, Result};

/// Column header of every CSV file written by [`to_csv`].
pub const CSV_HEADER: &str = "experiment,provenance,n,p,epsilon,eta,metric,value";

/// Environment variable that overrides the configured worker count.
pub const THREADS_ENV: &str = "COOLSIM_THREADS";

const MAX_DYNAMICS_ROUNDS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Optimal qubit number and steady-state population versus error rate.
    TsacScan,
    /// Dynamic-cooling output temperature, simulated and modeled.
    DcGrid,
    /// Target population round by round.
    Dynamics,
    /// Fidelity of twirled gate noise to its depolarizing counterpart.
    Twodesign,
    /// Closed-form steady state for given depolarizing strengths.
    CoolingLimit,
    /// Gate counts and effective depolarizing strengths.
    EtaTable,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::TsacScan => "tsac_scan",
            ExperimentKind::DcGrid => "dc_grid",
            ExperimentKind::Dynamics => "dynamics",
            ExperimentKind::Twodesign => "twodesign",
            ExperimentKind::CoolingLimit => "cooling_limit",
            ExperimentKind::EtaTable => "eta_table",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a number comes from: the noiseless protocol, the depolarizing
/// model, or the gate-level simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ideal,
    Gda,
    Physical,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Ideal => "ideal",
            Provenance::Gda => "gda",
            Provenance::Physical => "physical",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Contents of the `[experiment]` table.
///
/// Which fields are required depends on `kind`; setting a field the kind
/// does not use is rejected. `n` always counts every qubit, including the
/// reset qubit of TSAC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Stem of the output files; defaults to the kind.
    pub name: Option<String>,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    /// Per-gate error parameters.
    #[serde(default)]
    pub p: Vec<f64>,
    /// Qubit counts.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Initial ground population, an alternative to `epsilon`.
    pub p_initial: Option<f64>,
    /// Polarization of the reset qubit and the initial register.
    pub epsilon: Option<f64>,
    /// Initial temperature in kelvin (dynamic cooling).
    pub t_initial: Option<f64>,
    /// Qubit frequency in hertz (dynamic cooling).
    pub frequency: Option<f64>,
    /// Circuit repetition counts for the 2-design check.
    #[serde(default)]
    pub repetitions: Vec<usize>,
    /// Depolarizing strengths for the closed-form limit.
    #[serde(default)]
    pub eta: Vec<f64>,
    /// Number of rounds to record for `dynamics`.
    pub rounds: Option<usize>,
    pub max_rounds: Option<usize>,
    pub conv_tol: Option<f64>,
    /// Whether to run the gate-level simulation alongside the model
    /// (default true).
    pub physical: Option<bool>,
    pub threads: Option<usize>,
}

fn default_noise() -> NoiseKind {
    NoiseKind::Timekeeping
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: ExperimentConfig,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Field {
    P,
    N,
    Polarization,
    TInitial,
    Frequency,
    Repetitions,
    Eta,
    Rounds,
    MaxRounds,
    ConvTol,
}

impl Field {
    fn name(self) -> &'static str {
        match self {
            Field::P => "p",
            Field::N => "n",
            Field::Polarization => "p_initial` or `epsilon",
            Field::TInitial => "t_initial",
            Field::Frequency => "frequency",
            Field::Repetitions => "repetitions",
            Field::Eta => "eta",
            Field::Rounds => "rounds",
            Field::MaxRounds => "max_rounds",
            Field::ConvTol => "conv_tol",
        }
    }
}

fn config_err(msg: impl fmt::Display) -> Error {
    Error::Config(msg.to_string())
}

impl ExperimentConfig {
    /// Parses and validates TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end()))?;
        file.experiment.validate()?;
        Ok(file.experiment)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// File stem for the outputs of this experiment.
    pub fn stem(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.as_str())
    }

    /// Worker count from the environment, then the config, if either is set.
    pub fn worker_count(&self) -> Result<Option<usize>> {
        match std::env::var(THREADS_ENV) {
            Ok(raw) => match raw.trim().parse::<usize>() {
                Ok(0) | Err(_) => Err(config_err(format!("{THREADS_ENV}={raw:?} is not a positive integer"))),
                Ok(k) => Ok(Some(k)),
            },
            Err(_) => Ok(self.threads),
        }
    }

    /// Reset-qubit polarization derived from `epsilon` or `p_initial`.
    pub fn polarization(&self) -> Result<f64> {
        match (self.epsilon, self.p_initial) {
            (Some(eps), None) => Ok(eps),
            (None, Some(pop)) => Ok(0.5 * (pop / (1.0 - pop)).ln()),
            (Some(_), Some(_)) => Err(config_err("set only one of `p_initial` and `epsilon`")),
            (None, None) => Err(config_err("missing `p_initial` or `epsilon`")),
        }
    }

    fn used_fields(&self) -> (&'static [Field], &'static [Field]) {
        use Field::*;
        match self.kind {
            ExperimentKind::TsacScan => (&[P, N, Polarization], &[MaxRounds, ConvTol]),
            ExperimentKind::DcGrid => (&[P, N, TInitial, Frequency], &[]),
            ExperimentKind::Dynamics => (&[P, N, Polarization, Rounds], &[]),
            ExperimentKind::Twodesign => (&[P, N, Polarization, Repetitions], &[]),
            ExperimentKind::CoolingLimit => (&[N, Polarization, Eta], &[]),
            ExperimentKind::EtaTable => (&[P, N], &[]),
        }
    }

    fn is_set(&self, field: Field) -> bool {
        match field {
            Field::P => !self.p.is_empty(),
            Field::N => !self.n.is_empty(),
            Field::Polarization => self.p_initial.is_some() || self.epsilon.is_some(),
            Field::TInitial => self.t_initial.is_some(),
            Field::Frequency => self.frequency.is_some(),
            Field::Repetitions => !self.repetitions.is_empty(),
            Field::Eta => !self.eta.is_empty(),
            Field::Rounds => self.rounds.is_some(),
            Field::MaxRounds => self.max_rounds.is_some(),
            Field::ConvTol => self.conv_tol.is_some(),
        }
    }

    /// Checks that the fields match the kind and every value is in range.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind;
        let (required, optional) = self.used_fields();
        const ALL: [Field; 10] = [
            Field::P,
            Field::N,
            Field::Polarization,
            Field::TInitial,
            Field::Frequency,
            Field::Repetitions,
            Field::Eta,
            Field::Rounds,
            Field::MaxRounds,
            Field::ConvTol,
        ];
        for field in ALL {
            let set = self.is_set(field);
            if required.contains(&field) && !set {
                return Err(config_err(format!("kind `{kind}` requires a non-empty `{}`", field.name())));
            }
            if set && !required.contains(&field) && !optional.contains(&field) {
                return Err(config_err(format!("field `{}` is not used by kind `{kind}`", field.name())));
            }
        }
        if self.physical.is_some()
            && !matches!(kind, ExperimentKind::TsacScan | ExperimentKind::DcGrid | ExperimentKind::Dynamics)
        {
            return Err(config_err(format!("field `physical` is not used by kind `{kind}`")));
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(config_err(format!("`name` {name:?} is not a plain file stem")));
            }
        }
        if self.threads == Some(0) {
            return Err(config_err("`threads` must be positive"));
        }

        for &p in &self.p {
            GateNoiseModel::from_kind(self.noise, p)
                .map_err(|e| config_err(format!("`p` = {p} invalid for {} noise: {e}", self.noise)))?;
            if self.noise == NoiseKind::None && p != 0.0 {
                return Err(config_err(format!("`p` = {p} must be 0 with noise \"none\"")));
            }
        }

        let (lo, hi) = self.qubit_range();
        if let Some(&bad) = self.n.iter().find(|&&n| !(lo..=hi).contains(&n)) {
            return Err(config_err(format!("`n` = {bad} outside [{lo}, {hi}] for kind `{kind}`")));
        }

        if self.is_set(Field::Polarization) {
            if let Some(pop) = self.p_initial {
                if !(pop > 0.5 && pop < 1.0) {
                    return Err(config_err(format!("`p_initial` = {pop} must lie in (0.5, 1)")));
                }
            }
            if let Some(eps) = self.epsilon {
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(config_err(format!("`epsilon` = {eps} must be positive and finite")));
                }
            }
            self.polarization()?;
        }
        if let (Some(t), Some(f)) = (self.t_initial, self.frequency) {
            ThermalSpec::new(t, f).map_err(|e| config_err(format!("`t_initial`/`frequency`: {e}")))?;
        }
        if let Some(&bad) = self.eta.iter().find(|&&e| !(0.0..1.0).contains(&e)) {
            return Err(config_err(format!("`eta` = {bad} must lie in [0, 1)")));
        }
        if let Some(r) = self.rounds {
            if !(1..=MAX_DYNAMICS_ROUNDS).contains(&r) {
                return Err(config_err(format!("`rounds` = {r} outside [1, {MAX_DYNAMICS_ROUNDS}]")));
            }
        }
        if self.max_rounds == Some(0) {
            return Err(config_err("`max_rounds` must be positive"));
        }
        if let Some(tol) = self.conv_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(config_err(format!("`conv_tol` = {tol} must be positive")));
            }
        }
        Ok(())
    }

    /// Whether gate-level simulation runs alongside the model.
    pub fn runs_physical(&self) -> bool {
        self.physical.unwrap_or(true)
    }

    fn qubit_range(&self) -> (usize, usize) {
        match self.kind {
            ExperimentKind::TsacScan | ExperimentKind::Dynamics if self.runs_physical() => (2, MAX_SIM_QUBITS),
            ExperimentKind::TsacScan | ExperimentKind::Dynamics | ExperimentKind::EtaTable => (2, 10),
            ExperimentKind::DcGrid if self.runs_physical() => (2, 8),
            ExperimentKind::DcGrid => (2, MAX_DC_QUBITS),
            ExperimentKind::Twodesign => (2, 6),
            ExperimentKind::CoolingLimit => (2, MAX_COMPUTATIONAL_QUBITS + 1),
        }
    }

    fn sim_config(&self, n: usize, p: f64, epsilon: f64) -> Result<SimConfig> {
        let mut sim = SimConfig::new(n, GateNoiseModel::from_kind(self.noise, p)?, epsilon);
        if let Some(r) = self.max_rounds {
            sim.max_rounds = r;
        }
        if let Some(tol) = self.conv_tol {
            sim.conv_tol = tol;
        }
        Ok(sim)
    }

    fn grid(&self) -> Vec<(usize, f64)> {
        self.n.iter().flat_map(|&n| self.p.iter().map(move |&p| (n, p))).collect()
    }
}

/// One number produced by an experiment, with its grid coordinates.
///
/// Coordinates that do not apply to a record are `None`. Indexed metrics
/// (a round number or a repetition count) carry the index separately and
/// are written as `metric@index` in CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment: ExperimentKind,
    pub provenance: Provenance,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub metric: &'static str,
    pub index: Option<usize>,
    pub value: f64,
}

impl ResultRecord {
    pub fn metric_label(&self) -> String {
        match self.index {
            Some(i) => format!("{}@{i}", self.metric),
            None => self.metric.to_string(),
        }
    }

    fn grid_cmp(&self, other: &Self) -> Ordering {
        let float = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (a, b) => a.is_some().cmp(&b.is_some()),
        };
        self.provenance
            .cmp(&other.provenance)
            .then(self.n.cmp(&other.n))
            .then(float(self.p, other.p))
            .then(float(self.epsilon, other.epsilon))
            .then(float(self.eta, other.eta))
    }
}

struct Point {
    experiment: ExperimentKind,
    provenance: Provenance,
    n: Option<usize>,
    p: Option<f64>,
    epsilon: Option<f64>,
    eta: Option<f64>,
}

impl Point {
    fn record(&self, metric: &'static str, value: f64) -> ResultRecord {
        ResultRecord {
            experiment: self.experiment,
            provenance: self.provenance,
            n: self.n,
            p: self.p,
            epsilon: self.epsilon,
            eta: self.eta,
            metric,
            index: None,
            value,
        }
    }

    fn indexed(&self, metric: &'static str, index: usize, value: f64) -> ResultRecord {
        ResultRecord { index: Some(index), ..self.record(metric, value) }
    }
}

/// Evaluates every grid point of `cfg` and returns records sorted by grid
/// key (provenance, n, p, epsilon, eta), keeping metric order within a
/// point.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let mut records = match cfg.kind {
        ExperimentKind::TsacScan => tsac_scan(cfg)?,
        ExperimentKind::DcGrid => dc_grid(cfg)?,
        ExperimentKind::Dynamics => dynamics(cfg)?,
        ExperimentKind::Twodesign => twodesign(cfg)?,
        ExperimentKind::CoolingLimit => cooling_limit(cfg)?,
        ExperimentKind::EtaTable => eta_table(cfg)?,
    };
    records.sort_by(ResultRecord::grid_cmp);
    Ok(records)
}

fn collect<T>(results: Vec<Result<Vec<T>>>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn tsac_scan(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let eps = cfg.polarization()?;
    let grid = cfg.grid();
    let per_point = par::map(&grid, |&(n, p)| -> Result<Vec<ResultRecord>> {
        let row = model_population(n, p, eps, cfg.noise)?;
        let at = |provenance| Point {
            experiment: cfg.kind,
            provenance,
            n: Some(n),
            p: Some(p),
            epsilon: Some(eps),
            eta: Some(row.eta),
        };
        let mut out = vec![at(Provenance::Gda).record("population", row.population)];
        if cfg.runs_physical() {
            let run = run_tsac(&cfg.sim_config(n, p, eps)?)?;
            if !run.converged {
                let residual = run.trajectory.last().map_or(f64::NAN, |r| r.step);
                return Err(Error::NoConvergence { iterations: run.trajectory.len() - 1, residual });
            }
            let point = at(Provenance::Physical);
            out.push(point.record("population", run.population));
            out.push(point.record("rounds", (run.trajectory.len() - 1) as f64));
        }
        Ok(out)
    });
    let mut records = collect(per_point)?;

    let mut summaries = Vec::new();
    for provenance in [Provenance::Gda, Provenance::Physical] {
        for &p in &cfg.p {
            let points = records
                .iter()
                .filter(|r| r.provenance == provenance && r.p == Some(p) && r.metric == "population")
                .map(|r| (r.n.unwrap_or(0), r.value));
            let points: Vec<_> = points.collect();
            if points.is_empty() {
                continue;
            }
            let (n_opt, p_max) = select_optimum(points);
            let point = Point { experiment: cfg.kind, provenance, n: None, p: Some(p), epsilon: Some(eps), eta: None };
            summaries.push(point.record("n_opt", n_opt as f64));
            summaries.push(point.record("p_max", p_max));
        }
    }
    records.extend(summaries);
    Ok(records)
}

fn dc_grid(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let (Some(t), Some(f)) = (cfg.t_initial, cfg.frequency) else {
        return Err(config_err("kind `dc_grid` requires `t_initial` and `frequency`"));
    };
    let spec = ThermalSpec::new(t, f)?;
    let eps = 0.5 * spec.reduced_gap();
    let ideal = par::map(&cfg.n, |&n| -> Result<Vec<ResultRecord>> {
        let out = ideal_dc_output(n, &spec)?;
        let point = Point {
            experiment: cfg.kind,
            provenance: Provenance::Ideal,
            n: Some(n),
            p: None,
            epsilon: Some(eps),
            eta: Some(0.0),
        };
        Ok(vec![
            point.record("ground_population", out.probabilities()[0]),
            point.record("temperature", effective_temperature(&out, f)?),
        ])
    });
    let grid = cfg.grid();
    let noisy = par::map(&grid, |&(n, p)| -> Result<Vec<ResultRecord>> {
        let est = eta_for(cfg.noise, p, dc_cx_count(n)?, 1 << n)?;
        let model = depolarize(&ideal_dc_output(n, &spec)?, est.eta)?;
        let t_model = effective_temperature(&model, f)?;
        let at = |provenance| Point {
            experiment: cfg.kind,
            provenance,
            n: Some(n),
            p: Some(p),
            epsilon: Some(eps),
            eta: Some(est.eta),
        };
        let gda = at(Provenance::Gda);
        let mut out =
            vec![gda.record("ground_population", model.probabilities()[0]), gda.record("temperature", t_model)];
        if cfg.runs_physical() {
            let run = run_dc(n, &spec, &GateNoiseModel::from_kind(cfg.noise, p)?)?;
            let physical = at(Provenance::Physical);
            out.push(physical.record("ground_population", run.ground_population));
            out.push(physical.record("temperature", run.temperature));
            out.push(physical.record("relative_error", (run.temperature - t_model).abs() / t_model));
        }
        Ok(out)
    });
    let mut records = collect(ideal)?;
    records.extend(collect(noisy)?);
    Ok(records)
}

fn dynamics(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let eps = cfg.polarization()?;
    let rounds = cfg.rounds.ok_or_else(|| config_err("kind `dynamics` requires `rounds`"))?;
    let trajectory = |point: &Point, values: &[f64]| -> Vec<ResultRecord> {
        values.iter().enumerate().map(|(k, &v)| point.indexed("population", k, v)).collect()
    };
    let ideal = par::map(&cfg.n, |&n| -> Result<Vec<ResultRecord>> {
        let values = iterate_dynamics(n - 1, eps, 0.0, &thermal_product(n - 1, eps), rounds)?;
        let point = Point {
            experiment: cfg.kind,
            provenance: Provenance::Ideal,
            n: Some(n),
            p: None,
            epsilon: Some(eps),
            eta: Some(0.0),
        };
        Ok(trajectory(&point, &values))
    });
    let grid = cfg.grid();
    let noisy = par::map(&grid, |&(n, p)| -> Result<Vec<ResultRecord>> {
        let est = eta_for(cfg.noise, p, tsac_cx_count(n)?, 1 << n)?;
        let at = |provenance| Point {
            experiment: cfg.kind,
            provenance,
            n: Some(n),
            p: Some(p),
            epsilon: Some(eps),
            eta: Some(est.eta),
        };
        let model = iterate_dynamics(n - 1, eps, est.eta, &thermal_product(n - 1, eps), rounds)?;
        let mut out = trajectory(&at(Provenance::Gda), &model);
        if cfg.runs_physical() {
            let mut sim = cfg.sim_config(n, p, eps)?;
            sim.max_rounds = rounds;
            sim.conv_tol = f64::MIN_POSITIVE;
            let run = run_tsac(&sim)?;
            let mut values: Vec<f64> = run.trajectory.iter().map(|r| r.population).collect();
            values.resize(rounds + 1, run.population);
            out.extend(trajectory(&at(Provenance::Physical), &values));
        }
        Ok(out)
    });
    let mut records = collect(ideal)?;
    records.extend(collect(noisy)?);
    Ok(records)
}

fn twodesign(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let eps = cfg.polarization()?;
    let p_init = crate::channels::thermal_populations(eps).0;
    let grid = cfg.grid();
    let per_point = par::map(&grid, |&(n, p)| -> Result<Vec<ResultRecord>> {
        let noise = GateNoiseModel::from_kind(cfg.noise, p)?;
        let rows = twodesign_validation(n, &cfg.repetitions, p_init, &noise)?;
        let point = Point {
            experiment: cfg.kind,
            provenance: Provenance::Physical,
            n: Some(n),
            p: Some(p),
            epsilon: Some(eps),
            eta: None,
        };
        Ok(rows.iter().map(|r| point.indexed("fidelity", r.repetitions, r.fidelity)).collect())
    });
    collect(per_point)
}

fn cooling_limit(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let eps = cfg.polarization()?;
    let grid: Vec<(usize, f64)> = cfg.n.iter().flat_map(|&n| cfg.eta.iter().map(move |&e| (n, e))).collect();
    let per_point = par::map(&grid, |&(n, eta)| -> Result<Vec<ResultRecord>> {
        let limit = steady_state_analytic(n - 1, eps, eta)?;
        let provenance = if eta == 0.0 { Provenance::Ideal } else { Provenance::Gda };
        let point = Point { experiment: cfg.kind, provenance, n: Some(n), p: None, epsilon: Some(eps), eta: Some(eta) };
        Ok(vec![
            point.record("lambda1", limit.lambda1),
            point.record("lambda2", limit.lambda2),
            point.record("z1", limit.z1),
            point.record("z2", limit.z2),
            point.record("population", target_population(&limit)),
        ])
    });
    collect(per_point)
}

fn eta_table(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let grid = cfg.grid();
    let per_point = par::map(&grid, |&(n, p)| -> Result<Vec<ResultRecord>> {
        let est = eta_for(cfg.noise, p, tsac_cx_count(n)?, 1 << n)?;
        let point = Point {
            experiment: cfg.kind,
            provenance: Provenance::Gda,
            n: Some(n),
            p: Some(p),
            epsilon: None,
            eta: Some(est.eta),
        };
        Ok(vec![point.record("n_tg", est.n_tg as f64), point.record("q", est.q), point.record("eta", est.eta)])
    });
    collect(per_point)
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Renders records as CSV with [`CSV_HEADER`], LF line endings and 17
/// significant digits. Missing coordinates are empty fields.
pub fn to_csv(records: &[ResultRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let n = r.n.map(|n| n.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.provenance,
            n,
            format_opt(r.p),
            format_opt(r.epsilon),
            format_opt(r.eta),
            r.metric_label(),
            format_float(r.value),
        ));
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a ExperimentConfig,
    records: &'a [ResultRecord],
}

/// Renders the config and its records as pretty-printed JSON.
pub fn to_json(cfg: &ExperimentConfig, records: &[ResultRecord]) -> Result<String> {
    serde_json::to_string_pretty(&JsonReport { config: cfg, records })
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Writes `contents` to a sibling temporary file and renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name =
        path.file_name().ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.json` under `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, records: &[ResultRecord]) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv = dir.join(format!("{}.csv", cfg.stem()));
    let json = dir.join(format!("{}.json", cfg.stem()));
    let json_text = to_json(cfg, records)?;
    write_atomic(&csv, &to_csv(records))?;
    write_atomic(&json, &json_text)?;
    Ok((csv, json))
}
