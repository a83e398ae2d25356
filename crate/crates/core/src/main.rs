use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coolsim::channels::NoiseKind;
use coolsim::circuits::{build_dc_mirror_circuit, build_tsac_circuit, count_cx, transpile, tsac_cx_count};
use coolsim::experiments::{run_experiment, write_outputs, ExperimentConfig};
use coolsim::gda::eta_for;
use coolsim::par;
use coolsim::tsac::{steady_state_analytic, target_population};
use coolsim::Error;

#[derive(Parser)]
#[command(name = "coolsim", version, about = "Noisy algorithmic cooling: depolarizing model and gate-level simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and write CSV and JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Effective depolarizing strength of an n-qubit TSAC circuit.
    Eta {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: usize,
    },
    /// Closed-form steady state of the noisy TSAC chain.
    Limit {
        /// Number of computational qubits.
        #[arg(long)]
        nc: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        eta: f64,
    },
    /// Print a transpiled protocol circuit and its CX count.
    Describe {
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Timekeeping,
    Bitflip,
    Depolarizing,
}

impl From<Model> for NoiseKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Timekeeping => NoiseKind::Timekeeping,
            Model::Bitflip => NoiseKind::Bitflip,
            Model::Depolarizing => NoiseKind::Depolarizing,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    Tsac,
    Dc,
}

fn run(command: Command) -> coolsim::Result<()> {
    match command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            if let Some(threads) = cfg.worker_count()? {
                if let Err(msg) = par::configure_threads(threads) {
                    eprintln!("warning: {msg}");
                }
            }
            let records = run_experiment(&cfg)?;
            let (csv, json) = write_outputs(&out, &cfg, &records)?;
            println!("{} records", records.len());
            println!("{}", csv.display());
            println!("{}", json.display());
        }
        Command::Eta { model, p, n } => {
            let n_tg = tsac_cx_count(n)?;
            let est = eta_for(model.into(), p, n_tg, 1 << n)?;
            println!("n_TG = {}", est.n_tg);
            println!("q = {:.10e}", est.q);
            println!("eta = {:.10e}", est.eta);
            println!("regime = {:?}", est.regime);
        }
        Command::Limit { nc, eps, eta } => {
            let limit = steady_state_analytic(nc, eps, eta)?;
            println!("lambda1 = {:.16e}", limit.lambda1);
            println!("lambda2 = {:.16e}", limit.lambda2);
            println!("z1 = {:.16e}", limit.z1);
            println!("z2 = {:.16e}", limit.z2);
            println!("P = {:.16e}", target_population(&limit));
        }
        Command::Describe { protocol, n } => {
            let circuit = match protocol {
                Protocol::Tsac => build_tsac_circuit(n)?,
                Protocol::Dc => build_dc_mirror_circuit(n)?,
            };
            let basis = transpile(&circuit);
            print!("{}", basis.to_text());
            println!("# cx_count = {}", count_cx(&basis)?);
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
