//! `minep` command-line front end.
//!
//! JSON on stdout, diagnostics on stderr. Exit 0 on success, 2 on input or
//! usage errors, 3 when a numerical procedure fails.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use minep::io::{distribution_from_json, function_from_json, read_text, FamilyFile, ModelFile};
use minep::{
    circuit_contracted_rate, circuit_contracted_rate_numerical, dv_rate, entropy_decomposition,
    entropy_production_rate, feynman_kac_estimate, occupation_samples, ou_dv_rate,
    ou_entropy_production, ou_modified_identity_check, stationary_distribution,
    tilted_perron_eigenvalue, theorem_main_scan, CircuitModel, Error, GaussianDist, OUModel,
    Parity, ProbDist, StateSpace,
};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "minep", version, about = "Rate functions and entropy production for Markov jump processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParityArg {
    Even,
    Odd,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary distribution of a model.
    Stationary {
        #[arg(long)]
        model: PathBuf,
    },
    /// Entropy production of a distribution and its system/reservoir split.
    Ep {
        #[arg(long)]
        model: PathBuf,
        /// Distribution file, or an inline JSON object.
        #[arg(long)]
        mu: String,
    },
    /// Donsker-Varadhan rate function with its maximizer and certificate.
    Dv {
        #[arg(long)]
        model: PathBuf,
        /// Distribution file, or an inline JSON object.
        #[arg(long)]
        mu: String,
    },
    /// Rate function against a quarter of the excess entropy production over an eps grid.
    Scan {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Gaussian law under a one-dimensional Ornstein-Uhlenbeck process.
    Ou {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        drive: f64,
        #[arg(long, value_enum)]
        parity: ParityArg,
        #[arg(long, allow_hyphen_values = true)]
        mean: f64,
        #[arg(long)]
        var: f64,
    },
    /// Contracted rate function of the mean current in an RL circuit.
    Circuit {
        #[arg(long = "R")]
        resistance: f64,
        #[arg(long = "L")]
        inductance: f64,
        #[arg(long, allow_hyphen_values = true)]
        emf: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        jbar: f64,
        /// Emit CSV over this many currents spanning jbar +- |jbar - stationary current|.
        #[arg(long)]
        sweep: Option<usize>,
    },
    /// Gillespie occupation fractions, or a Feynman-Kac estimate when --V is given.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        /// Potential file `{state: value}`.
        #[arg(long = "V")]
        potential: Option<PathBuf>,
        /// Initial state for occupation runs; defaults to the first state.
        #[arg(long)]
        x0: Option<String>,
    },
}

enum Failure {
    Input(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<String, Failure>;

fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::String("nan".into())
    } else if x == f64::INFINITY {
        Value::String("inf".into())
    } else if x == f64::NEG_INFINITY {
        Value::String("-inf".into())
    } else {
        serde_json::from_str(&format!("{x:.16e}")).expect("scientific literal is valid JSON")
    }
}

fn csv_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn labelled(space: &StateSpace, values: impl IntoIterator<Item = f64>) -> Value {
    let map: Map<String, Value> = space
        .labels()
        .iter()
        .cloned()
        .zip(values.into_iter().map(num))
        .collect();
    Value::Object(map)
}

fn object<const N: usize>(pairs: [(&str, Value); N]) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn render(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn load_model(path: &Path) -> Result<ModelFile, Error> {
    ModelFile::from_json(&read_text(path)?)
}

fn load_distribution(space: &StateSpace, arg: &str) -> Result<ProbDist, Error> {
    if arg.trim_start().starts_with('{') {
        distribution_from_json(space, arg)
    } else {
        distribution_from_json(space, &read_text(Path::new(arg))?)
    }
}

fn stationary(model: &Path) -> Outcome {
    let k = load_model(model)?.rate_matrix()?;
    let rho = stationary_distribution(&k)?;
    Ok(render(&object([(
        "rho",
        labelled(k.space(), rho.probs().iter().copied()),
    )])))
}

fn ep(model: &Path, mu: &str) -> Outcome {
    let file = load_model(model)?;
    let k = file.rate_matrix()?;
    let mu = load_distribution(k.space(), mu)?;
    let sigma = entropy_production_rate(&k, &mu)?.value();
    let (system, reservoir) = match file.thermo_model()? {
        Some(m) => {
            let split = entropy_decomposition(&m, &mu)?;
            (num(split.system), num(split.reservoir))
        }
        None => (Value::Null, Value::Null),
    };
    Ok(render(&object([
        ("sigma", num(sigma)),
        ("sigma_S", system),
        ("sigma_R", reservoir),
    ])))
}

fn dv(model: &Path, mu: &str) -> Outcome {
    let k = load_model(model)?.rate_matrix()?;
    let mu = load_distribution(k.space(), mu)?;
    match dv_rate(&k, &mu) {
        Ok(r) => Ok(render(&object([
            ("I", num(r.value)),
            ("g_star", labelled(k.space(), r.maximizer.iter().copied())),
            ("certificate_residual", num(r.certificate.max_residual())),
            ("interior", Value::Bool(true)),
        ]))),
        // A finite supremum without a maximizer is a valid answer, not a failure.
        Err(Error::NoInteriorMaximizer { supremum, zero_states }) => {
            eprintln!("note: mu vanishes on {zero_states} state(s); reporting the supremum");
            Ok(render(&object([
                ("I", num(supremum)),
                ("g_star", Value::Null),
                ("certificate_residual", Value::Null),
                ("interior", Value::Bool(false)),
            ])))
        }
        Err(e) => Err(e.into()),
    }
}

const SCAN_HEADER: &str = "eps,I,Q,diff,diff_over_eps2,I_over_eps2,Q_over_eps2";

fn scan(family: &Path, format: Format) -> Outcome {
    let setup = FamilyFile::from_json(&read_text(family)?)?.resolve()?;
    let rows = theorem_main_scan(&setup.family, &setup.dist, &setup.eps_grid)?;
    let cols = |r: &minep::ScanRow| {
        [
            r.eps,
            r.rate,
            r.excess,
            r.diff,
            r.diff_over_eps2,
            r.rate_over_eps2,
            r.excess_over_eps2,
        ]
    };
    match format {
        Format::Csv => {
            let mut out = String::from(SCAN_HEADER);
            out.push_str("\r\n");
            for r in &rows {
                let line: Vec<String> = cols(r).iter().map(|&x| csv_num(x)).collect();
                out.push_str(&line.join(","));
                out.push_str("\r\n");
            }
            Ok(out)
        }
        Format::Json => {
            let names: Vec<&str> = SCAN_HEADER.split(',').collect();
            let list: Vec<Value> = rows
                .iter()
                .map(|r| {
                    Value::Object(
                        names
                            .iter()
                            .zip(cols(r))
                            .map(|(n, x)| (n.to_string(), num(x)))
                            .collect(),
                    )
                })
                .collect();
            Ok(render(&Value::Array(list)))
        }
    }
}

fn ou(gamma: f64, beta: f64, drive: f64, parity: ParityArg, mean: f64, var: f64) -> Outcome {
    let parity = match parity {
        ParityArg::Even => Parity::Even,
        ParityArg::Odd => Parity::Odd,
    };
    let m = OUModel::new(drive, gamma, beta, parity)?;
    let mu = GaussianDist::new(mean, var)?;
    let rate = ou_dv_rate(&m, &mu);
    let sigma = ou_entropy_production(&m, &mu);
    let residual = match parity {
        Parity::Even => rate - 0.25 * sigma,
        Parity::Odd => ou_modified_identity_check(&m, &mu)?,
    };
    Ok(render(&object([
        ("I", num(rate)),
        ("sigma", num(sigma)),
        ("identity_residual", num(residual)),
    ])))
}

fn circuit(r: f64, l: f64, emf: f64, beta: f64, jbar: f64, sweep: Option<usize>) -> Outcome {
    let c = CircuitModel::new(r, l, emf, beta)?;
    let Some(points) = sweep else {
        return Ok(render(&object([("Ibar", num(circuit_contracted_rate(&c, jbar)))])));
    };
    if points < 2 {
        return Err(Failure::Input("--sweep needs at least 2 points".into()));
    }
    let center = c.stationary_current();
    let half = (jbar - center).abs().max(f64::EPSILON * center.abs().max(1.0));
    let mut out = String::from("jbar,Ibar,Ibar_numerical\r\n");
    for i in 0..points {
        let j = center - half + 2.0 * half * i as f64 / (points - 1) as f64;
        let (numerical, _) = circuit_contracted_rate_numerical(&c, j)?;
        let _ = write!(
            out,
            "{},{},{}\r\n",
            csv_num(j),
            csv_num(circuit_contracted_rate(&c, j)),
            csv_num(numerical)
        );
    }
    Ok(out)
}

fn simulate(
    model: &Path,
    horizon: f64,
    samples: usize,
    seed: u64,
    potential: Option<&Path>,
    x0: Option<&str>,
) -> Outcome {
    let k = load_model(model)?.rate_matrix()?;
    if samples == 0 {
        return Err(Failure::Input("--samples must be positive".into()));
    }
    if let Some(path) = potential {
        let v = function_from_json(k.space(), &read_text(path)?)?;
        let fk = feynman_kac_estimate(&k, &v, horizon, samples, seed)?;
        let perron = tilted_perron_eigenvalue(&k, &v)?;
        return Ok(render(&object([
            ("lambda_hat", num(fk.lambda)),
            ("stderr", num(fk.stderr)),
            ("perron", num(perron)),
        ])));
    }
    let start = match x0 {
        Some(label) => k.space().index_of(label)?,
        None => 0,
    };
    let records = occupation_samples(&k, start, horizon, samples, seed)?;
    let n = k.len();
    let mut mean = vec![0.0; n];
    for r in &records {
        for (x, m) in mean.iter_mut().enumerate() {
            *m += r.fractions.get(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= samples as f64);
    let table: Vec<Value> = records
        .iter()
        .map(|r| labelled(k.space(), r.fractions.probs().iter().copied()))
        .collect();
    Ok(render(&object([
        ("T", num(horizon)),
        ("samples", Value::from(samples)),
        ("seed", Value::from(seed)),
        ("x0", Value::String(k.space().label(start).to_string())),
        ("mean", labelled(k.space(), mean)),
        ("occupation", Value::Array(table)),
    ])))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Stationary { model } => stationary(&model),
        Command::Ep { model, mu } => ep(&model, &mu),
        Command::Dv { model, mu } => dv(&model, &mu),
        Command::Scan { family, format } => scan(&family, format),
        Command::Ou {
            gamma,
            beta,
            drive,
            parity,
            mean,
            var,
        } => ou(gamma, beta, drive, parity, mean, var),
        Command::Circuit {
            resistance,
            inductance,
            emf,
            beta,
            jbar,
            sweep,
        } => circuit(resistance, inductance, emf, beta, jbar, sweep),
        Command::Simulate {
            model,
            horizon,
            samples,
            seed,
            potential,
            x0,
        } => simulate(&model, horizon, samples, seed, potential.as_deref(), x0.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
