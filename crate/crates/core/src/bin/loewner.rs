use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use loewner::conditions::{check_conditions, lemma1_initial_adjoint, Verdict};
use loewner::config::{load, Needs, Scenario};
use loewner::dynamics::{extract_limit_coefficients, Integrator};
use loewner::report::to_json;
use loewner::search::{cubic_root_lambda0, proposition1_verdict, scan_csv, scan_example, PropositionReport};
use loewner::series::CoefficientVector;
use loewner::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNCONVERGED: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Parser)]
#[command(name = "loewner", version, about = "Loewner-flow tools for coefficient extremal problems")]
struct Cli {
    /// Worker threads for parallel work (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct Io {
    /// Scenario file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the coefficient (and, given lambda, adjoint) system.
    Simulate(Io),
    /// Run the condition checks for (lambda, mu, a).
    Check(Io),
    /// Example family `lambda a_2 + a_4`.
    Example {
        #[arg(value_enum)]
        which: ExampleKind,
        /// Overrides the lambdas from the scenario file.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[command(flatten)]
        io: Io,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExampleKind {
    Cubic,
    Scan,
    Proposition,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DegenerateDenominator { .. } | Error::DegeneratePolynomial => EXIT_INCONCLUSIVE,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: format!("{}: {e}", path.display()),
    }
}

fn read_scenario(io: &Io, needs: Needs) -> Result<Scenario, Failure> {
    let text = match &io.config {
        Some(path) => fs::read_to_string(path).map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: format!("{}: {e}", path.display()),
        })?,
        None if needs == Needs::default() => "{}".to_string(),
        None => {
            return Err(Failure {
                code: EXIT_CONFIG,
                message: "--config is required".into(),
            })
        }
    };
    load(&text, needs).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    })
}

/// Writes `body` to `out/name`, or to stdout without `--out`.
fn emit(io: &Io, name: &str, body: &str) -> Result<(), Failure> {
    match &io.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| io_failure(&path, e))
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct LimitReport {
    n: usize,
    horizon: f64,
    step: f64,
    coefficients: Vec<[f64; 2]>,
    adjoint_final: Option<Vec<[f64; 2]>>,
    tail_error: f64,
    converged: bool,
}

fn pairs(v: &[loewner::Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn simulate(io: &Io) -> Result<u8, Failure> {
    let s = read_scenario(
        io,
        Needs {
            order: true,
            ..Needs::default()
        },
    )?;
    let n = s.n.expect("order is required");
    let integrator = Integrator::new(s.horizon, s.step);
    let initial = CoefficientVector::identity(n)?;
    let mut traj = integrator.run(&s.driving, &initial, None, None)?;
    let tol = s.check.tolerances.convergence;
    if let Some(lambda) = &s.lambda {
        let psi0 = lemma1_initial_adjoint(lambda, traj.final_coefficients())?;
        traj = integrator.run(&s.driving, &initial, Some(&psi0), None)?;
    }
    let limit = extract_limit_coefficients(&traj, tol);
    let report = LimitReport {
        n,
        horizon: s.horizon,
        step: traj.step,
        coefficients: pairs(limit.coefficients.as_slice()),
        adjoint_final: traj.final_adjoint().map(|p| pairs(p.as_slice())),
        tail_error: limit.tail_error,
        converged: limit.converged,
    };
    let json = to_json(&report)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    })?;
    let csv = String::from_utf8(csv).expect("CSV is ASCII");
    match (&io.out, io.format) {
        (Some(_), _) => {
            emit(io, "trajectory.csv", &csv)?;
            emit(io, "limit.json", &json)?;
        }
        (None, Some(Format::Csv)) => emit(io, "", &csv)?,
        (None, _) => emit(io, "", &json)?,
    }
    if !limit.converged {
        eprintln!("tail bound {:e} exceeds tolerance {:e}", limit.tail_error, tol);
        return Ok(EXIT_UNCONVERGED);
    }
    Ok(0)
}

fn check(io: &Io) -> Result<u8, Failure> {
    let s = read_scenario(
        io,
        Needs {
            order: true,
            lambda: true,
            mu: true,
            a: true,
        },
    )?;
    let (lambda, mu, a) = (s.lambda.unwrap(), s.mu.unwrap(), s.a.unwrap());
    let report = check_conditions(&lambda, &mu, &a, &s.check)?;
    emit(io, "report.json", &to_json(&report)?)?;
    Ok(if report.verdict == Verdict::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        0
    })
}

#[derive(Serialize)]
struct CubicReport {
    lambda0: f64,
    residual: f64,
}

fn example(which: ExampleKind, lambdas: &[f64], io: &Io) -> Result<u8, Failure> {
    let s = read_scenario(io, Needs::default())?;
    let lambdas: Vec<f64> = if !lambdas.is_empty() {
        lambdas.to_vec()
    } else if !s.example_lambdas.is_empty() {
        s.example_lambdas.clone()
    } else {
        match which {
            ExampleKind::Scan => {
                let l0 = cubic_root_lambda0();
                (-5..=5).map(|i| l0 + 0.01 * i as f64).collect()
            }
            _ => vec![0.0, -0.5, -0.9, -1.2, -1.5],
        }
    };
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Failure {
            code: EXIT_CONFIG,
            message: "lambda values must be finite".into(),
        });
    }
    match which {
        ExampleKind::Cubic => {
            let l0 = cubic_root_lambda0();
            let residual = ((25.0 * l0 + 37.0) * l0 + 16.0) * l0 + 3.0;
            emit(io, "cubic.json", &to_json(&CubicReport { lambda0: l0, residual })?)?;
        }
        ExampleKind::Scan => {
            let rows = scan_example(&lambdas)?;
            match io.format {
                Some(Format::Json) => emit(io, "scan.json", &to_json(&rows)?)?,
                _ => emit(io, "scan.csv", &scan_csv(&rows))?,
            }
        }
        ExampleKind::Proposition => {
            let reports = lambdas
                .iter()
                .map(|&l| proposition1_verdict(l, &s.search))
                .collect::<Result<Vec<PropositionReport>, _>>()?;
            emit(io, "proposition.json", &to_json(&reports)?)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let result = match &cli.command {
        Command::Simulate(io) => simulate(io),
        Command::Check(io) => check(io),
        Command::Example { which, lambda, io } => example(*which, lambda, io),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
