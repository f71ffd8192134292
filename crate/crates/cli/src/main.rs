use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use intbvp::config::load_config;
use intbvp::ivp::Tolerance;
use intbvp::oracle::{sweep, verify, VerifyOptions};
use intbvp::sens::{sensitivities_for, uniform_grid, SignConvention};
use intbvp::shoot::newton_solve;
use intbvp::{DatumId, Error, SolverOptions, ValidatedProblem};

/// Shooting solver and boundary-data sensitivities for multipoint BVPs with an
/// integral boundary condition.
#[derive(Debug, Parser)]
#[command(name = "intbvp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve and print u, u', ..., u^(n-1) on a uniform grid over [x_1, d].
    Solve {
        config: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Print the sensitivities du/d(datum) on a uniform grid over [x_1, d].
    Sens {
        config: PathBuf,
        /// `all`, `y:r:l`, `x:l`, `c`, `d` or `p`.
        #[arg(long, default_value = "all", value_parser = parse_selection)]
        datum: Selection,
        /// Use the alternative signs for the c and d targets.
        #[arg(long)]
        paper_signs: bool,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Compare every sensitivity with finite differences; JSON report.
    Verify {
        config: PathBuf,
        /// Base FD step; defaults to 1e-3 * max(1, |datum|).
        #[arg(long)]
        h0: Option<f64>,
        #[arg(long, default_value_t = 1e-5)]
        tol_rel: f64,
        #[arg(long)]
        paper_signs: bool,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Perturb each datum by each delta and report the uniform deviation.
    Sweep {
        config: PathBuf,
        /// Comma-separated, strictly decreasing.
        #[arg(long, default_value = "1e-2,1e-3,1e-4", allow_hyphen_values = true)]
        deltas: String,
        #[command(flatten)]
        knobs: Knobs,
    },
}

#[derive(Debug, Args)]
struct Knobs {
    /// Integrator absolute and relative tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Gauss-Legendre nodes per panel.
    #[arg(long, default_value_t = 5)]
    quad_nodes: usize,
    /// Output grid points (verify and sweep use at least 101).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Initial guess for the free initial values at x_1, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    guess: Option<Vec<f64>>,
}

impl Knobs {
    fn solver_options(&self) -> Result<SolverOptions, Error> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {}", self.tol)));
        }
        Ok(SolverOptions {
            tol: Tolerance::uniform(self.tol),
            quad_nodes: self.quad_nodes,
            max_iter: self.max_iter,
            guess: self.guess.clone(),
            cover: None,
        })
    }

    fn grid(&self, vp: &ValidatedProblem, default: usize) -> Result<Vec<f64>, Error> {
        let count = self.grid.unwrap_or(default);
        if count < 2 {
            return Err(Error::Config(format!("--grid needs at least 2 points, got {count}")));
        }
        Ok(uniform_grid(vp.point(1), vp.d(), count))
    }
}

#[derive(Debug, Clone)]
enum Selection {
    All,
    One(DatumId),
}

fn parse_selection(s: &str) -> Result<Selection, String> {
    if s == "all" {
        return Ok(Selection::All);
    }
    s.parse().map(Selection::One).map_err(|e: Error| e.to_string())
}

fn signs(paper: bool) -> SignConvention {
    if paper {
        SignConvention::Printed
    } else {
        SignConvention::Leibniz
    }
}

fn load(path: &PathBuf) -> Result<ValidatedProblem, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    load_config(&text)
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

fn run(cli: Cli) -> Result<(String, ExitCode), Error> {
    let mut out = String::new();
    match cli.command {
        Command::Solve { config, knobs } => {
            let vp = load(&config)?;
            let opts = knobs.solver_options()?;
            let grid = knobs.grid(&vp, 201)?;
            let sol = newton_solve(&vp, &opts)?;
            out.push('x');
            for i in 0..vp.n() {
                write!(out, ",u{i}").unwrap();
            }
            out.push('\n');
            for &x in &grid {
                out.push_str(&fmt(x));
                for i in 0..vp.n() {
                    write!(out, ",{}", fmt(sol.u(x, i)?)).unwrap();
                }
                out.push('\n');
            }
        }
        Command::Sens { config, datum, paper_signs, knobs } => {
            let vp = load(&config)?;
            let opts = knobs.solver_options()?;
            let grid = knobs.grid(&vp, 201)?;
            let ids: Vec<DatumId> = match datum {
                Selection::All => vp.data_ids().to_vec(),
                Selection::One(id) if vp.is_valid_datum(id) => vec![id],
                Selection::One(id) => {
                    return Err(Error::Config(format!("datum {id} does not exist in this problem")));
                }
            };
            let (_, table) = sensitivities_for(&vp, &opts, signs(paper_signs))?;
            let columns = ids
                .iter()
                .map(|&id| table.get(id).expect("table covers every datum").sample(&grid))
                .collect::<Result<Vec<_>, _>>()?;
            out.push('x');
            for id in &ids {
                write!(out, ",{id}").unwrap();
            }
            out.push('\n');
            for (row, &x) in grid.iter().enumerate() {
                out.push_str(&fmt(x));
                for col in &columns {
                    write!(out, ",{}", fmt(col[row])).unwrap();
                }
                out.push('\n');
            }
        }
        Command::Verify { config, h0, tol_rel, paper_signs, knobs } => {
            let vp = load(&config)?;
            let opts = knobs.solver_options()?;
            let vopts = VerifyOptions {
                h0,
                tol_rel,
                grid_points: knobs.grid.unwrap_or(101),
                signs: signs(paper_signs),
                ..VerifyOptions::default()
            };
            let report = verify(&vp, &opts, &vopts)?;
            out = serde_json::to_string_pretty(&report).expect("report serializes");
            out.push('\n');
            if !report.pass {
                return Ok((out, ExitCode::from(4)));
            }
        }
        Command::Sweep { config, deltas, knobs } => {
            let vp = load(&config)?;
            let opts = knobs.solver_options()?;
            let deltas = deltas
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| Error::Config(format!("bad delta {t:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let report = sweep(&vp, &deltas, &opts)?;
            out.push_str("datum,delta,sup_deviation,ratio_to_prev\n");
            for cell in &report.cells {
                if let Some(e) = &cell.error {
                    eprintln!("warning: {} at delta {}: {e}", cell.datum, cell.delta);
                }
                let ratio = cell.ratio_to_prev.map(fmt).unwrap_or_default();
                writeln!(out, "{},{},{},{ratio}", cell.datum, fmt(cell.delta), fmt(cell.sup_deviation)).unwrap();
            }
        }
    }
    Ok((out, ExitCode::SUCCESS))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::InvalidProblem(_) | Error::Config(_) | Error::PerturbationInfeasible { .. } => 1,
        Error::DisconjugacyViolation { .. } => 3,
        _ => 2,
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
    match run(cli) {
        Ok((out, code)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
