//! The `sdpsieve` command line: reduce problems, score solutions, recover
//! dual multipliers, classify help codes, and generate test instances.
//!
//! Exit codes partition mathematical verdicts from I/O failure so pipelines
//! can branch without parsing text: 0 success/reduced, 10 infeasibility
//! certified, 11 recovery failed, 2 bad input.

use crate::metrics::{dimacs_errors, help_code, reduction_stats, AfterReport};
use crate::model::Solution;
use crate::recovery::{basic_recovery, RecoveryOptions, RecoveryResult};
use crate::sieve::{sieve, SieveOptions};
use crate::{gen, io};
use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 10;
pub const EXIT_RECOVERY_FAILED: i32 = 11;

#[derive(Parser, Debug)]
#[command(name = "sdpsieve", version, about = "Facial-reduction presolver for SDPs in primal standard form")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Report style for stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sieve a problem: delete reducing constraints and their rows/columns,
    /// or certify infeasibility (exit 10).
    Reduce {
        /// Problem in sparse SDPA format.
        input: PathBuf,
        /// Where to write the reduced problem (skipped when infeasible).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the reduction certificate.
        #[arg(long)]
        cert: Option<PathBuf>,
        /// Tolerance-banded comparisons (the default).
        #[arg(long, overrides_with = "no_safe_mode")]
        safe_mode: bool,
        /// Exact comparisons against b instead of the tolerance bands.
        #[arg(long, overrides_with = "safe_mode")]
        no_safe_mode: bool,
        /// Base tolerance for safe mode.
        #[arg(long)]
        eps: Option<f64>,
        /// Cap on the number of certificate steps.
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Print size reduction statistics.
        #[arg(long)]
        stats: bool,
    },
    /// Score a primal/dual pair with the six DIMACS errors.
    Dimacs {
        problem: PathBuf,
        solution: PathBuf,
    },
    /// Extend a reduced dual solution to the original problem (exit 11 when
    /// the linesearch fails).
    Recover {
        problem: PathBuf,
        cert: PathBuf,
        /// Multipliers of the reduced problem (`y ...` line).
        y_reduced: PathBuf,
        /// Where to write the recovered full multiplier vector.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Diagonal shift for the slack test.
        #[arg(long, default_value_t = 1e-6)]
        shift: f64,
    },
    /// Compare two solve reports and print the help codes.
    Helpcode {
        before: PathBuf,
        after: PathBuf,
    },
    /// Write a generated instance.
    Gen {
        #[arg(value_enum)]
        family: Family,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Total cone dimension (planted family).
        #[arg(long)]
        n: Option<usize>,
        /// Number of constraints (planted family).
        #[arg(long)]
        m: Option<usize>,
        /// Number of planted reducing constraints (planted family).
        #[arg(long)]
        k: Option<usize>,
        /// Problem to obfuscate (messy family); defaults to example1.
        #[arg(long)]
        base: Option<PathBuf>,
        /// Where to write the plant record (planted family); defaults to
        /// `<out>.plant`.
        #[arg(long)]
        record: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    Example1,
    Posgap,
    Planted,
    Messy,
}

#[derive(Debug)]
struct CliError {
    message: String,
}

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        Self { message: e.to_string() }
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            EXIT_INPUT_ERROR
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError { message: format!("{}: {e}", path.display()) })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError { message: format!("{}: {e}", path.display()) })
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Reduce { input, out, cert, no_safe_mode, eps, max_iter, stats, .. } => {
            let problem = io::read_sdpa(&read_file(&input)?)?;
            let mut options = SieveOptions { safe_mode: !no_safe_mode, ..SieveOptions::default() };
            if let Some(eps) = eps {
                if !eps.is_finite() || eps <= 0.0 {
                    return Err(CliError { message: format!("eps must be positive, got {eps}") });
                }
                options.eps = eps;
            }
            options.max_iterations = max_iter;
            let outcome = sieve(&problem, &options)?;
            if let Some(path) = cert {
                write_file(&path, &io::write_certificate(outcome.certificate()))?;
            }
            let mut report = String::new();
            if outcome.is_infeasible() {
                match cli.format {
                    Format::Human => {
                        let _ = writeln!(
                            report,
                            "infeasibility certified after {} steps",
                            outcome.iteration_count
                        );
                    }
                    Format::Machine => {
                        let _ = writeln!(report, "verdict=infeasible");
                        let _ = writeln!(report, "iterations={}", outcome.iteration_count);
                    }
                }
                print!("{report}");
                return Ok(EXIT_INFEASIBLE);
            }
            let reduced = outcome.reduced_problem().expect("reduced verdict");
            if let Some(path) = out {
                write_file(&path, &io::write_sdpa(reduced)?)?;
            }
            match cli.format {
                Format::Human => {
                    let _ = writeln!(report, "reduced after {} steps", outcome.iteration_count);
                }
                Format::Machine => {
                    let _ = writeln!(report, "verdict=reduced");
                    let _ = writeln!(report, "iterations={}", outcome.iteration_count);
                }
            }
            if stats {
                let s = reduction_stats(&problem, reduced, 0.0, 0.0, 0.0);
                let fraction = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.6}"));
                match cli.format {
                    Format::Human => {
                        let _ = writeln!(report, "n:   {} -> {}", s.n_before, s.n_after);
                        let _ = writeln!(report, "m:   {} -> {}", s.m_before, s.m_after);
                        let _ = writeln!(report, "nnz: {} -> {}", s.nnz_before, s.nnz_after);
                        let _ = writeln!(
                            report,
                            "reduction on n: {}, on m: {}",
                            fraction(s.reduction_on_n),
                            fraction(s.reduction_on_m)
                        );
                    }
                    Format::Machine => {
                        let _ = writeln!(report, "n_before={}", s.n_before);
                        let _ = writeln!(report, "n_after={}", s.n_after);
                        let _ = writeln!(report, "m_before={}", s.m_before);
                        let _ = writeln!(report, "m_after={}", s.m_after);
                        let _ = writeln!(report, "nnz_before={}", s.nnz_before);
                        let _ = writeln!(report, "nnz_after={}", s.nnz_after);
                        let _ = writeln!(report, "reduction_on_n={}", fraction(s.reduction_on_n));
                        let _ = writeln!(report, "reduction_on_m={}", fraction(s.reduction_on_m));
                    }
                }
            }
            print!("{report}");
            Ok(EXIT_OK)
        }

        Command::Dimacs { problem, solution } => {
            let problem = io::read_sdpa(&read_file(&problem)?)?;
            let solution = io::read_solution(&read_file(&solution)?, &problem)?;
            let errors = dimacs_errors(&problem, &solution)?;
            let sep = match cli.format {
                Format::Human => " = ",
                Format::Machine => "=",
            };
            for (idx, v) in errors.as_array().iter().enumerate() {
                println!("err{}{sep}{:.5e}", idx + 1, v);
            }
            println!("max_abs{sep}{:.5e}", errors.max_abs());
            Ok(EXIT_OK)
        }

        Command::Recover { problem, cert, y_reduced, out, shift } => {
            let problem = io::read_sdpa(&read_file(&problem)?)?;
            let certificate = io::read_certificate(&read_file(&cert)?)?;
            let y_text = read_file(&y_reduced)?;
            let y = parse_multiplier_file(&y_text)?;
            if !shift.is_finite() || shift <= 0.0 {
                return Err(CliError { message: format!("shift must be positive, got {shift}") });
            }
            let options = RecoveryOptions { shift };
            match basic_recovery(&problem, &certificate, &y, &options)? {
                RecoveryResult::Recovered { y } => {
                    if let Some(path) = out {
                        write_file(&path, &io::write_solution(&Solution::dual_only(y)))?;
                    }
                    match cli.format {
                        Format::Human => println!("recovered multipliers for all deleted constraints"),
                        Format::Machine => println!("recovered=1"),
                    }
                    Ok(EXIT_OK)
                }
                RecoveryResult::Failed { step_index } => {
                    let constraint = certificate.steps[step_index].constraint_index;
                    match cli.format {
                        Format::Human => println!(
                            "recovery failed at step {step_index} (constraint {constraint})"
                        ),
                        Format::Machine => {
                            println!("recovered=0");
                            println!("failed_step={step_index}");
                            println!("failed_constraint={constraint}");
                        }
                    }
                    Ok(EXIT_RECOVERY_FAILED)
                }
            }
        }

        Command::Helpcode { before, after } => {
            let before = match io::read_solve_report(&read_file(&before)?)? {
                AfterReport::Solved(report) => report,
                AfterReport::SieveInfeasible => {
                    return Err(CliError {
                        message: "the `before` report cannot be sieve-infeasible".into(),
                    })
                }
            };
            let after = io::read_solve_report(&read_file(&after)?)?;
            let codes = help_code(&before, &after);
            let joined =
                codes.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
            match cli.format {
                Format::Human => {
                    if joined.is_empty() {
                        println!("help codes: none");
                    } else {
                        println!("help codes: {joined}");
                    }
                }
                Format::Machine => println!("codes={joined}"),
            }
            Ok(EXIT_OK)
        }

        Command::Gen { family, out, seed, n, m, k, base, record } => {
            let problem = match family {
                Family::Example1 => gen::example1(),
                Family::Posgap => gen::posgap(),
                Family::Planted => {
                    let (n, m, k) = match (n, m, k) {
                        (Some(n), Some(m), Some(k)) => (n, m, k),
                        _ => {
                            return Err(CliError {
                                message: "planted requires --n, --m, and --k".into(),
                            })
                        }
                    };
                    let (problem, plant) = gen::planted(seed, n, m, k)?;
                    let record_path =
                        record.unwrap_or_else(|| PathBuf::from(format!("{}.plant", out.display())));
                    write_file(&record_path, &format_plant_record(&plant))?;
                    write_file(&out, &io::write_sdpa(&problem)?)?;
                    return Ok(EXIT_OK);
                }
                Family::Messy => {
                    let base_problem = match base {
                        Some(path) => io::read_sdpa(&read_file(&path)?)?,
                        None => gen::example1(),
                    };
                    let (problem, _) = gen::messy(&base_problem, seed)?;
                    problem
                }
            };
            write_file(&out, &io::write_sdpa(&problem)?)?;
            Ok(EXIT_OK)
        }
    }
}

/// A `y`-only solution line, without binding to a problem's constraint count.
fn parse_multiplier_file(text: &str) -> Result<Vec<f64>, CliError> {
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| CliError { message: "empty multiplier file".into() })?;
    let mut toks = line.split_whitespace();
    if toks.next() != Some("y") {
        return Err(CliError { message: "multiplier file must start with a `y` line".into() });
    }
    toks.map(|t| {
        let v: f64 = t
            .parse()
            .map_err(|_| CliError { message: format!("expected a number, got `{t}`") })?;
        if !v.is_finite() {
            return Err(CliError { message: format!("non-finite multiplier `{t}`") });
        }
        Ok(v)
    })
    .collect()
}

fn format_plant_record(record: &gen::PlantRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "planted {}", record.planted.len());
    let _ = writeln!(out, "infeasible {}", u8::from(record.infeasible));
    for p in &record.planted {
        let support: Vec<String> = p.support.iter().map(|c| format!("{c}")).collect();
        let _ = writeln!(
            out,
            "constraint {} sign {} support {}",
            p.index,
            if p.sign >= 0 { "+1" } else { "-1" },
            support.join(" ")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplier_file_parsing() {
        assert_eq!(parse_multiplier_file("y 1.0 -2.0\n").unwrap(), vec![1.0, -2.0]);
        assert_eq!(parse_multiplier_file("y\n").unwrap(), Vec::<f64>::new());
        assert!(parse_multiplier_file("1.0\n").is_err());
        assert!(parse_multiplier_file("").is_err());
        assert!(parse_multiplier_file("y inf\n").is_err());
    }

    #[test]
    fn cli_parses_reduce_flags() {
        let cli = Cli::try_parse_from([
            "sdpsieve", "reduce", "in.dat-s", "--out", "o.dat-s", "--cert", "c.txt",
            "--no-safe-mode", "--eps", "1e-12", "--max-iter", "5", "--stats",
        ])
        .unwrap();
        match cli.command {
            Command::Reduce { no_safe_mode, eps, max_iter, stats, .. } => {
                assert!(no_safe_mode);
                assert_eq!(eps, Some(1e-12));
                assert_eq!(max_iter, Some(5));
                assert!(stats);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }
}
