//! Command-line driver.  Exit codes: 0 success, 2 config error,
//! 3 numerical failure (blowup where global existence was expected),
//! 4 failed assertion in `report --assert` or a verification subcommand.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nullwave::background::{verify_coefficient_conditions, verify_weak_wave, SampleGrid};
use nullwave::coeffs::{decompose_null, verify_null_on_cone, CoeffTensor, DEFAULT_NULL_TOL};
use nullwave::config::RunConfig;
use nullwave::runner::{self, RunStatus};

#[derive(Parser)]
#[command(name = "nullwave", about = "characteristic evolution and decay diagnostics for semilinear waves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and persist its artifacts
    Run { config: PathBuf },
    /// One run per value along a numeric config axis
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// comma-separated numbers
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Aggregate run directories into one Markdown report
    Report {
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "report.md")]
        out: PathBuf,
        /// exit 4 when any decay target fails
        #[arg(long)]
        assert: bool,
    },
    /// Classify a coefficient tensor against the null condition
    CheckTensor {
        /// q0 | e00 | zero | qab:<a><b> or 16 whitespace-separated reals
        spec: Vec<String>,
    },
    /// Check the weak-wave and coefficient decay conditions of a config
    VerifyBackground { config: PathBuf },
}

fn load_config(path: &PathBuf) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    RunConfig::parse(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            match runner::run(&cfg) {
                Ok(o) => {
                    println!("run {} -> {}", o.run_id, o.run_dir.display());
                    match o.status {
                        RunStatus::Completed => {
                            println!("status: completed");
                            ExitCode::SUCCESS
                        }
                        RunStatus::BlowupDetected => {
                            println!("status: blowup_detected, t* ~ {}", o.t_star.unwrap());
                            if o.expects_global {
                                eprintln!("preset {} expected global existence", cfg.preset.name());
                                ExitCode::from(3)
                            } else {
                                ExitCode::SUCCESS
                            }
                        }
                    }
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Command::Sweep { config, axis, values } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            match runner::sweep(&cfg, &axis, &values) {
                Ok(rep) => {
                    for e in &rep.entries {
                        match &e.outcome {
                            Ok(o) => println!(
                                "{} = {}: {} ({})",
                                rep.axis,
                                e.value,
                                match o.status {
                                    RunStatus::Completed => "completed".to_string(),
                                    RunStatus::BlowupDetected =>
                                        format!("blowup_detected t* ~ {}", o.t_star.unwrap()),
                                },
                                o.run_dir.display()
                            ),
                            Err(err) => println!("{} = {}: error: {err}", rep.axis, e.value),
                        }
                    }
                    for c in &rep.comparisons {
                        println!("{c}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("sweep failed: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Report { dirs, out, assert } => {
            if dirs.is_empty() {
                eprintln!("report needs at least one run directory");
                return ExitCode::from(2);
            }
            match runner::report(&dirs, &out) {
                Ok(sum) => {
                    println!("report written to {}", sum.path.display());
                    if assert && !sum.pass {
                        eprintln!("assertion failed: decay targets not met");
                        ExitCode::from(4)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("report failed: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::CheckTensor { spec } => {
            let joined = spec.join(" ");
            let tensor = match CoeffTensor::parse(&joined) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("bad tensor spec: {e}");
                    return ExitCode::from(2);
                }
            };
            let d = decompose_null(&tensor, DEFAULT_NULL_TOL);
            let cone_max = verify_null_on_cone(&tensor, 64);
            println!("tensor: {}", tensor.to_row_major_string());
            println!("cone-sample max |A(xi,xi)|: {cone_max}");
            println!("decomposition residual norm: {}", d.residual_norm);
            println!("classification: {}", if d.is_null { "null form" } else { "NOT null" });
            ExitCode::SUCCESS
        }
        Command::VerifyBackground { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            let spec = &cfg.problem.background;
            let grid = SampleGrid {
                t_max: cfg.grid.t_max.min(60.0),
                r_max: cfg.r_match().max(20.0),
                nt: 120,
                nr: 120,
            };
            let ww = verify_weak_wave(spec, &grid);
            let cc = verify_coefficient_conditions(spec, &grid);
            for c in ww.conditions.iter().chain(cc.conditions.iter()) {
                println!(
                    "{}: worst ratio {:.4} at (t, r) = {:?} -> {}",
                    c.name,
                    c.worst_ratio,
                    c.at,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            if !ww.corner_points.is_empty() {
                println!("region-corner samples flagged: {}", ww.corner_points.len());
            }
            println!(
                "constants relation (1+t0)^a * delta * a >= C0: {}",
                cfg.problem.background.weak_wave.constants_valid()
            );
            if ww.pass && cc.pass {
                println!("background: pass");
                ExitCode::SUCCESS
            } else {
                println!("background: FAIL");
                ExitCode::from(4)
            }
        }
    }
}
