//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a statistical criterion failed, 2 usage,
//! configuration or regime error.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbm_riemann::config::RunConfig;
use fbm_riemann::constants::constants;
use fbm_riemann::fbm::{generate, write_csv, GeneratorSpec};
use fbm_riemann::integrands::{parse_spec, IntegrandSpec};
use fbm_riemann::report::{merge_reports, report_json, write_atomic, write_outputs};
use fbm_riemann::stats::{run_experiment_with_samples, Experiment, McReport, Theorem};
use fbm_riemann::{Error, HurstIndex, SimGrid};

#[derive(Parser)]
#[command(name = "fbm-riemann", version, about = "Riemann-sum errors of fractional Brownian integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the limit constants q_H, r_H as JSON.
    Constants {
        #[arg(long)]
        h: f64,
    },
    /// Dump sampled fBm paths as CSV (`t,comp_0,...`).
    Paths {
        #[arg(long)]
        h: f64,
        /// Coarse steps.
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Fine steps per coarse step.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Components.
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of paths (replications 0..reps).
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Output directory; a single path goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiment described by a config file.
    Verify {
        config: PathBuf,
        /// Overrides `workers` from the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the log-log MSE slope of the centred error.
    Rate {
        #[arg(long)]
        h: f64,
        /// Integrand spec string, e.g. `poly_of_B:c=0,0,0,1`.
        #[arg(long, default_value = "identity_B")]
        integrand: String,
        /// Comma-separated dyadic coarse sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [128, 256, 512, 1024])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge report.json files into one document.
    ReportMerge {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_verdict(report: &McReport) {
    for c in &report.criteria {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        eprintln!("{tag} {} value={} threshold={}", c.name, c.value, c.threshold);
    }
    for c in &report.caveats {
        eprintln!("note: {c}");
    }
    eprintln!("wall time: {:.2}s", report.wall_time);
}

fn finish(report: &McReport, out: Option<&PathBuf>, samples: Option<&[fbm_riemann::stats::Replication]>) -> Result<ExitCode, Error> {
    match out {
        Some(dir) => {
            for p in write_outputs(dir, report, samples)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => print!("{}", report_json(report)?),
    }
    print_verdict(report);
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Constants { h } => {
            let c = constants(HurstIndex::new(h)?)?;
            println!("{}", serde_json::to_string_pretty(&c)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Paths { h, n, m, d, seed, reps, out } => {
            let h = HurstIndex::new(h)?;
            let grid = SimGrid::new(1.0, n, m, d)?;
            if out.is_none() && reps != 1 {
                return Err(Error::Config("--out is required when --reps > 1".into()));
            }
            for r in 0..reps as u64 {
                let path = generate(h, grid, GeneratorSpec::new(seed, r))?;
                match &out {
                    Some(dir) => {
                        fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
                        let mut buf = Vec::new();
                        write_csv(&path, &mut buf).map_err(|e| Error::Config(e.to_string()))?;
                        write_atomic(&dir.join(format!("path_{r}.csv")), &buf)?;
                    }
                    None => {
                        let stdout = io::stdout();
                        let mut lock = stdout.lock();
                        write_csv(&path, &mut lock).map_err(|e| Error::Config(e.to_string()))?;
                        lock.flush().ok();
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config, workers, out } => {
            let cfg = RunConfig::load(&config)?;
            let workers = workers.unwrap_or(cfg.workers);
            let out = out.unwrap_or(cfg.output_dir.clone());
            let (report, reps) = run_experiment_with_samples(&cfg.experiment, workers)?;
            finish(&report, Some(&out), cfg.dump_samples.then_some(reps.as_slice()))
        }
        Command::Rate { h, integrand, n, m, t, reps, seed, workers, out } => {
            let spec: IntegrandSpec = parse_spec(&integrand)?;
            let mut e = Experiment::new(HurstIndex::new(h)?, spec, Theorem::RateSlope);
            e.n_list = n;
            e.refine_m = m;
            e.t_list = vec![t];
            e.replications = reps;
            e.base_seed = seed;
            let (report, _) = run_experiment_with_samples(&e, workers)?;
            for s in &report.slopes {
                eprintln!("slope {:.4} ± {:.4} (expected {:.4})", s.slope, s.stderr, s.expected);
            }
            finish(&report, out.as_ref(), None)
        }
        Command::ReportMerge { reports, out } => {
            let merged = merge_reports(&reports)?;
            let text = serde_json::to_string_pretty(&merged)? + "\n";
            match out {
                Some(p) => write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(if merged.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
