//! `priorrm` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use priorrm::config::{AlgorithmChoice, ExperimentConfig};
use priorrm::csvio::{fmt_f64, write_mixture_csv};
use priorrm::experiments::{
    optimal_c0_surface, run_four_variants, run_variant, sweep_c0, uniform_grid, write_medians_csv,
    write_sweep_csv, VariantStats,
};
use priorrm::priors::{kde_from_samples, read_samples_file, silverman_bandwidth};
use priorrm::tuning::{
    fit_c0_regression, read_coefficients_csv, read_rows_csv, recommend_c0, write_coefficients_csv,
    write_rows_csv, C0Regression,
};
use priorrm::Error;

#[derive(Parser)]
#[command(name = "priorrm", version, about = "Robbins-Monro root finding with prior information")]
struct Cli {
    /// Worker threads for ensemble runs (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the recommended initial RM spread c0.
    RecommendC0 {
        #[arg(long, allow_negative_numbers = true)]
        noise_sd: f64,
        #[arg(long)]
        iterations: u64,
        /// Coefficients CSV (`coef_d,coef_iter,intercept[,rmse,r2]`).
        #[arg(long)]
        coef_file: Option<PathBuf>,
    },
    /// Run the ensemble(s) described by a config file and write `medians.csv`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep c0 over `K + 1` evenly spaced points and write `sweep.csv`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        c0_from: f64,
        #[arg(long, allow_negative_numbers = true)]
        c0_to: f64,
        #[arg(long)]
        c0_steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Optimal c0 per (d, iteration) cell; `--fit` also refits the regression.
    Surface {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        d_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        iter_list: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fit: bool,
        #[arg(long, default_value_t = 0.05)]
        c0_from: f64,
        #[arg(long, default_value_t = 3.0)]
        c0_to: f64,
        #[arg(long, default_value_t = 59)]
        c0_steps: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Refit the c0 regression from a `d,iteration,optimal_c0` file.
    Fit {
        #[arg(long)]
        rows: PathBuf,
        /// Where to write `coef_d,coef_iter,intercept,rmse,r2`; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an equal-weight mixture prior from root samples.
    Kde {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, msg: e.to_string() }
}

fn numeric(e: Error) -> Failure {
    match e {
        Error::Io(_) => usage(e),
        _ => Failure { code: 3, msg: e.to_string() },
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::RecommendC0 { noise_sd, iterations, coef_file } => {
            let reg = match coef_file {
                Some(p) => read_coefficients_csv(open(&p)?).map_err(usage)?,
                None => C0Regression::PUBLISHED,
            };
            let c0 = recommend_c0(&reg, noise_sd, iterations).map_err(usage)?;
            println!("{c0:.4}");
            Ok(())
        }
        Command::Simulate { config, out, seed } => simulate(&config, &out, seed),
        Command::Sweep { config, c0_from, c0_to, c0_steps, out, seed } => {
            if !(c0_from > 0.0 && c0_to > c0_from && c0_steps >= 1) {
                return Err(usage("need 0 < --c0-from < --c0-to and --c0-steps >= 1"));
            }
            let grid = uniform_grid(c0_from, c0_to, c0_steps).map_err(usage)?;
            let cfg = load(&config, seed)?;
            let table = sweep_c0(&cfg.scenario, &grid).map_err(numeric)?;
            for row in &table.rows {
                warn_divergence(&format!("c0 = {}", fmt_f64(row.c0)), row.stats.divergent, row.stats.runs);
            }
            write_file(&out, "sweep.csv", |w| write_sweep_csv(w, &table))?;
            let best = table.argmin();
            println!(
                "argmin c0={} final_median_abs_deviation={}",
                fmt_f64(best.c0),
                fmt_f64(best.final_median_abs_deviation)
            );
            Ok(())
        }
        Command::Surface {
            config,
            d_list,
            iter_list,
            out,
            fit,
            c0_from,
            c0_to,
            c0_steps,
            seed,
        } => {
            if !(c0_from > 0.0 && c0_to > c0_from && c0_steps >= 1) {
                return Err(usage("need 0 < --c0-from < --c0-to and --c0-steps >= 1"));
            }
            if d_list.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(usage("--d-list entries must be non-negative"));
            }
            let grid = uniform_grid(c0_from, c0_to, c0_steps).map_err(usage)?;
            let cfg = load(&config, seed)?;
            let rows = optimal_c0_surface(&d_list, &iter_list, &cfg.scenario, &grid).map_err(|e| match e {
                Error::Domain(_) => usage(e),
                e => numeric(e),
            })?;
            write_file(&out, "surface.csv", |w| write_rows_csv(w, &rows))?;
            if fit {
                let f = fit_c0_regression(&rows).map_err(numeric)?;
                write_file(&out, "coefficients.csv", |w| write_coefficients_csv(w, &f))?;
            }
            Ok(())
        }
        Command::Fit { rows, out } => {
            let rows = read_rows_csv(open(&rows)?).map_err(usage)?;
            let f = fit_c0_regression(&rows).map_err(usage)?;
            match out {
                Some(p) => {
                    let w = create(&p)?;
                    finish(w, |w| write_coefficients_csv(w, &f))
                }
                None => write_coefficients_csv(std::io::stdout().lock(), &f).map_err(usage),
            }
        }
        Command::Kde { samples, bandwidth, out } => {
            let xs = read_samples_file(&samples).map_err(usage)?;
            if xs.is_empty() {
                return Err(usage(format!("{}: no samples", samples.display())));
            }
            let h = match bandwidth {
                Some(h) => h,
                None => silverman_bandwidth(&xs).map_err(usage)?,
            };
            let prior = kde_from_samples(&xs, h).map_err(usage)?;
            let w = create(&out)?;
            finish(w, |w| write_mixture_csv(w, &prior))
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_file(path).map_err(usage)?;
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    Ok(cfg)
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> CliResult {
    let cfg = load(config, seed)?;
    let variants: Vec<VariantStats> = match cfg.algorithms {
        AlgorithmChoice::All => run_four_variants(&cfg.scenario).map_err(numeric)?,
        AlgorithmChoice::One(_) => vec![run_variant(&cfg.scenario).map_err(numeric)?],
    };
    for v in &variants {
        let label = format!("{}/{} start", v.algorithm.name(), v.start_mode.name());
        warn_divergence(&label, v.stats.divergent, v.stats.runs);
    }
    write_file(out, "medians.csv", |w| write_medians_csv(w, &variants))
}

fn warn_divergence(label: &str, divergent: usize, finite: usize) {
    let attempted = divergent + finite;
    if divergent as f64 > priorrm::experiments::DIVERGENCE_WARN_FRACTION * attempted as f64 {
        eprintln!("warning: {label}: {divergent} of {attempted} runs diverged and were excluded");
    }
}

fn open(p: &Path) -> Result<File, Failure> {
    File::open(p).map_err(|e| usage(format!("{}: {e}", p.display())))
}

fn create(p: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(p)
        .map(BufWriter::new)
        .map_err(|e| usage(format!("{}: {e}", p.display())))
}

fn finish<W: Write>(mut w: W, body: impl FnOnce(&mut W) -> priorrm::Result<()>) -> CliResult {
    body(&mut w).map_err(usage)?;
    w.flush().map_err(usage)
}

fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> priorrm::Result<()>) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    finish(create(&dir.join(name))?, body)
}
