//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a `verify`
//! run completes but one of its asserted criteria fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::boot::{bootstrap_ci_with, Bootstrapper};
use crate::datagen::{DataSpec, DistSpec, MixingSpec};
use crate::error::{Error, Result};
use crate::io::{read_sample_csv, write_replicates_csv, write_sample_csv};
use crate::kernel::{BuiltinKernel, Kernel};
use crate::mc::{self, ExperimentConfig, RunOptions};
use crate::rng::{Lane, StreamFactory};
use crate::summary::mean;
use crate::ustat::{summarize, JackknifeNormalization};
use crate::weights::draw_weights;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "uvboot",
    version,
    about = "U-/V-statistics and the m-out-of-n multinomial bootstrap"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a seeded sample and write it as CSV.
    Datagen {
        /// normal:MEAN,SD | uniform:LOW,HIGH | exponential:RATE | pareto:ALPHA,XMIN | ar1:PHI,SD
        #[arg(long, value_parser = parse_data_spec)]
        dist: DataSpec,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print U_n, V_n and the jackknife variance as JSON.
    Ustat {
        #[arg(long)]
        kernel: BuiltinKernel,
        #[arg(long = "in")]
        input: PathBuf,
        /// quarter-n | n-times-n-minus-one | custom:C
        #[arg(long, default_value = "quarter-n", value_parser = parse_normalization)]
        normalization: JackknifeNormalization,
    },
    /// Write bootstrap replicates as CSV and a summary as JSON.
    Bootstrap {
        #[arg(long)]
        kernel: BuiltinKernel,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        m: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        #[arg(long)]
        seed: u64,
        /// Replicate CSV.
        #[arg(long)]
        out: PathBuf,
        /// Summary JSON; printed to stdout when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value = "quarter-n", value_parser = parse_normalization)]
        normalization: JackknifeNormalization,
    },
    /// Print a bootstrap-t confidence interval as JSON.
    Ci {
        #[arg(long)]
        kernel: BuiltinKernel,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        m: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value = "quarter-n", value_parser = parse_normalization)]
        normalization: JackknifeNormalization,
    },
    /// Run a Monte Carlo experiment from a JSON config and write its report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-replicate CSV, when the experiment keeps one.
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Worker threads (defaults to UVBOOT_THREADS, then all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn parse_params(text: &str, expected: usize) -> std::result::Result<Vec<f64>, String> {
    let values = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(format!(
            "expected {expected} parameter(s), got {}",
            values.len()
        ));
    }
    Ok(values)
}

fn parse_data_spec(text: &str) -> std::result::Result<DataSpec, String> {
    let (family, params) = text
        .split_once(':')
        .ok_or_else(|| format!("expected FAMILY:PARAMS, got `{text}`"))?;
    let spec = match family.trim() {
        "normal" => {
            let p = parse_params(params, 2)?;
            DataSpec::Iid(DistSpec::Normal {
                mean: p[0],
                sd: p[1],
            })
        }
        "uniform" => {
            let p = parse_params(params, 2)?;
            DataSpec::Iid(DistSpec::Uniform {
                low: p[0],
                high: p[1],
            })
        }
        "exponential" => {
            let p = parse_params(params, 1)?;
            DataSpec::Iid(DistSpec::Exponential { rate: p[0] })
        }
        "pareto" => {
            let p = parse_params(params, 2)?;
            DataSpec::Iid(DistSpec::Pareto {
                alpha: p[0],
                x_min: p[1],
            })
        }
        "ar1" => {
            let p = parse_params(params, 2)?;
            DataSpec::Ar1(MixingSpec {
                phi: p[0],
                innovation_sd: p[1],
            })
        }
        other => return Err(format!("unknown family `{other}`")),
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn parse_normalization(text: &str) -> std::result::Result<JackknifeNormalization, String> {
    match text {
        "quarter-n" => Ok(JackknifeNormalization::QuarterN),
        "n-times-n-minus-one" => Ok(JackknifeNormalization::NTimesNMinusOne),
        _ => match text.strip_prefix("custom:").map(str::parse::<f64>) {
            Some(Ok(c)) if c.is_finite() && c > 0.0 => Ok(JackknifeNormalization::Custom(c)),
            _ => Err(format!(
                "expected quarter-n, n-times-n-minus-one or custom:C with C > 0, got `{text}`"
            )),
        },
    }
}

#[derive(Serialize)]
struct UstatOutput {
    version: &'static str,
    kernel: BuiltinKernel,
    n: usize,
    u: f64,
    v: f64,
    sigma2_hat: Option<f64>,
    normalization: JackknifeNormalization,
}

#[derive(Serialize)]
struct BootstrapSummary {
    version: &'static str,
    kernel: BuiltinKernel,
    n: usize,
    m: u64,
    replicates: u64,
    seed: u64,
    u_n: f64,
    v_n: f64,
    sigma2_hat: f64,
    mean_u_star: f64,
    mean_v_star: f64,
    mean_q: f64,
    dropped: usize,
}

#[derive(Serialize)]
struct CiOutput {
    version: &'static str,
    kernel: BuiltinKernel,
    n: usize,
    m: u64,
    replicates: u64,
    seed: u64,
    level: f64,
    lower: f64,
    upper: f64,
    u_n: f64,
    sigma2_hat: f64,
    used: usize,
    dropped: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn read_checked_sample(kernel: BuiltinKernel, path: &Path) -> Result<crate::Sample> {
    let sample = read_sample_csv(open(path)?)?;
    kernel.check_sample(&sample)?;
    Ok(sample)
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// What a command produced: its exit code.
fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Datagen {
            dist,
            n,
            seed,
            dim,
            out,
        } => {
            if n == 0 || dim == 0 {
                return Err(Error::InvalidParameter(
                    "--n and --dim must be positive".into(),
                ));
            }
            let mut rng = StreamFactory::new(seed).stream(0, Lane::Data);
            let sample = dist.sample(n, dim, &mut rng)?;
            let mut w = create(&out)?;
            write_sample_csv(&sample, &mut w)?;
            w.flush()?;
        }
        Command::Ustat {
            kernel,
            input,
            normalization,
        } => {
            let sample = read_checked_sample(kernel, &input)?;
            let summary = summarize(&kernel, &sample, normalization)?;
            stdout.write_all(
                json_line(&UstatOutput {
                    version: crate::VERSION,
                    kernel,
                    n: summary.n,
                    u: summary.u,
                    v: summary.v,
                    sigma2_hat: summary.jackknife.map(|j| j.sigma2_hat),
                    normalization,
                })
                .as_bytes(),
            )?;
        }
        Command::Bootstrap {
            kernel,
            input,
            m,
            replicates,
            seed,
            out,
            summary,
            normalization,
        } => {
            let sample = read_checked_sample(kernel, &input)?;
            let boot = Bootstrapper::new(&kernel, &sample, normalization)?;
            let streams = StreamFactory::new(seed);
            let reps = (0..replicates)
                .map(|r| {
                    let w = draw_weights(sample.n(), m, &mut streams.stream(r, Lane::Weights))?;
                    Ok((r, boot.replicate(&w)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut w = create(&out)?;
            write_replicates_csv(reps.iter().copied(), &mut w)?;
            w.flush()?;
            let column = |f: fn(&crate::boot::BootstrapReplicate) -> f64| {
                mean(&reps.iter().map(|(_, r)| f(r)).collect::<Vec<_>>())
            };
            let text = json_line(&BootstrapSummary {
                version: crate::VERSION,
                kernel,
                n: sample.n(),
                m,
                replicates,
                seed,
                u_n: boot.u_n,
                v_n: boot.v_n,
                sigma2_hat: boot.sigma2_hat,
                mean_u_star: column(|r| r.u_star),
                mean_v_star: column(|r| r.v_star),
                mean_q: column(|r| r.q),
                dropped: reps.iter().filter(|(_, r)| r.pivot_u.is_none()).count(),
            });
            match summary {
                Some(path) => {
                    let mut w = create(&path)?;
                    w.write_all(text.as_bytes())?;
                    w.flush()?;
                }
                None => stdout.write_all(text.as_bytes())?,
            }
        }
        Command::Ci {
            kernel,
            input,
            m,
            replicates,
            seed,
            level,
            normalization,
        } => {
            let sample = read_checked_sample(kernel, &input)?;
            let mut rng = StreamFactory::new(seed).stream(0, Lane::Weights);
            let iv = bootstrap_ci_with(
                &kernel,
                &sample,
                m,
                replicates as usize,
                level,
                normalization,
                &mut rng,
            )?;
            stdout.write_all(
                json_line(&CiOutput {
                    version: crate::VERSION,
                    kernel,
                    n: sample.n(),
                    m,
                    replicates,
                    seed,
                    level,
                    lower: iv.lower,
                    upper: iv.upper,
                    u_n: iv.u_n,
                    sigma2_hat: iv.sigma2_hat,
                    used: iv.used,
                    dropped: iv.dropped,
                })
                .as_bytes(),
            )?;
        }
        Command::Verify {
            config,
            out,
            raw,
            threads,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", config.display()),
                ))
            })?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let report = mc::run(&cfg, &RunOptions { threads })?;
            let mut w = create(&out)?;
            w.write_all(report.to_json().as_bytes())?;
            w.write_all(b"\n")?;
            w.flush()?;
            if let (Some(path), Some(table)) = (raw, report.raw.as_ref()) {
                table.write_csv(create(&path)?)?;
            }
            for c in &report.criteria {
                let tag = match (c.asserted, c.pass) {
                    (true, true) => "PASS",
                    (true, false) => "FAIL",
                    (false, _) => "INFO",
                };
                writeln!(stdout, "{tag} {}: {}", c.name, c.detail)?;
            }
            writeln!(
                stdout,
                "{} {}",
                report.kind,
                if report.pass { "passed" } else { "FAILED" }
            )?;
            if !report.pass {
                writeln!(stderr, "verification failed: see {}", out.display())?;
                return Ok(EXIT_VERIFY_FAILED);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_command<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}
