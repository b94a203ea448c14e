use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use weaklmp::dependence::{
    has_closed_kendall, kendall_closed_curve, kendall_function, kendall_tau, tail_dependence, uniform_grid,
};
use weaklmp::generators::{aging_profile, multiplicativity_check, AgingGrid};
use weaklmp::pricing::{self, Basis, PricingOptions};
use weaklmp::{sampler, Error, Model, ModelConfig};

#[derive(Parser)]
#[command(name = "weaklmp", version, about = "Bivariate lack-of-memory survival models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the admissibility report of a config.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
        /// Re-emit the parsed model as JSON.
        #[arg(long)]
        echo: bool,
    },
    /// Joint survival F(x, y), or the residual survival at time t.
    Eval {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
    },
    /// Largest residual of the generalized weak lack-of-memory identity.
    Check {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
    /// Kendall function curves as CSV.
    Kendall {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, default_value_t = 19)]
        points: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Kendall's tau of the residual copula.
    Tau {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
    /// Lower and upper tail dependence coefficients.
    Taildep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Estimate every coefficient numerically.
        #[arg(long)]
        numeric: bool,
    },
    /// Aging and multiplicativity classes of the generator.
    Aging {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Exact samples as CSV (x,y,atom).
    Sample {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Joint and independent annuity premiums as CSV.
    Price {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, value_enum, default_value_t = BasisArg::Deferred)]
        basis: BasisArg,
        #[arg(long, default_value_t = pricing::TABLE_HORIZON)]
        horizon: f64,
        /// Constant force of interest.
        #[arg(long, default_value_t = 0.0)]
        force: f64,
    },
    /// Built-in reproductions.
    Paper {
        #[command(subcommand)]
        what: PaperCommand,
    },
}

#[derive(Subcommand)]
enum PaperCommand {
    /// Premium table for the two reference models, checked at 1%.
    Table1,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Deferred,
    Residual,
}

/// Failure with exit code 1.
#[derive(Debug)]
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(format!("i/o: {e}"))
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ExitCode::from(exit_code(std::env::args_os()))
}

/// 0 on success, 1 on validation or domain errors, 2 on usage errors.
fn exit_code<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return u8::try_from(e.exit_code()).unwrap_or(2);
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn load(path: &Path) -> Result<Model, Failure> {
    Ok(ModelConfig::from_path(path)?.to_model()?)
}

fn emit(output: Option<&Path>, text: &str) -> Outcome {
    match output {
        Some(p) if p != Path::new("-") => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        _ => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Validate { config, echo } => validate(&config, echo),
        Command::Eval { config, x, y, t } => {
            let m = load(&config)?;
            let v = match t {
                Some(t) => m.fbar_residual(t, x, y)?,
                None => m.fbar(x, y)?,
            };
            println!("{v}");
            Ok(())
        }
        Command::Check { config, grid } => check(&config, grid),
        Command::Kendall {
            config,
            t,
            points,
            output,
        } => {
            let m = load(&config)?;
            let grid = uniform_grid(points);
            let closed = has_closed_kendall(&m);
            let mut s = String::from(if closed { "t,s,k,k_closed\n" } else { "t,s,k\n" });
            for &ti in &t {
                let q = kendall_function(&m, ti, &grid)?;
                let c = if closed {
                    Some(kendall_closed_curve(&m, ti, &grid)?)
                } else {
                    None
                };
                for (k, (sv, kv)) in q.grid.iter().enumerate() {
                    let _ = write!(s, "{ti},{sv},{kv}");
                    if let Some(c) = &c {
                        let _ = write!(s, ",{}", c.grid[k].1);
                    }
                    s.push('\n');
                }
            }
            emit(output.as_deref(), &s)
        }
        Command::Tau { config, t } => {
            let m = load(&config)?;
            let mut s = String::from("t,tau\n");
            for &ti in &t {
                let _ = writeln!(s, "{ti},{}", kendall_tau(&m, ti)?);
            }
            emit(None, &s)
        }
        Command::Taildep { config, t, numeric } => {
            let m = load(&config)?;
            let mut s = String::from("t,lambda_l,method_l,lambda_u,method_u\n");
            for &ti in &t {
                let r = tail_dependence(&m, ti, numeric)?;
                let _ = writeln!(
                    s,
                    "{ti},{},{},{},{}",
                    r.lambda_l.value,
                    method_name(&r.lambda_l),
                    r.lambda_u.value,
                    method_name(&r.lambda_u)
                );
            }
            emit(None, &s)
        }
        Command::Aging { config } => {
            let m = load(&config)?;
            let g = m.generator();
            let profile = aging_profile(g, &AgingGrid::default())?;
            let mult = multiplicativity_check(g, 19)?;
            let report = serde_json::json!({
                "family": g.family_name(),
                "nbu_nwu": profile.nbu_nwu,
                "ifr_dfr": profile.ifr_dfr,
                "multiplicativity": mult,
            });
            emit(None, &json(&report))
        }
        Command::Sample {
            config,
            n,
            seed,
            output,
        } => {
            let m = load(&config)?;
            let b = sampler::sample_model(&m, n, seed)?;
            let mut buf = Vec::new();
            b.write_csv(&mut buf)?;
            emit(output.as_deref(), std::str::from_utf8(&buf).expect("ascii csv"))
        }
        Command::Price {
            config,
            t,
            basis,
            horizon,
            force,
        } => {
            let m = load(&config)?;
            let opts = PricingOptions {
                basis: match basis {
                    BasisArg::Deferred => Basis::Deferred { horizon },
                    BasisArg::Residual => Basis::Residual,
                },
                force,
            };
            let q = pricing::premium_table_with(&m, &t, &opts)?;
            emit(None, &pricing::table_csv(&q))
        }
        Command::Paper {
            what: PaperCommand::Table1,
        } => table1(),
    }
}

fn method_name(r: &weaklmp::dependence::TailReport) -> String {
    serde_json::to_value(r.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{:?}", r.method))
}

fn validate(config: &Path, echo: bool) -> Outcome {
    let cfg = ModelConfig::from_path(config)?;
    let report = cfg.core_params().validate();
    print!("{}", json(&report));
    if !report.ok {
        let names: Vec<_> = report.violations.iter().map(|v| v.bound.as_str()).collect();
        return Err(Failure(format!("core parameters violate {}", names.join("; "))));
    }
    let m = cfg.to_model()?;
    if echo {
        print!("{}", ModelConfig::from_model(&m)?.to_json());
        println!();
    }
    Ok(())
}

/// Identity tolerance for `check`.
const CHECK_TOL: f64 = 1e-10;

fn check(config: &Path, grid: usize) -> Outcome {
    let m = load(config)?;
    let n = grid.max(2);
    // spans a few mean residual lifetimes of the diagonal
    let span = 3.0 / m.core().lambda;
    let nodes: Vec<f64> = (0..n).map(|k| span * k as f64 / (n - 1) as f64).collect();
    let mut worst = 0.0f64;
    let mut at = (0.0, 0.0, 0.0);
    for &t in nodes.iter().skip(1) {
        for &x in &nodes {
            for &y in &nodes {
                let r = m.generalized_weak_residual(t, x, y)?.abs();
                if r > worst {
                    worst = r;
                    at = (t, x, y);
                }
            }
        }
    }
    println!("max_residual,t,x,y\n{worst:e},{},{},{}", at.0, at.1, at.2);
    if worst > CHECK_TOL {
        return Err(Failure(format!("residual {worst} exceeds {CHECK_TOL}")));
    }
    Ok(())
}

/// Relative tolerance against the published premiums.
const TABLE_TOL: f64 = 0.01;

fn table1() -> Outcome {
    let mut out = String::new();
    let mut all = true;
    let _ = writeln!(
        out,
        "{:<6} {:>4} {:<6} {:>12} {:>12} {:>10}  result",
        "model", "t", "kind", "computed", "reference", "rel.err"
    );
    for (m, reference, positive) in [
        (pricing::reference_left()?, pricing::REFERENCE_LEFT, true),
        (pricing::reference_right()?, pricing::REFERENCE_RIGHT, false),
    ] {
        let quotes = pricing::premium_table(&m, &pricing::REFERENCE_TS)?;
        for (k, q) in quotes.iter().enumerate() {
            for (kind, value, r) in [
                ("joint", q.premium_joint, reference[0][k]),
                ("indep", q.premium_independent, reference[1][k]),
            ] {
                let rel = (value - r).abs() / r;
                let ok = rel <= TABLE_TOL;
                all &= ok;
                let _ = writeln!(
                    out,
                    "{:<6} {:>4} {:<6} {:>12.4} {:>12.4} {:>10.2e}  {}",
                    m.label(),
                    q.t,
                    kind,
                    value,
                    r,
                    rel,
                    if ok { "pass" } else { "FAIL" }
                );
            }
            let ordered = (q.premium_joint > q.premium_independent) == positive;
            all &= ordered;
            let _ = writeln!(
                out,
                "{:<6} {:>4} order  joint {} indep{:>38}",
                m.label(),
                q.t,
                if positive { ">" } else { "<" },
                if ordered { "pass" } else { "FAIL" }
            );
        }
    }
    emit(None, &out)?;
    if all {
        Ok(())
    } else {
        Err(Failure("premium table does not match the reference within 1%".into()))
    }
}
