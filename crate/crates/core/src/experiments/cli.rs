use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{LdgError, Result};
use crate::orlicz::default_alpha;

use super::config::{read_config_file, RunConfig};
use super::errors::ErrorQuantities;
use super::fields::export_fields;
use super::props::property_report;
use super::study::{run_convergence_study, solve_on, EocRow};

#[derive(Debug, Parser)]
#[command(
    name = "ldg",
    version,
    about = "LDG solver for nonlinear elliptic systems with (p, delta)-structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve on the finest level and write report.json.
    Solve(RunArgs),
    /// Convergence study over all levels; writes eoc.csv and report.json.
    Eoc(RunArgs),
    /// Sample the structural invariants and write props.json.
    Props(PropsArgs),
    /// Solve on the finest level and export per-point field CSVs.
    ExportFields(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Number of mesh levels (0..levels); `solve` uses the last one.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    /// lagged | full
    #[arg(long)]
    shift_mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// zero | continuation
    #[arg(long)]
    initial_guess: Option<String>,
}

#[derive(Debug, Args)]
struct PropsArgs {
    /// Exponents to check (all tabulated ones if omitted).
    #[arg(long)]
    p: Vec<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| LdgError::Usage(format!("invalid value '{v}' for {key}: {e}")))
}

impl RunArgs {
    /// CLI values on top of the config file.
    fn merged(&self) -> Result<BTreeMap<String, String>> {
        let mut map = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("p", self.p.map(|v| v.to_string()));
        set("delta", self.delta.map(|v| v.to_string()));
        set("alpha", self.alpha.map(|v| v.to_string()));
        set("k", self.k.map(|v| v.to_string()));
        set("levels", self.levels.map(|v| v.to_string()));
        set("atol", self.atol.map(|v| v.to_string()));
        set("rtol", self.rtol.map(|v| v.to_string()));
        set("shift-mode", self.shift_mode.clone());
        set("out", self.out.as_ref().map(|v| v.display().to_string()));
        set("beta", self.beta.map(|v| v.to_string()));
        set("max-iter", self.max_iter.map(|v| v.to_string()));
        set("initial-guess", self.initial_guess.clone());
        Ok(map)
    }

    fn run_config(&self) -> Result<RunConfig> {
        let map = self.merged()?;
        let p: f64 = match map.get("p") {
            Some(v) => parse_value("p", v)?,
            None => {
                return Err(LdgError::Usage(
                    "the exponent --p is required (flag or config file)".into(),
                ))
            }
        };
        let mut cfg = RunConfig::for_p(p);
        for (key, v) in &map {
            match key.as_str() {
                "p" => {}
                "delta" => cfg.delta = parse_value(key, v)?,
                "alpha" => cfg.alpha = parse_value(key, v)?,
                "k" => cfg.k = parse_value(key, v)?,
                "levels" => cfg.levels = parse_value(key, v)?,
                "atol" => cfg.atol = parse_value(key, v)?,
                "rtol" => cfg.rtol = parse_value(key, v)?,
                "shift-mode" => cfg.shift_mode = v.parse()?,
                "out" => cfg.out = PathBuf::from(v),
                "beta" => cfg.beta = parse_value(key, v)?,
                "max-iter" => cfg.max_iter = parse_value(key, v)?,
                "initial-guess" => cfg.initial_guess = v.parse()?,
                other => {
                    return Err(LdgError::Usage(format!(
                        "unknown configuration key '{other}'"
                    )))
                }
            }
        }
        if !map.contains_key("alpha") && default_alpha(p).is_none() {
            return Err(LdgError::Usage(format!(
                "no default alpha for p = {p}; pass --alpha"
            )));
        }
        cfg.validate().map_err(|e| LdgError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    converged: bool,
    level: usize,
    h: f64,
    n_cells: usize,
    errors: ErrorQuantities,
    report: &'a crate::solver::SolveReport,
}

fn print_table(rows: &[EocRow]) {
    println!(
        "{:>5} {:>10} {:>12} {:>6} {:>12} {:>6} {:>12} {:>6} {:>12} {:>6}",
        "level", "h", "e_grad", "eoc", "e_L", "eoc", "e_A", "eoc", "e_jump", "eoc"
    );
    for r in rows {
        let rate = |f: fn(&ErrorQuantities) -> f64| {
            r.eoc
                .map(|e| format!("{:6.3}", f(&e)))
                .unwrap_or_else(|| "     -".into())
        };
        println!(
            "{:>5} {:>10.5} {:>12.5e} {} {:>12.5e} {} {:>12.5e} {} {:>12.5e} {}",
            r.level,
            r.h,
            r.errors.grad,
            rate(|e| e.grad),
            r.errors.l,
            rate(|e| e.l),
            r.errors.a,
            rate(|e| e.a),
            r.errors.jump,
            rate(|e| e.jump)
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.run_config()?;
            let space = cfg.levels()?.pop().expect("at least one level").space;
            let outcome = solve_on(&cfg, &space, None)?;
            let out = SolveOutput {
                converged: outcome.report.converged,
                level: outcome.level,
                h: outcome.h,
                n_cells: outcome.n_cells,
                errors: outcome.errors,
                report: &outcome.report,
            };
            let json = serde_json::to_string_pretty(&out)?;
            std::fs::create_dir_all(&cfg.out)?;
            std::fs::write(cfg.out.join("report.json"), &json)?;
            println!("{json}");
        }
        Command::Eoc(args) => {
            let cfg = args.run_config()?;
            let study = run_convergence_study(&cfg)?;
            print_table(&study.rows);
        }
        Command::ExportFields(args) => {
            let cfg = args.run_config()?;
            let (summary, _) = export_fields(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Props(args) => {
            let delta = args.delta.unwrap_or(1e-3);
            let report = property_report(&args.p, delta, args.pairs)?;
            let json = serde_json::to_string_pretty(&report)?;
            if let Some(out) = &args.out {
                std::fs::create_dir_all(out)?;
                std::fs::write(out.join("props.json"), &json)?;
            }
            println!("{json}");
        }
    }
    Ok(())
}

/// Entry point of the `ldg` binary; returns the process exit code
/// (0 success, 1 solver failure, 2 usage error).
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e @ (LdgError::Usage(_) | LdgError::Config(_))) => {
            eprintln!("error: {e}");
            eprintln!("usage: ldg <solve|eoc|props|export-fields> --p <P> [--delta D] [--alpha A] [--k K] [--levels N] [--atol T] [--rtol T] [--shift-mode lagged|full] [--out DIR] [--config FILE]");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
