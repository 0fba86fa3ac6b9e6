//! Command-line driver: config loading, sweeps and CSV output.

pub mod config;
pub mod grid;
pub mod sweep;
pub mod table;

use crate::error::{Error, Result};
use clap::Parser;
use config::{parse_n_list, Mode, RunConfig};
use std::path::PathBuf;
use sweep::{run_sweep, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ROW_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MAGNETOFISHER_THREADS";

#[derive(Parser, Debug)]
#[command(name = "magnetofisher", version, about = "Photon-counting statistics and Fisher information of a Faraday magnetometer")]
pub struct Args {
    /// sweep-bz | sweep-n | sweep-pump | sweep-kappa | benchmark-finite | crb-witness
    pub mode: String,
    /// key = value file; unspecified keys take the reference values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// lin:a:b:n, log:a:b:n or list:v1,v2,...
    #[arg(long)]
    pub grid: Option<String>,
    /// semiclassical-2lvl | semiclassical-4lvl | collective-mf | collective-finite
    #[arg(long)]
    pub model: Option<String>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Atom numbers for benchmark-finite, comma separated.
    #[arg(long = "n-list")]
    pub n_list: Option<String>,
    /// h_z | kappa_z | n_atoms, for benchmark-finite and crb-witness.
    #[arg(long = "sweep-var")]
    pub sweep_var: Option<String>,
    /// Comma-separated subset of value columns.
    #[arg(long)]
    pub columns: Option<String>,
}

/// Loads the config and applies command-line overrides.
pub fn resolve(args: &Args) -> Result<(Mode, RunConfig, SweepSpec)> {
    let mode: Mode = args.mode.parse()?;
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(g) = &args.grid {
        cfg.grid = Some(g.clone());
    }
    if let Some(m) = &args.model {
        cfg.model = Some(m.parse()?);
    }
    if let Some(n) = &args.n_list {
        cfg.n_list = Some(parse_n_list(n)?);
    }
    if let Some(v) = &args.sweep_var {
        cfg.sweep_var = Some(v.parse()?);
    }
    let spec = SweepSpec::resolve(mode, &cfg)?;
    Ok((mode, cfg, spec))
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Produces the CSV text and the number of failed rows.
pub fn render(args: &Args) -> Result<(String, usize)> {
    let (mode, cfg, spec) = resolve(args)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut table = pool.install(|| run_sweep(&cfg, &spec));
    if let Some(cols) = &args.columns {
        let names: Vec<String> = cols.split(',').map(|s| s.trim().to_string()).collect();
        table = table.select(&names)?;
    }
    Ok((table.to_csv(mode.name()), table.failures()))
}

pub fn run(args: &Args) -> i32 {
    let (csv, failures) = match render(args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("magnetofisher: {e}");
            return EXIT_CONFIG;
        }
    };
    let written = match &args.out {
        Some(path) => std::fs::write(path, csv.as_bytes()).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(csv.as_bytes()).map_err(|e| e.to_string())
        }
    };
    if let Err(e) = written {
        eprintln!("magnetofisher: {e}");
        return EXIT_CONFIG;
    }
    if failures > 0 {
        eprintln!("magnetofisher: {failures} row(s) failed");
        return EXIT_ROW_FAILURE;
    }
    EXIT_OK
}
