//! `metarec`: run the experiments, inspect error tables, dump the feature
//! schema.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use metarec::cache::CachedFit;
use metarec::dataset::load_movielens;
use metarec::eval::{run_experiment, write_outputs, FreshFit, PoolProvider};
use metarec::features::build_schema;
use metarec::meta::argmin_abs;
use metarec::{DatasetName, ErrorTable};

use config::{CliConfig, RunArgs};

#[derive(Debug, Parser)]
#[command(name = "metarec", version, about = "Per-instance algorithm selection for rating prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write report.json plus figure CSVs.
    Run(RunArgs),
    /// Print rows of an exported error table with the best algorithm marked.
    Inspect {
        /// Path to an error_table.csv.
        table: PathBuf,
        /// Row selection such as `0-9`, `4` or `1,5,20-25` (default: first 10).
        #[arg(long)]
        rows: Option<String>,
    },
    /// Print the feature columns for a dataset as JSON.
    Schema {
        #[arg(long, default_value = "ml100k")]
        dataset: String,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<metarec::Error> for Failure {
    fn from(e: metarec::Error) -> Self {
        let code = if e.is_usage() {
            1
        } else if e.is_numeric() {
            3
        } else {
            2
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => CliConfig::resolve(args).and_then(|cfg| cmd_run(&cfg)),
        Command::Inspect { table, rows } => cmd_inspect(&table, rows.as_deref()),
        Command::Schema { dataset, data_dir } => cmd_schema(&dataset, data_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("metarec: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_run(cfg: &CliConfig) -> Result<(), Failure> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let ds = load_movielens(cfg.dataset, &cfg.data_dir)?;
    log::info!("loaded {} ratings from {}", ds.len(), cfg.data_dir.display());
    let cached;
    let provider: &dyn PoolProvider = match &cfg.cache_dir {
        Some(dir) => {
            cached = CachedFit::new(dir);
            &cached
        }
        None => &FreshFit,
    };
    let out = run_experiment(&ds, &cfg.experiment_config(), provider)?;
    write_outputs(&out, &cfg.out)?;

    let r = &out.report;
    println!("{} {} seed {}: {} evaluation ratings", r.dataset, r.experiment, r.seed, r.counts.evaluation);
    for a in &r.algorithm_rmse {
        println!("  {:<16} rmse {:.4}  best on {:>5.2}%", a.algorithm.as_str(), a.rmse, r.pct_best(a.algorithm).unwrap_or(0.0));
    }
    println!("  {:<16} rmse {:.4}", "oracle", r.oracle_rmse);
    if let Some(m) = &r.meta {
        println!("  meta-learner     rmse {:.4}", m.meta_rmse);
        println!("  single best      rmse {:.4}", m.single_best_rmse);
        println!("  ensemble         rmse {:.4}", m.ensemble_rmse);
        println!("  rank accuracy    best {:.4}  worst {:.4}", m.best_acc, m.worst_acc);
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn parse_rows(selector: Option<&str>, len: usize) -> Result<Vec<usize>, Failure> {
    let Some(sel) = selector.map(str::trim).filter(|s| !s.is_empty()) else {
        return Ok((0..len.min(10)).collect());
    };
    let bad = || Failure::usage(format!("bad row selector {sel:?}"));
    let mut rows = Vec::new();
    for part in sel.split(',') {
        let (a, b): (usize, usize) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => {
                let k = part.trim().parse().map_err(|_| bad())?;
                (k, k)
            }
        };
        if a > b {
            return Err(bad());
        }
        rows.extend((a..=b).filter(|&k| k < len));
    }
    Ok(rows)
}

fn render_rows(table: &ErrorTable, rows: &[usize]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>6} {:>6} {:>6} {:>5}", "row", "user", "item", "true");
    for a in &table.algorithms {
        let _ = write!(s, " {:>15}", a.as_str());
    }
    let _ = writeln!(s, "  best");
    for &k in rows {
        let r = &table.rows[k];
        let best = argmin_abs(&r.errors);
        let _ = write!(s, "{k:>6} {:>6} {:>6} {:>5}", r.user, r.item, r.truth);
        for (j, e) in r.errors.iter().enumerate() {
            let cell = format!("{e:.2}{}", if j == best { "*" } else { " " });
            let _ = write!(s, " {cell:>15}");
        }
        let _ = writeln!(s, "  {}", table.algorithms[best]);
    }
    s
}

fn cmd_inspect(path: &Path, selector: Option<&str>) -> Result<(), Failure> {
    let file = File::open(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })?;
    let table = ErrorTable::read_csv(BufReader::new(file)).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })?;
    let rows = parse_rows(selector, table.len())?;
    print!("{}", render_rows(&table, &rows));
    Ok(())
}

fn cmd_schema(dataset: &str, data_dir: Option<PathBuf>) -> Result<(), Failure> {
    let name: DatasetName = dataset.parse()?;
    let dir = data_dir.unwrap_or_else(|| {
        Path::new("data").join(match name {
            DatasetName::Ml100k => "ml-100k",
            DatasetName::Ml1m => "ml-1m",
        })
    });
    let ds = load_movielens(name, &dir)?;
    let schema = build_schema(&ds);
    println!(
        "{}",
        serde_json::to_string_pretty(&schema.columns).map_err(|e| Failure::from(metarec::Error::from(e)))?
    );
    Ok(())
}
