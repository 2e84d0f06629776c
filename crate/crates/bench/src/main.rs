use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sapd_bench::commands::{check_params, solve, summary_line, BenchError};
use sapd_bench::config::{Algo, RunConfig};

#[derive(Parser)]
#[command(name = "sapd", version, about = "Run and certify SAPD+ saddle-point solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key = value` lines, `#` comments)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV (for `bench`, a directory receiving one CSV per config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    algo: Option<Algo>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    reps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the schedule and its certificate; exit code 0 iff feasible
    CheckParams,
    /// Run the configured solver and write the trace
    Solve,
    /// Solve each listed configuration and print one summary line per run
    Bench { configs: Vec<PathBuf> },
}

impl Cli {
    fn load(&self, path: Option<&PathBuf>) -> Result<RunConfig, BenchError> {
        let mut cfg = match path {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(a) = self.algo {
            cfg.algo = a;
        }
        if let Some(e) = self.eps {
            cfg.eps = e;
        }
        if let Some(r) = self.reps {
            cfg.reps = r;
        }
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<u8, BenchError> {
    match &cli.command {
        Command::CheckParams => {
            let cfg = cli.load(cli.config.as_ref())?;
            let report = check_params(&cfg)?;
            for line in &report.lines {
                println!("{line}");
            }
            Ok(if report.feasible { 0 } else { 1 })
        }
        Command::Solve => {
            let mut cfg = cli.load(cli.config.as_ref())?;
            if let Some(o) = &cli.out {
                cfg.out = o.clone();
            }
            let s = solve(&cfg)?;
            println!("{}", summary_line("solve", &cfg, &s));
            Ok(if s.failures() == 0 { 0 } else { 1 })
        }
        Command::Bench { configs } => {
            let mut failed = false;
            for path in configs {
                let mut cfg = cli.load(Some(path))?;
                let name = path.file_stem().map_or_else(|| "config".into(), |s| s.to_string_lossy().into_owned());
                if let Some(dir) = &cli.out {
                    std::fs::create_dir_all(dir).map_err(|source| BenchError::Io { path: dir.clone(), source })?;
                    cfg.out = dir.join(format!("{name}.csv"));
                }
                let s = solve(&cfg)?;
                failed |= s.failures() > 0;
                println!("{}", summary_line(&name, &cfg, &s));
            }
            Ok(if failed { 1 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
