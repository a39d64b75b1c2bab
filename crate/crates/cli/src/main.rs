use clap::{Parser, Subcommand};
use passage_core::experiment::{self, Overrides, ResultBundle, SweepParam};
use passage_core::{Error, GammaSign};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const OUT_ENV: &str = "PASSAGE_OUT_DIR";

/// Heisenberg-passage control of non-Hermitian bosonic modes: run presets, verify targets, sweep.
#[derive(Parser)]
#[command(name = "passage", version)]
struct Cli {
    /// Output directory [default: $PASSAGE_OUT_DIR or ./passage-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiply integrator tolerances
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    /// literal, norm-restoring or reversed
    #[arg(long, global = true)]
    gamma_sign: Option<GammaSign>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a config file
    Run {
        config: String,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Check a preset (or `all`) against its targets
    Verify { target: String },
    /// Run a preset or config for several values of one parameter
    Sweep {
        /// lambda, gamma_1, cutoff or tol
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, default_value = "fig5")]
        preset: String,
    },
    /// List the shipped presets
    Presets,
}

enum Outcome {
    Ok,
    Failed,
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("passage-out"))
}

fn print_checks(b: &ResultBundle) {
    for c in &b.checkpoints {
        let mark = if c.pass { "PASS" } else { "FAIL" };
        println!("{mark}  {:<16} {:<36} target {}  measured {}", b.label, c.name, c.target, c.measured);
    }
}

fn execute(cli: &Cli) -> Result<Outcome, Error> {
    let base = Overrides { gamma_sign: cli.gamma_sign, tol_scale: cli.tol_scale, ..Default::default() };
    let out = out_dir(cli);
    match &cli.command {
        Command::Presets => {
            for name in experiment::preset_names() {
                let cfg = experiment::preset(name)?;
                println!("{name:<16} {}", cfg.description);
            }
            Ok(Outcome::Ok)
        }
        Command::Run { config, lambda } => {
            let cfg = Overrides { lambda: *lambda, ..base }.apply(experiment::load_config(config)?)?;
            let bundle = experiment::run(&cfg)?;
            let dir = out.join(&bundle.label);
            bundle.write(&dir)?;
            print_checks(&bundle);
            println!("wrote {}", dir.display());
            Ok(if bundle.passed() { Outcome::Ok } else { Outcome::Failed })
        }
        Command::Verify { target } => {
            let started = std::time::Instant::now();
            let bundles = experiment::verify(target, &base)?;
            let mut failed = 0;
            for b in &bundles {
                b.write(&out.join(&b.label))?;
                print_checks(b);
                failed += b.failures().len();
            }
            let total: usize = bundles.iter().map(|b| b.checkpoints.len()).sum();
            println!("{} of {total} checks passed in {:.1}s", total - failed, started.elapsed().as_secs_f64());
            Ok(if failed == 0 { Outcome::Ok } else { Outcome::Failed })
        }
        Command::Sweep { param, values, preset } => {
            let p: SweepParam = param.parse()?;
            if values.is_empty() {
                return Err(Error::Config("--values: need at least one value".into()));
            }
            let cfg = experiment::load_config(preset)?;
            let res = experiment::sweep(&cfg, p, values, &base)?;
            let dir = out.join(format!("sweep-{}", p.name()));
            for (v, b) in values.iter().zip(&res.bundles) {
                b.write(&dir.join(format!("{}-{v}", p.name())))?;
            }
            write_file(&dir.join("sweep.csv"), &res.csv())?;
            print!("{}", res.csv());
            println!("wrote {}", dir.display());
            Ok(Outcome::Ok)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
