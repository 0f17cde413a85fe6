use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levy_coupling_cli::{
    certify, example, lyapunov, simulate, wp, CliError, ExperimentConfig, Status, PATHS_FILE,
};

/// Lyapunov certificates and coupling simulations for stable-driven SDEs.
#[derive(Parser)]
#[command(name = "levy-coupling", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.paths {
            cfg.paths = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build and write the contraction certificate.
    Certify(Overrides),
    /// Radial sweep of the Lyapunov ratio.
    Lyapunov(Overrides),
    /// Simulate a coupled ensemble and its ψ-decay.
    Simulate(Overrides),
    /// Wasserstein estimates against the certified bound.
    Wp {
        #[command(flatten)]
        overrides: Overrides,
        /// Ensemble CSV; defaults to `<out>/paths.csv`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Certificate record; rebuilt from the config when omitted.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Potential example end to end.
    Example(Overrides),
}

fn run(command: Command) -> Result<Status, CliError> {
    match command {
        Command::Certify(o) => {
            let out = certify(&o.load()?)?;
            print!("{}", out.cert);
            eprintln!("wrote {}", out.record.display());
            Ok(Status::Success)
        }
        Command::Lyapunov(o) => {
            let out = lyapunov(&o.load()?)?;
            println!("lambda_small = {:e}", out.sweep.lambda_small);
            println!("lambda_large = {:e}", out.sweep.lambda_large);
            eprintln!("wrote {}", out.csv.display());
            Ok(Status::Success)
        }
        Command::Simulate(o) => {
            let cfg = o.load()?;
            let out = simulate(&cfg)?;
            println!("lambda_cert = {:e}", out.cert.lambda);
            if let Some(fit) = out.fit {
                println!("lambda_hat = {:e} +- {:e}", fit.lambda_hat, fit.std_err);
            }
            println!("decay_flags = {}", out.flags);
            Ok(if out.flags > 0 {
                Status::BoundFlag
            } else {
                Status::Success
            })
        }
        Command::Wp {
            overrides,
            input,
            certificate,
        } => {
            let cfg = overrides.load()?;
            let input = input.unwrap_or_else(|| cfg.out.join(PATHS_FILE));
            let out = wp(&cfg, &input, certificate.as_deref())?;
            println!("exact_paths = {}", out.exact_paths);
            println!("wp_flags = {}", out.flags);
            Ok(if out.flags > 0 {
                Status::BoundFlag
            } else {
                Status::Success
            })
        }
        Command::Example(o) => {
            let base = o.load()?;
            let summary = example(&base, base.beta, base.alpha, base.p)?;
            print!("{}", summary.to_record());
            Ok(if summary.decay_flags + summary.wp_flags > 0 {
                Status::BoundFlag
            } else {
                Status::Success
            })
        }
    }
}

fn main() -> ExitCode {
    // clap reports usage errors with status 2, which is reserved for gate failures here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                Status::Usage as u8
            } else {
                0
            });
        }
    };
    match run(cli.command) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status as u8)
        }
    }
}
