use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spectra_core::bench::THREADS_ENV;
use spectra_select::{run, CliError, Command, Method, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "spectra-select", version, about = "Hyperspectral channel selection for anomaly detection")]
struct Args {
    /// synth, rank, train, eval, bench, plot or pipeline
    command: String,
    /// JSON config with dotted keys
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    class: Option<String>,
    /// origin, fi, pi or pca
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| CliError::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))
}

fn real_main() -> Result<(), CliError> {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ").to_string();
            return Err(CliError::Usage(first));
        }
    };
    let cmd = Command::parse(&args.command)?;
    let method = args.method.as_deref().map(str::parse::<Method>).transpose()?;
    configure_threads()?;
    let overrides = Overrides { class: args.class, method, top_n: args.top_n, seed: args.seed, out: args.out };
    let cfg = RunConfig::load(&args.config, &overrides)?;
    let methods = match method {
        Some(m) => vec![m],
        None => Method::ALL.to_vec(),
    };
    run(cmd, &cfg, &methods, &mut std::io::stdout().lock())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
