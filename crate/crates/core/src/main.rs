use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pcdrift::config::{validate_file, RunConfig};
use pcdrift::pipeline::run;
use pcdrift::Error;

#[derive(Parser)]
#[command(name = "pcdrift", version, about = "Rolling-window PCA of multivariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline described by a config file.
    Run {
        config: PathBuf,
        /// Overrides as `--key value` or `--key=value`, using config key names.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
        overrides: Vec<String>,
    },
    /// Check a config file without reading any data.
    Validate { config: PathBuf },
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(Error::Config(format!("expected --key, found {arg:?}")));
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let value = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("missing value for --{key}")))?;
                out.push((key.to_string(), value.clone()));
            }
        }
    }
    Ok(out)
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = parse_overrides(&overrides).and_then(|ov| RunConfig::load(&config, &ov));
            let cfg = match cfg {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match run(&cfg) {
                Ok(s) => {
                    println!(
                        "window {} | windows {} | variables {} | components {} | output {}",
                        s.window,
                        s.windows,
                        s.n_vars,
                        s.components,
                        s.output_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config } => match validate_file(&config) {
            Ok(diags) if diags.is_empty() => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Ok(diags) => {
                for d in &diags {
                    println!("{d}");
                }
                ExitCode::from(1)
            }
            Err(e) => fail(&e),
        },
    }
}
