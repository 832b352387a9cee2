use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wete::commands;
use wete::fmt::g6;
use wete::{CliError, Result, RunConfig};

/// Embedding-space topic model trained with a conditional-transport
/// objective.
#[derive(Parser)]
#[command(name = "wete", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable), e.g. `--set epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Same as `--set checkpoint=PATH`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Same as `--set output_dir=PATH`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut overrides = self.set.clone();
        if let Some(p) = &self.checkpoint {
            overrides.push(format!("checkpoint={}", p.display()));
        }
        if let Some(p) = &self.output_dir {
            overrides.push(format!("output_dir={}", p.display()));
        }
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint.
    Train(ConfigArgs),
    /// Compute topic and clustering metrics for a checkpoint.
    Eval(ConfigArgs),
    /// Print the top words of every topic.
    Topics {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Words per topic.
        #[arg(long, short = 'n', default_value_t = 10)]
        words: usize,
    },
    /// Write per-document topic proportions as CSV.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// One document per line.
        #[arg(long)]
        corpus: PathBuf,
        /// Output file (standard output when omitted).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// List the words closest to a query word.
    Nearest {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(short, default_value_t = 8)]
        k: usize,
    },
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let summary = commands::train(&cfg, &mut io::stderr())?;
            if let Some(last) = summary.epochs.last() {
                writeln!(out, "trained {} epochs ({} steps), final loss {}", last.epoch, summary.steps, g6(last.mean_loss))
                    .map_err(stdout_err)?;
            }
        }
        Command::Eval(args) => {
            let cfg = args.resolve()?;
            eprint!("{}", cfg.echo());
            let report = commands::eval(&cfg)?;
            for (k, v) in report.entries() {
                writeln!(out, "{k}={}", g6(v)).map_err(stdout_err)?;
            }
        }
        Command::Topics { checkpoint, words } => {
            for line in commands::topics(&checkpoint, words)? {
                writeln!(out, "{line}").map_err(stdout_err)?;
            }
        }
        Command::Infer { checkpoint, corpus, output } => {
            let theta = commands::infer(&checkpoint, &corpus)?;
            match output {
                Some(p) => {
                    let f = File::create(&p).map_err(|e| CliError::io(&p, e))?;
                    wete::io::write_theta_csv(BufWriter::new(f), &theta).map_err(|e| CliError::io(&p, e))?;
                }
                None => wete::io::write_theta_csv(&mut out, &theta).map_err(stdout_err)?,
            }
        }
        Command::Nearest { checkpoint, word, k } => {
            for (w, s) in commands::nearest(&checkpoint, &word, k)? {
                writeln!(out, "{w} {}", g6(s)).map_err(stdout_err)?;
            }
        }
    }
    out.flush().map_err(stdout_err)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
