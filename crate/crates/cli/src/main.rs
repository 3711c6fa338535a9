use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use molmae::commands;
use molmae::config::CONFIG_KEY_HELP;

#[derive(Parser)]
#[command(
    name = "molmae",
    version,
    about = "Bi-branch masked graph autoencoder for molecules: pre-train, fine-tune, evaluate",
    after_long_help = CONFIG_KEY_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train the autoencoder on a SMILES corpus.
    Pretrain {
        /// Flat key-value configuration file (see --help for keys).
        #[arg(long)]
        config: PathBuf,
        /// SMILES corpus: one molecule per line, `#` comments skipped.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for trace and checkpoints.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Force fully deterministic execution (single-threaded ingest).
        #[arg(long)]
        deterministic: bool,
        /// Make unparseable corpus lines fatal instead of skipping them.
        #[arg(long)]
        strict: bool,
    },
    /// Fine-tune a pre-trained encoder on a label CSV.
    Finetune {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint prefix (path without the .manifest/.blob extension).
        #[arg(long)]
        pretrained: PathBuf,
        /// Label CSV: header `smiles,task1[,task2,...]`, cells 0/1/empty.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        strict: bool,
    },
    /// Evaluate a fine-tuned checkpoint on a label CSV; prints per-task
    /// and mean AUC.
    Eval {
        /// Checkpoint prefix (path without the .manifest/.blob extension).
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Run the 64-bit gradient verification suite; nonzero exit on any
    /// failure.
    Gradcheck,
    /// Print the directed dual (line) graph of one molecule.
    DumpDual {
        #[arg(long)]
        smiles: String,
    },
    /// Pre-train at several mask ratios and emit a ratio/accuracy/AUC
    /// table.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated mask ratios, e.g. 0.1,0.6,0.9.
        #[arg(long)]
        ratios: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        strict: bool,
    },
    /// Generate a synthetic SMILES corpus.
    GenCorpus {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the parameter count and per-component breakdown.
    Params {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pretrain {
            config,
            data,
            out,
            seed,
            deterministic,
            strict,
        } => commands::cmd_pretrain(&config, &data, &out, seed, deterministic, strict),
        Command::Finetune {
            config,
            pretrained,
            data,
            out,
            seed,
            deterministic,
            strict,
        } => commands::cmd_finetune(&config, &pretrained, &data, &out, seed, deterministic, strict),
        Command::Eval {
            checkpoint,
            data,
            strict,
        } => commands::cmd_eval(&checkpoint, &data, strict),
        Command::Gradcheck => commands::cmd_gradcheck(),
        Command::DumpDual { smiles } => commands::cmd_dump_dual(&smiles),
        Command::Ablate {
            config,
            data,
            out,
            ratios,
            seed,
            strict,
        } => commands::cmd_ablate(&config, &data, &out, &ratios, seed, strict),
        Command::GenCorpus { count, seed, out } => commands::cmd_gen_corpus(count, seed, &out),
        Command::Params { config } => commands::cmd_params(config.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
