use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xorlab::ensemble::{gen_base, gen_pinned, trial_rng};
use xorlab::harness::{run, Experiment, ExperimentConfig, OutputFormat};
use xorlab::theory::threshold_report;
use xorlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "xorlab",
    version,
    about = "Random sparse linear systems over GF(q)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (file for dump-matrix)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Print d_k, d_k*, fixed points and potential values
    Threshold {
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    RankProfile(Common),
    ThresholdScan(Common),
    WpStats(Common),
    Balance(Common),
    Peel(Common),
    Interpolate(Common),
    AuditFreeness(Common),
    /// Generate one matrix from the config and write it in text form
    DumpMatrix {
        #[command(flatten)]
        common: Common,
        /// Append pinning rows
        #[arg(long)]
        pinned: bool,
        /// Trial index of the seed stream
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn experiment(common: &Common, which: Experiment) -> Result<()> {
    let cfg = load_config(common)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("out/{}", which.name())));
    let format = match common.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let report = run(which, &cfg, &out, format)?;
    let mut stdout = std::io::stdout().lock();
    report.summary.write_csv(&mut stdout)?;
    if !report.result.is_null() {
        writeln!(stdout, "{}", serde_json::to_string(&report.result)?)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Threshold { k, d, format } => {
            let rep = threshold_report(k, d)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&rep)?),
                Format::Csv => {
                    let v = serde_json::to_value(&rep)?;
                    println!("key,value");
                    for (key, val) in v.as_object().into_iter().flatten() {
                        println!("{key},{}", val.to_string().replace(',', ";"));
                    }
                }
            }
            Ok(())
        }
        Command::RankProfile(c) => experiment(&c, Experiment::RankProfile),
        Command::ThresholdScan(c) => experiment(&c, Experiment::ThresholdScan),
        Command::WpStats(c) => experiment(&c, Experiment::WpStats),
        Command::Balance(c) => experiment(&c, Experiment::Balance),
        Command::Peel(c) => experiment(&c, Experiment::Peel),
        Command::Interpolate(c) => experiment(&c, Experiment::Interpolate),
        Command::AuditFreeness(c) => experiment(&c, Experiment::AuditFreeness),
        Command::DumpMatrix {
            common,
            pinned,
            trial,
        } => {
            let cfg = load_config(&common)?;
            let mut rng = trial_rng(cfg.master_seed(), trial);
            let a = if pinned {
                gen_pinned(&cfg.params, &mut rng)?.0
            } else {
                gen_base(&cfg.params, &mut rng)?
            };
            match &common.out {
                Some(path) => {
                    a.write_text(std::io::BufWriter::new(std::fs::File::create(path)?))?
                }
                None => a.write_text(std::io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xorlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
