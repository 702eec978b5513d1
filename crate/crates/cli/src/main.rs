//! `lhr`: train, run and evaluate the latent heads dependency parser.
//!
//! Settings are resolved as built-in defaults, then the `--config` file,
//! then command-line flags. Exit status is 0 on success, 2 for usage or
//! configuration errors and 1 for failures while running.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lhr_core::checkpoint;
use lhr_core::config::Settings;
use lhr_core::eval::evaluate_files;
use lhr_core::lss::{self, LssFormat};
use lhr_core::treebank::format_conll;
use lhr_core::{
    build_vocabularies, evaluate, parse_all, read_conll, LhrModel, ReadOptions, Trainer, Treebank,
};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "lhr", version, about = "Latent heads dependency parser")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write its checkpoint and per-epoch report.
    Train(TrainArgs),
    /// Parse a treebank with a trained model.
    Parse(ParseArgs),
    /// Score predictions against gold trees.
    Eval(EvalArgs),
    /// Write the per-token latent structure `[c; h]` of a treebank.
    ExportLss(ExportArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["conllu", "conllx"])]
    format: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    train: PathBuf,
    /// Development set used to keep the best epoch.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Where to write the checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Where to write the training report; defaults to `<model>.report.tsv`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_parser = ["word+pos", "word+char"])]
    encoder_mode: Option<String>,
    /// Leave the latent heads of punctuation unsupervised.
    #[arg(long)]
    skip_punct_heads: bool,
    #[arg(long, value_parser = ["mse", "mae"])]
    loss: Option<String>,
    #[arg(long, value_parser = ["margin", "xent"])]
    labeler_loss: Option<String>,
    #[arg(long, value_parser = ["on", "off"])]
    pos_correction: Option<String>,
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    /// Treebank to parse.
    #[arg(long)]
    test: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = ["on", "off"])]
    pos_correction: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Gold treebank.
    #[arg(long)]
    test: PathBuf,
    /// Predicted treebank, aligned with the gold one.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    predicted: Option<PathBuf>,
    /// Parse the gold treebank with this model instead of reading predictions.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Where to write the `key=value` report.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = ["on", "off"])]
    pos_correction: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_parser = ["text", "binary"], default_value = "text")]
    lss_format: String,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<lhr_core::Error> for Failure {
    fn from(e: lhr_core::Error) -> Self {
        match e {
            lhr_core::Error::Config(_) | lhr_core::Error::Usage(_) => Failure::Usage(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn settings(common: &Common, overrides: &[(&str, Option<String>)]) -> Result<Settings, Failure> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))
            .map_err(Failure::Usage)?;
        s.apply_text(&text)?;
    }
    if let Some(f) = &common.format {
        s.apply("io.format", f)?;
    }
    for (key, value) in overrides {
        if let Some(v) = value {
            s.apply(key, v)?;
        }
    }
    Ok(s)
}

fn read(path: &Path, s: &Settings) -> anyhow::Result<Treebank> {
    read_conll(path, &ReadOptions::with_format(s.format))
        .with_context(|| format!("cannot read {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<LhrModel> {
    checkpoint::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn train(a: TrainArgs) -> Outcome {
    let s = settings(
        &a.common,
        &[
            ("seed", a.seed.map(|v| v.to_string())),
            ("train.epochs", a.epochs.map(|v| v.to_string())),
            ("encoder.mode", a.encoder_mode),
            (
                "train.skip_punct_heads",
                a.skip_punct_heads.then(|| "true".to_string()),
            ),
            ("train.loss", a.loss),
            ("model.labeler_loss", a.labeler_loss),
            ("decode.pos_correction", a.pos_correction),
        ],
    )?;
    s.model.validate()?;
    let mut trainer = Trainer::new(s.train.clone())?;

    let train = read(&a.train, &s)?;
    let dev = match &a.dev {
        Some(p) => read(p, &s)?,
        None => Treebank::default(),
    };
    log::info!(
        "training on {} sentences ({} tokens), dev {} sentences",
        train.len(),
        train.num_tokens(),
        dev.len()
    );
    let mut model = LhrModel::new(s.model.clone(), build_vocabularies(&train, s.min_count))?;
    let report = trainer.train(&mut model, &train, &dev)?;

    checkpoint::save(&model, &a.model)
        .with_context(|| format!("cannot write {}", a.model.display()))?;
    let report_path = a.output.unwrap_or_else(|| {
        let mut p = a.model.into_os_string();
        p.push(".report.tsv");
        p.into()
    });
    fs::write(&report_path, report.to_tsv())
        .with_context(|| format!("cannot write {}", report_path.display()))?;
    if let Some(best) = report.best_epoch {
        log::info!("kept epoch {best}");
    }
    Ok(())
}

fn parse(a: ParseArgs) -> Outcome {
    let s = settings(&a.common, &[("decode.pos_correction", a.pos_correction)])?;
    let model = load_model(&a.model)?;
    let tb = read(&a.test, &s)?;
    let trees = parse_all(&model, &tb.sentences, s.train.decode)?;
    let text = format_conll(&tb, &trees)?;
    match &a.output {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("cannot write output")?,
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let s = settings(&a.common, &[("decode.pos_correction", a.pos_correction)])?;
    let gold = read(&a.test, &s)?;
    let result = match (&a.predicted, &a.model) {
        (Some(p), _) => evaluate_files(&gold, &read(p, &s)?)?,
        (None, Some(m)) => {
            let model = load_model(m)?;
            evaluate(&gold, &parse_all(&model, &gold.sentences, s.train.decode)?)?
        }
        (None, None) => unreachable!("clap requires one of --predicted and --model"),
    };
    println!("{result}");
    if let Some(p) = &a.output {
        fs::write(p, result.to_report())
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn export_lss(a: ExportArgs) -> Outcome {
    let s = settings(&a.common, &[])?;
    let format: LssFormat = a.lss_format.parse()?;
    let model = load_model(&a.model)?;
    let tb = read(&a.test, &s)?;
    let records = lss::export_records(&model, &tb.sentences)?;
    let file =
        File::create(&a.output).with_context(|| format!("cannot write {}", a.output.display()))?;
    let mut w = BufWriter::new(file);
    lss::write(&mut w, format, &records)?;
    w.flush().context("cannot write output")?;
    // make sure the export reads back before reporting success
    let back = lss::read(
        BufReader::new(File::open(&a.output).context("cannot reopen output")?),
        format,
    )?;
    if back.len() != records.len() {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "export of {} records reads back as {}",
            records.len(),
            back.len()
        )));
    }
    log::info!(
        "wrote {} records of width {}",
        records.len(),
        2 * model.context_dim()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => train(a),
        Command::Parse(a) => parse(a),
        Command::Eval(a) => eval(a),
        Command::ExportLss(a) => export_lss(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
