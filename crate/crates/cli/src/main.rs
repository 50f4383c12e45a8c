//! `textlstm` command-line tool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use textlstm::chord::{corpus_stats, decode_progression, expand_to_text, read_lab, transpose_score};
use textlstm::drum::{decode_words, encode_words, quantize, read_smf, render_rows, write_smf};
use textlstm::nn::{builtin_grad_check, Domain, LstmModel, ModelHyper};
use textlstm::sampler::{generate_ids, AlphaRegion, AlphaSchedule};
use textlstm::tokenizer::{build_vocab, normalize_whitespace, Mode};
use textlstm::trainer::{load_checkpoint, save_checkpoint, TrainConfig, Trainer};

/// Largest relative error `gradcheck` accepts.
const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "textlstm", version, about = "Text-based LSTM chord and drum composition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert lab chord files to corpus text, one score per line
    EncodeChords(EncodeArgs),
    /// Convert MIDI drum files to corpus text, one file per line
    EncodeDrums(EncodeArgs),
    /// Train a model on a corpus and write a checkpoint
    Train(TrainArgs),
    /// Sample tokens from a checkpoint
    Generate(GenerateArgs),
    /// Print chord corpus statistics
    Stats(StatsArgs),
    /// Check analytic gradients of a tiny model against finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// Input files
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file (default: standard output)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Corpus text file
    corpus: PathBuf,
    /// Checkpoint path to write
    #[arg(long)]
    out: PathBuf,
    /// TOML file with defaults for any of the flags below
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tokenization mode [default: word]
    #[arg(long)]
    mode: Option<Mode>,
    /// Units per LSTM layer [default: 512]
    #[arg(long)]
    hidden: Option<usize>,
    /// Number of LSTM layers [default: 2]
    #[arg(long)]
    layers: Option<usize>,
    /// Dropout rate after each LSTM layer [default: 0.2]
    #[arg(long)]
    dropout: Option<f64>,
    /// Tokens per training window [default: 64]
    #[arg(long)]
    seq_len: Option<usize>,
    /// Windows per batch [default: 32]
    #[arg(long)]
    batch: Option<usize>,
    /// Passes over the corpus [default: 25]
    #[arg(long)]
    epochs: Option<usize>,
    /// Seed for initialization and dropout [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// ADAM learning rate [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// Also write `<out>.epoch<N>` every N epochs
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

/// Keys accepted in a `--config` file; each mirrors the flag of the same name.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    mode: Option<Mode>,
    hidden: Option<usize>,
    layers: Option<usize>,
    dropout: Option<f64>,
    seq_len: Option<usize>,
    batch: Option<usize>,
    epochs: Option<usize>,
    seed: Option<u64>,
    lr: Option<f64>,
    checkpoint_every: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Tokens,
    Leadsheet,
    Midi,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Checkpoint file
    checkpoint: PathBuf,
    /// Seed text fed before sampling [default: _START_ for chord models, _BAR_ for drum models]
    #[arg(long)]
    seed_text: Option<String>,
    /// Number of tokens to generate
    #[arg(long, default_value_t = 256)]
    length: usize,
    /// Diversity for tokens outside any region; below 1 is conservative, above 1 adventurous
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Diversity override for generated tokens start..end, as start:end:alpha (repeatable)
    #[arg(long = "alpha-region", value_parser = parse_region)]
    alpha_regions: Vec<AlphaRegion>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Tokens)]
    format: Format,
    /// Tempo in BPM for MIDI output
    #[arg(long, default_value_t = 120.0)]
    tempo: f64,
    /// Sampling seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: standard output; required for midi)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Chord corpus text file
    corpus: PathBuf,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Seed for the random test model
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_region(s: &str) -> Result<AlphaRegion, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, end, alpha] = parts[..] else {
        return Err(format!("expected start:end:alpha, got {s:?}"));
    };
    Ok(AlphaRegion {
        start: start.parse().map_err(|_| format!("invalid start {start:?}"))?,
        end: end.parse().map_err(|_| format!("invalid end {end:?}"))?,
        alpha: alpha.parse().map_err(|_| format!("invalid alpha {alpha:?}"))?,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn with_newline(mut s: String) -> String {
    if !s.is_empty() && !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn encode_chords(args: &EncodeArgs) -> Result<()> {
    let mut lines = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let score = read_lab(&read_text(path)?).with_context(|| path.display().to_string())?;
        lines.push(expand_to_text(&transpose_score(&score)).with_context(|| path.display().to_string())?);
    }
    emit(args.out.as_deref(), &with_newline(lines.join("\n")))
}

fn encode_drums(args: &EncodeArgs) -> Result<()> {
    let mut lines = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let events = read_smf(&bytes).with_context(|| path.display().to_string())?;
        let grid = quantize(&events);
        if grid.bars.is_empty() {
            log::warn!("{}: no drum hits, skipped", path.display());
            continue;
        }
        lines.push(encode_words(&grid));
    }
    emit(args.out.as_deref(), &with_newline(lines.join("\n")))
}

fn train(args: &TrainArgs) -> Result<()> {
    let file: TrainFile = match &args.config {
        Some(path) => toml::from_str(&read_text(path)?)
            .with_context(|| format!("invalid config {}", path.display()))?,
        None => TrainFile::default(),
    };
    let defaults = ModelHyper::default();
    let config_defaults = TrainConfig::default();
    let mode = args.mode.or(file.mode).unwrap_or(Mode::Word);
    let mut hyper = ModelHyper {
        hidden_size: args.hidden.or(file.hidden).unwrap_or(defaults.hidden_size),
        num_layers: args.layers.or(file.layers).unwrap_or(defaults.num_layers),
        dropout: args.dropout.or(file.dropout).unwrap_or(defaults.dropout),
        ..defaults
    };
    hyper.adam.lr = args.lr.or(file.lr).unwrap_or(defaults.adam.lr);
    let config = TrainConfig {
        seq_len: args.seq_len.or(file.seq_len).unwrap_or(config_defaults.seq_len),
        batch_size: args.batch.or(file.batch).unwrap_or(config_defaults.batch_size),
        epochs: args.epochs.or(file.epochs).unwrap_or(config_defaults.epochs),
        seed: args.seed.or(file.seed).unwrap_or(config_defaults.seed),
        checkpoint_every: args.checkpoint_every.or(file.checkpoint_every),
    };

    let corpus = normalize_whitespace(&read_text(&args.corpus)?);
    let vocab = build_vocab(&corpus, mode).with_context(|| args.corpus.display().to_string())?;
    let ids = vocab.encode_ids(&corpus)?;
    log::info!(
        "{} tokens, vocabulary {}, {} mode, hidden {} x {}",
        ids.len(),
        vocab.len(),
        mode,
        hyper.hidden_size,
        hyper.num_layers
    );
    let every = config.checkpoint_every;
    let mut trainer = Trainer::<f32>::new(vocab, hyper, config)?;
    trainer.fit(&ids, |report, model| {
        eprintln!("epoch {:>4}  loss {:.4}", report.epoch, report.mean_loss);
        if every.is_some_and(|n| n > 0 && report.epoch % n == 0) {
            let mut name = args.out.clone().into_os_string();
            name.push(format!(".epoch{}", report.epoch));
            save_checkpoint(model, Path::new(&name))?;
        }
        Ok(())
    })?;
    save_checkpoint(trainer.model(), &args.out)?;
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let model: LstmModel<f32> = load_checkpoint(&args.checkpoint)?;
    let vocab = model.vocab();
    let seed_text = args.seed_text.clone().unwrap_or_else(|| {
        match model.domain() {
            Domain::Chord => "_START_",
            Domain::Drum => "_BAR_",
        }
        .to_string()
    });
    let seed_tokens = vocab.split(&seed_text);
    let seed: Vec<usize> = seed_tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vocab
                .index_of(t)
                .ok_or_else(|| anyhow!("seed token {t:?} at position {i} is not in the model vocabulary"))
        })
        .collect::<Result<_>>()?;
    let schedule = AlphaSchedule::new(args.alpha, args.alpha_regions.clone())?;
    let ids = generate_ids(&model, &seed, args.length, &schedule, args.seed)?;
    let tokens: Vec<&str> = ids.iter().map(|&i| vocab.token(i).expect("sampled in vocab")).collect();
    let text = vocab.decode_ids(&ids)?;
    // char models emit characters; regroup them into words for rendering
    let words: Vec<&str> = match vocab.mode() {
        Mode::Word => tokens,
        Mode::Char => text.split_whitespace().collect(),
    };

    match args.format {
        Format::Tokens => emit(args.out.as_deref(), &with_newline(text)),
        Format::Leadsheet => {
            let sheet = match model.domain() {
                Domain::Chord => decode_progression(&words),
                Domain::Drum => render_rows(&words),
            };
            emit(args.out.as_deref(), &with_newline(sheet))
        }
        Format::Midi => {
            let out = args.out.as_deref().ok_or_else(|| anyhow!("--format midi requires --out"))?;
            if model.domain() != Domain::Drum {
                bail!("--format midi requires a drum model");
            }
            let decoded = decode_words(&words, args.tempo)?;
            if decoded.skipped > 0 {
                log::warn!("{} malformed drum tokens skipped", decoded.skipped);
            }
            let bytes = write_smf(&decoded.events, args.tempo)?;
            fs::write(out, bytes).with_context(|| format!("cannot write {}", out.display()))
        }
    }
}

fn stats(args: &StatsArgs) -> Result<()> {
    let text = read_text(&args.corpus)?;
    let stats = corpus_stats(&text).with_context(|| args.corpus.display().to_string())?;
    emit(None, &stats.report())
}

fn gradcheck(args: &GradcheckArgs) -> Result<bool> {
    let report = builtin_grad_check(args.seed)?;
    println!(
        "max relative error {:.3e} over {} coordinates (worst: {})",
        report.max_rel_error, report.coords_checked, report.worst_tensor
    );
    Ok(report.max_rel_error <= GRAD_TOLERANCE)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::EncodeChords(a) => encode_chords(a)?,
        Command::EncodeDrums(a) => encode_drums(a)?,
        Command::Train(a) => train(a)?,
        Command::Generate(a) => generate(a)?,
        Command::Stats(a) => stats(a)?,
        Command::Gradcheck(a) => return gradcheck(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
