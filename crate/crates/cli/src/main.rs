use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use treeaug::augment::{augment_dataset, AugmentConfig, AugmentSummary, Operation};
use treeaug::conllu::{parse_conllu_bytes, serialize_conllu, Sentence};
use treeaug::deptree::{parse_label_list, LabelConfig};
use treeaug::tagger::{
    evaluate, load_checkpoint, save_checkpoint, train, CheckpointError, TaggerConfig, TaggerError, TaggerModel,
    UnkStrategy,
};
use treeaug_cli::correlate::{pairs_tsv, parse_pairs, pearson, CorrelationError};
use treeaug_cli::experiment::{grid, run_experiment, threads_from_env, ExperimentConfig, ExperimentError};
use treeaug_cli::stats::TreebankStats;

#[derive(Parser)]
#[command(name = "treeaug", version, about = "Crop and rotate augmentation for dependency treebanks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an augmented copy of a CoNLL-U file.
    Augment {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = OpChoice::Both)]
        op: OpChoice,
        /// Keep probability for each candidate crop or rotation.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        options: AugmentOptions,
    },
    /// Report size, label statistics and size eligibility of a treebank.
    Stats {
        input: PathBuf,
        #[command(flatten)]
        labels: LabelArgs,
    },
    /// Train a tagger and write a checkpoint plus its training history.
    Train {
        #[arg(long)]
        train: PathBuf,
        /// Development set for learning-rate halving and early stopping;
        /// the training set is scored when omitted.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Checkpoint path.
        #[arg(long)]
        model: PathBuf,
        /// History TSV path; defaults to `<model>.history.tsv`.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tagger: TaggerArgs,
    },
    /// Token accuracy of a checkpoint on a test set.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Train on the original data and on every operation × probability
    /// setting, scoring each on the untouched test set.
    Experiment {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum, default_value_t = OpChoice::Both)]
        op: OpChoice,
        /// Comma-separated keep probabilities.
        #[arg(long, default_value = "0.3,0.7,1.0", value_delimiter = ',')]
        ps: Vec<f64>,
        /// Only train on the original data.
        #[arg(long)]
        org_only: bool,
        /// Runs per setting; accuracies are averaged.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Use only the first N training sentences.
        #[arg(long)]
        limit_train: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Also write the TSV report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        options: AugmentOptions,
        #[command(flatten)]
        tagger: TaggerArgs,
    },
    /// Pearson correlation of treebank size and improvement.
    Correlate {
        /// Pairs file: one `size improvement` pair per line.
        pairs: PathBuf,
        /// Plot TSV path; defaults to `<pairs>.plot.tsv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OpChoice {
    Crop,
    Rotate,
    Both,
}

impl OpChoice {
    fn operations(self) -> Vec<Operation> {
        match self {
            OpChoice::Crop => vec![Operation::Crop],
            OpChoice::Rotate => vec![Operation::Rotate],
            OpChoice::Both => vec![Operation::Crop, Operation::Rotate],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Tsv,
}

#[derive(Args)]
struct LabelArgs {
    /// Comma-separated labels of interest.
    #[arg(long)]
    loi: Option<String>,
    /// Comma-separated root-phrase relations.
    #[arg(long)]
    root_phrase: Option<String>,
    /// `key = value` label configuration file; --loi and --root-phrase
    /// override it.
    #[arg(long)]
    label_config: Option<PathBuf>,
}

impl LabelArgs {
    fn resolve(&self) -> Result<LabelConfig, CliError> {
        let mut cfg = match &self.label_config {
            Some(path) => read_text(path)?
                .parse::<LabelConfig>()
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            None => LabelConfig::default(),
        };
        if let Some(loi) = &self.loi {
            cfg.loi = parse_label_list(loi);
        }
        if let Some(rp) = &self.root_phrase {
            cfg.root_phrase = parse_label_list(rp);
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct AugmentOptions {
    /// Rotations sampled per sentence (default: number of flexible chunks).
    #[arg(long)]
    max_rot: Option<NonZeroUsize>,
    /// Keep root-attached punctuation in crops.
    #[arg(long)]
    keep_punct: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    include_originals: bool,
    #[command(flatten)]
    labels: LabelArgs,
}

impl AugmentOptions {
    fn config(&self, operations: &[Operation], p: f64, seed: u64) -> Result<AugmentConfig, CliError> {
        let cfg = AugmentConfig {
            operations: operations.iter().copied().collect(),
            p,
            seed,
            max_rotations_per_sentence: self.max_rot,
            labels: self.labels.resolve()?,
            include_originals: self.include_originals,
            keep_punct: self.keep_punct,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TaggerArgs {
    #[arg(long)]
    char_embed_dim: Option<usize>,
    #[arg(long)]
    char_hidden_dim: Option<usize>,
    #[arg(long)]
    word_embed_dim: Option<usize>,
    #[arg(long)]
    word_hidden_dim: Option<usize>,
    #[arg(long)]
    init_range: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long, value_enum)]
    unk_strategy: Option<UnkArg>,
    #[arg(long)]
    unk_replace_prob: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnkArg {
    None,
    Singletons,
}

impl TaggerArgs {
    fn config(&self, seed: u64) -> Result<TaggerConfig, CliError> {
        let d = TaggerConfig::default();
        let cfg = TaggerConfig {
            char_embed_dim: self.char_embed_dim.unwrap_or(d.char_embed_dim),
            char_hidden_dim: self.char_hidden_dim.unwrap_or(d.char_hidden_dim),
            word_embed_dim: self.word_embed_dim.unwrap_or(d.word_embed_dim),
            word_hidden_dim: self.word_hidden_dim.unwrap_or(d.word_hidden_dim),
            init_range: self.init_range.unwrap_or(d.init_range),
            lr_initial: self.lr.unwrap_or(d.lr_initial),
            dropout_rate: self.dropout.unwrap_or(d.dropout_rate),
            clip_norm: self.clip_norm.unwrap_or(d.clip_norm),
            early_stop_patience: self.patience.unwrap_or(d.early_stop_patience),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            seed,
            unk_strategy: match self.unk_strategy {
                Some(UnkArg::None) => UnkStrategy::None,
                Some(UnkArg::Singletons) => UnkStrategy::Singletons,
                None => d.unk_strategy,
            },
            unk_replace_prob: self.unk_replace_prob.unwrap_or(d.unk_replace_prob),
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Training(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    fn code(&self) -> (&'static str, u8) {
        match self {
            CliError::Usage(_) => ("ERR_USAGE", 1),
            CliError::Io { .. } => ("ERR_IO", 1),
            CliError::Parse(_) => ("ERR_PARSE", 2),
            CliError::Validation(_) => ("ERR_VALIDATION", 3),
            CliError::Training(_) => ("ERR_TRAINING", 4),
        }
    }
}

impl From<TaggerError> for CliError {
    fn from(e: TaggerError) -> Self {
        match e {
            TaggerError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Training(e.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_treebank(path: &Path) -> Result<Vec<Sentence>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_conllu_bytes(&bytes).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn checkpoint_error(path: &Path, e: CheckpointError) -> CliError {
    match e {
        CheckpointError::Io(source) => CliError::io(path, source),
        other => CliError::Parse(format!("{}: {other}", path.display())),
    }
}

fn cmd_augment(input: &Path, output: &Path, cfg: &AugmentConfig) -> Result<(), CliError> {
    let sentences = read_treebank(input)?;
    if let Some((i, report)) = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.validate()))
        .find(|(_, r)| !r.is_valid())
    {
        return Err(CliError::Validation(format!(
            "{}: sentence {}: {report}",
            input.display(),
            i + 1
        )));
    }
    let augmented = augment_dataset(&sentences, cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let out: Vec<Sentence> = augmented.iter().map(|a| a.sentence.clone()).collect();
    let text = serialize_conllu(&out).map_err(|e| CliError::Validation(e.to_string()))?;
    write_text(output, &text)?;
    println!("{}", AugmentSummary::new(&sentences, &augmented));
    Ok(())
}

fn cmd_train(
    train_path: &Path,
    dev_path: Option<&Path>,
    model_path: &Path,
    history_path: Option<&Path>,
    cfg: &TaggerConfig,
) -> Result<(), CliError> {
    let train_set = read_treebank(train_path)?;
    let dev = dev_path.map(read_treebank).transpose()?.unwrap_or_default();
    let model = TaggerModel::new(&train_set, cfg)?;
    let trained = train(model, &train_set, &dev)?;
    save_checkpoint(&trained.model, model_path).map_err(|e| checkpoint_error(model_path, e))?;
    let history_path = history_path.map_or_else(
        || {
            let mut name = model_path.as_os_str().to_owned();
            name.push(".history.tsv");
            PathBuf::from(name)
        },
        Path::to_owned,
    );
    write_text(&history_path, &trained.history.to_tsv())?;
    let h = &trained.history;
    println!("epochs: {}", h.epochs.len());
    println!("best_epoch: {}", h.best_epoch);
    println!("best_dev_accuracy: {:.4}", h.best_dev_score);
    println!("stopped_early: {}", h.stopped_early);
    if h.clamped_probabilities > 0 {
        eprintln!("warning: {} gold probabilities were floored in the loss", h.clamped_probabilities);
    }
    Ok(())
}

fn cmd_eval(model_path: &Path, test_path: &Path) -> Result<(), CliError> {
    let model = load_checkpoint(model_path).map_err(|e| checkpoint_error(model_path, e))?;
    let test = read_treebank(test_path)?;
    let e = evaluate(&model, &test)?;
    if e.unknown_gold > 0 {
        eprintln!(
            "warning: {} gold tokens have tags unknown to the model; counted as errors",
            e.unknown_gold
        );
    }
    println!("accuracy: {:.4}", e.accuracy());
    println!("correct: {}/{}", e.correct, e.total);
    Ok(())
}

fn cmd_correlate(pairs_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let to_cli = |e: CorrelationError| match e {
        CorrelationError::Parse { .. } => CliError::Parse(format!("{}: {e}", pairs_path.display())),
        other => CliError::Validation(other.to_string()),
    };
    let pairs = parse_pairs(&read_text(pairs_path)?).map_err(to_cli)?;
    let r = pearson(&pairs).map_err(to_cli)?;
    let out = out.map_or_else(|| pairs_path.with_extension("plot.tsv"), Path::to_owned);
    write_text(&out, &pairs_tsv(&pairs))?;
    println!("pearson_r: {r:.4}");
    println!("pairs: {}", pairs.len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Augment {
            input,
            output,
            op,
            p,
            seed,
            options,
        } => cmd_augment(&input, &output, &options.config(&op.operations(), p, seed)?),
        Command::Stats { input, labels } => {
            let labels = labels.resolve()?;
            print!("{}", TreebankStats::compute(&read_treebank(&input)?, &labels));
            Ok(())
        }
        Command::Train {
            train,
            dev,
            model,
            history,
            seed,
            tagger,
        } => cmd_train(&train, dev.as_deref(), &model, history.as_deref(), &tagger.config(seed)?),
        Command::Eval { model, test } => cmd_eval(&model, &test),
        Command::Experiment {
            train,
            dev,
            test,
            op,
            ps,
            org_only,
            runs,
            limit_train,
            seed,
            format,
            out,
            options,
            tagger,
        } => {
            let cfg = ExperimentConfig {
                settings: if org_only { Vec::new() } else { grid(&op.operations(), &ps) },
                augment: options.config(&op.operations(), 1.0, seed)?,
                tagger: tagger.config(seed)?,
                seed,
                runs,
                threads: threads_from_env(),
            };
            if let Some(bad) = cfg.settings.iter().find(|s| !(0.0..=1.0).contains(&s.p)) {
                return Err(CliError::Usage(format!("probability {} is outside [0, 1]", bad.p)));
            }
            let mut train_set = read_treebank(&train)?;
            if let Some(n) = limit_train {
                train_set.truncate(n);
            }
            let dev_set = read_treebank(&dev)?;
            let test_set = read_treebank(&test)?;
            let report = run_experiment(&train_set, &dev_set, &test_set, &cfg).map_err(|e| match e {
                ExperimentError::NoRuns => CliError::Usage(e.to_string()),
                other => CliError::Training(other.to_string()),
            })?;
            if let Some(path) = out {
                write_text(&path, &report.to_tsv())?;
            }
            match format {
                Format::Table => print!("{report}"),
                Format::Tsv => print!("{}", report.to_tsv()),
            }
            Ok(())
        }
        Command::Correlate { pairs, out } => cmd_correlate(&pairs, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("ERR_USAGE: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (prefix, code) = e.code();
            eprintln!("{prefix}: {}", e.to_string().replace('\n', " "));
            ExitCode::from(code)
        }
    }
}
