//! Baseline-versus-augmented tagging experiments.
//!
//! One tagger is trained per setting (the original data, then every
//! operation × probability pair) and scored on the untouched test set.

use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use treeaug::augment::{augment_dataset, AugmentConfig, Operation};
use treeaug::conllu::{write_sentence, Sentence};
use treeaug::tagger::{evaluate, train, TaggerConfig, TaggerModel};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "TREEAUG_THREADS";

/// TSV header of [`ExperimentReport::to_tsv`].
pub const TSV_HEADER: &str = "setting\toperation\tp\ttrain_sentences\ttrain_tokens\taccuracy\tstatus";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Setting {
    /// `None` trains on the original data.
    pub operation: Option<Operation>,
    pub p: f64,
}

impl Setting {
    pub const ORIGINAL: Setting = Setting { operation: None, p: 0.0 };

    pub fn new(operation: Operation, p: f64) -> Self {
        Setting {
            operation: Some(operation),
            p,
        }
    }

    pub fn name(&self) -> String {
        match self.operation {
            None => "org".to_owned(),
            Some(op) => format!("{op}@{}", self.p),
        }
    }
}

/// `operations × probabilities`, operation-major.
pub fn grid(operations: &[Operation], probabilities: &[f64]) -> Vec<Setting> {
    operations
        .iter()
        .flat_map(|&op| probabilities.iter().map(move |&p| Setting::new(op, p)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Augmented settings; the original-data setting always runs first.
    pub settings: Vec<Setting>,
    /// Labels, rotation cap, punctuation and originals handling. Operation,
    /// probability and seed are overridden per setting.
    pub augment: AugmentConfig,
    pub tagger: TaggerConfig,
    pub seed: u64,
    /// Runs per setting; run `r` uses seed `seed + r`.
    pub runs: usize,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            settings: grid(&[Operation::Crop, Operation::Rotate], &[0.3, 0.7, 1.0]),
            augment: AugmentConfig::default(),
            tagger: TaggerConfig::default(),
            seed: 0,
            runs: 1,
            threads: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("runs must be positive")]
    NoRuns,
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("{0} set changed during the experiment")]
    Mutated(&'static str),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SettingRow {
    pub setting: Setting,
    /// Mean over runs, rounded.
    pub train_sentences: usize,
    pub train_tokens: usize,
    /// Test accuracy per run.
    pub accuracies: Vec<f64>,
    /// First failure, if any run failed.
    pub error: Option<String>,
    pub runtime: Duration,
}

impl SettingRow {
    /// Mean test accuracy, when every run succeeded.
    pub fn accuracy(&self) -> Option<f64> {
        if self.error.is_some() || self.accuracies.is_empty() {
            None
        } else {
            Some(self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    /// The original-data row first, then the settings in grid order.
    pub rows: Vec<SettingRow>,
    pub seeds: Vec<u64>,
    pub dev_sha256: String,
    pub test_sha256: String,
}

impl ExperimentReport {
    pub fn original(&self) -> &SettingRow {
        &self.rows[0]
    }

    /// The augmented row with the highest accuracy (first on ties).
    pub fn best_augmented(&self) -> Option<&SettingRow> {
        self.rows[1..]
            .iter()
            .filter(|r| r.accuracy().is_some())
            .fold(None, |best: Option<&SettingRow>, r| match best {
                Some(b) if b.accuracy() >= r.accuracy() => Some(b),
                _ => Some(r),
            })
    }

    /// `(best augmented − org) / org × 100`; zero when no augmented setting
    /// produced a result, `None` when the original setting failed or scored
    /// zero.
    pub fn improvement_pct(&self) -> Option<f64> {
        let org = self.original().accuracy().filter(|&a| a > 0.0)?;
        Some(match self.best_augmented().and_then(SettingRow::accuracy) {
            Some(best) => (best - org) / org * 100.0,
            None => 0.0,
        })
    }

    /// Fixed-header TSV followed by `# key = value` summary lines. Runtimes
    /// are left out so the file depends only on inputs and seeds.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{TSV_HEADER}\n");
        for r in &self.rows {
            let (op, p) = match r.setting.operation {
                None => ("none".to_owned(), "-".to_owned()),
                Some(op) => (op.to_string(), r.setting.p.to_string()),
            };
            let accuracy = r.accuracy().map_or("NA".to_owned(), |a| format!("{a:.6}"));
            let status = r
                .error
                .as_deref()
                .map_or("ok".to_owned(), |e| format!("failed: {}", e.replace(['\t', '\n'], " ")));
            let _ = writeln!(
                out,
                "{}\t{op}\t{p}\t{}\t{}\t{accuracy}\t{status}",
                r.setting.name(),
                r.train_sentences,
                r.train_tokens
            );
        }
        let imp = self.improvement_pct().map_or("NA".to_owned(), |v| format!("{v:.4}"));
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "# improvement_pct = {imp}");
        let _ = writeln!(out, "# seeds = {}", seeds.join(","));
        let _ = writeln!(out, "# dev_sha256 = {}", self.dev_sha256);
        let _ = writeln!(out, "# test_sha256 = {}", self.test_sha256);
        out
    }
}

/// Human-readable table with accuracies in percent and runtimes.
impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>10} {:>10} {:>9} {:>9}", "setting", "sentences", "tokens", "acc%", "time")?;
        for r in &self.rows {
            let acc = r.accuracy().map_or("failed".to_owned(), |a| format!("{:.2}", a * 100.0));
            writeln!(
                f,
                "{:<12} {:>10} {:>10} {:>9} {:>8.1}s",
                r.setting.name(),
                r.train_sentences,
                r.train_tokens,
                acc,
                r.runtime.as_secs_f64()
            )?;
            if let Some(e) = &r.error {
                writeln!(f, "  error: {e}")?;
            }
        }
        match (self.improvement_pct(), self.best_augmented()) {
            (Some(imp), Some(best)) => writeln!(f, "Imp%: {imp:.2} (best: {})", best.setting.name()),
            (Some(imp), None) => writeln!(f, "Imp%: {imp:.2}"),
            (None, _) => writeln!(f, "Imp%: NA"),
        }
    }
}

/// SHA-256 of the CoNLL-U rendering of `sentences`.
pub fn checksum(sentences: &[Sentence]) -> String {
    let mut text = String::new();
    for s in sentences {
        write_sentence(s, &mut text);
    }
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// Thread cap from [`THREADS_ENV`], ignoring unparsable or zero values.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

struct RunOutcome {
    sentences: usize,
    tokens: usize,
    accuracy: Result<f64, String>,
}

fn run_one(setting: Setting, seed: u64, train_set: &[Sentence], dev: &[Sentence], test: &[Sentence], cfg: &ExperimentConfig) -> RunOutcome {
    let data: Vec<Sentence> = match setting.operation {
        None => train_set.to_vec(),
        Some(op) => {
            let augment = AugmentConfig {
                operations: [op].into_iter().collect(),
                p: setting.p,
                seed,
                ..cfg.augment.clone()
            };
            match augment_dataset(train_set, &augment) {
                Ok(out) => out.into_iter().map(|a| a.sentence).collect(),
                Err(e) => {
                    return RunOutcome {
                        sentences: 0,
                        tokens: 0,
                        accuracy: Err(e.to_string()),
                    }
                }
            }
        }
    };
    let tagger = TaggerConfig {
        seed,
        ..cfg.tagger.clone()
    };
    let accuracy = TaggerModel::new(&data, &tagger)
        .and_then(|model| train(model, &data, dev))
        .and_then(|trained| evaluate(&trained.model, test))
        .map(|e| e.accuracy())
        .map_err(|e| e.to_string());
    RunOutcome {
        sentences: data.len(),
        tokens: data.iter().map(Sentence::len).sum(),
        accuracy,
    }
}

/// Runs every setting. Failures are recorded in their row; the report is
/// identical whatever the thread count.
pub fn run_experiment(
    train_set: &[Sentence],
    dev: &[Sentence],
    test: &[Sentence],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, ExperimentError> {
    if cfg.runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    if train_set.is_empty() {
        return Err(ExperimentError::EmptySet("training"));
    }
    if test.is_empty() {
        return Err(ExperimentError::EmptySet("test"));
    }
    let dev_sha256 = checksum(dev);
    let test_sha256 = checksum(test);

    let settings: Vec<Setting> = std::iter::once(Setting::ORIGINAL).chain(cfg.settings.iter().copied()).collect();
    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|r| cfg.seed.wrapping_add(r)).collect();
    let jobs: Vec<(usize, u64)> = (0..settings.len())
        .flat_map(|s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let outcomes: Vec<(RunOutcome, Duration)> = pool.build()?.install(|| {
        jobs.par_iter()
            .map(|&(s, seed)| {
                let start = Instant::now();
                let outcome = run_one(settings[s], seed, train_set, dev, test, cfg);
                (outcome, start.elapsed())
            })
            .collect()
    });

    let rows = settings
        .iter()
        .zip(outcomes.chunks(seeds.len()))
        .map(|(&setting, runs)| {
            let mean = |f: fn(&RunOutcome) -> usize| {
                (runs.iter().map(|(o, _)| f(o)).sum::<usize>() as f64 / runs.len() as f64).round() as usize
            };
            SettingRow {
                setting,
                train_sentences: mean(|o| o.sentences),
                train_tokens: mean(|o| o.tokens),
                accuracies: runs.iter().filter_map(|(o, _)| o.accuracy.as_ref().ok().copied()).collect(),
                error: runs.iter().find_map(|(o, _)| o.accuracy.as_ref().err().cloned()),
                runtime: runs.iter().map(|(_, t)| *t).sum(),
            }
        })
        .collect();

    if checksum(dev) != dev_sha256 {
        return Err(ExperimentError::Mutated("dev"));
    }
    if checksum(test) != test_sha256 {
        return Err(ExperimentError::Mutated("test"));
    }
    Ok(ExperimentReport {
        rows,
        seeds,
        dev_sha256,
        test_sha256,
    })
}
