//! Command-line front end. `run` parses argv, dispatches to
//! [`crate::commands`], prints the manifest on success and maps errors to
//! exit codes (0 ok, 1 usage, 2 data, 3 internal).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oxmc_core::augmentor::AugmentationConfig;
use oxmc_core::biassim::UniverseConfig;
use oxmc_core::decoder::{DEFAULT_MAX_TOKENS_PER_KP, DEFAULT_MAX_TOTAL_TOKENS};
use oxmc_core::seqmodel::{NgramConfig, Paradigm, DEFAULT_MAX_TEXT_TOKENS};
use oxmc_core::splitter::SplitConfig;

use crate::commands::{
    self, AnalyzeConfig, DecodeConfig, EvalInputs, PipelineConfig, SimulateConfig, TrainConfig,
};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "oxmc",
    version,
    about = "Open-vocabulary multi-label keyphrase workbench"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group a raw interaction log (JSONL) into a curated dataset.
    Curate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Merge, shuffle and split a curated dataset; bucket the test split.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train,dev,test fractions.
        #[arg(long, value_parser = parse_ratios, default_value = "0.8,0.1,0.1")]
        ratios: [f64; 3],
    },
    /// Label-count histogram, quadrants and concentration of a curated dataset.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Fit an n-gram sequence model for one paradigm.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "pusl")]
        paradigm: Paradigm,
        #[command(flatten)]
        model: ModelArgs,
        /// Provenance map from `augment`; weights augmented instances.
        #[arg(long)]
        provenance: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        augmented_weight: u64,
    },
    /// Generate keyphrases for every instance of a curated dataset.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "pusl")]
        paradigm: Paradigm,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        decode: DecodeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score predictions against one or more gold splits.
    Eval {
        /// Predictions JSONL.
        #[arg(long)]
        input: PathBuf,
        /// Gold split as NAME=PATH; repeatable.
        #[arg(long = "gold", value_parser = parse_gold, required = true)]
        golds: Vec<(String, PathBuf)>,
        /// Cutoff; repeatable.
        #[arg(long = "k", required = true)]
        ks: Vec<usize>,
        /// Universe JSONL; adds coverage rows.
        #[arg(long)]
        universe: Option<PathBuf>,
        /// Relevance judgments JSONL; adds a Rel row.
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build a post-training set by rejection-sampled augmentation.
    Augment {
        #[arg(long)]
        input: PathBuf,
        /// PUSL model used to sample extra keyphrases.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Acceptance threshold; defaults to the input's mean label count.
        #[arg(long)]
        target_mean: Option<f64>,
        #[arg(long, default_value_t = 6)]
        samples_per_item: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 50_000)]
        max_output_size: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_TOTAL_TOKENS)]
        max_total_tokens: usize,
    },
    /// Generate a synthetic universe and a popularity-biased interaction log.
    Simulate {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        universe: UniverseArgs,
    },
    /// End-to-end run: simulate, curate, analyze, split, then train, decode
    /// and evaluate every paradigm.
    Pipeline {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_ratios, default_value = "0.8,0.1,0.1")]
        ratios: [f64; 3],
        /// Decoding k; defaults to round(2 x train mean label count).
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        thresholds: Thresholds,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        decode: DecodeArgs,
        #[command(flatten)]
        universe: UniverseArgs,
    },
}

#[derive(Debug, Args)]
pub struct Thresholds {
    /// Items with at least this many interactions are hot.
    #[arg(long, default_value_t = oxmc_core::analysis::DEFAULT_HOT_THRESHOLD)]
    pub hot_threshold: u64,
    /// Items with at least this many unique labels are diverse.
    #[arg(long, default_value_t = oxmc_core::analysis::DEFAULT_DIVERSE_THRESHOLD)]
    pub diverse_threshold: usize,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = NgramConfig::default().order)]
    pub order: usize,
    #[arg(long, default_value_t = NgramConfig::default().alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_TEXT_TOKENS)]
    pub max_text_tokens: usize,
    #[arg(long, default_value_t = 1)]
    pub min_freq: usize,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// One2One beam width; defaults to k.
    #[arg(long)]
    pub beam_width: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_TOKENS_PER_KP)]
    pub max_tokens_per_kp: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_TOTAL_TOKENS)]
    pub max_total_tokens: usize,
    /// Sample at this temperature instead of decoding greedily.
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Args)]
pub struct UniverseArgs {
    #[arg(long, default_value_t = UniverseConfig::default().num_items)]
    pub num_items: usize,
    #[arg(long, default_value_t = UniverseConfig::default().mean_labels)]
    pub mean_labels: f64,
    #[arg(long, default_value_t = UniverseConfig::default().min_labels)]
    pub min_labels: usize,
    #[arg(long, default_value_t = UniverseConfig::default().max_labels)]
    pub max_labels: usize,
    #[arg(long, default_value_t = UniverseConfig::default().zipf_exponent)]
    pub zipf: f64,
    #[arg(long, default_value_t = UniverseConfig::default().num_topics)]
    pub num_topics: usize,
    /// Observed mean label count to calibrate the interaction volume to.
    #[arg(long, default_value_t = 3.0)]
    pub target_observed_mean: f64,
    /// Fixed interaction volume (skips calibration).
    #[arg(long)]
    pub interactions: Option<u64>,
}

impl ModelArgs {
    fn ngram(&self) -> NgramConfig {
        NgramConfig {
            order: self.order,
            alpha: self.alpha,
            max_text_tokens: self.max_text_tokens,
        }
    }
}

impl UniverseArgs {
    fn config(&self, seed: u64) -> SimulateConfig {
        SimulateConfig {
            universe: UniverseConfig {
                num_items: self.num_items,
                mean_labels: self.mean_labels,
                min_labels: self.min_labels,
                max_labels: self.max_labels,
                zipf_exponent: self.zipf,
                num_topics: self.num_topics,
                seed,
                ..UniverseConfig::default()
            },
            target_observed_mean: self.target_observed_mean,
            interactions: self.interactions,
        }
    }
}

fn parse_ratios(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad ratio `{p}`: {e}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    let ratios: [f64; 3] = parts
        .try_into()
        .map_err(|_| "expected three comma-separated ratios".to_string())?;
    SplitConfig::new(ratios, 0).map_err(|e| e.to_string())?;
    Ok(ratios)
}

fn parse_gold(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

/// Execute a parsed command and return its manifest.
pub fn execute(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Curate { input, output } => commands::run_curate(&input, &output),
        Command::Split {
            input,
            output,
            seed,
            ratios,
        } => commands::run_split(&input, &SplitConfig::new(ratios, seed)?, &output),
        Command::Analyze {
            input,
            output,
            thresholds,
        } => commands::run_analyze(
            &input,
            &AnalyzeConfig {
                hot_threshold: thresholds.hot_threshold,
                diverse_threshold: thresholds.diverse_threshold,
            },
            &output,
        ),
        Command::Train {
            input,
            output,
            paradigm,
            model,
            provenance,
            augmented_weight,
        } => commands::run_train(
            &input,
            provenance.as_deref(),
            &TrainConfig {
                paradigm,
                ngram: model.ngram(),
                min_freq: model.min_freq,
                augmented_weight,
            },
            &output,
        ),
        Command::Decode {
            input,
            model,
            output,
            paradigm,
            k,
            decode,
            seed,
        } => commands::run_decode(
            &input,
            &model,
            &DecodeConfig {
                beam_width: decode.beam_width,
                max_tokens_per_kp: decode.max_tokens_per_kp,
                max_total_tokens: decode.max_total_tokens,
                temperature: decode.temperature,
                seed,
                ..DecodeConfig::new(paradigm, k)
            },
            &output,
        ),
        Command::Eval {
            input,
            golds,
            ks,
            universe,
            judgments,
            output,
        } => commands::run_eval(
            &EvalInputs {
                predictions: &input,
                golds: &golds,
                ks: &ks,
                universe: universe.as_deref(),
                judgments: judgments.as_deref(),
            },
            &output,
        ),
        Command::Augment {
            input,
            model,
            output,
            seed,
            target_mean,
            samples_per_item,
            temperature,
            max_output_size,
            max_total_tokens,
        } => {
            let target_mean = match target_mean {
                Some(m) => m,
                None => crate::formats::read_dataset(&input)?.mean_labels(),
            };
            let cfg = AugmentationConfig {
                samples_per_item,
                temperature,
                max_output_size,
                max_total_tokens,
                ..AugmentationConfig::new(target_mean, seed)
            };
            commands::run_augment(&input, &model, &cfg, &output)
        }
        Command::Simulate {
            output,
            seed,
            universe,
        } => commands::run_simulate(&universe.config(seed), &output),
        Command::Pipeline {
            output,
            seed,
            ratios,
            k,
            thresholds,
            model,
            decode,
            universe,
        } => {
            let cfg = PipelineConfig {
                seed,
                simulate: universe.config(seed),
                ratios,
                analyze: AnalyzeConfig {
                    hot_threshold: thresholds.hot_threshold,
                    diverse_threshold: thresholds.diverse_threshold,
                },
                ngram: model.ngram(),
                min_freq: model.min_freq,
                k,
                beam_width: decode.beam_width,
                max_tokens_per_kp: decode.max_tokens_per_kp,
                max_total_tokens: decode.max_total_tokens,
                temperature: decode.temperature,
            };
            commands::run_pipeline(&cfg, &output).map(|r| r.manifest)
        }
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(manifest) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&manifest).unwrap_or_default()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
