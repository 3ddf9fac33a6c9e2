//! Stage implementations shared by the subcommands and `pipeline`.
//!
//! Each stage is an in-memory function plus an output writer. Every run
//! drops a `manifest.json` into its output directory recording the command,
//! the fully resolved configuration, a small summary and the files written
//! (relative to that directory). Nothing time- or host-dependent is recorded,
//! so identical inputs give identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use oxmc_core::analysis::{
    label_count_histogram, lorenz_gini, quadrant_classify, ConcentrationReport, QuadrantReport,
};
use oxmc_core::augmentor::{
    build_posttrain_set, weighted_sequences, AugmentationConfig, PostTrainSet, Provenance,
};
use oxmc_core::biassim::{
    calibrate_volume, coverage, generate_universe, simulate_annotations, Universe, UniverseConfig,
};
use oxmc_core::corpus::{curate, Dataset, InteractionRecord};
use oxmc_core::decoder::{
    decode, DecodeMode, DecodeRequest, Termination, DEFAULT_MAX_TOKENS_PER_KP,
    DEFAULT_MAX_TOTAL_TOKENS,
};
use oxmc_core::metrics::{evaluate_dataset, rel_combine, MetricReport, Prediction};
use oxmc_core::rng::derive_seed;
use oxmc_core::seqmodel::{build_vocab, NgramConfig, NgramScorer, Paradigm};
use oxmc_core::splitter::{split_dataset, DatasetSplits, SplitConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Result, WorkbenchError};
use crate::formats::{self, Judgments};

/// Collects files written under one output directory.
pub struct Outputs {
    dir: PathBuf,
    files: BTreeSet<String>,
}

impl Outputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: BTreeSet::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        formats::write_atomic(&self.dir.join(rel), bytes)?;
        self.files.insert(rel.to_string());
        Ok(())
    }

    /// Write `manifest.json` and return its value.
    pub fn finish(mut self, command: &str, config: Value, summary: Value) -> Result<Value> {
        self.files.insert("manifest.json".into());
        let manifest = json!({
            "command": command,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "summary": summary,
            "outputs": self.files,
        });
        formats::write_atomic(
            &self.dir.join("manifest.json"),
            &formats::json_bytes(&manifest)?,
        )?;
        Ok(manifest)
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| WorkbenchError::Internal(e.to_string()))
}

/// Fixed-precision rendering used in every TSV report.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.6}")
    }
}

/// `max(1, round(x))`.
pub fn round_k(x: f64) -> usize {
    (x.round() as usize).max(1)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub universe: UniverseConfig,
    /// Observed mean label count the interaction volume is calibrated to.
    pub target_observed_mean: f64,
    /// Fixed interaction volume; skips calibration when set.
    pub interactions: Option<u64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            universe: UniverseConfig::default(),
            target_observed_mean: 3.0,
            interactions: None,
        }
    }
}

pub struct Simulation {
    pub universe: Universe,
    pub volume: u64,
    pub log: Vec<InteractionRecord>,
}

pub fn simulate(cfg: &SimulateConfig) -> Result<Simulation> {
    let universe = generate_universe(&cfg.universe)?;
    let volume = match cfg.interactions {
        Some(v) => v,
        None => calibrate_volume(&universe, cfg.target_observed_mean, cfg.universe.seed)?,
    };
    let log = simulate_annotations(&universe, volume, cfg.universe.seed)?;
    Ok(Simulation {
        universe,
        volume,
        log,
    })
}

fn simulation_summary(sim: &Simulation, curated: &Dataset) -> Value {
    let counts = curated.label_counts();
    let below_five = counts.iter().filter(|&&c| c < 5).count() as f64 / counts.len().max(1) as f64;
    json!({
        "interactions": sim.volume,
        "universe_items": sim.universe.items.len(),
        "true_mean_labels": sim.universe.mean_labels(),
        "observed_items": curated.len(),
        "observed_mean_labels": curated.mean_labels(),
        "fraction_below_five_labels": below_five,
    })
}

pub fn run_simulate(cfg: &SimulateConfig, out: &Path) -> Result<Value> {
    let sim = simulate(cfg)?;
    let curated = curate(&sim.log)?;
    let mut o = Outputs::new(out);
    o.write("universe.jsonl", &formats::universe_bytes(&sim.universe)?)?;
    o.write("log.jsonl", &formats::interaction_log_bytes(&sim.log)?)?;
    o.finish(
        "simulate",
        to_value(cfg)?,
        simulation_summary(&sim, &curated),
    )
}

// ---------------------------------------------------------------------------
// curate

fn dataset_summary(d: &Dataset) -> Value {
    json!({ "instances": d.len(), "mean_labels": d.mean_labels() })
}

pub fn run_curate(input: &Path, out: &Path) -> Result<Value> {
    let records = formats::read_interaction_log(input)?;
    let d = curate(&records)?;
    let mut o = Outputs::new(out);
    o.write("curated.jsonl", &formats::dataset_bytes(&d)?)?;
    let mut summary = dataset_summary(&d);
    summary["records"] = json!(records.len());
    o.finish("curate", json!({ "input": input }), summary)
}

// ---------------------------------------------------------------------------
// split

pub const SPLIT_FILES: [&str; 5] = ["train", "dev", "test", "test_narrow", "test_diverse"];

pub fn split_summary(s: &DatasetSplits) -> Value {
    let buckets: BTreeMap<String, usize> = s
        .test_buckets
        .iter()
        .map(|(k, d)| (k.to_string(), d.len()))
        .collect();
    json!({
        "mu_train": s.mu_train,
        "narrow_boundary": 2.0 * s.mu_train,
        "sizes": {
            "train": s.train.len(),
            "dev": s.dev.len(),
            "test": s.test.len(),
            "test_narrow": s.test_narrow.len(),
            "test_diverse": s.test_diverse.len(),
        },
        "test_bucket_sizes": buckets,
    })
}

pub fn write_splits(s: &DatasetSplits, o: &mut Outputs, prefix: &str) -> Result<()> {
    for (name, d) in
        SPLIT_FILES
            .iter()
            .zip([&s.train, &s.dev, &s.test, &s.test_narrow, &s.test_diverse])
    {
        o.write(
            &format!("{prefix}{name}.jsonl"),
            &formats::dataset_bytes(d)?,
        )?;
    }
    Ok(())
}

pub fn run_split(input: &Path, cfg: &SplitConfig, out: &Path) -> Result<Value> {
    let d = formats::read_dataset(input)?;
    let s = split_dataset(&d, cfg)?;
    let mut o = Outputs::new(out);
    write_splits(&s, &mut o, "")?;
    o.finish(
        "split",
        json!({ "input": input, "seed": cfg.seed, "ratios": cfg.ratios }),
        split_summary(&s),
    )
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyzeConfig {
    pub hot_threshold: u64,
    pub diverse_threshold: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            hot_threshold: oxmc_core::analysis::DEFAULT_HOT_THRESHOLD,
            diverse_threshold: oxmc_core::analysis::DEFAULT_DIVERSE_THRESHOLD,
        }
    }
}

pub struct Analysis {
    pub histogram_tsv: Vec<u8>,
    pub quadrants: QuadrantReport,
    pub concentration: ConcentrationReport,
    pub mean: f64,
    pub cv: Option<f64>,
}

pub fn analyze(d: &Dataset, cfg: &AnalyzeConfig) -> Result<Analysis> {
    let hist = label_count_histogram(d);
    let rows: Vec<Vec<String>> = hist
        .bins
        .iter()
        .map(|(k, n)| {
            vec![
                k.to_string(),
                n.to_string(),
                fmt_num(*n as f64 / d.len() as f64),
            ]
        })
        .collect();
    let header = ["labels", "instances", "proportion"].map(String::from);
    Ok(Analysis {
        histogram_tsv: formats::tsv_bytes(&header, &rows),
        quadrants: quadrant_classify(d, cfg.hot_threshold, cfg.diverse_threshold),
        concentration: lorenz_gini(&d.label_counts())?,
        mean: hist.mean,
        cv: hist.cv,
    })
}

fn write_analysis(a: &Analysis, o: &mut Outputs, prefix: &str) -> Result<Value> {
    o.write(&format!("{prefix}histogram.tsv"), &a.histogram_tsv)?;
    o.write(
        &format!("{prefix}quadrants.json"),
        &formats::json_bytes(&a.quadrants)?,
    )?;
    o.write(
        &format!("{prefix}concentration.json"),
        &formats::json_bytes(&a.concentration)?,
    )?;
    Ok(json!({
        "mean_labels": a.mean,
        "cv": a.cv,
        "gini": a.concentration.gini,
        "largest_quadrant": a.quadrants.largest().name(),
    }))
}

pub fn run_analyze(input: &Path, cfg: &AnalyzeConfig, out: &Path) -> Result<Value> {
    let d = formats::read_dataset(input)?;
    let a = analyze(&d, cfg)?;
    let mut o = Outputs::new(out);
    let summary = write_analysis(&a, &mut o, "")?;
    let mut config = to_value(cfg)?;
    config["input"] = json!(input);
    o.finish("analyze", config, summary)
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainConfig {
    pub paradigm: Paradigm,
    pub ngram: NgramConfig,
    /// Minimum corpus count for a word to enter the vocabulary.
    pub min_freq: usize,
    /// Sequence weight of augmented instances when a provenance map is given.
    pub augmented_weight: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            paradigm: Paradigm::Pusl,
            ngram: NgramConfig::default(),
            min_freq: 1,
            augmented_weight: 1,
        }
    }
}

pub fn train(
    d: &Dataset,
    provenance: &BTreeMap<String, Provenance>,
    cfg: &TrainConfig,
) -> Result<NgramScorer> {
    cfg.ngram.validate()?;
    let vocab = build_vocab(d, cfg.min_freq)?;
    let seqs = weighted_sequences(
        d,
        provenance,
        cfg.paradigm,
        &vocab,
        cfg.ngram.max_text_tokens,
        cfg.augmented_weight,
    )?;
    Ok(NgramScorer::train(
        seqs.iter().map(|(s, w)| (s, *w)),
        vocab,
        cfg.ngram,
    )?)
}

pub fn run_train(
    input: &Path,
    provenance: Option<&Path>,
    cfg: &TrainConfig,
    out: &Path,
) -> Result<Value> {
    let d = formats::read_dataset(input)?;
    let prov = match provenance {
        Some(p) => formats::read_provenance(p)?,
        None => BTreeMap::new(),
    };
    let model = train(&d, &prov, cfg)?;
    let mut o = Outputs::new(out);
    o.write("model.json", &formats::model_bytes(&model)?)?;
    let mut config = to_value(cfg)?;
    config["input"] = json!(input);
    config["provenance"] = json!(provenance);
    o.finish(
        "train",
        config,
        json!({ "instances": d.len(), "vocab_size": oxmc_core::seqmodel::Scorer::vocab(&model).len() }),
    )
}

// ---------------------------------------------------------------------------
// decode

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecodeConfig {
    pub paradigm: Paradigm,
    pub k: usize,
    /// One2One only; defaults to `k`.
    pub beam_width: Option<usize>,
    pub max_tokens_per_kp: usize,
    pub max_total_tokens: usize,
    /// Sample at this temperature instead of decoding greedily.
    pub temperature: Option<f64>,
    /// Root of the per-item sampling seeds.
    pub seed: u64,
}

impl DecodeConfig {
    pub fn new(paradigm: Paradigm, k: usize) -> Self {
        Self {
            paradigm,
            k,
            beam_width: None,
            max_tokens_per_kp: DEFAULT_MAX_TOKENS_PER_KP,
            max_total_tokens: DEFAULT_MAX_TOTAL_TOKENS,
            temperature: None,
            seed: 0,
        }
    }

    pub fn request(&self, item_id: &str) -> DecodeRequest {
        DecodeRequest {
            max_tokens_per_kp: self.max_tokens_per_kp,
            max_total_tokens: self.max_total_tokens,
            beam_width: self.beam_width.unwrap_or(self.k),
            mode: match self.temperature {
                Some(temperature) => DecodeMode::Sampled {
                    temperature,
                    seed: derive_seed(self.seed, item_id),
                },
                None => DecodeMode::Greedy,
            },
            ..DecodeRequest::new(self.paradigm, self.k)
        }
    }
}

pub struct Decoded {
    pub predictions: Vec<Prediction>,
    pub terminations: BTreeMap<String, usize>,
}

pub fn decode_dataset(model: &NgramScorer, d: &Dataset, cfg: &DecodeConfig) -> Result<Decoded> {
    let mut predictions = Vec::with_capacity(d.len());
    let mut terminations = BTreeMap::new();
    for inst in d {
        let r = decode(model, &inst.text, &cfg.request(&inst.item_id))?;
        let name = match r.termination {
            Termination::KReached => "k_reached",
            Termination::Eos => "eos",
            Termination::Budget => "budget",
        };
        *terminations.entry(name.to_string()).or_insert(0) += 1;
        predictions.push(Prediction::new(inst.item_id.clone(), r.keyphrases));
    }
    Ok(Decoded {
        predictions,
        terminations,
    })
}

pub fn run_decode(input: &Path, model: &Path, cfg: &DecodeConfig, out: &Path) -> Result<Value> {
    let d = formats::read_dataset(input)?;
    let m = formats::read_model(model)?;
    let decoded = decode_dataset(&m, &d, cfg)?;
    let mut o = Outputs::new(out);
    o.write(
        "predictions.jsonl",
        &formats::predictions_bytes(&decoded.predictions)?,
    )?;
    let mut config = to_value(cfg)?;
    config["input"] = json!(input);
    config["model"] = json!(model);
    o.finish(
        "decode",
        config,
        json!({ "instances": d.len(), "terminations": decoded.terminations }),
    )
}

// ---------------------------------------------------------------------------
// eval

/// Metric table: one column per gold split, one row per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
    /// Full reports keyed by (split, k).
    pub reports: BTreeMap<(String, usize), MetricReport>,
}

impl EvalTable {
    pub fn value(&self, row: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|n| n == column)?;
        self.rows.iter().find(|(r, _)| r == row).map(|(_, v)| v[c])
    }

    pub fn tsv(&self) -> Vec<u8> {
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().cloned());
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(name, vals)| {
                std::iter::once(name.clone())
                    .chain(vals.iter().map(|v| fmt_num(*v)))
                    .collect()
            })
            .collect();
        formats::tsv_bytes(&header, &rows)
    }
}

/// Score `preds` against each named gold split. Every prediction must
/// belong to some split; each split scores only its own items and requires a
/// prediction for each of them.
pub fn evaluate(
    preds: &[Prediction],
    golds: &[(String, Dataset)],
    ks: &[usize],
    universe: Option<&Universe>,
    judgments: Option<&Judgments>,
) -> Result<EvalTable> {
    if golds.is_empty() || ks.is_empty() {
        return Err(WorkbenchError::Usage(
            "eval needs at least one gold split and one k".into(),
        ));
    }
    let ids: Vec<BTreeSet<&str>> = golds
        .iter()
        .map(|(_, d)| d.iter().map(|i| i.item_id.as_str()).collect())
        .collect();
    if let Some(p) = preds
        .iter()
        .find(|p| !ids.iter().any(|s| s.contains(p.item_id.as_str())))
    {
        return Err(oxmc_core::Error::UnknownItem(p.item_id.clone()).into());
    }
    let subsets: Vec<Vec<Prediction>> = ids
        .iter()
        .map(|s| {
            preds
                .iter()
                .filter(|p| s.contains(p.item_id.as_str()))
                .cloned()
                .collect()
        })
        .collect();

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut reports = BTreeMap::new();
    for &k in ks {
        let mut per_split = Vec::with_capacity(golds.len());
        for ((name, gold), sub) in golds.iter().zip(&subsets) {
            let r = evaluate_dataset(sub, gold, k)?;
            per_split.push(r.macro_avg.rows(k));
            reports.insert((name.clone(), k), r);
        }
        for (i, (row, _)) in per_split[0].iter().enumerate() {
            // @O rows do not depend on k
            if row.ends_with("@O") && k != ks[0] {
                continue;
            }
            rows.push((row.clone(), per_split.iter().map(|r| r[i].1).collect()));
        }
        if let Some(u) = universe {
            let vals = subsets
                .iter()
                .map(|sub| {
                    if sub.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        coverage(u, sub, k)
                    }
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            rows.push((format!("Cov@{k}"), vals));
        }
    }
    if let Some(j) = judgments {
        let mut vals = Vec::with_capacity(golds.len());
        for s in &ids {
            let (mut g, mut uni) = (Vec::new(), Vec::new());
            for (id, jg, ju) in j {
                if s.contains(id.as_str()) {
                    g.extend_from_slice(jg);
                    uni.extend_from_slice(ju);
                }
            }
            vals.push(if g.is_empty() {
                f64::NAN
            } else {
                rel_combine(&g, &uni)?
            });
        }
        rows.push(("Rel".into(), vals));
    }
    let first_k = ks[0];
    rows.push((
        "instances".into(),
        golds
            .iter()
            .map(|(n, _)| reports[&(n.clone(), first_k)].instances as f64)
            .collect(),
    ));
    rows.push((
        "excluded_empty_gt".into(),
        golds
            .iter()
            .map(|(n, _)| reports[&(n.clone(), first_k)].excluded_empty_gt as f64)
            .collect(),
    ));
    Ok(EvalTable {
        columns: golds.iter().map(|(n, _)| n.clone()).collect(),
        rows,
        reports,
    })
}

pub struct EvalInputs<'a> {
    pub predictions: &'a Path,
    pub golds: &'a [(String, PathBuf)],
    pub ks: &'a [usize],
    pub universe: Option<&'a Path>,
    pub judgments: Option<&'a Path>,
}

pub fn run_eval(inp: &EvalInputs<'_>, out: &Path) -> Result<Value> {
    let preds = formats::read_predictions(inp.predictions)?;
    let golds = inp
        .golds
        .iter()
        .map(|(n, p)| Ok((n.clone(), formats::read_dataset(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let universe = inp.universe.map(formats::read_universe).transpose()?;
    let judgments = inp.judgments.map(formats::read_judgments).transpose()?;
    let table = evaluate(
        &preds,
        &golds,
        inp.ks,
        universe.as_ref(),
        judgments.as_ref(),
    )?;
    let mut o = Outputs::new(out);
    o.write("report.tsv", &table.tsv())?;
    o.finish(
        "eval",
        json!({
            "predictions": inp.predictions,
            "gold": inp.golds.iter().map(|(n, p)| json!({"name": n, "path": p})).collect::<Vec<_>>(),
            "k": inp.ks,
            "universe": inp.universe,
            "judgments": inp.judgments,
        }),
        json!({ "predictions": preds.len() }),
    )
}

// ---------------------------------------------------------------------------
// augment

pub fn augment(d: &Dataset, model: &NgramScorer, cfg: &AugmentationConfig) -> Result<PostTrainSet> {
    Ok(build_posttrain_set(d, model, cfg)?)
}

pub fn run_augment(
    input: &Path,
    model: &Path,
    cfg: &AugmentationConfig,
    out: &Path,
) -> Result<Value> {
    let d = formats::read_dataset(input)?;
    let m = formats::read_model(model)?;
    let set = augment(&d, &m, cfg)?;
    let mut o = Outputs::new(out);
    o.write("posttrain.jsonl", &formats::dataset_bytes(&set.dataset)?)?;
    o.write(
        "provenance.json",
        &formats::provenance_bytes(&set.provenance)?,
    )?;
    let augmented = set
        .provenance
        .values()
        .filter(|p| **p == Provenance::Augmented)
        .count();
    let mut config = to_value(cfg)?;
    config["input"] = json!(input);
    config["model"] = json!(model);
    o.finish(
        "augment",
        config,
        json!({
            "input_instances": d.len(),
            "input_mean_labels": d.mean_labels(),
            "posttrain_instances": set.dataset.len(),
            "posttrain_mean_labels": set.dataset.mean_labels(),
            "original": set.dataset.len() - augmented,
            "augmented": augmented,
            "rejected": set.rejected,
        }),
    )
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub seed: u64,
    /// `universe.seed` is overwritten with a seed derived from `seed`.
    pub simulate: SimulateConfig,
    pub ratios: [f64; 3],
    pub analyze: AnalyzeConfig,
    pub ngram: NgramConfig,
    pub min_freq: usize,
    /// Decoding k; defaults to `round(2·mu_train)`.
    pub k: Option<usize>,
    pub beam_width: Option<usize>,
    pub max_tokens_per_kp: usize,
    pub max_total_tokens: usize,
    pub temperature: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            simulate: SimulateConfig::default(),
            ratios: SplitConfig::default().ratios,
            analyze: AnalyzeConfig::default(),
            ngram: NgramConfig::default(),
            min_freq: 1,
            k: None,
            beam_width: None,
            max_tokens_per_kp: DEFAULT_MAX_TOKENS_PER_KP,
            max_total_tokens: DEFAULT_MAX_TOTAL_TOKENS,
            temperature: None,
        }
    }
}

/// Per-stage seeds, all derived from the root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageSeeds {
    pub simulate: u64,
    pub split: u64,
    pub decode: u64,
}

impl StageSeeds {
    pub fn derive(root: u64) -> Self {
        Self {
            simulate: derive_seed(root, "simulate"),
            split: derive_seed(root, "split"),
            decode: derive_seed(root, "decode"),
        }
    }
}

/// Headline numbers of one paradigm on the test split at the decoding k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParadigmSummary {
    pub paradigm: Paradigm,
    pub uniq_at_k: f64,
    pub coverage_at_k: f64,
    pub b_at_k: f64,
    pub f1_at_o: f64,
}

pub struct PipelineRun {
    pub manifest: Value,
    pub k: usize,
    pub mu_train: f64,
    pub summaries: Vec<ParadigmSummary>,
}

/// simulate → curate → analyze → split → train → decode → eval, for every
/// paradigm, into `out`.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<PipelineRun> {
    let seeds = StageSeeds::derive(cfg.seed);
    let mut sim_cfg = cfg.simulate.clone();
    sim_cfg.universe.seed = seeds.simulate;
    let split_cfg = SplitConfig::new(cfg.ratios, seeds.split)?;
    let mut o = Outputs::new(out);

    let sim = simulate(&sim_cfg)?;
    o.write(
        "simulate/universe.jsonl",
        &formats::universe_bytes(&sim.universe)?,
    )?;
    o.write(
        "simulate/log.jsonl",
        &formats::interaction_log_bytes(&sim.log)?,
    )?;

    let curated = curate(&sim.log)?;
    o.write("curate/curated.jsonl", &formats::dataset_bytes(&curated)?)?;

    let analysis = analyze(&curated, &cfg.analyze)?;
    let analysis_summary = write_analysis(&analysis, &mut o, "analyze/")?;

    let splits = split_dataset(&curated, &split_cfg)?;
    write_splits(&splits, &mut o, "split/")?;

    let k = cfg.k.unwrap_or_else(|| round_k(2.0 * splits.mu_train));
    let mut ks = vec![round_k(splits.mu_train), round_k(2.0 * splits.mu_train)];
    if !ks.contains(&k) {
        ks.push(k);
    }
    ks.sort_unstable();
    ks.dedup();
    let golds = vec![
        ("test".to_string(), splits.test.clone()),
        ("test_narrow".to_string(), splits.test_narrow.clone()),
        ("test_diverse".to_string(), splits.test_diverse.clone()),
    ];

    let mut summaries = Vec::new();
    let mut summary_rows = Vec::new();
    for paradigm in Paradigm::ALL {
        let name = paradigm.as_str();
        let tcfg = TrainConfig {
            paradigm,
            ngram: cfg.ngram,
            min_freq: cfg.min_freq,
            augmented_weight: 1,
        };
        let model = train(&splits.train, &BTreeMap::new(), &tcfg)?;
        o.write(
            &format!("models/{name}.json"),
            &formats::model_bytes(&model)?,
        )?;

        let dcfg = DecodeConfig {
            beam_width: cfg.beam_width,
            max_tokens_per_kp: cfg.max_tokens_per_kp,
            max_total_tokens: cfg.max_total_tokens,
            temperature: cfg.temperature,
            seed: seeds.decode,
            ..DecodeConfig::new(paradigm, k)
        };
        let decoded = decode_dataset(&model, &splits.test, &dcfg)?;
        o.write(
            &format!("predictions/{name}.jsonl"),
            &formats::predictions_bytes(&decoded.predictions)?,
        )?;

        let table = evaluate(&decoded.predictions, &golds, &ks, Some(&sim.universe), None)?;
        o.write(&format!("reports/{name}.tsv"), &table.tsv())?;

        let get = |row: String| table.value(&row, "test").unwrap_or(f64::NAN);
        let s = ParadigmSummary {
            paradigm,
            uniq_at_k: get(format!("#K@{k}")),
            coverage_at_k: get(format!("Cov@{k}")),
            b_at_k: get(format!("B@{k}")),
            f1_at_o: get("F1@O".into()),
        };
        summary_rows.push(vec![
            name.to_string(),
            fmt_num(s.uniq_at_k),
            fmt_num(s.coverage_at_k),
            fmt_num(s.b_at_k),
            fmt_num(s.f1_at_o),
        ]);
        summaries.push(s);
    }
    let header = [
        "paradigm".to_string(),
        format!("#K@{k}"),
        format!("Cov@{k}"),
        format!("B@{k}"),
        "F1@O".to_string(),
    ];
    o.write(
        "reports/summary.tsv",
        &formats::tsv_bytes(&header, &summary_rows),
    )?;

    let mut config = to_value(cfg)?;
    config["stage_seeds"] = to_value(&seeds)?;
    config["resolved"] = json!({ "k": k, "eval_k": ks, "simulate": sim_cfg, "split": split_cfg });
    let manifest = o.finish(
        "pipeline",
        config,
        json!({
            "simulate": simulation_summary(&sim, &curated),
            "analyze": analysis_summary,
            "split": split_summary(&splits),
            "paradigms": summaries,
        }),
    )?;
    Ok(PipelineRun {
        manifest,
        k,
        mu_train: splits.mu_train,
        summaries,
    })
}
