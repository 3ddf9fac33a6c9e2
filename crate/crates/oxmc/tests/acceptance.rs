//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use oxmc::commands::{
    decode_dataset, round_k, simulate, train, DecodeConfig, SimulateConfig, TrainConfig,
};
use oxmc_core::analysis::{coefficient_of_variation, lorenz_gini, quadrant_classify};
use oxmc_core::augmentor::{build_posttrain_set, AugmentationConfig, Provenance};
use oxmc_core::biassim::{coverage, UniverseConfig};
use oxmc_core::corpus::{
    curate, group_by_text, normalize_keyphrase, Dataset, Instance, InteractionRecord, Keyphrase,
    Label,
};
use oxmc_core::decoder::{
    beam_decode_one2one, decode_pusl_topk, pusl_topk_mask, DecodeMode, DecodeRequest, Termination,
};
use oxmc_core::metrics::{
    budget_accuracy_at_k, evaluate_dataset, evaluate_instance, f1_at_o, precision_recall_f1_at_k,
    unique_k_at_k,
};
use oxmc_core::rng::ChaCha8Rng;
use oxmc_core::seqmodel::{
    build_training_sequences, build_vocab, NgramConfig, NgramScorer, Paradigm, Scorer, TokenId,
    BOK, EOK, NUM_RESERVED, SEP,
};
use oxmc_core::splitter::{split_dataset, SplitConfig};
use rand::seq::SliceRandom;
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)*));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn kp(s: &str) -> Keyphrase {
    normalize_keyphrase(s).unwrap()
}

fn kps(ids: &[usize]) -> Vec<Keyphrase> {
    ids.iter().map(|i| kp(&format!("kp{i}"))).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    oxmc_core::rng::seeded(seed)
}

// ---------------------------------------------------------------------------
// 1. metric oracle

struct OracleMetrics {
    p: f64,
    r: f64,
    f1: f64,
    p_o: f64,
    r_o: f64,
    f1_o: f64,
    b: f64,
    uniq: usize,
}

/// Set arithmetic over plain ids with linear scans.
fn metric_oracle(preds: &[usize], gt: &[usize], k: usize) -> OracleMetrics {
    fn dedup(xs: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &x in xs {
            if !out.contains(&x) {
                out.push(x);
            }
        }
        out
    }
    let prf = |top: &[usize]| {
        let h = top.iter().filter(|x| gt.contains(x)).count();
        let p = if top.is_empty() {
            0.0
        } else {
            h as f64 / top.len() as f64
        };
        let r = h as f64 / gt.len() as f64;
        let f1 = if h == 0 {
            0.0
        } else {
            2.0 * h as f64 / (top.len() + gt.len()) as f64
        };
        (p, r, f1, h)
    };
    let d = dedup(preds);
    let top_k = &d[..k.min(d.len())];
    let (p, r, f1, h) = prf(top_k);
    let capped = dedup(&preds[..preds.len().min(100)]);
    let (p_o, r_o, f1_o, _) = prf(&capped[..gt.len().min(capped.len())]);
    let uniq = dedup(&preds[..k.min(preds.len())]).len();
    OracleMetrics {
        p,
        r,
        f1,
        p_o,
        r_o,
        f1_o,
        b: h as f64 / k as f64,
        uniq,
    }
}

fn random_case(r: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>, usize) {
    let pool = r.gen_range(1..30);
    let len = if r.gen_bool(0.1) {
        r.gen_range(90..160)
    } else {
        r.gen_range(0..20)
    };
    let preds = (0..len).map(|_| r.gen_range(0..pool)).collect();
    let mut all: Vec<usize> = (0..pool + 5).collect();
    all.shuffle(r);
    let gt = all[..r.gen_range(1..=pool.min(12))].to_vec();
    (preds, gt, r.gen_range(1..=15))
}

fn criterion_1() -> Check {
    let mut r = rng(1);
    let tol = 1e-12;
    for case in 0..1000 {
        let (p_ids, g_ids, k) = random_case(&mut r);
        let (preds, gt) = (kps(&p_ids), kps(&g_ids));
        let o = metric_oracle(&p_ids, &g_ids, k);
        let at_k = precision_recall_f1_at_k(&preds, &gt, k).map_err(|e| e.to_string())?;
        let at_o = f1_at_o(&preds, &gt).map_err(|e| e.to_string())?;
        let b = budget_accuracy_at_k(&preds, &gt, k).map_err(|e| e.to_string())?;
        let uniq = unique_k_at_k(&preds, k).map_err(|e| e.to_string())?;
        let inst = evaluate_instance("x", &preds, &gt, k).map_err(|e| e.to_string())?;
        let pairs = [
            (at_k.precision, o.p),
            (at_k.recall, o.r),
            (at_k.f1, o.f1),
            (at_o.precision, o.p_o),
            (at_o.recall, o.r_o),
            (at_o.f1, o.f1_o),
            (b, o.b),
            (inst.p_at_k, o.p),
            (inst.f1_at_o, o.f1_o),
            (inst.b_at_k, o.b),
        ];
        for (i, (got, want)) in pairs.iter().enumerate() {
            ensure!(
                close(*got, *want, tol),
                "case {case} value {i}: {got} vs oracle {want}"
            );
        }
        ensure!(
            uniq == o.uniq && inst.uniq_at_k == o.uniq,
            "case {case}: #K {uniq} vs oracle {}",
            o.uniq
        );
    }
    Ok("1000 cases agree within 1e-12".into())
}

// ---------------------------------------------------------------------------
// 2. lazy vs prolific

fn criterion_2() -> Check {
    let mut cases = 0;
    for g in 1..=6usize {
        let gt = kps(&(0..g).collect::<Vec<_>>());
        let prolific = kps(&(0..g + 4).collect::<Vec<_>>());
        for m in 1..=g {
            let lazy = kps(&(0..m).collect::<Vec<_>>());
            for k in g + 1..=g + 5 {
                let pl = precision_recall_f1_at_k(&lazy, &gt, k).unwrap().precision;
                let pp = precision_recall_f1_at_k(&prolific, &gt, k)
                    .unwrap()
                    .precision;
                ensure!(
                    pl >= pp,
                    "P@{k}: lazy {pl} < prolific {pp} (|gt|={g}, m={m})"
                );
                let fl = f1_at_o(&lazy, &gt).unwrap().f1;
                let fp = f1_at_o(&prolific, &gt).unwrap().f1;
                ensure!(fp == 1.0 && fp >= fl, "F1@O: prolific {fp}, lazy {fl}");
                let bl = budget_accuracy_at_k(&lazy, &gt, k).unwrap();
                let bp = budget_accuracy_at_k(&prolific, &gt, k).unwrap();
                ensure!(bp >= bl, "B@{k}: prolific {bp} < lazy {bl}");
                cases += 1;
            }
        }
    }
    let mut r = rng(2);
    for case in 0..1000 {
        let (p_ids, g_ids, k) = random_case(&mut r);
        let b = budget_accuracy_at_k(&kps(&p_ids), &kps(&g_ids), k).unwrap();
        let bound = g_ids.len().min(k) as f64 / k as f64;
        ensure!(
            b <= bound + 1e-15,
            "random case {case}: B@{k} = {b} > bound {bound}"
        );
    }
    Ok(format!(
        "{cases} constructed cases, B@k bound on 1000 random cases"
    ))
}

// ---------------------------------------------------------------------------
// 3. constrained decoding contract

fn random_dataset(r: &mut ChaCha8Rng, words: usize, instances: usize) -> Dataset {
    let word = |r: &mut ChaCha8Rng| format!("w{}", r.gen_range(0..words));
    let items = (0..instances)
        .map(|i| {
            let text: Vec<String> = (0..r.gen_range(2..6)).map(|_| word(r)).collect();
            let mut labels: Vec<Label> = Vec::new();
            for _ in 0..r.gen_range(1..6) {
                let toks: Vec<String> = (0..r.gen_range(1..4)).map(|_| word(r)).collect();
                let k = Keyphrase::from_tokens(toks).unwrap();
                if labels.iter().all(|l| l.keyphrase != k) {
                    labels.push(Label {
                        keyphrase: k,
                        frequency: r.gen_range(1..5),
                    });
                }
            }
            Instance::new(format!("i{i}"), text.join(" "), labels).unwrap()
        })
        .collect();
    Dataset::new(items, "random")
}

fn random_model(r: &mut ChaCha8Rng, d: &Dataset, paradigm: Paradigm) -> NgramScorer {
    let vocab = build_vocab(d, 1).unwrap();
    let cfg = NgramConfig {
        order: r.gen_range(2..=5),
        alpha: r.gen_range(0.001..1.0),
        ..NgramConfig::default()
    };
    let seqs: Vec<_> = d
        .iter()
        .flat_map(|i| build_training_sequences(i, paradigm, &vocab, cfg.max_text_tokens).unwrap())
        .collect();
    NgramScorer::train(seqs.iter().map(|s| (s, 1)), vocab, cfg).unwrap()
}

fn criterion_3() -> Check {
    let mut r = rng(3);
    for case in 0..100 {
        let (words, n) = (r.gen_range(3..40), r.gen_range(3..30));
        let d = random_dataset(&mut r, words, n);
        let paradigm = *Paradigm::ALL.choose(&mut r).unwrap();
        let model = random_model(&mut r, &d, paradigm);
        let text = if r.gen_bool(0.8) {
            d.instances.choose(&mut r).unwrap().text.clone()
        } else {
            "never seen words".to_string()
        };
        let k = r.gen_range(1..=10);
        let mut req = DecodeRequest::new(Paradigm::Pusl, k);
        if r.gen_bool(0.5) {
            req.mode = DecodeMode::Sampled {
                temperature: r.gen_range(0.3..2.0),
                seed: r.gen(),
            };
        }
        let out = decode_pusl_topk(&model, &text, &req).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(
            out.termination == Termination::KReached,
            "case {case}: terminated by {:?}",
            out.termination
        );
        ensure!(
            out.keyphrases.len() == k,
            "case {case}: {} keyphrases for k={k}",
            out.keyphrases.len()
        );
        ensure!(
            out.keyphrases.iter().all(|kp| !kp.is_empty()),
            "case {case}: empty keyphrase"
        );
        let mut in_span = None;
        for &t in &out.trace {
            match t {
                BOK => in_span = Some(0),
                EOK => {
                    ensure!(
                        in_span.unwrap_or(0) >= 1,
                        "case {case}: span without words in trace"
                    );
                    in_span = None;
                }
                t if t as usize >= NUM_RESERVED || t == 1 => {
                    if let Some(n) = in_span.as_mut() {
                        *n += 1;
                    }
                }
                _ => {}
            }
        }
    }

    // every state over a 10-token vocabulary (7 reserved + 3 words), tails
    // of up to 5 tokens after the separator
    const V: usize = 10;
    let mut states = 0usize;
    let mut tail: Vec<TokenId> = Vec::new();
    let mut scores_rng = rng(33);
    fn visit(
        tail: &mut Vec<TokenId>,
        depth: usize,
        states: &mut usize,
        r: &mut ChaCha8Rng,
    ) -> Result<(), String> {
        let mut seq = vec![SEP];
        seq.extend_from_slice(tail);
        for k in 1..=3 {
            for limit in 1..=3 {
                let scores: Vec<f64> = (0..V).map(|_| r.gen_range(-20.0..0.0)).collect();
                let masked = pusl_topk_mask(&seq, scores, k, limit);
                ensure!(
                    masked.iter().any(|s| s.is_finite()),
                    "dead end after {seq:?} (k={k}, limit={limit})"
                );
                *states += 1;
            }
        }
        if depth < 5 {
            for t in 0..V as TokenId {
                tail.push(t);
                visit(tail, depth + 1, states, r)?;
                tail.pop();
            }
        }
        Ok(())
    }
    visit(&mut tail, 0, &mut states, &mut scores_rng)?;
    Ok(format!(
        "100 decodes hit k exactly; {states} mask states all admissible"
    ))
}

// ---------------------------------------------------------------------------
// 4. beam search vs exhaustive enumeration

/// All spans of 1..=max_len candidate tokens, scored independently.
fn exhaustive_top_k(model: &NgramScorer, text: &str, max_len: usize, k: usize) -> Vec<Keyphrase> {
    let vocab = model.vocab();
    let mut prompt = vocab.prompt(text, model.max_text_tokens());
    prompt.push(BOK);
    let mut candidates: Vec<TokenId> = vec![1];
    candidates.extend(vocab.word_ids());

    let mut all: Vec<(Vec<TokenId>, f64)> = Vec::new();
    let mut frontier: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (words, lp) in &frontier {
            let mut ctx = prompt.clone();
            ctx.extend_from_slice(words);
            let s = model.score_next(&ctx);
            for &c in &candidates {
                let mut w = words.clone();
                w.push(c);
                let lp = lp + s[c as usize];
                let mut ctx2 = ctx.clone();
                ctx2.push(c);
                let closed = lp + model.score_next(&ctx2)[EOK as usize];
                all.push((w.clone(), closed));
                next.push((w, lp));
            }
        }
        frontier = next;
    }
    all.sort_by(|a, b| {
        let na = a.1 / (a.0.len() + 1) as f64;
        let nb = b.1 / (b.0.len() + 1) as f64;
        nb.total_cmp(&na).then_with(|| a.0.cmp(&b.0))
    });
    let mut out: Vec<Keyphrase> = Vec::new();
    for (words, _) in all {
        let kp = Keyphrase::from_tokens(words.iter().map(|&w| vocab.render(&[w]))).unwrap();
        if !out.contains(&kp) {
            out.push(kp);
        }
        if out.len() == k {
            break;
        }
    }
    out
}

fn criterion_4() -> Check {
    let mut r = rng(4);
    let mut max_h = 0;
    for case in 0..50 {
        let (words, n) = (r.gen_range(1..=7), r.gen_range(2..10));
        let d = random_dataset(&mut r, words, n);
        let model = random_model(&mut r, &d, Paradigm::One2One);
        let words = model.vocab().len() - NUM_RESERVED;
        ensure!(words <= 7, "case {case}: {words} word tokens");
        let max_len = r.gen_range(1..=3);
        let c = words + 1;
        let h: usize = (1..=max_len).map(|l| c.pow(l as u32)).sum();
        max_h = max_h.max(h);
        let k = r.gen_range(1..=10.min(h));
        let text = d.instances.choose(&mut r).unwrap().text.clone();
        let req = DecodeRequest {
            max_tokens_per_kp: max_len,
            beam_width: h,
            ..DecodeRequest::new(Paradigm::One2One, k)
        };
        let beam = beam_decode_one2one(&model, &text, &req).map_err(|e| e.to_string())?;
        let oracle = exhaustive_top_k(&model, &text, max_len, k);
        ensure!(
            beam.keyphrases == oracle,
            "case {case}: beam {:?} vs exhaustive {:?}",
            beam.keyphrases,
            oracle
        );
    }
    Ok(format!(
        "50 models match exactly (up to {max_h} hypotheses)"
    ))
}

// ---------------------------------------------------------------------------
// 5. early-termination bias

fn criterion_5() -> Check {
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let sim = simulate(&SimulateConfig {
            universe: UniverseConfig {
                seed,
                ..UniverseConfig::default()
            },
            ..SimulateConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let curated = curate(&sim.log).map_err(|e| e.to_string())?;
        let splits = split_dataset(&curated, &SplitConfig::new([0.8, 0.1, 0.1], seed).unwrap())
            .map_err(|e| e.to_string())?;
        let k = round_k(2.0 * splits.mu_train);
        let mut uniq = BTreeMap::new();
        let mut cov = BTreeMap::new();
        for paradigm in [Paradigm::One2Seq, Paradigm::Pusl] {
            let cfg = TrainConfig {
                paradigm,
                ..TrainConfig::default()
            };
            let model = train(&splits.train, &BTreeMap::new(), &cfg).map_err(|e| e.to_string())?;
            let preds = decode_dataset(&model, &splits.test, &DecodeConfig::new(paradigm, k))
                .map_err(|e| e.to_string())?
                .predictions;
            let report = evaluate_dataset(&preds, &splits.test, k).map_err(|e| e.to_string())?;
            uniq.insert(paradigm, report.macro_avg.uniq_at_k);
            cov.insert(
                paradigm,
                coverage(&sim.universe, &preds, k).map_err(|e| e.to_string())?,
            );
        }
        let (ku, ks) = (uniq[&Paradigm::Pusl], uniq[&Paradigm::One2Seq]);
        let (cu, cs) = (cov[&Paradigm::Pusl], cov[&Paradigm::One2Seq]);
        ensure!(
            ku > ks,
            "seed {seed}: #K@{k} pusl {ku:.3} <= one2seq {ks:.3}"
        );
        ensure!(
            cu > cs,
            "seed {seed}: coverage@{k} pusl {cu:.4} <= one2seq {cs:.4}"
        );
        lines.push(format!(
            "seed {seed} k={k}: #K {ku:.2}/{ks:.2} cov {cu:.3}/{cs:.3}"
        ));
    }
    Ok(format!("pusl/one2seq: {}", lines.join("; ")))
}

// ---------------------------------------------------------------------------
// 6. split invariants

fn criterion_6() -> Check {
    let mut r = rng(6);
    for case in 0..20 {
        let n = r.gen_range(10..300);
        let texts = (n as f64 * 0.8) as usize;
        let instances = (0..n)
            .map(|i| {
                let mut labels: Vec<Label> = Vec::new();
                for _ in 0..r.gen_range(1..8) {
                    let kp = kp(&format!("kp{}", r.gen_range(0..40)));
                    if labels.iter().all(|l| l.keyphrase != kp) {
                        labels.push(Label {
                            keyphrase: kp,
                            frequency: 1,
                        });
                    }
                }
                Instance::new(
                    format!("i{i:04}"),
                    format!("text {}", r.gen_range(0..texts)),
                    labels,
                )
                .unwrap()
            })
            .collect();
        let d = Dataset::new(instances, "random");
        let a = r.gen_range(0.5..0.9);
        let b = r.gen_range(0.0..(1.0 - a));
        let ratios = [a, b, 1.0 - a - b];
        let cfg = SplitConfig::new(ratios, r.gen()).map_err(|e| e.to_string())?;
        let s = split_dataset(&d, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            s == split_dataset(&d, &cfg).unwrap(),
            "case {case}: split not reproducible"
        );

        let grouped = group_by_text(d.instances.clone());
        let total = grouped.len();
        let ids = |d: &Dataset| d.iter().map(|i| i.item_id.clone()).collect::<BTreeSet<_>>();
        let texts = |d: &Dataset| d.iter().map(|i| i.text.clone()).collect::<BTreeSet<_>>();
        let (tr, dv, te) = (ids(&s.train), ids(&s.dev), ids(&s.test));
        ensure!(
            tr.is_disjoint(&dv) && tr.is_disjoint(&te) && dv.is_disjoint(&te),
            "case {case}: overlapping ids"
        );
        let union: BTreeSet<_> = tr.iter().chain(&dv).chain(&te).cloned().collect();
        let expected: BTreeSet<_> = grouped.iter().map(|i| i.item_id.clone()).collect();
        ensure!(
            union == expected,
            "case {case}: splits do not partition the data"
        );
        ensure!(
            s.train.len() + s.dev.len() + s.test.len() == total,
            "case {case}: duplicated instances"
        );
        let (xt, xd, xe) = (texts(&s.train), texts(&s.dev), texts(&s.test));
        ensure!(
            xt.is_disjoint(&xd) && xt.is_disjoint(&xe) && xd.is_disjoint(&xe),
            "case {case}: text overlap"
        );
        for (len, ratio) in [s.train.len(), s.dev.len(), s.test.len()]
            .iter()
            .zip(ratios)
        {
            let target = ratio * total as f64;
            ensure!(
                (*len as f64 - target).abs() <= 1.0,
                "case {case}: size {len} vs target {target}"
            );
        }
        ensure!(
            s.mu_train == s.train.mean_labels(),
            "case {case}: mu_train mismatch"
        );
        let boundary = 2.0 * s.mu_train;
        let (nw, dvs) = (ids(&s.test_narrow), ids(&s.test_diverse));
        ensure!(
            nw.is_disjoint(&dvs),
            "case {case}: narrow and diverse overlap"
        );
        ensure!(
            nw.union(&dvs).cloned().collect::<BTreeSet<_>>() == te,
            "case {case}: narrow + diverse != test"
        );
        ensure!(
            s.test_narrow
                .iter()
                .all(|i| i.num_labels() as f64 <= boundary),
            "case {case}: narrow above 2mu"
        );
        ensure!(
            s.test_diverse
                .iter()
                .all(|i| i.num_labels() as f64 > boundary),
            "case {case}: diverse at or below 2mu"
        );
    }
    Ok("20 random datasets".into())
}

// ---------------------------------------------------------------------------
// 7. analysis values

#[allow(clippy::approx_constant)]
fn criterion_7() -> Check {
    let cv = coefficient_of_variation(&[1, 1, 4]).map_err(|e| e.to_string())?;
    ensure!(close(cv, 0.70711, 1e-5), "CV([1,1,4]) = {cv}");
    let g1 = lorenz_gini(&[0, 0, 0, 10]).map_err(|e| e.to_string())?.gini;
    ensure!(close(g1, 0.75, 1e-9), "gini([0,0,0,10]) = {g1}");
    let g2 = lorenz_gini(&[2, 2, 4]).map_err(|e| e.to_string())?.gini;
    ensure!(close(g2, 0.16667, 1e-5), "gini([2,2,4]) = {g2}");

    let mut r = rng(7);
    let mut datasets = 0;
    for _ in 0..20 {
        let records: Vec<InteractionRecord> = (0..r.gen_range(1..400))
            .map(|_| {
                let item = r.gen_range(0..60);
                InteractionRecord::new(
                    format!("i{item}"),
                    format!("text {item}"),
                    format!("kp{}", r.gen_range(0..30)),
                    r.gen_range(1..4),
                )
            })
            .collect();
        let d = curate(&records).map_err(|e| e.to_string())?;
        for t in 1..=12 {
            let q = quadrant_classify(&d, t as u64, t);
            ensure!(
                q.rare_diverse.count == 0,
                "rare-diverse = {} at threshold {t}",
                q.rare_diverse.count
            );
        }
        datasets += 1;
    }
    Ok(format!("cv={cv:.5} gini={g1} gini={g2:.5}; rare-diverse empty on {datasets} curated datasets x 12 thresholds"))
}

// ---------------------------------------------------------------------------
// 8. augmentation contract

fn criterion_8() -> Check {
    let sim = simulate(&SimulateConfig {
        universe: UniverseConfig {
            num_items: 400,
            seed: 8,
            ..UniverseConfig::default()
        },
        ..SimulateConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let curated = curate(&sim.log).map_err(|e| e.to_string())?;
    let splits = split_dataset(&curated, &SplitConfig::new([0.8, 0.1, 0.1], 8).unwrap())
        .map_err(|e| e.to_string())?;
    let model = train(&splits.train, &BTreeMap::new(), &TrainConfig::default())
        .map_err(|e| e.to_string())?;
    let mu = splits.train.mean_labels();
    let cfg = AugmentationConfig::new(mu, 8);
    let set = build_posttrain_set(&splits.train, &model, &cfg).map_err(|e| e.to_string())?;

    let augmented = set
        .provenance
        .values()
        .filter(|p| **p == Provenance::Augmented)
        .count();
    ensure!(augmented > 0, "no augmented instances accepted");
    for inst in &set.dataset {
        ensure!(
            inst.num_labels() as f64 > mu,
            "{} has {} labels <= {mu}",
            inst.item_id,
            inst.num_labels()
        );
        let original = splits
            .train
            .get(&inst.item_id)
            .ok_or("unknown id in post-train set")?;
        ensure!(
            original.keyphrases().all(|k| inst.has_label(k)),
            "{} lost original labels",
            inst.item_id
        );
    }
    let post_mean = set.dataset.mean_labels();
    ensure!(
        post_mean > mu,
        "post-train mean {post_mean} <= train mean {mu}"
    );
    ensure!(
        set.dataset.len() <= cfg.max_output_size,
        "default cap exceeded"
    );

    let cap = set.dataset.len() / 3;
    let capped = build_posttrain_set(
        &splits.train,
        &model,
        &AugmentationConfig {
            max_output_size: cap,
            ..cfg
        },
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        capped.dataset.len() == cap,
        "cap {cap}: got {}",
        capped.dataset.len()
    );
    ensure!(
        capped.provenance.len() == cap,
        "cap {cap}: provenance has {}",
        capped.provenance.len()
    );
    Ok(format!(
        "{} instances ({augmented} augmented, {} rejected), mean {post_mean:.2} > {mu:.2}; cap {cap} respected",
        set.dataset.len(),
        set.rejected
    ))
}

// ---------------------------------------------------------------------------
// 9. determinism

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn criterion_9() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_oxmc"))
            .args(["pipeline", "--seed", "7", "--output"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            status.status.success(),
            "pipeline failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
        runs.push(files(&out));
    }
    for required in [
        "manifest.json",
        "models/pusl.json",
        "predictions/pusl.jsonl",
        "reports/summary.tsv",
    ] {
        ensure!(runs[0].contains_key(required), "missing {required}");
    }
    ensure!(runs[0].keys().eq(runs[1].keys()), "file sets differ");
    for (name, bytes) in &runs[0] {
        ensure!(runs[1][name] == *bytes, "{name} differs between runs");
    }
    Ok(format!(
        "{} files byte-identical across two runs",
        runs[0].len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "metric oracle equivalence",
            criterion_1,
            Some(Duration::from_secs(5)),
        ),
        ("lazy vs prolific semantics", criterion_2, None),
        (
            "constrained decoding contract",
            criterion_3,
            Some(Duration::from_secs(10)),
        ),
        ("beam search vs exhaustive", criterion_4, None),
        (
            "early-termination bias",
            criterion_5,
            Some(Duration::from_secs(120)),
        ),
        ("split invariants", criterion_6, None),
        ("analysis values", criterion_7, None),
        ("augmentation contract", criterion_8, None),
        ("determinism", criterion_9, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match (result, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!(
                "criterion {} {name}: PASS ({detail}) [{elapsed:.2?}]",
                i + 1
            ),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}) [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
