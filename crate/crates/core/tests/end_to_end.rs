use oxmc_core::analysis::{label_count_histogram, quadrant_classify, Quadrant};
use oxmc_core::biassim::{coverage, generate_universe, simulate_annotations, UniverseConfig};
use oxmc_core::corpus::curate;
use oxmc_core::decoder::{decode, DecodeRequest, Termination};
use oxmc_core::metrics::{evaluate_dataset, Prediction};
use oxmc_core::seqmodel::{
    build_training_sequences, build_vocab, train_ngram, NgramConfig, Paradigm,
};
use oxmc_core::splitter::{split_dataset, SplitConfig};

#[test]
fn simulated_corpus_through_every_paradigm() {
    let u = generate_universe(&UniverseConfig {
        num_items: 300,
        seed: 11,
        ..UniverseConfig::default()
    })
    .unwrap();
    let d = curate(&simulate_annotations(&u, 1500, 11).unwrap()).unwrap();

    for inst in &d {
        assert!(inst.num_labels() as u64 <= inst.total_interactions());
        let truth = &u.get(&inst.item_id).unwrap().labels;
        assert!(inst.keyphrases().all(|k| truth.contains(k)));
    }
    assert!(d.mean_labels() < u.mean_labels());
    assert!(label_count_histogram(&d).cv.unwrap() > 0.0);
    assert_eq!(
        quadrant_classify(&d, 5, 5)
            .cell(Quadrant::RareDiverse)
            .count,
        0
    );

    let s = split_dataset(&d, &SplitConfig::new([0.8, 0.1, 0.1], 11).unwrap()).unwrap();
    let vocab = build_vocab(&s.train, 1).unwrap();
    let k = 4;
    for paradigm in Paradigm::ALL {
        let seqs: Vec<_> = s
            .train
            .iter()
            .flat_map(|i| build_training_sequences(i, paradigm, &vocab, 32).unwrap())
            .collect();
        let model = train_ngram(&seqs, vocab.clone(), NgramConfig::default()).unwrap();
        let req = DecodeRequest::new(paradigm, k);
        let preds: Vec<Prediction> = s
            .test
            .iter()
            .map(|i| {
                let r = decode(&model, &i.text, &req).unwrap();
                if paradigm == Paradigm::Pusl {
                    assert_eq!(r.termination, Termination::KReached);
                    assert_eq!(r.keyphrases.len(), k);
                }
                Prediction::new(i.item_id.clone(), r.keyphrases)
            })
            .collect();
        let report = evaluate_dataset(&preds, &s.test, k).unwrap();
        let m = report.macro_avg;
        for v in [
            m.p_at_k, m.r_at_k, m.f1_at_k, m.p_at_o, m.r_at_o, m.f1_at_o, m.b_at_k,
        ] {
            assert!((0.0..=1.0).contains(&v), "{paradigm}: {m:?}");
        }
        assert!(m.uniq_at_k <= k as f64);
        let cov = coverage(&u, &preds, k).unwrap();
        assert!((0.0..=1.0).contains(&cov));
    }
}
