mod common;

use common::{brute_bleu, random_bleu_corpus, random_example, toy_model, toy_table, toy_vocab};
use nli_explain::autodiff::{Graph, Mode};
use nli_explain::evaluation::{
    bleu, corpus_bleu, evaluate, inter_annotator_bleu, label_accuracy, perplexity, transfer_eval, write_dump,
    EvalReport,
};
use nli_explain::model::{encode_sentence, feature_vector, Conditioning, Decoder, ModelConfig, Role, Variant};
use nli_explain::text::vocab::LABEL_BASE;
use nli_explain::text::{ColumnMap, EncodedExample, Example, Label, Split};
use nli_explain::training::{train, TrainConfig, TrainData};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn examples(seed: u64, n: usize) -> Vec<EncodedExample> {
    let mut r = rng(seed);
    (0..n).map(|i| random_example(&mut r, i)).collect()
}

#[test]
fn bleu_matches_brute_force_oracle() {
    let mut r = rng(1);
    for _ in 0..20 {
        let n = r.gen_range(1..8);
        let (c, refs) = random_bleu_corpus(&mut r, n);
        let got = corpus_bleu(&c, &refs).unwrap();
        let want = brute_bleu(&c, &refs);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

fn corpus_strategy() -> impl Strategy<Value = (Vec<Vec<u8>>, Vec<Vec<Vec<u8>>>)> {
    let sent = || prop::collection::vec(0u8..5, 1..10);
    prop::collection::vec((sent(), prop::collection::vec(sent(), 1..4)), 1..6).prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #[test]
    fn bleu_bounded_and_monotone_in_self_reference((c, refs) in corpus_strategy()) {
        let s = corpus_bleu(&c, &refs).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        let with_self: Vec<Vec<Vec<u8>>> = refs.iter().zip(&c).map(|(r, c)| {
            let mut r = r.clone();
            r.push(c.clone());
            r
        }).collect();
        prop_assert!(corpus_bleu(&c, &with_self).unwrap() >= s - 1e-15);
        prop_assert_eq!(corpus_bleu(&c, &c.iter().map(|x| vec![x.clone()]).collect::<Vec<_>>()).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_invariant_under_joint_shuffle(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40), seed in 0u64..1000) {
        let to = |i: usize| Label::from_index(i).unwrap();
        let (p, g): (Vec<Label>, Vec<Label>) = pairs.iter().map(|&(a, b)| (to(a), to(b))).unzip();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng(seed));
        let (p2, g2): (Vec<Label>, Vec<Label>) = shuffled.iter().map(|&(a, b)| (to(a), to(b))).unzip();
        prop_assert_eq!(label_accuracy(&p, &g).unwrap(), label_accuracy(&p2, &g2).unwrap());
    }
}

#[test]
fn bleu_hand_examples() {
    let w = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
    assert_eq!(bleu(&w("a dog runs"), &[w("a dog runs")]).unwrap(), 1.0);
    let s = bleu(&w("the the the the"), &[w("the cat")]).unwrap();
    assert!((s - brute_bleu(&[w("the the the the")], &[vec![w("the cat")]])).abs() < 1e-12);
}

fn example_with(expls: &[&str]) -> Example {
    Example::new("x", Split::Test, Label::Entailment, "a man sleeps", "a person rests", expls)
}

#[test]
fn inter_annotator_protocol() {
    let same = vec![example_with(&["a man is a person", "a man is a person", "a man is a person"]); 3];
    assert_eq!(inter_annotator_bleu(&same).unwrap(), (1.0, 0));

    let mut mixed = vec![example_with(&["one two three four", "one two three", "zebra yak quail"])];
    mixed.push(example_with(&["only one"]));
    let (score, excluded) = inter_annotator_bleu(&mixed).unwrap();
    assert_eq!(excluded, 1);
    assert!(score < 1e-3);
    assert!(inter_annotator_bleu(&[example_with(&["a", "b"])]).is_err());
}

fn trained_pred_expl() -> (nli_explain::model::Model, nli_explain::text::Vocabulary, Vec<EncodedExample>) {
    let vocab = toy_vocab();
    let model_cfg = ModelConfig::toy(Variant::PredExpl, vocab.len());
    let table = toy_table(&vocab, model_cfg.emb_dim);
    let data = examples(2, 24);
    let mut cfg = TrainConfig::new(model_cfg, 5);
    cfg.epochs = 3;
    cfg.batch_size = 8;
    let td = TrainData { train: &data[..16], val: &data[16..], vocab: &vocab, embeddings: &table };
    let (model, _) = train(&cfg, td, None).unwrap();
    (model, vocab, data)
}

#[test]
fn perplexity_matches_per_token_reaccumulation() {
    let (model, _, data) = trained_pred_expl();
    let ppl = perplexity(&model, &data).unwrap();
    assert!(ppl >= 1.0);
    let (mut nll, mut count) = (0.0f64, 0usize);
    for ex in &data {
        let mut g = Graph::new(&model.params);
        let p = encode_sentence(&mut g, Role::Premise, &ex.premise, ex.premise.len()).unwrap();
        let h = encode_sentence(&mut g, Role::Hypothesis, &ex.hypothesis, ex.hypothesis.len()).unwrap();
        let f = feature_vector(&mut g, p.u, h.u).unwrap();
        let mut dec = Decoder::start(&mut g, f, Conditioning::Plain(f), 0.5, Mode::Eval, &mut rng(0)).unwrap();
        let gold = &ex.explanations[0];
        let mut prev = LABEL_BASE + ex.label.index();
        for &t in &gold[1..] {
            let probs = dec.step(&mut g, prev).unwrap();
            nll -= (g.value(probs)[t] as f64).max(1e-12).ln();
            count += 1;
            prev = t;
        }
    }
    let oracle = (nll / count as f64).exp();
    assert!(((ppl - oracle) / oracle).abs() < 1e-5, "{ppl} vs {oracle}");
}

#[test]
fn evaluation_report_contents() {
    let (model, _, data) = trained_pred_expl();
    let (a, preds) = evaluate(&model, "val", &data).unwrap();
    let (b, _) = evaluate(&model, "val", &data).unwrap();
    assert_eq!(a, b);
    assert_eq!(preds.len(), data.len());
    assert!(a.accuracy.is_some() && a.perplexity.unwrap() >= 1.0);
    let bleu = a.bleu.unwrap();
    assert!((0.0..=1.0).contains(&bleu));
    assert!(a.to_table().contains("BLEU"));
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), a);

    let (clf, _) = toy_model(Variant::BilstmMax, 3);
    let (r, _) = evaluate(&clf, "val", &data).unwrap();
    assert!(r.accuracy.is_some() && r.perplexity.is_none() && r.bleu.is_none());
}

#[test]
fn transfer_is_read_only_and_skips_unmappable_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sick.csv");
    std::fs::write(
        &path,
        "sentence_A,sentence_B,entailment_label\n\
         w1 w2 w3,w4 w5,ENTAILMENT\n\
         w6 w7,w8,NEUTRAL\n\
         w9 w10,w11 w12,unrelated\n\
         w13,w14 w15,CONTRADICTION\n\
         ,w3,NEUTRAL\n",
    )
    .unwrap();
    let original = std::fs::read(&path).unwrap();
    let cols = ColumnMap::pairs("entailment_label", "sentence_A", "sentence_B");
    let (model, vocab) = toy_model(Variant::PredExpl, 4);
    let before = model.params.fingerprint();
    let (a, dump) = transfer_eval(&model, &vocab, &path, &cols).unwrap();
    let (b, _) = transfer_eval(&model, &vocab, &path, &cols).unwrap();
    assert_eq!(a, b);
    assert_eq!(model.params.fingerprint(), before);
    assert_eq!(std::fs::read(&path).unwrap(), original);
    assert_eq!((a.examples, a.skipped), (3, 2));
    assert_eq!(dump.len(), 3);
    assert_eq!(dump[0].premise, "w1 w2 w3");

    let out = dir.path().join("dump.csv");
    write_dump(&out, &dump).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("id,premise,hypothesis,predicted_label,explanation"));

    let (clf, _) = toy_model(Variant::BilstmMax, 4);
    let (r, d) = transfer_eval(&clf, &vocab, &path, &cols).unwrap();
    assert!(r.accuracy.is_some() && d.is_empty());
}
