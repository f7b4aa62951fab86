mod common;

use common::{random_example, random_ids, toy_model, TOY_VOCAB};
use nli_explain::autodiff::gradcheck::{check_gradients, GradCheckOptions};
use nli_explain::autodiff::{sgd_step, Graph, Mode, ParamStore, SgdConfig, SgdState, Tensor};
use nli_explain::model::{
    argmax, attention_step, classify, encode_sentence, example_loss, explain_then_predict, feature_vector, greedy,
    parameter_layout, Conditioning, Decoder, Model, ModelConfig, Role, Variant,
};
use nli_explain::text::vocab::{BOS, EOS, LABEL_BASE};
use nli_explain::text::Label;
use nli_explain::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn feature_vector_examples() {
    let s = ParamStore::<f64>::new();
    let mut g = Graph::new(&s);
    let u = g.vector(vec![1.0, 2.0]).unwrap();
    let v = g.vector(vec![3.0, 1.0]).unwrap();
    let f = feature_vector(&mut g, u, v).unwrap();
    assert_eq!(g.value(f), &[1.0, 2.0, 3.0, 1.0, 2.0, 1.0, 3.0, 2.0]);

    let same = feature_vector(&mut g, u, u).unwrap();
    assert_eq!(&g.value(same)[4..6], &[0.0, 0.0]);

    let mut r = rng(3);
    let a: Vec<f64> = (0..16).map(|_| r.gen_range(-2.0..2.0)).collect();
    let b: Vec<f64> = (0..16).map(|_| r.gen_range(-2.0..2.0)).collect();
    let (ua, vb) = (g.vector(a.clone()).unwrap(), g.vector(b.clone()).unwrap());
    let f = feature_vector(&mut g, ua, vb).unwrap();
    let vals = g.value(f);
    for i in 0..16 {
        assert!(vals[32 + i] >= 0.0);
        assert!((vals[48 + i] - a[i] * b[i]).abs() < 1e-6);
    }
    let short = g.vector(vec![1.0]).unwrap();
    assert!(matches!(feature_vector(&mut g, u, short), Err(Error::Shape { .. })));
}

fn mlp_store(input: usize, width: usize, seed: u64) -> ParamStore<f64> {
    let mut r = rng(seed);
    let mut s = ParamStore::new();
    for (layer, (i, o)) in [(input, width), (width, width), (width, 3)].into_iter().enumerate() {
        let w = (0..i * o).map(|_| r.gen_range(-0.5..0.5)).collect();
        let b = (0..o).map(|_| r.gen_range(-0.5..0.5)).collect();
        s.insert(format!("mlp.{layer}.w"), Tensor::new(vec![o, i], w).unwrap(), true).unwrap();
        s.insert(format!("mlp.{layer}.b"), Tensor::new(vec![o], b).unwrap(), true).unwrap();
    }
    s
}

#[test]
fn classifier_zero_weights_uses_last_bias() {
    let mut s = mlp_store(6, 4, 1);
    for p in s.iter_mut() {
        p.tensor.data.iter_mut().for_each(|v| *v = 0.0);
    }
    s.get_mut("mlp.2.b").unwrap().tensor.data = vec![0.5, 0.2, 0.2];
    let mut g = Graph::new(&s);
    let f = g.vector(vec![1.0; 6]).unwrap();
    let logits = classify(&mut g, f).unwrap();
    assert_eq!(argmax(g.value(logits)), 0);
    // Ties resolve to the lowest index.
    assert_eq!(argmax(&[0.2f64, 0.7, 0.7]), 1);
    assert_eq!(argmax(&[0.1f64, 0.1, 0.1]), 0);
}

fn matvec(w: &[f64], rows: usize, x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..rows).map(|r| (0..cols).map(|c| w[r * cols + c] * x[c]).sum()).collect()
}

fn matmul(a: &[f64], ar: usize, ac: usize, b: &[f64], bc: usize) -> Vec<f64> {
    let mut out = vec![0.0; ar * bc];
    for i in 0..ar {
        for k in 0..ac {
            for j in 0..bc {
                out[i * bc + j] += a[i * ac + k] * b[k * bc + j];
            }
        }
    }
    out
}

#[test]
fn classifier_collapses_to_one_affine_map() {
    let (input, width) = (10, 6);
    let s = mlp_store(input, width, 9);
    let d = |n: &str| s.get(n).unwrap().tensor.data.clone();
    // Collapse: W = W2 W1 W0, b = W2 W1 b0 + W2 b1 + b2.
    let w21 = matmul(&d("mlp.2.w"), 3, width, &d("mlp.1.w"), width);
    let w = matmul(&w21, 3, width, &d("mlp.0.w"), input);
    let b: Vec<f64> = matvec(&w21, 3, &d("mlp.0.b"))
        .iter()
        .zip(matvec(&d("mlp.2.w"), 3, &d("mlp.1.b")))
        .zip(d("mlp.2.b"))
        .map(|((a, b), c)| a + b + c)
        .collect();
    let mut r = rng(4);
    for _ in 0..20 {
        let x: Vec<f64> = (0..input).map(|_| r.gen_range(-1.0..1.0)).collect();
        let expect: Vec<f64> = matvec(&w, 3, &x).iter().zip(&b).map(|(a, b)| a + b).collect();
        let mut g = Graph::new(&s);
        let f = g.vector(x).unwrap();
        let logits = classify(&mut g, f).unwrap();
        for (a, e) in g.value(logits).iter().zip(&expect) {
            assert!((a - e).abs() < 1e-5);
        }
    }
}

#[test]
fn permuting_output_rows_permutes_logits() {
    let s = mlp_store(5, 4, 2);
    let mut swapped = s.clone();
    {
        let w = &mut swapped.get_mut("mlp.2.w").unwrap().tensor.data;
        for c in 0..4 {
            w.swap(c, 4 + c);
        }
        swapped.get_mut("mlp.2.b").unwrap().tensor.data.swap(0, 1);
    }
    let x = vec![0.3, -0.2, 0.9, 0.1, -0.7];
    let run = |s: &ParamStore<f64>| {
        let mut g = Graph::new(s);
        let f = g.vector(x.clone()).unwrap();
        let l = classify(&mut g, f).unwrap();
        g.value(l).to_vec()
    };
    let (a, b) = (run(&s), run(&swapped));
    assert_eq!([a[1], a[0], a[2]], [b[0], b[1], b[2]]);
}

#[test]
fn encoder_max_pool_matches_brute_force() {
    let (model, _) = toy_model(Variant::BilstmMax, 1);
    let mut r = rng(5);
    for _ in 0..20 {
        let ids = random_ids(&mut r, 1, 9);
        let mut g = Graph::new(&model.params);
        let e = encode_sentence(&mut g, Role::Premise, &ids, ids.len()).unwrap();
        let states = g.value(e.states).to_vec();
        let u = g.value(e.u);
        let d = u.len();
        assert_eq!(d, 2 * model.config.enc_hidden);
        for i in 0..d {
            let m = (0..ids.len()).map(|t| states[t * d + i]).fold(f32::NEG_INFINITY, f32::max);
            assert_eq!(u[i], m);
        }
        if ids.len() == 1 {
            assert_eq!(u, &states[..]);
        }
    }
    let mut g = Graph::new(&model.params);
    assert!(matches!(encode_sentence(&mut g, Role::Premise, &[0, 0], 0), Err(Error::EmptySequence(_))));
}

#[test]
fn padding_leaves_encoding_unchanged() {
    let (model, _) = toy_model(Variant::PredExpl, 2);
    let mut r = rng(6);
    for _ in 0..30 {
        let ids = random_ids(&mut r, 1, 8);
        let mut padded = ids.clone();
        padded.resize(ids.len() + r.gen_range(1..10), 0);
        let a = model.encode(Role::Hypothesis, &ids, ids.len()).unwrap();
        let b = model.encode(Role::Hypothesis, &padded, ids.len()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn swapping_the_label_token_changes_first_step() {
    let (model, _) = toy_model(Variant::PredExpl, 3);
    let ex = random_example(&mut rng(7), 0);
    let step1 = |label: Label| {
        let mut g = Graph::new(&model.params);
        let p = encode_sentence(&mut g, Role::Premise, &ex.premise, ex.premise.len()).unwrap();
        let h = encode_sentence(&mut g, Role::Hypothesis, &ex.hypothesis, ex.hypothesis.len()).unwrap();
        let f = feature_vector(&mut g, p.u, h.u).unwrap();
        let mut r = rng(0);
        let mut dec = Decoder::start(&mut g, f, Conditioning::Plain(f), 0.5, Mode::Eval, &mut r).unwrap();
        let probs = dec.step(&mut g, LABEL_BASE + label.index()).unwrap();
        g.value(probs).to_vec()
    };
    let (e, c) = (step1(Label::Entailment), step1(Label::Contradiction));
    assert!(e.iter().zip(&c).any(|(a, b)| a != b));
}

#[test]
fn greedy_decoding_is_capped() {
    for variant in [Variant::Hyp2Expl, Variant::PredExpl, Variant::ExplPredAtt] {
        let (mut model, _) = toy_model(variant, 4);
        model.params.get_mut("dec.out.b").unwrap().tensor.data[EOS] = -1e4;
        let ex = random_example(&mut rng(8), 0);
        let pred = model.predict(&ex).unwrap();
        assert_eq!(pred.explanation.unwrap().len(), 40, "{variant}");

        let mut g = Graph::new(&model.params);
        let v = encode_sentence(&mut g, Role::Hypothesis, &ex.hypothesis, ex.hypothesis.len()).unwrap().u;
        if variant == Variant::Hyp2Expl {
            let mut dec = Decoder::start(&mut g, v, Conditioning::Plain(v), 0.5, Mode::Eval, &mut rng(0)).unwrap();
            assert_eq!(greedy(&mut g, &mut dec, BOS, 7).unwrap().len(), 7);
        }
    }
}

#[test]
fn teacher_forced_nll_falls_under_sgd() {
    let (mut model, _) = toy_model(Variant::PredExpl, 5);
    let ex = random_example(&mut rng(9), 0);
    let nll = |m: &Model| m.teacher_forced_stats(&ex).unwrap().nll;
    let before = nll(&model);
    let state = SgdState::new(SgdConfig { lr: 0.5, ..SgdConfig::default() }).unwrap();
    for step in 0..50u64 {
        let grads = {
            let mut g = Graph::new(&model.params);
            let parts = example_loss(&mut g, &model.config, &ex, 0.6, Mode::Train, &mut rng(step)).unwrap();
            g.backward(parts.total).unwrap()
        };
        model.params.accumulate(&grads);
        sgd_step(&mut model.params, &state).unwrap();
    }
    let after = nll(&model);
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn every_variant_passes_a_sampled_gradient_check() {
    let opts = GradCheckOptions { max_coords_per_param: Some(12), ..GradCheckOptions::default() };
    for variant in Variant::ALL {
        let (model, _) = toy_model(variant, 11);
        let ex = random_example(&mut rng(12), 0);
        let cfg = model.config.clone();
        let report = check_gradients(&model.params, &opts, |g| {
            Ok(example_loss(g, &cfg, &ex, 0.6, Mode::Train, &mut rng(99))?.total)
        })
        .unwrap();
        assert!(report.passes(1e-4), "{variant}: {report:?}");
    }
}

fn att_states(g: &mut Graph<'_, f64>, rows: &[Vec<f64>]) -> nli_explain::autodiff::Var {
    let flat: Vec<f64> = rows.concat();
    g.constant(vec![rows.len(), rows[0].len()], flat).unwrap()
}

#[test]
fn attention_single_token_and_uniform_cases() {
    let (model, _) = toy_model(Variant::ExplPredAtt, 6);
    let params = model.params.cast::<f64>();
    let d = 2 * model.config.enc_hidden;
    let mut r = rng(10);
    let row = |r: &mut ChaCha8Rng| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let hdec: Vec<f64> = (0..model.config.dec_hidden).map(|_| r.gen_range(-1.0..1.0)).collect();

    let mut g = Graph::new(&params);
    let one = row(&mut r);
    let hp = att_states(&mut g, std::slice::from_ref(&one));
    let same = row(&mut r);
    let hh = att_states(&mut g, &[same.clone(), same.clone(), same.clone(), row(&mut r)]);
    let q = g.vector(hdec).unwrap();
    let out = attention_step(&mut g, hp, &[true], hh, &[true, true, true, false], q, 84).unwrap();
    assert_eq!(g.value(out.weights_p), &[1.0]);
    // p equals tanh(W2 h + b2) for the single premise token.
    let w2 = params.get("att.premise.w2").unwrap().tensor.data.clone();
    let b2 = &params.get("att.premise.b2").unwrap().tensor.data;
    let proj: Vec<f64> = matvec(&w2, b2.len(), &one).iter().zip(b2).map(|(a, b)| (a + b).tanh()).collect();
    for (a, e) in g.value(out.p).iter().zip(&proj) {
        assert!((a - e).abs() < 1e-12);
    }
    let wh = g.value(out.weights_h);
    assert_eq!(wh[3], 0.0);
    for &w in &wh[..3] {
        assert!((w - 1.0 / 3.0).abs() < 1e-12);
    }
    assert!((wh.iter().sum::<f64>() - 1.0).abs() < 1e-6);

    let none = attention_step(&mut g, hp, &[false], hh, &[true; 4], q, 84);
    assert!(matches!(none, Err(Error::AllMasked)));
}

#[test]
fn structural_fidelity() {
    let names = |v: Variant| -> Vec<String> {
        parameter_layout(&ModelConfig::toy(v, TOY_VOCAB)).into_iter().map(|(n, _, _)| n).collect()
    };
    assert!(!names(Variant::Hyp2Lbl).iter().any(|n| n.starts_with("enc.premise")));
    assert!(!names(Variant::Hyp2Expl).iter().any(|n| n.starts_with("enc.premise") || n.starts_with("mlp")));
    for v in [Variant::ExplPredSeq2Seq, Variant::ExplPredAtt] {
        assert!(!names(v).iter().any(|n| n.starts_with("mlp")), "{v}");
        assert!(!v.label_conditioned());
    }
    assert!(names(Variant::ExplPredAtt).iter().any(|n| n.starts_with("att.premise")));
    assert!(!names(Variant::ExplPredSeq2Seq).iter().any(|n| n.starts_with("att.")));
    // AutoEnc: one decoder, reused for both reconstructions.
    let auto = names(Variant::AutoEnc);
    assert_eq!(auto.iter().filter(|n| n.starts_with("dec.lstm")).count(), 3);
    assert!(auto.iter().any(|n| n.starts_with("mlp")));

    // Two heads with equal shapes but separate arrays.
    let (model, _) = toy_model(Variant::ExplPredAtt, 7);
    for part in ["w1", "b1", "wc", "bc", "w2", "b2"] {
        let p = model.params.get(&format!("att.premise.{part}")).unwrap();
        let h = model.params.get(&format!("att.hypothesis.{part}")).unwrap();
        assert_eq!(p.tensor.shape, h.tensor.shape);
        assert_ne!(p.tensor.data, h.tensor.data);
    }
}

#[test]
fn autoenc_decoder_receives_gradient_from_both_targets() {
    let (model, _) = toy_model(Variant::AutoEnc, 8);
    let ex = random_example(&mut rng(13), 0);
    let mut g = Graph::new(&model.params);
    let parts = example_loss(&mut g, &model.config, &ex, 0.5, Mode::Eval, &mut rng(0)).unwrap();
    assert_eq!(parts.target_tokens, ex.premise.len() + ex.hypothesis.len() + 2);
    let id = model.params.id("dec.lstm.w_ih").unwrap();
    let grads = g.backward(parts.total).unwrap();
    assert!(grads.get(id).unwrap().iter().any(|&v| v != 0.0));
}

#[test]
fn expl_to_label_is_deterministic_and_rejects_empty() {
    let (model, _) = toy_model(Variant::ExplToLbl, 9);
    let body = vec![8, 9, 10, 11];
    assert_eq!(model.expl_to_label(&body).unwrap(), model.expl_to_label(&body).unwrap());
    assert!(model.expl_to_label(&[]).is_err());
}

#[test]
fn pipeline_flags_empty_explanations() {
    let (mut gen, _) = toy_model(Variant::ExplPredSeq2Seq, 10);
    let (clf, _) = toy_model(Variant::ExplToLbl, 11);
    gen.params.get_mut("dec.out.b").unwrap().tensor.data[EOS] = 1e4;
    let ex = random_example(&mut rng(14), 0);
    let out = explain_then_predict(&gen, &clf, &ex.premise, &ex.hypothesis).unwrap();
    assert!(out.empty_explanation);
    assert!(out.explanation.is_empty());

    let (gen, _) = toy_model(Variant::ExplPredSeq2Seq, 12);
    let out = explain_then_predict(&gen, &clf, &ex.premise, &ex.hypothesis).unwrap();
    if !out.explanation.is_empty() {
        assert_eq!(out.label, clf.expl_to_label(&out.explanation).unwrap());
    }
    assert!(explain_then_predict(&clf, &clf, &ex.premise, &ex.hypothesis).is_err());
}

#[test]
fn pred_expl_decodes_from_the_predicted_label() {
    let (model, _) = toy_model(Variant::PredExpl, 13);
    let ex = random_example(&mut rng(15), 0);
    let pred = model.predict(&ex).unwrap();
    let label = pred.label.unwrap();
    assert_eq!(label, model.predict_label(&ex).unwrap());

    let mut g = Graph::new(&model.params);
    let p = encode_sentence(&mut g, Role::Premise, &ex.premise, ex.premise.len()).unwrap();
    let h = encode_sentence(&mut g, Role::Hypothesis, &ex.hypothesis, ex.hypothesis.len()).unwrap();
    let f = feature_vector(&mut g, p.u, h.u).unwrap();
    let mut dec = Decoder::start(&mut g, f, Conditioning::Plain(f), 0.5, Mode::Eval, &mut rng(0)).unwrap();
    let manual = greedy(&mut g, &mut dec, LABEL_BASE + label.index(), 40).unwrap();
    assert_eq!(pred.explanation.unwrap(), manual);
}
