use nli_explain::text::vocab::{BOS, EOS, PAD, UNK};
use nli_explain::text::{
    detokenize, encode_example, iterate_batches, tokenize, BatchOrder, EncodedExample, Example, Label, Limits, Split,
    Vocabulary,
};
use proptest::prelude::*;

fn words(n: usize) -> String {
    (0..n).map(|i| format!("w{}", i % 7)).collect::<Vec<_>>().join(" ")
}

fn vocab() -> Vocabulary {
    Vocabulary::from_tokens((0..7).map(|i| format!("w{i}"))).unwrap()
}

#[test]
fn long_premise_truncated_to_head() {
    let e = Example::new("x", Split::Train, Label::Neutral, &words(90), "w1 w2", &["w3 w4 w5 w6 w0"]);
    let enc = encode_example(&e, &vocab(), Limits::default()).unwrap();
    assert_eq!(enc.premise.len(), 84);
    assert_eq!(enc.premise, vocab().encode(&e.premise[..84]));
    assert_eq!(enc.explanations[0].len(), 7);
    assert_eq!(enc.explanations[0][0], BOS);
    assert_eq!(*enc.explanations[0].last().unwrap(), EOS);
}

#[test]
fn explanation_at_limit_keeps_everything() {
    let e = Example::new("x", Split::Train, Label::Neutral, "w1", "w2", &[&words(40)]);
    let enc = encode_example(&e, &vocab(), Limits::default()).unwrap();
    assert_eq!(enc.explanations[0].len(), 42);
    assert_eq!(enc.explanation_body(0), vocab().encode(&e.explanations[0]).as_slice());

    let e = Example::new("x", Split::Train, Label::Neutral, "w1", "w2", &[&words(41)]);
    assert_eq!(encode_example(&e, &vocab(), Limits::default()).unwrap().explanations[0].len(), 42);
}

#[test]
fn unknown_tokens_map_to_unk_and_empty_sentences_skip() {
    let e = Example::new("x", Split::Train, Label::Neutral, "w1 zebra", "w2", &["w3 w4 w5"]);
    let enc = encode_example(&e, &vocab(), Limits::default()).unwrap();
    assert_eq!(enc.premise[1], UNK);
    let empty = Example::new("y", Split::Train, Label::Neutral, "", "w2", &["w3"]);
    assert!(encode_example(&empty, &vocab(), Limits::default()).is_none());
}

fn toy_split(n: usize) -> Vec<EncodedExample> {
    (0..n)
        .map(|i| EncodedExample {
            id: format!("e{i}"),
            label: Label::from_index(i % 3).unwrap(),
            premise: vec![7; 1 + i % 5],
            hypothesis: vec![8; 1 + i % 3],
            explanations: vec![vec![BOS, 9, EOS]],
        })
        .collect()
}

#[test]
fn batch_sizes_with_partial_tail() {
    let split = toy_split(130);
    let sizes: Vec<usize> = iterate_batches(&split, 64, BatchOrder::Stable).iter().map(|b| b.len()).collect();
    assert_eq!(sizes, [64, 64, 2]);
}

#[test]
fn shuffle_determinism() {
    let split = toy_split(1000);
    let order = |seed, epoch| -> Vec<usize> {
        iterate_batches(&split, 64, BatchOrder::Shuffled { seed, epoch })
            .iter()
            .flat_map(|b| b.indices.clone())
            .collect()
    };
    assert_eq!(order(17, 0), order(17, 0));
    assert_ne!(order(17, 0), order(18, 0));
    assert_ne!(order(17, 0), order(17, 1));
    let mut sorted = order(17, 3);
    sorted.sort();
    assert_eq!(sorted, (0..1000).collect::<Vec<_>>());
    let stable: Vec<usize> =
        iterate_batches(&split, 64, BatchOrder::Stable).iter().flat_map(|b| b.indices.clone()).collect();
    assert_eq!(stable, (0..1000).collect::<Vec<_>>());
}

#[test]
fn pad_mask_complements_lengths() {
    let split = toy_split(20);
    for b in iterate_batches(&split, 8, BatchOrder::Stable) {
        for i in 0..b.len() {
            let mask = b.premise.pad_mask(i);
            assert_eq!(mask.iter().filter(|&&m| !m).count(), b.premise.lengths[i]);
            assert!(b.premise.lengths[i] <= b.premise.width());
            for (t, &m) in mask.iter().enumerate() {
                assert_eq!(m, b.premise.ids[i][t] == PAD && t >= b.premise.lengths[i]);
            }
            assert_eq!(b.premise.row(i), split[b.indices[i]].premise.as_slice());
        }
    }
}

proptest! {
    #[test]
    fn encode_decode_round_trip(ws in proptest::collection::vec(0usize..7, 1..84)) {
        let v = vocab();
        let sentence: Vec<String> = ws.iter().map(|i| format!("w{i}")).collect();
        let text = detokenize(&sentence);
        let e = Example::new("p", Split::Train, Label::Entailment, &text, "w0", &["w1 w2 w3"]);
        let enc = encode_example(&e, &v, Limits::default()).unwrap();
        prop_assert!(enc.premise.iter().all(|&i| i < v.len()));
        prop_assert_eq!(detokenize(&v.decode(&enc.premise)), text.clone());
        prop_assert_eq!(tokenize(&text), sentence);
    }
}
