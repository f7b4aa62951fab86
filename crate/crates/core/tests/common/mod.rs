#![allow(dead_code)]

use nli_explain::model::{Model, ModelConfig, Variant};
use nli_explain::quality::{instantiate, Template, TemplateClass, TEMPLATES};
use nli_explain::text::{
    encode_example, wrap, EmbeddingTable, EncodedExample, Example, Label, Limits, Split, Vocabulary,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOY_VOCAB: usize = 30;

/// 23 plain words after the 7 reserved tokens.
pub fn toy_vocab() -> Vocabulary {
    Vocabulary::from_tokens((0..TOY_VOCAB - 7).map(|i| format!("w{i}"))).unwrap()
}

pub fn toy_table(vocab: &Vocabulary, dim: usize) -> EmbeddingTable {
    EmbeddingTable::random(vocab, dim, 17)
}

pub fn toy_model(variant: Variant, seed: u64) -> (Model, Vocabulary) {
    let vocab = toy_vocab();
    let cfg = ModelConfig::toy(variant, vocab.len());
    let table = toy_table(&vocab, cfg.emb_dim);
    (Model::new(cfg, &table, seed).unwrap(), vocab)
}

/// Random ids drawn from the plain-word range.
pub fn random_ids(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> Vec<usize> {
    let n = rng.gen_range(min_len..=max_len);
    (0..n).map(|_| rng.gen_range(7..TOY_VOCAB)).collect()
}

pub fn random_example(rng: &mut ChaCha8Rng, id: usize) -> EncodedExample {
    EncodedExample {
        id: format!("ex{id}"),
        label: Label::from_index(rng.gen_range(0..3)).unwrap(),
        premise: random_ids(rng, 1, 7),
        hypothesis: random_ids(rng, 1, 5),
        explanations: vec![wrap(random_ids(rng, 1, 6)), wrap(random_ids(rng, 1, 6))],
    }
}

/// Straight-line corpus BLEU-4: explicit n-gram lists and linear-scan counting.
pub fn brute_bleu(cands: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> f64 {
    let grams = |s: &[String], n: usize| -> Vec<Vec<String>> {
        if s.len() < n {
            return vec![];
        }
        (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
    };
    let count = |list: &[Vec<String>], g: &Vec<String>| list.iter().filter(|x| *x == g).count();
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (c, rs) in cands.iter().zip(refs) {
        c_len += c.len();
        let mut best = rs[0].len();
        for r in rs {
            let (d, bd) = ((r.len() as i64 - c.len() as i64).abs(), (best as i64 - c.len() as i64).abs());
            if d < bd || (d == bd && r.len() < best) {
                best = r.len();
            }
        }
        r_len += best;
        for n in 1..=4 {
            let cg = grams(c, n);
            total[n - 1] += cg.len();
            let mut seen: Vec<Vec<String>> = Vec::new();
            for g in &cg {
                if seen.contains(g) {
                    continue;
                }
                seen.push(g.clone());
                let max_ref = rs.iter().map(|r| count(&grams(r, n), g)).max().unwrap_or(0);
                matched[n - 1] += count(&cg, g).min(max_ref);
            }
        }
    }
    if matched[0] == 0 {
        return 0.0;
    }
    let mut prod = 1.0f64;
    for n in 0..4 {
        prod *=
            if n > 0 && matched[n] == 0 { 1.0 / (total[n] as f64 + 1.0) } else { matched[n] as f64 / total[n] as f64 };
    }
    let bp = if c_len < r_len { (1.0 - r_len as f64 / c_len as f64).exp() } else { 1.0 };
    bp * prod.powf(0.25)
}

/// Random corpus over a small alphabet so n-gram overlaps are common.
pub fn random_bleu_corpus(rng: &mut ChaCha8Rng, segments: usize) -> (Vec<Vec<String>>, Vec<Vec<Vec<String>>>) {
    let words = ["a", "b", "c", "d", "e", "f"];
    let sentence = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let n = rng.gen_range(1..12);
        (0..n).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect()
    };
    let cands: Vec<Vec<String>> = (0..segments).map(|_| sentence(rng)).collect();
    let refs = (0..segments).map(|_| (0..rng.gen_range(1..4)).map(|_| sentence(rng)).collect()).collect();
    (cands, refs)
}

const POOL: [&str; 24] = [
    "man", "woman", "dog", "child", "girl", "boy", "cat", "player", "runs", "sleeps", "eats", "sings", "jumps",
    "reads", "park", "street", "beach", "ball", "red", "small", "old", "happy", "table", "car",
];

fn pool_sentence(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> String {
    let n = rng.gen_range(min_len..=max_len);
    (0..n).map(|_| POOL[rng.gen_range(0..POOL.len())]).collect::<Vec<_>>().join(" ")
}

/// Corpus whose explanations are label-specific templates filled with the
/// example's own sentences, so the explanation alone determines the label.
pub fn template_corpus(
    rng: &mut ChaCha8Rng,
    n: usize,
    sentence_len: (usize, usize),
    explanations: usize,
) -> Vec<Example> {
    (0..n)
        .map(|i| {
            let label = Label::from_index(rng.gen_range(0..3)).unwrap();
            let premise = pool_sentence(rng, sentence_len.0, sentence_len.1);
            let hypothesis = pool_sentence(rng, sentence_len.0, sentence_len.1);
            let own: Vec<&Template> = TEMPLATES.iter().filter(|t| t.class == TemplateClass::from(label)).collect();
            let texts: Vec<String> = (0..explanations)
                .map(|_| {
                    let t = own[rng.gen_range(0..own.len())];
                    let variants = instantiate(t, &premise, &hypothesis);
                    variants[rng.gen_range(0..variants.len())].clone()
                })
                .collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            Example::new(format!("t{i}"), Split::Train, label, &premise, &hypothesis, &refs)
        })
        .collect()
}

/// Vocabulary from the explanations (every token kept), random frozen
/// vectors, and the encoded examples.
pub fn encode_corpus(examples: &[Example], dim: usize) -> (Vocabulary, EmbeddingTable, Vec<EncodedExample>) {
    let lists: Vec<Vec<String>> = examples.iter().flat_map(|e| e.explanations.iter().cloned()).collect();
    let vocab = Vocabulary::build(&lists, 1).unwrap();
    let table = EmbeddingTable::random(&vocab, dim, 3);
    let enc = examples.iter().map(|e| encode_example(e, &vocab, Limits::default()).unwrap()).collect();
    (vocab, table, enc)
}
