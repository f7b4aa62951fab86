//! One function per subcommand. Each receives the resolved config and its run directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use nli_explain::evaluation::{
    corpus_bleu, dump_rows, evaluate, evaluate_pipeline, expl_at_k, inter_annotator_bleu, read_annotations,
    transfer_eval, write_dump, EvalReport, ScoreMode,
};
use nli_explain::model::{Model, Prediction, Role, Variant};
use nli_explain::quality::{filter_corpus, validate_corpus, write_filter_report, write_validation_report};
use nli_explain::text::{
    encode_example, read_corpus, tokenize, write_corpus, EmbeddingTable, EncodedExample, Example, Split, Vocabulary,
};
use nli_explain::training::{grid_select, train, RunRecord, TrainConfig, TrainData};
use serde::Serialize;

use crate::config::Config;
use crate::run::RunDir;

/// Input data rejected; maps to exit code 1.
#[derive(Debug)]
pub struct Rejected(pub String);

impl fmt::Display for Rejected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Rejected {}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: nli_explain::Error| e.to_string())
}

fn absolute(p: &Path) -> PathBuf {
    std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
}

/// Refuse to write over a file the command reads.
fn ensure_distinct(input: &Path, output: &Path) -> Result<()> {
    let same = match (fs::canonicalize(input), fs::canonicalize(output)) {
        (Ok(a), Ok(b)) => a == b,
        _ => absolute(input) == absolute(output),
    };
    if same {
        bail!("output {} would overwrite the input", output.display());
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn write_report(run: &RunDir, name: &str, report: &EvalReport) -> Result<()> {
    report.write_json(&run.reports().join(format!("{name}.json")))?;
    fs::write(run.reports().join(format!("{name}.txt")), report.to_table())?;
    println!("{}", report.to_table());
    Ok(())
}

fn read_examples(path: &Path, cfg: &Config, split: Split, require_explanations: bool) -> Result<Vec<Example>> {
    let load = read_corpus(path, &cfg.data.columns, split, require_explanations)?;
    for w in &load.warnings {
        log::warn!("{w}");
    }
    if load.skipped_bad_label + load.skipped_empty > 0 {
        log::info!(
            "{}: skipped {} rows with unknown labels and {} with empty sentences",
            path.display(),
            load.skipped_bad_label,
            load.skipped_empty
        );
    }
    if load.examples.is_empty() {
        return Err(Rejected(format!("{}: no usable examples", path.display())).into());
    }
    Ok(load.examples)
}

fn encode_all(examples: Vec<Example>, vocab: &Vocabulary, cfg: &Config) -> (Vec<Example>, Vec<EncodedExample>) {
    let limits = cfg.data.limits();
    examples.into_iter().filter_map(|e| encode_example(&e, vocab, limits).map(|x| (e, x))).unzip()
}

/// Variants whose training or evaluation reads gold explanations.
fn needs_explanations(v: Variant) -> bool {
    v.has_decoder() || v == Variant::ExplToLbl
}

struct Prepared {
    vocab: Vocabulary,
    table: EmbeddingTable,
    train: Vec<EncodedExample>,
    dev_examples: Vec<Example>,
    dev: Vec<EncodedExample>,
}

impl Prepared {
    fn data(&self) -> TrainData<'_> {
        TrainData { train: &self.train, val: &self.dev, vocab: &self.vocab, embeddings: &self.table }
    }
}

/// Vocabulary from the training explanations (from the sentences for
/// classifier-only variants), then embeddings and encoded splits.
fn prepare(cfg: &Config) -> Result<Prepared> {
    let variant = cfg.model.variant;
    let require = needs_explanations(variant);
    let train_ex = read_examples(&cfg.data.train, cfg, Split::Train, require)?;
    let dev_ex = read_examples(&cfg.data.dev, cfg, Split::Valid, require)?;
    let token_lists: Vec<&Vec<String>> = if require {
        train_ex.iter().flat_map(|e| e.explanations.iter()).collect()
    } else {
        train_ex.iter().flat_map(|e| [&e.premise, &e.hypothesis]).collect()
    };
    let vocab = Vocabulary::build(&token_lists.into_iter().cloned().collect::<Vec<_>>(), cfg.data.min_count)?;
    log::info!("vocabulary: {} tokens (min count {})", vocab.len(), cfg.data.min_count);
    let table = match &cfg.data.embeddings {
        Some(p) => EmbeddingTable::load(p, &vocab, cfg.model.emb_dim)?,
        None => {
            log::warn!("no embeddings file configured; using seeded random vectors");
            EmbeddingTable::random(&vocab, cfg.model.emb_dim, cfg.training.seed)
        }
    };
    let (_, train) = encode_all(train_ex, &vocab, cfg);
    let (dev_examples, dev) = encode_all(dev_ex, &vocab, cfg);
    if train.is_empty() || dev.is_empty() {
        return Err(Rejected("training or dev split has no encodable examples".into()).into());
    }
    Ok(Prepared { vocab, table, train, dev_examples, dev })
}

fn finish_training(run: &RunDir, prep: &Prepared, model: &Model, checkpoint: &Path) -> Result<()> {
    let (mut report, preds) = evaluate(model, "dev", &prep.dev)?;
    report.checkpoint = Some(checkpoint.display().to_string());
    write_report(run, "dev", &report)?;
    if model.config.variant.generates_explanations() {
        write_dump(&run.dumps().join("dev.csv"), &dump_rows(&prep.dev_examples, &preds, &prep.vocab))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    /// Corpus with explanations.
    #[arg(long)]
    pub input: PathBuf,
    /// Per-explanation report; defaults to reports/filter.csv in the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Surviving examples; defaults to `<out stem>.survivors.csv` next to the report.
    #[arg(long)]
    pub survivors: Option<PathBuf>,
    /// Explanations strictly closer than this to a template are dropped.
    #[arg(long)]
    pub threshold: Option<usize>,
}

impl FilterArgs {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(t) = self.threshold {
            cfg.quality.threshold = t;
        }
    }
}

pub fn filter(cfg: &Config, run: &RunDir, a: &FilterArgs) -> Result<()> {
    let out = a.out.clone().unwrap_or_else(|| run.reports().join("filter.csv"));
    let survivors = a.survivors.clone().unwrap_or_else(|| {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "filter".into());
        out.with_file_name(format!("{stem}.survivors.csv"))
    });
    ensure_distinct(&a.input, &out)?;
    ensure_distinct(&a.input, &survivors)?;
    let examples = read_examples(&a.input, cfg, Split::Test, true)?;
    let outcome = filter_corpus(&examples, cfg.quality.threshold);
    write_filter_report(&out, &outcome.rows)?;
    write_corpus(&survivors, &outcome.survivors)?;
    println!(
        "{} of {} explanations filtered; {} examples dropped, {} kept",
        outcome.filtered_explanations,
        outcome.rows.len(),
        outcome.dropped_examples,
        outcome.survivors.len()
    );
    println!("report: {}\nsurvivors: {}", out.display(), survivors.display());
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to reports/validation.csv in the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn validate(cfg: &Config, run: &RunDir, a: &ValidateArgs) -> Result<()> {
    let out = a.out.clone().unwrap_or_else(|| run.reports().join("validation.csv"));
    ensure_distinct(&a.input, &out)?;
    let examples = read_examples(&a.input, cfg, Split::Test, true)?;
    let reports = validate_corpus(&examples);
    write_validation_report(&out, &reports)?;
    let failing = reports.iter().filter(|r| !r.pass).count();
    let unverifiable: usize = reports.iter().map(|r| r.unverifiable.len()).sum();
    println!("{} examples checked, {failing} with violations, {unverifiable} explanations unverifiable", reports.len());
    println!("report: {}", out.display());
    if failing > 0 {
        return Err(Rejected(format!("{failing} examples violate the annotation rules")).into());
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    /// Weight of the label loss for variants with two objectives.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Decoder hidden size.
    #[arg(long)]
    pub decoder: Option<usize>,
    /// Per-direction encoder hidden size.
    #[arg(long)]
    pub encoder: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

impl TrainArgs {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(v) = self.variant {
            cfg.model.variant = v;
        }
        if let Some(x) = self.alpha {
            cfg.training.alpha = Some(x);
        }
        if let Some(x) = self.decoder {
            cfg.model.dec_hidden = x;
        }
        if let Some(x) = self.encoder {
            cfg.model.enc_hidden = x;
        }
        if let Some(x) = self.epochs {
            cfg.training.epochs = x;
        }
        if let Some(x) = self.batch_size {
            cfg.training.batch_size = x;
        }
        if let Some(x) = self.lr {
            cfg.training.lr = x;
        }
        if let Some(p) = &self.train {
            cfg.data.train = absolute(p);
        }
        if let Some(p) = &self.dev {
            cfg.data.dev = absolute(p);
        }
        if let Some(p) = &self.embeddings {
            cfg.data.embeddings = Some(absolute(p));
        }
    }
}

pub fn train_cmd(cfg: &Config, run: &RunDir) -> Result<()> {
    let prep = prepare(cfg)?;
    let tc = cfg.train_config(prep.vocab.len());
    tc.validate()?;
    let (model, rec) = train(&tc, prep.data(), Some(&run.checkpoints()))?;
    log::info!("best epoch {} ({:?} {:.4})", rec.best_epoch, tc.criterion, rec.best_value);
    finish_training(run, &prep, &model, &run.checkpoints())
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Comma-separated decoder sizes.
    #[arg(long, value_delimiter = ',')]
    pub decoders: Option<Vec<usize>>,
}

impl GridArgs {
    pub fn apply(&self, cfg: &mut Config) {
        self.train.apply(cfg);
        if let Some(a) = &self.alphas {
            cfg.grid.alphas = a.clone();
        }
        if let Some(d) = &self.decoders {
            cfg.grid.decoder_sizes = d.clone();
        }
    }
}

/// Alpha x decoder grid for two-objective variants, decoder sizes for the
/// other generators, a single config otherwise.
pub fn grid_configs(cfg: &Config, vocab_size: usize) -> Vec<TrainConfig> {
    let base = cfg.train_config(vocab_size);
    let v = base.model.variant;
    let alphas: Vec<Option<f64>> =
        if v.uses_alpha() { cfg.grid.alphas.iter().map(|&a| Some(a)).collect() } else { vec![base.alpha] };
    let sizes: Vec<usize> = if v.has_decoder() { cfg.grid.decoder_sizes.clone() } else { vec![base.model.dec_hidden] };
    let mut out = Vec::new();
    for &d in &sizes {
        for &a in &alphas {
            let mut c = base.clone();
            c.model.dec_hidden = d;
            c.alpha = a;
            out.push(c);
        }
    }
    out
}

#[derive(Serialize)]
struct GridRow {
    run: String,
    alpha: Option<f64>,
    dec_hidden: usize,
    best_epoch: usize,
    best_value: f64,
}

pub fn grid_cmd(cfg: &Config, run: &RunDir) -> Result<()> {
    let prep = prepare(cfg)?;
    let configs = grid_configs(cfg, prep.vocab.len());
    for c in &configs {
        c.validate()?;
    }
    log::info!("grid of {} configurations", configs.len());
    let result = grid_select(&configs, prep.data(), Some(&run.checkpoints()))?;
    let rows: Vec<GridRow> = result
        .runs
        .iter()
        .enumerate()
        .map(|(i, r): (usize, &RunRecord)| GridRow {
            run: format!("run-{i:02}"),
            alpha: r.config.alpha,
            dec_hidden: r.config.model.dec_hidden,
            best_epoch: r.best_epoch,
            best_value: r.best_value,
        })
        .collect();
    #[derive(Serialize)]
    struct GridReport<'a> {
        criterion: String,
        selected: String,
        runs: &'a [GridRow],
    }
    let selected = format!("run-{:02}", result.best);
    write_json(
        &run.reports().join("grid.json"),
        &GridReport { criterion: format!("{:?}", configs[0].criterion), selected: selected.clone(), runs: &rows },
    )?;
    for r in &rows {
        println!(
            "{}  alpha={:<5} dec={:<5} epoch={:<3} value={:.4}",
            r.run,
            r.alpha.map_or("-".into(), |a| a.to_string()),
            r.dec_hidden,
            r.best_epoch,
            r.best_value
        );
    }
    println!("selected {selected}");
    finish_training(run, &prep, &result.model, &run.checkpoints().join(&selected))
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Checkpoint directory written by `train` or `grid`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labelled corpus; defaults to the configured test split.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// ExplToLbl checkpoint: evaluate the explain-then-predict pipeline.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// Human explanation-correctness annotations (`id,predicted_label_correct,k,n`).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Count only fully correct explanations in the annotation score.
    #[arg(long)]
    pub strict: bool,
    /// Out-of-domain pairs without explanations; no BLEU or perplexity.
    #[arg(long)]
    pub transfer: bool,
    #[arg(long, requires = "transfer")]
    pub label_col: Option<String>,
    #[arg(long, requires = "transfer")]
    pub premise_col: Option<String>,
    #[arg(long, requires = "transfer")]
    pub hypothesis_col: Option<String>,
}

impl EvalArgs {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(p) = &self.input {
            cfg.data.test = absolute(p);
        }
    }
}

fn split_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "test".into())
}

pub fn eval_cmd(cfg: &Config, run: &RunDir, a: &EvalArgs) -> Result<()> {
    let (model, vocab) = Model::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let input = &cfg.data.test;
    if a.transfer {
        let mut cols = nli_explain::text::ColumnMap::pairs(
            &cfg.data.columns.label,
            &cfg.data.columns.premise,
            &cfg.data.columns.hypothesis,
        );
        cols.id = cfg.data.columns.id.clone();
        if let Some(c) = &a.label_col {
            cols.label = c.clone();
        }
        if let Some(c) = &a.premise_col {
            cols.premise = c.clone();
        }
        if let Some(c) = &a.hypothesis_col {
            cols.hypothesis = c.clone();
        }
        let (mut report, rows) = transfer_eval(&model, &vocab, input, &cols)?;
        report.checkpoint = Some(a.checkpoint.display().to_string());
        write_report(run, "transfer", &report)?;
        if !rows.is_empty() {
            write_dump(&run.dumps().join("transfer.csv"), &rows)?;
        }
        return Ok(());
    }

    let examples = read_examples(input, cfg, Split::Test, needs_explanations(model.config.variant))?;
    let (examples, encoded) = encode_all(examples, &vocab, cfg);
    if encoded.is_empty() {
        return Err(Rejected(format!("{}: no encodable examples", input.display())).into());
    }
    let name = split_name(input);
    let (mut report, preds) = match &a.classifier {
        Some(dir) => {
            let (clf, clf_vocab) = Model::load(dir).with_context(|| format!("loading {}", dir.display()))?;
            if clf_vocab != vocab {
                bail!("generator and classifier checkpoints use different vocabularies");
            }
            evaluate_pipeline(&model, &clf, &name, &encoded)?
        }
        None => evaluate(&model, &name, &encoded)?,
    };
    report.checkpoint = Some(a.checkpoint.display().to_string());
    if let Some(p) = &a.annotations {
        let mode = if a.strict { ScoreMode::Strict } else { ScoreMode::Partial };
        report.expl_at_k = Some(expl_at_k(&read_annotations(p)?, mode)?.score);
    }
    write_report(run, &name, &report)?;
    if preds.iter().any(|p| p.explanation.is_some()) {
        write_dump(&run.dumps().join(format!("{name}.csv")), &dump_rows(&examples, &preds, &vocab))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Premise/hypothesis pairs; defaults to the configured test split.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// ExplToLbl checkpoint for explain-then-predict labels.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// Defaults to dumps/generations.csv in the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenerateArgs {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(p) = &self.input {
            cfg.data.test = absolute(p);
        }
    }
}

pub fn generate(cfg: &Config, run: &RunDir, a: &GenerateArgs) -> Result<()> {
    let (model, vocab) = Model::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    if !model.config.variant.generates_explanations() {
        bail!("{} does not generate explanations", model.config.variant);
    }
    let out = a.out.clone().unwrap_or_else(|| run.dumps().join("generations.csv"));
    ensure_distinct(&cfg.data.test, &out)?;
    let examples = read_examples(&cfg.data.test, cfg, Split::Test, false)?;
    let (examples, encoded) = encode_all(examples, &vocab, cfg);
    let preds: Vec<Prediction> = match &a.classifier {
        Some(dir) => {
            let (clf, _) = Model::load(dir).with_context(|| format!("loading {}", dir.display()))?;
            evaluate_pipeline(&model, &clf, "generate", &encoded)?.1
        }
        None => model.predict_all(&encoded)?,
    };
    let rows = dump_rows(&examples, &preds, &vocab);
    write_dump(&out, &rows)?;
    println!("{} explanations written to {}", rows.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct BleuArgs {
    /// One candidate per line.
    #[arg(long, requires = "references", conflicts_with = "inter_annotator")]
    pub candidates: Option<PathBuf>,
    /// Reference files, line-aligned with the candidates.
    #[arg(long, num_args = 1..)]
    pub references: Vec<PathBuf>,
    /// Corpus with three explanations per example: score the third against the first two.
    #[arg(long, required_unless_present = "candidates")]
    pub inter_annotator: Option<PathBuf>,
}

fn read_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(tokenize).collect())
}

pub fn bleu_cmd(cfg: &Config, run: &RunDir, a: &BleuArgs) -> Result<()> {
    #[derive(Serialize)]
    struct BleuReport {
        bleu: f64,
        segments: usize,
        excluded: usize,
    }
    let report = if let Some(path) = &a.inter_annotator {
        let examples = read_examples(path, cfg, Split::Test, true)?;
        let (bleu, excluded) = inter_annotator_bleu(&examples)?;
        BleuReport { bleu, segments: examples.len() - excluded, excluded }
    } else {
        let cands = read_lines(a.candidates.as_ref().expect("required by clap"))?;
        let refs_by_file = a.references.iter().map(|p| read_lines(p)).collect::<Result<Vec<_>>>()?;
        for (p, r) in a.references.iter().zip(&refs_by_file) {
            if r.len() != cands.len() {
                return Err(Rejected(format!(
                    "{} has {} lines, candidates have {}",
                    p.display(),
                    r.len(),
                    cands.len()
                ))
                .into());
            }
        }
        if cands.is_empty() {
            return Err(Rejected("no candidate segments".into()).into());
        }
        let refs: Vec<Vec<Vec<String>>> =
            (0..cands.len()).map(|i| refs_by_file.iter().map(|r| r[i].clone()).collect()).collect();
        BleuReport { bleu: corpus_bleu(&cands, &refs)?, segments: cands.len(), excluded: 0 }
    };
    write_json(&run.reports().join("bleu.json"), &report)?;
    println!("BLEU = {:.2} ({} segments)", 100.0 * report.bleu, report.segments);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Premise,
    Hypothesis,
    Explanation,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Role {
        match r {
            RoleArg::Premise => Role::Premise,
            RoleArg::Hypothesis => Role::Hypothesis,
            RoleArg::Explanation => Role::Explanation,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReprArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One sentence per line.
    #[arg(long)]
    pub sentences: PathBuf,
    /// Which encoder to run; defaults to the model's first encoder.
    #[arg(long, value_enum)]
    pub role: Option<RoleArg>,
    /// Defaults to dumps/representations.txt in the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Text matrix: a `rows cols` header, then one space-separated row per sentence.
pub fn repr_export(cfg: &Config, run: &RunDir, a: &ReprArgs) -> Result<()> {
    let (model, vocab) = Model::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let encoders = model.config.variant.encoders();
    let role = match a.role {
        Some(r) => Role::from(r),
        None => encoders[0],
    };
    if !encoders.contains(&role) {
        bail!("{} has no {:?} encoder", model.config.variant, role);
    }
    let out = a.out.clone().unwrap_or_else(|| run.dumps().join("representations.txt"));
    ensure_distinct(&a.sentences, &out)?;
    let text = fs::read_to_string(&a.sentences).with_context(|| format!("reading {}", a.sentences.display()))?;
    let mut ids = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks = tokenize(line);
        if toks.is_empty() {
            return Err(Rejected(format!("{}:{}: empty sentence", a.sentences.display(), i + 1)).into());
        }
        let n = toks.len().min(cfg.data.max_sentence);
        ids.push(vocab.encode(&toks[..n]));
    }
    if ids.is_empty() {
        return Err(Rejected(format!("{}: no sentences", a.sentences.display())).into());
    }
    let dim = model.config.sentence_dim();
    let mut buf = format!("{} {}\n", ids.len(), dim);
    for s in &ids {
        let row = model.encode(role, s, s.len())?;
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        buf.push_str(&cells.join(" "));
        buf.push('\n');
    }
    fs::write(&out, buf).with_context(|| format!("writing {}", out.display()))?;
    println!("{} x {} matrix written to {}", ids.len(), dim, out.display());
    Ok(())
}
