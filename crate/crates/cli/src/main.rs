//! `deid` — command-line orchestration of the de-identification toolkit:
//! synthetic-corpus generation, pre-processing, training either tagger,
//! tagging, evaluation, significance testing, error reports, and the
//! ablation harness.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure. Logs are line-oriented `key=value` records on stdout;
//! diagnostics go to stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deid_core::corpus::{
    self, corpus_stats, generate_synthetic, Document, PhiSpan, SpanKind, SynthConfig,
};
use deid_core::crf;
use deid_core::error_analysis;
use deid_core::errors::DeidError;
use deid_core::eval::{
    self, aggregate, approx_randomization, exhaustive_randomization, match_at_level, AggMode,
    CategorySet, MatchLevel, Metric, ALPHA_THRESHOLD,
};
use deid_core::features::{FeatureGroup, GazetteerSet, Sidecar};
use deid_core::lstm_tagger::{
    self, load_embeddings, train_skipgram, EmissionForm, LstmDims, RepConfig, SkipGramConfig,
    TrainConfig,
};
use deid_core::preprocess::{AbbrevList, DEFAULT_MAX_SENTENCE_TOKENS};
use deid_core::{fnv1a64, Result};

#[derive(Parser)]
#[command(
    name = "deid",
    about = "PHI de-identification toolkit: CRF and BiLSTM sequence taggers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PreprocessOpts {
    /// Abbreviation list overriding the bundled one
    #[arg(long)]
    abbrev: Option<PathBuf>,
    /// Sentence length cap in tokens
    #[arg(long, default_value_t = DEFAULT_MAX_SENTENCE_TOKENS)]
    max_sentence_tokens: usize,
}

#[derive(Args, Clone)]
struct ResourceOpts {
    /// Directory with profession/city/country/state gazetteer files
    #[arg(long)]
    gazetteers: Option<PathBuf>,
    /// POS/chunk sidecar file (`<doc-id> <token-index> <POS> <CHUNK>`)
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus
    Gen {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of PHI sentences drawn from glued-token templates
        #[arg(long, default_value_t = 0.15)]
        glue_rate: f64,
        #[arg(long, default_value = corpus::DEFAULT_TEMPLATE_SET)]
        template_set: String,
    },
    /// Tokenize and sentence-split a corpus (debug dump plus statistics)
    Preprocess {
        #[arg(long, name = "in")]
        r#in: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pre: PreprocessOpts,
    },
    /// Train a tagger
    Train {
        /// Tagger kind: crf or lstm
        #[arg(long)]
        model: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pre: PreprocessOpts,
        #[command(flatten)]
        res: ResourceOpts,
        #[command(flatten)]
        hyper: HyperOpts,
    },
    /// Tag a corpus with a trained model (kind sniffed from the file)
    Tag {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, name = "in")]
        r#in: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[command(flatten)]
        pre: PreprocessOpts,
        #[command(flatten)]
        res: ResourceOpts,
    },
    /// Evaluate system output against gold
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        sys: PathBuf,
        #[arg(long, default_value = "strict")]
        level: String,
        #[arg(long, default_value = "micro")]
        agg: String,
        #[arg(long, default_value = "i2b2")]
        catset: String,
        /// Category-set config file ([NAME] heading, one subcategory per line)
        #[arg(long)]
        catset_config: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        format: String,
        #[command(flatten)]
        pre: PreprocessOpts,
    },
    /// Approximate-randomization significance test between two systems
    Sigtest {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long = "sysA")]
        sys_a: PathBuf,
        #[arg(long = "sysB")]
        sys_b: PathBuf,
        #[arg(long, default_value = "f")]
        metric: String,
        #[arg(long, default_value_t = 9999)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "strict")]
        level: String,
        #[arg(long, default_value = "i2b2")]
        catset: String,
        #[arg(long)]
        catset_config: Option<PathBuf>,
        /// Enumerate all swap patterns instead of sampling (n ≤ 20)
        #[arg(long)]
        exhaustive: bool,
        #[command(flatten)]
        pre: PreprocessOpts,
    },
    /// Error-taxonomy report (confusion/error matrix)
    Errors {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        sys: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
        /// Also print the percentage view
        #[arg(long)]
        percentages: bool,
        #[command(flatten)]
        pre: PreprocessOpts,
    },
    /// Retrain with parts removed and report per-drop F1
    Ablate {
        /// Tagger kind: crf or lstm
        #[arg(long)]
        model: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        valid: PathBuf,
        /// Parts to drop, one at a time. CRF: lex, letter, digitpunct,
        /// morph, gaz. LSTM: char, pretrained, feature, dropout, lattice.
        #[arg(long, required = true)]
        drop: Vec<String>,
        #[command(flatten)]
        pre: PreprocessOpts,
        #[command(flatten)]
        res: ResourceOpts,
        #[command(flatten)]
        hyper: HyperOpts,
    },
}

#[derive(Args, Clone)]
struct HyperOpts {
    /// Global random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CRF regularization constant
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    /// CRF feature-frequency cutoff
    #[arg(long, default_value_t = 4)]
    cutoff: u32,
    /// CRF optimizer iteration cap
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// LSTM learning rate
    #[arg(long, default_value_t = 0.005)]
    lr: f64,
    /// LSTM dropout probability
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// LSTM training epochs
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// LSTM gradient clip (global norm)
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
    /// Pre-trained embedding file (word2vec text format); when absent a
    /// skip-gram table is trained on the training corpus
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Skip-gram dimension (when training embeddings here)
    #[arg(long, default_value_t = 100)]
    sg_dim: usize,
    /// Skip-gram window
    #[arg(long, default_value_t = 5)]
    sg_window: usize,
    /// Skip-gram negative samples
    #[arg(long, default_value_t = 5)]
    sg_negatives: usize,
    /// Skip-gram epochs
    #[arg(long, default_value_t = 5)]
    sg_epochs: usize,
    /// Lattice emission form: logit or prob
    #[arg(long, default_value = "logit")]
    lattice_emissions: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DeidError::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

/// Directory consulted for default resources (`abbreviations.txt`,
/// `gazetteers/`, `catsets.txt`) when the corresponding flag is absent.
const CONFIG_DIR_VAR: &str = "DEID_CONFIG_DIR";

fn config_default(name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(CONFIG_DIR_VAR)?;
    let path = Path::new(&dir).join(name);
    path.exists().then_some(path)
}

fn load_abbrevs(pre: &PreprocessOpts) -> Result<AbbrevList> {
    match pre.abbrev.clone().or_else(|| config_default("abbreviations.txt")) {
        None => Ok(AbbrevList::bundled()),
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| DeidError::io(path.display().to_string(), e))?;
            Ok(AbbrevList::from_text(&text))
        }
    }
}

fn load_gazetteers(res: &ResourceOpts) -> Result<GazetteerSet> {
    match res.gazetteers.clone().or_else(|| config_default("gazetteers")) {
        None => Ok(GazetteerSet::bundled()),
        Some(dir) => GazetteerSet::from_dir(&dir),
    }
}

fn load_sidecar(res: &ResourceOpts) -> Result<Option<Sidecar>> {
    res.sidecar.as_deref().map(Sidecar::load).transpose()
}

fn load_corpus(dir: &Path, pre: &PreprocessOpts) -> Result<Vec<Document>> {
    let abbrevs = load_abbrevs(pre)?;
    let mut docs = corpus::load_dir(dir)?;
    for d in &mut docs {
        d.preprocess(&abbrevs, pre.max_sentence_tokens);
    }
    Ok(docs)
}

fn load_catset(name: &str, config: Option<&PathBuf>) -> Result<CategorySet> {
    let path = config.cloned().or_else(|| config_default("catsets.txt"));
    let text = path
        .map(|p| std::fs::read_to_string(&p).map_err(|e| DeidError::io(p.display().to_string(), e)))
        .transpose()?;
    CategorySet::resolve(name, text.as_deref())
}

/// Pairs gold documents with same-id system outputs; every gold id must
/// have a system file.
fn join_systems(gold: &[Document], sys_docs: Vec<Document>) -> Result<Vec<Vec<PhiSpan>>> {
    let mut by_id: BTreeMap<String, Vec<PhiSpan>> =
        sys_docs.into_iter().map(|d| (d.id.clone(), d.gold)).collect();
    gold.iter()
        .map(|g| {
            by_id.remove(&g.id).ok_or_else(|| {
                DeidError::InvalidArgument(format!("no system output for record `{}`", g.id))
            })
        })
        .collect()
}

fn model_file_header(path: &Path, seed: u64) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| DeidError::io(path.display().to_string(), e))?;
    Ok(vec![
        format!("model-hash {:016x}", fnv1a64(&bytes)),
        format!("seed {seed}"),
    ])
}

fn print_corpus_stats(docs: &[Document]) -> Result<()> {
    let stats = corpus_stats(docs)?;
    println!(
        "notes={} tokens={} phi={} unique_phi={} vocabulary={}",
        stats.note_count,
        stats.token_count,
        stats.phi_count,
        stats.unique_phi_count,
        stats.vocabulary_size
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            count,
            seed,
            out,
            glue_rate,
            template_set,
        } => {
            let mut config = SynthConfig::new(count, seed);
            config.glue_rate = glue_rate;
            config.template_set = template_set;
            let mut docs = generate_synthetic(&config)?;
            corpus::write_dir(&out, &docs, SpanKind::Gold, &[])?;
            println!("generated={} seed={} dir={}", docs.len(), seed, out.display());
            let abbrevs = AbbrevList::bundled();
            for d in &mut docs {
                d.preprocess(&abbrevs, DEFAULT_MAX_SENTENCE_TOKENS);
            }
            print_corpus_stats(&docs)
        }
        Command::Preprocess { r#in, out, pre } => {
            let docs = load_corpus(&r#in, &pre)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| DeidError::io(out.display().to_string(), e))?;
            for doc in &docs {
                let mut dump = String::new();
                dump.push_str(&format!("DOC {}\n", doc.id));
                for (i, s) in doc.sentences.iter().enumerate() {
                    dump.push_str(&format!(
                        "SENT {i} {} {} {} {}\n",
                        s.first_token, s.last_token, s.start, s.end
                    ));
                }
                for (i, t) in doc.tokens.iter().enumerate() {
                    dump.push_str(&format!(
                        "TOKEN {i} {} {} {} {}\n",
                        t.start, t.end, t.sentence_index, t.text
                    ));
                }
                let path = out.join(format!("{}.tok", doc.id));
                std::fs::write(&path, dump)
                    .map_err(|e| DeidError::io(path.display().to_string(), e))?;
            }
            println!("preprocessed={} dir={}", docs.len(), out.display());
            print_corpus_stats(&docs)
        }
        Command::Train {
            model,
            train,
            valid,
            out,
            pre,
            res,
            hyper,
        } => {
            let train_docs = load_corpus(&train, &pre)?;
            let valid_docs = valid.as_deref().map(|v| load_corpus(v, &pre)).transpose()?;
            let gazetteers = load_gazetteers(&res)?;
            let sidecar = load_sidecar(&res)?;
            match model.as_str() {
                "crf" => train_crf_cmd(
                    &train_docs,
                    valid_docs.as_deref(),
                    &out,
                    &gazetteers,
                    sidecar.as_ref(),
                    &hyper,
                    &FeatureGroup::ALL,
                ),
                "lstm" => train_lstm_cmd(
                    &train_docs,
                    valid_docs.as_deref().unwrap_or(&[]),
                    &out,
                    &gazetteers,
                    &hyper,
                    RepConfig::default(),
                    true,
                    hyper.dropout,
                ),
                other => Err(DeidError::InvalidArgument(format!(
                    "unknown model kind `{other}` (expected crf or lstm)"
                ))),
            }
        }
        Command::Tag {
            model,
            r#in,
            out,
            threads,
            pre,
            res,
        } => {
            let docs = load_corpus(&r#in, &pre)?;
            let gazetteers = load_gazetteers(&res)?;
            let sidecar = load_sidecar(&res)?;
            let (tagged, seed): (Vec<Document>, u64) = match sniff_model_kind(&model)? {
                ModelKind::Crf => {
                    let m = crf::load_model(&model)?;
                    let tagged = run_parallel(threads, &docs, |doc| {
                        let spans =
                            m.tag_document(doc, &gazetteers, sidecar.as_ref(), &FeatureGroup::ALL)?;
                        system_doc(doc, spans)
                    })?;
                    (tagged, 0)
                }
                ModelKind::Lstm => {
                    let m = lstm_tagger::load_model(&model)?;
                    let tagged = run_parallel(threads, &docs, |doc| {
                        let spans = m.tag_document(doc, &gazetteers)?;
                        system_doc(doc, spans)
                    })?;
                    (tagged, m.oov_seed)
                }
            };
            let headers = model_file_header(&model, seed)?;
            corpus::write_dir(&out, &tagged, SpanKind::System, &headers)?;
            println!("tagged={} dir={}", tagged.len(), out.display());
            Ok(())
        }
        Command::Eval {
            gold,
            sys,
            level,
            agg,
            catset,
            catset_config,
            format,
            pre,
        } => {
            let gold_docs = load_corpus(&gold, &pre)?;
            let systems = join_systems(&gold_docs, corpus::load_dir(&sys)?)?;
            let level = MatchLevel::parse(&level)?;
            let agg = AggMode::parse(&agg)?;
            let set = load_catset(&catset, catset_config.as_ref())?;
            let per_doc: Vec<_> = gold_docs
                .iter()
                .zip(&systems)
                .map(|(doc, sys)| {
                    let gold_f = eval::filter_category_set(&doc.gold, &set);
                    let sys_f = eval::filter_category_set(sys, &set);
                    match_at_level(level, doc, &gold_f, &sys_f)
                })
                .collect();
            let (p, r, f1) = aggregate(&per_doc, agg, &set);
            println!(
                "level={} agg={:?} catset={} precision={p:.4} recall={r:.4} f1={f1:.4}",
                level.as_str(),
                agg,
                set.name
            );
            let catsets = vec![CategorySet::i2b2(), CategorySet::hipaa_default()];
            let report = eval::subcategory_report(&gold_docs, &systems, level, &catsets);
            match format.as_str() {
                "text" => print!("{}", eval::render_text(&report)),
                "csv" => print!("{}", eval::render_csv(&report)),
                other => {
                    return Err(DeidError::InvalidArgument(format!(
                        "unknown format `{other}`"
                    )))
                }
            }
            Ok(())
        }
        Command::Sigtest {
            gold,
            sys_a,
            sys_b,
            metric,
            m,
            seed,
            level,
            catset,
            catset_config,
            exhaustive,
            pre,
        } => {
            let gold_docs = load_corpus(&gold, &pre)?;
            let a = join_systems(&gold_docs, corpus::load_dir(&sys_a)?)?;
            let b = join_systems(&gold_docs, corpus::load_dir(&sys_b)?)?;
            let level = MatchLevel::parse(&level)?;
            let set = load_catset(&catset, catset_config.as_ref())?;
            let metric = Metric::parse(&metric)?;
            let scores_a = eval::per_record_scores(&gold_docs, &a, level, &set, metric)?;
            let scores_b = eval::per_record_scores(&gold_docs, &b, level, &set, metric)?;
            let alpha = if exhaustive {
                exhaustive_randomization(&scores_a, &scores_b)?
            } else {
                approx_randomization(&scores_a, &scores_b, m, seed)?
            };
            println!(
                "records={} m={} seed={seed} alpha={alpha} significant={}",
                scores_a.len(),
                if exhaustive { 0 } else { m },
                alpha < ALPHA_THRESHOLD
            );
            Ok(())
        }
        Command::Errors {
            gold,
            sys,
            format,
            percentages,
            pre,
        } => {
            let gold_docs = load_corpus(&gold, &pre)?;
            let systems = join_systems(&gold_docs, corpus::load_dir(&sys)?)?;
            let mut records = Vec::new();
            for (doc, sys) in gold_docs.iter().zip(&systems) {
                records.extend(error_analysis::classify(&doc.id, &doc.gold, sys));
            }
            let matrix = error_analysis::error_matrix(&records);
            match format.as_str() {
                "text" => print!("{}", error_analysis::render_matrix_text(&matrix)),
                "csv" => print!("{}", error_analysis::render_matrix_csv(&matrix)),
                other => {
                    return Err(DeidError::InvalidArgument(format!(
                        "unknown format `{other}`"
                    )))
                }
            }
            if percentages {
                print!("{}", error_analysis::render_matrix_percentages(&matrix));
            }
            Ok(())
        }
        Command::Ablate {
            model,
            train,
            valid,
            drop,
            pre,
            res,
            hyper,
        } => {
            let train_docs = load_corpus(&train, &pre)?;
            let valid_docs = load_corpus(&valid, &pre)?;
            let gazetteers = load_gazetteers(&res)?;
            let sidecar = load_sidecar(&res)?;
            match model.as_str() {
                "crf" => ablate_crf(
                    &train_docs,
                    &valid_docs,
                    &drop,
                    &gazetteers,
                    sidecar.as_ref(),
                    &hyper,
                ),
                "lstm" => ablate_lstm(&train_docs, &valid_docs, &drop, &gazetteers, &hyper),
                other => Err(DeidError::InvalidArgument(format!(
                    "unknown model kind `{other}` (expected crf or lstm)"
                ))),
            }
        }
    }
}

enum ModelKind {
    Crf,
    Lstm,
}

fn sniff_model_kind(path: &Path) -> Result<ModelKind> {
    let bytes = std::fs::read(path).map_err(|e| DeidError::io(path.display().to_string(), e))?;
    if bytes.starts_with(b"CRF-MODEL v1") {
        Ok(ModelKind::Crf)
    } else if bytes.starts_with(b"DEIDLSTM v1") {
        Ok(ModelKind::Lstm)
    } else {
        Err(DeidError::InvalidArgument(format!(
            "{} is not a recognized model file",
            path.display()
        )))
    }
}

fn system_doc(doc: &Document, spans: Vec<PhiSpan>) -> Result<Document> {
    Document::new(doc.id.clone(), doc.text.clone(), spans)
}

fn run_parallel<F>(threads: usize, docs: &[Document], f: F) -> Result<Vec<Document>>
where
    F: Fn(&Document) -> Result<Document> + Sync,
{
    if threads <= 1 {
        docs.iter().map(&f).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| DeidError::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| docs.par_iter().map(&f).collect())
    }
}

fn train_crf_cmd(
    train_docs: &[Document],
    valid_docs: Option<&[Document]>,
    out: &Path,
    gazetteers: &GazetteerSet,
    sidecar: Option<&Sidecar>,
    hyper: &HyperOpts,
    groups: &[FeatureGroup],
) -> Result<()> {
    let crf_hyper = crf::CrfHyper {
        c: hyper.c,
        cutoff: hyper.cutoff,
        max_iters: hyper.max_iters,
        ..crf::CrfHyper::default()
    };
    let (model, logs) = crf::train(train_docs, &crf_hyper, gazetteers, sidecar, groups)?;
    for l in &logs {
        println!(
            "iter={} value={:.6} grad_norm={:.6} step={:.4}",
            l.iter, l.value, l.grad_norm, l.step
        );
    }
    crf::save_model(&model, out)?;
    println!("model={} features={} labels={}", out.display(), model.index.len(), model.n_labels());
    if let Some(valid) = valid_docs {
        let f1 = crf_strict_f1(&model, valid, gazetteers, sidecar, groups)?;
        println!("valid_strict_micro_f1={f1:.4}");
    }
    Ok(())
}

fn crf_strict_f1(
    model: &crf::CrfModel,
    docs: &[Document],
    gazetteers: &GazetteerSet,
    sidecar: Option<&Sidecar>,
    groups: &[FeatureGroup],
) -> Result<f64> {
    let per_doc: Vec<_> = docs
        .iter()
        .map(|doc| {
            let spans = model.tag_document(doc, gazetteers, sidecar, groups)?;
            Ok(eval::match_strict(&doc.gold, &spans))
        })
        .collect::<Result<_>>()?;
    let (_, _, f1) = aggregate(&per_doc, AggMode::Micro, &CategorySet::i2b2());
    Ok(f1)
}

#[allow(clippy::too_many_arguments)]
fn train_lstm_cmd(
    train_docs: &[Document],
    valid_docs: &[Document],
    out: &Path,
    gazetteers: &GazetteerSet,
    hyper: &HyperOpts,
    rep: RepConfig,
    use_lattice: bool,
    dropout: f64,
) -> Result<()> {
    let (model, logs) = train_lstm_model(
        train_docs,
        valid_docs,
        gazetteers,
        hyper,
        rep,
        use_lattice,
        dropout,
    )?;
    for l in &logs {
        println!(
            "epoch={} loss={:.6} valid_strict_micro_f1={:.4} best={}",
            l.epoch, l.mean_loss, l.valid_f1, l.best
        );
    }
    lstm_tagger::save_model(&model, out)?;
    println!("model={} labels={}", out.display(), model.n_labels());
    if !valid_docs.is_empty() {
        let f1 = lstm_tagger::strict_micro_f1(&model, valid_docs, gazetteers)?;
        println!("valid_strict_micro_f1={f1:.4}");
    }
    Ok(())
}

fn train_lstm_model(
    train_docs: &[Document],
    valid_docs: &[Document],
    gazetteers: &GazetteerSet,
    hyper: &HyperOpts,
    rep: RepConfig,
    use_lattice: bool,
    dropout: f64,
) -> Result<(lstm_tagger::LstmModel, Vec<lstm_tagger::EpochLog>)> {
    let embeddings = match &hyper.embeddings {
        Some(path) => load_embeddings(path)?,
        None => {
            let sg = SkipGramConfig {
                dim: hyper.sg_dim,
                window: hyper.sg_window,
                negatives: hyper.sg_negatives,
                epochs: hyper.sg_epochs,
                seed: hyper.seed,
                ..SkipGramConfig::default()
            };
            let table = train_skipgram(train_docs, &sg)?;
            println!("skipgram_vocab={} dim={}", table.len(), table.dim());
            table
        }
    };
    let dims = LstmDims {
        word_dim: embeddings.dim(),
        ..LstmDims::default()
    };
    let config = TrainConfig {
        learning_rate: hyper.lr,
        dropout,
        epochs: hyper.epochs,
        clip_norm: hyper.clip_norm,
        seed: hyper.seed,
        dims,
        rep,
        use_lattice,
        emission_form: EmissionForm::parse(&hyper.lattice_emissions)?,
    };
    lstm_tagger::train(train_docs, valid_docs, embeddings, &config, gazetteers)
}

fn ablate_crf(
    train_docs: &[Document],
    valid_docs: &[Document],
    drop: &[String],
    gazetteers: &GazetteerSet,
    sidecar: Option<&Sidecar>,
    hyper: &HyperOpts,
) -> Result<()> {
    let crf_hyper = crf::CrfHyper {
        c: hyper.c,
        cutoff: hyper.cutoff,
        max_iters: hyper.max_iters,
        ..crf::CrfHyper::default()
    };
    let eval_groups = |groups: &[FeatureGroup]| -> Result<f64> {
        let (model, _) = crf::train(train_docs, &crf_hyper, gazetteers, sidecar, groups)?;
        crf_strict_f1(&model, valid_docs, gazetteers, sidecar, groups)
    };
    let full = eval_groups(&FeatureGroup::ALL)?;
    println!("drop=none f1={full:.4}");
    for name in drop {
        let dropped = FeatureGroup::parse(name)?;
        let groups: Vec<FeatureGroup> = FeatureGroup::ALL
            .into_iter()
            .filter(|g| *g != dropped)
            .collect();
        let f1 = eval_groups(&groups)?;
        println!("drop={name} f1={f1:.4} delta={:.4}", f1 - full);
    }
    Ok(())
}

fn ablate_lstm(
    train_docs: &[Document],
    valid_docs: &[Document],
    drop: &[String],
    gazetteers: &GazetteerSet,
    hyper: &HyperOpts,
) -> Result<()> {
    let run = |rep: RepConfig, use_lattice: bool, dropout: f64| -> Result<f64> {
        let (model, _) = train_lstm_model(
            train_docs,
            valid_docs,
            gazetteers,
            hyper,
            rep,
            use_lattice,
            dropout,
        )?;
        lstm_tagger::strict_micro_f1(&model, valid_docs, gazetteers)
    };
    let full = run(RepConfig::default(), true, hyper.dropout)?;
    println!("drop=none f1={full:.4}");
    for name in drop {
        let mut rep = RepConfig::default();
        let mut use_lattice = true;
        let mut dropout = hyper.dropout;
        match name.as_str() {
            "char" => rep.use_char = false,
            "pretrained" => rep.use_pretrained = false,
            "feature" => rep.use_feature = false,
            "dropout" => dropout = 0.0,
            "lattice" => use_lattice = false,
            other => {
                return Err(DeidError::InvalidArgument(format!(
                    "unknown lstm ablation `{other}`"
                )))
            }
        }
        let f1 = run(rep, use_lattice, dropout)?;
        println!("drop={name} f1={f1:.4} delta={:.4}", f1 - full);
    }
    Ok(())
}
