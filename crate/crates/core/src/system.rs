//! A trained model bundled with its vocabularies and run configuration,
//! plus the corpus-level operations built on it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    join_subwords, load_parallel, make_synthetic, split_sentence, toy_subword_split, ContrastiveItem, DataError,
    EncodedPair, SentencePair, Task, Vocabulary, EOS,
};
use crate::eval::{
    bucketed_bleu, contrastive_accuracy, corpus_bleu, BleuOptions, BleuReport, BucketReport, ContrastiveReport,
    EvalError, ScoredPair,
};
use crate::model::{Model, ModelConfig, ModelError};
use crate::patterns::Segmentation;
use crate::train::{TrainConfig, TrainError};

const RUN_FILE: &str = "run.json";
const SRC_VOCAB_FILE: &str = "src.vocab";
const TGT_VOCAB_FILE: &str = "tgt.vocab";

/// Sentences decoded together; fixed so results do not depend on the
/// number of worker threads.
const DECODE_CHUNK: usize = 32;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Where training sentences come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    Synthetic {
        task: Task,
        #[serde(default = "defaults::vocab_size")]
        vocab_size: usize,
        #[serde(default = "defaults::sentences")]
        sentences: usize,
        #[serde(default = "defaults::min_len")]
        min_len: usize,
        #[serde(default = "defaults::max_len")]
        max_len: usize,
        #[serde(default = "defaults::seed")]
        seed: u64,
    },
    Files {
        src: PathBuf,
        tgt: PathBuf,
        /// Split long words into `@@`-marked chunks before training.
        #[serde(default)]
        subword: bool,
    },
}

mod defaults {
    pub fn vocab_size() -> usize {
        20
    }
    pub fn sentences() -> usize {
        2000
    }
    pub fn min_len() -> usize {
        3
    }
    pub fn max_len() -> usize {
        10
    }
    pub fn seed() -> u64 {
        1
    }
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            task: Task::Copy,
            vocab_size: defaults::vocab_size(),
            sentences: defaults::sentences(),
            min_len: defaults::min_len(),
            max_len: defaults::max_len(),
            seed: defaults::seed(),
        }
    }
}

impl DataSource {
    pub fn subword(&self) -> bool {
        matches!(self, DataSource::Files { subword: true, .. })
    }

    pub fn load(&self) -> Result<Vec<SentencePair>, SystemError> {
        match self {
            DataSource::Synthetic {
                task,
                vocab_size,
                sentences,
                min_len,
                max_len,
                seed,
            } => Ok(make_synthetic(*task, *vocab_size, *sentences, *min_len..=*max_len, *seed)?.pairs),
            DataSource::Files { src, tgt, subword } => {
                let pairs = load_parallel(src, tgt)?;
                Ok(if *subword {
                    pairs
                        .into_iter()
                        .map(|p| SentencePair {
                            src: p.src.iter().flat_map(|w| toy_subword_split(w)).collect(),
                            tgt: p.tgt.iter().flat_map(|w| toy_subword_split(w)).collect(),
                        })
                        .collect()
                } else {
                    pairs
                })
            }
        }
    }
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub data: DataSource,
}

/// Model, vocabularies and the run that produced them.
#[derive(Debug, Clone)]
pub struct System {
    pub model: Model,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub run: RunConfig,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SystemError + '_ {
    move |source| {
        SystemError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// BLEU of a system output, optionally split by reference length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub bleu: f64,
    pub precisions: [f64; 4],
    pub bp: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buckets: Option<Vec<BucketReport>>,
}

impl EvaluationReport {
    fn new(report: BleuReport, buckets: Option<Vec<BucketReport>>) -> Self {
        Self {
            bleu: report.bleu,
            precisions: report.precisions,
            bp: report.bp,
            hyp_len: report.hyp_len,
            ref_len: report.ref_len,
            buckets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    /// `None` for the full model.
    pub head: Option<usize>,
    pub pattern: String,
    pub bleu: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn render(&self) -> String {
        let mut out = String::from("head\tpattern\tbleu\tdelta\n");
        for r in &self.rows {
            let head = r.head.map_or_else(|| "-".to_string(), |h| (h + 1).to_string());
            out.push_str(&format!("{head}\t{}\t{:.2}\t{:+.2}\n", r.pattern, r.bleu, r.delta));
        }
        out
    }
}

/// Turn raw sentence pairs into ids with freshly built vocabularies.
pub fn build_vocabularies(pairs: &[SentencePair]) -> (Vocabulary, Vocabulary) {
    let src = Vocabulary::from_corpus(pairs.iter().map(|p| p.src.as_slice()));
    let tgt = Vocabulary::from_corpus(pairs.iter().map(|p| p.tgt.as_slice()));
    (src, tgt)
}

impl System {
    /// Fresh untrained system for `run`; vocabularies come from its data.
    pub fn from_run(run: RunConfig) -> Result<(Self, Vec<EncodedPair>), SystemError> {
        let pairs = run.data.load()?;
        let (src_vocab, tgt_vocab) = build_vocabularies(&pairs);
        let mut run = run;
        run.model.src_vocab = src_vocab.len();
        run.model.tgt_vocab = tgt_vocab.len();
        let model = Model::new(run.model.clone())?;
        let encoded = pairs.iter().map(|p| EncodedPair::encode(p, &src_vocab, &tgt_vocab)).collect();
        Ok((
            Self {
                model,
                src_vocab,
                tgt_vocab,
                run,
            },
            encoded,
        ))
    }

    pub fn save(&self, dir: &Path) -> Result<(), SystemError> {
        self.model.save(dir)?;
        self.src_vocab.save(&dir.join(SRC_VOCAB_FILE))?;
        self.tgt_vocab.save(&dir.join(TGT_VOCAB_FILE))?;
        let path = dir.join(RUN_FILE);
        let json = serde_json::to_string_pretty(&self.run).map_err(|e| SystemError::Config(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(io_err(&path))
    }

    pub fn load(dir: &Path) -> Result<Self, SystemError> {
        let model = Model::load(dir)?;
        let src_vocab = Vocabulary::load(&dir.join(SRC_VOCAB_FILE))?;
        let tgt_vocab = Vocabulary::load(&dir.join(TGT_VOCAB_FILE))?;
        let cfg = model.config();
        if src_vocab.len() != cfg.src_vocab || tgt_vocab.len() != cfg.tgt_vocab {
            return Err(SystemError::Config(format!(
                "vocabularies ({} / {}) do not match the checkpoint ({} / {})",
                src_vocab.len(),
                tgt_vocab.len(),
                cfg.src_vocab,
                cfg.tgt_vocab
            )));
        }
        let path = dir.join(RUN_FILE);
        let run = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| SystemError::Config(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => RunConfig {
                model: cfg.clone(),
                ..Default::default()
            },
            Err(e) => return Err(io_err(&path)(e)),
        };
        Ok(Self {
            model,
            src_vocab,
            tgt_vocab,
            run,
        })
    }

    /// Tokenise a source line the way the training data was prepared.
    pub fn source_tokens(&self, line: &str) -> Vec<String> {
        let words = split_sentence(line);
        if self.run.data.subword() {
            words.iter().flat_map(|w| toy_subword_split(w)).collect()
        } else {
            words
        }
    }

    fn target_tokens(&self, line: &str) -> Vec<String> {
        let words = split_sentence(line);
        if self.run.data.subword() {
            words.iter().flat_map(|w| toy_subword_split(w)).collect()
        } else {
            words
        }
    }

    fn segs_for(&self, tokens: &[&[String]]) -> Option<Vec<Segmentation>> {
        self.model
            .config()
            .uses_word_patterns()
            .then(|| tokens.iter().map(|t| Segmentation::from_subwords(t)).collect())
    }

    fn decode_chunk(&self, model: &Model, tokens: &[Vec<String>]) -> Result<Vec<String>, SystemError> {
        let ids: Vec<Vec<usize>> = tokens.iter().map(|t| self.src_vocab.encode(t)).collect();
        let idx: Vec<usize> = (0..ids.len()).filter(|&i| !ids[i].is_empty()).collect();
        let mut out = vec![String::new(); ids.len()];
        if idx.is_empty() {
            return Ok(out);
        }
        let srcs: Vec<&[usize]> = idx.iter().map(|&i| ids[i].as_slice()).collect();
        let toks: Vec<&[String]> = idx.iter().map(|&i| tokens[i].as_slice()).collect();
        let segs = self.segs_for(&toks);
        let longest = srcs.iter().map(|s| s.len()).max().unwrap_or(0);
        let steps = 2 * longest + 10;
        let hyps = model.greedy_decode_batch(&srcs, steps, segs.as_deref())?;
        for (&i, h) in idx.iter().zip(hyps) {
            out[i] = join_subwords(&self.tgt_vocab.decode(&h)).join(" ");
        }
        Ok(out)
    }

    /// Greedy translation of each line; empty lines stay empty. Work is
    /// split into fixed chunks spread over `threads` workers, so output
    /// does not depend on the thread count.
    pub fn translate(&self, lines: &[String], threads: usize) -> Result<Vec<String>, SystemError> {
        self.translate_with(&self.model, lines, threads)
    }

    fn translate_with(&self, model: &Model, lines: &[String], threads: usize) -> Result<Vec<String>, SystemError> {
        let tokens: Vec<Vec<String>> = lines.iter().map(|l| self.source_tokens(l)).collect();
        let chunks: Vec<&[Vec<String>]> = tokens.chunks(DECODE_CHUNK).collect();
        let threads = threads.max(1).min(chunks.len().max(1));
        if threads == 1 {
            let mut out = Vec::with_capacity(lines.len());
            for c in chunks {
                out.extend(self.decode_chunk(model, c)?);
            }
            return Ok(out);
        }
        let results: Vec<Result<Vec<String>, SystemError>> = std::thread::scope(|s| {
            let workers: Vec<_> = (0..threads)
                .map(|w| {
                    let chunks = &chunks;
                    s.spawn(move || {
                        (w..chunks.len())
                            .step_by(threads)
                            .map(|c| (c, self.decode_chunk(model, chunks[c])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            let mut all: Vec<(usize, Result<Vec<String>, SystemError>)> =
                workers.into_iter().flat_map(|h| h.join().expect("decode worker panicked")).collect();
            all.sort_by_key(|(c, _)| *c);
            all.into_iter().map(|(_, r)| r).collect()
        });
        let mut out = Vec::with_capacity(lines.len());
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }

    /// Reference lines normalised the same way as system output.
    fn normalise_references(&self, refs: &[String]) -> Vec<String> {
        refs.iter().map(|r| join_subwords(&split_sentence(r)).join(" ")).collect()
    }

    pub fn evaluate(&self, src: &[String], refs: &[String], by_length: Option<&[usize]>, threads: usize) -> Result<(EvaluationReport, Vec<String>), SystemError> {
        if src.len() != refs.len() {
            return Err(SystemError::Data(DataError::Corpus(format!(
                "{} source lines but {} references",
                src.len(),
                refs.len()
            ))));
        }
        let hyps = self.translate(src, threads)?;
        let refs = self.normalise_references(refs);
        let report = score(&hyps, &refs, by_length)?;
        Ok((report, hyps))
    }

    /// BLEU change when each encoder head is masked in every layer.
    pub fn ablate(&self, src: &[String], refs: &[String], threads: usize) -> Result<AblationTable, SystemError> {
        if src.len() != refs.len() {
            return Err(SystemError::Data(DataError::Corpus(format!(
                "{} source lines but {} references",
                src.len(),
                refs.len()
            ))));
        }
        let refs = self.normalise_references(refs);
        let full = corpus_bleu(&self.translate(src, threads)?, &refs)?.bleu;
        let mut rows = vec![AblationRow {
            head: None,
            pattern: "full model".into(),
            bleu: full,
            delta: 0.0,
        }];
        for (h, spec) in self.model.config().enc_head_specs.iter().enumerate() {
            let masked = self.model.with_head_masked(h)?;
            let bleu = corpus_bleu(&self.translate_with(&masked, src, threads)?, &refs)?.bleu;
            let pattern = if spec.is_learned() {
                "learned".to_string()
            } else if spec.word_based {
                format!("{} (word)", spec.kind)
            } else {
                spec.kind.to_string()
            };
            rows.push(AblationRow {
                head: Some(h),
                pattern,
                bleu,
                delta: bleu - full,
            });
        }
        Ok(AblationTable { rows })
    }

    /// Sum of target log-probabilities, end-of-sentence included.
    pub fn sequence_scores(&self, pairs: &[(Vec<String>, Vec<String>)]) -> Result<Vec<f64>, SystemError> {
        let mut scores = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(DECODE_CHUNK) {
            let src: Vec<Vec<usize>> = chunk.iter().map(|(s, _)| self.src_vocab.encode(s)).collect();
            let tgt: Vec<Vec<usize>> = chunk
                .iter()
                .map(|(_, t)| {
                    let mut ids = self.tgt_vocab.encode(t);
                    ids.push(EOS);
                    ids
                })
                .collect();
            let src_refs: Vec<&[usize]> = src.iter().map(Vec::as_slice).collect();
            let tgt_refs: Vec<&[usize]> = tgt.iter().map(Vec::as_slice).collect();
            let toks: Vec<&[String]> = chunk.iter().map(|(s, _)| s.as_slice()).collect();
            let segs = self.segs_for(&toks);
            for lp in self.model.score_batch(&src_refs, &tgt_refs, segs.as_deref())? {
                scores.push(lp.iter().sum());
            }
        }
        Ok(scores)
    }

    pub fn score_contrastive(&self, items: &[ContrastiveItem], by_attribute: bool) -> Result<(ContrastiveReport, Vec<ScoredPair>), SystemError> {
        let prep = |s: &[String]| self.source_tokens(&s.join(" "));
        let prep_t = |s: &[String]| self.target_tokens(&s.join(" "));
        let mut pairs = Vec::with_capacity(items.len() * 2);
        for it in items {
            pairs.push((prep(&it.source), prep_t(&it.reference)));
            pairs.push((prep(&it.source), prep_t(&it.contrastive)));
        }
        let scores = self.sequence_scores(&pairs)?;
        let scored: Vec<ScoredPair> = items
            .iter()
            .enumerate()
            .map(|(i, it)| ScoredPair {
                reference: scores[2 * i],
                contrastive: scores[2 * i + 1],
                attribute: it.attribute,
            })
            .collect();
        Ok((contrastive_accuracy(&scored, by_attribute)?, scored))
    }
}

/// Score hypotheses against references, with length buckets when `edges`
/// is given.
pub fn score(hyps: &[String], refs: &[String], edges: Option<&[usize]>) -> Result<EvaluationReport, SystemError> {
    let report = corpus_bleu(hyps, refs)?;
    let buckets = match edges {
        Some(e) => Some(bucketed_bleu(hyps, refs, e, BleuOptions::default())?),
        None => None,
    };
    Ok(EvaluationReport::new(report, buckets))
}

/// Train a fresh system as described by `run`.
pub fn train_system<F: FnMut(&crate::train::LogRow)>(run: RunConfig, on_log: F) -> Result<(System, crate::train::TrainSummary), SystemError> {
    let (mut sys, data) = System::from_run(run)?;
    let summary = crate::train::train(&mut sys.model, &data, &sys.run.train, on_log)?;
    Ok((sys, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataError;

    fn tiny_run() -> RunConfig {
        let mut run = RunConfig::default();
        run.model.d_model = 16;
        run.model.d_ff = 16;
        run.train.steps = 3;
        run.train.batch_tokens = 50;
        run.data = DataSource::Synthetic {
            task: Task::Copy,
            vocab_size: 6,
            sentences: 30,
            min_len: 2,
            max_len: 5,
            seed: 4,
        };
        run
    }

    #[test]
    fn partial_run_file_takes_defaults() {
        let run: RunConfig = serde_json::from_str(
            r#"{"train": {"adam": {"lr": 0.001}}, "data": {"kind": "synthetic", "task": "reverse", "sentences": 50}}"#,
        )
        .unwrap();
        assert_eq!(run.train.adam.beta2, 0.98);
        assert_eq!(run.train.adam.lr, 0.001);
        let DataSource::Synthetic { task, sentences, vocab_size, .. } = run.data else {
            panic!("expected synthetic data")
        };
        assert_eq!((task, sentences, vocab_size), (Task::Reverse, 50, 20));
        assert_eq!(run.model, ModelConfig::default());
    }

    #[test]
    fn save_load_translate_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (sys, _) = train_system(tiny_run(), |_| {}).unwrap();
        sys.save(dir.path()).unwrap();
        let back = System::load(dir.path()).unwrap();
        assert_eq!(back.run, sys.run);
        let lines = vec!["w1 w2 w3".to_string(), String::new(), "w4 unknownword".to_string()];
        let a = sys.translate(&lines, 1).unwrap();
        assert_eq!(a, back.translate(&lines, 3).unwrap());
        assert_eq!(a[1], "");
    }

    #[test]
    fn vocabulary_mismatch_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let (sys, _) = train_system(tiny_run(), |_| {}).unwrap();
        sys.save(dir.path()).unwrap();
        fs::write(dir.path().join(SRC_VOCAB_FILE), "a\nb\n").unwrap();
        assert!(matches!(System::load(dir.path()), Err(SystemError::Config(_))));
    }

    #[test]
    fn ablation_baseline_row_is_zero() {
        let (sys, _) = train_system(tiny_run(), |_| {}).unwrap();
        let src: Vec<String> = vec!["w0 w1 w2".into(), "w3 w4".into()];
        let t = sys.ablate(&src, &src, 1).unwrap();
        assert_eq!(t.rows.len(), 9);
        assert_eq!(t.rows[0].delta, 0.0);
        assert_eq!(t.render(), sys.ablate(&src, &src, 2).unwrap().render());
    }

    #[test]
    fn evaluate_checks_alignment() {
        let (sys, _) = train_system(tiny_run(), |_| {}).unwrap();
        let err = sys.evaluate(&["w1".into()], &[], None, 1).unwrap_err();
        assert!(matches!(err, SystemError::Data(DataError::Corpus(_))));
    }

    #[test]
    fn run_config_json_round_trip() {
        let run = tiny_run();
        let text = serde_json::to_string(&run).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), run);
        assert!(text.contains("\"kind\":\"synthetic\""));
    }
}
