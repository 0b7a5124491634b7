use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use fixattn::data::{make_synthetic, read_contrastive, read_lines, write_contrastive, write_lines, SyntheticCorpus};
use fixattn::eval::{paired_bootstrap, BucketReport};
use fixattn::model::{param_count, HeadPreset, ModelConfig};
use fixattn::patterns::{build_token_pattern, build_word_pattern, dump_pattern, Segmentation};
use fixattn::system::{train_system, DataSource, EvaluationReport, RunConfig, System};
use fixattn::train::LOG_HEADER;
use serde_json::json;

use crate::args::{
    AblateArgs, BootstrapArgs, ContrastiveArgs, DumpArgs, EvaluateArgs, GenDataArgs, ParamsArgs, ShapeArgs, TrainArgs,
    TranslateArgs,
};
use crate::error::CliError;

type Result<T = ()> = std::result::Result<T, CliError>;

fn write_output(path: Option<&Path>, text: &str) -> Result {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::data(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::data(format!("stdout: {e}")))
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn apply_shape(cfg: &mut ModelConfig, shape: &ShapeArgs) {
    if let Some(p) = shape.heads {
        cfg.apply_preset(p);
    }
    if let Some(v) = shape.enc_layers {
        cfg.enc_layers = v;
    }
    if let Some(v) = shape.dec_layers {
        cfg.dec_layers = v;
    }
    if let Some(v) = shape.d_model {
        cfg.d_model = v;
    }
    if let Some(v) = shape.d_ff {
        cfg.d_ff = v;
    }
}

fn run_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut run: RunConfig = match &args.config {
        Some(p) => serde_json::from_value(read_json(p)?).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    apply_shape(&mut run.model, &args.shape);
    if let Some(v) = args.dropout {
        run.model.dropout = v;
    }
    if let Some(v) = args.max_len {
        run.model.max_len = v;
    }
    if let Some(v) = args.seed {
        run.model.seed = v;
        run.train.seed = v;
    }
    if let Some(v) = args.steps {
        run.train.steps = v;
    }
    if let Some(v) = args.lr {
        run.train.adam.lr = v;
    }
    if let Some(v) = args.batch_tokens {
        run.train.batch_tokens = v;
    }
    if let Some(v) = args.log_every {
        run.train.log_every = v;
    }

    if let (Some(src), Some(tgt)) = (&args.src, &args.tgt) {
        run.data = DataSource::Files {
            src: src.clone(),
            tgt: tgt.clone(),
            subword: args.subword,
        };
    } else if args.task.is_some() && matches!(run.data, DataSource::Files { .. }) {
        run.data = DataSource::default();
    }
    let synthetic_flags = args.task.is_some()
        || args.vocab_size.is_some()
        || args.sentences.is_some()
        || args.min_sent_len.is_some()
        || args.max_sent_len.is_some()
        || args.data_seed.is_some();
    match &mut run.data {
        DataSource::Synthetic {
            task,
            vocab_size,
            sentences,
            min_len,
            max_len,
            seed,
        } => {
            *task = args.task.unwrap_or(*task);
            *vocab_size = args.vocab_size.unwrap_or(*vocab_size);
            *sentences = args.sentences.unwrap_or(*sentences);
            *min_len = args.min_sent_len.unwrap_or(*min_len);
            *max_len = args.max_sent_len.unwrap_or(*max_len);
            *seed = args.data_seed.unwrap_or(*seed);
        }
        DataSource::Files { subword, .. } => {
            if synthetic_flags {
                return Err(CliError::usage("synthetic corpus flags cannot be combined with --src/--tgt"));
            }
            *subword |= args.subword;
        }
    }
    Ok(run)
}

pub fn train(args: TrainArgs) -> Result {
    let run = run_config(&args)?;
    let mut log = format!("{LOG_HEADER}\n");
    println!("{LOG_HEADER}");
    let (system, summary) = train_system(run, |row| {
        let line = row.csv();
        println!("{line}");
        log.push_str(&line);
        log.push('\n');
    })?;
    system.save(&args.out)?;
    let log_path = args.out.join("train_log.csv");
    fs::write(&log_path, log).map_err(|e| CliError::data(format!("{}: {e}", log_path.display())))?;
    log::info!(
        "trained {} steps over {} epochs; {} parameters written to {}",
        summary.steps,
        summary.epochs,
        system.model.params().numel(),
        args.out.display()
    );
    Ok(())
}

pub fn translate(args: TranslateArgs) -> Result {
    let system = System::load(&args.model.model)?;
    let lines = read_lines(&args.input)?;
    let out = system.translate(&lines, args.model.threads)?;
    let mut text = String::new();
    for line in out {
        text.push_str(&line);
        text.push('\n');
    }
    write_output(args.output.as_deref(), &text)
}

fn render_report(r: &EvaluationReport) -> String {
    let mut s = format!(
        "BLEU = {:.2} {}/{}/{}/{} (BP = {:.3}, hyp_len = {}, ref_len = {})\n",
        r.bleu,
        pct(r.precisions[0]),
        pct(r.precisions[1]),
        pct(r.precisions[2]),
        pct(r.precisions[3]),
        r.bp,
        r.hyp_len,
        r.ref_len
    );
    if let Some(buckets) = &r.buckets {
        s.push_str(&render_buckets(buckets));
    }
    s
}

fn pct(p: f64) -> String {
    format!("{:.1}", 100.0 * p)
}

fn render_buckets(buckets: &[BucketReport]) -> String {
    let mut s = String::from("length\tsentences\tbleu\n");
    for b in buckets {
        let _ = writeln!(s, "{}\t{}\t{:.2}", b.label, b.sentences, b.report.bleu);
    }
    s
}

pub fn evaluate(args: EvaluateArgs) -> Result {
    let system = System::load(&args.model.model)?;
    let src = read_lines(&args.src)?;
    let refs = read_lines(&args.reference)?;
    let edges = args.by_length.then_some(args.edges.as_slice());
    let (report, hyps) = system.evaluate(&src, &refs, edges, args.model.threads)?;
    if let Some(p) = &args.hyps {
        write_lines(p, &hyps)?;
    }
    let text = if args.json {
        serde_json::to_string_pretty(&report)? + "\n"
    } else {
        render_report(&report)
    };
    write_output(None, &text)
}

pub fn ablate(args: AblateArgs) -> Result {
    let system = System::load(&args.model.model)?;
    let src = read_lines(&args.src)?;
    let refs = read_lines(&args.reference)?;
    let table = system.ablate(&src, &refs, args.model.threads)?;
    let text = if args.json {
        serde_json::to_string_pretty(&table)? + "\n"
    } else {
        table.render()
    };
    write_output(None, &text)
}

pub fn score_contrastive(args: ContrastiveArgs) -> Result {
    let system = System::load(&args.model)?;
    let items = read_contrastive(&args.fixture)?;
    let (report, _) = system.score_contrastive(&items, args.by_attribute)?;
    let text = if args.json {
        serde_json::to_string_pretty(&report)? + "\n"
    } else {
        let mut s = format!("accuracy = {:.4} ({}/{})\n", report.accuracy, report.correct, report.total);
        if let Some(groups) = &report.by_attribute {
            s.push_str("attribute\tpairs\taccuracy\n");
            for (a, g) in groups {
                let _ = writeln!(s, "{a}\t{}\t{:.4}", g.total, g.accuracy);
            }
        }
        s
    };
    write_output(None, &text)
}

fn params_config(args: &ParamsArgs) -> Result<ModelConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let mut v = read_json(p)?;
            if let Some(m) = v.get_mut("model") {
                v = m.take();
            }
            serde_json::from_value(v).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None if args.base => ModelConfig::base(HeadPreset::AllLearned, 32000, 32000),
        None => ModelConfig::toy(HeadPreset::AllLearned, 24),
    };
    apply_shape(&mut cfg, &args.shape);
    if let Some(v) = args.src_vocab {
        cfg.src_vocab = v;
    }
    if let Some(v) = args.tgt_vocab {
        cfg.tgt_vocab = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn params(args: ParamsArgs) -> Result {
    let cfg = params_config(&args)?;
    let mut rows = Vec::new();
    let reference = {
        let mut c = cfg.clone();
        c.apply_preset(HeadPreset::AllLearned);
        param_count(&c)
    };
    for preset in HeadPreset::ALL {
        let mut c = cfg.clone();
        c.apply_preset(preset);
        let count = param_count(&c);
        rows.push((preset, count));
    }
    let selected = param_count(&cfg);
    let text = if args.json {
        let presets: Vec<_> = rows
            .iter()
            .map(|(p, c)| {
                json!({
                    "heads": p.label(),
                    "total": c.total,
                    "weights": c.weights,
                    "biases": c.biases,
                    "norms": c.norms,
                    "delta_weights": reference.weights as i64 - c.weights as i64,
                    "delta_biases": reference.biases as i64 - c.biases as i64,
                })
            })
            .collect();
        let components: serde_json::Map<String, serde_json::Value> =
            selected.components.iter().map(|(n, c)| (n.to_string(), json!(c))).collect();
        serde_json::to_string_pretty(&json!({
            "config": cfg,
            "total": selected.total,
            "components": components,
            "presets": presets,
        }))? + "\n"
    } else {
        let mut s = format!(
            "d_model={} d_ff={} enc_layers={} dec_layers={} src_vocab={} tgt_vocab={}\n",
            cfg.d_model, cfg.d_ff, cfg.enc_layers, cfg.dec_layers, cfg.src_vocab, cfg.tgt_vocab
        );
        s.push_str("heads\ttotal\tweights\tbiases\tnorms\tweights_saved_vs_8L\tbiases_saved_vs_8L\n");
        for (p, c) in &rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.label(),
                c.total,
                c.weights,
                c.biases,
                c.norms,
                reference.weights as i64 - c.weights as i64,
                reference.biases as i64 - c.biases as i64
            );
        }
        let label = cfg.preset().map_or("custom", HeadPreset::label);
        let _ = writeln!(s, "\ncomponents ({label})");
        for (name, n) in &selected.components {
            let _ = writeln!(s, "{name}\t{n}");
        }
        let _ = writeln!(s, "total\t{}", selected.total);
        s
    };
    write_output(None, &text)
}

pub fn dump_patterns(args: DumpArgs) -> Result {
    let matrix = match (&args.sentence, args.length) {
        (Some(sentence), _) => {
            let seg = Segmentation::from_line(sentence);
            if seg.is_empty() {
                return Err(CliError::usage("--sentence is empty"));
            }
            if args.word {
                build_word_pattern(args.kind, &seg)?
            } else {
                build_token_pattern(args.kind, seg.len())?
            }
        }
        (None, Some(n)) => build_token_pattern(args.kind, n)?,
        (None, None) => return Err(CliError::usage("one of --length or --sentence is required")),
    };
    let text = dump_pattern(&matrix, &args.format)?;
    write_output(args.output.as_deref(), &text)
}

fn write_corpus(prefix: &Path, suffix: &str, corpus: &SyntheticCorpus, range: std::ops::Range<usize>) -> Result {
    let path = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(format!("{suffix}.{ext}"));
        std::path::PathBuf::from(p)
    };
    let pairs = &corpus.pairs[range.clone()];
    write_lines(&path("src"), pairs.iter().map(|p| p.src.join(" ")))?;
    write_lines(&path("tgt"), pairs.iter().map(|p| p.tgt.join(" ")))?;
    write_contrastive(&path("contrastive.tsv"), &corpus.contrastive[range])?;
    Ok(())
}

pub fn gen_data(args: GenDataArgs) -> Result {
    if args.test > args.sentences {
        return Err(CliError::usage(format!(
            "--test {} exceeds --sentences {}",
            args.test, args.sentences
        )));
    }
    let corpus = make_synthetic(
        args.task,
        args.vocab_size,
        args.sentences,
        args.min_sent_len..=args.max_sent_len,
        args.seed,
    )
    .map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(parent) = args.out_prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::data(format!("{}: {e}", parent.display())))?;
    }
    let split = args.sentences - args.test;
    write_corpus(&args.out_prefix, "", &corpus, 0..split)?;
    if args.test > 0 {
        write_corpus(&args.out_prefix, ".test", &corpus, split..args.sentences)?;
    }
    Ok(())
}

pub fn bootstrap(args: BootstrapArgs) -> Result {
    let a = read_lines(&args.hyps_a)?;
    let b = read_lines(&args.hyps_b)?;
    let refs = read_lines(&args.reference)?;
    let r = paired_bootstrap(&a, &b, &refs, args.resamples, args.seed)?;
    let text = if args.json {
        serde_json::to_string_pretty(&r)? + "\n"
    } else {
        format!(
            "BLEU A = {:.2}, BLEU B = {:.2}\nA wins {}/{}, B wins {}, ties {}\np_value = {:.4}\n",
            r.bleu_a, r.bleu_b, r.wins_a, r.n_resamples, r.wins_b, r.ties, r.p_value
        )
    };
    write_output(None, &text)
}
