//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fixattn::data::{make_synthetic, Batch, ContrastiveItem, EncodedPair, SentencePair, Task, EOS};
use fixattn::eval::{contrastive_accuracy, corpus_bleu, paired_bootstrap, ScoredPair};
use fixattn::model::{
    multi_head_attention, param_count, AttentionVars, AttnShape, Dropout, FixedEnergies, HeadPreset, HeadSpec, Model,
    ModelConfig,
};
use fixattn::patterns::{build_token_pattern, build_word_pattern, pattern_bank, PatternKind, PatternVariant, Segmentation};
use fixattn::system::{train_system, DataSource, RunConfig, System};
use fixattn::tensor::{finite_difference_check, GradCheckConfig, Graph, Tensor, TensorError};
use fixattn::train::{token_accuracy, TrainConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const COPY_SENTENCES: usize = 2000;
const HELD_OUT: usize = 200;

fn main() {
    let mut failed = 0;
    let mut copy_model: Option<System> = None;
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut()| {
        let start = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(f)).is_ok();
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {name}: {verdict} ({:.1}s)", start.elapsed().as_secs_f64());
        if !ok {
            failed += 1;
        }
    };
    run(1, "pattern stochasticity", &mut stochasticity);
    run(2, "cubic weights and flip symmetry", &mut cubic_and_flip);
    run(3, "parameter deltas", &mut parameter_deltas);
    run(4, "gradient check", &mut gradients);
    run(5, "learned head reproduces CurrentToken", &mut learned_equals_fixed);
    run(6, "toy copy training", &mut || copy_model = Some(copy_training()));
    run(7, "ablation harness", &mut || ablation(copy_model.as_ref().expect("copy model from criterion 6")));
    run(8, "BLEU oracle", &mut bleu_oracle);
    run(9, "contrastive protocol", &mut contrastive);
    run(10, "bootstrap determinism", &mut bootstrap);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}

fn check_rows(m: &fixattn::patterns::PatternMatrix, what: &str) {
    for (i, row) in m.rows().enumerate() {
        assert!(row.iter().all(|&v| v >= 0.0), "{what}: negative entry in row {i}");
        let s: f64 = row.iter().sum();
        assert!((s - 1.0).abs() <= 1e-9, "{what}: row {i} sums to {s}");
    }
}

fn random_segmentation(rng: &mut StdRng, n: usize) -> Segmentation {
    let mut word_of = Vec::with_capacity(n);
    let mut w = 0;
    for p in 0..n {
        if p > 0 && rng.gen_bool(0.6) {
            w += 1;
        }
        word_of.push(w);
    }
    Segmentation::new(word_of).unwrap()
}

fn stochasticity() {
    let mut rng = StdRng::seed_from_u64(7);
    for kind in PatternKind::FIXED {
        for n in 1..=64 {
            check_rows(&build_token_pattern(kind, n).unwrap(), &format!("{kind:?} token n={n}"));
            for trial in 0..4 {
                let seg = random_segmentation(&mut rng, n);
                check_rows(&build_word_pattern(kind, &seg).unwrap(), &format!("{kind:?} word n={n} trial {trial}"));
            }
            check_rows(&build_word_pattern(kind, &Segmentation::identity(n)).unwrap(), &format!("{kind:?} identity n={n}"));
        }
    }
}

fn cubic_and_flip() {
    for n in 5..=12 {
        let m = build_token_pattern(PatternKind::LeftContext, n).unwrap();
        let mut expected = vec![0.0; n];
        expected[..3].copy_from_slice(&[1.0 / 36.0, 8.0 / 36.0, 27.0 / 36.0]);
        for (j, (&a, &b)) in m.row(4).iter().zip(&expected).enumerate() {
            assert!((a - b).abs() <= 1e-12, "n={n} column {j}: {a} vs {b}");
        }
    }
    let pairs = [
        (PatternKind::LeftContext, PatternKind::RightContext),
        (PatternKind::EndOfSentence, PatternKind::StartOfSentence),
    ];
    for (a, b) in pairs {
        for n in 1..=64 {
            let pa = build_token_pattern(a, n).unwrap();
            let pb = build_token_pattern(b, n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(pa.get(i, j), pb.get(n - 1 - i, n - 1 - j), "{a:?}/{b:?} n={n} ({i},{j})");
                }
            }
        }
    }
}

fn parameter_deltas() {
    let count = |p| param_count(&ModelConfig::base(p, 32000, 32000));
    let learned = count(HeadPreset::AllLearned);
    let fixed = count(HeadPreset::FixedToken);
    let all_fixed = count(HeadPreset::AllFixed);
    // Query and key projections of the removed heads: layers x {Q, K} x d_model x heads x d_k.
    let (layers, d, dk) = (6, 512, 64);
    assert_eq!(2 * layers * d * 7 * dk, 2_752_512);
    assert_eq!(2 * layers * d * dk, 393_216);
    assert_eq!(learned.weights - fixed.weights, 2_752_512);
    assert_eq!(fixed.weights - all_fixed.weights, 393_216);
    assert_eq!(learned.biases - fixed.biases, 2 * layers * 7 * dk);
    assert_eq!(count(HeadPreset::SingleLearned).total, learned.total);
    // Published totals 91.7M, 88.9M and 88.5M are rounded to 0.1M.
    let m = |x: usize| x as f64 / 1e6;
    assert!((m(learned.total - fixed.total) - (91.7 - 88.9)).abs() <= 0.1 + 1e-9);
    assert!((m(fixed.total - all_fixed.total) - (88.9 - 88.5)).abs() <= 0.1 + 1e-9);
    println!("    base deltas: {} and {} weights", learned.weights - fixed.weights, fixed.weights - all_fixed.weights);
}

fn tiny(specs: Vec<HeadSpec>) -> Model {
    let cfg = ModelConfig {
        d_model: 16,
        d_ff: 12,
        n_heads: specs.len(),
        enc_head_specs: specs,
        dec_heads: None,
        enc_layers: 2,
        dec_layers: 1,
        src_vocab: 9,
        tgt_vocab: 8,
        seed: 3,
        ..Default::default()
    };
    Model::new(cfg).unwrap()
}

fn gradcheck(model: &Model, batch: &Batch) -> usize {
    let mut work = model.clone();
    let mut params: Vec<Tensor> = model.params().tensors().to_vec();
    let cfg = GradCheckConfig {
        eps: 1e-5,
        tol: 1e-4,
        coords_per_tensor: usize::MAX,
        ..Default::default()
    };
    let reports = finite_difference_check(
        &mut params,
        |ps| {
            work.params_mut().tensors_mut().clone_from_slice(ps);
            let out = work.loss_and_grads(batch, None).map_err(|e| TensorError::Numerical(e.to_string()))?;
            Ok((out.loss, out.grads))
        },
        &cfg,
    )
    .unwrap();
    let mut coords = 0;
    for r in &reports {
        assert!(r.passed, "{}: {r:?}", model.params().name(r.index));
        assert_eq!(r.coords_checked, model.params().tensors()[r.index].data().len());
        coords += r.coords_checked;
    }
    coords
}

fn gradients() {
    let segs = vec![Segmentation::new(vec![0, 0, 1, 2]).unwrap(), Segmentation::new(vec![0, 1, 1]).unwrap()];
    let batch = Batch::new(&[&[4, 5, 6, 7], &[8, 4, 5]], &[&[4, 5, 6], &[7, 4]], Some(segs));
    let learned = tiny(vec![HeadSpec::learned(), HeadSpec::learned()]);
    let fixed = tiny(vec![HeadSpec::token(PatternKind::PrevToken), HeadSpec::word(PatternKind::LeftContext)]);
    assert!(fixed.params().by_name("enc.0.self.v.w").is_some());
    assert!(fixed.params().by_name("enc.0.self.q.w").is_none());
    let a = gradcheck(&learned, &batch);
    let b = gradcheck(&fixed, &batch);
    println!("    checked {a} learned-head and {b} fixed-head coordinates");
}

fn run_head(x: &Tensor, spec: HeadSpec, qk: Option<(Tensor, Tensor)>, v: &Tensor, o: &Tensor) -> Tensor {
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let zero = |g: &mut Graph| g.constant(Tensor::zeros(&[d]));
    let (q, k) = match qk {
        Some((wq, wk)) => {
            let q = (g.constant(wq), zero(&mut g));
            let k = (g.constant(wk), zero(&mut g));
            (Some(q), Some(k))
        }
        None => (None, None),
    };
    let vv = (g.constant(v.clone()), zero(&mut g));
    let ov = (g.constant(o.clone()), zero(&mut g));
    let vars = AttentionVars { q, k, v: vv, o: ov };
    let specs = [spec];
    let energies = if spec.is_learned() {
        FixedEnergies::empty()
    } else {
        let bank = pattern_bank(&[(PatternKind::CurrentToken, PatternVariant::Token)], &[n], None).unwrap();
        FixedEnergies::from_bank(&mut g, &bank, &specs, 1).unwrap()
    };
    let shape = AttnShape { batch: 1, tq: n, tk: n };
    let out = multi_head_attention(&mut g, xv, xv, shape, &specs, &vars, &energies, None, &[false], &mut Dropout::disabled()).unwrap();
    g.value(out).clone()
}

fn learned_equals_fixed() {
    let d = 4;
    // Rows of a normalised Hadamard matrix are orthonormal.
    let h = [1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
    let x = Tensor::new(vec![d, d], h.iter().map(|v| v * 0.5).collect()).unwrap();
    let eye = |c: f64| {
        let mut t = Tensor::zeros(&[d, d]);
        for i in 0..d {
            t.data_mut()[i * d + i] = c;
        }
        t
    };
    let v = Tensor::new(vec![d, d], (0..d * d).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
    let o = Tensor::new(vec![d, d], (0..d * d).map(|i| (i as f64 * 1.3).cos()).collect()).unwrap();
    let fixed = run_head(&x, HeadSpec::token(PatternKind::CurrentToken), None, &v, &o);
    // Scores are c * <x_i, x_j> / sqrt(d): c / 2 on the diagonal, 0 elsewhere.
    let c = 80.0;
    let learned = run_head(&x, HeadSpec::learned(), Some((eye(c), eye(1.0))), &v, &o);
    let worst = fixed.data().iter().zip(learned.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("    max |learned - fixed| = {worst:.3e}");
    assert!(worst <= 1e-6);
}

fn held_out(task: Task) -> (Vec<SentencePair>, Vec<ContrastiveItem>) {
    // The first sentences of a longer draw equal the training corpus, and
    // the symbol mapping is shared.
    let c = make_synthetic(task, 20, COPY_SENTENCES + HELD_OUT, 3..=10, 1).unwrap();
    (c.pairs[COPY_SENTENCES..].to_vec(), c.contrastive[COPY_SENTENCES..].to_vec())
}

fn toy_run(task: Task, preset: HeadPreset, steps: usize) -> RunConfig {
    let mut train = TrainConfig {
        steps,
        batch_tokens: 250,
        log_every: 500,
        ..Default::default()
    };
    train.adam.lr = 1e-3;
    RunConfig {
        model: ModelConfig::toy(preset, 0),
        train,
        data: DataSource::Synthetic {
            task,
            vocab_size: 20,
            sentences: COPY_SENTENCES,
            min_len: 3,
            max_len: 10,
            seed: 1,
        },
    }
}

fn lines(pairs: &[SentencePair]) -> (Vec<String>, Vec<String>) {
    pairs.iter().map(|p| (p.src.join(" "), p.tgt.join(" "))).unzip()
}

fn copy_training() -> System {
    let (pairs, _) = held_out(Task::Copy);
    let (src, refs) = lines(&pairs);
    let mut kept = None;
    for preset in [HeadPreset::AllLearned, HeadPreset::FixedToken] {
        let (sys, _) = train_system(toy_run(Task::Copy, preset, 2000), |_| {}).unwrap();
        let encoded: Vec<EncodedPair> = pairs.iter().map(|p| EncodedPair::encode(p, &sys.src_vocab, &sys.tgt_vocab)).collect();
        let acc = token_accuracy(&sys.model, &encoded, 250).unwrap();
        let (report, _) = sys.evaluate(&src, &refs, None, 1).unwrap();
        println!("    {preset}: held-out token accuracy {acc:.4}, greedy BLEU {:.2}", report.bleu);
        assert!(acc >= 0.99, "{preset} accuracy {acc}");
        assert!(report.bleu >= 95.0, "{preset} BLEU {}", report.bleu);
        kept = Some(sys);
    }
    kept.unwrap()
}

fn fixattn(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_fixattn")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ablation(sys: &System) {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model");
    sys.save(&model).unwrap();
    let (pairs, _) = held_out(Task::Copy);
    let (src, refs) = lines(&pairs);
    let src_file = dir.path().join("test.src");
    let ref_file = dir.path().join("test.ref");
    std::fs::write(&src_file, src.join("\n") + "\n").unwrap();
    std::fs::write(&ref_file, refs.join("\n") + "\n").unwrap();
    let args = ["ablate", "--model", path(&model), "--src", path(&src_file), "--ref", path(&ref_file)];
    let first = fixattn(&args);
    assert_eq!(first, fixattn(&args), "text output differs between runs");
    let mut json_args = args.to_vec();
    json_args.push("--json");
    let a = fixattn(&json_args);
    assert_eq!(a, fixattn(&json_args), "JSON output differs between runs");
    for line in String::from_utf8_lossy(&first).lines() {
        println!("    {line}");
    }

    let table: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let rows = table["rows"].as_array().unwrap();
    assert!(rows[0]["head"].is_null());
    assert_eq!(rows[0]["delta"].as_f64(), Some(0.0));
    let delta = |pattern: &str| {
        rows.iter().find(|r| r["pattern"] == pattern).map(|r| r["delta"].as_f64().unwrap()).unwrap()
    };
    assert_ne!(delta("CurrentToken"), 0.0);
    assert_ne!(delta("learned"), 0.0);
}

fn bleu_oracle() {
    let close = |a: f64, b: f64| assert!((a - b).abs() <= 1e-9, "{a} vs {b}");

    // n-gram matches 5/6, 3/5, 2/4, 1/3; equal lengths.
    let r = corpus_bleu(&["the cat sat on the mat"], &["the cat sat on a mat"]).unwrap();
    close(r.bleu, 100.0 * (5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0f64).powf(0.25));
    close(r.bp, 1.0);

    // Every n-gram matches; 8 hypothesis tokens against 10 reference tokens.
    let r = corpus_bleu(&["a b c d", "x y z w"], &["a b c d e f", "x y z w"]).unwrap();
    for p in r.precisions {
        close(p, 1.0);
    }
    close(r.bp, (1.0 - 10.0 / 8.0f64).exp());
    close(r.bleu, 100.0 * (-0.25f64).exp());

    // Clipping: "the" occurs three times in the hypothesis, twice in the reference.
    let r = corpus_bleu(&["the the the cat", "a b c d e"], &["the cat the", "a b c d e"]).unwrap();
    let p = [8.0 / 9.0, 5.0 / 7.0, 3.0 / 5.0, 2.0 / 3.0];
    for (a, b) in r.precisions.iter().zip(p) {
        close(*a, b);
    }
    close(r.bleu, 100.0 * (p.iter().product::<f64>()).powf(0.25));

    let text = ["one two three four five", "six seven eight nine"];
    assert_eq!(corpus_bleu(&text, &text).unwrap().bleu, 100.0);
}

fn contrastive() {
    let (sys, _) = train_system(toy_run(Task::LexicalTranslate, HeadPreset::FixedToken, 600), |_| {}).unwrap();
    let (_, items) = held_out(Task::LexicalTranslate);
    let (report, scored) = sys.score_contrastive(&items, false).unwrap();
    println!("    accuracy {:.4} ({}/{})", report.accuracy, report.correct, report.total);
    assert_eq!(report.total, items.len());
    assert!(report.accuracy > 0.9);

    // Oracle: score each target token with its own decoder pass over the
    // prefix, and count wins by hand.
    let prefix_score = |src: &[usize], tgt: &[usize]| -> f64 {
        (1..=tgt.len()).map(|k| *sys.model.score_sequence(src, &tgt[..k], None).unwrap().last().unwrap()).sum()
    };
    let with_eos = |toks: &[String]| {
        let mut ids = sys.tgt_vocab.encode(toks);
        ids.push(EOS);
        ids
    };
    let mut oracle = Vec::new();
    for (it, s) in items.iter().zip(&scored).take(20) {
        let src = sys.src_vocab.encode(&it.source);
        let reference = prefix_score(&src, &with_eos(&it.reference));
        let contrastive = prefix_score(&src, &with_eos(&it.contrastive));
        assert!((reference - s.reference).abs() <= 1e-9, "{reference} vs {}", s.reference);
        assert!((contrastive - s.contrastive).abs() <= 1e-9, "{contrastive} vs {}", s.contrastive);
        oracle.push(ScoredPair { reference, contrastive, attribute: it.attribute });
    }
    let wins = oracle.iter().filter(|p| p.reference > p.contrastive).count();
    let sub = contrastive_accuracy(&scored[..20], false).unwrap();
    assert_eq!(sub.correct, wins);
    assert_eq!(sub.accuracy, wins as f64 / 20.0);
}

fn bootstrap() {
    let c = make_synthetic(Task::Copy, 20, 300, 3..=10, 4).unwrap();
    let refs: Vec<String> = c.pairs.iter().map(|p| p.tgt.join(" ")).collect();
    // A system that drops the last token of every third sentence.
    let a: Vec<String> = c
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| if i % 3 == 0 { p.tgt[..p.tgt.len() - 1].join(" ") } else { p.tgt.join(" ") })
        .collect();
    let b: Vec<String> = refs.iter().enumerate().map(|(i, r)| if i % 5 == 0 { "w0".to_string() } else { r.clone() }).collect();
    let first = paired_bootstrap(&a, &b, &refs, 500, 11).unwrap();
    let second = paired_bootstrap(&a, &b, &refs, 500, 11).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.p_value.to_bits(), second.p_value.to_bits());
    let own = paired_bootstrap(&a, &a, &refs, 500, 11).unwrap();
    assert_eq!((own.wins_a, own.wins_b, own.ties), (0, 0, 500));
    println!("    p-value {:.4} over {} resamples", first.p_value, first.n_resamples);
}
