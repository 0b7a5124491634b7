//! Train, save, reload and evaluate a small system end to end.

use fixattn::data::{ContrastiveItem, Task};
use fixattn::system::{train_system, DataSource, RunConfig, System};

fn run() -> RunConfig {
    let mut run = RunConfig::default();
    run.model.d_model = 32;
    run.model.d_ff = 64;
    run.train.steps = 40;
    run.train.batch_tokens = 120;
    run.train.adam.lr = 2e-3;
    run.train.log_every = 10;
    run.data = DataSource::Synthetic {
        task: Task::Reverse,
        vocab_size: 8,
        sentences: 200,
        min_len: 2,
        max_len: 6,
        seed: 2,
    };
    run
}

#[test]
fn reload_reproduces_outputs() {
    let (sys, summary) = train_system(run(), |_| {}).unwrap();
    assert!(summary.log.last().unwrap().loss < summary.log[0].loss);
    let dir = tempfile::tempdir().unwrap();
    sys.save(dir.path()).unwrap();
    let back = System::load(dir.path()).unwrap();
    let lines: Vec<String> = ["w1 w2 w3", "w7", "w0 w0 w5 w6"].iter().map(|s| s.to_string()).collect();
    let a = sys.translate(&lines, 1).unwrap();
    assert_eq!(a, back.translate(&lines, 2).unwrap());

    let (report, hyps) = back.evaluate(&lines, &lines, Some(&[3]), 1).unwrap();
    assert_eq!(hyps, a);
    assert!(report.buckets.is_some());
}

#[test]
fn retraining_is_bit_identical() {
    let (a, _) = train_system(run(), |_| {}).unwrap();
    let (b, _) = train_system(run(), |_| {}).unwrap();
    assert_eq!(a.model.params().tensors(), b.model.params().tensors());
}

#[test]
fn contrastive_scores_are_sequence_sums() {
    let (sys, _) = train_system(run(), |_| {}).unwrap();
    let item = ContrastiveItem {
        source: vec!["w1".into(), "w2".into()],
        reference: vec!["w2".into(), "w1".into()],
        contrastive: vec!["w2".into(), "w2".into()],
        attribute: Some(1),
    };
    let (report, scored) = sys.score_contrastive(std::slice::from_ref(&item), true).unwrap();
    let src = sys.src_vocab.encode(&item.source);
    let mut tgt = sys.tgt_vocab.encode(&item.reference);
    tgt.push(fixattn::data::EOS);
    let expected: f64 = sys.model.score_sequence(&src, &tgt, None).unwrap().iter().sum();
    assert!((scored[0].reference - expected).abs() < 1e-12);
    assert_eq!(report.correct, usize::from(scored[0].reference > scored[0].contrastive));
}
