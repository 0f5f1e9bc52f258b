mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use pollforge::corpus::Split;
use pollforge::decoder::{generate, generate_scored, DecodeConfig, PollGenerator};
use pollforge::formatting::{Limits, TaskFormat, TaskKind, TaskSet};
use pollforge::model::{Backbone, Matrix, MemoryBank, ModelError, ReferenceModel, TokenSequence, TrainableBackbone, EOS_ID};
use pollforge::pipeline::{build_tokenizer, load_run, predict_split, save_run, train_run, RunConfig};
use pollforge::synthetic::synthetic_corpus;
use pollforge::tokenizer::Tokenizer;
use pollforge::trainer::{combined_loss, instance_loss, selection_score, EncodedInstance, TrainConfig};

/// Same next-token distribution at every step, whatever the input.
struct Fixed(Vec<f64>);

impl Backbone for Fixed {
    fn vocab_size(&self) -> usize {
        self.0.len()
    }
    fn max_positions(&self) -> usize {
        64
    }
    fn encode(&self, _: &TokenSequence) -> Result<MemoryBank, ModelError> {
        Ok(MemoryBank { states: Matrix::zeros(1, 1) })
    }
    fn next_token_distribution(&self, _: &TokenSequence, _: &MemoryBank) -> Result<Vec<f64>, ModelError> {
        Ok(self.0.clone())
    }
}

/// Emits a fixed token script with probability one, then EOS.
struct Scripted {
    vocab: usize,
    script: Vec<u32>,
}

impl Backbone for Scripted {
    fn vocab_size(&self) -> usize {
        self.vocab
    }
    fn max_positions(&self) -> usize {
        64
    }
    fn encode(&self, _: &TokenSequence) -> Result<MemoryBank, ModelError> {
        Ok(MemoryBank { states: Matrix::zeros(1, 1) })
    }
    fn next_token_distribution(&self, prefix: &TokenSequence, _: &MemoryBank) -> Result<Vec<f64>, ModelError> {
        let mut d = vec![0.0; self.vocab];
        d[*self.script.get(prefix.len() - 1).unwrap_or(&EOS_ID) as usize] = 1.0;
        Ok(d)
    }
}

fn enc(kind: TaskKind, target: &[u32]) -> EncodedInstance {
    EncodedInstance {
        sample_id: "x".into(),
        kind,
        source: TokenSequence(vec![3]),
        target: TokenSequence(target.to_vec()),
    }
}

#[test]
fn hand_computed_batch_loss() {
    let model = Fixed(vec![0.0, 0.1, 0.3, 0.4, 0.2]);
    let batch = [enc(TaskKind::Main, &[3, 2]), enc(TaskKind::Qg, &[3, 3, 2]), enc(TaskKind::Main, &[2])];
    let cfg = TrainConfig {
        gamma_q: 0.5,
        gamma_a: 7.0,
        ..TrainConfig::published(TaskSet::full(), 1)
    };
    let l = combined_loss(&batch, &model, &cfg).unwrap();
    assert!((l.main - 1.132052286212991).abs() < 1e-12);
    assert!((l.qg - 1.0121847560247488).abs() < 1e-12);
    assert_eq!(l.ag, 0.0);
    assert!((l.combined - 1.6381446642253654).abs() < 1e-12);
    assert_eq!((l.counts.main, l.counts.qg, l.counts.ag), (2, 1, 0));
}

#[test]
fn uniform_model_costs_log_vocab_per_token() {
    let m = tiny_model(7, 8, 1, 3);
    let mut params = m.parameters().clone();
    params.set_flat(&vec![0.0; params.num_scalars()]).unwrap();
    let zero = ReferenceModel::from_parameters(m.config().clone(), params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10 {
        let inst = random_instance(&mut rng, 7, TaskKind::Main);
        let l = instance_loss(&zero, &inst.source, &inst.target).unwrap();
        assert!((l - 7f64.ln()).abs() < 1e-12, "{l}");
    }
    let batch: Vec<_> = TaskKind::ALL.iter().map(|&k| random_instance(&mut rng, 7, k)).collect();
    let l = combined_loss(&batch, &zero, &TrainConfig::published(TaskSet::full(), 1)).unwrap();
    assert!((l.combined - 3.0 * 7f64.ln()).abs() < 1e-12);
}

#[test]
fn a_certain_model_has_zero_loss_and_decodes_its_script() {
    let m = Scripted {
        vocab: 9,
        script: vec![4, 8, 7, 5, 8],
    };
    let target = TokenSequence(m.script.clone()).with_eos();
    assert_eq!(instance_loss(&m, &TokenSequence(vec![3]), &target).unwrap(), 0.0);
    for beam_size in [1, 3] {
        let out = generate(&m, &TokenSequence(vec![3]), &DecodeConfig { beam_size, ..Default::default() }).unwrap();
        assert_eq!(out, target);
    }
}

#[test]
fn external_backbone_drives_the_poll_generator() {
    let corpus = synthetic_corpus(20, 1);
    let format = TaskFormat::default();
    let tok = build_tokenizer(&corpus, &format, 1);
    let s = corpus.split(Split::Test).next().unwrap();
    let text = format!("{} {} {} a {} b", format.tokens.question_tok, s.question, format.tokens.answers_tok, format.tokens.answer_sep);
    let script = tok.encode(&text).0;
    let m = Scripted { vocab: tok.vocab_size(), script };
    let g = PollGenerator {
        model: &m,
        tokenizer: &tok,
        format: &format,
        limits: Limits::default(),
        decode: DecodeConfig::default(),
        dedupe: false,
    };
    let out = g.predict_poll(s).unwrap();
    assert!(out.parse_ok, "{out:?}");
    assert_eq!(out.question, s.question);
    assert_eq!(out.answers.len(), 2);
}

#[test]
fn wider_beams_never_score_lower() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..15 {
        let m = tiny_model(9, 8, 1, seed);
        let src = TokenSequence(random_ids(&mut rng, 9, 1, 5));
        let one = generate_scored(&m, &src, &DecodeConfig { beam_size: 1, max_output_len: 6, length_penalty: 0.0 }).unwrap();
        for k in [2, 4, 8] {
            let h = generate_scored(&m, &src, &DecodeConfig { beam_size: k, max_output_len: 6, length_penalty: 0.0 }).unwrap();
            assert!(h.score >= one.score - 1e-12, "beam {k}: {} < {}", h.score, one.score);
            let memory = m.encode(&src).unwrap();
            assert!((m.prefix_log_prob(&memory, &h.tokens).unwrap() - h.log_prob).abs() < 1e-9);
        }
    }
}

#[test]
fn fixed_distribution_beam_prefers_lower_ids_on_ties() {
    // Tokens 3 and 4 tie; the best outputs are EOS alone.
    let m = Fixed(vec![0.0, 0.0, 0.4, 0.3, 0.3]);
    let h = generate_scored(&m, &TokenSequence(vec![3]), &DecodeConfig { beam_size: 4, max_output_len: 3, length_penalty: 0.0 }).unwrap();
    assert_eq!(h.tokens, vec![EOS_ID]);
    let m = Fixed(vec![0.0, 0.0, 0.1, 0.45, 0.45]);
    let h = generate_scored(&m, &TokenSequence(vec![3]), &DecodeConfig { beam_size: 4, max_output_len: 2, length_penalty: 0.0 }).unwrap();
    assert_eq!(h.tokens, vec![3, 3]);
}

#[test]
fn training_selects_the_best_validation_epoch_and_reloads_exactly() {
    let corpus = synthetic_corpus(80, 4);
    let mut cfg = RunConfig::desk(TaskSet::full(), 40);
    cfg.train.epochs = 6;
    let run = train_run(&corpus, &cfg).unwrap();
    let h = &run.history;
    assert_eq!(h.epochs.len(), 6);
    let best = h.epochs.iter().map(|e| e.selection_score).fold(f64::MIN, f64::max);
    let first_best = h.epochs.iter().find(|e| e.selection_score == best).unwrap();
    assert_eq!(h.selected.as_deref(), Some(first_best.checkpoint_id.as_str()));
    for e in &h.epochs {
        assert_eq!(e.selection_score, selection_score(&cfg.train.task_set, e.val_question_rouge1, e.val_answers_rouge1));
        assert_eq!(e.train.counts.main, corpus.count(Split::Train));
    }

    let dir = tempfile::tempdir().unwrap();
    save_run(dir.path(), &run, &cfg).unwrap();
    let (model, tok, cfg2) = load_run(dir.path()).unwrap();
    assert_eq!(cfg2.config_hash(), cfg.config_hash());
    assert_eq!(model.parameters().flat(), run.model.parameters().flat());
    let a = predict_split(&run.model, &run.tokenizer, &cfg, &corpus, Split::Test, TaskKind::Main).unwrap();
    let b = predict_split(&model, &tok, &cfg2, &corpus, Split::Test, TaskKind::Main).unwrap();
    assert_eq!(a, b);
}

#[test]
fn different_seeds_give_different_models() {
    let corpus = synthetic_corpus(40, 4);
    let mut cfg = RunConfig::desk(TaskSet::full(), 40);
    cfg.train.epochs = 1;
    let a = train_run(&corpus, &cfg).unwrap();
    cfg.train.seed = 41;
    let b = train_run(&corpus, &cfg).unwrap();
    assert_ne!(a.model.parameters().flat(), b.model.parameters().flat());
}
