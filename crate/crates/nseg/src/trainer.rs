//! Max-margin training over beam search with early update.
//!
//! Each example runs one beam search while the gold action prefix is
//! tracked by action-sequence identity. At the first step where the
//! gold prefix is pruned from the beam, the search stops and one hinge
//! update is taken against the best surviving hypothesis; if gold
//! reaches the end without being the top terminal hypothesis, the
//! update compares full sequences instead. At most one optimizer step
//! happens per example, and none when gold already wins.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpusio::{evaluate, EvalResult, SegmentedSentence};
use crate::decoder::{expand, prune, segment_sentence, Hypothesis};
use crate::diffcore::OptimizerState;
use crate::encoders::{Scorer, ScoringModel, TrainNoise};
use crate::error::{Error, Result};
use crate::transition::{gold_actions, Action};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Beam width used both for updates and for dev decoding.
    pub beam: usize,
    /// Margin per wrong action in the hinge loss.
    pub margin: f64,
    /// Adagrad learning rate.
    pub alpha: f64,
    /// L2 regularization weight.
    pub lambda: f64,
    /// Dropout rate on representation inputs.
    pub dropout: f64,
    /// Probability of replacing a singleton character or bigram by the
    /// unknown token while training.
    pub singleton_unk: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Evaluate on dev every this many epochs.
    pub dev_every: usize,
    /// Stop once a dev evaluation reaches this F1, if set.
    pub stop_at_dev_f1: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            beam: 8,
            margin: 0.2,
            alpha: 0.01,
            lambda: 1e-8,
            dropout: 0.2,
            singleton_unk: 0.5,
            epochs: 30,
            seed: 1,
            dev_every: 1,
            stop_at_dev_f1: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam == 0 {
            return Err(Error::invalid_argument("beam width must be at least 1"));
        }
        if self.margin < 0.0 {
            return Err(Error::invalid_argument("margin must be non-negative"));
        }
        if self.dev_every == 0 {
            return Err(Error::invalid_argument("dev_every must be at least 1"));
        }
        Ok(())
    }

    fn optimizer(&self) -> OptimizerState {
        OptimizerState {
            alpha: self.alpha,
            lambda: self.lambda,
            ..OptimizerState::default()
        }
    }
}

/// What one training example did to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    /// Gold left the beam mid-sentence; prefixes were compared.
    Early,
    /// Gold survived to the end but was outscored.
    Final,
    /// Gold was the top terminal hypothesis; nothing changed.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateEvent {
    pub kind: UpdateKind,
    /// Transition index the comparison happened at; n−1 when the whole
    /// sentence was processed.
    pub step: usize,
    pub loss: f64,
    /// Action-wise Hamming distance between the compared prefixes.
    pub delta: usize,
    pub gold_score: f64,
    pub neg_score: f64,
    pub gold_actions: Vec<Action>,
    pub neg_actions: Vec<Action>,
}

/// Counts wrong actions between two sequences of equal length.
pub fn hamming_delta(a: &[Action], b: &[Action]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::invalid_argument(format!(
            "cannot compare action sequences of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Hinge loss between a negative and a gold hypothesis covering the
/// same prefix: max(score(neg) + margin·delta − score(gold), 0).
pub fn margin_loss(neg: &Hypothesis, gold: &Hypothesis, margin: f64) -> Result<f64> {
    let delta = hamming_delta(&neg.actions, &gold.actions)?;
    Ok((neg.score + margin * delta as f64 - gold.score).max(0.0))
}

fn apply_update(
    scorer: &mut Scorer,
    model: &mut ScoringModel,
    neg: &Hypothesis,
    gold: &Hypothesis,
    cfg: &TrainConfig,
    opt: &OptimizerState,
) -> Result<(f64, usize)> {
    let delta = hamming_delta(&neg.actions, &gold.actions)?;
    let neg_node = neg
        .score_node
        .ok_or_else(|| Error::InvalidState("negative hypothesis has no score".into()))?;
    let gold_node = gold
        .score_node
        .ok_or_else(|| Error::InvalidState("gold hypothesis has no score".into()))?;
    let diff = scorer.graph.sub(neg_node, gold_node)?;
    let shifted = scorer.graph.add_const(diff, cfg.margin * delta as f64);
    let loss_node = scorer.graph.hinge(shifted)?;
    let loss = scorer.graph.scalar(loss_node);
    if loss > 0.0 {
        scorer.graph.backward(loss_node, &mut model.params)?;
        model.params.adagrad_step(opt);
    }
    Ok((loss, delta))
}

/// Runs one example and returns the event plus the scorer, whose graph
/// still holds the gradients of the update (when one happened).
pub fn train_example_traced(
    model: &mut ScoringModel,
    sentence: &SegmentedSentence,
    cfg: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<(UpdateEvent, Scorer)> {
    cfg.validate()?;
    let n = sentence.len();
    if n == 0 {
        return Err(Error::invalid_argument("cannot train on an empty sentence"));
    }
    let gold = gold_actions(&sentence.word_lens())?;
    let opt = cfg.optimizer();
    let noise = TrainNoise {
        rng,
        dropout: cfg.dropout,
        singleton_unk: cfg.singleton_unk,
    };
    let mut scorer = Scorer::new(model, sentence.chars(), Some(noise))?;

    let mut agenda = vec![Hypothesis::initial()];
    for step in 0..n {
        let mut children = Vec::with_capacity(2 * agenda.len());
        for hyp in &agenda {
            children.extend(expand(&mut scorer, model, hyp, n)?);
        }
        // The gold parent is still in the agenda, so its successor is
        // always among the children.
        let gold_child = children
            .iter()
            .find(|h| h.actions[..] == gold[..=step])
            .cloned()
            .expect("gold child follows from a surviving gold parent");
        prune(&mut children, cfg.beam);
        let kept = children.iter().any(|h| h.actions[..] == gold[..=step]);
        if !kept {
            let neg = children[0].clone();
            let (loss, delta) = apply_update(&mut scorer, model, &neg, &gold_child, cfg, &opt)?;
            let event = UpdateEvent {
                kind: UpdateKind::Early,
                step,
                loss,
                delta,
                gold_score: gold_child.score,
                neg_score: neg.score,
                gold_actions: gold_child.actions,
                neg_actions: neg.actions,
            };
            return Ok((event, scorer));
        }
        agenda = children;
    }

    let top = agenda[0].clone();
    if top.actions == gold {
        let event = UpdateEvent {
            kind: UpdateKind::None,
            step: n - 1,
            loss: 0.0,
            delta: 0,
            gold_score: top.score,
            neg_score: top.score,
            gold_actions: top.actions.clone(),
            neg_actions: top.actions,
        };
        return Ok((event, scorer));
    }
    let gold_hyp = agenda
        .iter()
        .find(|h| h.actions == gold)
        .cloned()
        .expect("gold survived every prune");
    let (loss, delta) = apply_update(&mut scorer, model, &top, &gold_hyp, cfg, &opt)?;
    let event = UpdateEvent {
        kind: UpdateKind::Final,
        step: n - 1,
        loss,
        delta,
        gold_score: gold_hyp.score,
        neg_score: top.score,
        gold_actions: gold_hyp.actions,
        neg_actions: top.actions,
    };
    Ok((event, scorer))
}

/// Runs one example: beam search with gold tracking and at most one
/// hinge update.
pub fn train_example(
    model: &mut ScoringModel,
    sentence: &SegmentedSentence,
    cfg: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<UpdateEvent> {
    train_example_traced(model, sentence, cfg, rng).map(|(event, _)| event)
}

/// One epoch's tallies and optional dev evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Early plus final updates; `none` events are excluded.
    pub updates: usize,
    pub early: usize,
    pub final_updates: usize,
    pub none: usize,
    pub dev: Option<EvalResult>,
}

impl EpochRecord {
    /// Tab-separated log line: epoch, updates, early, final, dev P/R/F.
    /// Dev fields are "-" on epochs without a dev evaluation.
    pub fn to_line(&self) -> String {
        let dev = match &self.dev {
            Some(e) => format!("{:.4}\t{:.4}\t{:.4}", e.precision, e.recall, e.f1),
            None => "-\t-\t-".to_string(),
        };
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.epoch, self.updates, self.early, self.final_updates, dev
        )
    }
}

/// Decodes every gold sentence without noise and scores the output.
pub fn evaluate_model(
    model: &ScoringModel,
    gold: &[SegmentedSentence],
    beam: usize,
) -> Result<EvalResult> {
    let mut pred = Vec::with_capacity(gold.len());
    for s in gold {
        let spans = segment_sentence(model, s.chars(), beam)?;
        pred.push(s.with_spans(&spans)?);
    }
    evaluate(gold, &pred)
}

fn snapshot_values(model: &ScoringModel) -> Vec<Vec<f64>> {
    model.params.iter().map(|(_, p)| p.values.clone()).collect()
}

fn restore_values(model: &mut ScoringModel, snapshot: &[Vec<f64>]) {
    for ((_, p), values) in model.params.iter_mut().zip(snapshot) {
        p.values.copy_from_slice(values);
    }
}

/// Trains for up to `cfg.epochs` epochs, shuffling each epoch with the
/// seeded generator, and leaves the model at the parameters of its best
/// dev F1 (final parameters when dev is empty or never evaluated).
pub fn train(
    model: &mut ScoringModel,
    train_set: &[SegmentedSentence],
    dev_set: &[SegmentedSentence],
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid_argument("training corpus is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut early, mut fin, mut none) = (0, 0, 0);
        for &i in &order {
            match train_example(model, &train_set[i], cfg, &mut rng)?.kind {
                UpdateKind::Early => early += 1,
                UpdateKind::Final => fin += 1,
                UpdateKind::None => none += 1,
            }
        }
        let dev = if !dev_set.is_empty() && epoch % cfg.dev_every == 0 {
            Some(evaluate_model(model, dev_set, cfg.beam)?)
        } else {
            None
        };
        if let Some(e) = dev {
            if best.as_ref().map_or(true, |(f1, _)| e.f1 > *f1) {
                best = Some((e.f1, snapshot_values(model)));
            }
        }
        records.push(EpochRecord {
            epoch,
            updates: early + fin,
            early,
            final_updates: fin,
            none,
            dev,
        });
        if let (Some(target), Some(e)) = (cfg.stop_at_dev_f1, dev) {
            if e.f1 >= target {
                break;
            }
        }
    }
    if let Some((_, values)) = best {
        restore_values(model, &values);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpusio::{build_vocabs, parse_segmented_line};
    use crate::encoders::{CharMode, ModelConfig, ModelRole, WordMode};
    use rand::Rng;

    fn corpus(lines: &[&str]) -> Vec<SegmentedSentence> {
        lines
            .iter()
            .map(|l| parse_segmented_line(l).unwrap())
            .collect()
    }

    fn model_for(
        sentences: &[SegmentedSentence],
        char_mode: CharMode,
        word_mode: WordMode,
        seed: u64,
    ) -> ScoringModel {
        let (chars, bigrams, words) = build_vocabs(sentences);
        let cfg = ModelConfig {
            char_mode,
            word_mode,
            char_dim: 3,
            bichar_dim: 3,
            word_dim: 3,
            length_dim: 2,
            length_cap: 4,
            xc_dim: 4,
            xp_dim: 3,
            xw_dim: 4,
            hidden_dim: 5,
            ..ModelConfig::default()
        };
        ScoringModel::new(
            cfg,
            ModelRole::Segmentor,
            chars,
            bigrams,
            words,
            vec![],
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    fn quiet_cfg() -> TrainConfig {
        TrainConfig {
            dropout: 0.0,
            singleton_unk: 0.0,
            ..TrainConfig::default()
        }
    }

    /// Zeroes all parameters and pins the output bias, making every
    /// step score (bias_sep, bias_app) regardless of input.
    fn rig_output_bias(model: &mut ScoringModel, sep: f64, app: f64) {
        for (_, p) in model.params.iter_mut() {
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
        let ob = model.params.lookup("out.b").unwrap();
        model.params.get_mut(ob).values.copy_from_slice(&[sep, app]);
    }

    fn hyp_with(actions: &[Action], score: f64) -> Hypothesis {
        Hypothesis {
            state: crate::transition::State::initial(),
            score,
            score_node: None,
            word_lstm: None,
            actions: actions.to_vec(),
        }
    }

    #[test]
    fn hamming_counts_differing_positions() {
        use Action::{App, Sep};
        assert_eq!(hamming_delta(&[Sep, App], &[Sep, App]).unwrap(), 0);
        assert_eq!(hamming_delta(&[Sep, App], &[Sep, Sep]).unwrap(), 1);
        assert!(hamming_delta(&[Sep], &[Sep, Sep]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..12);
            let a: Vec<Action> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { Sep } else { App })
                .collect();
            let b: Vec<Action> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { Sep } else { App })
                .collect();
            let brute = (0..n).filter(|&i| a[i] != b[i]).count();
            assert_eq!(hamming_delta(&a, &b).unwrap(), brute);
        }
    }

    #[test]
    fn margin_loss_matches_direct_substitution() {
        use Action::{App, Sep};
        let gold = hyp_with(&[Sep, Sep, App], 0.5);
        let neg = hyp_with(&[Sep, App, Sep], 1.0);
        let loss = margin_loss(&neg, &gold, 0.2).unwrap();
        assert!((loss - 0.9).abs() < 1e-12, "got {loss}");

        // Identical hypotheses cost nothing.
        assert_eq!(margin_loss(&gold, &gold, 0.2).unwrap(), 0.0);

        // A sufficiently confident gold clamps to zero.
        let strong_gold = hyp_with(&[Sep, Sep, App], 3.0);
        assert_eq!(margin_loss(&neg, &strong_gold, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn no_update_when_gold_is_top() {
        let sentences = corpus(&["a b c"]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::None, 11);
        // All-zero weights with a separate-friendly bias make the gold
        // all-separate path the argmax.
        rig_output_bias(&mut model, 1.0, -1.0);
        let before = snapshot_values(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let event = train_example(&mut model, &sentences[0], &quiet_cfg(), &mut rng).unwrap();
        assert_eq!(event.kind, UpdateKind::None);
        assert_eq!(event.loss, 0.0);
        assert_eq!(event.delta, 0);
        assert_eq!(snapshot_values(&model), before, "parameters must not move");
    }

    #[test]
    fn gold_falling_out_triggers_early_update() {
        // Bias favors append, gold wants a boundary after the first
        // character. The first action is forced, so the earliest
        // possible fall-out is the second step.
        let sentences = corpus(&["a bc"]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::None, 12);
        rig_output_bias(&mut model, -1.0, 1.0);
        let cfg = TrainConfig {
            beam: 1,
            ..quiet_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (event, _) =
            train_example_traced(&mut model, &sentences[0], &cfg, &mut rng).unwrap();
        assert_eq!(event.kind, UpdateKind::Early);
        assert_eq!(event.step, 1);
        assert_eq!(event.delta, 1);
        assert_eq!(event.gold_actions, vec![Action::Sep, Action::Sep]);
        assert_eq!(event.neg_actions, vec![Action::Sep, Action::App]);
        // Gold scored two separates at −1 each; the negative scored
        // −1 + 1; loss = 0 + 0.2·1 − (−2).
        assert!((event.loss - 2.2).abs() < 1e-9, "got {}", event.loss);
    }

    #[test]
    fn early_update_leaves_later_positions_untouched() {
        let sentences = corpus(&["a bcde"]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::None, 13);
        // Keep the random weights (so gradient reaches the inputs) and
        // drown them with an append-friendly output bias.
        let ob = model.params.lookup("out.b").unwrap();
        model.params.get_mut(ob).values.copy_from_slice(&[-5.0, 5.0]);
        let cfg = TrainConfig {
            beam: 1,
            ..quiet_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (event, scorer) =
            train_example_traced(&mut model, &sentences[0], &cfg, &mut rng).unwrap();
        assert_eq!(event.kind, UpdateKind::Early);
        assert_eq!(event.step, 1);
        // Search stopped at the update: one scored state per step for
        // beam 1, two steps total.
        assert_eq!(scorer.score_calls(), 2);
        // Positions after the update step were never scored, so their
        // representations carry no gradient. The divergence step does;
        // the shared prefix before it cancels exactly, because with
        // beam 1 both compared paths reuse the same score nodes there.
        for j in 0..sentences[0].len() {
            let node = scorer.window_rep(j).unwrap();
            let flow: f64 = scorer.graph.node_grad(node).iter().map(|g| g.abs()).sum();
            if j == event.step {
                assert!(flow > 0.0, "the divergence point must feed the loss");
            } else {
                assert_eq!(flow, 0.0, "position {j} must not feed the loss");
            }
        }
    }

    #[test]
    fn repeated_updates_fix_an_adversarial_start() {
        let sentences = corpus(&["ab c", "c ab"]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::Window(1), 14);
        // Mildly push every decision toward append so both sentences
        // start out mis-segmented.
        let ob = model.params.lookup("out.b").unwrap();
        model.params.get_mut(ob).values.copy_from_slice(&[-0.05, 0.05]);
        let cfg = TrainConfig {
            alpha: 0.1,
            ..quiet_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut clean = 0;
        for round in 0..50 {
            let mut all_none = true;
            for s in &sentences {
                let event = train_example(&mut model, s, &cfg, &mut rng).unwrap();
                all_none &= event.kind == UpdateKind::None;
            }
            if all_none {
                clean = round;
                break;
            }
        }
        assert!(clean > 0, "both sentences should reach zero loss within 50 rounds");
    }

    #[test]
    fn zero_epochs_returns_no_records() {
        let sentences = corpus(&["ab c"]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::None, 15);
        let before = snapshot_values(&model);
        let cfg = TrainConfig {
            epochs: 0,
            ..quiet_cfg()
        };
        let records = train(&mut model, &sentences, &sentences, &cfg).unwrap();
        assert!(records.is_empty());
        assert_eq!(snapshot_values(&model), before);
    }

    #[test]
    fn same_seed_gives_identical_traces_and_parameters() {
        let sentences = corpus(&["ab c", "a bc", "abc c", "b ca", "ca b"]);
        let cfg = TrainConfig {
            epochs: 4,
            beam: 4,
            dropout: 0.2,
            singleton_unk: 0.5,
            seed: 9,
            ..TrainConfig::default()
        };
        let mut runs = Vec::new();
        for _ in 0..2 {
            let mut model =
                model_for(&sentences, CharMode::WindowPlusLstm, WordMode::Window(2), 16);
            let records = train(&mut model, &sentences, &sentences, &cfg).unwrap();
            runs.push((records, snapshot_values(&model)));
        }
        assert_eq!(runs[0].0, runs[1].0, "metric traces must match");
        assert_eq!(runs[0].1, runs[1].1, "parameters must match bit for bit");
    }

    #[test]
    fn training_selects_the_best_dev_snapshot() {
        let sentences = corpus(&["ab c", "a bc", "ca b", "c ab", "b ac"]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::Window(1), 17);
        let cfg = TrainConfig {
            epochs: 12,
            beam: 4,
            alpha: 0.1,
            ..quiet_cfg()
        };
        let records = train(&mut model, &sentences, &sentences, &cfg).unwrap();
        let best = records
            .iter()
            .filter_map(|r| r.dev.map(|e| e.f1))
            .fold(f64::NEG_INFINITY, f64::max);
        let restored = evaluate_model(&model, &sentences, cfg.beam).unwrap();
        assert!(
            (restored.f1 - best).abs() < 1e-12,
            "restored F1 {} vs best recorded {best}",
            restored.f1
        );
    }

    #[test]
    fn easy_corpus_needs_ever_fewer_updates() {
        // Words never share characters across boundaries, so the task
        // is learnable; update counts should collapse once fitted.
        let sentences = corpus(&[
            "ab cd", "cd ab", "ab ab", "cd cd", "ef ab", "cd ef", "ef ef", "ab ef",
        ]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::Window(1), 18);
        let cfg = TrainConfig {
            epochs: 25,
            beam: 4,
            alpha: 0.1,
            ..quiet_cfg()
        };
        let records = train(&mut model, &sentences, &[], &cfg).unwrap();
        let peak = records.iter().map(|r| r.updates).max().unwrap();
        let last = records.last().unwrap().updates;
        assert!(
            last * 10 <= peak.max(1),
            "updates did not collapse: peak {peak}, final {last}"
        );
    }

    #[test]
    fn stop_threshold_ends_training_early() {
        let sentences = corpus(&["ab c", "c ab", "ab ab"]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::Window(1), 19);
        let cfg = TrainConfig {
            epochs: 40,
            beam: 4,
            alpha: 0.1,
            stop_at_dev_f1: Some(1.0),
            ..quiet_cfg()
        };
        let records = train(&mut model, &sentences, &sentences, &cfg).unwrap();
        assert!(records.len() < 40, "threshold should cut training short");
        assert_eq!(records.last().unwrap().dev.unwrap().f1, 1.0);
    }

    #[test]
    fn metric_lines_are_tab_separated() {
        let with_dev = EpochRecord {
            epoch: 3,
            updates: 7,
            early: 5,
            final_updates: 2,
            none: 1,
            dev: Some(EvalResult {
                precision: 0.5,
                recall: 0.25,
                f1: 1.0 / 3.0,
                gold_count: 4,
                pred_count: 2,
                correct_count: 1,
            }),
        };
        assert_eq!(with_dev.to_line(), "3\t7\t5\t2\t0.5000\t0.2500\t0.3333");
        let without = EpochRecord { dev: None, ..with_dev };
        assert_eq!(without.to_line(), "3\t7\t5\t2\t-\t-\t-");
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let sentences = corpus(&["ab c"]);
        let mut model = model_for(&sentences, CharMode::Window, WordMode::None, 20);
        assert!(train(&mut model, &[], &sentences, &quiet_cfg()).is_err());
    }
}
