//! Multi-task pretraining of the shared window network.
//!
//! Four classification tasks read the same five-character window
//! representation through task-specific softmax heads: punctuation
//! prediction (was there a mark before the middle character), BMES
//! tagging from automatically segmented text, BMES tagging from a
//! heterogeneously segmented corpus, and the middle character's word
//! POS. Sentences are drawn 10/1/1/1 across whichever tasks have data;
//! every drawn sentence's instances take one online NLL step each. The
//! trained embeddings and window layers can then seed a segmentor.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpusio::{build_vocabs, Bmes, PosSentence, SegmentedSentence};
use crate::diffcore::{Graph, NodeRef, OptimizerState};
use crate::encoders::{Scorer, ScoringModel, SoftmaxHead};
use crate::error::{Error, Result};
use crate::transition::Span;
use crate::vocab::Vocab;

pub const UNK_LABEL: &str = "<unk>";

/// The four auxiliary tasks, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskId {
    Punc,
    Autoseg,
    Hetero,
    Pos,
}

impl TaskId {
    pub const ALL: [TaskId; 4] = [TaskId::Punc, TaskId::Autoseg, TaskId::Hetero, TaskId::Pos];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Punc => "punc",
            TaskId::Autoseg => "autoseg",
            TaskId::Hetero => "hetero",
            TaskId::Pos => "pos",
        }
    }

    /// Sampling weight relative to the other tasks.
    pub fn weight(self) -> u32 {
        match self {
            TaskId::Punc => 10,
            _ => 1,
        }
    }

    /// Position in per-task arrays.
    pub fn index(self) -> usize {
        match self {
            TaskId::Punc => 0,
            TaskId::Autoseg => 1,
            TaskId::Hetero => 2,
            TaskId::Pos => 3,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<TaskId> {
        match s {
            "punc" => Ok(TaskId::Punc),
            "autoseg" => Ok(TaskId::Autoseg),
            "hetero" => Ok(TaskId::Hetero),
            "pos" => Ok(TaskId::Pos),
            other => Err(Error::invalid_argument(format!("unknown task '{other}'"))),
        }
    }
}

/// Characters treated as punctuation when mining the punctuation task.
#[derive(Debug, Clone)]
pub struct PunctSet {
    set: HashSet<char>,
}

impl Default for PunctSet {
    fn default() -> PunctSet {
        PunctSet::new(
            "，。、；：？！“”‘’（）《》.,;:?!()\"'".chars(),
        )
    }
}

impl PunctSet {
    pub fn new(chars: impl IntoIterator<Item = char>) -> PunctSet {
        PunctSet {
            set: chars.into_iter().collect(),
        }
    }

    pub fn contains(&self, c: char) -> bool {
        self.set.contains(&c)
    }
}

/// One classification example: the padded window around a character,
/// already resolved to vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PretrainInstance {
    pub task: TaskId,
    /// Index into the task head's label list.
    pub label: usize,
    /// Character ids of the five window positions.
    pub chars: [usize; 5],
    /// Bigram ids aligned with the window positions, each pairing a
    /// position's character with its right neighbor.
    pub bigrams: [usize; 5],
}

pub fn punc_labels() -> Vec<String> {
    vec!["yes".to_string(), "no".to_string()]
}

pub fn bmes_labels() -> Vec<String> {
    ["B", "M", "E", "S"].iter().map(|s| s.to_string()).collect()
}

fn bmes_index(b: Bmes) -> usize {
    match b {
        Bmes::B => 0,
        Bmes::M => 1,
        Bmes::E => 2,
        Bmes::S => 3,
    }
}

/// Tag set discovered from a corpus, with an unknown row first for
/// tags never seen at extraction time.
pub fn pos_labels(corpus: &[PosSentence]) -> Vec<String> {
    let mut labels = vec![UNK_LABEL.to_string()];
    let mut seen: HashSet<&str> = HashSet::new();
    for s in corpus {
        for tag in &s.tags {
            if seen.insert(tag) {
                labels.push(tag.clone());
            }
        }
    }
    labels
}

/// Padded character and bigram ids for a sentence, exactly as the
/// scoring network resolves them.
fn padded_ids(model: &ScoringModel, chars: &[char]) -> Result<(Vec<usize>, Vec<usize>)> {
    let scorer = Scorer::new(model, chars, None)?;
    Ok((scorer.ext_char_ids().to_vec(), scorer.ext_bigram_ids().to_vec()))
}

fn window_at(ext_chars: &[usize], ext_bigrams: &[usize], center: usize) -> ([usize; 5], [usize; 5]) {
    let mut cs = [0usize; 5];
    let mut bs = [0usize; 5];
    for i in 0..5 {
        if !ext_chars.is_empty() {
            cs[i] = ext_chars[center + i];
        }
        if !ext_bigrams.is_empty() {
            bs[i] = ext_bigrams[center + i];
        }
    }
    (cs, bs)
}

/// Strips punctuation and mines two instances per removed mark: one
/// centered on the character right after it (a mark precedes it) and
/// one on the character right before (no mark precedes it). Marks at
/// either edge of the sentence yield only the instance that exists.
pub fn extract_punc_instances(
    model: &ScoringModel,
    raw: &[char],
    punct: &PunctSet,
) -> Result<Vec<PretrainInstance>> {
    let mut clean = Vec::with_capacity(raw.len());
    let mut marks = Vec::new();
    for &c in raw {
        if punct.contains(c) {
            marks.push(clean.len());
        } else {
            clean.push(c);
        }
    }
    if clean.is_empty() || marks.is_empty() {
        return Ok(Vec::new());
    }
    let (ext_chars, ext_bigrams) = padded_ids(model, &clean)?;
    let mut out = Vec::with_capacity(2 * marks.len());
    for after in marks {
        if after < clean.len() {
            let (chars, bigrams) = window_at(&ext_chars, &ext_bigrams, after);
            out.push(PretrainInstance {
                task: TaskId::Punc,
                label: 0,
                chars,
                bigrams,
            });
        }
        if after > 0 {
            let (chars, bigrams) = window_at(&ext_chars, &ext_bigrams, after - 1);
            out.push(PretrainInstance {
                task: TaskId::Punc,
                label: 1,
                chars,
                bigrams,
            });
        }
    }
    Ok(out)
}

/// One instance per character, labeled by its position in its word.
/// Serves both segmentation-derived tasks; they differ only in which
/// head consumes the instances.
pub fn extract_bmes_instances(
    model: &ScoringModel,
    sentence: &SegmentedSentence,
    task: TaskId,
) -> Result<Vec<PretrainInstance>> {
    if task != TaskId::Autoseg && task != TaskId::Hetero {
        return Err(Error::invalid_argument(format!(
            "task '{task}' does not use position labels"
        )));
    }
    let (ext_chars, ext_bigrams) = padded_ids(model, sentence.chars())?;
    Ok(crate::corpusio::to_bmes(sentence)
        .into_iter()
        .enumerate()
        .map(|(t, b)| {
            let (chars, bigrams) = window_at(&ext_chars, &ext_bigrams, t);
            PretrainInstance {
                task,
                label: bmes_index(b),
                chars,
                bigrams,
            }
        })
        .collect())
}

/// One instance per character, labeled with the containing word's tag;
/// tags outside `labels` map to the unknown row.
pub fn extract_pos_instances(
    model: &ScoringModel,
    sentence: &PosSentence,
    labels: &[String],
) -> Result<Vec<PretrainInstance>> {
    let (ext_chars, ext_bigrams) = padded_ids(model, sentence.sentence.chars())?;
    let mut out = Vec::with_capacity(sentence.sentence.len());
    for (word, tag) in sentence.sentence.spans().iter().zip(&sentence.tags) {
        let label = labels.iter().position(|l| l == tag).unwrap_or(0);
        let (start, end): Span = *word;
        for t in start..end {
            let (chars, bigrams) = window_at(&ext_chars, &ext_bigrams, t);
            out.push(PretrainInstance {
                task: TaskId::Pos,
                label,
                chars,
                bigrams,
            });
        }
    }
    Ok(out)
}

/// Training material per task; a task is enabled iff its source is
/// non-empty.
#[derive(Debug, Clone, Default)]
pub struct PretrainSources {
    /// Raw sentences, punctuation still present.
    pub punc: Vec<Vec<char>>,
    pub autoseg: Vec<SegmentedSentence>,
    pub hetero: Vec<SegmentedSentence>,
    pub pos: Vec<PosSentence>,
}

impl PretrainSources {
    pub fn enabled_tasks(&self) -> Vec<TaskId> {
        TaskId::ALL
            .into_iter()
            .filter(|t| !self.is_empty_for(*t))
            .collect()
    }

    fn is_empty_for(&self, task: TaskId) -> bool {
        match task {
            TaskId::Punc => self.punc.is_empty(),
            TaskId::Autoseg => self.autoseg.is_empty(),
            TaskId::Hetero => self.hetero.is_empty(),
            TaskId::Pos => self.pos.is_empty(),
        }
    }

    fn len_for(&self, task: TaskId) -> usize {
        match task {
            TaskId::Punc => self.punc.len(),
            TaskId::Autoseg => self.autoseg.len(),
            TaskId::Hetero => self.hetero.len(),
            TaskId::Pos => self.pos.len(),
        }
    }

    /// Softmax heads for every enabled task, in canonical order.
    pub fn build_heads(&self) -> Vec<SoftmaxHead> {
        self.enabled_tasks()
            .into_iter()
            .map(|t| SoftmaxHead {
                task: t.as_str().to_string(),
                labels: match t {
                    TaskId::Punc => punc_labels(),
                    TaskId::Autoseg | TaskId::Hetero => bmes_labels(),
                    TaskId::Pos => pos_labels(&self.pos),
                },
            })
            .collect()
    }

    /// Character and bigram vocabularies over every source, with
    /// punctuation stripped from the raw sentences first.
    pub fn build_vocabs(&self, punct: &PunctSet) -> (Vocab, Vocab) {
        let mut sentences = Vec::new();
        for raw in &self.punc {
            let clean: Vec<char> = raw.iter().copied().filter(|c| !punct.contains(*c)).collect();
            if !clean.is_empty() {
                let end = clean.len();
                sentences.push(SegmentedSentence::new(clean, vec![end]).expect("one full-span word"));
            }
        }
        sentences.extend(self.autoseg.iter().cloned());
        sentences.extend(self.hetero.iter().cloned());
        sentences.extend(self.pos.iter().map(|p| p.sentence.clone()));
        let (chars, bigrams, _) = build_vocabs(&sentences);
        (chars, bigrams)
    }
}

fn head_index(model: &ScoringModel, task: TaskId) -> Result<usize> {
    model
        .heads
        .iter()
        .position(|h| h.task == task.as_str())
        .ok_or_else(|| Error::invalid_argument(format!("model has no '{task}' head")))
}

/// Window representation of one instance: embedding lookups in window
/// order through the shared multilayer perceptron.
fn window_forward(g: &mut Graph, model: &ScoringModel, inst: &PretrainInstance) -> Result<NodeRef> {
    let h = model.handles();
    if h.win.is_empty() {
        return Err(Error::InvalidState("model has no window network".into()));
    }
    let mut parts = Vec::with_capacity(10);
    for i in 0..5 {
        if let Some(ec) = h.emb_char {
            parts.push(g.lookup(&model.params, ec, inst.chars[i])?);
        }
        if let Some(eb) = h.emb_bichar {
            parts.push(g.lookup(&model.params, eb, inst.bigrams[i])?);
        }
    }
    let mut x = g.concat(&parts)?;
    for &(w, b) in &h.win {
        let a = g.affine(&model.params, &[(w, x)], b)?;
        x = g.tanh(a);
    }
    Ok(x)
}

fn task_logits(
    g: &mut Graph,
    model: &ScoringModel,
    task: TaskId,
    inst: &PretrainInstance,
) -> Result<NodeRef> {
    let idx = head_index(model, task)?;
    let dc = window_forward(g, model, inst)?;
    let (w, b) = model.handles().heads[idx];
    g.affine(&model.params, &[(w, dc)], b)
}

/// Probability distribution the task head assigns to the instance's
/// window.
pub fn task_forward(
    g: &mut Graph,
    model: &ScoringModel,
    task: TaskId,
    inst: &PretrainInstance,
) -> Result<NodeRef> {
    let logits = task_logits(g, model, task, inst)?;
    Ok(g.softmax(logits))
}

/// Negative log-likelihood of the instance's label; gradients are left
/// in the graph and parameter set by `backward`.
pub fn instance_loss(
    g: &mut Graph,
    model: &ScoringModel,
    inst: &PretrainInstance,
) -> Result<NodeRef> {
    let logits = task_logits(g, model, inst.task, inst)?;
    g.nll_loss(logits, inst.label)
}

/// Draws tasks with weight 10 for punctuation and 1 for the rest,
/// renormalized over the enabled subset.
#[derive(Debug, Clone)]
pub struct TaskSampler {
    entries: Vec<(TaskId, u32)>,
    total: u32,
}

impl TaskSampler {
    pub fn new(enabled: &[TaskId]) -> Result<TaskSampler> {
        if enabled.is_empty() {
            return Err(Error::invalid_argument("no tasks enabled"));
        }
        let entries: Vec<(TaskId, u32)> = enabled.iter().map(|&t| (t, t.weight())).collect();
        let total = entries.iter().map(|(_, w)| w).sum();
        Ok(TaskSampler { entries, total })
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> TaskId {
        let mut roll = rng.gen_range(0..self.total);
        for &(task, weight) in &self.entries {
            if roll < weight {
                return task;
            }
            roll -= weight;
        }
        unreachable!("roll is bounded by the summed weights")
    }
}

#[derive(Debug, Clone)]
pub struct PretrainConfig {
    /// Adagrad learning rate.
    pub alpha: f64,
    /// L2 regularization weight.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Sentences drawn per epoch; defaults to the number of training
    /// sentences across enabled sources.
    pub draws_per_epoch: Option<usize>,
    pub punct: PunctSet,
}

impl Default for PretrainConfig {
    fn default() -> PretrainConfig {
        PretrainConfig {
            alpha: 0.01,
            lambda: 1e-8,
            epochs: 5,
            seed: 1,
            draws_per_epoch: None,
            punct: PunctSet::default(),
        }
    }
}

impl PretrainConfig {
    fn optimizer(&self) -> OptimizerState {
        OptimizerState {
            alpha: self.alpha,
            lambda: self.lambda,
            ..OptimizerState::default()
        }
    }
}

/// One pretraining epoch: draw tallies, mean instance loss, and
/// held-out accuracy per task (absent for disabled tasks or when the
/// source is too small to hold anything out).
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainEpochRecord {
    pub epoch: usize,
    pub draws: usize,
    pub task_draws: [usize; 4],
    pub mean_loss: f64,
    pub holdout_accuracy: [Option<f64>; 4],
}

impl PretrainEpochRecord {
    /// Tab-separated log line: epoch, draws, mean loss, then held-out
    /// accuracy per task in canonical order ("-" when absent).
    pub fn to_line(&self) -> String {
        let accs: Vec<String> = self
            .holdout_accuracy
            .iter()
            .map(|a| match a {
                Some(v) => format!("{v:.4}"),
                None => "-".to_string(),
            })
            .collect();
        format!(
            "{}\t{}\t{:.4}\t{}",
            self.epoch,
            self.draws,
            self.mean_loss,
            accs.join("\t")
        )
    }
}

/// Per-task instance lists, one entry per source sentence.
struct TaskInstances {
    by_sentence: [Vec<Vec<PretrainInstance>>; 4],
}

fn extract_all(model: &ScoringModel, sources: &PretrainSources, punct: &PunctSet) -> Result<TaskInstances> {
    let mut by_sentence: [Vec<Vec<PretrainInstance>>; 4] = Default::default();
    for raw in &sources.punc {
        by_sentence[TaskId::Punc.index()].push(extract_punc_instances(model, raw, punct)?);
    }
    for s in &sources.autoseg {
        by_sentence[TaskId::Autoseg.index()].push(extract_bmes_instances(model, s, TaskId::Autoseg)?);
    }
    for s in &sources.hetero {
        by_sentence[TaskId::Hetero.index()].push(extract_bmes_instances(model, s, TaskId::Hetero)?);
    }
    if !sources.pos.is_empty() {
        let idx = head_index(model, TaskId::Pos)?;
        let labels = model.heads[idx].labels.clone();
        for s in &sources.pos {
            by_sentence[TaskId::Pos.index()].push(extract_pos_instances(model, s, &labels)?);
        }
    }
    Ok(TaskInstances { by_sentence })
}

/// Fraction of held-out instances whose label the head ranks first.
fn holdout_accuracy(model: &ScoringModel, holdout: &[Vec<PretrainInstance>], task: TaskId) -> Result<Option<f64>> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for sentence in holdout {
        for inst in sentence {
            let mut g = Graph::new();
            let logits = task_logits(&mut g, model, task, inst)?;
            let values = g.value(logits);
            let argmax = values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("heads have at least two labels");
            total += 1;
            correct += usize::from(argmax == inst.label);
        }
    }
    Ok(if total == 0 {
        None
    } else {
        Some(correct as f64 / total as f64)
    })
}

/// Samples sentences across enabled tasks and takes one online NLL
/// step per instance. The last five percent of each source is held out
/// of training and scored after every epoch.
pub fn multitask_pretrain(
    model: &mut ScoringModel,
    sources: &PretrainSources,
    cfg: &PretrainConfig,
) -> Result<Vec<PretrainEpochRecord>> {
    let enabled = sources.enabled_tasks();
    if enabled.is_empty() {
        return Err(Error::invalid_argument("every pretraining source is empty"));
    }
    for &task in &enabled {
        head_index(model, task)?;
    }
    let instances = extract_all(model, sources, &cfg.punct)?;

    // Fixed split: the last 5% of each source (rounded down) is the
    // held-out slice.
    let mut train_len = [0usize; 4];
    for &task in &enabled {
        let len = sources.len_for(task);
        train_len[task.index()] = len - len / 20;
    }
    let default_draws: usize = enabled.iter().map(|t| train_len[t.index()]).sum();
    let draws_per_epoch = cfg.draws_per_epoch.unwrap_or(default_draws);

    let sampler = TaskSampler::new(&enabled)?;
    let opt = cfg.optimizer();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut task_draws = [0usize; 4];
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for _ in 0..draws_per_epoch {
            let task = sampler.draw(&mut rng);
            let pool = &instances.by_sentence[task.index()][..train_len[task.index()]];
            task_draws[task.index()] += 1;
            if pool.is_empty() {
                continue;
            }
            let pick = rng.gen_range(0..pool.len());
            for inst in &pool[pick] {
                let mut g = Graph::new();
                let loss = instance_loss(&mut g, model, inst)?;
                loss_sum += g.scalar(loss);
                loss_count += 1;
                g.backward(loss, &mut model.params)?;
                model.params.adagrad_step(&opt);
            }
        }
        let mut holdout = [None, None, None, None];
        for &task in &enabled {
            let all = &instances.by_sentence[task.index()];
            holdout[task.index()] =
                holdout_accuracy(model, &all[train_len[task.index()]..], task)?;
        }
        records.push(PretrainEpochRecord {
            epoch,
            draws: draws_per_epoch,
            task_draws,
            mean_loss: if loss_count == 0 {
                0.0
            } else {
                loss_sum / loss_count as f64
            },
            holdout_accuracy: holdout,
        });
    }
    Ok(records)
}

const TRANSFER_EMBEDDINGS: [&str; 2] = ["emb.char", "emb.bichar"];

/// Copies the pretrained embeddings and window layers into the
/// segmentor. Heads stay behind; the segmentor's own parameters and
/// tunability flags are untouched, so the copied values fine-tune
/// during segmentor training. Idempotent.
pub fn transfer(pretrained: &ScoringModel, segmentor: &mut ScoringModel) -> Result<()> {
    if pretrained.chars.tokens() != segmentor.chars.tokens() {
        return Err(Error::TransferMismatch(
            "emb.char: character vocabularies differ".into(),
        ));
    }
    if pretrained.bigrams.tokens() != segmentor.bigrams.tokens() {
        return Err(Error::TransferMismatch(
            "emb.bichar: bigram vocabularies differ".into(),
        ));
    }
    let mut names: Vec<String> = TRANSFER_EMBEDDINGS.iter().map(|s| s.to_string()).collect();
    for layer in 0..segmentor.cfg.mlp_layers {
        names.push(format!("win.{layer}.w"));
        names.push(format!("win.{layer}.b"));
    }
    for name in names {
        let Some(dst) = segmentor.params.lookup(&name) else {
            if TRANSFER_EMBEDDINGS.contains(&name.as_str()) {
                continue;
            }
            return Err(Error::TransferMismatch(format!(
                "{name}: segmentor has no such parameter"
            )));
        };
        let Some(src) = pretrained.params.lookup(&name) else {
            return Err(Error::TransferMismatch(format!(
                "{name}: pretrained model has no such parameter"
            )));
        };
        let src_shape = pretrained.params.get(src).shape.clone();
        let dst_param = segmentor.params.get_mut(dst);
        if src_shape != dst_param.shape {
            return Err(Error::TransferMismatch(format!(
                "{name}: shape {:?} vs {:?}",
                src_shape, dst_param.shape
            )));
        }
        dst_param
            .values
            .copy_from_slice(&pretrained.params.get(src).values);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpusio::{parse_pos_line, parse_segmented_line};
    use crate::diffcore::ParamSet;
    use crate::encoders::{CharMode, ModelConfig, ModelRole, WordMode};

    fn seg(lines: &[&str]) -> Vec<SegmentedSentence> {
        lines.iter().map(|l| parse_segmented_line(l).unwrap()).collect()
    }

    fn pos(lines: &[&str]) -> Vec<PosSentence> {
        lines
            .iter()
            .map(|l| parse_pos_line(l, "/").unwrap().unwrap())
            .collect()
    }

    fn raw(lines: &[&str]) -> Vec<Vec<char>> {
        lines.iter().map(|l| l.chars().collect()).collect()
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
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
        }
    }

    fn pretrained_for(sources: &PretrainSources, seed: u64) -> ScoringModel {
        let punct = PunctSet::default();
        let (chars, bigrams) = sources.build_vocabs(&punct);
        ScoringModel::new(
            small_cfg(),
            ModelRole::Pretrained,
            chars,
            bigrams,
            Vocab::with_specials(),
            sources.build_heads(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    fn values_by_name(params: &ParamSet) -> Vec<(String, Vec<f64>)> {
        params
            .iter()
            .map(|(_, p)| (p.name.clone(), p.values.clone()))
            .collect()
    }

    #[test]
    fn default_punctuation_spans_cjk_and_ascii() {
        let p = PunctSet::default();
        for c in ['，', '。', '？', '“', '《', '.', ',', '!', '(', '\''] {
            assert!(p.contains(c), "{c} should be punctuation");
        }
        for c in ['a', '我', '0', ' '] {
            assert!(!p.contains(c), "{c} should not be punctuation");
        }
    }

    #[test]
    fn punc_extraction_mines_both_sides_of_a_mark() {
        let sources = PretrainSources {
            punc: raw(&["ab，cd"]),
            ..PretrainSources::default()
        };
        let model = pretrained_for(&sources, 1);
        let got =
            extract_punc_instances(&model, &sources.punc[0], &PunctSet::default()).unwrap();
        assert_eq!(got.len(), 2);
        // Clean sequence is abcd; the mark sits before index 2.
        let c = model.chars.get("c").unwrap();
        let b = model.chars.get("b").unwrap();
        assert_eq!(got[0].label, 0);
        assert_eq!(got[0].chars[2], c, "yes-instance centers on the char after");
        assert_eq!(got[1].label, 1);
        assert_eq!(got[1].chars[2], b, "no-instance centers on the char before");
    }

    #[test]
    fn punc_extraction_respects_sentence_edges() {
        let sources = PretrainSources {
            punc: raw(&["，ab", "ab。", "a。b。c", "。，", "abcd"]),
            ..PretrainSources::default()
        };
        let model = pretrained_for(&sources, 2);
        let punct = PunctSet::default();
        let lens: Vec<usize> = sources
            .punc
            .iter()
            .map(|s| extract_punc_instances(&model, s, &punct).unwrap().len())
            .collect();
        // Leading mark: after-instance only. Trailing mark: before-
        // instance only. Two interior marks: two each. All-punctuation
        // and mark-free sentences: nothing.
        assert_eq!(lens, vec![1, 1, 4, 0, 0]);
    }

    #[test]
    fn bmes_extraction_follows_word_shape() {
        let sources = PretrainSources {
            autoseg: seg(&["我 去", "火车站", "我 去 过 火车站 那边"]),
            ..PretrainSources::default()
        };
        let model = pretrained_for(&sources, 3);
        let labels: Vec<Vec<usize>> = sources
            .autoseg
            .iter()
            .map(|s| {
                extract_bmes_instances(&model, s, TaskId::Autoseg)
                    .unwrap()
                    .iter()
                    .map(|i| i.label)
                    .collect()
            })
            .collect();
        let (b, m, e, s) = (0, 1, 2, 3);
        assert_eq!(labels[0], vec![s, s]);
        assert_eq!(labels[1], vec![b, m, e]);
        assert_eq!(labels[2], vec![s, s, s, b, m, e, b, e]);
    }

    #[test]
    fn pos_extraction_labels_each_character_with_its_word_tag() {
        let sources = PretrainSources {
            pos: pos(&["我/PN 去过/VV"]),
            ..PretrainSources::default()
        };
        let model = pretrained_for(&sources, 4);
        let labels = model.heads[0].labels.clone();
        assert_eq!(labels, vec!["<unk>", "PN", "VV"]);
        let got = extract_pos_instances(&model, &sources.pos[0], &labels).unwrap();
        let tags: Vec<usize> = got.iter().map(|i| i.label).collect();
        assert_eq!(tags, vec![1, 2, 2]);

        // A tag outside the discovered set lands on the unknown row.
        let unseen = pos(&["我去/NN"]);
        let got = extract_pos_instances(&model, &unseen[0], &labels).unwrap();
        assert_eq!(got[0].label, 0);
    }

    #[test]
    fn task_heads_emit_valid_distributions() {
        let sources = PretrainSources {
            punc: raw(&["ab，cd"]),
            autoseg: seg(&["ab cd"]),
            ..PretrainSources::default()
        };
        let mut model = pretrained_for(&sources, 5);
        let inst =
            extract_punc_instances(&model, &sources.punc[0], &PunctSet::default()).unwrap()[0]
                .clone();
        let mut g = Graph::new();
        let probs = task_forward(&mut g, &model, TaskId::Punc, &inst).unwrap();
        let v = g.value(probs).to_vec();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|p| *p >= 0.0));
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // Zero weights mean maximal uncertainty.
        for (_, p) in model.params.iter_mut() {
            p.values.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut g = Graph::new();
        let probs = task_forward(&mut g, &model, TaskId::Punc, &inst).unwrap();
        for p in g.value(probs) {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn pretraining_gradients_match_finite_differences() {
        let sources = PretrainSources {
            punc: raw(&["ab，cd"]),
            ..PretrainSources::default()
        };
        let mut model = pretrained_for(&sources, 6);
        let inst =
            extract_punc_instances(&model, &sources.punc[0], &PunctSet::default()).unwrap()[0]
                .clone();

        let mut g = Graph::new();
        let loss = instance_loss(&mut g, &model, &inst).unwrap();
        g.backward(loss, &mut model.params).unwrap();
        let grads: Vec<(String, Vec<f64>)> = model
            .params
            .iter()
            .map(|(_, p)| (p.name.clone(), p.grad.clone()))
            .collect();

        let eps = 1e-5;
        let ids: Vec<_> = model.params.iter().map(|(id, _)| id).collect();
        let mut char_emb_flow = 0.0;
        for (k, id) in ids.iter().enumerate() {
            let len = model.params.get(*id).len();
            for j in 0..len {
                let old = model.params.get(*id).values[j];
                model.params.get_mut(*id).values[j] = old + eps;
                let mut gp = Graph::new();
                let lp = instance_loss(&mut gp, &model, &inst).unwrap();
                let up = gp.scalar(lp);
                model.params.get_mut(*id).values[j] = old - eps;
                let mut gm = Graph::new();
                let lm = instance_loss(&mut gm, &model, &inst).unwrap();
                let um = gm.scalar(lm);
                model.params.get_mut(*id).values[j] = old;
                let fd = (up - um) / (2.0 * eps);
                let an = grads[k].1[j];
                let denom = fd.abs().max(an.abs()).max(1e-7);
                assert!(
                    ((fd - an).abs() / denom) < 1e-4,
                    "{}[{}]: fd {} vs analytic {}",
                    grads[k].0,
                    j,
                    fd,
                    an
                );
                if grads[k].0 == "emb.char" {
                    char_emb_flow += an.abs();
                }
            }
        }
        assert!(char_emb_flow > 0.0, "loss must reach the embeddings");
    }

    #[test]
    fn instance_forward_matches_the_scoring_network_windows() {
        let sources = PretrainSources {
            autoseg: seg(&["ab cde", "ea db"]),
            ..PretrainSources::default()
        };
        let model = pretrained_for(&sources, 7);
        let sentence = &sources.autoseg[0];
        let instances = extract_bmes_instances(&model, sentence, TaskId::Autoseg).unwrap();
        let scorer = Scorer::new(&model, sentence.chars(), None).unwrap();
        for (t, inst) in instances.iter().enumerate() {
            let reference = scorer.window_rep(t).unwrap();
            let expect = scorer.graph.value(reference).to_vec();
            let mut g = Graph::new();
            let dc = window_forward(&mut g, &model, inst).unwrap();
            assert_eq!(g.value(dc), &expect[..], "window {t} diverged");
        }
    }

    #[test]
    fn sampler_honors_the_enabled_subset_and_ratio() {
        let only_punc = TaskSampler::new(&[TaskId::Punc]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            assert_eq!(only_punc.draw(&mut rng), TaskId::Punc);
        }

        let all = TaskSampler::new(&TaskId::ALL).unwrap();
        let mut counts = [0usize; 4];
        let draws = 13_000;
        for _ in 0..draws {
            counts[all.draw(&mut rng).index()] += 1;
        }
        // Expected 10000/1000/1000/1000; the punctuation share lands
        // within 2% and the overall fit passes a chi-square test at
        // significance 0.01 (critical value 11.345, 3 degrees).
        let expected = [10_000.0, 1_000.0, 1_000.0, 1_000.0];
        assert!((counts[0] as f64 - expected[0]).abs() <= 0.02 * expected[0]);
        let chi2: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(&c, &e)| (c as f64 - e).powi(2) / e)
            .sum();
        assert!(chi2 < 11.345, "chi-square {chi2} too large");

        assert!(TaskSampler::new(&[]).is_err());
    }

    fn punctuation_rule_corpus(n: usize, seed: u64) -> Vec<Vec<char>> {
        // A mark always follows 'd' and nothing else, so "is there a
        // mark before this character" is decidable from the window.
        let letters = ['a', 'b', 'c', 'e', 'f'];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut s = Vec::new();
                for _ in 0..rng.gen_range(8..=14) {
                    if s.last().map_or(false, |c| *c == '。') || s.is_empty() {
                        s.push(letters[rng.gen_range(0..letters.len())]);
                    } else if rng.gen_bool(0.25) {
                        s.push('d');
                        s.push('。');
                    } else {
                        s.push(letters[rng.gen_range(0..letters.len())]);
                    }
                }
                s
            })
            .collect()
    }

    #[test]
    fn pretraining_learns_a_deterministic_punctuation_rule() {
        let sources = PretrainSources {
            punc: punctuation_rule_corpus(120, 9),
            ..PretrainSources::default()
        };
        let mut model = pretrained_for(&sources, 10);
        let cfg = PretrainConfig {
            alpha: 0.1,
            epochs: 5,
            ..PretrainConfig::default()
        };
        let records = multitask_pretrain(&mut model, &sources, &cfg).unwrap();
        let last = records.last().unwrap();
        let acc = last.holdout_accuracy[TaskId::Punc.index()].unwrap();
        assert!(acc > 0.95, "held-out accuracy stalled at {acc}");
        // Losses trend down from the first epoch to the last.
        assert!(last.mean_loss < records[0].mean_loss);
    }

    #[test]
    fn updating_one_task_leaves_other_heads_alone() {
        let sources = PretrainSources {
            punc: raw(&["ab，cd"]),
            autoseg: seg(&["ab cd"]),
            hetero: seg(&["a bcd"]),
            pos: pos(&["ab/NN cd/VV"]),
            ..PretrainSources::default()
        };
        let mut model = pretrained_for(&sources, 11);
        let inst =
            extract_punc_instances(&model, &sources.punc[0], &PunctSet::default()).unwrap()[0]
                .clone();
        let before = values_by_name(&model.params);
        let mut g = Graph::new();
        let loss = instance_loss(&mut g, &model, &inst).unwrap();
        g.backward(loss, &mut model.params).unwrap();
        // L2 disabled so the diff shows gradient flow alone; with it on,
        // every nonzero entry would drift by the decay term.
        model.params.adagrad_step(&OptimizerState {
            lambda: 0.0,
            ..OptimizerState::default()
        });
        let after = values_by_name(&model.params);
        for ((name, old), (_, new)) in before.iter().zip(&after) {
            let moved = old != new;
            if name.starts_with("head.autoseg") || name.starts_with("head.hetero") || name.starts_with("head.pos") {
                assert!(!moved, "{name} belongs to an untouched task");
            }
            if name == "head.punc.w" || name.starts_with("win.") {
                assert!(moved, "{name} should have moved");
            }
        }
    }

    fn segmentor_like(pretrained: &ScoringModel, seed: u64) -> ScoringModel {
        let corpus = seg(&["ab cd", "a bcd"]);
        let (_, _, words) = build_vocabs(&corpus);
        ScoringModel::new(
            ModelConfig {
                char_mode: CharMode::WindowPlusLstm,
                word_mode: WordMode::Window(2),
                ..small_cfg()
            },
            ModelRole::Segmentor,
            pretrained.chars.clone(),
            pretrained.bigrams.clone(),
            words,
            vec![],
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn transfer_reproduces_the_window_representation() {
        let sources = PretrainSources {
            punc: raw(&["ab，cd", "d。c"]),
            autoseg: seg(&["ab cd", "d c"]),
            ..PretrainSources::default()
        };
        let mut pre = pretrained_for(&sources, 12);
        let cfg = PretrainConfig {
            epochs: 2,
            ..PretrainConfig::default()
        };
        multitask_pretrain(&mut pre, &sources, &cfg).unwrap();

        let mut segmentor = segmentor_like(&pre, 13);
        let before = values_by_name(&segmentor.params);
        transfer(&pre, &mut segmentor).unwrap();
        let after = values_by_name(&segmentor.params);

        // Only the shared stack moved, and it now matches the source.
        for ((name, old), (_, new)) in before.iter().zip(&after) {
            let shared = name == "emb.char" || name == "emb.bichar" || name.starts_with("win.");
            if shared {
                let src = pre.params.lookup(name).unwrap();
                assert_eq!(new, &pre.params.get(src).values, "{name} not copied");
            } else {
                assert_eq!(old, new, "{name} is not transferable");
            }
        }

        // Same windows on both sides of the transfer.
        let text: Vec<char> = "dcab".chars().collect();
        let sp = Scorer::new(&pre, &text, None).unwrap();
        let ss = Scorer::new(&segmentor, &text, None).unwrap();
        for t in 0..text.len() {
            let a = sp.window_rep(t).unwrap();
            let b = ss.window_rep(t).unwrap();
            assert_eq!(sp.graph.value(a), ss.graph.value(b), "window {t}");
        }

        // Transferred parameters stay tunable for fine-tuning.
        let id = segmentor.params.lookup("emb.char").unwrap();
        assert!(segmentor.params.get(id).tunable);

        // Applying the copy twice changes nothing further.
        transfer(&pre, &mut segmentor).unwrap();
        assert_eq!(after, values_by_name(&segmentor.params));
    }

    #[test]
    fn transfer_rejects_incompatible_models() {
        let sources = PretrainSources {
            autoseg: seg(&["ab cd"]),
            ..PretrainSources::default()
        };
        let pre = pretrained_for(&sources, 14);

        // Same shapes, different vocabulary contents.
        let other_sources = PretrainSources {
            autoseg: seg(&["xy zw"]),
            ..PretrainSources::default()
        };
        let mut wrong_vocab = segmentor_like(&pretrained_for(&other_sources, 15), 16);
        let err = transfer(&pre, &mut wrong_vocab).unwrap_err();
        assert!(err.to_string().contains("emb.char"), "got: {err}");

        // Same vocabulary, wider window layers.
        let corpus = seg(&["ab cd", "a bcd"]);
        let (_, _, words) = build_vocabs(&corpus);
        let mut wrong_shape = ScoringModel::new(
            ModelConfig {
                xc_dim: 6,
                ..small_cfg()
            },
            ModelRole::Segmentor,
            pre.chars.clone(),
            pre.bigrams.clone(),
            words,
            vec![],
            &mut ChaCha8Rng::seed_from_u64(17),
        )
        .unwrap();
        let err = transfer(&pre, &mut wrong_shape).unwrap_err();
        assert!(err.to_string().contains("win.0.w"), "got: {err}");
    }

    #[test]
    fn pretraining_is_seed_deterministic() {
        let sources = PretrainSources {
            punc: raw(&["ab，cd", "d。c", "，a"]),
            autoseg: seg(&["ab cd"]),
            ..PretrainSources::default()
        };
        let cfg = PretrainConfig {
            epochs: 3,
            ..PretrainConfig::default()
        };
        let mut runs = Vec::new();
        for _ in 0..2 {
            let mut model = pretrained_for(&sources, 18);
            let records = multitask_pretrain(&mut model, &sources, &cfg).unwrap();
            runs.push((records, values_by_name(&model.params)));
        }
        assert_eq!(runs[0].0, runs[1].0);
        assert_eq!(runs[0].1, runs[1].1);
    }

    #[test]
    fn pretraining_rejects_missing_material() {
        let sources = PretrainSources::default();
        let with_data = PretrainSources {
            autoseg: seg(&["ab cd"]),
            ..PretrainSources::default()
        };
        let mut model = pretrained_for(&with_data, 19);
        assert!(multitask_pretrain(&mut model, &sources, &PretrainConfig::default()).is_err());

        // A model without the needed head is rejected up front.
        let punc_only = PretrainSources {
            punc: raw(&["a，b"]),
            ..PretrainSources::default()
        };
        assert!(multitask_pretrain(&mut model, &punc_only, &PretrainConfig::default()).is_err());
    }

    #[test]
    fn epoch_records_format_compactly() {
        let rec = PretrainEpochRecord {
            epoch: 2,
            draws: 130,
            task_draws: [100, 10, 10, 10],
            mean_loss: 0.25,
            holdout_accuracy: [Some(0.975), None, Some(1.0), None],
        };
        assert_eq!(rec.to_line(), "2\t130\t0.2500\t0.9750\t-\t1.0000\t-");
    }
}
