//! Beam-search decoding over the transition system.
//!
//! A hypothesis pairs a transition state with its cumulative score, both
//! as a float (for ranking) and as a graph node (so training can
//! backpropagate through a full path score). Expansion scores a state
//! once and yields the separate child before the append child; pruning
//! sorts stably, so ties resolve by insertion order and runs are
//! reproducible.

use crate::diffcore::NodeRef;
use crate::encoders::{Scorer, ScoringModel, WordLstmState};
use crate::error::{Error, Result};
use crate::transition::{Action, Span, State};

/// One beam entry: a partial segmentation and its cumulative score.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub state: State,
    /// Sum of the chosen actions' scores; 0 at the axiom.
    pub score: f64,
    /// Graph node holding `score`; absent only at the axiom.
    pub score_node: Option<NodeRef>,
    /// Word-LSTM carry, advanced once per committed word.
    pub word_lstm: Option<WordLstmState>,
    pub actions: Vec<Action>,
}

impl Hypothesis {
    pub fn initial() -> Hypothesis {
        Hypothesis {
            state: State::initial(),
            score: 0.0,
            score_node: None,
            word_lstm: None,
            actions: Vec::new(),
        }
    }

    /// Committed spans plus the open partial word, i.e. the segmentation
    /// this hypothesis denotes if finalized now.
    pub fn spans(&self) -> Vec<Span> {
        let mut spans = self.state.words();
        if let Some(p) = self.state.partial() {
            spans.push(p);
        }
        spans
    }
}

/// Scores `hyp`'s state once and returns its children: the separate
/// child, then the append child when a partial word exists.
pub fn expand(
    scorer: &mut Scorer,
    model: &ScoringModel,
    hyp: &Hypothesis,
    n: usize,
) -> Result<Vec<Hypothesis>> {
    let o = scorer.score_state(model, &hyp.state, hyp.word_lstm.as_ref())?;
    let valid = hyp.state.valid_actions(n);
    let mut children = Vec::with_capacity(2);
    for (index, action) in [(0usize, Action::Sep), (1usize, Action::App)] {
        if !valid.contains(&action) {
            continue;
        }
        let pick = scorer.graph.pick(o, index)?;
        let score_node = match hyp.score_node {
            Some(prev) => scorer.graph.add(prev, pick)?,
            None => pick,
        };
        let mut word_lstm = hyp.word_lstm;
        if action == Action::Sep && model.cfg.has_word_lstm() {
            if let Some(span) = hyp.state.partial() {
                word_lstm = Some(scorer.word_lstm_advance(
                    model,
                    hyp.word_lstm.as_ref(),
                    span,
                    hyp.state.consumed(),
                )?);
            }
        }
        let state = hyp.state.apply(action, n)?;
        let mut actions = hyp.actions.clone();
        actions.push(action);
        children.push(Hypothesis {
            state,
            score: scorer.graph.scalar(score_node),
            score_node: Some(score_node),
            word_lstm,
            actions,
        });
    }
    Ok(children)
}

/// Keeps the `beam` best children. The sort is stable and children
/// arrive parent-major with separate before append, so ties break
/// deterministically in that order.
pub fn prune(children: &mut Vec<Hypothesis>, beam: usize) {
    children.sort_by(|a, b| b.score.total_cmp(&a.score));
    children.truncate(beam);
}

/// Beam-search decodes the scorer's sentence and returns the best
/// terminal hypothesis, its state finalized. With `beam` = 1 this is
/// greedy search; with `beam` ≥ 2^(n−1) it is exhaustive.
pub fn decode(scorer: &mut Scorer, model: &ScoringModel, beam: usize) -> Result<Hypothesis> {
    if beam == 0 {
        return Err(Error::invalid_argument("beam width must be at least 1"));
    }
    let n = scorer.n();
    let mut agenda = vec![Hypothesis::initial()];
    for _ in 0..n {
        let mut children = Vec::with_capacity(2 * agenda.len());
        for hyp in &agenda {
            children.extend(expand(scorer, model, hyp, n)?);
        }
        prune(&mut children, beam);
        agenda = children;
    }
    let mut best = agenda
        .into_iter()
        .next()
        .expect("agenda never empties: separate is always valid");
    best.state = best.state.finalize(n)?;
    Ok(best)
}

/// Segments one sentence with a fresh evaluation-mode scorer and
/// returns the chosen word spans.
pub fn segment_sentence(model: &ScoringModel, chars: &[char], beam: usize) -> Result<Vec<Span>> {
    let mut scorer = Scorer::new(model, chars, None)?;
    let best = decode(&mut scorer, model, beam)?;
    Ok(best.state.words())
}
