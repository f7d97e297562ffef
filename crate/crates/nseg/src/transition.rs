//! Transition system for incremental word segmentation.
//!
//! A state is the triple of fully recognized words W, the partially
//! recognized word P, and the remaining input characters C. Two actions
//! move the segmentor forward, both consuming the next character:
//!
//! - `Sep`: commit P (if non-empty) to W and start a new partial word
//!   with the incoming character.
//! - `App`: extend P with the incoming character; invalid while P is
//!   empty, so the first action of any sentence is forced to `Sep`.
//!
//! When C is exhausted an unscored finalization commits the trailing
//! partial word. A sentence of n characters therefore admits exactly
//! 2^(n-1) action sequences, one per segmentation.
//!
//! States are persistent: committed words live in a reference-counted
//! chain shared between a state and its successors, so beam search can
//! keep many hypotheses alive cheaply.

use std::rc::Rc;

use crate::error::{Error, Result};

/// Segmentation action on the next incoming character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Commit the partial word and start a new one with the next character.
    Sep,
    /// Append the next character to the partial word.
    App,
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Action::Sep => "SEP",
            Action::App => "APP",
        })
    }
}

/// Character span `[start, end)` of a word within the sentence.
pub type Span = (usize, usize);

#[derive(Debug)]
struct WordLink {
    prev: Option<Rc<WordLink>>,
    span: Span,
}

/// A segmentation state: committed words, the current partial word and
/// the position of the next incoming character.
#[derive(Debug, Clone)]
pub struct State {
    words: Option<Rc<WordLink>>,
    word_count: usize,
    partial_start: usize,
    partial_len: usize,
    consumed: usize,
}

impl State {
    /// The axiom: no words, empty partial, all characters incoming.
    pub fn initial() -> State {
        State {
            words: None,
            word_count: 0,
            partial_start: 0,
            partial_len: 0,
            consumed: 0,
        }
    }

    /// Number of characters consumed so far; also the index of the next
    /// incoming character.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Number of committed words (excludes the partial word).
    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// Span of the partial word, or `None` while it is empty.
    pub fn partial(&self) -> Option<Span> {
        if self.partial_len == 0 {
            None
        } else {
            Some((self.partial_start, self.partial_start + self.partial_len))
        }
    }

    /// Actions applicable when `n` characters make up the sentence.
    /// `Sep` whenever a character is incoming; `App` additionally needs a
    /// non-empty partial word.
    pub fn valid_actions(&self, n: usize) -> &'static [Action] {
        if self.consumed >= n {
            &[]
        } else if self.partial_len == 0 {
            &[Action::Sep]
        } else {
            &[Action::Sep, Action::App]
        }
    }

    /// Applies one action, producing the successor state. The committed
    /// word chain is shared with `self`.
    pub fn apply(&self, action: Action, n: usize) -> Result<State> {
        if self.consumed >= n {
            return Err(Error::InvalidAction(format!(
                "{action} with no incoming character (consumed {} of {n})",
                self.consumed
            )));
        }
        match action {
            Action::Sep => {
                let (words, word_count) = if self.partial_len == 0 {
                    (self.words.clone(), self.word_count)
                } else {
                    (
                        Some(Rc::new(WordLink {
                            prev: self.words.clone(),
                            span: (self.partial_start, self.partial_start + self.partial_len),
                        })),
                        self.word_count + 1,
                    )
                };
                Ok(State {
                    words,
                    word_count,
                    partial_start: self.consumed,
                    partial_len: 1,
                    consumed: self.consumed + 1,
                })
            }
            Action::App => {
                if self.partial_len == 0 {
                    return Err(Error::InvalidAction(
                        "APP with an empty partial word".to_string(),
                    ));
                }
                Ok(State {
                    words: self.words.clone(),
                    word_count: self.word_count,
                    partial_start: self.partial_start,
                    partial_len: self.partial_len + 1,
                    consumed: self.consumed + 1,
                })
            }
        }
    }

    /// Unscored finalization once all `n` characters are consumed: commits
    /// the trailing partial word.
    pub fn finalize(&self, n: usize) -> Result<State> {
        if self.consumed != n {
            return Err(Error::InvalidState(format!(
                "finalize with {} of {} characters consumed",
                self.consumed, n
            )));
        }
        if self.partial_len == 0 {
            return Ok(self.clone());
        }
        Ok(State {
            words: Some(Rc::new(WordLink {
                prev: self.words.clone(),
                span: (self.partial_start, self.partial_start + self.partial_len),
            })),
            word_count: self.word_count + 1,
            partial_start: self.consumed,
            partial_len: 0,
            consumed: self.consumed,
        })
    }

    /// Committed words in sentence order.
    pub fn words(&self) -> Vec<Span> {
        let mut out = Vec::with_capacity(self.word_count);
        let mut link = self.words.as_deref();
        while let Some(l) = link {
            out.push(l.span);
            link = l.prev.as_deref();
        }
        out.reverse();
        out
    }

    /// Up to `k` most recently committed words, most recent first.
    pub fn recent_words(&self, k: usize) -> Vec<Span> {
        let mut out = Vec::with_capacity(k);
        let mut link = self.words.as_deref();
        while let Some(l) = link {
            if out.len() == k {
                break;
            }
            out.push(l.span);
            link = l.prev.as_deref();
        }
        out
    }
}

/// Gold action sequence for a segmentation given as word lengths: each
/// word opens with `Sep` and continues with `App`.
pub fn gold_actions(word_lens: &[usize]) -> Result<Vec<Action>> {
    let n: usize = word_lens.iter().sum();
    let mut actions = Vec::with_capacity(n);
    for &len in word_lens {
        if len == 0 {
            return Err(Error::invalid_argument("zero-length word"));
        }
        actions.push(Action::Sep);
        for _ in 1..len {
            actions.push(Action::App);
        }
    }
    Ok(actions)
}

/// Replays a full action sequence over an `n`-character sentence and
/// returns the finalized segmentation.
pub fn actions_to_spans(actions: &[Action], n: usize) -> Result<Vec<Span>> {
    if actions.len() != n {
        return Err(Error::invalid_argument(format!(
            "{} actions for {} characters",
            actions.len(),
            n
        )));
    }
    let mut state = State::initial();
    for &a in actions {
        state = state.apply(a, n)?;
    }
    Ok(state.finalize(n)?.words())
}

/// Word lengths of a span sequence; the inverse of [`gold_actions`] when
/// composed with [`actions_to_spans`].
pub fn spans_to_lens(spans: &[Span]) -> Vec<usize> {
    spans.iter().map(|(s, e)| e - s).collect()
}
