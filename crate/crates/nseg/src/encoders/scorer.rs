//! Per-sentence scoring: one [`Scorer`] owns the computation graph for a
//! sentence and scores transition states on demand.
//!
//! Character context is position-local, so the per-position X_C vectors
//! are built once up front and shared by every hypothesis. Partial-word
//! and word-context representations depend on the segmentation history
//! and are added to the graph lazily per scored state. Dropout noise and
//! singleton-to-unknown replacement are drawn once per sentence, so all
//! hypotheses (and the gold sequence) see the same noise.
//!
//! A `Scorer` caches forward values; it is only valid while the parameter
//! values it was built from stay unchanged. Rebuild after an optimizer
//! step.

use rand::{Rng, RngCore};

use super::{lstm_cell, CharMode, ModelConfig, ModelRole, ScoringModel, WordMode};
use crate::diffcore::{dropout_mask, Graph, NodeRef, ParamSet};
use crate::error::{Error, Result};
use crate::transition::{Span, State};
use crate::vocab::{bigram_key_str, BOS, EOS, UNK};

/// Training-time noise sources; omit for deterministic evaluation.
pub struct TrainNoise<'a> {
    pub rng: &'a mut dyn RngCore,
    /// Dropout rate on embedding-concatenation inputs.
    pub dropout: f64,
    /// Probability of replacing a singleton character or bigram with the
    /// unknown token for this sentence pass.
    pub singleton_unk: f64,
}

/// The word-LSTM state carried by one hypothesis; advanced once per
/// committed word.
#[derive(Debug, Clone, Copy)]
pub struct WordLstmState {
    pub h: NodeRef,
    pub c: NodeRef,
}

/// Per-sentence dropout masks, one per position/step, shared by all
/// hypotheses so that a state's score does not depend on which hypothesis
/// reached it.
#[derive(Default)]
struct DropoutPlan {
    window: Vec<Vec<f64>>,
    char_lstm_in: Vec<Vec<f64>>,
    xp: Vec<Vec<f64>>,
    xw_win: Vec<Vec<f64>>,
    word_lstm_in: Vec<Vec<f64>>,
}

impl DropoutPlan {
    fn generate(
        cfg: &ModelConfig,
        seg: bool,
        n: usize,
        p: f64,
        rng: &mut dyn RngCore,
    ) -> Result<DropoutPlan> {
        let mut plan = DropoutPlan::default();
        if cfg.has_window_net() {
            for _ in 0..n {
                plan.window
                    .push(dropout_mask(5 * cfg.v_dim(), p, &mut &mut *rng, true)?);
            }
        }
        if seg && cfg.char_mode == CharMode::Lstm {
            for _ in 0..n {
                plan.char_lstm_in
                    .push(dropout_mask(cfg.v_dim(), p, &mut &mut *rng, true)?);
            }
        }
        if seg {
            for _ in 0..n {
                plan.xp
                    .push(dropout_mask(cfg.xp_input_dim(), p, &mut &mut *rng, true)?);
            }
            if let Some(k) = cfg.word_window_k() {
                for _ in 0..n {
                    plan.xw_win
                        .push(dropout_mask(k * cfg.word_dim, p, &mut &mut *rng, true)?);
                }
            }
            if cfg.has_word_lstm() {
                for _ in 0..n {
                    plan.word_lstm_in
                        .push(dropout_mask(cfg.word_dim, p, &mut &mut *rng, true)?);
                }
            }
        }
        Ok(plan)
    }
}

/// Sentence-level scoring context. See the module docs for lifetime
/// rules.
pub struct Scorer {
    chars: Vec<char>,
    n: usize,
    /// Character ids for positions [-2, n+2]; index by position + 2.
    ext_chars: Vec<usize>,
    /// Bigram ids for pairs starting at [-2, n+1]; index by position + 2.
    ext_bigrams: Vec<usize>,
    pub graph: Graph,
    /// X_C per position; empty when character context is disabled or the
    /// model is not a segmentor.
    xc: Vec<NodeRef>,
    /// Window representations per position; empty without a window net.
    dc: Vec<NodeRef>,
    plan: Option<DropoutPlan>,
    zero_xp: Option<NodeRef>,
    word_h0: Option<(NodeRef, NodeRef)>,
    word_unk: usize,
    word_bos: usize,
    score_calls: usize,
}

fn singleton_to_unk(
    vocab: &crate::vocab::Vocab,
    id: usize,
    unk: usize,
    p: f64,
    rng: &mut dyn RngCore,
) -> usize {
    if id == unk {
        return id;
    }
    let t = vocab.token(id);
    if t == BOS || t == EOS {
        return id;
    }
    if vocab.is_singleton(id) && rng.gen_bool(p) {
        unk
    } else {
        id
    }
}

impl Scorer {
    pub fn new(
        model: &ScoringModel,
        sentence: &[char],
        mut noise: Option<TrainNoise<'_>>,
    ) -> Result<Scorer> {
        let cfg = &model.cfg;
        let h = model.handles();
        let seg = model.role == ModelRole::Segmentor;
        let n = sentence.len();
        if n == 0 {
            return Err(Error::invalid_argument("cannot score an empty sentence"));
        }
        if let Some(ns) = &noise {
            if !(0.0..=1.0).contains(&ns.singleton_unk) {
                return Err(Error::invalid_argument(format!(
                    "singleton replacement rate must be in [0, 1], got {}",
                    ns.singleton_unk
                )));
            }
        }

        // Padded token sequence for positions [-2, n+2].
        let mut ext_tokens: Vec<String> = Vec::with_capacity(n + 5);
        ext_tokens.push(BOS.to_string());
        ext_tokens.push(BOS.to_string());
        ext_tokens.extend(sentence.iter().map(|c| c.to_string()));
        for _ in 0..3 {
            ext_tokens.push(EOS.to_string());
        }

        let mut ext_chars = Vec::new();
        let mut char_unk = 0;
        if h.emb_char.is_some() {
            char_unk = model.chars.get(UNK).ok_or_else(|| {
                Error::invalid_argument("character vocabulary lacks <unk>")
            })?;
            ext_chars = ext_tokens
                .iter()
                .map(|t| model.chars.get(t).unwrap_or(char_unk))
                .collect();
        }
        let mut ext_bigrams = Vec::new();
        let mut bigram_unk = 0;
        if cfg.use_bichar_emb {
            bigram_unk = model.bigrams.get(UNK).ok_or_else(|| {
                Error::invalid_argument("bigram vocabulary lacks <unk>")
            })?;
            ext_bigrams = ext_tokens
                .windows(2)
                .map(|p| {
                    model
                        .bigrams
                        .get(&bigram_key_str(&p[0], &p[1]))
                        .unwrap_or(bigram_unk)
                })
                .collect();
        }

        // Noise is drawn in a fixed order: character replacements, bigram
        // replacements, then the dropout plan.
        if let Some(ns) = noise.as_mut() {
            if ns.singleton_unk > 0.0 {
                for id in ext_chars.iter_mut() {
                    *id = singleton_to_unk(
                        &model.chars,
                        *id,
                        char_unk,
                        ns.singleton_unk,
                        &mut *ns.rng,
                    );
                }
                for id in ext_bigrams.iter_mut() {
                    *id = singleton_to_unk(
                        &model.bigrams,
                        *id,
                        bigram_unk,
                        ns.singleton_unk,
                        &mut *ns.rng,
                    );
                }
            }
        }
        let plan = match noise.as_mut() {
            Some(ns) => Some(DropoutPlan::generate(cfg, seg, n, ns.dropout, &mut *ns.rng)?),
            None => None,
        };

        let (word_unk, word_bos) = if seg && cfg.word_mode != WordMode::None {
            (
                model
                    .words
                    .get(UNK)
                    .ok_or_else(|| Error::invalid_argument("word vocabulary lacks <unk>"))?,
                model
                    .words
                    .get(BOS)
                    .ok_or_else(|| Error::invalid_argument("word vocabulary lacks <s>"))?,
            )
        } else {
            (0, 0)
        };

        let mut graph = Graph::new();
        let params = &model.params;

        // Per-position embedding concatenations V, shared by every window
        // that covers the position.
        let need_v = cfg.has_window_net() || (seg && cfg.char_mode == CharMode::Lstm);
        let mut v_nodes = Vec::new();
        if need_v {
            for i in 0..n + 4 {
                let mut parts = Vec::new();
                if cfg.use_char_emb {
                    parts.push(graph.lookup(params, h.emb_char.unwrap(), ext_chars[i])?);
                }
                if cfg.use_bichar_emb {
                    parts.push(graph.lookup(params, h.emb_bichar.unwrap(), ext_bigrams[i])?);
                }
                v_nodes.push(graph.concat(&parts)?);
            }
        }

        let mut dc = Vec::new();
        if cfg.has_window_net() {
            for j in 0..n {
                let win = graph.concat(&v_nodes[j..j + 5])?;
                let mut cur = match &plan {
                    Some(p) => graph.mask(win, p.window[j].clone())?,
                    None => win,
                };
                for &(w, b) in &h.win {
                    let a = graph.affine(params, &[(w, cur)], b)?;
                    cur = graph.tanh(a);
                }
                dc.push(cur);
            }
        }

        let mut xc = Vec::new();
        if seg {
            match cfg.char_mode {
                CharMode::None => {}
                CharMode::Window => xc = dc.clone(),
                CharMode::Lstm | CharMode::WindowPlusLstm => {
                    let mut inputs = Vec::with_capacity(n);
                    for j in 0..n {
                        let x = if cfg.char_mode == CharMode::Lstm {
                            let raw = v_nodes[j + 2];
                            match &plan {
                                Some(p) => graph.mask(raw, p.char_lstm_in[j].clone())?,
                                None => raw,
                            }
                        } else {
                            dc[j]
                        };
                        inputs.push(x);
                    }
                    let hid = cfg.char_lstm_hidden();
                    let fwd = h.char_fwd.unwrap();
                    let bwd = h.char_bwd.unwrap();
                    let mut fh = Vec::with_capacity(n);
                    let mut hp = graph.input(vec![0.0; hid]);
                    let mut cp = graph.input(vec![0.0; hid]);
                    for &x in &inputs {
                        (hp, cp) = lstm_cell(&mut graph, params, &fwd, x, hp, cp)?;
                        fh.push(hp);
                    }
                    let mut bh = Vec::with_capacity(n);
                    let mut hp = graph.input(vec![0.0; hid]);
                    let mut cp = graph.input(vec![0.0; hid]);
                    for &x in inputs.iter().rev() {
                        (hp, cp) = lstm_cell(&mut graph, params, &bwd, x, hp, cp)?;
                        bh.push(hp);
                    }
                    bh.reverse();
                    for j in 0..n {
                        xc.push(graph.concat(&[fh[j], bh[j]])?);
                    }
                }
            }
        }

        Ok(Scorer {
            chars: sentence.to_vec(),
            n,
            ext_chars,
            ext_bigrams,
            graph,
            xc,
            dc,
            plan,
            zero_xp: None,
            word_h0: None,
            word_unk,
            word_bos,
            score_calls: 0,
        })
    }

    /// Characters in this sentence.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Character ids for padded positions [-2, n+2], after any noise.
    pub fn ext_char_ids(&self) -> &[usize] {
        &self.ext_chars
    }

    /// Bigram ids for padded pair starts [-2, n+1], after any noise;
    /// empty when bigram embeddings are disabled.
    pub fn ext_bigram_ids(&self) -> &[usize] {
        &self.ext_bigrams
    }

    /// How many states have been scored; one output node each.
    pub fn score_calls(&self) -> usize {
        self.score_calls
    }

    /// X_C for position `t`, when character context is active.
    pub fn char_rep(&self, t: usize) -> Option<NodeRef> {
        self.xc.get(t).copied()
    }

    /// The window representation for position `j`; this is the vector the
    /// pretraining heads classify.
    pub fn window_rep(&self, j: usize) -> Result<NodeRef> {
        self.dc.get(j).copied().ok_or_else(|| {
            Error::invalid_argument(format!(
                "no window representation at position {j} (window net absent or out of range)"
            ))
        })
    }

    fn zero_xp(&mut self, dim: usize) -> NodeRef {
        match self.zero_xp {
            Some(z) => z,
            None => {
                let z = self.graph.input(vec![0.0; dim]);
                self.zero_xp = Some(z);
                z
            }
        }
    }

    fn word_h0(&mut self, dim: usize) -> (NodeRef, NodeRef) {
        match self.word_h0 {
            Some(z) => z,
            None => {
                let z = (
                    self.graph.input(vec![0.0; dim]),
                    self.graph.input(vec![0.0; dim]),
                );
                self.word_h0 = Some(z);
                z
            }
        }
    }

    fn word_id(&self, model: &ScoringModel, span: Span) -> usize {
        let w: String = self.chars[span.0..span.1].iter().collect();
        model.words.get(&w).unwrap_or(self.word_unk)
    }

    /// tanh-affine over the last `k` word embeddings, padded at the
    /// sentence start.
    fn word_window(
        &mut self,
        model: &ScoringModel,
        params: &ParamSet,
        st: &State,
        k: usize,
        t: usize,
    ) -> Result<NodeRef> {
        let (ww_w, ww_b) = model.handles().word_win.unwrap();
        let emb = model.handles().emb_word.unwrap();
        let mut ids = vec![self.word_bos; k];
        for (m, span) in st.recent_words(k).into_iter().enumerate() {
            ids[k - 1 - m] = self.word_id(model, span);
        }
        let mut looks = Vec::with_capacity(k);
        for id in ids {
            looks.push(self.graph.lookup(params, emb, id)?);
        }
        let cat = self.graph.concat(&looks)?;
        let cat = match &self.plan {
            Some(p) => self.graph.mask(cat, p.xw_win[t].clone())?,
            None => cat,
        };
        let lin = self.graph.affine(params, &[(ww_w, cat)], ww_b)?;
        Ok(self.graph.tanh(lin))
    }

    /// Scores the two actions available in `st`. The result is a 2-dim
    /// node: index 0 is the separate score, index 1 the append score.
    /// `word_lstm` is the hypothesis's LSTM state when the word LSTM is
    /// active (absent means no word has been committed yet).
    pub fn score_state(
        &mut self,
        model: &ScoringModel,
        st: &State,
        word_lstm: Option<&WordLstmState>,
    ) -> Result<NodeRef> {
        if model.role != ModelRole::Segmentor {
            return Err(Error::InvalidState(
                "only segmentor models score transition states".to_string(),
            ));
        }
        let cfg = &model.cfg;
        let h = model.handles();
        let params = &model.params;
        let t = st.consumed();
        if t >= self.n {
            return Err(Error::InvalidState(format!(
                "state has consumed all {} characters; nothing to score",
                self.n
            )));
        }

        let mut terms: Vec<(crate::diffcore::ParamId, NodeRef)> = Vec::with_capacity(3);
        if cfg.char_mode != CharMode::None {
            terms.push((h.hid_wc.unwrap(), self.xc[t]));
        }

        let xp_node = match st.partial() {
            None => self.zero_xp(cfg.xp_dim),
            Some((s, e)) => {
                let (xp_w, xp_b) = h.xp.unwrap();
                let emb = h.emb_char.unwrap();
                let first = self.graph.lookup(params, emb, self.ext_chars[s + 2])?;
                let last = self.graph.lookup(params, emb, self.ext_chars[e - 1 + 2])?;
                let len_row = (e - s).min(cfg.length_cap);
                let el = self
                    .graph
                    .lookup(params, h.emb_len.unwrap(), len_row)?;
                let cat = self.graph.concat(&[first, last, el])?;
                let cat = match &self.plan {
                    Some(p) => self.graph.mask(cat, p.xp[t].clone())?,
                    None => cat,
                };
                let lin = self.graph.affine(params, &[(xp_w, cat)], xp_b)?;
                self.graph.tanh(lin)
            }
        };
        terms.push((h.hid_wp.unwrap(), xp_node));

        match cfg.word_mode {
            WordMode::None => {}
            WordMode::Window(k) => {
                let xw = self.word_window(model, params, st, k, t)?;
                terms.push((h.hid_ww.unwrap(), xw));
            }
            WordMode::Lstm => {
                let xw = match word_lstm {
                    Some(wl) => wl.h,
                    None => self.word_h0(cfg.xw_dim).0,
                };
                terms.push((h.hid_ww.unwrap(), xw));
            }
            WordMode::WindowPlusLstm => {
                let win = self.word_window(model, params, st, 2, t)?;
                let lstm_h = match word_lstm {
                    Some(wl) => wl.h,
                    None => self.word_h0(cfg.xw_dim).0,
                };
                let cat = self.graph.concat(&[win, lstm_h])?;
                terms.push((h.hid_ww.unwrap(), cat));
            }
        }

        let pre = self.graph.affine(params, &terms, h.hid_b.unwrap())?;
        let hid = self.graph.tanh(pre);
        let (out_w, out_b) = h.out.unwrap();
        let o = self.graph.affine(params, &[(out_w, hid)], out_b)?;
        self.score_calls += 1;
        Ok(o)
    }

    /// Feeds a just-committed word into the word LSTM. `step` is the
    /// position at which the separate action committed the word.
    pub fn word_lstm_advance(
        &mut self,
        model: &ScoringModel,
        prev: Option<&WordLstmState>,
        span: Span,
        step: usize,
    ) -> Result<WordLstmState> {
        let Some(gates) = model.handles().word_lstm else {
            return Err(Error::InvalidState(
                "this model has no word LSTM".to_string(),
            ));
        };
        if step >= self.n {
            return Err(Error::InvalidState(format!(
                "word LSTM advance at step {step} of a {}-character sentence",
                self.n
            )));
        }
        let emb = model.handles().emb_word.unwrap();
        let id = self.word_id(model, span);
        let x = self.graph.lookup(&model.params, emb, id)?;
        let x = match &self.plan {
            Some(p) => self.graph.mask(x, p.word_lstm_in[step].clone())?,
            None => x,
        };
        let (h_prev, c_prev) = match prev {
            Some(wl) => (wl.h, wl.c),
            None => self.word_h0(model.cfg.xw_dim),
        };
        let (h, c) = lstm_cell(&mut self.graph, &model.params, &gates, x, h_prev, c_prev)?;
        Ok(WordLstmState { h, c })
    }
}
