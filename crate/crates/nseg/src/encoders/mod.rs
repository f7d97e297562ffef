//! The scoring network: context encoders and the two-action scorer.
//!
//! A transition state is scored from three representations: X_C for the
//! incoming characters (five-character window MLP, bi-LSTM, or the window
//! vectors fed through the bi-LSTM), X_P for the partial word (first and
//! last character plus a length embedding, projected), and X_W for the
//! recognized words (k-word window and/or a unidirectional LSTM). A tanh
//! hidden layer merges them and a linear output layer yields the
//! separate/append scores.
//!
//! The five-character window network is the unit shared with multi-task
//! pretraining: its parameters (and the character/bigram embeddings) are
//! what a pretrained model transfers into a segmentor.

mod lstm;
mod scorer;

pub use lstm::lstm_cell;
pub use scorer::{Scorer, TrainNoise, WordLstmState};

use rand::Rng;

use crate::diffcore::{ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::vocab::Vocab;

/// How incoming characters are encoded into X_C.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharMode {
    /// X_C = 0; character context disabled.
    None,
    /// Five-character window MLP.
    Window,
    /// Bi-LSTM over per-character vectors.
    Lstm,
    /// Bi-LSTM over per-position window vectors.
    WindowPlusLstm,
}

/// How recognized words are encoded into X_W.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordMode {
    /// X_W = 0; word context disabled.
    None,
    /// tanh-affine over the last k word embeddings, k in 1..=3.
    Window(usize),
    /// Unidirectional LSTM advanced once per committed word.
    Lstm,
    /// Concatenation of the 2-word window and the LSTM state.
    WindowPlusLstm,
}

impl std::fmt::Display for CharMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CharMode::None => "none",
            CharMode::Window => "window",
            CharMode::Lstm => "lstm",
            CharMode::WindowPlusLstm => "window_plus_lstm",
        })
    }
}

impl std::str::FromStr for CharMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CharMode::None),
            "window" => Ok(CharMode::Window),
            "lstm" => Ok(CharMode::Lstm),
            "window_plus_lstm" | "window+lstm" => Ok(CharMode::WindowPlusLstm),
            other => Err(Error::invalid_argument(format!(
                "unknown char_mode `{other}` (none|window|lstm|window_plus_lstm)"
            ))),
        }
    }
}

impl std::fmt::Display for WordMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WordMode::None => f.write_str("none"),
            WordMode::Window(k) => write!(f, "window_{k}"),
            WordMode::Lstm => f.write_str("lstm"),
            WordMode::WindowPlusLstm => f.write_str("window_plus_lstm"),
        }
    }
}

impl std::str::FromStr for WordMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(WordMode::None),
            "window_1" | "window1" => Ok(WordMode::Window(1)),
            "window_2" | "window2" => Ok(WordMode::Window(2)),
            "window_3" | "window3" => Ok(WordMode::Window(3)),
            "lstm" => Ok(WordMode::Lstm),
            "window_plus_lstm" | "window+lstm" => Ok(WordMode::WindowPlusLstm),
            other => Err(Error::invalid_argument(format!(
                "unknown word_mode `{other}` (none|window_1|window_2|window_3|lstm|window_plus_lstm)"
            ))),
        }
    }
}

/// What a model is for; decides which parameters exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRole {
    /// Embeddings, window network and task heads, trained by multi-task
    /// pretraining.
    Pretrained,
    /// The full segmentor.
    Segmentor,
}

impl std::fmt::Display for ModelRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelRole::Pretrained => "pretrained",
            ModelRole::Segmentor => "segmentor",
        })
    }
}

impl std::str::FromStr for ModelRole {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrained" => Ok(ModelRole::Pretrained),
            "segmentor" => Ok(ModelRole::Segmentor),
            other => Err(Error::invalid_argument(format!(
                "unknown model role `{other}` (pretrained|segmentor)"
            ))),
        }
    }
}

/// Network architecture and embedding settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub char_mode: CharMode,
    pub word_mode: WordMode,
    /// Include character embeddings in the per-character vector V.
    pub use_char_emb: bool,
    /// Include character-bigram embeddings in V.
    pub use_bichar_emb: bool,
    pub char_dim: usize,
    pub bichar_dim: usize,
    pub word_dim: usize,
    pub length_dim: usize,
    /// Partial-word lengths at or above this share one embedding row; the
    /// length table has `length_cap + 1` rows indexed by min(len, cap).
    pub length_cap: usize,
    pub xc_dim: usize,
    pub xp_dim: usize,
    pub xw_dim: usize,
    pub hidden_dim: usize,
    /// Affine+tanh layers in the window MLP.
    pub mlp_layers: usize,
    pub char_tunable: bool,
    pub bichar_tunable: bool,
    pub word_tunable: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            char_mode: CharMode::WindowPlusLstm,
            word_mode: WordMode::Window(2),
            use_char_emb: true,
            use_bichar_emb: true,
            char_dim: 50,
            bichar_dim: 50,
            word_dim: 50,
            length_dim: 20,
            length_cap: 20,
            xc_dim: 150,
            xp_dim: 50,
            xw_dim: 100,
            hidden_dim: 200,
            mlp_layers: 2,
            char_tunable: true,
            bichar_tunable: true,
            word_tunable: false,
        }
    }
}

impl ModelConfig {
    /// Dimension of the per-character vector V (embedding concatenation).
    pub fn v_dim(&self) -> usize {
        let mut d = 0;
        if self.use_char_emb {
            d += self.char_dim;
        }
        if self.use_bichar_emb {
            d += self.bichar_dim;
        }
        d
    }

    /// Whether the window MLP exists under this configuration/role.
    pub fn has_window_net(&self) -> bool {
        matches!(self.char_mode, CharMode::Window | CharMode::WindowPlusLstm)
    }

    /// Whether the character bi-LSTM exists.
    pub fn has_char_lstm(&self) -> bool {
        matches!(self.char_mode, CharMode::Lstm | CharMode::WindowPlusLstm)
    }

    /// Input dimension of the character bi-LSTM.
    pub fn char_lstm_input_dim(&self) -> usize {
        match self.char_mode {
            CharMode::Lstm => self.v_dim(),
            CharMode::WindowPlusLstm => self.xc_dim,
            _ => 0,
        }
    }

    /// Per-direction hidden size of the character bi-LSTM.
    pub fn char_lstm_hidden(&self) -> usize {
        self.xc_dim / 2
    }

    /// Word-window width, if a word window is active (the combined mode
    /// uses the 2-word window).
    pub fn word_window_k(&self) -> Option<usize> {
        match self.word_mode {
            WordMode::Window(k) => Some(k),
            WordMode::WindowPlusLstm => Some(2),
            _ => None,
        }
    }

    /// Whether the word LSTM exists.
    pub fn has_word_lstm(&self) -> bool {
        matches!(self.word_mode, WordMode::Lstm | WordMode::WindowPlusLstm)
    }

    /// Total dimension of X_W as seen by the hidden layer.
    pub fn xw_total(&self) -> usize {
        match self.word_mode {
            WordMode::None => 0,
            WordMode::Window(_) | WordMode::Lstm => self.xw_dim,
            WordMode::WindowPlusLstm => 2 * self.xw_dim,
        }
    }

    /// Input dimension of the partial-word projection: first and last
    /// character embeddings plus the length embedding.
    pub fn xp_input_dim(&self) -> usize {
        2 * self.char_dim + self.length_dim
    }

    /// Rows of the length embedding table.
    pub fn length_rows(&self) -> usize {
        self.length_cap + 1
    }

    pub fn validate(&self, role: ModelRole) -> Result<()> {
        let positive: [(&str, usize); 6] = [
            ("char_dim", self.char_dim),
            ("length_dim", self.length_dim),
            ("xc_dim", self.xc_dim),
            ("xp_dim", self.xp_dim),
            ("hidden_dim", self.hidden_dim),
            ("length_cap", self.length_cap),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid_argument(format!("{name} must be > 0")));
            }
        }
        if self.use_bichar_emb && self.bichar_dim == 0 {
            return Err(Error::invalid_argument("bichar_dim must be > 0"));
        }
        if self.char_mode != CharMode::None && self.v_dim() == 0 {
            return Err(Error::invalid_argument(
                "char_mode needs use_char_emb or use_bichar_emb",
            ));
        }
        if self.has_char_lstm() && self.xc_dim % 2 != 0 {
            return Err(Error::invalid_argument(
                "xc_dim must be even for the bi-LSTM (two equal directions)",
            ));
        }
        if self.has_window_net() && self.mlp_layers == 0 {
            return Err(Error::invalid_argument("mlp_layers must be >= 1"));
        }
        if let WordMode::Window(k) = self.word_mode {
            if !(1..=3).contains(&k) {
                return Err(Error::invalid_argument(format!(
                    "word window width {k} outside 1..=3"
                )));
            }
        }
        if self.word_mode != WordMode::None && (self.word_dim == 0 || self.xw_dim == 0) {
            return Err(Error::invalid_argument(
                "word_dim and xw_dim must be > 0 when word context is enabled",
            ));
        }
        if role == ModelRole::Pretrained && !self.has_window_net() {
            return Err(Error::invalid_argument(
                "pretraining requires a window network (char_mode window or window_plus_lstm)",
            ));
        }
        Ok(())
    }

    /// Canonical key=value text, one pair per line, fixed key order.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("char_mode", self.char_mode.to_string());
        kv("word_mode", self.word_mode.to_string());
        kv("use_char_emb", self.use_char_emb.to_string());
        kv("use_bichar_emb", self.use_bichar_emb.to_string());
        kv("char_dim", self.char_dim.to_string());
        kv("bichar_dim", self.bichar_dim.to_string());
        kv("word_dim", self.word_dim.to_string());
        kv("length_dim", self.length_dim.to_string());
        kv("length_cap", self.length_cap.to_string());
        kv("xc_dim", self.xc_dim.to_string());
        kv("xp_dim", self.xp_dim.to_string());
        kv("xw_dim", self.xw_dim.to_string());
        kv("hidden_dim", self.hidden_dim.to_string());
        kv("mlp_layers", self.mlp_layers.to_string());
        kv("char_tunable", self.char_tunable.to_string());
        kv("bichar_tunable", self.bichar_tunable.to_string());
        kv("word_tunable", self.word_tunable.to_string());
        s
    }

    /// Parses the canonical key=value form; every key must be present
    /// exactly once and no unknown keys are allowed.
    pub fn from_kv(text: &str) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::default();
        let mut seen = std::collections::HashSet::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::invalid_argument(format!(
                    "config line `{line}` is not key=value"
                )));
            };
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::invalid_argument(format!("duplicate config key `{k}`")));
            }
            match k {
                "char_mode" => cfg.char_mode = v.parse()?,
                "word_mode" => cfg.word_mode = v.parse()?,
                "use_char_emb" => cfg.use_char_emb = parse_bool(k, v)?,
                "use_bichar_emb" => cfg.use_bichar_emb = parse_bool(k, v)?,
                "char_dim" => cfg.char_dim = parse_usize(k, v)?,
                "bichar_dim" => cfg.bichar_dim = parse_usize(k, v)?,
                "word_dim" => cfg.word_dim = parse_usize(k, v)?,
                "length_dim" => cfg.length_dim = parse_usize(k, v)?,
                "length_cap" => cfg.length_cap = parse_usize(k, v)?,
                "xc_dim" => cfg.xc_dim = parse_usize(k, v)?,
                "xp_dim" => cfg.xp_dim = parse_usize(k, v)?,
                "xw_dim" => cfg.xw_dim = parse_usize(k, v)?,
                "hidden_dim" => cfg.hidden_dim = parse_usize(k, v)?,
                "mlp_layers" => cfg.mlp_layers = parse_usize(k, v)?,
                "char_tunable" => cfg.char_tunable = parse_bool(k, v)?,
                "bichar_tunable" => cfg.bichar_tunable = parse_bool(k, v)?,
                "word_tunable" => cfg.word_tunable = parse_bool(k, v)?,
                other => {
                    return Err(Error::invalid_argument(format!(
                        "unknown config key `{other}`"
                    )));
                }
            }
        }
        const KEYS: [&str; 17] = [
            "char_mode",
            "word_mode",
            "use_char_emb",
            "use_bichar_emb",
            "char_dim",
            "bichar_dim",
            "word_dim",
            "length_dim",
            "length_cap",
            "xc_dim",
            "xp_dim",
            "xw_dim",
            "hidden_dim",
            "mlp_layers",
            "char_tunable",
            "bichar_tunable",
            "word_tunable",
        ];
        for k in KEYS {
            if !seen.contains(k) {
                return Err(Error::invalid_argument(format!("missing config key `{k}`")));
            }
        }
        Ok(cfg)
    }
}

pub(crate) fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::invalid_argument(format!(
            "{key}: expected true/false, got `{other}`"
        ))),
    }
}

pub(crate) fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|e| Error::invalid_argument(format!("{key}: bad integer `{v}`: {e}")))
}

/// A softmax classification head over the window representation; used by
/// pretraining tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoftmaxHead {
    pub task: String,
    pub labels: Vec<String>,
}

/// Parameter ids of one LSTM direction.
#[derive(Debug, Clone, Copy)]
pub struct LstmHandles {
    pub f_w: ParamId,
    pub f_b: ParamId,
    pub o_w: ParamId,
    pub o_b: ParamId,
    pub c_w: ParamId,
    pub c_b: ParamId,
}

/// Resolved parameter ids for fast access; rebuilt by [`wire`] whenever a
/// model is constructed or loaded.
#[derive(Debug, Clone, Default)]
pub struct Handles {
    pub emb_char: Option<ParamId>,
    pub emb_bichar: Option<ParamId>,
    pub emb_word: Option<ParamId>,
    pub emb_len: Option<ParamId>,
    /// (weight, bias) per window MLP layer.
    pub win: Vec<(ParamId, ParamId)>,
    pub char_fwd: Option<LstmHandles>,
    pub char_bwd: Option<LstmHandles>,
    pub xp: Option<(ParamId, ParamId)>,
    pub word_win: Option<(ParamId, ParamId)>,
    pub word_lstm: Option<LstmHandles>,
    pub hid_wc: Option<ParamId>,
    pub hid_wp: Option<ParamId>,
    pub hid_ww: Option<ParamId>,
    pub hid_b: Option<ParamId>,
    pub out: Option<(ParamId, ParamId)>,
    /// (weight, bias) per head, aligned with the model's head list.
    pub heads: Vec<(ParamId, ParamId)>,
}

/// The complete model: configuration, vocabularies, parameters and (for
/// pretrained models) classification heads.
#[derive(Debug, Clone)]
pub struct ScoringModel {
    pub cfg: ModelConfig,
    pub role: ModelRole,
    pub chars: Vocab,
    pub bigrams: Vocab,
    pub words: Vocab,
    pub heads: Vec<SoftmaxHead>,
    pub params: ParamSet,
    handles: Handles,
}

impl ScoringModel {
    /// Builds a freshly initialized model. Heads are only meaningful for
    /// the pretrained role; the word vocabulary only for segmentors.
    pub fn new(
        cfg: ModelConfig,
        role: ModelRole,
        chars: Vocab,
        bigrams: Vocab,
        words: Vocab,
        heads: Vec<SoftmaxHead>,
        rng: &mut impl Rng,
    ) -> Result<ScoringModel> {
        cfg.validate(role)?;
        if role == ModelRole::Segmentor && !heads.is_empty() {
            return Err(Error::invalid_argument("segmentor models carry no heads"));
        }
        let params = build_params(&cfg, role, &chars, &bigrams, &words, &heads, rng)?;
        let handles = wire(&params, &cfg, role, &heads)?;
        Ok(ScoringModel {
            cfg,
            role,
            chars,
            bigrams,
            words,
            heads,
            params,
            handles,
        })
    }

    /// Reassembles a model from deserialized parts, verifying that the
    /// parameter set matches what the configuration implies.
    pub fn from_parts(
        cfg: ModelConfig,
        role: ModelRole,
        chars: Vocab,
        bigrams: Vocab,
        words: Vocab,
        heads: Vec<SoftmaxHead>,
        params: ParamSet,
    ) -> Result<ScoringModel> {
        cfg.validate(role)?;
        let handles = wire(&params, &cfg, role, &heads)?;
        let model = ScoringModel {
            cfg,
            role,
            chars,
            bigrams,
            words,
            heads,
            params,
            handles,
        };
        model.check_vocab_sizes()?;
        Ok(model)
    }

    pub fn handles(&self) -> &Handles {
        &self.handles
    }

    fn check_vocab_sizes(&self) -> Result<()> {
        let checks: [(&Option<ParamId>, usize, &str); 4] = [
            (&self.handles.emb_char, self.chars.len(), "character"),
            (&self.handles.emb_bichar, self.bigrams.len(), "bigram"),
            (&self.handles.emb_word, self.words.len(), "word"),
            (&self.handles.emb_len, self.cfg.length_rows(), "length"),
        ];
        for (id, want, what) in checks {
            if let Some(id) = id {
                let rows = self.params.get(*id).rows();
                if rows != want {
                    return Err(Error::invalid_argument(format!(
                        "{what} embedding has {rows} rows but the vocabulary implies {want}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Whether the segmentor-only parts exist for this role.
fn is_segmentor(role: ModelRole) -> bool {
    role == ModelRole::Segmentor
}

/// Name, shape and initialization of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
    pub tunable: bool,
    /// Biases start at zero; everything else uniform in the fan bound.
    pub zeros: bool,
}

impl ParamSpec {
    fn weight(name: String, rows: usize, cols: usize) -> ParamSpec {
        ParamSpec {
            name,
            shape: vec![rows, cols],
            fan_in: cols,
            fan_out: rows,
            tunable: true,
            zeros: false,
        }
    }

    fn bias(name: String, dim: usize) -> ParamSpec {
        ParamSpec {
            name,
            shape: vec![dim],
            fan_in: 0,
            fan_out: 0,
            tunable: true,
            zeros: true,
        }
    }

    fn embedding(name: &str, rows: usize, dim: usize, tunable: bool) -> ParamSpec {
        ParamSpec {
            name: name.to_string(),
            shape: vec![rows, dim],
            fan_in: dim,
            fan_out: dim,
            tunable,
            zeros: false,
        }
    }
}

/// The exact parameter set a configuration implies, in canonical order.
/// This is the single source of truth shared by initialization and by
/// model-file validation.
pub(crate) fn param_specs(
    cfg: &ModelConfig,
    role: ModelRole,
    n_chars: usize,
    n_bigrams: usize,
    n_words: usize,
    heads: &[SoftmaxHead],
) -> Result<Vec<ParamSpec>> {
    let seg = is_segmentor(role);
    let mut specs = Vec::new();

    if seg || cfg.use_char_emb {
        if n_chars == 0 {
            return Err(Error::invalid_argument("empty character vocabulary"));
        }
        specs.push(ParamSpec::embedding(
            "emb.char",
            n_chars,
            cfg.char_dim,
            cfg.char_tunable,
        ));
    }
    if cfg.use_bichar_emb {
        if n_bigrams == 0 {
            return Err(Error::invalid_argument("empty bigram vocabulary"));
        }
        specs.push(ParamSpec::embedding(
            "emb.bichar",
            n_bigrams,
            cfg.bichar_dim,
            cfg.bichar_tunable,
        ));
    }
    if seg && cfg.word_mode != WordMode::None {
        if n_words == 0 {
            return Err(Error::invalid_argument("empty word vocabulary"));
        }
        specs.push(ParamSpec::embedding(
            "emb.word",
            n_words,
            cfg.word_dim,
            cfg.word_tunable,
        ));
    }
    if seg {
        specs.push(ParamSpec::embedding(
            "emb.len",
            cfg.length_rows(),
            cfg.length_dim,
            true,
        ));
    }

    if cfg.has_window_net() {
        let mut in_dim = 5 * cfg.v_dim();
        for layer in 0..cfg.mlp_layers {
            specs.push(ParamSpec::weight(format!("win.{layer}.w"), cfg.xc_dim, in_dim));
            specs.push(ParamSpec::bias(format!("win.{layer}.b"), cfg.xc_dim));
            in_dim = cfg.xc_dim;
        }
    }

    if seg && cfg.has_char_lstm() {
        let hidden = cfg.char_lstm_hidden();
        let in_dim = cfg.char_lstm_input_dim() + hidden;
        for dir in ["fwd", "bwd"] {
            for gate in ["f", "o", "c"] {
                specs.push(ParamSpec::weight(
                    format!("char_lstm.{dir}.{gate}.w"),
                    hidden,
                    in_dim,
                ));
                specs.push(ParamSpec::bias(format!("char_lstm.{dir}.{gate}.b"), hidden));
            }
        }
    }

    if seg {
        specs.push(ParamSpec::weight(
            "xp.w".to_string(),
            cfg.xp_dim,
            cfg.xp_input_dim(),
        ));
        specs.push(ParamSpec::bias("xp.b".to_string(), cfg.xp_dim));

        if let Some(k) = cfg.word_window_k() {
            specs.push(ParamSpec::weight(
                "word_win.w".to_string(),
                cfg.xw_dim,
                k * cfg.word_dim,
            ));
            specs.push(ParamSpec::bias("word_win.b".to_string(), cfg.xw_dim));
        }
        if cfg.has_word_lstm() {
            let in_dim = cfg.word_dim + cfg.xw_dim;
            for gate in ["f", "o", "c"] {
                specs.push(ParamSpec::weight(
                    format!("word_lstm.{gate}.w"),
                    cfg.xw_dim,
                    in_dim,
                ));
                specs.push(ParamSpec::bias(format!("word_lstm.{gate}.b"), cfg.xw_dim));
            }
        }

        if cfg.char_mode != CharMode::None {
            specs.push(ParamSpec::weight(
                "hidden.wc".to_string(),
                cfg.hidden_dim,
                cfg.xc_dim,
            ));
        }
        specs.push(ParamSpec::weight(
            "hidden.wp".to_string(),
            cfg.hidden_dim,
            cfg.xp_dim,
        ));
        if cfg.word_mode != WordMode::None {
            specs.push(ParamSpec::weight(
                "hidden.ww".to_string(),
                cfg.hidden_dim,
                cfg.xw_total(),
            ));
        }
        specs.push(ParamSpec::bias("hidden.b".to_string(), cfg.hidden_dim));

        specs.push(ParamSpec::weight("out.w".to_string(), 2, cfg.hidden_dim));
        specs.push(ParamSpec::bias("out.b".to_string(), 2));
    }

    for head in heads {
        if head.labels.len() < 2 {
            return Err(Error::invalid_argument(format!(
                "head `{}` needs at least two labels",
                head.task
            )));
        }
        specs.push(ParamSpec::weight(
            format!("head.{}.w", head.task),
            head.labels.len(),
            cfg.xc_dim,
        ));
        specs.push(ParamSpec::bias(format!("head.{}.b", head.task), head.labels.len()));
    }

    Ok(specs)
}

fn build_params(
    cfg: &ModelConfig,
    role: ModelRole,
    chars: &Vocab,
    bigrams: &Vocab,
    words: &Vocab,
    heads: &[SoftmaxHead],
    rng: &mut impl Rng,
) -> Result<ParamSet> {
    let mut ps = ParamSet::new();
    for spec in param_specs(cfg, role, chars.len(), bigrams.len(), words.len(), heads)? {
        if spec.zeros {
            ps.add_zeros(spec.name, &spec.shape, spec.tunable)?;
        } else {
            ps.add_uniform(
                spec.name,
                &spec.shape,
                spec.fan_in,
                spec.fan_out,
                spec.tunable,
                rng,
            )?;
        }
    }
    Ok(ps)
}

fn lookup_required(ps: &ParamSet, name: &str) -> Result<ParamId> {
    ps.lookup(name)
        .ok_or_else(|| Error::invalid_argument(format!("model is missing parameter `{name}`")))
}

fn lstm_handles(ps: &ParamSet, prefix: &str) -> Result<LstmHandles> {
    Ok(LstmHandles {
        f_w: lookup_required(ps, &format!("{prefix}.f.w"))?,
        f_b: lookup_required(ps, &format!("{prefix}.f.b"))?,
        o_w: lookup_required(ps, &format!("{prefix}.o.w"))?,
        o_b: lookup_required(ps, &format!("{prefix}.o.b"))?,
        c_w: lookup_required(ps, &format!("{prefix}.c.w"))?,
        c_b: lookup_required(ps, &format!("{prefix}.c.b"))?,
    })
}

/// Resolves parameter ids against the set implied by configuration and
/// role, rejecting missing or surplus parameters.
pub fn wire(
    params: &ParamSet,
    cfg: &ModelConfig,
    role: ModelRole,
    heads: &[SoftmaxHead],
) -> Result<Handles> {
    let seg = is_segmentor(role);
    let mut h = Handles::default();
    let mut expected = 0usize;

    if seg || cfg.use_char_emb {
        h.emb_char = Some(lookup_required(params, "emb.char")?);
        expected += 1;
    }
    if cfg.use_bichar_emb {
        h.emb_bichar = Some(lookup_required(params, "emb.bichar")?);
        expected += 1;
    }
    if seg && cfg.word_mode != WordMode::None {
        h.emb_word = Some(lookup_required(params, "emb.word")?);
        expected += 1;
    }
    if seg {
        h.emb_len = Some(lookup_required(params, "emb.len")?);
        expected += 1;
    }
    if cfg.has_window_net() {
        for layer in 0..cfg.mlp_layers {
            h.win.push((
                lookup_required(params, &format!("win.{layer}.w"))?,
                lookup_required(params, &format!("win.{layer}.b"))?,
            ));
            expected += 2;
        }
    }
    if seg && cfg.has_char_lstm() {
        h.char_fwd = Some(lstm_handles(params, "char_lstm.fwd")?);
        h.char_bwd = Some(lstm_handles(params, "char_lstm.bwd")?);
        expected += 12;
    }
    if seg {
        h.xp = Some((
            lookup_required(params, "xp.w")?,
            lookup_required(params, "xp.b")?,
        ));
        expected += 2;
        if cfg.word_window_k().is_some() {
            h.word_win = Some((
                lookup_required(params, "word_win.w")?,
                lookup_required(params, "word_win.b")?,
            ));
            expected += 2;
        }
        if cfg.has_word_lstm() {
            h.word_lstm = Some(lstm_handles(params, "word_lstm")?);
            expected += 6;
        }
        if cfg.char_mode != CharMode::None {
            h.hid_wc = Some(lookup_required(params, "hidden.wc")?);
            expected += 1;
        }
        h.hid_wp = Some(lookup_required(params, "hidden.wp")?);
        expected += 1;
        if cfg.word_mode != WordMode::None {
            h.hid_ww = Some(lookup_required(params, "hidden.ww")?);
            expected += 1;
        }
        h.hid_b = Some(lookup_required(params, "hidden.b")?);
        expected += 1;
        h.out = Some((
            lookup_required(params, "out.w")?,
            lookup_required(params, "out.b")?,
        ));
        expected += 2;
    }
    for head in heads {
        h.heads.push((
            lookup_required(params, &format!("head.{}.w", head.task))?,
            lookup_required(params, &format!("head.{}.b", head.task))?,
        ));
        expected += 2;
    }

    if params.len() != expected {
        return Err(Error::invalid_argument(format!(
            "parameter set has {} tensors but the configuration implies {expected}",
            params.len()
        )));
    }
    Ok(h)
}
