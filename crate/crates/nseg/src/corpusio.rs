//! Corpus parsing, boundary-tag conversion, embedding files and the
//! word-level evaluator.
//!
//! Corpus conventions: UTF-8 text, one sentence per line. Segmented
//! corpora separate words with runs of spaces or tabs; POS corpora tag
//! each word as `word<delim>TAG`; raw corpora keep punctuation inline.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use crate::diffcore::Parameter;
use crate::error::{Error, Result};
use crate::transition::Span;
use crate::vocab::Vocab;

/// A segmented sentence: its characters and the exclusive end positions
/// of every word. The last boundary always equals the character count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedSentence {
    chars: Vec<char>,
    boundaries: Vec<usize>,
}

impl SegmentedSentence {
    /// Builds from characters and word-end positions, validating that
    /// boundaries are strictly increasing, non-zero and tile the sentence.
    pub fn new(chars: Vec<char>, boundaries: Vec<usize>) -> Result<Self> {
        if chars.is_empty() {
            return Err(Error::invalid_argument("empty sentence"));
        }
        let mut prev = 0;
        for &b in &boundaries {
            if b <= prev || b > chars.len() {
                return Err(Error::invalid_argument(format!(
                    "bad word boundary {b} (previous {prev}, length {})",
                    chars.len()
                )));
            }
            prev = b;
        }
        if prev != chars.len() {
            return Err(Error::invalid_argument(format!(
                "last boundary {prev} does not close the {}-character sentence",
                chars.len()
            )));
        }
        Ok(SegmentedSentence { chars, boundaries })
    }

    /// Builds from a word list.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let mut chars = Vec::new();
        let mut boundaries = Vec::with_capacity(words.len());
        for w in words {
            let w = w.as_ref();
            if w.is_empty() {
                return Err(Error::invalid_argument("empty word"));
            }
            chars.extend(w.chars());
            boundaries.push(chars.len());
        }
        SegmentedSentence::new(chars, boundaries)
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Word spans in sentence order.
    pub fn spans(&self) -> Vec<Span> {
        let mut out = Vec::with_capacity(self.boundaries.len());
        let mut start = 0;
        for &end in &self.boundaries {
            out.push((start, end));
            start = end;
        }
        out
    }

    /// Word lengths in sentence order.
    pub fn word_lens(&self) -> Vec<usize> {
        self.spans().iter().map(|(s, e)| e - s).collect()
    }

    pub fn words(&self) -> Vec<String> {
        self.spans()
            .iter()
            .map(|&(s, e)| self.chars[s..e].iter().collect())
            .collect()
    }

    /// Same characters, different segmentation.
    pub fn with_spans(&self, spans: &[Span]) -> Result<Self> {
        SegmentedSentence::new(self.chars.clone(), spans.iter().map(|&(_, e)| e).collect())
    }

    /// Space-separated word line, the inverse of [`parse_segmented_line`].
    pub fn to_line(&self) -> String {
        self.words().join(" ")
    }
}

/// A segmented sentence with one POS tag per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosSentence {
    pub sentence: SegmentedSentence,
    pub tags: Vec<String>,
}

/// Parses one whitespace-segmented line; `None` for blank lines.
pub fn parse_segmented_line(line: &str) -> Option<SegmentedSentence> {
    let words: Vec<&str> = line.split_whitespace().collect();
    if words.is_empty() {
        return None;
    }
    Some(SegmentedSentence::from_words(&words).expect("non-empty words from split_whitespace"))
}

/// Parses one POS-tagged line (`word<delim>TAG` tokens); `None` for blank
/// lines. The tag follows the last occurrence of the delimiter, so words
/// containing the delimiter survive.
pub fn parse_pos_line(line: &str, delim: &str) -> Result<Option<PosSentence>> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.is_empty() {
        return Ok(None);
    }
    let mut words = Vec::with_capacity(tokens.len());
    let mut tags = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        match tok.rsplit_once(delim) {
            Some((word, tag)) if !word.is_empty() && !tag.is_empty() => {
                words.push(word);
                tags.push(tag.to_string());
            }
            _ => {
                return Err(Error::invalid_argument(format!(
                    "token {} (`{tok}`) has no `{delim}` tag delimiter",
                    i + 1
                )));
            }
        }
    }
    Ok(Some(PosSentence {
        sentence: SegmentedSentence::from_words(&words)?,
        tags,
    }))
}

/// Splits raw bytes into lines, reporting UTF-8 failures with 1-based
/// line numbers.
fn utf8_lines(bytes: &[u8]) -> impl Iterator<Item = (usize, Result<&str>)> {
    bytes.split(|&b| b == b'\n').enumerate().map(|(i, raw)| {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let parsed = std::str::from_utf8(raw).map_err(|e| Error::Parse {
            line: i + 1,
            detail: format!("invalid UTF-8: {e}"),
        });
        (i + 1, parsed)
    })
}

/// Reads a whitespace-segmented corpus; blank lines are skipped.
pub fn read_segmented(path: impl AsRef<Path>) -> Result<Vec<SegmentedSentence>> {
    let bytes = std::fs::read(path)?;
    let mut out = Vec::new();
    for (_, line) in utf8_lines(&bytes) {
        if let Some(s) = parse_segmented_line(line?) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Reads a POS-tagged corpus; blank lines are skipped.
pub fn read_pos(path: impl AsRef<Path>, delim: &str) -> Result<Vec<PosSentence>> {
    let bytes = std::fs::read(path)?;
    let mut out = Vec::new();
    for (lineno, line) in utf8_lines(&bytes) {
        match parse_pos_line(line?, delim) {
            Ok(Some(s)) => out.push(s),
            Ok(None) => {}
            Err(e) => {
                return Err(Error::Parse {
                    line: lineno,
                    detail: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

/// Reads a raw corpus (punctuation retained) as character sequences;
/// blank lines are skipped.
pub fn read_raw(path: impl AsRef<Path>) -> Result<Vec<Vec<char>>> {
    let bytes = std::fs::read(path)?;
    let mut out = Vec::new();
    for (_, line) in utf8_lines(&bytes) {
        let chars: Vec<char> = line?.trim().chars().collect();
        if !chars.is_empty() {
            out.push(chars);
        }
    }
    Ok(out)
}

/// Writes sentences as space-separated word lines.
pub fn write_segmented(path: impl AsRef<Path>, sentences: &[SegmentedSentence]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in sentences {
        writeln!(f, "{}", s.to_line())?;
    }
    f.flush()?;
    Ok(())
}

/// Maps fullwidth ASCII forms and the ideographic space to their halfwidth
/// equivalents; other characters pass through. Off by default everywhere,
/// enabled by a flag at the tool level.
pub fn normalize_width_char(c: char) -> char {
    match c {
        '\u{3000}' => ' ',
        '\u{FF01}'..='\u{FF5E}' => {
            char::from_u32(c as u32 - 0xFF01 + 0x21).expect("in-range ASCII codepoint")
        }
        _ => c,
    }
}

/// Boundary tag of one character within its word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bmes {
    /// Begins a multi-character word.
    B,
    /// Middle of a multi-character word.
    M,
    /// Ends a multi-character word.
    E,
    /// A single-character word.
    S,
}

impl std::fmt::Display for Bmes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bmes::B => "B",
            Bmes::M => "M",
            Bmes::E => "E",
            Bmes::S => "S",
        })
    }
}

impl Bmes {
    pub fn from_char(c: char) -> Result<Bmes> {
        match c {
            'B' => Ok(Bmes::B),
            'M' => Ok(Bmes::M),
            'E' => Ok(Bmes::E),
            'S' => Ok(Bmes::S),
            other => Err(Error::invalid_argument(format!(
                "unknown boundary tag `{other}`"
            ))),
        }
    }

    /// All four tags in canonical order (label-set order for classifiers).
    pub const ALL: [Bmes; 4] = [Bmes::B, Bmes::M, Bmes::E, Bmes::S];
}

/// Per-character boundary tags of a segmentation.
pub fn to_bmes(s: &SegmentedSentence) -> Vec<Bmes> {
    let mut out = Vec::with_capacity(s.len());
    for (start, end) in s.spans() {
        if end - start == 1 {
            out.push(Bmes::S);
        } else {
            out.push(Bmes::B);
            for _ in start + 1..end - 1 {
                out.push(Bmes::M);
            }
            out.push(Bmes::E);
        }
    }
    out
}

/// Rebuilds a segmentation from boundary tags. Ill-formed sequences are
/// repaired (an M or E that opens a word acts as B; a B or S that
/// interrupts an open word closes it first; a trailing open word is
/// closed at the end) and the repair is flagged.
pub fn from_bmes(chars: Vec<char>, labels: &[Bmes]) -> Result<(SegmentedSentence, bool)> {
    if chars.len() != labels.len() {
        return Err(Error::invalid_argument(format!(
            "{} labels for {} characters",
            labels.len(),
            chars.len()
        )));
    }
    let mut boundaries = Vec::new();
    let mut open = false;
    let mut repaired = false;
    for (i, &lab) in labels.iter().enumerate() {
        match lab {
            Bmes::B => {
                if open {
                    boundaries.push(i);
                    repaired = true;
                }
                open = true;
            }
            Bmes::S => {
                if open {
                    boundaries.push(i);
                    repaired = true;
                    open = false;
                }
                boundaries.push(i + 1);
            }
            Bmes::M => {
                if !open {
                    repaired = true;
                    open = true;
                }
            }
            Bmes::E => {
                if open {
                    boundaries.push(i + 1);
                    open = false;
                } else {
                    repaired = true;
                    open = true;
                }
            }
        }
    }
    if open {
        boundaries.push(chars.len());
        repaired = true;
    }
    Ok((SegmentedSentence::new(chars, boundaries)?, repaired))
}

/// Micro-averaged word precision, recall and F1 over a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_count: usize,
    pub pred_count: usize,
    pub correct_count: usize,
}

impl EvalResult {
    fn from_counts(gold: usize, pred: usize, correct: usize) -> EvalResult {
        let p = if pred > 0 {
            correct as f64 / pred as f64
        } else {
            0.0
        };
        let r = if gold > 0 {
            correct as f64 / gold as f64
        } else {
            0.0
        };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        EvalResult {
            precision: p,
            recall: r,
            f1,
            gold_count: gold,
            pred_count: pred,
            correct_count: correct,
        }
    }
}

/// Evaluates predictions against gold: a predicted word counts iff its
/// span exactly matches a gold span; counts are pooled over the corpus.
pub fn evaluate(gold: &[SegmentedSentence], pred: &[SegmentedSentence]) -> Result<EvalResult> {
    if gold.len() != pred.len() {
        return Err(Error::invalid_argument(format!(
            "{} gold sentences vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut gold_count = 0;
    let mut pred_count = 0;
    let mut correct = 0;
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.chars() != p.chars() {
            return Err(Error::invalid_argument(format!(
                "sentence {i}: character sequences differ between gold and prediction"
            )));
        }
        let gset: HashSet<Span> = g.spans().into_iter().collect();
        gold_count += gset.len();
        let pspans = p.spans();
        pred_count += pspans.len();
        correct += pspans.iter().filter(|s| gset.contains(s)).count();
    }
    Ok(EvalResult::from_counts(gold_count, pred_count, correct))
}

/// Sentence-length buckets used in evaluation reports.
pub const LENGTH_BUCKETS: [(&str, usize, usize); 6] = [
    ("<=10", 0, 10),
    ("11-20", 11, 20),
    ("21-30", 21, 30),
    ("31-40", 31, 40),
    ("41-50", 41, 50),
    (">50", 51, usize::MAX),
];

/// Evaluation broken down by sentence length (character count). Buckets
/// with no sentences report zero counts.
pub fn evaluate_by_length(
    gold: &[SegmentedSentence],
    pred: &[SegmentedSentence],
) -> Result<Vec<(&'static str, EvalResult)>> {
    if gold.len() != pred.len() {
        return Err(Error::invalid_argument(format!(
            "{} gold sentences vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut out = Vec::with_capacity(LENGTH_BUCKETS.len());
    for (label, lo, hi) in LENGTH_BUCKETS {
        let mut g_bucket = Vec::new();
        let mut p_bucket = Vec::new();
        for (g, p) in gold.iter().zip(pred) {
            if g.len() >= lo && g.len() <= hi {
                g_bucket.push(g.clone());
                p_bucket.push(p.clone());
            }
        }
        out.push((label, evaluate(&g_bucket, &p_bucket)?));
    }
    Ok(out)
}

/// Outcome of loading an embedding file into a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coverage {
    /// Vocabulary rows overwritten by file vectors.
    pub covered: usize,
    /// Vocabulary size.
    pub total: usize,
    /// File tokens that appeared more than once (last occurrence wins).
    pub duplicate_tokens: usize,
}

/// Loads `token v1 ... vd` lines into the rows of `table` addressed by
/// `vocab`. Tokens outside the vocabulary are ignored; uncovered rows keep
/// their current values.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    table: &mut Parameter,
    vocab: &Vocab,
) -> Result<Coverage> {
    if table.shape.len() != 2 || table.rows() != vocab.len() {
        return Err(Error::invalid_argument(format!(
            "embedding table {} has {} rows for a {}-token vocabulary",
            table.name,
            table.rows(),
            vocab.len()
        )));
    }
    let dim = table.cols();
    let bytes = std::fs::read(path)?;
    let mut seen: HashSet<usize> = HashSet::new();
    let mut covered = 0;
    let mut duplicate_tokens = 0;
    for (lineno, line) in utf8_lines(&bytes) {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values: Vec<f64> = fields
            .map(|v| {
                v.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    detail: format!("bad embedding value `{v}`: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::invalid_argument(format!(
                "line {lineno}: vector for `{token}` has {} values, table wants {dim}",
                values.len()
            )));
        }
        let Some(id) = vocab.get(token) else {
            continue;
        };
        if !seen.insert(id) {
            duplicate_tokens += 1;
        } else {
            covered += 1;
        }
        table.values[id * dim..(id + 1) * dim].copy_from_slice(&values);
    }
    Ok(Coverage {
        covered,
        total: vocab.len(),
        duplicate_tokens,
    })
}

/// Writes a table as `token v1 ... vd` lines; the inverse of
/// [`load_embeddings`]. Values round-trip bit-exactly.
pub fn save_embeddings(
    path: impl AsRef<Path>,
    table: &Parameter,
    vocab: &Vocab,
) -> Result<()> {
    if table.shape.len() != 2 || table.rows() != vocab.len() {
        return Err(Error::invalid_argument(format!(
            "embedding table {} has {} rows for a {}-token vocabulary",
            table.name,
            table.rows(),
            vocab.len()
        )));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for id in 0..vocab.len() {
        write!(f, "{}", vocab.token(id))?;
        for v in table.row(id) {
            write!(f, " {v}")?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

/// Builds the character, bigram and word vocabularies for a training
/// corpus. Character and word vocabularies start with the special tokens;
/// the bigram vocabulary starts with `<unk>` alone (padding bigrams such
/// as `<s>x` enter through the corpus scan, which covers every pair the
/// five-character windows can request). Counts reflect corpus occurrences,
/// so singletons are identifiable later.
pub fn build_vocabs(sentences: &[SegmentedSentence]) -> (Vocab, Vocab, Vocab) {
    let mut chars = Vocab::with_specials();
    let mut bigrams = Vocab::new();
    bigrams.add(crate::vocab::UNK);
    let mut words = Vocab::with_specials();
    for s in sentences {
        for c in s.chars() {
            chars.add(&c.to_string());
        }
        for pair in padded_tokens(s).windows(2) {
            bigrams.add(&crate::vocab::bigram_key_str(&pair[0], &pair[1]));
        }
        for w in s.words() {
            words.add(&w);
        }
    }
    (chars, bigrams, words)
}

/// Padded token sequence for positions [-2, n+2], exactly as the window
/// encoder sees it.
fn padded_tokens(s: &SegmentedSentence) -> Vec<String> {
    let mut ext: Vec<String> = Vec::with_capacity(s.len() + 5);
    ext.push(crate::vocab::BOS.to_string());
    ext.push(crate::vocab::BOS.to_string());
    ext.extend(s.chars().iter().map(|c| c.to_string()));
    for _ in 0..3 {
        ext.push(crate::vocab::EOS.to_string());
    }
    ext
}

/// Restores occurrence counts on deserialized character and bigram
/// vocabularies by scanning a corpus with the same padded enumeration as
/// [`build_vocabs`]. Id assignments never change; tokens the corpus has
/// but the vocabulary lacks are ignored.
pub fn recount_vocabs(chars: &mut Vocab, bigrams: &mut Vocab, sentences: &[SegmentedSentence]) {
    for s in sentences {
        for c in s.chars() {
            chars.bump(&c.to_string());
        }
        for pair in padded_tokens(s).windows(2) {
            bigrams.bump(&crate::vocab::bigram_key_str(&pair[0], &pair[1]));
        }
    }
}
