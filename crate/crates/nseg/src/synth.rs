//! Synthetic corpora with controllable ambiguity, used by tests and demos.
//!
//! Three generators cover the main experimental axes: a disjoint-lexicon
//! language that any configuration can memorize, a garden-path language
//! whose correct segmentation is revealed one character too late for
//! greedy search, and a punctuated boundary language with silver,
//! heterogeneous and POS-tagged views for pretraining studies.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpusio::{PosSentence, SegmentedSentence};

/// The k-th CJK unified ideograph; distinct inputs give distinct chars.
fn ideograph(k: usize) -> char {
    char::from_u32(0x4E00 + k as u32).expect("ideograph index out of range")
}

/// A lexicon in which every character belongs to one position of one
/// word, so any word sequence is segmentable from characters alone.
pub fn disjoint_lexicon(seed: u64, n_words: usize, lens: RangeInclusive<usize>) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = 0usize;
    (0..n_words)
        .map(|_| {
            let len = rng.gen_range(lens.clone());
            (0..len)
                .map(|_| {
                    let c = ideograph(next);
                    next += 1;
                    c
                })
                .collect()
        })
        .collect()
}

/// Random word sequences over a lexicon, uniformly sampled.
pub fn word_soup(
    seed: u64,
    lexicon: &[String],
    n_sentences: usize,
    words: RangeInclusive<usize>,
) -> Vec<SegmentedSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sentences)
        .map(|_| {
            let n = rng.gen_range(words.clone());
            let ws: Vec<&String> = (0..n).map(|_| lexicon.choose(&mut rng).unwrap()).collect();
            SegmentedSentence::from_words(&ws).unwrap()
        })
        .collect()
}

/// One garden-path word family: a five-character surface string with two
/// overlapping tilings, plus a distinct signal word per tiling.
struct GardenFamily {
    span: [char; 5],
    signals: [char; 2],
}

impl GardenFamily {
    fn nth(k: usize) -> GardenFamily {
        let base = 0x200 + 7 * k;
        GardenFamily {
            span: [
                ideograph(base),
                ideograph(base + 1),
                ideograph(base + 2),
                ideograph(base + 3),
                ideograph(base + 4),
            ],
            signals: [ideograph(base + 5), ideograph(base + 6)],
        }
    }

    /// Words for one unit: the 2+3 or 3+2 tiling of the span, then the
    /// signal word that names the tiling.
    fn unit(&self, second: bool) -> Vec<String> {
        let cut = if second { 3 } else { 2 };
        vec![
            self.span[..cut].iter().collect(),
            self.span[cut..].iter().collect(),
            self.signals[second as usize].to_string(),
        ]
    }
}

/// Sentences made of garden-path units. Every unit consumes the same
/// five characters under both tilings; they differ at the third, where a
/// two-character lookahead sees no difference yet. The disambiguating
/// signal character only enters the window one decision later, so a
/// greedy decoder must gamble while a beam can keep both prefixes alive
/// until the signal arrives.
pub fn garden_path_corpus(
    seed: u64,
    n_sentences: usize,
    units: RangeInclusive<usize>,
) -> Vec<SegmentedSentence> {
    let families: Vec<GardenFamily> = (0..2).map(GardenFamily::nth).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sentences)
        .map(|_| {
            let n = rng.gen_range(units.clone());
            let mut words = Vec::new();
            for _ in 0..n {
                let fam = &families[rng.gen_range(0..families.len())];
                words.extend(fam.unit(rng.gen_bool(0.5)));
            }
            SegmentedSentence::from_words(&words).unwrap()
        })
        .collect()
}

/// A language whose word boundaries correlate with character classes:
/// words start with an initial stem, continue with medial stems and
/// optionally end with a final character, and a comma deterministically
/// follows every final-ended word. The same sentences can be rendered as
/// gold segmentations, punctuated raw text, noisy silver segmentations,
/// a heterogeneous re-segmentation and POS-tagged text.
pub struct BoundaryLanguage {
    lexicon: Vec<String>,
    finals: Vec<char>,
}

/// Comma inserted after final-ended words; sentence-final full stop.
pub const BOUNDARY_COMMA: char = '，';
pub const BOUNDARY_STOP: char = '。';

impl BoundaryLanguage {
    /// Builds the lexicon: `n_words` words of one initial stem, up to two
    /// medial stems, and a final character on roughly half of them.
    pub fn new(seed: u64, n_words: usize) -> BoundaryLanguage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let initials: Vec<char> = (0x400..0x418).map(ideograph).collect();
        let medials: Vec<char> = (0x420..0x438).map(ideograph).collect();
        let finals: Vec<char> = (0x440..0x448).map(ideograph).collect();
        let mut lexicon = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            let mut w = String::new();
            w.push(*initials.choose(&mut rng).unwrap());
            for _ in 0..rng.gen_range(0..=2usize) {
                w.push(*medials.choose(&mut rng).unwrap());
            }
            if rng.gen_bool(0.5) {
                w.push(*finals.choose(&mut rng).unwrap());
            }
            lexicon.push(w);
        }
        lexicon.sort();
        lexicon.dedup();
        BoundaryLanguage { lexicon, finals }
    }

    pub fn lexicon(&self) -> &[String] {
        &self.lexicon
    }

    /// Gold-standard sentences: word sequences over the lexicon, skewed
    /// so a small corpus misses part of the vocabulary.
    pub fn sentences(
        &self,
        seed: u64,
        n_sentences: usize,
        words: RangeInclusive<usize>,
    ) -> Vec<SegmentedSentence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_sentences)
            .map(|_| {
                let n = rng.gen_range(words.clone());
                let ws: Vec<&String> = (0..n)
                    .map(|_| {
                        // Quadratic skew toward the front of the lexicon.
                        let u: f64 = rng.gen();
                        &self.lexicon[((u * u) * self.lexicon.len() as f64) as usize]
                    })
                    .collect();
                SegmentedSentence::from_words(&ws).unwrap()
            })
            .collect()
    }

    fn ends_in_final(&self, word: &str) -> bool {
        word.chars().last().is_some_and(|c| self.finals.contains(&c))
    }

    /// Raw rendering with deterministic punctuation: a comma after every
    /// final-ended word (except sentence-finally) and a closing stop.
    pub fn punctuated(&self, gold: &[SegmentedSentence]) -> Vec<Vec<char>> {
        gold.iter()
            .map(|s| {
                let words = s.words();
                let mut chars = Vec::with_capacity(s.len() + words.len());
                for (i, w) in words.iter().enumerate() {
                    chars.extend(w.chars());
                    if i + 1 < words.len() && self.ends_in_final(w) {
                        chars.push(BOUNDARY_COMMA);
                    }
                }
                chars.push(BOUNDARY_STOP);
                chars
            })
            .collect()
    }

    /// Silver segmentations: each internal boundary decision flips with
    /// probability `flip`, as if produced by an imperfect segmentor.
    pub fn silver(
        &self,
        gold: &[SegmentedSentence],
        seed: u64,
        flip: f64,
    ) -> Vec<SegmentedSentence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gold.iter()
            .map(|s| {
                let set: std::collections::HashSet<usize> =
                    s.boundaries().iter().copied().collect();
                let mut boundaries = Vec::new();
                for pos in 1..s.len() {
                    let mut on = set.contains(&pos);
                    if rng.gen_bool(flip) {
                        on = !on;
                    }
                    if on {
                        boundaries.push(pos);
                    }
                }
                boundaries.push(s.len());
                SegmentedSentence::new(s.chars().to_vec(), boundaries).unwrap()
            })
            .collect()
    }

    /// Heterogeneous standard: identical text, but every three-character
    /// or longer word splits after its second character.
    pub fn heterogeneous(&self, gold: &[SegmentedSentence]) -> Vec<SegmentedSentence> {
        gold.iter()
            .map(|s| {
                let mut words = Vec::new();
                for w in s.words() {
                    let chars: Vec<char> = w.chars().collect();
                    if chars.len() >= 3 {
                        words.push(chars[..2].iter().collect::<String>());
                        words.push(chars[2..].iter().collect::<String>());
                    } else {
                        words.push(w);
                    }
                }
                SegmentedSentence::from_words(&words).unwrap()
            })
            .collect()
    }

    /// POS view: the tag names the word shape (length and whether the
    /// word ends in a final character), deterministically.
    pub fn pos_tagged(&self, gold: &[SegmentedSentence]) -> Vec<PosSentence> {
        gold.iter()
            .map(|s| {
                let tags = s
                    .words()
                    .iter()
                    .map(|w| {
                        let suffix = if self.ends_in_final(w) { "F" } else { "N" };
                        format!("{}{}", w.chars().count(), suffix)
                    })
                    .collect();
                PosSentence {
                    sentence: s.clone(),
                    tags,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_lexicon_shares_no_characters() {
        let lex = disjoint_lexicon(1, 30, 1..=3);
        let all: Vec<char> = lex.iter().flat_map(|w| w.chars()).collect();
        let unique: std::collections::HashSet<char> = all.iter().copied().collect();
        assert_eq!(all.len(), unique.len());
        assert_eq!(lex.len(), 30);
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let lex = disjoint_lexicon(5, 20, 1..=3);
        assert_eq!(word_soup(9, &lex, 12, 2..=6), word_soup(9, &lex, 12, 2..=6));
        assert_eq!(
            garden_path_corpus(9, 12, 2..=4),
            garden_path_corpus(9, 12, 2..=4)
        );
        let lang = BoundaryLanguage::new(3, 40);
        assert_eq!(lang.sentences(7, 10, 3..=8), lang.sentences(7, 10, 3..=8));
    }

    #[test]
    fn garden_path_tilings_share_their_surface() {
        let fam = GardenFamily::nth(0);
        let a: String = fam.unit(false)[..2].concat();
        let b: String = fam.unit(true)[..2].concat();
        assert_eq!(a, b, "both tilings must cover the same five characters");
        assert_ne!(fam.unit(false)[2], fam.unit(true)[2]);

        let corpus = garden_path_corpus(11, 200, 2..=4);
        let mut seen_first = false;
        let mut seen_second = false;
        for s in &corpus {
            for len in s.word_lens() {
                assert!((1..=3).contains(&len));
            }
            match s.word_lens()[0] {
                2 => seen_first = true,
                3 => seen_second = true,
                _ => {}
            }
        }
        assert!(seen_first && seen_second, "both tilings must occur");
    }

    #[test]
    fn punctuation_is_deterministic_and_final_linked() {
        let lang = BoundaryLanguage::new(3, 40);
        let gold = lang.sentences(7, 30, 3..=8);
        let raw = lang.punctuated(&gold);
        assert_eq!(raw, lang.punctuated(&gold));
        for (s, r) in gold.iter().zip(&raw) {
            assert_eq!(*r.last().unwrap(), BOUNDARY_STOP);
            let clean: Vec<char> = r
                .iter()
                .copied()
                .filter(|c| *c != BOUNDARY_COMMA && *c != BOUNDARY_STOP)
                .collect();
            assert_eq!(clean, s.chars(), "stripping marks recovers the text");
            for (i, c) in r.iter().enumerate() {
                if *c == BOUNDARY_COMMA {
                    assert!(lang.finals.contains(&r[i - 1]), "comma follows a final");
                }
            }
        }
    }

    #[test]
    fn silver_flips_and_heterogeneous_resegments() {
        let lang = BoundaryLanguage::new(3, 40);
        let gold = lang.sentences(7, 50, 3..=8);
        let silver = lang.silver(&gold, 1, 0.15);
        let mut differing = 0;
        for (g, s) in gold.iter().zip(&silver) {
            assert_eq!(g.chars(), s.chars());
            if g.boundaries() != s.boundaries() {
                differing += 1;
            }
        }
        assert!(differing > 10, "15% flips should disturb most sentences");
        assert_eq!(lang.silver(&gold, 1, 0.15), silver);

        let hetero = lang.heterogeneous(&gold);
        for (g, h) in gold.iter().zip(&hetero) {
            assert_eq!(g.chars(), h.chars());
            for len in h.word_lens() {
                assert!(len <= 2, "split standard caps words at two characters");
            }
        }
    }

    #[test]
    fn pos_tags_follow_word_shape() {
        let lang = BoundaryLanguage::new(3, 40);
        let gold = lang.sentences(7, 5, 3..=6);
        for p in lang.pos_tagged(&gold) {
            let words = p.sentence.words();
            assert_eq!(words.len(), p.tags.len());
            for (w, t) in words.iter().zip(&p.tags) {
                assert!(t.starts_with(&w.chars().count().to_string()));
                assert!(t.ends_with(if lang.ends_in_final(w) { "F" } else { "N" }));
            }
        }
    }
}
