//! Seeded synthetic corpora for tests, benchmarks and smoke runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tokenize, ComponentSpan, ComponentType, LabeledDocument, SourceCorpus};

const WORDS: &[&str] = &[
    "we", "should", "raise", "taxes", "on", "people", "the", "reality", "is", "it", "not", "just", "wealthy", "strategy",
    "years", "because", "there", "a", "major", "problem", "clinics", "help", "them", "believe", "same", "thing", "schools",
    "students", "learn", "better", "when", "they", "work", "together", "government", "must", "invest", "more", "in",
    "energy", "this", "will", "create", "jobs", "and", "lower", "costs", "for", "families",
];

/// Tokens that exercise punctuation handling: clitics, abbreviations, stray
/// angle brackets, quotes, dashes and non-ASCII letters.
const ADVERSARIAL: &[&str] = &[
    "don't", "it's", "U.S.", "e.g.,", "(really)", "\"quoted\"", "'single'", "--", "...", "<", ">", "a<b", "x>y", "</",
    "<3", "&", "&amp;", "50%", "$3.5", "naïve", "café", "don\u{2019}t", "\u{201C}so\u{201D}", "\u{2014}", "30", "[sic]",
    "well-known", "e-mail", "#1", "@home", "1/2", ";", ":", ",",
];

#[derive(Debug, Clone, Copy)]
pub struct SynthOptions {
    pub max_sentences: usize,
    pub max_words: usize,
    pub max_spans: usize,
    /// Chance that a word is drawn from the punctuation-heavy list.
    pub adversarial_rate: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            max_sentences: 6,
            max_words: 14,
            max_spans: 10,
            adversarial_rate: 0.15,
        }
    }
}

fn sentence<R: Rng>(rng: &mut R, opts: &SynthOptions) -> String {
    let n = rng.gen_range(2..=opts.max_words.max(2));
    let mut words: Vec<String> = (0..n)
        .map(|_| {
            if rng.gen_bool(opts.adversarial_rate) {
                ADVERSARIAL.choose(rng).unwrap().to_string()
            } else {
                WORDS.choose(rng).unwrap().to_string()
            }
        })
        .collect();
    if let Some(first) = words.first_mut() {
        let mut c = first.chars();
        if let Some(h) = c.next() {
            *first = h.to_uppercase().chain(c).collect();
        }
    }
    let end = [".", ".", ".", "!", "?"].choose(rng).unwrap();
    format!("{}{end}", words.join(" "))
}

/// Non-overlapping spans over `n_tokens` tokens, at most `max_spans`.
pub fn random_spans<R: Rng>(rng: &mut R, n_tokens: usize, max_spans: usize) -> Vec<ComponentSpan> {
    if n_tokens == 0 {
        return Vec::new();
    }
    let k = rng.gen_range(0..=max_spans.min(n_tokens));
    let mut starts: Vec<usize> = rand::seq::index::sample(rng, n_tokens, k).into_vec();
    starts.sort_unstable();
    let mut spans = Vec::with_capacity(k);
    for (i, &s) in starts.iter().enumerate() {
        let limit = starts.get(i + 1).map_or(n_tokens, |&next| next) - 1;
        let end = (s + rng.gen_range(0..8)).min(limit);
        let kind = if rng.gen_bool(0.5) { ComponentType::Claim } else { ComponentType::Premise };
        spans.push(ComponentSpan::new(s, end, kind));
    }
    spans
}

pub fn synthetic_document<R: Rng>(rng: &mut R, id: impl Into<String>, opts: &SynthOptions) -> LabeledDocument {
    let n = rng.gen_range(1..=opts.max_sentences.max(1));
    let sep = [" ", " ", " ", "  ", "\n", " \t"];
    let mut text = String::new();
    for i in 0..n {
        if i > 0 {
            text.push_str(sep.choose(rng).unwrap());
        }
        text.push_str(&sentence(rng, opts));
    }
    let n_tokens = tokenize(&text).len();
    let spans = random_spans(rng, n_tokens, opts.max_spans);
    LabeledDocument::from_text(id, SourceCorpus::Synthetic, text, spans).expect("generated spans are valid")
}

/// `n` documents with ids `syn-0`, `syn-1`, ...
pub fn synthetic_corpus(n: usize, seed: u64, opts: &SynthOptions) -> Vec<LabeledDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| synthetic_document(&mut rng, format!("syn-{i}"), opts)).collect()
}
