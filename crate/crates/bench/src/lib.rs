//! Workloads shared by the benchmarks.

use acdgen_core::corpus::LabeledDocument;
use acdgen_core::inference::{PerturbBackend, ReplayBackend};
use acdgen_core::synth::{synthetic_corpus, SynthOptions};
use acdgen_core::tagcodec::encode_xml;

pub fn corpus(n: usize, seed: u64) -> Vec<LabeledDocument> {
    synthetic_corpus(n, seed, &SynthOptions::default())
}

/// Gold documents paired with a perturbed tagging of each, the shape of
/// what a model returns.
pub fn generations(n: usize, seed: u64) -> Vec<(LabeledDocument, String)> {
    let perturb = PerturbBackend::new(ReplayBackend::new("bench"), seed);
    corpus(n, seed)
        .into_iter()
        .map(|d| {
            let gold = encode_xml(&d).expect("synthetic documents encode").into_string();
            let generated = perturb.perturb(&d.id, &gold);
            (d, generated)
        })
        .collect()
}

/// `n` source token texts (drawn from a synthetic corpus) and a copy with
/// every seventh token dropped and every eleventh upper-cased.
pub fn token_pair(n: usize) -> (Vec<String>, Vec<String>) {
    let source: Vec<String> = corpus(n / 4 + 1, 1)
        .into_iter()
        .flat_map(|d| d.tokens.into_iter().map(|t| t.text))
        .cycle()
        .take(n)
        .collect();
    let generated = source
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 7 != 3)
        .map(|(i, t)| if i % 11 == 5 { t.to_uppercase() } else { t.clone() })
        .collect();
    (source, generated)
}
