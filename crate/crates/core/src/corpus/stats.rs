use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::{BioTag, ComponentType, LabeledDocument, SourceCorpus};

/// Token counts per BIO class and component counts per type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: u64,
    pub tokens: u64,
    pub o: u64,
    pub b_claim: u64,
    pub i_claim: u64,
    pub b_premise: u64,
    pub i_premise: u64,
    pub claims: u64,
    pub premises: u64,
}

impl CorpusStats {
    pub fn tag_count(&self, tag: BioTag) -> u64 {
        match tag {
            BioTag::BClaim => self.b_claim,
            BioTag::IClaim => self.i_claim,
            BioTag::BPremise => self.b_premise,
            BioTag::IPremise => self.i_premise,
            BioTag::O => self.o,
        }
    }

    pub fn span_count(&self, kind: ComponentType) -> u64 {
        match kind {
            ComponentType::Claim => self.claims,
            ComponentType::Premise => self.premises,
        }
    }

    fn add_document(&mut self, doc: &LabeledDocument) {
        self.documents += 1;
        self.tokens += doc.tokens.len() as u64;
        for tag in doc.bio_tags() {
            match tag {
                BioTag::BClaim => self.b_claim += 1,
                BioTag::IClaim => self.i_claim += 1,
                BioTag::BPremise => self.b_premise += 1,
                BioTag::IPremise => self.i_premise += 1,
                BioTag::O => self.o += 1,
            }
        }
        self.claims += doc.span_count(ComponentType::Claim) as u64;
        self.premises += doc.span_count(ComponentType::Premise) as u64;
    }
}

impl Add for CorpusStats {
    type Output = CorpusStats;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for CorpusStats {
    fn add_assign(&mut self, rhs: Self) {
        self.documents += rhs.documents;
        self.tokens += rhs.tokens;
        self.o += rhs.o;
        self.b_claim += rhs.b_claim;
        self.i_claim += rhs.i_claim;
        self.b_premise += rhs.b_premise;
        self.i_premise += rhs.i_premise;
        self.claims += rhs.claims;
        self.premises += rhs.premises;
    }
}

pub fn corpus_stats(corpus: &[LabeledDocument]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for doc in corpus {
        stats.add_document(doc);
    }
    stats
}

/// Stats per source corpus, in declaration order of [`SourceCorpus`].
pub fn stats_by_source(corpus: &[LabeledDocument]) -> BTreeMap<SourceCorpus, CorpusStats> {
    let mut out: BTreeMap<SourceCorpus, CorpusStats> = BTreeMap::new();
    for doc in corpus {
        out.entry(doc.source_corpus).or_default().add_document(doc);
    }
    out
}
