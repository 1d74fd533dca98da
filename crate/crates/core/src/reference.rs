//! Published corpus figures and a cross-check of computed statistics
//! against them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{BioTag, CorpusStats, SourceCorpus};

/// Published BIO tag counts for one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PublishedBio {
    pub source: SourceCorpus,
    pub o: u64,
    pub b_premise: u64,
    pub i_premise: u64,
    pub b_claim: u64,
    pub i_claim: u64,
}

impl PublishedBio {
    pub fn tag_count(&self, tag: BioTag) -> u64 {
        match tag {
            BioTag::BClaim => self.b_claim,
            BioTag::IClaim => self.i_claim,
            BioTag::BPremise => self.b_premise,
            BioTag::IPremise => self.i_premise,
            BioTag::O => self.o,
        }
    }
}

pub const PUBLISHED_BIO: [PublishedBio; 3] = [
    PublishedBio {
        source: SourceCorpus::USElecDeb60To16,
        o: 566_492,
        b_premise: 26_055,
        i_premise: 350_079,
        b_claim: 29_624,
        i_claim: 338_941,
    },
    PublishedBio {
        source: SourceCorpus::PersuasiveEssays,
        o: 35_946,
        b_premise: 2_257,
        i_premise: 29_828,
        b_claim: 3_832,
        i_claim: 59_652,
    },
    PublishedBio {
        source: SourceCorpus::WebDiscourse,
        o: 61_414,
        b_premise: 195,
        i_premise: 3_491,
        b_claim: 538,
        i_claim: 20_566,
    },
];

/// Published claim/premise counts. Rounded figures (e.g. "29k") are stored
/// with their rounding step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PublishedComponents {
    pub source: SourceCorpus,
    pub claims: u64,
    pub premises: u64,
    /// 1 for exact figures, 1000 for figures given in thousands.
    pub rounding: u64,
}

impl PublishedComponents {
    /// Thousands figures are accepted whether they were rounded or
    /// truncated (29,624 is listed as "29k").
    fn agrees(&self, published: u64, value: u64) -> bool {
        let step = self.rounding.max(1);
        value >= published.saturating_sub(step / 2) && value < published + step
    }
}

pub const PUBLISHED_COMPONENTS: [PublishedComponents; 3] = [
    PublishedComponents {
        source: SourceCorpus::USElecDeb60To16,
        claims: 29_000,
        premises: 26_000,
        rounding: 1000,
    },
    PublishedComponents {
        source: SourceCorpus::PersuasiveEssays,
        claims: 2_257,
        premises: 3_832,
        rounding: 1,
    },
    PublishedComponents {
        source: SourceCorpus::WebDiscourse,
        claims: 195,
        premises: 538,
        rounding: 1,
    },
];

pub fn published_bio(source: SourceCorpus) -> Option<&'static PublishedBio> {
    PUBLISHED_BIO.iter().find(|p| p.source == source)
}

pub fn published_components(source: SourceCorpus) -> Option<&'static PublishedComponents> {
    PUBLISHED_COMPONENTS.iter().find(|p| p.source == source)
}

/// An inconsistency between the two published tables for one corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PublishedInconsistency {
    pub source: SourceCorpus,
    pub message: String,
}

/// Compares the component table with the begin-tag counts of the BIO table.
/// Each component starts with exactly one `B-` tag, so claims should equal
/// B-Claim and premises B-Premise.
pub fn published_inconsistencies() -> Vec<PublishedInconsistency> {
    let mut out = Vec::new();
    for comp in &PUBLISHED_COMPONENTS {
        let Some(bio) = published_bio(comp.source) else { continue };
        let direct = comp.agrees(comp.claims, bio.b_claim) && comp.agrees(comp.premises, bio.b_premise);
        if direct {
            continue;
        }
        let swapped = comp.agrees(comp.claims, bio.b_premise) && comp.agrees(comp.premises, bio.b_claim);
        let message = if swapped {
            format!(
                "component table lists {} claims / {} premises, BIO table has B-Claim {} / B-Premise {}: the claim and premise columns appear swapped",
                comp.claims, comp.premises, bio.b_claim, bio.b_premise
            )
        } else {
            format!(
                "component table lists {} claims / {} premises, BIO table has B-Claim {} / B-Premise {}",
                comp.claims, comp.premises, bio.b_claim, bio.b_premise
            )
        };
        out.push(PublishedInconsistency {
            source: comp.source,
            message,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TagMismatch {
    pub tag: BioTag,
    pub published: u64,
    pub observed: u64,
}

/// Which published component reading the observed span counts support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ComponentReading {
    /// Claims and premises as listed in the component table.
    AsListed,
    /// Claims and premises swapped relative to the component table.
    Swapped,
    /// Neither reading fits.
    Neither,
    /// No published component counts for this corpus.
    Unpublished,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceCheck {
    pub source: SourceCorpus,
    pub observed: CorpusStats,
    pub published: Option<PublishedBio>,
    /// Empty when the published row is reproduced exactly.
    pub mismatches: Vec<TagMismatch>,
    pub component_reading: ComponentReading,
}

impl SourceCheck {
    pub fn reproduces_published(&self) -> bool {
        self.published.is_some() && self.mismatches.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub sources: Vec<SourceCheck>,
    /// Flagged findings about the published figures themselves; these are
    /// informational, not failures.
    pub flags: Vec<PublishedInconsistency>,
}

pub fn check_source(source: SourceCorpus, observed: &CorpusStats) -> SourceCheck {
    let published = published_bio(source).copied();
    let mismatches = published
        .map(|p| {
            BioTag::ALL
                .iter()
                .filter(|&&t| p.tag_count(t) != observed.tag_count(t))
                .map(|&t| TagMismatch {
                    tag: t,
                    published: p.tag_count(t),
                    observed: observed.tag_count(t),
                })
                .collect()
        })
        .unwrap_or_default();
    let component_reading = match published_components(source) {
        None => ComponentReading::Unpublished,
        Some(c) if c.agrees(c.claims, observed.claims) && c.agrees(c.premises, observed.premises) => ComponentReading::AsListed,
        Some(c) if c.agrees(c.claims, observed.premises) && c.agrees(c.premises, observed.claims) => ComponentReading::Swapped,
        Some(_) => ComponentReading::Neither,
    };
    SourceCheck {
        source,
        observed: *observed,
        published,
        mismatches,
        component_reading,
    }
}

pub fn cross_check(by_source: &BTreeMap<SourceCorpus, CorpusStats>) -> CrossCheck {
    CrossCheck {
        sources: by_source.iter().map(|(s, st)| check_source(*s, st)).collect(),
        flags: published_inconsistencies(),
    }
}

/// Plain-text rendering used by the `stats` command.
pub fn render_cross_check(check: &CrossCheck) -> String {
    let mut out = String::new();
    for s in &check.sources {
        match &s.published {
            None => {
                let _ = writeln!(out, "{}: no published figures", s.source);
            }
            Some(_) if s.mismatches.is_empty() => {
                let _ = writeln!(out, "{}: matches the published BIO counts exactly", s.source);
            }
            Some(_) => {
                let _ = writeln!(out, "{}: differs from the published BIO counts", s.source);
                for m in &s.mismatches {
                    let _ = writeln!(out, "  {}: published {}, observed {}", m.tag, m.published, m.observed);
                }
            }
        }
        let reading = match s.component_reading {
            ComponentReading::AsListed => Some("component counts agree with the claim/premise columns as listed"),
            ComponentReading::Swapped => Some("component counts agree with the claim/premise columns swapped"),
            ComponentReading::Neither => Some("component counts agree with neither reading of the claim/premise columns"),
            ComponentReading::Unpublished => None,
        };
        if let Some(r) = reading {
            let _ = writeln!(out, "  {r} (observed {} claims, {} premises)", s.observed.claims, s.observed.premises);
        }
    }
    for f in &check.flags {
        let _ = writeln!(out, "FLAG {}: {}", f.source, f.message);
    }
    out
}
