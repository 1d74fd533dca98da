use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDocument;
use crate::error::{Error, Result};

/// Train/dev/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let ratios = Self { train, dev, test };
        ratios.validate()?;
        Ok(ratios)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.dev, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.as_array();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Split(format!("ratios must be non-negative, got {r:?}")));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("ratios must sum to 1, got {r:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<LabeledDocument>,
    pub dev: Vec<LabeledDocument>,
    pub test: Vec<LabeledDocument>,
}

/// Partition sizes for `n` documents.
///
/// Each part first gets `floor(n * ratio)`; the remaining documents go one
/// at a time to the parts with the largest fractional remainder (ties to the
/// earlier part). Finally every part with a positive ratio that ended up
/// empty takes one document from the largest part.
pub fn split_sizes(n: usize, ratios: &SplitRatios) -> Result<[usize; 3]> {
    ratios.validate()?;
    let r = ratios.as_array();
    let nonzero = r.iter().filter(|x| **x > 0.0).count();
    if n == 0 {
        return Ok([0; 3]);
    }
    if n < nonzero {
        return Err(Error::Split(format!(
            "{n} documents cannot fill {nonzero} non-empty parts"
        )));
    }
    let exact: Vec<f64> = r.iter().map(|x| n as f64 * x).collect();
    let mut sizes = [0usize; 3];
    for i in 0..3 {
        sizes[i] = (exact[i] + 1e-9).floor() as usize;
    }
    let mut remainder = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).filter(|&i| r[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - sizes[a] as f64;
        let fb = exact[b] - sizes[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remainder == 0 {
            break;
        }
        sizes[i] += 1;
        remainder -= 1;
    }
    for i in 0..3 {
        if r[i] > 0.0 && sizes[i] == 0 {
            let largest = (0..3).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap();
            sizes[largest] -= 1;
            sizes[i] += 1;
        }
    }
    Ok(sizes)
}

/// Seeded document-level split.
pub fn split(corpus: &[LabeledDocument], ratios: &SplitRatios, seed: u64) -> Result<Split> {
    let [n_train, n_dev, _] = split_sizes(corpus.len(), ratios)?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: pick(&order[..n_train]),
        dev: pick(&order[n_train..n_train + n_dev]),
        test: pick(&order[n_train + n_dev..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceCorpus;

    fn corpus(n: usize) -> Vec<LabeledDocument> {
        (0..n)
            .map(|i| LabeledDocument::from_text(format!("d{i}"), SourceCorpus::Synthetic, format!("doc {i}"), vec![]).unwrap())
            .collect()
    }

    fn ids(docs: &[LabeledDocument]) -> Vec<&str> {
        docs.iter().map(|d| d.id.as_str()).collect()
    }

    #[test]
    fn exact_division() {
        let s = split(&corpus(10), &SplitRatios::default(), 7).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn remainder_rule_for_seven() {
        // floors (5, 0, 0); fractional parts (0.6, 0.7, 0.7): dev then test
        assert_eq!(split_sizes(7, &SplitRatios::default()).unwrap(), [5, 1, 1]);
    }

    #[test]
    fn small_corpora() {
        assert_eq!(split_sizes(3, &SplitRatios::default()).unwrap(), [1, 1, 1]);
        assert!(split_sizes(2, &SplitRatios::default()).is_err());
        assert_eq!(split_sizes(2, &SplitRatios::new(0.5, 0.5, 0.0).unwrap()).unwrap(), [1, 1, 0]);
        assert_eq!(split_sizes(0, &SplitRatios::new(1.0, 0.0, 0.0).unwrap()).unwrap(), [0, 0, 0]);
        assert_eq!(split_sizes(0, &SplitRatios::default()).unwrap(), [0, 0, 0]);
    }

    #[test]
    fn bad_ratios() {
        assert!(SplitRatios::new(0.8, 0.1, 0.2).is_err());
        assert!(SplitRatios::new(1.1, -0.1, 0.0).is_err());
    }

    #[test]
    fn deterministic_partition() {
        let c = corpus(57);
        let a = split(&c, &SplitRatios::default(), 3).unwrap();
        let b = split(&c, &SplitRatios::default(), 3).unwrap();
        assert_eq!(ids(&a.train), ids(&b.train));
        assert_eq!(ids(&a.test), ids(&b.test));
        let mut all: Vec<&str> = ids(&a.train);
        all.extend(ids(&a.dev));
        all.extend(ids(&a.test));
        all.sort();
        let mut expected = ids(&c);
        expected.sort();
        assert_eq!(all, expected);
    }
}
