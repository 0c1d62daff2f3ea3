//! TF-IDF cosine index over corpus patterns.
//!
//! Term frequency is the raw count inside a pattern; inverse document
//! frequency is `ln((1 + N) / (1 + df)) + 1` over the `N` indexed patterns.
//! Query terms unseen in the corpus get `df = 0` and still count toward the
//! query norm. All sums run in ascending term order so scores are
//! reproducible bit for bit.

use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Default)]
pub struct TfIdfIndex {
    vocab: HashMap<String, usize>,
    idf: Vec<f64>,
    /// Per document: (term id, weight) sorted by term id.
    docs: Vec<Vec<(usize, f64)>>,
    /// Per document: sum of squared weights.
    sq_norms: Vec<f64>,
}

pub fn smooth_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

fn counts<'a>(tokens: impl IntoIterator<Item = &'a String>) -> BTreeMap<&'a str, usize> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

impl TfIdfIndex {
    pub fn build(documents: &[Vec<String>]) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in documents {
            for term in counts(doc).keys() {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let n = documents.len();
        let vocab: HashMap<String, usize> = df.keys().enumerate().map(|(i, t)| (t.to_string(), i)).collect();
        let idf: Vec<f64> = df.values().map(|&d| smooth_idf(n, d)).collect();
        let docs: Vec<Vec<(usize, f64)>> = documents
            .iter()
            .map(|doc| {
                let mut v: Vec<(usize, f64)> = counts(doc)
                    .into_iter()
                    .map(|(t, c)| {
                        let id = vocab[t];
                        (id, c as f64 * idf[id])
                    })
                    .collect();
                v.sort_by_key(|(id, _)| *id);
                v
            })
            .collect();
        let sq_norms = docs.iter().map(|d| d.iter().map(|(_, w)| w * w).sum()).collect();
        Self {
            vocab,
            idf,
            docs,
            sq_norms,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn idf(&self, term: &str) -> f64 {
        self.vocab
            .get(term)
            .map(|&i| self.idf[i])
            .unwrap_or_else(|| smooth_idf(self.docs.len(), 0))
    }

    /// Cosine similarity of the query against every document, in index order.
    pub fn scores(&self, query: &[String]) -> Vec<f64> {
        let oov_idf = smooth_idf(self.docs.len(), 0);
        let mut known: Vec<(usize, f64)> = Vec::new();
        let mut q_sq = 0.0;
        for (term, c) in counts(query) {
            match self.vocab.get(term) {
                Some(&id) => known.push((id, c as f64 * self.idf[id])),
                None => {
                    let w = c as f64 * oov_idf;
                    q_sq += w * w;
                }
            }
        }
        known.sort_by_key(|(id, _)| *id);
        q_sq += known.iter().map(|(_, w)| w * w).sum::<f64>();
        self.docs
            .iter()
            .zip(&self.sq_norms)
            .map(|(doc, &d_sq)| {
                if q_sq == 0.0 || d_sq == 0.0 {
                    return 0.0;
                }
                let dot = sparse_dot(&known, doc);
                (dot / (q_sq * d_sq).sqrt()).clamp(0.0, 1.0)
            })
            .collect()
    }
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}
