//! Embedding providers and sparse unit vectors.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::seed::fnv1a;

/// Sparse vector; `indices` strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        Embedding { indices, values }
    }

    pub fn to_dense(&self, dimension: usize) -> Vec<f64> {
        let mut d = vec![0.0; dimension];
        for (i, v) in self.indices.iter().zip(&self.values) {
            d[*i as usize] = *v;
        }
        d
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Text to unit vector of a fixed dimension.
pub trait EmbeddingProvider: Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding>;
}

pub const DEFAULT_DIMENSION: usize = 4096;

/// Character n-gram term frequencies hashed into a fixed number of buckets
/// with 64-bit FNV-1a, then L2-normalized.
#[derive(Clone, Debug)]
pub struct HashedNgramEmbedder {
    pub dimension: usize,
    pub min_n: usize,
    pub max_n: usize,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        HashedNgramEmbedder {
            dimension: DEFAULT_DIMENSION,
            min_n: 3,
            max_n: 5,
        }
    }
}

/// Lowercases, maps non-alphanumerics to spaces and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl EmbeddingProvider for HashedNgramEmbedder {
    fn name(&self) -> &str {
        "hashed-char-ngram"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let norm = normalize_text(text);
        if norm.is_empty() {
            return Err(Error::Embedding(format!("text {text:?} has no content to embed")));
        }
        let padded: Vec<char> = format!(" {norm} ").chars().collect();
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        let mut gram = String::new();
        for n in self.min_n..=self.max_n {
            for w in padded.windows(n) {
                gram.clear();
                gram.extend(w);
                let bucket = (fnv1a(gram.as_bytes()) % self.dimension as u64) as u32;
                *counts.entry(bucket).or_default() += 1.0;
            }
        }
        if counts.is_empty() {
            // shorter than the smallest n-gram: hash the padded text itself
            let whole: String = padded.iter().collect();
            counts.insert((fnv1a(whole.as_bytes()) % self.dimension as u64) as u32, 1.0);
        }
        let length = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        let (indices, values) = counts.into_iter().map(|(i, v)| (i, v / length)).unzip();
        Ok(Embedding { indices, values })
    }
}
