use serde::{Deserialize, Serialize};

pub const DEFAULT_EMBED_DIM: usize = 256;
const GRAM: usize = 3;

/// Fixed-dimension text embedding. Unit length unless built from empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub components: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.components.iter().zip(&other.components).map(|(a, b)| a * b).sum()
    }

    /// Cosine similarity; zero when either side is the zero vector.
    pub fn cosine(&self, other: &Self) -> f64 {
        cosine(&self.components, &other.components)
    }
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The character trigrams of lowercased `text`. Text shorter than a trigram
/// contributes itself as a single gram.
pub fn char_ngrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    match chars.len() {
        0 => Vec::new(),
        n if n < GRAM => vec![chars.iter().collect()],
        _ => chars.windows(GRAM).map(|w| w.iter().collect()).collect(),
    }
}

fn joined(description: &str, feedback_summary: &str) -> String {
    if feedback_summary.is_empty() {
        description.to_string()
    } else {
        format!("{description}\n{feedback_summary}")
    }
}

/// Signed feature hashing of character trigrams into `dim` buckets, then
/// L2-normalized.
pub fn embed_with_dim(description: &str, feedback_summary: &str, dim: usize) -> EmbeddingVector {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut components = vec![0.0; dim];
    for gram in char_ngrams(&joined(description, feedback_summary)) {
        let h = fnv1a(gram.as_bytes());
        let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
        components[((h >> 1) % dim as u64) as usize] += sign;
    }
    let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for c in &mut components {
            *c /= norm;
        }
    }
    EmbeddingVector { components }
}

pub fn embed(description: &str, feedback_summary: &str) -> EmbeddingVector {
    embed_with_dim(description, feedback_summary, DEFAULT_EMBED_DIM)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn deterministic_and_unit() {
        let a = embed("sum of list", "pass 3/3");
        assert_eq!(a, embed("sum of list", "pass 3/3"));
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert_eq!(a.dim(), DEFAULT_EMBED_DIM);
        assert_eq!(embed("", "").norm(), 0.0);
        assert!((embed("ab", "").norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ngrams() {
        assert_eq!(char_ngrams("AbcD"), vec!["abc", "bcd"]);
        assert_eq!(char_ngrams("hi"), vec!["hi"]);
        assert!(char_ngrams("").is_empty());
    }

    #[test]
    fn overlap_orders_similarity() {
        let grams = |s: &str| char_ngrams(s).into_iter().collect::<BTreeSet<_>>();
        let shared = |a: &str, b: &str| grams(a).intersection(&grams(b)).count();
        assert!(shared("sum of list", "sum a list") > shared("sum of list", "matrix inverse"));

        let q = embed("sum of list", "");
        assert!(q.cosine(&embed("sum a list", "")) > q.cosine(&embed("matrix inverse", "")));
    }
}
