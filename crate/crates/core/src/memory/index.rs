use super::embed::{cosine, EmbeddingVector};

/// Exact flat cosine-similarity index. Ids are insertion positions.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    dim: usize,
    data: Vec<f64>,
}

impl FlatIndex {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn add(&mut self, v: &EmbeddingVector) -> usize {
        assert_eq!(v.dim(), self.dim, "embedding dimension mismatch");
        self.data.extend_from_slice(&v.components);
        self.len() - 1
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % dim, 0);
        Self { dim, data }
    }

    /// The `min(k, len)` most similar ids, descending by cosine similarity,
    /// ties going to the lower id.
    pub fn query_topk(&self, q: &EmbeddingVector, k: usize) -> Vec<(usize, f64)> {
        assert_eq!(q.dim(), self.dim, "query dimension mismatch");
        let mut scored: Vec<(usize, f64)> =
            self.data.chunks_exact(self.dim).enumerate().map(|(id, v)| (id, cosine(&q.components, v))).collect();
        let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        let k = k.min(scored.len());
        if k == 0 {
            return Vec::new();
        }
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        scored
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::embed::embed_with_dim;

    #[test]
    fn self_match_first_and_truncation() {
        let mut idx = FlatIndex::new(16);
        let a = embed_with_dim("alpha", "", 16);
        let b = embed_with_dim("beta gamma", "", 16);
        idx.add(&a);
        idx.add(&b);
        let r = idx.query_topk(&b, 5);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].0, 1);
        assert!((r[0].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ties_prefer_lower_id() {
        let mut idx = FlatIndex::new(4);
        let v = EmbeddingVector { components: vec![1.0, 0.0, 0.0, 0.0] };
        for _ in 0..5 {
            idx.add(&v);
        }
        let ids: Vec<usize> = idx.query_topk(&v, 3).into_iter().map(|(i, _)| i).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }
}
