//! BM25 inverted index for sparse lexical matching.
//!
//! Okapi scoring with the non-negative IDF variant
//! `ln((N - df + 0.5)/(df + 0.5) + 1)`; negative scores would corrupt
//! the linear fusion downstream. Scores are additive over query tokens,
//! so a duplicated query token counts twice. Ranking ties break by
//! ascending chunk id.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ChunkId;
use crate::text::tokenize;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("unknown chunk {0}")]
    UnknownChunk(ChunkId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: DEFAULT_K1, b: DEFAULT_B }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedIndex {
    params: Bm25Params,
    /// Ascending id order; postings reference positions in this list, so
    /// posting lists are sorted by chunk id.
    doc_ids: Vec<ChunkId>,
    doc_len: Vec<u32>,
    avgdl: f64,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    #[serde(skip)]
    id_to_pos: HashMap<ChunkId, u32>,
}

impl InvertedIndex {
    pub fn build<'a, I>(docs: I, params: Bm25Params) -> Self
    where
        I: IntoIterator<Item = (&'a ChunkId, &'a str)>,
    {
        let mut pairs: Vec<(ChunkId, &str)> =
            docs.into_iter().map(|(id, text)| (id.clone(), text)).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));

        let mut index = InvertedIndex {
            params,
            doc_ids: Vec::with_capacity(pairs.len()),
            doc_len: Vec::with_capacity(pairs.len()),
            avgdl: 0.0,
            postings: BTreeMap::new(),
            id_to_pos: HashMap::new(),
        };
        for (pos, (id, text)) in pairs.into_iter().enumerate() {
            let tokens = tokenize(text);
            index.doc_len.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (term, count) in tf {
                index.postings.entry(term).or_default().push((pos as u32, count));
            }
            index.id_to_pos.insert(id.clone(), pos as u32);
            index.doc_ids.push(id);
        }
        index.avgdl = if index.doc_len.is_empty() {
            0.0
        } else {
            index.doc_len.iter().map(|l| *l as f64).sum::<f64>() / index.doc_len.len() as f64
        };
        index
    }

    /// Rebuild the transient id lookup after deserialization.
    pub fn rebuild_lookup(&mut self) {
        self.id_to_pos = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(pos, id)| (id.clone(), pos as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[ChunkId] {
        &self.doc_ids
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn contains(&self, id: &ChunkId) -> bool {
        self.id_to_pos.contains_key(id)
    }

    fn idf(&self, term: &str) -> f64 {
        let df = self.postings.get(term).map_or(0, |p| p.len()) as f64;
        let n = self.doc_ids.len() as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_score(&self, term: &str, pos: u32) -> f64 {
        let Some(list) = self.postings.get(term) else {
            return 0.0;
        };
        let Ok(slot) = list.binary_search_by_key(&pos, |(p, _)| *p) else {
            return 0.0;
        };
        let tf = list[slot].1 as f64;
        let dl = self.doc_len[pos as usize] as f64;
        let k1 = self.params.k1;
        let b = self.params.b;
        let norm = k1 * (1.0 - b + b * dl / self.avgdl);
        self.idf(term) * tf * (k1 + 1.0) / (tf + norm)
    }

    /// Okapi score of one chunk against the query tokens. Zero when no
    /// query term occurs in the chunk; additive over tokens.
    pub fn bm25_score(&self, query_tokens: &[String], id: &ChunkId) -> Result<f64, LexicalError> {
        let pos = *self
            .id_to_pos
            .get(id)
            .ok_or_else(|| LexicalError::UnknownChunk(id.clone()))?;
        Ok(query_tokens.iter().map(|t| self.term_score(t, pos)).sum())
    }

    /// Raw scores for every chunk containing at least one query term,
    /// keyed by position in `doc_ids`.
    pub fn raw_scores(&self, query_tokens: &[String]) -> HashMap<u32, f64> {
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in query_tokens {
            if let Some(list) = self.postings.get(term) {
                for (pos, _) in list {
                    let s = self.term_score(term, *pos);
                    *scores.entry(*pos).or_insert(0.0) += s;
                }
            }
        }
        scores
    }

    /// Top-k chunks by BM25, descending score, ties by ascending chunk
    /// id. May return fewer than k; chunks matching no query term are
    /// omitted.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<(ChunkId, f64)> {
        let tokens = tokenize(query);
        let mut scored: Vec<(u32, f64)> = self.raw_scores(&tokens).into_iter().collect();
        // Positions are assigned in ascending id order, so the position
        // tie-break is the id tie-break.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
            .into_iter()
            .take(k)
            .map(|(pos, s)| (self.doc_ids[pos as usize].clone(), s))
            .collect()
    }

    pub fn id_at(&self, pos: u32) -> &ChunkId {
        &self.doc_ids[pos as usize]
    }

    pub fn position_of(&self, id: &ChunkId) -> Option<u32> {
        self.id_to_pos.get(id).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(names: &[&str]) -> Vec<ChunkId> {
        names.iter().map(|n| ChunkId::new(*n)).collect()
    }

    fn build(docs: &[(&str, &str)]) -> InvertedIndex {
        let owned: Vec<(ChunkId, String)> = docs
            .iter()
            .map(|(id, text)| (ChunkId::new(*id), text.to_string()))
            .collect();
        InvertedIndex::build(
            owned.iter().map(|(id, text)| (id, text.as_str())),
            Bm25Params::default(),
        )
    }

    #[test]
    fn postings_and_lengths() {
        let index = build(&[("c", "a b a")]);
        assert_eq!(index.doc_len, vec![3]);
        assert_eq!(index.postings.get("a"), Some(&vec![(0, 2)]));
        assert_eq!(index.postings.get("b"), Some(&vec![(0, 1)]));
    }

    #[test]
    fn hand_okapi_two_docs() {
        let index = build(&[("d1", "cat"), ("d2", "dog")]);
        let score = index.bm25_score(&[String::from("cat")], &ChunkId::new("d1")).unwrap();
        // N=2, df=1: idf = ln((2-1+0.5)/1.5 + 1) = ln 2.
        // tf=1, dl=avgdl=1: tf*(k1+1)/(tf + k1*(1-b+b)) = 2.2/2.2 = 1.
        let expected = ((2.0f64 - 1.0 + 0.5) / 1.5 + 1.0).ln();
        assert!((score - expected).abs() < 1e-9, "{score} vs {expected}");
        assert_eq!(index.bm25_score(&[String::from("cat")], &ChunkId::new("d2")).unwrap(), 0.0);
    }

    #[test]
    fn absent_term_contributes_zero() {
        let index = build(&[("d1", "cat walks")]);
        let with = index
            .bm25_score(&[String::from("cat"), String::from("zebra")], &ChunkId::new("d1"))
            .unwrap();
        let without = index.bm25_score(&[String::from("cat")], &ChunkId::new("d1")).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn duplicate_query_token_counts_twice() {
        let index = build(&[("d1", "cat walks"), ("d2", "dog runs")]);
        let once = index.bm25_score(&[String::from("cat")], &ChunkId::new("d1")).unwrap();
        let twice = index
            .bm25_score(&[String::from("cat"), String::from("cat")], &ChunkId::new("d1"))
            .unwrap();
        assert!((twice - 2.0 * once).abs() < 1e-12);
    }

    #[test]
    fn unknown_chunk_errors() {
        let index = build(&[("d1", "cat")]);
        assert!(matches!(
            index.bm25_score(&[String::from("cat")], &ChunkId::new("nope")),
            Err(LexicalError::UnknownChunk(_))
        ));
    }

    #[test]
    fn top_k_tie_break_by_id() {
        // c1 and c2 tie exactly; c3 scores lower (longer doc).
        let index = build(&[("c2", "cat"), ("c1", "cat"), ("c3", "cat and other words here")]);
        let top = index.top_k("cat", 2);
        let got: Vec<&str> = top.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(got, ["c1", "c2"]);
    }

    #[test]
    fn no_match_returns_empty() {
        let index = build(&[("d1", "cat")]);
        assert!(index.top_k("zebra", 5).is_empty());
    }

    #[test]
    fn identical_docs_identical_postings() {
        let index = build(&[("a", "same words"), ("b", "same words")]);
        let sa = index.bm25_score(&[String::from("same")], &ChunkId::new("a")).unwrap();
        let sb = index.bm25_score(&[String::from("same")], &ChunkId::new("b")).unwrap();
        assert_eq!(sa, sb);
    }

    /// Independent scorer: recompute document frequencies and the Okapi
    /// formula from the raw texts, then sort.
    fn brute_force_rank(
        docs: &[(&str, &str)],
        query: &str,
        k: usize,
        params: Bm25Params,
    ) -> Vec<(String, f64)> {
        let tokenized: Vec<(String, Vec<String>)> = docs
            .iter()
            .map(|(id, text)| (id.to_string(), tokenize(text)))
            .collect();
        let n = tokenized.len() as f64;
        let avgdl = tokenized.iter().map(|(_, t)| t.len() as f64).sum::<f64>() / n;
        let query_tokens = tokenize(query);
        let mut scored: Vec<(String, f64)> = tokenized
            .iter()
            .map(|(id, tokens)| {
                let mut score = 0.0;
                for q in &query_tokens {
                    let tf = tokens.iter().filter(|t| *t == q).count() as f64;
                    if tf == 0.0 {
                        continue;
                    }
                    let df = tokenized
                        .iter()
                        .filter(|(_, ts)| ts.iter().any(|t| t == q))
                        .count() as f64;
                    let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                    let dl = tokens.len() as f64;
                    score += idf * tf * (params.k1 + 1.0)
                        / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
                }
                (id.clone(), score)
            })
            .filter(|(_, s)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    #[test]
    fn random_corpus_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vocab: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        for _ in 0..20 {
            let n_docs = rng.gen_range(1..=50);
            let docs_owned: Vec<(String, String)> = (0..n_docs)
                .map(|i| {
                    let len = rng.gen_range(1..=12);
                    let text: Vec<&str> = (0..len)
                        .map(|_| vocab[rng.gen_range(0..vocab.len())].as_str())
                        .collect();
                    (format!("doc{i:03}"), text.join(" "))
                })
                .collect();
            let docs: Vec<(&str, &str)> = docs_owned
                .iter()
                .map(|(id, text)| (id.as_str(), text.as_str()))
                .collect();
            let query: Vec<&str> = (0..rng.gen_range(1..=4))
                .map(|_| vocab[rng.gen_range(0..vocab.len())].as_str())
                .collect();
            let query = query.join(" ");

            let index = build(&docs);
            let got = index.top_k(&query, 10);
            let want = brute_force_rank(&docs, &query, 10, Bm25Params::default());
            assert_eq!(got.len(), want.len());
            for ((gid, gs), (wid, ws)) in got.iter().zip(&want) {
                assert_eq!(gid.as_str(), wid);
                assert!((gs - ws).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scores_are_non_negative() {
        let index = build(&[("a", "common common common"), ("b", "common"), ("c", "common rare")]);
        for id in ids(&["a", "b", "c"]) {
            let s = index.bm25_score(&[String::from("common")], &id).unwrap();
            assert!(s >= 0.0);
        }
    }
}
