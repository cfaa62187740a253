//! Semantic document chunking.
//!
//! Documents are split into sentences, overlapping three-sentence windows
//! are embedded, and adjacent-window cosine similarities are thresholded
//! at their nearest-rank 20th percentile (computed per document): every
//! index whose similarity falls at or below the threshold becomes a chunk
//! boundary. Ties at the threshold split, since the rule is `<=`.

use thiserror::Error;

use crate::corpus::{extract_metadata, Chunk, ChunkId, CorpusError, MetadataExtractor};
use crate::encoder::{cosine, EmbeddingVector, Encoder};
use crate::graph::percentile_threshold;

/// Percentile of the similarity series used as the boundary threshold.
pub const BOUNDARY_PERCENTILE: f64 = 20.0;

#[derive(Debug, Error)]
pub enum ChunkerError {
    #[error("empty similarity series")]
    EmptySeries,
    #[error("empty document text")]
    EmptyText,
    #[error("encoder failure: {0}")]
    Encoder(#[from] crate::encoder::EncodeError),
    #[error("vector error: {0}")]
    Vector(#[from] crate::encoder::VectorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// The per-document similarity series: sentences, window embeddings,
/// adjacent-window cosines, and their boundary threshold.
#[derive(Debug)]
pub struct WindowSimilaritySeries {
    pub sentences: Vec<String>,
    pub window_embeddings: Vec<EmbeddingVector>,
    pub sims: Vec<f64>,
    pub theta: f64,
}

impl WindowSimilaritySeries {
    /// Build the full series for a document. Single-sentence documents
    /// have an empty similarity series and no threshold to compute.
    pub fn build(text: &str, encoder: &dyn Encoder) -> Result<Self, ChunkerError> {
        if text.trim().is_empty() {
            return Err(ChunkerError::EmptyText);
        }
        let sentences = sentence_split(text);
        let window_embeddings = window_embed(&sentences, encoder)?;
        let mut sims = Vec::new();
        for pair in window_embeddings.windows(2) {
            sims.push(cosine(&pair[0], &pair[1])?);
        }
        let theta = if sims.is_empty() {
            f64::NAN
        } else {
            percentile_threshold(&sims, BOUNDARY_PERCENTILE).expect("non-empty sims")
        };
        Ok(Self { sentences, window_embeddings, sims, theta })
    }
}

/// Deterministic sentence splitter: a sentence ends at `.`, `!`, or `?`
/// followed by whitespace and an uppercase letter, unless the preceding
/// word is a known abbreviation. Unpunctuated text is one sentence.
pub fn sentence_split(text: &str) -> Vec<String> {
    const ABBREVIATIONS: &[&str] = &[
        "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "vs", "etc", "fig", "inc", "ltd",
        "co", "dept", "approx", "est", "al", "eg", "ie",
    ];

    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '!' || c == '?' {
            // Preceding word, letters only, for the abbreviation check.
            let mut w = i;
            while w > start && chars[w - 1].is_alphabetic() {
                w -= 1;
            }
            let prev_word: String = chars[w..i].iter().collect::<String>().to_lowercase();
            let is_abbrev = c == '.' && ABBREVIATIONS.contains(&prev_word.as_str());

            // Look ahead: whitespace then an uppercase letter.
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            let splits = j > i + 1 && j < chars.len() && chars[j].is_uppercase() && !is_abbrev;
            if splits {
                let sentence: String = chars[start..=i].iter().collect();
                let trimmed = sentence.trim();
                if !trimmed.is_empty() {
                    sentences.push(trimmed.to_string());
                }
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let tail: String = chars[start..].iter().collect();
    let trimmed = tail.trim();
    if !trimmed.is_empty() {
        sentences.push(trimmed.to_string());
    }
    if sentences.is_empty() {
        sentences.push(text.trim().to_string());
    }
    sentences
}

/// One embedding per sentence index over the window
/// [s(i-1), s(i), s(i+1)], truncated at the document boundaries.
pub fn window_embed(
    sentences: &[String],
    encoder: &dyn Encoder,
) -> Result<Vec<EmbeddingVector>, ChunkerError> {
    let mut out = Vec::with_capacity(sentences.len());
    for i in 0..sentences.len() {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(sentences.len() - 1);
        let window = sentences[lo..=hi].join(" ");
        out.push(encoder.encode(&window)?);
    }
    Ok(out)
}

/// All indices i with sims[i] <= theta, theta being the nearest-rank
/// 20th percentile of the series. Always non-empty for a non-empty
/// series since theta itself is an element.
pub fn boundary_indices(sims: &[f64]) -> Result<Vec<usize>, ChunkerError> {
    if sims.is_empty() {
        return Err(ChunkerError::EmptySeries);
    }
    let theta = percentile_threshold(sims, BOUNDARY_PERCENTILE).expect("non-empty sims");
    Ok(sims
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= theta)
        .map(|(i, _)| i)
        .collect())
}

/// Split a document's text into chunk texts at the boundary indices.
/// A boundary at index i ends the current chunk after sentence i.
pub fn chunk_text(text: &str, encoder: &dyn Encoder) -> Result<Vec<String>, ChunkerError> {
    let series = WindowSimilaritySeries::build(text, encoder)?;
    if series.sentences.len() < 2 {
        return Ok(vec![series.sentences.join(" ")]);
    }
    let boundaries = boundary_indices(&series.sims)?;
    let mut chunks = Vec::new();
    let mut start = 0;
    for b in &boundaries {
        chunks.push(series.sentences[start..=*b].join(" "));
        start = b + 1;
    }
    if start < series.sentences.len() {
        chunks.push(series.sentences[start..].join(" "));
    }
    Ok(chunks)
}

/// Re-chunk a document into stored chunks, running the metadata
/// extractor on each piece. Chunk ids are `<source id>::c<n>`.
pub fn chunk_document(
    source_id: &str,
    text: &str,
    encoder: &dyn Encoder,
    extractor: &dyn MetadataExtractor,
) -> Result<Vec<Chunk>, ChunkerError> {
    let pieces = chunk_text(text, encoder)?;
    let mut chunks = Vec::with_capacity(pieces.len());
    for (n, piece) in pieces.into_iter().enumerate() {
        let metadata = extract_metadata(&piece, crate::corpus::Modality::Document, extractor)?;
        chunks.push(Chunk {
            id: ChunkId::new(format!("{source_id}::c{n}")),
            modality: crate::corpus::Modality::Document,
            text: piece,
            source_id: source_id.to_string(),
            metadata,
        });
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::StubExtractor;
    use crate::encoder::{EncodeError, HashedBagEncoder};
    use std::collections::HashMap;

    /// Test-only encoder mapping exact window texts to fixed vectors.
    struct ScriptedEncoder {
        vectors: HashMap<String, Vec<f32>>,
        dimension: usize,
    }

    impl Encoder for ScriptedEncoder {
        fn dimension(&self) -> usize {
            self.dimension
        }
        fn encode(&self, text: &str) -> Result<EmbeddingVector, EncodeError> {
            self.vectors
                .get(text)
                .map(|v| EmbeddingVector::new(v.clone()))
                .ok_or_else(|| EncodeError::Failure(format!("unscripted text: {text:?}")))
        }
    }

    #[test]
    fn splits_single_letter_sentences() {
        assert_eq!(sentence_split("A. B. C."), vec!["A.", "B.", "C."]);
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(sentence_split("Dr. Smith arrived. He left.").len(), 2);
    }

    #[test]
    fn unpunctuated_text_is_one_sentence() {
        assert_eq!(sentence_split("no punctuation"), vec!["no punctuation"]);
    }

    #[test]
    fn concat_preserved_modulo_whitespace() {
        let text = "First one. Second one! Third? Done.";
        let joined = sentence_split(text).join(" ");
        let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
        assert_eq!(norm(&joined), norm(text));
    }

    #[test]
    fn window_boundaries_truncate() {
        let enc = HashedBagEncoder::new(32, 1);
        let one = vec!["only sentence".to_string()];
        assert_eq!(window_embed(&one, &enc).unwrap().len(), 1);

        let five: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let vecs = window_embed(&five, &enc).unwrap();
        assert_eq!(vecs.len(), 5);
        // window 0 covers [s0, s1] only
        assert_eq!(vecs[0], enc.encode("s0 s1").unwrap());
        // middle windows cover three sentences
        assert_eq!(vecs[2], enc.encode("s1 s2 s3").unwrap());
        assert_eq!(vecs[4], enc.encode("s3 s4").unwrap());
    }

    #[test]
    fn three_sentences_middle_window_covers_all() {
        let enc = HashedBagEncoder::new(32, 1);
        let three: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
        let vecs = window_embed(&three, &enc).unwrap();
        assert_eq!(vecs[1], enc.encode("s0 s1 s2").unwrap());
    }

    #[test]
    fn boundary_indices_nearest_rank() {
        assert_eq!(boundary_indices(&[0.9, 0.3, 0.8, 0.2, 0.85]).unwrap(), vec![3]);
    }

    #[test]
    fn single_sim_is_its_own_percentile() {
        assert_eq!(boundary_indices(&[0.5]).unwrap(), vec![0]);
    }

    #[test]
    fn all_ties_every_index_splits() {
        assert_eq!(boundary_indices(&[0.7; 4]).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn empty_series_errors() {
        assert!(matches!(boundary_indices(&[]), Err(ChunkerError::EmptySeries)));
    }

    #[test]
    fn single_sentence_is_one_chunk() {
        let enc = HashedBagEncoder::new(32, 1);
        let chunks = chunk_text("Just one sentence here", &enc).unwrap();
        assert_eq!(chunks, vec!["Just one sentence here"]);
    }

    #[test]
    fn engineered_dip_splits_in_two() {
        // Six sentences, windows scripted so the only similarity dip is
        // between windows 2 and 3.
        let sentences: Vec<String> = (0..6).map(|i| format!("S{i}en")).collect();
        let text = sentences.join(". ") + ".";
        let split = sentence_split(&text);
        assert_eq!(split.len(), 6);

        let a = vec![1.0f32, 0.0];
        let b = vec![0.0f32, 1.0];
        let mut vectors = HashMap::new();
        for i in 0..6usize {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(5);
            let window = split[lo..=hi].join(" ");
            vectors.insert(window, if i <= 2 { a.clone() } else { b.clone() });
        }
        let enc = ScriptedEncoder { vectors, dimension: 2 };
        let chunks = chunk_text(&text, &enc).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0], split[..3].join(" "));
        assert_eq!(chunks[1], split[3..].join(" "));
    }

    #[test]
    fn identical_windows_split_everywhere() {
        // All-ties: every index is a boundary, so every sentence is its
        // own chunk.
        let sentences: Vec<String> = (0..4).map(|i| format!("T{i}ok")).collect();
        let text = sentences.join(". ") + ".";
        let split = sentence_split(&text);
        let mut vectors = HashMap::new();
        for i in 0..split.len() {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(split.len() - 1);
            vectors.insert(split[lo..=hi].join(" "), vec![1.0f32, 0.0]);
        }
        let enc = ScriptedEncoder { vectors, dimension: 2 };
        let chunks = chunk_text(&text, &enc).unwrap();
        assert_eq!(chunks.len(), split.len());
    }

    #[test]
    fn coverage_and_determinism() {
        let enc = HashedBagEncoder::new(64, 9);
        let text = "Alpha runs fast. Beta sleeps deeply. Gamma code compiles. \
                    Delta rain falls. Epsilon wind blows. Zeta stars shine.";
        let first = chunk_text(text, &enc).unwrap();
        let second = chunk_text(text, &enc).unwrap();
        assert_eq!(first, second);
        let sentences = sentence_split(text);
        let rejoined: Vec<String> = first
            .iter()
            .flat_map(|c| sentence_split(c))
            .collect();
        assert_eq!(rejoined, sentences);
    }

    #[test]
    fn chunk_document_assigns_ids_and_metadata() {
        let enc = HashedBagEncoder::new(64, 9);
        let chunks = chunk_document(
            "doc7",
            "Paris is large. Rome is old. Berlin is cold.",
            &enc,
            &StubExtractor,
        )
        .unwrap();
        assert!(!chunks.is_empty());
        for (i, c) in chunks.iter().enumerate() {
            assert_eq!(c.id.as_str(), format!("doc7::c{i}"));
            assert_eq!(c.source_id, "doc7");
            c.validate().unwrap();
        }
    }
}
