//! Modality-specific similarity signals between chunk pairs.
//!
//! Text-field signals are cosine similarities of field embeddings mapped
//! into [0, 1] via max(0, cos); entity overlap is Jaccard over
//! case-folded entity name sets.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Chunk, Metadata, Modality};
use crate::encoder::{cosine, EmbeddingVector, Encoder};

use super::GraphError;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum PairKind {
    #[serde(rename = "doc-doc")]
    DocDoc,
    #[serde(rename = "table-table")]
    TableTable,
    #[serde(rename = "table-doc")]
    TableDoc,
    #[serde(rename = "semi-semi")]
    SemiSemi,
}

impl std::fmt::Display for PairKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairKind::DocDoc => f.write_str("doc-doc"),
            PairKind::TableTable => f.write_str("table-table"),
            PairKind::TableDoc => f.write_str("table-doc"),
            PairKind::SemiSemi => f.write_str("semi-semi"),
        }
    }
}

impl PairKind {
    /// The pair kind for two modalities, if any signals are defined for
    /// the combination. Pairs involving semi chunks and another modality
    /// have no similarity signals.
    pub fn of(a: Modality, b: Modality) -> Option<PairKind> {
        use Modality::*;
        match (a, b) {
            (Document, Document) => Some(PairKind::DocDoc),
            (Table, Table) => Some(PairKind::TableTable),
            (Table, Document) | (Document, Table) => Some(PairKind::TableDoc),
            (Semi, Semi) => Some(PairKind::SemiSemi),
            _ => None,
        }
    }

    pub fn signals(&self) -> &'static [SignalKind] {
        match self {
            PairKind::DocDoc => {
                &[SignalKind::TopicTopic, SignalKind::ContentContent, SignalKind::EntityOverlap]
            }
            PairKind::TableTable => {
                &[SignalKind::ColumnColumn, SignalKind::TitleTitle, SignalKind::EntityOverlap]
            }
            PairKind::TableDoc => {
                &[SignalKind::ContentColumn, SignalKind::TopicTitle, SignalKind::EntityOverlap]
            }
            PairKind::SemiSemi => {
                &[SignalKind::DescriptionDescription, SignalKind::EntityOverlap]
            }
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    TopicTopic,
    ContentContent,
    ColumnColumn,
    TitleTitle,
    ContentColumn,
    TopicTitle,
    DescriptionDescription,
    EntityOverlap,
}

/// The populated signals of one candidate pair; only signals defined for
/// the pair kind are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySignals {
    pair_kind: PairKind,
    values: BTreeMap<SignalKind, f64>,
}

impl SimilaritySignals {
    pub fn pair_kind(&self) -> PairKind {
        self.pair_kind
    }

    pub fn values(&self) -> impl Iterator<Item = (&SignalKind, &f64)> {
        self.values.iter()
    }

    pub fn get(&self, signal: SignalKind) -> Option<f64> {
        self.values.get(&signal).copied()
    }

    /// Largest populated signal value; the edge confidence.
    pub fn max_value(&self) -> f64 {
        self.values.values().copied().fold(0.0, f64::max)
    }
}

/// Per-chunk embedded metadata fields, computed once per chunk so pair
/// enumeration does no re-encoding.
#[derive(Debug, Clone)]
pub struct ChunkFeatures {
    pub modality: Modality,
    pub entities: HashSet<String>,
    pub topic: Option<EmbeddingVector>,
    pub content: EmbeddingVector,
    pub title: Option<EmbeddingVector>,
    pub columns: Option<EmbeddingVector>,
    pub descriptive: Option<EmbeddingVector>,
}

impl ChunkFeatures {
    pub fn compute(chunk: &Chunk, encoder: &dyn Encoder) -> Result<ChunkFeatures, GraphError> {
        let content = encoder.encode(&chunk.text)?;
        let entities = chunk.metadata.entity_names();
        let mut features = ChunkFeatures {
            modality: chunk.modality,
            entities,
            topic: None,
            content,
            title: None,
            columns: None,
            descriptive: None,
        };
        match &chunk.metadata {
            Metadata::Doc(m) => {
                if m.topic.trim().is_empty() {
                    return Err(GraphError::MissingMetadataField("topic".into()));
                }
                features.topic = Some(encoder.encode(&m.topic)?);
            }
            Metadata::Table(m) => {
                if m.title.trim().is_empty() {
                    return Err(GraphError::MissingMetadataField("title".into()));
                }
                features.title = Some(encoder.encode(&m.title)?);
                let column_text = m
                    .headers
                    .iter()
                    .map(|h| match m.col_desc.get(h) {
                        Some(desc) => format!("{h}: {desc}"),
                        None => h.clone(),
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                features.columns = Some(encoder.encode(&column_text)?);
            }
            Metadata::Semi(m) => {
                let descriptive = format!("{} {}", m.name_or_title, m.description);
                let descriptive = descriptive.trim();
                if descriptive.is_empty() {
                    return Err(GraphError::MissingMetadataField("description".into()));
                }
                features.descriptive = Some(encoder.encode(descriptive)?);
            }
        }
        Ok(features)
    }
}

fn text_signal(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, GraphError> {
    Ok(cosine(a, b)?.max(0.0))
}

pub fn entity_jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Combine precomputed features into the pair's signal set. Returns
/// `None` when the modality combination has no defined signals.
pub fn signals_from_features(
    a: &ChunkFeatures,
    b: &ChunkFeatures,
) -> Result<Option<SimilaritySignals>, GraphError> {
    let Some(kind) = PairKind::of(a.modality, b.modality) else {
        return Ok(None);
    };
    // For cross-modal pairs, resolve which side is the document.
    let (doc, table) = if a.modality == Modality::Document { (a, b) } else { (b, a) };
    let missing = |name: &str| GraphError::MissingMetadataField(name.to_string());

    let mut values = BTreeMap::new();
    for signal in kind.signals() {
        let value = match signal {
            SignalKind::TopicTopic => text_signal(
                a.topic.as_ref().ok_or_else(|| missing("topic"))?,
                b.topic.as_ref().ok_or_else(|| missing("topic"))?,
            )?,
            SignalKind::ContentContent => text_signal(&a.content, &b.content)?,
            SignalKind::ColumnColumn => text_signal(
                a.columns.as_ref().ok_or_else(|| missing("columns"))?,
                b.columns.as_ref().ok_or_else(|| missing("columns"))?,
            )?,
            SignalKind::TitleTitle => text_signal(
                a.title.as_ref().ok_or_else(|| missing("title"))?,
                b.title.as_ref().ok_or_else(|| missing("title"))?,
            )?,
            SignalKind::ContentColumn => text_signal(
                &doc.content,
                table.columns.as_ref().ok_or_else(|| missing("columns"))?,
            )?,
            SignalKind::TopicTitle => text_signal(
                doc.topic.as_ref().ok_or_else(|| missing("topic"))?,
                table.title.as_ref().ok_or_else(|| missing("title"))?,
            )?,
            SignalKind::DescriptionDescription => text_signal(
                a.descriptive.as_ref().ok_or_else(|| missing("description"))?,
                b.descriptive.as_ref().ok_or_else(|| missing("description"))?,
            )?,
            SignalKind::EntityOverlap => entity_jaccard(&a.entities, &b.entities),
        };
        values.insert(*signal, value);
    }
    Ok(Some(SimilaritySignals { pair_kind: kind, values }))
}

/// Signals for one chunk pair, embedding metadata fields on the fly.
/// Errors when the pair kind requires a field the chunk lacks; pairs
/// with no defined kind (semi vs doc/table) yield `None`.
pub fn pairwise_signals(
    a: &Chunk,
    b: &Chunk,
    encoder: &dyn Encoder,
) -> Result<Option<SimilaritySignals>, GraphError> {
    let fa = ChunkFeatures::compute(a, encoder)?;
    let fb = ChunkFeatures::compute(b, encoder)?;
    signals_from_features(&fa, &fb)
}
