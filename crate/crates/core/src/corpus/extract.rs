//! Metadata extraction behind a client interface.
//!
//! Production extraction is an external model service; the graph builder
//! only depends on the output schema, so tests and the CLI default run a
//! deterministic rule-based stub: first line (or sentence) becomes the
//! title/topic, maximal capitalized token spans become named entities,
//! ISO dates become timeline entries.

use std::collections::BTreeMap;

use regex::Regex;
use serde_json::Value;
use thiserror::Error;

use super::{
    metadata_from_value, CorpusError, DocMetadata, EntityRecord, Metadata, Modality, SemiMetadata,
    TableMetadata,
};

#[derive(Debug, Error)]
pub enum ExtractorError {
    #[error("extractor unavailable: {0}")]
    Unavailable(String),
}

/// Client interface for metadata extraction. Returns a raw JSON payload
/// which is validated against the modality's schema before use.
pub trait MetadataExtractor: Send + Sync {
    fn extract(&self, chunk_text: &str, modality: Modality) -> Result<Value, ExtractorError>;
}

/// Validate an extractor payload into the metadata variant matching
/// `modality`. Malformed payloads surface as
/// [`CorpusError::InvalidExtractorOutput`].
pub fn validate_metadata_payload(
    payload: Value,
    modality: Modality,
) -> Result<Metadata, CorpusError> {
    metadata_from_value(payload, modality).map_err(|e| match e {
        CorpusError::SchemaMismatch { detail, .. } => CorpusError::InvalidExtractorOutput(detail),
        other => other,
    })
}

/// Run the extractor client and validate its output.
pub fn extract_metadata(
    chunk_text: &str,
    modality: Modality,
    extractor: &dyn MetadataExtractor,
) -> Result<Metadata, CorpusError> {
    let payload = extractor
        .extract(chunk_text, modality)
        .map_err(|e| CorpusError::ExtractorUnavailable(e.to_string()))?;
    validate_metadata_payload(payload, modality)
}

/// Deterministic rule-based extractor.
#[derive(Debug, Default, Clone)]
pub struct StubExtractor;

impl StubExtractor {
    fn doc_metadata(text: &str) -> DocMetadata {
        let first_line = text.lines().next().unwrap_or("").trim();
        let topic = first_sentence(first_line);
        let entities = capitalized_spans(text)
            .into_iter()
            .map(|name| EntityRecord {
                name,
                kind: String::new(),
                category: "named".into(),
                details: vec![],
            })
            .collect();
        let date_re = Regex::new(r"\b\d{4}-\d{2}-\d{2}\b").expect("static regex");
        let mut timeline: Vec<String> = date_re
            .find_iter(text)
            .map(|m| format!("{} - mentioned", m.as_str()))
            .collect();
        timeline.sort();
        timeline.dedup();
        DocMetadata {
            topic: topic.clone(),
            title: first_line.to_string(),
            entities,
            events: vec![],
            timeline,
        }
    }

    fn table_metadata(text: &str) -> TableMetadata {
        let mut lines = text.lines();
        let headers: Vec<String> = lines
            .next()
            .unwrap_or("")
            .split(" | ")
            .map(str::to_string)
            .filter(|h| !h.is_empty())
            .collect();
        let row_count = lines.count();
        let entities = capitalized_spans(text)
            .into_iter()
            .map(|name| EntityRecord {
                name,
                kind: String::new(),
                category: "named".into(),
                details: vec![],
            })
            .collect();
        let col_desc: BTreeMap<String, String> = headers
            .iter()
            .map(|h| (h.clone(), format!("values of {h}")))
            .collect();
        TableMetadata {
            title: headers.join(", "),
            description: format!("table with columns {}", headers.join(", ")),
            summary: format!("{row_count} rows"),
            col_desc,
            col_format: BTreeMap::new(),
            entities,
            headers: if headers.is_empty() { vec!["col".into()] } else { headers },
            row_range: [0, row_count.saturating_sub(1)],
        }
    }

    fn semi_metadata(text: &str) -> SemiMetadata {
        let first_line = text.lines().next().unwrap_or("").trim();
        SemiMetadata {
            name_or_title: first_sentence(first_line),
            description: text.to_string(),
            type_label: String::new(),
            attributes: BTreeMap::new(),
        }
    }
}

impl MetadataExtractor for StubExtractor {
    fn extract(&self, chunk_text: &str, modality: Modality) -> Result<Value, ExtractorError> {
        let metadata = match modality {
            Modality::Document => Metadata::Doc(Self::doc_metadata(chunk_text)),
            Modality::Table => Metadata::Table(Self::table_metadata(chunk_text)),
            Modality::Semi => Metadata::Semi(Self::semi_metadata(chunk_text)),
        };
        Ok(serde_json::to_value(metadata).expect("metadata serializes"))
    }
}

fn first_sentence(text: &str) -> String {
    match text.find(['.', '!', '?']) {
        Some(pos) => text[..=pos].to_string(),
        None => text.to_string(),
    }
}

/// Maximal runs of capitalized words, including sentence-initial ones.
fn capitalized_spans(text: &str) -> Vec<String> {
    let mut spans: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for raw in text.split_whitespace() {
        let word = raw.trim_matches(|c: char| !c.is_alphanumeric());
        let capitalized = word.chars().next().is_some_and(|c| c.is_uppercase());
        if capitalized {
            current.push(word);
        } else if !current.is_empty() {
            spans.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        spans.push(current.join(" "));
    }
    spans.sort();
    spans.dedup();
    spans
}
