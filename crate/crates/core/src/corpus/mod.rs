//! Uniform chunk store: documents, table segments, and semi-structured
//! objects ingested from JSONL with validated, modality-matched metadata.

mod extract;
mod segment;

pub use extract::{
    validate_metadata_payload, ExtractorError, MetadataExtractor, StubExtractor,
};
pub use segment::segment_table;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Opaque chunk identifier, unique within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(pub String);

impl ChunkId {
    pub fn new(id: impl Into<String>) -> Self {
        ChunkId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ChunkId {
    fn from(s: &str) -> Self {
        ChunkId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Document,
    Table,
    Semi,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Document => f.write_str("document"),
            Modality::Table => f.write_str("table"),
            Modality::Semi => f.write_str("semi"),
        }
    }
}

/// One extracted entity mention. Tables fill `details` with the single
/// description sentence the extractor produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub name: String,
    #[serde(rename = "type", default)]
    pub kind: String,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub name: String,
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub details: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocMetadata {
    pub topic: String,
    pub title: String,
    #[serde(default)]
    pub entities: Vec<EntityRecord>,
    #[serde(default)]
    pub events: Vec<EventRecord>,
    /// Ordered "<date> - <description>" strings.
    #[serde(default)]
    pub timeline: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub col_desc: BTreeMap<String, String>,
    #[serde(default)]
    pub col_format: BTreeMap<String, String>,
    #[serde(default)]
    pub entities: Vec<EntityRecord>,
    pub headers: Vec<String>,
    /// [first_row, last_row] of this segment within the source table,
    /// inclusive, 0-based.
    pub row_range: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiMetadata {
    #[serde(default)]
    pub name_or_title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub type_label: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metadata {
    Doc(DocMetadata),
    Table(TableMetadata),
    Semi(SemiMetadata),
}

impl Metadata {
    pub fn modality(&self) -> Modality {
        match self {
            Metadata::Doc(_) => Modality::Document,
            Metadata::Table(_) => Modality::Table,
            Metadata::Semi(_) => Modality::Semi,
        }
    }

    /// Case-folded entity name set used for overlap signals. Semi chunks
    /// contribute their name/title since their schema carries no entity
    /// list.
    pub fn entity_names(&self) -> HashSet<String> {
        match self {
            Metadata::Doc(m) => m.entities.iter().map(|e| e.name.to_lowercase()).collect(),
            Metadata::Table(m) => m.entities.iter().map(|e| e.name.to_lowercase()).collect(),
            Metadata::Semi(m) => {
                let mut set = HashSet::new();
                if !m.name_or_title.is_empty() {
                    set.insert(m.name_or_title.to_lowercase());
                }
                set
            }
        }
    }
}

/// A text/table/semi-structured unit with modality-specific metadata;
/// the graph node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: ChunkId,
    pub modality: Modality,
    pub text: String,
    pub source_id: String,
    pub metadata: Metadata,
}

impl Chunk {
    /// Checks the per-chunk invariants: non-empty text, metadata variant
    /// matching the modality, entity-name uniqueness, table column maps
    /// keyed by declared headers, timeline ordering.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.text.trim().is_empty() {
            return Err(CorpusError::SchemaMismatch {
                field: "text".into(),
                detail: format!("chunk {} has empty text", self.id),
            });
        }
        if self.metadata.modality() != self.modality {
            return Err(CorpusError::SchemaMismatch {
                field: "metadata".into(),
                detail: format!(
                    "chunk {} declares modality {} but metadata is {}",
                    self.id,
                    self.modality,
                    self.metadata.modality()
                ),
            });
        }
        match &self.metadata {
            Metadata::Doc(m) => {
                let mut seen = HashSet::new();
                for e in &m.entities {
                    if !seen.insert(e.name.as_str()) {
                        return Err(CorpusError::SchemaMismatch {
                            field: "entities".into(),
                            detail: format!("duplicate entity name {:?} in {}", e.name, self.id),
                        });
                    }
                }
                let dates: Vec<&str> = m
                    .timeline
                    .iter()
                    .filter_map(|line| line.split(" - ").next())
                    .filter(|d| parse_iso_date(d).is_some())
                    .collect();
                if dates.windows(2).any(|w| w[0] > w[1]) {
                    return Err(CorpusError::SchemaMismatch {
                        field: "timeline".into(),
                        detail: format!("timeline not sorted by date in {}", self.id),
                    });
                }
            }
            Metadata::Table(m) => {
                let headers: HashSet<&str> = m.headers.iter().map(|h| h.as_str()).collect();
                for key in m.col_desc.keys().chain(m.col_format.keys()) {
                    if !headers.contains(key.as_str()) {
                        return Err(CorpusError::SchemaMismatch {
                            field: "col_desc".into(),
                            detail: format!("column {key:?} not in headers of {}", self.id),
                        });
                    }
                }
                if m.row_range[1] < m.row_range[0] {
                    return Err(CorpusError::SchemaMismatch {
                        field: "row_range".into(),
                        detail: format!("inverted row_range in {}", self.id),
                    });
                }
                let mut seen = HashSet::new();
                for e in &m.entities {
                    if !seen.insert(e.name.as_str()) {
                        return Err(CorpusError::SchemaMismatch {
                            field: "entities".into(),
                            detail: format!("duplicate entity name {:?} in {}", e.name, self.id),
                        });
                    }
                }
            }
            Metadata::Semi(m) => {
                if m.name_or_title.is_empty() && m.description.is_empty() {
                    return Err(CorpusError::SchemaMismatch {
                        field: "name_or_title".into(),
                        detail: format!("semi chunk {} has neither name nor description", self.id),
                    });
                }
            }
        }
        Ok(())
    }
}

fn parse_iso_date(s: &str) -> Option<(u32, u32, u32)> {
    let b = s.as_bytes();
    if b.len() < 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    let year: u32 = s.get(0..4)?.parse().ok()?;
    let month: u32 = s.get(5..7)?.parse().ok()?;
    let day: u32 = s.get(8..10)?.parse().ok()?;
    Some((year, month, day))
}

/// Ingestion summary: counts per modality plus a checksum of the
/// canonical chunk serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub documents: usize,
    pub tables: usize,
    pub semi: usize,
    pub checksum: String,
}

impl CorpusManifest {
    pub fn total(&self) -> usize {
        self.documents + self.tables + self.semi
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("parse error at line {line}: {detail}")]
    ParseError { line: usize, detail: String },
    #[error("duplicate chunk id {0}")]
    DuplicateId(ChunkId),
    #[error("schema mismatch in field {field}: {detail}")]
    SchemaMismatch { field: String, detail: String },
    #[error("empty table")]
    EmptyTable,
    #[error("metadata extractor unavailable: {0}")]
    ExtractorUnavailable(String),
    #[error("invalid extractor output: {0}")]
    InvalidExtractorOutput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Write-once chunk store: populated by a single writer during
/// ingestion, immutable afterwards.
#[derive(Debug, Clone, Default)]
pub struct ChunkStore {
    chunks: Vec<Chunk>,
    index: BTreeMap<ChunkId, usize>,
}

impl ChunkStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, chunk: Chunk) -> Result<(), CorpusError> {
        chunk.validate()?;
        if self.index.contains_key(&chunk.id) {
            return Err(CorpusError::DuplicateId(chunk.id));
        }
        self.index.insert(chunk.id.clone(), self.chunks.len());
        self.chunks.push(chunk);
        Ok(())
    }

    pub fn get(&self, id: &ChunkId) -> Option<&Chunk> {
        self.index.get(id).map(|i| &self.chunks[*i])
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn manifest(&self) -> CorpusManifest {
        let mut documents = 0;
        let mut tables = 0;
        let mut semi = 0;
        for c in &self.chunks {
            match c.modality {
                Modality::Document => documents += 1,
                Modality::Table => tables += 1,
                Modality::Semi => semi += 1,
            }
        }
        CorpusManifest {
            schema_version: SCHEMA_VERSION,
            documents,
            tables,
            semi,
            checksum: self.checksum(),
        }
    }

    /// SHA-256 over the canonical one-record-per-line serialization.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for chunk in &self.chunks {
            hasher.update(serde_json::to_string(chunk).expect("chunk serializes").as_bytes());
            hasher.update(b"\n");
        }
        hex_string(&hasher.finalize())
    }

    pub fn save_jsonl<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for chunk in &self.chunks {
            serde_json::to_writer(&mut out, chunk)
                .map_err(|e| CorpusError::ParseError { line: 0, detail: e.to_string() })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One JSON object per line with a `modality` discriminator. Metadata is
/// validated against the declared modality rather than guessed.
pub fn load_corpus(path: &Path) -> Result<(ChunkStore, CorpusManifest), CorpusError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut store = ChunkStore::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let chunk = parse_chunk_record(&line).map_err(|e| match e {
            CorpusError::ParseError { detail, .. } => {
                CorpusError::ParseError { line: i + 1, detail }
            }
            other => other,
        })?;
        store.insert(chunk)?;
    }
    let manifest = store.manifest();
    Ok((store, manifest))
}

/// Parse a single JSONL record, dispatching the metadata payload on the
/// record's `modality` field so mismatches surface as [`CorpusError::SchemaMismatch`].
pub fn parse_chunk_record(line: &str) -> Result<Chunk, CorpusError> {
    #[derive(Deserialize)]
    struct RawRecord {
        id: ChunkId,
        modality: Modality,
        text: String,
        source_id: String,
        metadata: serde_json::Value,
    }
    let raw: RawRecord = serde_json::from_str(line)
        .map_err(|e| CorpusError::ParseError { line: 0, detail: e.to_string() })?;
    let metadata = metadata_from_value(raw.metadata, raw.modality)?;
    Ok(Chunk {
        id: raw.id,
        modality: raw.modality,
        text: raw.text,
        source_id: raw.source_id,
        metadata,
    })
}

pub fn metadata_from_value(
    value: serde_json::Value,
    modality: Modality,
) -> Result<Metadata, CorpusError> {
    let wrap = |e: serde_json::Error| CorpusError::SchemaMismatch {
        field: "metadata".into(),
        detail: e.to_string(),
    };
    Ok(match modality {
        Modality::Document => Metadata::Doc(serde_json::from_value(value).map_err(wrap)?),
        Modality::Table => Metadata::Table(serde_json::from_value(value).map_err(wrap)?),
        Modality::Semi => Metadata::Semi(serde_json::from_value(value).map_err(wrap)?),
    })
}

pub fn save_corpus(store: &ChunkStore, path: &Path) -> Result<(), CorpusError> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    store.save_jsonl(&mut writer)?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    pub(crate) fn doc_chunk(id: &str, text: &str, topic: &str) -> Chunk {
        Chunk {
            id: ChunkId::new(id),
            modality: Modality::Document,
            text: text.to_string(),
            source_id: format!("src-{id}"),
            metadata: Metadata::Doc(DocMetadata {
                topic: topic.to_string(),
                title: format!("title {id}"),
                entities: vec![],
                events: vec![],
                timeline: vec![],
            }),
        }
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn empty_file_yields_zero_counts() {
        let f = write_lines(&[]);
        let (_, manifest) = load_corpus(f.path()).unwrap();
        assert_eq!(manifest.documents, 0);
        assert_eq!(manifest.tables, 0);
        assert_eq!(manifest.semi, 0);
    }

    #[test]
    fn counts_match_input() {
        let mut lines: Vec<String> = (0..3)
            .map(|i| serde_json::to_string(&doc_chunk(&format!("d{i}"), "Some text.", "t")).unwrap())
            .collect();
        let table = Chunk {
            id: ChunkId::new("t0"),
            modality: Modality::Table,
            text: "A | B\n1 | 2".into(),
            source_id: "tbl".into(),
            metadata: Metadata::Table(TableMetadata {
                title: "numbers".into(),
                description: String::new(),
                summary: String::new(),
                col_desc: BTreeMap::new(),
                col_format: BTreeMap::new(),
                entities: vec![],
                headers: vec!["A".into(), "B".into()],
                row_range: [0, 0],
            }),
        };
        lines.push(serde_json::to_string(&table).unwrap());
        let f = write_lines(&lines);
        let (_, manifest) = load_corpus(f.path()).unwrap();
        assert_eq!((manifest.documents, manifest.tables, manifest.semi), (3, 1, 0));
    }

    #[test]
    fn duplicate_id_rejected() {
        let c = doc_chunk("c1", "Text.", "t");
        let line = serde_json::to_string(&c).unwrap();
        let f = write_lines(&[line.clone(), line]);
        match load_corpus(f.path()) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id.as_str(), "c1"),
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn metadata_modality_mismatch_rejected() {
        let line = r#"{"id":"x","modality":"table","text":"t","source_id":"s","metadata":{"topic":"a","title":"b"}}"#;
        match parse_chunk_record(line) {
            Err(CorpusError::SchemaMismatch { .. }) => {}
            other => panic!("expected SchemaMismatch, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_lines(&["not json".to_string()]);
        match load_corpus(f.path()) {
            Err(CorpusError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let mut store = ChunkStore::new();
        store.insert(doc_chunk("a", "First text.", "topic a")).unwrap();
        store.insert(doc_chunk("b", "Second text.", "topic b")).unwrap();
        let mut buf = Vec::new();
        store.save_jsonl(&mut buf).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, &buf).unwrap();
        let (reloaded, _) = load_corpus(&path).unwrap();
        let mut buf2 = Vec::new();
        reloaded.save_jsonl(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn unsorted_timeline_rejected() {
        let mut c = doc_chunk("a", "Text.", "t");
        if let Metadata::Doc(m) = &mut c.metadata {
            m.timeline = vec![
                "2001-05-23 - final".into(),
                "1997-07-01 - transfer".into(),
            ];
        }
        assert!(matches!(
            c.validate(),
            Err(CorpusError::SchemaMismatch { field, .. }) if field == "timeline"
        ));
    }
}
