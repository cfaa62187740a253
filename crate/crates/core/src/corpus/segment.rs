//! Table segmentation: greedy row packing into bounded segments with the
//! header row replicated into every segment.

use std::collections::BTreeMap;

use super::{Chunk, ChunkId, CorpusError, EntityRecord, Metadata, Modality, TableMetadata};

/// Split `rows` into consecutive segments of `max_rows` rows each; only
/// the final segment may be shorter (it may even fall below `min_rows`
/// rather than merging backward, keeping row order intact). Headers are
/// rendered into every segment's text.
#[allow(clippy::too_many_arguments)]
pub fn segment_table(
    source_id: &str,
    title: &str,
    headers: &[String],
    rows: &[Vec<String>],
    min_rows: usize,
    max_rows: usize,
    entities: &[EntityRecord],
) -> Result<Vec<Chunk>, CorpusError> {
    assert!(!headers.is_empty(), "headers must be non-empty");
    assert!(
        max_rows >= min_rows && min_rows >= 1,
        "require max_rows >= min_rows >= 1"
    );
    if rows.is_empty() {
        return Err(CorpusError::EmptyTable);
    }

    let mut chunks = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let end = (start + max_rows).min(rows.len());
        let segment = &rows[start..end];
        let text = render_segment(headers, segment);
        let seg_index = chunks.len();
        chunks.push(Chunk {
            id: ChunkId::new(format!("{source_id}::seg{seg_index}")),
            modality: Modality::Table,
            text,
            source_id: source_id.to_string(),
            metadata: Metadata::Table(TableMetadata {
                title: title.to_string(),
                description: String::new(),
                summary: String::new(),
                col_desc: BTreeMap::new(),
                col_format: BTreeMap::new(),
                entities: entities.to_vec(),
                headers: headers.to_vec(),
                row_range: [start, end - 1],
            }),
        });
        start = end;
    }
    Ok(chunks)
}

fn render_segment(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut text = headers.join(" | ");
    for row in rows {
        text.push('\n');
        text.push_str(&row.join(" | "));
    }
    text
}
