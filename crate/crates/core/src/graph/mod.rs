//! Offline heterogeneous similarity graph.
//!
//! Candidate pairs are every two chunks whose modalities define signals;
//! percentile pruning keeps the strong tail per signal; structural edges
//! connect chunks sharing a source; explicit schema edges are retained
//! when the input provides them. The finished graph is immutable.

mod prune;
mod signals;

pub use prune::{percentile_threshold, prune_edges, EdgeLogic, PruneConfig, PruneOutcome};
pub use signals::{
    entity_jaccard, pairwise_signals, signals_from_features, ChunkFeatures, PairKind, SignalKind,
    SimilaritySignals,
};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Chunk, ChunkId, Metadata};
use crate::encoder::Encoder;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("missing metadata field {0}")]
    MissingMetadataField(String),
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("percentile {0} outside (0, 100)")]
    InvalidPercentile(f64),
    #[error("unknown chunk {0}")]
    UnknownChunk(ChunkId),
    #[error("encoder failure: {0}")]
    Encode(#[from] crate::encoder::EncodeError),
    #[error("vector error: {0}")]
    Vector(#[from] crate::encoder::VectorError),
    #[error("bad graph file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How an edge record came to exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeType {
    /// Chunks share a source document/table/object.
    Structural,
    /// Metadata similarity passed percentile pruning.
    Similarity(PairKind),
    /// Schema edge carried through from the input.
    Explicit(String),
}

impl EdgeType {
    pub fn as_string(&self) -> String {
        match self {
            EdgeType::Structural => "structural".to_string(),
            EdgeType::Similarity(kind) => kind.to_string(),
            EdgeType::Explicit(label) => format!("explicit:{label}"),
        }
    }

    pub fn parse(s: &str) -> Result<EdgeType, GraphError> {
        if s == "structural" {
            return Ok(EdgeType::Structural);
        }
        if let Some(label) = s.strip_prefix("explicit:") {
            return Ok(EdgeType::Explicit(label.to_string()));
        }
        serde_json::from_value::<PairKind>(serde_json::Value::String(s.to_string()))
            .map(EdgeType::Similarity)
            .map_err(|_| GraphError::Format(format!("unknown edge type {s:?}")))
    }
}

impl Serialize for EdgeType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_string())
    }
}

impl<'de> Deserialize<'de> for EdgeType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        EdgeType::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Lightweight metadata stored on similarity edges to guide traversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraversalMetadata {
    TableTable {
        joinable_columns: Vec<String>,
    },
    DocDoc {
        shared_entities: Vec<String>,
        confidence: f64,
    },
    TableDoc {
        shared_entities: Vec<String>,
        row_range: [usize; 2],
        column_refs: Vec<String>,
    },
    SemiSemi {
        shared_entities: Vec<String>,
    },
}

/// One undirected edge record; `src < dst` canonically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: ChunkId,
    pub dst: ChunkId,
    pub edge_type: EdgeType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub signals: Option<SimilaritySignals>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub traversal_metadata: Option<TraversalMetadata>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    /// Unique connected pairs (a pair that is both structural and
    /// similar counts once).
    pub total_edges: usize,
    pub similarity_edges: usize,
    pub structural_edges: usize,
    pub explicit_edges: usize,
    pub candidate_pairs: usize,
    /// Fraction of scored candidate pairs kept as similarity edges.
    pub candidate_fraction: f64,
    /// 2E/N over unique pairs.
    pub avg_degree: f64,
    /// 2E/(N(N-1)) over unique pairs.
    pub density: f64,
}

/// A scored candidate pair; positions index the chunk slice handed to
/// the builder.
#[derive(Debug, Clone)]
pub struct CandidatePair {
    pub a: usize,
    pub b: usize,
    pub signals: SimilaritySignals,
}

/// Immutable chunk graph: edge records plus a deduplicated adjacency.
#[derive(Debug, Clone)]
pub struct ChunkGraph {
    ids: Vec<ChunkId>,
    id_to_idx: HashMap<ChunkId, u32>,
    adjacency: Vec<Vec<u32>>,
    edges: Vec<GraphEdge>,
    candidate_pairs: usize,
}

impl ChunkGraph {
    pub fn from_edges(
        ids: Vec<ChunkId>,
        edges: Vec<GraphEdge>,
        candidate_pairs: usize,
    ) -> Result<Self, GraphError> {
        let id_to_idx: HashMap<ChunkId, u32> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();
        let mut adjacency: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); ids.len()];
        for edge in &edges {
            let a = *id_to_idx
                .get(&edge.src)
                .ok_or_else(|| GraphError::UnknownChunk(edge.src.clone()))?;
            let b = *id_to_idx
                .get(&edge.dst)
                .ok_or_else(|| GraphError::UnknownChunk(edge.dst.clone()))?;
            adjacency[a as usize].insert(b);
            adjacency[b as usize].insert(a);
        }
        Ok(ChunkGraph {
            ids,
            id_to_idx,
            adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect(),
            edges,
            candidate_pairs,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[ChunkId] {
        &self.ids
    }

    pub fn contains(&self, id: &ChunkId) -> bool {
        self.id_to_idx.contains_key(id)
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn candidate_pairs(&self) -> usize {
        self.candidate_pairs
    }

    /// Neighbor ids of one chunk, deduplicated across edge records.
    pub fn neighbors(&self, id: &ChunkId) -> Result<Vec<&ChunkId>, GraphError> {
        let idx = self.id_to_idx.get(id).ok_or_else(|| GraphError::UnknownChunk(id.clone()))?;
        Ok(self.adjacency[*idx as usize].iter().map(|n| &self.ids[*n as usize]).collect())
    }

    /// All edge records between two chunks, in either orientation.
    pub fn edges_between(&self, a: &ChunkId, b: &ChunkId) -> Vec<&GraphEdge> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.edges
            .iter()
            .filter(|e| (&e.src, &e.dst) == (lo, hi))
            .collect()
    }
}

/// Table 8-style stats for a built graph.
pub fn graph_stats(graph: &ChunkGraph) -> GraphStats {
    let n = graph.node_count();
    let mut pairs: BTreeSet<(&ChunkId, &ChunkId)> = BTreeSet::new();
    let mut similarity = 0;
    let mut structural = 0;
    let mut explicit = 0;
    for edge in graph.edges() {
        pairs.insert((&edge.src, &edge.dst));
        match edge.edge_type {
            EdgeType::Similarity(_) => similarity += 1,
            EdgeType::Structural => structural += 1,
            EdgeType::Explicit(_) => explicit += 1,
        }
    }
    let e = pairs.len();
    GraphStats {
        node_count: n,
        total_edges: e,
        similarity_edges: similarity,
        structural_edges: structural,
        explicit_edges: explicit,
        candidate_pairs: graph.candidate_pairs(),
        candidate_fraction: if graph.candidate_pairs() == 0 {
            0.0
        } else {
            similarity as f64 / graph.candidate_pairs() as f64
        },
        avg_degree: if n == 0 { 0.0 } else { 2.0 * e as f64 / n as f64 },
        density: if n < 2 { 0.0 } else { 2.0 * e as f64 / (n as f64 * (n as f64 - 1.0)) },
    }
}

/// An input-provided schema edge between two chunks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitEdge {
    pub src: ChunkId,
    pub dst: ChunkId,
    pub label: String,
}

fn shared_entities(a: &Chunk, b: &Chunk) -> Vec<String> {
    let ea = a.metadata.entity_names();
    let eb = b.metadata.entity_names();
    let mut shared: Vec<String> = ea.intersection(&eb).cloned().collect();
    shared.sort();
    shared
}

fn traversal_metadata(a: &Chunk, b: &Chunk, signals: &SimilaritySignals) -> TraversalMetadata {
    match signals.pair_kind() {
        PairKind::TableTable => {
            let headers = |c: &Chunk| -> HashSet<String> {
                match &c.metadata {
                    Metadata::Table(m) => m.headers.iter().map(|h| h.to_lowercase()).collect(),
                    _ => HashSet::new(),
                }
            };
            let ha = headers(a);
            let hb = headers(b);
            let mut joinable: Vec<String> = ha.intersection(&hb).cloned().collect();
            joinable.sort();
            TraversalMetadata::TableTable { joinable_columns: joinable }
        }
        PairKind::DocDoc => TraversalMetadata::DocDoc {
            shared_entities: shared_entities(a, b),
            confidence: signals.max_value(),
        },
        PairKind::TableDoc => {
            let table = if matches!(a.metadata, Metadata::Table(_)) { a } else { b };
            let shared = shared_entities(a, b);
            let (row_range, column_refs) = match &table.metadata {
                Metadata::Table(m) => {
                    let refs: Vec<String> = m
                        .headers
                        .iter()
                        .filter(|h| shared.contains(&h.to_lowercase()))
                        .cloned()
                        .collect();
                    (m.row_range, refs)
                }
                _ => ([0, 0], vec![]),
            };
            TraversalMetadata::TableDoc { shared_entities: shared, row_range, column_refs }
        }
        PairKind::SemiSemi => {
            TraversalMetadata::SemiSemi { shared_entities: shared_entities(a, b) }
        }
    }
}

fn canonical(a: &ChunkId, b: &ChunkId) -> (ChunkId, ChunkId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Score every candidate pair. Parallel over the pair blocks; output
/// order is deterministic (lexicographic in positions).
pub fn score_candidates(
    chunks: &[Chunk],
    encoder: &dyn Encoder,
) -> Result<Vec<CandidatePair>, GraphError> {
    let features: Vec<ChunkFeatures> = chunks
        .par_iter()
        .map(|c| ChunkFeatures::compute(c, encoder))
        .collect::<Result<_, _>>()?;
    let n = chunks.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    let scored: Vec<Option<CandidatePair>> = pairs
        .par_iter()
        .map(|(a, b)| {
            signals_from_features(&features[*a], &features[*b])
                .map(|s| s.map(|signals| CandidatePair { a: *a, b: *b, signals }))
        })
        .collect::<Result<_, _>>()?;
    Ok(scored.into_iter().flatten().collect())
}

/// Build the full graph: pruned similarity edges, one structural edge
/// per same-source pair, and any explicit schema edges.
pub fn build_graph(
    chunks: &[Chunk],
    encoder: &dyn Encoder,
    config: &PruneConfig,
    explicit: &[ExplicitEdge],
) -> Result<ChunkGraph, GraphError> {
    let candidates = score_candidates(chunks, encoder)?;
    let outcome = if candidates.is_empty() {
        PruneOutcome { kept: vec![], thresholds: BTreeMap::new() }
    } else {
        prune_edges(&candidates, config)?
    };
    assemble_graph(chunks, &candidates, &outcome.kept, explicit)
}

fn assemble_graph(
    chunks: &[Chunk],
    candidates: &[CandidatePair],
    kept: &[usize],
    explicit: &[ExplicitEdge],
) -> Result<ChunkGraph, GraphError> {
    let ids: Vec<ChunkId> = chunks.iter().map(|c| c.id.clone()).collect();
    let known: HashSet<&ChunkId> = ids.iter().collect();
    let mut edges = Vec::new();

    for i in kept {
        let cand = &candidates[*i];
        let (a, b) = (&chunks[cand.a], &chunks[cand.b]);
        let (src, dst) = canonical(&a.id, &b.id);
        edges.push(GraphEdge {
            src,
            dst,
            edge_type: EdgeType::Similarity(cand.signals.pair_kind()),
            traversal_metadata: Some(traversal_metadata(a, b, &cand.signals)),
            signals: Some(cand.signals.clone()),
        });
    }

    // Exactly one structural edge per same-source pair.
    let mut by_source: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in chunks.iter().enumerate() {
        by_source.entry(c.source_id.as_str()).or_default().push(i);
    }
    for members in by_source.values() {
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let (src, dst) = canonical(&chunks[*a].id, &chunks[*b].id);
                edges.push(GraphEdge {
                    src,
                    dst,
                    edge_type: EdgeType::Structural,
                    signals: None,
                    traversal_metadata: None,
                });
            }
        }
    }

    let mut seen_explicit = BTreeSet::new();
    for e in explicit {
        for end in [&e.src, &e.dst] {
            if !known.contains(end) {
                return Err(GraphError::UnknownChunk(end.clone()));
            }
        }
        let (src, dst) = canonical(&e.src, &e.dst);
        if seen_explicit.insert((src.clone(), dst.clone(), e.label.clone())) {
            edges.push(GraphEdge {
                src,
                dst,
                edge_type: EdgeType::Explicit(e.label.clone()),
                signals: None,
                traversal_metadata: None,
            });
        }
    }

    ChunkGraph::from_edges(ids, edges, candidates.len())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub percentile: f64,
    pub logic: EdgeLogic,
    pub stats: GraphStats,
}

/// One stats row per (logic, percentile): candidates are scored once and
/// re-pruned per combination.
pub fn prune_sweep(
    chunks: &[Chunk],
    encoder: &dyn Encoder,
    percentiles: &[f64],
    logics: &[EdgeLogic],
    explicit: &[ExplicitEdge],
) -> Result<Vec<SweepRow>, GraphError> {
    let candidates = score_candidates(chunks, encoder)?;
    let mut rows = Vec::new();
    for logic in logics {
        for p in percentiles {
            let config = PruneConfig::new(*p, *logic)?;
            let outcome = if candidates.is_empty() {
                PruneOutcome { kept: vec![], thresholds: BTreeMap::new() }
            } else {
                prune_edges(&candidates, &config)?
            };
            let graph = assemble_graph(chunks, &candidates, &outcome.kept, explicit)?;
            rows.push(SweepRow { percentile: *p, logic: *logic, stats: graph_stats(&graph) });
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphManifest {
    schema_version: u32,
    node_count: usize,
    edge_records: usize,
    candidate_pairs: usize,
}

/// Persist as nodes.jsonl + edges.jsonl + manifest.json in `dir`.
pub fn save_graph(chunks: &[Chunk], graph: &ChunkGraph, dir: &Path) -> Result<(), GraphError> {
    std::fs::create_dir_all(dir)?;
    let mut nodes = std::io::BufWriter::new(std::fs::File::create(dir.join("nodes.jsonl"))?);
    for chunk in chunks {
        serde_json::to_writer(&mut nodes, chunk).map_err(|e| GraphError::Format(e.to_string()))?;
        nodes.write_all(b"\n")?;
    }
    nodes.flush()?;
    let mut edges = std::io::BufWriter::new(std::fs::File::create(dir.join("edges.jsonl"))?);
    for edge in graph.edges() {
        serde_json::to_writer(&mut edges, edge).map_err(|e| GraphError::Format(e.to_string()))?;
        edges.write_all(b"\n")?;
    }
    edges.flush()?;
    let manifest = GraphManifest {
        schema_version: crate::corpus::SCHEMA_VERSION,
        node_count: graph.node_count(),
        edge_records: graph.edges().len(),
        candidate_pairs: graph.candidate_pairs(),
    };
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(|e| GraphError::Format(e.to_string()))?,
    )?;
    Ok(())
}

/// Load a persisted graph; returns the chunks alongside it.
pub fn load_graph(dir: &Path) -> Result<(Vec<Chunk>, ChunkGraph), GraphError> {
    let manifest: GraphManifest = serde_json::from_str(
        &std::fs::read_to_string(dir.join("manifest.json"))?,
    )
    .map_err(|e| GraphError::Format(e.to_string()))?;
    let nodes_file = std::fs::File::open(dir.join("nodes.jsonl"))?;
    let mut chunks = Vec::new();
    for line in std::io::BufReader::new(nodes_file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        chunks.push(
            crate::corpus::parse_chunk_record(&line)
                .map_err(|e| GraphError::Format(e.to_string()))?,
        );
    }
    let edges_file = std::fs::File::open(dir.join("edges.jsonl"))?;
    let mut edges = Vec::new();
    for line in std::io::BufReader::new(edges_file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        edges.push(
            serde_json::from_str::<GraphEdge>(&line)
                .map_err(|e| GraphError::Format(e.to_string()))?,
        );
    }
    let ids = chunks.iter().map(|c| c.id.clone()).collect();
    let graph = ChunkGraph::from_edges(ids, edges, manifest.candidate_pairs)?;
    Ok((chunks, graph))
}
