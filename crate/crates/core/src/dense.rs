//! Dense vector storage with exhaustive cosine search.
//!
//! Exact search is the correctness oracle for the approximate index and
//! the default at desk scale. Binary persistence uses a small versioned
//! header (dimension, M, count) shared with the ANN format.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::ChunkId;
use crate::encoder::EmbeddingVector;

pub const STORE_MAGIC: &[u8; 4] = b"CGVX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("empty index")]
    EmptyIndex,
    #[error("top_k must be at least 1")]
    InvalidK,
    #[error("dimension mismatch: index {index}, got {got}")]
    DimensionMismatch { index: usize, got: usize },
    #[error("zero vector for id {0}")]
    ZeroVector(ChunkId),
    #[error("duplicate id {0}")]
    DuplicateId(ChunkId),
    #[error("unknown id {0}")]
    UnknownId(ChunkId),
    #[error("bad index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable id-to-vector store; zero vectors are rejected at insertion
/// so cosine is always defined.
#[derive(Debug, Clone)]
pub struct VectorStore {
    dimension: usize,
    ids: Vec<ChunkId>,
    vectors: Vec<EmbeddingVector>,
    id_to_pos: HashMap<ChunkId, u32>,
}

impl VectorStore {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, ids: Vec::new(), vectors: Vec::new(), id_to_pos: HashMap::new() }
    }

    pub fn insert(&mut self, id: ChunkId, vector: EmbeddingVector) -> Result<(), IndexError> {
        if vector.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                index: self.dimension,
                got: vector.dimension(),
            });
        }
        if vector.is_zero() {
            return Err(IndexError::ZeroVector(id));
        }
        if self.id_to_pos.contains_key(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        self.id_to_pos.insert(id.clone(), self.ids.len() as u32);
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[ChunkId] {
        &self.ids
    }

    pub fn get(&self, id: &ChunkId) -> Option<&EmbeddingVector> {
        self.id_to_pos.get(id).map(|p| &self.vectors[*p as usize])
    }

    pub fn cosine_to(&self, id: &ChunkId, query: &EmbeddingVector) -> Result<f64, IndexError> {
        let v = self.get(id).ok_or_else(|| IndexError::UnknownId(id.clone()))?;
        crate::encoder::cosine(v, query).map_err(|e| match e {
            crate::encoder::VectorError::DimensionMismatch { left, right } => {
                IndexError::DimensionMismatch { index: left, got: right }
            }
            crate::encoder::VectorError::ZeroVector => IndexError::ZeroVector(id.clone()),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ChunkId, &EmbeddingVector)> {
        self.ids.iter().zip(self.vectors.iter())
    }

    /// Exhaustive top-k by cosine, descending, ties by ascending id.
    pub fn exact_search(
        &self,
        query: &EmbeddingVector,
        top_k: usize,
    ) -> Result<Vec<(ChunkId, f64)>, IndexError> {
        if top_k == 0 {
            return Err(IndexError::InvalidK);
        }
        if self.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if query.is_zero() {
            return Err(IndexError::ZeroVector(ChunkId::new("<query>")));
        }
        if query.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                index: self.dimension,
                got: query.dimension(),
            });
        }
        let mut scored: Vec<(usize, f64)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(pos, v)| (pos, crate::encoder::cosine(v, query).expect("validated")))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(self.ids[a.0].cmp(&self.ids[b.0])));
        scored.truncate(top_k);
        Ok(scored.into_iter().map(|(pos, s)| (self.ids[pos].clone(), s)).collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_header(&mut out, self.dimension as u32, 0, self.ids.len() as u64)?;
        for (id, v) in self.iter() {
            write_str(&mut out, id.as_str())?;
            for x in v.values() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let mut input = std::io::BufReader::new(std::fs::File::open(path)?);
        let (dim, _m, count) = read_header(&mut input)?;
        let mut store = VectorStore::new(dim as usize);
        for _ in 0..count {
            let id = ChunkId::new(read_str(&mut input)?);
            let mut values = vec![0f32; dim as usize];
            for v in values.iter_mut() {
                let mut buf = [0u8; 4];
                input.read_exact(&mut buf)?;
                *v = f32::from_le_bytes(buf);
            }
            store.insert(id, EmbeddingVector::new(values))?;
        }
        Ok(store)
    }
}

pub(crate) fn write_header<W: Write>(
    out: &mut W,
    dimension: u32,
    m: u32,
    count: u64,
) -> Result<(), IndexError> {
    out.write_all(STORE_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&dimension.to_le_bytes())?;
    out.write_all(&m.to_le_bytes())?;
    out.write_all(&count.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_header<R: Read>(input: &mut R) -> Result<(u32, u32, u64), IndexError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != STORE_MAGIC {
        return Err(IndexError::Format("bad magic".into()));
    }
    let version = read_u32(input)?;
    if version != FORMAT_VERSION {
        return Err(IndexError::Format(format!("unsupported version {version}")));
    }
    let dim = read_u32(input)?;
    let m = read_u32(input)?;
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok((dim, m, u64::from_le_bytes(buf)))
}

pub(crate) fn read_u32<R: Read>(input: &mut R) -> Result<u32, IndexError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn write_str<W: Write>(out: &mut W, s: &str) -> Result<(), IndexError> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn read_str<R: Read>(input: &mut R) -> Result<String, IndexError> {
    let len = read_u32(input)? as usize;
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| IndexError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_from(vs: &[(&str, Vec<f32>)]) -> VectorStore {
        let mut store = VectorStore::new(vs[0].1.len());
        for (id, v) in vs {
            store.insert(ChunkId::new(*id), EmbeddingVector::new(v.clone())).unwrap();
        }
        store
    }

    #[test]
    fn exact_search_orders_by_cosine() {
        // Against query (1,0): cosines 0.9-ish, 0.1-ish, 0.5-ish by angle.
        let store = store_from(&[
            ("a", vec![0.9, 0.4358899]),
            ("b", vec![0.1, 0.9949874]),
            ("c", vec![0.5, 0.8660254]),
        ]);
        let query = EmbeddingVector::new(vec![1.0, 0.0]);
        let top = store.exact_search(&query, 2).unwrap();
        let got: Vec<&str> = top.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(got, ["a", "c"]);
    }

    #[test]
    fn invalid_k_and_empty() {
        let store = store_from(&[("a", vec![1.0, 0.0])]);
        assert!(matches!(
            store.exact_search(&EmbeddingVector::new(vec![1.0, 0.0]), 0),
            Err(IndexError::InvalidK)
        ));
        let empty = VectorStore::new(2);
        assert!(matches!(
            empty.exact_search(&EmbeddingVector::new(vec![1.0, 0.0]), 1),
            Err(IndexError::EmptyIndex)
        ));
    }

    #[test]
    fn zero_vectors_rejected() {
        let mut store = VectorStore::new(2);
        assert!(matches!(
            store.insert(ChunkId::new("z"), EmbeddingVector::new(vec![0.0, 0.0])),
            Err(IndexError::ZeroVector(_))
        ));
    }

    #[test]
    fn saturation_returns_all() {
        let store = store_from(&[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]);
        let top = store.exact_search(&EmbeddingVector::new(vec![1.0, 1.0]), 10).unwrap();
        assert_eq!(top.len(), 2);
    }

    #[test]
    fn persistence_round_trip() {
        let store = store_from(&[("a", vec![0.25, -1.5]), ("b", vec![3.0, 0.125])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.bin");
        store.save(&path).unwrap();
        let loaded = VectorStore::load(&path).unwrap();
        assert_eq!(loaded.len(), store.len());
        for (id, v) in store.iter() {
            assert_eq!(loaded.get(id).unwrap().values(), v.values());
        }
    }
}
