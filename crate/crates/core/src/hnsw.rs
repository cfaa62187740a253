//! Approximate nearest-neighbor search over a layered proximity graph.
//!
//! Cosine distance via unit-normalized vectors; layer membership is
//! sampled geometrically from a seeded RNG so construction is fully
//! deterministic. Per-node degree is capped at 2M on layer 0 and M on
//! the layers above.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::ChunkId;
use crate::dense::{read_header, read_str, read_u32, write_header, write_str, IndexError};
use crate::encoder::EmbeddingVector;

pub const DEFAULT_M: usize = 64;
pub const DEFAULT_EF_CONSTRUCTION: usize = 200;
pub const DEFAULT_EF_SEARCH: usize = 128;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy)]
pub struct AnnParams {
    pub m: usize,
    pub ef_construction: usize,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self { m: DEFAULT_M, ef_construction: DEFAULT_EF_CONSTRUCTION, seed: DEFAULT_SEED }
    }
}

/// Candidate ordered by similarity then position, giving every heap
/// operation a total, deterministic order.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    sim: f64,
    pos: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim.total_cmp(&other.sim).then(other.pos.cmp(&self.pos))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct AnnIndex {
    dimension: usize,
    m: usize,
    ef_construction: usize,
    seed: u64,
    entry: Option<u32>,
    max_level: usize,
    ids: Vec<ChunkId>,
    /// Unit-normalized vectors, flattened row-major.
    data: Vec<f32>,
    /// Adjacency per node per level (level 0 first).
    neighbors: Vec<Vec<Vec<u32>>>,
}

impl AnnIndex {
    /// Build from (id, vector) pairs in input order. Requires at least
    /// one vector; zero vectors are rejected with the offending id.
    pub fn build(
        items: impl IntoIterator<Item = (ChunkId, EmbeddingVector)>,
        params: AnnParams,
    ) -> Result<Self, IndexError> {
        let items: Vec<(ChunkId, EmbeddingVector)> = items.into_iter().collect();
        if items.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        let dimension = items[0].1.dimension();
        let mut index = AnnIndex {
            dimension,
            m: params.m,
            ef_construction: params.ef_construction.max(params.m),
            seed: params.seed,
            entry: None,
            max_level: 0,
            ids: Vec::with_capacity(items.len()),
            data: Vec::with_capacity(items.len() * dimension),
            neighbors: Vec::with_capacity(items.len()),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let level_mult = 1.0 / (params.m.max(2) as f64).ln();
        let mut seen = std::collections::HashSet::new();
        for (id, vector) in items {
            if vector.dimension() != dimension {
                return Err(IndexError::DimensionMismatch {
                    index: dimension,
                    got: vector.dimension(),
                });
            }
            if vector.is_zero() {
                return Err(IndexError::ZeroVector(id));
            }
            if !seen.insert(id.clone()) {
                return Err(IndexError::DuplicateId(id));
            }
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let level = (-u.ln() * level_mult).floor() as usize;
            index.insert(id, &vector, level);
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ids(&self) -> &[ChunkId] {
        &self.ids
    }

    fn vector(&self, pos: u32) -> &[f32] {
        let start = pos as usize * self.dimension;
        &self.data[start..start + self.dimension]
    }

    fn sim(&self, pos: u32, query: &[f32]) -> f64 {
        self.vector(pos)
            .iter()
            .zip(query)
            .map(|(a, b)| *a as f64 * *b as f64)
            .sum()
    }

    fn cap(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    fn insert(&mut self, id: ChunkId, vector: &EmbeddingVector, level: usize) {
        let pos = self.ids.len() as u32;
        let unit = vector.normalized().expect("zero vectors rejected earlier");
        self.ids.push(id);
        self.data.extend_from_slice(unit.values());
        self.neighbors.push(vec![Vec::new(); level + 1]);

        let Some(mut cur) = self.entry else {
            self.entry = Some(pos);
            self.max_level = level;
            return;
        };

        let query: Vec<f32> = unit.values().to_vec();
        // Greedy descent through the layers above the new node's level.
        for lvl in ((level + 1)..=self.max_level).rev() {
            cur = self.greedy_closest(&query, cur, lvl);
        }
        // Connect on each layer from min(level, max_level) down to 0.
        let mut entries = vec![cur];
        for lvl in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&query, &entries, self.ef_construction, lvl);
            let selected: Vec<u32> =
                found.iter().take(self.cap(lvl)).map(|c| c.pos).collect();
            for nb in &selected {
                self.neighbors[pos as usize][lvl].push(*nb);
                self.neighbors[*nb as usize][lvl].push(pos);
                if self.neighbors[*nb as usize][lvl].len() > self.cap(lvl) {
                    self.prune(*nb, lvl);
                }
            }
            entries = if found.is_empty() { entries } else { found.iter().map(|c| c.pos).collect() };
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(pos);
        }
    }

    /// Keep only the `cap` most similar neighbors of `pos` on `level`.
    fn prune(&mut self, pos: u32, level: usize) {
        let anchor: Vec<f32> = self.vector(pos).to_vec();
        let mut scored: Vec<Cand> = self.neighbors[pos as usize][level]
            .iter()
            .map(|nb| Cand { sim: self.sim(*nb, &anchor), pos: *nb })
            .collect();
        scored.sort_by(|a, b| b.cmp(a));
        scored.dedup_by_key(|c| c.pos);
        scored.truncate(self.cap(level));
        self.neighbors[pos as usize][level] = scored.into_iter().map(|c| c.pos).collect();
    }

    fn greedy_closest(&self, query: &[f32], start: u32, level: usize) -> u32 {
        let mut cur = start;
        let mut cur_sim = self.sim(cur, query);
        loop {
            let mut improved = false;
            for nb in &self.neighbors[cur as usize][level] {
                let s = self.sim(*nb, query);
                if s > cur_sim || (s == cur_sim && *nb < cur) {
                    cur = *nb;
                    cur_sim = s;
                    improved = true;
                }
            }
            if !improved {
                return cur;
            }
        }
    }

    /// Best-first beam search on one layer; returns up to `ef`
    /// candidates sorted by descending similarity.
    fn search_layer(&self, query: &[f32], entries: &[u32], ef: usize, level: usize) -> Vec<Cand> {
        let mut visited = vec![false; self.ids.len()];
        let mut frontier: BinaryHeap<Cand> = BinaryHeap::new();
        let mut results: BinaryHeap<std::cmp::Reverse<Cand>> = BinaryHeap::new();
        for e in entries {
            if visited[*e as usize] {
                continue;
            }
            visited[*e as usize] = true;
            let c = Cand { sim: self.sim(*e, query), pos: *e };
            frontier.push(c);
            results.push(std::cmp::Reverse(c));
        }
        while results.len() > ef {
            results.pop();
        }
        while let Some(cand) = frontier.pop() {
            let worst = results.peek().map(|r| r.0.sim).unwrap_or(f64::NEG_INFINITY);
            if results.len() >= ef && cand.sim < worst {
                break;
            }
            // neighbors[cand] can gain entries during construction only;
            // cloning keeps the borrow checker happy on search too.
            let nbs = self.neighbors[cand.pos as usize][level].clone();
            for nb in nbs {
                if visited[nb as usize] {
                    continue;
                }
                visited[nb as usize] = true;
                let sim = self.sim(nb, query);
                let worst = results.peek().map(|r| r.0.sim).unwrap_or(f64::NEG_INFINITY);
                if results.len() < ef || sim > worst {
                    let c = Cand { sim, pos: nb };
                    frontier.push(c);
                    results.push(std::cmp::Reverse(c));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<Cand> = results.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    /// Approximate top-k by cosine. Deterministic for a fixed
    /// construction seed; scores are non-increasing.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        top_k: usize,
        ef_search: usize,
    ) -> Result<Vec<(ChunkId, f64)>, IndexError> {
        if top_k == 0 {
            return Err(IndexError::InvalidK);
        }
        if self.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if query.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                index: self.dimension,
                got: query.dimension(),
            });
        }
        let unit = query.normalized().map_err(|_| IndexError::ZeroVector(ChunkId::new("<query>")))?;
        let q: Vec<f32> = unit.values().to_vec();
        let mut cur = self.entry.expect("non-empty index has an entry point");
        for lvl in (1..=self.max_level).rev() {
            cur = self.greedy_closest(&q, cur, lvl);
        }
        let ef = ef_search.max(top_k);
        let found = self.search_layer(&q, &[cur], ef, 0);
        Ok(found
            .into_iter()
            .take(top_k)
            .map(|c| (self.ids[c.pos as usize].clone(), c.sim))
            .collect())
    }

    /// Degree caps and entry-point reachability, used by tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (pos, levels) in self.neighbors.iter().enumerate() {
            for (lvl, nbs) in levels.iter().enumerate() {
                if nbs.len() > self.cap(lvl) {
                    return Err(format!("node {pos} level {lvl} degree {} > cap", nbs.len()));
                }
            }
        }
        // Reachability over the whole hierarchy from the entry point.
        let Some(entry) = self.entry else {
            return if self.ids.is_empty() { Ok(()) } else { Err("missing entry".into()) };
        };
        let mut seen = vec![false; self.ids.len()];
        let mut stack = vec![entry];
        seen[entry as usize] = true;
        while let Some(p) = stack.pop() {
            for lvl in self.neighbors[p as usize].iter() {
                for nb in lvl {
                    if !seen[*nb as usize] {
                        seen[*nb as usize] = true;
                        stack.push(*nb);
                    }
                }
            }
        }
        if let Some(unreached) = seen.iter().position(|s| !s) {
            return Err(format!("node {unreached} unreachable from entry"));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_header(&mut out, self.dimension as u32, self.m as u32, self.ids.len() as u64)?;
        out.write_all(&(self.ef_construction as u32).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&(self.max_level as u32).to_le_bytes())?;
        let entry: i64 = self.entry.map(|e| e as i64).unwrap_or(-1);
        out.write_all(&entry.to_le_bytes())?;
        for (pos, id) in self.ids.iter().enumerate() {
            write_str(&mut out, id.as_str())?;
            let vec = self.vector(pos as u32);
            for x in vec {
                out.write_all(&x.to_le_bytes())?;
            }
            let levels = &self.neighbors[pos];
            out.write_all(&(levels.len() as u32).to_le_bytes())?;
            for level in levels {
                out.write_all(&(level.len() as u32).to_le_bytes())?;
                for nb in level {
                    out.write_all(&nb.to_le_bytes())?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let mut input = std::io::BufReader::new(std::fs::File::open(path)?);
        let (dim, m, count) = read_header(&mut input)?;
        let ef_construction = read_u32(&mut input)? as usize;
        let mut buf8 = [0u8; 8];
        input.read_exact(&mut buf8)?;
        let seed = u64::from_le_bytes(buf8);
        let max_level = read_u32(&mut input)? as usize;
        input.read_exact(&mut buf8)?;
        let entry = i64::from_le_bytes(buf8);
        let mut index = AnnIndex {
            dimension: dim as usize,
            m: m as usize,
            ef_construction,
            seed,
            entry: if entry < 0 { None } else { Some(entry as u32) },
            max_level,
            ids: Vec::with_capacity(count as usize),
            data: Vec::with_capacity(count as usize * dim as usize),
            neighbors: Vec::with_capacity(count as usize),
        };
        for _ in 0..count {
            index.ids.push(ChunkId::new(read_str(&mut input)?));
            for _ in 0..dim {
                let mut b = [0u8; 4];
                input.read_exact(&mut b)?;
                index.data.push(f32::from_le_bytes(b));
            }
            let n_levels = read_u32(&mut input)? as usize;
            let mut levels = Vec::with_capacity(n_levels);
            for _ in 0..n_levels {
                let n = read_u32(&mut input)? as usize;
                let mut nbs = Vec::with_capacity(n);
                for _ in 0..n {
                    nbs.push(read_u32(&mut input)?);
                }
                levels.push(nbs);
            }
            index.neighbors.push(levels);
        }
        Ok(index)
    }
}
