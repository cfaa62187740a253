//! Percentile pruning of candidate edges.
//!
//! Thresholds are computed per signal, per pair kind: the empirical
//! distribution of a signal is that signal's value over every candidate
//! pair of the same kind. A pair survives when a signal strictly exceeds
//! its threshold ("exceeds"), so ties at the threshold drop.

use std::collections::BTreeMap;

use super::{CandidatePair, GraphError, PairKind, SignalKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EdgeLogic {
    /// Keep the pair if any populated signal passes its threshold.
    Or,
    /// Keep only if all populated signals pass their thresholds.
    And,
}

impl std::fmt::Display for EdgeLogic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeLogic::Or => f.write_str("OR"),
            EdgeLogic::And => f.write_str("AND"),
        }
    }
}

impl std::str::FromStr for EdgeLogic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(EdgeLogic::Or),
            "and" => Ok(EdgeLogic::And),
            other => Err(format!("unknown edge logic {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PruneConfig {
    pub percentile: f64,
    pub logic: EdgeLogic,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { percentile: 95.0, logic: EdgeLogic::Or }
    }
}

impl PruneConfig {
    pub fn new(percentile: f64, logic: EdgeLogic) -> Result<Self, GraphError> {
        if !(percentile > 0.0 && percentile < 100.0) {
            return Err(GraphError::InvalidPercentile(percentile));
        }
        Ok(Self { percentile, logic })
    }
}

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest element of
/// `values`. Always an element of the input.
pub fn percentile_threshold(values: &[f64], p: f64) -> Result<f64, GraphError> {
    if !(p > 0.0 && p < 100.0) {
        return Err(GraphError::InvalidPercentile(p));
    }
    if values.is_empty() {
        return Err(GraphError::EmptyDistribution);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Divide after multiplying so integer-valued products stay exact
    // (e.g. p=90, n=10 must give rank 9, not 10).
    let rank = ((p * sorted.len() as f64) / 100.0).ceil() as usize;
    let rank = rank.clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    /// Indices into the candidate slice that survived.
    pub kept: Vec<usize>,
    /// Per (pair kind, signal) nearest-rank thresholds.
    pub thresholds: BTreeMap<(PairKind, SignalKind), f64>,
}

/// Apply percentile pruning to scored candidate pairs. Thresholds come
/// from the candidates themselves, so AND output is a subset of OR
/// output at equal percentile.
pub fn prune_edges(
    candidates: &[CandidatePair],
    config: &PruneConfig,
) -> Result<PruneOutcome, GraphError> {
    let mut distributions: BTreeMap<(PairKind, SignalKind), Vec<f64>> = BTreeMap::new();
    for cand in candidates {
        for (signal, value) in cand.signals.values() {
            distributions
                .entry((cand.signals.pair_kind(), *signal))
                .or_default()
                .push(*value);
        }
    }
    let mut thresholds = BTreeMap::new();
    for (key, values) in &distributions {
        thresholds.insert(*key, percentile_threshold(values, config.percentile)?);
    }

    let mut kept = Vec::new();
    for (i, cand) in candidates.iter().enumerate() {
        let kind = cand.signals.pair_kind();
        let mut any = false;
        let mut all = true;
        for (signal, value) in cand.signals.values() {
            let threshold = thresholds[&(kind, *signal)];
            if *value > threshold {
                any = true;
            } else {
                all = false;
            }
        }
        let keep = match config.logic {
            EdgeLogic::Or => any,
            EdgeLogic::And => any && all,
        };
        if keep {
            kept.push(i);
        }
    }
    Ok(PruneOutcome { kept, thresholds })
}
