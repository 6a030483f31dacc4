//! Tower-spec files: JSON descriptions of a tower and its Lip weights.
//!
//! ```json
//! {"levels": [[1], [1, 1], [2, 1]],
//!  "layouts": [[[0], [0]], [[0, 1], [0]]],
//!  "trace": {"kind": "effros-shen", "theta": 0.6180339887498949},
//!  "beta": {"kind": "dim-power", "k": 1}}
//! ```
//!
//! Trace kinds: `uhf`, `effros-shen` (`theta`, optional `digits`), `cantor`,
//! `explicit` (`weights`, one list per level). Beta kinds: `dim-power` (`k`),
//! `uhf-power` (`k`, block size to the power `-k`), `cantor` (`r`),
//! `explicit` (`values`).

use serde::{Deserialize, Serialize};

use crate::algebra::{FdCStar, TraceWeights};
use crate::cfrac::{cf_expand, DEFAULT_GUARD};
use crate::error::{validation, Error, Result};
use crate::tower::{effros_shen_weights, BetaRule, BetaSequence, EmbeddingLayout, InductiveTower, TowerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerSpec {
    pub levels: Vec<Vec<usize>>,
    pub layouts: Vec<Vec<Vec<usize>>>,
    pub trace: TraceSpec,
    pub beta: BetaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TraceSpec {
    Uhf,
    EffrosShen {
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        digits: Option<Vec<u64>>,
    },
    Cantor,
    Explicit {
        weights: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaSpec {
    DimPower { k: f64 },
    UhfPower { k: f64 },
    Cantor { r: f64 },
    Explicit { values: Vec<f64> },
}

/// Parses a spec, reporting the line and column of syntax and type errors.
pub fn parse_tower_spec(text: &str) -> Result<TowerSpec> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
}

impl TowerSpec {
    /// Builds the tower without the consistency checks, so callers can
    /// report every violation; see [`InductiveTower::validate`].
    pub fn assemble(&self) -> Result<(InductiveTower, BetaSequence)> {
        let levels = self
            .levels
            .iter()
            .map(|dims| FdCStar::new(dims.clone()))
            .collect::<Result<Vec<_>>>()?;
        if levels.is_empty() {
            return Err(validation!("a tower needs at least one level"));
        }
        let layouts: Vec<EmbeddingLayout> = self.layouts.iter().cloned().map(EmbeddingLayout::new).collect();
        let depth = levels.len() - 1;
        let (traces, kind) = match &self.trace {
            TraceSpec::Uhf => {
                if levels.iter().any(|l| l.num_blocks() != 1) {
                    return Err(validation!("uhf traces need one block per level"));
                }
                let mults = layouts
                    .iter()
                    .map(|l| l.targets()[0].len() as u64 - 1)
                    .collect();
                (
                    vec![TraceWeights::new(vec![1.0])?; depth + 1],
                    TowerKind::Uhf { mults },
                )
            }
            TraceSpec::EffrosShen { theta, digits } => {
                let digits = match digits {
                    Some(d) => d.clone(),
                    None => cf_expand(*theta, depth, DEFAULT_GUARD)?,
                };
                if digits.len() != depth {
                    return Err(validation!("{} digits for a tower of depth {depth}", digits.len()));
                }
                let mut traces = vec![TraceWeights::new(vec![1.0])?];
                for t in effros_shen_weights(&digits, *theta)? {
                    traces.push(TraceWeights::new(vec![t, 1.0 - t])?);
                }
                (traces, TowerKind::EffrosShen { digits, theta: *theta })
            }
            TraceSpec::Cantor => (
                levels
                    .iter()
                    .map(|l| TraceWeights::uniform(l.num_blocks()))
                    .collect::<Result<Vec<_>>>()?,
                TowerKind::Cantor,
            ),
            TraceSpec::Explicit { weights } => (
                weights
                    .iter()
                    .map(|w| TraceWeights::new(w.clone()))
                    .collect::<Result<Vec<_>>>()?,
                TowerKind::Explicit,
            ),
        };
        let tower = InductiveTower::from_parts(levels, layouts, traces, kind)?;
        let beta = match &self.beta {
            BetaSpec::DimPower { k } => BetaSequence::dim_power(&tower, *k)?,
            BetaSpec::UhfPower { k } => {
                if tower.levels().iter().any(|l| l.num_blocks() != 1) {
                    return Err(validation!("uhf-power beta needs one block per level"));
                }
                let values = tower
                    .levels()
                    .iter()
                    .map(|l| (l.block_dims()[0] as f64).powf(-k))
                    .collect();
                BetaSequence::with_rule(values, BetaRule::UhfPower { k: *k })?
            }
            BetaSpec::Cantor { r } => BetaSequence::cantor(*r, depth)?,
            BetaSpec::Explicit { values } => BetaSequence::new(values.clone())?,
        };
        if beta.len() < depth + 1 {
            return Err(validation!("beta has {} values for {} levels", beta.len(), depth + 1));
        }
        Ok((tower, beta))
    }
}

/// Parses, assembles and validates a spec.
pub fn load_tower(text: &str) -> Result<(InductiveTower, BetaSequence)> {
    let (tower, beta) = parse_tower_spec(text)?.assemble()?;
    if let Some(v) = tower.validate().first() {
        return Err(Error::Inconsistent(format!("level {}: {}", v.level, v.detail)));
    }
    Ok((tower, beta))
}
