//! Experiment drivers that tabulate bounds as CSV: the UHF Hölder table,
//! Effros-Shen continuity as `theta'` approaches `theta`, and continuity in
//! the Lip weights on the Cantor tower.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::lipnorm::LipData;
use crate::propinquity::{effros_shen_continuity_bound, level_chain_bound, prefix_match_bound, uhf_holder_bound, BoundKind};
use crate::tower::{cantor_tower, uhf_tower, BetaSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderRow {
    pub shared: usize,
    pub k: f64,
    pub prefix_bound: f64,
    pub holder_bound: f64,
    pub dyadic_bound: f64,
}

/// UHF pairs whose multiplicities `base` and `base'` agree before index
/// `N` and differ at `N` (the entry there is incremented), for
/// `N = 1..=max_shared`.
pub fn holder_sweep(base: &[u64], max_shared: usize, ks: &[f64]) -> Result<Vec<HolderRow>> {
    if base.len() <= max_shared {
        return Err(validation!("need at least {} multiplicities", max_shared + 1));
    }
    let mut rows = Vec::new();
    for &k in ks {
        for n in 1..=max_shared {
            let a = &base[..=n];
            let mut b = a.to_vec();
            b[n] += 1;
            let (ta, ba) = uhf_tower(a, n + 1, k)?;
            let (tb, bb) = uhf_tower(&b, n + 1, k)?;
            let prefix = prefix_match_bound(&ta, &ba, &tb, &bb, n);
            if prefix.kind != BoundKind::Prefix {
                return Err(Error::Inconsistent(format!("towers do not share level {n}")));
            }
            rows.push(HolderRow {
                shared: n,
                k,
                prefix_bound: prefix.value,
                holder_bound: uhf_holder_bound(a, &b, k)?.value,
                dyadic_bound: 2.0 * (-(n as f64) * k).exp2(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub m: i32,
    pub theta: f64,
    pub theta2: f64,
    pub gap: f64,
    pub shared_digits: usize,
    pub level: usize,
    pub bound: f64,
    pub bridge: f64,
    pub kind: BoundKind,
}

/// Best chain bound between `theta` and `theta + 10^-m` for each `m`.
pub fn effros_shen_sweep(theta: f64, ms: &[i32], k: f64, h: f64, max_level: usize) -> Result<Vec<ContinuityRow>> {
    ms.iter()
        .map(|&m| {
            let theta2 = theta + 10f64.powi(-m);
            let b = effros_shen_continuity_bound(theta, theta2, k, max_level, h)?;
            Ok(ContinuityRow {
                m,
                theta,
                theta2,
                gap: (theta2 - theta).abs(),
                shared_digits: b.params.get("shared_digits").copied().unwrap_or(0.0) as usize,
                level: b.params.get("level").copied().unwrap_or(0.0) as usize,
                bound: b.value,
                bridge: b.params.get("bridge").copied().unwrap_or(b.value),
                kind: b.kind,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaContinuityRow {
    pub k: u64,
    pub sup_gap: f64,
    pub bound: f64,
    pub bridge: f64,
    pub target: f64,
}

/// Cantor tower of depth `N` with weights `x = beta_r` against
/// `x_k = beta_r (1 - 1/(k+2))`. Both lie below `beta_r` and `x_k -> x`
/// pointwise; each row bounds the distance between the two quantum metric
/// spaces through level `N`.
pub fn beta_continuity_sweep(r: f64, depth: usize, ks: &[u64], h: f64) -> Result<Vec<BetaContinuityRow>> {
    let beta = BetaSequence::cantor(r, depth)?;
    let base = LipData::new(cantor_tower(depth)?, beta.clone())?;
    ks.iter()
        .map(|&k| {
            let factor = 1.0 - 1.0 / (k as f64 + 2.0);
            let xk = BetaSequence::new(beta.values().iter().map(|v| v * factor).collect())?;
            let lk = LipData::new(cantor_tower(depth)?, xk.clone())?;
            let b = level_chain_bound(&base, &lk, depth, h)?;
            let sup_gap = beta
                .values()
                .iter()
                .zip(xk.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(BetaContinuityRow {
                k,
                sup_gap,
                bound: b.value,
                bridge: b.params["bridge"],
                target: 2.0 * beta.get(depth),
            })
        })
        .collect()
}

/// Writes rows as CSV with a header line.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(())
}
