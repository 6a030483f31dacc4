//! Cantor-set structures: points as bit strings, the coordinate unitaries
//! `u_n = 2 eta_n - 1`, and the exact ultrametric that the Monge-Kantorovich
//! distance must reproduce on the Cantor tower.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::{BlockElement, FdCStar, StateVec};
use crate::cfrac::first_disagreement;
use crate::error::{validation, Error, Result};
use crate::lipnorm::LipData;
use crate::mk::mk_abelian;
use crate::tower::{cantor_tower_with_beta, BetaSequence};

/// A point of `{0,1}^N`, read with the first coordinate most significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CantorPoint {
    bits: Vec<u8>,
}

impl CantorPoint {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(validation!("Cantor coordinates are 0 or 1, got {b}"));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Block index of the cylinder of the first `n` coordinates.
    pub fn index(&self, n: usize) -> Result<usize> {
        if n > self.bits.len() {
            return Err(validation!("point has {} coordinates, need {n}", self.bits.len()));
        }
        Ok(self.bits[..n].iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
    }

    /// Point with the given block index at level `n`.
    pub fn from_index(index: usize, n: usize) -> Self {
        Self {
            bits: (0..n).map(|i| ((index >> (n - 1 - i)) & 1) as u8).collect(),
        }
    }
}

impl FromStr for CantorPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("invalid Cantor coordinate {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }
}

impl fmt::Display for CantorPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// `2 beta(n0)` with `n0` the first coordinate where the points differ, and
/// `0` when they agree on their common span.
pub fn cantor_oracle(x: &CantorPoint, y: &CantorPoint, beta: &BetaSequence) -> Result<f64> {
    beta.require_decreasing()?;
    match first_disagreement(x.bits(), y.bits()) {
        None => Ok(0.0),
        Some(n) if n < beta.len() => Ok(2.0 * beta.get(n)),
        Some(n) => Err(validation!("beta has {} values, the points first differ at {n}", beta.len())),
    }
}

/// `u_n = 2 eta_n - 1` on `{0,1}^N`: `+1` where coordinate `n` is 1.
pub fn u_element(n: usize, level: usize) -> Result<BlockElement> {
    if n >= level {
        return Err(validation!("u_{n} needs level above {n}, got {level}"));
    }
    if level > 20 {
        return Err(validation!("Cantor level {level} is too large"));
    }
    let alg = FdCStar::abelian(1 << level)?;
    let values: Vec<f64> = (0..1usize << level)
        .map(|idx| if (idx >> (level - 1 - n)) & 1 == 1 { 1.0 } else { -1.0 })
        .collect();
    alg.diagonal(&values)
}

/// `prod_{n in F} u_n` on `{0,1}^N`; the unit for empty `F`.
pub fn u_product(indices: &[usize], level: usize) -> Result<BlockElement> {
    let mut out = FdCStar::abelian(1 << level.min(20))?.unit();
    for &n in indices {
        out = out.mul(&u_element(n, level)?)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorCheck {
    pub x: String,
    pub y: String,
    pub level: usize,
    pub first_disagreement: Option<usize>,
    pub mk: f64,
    pub oracle: f64,
    pub gap: f64,
    pub pass: bool,
}

/// Solves the LP between the point evaluations at `x` and `y` on the depth
/// `N` Cantor tower and compares with the ultrametric.
pub fn verify_mk_vs_oracle(
    level: usize,
    beta: &BetaSequence,
    x: &CantorPoint,
    y: &CantorPoint,
    tol: f64,
) -> Result<CantorCheck> {
    beta.require_decreasing()?;
    if x.len() < level || y.len() < level {
        return Err(validation!("points need at least {level} coordinates"));
    }
    let first = first_disagreement(&x.bits()[..level], &y.bits()[..level]);
    if first.is_none() && first_disagreement(x.bits(), y.bits()).is_some() {
        return Err(validation!(
            "points agree on the first {level} coordinates; only the bound 2 beta({level}) applies"
        ));
    }
    let tower = cantor_tower_with_beta(level, beta)?;
    let l = LipData::new(tower, beta.clone())?;
    let phi = StateVec::point(l.top(), x.index(level)?)?;
    let psi = StateVec::point(l.top(), y.index(level)?)?;
    let mk = mk_abelian(&l, &phi, &psi)?.lower;
    let oracle = cantor_oracle(x, y, beta)?;
    let gap = (mk - oracle).abs();
    Ok(CantorCheck {
        x: x.to_string(),
        y: y.to_string(),
        level,
        first_disagreement: first,
        mk,
        oracle,
        gap,
        pass: gap <= tol,
    })
}
