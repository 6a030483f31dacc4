//! Finite truncations of inductive towers `A_0 -> A_1 -> ... -> A_N` of
//! block algebras, with explicit embedding layouts and trace weights.
//!
//! A layout lists, for every target block, the source blocks placed down its
//! diagonal in order. That fixes the embedding exactly, not just up to
//! unitary conjugation, which keeps element-level regression output stable.

use serde::{Deserialize, Serialize};

use crate::algebra::{BlockElement, FdCStar, TraceWeights};
use crate::cfrac::{convergents, CfExpansion};
use crate::error::{shape, validation, Error, Result};
use crate::linalg::ComplexMatrix;

/// Residual allowed in the trace-consistency identity.
pub const CONSISTENCY_TOL: f64 = 1e-10;
/// Largest `q_N` accepted for Effros-Shen towers; keeps the roundoff of
/// `theta` from moving the trace weights by more than about 1e-8.
pub const MAX_EFFROS_SHEN_DENOMINATOR: u64 = 10_000_000;

/// For each target block, the ordered source blocks on its diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingLayout {
    targets: Vec<Vec<usize>>,
}

impl EmbeddingLayout {
    pub fn new(targets: Vec<Vec<usize>>) -> Self {
        Self { targets }
    }

    pub fn targets(&self) -> &[Vec<usize>] {
        &self.targets
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    /// Number of copies of source `i` inside target `j`.
    pub fn multiplicity(&self, j: usize, i: usize) -> usize {
        self.targets[j].iter().filter(|&&s| s == i).count()
    }
}

/// Where a source block lands: `(target block, diagonal offset)`.
pub type Placement = (usize, usize);

/// Placements of every source block, indexed by source block.
pub type Placements = Vec<Vec<Placement>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TowerKind {
    Uhf { mults: Vec<u64> },
    EffrosShen { digits: Vec<u64>, theta: f64 },
    Cantor,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Level 0 is not `C`.
    Level0,
    /// Source dimensions do not fill a target block.
    NonUnital,
    /// A source block is not placed anywhere.
    NonInjective,
    /// `t_i/d_i` disagrees with the pulled-back weights.
    TraceConsistency,
    /// Trace weights are not a faithful state.
    TraceWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub level: usize,
    pub kind: ViolationKind,
    pub detail: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductiveTower {
    levels: Vec<FdCStar>,
    layouts: Vec<EmbeddingLayout>,
    traces: Vec<TraceWeights>,
    kind: TowerKind,
}

impl InductiveTower {
    /// Assembles a tower after shape checks only. Use [`InductiveTower::validate`]
    /// for the structural and trace checks, or [`InductiveTower::new`] to do both.
    pub fn from_parts(
        levels: Vec<FdCStar>,
        layouts: Vec<EmbeddingLayout>,
        traces: Vec<TraceWeights>,
        kind: TowerKind,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(validation!("a tower needs at least one level"));
        }
        if layouts.len() + 1 != levels.len() {
            return Err(shape!(
                "{} levels need {} layouts, got {}",
                levels.len(),
                levels.len() - 1,
                layouts.len()
            ));
        }
        if traces.len() != levels.len() {
            return Err(shape!("{} levels but {} trace weight lists", levels.len(), traces.len()));
        }
        for (n, (lvl, mu)) in levels.iter().zip(&traces).enumerate() {
            if mu.len() != lvl.num_blocks() {
                return Err(shape!(
                    "level {n}: {} trace weights for {} blocks",
                    mu.len(),
                    lvl.num_blocks()
                ));
            }
        }
        for (n, layout) in layouts.iter().enumerate() {
            if layout.num_targets() != levels[n + 1].num_blocks() {
                return Err(shape!(
                    "layout {n}->{}: {} target lists for {} blocks",
                    n + 1,
                    layout.num_targets(),
                    levels[n + 1].num_blocks()
                ));
            }
            let sources = levels[n].num_blocks();
            if let Some(bad) = layout.targets.iter().flatten().find(|&&s| s >= sources) {
                return Err(shape!("layout {n}->{}: source index {bad} out of range", n + 1));
            }
        }
        Ok(Self {
            levels,
            layouts,
            traces,
            kind,
        })
    }

    /// Assembles and validates; any violation is an inconsistency error.
    pub fn new(
        levels: Vec<FdCStar>,
        layouts: Vec<EmbeddingLayout>,
        traces: Vec<TraceWeights>,
        kind: TowerKind,
    ) -> Result<Self> {
        let tower = Self::from_parts(levels, layouts, traces, kind)?;
        let violations = tower.validate();
        if let Some(v) = violations.first() {
            return Err(Error::Inconsistent(format!(
                "{} violation(s); first at level {}: {}",
                violations.len(),
                v.level,
                v.detail
            )));
        }
        Ok(tower)
    }

    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[FdCStar] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &FdCStar {
        &self.levels[n]
    }

    pub fn layouts(&self) -> &[EmbeddingLayout] {
        &self.layouts
    }

    /// Layout of the step `n -> n+1`.
    pub fn layout(&self, n: usize) -> &EmbeddingLayout {
        &self.layouts[n]
    }

    pub fn traces(&self) -> &[TraceWeights] {
        &self.traces
    }

    pub fn trace(&self, n: usize) -> &TraceWeights {
        &self.traces[n]
    }

    pub fn kind(&self) -> &TowerKind {
        &self.kind
    }

    pub fn is_cantor(&self) -> bool {
        self.kind == TowerKind::Cantor
    }

    pub fn is_abelian(&self) -> bool {
        self.levels.iter().all(FdCStar::is_abelian)
    }

    /// The first `n + 1` levels.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.top_level() {
            return Err(validation!("cannot truncate a depth-{} tower at {n}", self.top_level()));
        }
        Ok(Self {
            levels: self.levels[..=n].to_vec(),
            layouts: self.layouts[..n].to_vec(),
            traces: self.traces[..=n].to_vec(),
            kind: self.kind.clone(),
        })
    }

    /// Structural and trace checks; an empty list means the tower is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.levels[0].block_dims() != [1] {
            out.push(Violation {
                level: 0,
                kind: ViolationKind::Level0,
                detail: format!("level 0 has blocks {:?}, expected [1]", self.levels[0].block_dims()),
                residual: f64::NAN,
            });
        }
        for (n, mu) in self.traces.iter().enumerate() {
            let w = mu.weights();
            let sum: f64 = w.iter().sum();
            if w.iter().any(|&t| !(t > 0.0 && t.is_finite())) || (sum - 1.0).abs() > 1e-12 {
                out.push(Violation {
                    level: n,
                    kind: ViolationKind::TraceWeights,
                    detail: format!("weights must be positive and sum to 1 (sum {sum})"),
                    residual: (sum - 1.0).abs(),
                });
            }
        }
        for (n, layout) in self.layouts.iter().enumerate() {
            let src = self.levels[n].block_dims();
            let dst = self.levels[n + 1].block_dims();
            for (j, list) in layout.targets.iter().enumerate() {
                let filled: usize = list.iter().map(|&s| src[s]).sum();
                if filled != dst[j] {
                    out.push(Violation {
                        level: n,
                        kind: ViolationKind::NonUnital,
                        detail: format!(
                            "target block {j} at level {} has size {} but its sources fill {filled}",
                            n + 1,
                            dst[j]
                        ),
                        residual: (filled as f64 - dst[j] as f64).abs(),
                    });
                }
            }
            for i in 0..src.len() {
                if !layout.targets.iter().flatten().any(|&s| s == i) {
                    out.push(Violation {
                        level: n,
                        kind: ViolationKind::NonInjective,
                        detail: format!("source block {i} at level {n} is not embedded"),
                        residual: f64::NAN,
                    });
                }
            }
            let t_src = self.traces[n].weights();
            let t_dst = self.traces[n + 1].weights();
            let mut pulled = vec![0.0; src.len()];
            for (j, list) in layout.targets.iter().enumerate() {
                for &s in list {
                    pulled[s] += t_dst[j] / dst[j] as f64;
                }
            }
            let resid: Vec<f64> = (0..src.len())
                .map(|i| (t_src[i] / src[i] as f64 - pulled[i]).abs())
                .collect();
            let bad: Vec<usize> = (0..src.len()).filter(|&i| resid[i].is_nan() || resid[i] > CONSISTENCY_TOL).collect();
            if !bad.is_empty() {
                out.push(Violation {
                    level: n,
                    kind: ViolationKind::TraceConsistency,
                    detail: format!(
                        "weights at level {n} disagree with those pulled back from level {} in blocks {bad:?}",
                        n + 1
                    ),
                    residual: bad.iter().map(|&i| resid[i]).fold(0.0, f64::max),
                });
            }
        }
        out
    }

    /// Largest trace-consistency residual over all levels.
    pub fn consistency_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (n, layout) in self.layouts.iter().enumerate() {
            let src = self.levels[n].block_dims();
            let dst = self.levels[n + 1].block_dims();
            let mut pulled = vec![0.0; src.len()];
            for (j, list) in layout.targets.iter().enumerate() {
                for &s in list {
                    pulled[s] += self.traces[n + 1].weights()[j] / dst[j] as f64;
                }
            }
            for i in 0..src.len() {
                worst = worst.max((self.traces[n].weights()[i] / src[i] as f64 - pulled[i]).abs());
            }
        }
        worst
    }

    /// Where each block of level `n` lands inside level `m >= n`.
    pub fn placements(&self, n: usize, m: usize) -> Result<Placements> {
        if n > m || m > self.top_level() {
            return Err(validation!(
                "invalid level pair {n} -> {m} for a depth-{} tower",
                self.top_level()
            ));
        }
        let mut current: Placements = (0..self.levels[n].num_blocks())
            .map(|k| vec![(k, 0)])
            .collect();
        for step in n..m {
            let step_pl = self.step_placements(step);
            current = current
                .into_iter()
                .map(|pl| {
                    pl.into_iter()
                        .flat_map(|(j, off)| step_pl[j].iter().map(move |&(jj, o2)| (jj, o2 + off)))
                        .collect()
                })
                .collect();
        }
        Ok(current)
    }

    fn step_placements(&self, n: usize) -> Placements {
        let src = self.levels[n].block_dims();
        let mut out: Placements = vec![Vec::new(); src.len()];
        for (j, list) in self.layouts[n].targets.iter().enumerate() {
            let mut off = 0;
            for &s in list {
                out[s].push((j, off));
                off += src[s];
            }
        }
        out
    }

    /// Image of `a` (at level `n`) in level `m`.
    pub fn embed(&self, a: &BlockElement, n: usize, m: usize) -> Result<BlockElement> {
        if n > self.top_level() || a.parent() != &self.levels[n] {
            return Err(validation!("element does not live at level {n}"));
        }
        let pl = self.placements(n, m)?;
        Ok(embed_with_placements(a, &pl, &self.levels[m]))
    }
}

pub(crate) fn embed_with_placements(a: &BlockElement, pl: &Placements, target: &FdCStar) -> BlockElement {
    let mut blocks: Vec<ComplexMatrix> = target
        .block_dims()
        .iter()
        .map(|&d| ComplexMatrix::zeros(d, d))
        .collect();
    for (k, list) in pl.iter().enumerate() {
        for &(j, off) in list {
            blocks[j].set_diagonal_block(off, a.block(k));
        }
    }
    BlockElement::from_parts_unchecked(target.clone(), blocks)
}

/// How a [`BetaSequence`] was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BetaRule {
    Explicit,
    /// `dim(A_n)^-k`.
    DimPower { k: f64 },
    /// `(prod_{j<n} (mult_j + 1))^-k` for UHF towers.
    UhfPower { k: f64 },
    /// `r^-n / 2` on the Cantor tower.
    CantorRatio { r: f64 },
}

/// Positive weights `beta(0..=N)` for the Lip-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSequence {
    values: Vec<f64>,
    rule: BetaRule,
}

impl BetaSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_rule(values, BetaRule::Explicit)
    }

    pub(crate) fn with_rule(values: Vec<f64>, rule: BetaRule) -> Result<Self> {
        if values.is_empty() {
            return Err(validation!("beta needs at least one value"));
        }
        if values.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
            return Err(validation!("beta values must be positive and finite"));
        }
        Ok(Self { values, rule })
    }

    /// `dim(A_n)^-k` for every level of `tower`.
    pub fn dim_power(tower: &InductiveTower, k: f64) -> Result<Self> {
        check_exponent(k)?;
        let values = tower
            .levels()
            .iter()
            .map(|l| (l.dimension() as f64).powf(-k))
            .collect();
        Self::with_rule(values, BetaRule::DimPower { k })
    }

    /// `beta_r(n) = r^-n / 2` for `n = 0..=depth`.
    pub fn cantor(r: f64, depth: usize) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(validation!("r must be positive, got {r}"));
        }
        let values = (0..=depth).map(|n| 0.5 * r.powi(-(n as i32))).collect();
        Self::with_rule(values, BetaRule::CantorRatio { r })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rule(&self) -> &BetaRule {
        &self.rule
    }

    /// Non-increasing.
    pub fn is_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn require_decreasing(&self) -> Result<()> {
        if self.is_decreasing() {
            Ok(())
        } else {
            Err(validation!("beta must be decreasing"))
        }
    }

    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n >= self.values.len() {
            return Err(validation!("beta has only {} values", self.values.len()));
        }
        Ok(Self {
            values: self.values[..=n].to_vec(),
            rule: self.rule.clone(),
        })
    }

    pub fn min_up_to(&self, n: usize) -> f64 {
        self.values[..=n].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_exponent(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(validation!("exponent k must be positive, got {k}"))
    }
}

/// `prod_{j<n} (mults_j + 1)` for `n = 0..=depth`.
pub fn uhf_box_product(mults: &[u64], depth: usize) -> Result<Vec<u64>> {
    if mults.len() < depth {
        return Err(validation!("need {depth} multiplicity entries, got {}", mults.len()));
    }
    if mults[..depth].contains(&0) {
        return Err(validation!("UHF multiplicity entries must be at least 1"));
    }
    let mut out = vec![1u64];
    for &m in &mults[..depth] {
        let next = out
            .last()
            .and_then(|&d| d.checked_mul(m + 1))
            .ok_or_else(|| validation!("UHF dimensions overflow"))?;
        out.push(next);
    }
    Ok(out)
}

/// UHF tower with block sizes `prod_{j<n}(mults_j + 1)` and Lip weights
/// equal to those sizes raised to `-k`.
pub fn uhf_tower(mults: &[u64], depth: usize, k: f64) -> Result<(InductiveTower, BetaSequence)> {
    check_exponent(k)?;
    let dims = uhf_box_product(mults, depth)?;
    let levels = dims
        .iter()
        .map(|&d| FdCStar::new(vec![d as usize]))
        .collect::<Result<Vec<_>>>()?;
    let layouts = (0..depth)
        .map(|n| EmbeddingLayout::new(vec![vec![0; (mults[n] + 1) as usize]]))
        .collect();
    let traces = vec![TraceWeights::new_unchecked(vec![1.0]); depth + 1];
    let tower = InductiveTower::new(
        levels,
        layouts,
        traces,
        TowerKind::Uhf {
            mults: mults[..depth].to_vec(),
        },
    )?;
    let beta = BetaSequence::with_rule(
        dims.iter().map(|&d| (d as f64).powf(-k)).collect(),
        BetaRule::UhfPower { k },
    )?;
    Ok((tower, beta))
}

/// `s_n = (-1)^n (theta q_n - p_n)`, positive whenever the convergents
/// bracket `theta`. Also returns a bound on its rounding error.
fn signed_gap(theta: f64, cf: &CfExpansion, n: usize) -> (f64, f64) {
    let q = cf.q_f64(n);
    let p = cf.p_f64(n);
    // One rounding: the cancellation in theta q - p stays exact.
    let raw = theta.mul_add(q, -p);
    let s = if n.is_multiple_of(2) { raw } else { -raw };
    (s, 4.0 * f64::EPSILON * (q + p + 1.0))
}

/// Trace weights `t(theta, n)` for `n = 1..=N` of the Effros-Shen tower
/// for `theta` with the given digits.
pub fn effros_shen_weights(digits: &[u64], theta: f64) -> Result<Vec<f64>> {
    if !(theta.is_finite() && theta > 0.0 && theta < 1.0) {
        return Err(validation!("theta must lie in (0,1), got {theta}"));
    }
    let cf = convergents(digits)?;
    let n_top = digits.len();
    match cf.q_u64(n_top) {
        Some(q) if q <= MAX_EFFROS_SHEN_DENOMINATOR => {}
        _ => {
            return Err(Error::Precision(format!(
                "q_{n_top} exceeds {MAX_EFFROS_SHEN_DENOMINATOR}; reduce the depth"
            )))
        }
    }
    let mut gaps = Vec::with_capacity(n_top + 1);
    for n in 0..=n_top {
        let (s, err) = signed_gap(theta, &cf, n);
        if s <= -err {
            return Err(Error::Inconsistent(format!(
                "theta = {theta} lies outside the bracket of convergent {n} ({}/{})",
                cf.p(n),
                cf.q(n)
            )));
        }
        if s <= err {
            return Err(Error::Precision(format!(
                "theta = {theta} is within rounding of convergent {n}"
            )));
        }
        gaps.push(s);
    }
    let mut weights = Vec::with_capacity(n_top);
    for n in 1..=n_top {
        let t = cf.q_f64(n) * gaps[n - 1];
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Precision(format!("t(theta,{n}) = {t} is outside (0,1)")));
        }
        weights.push(t);
    }
    Ok(weights)
}

/// Effros-Shen tower: level `n >= 1` is `M(q_n) + M(q_{n-1})`. Lip weights
/// are `dim(A_n)^-k`, i.e. `(q_n^2 + q_{n-1}^2)^-k`.
pub fn effros_shen_tower(digits: &[u64], theta: f64, k: f64) -> Result<(InductiveTower, BetaSequence)> {
    check_exponent(k)?;
    let weights = effros_shen_weights(digits, theta)?;
    let cf = convergents(digits)?;
    let n_top = digits.len();
    let q = |n: usize| cf.q_u64(n).expect("bounded by the depth guard") as usize;

    let mut levels = vec![FdCStar::scalars()];
    let mut traces = vec![TraceWeights::new_unchecked(vec![1.0])];
    let mut layouts = Vec::with_capacity(n_top);
    for n in 1..=n_top {
        levels.push(FdCStar::new(vec![q(n), q(n - 1)])?);
        let t = weights[n - 1];
        traces.push(TraceWeights::new_unchecked(vec![t, 1.0 - t]));
        let r = digits[n - 1] as usize;
        let layout = if n == 1 {
            vec![vec![0; r], vec![0]]
        } else {
            let mut first = vec![0; r];
            first.push(1);
            vec![first, vec![0]]
        };
        layouts.push(EmbeddingLayout::new(layout));
    }
    let tower = InductiveTower::new(
        levels,
        layouts,
        traces,
        TowerKind::EffrosShen {
            digits: digits.to_vec(),
            theta,
        },
    )?;
    let beta = BetaSequence::dim_power(&tower, k)?;
    Ok((tower, beta))
}

/// Cantor tower: level `n` is `C^(2^n)`, functions on `{0,1}^n`, with the
/// first coordinate as the most significant bit of the block index.
pub fn cantor_tower(depth: usize) -> Result<InductiveTower> {
    if depth > 20 {
        return Err(validation!("Cantor depth {depth} is too large"));
    }
    let levels = (0..=depth)
        .map(|n| FdCStar::abelian(1 << n))
        .collect::<Result<Vec<_>>>()?;
    let layouts = (0..depth)
        .map(|n| EmbeddingLayout::new((0..1usize << (n + 1)).map(|j| vec![j >> 1]).collect()))
        .collect();
    let traces = (0..=depth)
        .map(|n| TraceWeights::uniform(1 << n))
        .collect::<Result<Vec<_>>>()?;
    InductiveTower::new(levels, layouts, traces, TowerKind::Cantor)
}

/// Cantor tower paired with `beta`, which must cover every level.
pub fn cantor_tower_with_beta(depth: usize, beta: &BetaSequence) -> Result<InductiveTower> {
    if beta.len() < depth + 1 {
        return Err(validation!("beta has {} values, need {}", beta.len(), depth + 1));
    }
    cantor_tower(depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{cstar_norm, trace_eval};
    use crate::random::random_element;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PHI: f64 = 0.618_033_988_749_894_9;

    fn dims(t: &InductiveTower) -> Vec<Vec<usize>> {
        t.levels().iter().map(|l| l.block_dims().to_vec()).collect()
    }

    #[test]
    fn car_tower() {
        let (t, beta) = uhf_tower(&[1, 1, 1], 3, 1.0).unwrap();
        assert_eq!(dims(&t), vec![vec![1], vec![2], vec![4], vec![8]]);
        assert_eq!(beta.values(), &[1.0, 0.5, 0.25, 0.125]);
        let (t2, _) = uhf_tower(&[2, 3], 2, 1.0).unwrap();
        assert_eq!(dims(&t2), vec![vec![1], vec![3], vec![12]]);
        assert!(uhf_tower(&[1, 0], 2, 1.0).is_err());
    }

    #[test]
    fn uhf_minimal_projection_trace() {
        let (t, _) = uhf_tower(&[1, 2, 1], 3, 1.0).unwrap();
        for n in 0..=3 {
            let e = t.level(n).matrix_unit(0, 0, 0).unwrap();
            let v = trace_eval(t.trace(n), &e).unwrap().re;
            assert!((v - 1.0 / t.level(n).block_dims()[0] as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn effros_shen_golden_ratio() {
        let (t, beta) = effros_shen_tower(&[1, 1, 1, 1], PHI, 1.0).unwrap();
        assert_eq!(dims(&t), vec![vec![1], vec![1, 1], vec![2, 1], vec![3, 2], vec![5, 3]]);
        let t1 = t.trace(1).weights()[0];
        assert!((t1 - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        let t2 = t.trace(2).weights()[0];
        assert!((t2 - 2.0 * (1.0 - PHI)).abs() < 1e-12);
        assert!((t2 / 2.0 + (1.0 - t2) - t1).abs() < 1e-12);
        assert!((beta.get(4) - 1.0 / 34.0).abs() < 1e-15);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn effros_shen_level_one_to_two_embedding() {
        let (t, _) = effros_shen_tower(&[1, 1, 1], PHI, 1.0).unwrap();
        let alg1 = t.level(1);
        let a = BlockElement::new(
            alg1,
            vec![ComplexMatrix::from_real(1, 1, &[3.0]).unwrap(), ComplexMatrix::from_real(1, 1, &[-2.0]).unwrap()],
        )
        .unwrap();
        let img = t.embed(&a, 1, 2).unwrap();
        assert_eq!(img.block(0), &ComplexMatrix::diag_real(&[3.0, -2.0]));
        assert_eq!(img.block(1), &ComplexMatrix::diag_real(&[3.0]));
    }

    #[test]
    fn effros_shen_rejects_inconsistent_theta() {
        // Digits of the golden ratio with theta = 0.3, whose first digit is 3.
        assert!(matches!(
            effros_shen_tower(&[1, 1, 1], 0.3, 1.0),
            Err(Error::Inconsistent(_))
        ));
        // Too deep for the precision guard.
        assert!(matches!(
            effros_shen_tower(&[1; 40], PHI, 1.0),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn effros_shen_random_theta_depth_8() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut seen = 0;
        while seen < 20 {
            let theta: f64 = rand::Rng::random_range(&mut rng, 0.01..0.99);
            let Ok(digits) = crate::cfrac::cf_expand(theta, 8, crate::cfrac::DEFAULT_GUARD) else {
                continue;
            };
            let Ok((t, _)) = effros_shen_tower(&digits, theta, 1.0) else {
                continue;
            };
            for n in 1..=8 {
                let w = t.trace(n).weights()[0];
                assert!(w > 0.0 && w < 1.0);
            }
            assert!(t.consistency_residual() <= 1e-9);
            seen += 1;
        }
    }

    #[test]
    fn cantor_structure() {
        let t = cantor_tower(3).unwrap();
        assert_eq!(
            t.levels().iter().map(|l| l.num_blocks()).collect::<Vec<_>>(),
            vec![1, 2, 4, 8]
        );
        for n in 0..=3 {
            assert!(t.trace(n).weights().iter().all(|&w| w == (-(n as f64)).exp2()));
        }
        for n in 0..3 {
            for i in 0..t.level(n).num_blocks() {
                let copies: usize = (0..t.level(n + 1).num_blocks())
                    .map(|j| t.layout(n).multiplicity(j, i))
                    .sum();
                assert_eq!(copies, 2);
            }
        }
        let beta = BetaSequence::cantor(2.0, 3).unwrap();
        assert!(cantor_tower_with_beta(4, &beta).is_err());
    }

    #[test]
    fn corrupted_trace_gives_one_violation() {
        let (t, _) = effros_shen_tower(&[1, 1, 1], PHI, 1.0).unwrap();
        let mut traces = t.traces().to_vec();
        let w = traces[3].weights()[0] + 1e-6;
        traces[3] = TraceWeights::new_unchecked(vec![w, 1.0 - w]);
        let bad = InductiveTower::from_parts(t.levels().to_vec(), t.layouts().to_vec(), traces, TowerKind::Explicit)
            .unwrap();
        let v = bad.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::TraceConsistency);
        assert_eq!(v[0].level, 2);
        assert!(matches!(
            InductiveTower::new(bad.levels().to_vec(), bad.layouts().to_vec(), bad.traces().to_vec(), TowerKind::Explicit),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn structural_violations() {
        let levels = vec![FdCStar::scalars(), FdCStar::new(vec![2, 1]).unwrap()];
        let non_unital = EmbeddingLayout::new(vec![vec![0], vec![0]]);
        let traces = vec![
            TraceWeights::new_unchecked(vec![1.0]),
            TraceWeights::new_unchecked(vec![0.5, 0.5]),
        ];
        let t = InductiveTower::from_parts(levels.clone(), vec![non_unital], traces.clone(), TowerKind::Explicit)
            .unwrap();
        assert!(t.validate().iter().any(|v| v.kind == ViolationKind::NonUnital));

        let levels2 = vec![FdCStar::scalars(), FdCStar::new(vec![1, 1]).unwrap(), FdCStar::new(vec![2]).unwrap()];
        let layouts = vec![
            EmbeddingLayout::new(vec![vec![0], vec![0]]),
            EmbeddingLayout::new(vec![vec![0, 0]]),
        ];
        let traces2 = vec![
            TraceWeights::new_unchecked(vec![1.0]),
            TraceWeights::new_unchecked(vec![0.5, 0.5]),
            TraceWeights::new_unchecked(vec![1.0]),
        ];
        let t = InductiveTower::from_parts(levels2, layouts, traces2, TowerKind::Explicit).unwrap();
        assert!(t.validate().iter().any(|v| v.kind == ViolationKind::NonInjective));
        assert!(InductiveTower::from_parts(levels, vec![], traces, TowerKind::Explicit).is_err());
    }

    #[test]
    fn effros_shen_depth_8_consistency() {
        let (t, _) = effros_shen_tower(&[1; 8], PHI, 1.0).unwrap();
        assert!(t.consistency_residual() <= 1e-10);
    }

    #[test]
    fn embedding_composes() {
        let (t, _) = effros_shen_tower(&[2, 1, 3], 0.4, 1.0).unwrap_or_else(|_| {
            let th = 1.0 / (2.0 + 1.0 / (1.0 + 1.0 / (3.0 + PHI)));
            effros_shen_tower(&[2, 1, 3], th, 1.0).unwrap()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_element(&mut rng, t.level(1));
        let direct = t.embed(&a, 1, 3).unwrap();
        let stepwise = t.embed(&t.embed(&a, 1, 2).unwrap(), 2, 3).unwrap();
        assert_eq!(direct, stepwise);
        assert_eq!(t.embed(&t.level(1).unit(), 1, 3).unwrap(), t.level(3).unit());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn embedding_is_a_unital_isometric_star_morphism(seed in any::<u64>()) {
            let (t, _) = effros_shen_tower(&[1, 2, 1], 1.0 / (1.0 + 1.0 / (2.0 + 1.0 / (1.0 + PHI))), 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_element(&mut rng, t.level(1));
            let b = random_element(&mut rng, t.level(1));
            let ea = t.embed(&a, 1, 3).unwrap();
            let eb = t.embed(&b, 1, 3).unwrap();
            let prod = t.embed(&a.mul(&b).unwrap(), 1, 3).unwrap();
            prop_assert!(prod.max_abs_diff(&ea.mul(&eb).unwrap()) <= 1e-10);
            prop_assert!(t.embed(&a.adjoint(), 1, 3).unwrap().max_abs_diff(&ea.adjoint()) <= 1e-15);
            prop_assert!((cstar_norm(&ea) - cstar_norm(&a)).abs() <= 1e-12 * (1.0 + cstar_norm(&a)));
            let mu3 = trace_eval(t.trace(3), &ea).unwrap();
            let mu1 = trace_eval(t.trace(1), &a).unwrap();
            prop_assert!((mu3 - mu1).norm() <= 1e-10);
        }

        #[test]
        fn box_product_dominates_powers_of_two(mults in proptest::collection::vec(1u64..5, 1..8)) {
            let d = uhf_box_product(&mults, mults.len()).unwrap();
            for (n, &x) in d.iter().enumerate() {
                prop_assert!(x >= 1u64 << n);
            }
        }
    }
}
