//! Certified upper bounds on the quantum propinquity between towers and
//! their truncations.
//!
//! Every bound is the length of an explicit bridge, combined through the
//! triangle inequality. Nothing here approximates the propinquity itself.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{BlockElement, FdCStar};
use crate::cfrac::{baire_distance, cf_expand, convergents, first_disagreement, BaireDistance, DEFAULT_GUARD};
use crate::error::{shape, validation, Error, Result};
use crate::linalg::{hermitian_norm, ComplexMatrix, C64};
use crate::lipnorm::{LinearLip, LipData};
use crate::tower::{effros_shen_tower, BetaSequence, InductiveTower};

/// Cap on the number of sphere points evaluated by the grid certificate.
pub const MAX_GRID_POINTS: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Truncation,
    Prefix,
    TwoLipnormGrid,
    /// Analytic estimate of `|L1 - L2|` for towers with identical shape.
    Perturbation,
    Holder,
    EffrosShenChain,
    Diameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeBound {
    pub value: f64,
    pub kind: BoundKind,
    pub certified: bool,
    pub notes: Vec<String>,
    pub params: BTreeMap<String, f64>,
}

impl BridgeBound {
    fn new(value: f64, kind: BoundKind) -> Self {
        Self {
            value,
            kind,
            certified: true,
            notes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }
}

/// Distance from the tower to its level-`n` truncation: `beta(n)`.
pub fn truncation_bound(l: &LipData, n: usize) -> Result<BridgeBound> {
    if n > l.top_level() {
        return Err(validation!("level {n} is above the top level {}", l.top_level()));
    }
    Ok(BridgeBound::new(l.beta().get(n), BoundKind::Truncation).param("level", n as f64))
}

fn diameter_bound(a: &LipData, b: &LipData) -> BridgeBound {
    BridgeBound::new(a.beta().get(0).max(b.beta().get(0)), BoundKind::Diameter)
}

/// True when levels, layouts, traces and beta agree bit for bit up to `n`.
pub fn shares_prefix(ta: &InductiveTower, ba: &BetaSequence, tb: &InductiveTower, bb: &BetaSequence, n: usize) -> bool {
    if n > ta.top_level() || n > tb.top_level() || n >= ba.len() || n >= bb.len() {
        return false;
    }
    (0..=n).all(|m| {
        let same_trace = ta
            .trace(m)
            .weights()
            .iter()
            .zip(tb.trace(m).weights())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        ta.level(m) == tb.level(m)
            && same_trace
            && ba.get(m).to_bits() == bb.get(m).to_bits()
            && (m == n || ta.layout(m) == tb.layout(m))
    })
}

/// `betaA(n) + betaB(n)` when the two towers coincide up to level `n`,
/// otherwise the diameter bound `max(betaA(0), betaB(0))`.
pub fn prefix_match_bound(
    ta: &InductiveTower,
    ba: &BetaSequence,
    tb: &InductiveTower,
    bb: &BetaSequence,
    n: usize,
) -> BridgeBound {
    if shares_prefix(ta, ba, tb, bb, n) {
        BridgeBound::new(ba.get(n) + bb.get(n), BoundKind::Prefix).param("level", n as f64)
    } else {
        BridgeBound::new(ba.get(0).max(bb.get(0)), BoundKind::Diameter)
            .param("level", n as f64)
            .note(format!("towers differ at or below level {n}"))
    }
}

/// `2 d(beta, eta)^k` for UHF multiplicity sequences.
pub fn uhf_holder_bound(beta: &[u64], eta: &[u64], k: f64) -> Result<BridgeBound> {
    if beta.iter().chain(eta).any(|&v| v == 0) {
        return Err(validation!("UHF multiplicities must be at least 1"));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(validation!("k must be positive, got {k}"));
    }
    let out = match baire_distance(beta, eta) {
        BaireDistance::Exact(d) => BridgeBound::new(2.0 * d.powf(k), BoundKind::Holder).param("distance", d),
        BaireDistance::Undetermined { span, upper } => BridgeBound::new(2.0 * upper.powf(k), BoundKind::Holder)
            .param("distance_upper", upper)
            .param("undetermined", 1.0)
            .note(format!("sequences agree on the witnessed span of {span} entries")),
    };
    Ok(out.param("k", k))
}

/// HS-orthonormal basis of the `mu`-traceless self-adjoint elements of the
/// top level of `l`.
pub fn traceless_basis(l: &LipData) -> Vec<BlockElement> {
    let top = l.top();
    let dims = top.block_dims();
    let t = l.tower().trace(l.top_level()).weights();
    let mut out = Vec::new();

    // Diagonal part: complement of z = (t_J / d_J) in R^(sum d_J).
    let slots: Vec<(usize, usize)> = dims
        .iter()
        .enumerate()
        .flat_map(|(k, &d)| (0..d).map(move |i| (k, i)))
        .collect();
    let z: Vec<f64> = slots.iter().map(|&(k, _)| t[k] / dims[k] as f64).collect();
    let mut ortho: Vec<Vec<f64>> = vec![normalize(z)];
    for s in 0..slots.len() {
        let mut v = vec![0.0; slots.len()];
        v[s] = 1.0;
        for _ in 0..2 {
            for u in &ortho {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
            }
        }
        if v.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-8 {
            ortho.push(normalize(v));
        }
    }
    for v in ortho.into_iter().skip(1) {
        let mut e = top.zero();
        for (&(k, i), &c) in slots.iter().zip(&v) {
            e.blocks_mut()[k][(i, i)] = C64::new(c, 0.0);
        }
        out.push(e);
    }

    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (k, &d) in dims.iter().enumerate() {
        for i in 0..d {
            for j in i + 1..d {
                let mut re = top.zero();
                re.blocks_mut()[k][(i, j)] = C64::new(r, 0.0);
                re.blocks_mut()[k][(j, i)] = C64::new(r, 0.0);
                out.push(re);
                let mut im = top.zero();
                im.blocks_mut()[k][(i, j)] = C64::new(0.0, r);
                im.blocks_mut()[k][(j, i)] = C64::new(0.0, -r);
                out.push(im);
            }
        }
    }
    out
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn same_top(l1: &LipData, l2: &LipData) -> Result<()> {
    if l1.top() != l2.top() {
        return Err(shape!(
            "the two Lip-norms live on {:?} and {:?}",
            l1.top().block_dims(),
            l2.top().block_dims()
        ));
    }
    Ok(())
}

struct GridEval<'a> {
    top: &'a FdCStar,
    basis: Vec<Vec<ComplexMatrix>>,
    lin1: LinearLip,
    lin2: LinearLip,
}

impl GridEval<'_> {
    fn norm(&self, x: &[f64]) -> f64 {
        let mut blocks: Vec<ComplexMatrix> = self
            .top
            .block_dims()
            .iter()
            .map(|&d| ComplexMatrix::zeros(d, d))
            .collect();
        for (b, &c) in self.basis.iter().zip(x) {
            for (dst, src) in blocks.iter_mut().zip(b) {
                for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                    *d += s * c;
                }
            }
        }
        blocks.iter().map(hermitian_norm).fold(0.0, f64::max)
    }

    /// Pointwise certificate around one grid point; `None` when a
    /// denominator is not provably positive.
    fn local_bound(&self, x: &[f64], h: f64, k1: f64, k2: f64) -> Option<f64> {
        let a = self.lin1.eval(x);
        let b = self.lin2.eval(x);
        let d1 = a - k1 * h;
        let d2 = b - k2 * h;
        if d1 <= 0.0 || d2 <= 0.0 {
            return None;
        }
        Some((self.norm(x) + h) * ((a - b).abs() + (k1 + k2) * h) / (d1 * d2))
    }

    /// Max of the local bound over the faces `x_i = 1` of the cube, with
    /// `m + 1` points per edge.
    fn sweep(&self, m: usize, h: f64, k1: f64, k2: f64) -> Option<f64> {
        let dim = self.basis.len();
        let per_face = (m + 1).pow(dim as u32 - 1);
        (0..dim * per_face)
            .into_par_iter()
            .map(|idx| {
                let face = idx / per_face;
                let mut rest = idx % per_face;
                let mut x = vec![0.0; dim];
                for (j, xj) in x.iter_mut().enumerate() {
                    if j == face {
                        *xj = 1.0;
                    } else {
                        *xj = -1.0 + 2.0 * (rest % (m + 1)) as f64 / m as f64;
                        rest /= m + 1;
                    }
                }
                self.local_bound(&x, h, k1, k2)
            })
            .reduce(|| Some(0.0), |a, b| Some(a?.max(b?)))
    }
}

/// Grid certificate for the bridge between `(A, L1)` and `(A, L2)` whose
/// pivot is the unit.
///
/// The bridge length is `sup |1/L1(u) - 1/L2(u)| ||u||` over nonzero
/// traceless `u`. The sup is taken over the cube faces `x_i = 1` in
/// HS-orthonormal coordinates, on dyadic grids refined until the covering
/// radius `sqrt(D - 1)/M` drops below `h`. Each grid point certifies a
/// neighbourhood through the Lipschitz constants of `L1` and `L2`.
pub fn two_lipnorm_grid_bound(l1: &LipData, l2: &LipData, h: f64) -> Result<BridgeBound> {
    same_top(l1, l2)?;
    if !(h.is_finite() && h > 0.0) {
        return Err(validation!("grid resolution must be positive, got {h}"));
    }
    let dim = l1.top().real_sa_dimension() - 1;
    if dim == 0 || l1.top_level() == 0 {
        return Ok(BridgeBound::new(0.0, BoundKind::TwoLipnormGrid).param("h", h));
    }
    let mut m = 1usize;
    while ((dim - 1) as f64).sqrt() / (m as f64) > h {
        m *= 2;
    }
    let required = dim as f64 * ((m + 1) as f64).powi(dim as i32 - 1);
    if required > MAX_GRID_POINTS {
        return Err(Error::Budget {
            reason: format!("grid over a {dim}-dimensional sphere at h = {h} needs {m} steps per edge"),
            required,
            cap: MAX_GRID_POINTS,
        });
    }
    let basis = traceless_basis(l1);
    let eval = GridEval {
        top: l1.top(),
        lin1: LinearLip::new(l1, &basis)?,
        lin2: LinearLip::new(l2, &basis)?,
        basis: basis.into_iter().map(BlockElement::into_blocks).collect(),
    };
    let (k1, k2) = (l1.lipschitz_constant(), l2.lipschitz_constant());
    let mut best: Option<f64> = None;
    let mut points = 0.0;
    let mut step = 1usize;
    loop {
        let h_eff = ((dim - 1) as f64).sqrt() / step as f64;
        points += dim as f64 * ((step + 1) as f64).powi(dim as i32 - 1);
        if let Some(v) = eval.sweep(step, h_eff, k1, k2) {
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
        if step >= m {
            break;
        }
        step *= 2;
    }
    let h_eff = ((dim - 1) as f64).sqrt() / m as f64;
    let diameter = diameter_bound(l1, l2);
    let out = match best {
        Some(v) if v < diameter.value => BridgeBound::new(v, BoundKind::TwoLipnormGrid),
        Some(v) => diameter.param("grid_value", v).note("grid value above the diameter bound"),
        None => diameter.note("grid inconclusive: refine grid"),
    };
    Ok(out
        .param("h", h)
        .param("covering_radius", h_eff)
        .param("steps", m as f64)
        .param("points", points)
        .param("dimension", dim as f64)
        .param("k1", k1)
        .param("k2", k2))
}

/// Analytic certificate for two towers with the same levels and layouts
/// that differ only in trace weights and beta.
///
/// With `delta_n` the largest l1 gap between the averaging weights of the
/// two expectations onto level `n`, `|L1(u) - L2(u)| <= D ||u||` where
/// `D = max_n min(delta_n/beta1(n), delta_n/beta2(n)) + 2|1/beta1(n) - 1/beta2(n)|`,
/// while `L1(u) >= ||u||/beta1(0)` and
/// `L2(u) >= (1 - sum_J |t1_J - t2_J|) ||u|| / beta2(0)` on traceless `u`.
pub fn perturbation_bridge_bound(l1: &LipData, l2: &LipData) -> Result<BridgeBound> {
    same_top(l1, l2)?;
    let (t1, t2) = (l1.tower(), l2.tower());
    if t1.levels() != t2.levels() || t1.layouts() != t2.layouts() {
        return Err(validation!("the perturbation certificate needs identical levels and layouts"));
    }
    let top = l1.top_level();
    if top == 0 {
        return Ok(BridgeBound::new(0.0, BoundKind::Perturbation));
    }
    let mut d_an = 0.0f64;
    let mut delta_max = 0.0f64;
    for n in 0..top {
        let w1 = l1.expectation(n).copy_weights();
        let w2 = l2.expectation(n).copy_weights();
        let mut delta = 0.0f64;
        for (a, b) in w1.iter().zip(&w2) {
            let mut gap: f64 = a
                .iter()
                .map(|&(j, w)| (w - b.iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)).abs())
                .sum();
            gap += b
                .iter()
                .filter(|e| !a.iter().any(|f| f.0 == e.0))
                .map(|e| e.1.abs())
                .sum::<f64>();
            delta = delta.max(gap);
        }
        let (b1, b2) = (l1.beta().get(n), l2.beta().get(n));
        let term = (delta / b1).min(delta / b2) + 2.0 * (1.0 / b1 - 1.0 / b2).abs();
        d_an = d_an.max(term);
        delta_max = delta_max.max(delta);
    }
    let trace_gap: f64 = t1
        .trace(top)
        .weights()
        .iter()
        .zip(t2.trace(top).weights())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let m1 = 1.0 / l1.beta().get(0);
    let m2 = (1.0 - trace_gap) / l2.beta().get(0);
    let out = if m2 > 0.0 {
        BridgeBound::new(d_an / (m1 * m2), BoundKind::Perturbation)
    } else {
        diameter_bound(l1, l2).note("trace weights too far apart for the perturbation certificate")
    };
    Ok(out
        .param("lip_gap", d_an)
        .param("delta", delta_max)
        .param("trace_gap", trace_gap)
        .param("m1", m1)
        .param("m2", m2))
}

/// Best available certificate for the unit-pivot bridge between two
/// Lip-norms on one algebra: the smaller of the grid and perturbation
/// certificates, never above the diameter bound.
pub fn two_lipnorm_bridge_bound(l1: &LipData, l2: &LipData, h: f64) -> Result<BridgeBound> {
    same_top(l1, l2)?;
    let mut best = diameter_bound(l1, l2);
    let mut notes = Vec::new();
    let mut params = BTreeMap::new();
    match two_lipnorm_grid_bound(l1, l2, h) {
        Ok(g) => {
            params.insert("grid_value".to_string(), g.value);
            if g.value < best.value {
                best = g;
            }
        }
        Err(e @ Error::Budget { .. }) => notes.push(format!("grid skipped: {e}")),
        Err(e) => return Err(e),
    }
    if let Ok(p) = perturbation_bridge_bound(l1, l2) {
        params.insert("perturbation_value".to_string(), p.value);
        if p.value < best.value {
            best = p;
        }
    }
    best.notes.extend(notes);
    best.params.extend(params);
    Ok(best)
}

/// `betaA(n) + betaB(n)` plus the bridge between the two level-`n`
/// truncations.
pub fn level_chain_bound(a: &LipData, b: &LipData, n: usize, h: f64) -> Result<BridgeBound> {
    if n > a.top_level() || n > b.top_level() {
        return Err(validation!("level {n} exceeds a top level"));
    }
    let ta = LipData::truncated(a.tower(), a.beta(), n)?;
    let tb = LipData::truncated(b.tower(), b.beta(), n)?;
    let universal = a.beta().get(n) + b.beta().get(n);
    let mut out = if shares_prefix(a.tower(), a.beta(), b.tower(), b.beta(), n) {
        BridgeBound::new(0.0, BoundKind::Prefix)
    } else {
        two_lipnorm_bridge_bound(&ta, &tb, h)?
    };
    let term = out.value;
    out.value += universal;
    out.params.insert("level".to_string(), n as f64);
    out.params.insert("universal".to_string(), universal);
    out.params.insert("bridge".to_string(), term);
    Ok(out)
}

/// Fibonacci denominators `q_n` of the golden ratio.
fn fibonacci_q(n: usize) -> f64 {
    let (mut a, mut b) = (1.0f64, 1.0f64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

/// Chain bound between the Effros-Shen towers of `theta` and `theta2` at
/// level `n`; the continued fractions must agree on the first `n` digits.
pub fn effros_shen_chain_bound(theta: f64, theta2: f64, k: f64, n: usize, h: f64) -> Result<BridgeBound> {
    if n == 0 {
        return Err(validation!("the chain needs a level n >= 1"));
    }
    let d1 = cf_expand(theta, n, DEFAULT_GUARD)?;
    let d2 = cf_expand(theta2, n, DEFAULT_GUARD)?;
    if let Some(i) = first_disagreement(&d1, &d2) {
        return Err(Error::Inconsistent(format!(
            "continued fractions differ at digit {}; use the diameter bound",
            i + 1
        )));
    }
    let (ta, ba) = effros_shen_tower(&d1, theta, k)?;
    let (tb, bb) = effros_shen_tower(&d2, theta2, k)?;
    let la = LipData::new(ta, ba)?;
    let lb = LipData::new(tb, bb)?;
    let mut out = level_chain_bound(&la, &lb, n, h)?;
    let bridge_kind = out.kind;
    out.kind = BoundKind::EffrosShenChain;
    let floor = 2.0 / (fibonacci_q(n).powi(2) + fibonacci_q(n - 1).powi(2)).powf(k);
    out.params.insert("fibonacci_floor".to_string(), floor);
    out.params.insert("k".to_string(), k);
    out.params.insert("h".to_string(), h);
    out.params.insert("q_n".to_string(), convergents(&d1)?.q_f64(n));
    Ok(out.note(format!("bridge term from {bridge_kind:?} certificate")))
}

/// Number of leading continued-fraction digits shared by two reals, up to
/// `max_depth`, together with the digits.
pub fn shared_digits(theta: f64, theta2: f64, max_depth: usize) -> Result<Vec<u64>> {
    let mut depth = max_depth;
    loop {
        match (cf_expand(theta, depth, DEFAULT_GUARD), cf_expand(theta2, depth, DEFAULT_GUARD)) {
            (Ok(a), Ok(b)) => {
                let n = first_disagreement(&a, &b).unwrap_or(depth);
                return Ok(a[..n].to_vec());
            }
            (Err(e), _) | (_, Err(e)) if !e.is_numerical() || depth == 0 => return Err(e),
            _ => depth -= 1,
        }
    }
}

/// Best chain bound over the levels `1..=min(shared prefix, max_level)`
/// whose towers stay within the denominator guard; the diameter bound `1`
/// when no digit is shared.
pub fn effros_shen_continuity_bound(theta: f64, theta2: f64, k: f64, max_level: usize, h: f64) -> Result<BridgeBound> {
    let shared = shared_digits(theta, theta2, max_level)?;
    let mut best = BridgeBound::new(1.0, BoundKind::Diameter).note("no usable shared prefix");
    for n in 1..=shared.len() {
        match effros_shen_chain_bound(theta, theta2, k, n, h) {
            Ok(b) if b.value < best.value => best = b,
            Ok(_) => {}
            Err(e) if e.is_numerical() => break,
            Err(e) => return Err(e),
        }
    }
    best.params.insert("shared_digits".to_string(), shared.len() as f64);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::TraceWeights;
    use crate::lipnorm::combine;
    use crate::tower::{cantor_tower, uhf_tower, EmbeddingLayout, TowerKind};
    use proptest::prelude::*;

    const PHI: f64 = 0.618_033_988_749_894_9;

    fn m2_lip(beta: Vec<f64>) -> LipData {
        let t = InductiveTower::new(
            vec![FdCStar::scalars(), FdCStar::new(vec![2]).unwrap()],
            vec![EmbeddingLayout::new(vec![vec![0, 0]])],
            vec![TraceWeights::new(vec![1.0]).unwrap(), TraceWeights::new(vec![1.0]).unwrap()],
            TowerKind::Explicit,
        )
        .unwrap();
        LipData::new(t, BetaSequence::new(beta).unwrap()).unwrap()
    }

    fn es_lip(digits: &[u64], theta: f64) -> LipData {
        let (t, b) = effros_shen_tower(digits, theta, 1.0).unwrap();
        LipData::new(t, b).unwrap()
    }

    #[test]
    fn truncation_examples() {
        let (t, b) = uhf_tower(&[1, 1, 1, 1], 4, 1.0).unwrap();
        let l = LipData::new(t, b).unwrap();
        for n in 0..=4 {
            assert_eq!(truncation_bound(&l, n).unwrap().value, (-(n as f64)).exp2());
        }
        assert!(truncation_bound(&l, 5).is_err());
        let l = es_lip(&[1, 1, 1, 1], PHI);
        // q_4 = 5, q_3 = 3.
        assert!((truncation_bound(&l, 4).unwrap().value - 1.0 / 34.0).abs() < 1e-15);
    }

    #[test]
    fn holder_examples() {
        let b = uhf_holder_bound(&[1, 1, 2, 5], &[1, 1, 2, 7], 1.0).unwrap();
        assert_eq!(b.value, 0.25);
        assert_eq!(uhf_holder_bound(&[1, 1, 2, 5], &[1, 1, 2, 7], 2.0).unwrap().value, 0.03125);
        assert_eq!(uhf_holder_bound(&[3, 1], &[3, 1], 1.0).unwrap().value, 0.0);
        let u = uhf_holder_bound(&[3, 1], &[3, 1, 4], 1.0).unwrap();
        assert_eq!(u.value, 0.5);
        assert_eq!(u.params["undetermined"], 1.0);
        assert!(uhf_holder_bound(&[0], &[1], 1.0).is_err());
    }

    #[test]
    fn prefix_examples() {
        for k in [1.0, 2.0] {
            let (ta, ba) = uhf_tower(&[1, 1, 2, 1], 4, k).unwrap();
            let (tb, bb) = uhf_tower(&[1, 1, 3, 1], 4, k).unwrap();
            let p = prefix_match_bound(&ta, &ba, &tb, &bb, 2);
            assert_eq!(p.kind, BoundKind::Prefix);
            assert_eq!(p.value, 2.0 * 4f64.powf(-k));
            let h = uhf_holder_bound(&[1, 1, 2, 1], &[1, 1, 3, 1], k).unwrap();
            assert!(p.value <= h.value);
            let f = prefix_match_bound(&ta, &ba, &tb, &bb, 3);
            assert_eq!((f.kind, f.value), (BoundKind::Diameter, 1.0));
            let same = prefix_match_bound(&ta, &ba, &ta, &ba, 4);
            assert_eq!(same.value, 2.0 * ba.get(4));
        }
    }

    #[test]
    fn traceless_basis_is_orthonormal_and_traceless() {
        let l = es_lip(&[2, 1], 0.4);
        let basis = traceless_basis(&l);
        assert_eq!(basis.len(), l.top().real_sa_dimension() - 1);
        let mu = l.tower().trace(2);
        for (i, a) in basis.iter().enumerate() {
            assert!(crate::algebra::trace_eval(mu, a).unwrap().norm() < 1e-14);
            for (j, b) in basis.iter().enumerate() {
                let hs: f64 = a
                    .blocks()
                    .iter()
                    .zip(b.blocks())
                    .map(|(x, y)| x.matmul(y).unwrap().trace().re)
                    .sum();
                assert!((hs - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_norms_give_shrinking_grid_term() {
        let l = m2_lip(vec![1.0, 1.0]);
        let mut prev = f64::INFINITY;
        for h in [0.2, 0.1, 0.05] {
            let b = two_lipnorm_grid_bound(&l, &l, h).unwrap();
            assert!(b.value <= prev);
            prev = b.value;
        }
        assert!(prev < 0.5);
        assert_eq!(two_lipnorm_grid_bound(&l, &l, 0.05).unwrap().kind, BoundKind::TwoLipnormGrid);
        assert_eq!(perturbation_bridge_bound(&l, &l).unwrap().value, 0.0);
    }

    #[test]
    fn scaled_pair_within_factor_three() {
        // L2 = 1.1 L1, and L1(u) = ||u|| on traceless u, so the exact bridge
        // length is 0.1/1.1 and the target is 0.1.
        let delta = 0.1;
        let l1 = m2_lip(vec![1.0, 1.0]);
        let l2 = m2_lip(vec![1.0 / (1.0 + delta), 1.0 / (1.0 + delta)]);
        let g = two_lipnorm_grid_bound(&l1, &l2, 0.02).unwrap();
        assert!(g.value >= delta / (1.0 + delta) - 1e-12);
        assert!(g.value <= 3.0 * delta, "{g:?}");
        let p = perturbation_bridge_bound(&l1, &l2).unwrap();
        assert!(p.value >= delta / (1.0 + delta) - 1e-12 && p.value <= 3.0 * delta);
    }

    #[test]
    fn grid_refinement_is_monotone() {
        let l1 = m2_lip(vec![1.0, 1.0]);
        let l2 = m2_lip(vec![1.0, 0.8]);
        let values: Vec<f64> = [0.2, 0.05, 0.01]
            .iter()
            .map(|&h| two_lipnorm_grid_bound(&l1, &l2, h).unwrap().value)
            .collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
        assert!(values[2] < values[0]);
    }

    #[test]
    fn budget_refusal_reports_requirement() {
        let l = LipData::new(cantor_tower(4).unwrap(), BetaSequence::cantor(2.0, 4).unwrap()).unwrap();
        match two_lipnorm_grid_bound(&l, &l, 0.01) {
            Err(Error::Budget { required, cap, .. }) => assert!(required > cap),
            other => panic!("expected a budget refusal, got {other:?}"),
        }
        let b = two_lipnorm_bridge_bound(&l, &l, 0.01).unwrap();
        assert_eq!((b.kind, b.value), (BoundKind::Perturbation, 0.0));
    }

    #[test]
    fn effros_shen_level_two_bridge_below_target() {
        let l1 = es_lip(&[1, 1], PHI);
        let l2 = es_lip(&[1, 1], PHI + 1e-4);
        let b = two_lipnorm_bridge_bound(&l1, &l2, 0.05).unwrap();
        assert!(b.value < 0.05, "{b:?}");
    }

    #[test]
    fn chain_examples() {
        let same = effros_shen_chain_bound(PHI, PHI, 1.0, 3, 0.05).unwrap();
        assert_eq!(same.value, 2.0 / 13.0);
        let b = effros_shen_chain_bound(PHI, PHI + 1e-6, 1.0, 5, 0.05).unwrap();
        assert!((b.params["fibonacci_floor"] - 2.0 / 89.0).abs() < 1e-15);
        assert!(b.params["universal"] <= 2.0 / 89.0 + 1e-15);
        assert!(b.value >= b.params["universal"]);
        match effros_shen_chain_bound(PHI, 0.41, 1.0, 2, 0.05) {
            Err(Error::Inconsistent(_)) => {}
            other => panic!("{other:?}"),
        }
        let prefix = |m: usize| effros_shen_continuity_bound(PHI, PHI + 10f64.powi(-(m as i32)), 1.0, 12, 0.05);
        let mut prev = f64::INFINITY;
        for m in 3..=7 {
            let v = prefix(m).unwrap().value;
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn grid_bound_dominates_sampled_reach() {
        let l1 = es_lip(&[1, 1], PHI);
        let l2 = es_lip(&[1, 1], 0.62);
        let g = two_lipnorm_grid_bound(&l1, &l2, 0.1).unwrap();
        let basis = traceless_basis(&l1);
        let mut state = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..2000 {
            let x: Vec<f64> = (0..basis.len())
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
                })
                .collect();
            let u = combine(l1.top(), &basis, &x);
            let (a, b) = (l1.lip(&u).unwrap(), l2.lip(&u).unwrap());
            let reach = crate::algebra::cstar_norm(&u) * (1.0 / a - 1.0 / b).abs();
            assert!(reach <= g.value + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn bounds_below_diameter_ceiling(eps in 1e-5f64..1e-2, h in 0.1f64..0.5) {
            let l1 = es_lip(&[1, 1], PHI);
            let l2 = es_lip(&[1, 1], PHI + eps);
            let b = two_lipnorm_bridge_bound(&l1, &l2, h).unwrap();
            prop_assert!(b.value >= 0.0);
            prop_assert!(b.value <= l1.beta().get(0).max(l2.beta().get(0)));
            let a = b.clone();
            let again = two_lipnorm_bridge_bound(&l1, &l2, h).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&again).unwrap());
        }
    }
}
