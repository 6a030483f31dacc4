//! Trace-preserving conditional expectations `E_n : A_N -> A_n`.
//!
//! The embedded matrix units `f = embed(e_{k,j,m})` form an orthogonal basis
//! of the image of `A_n` for the trace inner product, so
//! `E_n(a) = sum_f mu(f* a) / mu(f* f) * f`. A unit of block `k` is a sum of
//! ordinary matrix units, one per copy of block `k` inside `A_N`, which makes
//! the coefficient a weighted average of the copies:
//!
//! `c_k[j,m] = sum_copies tau_J a_J[off+j, off+m] / norm_k`,
//!
//! with `tau_J = t_J / d_J` and `norm_k = sum_copies tau_J`.

use crate::algebra::{BlockElement, FdCStar};
use crate::error::{validation, Error, Result};
use crate::linalg::ComplexMatrix;
use crate::tower::{embed_with_placements, InductiveTower, Placements, CONSISTENCY_TOL};

/// `E_n` from the top level `N` of a tower onto the image of level `n`.
#[derive(Debug, Clone)]
pub struct ExpectationOperator {
    source_level: usize,
    target_level: usize,
    top: FdCStar,
    target: FdCStar,
    placements: Placements,
    /// `t_J / d_J` at the top level.
    tau: Vec<f64>,
    /// `mu(f* f)` for the units of each target block.
    norms: Vec<f64>,
}

impl ExpectationOperator {
    /// Builds `E_n` from the top of `tower`. Verifies that the embedded
    /// units are orthogonal, which holds when the copies of the level-`n`
    /// blocks tile every top-level block, and that their norms agree with
    /// the level-`n` weights.
    pub fn new(tower: &InductiveTower, n: usize) -> Result<Self> {
        let top_level = tower.top_level();
        if n > top_level {
            return Err(validation!("target level {n} exceeds top level {top_level}"));
        }
        let placements = tower.placements(n, top_level)?;
        let top = tower.level(top_level).clone();
        let target = tower.level(n).clone();

        let dims_top = top.block_dims();
        let dims_n = target.block_dims();
        let mut covered: Vec<Vec<(usize, usize)>> = vec![Vec::new(); top.num_blocks()];
        for (k, list) in placements.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Inconsistent(format!("block {k} of level {n} has no copies at the top")));
            }
            for &(j, off) in list {
                covered[j].push((off, off + dims_n[k]));
            }
        }
        for (j, intervals) in covered.iter_mut().enumerate() {
            intervals.sort_unstable();
            let mut cursor = 0;
            for &(lo, hi) in intervals.iter() {
                if lo != cursor {
                    return Err(Error::Inconsistent(format!(
                        "copies inside top block {j} overlap or leave a gap at {cursor}; embedded units would not be orthogonal"
                    )));
                }
                cursor = hi;
            }
            if cursor != dims_top[j] {
                return Err(Error::Inconsistent(format!("copies do not fill top block {j}")));
            }
        }

        let tau: Vec<f64> = tower
            .trace(top_level)
            .weights()
            .iter()
            .zip(dims_top)
            .map(|(&t, &d)| t / d as f64)
            .collect();
        let norms: Vec<f64> = placements
            .iter()
            .map(|list| list.iter().map(|&(j, _)| tau[j]).sum())
            .collect();
        for (k, &nk) in norms.iter().enumerate() {
            let expected = tower.trace(n).weights()[k] / dims_n[k] as f64;
            if (nk - expected).abs().is_nan() || (nk - expected).abs() > CONSISTENCY_TOL {
                return Err(Error::Inconsistent(format!(
                    "unit norm {nk:.15e} of block {k} at level {n} disagrees with its trace weight {expected:.15e}"
                )));
            }
        }
        Ok(Self {
            source_level: top_level,
            target_level: n,
            top,
            target,
            placements,
            tau,
            norms,
        })
    }

    pub fn source_level(&self) -> usize {
        self.source_level
    }

    pub fn target_level(&self) -> usize {
        self.target_level
    }

    pub fn top(&self) -> &FdCStar {
        &self.top
    }

    pub fn target(&self) -> &FdCStar {
        &self.target
    }

    pub fn placements(&self) -> &Placements {
        &self.placements
    }

    pub(crate) fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub(crate) fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `w_{J,k} = m_{J,k} tau_J / norm_k`: the weight top block `J` carries
    /// in the average defining the coefficients of target block `k`.
    pub fn copy_weights(&self) -> Vec<Vec<(usize, f64)>> {
        self.placements
            .iter()
            .zip(&self.norms)
            .map(|(list, &nk)| {
                let mut w: Vec<(usize, f64)> = Vec::new();
                for &(j, _) in list {
                    match w.iter_mut().find(|(jj, _)| *jj == j) {
                        Some(e) => e.1 += self.tau[j] / nk,
                        None => w.push((j, self.tau[j] / nk)),
                    }
                }
                w
            })
            .collect()
    }

    fn check_input(&self, a: &BlockElement) -> Result<()> {
        if a.parent() != &self.top {
            return Err(validation!(
                "element lives in {:?}, expected the top level {:?}",
                a.parent().block_dims(),
                self.top.block_dims()
            ));
        }
        Ok(())
    }

    /// Level-`n` coefficients `c` with `E_n(a) = embed(c)`.
    pub fn coefficients(&self, a: &BlockElement) -> Result<BlockElement> {
        self.check_input(a)?;
        Ok(self.coefficients_unchecked(a))
    }

    pub(crate) fn coefficients_unchecked(&self, a: &BlockElement) -> BlockElement {
        let dims = self.target.block_dims();
        let blocks = self
            .placements
            .iter()
            .enumerate()
            .map(|(k, list)| {
                let d = dims[k];
                let mut c = ComplexMatrix::zeros(d, d);
                for &(j, off) in list {
                    let w = self.tau[j] / self.norms[k];
                    let src = a.block(j);
                    for r in 0..d {
                        for s in 0..d {
                            c[(r, s)] += src[(off + r, off + s)] * w;
                        }
                    }
                }
                c
            })
            .collect();
        BlockElement::from_parts_unchecked(self.target.clone(), blocks)
    }

    /// `E_n(a)` as an element of the top level.
    pub fn apply(&self, a: &BlockElement) -> Result<BlockElement> {
        self.check_input(a)?;
        Ok(self.apply_unchecked(a))
    }

    pub(crate) fn apply_unchecked(&self, a: &BlockElement) -> BlockElement {
        let c = self.coefficients_unchecked(a);
        embed_with_placements(&c, &self.placements, &self.top)
    }

    /// `a - E_n(a)`.
    pub(crate) fn deviation_unchecked(&self, a: &BlockElement) -> BlockElement {
        let mut out = a.clone();
        let c = self.coefficients_unchecked(a);
        let dims = self.target.block_dims();
        let blocks = out.blocks_mut();
        for (k, list) in self.placements.iter().enumerate() {
            let d = dims[k];
            for &(j, off) in list {
                for r in 0..d {
                    for s in 0..d {
                        blocks[j][(off + r, off + s)] -= c.block(k)[(r, s)];
                    }
                }
            }
        }
        out
    }
}

/// `E_n(a)` together with its level-`n` coefficients.
pub fn cond_expect(op: &ExpectationOperator, a: &BlockElement) -> Result<(BlockElement, BlockElement)> {
    op.check_input(a)?;
    let c = op.coefficients_unchecked(a);
    let image = embed_with_placements(&c, &op.placements, &op.top);
    Ok((image, c))
}

/// `E_n` on the Cantor tower: averages over the last `N - n` coordinates.
/// Input values are indexed with the first coordinate as the most
/// significant bit, so each depth-`n` cylinder is a contiguous run.
pub fn cantor_fast_expect(tower: &InductiveTower, values: &[f64], n: usize) -> Result<Vec<f64>> {
    if !tower.is_cantor() {
        return Err(validation!("the fast path needs a Cantor tower"));
    }
    let top = tower.top_level();
    if values.len() != 1 << top {
        return Err(validation!("expected {} values, got {}", 1usize << top, values.len()));
    }
    if n > top {
        return Err(validation!("level {n} exceeds top level {top}"));
    }
    let run = 1usize << (top - n);
    let mut out = Vec::with_capacity(values.len());
    for chunk in values.chunks(run) {
        let mean = chunk.iter().sum::<f64>() / run as f64;
        out.extend(std::iter::repeat_n(mean, run));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{cstar_norm, inner_mu, trace_eval};
    use crate::linalg::herm_eigenvalues;
    use crate::random::{random_element, random_positive};
    use crate::tower::{cantor_tower, effros_shen_tower, uhf_tower};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PHI: f64 = 0.618_033_988_749_894_9;

    fn es() -> InductiveTower {
        effros_shen_tower(&[1; 4], PHI, 1.0).unwrap().0
    }

    #[test]
    fn cantor_cylinder_average() {
        let t = cantor_tower(2).unwrap();
        let f = t.level(2).diagonal(&[1., 0., 0., 0.]).unwrap();
        let op = ExpectationOperator::new(&t, 1).unwrap();
        let (img, coeff) = cond_expect(&op, &f).unwrap();
        assert_eq!(img.diagonal_values().unwrap(), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(coeff.diagonal_values().unwrap(), vec![0.5, 0.0]);
        assert_eq!(cantor_fast_expect(&t, &[1., 0., 0., 0.], 1).unwrap(), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(cantor_fast_expect(&t, &[3.; 4], 0).unwrap(), vec![3.; 4]);
    }

    #[test]
    fn fast_path_rejects_other_towers() {
        assert!(cantor_fast_expect(&es(), &[0.0; 4], 1).is_err());
    }

    #[test]
    fn fast_path_matches_general_formula() {
        let t = cantor_tower(6).unwrap();
        let ops: Vec<_> = (0..=6).map(|n| ExpectationOperator::new(&t, n).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let v: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = t.level(6).diagonal(&v).unwrap();
            for (n, op) in ops.iter().enumerate() {
                let general = op.apply(&f).unwrap().diagonal_values().unwrap();
                let fast = cantor_fast_expect(&t, &v, n).unwrap();
                for (a, b) in general.iter().zip(&fast) {
                    assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn fixed_points_and_scalar_expectation() {
        let t = es();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 0..=4 {
            let op = ExpectationOperator::new(&t, n).unwrap();
            let b = random_element(&mut rng, t.level(n));
            let eb = t.embed(&b, n, 4).unwrap();
            assert!(op.apply(&eb).unwrap().max_abs_diff(&eb) <= 1e-12);
        }
        let op0 = ExpectationOperator::new(&t, 0).unwrap();
        let a = random_element(&mut rng, t.level(4));
        let mu = trace_eval(t.trace(4), &a).unwrap();
        let expected = t.level(4).scalar(mu);
        assert!(op0.apply(&a).unwrap().max_abs_diff(&expected) <= 1e-12);
    }

    #[test]
    fn embedded_units_are_orthogonal() {
        let t = effros_shen_tower(&[2, 1, 1], 1.0 / (2.0 + 1.0 / (1.0 + 1.0 / (1.0 + PHI))), 1.0)
            .unwrap()
            .0;
        let n = 2;
        let alg_n = t.level(n);
        let mu = t.trace(3);
        let mut units = Vec::new();
        for (k, &d) in alg_n.block_dims().iter().enumerate() {
            for j in 0..d {
                for m in 0..d {
                    units.push(t.embed(&alg_n.matrix_unit(k, j, m).unwrap(), n, 3).unwrap());
                }
            }
        }
        let op = ExpectationOperator::new(&t, n).unwrap();
        let mut idx = 0;
        for (k, &d) in alg_n.block_dims().iter().enumerate() {
            for _ in 0..d * d {
                let nn = inner_mu(mu, &units[idx], &units[idx]).unwrap().re;
                assert!((nn - op.norms()[k]).abs() <= 1e-12);
                idx += 1;
            }
        }
        for (i, f) in units.iter().enumerate() {
            for (j, g) in units.iter().enumerate() {
                if i != j {
                    assert!(inner_mu(mu, f, g).unwrap().norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn inconsistent_trace_is_rejected() {
        use crate::algebra::TraceWeights;
        use crate::tower::TowerKind;
        let t = es();
        let mut traces = t.traces().to_vec();
        let w = traces[2].weights()[0] + 1e-6;
        traces[2] = TraceWeights::new_unchecked(vec![w, 1.0 - w]);
        let bad = InductiveTower::from_parts(t.levels().to_vec(), t.layouts().to_vec(), traces, TowerKind::Explicit)
            .unwrap();
        assert!(matches!(ExpectationOperator::new(&bad, 2), Err(Error::Inconsistent(_))));
    }

    fn axiom_residuals(t: &InductiveTower, seed: u64) -> f64 {
        let top = t.top_level();
        let ops: Vec<_> = (0..=top).map(|n| ExpectationOperator::new(t, n).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_element(&mut rng, t.level(top));
        let mu = t.trace(top);
        let mut worst: f64 = 0.0;
        for (n, op) in ops.iter().enumerate() {
            let ea = op.apply(&a).unwrap();
            worst = worst.max(op.apply(&ea).unwrap().max_abs_diff(&ea));
            for (p, op_p) in ops.iter().enumerate() {
                let lhs = op_p.apply(&ea).unwrap();
                let rhs = ops[n.min(p)].apply(&a).unwrap();
                worst = worst.max(lhs.max_abs_diff(&rhs));
            }
            worst = worst.max((trace_eval(mu, &ea).unwrap() - trace_eval(mu, &a).unwrap()).norm());
            let b = t.embed(&random_element(&mut rng, t.level(n)), n, top).unwrap();
            let c = t.embed(&random_element(&mut rng, t.level(n)), n, top).unwrap();
            let bac = b.mul(&a).unwrap().mul(&c).unwrap();
            let lhs = op.apply(&bac).unwrap();
            let rhs = b.mul(&ea).unwrap().mul(&c).unwrap();
            worst = worst.max(lhs.max_abs_diff(&rhs) / (1.0 + cstar_norm(&rhs)));
            worst = worst.max(op.apply(&a.adjoint()).unwrap().max_abs_diff(&ea.adjoint()));
            worst = worst.max((cstar_norm(&ea) - cstar_norm(&a)).max(0.0));
            let pos = random_positive(&mut rng, t.level(top));
            let epos = op.apply(&pos).unwrap().real_part();
            for blk in epos.blocks() {
                worst = worst.max(-herm_eigenvalues(blk).unwrap()[0]);
            }
        }
        worst
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn axioms_on_effros_shen(seed in any::<u64>()) {
            prop_assert!(axiom_residuals(&es(), seed) <= 1e-9);
        }

        #[test]
        fn axioms_on_uhf(seed in any::<u64>()) {
            let (t, _) = uhf_tower(&[1, 2, 1], 3, 1.0).unwrap();
            prop_assert!(axiom_residuals(&t, seed) <= 1e-9);
        }
    }
}
