//! The Lip-norm `L(a) = max_n ||a - E_n(a)|| / beta(n)` on the top level of
//! a tower, and its quasi-Leibniz margins.
//!
//! On the top level `N` the supremum over all `n` is a finite maximum: the
//! terms with `n >= N` vanish because `E_n` fixes `A_N`.

use crate::algebra::{cstar_norm, jordan, lie, BlockElement, FdCStar, SELF_ADJOINT_TOL};
use crate::error::{validation, Result};
use crate::expectation::ExpectationOperator;
use crate::linalg::{hermitian_norm, herm_eigen, ComplexMatrix, C64, JACOBI_TOL, ZERO};
use crate::tower::{BetaSequence, InductiveTower};

/// A tower, its weights, and the expectations `E_0..E_{N-1}` from the top.
#[derive(Debug, Clone)]
pub struct LipData {
    tower: InductiveTower,
    beta: BetaSequence,
    ops: Vec<ExpectationOperator>,
}

impl LipData {
    pub fn new(tower: InductiveTower, beta: BetaSequence) -> Result<Self> {
        let top = tower.top_level();
        if beta.len() < top + 1 {
            return Err(validation!("beta has {} values, the tower needs {}", beta.len(), top + 1));
        }
        let beta = beta.truncate(top)?;
        let ops = (0..top)
            .map(|n| ExpectationOperator::new(&tower, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tower, beta, ops })
    }

    /// Lip data on the first `n + 1` levels.
    pub fn truncated(tower: &InductiveTower, beta: &BetaSequence, n: usize) -> Result<Self> {
        Self::new(tower.truncate(n)?, beta.truncate(n)?)
    }

    pub fn tower(&self) -> &InductiveTower {
        &self.tower
    }

    pub fn beta(&self) -> &BetaSequence {
        &self.beta
    }

    pub fn top_level(&self) -> usize {
        self.tower.top_level()
    }

    pub fn top(&self) -> &FdCStar {
        self.tower.level(self.top_level())
    }

    /// `E_n` for `n < N`.
    pub fn expectation(&self, n: usize) -> &ExpectationOperator {
        &self.ops[n]
    }

    pub fn expectations(&self) -> &[ExpectationOperator] {
        &self.ops
    }

    fn prepare(&self, a: &BlockElement) -> Result<BlockElement> {
        if a.parent() != self.top() {
            return Err(validation!(
                "element lives in {:?}, expected the top level {:?}",
                a.parent().block_dims(),
                self.top().block_dims()
            ));
        }
        if !a.is_self_adjoint(SELF_ADJOINT_TOL) {
            return Err(validation!(
                "the Lip-norm is defined on self-adjoint elements (residual {:.3e})",
                a.self_adjoint_residual()
            ));
        }
        // Shifting by a scalar leaves every term unchanged and makes scalar
        // inputs vanish exactly.
        let s = a.block(0)[(0, 0)].re;
        Ok(a.real_part().add_scalar(C64::new(-s, 0.0)))
    }

    /// `||a - E_n(a)|| / beta(n)` for `n = 0..N-1`.
    pub fn lip_profile(&self, a: &BlockElement) -> Result<Vec<f64>> {
        let a = self.prepare(a)?;
        Ok(self
            .ops
            .iter()
            .enumerate()
            .map(|(n, op)| sa_norm(&op.deviation_unchecked(&a)) / self.beta.get(n))
            .collect())
    }

    pub fn lip(&self, a: &BlockElement) -> Result<f64> {
        Ok(self.lip_profile(a)?.into_iter().fold(0.0, f64::max))
    }

    /// `K = 2 / min_{n <= N} beta(n)`, so that `|L(a) - L(b)| <= K ||a - b||`.
    pub fn lipschitz_constant(&self) -> f64 {
        2.0 / self.beta.min_up_to(self.top_level())
    }
}

fn sa_norm(a: &BlockElement) -> f64 {
    a.blocks().iter().map(hermitian_norm).fold(0.0, f64::max)
}

pub fn lip(l: &LipData, a: &BlockElement) -> Result<f64> {
    l.lip(a)
}

pub fn lip_lipschitz_constant(l: &LipData) -> f64 {
    l.lipschitz_constant()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiLeibnizMargins {
    pub jordan: f64,
    pub lie: f64,
}

/// `2 (||a|| L(b) + ||b|| L(a)) - L(product)` for the Jordan and Lie
/// products; both are nonnegative for a (2,0)-quasi-Leibniz seminorm.
pub fn quasi_leibniz_margin(l: &LipData, a: &BlockElement, b: &BlockElement) -> Result<QuasiLeibnizMargins> {
    let la = l.lip(a)?;
    let lb = l.lip(b)?;
    let bound = 2.0 * (cstar_norm(a) * lb + cstar_norm(b) * la);
    let j = jordan(a, b)?.real_part();
    let li = lie(a, b)?.real_part();
    Ok(QuasiLeibnizMargins {
        jordan: bound - l.lip(&j)?,
        lie: bound - l.lip(&li)?,
    })
}

/// Coordinates of the self-adjoint part of an algebra: per block, the
/// diagonal entries, then the real and imaginary parts of the strictly upper
/// entries in row-major order.
pub fn self_adjoint_basis(alg: &FdCStar) -> Vec<BlockElement> {
    let mut out = Vec::with_capacity(alg.dimension());
    for (k, &d) in alg.block_dims().iter().enumerate() {
        for i in 0..d {
            let mut e = alg.zero();
            e.blocks_mut()[k][(i, i)] = C64::new(1.0, 0.0);
            out.push(e);
        }
        for i in 0..d {
            for j in i + 1..d {
                let mut re = alg.zero();
                re.blocks_mut()[k][(i, j)] = C64::new(1.0, 0.0);
                re.blocks_mut()[k][(j, i)] = C64::new(1.0, 0.0);
                out.push(re);
                let mut im = alg.zero();
                im.blocks_mut()[k][(i, j)] = C64::new(0.0, 1.0);
                im.blocks_mut()[k][(j, i)] = C64::new(0.0, -1.0);
                out.push(im);
            }
        }
    }
    out
}

/// `sum_j x_j B_j`.
pub fn combine(alg: &FdCStar, basis: &[BlockElement], x: &[f64]) -> BlockElement {
    let mut out = alg.zero();
    for (b, &c) in basis.iter().zip(x) {
        if c == 0.0 {
            continue;
        }
        for (dst, src) in out.blocks_mut().iter_mut().zip(b.blocks()) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += s * c;
            }
        }
    }
    out
}

/// Fast evaluation of `L` on a fixed linear family `a(x) = sum_j x_j B_j`
/// of self-adjoint elements. Precomputes `R_{n,j} = B_j - E_n(B_j)`.
#[derive(Debug, Clone)]
pub struct LinearLip {
    top: FdCStar,
    /// `residuals[n][j]`: blocks of `R_{n,j}`.
    residuals: Vec<Vec<Vec<ComplexMatrix>>>,
    inv_beta: Vec<f64>,
    dim: usize,
}

impl LinearLip {
    pub fn new(l: &LipData, basis: &[BlockElement]) -> Result<Self> {
        for b in basis {
            if b.parent() != l.top() || !b.is_self_adjoint(SELF_ADJOINT_TOL) {
                return Err(validation!("basis elements must be self-adjoint elements of the top level"));
            }
        }
        let residuals = l
            .expectations()
            .iter()
            .map(|op| {
                basis
                    .iter()
                    .map(|b| op.deviation_unchecked(&b.real_part()).real_part().into_blocks())
                    .collect()
            })
            .collect();
        Ok(Self {
            top: l.top().clone(),
            residuals,
            inv_beta: (0..l.top_level()).map(|n| 1.0 / l.beta().get(n)).collect(),
            dim: basis.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> usize {
        self.residuals.len()
    }

    /// Blocks of `a(x) - E_n(a(x))`.
    pub fn deviation(&self, n: usize, x: &[f64]) -> Vec<ComplexMatrix> {
        let mut blocks: Vec<ComplexMatrix> = self
            .top
            .block_dims()
            .iter()
            .map(|&d| ComplexMatrix::zeros(d, d))
            .collect();
        for (r, &c) in self.residuals[n].iter().zip(x) {
            if c == 0.0 {
                continue;
            }
            for (dst, src) in blocks.iter_mut().zip(r) {
                for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                    *d += s * c;
                }
            }
        }
        blocks
    }

    /// `||a(x) - E_n(a(x))||`.
    pub fn deviation_norm(&self, n: usize, x: &[f64]) -> f64 {
        self.deviation(n, x).iter().map(hermitian_norm).fold(0.0, f64::max)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..self.levels())
            .map(|n| self.deviation_norm(n, x) * self.inv_beta[n])
            .fold(0.0, f64::max)
    }

    /// Extreme eigenvalue of `a(x) - E_n(a(x))` (largest magnitude) with a
    /// unit eigenvector, as `(block, eigenvalue, vector)`.
    pub fn extreme_eigenpair(&self, n: usize, x: &[f64]) -> Result<(usize, f64, Vec<C64>)> {
        let mut best: Option<(usize, f64, Vec<C64>)> = None;
        for (k, blk) in self.deviation(n, x).iter().enumerate() {
            let e = herm_eigen(&blk.hermitian_part(), JACOBI_TOL)?;
            let last = e.eigenvalues.len() - 1;
            let (idx, lam) = if e.eigenvalues[0].abs() > e.eigenvalues[last].abs() {
                (0, e.eigenvalues[0])
            } else {
                (last, e.eigenvalues[last])
            };
            if best.as_ref().is_none_or(|b| lam.abs() > b.1.abs()) {
                best = Some((k, lam, e.vector(idx)));
            }
        }
        Ok(best.expect("algebras have at least one block"))
    }

    /// `<v, R_{n,j} v>` for every `j`, restricted to block `k`.
    pub fn quadratic_forms(&self, n: usize, k: usize, v: &[C64]) -> Vec<f64> {
        self.residuals[n]
            .iter()
            .map(|r| {
                let m = &r[k];
                let d = m.rows();
                let mut acc = ZERO;
                for i in 0..d {
                    for j in 0..d {
                        acc += v[i].conj() * m[(i, j)] * v[j];
                    }
                }
                acc.re
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{state_eval, trace_eval};
    use crate::error::Error;
    use crate::random::{random_element, random_self_adjoint, random_state};
    use crate::tower::{cantor_tower, effros_shen_tower, EmbeddingLayout, TowerKind};
    use crate::algebra::TraceWeights;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PHI: f64 = 0.618_033_988_749_894_9;

    fn es_lip(depth: usize) -> LipData {
        let (t, b) = effros_shen_tower(&vec![1; depth], PHI, 1.0).unwrap();
        LipData::new(t, b).unwrap()
    }

    fn m2_depth_one(beta1: f64) -> LipData {
        let t = InductiveTower::new(
            vec![FdCStar::scalars(), FdCStar::new(vec![2]).unwrap()],
            vec![EmbeddingLayout::new(vec![vec![0, 0]])],
            vec![TraceWeights::new(vec![1.0]).unwrap(), TraceWeights::new(vec![1.0]).unwrap()],
            TowerKind::Explicit,
        )
        .unwrap();
        LipData::new(t, BetaSequence::new(vec![1.0, beta1]).unwrap()).unwrap()
    }

    fn cantor_lip(depth: usize, r: f64) -> LipData {
        LipData::new(cantor_tower(depth).unwrap(), BetaSequence::cantor(r, depth).unwrap()).unwrap()
    }

    fn u(l: &LipData, n: usize) -> BlockElement {
        let top = l.top_level();
        let vals: Vec<f64> = (0..1usize << top)
            .map(|p| if (p >> (top - 1 - n)) & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        l.top().diagonal(&vals).unwrap()
    }

    #[test]
    fn unit_has_zero_lip() {
        let l = es_lip(4);
        assert_eq!(l.lip(&l.top().unit()).unwrap(), 0.0);
        assert_eq!(l.lip(&l.top().scalar(C64::new(-3.7, 0.0))).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_self_adjoint() {
        let l = es_lip(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_element(&mut rng, l.top());
        assert!(matches!(l.lip(&a), Err(Error::Validation(_))));
    }

    #[test]
    fn cantor_coordinate_unitaries() {
        let l = cantor_lip(4, 2.0);
        for n in 0..4 {
            let v = l.lip(&u(&l, n)).unwrap();
            assert!((v - 1.0 / l.beta().get(n)).abs() <= 1e-10);
        }
    }

    #[test]
    fn depth_one_lip_is_centered_norm() {
        let l = m2_depth_one(0.5);
        let mu = l.tower().trace(1).clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_self_adjoint(&mut rng, l.top());
            let m = trace_eval(&mu, &a).unwrap();
            let centered = a.sub(&l.top().scalar(m)).unwrap();
            assert!((l.lip(&a).unwrap() - cstar_norm(&centered)).abs() <= 1e-12);
        }
    }

    #[test]
    fn lipschitz_constant_examples() {
        assert_eq!(m2_depth_one(1.0).lipschitz_constant(), 2.0);
        assert_eq!(cantor_lip(3, 2.0).lipschitz_constant(), 32.0);
    }

    #[test]
    fn commuting_pair_lie_margin() {
        let l = cantor_lip(3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_self_adjoint(&mut rng, l.top());
        let b = random_self_adjoint(&mut rng, l.top());
        let m = quasi_leibniz_margin(&l, &a, &b).unwrap();
        let bound = 2.0 * (cstar_norm(&a) * l.lip(&b).unwrap() + cstar_norm(&b) * l.lip(&a).unwrap());
        assert_eq!(m.lie, bound);
        let unit = l.top().unit();
        let m = quasi_leibniz_margin(&l, &unit, &unit).unwrap();
        assert_eq!((m.jordan, m.lie), (0.0, 0.0));
    }

    #[test]
    fn linear_lip_matches_direct_evaluation() {
        let l = es_lip(3);
        let basis = self_adjoint_basis(l.top());
        assert_eq!(basis.len(), l.top().dimension());
        let fast = LinearLip::new(&l, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x: Vec<f64> = (0..basis.len()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let a = combine(l.top(), &basis, &x);
            assert!((fast.eval(&x) - l.lip(&a).unwrap()).abs() <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn quasi_leibniz_on_effros_shen(seed in any::<u64>()) {
            let l = es_lip(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_self_adjoint(&mut rng, l.top());
            let b = random_self_adjoint(&mut rng, l.top());
            let m = quasi_leibniz_margin(&l, &a, &b).unwrap();
            prop_assert!(m.jordan >= -1e-9 && m.lie >= -1e-9);
        }

        #[test]
        fn seminorm_axioms(seed in any::<u64>(), s in -3.0f64..3.0) {
            let l = es_lip(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_self_adjoint(&mut rng, l.top());
            let b = random_self_adjoint(&mut rng, l.top());
            let la = l.lip(&a).unwrap();
            let lb = l.lip(&b).unwrap();
            prop_assert!((l.lip(&a.scale_real(s)).unwrap() - s.abs() * la).abs() <= 1e-10 * (1.0 + la));
            prop_assert!(l.lip(&a.add(&b).unwrap()).unwrap() <= la + lb + 1e-10);
        }

        #[test]
        fn lipschitz_in_norm(seed in any::<u64>()) {
            let l = es_lip(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_self_adjoint(&mut rng, l.top());
            let b = random_self_adjoint(&mut rng, l.top());
            let gap = (l.lip(&a).unwrap() - l.lip(&b).unwrap()).abs();
            prop_assert!(gap <= l.lipschitz_constant() * cstar_norm(&a.sub(&b).unwrap()) + 1e-10);
        }

        #[test]
        fn weak_contraction_under_expectations(seed in any::<u64>()) {
            let l = es_lip(4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_self_adjoint(&mut rng, l.top());
            let la = l.lip(&a).unwrap();
            for op in l.expectations() {
                let ea = op.apply(&a).unwrap().real_part();
                prop_assert!(l.lip(&ea).unwrap() <= la + 1e-9);
            }
        }

        #[test]
        fn states_are_controlled_by_lip(seed in any::<u64>()) {
            let l = es_lip(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_self_adjoint(&mut rng, l.top());
            let phi = random_state(&mut rng, l.top());
            let psi = random_state(&mut rng, l.top());
            let gap = (state_eval(&phi, &a).unwrap() - state_eval(&psi, &a).unwrap()).norm();
            prop_assert!(gap <= 2.0 * l.beta().get(0) * l.lip(&a).unwrap() + 1e-8);
        }

        #[test]
        fn scalar_kernel(seed in any::<u64>(), eps in 0.0f64..1e-11) {
            let l = es_lip(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_self_adjoint(&mut rng, l.top()).scale_real(eps);
            let mu = trace_eval(l.tower().trace(3), &a).unwrap();
            let centered = a.sub(&l.top().scalar(mu)).unwrap();
            if l.lip(&a).unwrap() <= 1e-10 {
                prop_assert!(cstar_norm(&centered) <= 1e-8);
            }
        }
    }
}
