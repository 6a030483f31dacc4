//! Finite-dimensional C*-algebras as direct sums of full matrix algebras.
//!
//! Trace weights use normalized block traces, `mu(a) = sum_i t_i Tr(a_i)/d_i`,
//! so that the weights of a tracial state sum to one. States use the
//! unnormalized pairing `phi(a) = sum_i Tr(sigma_i a_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{shape, validation, Result};
use crate::linalg::{herm_eigenvalues, operator_norm, ComplexMatrix, C64, ONE, ZERO};

/// Tolerance for the self-adjointness predicate, relative to `1 + ||a||_F`.
pub const SELF_ADJOINT_TOL: f64 = 1e-12;
const TRACE_SUM_TOL: f64 = 1e-12;
const STATE_PSD_TOL: f64 = 1e-10;
const STATE_TRACE_TOL: f64 = 1e-10;

/// `M(d_1) + ... + M(d_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FdCStar {
    block_dims: Vec<usize>,
}

impl FdCStar {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(validation!("an algebra needs at least one block"));
        }
        if block_dims.contains(&0) {
            return Err(validation!("block dimensions must be at least 1"));
        }
        Ok(Self { block_dims })
    }

    /// The scalars `C`.
    pub fn scalars() -> Self {
        Self {
            block_dims: vec![1],
        }
    }

    /// `C^n`, all blocks of dimension one.
    pub fn abelian(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Complex dimension `sum d_i^2`.
    pub fn dimension(&self) -> usize {
        self.block_dims.iter().map(|d| d * d).sum()
    }

    pub fn is_abelian(&self) -> bool {
        self.block_dims.iter().all(|&d| d == 1)
    }

    /// Real dimension of the self-adjoint part, which equals the complex dimension.
    pub fn real_sa_dimension(&self) -> usize {
        self.dimension()
    }

    pub fn zero(&self) -> BlockElement {
        BlockElement {
            parent: self.clone(),
            blocks: self
                .block_dims
                .iter()
                .map(|&d| ComplexMatrix::zeros(d, d))
                .collect(),
        }
    }

    pub fn unit(&self) -> BlockElement {
        self.scalar(ONE)
    }

    pub fn scalar(&self, value: C64) -> BlockElement {
        BlockElement {
            parent: self.clone(),
            blocks: self
                .block_dims
                .iter()
                .map(|&d| ComplexMatrix::scalar(d, value))
                .collect(),
        }
    }

    /// Matrix unit `e_{k,j,m}`: a one in row `j`, column `m` of block `k`.
    pub fn matrix_unit(&self, k: usize, j: usize, m: usize) -> Result<BlockElement> {
        let d = *self
            .block_dims
            .get(k)
            .ok_or_else(|| validation!("block index {k} out of range"))?;
        if j >= d || m >= d {
            return Err(validation!("matrix unit ({j},{m}) out of range for block of size {d}"));
        }
        let mut e = self.zero();
        e.blocks[k][(j, m)] = ONE;
        Ok(e)
    }

    /// An element of an Abelian algebra from its values on the blocks.
    pub fn diagonal(&self, values: &[f64]) -> Result<BlockElement> {
        if !self.is_abelian() {
            return Err(validation!("diagonal elements need an Abelian algebra"));
        }
        if values.len() != self.num_blocks() {
            return Err(shape!(
                "expected {} values, got {}",
                self.num_blocks(),
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(validation!("values must be finite"));
        }
        Ok(BlockElement {
            parent: self.clone(),
            blocks: values
                .iter()
                .map(|&v| ComplexMatrix::scalar(1, C64::new(v, 0.0)))
                .collect(),
        })
    }
}

/// An element `a = (a_1, ..., a_k)` of an [`FdCStar`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockElement {
    parent: FdCStar,
    blocks: Vec<ComplexMatrix>,
}

impl BlockElement {
    pub fn new(parent: &FdCStar, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if blocks.len() != parent.num_blocks() {
            return Err(shape!(
                "expected {} blocks, got {}",
                parent.num_blocks(),
                blocks.len()
            ));
        }
        for (i, (b, &d)) in blocks.iter().zip(parent.block_dims()).enumerate() {
            if b.rows() != d || b.cols() != d {
                return Err(shape!(
                    "block {i} is {}x{}, expected {d}x{d}",
                    b.rows(),
                    b.cols()
                ));
            }
            if !b.is_finite() {
                return Err(validation!("block {i} has non-finite entries"));
            }
        }
        Ok(Self {
            parent: parent.clone(),
            blocks,
        })
    }

    pub(crate) fn from_parts_unchecked(parent: FdCStar, blocks: Vec<ComplexMatrix>) -> Self {
        Self { parent, blocks }
    }

    pub fn parent(&self) -> &FdCStar {
        &self.parent
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ComplexMatrix {
        &self.blocks[i]
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [ComplexMatrix] {
        &mut self.blocks
    }

    pub fn into_blocks(self) -> Vec<ComplexMatrix> {
        self.blocks
    }

    fn check_parent(&self, other: &Self) -> Result<()> {
        if self.parent != other.parent {
            return Err(validation!(
                "elements live in different algebras ({:?} vs {:?})",
                self.parent.block_dims(),
                other.parent.block_dims()
            ));
        }
        Ok(())
    }

    fn zip_blocks(&self, other: &Self, f: impl Fn(C64, C64) -> C64 + Copy) -> Self {
        Self {
            parent: self.parent.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.zip_with(b, f))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_parent(other)?;
        Ok(self.zip_blocks(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_parent(other)?;
        Ok(self.zip_blocks(other, |a, b| a - b))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_parent(other)?;
        Ok(Self {
            parent: self.parent.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.matmul_unchecked(b))
                .collect(),
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            parent: self.parent.clone(),
            blocks: self.blocks.iter().map(ComplexMatrix::adjoint).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            parent: self.parent.clone(),
            blocks: self.blocks.iter().map(|b| b.scale(s)).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `self + s * 1`.
    pub fn add_scalar(&self, s: C64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            for i in 0..b.rows() {
                b[(i, i)] += s;
            }
        }
        out
    }

    /// `(a + a*) / 2`.
    pub fn real_part(&self) -> Self {
        Self {
            parent: self.parent.clone(),
            blocks: self.blocks.iter().map(ComplexMatrix::hermitian_part).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `||a - a*||_F`.
    pub fn self_adjoint_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.hermitian_residual().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_residual() <= tol * (1.0 + self.frobenius_norm())
    }

    /// Largest entrywise difference, for regression comparisons.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Values of an Abelian element (real parts of the 1x1 blocks).
    pub fn diagonal_values(&self) -> Result<Vec<f64>> {
        if !self.parent.is_abelian() {
            return Err(validation!("element is not in an Abelian algebra"));
        }
        Ok(self.blocks.iter().map(|b| b[(0, 0)].re).collect())
    }
}

/// C*-norm: the largest operator norm over the blocks.
pub fn cstar_norm(a: &BlockElement) -> f64 {
    a.blocks.iter().map(operator_norm).fold(0.0, f64::max)
}

/// A faithful tracial state, stored as one weight per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceWeights {
    weights: Vec<f64>,
}

impl TraceWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(validation!("trace weights must be nonempty"));
        }
        if weights.iter().any(|&t| !t.is_finite() || t <= 0.0) {
            return Err(validation!("trace weights must be positive and finite"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > TRACE_SUM_TOL {
            return Err(validation!("trace weights sum to {sum}, expected 1"));
        }
        Ok(Self { weights })
    }

    /// Builds weights without checks; used to stage corrupted towers in
    /// validation tests and to hold weights awaiting a consistency report.
    pub fn new_unchecked(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(validation!("trace weights must be nonempty"));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn check_weights(mu: &TraceWeights, a: &BlockElement) -> Result<()> {
    if mu.len() != a.parent.num_blocks() {
        return Err(shape!(
            "{} trace weights for {} blocks",
            mu.len(),
            a.parent.num_blocks()
        ));
    }
    Ok(())
}

/// `mu(a) = sum_i t_i Tr(a_i) / d_i`.
pub fn trace_eval(mu: &TraceWeights, a: &BlockElement) -> Result<C64> {
    check_weights(mu, a)?;
    Ok(a.blocks
        .iter()
        .zip(&mu.weights)
        .map(|(b, &t)| b.trace() * (t / b.rows() as f64))
        .sum())
}

/// `<x, y> = mu(y* x)`.
pub fn inner_mu(mu: &TraceWeights, x: &BlockElement, y: &BlockElement) -> Result<C64> {
    check_weights(mu, x)?;
    x.check_parent(y)?;
    let mut acc = ZERO;
    for ((bx, by), &t) in x.blocks.iter().zip(&y.blocks).zip(&mu.weights) {
        // Tr(y* x) = sum_{ij} conj(y_ij) x_ij
        let s: C64 = bx
            .data()
            .iter()
            .zip(by.data())
            .map(|(&p, &q)| q.conj() * p)
            .sum();
        acc += s * (t / bx.rows() as f64);
    }
    Ok(acc)
}

/// `(ab + ba) / 2`.
pub fn jordan(a: &BlockElement, b: &BlockElement) -> Result<BlockElement> {
    let ab = a.mul(b)?;
    let ba = b.mul(a)?;
    Ok(ab.zip_blocks(&ba, |x, y| (x + y) * 0.5))
}

/// `(ab - ba) / 2i`.
pub fn lie(a: &BlockElement, b: &BlockElement) -> Result<BlockElement> {
    let ab = a.mul(b)?;
    let ba = b.mul(a)?;
    let factor = C64::new(0.0, -0.5);
    Ok(ab.zip_blocks(&ba, |x, y| (x - y) * factor))
}

/// A state, given by positive semidefinite density blocks with
/// `sum_i Tr(sigma_i) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVec {
    parent: FdCStar,
    density_blocks: Vec<ComplexMatrix>,
}

impl StateVec {
    pub fn new(parent: &FdCStar, density_blocks: Vec<ComplexMatrix>) -> Result<Self> {
        let as_element = BlockElement::new(parent, density_blocks)?;
        let mut total = 0.0;
        for (i, b) in as_element.blocks.iter().enumerate() {
            if !b.is_hermitian(SELF_ADJOINT_TOL) {
                return Err(validation!("density block {i} is not Hermitian"));
            }
            let min = herm_eigenvalues(b)?[0];
            if min < -STATE_PSD_TOL {
                return Err(validation!(
                    "density block {i} has negative eigenvalue {min:.3e}"
                ));
            }
            total += b.trace().re;
        }
        if (total - 1.0).abs() > STATE_TRACE_TOL {
            return Err(validation!("density blocks have total trace {total}, expected 1"));
        }
        Ok(Self {
            parent: parent.clone(),
            density_blocks: as_element
                .blocks
                .iter()
                .map(ComplexMatrix::hermitian_part)
                .collect(),
        })
    }

    pub(crate) fn from_parts_unchecked(parent: FdCStar, density_blocks: Vec<ComplexMatrix>) -> Self {
        Self {
            parent,
            density_blocks,
        }
    }

    /// The tracial state `mu` as a density: `sigma_i = t_i I / d_i`.
    pub fn from_trace(parent: &FdCStar, mu: &TraceWeights) -> Result<Self> {
        if mu.len() != parent.num_blocks() {
            return Err(shape!("{} trace weights for {} blocks", mu.len(), parent.num_blocks()));
        }
        let blocks = parent
            .block_dims()
            .iter()
            .zip(mu.weights())
            .map(|(&d, &t)| ComplexMatrix::scalar(d, C64::new(t / d as f64, 0.0)))
            .collect();
        Ok(Self {
            parent: parent.clone(),
            density_blocks: blocks,
        })
    }

    /// The vector state of a unit vector `v` placed in block `k`.
    pub fn pure(parent: &FdCStar, k: usize, v: &[C64]) -> Result<Self> {
        let d = *parent
            .block_dims()
            .get(k)
            .ok_or_else(|| validation!("block index {k} out of range"))?;
        if v.len() != d {
            return Err(shape!("vector of length {} for block of size {d}", v.len()));
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(validation!("state vector must be nonzero and finite"));
        }
        let mut blocks: Vec<ComplexMatrix> = parent
            .block_dims()
            .iter()
            .map(|&d| ComplexMatrix::zeros(d, d))
            .collect();
        for i in 0..d {
            for j in 0..d {
                blocks[k][(i, j)] = v[i] * v[j].conj() / (norm * norm);
            }
        }
        Ok(Self {
            parent: parent.clone(),
            density_blocks: blocks,
        })
    }

    /// Point evaluation at block `k` of an Abelian algebra.
    pub fn point(parent: &FdCStar, k: usize) -> Result<Self> {
        if !parent.is_abelian() {
            return Err(validation!("point evaluations need an Abelian algebra"));
        }
        Self::pure(parent, k, &[ONE])
    }

    /// Probability vector on an Abelian algebra.
    pub fn from_probabilities(parent: &FdCStar, p: &[f64]) -> Result<Self> {
        if !parent.is_abelian() {
            return Err(validation!("probability vectors need an Abelian algebra"));
        }
        let blocks = p
            .iter()
            .map(|&x| ComplexMatrix::scalar(1, C64::new(x, 0.0)))
            .collect();
        Self::new(parent, blocks)
    }

    pub fn parent(&self) -> &FdCStar {
        &self.parent
    }

    pub fn density_blocks(&self) -> &[ComplexMatrix] {
        &self.density_blocks
    }

    /// `sigma_phi - sigma_psi`, as a self-adjoint element.
    pub fn difference(&self, other: &Self) -> Result<BlockElement> {
        let a = BlockElement::from_parts_unchecked(self.parent.clone(), self.density_blocks.clone());
        let b = BlockElement::from_parts_unchecked(other.parent.clone(), other.density_blocks.clone());
        a.sub(&b)
    }

    /// Probability vector of a state on an Abelian algebra.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        if !self.parent.is_abelian() {
            return Err(validation!("state is not on an Abelian algebra"));
        }
        Ok(self.density_blocks.iter().map(|b| b[(0, 0)].re).collect())
    }
}

/// `phi(a) = sum_i Tr(sigma_i a_i)`.
pub fn state_eval(phi: &StateVec, a: &BlockElement) -> Result<C64> {
    if phi.parent != a.parent {
        return Err(shape!(
            "state on {:?} applied to element of {:?}",
            phi.parent.block_dims(),
            a.parent.block_dims()
        ));
    }
    let mut acc = ZERO;
    for (s, b) in phi.density_blocks.iter().zip(&a.blocks) {
        let d = s.rows();
        for i in 0..d {
            for j in 0..d {
                acc += s[(i, j)] * b[(j, i)];
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::random::{random_element, random_self_adjoint, random_state};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn alg(d: &[usize]) -> FdCStar {
        FdCStar::new(d.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_algebras() {
        assert!(FdCStar::new(vec![]).is_err());
        assert!(FdCStar::new(vec![2, 0]).is_err());
        assert_eq!(alg(&[2, 1]).dimension(), 5);
    }

    #[test]
    fn unit_and_adjoint_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a_alg = alg(&[2, 1]);
        let a = random_element(&mut rng, &a_alg);
        assert_eq!(a.mul(&a_alg.unit()).unwrap(), a);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn product_matches_hand_computation() {
        let a_alg = alg(&[2, 1]);
        let c = |re, im| C64::new(re, im);
        let a = BlockElement::new(
            &a_alg,
            vec![
                ComplexMatrix::from_rows(&[vec![c(1., 2.), c(0., 1.)], vec![c(3., 0.), c(-1., 0.)]]).unwrap(),
                ComplexMatrix::from_rows(&[vec![c(2., -1.)]]).unwrap(),
            ],
        )
        .unwrap();
        let b = BlockElement::new(
            &a_alg,
            vec![
                ComplexMatrix::from_rows(&[vec![c(0., 1.), c(2., 0.)], vec![c(1., 1.), c(0., 0.)]]).unwrap(),
                ComplexMatrix::from_rows(&[vec![c(1., 3.)]]).unwrap(),
            ],
        )
        .unwrap();
        let p = a.mul(&b).unwrap();
        // (1+2i)(i) + (i)(1+i) = i - 2 + i - 1 = -3 + 2i
        assert_eq!(p.block(0)[(0, 0)], c(-3., 2.));
        // (1+2i)(2) + i*0 = 2 + 4i
        assert_eq!(p.block(0)[(0, 1)], c(2., 4.));
        // 3i + (-1)(1+i) = -1 + 2i
        assert_eq!(p.block(0)[(1, 0)], c(-1., 2.));
        assert_eq!(p.block(0)[(1, 1)], c(6., 0.));
        // (2-i)(1+3i) = 2 + 6i - i + 3 = 5 + 5i
        assert_eq!(p.block(1)[(0, 0)], c(5., 5.));
    }

    #[test]
    fn parent_mismatch_is_rejected() {
        let a = alg(&[2]).unit();
        let b = alg(&[1, 1]).unit();
        assert!(matches!(a.mul(&b), Err(Error::Validation(_))));
    }

    #[test]
    fn cstar_norm_examples() {
        assert_eq!(cstar_norm(&alg(&[2, 3]).unit()), 1.0);
        let a_alg = alg(&[2, 1]);
        let a = BlockElement::new(
            &a_alg,
            vec![
                ComplexMatrix::diag_real(&[0.5, -0.25]),
                ComplexMatrix::diag_real(&[2.0]),
            ],
        )
        .unwrap();
        assert_eq!(cstar_norm(&a), 2.0);
    }

    #[test]
    fn cstar_norm_matches_block_diagonal_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a_alg = alg(&[3, 2, 1]);
        for _ in 0..10 {
            let a = random_element(&mut rng, &a_alg);
            let mut big = ComplexMatrix::zeros(6, 6);
            let mut off = 0;
            for b in a.blocks() {
                big.set_diagonal_block(off, b);
                off += b.rows();
            }
            assert!((cstar_norm(&a) - operator_norm(&big)).abs() < 1e-12);
        }
    }

    #[test]
    fn cantor_level_two_product_has_trace_one_quarter() {
        // Points 00, 01, 10, 11; eta_0 = z_0 and eta_1 = z_1.
        let a_alg = FdCStar::abelian(4).unwrap();
        let eta0 = a_alg.diagonal(&[0., 0., 1., 1.]).unwrap();
        let eta1 = a_alg.diagonal(&[0., 1., 0., 1.]).unwrap();
        let mu = TraceWeights::uniform(4).unwrap();
        let v = trace_eval(&mu, &eta0.mul(&eta1).unwrap()).unwrap();
        assert!((v.re - 0.25).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn matrix_units_are_orthogonal_with_expected_norms() {
        let a_alg = alg(&[2, 1]);
        let mu = TraceWeights::new(vec![0.7, 0.3]).unwrap();
        let units: Vec<(usize, usize, usize)> = vec![(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1), (1, 0, 0)];
        for &(k, j, m) in &units {
            for &(k2, j2, m2) in &units {
                let e = a_alg.matrix_unit(k, j, m).unwrap();
                let f = a_alg.matrix_unit(k2, j2, m2).unwrap();
                let v = inner_mu(&mu, &e, &f).unwrap();
                let expected = if (k, j, m) == (k2, j2, m2) {
                    mu.weights()[k] / a_alg.block_dims()[k] as f64
                } else {
                    0.0
                };
                assert!((v - C64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
        assert!((inner_mu(&mu, &a_alg.unit(), &a_alg.unit()).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jordan_lie_hand_formulas() {
        let a_alg = alg(&[2]);
        let a = BlockElement::new(&a_alg, vec![ComplexMatrix::from_real(2, 2, &[1., 2., 2., -1.]).unwrap()]).unwrap();
        let b = BlockElement::new(&a_alg, vec![ComplexMatrix::from_real(2, 2, &[0., 1., 1., 3.]).unwrap()]).unwrap();
        // ab = [[2, 7], [-1, -1]], ba = [[2, -1], [7, -1]]
        let j = jordan(&a, &b).unwrap();
        let expected = ComplexMatrix::from_real(2, 2, &[2., 3., 3., -1.]).unwrap();
        assert!(j.block(0).max_abs_diff(&expected) < 1e-15);
        // (ab - ba)/2i = [[0, 8], [-8, 0]] / 2i = [[0, -4i], [4i, 0]]
        let l = lie(&a, &b).unwrap();
        assert!((l.block(0)[(0, 1)] - C64::new(0., -4.)).norm() < 1e-15);
        assert!((l.block(0)[(1, 0)] - C64::new(0., 4.)).norm() < 1e-15);
        assert!(l.is_self_adjoint(1e-14));
        assert_eq!(jordan(&a, &a_alg.unit()).unwrap(), a);
        assert!(lie(&a, &a).unwrap().frobenius_norm() == 0.0);
    }

    #[test]
    fn state_examples() {
        let a_alg = alg(&[2]);
        let phi = StateVec::pure(&a_alg, 0, &[ONE, ZERO]).unwrap();
        let d = BlockElement::new(&a_alg, vec![ComplexMatrix::diag_real(&[0.3, -2.0])]).unwrap();
        assert!((state_eval(&phi, &d).unwrap().re - 0.3).abs() < 1e-15);
        assert!((state_eval(&phi, &a_alg.unit()).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn state_rejects_bad_densities() {
        let a_alg = alg(&[2]);
        let neg = ComplexMatrix::diag_real(&[1.5, -0.5]);
        assert!(StateVec::new(&a_alg, vec![neg]).is_err());
        let half = ComplexMatrix::diag_real(&[0.25, 0.25]);
        assert!(StateVec::new(&a_alg, vec![half]).is_err());
    }

    #[test]
    fn trace_state_reproduces_trace_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a_alg = alg(&[3, 2]);
        let mu = TraceWeights::new(vec![0.4, 0.6]).unwrap();
        let phi = StateVec::from_trace(&a_alg, &mu).unwrap();
        for _ in 0..50 {
            let a = random_element(&mut rng, &a_alg);
            let lhs = state_eval(&phi, &a).unwrap();
            let rhs = trace_eval(&mu, &a).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cstar_identity_through_adjoint(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_element(&mut rng, &alg(&[3, 1, 2]));
            let n = cstar_norm(&a);
            let star = cstar_norm(&a.adjoint().mul(&a).unwrap());
            prop_assert!((star - n * n).abs() <= 1e-9 * (1.0 + n * n));
        }

        #[test]
        fn trace_is_tracial(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a_alg = alg(&[3, 2]);
            let mu = TraceWeights::new(vec![0.25, 0.75]).unwrap();
            let a = random_element(&mut rng, &a_alg);
            let b = random_element(&mut rng, &a_alg);
            let ab = trace_eval(&mu, &a.mul(&b).unwrap()).unwrap();
            let ba = trace_eval(&mu, &b.mul(&a).unwrap()).unwrap();
            prop_assert!((ab - ba).norm() < 1e-10);
        }

        #[test]
        fn inner_product_is_faithful_and_cauchy_schwarz(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a_alg = alg(&[3, 2]);
            let mu = TraceWeights::new(vec![0.1, 0.9]).unwrap();
            let x = random_element(&mut rng, &a_alg);
            let y = random_element(&mut rng, &a_alg);
            let xx = inner_mu(&mu, &x, &x).unwrap();
            let yy = inner_mu(&mu, &y, &y).unwrap();
            prop_assert!(xx.re > 0.0 && xx.im.abs() < 1e-12);
            let xy = inner_mu(&mu, &x, &y).unwrap();
            prop_assert!(xy.norm_sqr() <= xx.re * yy.re * (1.0 + 1e-12));
        }

        #[test]
        fn states_are_bounded(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a_alg = alg(&[2, 2, 1]);
            let phi = random_state(&mut rng, &a_alg);
            let a = random_element(&mut rng, &a_alg);
            prop_assert!(state_eval(&phi, &a).unwrap().norm() <= cstar_norm(&a) + 1e-9);
            let s = random_self_adjoint(&mut rng, &a_alg);
            prop_assert!(state_eval(&phi, &s).unwrap().im.abs() < 1e-12);
        }

        #[test]
        fn jordan_and_lie_preserve_self_adjointness(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a_alg = alg(&[3, 1]);
            let a = random_self_adjoint(&mut rng, &a_alg);
            let b = random_self_adjoint(&mut rng, &a_alg);
            prop_assert!(jordan(&a, &b).unwrap().is_self_adjoint(1e-12));
            prop_assert!(lie(&a, &b).unwrap().is_self_adjoint(1e-12));
        }
    }
}
