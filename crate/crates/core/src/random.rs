//! Seeded random elements and states for the verification suites.
//!
//! Entries are standard complex Gaussians; states are normalized Wishart
//! draws so every block carries some mass.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{BlockElement, FdCStar, StateVec};
use crate::linalg::{ComplexMatrix, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let data = (0..rows * cols).map(|_| gaussian(rng)).collect();
    ComplexMatrix::from_vec(rows, cols, data).expect("gaussian entries are finite")
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    random_matrix(rng, n, n).hermitian_part()
}

pub fn random_element<R: Rng + ?Sized>(rng: &mut R, alg: &FdCStar) -> BlockElement {
    let blocks = alg
        .block_dims()
        .iter()
        .map(|&d| random_matrix(rng, d, d))
        .collect();
    BlockElement::from_parts_unchecked(alg.clone(), blocks)
}

pub fn random_self_adjoint<R: Rng + ?Sized>(rng: &mut R, alg: &FdCStar) -> BlockElement {
    random_element(rng, alg).real_part()
}

/// `g g*` for a random `g`: positive semidefinite.
pub fn random_positive<R: Rng + ?Sized>(rng: &mut R, alg: &FdCStar) -> BlockElement {
    let g = random_element(rng, alg);
    g.mul(&g.adjoint()).expect("same parent").real_part()
}

pub fn random_state<R: Rng + ?Sized>(rng: &mut R, alg: &FdCStar) -> StateVec {
    let p = random_positive(rng, alg);
    let total: f64 = p.blocks().iter().map(|b| b.trace().re).sum();
    let blocks = p
        .into_blocks()
        .into_iter()
        .map(|b| b.scale(C64::new(1.0 / total, 0.0)).hermitian_part())
        .collect();
    StateVec::from_parts_unchecked(alg.clone(), blocks)
}

/// Uniformly random bit string of length `n`.
pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}
