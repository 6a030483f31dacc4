//! Monge-Kantorovich distances `mk(phi, psi) = sup { |phi(a) - psi(a)| : L(a) <= 1 }`.
//!
//! Three solvers:
//! * an exact LP for Abelian towers, reduced by the symmetries of the
//!   Bratteli tree,
//! * Kelley cutting planes for general towers, returning a certified bracket,
//! * the closed form `beta(0) ||sigma_phi - sigma_psi||_1` on a depth-one
//!   tower `C -> M(d)`, used as a test oracle.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::algebra::{state_eval, FdCStar, StateVec};
use crate::error::{shape, validation, Error, Result};
use crate::expectation::ExpectationOperator;
use crate::linalg::{trace_norm_hermitian, ComplexMatrix};
use crate::lipnorm::{self_adjoint_basis, LinearLip, LipData};
use crate::simplex::{LpStatus, Tableau};

/// Iteration cap for the cutting-plane solver.
pub const MAX_CUTTING_PLANE_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MkMethod {
    LpExact,
    CuttingPlane,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MkResult {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub method: MkMethod,
    pub converged: bool,
}

impl MkResult {
    /// Midpoint of the bracket.
    pub fn value(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

fn check_states(l: &LipData, phi: &StateVec, psi: &StateVec) -> Result<()> {
    if phi.parent() != l.top() || psi.parent() != l.top() {
        return Err(shape!("states must live on the top level {:?}", l.top().block_dims()));
    }
    Ok(())
}

/// Exact LP on an Abelian tower.
pub fn mk_abelian(l: &LipData, phi: &StateVec, psi: &StateVec) -> Result<MkResult> {
    abelian_lp(l, phi, psi, true)
}

/// The same LP with one variable per point and no symmetry reduction.
/// Only practical for small depths; kept as a cross-check.
pub fn mk_abelian_unreduced(l: &LipData, phi: &StateVec, psi: &StateVec) -> Result<MkResult> {
    abelian_lp(l, phi, psi, false)
}

/// Orbit of every top-level point under the automorphisms of the Bratteli
/// tree that preserve the objective weight and trace weight of each point.
fn leaf_orbits(l: &LipData, weights: &[f64]) -> Result<Vec<usize>> {
    let tower = l.tower();
    let top = tower.top_level();
    let tau = tower.trace(top).weights();

    // Parent of each block, level by level.
    let parents: Vec<Vec<usize>> = (0..top)
        .map(|n| tower.layout(n).targets().iter().map(|list| list[0]).collect())
        .collect();

    // Bottom-up isomorphism classes of the labelled subtrees.
    let mut class_ids: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut intern = |key: Vec<u64>| {
        let next = class_ids.len();
        *class_ids.entry(key).or_insert(next)
    };
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); top + 1];
    classes[top] = weights
        .iter()
        .zip(tau)
        .map(|(w, t)| intern(vec![0, w.to_bits(), t.to_bits()]))
        .collect();
    for n in (0..top).rev() {
        let mut children: Vec<Vec<u64>> = vec![vec![1]; tower.level(n).num_blocks()];
        for (j, &p) in parents[n].iter().enumerate() {
            children[p].push(classes[n + 1][j] as u64);
        }
        classes[n] = children
            .into_iter()
            .map(|mut c| {
                c[1..].sort_unstable();
                intern(c)
            })
            .collect();
    }

    // Top-down orbits: children of one node with the same class are swapped
    // by an automorphism, so an orbit is determined by the parent's orbit and
    // the child's class.
    let mut orbit = vec![0usize];
    for n in 0..top {
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        orbit = parents[n]
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let next = ids.len();
                *ids.entry((orbit[p], classes[n + 1][j])).or_insert(next)
            })
            .collect();
    }
    Ok(orbit)
}

fn abelian_lp(l: &LipData, phi: &StateVec, psi: &StateVec, reduce: bool) -> Result<MkResult> {
    check_states(l, phi, psi)?;
    if !l.tower().is_abelian() {
        return Err(validation!("mk_abelian needs an Abelian tower; use mk_general"));
    }
    let tower = l.tower();
    let top = tower.top_level();
    let npts = tower.level(top).num_blocks();
    let p = phi.probabilities()?;
    let q = psi.probabilities()?;
    let w: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
    if top == 0 || w.iter().all(|&v| v == 0.0) {
        return Ok(MkResult {
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            method: MkMethod::LpExact,
            converged: true,
        });
    }
    let tau = tower.trace(top).weights();

    let orbit = if reduce { leaf_orbits(l, &w)? } else { (0..npts).collect() };
    let nvar = orbit.iter().max().map_or(0, |m| m + 1);
    let mut rep = vec![usize::MAX; nvar];
    let mut c = vec![0.0; nvar];
    for (pt, &o) in orbit.iter().enumerate() {
        if rep[o] == usize::MAX {
            rep[o] = pt;
        }
        c[o] += w[pt];
    }

    // Ancestor cylinders: leaves under each level-n block.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for n in 0..top {
        let beta = l.beta().get(n);
        let placements = tower.placements(n, top)?;
        let mut ancestor = vec![0usize; npts];
        for (k, list) in placements.iter().enumerate() {
            for &(leaf, _) in list {
                ancestor[leaf] = k;
            }
        }
        for &pt in &rep {
            let cyl = &placements[ancestor[pt]];
            let norm: f64 = cyl.iter().map(|&(leaf, _)| tau[leaf]).sum();
            let mut g = vec![0.0; nvar];
            g[orbit[pt]] += 1.0;
            for &(leaf, _) in cyl {
                g[orbit[leaf]] -= tau[leaf] / norm;
            }
            let mut key: Vec<u64> = g.iter().map(|v| v.to_bits()).collect();
            key.push(beta.to_bits());
            if !seen.insert(key) {
                continue;
            }
            rows.push(g.iter().map(|v| -v).collect());
            rhs.push(beta);
            rows.push(g);
            rhs.push(beta);
        }
    }

    // Variables y = f - min f >= 0; constants do not change the objective
    // because sum(c) = 0.
    let mut tab = Tableau::new(&c, &rows, &rhs)?;
    let status = tab.solve()?;
    if status != LpStatus::Optimal {
        return Err(Error::Unconverged(format!("Abelian LP ended with status {status:?}")));
    }
    let sol = tab.solution();
    let lower = sol.objective;

    // Weak duality with a correction for any dual infeasibility: an optimal
    // y can be taken with min y = 0, hence y <= 2 beta(0).
    let mut aty = vec![0.0; nvar];
    for (row, &yv) in rows.iter().zip(&sol.duals) {
        for (acc, &a) in aty.iter_mut().zip(row) {
            *acc += a * yv;
        }
    }
    let dual_obj: f64 = rhs.iter().zip(&sol.duals).map(|(b, y)| b * y).sum();
    let slack: f64 = c.iter().zip(&aty).map(|(cj, aj)| (cj - aj).max(0.0)).sum();
    let upper = (dual_obj + 2.0 * l.beta().get(0) * slack).max(lower);
    Ok(MkResult {
        lower,
        upper,
        iterations: sol.pivots,
        method: MkMethod::LpExact,
        converged: true,
    })
}

/// Kelley cutting planes over `{a = a*, mu(a) = 0, ||a - E_n a|| <= beta(n)}`.
///
/// Every master LP is a relaxation, so its value is an upper bound; scaling
/// the master solution back into the feasible set gives a lower bound.
pub fn mk_general(l: &LipData, phi: &StateVec, psi: &StateVec, tol: f64) -> Result<MkResult> {
    mk_general_capped(l, phi, psi, tol, MAX_CUTTING_PLANE_ITERATIONS)
}

pub fn mk_general_capped(
    l: &LipData,
    phi: &StateVec,
    psi: &StateVec,
    tol: f64,
    max_iterations: usize,
) -> Result<MkResult> {
    check_states(l, phi, psi)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(validation!("tolerance must be positive"));
    }
    let top = l.top();
    let basis = self_adjoint_basis(top);
    let d = basis.len();
    let mut c = Vec::with_capacity(d);
    for b in &basis {
        c.push((state_eval(phi, b)? - state_eval(psi, b)?).re);
    }
    if top.num_blocks() == 1 && top.block_dims()[0] == 1 || c.iter().all(|&v| v == 0.0) {
        return Ok(MkResult {
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            method: MkMethod::CuttingPlane,
            converged: true,
        });
    }
    let lin = LinearLip::new(l, &basis)?;
    let mu = l.tower().trace(l.top_level());
    let mu_coeffs: Vec<f64> = basis
        .iter()
        .map(|b| crate::algebra::trace_eval(mu, b).map(|z| z.re))
        .collect::<Result<_>>()?;

    let bound = 2.0 * l.beta().get(0) * top.dimension() as f64;
    let mut obj = c.clone();
    obj.extend(c.iter().map(|v| -v));
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * d + 2);
    let mut rhs = Vec::with_capacity(2 * d + 2);
    for j in 0..2 * d {
        let mut r = vec![0.0; 2 * d];
        r[j] = 1.0;
        rows.push(r);
        rhs.push(bound);
    }
    let mut m_row = mu_coeffs.clone();
    m_row.extend(mu_coeffs.iter().map(|v| -v));
    rows.push(m_row.clone());
    rhs.push(0.0);
    rows.push(m_row.iter().map(|v| -v).collect());
    rhs.push(0.0);

    let mut tab = Tableau::new(&obj, &rows, &rhs)?;
    let mut status = tab.solve()?;
    let betas: Vec<f64> = (0..l.top_level()).map(|n| l.beta().get(n)).collect();
    let mut lower = 0.0f64;
    let mut upper = f64::INFINITY;
    for iter in 1..=max_iterations {
        if status != LpStatus::Optimal {
            return Err(Error::Unconverged(format!("master LP ended with status {status:?}")));
        }
        let sol = tab.solution();
        upper = upper.min(sol.objective);
        let x: Vec<f64> = (0..d).map(|j| sol.x[j] - sol.x[d + j]).collect();
        let norms: Vec<f64> = (0..betas.len()).map(|n| lin.deviation_norm(n, &x)).collect();
        let ratio = norms
            .iter()
            .zip(&betas)
            .map(|(h, b)| h / b)
            .fold(1.0, f64::max);
        let value: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        lower = lower.max(value / ratio);
        if upper - lower <= tol {
            return Ok(MkResult {
                lower,
                upper: upper.max(lower),
                iterations: iter,
                method: MkMethod::CuttingPlane,
                converged: true,
            });
        }
        let mut added = false;
        for n in 0..betas.len() {
            if norms[n] <= betas[n] {
                continue;
            }
            let (k, lam, v) = lin.extreme_eigenpair(n, &x)?;
            let s = lam.signum();
            let g: Vec<f64> = lin.quadratic_forms(n, k, &v).into_iter().map(|q| s * q).collect();
            let mut row = g.clone();
            row.extend(g.iter().map(|v| -v));
            tab.add_row(&row, betas[n])?;
            added = true;
        }
        if !added {
            // Feasible master optimum: the bracket is closed up to rounding.
            return Ok(MkResult {
                lower,
                upper: upper.max(lower),
                iterations: iter,
                method: MkMethod::CuttingPlane,
                converged: true,
            });
        }
        status = tab.reoptimize()?;
    }
    Ok(MkResult {
        lower,
        upper: upper.max(lower),
        iterations: max_iterations,
        method: MkMethod::CuttingPlane,
        converged: false,
    })
}

/// `beta0 ||sigma_phi - sigma_psi||_1` for states on a single matrix block.
pub fn mk_depth1_closed_form(beta0: f64, phi: &StateVec, psi: &StateVec) -> Result<f64> {
    if phi.parent() != psi.parent() {
        return Err(shape!("states live on different algebras"));
    }
    if phi.parent().num_blocks() != 1 {
        return Err(shape!("the closed form needs a single matrix block"));
    }
    if !(beta0.is_finite() && beta0 > 0.0) {
        return Err(validation!("beta(0) must be positive"));
    }
    let diff = phi.difference(psi)?;
    Ok(beta0 * trace_norm_hermitian(diff.block(0))?)
}

/// The state `a -> phi(E_n(a))` on the top level.
pub fn pushforward_under_expectation(phi: &StateVec, op: &ExpectationOperator) -> Result<StateVec> {
    if phi.parent() != op.top() {
        return Err(shape!(
            "state on {:?} but the expectation acts on {:?}",
            phi.parent().block_dims(),
            op.top().block_dims()
        ));
    }
    let top: &FdCStar = op.top();
    let sigma = phi.density_blocks();
    let mut rho: Vec<ComplexMatrix> = top
        .block_dims()
        .iter()
        .map(|&d| ComplexMatrix::zeros(d, d))
        .collect();
    let dims = op.target().block_dims();
    for (k, list) in op.placements().iter().enumerate() {
        let d = dims[k];
        // phi(f_{k,j,m}) summed over the copies.
        let mut pf = ComplexMatrix::zeros(d, d);
        for &(jj, off) in list {
            for j in 0..d {
                for m in 0..d {
                    pf[(j, m)] += sigma[jj][(off + m, off + j)];
                }
            }
        }
        for &(jj, off) in list {
            let w = op.tau()[jj] / op.norms()[k];
            for j in 0..d {
                for m in 0..d {
                    rho[jj][(off + m, off + j)] += pf[(j, m)] * w;
                }
            }
        }
    }
    let rho = rho.into_iter().map(|b| b.hermitian_part()).collect();
    Ok(StateVec::from_parts_unchecked(top.clone(), rho))
}

/// Brute-force `mk` on `C -> M(2)` with weights `(beta0, ..)`: maximizes
/// `|Tr(D a)|` over a Fibonacci lattice of `points` unit vectors `(x, y, z)`,
/// with `a = beta0 (x s_x + y s_y + z s_z)` ranging over traceless Hermitian
/// matrices of operator norm `beta0`. A lower bound that converges as the
/// lattice refines.
pub fn sphere_mesh_m2(beta0: f64, phi: &StateVec, psi: &StateVec, points: usize) -> Result<f64> {
    if phi.parent().block_dims() != [2] {
        return Err(shape!("the mesh oracle works on M(2)"));
    }
    let d = phi.difference(psi)?;
    let dm = d.block(0);
    let gx = 2.0 * dm[(0, 1)].re;
    let gy = -2.0 * dm[(0, 1)].im;
    let gz = dm[(0, 0)].re - dm[(1, 1)].re;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut best = 0.0f64;
    for i in 0..points {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / points as f64;
        let r = (1.0 - z * z).sqrt();
        let th = golden * i as f64;
        let (x, y) = (r * th.cos(), r * th.sin());
        best = best.max((gx * x + gy * y + gz * z).abs());
    }
    Ok(beta0 * best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::TraceWeights;
    use crate::linalg::{C64, ONE};
    use crate::random::{random_element, random_state};
    use crate::tower::{cantor_tower, effros_shen_tower, BetaSequence, EmbeddingLayout, InductiveTower, TowerKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PHI: f64 = 0.618_033_988_749_894_9;

    fn cantor_lip(depth: usize, r: f64) -> LipData {
        LipData::new(cantor_tower(depth).unwrap(), BetaSequence::cantor(r, depth).unwrap()).unwrap()
    }

    fn m2_lip() -> LipData {
        let t = InductiveTower::new(
            vec![FdCStar::scalars(), FdCStar::new(vec![2]).unwrap()],
            vec![EmbeddingLayout::new(vec![vec![0, 0]])],
            vec![TraceWeights::new(vec![1.0]).unwrap(), TraceWeights::new(vec![1.0]).unwrap()],
            TowerKind::Explicit,
        )
        .unwrap();
        LipData::new(t, BetaSequence::new(vec![1.0, 1.0]).unwrap()).unwrap()
    }

    fn point(l: &LipData, bits: &[u8]) -> StateVec {
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        StateVec::point(l.top(), idx).unwrap()
    }

    #[test]
    fn equal_states_have_zero_distance() {
        let l = cantor_lip(4, 2.0);
        let x = point(&l, &[0, 1, 1, 0]);
        let r = mk_abelian(&l, &x, &x).unwrap();
        assert_eq!((r.lower, r.upper), (0.0, 0.0));
        let l2 = m2_lip();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let phi = random_state(&mut rng, l2.top());
        assert_eq!(mk_general(&l2, &phi, &phi, 1e-8).unwrap().upper, 0.0);
        assert_eq!(mk_depth1_closed_form(1.0, &phi, &phi).unwrap(), 0.0);
    }

    #[test]
    fn cantor_points_match_ultrametric() {
        let l = cantor_lip(4, 2.0);
        let x = point(&l, &[0, 1, 1, 0]);
        let y = point(&l, &[0, 0, 1, 0]);
        let r = mk_abelian(&l, &x, &y).unwrap();
        assert!((r.lower - 0.5).abs() < 1e-9 && (r.upper - 0.5).abs() < 1e-9);
        let r3 = cantor_lip(5, 3.0);
        let a = point(&r3, &[1, 0, 1, 1, 0]);
        let b = point(&r3, &[1, 0, 0, 1, 1]);
        assert!((mk_abelian(&r3, &a, &b).unwrap().lower - 1.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn reduced_lp_matches_unreduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for depth in 2..=5 {
            let l = cantor_lip(depth, 1.5);
            for _ in 0..4 {
                let phi = random_state(&mut rng, l.top());
                let psi = random_state(&mut rng, l.top());
                let a = mk_abelian(&l, &phi, &psi).unwrap();
                let b = mk_abelian_unreduced(&l, &phi, &psi).unwrap();
                assert!((a.lower - b.lower).abs() < 1e-9, "depth {depth}");
                assert!(a.upper - a.lower <= 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let l = m2_lip();
        let e0 = StateVec::pure(l.top(), 0, &[ONE, C64::new(0.0, 0.0)]).unwrap();
        let e1 = StateVec::pure(l.top(), 0, &[C64::new(0.0, 0.0), ONE]).unwrap();
        assert!((mk_depth1_closed_form(1.0, &e0, &e1).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_agrees_with_brute_force() {
        let l = m2_lip();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let phi = random_state(&mut rng, l.top());
            let psi = random_state(&mut rng, l.top());
            let exact = mk_depth1_closed_form(1.0, &phi, &psi).unwrap();
            let mesh = sphere_mesh_m2(1.0, &phi, &psi, 50_000).unwrap();
            assert!(mesh <= exact + 1e-12);
            assert!(exact - mesh <= 1e-3);
        }
    }

    #[test]
    fn cutting_planes_match_closed_form() {
        let l = m2_lip();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..5 {
            let phi = random_state(&mut rng, l.top());
            let psi = random_state(&mut rng, l.top());
            let exact = mk_depth1_closed_form(1.0, &phi, &psi).unwrap();
            let r = mk_general(&l, &phi, &psi, 1e-6).unwrap();
            assert!(r.converged);
            assert!(r.lower <= exact + 1e-9 && exact <= r.upper + 1e-9);
            assert!((r.value() - exact).abs() <= 1e-4);
        }
    }

    #[test]
    fn general_solver_matches_lp_on_cantor() {
        let l = cantor_lip(3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..3 {
            let phi = random_state(&mut rng, l.top());
            let psi = random_state(&mut rng, l.top());
            let a = mk_abelian(&l, &phi, &psi).unwrap();
            let g = mk_general(&l, &phi, &psi, 1e-7).unwrap();
            assert!((a.lower - g.value()).abs() <= 1e-6, "{a:?} {g:?}");
        }
    }

    #[test]
    fn pushforward_examples() {
        let (t, beta) = effros_shen_tower(&[1, 1, 1], PHI, 1.0).unwrap();
        let l = LipData::new(t.clone(), beta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let phi = random_state(&mut rng, l.top());
        let top = ExpectationOperator::new(&t, 3).unwrap();
        let same = pushforward_under_expectation(&phi, &top).unwrap();
        for (a, b) in same.density_blocks().iter().zip(phi.density_blocks()) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
        let mu = StateVec::from_trace(l.top(), t.trace(3)).unwrap();
        for n in 0..3 {
            let op = ExpectationOperator::new(&t, n).unwrap();
            let pushed = pushforward_under_expectation(&mu, &op).unwrap();
            for (a, b) in pushed.density_blocks().iter().zip(mu.density_blocks()) {
                assert!(a.max_abs_diff(b) < 1e-12);
            }
            for _ in 0..5 {
                let a = random_element(&mut rng, l.top());
                let lhs = state_eval(&pushforward_under_expectation(&phi, &op).unwrap(), &a).unwrap();
                let rhs = state_eval(&phi, &op.apply(&a).unwrap()).unwrap();
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cantor_point_pushforward_is_cylinder_average() {
        let t = cantor_tower(3).unwrap();
        let op = ExpectationOperator::new(&t, 1).unwrap();
        let x = StateVec::point(t.level(3), 0b101).unwrap();
        let pushed = pushforward_under_expectation(&x, &op).unwrap();
        let p = pushed.probabilities().unwrap();
        assert_eq!(p, vec![0.0, 0.0, 0.0, 0.0, 0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn expectation_contraction_and_diameter() {
        let (t, beta) = effros_shen_tower(&[1, 1], PHI, 1.0).unwrap();
        let l = LipData::new(t.clone(), beta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let tol = 1e-6;
        for _ in 0..3 {
            let phi = random_state(&mut rng, l.top());
            for n in 0..2 {
                let op = ExpectationOperator::new(&t, n).unwrap();
                let pushed = pushforward_under_expectation(&phi, &op).unwrap();
                let r = mk_general(&l, &phi, &pushed, tol).unwrap();
                assert!(r.lower <= l.beta().get(n) + tol, "n={n} {r:?}");
            }
            let psi = random_state(&mut rng, l.top());
            let r = mk_general(&l, &phi, &psi, tol).unwrap();
            assert!(r.lower <= 2.0 * l.beta().get(0) + tol);
        }
    }
}
