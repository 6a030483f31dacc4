//! Seeded verification suites with deterministic JSON reports.
//!
//! Each suite draws its random inputs from a ChaCha generator seeded by the
//! caller, runs a list of checks, and records per check the number of
//! samples, the worst residual, the tolerance and the worst offender.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{cstar_norm, trace_eval, FdCStar, StateVec, TraceWeights};
use crate::cantor::{cantor_oracle, u_element, CantorPoint};
use crate::cfrac::{cf_expand, convergents, dirichlet_holds, DEFAULT_GUARD};
use crate::error::{validation, Result};
use crate::expectation::ExpectationOperator;
use crate::linalg::herm_eigenvalues;
use crate::lipnorm::{quasi_leibniz_margin, LipData};
use crate::mk::{mk_abelian, mk_depth1_closed_form, mk_general, pushforward_under_expectation, sphere_mesh_m2, MkResult};
use crate::random::{random_bits, random_element, random_positive, random_self_adjoint, random_state};
use crate::tower::{cantor_tower, effros_shen_tower, uhf_tower, BetaSequence, EmbeddingLayout, InductiveTower, TowerKind};

/// Names accepted by [`run_suite`].
pub const SUITES: &[&str] = &[
    "expectation-axioms",
    "quasi-leibniz",
    "effros-shen-trace",
    "cfrac-exactness",
    "lip-structure",
    "mk-properties",
    "cantor-oracle",
];

const PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_case: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    /// The failing check with the largest residual-to-tolerance ratio.
    pub fn worst_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().filter(|c| !c.pass).max_by(|a, b| {
            let ra = a.max_residual / a.tolerance.max(f64::MIN_POSITIVE);
            let rb = b.max_residual / b.tolerance.max(f64::MIN_POSITIVE);
            ra.total_cmp(&rb)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

struct Check {
    name: String,
    tolerance: f64,
    samples: usize,
    max_residual: f64,
    worst_case: String,
}

impl Check {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            samples: 0,
            max_residual: 0.0,
            worst_case: String::new(),
        }
    }

    /// Records one residual; NaN counts as a failure.
    fn record(&mut self, residual: f64, case: impl FnOnce() -> String) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        self.samples += 1;
        if r > self.max_residual || self.worst_case.is_empty() {
            self.max_residual = self.max_residual.max(r);
            self.worst_case = case();
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            pass: self.samples > 0 && self.max_residual <= self.tolerance,
            name: self.name,
            samples: self.samples,
            max_residual: self.max_residual,
            tolerance: self.tolerance,
            worst_case: self.worst_case,
        }
    }
}

/// Runs a named suite.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = match name {
        "expectation-axioms" => expectation_axioms(&mut rng)?,
        "quasi-leibniz" => quasi_leibniz(&mut rng)?,
        "effros-shen-trace" => effros_shen_trace(&mut rng)?,
        "cfrac-exactness" => cfrac_exactness(&mut rng)?,
        "lip-structure" => lip_structure(&mut rng)?,
        "mk-properties" => mk_properties(&mut rng)?,
        "cantor-oracle" => cantor_suite(&mut rng)?,
        other => return Err(validation!("unknown suite {other:?}; known suites: {}", SUITES.join(", "))),
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

fn effros_shen_phi(depth: usize) -> Result<(InductiveTower, BetaSequence)> {
    effros_shen_tower(&vec![1; depth], PHI, 1.0)
}

fn expectation_axioms(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let tol = 1e-9;
    let names = [
        "idempotence",
        "nesting",
        "trace-preservation",
        "bimodule",
        "positivity",
        "adjoint",
        "norm-contraction",
    ];
    let mut checks: Vec<Check> = names.iter().map(|n| Check::new(n, tol)).collect();
    let towers = [
        ("effros-shen(phi,5)", effros_shen_phi(5)?.0),
        ("uhf(2^n,5)", uhf_tower(&[1; 5], 5, 1.0)?.0),
    ];
    for (label, t) in &towers {
        let top = t.top_level();
        let ops = (0..=top)
            .map(|n| ExpectationOperator::new(t, n))
            .collect::<Result<Vec<_>>>()?;
        let mu = t.trace(top);
        for i in 0..200 {
            let n = rng.random_range(0..=top);
            let p = rng.random_range(0..=top);
            let case = || format!("{label} sample {i} n={n} p={p}");
            let a = random_element(rng, t.level(top));
            let op = &ops[n];
            let ea = op.apply(&a)?;
            checks[0].record(op.apply(&ea)?.max_abs_diff(&ea), case);
            let nested = ops[p].apply(&ea)?.max_abs_diff(&ops[n.min(p)].apply(&a)?);
            checks[1].record(nested, case);
            checks[2].record((trace_eval(mu, &ea)? - trace_eval(mu, &a)?).norm(), case);
            let b = t.embed(&random_element(rng, t.level(n)), n, top)?;
            let c = t.embed(&random_element(rng, t.level(n)), n, top)?;
            let lhs = op.apply(&b.mul(&a)?.mul(&c)?)?;
            let rhs = b.mul(&ea)?.mul(&c)?;
            checks[3].record(lhs.max_abs_diff(&rhs) / (1.0 + cstar_norm(&rhs)), case);
            let epos = op.apply(&random_positive(rng, t.level(top)))?.real_part();
            let mut neg: f64 = 0.0;
            for blk in epos.blocks() {
                neg = neg.max(-herm_eigenvalues(blk)?[0]);
            }
            checks[4].record(neg, case);
            checks[5].record(op.apply(&a.adjoint())?.max_abs_diff(&ea.adjoint()), case);
            checks[6].record((cstar_norm(&ea) - cstar_norm(&a)).max(0.0), case);
        }
    }
    Ok(checks.into_iter().map(Check::finish).collect())
}

fn quasi_leibniz(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut jordan = Check::new("jordan-margin", 1e-9);
    let mut lie = Check::new("lie-margin", 1e-9);
    let (es, es_beta) = effros_shen_phi(3)?;
    let (uhf, uhf_beta) = uhf_tower(&[1, 1, 1], 3, 1.0)?;
    let lips = [
        ("effros-shen(phi,3)", LipData::new(es, es_beta)?),
        ("uhf(2^n,3)", LipData::new(uhf, uhf_beta)?),
        ("cantor(4,r=2)", LipData::new(cantor_tower(4)?, BetaSequence::cantor(2.0, 4)?)?),
    ];
    for (label, l) in &lips {
        for i in 0..500 {
            let a = random_self_adjoint(rng, l.top());
            let b = random_self_adjoint(rng, l.top());
            let m = quasi_leibniz_margin(l, &a, &b)?;
            jordan.record((-m.jordan).max(0.0), || format!("{label} pair {i}: margin {:.3e}", m.jordan));
            lie.record((-m.lie).max(0.0), || format!("{label} pair {i}: margin {:.3e}", m.lie));
        }
    }
    Ok(vec![jordan.finish(), lie.finish()])
}

fn random_theta(rng: &mut ChaCha8Rng, depth: usize) -> (f64, Vec<u64>) {
    loop {
        let theta: f64 = rng.random_range(1e-3..0.999);
        if let Ok(d) = cf_expand(theta, depth, DEFAULT_GUARD) {
            if effros_shen_tower(&d, theta, 1.0).is_ok() {
                return (theta, d);
            }
        }
    }
}

fn effros_shen_trace(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut range = Check::new("weights-in-unit-interval", 0.0);
    let mut consistency = Check::new("pullback-consistency", 1e-9);
    let mut golden = Check::new("golden-ratio-first-weight", 1e-12);
    let mut identity = Check::new("complement-identity", 1e-10);
    let depth = 8;
    for i in 0..20 {
        let (theta, digits) = random_theta(rng, depth);
        let (t, _) = effros_shen_tower(&digits, theta, 1.0)?;
        let cf = convergents(&digits)?;
        consistency.record(t.consistency_residual(), || format!("theta={theta} (sample {i})"));
        for n in 1..=depth {
            let w = t.trace(n).weights()[0];
            range.record(if w > 0.0 && w < 1.0 { 0.0 } else { 1.0 }, || format!("theta={theta} n={n}"));
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = sign * cf.q_f64(n - 1) * theta.mul_add(cf.q_f64(n), -cf.p_f64(n));
            identity.record((1.0 - w - rhs).abs(), || format!("theta={theta} n={n}"));
        }
    }
    let (t, _) = effros_shen_phi(1)?;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    golden.record((t.trace(1).weights()[0] - phi).abs(), || "t(phi,1)".to_string());
    Ok(vec![range.finish(), consistency.finish(), golden.finish(), identity.finish()])
}

fn cfrac_exactness(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut det = Check::new("determinant-identity", 0.0);
    let mut dirichlet = Check::new("dirichlet-bound", 0.0);
    for i in 0..20 {
        let digits: Vec<u64> = (0..30).map(|_| rng.random_range(1..=50)).collect();
        let cf = convergents(&digits)?;
        for n in 1..=30 {
            let expected = if n % 2 == 1 { BigInt::from(1) } else { BigInt::from(-1) };
            let ok = cf.determinant(n) == expected;
            det.record(if ok { 0.0 } else { 1.0 }, || format!("sequence {i} n={n}"));
        }
    }
    for i in 0..50 {
        let theta: f64 = rng.random_range(1e-3..0.999);
        let depth = (1..=12)
            .rev()
            .find(|&d| cf_expand(theta, d, DEFAULT_GUARD).is_ok())
            .unwrap_or(0);
        if depth == 0 {
            continue;
        }
        let cf = convergents(&cf_expand(theta, depth, DEFAULT_GUARD)?)?;
        for n in 1..=depth {
            let ok = dirichlet_holds(theta, cf.p(n), cf.q(n));
            dirichlet.record(if ok { 0.0 } else { 1.0 }, || format!("theta={theta} (sample {i}) n={n}"));
        }
    }
    Ok(vec![det.finish(), dirichlet.finish()])
}

fn lip_structure(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut unit = Check::new("unit-has-zero-lip", 0.0);
    let mut kernel = Check::new("scalar-kernel", 1e-9);
    let mut unitaries = Check::new("cantor-unitaries", 1e-10);
    let mut contraction = Check::new("weak-contraction", 1e-9);

    let (es, es_beta) = effros_shen_phi(5)?;
    let (uhf, uhf_beta) = uhf_tower(&[1, 1, 1, 1], 4, 1.0)?;
    let lips = [
        ("effros-shen(phi,5)", LipData::new(es, es_beta)?),
        ("uhf(2^n,4)", LipData::new(uhf, uhf_beta)?),
        ("cantor(5,r=2)", LipData::new(cantor_tower(5)?, BetaSequence::cantor(2.0, 5)?)?),
    ];
    for (label, l) in &lips {
        unit.record(l.lip(&l.top().unit())?, || label.to_string());
        for i in 0..20 {
            let a = random_self_adjoint(rng, l.top());
            let c: f64 = rng.random_range(-10.0..10.0);
            let la = l.lip(&a)?;
            let shifted = l.lip(&a.add_scalar(c.into()))?;
            kernel.record((shifted - la).abs() / la.max(1.0), || format!("{label} sample {i} c={c}"));
            kernel.record(l.lip(&l.top().scalar(c.into()))?, || format!("{label} scalar {c}"));
        }
    }
    for r in [1.5, 2.0, 3.0] {
        for depth in 1..=8 {
            let beta = BetaSequence::cantor(r, depth)?;
            let l = LipData::new(cantor_tower(depth)?, beta.clone())?;
            for n in 0..depth {
                let v = l.lip(&u_element(n, depth)?)?;
                let expected = 1.0 / beta.get(n);
                unitaries.record((v - expected).abs() / expected, || format!("r={r} N={depth} n={n}"));
            }
        }
    }
    let l = &lips[0].1;
    for i in 0..200 {
        let a = random_self_adjoint(rng, l.top());
        let n = rng.random_range(0..l.top_level());
        let ea = l.expectation(n).apply(&a)?.real_part();
        let gap = l.lip(&ea)? - l.lip(&a)?;
        contraction.record(gap.max(0.0), || format!("effros-shen(phi,5) sample {i} n={n}"));
    }
    Ok(vec![unit.finish(), kernel.finish(), unitaries.finish(), contraction.finish()])
}

fn m2_lip() -> Result<LipData> {
    let t = InductiveTower::new(
        vec![FdCStar::scalars(), FdCStar::new(vec![2])?],
        vec![EmbeddingLayout::new(vec![vec![0, 0]])],
        vec![TraceWeights::new(vec![1.0])?, TraceWeights::new(vec![1.0])?],
        TowerKind::Explicit,
    )?;
    LipData::new(t, BetaSequence::new(vec![1.0, 1.0])?)
}

fn mk_properties(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let tol = 1e-6;
    let mut symmetry = Check::new("symmetry", tol);
    let mut triangle = Check::new("triangle", tol);
    let mut diameter = Check::new("diameter", tol);
    let mut contraction = Check::new("expectation-contraction", tol);
    let mut closed = Check::new("closed-form-vs-cutting-plane", 1e-4);
    let mut mesh = Check::new("closed-form-vs-mesh", 1e-3);

    let cantor = LipData::new(cantor_tower(4)?, BetaSequence::cantor(2.0, 4)?)?;
    let (es, es_beta) = effros_shen_phi(2)?;
    let es = LipData::new(es, es_beta)?;
    type Solver = fn(&LipData, &StateVec, &StateVec) -> Result<MkResult>;
    let solvers: [(&str, &LipData, Solver, usize); 2] = [
        ("cantor(4,r=2)", &cantor, mk_abelian, 20),
        ("effros-shen(phi,2)", &es, |l, a, b| mk_general(l, a, b, 1e-7), 20),
    ];
    for (label, l, solve, count) in solvers {
        for i in 0..count {
            let s: Vec<StateVec> = (0..3).map(|_| random_state(rng, l.top())).collect();
            let case = || format!("{label} triple {i}");
            let d01 = solve(l, &s[0], &s[1])?;
            let d10 = solve(l, &s[1], &s[0])?;
            let d12 = solve(l, &s[1], &s[2])?;
            let d02 = solve(l, &s[0], &s[2])?;
            symmetry.record((d01.lower - d10.upper).max(d10.lower - d01.upper).max(0.0), case);
            triangle.record((d02.lower - d01.upper - d12.upper).max(0.0), case);
            for d in [&d01, &d02, &d12] {
                diameter.record((d.lower - 2.0 * l.beta().get(0)).max(0.0), case);
            }
            for n in 0..l.top_level() {
                let pushed = pushforward_under_expectation(&s[0], l.expectation(n))?;
                let d = solve(l, &s[0], &pushed)?;
                contraction.record((d.lower - l.beta().get(n)).max(0.0), || format!("{label} state {i} n={n}"));
            }
        }
    }
    let m2 = m2_lip()?;
    for i in 0..20 {
        let phi = random_state(rng, m2.top());
        let psi = random_state(rng, m2.top());
        let exact = mk_depth1_closed_form(1.0, &phi, &psi)?;
        let grid = sphere_mesh_m2(1.0, &phi, &psi, 50_000)?;
        mesh.record((exact - grid).abs(), || format!("M(2) pair {i}"));
        let cp = mk_general(&m2, &phi, &psi, 1e-6)?;
        closed.record((cp.value() - exact).abs(), || format!("M(2) pair {i}"));
    }
    Ok([symmetry, triangle, diameter, contraction, closed, mesh]
        .into_iter()
        .map(Check::finish)
        .collect())
}

fn cantor_suite(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut check = Check::new("mk-equals-ultrametric", 1e-7);
    for depth in 4..=10 {
        for r in [1.5, 2.0, 3.0] {
            let beta = BetaSequence::cantor(r, depth)?;
            let l = LipData::new(cantor_tower(depth)?, beta.clone())?;
            for i in 0..50 {
                let x = CantorPoint::new(random_bits(rng, depth))?;
                let y = CantorPoint::new(random_bits(rng, depth))?;
                let phi = StateVec::point(l.top(), x.index(depth)?)?;
                let psi = StateVec::point(l.top(), y.index(depth)?)?;
                let mk = mk_abelian(&l, &phi, &psi)?.lower;
                let expected = match x.bits().iter().zip(y.bits()).position(|(a, b)| a != b) {
                    Some(n0) => r.powi(-(n0 as i32)),
                    None => 0.0,
                };
                debug_assert_eq!(cantor_oracle(&x, &y, &beta)?, expected);
                check.record((mk - expected).abs(), || format!("N={depth} r={r} pair {i}: {x} vs {y}"));
            }
        }
    }
    Ok(vec![check.finish()])
}
