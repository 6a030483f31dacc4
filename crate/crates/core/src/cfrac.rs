//! Continued fractions with exact big-integer convergents, and the Baire
//! space ultrametric on digit sequences.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Default remainder guard for [`cf_expand`].
pub const DEFAULT_GUARD: f64 = 1e-12;

/// Digits `r_1..r_N` with convergents `p_n / q_n` for `n = 0..N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfExpansion {
    digits: Vec<u64>,
    p: Vec<BigInt>,
    q: Vec<BigInt>,
}

impl CfExpansion {
    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn p(&self, n: usize) -> &BigInt {
        &self.p[n]
    }

    pub fn q(&self, n: usize) -> &BigInt {
        &self.q[n]
    }

    pub fn p_all(&self) -> &[BigInt] {
        &self.p
    }

    pub fn q_all(&self) -> &[BigInt] {
        &self.q
    }

    /// `q_n` as a float; infinite if it does not fit.
    pub fn q_f64(&self, n: usize) -> f64 {
        self.q[n].to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn p_f64(&self, n: usize) -> f64 {
        self.p[n].to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn q_u64(&self, n: usize) -> Option<u64> {
        self.q[n].to_u64()
    }

    pub fn p_u64(&self, n: usize) -> Option<u64> {
        self.p[n].to_u64()
    }

    /// `p_n q_{n-1} - p_{n-1} q_n` for `n >= 1`.
    pub fn determinant(&self, n: usize) -> BigInt {
        assert!(n >= 1 && n <= self.depth(), "determinant index out of range");
        &self.p[n] * &self.q[n - 1] - &self.p[n - 1] * &self.q[n]
    }

    /// The value of the finite continued fraction `[0; r_1, ..., r_N]`.
    pub fn value(&self) -> f64 {
        let n = self.depth();
        self.p_f64(n) / self.q_f64(n)
    }
}

/// Exact convergents of `[0; r_1, ..., r_N]`.
pub fn convergents(digits: &[u64]) -> Result<CfExpansion> {
    if digits.contains(&0) {
        return Err(validation!("continued fraction digits must be at least 1"));
    }
    let mut p = vec![BigInt::zero()];
    let mut q = vec![BigInt::one()];
    if let Some(&r1) = digits.first() {
        p.push(BigInt::one());
        q.push(BigInt::from(r1));
    }
    for (n, &r) in digits.iter().enumerate().skip(1) {
        let r = BigInt::from(r);
        let pn = &r * &p[n] + &p[n - 1];
        let qn = &r * &q[n] + &q[n - 1];
        p.push(pn);
        q.push(qn);
    }
    Ok(CfExpansion {
        digits: digits.to_vec(),
        p,
        q,
    })
}

/// Expands `theta` in `(0, 1)` to `depth` digits with the Gauss map.
///
/// Floats are rational, so each step tracks a bound on the accumulated
/// rounding error of the remainder. The expansion fails with a precision
/// error when the remainder drops below `guard` or when the rounding bound
/// leaves a digit ambiguous.
pub fn cf_expand(theta: f64, depth: usize, guard: f64) -> Result<Vec<u64>> {
    if !(theta.is_finite() && theta > 0.0 && theta < 1.0) {
        return Err(validation!("theta must lie in (0,1), got {theta}"));
    }
    if !(guard.is_finite() && guard > 0.0) {
        return Err(validation!("guard must be positive"));
    }
    let eps = f64::EPSILON;
    let mut x = theta;
    let mut err = eps * theta;
    let mut digits = Vec::with_capacity(depth);
    for n in 1..=depth {
        if x <= guard.max(err) {
            return Err(Error::Precision(format!(
                "remainder {x:.3e} at step {n} is below the guard; theta is too close to a rational for depth {depth}"
            )));
        }
        let y = 1.0 / x;
        let err_y = err / (x * x) * (1.0 + err / x) + eps * y;
        let r = y.floor();
        let frac = y - r;
        if frac <= err_y || 1.0 - frac <= err_y {
            return Err(Error::Precision(format!(
                "digit {n} is ambiguous within the accumulated rounding error {err_y:.3e}"
            )));
        }
        if r > u64::MAX as f64 / 2.0 {
            return Err(Error::Precision(format!("digit {n} overflows")));
        }
        digits.push(r as u64);
        x = frac;
        err = err_y + eps;
    }
    Ok(digits)
}

/// Exact check of `|theta - p/q| < 1/q^2` for a finite positive `theta`,
/// through its binary expansion `theta = m / 2^s`: the claim is
/// `|m q - p 2^s| q < 2^s`.
pub fn dirichlet_holds(theta: f64, p: &BigInt, q: &BigInt) -> bool {
    if !(theta.is_finite() && theta > 0.0) {
        return false;
    }
    let bits = theta.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = (bits & ((1u64 << 52) - 1)) | if exp == 0 { 0 } else { 1u64 << 52 };
    let s = 1075 - exp.max(1);
    if s <= 0 {
        return false;
    }
    let two_s = BigInt::one() << (s as usize);
    let lhs = (BigInt::from(mant) * q - p * &two_s).magnitude().clone() * q.magnitude();
    lhs < *two_s.magnitude()
}

/// Baire distance between two digit prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaireDistance {
    /// Witnessed: a first disagreement, or equality over equal-length spans.
    Exact(f64),
    /// Prefixes agree on the shorter span but have different lengths; the
    /// distance is at most `2^-span`.
    Undetermined { span: usize, upper: f64 },
}

impl BaireDistance {
    pub fn exact(&self) -> Option<f64> {
        match *self {
            BaireDistance::Exact(d) => Some(d),
            BaireDistance::Undetermined { .. } => None,
        }
    }
}

/// Index of the first disagreement over the common span.
pub fn first_disagreement<T: PartialEq>(x: &[T], y: &[T]) -> Option<usize> {
    x.iter().zip(y).position(|(a, b)| a != b)
}

/// `2^-min{n : x(n) != y(n)}`, zero on equal spans.
pub fn baire_distance(x: &[u64], y: &[u64]) -> BaireDistance {
    match first_disagreement(x, y) {
        Some(n) => BaireDistance::Exact((-(n as f64)).exp2()),
        None if x.len() == y.len() => BaireDistance::Exact(0.0),
        None => {
            let span = x.len().min(y.len());
            BaireDistance::Undetermined {
                span,
                upper: (-(span as f64)).exp2(),
            }
        }
    }
}

/// The set of sequences with `lower(n) <= x(n) <= upper(n)`, described on a
/// finite prefix plus a rule that applies to every later index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaireBox {
    lower: Vec<u64>,
    /// `None` means unbounded.
    upper: Vec<Option<u64>>,
    tail_lower: u64,
    tail_upper: Option<u64>,
}

impl BaireBox {
    pub fn new(
        lower: Vec<u64>,
        upper: Vec<Option<u64>>,
        tail_lower: u64,
        tail_upper: Option<u64>,
    ) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(validation!("lower and upper prefixes differ in length"));
        }
        for (n, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if u.is_some_and(|u| u < *l) {
                return Err(validation!("lower exceeds upper at index {n}"));
            }
        }
        if tail_upper.is_some_and(|u| u < tail_lower) {
            return Err(validation!("tail lower bound exceeds tail upper bound"));
        }
        Ok(Self {
            lower,
            upper,
            tail_lower,
            tail_upper,
        })
    }

    pub fn contains(&self, x: &[u64]) -> bool {
        x.iter().enumerate().all(|(n, &v)| {
            let (l, u) = match (self.lower.get(n), self.upper.get(n)) {
                (Some(&l), Some(&u)) => (l, u),
                _ => (self.tail_lower, self.tail_upper),
            };
            v >= l && u.is_none_or(|u| v <= u)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxPredicates {
    pub closed: bool,
    pub totally_bounded: bool,
}

/// Boxes are closed: membership is decided coordinatewise and each
/// coordinate condition is clopen. Total boundedness holds iff every
/// prefix set `{x|_n}` is finite, i.e. every upper bound is finite.
pub fn box_predicates(b: &BaireBox) -> BoxPredicates {
    BoxPredicates {
        closed: true,
        totally_bounded: b.upper.iter().all(Option::is_some) && b.tail_upper.is_some(),
    }
}
