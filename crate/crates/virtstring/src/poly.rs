//! Sparse exact polynomials over the integers and the `u`-invariants.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::string::{OpenString, VirtualString};

/// A sparse polynomial in `t` with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IntPoly {
    // exponent -> nonzero coefficient
    coeffs: BTreeMap<u32, i64>,
}

impl IntPoly {
    pub fn zero() -> Self {
        IntPoly::default()
    }

    pub fn monomial(exp: u32, coeff: i64) -> Self {
        let mut p = IntPoly::zero();
        p.add_term(exp, coeff);
        p
    }

    pub fn from_terms(terms: &[(u32, i64)]) -> Self {
        let mut p = IntPoly::zero();
        for &(e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, exp: u32, coeff: i64) {
        if coeff == 0 {
            return;
        }
        let slot = self.coeffs.entry(exp).or_insert(0);
        *slot += coeff;
        if *slot == 0 {
            self.coeffs.remove(&exp);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, exp: u32) -> i64 {
        self.coeffs.get(&exp).copied().unwrap_or(0)
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, i64)> + '_ {
        self.coeffs.iter().map(|(&e, &c)| (e, c))
    }

    /// Value at 0, i.e. the constant term.
    pub fn eval_at_zero(&self) -> i64 {
        self.coeff(0)
    }

    /// Exact derivative at 1: the integer sum of `k * c_k`.
    pub fn derivative_at_one(&self) -> i64 {
        self.terms().map(|(e, c)| e as i64 * c).sum()
    }

    /// Substitute `t -> t^r`.
    pub fn compose_power(&self, r: u32) -> IntPoly {
        let mut p = IntPoly::zero();
        for (e, c) in self.terms() {
            p.add_term(e * r, c);
        }
        p
    }

    pub fn scale(&self, k: i64) -> IntPoly {
        let mut p = IntPoly::zero();
        for (e, c) in self.terms() {
            p.add_term(e, c * k);
        }
        p
    }

    /// Text form with canonical descending exponents, e.g. `2t^4-4t^2`.
    pub fn to_text(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (&e, &c)) in self.coeffs.iter().rev().enumerate() {
            if c < 0 {
                out.push('-');
            } else if i > 0 {
                out.push('+');
            }
            let a = c.abs();
            if a != 1 || e == 0 {
                out.push_str(&a.to_string());
            }
            match e {
                0 => {}
                1 => out.push('t'),
                _ => out.push_str(&format!("t^{}", e)),
            }
        }
        out
    }

    /// JSON-facing form: list of `[exponent, coefficient]` pairs.
    pub fn to_pairs(&self) -> Vec<(u32, i64)> {
        self.terms().collect()
    }
}

impl Add for &IntPoly {
    type Output = IntPoly;
    fn add(self, rhs: &IntPoly) -> IntPoly {
        let mut out = self.clone();
        for (e, c) in rhs.terms() {
            out.add_term(e, c);
        }
        out
    }
}

impl Sub for &IntPoly {
    type Output = IntPoly;
    fn sub(self, rhs: &IntPoly) -> IntPoly {
        let mut out = self.clone();
        for (e, c) in rhs.terms() {
            out.add_term(e, -c);
        }
        out
    }
}

impl Neg for &IntPoly {
    type Output = IntPoly;
    fn neg(self) -> IntPoly {
        self.scale(-1)
    }
}

impl Mul for &IntPoly {
    type Output = IntPoly;
    fn mul(self, rhs: &IntPoly) -> IntPoly {
        let mut out = IntPoly::zero();
        for (e1, c1) in self.terms() {
            for (e2, c2) in rhs.terms() {
                out.add_term(e1 + e2, c1 * c2);
            }
        }
        out
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// The polynomial `u(alpha) = sum over arrows with n(e) != 0 of
/// sign(n(e)) t^|n(e)|`.
pub fn u(s: &VirtualString) -> IntPoly {
    let mut p = IntPoly::zero();
    for n in s.n_indices() {
        if n != 0 {
            p.add_term(n.unsigned_abs() as u32, n.signum());
        }
    }
    p
}

/// Coefficient of `t^k` in `u`.
pub fn u_k(s: &VirtualString, k: u32) -> i64 {
    assert!(k >= 1, "u_k is defined for k >= 1");
    u(s).coeff(k)
}

/// `u` of the iterated covering along the sequence `rs`.
pub fn higher_u(s: &VirtualString, rs: &[u64]) -> IntPoly {
    let mut cur = s.clone();
    for &r in rs {
        assert!(r >= 1);
        cur = cur.covering(r);
    }
    u(&cur)
}

/// The pair `(u^+, u^-)` of an open string.
pub fn u_open(mu: &OpenString) -> (IntPoly, IntPoly) {
    let pos = mu.positive_arrows();
    let ns = mu.closure().n_indices();
    let mut plus = IntPoly::zero();
    let mut minus = IntPoly::zero();
    for (e, &n) in ns.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let k = n.unsigned_abs() as u32;
        // u^+_k counts arr^+ arrows with n = k minus arr^- arrows with n = -k
        let target = if (n > 0) == pos[e] { &mut plus } else { &mut minus };
        target.add_term(k, n.signum());
    }
    (plus, minus)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RealizeError {
    #[error("not realizable: constant term is {0}, must be 0")]
    NonzeroConstant(i64),
    #[error("not realizable: derivative at 1 is {0}, must be 0")]
    NonzeroDerivative(i64),
}

/// Constructive inverse of the realization theorem: build a string whose `u`
/// equals `p`, which is possible exactly when `p(0) = p'(1) = 0`.
///
/// Degrees are processed from highest down to 2; a coefficient `a` at degree
/// `m` contributes `|a|` product factors `alpha_{1,m}` (for `a > 0`) or
/// `alpha_{m,1}` (for `a < 0`).  The residual linear coefficient is then 0
/// because every step preserves `p'(1) = 0`.
pub fn realize_u(p: &IntPoly) -> Result<VirtualString, RealizeError> {
    let c0 = p.eval_at_zero();
    if c0 != 0 {
        return Err(RealizeError::NonzeroConstant(c0));
    }
    let d1 = p.derivative_at_one();
    if d1 != 0 {
        return Err(RealizeError::NonzeroDerivative(d1));
    }
    let mut rest = p.clone();
    let mut out = VirtualString::trivial();
    while let Some(deg) = rest.degree() {
        if deg < 2 {
            break;
        }
        let a = rest.coeff(deg);
        let factor = if a > 0 {
            VirtualString::family_pq(1, deg as usize)
        } else {
            VirtualString::family_pq(deg as usize, 1)
        };
        for _ in 0..a.unsigned_abs() {
            out = out.product(&factor);
        }
        rest = &rest - &u(&factor).scale(a.abs());
    }
    debug_assert!(rest.is_zero(), "residual after realization: {rest}");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_text() {
        let p = IntPoly::from_terms(&[(4, 2), (2, -4)]);
        assert_eq!(p.to_text(), "2t^4-4t^2");
        assert_eq!(IntPoly::zero().to_text(), "0");
        assert_eq!(IntPoly::from_terms(&[(1, -1), (0, 3)]).to_text(), "-t+3");
    }

    #[test]
    fn u_of_family_pq() {
        // u(alpha_{p,q}) = p t^q - q t^p
        for p in 1..=5usize {
            for q in 1..=5usize {
                let mut expect = IntPoly::zero();
                expect.add_term(q as u32, p as i64);
                expect.add_term(p as u32, -(q as i64));
                assert_eq!(u(&VirtualString::family_pq(p, q)), expect);
            }
        }
        assert!(u(&VirtualString::trivial()).is_zero());
        assert!(u(&VirtualString::family_pq(1, 1)).is_zero());
    }

    #[test]
    fn u_k_values() {
        let a12 = VirtualString::family_pq(1, 2);
        assert_eq!(u_k(&a12, 2), 1);
        assert_eq!(u_k(&a12, 1), -2);
        assert_eq!(u_k(&a12, 7), 0);
    }

    #[test]
    fn u_necessary_conditions() {
        for (p, q) in [(1, 2), (3, 4), (2, 2)] {
            let pol = u(&VirtualString::family_pq(p, q));
            assert_eq!(pol.eval_at_zero(), 0);
            assert_eq!(pol.derivative_at_one(), 0);
        }
    }

    #[test]
    fn u_transformations() {
        let s = VirtualString::family_pq(2, 3).product(&VirtualString::parse("x' y z' x z y'").unwrap());
        assert_eq!(u(&s.inverse()), u(&s));
        assert_eq!(u(&s.opposite()), -&u(&s));
    }

    #[test]
    fn u_additive_under_product() {
        let a = VirtualString::family_pq(1, 3);
        let b = VirtualString::family_pq(2, 1);
        assert_eq!(u(&a.product(&b)), &u(&a) + &u(&b));
    }

    #[test]
    fn u_of_cable() {
        for r in 1..=3u32 {
            for s in [VirtualString::family_pq(1, 2), VirtualString::family_pq(2, 1)] {
                assert_eq!(u(&s.cable(r as usize)), u(&s).compose_power(r).scale(r as i64));
            }
        }
    }

    #[test]
    fn higher_u_identity() {
        let s = VirtualString::family_pq(2, 3);
        assert_eq!(higher_u(&s, &[1]), u(&s));
        assert_eq!(higher_u(&s, &[]), u(&s));
    }

    #[test]
    fn u_open_example() {
        let mu = OpenString::parse("a b a' b'").unwrap();
        let (up, um) = u_open(&mu);
        assert_eq!(up, IntPoly::from_terms(&[(1, 1)]));
        assert_eq!(um, IntPoly::from_terms(&[(1, -1)]));
        let (tp, tm) = u_open(&OpenString::trivial());
        assert!(tp.is_zero() && tm.is_zero());
    }

    #[test]
    fn u_open_reverse_swaps_and_negates() {
        // reversal negates every n and keeps the interval order of each
        // arrow, so the two refined polynomials trade places with a sign
        for text in ["a b c a' b' c'", "a b' a' b", "b' a b a'"] {
            let mu = OpenString::parse(text).unwrap();
            let (up, um) = u_open(&mu);
            let (rp, rm) = u_open(&mu.open_reverse());
            assert_eq!(rp, -&um);
            assert_eq!(rm, -&up);
        }
    }

    #[test]
    fn realize_round_trip() {
        assert_eq!(realize_u(&IntPoly::zero()).unwrap(), VirtualString::trivial());
        let p = IntPoly::from_terms(&[(2, 1), (1, -2)]);
        assert_eq!(u(&realize_u(&p).unwrap()), p);
        let p = IntPoly::from_terms(&[(3, 2), (2, -3)]);
        assert_eq!(u(&realize_u(&p).unwrap()), p);
        assert!(matches!(
            realize_u(&IntPoly::from_terms(&[(0, 1)])),
            Err(RealizeError::NonzeroConstant(1))
        ));
        assert!(matches!(
            realize_u(&IntPoly::from_terms(&[(2, 1)])),
            Err(RealizeError::NonzeroDerivative(2))
        ));
    }
}
