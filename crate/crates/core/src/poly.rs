//! Sparse bivariate polynomials in `(q, v)` with exact rational coefficients.
//!
//! `q` is the cluster weight and `v = e^J - 1` the bond weight of the
//! Fortuin-Kasteleyn expansion. Every quantity in the crate that feeds an
//! identity check is a [`BivarPoly`]; coefficients are `BigRational` so all
//! arithmetic is exact. Terms are kept in a `BTreeMap` keyed by the exponent
//! pair `(q_deg, v_deg)`, which gives a canonical term order for free.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};
use thiserror::Error;

/// Exact rational scalar used throughout the crate.
pub type Rat = num_rational::BigRational;

/// Build a `Rat` from an integer.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Build the fraction `n/d`.
pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Nearest float; used only at the numeric eigenvalue boundary.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    /// Exact division by `q^j` hit a term with q-degree below `j`. For
    /// restricted partition functions this signals a misclassified cluster
    /// count: a configuration with `j` non-trivial clusters always carries at
    /// least `q^j`.
    #[error("polynomial not divisible by q^{power}: term q^{i} v^{j} has q-degree < {power}")]
    NotDivisible { power: u32, i: u32, j: u32 },
    #[error("invalid polynomial JSON: {0}")]
    BadJson(String),
}

/// Sparse exact polynomial in `q` and `v`.
///
/// Invariant: no stored zero coefficients; the map order (lexicographic in
/// `(q_deg, v_deg)`) is the canonical serialization order.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct BivarPoly {
    terms: BTreeMap<(u32, u32), Rat>,
}

impl BivarPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        Self::monomial(0, 0, c)
    }

    /// The polynomial `q`.
    pub fn q() -> Self {
        Self::monomial(1, 0, Rat::one())
    }

    /// The polynomial `v`.
    pub fn v() -> Self {
        Self::monomial(0, 1, Rat::one())
    }

    /// `c * q^i * v^j`.
    pub fn monomial(i: u32, j: u32, c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((i, j), c);
        }
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of `q^i v^j` (zero if absent).
    pub fn coeff(&self, i: u32, j: u32) -> Rat {
        self.terms.get(&(i, j)).cloned().unwrap_or_else(Rat::zero)
    }

    /// Iterate terms in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &Rat)> {
        self.terms.iter()
    }

    pub fn degree_q(&self) -> u32 {
        self.terms.keys().map(|&(i, _)| i).max().unwrap_or(0)
    }

    pub fn degree_v(&self) -> u32 {
        self.terms.keys().map(|&(_, j)| j).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: &Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry((i, j)).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&(i, j));
        }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self
                .terms
                .iter()
                .map(|(&k, v)| (k, v * c))
                .collect(),
        }
    }

    /// Multiply by `q^i v^j`.
    pub fn shift(&self, i: u32, j: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(&(a, b), c)| ((a + i, b + j), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Exact division by `q^j`.
    ///
    /// Errors with [`PolyError::NotDivisible`] if any term has q-degree
    /// below `j`.
    pub fn div_exact_q_power(&self, j: u32) -> Result<Self, PolyError> {
        let mut terms = BTreeMap::new();
        for (&(a, b), c) in &self.terms {
            if a < j {
                return Err(PolyError::NotDivisible { power: j, i: a, j: b });
            }
            terms.insert((a - j, b), c.clone());
        }
        Ok(Self { terms })
    }

    /// Exact evaluation at a rational point.
    pub fn eval(&self, q0: &Rat, v0: &Rat) -> Rat {
        // Horner in q with inner Horner in v would need dense layout; with
        // the sparse map we just cache powers.
        let mut qp: Vec<Rat> = vec![Rat::one()];
        let mut vp: Vec<Rat> = vec![Rat::one()];
        let mut out = Rat::zero();
        for (&(i, j), c) in &self.terms {
            while qp.len() <= i as usize {
                let last = qp.last().unwrap() * q0;
                qp.push(last);
            }
            while vp.len() <= j as usize {
                let last = vp.last().unwrap() * v0;
                vp.push(last);
            }
            out += c * &qp[i as usize] * &vp[j as usize];
        }
        out
    }

    /// Float evaluation, used only for eigenvalue cross-checks.
    pub fn eval_f64(&self, q0: f64, v0: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| c.to_f64().unwrap() * q0.powi(i as i32) * v0.powi(j as i32))
            .sum()
    }

    /// Canonical JSON form `{"terms": [[i, j, "num/den"], ...]}` with terms
    /// sorted lexicographically by `(q_deg, v_deg)`.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(&(i, j), c)| json!([i, j, format!("{}/{}", c.numer(), c.denom())]))
            .collect();
        json!({ "terms": terms })
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyError> {
        let terms = v
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| PolyError::BadJson("missing \"terms\" array".into()))?;
        let mut out = Self::zero();
        for t in terms {
            let arr = t
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| PolyError::BadJson("term is not a [i, j, coeff] triple".into()))?;
            let i = arr[0]
                .as_u64()
                .ok_or_else(|| PolyError::BadJson("bad q-degree".into()))? as u32;
            let j = arr[1]
                .as_u64()
                .ok_or_else(|| PolyError::BadJson("bad v-degree".into()))? as u32;
            let s = arr[2]
                .as_str()
                .ok_or_else(|| PolyError::BadJson("coefficient must be a string".into()))?;
            let c = parse_rat(s).ok_or_else(|| PolyError::BadJson(format!("bad coefficient {s:?}")))?;
            out.add_term(i, j, &c);
        }
        Ok(out)
    }
}

fn parse_rat(s: &str) -> Option<Rat> {
    match s.split_once('/') {
        Some((n, d)) => Some(Rat::new(n.parse().ok()?, d.parse().ok()?)),
        None => Some(Rat::from_integer(s.parse().ok()?)),
    }
}

impl Add for &BivarPoly {
    type Output = BivarPoly;
    fn add(self, rhs: &BivarPoly) -> BivarPoly {
        let mut out = self.clone();
        for (&(i, j), c) in &rhs.terms {
            out.add_term(i, j, c);
        }
        out
    }
}

impl Sub for &BivarPoly {
    type Output = BivarPoly;
    fn sub(self, rhs: &BivarPoly) -> BivarPoly {
        let mut out = self.clone();
        for (&(i, j), c) in &rhs.terms {
            out.add_term(i, j, &-c.clone());
        }
        out
    }
}

impl Neg for &BivarPoly {
    type Output = BivarPoly;
    fn neg(self) -> BivarPoly {
        BivarPoly {
            terms: self.terms.iter().map(|(&k, c)| (k, -c.clone())).collect(),
        }
    }
}

impl Mul for &BivarPoly {
    type Output = BivarPoly;
    fn mul(self, rhs: &BivarPoly) -> BivarPoly {
        let mut out = BivarPoly::zero();
        for (&(a, b), c1) in &self.terms {
            for (&(i, j), c2) in &rhs.terms {
                out.add_term(a + i, b + j, &(c1 * c2));
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for BivarPoly {
            type Output = BivarPoly;
            fn $method(self, rhs: BivarPoly) -> BivarPoly {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for BivarPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // Highest q-degree first reads like the paper's polynomials.
        for (idx, (&(i, j), c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut vars = String::new();
            if i > 0 {
                vars.push('q');
                if i > 1 {
                    vars.push_str(&format!("^{i}"));
                }
            }
            if j > 0 {
                if !vars.is_empty() {
                    vars.push('*');
                }
                vars.push('v');
                if j > 1 {
                    vars.push_str(&format!("^{j}"));
                }
            }
            if vars.is_empty() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{vars}")?;
            } else if abs.denom().is_one() {
                write!(f, "{}*{vars}", abs.numer())?;
            } else {
                write!(f, "({abs})*{vars}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for BivarPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly_from(terms: &[(u32, u32, i64)]) -> BivarPoly {
        let mut p = BivarPoly::zero();
        for &(i, j, c) in terms {
            p.add_term(i, j, &rat(c));
        }
        p
    }

    #[test]
    fn add_cancels_inverse() {
        let q = BivarPoly::q();
        assert!((&q + &-&q).is_zero());
    }

    #[test]
    fn add_collects_terms() {
        // (q^2 - 3q + 1) + 3q = q^2 + 1
        let a = poly_from(&[(2, 0, 1), (1, 0, -3), (0, 0, 1)]);
        let b = poly_from(&[(1, 0, 3)]);
        assert_eq!(&a + &b, poly_from(&[(2, 0, 1), (0, 0, 1)]));
    }

    #[test]
    fn mul_square() {
        let a = poly_from(&[(1, 0, 1), (0, 0, -2)]); // q - 2
        assert_eq!(&a * &a, poly_from(&[(2, 0, 1), (1, 0, -4), (0, 0, 4)]));
    }

    #[test]
    fn mul_identity() {
        let p = poly_from(&[(3, 2, 5), (0, 1, -7)]);
        assert_eq!(&BivarPoly::one() * &p, p);
    }

    #[test]
    fn div_exact_q_power_works() {
        // q^3 v / q^2 = q v
        let p = poly_from(&[(3, 1, 1)]);
        assert_eq!(p.div_exact_q_power(2).unwrap(), poly_from(&[(1, 1, 1)]));
        // (q^2 + q^3) / q = q + q^2
        let p = poly_from(&[(2, 0, 1), (3, 0, 1)]);
        assert_eq!(
            p.div_exact_q_power(1).unwrap(),
            poly_from(&[(1, 0, 1), (2, 0, 1)])
        );
    }

    #[test]
    fn div_exact_q_power_rejects() {
        let p = poly_from(&[(1, 0, 1), (0, 0, 1)]);
        assert_eq!(
            p.div_exact_q_power(1),
            Err(PolyError::NotDivisible { power: 1, i: 0, j: 0 })
        );
    }

    #[test]
    fn eval_examples() {
        let p = poly_from(&[(2, 0, 1), (1, 0, -3), (0, 0, 1)]);
        assert_eq!(p.eval(&rat(1), &rat(42)), rat(-1));
        assert_eq!(BivarPoly::zero().eval(&rat(5), &rat(7)), rat(0));
        // b^(2) = q^2 - 3q + 1 at q = 3: 9 - 9 + 1 = 1
        assert_eq!(p.eval(&rat(3), &rat(0)), rat(1));
    }

    #[test]
    fn json_round_trip_and_shape() {
        let p = poly_from(&[(0, 0, 1), (2, 1, -3)]);
        let v = p.to_json();
        assert_eq!(
            v.to_string(),
            r#"{"terms":[[0,0,"1/1"],[2,1,"-3/1"]]}"#
        );
        assert_eq!(BivarPoly::from_json(&v).unwrap(), p);
    }

    fn arb_poly() -> impl Strategy<Value = BivarPoly> {
        proptest::collection::vec(((0u32..5, 0u32..5), -20i64..20), 0..8).prop_map(|ts| {
            let mut p = BivarPoly::zero();
            for ((i, j), c) in ts {
                p.add_term(i, j, &rat(c));
            }
            p
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        }

        #[test]
        fn div_inverts_mul(p in arb_poly(), j in 0u32..=8) {
            let shifted = p.shift(j, 0);
            prop_assert_eq!(shifted.div_exact_q_power(j).unwrap(), p);
        }

        #[test]
        fn eval_is_ring_homomorphism(a in arb_poly(), b in arb_poly(), n in -5i64..5, d in 1i64..5) {
            let q0 = ratio(n, d);
            let v0 = ratio(d, 3);
            prop_assert_eq!((&a * &b).eval(&q0, &v0), a.eval(&q0, &v0) * b.eval(&q0, &v0));
            prop_assert_eq!((&a + &b).eval(&q0, &v0), a.eval(&q0, &v0) + b.eval(&q0, &v0));
        }
    }
}
