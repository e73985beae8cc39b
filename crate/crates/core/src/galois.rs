//! Exact arithmetic in GF(q), q = p^e.
//!
//! Elements are canonical integers in `[0, q)`: the coefficient vector of the
//! residue polynomial packed in base p, constant term first. For prime q this
//! is just the residue mod p.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplicative exp/log tables are built for extension fields up to this order.
pub const TABLE_LIMIT: u64 = 1 << 16;
/// Largest supported extension-field order (schoolbook multiplication above [`TABLE_LIMIT`]).
pub const MAX_EXTENSION_ORDER: u64 = 1 << 20;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct FieldElement(pub u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    #[inline]
    pub fn value(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone)]
struct Tables {
    exp: Vec<u32>,
    log: Vec<u32>,
}

#[derive(Clone)]
pub struct FieldSpec {
    p: u32,
    e: u32,
    q: u32,
    modulus: Vec<u32>,
    tables: Option<Tables>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("p", &self.p)
            .field("e", &self.e)
            .field("q", &self.q)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.modulus == other.modulus
    }
}

impl Eq for FieldSpec {}

/// Returns `(p, e)` with `q = p^e`, or `None` if `q` is not a prime power.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..)
        .take_while(|d| d * d <= q)
        .find(|d| q.is_multiple_of(*d))
        .unwrap_or(q);
    let (mut r, mut e) = (q, 0);
    while r % p == 0 {
        r /= p;
        e += 1;
    }
    (r == 1).then_some((p, e))
}

// Polynomials over GF(p): coefficient vectors, constant term first, no trailing zeros.
fn poly_trim(a: &mut Vec<u32>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn inv_mod(a: u32, p: u32) -> u32 {
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (p as i64, a as i64);
    while new_r != 0 {
        let quot = r / new_r;
        (t, new_t) = (new_t, t - quot * new_t);
        (r, new_r) = (new_r, r - quot * new_r);
    }
    debug_assert_eq!(r, 1);
    t.rem_euclid(p as i64) as u32
}

fn poly_rem(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let db = b.len() - 1;
    let lead_inv = inv_mod(b[db], p) as u64;
    while r.len() > db {
        let shift = r.len() - 1 - db;
        let f = (*r.last().unwrap() as u64 * lead_inv % p as u64) as u32;
        for (i, &bc) in b.iter().enumerate() {
            let sub = (f as u64 * bc as u64 % p as u64) as u32;
            let slot = &mut r[shift + i];
            *slot = (*slot + p - sub) % p;
        }
        poly_trim(&mut r);
    }
    r
}

fn digits(mut v: u64, p: u64, len: usize) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for slot in out.iter_mut() {
        *slot = (v % p) as u32;
        v /= p;
    }
    out
}

fn is_irreducible(modulus: &[u32], p: u32) -> bool {
    let e = modulus.len() - 1;
    if e == 1 {
        return true;
    }
    if modulus[0] == 0 {
        return false;
    }
    for deg in 1..=e / 2 {
        let count = (p as u64).pow(deg as u32);
        for low in 0..count {
            let mut divisor = digits(low, p as u64, deg);
            divisor.push(1);
            if poly_rem(modulus, &divisor, p).is_empty() {
                return false;
            }
        }
    }
    true
}

impl FieldSpec {
    /// Builds GF(q) with the lexicographically smallest monic irreducible
    /// modulus (candidates ordered by their base-p packed low coefficients).
    pub fn new(q: u64) -> Result<FieldSpec> {
        let (p, e) = prime_power(q).ok_or(Error::NotPrimePower(q))?;
        if e == 1 {
            if q > u32::MAX as u64 {
                return Err(Error::FieldTooLarge {
                    q,
                    limit: u32::MAX as u64,
                });
            }
            return Ok(FieldSpec {
                p: p as u32,
                e: 1,
                q: q as u32,
                modulus: vec![0, 1],
                tables: None,
            });
        }
        if q > MAX_EXTENSION_ORDER {
            return Err(Error::FieldTooLarge {
                q,
                limit: MAX_EXTENSION_ORDER,
            });
        }
        let p32 = p as u32;
        let e_us = e as usize;
        let modulus = (0..p.pow(e))
            .map(|low| {
                let mut m = digits(low, p, e_us);
                m.push(1);
                m
            })
            .find(|m| is_irreducible(m, p32))
            .expect("an irreducible polynomial of every degree exists");
        let mut field = FieldSpec {
            p: p32,
            e,
            q: q as u32,
            modulus,
            tables: None,
        };
        if q <= TABLE_LIMIT {
            field.tables = Some(field.build_tables());
        }
        Ok(field)
    }

    fn build_tables(&self) -> Tables {
        let order = self.q - 1;
        let mut factors = Vec::new();
        let mut r = order;
        let mut f = 2;
        while f * f <= r {
            if r.is_multiple_of(f) {
                factors.push(f);
                while r.is_multiple_of(f) {
                    r /= f;
                }
            }
            f += 1;
        }
        if r > 1 {
            factors.push(r);
        }
        let generator = (2..self.q)
            .map(FieldElement)
            .find(|&g| {
                factors
                    .iter()
                    .all(|&f| self.pow_schoolbook(g, (order / f) as u64) != FieldElement::ONE)
            })
            .unwrap_or(FieldElement::ONE);
        let mut exp = vec![0u32; 2 * order as usize];
        let mut log = vec![0u32; self.q as usize];
        let mut x = FieldElement::ONE;
        for i in 0..order as usize {
            exp[i] = x.0;
            exp[i + order as usize] = x.0;
            log[x.0 as usize] = i as u32;
            x = self.mul_schoolbook(x, generator);
        }
        Tables { exp, log }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Modulus coefficients, constant term first; `[0, 1]` for prime fields.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn is_prime_field(&self) -> bool {
        self.e == 1
    }

    pub fn element(&self, v: u32) -> Result<FieldElement> {
        if v < self.q {
            Ok(FieldElement(v))
        } else {
            Err(Error::IndexOutOfRange {
                index: v as usize,
                bound: self.q as usize,
            })
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q).map(FieldElement)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = FieldElement> {
        (1..self.q).map(FieldElement)
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if self.p == 2 {
            return FieldElement(a.0 ^ b.0);
        }
        if self.e == 1 {
            let s = a.0 as u64 + b.0 as u64;
            let p = self.p as u64;
            return FieldElement(if s >= p { s - p } else { s } as u32);
        }
        let (mut x, mut y) = (a.0, b.0);
        let (mut out, mut place) = (0u32, 1u32);
        for _ in 0..self.e {
            out += ((x % self.p + y % self.p) % self.p) * place;
            x /= self.p;
            y /= self.p;
            place *= self.p;
        }
        FieldElement(out)
    }

    #[inline]
    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if self.p == 2 || a.0 == 0 {
            return a;
        }
        if self.e == 1 {
            return FieldElement(self.p - a.0);
        }
        let mut x = a.0;
        let (mut out, mut place) = (0u32, 1u32);
        for _ in 0..self.e {
            out += ((self.p - x % self.p) % self.p) * place;
            x /= self.p;
            place *= self.p;
        }
        FieldElement(out)
    }

    #[inline]
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        if self.e == 1 {
            return FieldElement((a.0 as u64 * b.0 as u64 % self.p as u64) as u32);
        }
        match &self.tables {
            Some(t) => FieldElement(t.exp[(t.log[a.0 as usize] + t.log[b.0 as usize]) as usize]),
            None => self.mul_schoolbook(a, b),
        }
    }

    fn mul_schoolbook(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let e = self.e as usize;
        let p = self.p as u64;
        let da = digits(a.0 as u64, p, e);
        let db = digits(b.0 as u64, p, e);
        let mut prod = vec![0u32; 2 * e - 1];
        for (i, &x) in da.iter().enumerate() {
            for (j, &y) in db.iter().enumerate() {
                prod[i + j] = ((prod[i + j] as u64 + x as u64 * y as u64) % p) as u32;
            }
        }
        let r = poly_rem(&prod, &self.modulus, self.p);
        let mut out = 0u32;
        for &c in r.iter().rev() {
            out = out * self.p + c;
        }
        FieldElement(out)
    }

    fn pow_schoolbook(&self, a: FieldElement, mut n: u64) -> FieldElement {
        let (mut base, mut acc) = (a, FieldElement::ONE);
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul_schoolbook(acc, base);
            }
            base = self.mul_schoolbook(base, base);
            n >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::DivisionByZero(self.q));
        }
        if self.e == 1 {
            return Ok(FieldElement(inv_mod(a.0, self.p)));
        }
        Ok(match &self.tables {
            Some(t) => {
                let order = self.q - 1;
                FieldElement(t.exp[((order - t.log[a.0 as usize]) % order) as usize])
            }
            None => self.pow_schoolbook(a, self.q as u64 - 2),
        })
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `a^n`; negative exponents go through the inverse.
    pub fn pow(&self, a: FieldElement, n: i64) -> Result<FieldElement> {
        let base = if n < 0 { self.inv(a)? } else { a };
        let mut n = n.unsigned_abs();
        let (mut base, mut acc) = (base, FieldElement::ONE);
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            n >>= 1;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn build_prime_fields() {
        let f = FieldSpec::new(2).unwrap();
        assert_eq!((f.p(), f.e(), f.q()), (2, 1, 2));
        let f = FieldSpec::new(5).unwrap();
        assert_eq!(f.inv(FieldElement(2)).unwrap(), FieldElement(3));
        assert_eq!(f.add(FieldElement(3), FieldElement(4)), FieldElement(2));
    }

    #[test]
    fn gf4_modulus_and_product() {
        let f = FieldSpec::new(4).unwrap();
        assert_eq!((f.p(), f.e()), (2, 2));
        assert_eq!(f.modulus(), &[1, 1, 1]);
        // x * x = x + 1
        assert_eq!(f.mul(FieldElement(2), FieldElement(2)), FieldElement(3));
    }

    #[test]
    fn gf8_uses_smallest_modulus() {
        let f = FieldSpec::new(8).unwrap();
        assert_eq!(f.modulus(), &[1, 1, 0, 1]);
        let f = FieldSpec::new(9).unwrap();
        // x^2 + 1 is irreducible over GF(3) and is the smallest candidate
        assert_eq!(f.modulus(), &[1, 0, 1]);
    }

    #[test]
    fn rejects_non_prime_powers() {
        for q in [0, 1, 6, 10, 12, 15, 100] {
            assert!(
                matches!(FieldSpec::new(q), Err(Error::NotPrimePower(_))),
                "q={q}"
            );
        }
        assert!(matches!(
            FieldSpec::new(1 << 21),
            Err(Error::FieldTooLarge { .. })
        ));
    }

    #[test]
    fn prime_power_detection() {
        assert_eq!(prime_power(2), Some((2, 1)));
        assert_eq!(prime_power(27), Some((3, 3)));
        assert_eq!(prime_power(49), Some((7, 2)));
        assert_eq!(prime_power(97), Some((97, 1)));
        assert_eq!(prime_power(36), None);
    }

    #[test]
    fn inverse_of_zero_is_an_error() {
        let f = FieldSpec::new(7).unwrap();
        assert!(matches!(
            f.inv(FieldElement::ZERO),
            Err(Error::DivisionByZero(7))
        ));
    }

    fn exhaustive_axioms(q: u64) {
        let f = FieldSpec::new(q).unwrap();
        let els: Vec<_> = f.elements().collect();
        for &a in &els {
            assert_eq!(f.add(a, f.neg(a)), FieldElement::ZERO);
            if !a.is_zero() {
                assert_eq!(
                    f.mul(a, f.inv(a).unwrap()),
                    FieldElement::ONE,
                    "q={q} a={a}"
                );
            }
            for &b in &els {
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for &c in &els {
                    assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                }
            }
        }
        // characteristic
        let mut acc = FieldElement::ZERO;
        for _ in 0..f.p() {
            acc = f.add(acc, FieldElement::ONE);
        }
        assert_eq!(acc, FieldElement::ZERO);
        // Frobenius
        if f.e() > 1 {
            let p = f.p() as i64;
            for &a in &els {
                for &b in &els {
                    let lhs = f.pow(f.add(a, b), p).unwrap();
                    let rhs = f.add(f.pow(a, p).unwrap(), f.pow(b, p).unwrap());
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn field_axioms_small_fields() {
        for q in [2, 3, 4, 5, 7, 8, 9, 16, 25, 27, 32, 49, 64] {
            exhaustive_axioms(q);
        }
    }

    #[test]
    fn table_and_schoolbook_agree() {
        let f = FieldSpec::new(256).unwrap();
        for a in (0..256).step_by(7) {
            for b in (0..256).step_by(5) {
                let (a, b) = (FieldElement(a), FieldElement(b));
                assert_eq!(f.mul(a, b), f.mul_schoolbook(a, b));
            }
        }
    }

    #[test]
    fn schoolbook_only_field() {
        // 2^17 is above the table limit
        let f = FieldSpec::new(1 << 17).unwrap();
        assert!(f.tables.is_none());
        let a = FieldElement(12345);
        assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldElement::ONE);
    }

    proptest! {
        #[test]
        fn sampled_axioms_large_fields(q in prop::sample::select(vec![101u64, 125, 243, 1024, 4096, 65537]),
                                       a in 0u32..65537, b in 0u32..65537, c in 0u32..65537) {
            let f = FieldSpec::new(q).unwrap();
            let (a, b, c) = (FieldElement(a % f.q()), FieldElement(b % f.q()), FieldElement(c % f.q()));
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.sub(f.add(a, b), b), a);
            if !a.is_zero() {
                prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldElement::ONE);
            }
        }
    }
}
