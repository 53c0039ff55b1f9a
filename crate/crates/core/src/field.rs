//! Arithmetic in GF(q) for prime-power q.
//!
//! Elements are encoded as integers `0..q`: the base-`p` digits of the encoding
//! are the polynomial coefficients over GF(p), constant term first. For prime
//! `q` this is plain modular arithmetic.
//!
//! A [`Field`] is cheap to clone (reference counted) and immutable, so it can be
//! shared freely between threads.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("field order must be at least 2, got {0}")]
    TooSmall(u64),
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("field order {0} is too large for this implementation")]
    TooLarge(u64),
    #[error("operands belong to different fields (GF({left}) vs GF({right}))")]
    FieldMismatch { left: u32, right: u32 },
    #[error("division by zero")]
    DivisionByZero,
}

/// Largest supported order. Log/antilog tables are kept for every field.
pub const MAX_ORDER: u32 = 1 << 20;

#[derive(Clone)]
pub struct Field {
    inner: Arc<FieldInner>,
}

struct FieldInner {
    order: u32,
    characteristic: u32,
    degree: u32,
    /// Monic irreducible modulus, constant term first, `degree + 1` entries.
    modulus: Vec<u32>,
    primitive: u32,
    /// `exp[i] = ξ^i` for `i in 0..2(q-1)`, doubled to skip a reduction in `mul`.
    exp: Vec<u32>,
    /// `log[ξ^i] = i`; `log[0]` is unused.
    log: Vec<u32>,
}

/// Factor `q = p^n`; `None` if `q` has two distinct prime factors.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2u64;
    let mut rest = q;
    while p * p <= rest {
        if rest % p == 0 {
            break;
        }
        p += 1;
    }
    if p * p > rest {
        p = rest;
    }
    let mut n = 0;
    while rest % p == 0 {
        rest /= p;
        n += 1;
    }
    (rest == 1).then_some((p, n))
}

pub fn is_prime(n: u64) -> bool {
    matches!(prime_power(n), Some((_, 1)))
}

fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// ---------------------------------------------------------------------------
// Polynomials over GF(p), constant term first, no trailing zeros
// (except that the zero polynomial is the empty vector).

fn trim(poly: &mut Vec<u32>) {
    while poly.last() == Some(&0) {
        poly.pop();
    }
}

/// Remainder of `a` modulo the monic polynomial `m`.
fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    trim(&mut r);
    let dm = m.len() - 1;
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        for (i, &c) in m.iter().enumerate() {
            let sub = (lead as u64 * c as u64 % p as u64) as u32;
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
        trim(&mut r);
    }
    r
}

fn monic_polys(p: u32, degree: u32) -> impl Iterator<Item = Vec<u32>> {
    let count = (p as u64).pow(degree);
    (0..count).map(move |mut tail| {
        let mut coeffs = Vec::with_capacity(degree as usize + 1);
        for _ in 0..degree {
            coeffs.push((tail % p as u64) as u32);
            tail /= p as u64;
        }
        coeffs.push(1);
        coeffs
    })
}

/// Trial division by every monic polynomial of degree `1..=deg/2`.
pub fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let degree = poly.len() as u32 - 1;
    (1..=degree / 2).all(|d| monic_polys(p, d).all(|div| !poly_rem(poly, &div, p).is_empty()))
}

/// Smallest monic irreducible polynomial of the given degree, ordered by the
/// base-`p` integer encoding of its lower coefficients.
fn smallest_irreducible(p: u32, degree: u32) -> Vec<u32> {
    monic_polys(p, degree)
        .find(|f| is_irreducible(f, p))
        .expect("an irreducible polynomial exists for every degree")
}

impl Field {
    /// Build GF(q). Fails unless `q = p^n` for a prime `p`.
    pub fn new(q: u64) -> Result<Self, FieldError> {
        if q < 2 {
            return Err(FieldError::TooSmall(q));
        }
        if q > MAX_ORDER as u64 {
            return Err(FieldError::TooLarge(q));
        }
        let (p, n) = prime_power(q).ok_or(FieldError::NotPrimePower(q))?;
        let (p, q) = (p as u32, q as u32);
        let modulus = if n == 1 { vec![0, 1] } else { smallest_irreducible(p, n) };
        let mut inner = FieldInner {
            order: q,
            characteristic: p,
            degree: n,
            modulus,
            primitive: 0,
            exp: Vec::new(),
            log: Vec::new(),
        };
        inner.primitive = inner.search_primitive();
        let (exp, log) = inner.power_tables();
        inner.exp = exp;
        inner.log = log;
        Ok(Field { inner: Arc::new(inner) })
    }

    pub fn order(&self) -> u32 {
        self.inner.order
    }

    pub fn characteristic(&self) -> u32 {
        self.inner.characteristic
    }

    pub fn degree(&self) -> u32 {
        self.inner.degree
    }

    /// Reduction polynomial, constant term first. `[0, 1]` (i.e. `x`) for prime fields.
    pub fn modulus(&self) -> &[u32] {
        &self.inner.modulus
    }

    /// The smallest element of multiplicative order `q - 1`.
    pub fn primitive(&self) -> u32 {
        self.inner.primitive
    }

    pub fn element(&self, value: u32) -> FieldElement {
        assert!(value < self.order(), "{value} is not an element of GF({})", self.order());
        FieldElement { field: self.clone(), value }
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.order()).map(move |v| self.element(v))
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        let f = &*self.inner;
        if f.degree == 1 {
            return (a + b) % f.order;
        }
        if f.characteristic == 2 {
            return a ^ b;
        }
        f.digitwise(a, b, |x, y| (x + y) % f.characteristic)
    }

    pub fn neg(&self, a: u32) -> u32 {
        let f = &*self.inner;
        if f.degree == 1 {
            return (f.order - a) % f.order;
        }
        if f.characteristic == 2 {
            return a;
        }
        f.digitwise(a, 0, |x, _| (f.characteristic - x) % f.characteristic)
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let f = &*self.inner;
        f.exp[(f.log[a as usize] + f.log[b as usize]) as usize]
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        let f = &*self.inner;
        let l = f.log[a as usize];
        Some(f.exp[((f.order - 1 - l) % (f.order - 1)) as usize])
    }

    pub fn pow(&self, a: u32, e: u64) -> u32 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let f = &*self.inner;
        let l = f.log[a as usize] as u64 * (e % (f.order as u64 - 1)) % (f.order as u64 - 1);
        f.exp[l as usize]
    }

    /// `ξ^e` for the field's primitive element ξ.
    pub fn primitive_pow(&self, e: u64) -> u32 {
        let f = &*self.inner;
        f.exp[(e % (f.order as u64 - 1)) as usize]
    }

    /// Multiplicative order of a nonzero element.
    pub fn multiplicative_order(&self, a: u32) -> Option<u32> {
        (a != 0).then(|| self.inner.order_raw(a))
    }
}

impl FieldInner {
    fn digitwise(&self, a: u32, b: u32, op: impl Fn(u32, u32) -> u32) -> u32 {
        let p = self.characteristic;
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.degree {
            out += op(a % p, b % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out
    }

    fn decode(&self, v: u32) -> Vec<u32> {
        let p = self.characteristic;
        let mut v = v;
        let mut c = Vec::with_capacity(self.degree as usize);
        for _ in 0..self.degree {
            c.push(v % p);
            v /= p;
        }
        c
    }

    fn encode(&self, coeffs: &[u32]) -> u32 {
        coeffs.iter().rev().fold(0, |acc, &c| acc * self.characteristic + c)
    }

    /// Multiplication straight from the polynomial representation; only used
    /// while the log tables are being built.
    fn mul_raw(&self, a: u32, b: u32) -> u32 {
        let p = self.characteristic as u64;
        if self.degree == 1 {
            return (a as u64 * b as u64 % p) as u32;
        }
        let (ca, cb) = (self.decode(a), self.decode(b));
        let mut prod = vec![0u32; ca.len() + cb.len()];
        for (i, &x) in ca.iter().enumerate() {
            for (j, &y) in cb.iter().enumerate() {
                prod[i + j] = ((prod[i + j] as u64 + x as u64 * y as u64) % p) as u32;
            }
        }
        self.encode(&poly_rem(&prod, &self.modulus, self.characteristic))
    }

    fn pow_raw(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a;
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_raw(acc, base);
            }
            base = self.mul_raw(base, base);
            e >>= 1;
        }
        acc
    }

    fn order_raw(&self, a: u32) -> u32 {
        let n = self.order - 1;
        let mut order = n;
        for r in distinct_prime_factors(n as u64) {
            let r = r as u32;
            while order % r == 0 && self.pow_raw(a, (order / r) as u64) == 1 {
                order /= r;
            }
        }
        order
    }

    fn search_primitive(&self) -> u32 {
        (1..self.order)
            .find(|&g| self.order_raw(g) == self.order - 1)
            .expect("every finite field has a primitive element")
    }

    fn power_tables(&self) -> (Vec<u32>, Vec<u32>) {
        let n = (self.order - 1) as usize;
        let mut exp = Vec::with_capacity(2 * n);
        let mut log = vec![0u32; self.order as usize];
        let mut x = 1;
        for i in 0..n {
            exp.push(x);
            log[x as usize] = i as u32;
            x = self.mul_raw(x, self.primitive);
        }
        for i in 0..n {
            exp.push(exp[i]);
        }
        (exp, log)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.order == other.inner.order && self.inner.modulus == other.inner.modulus)
    }
}

impl Eq for Field {}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.order())?;
        if self.degree() > 1 {
            write!(f, " mod {:?}", self.modulus())?;
        }
        Ok(())
    }
}

/// Binary field operations exposed through [`field_op`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, PartialEq, Eq)]
pub struct FieldElement {
    field: Field,
    value: u32,
}

impl FieldElement {
    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Canonical integer encoding.
    pub fn value(&self) -> u32 {
        self.value
    }

    /// Coefficients over GF(p), constant term first.
    pub fn coefficients(&self) -> Vec<u32> {
        self.field.inner.decode(self.value)
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn pow(&self, e: u64) -> FieldElement {
        self.field.element(self.field.pow(self.value, e))
    }

    pub fn inverse(&self) -> Option<FieldElement> {
        self.field.inv(self.value).map(|v| self.field.element(v))
    }

    pub fn multiplicative_order(&self) -> Option<u32> {
        self.field.multiplicative_order(self.value)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in GF({})", self.value, self.field.order())
    }
}

pub fn make_field(q: u64) -> Result<Field, FieldError> {
    Field::new(q)
}

pub fn field_op(a: &FieldElement, b: &FieldElement, op: FieldOp) -> Result<FieldElement, FieldError> {
    if a.field != b.field {
        return Err(FieldError::FieldMismatch { left: a.field.order(), right: b.field.order() });
    }
    let f = &a.field;
    let v = match op {
        FieldOp::Add => f.add(a.value, b.value),
        FieldOp::Sub => f.sub(a.value, b.value),
        FieldOp::Mul => f.mul(a.value, b.value),
        FieldOp::Div => f.mul(a.value, f.inv(b.value).ok_or(FieldError::DivisionByZero)?),
    };
    Ok(f.element(v))
}

/// Exhaustive search for the smallest primitive element.
pub fn find_primitive_element(field: &Field) -> FieldElement {
    field.element(field.primitive())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_power_factorisation() {
        assert_eq!(prime_power(5), Some((5, 1)));
        assert_eq!(prime_power(64), Some((2, 6)));
        assert_eq!(prime_power(81), Some((3, 4)));
        assert_eq!(prime_power(6), None);
        assert_eq!(prime_power(1), None);
        assert_eq!(prime_power(1_000_003), Some((1_000_003, 1)));
    }

    #[test]
    fn make_field_examples() {
        let f5 = make_field(5).unwrap();
        assert_eq!((f5.order(), f5.degree()), (5, 1));
        let f2 = make_field(2).unwrap();
        assert_eq!((f2.order(), f2.degree()), (2, 1));
        assert_eq!(make_field(6).unwrap_err(), FieldError::NotPrimePower(6));
        assert_eq!(make_field(1).unwrap_err(), FieldError::TooSmall(1));
    }

    #[test]
    fn small_field_ops() {
        let f5 = make_field(5).unwrap();
        assert_eq!(f5.element(2).pow(4).value(), 1);
        let f7 = make_field(7).unwrap();
        let s = field_op(&f7.element(3), &f7.element(5), FieldOp::Add).unwrap();
        assert_eq!(s.value(), 1);
    }

    #[test]
    fn gf4_uses_x2_x_1() {
        let f4 = make_field(4).unwrap();
        assert_eq!(f4.modulus(), &[1, 1, 1]);
        // x is encoded as 2, x + 1 as 3.
        let x = f4.element(2);
        assert_eq!(field_op(&x, &x, FieldOp::Mul).unwrap().value(), 3);
    }

    /// Schoolbook polynomial product reduced by x^2 + x + 1, checked over all
    /// 16 products in GF(4).
    #[test]
    fn gf4_products_match_polynomial_oracle() {
        let f4 = make_field(4).unwrap();
        for a in 0..4u32 {
            for b in 0..4u32 {
                let (a0, a1, b0, b1) = (a & 1, a >> 1, b & 1, b >> 1);
                // (a0 + a1 x)(b0 + b1 x) = c0 + c1 x + c2 x^2, x^2 = x + 1
                let c0 = (a0 * b0) ^ (a1 * b1);
                let c1 = (a0 * b1) ^ (a1 * b0) ^ (a1 * b1);
                assert_eq!(f4.mul(a, b), c0 | (c1 << 1), "{a} * {b}");
            }
        }
    }

    #[test]
    fn primitive_elements() {
        assert_eq!(find_primitive_element(&make_field(5).unwrap()).value(), 2);
        assert_eq!(find_primitive_element(&make_field(2).unwrap()).value(), 1);
        let f9 = make_field(9).unwrap();
        let xi = find_primitive_element(&f9);
        // Brute force: repeated multiplication returns to 1 only after 8 steps.
        let mut x = xi.value();
        let mut order = 1;
        while x != 1 {
            x = f9.mul(x, xi.value());
            order += 1;
        }
        assert_eq!(order, 8);
        // and nothing smaller is primitive
        for g in 1..xi.value() {
            assert_ne!(f9.multiplicative_order(g), Some(8));
        }
    }

    #[test]
    fn mismatched_fields_rejected() {
        let a = make_field(5).unwrap().element(1);
        let b = make_field(7).unwrap().element(1);
        assert!(matches!(field_op(&a, &b, FieldOp::Mul), Err(FieldError::FieldMismatch { .. })));
        // Two independently built copies of the same field are interchangeable.
        let c = make_field(5).unwrap().element(3);
        assert_eq!(field_op(&a, &c, FieldOp::Add).unwrap().value(), 4);
    }

    #[test]
    fn division_by_zero() {
        let f = make_field(11).unwrap();
        assert_eq!(field_op(&f.element(3), &f.element(0), FieldOp::Div), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn primitive_powers_enumerate_nonzero_elements() {
        for q in 2..=512u64 {
            let Ok(f) = make_field(q) else { continue };
            let mut seen = vec![false; q as usize];
            for i in 0..q - 1 {
                let v = f.primitive_pow(i) as usize;
                assert!(!seen[v] && v != 0, "GF({q}) repeats at ξ^{i}");
                seen[v] = true;
            }
        }
    }

    #[test]
    fn field_axioms_exhaustive_small() {
        for q in 2..=64u64 {
            let Ok(f) = make_field(q) else { continue };
            assert!(is_irreducible(f.modulus(), f.characteristic()) || f.degree() == 1);
            let q = q as u32;
            for a in 0..q {
                if a != 0 {
                    let inv = f.inv(a).unwrap();
                    assert_eq!(f.mul(a, inv), 1, "GF({q}) inverse of {a}");
                }
                assert_eq!(f.add(a, f.neg(a)), 0);
                for b in 0..q {
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    assert_eq!(f.mul(a, b), f.inner.mul_raw(a, b));
                    for c in [0, 1, q - 1, q / 2] {
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }
}
