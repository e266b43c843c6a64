//! Exact univariate polynomial arithmetic over the rationals with
//! Sturm-sequence root counting and bisection-based isolation.
//!
//! Everything here is exact: chains, sign counts and isolation run on
//! `BigRational` coefficients. Floating point only appears when a caller
//! converts a refined isolating interval to an `f64` midpoint.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

pub type Rat = BigRational;

/// Exact rational from an integer pair.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Best rational approximation of a float with denominator bounded by `max_den`.
///
/// The float is first expanded exactly (every finite f64 is a dyadic
/// rational); if its denominator already fits the bound it is returned
/// unchanged, so inputs like 1.5 or 2.75 stay exact.
pub fn rat_from_f64(x: f64, max_den: u64) -> Rat {
    let exact = Rat::from_float(x).expect("finite float");
    if exact.denom().magnitude() <= &num_bigint::BigUint::from(max_den) {
        return exact;
    }
    // continued-fraction convergents of the exact dyadic expansion
    let limit = BigInt::from(max_den);
    let mut p_prev = BigInt::one();
    let mut q_prev = BigInt::zero();
    let mut p = exact.numer().div_floor(exact.denom());
    let mut q = BigInt::one();
    let mut rem = &exact - Rat::from_integer(p.clone());
    while !rem.is_zero() {
        let inv = rem.recip();
        let a = inv.numer().div_floor(inv.denom());
        rem = inv - Rat::from_integer(a.clone());
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        if q_next > limit {
            break;
        }
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
    }
    Rat::new(p, q)
}

/// Dense univariate polynomial with exact rational coefficients,
/// constant term first. The zero polynomial has an empty coefficient list.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<Rat>,
}

impl std::fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("{c}"),
                1 => format!("{c}*x"),
                _ => format!("{c}*x^{i}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: Rat) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Polynomial::new(coeffs.iter().map(|&c| rat(c, 1)).collect())
    }

    /// c * x^deg
    pub fn monomial(deg: usize, c: Rat) -> Self {
        let mut v = vec![Rat::zero(); deg + 1];
        v[deg] = c;
        Polynomial::new(v)
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    /// Coefficient of x^i (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> Rat {
        self.coeffs.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Rat {
        self.coeffs.last().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * Rat::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![Rat::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn scale(&self, c: &Rat) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn pow(&self, mut e: u32) -> Polynomial {
        let mut base = self.clone();
        let mut acc = Polynomial::constant(Rat::one());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Euclidean division: `self = q * d + r` with `deg(r) < deg(d)`, exact.
    pub fn divrem(&self, d: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if d.is_zero() {
            return Err(Error::ZeroDivisor);
        }
        let mut rem = self.coeffs.clone();
        let dd = d.degree();
        let dl = d.leading();
        if rem.len() < d.coeffs.len() {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let qlen = rem.len() - dd;
        let mut quo = vec![Rat::zero(); qlen];
        for qi in (0..qlen).rev() {
            let c = &rem[qi + dd] / &dl;
            if !c.is_zero() {
                for (di, dc) in d.coeffs.iter().enumerate() {
                    let v = &c * dc;
                    rem[qi + di] -= v;
                }
            }
            quo[qi] = c;
        }
        Ok((Polynomial::new(quo), Polynomial::new(rem)))
    }

    /// Exact division; panics if the division leaves a remainder.
    fn exact_div(&self, d: &Polynomial) -> Polynomial {
        let (q, r) = self.divrem(d).expect("nonzero divisor");
        assert!(r.is_zero(), "exact_div with nonzero remainder");
        q
    }

    /// Monic gcd via the Euclidean algorithm.
    pub fn gcd(&self, other: &Polynomial) -> Polynomial {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.divrem(&b).expect("nonzero divisor");
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            let lead = a.leading();
            a.scale(&lead.recip())
        }
    }

    /// `self / gcd(self, self')`: same distinct roots, all simple.
    pub fn square_free_part(&self) -> Result<Polynomial> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if self.degree() == 0 {
            return Ok(self.clone());
        }
        let g = self.gcd(&self.derivative());
        if g.is_constant() {
            return Ok(self.clone());
        }
        Ok(self.exact_div(&g))
    }

    /// Yun's square-free decomposition: returns pairs `(factor, multiplicity)`
    /// with `self = lead * prod factor_i^multiplicity_i` and the factors
    /// pairwise coprime and square-free. Constant factors are dropped.
    pub fn square_free_decomposition(&self) -> Result<Vec<(Polynomial, u32)>> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if self.degree() == 0 {
            return Ok(Vec::new());
        }
        let deriv = self.derivative();
        let g = self.gcd(&deriv);
        let mut out = Vec::new();
        if g.is_constant() {
            out.push((self.clone(), 1));
            return Ok(out);
        }
        let mut b = self.exact_div(&g);
        let mut c = deriv.exact_div(&g);
        let mut d = c.sub(&b.derivative());
        let mut i = 1u32;
        while !b.is_constant() {
            let f = b.gcd(&d);
            if !f.is_constant() {
                out.push((f.clone(), i));
            }
            b = b.exact_div(&f);
            c = d.exact_div(&f);
            d = c.sub(&b.derivative());
            i += 1;
        }
        Ok(out)
    }

    /// Sign of the value at a rational point.
    pub fn sign_at(&self, x: &Rat) -> i8 {
        sign(&self.eval(x))
    }

    /// Sign of the limit at +inf (sign of the leading coefficient).
    pub fn sign_at_pos_inf(&self) -> i8 {
        sign(&self.leading())
    }

    /// Sign of the limit at -inf.
    pub fn sign_at_neg_inf(&self) -> i8 {
        let s = sign(&self.leading());
        if self.degree() % 2 == 1 {
            -s
        } else {
            s
        }
    }

    /// Cauchy bound: every real root lies strictly inside `(-B, B)`.
    pub fn cauchy_root_bound(&self) -> Rat {
        let lead = self.leading();
        let mut m = Rat::zero();
        for c in self.coeffs.iter().take(self.coeffs.len().saturating_sub(1)) {
            let v = (c / &lead).abs();
            if v > m {
                m = v;
            }
        }
        m + Rat::one()
    }
}

fn sign(x: &Rat) -> i8 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

/// An evaluation point for a Sturm chain: a rational or an infinite end.
#[derive(Clone, Debug, PartialEq)]
pub enum ChainPoint {
    At(Rat),
    NegInf,
    PosInf,
}

impl ChainPoint {
    pub fn at(num: i64, den: i64) -> Self {
        ChainPoint::At(rat(num, den))
    }
}

/// Sturm remainder sequence of the square-free part of a polynomial.
#[derive(Clone, Debug)]
pub struct SturmChain {
    polys: Vec<Polynomial>,
}

impl SturmChain {
    /// Builds the chain `P0 = square-free part, P1 = P0', P_{i+1} = -rem(P_{i-1}, P_i)`.
    pub fn new(p: &Polynomial) -> Result<SturmChain> {
        if p.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let p0 = p.square_free_part()?;
        let mut polys = vec![p0.clone()];
        if p0.degree() == 0 {
            return Ok(SturmChain { polys });
        }
        polys.push(p0.derivative());
        loop {
            let n = polys.len();
            let (_, r) = polys[n - 2].divrem(&polys[n - 1])?;
            if r.is_zero() {
                break;
            }
            polys.push(r.neg());
        }
        Ok(SturmChain { polys })
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    /// Number of strict sign alternations of the chain at a point, zeros skipped.
    pub fn sign_changes(&self, at: &ChainPoint) -> usize {
        let mut changes = 0;
        let mut prev: i8 = 0;
        for p in &self.polys {
            let s = match at {
                ChainPoint::At(x) => p.sign_at(x),
                ChainPoint::PosInf => p.sign_at_pos_inf(),
                ChainPoint::NegInf => p.sign_at_neg_inf(),
            };
            if s != 0 {
                if prev != 0 && s != prev {
                    changes += 1;
                }
                prev = s;
            }
        }
        changes
    }

    /// Distinct roots in the half-open interval `(lo, hi]`.
    pub fn count_roots(&self, lo: &ChainPoint, hi: &ChainPoint) -> usize {
        self.sign_changes(lo).saturating_sub(self.sign_changes(hi))
    }
}

/// Distinct real roots of `p` in the half-open interval `(lo, hi]`.
pub fn count_roots(p: &Polynomial, lo: &ChainPoint, hi: &ChainPoint) -> Result<usize> {
    Ok(SturmChain::new(p)?.count_roots(lo, hi))
}

/// Descartes bound: sign variations of the coefficient sequence. An upper
/// bound on the number of positive roots, of the same parity.
pub fn descartes_positive_bound(p: &Polynomial) -> usize {
    let mut changes = 0;
    let mut prev: i8 = 0;
    for c in p.coeffs() {
        let s = sign(c);
        if s != 0 {
            if prev != 0 && s != prev {
                changes += 1;
            }
            prev = s;
        }
    }
    changes
}

/// An isolating interval for one distinct real root. `lo == hi` marks an
/// exact rational root; otherwise the root lies strictly inside `(lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RootInterval {
    pub lo: Rat,
    pub hi: Rat,
    pub multiplicity: u32,
}

impl RootInterval {
    pub fn midpoint_f64(&self) -> f64 {
        ((&self.lo + &self.hi) / rat(2, 1)).to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

/// Isolates every distinct root of `p` in `(lo, hi]` and refines each
/// isolating interval to width `<= tol` by Sturm-count bisection.
/// Multiplicities come from the square-free decomposition of `p`.
pub fn isolate_and_refine(
    p: &Polynomial,
    lo: &ChainPoint,
    hi: &ChainPoint,
    tol: &Rat,
) -> Result<Vec<RootInterval>> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if p.degree() == 0 {
        return Ok(Vec::new());
    }
    let sf = p.square_free_part()?;
    let chain = SturmChain::new(&sf)?;
    let bound = sf.cauchy_root_bound();
    let lo_rat = match lo {
        ChainPoint::At(x) => x.clone(),
        ChainPoint::NegInf => -bound.clone(),
        ChainPoint::PosInf => bound.clone(),
    };
    let hi_rat = match hi {
        ChainPoint::At(x) => {
            if x > &bound {
                bound.clone()
            } else {
                x.clone()
            }
        }
        ChainPoint::PosInf => bound.clone(),
        ChainPoint::NegInf => -bound.clone(),
    };
    if lo_rat >= hi_rat {
        return Ok(Vec::new());
    }

    let decomposition = p.square_free_decomposition()?;
    let multiplicity_of = |iv_lo: &Rat, iv_hi: &Rat, exact: Option<&Rat>| -> u32 {
        for (factor, mult) in &decomposition {
            match exact {
                Some(r) => {
                    if factor.eval(r).is_zero() {
                        return *mult;
                    }
                }
                None => {
                    let c = SturmChain::new(factor).and_then(|ch| {
                        Ok(ch.count_roots(
                            &ChainPoint::At(iv_lo.clone()),
                            &ChainPoint::At(iv_hi.clone()),
                        ))
                    });
                    if matches!(c, Ok(n) if n == 1) {
                        return *mult;
                    }
                }
            }
        }
        1
    };

    let two = rat(2, 1);
    let mut out = Vec::new();
    let mut stack = vec![(lo_rat, hi_rat)];
    while let Some((a, b)) = stack.pop() {
        let n = chain.count_roots(&ChainPoint::At(a.clone()), &ChainPoint::At(b.clone()));
        if n == 0 {
            continue;
        }
        if n == 1 {
            // refine by bisection, keeping the half that holds the root
            let (mut a, mut b) = (a, b);
            let mut exact = None;
            while &b - &a > *tol {
                let mid = (&a + &b) / &two;
                if sf.eval(&mid).is_zero() {
                    exact = Some(mid);
                    break;
                }
                if chain.count_roots(&ChainPoint::At(a.clone()), &ChainPoint::At(mid.clone())) == 1
                {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let iv = match exact {
                Some(r) => {
                    let m = multiplicity_of(&a, &b, Some(&r));
                    RootInterval { lo: r.clone(), hi: r, multiplicity: m }
                }
                None => {
                    let m = multiplicity_of(&a, &b, None);
                    RootInterval { lo: a, hi: b, multiplicity: m }
                }
            };
            out.push(iv);
            continue;
        }
        let mid = (&a + &b) / &two;
        stack.push((a, mid.clone()));
        stack.push((mid, b));
    }
    out.sort_by(|x, y| x.lo.cmp(&y.lo));
    Ok(out)
}

// Polynomials serialize as arrays of "num/den" coefficient strings,
// constant term first.
impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self
            .coeffs
            .iter()
            .map(|c| format!("{}/{}", c.numer(), c.denom()))
            .collect();
        strings.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        let mut coeffs = Vec::with_capacity(strings.len());
        for s in &strings {
            let (num, den) = match s.split_once('/') {
                Some((n, de)) => (n, de),
                None => (s.as_str(), "1"),
            };
            let num: BigInt = num.trim().parse().map_err(D::Error::custom)?;
            let den: BigInt = den.trim().parse().map_err(D::Error::custom)?;
            if den.is_zero() {
                return Err(D::Error::custom("zero denominator"));
            }
            coeffs.push(Rat::new(num, den));
        }
        Ok(Polynomial::new(coeffs))
    }
}
