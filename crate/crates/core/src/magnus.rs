//! Truncated non-commutative power series and the Magnus embedding.
//!
//! A [`TruncSeries`] lives in `A(R, r)/X^l`: polynomials in the
//! non-commuting variables `x_1..x_r` over `R = Z` or `R = F_p`, with every
//! monomial of degree `>= l` discarded. The free group embeds into the units
//! `1 + X` via `a_i -> 1 + x_i`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::is_prime;
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::finquot::FiniteQuotient;
use crate::group::{ConcreteImage, Packer, QuotientSpec};
use crate::word::{Letter, Word};

pub const DEFAULT_TERM_CAP: usize = 1_000_000;

/// Coefficient ring of a series.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Integers,
    Prime(BigUint),
    /// `Z/nZ` for any `n >= 2`.
    Residues(BigUint),
}

impl Domain {
    pub fn prime(p: u64) -> Self {
        Domain::Prime(BigUint::from(p))
    }

    pub fn modulus(&self) -> Option<&BigUint> {
        match self {
            Domain::Integers => None,
            Domain::Prime(p) | Domain::Residues(p) => Some(p),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Integers => f.write_str("Z"),
            Domain::Prime(p) => write!(f, "F_{p}"),
            Domain::Residues(n) => write!(f, "Z/{n}"),
        }
    }
}

/// A word in the variables, encoded as its degree and its base-`r` digits
/// (first variable most significant). The derived order is
/// degree-then-lexicographic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    degree: u32,
    digits: u64,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { degree: 0, digits: 0 };

    pub fn degree(self) -> usize {
        self.degree as usize
    }

    pub fn from_variables(vars: &[usize], rank: usize) -> Monomial {
        let digits = vars.iter().fold(0u64, |acc, &v| acc * rank as u64 + v as u64);
        Monomial {
            degree: vars.len() as u32,
            digits,
        }
    }

    /// 0-based variable indices.
    pub fn variables(self, rank: usize) -> Vec<usize> {
        let mut out = vec![0; self.degree as usize];
        let mut d = self.digits;
        for slot in out.iter_mut().rev() {
            *slot = (d % rank as u64) as usize;
            d /= rank as u64;
        }
        out
    }

    fn times(self, other: Monomial, rank: usize) -> Monomial {
        Monomial {
            degree: self.degree + other.degree,
            digits: self.digits * (rank as u64).pow(other.degree) + other.digits,
        }
    }
}

trait Ring {
    type C: Clone + PartialEq + fmt::Debug;
    fn add(&self, a: &Self::C, b: &Self::C) -> Self::C;
    fn mul(&self, a: &Self::C, b: &Self::C) -> Self::C;
    fn neg(&self, a: &Self::C) -> Self::C;
    fn is_zero(&self, a: &Self::C) -> bool;
}

/// `Z/n` with `n < 2^32`.
struct SmallRing(u64);

impl Ring for SmallRing {
    type C = u64;
    fn add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.0
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        (a * b) % self.0
    }
    fn neg(&self, a: &u64) -> u64 {
        (self.0 - a) % self.0
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
}

/// `Z`, or `F_p` for large `p` with residues in `0..p`.
struct BigRing(Option<BigInt>);

impl BigRing {
    fn norm(&self, v: BigInt) -> BigInt {
        match &self.0 {
            Some(p) => v.mod_floor(p),
            None => v,
        }
    }
}

impl Ring for BigRing {
    type C = BigInt;
    fn add(&self, a: &BigInt, b: &BigInt) -> BigInt {
        self.norm(a + b)
    }
    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        self.norm(a * b)
    }
    fn neg(&self, a: &BigInt) -> BigInt {
        self.norm(-a)
    }
    fn is_zero(&self, a: &BigInt) -> bool {
        a.is_zero()
    }
}

type TermMap<C> = BTreeMap<Monomial, C>;

fn mul_terms<R: Ring>(
    ring: &R,
    a: &TermMap<R::C>,
    b: &TermMap<R::C>,
    rank: usize,
    l: usize,
    cap: usize,
) -> Result<TermMap<R::C>> {
    let mut acc: HashMap<Monomial, R::C> = HashMap::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            if ma.degree() + mb.degree() >= l {
                // b is sorted by degree
                break;
            }
            let m = ma.times(*mb, rank);
            let prod = ring.mul(ca, cb);
            match acc.get_mut(&m) {
                Some(c) => *c = ring.add(c, &prod),
                None => {
                    acc.insert(m, prod);
                    if acc.len() > cap {
                        return Err(Error::TermCapExceeded { cap });
                    }
                }
            }
        }
    }
    Ok(acc.into_iter().filter(|(_, c)| !ring.is_zero(c)).collect())
}

fn add_terms<R: Ring>(ring: &R, a: &TermMap<R::C>, b: &TermMap<R::C>) -> TermMap<R::C> {
    let mut out = a.clone();
    for (m, c) in b {
        let v = match out.get(m) {
            Some(x) => ring.add(x, c),
            None => c.clone(),
        };
        if ring.is_zero(&v) {
            out.remove(m);
        } else {
            out.insert(*m, v);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Terms {
    Small(TermMap<u64>),
    Big(TermMap<BigInt>),
}

/// An element of `A(R, r)/X^l`, stored sparsely with no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncSeries {
    rank: usize,
    degree_bound: usize,
    domain: Domain,
    terms: Terms,
}

const SMALL_MODULUS_LIMIT: u64 = 1 << 32;

fn small_modulus(domain: &Domain) -> Option<u64> {
    domain
        .modulus()
        .and_then(|p| p.to_u64())
        .filter(|&p| p < SMALL_MODULUS_LIMIT)
}

impl TruncSeries {
    fn check_shape(rank: usize, l: usize, domain: &Domain) -> Result<()> {
        if rank == 0 || l == 0 {
            return Err(Error::InvalidParameter("series need rank >= 1 and l >= 1".into()));
        }
        if l > 1 && (rank as u64).checked_pow(l as u32 - 1).is_none() {
            return Err(Error::InvalidParameter(format!(
                "monomials of degree {} in {rank} variables cannot be indexed",
                l - 1
            )));
        }
        match domain {
            Domain::Prime(p) if !is_prime(p) => {
                return Err(Error::InvalidParameter(format!("{p} is not prime")));
            }
            Domain::Residues(n) if n < &BigUint::from(2u8) => {
                return Err(Error::InvalidParameter(format!("modulus {n} is below 2")));
            }
            _ => {}
        }
        Ok(())
    }

    fn empty(rank: usize, l: usize, domain: Domain) -> Result<Self> {
        TruncSeries::check_shape(rank, l, &domain)?;
        let terms = if small_modulus(&domain).is_some() {
            Terms::Small(TermMap::new())
        } else {
            Terms::Big(TermMap::new())
        };
        Ok(TruncSeries {
            rank,
            degree_bound: l,
            domain,
            terms,
        })
    }

    pub fn zero(rank: usize, l: usize, domain: Domain) -> Result<Self> {
        TruncSeries::empty(rank, l, domain)
    }

    pub fn one(rank: usize, l: usize, domain: Domain) -> Result<Self> {
        TruncSeries::from_terms(rank, l, domain, [(Vec::new(), BigInt::one())])
    }

    /// `1 + x_i` for the 0-based variable `i`.
    pub fn variable_unit(rank: usize, l: usize, domain: Domain, i: usize) -> Result<Self> {
        if i >= rank {
            return Err(Error::GeneratorOutOfRange { index: i + 1, rank });
        }
        TruncSeries::from_terms(
            rank,
            l,
            domain,
            [(Vec::new(), BigInt::one()), (vec![i], BigInt::one())],
        )
    }

    /// Builds a series from (0-based variable list, coefficient) pairs;
    /// monomials of degree `>= l` are dropped and repeats are summed.
    pub fn from_terms<I>(rank: usize, l: usize, domain: Domain, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, BigInt)>,
    {
        let mut s = TruncSeries::empty(rank, l, domain)?;
        for (vars, c) in terms {
            if let Some(&v) = vars.iter().find(|&&v| v >= rank) {
                return Err(Error::GeneratorOutOfRange { index: v + 1, rank });
            }
            if vars.len() >= l {
                continue;
            }
            let m = Monomial::from_variables(&vars, rank);
            match (&mut s.terms, s.domain.modulus()) {
                (Terms::Small(map), Some(p)) => {
                    let p = p.to_u64().expect("small prime");
                    let ring = SmallRing(p);
                    let v = c.mod_floor(&BigInt::from(p)).to_u64().expect("reduced");
                    let single: TermMap<u64> = [(m, v)].into_iter().filter(|(_, v)| *v != 0).collect();
                    *map = add_terms(&ring, map, &single);
                }
                (Terms::Big(map), modulus) => {
                    let ring = BigRing(modulus.map(|p| BigInt::from(p.clone())));
                    let v = ring.norm(c);
                    let single: TermMap<BigInt> = [(m, v)].into_iter().filter(|(_, v)| !v.is_zero()).collect();
                    *map = add_terms(&ring, map, &single);
                }
                (Terms::Small(_), None) => unreachable!("small terms always carry a prime"),
            }
        }
        Ok(s)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Number of stored (nonzero) terms.
    pub fn len(&self) -> usize {
        match &self.terms {
            Terms::Small(m) => m.len(),
            Terms::Big(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Terms in degree-then-lexicographic order.
    pub fn terms(&self) -> Vec<(Vec<usize>, BigInt)> {
        match &self.terms {
            Terms::Small(m) => m
                .iter()
                .map(|(k, v)| (k.variables(self.rank), BigInt::from(*v)))
                .collect(),
            Terms::Big(m) => m
                .iter()
                .map(|(k, v)| (k.variables(self.rank), v.clone()))
                .collect(),
        }
    }

    pub fn coefficient(&self, vars: &[usize]) -> BigInt {
        let m = Monomial::from_variables(vars, self.rank);
        match &self.terms {
            Terms::Small(map) => map.get(&m).map(|&v| BigInt::from(v)).unwrap_or_default(),
            Terms::Big(map) => map.get(&m).cloned().unwrap_or_default(),
        }
    }

    pub fn constant_term(&self) -> BigInt {
        self.coefficient(&[])
    }

    /// Constant term exactly 1, i.e. an element of `1 + X`.
    pub fn is_unit(&self) -> bool {
        self.constant_term().is_one()
    }

    pub fn is_one(&self) -> bool {
        self.len() == 1 && self.is_unit()
    }

    fn check_same(&self, other: &TruncSeries) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::SeriesMismatch(format!(
                "domains {} and {}",
                self.domain, other.domain
            )));
        }
        if self.rank != other.rank || self.degree_bound != other.degree_bound {
            return Err(Error::SeriesMismatch(format!(
                "(rank {}, l {}) vs (rank {}, l {})",
                self.rank, self.degree_bound, other.rank, other.degree_bound
            )));
        }
        Ok(())
    }

    fn big_ring(&self) -> BigRing {
        BigRing(self.domain.modulus().map(|p| BigInt::from(p.clone())))
    }

    pub fn mul(&self, other: &TruncSeries) -> Result<TruncSeries> {
        self.mul_capped(other, DEFAULT_TERM_CAP)
    }

    pub fn mul_capped(&self, other: &TruncSeries, cap: usize) -> Result<TruncSeries> {
        self.check_same(other)?;
        let (r, l) = (self.rank, self.degree_bound);
        let terms = match (&self.terms, &other.terms) {
            (Terms::Small(a), Terms::Small(b)) => {
                let p = small_modulus(&self.domain).expect("small domain");
                Terms::Small(mul_terms(&SmallRing(p), a, b, r, l, cap)?)
            }
            (Terms::Big(a), Terms::Big(b)) => Terms::Big(mul_terms(&self.big_ring(), a, b, r, l, cap)?),
            _ => unreachable!("equal domains share a representation"),
        };
        Ok(TruncSeries { terms, ..self.clone() })
    }

    pub fn add(&self, other: &TruncSeries) -> Result<TruncSeries> {
        self.check_same(other)?;
        let terms = match (&self.terms, &other.terms) {
            (Terms::Small(a), Terms::Small(b)) => {
                let p = small_modulus(&self.domain).expect("small domain");
                Terms::Small(add_terms(&SmallRing(p), a, b))
            }
            (Terms::Big(a), Terms::Big(b)) => Terms::Big(add_terms(&self.big_ring(), a, b)),
            _ => unreachable!("equal domains share a representation"),
        };
        Ok(TruncSeries { terms, ..self.clone() })
    }

    pub fn neg(&self) -> TruncSeries {
        let terms = match &self.terms {
            Terms::Small(a) => {
                let ring = SmallRing(small_modulus(&self.domain).expect("small domain"));
                Terms::Small(a.iter().map(|(m, c)| (*m, ring.neg(c))).collect())
            }
            Terms::Big(a) => {
                let ring = self.big_ring();
                Terms::Big(a.iter().map(|(m, c)| (*m, ring.neg(c))).collect())
            }
        };
        TruncSeries { terms, ..self.clone() }
    }

    /// Inverse of a unit `1 + u`, namely `sum_{k<l} (-u)^k`.
    pub fn inv(&self) -> Result<TruncSeries> {
        if !self.is_unit() {
            return Err(Error::NotUnit(self.constant_term().to_string()));
        }
        let one = TruncSeries::one(self.rank, self.degree_bound, self.domain.clone())?;
        let minus_u = one.add(&self.neg())?;
        let mut acc = one.clone();
        for _ in 1..self.degree_bound {
            acc = one.add(&minus_u.mul(&acc)?)?;
        }
        Ok(acc)
    }

    /// `self^e` by square-and-multiply.
    pub fn pow(&self, e: &BigUint) -> Result<TruncSeries> {
        self.pow_capped(e, DEFAULT_TERM_CAP)
    }

    pub fn pow_capped(&self, e: &BigUint, cap: usize) -> Result<TruncSeries> {
        let mut result = TruncSeries::one(self.rank, self.degree_bound, self.domain.clone())?;
        let bits = e.bits();
        for i in (0..bits).rev() {
            result = result.mul_capped(&result, cap)?;
            if e.bit(i) {
                result = result.mul_capped(self, cap)?;
            }
        }
        Ok(result)
    }

    /// Reduces an integral series modulo the prime `p`.
    pub fn reduce_mod(&self, p: &BigUint) -> Result<TruncSeries> {
        TruncSeries::from_terms(
            self.rank,
            self.degree_bound,
            Domain::Prime(p.clone()),
            self.terms(),
        )
    }

    /// Multiplicative order of a unit over `F_p`. Always a power of `p`,
    /// dividing `p^ceil(log_p l)` because `(1+u)^(p^k) = 1 + u^(p^k)`.
    pub fn unit_order(&self) -> Result<BigUint> {
        let Domain::Prime(p) = &self.domain else {
            return Err(Error::InvalidParameter(format!("unit orders are only computed over F_p, not {}", self.domain)));
        };
        let p = p.clone();
        if !self.is_unit() {
            return Err(Error::NotUnit(self.constant_term().to_string()));
        }
        let mut order = BigUint::one();
        let mut t = self.clone();
        while !t.is_one() {
            t = t.pow(&p)?;
            order *= &p;
        }
        Ok(order)
    }

    /// A nonconstant term of least absolute coefficient value, preferring the
    /// lowest degree among ties. For integral series this certifies
    /// `self != 1` modulo every prime exceeding the coefficient.
    pub fn min_abs_nonconstant(&self) -> Option<(Vec<usize>, BigInt)> {
        self.terms()
            .into_iter()
            .filter(|(vars, _)| !vars.is_empty())
            .min_by(|a, b| a.1.abs().cmp(&b.1.abs()))
    }

    /// Parses the printed form, e.g. `1 + 2·x1 + x1x2`.
    pub fn parse(text: &str, rank: usize, l: usize, domain: Domain) -> Result<TruncSeries> {
        let err = |reason: String| Error::SeriesSyntax {
            input: text.to_string(),
            reason,
        };
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err("empty input".into()));
        }
        let mut pieces: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut negative = false;
        for (i, c) in compact.chars().enumerate() {
            if (c == '+' || c == '-') && i > 0 {
                pieces.push((negative, std::mem::take(&mut cur)));
                negative = c == '-';
            } else if c == '-' {
                negative = true;
            } else if c != '+' {
                cur.push(c);
            }
        }
        pieces.push((negative, cur));
        let mut terms = Vec::new();
        for (neg, piece) in pieces {
            if piece.is_empty() {
                return Err(err("empty term".into()));
            }
            let (coef_text, mono_text) = match piece.find(['·', '*']) {
                Some(pos) => {
                    let sep_len = piece[pos..].chars().next().map(char::len_utf8).unwrap_or(1);
                    (&piece[..pos], &piece[pos + sep_len..])
                }
                None => match piece.find('x') {
                    Some(0) => ("1", piece.as_str()),
                    Some(_) => return Err(err(format!("missing separator in {piece:?}"))),
                    None => (piece.as_str(), ""),
                },
            };
            let mut c: BigInt = coef_text
                .parse()
                .map_err(|_| err(format!("bad coefficient {coef_text:?}")))?;
            if neg {
                c = -c;
            }
            let mut vars = Vec::new();
            let mut rest = mono_text;
            while !rest.is_empty() {
                let Some(after) = rest.strip_prefix('x') else {
                    return Err(err(format!("bad monomial {mono_text:?}")));
                };
                let digits_end = after.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(after.len());
                let idx: usize = after[..digits_end]
                    .parse()
                    .map_err(|_| err(format!("bad variable in {mono_text:?}")))?;
                if idx == 0 {
                    return Err(err("variables start at x1".into()));
                }
                vars.push(idx - 1);
                rest = &after[digits_end..];
            }
            if vars.len() >= l {
                return Err(err(format!("monomial of degree {} with l = {l}", vars.len())));
            }
            terms.push((vars, c));
        }
        TruncSeries::from_terms(rank, l, domain, terms)
    }
}

impl fmt::Display for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        if terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (vars, c)) in terms.iter().enumerate() {
            let negative = c.sign() == Sign::Minus;
            match (k, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let a = c.abs();
            if vars.is_empty() {
                write!(f, "{a}")?;
                continue;
            }
            if !a.is_one() {
                write!(f, "{a}·")?;
            }
            for v in vars {
                write!(f, "x{}", v + 1)?;
            }
        }
        Ok(())
    }
}

/// Image of a letter under `a_i -> 1 + x_i`: `1 + x_i` or `sum_k (-x_i)^k`.
fn letter_image(rank: usize, l: usize, domain: &Domain, letter: Letter) -> Result<TruncSeries> {
    let i = letter.gen();
    if letter.is_inverse() {
        TruncSeries::from_terms(
            rank,
            l,
            domain.clone(),
            (0..l).map(|k| (vec![i; k], if k % 2 == 0 { BigInt::one() } else { -BigInt::one() })),
        )
    } else {
        TruncSeries::variable_unit(rank, l, domain.clone(), i)
    }
}

/// Magnus image of `w` in `A(domain, r)/X^l`.
pub fn embed(w: &Word, domain: &Domain, l: usize) -> Result<TruncSeries> {
    embed_capped(w, domain, l, DEFAULT_TERM_CAP)
}

pub fn embed_capped(w: &Word, domain: &Domain, l: usize, cap: usize) -> Result<TruncSeries> {
    let r = w.rank();
    let mut acc = TruncSeries::one(r, l, domain.clone())?;
    let mut cache: HashMap<Letter, TruncSeries> = HashMap::new();
    for &letter in w.letters() {
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(letter) {
            e.insert(letter_image(r, l, domain, letter)?);
        }
        acc = acc.mul_capped(&cache[&letter], cap)?;
    }
    Ok(acc)
}

fn mobius(mut n: u64) -> i64 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

/// Witt's necklace count: dimension of the degree-`m` part of the free Lie
/// algebra on `rank` generators.
pub fn free_lie_dimension(rank: u64, m: u64) -> BigUint {
    let mut total = BigInt::zero();
    for d in (1..=m).filter(|d| m.is_multiple_of(*d)) {
        total += BigInt::from(mobius(d)) * BigInt::from(rank).pow((m / d) as u32);
    }
    (total / BigInt::from(m)).to_biguint().expect("necklace counts are nonnegative")
}

/// Degree-`n` dimension of the free restricted Lie algebra over `F_p`:
/// `sum_{p^k | n} L(n / p^k)`.
pub fn restricted_lie_dimension(rank: u64, n: u64, p: u64) -> BigUint {
    let mut total = BigUint::zero();
    let mut m = n;
    loop {
        total += free_lie_dimension(rank, m);
        if !m.is_multiple_of(p) {
            break;
        }
        m /= p;
    }
    total
}

/// `log_p` of the order of the image of `F_r` in the units of
/// `A(F_p, r)/X^l`. The kernels of these maps are the mod-`p` dimension
/// subgroups, whose successive factors have the restricted Lie dimensions
/// above; the enumeration in [`unit_image_quotient`] cross-checks this.
pub fn unit_group_log_order(p: u64, rank: usize, l: usize) -> BigUint {
    (1..l as u64)
        .map(|n| restricted_lie_dimension(rank as u64, n, p))
        .sum()
}

/// The finite `p`-group generated by `1 + x_1, .., 1 + x_r` in the units of
/// `A(F_p, r)/X^l`, enumerated breadth first.
pub fn unit_image_quotient(p: u64, rank: usize, l: usize, cap: usize) -> Result<FiniteQuotient> {
    if l < 2 {
        return Err(Error::InvalidParameter("unit image quotients need l >= 2".into()));
    }
    let spec = QuotientSpec::magnus_units(rank, &BigUint::from(p), l)?;
    let caps = Caps {
        enumeration: cap,
        ..Caps::default()
    };
    FiniteQuotient::build(&spec, &caps)
}

/// Dense evaluator for Magnus unit quotients over a small prime field.
pub struct MagnusUnitImage {
    rank: usize,
    p: u64,
    l: usize,
    offsets: Vec<usize>,
    degree_of: Vec<usize>,
    powers: Vec<usize>,
    images: Vec<Vec<(usize, usize, u64)>>,
    inverses: Vec<Vec<(usize, usize, u64)>>,
    packer: Packer,
}

const DENSE_MONOMIAL_LIMIT: usize = 1 << 20;

impl MagnusUnitImage {
    pub fn new(images: &[TruncSeries]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidParameter("no generator images".into()))?;
        let p = small_modulus(first.domain()).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "dense unit groups need a modulus below 2^32, got {}",
                first.domain()
            ))
        })?;
        let (rank, l) = (first.rank(), first.degree_bound());
        let mut offsets = Vec::with_capacity(l + 1);
        let mut powers = Vec::with_capacity(l);
        let mut total = 0usize;
        for k in 0..l {
            offsets.push(total);
            let size = rank.checked_pow(k as u32).filter(|&s| s <= DENSE_MONOMIAL_LIMIT);
            let size = size.ok_or_else(|| Error::InvalidParameter("too many monomials for a dense unit group".into()))?;
            powers.push(size);
            total += size;
            if total > DENSE_MONOMIAL_LIMIT {
                return Err(Error::InvalidParameter("too many monomials for a dense unit group".into()));
            }
        }
        offsets.push(total);
        let mut degree_of = vec![0; total];
        for k in 0..l {
            for slot in degree_of.iter_mut().take(offsets[k + 1]).skip(offsets[k]) {
                *slot = k;
            }
        }
        let sparse = |s: &TruncSeries| -> Vec<(usize, usize, u64)> {
            s.terms()
                .into_iter()
                .map(|(vars, c)| {
                    let m = Monomial::from_variables(&vars, rank);
                    (m.degree(), m.digits as usize, c.to_u64().expect("reduced residue"))
                })
                .collect()
        };
        let mut dense_images = Vec::new();
        let mut dense_inverses = Vec::new();
        for s in images {
            dense_images.push(sparse(s));
            dense_inverses.push(sparse(&s.inv()?));
        }
        Ok(MagnusUnitImage {
            rank,
            p,
            l,
            offsets,
            degree_of,
            powers,
            images: dense_images,
            inverses: dense_inverses,
            packer: Packer::new(p, total),
        })
    }

    pub fn monomial_count(&self) -> usize {
        self.degree_of.len()
    }
}

impl ConcreteImage for MagnusUnitImage {
    fn rank(&self) -> usize {
        self.rank
    }

    fn identity(&self) -> Vec<u64> {
        let mut v = vec![0; self.monomial_count()];
        v[0] = 1;
        self.packer.pack(&v)
    }

    fn act(&self, e: &[u64], letter: Letter) -> Vec<u64> {
        let src = self.packer.unpack(e);
        let factor = if letter.is_inverse() {
            &self.inverses[letter.gen()]
        } else {
            &self.images[letter.gen()]
        };
        let mut out = vec![0u64; src.len()];
        for (code, &c1) in src.iter().enumerate() {
            if c1 == 0 {
                continue;
            }
            let d1 = self.degree_of[code];
            let digits1 = code - self.offsets[d1];
            for &(d2, digits2, c2) in factor {
                if d1 + d2 >= self.l {
                    continue;
                }
                let target = self.offsets[d1 + d2] + digits1 * self.powers[d2] + digits2;
                out[target] = (out[target] + c1 * c2) % self.p;
            }
        }
        self.packer.pack(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::ShortlexWords;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        Word::parse(s, 2).unwrap()
    }

    fn series(s: &str, l: usize, domain: Domain) -> TruncSeries {
        TruncSeries::parse(s, 2, l, domain).unwrap()
    }

    /// Expands a word as a product of letter images by brute force over all
    /// choices of one term per factor.
    fn brute_force_embed(word: &Word, l: usize) -> BTreeMap<Vec<usize>, i64> {
        let mut acc: BTreeMap<Vec<usize>, i64> = [(Vec::new(), 1)].into_iter().collect();
        for &letter in word.letters() {
            let factor: Vec<(Vec<usize>, i64)> = if letter.is_inverse() {
                (0..l).map(|k| (vec![letter.gen(); k], if k % 2 == 0 { 1 } else { -1 })).collect()
            } else {
                vec![(vec![], 1), (vec![letter.gen()], 1)]
            };
            let mut next = BTreeMap::new();
            for (m, c) in &acc {
                for (m2, c2) in &factor {
                    if m.len() + m2.len() < l {
                        let mut mm = m.clone();
                        mm.extend(m2);
                        *next.entry(mm).or_insert(0) += c * c2;
                    }
                }
            }
            acc = next.into_iter().filter(|(_, c)| *c != 0).collect();
        }
        acc
    }

    #[test]
    fn embed_examples() {
        assert_eq!(embed(&w("a"), &Domain::prime(2), 3).unwrap().to_string(), "1 + x1");
        let inv = embed(&w("A"), &Domain::prime(3), 3).unwrap();
        assert_eq!(inv, series("1 + 2·x1 + x1x1", 3, Domain::prime(3)));
        assert!(inv.mul(&embed(&w("a"), &Domain::prime(3), 3).unwrap()).unwrap().is_one());
        let comm = embed(&w("ABab"), &Domain::prime(2), 3).unwrap();
        assert_eq!(comm.to_string(), "1 + x1x2 + x2x1");
        let oracle = brute_force_embed(&w("ABab"), 3);
        let expected: BTreeMap<Vec<usize>, i64> =
            oracle.into_iter().map(|(m, c)| (m, c.rem_euclid(2))).filter(|(_, c)| *c != 0).collect();
        assert_eq!(expected.len(), 3);
        assert_eq!(expected[&vec![0, 1]], 1);
        assert_eq!(expected[&vec![1, 0]], 1);
    }

    #[test]
    fn integral_embedding_matches_brute_force() {
        for word in ShortlexWords::up_to(2, 4) {
            for l in 1..6 {
                let s = embed(&word, &Domain::Integers, l).unwrap();
                let got: BTreeMap<Vec<usize>, i64> =
                    s.terms().into_iter().map(|(m, c)| (m, c.to_i64().unwrap())).collect();
                assert_eq!(got, brute_force_embed(&word, l), "{word} at l = {l}");
            }
        }
    }

    #[test]
    fn series_arithmetic_examples() {
        let z = Domain::Integers;
        let one = TruncSeries::one(2, 4, z.clone()).unwrap();
        let a = series("1 + x1", 4, z.clone());
        assert_eq!(a.mul(&one).unwrap(), a);
        assert_eq!(a.inv().unwrap().to_string(), "1 - x1 + x1x1 - x1x1x1");
        let b = series("1 + x2", 4, z.clone());
        assert_eq!(a.mul(&b).unwrap().to_string(), "1 + x1 + x2 + x1x2");
        assert!(matches!(series("2 + x1", 4, z.clone()).inv(), Err(Error::NotUnit(_))));
        let other = series("1 + x1", 4, Domain::prime(5));
        assert!(matches!(a.mul(&other), Err(Error::SeriesMismatch(_))));
    }

    #[test]
    fn unit_order_examples() {
        assert_eq!(series("1 + x1", 4, Domain::prime(5)).unit_order().unwrap(), BigUint::from(5u32));
        // (1+x)^2 = 1+x^2 and (1+x)^4 = 1 modulo X^4 over F_2
        assert_eq!(series("1 + x1", 4, Domain::prime(2)).unit_order().unwrap(), BigUint::from(4u32));
        assert_eq!(series("1", 4, Domain::prime(2)).unit_order().unwrap(), BigUint::one());
    }

    #[test]
    fn term_cap_is_enforced() {
        let word = Word::parse("abABaabb", 2).unwrap();
        assert!(matches!(
            embed_capped(&word, &Domain::Integers, 7, 5),
            Err(Error::TermCapExceeded { cap: 5 })
        ));
    }

    #[test]
    fn restricted_lie_dimensions() {
        // free Lie algebra on 2 generators: 2, 1, 2, 3, 6, 9
        let lie: Vec<u64> = (1..=6).map(|m| free_lie_dimension(2, m).to_u64().unwrap()).collect();
        assert_eq!(lie, [2, 1, 2, 3, 6, 9]);
        assert_eq!(restricted_lie_dimension(2, 2, 2), BigUint::from(3u32));
        assert_eq!(restricted_lie_dimension(2, 4, 2), BigUint::from(6u32));
        assert_eq!(unit_group_log_order(2, 2, 2), BigUint::from(2u32));
    }

    #[test]
    fn unit_quotients_match_the_order_formula() {
        for (p, r, l) in [(2, 2, 2), (3, 2, 2), (2, 2, 3), (2, 2, 4), (2, 2, 5), (3, 2, 3), (3, 2, 4), (5, 2, 3), (2, 3, 3), (7, 2, 2)] {
            let q = unit_image_quotient(p, r, l, 1_000_000).unwrap();
            let expected = BigUint::from(p).pow(unit_group_log_order(p, r, l).to_u32().unwrap());
            assert_eq!(BigUint::from(q.order()), expected, "p={p} r={r} l={l}");
        }
    }

    #[test]
    fn unit_quotient_examples() {
        assert_eq!(unit_image_quotient(2, 2, 2, 100).unwrap().order(), 4);
        assert_eq!(unit_image_quotient(3, 2, 2, 100).unwrap().order(), 9);
        assert!(matches!(
            unit_image_quotient(2, 2, 2, 3),
            Err(Error::EnumerationCapExceeded { cap: 3, .. })
        ));
    }

    #[test]
    fn faithfulness_at_desk_scale() {
        for word in ShortlexWords::up_to(2, 6) {
            let found = [2u64, 3, 5, 7, 11, 13].iter().any(|&p| {
                (2..=7).any(|l| !embed(&word, &Domain::prime(p), l).unwrap().is_one())
            });
            assert!(found, "{word} vanished in every truncation");
        }
    }

    #[test]
    fn print_parse_round_trip() {
        let s = embed(&w("aBBab"), &Domain::Integers, 5).unwrap();
        let text = s.to_string();
        assert_eq!(TruncSeries::parse(&text, 2, 5, Domain::Integers).unwrap(), s);
        assert_eq!(TruncSeries::zero(2, 3, Domain::Integers).unwrap().to_string(), "0");
        assert_eq!(series("3*x1x2 + 1", 4, Domain::prime(7)).to_string(), "1 + 3·x1x2");
    }

    fn arb_word(max_len: usize) -> impl Strategy<Value = Word> {
        prop::collection::vec((0..2usize, any::<bool>()), 0..=max_len)
            .prop_map(|v| Word::reduce(2, v.into_iter().map(|(g, i)| Letter::new(g, i))).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn embedding_is_a_homomorphism(u in arb_word(8), v in arb_word(8), pi in 0..3usize, l in 1..6usize) {
            let domain = Domain::prime([2u64, 3, 5][pi]);
            let lhs = embed(&u.mul(&v).unwrap(), &domain, l).unwrap();
            let rhs = embed(&u, &domain, l).unwrap().mul(&embed(&v, &domain, l).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn integral_reduction_commutes(u in arb_word(10), pi in 0..4usize, l in 1..6usize) {
            let p = BigUint::from([2u64, 3, 5, 7][pi]);
            let lhs = embed(&u, &Domain::Integers, l).unwrap().reduce_mod(&p).unwrap();
            let rhs = embed(&u, &Domain::Prime(p), l).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn unit_orders_divide_the_bound(u in arb_word(10), pi in 0..3usize, l in 2..7usize) {
            let p = [2u64, 3, 5][pi];
            let s = embed(&u, &Domain::prime(p), l).unwrap();
            let order = s.unit_order().unwrap();
            let mut bound = BigUint::one();
            while bound < BigUint::from(l) {
                bound *= p;
            }
            prop_assert!((&bound % &order).is_zero());
        }

        #[test]
        fn inverse_is_two_sided(u in arb_word(10), l in 1..6usize) {
            let s = embed(&u, &Domain::Integers, l).unwrap();
            prop_assert!(s.mul(&s.inv().unwrap()).unwrap().is_one());
            prop_assert!(s.inv().unwrap().mul(&s).unwrap().is_one());
        }
    }
}
