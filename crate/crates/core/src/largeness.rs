//! Largeness certificates for `F/<<g_1^q, .., g_k^q>>`.
//!
//! A finite quotient `F -> Q` in which every `g_i` has order at least
//! `k + 1` and divides `q` yields, after Reidemeister–Schreier rewriting of
//! the conjugates of the `g_i^q` in `N = ker`, a presentation of a
//! finite-index subgroup with deficiency at least 2. Such groups are large.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{find_prime_factor, is_prime, primes_up_to, FactoredInt};
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::finquot::{FiniteQuotient, SubgroupPresentation};
use crate::group::QuotientSpec;
use crate::magnus::{embed_capped, free_lie_dimension, unit_group_log_order, Domain};
use crate::word::Word;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedLarge,
    NotCertified,
}

/// Deficiency criterion: `n >= 2` generators and at most `n - 2` relators.
/// A negative answer says nothing about the group.
pub fn bp_certify(generator_count: u64, relator_count: u64) -> Verdict {
    if generator_count >= 2 && relator_count <= generator_count - 2 {
        Verdict::CertifiedLarge
    } else {
        Verdict::NotCertified
    }
}

/// A nonconstant coefficient of the integral Magnus image of a power,
/// nonzero modulo every prime larger than its absolute value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientWitness {
    pub word: String,
    pub power: u32,
    pub monomial: Vec<usize>,
    pub coefficient: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallPrime {
    pub p: u64,
    /// Least truncation at which every power stays nontrivial mod `p`.
    pub truncation: usize,
    /// `log_p` of the order of the mod-`p` unit image at that truncation.
    pub j: u64,
}

/// The threshold `M`: for every `q >= M` some Magnus unit quotient keeps
/// `g_i^s` (`s <= m`) nontrivial while killing every `g_i^q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiBound {
    pub rank: usize,
    pub words: Vec<String>,
    pub m: u32,
    /// Least truncation with all powers nontrivial over the integers.
    pub l: usize,
    pub witnesses: Vec<CoefficientWitness>,
    pub m0: u64,
    pub small_primes: Vec<SmallPrime>,
    pub bound: FactoredInt,
}

impl FiBound {
    fn log2_bound(&self) -> f64 {
        self.small_primes
            .iter()
            .map(|s| s.j as f64 * (s.p as f64).log2())
            .sum()
    }

    /// `M` as an integer, if it has at most `max_bits` bits.
    pub fn bound_value(&self, max_bits: u64) -> Option<BigUint> {
        if self.log2_bound() > max_bits as f64 {
            return None;
        }
        let mut v = BigUint::one();
        for s in &self.small_primes {
            v *= BigUint::from(s.p).pow(s.j as u32);
        }
        Some(v)
    }

    /// `q >= M`.
    pub fn admits(&self, q: &BigUint) -> bool {
        if self.log2_bound() > q.bits() as f64 + 1.0 {
            return false;
        }
        match self.bound_value(q.bits() + 2) {
            Some(m) => q >= &m,
            None => false,
        }
    }
}

fn check_words(g: &[Word]) -> Result<usize> {
    let first = g
        .first()
        .ok_or_else(|| Error::Precondition("at least one word is required".into()))?;
    for w in g {
        if w.rank() != first.rank() {
            return Err(Error::RankMismatch {
                left: first.rank(),
                right: w.rank(),
            });
        }
        if w.is_identity() {
            return Err(Error::Precondition("the identity has no nontrivial powers".into()));
        }
    }
    Ok(first.rank())
}

fn powers(g: &[Word], m: u32, caps: &Caps) -> Result<Vec<(usize, u32, Word)>> {
    let mut out = Vec::new();
    for (i, w) in g.iter().enumerate() {
        if w.len() as u64 * m as u64 > caps.word_length as u64 {
            return Err(Error::InvalidParameter(format!(
                "{w}^{m} exceeds the word length cap {}",
                caps.word_length
            )));
        }
        for s in 1..=m {
            out.push((i, s, w.power(s as i64)));
        }
    }
    Ok(out)
}

/// Least truncation `l >= 2` at which every word has a nontrivial image.
fn least_truncation(words: &[Word], domain: &Domain, caps: &Caps) -> Result<usize> {
    let mut l = 2;
    for w in words {
        while embed_capped(w, domain, l, caps.terms)?.is_one() {
            l += 1;
            if l > caps.truncation {
                return Err(Error::DepthCapReached { cap: caps.truncation });
            }
        }
    }
    Ok(l)
}

/// `log_p` of the order of the group generated by `1 + x_i` in
/// `A(F_p, r)/X^l`.
fn unit_log_order(p: &BigUint, rank: usize, l: usize) -> BigUint {
    match p.to_u64() {
        Some(p) => unit_group_log_order(p, rank, l),
        // p > l: every restricted summand is a free Lie summand
        None => (1..l as u64).map(|n| free_lie_dimension(rank as u64, n)).sum(),
    }
}

pub fn lemma_fi_bound(g: &[Word], m: u32, caps: &Caps) -> Result<FiBound> {
    let rank = check_words(g)?;
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let set = powers(g, m, caps)?;
    let words: Vec<Word> = set.iter().map(|(_, _, w)| w.clone()).collect();
    let l = least_truncation(&words, &Domain::Integers, caps)?;
    let mut witnesses = Vec::new();
    let mut largest = BigInt::zero();
    for (i, s, w) in &set {
        let image = embed_capped(w, &Domain::Integers, l, caps.terms)?;
        let (monomial, c) = image
            .min_abs_nonconstant()
            .ok_or_else(|| Error::InternalCheck(format!("{w} has a trivial image at l = {l}")))?;
        largest = largest.max(c.abs());
        witnesses.push(CoefficientWitness {
            word: g[*i].to_string(),
            power: *s,
            monomial: monomial.iter().map(|v| v + 1).collect(),
            coefficient: c.to_string(),
        });
    }
    let m0 = (largest + 1u32)
        .to_u64()
        .filter(|&v| v < 1 << 32)
        .ok_or_else(|| Error::InvalidParameter("witness coefficients are too large".into()))?
        .max(l as u64);
    let mut small_primes = Vec::new();
    let mut factors = BTreeMap::new();
    for p in primes_up_to(m0) {
        let lp = least_truncation(&words, &Domain::prime(p), caps)?;
        let j = unit_group_log_order(p, rank, lp)
            .to_u64()
            .filter(|&j| j <= u32::MAX as u64)
            .ok_or_else(|| Error::InvalidParameter(format!("j({p}) is too large")))?;
        factors.insert(BigUint::from(p), j as u32);
        small_primes.push(SmallPrime { p, truncation: lp, j });
    }
    Ok(FiBound {
        rank,
        words: g.iter().map(|w| w.to_string()).collect(),
        m,
        l,
        witnesses,
        m0,
        small_primes,
        bound: FactoredInt::from_factors(&factors),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `p^{j(p)}` divides `q` for a prime `p <= M0`.
    SmallPrimePower,
    /// `q` has a prime factor `p > M0`.
    LargePrime,
    /// The part of `q` free of primes `<= M0` could not be split, so the
    /// coefficients live in `Z/c` for that whole cofactor `c`.
    LargeCofactor,
}

/// A Magnus unit quotient whose kernel `N` satisfies `g_i^s` not in `N`
/// for `s <= m` and `g_i^q` in `N`. For prime `p`, `|F : N| = p^log_index`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidingQuotient {
    pub branch: Branch,
    /// The coefficient modulus; prime except in [`Branch::LargeCofactor`].
    pub p: String,
    pub truncation: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub log_index: Option<String>,
    pub spec: QuotientSpec,
    pub bound: FiBound,
}

/// Rho iterations spent per split when looking for a large prime factor.
const RHO_BUDGET: u64 = 200_000;

pub fn find_avoiding_quotient(g: &[Word], m: u32, q: &BigUint, caps: &Caps) -> Result<AvoidingQuotient> {
    let bound = lemma_fi_bound(g, m, caps)?;
    if !bound.admits(q) {
        return Err(Error::BelowBound {
            q: q.to_string(),
            bound: bound.bound.factored.clone(),
        });
    }
    // (log of the index, branch, modulus, truncation, log_p of the index)
    let mut candidates: Vec<(f64, Branch, BigUint, usize, Option<BigUint>)> = Vec::new();
    let mut rest = q.clone();
    for s in &bound.small_primes {
        let p = BigUint::from(s.p);
        let mut v = 0u64;
        while (&rest % &p).is_zero() {
            rest /= &p;
            v += 1;
        }
        if v >= s.j {
            candidates.push((s.j as f64 * (s.p as f64).ln(), Branch::SmallPrimePower, p, s.truncation, Some(s.j.into())));
        }
    }
    if !rest.is_one() {
        // every prime factor of rest exceeds M0
        match find_prime_factor(&rest, RHO_BUDGET) {
            Some(p) => {
                let dim = unit_log_order(&p, bound.rank, bound.l);
                let size = dim.to_f64().unwrap_or(f64::INFINITY) * p.to_f64().unwrap_or(f64::INFINITY).ln();
                candidates.push((size, Branch::LargePrime, p, bound.l, Some(dim)));
            }
            None => candidates.push((f64::INFINITY, Branch::LargeCofactor, rest, bound.l, None)),
        }
    }
    let (_, branch, p, truncation, dim) = candidates
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::InternalCheck(format!("no branch applies to q = {q} >= M")))?;
    let domain = if branch == Branch::LargeCofactor {
        Domain::Residues(p.clone())
    } else {
        debug_assert!(is_prime(&p));
        Domain::Prime(p.clone())
    };
    let spec = QuotientSpec::magnus_units_over(bound.rank, domain, truncation)?;
    for w in g {
        for s in 1..=m {
            if spec.kernel_contains(&w.power(s as i64), caps)? {
                return Err(Error::InternalCheck(format!("{w}^{s} lies in the kernel mod {p}")));
            }
        }
        if !spec.power_in_kernel(w, q, caps)? {
            return Err(Error::InternalCheck(format!("{w}^{q} is not in the kernel mod {p}")));
        }
    }
    Ok(AvoidingQuotient {
        branch,
        p: p.to_string(),
        truncation,
        log_index: dim.map(|d| d.to_string()),
        spec,
        bound,
    })
}

/// Picks `N` when none is supplied: the smaller of the mod-`q`
/// abelianization (when every `g_i` keeps order at least `k + 1` there) and
/// the quotient from [`find_avoiding_quotient`] with `m = k` (when
/// `q >= M`).
pub fn choose_witness(g: &[Word], q: u64, caps: &Caps) -> Result<QuotientSpec> {
    let rank = check_words(g)?;
    let k = g.len() as u64;
    let mut best: Option<(f64, QuotientSpec)> = None;
    if q > k {
        let spec = QuotientSpec::mod_abelianization(rank, q)?;
        let mut fits = true;
        for w in g {
            if spec.image_order(w, caps)? < BigUint::from(k + 1) {
                fits = false;
            }
        }
        if fits {
            best = Some((rank as f64 * (q as f64).ln(), spec));
        }
    }
    match find_avoiding_quotient(g, k as u32, &BigUint::from(q), caps) {
        Ok(n) => {
            let p: BigUint = n.p.parse().expect("decimal modulus");
            let size = match &n.log_index {
                Some(d) => {
                    let dim: BigUint = d.parse().expect("decimal exponent");
                    dim.to_f64().unwrap_or(f64::INFINITY) * p.to_f64().unwrap_or(f64::INFINITY).ln()
                }
                None => f64::INFINITY,
            };
            if best.as_ref().is_none_or(|(b, _)| size < *b) {
                best = Some((size, n.spec));
            }
        }
        Err(e @ Error::BelowBound { .. }) => {
            if best.is_none() {
                return Err(e);
            }
        }
        Err(e) => return Err(e),
    }
    Ok(best.expect("one branch succeeded").1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub rank: usize,
    pub words: Vec<String>,
    pub exponent: u64,
}

impl Target {
    pub fn parse_words(&self) -> Result<Vec<Word>> {
        self.words.iter().map(|w| Word::parse(w, self.rank)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub j: u64,
    pub gens: u64,
    pub rels: u64,
    pub deficiency: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LargenessCertificate {
    pub target: Target,
    pub witness: QuotientSpec,
    pub counts: Counts,
    pub assumptions: Vec<String>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct Certification {
    pub certificate: LargenessCertificate,
    pub presentation: SubgroupPresentation,
    pub image_orders: Vec<usize>,
}

/// Checks that `N` fits: each `g_i` has image order at least `k + 1`, and
/// `g_i^q` lies in `N`. Every failing word is reported.
fn check_witness(quotient: &FiniteQuotient, g: &[Word], q: u64) -> Result<Vec<usize>> {
    let k = g.len();
    let mut orders = Vec::with_capacity(k);
    let mut problems = Vec::new();
    for (i, w) in g.iter().enumerate() {
        let o = quotient.image_order(w)?;
        if o < k + 1 {
            problems.push(format!("g_{} = {w}: image order {o} < {}", i + 1, k + 1));
        }
        if !q.is_multiple_of(o as u64) {
            problems.push(format!("g_{} = {w}: {w}^{q} is not in N (image order {o})", i + 1));
        }
        orders.push(o);
    }
    if !problems.is_empty() {
        return Err(Error::Precondition(problems.join("; ")));
    }
    Ok(orders)
}

/// Runs the full pipeline with `m = k`. Without `witness`, the subgroup
/// comes from [`find_avoiding_quotient`].
pub fn certify_power_quotient(
    g: &[Word],
    q: u64,
    witness: Option<QuotientSpec>,
    caps: &Caps,
) -> Result<Certification> {
    let rank = check_words(g)?;
    if q == 0 {
        return Err(Error::Precondition("q must be positive".into()));
    }
    let k = g.len();
    let spec = match witness {
        Some(spec) => {
            if spec.rank() != rank {
                return Err(Error::RankMismatch {
                    left: rank,
                    right: spec.rank(),
                });
            }
            spec
        }
        None => choose_witness(g, q, caps)?,
    };
    let quotient = FiniteQuotient::build(&spec, caps)?;
    let image_orders = check_witness(&quotient, g, q)?;
    let mut relators = Vec::new();
    for w in g {
        relators.extend(quotient.lemma0_conjugates(w, q, caps)?.conjugates);
    }
    let presentation = quotient.reidemeister_schreier(&relators)?;
    let j = quotient.order() as u64;
    let counts = Counts {
        j,
        gens: presentation.generator_count as u64,
        rels: presentation.relator_count() as u64,
        deficiency: presentation.deficiency(),
    };
    if counts.gens != 1 + (rank as u64 - 1) * j {
        return Err(Error::InternalCheck(format!(
            "{} Schreier generators for index {j}",
            counts.gens
        )));
    }
    let expected_rels: u64 = image_orders.iter().map(|&o| j / o as u64).sum();
    if counts.rels != expected_rels {
        return Err(Error::InternalCheck(format!(
            "{} relators, expected {expected_rels}",
            counts.rels
        )));
    }
    if counts.rels * (k as u64 + 1) > k as u64 * j {
        return Err(Error::InternalCheck(format!(
            "{} relators exceed k j/(k+1) for j = {j}",
            counts.rels
        )));
    }
    let certificate = LargenessCertificate {
        target: Target {
            rank,
            words: g.iter().map(|w| w.to_string()).collect(),
            exponent: q,
        },
        witness: spec,
        counts,
        assumptions: Vec::new(),
        verdict: bp_certify(counts.gens, counts.rels),
    };
    Ok(Certification {
        certificate,
        presentation,
        image_orders,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub recomputed: Option<Counts>,
    pub verdict: Option<Verdict>,
    pub mismatches: Vec<String>,
}

/// Recomputes a certificate from its target and witness alone. Counts come
/// from the index and image orders (not from rewriting), so this is an
/// independent check of the pipeline.
pub fn verify_certificate(cert: &LargenessCertificate, caps: &Caps) -> Result<VerifyReport> {
    let mut mismatches = Vec::new();
    let fail = |mismatches: Vec<String>| VerifyReport {
        ok: false,
        recomputed: None,
        verdict: None,
        mismatches,
    };
    let g = match cert.target.parse_words() {
        Ok(g) => g,
        Err(e) => return Ok(fail(vec![format!("target: {e}")])),
    };
    if let Err(e) = check_words(&g) {
        return Ok(fail(vec![format!("target: {e}")]));
    }
    if cert.witness.rank() != cert.target.rank {
        return Ok(fail(vec![format!(
            "witness rank {} differs from target rank {}",
            cert.witness.rank(),
            cert.target.rank
        )]));
    }
    let quotient = match FiniteQuotient::build(&cert.witness, caps) {
        Ok(qt) => qt,
        Err(e @ (Error::EnumerationCapExceeded { .. } | Error::TermCapExceeded { .. })) => return Err(e),
        Err(e) => return Ok(fail(vec![format!("witness: {e}")])),
    };
    let k = g.len() as u64;
    let q = cert.target.exponent;
    let j = quotient.order() as u64;
    let mut rels = 0u64;
    for (i, w) in g.iter().enumerate() {
        let o = quotient.image_order(w)? as u64;
        if o < k + 1 {
            mismatches.push(format!("g_{} = {w} has image order {o} < {}", i + 1, k + 1));
        }
        if q == 0 || !q.is_multiple_of(o) {
            mismatches.push(format!("g_{} = {w}: {w}^{q} is not in N", i + 1));
        }
        rels += j / o;
    }
    let gens = 1 + (cert.target.rank as u64 - 1) * j;
    let counts = Counts {
        j,
        gens,
        rels,
        deficiency: gens as i64 - rels as i64,
    };
    let verdict = bp_certify(gens, rels);
    let fields = [
        ("j", cert.counts.j as i64, counts.j as i64),
        ("gens", cert.counts.gens as i64, counts.gens as i64),
        ("rels", cert.counts.rels as i64, counts.rels as i64),
        ("deficiency", cert.counts.deficiency, counts.deficiency),
    ];
    for (name, claimed, actual) in fields {
        if claimed != actual {
            mismatches.push(format!("{name}: certificate says {claimed}, recomputed {actual}"));
        }
    }
    if cert.verdict != verdict {
        mismatches.push(format!(
            "verdict: certificate says {:?}, recomputed {verdict:?}",
            cert.verdict
        ));
    }
    if !cert.assumptions.is_empty() {
        mismatches.push(format!("unexpected assumptions: {:?}", cert.assumptions));
    }
    if rels * (k + 1) > k * j {
        mismatches.push(format!("rels = {rels} exceeds k j/(k+1) with j = {j}"));
    }
    Ok(VerifyReport {
        ok: mismatches.is_empty(),
        recomputed: Some(counts),
        verdict: Some(verdict),
        mismatches,
    })
}
