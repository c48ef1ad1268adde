//! The series `gamma_0 = F`, `gamma_d = [gamma_{d-1}, gamma_{d-1}] gamma_{d-1}^{q_d}`
//! for a sequence of primes `q_1, q_2, ...`.
//!
//! Elements of `F/gamma_d` are held in a layered normal form: for each level
//! `k <= d` the exponent vector, mod `q_k`, of the Schreier rewriting of the
//! word's path through the coset graph of `F/gamma_{k-1}`. Level `d` is usable
//! only when `F/gamma_{d-1}` is small enough to enumerate.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{is_prime_u64, primes_up_to};
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::finquot::{FiniteQuotient, SchreierBasis};
use crate::group::{ConcreteImage, QuotientSpec, VerbalParams};
use crate::word::{Letter, Word};

/// Largest order, in bits, that is ever expanded out of factored form.
const MAX_EXPANDED_BITS: f64 = (1u64 << 22) as f64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct PrimeSeq {
    primes: Vec<u64>,
    distinct: bool,
}

impl PrimeSeq {
    pub fn new(primes: Vec<u64>) -> Result<Self> {
        if let Some(&bad) = primes.iter().find(|&&p| !is_prime_u64(p)) {
            return Err(Error::InvalidParameter(format!("{bad} is not prime")));
        }
        let mut sorted = primes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        let distinct = sorted.len() == primes.len();
        Ok(PrimeSeq { primes, distinct })
    }

    /// The first `n` primes `2, 3, 5, ...`.
    pub fn first(n: usize) -> Self {
        let mut bound = 16u64;
        loop {
            let ps = primes_up_to(bound);
            if ps.len() >= n {
                return PrimeSeq {
                    primes: ps[..n].to_vec(),
                    distinct: true,
                };
            }
            bound *= 2;
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let primes = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad prime {t:?} in {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        PrimeSeq::new(primes)
    }

    /// The subsequence `(q_{k+1}, q_{k+2}, ...)`.
    pub fn shift(&self, k: usize) -> PrimeSeq {
        PrimeSeq::new(self.primes[k.min(self.primes.len())..].to_vec()).expect("entries already checked")
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// `q_d` for `d >= 1`.
    pub fn prime(&self, d: usize) -> Option<u64> {
        d.checked_sub(1).and_then(|i| self.primes.get(i).copied())
    }

    pub fn is_distinct(&self) -> bool {
        self.distinct
    }

    /// `q_1 q_2 ... q_k`.
    pub fn prefix_product(&self, k: usize) -> BigUint {
        self.primes[..k.min(self.primes.len())]
            .iter()
            .map(|&p| BigUint::from(p))
            .product()
    }
}

impl TryFrom<Vec<u64>> for PrimeSeq {
    type Error = Error;

    fn try_from(v: Vec<u64>) -> Result<Self> {
        PrimeSeq::new(v)
    }
}

impl From<PrimeSeq> for Vec<u64> {
    fn from(s: PrimeSeq) -> Vec<u64> {
        s.primes
    }
}

/// A group order kept as prime exponents, which may be far too large to
/// expand.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FactoredOrder {
    exponents: BTreeMap<u64, BigUint>,
}

impl FactoredOrder {
    pub fn one() -> Self {
        FactoredOrder::default()
    }

    pub fn times_power(&self, p: u64, e: &BigUint) -> Self {
        let mut out = self.clone();
        if !e.is_zero() {
            *out.exponents.entry(p).or_default() += e;
        }
        out
    }

    pub fn exponent(&self, p: u64) -> BigUint {
        self.exponents.get(&p).cloned().unwrap_or_default()
    }

    fn log2(&self) -> f64 {
        self.exponents
            .iter()
            .map(|(&p, e)| e.to_f64().unwrap_or(f64::INFINITY) * (p as f64).log2())
            .sum()
    }

    /// The order itself, unless it is astronomically large.
    pub fn value(&self) -> Option<BigUint> {
        if self.log2() > MAX_EXPANDED_BITS {
            return None;
        }
        let mut v = BigUint::one();
        for (&p, e) in &self.exponents {
            v *= BigUint::from(p).pow(e.to_u32()?);
        }
        Some(v)
    }

    pub fn to_u64(&self) -> Option<u64> {
        if self.log2() >= 64.0 {
            return None;
        }
        self.value().and_then(|v| v.to_u64())
    }
}

impl fmt::Display for FactoredOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponents.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.exponents.iter().map(|(p, e)| format!("{p}^{e}")).collect();
        write!(f, "{}", parts.join(" * "))
    }
}

#[derive(Serialize, Deserialize)]
struct FactoredOrderRepr {
    factored: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    decimal: Option<u64>,
}

impl Serialize for FactoredOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FactoredOrderRepr {
            factored: self.to_string(),
            decimal: self.to_u64(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FactoredOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FactoredOrderRepr::deserialize(d)?;
        let mut out = FactoredOrder::one();
        if repr.factored.trim() != "1" {
            for part in repr.factored.split('*') {
                let (p, e) = part
                    .trim()
                    .split_once('^')
                    .ok_or_else(|| serde::de::Error::custom(format!("bad factor {part:?}")))?;
                let p: u64 = p.parse().map_err(serde::de::Error::custom)?;
                let e: BigUint = e.parse().map_err(serde::de::Error::custom)?;
                out = out.times_power(p, &e);
            }
        }
        if repr.decimal.is_some() && repr.decimal != out.to_u64() {
            return Err(serde::de::Error::custom("decimal value disagrees with the factorization"));
        }
        Ok(out)
    }
}

/// Summary of one level `gamma_d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbalLevel {
    pub depth: usize,
    pub prime: u64,
    pub parent_order: FactoredOrder,
    /// `1 + (r-1)|F/gamma_{d-1}|`, the rank of `gamma_{d-1}`.
    #[serde(with = "crate::arith::opt_decimal")]
    pub schreier_rank: Option<BigUint>,
    /// `|F/gamma_d|`.
    pub order: Option<FactoredOrder>,
    /// Whether the coset graph of `F/gamma_{d-1}` is available.
    pub materialized: bool,
}

/// Levels `1..=depth` of the series for a fixed rank.
#[derive(Clone, Debug)]
pub struct VerbalSeries {
    rank: usize,
    primes: PrimeSeq,
    cosets_cap: usize,
    levels: Vec<VerbalLevel>,
    /// `graphs[k]` enumerates `F/gamma_k`.
    graphs: Vec<Arc<FiniteQuotient>>,
    bases: Vec<Arc<SchreierBasis>>,
}

impl VerbalSeries {
    pub fn build(primes: &PrimeSeq, rank: usize, depth: usize, caps: &Caps) -> Result<Self> {
        caps.validate()?;
        if rank == 0 {
            return Err(Error::InvalidParameter("rank must be positive".into()));
        }
        if depth > caps.depth {
            return Err(Error::DepthCapReached { cap: caps.depth });
        }
        if depth > primes.len() {
            return Err(Error::InvalidParameter(format!(
                "depth {depth} needs {depth} primes, only {} given",
                primes.len()
            )));
        }
        let trivial = FiniteQuotient::build(&QuotientSpec::trivial(rank), caps)?;
        let mut series = VerbalSeries {
            rank,
            primes: primes.clone(),
            cosets_cap: caps.cosets,
            levels: Vec::new(),
            bases: vec![Arc::new(trivial.schreier_basis())],
            graphs: vec![Arc::new(trivial)],
        };
        let mut prev = FactoredOrder::one();
        for d in 1..=depth {
            let q = primes.prime(d).expect("length checked");
            let schreier_rank = prev.value().map(|o| BigUint::one() + (rank - 1) * o);
            let order = schreier_rank.as_ref().map(|m| prev.times_power(q, m));
            let materialized = series.graphs.len() >= d;
            series.levels.push(VerbalLevel {
                depth: d,
                prime: q,
                parent_order: prev.clone(),
                schreier_rank,
                order: order.clone(),
                materialized,
            });
            let small = order
                .as_ref()
                .and_then(|o| o.to_u64())
                .is_some_and(|o| o <= caps.cosets as u64);
            if d < depth && materialized && small {
                series.materialize(d, caps)?;
            }
            match order {
                Some(o) => prev = o,
                None => break,
            }
        }
        Ok(series)
    }

    fn materialize(&mut self, d: usize, caps: &Caps) -> Result<()> {
        let image = self.image(d)?;
        let spec = self.spec_for(&image)?;
        let graph = FiniteQuotient::enumerate(spec, &image, caps.cosets.min(caps.enumeration).max(1))?;
        let expected = self.levels[d - 1].order.as_ref().and_then(|o| o.to_u64());
        if expected != Some(graph.order() as u64) {
            return Err(Error::InternalCheck(format!(
                "|F/gamma_{d}| enumerates to {} but the formula gives {expected:?}",
                graph.order()
            )));
        }
        self.bases.push(Arc::new(graph.schreier_basis()));
        self.graphs.push(Arc::new(graph));
        Ok(())
    }

    fn spec_for(&self, image: &VerbalImage) -> Result<QuotientSpec> {
        let gen_images = (0..self.rank)
            .map(|i| Ok(image.split_layers(&image.evaluate(&Word::generator(self.rank, i)?))))
            .collect::<Result<Vec<_>>>()?;
        Ok(QuotientSpec::Verbal {
            rank: self.rank,
            params: VerbalParams {
                primes: self.primes.primes()[..image.depth].to_vec(),
                depth: image.depth,
            },
            gen_images,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn primes(&self) -> &PrimeSeq {
        &self.primes
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[VerbalLevel] {
        &self.levels
    }

    pub fn level(&self, d: usize) -> Result<&VerbalLevel> {
        d.checked_sub(1)
            .and_then(|i| self.levels.get(i))
            .ok_or_else(|| Error::InvalidParameter(format!("level {d} was not built (depth {})", self.depth())))
    }

    /// `|F/gamma_d|`; `d = 0` gives 1.
    pub fn order(&self, d: usize) -> Result<FactoredOrder> {
        if d == 0 {
            return Ok(FactoredOrder::one());
        }
        self.level(d)?.order.clone().ok_or(Error::OrderUnrepresentable { depth: d })
    }

    /// The enumerated quotient `F/gamma_k`, when it was materialized.
    pub fn coset_graph(&self, k: usize) -> Option<&FiniteQuotient> {
        self.graphs.get(k).map(|g| g.as_ref())
    }

    fn check_usable(&self, d: usize) -> Result<()> {
        if d > self.depth() {
            return Err(Error::InvalidParameter(format!(
                "level {d} was not built (depth {})",
                self.depth()
            )));
        }
        if d > self.graphs.len() {
            let parent = self.graphs.len();
            return Err(Error::LevelNotMaterialized {
                depth: parent + 1,
                parent,
                parent_order: self
                    .order(parent)
                    .map(|o| o.to_string())
                    .unwrap_or_else(|_| "unrepresentable".into()),
                cap: self.cosets_cap,
            });
        }
        Ok(())
    }

    /// Evaluator for `F -> F/gamma_d` on layered normal forms.
    pub fn image(&self, d: usize) -> Result<VerbalImage> {
        self.check_usable(d)?;
        let widths = self.bases[..d].iter().map(|b| b.len()).collect();
        Ok(VerbalImage {
            rank: self.rank,
            depth: d,
            moduli: self.primes.primes()[..d].to_vec(),
            widths,
            graphs: self.graphs[..d].to_vec(),
            bases: self.bases[..d].to_vec(),
        })
    }

    /// Residue vectors of an encoded element, one per level.
    pub fn split_layers(&self, d: usize, key: &[u64]) -> Vec<Vec<u64>> {
        let widths: Vec<usize> = self.bases[..d].iter().map(|b| b.len()).collect();
        split(d, &widths, key)
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        if w.rank() != self.rank {
            return Err(Error::RankMismatch {
                left: self.rank,
                right: w.rank(),
            });
        }
        Ok(())
    }

    pub fn normal_form(&self, d: usize, w: &Word) -> Result<NormalForm> {
        self.check_word(w)?;
        let image = self.image(d)?;
        Ok(NormalForm {
            depth: d,
            layers: image.split_layers(&image.evaluate(w)),
        })
    }

    /// `w` lies in `gamma_d`.
    pub fn member(&self, d: usize, w: &Word) -> Result<bool> {
        Ok(self.normal_form(d, w)?.is_trivial())
    }

    /// Order of the image of `w` in `F/gamma_d`, found level by level: if
    /// `w^o` lies in `gamma_{k-1}`, its order mod `gamma_k` is 1 or `q_k`.
    pub fn order_mod(&self, d: usize, w: &Word) -> Result<BigUint> {
        self.check_word(w)?;
        let image = self.image(d)?;
        let mut key = image.evaluate(w);
        let mut order = BigUint::one();
        for k in 1..=d {
            if image.layer(&key, k).iter().all(|&x| x == 0) {
                continue;
            }
            let q = image.moduli[k - 1];
            let extra = &order * (q - 1);
            let mut n = BigUint::zero();
            while n < extra {
                key = image.act_word(&key, w);
                n += 1u32;
            }
            order *= q;
            if image.layer(&key, k).iter().any(|&x| x != 0) {
                return Err(Error::InternalCheck(format!(
                    "{w}^{order} is not in gamma_{k}"
                )));
            }
        }
        Ok(order)
    }

    /// Deepest `k <= d` with `w` in `gamma_k`.
    pub fn depth_of(&self, d: usize, w: &Word) -> Result<usize> {
        let nf = self.normal_form(d, w)?;
        Ok(nf.layers.iter().take_while(|v| v.iter().all(|&x| x == 0)).count())
    }
}

fn split(d: usize, widths: &[usize], key: &[u64]) -> Vec<Vec<u64>> {
    let mut offset = d.saturating_sub(1);
    widths
        .iter()
        .map(|&w| {
            let layer = key[offset..offset + w].to_vec();
            offset += w;
            layer
        })
        .collect()
}

/// One residue vector per level; trivial exactly on `gamma_d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalForm {
    pub depth: usize,
    pub layers: Vec<Vec<u64>>,
}

impl NormalForm {
    pub fn is_trivial(&self) -> bool {
        self.layers.iter().all(|v| v.iter().all(|&x| x == 0))
    }
}

/// `F -> F/gamma_d`. An element is encoded as its cosets in `F/gamma_k` for
/// `1 <= k < d`, followed by the residue vectors of levels `1..=d`.
#[derive(Clone, Debug)]
pub struct VerbalImage {
    rank: usize,
    depth: usize,
    moduli: Vec<u64>,
    widths: Vec<usize>,
    graphs: Vec<Arc<FiniteQuotient>>,
    bases: Vec<Arc<SchreierBasis>>,
}

impl VerbalImage {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn split_layers(&self, key: &[u64]) -> Vec<Vec<u64>> {
        split(self.depth, &self.widths, key)
    }

    fn layer<'a>(&self, key: &'a [u64], k: usize) -> &'a [u64] {
        let start = self.depth - 1 + self.widths[..k - 1].iter().sum::<usize>();
        &key[start..start + self.widths[k - 1]]
    }
}

impl ConcreteImage for VerbalImage {
    fn rank(&self) -> usize {
        self.rank
    }

    fn identity(&self) -> Vec<u64> {
        vec![0; self.depth.saturating_sub(1) + self.widths.iter().sum::<usize>()]
    }

    fn act(&self, e: &[u64], letter: Letter) -> Vec<u64> {
        let mut out = e.to_vec();
        let ncosets = self.depth.saturating_sub(1);
        let mut offset = ncosets;
        for k in 0..self.depth {
            // coset in F/gamma_k before the letter is read
            let c = if k == 0 { 0 } else { e[k - 1] as usize };
            let q = self.moduli[k];
            if letter.is_inverse() {
                let d = self.graphs[k].neighbor(c, letter);
                if let Some(s) = self.bases[k].label_of(d, letter.gen()) {
                    let x = &mut out[offset + s];
                    *x = (*x + q - 1) % q;
                }
            } else if let Some(s) = self.bases[k].label_of(c, letter.gen()) {
                let x = &mut out[offset + s];
                *x = (*x + 1) % q;
            }
            offset += self.widths[k];
        }
        for k in 1..self.depth {
            out[k - 1] = self.graphs[k].neighbor(e[k - 1] as usize, letter) as u64;
        }
        out
    }
}

/// Least `D <= depth_cap` such that no word of `set` lies in `gamma_D`.
/// Since the series is descending, the same holds for every deeper level.
pub fn levi_bound(set: &[Word], primes: &PrimeSeq, depth_cap: usize, caps: &Caps) -> Result<usize> {
    let Some(first) = set.first() else {
        return Err(Error::Precondition("the word set is empty".into()));
    };
    let rank = first.rank();
    for w in set {
        if w.is_identity() {
            return Err(Error::Precondition("the word set contains the identity".into()));
        }
        if w.rank() != rank {
            return Err(Error::RankMismatch {
                left: rank,
                right: w.rank(),
            });
        }
    }
    if depth_cap == 0 {
        return Err(Error::DepthCapReached { cap: 0 });
    }
    let depth = depth_cap.min(primes.len()).min(caps.depth);
    if depth == 0 {
        return Err(Error::InvalidParameter("the prime sequence is empty".into()));
    }
    let series = VerbalSeries::build(primes, rank, depth, caps)?;
    for d in 1..=depth {
        let mut hit = false;
        for w in set {
            if series.member(d, w)? {
                hit = true;
                break;
            }
        }
        if !hit {
            return Ok(d);
        }
    }
    if depth < depth_cap && depth == primes.len() {
        return Err(Error::InvalidParameter(format!(
            "the prime sequence has only {} entries",
            primes.len()
        )));
    }
    Err(Error::DepthCapReached { cap: depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::is_square_free;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn w(s: &str) -> Word {
        Word::parse(s, 2).unwrap()
    }

    fn series(primes: &[u64], depth: usize) -> VerbalSeries {
        VerbalSeries::build(&PrimeSeq::new(primes.to_vec()).unwrap(), 2, depth, &Caps::default()).unwrap()
    }

    fn s23() -> &'static VerbalSeries {
        static S: std::sync::OnceLock<VerbalSeries> = std::sync::OnceLock::new();
        S.get_or_init(|| series(&[2, 3], 2))
    }

    #[test]
    fn prime_sequences() {
        assert!(PrimeSeq::new(vec![2, 4]).is_err());
        assert!(!PrimeSeq::new(vec![2, 3, 2]).unwrap().is_distinct());
        let p = PrimeSeq::first(5);
        assert_eq!(p.primes(), [2, 3, 5, 7, 11]);
        assert!(p.is_distinct());
        assert_eq!(p.shift(2).primes(), [5, 7, 11]);
        assert_eq!(p.prime(1), Some(2));
        assert_eq!(p.prime(0), None);
        assert_eq!(p.prefix_product(3), BigUint::from(30u32));
        assert_eq!(PrimeSeq::parse("2, 3,5").unwrap().primes(), [2, 3, 5]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[2,3,5,7,11]");
        assert!(serde_json::from_str::<PrimeSeq>("[2,9]").is_err());
    }

    #[test]
    fn quotient_orders() {
        let s = s23();
        assert_eq!(s.order(1).unwrap().to_u64(), Some(4));
        assert_eq!(s.order(2).unwrap().to_u64(), Some(972));
        assert_eq!(s.order(2).unwrap().to_string(), "2^2 * 3^5");
        assert_eq!(s.level(2).unwrap().schreier_rank, Some(BigUint::from(5u32)));
        let empty = series(&[2, 3], 0);
        assert!(empty.levels().is_empty());
        assert_eq!(empty.order(0).unwrap(), FactoredOrder::one());
        // the third level is far too big to enumerate but its order is exact
        let deep = series(&[2, 3, 5], 3);
        assert_eq!(deep.order(3).unwrap().exponent(5), BigUint::from(973u32));
        assert!(deep.order(3).unwrap().to_u64().is_none());
        let json = serde_json::to_value(deep.order(2).unwrap()).unwrap();
        assert_eq!(json["decimal"], 972);
    }

    #[test]
    fn bfs_agrees_with_formula() {
        let s = s23();
        let q = FiniteQuotient::enumerate(QuotientSpec::trivial(2), &s.image(2).unwrap(), 10_000).unwrap();
        assert_eq!(q.order(), 972);
        assert_eq!(s.coset_graph(1).unwrap().order(), 4);
        let s235 = series(&[3, 2], 2);
        let q = FiniteQuotient::enumerate(QuotientSpec::trivial(2), &s235.image(2).unwrap(), 10_000).unwrap();
        assert_eq!(q.order() as u64, s235.order(2).unwrap().to_u64().unwrap());
        assert_eq!(q.order(), 9 * 2usize.pow(10));
        for primes in [[2u64, 2], [2, 5]] {
            let s = series(&primes, 2);
            let q = FiniteQuotient::enumerate(QuotientSpec::trivial(2), &s.image(2).unwrap(), 100_000).unwrap();
            assert_eq!(q.order() as u64, 4 * primes[1].pow(5));
        }
        let rank3 = VerbalSeries::build(&PrimeSeq::new(vec![2, 2]).unwrap(), 3, 1, &Caps::default()).unwrap();
        assert_eq!(rank3.order(1).unwrap().to_u64(), Some(8));
    }

    #[test]
    fn membership_examples() {
        let s = s23();
        assert!(!s.member(1, &w("a")).unwrap());
        assert!(s.member(1, &w("abAB")).unwrap());
        assert!(s.member(2, &w("1")).unwrap());
        assert!(s.member(1, &w("aa")).unwrap());
        assert!(!s.member(2, &w("aa")).unwrap());
        assert!(s.member(2, &w("a^6")).unwrap());
        // [a,b] is a product of Schreier generators whose mod 3 vector is nonzero
        assert!(!s.member(2, &w("abAB")).unwrap());
        assert_eq!(s.order_mod(2, &w("abAB")).unwrap(), BigUint::from(3u32));
    }

    #[test]
    fn order_examples() {
        let s = s23();
        assert_eq!(s.order_mod(2, &w("a")).unwrap(), BigUint::from(6u32));
        assert_eq!(s.order_mod(2, &w("aa")).unwrap(), BigUint::from(3u32));
        assert_eq!(s.order_mod(2, &w("1")).unwrap(), BigUint::one());
        assert_eq!(s.order_mod(1, &w("ab")).unwrap(), BigUint::from(2u32));
        assert_eq!(s.depth_of(2, &w("aa")).unwrap(), 1);
    }

    #[test]
    fn unmaterialized_level() {
        let caps = Caps {
            cosets: 3,
            ..Caps::default()
        };
        let s = VerbalSeries::build(&PrimeSeq::new(vec![2, 3]).unwrap(), 2, 2, &caps).unwrap();
        assert!(!s.levels()[1].materialized);
        assert!(s.member(1, &w("a")).is_ok());
        match s.member(2, &w("a")) {
            Err(Error::LevelNotMaterialized { depth, parent, cap, .. }) => {
                assert_eq!((depth, parent, cap), (2, 1, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn levi_examples() {
        let caps = Caps::default();
        let p = PrimeSeq::new(vec![2, 3, 5]).unwrap();
        assert_eq!(levi_bound(&[w("a")], &p, 8, &caps).unwrap(), 1);
        assert_eq!(levi_bound(&[w("aa")], &p, 8, &caps).unwrap(), 2);
        assert_eq!(levi_bound(&[w("aa"), w("a")], &p, 8, &caps).unwrap(), 2);
        assert!(matches!(
            levi_bound(&[w("a")], &p, 0, &caps),
            Err(Error::DepthCapReached { cap: 0 })
        ));
        assert!(matches!(
            levi_bound(&[w("a^6")], &p, 2, &caps),
            Err(Error::DepthCapReached { cap: 2 })
        ));
        assert!(levi_bound(&[w("1")], &p, 2, &caps).is_err());
    }

    #[test]
    fn rank_one_is_cyclic() {
        let s = VerbalSeries::build(&PrimeSeq::new(vec![2, 3, 5]).unwrap(), 1, 3, &Caps::default()).unwrap();
        assert_eq!(s.order(3).unwrap().to_u64(), Some(30));
        let a = Word::parse("a", 1).unwrap();
        assert_eq!(s.order_mod(3, &a).unwrap(), BigUint::from(30u32));
        assert!(s.member(3, &a.power(30)).unwrap());
        assert!(!s.member(3, &a.power(15)).unwrap());
    }

    #[test]
    fn nesting_and_square_free_orders_on_samples() {
        let s = s23();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let len = rand::Rng::gen_range(&mut rng, 0..12);
            let u = Word::random(2, len, &mut rng);
            if s.member(2, &u).unwrap() {
                assert!(s.member(1, &u).unwrap());
            }
            let o = s.order_mod(2, &u).unwrap().to_u64().unwrap();
            assert!(is_square_free(o) && 6 % o == 0, "{u} has order {o}");
            // squares lie in gamma_1, so their orders avoid 2
            let sq = u.power(2);
            assert_eq!(s.order_mod(2, &sq).unwrap().to_u64().unwrap() % 2, 1);
        }
    }

    #[test]
    fn normal_form_separates_the_enumerated_quotient() {
        let s = s23();
        let mut seen = HashSet::new();
        for u in crate::word::ShortlexWords::up_to(2, 5) {
            seen.insert(s.normal_form(2, &u).unwrap().layers);
        }
        // words of length <= 5 already reach a large part of the group
        assert!(seen.len() > 100 && seen.len() <= 972);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn normal_form_soundness(u in prop::collection::vec(prop::sample::select(vec![1i32, 2, -1, -2]), 0..14),
                                 v in prop::collection::vec(prop::sample::select(vec![1i32, 2, -1, -2]), 0..14)) {
            let s = s23();
            let u = Word::from_signed(2, &u).unwrap();
            let v = Word::from_signed(2, &v).unwrap();
            let same = s.normal_form(2, &u).unwrap() == s.normal_form(2, &v).unwrap();
            prop_assert_eq!(same, s.member(2, &u.mul(&v.inv()).unwrap()).unwrap());
        }

        #[test]
        fn normal_form_is_multiplicative(u in prop::collection::vec(prop::sample::select(vec![1i32, 2, -1, -2]), 0..10),
                                         v in prop::collection::vec(prop::sample::select(vec![1i32, 2, -1, -2]), 0..10),
                                         x in prop::collection::vec(prop::sample::select(vec![1i32, 2, -1, -2]), 0..10)) {
            // u^7 and u agree mod gamma_2 since every order divides 6
            let s = s23();
            let u = Word::from_signed(2, &u).unwrap();
            let v = Word::from_signed(2, &v).unwrap();
            let x = Word::from_signed(2, &x).unwrap();
            let uv = u.mul(&v).unwrap();
            let image = s.image(2).unwrap();
            let direct = image.evaluate(&uv);
            let stepped = image.act_word(&image.evaluate(&u), &v);
            prop_assert_eq!(direct, stepped);
            let left = x.mul(&u).unwrap();
            let left_equiv = x.mul(&u.mul(&u.power(6)).unwrap()).unwrap();
            prop_assert_eq!(s.normal_form(2, &left).unwrap(), s.normal_form(2, &left_equiv).unwrap());
        }
    }
}
