//! Desk-scale driver for building a periodic quotient `G = F/U K_i` one
//! relator at a time, and sampled checks of the order properties of
//! `F/gamma_d` for a sequence of distinct primes.
//!
//! Each step takes the next word `f` in shortlex order, sets
//! `g = f^{p_1 .. p_{r_i}}`, picks a deeper level `r_{i+1}`, and imposes
//! `g^n` where `n` is the exact order of `g` modulo `gamma_{r_{i+1}}`. All
//! series computations happen in `F`, on free preimages. The claim that
//! `gamma_{r_{i+1}}(G_{i+1})` still maps onto a free group is not checked;
//! every step records it as an assumption.

use std::collections::{HashSet, VecDeque};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::is_square_free;
use crate::config::Caps;
use crate::error::{Error, Result};
use crate::finquot::FiniteQuotient;
use crate::group::QuotientSpec;
use crate::verbal::{levi_bound, FactoredOrder, PrimeSeq, VerbalSeries};
use crate::word::{ShortlexWords, Word};

/// Identifier of the unchecked surjection claim carried by every step.
pub const SURJECTION_CLAIM: &str = "lemma-variant";
/// Identifier of the cyclic-quotient claim the surjection rests on.
pub const CYCLIC_QUOTIENT_CLAIM: &str = "remark-rem";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumption {
    pub step: usize,
    pub claim: String,
    pub cites: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImposedRelator {
    /// The enumerated word `f_{i+1}`.
    pub base: Word,
    /// `p_1 .. p_{r_i} * n`.
    pub exponent: u64,
}

impl ImposedRelator {
    pub fn word(&self) -> Word {
        self.base.power(self.exponent as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub f: Word,
    pub g: Word,
    /// Depth `d` of the shifted series with `g` outside `gamma_d`.
    pub levi_depth: usize,
    pub from_depth: usize,
    pub to_depth: usize,
    pub n: u64,
    pub relator: ImposedRelator,
    /// `|G_i/gamma_r(G_i)|` for `r = r_i ..= r_{i+1}`.
    pub order_chain: Vec<FactoredOrder>,
    pub membership_checked: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionState {
    pub step: usize,
    pub rank: usize,
    pub pi: PrimeSeq,
    pub relators: Vec<ImposedRelator>,
    pub depth: usize,
    /// `|G_i/gamma_{r_i}(G_i)|` for every state so far.
    pub history: Vec<FactoredOrder>,
    pub assumptions: Vec<Assumption>,
    pub reduction: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub last_step: Option<StepRecord>,
}

impl ConstructionState {
    pub fn initial(pi: PrimeSeq, rank: usize) -> Result<Self> {
        if rank < 2 {
            return Err(Error::InvalidParameter("the construction needs rank at least 2".into()));
        }
        if !pi.is_distinct() {
            return Err(Error::Precondition("the primes must be pairwise distinct".into()));
        }
        Ok(ConstructionState {
            step: 0,
            rank,
            pi,
            relators: Vec::new(),
            depth: 0,
            history: vec![FactoredOrder::one()],
            assumptions: Vec::new(),
            reduction: "free-preimage".into(),
            last_step: None,
        })
    }
}

/// `|F / gamma_r(F) K|` where `K` is the normal closure of `relators`.
fn quotient_order(series: &VerbalSeries, r: usize, relators: &[Word], caps: &Caps) -> Result<FactoredOrder> {
    let full = series.order(r)?;
    let mut outside = Vec::new();
    for rel in relators {
        if !series.member(r, rel)? {
            outside.push(rel.clone());
        }
    }
    if outside.is_empty() {
        return Ok(full);
    }
    let image = series.image(r)?;
    let quotient = FiniteQuotient::enumerate(QuotientSpec::trivial(series.rank()), &image, caps.enumeration)?;
    let closure = normal_closure_size(&quotient, &outside);
    let index = (quotient.order() / closure) as u64;
    let mut out = FactoredOrder::one();
    let mut rest = index;
    for &p in series.primes().primes() {
        let mut e = 0u32;
        while rest.is_multiple_of(p) {
            rest /= p;
            e += 1;
        }
        out = out.times_power(p, &BigUint::from(e));
    }
    if rest != 1 {
        return Err(Error::InternalCheck(format!("index {index} is not a product of the series primes")));
    }
    Ok(out)
}

/// Size of the normal closure of the images of `words` in an enumerated
/// quotient: breadth-first closure under multiplication by conjugates.
pub fn normal_closure_size(quotient: &FiniteQuotient, words: &[Word]) -> usize {
    let n = quotient.order();
    let mut seeds = HashSet::new();
    for w in words {
        let c = quotient.coset_of(w).expect("ranks agree");
        let wt = quotient.transversal(c);
        for x in 0..n {
            let t = quotient.transversal(x);
            let conj = wt.conjugate(&t).expect("ranks agree");
            seeds.insert(quotient.coset_of(&conj).expect("ranks agree"));
        }
    }
    seeds.remove(&0);
    let seed_words: Vec<Word> = seeds.iter().map(|&s| quotient.transversal(s)).collect();
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    let mut count = 1;
    while let Some(c) = queue.pop_front() {
        for s in &seed_words {
            let d = quotient.trace(c, s);
            if !seen[d] {
                seen[d] = true;
                count += 1;
                queue.push_back(d);
            }
        }
    }
    count
}

/// One step of the construction for the given next word.
pub fn next_step(state: &ConstructionState, f: &Word, caps: &Caps) -> Result<ConstructionState> {
    if f.is_identity() {
        return Err(Error::Precondition("the next word must be nontrivial".into()));
    }
    if f.rank() != state.rank {
        return Err(Error::RankMismatch {
            left: state.rank,
            right: f.rank(),
        });
    }
    let r = state.depth;
    let pi = &state.pi;
    let prefix = pi
        .prefix_product(r)
        .to_u64()
        .ok_or_else(|| Error::InvalidParameter("prime product overflows".into()))?;
    if f.len() as u128 * prefix as u128 > caps.word_length as u128 {
        return Err(Error::InvalidParameter(format!("{f}^{prefix} exceeds the word length cap")));
    }
    let g = f.power(prefix as i64);
    // the shifted series (p_{r+1}, p_{r+2}, ...) must separate g from 1
    let shifted = pi.shift(r);
    let levi_depth = levi_bound(std::slice::from_ref(&g), &shifted, caps.depth, caps)?;
    // one more level for the cyclic quotient whose existence is assumed
    let to = r + levi_depth + 1;
    if to > pi.len() {
        return Err(Error::InvalidParameter(format!(
            "depth {to} needs {to} primes, only {} given",
            pi.len()
        )));
    }
    if to > caps.depth {
        return Err(Error::DepthCapReached { cap: caps.depth });
    }
    let series = VerbalSeries::build(pi, state.rank, to, caps)?;
    let n = series
        .order_mod(to, &g)?
        .to_u64()
        .ok_or_else(|| Error::InvalidParameter("relator exponent overflows".into()))?;
    let exponent = prefix
        .checked_mul(n)
        .ok_or_else(|| Error::InvalidParameter("relator exponent overflows".into()))?;
    let relator = ImposedRelator {
        base: f.clone(),
        exponent,
    };
    if f.len() as u128 * exponent as u128 > caps.word_length as u128 {
        return Err(Error::InvalidParameter(format!("{f}^{exponent} exceeds the word length cap")));
    }
    let membership_checked = series.member(to, &relator.word())?;
    if !membership_checked {
        return Err(Error::InternalCheck(format!("{g}^{n} is not in gamma_{to}")));
    }
    let bad_exponent = !is_square_free(exponent)
        || pi.primes()[..to].iter().fold(exponent, |e, &p| if e % p == 0 { e / p } else { e }) != 1;
    if bad_exponent {
        return Err(Error::InternalCheck(format!(
            "exponent {exponent} is not a product of distinct primes from the sequence"
        )));
    }
    let old: Vec<Word> = state.relators.iter().map(|x| x.word()).collect();
    let mut chain = Vec::new();
    for d in r..=to {
        chain.push(quotient_order(&series, d, &old, caps)?);
    }
    let grown = &chain[chain.len() - 1];
    let before = &chain[0];
    if !greater(grown, before) {
        return Err(Error::InternalCheck(format!("order did not grow: {before} -> {grown}")));
    }
    // G_{i+1}/gamma_{to}(G_{i+1}) equals G_i/gamma_{to}(G_i) because the new relator lies in gamma_{to}
    let mut relators = state.relators.clone();
    relators.push(relator.clone());
    let mut history = state.history.clone();
    if let Some(last) = history.last_mut() {
        *last = before.clone();
    }
    history.push(grown.clone());
    let mut assumptions = state.assumptions.clone();
    assumptions.push(Assumption {
        step: state.step,
        claim: format!("gamma_{to}(G_{}) maps onto a non-abelian free group", state.step + 1),
        cites: vec![SURJECTION_CLAIM.into(), CYCLIC_QUOTIENT_CLAIM.into()],
    });
    if to > 2 {
        assumptions.push(Assumption {
            step: state.step,
            claim: format!("levels up to {to} of G_{} agree with the images of the free levels", state.step + 1),
            cites: vec!["free-preimage".into()],
        });
    }
    Ok(ConstructionState {
        step: state.step + 1,
        rank: state.rank,
        pi: pi.clone(),
        relators,
        depth: to,
        history,
        assumptions,
        reduction: state.reduction.clone(),
        last_step: Some(StepRecord {
            f: f.clone(),
            g,
            levi_depth,
            from_depth: r,
            to_depth: to,
            n,
            relator,
            order_chain: chain,
            membership_checked,
        }),
    })
}

fn greater(a: &FactoredOrder, b: &FactoredOrder) -> bool {
    match (a.value(), b.value()) {
        (Some(x), Some(y)) => x > y,
        _ => false,
    }
}

/// States after each completed step, and why the run stopped early if it did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub states: Vec<ConstructionState>,
    pub halted: Option<String>,
}

impl Trace {
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.states {
            out.push_str(&serde_json::to_string(s).expect("state serializes"));
            out.push('\n');
        }
        if let Some(reason) = &self.halted {
            out.push_str(&serde_json::json!({ "halted": reason }).to_string());
            out.push('\n');
        }
        out
    }
}

/// Runs `steps` steps on the words of `F_rank` in shortlex order. Cap
/// breaches stop the run; the states reached so far are kept.
pub fn run_construction(pi: &PrimeSeq, rank: usize, steps: usize, caps: &Caps) -> Result<Trace> {
    if steps == 0 {
        return Err(Error::Precondition("at least one step is required".into()));
    }
    let mut state = ConstructionState::initial(pi.clone(), rank)?;
    let mut states = Vec::new();
    for f in ShortlexWords::new(rank).take(steps) {
        match next_step(&state, &f, caps) {
            Ok(next) => {
                states.push(next.clone());
                state = next;
            }
            Err(e @ Error::InternalCheck(_)) => return Err(e),
            Err(e) => {
                return Ok(Trace {
                    states,
                    halted: Some(format!("step {}: {e}", state.step)),
                })
            }
        }
    }
    Ok(Trace { states, halted: None })
}

/// Replays a trace from its own parameters and compares every state.
pub fn replay(trace: &Trace, caps: &Caps) -> Result<bool> {
    let Some(first) = trace.states.first() else {
        return Ok(trace.halted.is_some());
    };
    let steps = trace.states.len() + usize::from(trace.halted.is_some());
    let again = run_construction(&first.pi, first.rank, steps, caps)?;
    Ok(&again == trace)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub word: Word,
    pub order: u64,
    /// Largest `i <= d` with the word in `gamma_i`.
    pub level: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub primes: PrimeSeq,
    pub depth: usize,
    /// Length of the abelian series `gamma_0 > .. > gamma_d` of the quotient.
    pub solvable_series_length: usize,
    pub samples: Vec<SampleRecord>,
    pub violations: Vec<String>,
}

/// For each sample: its order in `F/gamma_d` is square-free and divides
/// `q_1 .. q_d`, and if it lies in `gamma_i` no `q_j` with `j <= i` divides
/// its order.
pub fn check_pigraded_properties(series: &VerbalSeries, d: usize, samples: &[Word]) -> Result<PropertyReport> {
    let pi = series.primes();
    if !pi.is_distinct() {
        return Err(Error::Precondition("the primes must be pairwise distinct".into()));
    }
    let top = pi
        .prefix_product(d)
        .to_u64()
        .ok_or_else(|| Error::InvalidParameter("prime product overflows".into()))?;
    let mut records = Vec::with_capacity(samples.len());
    let mut violations = Vec::new();
    for w in samples {
        let order = series
            .order_mod(d, w)?
            .to_u64()
            .ok_or_else(|| Error::InvalidParameter("order overflows".into()))?;
        let level = series.depth_of(d, w)?;
        let mut problems = Vec::new();
        if !is_square_free(order) {
            problems.push(format!("{w}: order {order} is not square-free"));
        }
        if top % order != 0 {
            problems.push(format!("{w}: order {order} does not divide {top}"));
        }
        for &p in &pi.primes()[..level.min(d)] {
            if order % p == 0 {
                problems.push(format!("{w}: lies in gamma_{level} but its order {order} is divisible by {p}"));
            }
        }
        records.push(SampleRecord {
            word: w.clone(),
            order,
            level,
            ok: problems.is_empty(),
        });
        violations.extend(problems);
    }
    Ok(PropertyReport {
        primes: pi.clone(),
        depth: d,
        solvable_series_length: d,
        samples: records,
        violations,
    })
}

/// `count` random reduced words of length below `max_len`, each followed
/// by its `q_1`-th power so that `gamma_1` is always represented.
pub fn sample_words(rank: usize, count: usize, max_len: usize, q1: u64, seed: u64) -> Vec<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let len = rng.gen_range(0..max_len.max(1));
        let w = Word::random(rank, len, &mut rng);
        out.push(w.clone());
        if out.len() < count {
            out.push(w.power(q1 as i64));
        }
    }
    out
}

/// `|G/gamma_r(G)|` for `G = F/<<relators>>`, when computable.
pub fn presented_quotient_order(
    pi: &PrimeSeq,
    rank: usize,
    r: usize,
    relators: &[Word],
    caps: &Caps,
) -> Result<FactoredOrder> {
    let series = VerbalSeries::build(pi, rank, r, caps)?;
    quotient_order(&series, r, relators, caps)
}
