//! Integer helpers: primality, factoring of moderate integers, and the
//! factored notation used when printing large group orders.

use std::collections::BTreeMap;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    is_prime(&BigUint::from(n))
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    (2..=n).filter(|&k| is_prime_u64(k)).collect()
}

/// Miller–Rabin with the first twelve primes as bases, which is exact below
/// 3.3 * 10^24 and a strong probable-prime test above.
pub fn is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    let bases = [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &bases {
        let b = BigUint::from(b);
        if n == &b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let n1 = n - 1u32;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    'outer: for &b in &bases {
        let mut x = BigUint::from(b).modpow(&d, n);
        if x.is_one() || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Brent's variant of Pollard's rho. Returns a nontrivial factor of the
/// composite `n`, or `None` when the iteration budget runs out.
fn pollard_rho(n: &BigUint, budget: u64) -> Option<BigUint> {
    if n.is_even() {
        return Some(BigUint::from(2u32));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut spent = 0u64;
    while spent < budget {
        let c = rng.gen_biguint_below(n);
        let mut y = rng.gen_biguint_below(n);
        let f = |v: &BigUint| (v * v + &c) % n;
        let (mut r, m) = (1u64, 128u64);
        let mut q = BigUint::one();
        let mut g = BigUint::one();
        let mut x = y.clone();
        let mut ys = y.clone();
        while g.is_one() && spent < budget {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            while k < r && g.is_one() {
                ys = y.clone();
                for _ in 0..m.min(r - k) {
                    y = f(&y);
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = q * diff % n;
                }
                g = q.gcd(n);
                k += m;
                spent += m;
            }
            r *= 2;
        }
        if &g == n {
            loop {
                ys = f(&ys);
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
                if !g.is_one() {
                    break;
                }
            }
        }
        if !g.is_one() && &g != n {
            return Some(g);
        }
    }
    None
}

/// Prime factorization as a map prime -> exponent. Gives up (returning
/// `None`) only if Pollard rho exhausts its budget on a composite cofactor.
pub fn factorize(n: &BigUint) -> Option<BTreeMap<BigUint, u32>> {
    let mut out = BTreeMap::new();
    if n.is_zero() {
        return None;
    }
    let mut rest = n.clone();
    let mut p = 2u64;
    while p < 10_000 {
        let bp = BigUint::from(p);
        if &bp * &bp > rest {
            break;
        }
        while (&rest % &bp).is_zero() {
            rest /= &bp;
            *out.entry(bp.clone()).or_insert(0) += 1;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    let mut stack = vec![rest];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if is_prime(&m) {
            *out.entry(m).or_insert(0) += 1;
            continue;
        }
        let f = pollard_rho(&m, 5_000_000)?;
        let g = &m / &f;
        stack.push(f);
        stack.push(g);
    }
    Some(out)
}

/// Some prime factor of `n > 1`, spending at most `budget` rho iterations
/// per split. `None` when a composite part resists.
pub fn find_prime_factor(n: &BigUint, budget: u64) -> Option<BigUint> {
    let mut m = n.clone();
    let mut p = 2u64;
    while p < 10_000 {
        let bp = BigUint::from(p);
        if &bp * &bp > m {
            break;
        }
        if (&m % &bp).is_zero() {
            return Some(bp);
        }
        p += if p == 2 { 1 } else { 2 };
    }
    loop {
        if m.is_one() {
            return None;
        }
        if is_prime(&m) {
            return Some(m);
        }
        let d = pollard_rho(&m, budget)?;
        let e = &m / &d;
        m = d.min(e);
    }
}

/// `p1^e1 * p2^e2 * ...` with primes ascending; `1` for the empty product.
pub fn format_factored(factors: &BTreeMap<BigUint, u32>) -> String {
    if factors.is_empty() {
        return "1".to_string();
    }
    factors
        .iter()
        .map(|(p, e)| format!("{p}^{e}"))
        .collect::<Vec<_>>()
        .join(" * ")
}

pub fn is_square_free(n: u64) -> bool {
    if n == 0 {
        return false;
    }
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            m /= p;
            if m.is_multiple_of(p) {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// An arbitrary-precision count printed both in factored form and, when it
/// fits in 64 bits, in decimal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoredInt {
    pub factored: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decimal: Option<u64>,
}

impl FactoredInt {
    /// Built from a known factorization, so no factoring is attempted.
    pub fn from_factors(factors: &BTreeMap<BigUint, u32>) -> Self {
        let mut value = BigUint::one();
        for (p, e) in factors {
            value *= p.pow(*e);
        }
        FactoredInt {
            factored: format_factored(factors),
            decimal: value.to_u64(),
        }
    }

    pub fn from_value(n: &BigUint) -> Self {
        match factorize(n) {
            Some(f) => FactoredInt::from_factors(&f),
            None => FactoredInt {
                factored: n.to_string(),
                decimal: n.to_u64(),
            },
        }
    }
}

/// Serde adapter writing an optional big integer as a decimal string.
pub mod opt_decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => s.serialize_some(&n.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| t.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}
