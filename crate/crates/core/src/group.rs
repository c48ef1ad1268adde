//! Concretely represented finite images of a free group.
//!
//! Every image is driven by right multiplication with a generator or its
//! inverse, and every element has a canonical packed encoding (a `Vec<u64>`)
//! so that enumeration order and hashing are identical across runs.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{Error, Result};
use crate::magnus::{Domain, MagnusUnitImage, TruncSeries};
use crate::verbal::{PrimeSeq, VerbalSeries};
use crate::word::{Letter, Word};

/// A homomorphism from `F_r` onto a concretely represented group.
pub trait ConcreteImage: Send + Sync {
    fn rank(&self) -> usize;

    /// Encoded identity element.
    fn identity(&self) -> Vec<u64>;

    /// `e * phi(letter)`.
    fn act(&self, e: &[u64], letter: Letter) -> Vec<u64>;

    fn act_word(&self, e: &[u64], w: &Word) -> Vec<u64> {
        let mut cur = e.to_vec();
        for &l in w.letters() {
            cur = self.act(&cur, l);
        }
        cur
    }

    fn evaluate(&self, w: &Word) -> Vec<u64> {
        self.act_word(&self.identity(), w)
    }
}

/// Fixed-width bit packing of small residues.
#[derive(Clone, Copy, Debug)]
pub struct Packer {
    bits: u32,
    len: usize,
}

impl Packer {
    /// Packs `len` values, each strictly below `bound`.
    pub fn new(bound: u64, len: usize) -> Self {
        let bits = (64 - bound.saturating_sub(1).leading_zeros()).max(1);
        Packer { bits, len }
    }

    fn per_word(&self) -> usize {
        (64 / self.bits) as usize
    }

    pub fn words(&self) -> usize {
        self.len.div_ceil(self.per_word()).max(1)
    }

    pub fn pack(&self, values: &[u64]) -> Vec<u64> {
        debug_assert_eq!(values.len(), self.len);
        let per = self.per_word();
        let mut out = vec![0u64; self.words()];
        for (i, &v) in values.iter().enumerate() {
            out[i / per] |= v << ((i % per) as u32 * self.bits);
        }
        out
    }

    pub fn unpack(&self, packed: &[u64]) -> Vec<u64> {
        let per = self.per_word();
        let mask = if self.bits == 64 { u64::MAX } else { (1u64 << self.bits) - 1 };
        (0..self.len)
            .map(|i| (packed[i / per] >> ((i % per) as u32 * self.bits)) & mask)
            .collect()
    }
}

/// A product of cyclic groups `Z/m_1 x ... x Z/m_k`.
pub struct AbelianImage {
    rank: usize,
    moduli: Vec<u64>,
    images: Vec<Vec<u64>>,
    packer: Packer,
}

impl AbelianImage {
    pub fn new(rank: usize, moduli: Vec<u64>, images: Vec<Vec<u64>>) -> Result<Self> {
        if images.len() != rank {
            return Err(Error::InvalidParameter(format!(
                "expected {rank} generator images, got {}",
                images.len()
            )));
        }
        if moduli.iter().any(|&m| m < 2) {
            return Err(Error::InvalidParameter("abelian moduli must be at least 2".into()));
        }
        for img in &images {
            if img.len() != moduli.len() || img.iter().zip(&moduli).any(|(v, m)| v >= m) {
                return Err(Error::InvalidParameter(format!(
                    "image {img:?} does not lie in Z/{moduli:?}"
                )));
            }
        }
        let bound = moduli.iter().copied().max().unwrap_or(2);
        let packer = Packer::new(bound, moduli.len());
        Ok(AbelianImage {
            rank,
            moduli,
            images,
            packer,
        })
    }
}

impl ConcreteImage for AbelianImage {
    fn rank(&self) -> usize {
        self.rank
    }

    fn identity(&self) -> Vec<u64> {
        self.packer.pack(&vec![0; self.moduli.len()])
    }

    fn act(&self, e: &[u64], letter: Letter) -> Vec<u64> {
        let mut v = self.packer.unpack(e);
        let img = &self.images[letter.gen()];
        for ((x, &g), &m) in v.iter_mut().zip(img).zip(&self.moduli) {
            *x = if letter.is_inverse() { (*x + m - g) % m } else { (*x + g) % m };
        }
        self.packer.pack(&v)
    }
}

/// Permutations of `{0, .., degree-1}` composed left to right.
pub struct PermutationImage {
    rank: usize,
    degree: usize,
    images: Vec<Vec<usize>>,
    inverses: Vec<Vec<usize>>,
    packer: Packer,
}

impl PermutationImage {
    pub fn new(rank: usize, degree: usize, images: Vec<Vec<usize>>) -> Result<Self> {
        if images.len() != rank {
            return Err(Error::InvalidParameter(format!(
                "expected {rank} generator images, got {}",
                images.len()
            )));
        }
        let mut inverses = Vec::with_capacity(rank);
        for img in &images {
            let mut inv = vec![usize::MAX; degree];
            if img.len() != degree {
                return Err(Error::InvalidParameter(format!("{img:?} is not a permutation of degree {degree}")));
            }
            for (i, &j) in img.iter().enumerate() {
                if j >= degree || inv[j] != usize::MAX {
                    return Err(Error::InvalidParameter(format!("{img:?} is not a permutation")));
                }
                inv[j] = i;
            }
            inverses.push(inv);
        }
        Ok(PermutationImage {
            rank,
            degree,
            images,
            inverses,
            packer: Packer::new(degree.max(2) as u64, degree),
        })
    }
}

impl ConcreteImage for PermutationImage {
    fn rank(&self) -> usize {
        self.rank
    }

    fn identity(&self) -> Vec<u64> {
        self.packer.pack(&(0..self.degree as u64).collect::<Vec<_>>())
    }

    fn act(&self, e: &[u64], letter: Letter) -> Vec<u64> {
        let perm = if letter.is_inverse() {
            &self.inverses[letter.gen()]
        } else {
            &self.images[letter.gen()]
        };
        let v: Vec<u64> = self
            .packer
            .unpack(e)
            .into_iter()
            .map(|x| perm[x as usize] as u64)
            .collect();
        self.packer.pack(&v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianParams {
    pub moduli: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagnusParams {
    /// The modulus as a decimal string, since it may exceed 64 bits.
    pub p: String,
    pub l: usize,
    /// Set when `p` is a modulus not known to be prime.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub composite: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationParams {
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbalParams {
    pub primes: Vec<u64>,
    pub depth: usize,
}

/// Serializable description of a map `F_r -> Q`: kind tag, parameters and
/// generator images. It can be evaluated lazily (kernel membership, image
/// orders) or enumerated into a [`crate::finquot::FiniteQuotient`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuotientSpec {
    Abelian {
        rank: usize,
        params: AbelianParams,
        gen_images: Vec<Vec<u64>>,
    },
    MagnusUnits {
        rank: usize,
        params: MagnusParams,
        gen_images: Vec<String>,
    },
    Permutation {
        rank: usize,
        params: PermutationParams,
        gen_images: Vec<Vec<usize>>,
    },
    /// `F/gamma_depth` for the given prime sequence. Generator images are the
    /// layered normal forms of the generators.
    Verbal {
        rank: usize,
        params: VerbalParams,
        gen_images: Vec<Vec<Vec<u64>>>,
    },
}

impl QuotientSpec {
    /// The trivial quotient, of order 1.
    pub fn trivial(rank: usize) -> Self {
        QuotientSpec::Abelian {
            rank,
            params: AbelianParams { moduli: Vec::new() },
            gen_images: vec![Vec::new(); rank],
        }
    }

    pub fn abelian(rank: usize, moduli: Vec<u64>, gen_images: Vec<Vec<u64>>) -> Result<Self> {
        AbelianImage::new(rank, moduli.clone(), gen_images.clone())?;
        Ok(QuotientSpec::Abelian {
            rank,
            params: AbelianParams { moduli },
            gen_images,
        })
    }

    /// `F -> (Z/m)^r`, the mod-`m` abelianization.
    pub fn mod_abelianization(rank: usize, m: u64) -> Result<Self> {
        let images = (0..rank)
            .map(|i| (0..rank).map(|k| u64::from(k == i)).collect())
            .collect();
        QuotientSpec::abelian(rank, vec![m; rank], images)
    }

    pub fn permutation(rank: usize, degree: usize, gen_images: Vec<Vec<usize>>) -> Result<Self> {
        PermutationImage::new(rank, degree, gen_images.clone())?;
        Ok(QuotientSpec::Permutation {
            rank,
            params: PermutationParams { degree },
            gen_images,
        })
    }

    /// The Magnus map `a_i -> 1 + x_i` into the units of `A(F_p, r)/X^l`.
    pub fn magnus_units(rank: usize, p: &BigUint, l: usize) -> Result<Self> {
        QuotientSpec::magnus_units_over(rank, Domain::Prime(p.clone()), l)
    }

    /// The same map with coefficients in any finite ring `Z/n`.
    pub fn magnus_units_over(rank: usize, domain: Domain, l: usize) -> Result<Self> {
        let images = (0..rank)
            .map(|i| TruncSeries::variable_unit(rank, l, domain.clone(), i))
            .collect::<Result<Vec<_>>>()?;
        QuotientSpec::magnus_units_with_images(&images)
    }

    /// Magnus-type map with arbitrary unit images of the generators.
    pub fn magnus_units_with_images(images: &[TruncSeries]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidParameter("no generator images".into()))?;
        let p = first
            .domain()
            .modulus()
            .ok_or_else(|| Error::InvalidParameter("finite Magnus quotients need a finite coefficient ring".into()))?
            .clone();
        let composite = matches!(first.domain(), Domain::Residues(_));
        for s in images {
            if s.rank() != first.rank() || s.degree_bound() != first.degree_bound() || s.domain() != first.domain() {
                return Err(Error::SeriesMismatch("generator images live in different algebras".into()));
            }
            if !s.is_unit() {
                return Err(Error::NotUnit(s.constant_term().to_string()));
            }
        }
        Ok(QuotientSpec::MagnusUnits {
            rank: images.len(),
            params: MagnusParams {
                p: p.to_string(),
                l: first.degree_bound(),
                composite,
            },
            gen_images: images.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn verbal(rank: usize, primes: &[u64], depth: usize, caps: &Caps) -> Result<Self> {
        let series = VerbalSeries::build(&PrimeSeq::new(primes.to_vec())?, rank, depth, caps)?;
        let image = series.image(depth)?;
        let gen_images = (0..rank)
            .map(|i| Ok(series.split_layers(depth, &image.evaluate(&Word::generator(rank, i)?))))
            .collect::<Result<Vec<_>>>()?;
        Ok(QuotientSpec::Verbal {
            rank,
            params: VerbalParams {
                primes: primes[..depth].to_vec(),
                depth,
            },
            gen_images,
        })
    }

    pub fn rank(&self) -> usize {
        match self {
            QuotientSpec::Abelian { rank, .. }
            | QuotientSpec::MagnusUnits { rank, .. }
            | QuotientSpec::Permutation { rank, .. }
            | QuotientSpec::Verbal { rank, .. } => *rank,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            QuotientSpec::Abelian { .. } => "abelian",
            QuotientSpec::MagnusUnits { .. } => "magnus-units",
            QuotientSpec::Permutation { .. } => "permutation",
            QuotientSpec::Verbal { .. } => "verbal",
        }
    }

    fn magnus_images(&self) -> Result<Option<Vec<TruncSeries>>> {
        let QuotientSpec::MagnusUnits { rank, params, gen_images } = self else {
            return Ok(None);
        };
        let p: BigUint = params
            .p
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad prime {:?}", params.p)))?;
        let domain = if params.composite {
            Domain::Residues(p)
        } else {
            Domain::Prime(p)
        };
        let images = gen_images
            .iter()
            .map(|t| TruncSeries::parse(t, *rank, params.l, domain.clone()))
            .collect::<Result<Vec<_>>>()?;
        if images.len() != *rank {
            return Err(Error::InvalidParameter("wrong number of generator images".into()));
        }
        Ok(Some(images))
    }

    /// Builds the evaluator. Magnus quotients need a prime below `2^32`
    /// here; larger primes are only evaluated lazily.
    pub fn realize(&self, caps: &Caps) -> Result<Box<dyn ConcreteImage>> {
        match self {
            QuotientSpec::Abelian {
                rank,
                params,
                gen_images,
            } => Ok(Box::new(AbelianImage::new(
                *rank,
                params.moduli.clone(),
                gen_images.clone(),
            )?)),
            QuotientSpec::Permutation {
                rank,
                params,
                gen_images,
            } => Ok(Box::new(PermutationImage::new(
                *rank,
                params.degree,
                gen_images.clone(),
            )?)),
            QuotientSpec::MagnusUnits { .. } => {
                let images = self.magnus_images()?.expect("magnus kind");
                Ok(Box::new(MagnusUnitImage::new(&images)?))
            }
            QuotientSpec::Verbal {
                rank,
                params,
                gen_images,
            } => {
                let series = VerbalSeries::build(&PrimeSeq::new(params.primes.clone())?, *rank, params.depth, caps)?;
                let image = series.image(params.depth)?;
                for (i, expected) in gen_images.iter().enumerate() {
                    let got = series.split_layers(params.depth, &image.evaluate(&Word::generator(*rank, i)?));
                    if &got != expected {
                        return Err(Error::InvalidParameter(format!(
                            "generator {} image {expected:?} differs from the layered normal form {got:?}",
                            i + 1
                        )));
                    }
                }
                Ok(Box::new(image))
            }
        }
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        if w.rank() != self.rank() {
            return Err(Error::RankMismatch {
                left: self.rank(),
                right: w.rank(),
            });
        }
        Ok(())
    }

    fn magnus_eval(images: &[TruncSeries], w: &Word, caps: &Caps) -> Result<TruncSeries> {
        let first = &images[0];
        let mut acc = TruncSeries::one(first.rank(), first.degree_bound(), first.domain().clone())?;
        let mut inverses: Vec<Option<TruncSeries>> = vec![None; images.len()];
        for &l in w.letters() {
            let factor = if l.is_inverse() {
                if inverses[l.gen()].is_none() {
                    inverses[l.gen()] = Some(images[l.gen()].inv()?);
                }
                inverses[l.gen()].as_ref().expect("just set")
            } else {
                &images[l.gen()]
            };
            acc = acc.mul_capped(factor, caps.terms)?;
        }
        Ok(acc)
    }

    /// `phi(w) = 1`, evaluated without enumerating the quotient.
    pub fn kernel_contains(&self, w: &Word, caps: &Caps) -> Result<bool> {
        self.check_word(w)?;
        if let Some(images) = self.magnus_images()? {
            return Ok(QuotientSpec::magnus_eval(&images, w, caps)?.is_one());
        }
        let image = self.realize(caps)?;
        Ok(image.evaluate(w) == image.identity())
    }

    /// Order of `phi(w)`, evaluated without enumerating the quotient.
    pub fn image_order(&self, w: &Word, caps: &Caps) -> Result<BigUint> {
        self.check_word(w)?;
        match self {
            QuotientSpec::MagnusUnits { .. } => {
                let images = self.magnus_images()?.expect("magnus kind");
                QuotientSpec::magnus_eval(&images, w, caps)?.unit_order()
            }
            QuotientSpec::Abelian { params, gen_images, .. } => {
                let mut v = vec![0i128; params.moduli.len()];
                for &l in w.letters() {
                    let sign = if l.is_inverse() { -1 } else { 1 };
                    for (x, &g) in v.iter_mut().zip(&gen_images[l.gen()]) {
                        *x += sign * g as i128;
                    }
                }
                let mut order = BigUint::one();
                for (x, &m) in v.iter().zip(&params.moduli) {
                    let r = x.rem_euclid(m as i128) as u64;
                    let o = m / r.gcd(&m);
                    order = order.lcm(&BigUint::from(o));
                }
                Ok(order)
            }
            QuotientSpec::Permutation { params, gen_images, .. } => {
                let image = PermutationImage::new(w.rank(), params.degree, gen_images.clone())?;
                let perm: Vec<usize> = image
                    .packer
                    .unpack(&image.evaluate(w))
                    .into_iter()
                    .map(|x| x as usize)
                    .collect();
                let mut seen = vec![false; perm.len()];
                let mut order = BigUint::one();
                for start in 0..perm.len() {
                    if seen[start] {
                        continue;
                    }
                    let mut len = 0u64;
                    let mut x = start;
                    while !seen[x] {
                        seen[x] = true;
                        x = perm[x];
                        len += 1;
                    }
                    order = order.lcm(&BigUint::from(len));
                }
                Ok(order)
            }
            QuotientSpec::Verbal { .. } => {
                let image = self.realize(caps)?;
                let id = image.identity();
                let mut cur = image.evaluate(w);
                let mut n = 1usize;
                while cur != id {
                    cur = image.act_word(&cur, w);
                    n += 1;
                    if n > caps.enumeration {
                        return Err(Error::EnumerationCapExceeded {
                            cap: caps.enumeration,
                            reached: n,
                        });
                    }
                }
                Ok(BigUint::from(n))
            }
        }
    }

    /// `phi(w)^q = 1`.
    pub fn power_in_kernel(&self, w: &Word, q: &BigUint, caps: &Caps) -> Result<bool> {
        self.check_word(w)?;
        if let Some(images) = self.magnus_images()? {
            let image = QuotientSpec::magnus_eval(&images, w, caps)?;
            return Ok(image.pow_capped(q, caps.terms)?.is_one());
        }
        let o = self.image_order(w, caps)?;
        Ok((q % o).to_u64() == Some(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packer_round_trip() {
        let p = Packer::new(3, 40);
        let v: Vec<u64> = (0..40).map(|i| i % 3).collect();
        assert_eq!(p.unpack(&p.pack(&v)), v);
        let p = Packer::new(u64::MAX, 3);
        let v = vec![u64::MAX - 1, 0, 17];
        assert_eq!(p.unpack(&p.pack(&v)), v);
    }

    #[test]
    fn lazy_orders() {
        let caps = Caps::default();
        let ab = QuotientSpec::mod_abelianization(2, 6).unwrap();
        let w = Word::parse("aab", 2).unwrap();
        assert_eq!(ab.image_order(&w, &caps).unwrap(), BigUint::from(6u32));
        assert!(ab.kernel_contains(&Word::parse("abAB", 2).unwrap(), &caps).unwrap());
        // (0 1 2) and (0 1) generate S3
        let s3 = QuotientSpec::permutation(2, 3, vec![vec![1, 2, 0], vec![1, 0, 2]]).unwrap();
        assert_eq!(s3.image_order(&Word::parse("a", 2).unwrap(), &caps).unwrap(), BigUint::from(3u32));
        assert_eq!(s3.image_order(&Word::parse("ab", 2).unwrap(), &caps).unwrap(), BigUint::from(2u32));
        assert!(QuotientSpec::permutation(1, 2, vec![vec![0, 0]]).is_err());
    }

    #[test]
    fn json_shape() {
        let spec = QuotientSpec::mod_abelianization(2, 2).unwrap();
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["kind"], "abelian");
        assert_eq!(json["params"]["moduli"], serde_json::json!([2, 2]));
        assert_eq!(json["gen_images"], serde_json::json!([[1, 0], [0, 1]]));
        let back: QuotientSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
    }
}
