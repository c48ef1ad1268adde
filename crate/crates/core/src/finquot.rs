//! Finite-index normal subgroups of `F_r`, given as kernels of maps onto
//! enumerated finite groups: coset graphs, Schreier transversals, conjugate
//! sets for powered relators, and Reidemeister–Schreier rewriting.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::error::{Error, Result};
use crate::group::{ConcreteImage, QuotientSpec};
use crate::snf;
use crate::word::{Letter, Word};

/// A finite quotient `F_r -> Q`, enumerated breadth first. Element `0` is
/// the identity; elements are numbered in discovery order with letters
/// tried in the order `a_1, .., a_r, A_1, .., A_r`, so every transversal
/// word is the shortlex-least word reaching its element.
#[derive(Clone, Debug)]
pub struct FiniteQuotient {
    spec: QuotientSpec,
    rank: usize,
    elements: Vec<Vec<u64>>,
    index: HashMap<Vec<u64>, u32>,
    /// `table[c * 2r + k]` is `c * letter_k`.
    table: Vec<u32>,
    /// Tree edge into each element (none for the identity).
    parent: Vec<Option<(u32, Letter)>>,
}

impl FiniteQuotient {
    pub fn build(spec: &QuotientSpec, caps: &Caps) -> Result<FiniteQuotient> {
        let image = spec.realize(caps)?;
        FiniteQuotient::enumerate(spec.clone(), image.as_ref(), caps.enumeration)
    }

    /// Enumerates the image of `F_r` under an already-realized map.
    pub fn enumerate(spec: QuotientSpec, image: &dyn ConcreteImage, cap: usize) -> Result<FiniteQuotient> {
        let rank = image.rank();
        let width = 2 * rank;
        let id = image.identity();
        let mut elements = vec![id.clone()];
        let mut index: HashMap<Vec<u64>, u32> = HashMap::from([(id, 0)]);
        let mut parent = vec![None];
        let mut table: Vec<u32> = Vec::new();
        let mut queue = VecDeque::from([0u32]);
        while let Some(c) = queue.pop_front() {
            let row_start = table.len();
            table.resize(row_start + width, 0);
            for k in 0..width {
                let letter = Letter::from_shortlex_key(k, rank);
                let next = image.act(&elements[c as usize], letter);
                let target = match index.get(&next) {
                    Some(&t) => t,
                    None => {
                        let t = elements.len();
                        if t >= cap {
                            return Err(Error::EnumerationCapExceeded { cap, reached: t + 1 });
                        }
                        index.insert(next.clone(), t as u32);
                        elements.push(next);
                        parent.push(Some((c, letter)));
                        queue.push_back(t as u32);
                        t as u32
                    }
                };
                table[row_start + k] = target;
            }
        }
        let q = FiniteQuotient {
            spec,
            rank,
            elements,
            index,
            table,
            parent,
        };
        q.check_closed()?;
        Ok(q)
    }

    fn check_closed(&self) -> Result<()> {
        // every generator must act as a permutation of the enumerated set
        for k in 0..self.rank {
            let inv = k + self.rank;
            for c in 0..self.order() {
                let d = self.table[c * 2 * self.rank + k] as usize;
                if self.table[d * 2 * self.rank + inv] as usize != c {
                    return Err(Error::InternalCheck(format!(
                        "generator {} is not invertible on element {c}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &QuotientSpec {
        &self.spec
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `j = |F : N|`.
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Encoded group elements in numbering order.
    pub fn elements(&self) -> &[Vec<u64>] {
        &self.elements
    }

    pub fn element_index(&self, key: &[u64]) -> Option<usize> {
        self.index.get(key).map(|&i| i as usize)
    }

    pub fn neighbor(&self, c: usize, letter: Letter) -> usize {
        self.table[c * 2 * self.rank + letter.shortlex_key(self.rank)] as usize
    }

    fn check_rank(&self, w: &Word) -> Result<()> {
        if w.rank() != self.rank {
            return Err(Error::RankMismatch {
                left: self.rank,
                right: w.rank(),
            });
        }
        Ok(())
    }

    /// Element reached from `start` by reading `w`.
    pub fn trace(&self, start: usize, w: &Word) -> usize {
        w.letters().iter().fold(start, |c, &l| self.neighbor(c, l))
    }

    /// Index of the image of `w` (equivalently, of the coset `N w`).
    pub fn coset_of(&self, w: &Word) -> Result<usize> {
        self.check_rank(w)?;
        Ok(self.trace(0, w))
    }

    /// The Schreier representative of element `c`.
    pub fn transversal(&self, c: usize) -> Word {
        let mut letters = Vec::new();
        let mut cur = c;
        while let Some((p, l)) = self.parent[cur] {
            letters.push(l);
            cur = p as usize;
        }
        letters.reverse();
        Word::reduce(self.rank, letters).expect("tree letters are in range")
    }

    /// Whether the edge `c --a_gen--> c*a_gen` belongs to the spanning tree.
    pub fn is_tree_edge(&self, c: usize, gen: usize) -> bool {
        let d = self.neighbor(c, Letter::new(gen, false));
        self.parent[d] == Some((c as u32, Letter::new(gen, false)))
            || self.parent[c] == Some((d as u32, Letter::new(gen, true)))
    }

    pub fn kernel_contains(&self, w: &Word) -> Result<bool> {
        Ok(self.coset_of(w)? == 0)
    }

    /// Least `n >= 1` with `w^n` in the kernel.
    pub fn image_order(&self, w: &Word) -> Result<usize> {
        self.check_rank(w)?;
        let mut c = self.trace(0, w);
        let mut n = 1;
        while c != 0 {
            c = self.trace(c, w);
            n += 1;
        }
        Ok(n)
    }

    /// `|F : <g>N| = j / |image of g|`.
    pub fn cyclic_index(&self, g: &Word) -> Result<usize> {
        Ok(self.order() / self.image_order(g)?)
    }

    /// For `g = base^q` in `N`, returns right-coset representatives `T` of
    /// `<base>N` (shortlex least, in element numbering order) and the
    /// conjugates `Z = { t^-1 g t }`. The normal closure of `g` in `F` equals
    /// the normal closure of `Z` in `N`.
    pub fn lemma0_conjugates(&self, base: &Word, q: u64, caps: &Caps) -> Result<ConjugateSet> {
        self.check_rank(base)?;
        if base.len() as u128 * q as u128 > caps.word_length as u128 {
            return Err(Error::InvalidParameter(format!(
                "{base}^{q} exceeds the word length cap {}",
                caps.word_length
            )));
        }
        let g = base.power(q as i64);
        if !self.kernel_contains(&g)? {
            return Err(Error::Precondition(format!("{base}^{q} is not in N")));
        }
        // elements of the cyclic subgroup generated by the image of base
        let mut cyclic = vec![0usize];
        let mut c = self.trace(0, base);
        while c != 0 {
            cyclic.push(c);
            c = self.trace(c, base);
        }
        let mut assigned = vec![false; self.order()];
        let mut transversal = Vec::new();
        let mut conjugates = Vec::new();
        for x in 0..self.order() {
            if assigned[x] {
                continue;
            }
            let t = self.transversal(x);
            for &h in &cyclic {
                assigned[self.trace(h, &t)] = true;
            }
            conjugates.push(g.conjugate(&t)?);
            transversal.push(t);
        }
        Ok(ConjugateSet {
            base: base.clone(),
            exponent: q,
            transversal,
            conjugates,
        })
    }

    /// Free basis of `N`: one generator per non-tree pair `(coset, a_i)`,
    /// ordered by coset number, then generator index.
    pub fn schreier_basis(&self) -> SchreierBasis {
        let r = self.rank;
        let mut lookup = vec![None; self.order() * r];
        let mut labels = Vec::new();
        for c in 0..self.order() {
            for i in 0..r {
                if !self.is_tree_edge(c, i) {
                    lookup[c * r + i] = Some(labels.len() as u32);
                    labels.push((c, i));
                }
            }
        }
        SchreierBasis { rank: r, labels, lookup }
    }

    /// Rewrites `w` as a word in the Schreier generators, reading it from
    /// the identity coset. Returns the rewritten word and the final coset.
    pub fn rewrite(&self, basis: &SchreierBasis, w: &Word) -> Result<(Word, usize)> {
        self.check_rank(w)?;
        let mut c = 0;
        let mut out = Vec::new();
        for &l in w.letters() {
            if l.is_inverse() {
                let d = self.neighbor(c, l);
                if let Some(s) = basis.label_of(d, l.gen()) {
                    out.push(Letter::new(s, true));
                }
                c = d;
            } else {
                if let Some(s) = basis.label_of(c, l.gen()) {
                    out.push(Letter::new(s, false));
                }
                c = self.neighbor(c, l);
            }
        }
        Ok((Word::reduce(basis.len(), out)?, c))
    }

    /// Presentation of `N / <<relators>>^N` on the Schreier basis.
    pub fn reidemeister_schreier(&self, relators: &[Word]) -> Result<SubgroupPresentation> {
        let basis = self.schreier_basis();
        let mut rewritten = Vec::with_capacity(relators.len());
        for rel in relators {
            let (word, end) = self.rewrite(&basis, rel)?;
            if end != 0 {
                return Err(Error::NotInKernel { word: rel.to_string() });
            }
            rewritten.push(word);
        }
        let generators = basis
            .labels
            .iter()
            .map(|&(c, i)| {
                let a = Word::generator(self.rank, i).expect("generator in range");
                let d = self.neighbor(c, Letter::new(i, false));
                let word = self
                    .transversal(c)
                    .mul(&a)
                    .and_then(|x| x.mul(&self.transversal(d).inv()))
                    .expect("equal ranks");
                SchreierGenerator {
                    label: format!("s[{c},{}]", i + 1),
                    coset: c,
                    generator: i + 1,
                    word,
                }
            })
            .collect();
        Ok(SubgroupPresentation {
            generator_count: basis.len(),
            generators,
            relators: rewritten,
            source: Provenance {
                quotient: self.spec.clone(),
                order: self.order(),
                input_relators: relators.to_vec(),
            },
        })
    }

    pub fn to_document(&self) -> QuotientDocument {
        QuotientDocument {
            spec: self.spec.clone(),
            order: self.order(),
        }
    }
}

/// JSON form of a finite quotient: kind, parameters, generator images, order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientDocument {
    #[serde(flatten)]
    pub spec: QuotientSpec,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugateSet {
    pub base: Word,
    pub exponent: u64,
    pub transversal: Vec<Word>,
    pub conjugates: Vec<Word>,
}

#[derive(Clone, Debug)]
pub struct SchreierBasis {
    rank: usize,
    labels: Vec<(usize, usize)>,
    lookup: Vec<Option<u32>>,
}

impl SchreierBasis {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(coset, 0-based generator)` of each basis element.
    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    pub fn label_of(&self, coset: usize, gen: usize) -> Option<usize> {
        self.lookup[coset * self.rank + gen].map(|s| s as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchreierGenerator {
    pub label: String,
    pub coset: usize,
    /// 1-based generator index.
    pub generator: usize,
    /// `t_c a_i t_{c a_i}^-1` as a word of `F_r`.
    pub word: Word,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub quotient: QuotientSpec,
    pub order: usize,
    pub input_relators: Vec<Word>,
}

/// Generators and relators of a finite-index subgroup modulo a normal
/// closure. Relators are words in the Schreier generators, so their rank is
/// `generator_count`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupPresentation {
    pub generator_count: usize,
    pub generators: Vec<SchreierGenerator>,
    pub relators: Vec<Word>,
    pub source: Provenance,
}

impl SubgroupPresentation {
    pub fn relator_count(&self) -> usize {
        self.relators.len()
    }

    pub fn deficiency(&self) -> i64 {
        self.generator_count as i64 - self.relators.len() as i64
    }

    /// Exponent-sum matrix, one row per relator.
    pub fn relation_matrix(&self) -> Vec<Vec<BigInt>> {
        self.relators
            .iter()
            .map(|rel| {
                let mut row = vec![0i64; self.generator_count];
                for l in rel.letters() {
                    row[l.gen()] += if l.is_inverse() { -1 } else { 1 };
                }
                row.into_iter().map(BigInt::from).collect()
            })
            .collect()
    }

    /// Abelian invariants of the presented group (0 marks a free factor).
    pub fn abelian_invariants(&self) -> Vec<BigInt> {
        snf::abelian_invariants(&self.relation_matrix(), self.generator_count)
    }

    pub fn abelian_invariants_u64(&self) -> Vec<u64> {
        self.abelian_invariants()
            .iter()
            .map(|d| d.to_u64().expect("invariants fit in 64 bits"))
            .collect()
    }
}
