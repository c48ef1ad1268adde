//! Freely reduced words in a free group of finite rank.
//!
//! Two textual syntaxes are accepted. Letters `a..z` denote the generators
//! `1..26` and the uppercase letters their inverses; `g3` and `g3^-1` name
//! generators by index, which is needed once the rank exceeds 26. Any token
//! may carry an integer exponent (`a^6`, `g2^-3`). The identity is `1`.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A generator or its inverse. Stored as a nonzero signed 1-based index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter(i32);

impl Letter {
    /// Letter for the 0-based generator `gen`, inverted when `inverse` is set.
    pub fn new(gen: usize, inverse: bool) -> Self {
        let v = gen as i32 + 1;
        Letter(if inverse { -v } else { v })
    }

    /// 0-based generator index.
    pub fn gen(self) -> usize {
        (self.0.unsigned_abs() - 1) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn inverse(self) -> Self {
        Letter(-self.0)
    }

    /// Position in the letter order `a1 < a2 < ... < ar < A1 < ... < Ar`
    /// used by shortlex comparisons and breadth-first searches.
    pub fn shortlex_key(self, rank: usize) -> usize {
        if self.is_inverse() {
            rank + self.gen()
        } else {
            self.gen()
        }
    }

    /// Inverse of [`Letter::shortlex_key`].
    pub fn from_shortlex_key(key: usize, rank: usize) -> Self {
        if key < rank {
            Letter::new(key, false)
        } else {
            Letter::new(key - rank, true)
        }
    }
}

/// An element of the free group `F_r`, always stored freely reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    rank: usize,
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity(rank: usize) -> Self {
        Word {
            rank,
            letters: Vec::new(),
        }
    }

    /// The 0-based generator `gen` as a one-letter word.
    pub fn generator(rank: usize, gen: usize) -> Result<Self> {
        Word::reduce(rank, [Letter::new(gen, false)])
    }

    /// Freely reduces a raw letter sequence.
    pub fn reduce<I>(rank: usize, letters: I) -> Result<Self>
    where
        I: IntoIterator<Item = Letter>,
    {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if l.gen() >= rank {
                return Err(Error::GeneratorOutOfRange {
                    index: l.gen() + 1,
                    rank,
                });
            }
            push_reduced(&mut out, l);
        }
        Ok(Word { rank, letters: out })
    }

    /// Builds a word from signed 1-based indices (`-2` is the inverse of the
    /// second generator).
    pub fn from_signed(rank: usize, letters: &[i32]) -> Result<Self> {
        if let Some(&z) = letters.iter().find(|&&v| v == 0) {
            return Err(Error::GeneratorOutOfRange {
                index: z as usize,
                rank,
            });
        }
        Word::reduce(rank, letters.iter().map(|&v| Letter(v)))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn to_signed(&self) -> Vec<i32> {
        self.letters.iter().map(|l| l.0).collect()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    fn check_rank(&self, other: &Word) -> Result<()> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                left: self.rank,
                right: other.rank,
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Word) -> Result<Word> {
        self.check_rank(other)?;
        let mut out = self.letters.clone();
        for &l in &other.letters {
            push_reduced(&mut out, l);
        }
        Ok(Word {
            rank: self.rank,
            letters: out,
        })
    }

    pub fn inv(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    /// `t^-1 * self * t`.
    pub fn conjugate(&self, t: &Word) -> Result<Word> {
        t.inv().mul(self)?.mul(t)
    }

    /// `[u, v] = u^-1 v^-1 u v`.
    pub fn commutator(&self, other: &Word) -> Result<Word> {
        self.inv().mul(&other.inv())?.mul(self)?.mul(other)
    }

    pub fn power(&self, n: i64) -> Word {
        let base = if n < 0 { self.inv() } else { self.clone() };
        let mut out = Vec::with_capacity(base.len() * n.unsigned_abs() as usize);
        for _ in 0..n.unsigned_abs() {
            for &l in &base.letters {
                push_reduced(&mut out, l);
            }
        }
        Word {
            rank: self.rank,
            letters: out,
        }
    }

    /// Appends one letter, cancelling if possible.
    pub fn push(&mut self, l: Letter) -> Result<()> {
        if l.gen() >= self.rank {
            return Err(Error::GeneratorOutOfRange {
                index: l.gen() + 1,
                rank: self.rank,
            });
        }
        push_reduced(&mut self.letters, l);
        Ok(())
    }

    /// Shortlex order with letters ordered `a1 < ... < ar < A1 < ... < Ar`.
    pub fn shortlex_cmp(&self, other: &Word) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            let r = self.rank.max(other.rank);
            self.letters
                .iter()
                .map(|l| l.shortlex_key(r))
                .cmp(other.letters.iter().map(|l| l.shortlex_key(r)))
        })
    }

    /// A uniformly random reduced word of exactly `len` letters.
    pub fn random<R: Rng + ?Sized>(rank: usize, len: usize, rng: &mut R) -> Word {
        let mut letters: Vec<Letter> = Vec::with_capacity(len);
        while letters.len() < len {
            let l = Letter::new(rng.gen_range(0..rank), rng.gen_bool(0.5));
            if letters.last().is_some_and(|&last| last == l.inverse()) {
                continue;
            }
            letters.push(l);
        }
        Word { rank, letters }
    }

    /// Parses either textual syntax; see the module docs.
    pub fn parse(text: &str, rank: usize) -> Result<Word> {
        let err = |reason: &str| Error::WordSyntax {
            input: text.to_string(),
            reason: reason.to_string(),
        };
        let s = text.trim();
        if s.is_empty() || s == "1" {
            return Ok(Word::identity(rank));
        }
        let chars: Vec<char> = s.chars().collect();
        let mut i = 0;
        let mut out: Vec<Letter> = Vec::new();
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() || c == '*' || c == '.' {
                i += 1;
                continue;
            }
            let letter = if c == 'g' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let idx: usize = chars[start..i]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| err("bad generator index"))?;
                if idx == 0 {
                    return Err(err("generator indices start at 1"));
                }
                Letter::new(idx - 1, false)
            } else if c.is_ascii_lowercase() {
                i += 1;
                Letter::new((c as u8 - b'a') as usize, false)
            } else if c.is_ascii_uppercase() {
                i += 1;
                Letter::new((c as u8 - b'A') as usize, true)
            } else {
                return Err(err(&format!("unexpected character {c:?}")));
            };
            let mut exp: i64 = 1;
            if chars.get(i) == Some(&'^') {
                i += 1;
                let start = i;
                if chars.get(i) == Some(&'-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                exp = chars[start..i]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| err("bad exponent"))?;
            }
            let l = if exp < 0 { letter.inverse() } else { letter };
            if l.gen() >= rank {
                return Err(Error::GeneratorOutOfRange {
                    index: l.gen() + 1,
                    rank,
                });
            }
            for _ in 0..exp.unsigned_abs() {
                push_reduced(&mut out, l);
            }
        }
        Ok(Word { rank, letters: out })
    }

    /// Parses a comma-separated list of words.
    pub fn parse_list(text: &str, rank: usize) -> Result<Vec<Word>> {
        text.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| Word::parse(t, rank))
            .collect()
    }

    /// Highest generator index (1-based) mentioned in a textual word list.
    pub fn max_generator_in(text: &str) -> usize {
        let chars: Vec<char> = text.chars().collect();
        let mut best = 0;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == 'g' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                let start = i + 1;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let idx: usize = chars[start..i]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .unwrap_or(0);
                best = best.max(idx);
                continue;
            }
            if c == '^' {
                // skip the exponent
                i += 1;
                while i < chars.len() && (chars[i] == '-' || chars[i].is_ascii_digit()) {
                    i += 1;
                }
                continue;
            }
            if c.is_ascii_alphabetic() {
                best = best.max((c.to_ascii_lowercase() as u8 - b'a') as usize + 1);
            }
            i += 1;
        }
        best
    }
}

fn push_reduced(out: &mut Vec<Letter>, l: Letter) {
    if out.last() == Some(&l.inverse()) {
        out.pop();
    } else {
        out.push(l);
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        if self.rank <= 26 {
            for l in &self.letters {
                let base = if l.is_inverse() { b'A' } else { b'a' };
                write!(f, "{}", (base + l.gen() as u8) as char)?;
            }
        } else {
            for (k, l) in self.letters.iter().enumerate() {
                if k > 0 {
                    f.write_str("*")?;
                }
                write!(f, "g{}", l.gen() + 1)?;
                if l.is_inverse() {
                    f.write_str("^-1")?;
                }
            }
        }
        Ok(())
    }
}

/// Serialized as `{"rank": r, "word": "<text>"}`.
#[derive(Serialize, Deserialize)]
struct WordRepr {
    rank: usize,
    word: String,
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WordRepr {
            rank: self.rank,
            word: self.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = WordRepr::deserialize(d)?;
        Word::parse(&repr.word, repr.rank).map_err(serde::de::Error::custom)
    }
}

/// Nontrivial reduced words of `F_r` in shortlex order: `a, b, A, B, aa, ab, ...`.
pub struct ShortlexWords {
    rank: usize,
    current: Vec<usize>,
    max_len: Option<usize>,
}

impl ShortlexWords {
    pub fn new(rank: usize) -> Self {
        ShortlexWords {
            rank,
            current: Vec::new(),
            max_len: None,
        }
    }

    /// Stops after all words of length `max_len`.
    pub fn up_to(rank: usize, max_len: usize) -> Self {
        ShortlexWords {
            rank,
            current: Vec::new(),
            max_len: Some(max_len),
        }
    }

    fn is_reduced(&self) -> bool {
        let r = self.rank;
        self.current
            .windows(2)
            .all(|w| Letter::from_shortlex_key(w[0], r).inverse() != Letter::from_shortlex_key(w[1], r))
    }

    fn advance(&mut self) {
        let alphabet = 2 * self.rank;
        let mut i = self.current.len();
        loop {
            if i == 0 {
                let n = self.current.len() + 1;
                self.current = vec![0; n];
                return;
            }
            i -= 1;
            self.current[i] += 1;
            if self.current[i] < alphabet {
                for k in self.current.iter_mut().skip(i + 1) {
                    *k = 0;
                }
                return;
            }
        }
    }
}

impl Iterator for ShortlexWords {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.rank == 0 {
            return None;
        }
        loop {
            self.advance();
            if let Some(m) = self.max_len {
                if self.current.len() > m {
                    return None;
                }
            }
            if self.is_reduced() {
                let r = self.rank;
                return Some(Word {
                    rank: r,
                    letters: self
                        .current
                        .iter()
                        .map(|&k| Letter::from_shortlex_key(k, r))
                        .collect(),
                });
            }
        }
    }
}
