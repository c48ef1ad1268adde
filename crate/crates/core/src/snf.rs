//! Smith normal form over the integers, used for abelian invariants.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Diagonal of the Smith normal form of `rows` (all rows of length `cols`):
/// the nonzero invariant factors `d_1 | d_2 | ...`.
pub fn invariant_factors(rows: &[Vec<BigInt>], cols: usize) -> Vec<BigInt> {
    let mut m: Vec<Vec<BigInt>> = rows.to_vec();
    let nrows = m.len();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < nrows.min(cols) {
        // pivot: smallest nonzero absolute value in the remaining block
        let mut pivot: Option<(usize, usize)> = None;
        for (i, row) in m.iter().enumerate().skip(t) {
            for (j, v) in row.iter().enumerate().skip(t) {
                if !v.is_zero() && pivot.is_none_or(|(pi, pj)| v.abs() < m[pi][pj].abs()) {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut dirty = false;
            // clear the column below the pivot
            for i in t + 1..nrows {
                if m[i][t].is_zero() {
                    continue;
                }
                let q = m[i][t].div_floor(&m[t][t]);
                for j in t..cols {
                    let sub = &q * &m[t][j];
                    m[i][j] -= sub;
                }
                if !m[i][t].is_zero() {
                    m.swap(t, i);
                    dirty = true;
                }
            }
            // clear the row right of the pivot
            for j in t + 1..cols {
                if m[t][j].is_zero() {
                    continue;
                }
                let q = m[t][j].div_floor(&m[t][t]);
                for row in m.iter_mut().skip(t) {
                    let sub = &q * &row[t];
                    row[j] -= sub;
                }
                if !m[t][j].is_zero() {
                    for row in m.iter_mut() {
                        row.swap(t, j);
                    }
                    dirty = true;
                }
            }
            if dirty {
                continue;
            }
            // the pivot must divide the rest of the block
            let bad = (t + 1..nrows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !(&m[i][j] % &m[t][t]).is_zero());
            match bad {
                Some((i, _)) => {
                    for j in t..cols {
                        let add = m[i][j].clone();
                        m[t][j] += add;
                    }
                }
                None => break,
            }
        }
        diag.push(m[t][t].abs());
        t += 1;
    }
    diag
}

/// Abelian invariants of `<x_1..x_cols | rows>`: invariant factors other
/// than 1, followed by a 0 for every free cyclic factor. This is the
/// divisibility order, with 0 last since every integer divides 0.
pub fn abelian_invariants(rows: &[Vec<BigInt>], cols: usize) -> Vec<BigInt> {
    let diag = invariant_factors(rows, cols);
    let free = cols - diag.len();
    diag.into_iter()
        .filter(|d| !d.is_one())
        .chain(std::iter::repeat_n(BigInt::zero(), free))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter()
            .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
            .collect()
    }

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn small_presentations() {
        assert_eq!(abelian_invariants(&m(&[&[2]]), 1), ints(&[2]));
        assert_eq!(abelian_invariants(&[], 2), ints(&[0, 0]));
        assert_eq!(abelian_invariants(&m(&[&[2, 0], &[0, 3]]), 2), ints(&[6]));
        assert_eq!(abelian_invariants(&m(&[&[2, 4], &[6, 8]]), 2), ints(&[2, 4]));
        assert_eq!(abelian_invariants(&m(&[&[0, 0, 4]]), 3), ints(&[4, 0, 0]));
        assert_eq!(abelian_invariants(&m(&[&[1, 1], &[1, -1]]), 2), ints(&[2]));
    }

    #[test]
    fn divisibility_chain() {
        let d = invariant_factors(&m(&[&[4, 6, 0], &[6, 9, 15], &[10, 0, 25]]), 3);
        for w in d.windows(2) {
            assert!((&w[1] % &w[0]).is_zero());
        }
        // the product of the invariant factors is |det| = 4 * 225 - 6 * 0
        let prod: BigInt = d.iter().product();
        assert_eq!(prod, BigInt::from(900));
    }
}
