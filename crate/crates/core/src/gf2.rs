//! Binary linear algebra for the polar generator matrix `G = F^{⊗n}` with
//! `F = [[1, 0], [1, 1]]`.
//!
//! `G` is never stored. Entries come from the subset rule on binary
//! expansions and products `uG` come from the in-place butterfly.
//!
//! All public index arguments are 1-based positions in `1..=N`.

use std::fmt;

use crate::error::{PolarError, Result};

/// Largest block length for which a dense `G` may ever be built (test code only).
pub const DENSE_LIMIT_LOG2: u32 = 12;

/// Fixed-length vector over GF(2).
///
/// Storage is one byte per symbol, always 0 or 1.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitWord(Vec<u8>);

impl BitWord {
    pub fn zeros(len: usize) -> Self {
        BitWord(vec![0; len])
    }

    pub fn ones(len: usize) -> Self {
        BitWord(vec![1; len])
    }

    /// Unit vector with a single one at 1-based `pos`.
    pub fn unit(len: usize, pos: usize) -> Result<Self> {
        check_position(pos, len)?;
        let mut w = Self::zeros(len);
        w.0[pos - 1] = 1;
        Ok(w)
    }

    /// Builds a word from bytes, rejecting anything that is not 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(at) = bits.iter().position(|&b| b > 1) {
            return Err(PolarError::NonBinary { at: at + 1 });
        }
        Ok(BitWord(bits))
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        BitWord(bits.into_iter().map(u8::from).collect())
    }

    /// Parses a string of `0` and `1` characters; whitespace is ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(text.len());
        for (at, c) in text.chars().filter(|c| !c.is_whitespace()).enumerate() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => return Err(PolarError::NonBinary { at: at + 1 }),
            }
        }
        Ok(BitWord(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Symbol at 1-based `pos`. Panics when out of range.
    pub fn at(&self, pos: usize) -> u8 {
        self.0[pos - 1]
    }

    /// Sets the symbol at 1-based `pos`. Panics when out of range.
    pub fn set(&mut self, pos: usize, bit: bool) {
        self.0[pos - 1] = u8::from(bit);
    }

    /// Flips the symbol at 1-based `pos`.
    pub fn flip(&mut self, pos: usize) {
        self.0[pos - 1] ^= 1;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// 1-based positions holding a one.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn xor(&self, other: &BitWord) -> Result<BitWord> {
        if self.len() != other.len() {
            return Err(PolarError::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(BitWord(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }

    /// Hamming distance to `other`. Lengths must agree.
    pub fn distance(&self, other: &BitWord) -> usize {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    /// Sub-word at the given 1-based positions, in the order given.
    pub fn gather(&self, positions: &[usize]) -> BitWord {
        BitWord(positions.iter().map(|&p| self.0[p - 1]).collect())
    }

    /// Writes `values` into the given 1-based positions.
    pub fn scatter(&mut self, positions: &[usize], values: &BitWord) -> Result<()> {
        if positions.len() != values.len() {
            return Err(PolarError::LengthMismatch {
                expected: positions.len(),
                actual: values.len(),
            });
        }
        for (&p, &b) in positions.iter().zip(&values.0) {
            check_position(p, self.len())?;
            self.0[p - 1] = b;
        }
        Ok(())
    }
}

impl fmt::Debug for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitWord({self})")
    }
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Size descriptor of `G = F^{⊗n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorSpec {
    log2_len: u32,
}

impl GeneratorSpec {
    pub fn new(log2_len: u32) -> Result<Self> {
        if log2_len > 30 {
            return Err(PolarError::InvalidParameter(format!(
                "log2 block length {log2_len} is too large"
            )));
        }
        Ok(GeneratorSpec { log2_len })
    }

    /// Spec for block length `len`, which must be a power of two.
    pub fn for_len(len: usize) -> Result<Self> {
        if !len.is_power_of_two() {
            return Err(PolarError::NotPowerOfTwo(len));
        }
        Self::new(len.trailing_zeros())
    }

    pub fn n(&self) -> u32 {
        self.log2_len
    }

    pub fn len(&self) -> usize {
        1usize << self.log2_len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entry `G[i][j]` for 1-based `i, j`.
    ///
    /// Equals `∏_m (1 ⊕ b_m(j−1) ⊕ b_m(j−1)·b_m(i−1))`, i.e. one exactly when
    /// the set bits of `j−1` are a subset of the set bits of `i−1`.
    pub fn entry(&self, i: usize, j: usize) -> Result<u8> {
        check_position(i, self.len())?;
        check_position(j, self.len())?;
        Ok(entry_unchecked(i, j))
    }

    /// Hamming weight of column `j`: `2^(number of zero bits of j−1)`.
    pub fn column_weight(&self, j: usize) -> Result<usize> {
        check_position(j, self.len())?;
        let zeros = self.log2_len - ((j - 1) as u64).count_ones();
        Ok(1usize << zeros)
    }

    /// `uG` over GF(2) via the butterfly, `O(N log N)`.
    pub fn transform(&self, u: &BitWord) -> Result<BitWord> {
        if u.len() != self.len() {
            return Err(PolarError::LengthMismatch {
                expected: self.len(),
                actual: u.len(),
            });
        }
        let mut x = u.clone();
        butterfly_in_place(x.as_mut_slice());
        Ok(x)
    }

    /// Solves `w · G[rows, rows] = target` by back-substitution.
    ///
    /// `rows` must be strictly ascending 1-based positions. The restricted
    /// matrix is unit lower triangular, so the solution is unique.
    pub fn lower_tri_solve(&self, rows: &[usize], target: &BitWord) -> Result<BitWord> {
        if rows.len() != target.len() {
            return Err(PolarError::LengthMismatch {
                expected: rows.len(),
                actual: target.len(),
            });
        }
        check_ascending(rows, self.len())?;
        let t = target.as_slice();
        let mut w = vec![0u8; rows.len()];
        // target_j = w_j ⊕ Σ_{i > j} w_i G[i][j]; solve from the last column down.
        for c in (0..rows.len()).rev() {
            let j = rows[c];
            let mut acc = t[c];
            for r in c + 1..rows.len() {
                if w[r] == 1 {
                    acc ^= entry_unchecked(rows[r], j);
                }
            }
            w[c] = acc;
        }
        Ok(BitWord(w))
    }

    /// `w · G[rows, cols]` for 1-based index lists.
    pub fn restricted_product(
        &self,
        w: &BitWord,
        rows: &[usize],
        cols: &[usize],
    ) -> Result<BitWord> {
        if rows.len() != w.len() {
            return Err(PolarError::LengthMismatch {
                expected: rows.len(),
                actual: w.len(),
            });
        }
        for &p in rows.iter().chain(cols) {
            check_position(p, self.len())?;
        }
        let ones: Vec<usize> = rows
            .iter()
            .zip(w.as_slice())
            .filter(|(_, &b)| b == 1)
            .map(|(&r, _)| r)
            .collect();
        Ok(BitWord(
            cols.iter()
                .map(|&j| ones.iter().fold(0u8, |acc, &i| acc ^ entry_unchecked(i, j)))
                .collect(),
        ))
    }
}

/// Bit-reversal permutation of `1..=2^n`; entry `i−1` holds the image of `i`.
pub fn bit_reversal_perm(n: u32) -> Vec<usize> {
    let len = 1usize << n;
    (0..len).map(|i| reverse_bits(i, n) + 1).collect()
}

/// Reverses the low `n` bits of `value`.
pub fn reverse_bits(value: usize, n: u32) -> usize {
    if n == 0 {
        return 0;
    }
    value.reverse_bits() >> (usize::BITS - n)
}

#[inline]
pub(crate) fn entry_unchecked(i: usize, j: usize) -> u8 {
    u8::from((j - 1) & !(i - 1) == 0)
}

/// In-place `x ← xG` on a 0/1 slice whose length is a power of two.
pub(crate) fn butterfly_in_place(x: &mut [u8]) {
    let len = x.len();
    let mut half = 1;
    while half < len {
        for block in x.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

fn check_position(pos: usize, len: usize) -> Result<()> {
    if pos == 0 || pos > len {
        Err(PolarError::IndexOutOfRange { index: pos, len })
    } else {
        Ok(())
    }
}

pub(crate) fn check_ascending(positions: &[usize], len: usize) -> Result<()> {
    for w in positions.windows(2) {
        if w[0] >= w[1] {
            return Err(PolarError::InvalidIndexSet(format!(
                "positions must be strictly ascending, found {} before {}",
                w[0], w[1]
            )));
        }
    }
    for &p in positions {
        check_position(p, len)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_product(spec: &GeneratorSpec, u: &BitWord) -> BitWord {
        let len = spec.len();
        BitWord::from_bools((1..=len).map(|j| {
            (1..=len).fold(0u8, |acc, i| acc ^ (u.at(i) & spec.entry(i, j).unwrap())) == 1
        }))
    }

    #[test]
    fn entry_examples() {
        let g3 = GeneratorSpec::new(3).unwrap();
        assert_eq!(g3.entry(8, 1).unwrap(), 1);
        assert_eq!(g3.entry(1, 2).unwrap(), 0);
        let g2 = GeneratorSpec::new(2).unwrap();
        assert_eq!(g2.entry(3, 3).unwrap(), 1);
        assert!(g3.entry(0, 1).is_err());
        assert!(g3.entry(1, 9).is_err());
    }

    #[test]
    fn entry_matches_kronecker_power() {
        // F^{⊗n} built explicitly, as a check independent of the subset rule.
        let mut dense = vec![vec![1u8]];
        for n in 1..=5u32 {
            let prev = dense.len();
            let mut next = vec![vec![0u8; 2 * prev]; 2 * prev];
            for r in 0..prev {
                for c in 0..prev {
                    let v = dense[r][c];
                    next[r][c] = v;
                    next[r + prev][c] = v;
                    next[r + prev][c + prev] = v;
                }
            }
            dense = next;
            let spec = GeneratorSpec::new(n).unwrap();
            for i in 1..=spec.len() {
                for j in 1..=spec.len() {
                    assert_eq!(
                        spec.entry(i, j).unwrap(),
                        dense[i - 1][j - 1],
                        "n={n} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn lower_triangular_unit_diagonal() {
        for n in 0..=6 {
            let spec = GeneratorSpec::new(n).unwrap();
            for i in 1..=spec.len() {
                assert_eq!(spec.entry(i, i).unwrap(), 1);
                for j in i + 1..=spec.len() {
                    assert_eq!(spec.entry(i, j).unwrap(), 0);
                }
            }
        }
    }

    #[test]
    fn column_weight_examples() {
        let g3 = GeneratorSpec::new(3).unwrap();
        assert_eq!(g3.column_weight(8).unwrap(), 1);
        assert_eq!(g3.column_weight(1).unwrap(), 8);
        assert_eq!(g3.column_weight(5).unwrap(), 4);
        assert!(g3.column_weight(9).is_err());
    }

    #[test]
    fn column_weight_matches_column_sum() {
        for n in 0..=8 {
            let spec = GeneratorSpec::new(n).unwrap();
            for j in 1..=spec.len() {
                let sum: usize = (1..=spec.len())
                    .map(|i| spec.entry(i, j).unwrap() as usize)
                    .sum();
                assert_eq!(spec.column_weight(j).unwrap(), sum, "n={n} j={j}");
            }
        }
    }

    #[test]
    fn transform_examples() {
        let spec = GeneratorSpec::new(3).unwrap();
        assert_eq!(
            spec.transform(&BitWord::zeros(8)).unwrap(),
            BitWord::zeros(8)
        );
        assert_eq!(
            spec.transform(&BitWord::unit(8, 8).unwrap()).unwrap(),
            BitWord::ones(8)
        );
        assert_eq!(
            spec.transform(&BitWord::unit(8, 1).unwrap()).unwrap(),
            BitWord::parse("10000000").unwrap()
        );
        assert!(spec.transform(&BitWord::zeros(4)).is_err());
    }

    #[test]
    fn transform_exhaustive_small() {
        for n in 0..=4 {
            let spec = GeneratorSpec::new(n).unwrap();
            let len = spec.len();
            for m in 0u32..(1 << len) {
                let u = BitWord::from_bools((0..len).map(|k| m >> k & 1 == 1));
                assert_eq!(spec.transform(&u).unwrap(), dense_product(&spec, &u));
            }
        }
    }

    #[test]
    fn bit_reversal_examples() {
        assert_eq!(bit_reversal_perm(0), vec![1]);
        assert_eq!(bit_reversal_perm(1), vec![1, 2]);
        assert_eq!(bit_reversal_perm(2), vec![1, 3, 2, 4]);
        assert_eq!(bit_reversal_perm(3)[1], 5);
    }

    #[test]
    fn bit_reversal_is_involution() {
        for n in 0..=10 {
            let p = bit_reversal_perm(n);
            for (i, &img) in p.iter().enumerate() {
                assert_eq!(p[img - 1], i + 1);
            }
        }
    }

    #[test]
    fn lower_tri_solve_examples() {
        let spec = GeneratorSpec::new(3).unwrap();
        let all: Vec<usize> = (1..=8).collect();
        assert_eq!(
            spec.lower_tri_solve(&all, &BitWord::zeros(8)).unwrap(),
            BitWord::zeros(8)
        );
        assert_eq!(
            spec.lower_tri_solve(&all, &BitWord::ones(8)).unwrap(),
            BitWord::unit(8, 8).unwrap()
        );
        assert!(spec.lower_tri_solve(&all, &BitWord::zeros(7)).is_err());
        assert!(spec.lower_tri_solve(&[2, 1], &BitWord::zeros(2)).is_err());
    }

    #[test]
    fn restricted_product_matches_transform() {
        let spec = GeneratorSpec::new(4).unwrap();
        let all: Vec<usize> = (1..=16).collect();
        let u = BitWord::parse("1011001110001101").unwrap();
        assert_eq!(
            spec.restricted_product(&u, &all, &all).unwrap(),
            spec.transform(&u).unwrap()
        );
    }

    fn random_rows(n: u32) -> impl Strategy<Value = Vec<usize>> {
        let len = 1usize << n;
        proptest::collection::btree_set(1..=len, 1..=len).prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn transform_matches_dense(n in 5u32..=10, seed in any::<u64>()) {
            let spec = GeneratorSpec::new(n).unwrap();
            let mut state = seed | 1;
            let u = BitWord::from_bools((0..spec.len()).map(|_| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                state & 1 == 1
            }));
            prop_assert_eq!(spec.transform(&u).unwrap(), dense_product(&spec, &u));
        }

        #[test]
        fn lower_tri_round_trip(rows in random_rows(6), bits in proptest::collection::vec(0u8..=1, 64)) {
            let spec = GeneratorSpec::new(6).unwrap();
            let w = BitWord::from_bits(bits[..rows.len()].to_vec()).unwrap();
            let target = spec.restricted_product(&w, &rows, &rows).unwrap();
            prop_assert_eq!(spec.lower_tri_solve(&rows, &target).unwrap(), w);
        }

        #[test]
        fn transform_is_an_involution(bits in proptest::collection::vec(0u8..=1, 256)) {
            let spec = GeneratorSpec::new(8).unwrap();
            let u = BitWord::from_bits(bits).unwrap();
            let x = spec.transform(&u).unwrap();
            prop_assert_eq!(spec.transform(&x).unwrap(), u);
        }
    }
}
