//! Reduced words in the free group F_r over the letters ±1, …, ±r.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub type Letter = i32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WordError {
    #[error("letter {letter} outside the alphabet of rank {rank}")]
    BadLetter { letter: Letter, rank: usize },
    #[error("word is not reduced at position {0}")]
    NotReduced(usize),
    #[error("periodic continuation must be nonempty and cyclically reduced")]
    BadPeriod,
    #[error("could not parse word: {0}")]
    Parse(String),
}

/// Position of a letter in the array `[1, −1, 2, −2, …]`.
#[inline]
pub fn letter_index(a: Letter) -> usize {
    2 * (a.unsigned_abs() as usize - 1) + usize::from(a < 0)
}

/// Inverse of [`letter_index`].
#[inline]
pub fn index_letter(i: usize) -> Letter {
    let g = (i / 2 + 1) as Letter;
    if i.is_multiple_of(2) {
        g
    } else {
        -g
    }
}

/// All letters of rank `r` in the order `1, −1, 2, −2, …`.
pub fn alphabet(r: usize) -> Vec<Letter> {
    (0..2 * r).map(index_letter).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ReducedWord {
    letters: Vec<Letter>,
}

impl ReducedWord {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates that `letters` is reduced and within rank `r`.
    pub fn new(letters: Vec<Letter>, r: usize) -> Result<Self, WordError> {
        for (i, &a) in letters.iter().enumerate() {
            if a == 0 || a.unsigned_abs() as usize > r {
                return Err(WordError::BadLetter { letter: a, rank: r });
            }
            if i > 0 && letters[i - 1] == -a {
                return Err(WordError::NotReduced(i));
            }
        }
        Ok(Self { letters })
    }

    /// Freely reduces an arbitrary letter sequence.
    pub fn reduce(letters: &[Letter]) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
        for &a in letters {
            if out.last() == Some(&-a) {
                out.pop();
            } else {
                out.push(a);
            }
        }
        Self { letters: out }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self { letters: self.letters.iter().rev().map(|a| -a).collect() }
    }

    /// Reduced product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut v = self.letters.clone();
        v.extend_from_slice(&other.letters);
        Self::reduce(&v)
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut v = Vec::with_capacity(self.len() * k);
        for _ in 0..k {
            v.extend_from_slice(&self.letters);
        }
        Self::reduce(&v)
    }

    /// Cyclically reduced conjugate together with the conjugator length removed
    /// from each end.
    pub fn cyclic_reduction(&self) -> (Self, usize) {
        let l = &self.letters;
        let mut i = 0;
        while i < l.len() / 2 && l[i] == -l[l.len() - 1 - i] {
            i += 1;
        }
        (Self { letters: l[i..l.len() - i].to_vec() }, i)
    }

    pub fn prefix(&self, n: usize) -> Self {
        Self { letters: self.letters[..n.min(self.len())].to_vec() }
    }

    /// Generator-word notation: `a`, `A` = a⁻¹, `b`, `B` = b⁻¹, … for rank ≤ 26;
    /// otherwise signed integers separated by commas.
    pub fn parse(s: &str, r: usize) -> Result<Self, WordError> {
        let s = s.trim();
        if s.is_empty() || s == "e" || s == "1" {
            return Ok(Self::empty());
        }
        let letters: Result<Vec<Letter>, WordError> = if s.contains(',') || s.starts_with('-') || s.chars().any(|c| c.is_ascii_digit()) {
            s.split(',').map(|t| t.trim().parse::<Letter>().map_err(|e| WordError::Parse(e.to_string()))).collect()
        } else {
            s.chars()
                .map(|c| {
                    if c.is_ascii_lowercase() {
                        Ok((c as u8 - b'a' + 1) as Letter)
                    } else if c.is_ascii_uppercase() {
                        Ok(-((c as u8 - b'A' + 1) as Letter))
                    } else {
                        Err(WordError::Parse(format!("unexpected character {c:?}")))
                    }
                })
                .collect()
        };
        Self::new(letters?, r)
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for &a in &self.letters {
            let g = a.unsigned_abs();
            if g <= 26 {
                let base = if a > 0 { b'a' } else { b'A' };
                write!(f, "{}", (base + g as u8 - 1) as char)?;
            } else {
                write!(f, "[{a}]")?;
            }
        }
        Ok(())
    }
}

/// Number of reduced words of length `n` in rank `r`.
pub fn count_reduced(r: usize, n: usize) -> usize {
    if n == 0 {
        1
    } else {
        2 * r * (2 * r - 1).pow(n as u32 - 1)
    }
}

/// Reduced words of length exactly `n`, in lexicographic order with respect to
/// the letter order `1 < −1 < 2 < −2 < …`.
pub fn enumerate_reduced(r: usize, n: usize) -> ReducedWords {
    ReducedWords { r, n, current: None, done: r == 0 && n > 0 }
}

/// Reduced words of length at most `n` (shortlex order).
pub fn enumerate_ball(r: usize, n: usize) -> impl Iterator<Item = ReducedWord> {
    (0..=n).flat_map(move |k| enumerate_reduced(r, k))
}

pub struct ReducedWords {
    r: usize,
    n: usize,
    current: Option<Vec<usize>>,
    done: bool,
}

impl ReducedWords {
    fn first(&self) -> Vec<usize> {
        // Alternate indices 0, 0, … is reduced since 1·1 is reduced.
        vec![0; self.n]
    }

    fn advance(&self, idx: &mut [usize]) -> bool {
        let k = 2 * self.r;
        let mut pos = idx.len();
        while pos > 0 {
            pos -= 1;
            loop {
                idx[pos] += 1;
                if idx[pos] >= k {
                    break;
                }
                if pos == 0 || index_letter(idx[pos]) != -index_letter(idx[pos - 1]) {
                    // fill the tail with the smallest admissible letters
                    for q in pos + 1..idx.len() {
                        idx[q] = if index_letter(0) == -index_letter(idx[q - 1]) { 1 } else { 0 };
                    }
                    return true;
                }
            }
            idx[pos] = 0;
        }
        false
    }
}

impl Iterator for ReducedWords {
    type Item = ReducedWord;

    fn next(&mut self) -> Option<ReducedWord> {
        if self.done {
            return None;
        }
        match &mut self.current {
            None => {
                let f = self.first();
                self.current = Some(f);
            }
            Some(idx) => {
                let mut idx2 = idx.clone();
                if self.n == 0 || !self.advance(&mut idx2) {
                    self.done = true;
                    return None;
                }
                self.current = Some(idx2);
            }
        }
        let idx = self.current.as_ref().unwrap();
        Some(ReducedWord { letters: idx.iter().map(|&i| index_letter(i)).collect() })
    }
}

/// An infinite reduced word `prefix · period^∞`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InfiniteWord {
    prefix: Vec<Letter>,
    period: Vec<Letter>,
}

impl InfiniteWord {
    /// Continues `prefix` by repeating its last letter.
    pub fn repeat_last(prefix: &ReducedWord) -> Result<Self, WordError> {
        let last = *prefix.letters().last().ok_or(WordError::BadPeriod)?;
        Ok(Self { prefix: prefix.letters().to_vec(), period: vec![last] })
    }

    pub fn new(prefix: &ReducedWord, period: &ReducedWord) -> Result<Self, WordError> {
        let p = period.letters();
        if p.is_empty() || p[0] == -p[p.len() - 1] {
            return Err(WordError::BadPeriod);
        }
        if let Some(&last) = prefix.letters().last() {
            if last == -p[0] {
                return Err(WordError::NotReduced(prefix.len()));
            }
        }
        Ok(Self { prefix: prefix.letters().to_vec(), period: p.to_vec() })
    }

    pub fn letter(&self, i: usize) -> Letter {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.period[(i - self.prefix.len()) % self.period.len()]
        }
    }

    /// The first `n` letters `g_n(ζ)`.
    pub fn truncate(&self, n: usize) -> ReducedWord {
        ReducedWord { letters: (0..n).map(|i| self.letter(i)).collect() }
    }

    /// The shift `S^k ζ`.
    pub fn shift(&self, k: usize) -> Self {
        if k <= self.prefix.len() {
            return Self { prefix: self.prefix[k..].to_vec(), period: self.period.clone() };
        }
        let off = (k - self.prefix.len()) % self.period.len();
        let mut period = self.period[off..].to_vec();
        period.extend_from_slice(&self.period[..off]);
        Self { prefix: Vec::new(), period }
    }

    /// Length of the longest common prefix, capped at `cap`.
    pub fn common_prefix(&self, other: &Self, cap: usize) -> usize {
        (0..cap).take_while(|&i| self.letter(i) == other.letter(i)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_formula() {
        assert_eq!(enumerate_reduced(2, 1).count(), 4);
        assert_eq!(enumerate_reduced(2, 3).count(), 36);
        assert_eq!(enumerate_reduced(3, 5).count(), 3750);
        assert_eq!(count_reduced(3, 5), 3750);
        assert_eq!(enumerate_reduced(2, 0).count(), 1);
    }

    #[test]
    fn enumeration_is_reduced_sorted_and_distinct() {
        let words: Vec<ReducedWord> = enumerate_reduced(2, 4).collect();
        for w in &words {
            assert!(ReducedWord::new(w.letters().to_vec(), 2).is_ok());
        }
        let keys: Vec<Vec<usize>> = words.iter().map(|w| w.letters().iter().map(|&a| letter_index(a)).collect()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn reduce_and_inverse() {
        let w = ReducedWord::parse("abA", 2).unwrap();
        assert_eq!(w.mul(&w.inverse()), ReducedWord::empty());
        assert_eq!(w.to_string(), "abA");
        let (c, k) = w.cyclic_reduction();
        assert_eq!((c.to_string(), k), ("b".to_string(), 1));
        assert!(ReducedWord::parse("aA", 2).is_err());
        assert_eq!(ReducedWord::parse("1,-2", 2).unwrap().to_string(), "aB");
    }

    #[test]
    fn infinite_word_shift() {
        let z = InfiniteWord::new(&ReducedWord::parse("ab", 2).unwrap(), &ReducedWord::parse("aB", 2).unwrap()).unwrap();
        assert_eq!(z.truncate(6).to_string(), "abaBaB");
        assert_eq!(z.shift(3).truncate(4).to_string(), "BaBa");
        assert!(InfiniteWord::new(&ReducedWord::empty(), &ReducedWord::parse("aBA", 2).unwrap()).is_err());
    }
}
