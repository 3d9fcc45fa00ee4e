//! Words and conjugacy classes in a free group of finite rank.
//!
//! A [`Word`] is a freely reduced sequence of [`Letter`]s; a [`CyclicWord`] is
//! a cyclically reduced word stored in its canonical rotation and stands for a
//! conjugacy class.  The fixed total order on letters is
//! `x1 < x1⁻¹ < x2 < x2⁻¹ < …`, and the canonical rotation is the
//! lexicographically least one under that order.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    /// The input word reduces to the identity, which has no conjugacy class
    /// representative here.
    #[error("word is trivial after cyclic reduction")]
    TrivialClass,
    /// Occurrence counting needs a nonempty pattern.
    #[error("empty pattern")]
    EmptyPattern,
    #[error("malformed word literal at char {position}: {reason}")]
    BadLiteral { position: usize, reason: String },
}

/// A generator or its inverse: `x_k` is stored as `k`, `x_k⁻¹` as `-k`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter(i32);

impl Letter {
    /// The letter `x_index` (positive) or `x_index⁻¹`.
    pub fn new(index: u32, inverse: bool) -> Letter {
        assert!(index >= 1, "generator index is 1-based");
        let k = index as i32;
        Letter(if inverse { -k } else { k })
    }

    pub fn generator(index: u32) -> Letter {
        Letter::new(index, false)
    }

    /// 1-based generator index.
    pub fn index(self) -> u32 {
        self.0.unsigned_abs()
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    /// Dense code in `0..2N`, inverse letters odd.
    pub fn code(self) -> usize {
        (2 * (self.index() - 1) + self.is_inverse() as u32) as usize
    }

    pub fn from_code(code: usize) -> Letter {
        Letter::new(code as u32 / 2 + 1, code % 2 == 1)
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Letter {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.index(), self.is_inverse()).cmp(&(other.index(), other.is_inverse()))
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index() <= 26 {
            let c = (b'a' + (self.index() - 1) as u8) as char;
            if self.is_inverse() {
                write!(f, "{}", c.to_ascii_uppercase())
            } else {
                write!(f, "{c}")
            }
        } else if self.is_inverse() {
            write!(f, "X{}", self.index())
        } else {
            write!(f, "x{}", self.index())
        }
    }
}

fn reduce_into(buf: &mut Vec<Letter>, l: Letter) {
    if buf.last() == Some(&l.inverse()) {
        buf.pop();
    } else {
        buf.push(l);
    }
}

/// A freely reduced word in `F_N`.  The empty word is the identity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Word {
    rank: u32,
    letters: Vec<Letter>,
}

impl Word {
    /// Freely reduce a raw letter sequence.  Panics if a letter exceeds the
    /// rank; idempotent on already reduced input.
    pub fn reduce<I: IntoIterator<Item = Letter>>(rank: u32, raw: I) -> Word {
        assert!(rank >= 1, "rank must be at least 1");
        let mut letters = Vec::new();
        for l in raw {
            assert!(l.index() <= rank, "letter {l:?} outside rank {rank}");
            reduce_into(&mut letters, l);
        }
        Word { rank, letters }
    }

    pub fn identity(rank: u32) -> Word {
        Word::reduce(rank, [])
    }

    /// The single-letter word `x_index`.
    pub fn generator(rank: u32, index: u32) -> Word {
        Word::reduce(rank, [Letter::generator(index)])
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn inverse(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        assert_eq!(self.rank, other.rank, "rank mismatch in concat");
        let mut letters = self.letters.clone();
        for &l in &other.letters {
            reduce_into(&mut letters, l);
        }
        Word {
            rank: self.rank,
            letters,
        }
    }

    pub fn pow(&self, n: i32) -> Word {
        if n < 0 {
            return self.inverse().pow(-n);
        }
        let mut out = Word::identity(self.rank);
        for _ in 0..n {
            out = out.concat(self);
        }
        out
    }

    /// Signed exponent sum of generator `index` (used by abelianization).
    pub fn exponent_sum(&self, index: u32) -> i64 {
        self.letters
            .iter()
            .filter(|l| l.index() == index)
            .map(|l| if l.is_inverse() { -1 } else { 1 })
            .sum()
    }

    /// Parse a word literal: `a..z` with capitals for inverses when the rank
    /// is at most 26, `x3`/`X3` tokens otherwise.  The result is reduced.
    pub fn parse(rank: u32, literal: &str) -> Result<Word, WordError> {
        let mut letters = Vec::new();
        if rank <= 26 {
            for (pos, c) in literal.chars().enumerate() {
                let (index, inv) = if c.is_ascii_lowercase() {
                    (c as u32 - 'a' as u32 + 1, false)
                } else if c.is_ascii_uppercase() {
                    (c as u32 - 'A' as u32 + 1, true)
                } else {
                    return Err(WordError::BadLiteral {
                        position: pos,
                        reason: format!("unexpected character {c:?}"),
                    });
                };
                if index > rank {
                    return Err(WordError::BadLiteral {
                        position: pos,
                        reason: format!("generator {index} outside rank {rank}"),
                    });
                }
                letters.push(Letter::new(index, inv));
            }
        } else {
            let bytes = literal.as_bytes();
            let mut pos = 0;
            while pos < bytes.len() {
                let inv = match bytes[pos] {
                    b'x' => false,
                    b'X' => true,
                    c => {
                        return Err(WordError::BadLiteral {
                            position: pos,
                            reason: format!("expected x or X, found {:?}", c as char),
                        })
                    }
                };
                let start = pos + 1;
                let mut end = start;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                let index: u32 = literal[start..end].parse().map_err(|_| WordError::BadLiteral {
                    position: start,
                    reason: "missing generator index".into(),
                })?;
                if index == 0 || index > rank {
                    return Err(WordError::BadLiteral {
                        position: start,
                        reason: format!("generator {index} outside rank {rank}"),
                    });
                }
                letters.push(Letter::new(index, inv));
                pos = end;
            }
        }
        Ok(Word::reduce(rank, letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Word {
    /// Lexicographic under the letter order, with proper prefixes first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters.cmp(&other.letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for l in &self.letters {
            if self.rank <= 26 {
                write!(f, "{l:?}")?;
            } else if l.is_inverse() {
                write!(f, "X{}", l.index())?;
            } else {
                write!(f, "x{}", l.index())?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Index of the lexicographically least rotation; two-pointer scan, O(n) time
/// and O(1) space so it stays cheap on orbit words of 10^7+ letters.
fn least_rotation(letters: &[Letter]) -> usize {
    let n = letters.len();
    if n <= 1 {
        return 0;
    }
    let (mut i, mut j, mut k) = (0usize, 1usize, 0usize);
    while i < n && j < n && k < n {
        let a = letters[(i + k) % n];
        let b = letters[(j + k) % n];
        if a == b {
            k += 1;
            continue;
        }
        if a > b {
            i = i + k + 1;
        } else {
            j = j + k + 1;
        }
        if i == j {
            j += 1;
        }
        k = 0;
    }
    i.min(j)
}

/// A cyclically reduced word in canonical rotation: the representative of a
/// conjugacy class.  Orientation-sensitive; the identification `g ~ g⁻¹`
/// belongs to currents, not here.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CyclicWord {
    rank: u32,
    letters: Vec<Letter>,
}

impl CyclicWord {
    /// Canonical conjugacy-class representative of `w`: cyclically reduce,
    /// then rotate to the lexicographically least position.
    pub fn canonical(w: &Word) -> Result<CyclicWord, WordError> {
        let mut letters = w.letters.clone();
        // Strip u·v·u⁻¹ down to the cyclically reduced core.
        let mut lo = 0;
        let mut hi = letters.len();
        while hi - lo >= 2 && letters[lo] == letters[hi - 1].inverse() {
            lo += 1;
            hi -= 1;
        }
        letters.truncate(hi);
        letters.drain(..lo);
        if letters.is_empty() {
            return Err(WordError::TrivialClass);
        }
        let r = least_rotation(&letters);
        letters.rotate_left(r);
        Ok(CyclicWord {
            rank: w.rank,
            letters,
        })
    }

    pub fn parse(rank: u32, literal: &str) -> Result<CyclicWord, WordError> {
        CyclicWord::canonical(&Word::parse(rank, literal)?)
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// A reduced word reading the canonical rotation once.
    pub fn as_word(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.clone(),
        }
    }

    pub fn inverse(&self) -> CyclicWord {
        CyclicWord::canonical(&self.as_word().inverse()).expect("inverse of nontrivial class")
    }

    /// Stable 64-bit fingerprint (FNV-1a over letter codes), used for orbit
    /// cycle detection and in records.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for l in &self.letters {
            h ^= l.0 as u32 as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    /// Smallest cyclic root: returns `(root, e)` with `self = root^e`.
    pub fn primitive_root(&self) -> (CyclicWord, u32) {
        let n = self.letters.len();
        for p in 1..=n {
            if n % p != 0 {
                continue;
            }
            if (p..n).all(|t| self.letters[t] == self.letters[t - p]) {
                let root = CyclicWord::canonical(&Word {
                    rank: self.rank,
                    letters: self.letters[..p].to_vec(),
                })
                .expect("nonempty root");
                return (root, (n / p) as u32);
            }
        }
        unreachable!("p = n always divides");
    }

    /// Whether this class is `other^k` or `other^-k` for some `k ≥ 1`.
    pub fn is_power_of(&self, other: &CyclicWord) -> bool {
        let (root, _) = self.primitive_root();
        let (oroot, _) = other.primitive_root();
        root == oroot || root == oroot.inverse()
    }
}

impl fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_word())
    }
}

impl fmt::Debug for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.as_word())
    }
}

/// Occurrences of `pattern` and `pattern⁻¹` in `host` read cyclically.
///
/// The host is treated as a periodic bi-infinite word, so each of the `|host|`
/// cyclic positions starts exactly one subword of any fixed length; this keeps
/// the pairing meaningful even when the pattern is longer than the host.  A
/// reduced pattern never equals its own inverse, so nothing is counted twice.
pub fn occurrences(pattern: &Word, host: &CyclicWord) -> Result<u64, WordError> {
    if pattern.is_empty() {
        return Err(WordError::EmptyPattern);
    }
    assert_eq!(pattern.rank(), host.rank(), "rank mismatch in occurrences");
    let inv = pattern.inverse();
    Ok(count_cyclic(pattern.letters(), host) + count_cyclic(inv.letters(), host))
}

fn count_cyclic(pat: &[Letter], host: &CyclicWord) -> u64 {
    let h = host.letters();
    let n = h.len();
    let mut count = 0;
    for start in 0..n {
        if pat.iter().enumerate().all(|(t, &p)| h[(start + t) % n] == p) {
            count += 1;
        }
    }
    count
}

/// All reduced words of length `len` over rank `rank`, in lexicographic order.
pub fn reduced_words_of_length(rank: u32, len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut stack: Vec<Letter> = Vec::with_capacity(len);
    fn rec(rank: u32, len: usize, stack: &mut Vec<Letter>, out: &mut Vec<Word>) {
        if stack.len() == len {
            out.push(Word {
                rank,
                letters: stack.clone(),
            });
            return;
        }
        for code in 0..2 * rank as usize {
            let l = Letter::from_code(code);
            if stack.last() == Some(&l.inverse()) {
                continue;
            }
            stack.push(l);
            rec(rank, len, stack, out);
            stack.pop();
        }
    }
    rec(rank, len, &mut stack, &mut out);
    out
}

/// Canonical cyclic words of length `1..=max_len`, one per inversion pair
/// `{c, c⁻¹}`, ordered by length then lexicographically.  This is the seed
/// enumeration used by the scans.
pub fn enumerate_classes(rank: u32, max_len: usize) -> Vec<CyclicWord> {
    let mut out = Vec::new();
    for len in 1..=max_len {
        for w in reduced_words_of_length(rank, len) {
            // Skip words that are not cyclically reduced at the wraparound.
            if len > 1 && w.letters[0] == w.letters[len - 1].inverse() {
                continue;
            }
            let c = CyclicWord {
                rank,
                letters: w.letters,
            };
            // Keep only canonical rotations, and only the lesser of {c, c⁻¹}.
            if least_rotation(&c.letters) != 0 {
                continue;
            }
            if c > c.inverse() {
                continue;
            }
            out.push(c);
        }
    }
    out
}
