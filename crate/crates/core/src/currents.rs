//! Finite-window coordinates of rational geodesic currents.
//!
//! A counting current `η_h` is recorded by the occurrence counts of every
//! reduced pattern up to a window length, one count per unordered pair
//! `{γ, γ⁻¹}`; the simplicial length is the total single-letter count.
//! Counting currents are unoriented (`η_h = η_{h⁻¹}`), so the pattern
//! representative is the lexicographically smaller of the pair.  Coordinates
//! are always taken in the rose marking.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::auto::{AutError, Automorphism};
use crate::words::{CyclicWord, Letter, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurrentError {
    #[error("window mismatch: {left} vs {right}")]
    WindowMismatch { left: u32, right: u32 },
    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: u32, right: u32 },
    #[error("current has no provenance class; push-forward needs one")]
    NoProvenance,
    #[error(transparent)]
    Automorphism(#[from] AutError),
}

/// Canonical representative of the unordered pair `{w, w⁻¹}`.
pub fn pattern_rep(w: &Word) -> Word {
    let inv = w.inverse();
    if inv < *w {
        inv
    } else {
        w.clone()
    }
}

/// All pattern representatives of length `1..=window`, in order.
pub fn pattern_reps(rank: u32, window: u32) -> Vec<Word> {
    let mut out = Vec::new();
    for len in 1..=window as usize {
        for w in crate::words::reduced_words_of_length(rank, len) {
            if w <= w.inverse() {
                out.push(w);
            }
        }
    }
    out
}

/// Occurrence-count coordinates of a rational current.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CurrentVector {
    rank: u32,
    window: u32,
    counts: BTreeMap<Word, u64>,
    simplicial_length: u64,
    provenance: Option<Provenance>,
}

/// The underlying class and scalar multiplier, kept so the current can be
/// pushed forward exactly.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Provenance {
    pub class: CyclicWord,
    pub multiplier: u64,
}

impl CurrentVector {
    /// Coordinates of the counting current `η_h` at the given window.  Each of
    /// the `|h|` cyclic positions contributes one subword per pattern length,
    /// read around the periodic extension of `h`.
    pub fn from_class(h: &CyclicWord, window: u32) -> CurrentVector {
        assert!(window >= 1, "window must be at least 1");
        let rank = h.rank();
        let letters = h.letters();
        let n = letters.len();
        let base = 2 * rank as usize;
        // Dense tally per pattern length while the code space is small,
        // sparse fallback otherwise.
        let dense_ok = (base as u128).pow(window) <= 1 << 24;
        let mut counts: BTreeMap<Word, u64> = BTreeMap::new();
        if dense_ok {
            let mut dense: Vec<Vec<u64>> = (1..=window)
                .map(|len| vec![0u64; base.pow(len)])
                .collect();
            for start in 0..n {
                let mut code = 0usize;
                for t in 0..window as usize {
                    code = code * base + letters[(start + t) % n].code();
                    dense[t][code] += 1;
                }
            }
            // Fold the dense tallies into per-pair representatives.
            for len in 1..=window as usize {
                for w in crate::words::reduced_words_of_length(rank, len) {
                    if w > w.inverse() {
                        continue;
                    }
                    let total = dense[len - 1][word_code(&w, base)]
                        + dense[len - 1][word_code(&w.inverse(), base)];
                    if total > 0 {
                        counts.insert(w, total);
                    }
                }
            }
        } else {
            for start in 0..n {
                for len in 1..=window as usize {
                    let sub = Word::reduce(
                        rank,
                        (0..len).map(|t| letters[(start + t) % n]),
                    );
                    debug_assert_eq!(sub.len(), len, "cyclic subwords are reduced");
                    *counts.entry(pattern_rep(&sub)).or_insert(0) += 1;
                }
            }
        }
        CurrentVector {
            rank,
            window,
            counts,
            simplicial_length: n as u64,
            provenance: Some(Provenance {
                class: h.clone(),
                multiplier: 1,
            }),
        }
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn simplicial_length(&self) -> u64 {
        self.simplicial_length
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Occurrence count `⟨pattern, μ⟩`; the pattern is canonicalized first.
    pub fn count(&self, pattern: &Word) -> u64 {
        self.counts
            .get(&pattern_rep(pattern))
            .copied()
            .unwrap_or(0)
    }

    /// Nonzero counts by pattern representative, in pattern order.
    pub fn counts(&self) -> &BTreeMap<Word, u64> {
        &self.counts
    }

    /// The current `k·μ`; frequencies are unchanged.
    pub fn scale(&self, k: u64) -> CurrentVector {
        assert!(k >= 1, "scale factor must be positive");
        CurrentVector {
            rank: self.rank,
            window: self.window,
            counts: self.counts.iter().map(|(w, &c)| (w.clone(), c * k)).collect(),
            simplicial_length: self.simplicial_length * k,
            provenance: self.provenance.as_ref().map(|p| Provenance {
                class: p.class.clone(),
                multiplier: p.multiplier * k,
            }),
        }
    }

    /// `φμ`, computed exactly through the provenance class:
    /// `φ η_{[g]} = η_{φ[g]}`.
    pub fn push_forward(&self, phi: &Automorphism) -> Result<CurrentVector, CurrentError> {
        let prov = self.provenance.as_ref().ok_or(CurrentError::NoProvenance)?;
        if phi.rank() != self.rank {
            return Err(CurrentError::RankMismatch {
                left: phi.rank(),
                right: self.rank,
            });
        }
        let image = phi.apply_class(&prov.class)?;
        Ok(CurrentVector::from_class(&image, self.window).scale(prov.multiplier))
    }

    /// Normalized coordinates `⟨γ, μ⟩ / |μ|`.
    pub fn frequencies(&self) -> FrequencyVector {
        let len = self.simplicial_length as f64;
        FrequencyVector {
            rank: self.rank,
            window: self.window,
            entries: self
                .counts
                .iter()
                .map(|(w, &c)| (w.clone(), c as f64 / len))
                .collect(),
        }
    }

    /// Fraction of the simplicial length carried by one generator.
    pub fn marked_letter_fraction(&self, generator: u32) -> f64 {
        let pat = Word::generator(self.rank, generator);
        self.count(&pat) as f64 / self.simplicial_length as f64
    }

    /// Kolmogorov consistency: every pattern strictly inside the window
    /// equals the sum of its reduced one-letter right extensions.
    pub fn check_kolmogorov(&self) -> bool {
        for len in 1..self.window as usize {
            for w in crate::words::reduced_words_of_length(self.rank, len) {
                if w > w.inverse() {
                    continue;
                }
                let mut sum = 0;
                let last = *w.letters().last().expect("patterns are nonempty");
                for code in 0..2 * self.rank as usize {
                    let x = Letter::from_code(code);
                    if x == last.inverse() {
                        continue;
                    }
                    let ext = Word::reduce(
                        self.rank,
                        w.letters().iter().copied().chain([x]),
                    );
                    sum += self.count(&ext);
                }
                if sum != self.count(&w) {
                    return false;
                }
            }
        }
        true
    }
}

fn word_code(w: &Word, base: usize) -> usize {
    w.letters().iter().fold(0, |acc, l| acc * base + l.code())
}

/// Normalized window coordinates; the observable for projective convergence.
#[derive(Clone, PartialEq, Debug)]
pub struct FrequencyVector {
    rank: u32,
    window: u32,
    entries: BTreeMap<Word, f64>,
}

impl FrequencyVector {
    /// Assemble from raw entries (keys are canonicalized representatives).
    pub fn from_entries(rank: u32, window: u32, entries: BTreeMap<Word, f64>) -> FrequencyVector {
        let entries = entries
            .into_iter()
            .map(|(w, v)| (pattern_rep(&w), v))
            .collect();
        FrequencyVector {
            rank,
            window,
            entries,
        }
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn entries(&self) -> &BTreeMap<Word, f64> {
        &self.entries
    }

    pub fn get(&self, pattern: &Word) -> f64 {
        self.entries
            .get(&pattern_rep(pattern))
            .copied()
            .unwrap_or(0.0)
    }

    /// Reindex entries letterwise; used to view a sub-factor vector inside a
    /// bigger rose.  `map[i]` is the 1-based target index of generator `i+1`.
    pub fn reindexed(&self, rank: u32, map: &[u32]) -> FrequencyVector {
        let entries = self
            .entries
            .iter()
            .map(|(w, &v)| {
                let relettered = Word::reduce(
                    rank,
                    w.letters()
                        .iter()
                        .map(|l| Letter::new(map[(l.index() - 1) as usize], l.is_inverse())),
                );
                (pattern_rep(&relettered), v)
            })
            .collect();
        FrequencyVector {
            rank,
            window: self.window,
            entries,
        }
    }
}

/// L1 distance between frequency vectors over the shared index set: a
/// pseudo-metric on currents, a metric on window frequency data.
pub fn proj_distance(u: &FrequencyVector, v: &FrequencyVector) -> Result<f64, CurrentError> {
    if u.window != v.window {
        return Err(CurrentError::WindowMismatch {
            left: u.window,
            right: v.window,
        });
    }
    if u.rank != v.rank {
        return Err(CurrentError::RankMismatch {
            left: u.rank,
            right: v.rank,
        });
    }
    let mut total = 0.0;
    let mut it_v = v.entries.iter().peekable();
    for (w, &uv) in &u.entries {
        while let Some((vw, &vv)) = it_v.peek() {
            if *vw < w {
                total += vv.abs();
                it_v.next();
            } else {
                break;
            }
        }
        if let Some((vw, &vv)) = it_v.peek() {
            if *vw == w {
                total += (uv - vv).abs();
                it_v.next();
                continue;
            }
        }
        total += uv.abs();
    }
    for (_, &vv) in it_v {
        total += vv.abs();
    }
    Ok(total)
}
