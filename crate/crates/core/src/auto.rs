//! Automorphisms of `F_N` as generator-image tables with verified inverses.
//!
//! An outer class is always represented here by a chosen automorphism; no
//! quotient by inner automorphisms is taken.  Construction checks both
//! round trips `φ(φ⁻¹(x_i)) = x_i` and `φ⁻¹(φ(x_i)) = x_i`.

use std::fmt;

use thiserror::Error;

use crate::words::{CyclicWord, Letter, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutError {
    #[error("rank mismatch: automorphism on F_{expected}, argument in F_{found}")]
    RankMismatch { expected: u32, found: u32 },
    #[error("image table has {found} entries for rank {expected}")]
    BadTableLength { expected: u32, found: usize },
    #[error("inverse verification failed on generator {generator} ({direction})")]
    InverseFailed {
        generator: u32,
        direction: &'static str,
    },
    #[error("no inverse found by Nielsen reduction within total image length {bound}")]
    NoInverseWithinBounds { bound: usize },
}

/// Substitute `table[i-1]` for each `x_i` of `w` and reduce.
fn apply_table(rank: u32, table: &[Word], w: &Word) -> Word {
    let mut letters: Vec<Letter> = Vec::with_capacity(w.len() * 2);
    for &l in w.letters() {
        let img = &table[(l.index() - 1) as usize];
        if l.is_inverse() {
            for &m in img.letters().iter().rev() {
                push_reduced(&mut letters, m.inverse());
            }
        } else {
            for &m in img.letters() {
                push_reduced(&mut letters, m);
            }
        }
    }
    Word::reduce(rank, letters)
}

fn push_reduced(buf: &mut Vec<Letter>, l: Letter) {
    if buf.last() == Some(&l.inverse()) {
        buf.pop();
    } else {
        buf.push(l);
    }
}

fn identity_table(rank: u32) -> Vec<Word> {
    (1..=rank).map(|i| Word::generator(rank, i)).collect()
}

#[derive(Clone, PartialEq, Eq)]
pub struct Automorphism {
    rank: u32,
    images: Vec<Word>,
    inverse_images: Vec<Word>,
    label: String,
}

impl Automorphism {
    /// Build from explicit image tables, verifying both inverse directions on
    /// every generator.
    pub fn new(
        rank: u32,
        images: Vec<Word>,
        inverse_images: Vec<Word>,
        label: impl Into<String>,
    ) -> Result<Automorphism, AutError> {
        if images.len() != rank as usize {
            return Err(AutError::BadTableLength {
                expected: rank,
                found: images.len(),
            });
        }
        if inverse_images.len() != rank as usize {
            return Err(AutError::BadTableLength {
                expected: rank,
                found: inverse_images.len(),
            });
        }
        for (table, dir) in [(&images, "images"), (&inverse_images, "inverse_images")] {
            for (i, w) in table.iter().enumerate() {
                if w.rank() != rank {
                    return Err(AutError::RankMismatch {
                        expected: rank,
                        found: w.rank(),
                    });
                }
                if w.is_empty() {
                    return Err(AutError::InverseFailed {
                        generator: i as u32 + 1,
                        direction: dir,
                    });
                }
            }
        }
        for i in 1..=rank {
            let gen = Word::generator(rank, i);
            if apply_table(rank, &images, &inverse_images[(i - 1) as usize]) != gen {
                return Err(AutError::InverseFailed {
                    generator: i,
                    direction: "images ∘ inverse_images",
                });
            }
            if apply_table(rank, &inverse_images, &images[(i - 1) as usize]) != gen {
                return Err(AutError::InverseFailed {
                    generator: i,
                    direction: "inverse_images ∘ images",
                });
            }
        }
        Ok(Automorphism {
            rank,
            images,
            inverse_images,
            label: label.into(),
        })
    }

    /// Internal constructor for tables that are correct by construction
    /// (composites of verified automorphisms).
    fn from_parts(rank: u32, images: Vec<Word>, inverse_images: Vec<Word>, label: String) -> Self {
        debug_assert!((1..=rank).all(|i| {
            let gen = Word::generator(rank, i);
            apply_table(rank, &images, &inverse_images[(i - 1) as usize]) == gen
                && apply_table(rank, &inverse_images, &images[(i - 1) as usize]) == gen
        }));
        Automorphism {
            rank,
            images,
            inverse_images,
            label,
        }
    }

    /// Build from images alone, synthesizing the inverse by bounded Nielsen
    /// reduction (total image length at most `NIELSEN_LENGTH_BOUND`).
    pub fn with_synthesized_inverse(
        rank: u32,
        images: Vec<Word>,
        label: impl Into<String>,
    ) -> Result<Automorphism, AutError> {
        let total: usize = images.iter().map(Word::len).sum();
        if total > NIELSEN_LENGTH_BOUND {
            return Err(AutError::NoInverseWithinBounds {
                bound: NIELSEN_LENGTH_BOUND,
            });
        }
        let inverse = nielsen_inverse(rank, &images).ok_or(AutError::NoInverseWithinBounds {
            bound: NIELSEN_LENGTH_BOUND,
        })?;
        Automorphism::new(rank, images, inverse, label)
    }

    pub fn identity(rank: u32) -> Automorphism {
        Automorphism::from_parts(rank, identity_table(rank), identity_table(rank), "id".into())
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn inverse_images(&self) -> &[Word] {
        &self.inverse_images
    }

    pub fn is_identity(&self) -> bool {
        self.images == identity_table(self.rank)
    }

    pub fn apply(&self, w: &Word) -> Result<Word, AutError> {
        if w.rank() != self.rank {
            return Err(AutError::RankMismatch {
                expected: self.rank,
                found: w.rank(),
            });
        }
        Ok(apply_table(self.rank, &self.images, w))
    }

    /// Action on conjugacy classes; representative-independent.
    pub fn apply_class(&self, h: &CyclicWord) -> Result<CyclicWord, AutError> {
        if h.rank() != self.rank {
            return Err(AutError::RankMismatch {
                expected: self.rank,
                found: h.rank(),
            });
        }
        let image = apply_table(self.rank, &self.images, &h.as_word());
        Ok(CyclicWord::canonical(&image).expect("automorphism preserves nontriviality"))
    }

    pub fn inverse(&self) -> Automorphism {
        Automorphism::from_parts(
            self.rank,
            self.inverse_images.clone(),
            self.images.clone(),
            format!("({})^-1", self.label),
        )
    }

    /// `self ∘ other`: `other` is applied first.
    pub fn compose(&self, other: &Automorphism) -> Result<Automorphism, AutError> {
        if other.rank != self.rank {
            return Err(AutError::RankMismatch {
                expected: self.rank,
                found: other.rank,
            });
        }
        let images = other
            .images
            .iter()
            .map(|w| apply_table(self.rank, &self.images, w))
            .collect();
        let inverse_images = self
            .inverse_images
            .iter()
            .map(|w| apply_table(self.rank, &other.inverse_images, w))
            .collect();
        Ok(Automorphism::from_parts(
            self.rank,
            images,
            inverse_images,
            format!("{}∘{}", self.label, other.label),
        ))
    }

    /// Power by repeated squaring on the image tables; negative exponents use
    /// the inverse table.
    pub fn power(&self, n: i64) -> Automorphism {
        if n < 0 {
            let mut p = self.inverse().power(-n);
            p.label = format!("{}^{}", self.label, n);
            return p;
        }
        let mut acc = Automorphism::identity(self.rank);
        let mut sq = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.compose(&sq).expect("equal ranks");
            }
            k >>= 1;
            if k > 0 {
                sq = sq.compose(&sq).expect("equal ranks");
            }
        }
        acc.label = format!("{}^{}", self.label, n);
        acc
    }

    /// Conjugate `self` by `other`: `other ∘ self ∘ other⁻¹`.
    pub fn conjugate_by(&self, other: &Automorphism) -> Result<Automorphism, AutError> {
        other.compose(self)?.compose(&other.inverse())
    }

    /// Integer abelianization matrix; entry `(i, j)` is the signed count of
    /// `x_j` in the image of `x_i`.
    pub fn abelianization(&self, modulus: Option<u64>) -> AbelianizationMatrix {
        let n = self.rank as usize;
        let mut entries = vec![0i64; n * n];
        for (i, img) in self.images.iter().enumerate() {
            for j in 1..=self.rank {
                let mut e = img.exponent_sum(j);
                if let Some(m) = modulus {
                    e = e.rem_euclid(m as i64);
                }
                entries[i * n + j as usize - 1] = e;
            }
        }
        AbelianizationMatrix {
            n,
            entries,
            modulus,
        }
    }

    /// Whether the abelianization is the identity mod 3, i.e. the class lies
    /// in `IA_N(Z/3)` where periodic behavior becomes fixed behavior.
    pub fn in_ia_mod3(&self) -> bool {
        self.abelianization(Some(3)).is_identity()
    }

    /// Block automorphism acting as `self` on the first `rank` generators and
    /// as `other` on the rest (indices shifted up).
    pub fn free_product(&self, other: &Automorphism) -> Automorphism {
        let rank = self.rank + other.rank;
        let shift = |w: &Word, by: u32| -> Word {
            Word::reduce(
                rank,
                w.letters()
                    .iter()
                    .map(|l| Letter::new(l.index() + by, l.is_inverse())),
            )
        };
        let mut images: Vec<Word> = self.images.iter().map(|w| shift(w, 0)).collect();
        images.extend(other.images.iter().map(|w| shift(w, self.rank)));
        let mut inverse_images: Vec<Word> =
            self.inverse_images.iter().map(|w| shift(w, 0)).collect();
        inverse_images.extend(other.inverse_images.iter().map(|w| shift(w, self.rank)));
        Automorphism::from_parts(
            rank,
            images,
            inverse_images,
            format!("{}*{}", self.label, other.label),
        )
    }
}

impl fmt::Debug for Automorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Automorphism[{}: ", self.label)?;
        for (i, w) in self.images.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}↦{}", Letter::generator(i as u32 + 1), w)?;
        }
        write!(f, "]")
    }
}

/// Integer matrix on `H_1(F_N)`, optionally reduced mod `modulus`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AbelianizationMatrix {
    n: usize,
    entries: Vec<i64>,
    modulus: Option<u64>,
}

impl AbelianizationMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> Option<u64> {
        self.modulus
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.n)
            .map(|i| self.entries[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.entry(i, j) == (i == j) as i64))
    }

    pub fn multiply(&self, other: &AbelianizationMatrix) -> AbelianizationMatrix {
        assert_eq!(self.n, other.n);
        assert_eq!(self.modulus, other.modulus);
        let n = self.n;
        let mut entries = vec![0i64; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entry(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    entries[i * n + j] += a * other.entry(k, j);
                }
            }
        }
        if let Some(m) = self.modulus {
            for e in &mut entries {
                *e = e.rem_euclid(m as i64);
            }
        }
        AbelianizationMatrix {
            n,
            entries,
            modulus: self.modulus,
        }
    }

    pub fn pow(&self, mut k: u64) -> AbelianizationMatrix {
        let mut acc = AbelianizationMatrix {
            n: self.n,
            entries: (0..self.n * self.n)
                .map(|t| (t % (self.n + 1) == 0) as i64)
                .collect(),
            modulus: self.modulus,
        };
        let mut sq = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.multiply(&sq);
            }
            k >>= 1;
            if k > 0 {
                sq = sq.multiply(&sq);
            }
        }
        acc
    }

    /// Least `k ≥ 1` with `M^k = I`, or `None` past the cap.
    pub fn order(&self, cap: u64) -> Option<u64> {
        let mut m = self.clone();
        for k in 1..=cap {
            if m.is_identity() {
                return Some(k);
            }
            m = m.multiply(self);
        }
        None
    }

    /// Integer determinant by fraction-free (Bareiss) elimination.  Only
    /// meaningful without a modulus.
    pub fn determinant(&self) -> i64 {
        assert!(self.modulus.is_none(), "determinant over the integers");
        let n = self.n;
        let mut m: Vec<i128> = self.entries.iter().map(|&e| e as i128).collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n {
            if m[k * n + k] == 0 {
                let Some(p) = (k + 1..n).find(|&r| m[r * n + k] != 0) else {
                    return 0;
                };
                for j in 0..n {
                    m.swap(k * n + j, p * n + j);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    m[i * n + j] =
                        (m[i * n + j] * m[k * n + k] - m[i * n + k] * m[k * n + j]) / prev;
                }
                m[i * n + k] = 0;
            }
            prev = m[k * n + k];
        }
        (sign * m[(n - 1) * n + (n - 1)]) as i64
    }
}

/// Total-image-length bound for the built-in Nielsen inverse helper.
pub const NIELSEN_LENGTH_BOUND: usize = 64;

/// Attempt to invert the endomorphism `x_i ↦ images[i]` by Nielsen reduction
/// of the image tuple.  Elementary moves right-compose with elementary
/// automorphisms; if the tuple reaches the standard basis the accumulated
/// product is the inverse.  Greedy strict descent with a bounded plateau
/// search; `None` means no inverse was found within bounds, not that none
/// exists.
pub fn nielsen_inverse(rank: u32, images: &[Word]) -> Option<Vec<Word>> {
    const PLATEAU_BUDGET: usize = 4096;
    let n = rank as usize;
    if images.len() != n || images.iter().any(Word::is_empty) {
        return None;
    }

    type State = (Vec<Word>, Vec<Word>); // (tuple, accumulated inverse table)

    fn total(t: &[Word]) -> usize {
        t.iter().map(Word::len).sum()
    }

    // All single Nielsen moves: x_i ↦ x_i·x_j^±1 or x_j^±1·x_i.
    fn moves(state: &State, rank: u32) -> Vec<State> {
        let (t, p) = state;
        let n = rank as usize;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for inv in [false, true] {
                    let factor = if inv { t[j].inverse() } else { t[j].clone() };
                    let pfac = if inv { p[j].inverse() } else { p[j].clone() };
                    // Right multiplication: T_i := T_i · T_j^±.
                    let mut t2 = t.clone();
                    t2[i] = t[i].concat(&factor);
                    if !t2[i].is_empty() {
                        let mut p2 = p.clone();
                        p2[i] = p[i].concat(&pfac);
                        out.push((t2, p2));
                    }
                    // Left multiplication: T_i := T_j^± · T_i.
                    let mut t3 = t.clone();
                    t3[i] = factor.concat(&t[i]);
                    if !t3[i].is_empty() {
                        let mut p3 = p.clone();
                        p3[i] = pfac.concat(&p[i]);
                        out.push((t3, p3));
                    }
                }
            }
        }
        out
    }

    // Finish once the tuple is a signed permutation of the basis.
    fn finish(state: &State, rank: u32) -> Option<Vec<Word>> {
        let (t, p) = state;
        let n = rank as usize;
        let mut inverse = vec![None; n];
        for (i, w) in t.iter().enumerate() {
            if w.len() != 1 {
                return None;
            }
            let l = w.letters()[0];
            let slot = (l.index() - 1) as usize;
            if inverse[slot].is_some() {
                return None;
            }
            // T_k = x_j^± means the accumulated table sends x_j to P_k^±.
            inverse[slot] = Some(if l.is_inverse() {
                p[i].inverse()
            } else {
                p[i].clone()
            });
        }
        inverse.into_iter().collect()
    }

    let start: State = (images.to_vec(), identity_table(rank));
    let mut frontier = vec![start];
    let mut best = total(images);
    let mut visited: std::collections::HashSet<Vec<Word>> = std::collections::HashSet::new();
    let mut plateau_used = 0usize;

    while let Some(state) = frontier.pop() {
        if let Some(inv) = finish(&state, rank) {
            return Some(inv);
        }
        if !visited.insert(state.0.clone()) {
            continue;
        }
        let here = total(&state.0);
        let mut candidates = moves(&state, rank);
        // Prefer strict descent; admit plateaus only within budget.
        candidates.retain(|(t, _)| total(t) <= here && total(t) <= NIELSEN_LENGTH_BOUND);
        candidates.sort_by_key(|(t, _)| std::cmp::Reverse(total(t)));
        for cand in candidates {
            let len = total(&cand.0);
            if len < best {
                best = len;
                frontier.push(cand);
            } else if plateau_used < PLATEAU_BUDGET {
                plateau_used += 1;
                frontier.push(cand);
            }
        }
    }
    None
}

/// The rank-3 substitution `a ↦ ab, b ↦ ac, c ↦ a`, the running example for
/// an exponentially growing automorphism.
pub fn tribonacci() -> Automorphism {
    let rank = 3;
    let images = vec![
        Word::parse(rank, "ab").unwrap(),
        Word::parse(rank, "ac").unwrap(),
        Word::parse(rank, "a").unwrap(),
    ];
    let inverse_images = vec![
        Word::parse(rank, "c").unwrap(),
        Word::parse(rank, "Ca").unwrap(),
        Word::parse(rank, "Cb").unwrap(),
    ];
    Automorphism::new(rank, images, inverse_images, "tribonacci").unwrap()
}
