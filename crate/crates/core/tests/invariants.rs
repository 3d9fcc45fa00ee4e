//! Cross-module property tests: the algebraic identities the experiment
//! pipeline leans on.

use proptest::prelude::*;

use fgadyn_core::auto::{tribonacci, Automorphism};
use fgadyn_core::currents::{proj_distance, CurrentVector};
use fgadyn_core::dynamics::{orbit, OrbitVerdict};
use fgadyn_core::graph::GraphSelfMap;
use fgadyn_core::words::{occurrences, reduced_words_of_length, CyclicWord, Letter, Word};

const RANK: u32 = 3;

fn letter() -> impl Strategy<Value = Letter> {
    (1..=RANK, any::<bool>()).prop_map(|(i, inv)| Letter::new(i, inv))
}

fn raw_letters(max: usize) -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec(letter(), 0..max)
}

fn word(max: usize) -> impl Strategy<Value = Word> {
    raw_letters(max).prop_map(|raw| Word::reduce(RANK, raw))
}

fn class(max: usize) -> impl Strategy<Value = CyclicWord> {
    raw_letters(max)
        .prop_filter_map("trivial class", |raw| {
            CyclicWord::canonical(&Word::reduce(RANK, raw)).ok()
        })
}

/// Random automorphism as a product of elementary Nielsen moves, inverse
/// tracked alongside.
fn automorphism(moves: usize) -> impl Strategy<Value = Automorphism> {
    prop::collection::vec((0..RANK, 0..RANK, any::<bool>()), 1..moves).prop_map(|ms| {
        let mut phi = Automorphism::identity(RANK);
        for (i, j, inv) in ms {
            let elem = elementary(i, j, inv);
            phi = phi.compose(&elem).expect("equal ranks");
        }
        phi
    })
}

/// Elementary automorphisms: a transposition, an inversion, or a right
/// multiplication x_i ↦ x_i·x_j^±1.
fn elementary(i: u32, j: u32, inv: bool) -> Automorphism {
    let (i, j) = (i + 1, j + 1);
    let gen = |k: u32| Word::generator(RANK, k);
    if i == j {
        // Invert generator i.
        let mut images: Vec<Word> = (1..=RANK).map(gen).collect();
        images[(i - 1) as usize] = gen(i).inverse();
        Automorphism::new(RANK, images.clone(), images, "inv").expect("involution")
    } else if inv {
        // Swap generators i and j.
        let mut images: Vec<Word> = (1..=RANK).map(gen).collect();
        images.swap((i - 1) as usize, (j - 1) as usize);
        Automorphism::new(RANK, images.clone(), images, "swap").expect("involution")
    } else {
        let mut images: Vec<Word> = (1..=RANK).map(gen).collect();
        images[(i - 1) as usize] = gen(i).concat(&gen(j));
        let mut inverses: Vec<Word> = (1..=RANK).map(gen).collect();
        inverses[(i - 1) as usize] = gen(i).concat(&gen(j).inverse());
        Automorphism::new(RANK, images, inverses, "mul").expect("elementary")
    }
}

proptest! {
    #[test]
    fn reduction_is_idempotent_and_shrinks_evenly(raw in raw_letters(60)) {
        let once = Word::reduce(RANK, raw.clone());
        let twice = Word::reduce(RANK, once.letters().iter().copied());
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.len() <= raw.len());
        prop_assert_eq!((raw.len() - once.len()) % 2, 0);
    }

    #[test]
    fn cyclic_canonical_kills_conjugation(u in word(12), h in class(14)) {
        let conj = u.concat(&h.as_word()).concat(&u.inverse());
        prop_assert_eq!(CyclicWord::canonical(&conj).unwrap(), h);
    }

    #[test]
    fn occurrences_orientation_symmetric(pat in word(4), h in class(14)) {
        prop_assume!(!pat.is_empty());
        prop_assert_eq!(
            occurrences(&pat, &h).unwrap(),
            occurrences(&pat.inverse(), &h).unwrap()
        );
    }

    #[test]
    fn occurrence_window_sums_match_length(h in class(14), window in 1usize..=4) {
        prop_assume!(window <= h.len());
        let mut total = 0;
        for pat in reduced_words_of_length(RANK, window) {
            if pat > pat.inverse() {
                continue;
            }
            total += occurrences(&pat, &h).unwrap();
        }
        prop_assert_eq!(total, h.len() as u64);
    }

    #[test]
    fn kolmogorov_consistency(h in class(16), window in 1u32..=4) {
        prop_assert!(CurrentVector::from_class(&h, window).check_kolmogorov());
    }

    #[test]
    fn pushforward_naturality_exact(h in class(12), phi in automorphism(8), window in 1u32..=3) {
        let direct = CurrentVector::from_class(&phi.apply_class(&h).unwrap(), window);
        let pushed = CurrentVector::from_class(&h, window).push_forward(&phi).unwrap();
        prop_assert_eq!(direct.counts(), pushed.counts());
        prop_assert_eq!(direct.simplicial_length(), pushed.simplicial_length());
    }

    #[test]
    fn apply_respects_composition(phi in automorphism(6), psi in automorphism(6), w in word(16)) {
        let composed = phi.compose(&psi).unwrap();
        prop_assert_eq!(
            composed.apply(&w).unwrap(),
            phi.apply(&psi.apply(&w).unwrap()).unwrap()
        );
    }

    #[test]
    fn abelianization_is_multiplicative(phi in automorphism(6), psi in automorphism(6)) {
        let lhs = phi.compose(&psi).unwrap().abelianization(None);
        // Rows hold generator images, so matrices compose in reverse order.
        let rhs = psi.abelianization(None).multiply(&phi.abelianization(None));
        prop_assert_eq!(lhs, rhs);
        prop_assert!([1, -1].contains(&phi.abelianization(None).determinant()));
    }

    #[test]
    fn proj_distance_is_a_metric_on_window_data(
        a in class(12), b in class(12), c in class(12), window in 1u32..=3
    ) {
        let va = CurrentVector::from_class(&a, window).frequencies();
        let vb = CurrentVector::from_class(&b, window).frequencies();
        let vc = CurrentVector::from_class(&c, window).frequencies();
        let dab = proj_distance(&va, &vb).unwrap();
        let dba = proj_distance(&vb, &va).unwrap();
        prop_assert!((dab - dba).abs() < 1e-12);
        let dac = proj_distance(&va, &vc).unwrap();
        let dcb = proj_distance(&vc, &vb).unwrap();
        prop_assert!(dab <= dac + dcb + 1e-12);
        prop_assert!(proj_distance(&va, &va).unwrap() == 0.0);
    }

    #[test]
    fn scale_is_projectively_invisible(h in class(10), k in 1u64..6, window in 1u32..=3) {
        let v = CurrentVector::from_class(&h, window);
        let d = proj_distance(&v.frequencies(), &v.scale(k).frequencies()).unwrap();
        prop_assert!(d == 0.0);
    }

    #[test]
    fn orbit_periodicity_reverifies(psi in automorphism(6)) {
        // ψ·shear·ψ⁻¹ fixes ψ(a) — a guaranteed periodic fixture.
        let shear = Automorphism::with_synthesized_inverse(
            RANK,
            vec![
                Word::parse(RANK, "a").unwrap(),
                Word::parse(RANK, "ba").unwrap(),
                Word::parse(RANK, "c").unwrap(),
            ],
            "shear",
        )
        .unwrap();
        let conj = shear.conjugate_by(&psi).unwrap();
        let seed = psi.apply_class(&CyclicWord::parse(RANK, "a").unwrap()).unwrap();
        let record = orbit(&conj, &seed, 4, 1 << 24, None).unwrap();
        match record.verdict {
            OrbitVerdict::PeriodicFound { class, period, .. } => {
                let mut check = class.clone();
                for _ in 0..period {
                    check = conj.apply_class(&check).unwrap();
                }
                prop_assert_eq!(check, class);
            }
            other => prop_assert!(false, "expected periodic verdict, got {other:?}"),
        }
    }

    #[test]
    fn map_path_iterates_compose(path in word(10), j in 1u32..4, k in 1u32..4) {
        let f = GraphSelfMap::rose_map(&tribonacci());
        let both = f.map_path(&path, j + k, 1 << 24).unwrap();
        let stepped = f
            .map_path(&f.map_path(&path, j, 1 << 24).unwrap(), k, 1 << 24)
            .unwrap();
        prop_assert_eq!(both, stepped);
    }
}

#[test]
fn bcc_empirical_monotone_and_bounded_for_random_automorphisms() {
    // Deterministic small sweep; the heavyweight exhaustive BCL check lives
    // in the acceptance suite.
    let fixtures = [
        tribonacci(),
        tribonacci().inverse(),
        tribonacci().power(2),
    ];
    for phi in fixtures {
        let f = GraphSelfMap::rose_map(&phi);
        let upper = f.bcc_upper();
        let mut last = 0;
        for l in 1..=3 {
            let v = f.bcc_empirical(l, 1 << 26).unwrap();
            assert!(v >= last);
            assert!(v <= upper);
            last = v;
        }
    }
}
