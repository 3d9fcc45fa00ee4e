//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p fgadyn-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines; every tolerance is pinned in code.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fgadyn_core::auto::{tribonacci, Automorphism};
use fgadyn_core::currents::{proj_distance, CurrentVector};
use fgadyn_core::dynamics::{
    atoroidal_scan, gns_experiment, ns_experiment, pingpong, subgroup_scan, ExperimentConfig,
    GnsSeedVerdict, ScanOutcome, SubgroupOutcome,
};
use fgadyn_core::graph::GraphSelfMap;
use fgadyn_core::strata::{maximal_filtration, NegEdgeKind, StrataConfig, StratumClass, TransitionMatrix};
use fgadyn_core::words::{reduced_words_of_length, CyclicWord, Letter, Word};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn wedge() -> Automorphism {
    tribonacci().free_product(&Automorphism::identity(1))
}

fn pass(criterion: u32, name: &str, started: Instant) {
    println!(
        "ACCEPTANCE {criterion} ({name}): PASS in {:.2?}",
        started.elapsed()
    );
}

// -- shared randomized-input helpers -----------------------------------------

fn random_raw(rng: &mut ChaCha8Rng, rank: u32, max_len: usize) -> Vec<Letter> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| Letter::from_code(rng.gen_range(0..2 * rank as usize)))
        .collect()
}

fn random_class(rng: &mut ChaCha8Rng, rank: u32, max_len: usize) -> CyclicWord {
    loop {
        let word = Word::reduce(rank, random_raw(rng, rank, max_len));
        if let Ok(class) = CyclicWord::canonical(&word) {
            return class;
        }
    }
}

/// Random automorphism as a product of verified elementary Nielsen moves.
fn random_automorphism(rng: &mut ChaCha8Rng, rank: u32, moves: usize) -> Automorphism {
    let gen = |k: u32| Word::generator(rank, k);
    let mut phi = Automorphism::identity(rank);
    for _ in 0..rng.gen_range(1..=moves) {
        let i = rng.gen_range(1..=rank);
        let j = rng.gen_range(1..=rank);
        let elem = if i == j {
            let mut images: Vec<Word> = (1..=rank).map(gen).collect();
            images[(i - 1) as usize] = gen(i).inverse();
            Automorphism::new(rank, images.clone(), images, "inv").expect("involution")
        } else if rng.gen_bool(0.3) {
            let mut images: Vec<Word> = (1..=rank).map(gen).collect();
            images.swap((i - 1) as usize, (j - 1) as usize);
            Automorphism::new(rank, images.clone(), images, "swap").expect("involution")
        } else {
            let mut images: Vec<Word> = (1..=rank).map(gen).collect();
            images[(i - 1) as usize] = gen(i).concat(&gen(j));
            let mut inverses: Vec<Word> = (1..=rank).map(gen).collect();
            inverses[(i - 1) as usize] = gen(i).concat(&gen(j).inverse());
            Automorphism::new(rank, images, inverses, "mul").expect("elementary")
        };
        phi = phi.compose(&elem).expect("equal ranks");
    }
    phi
}

// -- criterion 1 --------------------------------------------------------------

/// Independent oracle: bisection on the characteristic polynomial
/// x³ − x² − x − 1 of the tribonacci transition matrix.
fn tribonacci_root_by_bisection() -> f64 {
    let p = |x: f64| x * x * x - x * x - x - 1.0;
    let (mut lo, mut hi) = (1.5, 2.0);
    assert!(p(lo) < 0.0 && p(hi) > 0.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_1_perron_frobenius() {
    let started = Instant::now();
    let matrix = TransitionMatrix::from_rows(&[vec![1, 1, 0], vec![1, 0, 1], vec![1, 0, 0]]);
    let lambda = matrix.pf_eigenvalue(1e-10, 1_000_000).expect("irreducible");
    let oracle = tribonacci_root_by_bisection();
    assert!(
        (lambda - oracle).abs() < 1e-6,
        "power iteration {lambda} vs bisection oracle {oracle}"
    );
    assert!((lambda - 1.839287).abs() < 1e-6);
    assert!(started.elapsed() < Duration::from_secs(1), "must finish under 1 s");
    pass(1, "perron-frobenius", started);
}

// -- criterion 2 --------------------------------------------------------------

fn random_irreducible_matrix(rng: &mut ChaCha8Rng) -> (Vec<Vec<u64>>, bool) {
    let n = rng.gen_range(1..=5usize);
    let mut rows = vec![vec![0u64; n]; n];
    // A full cycle guarantees irreducibility.
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    for i in 0..n {
        rows[perm[i]][perm[(i + 1) % n]] = 1;
    }
    let permutation_only = rng.gen_bool(0.5);
    if !permutation_only {
        for _ in 0..rng.gen_range(1..=3) {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            rows[i][j] += rng.gen_range(1..=2);
        }
    }
    (rows, permutation_only)
}

#[test]
fn criterion_2_stratum_classification() {
    let started = Instant::now();
    let config = StrataConfig::default();

    let trib = maximal_filtration(&GraphSelfMap::rose_map(&tribonacci()), &config);
    assert_eq!(trib.strata.len(), 1, "tribonacci is a single stratum");
    assert!(matches!(trib.strata[0].class, StratumClass::Eg { .. }));

    let wedge = maximal_filtration(&GraphSelfMap::rose_map(&wedge()), &config);
    assert_eq!(wedge.strata.len(), 2);
    assert_eq!(wedge.strata[0].edges, vec![0, 1, 2]);
    assert!(matches!(wedge.strata[0].class, StratumClass::Eg { .. }));
    assert_eq!(wedge.strata[1].edges, vec![3]);
    assert_eq!(
        wedge.strata[1].class,
        StratumClass::Neg {
            edge_kind: Some(NegEdgeKind::Fixed)
        }
    );

    // Exact λ = 1 classifier against the numeric eigenvalue.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..50 {
        let (rows, permutation_only) = random_irreducible_matrix(&mut rng);
        let m = TransitionMatrix::from_rows(&rows);
        assert!(m.is_irreducible(), "case {case}: {rows:?}");
        let exact = m.is_permutation_on_support();
        assert_eq!(exact, permutation_only, "case {case}: {rows:?}");
        let lambda = m.pf_eigenvalue(1e-10, 1_000_000).expect("irreducible");
        if exact {
            assert!((lambda - 1.0).abs() < 1e-8, "case {case}: λ = {lambda}");
        } else {
            assert!(lambda > 1.0 + 1e-8, "case {case}: λ = {lambda}");
        }
    }
    pass(2, "stratum-classification", started);
}

// -- criterion 3 --------------------------------------------------------------

#[test]
fn criterion_3_invariant_suites() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rank = 3;

    // Reduction idempotence, 1000 cases.
    for _ in 0..1000 {
        let raw = random_raw(&mut rng, rank, 50);
        let once = Word::reduce(rank, raw.clone());
        let twice = Word::reduce(rank, once.letters().iter().copied());
        assert_eq!(once, twice);
        assert!(once.len() <= raw.len());
        assert_eq!((raw.len() - once.len()) % 2, 0);
    }

    // Cyclic-canonical conjugation invariance, 1000 cases.
    for _ in 0..1000 {
        let h = random_class(&mut rng, rank, 14);
        let u = Word::reduce(rank, random_raw(&mut rng, rank, 10));
        let conj = u.concat(&h.as_word()).concat(&u.inverse());
        assert_eq!(CyclicWord::canonical(&conj).unwrap(), h);
    }

    // Occurrence/length identity Σ_{|γ|=W} ⟨γ, η_h⟩ = |h|, 1000 cases.
    for _ in 0..1000 {
        let h = random_class(&mut rng, rank, 12);
        let window = rng.gen_range(1..=4.min(h.len()));
        let v = CurrentVector::from_class(&h, window as u32);
        let total: u64 = v
            .counts()
            .iter()
            .filter(|(p, _)| p.len() == window)
            .map(|(_, &c)| c)
            .sum();
        assert_eq!(total, h.len() as u64);
    }

    // Kolmogorov consistency, 1000 cases over windows up to 4.
    for _ in 0..1000 {
        let h = random_class(&mut rng, rank, 16);
        let window = rng.gen_range(1..=4);
        assert!(CurrentVector::from_class(&h, window).check_kolmogorov());
    }

    // Push-forward naturality, exact equality, 1000 cases.
    for _ in 0..1000 {
        let h = random_class(&mut rng, rank, 10);
        let phi = random_automorphism(&mut rng, rank, 8);
        let window = rng.gen_range(1..=3);
        let direct = CurrentVector::from_class(&phi.apply_class(&h).unwrap(), window);
        let pushed = CurrentVector::from_class(&h, window)
            .push_forward(&phi)
            .unwrap();
        assert_eq!(direct.counts(), pushed.counts());
        assert_eq!(direct.simplicial_length(), pushed.simplicial_length());
    }

    // Bounded cancellation with the certified upper constant, exhaustively
    // over tight pairs with |γ₁|, |γ₂| ≤ 4, on 20 random automorphisms.
    for case in 0..20 {
        let phi = random_automorphism(&mut rng, rank, 8);
        let f = GraphSelfMap::rose_map(&phi);
        let c = f.bcc_upper() as i64;
        let mut paths: Vec<Word> = Vec::new();
        for len in 1..=4 {
            paths.extend(reduced_words_of_length(rank, len));
        }
        let images: Vec<Word> = paths
            .iter()
            .map(|p| f.map_path(p, 1, u64::MAX).unwrap())
            .collect();
        let empirical = f.bcc_empirical(4, 1 << 32).unwrap();
        assert!(empirical as i64 <= c, "case {case}");
        for (i, p1) in paths.iter().enumerate() {
            let last = *p1.letters().last().unwrap();
            for (j, p2) in paths.iter().enumerate() {
                if p2.letters()[0] == last.inverse() {
                    continue;
                }
                let joined = images[i].concat(&images[j]);
                let lhs = joined.len() as i64;
                let rhs = images[i].len() as i64 + images[j].len() as i64 - 2 * c;
                assert!(
                    lhs >= rhs,
                    "case {case}: |[f({p1}·{p2})]| = {lhs} < {rhs}"
                );
            }
        }
    }

    pass(3, "invariant-suites", started);
}

// -- criterion 4 --------------------------------------------------------------

/// Independent brute force: iterate every raw reduced word of length ≤ `max`
/// and ask whether its class returns to itself within `k` steps.
fn brute_force_self_periodic(
    phi: &Automorphism,
    max: usize,
    k: u32,
    cap: u64,
) -> Vec<(CyclicWord, u32)> {
    let mut found = Vec::new();
    for len in 1..=max {
        for word in reduced_words_of_length(phi.rank(), len) {
            let Ok(class) = CyclicWord::canonical(&word) else {
                continue;
            };
            let mut current = class.clone();
            for step in 1..=k {
                current = phi.apply_class(&current).unwrap();
                if current.len() as u64 > cap {
                    break;
                }
                if current == class {
                    found.push((class.clone(), step));
                    break;
                }
            }
        }
    }
    found
}

#[test]
fn criterion_4_atoroidality_scan() {
    let started = Instant::now();

    let trib = atoroidal_scan(&tribonacci(), 6, 20, 100_000, u64::MAX).unwrap();
    assert!(
        matches!(trib.outcome, ScanOutcome::NonePeriodicUpTo),
        "tribonacci must scan clean at L=6, K=20"
    );

    // Cross-check against the independent brute force at L = 4.
    let brute = brute_force_self_periodic(&tribonacci(), 4, 20, 100_000);
    assert!(brute.is_empty(), "brute force found {brute:?}");
    let small = atoroidal_scan(&tribonacci(), 4, 20, 100_000, u64::MAX).unwrap();
    assert_eq!(small.periodic_classes.len(), brute.len());

    let shear = Automorphism::new(
        2,
        vec![Word::parse(2, "a").unwrap(), Word::parse(2, "ba").unwrap()],
        vec![Word::parse(2, "a").unwrap(), Word::parse(2, "bA").unwrap()],
        "shear",
    )
    .unwrap();
    let shear_verdict = atoroidal_scan(&shear, 4, 10, 20_000, u64::MAX).unwrap();
    match &shear_verdict.outcome {
        ScanOutcome::PeriodicClassFound { class, period } => {
            assert_eq!(*class, CyclicWord::parse(2, "a").unwrap());
            assert_eq!(*period, 1);
        }
        other => panic!("shear must report a fixed class, got {other:?}"),
    }

    let wedge_verdict = atoroidal_scan(&wedge(), 5, 20, 20_000, u64::MAX).unwrap();
    let d = CyclicWord::parse(4, "d").unwrap();
    match &wedge_verdict.outcome {
        ScanOutcome::PeriodicClassFound { class, period } => {
            assert_eq!(*class, d);
            assert_eq!(*period, 1);
        }
        other => panic!("wedge must report (d), got {other:?}"),
    }
    assert!(!wedge_verdict.periodic_classes.is_empty());
    for (class, _) in &wedge_verdict.periodic_classes {
        assert!(class.is_power_of(&d), "found non-power {class}");
    }
    assert_eq!(wedge_verdict.primitive_shape, Some(d));

    assert!(
        started.elapsed() < Duration::from_secs(60),
        "scan criterion must finish under 60 s, took {:.2?}",
        started.elapsed()
    );
    pass(4, "atoroidality-scan", started);
}

// -- criterion 5 --------------------------------------------------------------

#[test]
fn criterion_5_north_south() {
    let started = Instant::now();
    let config = ExperimentConfig {
        window: 2,
        iterations: 25,
        length_cap: 100_000_000,
        tolerance: 0.02,
        rng_seed: 5,
        seed_count: 5,
        max_seed_len: 6,
        ..Default::default()
    };
    let report = ns_experiment(&tribonacci(), &config).unwrap();
    assert_eq!(report.seeds.len(), 5);
    for seed in &report.seeds {
        assert!(!seed.capped, "length cap 1e8 must suffice");
        assert!(
            seed.cauchy_residual < 0.01,
            "seed {} residual {}",
            seed.seed,
            seed.cauchy_residual
        );
    }
    for row in &report.pairwise_distances {
        for &d in row {
            assert!(d < 0.02, "pairwise seed-limit distance {d}");
        }
    }
    // Push-forward stability of the limit estimates, within the residual.
    let residual = report.estimate.residual;
    assert!(
        report.stability_gap <= residual + 1e-12,
        "stability {} vs residual {residual}",
        report.stability_gap
    );
    assert!(
        started.elapsed() < Duration::from_secs(300),
        "north-south criterion must finish under 5 min, took {:.2?}",
        started.elapsed()
    );
    pass(5, "north-south", started);
}

// -- criterion 6 --------------------------------------------------------------

#[test]
fn criterion_6_generalized_north_south() {
    let started = Instant::now();
    let phi = wedge();
    let config = ExperimentConfig {
        window: 2,
        iterations: 20,
        seed_count: 10,
        max_seed_len: 6,
        rng_seed: 6,
        ..Default::default()
    };

    // η_d is fixed with exact counts.
    let d = CyclicWord::parse(4, "d").unwrap();
    let eta = CurrentVector::from_class(&d, config.window);
    assert_eq!(eta.push_forward(&phi).unwrap(), eta);

    let report = gns_experiment(&phi, &config).unwrap();
    assert!(report.marked_current_fixed_exactly);
    assert_eq!(report.marked_generator, 4);
    assert_eq!(report.seeds.len(), 10);
    assert_eq!(report.inconclusive_count, 0, "every seed must resolve");
    assert_eq!(report.forward_count + report.backward_count, 10);
    for seed in &report.seeds {
        assert!(!seed.seed.is_power_of(&d));
        if matches!(seed.verdict, GnsSeedVerdict::ForwardToPlus { .. }) {
            let last = *seed.marked_fractions.last().unwrap();
            assert!(
                last < 0.05,
                "seed {} ends with marked fraction {last}",
                seed.seed
            );
            // Eventually monotone nonincreasing: check the second half.
            let tail = &seed.marked_fractions[seed.marked_fractions.len() / 2..];
            for pair in tail.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-12,
                    "seed {}: fractions not eventually nonincreasing: {tail:?}",
                    seed.seed
                );
            }
        }
    }
    pass(6, "generalized-north-south", started);
}

// -- criterion 7 --------------------------------------------------------------

#[test]
fn criterion_7_pingpong() {
    let started = Instant::now();
    let text = std::fs::read_to_string(fixture("pingpong.auto")).unwrap();
    let autos = fgadyn_core::files::parse_automorphisms(&text).unwrap();
    let (phi, psi) = (&autos[0], &autos[1]);

    // φ alone is almost atoroidal: exactly the powers of (d) are periodic.
    let alone = atoroidal_scan(phi, 5, 20, 20_000, u64::MAX).unwrap();
    match &alone.outcome {
        ScanOutcome::PeriodicClassFound { class, period } => {
            assert_eq!(*class, CyclicWord::parse(4, "d").unwrap());
            assert_eq!(*period, 1);
        }
        other => panic!("φ alone must report (d), got {other:?}"),
    }

    let product = pingpong(phi, psi, 5, 5).unwrap();
    let verdict = atoroidal_scan(&product, 5, 20, 20_000, u64::MAX).unwrap();
    assert!(
        matches!(verdict.outcome, ScanOutcome::NonePeriodicUpTo),
        "ping-pong product must scan clean, got {:?}",
        verdict.outcome
    );
    pass(7, "pingpong", started);
}

// -- criterion 8 --------------------------------------------------------------

#[test]
fn criterion_8_subgroup_scan() {
    let started = Instant::now();

    // Singleton {a ↦ a, b ↦ ba}: fixed class (a), immediately.
    let singleton_start = Instant::now();
    let shear = Automorphism::new(
        2,
        vec![Word::parse(2, "a").unwrap(), Word::parse(2, "ba").unwrap()],
        vec![Word::parse(2, "a").unwrap(), Word::parse(2, "bA").unwrap()],
        "shear",
    )
    .unwrap();
    let report = subgroup_scan(&[shear], 2, 4, 10, 20_000, 64, u64::MAX).unwrap();
    match &report.outcome {
        SubgroupOutcome::FiniteOrbitFound { class, orbit } => {
            assert_eq!(*class, CyclicWord::parse(2, "a").unwrap());
            assert_eq!(orbit.len(), 1);
        }
        other => panic!("singleton must find a fixed class, got {other:?}"),
    }
    assert!(
        singleton_start.elapsed() < Duration::from_secs(1),
        "singleton case must finish under 1 s"
    );

    // The rank-2 abelian pair on F_6.
    let text = std::fs::read_to_string(fixture("abelian_pair_f6.auto")).unwrap();
    let generators = fgadyn_core::files::parse_automorphisms(&text).unwrap();
    assert_eq!(generators.len(), 2);
    let report = subgroup_scan(&generators, 2, 5, 20, 20_000, 64, u64::MAX).unwrap();
    match &report.outcome {
        SubgroupOutcome::EmpiricalAtoroidalFound {
            product, verdict, ..
        } => {
            assert_eq!(product.len(), 2, "expected a length-2 product");
            assert!(matches!(verdict.outcome, ScanOutcome::NonePeriodicUpTo));
            assert_eq!(verdict.bounds.max_len, 5);
            assert_eq!(verdict.bounds.iterations, 20);
        }
        other => panic!("expected an empirically atoroidal product, got {other:?}"),
    }
    assert!(
        started.elapsed() < Duration::from_secs(600),
        "subgroup criterion must finish under 10 min, took {:.2?}",
        started.elapsed()
    );
    pass(8, "subgroup-scan", started);
}

// -- criterion 9 --------------------------------------------------------------

fn run_cli(args: &[&str]) -> String {
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_fgadyn"))
        .args(args)
        .output()
        .expect("run fgadyn");
    assert!(
        output.status.success(),
        "fgadyn {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf-8 records")
}

fn strip_timestamps(records: &str) -> String {
    records
        .lines()
        .map(|line| {
            let mut value: serde_json::Value = serde_json::from_str(line).expect("valid JSON");
            if let Some(map) = value.as_object_mut() {
                map.remove("timestamp");
            }
            serde_json::to_string(&value).expect("serialize")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_9_determinism() {
    let started = Instant::now();
    let file = fixture("tribonacci.auto");
    let file = file.to_str().unwrap();
    for args in [
        vec!["check", file],
        vec!["strata", file],
        vec!["orbit", file, "--seed-class", "ab", "--iters", "8"],
        vec!["scan", file, "--max-seed-len", "4", "--iters", "10"],
        vec![
            "ns", file, "--iters", "10", "--max-seed-len", "4", "--seed", "9",
        ],
    ] {
        let first = run_cli(&args);
        let second = run_cli(&args);
        assert_eq!(
            strip_timestamps(&first),
            strip_timestamps(&second),
            "records differ for {args:?}"
        );
        // Each record carries the run manifest id.
        let manifest_line: serde_json::Value =
            serde_json::from_str(first.lines().next().unwrap()).unwrap();
        let id = manifest_line["manifest_id"].as_str().unwrap();
        for line in first.lines() {
            let value: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(value["manifest_id"].as_str().unwrap(), id);
        }
    }
    pass(9, "determinism", started);
}
