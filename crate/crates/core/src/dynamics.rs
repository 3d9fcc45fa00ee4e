//! Orbit iteration and the dynamical experiments: empirical atoroidality
//! scanning, north–south and generalized north–south convergence runs, growth
//! profiles, the ping-pong construction, and the two-phase subgroup scanner.
//!
//! Every "atoroidal" verdict here is a bound-qualified semi-decision: the
//! scans enumerate classes up to a length, iterate up to a power, and abort
//! on length caps rather than truncate.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::auto::{AutError, Automorphism};
use crate::currents::{proj_distance, CurrentError, CurrentVector, FrequencyVector};
use crate::words::{CyclicWord, Letter, Word};

#[derive(Debug, Error, Clone)]
pub enum DynError {
    #[error("not empirically atoroidal at the configured bounds: {class} has period {period}")]
    NotEmpiricallyAtoroidal { class: CyclicWord, period: u32 },
    #[error("restriction to the co-rank 1 factor is not empirically atoroidal: {class} has period {period}")]
    NotEmpiricallyAtoroidalOnA { class: CyclicWord, period: u32 },
    #[error("marked class ({marked}) is not fixed; its image is ({image})")]
    MarkedClassNotFixed { marked: CyclicWord, image: CyclicWord },
    #[error("image of generator {generator} leaves the co-rank 1 sub-rose")]
    SubFactorNotInvariant { generator: u32 },
    #[error("work budget {budget} exceeded after {spent} applications")]
    BudgetExceeded { budget: u64, spent: u64 },
    #[error(transparent)]
    Automorphism(#[from] AutError),
    #[error(transparent)]
    Current(#[from] CurrentError),
}

/// Shared experiment knobs.  All budgets must be positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Pattern window for current coordinates.
    pub window: u32,
    /// Orbit iterations (`n_max` for convergence runs, `K` for scans).
    pub iterations: u32,
    /// Abort bound on class length during orbit iteration.
    pub length_cap: u64,
    /// Convergence and clustering tolerance ε.
    pub tolerance: f64,
    /// Seed for all randomness in the experiment.
    pub rng_seed: u64,
    /// Number of random seed classes.
    pub seed_count: u32,
    /// Maximum length of random seed classes.
    pub max_seed_len: usize,
    /// Marked generator for generalized north–south runs (defaults to the
    /// last generator when absent).
    pub marked_generator: Option<u32>,
    /// Bounds for the empirical-atoroidality precondition scan.
    pub scan_max_len: usize,
    pub scan_iterations: u32,
    pub scan_length_cap: u64,
    /// Global work budget, counted in class applications.
    pub budget: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            window: 2,
            iterations: 25,
            length_cap: 100_000_000,
            tolerance: 0.01,
            rng_seed: 0,
            seed_count: 5,
            max_seed_len: 6,
            marked_generator: None,
            scan_max_len: 5,
            scan_iterations: 20,
            scan_length_cap: 20_000,
            budget: 50_000_000,
        }
    }
}

impl ExperimentConfig {
    fn assert_valid(&self) {
        assert!(self.window >= 1, "window must be positive");
        assert!(self.seed_count >= 1, "seed count must be positive");
        assert!(self.max_seed_len >= 1, "seed length bound must be positive");
        assert!(self.length_cap >= 1, "length cap must be positive");
        assert!(self.tolerance > 0.0, "tolerance must be positive");
        assert!(self.budget >= 1, "work budget must be positive");
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitStep {
    pub index: u32,
    pub class_fingerprint: u64,
    pub length: u64,
    pub frequencies: Option<FrequencyVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OrbitVerdict {
    /// A class on the orbit returns to itself; re-verified by re-application.
    PeriodicFound {
        class: CyclicWord,
        period: u32,
        entry: u32,
    },
    LengthCapExceeded { at_iteration: u32 },
    Completed,
}

#[derive(Clone, Debug)]
pub struct OrbitRecord {
    pub seed: CyclicWord,
    pub steps: Vec<OrbitStep>,
    pub verdict: OrbitVerdict,
}

/// Iterate `phi` on a class, recording lengths (and window frequencies when
/// requested), with cycle detection by canonical form.  A detected period is
/// re-verified by applying `phi` period-many times to the entry class.
pub fn orbit(
    phi: &Automorphism,
    seed: &CyclicWord,
    iterations: u32,
    length_cap: u64,
    window: Option<u32>,
) -> Result<OrbitRecord, DynError> {
    let mut seen: HashMap<CyclicWord, u32> = HashMap::new();
    let mut steps = Vec::with_capacity(iterations as usize + 1);
    let mut current = seed.clone();
    seen.insert(current.clone(), 0);
    steps.push(step_of(&current, 0, window));
    let mut verdict = OrbitVerdict::Completed;
    for n in 1..=iterations {
        let next = phi.apply_class(&current)?;
        if next.len() as u64 > length_cap {
            verdict = OrbitVerdict::LengthCapExceeded { at_iteration: n };
            break;
        }
        steps.push(step_of(&next, n, window));
        if let Some(&entry) = seen.get(&next) {
            let period = n - entry;
            let mut check = next.clone();
            for _ in 0..period {
                check = phi.apply_class(&check)?;
            }
            debug_assert_eq!(check, next, "periodicity re-verification");
            verdict = OrbitVerdict::PeriodicFound {
                class: next,
                period,
                entry,
            };
            break;
        }
        seen.insert(next.clone(), n);
        current = next;
    }
    Ok(OrbitRecord {
        seed: seed.clone(),
        steps,
        verdict,
    })
}

fn step_of(class: &CyclicWord, index: u32, window: Option<u32>) -> OrbitStep {
    OrbitStep {
        index,
        class_fingerprint: class.fingerprint(),
        length: class.len() as u64,
        frequencies: window.map(|w| CurrentVector::from_class(class, w).frequencies()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanBounds {
    pub max_len: usize,
    pub iterations: u32,
    pub length_cap: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScanOutcome {
    PeriodicClassFound { class: CyclicWord, period: u32 },
    NonePeriodicUpTo,
}

/// Bound-qualified scan verdict.  `NonePeriodicUpTo` means no periodic class
/// was found within the stated bounds, never a proof of atoroidality.
#[derive(Clone, Debug, PartialEq)]
pub struct AtoroidalVerdict {
    pub outcome: ScanOutcome,
    pub bounds: ScanBounds,
    /// Every periodic class found (entry class per orbit), deduplicated.
    pub periodic_classes: Vec<(CyclicWord, u32)>,
    /// When periodic classes exist and all of them are powers or inverses of
    /// a single primitive class, that class.
    pub primitive_shape: Option<CyclicWord>,
    pub classes_scanned: u64,
    pub capped_orbits: u64,
    /// Class applications spent.
    pub work: u64,
}

impl AtoroidalVerdict {
    pub fn is_empirically_atoroidal(&self) -> bool {
        matches!(self.outcome, ScanOutcome::NonePeriodicUpTo)
    }
}

/// Enumerate all canonical classes up to `max_len` (modulo inversion) and run
/// each orbit, collecting every verified periodic class.
pub fn atoroidal_scan(
    phi: &Automorphism,
    max_len: usize,
    iterations: u32,
    length_cap: u64,
    budget: u64,
) -> Result<AtoroidalVerdict, DynError> {
    let bounds = ScanBounds {
        max_len,
        iterations,
        length_cap,
    };
    let mut work = 0u64;
    let mut periodic: Vec<(CyclicWord, u32)> = Vec::new();
    let mut periodic_set: BTreeSet<CyclicWord> = BTreeSet::new();
    let mut classes_scanned = 0u64;
    let mut capped_orbits = 0u64;
    for seed in crate::words::enumerate_classes(phi.rank(), max_len) {
        classes_scanned += 1;
        // Inline light-weight orbit: lengths only, no step records.
        let mut seen: HashMap<CyclicWord, u32> = HashMap::new();
        seen.insert(seed.clone(), 0);
        let mut current = seed.clone();
        for n in 1..=iterations {
            work += 1;
            if work > budget {
                return Err(DynError::BudgetExceeded {
                    budget,
                    spent: work,
                });
            }
            let next = phi.apply_class(&current)?;
            if next.len() as u64 > length_cap {
                capped_orbits += 1;
                break;
            }
            if let Some(&entry) = seen.get(&next) {
                let key = next.clone().min(next.inverse());
                if periodic_set.insert(key) {
                    periodic.push((next, n - entry));
                }
                break;
            }
            seen.insert(next.clone(), n);
            current = next;
        }
    }
    let primitive_shape = if periodic.is_empty() {
        None
    } else {
        let roots: BTreeSet<CyclicWord> = periodic
            .iter()
            .map(|(c, _)| {
                let (root, _) = c.primitive_root();
                root.clone().min(root.inverse())
            })
            .collect();
        if roots.len() == 1 {
            roots.into_iter().next()
        } else {
            None
        }
    };
    let outcome = match periodic.first() {
        Some((class, period)) => ScanOutcome::PeriodicClassFound {
            class: class.clone(),
            period: *period,
        },
        None => ScanOutcome::NonePeriodicUpTo,
    };
    Ok(AtoroidalVerdict {
        outcome,
        bounds,
        periodic_classes: periodic,
        primitive_shape,
        classes_scanned,
        capped_orbits,
        work,
    })
}

/// Deterministic random seed classes: cyclically reduced words of length up
/// to `max_len`, canonicalized, deduplicated, optionally avoiding powers of
/// an excluded class.
pub fn random_classes(
    rng: &mut ChaCha8Rng,
    rank: u32,
    count: u32,
    max_len: usize,
    exclude_powers_of: Option<&CyclicWord>,
) -> Vec<CyclicWord> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let alphabet = 2 * rank as usize;
    while out.len() < count as usize {
        let len = rng.gen_range(1..=max_len);
        let mut letters: Vec<Letter> = Vec::with_capacity(len);
        for _ in 0..len {
            let l = loop {
                let cand = Letter::from_code(rng.gen_range(0..alphabet));
                if letters.last() != Some(&cand.inverse()) {
                    break cand;
                }
            };
            letters.push(l);
        }
        if len > 1 && letters[0] == letters[len - 1].inverse() {
            continue;
        }
        let class = CyclicWord::canonical(&Word::reduce(rank, letters)).expect("nonempty");
        if let Some(excluded) = exclude_powers_of {
            if class.is_power_of(excluded) {
                continue;
            }
        }
        if seen.insert(class.clone()) {
            out.push(class);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct SeedOrbitSummary {
    pub seed: CyclicWord,
    pub final_vector: FrequencyVector,
    pub final_length: u64,
    /// Cauchy gap at truncation: distance from the final vector to its own
    /// push-forward.
    pub cauchy_residual: f64,
    pub iterations_done: u32,
    pub capped: bool,
}

/// Empirical limit set: one frequency vector per limit cluster.
#[derive(Clone, Debug)]
pub struct SimplexEstimate {
    pub window: u32,
    pub vectors: Vec<FrequencyVector>,
    /// Seed indices belonging to each cluster.
    pub members: Vec<Vec<usize>>,
    /// Largest member residual.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct NsReport {
    pub seeds: Vec<SeedOrbitSummary>,
    pub pairwise_distances: Vec<Vec<f64>>,
    pub estimate: SimplexEstimate,
    /// Max over cluster representatives of the distance to their own
    /// push-forward, i.e. the largest representative residual.
    pub stability_gap: f64,
}

/// North–south convergence experiment: requires an empirically atoroidal map
/// at the configured scan bounds, then iterates push-forwards from random
/// seeds and clusters the limit vectors.
pub fn ns_experiment(phi: &Automorphism, config: &ExperimentConfig) -> Result<NsReport, DynError> {
    config.assert_valid();
    let scan = atoroidal_scan(
        phi,
        config.scan_max_len,
        config.scan_iterations,
        config.scan_length_cap,
        config.budget,
    )?;
    if let ScanOutcome::PeriodicClassFound { class, period } = scan.outcome {
        return Err(DynError::NotEmpiricallyAtoroidal { class, period });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let seeds = random_classes(
        &mut rng,
        phi.rank(),
        config.seed_count,
        config.max_seed_len,
        None,
    );
    ns_run(phi, config, &seeds)
}

/// The convergence run itself, without the atoroidality precondition.
pub fn ns_run(
    phi: &Automorphism,
    config: &ExperimentConfig,
    seeds: &[CyclicWord],
) -> Result<NsReport, DynError> {
    let mut summaries = Vec::new();
    for seed in seeds {
        let mut current = seed.clone();
        let mut iterations_done = 0;
        let mut capped = false;
        let mut prev_vector: Option<FrequencyVector> = None;
        let mut vector = CurrentVector::from_class(&current, config.window).frequencies();
        for _ in 1..=config.iterations {
            let next = phi.apply_class(&current)?;
            if next.len() as u64 > config.length_cap {
                capped = true;
                break;
            }
            current = next;
            iterations_done += 1;
            prev_vector = Some(vector);
            vector = CurrentVector::from_class(&current, config.window).frequencies();
        }
        // Cauchy gap at truncation: one application beyond the recorded end,
        // unless the cap already stopped the orbit.
        let cauchy_residual = if capped {
            match prev_vector {
                Some(prev) => proj_distance(&vector, &prev)?,
                None => f64::INFINITY,
            }
        } else {
            let beyond = phi.apply_class(&current)?;
            let next_vector = CurrentVector::from_class(&beyond, config.window).frequencies();
            proj_distance(&next_vector, &vector)?
        };
        summaries.push(SeedOrbitSummary {
            seed: seed.clone(),
            final_vector: vector,
            final_length: current.len() as u64,
            cauchy_residual,
            iterations_done,
            capped,
        });
    }

    let n = summaries.len();
    let mut pairwise = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = proj_distance(&summaries[i].final_vector, &summaries[j].final_vector)?;
            pairwise[i][j] = d;
            pairwise[j][i] = d;
        }
    }

    // Single-pass clustering at the configured tolerance, seed order.
    let mut reps: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match reps.iter().position(|&r| pairwise[r][i] < config.tolerance) {
            Some(k) => members[k].push(i),
            None => {
                reps.push(i);
                members.push(vec![i]);
            }
        }
    }
    let vectors: Vec<FrequencyVector> =
        reps.iter().map(|&r| summaries[r].final_vector.clone()).collect();
    let residual = members
        .iter()
        .flatten()
        .map(|&i| summaries[i].cauchy_residual)
        .fold(0.0f64, f64::max);
    // Each representative's residual already is the distance to its own
    // push-forward, so the stability gap of the estimate is their maximum.
    let stability_gap = reps
        .iter()
        .map(|&r| summaries[r].cauchy_residual)
        .fold(0.0f64, f64::max);
    Ok(NsReport {
        seeds: summaries,
        pairwise_distances: pairwise,
        estimate: SimplexEstimate {
            window: config.window,
            vectors,
            members,
            residual,
        },
        stability_gap,
    })
}

#[derive(Clone, Debug)]
pub struct GrowthProfile {
    pub lengths: Vec<u64>,
    /// Geometric mean of the successive ratios over the last half of the
    /// series, when at least two points are available there.
    pub fitted_ratio: Option<f64>,
    /// For each threshold `C`: the least `n` with `|φ^n η| ≥ C·|η|`.
    pub threshold_hits: Vec<(f64, Option<u32>)>,
    pub capped: bool,
}

pub fn growth_profile(
    phi: &Automorphism,
    seed: &CyclicWord,
    iterations: u32,
    length_cap: u64,
    thresholds: &[f64],
) -> Result<GrowthProfile, DynError> {
    let mut lengths = vec![seed.len() as u64];
    let mut current = seed.clone();
    let mut capped = false;
    for _ in 1..=iterations {
        let next = phi.apply_class(&current)?;
        if next.len() as u64 > length_cap {
            capped = true;
            break;
        }
        lengths.push(next.len() as u64);
        current = next;
    }
    let mid = lengths.len() / 2;
    let fitted_ratio = if lengths.len() - mid >= 2 {
        let first = lengths[mid] as f64;
        let last = *lengths.last().expect("nonempty") as f64;
        Some((last / first).powf(1.0 / (lengths.len() - 1 - mid) as f64))
    } else {
        None
    };
    let threshold_hits = thresholds
        .iter()
        .map(|&c| {
            let target = c * lengths[0] as f64;
            (
                c,
                lengths
                    .iter()
                    .position(|&l| l as f64 >= target)
                    .map(|n| n as u32),
            )
        })
        .collect();
    Ok(GrowthProfile {
        lengths,
        fitted_ratio,
        threshold_hits,
        capped,
    })
}

/// The ping-pong product `(ψφψ⁻¹)^m ∘ φ^n`.
pub fn pingpong(
    phi: &Automorphism,
    psi: &Automorphism,
    m: u32,
    n: u32,
) -> Result<Automorphism, DynError> {
    assert!(m >= 1 && n >= 1, "ping-pong exponents are positive");
    let theta = phi.conjugate_by(psi)?;
    let mut product = theta.power(m as i64).compose(&phi.power(n as i64))?;
    product.set_label(format!(
        "pingpong({},{},{m},{n})",
        phi.label(),
        psi.label()
    ));
    Ok(product)
}

#[derive(Clone, Debug, PartialEq)]
pub enum GnsSeedVerdict {
    ForwardToPlus { at_iteration: u32 },
    BackwardToMinus { at_iteration: u32 },
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct GnsSeedRun {
    pub seed: CyclicWord,
    pub verdict: GnsSeedVerdict,
    /// Marked-letter fraction along the forward orbit, index 0 = seed.
    pub marked_fractions: Vec<f64>,
    /// Distance of the forward iterates to the Δ₊ estimate.
    pub forward_distances: Vec<f64>,
    /// Distance of the backward iterates to the Δ₋ estimate.
    pub backward_distances: Vec<f64>,
    /// Cone diagnostic: (marked fraction, frequency vector restricted to the
    /// sub-rose and renormalized by the off-marked length) per forward step.
    pub cone_diagnostic: Vec<(f64, FrequencyVector)>,
    pub forward_capped: bool,
    pub backward_capped: bool,
}

#[derive(Clone, Debug)]
pub struct GnsReport {
    pub marked_generator: u32,
    /// The marked counting current is fixed with exact counts.
    pub marked_current_fixed_exactly: bool,
    pub plus_estimate: SimplexEstimate,
    pub minus_estimate: SimplexEstimate,
    pub seeds: Vec<GnsSeedRun>,
    pub forward_count: u32,
    pub backward_count: u32,
    pub inconclusive_count: u32,
}

/// Generalized north–south experiment for `F_N = A ∗ ⟨g⟩` with `g` the marked
/// generator: verifies that `η_g` is fixed exactly, estimates the attracting
/// and repelling sets of the restriction to `A`, and resolves each seed
/// forward or backward per the finite-budget dichotomy.
pub fn gns_experiment(
    phi: &Automorphism,
    config: &ExperimentConfig,
) -> Result<GnsReport, DynError> {
    config.assert_valid();
    let rank = phi.rank();
    let marked = config.marked_generator.unwrap_or(rank);
    let marked_class =
        CyclicWord::canonical(&Word::generator(rank, marked)).expect("generator class");
    let image = phi.apply_class(&marked_class)?;
    if image != marked_class {
        return Err(DynError::MarkedClassNotFixed {
            marked: marked_class,
            image,
        });
    }
    // Exactness of the fixed current, recorded rather than assumed.
    let eta = CurrentVector::from_class(&marked_class, config.window);
    let marked_current_fixed_exactly = eta.push_forward(phi)? == eta;

    let restriction = restrict_off_generator(phi, marked)?;
    let scan = atoroidal_scan(
        &restriction,
        config.scan_max_len,
        config.scan_iterations,
        config.scan_length_cap,
        config.budget,
    )?;
    if let ScanOutcome::PeriodicClassFound { class, period } = scan.outcome {
        return Err(DynError::NotEmpiricallyAtoroidalOnA { class, period });
    }

    // Attracting and repelling estimates of the restriction, embedded back
    // into the big rose's pattern coordinates.
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let sub_seeds = random_classes(
        &mut rng,
        restriction.rank(),
        config.seed_count,
        config.max_seed_len,
        None,
    );
    let embed: Vec<u32> = (1..=rank).filter(|&i| i != marked).collect();
    let plus_run = ns_run(&restriction, config, &sub_seeds)?;
    let minus_run = ns_run(&restriction.inverse(), config, &sub_seeds)?;
    let plus_estimate = embed_estimate(&plus_run.estimate, rank, &embed);
    let minus_estimate = embed_estimate(&minus_run.estimate, rank, &embed);

    let seeds = random_classes(
        &mut rng,
        rank,
        config.seed_count,
        config.max_seed_len,
        Some(&marked_class),
    );
    let phi_inv = phi.inverse();
    let mut runs = Vec::new();
    let (mut forward_count, mut backward_count, mut inconclusive_count) = (0, 0, 0);
    for seed in seeds {
        let (forward_distances, marked_fractions, cone_diagnostic, forward_capped) =
            directed_run(phi, &seed, config, &plus_estimate, marked)?;
        let (backward_distances, _, _, backward_capped) =
            directed_run(&phi_inv, &seed, config, &minus_estimate, marked)?;
        let mut verdict = GnsSeedVerdict::Inconclusive;
        let steps = forward_distances.len().max(backward_distances.len());
        'resolve: for n in 0..steps {
            if forward_distances.get(n).is_some_and(|&d| d < config.tolerance) {
                verdict = GnsSeedVerdict::ForwardToPlus {
                    at_iteration: n as u32,
                };
                break 'resolve;
            }
            if backward_distances.get(n).is_some_and(|&d| d < config.tolerance) {
                verdict = GnsSeedVerdict::BackwardToMinus {
                    at_iteration: n as u32,
                };
                break 'resolve;
            }
        }
        match verdict {
            GnsSeedVerdict::ForwardToPlus { .. } => forward_count += 1,
            GnsSeedVerdict::BackwardToMinus { .. } => backward_count += 1,
            GnsSeedVerdict::Inconclusive => inconclusive_count += 1,
        }
        runs.push(GnsSeedRun {
            seed,
            verdict,
            marked_fractions,
            forward_distances,
            backward_distances,
            cone_diagnostic,
            forward_capped,
            backward_capped,
        });
    }
    Ok(GnsReport {
        marked_generator: marked,
        marked_current_fixed_exactly,
        plus_estimate,
        minus_estimate,
        seeds: runs,
        forward_count,
        backward_count,
        inconclusive_count,
    })
}

/// One directed orbit: distances to an estimate, marked fractions, and the
/// cone diagnostic.
#[allow(clippy::type_complexity)]
fn directed_run(
    phi: &Automorphism,
    seed: &CyclicWord,
    config: &ExperimentConfig,
    estimate: &SimplexEstimate,
    marked: u32,
) -> Result<(Vec<f64>, Vec<f64>, Vec<(f64, FrequencyVector)>, bool), DynError> {
    let mut distances = Vec::new();
    let mut fractions = Vec::new();
    let mut cone = Vec::new();
    let mut capped = false;
    let mut current = seed.clone();
    for n in 0..=config.iterations {
        if n > 0 {
            let next = phi.apply_class(&current)?;
            if next.len() as u64 > config.length_cap {
                capped = true;
                break;
            }
            current = next;
        }
        let vector = CurrentVector::from_class(&current, config.window);
        let freq = vector.frequencies();
        let d = estimate
            .vectors
            .iter()
            .map(|v| proj_distance(&freq, v).unwrap_or(f64::INFINITY))
            .fold(f64::INFINITY, f64::min);
        distances.push(d);
        let t = vector.marked_letter_fraction(marked);
        fractions.push(t);
        cone.push((t, restricted_frequencies(&vector, marked)));
    }
    Ok((distances, fractions, cone, capped))
}

/// Frequencies over patterns avoiding the marked generator, renormalized by
/// the off-marked simplicial length.
pub fn restricted_frequencies(vector: &CurrentVector, marked: u32) -> FrequencyVector {
    let marked_count = vector.count(&Word::generator(vector.rank(), marked));
    let off_length = vector.simplicial_length() - marked_count;
    let entries: std::collections::BTreeMap<Word, f64> = vector
        .counts()
        .iter()
        .filter(|(p, _)| p.letters().iter().all(|l| l.index() != marked))
        .map(|(p, &c)| (p.clone(), c as f64 / off_length.max(1) as f64))
        .collect();
    FrequencyVector::from_entries(vector.rank(), vector.window(), entries)
}

fn embed_estimate(estimate: &SimplexEstimate, rank: u32, embed: &[u32]) -> SimplexEstimate {
    SimplexEstimate {
        window: estimate.window,
        vectors: estimate
            .vectors
            .iter()
            .map(|v| v.reindexed(rank, embed))
            .collect(),
        members: estimate.members.clone(),
        residual: estimate.residual,
    }
}

/// Restriction of `phi` to the sub-rose omitting one generator; errors if any
/// other generator image crosses the omitted one.
pub fn restrict_off_generator(phi: &Automorphism, marked: u32) -> Result<Automorphism, DynError> {
    let rank = phi.rank();
    let sub_rank = rank - 1;
    let reindex = |w: &Word, gen: u32| -> Result<Word, DynError> {
        let mut letters = Vec::with_capacity(w.len());
        for l in w.letters() {
            if l.index() == marked {
                return Err(DynError::SubFactorNotInvariant { generator: gen });
            }
            let idx = if l.index() < marked {
                l.index()
            } else {
                l.index() - 1
            };
            letters.push(Letter::new(idx, l.is_inverse()));
        }
        Ok(Word::reduce(sub_rank, letters))
    };
    let mut images = Vec::new();
    let mut inverses = Vec::new();
    for i in 1..=rank {
        if i == marked {
            continue;
        }
        images.push(reindex(&phi.images()[(i - 1) as usize], i)?);
        inverses.push(reindex(&phi.inverse_images()[(i - 1) as usize], i)?);
    }
    Ok(Automorphism::new(
        sub_rank,
        images,
        inverses,
        format!("{}|A", phi.label()),
    )?)
}

#[derive(Clone, Debug)]
pub enum SubgroupOutcome {
    /// A candidate class has a finite, re-verified orbit under the generator
    /// set: the fixed-class alternative at desk scale.
    FiniteOrbitFound {
        class: CyclicWord,
        orbit: Vec<CyclicWord>,
    },
    /// Some product of the generators scanned empirically atoroidal.
    EmpiricalAtoroidalFound {
        product: Vec<(usize, i32)>,
        label: String,
        verdict: AtoroidalVerdict,
    },
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct SubgroupReport {
    pub outcome: SubgroupOutcome,
    pub product_length: usize,
    pub class_max_len: usize,
    pub iterations: u32,
    pub length_cap: u64,
    pub orbit_cap: usize,
    pub phase1_classes_checked: u64,
    pub phase2_products_checked: u64,
}

/// Two-phase subgroup alternative scanner.  Phase 1 looks for a class with a
/// finite orbit under the generator set (closure up to `orbit_cap`); phase 2
/// enumerates reduced products of the generators up to `product_length` and
/// scans each for empirical atoroidality.
pub fn subgroup_scan(
    generators: &[Automorphism],
    product_length: usize,
    class_max_len: usize,
    iterations: u32,
    length_cap: u64,
    orbit_cap: usize,
    budget: u64,
) -> Result<SubgroupReport, DynError> {
    assert!(!generators.is_empty(), "need at least one generator");
    let rank = generators[0].rank();
    for g in generators {
        assert_eq!(g.rank(), rank, "generators must share one rank");
    }
    let inverses: Vec<Automorphism> = generators.iter().map(Automorphism::inverse).collect();
    let mut work = 0u64;
    let mut phase1_classes_checked = 0u64;

    'candidates: for class in crate::words::enumerate_classes(rank, class_max_len) {
        phase1_classes_checked += 1;
        let mut orbit: BTreeSet<CyclicWord> = BTreeSet::from([class.clone()]);
        let mut frontier = vec![class.clone()];
        while let Some(c) = frontier.pop() {
            for g in generators.iter().chain(&inverses) {
                work += 1;
                if work > budget {
                    return Err(DynError::BudgetExceeded {
                        budget,
                        spent: work,
                    });
                }
                let image = g.apply_class(&c)?;
                if image.len() as u64 > length_cap {
                    continue 'candidates; // unbounded within bounds: not finite
                }
                if orbit.insert(image.clone()) {
                    if orbit.len() > orbit_cap {
                        continue 'candidates;
                    }
                    frontier.push(image);
                }
            }
        }
        // Closure complete within caps; re-verify closedness.
        debug_assert!(orbit.iter().all(|c| {
            generators
                .iter()
                .chain(&inverses)
                .all(|g| orbit.contains(&g.apply_class(c).expect("rank checked")))
        }));
        return Ok(SubgroupReport {
            outcome: SubgroupOutcome::FiniteOrbitFound {
                class,
                orbit: orbit.into_iter().collect(),
            },
            product_length,
            class_max_len,
            iterations,
            length_cap,
            orbit_cap,
            phase1_classes_checked,
            phase2_products_checked: 0,
        });
    }

    let mut phase2_products_checked = 0u64;
    for product in reduced_products(generators.len(), product_length) {
        phase2_products_checked += 1;
        let mut composed = Automorphism::identity(rank);
        for &(idx, sign) in &product {
            let factor = if sign > 0 {
                generators[idx].clone()
            } else {
                inverses[idx].clone()
            };
            composed = composed.compose(&factor)?;
        }
        let remaining = budget.saturating_sub(work);
        let verdict = atoroidal_scan(&composed, class_max_len, iterations, length_cap, remaining)?;
        work += verdict.work;
        if verdict.is_empirically_atoroidal() {
            let label = product
                .iter()
                .map(|&(idx, sign)| {
                    let base = generators[idx].label().to_string();
                    if sign > 0 {
                        base
                    } else {
                        format!("{base}^-1")
                    }
                })
                .collect::<Vec<_>>()
                .join("·");
            return Ok(SubgroupReport {
                outcome: SubgroupOutcome::EmpiricalAtoroidalFound {
                    product,
                    label,
                    verdict,
                },
                product_length,
                class_max_len,
                iterations,
                length_cap,
                orbit_cap,
                phase1_classes_checked,
                phase2_products_checked,
            });
        }
    }
    Ok(SubgroupReport {
        outcome: SubgroupOutcome::Inconclusive,
        product_length,
        class_max_len,
        iterations,
        length_cap,
        orbit_cap,
        phase1_classes_checked,
        phase2_products_checked,
    })
}

/// Reduced words over the generator alphabet `{g_i, g_i⁻¹}` (no adjacent
/// `g g⁻¹`), by length then lexicographically.
fn reduced_products(generators: usize, max_len: usize) -> Vec<Vec<(usize, i32)>> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, i32)> = Vec::new();
    fn rec(
        generators: usize,
        max_len: usize,
        stack: &mut Vec<(usize, i32)>,
        out: &mut Vec<Vec<(usize, i32)>>,
    ) {
        if stack.len() == max_len {
            return;
        }
        for idx in 0..generators {
            for sign in [1, -1] {
                if let Some(&(last_idx, last_sign)) = stack.last() {
                    if last_idx == idx && last_sign == -sign {
                        continue;
                    }
                }
                stack.push((idx, sign));
                out.push(stack.clone());
                rec(generators, max_len, stack, out);
                stack.pop();
            }
        }
    }
    rec(generators, max_len, &mut stack, &mut out);
    out.sort_by_key(|p| p.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auto::tribonacci;

    fn c(rank: u32, s: &str) -> CyclicWord {
        CyclicWord::parse(rank, s).unwrap()
    }

    fn w(rank: u32, s: &str) -> Word {
        Word::parse(rank, s).unwrap()
    }

    fn shear2() -> Automorphism {
        Automorphism::with_synthesized_inverse(2, vec![w(2, "a"), w(2, "ba")], "shear").unwrap()
    }

    #[test]
    fn orbit_fixed_class() {
        let rec = orbit(&shear2(), &c(2, "a"), 10, 1000, None).unwrap();
        assert_eq!(
            rec.verdict,
            OrbitVerdict::PeriodicFound {
                class: c(2, "a"),
                period: 1,
                entry: 0
            }
        );
    }

    #[test]
    fn orbit_tribonacci_lengths() {
        let rec = orbit(&tribonacci(), &c(3, "a"), 10, 1 << 20, None).unwrap();
        assert_eq!(rec.verdict, OrbitVerdict::Completed);
        let lengths: Vec<u64> = rec.steps.iter().map(|s| s.length).collect();
        assert_eq!(&lengths[..7], &[1, 2, 4, 7, 13, 24, 44]);
        // Tribonacci recurrence on lengths.
        for i in 3..lengths.len() {
            assert_eq!(lengths[i], lengths[i - 1] + lengths[i - 2] + lengths[i - 3]);
        }
    }

    #[test]
    fn orbit_periodic_via_conjugated_fixture() {
        // ψφψ⁻¹ fixes ψ(class) whenever φ fixes the class.
        let phi = shear2();
        let psi =
            Automorphism::with_synthesized_inverse(2, vec![w(2, "ab"), w(2, "b")], "psi").unwrap();
        let conj = phi.conjugate_by(&psi).unwrap();
        let seed = psi.apply_class(&c(2, "a")).unwrap();
        let rec = orbit(&conj, &seed, 5, 10_000, None).unwrap();
        match rec.verdict {
            OrbitVerdict::PeriodicFound { period, .. } => assert_eq!(period, 1),
            ref v => panic!("expected periodic, got {v:?}"),
        }
    }

    #[test]
    fn orbit_cap_is_reported() {
        let rec = orbit(&tribonacci(), &c(3, "a"), 40, 100, None).unwrap();
        assert!(matches!(rec.verdict, OrbitVerdict::LengthCapExceeded { .. }));
    }

    #[test]
    fn scan_finds_fixed_class_of_shear() {
        let v = atoroidal_scan(&shear2(), 4, 10, 10_000, 1 << 24).unwrap();
        match &v.outcome {
            ScanOutcome::PeriodicClassFound { class, period } => {
                assert_eq!(*class, c(2, "a"));
                assert_eq!(*period, 1);
            }
            other => panic!("expected periodic class, got {other:?}"),
        }
        // The twist also fixes the boundary class (abAB), so the fixed
        // classes are not all powers of one primitive.
        assert!(v
            .periodic_classes
            .iter()
            .any(|(cl, _)| *cl == c(2, "abAB")));
        assert_eq!(v.primitive_shape, None);
    }

    #[test]
    fn scan_tribonacci_small_bounds() {
        let v = atoroidal_scan(&tribonacci(), 4, 10, 20_000, 1 << 24).unwrap();
        assert!(v.is_empirically_atoroidal());
        assert!(v.periodic_classes.is_empty());
    }

    #[test]
    fn scan_wedge_reports_powers_of_d() {
        let t4 = tribonacci().free_product(&Automorphism::identity(1));
        let v = atoroidal_scan(&t4, 4, 10, 20_000, 1 << 24).unwrap();
        assert!(matches!(v.outcome, ScanOutcome::PeriodicClassFound { .. }));
        assert!(!v.periodic_classes.is_empty());
        assert_eq!(v.primitive_shape, Some(c(4, "d")));
        for (class, _) in &v.periodic_classes {
            assert!(class.is_power_of(&c(4, "d")));
        }
    }

    #[test]
    fn scan_budget_error() {
        assert!(matches!(
            atoroidal_scan(&tribonacci(), 5, 20, 20_000, 10),
            Err(DynError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn random_classes_are_deterministic_and_valid() {
        let mut rng1 = ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let a = random_classes(&mut rng1, 3, 10, 6, None);
        let b = random_classes(&mut rng2, 3, 10, 6, None);
        assert_eq!(a, b);
        let excluded = c(3, "c");
        let mut rng3 = ChaCha8Rng::seed_from_u64(1);
        for class in random_classes(&mut rng3, 3, 20, 4, Some(&excluded)) {
            assert!(!class.is_power_of(&excluded));
        }
    }

    #[test]
    fn ns_run_with_zero_iterations_echoes_seeds() {
        let config = ExperimentConfig {
            iterations: 0,
            ..Default::default()
        };
        let seeds = vec![c(3, "ab"), c(3, "ca")];
        let report = ns_run(&tribonacci(), &config, &seeds).unwrap();
        for (summary, seed) in report.seeds.iter().zip(&seeds) {
            let initial = CurrentVector::from_class(seed, config.window).frequencies();
            assert_eq!(summary.final_vector, initial);
            assert_eq!(summary.final_length, seed.len() as u64);
        }
    }

    #[test]
    fn ns_orbit_tails_share_the_limit() {
        let t = tribonacci();
        let config = ExperimentConfig {
            iterations: 15,
            length_cap: 1 << 40,
            ..Default::default()
        };
        let h = c(3, "ab");
        let shifted = t.power(5).apply_class(&h).unwrap();
        let report = ns_run(&t, &config, &[h, shifted]).unwrap();
        assert!(report.pairwise_distances[0][1] < config.tolerance);
        assert_eq!(report.estimate.vectors.len(), 1);
    }

    #[test]
    fn scan_verdicts_are_monotone_in_bounds() {
        let phi = shear2();
        let small = atoroidal_scan(&phi, 3, 5, 10_000, 1 << 24).unwrap();
        let large = atoroidal_scan(&phi, 5, 10, 10_000, 1 << 24).unwrap();
        assert!(matches!(small.outcome, ScanOutcome::PeriodicClassFound { .. }));
        assert!(matches!(large.outcome, ScanOutcome::PeriodicClassFound { .. }));
        for (class, _) in &small.periodic_classes {
            let key = class.clone().min(class.inverse());
            assert!(
                large
                    .periodic_classes
                    .iter()
                    .any(|(c, _)| c.clone().min(c.inverse()) == key),
                "class {class} lost at larger bounds"
            );
        }
    }

    #[test]
    fn marked_fraction_of_mixed_seed_decays() {
        // Under tribonacci*id from (da): d-count stays 1 while the a-part
        // grows, so the fraction starts at 1/2 and falls toward 0.
        let phi = tribonacci().free_product(&Automorphism::identity(1));
        let mut class = c(4, "da");
        let mut fractions = Vec::new();
        for _ in 0..=10 {
            fractions.push(CurrentVector::from_class(&class, 1).marked_letter_fraction(4));
            class = phi.apply_class(&class).unwrap();
        }
        assert_eq!(fractions[0], 0.5);
        for pair in fractions.windows(2) {
            assert!(pair[1] <= pair[0], "fractions {fractions:?}");
        }
        assert!(*fractions.last().unwrap() < 0.05);
    }

    #[test]
    fn growth_profile_of_fixed_class_is_constant() {
        let phi = tribonacci().free_product(&Automorphism::identity(1));
        let p = growth_profile(&phi, &c(4, "d"), 12, 1000, &[2.0]).unwrap();
        assert!(p.lengths.iter().all(|&l| l == 1));
        assert_eq!(p.fitted_ratio, Some(1.0));
    }

    #[test]
    fn growth_profile_identity_and_tribonacci() {
        let id = Automorphism::identity(3);
        let p = growth_profile(&id, &c(3, "ab"), 10, 1000, &[2.0]).unwrap();
        assert!(p.lengths.iter().all(|&l| l == 2));
        assert_eq!(p.fitted_ratio, Some(1.0));
        assert_eq!(p.threshold_hits, vec![(2.0, None)]);

        let p = growth_profile(&tribonacci(), &c(3, "a"), 20, 1 << 30, &[10.0]).unwrap();
        let ratio = p.fitted_ratio.unwrap();
        assert!((ratio - 1.8393).abs() < 0.01, "ratio {ratio}");
        assert_eq!(p.threshold_hits[0].1, Some(4)); // lengths 1,2,4,7,13: n = 4
    }

    #[test]
    fn pingpong_degenerate_shapes() {
        let t = tribonacci();
        let id = Automorphism::identity(3);
        // ψ = id collapses to a plain power.
        let p = pingpong(&t, &id, 2, 3).unwrap();
        assert_eq!(p.images(), t.power(5).images());
        // m = n = 1 is ψφψ⁻¹·φ.
        let psi =
            Automorphism::with_synthesized_inverse(3, vec![w(3, "b"), w(3, "a"), w(3, "c")], "s")
                .unwrap();
        let p = pingpong(&t, &psi, 1, 1).unwrap();
        let expected = t.conjugate_by(&psi).unwrap().compose(&t).unwrap();
        assert_eq!(p.images(), expected.images());
    }

    #[test]
    fn restriction_off_generator() {
        let t4 = tribonacci().free_product(&Automorphism::identity(1));
        let r = restrict_off_generator(&t4, 4).unwrap();
        assert_eq!(r.rank(), 3);
        assert_eq!(r.images(), tribonacci().images());
        // A map moving d into the a-block has no restriction.
        let psi = Automorphism::with_synthesized_inverse(
            4,
            vec![w(4, "ad"), w(4, "b"), w(4, "c"), w(4, "d")],
            "bad",
        )
        .unwrap();
        assert!(matches!(
            restrict_off_generator(&psi, 4),
            Err(DynError::SubFactorNotInvariant { generator: 1 })
        ));
    }

    #[test]
    fn restricted_frequencies_drop_marked_patterns() {
        let v = CurrentVector::from_class(&c(4, "da"), 2);
        let r = restricted_frequencies(&v, 4);
        assert_eq!(r.get(&w(4, "a")), 1.0);
        assert_eq!(r.get(&w(4, "d")), 0.0);
    }

    #[test]
    fn subgroup_scan_singleton_shear() {
        let phi = shear2();
        let report = subgroup_scan(&[phi.clone()], 2, 4, 10, 10_000, 64, 1 << 24).unwrap();
        match report.outcome {
            SubgroupOutcome::FiniteOrbitFound { class, orbit } => {
                assert_eq!(class, c(2, "a"));
                assert_eq!(orbit.len(), 1);
                // Certificates are closed under the generator action.
                for member in &orbit {
                    for g in [&phi, &phi.inverse()] {
                        assert!(orbit.contains(&g.apply_class(member).unwrap()));
                    }
                }
            }
            other => panic!("expected finite orbit, got {other:?}"),
        }
    }

    #[test]
    fn subgroup_scan_identity_generator() {
        let report = subgroup_scan(
            &[Automorphism::identity(2)],
            1,
            3,
            5,
            1000,
            16,
            1 << 20,
        )
        .unwrap();
        match report.outcome {
            SubgroupOutcome::FiniteOrbitFound { class, orbit } => {
                assert_eq!(class, c(2, "a"));
                assert_eq!(orbit.len(), 1);
            }
            other => panic!("expected finite orbit, got {other:?}"),
        }
    }

    #[test]
    fn reduced_products_enumeration() {
        let products = reduced_products(2, 2);
        // Length 1: 4 products; length 2: 4·4 - 4 cancelling = 12.
        assert_eq!(products.iter().filter(|p| p.len() == 1).count(), 4);
        assert_eq!(products.iter().filter(|p| p.len() == 2).count(), 12);
        assert!(products
            .iter()
            .all(|p| p.windows(2).all(|w| !(w[0].0 == w[1].0 && w[0].1 == -w[1].1))));
    }
}
