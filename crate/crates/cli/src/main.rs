//! `fgadyn`: experiments on free group automorphism dynamics.
//!
//! Subcommands read automorphism definition files (one block per
//! automorphism; see the repository README for the grammar), run the
//! requested analysis, and emit line-delimited JSON records with sorted
//! keys.  All randomness flows from `--seed`; reruns with identical inputs
//! produce byte-identical records except for the manifest timestamp.

mod records;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fgadyn_core::auto::Automorphism;
use fgadyn_core::dynamics::{self, ExperimentConfig};
use fgadyn_core::files;
use fgadyn_core::graph::GraphSelfMap;
use fgadyn_core::strata::{extension_kind, maximal_filtration, StrataConfig};
use fgadyn_core::words::CyclicWord;

use records::{ConfigSnapshot, Manifest, RecordWriter};

const DEFAULT_BUDGET: u64 = 50_000_000;

#[derive(Parser)]
#[command(
    name = "fgadyn",
    version,
    about = "Dynamics of free group outer automorphisms on classes and currents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Automorphism definition file.
    file: PathBuf,
    /// Require this rank of the input file.
    #[arg(long)]
    rank: Option<u32>,
    /// Pattern window for current coordinates.
    #[arg(long)]
    window: Option<u32>,
    /// Iteration budget (orbit steps / scan power bound).
    #[arg(long)]
    iters: Option<u32>,
    /// Enumeration or random-seed length bound.
    #[arg(long)]
    max_seed_len: Option<usize>,
    /// Number of random seed classes for convergence runs.
    #[arg(long)]
    seed_count: Option<u32>,
    /// Abort bound on class length during iteration.
    #[arg(long)]
    length_cap: Option<u64>,
    /// Convergence/clustering tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// RNG seed; all randomness flows from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace each input automorphism by this power before running.
    #[arg(long, default_value_t = 1)]
    power: i64,
    /// Marked generator for gns runs (letter like `d` or a 1-based index).
    #[arg(long)]
    marked_generator: Option<String>,
    /// Bounds for the empirical-atoroidality precondition scan.
    #[arg(long)]
    scan_len: Option<usize>,
    #[arg(long)]
    scan_iters: Option<u32>,
    #[arg(long)]
    scan_cap: Option<u64>,
    /// Write records here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an automorphism file: inverses, abelianization, IA(Z/3).
    Check(CommonOpts),
    /// Maximal filtration, stratum classification, extension kinds.
    Strata {
        #[command(flatten)]
        common: CommonOpts,
        /// Treat the input as a graph/map definition file instead of an
        /// automorphism file.
        #[arg(long)]
        graph: bool,
    },
    /// Orbit of one class under the automorphism.
    Orbit {
        #[command(flatten)]
        common: CommonOpts,
        /// Seed conjugacy class, as a word literal.
        #[arg(long)]
        seed_class: String,
    },
    /// Empirical atoroidality scan over all classes up to a length.
    Scan(CommonOpts),
    /// North-south convergence experiment on currents.
    Ns(CommonOpts),
    /// Generalized north-south experiment for a co-rank 1 invariant factor.
    Gns(CommonOpts),
    /// Ping-pong product (ψφψ⁻¹)^m φ^n, then scan it.
    Pingpong {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(short, default_value_t = 1)]
        m: u32,
        #[arg(short, default_value_t = 1)]
        n: u32,
    },
    /// Two-phase subgroup alternative scan over products of the input
    /// automorphisms.
    Subgroup {
        #[command(flatten)]
        common: CommonOpts,
        /// Product length bound over the generator alphabet.
        #[arg(long, default_value_t = 2)]
        product_len: usize,
        /// Orbit-size cap for the finite-orbit phase.
        #[arg(long, default_value_t = 64)]
        orbit_cap: usize,
    },
}

/// Resolved configuration: command-specific defaults filled in.
fn build_config(opts: &CommonOpts, defaults: &ExperimentConfig) -> ExperimentConfig {
    let budget = std::env::var("FGADYN_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_BUDGET);
    ExperimentConfig {
        window: opts.window.unwrap_or(defaults.window),
        iterations: opts.iters.unwrap_or(defaults.iterations),
        length_cap: opts.length_cap.unwrap_or(defaults.length_cap),
        tolerance: opts.tol.unwrap_or(defaults.tolerance),
        rng_seed: opts.seed,
        seed_count: opts.seed_count.unwrap_or(defaults.seed_count),
        max_seed_len: opts.max_seed_len.unwrap_or(defaults.max_seed_len),
        marked_generator: None,
        scan_max_len: opts.scan_len.unwrap_or(defaults.scan_max_len),
        scan_iterations: opts.scan_iters.unwrap_or(defaults.scan_iterations),
        scan_length_cap: opts.scan_cap.unwrap_or(defaults.scan_length_cap),
        budget,
    }
}

fn snapshot(config: &ExperimentConfig, power: i64) -> ConfigSnapshot {
    ConfigSnapshot {
        window: config.window,
        iterations: config.iterations,
        length_cap: config.length_cap,
        tolerance: config.tolerance,
        rng_seed: config.rng_seed,
        seed_count: config.seed_count,
        max_seed_len: config.max_seed_len,
        marked_generator: config.marked_generator,
        scan_max_len: config.scan_max_len,
        scan_iterations: config.scan_iterations,
        scan_length_cap: config.scan_length_cap,
        budget: config.budget,
        power,
    }
}

struct Run {
    writer: RecordWriter,
    autos: Vec<(Automorphism, bool)>,
    config: ExperimentConfig,
}

/// Read the input file, parse the blocks, apply `--rank` validation and the
/// `--power` knob, then open the record stream with its manifest.
fn prepare(command: &str, opts: &CommonOpts, defaults: &ExperimentConfig) -> Result<Run> {
    let bytes =
        fs::read(&opts.file).with_context(|| format!("reading {}", opts.file.display()))?;
    let text = String::from_utf8(bytes.clone()).context("input file is not UTF-8")?;
    let mut config = build_config(opts, defaults);
    let mut autos = files::parse_automorphisms_with_provenance(&text)
        .with_context(|| format!("parsing {}", opts.file.display()))?;
    if let Some(rank) = opts.rank {
        for (auto, _) in &autos {
            if auto.rank() != rank {
                bail!(
                    "automorphism {} has rank {}, --rank demands {rank}",
                    auto.label(),
                    auto.rank()
                );
            }
        }
    }
    if let Some(marked) = &opts.marked_generator {
        let rank = autos[0].0.rank();
        config.marked_generator = Some(parse_generator(marked, rank)?);
    }
    if opts.power != 1 {
        for (auto, _) in &mut autos {
            *auto = auto.power(opts.power);
        }
    }
    let manifest = Manifest::new(
        command,
        snapshot(&config, opts.power),
        vec![records::digest_input(&opts.file.display().to_string(), &bytes)],
        chrono::Utc::now().to_rfc3339(),
    )?;
    let writer = RecordWriter::new(open_output(&opts.out)?, &manifest)?;
    Ok(Run {
        writer,
        autos,
        config,
    })
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout()),
    })
}

fn parse_generator(text: &str, rank: u32) -> Result<u32> {
    if let Ok(index) = text.parse::<u32>() {
        if index >= 1 && index <= rank {
            return Ok(index);
        }
        bail!("generator index {index} outside 1..={rank}");
    }
    let word = fgadyn_core::words::Word::parse(rank, text)
        .map_err(|e| anyhow::anyhow!("bad generator {text:?}: {e}"))?;
    if word.len() == 1 && !word.letters()[0].is_inverse() {
        Ok(word.letters()[0].index())
    } else {
        bail!("marked generator must be a single positive generator, got {text:?}")
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Check(opts) => cmd_check(&opts),
        Command::Strata { common, graph } => cmd_strata(&common, graph),
        Command::Orbit { common, seed_class } => cmd_orbit(&common, &seed_class),
        Command::Scan(opts) => cmd_scan(&opts),
        Command::Ns(opts) => cmd_ns(&opts),
        Command::Gns(opts) => cmd_gns(&opts),
        Command::Pingpong { common, m, n } => cmd_pingpong(&common, m, n),
        Command::Subgroup {
            common,
            product_len,
            orbit_cap,
        } => cmd_subgroup(&common, product_len, orbit_cap),
    }
}

fn cmd_check(opts: &CommonOpts) -> Result<()> {
    let mut run = prepare("check", opts, &ExperimentConfig::default())?;
    for (auto, inverse_supplied) in &run.autos {
        let ab = auto.abelianization(None);
        run.writer.emit(
            "check",
            &records::CheckPayload {
                label: auto.label().to_string(),
                rank: auto.rank(),
                valid: true,
                inverse_supplied: *inverse_supplied,
                abelianization: ab.rows(),
                determinant: ab.determinant(),
                ia_mod3: auto.in_ia_mod3(),
            },
        )?;
    }
    run.writer.finish()
}

fn cmd_strata(opts: &CommonOpts, graph_file: bool) -> Result<()> {
    let defaults = ExperimentConfig::default();
    if graph_file {
        let bytes =
            fs::read(&opts.file).with_context(|| format!("reading {}", opts.file.display()))?;
        let text = String::from_utf8(bytes.clone()).context("input file is not UTF-8")?;
        let map = files::parse_graph_map(&text)
            .with_context(|| format!("parsing {}", opts.file.display()))?;
        let config = build_config(opts, &defaults);
        let manifest = Manifest::new(
            "strata",
            snapshot(&config, opts.power),
            vec![records::digest_input(&opts.file.display().to_string(), &bytes)],
            chrono::Utc::now().to_rfc3339(),
        )?;
        let mut writer = RecordWriter::new(open_output(&opts.out)?, &manifest)?;
        emit_strata(&mut writer, &map)?;
        return writer.finish();
    }
    let mut run = prepare("strata", opts, &defaults)?;
    let autos = std::mem::take(&mut run.autos);
    for (auto, _) in &autos {
        let map = GraphSelfMap::rose_map(auto);
        emit_strata(&mut run.writer, &map)?;
    }
    run.writer.finish()
}

fn emit_strata(writer: &mut RecordWriter, map: &GraphSelfMap) -> Result<()> {
    let filtration = maximal_filtration(map, &StrataConfig::default());
    let strata = records::stratum_records(&filtration);
    let mut extensions = Vec::new();
    let mut free_factor_words = Vec::new();
    for r in 1..=filtration.strata.len() {
        let inner = filtration.prefix_edges(r - 1);
        let outer = filtration.prefix_edges(r);
        let kind = extension_kind(map.graph(), &inner, &outer)?;
        extensions.push(
            match kind {
                fgadyn_core::ExtensionKind::Circle => "circle",
                fgadyn_core::ExtensionKind::Barbell => "barbell",
                fgadyn_core::ExtensionKind::Handle => "handle",
                fgadyn_core::ExtensionKind::MultiEdge => "multi-edge",
            }
            .to_string(),
        );
        free_factor_words.push(
            map.graph()
                .subgraph_free_factors(&outer)
                .into_iter()
                .map(|component| component.into_iter().map(|w| w.to_string()).collect())
                .collect(),
        );
    }
    writer.emit(
        "strata",
        &records::StrataPayload {
            label: map.induced_class().label().to_string(),
            rank: map.graph().rank(),
            strata,
            extensions,
            free_factor_words,
        },
    )
}

fn cmd_orbit(opts: &CommonOpts, seed_class: &str) -> Result<()> {
    let mut run = prepare("orbit", opts, &ExperimentConfig::default())?;
    let (auto, _) = &run.autos[0];
    let seed = CyclicWord::parse(auto.rank(), seed_class)
        .map_err(|e| anyhow::anyhow!("bad seed class {seed_class:?}: {e}"))?;
    let record = dynamics::orbit(
        auto,
        &seed,
        run.config.iterations,
        run.config.length_cap,
        Some(run.config.window),
    )?;
    let payload = records::orbit_payload(auto.label(), &record);
    run.writer.emit("orbit", &payload)?;
    run.writer.finish()
}

fn cmd_scan(opts: &CommonOpts) -> Result<()> {
    let defaults = ExperimentConfig {
        iterations: 20,
        max_seed_len: 6,
        length_cap: 100_000,
        ..Default::default()
    };
    let mut run = prepare("scan", opts, &defaults)?;
    let (auto, _) = &run.autos[0];
    let verdict = dynamics::atoroidal_scan(
        auto,
        run.config.max_seed_len,
        run.config.iterations,
        run.config.length_cap,
        run.config.budget,
    )?;
    run.writer.emit(
        "scan_verdict",
        &records::ScanPayload {
            label: auto.label().to_string(),
            verdict: records::scan_verdict_record(&verdict),
        },
    )?;
    run.writer.finish()
}

fn cmd_ns(opts: &CommonOpts) -> Result<()> {
    let mut run = prepare("ns", opts, &ExperimentConfig::default())?;
    let (auto, _) = &run.autos[0];
    let report = dynamics::ns_experiment(auto, &run.config)?;
    let (seeds, summary) = records::ns_payloads(auto.label(), &report);
    for seed in &seeds {
        run.writer.emit("ns_seed", seed)?;
    }
    run.writer.emit("ns_summary", &summary)?;
    run.writer.finish()
}

fn cmd_gns(opts: &CommonOpts) -> Result<()> {
    let defaults = ExperimentConfig {
        iterations: 20,
        ..Default::default()
    };
    let mut run = prepare("gns", opts, &defaults)?;
    let (auto, _) = &run.autos[0];
    let report = dynamics::gns_experiment(auto, &run.config)?;
    let (seeds, summary) = records::gns_payloads(auto.label(), &report);
    for seed in &seeds {
        run.writer.emit("gns_seed", seed)?;
    }
    run.writer.emit("gns_summary", &summary)?;
    run.writer.finish()
}

fn cmd_pingpong(opts: &CommonOpts, m: u32, n: u32) -> Result<()> {
    let defaults = ExperimentConfig {
        iterations: 20,
        max_seed_len: 5,
        length_cap: 20_000,
        ..Default::default()
    };
    let mut run = prepare("pingpong", opts, &defaults)?;
    if run.autos.len() < 2 {
        bail!("pingpong needs two automorphism blocks (φ then ψ)");
    }
    let phi = run.autos[0].0.clone();
    let psi = run.autos[1].0.clone();
    let product = dynamics::pingpong(&phi, &psi, m, n)?;
    let verdict = dynamics::atoroidal_scan(
        &product,
        run.config.max_seed_len,
        run.config.iterations,
        run.config.length_cap,
        run.config.budget,
    )?;
    run.writer.emit(
        "pingpong",
        &records::PingpongPayload {
            phi: phi.label().to_string(),
            psi: psi.label().to_string(),
            m,
            n,
            product_label: product.label().to_string(),
            product_images: product.images().iter().map(|w| w.to_string()).collect(),
            scan: records::scan_verdict_record(&verdict),
        },
    )?;
    run.writer.finish()
}

fn cmd_subgroup(opts: &CommonOpts, product_len: usize, orbit_cap: usize) -> Result<()> {
    let defaults = ExperimentConfig {
        iterations: 20,
        max_seed_len: 5,
        length_cap: 20_000,
        ..Default::default()
    };
    let mut run = prepare("subgroup", opts, &defaults)?;
    let generators: Vec<Automorphism> = run.autos.iter().map(|(a, _)| a.clone()).collect();
    let report = dynamics::subgroup_scan(
        &generators,
        product_len,
        run.config.max_seed_len,
        run.config.iterations,
        run.config.length_cap,
        orbit_cap,
        run.config.budget,
    )?;
    run.writer
        .emit("subgroup", &records::subgroup_payload(&report))?;
    run.writer.finish()
}
