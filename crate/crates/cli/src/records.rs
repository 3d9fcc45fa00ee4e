//! Line-delimited JSON records with sorted keys.
//!
//! Every record is an object `{"record": <kind>, "manifest_id": <id>, ...}`;
//! the manifest itself is emitted first on the stream.  The id is the
//! SHA-256 of the manifest serialized without its timestamp, so reruns with
//! identical inputs produce identical ids.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

use fgadyn_core::currents::FrequencyVector;
use fgadyn_core::dynamics::{
    AtoroidalVerdict, GnsReport, GnsSeedVerdict, NsReport, OrbitRecord, OrbitVerdict, ScanOutcome,
    SimplexEstimate, SubgroupOutcome, SubgroupReport,
};
use fgadyn_core::strata::{Filtration, NegEdgeKind, StratumClass};
use fgadyn_core::words::Letter;

/// Serialize through `serde_json::Value` so object keys come out sorted.
fn to_sorted_line<T: Serialize>(record: &T) -> Result<String> {
    let value = serde_json::to_value(record)?;
    Ok(serde_json::to_string(&value)?)
}

/// Non-finite floats have no JSON encoding; map them to `None`.
fn fin(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    record: &'a str,
    manifest_id: &'a str,
    #[serde(flatten)]
    payload: &'a T,
}

pub struct RecordWriter {
    out: Box<dyn Write>,
    manifest_id: String,
}

impl RecordWriter {
    pub fn new(out: Box<dyn Write>, manifest: &Manifest) -> Result<RecordWriter> {
        let mut writer = RecordWriter {
            out,
            manifest_id: manifest.manifest_id.clone(),
        };
        writeln!(writer.out, "{}", to_sorted_line(manifest)?)?;
        Ok(writer)
    }

    pub fn emit<T: Serialize>(&mut self, kind: &str, payload: &T) -> Result<()> {
        let line = to_sorted_line(&Envelope {
            record: kind,
            manifest_id: &self.manifest_id,
            payload,
        })?;
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest_input(path: &str, bytes: &[u8]) -> InputDigest {
    InputDigest {
        path: path.to_string(),
        sha256: hex_string(&Sha256::digest(bytes)),
    }
}

#[derive(Serialize)]
pub struct ConfigSnapshot {
    pub window: u32,
    pub iterations: u32,
    pub length_cap: u64,
    pub tolerance: f64,
    pub rng_seed: u64,
    pub seed_count: u32,
    pub max_seed_len: usize,
    pub marked_generator: Option<u32>,
    pub scan_max_len: usize,
    pub scan_iterations: u32,
    pub scan_length_cap: u64,
    pub budget: u64,
    pub power: i64,
}

#[derive(Serialize)]
pub struct Manifest {
    pub record: &'static str,
    pub manifest_id: String,
    pub command: String,
    pub config: ConfigSnapshot,
    pub inputs: Vec<InputDigest>,
    pub rng_seed: u64,
    pub timestamp: String,
    pub version: &'static str,
}

impl Manifest {
    pub fn new(
        command: &str,
        config: ConfigSnapshot,
        inputs: Vec<InputDigest>,
        timestamp: String,
    ) -> Result<Manifest> {
        let rng_seed = config.rng_seed;
        let mut manifest = Manifest {
            record: "manifest",
            manifest_id: String::new(),
            command: command.to_string(),
            config,
            inputs,
            rng_seed,
            timestamp,
            version: env!("CARGO_PKG_VERSION"),
        };
        // The id covers everything except the timestamp and itself.
        let mut value = serde_json::to_value(&manifest)?;
        let map = value.as_object_mut().expect("manifest is an object");
        map.remove("timestamp");
        map.remove("manifest_id");
        let digest = Sha256::digest(serde_json::to_string(&value)?.as_bytes());
        manifest.manifest_id = hex_string(&digest);
        Ok(manifest)
    }
}

// ---------------------------------------------------------------------------
// Payloads.

pub fn frequency_entries(v: &FrequencyVector) -> Vec<(String, f64)> {
    v.entries()
        .iter()
        .map(|(w, &x)| (w.to_string(), x))
        .collect()
}

fn edge_name(index: usize) -> String {
    format!("{:?}", Letter::generator(index as u32 + 1))
}

#[derive(Serialize)]
pub struct CheckPayload {
    pub label: String,
    pub rank: u32,
    pub valid: bool,
    pub inverse_supplied: bool,
    pub abelianization: Vec<Vec<i64>>,
    pub determinant: i64,
    pub ia_mod3: bool,
}

#[derive(Serialize)]
pub struct StratumRecord {
    pub edges: Vec<String>,
    pub class: &'static str,
    pub lambda: Option<f64>,
    pub neg_edge_kind: Option<String>,
    pub matrix: Vec<Vec<u64>>,
}

#[derive(Serialize)]
pub struct StrataPayload {
    pub label: String,
    pub rank: u32,
    pub strata: Vec<StratumRecord>,
    /// Extension kind of each prefix step `G_{r-1} ⊂ G_r`.
    pub extensions: Vec<String>,
    /// Free factor generator word lists per prefix subgraph.
    pub free_factor_words: Vec<Vec<Vec<String>>>,
}

pub fn stratum_records(filtration: &Filtration) -> Vec<StratumRecord> {
    filtration
        .strata
        .iter()
        .map(|s| {
            let (class, lambda, neg_edge_kind) = match &s.class {
                StratumClass::Zero => ("zero", None, None),
                StratumClass::Eg { lambda } => ("eg", fin(*lambda), None),
                StratumClass::Neg { edge_kind } => (
                    "neg",
                    None,
                    Some(match edge_kind {
                        None => "multi-edge".to_string(),
                        Some(NegEdgeKind::Fixed) => "fixed".to_string(),
                        Some(NegEdgeKind::Linear { nielsen_period }) => {
                            format!("linear(period {nielsen_period})")
                        }
                        Some(NegEdgeKind::SuperlinearWithinBounds) => {
                            "superlinear-within-bounds".to_string()
                        }
                    }),
                ),
            };
            StratumRecord {
                edges: s.edges.iter().map(|&i| edge_name(i)).collect(),
                class,
                lambda,
                neg_edge_kind,
                matrix: s.matrix.rows(),
            }
        })
        .collect()
}

#[derive(Serialize)]
pub struct ScanVerdictRecord {
    pub outcome: String,
    pub periodic_class: Option<String>,
    pub period: Option<u32>,
    pub max_len: usize,
    pub iterations: u32,
    pub length_cap: u64,
    pub periodic_classes: Vec<(String, u32)>,
    pub primitive_shape: Option<String>,
    pub all_periodic_powers_of_primitive: bool,
    pub classes_scanned: u64,
    pub capped_orbits: u64,
}

pub fn scan_verdict_record(v: &AtoroidalVerdict) -> ScanVerdictRecord {
    let (outcome, periodic_class, period) = match &v.outcome {
        ScanOutcome::PeriodicClassFound { class, period } => (
            "periodic-class-found".to_string(),
            Some(class.to_string()),
            Some(*period),
        ),
        ScanOutcome::NonePeriodicUpTo => ("none-periodic-up-to".to_string(), None, None),
    };
    ScanVerdictRecord {
        outcome,
        periodic_class,
        period,
        max_len: v.bounds.max_len,
        iterations: v.bounds.iterations,
        length_cap: v.bounds.length_cap,
        periodic_classes: v
            .periodic_classes
            .iter()
            .map(|(c, p)| (c.to_string(), *p))
            .collect(),
        primitive_shape: v.primitive_shape.as_ref().map(|c| c.to_string()),
        all_periodic_powers_of_primitive: v.primitive_shape.is_some(),
        classes_scanned: v.classes_scanned,
        capped_orbits: v.capped_orbits,
    }
}

#[derive(Serialize)]
pub struct ScanPayload {
    pub label: String,
    pub verdict: ScanVerdictRecord,
}

#[derive(Serialize)]
pub struct OrbitStepRecord {
    pub index: u32,
    pub fingerprint: String,
    pub length: u64,
    pub frequencies: Option<Vec<(String, f64)>>,
}

#[derive(Serialize)]
pub struct OrbitVerdictRecord {
    pub kind: String,
    pub class: Option<String>,
    pub period: Option<u32>,
    pub entry: Option<u32>,
    pub at_iteration: Option<u32>,
}

#[derive(Serialize)]
pub struct OrbitPayload {
    pub label: String,
    pub seed: String,
    pub steps: Vec<OrbitStepRecord>,
    pub verdict: OrbitVerdictRecord,
}

pub fn orbit_payload(label: &str, rec: &OrbitRecord) -> OrbitPayload {
    let steps = rec
        .steps
        .iter()
        .map(|s| OrbitStepRecord {
            index: s.index,
            fingerprint: format!("{:016x}", s.class_fingerprint),
            length: s.length,
            frequencies: s.frequencies.as_ref().map(frequency_entries),
        })
        .collect();
    let verdict = match &rec.verdict {
        OrbitVerdict::PeriodicFound {
            class,
            period,
            entry,
        } => OrbitVerdictRecord {
            kind: "periodic-found".into(),
            class: Some(class.to_string()),
            period: Some(*period),
            entry: Some(*entry),
            at_iteration: None,
        },
        OrbitVerdict::LengthCapExceeded { at_iteration } => OrbitVerdictRecord {
            kind: "length-cap-exceeded".into(),
            class: None,
            period: None,
            entry: None,
            at_iteration: Some(*at_iteration),
        },
        OrbitVerdict::Completed => OrbitVerdictRecord {
            kind: "completed".into(),
            class: None,
            period: None,
            entry: None,
            at_iteration: None,
        },
    };
    OrbitPayload {
        label: label.to_string(),
        seed: rec.seed.to_string(),
        steps,
        verdict,
    }
}

#[derive(Serialize)]
pub struct SimplexEstimateRecord {
    pub window: u32,
    pub vectors: Vec<Vec<(String, f64)>>,
    pub members: Vec<Vec<usize>>,
    pub residual: Option<f64>,
}

pub fn estimate_record(e: &SimplexEstimate) -> SimplexEstimateRecord {
    SimplexEstimateRecord {
        window: e.window,
        vectors: e.vectors.iter().map(frequency_entries).collect(),
        members: e.members.clone(),
        residual: fin(e.residual),
    }
}

#[derive(Serialize)]
pub struct NsSeedPayload {
    pub label: String,
    pub seed: String,
    pub final_length: u64,
    pub iterations_done: u32,
    pub capped: bool,
    pub cauchy_residual: Option<f64>,
    pub final_vector: Vec<(String, f64)>,
}

#[derive(Serialize)]
pub struct NsSummaryPayload {
    pub label: String,
    pub pairwise_distances: Vec<Vec<f64>>,
    pub estimate: SimplexEstimateRecord,
    pub stability_gap: Option<f64>,
}

pub fn ns_payloads(label: &str, report: &NsReport) -> (Vec<NsSeedPayload>, NsSummaryPayload) {
    let seeds = report
        .seeds
        .iter()
        .map(|s| NsSeedPayload {
            label: label.to_string(),
            seed: s.seed.to_string(),
            final_length: s.final_length,
            iterations_done: s.iterations_done,
            capped: s.capped,
            cauchy_residual: fin(s.cauchy_residual),
            final_vector: frequency_entries(&s.final_vector),
        })
        .collect();
    let summary = NsSummaryPayload {
        label: label.to_string(),
        pairwise_distances: report.pairwise_distances.clone(),
        estimate: estimate_record(&report.estimate),
        stability_gap: fin(report.stability_gap),
    };
    (seeds, summary)
}

#[derive(Serialize)]
pub struct GnsSeedPayload {
    pub label: String,
    pub seed: String,
    pub verdict: String,
    pub resolved_at: Option<u32>,
    pub marked_fractions: Vec<f64>,
    pub forward_distances: Vec<Option<f64>>,
    pub backward_distances: Vec<Option<f64>>,
    pub cone_diagnostic: Vec<(f64, Vec<(String, f64)>)>,
    pub forward_capped: bool,
    pub backward_capped: bool,
}

#[derive(Serialize)]
pub struct GnsSummaryPayload {
    pub label: String,
    pub marked_generator: String,
    pub marked_current_fixed_exactly: bool,
    pub forward_count: u32,
    pub backward_count: u32,
    pub inconclusive_count: u32,
    pub plus_estimate: SimplexEstimateRecord,
    pub minus_estimate: SimplexEstimateRecord,
}

pub fn gns_payloads(label: &str, report: &GnsReport) -> (Vec<GnsSeedPayload>, GnsSummaryPayload) {
    let seeds = report
        .seeds
        .iter()
        .map(|s| {
            let (verdict, resolved_at) = match s.verdict {
                GnsSeedVerdict::ForwardToPlus { at_iteration } => {
                    ("forward-to-plus".to_string(), Some(at_iteration))
                }
                GnsSeedVerdict::BackwardToMinus { at_iteration } => {
                    ("backward-to-minus".to_string(), Some(at_iteration))
                }
                GnsSeedVerdict::Inconclusive => ("inconclusive".to_string(), None),
            };
            GnsSeedPayload {
                label: label.to_string(),
                seed: s.seed.to_string(),
                verdict,
                resolved_at,
                marked_fractions: s.marked_fractions.clone(),
                forward_distances: s.forward_distances.iter().map(|&d| fin(d)).collect(),
                backward_distances: s.backward_distances.iter().map(|&d| fin(d)).collect(),
                cone_diagnostic: s
                    .cone_diagnostic
                    .iter()
                    .map(|(t, v)| (*t, frequency_entries(v)))
                    .collect(),
                forward_capped: s.forward_capped,
                backward_capped: s.backward_capped,
            }
        })
        .collect();
    let summary = GnsSummaryPayload {
        label: label.to_string(),
        marked_generator: format!("{:?}", Letter::generator(report.marked_generator)),
        marked_current_fixed_exactly: report.marked_current_fixed_exactly,
        forward_count: report.forward_count,
        backward_count: report.backward_count,
        inconclusive_count: report.inconclusive_count,
        plus_estimate: estimate_record(&report.plus_estimate),
        minus_estimate: estimate_record(&report.minus_estimate),
    };
    (seeds, summary)
}

#[derive(Serialize)]
pub struct PingpongPayload {
    pub phi: String,
    pub psi: String,
    pub m: u32,
    pub n: u32,
    pub product_label: String,
    pub product_images: Vec<String>,
    pub scan: ScanVerdictRecord,
}

#[derive(Serialize)]
pub struct SubgroupPayload {
    pub outcome: String,
    pub class: Option<String>,
    pub orbit_size: Option<usize>,
    pub orbit: Option<Vec<String>>,
    pub product: Option<String>,
    pub product_scan: Option<ScanVerdictRecord>,
    pub product_length: usize,
    pub class_max_len: usize,
    pub iterations: u32,
    pub length_cap: u64,
    pub orbit_cap: usize,
    pub phase1_classes_checked: u64,
    pub phase2_products_checked: u64,
}

pub fn subgroup_payload(report: &SubgroupReport) -> SubgroupPayload {
    let (outcome, class, orbit_size, orbit, product, product_scan) = match &report.outcome {
        SubgroupOutcome::FiniteOrbitFound { class, orbit } => (
            "finite-orbit-found".to_string(),
            Some(class.to_string()),
            Some(orbit.len()),
            Some(orbit.iter().map(|c| c.to_string()).collect()),
            None,
            None,
        ),
        SubgroupOutcome::EmpiricalAtoroidalFound { label, verdict, .. } => (
            "empirical-atoroidal-found".to_string(),
            None,
            None,
            None,
            Some(label.clone()),
            Some(scan_verdict_record(verdict)),
        ),
        SubgroupOutcome::Inconclusive => ("inconclusive".to_string(), None, None, None, None, None),
    };
    SubgroupPayload {
        outcome,
        class,
        orbit_size,
        orbit,
        product,
        product_scan,
        product_length: report.product_length,
        class_max_len: report.class_max_len,
        iterations: report.iterations,
        length_cap: report.length_cap,
        orbit_cap: report.orbit_cap,
        phase1_classes_checked: report.phase1_classes_checked,
        phase2_products_checked: report.phase2_products_checked,
    }
}
