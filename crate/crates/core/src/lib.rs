//! Computing with outer automorphisms of free groups and their dynamics on
//! conjugacy classes and geodesic currents.
//!
//! The crate is organized around the pipeline the experiments use:
//!
//! - [`words`]: freely reduced words, canonical conjugacy classes, cyclic
//!   occurrence counting;
//! - [`auto`]: automorphisms as verified generator-image tables, composition,
//!   abelianization, free products;
//! - [`graph`]: marked graphs and self graph maps with gates, Nielsen
//!   circuits, bounded cancellation and legal-segment goodness;
//! - [`strata`]: filtrations, transition matrices, EG/NEG/zero
//!   classification, Perron–Frobenius eigenvalues, extension kinds;
//! - [`currents`]: finite-window coordinates of rational geodesic currents;
//! - [`dynamics`]: orbits, atoroidality scans, north–south and generalized
//!   north–south experiments, ping-pong products, the subgroup scanner;
//! - [`files`]: the definition-file formats used by the CLI.

pub mod auto;
pub mod currents;
pub mod dynamics;
pub mod files;
pub mod graph;
pub mod strata;
pub mod words;

pub use auto::{Automorphism, AutError};
pub use currents::{proj_distance, CurrentError, CurrentVector, FrequencyVector};
pub use dynamics::{DynError, ExperimentConfig};
pub use graph::{GraphError, GraphSelfMap, MarkedGraph};
pub use strata::{ExtensionKind, Filtration, StrataError, TransitionMatrix};
pub use words::{CyclicWord, Letter, Word, WordError};
