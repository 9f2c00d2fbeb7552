//! Soft session types: a linear-logic session discipline in which every
//! well-typed network of processes interacts a polynomially bounded number
//! of times. The crate provides the process calculus, the type system and
//! its derivation kernel, complexity measures over derivations, a rewrite
//! engine witnessing subject reduction, an elaborator from raw processes
//! to kernel derivations, and a small declaration language (`.sst`) with a
//! command-line front end.
//!
//! The pieces compose bottom-up:
//!
//! * [`calculus`]: processes, structural congruence, reduction.
//! * [`types`]: session types and zones (typing contexts).
//! * [`derivation`]: checked derivation trees and structural operations.
//! * [`measures`]: fan-out, duplicability, and weight.
//! * [`dynamics`]: derivation-level rewrites and the simulation driver.
//! * [`elaborator`]: raw process + signature -> derivation.
//! * [`frontend`]: `.sst` files, analysis reports, CLI plumbing.

pub mod calculus;
pub mod derivation;
pub mod dynamics;
pub mod elaborator;
pub mod frontend;
pub mod measures;
pub mod types;

pub use calculus::{Name, Process, Redex};
pub use derivation::{check_derivation, CheckError, CheckReason, Derivation};
pub use elaborator::{
    compose_process, elaborate, elaborate_composition, Diagnostic, DiagnosticKind, Elaboration,
    Mode, Signature,
};
pub use dynamics::{
    comp_steps, equiv_steps, rewrite_to_normal, shift_steps, subject_reduce, DynamicsError,
    Relation, RewriteStep,
};
pub use frontend::{
    analyze_derivation, analyze_process, compute_bounds, depth_from_interface, parse, run_cli,
    AnalysisReport, Bounds, ParseError, SourceFile,
};
pub use measures::{
    duplicability, measure, measure_with, virtual_occurrences, weight, weight_n, MeasureError,
    MeasureReport,
};
pub use types::{context_depth, type_depth, ContextTriple, Judgment, Type, Zone};
