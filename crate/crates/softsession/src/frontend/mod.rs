//! File handling, the bound analyzer, and the `sst` command line.
//!
//! The analyzer compares two sides of a checked derivation. The static
//! side reads bounds off the tree: the weight is an exact step bound
//! because communication strictly decreases it, and the interface sizes
//! give a polynomial envelope `s^(b+2)` that depends only on the size and
//! box depth of the erasure. The dynamic side runs the erasure, mirroring
//! every step on the derivation itself, and records what actually
//! happened. For kernel-checked trees the observations land inside the
//! bounds whenever the budget suffices; reference-mode runs only report
//! observations, since nothing was checked that would justify a verdict.

mod cli;
mod parse;

pub use cli::run_cli;
pub use parse::{
    parse, print_derivation, print_source, Definition, Found, Item, ItemKind, ParseError,
    SourceFile,
};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::calculus::{box_depth, find_redexes, reduce_trace, size, Process, Strategy};
use crate::derivation::{check_derivation, erase, CheckError, Derivation};
use crate::dynamics::subject_reduce;
use crate::measures::{measure, MeasureError, MeasureReport};
use crate::types::{context_depth, type_depth, Judgment};

/// Static bounds read off a checked derivation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Bounds {
    /// Exact bound on communication steps: the weight of the tree.
    pub step_bound: usize,
    /// Interface-level envelope `s^(b+2)`, a function of the erasure alone.
    pub polynomial_bound: usize,
    /// Bound on the size of any intermediate process.
    pub size_bound: usize,
}

fn envelope(s: usize, b: usize) -> usize {
    s.saturating_pow((b + 2) as u32)
}

/// Computes the step, polynomial, and size bounds for a derivation.
pub fn compute_bounds(d: &Derivation) -> Result<Bounds, CheckError> {
    check_derivation(d)?;
    let erased = erase(d);
    let s = size(&erased).max(1);
    let step_bound = crate::measures::weight(d);
    let polynomial_bound = envelope(s, box_depth(&erased));
    let size_bound = step_bound.saturating_mul(s).saturating_add(s);
    Ok(Bounds { step_bound, polynomial_bound, size_bound })
}

/// Box depth as recovered from a judgment alone: the maximum depth across
/// the three zones and the conclusion type. For a normal derivation this
/// equals the box depth of its erasure.
pub fn depth_from_interface(j: &Judgment) -> usize {
    context_depth(&j.contexts).max(type_depth(&j.ty))
}

/// The measure block of a report. Reference-mode runs have no derivation,
/// so the tree-level entries are absent there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeasureSection {
    pub process_size: usize,
    pub box_depth: usize,
    pub duplicability: Option<usize>,
    pub weight: Option<usize>,
    pub per_channel_fo: BTreeMap<String, usize>,
}

impl MeasureSection {
    pub(crate) fn from_report(r: &MeasureReport) -> MeasureSection {
        MeasureSection {
            process_size: r.process_size,
            box_depth: r.box_depth,
            duplicability: Some(r.duplicability),
            weight: Some(r.weight),
            per_channel_fo: r.per_channel_fo.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        }
    }
}

/// What the analyzer found: bounds, observations, and the comparison.
/// `within_bounds` is only claimed for kernel-checked runs, and is only
/// meaningful when the budget did not run out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub measures: MeasureSection,
    pub step_bound: usize,
    pub polynomial_bound: usize,
    pub size_bound: usize,
    pub observed_steps: usize,
    pub max_observed_size: usize,
    pub within_bounds: Option<bool>,
    pub mode: String,
    pub budget_exhausted: bool,
}

/// Analyzes a kernel-checked derivation by driving its erasure to normal
/// form (leftmost, at most `budget` communication steps) while mirroring
/// every step on the tree. Panics if a mirror step cannot be found, which
/// signals a defect in the rewrite rules rather than in the input.
pub fn analyze_derivation(d: &Derivation, budget: usize) -> Result<AnalysisReport, MeasureError> {
    let report = measure(d)?;
    let bounds = compute_bounds(d).expect("measured derivations check");
    let mut current = d.clone();
    let mut observed_steps = 0usize;
    let mut max_observed_size = size(&erase(&current));
    let budget_exhausted = loop {
        let erased = erase(&current);
        let redexes = find_redexes(&erased);
        let Some(redex) = redexes.first() else { break false };
        if observed_steps == budget {
            break true;
        }
        match subject_reduce(&current, redex) {
            Ok((next, _)) => {
                current = next;
                observed_steps += 1;
                max_observed_size = max_observed_size.max(size(&erase(&current)));
            }
            Err(err) => panic!("rewriting stalled on an enabled redex: {err}"),
        }
    };
    let within_bounds =
        observed_steps <= bounds.step_bound && max_observed_size <= bounds.size_bound;
    Ok(AnalysisReport {
        measures: MeasureSection::from_report(&report),
        step_bound: bounds.step_bound,
        polynomial_bound: bounds.polynomial_bound,
        size_bound: bounds.size_bound,
        observed_steps,
        max_observed_size,
        within_bounds: Some(within_bounds),
        mode: "dsll".into(),
        budget_exhausted,
    })
}

/// Analyzes a bare process (reference mode). The envelope is reported as
/// if the soft discipline applied, for comparison only; no verdict is
/// claimed either way.
pub fn analyze_process(p: &Process, budget: usize) -> AnalysisReport {
    let s = size(p).max(1);
    let b = box_depth(p);
    let poly = envelope(s, b);
    let trace = reduce_trace(p, budget, Strategy::Leftmost);
    AnalysisReport {
        measures: MeasureSection {
            process_size: size(p),
            box_depth: b,
            duplicability: None,
            weight: None,
            per_channel_fo: BTreeMap::new(),
        },
        step_bound: poly,
        polynomial_bound: poly,
        size_bound: poly.saturating_mul(s).saturating_add(s),
        observed_steps: trace.steps,
        max_observed_size: trace.max_size(),
        within_bounds: None,
        mode: "dill".into(),
        budget_exhausted: trace.budget_exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Name;
    use crate::derivation::testkit::{samples, zone};
    use crate::types::{ContextTriple, Type, Zone};

    fn comm_pair() -> Derivation {
        // (nu c)(c<v> | c(v)) :: z:1, one communication step
        Derivation::cut(
            "c",
            Type::tensor(Type::One, Type::One),
            Derivation::tensor_r("c", "v", Derivation::one_r("v"), Derivation::one_r("c")),
            Derivation::tensor_l("c", "v", Derivation::one_l("v", Derivation::one_l("c", Derivation::one_r("z")))),
        )
    }

    #[test]
    fn the_envelope_is_the_interface_polynomial() {
        assert_eq!(envelope(10, 1), 1000);
        assert_eq!(envelope(1, 0), 1);
        assert_eq!(envelope(3, 2), 81);
        assert_eq!(envelope(usize::MAX, 3), usize::MAX);
    }

    #[test]
    fn an_axiom_has_a_zero_step_bound() {
        let b = compute_bounds(&Derivation::one_r("x")).expect("axiom checks");
        assert_eq!(b.step_bound, 0);
        assert_eq!(b.polynomial_bound, 1);
        assert_eq!(b.size_bound, 1);
    }

    #[test]
    fn the_weight_sits_under_the_envelope_on_the_sample_corpus() {
        for d in samples() {
            let b = compute_bounds(&d).expect("samples check");
            assert!(
                b.step_bound <= b.polynomial_bound,
                "weight {} exceeds envelope {}",
                b.step_bound,
                b.polynomial_bound
            );
        }
    }

    #[test]
    fn interface_depth_reads_off_the_judgment() {
        let j = Judgment::new(
            ContextTriple::new(Zone::new(), Zone::new(), Zone::new()).unwrap(),
            Name::from("x"),
            Type::One,
        )
        .unwrap();
        assert_eq!(depth_from_interface(&j), 0);
        let j = Judgment::new(
            ContextTriple::new(Zone::new(), zone(&[("xn", Type::bang(Type::One))]), Zone::new())
                .unwrap(),
            Name::from("x0"),
            Type::bang(Type::One),
        )
        .unwrap();
        assert_eq!(depth_from_interface(&j), 1);
    }

    #[test]
    fn a_normal_erasure_analyzes_to_zero_steps_within_bounds() {
        let r = analyze_derivation(&Derivation::one_r("x"), 100).expect("axiom measures");
        assert_eq!(r.observed_steps, 0);
        assert_eq!(r.within_bounds, Some(true));
        assert!(!r.budget_exhausted);
        assert_eq!(r.mode, "dsll");
        assert_eq!(r.measures.weight, Some(0));
    }

    #[test]
    fn a_communication_step_is_observed_and_bounded() {
        let r = analyze_derivation(&comm_pair(), 100).expect("pair measures");
        assert_eq!(r.observed_steps, 1);
        assert!(r.observed_steps <= r.step_bound);
        assert!(r.max_observed_size <= r.size_bound);
        assert_eq!(r.within_bounds, Some(true));
        assert!(!r.budget_exhausted);
    }

    #[test]
    fn an_exhausted_budget_is_flagged() {
        let r = analyze_derivation(&comm_pair(), 0).expect("pair measures");
        assert_eq!(r.observed_steps, 0);
        assert!(r.budget_exhausted);
    }

    #[test]
    fn reference_mode_reports_without_a_verdict() {
        let p = Process::restrict(
            "c",
            Process::par(
                Process::output("c", "v", Process::Nil),
                Process::input("c", "u", Process::Nil),
            ),
        );
        let r = analyze_process(&p, 100);
        assert_eq!(r.observed_steps, 1);
        assert_eq!(r.within_bounds, None);
        assert_eq!(r.mode, "dill");
        assert_eq!(r.measures.duplicability, None);
        assert_eq!(r.measures.weight, None);
    }

    #[test]
    fn reports_expose_a_fixed_field_set() {
        let dsll = serde_json::to_value(analyze_derivation(&comm_pair(), 10).unwrap()).unwrap();
        let dill = serde_json::to_value(analyze_process(&Process::Nil, 10)).unwrap();
        for report in [&dsll, &dill] {
            let obj = report.as_object().expect("report is an object");
            let mut keys: Vec<_> = obj.keys().map(String::as_str).collect();
            keys.sort_unstable();
            assert_eq!(
                keys,
                vec![
                    "budgetExhausted",
                    "maxObservedSize",
                    "measures",
                    "mode",
                    "observedSteps",
                    "polynomialBound",
                    "sizeBound",
                    "stepBound",
                    "withinBounds",
                ]
            );
            let measures = obj["measures"].as_object().expect("measures is an object");
            let mut mkeys: Vec<_> = measures.keys().map(String::as_str).collect();
            mkeys.sort_unstable();
            assert_eq!(
                mkeys,
                vec!["boxDepth", "duplicability", "perChannelFo", "processSize", "weight"]
            );
        }
        assert!(dill["withinBounds"].is_null());
        assert!(dsll["withinBounds"].as_bool().unwrap());
    }
}
