//! Quantitative measures over derivations: per-channel fan-out,
//! duplicability, and the weight that budgets interaction steps.
//!
//! [`fo`] counts the virtual occurrences of an exponential channel: the
//! number of spawns a run can fire on it, with exponential cuts multiplying
//! the server side by the client's own fan-out on the cut channel.
//! [`duplicability`] is the largest fan-out any bang-left node promotes;
//! [`weight_n`] recounts the prefixes of the erasure with every server body
//! charged `n` times; [`weight`] instantiates `n` at the derivation's own
//! duplicability. The recursions are total and assume nothing about
//! validity, so they apply to intermediate trees mid-rewrite; [`measure`]
//! checks first and bundles everything a report needs.

use indexmap::IndexMap;
use thiserror::Error;

use crate::calculus::{box_depth, size, Name};
use crate::derivation::{check_derivation, erase, CheckError, Derivation};
use crate::types::Judgment;

/// Every measure of one derivation, taken at its conclusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureReport {
    /// Prefix count of the erased process.
    pub process_size: usize,
    /// Deepest replicated-input nesting in the erasure.
    pub box_depth: usize,
    /// Largest fan-out promoted at a bang-left node; at least 1.
    pub duplicability: usize,
    /// [`weight_n`] at `n = duplicability`: the interaction-step budget.
    pub weight: usize,
    /// Fan-out of each exponential channel the conclusion keeps open,
    /// auxiliary zone first.
    pub per_channel_fo: IndexMap<Name, usize>,
}

/// Why a measure request was refused.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MeasureError {
    /// The queried channel is in neither exponential zone of the conclusion.
    #[error("unknown-channel: {name} is not an exponential channel of the conclusion")]
    UnknownChannel { name: Name },
    /// The derivation does not check, so it has no conclusion to measure.
    #[error(transparent)]
    Invalid(#[from] CheckError),
}

/// Virtual occurrences of `x` in `d`: how many times a run of the erasure
/// can spawn on `x`.
///
/// Each sharp spawn on `x` counts 1 plus whatever its premise still holds; a
/// bang spawn counts exactly 1, since its channel is fresh there. Outputs
/// and independent cuts add their premises, a case keeps only its larger
/// branch (one run takes one branch), and an exponential cut on `c` against
/// client `E` scales the server's count by `fo(c, E)`, one server copy per
/// client use. Server bodies are sealed: nothing inside a replicated input
/// counts toward its conclusion. Channels absent from the tree count 0; the
/// recursion is total, never inspects zones, and stops where the name is
/// rebound, so rewrites that nest cuts under a reused name still count only
/// the occurrences visible from the conclusion.
pub fn fo(x: &Name, d: &Derivation) -> usize {
    match d {
        Derivation::OneR { .. } | Derivation::BangR { .. } => 0,
        Derivation::BSharp { chan, sub, .. } if chan == x => 1 + fo(x, sub),
        Derivation::BBang { chan, .. } if chan == x => 1,
        // Shadowing guards: past a node that rebinds x, mentions of the name
        // belong to the inner binder, not to the x being counted. A prefix
        // bound never reaches the conclusion; a cut channel only flows on as
        // a door of the server body.
        Derivation::TensorR { bound, .. }
        | Derivation::TensorL { bound, .. }
        | Derivation::LolliL { bound, .. }
        | Derivation::LolliR { bound, .. }
        | Derivation::BSharp { bound, .. }
        | Derivation::BBang { bound, .. }
            if bound == x =>
        {
            0
        }
        Derivation::Cut { chan, .. } if chan == x => 0,
        Derivation::CutBang { chan, left, right, .. }
        | Derivation::CutSharp { chan, left, right, .. }
            if chan == x =>
        {
            fo(chan, right) * fo(x, left)
        }
        Derivation::OneL { sub, .. }
        | Derivation::TensorL { sub, .. }
        | Derivation::LolliR { sub, .. }
        | Derivation::PlusR1 { sub, .. }
        | Derivation::PlusR2 { sub, .. }
        | Derivation::WithL1 { sub, .. }
        | Derivation::WithL2 { sub, .. }
        | Derivation::BSharp { sub, .. }
        | Derivation::BBang { sub, .. }
        | Derivation::BangLSharp { sub, .. }
        | Derivation::BangLBang { sub, .. } => fo(x, sub),
        Derivation::TensorR { left, right, .. }
        | Derivation::LolliL { left, right, .. }
        | Derivation::Cut { left, right, .. } => fo(x, left) + fo(x, right),
        Derivation::PlusL { left, right, .. } | Derivation::WithR { left, right, .. } => {
            fo(x, left).max(fo(x, right))
        }
        Derivation::CutBang { chan, left, right, .. }
        | Derivation::CutSharp { chan, left, right, .. } => {
            fo(chan, right) * fo(x, left) + fo(x, right)
        }
    }
}

/// The largest fan-out `d` ever promotes to a linear bang: the maximum of
/// `fo(chan, premise)` over bang-left nodes, and 1 when there are none.
pub fn duplicability(d: &Derivation) -> usize {
    fn walk(d: &Derivation) -> usize {
        let here = match d {
            Derivation::BangLSharp { chan, sub } | Derivation::BangLBang { chan, sub } => {
                fo(chan, sub)
            }
            _ => 0,
        };
        d.premises().into_iter().map(walk).fold(here, usize::max)
    }
    walk(d).max(1)
}

/// Weight with the server multiplier fixed at `n`.
///
/// Prefix-bearing nodes count 1 like process size, unit and bang-left nodes
/// count 0, and a case pays for both branches. A replicated input charges
/// its body `n` times, plus `n` for the prefix itself. An exponential cut on
/// `c` charges the server once per client use, `fo(c, client)` in all; the
/// bang cut also re-charges the replicated prefix inside the multiplier,
/// while the sharp cut's prefix is already paid by the client's spawns. The
/// rewrite suite pins exactly this split: every interaction strictly
/// decreases the weight under it.
pub fn weight_n(d: &Derivation, n: usize) -> usize {
    match d {
        Derivation::OneR { .. } => 0,
        Derivation::OneL { sub, .. }
        | Derivation::BangLSharp { sub, .. }
        | Derivation::BangLBang { sub, .. } => weight_n(sub, n),
        Derivation::TensorL { sub, .. }
        | Derivation::LolliR { sub, .. }
        | Derivation::PlusR1 { sub, .. }
        | Derivation::PlusR2 { sub, .. }
        | Derivation::WithL1 { sub, .. }
        | Derivation::WithL2 { sub, .. }
        | Derivation::BSharp { sub, .. }
        | Derivation::BBang { sub, .. } => 1 + weight_n(sub, n),
        Derivation::TensorR { left, right, .. }
        | Derivation::LolliL { left, right, .. }
        | Derivation::PlusL { left, right, .. }
        | Derivation::WithR { left, right, .. } => 1 + weight_n(left, n) + weight_n(right, n),
        Derivation::BangR { sub, .. } => n * (weight_n(sub, n) + 1),
        Derivation::Cut { left, right, .. } => weight_n(left, n) + weight_n(right, n),
        Derivation::CutBang { chan, left, right, .. } => {
            fo(chan, right) * (weight_n(left, n) + 1) + weight_n(right, n)
        }
        Derivation::CutSharp { chan, left, right, .. } => {
            fo(chan, right) * weight_n(left, n) + weight_n(right, n)
        }
    }
}

/// [`weight_n`] at the derivation's own duplicability.
pub fn weight(d: &Derivation) -> usize {
    weight_n(d, duplicability(d))
}

/// [`fo`] behind a validity gate: `d` must check, and `x` must be an
/// exponential channel of its conclusion. Querying the bound channel of an
/// exponential cut is also allowed and reports the client-side count.
pub fn virtual_occurrences(x: &Name, d: &Derivation) -> Result<usize, MeasureError> {
    let j = check_derivation(d)?;
    if j.contexts.auxiliary.contains(x) || j.contexts.multiplexor.contains(x) {
        return Ok(fo(x, d));
    }
    match d {
        Derivation::CutBang { chan, right, .. } | Derivation::CutSharp { chan, right, .. }
            if chan == x =>
        {
            Ok(fo(x, right))
        }
        _ => Err(MeasureError::UnknownChannel { name: x.clone() }),
    }
}

/// Check `d` and bundle every measure of it.
pub fn measure(d: &Derivation) -> Result<MeasureReport, MeasureError> {
    let j = check_derivation(d)?;
    Ok(measure_with(d, &j))
}

/// [`measure`] with the conclusion supplied by the caller, for trees checked
/// under a different discipline than the kernel's.
pub fn measure_with(d: &Derivation, conclusion: &Judgment) -> MeasureReport {
    let hat = erase(d);
    let exponential = conclusion
        .contexts
        .auxiliary
        .iter()
        .chain(conclusion.contexts.multiplexor.iter());
    MeasureReport {
        process_size: size(&hat),
        box_depth: box_depth(&hat),
        duplicability: duplicability(d),
        weight: weight(d),
        per_channel_fo: exponential.map(|(name, _)| (name.clone(), fo(name, d))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{box_depth, size};
    use crate::derivation::testkit::{drop_one, n, samples, zone};
    use crate::derivation::{lift, weaken};
    use crate::types::{Type, Zone};

    /// `(vz0)server<z0>. ... .0 :: subject : 1` with `server : 1` spent
    /// `count` times from the multiplexor zone.
    fn spawn_chain(server: &str, count: usize, subject: &str) -> Derivation {
        let mut d =
            Derivation::one_r_in(subject, Zone::new(), zone(&[(server, Type::One)]));
        for i in (0..count).rev() {
            let b = format!("z{i}");
            d = Derivation::b_sharp(server, b.as_str(), Derivation::one_l(b.as_str(), d));
        }
        d
    }

    /// `(vv)door<v>.0 :: subject : 1` with `door : 1` auxiliary: the shape
    /// an exponential cut wants on its server side.
    fn door_body(door: &str, subject: &str) -> Derivation {
        Derivation::b_bang(door, "v", Type::One, Derivation::one_l("v", Derivation::one_r(subject)))
    }

    fn cut_free_simple(d: &Derivation) -> bool {
        let here = !matches!(
            d,
            Derivation::Cut { .. }
                | Derivation::CutBang { .. }
                | Derivation::CutSharp { .. }
                | Derivation::BangR { .. }
        );
        here && d.premises().into_iter().all(cut_free_simple)
    }

    fn has_cut_bang(d: &Derivation) -> bool {
        matches!(d, Derivation::CutBang { .. })
            || d.premises().into_iter().any(has_cut_bang)
    }

    #[test]
    fn fo_sums_across_output_splits() {
        let left = spawn_chain("w", 1, "y");
        let right = spawn_chain("w", 2, "x");
        let d = Derivation::tensor_r("x", "y", left.clone(), right.clone());
        check_derivation(&d).unwrap();
        assert_eq!(fo(&n("w"), &left), 1);
        assert_eq!(fo(&n("w"), &right), 2);
        assert_eq!(fo(&n("w"), &d), 3);
    }

    #[test]
    fn fo_takes_the_larger_case_branch() {
        // One run takes one branch, so a channel used once per branch still
        // counts once in the conclusion.
        let once = Derivation::with_r("x", spawn_chain("w", 1, "x"), spawn_chain("w", 1, "x"));
        check_derivation(&once).unwrap();
        assert_eq!(fo(&n("w"), &once), 1);

        let uneven = Derivation::with_r("x", spawn_chain("w", 1, "x"), spawn_chain("w", 3, "x"));
        check_derivation(&uneven).unwrap();
        assert_eq!(fo(&n("w"), &uneven), 3);
    }

    #[test]
    fn fo_counts_spawn_prefixes() {
        let d = spawn_chain("u", 3, "c");
        check_derivation(&d).unwrap();
        assert_eq!(fo(&n("u"), &d), 3);
        assert_eq!(virtual_occurrences(&n("u"), &d), Ok(3));

        // A bang spawn's channel is fresh, so it counts exactly once no
        // matter what the premise does.
        let fresh = door_body("d", "b");
        check_derivation(&fresh).unwrap();
        assert_eq!(fo(&n("d"), &fresh), 1);
        assert_eq!(virtual_occurrences(&n("d"), &fresh), Ok(1));
    }

    #[test]
    fn fo_follows_the_cut_formula() {
        // Server body spawning once on its door `w`, cut against a client
        // that uses the cut channel `u` twice and `w` once directly: each of
        // the two server copies spends `w` once more.
        let server = door_body("w", "b");
        let mut client =
            Derivation::one_r_in("c", Zone::new(), zone(&[("u", Type::One), ("w", Type::One)]));
        client = Derivation::b_sharp("w", "r", Derivation::one_l("r", client));
        client = Derivation::b_sharp("u", "q", Derivation::one_l("q", client));
        client = Derivation::b_sharp("u", "p", Derivation::one_l("p", client));
        let d = Derivation::cut_sharp("u", Type::One, server.clone(), client.clone());
        let j = check_derivation(&d).unwrap();
        assert!(j.contexts.multiplexor.contains(&n("w")));
        assert_eq!(fo(&n("u"), &client), 2);
        assert_eq!(
            fo(&n("w"), &d),
            fo(&n("u"), &client) * fo(&n("w"), &server) + fo(&n("w"), &client)
        );
        assert_eq!(fo(&n("w"), &d), 3);
        assert_eq!(virtual_occurrences(&n("u"), &d), Ok(2));

        let bang_client = Derivation::b_bang(
            "u",
            "p",
            Type::One,
            Derivation::one_l("p", door_body("w", "c")),
        );
        let b = Derivation::cut_bang("u", Type::One, Derivation::one_r("b"), bang_client.clone());
        check_derivation(&b).unwrap();
        assert_eq!(
            fo(&n("w"), &b),
            fo(&n("u"), &bang_client) * fo(&n("w"), &Derivation::one_r("b"))
                + fo(&n("w"), &bang_client)
        );
        assert_eq!(fo(&n("w"), &b), 1);
    }

    #[test]
    fn fo_stops_at_a_rebound_name() {
        // A closed inner cut reuses the name `s`; the outer `s` is a door of
        // a sibling server body. The two inner spawns belong to the inner
        // binder and must not leak into the outer count.
        let inner = Derivation::cut_sharp(
            "s",
            Type::One,
            Derivation::one_r("t"),
            Derivation::b_sharp(
                "s",
                "z1",
                Derivation::b_sharp(
                    "s",
                    "z2",
                    Derivation::one_l(
                        "z1",
                        Derivation::one_l(
                            "z2",
                            Derivation::one_r_in("u", Zone::new(), zone(&[("s", Type::One)])),
                        ),
                    ),
                ),
            ),
        );
        let body = Derivation::b_bang("s", "r", Type::One, Derivation::one_l("r", Derivation::one_r("b")));
        let outer = Derivation::cut_bang(
            "v",
            Type::One,
            body,
            Derivation::b_bang("v", "y", Type::One, Derivation::one_l("y", inner)),
        );
        let j = check_derivation(&outer).unwrap();
        assert!(j.contexts.auxiliary.contains(&n("s")));
        assert_eq!(fo(&n("s"), &outer), 1);
    }

    #[test]
    fn duplicability_reads_fanout_at_lifts() {
        assert_eq!(duplicability(&Derivation::one_r("x")), 1);

        let two = Derivation::bang_l_sharp("u", spawn_chain("u", 2, "c"));
        check_derivation(&two).unwrap();
        assert_eq!(duplicability(&two), 2);

        let three = Derivation::bang_l_sharp("v", spawn_chain("v", 3, "d"));
        let d = Derivation::cut("c", Type::One, two.clone(), Derivation::one_l("c", three));
        check_derivation(&d).unwrap();
        assert_eq!(duplicability(&d), 3);

        // The bang-left variant reads the same quantity off its premise.
        let body = door_body("x", "z");
        let lifted = Derivation::bang_l_bang("x", body.clone());
        check_derivation(&lifted).unwrap();
        assert_eq!(
            duplicability(&lifted),
            duplicability(&body).max(fo(&n("x"), &body))
        );
    }

    #[test]
    fn weight_charges_prefixes_like_size() {
        let simple: Vec<Derivation> = samples()
            .into_iter()
            .filter(|d| cut_free_simple(d) && duplicability(d) == 1)
            .collect();
        assert!(simple.len() >= 10);
        for d in simple {
            assert_eq!(weight(&d), size(&erase(&d)), "{d:?}");
        }
    }

    #[test]
    fn weight_scales_server_bodies() {
        let plain = Derivation::bang_r("x", "y", vec![], Derivation::one_r("y"));
        for m in 1..=4 {
            assert_eq!(weight_n(&plain, m), m);
        }

        let bigger = Derivation::bang_r(
            "x",
            "y",
            vec![],
            Derivation::plus_r1("y", Type::One, Derivation::one_r("y")),
        );
        check_derivation(&bigger).unwrap();
        assert_eq!(weight_n(&bigger, 3), 3 * 2);

        // The multiplier is the weight parameter, not the door count.
        let doored = Derivation::bang_r(
            "x",
            "y",
            vec![n("c")],
            Derivation::one_r_in("y", zone(&[("c", Type::One)]), Zone::new()),
        );
        check_derivation(&doored).unwrap();
        assert_eq!(weight_n(&doored, 3), 3);
    }

    #[test]
    #[allow(clippy::identity_op)] // the expected values spell the cut formulas
    fn weight_distinguishes_the_cuts() {
        let server = door_body("d", "b");
        assert_eq!(weight(&server), 1);

        let bang_client =
            Derivation::b_bang("u", "p", Type::One, Derivation::one_l("p", Derivation::one_r("c")));
        let via_bang = Derivation::cut_bang("u", Type::One, server.clone(), bang_client);
        check_derivation(&via_bang).unwrap();
        assert_eq!(weight(&via_bang), 1 * (1 + 1) + 1);

        let sharp_client = spawn_chain("u", 1, "c");
        let via_sharp = Derivation::cut_sharp("u", Type::One, server.clone(), sharp_client);
        check_derivation(&via_sharp).unwrap();
        assert_eq!(weight(&via_sharp), 1 * 1 + 1);

        // Three client uses, three server charges.
        let wide = Derivation::cut_sharp("u", Type::One, server, spawn_chain("u", 3, "c"));
        check_derivation(&wide).unwrap();
        assert_eq!(weight(&wide), 3 * 1 + 3);

        // A linear cut adds nothing of its own.
        let plain =
            Derivation::cut("c", Type::One, Derivation::one_r("c"), drop_one("c", "z"));
        assert_eq!(weight(&plain), 0);
    }

    #[test]
    fn weight_is_monotone_in_the_parameter() {
        for d in samples() {
            for m in 1..=4 {
                assert!(
                    weight_n(&d, m) <= weight_n(&d, m + 1),
                    "weight not monotone at n={m} for {d:?}"
                );
            }
        }
    }

    #[test]
    fn duplicability_bounded_by_erased_size() {
        let mut population = samples();
        population.push(Derivation::bang_l_sharp("u", spawn_chain("u", 2, "c")));
        population.push(Derivation::bang_l_sharp("u", spawn_chain("u", 5, "c")));
        for d in samples() {
            population.push(lift(&d).unwrap());
        }
        for d in population {
            check_derivation(&d).unwrap();
            assert!(
                duplicability(&d) <= size(&erase(&d)).max(1),
                "duplicability exceeds erased size for {d:?}"
            );
        }
    }

    #[test]
    fn weight_within_size_polynomial_for_lift_mediated_fanout() {
        // The size polynomial presumes every fan-out is recorded by a
        // bang-left node, so the populations here reach servers only through
        // lifts or single spawns. The companion test below shows what the
        // multiplexor zone can do without that discipline.
        let mut population = samples();
        for d in samples() {
            population.push(lift(&d).unwrap());
        }
        for k in 1..=4 {
            population.push(Derivation::bang_l_sharp("u", spawn_chain("u", k, "c")));
        }
        for d in population {
            let hat = erase(&d);
            let dup = duplicability(&d);
            for m in dup..dup + 3 {
                let bound = size(&hat).max(1) * m.pow(box_depth(&hat) as u32 + 1);
                assert!(
                    weight_n(&d, m) <= bound,
                    "weight {} exceeds {} at n={m} for {d:?}",
                    weight_n(&d, m),
                    bound
                );
            }
        }
    }

    #[test]
    fn direct_multiplexor_fanout_escapes_the_size_polynomial() {
        // A client may reach a server directly through the multiplexor
        // zone; no bang-left node records that fan-out, duplicability
        // understates the true multiplier, and the size polynomial fails at
        // n = duplicability. The weight itself is still the step budget; the
        // polynomial envelope is only claimed where fan-out is lifted.
        let d = Derivation::cut_sharp(
            "u",
            Type::One,
            door_body("d", "b"),
            spawn_chain("u", 3, "c"),
        );
        check_derivation(&d).unwrap();
        let hat = erase(&d);
        assert_eq!(size(&hat), 5);
        assert_eq!(box_depth(&hat), 1);
        assert_eq!(duplicability(&d), 1);
        assert_eq!(weight(&d), 6);
        assert!(weight(&d) > size(&hat).max(1) * 1usize.pow(2));
        assert!(weight_n(&d, 3) <= size(&hat).max(1) * 3usize.pow(2));
    }

    #[test]
    fn weight_survives_weakening_and_lifting() {
        for d in samples() {
            let weakened = weaken(&d, &zone(&[("fresh", Type::One)])).unwrap();
            assert_eq!(weight(&weakened), weight(&d));
            assert_eq!(duplicability(&weakened), duplicability(&d));

            let lifted = lift(&d).unwrap();
            assert_eq!(duplicability(&lifted), duplicability(&d));
            assert!(weight(&lifted) <= weight(&d));
            if !has_cut_bang(&d) {
                assert_eq!(weight(&lifted), weight(&d));
            }
        }
    }

    #[test]
    fn reports_bundle_every_measure() {
        let empty = measure(&Derivation::one_r("x")).unwrap();
        assert_eq!(
            empty,
            MeasureReport {
                process_size: 0,
                box_depth: 0,
                duplicability: 1,
                weight: 0,
                per_channel_fo: IndexMap::new(),
            }
        );

        let client = spawn_chain("x0", 1, "w");
        let r = measure(&client).unwrap();
        assert_eq!(r.process_size, 1);
        assert_eq!(r.box_depth, 0);
        assert_eq!(r.duplicability, 1);
        assert_eq!(r.weight, 1);
        assert_eq!(r.per_channel_fo, IndexMap::from([(n("x0"), 1)]));

        // A served body of size 1 at duplicability 1 weighs size + 1.
        let served = Derivation::bang_r(
            "x",
            "y",
            vec![],
            Derivation::plus_r1("y", Type::One, Derivation::one_r("y")),
        );
        let r = measure(&served).unwrap();
        assert_eq!(r.process_size, 2);
        assert_eq!(r.box_depth, 1);
        assert_eq!(r.weight, r.process_size);
        assert_eq!(weight_n(&served, 1), 1 + 1);
    }

    #[test]
    fn occurrence_queries_validate_their_channel() {
        let d = spawn_chain("u", 2, "c");
        assert_eq!(virtual_occurrences(&n("u"), &d), Ok(2));
        assert_eq!(
            virtual_occurrences(&n("ghost"), &d),
            Err(MeasureError::UnknownChannel { name: n("ghost") })
        );

        // Linear channels have no fan-out.
        let linear = drop_one("y", "z");
        assert_eq!(
            virtual_occurrences(&n("y"), &linear),
            Err(MeasureError::UnknownChannel { name: n("y") })
        );

        // Unchecked trees are refused outright.
        let broken = Derivation::one_l("y", Derivation::one_l("y", Derivation::one_r("z")));
        assert!(matches!(
            virtual_occurrences(&n("y"), &broken),
            Err(MeasureError::Invalid(_))
        ));
    }
}
