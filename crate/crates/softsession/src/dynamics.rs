//! Rewriting on derivations: cut elimination classified by cost, and a
//! driver that mirrors process reduction step for step on the trees.
//!
//! Steps come in three relations. `comp` steps are the communication steps;
//! each erases to one process reduction (or to a congruent term, for the
//! spawn rules whose erasure already contains the contracted copy) and
//! strictly decreases the weight. `shift` steps open a boxed server for use:
//! weight never increases, the erasure is unchanged up to congruence.
//! `equiv` steps are invertible rearrangements, weight-neutral and
//! congruence-neutral, enumerated in both directions.
//!
//! Every step carries the whole rewritten tree. A step is only emitted when
//! that tree checks again and its conclusion keeps the subject, the type,
//! the linear zone, and the combined exponential zone of the original;
//! exponential channels may migrate between the auxiliary and multiplexor
//! zones but never appear or disappear. The one exception to congruence of
//! erasures is server duplication, which is congruent only after dead
//! servers are collected on both sides; the enumerator therefore emits a
//! duplication only when one of the two copies is dead, while the driver
//! may duplicate live servers internally because it always re-merges the
//! copies before returning.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::calculus::{
    congruent, find_redexes, reduce_step, Name, Process, Redex, RedexKind, ReduceError,
};
use crate::derivation::{check_derivation, erase, lift, weaken, CheckError, Derivation};
use crate::measures::fo;
use crate::types::{type_equal, Type, Zone};

/// Which of the three rewrite relations a step belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Comp,
    Shift,
    Equiv,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Comp => "comp",
            Relation::Shift => "shift",
            Relation::Equiv => "equiv",
        })
    }
}

/// One rewrite, recorded against the tree it was applied to. `position` is
/// the premise path of the node the rule matched at; `result` is the whole
/// rewritten tree, which re-checks with the interface described in the
/// module docs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteStep {
    pub relation: Relation,
    pub rule_name: &'static str,
    pub position: Vec<usize>,
    pub result: Derivation,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DynamicsError {
    /// The input tree does not check; there is nothing sound to rewrite.
    #[error("derivation does not check: {0}")]
    Invalid(#[from] CheckError),
    /// The requested redex does not fire in the erasure.
    #[error(transparent)]
    Stale(#[from] ReduceError),
    /// Bounded search found no witness for an enabled redex. The budget is
    /// quadratic in the node count, which suffices for every reachable
    /// shape; exhausting it means the rewrite rules lost a step the
    /// processes can take, a defect in this module rather than in the input.
    #[error("no rewrite witness for the {kind:?} step on {channel} within {budget} rewrites")]
    NoWitness { kind: RedexKind, channel: Name, budget: usize },
}

// ---------------------------------------------------------------------------
// Tree surgery.

fn node_count(d: &Derivation) -> usize {
    1 + d.premises().into_iter().map(node_count).sum::<usize>()
}

fn subtree_paths(d: &Derivation) -> Vec<Vec<usize>> {
    fn walk(d: &Derivation, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        for (i, p) in d.premises().into_iter().enumerate() {
            path.push(i);
            walk(p, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(d, &mut Vec::new(), &mut out);
    out
}

fn node_at<'a>(d: &'a Derivation, path: &[usize]) -> &'a Derivation {
    let mut cur = d;
    for &i in path {
        cur = cur.premises()[i];
    }
    cur
}

fn rebuild_with(node: &Derivation, idx: usize, child: Derivation) -> Derivation {
    use Derivation as D;
    match node {
        D::OneR { .. } => unreachable!("axioms have no premises"),
        D::OneL { chan, .. } => D::one_l(chan.clone(), child),
        D::TensorL { chan, bound, .. } => D::tensor_l(chan.clone(), bound.clone(), child),
        D::TensorR { subject, bound, left, right } => match idx {
            0 => D::tensor_r(subject.clone(), bound.clone(), child, (**right).clone()),
            _ => D::tensor_r(subject.clone(), bound.clone(), (**left).clone(), child),
        },
        D::LolliL { chan, bound, left, right } => match idx {
            0 => D::lolli_l(chan.clone(), bound.clone(), child, (**right).clone()),
            _ => D::lolli_l(chan.clone(), bound.clone(), (**left).clone(), child),
        },
        D::LolliR { subject, bound, .. } => D::lolli_r(subject.clone(), bound.clone(), child),
        D::PlusL { chan, left, right } => match idx {
            0 => D::plus_l(chan.clone(), child, (**right).clone()),
            _ => D::plus_l(chan.clone(), (**left).clone(), child),
        },
        D::PlusR1 { subject, right_type, .. } => {
            D::plus_r1(subject.clone(), right_type.clone(), child)
        }
        D::PlusR2 { subject, left_type, .. } => {
            D::plus_r2(subject.clone(), left_type.clone(), child)
        }
        D::WithL1 { chan, right_type, .. } => D::with_l1(chan.clone(), right_type.clone(), child),
        D::WithL2 { chan, left_type, .. } => D::with_l2(chan.clone(), left_type.clone(), child),
        D::WithR { subject, left, right } => match idx {
            0 => D::with_r(subject.clone(), child, (**right).clone()),
            _ => D::with_r(subject.clone(), (**left).clone(), child),
        },
        D::BSharp { chan, bound, .. } => D::b_sharp(chan.clone(), bound.clone(), child),
        D::BBang { chan, bound, type_a, .. } => {
            D::b_bang(chan.clone(), bound.clone(), type_a.clone(), child)
        }
        D::BangLSharp { chan, .. } => D::bang_l_sharp(chan.clone(), child),
        D::BangLBang { chan, .. } => D::bang_l_bang(chan.clone(), child),
        D::BangR { subject, bound, aux_chans, mux, .. } => {
            D::bang_r_in(subject.clone(), bound.clone(), aux_chans.clone(), mux.clone(), child)
        }
        D::Cut { chan, type_a, left, right } => match idx {
            0 => D::cut(chan.clone(), type_a.clone(), child, (**right).clone()),
            _ => D::cut(chan.clone(), type_a.clone(), (**left).clone(), child),
        },
        D::CutBang { chan, type_a, left, right } => match idx {
            0 => D::cut_bang(chan.clone(), type_a.clone(), child, (**right).clone()),
            _ => D::cut_bang(chan.clone(), type_a.clone(), (**left).clone(), child),
        },
        D::CutSharp { chan, type_a, left, right } => match idx {
            0 => D::cut_sharp(chan.clone(), type_a.clone(), child, (**right).clone()),
            _ => D::cut_sharp(chan.clone(), type_a.clone(), (**left).clone(), child),
        },
    }
}

/// Rebuilds one level of the tree around a rewritten premise, following the
/// exponential migration the rewrite may have caused: a sibling premise of a
/// plain cut is weakened with the newly multiplexed channels, and a `cut_!`
/// or `!L_!` whose channel left the auxiliary zone changes flavor.
fn patch(node: &Derivation, idx: usize, child: Derivation) -> Result<Derivation, CheckError> {
    match node {
        Derivation::Cut { chan, type_a, left, right } => {
            let jc = check_derivation(&child)?;
            let sib = if idx == 0 { right } else { left };
            let js = check_derivation(sib)?;
            let extra = zone_diff(&jc.contexts.multiplexor, &js.contexts.multiplexor);
            let sib = if extra.is_empty() {
                (**sib).clone()
            } else {
                let mut taken = all_names(sib);
                taken.extend(extra.names().cloned());
                weaken_fresh(sib, &extra, &mut taken)?
            };
            Ok(match idx {
                0 => Derivation::cut(chan.clone(), type_a.clone(), child, sib),
                _ => Derivation::cut(chan.clone(), type_a.clone(), sib, child),
            })
        }
        Derivation::CutBang { chan, type_a, left, .. } if idx == 1 => {
            let jc = check_derivation(&child)?;
            if !jc.contexts.auxiliary.contains(chan) && jc.contexts.multiplexor.contains(chan) {
                Ok(Derivation::cut_sharp(chan.clone(), type_a.clone(), (**left).clone(), child))
            } else {
                Ok(Derivation::cut_bang(chan.clone(), type_a.clone(), (**left).clone(), child))
            }
        }
        Derivation::BangLBang { chan, .. } => {
            let jc = check_derivation(&child)?;
            if !jc.contexts.auxiliary.contains(chan) && jc.contexts.multiplexor.contains(chan) {
                Ok(Derivation::bang_l_sharp(chan.clone(), child))
            } else {
                Ok(Derivation::bang_l_bang(chan.clone(), child))
            }
        }
        _ => Ok(rebuild_with(node, idx, child)),
    }
}

/// Replaces the subtree at `path` and repairs every level above it.
fn graft(d: &Derivation, path: &[usize], sub: Derivation) -> Result<Derivation, CheckError> {
    let Some((&idx, rest)) = path.split_first() else { return Ok(sub) };
    let child = graft(d.premises()[idx], rest, sub)?;
    patch(d, idx, child)
}

// ---------------------------------------------------------------------------
// Names.

fn collect_names(d: &Derivation, out: &mut BTreeSet<Name>) {
    use Derivation as D;
    match d {
        D::OneR { subject, aux, mux } => {
            out.insert(subject.clone());
            out.extend(aux.names().cloned());
            out.extend(mux.names().cloned());
        }
        D::OneL { chan, .. }
        | D::PlusL { chan, .. }
        | D::WithL1 { chan, .. }
        | D::WithL2 { chan, .. }
        | D::BangLSharp { chan, .. }
        | D::BangLBang { chan, .. }
        | D::Cut { chan, .. }
        | D::CutBang { chan, .. }
        | D::CutSharp { chan, .. } => {
            out.insert(chan.clone());
        }
        D::TensorL { chan, bound, .. }
        | D::LolliL { chan, bound, .. }
        | D::BSharp { chan, bound, .. }
        | D::BBang { chan, bound, .. } => {
            out.insert(chan.clone());
            out.insert(bound.clone());
        }
        D::TensorR { subject, bound, .. } | D::LolliR { subject, bound, .. } => {
            out.insert(subject.clone());
            out.insert(bound.clone());
        }
        D::PlusR1 { subject, .. } | D::PlusR2 { subject, .. } | D::WithR { subject, .. } => {
            out.insert(subject.clone());
        }
        D::BangR { subject, bound, aux_chans, mux, .. } => {
            out.insert(subject.clone());
            out.insert(bound.clone());
            out.extend(aux_chans.iter().cloned());
            out.extend(mux.names().cloned());
        }
    }
    for p in d.premises() {
        collect_names(p, out);
    }
}

fn all_names(d: &Derivation) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_names(d, &mut out);
    out
}

fn fresh(base: &Name, taken: &mut BTreeSet<Name>) -> Name {
    let name = base.freshen(taken);
    taken.insert(name.clone());
    name
}

/// Uniform textual renaming over every name field, zone key included. Sound
/// only when `to` occurs nowhere in `d`: then free occurrences of `from` are
/// substituted and any binder spelled `from` is alpha-renamed consistently.
fn rename(d: &Derivation, from: &Name, to: &Name) -> Derivation {
    use Derivation as D;
    let r = |n: &Name| if n == from { to.clone() } else { n.clone() };
    let rz = |z: &Zone| {
        Zone::try_from_pairs(z.iter().map(|(n, t)| (r(n), t.clone())))
            .expect("renaming to an unused name keeps zone keys distinct")
    };
    let rec = |s: &Derivation| rename(s, from, to);
    match d {
        D::OneR { subject, aux, mux } => D::one_r_in(r(subject), rz(aux), rz(mux)),
        D::OneL { chan, sub } => D::one_l(r(chan), rec(sub)),
        D::TensorL { chan, bound, sub } => D::tensor_l(r(chan), r(bound), rec(sub)),
        D::TensorR { subject, bound, left, right } => {
            D::tensor_r(r(subject), r(bound), rec(left), rec(right))
        }
        D::LolliL { chan, bound, left, right } => {
            D::lolli_l(r(chan), r(bound), rec(left), rec(right))
        }
        D::LolliR { subject, bound, sub } => D::lolli_r(r(subject), r(bound), rec(sub)),
        D::PlusL { chan, left, right } => D::plus_l(r(chan), rec(left), rec(right)),
        D::PlusR1 { subject, right_type, sub } => {
            D::plus_r1(r(subject), right_type.clone(), rec(sub))
        }
        D::PlusR2 { subject, left_type, sub } => {
            D::plus_r2(r(subject), left_type.clone(), rec(sub))
        }
        D::WithL1 { chan, right_type, sub } => D::with_l1(r(chan), right_type.clone(), rec(sub)),
        D::WithL2 { chan, left_type, sub } => D::with_l2(r(chan), left_type.clone(), rec(sub)),
        D::WithR { subject, left, right } => D::with_r(r(subject), rec(left), rec(right)),
        D::BSharp { chan, bound, sub } => D::b_sharp(r(chan), r(bound), rec(sub)),
        D::BBang { chan, bound, type_a, sub } => {
            D::b_bang(r(chan), r(bound), type_a.clone(), rec(sub))
        }
        D::BangLSharp { chan, sub } => D::bang_l_sharp(r(chan), rec(sub)),
        D::BangLBang { chan, sub } => D::bang_l_bang(r(chan), rec(sub)),
        D::BangR { subject, bound, aux_chans, mux, sub } => D::bang_r_in(
            r(subject),
            r(bound),
            aux_chans.iter().map(r).collect(),
            rz(mux),
            rec(sub),
        ),
        D::Cut { chan, type_a, left, right } => {
            D::cut(r(chan), type_a.clone(), rec(left), rec(right))
        }
        D::CutBang { chan, type_a, left, right } => {
            D::cut_bang(r(chan), type_a.clone(), rec(left), rec(right))
        }
        D::CutSharp { chan, type_a, left, right } => {
            D::cut_sharp(r(chan), type_a.clone(), rec(left), rec(right))
        }
    }
}

// ---------------------------------------------------------------------------
// Zones.

fn zone1(name: &Name, ty: &Type) -> Zone {
    Zone::try_from_pairs([(name.clone(), ty.clone())]).expect("a singleton zone")
}

/// The entries of `a` whose names are absent from `b`.
fn zone_diff(a: &Zone, b: &Zone) -> Zone {
    Zone::try_from_pairs(a.iter().filter(|(n, _)| !b.contains(n)).map(|(n, t)| (n.clone(), t.clone())))
        .expect("a filtered zone keeps its keys distinct")
}

/// `weaken`, alpha-renaming interior binders that happen to be spelled like
/// a name being threaded in. Names free in `d`'s own interface are left for
/// `weaken` to reject.
fn weaken_fresh(d: &Derivation, extra: &Zone, taken: &mut BTreeSet<Name>) -> Result<Derivation, CheckError> {
    if extra.is_empty() {
        return Ok(d.clone());
    }
    let j = check_derivation(d)?;
    let mut d = d.clone();
    for name in extra.names() {
        if j.subject != *name && !j.contexts.binds(name) && all_names(&d).contains(name) {
            let replacement = fresh(name, taken);
            d = rename(&d, name, &replacement);
        }
    }
    weaken(&d, extra)
}

/// Weakens each side with the multiplexed channels only the other has, so
/// the two can stand as premises of one cut.
fn align_mux(
    a: &Derivation,
    b: &Derivation,
    taken: &mut BTreeSet<Name>,
) -> Option<(Derivation, Derivation)> {
    let ja = check_derivation(a).ok()?;
    let jb = check_derivation(b).ok()?;
    let need_a = zone_diff(&jb.contexts.multiplexor, &ja.contexts.multiplexor);
    let need_b = zone_diff(&ja.contexts.multiplexor, &jb.contexts.multiplexor);
    let a2 = weaken_fresh(a, &need_a, taken).ok()?;
    let b2 = weaken_fresh(b, &need_b, taken).ok()?;
    Some((a2, b2))
}

/// Removes `x` from the multiplexor declarations of a tree with no `b_#` use
/// of `x`, stopping below any node that rebinds it. Callers must ensure
/// `fo(x, d) == 0` and re-check the result.
fn contract_mux(d: &Derivation, x: &Name) -> Derivation {
    use Derivation as D;
    let rebinds = match d {
        D::TensorL { bound, .. }
        | D::TensorR { bound, .. }
        | D::LolliL { bound, .. }
        | D::LolliR { bound, .. }
        | D::BSharp { bound, .. }
        | D::BBang { bound, .. }
        | D::BangR { bound, .. } => bound == x,
        D::Cut { chan, .. }
        | D::CutBang { chan, .. }
        | D::CutSharp { chan, .. }
        | D::BangLSharp { chan, .. }
        | D::BangLBang { chan, .. } => chan == x,
        _ => false,
    };
    if rebinds {
        return d.clone();
    }
    match d {
        D::OneR { subject, aux, mux } => {
            let mut mux = mux.clone();
            mux.remove(x);
            D::one_r_in(subject.clone(), aux.clone(), mux)
        }
        D::BangR { subject, bound, aux_chans, mux, sub } => {
            let mut mux = mux.clone();
            mux.remove(x);
            D::bang_r_in(subject.clone(), bound.clone(), aux_chans.clone(), mux, contract_mux(sub, x))
        }
        // server bodies carry no multiplexor, so only the client side counts
        D::CutBang { chan, type_a, left, right } => {
            D::cut_bang(chan.clone(), type_a.clone(), (**left).clone(), contract_mux(right, x))
        }
        D::CutSharp { chan, type_a, left, right } => {
            D::cut_sharp(chan.clone(), type_a.clone(), (**left).clone(), contract_mux(right, x))
        }
        _ => {
            let mut out = d.clone();
            for (i, p) in d.premises().into_iter().enumerate() {
                out = rebuild_with(&out, i, contract_mux(p, x));
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// comp: the communication steps.

fn comp_tensor(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Type::Tensor(a, b) = type_a else { return None };
    let Derivation::TensorR { subject, bound, left: f, right: g } = left.as_ref() else {
        return None;
    };
    let Derivation::TensorL { chan: used, bound: arg, sub: h } = right.as_ref() else {
        return None;
    };
    if subject != chan || used != chan {
        return None;
    }
    let session = fresh(bound, taken);
    let f = rename(f, bound, &session);
    let h = rename(h, arg, &session);
    let inner = Derivation::cut(chan.clone(), (**b).clone(), (**g).clone(), h);
    Some(Derivation::cut(session, (**a).clone(), f, inner))
}

fn comp_lolli(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Type::Lolli(a, b) = type_a else { return None };
    let Derivation::LolliR { subject, bound, sub: f } = left.as_ref() else { return None };
    let Derivation::LolliL { chan: used, bound: arg, left: g, right: h } = right.as_ref() else {
        return None;
    };
    if subject != chan || used != chan {
        return None;
    }
    let session = fresh(bound, taken);
    let f = rename(f, bound, &session);
    let g = rename(g, arg, &session);
    let inner = Derivation::cut(session, (**a).clone(), g, f);
    Some(Derivation::cut(chan.clone(), (**b).clone(), inner, (**h).clone()))
}

fn comp_select(node: &Derivation) -> Option<(&'static str, Derivation)> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    match (left.as_ref(), right.as_ref()) {
        (
            Derivation::WithR { subject, left: f, .. },
            Derivation::WithL1 { chan: used, sub: h, .. },
        ) if subject == chan && used == chan => {
            let Type::With(a, _) = type_a else { return None };
            Some(("with-1", Derivation::cut(chan.clone(), (**a).clone(), (**f).clone(), (**h).clone())))
        }
        (
            Derivation::WithR { subject, right: g, .. },
            Derivation::WithL2 { chan: used, sub: h, .. },
        ) if subject == chan && used == chan => {
            let Type::With(_, b) = type_a else { return None };
            Some(("with-2", Derivation::cut(chan.clone(), (**b).clone(), (**g).clone(), (**h).clone())))
        }
        (
            Derivation::PlusR1 { subject, sub: f, .. },
            Derivation::PlusL { chan: used, left: h, .. },
        ) if subject == chan && used == chan => {
            let Type::Plus(a, _) = type_a else { return None };
            Some(("plus-1", Derivation::cut(chan.clone(), (**a).clone(), (**f).clone(), (**h).clone())))
        }
        (
            Derivation::PlusR2 { subject, sub: f, .. },
            Derivation::PlusL { chan: used, right: h, .. },
        ) if subject == chan && used == chan => {
            let Type::Plus(_, b) = type_a else { return None };
            Some(("plus-2", Derivation::cut(chan.clone(), (**b).clone(), (**f).clone(), (**h).clone())))
        }
        _ => None,
    }
}

/// `cut_#` against a `b_#` request: one session is served at a fresh name,
/// the server stays for the continuation.
fn comp_sharp_spawn(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::CutSharp { chan, type_a, left: f, right } = node else { return None };
    let Derivation::BSharp { chan: used, bound, sub: g } = right.as_ref() else { return None };
    if used != chan {
        return None;
    }
    let session = fresh(bound, taken);
    let served = rename(&lift(f).ok()?, f.subject(), &session);
    let body = rename(g, bound, &session);
    let kept = Derivation::cut_sharp(chan.clone(), type_a.clone(), (**f).clone(), body);
    let (served, kept) = align_mux(&served, &kept, taken)?;
    Some(Derivation::cut(session, type_a.clone(), served, kept))
}

/// `cut_!` against a `b_!` request. The continuation held the only use of
/// the server, so afterwards the server is multiplexed by the spawned body
/// and the cut changes flavor; the served copy's doors migrate with it.
fn comp_bang_spawn(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::CutBang { chan, type_a, left: f, right } = node else { return None };
    let Derivation::BBang { chan: used, bound, sub: g, .. } = right.as_ref() else { return None };
    if used != chan {
        return None;
    }
    let session = fresh(bound, taken);
    let served = rename(&lift(f).ok()?, f.subject(), &session);
    let body = rename(g, bound, &session);
    let spawned = weaken_fresh(&body, &zone1(chan, type_a), taken).ok()?;
    let kept = Derivation::cut_sharp(chan.clone(), type_a.clone(), (**f).clone(), spawned);
    let (served, kept) = align_mux(&served, &kept, taken)?;
    Some(Derivation::cut(session, type_a.clone(), served, kept))
}

// ---------------------------------------------------------------------------
// shift: opening boxes.

/// A boxed server meets its `!L` client: the box opens into a `cut_b` and
/// the doors are re-requested outside it, first door outermost. Which `L_b`
/// wraps the doors follows the flavor of the client, which also fixes where
/// the doors sit in the premise: auxiliary for `b = !`, multiplexor for
/// `b = #`.
fn shift_open(node: &Derivation) -> Option<(&'static str, Derivation)> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Type::Bang(a) = type_a else { return None };
    let Derivation::BangR { subject, aux_chans, sub: f, .. } = left.as_ref() else { return None };
    if subject != chan {
        return None;
    }
    match right.as_ref() {
        Derivation::BangLBang { chan: used, sub: g } if used == chan => {
            let core =
                Derivation::cut_bang(chan.clone(), (**a).clone(), (**f).clone(), (**g).clone());
            let opened =
                aux_chans.iter().rev().fold(core, |acc, k| Derivation::bang_l_bang(k.clone(), acc));
            Some(("shift-bang", opened))
        }
        Derivation::BangLSharp { chan: used, sub: g } if used == chan => {
            let core =
                Derivation::cut_sharp(chan.clone(), (**a).clone(), (**f).clone(), (**g).clone());
            let opened = aux_chans
                .iter()
                .rev()
                .fold(core, |acc, k| Derivation::bang_l_sharp(k.clone(), acc));
            Some(("shift-sharp", opened))
        }
        _ => None,
    }
}

/// A cut on `1` is pure synchronization: it dissolves into the continuation.
/// Anything the axiom held by weakening re-enters through the multiplexor.
fn shift_unit(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, left, right, .. } = node else { return None };
    let Derivation::OneR { subject, aux, .. } = left.as_ref() else { return None };
    let Derivation::OneL { chan: used, sub: h } = right.as_ref() else { return None };
    if subject != chan || used != chan {
        return None;
    }
    if aux.is_empty() {
        Some((**h).clone())
    } else {
        weaken_fresh(h, aux, taken).ok()
    }
}

// ---------------------------------------------------------------------------
// equiv: invertible rearrangements.

fn eq_assoc_left(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Derivation::Cut { chan: w, type_a: tw, left: f, right: g } = left.as_ref() else {
        return None;
    };
    let z = fresh(w, taken);
    let f = rename(f, w, &z);
    let g = rename(g, w, &z);
    let inner = Derivation::cut(chan.clone(), type_a.clone(), g, (**right).clone());
    Some(Derivation::cut(z, tw.clone(), f, inner))
}

fn eq_assoc_right(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Derivation::Cut { chan: y, type_a: ty, left: g, right: h } = right.as_ref() else {
        return None;
    };
    let jg = check_derivation(g).ok()?;
    if !jg.contexts.linear.contains(chan) {
        return None;
    }
    let z = fresh(y, taken);
    let g = rename(g, y, &z);
    let h = rename(h, y, &z);
    let inner = Derivation::cut(chan.clone(), type_a.clone(), (**left).clone(), g);
    Some(Derivation::cut(z, ty.clone(), inner, h))
}

fn eq_exchange(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Derivation::Cut { chan: y, type_a: ty, left: g, right: h } = right.as_ref() else {
        return None;
    };
    let jh = check_derivation(h).ok()?;
    if !jh.contexts.linear.contains(chan) {
        return None;
    }
    let z = fresh(y, taken);
    let g = rename(g, y, &z);
    let h = rename(h, y, &z);
    let inner = Derivation::cut(chan.clone(), type_a.clone(), (**left).clone(), h);
    Some(Derivation::cut(z, ty.clone(), g, inner))
}

fn eq_bang_hoist_left(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Derivation::CutBang { chan: w, type_a: ta, left: g, right: k } = left.as_ref() else {
        return None;
    };
    let z = fresh(w, taken);
    let k = rename(k, w, &z);
    let inner = Derivation::cut(chan.clone(), type_a.clone(), k, (**right).clone());
    Some(Derivation::cut_bang(z, ta.clone(), (**g).clone(), inner))
}

fn eq_bang_hoist_right(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Derivation::CutBang { chan: y, type_a: ta, left: g, right: h } = right.as_ref() else {
        return None;
    };
    let z = fresh(y, taken);
    let h = rename(h, y, &z);
    let inner = Derivation::cut(chan.clone(), type_a.clone(), (**left).clone(), h);
    Some(Derivation::cut_bang(z, ta.clone(), (**g).clone(), inner))
}

fn eq_sharp_hoist_left(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Derivation::CutSharp { chan: w, type_a: ta, left: g, right: k } = left.as_ref() else {
        return None;
    };
    let z = fresh(w, taken);
    let k = rename(k, w, &z);
    let (k, r) = align_mux(&k, right, taken)?;
    let inner = Derivation::cut(chan.clone(), type_a.clone(), k, r);
    Some(Derivation::cut_sharp(z, ta.clone(), (**g).clone(), inner))
}

fn eq_sharp_hoist_right(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let Derivation::CutSharp { chan: y, type_a: ta, left: g, right: h } = right.as_ref() else {
        return None;
    };
    let z = fresh(y, taken);
    let h = rename(h, y, &z);
    let (l, h) = align_mux(left, &h, taken)?;
    let inner = Derivation::cut(chan.clone(), type_a.clone(), l, h);
    Some(Derivation::cut_sharp(z, ta.clone(), (**g).clone(), inner))
}

/// A `!`-server cut lowered into the premise of a plain cut that holds its
/// channel. The auxiliary zone is multiplicative, so the side is determined.
fn eq_bang_lower(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::CutBang { chan, type_a, left: f, right } = node else { return None };
    let Derivation::Cut { chan: w, type_a: tw, left: g, right: h } = right.as_ref() else {
        return None;
    };
    let jg = check_derivation(g).ok()?;
    let z = fresh(w, taken);
    let g = rename(g, w, &z);
    let h = rename(h, w, &z);
    Some(if jg.contexts.auxiliary.contains(chan) {
        let inner = Derivation::cut_bang(chan.clone(), type_a.clone(), (**f).clone(), g);
        Derivation::cut(z, tw.clone(), inner, h)
    } else {
        let inner = Derivation::cut_bang(chan.clone(), type_a.clone(), (**f).clone(), h);
        Derivation::cut(z, tw.clone(), g, inner)
    })
}

/// A `#`-server cut lowered into one premise of a plain cut. Valid only for
/// a premise whose sibling never calls the server; the sibling's stale
/// multiplexor declarations are contracted away.
fn eq_sharp_lower(node: &Derivation, taken: &mut BTreeSet<Name>) -> Vec<Derivation> {
    let mut out = Vec::new();
    let Derivation::CutSharp { chan, type_a, left: f, right } = node else { return out };
    let Derivation::Cut { chan: w, type_a: tw, left: g, right: h } = right.as_ref() else {
        return out;
    };
    let z = fresh(w, taken);
    let g2 = rename(g, w, &z);
    let h2 = rename(h, w, &z);
    // a side only stays outside the lowered server when contraction truly
    // frees it of the channel; a frozen door in some body pins it and then
    // only duplication can move the server
    let freed = |d: &Derivation| {
        check_derivation(d).map(|j| !j.contexts.multiplexor.contains(chan)).unwrap_or(false)
    };
    if fo(chan, h) == 0 {
        let stays = contract_mux(&h2, chan);
        if freed(&stays) {
            let served =
                Derivation::cut_sharp(chan.clone(), type_a.clone(), (**f).clone(), g2.clone());
            if let Some((a, b)) = align_mux(&served, &stays, taken) {
                out.push(Derivation::cut(z.clone(), tw.clone(), a, b));
            }
        }
    }
    if fo(chan, g) == 0 {
        let stays = contract_mux(&g2, chan);
        if freed(&stays) {
            let served = Derivation::cut_sharp(chan.clone(), type_a.clone(), (**f).clone(), h2);
            if let Some((a, b)) = align_mux(&stays, &served, taken) {
                out.push(Derivation::cut(z, tw.clone(), a, b));
            }
        }
    }
    out
}

/// Splits a `#`-server over the two premises of a plain cut. Both copies
/// re-check unconditionally; the erasures are congruent only once the dead
/// copy is collected, so enumeration is restricted to instances with a dead
/// side while the driver may split live servers it will re-merge.
fn eq_sharp_dup(node: &Derivation, taken: &mut BTreeSet<Name>, gc_only: bool) -> Option<Derivation> {
    let Derivation::CutSharp { chan, type_a, left: f, right } = node else { return None };
    let Derivation::Cut { chan: w, type_a: tw, left: g, right: h } = right.as_ref() else {
        return None;
    };
    if gc_only && fo(chan, g) > 0 && fo(chan, h) > 0 {
        return None;
    }
    let z = fresh(w, taken);
    let g = rename(g, w, &z);
    let h = rename(h, w, &z);
    Some(Derivation::cut(
        z,
        tw.clone(),
        Derivation::cut_sharp(chan.clone(), type_a.clone(), (**f).clone(), g),
        Derivation::cut_sharp(chan.clone(), type_a.clone(), (**f).clone(), h),
    ))
}

/// The inverse of duplication: two cuts of one server body fold into one.
fn eq_sharp_merge(node: &Derivation, gc_only: bool) -> Option<Derivation> {
    let Derivation::Cut { chan: w, type_a: tw, left, right } = node else { return None };
    let Derivation::CutSharp { chan: x1, type_a: ta1, left: f1, right: a } = left.as_ref() else {
        return None;
    };
    let Derivation::CutSharp { chan: x2, type_a: ta2, left: f2, right: b } = right.as_ref() else {
        return None;
    };
    if f1 != f2 || !type_equal(ta1, ta2) {
        return None;
    }
    let (chan, a, b) = if x1 == x2 {
        (x2.clone(), (**a).clone(), (**b).clone())
    } else if !all_names(a).contains(x2) {
        (x2.clone(), rename(a, x1, x2), (**b).clone())
    } else if !all_names(b).contains(x1) {
        (x1.clone(), (**a).clone(), rename(b, x2, x1))
    } else {
        return None;
    };
    if gc_only && fo(&chan, &a) > 0 && fo(&chan, &b) > 0 {
        return None;
    }
    let mut taken = all_names(node);
    let (a, b) = align_mux(&a, &b, &mut taken)?;
    let inner = Derivation::cut(w.clone(), tw.clone(), a, b);
    Some(Derivation::cut_sharp(chan, ta2.clone(), (**f1).clone(), inner))
}

/// Two adjacent server cuts on independent channels change nesting order.
/// Skipped when the outer channel is consumed by the inner server rather
/// than the continuation.
fn eq_swap(node: &Derivation, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    use Derivation as D;
    let (x, ta, f, right, outer_bang) = match node {
        D::CutBang { chan, type_a, left, right } => (chan, type_a, left, right, true),
        D::CutSharp { chan, type_a, left, right } => (chan, type_a, left, right, false),
        _ => return None,
    };
    let (y, tb, g, h, inner_bang) = match right.as_ref() {
        D::CutBang { chan, type_a, left, right } => (chan, type_a, left, right, true),
        D::CutSharp { chan, type_a, left, right } => (chan, type_a, left, right, false),
        _ => return None,
    };
    let jh = check_derivation(h).ok()?;
    let reachable = if outer_bang {
        jh.contexts.auxiliary.contains(x)
    } else {
        jh.contexts.multiplexor.contains(x)
    };
    if !reachable {
        return None;
    }
    let z = fresh(y, taken);
    let h = rename(h, y, &z);
    let inner = if outer_bang {
        D::cut_bang(x.clone(), ta.clone(), (**f).clone(), h)
    } else {
        D::cut_sharp(x.clone(), ta.clone(), (**f).clone(), h)
    };
    Some(if inner_bang {
        D::cut_bang(z, tb.clone(), (**g).clone(), inner)
    } else {
        D::cut_sharp(z, tb.clone(), (**g).clone(), inner)
    })
}

/// A weight-silent prefix (`1L` or either `!L`) slides out of a cut premise
/// to stand above the cut. A `!L` prefix may not cross a server cut that
/// would start charging it: that changes per-channel occurrence counts.
fn eq_silent_hoist_cut(node: &Derivation, side: usize, taken: &mut BTreeSet<Name>) -> Option<Derivation> {
    let Derivation::Cut { chan, type_a, left, right } = node else { return None };
    let obs = if side == 0 { left.as_ref() } else { right.as_ref() };
    let (w, s, flavor) = match obs {
        Derivation::OneL { chan: w, sub } => (w, sub.as_ref(), 0u8),
        Derivation::BangLSharp { chan: w, sub } => (w, sub.as_ref(), 1),
        Derivation::BangLBang { chan: w, sub } => (w, sub.as_ref(), 2),
        _ => return None,
    };
    if side == 1 && w == chan {
        return None;
    }
    let (a, b) = match (flavor, side) {
        (1, 0) => align_mux(s, right, taken)?,
        (1, _) => align_mux(left, s, taken)?,
        (_, 0) => (s.clone(), (**right).clone()),
        (_, _) => ((**left).clone(), s.clone()),
    };
    let inner = Derivation::cut(chan.clone(), type_a.clone(), a, b);
    Some(match flavor {
        0 => Derivation::one_l(w.clone(), inner),
        1 => Derivation::bang_l_sharp(w.clone(), inner),
        _ => Derivation::bang_l_bang(w.clone(), inner),
    })
}

/// The same slide out of the body side of a server cut.
fn eq_silent_hoist_exp(node: &Derivation) -> Option<Derivation> {
    let (chan, type_a, f, right, bang) = match node {
        Derivation::CutBang { chan, type_a, left, right } => (chan, type_a, left, right, true),
        Derivation::CutSharp { chan, type_a, left, right } => (chan, type_a, left, right, false),
        _ => return None,
    };
    let (w, s, flavor) = match right.as_ref() {
        Derivation::OneL { chan: w, sub } => (w, sub.as_ref(), 0u8),
        Derivation::BangLSharp { chan: w, sub } => (w, sub.as_ref(), 1),
        Derivation::BangLBang { chan: w, sub } => (w, sub.as_ref(), 2),
        _ => return None,
    };
    if w == chan {
        return None;
    }
    if flavor != 0 && fo(chan, s) * fo(w, f) != 0 {
        return None;
    }
    let inner = if bang {
        Derivation::cut_bang(chan.clone(), type_a.clone(), (**f).clone(), s.clone())
    } else {
        Derivation::cut_sharp(chan.clone(), type_a.clone(), (**f).clone(), s.clone())
    };
    Some(match flavor {
        0 => Derivation::one_l(w.clone(), inner),
        1 => Derivation::bang_l_sharp(w.clone(), inner),
        _ => Derivation::bang_l_bang(w.clone(), inner),
    })
}

/// Inverses of the silent hoists: the prefix drops into one premise.
fn eq_silent_push(node: &Derivation) -> Vec<Derivation> {
    use Derivation as D;
    let mut out = Vec::new();
    let (w, sub, flavor) = match node {
        D::OneL { chan, sub } => (chan, sub.as_ref(), 0u8),
        D::BangLSharp { chan, sub } => (chan, sub.as_ref(), 1),
        D::BangLBang { chan, sub } => (chan, sub.as_ref(), 2),
        _ => return out,
    };
    let wrap = |s: Derivation| match flavor {
        0 => D::one_l(w.clone(), s),
        1 => D::bang_l_sharp(w.clone(), s),
        _ => D::bang_l_bang(w.clone(), s),
    };
    match sub {
        D::Cut { chan: x, type_a, left, right } => match flavor {
            0 => {
                out.push(D::cut(x.clone(), type_a.clone(), wrap((**left).clone()), (**right).clone()));
                out.push(D::cut(x.clone(), type_a.clone(), (**left).clone(), wrap((**right).clone())));
            }
            1 => {
                if fo(w, right) == 0 {
                    out.push(D::cut(
                        x.clone(),
                        type_a.clone(),
                        wrap((**left).clone()),
                        contract_mux(right, w),
                    ));
                }
                if fo(w, left) == 0 {
                    out.push(D::cut(
                        x.clone(),
                        type_a.clone(),
                        contract_mux(left, w),
                        wrap((**right).clone()),
                    ));
                }
            }
            _ => {
                if let Ok(jl) = check_derivation(left) {
                    if jl.contexts.auxiliary.contains(w) {
                        out.push(D::cut(x.clone(), type_a.clone(), wrap((**left).clone()), (**right).clone()));
                    } else {
                        out.push(D::cut(x.clone(), type_a.clone(), (**left).clone(), wrap((**right).clone())));
                    }
                }
            }
        },
        D::CutBang { chan: x, type_a, left: f, right: h }
        | D::CutSharp { chan: x, type_a, left: f, right: h } => {
            let bang = matches!(sub, D::CutBang { .. });
            if flavor != 0 {
                if fo(x, h) * fo(w, f) != 0 {
                    return out;
                }
                let Ok(jh) = check_derivation(h) else { return out };
                let placed = if flavor == 1 {
                    jh.contexts.multiplexor.contains(w)
                } else {
                    jh.contexts.auxiliary.contains(w)
                };
                if !placed {
                    return out;
                }
            }
            let inner = if bang {
                D::cut_bang(x.clone(), type_a.clone(), (**f).clone(), wrap((**h).clone()))
            } else {
                D::cut_sharp(x.clone(), type_a.clone(), (**f).clone(), wrap((**h).clone()))
            };
            out.push(inner);
        }
        _ => {}
    }
    out
}

// ---------------------------------------------------------------------------
// Enumeration.

struct Candidate {
    rule: &'static str,
    relation: Relation,
    result: Derivation,
}

fn add(out: &mut Vec<Candidate>, rule: &'static str, relation: Relation, result: Option<Derivation>) {
    if let Some(result) = result {
        out.push(Candidate { rule, relation, result });
    }
}

fn local_rewrites(node: &Derivation, taken: &mut BTreeSet<Name>, gc_only: bool) -> Vec<Candidate> {
    use Derivation as D;
    use Relation::{Comp, Equiv, Shift};
    let mut out = Vec::new();
    match node {
        D::Cut { left, right, .. } => {
            add(&mut out, "tensor", Comp, comp_tensor(node, taken));
            add(&mut out, "lolli", Comp, comp_lolli(node, taken));
            if let Some((rule, result)) = comp_select(node) {
                add(&mut out, rule, Comp, Some(result));
            }
            if let Some((rule, result)) = shift_open(node) {
                add(&mut out, rule, Shift, Some(result));
            }
            add(&mut out, "unit", Shift, shift_unit(node, taken));
            match left.as_ref() {
                D::Cut { .. } => add(&mut out, "assoc", Equiv, eq_assoc_left(node, taken)),
                D::CutBang { .. } => {
                    add(&mut out, "bang-hoist", Equiv, eq_bang_hoist_left(node, taken))
                }
                D::CutSharp { .. } => {
                    add(&mut out, "sharp-hoist", Equiv, eq_sharp_hoist_left(node, taken))
                }
                D::OneL { .. } | D::BangLSharp { .. } | D::BangLBang { .. } => {
                    add(&mut out, "silent-hoist", Equiv, eq_silent_hoist_cut(node, 0, taken))
                }
                _ => {}
            }
            match right.as_ref() {
                D::Cut { .. } => {
                    add(&mut out, "assoc", Equiv, eq_assoc_right(node, taken));
                    add(&mut out, "exchange", Equiv, eq_exchange(node, taken));
                }
                D::CutBang { .. } => {
                    add(&mut out, "bang-hoist", Equiv, eq_bang_hoist_right(node, taken))
                }
                D::CutSharp { .. } => {
                    add(&mut out, "sharp-hoist", Equiv, eq_sharp_hoist_right(node, taken))
                }
                D::OneL { .. } | D::BangLSharp { .. } | D::BangLBang { .. } => {
                    add(&mut out, "silent-hoist", Equiv, eq_silent_hoist_cut(node, 1, taken))
                }
                _ => {}
            }
            add(&mut out, "sharp-merge", Equiv, eq_sharp_merge(node, gc_only));
        }
        D::CutBang { right, .. } => {
            add(&mut out, "bang-spawn", Comp, comp_bang_spawn(node, taken));
            match right.as_ref() {
                D::Cut { .. } => add(&mut out, "bang-lower", Equiv, eq_bang_lower(node, taken)),
                D::CutBang { .. } | D::CutSharp { .. } => {
                    add(&mut out, "server-swap", Equiv, eq_swap(node, taken))
                }
                D::OneL { .. } | D::BangLSharp { .. } | D::BangLBang { .. } => {
                    add(&mut out, "silent-hoist", Equiv, eq_silent_hoist_exp(node))
                }
                _ => {}
            }
        }
        D::CutSharp { right, .. } => {
            add(&mut out, "sharp-spawn", Comp, comp_sharp_spawn(node, taken));
            match right.as_ref() {
                D::Cut { .. } => {
                    add(&mut out, "sharp-dup", Equiv, eq_sharp_dup(node, taken, gc_only));
                    for result in eq_sharp_lower(node, taken) {
                        add(&mut out, "sharp-lower", Equiv, Some(result));
                    }
                }
                D::CutBang { .. } | D::CutSharp { .. } => {
                    add(&mut out, "server-swap", Equiv, eq_swap(node, taken))
                }
                D::OneL { .. } | D::BangLSharp { .. } | D::BangLBang { .. } => {
                    add(&mut out, "silent-hoist", Equiv, eq_silent_hoist_exp(node))
                }
                _ => {}
            }
        }
        D::OneL { .. } | D::BangLSharp { .. } | D::BangLBang { .. } => {
            for result in eq_silent_push(node) {
                add(&mut out, "silent-push", Equiv, Some(result));
            }
        }
        _ => {}
    }
    out
}

fn enumerate(d: &Derivation, want: Relation) -> Vec<RewriteStep> {
    if check_derivation(d).is_err() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for path in subtree_paths(d) {
        let mut taken = all_names(d);
        for cand in local_rewrites(node_at(d, &path), &mut taken, true) {
            if cand.relation != want {
                continue;
            }
            let Ok(result) = graft(d, &path, cand.result) else { continue };
            if check_derivation(&result).is_err() {
                continue;
            }
            out.push(RewriteStep {
                relation: cand.relation,
                rule_name: cand.rule,
                position: path.clone(),
                result,
            });
        }
    }
    out
}

/// Every communication step available anywhere in `d`, as whole rewritten
/// trees. Empty when `d` does not check.
pub fn comp_steps(d: &Derivation) -> Vec<RewriteStep> {
    enumerate(d, Relation::Comp)
}

/// Every box-opening step available anywhere in `d`.
pub fn shift_steps(d: &Derivation) -> Vec<RewriteStep> {
    enumerate(d, Relation::Shift)
}

/// Every enumerable rearrangement of `d`, both directions of each law.
pub fn equiv_steps(d: &Derivation) -> Vec<RewriteStep> {
    enumerate(d, Relation::Equiv)
}

// ---------------------------------------------------------------------------
// The driver: mirroring one process reduction on the tree.

/// Cut nodes reachable without entering a prefix or a server body; redexes
/// under those are guarded in the erasure too, so no witness starts there.
fn candidate_cuts(d: &Derivation) -> Vec<Vec<usize>> {
    fn walk(d: &Derivation, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match d {
            Derivation::Cut { left, right, .. } => {
                out.push(path.clone());
                path.push(0);
                walk(left, path, out);
                path.pop();
                path.push(1);
                walk(right, path, out);
                path.pop();
            }
            Derivation::CutBang { right, .. } | Derivation::CutSharp { right, .. } => {
                out.push(path.clone());
                path.push(1);
                walk(right, path, out);
                path.pop();
            }
            Derivation::OneL { sub, .. }
            | Derivation::BangLSharp { sub, .. }
            | Derivation::BangLBang { sub, .. } => {
                path.push(0);
                walk(sub, path, out);
                path.pop();
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(d, &mut Vec::new(), &mut out);
    out
}

enum Plan {
    /// Clear an obstruction and refocus deeper.
    Nav { rule: &'static str, relation: Relation, local: Option<Derivation>, focus: Vec<usize> },
    /// Both premises are principal: perform the communication.
    Fire { rule: &'static str, local: Option<Derivation> },
    /// The server is needed on both sides of an inner cut; split it.
    Dup { local: Option<Derivation> },
    Dead,
}

fn plan(node: &Derivation, kind: RedexKind, taken: &mut BTreeSet<Name>) -> Plan {
    use Derivation as D;
    use Relation::{Equiv, Shift};
    match node {
        D::Cut { chan, left, right, .. } => {
            match left.as_ref() {
                D::Cut { .. } => {
                    return Plan::Nav {
                        rule: "assoc",
                        relation: Equiv,
                        local: eq_assoc_left(node, taken),
                        focus: vec![1],
                    }
                }
                D::CutBang { .. } => {
                    return Plan::Nav {
                        rule: "bang-hoist",
                        relation: Equiv,
                        local: eq_bang_hoist_left(node, taken),
                        focus: vec![1],
                    }
                }
                D::CutSharp { .. } => {
                    return Plan::Nav {
                        rule: "sharp-hoist",
                        relation: Equiv,
                        local: eq_sharp_hoist_left(node, taken),
                        focus: vec![1],
                    }
                }
                D::OneL { .. } | D::BangLSharp { .. } | D::BangLBang { .. } => {
                    return Plan::Nav {
                        rule: "silent-hoist",
                        relation: Equiv,
                        local: eq_silent_hoist_cut(node, 0, taken),
                        focus: vec![0],
                    }
                }
                _ => {}
            }
            match right.as_ref() {
                D::Cut { left: g, .. } => {
                    let in_left = check_derivation(g)
                        .map(|j| j.contexts.linear.contains(chan))
                        .unwrap_or(false);
                    return if in_left {
                        Plan::Nav {
                            rule: "assoc",
                            relation: Equiv,
                            local: eq_assoc_right(node, taken),
                            focus: vec![0],
                        }
                    } else {
                        Plan::Nav {
                            rule: "exchange",
                            relation: Equiv,
                            local: eq_exchange(node, taken),
                            focus: vec![1],
                        }
                    };
                }
                D::CutBang { .. } => {
                    return Plan::Nav {
                        rule: "bang-hoist",
                        relation: Equiv,
                        local: eq_bang_hoist_right(node, taken),
                        focus: vec![1],
                    }
                }
                D::CutSharp { .. } => {
                    return Plan::Nav {
                        rule: "sharp-hoist",
                        relation: Equiv,
                        local: eq_sharp_hoist_right(node, taken),
                        focus: vec![1],
                    }
                }
                D::OneL { chan: w, .. } | D::BangLSharp { chan: w, .. } | D::BangLBang { chan: w, .. }
                    if w != chan =>
                {
                    return Plan::Nav {
                        rule: "silent-hoist",
                        relation: Equiv,
                        local: eq_silent_hoist_cut(node, 1, taken),
                        focus: vec![0],
                    }
                }
                _ => {}
            }
            match kind {
                RedexKind::LinearComm => {
                    if let Some(local) = comp_tensor(node, taken) {
                        Plan::Fire { rule: "tensor", local: Some(local) }
                    } else if let Some(local) = comp_lolli(node, taken) {
                        Plan::Fire { rule: "lolli", local: Some(local) }
                    } else {
                        Plan::Dead
                    }
                }
                RedexKind::SelectLeft | RedexKind::SelectRight => match comp_select(node) {
                    Some((rule, local))
                        if rule.ends_with("-1") == (kind == RedexKind::SelectLeft) =>
                    {
                        Plan::Fire { rule, local: Some(local) }
                    }
                    _ => Plan::Dead,
                },
                RedexKind::ReplicatedComm => {
                    let D::BangR { aux_chans, .. } = left.as_ref() else { return Plan::Dead };
                    let doors = aux_chans.len();
                    match shift_open(node) {
                        Some((rule, local)) => Plan::Nav {
                            rule,
                            relation: Shift,
                            local: Some(local),
                            focus: vec![0; doors],
                        },
                        None => Plan::Dead,
                    }
                }
            }
        }
        D::CutSharp { chan, right, .. } => {
            if kind != RedexKind::ReplicatedComm {
                return Plan::Dead;
            }
            match right.as_ref() {
                D::BSharp { chan: used, .. } if used == chan => {
                    Plan::Fire { rule: "sharp-spawn", local: comp_sharp_spawn(node, taken) }
                }
                D::Cut { left: g, right: h, .. } => {
                    let live_left = fo(chan, g) > 0;
                    let live_right = fo(chan, h) > 0;
                    if !live_left && !live_right {
                        return Plan::Dead;
                    }
                    // lower past the dead side when possible; a dead side
                    // whose interface still pins the server channel (a
                    // frozen door in some body) forces a split instead
                    if live_left != live_right {
                        if let Some(local) = eq_sharp_lower(node, taken).into_iter().next() {
                            return Plan::Nav {
                                rule: "sharp-lower",
                                relation: Equiv,
                                local: Some(local),
                                focus: vec![if live_left { 0 } else { 1 }],
                            };
                        }
                    }
                    Plan::Dup { local: eq_sharp_dup(node, taken, false) }
                }
                D::CutBang { .. } | D::CutSharp { .. } => Plan::Nav {
                    rule: "server-swap",
                    relation: Equiv,
                    local: eq_swap(node, taken),
                    focus: vec![1],
                },
                D::OneL { .. } | D::BangLSharp { .. } | D::BangLBang { .. } => Plan::Nav {
                    rule: "silent-hoist",
                    relation: Equiv,
                    local: eq_silent_hoist_exp(node),
                    focus: vec![0],
                },
                _ => Plan::Dead,
            }
        }
        D::CutBang { chan, right, .. } => {
            if kind != RedexKind::ReplicatedComm {
                return Plan::Dead;
            }
            match right.as_ref() {
                D::BBang { chan: used, .. } if used == chan => {
                    Plan::Fire { rule: "bang-spawn", local: comp_bang_spawn(node, taken) }
                }
                D::Cut { left: g, .. } => {
                    let side = match check_derivation(g) {
                        Ok(j) if j.contexts.auxiliary.contains(chan) => 0,
                        Ok(_) => 1,
                        Err(_) => return Plan::Dead,
                    };
                    Plan::Nav {
                        rule: "bang-lower",
                        relation: Equiv,
                        local: eq_bang_lower(node, taken),
                        focus: vec![side],
                    }
                }
                D::CutBang { .. } | D::CutSharp { .. } => Plan::Nav {
                    rule: "server-swap",
                    relation: Equiv,
                    local: eq_swap(node, taken),
                    focus: vec![1],
                },
                D::OneL { .. } | D::BangLSharp { .. } | D::BangLBang { .. } => Plan::Nav {
                    rule: "silent-hoist",
                    relation: Equiv,
                    local: eq_silent_hoist_exp(node),
                    focus: vec![0],
                },
                _ => Plan::Dead,
            }
        }
        _ => Plan::Dead,
    }
}

struct Drive {
    kind: RedexKind,
    target: Process,
    budget: usize,
}

impl Drive {
    fn apply(
        &mut self,
        tree: &Derivation,
        path: &[usize],
        relation: Relation,
        rule: &'static str,
        local: Option<Derivation>,
        steps: &mut Vec<RewriteStep>,
    ) -> Option<Derivation> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        let result = graft(tree, path, local?).ok()?;
        check_derivation(&result).ok()?;
        steps.push(RewriteStep {
            relation,
            rule_name: rule,
            position: path.to_vec(),
            result: result.clone(),
        });
        Some(result)
    }

    fn run(
        &mut self,
        tree: Derivation,
        path: Vec<usize>,
        dups: Vec<(Vec<usize>, usize)>,
        steps: Vec<RewriteStep>,
    ) -> Option<(Derivation, Vec<RewriteStep>)> {
        let mut tree = tree;
        let mut path = path;
        let mut steps = steps;
        loop {
            let mut taken = all_names(&tree);
            let node = node_at(&tree, &path).clone();
            match plan(&node, self.kind, &mut taken) {
                Plan::Dead => return None,
                Plan::Nav { rule, relation, local, focus } => {
                    tree = self.apply(&tree, &path, relation, rule, local, &mut steps)?;
                    path.extend(focus);
                }
                Plan::Dup { local } => {
                    let forked = self.apply(&tree, &path, Relation::Equiv, "sharp-dup", local, &mut steps)?;
                    for side in [0usize, 1] {
                        let mut branch_path = path.clone();
                        branch_path.push(side);
                        let mut branch_dups = dups.clone();
                        branch_dups.push((path.clone(), side));
                        if let Some(done) =
                            self.run(forked.clone(), branch_path, branch_dups, steps.clone())
                        {
                            return Some(done);
                        }
                    }
                    return None;
                }
                Plan::Fire { rule, local } => {
                    tree = self.apply(&tree, &path, Relation::Comp, rule, local, &mut steps)?;
                    return self.merge_copies(tree, path, &dups, steps);
                }
            }
        }
    }

    /// After a spawn inside a duplicated branch the surviving server copy
    /// sits one level under the fire position; hoist it back up to each
    /// recorded fork and fold it into the untouched copy, innermost fork
    /// first, so the witness ends congruent to the single process step.
    fn merge_copies(
        &mut self,
        tree: Derivation,
        fire_path: Vec<usize>,
        dups: &[(Vec<usize>, usize)],
        steps: Vec<RewriteStep>,
    ) -> Option<(Derivation, Vec<RewriteStep>)> {
        let mut tree = tree;
        let mut steps = steps;
        if !dups.is_empty() {
            let mut cur = fire_path;
            cur.push(1);
            for (fork, side) in dups.iter().rev() {
                let mut stop = fork.clone();
                stop.push(*side);
                while cur != stop {
                    let parent = cur[..cur.len() - 1].to_vec();
                    let last = cur[cur.len() - 1];
                    let mut taken = all_names(&tree);
                    let pnode = node_at(&tree, &parent).clone();
                    let (rule, local) = match (&pnode, last) {
                        (Derivation::Cut { .. }, 0) => {
                            ("sharp-hoist", eq_sharp_hoist_left(&pnode, &mut taken))
                        }
                        (Derivation::Cut { .. }, 1) => {
                            ("sharp-hoist", eq_sharp_hoist_right(&pnode, &mut taken))
                        }
                        (Derivation::CutBang { .. }, 1) | (Derivation::CutSharp { .. }, 1) => {
                            ("server-swap", eq_swap(&pnode, &mut taken))
                        }
                        (Derivation::OneL { .. }, 0)
                        | (Derivation::BangLSharp { .. }, 0)
                        | (Derivation::BangLBang { .. }, 0) => {
                            ("silent-push", eq_silent_push(&pnode).into_iter().next())
                        }
                        _ => return None,
                    };
                    tree = self.apply(&tree, &parent, Relation::Equiv, rule, local, &mut steps)?;
                    cur = parent;
                }
                let fork_node = node_at(&tree, fork).clone();
                let merged = eq_sharp_merge(&fork_node, false);
                tree = self.apply(&tree, fork, Relation::Equiv, "sharp-merge", merged, &mut steps)?;
                cur = fork.clone();
            }
        }
        if congruent(&erase(&tree), &self.target) {
            Some((tree, steps))
        } else {
            None
        }
    }
}

/// Mirrors one erasure-level reduction on the derivation itself.
///
/// The witness runs `equiv` and `shift` steps, then exactly one `comp`
/// step, then a tail of `equiv` steps that re-merges any servers the search
/// had to duplicate. The final tree checks and erases to
/// `reduce_step(erase(d), r)` up to congruence. Search is goal-directed with
/// a budget quadratic in the node count; exhausting it on an enabled redex
/// reports a defect in the rewrite rules, not in the caller's input.
pub fn subject_reduce(
    d: &Derivation,
    r: &Redex,
) -> Result<(Derivation, Vec<RewriteStep>), DynamicsError> {
    check_derivation(d)?;
    let target = reduce_step(&erase(d), r)?;
    let nodes = node_count(d);
    let budget = (nodes + 4) * (nodes + 4);
    for start in candidate_cuts(d) {
        let mut drive = Drive { kind: r.kind, target: target.clone(), budget };
        if let Some((tree, steps)) = drive.run(d.clone(), start, Vec::new(), Vec::new()) {
            return Ok((tree, steps));
        }
    }
    Err(DynamicsError::NoWitness { kind: r.kind, channel: r.channel.clone(), budget })
}

/// Repeatedly mirrors the leftmost available process reduction until the
/// erasure is irreducible or `budget` communication steps have been taken.
/// Returns the final tree, the number of `comp` steps, and whether the
/// budget ran out first. A tree that does not check is returned unchanged.
pub fn rewrite_to_normal(d: &Derivation, budget: usize) -> (Derivation, usize, bool) {
    if check_derivation(d).is_err() {
        return (d.clone(), 0, false);
    }
    let mut current = d.clone();
    let mut comps = 0;
    loop {
        let redexes = find_redexes(&erase(&current));
        let Some(redex) = redexes.first() else { return (current, comps, false) };
        if comps == budget {
            return (current, comps, true);
        }
        match subject_reduce(&current, redex) {
            Ok((next, _)) => {
                current = next;
                comps += 1;
            }
            Err(err) => panic!("rewriting stalled on an enabled redex: {err}"),
        }
    }
}
