//! Elaboration of processes into derivations.
//!
//! A [`Signature`] names the judgment a definition is supposed to satisfy:
//! the channel it gives, the channels it uses split across the three zones,
//! and the checking mode. [`elaborate`] canonicalizes the process and runs a
//! syntax-directed search for a derivation of that judgment. Subject
//! prefixes select right rules, context prefixes select left rules, and a
//! parallel composition under a restriction selects one of the cuts.
//!
//! Rule selection is deterministic given the prefix and the zones except at
//! two points, which are searched with one level of backtracking each:
//!
//! * a restriction over a replicated input can cut with `cut_!` or `cut_#`;
//! * a banged linear channel is lifted at its first send, into either
//!   exponential zone.
//!
//! The occurrence count of the channel (collapsing the two branches of a
//! case into one) decides which flavor is tried first; when both fail, the
//! deeper diagnostic is reported. A server whose body leans on banged
//! linear channels is instead boxed whole and cut at `!A`, leaving the
//! doors in place.
//!
//! Linear splitting at two-premise rules is by free occurrence: each
//! channel follows the premise that mentions it, unused channels follow the
//! continuation, and a channel needed by both sides is unsplittable. The
//! auxiliary zone splits the same way, and on top of that the elaborator
//! enforces the exactly-once discipline up front; unused auxiliary channels
//! are errors here even though the kernel accepts leaves that declare them.
//! The multiplexor zone is shared by every premise.
//!
//! Internal channels have no declared types, so cuts read them off the
//! providing prefixes. Selections lose the branch that was not taken, which
//! puts some restrictions beyond this first-order synthesis; those report
//! `no-rule` rather than guess.
//!
//! `dill` mode is a reference checker, not a kernel client: it collapses
//! the two exponential zones into one unrestricted pool, so it accepts
//! copying that the kernel rejects. Its successes are reported as plain
//! judgments and never claim kernel validity.

use std::collections::BTreeSet;
use std::fmt;

use crate::calculus::{
    all_names, canonical_form, congruent, free_names, substitute, Name, Process,
};
use crate::derivation::{check_derivation, erase, weaken, Derivation};
use crate::types::{ContextError, ContextTriple, Judgment, Type, Zone};

/// Which discipline a signature asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Dsll,
    Dill,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Dsll => write!(f, "dsll"),
            Mode::Dill => write!(f, "dill"),
        }
    }
}

/// The stated interface of a definition: one given channel and the used
/// channels by zone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub gives: (Name, Type),
    pub uses_linear: Zone,
    pub uses_aux: Zone,
    pub uses_mux: Zone,
    pub mode: Mode,
}

impl Signature {
    pub fn new(name: impl Into<String>, gives: impl Into<Name>, ty: Type, mode: Mode) -> Signature {
        Signature {
            name: name.into(),
            gives: (gives.into(), ty),
            uses_linear: Zone::new(),
            uses_aux: Zone::new(),
            uses_mux: Zone::new(),
            mode,
        }
    }

    pub fn with_linear(mut self, zone: Zone) -> Signature {
        self.uses_linear = zone;
        self
    }

    pub fn with_aux(mut self, zone: Zone) -> Signature {
        self.uses_aux = zone;
        self
    }

    pub fn with_mux(mut self, zone: Zone) -> Signature {
        self.uses_mux = zone;
        self
    }

    /// The judgment the signature asks for.
    pub fn judgment(&self) -> Result<Judgment, ContextError> {
        let contexts = ContextTriple::new(
            self.uses_aux.clone(),
            self.uses_mux.clone(),
            self.uses_linear.clone(),
        )?;
        Judgment::new(contexts, self.gives.0.clone(), self.gives.1.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    UnusedLinear,
    /// Carries the collapsed occurrence count that broke the discipline.
    ReusedAuxiliary {
        count: usize,
    },
    Unsplittable,
    PrefixMismatch,
    ServerBodyContext,
    NoRule,
}

impl DiagnosticKind {
    pub fn label(&self) -> &'static str {
        match self {
            DiagnosticKind::UnusedLinear => "unused-linear",
            DiagnosticKind::ReusedAuxiliary { .. } => "reused-auxiliary",
            DiagnosticKind::Unsplittable => "unsplittable",
            DiagnosticKind::PrefixMismatch => "prefix-mismatch",
            DiagnosticKind::ServerBodyContext => "server-body-context",
            DiagnosticKind::NoRule => "no-rule",
        }
    }
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Why elaboration stopped, anchored to a channel and a path into the
/// canonical process (child indices; empty means the root).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub channel: Name,
    pub position: Vec<usize>,
    pub explanation: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {}", self.kind, self.channel)?;
        if !self.position.is_empty() {
            write!(f, " at ")?;
            for (i, step) in self.position.iter().enumerate() {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{step}")?;
            }
        }
        write!(f, ": {}", self.explanation)
    }
}

/// What a successful elaboration hands back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Elaboration {
    /// A derivation that passed the kernel; dsll mode always lands here.
    Kernel(Derivation),
    /// The judgment the dill reference checker validated. No kernel
    /// derivation is claimed to exist.
    Reference(Judgment),
}

impl Elaboration {
    pub fn judgment(&self) -> Judgment {
        match self {
            Elaboration::Kernel(d) => check_derivation(d).expect("kernel elaborations are checked"),
            Elaboration::Reference(j) => j.clone(),
        }
    }

    pub fn derivation(&self) -> Option<&Derivation> {
        match self {
            Elaboration::Kernel(d) => Some(d),
            Elaboration::Reference(_) => None,
        }
    }
}

/// Elaborates `p` against its signature. The process is canonicalized
/// first, so the verdict is stable across structural congruence.
pub fn elaborate(p: &Process, sig: &Signature) -> Result<Elaboration, Vec<Diagnostic>> {
    let judgment = sig.judgment().map_err(|e| {
        fail(
            DiagnosticKind::NoRule,
            &sig.gives.0,
            &[],
            format!("signature {} is not well formed: {e}", sig.name),
        )
    })?;
    let p = canonical_form(p);
    match sig.mode {
        Mode::Dsll => {
            for (c, _) in sig.uses_aux.iter() {
                let count = collapsed_count(c, &p);
                if count == 0 {
                    return Err(fail(
                        DiagnosticKind::UnusedLinear,
                        c,
                        &[],
                        format!("auxiliary channel {c} is never used"),
                    ));
                }
                if count > 1 {
                    return Err(fail(
                        DiagnosticKind::ReusedAuxiliary { count },
                        c,
                        &[],
                        format!("auxiliary channel {c} occurs {count} times; exactly one use is admissible"),
                    ));
                }
            }
            let d = elab(
                &sig.uses_aux,
                &sig.uses_mux,
                &sig.uses_linear,
                &p,
                &judgment.subject,
                &judgment.ty,
                &[],
            )?;
            let checked = check_derivation(&d).expect("elaboration built an ill formed derivation");
            assert_eq!(checked, judgment, "elaboration drifted from the requested judgment");
            debug_assert!(congruent(&erase(&d), &p));
            Ok(Elaboration::Kernel(d))
        }
        Mode::Dill => {
            let gamma = sig
                .uses_aux
                .disjoint_union(&sig.uses_mux)
                .expect("the judgment already validated zone disjointness");
            dill(&gamma, &sig.uses_linear, &p, &judgment.subject, &judgment.ty, &[])?;
            Ok(Elaboration::Reference(judgment))
        }
    }
}

/// Cut-composes parts pairwise over the listed channels, left to right.
/// Each channel must be given by one of the two sides being joined and used
/// by the other; the flavor of cut follows the zone the user holds it in.
/// Diagnostics from an individual part carry its index as the first
/// position step.
pub fn elaborate_composition(
    parts: &[(Process, Signature)],
    cut_channels: &[Name],
) -> Result<Elaboration, Vec<Diagnostic>> {
    let anchor = cut_channels
        .first()
        .cloned()
        .unwrap_or_else(|| parts.first().map(|(_, s)| s.gives.0.clone()).unwrap_or_else(|| Name::from("?")));
    if parts.is_empty() || parts.len() != cut_channels.len() + 1 {
        return Err(fail(
            DiagnosticKind::NoRule,
            &anchor,
            &[],
            "a composition takes n parts and n - 1 cut channels".into(),
        ));
    }
    let mode = parts[0].1.mode;
    if parts.iter().any(|(_, s)| s.mode != mode) {
        return Err(fail(
            DiagnosticKind::NoRule,
            &anchor,
            &[],
            "the parts of a composition must agree on the checking mode".into(),
        ));
    }
    let mut elabs = Vec::new();
    for (i, (p, s)) in parts.iter().enumerate() {
        match elaborate(p, s) {
            Ok(e) => elabs.push(e),
            Err(ds) => {
                return Err(ds
                    .into_iter()
                    .map(|mut d| {
                        d.position.insert(0, i);
                        d
                    })
                    .collect())
            }
        }
    }
    match mode {
        Mode::Dsll => compose_dsll(parts, cut_channels, elabs),
        Mode::Dill => compose_dill(parts, cut_channels),
    }
}

/// The process a composition denotes: the parts in parallel under one
/// restriction per cut channel.
pub fn compose_process(parts: &[Process], cut_channels: &[Name]) -> Process {
    let mut iter = parts.iter().rev();
    let inner = match iter.next() {
        None => Process::Nil,
        Some(last) => iter.fold(last.clone(), |acc, p| Process::par(p.clone(), acc)),
    };
    cut_channels
        .iter()
        .rev()
        .fold(inner, |acc, c| Process::restrict(c.clone(), acc))
}

fn compose_dsll(
    parts: &[(Process, Signature)],
    cuts: &[Name],
    elabs: Vec<Elaboration>,
) -> Result<Elaboration, Vec<Diagnostic>> {
    let mut ds: Vec<Derivation> = elabs
        .into_iter()
        .map(|e| match e {
            Elaboration::Kernel(d) => d,
            Elaboration::Reference(_) => unreachable!("dsll parts elaborate to kernel derivations"),
        })
        .collect();
    let mut acc = ds.remove(0);
    let mut acc_gives = parts[0].1.gives.clone();
    for (i, c) in cuts.iter().enumerate() {
        let part_sig = &parts[i + 1].1;
        let part_d = ds.remove(0);
        let (giver_d, giver_ty, user_d, next_gives) = if &acc_gives.0 == c {
            (acc, acc_gives.1.clone(), part_d, part_sig.gives.clone())
        } else if &part_sig.gives.0 == c {
            (part_d, part_sig.gives.1.clone(), acc, acc_gives.clone())
        } else {
            return Err(fail(
                DiagnosticKind::Unsplittable,
                c,
                &[i],
                format!("neither side of the composition gives {c}"),
            ));
        };
        let giver_j = check_derivation(&giver_d).expect("parts are checked");
        let user_j = check_derivation(&user_d).expect("parts are checked");
        let built = if let Some(t) = user_j.contexts.linear.get(c) {
            if t != &giver_ty {
                return Err(fail(
                    DiagnosticKind::Unsplittable,
                    c,
                    &[i],
                    format!("{c} is given at {giver_ty} but used at {t}"),
                ));
            }
            // a plain cut shares the multiplexor, so both sides weaken to
            // the common zone first
            let merged = giver_j
                .contexts
                .multiplexor
                .merge_agreeing(&user_j.contexts.multiplexor)
                .map_err(|e| {
                    fail(DiagnosticKind::Unsplittable, c, &[i], format!("multiplexor zones disagree: {e}"))
                })?;
            let gd = weaken(&giver_d, &zone_minus(&merged, &giver_j.contexts.multiplexor))
                .map_err(|e| fail(DiagnosticKind::Unsplittable, c, &[i], e.to_string()))?;
            let ud = weaken(&user_d, &zone_minus(&merged, &user_j.contexts.multiplexor))
                .map_err(|e| fail(DiagnosticKind::Unsplittable, c, &[i], e.to_string()))?;
            Derivation::cut(c.clone(), giver_ty, gd, ud)
        } else if let Some(t) = user_j.contexts.auxiliary.get(c).cloned() {
            if t != giver_ty {
                return Err(fail(
                    DiagnosticKind::Unsplittable,
                    c,
                    &[i],
                    format!("{c} is given at {giver_ty} but used at {t}"),
                ));
            }
            server_side_clear(&giver_j, c, i)?;
            Derivation::cut_bang(c.clone(), giver_ty, giver_d, user_d)
        } else if let Some(t) = user_j.contexts.multiplexor.get(c).cloned() {
            if t != giver_ty {
                return Err(fail(
                    DiagnosticKind::Unsplittable,
                    c,
                    &[i],
                    format!("{c} is given at {giver_ty} but used at {t}"),
                ));
            }
            server_side_clear(&giver_j, c, i)?;
            Derivation::cut_sharp(c.clone(), giver_ty, giver_d, user_d)
        } else {
            return Err(fail(
                DiagnosticKind::Unsplittable,
                c,
                &[i],
                format!("the counterpart never uses {c}"),
            ));
        };
        check_derivation(&built)
            .map_err(|e| fail(DiagnosticKind::Unsplittable, c, &[i], format!("the cut does not check: {e}")))?;
        acc = built;
        acc_gives = next_gives;
    }
    Ok(Elaboration::Kernel(acc))
}

fn server_side_clear(giver: &Judgment, c: &Name, part: usize) -> Result<(), Vec<Diagnostic>> {
    if !giver.contexts.linear.is_empty() || !giver.contexts.multiplexor.is_empty() {
        return Err(fail(
            DiagnosticKind::ServerBodyContext,
            c,
            &[part],
            format!("the giver of {c} holds linear or multiplexor resources and cannot serve exponentially"),
        ));
    }
    Ok(())
}

fn compose_dill(parts: &[(Process, Signature)], cuts: &[Name]) -> Result<Elaboration, Vec<Diagnostic>> {
    let mut aux = parts[0].1.uses_aux.clone();
    let mut mux = parts[0].1.uses_mux.clone();
    let mut lin = parts[0].1.uses_linear.clone();
    let mut gives = parts[0].1.gives.clone();
    for (i, c) in cuts.iter().enumerate() {
        let s = &parts[i + 1].1;
        let (g_ty, mut u_aux, mut u_mux, mut u_lin, u_gives, g_aux, g_mux, g_lin) = if &gives.0 == c {
            (
                gives.1.clone(),
                s.uses_aux.clone(),
                s.uses_mux.clone(),
                s.uses_linear.clone(),
                s.gives.clone(),
                aux,
                mux,
                lin,
            )
        } else if &s.gives.0 == c {
            (
                s.gives.1.clone(),
                aux,
                mux,
                lin,
                gives.clone(),
                s.uses_aux.clone(),
                s.uses_mux.clone(),
                s.uses_linear.clone(),
            )
        } else {
            return Err(fail(
                DiagnosticKind::Unsplittable,
                c,
                &[i],
                format!("neither side of the composition gives {c}"),
            ));
        };
        let used = u_lin
            .remove(c)
            .or_else(|| u_aux.remove(c))
            .or_else(|| u_mux.remove(c));
        let Some(t) = used else {
            return Err(fail(
                DiagnosticKind::Unsplittable,
                c,
                &[i],
                format!("the counterpart never uses {c}"),
            ));
        };
        if t != g_ty {
            return Err(fail(
                DiagnosticKind::Unsplittable,
                c,
                &[i],
                format!("{c} is given at {g_ty} but used at {t}"),
            ));
        }
        let overlap =
            |e: ContextError| fail(DiagnosticKind::Unsplittable, c, &[i], format!("zones collide: {e}"));
        aux = g_aux.disjoint_union(&u_aux).map_err(overlap)?;
        mux = g_mux.merge_agreeing(&u_mux).map_err(overlap)?;
        lin = g_lin.disjoint_union(&u_lin).map_err(overlap)?;
        gives = u_gives;
    }
    let subject = gives.0.clone();
    let wrap = |e: ContextError| {
        fail(DiagnosticKind::Unsplittable, &subject, &[], format!("the composed judgment is ill formed: {e}"))
    };
    let triple = ContextTriple::new(aux, mux, lin).map_err(wrap)?;
    let j = Judgment::new(triple, gives.0, gives.1).map_err(wrap)?;
    Ok(Elaboration::Reference(j))
}

fn fail(kind: DiagnosticKind, channel: &Name, position: &[usize], explanation: String) -> Vec<Diagnostic> {
    vec![Diagnostic { kind, channel: channel.clone(), position: position.to_vec(), explanation }]
}

/// Of two failed branches, keep the one that got further in.
fn deeper(a: Vec<Diagnostic>, b: Vec<Diagnostic>) -> Vec<Diagnostic> {
    let depth = |ds: &[Diagnostic]| ds.iter().map(|d| d.position.len()).max().unwrap_or(0);
    if depth(&b) > depth(&a) {
        b
    } else {
        a
    }
}

fn both(
    l: Result<Derivation, Vec<Diagnostic>>,
    r: Result<Derivation, Vec<Diagnostic>>,
) -> Result<(Derivation, Derivation), Vec<Diagnostic>> {
    match (l, r) {
        (Ok(a), Ok(b)) => Ok((a, b)),
        (Err(a), Err(b)) => Err(deeper(a, b)),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

fn both_unit(l: Result<(), Vec<Diagnostic>>, r: Result<(), Vec<Diagnostic>>) -> Result<(), Vec<Diagnostic>> {
    match (l, r) {
        (Ok(()), Ok(())) => Ok(()),
        (Err(a), Err(b)) => Err(deeper(a, b)),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

fn child(position: &[usize], i: usize) -> Vec<usize> {
    let mut out = position.to_vec();
    out.push(i);
    out
}

fn node_names(aux: &Zone, mux: &Zone, linear: &Zone, subject: &Name) -> BTreeSet<Name> {
    let mut out: BTreeSet<Name> = BTreeSet::new();
    out.extend(aux.names().cloned());
    out.extend(mux.names().cloned());
    out.extend(linear.names().cloned());
    out.insert(subject.clone());
    out
}

/// Renames a bound name away from the zones so premise contexts stay
/// hygienic.
fn fresh_bound(b: &Name, body: &Process, avoid: &BTreeSet<Name>) -> (Name, Process) {
    if !avoid.contains(b) {
        return (b.clone(), body.clone());
    }
    let mut taken = avoid.clone();
    taken.extend(all_names(body));
    let nb = b.freshen(&taken);
    let nbody = substitute(body, &nb, b);
    (nb, nbody)
}

/// Renames the binders of a restriction spine away from the ambient names.
fn freshen_binders(p: &Process, avoid: &BTreeSet<Name>) -> Process {
    match p {
        Process::Restrict(b, body) => {
            if avoid.contains(b) {
                let mut taken = avoid.clone();
                taken.extend(all_names(body));
                let nb = b.freshen(&taken);
                let nbody = substitute(body, &nb, b);
                Process::restrict(nb, freshen_binders(&nbody, avoid))
            } else {
                Process::restrict(b.clone(), freshen_binders(body, avoid))
            }
        }
        _ => p.clone(),
    }
}

/// Free occurrences of `x`, counting the two branches of a case as one.
fn collapsed_count(x: &Name, p: &Process) -> usize {
    match p {
        Process::Nil => 0,
        Process::Par(l, r) => collapsed_count(x, l) + collapsed_count(x, r),
        Process::Restrict(b, body) => {
            if b == x {
                0
            } else {
                collapsed_count(x, body)
            }
        }
        Process::Input(c, b, body) | Process::Output(c, b, body) | Process::ReplInput(c, b, body) => {
            usize::from(c == x) + if b == x { 0 } else { collapsed_count(x, body) }
        }
        Process::SelectLeft(c, body) | Process::SelectRight(c, body) => {
            usize::from(c == x) + collapsed_count(x, body)
        }
        Process::Case(c, l, r) => {
            usize::from(c == x) + collapsed_count(x, l).max(collapsed_count(x, r))
        }
    }
}

/// One scope level: the restriction spine at its top and the parallel
/// components underneath, each with its path. Prefixes end the level.
fn flatten_level(p: &Process, base: &[usize]) -> (Vec<Name>, Vec<(Vec<usize>, Process)>) {
    let mut binders = Vec::new();
    let mut path = base.to_vec();
    let mut cur = p;
    while let Process::Restrict(x, body) = cur {
        binders.push(x.clone());
        path.push(0);
        cur = body;
    }
    let mut comps = Vec::new();
    collect_par(cur, path, &mut comps);
    (binders, comps)
}

fn collect_par(p: &Process, path: Vec<usize>, out: &mut Vec<(Vec<usize>, Process)>) {
    match p {
        Process::Par(l, r) => {
            collect_par(l, child(&path, 0), out);
            collect_par(r, child(&path, 1), out);
        }
        Process::Nil => {}
        _ => out.push((path, p.clone())),
    }
}

fn rebuild(binders: &[Name], comps: &[Process]) -> Process {
    let mut iter = comps.iter().rev();
    let inner = match iter.next() {
        None => Process::Nil,
        Some(last) => iter.fold(last.clone(), |acc, c| Process::par(c.clone(), acc)),
    };
    binders.iter().rev().fold(inner, |acc, b| Process::restrict(b.clone(), acc))
}

/// Multiplicative split of a zone between two premises by free occurrence.
/// Unused entries follow the second premise so a leaf can account for them.
fn split_zone(
    zone: &Zone,
    left: &Process,
    right: &Process,
    position: &[usize],
) -> Result<(Zone, Zone), Vec<Diagnostic>> {
    let fl = free_names(left);
    let fr = free_names(right);
    let mut zl = Zone::new();
    let mut zr = Zone::new();
    for (c, t) in zone.iter() {
        match (fl.contains(c), fr.contains(c)) {
            (true, true) => {
                return Err(fail(
                    DiagnosticKind::Unsplittable,
                    c,
                    position,
                    format!("channel {c} would have to serve both premises"),
                ))
            }
            (true, false) => zl.insert(c.clone(), t.clone()).expect("splitting a well formed zone"),
            _ => zr.insert(c.clone(), t.clone()).expect("splitting a well formed zone"),
        }
    }
    Ok((zl, zr))
}

/// Splits the body of a bound output between the premise typing the fresh
/// name and the continuation. Binders follow the side that uses them.
fn split_output_body(
    body: &Process,
    bound: &Name,
    position: &[usize],
) -> Result<(Process, Process), Vec<Diagnostic>> {
    let (binders, comps) = flatten_level(body, position);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (_, c) in &comps {
        if free_names(c).contains(bound) {
            left.push(c.clone());
        } else {
            right.push(c.clone());
        }
    }
    let mut bl = Vec::new();
    let mut br = Vec::new();
    for b in &binders {
        let inl = left.iter().any(|c| free_names(c).contains(b));
        let inr = right.iter().any(|c| free_names(c).contains(b));
        match (inl, inr) {
            (true, true) => {
                return Err(fail(
                    DiagnosticKind::Unsplittable,
                    b,
                    position,
                    format!("the restriction on {b} spans both premises of the output"),
                ))
            }
            (true, false) => bl.push(b.clone()),
            _ => br.push(b.clone()),
        }
    }
    Ok((rebuild(&bl, &left), rebuild(&br, &right)))
}

/// The type at which `p` offers `x`, read off the prefixes along the
/// providing thread. Selections lose the untaken branch and do not
/// synthesize.
fn synth_provide(p: &Process, x: &Name) -> Option<Type> {
    if !free_names(p).contains(x) {
        return Some(Type::One);
    }
    match p {
        Process::Nil => Some(Type::One),
        Process::Input(c, b, body) => {
            if c == x {
                Some(Type::lolli(synth_use(body, b)?, synth_provide(body, x)?))
            } else {
                synth_provide(body, x)
            }
        }
        Process::Output(c, b, body) => {
            let (arg, cont) = split_output_body(body, b, &[]).ok()?;
            if c == x {
                Some(Type::tensor(synth_provide(&arg, b)?, synth_provide(&cont, x)?))
            } else if free_names(&cont).contains(x) {
                synth_provide(&cont, x)
            } else {
                None
            }
        }
        Process::SelectLeft(c, body) | Process::SelectRight(c, body) => {
            if c == x {
                None
            } else {
                synth_provide(body, x)
            }
        }
        Process::Case(c, l, r) => {
            if c == x {
                Some(Type::with(synth_provide(l, x)?, synth_provide(r, x)?))
            } else {
                synth_provide(l, x).or_else(|| synth_provide(r, x))
            }
        }
        Process::ReplInput(c, b, body) => {
            if c == x {
                Some(Type::bang(synth_provide(body, b)?))
            } else {
                None
            }
        }
        Process::Restrict(..) | Process::Par(..) => {
            let (binders, comps) = flatten_level(p, &[]);
            if binders.iter().any(|b| b == x) {
                return None;
            }
            comps
                .iter()
                .filter(|(_, c)| free_names(c).contains(x))
                .find_map(|(_, c)| synth_provide(c, x))
        }
    }
}

/// The type at which `p` consumes `x` as a hypothesis. Repeated sends mean
/// the channel is exponential.
fn synth_use(p: &Process, x: &Name) -> Option<Type> {
    if !free_names(p).contains(x) {
        return Some(Type::One);
    }
    match p {
        Process::Nil => Some(Type::One),
        Process::Input(c, b, body) => {
            if c == x {
                Some(Type::tensor(synth_use(body, b)?, synth_use(body, x)?))
            } else {
                synth_use(body, x)
            }
        }
        Process::Output(c, b, body) => {
            if c == x && collapsed_count(x, p) > 1 {
                return Some(Type::bang(synth_use(body, b)?));
            }
            let (arg, cont) = split_output_body(body, b, &[]).ok()?;
            if c == x {
                Some(Type::lolli(synth_provide(&arg, b)?, synth_use(&cont, x)?))
            } else if free_names(&arg).contains(x) {
                synth_use(&arg, x)
            } else {
                synth_use(&cont, x)
            }
        }
        Process::SelectLeft(c, body) | Process::SelectRight(c, body) => {
            if c == x {
                None
            } else {
                synth_use(body, x)
            }
        }
        Process::Case(c, l, r) => {
            if c == x {
                Some(Type::plus(synth_use(l, x)?, synth_use(r, x)?))
            } else {
                synth_use(l, x).or_else(|| synth_use(r, x))
            }
        }
        Process::ReplInput(..) => None,
        Process::Restrict(..) | Process::Par(..) => {
            let (binders, comps) = flatten_level(p, &[]);
            if binders.iter().any(|b| b == x) {
                return None;
            }
            comps
                .iter()
                .filter(|(_, c)| free_names(c).contains(x))
                .find_map(|(_, c)| synth_use(c, x))
        }
    }
}

/// Drags the provider's connected component (through the remaining binders
/// of the level) onto the left premise. None when the split is not clean:
/// the group would capture another user of the cut channel.
fn provider_split(
    x: &Name,
    prov: Option<usize>,
    rest_binders: &[Name],
    comps: &[(Vec<usize>, Process)],
) -> Option<(Process, Process)> {
    let mut group: BTreeSet<usize> = prov.into_iter().collect();
    loop {
        let mut grew = false;
        for y in rest_binders {
            if group.iter().any(|&k| free_names(&comps[k].1).contains(y)) {
                for (j, (_, c)) in comps.iter().enumerate() {
                    if !group.contains(&j) && free_names(c).contains(y) {
                        group.insert(j);
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            break;
        }
    }
    if group.iter().any(|&k| prov != Some(k) && free_names(&comps[k].1).contains(x)) {
        return None;
    }
    let g_binders: Vec<Name> = rest_binders
        .iter()
        .filter(|y| group.iter().any(|&k| free_names(&comps[k].1).contains(*y)))
        .cloned()
        .collect();
    let r_binders: Vec<Name> =
        rest_binders.iter().filter(|y| !g_binders.contains(y)).cloned().collect();
    let g_comps: Vec<Process> = comps
        .iter()
        .enumerate()
        .filter(|(j, _)| group.contains(j))
        .map(|(_, (_, c))| c.clone())
        .collect();
    let r_comps: Vec<Process> = comps
        .iter()
        .enumerate()
        .filter(|(j, _)| !group.contains(j))
        .map(|(_, (_, c))| c.clone())
        .collect();
    Some((rebuild(&g_binders, &g_comps), rebuild(&r_binders, &r_comps)))
}

enum BinderOutcome<T> {
    /// Structurally not ready; another binder may be.
    Skip(Option<Vec<Diagnostic>>),
    /// This binder is the canonical cut here; its result is final.
    Done(Result<T, Vec<Diagnostic>>),
}

fn elab(
    aux: &Zone,
    mux: &Zone,
    linear: &Zone,
    p: &Process,
    subject: &Name,
    ty: &Type,
    position: &[usize],
) -> Result<Derivation, Vec<Diagnostic>> {
    match p {
        Process::Nil => leaf(aux, mux, linear, subject, ty, position),
        Process::Input(c, b, body) => {
            if c == subject {
                let Type::Lolli(a, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process receives on it"),
                    ));
                };
                let (b, body) = fresh_bound(b, body, &node_names(aux, mux, linear, subject));
                let mut lin = linear.clone();
                lin.insert(b.clone(), (**a).clone()).expect("freshened bound name");
                let sub = elab(aux, mux, &lin, &body, subject, bt, &child(position, 0))?;
                Ok(Derivation::lolli_r(subject.clone(), b, sub))
            } else if let Some(t) = linear.get(c).cloned() {
                let Type::Tensor(a, bt) = t else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {t} but the process receives on it"),
                    ));
                };
                let (b, body) = fresh_bound(b, body, &node_names(aux, mux, linear, subject));
                let mut lin = linear.clone();
                lin.remove(c);
                lin.insert(b.clone(), *a).expect("freshened bound name");
                lin.insert(c.clone(), *bt).expect("reinserting the consumed channel");
                let sub = elab(aux, mux, &lin, &body, subject, ty, &child(position, 0))?;
                Ok(Derivation::tensor_l(c.clone(), b, sub))
            } else if aux.contains(c) || mux.contains(c) {
                Err(fail(
                    DiagnosticKind::PrefixMismatch,
                    c,
                    position,
                    format!("exponential channel {c} admits sends only"),
                ))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::Output(c, b, body) => {
            if c == subject {
                let Type::Tensor(a, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process sends a fresh name on it"),
                    ));
                };
                let (arg, cont) = split_output_body(body, b, position)?;
                let (b2, arg) = fresh_bound(b, &arg, &node_names(aux, mux, linear, subject));
                let (lin_l, lin_r) = split_zone(linear, &arg, &cont, position)?;
                let (aux_l, aux_r) = split_zone(aux, &arg, &cont, position)?;
                let dl = elab(&aux_l, mux, &lin_l, &arg, &b2, a, &child(position, 0));
                let dr = elab(&aux_r, mux, &lin_r, &cont, subject, bt, &child(position, 1));
                let (dl, dr) = both(dl, dr)?;
                Ok(Derivation::tensor_r(subject.clone(), b2, dl, dr))
            } else if let Some(t) = linear.get(c).cloned() {
                match t {
                    Type::Lolli(a, bt) => {
                        let mut lin0 = linear.clone();
                        lin0.remove(c);
                        let (arg, cont) = split_output_body(body, b, position)?;
                        let (b2, arg) = fresh_bound(b, &arg, &node_names(aux, mux, &lin0, subject));
                        let (lin_l, lin_r) = split_zone(&lin0, &arg, &cont, position)?;
                        let (aux_l, aux_r) = split_zone(aux, &arg, &cont, position)?;
                        let mut lin_r2 = lin_r;
                        lin_r2.insert(c.clone(), *bt).expect("the channel was removed above");
                        let dl = elab(&aux_l, mux, &lin_l, &arg, &b2, &a, &child(position, 0));
                        let dr = elab(&aux_r, mux, &lin_r2, &cont, subject, ty, &child(position, 1));
                        let (dl, dr) = both(dl, dr)?;
                        Ok(Derivation::lolli_l(c.clone(), b2, dl, dr))
                    }
                    Type::Bang(a) => {
                        // first use of a banged hypothesis: lift it into an
                        // exponential zone, trying the one its occurrence
                        // count can satisfy first
                        let cnt = collapsed_count(c, p);
                        let mut lin0 = linear.clone();
                        lin0.remove(c);
                        let bang = || -> Result<Derivation, Vec<Diagnostic>> {
                            if cnt != 1 {
                                return Err(fail(
                                    DiagnosticKind::ReusedAuxiliary { count: cnt },
                                    c,
                                    position,
                                    format!("channel {c} occurs {cnt} times from here; an auxiliary occurs exactly once"),
                                ));
                            }
                            let mut aux2 = aux.clone();
                            aux2.insert(c.clone(), (*a).clone()).expect("zones are disjoint");
                            Ok(Derivation::bang_l_bang(
                                c.clone(),
                                elab(&aux2, mux, &lin0, p, subject, ty, position)?,
                            ))
                        };
                        let sharp = || -> Result<Derivation, Vec<Diagnostic>> {
                            let mut mux2 = mux.clone();
                            mux2.insert(c.clone(), (*a).clone()).expect("zones are disjoint");
                            Ok(Derivation::bang_l_sharp(
                                c.clone(),
                                elab(aux, &mux2, &lin0, p, subject, ty, position)?,
                            ))
                        };
                        if cnt == 1 {
                            bang().or_else(|e1| sharp().map_err(|e2| deeper(e1, e2)))
                        } else {
                            sharp().or_else(|e1| bang().map_err(|e2| deeper(e1, e2)))
                        }
                    }
                    other => Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {other} but the process sends a fresh name on it"),
                    )),
                }
            } else if let Some(a) = aux.get(c).cloned() {
                let (b2, body) = fresh_bound(b, body, &node_names(aux, mux, linear, subject));
                let mut aux2 = aux.clone();
                aux2.remove(c);
                let mut lin = linear.clone();
                lin.insert(b2.clone(), a.clone()).expect("freshened bound name");
                let sub = elab(&aux2, mux, &lin, &body, subject, ty, &child(position, 0))?;
                Ok(Derivation::b_bang(c.clone(), b2, a, sub))
            } else if let Some(a) = mux.get(c).cloned() {
                let (b2, body) = fresh_bound(b, body, &node_names(aux, mux, linear, subject));
                let mut lin = linear.clone();
                lin.insert(b2.clone(), a).expect("freshened bound name");
                let sub = elab(aux, mux, &lin, &body, subject, ty, &child(position, 0))?;
                Ok(Derivation::b_sharp(c.clone(), b2, sub))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::ReplInput(c, b, body) => {
            if c != subject {
                return Err(fail(
                    DiagnosticKind::NoRule,
                    c,
                    position,
                    format!("a replicated input on {c} composes only under a restriction"),
                ));
            }
            let Type::Bang(a) = ty else {
                return Err(fail(
                    DiagnosticKind::PrefixMismatch,
                    c,
                    position,
                    format!("the subject offers {ty} but the process replicates on it"),
                ));
            };
            if let Some((w, _)) = aux.iter().next() {
                return Err(fail(
                    DiagnosticKind::ServerBodyContext,
                    w,
                    position,
                    format!("auxiliary channel {w} cannot cross the replication on {c}"),
                ));
            }
            // the linear zone may hold only doors and discardable units
            let mut units = Vec::new();
            let mut doors = Zone::new();
            let mut door_names = Vec::new();
            for (ch, t) in linear.iter() {
                match t {
                    Type::One => units.push(ch.clone()),
                    Type::Bang(inner) => {
                        // a door is auxiliary inside the box, so the body
                        // must use it exactly once
                        let count = collapsed_count(ch, body);
                        if count == 0 {
                            return Err(fail(
                                DiagnosticKind::UnusedLinear,
                                ch,
                                position,
                                format!("door {ch} is never used by the server body"),
                            ));
                        }
                        if count > 1 {
                            return Err(fail(
                                DiagnosticKind::ReusedAuxiliary { count },
                                ch,
                                position,
                                format!("door {ch} occurs {count} times in the server body; exactly one use is admissible"),
                            ));
                        }
                        doors.insert(ch.clone(), (**inner).clone()).expect("zone iteration is unique");
                        door_names.push(ch.clone());
                    }
                    other => {
                        return Err(fail(
                            DiagnosticKind::ServerBodyContext,
                            ch,
                            position,
                            format!("linear channel {ch} of type {other} cannot cross the replication on {c}"),
                        ))
                    }
                }
            }
            let (b2, body) = fresh_bound(b, body, &node_names(aux, mux, linear, subject));
            let sub = elab(&doors, &Zone::new(), &Zone::new(), &body, &b2, a, &child(position, 0))?;
            let mut d = Derivation::bang_r_in(subject.clone(), b2, door_names, mux.clone(), sub);
            for u in units.into_iter().rev() {
                d = Derivation::one_l(u, d);
            }
            Ok(d)
        }
        Process::SelectLeft(c, body) => {
            if c == subject {
                let Type::Plus(a, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process selects on it"),
                    ));
                };
                let sub = elab(aux, mux, linear, body, subject, a, &child(position, 0))?;
                Ok(Derivation::plus_r1(subject.clone(), (**bt).clone(), sub))
            } else if let Some(t) = linear.get(c).cloned() {
                let Type::With(a, bt) = t else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {t} but the process selects on it"),
                    ));
                };
                let mut lin = linear.clone();
                lin.remove(c);
                lin.insert(c.clone(), *a).expect("the channel was removed above");
                let sub = elab(aux, mux, &lin, body, subject, ty, &child(position, 0))?;
                Ok(Derivation::with_l1(c.clone(), *bt, sub))
            } else if aux.contains(c) || mux.contains(c) {
                Err(fail(
                    DiagnosticKind::PrefixMismatch,
                    c,
                    position,
                    format!("exponential channel {c} admits sends only"),
                ))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::SelectRight(c, body) => {
            if c == subject {
                let Type::Plus(a, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process selects on it"),
                    ));
                };
                let sub = elab(aux, mux, linear, body, subject, bt, &child(position, 0))?;
                Ok(Derivation::plus_r2(subject.clone(), (**a).clone(), sub))
            } else if let Some(t) = linear.get(c).cloned() {
                let Type::With(a, bt) = t else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {t} but the process selects on it"),
                    ));
                };
                let mut lin = linear.clone();
                lin.remove(c);
                lin.insert(c.clone(), *bt).expect("the channel was removed above");
                let sub = elab(aux, mux, &lin, body, subject, ty, &child(position, 0))?;
                Ok(Derivation::with_l2(c.clone(), *a, sub))
            } else if aux.contains(c) || mux.contains(c) {
                Err(fail(
                    DiagnosticKind::PrefixMismatch,
                    c,
                    position,
                    format!("exponential channel {c} admits sends only"),
                ))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::Case(c, l, r) => {
            if c == subject {
                let Type::With(a, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process branches on it"),
                    ));
                };
                let dl = elab(aux, mux, linear, l, subject, a, &child(position, 0));
                let dr = elab(aux, mux, linear, r, subject, bt, &child(position, 1));
                let (dl, dr) = both(dl, dr)?;
                Ok(Derivation::with_r(subject.clone(), dl, dr))
            } else if let Some(t) = linear.get(c).cloned() {
                let Type::Plus(a, bt) = t else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {t} but the process branches on it"),
                    ));
                };
                let mut lin_l = linear.clone();
                lin_l.remove(c);
                lin_l.insert(c.clone(), *a).expect("the channel was removed above");
                let mut lin_r = linear.clone();
                lin_r.remove(c);
                lin_r.insert(c.clone(), *bt).expect("the channel was removed above");
                let dl = elab(aux, mux, &lin_l, l, subject, ty, &child(position, 0));
                let dr = elab(aux, mux, &lin_r, r, subject, ty, &child(position, 1));
                let (dl, dr) = both(dl, dr)?;
                Ok(Derivation::plus_l(c.clone(), dl, dr))
            } else if aux.contains(c) || mux.contains(c) {
                Err(fail(
                    DiagnosticKind::PrefixMismatch,
                    c,
                    position,
                    format!("exponential channel {c} admits sends only"),
                ))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::Restrict(..) | Process::Par(..) => {
            elab_cluster(aux, mux, linear, p, subject, ty, position)
        }
    }
}

fn leaf(
    aux: &Zone,
    mux: &Zone,
    linear: &Zone,
    subject: &Name,
    ty: &Type,
    position: &[usize],
) -> Result<Derivation, Vec<Diagnostic>> {
    if ty != &Type::One {
        return Err(fail(
            DiagnosticKind::PrefixMismatch,
            subject,
            position,
            format!("the subject offers {ty} but the process stops"),
        ));
    }
    if let Some((a, _)) = aux.iter().next() {
        return Err(fail(
            DiagnosticKind::UnusedLinear,
            a,
            position,
            format!("auxiliary channel {a} is never used"),
        ));
    }
    let mut units = Vec::new();
    for (c, t) in linear.iter() {
        if t == &Type::One {
            units.push(c.clone());
        } else {
            return Err(fail(
                DiagnosticKind::UnusedLinear,
                c,
                position,
                format!("linear channel {c} of type {t} is never used"),
            ));
        }
    }
    let mut d = Derivation::one_r_in(subject.clone(), Zone::new(), mux.clone());
    for c in units.into_iter().rev() {
        d = Derivation::one_l(c, d);
    }
    Ok(d)
}

fn elab_cluster(
    aux: &Zone,
    mux: &Zone,
    linear: &Zone,
    p: &Process,
    subject: &Name,
    ty: &Type,
    position: &[usize],
) -> Result<Derivation, Vec<Diagnostic>> {
    let q = freshen_binders(p, &node_names(aux, mux, linear, subject));
    let (binders, comps) = flatten_level(&q, position);
    if binders.is_empty() {
        return Err(fail(
            DiagnosticKind::NoRule,
            subject,
            position,
            "parallel components compose only under a restriction".into(),
        ));
    }
    // A restriction is ready once the group its provider drags along is
    // closed under the other binders of the level. The two sides of a well
    // scoped cut share no other binder, so some restriction is always
    // ready; trying them in order keeps the choice deterministic.
    let mut best: Option<Vec<Diagnostic>> = None;
    for i in 0..binders.len() {
        match try_cut_binder(aux, mux, linear, subject, ty, position, &binders, &comps, i) {
            BinderOutcome::Done(r) => return r,
            BinderOutcome::Skip(Some(d)) => {
                best = Some(match best {
                    Some(b) => deeper(b, d),
                    None => d,
                })
            }
            BinderOutcome::Skip(None) => {}
        }
    }
    Err(best.unwrap_or_else(|| {
        fail(
            DiagnosticKind::NoRule,
            &binders[0],
            position,
            "no restriction here admits a cut".into(),
        )
    }))
}

#[allow(clippy::too_many_arguments)]
fn try_cut_binder(
    aux: &Zone,
    mux: &Zone,
    linear: &Zone,
    subject: &Name,
    ty: &Type,
    position: &[usize],
    binders: &[Name],
    comps: &[(Vec<usize>, Process)],
    i: usize,
) -> BinderOutcome<Derivation> {
    let x = &binders[i];
    let rest_binders: Vec<Name> = binders
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, b)| b.clone())
        .collect();
    let using: Vec<usize> = comps
        .iter()
        .enumerate()
        .filter(|(_, (_, c))| free_names(c).contains(x))
        .map(|(k, _)| k)
        .collect();
    let server = using
        .iter()
        .copied()
        .find(|&k| matches!(&comps[k].1, Process::ReplInput(c, _, _) if c == x));
    if let Some(k) = server {
        let (spos, server_comp) = &comps[k];
        let Process::ReplInput(_, sb, sbody) = server_comp else { unreachable!() };
        let sfree = free_names(server_comp);
        if rest_binders.iter().any(|y| sfree.contains(y)) {
            // another restriction reaches into the server; cut that first
            return BinderOutcome::Skip(None);
        }
        let Some(a) = synth_provide(sbody, sb) else {
            return BinderOutcome::Skip(Some(fail(
                DiagnosticKind::NoRule,
                x,
                spos,
                format!("cannot infer the session type served at {x}"),
            )));
        };
        let rest: Vec<Process> = comps
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, (_, c))| c.clone())
            .collect();
        let user = rebuild(&rest_binders, &rest);
        BinderOutcome::Done(build_server_cut(
            aux, mux, linear, subject, ty, position, x, sb, sbody, &sfree, a, &user, spos,
        ))
    } else {
        let mut prov: Option<usize> = None;
        let mut a: Option<Type> = None;
        for &k in &using {
            if let Some(t) = synth_provide(&comps[k].1, x) {
                prov = Some(k);
                a = Some(t);
                break;
            }
        }
        if a.is_none() {
            // a dropped unit axiom can still be the provider
            a = using.iter().find_map(|&k| synth_use(&comps[k].1, x));
        }
        let Some(a) = a else {
            return BinderOutcome::Skip(Some(fail(
                DiagnosticKind::NoRule,
                x,
                position,
                format!("cannot infer the session type cut at {x}"),
            )));
        };
        let Some((left_p, right_p)) = provider_split(x, prov, &rest_binders, comps) else {
            return BinderOutcome::Skip(None);
        };
        let lpos = prov.map(|k| comps[k].0.clone()).unwrap_or_else(|| position.to_vec());
        BinderOutcome::Done(build_plain_cut(
            aux, mux, linear, subject, ty, position, x, &a, &left_p, &right_p, &lpos,
        ))
    }
}

#[allow(clippy::too_many_arguments)]
fn build_plain_cut(
    aux: &Zone,
    mux: &Zone,
    linear: &Zone,
    subject: &Name,
    ty: &Type,
    position: &[usize],
    x: &Name,
    a: &Type,
    left_p: &Process,
    right_p: &Process,
    lpos: &[usize],
) -> Result<Derivation, Vec<Diagnostic>> {
    let (lin_l, lin_r) = split_zone(linear, left_p, right_p, position)?;
    let (aux_l, aux_r) = split_zone(aux, left_p, right_p, position)?;
    let mut lin_r2 = lin_r;
    lin_r2.insert(x.clone(), a.clone()).expect("the binder was freshened against the zones");
    let dl = elab(&aux_l, mux, &lin_l, left_p, x, a, lpos);
    let dr = elab(&aux_r, mux, &lin_r2, right_p, subject, ty, position);
    let (dl, dr) = both(dl, dr)?;
    Ok(Derivation::cut(x.clone(), a.clone(), dl, dr))
}

#[allow(clippy::too_many_arguments)]
fn build_server_cut(
    aux: &Zone,
    mux: &Zone,
    linear: &Zone,
    subject: &Name,
    ty: &Type,
    position: &[usize],
    x: &Name,
    sb: &Name,
    sbody: &Process,
    sfree: &BTreeSet<Name>,
    a: Type,
    user: &Process,
    spos: &[usize],
) -> Result<Derivation, Vec<Diagnostic>> {
    if linear.names().any(|nm| sfree.contains(nm)) {
        // the body leans on linear doors: box the whole server at !A and
        // let the user lift the banged channel at its first send
        let boxed = Type::bang(a);
        let server = Process::repl(x.clone(), sb.clone(), sbody.clone());
        let (lin_s, lin_u) = split_zone(linear, &server, user, position)?;
        let (aux_s, aux_u) = split_zone(aux, &server, user, position)?;
        let mut lin_u2 = lin_u;
        lin_u2.insert(x.clone(), boxed.clone()).expect("the binder was freshened against the zones");
        let dl = elab(&aux_s, mux, &lin_s, &server, x, &boxed, spos);
        let dr = elab(&aux_u, mux, &lin_u2, user, subject, ty, position);
        let (dl, dr) = both(dl, dr)?;
        return Ok(Derivation::cut(x.clone(), boxed, dl, dr));
    }
    let mut avoid = node_names(aux, mux, linear, subject);
    avoid.insert(x.clone());
    let (sb2, sbody2) = fresh_bound(sb, sbody, &avoid);
    let mut aux_in = Zone::new();
    let mut aux_out = Zone::new();
    for (nm, t) in aux.iter() {
        if sfree.contains(nm) {
            aux_in.insert(nm.clone(), t.clone()).expect("splitting a well formed zone");
        } else {
            aux_out.insert(nm.clone(), t.clone()).expect("splitting a well formed zone");
        }
    }
    let mut mux_in = Zone::new();
    for (nm, t) in mux.iter() {
        if sfree.contains(nm) {
            mux_in.insert(nm.clone(), t.clone()).expect("splitting a well formed zone");
        }
    }
    let cnt = collapsed_count(x, user);
    let spos0 = child(spos, 0);
    let bang = || -> Result<Derivation, Vec<Diagnostic>> {
        if cnt == 0 {
            return Err(fail(
                DiagnosticKind::UnusedLinear,
                x,
                position,
                format!("auxiliary channel {x} is never used"),
            ));
        }
        if cnt > 1 {
            return Err(fail(
                DiagnosticKind::ReusedAuxiliary { count: cnt },
                x,
                position,
                format!("auxiliary channel {x} occurs {cnt} times; exactly one use is admissible"),
            ));
        }
        if let Some((nm, _)) = mux_in.iter().next() {
            return Err(fail(
                DiagnosticKind::ServerBodyContext,
                nm,
                spos,
                format!("multiplexor channel {nm} cannot feed this server without a box"),
            ));
        }
        let dl = elab(&aux_in, &Zone::new(), &Zone::new(), &sbody2, &sb2, &a, &spos0);
        let mut aux_u = aux_out.clone();
        aux_u.insert(x.clone(), a.clone()).expect("the binder was freshened against the zones");
        let dr = elab(&aux_u, mux, linear, user, subject, ty, position);
        let (dl, dr) = both(dl, dr)?;
        Ok(Derivation::cut_bang(x.clone(), a.clone(), dl, dr))
    };
    let sharp = || -> Result<Derivation, Vec<Diagnostic>> {
        if let Some((nm, _)) = aux_in.iter().next() {
            return Err(fail(
                DiagnosticKind::ServerBodyContext,
                nm,
                spos,
                format!("auxiliary channel {nm} cannot feed a shared server"),
            ));
        }
        let dl = elab(&mux_in, &Zone::new(), &Zone::new(), &sbody2, &sb2, &a, &spos0);
        let mut mux_u = mux.clone();
        mux_u.insert(x.clone(), a.clone()).expect("the binder was freshened against the zones");
        let dr = elab(aux, &mux_u, linear, user, subject, ty, position);
        let (dl, dr) = both(dl, dr)?;
        Ok(Derivation::cut_sharp(x.clone(), a.clone(), dl, dr))
    };
    if cnt == 1 && mux_in.is_empty() {
        bang().or_else(|e1| sharp().map_err(|e2| deeper(e1, e2)))
    } else {
        sharp().or_else(|e1| bang().map_err(|e2| deeper(e1, e2)))
    }
}

/// The reference checker for dill mode: one unrestricted exponential pool
/// `gamma` (each entry `x: A` reads as the need of a session `!A`) next to
/// the linear zone. No derivation is produced.
fn dill(
    gamma: &Zone,
    delta: &Zone,
    p: &Process,
    subject: &Name,
    ty: &Type,
    position: &[usize],
) -> Result<(), Vec<Diagnostic>> {
    match p {
        Process::Nil => {
            if ty != &Type::One {
                return Err(fail(
                    DiagnosticKind::PrefixMismatch,
                    subject,
                    position,
                    format!("the subject offers {ty} but the process stops"),
                ));
            }
            for (c, t) in delta.iter() {
                if t != &Type::One {
                    return Err(fail(
                        DiagnosticKind::UnusedLinear,
                        c,
                        position,
                        format!("linear channel {c} of type {t} is never used"),
                    ));
                }
            }
            Ok(())
        }
        Process::Input(c, b, body) => {
            if c == subject {
                let Type::Lolli(a, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process receives on it"),
                    ));
                };
                let (b2, body) = fresh_bound(b, body, &pool_names(gamma, delta, subject));
                let mut d2 = delta.clone();
                d2.insert(b2, (**a).clone()).expect("freshened bound name");
                dill(gamma, &d2, &body, subject, bt, &child(position, 0))
            } else if let Some(t) = delta.get(c).cloned() {
                let Type::Tensor(a, bt) = t else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {t} but the process receives on it"),
                    ));
                };
                let (b2, body) = fresh_bound(b, body, &pool_names(gamma, delta, subject));
                let mut d2 = delta.clone();
                d2.remove(c);
                d2.insert(b2, *a).expect("freshened bound name");
                d2.insert(c.clone(), *bt).expect("reinserting the consumed channel");
                dill(gamma, &d2, &body, subject, ty, &child(position, 0))
            } else if gamma.contains(c) {
                Err(fail(
                    DiagnosticKind::PrefixMismatch,
                    c,
                    position,
                    format!("exponential channel {c} admits sends only"),
                ))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::Output(c, b, body) => {
            if c == subject {
                let Type::Tensor(a, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process sends a fresh name on it"),
                    ));
                };
                let (arg, cont) = split_output_body(body, b, position)?;
                let (b2, arg) = fresh_bound(b, &arg, &pool_names(gamma, delta, subject));
                let (d_l, d_r) = split_zone(delta, &arg, &cont, position)?;
                let l = dill(gamma, &d_l, &arg, &b2, a, &child(position, 0));
                let r = dill(gamma, &d_r, &cont, subject, bt, &child(position, 1));
                both_unit(l, r)
            } else if let Some(t) = delta.get(c).cloned() {
                match t {
                    Type::Lolli(a, bt) => {
                        let mut d0 = delta.clone();
                        d0.remove(c);
                        let (arg, cont) = split_output_body(body, b, position)?;
                        let (b2, arg) = fresh_bound(b, &arg, &pool_names(gamma, &d0, subject));
                        let (d_l, d_r) = split_zone(&d0, &arg, &cont, position)?;
                        let mut d_r2 = d_r;
                        d_r2.insert(c.clone(), *bt).expect("the channel was removed above");
                        let l = dill(gamma, &d_l, &arg, &b2, &a, &child(position, 0));
                        let r = dill(gamma, &d_r2, &cont, subject, ty, &child(position, 1));
                        both_unit(l, r)
                    }
                    Type::Bang(a) => {
                        // silent lift into the pool, then the send is a copy
                        let mut g2 = gamma.clone();
                        g2.insert(c.clone(), *a).expect("zones are disjoint");
                        let mut d0 = delta.clone();
                        d0.remove(c);
                        dill(&g2, &d0, p, subject, ty, position)
                    }
                    other => Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {other} but the process sends a fresh name on it"),
                    )),
                }
            } else if let Some(t) = gamma.get(c).cloned() {
                let (b2, body) = fresh_bound(b, body, &pool_names(gamma, delta, subject));
                let mut d2 = delta.clone();
                d2.insert(b2, t).expect("freshened bound name");
                dill(gamma, &d2, &body, subject, ty, &child(position, 0))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::ReplInput(c, b, body) => {
            if c != subject {
                return Err(fail(
                    DiagnosticKind::NoRule,
                    c,
                    position,
                    format!("a replicated input on {c} composes only under a restriction"),
                ));
            }
            let Type::Bang(a) = ty else {
                return Err(fail(
                    DiagnosticKind::PrefixMismatch,
                    c,
                    position,
                    format!("the subject offers {ty} but the process replicates on it"),
                ));
            };
            // banged linear hypotheses lift into the pool (weakening covers
            // the unused ones), units are discarded, anything else is stuck
            let mut g2 = gamma.clone();
            for (nm, t) in delta.iter() {
                match t {
                    Type::One => {}
                    Type::Bang(inner) => {
                        g2.insert(nm.clone(), (**inner).clone()).expect("zones are disjoint")
                    }
                    other => {
                        return Err(fail(
                            DiagnosticKind::ServerBodyContext,
                            nm,
                            position,
                            format!("linear channel {nm} of type {other} cannot cross the replication on {c}"),
                        ))
                    }
                }
            }
            let (b2, body) = fresh_bound(b, body, &pool_names(&g2, delta, subject));
            dill(&g2, &Zone::new(), &body, &b2, a, &child(position, 0))
        }
        Process::SelectLeft(c, body) => {
            if c == subject {
                let Type::Plus(a, _) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process selects on it"),
                    ));
                };
                dill(gamma, delta, body, subject, a, &child(position, 0))
            } else if let Some(t) = delta.get(c).cloned() {
                let Type::With(a, _) = t else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {t} but the process selects on it"),
                    ));
                };
                let mut d2 = delta.clone();
                d2.remove(c);
                d2.insert(c.clone(), *a).expect("the channel was removed above");
                dill(gamma, &d2, body, subject, ty, &child(position, 0))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::SelectRight(c, body) => {
            if c == subject {
                let Type::Plus(_, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process selects on it"),
                    ));
                };
                dill(gamma, delta, body, subject, bt, &child(position, 0))
            } else if let Some(t) = delta.get(c).cloned() {
                let Type::With(_, bt) = t else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {t} but the process selects on it"),
                    ));
                };
                let mut d2 = delta.clone();
                d2.remove(c);
                d2.insert(c.clone(), *bt).expect("the channel was removed above");
                dill(gamma, &d2, body, subject, ty, &child(position, 0))
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::Case(c, l, r) => {
            if c == subject {
                let Type::With(a, bt) = ty else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("the subject offers {ty} but the process branches on it"),
                    ));
                };
                let dl = dill(gamma, delta, l, subject, a, &child(position, 0));
                let dr = dill(gamma, delta, r, subject, bt, &child(position, 1));
                both_unit(dl, dr)
            } else if let Some(t) = delta.get(c).cloned() {
                let Type::Plus(a, bt) = t else {
                    return Err(fail(
                        DiagnosticKind::PrefixMismatch,
                        c,
                        position,
                        format!("channel {c} carries {t} but the process branches on it"),
                    ));
                };
                let mut d_l = delta.clone();
                d_l.remove(c);
                d_l.insert(c.clone(), *a).expect("the channel was removed above");
                let mut d_r = delta.clone();
                d_r.remove(c);
                d_r.insert(c.clone(), *bt).expect("the channel was removed above");
                let dl = dill(gamma, &d_l, l, subject, ty, &child(position, 0));
                let dr = dill(gamma, &d_r, r, subject, ty, &child(position, 1));
                both_unit(dl, dr)
            } else {
                Err(fail(DiagnosticKind::NoRule, c, position, format!("channel {c} is not in scope")))
            }
        }
        Process::Restrict(..) | Process::Par(..) => {
            dill_cluster(gamma, delta, p, subject, ty, position)
        }
    }
}

fn pool_names(gamma: &Zone, delta: &Zone, subject: &Name) -> BTreeSet<Name> {
    let mut out: BTreeSet<Name> = BTreeSet::new();
    out.extend(gamma.names().cloned());
    out.extend(delta.names().cloned());
    out.insert(subject.clone());
    out
}

fn dill_cluster(
    gamma: &Zone,
    delta: &Zone,
    p: &Process,
    subject: &Name,
    ty: &Type,
    position: &[usize],
) -> Result<(), Vec<Diagnostic>> {
    let q = freshen_binders(p, &pool_names(gamma, delta, subject));
    let (binders, comps) = flatten_level(&q, position);
    if binders.is_empty() {
        return Err(fail(
            DiagnosticKind::NoRule,
            subject,
            position,
            "parallel components compose only under a restriction".into(),
        ));
    }
    let mut best: Option<Vec<Diagnostic>> = None;
    for i in 0..binders.len() {
        match try_dill_binder(gamma, delta, subject, ty, position, &binders, &comps, i) {
            BinderOutcome::Done(r) => return r,
            BinderOutcome::Skip(Some(d)) => {
                best = Some(match best {
                    Some(b) => deeper(b, d),
                    None => d,
                })
            }
            BinderOutcome::Skip(None) => {}
        }
    }
    Err(best.unwrap_or_else(|| {
        fail(
            DiagnosticKind::NoRule,
            &binders[0],
            position,
            "no restriction here admits a cut".into(),
        )
    }))
}

#[allow(clippy::too_many_arguments)]
fn try_dill_binder(
    gamma: &Zone,
    delta: &Zone,
    subject: &Name,
    ty: &Type,
    position: &[usize],
    binders: &[Name],
    comps: &[(Vec<usize>, Process)],
    i: usize,
) -> BinderOutcome<()> {
    let x = &binders[i];
    let rest_binders: Vec<Name> = binders
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, b)| b.clone())
        .collect();
    let using: Vec<usize> = comps
        .iter()
        .enumerate()
        .filter(|(_, (_, c))| free_names(c).contains(x))
        .map(|(k, _)| k)
        .collect();
    let server = using
        .iter()
        .copied()
        .find(|&k| matches!(&comps[k].1, Process::ReplInput(c, _, _) if c == x));
    if let Some(k) = server {
        let (spos, server_comp) = &comps[k];
        let Process::ReplInput(_, sb, sbody) = server_comp else { unreachable!() };
        let sfree = free_names(server_comp);
        if rest_binders.iter().any(|y| sfree.contains(y)) {
            return BinderOutcome::Skip(None);
        }
        let Some(a) = synth_provide(sbody, sb) else {
            return BinderOutcome::Skip(Some(fail(
                DiagnosticKind::NoRule,
                x,
                spos,
                format!("cannot infer the session type served at {x}"),
            )));
        };
        let rest: Vec<Process> = comps
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, (_, c))| c.clone())
            .collect();
        let user = rebuild(&rest_binders, &rest);
        // banged linear hypotheses the body mentions lift into the pool
        // for the whole node
        let mut g2 = gamma.clone();
        let mut d_rest = delta.clone();
        for (nm, t) in delta.iter() {
            if sfree.contains(nm) {
                match t {
                    Type::Bang(inner) => {
                        g2.insert(nm.clone(), (**inner).clone()).expect("zones are disjoint");
                        d_rest.remove(nm);
                    }
                    other => {
                        return BinderOutcome::Done(Err(fail(
                            DiagnosticKind::ServerBodyContext,
                            nm,
                            spos,
                            format!("linear channel {nm} of type {other} cannot feed a replicated server"),
                        )))
                    }
                }
            }
        }
        let mut avoid = pool_names(&g2, &d_rest, subject);
        avoid.insert(x.clone());
        let (sb2, sbody2) = fresh_bound(sb, sbody, &avoid);
        let l = dill(&g2, &Zone::new(), &sbody2, &sb2, &a, &child(spos, 0));
        let mut g3 = g2.clone();
        g3.insert(x.clone(), a).expect("the binder was freshened against the zones");
        let r = dill(&g3, &d_rest, &user, subject, ty, position);
        BinderOutcome::Done(both_unit(l, r))
    } else {
        let mut prov: Option<usize> = None;
        let mut a: Option<Type> = None;
        for &k in &using {
            if let Some(t) = synth_provide(&comps[k].1, x) {
                prov = Some(k);
                a = Some(t);
                break;
            }
        }
        if a.is_none() {
            a = using.iter().find_map(|&k| synth_use(&comps[k].1, x));
        }
        let Some(a) = a else {
            return BinderOutcome::Skip(Some(fail(
                DiagnosticKind::NoRule,
                x,
                position,
                format!("cannot infer the session type cut at {x}"),
            )));
        };
        let Some((left_p, right_p)) = provider_split(x, prov, &rest_binders, comps) else {
            return BinderOutcome::Skip(None);
        };
        let lpos = prov.map(|k| comps[k].0.clone()).unwrap_or_else(|| position.to_vec());
        let build = || -> Result<(), Vec<Diagnostic>> {
            let (d_l, d_r) = split_zone(delta, &left_p, &right_p, position)?;
            let l = dill(gamma, &d_l, &left_p, x, &a, &lpos);
            let mut d_r2 = d_r;
            d_r2.insert(x.clone(), a.clone()).expect("the binder was freshened against the zones");
            let r = dill(gamma, &d_r2, &right_p, subject, ty, position);
            both_unit(l, r)
        };
        BinderOutcome::Done(build())
    }
}

fn zone_minus(a: &Zone, b: &Zone) -> Zone {
    let mut out = Zone::new();
    for (n, t) in a.iter() {
        if !b.contains(n) {
            out.insert(n.clone(), t.clone()).expect("subset of a well formed zone");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivation::testkit::{samples, zone};

    fn sig_of(j: &Judgment, mode: Mode) -> Signature {
        Signature::new("t", j.subject.clone(), j.ty.clone(), mode)
            .with_linear(j.contexts.linear.clone())
            .with_aux(j.contexts.auxiliary.clone())
            .with_mux(j.contexts.multiplexor.clone())
    }

    /// Kernel leaves may declare auxiliary channels they never use; the
    /// conservative elaborator refuses to reconstruct those trees.
    fn weakens_aux_at_a_leaf(d: &Derivation) -> bool {
        if let Derivation::OneR { aux, .. } = d {
            if !aux.is_empty() {
                return true;
            }
        }
        d.premises().iter().any(|s| weakens_aux_at_a_leaf(s))
    }

    fn dupser(i: usize) -> Process {
        let xi = Name::from(format!("x{i}").as_str());
        let xj = Name::from(format!("x{}", i + 1).as_str());
        Process::repl(
            xi,
            "y",
            Process::output(xj.clone(), "z", Process::output(xj, "w", Process::Nil)),
        )
    }

    fn dupser_sig_dsll(i: usize) -> Signature {
        Signature::new(format!("dupser{i}"), format!("x{i}").as_str(), Type::bang(Type::One), Mode::Dsll)
            .with_aux(zone(&[(&format!("x{}", i + 1), Type::One)]))
    }

    fn dupser_sig_dill(i: usize) -> Signature {
        Signature::new(format!("dupser{i}"), format!("x{i}").as_str(), Type::bang(Type::One), Mode::Dill)
            .with_linear(zone(&[(&format!("x{}", i + 1), Type::bang(Type::One))]))
    }

    #[test]
    fn nil_elaborates_to_a_unit_axiom() {
        let sig = Signature::new("d", "z", Type::One, Mode::Dsll);
        let out = elaborate(&Process::Nil, &sig).expect("the stopped process offers a unit");
        assert_eq!(out.derivation(), Some(&Derivation::one_r("z")));
    }

    #[test]
    fn dupser_is_rejected_in_dsll_with_the_occurrence_count() {
        let d = elaborate(&dupser(0), &dupser_sig_dsll(0)).unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::ReusedAuxiliary { count: 2 });
        assert_eq!(d[0].channel, Name::from("x1"));
    }

    #[test]
    fn banged_linear_doors_obey_the_occurrence_discipline() {
        // the same server against the banged-linear interface: the door is
        // auxiliary inside the box, so its two sends still break the rule
        let sig = Signature::new("dupser0", "x0", Type::bang(Type::One), Mode::Dsll)
            .with_linear(zone(&[("x1", Type::bang(Type::One))]));
        let errs = elaborate(&dupser(0), &sig).unwrap_err();
        assert_eq!(errs[0].kind, DiagnosticKind::ReusedAuxiliary { count: 2 });
        assert_eq!(errs[0].channel, Name::from("x1"));
    }

    #[test]
    fn dupser_checks_in_dill_reference_mode() {
        let out = elaborate(&dupser(0), &dupser_sig_dill(0)).expect("dill copies freely");
        let j = dupser_sig_dill(0).judgment().unwrap();
        assert_eq!(out, Elaboration::Reference(j));
    }

    #[test]
    fn dsll_rejections_are_stable_under_congruence() {
        let base = dupser(0);
        let variants = vec![
            Process::par(Process::Nil, base.clone()),
            Process::restrict("dead", base.clone()),
            Process::repl(
                "x0",
                "q",
                Process::output("x1", "a", Process::output("x1", "b", Process::Nil)),
            ),
        ];
        for v in variants {
            let d = elaborate(&v, &dupser_sig_dsll(0)).unwrap_err();
            assert_eq!(d[0].kind, DiagnosticKind::ReusedAuxiliary { count: 2 });
            assert_eq!(d[0].channel, Name::from("x1"));
        }
    }

    #[test]
    fn erased_kernel_output_elaborates_back() {
        for d in samples() {
            let j = check_derivation(&d).expect("samples are valid");
            let sig = sig_of(&j, Mode::Dsll);
            let got = elaborate(&erase(&d), &sig);
            if weakens_aux_at_a_leaf(&d) {
                let errs = got.expect_err("leaf auxiliary weakening is not reconstructed");
                assert!(matches!(errs[0].kind, DiagnosticKind::UnusedLinear));
            } else {
                let out = got.expect("erasures of checked derivations elaborate");
                assert_eq!(out.judgment(), j);
            }
        }
    }

    #[test]
    fn dill_accepts_every_dsll_sample() {
        for d in samples() {
            let j = check_derivation(&d).expect("samples are valid");
            let sig = sig_of(&j, Mode::Dill);
            let out = elaborate(&erase(&d), &sig).expect("dill covers the kernel corpus");
            assert_eq!(out, Elaboration::Reference(j));
        }
    }

    #[test]
    fn boxed_servers_keep_their_doors() {
        // the server body spends a banged linear door, so the cut boxes the
        // whole server and the client lifts the banged channel to spawn
        let p = Process::restrict(
            "x",
            Process::par(
                Process::repl("x", "w", Process::output("d", "z", Process::Nil)),
                Process::output("x", "v", Process::Nil),
            ),
        );
        let sig = Signature::new("boxed", "s", Type::One, Mode::Dsll)
            .with_linear(zone(&[("d", Type::bang(Type::One))]));
        let out = elaborate(&p, &sig).expect("the boxed reading types the door");
        let d = out.derivation().expect("dsll returns a kernel derivation");
        assert!(matches!(d, Derivation::Cut { .. }));
        assert_eq!(out.judgment(), sig.judgment().unwrap());
    }

    #[test]
    fn server_bodies_cannot_capture_linear_state() {
        let p = Process::restrict(
            "x",
            Process::par(
                Process::repl("x", "w", Process::output("d", "z", Process::Nil)),
                Process::output("x", "v", Process::Nil),
            ),
        );
        let sig = Signature::new("cap", "s", Type::One, Mode::Dsll)
            .with_linear(zone(&[("d", Type::lolli(Type::One, Type::One))]));
        let errs = elaborate(&p, &sig).unwrap_err();
        assert!(matches!(errs[0].kind, DiagnosticKind::ServerBodyContext));
        assert_eq!(errs[0].channel, Name::from("d"));
    }

    #[test]
    fn spawn_count_picks_the_cut_flavor() {
        let single = Process::restrict(
            "u",
            Process::par(
                Process::repl("u", "b", Process::Nil),
                Process::output("u", "z1", Process::Nil),
            ),
        );
        let double = Process::restrict(
            "u",
            Process::par(
                Process::repl("u", "b", Process::Nil),
                Process::output("u", "z1", Process::output("u", "z2", Process::Nil)),
            ),
        );
        let sig = Signature::new("spawn", "s", Type::One, Mode::Dsll);
        let one = elaborate(&single, &sig).unwrap();
        assert!(matches!(one.derivation().unwrap(), Derivation::CutBang { .. }));
        let two = elaborate(&double, &sig).unwrap();
        assert!(matches!(two.derivation().unwrap(), Derivation::CutSharp { .. }));
    }

    #[test]
    fn unused_non_unit_linear_channels_are_reported() {
        let sig = Signature::new("drop", "z", Type::One, Mode::Dsll)
            .with_linear(zone(&[("u", Type::bang(Type::One))]));
        let errs = elaborate(&Process::Nil, &sig).unwrap_err();
        assert_eq!(errs[0].kind, DiagnosticKind::UnusedLinear);
        assert_eq!(errs[0].channel, Name::from("u"));
    }

    #[test]
    fn subject_prefixes_must_match_the_given_type() {
        let sig = Signature::new("m", "x", Type::One, Mode::Dsll);
        let errs = elaborate(&Process::inl("x", Process::Nil), &sig).unwrap_err();
        assert_eq!(errs[0].kind, DiagnosticKind::PrefixMismatch);
    }

    #[test]
    fn naked_parallel_components_have_no_rule() {
        let sig = Signature::new("par", "z", Type::One, Mode::Dsll)
            .with_linear(zone(&[
                ("a", Type::with(Type::One, Type::One)),
                ("b", Type::with(Type::One, Type::One)),
            ]));
        let p = Process::par(Process::inl("a", Process::Nil), Process::inl("b", Process::Nil));
        let errs = elaborate(&p, &sig).unwrap_err();
        assert_eq!(errs[0].kind, DiagnosticKind::NoRule);
    }

    #[test]
    fn case_branches_collapse_to_one_auxiliary_use() {
        let p = Process::case(
            "w",
            Process::output("a", "z", Process::Nil),
            Process::output("a", "z", Process::Nil),
        );
        let sig = Signature::new("branchy", "s", Type::One, Mode::Dsll)
            .with_linear(zone(&[("w", Type::plus(Type::One, Type::One))]))
            .with_aux(zone(&[("a", Type::One)]));
        let out = elaborate(&p, &sig).expect("one use per branch satisfies the discipline");
        assert_eq!(out.judgment(), sig.judgment().unwrap());
    }

    #[test]
    fn mulser_chain_composes_in_dill() {
        let parts: Vec<(Process, Signature)> =
            (0..3).rev().map(|i| (dupser(i), dupser_sig_dill(i))).collect();
        let cuts = vec![Name::from("x2"), Name::from("x1")];
        let out = elaborate_composition(&parts, &cuts).expect("the chain cuts cleanly");
        let j = out.judgment();
        assert_eq!(j.subject, Name::from("x0"));
        assert_eq!(j.ty, Type::bang(Type::One));
        assert_eq!(j.contexts.linear, zone(&[("x3", Type::bang(Type::One))]));
        assert!(j.contexts.auxiliary.is_empty() && j.contexts.multiplexor.is_empty());
    }

    #[test]
    fn mismatched_cut_types_are_unsplittable() {
        let giver = (Process::Nil, Signature::new("g", "c", Type::One, Mode::Dsll));
        let user_sig = Signature::new("u", "z", Type::One, Mode::Dsll)
            .with_linear(zone(&[("c", Type::bang(Type::One))]));
        let user = (Process::output("c", "v", Process::Nil), user_sig);
        let errs = elaborate_composition(&[giver, user], &[Name::from("c")]).unwrap_err();
        assert_eq!(errs[0].kind, DiagnosticKind::Unsplittable);
        assert_eq!(errs[0].channel, Name::from("c"));
    }

    #[test]
    fn two_party_exchange_composes_over_the_service_channel() {
        // a client that walks one branch of a service and a service
        // offering both, cut over the shared channel
        let ty_y = Type::with(
            Type::lolli(Type::One, Type::lolli(Type::One, Type::plus(Type::One, Type::One))),
            Type::One,
        );
        let ty_x = Type::lolli(
            Type::One,
            Type::lolli(Type::One, Type::plus(Type::tensor(Type::One, Type::One), Type::One)),
        );
        let client = Process::input(
            "x",
            "nm1",
            Process::input(
                "x",
                "cd1",
                Process::inl(
                    "y",
                    Process::output(
                        "y",
                        "nm2",
                        Process::output(
                            "y",
                            "cd2",
                            Process::case(
                                "y",
                                Process::inl("x", Process::output("x", "mp", Process::Nil)),
                                Process::inr("x", Process::Nil),
                            ),
                        ),
                    ),
                ),
            ),
        );
        let service = Process::case(
            "y",
            Process::input("y", "nm", Process::input("y", "cd", Process::inl("y", Process::Nil))),
            Process::Nil,
        );
        let client_sig = Signature::new("client", "x", ty_x.clone(), Mode::Dsll)
            .with_linear(zone(&[("y", ty_y.clone())]));
        let service_sig = Signature::new("service", "y", ty_y, Mode::Dsll);
        let out = elaborate_composition(
            &[(client, client_sig), (service, service_sig)],
            &[Name::from("y")],
        )
        .expect("the protocol composes");
        let j = out.judgment();
        assert_eq!(j.subject, Name::from("x"));
        assert_eq!(j.ty, ty_x);
        assert!(j.contexts.linear.is_empty());
    }

    #[test]
    fn composed_processes_match_their_composition() {
        let parts = vec![Process::Nil, Process::output("c", "v", Process::Nil)];
        let p = compose_process(&parts, &[Name::from("c")]);
        assert_eq!(
            p,
            Process::restrict(
                "c",
                Process::par(Process::Nil, Process::output("c", "v", Process::Nil))
            )
        );
    }

    #[test]
    fn diagnostics_render_their_kind_channel_and_path() {
        let d = Diagnostic {
            kind: DiagnosticKind::ReusedAuxiliary { count: 2 },
            channel: Name::from("x1"),
            position: vec![0, 1],
            explanation: "auxiliary channel x1 occurs 2 times".into(),
        };
        assert_eq!(
            d.to_string(),
            "reused-auxiliary on x1 at 0.1: auxiliary channel x1 occurs 2 times"
        );
    }
}
