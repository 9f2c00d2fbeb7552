//! Proof terms for the typing rules: one node form per rule.
//!
//! A [`Derivation`] carries exactly the names and annotations its conclusion
//! does not determine, so [`check_derivation`] is a pure bottom-up synthesis
//! pass with no inference. [`erase`] reads the underlying process off the
//! tree; [`weaken`] grows the (additive) multiplexor zone and [`lift`]
//! re-routes every auxiliary-zone use through the multiplexor zone, both
//! leaving the erasure untouched.

use std::fmt;

use thiserror::Error;

use crate::calculus::{Name, Process};
use crate::types::{type_equal, ContextTriple, Judgment, Type, Zone};

/// One node per typing rule.
///
/// `sub`/`left`/`right` are premises. Annotated types (`type_a`, the inactive
/// branch of a selection, the zones a leaf declares) are the data the
/// conclusion cannot reconstruct. Right rules carry their `subject`; left
/// rules carry the principal channel `chan` they consume.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Derivation {
    /// Discard a unit channel: premise zones plus `chan : 1` linearly.
    OneL { chan: Name, sub: Box<Derivation> },
    /// `0 :: subject : 1` under any declared auxiliary and multiplexor zones.
    OneR { subject: Name, aux: Zone, mux: Zone },
    /// Receive `bound : A` over `chan : A * B`, leaving `chan : B`.
    TensorL { chan: Name, bound: Name, sub: Box<Derivation> },
    /// Send a fresh `bound` over `subject`: `left` provides `bound : A`,
    /// `right` continues `subject : B`; auxiliary and linear zones split.
    TensorR { subject: Name, bound: Name, left: Box<Derivation>, right: Box<Derivation> },
    /// Use `chan : A -o B`: `left` provides the argument `bound : A`,
    /// `right` consumes `chan : B`.
    LolliL { chan: Name, bound: Name, left: Box<Derivation>, right: Box<Derivation> },
    /// Receive the argument `bound : A`, continuing `subject : B`.
    LolliR { subject: Name, bound: Name, sub: Box<Derivation> },
    /// Branch on `chan : A + B`; both premises share every zone and
    /// conclude the same judgment.
    PlusL { chan: Name, left: Box<Derivation>, right: Box<Derivation> },
    /// Choose left: `subject : A` becomes `subject : A + rightType`.
    PlusR1 { subject: Name, right_type: Type, sub: Box<Derivation> },
    /// Choose right: `subject : B` becomes `subject : leftType + B`.
    PlusR2 { subject: Name, left_type: Type, sub: Box<Derivation> },
    /// Select left of `chan : A & rightType`, consuming `chan : A`.
    WithL1 { chan: Name, right_type: Type, sub: Box<Derivation> },
    /// Select right of `chan : leftType & B`, consuming `chan : B`.
    WithL2 { chan: Name, left_type: Type, sub: Box<Derivation> },
    /// Offer both: premises share every zone and type `subject` at `A`, `B`.
    WithR { subject: Name, left: Box<Derivation>, right: Box<Derivation> },
    /// Spend one use of a multiplexed server `chan : A`: the premise holds
    /// `chan : A` in the multiplexor zone and one linear `bound : A`.
    BSharp { chan: Name, bound: Name, sub: Box<Derivation> },
    /// Spend one use of an auxiliary server: `chan` is fresh and appears
    /// `type_a`-typed in the auxiliary zone of the conclusion only.
    BBang { chan: Name, bound: Name, type_a: Type, sub: Box<Derivation> },
    /// Move `chan : A` from the multiplexor zone to linear `chan : !A`.
    BangLSharp { chan: Name, sub: Box<Derivation> },
    /// Move `chan : A` from the auxiliary zone to linear `chan : !A`.
    BangLBang { chan: Name, sub: Box<Derivation> },
    /// Package a process as a server. The premise must use empty multiplexor
    /// and linear zones; its auxiliary zone (the server's doors) moves into
    /// the conclusion's linear zone banged, ordered by `aux_chans`. The
    /// conclusion may declare any multiplexor zone.
    BangR { subject: Name, bound: Name, aux_chans: Vec<Name>, mux: Zone, sub: Box<Derivation> },
    /// Plain composition over a linear channel; auxiliary and linear zones
    /// split, the multiplexor zone is shared.
    Cut { chan: Name, type_a: Type, left: Box<Derivation>, right: Box<Derivation> },
    /// Compose a server used through the auxiliary zone. The left premise
    /// types the body with empty multiplexor and linear zones.
    CutBang { chan: Name, type_a: Type, left: Box<Derivation>, right: Box<Derivation> },
    /// Compose a server used through the multiplexor zone; the left
    /// premise's doors join the conclusion's multiplexor zone.
    CutSharp { chan: Name, type_a: Type, left: Box<Derivation>, right: Box<Derivation> },
}

/// Which side condition failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckReason {
    /// Two zones that must coincide differ.
    ZoneMismatch,
    /// A rule's principal channel is absent from the zone it must inhabit.
    MissingChannel,
    /// A channel is present but at the wrong type.
    TypeMismatch,
    /// A premise required to use empty zones does not.
    NonemptyContextRequiredEmpty,
    /// A name is declared or joined where it is already bound.
    DuplicateChannel,
    /// A premise concludes with a different subject than the rule demands.
    SubjectMismatch,
}

impl fmt::Display for CheckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckReason::ZoneMismatch => "zone-mismatch",
            CheckReason::MissingChannel => "missing-channel",
            CheckReason::TypeMismatch => "type-mismatch",
            CheckReason::NonemptyContextRequiredEmpty => "nonempty-context-required-empty",
            CheckReason::DuplicateChannel => "duplicate-channel",
            CheckReason::SubjectMismatch => "subject-mismatch",
        })
    }
}

/// First failing side condition, located by the premise path from the root
/// (0 = only/left premise, 1 = right premise).
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{rule}: {reason} at {location:?}")]
pub struct CheckError {
    pub rule: &'static str,
    pub reason: CheckReason,
    pub location: Vec<usize>,
}

/// Synthesizes the unique conclusion judgment, or the first failure.
pub fn check_derivation(d: &Derivation) -> Result<Judgment, CheckError> {
    d.synth(&mut Vec::new())
}

/// The process written in the rule's conclusion.
pub fn erase(d: &Derivation) -> Process {
    match d {
        Derivation::OneR { .. } => Process::Nil,
        Derivation::OneL { sub, .. }
        | Derivation::BangLSharp { sub, .. }
        | Derivation::BangLBang { sub, .. } => erase(sub),
        Derivation::TensorL { chan, bound, sub } => Process::input(chan.clone(), bound.clone(), erase(sub)),
        Derivation::LolliR { subject, bound, sub } => Process::input(subject.clone(), bound.clone(), erase(sub)),
        Derivation::TensorR { subject, bound, left, right } => {
            Process::output(subject.clone(), bound.clone(), Process::par(erase(left), erase(right)))
        }
        Derivation::LolliL { chan, bound, left, right } => {
            Process::output(chan.clone(), bound.clone(), Process::par(erase(left), erase(right)))
        }
        Derivation::PlusR1 { subject, sub, .. } => Process::inl(subject.clone(), erase(sub)),
        Derivation::PlusR2 { subject, sub, .. } => Process::inr(subject.clone(), erase(sub)),
        Derivation::WithL1 { chan, sub, .. } => Process::inl(chan.clone(), erase(sub)),
        Derivation::WithL2 { chan, sub, .. } => Process::inr(chan.clone(), erase(sub)),
        Derivation::WithR { subject, left, right } => Process::case(subject.clone(), erase(left), erase(right)),
        Derivation::PlusL { chan, left, right } => Process::case(chan.clone(), erase(left), erase(right)),
        Derivation::BSharp { chan, bound, sub } => Process::output(chan.clone(), bound.clone(), erase(sub)),
        Derivation::BBang { chan, bound, sub, .. } => Process::output(chan.clone(), bound.clone(), erase(sub)),
        Derivation::BangR { subject, bound, sub, .. } => Process::repl(subject.clone(), bound.clone(), erase(sub)),
        Derivation::Cut { chan, left, right, .. } => {
            Process::restrict(chan.clone(), Process::par(erase(left), erase(right)))
        }
        Derivation::CutBang { chan, left, right, .. } | Derivation::CutSharp { chan, left, right, .. } => {
            let server = Process::repl(chan.clone(), left.subject().clone(), erase(left));
            Process::restrict(chan.clone(), Process::par(server, erase(right)))
        }
    }
}

/// True iff no cut node occurs.
pub fn is_normal(d: &Derivation) -> bool {
    match d {
        Derivation::Cut { .. } | Derivation::CutBang { .. } | Derivation::CutSharp { .. } => false,
        _ => d.premises().iter().all(|p| is_normal(p)),
    }
}

/// Extends the multiplexor zone by `extra` everywhere, keeping the erasure.
///
/// `extra`'s names must be fresh for the whole tree (zones and binders);
/// the rebuilt derivation is re-checked, so any clash surfaces as an error.
pub fn weaken(d: &Derivation, extra: &Zone) -> Result<Derivation, CheckError> {
    let out = d.thread_mux(extra, &mut Vec::new())?;
    check_derivation(&out)?;
    Ok(out)
}

/// Re-derives the judgment with an empty auxiliary zone: `Γ; Δ; Θ ⊢ T`
/// becomes `∅; Γ ∪ Δ; Θ ⊢ T` with the same erasure. Auxiliary-flavoured
/// nodes turn into their multiplexor forms (`BBang` to `BSharp`, `BangLBang`
/// to `BangLSharp`, `CutBang` to `CutSharp`); server bodies are already
/// scoped and stay as they are.
///
/// Succeeds on any checkable tree whose binders avoid the zone names of
/// sibling premises (true of everything the elaborator produces).
pub fn lift(d: &Derivation) -> Result<Derivation, CheckError> {
    check_derivation(d)?;
    d.lift_inner()
}

impl Derivation {
    pub fn one_l(chan: impl Into<Name>, sub: Derivation) -> Derivation {
        Derivation::OneL { chan: chan.into(), sub: Box::new(sub) }
    }

    pub fn one_r(subject: impl Into<Name>) -> Derivation {
        Derivation::one_r_in(subject, Zone::new(), Zone::new())
    }

    pub fn one_r_in(subject: impl Into<Name>, aux: Zone, mux: Zone) -> Derivation {
        Derivation::OneR { subject: subject.into(), aux, mux }
    }

    pub fn tensor_l(chan: impl Into<Name>, bound: impl Into<Name>, sub: Derivation) -> Derivation {
        Derivation::TensorL { chan: chan.into(), bound: bound.into(), sub: Box::new(sub) }
    }

    pub fn tensor_r(
        subject: impl Into<Name>,
        bound: impl Into<Name>,
        left: Derivation,
        right: Derivation,
    ) -> Derivation {
        Derivation::TensorR {
            subject: subject.into(),
            bound: bound.into(),
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn lolli_l(
        chan: impl Into<Name>,
        bound: impl Into<Name>,
        left: Derivation,
        right: Derivation,
    ) -> Derivation {
        Derivation::LolliL {
            chan: chan.into(),
            bound: bound.into(),
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn lolli_r(subject: impl Into<Name>, bound: impl Into<Name>, sub: Derivation) -> Derivation {
        Derivation::LolliR { subject: subject.into(), bound: bound.into(), sub: Box::new(sub) }
    }

    pub fn plus_l(chan: impl Into<Name>, left: Derivation, right: Derivation) -> Derivation {
        Derivation::PlusL { chan: chan.into(), left: Box::new(left), right: Box::new(right) }
    }

    pub fn plus_r1(subject: impl Into<Name>, right_type: Type, sub: Derivation) -> Derivation {
        Derivation::PlusR1 { subject: subject.into(), right_type, sub: Box::new(sub) }
    }

    pub fn plus_r2(subject: impl Into<Name>, left_type: Type, sub: Derivation) -> Derivation {
        Derivation::PlusR2 { subject: subject.into(), left_type, sub: Box::new(sub) }
    }

    pub fn with_l1(chan: impl Into<Name>, right_type: Type, sub: Derivation) -> Derivation {
        Derivation::WithL1 { chan: chan.into(), right_type, sub: Box::new(sub) }
    }

    pub fn with_l2(chan: impl Into<Name>, left_type: Type, sub: Derivation) -> Derivation {
        Derivation::WithL2 { chan: chan.into(), left_type, sub: Box::new(sub) }
    }

    pub fn with_r(subject: impl Into<Name>, left: Derivation, right: Derivation) -> Derivation {
        Derivation::WithR { subject: subject.into(), left: Box::new(left), right: Box::new(right) }
    }

    pub fn b_sharp(chan: impl Into<Name>, bound: impl Into<Name>, sub: Derivation) -> Derivation {
        Derivation::BSharp { chan: chan.into(), bound: bound.into(), sub: Box::new(sub) }
    }

    pub fn b_bang(chan: impl Into<Name>, bound: impl Into<Name>, type_a: Type, sub: Derivation) -> Derivation {
        Derivation::BBang { chan: chan.into(), bound: bound.into(), type_a, sub: Box::new(sub) }
    }

    pub fn bang_l_sharp(chan: impl Into<Name>, sub: Derivation) -> Derivation {
        Derivation::BangLSharp { chan: chan.into(), sub: Box::new(sub) }
    }

    pub fn bang_l_bang(chan: impl Into<Name>, sub: Derivation) -> Derivation {
        Derivation::BangLBang { chan: chan.into(), sub: Box::new(sub) }
    }

    pub fn bang_r(
        subject: impl Into<Name>,
        bound: impl Into<Name>,
        aux_chans: Vec<Name>,
        sub: Derivation,
    ) -> Derivation {
        Derivation::bang_r_in(subject, bound, aux_chans, Zone::new(), sub)
    }

    pub fn bang_r_in(
        subject: impl Into<Name>,
        bound: impl Into<Name>,
        aux_chans: Vec<Name>,
        mux: Zone,
        sub: Derivation,
    ) -> Derivation {
        Derivation::BangR {
            subject: subject.into(),
            bound: bound.into(),
            aux_chans,
            mux,
            sub: Box::new(sub),
        }
    }

    pub fn cut(chan: impl Into<Name>, type_a: Type, left: Derivation, right: Derivation) -> Derivation {
        Derivation::Cut { chan: chan.into(), type_a, left: Box::new(left), right: Box::new(right) }
    }

    pub fn cut_bang(chan: impl Into<Name>, type_a: Type, left: Derivation, right: Derivation) -> Derivation {
        Derivation::CutBang { chan: chan.into(), type_a, left: Box::new(left), right: Box::new(right) }
    }

    pub fn cut_sharp(chan: impl Into<Name>, type_a: Type, left: Derivation, right: Derivation) -> Derivation {
        Derivation::CutSharp { chan: chan.into(), type_a, left: Box::new(left), right: Box::new(right) }
    }

    /// The channel the conclusion types, read off syntactically. For
    /// two-premise left rules this is the continuation premise's subject;
    /// checking enforces agreement where two premises share it.
    pub fn subject(&self) -> &Name {
        match self {
            Derivation::OneR { subject, .. }
            | Derivation::TensorR { subject, .. }
            | Derivation::LolliR { subject, .. }
            | Derivation::PlusR1 { subject, .. }
            | Derivation::PlusR2 { subject, .. }
            | Derivation::WithR { subject, .. }
            | Derivation::BangR { subject, .. } => subject,
            Derivation::OneL { sub, .. }
            | Derivation::TensorL { sub, .. }
            | Derivation::WithL1 { sub, .. }
            | Derivation::WithL2 { sub, .. }
            | Derivation::BSharp { sub, .. }
            | Derivation::BBang { sub, .. }
            | Derivation::BangLSharp { sub, .. }
            | Derivation::BangLBang { sub, .. } => sub.subject(),
            Derivation::PlusL { left, .. } => left.subject(),
            Derivation::LolliL { right, .. }
            | Derivation::Cut { right, .. }
            | Derivation::CutBang { right, .. }
            | Derivation::CutSharp { right, .. } => right.subject(),
        }
    }

    pub(crate) fn premises(&self) -> Vec<&Derivation> {
        match self {
            Derivation::OneR { .. } => Vec::new(),
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
            | Derivation::BangLBang { sub, .. }
            | Derivation::BangR { sub, .. } => vec![sub],
            Derivation::TensorR { left, right, .. }
            | Derivation::LolliL { left, right, .. }
            | Derivation::PlusL { left, right, .. }
            | Derivation::WithR { left, right, .. }
            | Derivation::Cut { left, right, .. }
            | Derivation::CutBang { left, right, .. }
            | Derivation::CutSharp { left, right, .. } => vec![left, right],
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Derivation::OneL { .. } => "oneL",
            Derivation::OneR { .. } => "oneR",
            Derivation::TensorL { .. } => "tensorL",
            Derivation::TensorR { .. } => "tensorR",
            Derivation::LolliL { .. } => "lolliL",
            Derivation::LolliR { .. } => "lolliR",
            Derivation::PlusL { .. } => "plusL",
            Derivation::PlusR1 { .. } => "plusR1",
            Derivation::PlusR2 { .. } => "plusR2",
            Derivation::WithL1 { .. } => "withL1",
            Derivation::WithL2 { .. } => "withL2",
            Derivation::WithR { .. } => "withR",
            Derivation::BSharp { .. } => "bSharp",
            Derivation::BBang { .. } => "bBang",
            Derivation::BangLSharp { .. } => "bangLSharp",
            Derivation::BangLBang { .. } => "bangLBang",
            Derivation::BangR { .. } => "bangR",
            Derivation::Cut { .. } => "cut",
            Derivation::CutBang { .. } => "cutBang",
            Derivation::CutSharp { .. } => "cutSharp",
        }
    }

    fn err(&self, reason: CheckReason, path: &[usize]) -> CheckError {
        CheckError { rule: self.tag(), reason, location: path.to_vec() }
    }

    fn dup(&self, path: &[usize]) -> CheckError {
        self.err(CheckReason::DuplicateChannel, path)
    }

    fn conclude(
        &self,
        path: &[usize],
        aux: Zone,
        mux: Zone,
        linear: Zone,
        subject: Name,
        ty: Type,
    ) -> Result<Judgment, CheckError> {
        let contexts = ContextTriple::new(aux, mux, linear).map_err(|_| self.dup(path))?;
        Judgment::new(contexts, subject, ty).map_err(|_| self.dup(path))
    }

    fn synth_at(&self, path: &mut Vec<usize>, idx: usize) -> Result<Judgment, CheckError> {
        path.push(idx);
        let out = self.synth(path);
        path.pop();
        out
    }

    fn synth(&self, path: &mut Vec<usize>) -> Result<Judgment, CheckError> {
        match self {
            Derivation::OneL { chan, sub } => {
                let j = sub.synth_at(path, 0)?;
                let mut linear = j.contexts.linear;
                linear.insert(chan.clone(), Type::One).map_err(|_| self.dup(path))?;
                self.conclude(path, j.contexts.auxiliary, j.contexts.multiplexor, linear, j.subject, j.ty)
            }
            Derivation::OneR { subject, aux, mux } => {
                self.conclude(path, aux.clone(), mux.clone(), Zone::new(), subject.clone(), Type::One)
            }
            Derivation::TensorL { chan, bound, sub } => {
                if bound == chan {
                    return Err(self.dup(path));
                }
                let j = sub.synth_at(path, 0)?;
                let mut linear = j.contexts.linear;
                let a = linear.remove(bound).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                let b = linear.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                linear.insert(chan.clone(), Type::tensor(a, b)).map_err(|_| self.dup(path))?;
                self.conclude(path, j.contexts.auxiliary, j.contexts.multiplexor, linear, j.subject, j.ty)
            }
            Derivation::TensorR { subject, bound, left, right } => {
                if bound == subject {
                    return Err(self.dup(path));
                }
                let jl = left.synth_at(path, 0)?;
                let jr = right.synth_at(path, 1)?;
                if jl.subject != *bound || jr.subject != *subject {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                if jl.contexts.multiplexor != jr.contexts.multiplexor {
                    return Err(self.err(CheckReason::ZoneMismatch, path));
                }
                let aux = jl.contexts.auxiliary.disjoint_union(&jr.contexts.auxiliary).map_err(|_| self.dup(path))?;
                let linear = jl.contexts.linear.disjoint_union(&jr.contexts.linear).map_err(|_| self.dup(path))?;
                let ty = Type::tensor(jl.ty, jr.ty);
                let j = self.conclude(path, aux, jr.contexts.multiplexor, linear, subject.clone(), ty)?;
                if j.contexts.binds(bound) {
                    return Err(self.dup(path));
                }
                Ok(j)
            }
            Derivation::LolliL { chan, bound, left, right } => {
                if bound == chan {
                    return Err(self.dup(path));
                }
                let jl = left.synth_at(path, 0)?;
                let jr = right.synth_at(path, 1)?;
                if jl.subject != *bound {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                if jl.contexts.multiplexor != jr.contexts.multiplexor {
                    return Err(self.err(CheckReason::ZoneMismatch, path));
                }
                let mut right_linear = jr.contexts.linear;
                let b = right_linear.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                let aux = jl.contexts.auxiliary.disjoint_union(&jr.contexts.auxiliary).map_err(|_| self.dup(path))?;
                let mut linear = jl.contexts.linear.disjoint_union(&right_linear).map_err(|_| self.dup(path))?;
                linear.insert(chan.clone(), Type::lolli(jl.ty, b)).map_err(|_| self.dup(path))?;
                let j = self.conclude(path, aux, jr.contexts.multiplexor, linear, jr.subject, jr.ty)?;
                if j.contexts.binds(bound) || j.subject == *bound {
                    return Err(self.dup(path));
                }
                Ok(j)
            }
            Derivation::LolliR { subject, bound, sub } => {
                if bound == subject {
                    return Err(self.dup(path));
                }
                let j = sub.synth_at(path, 0)?;
                if j.subject != *subject {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                let mut linear = j.contexts.linear;
                let a = linear.remove(bound).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                let ty = Type::lolli(a, j.ty);
                self.conclude(path, j.contexts.auxiliary, j.contexts.multiplexor, linear, subject.clone(), ty)
            }
            Derivation::PlusL { chan, left, right } => {
                let jl = left.synth_at(path, 0)?;
                let jr = right.synth_at(path, 1)?;
                let mut left_linear = jl.contexts.linear;
                let a = left_linear.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                let mut right_linear = jr.contexts.linear;
                let b = right_linear.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                if jl.subject != jr.subject {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                if !type_equal(&jl.ty, &jr.ty) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                if jl.contexts.auxiliary != jr.contexts.auxiliary
                    || jl.contexts.multiplexor != jr.contexts.multiplexor
                    || left_linear != right_linear
                {
                    return Err(self.err(CheckReason::ZoneMismatch, path));
                }
                let mut linear = left_linear;
                linear.insert(chan.clone(), Type::plus(a, b)).map_err(|_| self.dup(path))?;
                self.conclude(path, jl.contexts.auxiliary, jl.contexts.multiplexor, linear, jl.subject, jl.ty)
            }
            Derivation::PlusR1 { subject, right_type, sub } => {
                let j = sub.synth_at(path, 0)?;
                if j.subject != *subject {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                let ty = Type::plus(j.ty, right_type.clone());
                self.conclude(path, j.contexts.auxiliary, j.contexts.multiplexor, j.contexts.linear, subject.clone(), ty)
            }
            Derivation::PlusR2 { subject, left_type, sub } => {
                let j = sub.synth_at(path, 0)?;
                if j.subject != *subject {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                let ty = Type::plus(left_type.clone(), j.ty);
                self.conclude(path, j.contexts.auxiliary, j.contexts.multiplexor, j.contexts.linear, subject.clone(), ty)
            }
            Derivation::WithL1 { chan, right_type, sub } => {
                let j = sub.synth_at(path, 0)?;
                let mut linear = j.contexts.linear;
                let a = linear.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                linear.insert(chan.clone(), Type::with(a, right_type.clone())).map_err(|_| self.dup(path))?;
                self.conclude(path, j.contexts.auxiliary, j.contexts.multiplexor, linear, j.subject, j.ty)
            }
            Derivation::WithL2 { chan, left_type, sub } => {
                let j = sub.synth_at(path, 0)?;
                let mut linear = j.contexts.linear;
                let b = linear.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                linear.insert(chan.clone(), Type::with(left_type.clone(), b)).map_err(|_| self.dup(path))?;
                self.conclude(path, j.contexts.auxiliary, j.contexts.multiplexor, linear, j.subject, j.ty)
            }
            Derivation::WithR { subject, left, right } => {
                let jl = left.synth_at(path, 0)?;
                let jr = right.synth_at(path, 1)?;
                if jl.subject != *subject || jr.subject != *subject {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                if jl.contexts != jr.contexts {
                    return Err(self.err(CheckReason::ZoneMismatch, path));
                }
                let ty = Type::with(jl.ty, jr.ty);
                self.conclude(path, jl.contexts.auxiliary, jl.contexts.multiplexor, jl.contexts.linear, subject.clone(), ty)
            }
            Derivation::BSharp { chan, bound, sub } => {
                if bound == chan {
                    return Err(self.dup(path));
                }
                let j = sub.synth_at(path, 0)?;
                let shared = j
                    .contexts
                    .multiplexor
                    .get(chan)
                    .ok_or_else(|| self.err(CheckReason::MissingChannel, path))?
                    .clone();
                let mut linear = j.contexts.linear;
                let used = linear.remove(bound).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                if !type_equal(&shared, &used) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                self.conclude(path, j.contexts.auxiliary, j.contexts.multiplexor, linear, j.subject, j.ty)
            }
            Derivation::BBang { chan, bound, type_a, sub } => {
                if bound == chan {
                    return Err(self.dup(path));
                }
                let j = sub.synth_at(path, 0)?;
                let mut linear = j.contexts.linear;
                let used = linear.remove(bound).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                if !type_equal(type_a, &used) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                let mut aux = j.contexts.auxiliary;
                aux.insert(chan.clone(), type_a.clone()).map_err(|_| self.dup(path))?;
                self.conclude(path, aux, j.contexts.multiplexor, linear, j.subject, j.ty)
            }
            Derivation::BangLSharp { chan, sub } => {
                let j = sub.synth_at(path, 0)?;
                let mut mux = j.contexts.multiplexor;
                let a = mux.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                let mut linear = j.contexts.linear;
                linear.insert(chan.clone(), Type::bang(a)).map_err(|_| self.dup(path))?;
                self.conclude(path, j.contexts.auxiliary, mux, linear, j.subject, j.ty)
            }
            Derivation::BangLBang { chan, sub } => {
                let j = sub.synth_at(path, 0)?;
                let mut aux = j.contexts.auxiliary;
                let a = aux.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                let mut linear = j.contexts.linear;
                linear.insert(chan.clone(), Type::bang(a)).map_err(|_| self.dup(path))?;
                self.conclude(path, aux, j.contexts.multiplexor, linear, j.subject, j.ty)
            }
            Derivation::BangR { subject, bound, aux_chans, mux, sub } => {
                if bound == subject {
                    return Err(self.dup(path));
                }
                let j = sub.synth_at(path, 0)?;
                if !j.contexts.multiplexor.is_empty() || !j.contexts.linear.is_empty() {
                    return Err(self.err(CheckReason::NonemptyContextRequiredEmpty, path));
                }
                if j.subject != *bound {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                let doors = &j.contexts.auxiliary;
                if aux_chans.len() != doors.len() {
                    return Err(self.err(CheckReason::ZoneMismatch, path));
                }
                let mut linear = Zone::new();
                for door in aux_chans {
                    let a = doors.get(door).ok_or_else(|| self.err(CheckReason::ZoneMismatch, path))?;
                    linear.insert(door.clone(), Type::bang(a.clone())).map_err(|_| self.dup(path))?;
                }
                if mux.contains(bound) {
                    return Err(self.dup(path));
                }
                self.conclude(path, Zone::new(), mux.clone(), linear, subject.clone(), Type::bang(j.ty))
            }
            Derivation::Cut { chan, type_a, left, right } => {
                let jl = left.synth_at(path, 0)?;
                let jr = right.synth_at(path, 1)?;
                if jl.subject != *chan {
                    return Err(self.err(CheckReason::SubjectMismatch, path));
                }
                if !type_equal(&jl.ty, type_a) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                let mut right_linear = jr.contexts.linear;
                let used = right_linear.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                if !type_equal(&used, type_a) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                if jl.contexts.multiplexor != jr.contexts.multiplexor {
                    return Err(self.err(CheckReason::ZoneMismatch, path));
                }
                let aux = jl.contexts.auxiliary.disjoint_union(&jr.contexts.auxiliary).map_err(|_| self.dup(path))?;
                let linear = jl.contexts.linear.disjoint_union(&right_linear).map_err(|_| self.dup(path))?;
                self.conclude(path, aux, jr.contexts.multiplexor, linear, jr.subject, jr.ty)
            }
            Derivation::CutBang { chan, type_a, left, right } => {
                let jl = left.synth_at(path, 0)?;
                let jr = right.synth_at(path, 1)?;
                if !jl.contexts.multiplexor.is_empty() || !jl.contexts.linear.is_empty() {
                    return Err(self.err(CheckReason::NonemptyContextRequiredEmpty, path));
                }
                if !type_equal(&jl.ty, type_a) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                if jl.subject == *chan || jl.contexts.binds(chan) {
                    return Err(self.dup(path));
                }
                let mut right_aux = jr.contexts.auxiliary;
                let used = right_aux.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                if !type_equal(&used, type_a) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                let aux = jl.contexts.auxiliary.disjoint_union(&right_aux).map_err(|_| self.dup(path))?;
                self.conclude(path, aux, jr.contexts.multiplexor, jr.contexts.linear, jr.subject, jr.ty)
            }
            Derivation::CutSharp { chan, type_a, left, right } => {
                let jl = left.synth_at(path, 0)?;
                let jr = right.synth_at(path, 1)?;
                if !jl.contexts.multiplexor.is_empty() || !jl.contexts.linear.is_empty() {
                    return Err(self.err(CheckReason::NonemptyContextRequiredEmpty, path));
                }
                if !type_equal(&jl.ty, type_a) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                if jl.subject == *chan || jl.contexts.binds(chan) {
                    return Err(self.dup(path));
                }
                let mut right_mux = jr.contexts.multiplexor;
                let used = right_mux.remove(chan).ok_or_else(|| self.err(CheckReason::MissingChannel, path))?;
                if !type_equal(&used, type_a) {
                    return Err(self.err(CheckReason::TypeMismatch, path));
                }
                // The doors may multiplex channels the continuation already
                // shares, so this union tolerates agreeing repeats.
                let mux = jl
                    .contexts
                    .auxiliary
                    .merge_agreeing(&right_mux)
                    .map_err(|_| self.err(CheckReason::TypeMismatch, path))?;
                self.conclude(path, jr.contexts.auxiliary, mux, jr.contexts.linear, jr.subject, jr.ty)
            }
        }
    }

    fn thread_at(&self, extra: &Zone, path: &mut Vec<usize>, idx: usize) -> Result<Box<Derivation>, CheckError> {
        path.push(idx);
        let out = self.thread_mux(extra, path);
        path.pop();
        out.map(Box::new)
    }

    fn thread_mux(&self, extra: &Zone, path: &mut Vec<usize>) -> Result<Derivation, CheckError> {
        Ok(match self {
            // The two leaves of the additive discipline: the declared zone
            // grows, premises requiring empty zones stay untouched.
            Derivation::OneR { subject, aux, mux } => Derivation::OneR {
                subject: subject.clone(),
                aux: aux.clone(),
                mux: mux.disjoint_union(extra).map_err(|_| self.dup(path))?,
            },
            Derivation::BangR { subject, bound, aux_chans, mux, sub } => Derivation::BangR {
                subject: subject.clone(),
                bound: bound.clone(),
                aux_chans: aux_chans.clone(),
                mux: mux.disjoint_union(extra).map_err(|_| self.dup(path))?,
                sub: sub.clone(),
            },
            Derivation::CutBang { chan, type_a, left, right } => Derivation::CutBang {
                chan: chan.clone(),
                type_a: type_a.clone(),
                left: left.clone(),
                right: right.thread_at(extra, path, 1)?,
            },
            Derivation::CutSharp { chan, type_a, left, right } => Derivation::CutSharp {
                chan: chan.clone(),
                type_a: type_a.clone(),
                left: left.clone(),
                right: right.thread_at(extra, path, 1)?,
            },
            Derivation::OneL { chan, sub } => {
                Derivation::OneL { chan: chan.clone(), sub: sub.thread_at(extra, path, 0)? }
            }
            Derivation::TensorL { chan, bound, sub } => Derivation::TensorL {
                chan: chan.clone(),
                bound: bound.clone(),
                sub: sub.thread_at(extra, path, 0)?,
            },
            Derivation::TensorR { subject, bound, left, right } => Derivation::TensorR {
                subject: subject.clone(),
                bound: bound.clone(),
                left: left.thread_at(extra, path, 0)?,
                right: right.thread_at(extra, path, 1)?,
            },
            Derivation::LolliL { chan, bound, left, right } => Derivation::LolliL {
                chan: chan.clone(),
                bound: bound.clone(),
                left: left.thread_at(extra, path, 0)?,
                right: right.thread_at(extra, path, 1)?,
            },
            Derivation::LolliR { subject, bound, sub } => Derivation::LolliR {
                subject: subject.clone(),
                bound: bound.clone(),
                sub: sub.thread_at(extra, path, 0)?,
            },
            Derivation::PlusL { chan, left, right } => Derivation::PlusL {
                chan: chan.clone(),
                left: left.thread_at(extra, path, 0)?,
                right: right.thread_at(extra, path, 1)?,
            },
            Derivation::PlusR1 { subject, right_type, sub } => Derivation::PlusR1 {
                subject: subject.clone(),
                right_type: right_type.clone(),
                sub: sub.thread_at(extra, path, 0)?,
            },
            Derivation::PlusR2 { subject, left_type, sub } => Derivation::PlusR2 {
                subject: subject.clone(),
                left_type: left_type.clone(),
                sub: sub.thread_at(extra, path, 0)?,
            },
            Derivation::WithL1 { chan, right_type, sub } => Derivation::WithL1 {
                chan: chan.clone(),
                right_type: right_type.clone(),
                sub: sub.thread_at(extra, path, 0)?,
            },
            Derivation::WithL2 { chan, left_type, sub } => Derivation::WithL2 {
                chan: chan.clone(),
                left_type: left_type.clone(),
                sub: sub.thread_at(extra, path, 0)?,
            },
            Derivation::WithR { subject, left, right } => Derivation::WithR {
                subject: subject.clone(),
                left: left.thread_at(extra, path, 0)?,
                right: right.thread_at(extra, path, 1)?,
            },
            Derivation::BSharp { chan, bound, sub } => Derivation::BSharp {
                chan: chan.clone(),
                bound: bound.clone(),
                sub: sub.thread_at(extra, path, 0)?,
            },
            Derivation::BBang { chan, bound, type_a, sub } => Derivation::BBang {
                chan: chan.clone(),
                bound: bound.clone(),
                type_a: type_a.clone(),
                sub: sub.thread_at(extra, path, 0)?,
            },
            Derivation::BangLSharp { chan, sub } => {
                Derivation::BangLSharp { chan: chan.clone(), sub: sub.thread_at(extra, path, 0)? }
            }
            Derivation::BangLBang { chan, sub } => {
                Derivation::BangLBang { chan: chan.clone(), sub: sub.thread_at(extra, path, 0)? }
            }
            Derivation::Cut { chan, type_a, left, right } => Derivation::Cut {
                chan: chan.clone(),
                type_a: type_a.clone(),
                left: left.thread_at(extra, path, 0)?,
                right: right.thread_at(extra, path, 1)?,
            },
        })
    }

    fn lift_inner(&self) -> Result<Derivation, CheckError> {
        Ok(match self {
            Derivation::OneR { subject, aux, mux } => Derivation::OneR {
                subject: subject.clone(),
                aux: Zone::new(),
                mux: aux.disjoint_union(mux).map_err(|_| self.dup(&[]))?,
            },
            // A server body is scoped on its own; its conclusion already has
            // an empty auxiliary zone.
            Derivation::BangR { .. } => self.clone(),
            Derivation::BBang { chan, bound, type_a, sub } => {
                let mut extra = Zone::new();
                extra.insert(chan.clone(), type_a.clone()).map_err(|_| self.dup(&[]))?;
                Derivation::BSharp {
                    chan: chan.clone(),
                    bound: bound.clone(),
                    sub: Box::new(weaken(&sub.lift_inner()?, &extra)?),
                }
            }
            Derivation::BangLBang { chan, sub } => {
                Derivation::BangLSharp { chan: chan.clone(), sub: Box::new(sub.lift_inner()?) }
            }
            Derivation::CutBang { chan, type_a, left, right }
            | Derivation::CutSharp { chan, type_a, left, right } => Derivation::CutSharp {
                chan: chan.clone(),
                type_a: type_a.clone(),
                left: left.clone(),
                right: Box::new(right.lift_inner()?),
            },
            // Multiplicative splits: each lifted premise must also carry the
            // sibling's auxiliary names, now multiplexed and shared.
            Derivation::TensorR { subject, bound, left, right } => {
                let (left, right) = cross_lift(left, right)?;
                Derivation::TensorR { subject: subject.clone(), bound: bound.clone(), left, right }
            }
            Derivation::LolliL { chan, bound, left, right } => {
                let (left, right) = cross_lift(left, right)?;
                Derivation::LolliL { chan: chan.clone(), bound: bound.clone(), left, right }
            }
            Derivation::Cut { chan, type_a, left, right } => {
                let (left, right) = cross_lift(left, right)?;
                Derivation::Cut { chan: chan.clone(), type_a: type_a.clone(), left, right }
            }
            Derivation::PlusL { chan, left, right } => Derivation::PlusL {
                chan: chan.clone(),
                left: Box::new(left.lift_inner()?),
                right: Box::new(right.lift_inner()?),
            },
            Derivation::WithR { subject, left, right } => Derivation::WithR {
                subject: subject.clone(),
                left: Box::new(left.lift_inner()?),
                right: Box::new(right.lift_inner()?),
            },
            Derivation::OneL { chan, sub } => {
                Derivation::OneL { chan: chan.clone(), sub: Box::new(sub.lift_inner()?) }
            }
            Derivation::TensorL { chan, bound, sub } => Derivation::TensorL {
                chan: chan.clone(),
                bound: bound.clone(),
                sub: Box::new(sub.lift_inner()?),
            },
            Derivation::LolliR { subject, bound, sub } => Derivation::LolliR {
                subject: subject.clone(),
                bound: bound.clone(),
                sub: Box::new(sub.lift_inner()?),
            },
            Derivation::PlusR1 { subject, right_type, sub } => Derivation::PlusR1 {
                subject: subject.clone(),
                right_type: right_type.clone(),
                sub: Box::new(sub.lift_inner()?),
            },
            Derivation::PlusR2 { subject, left_type, sub } => Derivation::PlusR2 {
                subject: subject.clone(),
                left_type: left_type.clone(),
                sub: Box::new(sub.lift_inner()?),
            },
            Derivation::WithL1 { chan, right_type, sub } => Derivation::WithL1 {
                chan: chan.clone(),
                right_type: right_type.clone(),
                sub: Box::new(sub.lift_inner()?),
            },
            Derivation::WithL2 { chan, left_type, sub } => Derivation::WithL2 {
                chan: chan.clone(),
                left_type: left_type.clone(),
                sub: Box::new(sub.lift_inner()?),
            },
            Derivation::BSharp { chan, bound, sub } => Derivation::BSharp {
                chan: chan.clone(),
                bound: bound.clone(),
                sub: Box::new(sub.lift_inner()?),
            },
            Derivation::BangLSharp { chan, sub } => {
                Derivation::BangLSharp { chan: chan.clone(), sub: Box::new(sub.lift_inner()?) }
            }
        })
    }
}

fn cross_lift(left: &Derivation, right: &Derivation) -> Result<(Box<Derivation>, Box<Derivation>), CheckError> {
    let jl = check_derivation(left)?;
    let jr = check_derivation(right)?;
    let lifted_left = weaken(&left.lift_inner()?, &jr.contexts.auxiliary)?;
    let lifted_right = weaken(&right.lift_inner()?, &jl.contexts.auxiliary)?;
    Ok((Box::new(lifted_left), Box::new(lifted_right)))
}

/// Shared fixtures for the kernel's own tests and for the measure and
/// rewrite suites, which all quantify over the same valid derivations.
#[cfg(test)]
pub(crate) mod testkit {
    use super::*;

    pub(crate) fn n(s: &str) -> Name {
        Name::new(s)
    }

    pub(crate) fn zone(pairs: &[(&str, Type)]) -> Zone {
        Zone::try_from_pairs(pairs.iter().map(|(s, t)| (n(s), t.clone()))).expect("distinct names")
    }

    /// `0 :: subject : 1` with `used : 1` discarded from the linear zone.
    pub(crate) fn drop_one(used: &str, subject: &str) -> Derivation {
        Derivation::one_l(used, Derivation::one_r(subject))
    }

    /// Valid derivations exercising every node form, reused by the
    /// erasure-size, weakening, and lifting properties.
    pub(crate) fn samples() -> Vec<Derivation> {
        let tensor_r = Derivation::tensor_r("x", "y", Derivation::one_r("y"), Derivation::one_r("x"));
        let tensor_l = Derivation::tensor_l("x", "y", Derivation::one_l("x", drop_one("y", "z")));
        let lolli_r = Derivation::lolli_r("x", "y", drop_one("y", "x"));
        let lolli_l = Derivation::lolli_l("x", "y", Derivation::one_r("y"), drop_one("x", "z"));
        let plus_l = Derivation::plus_l(
            "x",
            drop_one("x", "z"),
            Derivation::lolli_l("x", "w", Derivation::one_r("w"), drop_one("x", "z")),
        );
        let with_r = Derivation::with_r(
            "x",
            Derivation::one_r("x"),
            Derivation::plus_r1("x", Type::One, Derivation::one_r("x")),
        );
        let b_bang = Derivation::b_bang("x", "y", Type::One, drop_one("y", "z"));
        let bang_l_bang = Derivation::bang_l_bang("x", b_bang.clone());
        let b_sharp = Derivation::b_sharp(
            "x",
            "y",
            Derivation::one_l("y", Derivation::one_r_in("z", Zone::new(), zone(&[("x", Type::One)]))),
        );
        let bang_r = Derivation::bang_r(
            "x",
            "y",
            vec![n("c")],
            Derivation::one_r_in("y", zone(&[("c", Type::One)]), Zone::new()),
        );
        let cut = Derivation::cut("x", Type::One, Derivation::one_r("x"), drop_one("x", "z"));
        let cut_bang = Derivation::cut_bang(
            "x",
            Type::One,
            Derivation::one_r("y"),
            Derivation::b_bang("x", "w", Type::One, drop_one("w", "z")),
        );
        let cut_sharp = Derivation::cut_sharp("x", Type::One, Derivation::one_r("y"), b_sharp.clone());
        vec![
            Derivation::one_r("x"),
            tensor_r,
            tensor_l,
            lolli_r,
            lolli_l,
            plus_l,
            with_r,
            Derivation::with_l2("x", Type::One, drop_one("x", "z")),
            b_bang,
            bang_l_bang,
            b_sharp.clone(),
            Derivation::bang_l_sharp("x", b_sharp),
            bang_r,
            cut,
            cut_bang,
            cut_sharp,
        ]
    }
}
