//! Processes of a pi-calculus with binary choice and bound output, plus the
//! structural operations everything else is built on: free names, capture
//! avoiding substitution, alpha equivalence, size, and box depth.
//!
//! Every output is a bound output: `Output(x, y, P)` stands for the process
//! that creates a fresh `y`, sends it on `x`, and continues as `P`. A free
//! output form is deliberately not representable.

mod canon;
mod reduce;

pub use canon::{canonical_form, collect_dead_servers, congruent};
pub use reduce::{find_redexes, reduce_step, reduce_trace, Redex, RedexKind, ReduceError, Strategy, Trace};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A channel name: a source identifier plus a freshness counter.
///
/// Names written in source always have counter 0; generated names carry a
/// positive counter and render as `base#n`, which the parser rejects, so a
/// generated name can never collide with a source name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Name {
    pub base: String,
    pub idx: u32,
}

impl Name {
    pub fn new(base: impl Into<String>) -> Name {
        Name { base: base.into(), idx: 0 }
    }

    /// A name based on `self` that is not in `avoid`.
    pub fn freshen(&self, avoid: &BTreeSet<Name>) -> Name {
        let mut idx = self.idx.max(1);
        loop {
            let cand = Name { base: self.base.clone(), idx };
            if !avoid.contains(&cand) {
                return cand;
            }
            idx += 1;
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.idx == 0 {
            write!(f, "{}", self.base)
        } else {
            write!(f, "{}#{}", self.base, self.idx)
        }
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Name {
        Name::new(s)
    }
}

/// Process syntax. `Output` is a bound output `(new y) x<y>. P` with `y`
/// bound in `P`; `Input`, `ReplInput`, and `Restrict` bind likewise.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Process {
    Nil,
    Par(Box<Process>, Box<Process>),
    Restrict(Name, Box<Process>),
    Input(Name, Name, Box<Process>),
    Output(Name, Name, Box<Process>),
    ReplInput(Name, Name, Box<Process>),
    SelectLeft(Name, Box<Process>),
    SelectRight(Name, Box<Process>),
    Case(Name, Box<Process>, Box<Process>),
}

impl Process {
    pub fn par(l: Process, r: Process) -> Process {
        Process::Par(Box::new(l), Box::new(r))
    }
    pub fn restrict(x: impl Into<Name>, body: Process) -> Process {
        Process::Restrict(x.into(), Box::new(body))
    }
    pub fn input(c: impl Into<Name>, b: impl Into<Name>, body: Process) -> Process {
        Process::Input(c.into(), b.into(), Box::new(body))
    }
    pub fn output(c: impl Into<Name>, b: impl Into<Name>, body: Process) -> Process {
        Process::Output(c.into(), b.into(), Box::new(body))
    }
    pub fn repl(c: impl Into<Name>, b: impl Into<Name>, body: Process) -> Process {
        Process::ReplInput(c.into(), b.into(), Box::new(body))
    }
    pub fn inl(c: impl Into<Name>, body: Process) -> Process {
        Process::SelectLeft(c.into(), Box::new(body))
    }
    pub fn inr(c: impl Into<Name>, body: Process) -> Process {
        Process::SelectRight(c.into(), Box::new(body))
    }
    pub fn case(c: impl Into<Name>, l: Process, r: Process) -> Process {
        Process::Case(c.into(), Box::new(l), Box::new(r))
    }
}

/// fn(P) under the usual binder rules (restriction, input, bound output,
/// replicated input bind their name in the continuation).
pub fn free_names(p: &Process) -> BTreeSet<Name> {
    fn go(p: &Process, out: &mut BTreeSet<Name>, bound: &mut Vec<Name>) {
        match p {
            Process::Nil => {}
            Process::Par(l, r) => {
                go(l, out, bound);
                go(r, out, bound);
            }
            Process::Restrict(x, body) => {
                bound.push(x.clone());
                go(body, out, bound);
                bound.pop();
            }
            Process::Input(c, b, body) | Process::Output(c, b, body) | Process::ReplInput(c, b, body) => {
                if !bound.contains(c) {
                    out.insert(c.clone());
                }
                bound.push(b.clone());
                go(body, out, bound);
                bound.pop();
            }
            Process::SelectLeft(c, body) | Process::SelectRight(c, body) => {
                if !bound.contains(c) {
                    out.insert(c.clone());
                }
                go(body, out, bound);
            }
            Process::Case(c, l, r) => {
                if !bound.contains(c) {
                    out.insert(c.clone());
                }
                go(l, out, bound);
                go(r, out, bound);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(p, &mut out, &mut Vec::new());
    out
}

/// All names occurring anywhere in `p`, free or bound. Used to pick fresh ones.
pub fn all_names(p: &Process) -> BTreeSet<Name> {
    fn go(p: &Process, out: &mut BTreeSet<Name>) {
        match p {
            Process::Nil => {}
            Process::Par(l, r) => {
                go(l, out);
                go(r, out);
            }
            Process::Restrict(x, body) => {
                out.insert(x.clone());
                go(body, out);
            }
            Process::Input(c, b, body) | Process::Output(c, b, body) | Process::ReplInput(c, b, body) => {
                out.insert(c.clone());
                out.insert(b.clone());
                go(body, out);
            }
            Process::SelectLeft(c, body) | Process::SelectRight(c, body) => {
                out.insert(c.clone());
                go(body, out);
            }
            Process::Case(c, l, r) => {
                out.insert(c.clone());
                go(l, out);
                go(r, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(p, &mut out);
    out
}

/// Capture avoiding substitution `p{replacement/target}`: every free
/// occurrence of `target` becomes `replacement`; binders that would capture
/// the replacement are renamed first.
pub fn substitute(p: &Process, replacement: &Name, target: &Name) -> Process {
    if replacement == target {
        return p.clone();
    }
    let sub_name = |n: &Name| if n == target { replacement.clone() } else { n.clone() };
    // rebind: handles a binder b over body; returns (new binder, new body ready for recursion)
    let rebind = |b: &Name, body: &Process| -> Option<(Name, Process)> {
        if b == target {
            // target is shadowed; stop here
            None
        } else if b == replacement && free_names(body).contains(target) {
            // would capture: rename the binder away from both names
            let mut avoid = all_names(body);
            avoid.insert(replacement.clone());
            avoid.insert(target.clone());
            let b2 = b.freshen(&avoid);
            Some((b2.clone(), substitute(body, &b2, b)))
        } else {
            Some((b.clone(), body.clone()))
        }
    };
    match p {
        Process::Nil => Process::Nil,
        Process::Par(l, r) => Process::par(substitute(l, replacement, target), substitute(r, replacement, target)),
        Process::Restrict(x, body) => match rebind(x, body) {
            None => p.clone(),
            Some((x2, body2)) => Process::restrict(x2, substitute(&body2, replacement, target)),
        },
        Process::Input(c, b, body) => match rebind(b, body) {
            None => Process::input(sub_name(c), b.clone(), (**body).clone()),
            Some((b2, body2)) => Process::input(sub_name(c), b2, substitute(&body2, replacement, target)),
        },
        Process::Output(c, b, body) => match rebind(b, body) {
            None => Process::output(sub_name(c), b.clone(), (**body).clone()),
            Some((b2, body2)) => Process::output(sub_name(c), b2, substitute(&body2, replacement, target)),
        },
        Process::ReplInput(c, b, body) => match rebind(b, body) {
            None => Process::repl(sub_name(c), b.clone(), (**body).clone()),
            Some((b2, body2)) => Process::repl(sub_name(c), b2, substitute(&body2, replacement, target)),
        },
        Process::SelectLeft(c, body) => Process::inl(sub_name(c), substitute(body, replacement, target)),
        Process::SelectRight(c, body) => Process::inr(sub_name(c), substitute(body, replacement, target)),
        Process::Case(c, l, r) => Process::case(
            sub_name(c),
            substitute(l, replacement, target),
            substitute(r, replacement, target),
        ),
    }
}

/// Alpha equivalence, decided by a parallel traversal carrying the two
/// binding stacks. Independent of `canonical_form` so the two can check
/// each other.
pub fn alpha_eq(p: &Process, q: &Process) -> bool {
    fn name_eq(a: &Name, b: &Name, env: &[(Name, Name)]) -> bool {
        for (x, y) in env.iter().rev() {
            let hit_a = x == a;
            let hit_b = y == b;
            if hit_a || hit_b {
                return hit_a && hit_b;
            }
        }
        a == b
    }
    fn go(p: &Process, q: &Process, env: &mut Vec<(Name, Name)>) -> bool {
        match (p, q) {
            (Process::Nil, Process::Nil) => true,
            (Process::Par(a, b), Process::Par(c, d)) => go(a, c, env) && go(b, d, env),
            (Process::Restrict(x, a), Process::Restrict(y, b)) => {
                env.push((x.clone(), y.clone()));
                let r = go(a, b, env);
                env.pop();
                r
            }
            (Process::Input(c1, b1, a), Process::Input(c2, b2, b))
            | (Process::Output(c1, b1, a), Process::Output(c2, b2, b))
            | (Process::ReplInput(c1, b1, a), Process::ReplInput(c2, b2, b)) => {
                if !name_eq(c1, c2, env) {
                    return false;
                }
                env.push((b1.clone(), b2.clone()));
                let r = go(a, b, env);
                env.pop();
                r
            }
            (Process::SelectLeft(c1, a), Process::SelectLeft(c2, b))
            | (Process::SelectRight(c1, a), Process::SelectRight(c2, b)) => name_eq(c1, c2, env) && go(a, b, env),
            (Process::Case(c1, a1, a2), Process::Case(c2, b1, b2)) => {
                name_eq(c1, c2, env) && go(a1, b1, env) && go(a2, b2, env)
            }
            _ => false,
        }
    }
    go(p, q, &mut Vec::new())
}

/// Process size: prefixes cost 1, case costs 1 plus both branches, parallel
/// sums, restriction and 0 are free. Invariant under structural congruence.
pub fn size(p: &Process) -> usize {
    match p {
        Process::Nil => 0,
        Process::Par(l, r) => size(l) + size(r),
        Process::Restrict(_, body) => size(body),
        Process::Input(_, _, body)
        | Process::Output(_, _, body)
        | Process::ReplInput(_, _, body)
        | Process::SelectLeft(_, body)
        | Process::SelectRight(_, body) => size(body) + 1,
        Process::Case(_, l, r) => size(l) + size(r) + 1,
    }
}

/// Box depth: the maximum nesting of replicated inputs.
pub fn box_depth(p: &Process) -> usize {
    match p {
        Process::Nil => 0,
        Process::Par(l, r) | Process::Case(_, l, r) => box_depth(l).max(box_depth(r)),
        Process::Restrict(_, body)
        | Process::Input(_, _, body)
        | Process::Output(_, _, body)
        | Process::SelectLeft(_, body)
        | Process::SelectRight(_, body) => box_depth(body),
        Process::ReplInput(_, _, body) => box_depth(body) + 1,
    }
}

// Pretty printing. `|` is loosest; a prefix continuation that is itself a
// parallel composition needs parentheses; trailing `. 0` is left implicit.
impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_process(self, f, false)
    }
}

/// Writes `p`; with `atom` set, wraps a parallel composition in parentheses
/// so it can sit inside a prefix continuation or beside `|` operands.
fn write_process(p: &Process, f: &mut fmt::Formatter<'_>, atom: bool) -> fmt::Result {
    // A continuation after `.`: elide Nil entirely.
    fn cont(body: &Process, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if matches!(body, Process::Nil) {
            Ok(())
        } else {
            write!(f, ". ")?;
            write_process(body, f, true)
        }
    }
    match p {
        Process::Nil => write!(f, "0"),
        Process::Par(l, r) => {
            if atom {
                write!(f, "(")?;
            }
            write_process(l, f, true)?;
            write!(f, " | ")?;
            write_process(r, f, true)?;
            if atom {
                write!(f, ")")?;
            }
            Ok(())
        }
        Process::Restrict(x, body) => {
            write!(f, "new {x}. ")?;
            write_process(body, f, true)
        }
        Process::Input(c, b, body) => {
            write!(f, "{c}({b})")?;
            cont(body, f)
        }
        Process::Output(c, b, body) => {
            write!(f, "{c}<{b}>")?;
            cont(body, f)
        }
        Process::ReplInput(c, b, body) => {
            write!(f, "!{c}({b})")?;
            cont(body, f)
        }
        Process::SelectLeft(c, body) => {
            write!(f, "{c}.inl")?;
            if matches!(**body, Process::Nil) {
                Ok(())
            } else {
                write!(f, "; ")?;
                write_process(body, f, true)
            }
        }
        Process::SelectRight(c, body) => {
            write!(f, "{c}.inr")?;
            if matches!(**body, Process::Nil) {
                Ok(())
            } else {
                write!(f, "; ")?;
                write_process(body, f, true)
            }
        }
        Process::Case(c, l, r) => {
            write!(f, "{c}.case(")?;
            write_process(l, f, false)?;
            write!(f, ", ")?;
            write_process(r, f, false)?;
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::new(s)
    }

    /// dupser_i from the duplication-server family:
    /// `!x_i(y). x_{i+1}<z>. x_{i+1}<w>`
    pub(crate) fn dupser(i: usize) -> Process {
        let xi = n(&format!("x{i}"));
        let xi1 = n(&format!("x{}", i + 1));
        Process::repl(
            xi,
            n("y"),
            Process::output(xi1.clone(), n("z"), Process::output(xi1, n("w"), Process::Nil)),
        )
    }

    /// `x0<y>` — one bound output on x0.
    pub(crate) fn dupclient() -> Process {
        Process::output(n("x0"), n("y"), Process::Nil)
    }

    #[test]
    fn free_names_oracles() {
        assert!(free_names(&Process::Nil).is_empty());
        let fc = free_names(&dupclient());
        assert_eq!(fc, BTreeSet::from([n("x0")]));
        for i in 0..4 {
            let fs = free_names(&dupser(i));
            assert_eq!(fs, BTreeSet::from([n(&format!("x{i}")), n(&format!("x{}", i + 1))]));
        }
        // binder shadowing: x(x). x<y> has free x only at the subject position
        let p = Process::input(n("x"), n("x"), Process::output(n("x"), n("y"), Process::Nil));
        assert_eq!(free_names(&p), BTreeSet::from([n("x")]));
    }

    #[test]
    fn substitution_oracles() {
        // (x(y). 0){z/x} = z(y). 0
        let p = Process::input(n("x"), n("y"), Process::Nil);
        let q = substitute(&p, &n("z"), &n("x"));
        assert_eq!(q, Process::input(n("z"), n("y"), Process::Nil));

        // (x(y). y<w>){y/x}: the subject is outside the binder's scope, so
        // nothing is captured and the binder may stay.
        let p = Process::input(n("x"), n("y"), Process::output(n("y"), n("w"), Process::Nil));
        let q = substitute(&p, &n("y"), &n("x"));
        let intended = Process::input(n("y"), n("u"), Process::output(n("u"), n("w"), Process::Nil));
        assert!(alpha_eq(&q, &intended));

        // (x(y). x<w>){y/x} must rename the binder: the body's free x
        // becomes y and would be captured otherwise.
        let p = Process::input(n("x"), n("y"), Process::output(n("x"), n("w"), Process::Nil));
        let q = substitute(&p, &n("y"), &n("x"));
        match &q {
            Process::Input(c, b, body) => {
                assert_eq!(c, &n("y"));
                assert_ne!(b, &n("y"), "binder must have been freshened");
                assert_eq!(**body, Process::output(n("y"), n("w"), Process::Nil));
            }
            other => panic!("unexpected shape: {other:?}"),
        }
        let intended = Process::input(n("y"), n("u"), Process::output(n("y"), n("w"), Process::Nil));
        assert!(alpha_eq(&q, &intended));

        // shadowed target is untouched: (x(x). x<w>){z/x} renames only the subject
        let p = Process::input(n("x"), n("x"), Process::output(n("x"), n("w"), Process::Nil));
        let q = substitute(&p, &n("z"), &n("x"));
        assert_eq!(q, Process::input(n("z"), n("x"), Process::output(n("x"), n("w"), Process::Nil)));

        // identity substitution
        let p = dupser(0);
        assert!(alpha_eq(&substitute(&p, &n("x0"), &n("x0")), &p));
    }

    #[test]
    fn alpha_eq_oracles() {
        let p = Process::restrict(n("a"), Process::output(n("a"), n("b"), Process::Nil));
        let q = Process::restrict(n("c"), Process::output(n("c"), n("d"), Process::Nil));
        assert!(alpha_eq(&p, &q));
        // differing free names are not alpha equivalent
        let r = Process::output(n("a"), n("b"), Process::Nil);
        let s = Process::output(n("c"), n("b"), Process::Nil);
        assert!(!alpha_eq(&r, &s));
        // bound against free never matches
        let t = Process::restrict(n("a"), Process::output(n("a"), n("b"), Process::Nil));
        let u = Process::output(n("a"), n("b"), Process::Nil);
        assert!(!alpha_eq(&t, &u));
    }

    #[test]
    fn size_oracles() {
        assert_eq!(size(&Process::Nil), 0);
        assert_eq!(size(&dupclient()), 1);
        for i in 0..4 {
            assert_eq!(size(&dupser(i)), 3);
        }
        // restriction is transparent for size, any number of layers deep
        let mut p = dupser(1);
        for k in 0..10 {
            p = Process::restrict(n(&format!("v{k}")), p);
            assert_eq!(size(&p), 3);
        }
        // case counts one plus both branches
        let c = Process::case(n("x"), dupclient(), Process::Nil);
        assert_eq!(size(&c), 2);
    }

    #[test]
    fn box_depth_oracles() {
        assert_eq!(box_depth(&Process::Nil), 0);
        assert_eq!(box_depth(&Process::output(n("y"), n("z"), Process::Nil)), 0);
        assert_eq!(box_depth(&dupser(0)), 1);
        let nested = Process::repl(n("x"), n("y"), Process::repl(n("z"), n("w"), Process::Nil));
        assert_eq!(box_depth(&nested), 2);
        let side = Process::par(nested.clone(), dupser(0));
        assert_eq!(box_depth(&side), 2);
    }

    #[test]
    fn display_round_shapes() {
        assert_eq!(dupser(0).to_string(), "!x0(y). x1<z>. x1<w>");
        assert_eq!(dupclient().to_string(), "x0<y>");
        let p = Process::restrict(
            n("x"),
            Process::par(dupclient(), Process::input(n("x0"), n("u"), Process::Nil)),
        );
        assert_eq!(p.to_string(), "new x. (x0<y> | x0(u))");
        let q = Process::case(n("x"), Process::inl("y", Process::Nil), Process::Nil);
        assert_eq!(q.to_string(), "x.case(y.inl, 0)");
    }
}

