//! Operational semantics on raw processes.
//!
//! Reduction happens between two parallel components of the same level:
//! an output meets an input or a replicated input on the same channel, or a
//! selection meets a case. Working on canonical forms makes enumeration
//! complete: every communication enabled up to congruence surfaces as a
//! component pair at some level's top, and top-level pairs are the only ones
//! we fire (reduction is not closed under prefixes).

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use super::canon::{canonical_form, collect_dead_servers};
use super::{free_names, size, substitute, Name, Process};

/// What kind of interaction a redex is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RedexKind {
    /// `x<y>. P | x(z). Q`
    LinearComm,
    /// `x<y>. P | !x(z). Q` (the server survives)
    ReplicatedComm,
    /// `x.inl; P | x.case(Q, R)`
    SelectLeft,
    /// `x.inr; P | x.case(Q, R)`
    SelectRight,
}

/// An enabled interaction in the canonical form of a process, identified by
/// the component indices `(sender, receiver)` at the top level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Redex {
    pub kind: RedexKind,
    pub channel: Name,
    pub position: (usize, usize),
}

/// Scheduling policy for `reduce_trace`. Both policies are deterministic
/// and, on confluent nets, reach the same normal form in the same number of
/// steps; they differ in how wide the intermediate state gets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Always fire the redex whose sender component comes first in the
    /// canonical ordering. Tends to run depth-first: freshly spawned work
    /// is often scheduled before older pending work.
    Leftmost,
    /// Always fire the oldest enabled sender; spawned continuations join
    /// the back of the queue. This is the level-synchronous order in which
    /// a cascade of servers fires generation by generation, so the recorded
    /// sizes expose the true width of the computation.
    Fifo,
}

/// The record of a bounded run.
#[derive(Clone, Debug)]
pub struct Trace {
    pub steps: usize,
    /// `sizes[0]` is the size of the initial canonical form; each later
    /// entry is the size after a step, with dead servers collected.
    pub sizes: Vec<usize>,
    pub final_process: Process,
    pub budget_exhausted: bool,
}

impl Trace {
    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ReduceError {
    #[error("no {kind:?} redex on {channel} at components ({}, {})", position.0, position.1)]
    StaleRedex { kind: RedexKind, channel: Name, position: (usize, usize) },
}

/// All redexes at the top level of `canonical_form(p)`, ordered by
/// `(sender, receiver)` component index.
pub fn find_redexes(p: &Process) -> Vec<Redex> {
    let canon = canonical_form(p);
    let comps = top_components(&canon);
    let mut out = Vec::new();
    for (i, sender) in comps.iter().enumerate() {
        for (j, receiver) in comps.iter().enumerate() {
            if i == j {
                continue;
            }
            let found = match (sender, receiver) {
                (Process::Output(c1, _, _), Process::Input(c2, _, _)) if c1 == c2 => {
                    Some((RedexKind::LinearComm, c1))
                }
                (Process::Output(c1, _, _), Process::ReplInput(c2, _, _)) if c1 == c2 => {
                    Some((RedexKind::ReplicatedComm, c1))
                }
                (Process::SelectLeft(c1, _), Process::Case(c2, _, _)) if c1 == c2 => {
                    Some((RedexKind::SelectLeft, c1))
                }
                (Process::SelectRight(c1, _), Process::Case(c2, _, _)) if c1 == c2 => {
                    Some((RedexKind::SelectRight, c1))
                }
                _ => None,
            };
            if let Some((kind, channel)) = found {
                out.push(Redex { kind, channel: channel.clone(), position: (i, j) });
            }
        }
    }
    out
}

/// Fires `redex` in `canonical_form(p)` and returns the canonical result.
/// Fails if the redex does not match the canonical form (it was found on a
/// different process, or the process has changed since).
pub fn reduce_step(p: &Process, redex: &Redex) -> Result<Process, ReduceError> {
    let canon = canonical_form(p);
    let (binders, mut comps) = split_top(&canon);
    let stale = || ReduceError::StaleRedex {
        kind: redex.kind,
        channel: redex.channel.clone(),
        position: redex.position,
    };
    let (i, j) = redex.position;
    if i >= comps.len() || j >= comps.len() || i == j {
        return Err(stale());
    }
    match (redex.kind, comps[i].clone(), comps[j].clone()) {
        (RedexKind::LinearComm, Process::Output(c1, y, p1), Process::Input(c2, z, q1))
            if c1 == redex.channel && c2 == redex.channel =>
        {
            // x<y>. P | x(z). Q  ->  (new y)(P | Q{y/z})
            let joined = Process::restrict(y.clone(), Process::par(*p1, substitute(&q1, &y, &z)));
            let (lo, hi) = (i.min(j), i.max(j));
            comps.remove(hi);
            comps[lo] = joined;
        }
        (RedexKind::ReplicatedComm, Process::Output(c1, y, p1), Process::ReplInput(c2, z, q1))
            if c1 == redex.channel && c2 == redex.channel =>
        {
            // x<y>. P | !x(z). Q  ->  (new y)(P | Q{y/z}) | !x(z). Q
            let spawned = Process::restrict(y.clone(), Process::par(*p1, substitute(&q1, &y, &z)));
            comps[i] = spawned;
        }
        (RedexKind::SelectLeft, Process::SelectLeft(c1, p1), Process::Case(c2, q1, _))
            if c1 == redex.channel && c2 == redex.channel =>
        {
            comps[i] = *p1;
            comps[j] = *q1;
        }
        (RedexKind::SelectRight, Process::SelectRight(c1, p1), Process::Case(c2, _, r1))
            if c1 == redex.channel && c2 == redex.channel =>
        {
            comps[i] = *p1;
            comps[j] = *r1;
        }
        _ => return Err(stale()),
    }
    let body = comps.into_iter().reduce(Process::par).unwrap_or(Process::Nil);
    let rebuilt = binders.into_iter().rev().fold(body, |acc, b| Process::restrict(b, acc));
    Ok(canonical_form(&rebuilt))
}

/// Runs `p` for at most `budget` steps under the given strategy, collecting
/// dead servers after every step so recorded sizes reflect reachable work.
pub fn reduce_trace(p: &Process, budget: usize, strategy: Strategy) -> Trace {
    match strategy {
        Strategy::Leftmost => trace_leftmost(p, budget),
        Strategy::Fifo => trace_fifo(p, budget),
    }
}

fn trace_leftmost(p: &Process, budget: usize) -> Trace {
    let mut current = canonical_form(p);
    let mut sizes = vec![size(&current)];
    let mut steps = 0usize;
    while steps < budget {
        let redexes = find_redexes(&current);
        let Some(redex) = redexes.first() else { break };
        current = reduce_step(&current, redex).expect("redex enumerated on this process");
        current = collect_dead_servers(&current);
        sizes.push(size(&current));
        steps += 1;
    }
    let budget_exhausted = steps == budget && !find_redexes(&current).is_empty();
    Trace { steps, sizes, final_process: current, budget_exhausted }
}

fn trace_fifo(p: &Process, budget: usize) -> Trace {
    let mut state = FifoState::new(p);
    state.collect_dead();
    let mut sizes = vec![state.size()];
    let mut steps = 0usize;
    while steps < budget {
        if !state.fire_oldest() {
            break;
        }
        state.collect_dead();
        sizes.push(state.size());
        steps += 1;
    }
    let budget_exhausted = steps == budget && state.find_oldest().is_some();
    Trace { steps, sizes, final_process: state.into_process(), budget_exhausted }
}

/// Flat queue representation for FIFO scheduling: components in age order
/// under one pool of restricted names. Binders of spawned bodies are hoisted
/// (freshened against every name seen so far) as they reach the top.
struct FifoState {
    binders: BTreeSet<Name>,
    taken: BTreeSet<Name>,
    comps: Vec<Process>,
}

impl FifoState {
    fn new(p: &Process) -> FifoState {
        let canon = canonical_form(p);
        let (binders, comps) = split_top(&canon);
        let mut state = FifoState {
            binders: binders.into_iter().collect(),
            taken: super::all_names(&canon),
            comps: Vec::new(),
        };
        state.comps = comps;
        state
    }

    /// Splits `p` into components, hoisting its top restrictions into the
    /// shared pool (freshened against every name seen so far).
    fn flatten(&mut self, p: Process) -> Vec<Process> {
        let (binders, mut comps) = split_top(&p);
        for b in binders {
            let fresh = if self.taken.contains(&b) { b.freshen(&self.taken) } else { b.clone() };
            if fresh != b {
                for c in &mut comps {
                    *c = substitute(c, &fresh, &b);
                }
            }
            self.taken.insert(fresh.clone());
            self.binders.insert(fresh);
        }
        for c in &comps {
            self.taken.extend(super::all_names(c));
        }
        comps
    }

    fn size(&self) -> usize {
        self.comps.iter().map(size).sum()
    }

    /// `(sender, receiver, kind)` for the oldest enabled sender, if any.
    fn find_oldest(&self) -> Option<(usize, usize, RedexKind)> {
        for (i, sender) in self.comps.iter().enumerate() {
            for (j, receiver) in self.comps.iter().enumerate() {
                if i == j {
                    continue;
                }
                let kind = match (sender, receiver) {
                    (Process::Output(c1, _, _), Process::Input(c2, _, _)) if c1 == c2 => RedexKind::LinearComm,
                    (Process::Output(c1, _, _), Process::ReplInput(c2, _, _)) if c1 == c2 => {
                        RedexKind::ReplicatedComm
                    }
                    (Process::SelectLeft(c1, _), Process::Case(c2, _, _)) if c1 == c2 => RedexKind::SelectLeft,
                    (Process::SelectRight(c1, _), Process::Case(c2, _, _)) if c1 == c2 => RedexKind::SelectRight,
                    _ => continue,
                };
                return Some((i, j, kind));
            }
        }
        None
    }

    /// Fires the oldest enabled sender. Each continuation replaces its own
    /// component in place, keeping its thread's age; only a replicated
    /// input's spawned body is new work and joins the back of the queue.
    /// Returns false when no redex exists.
    fn fire_oldest(&mut self) -> bool {
        let Some((i, j, kind)) = self.find_oldest() else { return false };
        let mut at_i: Vec<Process>;
        let mut at_j: Vec<Process>;
        let mut at_back = Vec::new();
        match kind {
            RedexKind::LinearComm => {
                let Process::Output(_, y, p1) = self.comps[i].clone() else { unreachable!() };
                let Process::Input(_, z, q1) = self.comps[j].clone() else { unreachable!() };
                let fresh = y.freshen(&self.taken);
                self.taken.insert(fresh.clone());
                self.binders.insert(fresh.clone());
                at_i = self.flatten(substitute(&p1, &fresh, &y));
                at_j = self.flatten(substitute(&q1, &fresh, &z));
            }
            RedexKind::ReplicatedComm => {
                let Process::Output(_, y, p1) = self.comps[i].clone() else { unreachable!() };
                let Process::ReplInput(_, z, q1) = self.comps[j].clone() else { unreachable!() };
                let fresh = y.freshen(&self.taken);
                self.taken.insert(fresh.clone());
                self.binders.insert(fresh.clone());
                at_i = self.flatten(substitute(&p1, &fresh, &y));
                at_j = vec![self.comps[j].clone()];
                at_back = self.flatten(substitute(&q1, &fresh, &z));
            }
            RedexKind::SelectLeft => {
                let Process::SelectLeft(_, p1) = self.comps[i].clone() else { unreachable!() };
                let Process::Case(_, q1, _) = self.comps[j].clone() else { unreachable!() };
                at_i = self.flatten(*p1);
                at_j = self.flatten(*q1);
            }
            RedexKind::SelectRight => {
                let Process::SelectRight(_, p1) = self.comps[i].clone() else { unreachable!() };
                let Process::Case(_, _, r1) = self.comps[j].clone() else { unreachable!() };
                at_i = self.flatten(*p1);
                at_j = self.flatten(*r1);
            }
        }
        let mut next = Vec::with_capacity(self.comps.len() + at_back.len() + 2);
        for (k, c) in self.comps.drain(..).enumerate() {
            if k == i {
                next.append(&mut at_i);
            } else if k == j {
                next.append(&mut at_j);
            } else {
                next.push(c);
            }
        }
        next.extend(at_back);
        self.comps = next;
        true
    }

    /// Removes replicated inputs on restricted channels no other component
    /// mentions, iterating until stable.
    fn collect_dead(&mut self) {
        loop {
            let dead = (0..self.comps.len()).find(|&i| {
                let Process::ReplInput(subject, _, _) = &self.comps[i] else { return false };
                self.binders.contains(subject)
                    && !self
                        .comps
                        .iter()
                        .enumerate()
                        .any(|(j, c)| j != i && free_names(c).contains(subject))
            });
            match dead {
                Some(i) => {
                    self.comps.remove(i);
                }
                None => break,
            }
        }
    }

    fn into_process(self) -> Process {
        let body = self.comps.into_iter().reduce(Process::par).unwrap_or(Process::Nil);
        let rebuilt = self.binders.into_iter().rev().fold(body, |acc, b| Process::restrict(b, acc));
        canonical_form(&rebuilt)
    }
}

/// The parallel components at the outermost level of a canonical form.
fn top_components(p: &Process) -> Vec<Process> {
    split_top(p).1
}

fn split_top(p: &Process) -> (Vec<Name>, Vec<Process>) {
    let mut binders = Vec::new();
    let mut comps = Vec::new();
    fn walk(p: &Process, binders: &mut Vec<Name>, comps: &mut Vec<Process>) {
        match p {
            Process::Nil => {}
            Process::Par(l, r) => {
                walk(l, binders, comps);
                walk(r, binders, comps);
            }
            Process::Restrict(x, body) => {
                binders.push(x.clone());
                walk(body, binders, comps);
            }
            other => comps.push(other.clone()),
        }
    }
    walk(p, &mut binders, &mut comps);
    (binders, comps)
}

#[cfg(test)]
mod tests {
    use super::super::{alpha_eq, congruent};
    use super::*;

    fn n(s: &str) -> Name {
        Name::new(s)
    }

    #[test]
    fn linear_comm_runs_to_nil() {
        // a<u>. u<m> | a(w). w(k)
        let p = Process::par(
            Process::output(n("a"), n("u"), Process::output(n("u"), n("m"), Process::Nil)),
            Process::input(n("a"), n("w"), Process::input(n("w"), n("k"), Process::Nil)),
        );
        let redexes = find_redexes(&p);
        assert_eq!(redexes.len(), 1);
        assert_eq!(redexes[0].kind, RedexKind::LinearComm);
        assert_eq!(redexes[0].channel, n("a"));

        let trace = reduce_trace(&p, 10, Strategy::Leftmost);
        assert_eq!(trace.steps, 2);
        assert_eq!(trace.sizes, vec![4, 2, 0]);
        assert_eq!(trace.final_process, Process::Nil);
        assert!(!trace.budget_exhausted);
    }

    #[test]
    fn replicated_comm_keeps_server() {
        // (new s)(!s(y). a<z> | s<v>)
        let p = Process::restrict(
            n("s"),
            Process::par(
                Process::repl(n("s"), n("y"), Process::output(n("a"), n("z"), Process::Nil)),
                Process::output(n("s"), n("v"), Process::Nil),
            ),
        );
        let redexes = find_redexes(&p);
        assert_eq!(redexes.len(), 1);
        assert_eq!(redexes[0].kind, RedexKind::ReplicatedComm);
        let stepped = reduce_step(&p, &redexes[0]).unwrap();
        let expected = Process::par(
            Process::restrict(n("s"), Process::repl(n("s"), n("y"), Process::output(n("a"), n("z"), Process::Nil))),
            Process::output(n("a"), n("z"), Process::Nil),
        );
        assert!(congruent(&stepped, &expected));

        // The trace collects the now dead server and then stops: a<z> has
        // no partner.
        let trace = reduce_trace(&p, 10, Strategy::Leftmost);
        assert_eq!(trace.steps, 1);
        assert_eq!(trace.sizes, vec![3, 1]);
        assert!(congruent(&trace.final_process, &Process::output(n("a"), n("z"), Process::Nil)));
    }

    #[test]
    fn selections_pick_their_branch() {
        let mk = |sel: Process| {
            Process::par(
                sel,
                Process::case(
                    n("c"),
                    Process::output(n("l"), n("u"), Process::Nil),
                    Process::output(n("r"), n("v"), Process::Nil),
                ),
            )
        };
        let left = mk(Process::inl(n("c"), Process::Nil));
        let r1 = find_redexes(&left);
        assert_eq!(r1.len(), 1);
        assert_eq!(r1[0].kind, RedexKind::SelectLeft);
        let left_result = reduce_step(&left, &r1[0]).unwrap();
        assert!(congruent(&left_result, &Process::output(n("l"), n("u"), Process::Nil)));

        let right = mk(Process::inr(n("c"), Process::Nil));
        let r2 = find_redexes(&right);
        assert_eq!(r2[0].kind, RedexKind::SelectRight);
        let right_result = reduce_step(&right, &r2[0]).unwrap();
        assert!(congruent(&right_result, &Process::output(n("r"), n("v"), Process::Nil)));
    }

    #[test]
    fn stale_redex_is_rejected() {
        let p = Process::par(
            Process::output(n("a"), n("u"), Process::Nil),
            Process::input(n("a"), n("w"), Process::Nil),
        );
        let redex = find_redexes(&p).remove(0);
        let q = Process::output(n("b"), n("u"), Process::Nil);
        assert!(matches!(reduce_step(&q, &redex), Err(ReduceError::StaleRedex { .. })));
    }

    #[test]
    fn small_duplication_cascade() {
        // (new x1)( !x1(y) | (new x0)( !x0(y). x1<z>. x1<w> | x0<v> ) )
        let termser = Process::repl(n("x1"), n("y"), Process::Nil);
        let dupser = Process::repl(
            n("x0"),
            n("y"),
            Process::output(n("x1"), n("z"), Process::output(n("x1"), n("w"), Process::Nil)),
        );
        let client = Process::output(n("x0"), n("v"), Process::Nil);
        let p = Process::restrict(
            n("x1"),
            Process::par(termser, Process::restrict(n("x0"), Process::par(dupser, client))),
        );
        let trace = reduce_trace(&p, 100, Strategy::Leftmost);
        assert_eq!(trace.steps, 3);
        assert_eq!(trace.final_process, Process::Nil);
        assert_eq!(trace.sizes, vec![5, 3, 2, 0]);
        assert!(!trace.budget_exhausted);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let p = Process::par(
            Process::output(n("a"), n("u"), Process::output(n("u"), n("m"), Process::Nil)),
            Process::input(n("a"), n("w"), Process::input(n("w"), n("k"), Process::Nil)),
        );
        let trace = reduce_trace(&p, 1, Strategy::Leftmost);
        assert_eq!(trace.steps, 1);
        assert!(trace.budget_exhausted);
        assert!(!alpha_eq(&trace.final_process, &Process::Nil));
    }
}
