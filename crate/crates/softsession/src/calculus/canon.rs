//! Canonical forms for structural congruence.
//!
//! Congruence here is generated by exactly seven axioms: alpha conversion,
//! `(new x) 0 = 0`, `P | 0 = P`, commutativity and associativity of `|`,
//! exchange of adjacent restrictions, and scope extrusion
//! `((new x) P) | Q = (new x)(P | Q)` for `x` not free in `Q`. All of them
//! only rearrange the unguarded region of a term, so two processes are
//! congruent exactly when, level by level (a level being the unguarded
//! spine between prefixes), they have the same restrictions and the same
//! multiset of parallel components up to renaming.
//!
//! `canonical_form` therefore hoists every restriction to the top of its
//! level, drops dead binders and nil components, orders components by an
//! alpha-invariant key, and re-emits the term. Keys refer to binders of the
//! level being ordered by an iteratively refined rank (never by name), to
//! binders of outer levels by their already fixed name, and to prefix-bound
//! names positionally. Components left tied after refinement are
//! interchangeable by an automorphism of the level in every configuration
//! arising here; distinguishing adversarially constructed regular networks
//! beyond rank refinement is graph-isomorphism territory and out of scope.

use std::collections::{BTreeSet, HashMap};

use super::{alpha_eq, free_names, Name, Process};

/// Structural congruence test: compare canonical forms up to alpha.
pub fn congruent(p: &Process, q: &Process) -> bool {
    alpha_eq(&canonical_form(p), &canonical_form(q))
}

/// The canonical representative of `p`'s congruence class, unique up to
/// alpha equivalence.
pub fn canonical_form(p: &Process) -> Process {
    let mut fresh = Freshener::new(p);
    let p = fresh.rename(p, &HashMap::new());
    let mut emitter = Emitter { assigned: free_names(&p), env: HashMap::new() };
    emitter.emit_level(Level::collect(p))
}

/// Removes, at the top level of a canonical term, every replicated input
/// whose subject is restricted at that level and requested by no other
/// component, iterating until no more servers are dead. The continuations of
/// live components are left untouched. Used by `reduce_trace` to keep
/// observed sizes meaningful once a server can never be invoked again.
pub fn collect_dead_servers(p: &Process) -> Process {
    let canon = canonical_form(p);
    let level = Level::collect(canon);
    let binders: BTreeSet<Name> = level.binders.iter().cloned().collect();
    let mut comps = level.comps;
    loop {
        let mut removed = false;
        for i in 0..comps.len() {
            let Process::ReplInput(subject, _, _) = &comps[i] else { continue };
            if !binders.contains(subject) {
                continue;
            }
            let used_elsewhere = comps
                .iter()
                .enumerate()
                .any(|(j, c)| j != i && free_names(c).contains(subject));
            if !used_elsewhere {
                comps.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            break;
        }
    }
    let body = comps.into_iter().reduce(Process::par).unwrap_or(Process::Nil);
    let rebuilt = level.binders.into_iter().rev().fold(body, |acc, b| Process::restrict(b, acc));
    canonical_form(&rebuilt)
}

// ---------------------------------------------------------------------------
// Pass 1: make every binder in the term globally unique.

struct Freshener {
    taken: BTreeSet<Name>,
}

impl Freshener {
    fn new(p: &Process) -> Freshener {
        Freshener { taken: super::all_names(p) }
    }

    fn bind(&mut self, n: &Name, env: &HashMap<Name, Name>) -> (Name, HashMap<Name, Name>) {
        let fresh = n.freshen(&self.taken);
        self.taken.insert(fresh.clone());
        let mut env2 = env.clone();
        env2.insert(n.clone(), fresh.clone());
        (fresh, env2)
    }

    fn rename(&mut self, p: &Process, env: &HashMap<Name, Name>) -> Process {
        let get = |n: &Name| env.get(n).cloned().unwrap_or_else(|| n.clone());
        match p {
            Process::Nil => Process::Nil,
            Process::Par(l, r) => Process::par(self.rename(l, env), self.rename(r, env)),
            Process::Restrict(x, body) => {
                let (x2, env2) = self.bind(x, env);
                Process::restrict(x2, self.rename(body, &env2))
            }
            Process::Input(c, b, body) => {
                let c2 = get(c);
                let (b2, env2) = self.bind(b, env);
                Process::input(c2, b2, self.rename(body, &env2))
            }
            Process::Output(c, b, body) => {
                let c2 = get(c);
                let (b2, env2) = self.bind(b, env);
                Process::output(c2, b2, self.rename(body, &env2))
            }
            Process::ReplInput(c, b, body) => {
                let c2 = get(c);
                let (b2, env2) = self.bind(b, env);
                Process::repl(c2, b2, self.rename(body, &env2))
            }
            Process::SelectLeft(c, body) => Process::inl(get(c), self.rename(body, env)),
            Process::SelectRight(c, body) => Process::inr(get(c), self.rename(body, env)),
            Process::Case(c, l, r) => Process::case(get(c), self.rename(l, env), self.rename(r, env)),
        }
    }
}

// ---------------------------------------------------------------------------
// Levels: the unguarded spine of a term.

struct Level {
    binders: Vec<Name>,
    comps: Vec<Process>,
}

impl Level {
    /// Flattens nested parallel composition and hoists every restriction on
    /// the spine (sound after freshening: binders are unique, so extrusion
    /// can never capture).
    fn collect(p: Process) -> Level {
        let mut level = Level { binders: Vec::new(), comps: Vec::new() };
        level.push(p);
        level
    }

    fn push(&mut self, p: Process) {
        match p {
            Process::Nil => {}
            Process::Par(l, r) => {
                self.push(*l);
                self.push(*r);
            }
            Process::Restrict(x, body) => {
                self.binders.push(x);
                self.push(*body);
            }
            other => self.comps.push(other),
        }
    }

    fn live_binders(&self) -> BTreeSet<Name> {
        let mut used = BTreeSet::new();
        for c in &self.comps {
            used.extend(free_names(c));
        }
        self.binders.iter().filter(|b| used.contains(*b)).cloned().collect()
    }
}

// ---------------------------------------------------------------------------
// Alpha-invariant rendering, used both for ranking binders and for ordering
// components. A scope maps every name resolvable from outside the subtree
// being rendered to a fixed token; names bound inside the subtree are
// rendered positionally with a counter threaded through the walk, and
// binders of levels still being ordered are rendered by rank. Rendering is
// a pure function of the subtree and the scope.

type Scope = HashMap<Name, String>;

fn resolve(n: &Name, scope: &Scope) -> String {
    scope.get(n).cloned().unwrap_or_else(|| format!("f:{n}"))
}

fn render_process(p: &Process, scope: &Scope, counter: &mut usize) -> String {
    let mut bind = |b: &Name, scope: &Scope| {
        let mut s2 = scope.clone();
        let tok = format!("v{counter}");
        *counter += 1;
        s2.insert(b.clone(), tok);
        s2
    };
    match p {
        Process::Nil => "0".to_string(),
        Process::Par(_, _) | Process::Restrict(_, _) => render_level(&Level::collect(p.clone()), scope, counter),
        Process::Input(c, b, body) => {
            let ch = resolve(c, scope);
            let s2 = bind(b, scope);
            format!("in({ch},{})", render_cont(body, &s2, counter))
        }
        Process::Output(c, b, body) => {
            let ch = resolve(c, scope);
            let s2 = bind(b, scope);
            format!("out({ch},{})", render_cont(body, &s2, counter))
        }
        Process::ReplInput(c, b, body) => {
            let ch = resolve(c, scope);
            let s2 = bind(b, scope);
            format!("rep({ch},{})", render_cont(body, &s2, counter))
        }
        Process::SelectLeft(c, body) => format!("inl({},{})", resolve(c, scope), render_cont(body, scope, counter)),
        Process::SelectRight(c, body) => format!("inr({},{})", resolve(c, scope), render_cont(body, scope, counter)),
        Process::Case(c, l, r) => {
            let ch = resolve(c, scope);
            let ls = render_cont(l, scope, counter);
            let rs = render_cont(r, scope, counter);
            format!("case({ch},{ls},{rs})")
        }
    }
}

/// A continuation is rendered as a level so that congruence inside it does
/// not affect the string.
fn render_cont(p: &Process, scope: &Scope, counter: &mut usize) -> String {
    render_level(&Level::collect(p.clone()), scope, counter)
}

/// Orders a level's components (recursively ordering nested levels) and
/// renders it with positional tokens for its binders.
fn render_level(level: &Level, scope: &Scope, counter: &mut usize) -> String {
    let live = level.live_binders();
    let order = order_level(level, &live, scope);
    // Positional tokens for the level's binders, in first-occurrence order
    // over the ordered components.
    let mut s2 = scope.clone();
    for idx in &order {
        for n in occurrence_order(&level.comps[*idx]) {
            if live.contains(&n) && !s2.contains_key(&n) {
                let tok = format!("v{counter}");
                *counter += 1;
                s2.insert(n, tok);
            }
        }
    }
    let parts: Vec<String> = order.iter().map(|i| render_process(&level.comps[*i], &s2, counter)).collect();
    format!("L{}[{}]", live.len(), parts.join("|"))
}

/// Free-name occurrence order by a fixed left-to-right traversal.
fn occurrence_order(p: &Process) -> Vec<Name> {
    fn go(p: &Process, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
        fn touch(n: &Name, bound: &[Name], out: &mut Vec<Name>) {
            if !bound.contains(n) && !out.contains(n) {
                out.push(n.clone());
            }
        }
        match p {
            Process::Nil => {}
            Process::Par(l, r) => {
                go(l, bound, out);
                go(r, bound, out);
            }
            Process::Restrict(x, body) => {
                bound.push(x.clone());
                go(body, bound, out);
                bound.pop();
            }
            Process::Input(c, b, body) | Process::Output(c, b, body) | Process::ReplInput(c, b, body) => {
                touch(c, bound, out);
                bound.push(b.clone());
                go(body, bound, out);
                bound.pop();
            }
            Process::SelectLeft(c, body) | Process::SelectRight(c, body) => {
                touch(c, bound, out);
                go(body, bound, out);
            }
            Process::Case(c, l, r) => {
                touch(c, bound, out);
                go(l, bound, out);
                go(r, bound, out);
            }
        }
    }
    let mut out = Vec::new();
    go(p, &mut Vec::new(), &mut out);
    out
}

/// Iteratively refines ranks for the level's binders, then sorts components
/// by their rendering under the final ranks. Refinement can only split rank
/// classes, so `live.len() + 1` rounds always reach the fixpoint.
fn order_level(level: &Level, live: &BTreeSet<Name>, scope: &Scope) -> Vec<usize> {
    let render_with = |ranks: &HashMap<Name, usize>, slot: Option<&Name>, comp: &Process| -> String {
        let mut s2 = scope.clone();
        for (n, r) in ranks {
            s2.insert(n.clone(), format!("r{r}"));
        }
        if let Some(s) = slot {
            s2.insert(s.clone(), "@".to_string());
        }
        let mut counter = 0usize;
        render_process(comp, &s2, &mut counter)
    };

    let mut ranks: HashMap<Name, usize> = live.iter().map(|b| (b.clone(), 0)).collect();
    for _round in 0..=live.len() {
        let mut signatures: Vec<(Vec<String>, Name)> = live
            .iter()
            .map(|b| {
                let mut sig: Vec<String> = level
                    .comps
                    .iter()
                    .filter(|c| free_names(c).contains(b))
                    .map(|c| render_with(&ranks, Some(b), c))
                    .collect();
                sig.sort();
                // Keep the previous rank in the signature so classes can
                // only ever split.
                (std::iter::once(format!("#{}", ranks[b])).chain(sig).collect(), b.clone())
            })
            .collect();
        signatures.sort();
        let mut new_ranks = HashMap::new();
        let mut rank = 0usize;
        let mut prev: Option<&Vec<String>> = None;
        for (sig, name) in &signatures {
            if let Some(p) = prev {
                if p != sig {
                    rank += 1;
                }
            }
            new_ranks.insert(name.clone(), rank);
            prev = Some(sig);
        }
        let stable = new_ranks == ranks;
        ranks = new_ranks;
        if stable {
            break;
        }
    }

    let mut keyed: Vec<(String, usize)> =
        level.comps.iter().enumerate().map(|(i, c)| (render_with(&ranks, None, c), i)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

// ---------------------------------------------------------------------------
// Pass 2: emit the canonical term, assigning final binder names.

struct Emitter {
    /// Names no fresh binder may take: free names of the input plus every
    /// binder name already assigned.
    assigned: BTreeSet<Name>,
    /// Freshened binder name -> final emitted name. Freshened names are
    /// globally unique, so no scoping is needed here.
    env: HashMap<Name, Name>,
}

impl Emitter {
    fn pick(&mut self, base: &str) -> Name {
        let plain = Name::new(base);
        let name = if self.assigned.contains(&plain) { plain.freshen(&self.assigned) } else { plain };
        self.assigned.insert(name.clone());
        name
    }

    fn bind(&mut self, freshened: &Name) -> Name {
        let final_name = self.pick(&freshened.base);
        self.env.insert(freshened.clone(), final_name.clone());
        final_name
    }

    fn lookup(&self, n: &Name) -> Name {
        self.env.get(n).cloned().unwrap_or_else(|| n.clone())
    }

    /// Tokens for everything already named: emitted binders resolve to their
    /// final name, genuinely free names to themselves.
    fn scope(&self) -> Scope {
        self.env.iter().map(|(from, to)| (from.clone(), format!("f:{to}"))).collect()
    }

    fn emit_level(&mut self, level: Level) -> Process {
        let live = level.live_binders();
        let order = order_level(&level, &live, &self.scope());
        let mut binder_finals: Vec<Name> = Vec::new();
        for idx in &order {
            for n in occurrence_order(&level.comps[*idx]) {
                if live.contains(&n) && !self.env.contains_key(&n) {
                    binder_finals.push(self.bind(&n));
                }
            }
        }
        let comps: Vec<Process> = order.iter().map(|i| self.emit_comp(&level.comps[*i])).collect();
        let body = comps.into_iter().reduce(Process::par).unwrap_or(Process::Nil);
        binder_finals.into_iter().rev().fold(body, |acc, b| Process::restrict(b, acc))
    }

    fn emit_comp(&mut self, p: &Process) -> Process {
        match p {
            Process::Nil => Process::Nil,
            Process::Par(_, _) | Process::Restrict(_, _) => self.emit_level(Level::collect(p.clone())),
            Process::Input(c, b, body) => {
                let c2 = self.lookup(c);
                let b2 = self.bind(b);
                Process::input(c2, b2, self.emit_level(Level::collect((**body).clone())))
            }
            Process::Output(c, b, body) => {
                let c2 = self.lookup(c);
                let b2 = self.bind(b);
                Process::output(c2, b2, self.emit_level(Level::collect((**body).clone())))
            }
            Process::ReplInput(c, b, body) => {
                let c2 = self.lookup(c);
                let b2 = self.bind(b);
                Process::repl(c2, b2, self.emit_level(Level::collect((**body).clone())))
            }
            Process::SelectLeft(c, body) => {
                Process::inl(self.lookup(c), self.emit_level(Level::collect((**body).clone())))
            }
            Process::SelectRight(c, body) => {
                Process::inr(self.lookup(c), self.emit_level(Level::collect((**body).clone())))
            }
            Process::Case(c, l, r) => Process::case(
                self.lookup(c),
                self.emit_level(Level::collect((**l).clone())),
                self.emit_level(Level::collect((**r).clone())),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{alpha_eq, box_depth, size, Process};
    use super::*;

    fn n(s: &str) -> Name {
        Name::new(s)
    }

    fn out(c: &str, b: &str) -> Process {
        Process::output(n(c), n(b), Process::Nil)
    }

    #[test]
    fn axiom_nu_nil() {
        let p = Process::restrict(n("x"), Process::Nil);
        assert_eq!(canonical_form(&p), Process::Nil);
    }

    #[test]
    fn axiom_par_nil_and_comm_assoc() {
        let a = out("a", "u");
        let b = out("b", "v");
        let c = out("c", "w");
        let left = Process::par(Process::par(a.clone(), b.clone()), Process::par(Process::Nil, c.clone()));
        let right = Process::par(c, Process::par(b, a));
        assert!(congruent(&left, &right));
        assert_eq!(size(&canonical_form(&left)), 3);
    }

    #[test]
    fn axiom_scope_extrusion_and_swap() {
        // ((new x)(x<u> | a(v))) | b<w>  ==  (new x)(b<w> | (a(v) | x<u>))
        let p = Process::par(
            Process::restrict(n("x"), Process::par(out("x", "u"), Process::input(n("a"), n("v"), Process::Nil))),
            out("b", "w"),
        );
        let q = Process::restrict(
            n("x"),
            Process::par(out("b", "w"), Process::par(Process::input(n("a"), n("v"), Process::Nil), out("x", "u"))),
        );
        assert!(congruent(&p, &q));
        // and exchanging two restrictions
        let two = Process::restrict(n("x"), Process::restrict(n("y"), Process::par(out("x", "u"), out("y", "v"))));
        let swapped =
            Process::restrict(n("y"), Process::restrict(n("x"), Process::par(out("y", "v"), out("x", "u"))));
        assert!(congruent(&two, &swapped));
    }

    #[test]
    fn dead_binder_is_droppable() {
        // (new x) C = C for x not free in C: derivable from the axioms,
        // and canonical_form normalizes it away.
        let c = out("a", "u");
        let p = Process::restrict(n("x"), c.clone());
        assert!(congruent(&p, &c));
    }

    #[test]
    fn alpha_only_difference_collapses() {
        let p = Process::restrict(n("x"), Process::par(out("x", "u"), Process::input(n("x"), n("w"), Process::Nil)));
        let q = Process::restrict(n("z"), Process::par(out("z", "q"), Process::input(n("z"), n("r"), Process::Nil)));
        assert!(congruent(&p, &q));
    }

    #[test]
    fn non_congruent_stay_apart() {
        // Guarded structure cannot be rearranged: x(y).(P|Q) vs x(y).P | Q
        let p = Process::input(n("x"), n("y"), Process::par(out("a", "u"), out("b", "v")));
        let q = Process::par(Process::input(n("x"), n("y"), out("a", "u")), out("b", "v"));
        assert!(!congruent(&p, &q));
        // Distinct free subjects matter.
        assert!(!congruent(&out("a", "u"), &out("b", "u")));
        // Replication is not erasable by congruence.
        let r = Process::repl(n("x"), n("y"), Process::Nil);
        assert!(!congruent(&r, &Process::Nil));
        // A restriction does not commute into a guard.
        let s = Process::restrict(n("x"), Process::input(n("a"), n("y"), out("x", "u")));
        let t = Process::input(n("a"), n("y"), Process::restrict(n("x"), out("x", "u")));
        assert!(!congruent(&s, &t));
    }

    #[test]
    fn symmetric_components_and_shared_binder() {
        // (new x)(x<a> | x<b>) with the two outputs swapped
        let p = Process::restrict(n("x"), Process::par(out("x", "u"), out("x", "v")));
        let q = Process::restrict(n("x"), Process::par(out("x", "v"), out("x", "u")));
        assert!(congruent(&p, &q));
        // two binders with crossing uses, swapped consistently
        let mk = |first: &str, second: &str| {
            Process::restrict(
                n(first),
                Process::restrict(
                    n(second),
                    Process::par(
                        Process::input(n(first), n("a"), out(second, "b")),
                        Process::input(n(second), n("c"), out(first, "d")),
                    ),
                ),
            )
        };
        assert!(congruent(&mk("s", "t"), &mk("t", "s")));
        // self-use versus cross-use must stay distinct
        let cross = Process::restrict(
            n("x"),
            Process::restrict(
                n("y"),
                Process::par(
                    Process::input(n("x"), n("a"), out("y", "b")),
                    Process::input(n("y"), n("c"), out("x", "d")),
                ),
            ),
        );
        let selfy = Process::restrict(
            n("x"),
            Process::restrict(
                n("y"),
                Process::par(
                    Process::input(n("x"), n("a"), out("x", "b")),
                    Process::input(n("y"), n("c"), out("y", "d")),
                ),
            ),
        );
        assert!(!congruent(&cross, &selfy));
    }

    #[test]
    fn canonical_is_idempotent_and_measure_preserving() {
        let p = Process::par(
            Process::restrict(n("x"), Process::par(out("x", "u"), Process::repl(n("x"), n("y"), out("a", "z")))),
            Process::par(Process::Nil, Process::case(n("c"), out("d", "u"), Process::Nil)),
        );
        let c1 = canonical_form(&p);
        let c2 = canonical_form(&c1);
        assert!(alpha_eq(&c1, &c2));
        assert_eq!(size(&p), size(&c1));
        assert_eq!(box_depth(&p), box_depth(&c1));
        assert_eq!(free_names(&p), free_names(&c1));
    }

    #[test]
    fn congruence_under_a_prefix() {
        // x(y).((new z)(z<a> | 0) | w<b>)  ==  x(y).(w<b> | (new u)(u<a>))
        let p = Process::input(
            n("x"),
            n("y"),
            Process::par(
                Process::restrict(n("z"), Process::par(Process::output(n("z"), n("a"), Process::Nil), Process::Nil)),
                out("w", "b"),
            ),
        );
        let q = Process::input(
            n("x"),
            n("y"),
            Process::par(out("w", "b"), Process::restrict(n("u"), Process::output(n("u"), n("a"), Process::Nil))),
        );
        assert!(congruent(&p, &q));
    }

    #[test]
    fn collect_dead_servers_removes_unreachable_boxes() {
        // (new s)(!s(y).a<u>) with no sender on s: the box is dead.
        let p = Process::restrict(n("s"), Process::repl(n("s"), n("y"), out("a", "u")));
        assert_eq!(collect_dead_servers(&p), Process::Nil);
        // With a pending sender the box stays.
        let q = Process::restrict(n("s"), Process::par(Process::repl(n("s"), n("y"), out("a", "u")), out("s", "v")));
        let kept = collect_dead_servers(&q);
        assert_eq!(size(&kept), size(&canonical_form(&q)));
        // Cascade: server2 is only reachable from server1's body; with no
        // sender at all, both go.
        let cascade = Process::restrict(
            n("s1"),
            Process::restrict(
                n("s2"),
                Process::par(
                    Process::repl(n("s1"), n("y"), out("s2", "z")),
                    Process::repl(n("s2"), n("w"), Process::Nil),
                ),
            ),
        );
        assert_eq!(collect_dead_servers(&cascade), Process::Nil);
    }

    #[test]
    fn free_server_is_never_collected() {
        let p = Process::repl(n("s"), n("y"), Process::Nil);
        assert!(alpha_eq(&collect_dead_servers(&p), &canonical_form(&p)));
    }
}
