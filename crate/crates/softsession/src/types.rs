//! Session types and typing contexts.
//!
//! Types are atom-free: the only base type is the terminated session `1`,
//! an abstraction for arbitrary ground sessions. A judgment carries three
//! zones: the auxiliary context (split multiplicatively between premises,
//! each name used once), the multiplexor context (shared additively, names
//! reusable), and the linear context (each name used exactly once).

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::calculus::Name;

/// A session type: `1 | A * B | A -o B | A + B | A & B | !A`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    One,
    Tensor(Box<Type>, Box<Type>),
    Lolli(Box<Type>, Box<Type>),
    Plus(Box<Type>, Box<Type>),
    With(Box<Type>, Box<Type>),
    Bang(Box<Type>),
}

impl Type {
    pub fn tensor(a: Type, b: Type) -> Type {
        Type::Tensor(Box::new(a), Box::new(b))
    }
    pub fn lolli(a: Type, b: Type) -> Type {
        Type::Lolli(Box::new(a), Box::new(b))
    }
    pub fn plus(a: Type, b: Type) -> Type {
        Type::Plus(Box::new(a), Box::new(b))
    }
    pub fn with(a: Type, b: Type) -> Type {
        Type::With(Box::new(a), Box::new(b))
    }
    pub fn bang(a: Type) -> Type {
        Type::Bang(Box::new(a))
    }
}

/// Nesting depth of `!` inside a type.
pub fn type_depth(a: &Type) -> usize {
    match a {
        Type::One => 0,
        Type::Tensor(l, r) | Type::Lolli(l, r) | Type::Plus(l, r) | Type::With(l, r) => {
            type_depth(l).max(type_depth(r))
        }
        Type::Bang(inner) => type_depth(inner) + 1,
    }
}

/// Structural equality (no commutativity or other identifications).
pub fn type_equal(a: &Type, b: &Type) -> bool {
    a == b
}

// Rendering uses the minimal parenthesization the concrete grammar allows:
// `!` binds tightest; `*`, `+`, `&` share one precedence level and associate
// to the left, with parentheses required between different connectives;
// `-o` is loosest and associates to the right.
#[derive(Clone, Copy, PartialEq)]
enum TypePos {
    /// Anything may appear bare (top level, or right of `-o`).
    Open,
    /// Left of `-o`: chains are fine, a nested `-o` needs parentheses.
    LolliLeft,
    /// Left operand of the given chain connective.
    ChainLeft(char),
    /// Operand of `!` or right operand of a chain connective.
    Atom,
}

fn fmt_type(t: &Type, f: &mut fmt::Formatter<'_>, pos: TypePos) -> fmt::Result {
    let chain = |f: &mut fmt::Formatter<'_>, op: char, l: &Type, r: &Type, pos: TypePos| {
        let bare = matches!(pos, TypePos::Open | TypePos::LolliLeft) || pos == TypePos::ChainLeft(op);
        if !bare {
            write!(f, "(")?;
        }
        fmt_type(l, f, TypePos::ChainLeft(op))?;
        write!(f, " {op} ")?;
        fmt_type(r, f, TypePos::Atom)?;
        if !bare {
            write!(f, ")")?;
        }
        Ok(())
    };
    match t {
        Type::One => write!(f, "1"),
        Type::Bang(inner) => {
            write!(f, "!")?;
            fmt_type(inner, f, TypePos::Atom)
        }
        Type::Tensor(l, r) => chain(f, '*', l, r, pos),
        Type::Plus(l, r) => chain(f, '+', l, r, pos),
        Type::With(l, r) => chain(f, '&', l, r, pos),
        Type::Lolli(l, r) => {
            let bare = pos == TypePos::Open;
            if !bare {
                write!(f, "(")?;
            }
            fmt_type(l, f, TypePos::LolliLeft)?;
            write!(f, " -o ")?;
            fmt_type(r, f, TypePos::Open)?;
            if !bare {
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_type(self, f, TypePos::Open)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("{name} is already bound in this zone")]
    DuplicateName { name: Name },
    #[error("{name} is bound in two zones")]
    ZoneOverlap { name: Name },
    #[error("subject {name} also appears in the context")]
    SubjectInContext { name: Name },
}

/// One typing zone: a name-to-type map that keeps insertion order for
/// deterministic splitting and messages, but compares as a set.
#[derive(Clone, Debug, Default, Eq)]
pub struct Zone {
    entries: IndexMap<Name, Type>,
}

impl Zone {
    pub fn new() -> Zone {
        Zone::default()
    }

    pub fn try_from_pairs(pairs: impl IntoIterator<Item = (Name, Type)>) -> Result<Zone, ContextError> {
        let mut zone = Zone::new();
        for (name, ty) in pairs {
            zone.insert(name, ty)?;
        }
        Ok(zone)
    }

    pub fn insert(&mut self, name: Name, ty: Type) -> Result<(), ContextError> {
        if self.entries.contains_key(&name) {
            return Err(ContextError::DuplicateName { name });
        }
        self.entries.insert(name, ty);
        Ok(())
    }

    pub fn get(&self, name: &Name) -> Option<&Type> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains_key(name)
    }

    /// Removes and returns the binding, preserving the order of the rest.
    pub fn remove(&mut self, name: &Name) -> Option<Type> {
        self.entries.shift_remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Type)> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Union of two zones with disjoint domains.
    pub fn disjoint_union(&self, other: &Zone) -> Result<Zone, ContextError> {
        let mut out = self.clone();
        for (name, ty) in other.iter() {
            if out.contains(name) {
                return Err(ContextError::ZoneOverlap { name: name.clone() });
            }
            out.entries.insert(name.clone(), ty.clone());
        }
        Ok(out)
    }

    /// Union where a shared name is fine if it carries the same type.
    pub fn merge_agreeing(&self, other: &Zone) -> Result<Zone, ContextError> {
        let mut out = self.clone();
        for (name, ty) in other.iter() {
            match out.get(name) {
                Some(existing) if existing == ty => {}
                Some(_) => return Err(ContextError::ZoneOverlap { name: name.clone() }),
                None => {
                    out.entries.insert(name.clone(), ty.clone());
                }
            }
        }
        Ok(out)
    }

    fn max_depth(&self) -> usize {
        self.entries.values().map(type_depth).max().unwrap_or(0)
    }
}

impl PartialEq for Zone {
    fn eq(&self, other: &Zone) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().all(|(name, ty)| other.entries.get(name) == Some(ty))
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "-");
        }
        let mut first = true;
        for (name, ty) in self.iter() {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{name}: {ty}")?;
        }
        Ok(())
    }
}

/// The three zones of a judgment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContextTriple {
    pub auxiliary: Zone,
    pub multiplexor: Zone,
    pub linear: Zone,
}

impl ContextTriple {
    pub fn new(auxiliary: Zone, multiplexor: Zone, linear: Zone) -> Result<ContextTriple, ContextError> {
        let triple = ContextTriple { auxiliary, multiplexor, linear };
        triple.check_disjoint()?;
        Ok(triple)
    }

    pub fn empty() -> ContextTriple {
        ContextTriple::default()
    }

    fn check_disjoint(&self) -> Result<(), ContextError> {
        for name in self.auxiliary.names() {
            if self.multiplexor.contains(name) || self.linear.contains(name) {
                return Err(ContextError::ZoneOverlap { name: name.clone() });
            }
        }
        for name in self.multiplexor.names() {
            if self.linear.contains(name) {
                return Err(ContextError::ZoneOverlap { name: name.clone() });
            }
        }
        Ok(())
    }

    pub fn binds(&self, name: &Name) -> bool {
        self.auxiliary.contains(name) || self.multiplexor.contains(name) || self.linear.contains(name)
    }
}

/// Maximum `!`-depth over every type in the triple.
pub fn context_depth(c: &ContextTriple) -> usize {
    c.auxiliary.max_depth().max(c.multiplexor.max_depth()).max(c.linear.max_depth())
}

/// `Γ; Δ; Θ ⊢ x : A` without its process, which lives in the derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Judgment {
    pub contexts: ContextTriple,
    pub subject: Name,
    pub ty: Type,
}

impl Judgment {
    pub fn new(contexts: ContextTriple, subject: Name, ty: Type) -> Result<Judgment, ContextError> {
        if contexts.binds(&subject) {
            return Err(ContextError::SubjectInContext { name: subject });
        }
        Ok(Judgment { contexts, subject, ty })
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}; {}; {} |- {}: {}",
            self.contexts.auxiliary, self.contexts.multiplexor, self.contexts.linear, self.subject, self.ty
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::new(s)
    }

    #[test]
    fn depth_oracles() {
        assert_eq!(type_depth(&Type::One), 0);
        assert_eq!(type_depth(&Type::bang(Type::One)), 1);
        // !(!1 * 1) -o !!1: both sides nest two bangs
        let t = Type::lolli(
            Type::bang(Type::tensor(Type::bang(Type::One), Type::One)),
            Type::bang(Type::bang(Type::One)),
        );
        assert_eq!(type_depth(&t), 2);
        assert_eq!(type_depth(&Type::bang(Type::bang(Type::bang(Type::One)))), 3);
        // binary connectives take the max of their children
        assert_eq!(type_depth(&Type::with(Type::bang(Type::One), Type::One)), 1);
    }

    #[test]
    fn context_depth_oracles() {
        assert_eq!(context_depth(&ContextTriple::empty()), 0);
        let mut aux = Zone::new();
        aux.insert(n("x"), Type::bang(Type::One)).unwrap();
        let c = ContextTriple::new(aux, Zone::new(), Zone::new()).unwrap();
        assert_eq!(context_depth(&c), 1);
        let theta = Zone::try_from_pairs([
            (n("x"), Type::One),
            (n("y"), Type::tensor(Type::One, Type::One)),
        ])
        .unwrap();
        let c = ContextTriple::new(Zone::new(), Zone::new(), theta).unwrap();
        assert_eq!(context_depth(&c), 0);
    }

    #[test]
    fn equality_is_structural() {
        let a = Type::tensor(Type::One, Type::bang(Type::One));
        let b = Type::tensor(Type::bang(Type::One), Type::One);
        assert!(type_equal(&a, &a.clone()));
        assert!(!type_equal(&a, &b), "no commutativity at the syntax level");
    }

    #[test]
    fn display_minimal_parens() {
        let one = || Type::One;
        let bone = || Type::bang(Type::One);
        assert_eq!(Type::tensor(one(), one()).to_string(), "1 * 1");
        // left-associative chains drop parentheses, right nesting keeps them
        let left = Type::with(Type::with(one(), bone()), one());
        assert_eq!(left.to_string(), "1 & !1 & 1");
        let right = Type::with(one(), Type::with(bone(), one()));
        assert_eq!(right.to_string(), "1 & (!1 & 1)");
        // mixing connectives always parenthesizes
        let mixed = Type::plus(Type::tensor(one(), one()), one());
        assert_eq!(mixed.to_string(), "(1 * 1) + 1");
        // lolli is loosest and right-associative
        let lolli = Type::lolli(Type::tensor(one(), one()), Type::lolli(one(), one()));
        assert_eq!(lolli.to_string(), "1 * 1 -o 1 -o 1");
        let nested_left = Type::lolli(Type::lolli(one(), one()), one());
        assert_eq!(nested_left.to_string(), "(1 -o 1) -o 1");
        // bang binds tightest
        assert_eq!(Type::bang(Type::bang(one())).to_string(), "!!1");
        assert_eq!(Type::bang(Type::tensor(one(), one())).to_string(), "!(1 * 1)");
        assert_eq!(Type::tensor(bone(), bone()).to_string(), "!1 * !1");
    }

    #[test]
    fn zones_reject_duplicates_and_compare_as_sets() {
        let mut z = Zone::new();
        z.insert(n("x"), Type::One).unwrap();
        assert!(matches!(
            z.insert(n("x"), Type::bang(Type::One)),
            Err(ContextError::DuplicateName { .. })
        ));
        let a = Zone::try_from_pairs([(n("x"), Type::One), (n("y"), Type::bang(Type::One))]).unwrap();
        let b = Zone::try_from_pairs([(n("y"), Type::bang(Type::One)), (n("x"), Type::One)]).unwrap();
        assert_eq!(a, b, "zone equality ignores insertion order");
        // but iteration respects it
        let firsts: Vec<&Name> = a.names().collect();
        assert_eq!(firsts, vec![&n("x"), &n("y")]);
    }

    #[test]
    fn triples_enforce_disjointness() {
        let aux = Zone::try_from_pairs([(n("x"), Type::One)]).unwrap();
        let lin = Zone::try_from_pairs([(n("x"), Type::One)]).unwrap();
        assert!(matches!(
            ContextTriple::new(aux.clone(), Zone::new(), lin),
            Err(ContextError::ZoneOverlap { .. })
        ));
        let c = ContextTriple::new(aux, Zone::new(), Zone::new()).unwrap();
        assert!(matches!(
            Judgment::new(c, n("x"), Type::One),
            Err(ContextError::SubjectInContext { .. })
        ));
    }

    #[test]
    fn zone_unions() {
        let a = Zone::try_from_pairs([(n("x"), Type::One)]).unwrap();
        let b = Zone::try_from_pairs([(n("y"), Type::One)]).unwrap();
        let u = a.disjoint_union(&b).unwrap();
        assert_eq!(u.len(), 2);
        assert!(a.disjoint_union(&a).is_err());
        // merge allows agreeing duplicates, rejects conflicts
        assert_eq!(a.merge_agreeing(&a).unwrap(), a);
        let conflicting = Zone::try_from_pairs([(n("x"), Type::bang(Type::One))]).unwrap();
        assert!(a.merge_agreeing(&conflicting).is_err());
    }
}
