//! Atomic selection predicates and their (possibly negated) occurrences.

use std::cmp::Ordering;
use std::fmt;

use crate::model::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Comparator::ALL.into_iter().find(|c| c.symbol() == s)
    }

    /// The comparator `c'` with `¬(x c v) ⇔ x c' v` over a total order.
    pub fn complement(self) -> Self {
        match self {
            Comparator::Eq => Comparator::Ne,
            Comparator::Ne => Comparator::Eq,
            Comparator::Lt => Comparator::Ge,
            Comparator::Le => Comparator::Gt,
            Comparator::Gt => Comparator::Le,
            Comparator::Ge => Comparator::Lt,
        }
    }

    /// Whether `ord = value.cmp(literal)` satisfies the comparator.
    pub fn accepts(self, ord: Ordering) -> bool {
        match self {
            Comparator::Eq => ord == Ordering::Equal,
            Comparator::Ne => ord != Ordering::Equal,
            Comparator::Lt => ord == Ordering::Less,
            Comparator::Le => ord != Ordering::Greater,
            Comparator::Gt => ord == Ordering::Greater,
            Comparator::Ge => ord != Ordering::Less,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `dimension.attribute comparator literal`, e.g. `Customer.c_nation_key > 15`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub id: String,
    pub dimension: String,
    pub attribute: String,
    pub comparator: Comparator,
    pub literal: Value,
}

impl Predicate {
    /// Evaluates against an attribute value. A missing value or a value of
    /// another type never satisfies the predicate.
    pub fn matches(&self, value: Option<&Value>) -> bool {
        value
            .and_then(|v| v.compare(&self.literal))
            .is_some_and(|ord| self.comparator.accepts(ord))
    }

    pub fn same_condition(&self, other: &Predicate) -> bool {
        self.dimension == other.dimension
            && self.attribute == other.attribute
            && self.comparator == other.comparator
            && self.literal == other.literal
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{} {} \"{}\"",
            self.dimension, self.attribute, self.comparator, self.literal
        )
    }
}

/// A predicate occurrence inside a fragment definition: `p` or `¬p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredicateRef {
    pub id: String,
    pub negated: bool,
}

impl PredicateRef {
    pub fn positive(id: impl Into<String>) -> Self {
        PredicateRef {
            id: id.into(),
            negated: false,
        }
    }

    pub fn negative(id: impl Into<String>) -> Self {
        PredicateRef {
            id: id.into(),
            negated: true,
        }
    }
}

impl fmt::Display for PredicateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "¬{}", self.id)
        } else {
            f.write_str(&self.id)
        }
    }
}

/// Resolved occurrence used by evaluation and satisfiability checks.
#[derive(Debug, Clone, Copy)]
pub struct Atom<'a> {
    pub predicate: &'a Predicate,
    pub negated: bool,
}

impl<'a> Atom<'a> {
    pub fn new(predicate: &'a Predicate, negated: bool) -> Self {
        Atom { predicate, negated }
    }

    pub fn negate(self) -> Self {
        Atom {
            predicate: self.predicate,
            negated: !self.negated,
        }
    }

    /// Comparator after pushing the negation inside.
    pub fn effective_comparator(&self) -> Comparator {
        if self.negated {
            self.predicate.comparator.complement()
        } else {
            self.predicate.comparator
        }
    }

    pub fn matches(&self, value: Option<&Value>) -> bool {
        self.predicate.matches(value) != self.negated
    }
}

impl fmt::Display for Atom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "¬({})", self.predicate)
        } else {
            write!(f, "{}", self.predicate)
        }
    }
}

/// Natural ordering of ids such as `p2 < p10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (head, tail) = s.split_at(s.len() - digits);
        (head, tail.parse().ok())
    }
    let (ha, na) = split(a);
    let (hb, nb) = split(b);
    ha.cmp(hb).then(na.cmp(&nb)).then(a.cmp(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(cmp: Comparator, v: i64) -> Predicate {
        Predicate {
            id: "p".into(),
            dimension: "Customer".into(),
            attribute: "x".into(),
            comparator: cmp,
            literal: Value::Int(v),
        }
    }

    #[test]
    fn complement_is_logical_negation() {
        for cmp in Comparator::ALL {
            let p = pred(cmp, 5);
            for x in 0..10 {
                let v = Value::Int(x);
                assert_eq!(
                    Atom::new(&p, true).matches(Some(&v)),
                    pred(cmp.complement(), 5).matches(Some(&v))
                );
            }
        }
    }

    #[test]
    fn missing_value_fails_positive_and_passes_negated() {
        let p = pred(Comparator::Gt, 15);
        assert!(!Atom::new(&p, false).matches(None));
        assert!(Atom::new(&p, true).matches(None));
    }

    #[test]
    fn natural_order() {
        let mut ids = vec!["p10", "p2", "p1", "f3", "p21"];
        ids.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(ids, vec!["f3", "p1", "p2", "p10", "p21"]);
    }
}
