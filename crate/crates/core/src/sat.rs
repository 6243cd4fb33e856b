//! Satisfiability of conjunctions of unary predicates.
//!
//! Attributes are independent, so a conjunction is satisfiable iff each
//! attribute's share of it is. Integers are reasoned about exactly with an
//! interval plus excluded points. Decimals and strings are treated as dense
//! orders; for strings that over-approximates (nothing lies between `"a"` and
//! `"a\0"`), which only ever keeps a fragment that could have been pruned.
//!
//! An instance may lack an attribute. A missing value fails every positive
//! atom and passes every negated one, so an attribute constrained only by
//! negated atoms is always satisfiable.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::Value;
use crate::predicate::{Atom, Comparator};

/// Default node budget for [`check_excluding`].
pub const DEFAULT_BUDGET: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sat {
    Sat,
    Unsat,
    /// The search budget ran out.
    Unknown,
}

type Key<'a> = (&'a str, &'a str);

fn key<'a>(a: &Atom<'a>) -> Key<'a> {
    (a.predicate.dimension.as_str(), a.predicate.attribute.as_str())
}

/// Whether the conjunction of `atoms` can hold for some instance.
pub fn satisfiable(atoms: &[Atom]) -> Result<bool> {
    let mut groups: BTreeMap<Key, Vec<&Atom>> = BTreeMap::new();
    for a in atoms {
        groups.entry(key(a)).or_default().push(a);
    }
    for group in groups.values() {
        if !group_satisfiable(group)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn group_satisfiable(group: &[&Atom]) -> Result<bool> {
    let Some(first) = group.first() else {
        return Ok(true);
    };
    let ty = first.predicate.literal.ty();
    if let Some(other) = group.iter().find(|a| a.predicate.literal.ty() != ty) {
        return Err(Error::Type(format!(
            "{}.{} is compared with both {} and {} literals",
            first.predicate.dimension,
            first.predicate.attribute,
            ty,
            other.predicate.literal.ty()
        )));
    }
    if group.iter().all(|a| a.negated) {
        return Ok(true);
    }
    Ok(match &first.predicate.literal {
        Value::Int(_) => integer_satisfiable(group),
        _ => dense_satisfiable(group),
    })
}

fn integer_satisfiable(group: &[&Atom]) -> bool {
    let mut lo = i64::MIN as i128;
    let mut hi = i64::MAX as i128;
    let mut eq: Option<i128> = None;
    let mut excluded = Vec::new();
    for a in group {
        let Value::Int(v) = a.predicate.literal else {
            unreachable!("group is type-checked")
        };
        let v = v as i128;
        match a.effective_comparator() {
            Comparator::Eq => {
                if eq.is_some_and(|e| e != v) {
                    return false;
                }
                eq = Some(v);
            }
            Comparator::Ne => excluded.push(v),
            Comparator::Lt => hi = hi.min(v - 1),
            Comparator::Le => hi = hi.min(v),
            Comparator::Gt => lo = lo.max(v + 1),
            Comparator::Ge => lo = lo.max(v),
        }
    }
    if let Some(e) = eq {
        return lo <= e && e <= hi && !excluded.contains(&e);
    }
    if lo > hi {
        return false;
    }
    excluded.sort_unstable();
    excluded.dedup();
    let holes = excluded.iter().filter(|&&x| lo <= x && x <= hi).count() as i128;
    hi - lo + 1 > holes
}

/// One end of an interval: the value and whether it is excluded.
#[derive(Clone)]
struct Bound {
    value: Value,
    strict: bool,
}

fn cmp(a: &Value, b: &Value) -> Ordering {
    a.compare(b).expect("same-typed finite values are comparable")
}

fn dense_satisfiable(group: &[&Atom]) -> bool {
    // The empty string is the least string.
    let mut lo: Option<Bound> = match group[0].predicate.literal {
        Value::Str(_) => Some(Bound {
            value: Value::Str(String::new()),
            strict: false,
        }),
        _ => None,
    };
    let mut hi: Option<Bound> = None;
    let mut eq: Option<&Value> = None;
    let mut excluded: Vec<&Value> = Vec::new();

    let tighten_lo = |lo: &mut Option<Bound>, value: &Value, strict: bool| {
        let replace = match lo {
            None => true,
            Some(b) => match cmp(value, &b.value) {
                Ordering::Greater => true,
                Ordering::Equal => strict && !b.strict,
                Ordering::Less => false,
            },
        };
        if replace {
            *lo = Some(Bound {
                value: value.clone(),
                strict,
            });
        }
    };
    let tighten_hi = |hi: &mut Option<Bound>, value: &Value, strict: bool| {
        let replace = match hi {
            None => true,
            Some(b) => match cmp(value, &b.value) {
                Ordering::Less => true,
                Ordering::Equal => strict && !b.strict,
                Ordering::Greater => false,
            },
        };
        if replace {
            *hi = Some(Bound {
                value: value.clone(),
                strict,
            });
        }
    };

    for a in group {
        let v = &a.predicate.literal;
        match a.effective_comparator() {
            Comparator::Eq => {
                if eq.is_some_and(|e| cmp(e, v) != Ordering::Equal) {
                    return false;
                }
                eq = Some(v);
            }
            Comparator::Ne => excluded.push(v),
            Comparator::Lt => tighten_hi(&mut hi, v, true),
            Comparator::Le => tighten_hi(&mut hi, v, false),
            Comparator::Gt => tighten_lo(&mut lo, v, true),
            Comparator::Ge => tighten_lo(&mut lo, v, false),
        }
    }

    let above = |x: &Value| {
        lo.as_ref().is_none_or(|b| match cmp(x, &b.value) {
            Ordering::Greater => true,
            Ordering::Equal => !b.strict,
            Ordering::Less => false,
        })
    };
    let below = |x: &Value| {
        hi.as_ref().is_none_or(|b| match cmp(x, &b.value) {
            Ordering::Less => true,
            Ordering::Equal => !b.strict,
            Ordering::Greater => false,
        })
    };
    let is_excluded = |x: &Value| excluded.iter().any(|e| cmp(e, x) == Ordering::Equal);

    if let Some(e) = eq {
        return above(e) && below(e) && !is_excluded(e);
    }
    match (&lo, &hi) {
        (Some(l), Some(h)) => match cmp(&l.value, &h.value) {
            // A nonempty open interval of a dense order is infinite.
            Ordering::Less => true,
            Ordering::Equal => !l.strict && !h.strict && !is_excluded(&l.value),
            Ordering::Greater => false,
        },
        _ => true,
    }
}

/// A smallest-effort unsatisfiable subset of `atoms`, found by deleting
/// atoms one at a time while the rest stays unsatisfiable. `None` when the
/// conjunction is satisfiable.
pub fn conflict<'a>(atoms: &[Atom<'a>]) -> Result<Option<Vec<Atom<'a>>>> {
    if satisfiable(atoms)? {
        return Ok(None);
    }
    let mut core: Vec<Atom<'a>> = atoms.to_vec();
    let mut i = 0;
    while i < core.len() {
        let mut without = core.clone();
        without.remove(i);
        if satisfiable(&without)? {
            i += 1;
        } else {
            core = without;
        }
    }
    Ok(Some(core))
}

/// Decides `base ∧ ¬c1 ∧ … ∧ ¬cm` where each `ci` is a conjunction.
///
/// Each `¬ci` is a clause of negated atoms. The search picks one atom per
/// clause, always branching on the open clause with the fewest choices left
/// and dropping clauses the current choice already falsifies. A `ci` with no
/// atoms is the constant true, so its negation makes the formula
/// unsatisfiable. Returns [`Sat::Unknown`] once more than `budget` search
/// nodes were visited.
pub fn check_excluding(base: &[Atom], excluded: &[Vec<Atom>], budget: usize) -> Result<Sat> {
    if !satisfiable(base)? {
        return Ok(Sat::Unsat);
    }
    if excluded.iter().any(Vec::is_empty) {
        return Ok(Sat::Unsat);
    }
    let clauses: Vec<&[Atom]> = excluded.iter().map(Vec::as_slice).collect();
    let mut search = Search {
        stack: base.to_vec(),
        nodes: 0,
        budget,
    };
    search.go(&clauses)
}

struct Search<'a> {
    stack: Vec<Atom<'a>>,
    nodes: usize,
    budget: usize,
}

impl<'a> Search<'a> {
    fn consistent_with(&self, extra: &[Atom<'a>]) -> Result<bool> {
        let mut keys: Vec<Key> = extra.iter().map(key).collect();
        keys.sort_unstable();
        keys.dedup();
        for k in keys {
            let group: Vec<&Atom> = self
                .stack
                .iter()
                .chain(extra)
                .filter(|a| key(a) == k)
                .collect();
            if !group_satisfiable(&group)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn go(&mut self, clauses: &[&[Atom<'a>]]) -> Result<Sat> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Ok(Sat::Unknown);
        }
        // Conjunctions already false under the stack need no further choice.
        let mut open: Vec<(&[Atom<'a>], Vec<Atom<'a>>)> = Vec::new();
        for &c in clauses {
            if !self.consistent_with(c)? {
                continue;
            }
            let mut choices = Vec::new();
            for a in c {
                let n = a.negate();
                if self.consistent_with(std::slice::from_ref(&n))? {
                    choices.push(n);
                }
            }
            if choices.is_empty() {
                return Ok(Sat::Unsat);
            }
            open.push((c, choices));
        }
        let Some(pick) = (0..open.len()).min_by_key(|&i| open[i].1.len()) else {
            return Ok(Sat::Sat);
        };
        let (_, choices) = open.swap_remove(pick);
        let rest: Vec<&[Atom<'a>]> = open.iter().map(|(c, _)| *c).collect();
        let mut unknown = false;
        for n in choices {
            self.stack.push(n);
            let r = self.go(&rest)?;
            self.stack.pop();
            match r {
                Sat::Sat => return Ok(Sat::Sat),
                Sat::Unknown => unknown = true,
                Sat::Unsat => {}
            }
        }
        Ok(if unknown { Sat::Unknown } else { Sat::Unsat })
    }
}
