//! Query workload: parsing, binding against the catalog, and the
//! query-predicate usage matrix.

mod parser;
mod qp;

use std::fmt::Write as _;
use std::ops::Deref;

pub use parser::parse_workload;
pub use qp::{build_qp_matrix, QpMatrix};

use crate::error::{Error, Result};
use crate::model::{Value, WarehouseMeta};
use crate::predicate::{Atom, Predicate};

/// The 10-query sample workload, in the dialect accepted by [`parse_workload`].
pub const SAMPLE_WORKLOAD: &str = include_str!("../../workloads/sample.xq");
/// The extended benchmark workload.
pub const BENCHMARK_WORKLOAD: &str = include_str!("../../workloads/benchmark.xq");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: String,
    pub frequency: u32,
    /// Conjunctive selection predicates, in order of appearance.
    pub predicate_ids: Vec<String>,
    /// Dimensions joined to the fact variable, in order of appearance.
    pub joined_dimensions: Vec<String>,
    /// Set when the workload is bound.
    pub fact_set_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub queries: Vec<Query>,
    pub predicates: Vec<Predicate>,
}

impl Workload {
    pub fn predicate(&self, id: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.id == id)
    }

    pub fn predicate_index(&self, id: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.id == id)
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.id == id)
    }
}

/// A workload whose predicates were resolved against a catalog: every
/// attribute exists and every literal carries the attribute's type.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundWorkload(Workload);

impl Deref for BoundWorkload {
    type Target = Workload;

    fn deref(&self) -> &Workload {
        &self.0
    }
}

impl BoundWorkload {
    pub fn into_inner(self) -> Workload {
        self.0
    }

    /// The query's predicates as positive atoms.
    pub fn atoms(&self, query: &Query) -> Vec<Atom<'_>> {
        query
            .predicate_ids
            .iter()
            .map(|id| Atom::new(self.predicate(id).expect("bound predicate"), false))
            .collect()
    }
}

/// Resolves predicates against `meta` and types their literals.
///
/// Predicates that become identical after typing (`"15"` and `"015"` on an
/// integer attribute) are merged and ids renumbered by first appearance.
pub fn bind_workload(workload: &Workload, meta: &WarehouseMeta) -> Result<BoundWorkload> {
    let mut typed: Vec<Predicate> = Vec::with_capacity(workload.predicates.len());
    for p in &workload.predicates {
        let query = workload
            .queries
            .iter()
            .find(|q| q.predicate_ids.contains(&p.id))
            .map_or("-", |q| q.id.as_str());
        let bind_err = |message: String| Error::Bind {
            query: query.to_string(),
            predicate: p.id.clone(),
            message,
        };
        let dim = meta
            .dimension(&p.dimension)
            .ok_or_else(|| bind_err(format!("unknown dimension {:?}", p.dimension)))?;
        let (_, attr) = dim.attribute(&p.attribute).ok_or_else(|| {
            bind_err(format!(
                "dimension {:?} has no attribute {:?}",
                p.dimension, p.attribute
            ))
        })?;
        let raw = p.literal.to_string();
        let literal = Value::coerce(&raw, attr.ty).ok_or_else(|| {
            bind_err(format!("literal {raw:?} is not a valid {} for {}", attr.ty, attr.name))
        })?;
        typed.push(Predicate {
            literal,
            ..p.clone()
        });
    }

    let mut predicates: Vec<Predicate> = Vec::new();
    let mut queries = Vec::with_capacity(workload.queries.len());
    for q in &workload.queries {
        let fact_set = meta
            .fact_sets
            .iter()
            .find(|fs| q.joined_dimensions.iter().all(|d| fs.dimension_refs.contains(d)))
            .ok_or_else(|| Error::Bind {
                query: q.id.clone(),
                predicate: "-".into(),
                message: format!(
                    "no fact set references all of {:?}",
                    q.joined_dimensions
                ),
            })?;
        for d in &q.joined_dimensions {
            if meta.dimension(d).is_none() {
                return Err(Error::Bind {
                    query: q.id.clone(),
                    predicate: "-".into(),
                    message: format!("unknown dimension {d:?}"),
                });
            }
        }
        let mut ids = Vec::new();
        for old in &q.predicate_ids {
            let p = &typed[workload.predicate_index(old).expect("parsed predicate")];
            let id = match predicates.iter().find(|e| e.same_condition(p)) {
                Some(e) => e.id.clone(),
                None => {
                    let id = format!("p{}", predicates.len() + 1);
                    predicates.push(Predicate {
                        id: id.clone(),
                        ..p.clone()
                    });
                    id
                }
            };
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        queries.push(Query {
            predicate_ids: ids,
            fact_set_id: Some(fact_set.id.clone()),
            ..q.clone()
        });
    }
    Ok(BoundWorkload(Workload {
        queries,
        predicates,
    }))
}

const VARIABLES: [&str; 6] = ["y", "z", "t", "u", "v", "w"];

fn variable(i: usize) -> String {
    VARIABLES
        .get(i)
        .map(|v| v.to_string())
        .unwrap_or_else(|| format!("d{i}"))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Parses the workload file at `path`.
pub fn read_workload(path: impl AsRef<std::path::Path>) -> Result<Workload> {
    parse_workload(&crate::store::read_file(path.as_ref())?)
}

/// Renders a workload back into the dialect accepted by [`parse_workload`].
pub fn render_workload(workload: &Workload) -> String {
    let mut out = String::new();
    for (n, q) in workload.queries.iter().enumerate() {
        if n > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "(: id={} freq={} :)", q.id, q.frequency);
        out.push_str("for $x in //FactDoc/Fact");
        for (i, d) in q.joined_dimensions.iter().enumerate() {
            let _ = write!(
                out,
                ",\n    ${} in //dimension[@dim-id={}]/Level/instance",
                variable(i),
                quote(d)
            );
        }
        out.push('\n');
        let mut conditions = Vec::new();
        for id in &q.predicate_ids {
            let p = workload.predicate(id).expect("query predicate exists");
            let var = q
                .joined_dimensions
                .iter()
                .position(|d| *d == p.dimension)
                .map(variable)
                .expect("predicate dimension is joined");
            conditions.push(format!(
                "${var}/attribute[@id={}]/@value{}{}",
                quote(&p.attribute),
                p.comparator,
                quote(&p.literal.to_string())
            ));
        }
        for (i, d) in q.joined_dimensions.iter().enumerate() {
            conditions.push(format!(
                "$x/dimension[@dim-id={}]/@value-id=${}/@id",
                quote(d),
                variable(i)
            ));
        }
        if !conditions.is_empty() {
            let _ = writeln!(out, "where {}", conditions.join("\n  and "));
        }
        out.push_str("return $x\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::xweb_meta;
    use crate::predicate::Comparator;

    fn sample() -> BoundWorkload {
        let w = parse_workload(SAMPLE_WORKLOAD).unwrap();
        bind_workload(&w, &xweb_meta()).unwrap()
    }

    #[test]
    fn sample_q2_uses_p2_and_p3() {
        let w = sample();
        let q2 = w.query("q2").unwrap();
        assert_eq!(q2.predicate_ids, vec!["p2", "p3"]);
        assert_eq!(q2.joined_dimensions, vec!["Customer", "Part"]);
        assert_eq!(q2.fact_set_id.as_deref(), Some("sales"));
        assert_eq!(w.predicates.len(), 4);
    }

    #[test]
    fn literals_are_typed() {
        let w = sample();
        let p1 = w.predicate("p1").unwrap();
        assert_eq!(p1.literal, Value::Int(15));
        assert_eq!(p1.comparator, Comparator::Gt);
        assert_eq!(w.predicate("p4").unwrap().literal, Value::Str("Sat.".into()));
    }

    fn one(cond: &str, dim: &str) -> String {
        format!(
            "for $x in //FactDoc/Fact, $y in //dimension[@dim-id=\"{dim}\"]/Level/instance \
             where $y/{cond} and $x/dimension[@dim-id=\"{dim}\"]/@value-id=$y/@id return $x"
        )
    }

    #[test]
    fn unknown_attribute_is_a_bind_error() {
        let w = parse_workload(&one("attribute[@id=\"nope\"]/@value=\"1\"", "Customer")).unwrap();
        let err = bind_workload(&w, &xweb_meta()).unwrap_err();
        assert!(matches!(err, Error::Bind { ref query, ref predicate, .. } if query == "q1" && predicate == "p1"));
    }

    #[test]
    fn unknown_dimension_is_a_bind_error() {
        let w = parse_workload(&one("attribute[@id=\"a\"]/@value=\"1\"", "Store")).unwrap();
        assert!(matches!(bind_workload(&w, &xweb_meta()), Err(Error::Bind { .. })));
    }

    #[test]
    fn uncoercible_literal_is_a_bind_error() {
        let w = parse_workload(&one("attribute[@id=\"c_acctbal\"]/@value>\"abc\"", "Customer"))
            .unwrap();
        let err = bind_workload(&w, &xweb_meta()).unwrap_err();
        assert!(err.to_string().contains("not a valid decimal"), "{err}");
    }

    #[test]
    fn equal_after_typing_are_merged() {
        let a = one("attribute[@id=\"c_nation_key\"]/@value=\"15\"", "Customer");
        let b = one("attribute[@id=\"c_nation_key\"]/@value=\"015\"", "Customer");
        let w = parse_workload(&format!("{a}\n{b}")).unwrap();
        assert_eq!(w.predicates.len(), 2);
        let bound = bind_workload(&w, &xweb_meta()).unwrap();
        assert_eq!(bound.predicates.len(), 1);
        assert_eq!(bound.queries[1].predicate_ids, vec!["p1"]);
    }

    #[test]
    fn render_then_parse_is_identity() {
        for text in [SAMPLE_WORKLOAD, BENCHMARK_WORKLOAD] {
            let bound = bind_workload(&parse_workload(text).unwrap(), &xweb_meta()).unwrap();
            let again = parse_workload(&render_workload(&bound)).unwrap();
            assert_eq!(bind_workload(&again, &xweb_meta()).unwrap(), bound);
        }
    }
}
