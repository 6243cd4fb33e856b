//! Fragmentation schemas and the three ways of deriving them: k-means
//! clustering of the query-predicate matrix (KM), minterm predicate
//! construction (PC) and affinity-based grouping (AB).

mod ab;
mod km;
mod pc;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub use ab::{ab_groups, ab_schema, affinity_matrix, AffinityMatrix};
pub use km::km_schema;
pub use pc::{dimension_minterms, pc_schema, PC_PREDICATE_LIMIT};

use crate::error::{Error, Result};
use crate::predicate::{Atom, Predicate, PredicateRef};
use crate::workload::{build_qp_matrix, BoundWorkload};
use crate::xml::{parse_document, XmlWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Km,
    Pc,
    Ab,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Km, Strategy::Pc, Strategy::Ab];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Km => "KM",
            Strategy::Pc => "PC",
            Strategy::Ab => "AB",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "km" => Ok(Strategy::Km),
            "pc" => Ok(Strategy::Pc),
            "ab" => Ok(Strategy::Ab),
            _ => Err(Error::Parameter(format!(
                "unknown strategy {s:?} (expected km, pc or ab)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentDef {
    pub id: String,
    /// Conjunctive predicates grouped by dimension, in schema order.
    pub dimensions: Vec<(String, Vec<PredicateRef>)>,
    pub is_else: bool,
}

impl FragmentDef {
    pub fn predicate_refs(&self) -> impl Iterator<Item = &PredicateRef> {
        self.dimensions.iter().flat_map(|(_, refs)| refs)
    }

    /// The fragment's conjunction resolved against `predicates`.
    pub fn atoms<'a>(&self, predicates: &'a [Predicate]) -> Result<Vec<Atom<'a>>> {
        self.predicate_refs()
            .map(|r| {
                predicates
                    .iter()
                    .find(|p| p.id == r.id)
                    .map(|p| Atom::new(p, r.negated))
                    .ok_or_else(|| {
                        Error::Consistency(format!(
                            "fragment {} references unknown predicate {}",
                            self.id, r.id
                        ))
                    })
            })
            .collect()
    }
}

/// Ordered fragment definitions; the last one is always ELSE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragSchema {
    pub strategy: Strategy,
    pub fragments: Vec<FragmentDef>,
    /// Set when the other fragments are complete by construction, so ELSE
    /// can hold nothing.
    pub else_empty: bool,
}

impl FragSchema {
    /// Numbers `groups` f1, f2, … and appends ELSE. Within a fragment,
    /// dimensions appear in the order of their first predicate and
    /// predicates in workload order.
    pub fn from_groups(
        strategy: Strategy,
        groups: Vec<Vec<PredicateRef>>,
        predicates: &[Predicate],
        else_empty: bool,
    ) -> Result<Self> {
        let mut fragments = Vec::with_capacity(groups.len() + 1);
        for (i, mut group) in groups.into_iter().enumerate() {
            let id = format!("f{}", i + 1);
            let index = |r: &PredicateRef| {
                predicates.iter().position(|p| p.id == r.id).ok_or_else(|| {
                    Error::Consistency(format!("fragment {id} references unknown predicate {}", r.id))
                })
            };
            let mut keyed = Vec::with_capacity(group.len());
            for r in group.drain(..) {
                keyed.push((index(&r)?, r));
            }
            keyed.sort_by_key(|(i, _)| *i);
            let mut dimensions: Vec<(String, Vec<PredicateRef>)> = Vec::new();
            for (i, r) in keyed {
                let dim = &predicates[i].dimension;
                match dimensions.iter_mut().find(|(d, _)| d == dim) {
                    Some((_, refs)) => refs.push(r),
                    None => dimensions.push((dim.clone(), vec![r])),
                }
            }
            fragments.push(FragmentDef {
                id,
                dimensions,
                is_else: false,
            });
        }
        fragments.push(FragmentDef {
            id: format!("f{}", fragments.len() + 1),
            dimensions: Vec::new(),
            is_else: true,
        });
        Ok(FragSchema {
            strategy,
            fragments,
            else_empty,
        })
    }

    /// All fragments but ELSE.
    pub fn regular(&self) -> &[FragmentDef] {
        &self.fragments[..self.fragments.len().saturating_sub(1)]
    }

    pub fn else_fragment(&self) -> &FragmentDef {
        self.fragments.last().expect("schema always has ELSE")
    }

    pub fn fragment_count(&self) -> usize {
        self.fragments.len()
    }

    pub fn fragment(&self, id: &str) -> Option<&FragmentDef> {
        self.fragments.iter().find(|f| f.id == id)
    }

    /// Checks ids, the ELSE slot, and that every reference resolves to a
    /// predicate over the dimension it is listed under.
    pub fn validate(&self, predicates: &[Predicate]) -> Result<()> {
        let Some(last) = self.fragments.last() else {
            return Err(Error::Consistency("schema has no fragments".into()));
        };
        if !last.is_else || !last.dimensions.is_empty() {
            return Err(Error::Consistency(
                "the last fragment must be a predicate-free ELSE fragment".into(),
            ));
        }
        for (i, f) in self.fragments.iter().enumerate() {
            if f.is_else && i + 1 != self.fragments.len() {
                return Err(Error::Consistency(format!(
                    "ELSE fragment {} is not last",
                    f.id
                )));
            }
            if self.fragments[..i].iter().any(|g| g.id == f.id) {
                return Err(Error::Consistency(format!("duplicate fragment id {}", f.id)));
            }
            for (dim, refs) in &f.dimensions {
                for r in refs {
                    let p = predicates.iter().find(|p| p.id == r.id).ok_or_else(|| {
                        Error::Consistency(format!(
                            "fragment {} references unknown predicate {}",
                            f.id, r.id
                        ))
                    })?;
                    if &p.dimension != dim {
                        return Err(Error::Consistency(format!(
                            "fragment {} lists {} under {dim} but it constrains {}",
                            f.id, r.id, p.dimension
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The frag-schema.xml document. KM schemas carry no `strategy` attribute,
/// so they read exactly like the original format plus the ELSE element.
pub fn schema_to_xml(schema: &FragSchema) -> String {
    let mut w = XmlWriter::new();
    match schema.strategy {
        Strategy::Km => w.open("Schema", &[]),
        s => w.open("Schema", &[("strategy", s.as_str())]),
    }
    for f in &schema.fragments {
        if f.is_else {
            if schema.else_empty {
                w.empty("fragment", &[("id", &f.id), ("else", "true"), ("empty", "true")]);
            } else {
                w.empty("fragment", &[("id", &f.id), ("else", "true")]);
            }
            continue;
        }
        w.open("fragment", &[("id", &f.id)]);
        for (dim, refs) in &f.dimensions {
            w.open("dimension", &[("name", dim)]);
            for r in refs {
                if r.negated {
                    w.empty("predicate", &[("name", &r.id), ("negated", "true")]);
                } else {
                    w.empty("predicate", &[("name", &r.id)]);
                }
            }
            w.close("dimension");
        }
        w.close("fragment");
    }
    w.close("Schema");
    w.finish()
}

fn flag(value: Option<&str>, what: &str, path: &str) -> Result<bool> {
    match value {
        None | Some("false") => Ok(false),
        Some("true") => Ok(true),
        Some(other) => Err(Error::format(
            path,
            format!("{what} must be \"true\" or \"false\", got {other:?}"),
        )),
    }
}

pub fn schema_from_xml(text: &str, path: &str) -> Result<FragSchema> {
    let root = parse_document(text, path)?;
    root.expect_name("Schema", path)?;
    root.expect_children(&["fragment"], path)?;
    let strategy = match root.attr("strategy") {
        None => Strategy::Km,
        Some(s) => s.parse()?,
    };
    let mut fragments = Vec::new();
    let mut else_empty = false;
    for f in root.children_named("fragment") {
        f.expect_children(&["dimension"], path)?;
        let is_else = flag(f.attr("else"), "else", path)?;
        if is_else {
            else_empty = flag(f.attr("empty"), "empty", path)?;
        }
        let mut dimensions = Vec::new();
        for d in f.children_named("dimension") {
            d.expect_children(&["predicate"], path)?;
            let refs = d
                .children_named("predicate")
                .map(|p| {
                    Ok(PredicateRef {
                        id: p.required_attr("name", path)?.to_string(),
                        negated: flag(p.attr("negated"), "negated", path)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            dimensions.push((d.required_attr("name", path)?.to_string(), refs));
        }
        fragments.push(FragmentDef {
            id: f.required_attr("id", path)?.to_string(),
            dimensions,
            is_else,
        });
    }
    match fragments.last() {
        Some(last) if last.is_else => {}
        _ => {
            return Err(Error::format(path, "the last fragment must carry else=\"true\""));
        }
    }
    Ok(FragSchema {
        strategy,
        fragments,
        else_empty,
    })
}

/// Derivation parameters; `k` and `seed` only matter for KM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeriveConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
}

pub fn derive_schema(workload: &BoundWorkload, config: &DeriveConfig) -> Result<FragSchema> {
    match config.strategy {
        Strategy::Km => km_schema(&build_qp_matrix(workload), &workload.predicates, config.k, config.seed),
        Strategy::Pc => pc_schema(workload),
        Strategy::Ab => ab_schema(workload),
    }
}

/// Median wall time of `runs` schema derivations, with the last schema.
pub fn time_derivation(
    workload: &BoundWorkload,
    config: &DeriveConfig,
    runs: usize,
) -> Result<(Duration, FragSchema)> {
    let runs = runs.max(1);
    let mut times = Vec::with_capacity(runs);
    let mut schema = None;
    for _ in 0..runs {
        let start = Instant::now();
        let s = derive_schema(workload, config)?;
        times.push(start.elapsed());
        schema = Some(s);
    }
    times.sort();
    Ok((times[runs / 2], schema.expect("at least one run")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::xweb_meta;
    use crate::workload::{bind_workload, parse_workload, SAMPLE_WORKLOAD};

    fn sample() -> BoundWorkload {
        bind_workload(&parse_workload(SAMPLE_WORKLOAD).unwrap(), &xweb_meta()).unwrap()
    }

    #[test]
    fn else_only_schema_document() {
        let schema = FragSchema::from_groups(Strategy::Km, vec![], &[], false).unwrap();
        assert_eq!(
            schema_to_xml(&schema),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<Schema>\n  <fragment id=\"f1\" else=\"true\"/>\n</Schema>\n"
        );
    }

    #[test]
    fn round_trip_keeps_negation_and_strategy() {
        let w = sample();
        let schema = FragSchema::from_groups(
            Strategy::Pc,
            vec![
                vec![PredicateRef::negative("p1"), PredicateRef::positive("p3")],
                vec![PredicateRef::positive("p4")],
            ],
            &w.predicates,
            true,
        )
        .unwrap();
        schema.validate(&w.predicates).unwrap();
        let text = schema_to_xml(&schema);
        assert!(text.contains("negated=\"true\""));
        assert!(text.contains("empty=\"true\""));
        assert_eq!(schema_from_xml(&text, "s.xml").unwrap(), schema);
    }

    #[test]
    fn validate_rejects_unknown_predicates_and_misplaced_else() {
        let w = sample();
        let mut schema =
            FragSchema::from_groups(Strategy::Ab, vec![vec![PredicateRef::positive("p1")]], &w.predicates, false)
                .unwrap();
        schema.fragments[0].dimensions[0].1.push(PredicateRef::positive("p9"));
        assert!(matches!(schema.validate(&w.predicates), Err(Error::Consistency(_))));
        schema.fragments.swap(0, 1);
        assert!(matches!(schema.validate(&w.predicates), Err(Error::Consistency(_))));
    }

    #[test]
    fn missing_else_is_a_format_error() {
        let text = "<Schema><fragment id=\"f1\"/></Schema>";
        assert!(matches!(schema_from_xml(text, "s.xml"), Err(Error::Format { .. })));
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("nf".parse::<Strategy>().is_err());
    }
}
