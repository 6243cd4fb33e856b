//! Predicate evaluation over a loaded warehouse.
//!
//! Facts point at finest-level instances; an attribute declared on a coarser
//! level is read from the nearest ancestor along the roll-up chain.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Value, Warehouse};
use crate::predicate::{Atom, Predicate};

struct DimIndex<'w> {
    id: &'w str,
    /// Resolved attributes of each finest instance, nearest level first.
    attrs: Vec<Vec<(&'w str, &'w Value)>>,
}

/// Resolved view of a single-fact-set warehouse.
pub struct WarehouseIndex<'w> {
    pub warehouse: &'w Warehouse,
    dims: Vec<DimIndex<'w>>,
    /// `fact_refs[f][d]`: finest instance index of fact `f` in dimension `d`
    /// (catalog order), `None` when the fact set does not reference `d`.
    fact_refs: Vec<Vec<Option<usize>>>,
}

impl<'w> WarehouseIndex<'w> {
    pub fn new(warehouse: &'w Warehouse) -> Result<Self> {
        if warehouse.facts.len() != 1 {
            return Err(Error::Consistency(format!(
                "fragmentation needs exactly one fact set, the warehouse has {}",
                warehouse.facts.len()
            )));
        }
        let mut dims = Vec::with_capacity(warehouse.dimensions.len());
        let mut positions: Vec<HashMap<&str, usize>> = Vec::new();
        for dd in &warehouse.dimensions {
            let by_id: HashMap<&str, (usize, usize)> = dd
                .levels
                .iter()
                .enumerate()
                .flat_map(|(li, l)| l.instances.iter().enumerate().map(move |(i, inst)| (inst.id.as_str(), (li, i))))
                .collect();
            let attrs = dd
                .finest()
                .iter()
                .map(|inst| {
                    let mut out: Vec<(&str, &Value)> = Vec::new();
                    let mut cur = Some(inst);
                    while let Some(i) = cur {
                        for (name, v) in &i.attributes {
                            if !out.iter().any(|(n, _)| n == name) {
                                out.push((name.as_str(), v));
                            }
                        }
                        cur = i.roll_up.as_deref().and_then(|p| {
                            by_id.get(p).map(|&(li, ii)| &dd.levels[li].instances[ii])
                        });
                    }
                    out
                })
                .collect();
            positions.push(
                dd.finest()
                    .iter()
                    .enumerate()
                    .map(|(i, inst)| (inst.id.as_str(), i))
                    .collect(),
            );
            dims.push(DimIndex {
                id: &dd.dimension_id,
                attrs,
            });
        }
        let facts = &warehouse.facts[0];
        let fact_refs = facts
            .facts
            .iter()
            .enumerate()
            .map(|(n, fact)| {
                dims.iter()
                    .zip(&positions)
                    .map(|(d, pos)| match fact.dimension_ref(d.id) {
                        None => Ok(None),
                        Some(target) => pos.get(target).copied().map(Some).ok_or_else(|| {
                            Error::Integrity(format!(
                                "fact #{} references unknown {} instance {target:?}",
                                n + 1,
                                d.id
                            ))
                        }),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WarehouseIndex {
            warehouse,
            dims,
            fact_refs,
        })
    }

    pub fn fact_count(&self) -> usize {
        self.fact_refs.len()
    }

    pub fn dimension_index(&self, id: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.id == id)
    }

    pub fn instance_count(&self, dim: usize) -> usize {
        self.dims[dim].attrs.len()
    }

    /// Value of `attribute` for finest instance `inst` of dimension `dim`.
    pub fn value(&self, dim: usize, inst: usize, attribute: &str) -> Option<&'w Value> {
        self.dims[dim].attrs[inst]
            .iter()
            .find(|(n, _)| *n == attribute)
            .map(|(_, v)| *v)
    }

    /// Finest instance referenced by `fact` in dimension `dim`.
    pub fn fact_instance(&self, fact: usize, dim: usize) -> Option<usize> {
        self.fact_refs[fact][dim]
    }

    /// Evaluates one atom on one instance, by direct attribute lookup.
    pub fn instance_matches(&self, dim: usize, inst: usize, atom: &Atom) -> bool {
        atom.matches(self.value(dim, inst, &atom.predicate.attribute))
    }

    /// Evaluates a conjunction on a fact, by direct attribute lookup.
    pub fn fact_matches(&self, fact: usize, atoms: &[Atom]) -> bool {
        atoms.iter().all(|a| {
            let value = self
                .dimension_index(&a.predicate.dimension)
                .and_then(|d| self.fact_instance(fact, d).map(|i| (d, i)))
                .and_then(|(d, i)| self.value(d, i, &a.predicate.attribute));
            a.matches(value)
        })
    }

    /// Truth table of every predicate over its dimension's finest instances.
    pub fn truth_table(&self, predicates: &[Predicate]) -> Result<TruthTable> {
        let rows = predicates
            .iter()
            .map(|p| {
                let d = self.dimension_index(&p.dimension).ok_or_else(|| {
                    Error::Consistency(format!(
                        "predicate {} constrains unknown dimension {}",
                        p.id, p.dimension
                    ))
                })?;
                let truth = (0..self.instance_count(d))
                    .map(|i| p.matches(self.value(d, i, &p.attribute)))
                    .collect();
                Ok((p.id.clone(), d, truth))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TruthTable { rows })
    }
}

/// Precomputed predicate outcomes for fast conjunction checks.
pub struct TruthTable {
    rows: Vec<(String, usize, Vec<bool>)>,
}

/// A conjunction compiled against a [`TruthTable`]: `(row, negated)` pairs.
#[derive(Debug, Clone, Default)]
pub struct Compiled(Vec<(usize, bool)>);

impl Compiled {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TruthTable {
    pub fn compile(&self, atoms: &[Atom]) -> Result<Compiled> {
        atoms
            .iter()
            .map(|a| {
                self.rows
                    .iter()
                    .position(|(id, _, _)| *id == a.predicate.id)
                    .map(|r| (r, a.negated))
                    .ok_or_else(|| Error::Consistency(format!("unknown predicate {}", a.predicate.id)))
            })
            .collect::<Result<Vec<_>>>()
            .map(Compiled)
    }

    pub fn fact_matches(&self, index: &WarehouseIndex, fact: usize, c: &Compiled) -> bool {
        c.0.iter().all(|&(r, negated)| {
            let (_, d, truth) = &self.rows[r];
            // A fact without a reference into the dimension has no value.
            let holds = index.fact_instance(fact, *d).is_some_and(|i| truth[i]);
            holds != negated
        })
    }

    /// Whether instance `inst` of dimension `dim` satisfies the atoms of
    /// `c` that constrain `dim`.
    pub fn instance_matches(&self, dim: usize, inst: usize, c: &Compiled) -> bool {
        c.0.iter()
            .filter(|&&(r, _)| self.rows[r].1 == dim)
            .all(|&(r, negated)| self.rows[r].2[inst] != negated)
    }
}
