//! Materializes a fragmentation schema: dimension selections first, then
//! fact fragments derived by semijoin, then ELSE.
//!
//! A fact that satisfies several fragment conjunctions goes to the lowest
//! numbered one, and ELSE holds the facts no other fragment claims. Fragments
//! are kept as index lists into the base warehouse; documents are built on
//! demand.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{Compiled, WarehouseIndex};
use crate::model::{DimensionData, FactData, LevelData, Warehouse, WarehouseMeta};
use crate::predicate::{Predicate, PredicateRef};
use crate::store::{self, dimension_to_xml, facts_to_xml, model_to_xml, MODEL_FILE};
use crate::strategies::{FragSchema, FragmentDef};
use crate::xml::{parse_document, XmlWriter};

pub const MANIFEST_FILE: &str = "manifest.xml";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimensionPart {
    /// Replicated whole.
    All,
    /// Finest-level instance indices, ascending.
    Selected(Vec<usize>),
}

/// `own ∧ ¬excluded[0] ∧ ¬excluded[1] ∧ …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipCondition {
    pub own: Vec<PredicateRef>,
    pub excluded: Vec<Vec<PredicateRef>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub id: String,
    pub is_else: bool,
    /// One entry per catalog dimension, in catalog order.
    pub dimension_parts: Vec<(String, DimensionPart)>,
    /// Fact indices into the base fact set, ascending.
    pub facts: Vec<usize>,
    pub condition: MembershipCondition,
}

impl Fragment {
    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    /// The fragment's dimension document. Ancestors of selected instances
    /// are kept so every roll-up still resolves.
    pub fn dimension_data(&self, base: &Warehouse, dimension: &str) -> Result<DimensionData> {
        let dd = base
            .dimension(dimension)
            .ok_or_else(|| Error::Consistency(format!("unknown dimension {dimension}")))?;
        let part = self
            .dimension_parts
            .iter()
            .find(|(d, _)| d == dimension)
            .map(|(_, p)| p)
            .ok_or_else(|| {
                Error::Consistency(format!("fragment {} has no part for {dimension}", self.id))
            })?;
        let selected = match part {
            DimensionPart::All => return Ok(dd.clone()),
            DimensionPart::Selected(ix) => ix,
        };
        let mut keep: Vec<HashSet<&str>> = vec![HashSet::new(); dd.levels.len()];
        let finest = dd.finest();
        for &i in selected {
            keep[0].insert(finest[i].id.as_str());
        }
        for li in 1..dd.levels.len() {
            let parents: HashSet<&str> = dd.levels[li - 1]
                .instances
                .iter()
                .filter(|inst| keep[li - 1].contains(inst.id.as_str()))
                .filter_map(|inst| inst.roll_up.as_deref())
                .collect();
            keep[li] = parents;
        }
        let levels = dd
            .levels
            .iter()
            .enumerate()
            .map(|(li, level)| LevelData {
                id: level.id.clone(),
                instances: level
                    .instances
                    .iter()
                    .filter(|inst| keep[li].contains(inst.id.as_str()))
                    .map(|inst| {
                        let mut inst = inst.clone();
                        if li > 0 {
                            inst.drill_down.retain(|c| keep[li - 1].contains(c.as_str()));
                        }
                        inst
                    })
                    .collect(),
            })
            .collect();
        Ok(DimensionData {
            dimension_id: dd.dimension_id.clone(),
            levels,
        })
    }

    pub fn fact_data(&self, base: &Warehouse) -> FactData {
        let fd = &base.facts[0];
        FactData {
            fact_set_id: fd.fact_set_id.clone(),
            facts: self.facts.iter().map(|&i| fd.facts[i].clone()).collect(),
        }
    }

    /// The fragment as a warehouse of its own, sharing the base catalog.
    pub fn to_warehouse(&self, base: &Warehouse) -> Result<Warehouse> {
        let dimensions = base
            .meta
            .dimensions
            .iter()
            .map(|d| self.dimension_data(base, &d.id))
            .collect::<Result<Vec<_>>>()?;
        Ok(Warehouse {
            meta: base.meta.clone(),
            dimensions,
            facts: vec![self.fact_data(base)],
        })
    }
}

fn check_schema(schema: &FragSchema, predicates: &[Predicate], meta: &WarehouseMeta) -> Result<()> {
    schema.validate(predicates)?;
    for f in schema.regular() {
        for (dim, _) in &f.dimensions {
            if meta.dimension(dim).is_none() {
                return Err(Error::Consistency(format!(
                    "fragment {} constrains unknown dimension {dim}",
                    f.id
                )));
            }
        }
    }
    Ok(())
}

fn refs(def: &FragmentDef) -> Vec<PredicateRef> {
    def.predicate_refs().cloned().collect()
}

/// Lowest-numbered regular fragment each fact satisfies, or `regular.len()`
/// for ELSE.
pub fn assign_facts(
    schema: &FragSchema,
    predicates: &[Predicate],
    index: &WarehouseIndex,
) -> Result<Vec<usize>> {
    let table = index.truth_table(predicates)?;
    let compiled = schema
        .regular()
        .iter()
        .map(|f| table.compile(&f.atoms(predicates)?))
        .collect::<Result<Vec<Compiled>>>()?;
    Ok((0..index.fact_count())
        .into_par_iter()
        .map(|fact| {
            compiled
                .iter()
                .position(|c| table.fact_matches(index, fact, c))
                .unwrap_or(compiled.len())
        })
        .collect())
}

pub fn materialize(schema: &FragSchema, predicates: &[Predicate], warehouse: &Warehouse) -> Result<Vec<Fragment>> {
    check_schema(schema, predicates, &warehouse.meta)?;
    let index = WarehouseIndex::new(warehouse)?;
    let table = index.truth_table(predicates)?;
    let assignment = assign_facts(schema, predicates, &index)?;
    let regular = schema.regular();

    let mut facts: Vec<Vec<usize>> = vec![Vec::new(); regular.len() + 1];
    for (fact, &f) in assignment.iter().enumerate() {
        facts[f].push(fact);
    }

    let dims: Vec<&str> = warehouse.meta.dimensions.iter().map(|d| d.id.as_str()).collect();
    let mut out = Vec::with_capacity(regular.len() + 1);
    for (fi, (def, fact_ids)) in regular.iter().zip(facts.iter_mut()).enumerate() {
        let compiled = table.compile(&def.atoms(predicates)?)?;
        let dimension_parts = dims
            .iter()
            .enumerate()
            .map(|(d, id)| {
                let constrained = def.dimensions.iter().any(|(dim, r)| dim == id && !r.is_empty());
                let part = if constrained {
                    DimensionPart::Selected(
                        (0..index.instance_count(d))
                            .filter(|&i| table.instance_matches(d, i, &compiled))
                            .collect(),
                    )
                } else {
                    DimensionPart::All
                };
                (id.to_string(), part)
            })
            .collect();
        out.push(Fragment {
            id: def.id.clone(),
            is_else: false,
            dimension_parts,
            facts: std::mem::take(fact_ids),
            condition: MembershipCondition {
                own: refs(def),
                excluded: regular[..fi].iter().map(refs).collect(),
            },
        });
    }

    let else_def = schema.else_fragment();
    let else_facts = std::mem::take(&mut facts[regular.len()]);
    let dimension_parts = dims
        .iter()
        .enumerate()
        .map(|(d, id)| {
            let mut used: Vec<usize> = else_facts
                .iter()
                .filter_map(|&f| index.fact_instance(f, d))
                .collect();
            used.sort_unstable();
            used.dedup();
            (id.to_string(), DimensionPart::Selected(used))
        })
        .collect();
    out.push(Fragment {
        id: else_def.id.clone(),
        is_else: true,
        dimension_parts,
        facts: else_facts,
        condition: MembershipCondition {
            own: Vec::new(),
            excluded: regular.iter().map(refs).collect(),
        },
    });
    Ok(out)
}

/// Checks that the fact parts cover `fact_count` facts exactly once.
pub fn check_partition(fragments: &[Fragment], fact_count: usize) -> Result<()> {
    let mut owner: Vec<Option<&str>> = vec![None; fact_count];
    for f in fragments {
        for &i in &f.facts {
            let slot = owner.get_mut(i).ok_or_else(|| {
                Error::Consistency(format!("fragment {} holds fact #{} of {fact_count}", f.id, i + 1))
            })?;
            if let Some(other) = slot.replace(&f.id) {
                return Err(Error::Consistency(format!(
                    "fact #{} is in both {other} and {}",
                    i + 1,
                    f.id
                )));
            }
        }
    }
    match owner.iter().position(Option::is_none) {
        Some(i) => Err(Error::Consistency(format!("fact #{} is in no fragment", i + 1))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub is_else: bool,
    /// Fact documents, in catalog order of fact sets.
    pub facts: Vec<PathBuf>,
    /// `(dimension id, document)`, in catalog order.
    pub dimensions: Vec<(String, PathBuf)>,
}

/// Fragment documents on disk. Paths are relative to `dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub dir: PathBuf,
    pub model: PathBuf,
    pub fragments: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.fragments.iter().find(|f| f.id == id)
    }

    pub fn file_count(&self) -> usize {
        self.fragments
            .iter()
            .map(|f| f.facts.len() + f.dimensions.len())
            .sum()
    }
}

pub fn fact_file_name(fact_set: &str, fragment: &str) -> String {
    format!("facts_{fact_set}_{fragment}.xml")
}

pub fn dimension_file_name(dimension: &str, fragment: &str) -> String {
    format!("dimension_{dimension}_{fragment}.xml")
}

pub fn manifest_to_xml(manifest: &Manifest) -> String {
    let mut w = XmlWriter::new();
    let model = manifest.model.display().to_string();
    w.open("Manifest", &[("model", &model)]);
    for f in &manifest.fragments {
        if f.is_else {
            w.open("fragment", &[("id", &f.id), ("else", "true")]);
        } else {
            w.open("fragment", &[("id", &f.id)]);
        }
        for p in &f.facts {
            w.empty("file", &[("role", "facts"), ("path", &p.display().to_string())]);
        }
        for (d, p) in &f.dimensions {
            w.empty(
                "file",
                &[("role", "dimension"), ("dim-id", d), ("path", &p.display().to_string())],
            );
        }
        w.close("fragment");
    }
    w.close("Manifest");
    w.finish()
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let root = parse_document(&store::read_file(path)?, &name)?;
    root.expect_name("Manifest", &name)?;
    root.expect_children(&["fragment"], &name)?;
    let mut fragments = Vec::new();
    for f in root.children_named("fragment") {
        f.expect_children(&["file"], &name)?;
        let mut entry = ManifestEntry {
            id: f.required_attr("id", &name)?.to_string(),
            is_else: f.attr("else") == Some("true"),
            facts: Vec::new(),
            dimensions: Vec::new(),
        };
        for file in f.children_named("file") {
            let p = PathBuf::from(file.required_attr("path", &name)?);
            match file.required_attr("role", &name)? {
                "facts" => entry.facts.push(p),
                "dimension" => entry
                    .dimensions
                    .push((file.required_attr("dim-id", &name)?.to_string(), p)),
                other => {
                    return Err(Error::format(&name, format!("unknown file role {other:?}")));
                }
            }
        }
        fragments.push(entry);
    }
    Ok(Manifest {
        dir: path.parent().unwrap_or(Path::new("")).to_path_buf(),
        model: PathBuf::from(root.attr("model").unwrap_or(MODEL_FILE)),
        fragments,
    })
}

/// Writes one fact document and one document per dimension for every
/// fragment, the catalog, and `manifest.xml`. Returns the manifest.
pub fn write_fragments(fragments: &[Fragment], base: &Warehouse, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    store::write_file(&out_dir.join(MODEL_FILE), &model_to_xml(&base.meta))?;
    let fact_set = &base.facts[0].fact_set_id;
    let entries = fragments
        .par_iter()
        .map(|f| {
            let fact_path = PathBuf::from(fact_file_name(fact_set, &f.id));
            store::write_file(&out_dir.join(&fact_path), &facts_to_xml(&f.fact_data(base)))?;
            let mut dimensions = Vec::new();
            for d in &base.meta.dimensions {
                let p = PathBuf::from(dimension_file_name(&d.id, &f.id));
                store::write_file(&out_dir.join(&p), &dimension_to_xml(&f.dimension_data(base, &d.id)?))?;
                dimensions.push((d.id.clone(), p));
            }
            Ok(ManifestEntry {
                id: f.id.clone(),
                is_else: f.is_else,
                facts: vec![fact_path],
                dimensions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        dir: out_dir.to_path_buf(),
        model: PathBuf::from(MODEL_FILE),
        fragments: entries,
    };
    store::write_file(&out_dir.join(MANIFEST_FILE), &manifest_to_xml(&manifest))?;
    Ok(manifest)
}

/// Reloads one fragment through the warehouse loader.
pub fn load_fragment(manifest: &Manifest, meta: &WarehouseMeta, id: &str) -> Result<Warehouse> {
    let entry = manifest
        .entry(id)
        .ok_or_else(|| Error::Consistency(format!("manifest has no fragment {id}")))?;
    let dims = meta
        .dimensions
        .iter()
        .map(|d| {
            entry
                .dimensions
                .iter()
                .find(|(id, _)| *id == d.id)
                .map(|(_, p)| manifest.dir.join(p))
                .ok_or_else(|| {
                    Error::Consistency(format!("fragment {} has no document for {}", entry.id, d.id))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    if entry.facts.len() != meta.fact_sets.len() {
        return Err(Error::Consistency(format!(
            "fragment {} lists {} fact documents, the catalog has {} fact sets",
            entry.id,
            entry.facts.len(),
            meta.fact_sets.len()
        )));
    }
    let facts: Vec<PathBuf> = entry.facts.iter().map(|p| manifest.dir.join(p)).collect();
    store::load_documents(meta.clone(), &dims, &facts)
}

const VARIABLES: [&str; 6] = ["y", "z", "t", "u", "v", "w"];

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn condition_text(p: &Predicate, negated: bool) -> String {
    let test = format!(
        "$x//attribute[@id={}]/@value{}{}",
        quote(&p.attribute),
        p.comparator,
        quote(&p.literal.to_string())
    );
    if negated {
        format!("not({test})")
    } else {
        test
    }
}

fn conjunction_text(def: &FragmentDef) -> String {
    let parts: Vec<String> = def.predicate_refs().map(ToString::to_string).collect();
    if parts.is_empty() {
        "true".into()
    } else {
        parts.join(" and ")
    }
}

/// XQuery-style text that would build each fragment: one selection per
/// constrained dimension, then the fact semijoin. ELSE gets a comment
/// instead of a query.
pub fn emit_fragment_script(schema: &FragSchema, predicates: &[Predicate], meta: &WarehouseMeta) -> Result<String> {
    check_schema(schema, predicates, meta)?;
    let fact_set = meta
        .fact_sets
        .first()
        .ok_or_else(|| Error::Consistency("catalog has no fact set".into()))?;
    let mut out = String::new();
    for def in schema.regular() {
        let _ = writeln!(out, "(: fragment {} :)", def.id);
        for (dim, refs) in &def.dimensions {
            let dm = meta.dimension(dim).expect("checked above");
            let level = dm.levels.first().map_or("", |l| l.id.as_str());
            let _ = writeln!(out, "element dimension {{ attribute dim-id {{{dim}}}, element Level {{");
            let _ = writeln!(out, "attribute id {{{level}}},");
            let _ = writeln!(out, "for $x in document({})//Level", quote(&dm.path));
            let conds: Vec<String> = refs
                .iter()
                .map(|r| {
                    let p = predicates.iter().find(|p| p.id == r.id).expect("validated");
                    condition_text(p, r.negated)
                })
                .collect();
            let _ = writeln!(out, "where {}", conds.join("\n  and "));
            out.push_str("return $x }\n}\n");
        }
        out.push_str("element FactDoc {\nfor $x in //FactDoc/Fact");
        for (i, (dim, _)) in def.dimensions.iter().enumerate() {
            let var = VARIABLES.get(i).map_or_else(|| format!("d{i}"), |v| v.to_string());
            let _ = write!(
                out,
                ",\n    ${var} in document({})//instance",
                quote(&dimension_file_name(dim, &def.id))
            );
        }
        out.push('\n');
        let joins: Vec<String> = def
            .dimensions
            .iter()
            .enumerate()
            .map(|(i, (dim, _))| {
                let var = VARIABLES.get(i).map_or_else(|| format!("d{i}"), |v| v.to_string());
                format!("$x/dimension[@dim-id={}]/@value-id=${var}/@id", quote(dim))
            })
            .collect();
        if !joins.is_empty() {
            let _ = writeln!(out, "where {}", joins.join("\nand "));
        }
        out.push_str("return $x\n}\n\n");
    }
    let else_def = schema.else_fragment();
    let _ = writeln!(out, "(: fragment {} (ELSE)", else_def.id);
    if schema.regular().is_empty() {
        out.push_str("   Holds every fact of ");
        let _ = writeln!(out, "{}.", fact_set.path);
    } else {
        out.push_str("   Holds the facts that satisfy none of the fragments above:\n");
        for def in schema.regular() {
            let _ = writeln!(out, "     not({})   ({})", conjunction_text(def), def.id);
        }
        out.push_str(
            "   Each fact here fails at least one dimension condition of every earlier\n\
             \x20  fragment, so no single selection followed by a join expresses it.\n\
             \x20  Dimension documents keep only the instances these facts reference.\n",
        );
    }
    if schema.else_empty {
        out.push_str("   The fragments above are complete by construction, so this one is empty.\n");
    }
    out.push_str(":)\n");
    Ok(out)
}
