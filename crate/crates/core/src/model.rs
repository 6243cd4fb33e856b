//! In-memory star-schema warehouse: catalog metadata, dimension documents
//! and fact documents.
//!
//! Levels are ordered finest first: `levels[0]` holds the instances facts
//! reference, and an instance at level `i` rolls up to level `i + 1`.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrType {
    String,
    Integer,
    Decimal,
}

impl AttrType {
    pub fn as_str(self) -> &'static str {
        match self {
            AttrType::String => "string",
            AttrType::Integer => "integer",
            AttrType::Decimal => "decimal",
        }
    }
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttrType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "string" => Ok(AttrType::String),
            "integer" => Ok(AttrType::Integer),
            "decimal" => Ok(AttrType::Decimal),
            other => Err(format!("unknown attribute type {other:?}")),
        }
    }
}

/// A typed attribute or measure value.
///
/// Decimals are always finite; [`Value::coerce`] rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Dec(f64),
}

impl Value {
    pub fn ty(&self) -> AttrType {
        match self {
            Value::Str(_) => AttrType::String,
            Value::Int(_) => AttrType::Integer,
            Value::Dec(_) => AttrType::Decimal,
        }
    }

    /// Parses `raw` as a value of type `ty`.
    pub fn coerce(raw: &str, ty: AttrType) -> Option<Value> {
        match ty {
            AttrType::String => Some(Value::Str(raw.to_string())),
            AttrType::Integer => raw.trim().parse().ok().map(Value::Int),
            AttrType::Decimal => raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Value::Dec),
        }
    }

    /// Strings compare lexicographically, numbers numerically. Values of
    /// different types are incomparable.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Dec(a), Value::Dec(b)) => a.partial_cmp(b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => f.write_str(s),
            Value::Int(v) => write!(f, "{v}"),
            Value::Dec(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDef {
    pub name: String,
    pub ty: AttrType,
}

impl AttributeDef {
    pub fn new(name: impl Into<String>, ty: AttrType) -> Self {
        AttributeDef {
            name: name.into(),
            ty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMeta {
    pub id: String,
    pub attributes: Vec<AttributeDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionMeta {
    pub id: String,
    /// Document file name, relative to the directory holding `dw-model.xml`.
    pub path: String,
    pub levels: Vec<LevelMeta>,
}

impl DimensionMeta {
    /// Finds an attribute on any level; returns the level index with it.
    pub fn attribute(&self, name: &str) -> Option<(usize, &AttributeDef)> {
        self.levels.iter().enumerate().find_map(|(i, level)| {
            level
                .attributes
                .iter()
                .find(|a| a.name == name)
                .map(|a| (i, a))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactSetMeta {
    pub id: String,
    pub path: String,
    pub measures: Vec<AttributeDef>,
    pub dimension_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WarehouseMeta {
    pub dimensions: Vec<DimensionMeta>,
    pub fact_sets: Vec<FactSetMeta>,
}

impl WarehouseMeta {
    pub fn dimension(&self, id: &str) -> Option<&DimensionMeta> {
        self.dimensions.iter().find(|d| d.id == id)
    }

    pub fn dimension_index(&self, id: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.id == id)
    }

    pub fn fact_set(&self, id: &str) -> Option<&FactSetMeta> {
        self.fact_sets.iter().find(|f| f.id == id)
    }

    /// Checks uniqueness of every identifier and that fact sets only
    /// reference declared dimensions.
    pub fn validate(&self) -> Result<()> {
        let mut dims = HashSet::new();
        for dim in &self.dimensions {
            if !dims.insert(dim.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate dimension id {:?}", dim.id)));
            }
            if dim.levels.is_empty() {
                return Err(Error::Integrity(format!("dimension {:?} declares no level", dim.id)));
            }
            let mut levels = HashSet::new();
            for level in &dim.levels {
                if !levels.insert(level.id.as_str()) {
                    return Err(Error::Integrity(format!(
                        "duplicate level id {:?} in dimension {:?}",
                        level.id, dim.id
                    )));
                }
                let mut attrs = HashSet::new();
                for attr in &level.attributes {
                    if !attrs.insert(attr.name.as_str()) {
                        return Err(Error::Integrity(format!(
                            "duplicate attribute {:?} in level {:?} of dimension {:?}",
                            attr.name, level.id, dim.id
                        )));
                    }
                }
            }
        }
        let mut facts = HashSet::new();
        for fs in &self.fact_sets {
            if !facts.insert(fs.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate fact set id {:?}", fs.id)));
            }
            let mut refs = HashSet::new();
            for r in &fs.dimension_refs {
                if !dims.contains(r.as_str()) {
                    return Err(Error::Integrity(format!(
                        "fact set {:?} references unknown dimension {:?}",
                        fs.id, r
                    )));
                }
                if !refs.insert(r.as_str()) {
                    return Err(Error::Integrity(format!(
                        "fact set {:?} references dimension {:?} twice",
                        fs.id, r
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    /// Attribute values in document order.
    pub attributes: Vec<(String, Value)>,
    pub roll_up: Option<String>,
    pub drill_down: Vec<String>,
}

impl Instance {
    pub fn attribute(&self, name: &str) -> Option<&Value> {
        self.attributes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelData {
    pub id: String,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionData {
    pub dimension_id: String,
    pub levels: Vec<LevelData>,
}

impl DimensionData {
    /// Instances of the finest level, the ones facts point at.
    pub fn finest(&self) -> &[Instance] {
        self.levels
            .first()
            .map(|l| l.instances.as_slice())
            .unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fact {
    pub measures: Vec<(String, Value)>,
    /// `(dimension id, instance id)` in document order.
    pub dimension_refs: Vec<(String, String)>,
}

impl Fact {
    pub fn dimension_ref(&self, dimension: &str) -> Option<&str> {
        self.dimension_refs
            .iter()
            .find(|(d, _)| d == dimension)
            .map(|(_, id)| id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactData {
    pub fact_set_id: String,
    pub facts: Vec<Fact>,
}

/// A complete warehouse: catalog plus one document per dimension and per
/// fact set, in catalog order.
#[derive(Debug, Clone, PartialEq)]
pub struct Warehouse {
    pub meta: WarehouseMeta,
    pub dimensions: Vec<DimensionData>,
    pub facts: Vec<FactData>,
}

impl Warehouse {
    pub fn dimension(&self, id: &str) -> Option<&DimensionData> {
        self.dimensions.iter().find(|d| d.dimension_id == id)
    }

    pub fn fact_count(&self) -> usize {
        self.facts.iter().map(|f| f.facts.len()).sum()
    }

    /// Checks every type invariant: catalog uniqueness, document/catalog
    /// agreement, instance id uniqueness, roll-up/drill-down inverse
    /// relation, value types and fact reference resolution.
    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        if self.dimensions.len() != self.meta.dimensions.len() {
            return Err(Error::Integrity(format!(
                "catalog declares {} dimensions but {} dimension documents were given",
                self.meta.dimensions.len(),
                self.dimensions.len()
            )));
        }
        for (dm, dd) in self.meta.dimensions.iter().zip(&self.dimensions) {
            validate_dimension(dm, dd)?;
        }
        if self.facts.len() != self.meta.fact_sets.len() {
            return Err(Error::Integrity(format!(
                "catalog declares {} fact sets but {} fact documents were given",
                self.meta.fact_sets.len(),
                self.facts.len()
            )));
        }
        for (fm, fd) in self.meta.fact_sets.iter().zip(&self.facts) {
            self.validate_facts(fm, fd)?;
        }
        Ok(())
    }

    fn validate_facts(&self, fm: &FactSetMeta, fd: &FactData) -> Result<()> {
        if fm.id != fd.fact_set_id {
            return Err(Error::Integrity(format!(
                "fact document {:?} does not match catalog fact set {:?}",
                fd.fact_set_id, fm.id
            )));
        }
        let finest: Vec<HashSet<&str>> = fm
            .dimension_refs
            .iter()
            .map(|d| {
                self.dimension(d)
                    .map(|dd| dd.finest().iter().map(|i| i.id.as_str()).collect())
                    .unwrap_or_default()
            })
            .collect();
        for (n, fact) in fd.facts.iter().enumerate() {
            if fact.dimension_refs.len() != fm.dimension_refs.len() {
                return Err(Error::Integrity(format!(
                    "fact #{} of {:?} carries {} dimension references, expected {}",
                    n + 1,
                    fm.id,
                    fact.dimension_refs.len(),
                    fm.dimension_refs.len()
                )));
            }
            for (dim, ids) in fm.dimension_refs.iter().zip(&finest) {
                let Some(target) = fact.dimension_ref(dim) else {
                    return Err(Error::Integrity(format!(
                        "fact #{} of {:?} has no reference to dimension {:?}",
                        n + 1,
                        fm.id,
                        dim
                    )));
                };
                if !ids.contains(target) {
                    return Err(Error::Integrity(format!(
                        "fact #{} of {:?} references unknown {dim} instance {target:?}",
                        n + 1,
                        fm.id
                    )));
                }
            }
            for (name, value) in &fact.measures {
                let Some(def) = fm.measures.iter().find(|m| &m.name == name) else {
                    return Err(Error::Integrity(format!(
                        "fact #{} of {:?} carries undeclared measure {name:?}",
                        n + 1,
                        fm.id
                    )));
                };
                if value.ty() != def.ty {
                    return Err(Error::Integrity(format!(
                        "fact #{} of {:?}: measure {name:?} is {} but declared {}",
                        n + 1,
                        fm.id,
                        value.ty(),
                        def.ty
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_dimension(dm: &DimensionMeta, dd: &DimensionData) -> Result<()> {
    if dm.id != dd.dimension_id {
        return Err(Error::Integrity(format!(
            "dimension document {:?} does not match catalog dimension {:?}",
            dd.dimension_id, dm.id
        )));
    }
    if dm.levels.len() != dd.levels.len() {
        return Err(Error::Integrity(format!(
            "dimension {:?} declares {} levels, document has {}",
            dm.id,
            dm.levels.len(),
            dd.levels.len()
        )));
    }
    // instance id -> level index
    let mut location: HashMap<&str, usize> = HashMap::new();
    for (li, (lm, ld)) in dm.levels.iter().zip(&dd.levels).enumerate() {
        if lm.id != ld.id {
            return Err(Error::Integrity(format!(
                "dimension {:?}: level #{} is {:?}, catalog says {:?}",
                dm.id,
                li + 1,
                ld.id,
                lm.id
            )));
        }
        for inst in &ld.instances {
            if inst.id.is_empty() || inst.id.chars().any(char::is_whitespace) {
                return Err(Error::Integrity(format!(
                    "dimension {:?}: invalid instance id {:?}",
                    dm.id, inst.id
                )));
            }
            if location.insert(&inst.id, li).is_some() {
                return Err(Error::Integrity(format!(
                    "dimension {:?}: duplicate instance id {:?}",
                    dm.id, inst.id
                )));
            }
            for (name, value) in &inst.attributes {
                let Some(def) = lm.attributes.iter().find(|a| &a.name == name) else {
                    return Err(Error::Integrity(format!(
                        "dimension {:?}: instance {:?} carries attribute {name:?} not declared on level {:?}",
                        dm.id, inst.id, lm.id
                    )));
                };
                if def.ty != value.ty() {
                    return Err(Error::Integrity(format!(
                        "dimension {:?}: instance {:?} attribute {name:?} is {} but declared {}",
                        dm.id,
                        inst.id,
                        value.ty(),
                        def.ty
                    )));
                }
            }
        }
    }
    let by_id: HashMap<&str, &Instance> = dd
        .levels
        .iter()
        .flat_map(|l| &l.instances)
        .map(|i| (i.id.as_str(), i))
        .collect();
    let deepest = dd.levels.len() - 1;
    for (li, level) in dd.levels.iter().enumerate() {
        for inst in &level.instances {
            match &inst.roll_up {
                Some(parent) => {
                    if li == deepest || location.get(parent.as_str()) != Some(&(li + 1)) {
                        return Err(Error::Integrity(format!(
                            "dimension {:?}: instance {:?} rolls up to {:?}, which is not an instance of the next level",
                            dm.id, inst.id, parent
                        )));
                    }
                    if !by_id[parent.as_str()].drill_down.contains(&inst.id) {
                        return Err(Error::Integrity(format!(
                            "dimension {:?}: {:?} rolls up to {:?} but is missing from its drill-down list",
                            dm.id, inst.id, parent
                        )));
                    }
                }
                None if li < deepest => {
                    return Err(Error::Integrity(format!(
                        "dimension {:?}: instance {:?} at level {:?} has no roll-up",
                        dm.id, inst.id, level.id
                    )));
                }
                None => {}
            }
            for child in &inst.drill_down {
                let ok = li > 0
                    && location.get(child.as_str()) == Some(&(li - 1))
                    && by_id[child.as_str()].roll_up.as_deref() == Some(inst.id.as_str());
                if !ok {
                    return Err(Error::Integrity(format!(
                        "dimension {:?}: drill-down {:?} of {:?} does not roll up to it",
                        dm.id, child, inst.id
                    )));
                }
            }
        }
    }
    Ok(())
}
