//! XML persistence of the warehouse: `dw-model.xml`, one `dimension_*.xml`
//! per dimension and one `facts_*.xml` per fact set.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{
    AttrType, AttributeDef, DimensionData, DimensionMeta, Fact, FactData, FactSetMeta, Instance,
    LevelData, LevelMeta, Value, Warehouse, WarehouseMeta,
};
use crate::xml::{parse_document, Element, XmlWriter};

pub const MODEL_FILE: &str = "dw-model.xml";

/// Reads a UTF-8 file; failures carry the path.
pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating missing parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_type(el: &Element, raw: &str, path: &str) -> Result<AttrType> {
    raw.parse()
        .map_err(|m: String| Error::format(path, format!("{}:{}: {m}", el.line, el.column)))
}

pub fn model_to_xml(meta: &WarehouseMeta) -> String {
    let mut w = XmlWriter::new();
    w.open("DW-model", &[]);
    for dim in &meta.dimensions {
        w.open("dimension", &[("dim-id", &dim.id), ("path", &dim.path)]);
        for level in &dim.levels {
            if level.attributes.is_empty() {
                w.empty("Level", &[("id", &level.id)]);
                continue;
            }
            w.open("Level", &[("id", &level.id)]);
            for attr in &level.attributes {
                w.empty("attribute", &[("name", &attr.name), ("type", attr.ty.as_str())]);
            }
            w.close("Level");
        }
        w.close("dimension");
    }
    for fs in &meta.fact_sets {
        w.open("FactDoc", &[("id", &fs.id), ("path", &fs.path)]);
        for m in &fs.measures {
            w.empty("measure", &[("name", &m.name), ("type", m.ty.as_str())]);
        }
        for d in &fs.dimension_refs {
            w.empty("dimension", &[("ref", d)]);
        }
        w.close("FactDoc");
    }
    w.close("DW-model");
    w.finish()
}

pub fn model_from_xml(text: &str, path: &str) -> Result<WarehouseMeta> {
    let root = parse_document(text, path)?;
    root.expect_name("DW-model", path)?;
    root.expect_children(&["dimension", "FactDoc"], path)?;
    let mut meta = WarehouseMeta::default();
    for d in root.children_named("dimension") {
        d.expect_children(&["Level"], path)?;
        let mut levels = Vec::new();
        for l in d.children_named("Level") {
            l.expect_children(&["attribute"], path)?;
            let mut attributes = Vec::new();
            for a in l.children_named("attribute") {
                let ty = parse_type(a, a.required_attr("type", path)?, path)?;
                attributes.push(AttributeDef::new(a.required_attr("name", path)?, ty));
            }
            levels.push(LevelMeta {
                id: l.required_attr("id", path)?.to_string(),
                attributes,
            });
        }
        meta.dimensions.push(DimensionMeta {
            id: d.required_attr("dim-id", path)?.to_string(),
            path: d.required_attr("path", path)?.to_string(),
            levels,
        });
    }
    for f in root.children_named("FactDoc") {
        f.expect_children(&["measure", "dimension"], path)?;
        let mut measures = Vec::new();
        for m in f.children_named("measure") {
            let ty = parse_type(m, m.required_attr("type", path)?, path)?;
            measures.push(AttributeDef::new(m.required_attr("name", path)?, ty));
        }
        let dimension_refs = f
            .children_named("dimension")
            .map(|d| d.required_attr("ref", path).map(str::to_string))
            .collect::<Result<Vec<_>>>()?;
        meta.fact_sets.push(FactSetMeta {
            id: f.required_attr("id", path)?.to_string(),
            path: f.required_attr("path", path)?.to_string(),
            measures,
            dimension_refs,
        });
    }
    Ok(meta)
}

pub fn dimension_to_xml(dim: &DimensionData) -> String {
    let mut w = XmlWriter::new();
    w.open("dimension", &[("dim-id", &dim.dimension_id)]);
    for level in &dim.levels {
        if level.instances.is_empty() {
            w.empty("Level", &[("id", &level.id)]);
            continue;
        }
        w.open("Level", &[("id", &level.id)]);
        for inst in &level.instances {
            let drill = inst.drill_down.join(" ");
            let mut attrs: Vec<(&str, &str)> = vec![("id", &inst.id)];
            if let Some(up) = &inst.roll_up {
                attrs.push(("Roll-up", up));
            }
            if !inst.drill_down.is_empty() {
                attrs.push(("Drill-Down", &drill));
            }
            if inst.attributes.is_empty() {
                w.empty("instance", &attrs);
                continue;
            }
            w.open("instance", &attrs);
            for (name, value) in &inst.attributes {
                w.empty("attribute", &[("id", name), ("value", &value.to_string())]);
            }
            w.close("instance");
        }
        w.close("Level");
    }
    w.close("dimension");
    w.finish()
}

/// Parses a dimension document, typing attribute values with the catalog.
pub fn dimension_from_xml(text: &str, meta: &DimensionMeta, path: &str) -> Result<DimensionData> {
    let root = parse_document(text, path)?;
    root.expect_name("dimension", path)?;
    root.expect_children(&["Level"], path)?;
    let dim_id = root.required_attr("dim-id", path)?;
    if dim_id != meta.id {
        return Err(Error::Integrity(format!(
            "{path}: document holds dimension {dim_id:?}, catalog expects {:?}",
            meta.id
        )));
    }
    let mut levels = Vec::new();
    for l in root.children_named("Level") {
        l.expect_children(&["instance"], path)?;
        let level_id = l.required_attr("id", path)?;
        let level_meta = meta.levels.iter().find(|lm| lm.id == level_id).ok_or_else(|| {
            Error::Integrity(format!(
                "{path}: level {level_id:?} is not declared for dimension {:?}",
                meta.id
            ))
        })?;
        let mut instances = Vec::new();
        for i in l.children_named("instance") {
            i.expect_children(&["attribute"], path)?;
            let mut attributes = Vec::new();
            for a in i.children_named("attribute") {
                let name = a.required_attr("id", path)?;
                let raw = a.required_attr("value", path)?;
                let def = level_meta
                    .attributes
                    .iter()
                    .find(|d| d.name == name)
                    .ok_or_else(|| {
                        Error::Integrity(format!(
                            "{path}:{}:{}: attribute {name:?} is not declared on level {level_id:?}",
                            a.line, a.column
                        ))
                    })?;
                let value = Value::coerce(raw, def.ty).ok_or_else(|| {
                    Error::format(
                        path,
                        format!(
                            "{}:{}: {raw:?} is not a valid {} for {name:?}",
                            a.line, a.column, def.ty
                        ),
                    )
                })?;
                attributes.push((name.to_string(), value));
            }
            instances.push(Instance {
                id: i.required_attr("id", path)?.to_string(),
                attributes,
                roll_up: i.attr("Roll-up").map(str::to_string),
                drill_down: i
                    .attr("Drill-Down")
                    .map(|s| s.split_whitespace().map(str::to_string).collect())
                    .unwrap_or_default(),
            });
        }
        levels.push(LevelData {
            id: level_id.to_string(),
            instances,
        });
    }
    Ok(DimensionData {
        dimension_id: dim_id.to_string(),
        levels,
    })
}

pub fn facts_to_xml(facts: &FactData) -> String {
    let mut w = XmlWriter::new();
    if facts.facts.is_empty() {
        w.empty("FactDoc", &[("id", &facts.fact_set_id)]);
        return w.finish();
    }
    w.open("FactDoc", &[("id", &facts.fact_set_id)]);
    for fact in &facts.facts {
        w.open("Fact", &[]);
        for (name, value) in &fact.measures {
            w.empty("measure", &[("id", name), ("value", &value.to_string())]);
        }
        for (dim, id) in &fact.dimension_refs {
            w.empty("dimension", &[("dim-id", dim), ("value-id", id)]);
        }
        w.close("Fact");
    }
    w.close("FactDoc");
    w.finish()
}

pub fn facts_from_xml(text: &str, meta: &FactSetMeta, path: &str) -> Result<FactData> {
    let root = parse_document(text, path)?;
    root.expect_name("FactDoc", path)?;
    root.expect_children(&["Fact"], path)?;
    if let Some(id) = root.attr("id") {
        if id != meta.id {
            return Err(Error::Integrity(format!(
                "{path}: document holds fact set {id:?}, catalog expects {:?}",
                meta.id
            )));
        }
    }
    let mut facts = Vec::new();
    for f in root.children_named("Fact") {
        f.expect_children(&["measure", "dimension"], path)?;
        let mut measures = Vec::new();
        for m in f.children_named("measure") {
            let name = m.required_attr("id", path)?;
            let raw = m.required_attr("value", path)?;
            let def = meta.measures.iter().find(|d| d.name == name).ok_or_else(|| {
                Error::Integrity(format!(
                    "{path}:{}:{}: measure {name:?} is not declared for fact set {:?}",
                    m.line, m.column, meta.id
                ))
            })?;
            let value = Value::coerce(raw, def.ty).ok_or_else(|| {
                Error::format(
                    path,
                    format!("{}:{}: {raw:?} is not a valid {}", m.line, m.column, def.ty),
                )
            })?;
            measures.push((name.to_string(), value));
        }
        let dimension_refs = f
            .children_named("dimension")
            .map(|d| {
                Ok((
                    d.required_attr("dim-id", path)?.to_string(),
                    d.required_attr("value-id", path)?.to_string(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        facts.push(Fact {
            measures,
            dimension_refs,
        });
    }
    Ok(FactData {
        fact_set_id: meta.id.clone(),
        facts,
    })
}

/// Loads the warehouse described by a `dw-model.xml`; document paths are
/// resolved relative to the model's directory.
pub fn load_warehouse(model_path: impl AsRef<Path>) -> Result<Warehouse> {
    let model_path = model_path.as_ref();
    let text = read_file(model_path)?;
    let meta = model_from_xml(&text, &model_path.display().to_string())?;
    meta.validate()?;
    let base = model_path.parent().unwrap_or(Path::new(""));
    let dim_paths: Vec<PathBuf> = meta.dimensions.iter().map(|d| base.join(&d.path)).collect();
    let fact_paths: Vec<PathBuf> = meta.fact_sets.iter().map(|f| base.join(&f.path)).collect();
    load_documents(meta, &dim_paths, &fact_paths)
}

/// Loads dimension and fact documents from explicit paths, in catalog order.
/// Used to reload fragments, which share the catalog but not the file names.
pub fn load_documents(
    meta: WarehouseMeta,
    dimension_paths: &[PathBuf],
    fact_paths: &[PathBuf],
) -> Result<Warehouse> {
    if dimension_paths.len() != meta.dimensions.len() || fact_paths.len() != meta.fact_sets.len() {
        return Err(Error::Consistency(
            "document path list does not match the catalog".into(),
        ));
    }
    let mut dimensions = Vec::with_capacity(meta.dimensions.len());
    for (dm, p) in meta.dimensions.iter().zip(dimension_paths) {
        let text = read_file(p)?;
        dimensions.push(dimension_from_xml(&text, dm, &p.display().to_string())?);
    }
    let mut facts = Vec::with_capacity(meta.fact_sets.len());
    for (fm, p) in meta.fact_sets.iter().zip(fact_paths) {
        let text = read_file(p)?;
        facts.push(facts_from_xml(&text, fm, &p.display().to_string())?);
    }
    let wh = Warehouse {
        meta,
        dimensions,
        facts,
    };
    wh.validate()?;
    Ok(wh)
}

/// Writes the catalog and every document under `out_dir`. Returns the
/// written paths, model first.
pub fn save_warehouse(wh: &Warehouse, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let model = out_dir.join(MODEL_FILE);
    write_file(&model, &model_to_xml(&wh.meta))?;
    written.push(model);
    for (dm, dd) in wh.meta.dimensions.iter().zip(&wh.dimensions) {
        let p = out_dir.join(&dm.path);
        write_file(&p, &dimension_to_xml(dd))?;
        written.push(p);
    }
    for (fm, fd) in wh.meta.fact_sets.iter().zip(&wh.facts) {
        let p = out_dir.join(&fm.path);
        write_file(&p, &facts_to_xml(fd))?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<DW-model>
  <dimension dim-id="Customer" path="dimension_Customer.xml">
    <Level id="Customer">
      <attribute name="c_nation_key" type="integer"/>
    </Level>
  </dimension>
  <FactDoc id="sales" path="facts_sales.xml">
    <measure name="quantity" type="integer"/>
    <dimension ref="Customer"/>
  </FactDoc>
</DW-model>
"#;

    #[test]
    fn model_round_trips_textually() {
        let meta = model_from_xml(MODEL, "m").unwrap();
        assert_eq!(meta.dimensions.len(), 1);
        assert_eq!(model_to_xml(&meta), MODEL);
    }

    #[test]
    fn unknown_type_is_a_format_error() {
        let bad = MODEL.replace("integer\"/>\n    </Level>", "float\"/>\n    </Level>");
        assert!(matches!(model_from_xml(&bad, "m"), Err(Error::Format { .. })));
    }

    #[test]
    fn empty_fact_document_loads() {
        let meta = model_from_xml(MODEL, "m").unwrap();
        let doc = "<FactDoc id=\"sales\"/>";
        let fd = facts_from_xml(doc, &meta.fact_sets[0], "f").unwrap();
        assert!(fd.facts.is_empty());
        assert_eq!(facts_to_xml(&fd), format!("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n{doc}\n"));
    }

    #[test]
    fn empty_level_serializes_as_empty_element() {
        let dd = DimensionData {
            dimension_id: "Customer".into(),
            levels: vec![LevelData {
                id: "Customer".into(),
                instances: vec![],
            }],
        };
        let text = dimension_to_xml(&dd);
        assert!(text.contains("<Level id=\"Customer\"/>"));
        let meta = model_from_xml(MODEL, "m").unwrap();
        assert_eq!(dimension_from_xml(&text, &meta.dimensions[0], "d").unwrap(), dd);
    }

    #[test]
    fn bad_attribute_value_is_rejected() {
        let meta = model_from_xml(MODEL, "m").unwrap();
        let doc = r#"<dimension dim-id="Customer"><Level id="Customer">
            <instance id="c1"><attribute id="c_nation_key" value="x"/></instance>
        </Level></dimension>"#;
        let err = dimension_from_xml(doc, &meta.dimensions[0], "d").unwrap_err();
        assert!(err.to_string().contains("not a valid integer"), "{err}");
    }
}
