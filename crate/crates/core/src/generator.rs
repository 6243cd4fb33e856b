//! Deterministic synthetic warehouse shaped after the XWeB benchmark:
//! `sale` facts over Customer, Supplier, Date and Part, each dimension with
//! a two-level hierarchy.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    AttrType, AttributeDef, DimensionData, DimensionMeta, Fact, FactData, FactSetMeta, Instance,
    LevelData, LevelMeta, Value, Warehouse, WarehouseMeta,
};

pub const CUSTOMER: &str = "Customer";
pub const SUPPLIER: &str = "Supplier";
pub const DATE: &str = "Date";
pub const PART: &str = "Part";
pub const FACT_SET: &str = "sales";

const DIMENSIONS: [&str; 4] = [CUSTOMER, SUPPLIER, DATE, PART];

const SEGMENTS: [&str; 5] = ["AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"];
const REGIONS: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];
const PART_TYPES: [&str; 10] = [
    "PBC", "PBS", "LBC", "ECB", "SPT", "MAT", "SBB", "LPN", "EAN", "MPC",
];

/// Attributes whose value domain size can be configured.
const CARDINALITIES: [(&str, usize); 10] = [
    ("c_nation_key", 25),
    ("c_region", 5),
    ("c_mktsegment", 5),
    ("s_nation_key", 25),
    ("s_region", 5),
    ("d_year", 7),
    ("p_type", 10),
    ("p_size", 50),
    ("p_brand", 25),
    ("p_mfgr", 5),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub fact_count: usize,
    /// Finest-level instance count per dimension.
    pub dimension_counts: BTreeMap<String, usize>,
    /// Value-domain size per attribute; missing entries use the defaults.
    pub cardinalities: BTreeMap<String, usize>,
}

impl GeneratorSpec {
    /// XWeB sizes: 7000 facts, 1000 customers, 1000 suppliers, 500 dates and
    /// 1000 parts.
    pub fn xweb(seed: u64) -> Self {
        GeneratorSpec {
            seed,
            fact_count: 7000,
            dimension_counts: [(CUSTOMER, 1000), (SUPPLIER, 1000), (DATE, 500), (PART, 1000)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            cardinalities: CARDINALITIES
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    pub fn with_facts(mut self, fact_count: usize) -> Self {
        self.fact_count = fact_count;
        self
    }

    pub fn with_dimension(mut self, dimension: &str, count: usize) -> Self {
        self.dimension_counts.insert(dimension.to_string(), count);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.fact_count == 0 {
            return Err(Error::Parameter("fact count must be at least 1".into()));
        }
        for dim in DIMENSIONS {
            match self.dimension_counts.get(dim) {
                Some(0) => {
                    return Err(Error::Parameter(format!(
                        "dimension {dim} needs at least one instance"
                    )))
                }
                None => return Err(Error::Parameter(format!("missing instance count for {dim}"))),
                Some(_) => {}
            }
        }
        if let Some(other) = self
            .dimension_counts
            .keys()
            .find(|k| !DIMENSIONS.contains(&k.as_str()))
        {
            return Err(Error::Parameter(format!("unknown dimension {other:?}")));
        }
        for (attr, &card) in &self.cardinalities {
            if !CARDINALITIES.iter().any(|(a, _)| a == attr) {
                return Err(Error::Parameter(format!("attribute {attr:?} has no configurable domain")));
            }
            if card == 0 {
                return Err(Error::Parameter(format!("cardinality of {attr} must be at least 1")));
            }
        }
        Ok(())
    }

    fn count(&self, dim: &str) -> usize {
        self.dimension_counts[dim]
    }

    fn card(&self, attr: &str) -> usize {
        self.cardinalities.get(attr).copied().unwrap_or_else(|| {
            CARDINALITIES
                .iter()
                .find(|(a, _)| *a == attr)
                .map(|&(_, c)| c)
                .expect("known attribute")
        })
    }
}

/// The catalog of the generated warehouse; independent of the spec values.
pub fn xweb_meta() -> WarehouseMeta {
    use AttrType::*;
    let level = |id: &str, attrs: &[(&str, AttrType)]| LevelMeta {
        id: id.to_string(),
        attributes: attrs.iter().map(|&(n, t)| AttributeDef::new(n, t)).collect(),
    };
    let dim = |id: &str, levels: Vec<LevelMeta>| DimensionMeta {
        id: id.to_string(),
        path: format!("dimension_{id}.xml"),
        levels,
    };
    WarehouseMeta {
        dimensions: vec![
            dim(
                CUSTOMER,
                vec![
                    level(
                        "Customer",
                        &[("c_name", String), ("c_mktsegment", String), ("c_acctbal", Decimal)],
                    ),
                    level("Nation", &[("c_nation_key", Integer), ("c_region", String)]),
                ],
            ),
            dim(
                SUPPLIER,
                vec![
                    level("Supplier", &[("s_name", String), ("s_acctbal", Decimal)]),
                    level("Nation", &[("s_nation_key", Integer), ("s_region", String)]),
                ],
            ),
            dim(
                DATE,
                vec![
                    level(
                        "Day",
                        &[("d_date", String), ("d_date_name", String), ("d_day", Integer)],
                    ),
                    level("Month", &[("d_month", Integer), ("d_year", Integer)]),
                ],
            ),
            dim(
                PART,
                vec![
                    level("Part", &[("p_name", String), ("p_type", String), ("p_size", Integer)]),
                    level("Brand", &[("p_brand", String), ("p_mfgr", String)]),
                ],
            ),
        ],
        fact_sets: vec![FactSetMeta {
            id: FACT_SET.to_string(),
            path: format!("facts_{FACT_SET}.xml"),
            measures: vec![
                AttributeDef::new("quantity", Integer),
                AttributeDef::new("amount", Decimal),
            ],
            dimension_refs: DIMENSIONS.iter().map(|d| d.to_string()).collect(),
        }],
    }
}

fn vocab(words: &[&str], prefix: &str, v: usize) -> String {
    words
        .get(v)
        .map(|w| w.to_string())
        .unwrap_or_else(|| format!("{prefix}{v}"))
}

fn money(rng: &mut ChaCha8Rng) -> Value {
    let cents: i64 = rng.random_range(-99_999..=999_999);
    Value::Dec(cents as f64 / 100.0)
}

fn attrs(pairs: Vec<(&str, Value)>) -> Vec<(String, Value)> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Builds a two-level dimension: `children` each roll up to the parent at the
/// returned index.
fn two_level(
    id: &str,
    levels: (&str, &str),
    children: Vec<(Instance, usize)>,
    mut parents: Vec<Instance>,
) -> DimensionData {
    let mut finest = Vec::with_capacity(children.len());
    for (mut child, p) in children {
        child.roll_up = Some(parents[p].id.clone());
        parents[p].drill_down.push(child.id.clone());
        finest.push(child);
    }
    DimensionData {
        dimension_id: id.to_string(),
        levels: vec![
            LevelData {
                id: levels.0.to_string(),
                instances: finest,
            },
            LevelData {
                id: levels.1.to_string(),
                instances: parents,
            },
        ],
    }
}

fn instance(id: String, attributes: Vec<(String, Value)>) -> Instance {
    Instance {
        id,
        attributes,
        roll_up: None,
        drill_down: Vec::new(),
    }
}

fn nation_dimension(
    rng: &mut ChaCha8Rng,
    spec: &GeneratorSpec,
    dim: &str,
    prefix: char,
    name: &str,
) -> DimensionData {
    let p = prefix;
    let nations = spec.card(&format!("{p}_nation_key"));
    let regions = spec.card(&format!("{p}_region"));
    let parents = (0..nations)
        .map(|n| {
            instance(
                format!("{p}n{n}"),
                attrs(vec![
                    (&format!("{p}_nation_key"), Value::Int(n as i64)),
                    (&format!("{p}_region"), Value::Str(vocab(&REGIONS, "REGION", n % regions))),
                ]),
            )
        })
        .collect();
    let segments = spec.card("c_mktsegment");
    let children = (1..=spec.count(dim))
        .map(|i| {
            let mut values = vec![(
                format!("{p}_name"),
                Value::Str(format!("{name}#{i:09}")),
            )];
            if p == 'c' {
                let seg = rng.random_range(0..segments);
                values.push(("c_mktsegment".into(), Value::Str(vocab(&SEGMENTS, "SEGMENT", seg))));
            }
            values.push((format!("{p}_acctbal"), money(rng)));
            let nation = rng.random_range(0..nations);
            (instance(format!("{p}{i}"), values), nation)
        })
        .collect();
    two_level(dim, (name, "Nation"), children, parents)
}

fn date_dimension(spec: &GeneratorSpec) -> DimensionData {
    let count = spec.count(DATE);
    let years = spec.card("d_year");
    let step = ((years * 365) / count).max(1) as i64;
    let start = NaiveDate::from_ymd_opt(1992, 1, 1).expect("valid date");
    let mut parents: Vec<Instance> = Vec::new();
    let mut children = Vec::with_capacity(count);
    for i in 0..count {
        let day = start + Duration::days(i as i64 * step);
        let month_id = format!("m{}-{:02}", day.year(), day.month());
        let parent = match parents.iter().position(|m| m.id == month_id) {
            Some(p) => p,
            None => {
                parents.push(instance(
                    month_id,
                    attrs(vec![
                        ("d_month", Value::Int(day.month() as i64)),
                        ("d_year", Value::Int(day.year() as i64)),
                    ]),
                ));
                parents.len() - 1
            }
        };
        let name = match day.weekday() {
            Weekday::Mon => "Mon.",
            Weekday::Tue => "Tue.",
            Weekday::Wed => "Wed.",
            Weekday::Thu => "Thu.",
            Weekday::Fri => "Fri.",
            Weekday::Sat => "Sat.",
            Weekday::Sun => "Sun.",
        };
        let values = attrs(vec![
            ("d_date", Value::Str(day.format("%Y-%m-%d").to_string())),
            ("d_date_name", Value::Str(name.to_string())),
            ("d_day", Value::Int(day.day() as i64)),
        ]);
        children.push((instance(format!("d{}", i + 1), values), parent));
    }
    two_level(DATE, ("Day", "Month"), children, parents)
}

fn part_dimension(rng: &mut ChaCha8Rng, spec: &GeneratorSpec) -> DimensionData {
    let brands = spec.card("p_brand");
    let mfgrs = spec.card("p_mfgr");
    let types = spec.card("p_type");
    let sizes = spec.card("p_size");
    let parents = (0..brands)
        .map(|b| {
            let (major, minor) = (b / 5 + 1, b % 5 + 1);
            instance(
                format!("b{major}{minor}"),
                attrs(vec![
                    ("p_brand", Value::Str(format!("Brand#{major}{minor}"))),
                    ("p_mfgr", Value::Str(format!("Manufacturer#{}", (b / 5) % mfgrs + 1))),
                ]),
            )
        })
        .collect();
    let children = (1..=spec.count(PART))
        .map(|i| {
            let values = attrs(vec![
                ("p_name", Value::Str(format!("Part#{i:09}"))),
                (
                    "p_type",
                    Value::Str(vocab(&PART_TYPES, "TYPE", rng.random_range(0..types))),
                ),
                ("p_size", Value::Int(rng.random_range(1..=sizes as i64))),
            ]);
            (instance(format!("p{i}"), values), rng.random_range(0..brands))
        })
        .collect();
    two_level(PART, ("Part", "Brand"), children, parents)
}

/// Generates a warehouse. Equal specs yield equal warehouses; dimensions are
/// drawn before facts, so specs differing only in `fact_count` share them.
pub fn generate_warehouse(spec: &GeneratorSpec) -> Result<Warehouse> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dimensions = vec![
        nation_dimension(&mut rng, spec, CUSTOMER, 'c', "Customer"),
        nation_dimension(&mut rng, spec, SUPPLIER, 's', "Supplier"),
        date_dimension(spec),
        part_dimension(&mut rng, spec),
    ];
    let facts = (0..spec.fact_count)
        .map(|_| {
            let measures = vec![
                ("quantity".to_string(), Value::Int(rng.random_range(1..=100))),
                ("amount".to_string(), Value::Dec(rng.random_range(1..=100) as f64)),
            ];
            let dimension_refs = dimensions
                .iter()
                .map(|d| {
                    let finest = d.finest();
                    let pick = &finest[rng.random_range(0..finest.len())];
                    (d.dimension_id.clone(), pick.id.clone())
                })
                .collect();
            Fact {
                measures,
                dimension_refs,
            }
        })
        .collect();
    Ok(Warehouse {
        meta: xweb_meta(),
        dimensions,
        facts: vec![FactData {
            fact_set_id: FACT_SET.to_string(),
            facts,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xweb_counts_are_exact() {
        let wh = generate_warehouse(&GeneratorSpec::xweb(42)).unwrap();
        wh.validate().unwrap();
        let counts: Vec<usize> = wh.dimensions.iter().map(|d| d.finest().len()).collect();
        assert_eq!(counts, vec![1000, 1000, 500, 1000]);
        assert_eq!(wh.fact_count(), 7000);
        assert!(wh.dimensions.iter().all(|d| d.levels.len() >= 2));
    }

    #[test]
    fn same_seed_same_warehouse() {
        let spec = GeneratorSpec::xweb(7).with_facts(300);
        assert_eq!(
            generate_warehouse(&spec).unwrap(),
            generate_warehouse(&spec).unwrap()
        );
        let other = GeneratorSpec::xweb(8).with_facts(300);
        assert_ne!(
            generate_warehouse(&spec).unwrap(),
            generate_warehouse(&other).unwrap()
        );
    }

    #[test]
    fn dimensions_do_not_depend_on_fact_count() {
        let a = generate_warehouse(&GeneratorSpec::xweb(3).with_facts(10)).unwrap();
        let b = generate_warehouse(&GeneratorSpec::xweb(3).with_facts(500)).unwrap();
        assert_eq!(a.dimensions, b.dimensions);
        assert_eq!(a.facts[0].facts[..], b.facts[0].facts[..10]);
    }

    #[test]
    fn minimal_warehouse() {
        let mut spec = GeneratorSpec::xweb(1).with_facts(1);
        for d in DIMENSIONS {
            spec = spec.with_dimension(d, 1);
        }
        let wh = generate_warehouse(&spec).unwrap();
        wh.validate().unwrap();
        let fact = &wh.facts[0].facts[0];
        assert_eq!(wh.fact_count(), 1);
        for d in &wh.dimensions {
            assert_eq!(d.finest().len(), 1);
            assert_eq!(fact.dimension_ref(&d.dimension_id), Some(d.finest()[0].id.as_str()));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(
            generate_warehouse(&GeneratorSpec::xweb(1).with_facts(0)),
            Err(Error::Parameter(_))
        ));
        assert!(generate_warehouse(&GeneratorSpec::xweb(1).with_dimension(PART, 0)).is_err());
        let mut spec = GeneratorSpec::xweb(1);
        spec.cardinalities.insert("c_name".into(), 3);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn date_names_match_weekdays() {
        let wh = generate_warehouse(&GeneratorSpec::xweb(1).with_facts(1)).unwrap();
        let first = &wh.dimension(DATE).unwrap().finest()[0];
        // 1992-01-01 was a Wednesday.
        assert_eq!(first.attribute("d_date_name"), Some(&Value::Str("Wed.".into())));
    }
}
