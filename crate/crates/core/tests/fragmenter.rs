use std::collections::HashMap;

use xfrag_core::engine::fact_key;
use xfrag_core::fragmenter::{
    load_fragment, materialize, read_manifest, write_fragments, DimensionPart, Fragment, MANIFEST_FILE,
};
use xfrag_core::generator::{generate_warehouse, xweb_meta, GeneratorSpec};
use xfrag_core::model::{Value, Warehouse};
use xfrag_core::predicate::{Predicate, PredicateRef};
use xfrag_core::strategies::{derive_schema, DeriveConfig, FragSchema, Strategy};
use xfrag_core::workload::{bind_workload, parse_workload, BoundWorkload, BENCHMARK_WORKLOAD, SAMPLE_WORKLOAD};

fn bound(text: &str) -> BoundWorkload {
    bind_workload(&parse_workload(text).unwrap(), &xweb_meta()).unwrap()
}

fn schema(w: &BoundWorkload, strategy: Strategy, k: usize) -> FragSchema {
    derive_schema(w, &DeriveConfig { strategy, k, seed: 42 }).unwrap()
}

/// Attribute lookup that walks roll-ups level by level, independent of the
/// library's index.
struct Naive<'w> {
    wh: &'w Warehouse,
    by_id: Vec<Vec<HashMap<&'w str, usize>>>,
}

impl<'w> Naive<'w> {
    fn new(wh: &'w Warehouse) -> Self {
        let by_id = wh
            .dimensions
            .iter()
            .map(|d| {
                d.levels
                    .iter()
                    .map(|l| l.instances.iter().enumerate().map(|(i, x)| (x.id.as_str(), i)).collect())
                    .collect()
            })
            .collect();
        Naive { wh, by_id }
    }

    fn value(&self, fact: usize, dimension: &str, attribute: &str) -> Option<&'w Value> {
        let d = self.wh.dimensions.iter().position(|d| d.dimension_id == dimension)?;
        let mut id = self.wh.facts[0].facts[fact].dimension_ref(dimension)?;
        for (level, data) in self.wh.dimensions[d].levels.iter().enumerate() {
            let inst = &data.instances[*self.by_id[d][level].get(id)?];
            if let Some(v) = inst.attribute(attribute) {
                return Some(v);
            }
            id = inst.roll_up.as_deref()?;
        }
        None
    }

    fn holds(&self, fact: usize, predicates: &[Predicate], refs: &[PredicateRef]) -> bool {
        refs.iter().all(|r| {
            let p = predicates.iter().find(|p| p.id == r.id).unwrap();
            p.matches(self.value(fact, &p.dimension, &p.attribute)) != r.negated
        })
    }

    /// Fragments whose membership condition the fact satisfies.
    fn members(&self, fact: usize, predicates: &[Predicate], fragments: &[Fragment]) -> Vec<usize> {
        (0..fragments.len())
            .filter(|&i| {
                let c = &fragments[i].condition;
                self.holds(fact, predicates, &c.own) && !c.excluded.iter().any(|e| self.holds(fact, predicates, e))
            })
            .collect()
    }
}

fn check_against_naive(w: &BoundWorkload, schema: &FragSchema, wh: &Warehouse) {
    let frags = materialize(schema, &w.predicates, wh).unwrap();
    let naive = Naive::new(wh);
    let mut placed = vec![usize::MAX; wh.fact_count()];
    for (i, f) in frags.iter().enumerate() {
        for &fact in &f.facts {
            placed[fact] = i;
        }
    }
    for (fact, &at) in placed.iter().enumerate() {
        let members = naive.members(fact, &w.predicates, &frags);
        assert_eq!(members, vec![at], "{} fact {fact}", schema.strategy);
    }
}

#[test]
fn assignment_equals_naive_membership_evaluation() {
    let wh = generate_warehouse(&GeneratorSpec::xweb(5).with_facts(10_000)).unwrap();
    let bench = bound(BENCHMARK_WORKLOAD);
    for s in [schema(&bench, Strategy::Km, 8), schema(&bench, Strategy::Ab, 0), schema(&bench, Strategy::Pc, 0)] {
        check_against_naive(&bench, &s, &wh);
    }
    let sample = bound(SAMPLE_WORKLOAD);
    for k in 1..=4 {
        check_against_naive(&sample, &schema(&sample, Strategy::Km, k), &wh);
    }
}

#[test]
fn every_fact_joins_inside_its_fragment() {
    let wh = generate_warehouse(&GeneratorSpec::xweb(9).with_facts(3000)).unwrap();
    let w = bound(BENCHMARK_WORKLOAD);
    for s in [schema(&w, Strategy::Km, 8), schema(&w, Strategy::Ab, 0)] {
        for f in materialize(&s, &w.predicates, &wh).unwrap() {
            let part = f.to_warehouse(&wh).unwrap();
            part.validate().unwrap();
            assert_eq!(part.fact_count(), f.fact_count());
            for fact in &part.facts[0].facts {
                for (dim, id) in &fact.dimension_refs {
                    let d = part.dimension(dim).unwrap();
                    assert!(d.finest().iter().any(|i| &i.id == id), "{} {dim} {id}", f.id);
                }
            }
        }
    }
}

/// Toy data for the sample schema: one fact joins a nation-13 customer, a
/// PBC part and a Saturday; facts of nation-20 customers satisfy p1.
fn toy() -> Warehouse {
    let spec = GeneratorSpec::xweb(3)
        .with_facts(12)
        .with_dimension("Customer", 4)
        .with_dimension("Supplier", 2)
        .with_dimension("Date", 7)
        .with_dimension("Part", 3);
    let mut wh = generate_warehouse(&spec).unwrap();
    let set = |wh: &mut Warehouse, dim: &str, level: usize, inst: Option<&str>, attr: &str, v: Value| {
        let d = wh.dimensions.iter_mut().find(|d| d.dimension_id == dim).unwrap();
        for i in d.levels[level].instances.iter_mut() {
            if inst.is_none_or(|id| id == i.id) {
                i.attributes.iter_mut().find(|(n, _)| n == attr).unwrap().1 = v.clone();
            }
        }
    };
    set(&mut wh, "Customer", 1, None, "c_nation_key", Value::Int(5));
    let c0 = wh.dimension("Customer").unwrap().finest()[0].clone();
    let nation13 = c0.roll_up.clone().unwrap();
    set(&mut wh, "Customer", 1, Some(&nation13), "c_nation_key", Value::Int(13));
    let other = wh.dimension("Customer").unwrap().finest().iter().find(|c| c.roll_up.as_ref() != Some(&nation13)).cloned();
    if let Some(c) = &other {
        set(&mut wh, "Customer", 1, c.roll_up.as_deref(), "c_nation_key", Value::Int(20));
    }
    set(&mut wh, "Part", 0, None, "p_type", Value::Str("STD".into()));
    let parts: Vec<String> = wh.dimension("Part").unwrap().finest().iter().map(|p| p.id.clone()).collect();
    set(&mut wh, "Part", 0, Some(&parts[0]), "p_type", Value::Str("PBC".into()));
    set(&mut wh, "Date", 0, None, "d_date_name", Value::Str("Mon.".into()));
    let d0 = wh.dimension("Date").unwrap().finest()[0].id.clone();
    set(&mut wh, "Date", 0, Some(&d0), "d_date_name", Value::Str("Sat.".into()));
    for (i, fact) in wh.facts[0].facts.iter_mut().enumerate() {
        for (dim, id) in fact.dimension_refs.iter_mut() {
            match dim.as_str() {
                "Customer" if i == 0 => *id = c0.id.clone(),
                "Date" if i == 0 => *id = d0.clone(),
                "Part" => *id = parts[usize::from(i != 0)].clone(),
                _ => {}
            }
        }
    }
    wh.validate().unwrap();
    wh
}

#[test]
fn toy_warehouse_places_the_joining_fact_in_f2() {
    let wh = toy();
    let w = bound(SAMPLE_WORKLOAD);
    let s = schema(&w, Strategy::Km, 2);
    let frags = materialize(&s, &w.predicates, &wh).unwrap();
    assert_eq!(frags[1].facts, vec![0]);
    let naive = Naive::new(&wh);
    let p1 = |fact| naive.holds(fact, &w.predicates, &[PredicateRef::positive("p1")]);
    let expect_f1: Vec<usize> = (0..wh.fact_count()).filter(|&f| p1(f)).collect();
    let expect_else: Vec<usize> = (1..wh.fact_count()).filter(|&f| !p1(f)).collect();
    assert_eq!(frags[0].facts, expect_f1);
    assert_eq!(frags[2].facts, expect_else);
    check_against_naive(&w, &s, &wh);
    // f2's selected customers are exactly those of nation 13.
    let DimensionPart::Selected(customers) = &frags[1].dimension_parts[0].1 else {
        panic!("Customer carries a predicate in f2")
    };
    assert!(customers.contains(&0));
}

#[test]
fn singleton_fragments_conserve_all_facts() {
    let wh = generate_warehouse(&GeneratorSpec::xweb(42)).unwrap();
    let w = bound(SAMPLE_WORKLOAD);
    let s = schema(&w, Strategy::Km, w.predicates.len());
    assert!(s.regular().iter().all(|f| f.predicate_refs().count() == 1));
    let frags = materialize(&s, &w.predicates, &wh).unwrap();
    assert_eq!(frags.iter().map(Fragment::fact_count).sum::<usize>(), 7000);
}

#[test]
fn written_fragments_reload_and_merge_to_the_original() {
    let dir = tempfile::tempdir().unwrap();
    let wh = generate_warehouse(&GeneratorSpec::xweb(42).with_facts(2000)).unwrap();
    let w = bound(BENCHMARK_WORKLOAD);
    let s = schema(&w, Strategy::Km, 8);
    let frags = materialize(&s, &w.predicates, &wh).unwrap();
    assert!(frags.iter().any(|f| f.facts.is_empty()), "expected an empty fragment at k=8");

    let manifest = write_fragments(&frags, &wh, dir.path()).unwrap();
    assert_eq!(manifest.fragments.len(), 9);
    assert_eq!(manifest.file_count(), 45);
    let xml_files = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(['f', 'd']))
        .count();
    // 45 fragment documents plus the copied catalog.
    assert_eq!(xml_files, 46);

    let back = read_manifest(dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(back, manifest);
    let mut merged = Vec::new();
    for f in &frags {
        let part = load_fragment(&back, &wh.meta, &f.id).unwrap();
        part.validate().unwrap();
        assert_eq!(part.fact_count(), f.fact_count());
        merged.extend(part.facts[0].facts.iter().map(fact_key));
    }
    let mut original: Vec<String> = wh.facts[0].facts.iter().map(fact_key).collect();
    merged.sort_unstable();
    original.sort_unstable();
    assert_eq!(merged, original);
}
