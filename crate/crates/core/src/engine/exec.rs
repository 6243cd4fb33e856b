use std::borrow::Cow;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::WarehouseIndex;
use crate::fragmenter::{load_fragment, Fragment, Manifest};
use crate::model::{Fact, Warehouse};
use crate::workload::{BoundWorkload, Query};

use super::route::RoutingPlan;

/// Identity of a fact across documents: its references, then its measures.
/// Facts carry no id of their own, so results are compared as sorted
/// multisets of keys.
pub fn fact_key(fact: &Fact) -> String {
    let mut key = String::new();
    for (d, id) in &fact.dimension_refs {
        key.push_str(d);
        key.push('=');
        key.push_str(id);
        key.push(';');
    }
    key.push('|');
    for (m, v) in &fact.measures {
        key.push_str(m);
        key.push('=');
        key.push_str(&v.to_string());
        key.push(';');
    }
    key
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentCost {
    pub fragment_id: String,
    /// Fact entries read, i.e. the size of the fragment's fact document.
    pub facts_scanned: usize,
    pub matched: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryCost {
    pub query_id: String,
    pub fragments: Vec<FragmentCost>,
    pub result_size: usize,
    /// Largest per-fragment scan.
    pub parallel_cost: usize,
    /// Sum of per-fragment scans.
    pub sequential_cost: usize,
    /// Slowest fragment.
    pub wall: Duration,
}

impl QueryCost {
    fn new(query_id: &str, fragments: Vec<FragmentCost>) -> Self {
        QueryCost {
            query_id: query_id.to_string(),
            result_size: fragments.iter().map(|f| f.matched).sum(),
            parallel_cost: fragments.iter().map(|f| f.facts_scanned).max().unwrap_or(0),
            sequential_cost: fragments.iter().map(|f| f.facts_scanned).sum(),
            wall: fragments.iter().map(|f| f.wall).max().unwrap_or_default(),
            fragments,
        }
    }

    pub fn fragments_accessed(&self) -> usize {
        self.fragments.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// `NF`, `PC`, `AB` or `KM`.
    pub strategy: String,
    pub k: Option<usize>,
    pub seed: u64,
    pub fact_count: usize,
    pub queries: Vec<QueryCost>,
}

impl CostReport {
    pub fn total_parallel(&self) -> usize {
        self.queries.iter().map(|q| q.parallel_cost).sum()
    }

    pub fn total_sequential(&self) -> usize {
        self.queries.iter().map(|q| q.sequential_cost).sum()
    }

    pub fn total_fragments_accessed(&self) -> usize {
        self.queries.iter().map(QueryCost::fragments_accessed).sum()
    }

    pub fn mean_parallel(&self) -> f64 {
        mean(self.total_parallel(), self.queries.len())
    }

    pub fn mean_sequential(&self) -> f64 {
        mean(self.total_sequential(), self.queries.len())
    }

    pub fn mean_fragments_accessed(&self) -> f64 {
        mean(self.total_fragments_accessed(), self.queries.len())
    }

    pub fn total_wall(&self) -> Duration {
        self.queries.iter().map(|q| q.wall).sum()
    }

    pub fn query(&self, id: &str) -> Option<&QueryCost> {
        self.queries.iter().find(|q| q.query_id == id)
    }
}

fn mean(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

/// Cost report plus, per query, the sorted keys of the facts returned.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub report: CostReport,
    pub results: Vec<Vec<String>>,
}

/// Facts of `warehouse` selected by `query`: dimension selections, then
/// the semijoin on every dimension the query joins.
fn evaluate(workload: &BoundWorkload, query: &Query, index: &WarehouseIndex) -> Result<Vec<usize>> {
    let table = index.truth_table(&workload.predicates)?;
    let compiled = table.compile(&workload.atoms(query))?;
    let joined = query
        .joined_dimensions
        .iter()
        .map(|d| {
            index
                .dimension_index(d)
                .ok_or_else(|| Error::Consistency(format!("query {} joins unknown dimension {d}", query.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..index.fact_count())
        .filter(|&f| joined.iter().all(|&d| index.fact_instance(f, d).is_some()))
        .filter(|&f| table.fact_matches(index, f, &compiled))
        .collect())
}

fn run_one(
    workload: &BoundWorkload,
    query: &Query,
    fragment_id: &str,
    wh: &Warehouse,
) -> Result<(FragmentCost, Vec<String>)> {
    let start = Instant::now();
    let index = WarehouseIndex::new(wh)?;
    let hits = evaluate(workload, query, &index)?;
    let facts = &wh.facts[0].facts;
    let keys: Vec<String> = hits.iter().map(|&i| fact_key(&facts[i])).collect();
    Ok((
        FragmentCost {
            fragment_id: fragment_id.to_string(),
            facts_scanned: facts.len(),
            matched: keys.len(),
            wall: start.elapsed(),
        },
        keys,
    ))
}

fn collect(
    strategy: &str,
    k: Option<usize>,
    seed: u64,
    fact_count: usize,
    per_query: Vec<(QueryCost, Vec<String>)>,
) -> Execution {
    let (queries, results) = per_query.into_iter().unzip();
    Execution {
        report: CostReport {
            strategy: strategy.to_string(),
            k,
            seed,
            fact_count,
            queries,
        },
        results,
    }
}

/// Every query against the single unfragmented document.
pub fn execute_whole(workload: &BoundWorkload, warehouse: &Warehouse, seed: u64) -> Result<Execution> {
    let per_query = workload
        .queries
        .iter()
        .map(|q| {
            let (cost, mut keys) = run_one(workload, q, "whole", warehouse)?;
            keys.sort_unstable();
            Ok((QueryCost::new(&q.id, vec![cost]), keys))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect("NF", None, seed, warehouse.fact_count(), per_query))
}

/// Fragments held in memory, each as a warehouse of its own.
pub struct FragmentSet {
    pub ids: Vec<String>,
    pub warehouses: Vec<Warehouse>,
}

impl FragmentSet {
    pub fn build(fragments: &[Fragment], base: &Warehouse) -> Result<Self> {
        let warehouses = fragments
            .par_iter()
            .map(|f| f.to_warehouse(base))
            .collect::<Result<Vec<_>>>()?;
        Ok(FragmentSet {
            ids: fragments.iter().map(|f| f.id.clone()).collect(),
            warehouses,
        })
    }

    fn get(&self, id: &str) -> Result<&Warehouse> {
        self.ids
            .iter()
            .position(|f| f == id)
            .map(|i| &self.warehouses[i])
            .ok_or_else(|| Error::Consistency(format!("routed to unknown fragment {id}")))
    }

    pub fn fact_count(&self) -> usize {
        self.warehouses.iter().map(Warehouse::fact_count).sum()
    }
}

fn plan_for<'a>(plans: &'a [RoutingPlan], query: &Query) -> Result<&'a RoutingPlan> {
    plans
        .iter()
        .find(|p| p.query_id == query.id)
        .ok_or_else(|| Error::Consistency(format!("no routing plan for query {}", query.id)))
}

fn run_routed<'w, F>(workload: &BoundWorkload, plans: &[RoutingPlan], fetch: F) -> Result<Vec<(QueryCost, Vec<String>)>>
where
    F: Fn(&str) -> Result<Cow<'w, Warehouse>> + Sync,
{
    workload
        .queries
        .iter()
        .map(|q| {
            let plan = plan_for(plans, q)?;
            let parts = plan
                .relevant
                .par_iter()
                .map(|id| run_one(workload, q, id, &*fetch(id)?))
                .collect::<Result<Vec<_>>>()?;
            let (costs, keys): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
            let mut keys: Vec<String> = keys.concat();
            keys.sort_unstable();
            Ok((QueryCost::new(&q.id, costs), keys))
        })
        .collect()
}

/// Every query over its routed in-memory fragments; results are the union.
pub fn execute_fragmented(
    workload: &BoundWorkload,
    plans: &[RoutingPlan],
    fragments: &FragmentSet,
    strategy: &str,
    k: Option<usize>,
    seed: u64,
) -> Result<Execution> {
    let per_query = run_routed(workload, plans, |id| fragments.get(id).map(Cow::Borrowed))?;
    Ok(collect(strategy, k, seed, fragments.fact_count(), per_query))
}

/// Like [`execute_fragmented`], reading each routed fragment from disk.
pub fn execute_on_disk(
    workload: &BoundWorkload,
    plans: &[RoutingPlan],
    manifest: &Manifest,
    base: &Warehouse,
    strategy: &str,
    k: Option<usize>,
    seed: u64,
) -> Result<Execution> {
    let per_query = run_routed(workload, plans, |id| load_fragment(manifest, &base.meta, id).map(Cow::Owned))?;
    Ok(collect(strategy, k, seed, base.fact_count(), per_query))
}
