//! Query routing, execution over whole or fragmented warehouses, and the
//! benchmark driver.
//!
//! Cost is counted in fact entries scanned: a query reads the whole fact
//! document of every fragment it is routed to. Parallel cost is the largest
//! such scan, sequential cost their sum. Wall time is kept alongside.

mod bench;
mod exec;
mod route;

use std::fmt;
use std::str::FromStr;

pub use bench::{bench, BenchConfig, BenchReport, EfficiencyRow, FragCountRow, KSweepRow, OverheadRow, ALL_QUERIES};
pub use exec::{
    execute_fragmented, execute_on_disk, execute_whole, fact_key, CostReport, Execution, FragmentCost, FragmentSet,
    QueryCost,
};
pub use route::{PruneReason, Router, RoutingPlan};

use crate::error::{Error, Result};
use crate::eval::WarehouseIndex;
use crate::fragmenter::assign_facts;
use crate::model::Warehouse;
use crate::strategies::{FragSchema, Strategy};
use crate::workload::BoundWorkload;

/// A fragmentation strategy, or none at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Nf,
    Frag(Strategy),
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nf => "NF",
            Method::Frag(s) => s.as_str(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nf" | "none" => Ok(Method::Nf),
            _ => s.parse().map(Method::Frag),
        }
    }
}

/// Routing plans for every query of the workload, in workload order.
pub fn route_workload(router: &Router, workload: &BoundWorkload) -> Result<Vec<RoutingPlan>> {
    workload
        .queries
        .iter()
        .map(|q| router.route(&q.id, &workload.atoms(q)))
        .collect()
}

/// A fact of some query's answer that lives in a fragment the query was not
/// routed to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingViolation {
    pub query_id: String,
    pub fact: usize,
    pub fragment_id: String,
}

/// Brute-force routing check: places every fact by evaluating the fragment
/// conjunctions on the data, evaluates every query on every fact, and lists
/// answer facts whose fragment was pruned.
pub fn routing_violations(
    workload: &BoundWorkload,
    schema: &FragSchema,
    warehouse: &Warehouse,
    plans: &[RoutingPlan],
) -> Result<Vec<RoutingViolation>> {
    let index = WarehouseIndex::new(warehouse)?;
    let assignment = assign_facts(schema, &workload.predicates, &index)?;
    let ids: Vec<&str> = schema.fragments.iter().map(|f| f.id.as_str()).collect();
    let mut out = Vec::new();
    for q in &workload.queries {
        let plan = plans
            .iter()
            .find(|p| p.query_id == q.id)
            .ok_or_else(|| Error::Consistency(format!("no routing plan for query {}", q.id)))?;
        let atoms = workload.atoms(q);
        let joined: Vec<usize> = q
            .joined_dimensions
            .iter()
            .filter_map(|d| index.dimension_index(d))
            .collect();
        for (fact, &f) in assignment.iter().enumerate() {
            let answers = joined.iter().all(|&d| index.fact_instance(fact, d).is_some())
                && index.fact_matches(fact, &atoms);
            if answers && !plan.routes(ids[f]) {
                out.push(RoutingViolation {
                    query_id: q.id.clone(),
                    fact,
                    fragment_id: ids[f].to_string(),
                });
            }
        }
    }
    Ok(out)
}
