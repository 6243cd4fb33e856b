use std::collections::btree_map::{BTreeMap, Entry};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fragmenter::materialize;
use crate::generator::{generate_warehouse, GeneratorSpec};
use crate::model::Warehouse;
use crate::strategies::{derive_schema, time_derivation, DeriveConfig, FragSchema, Strategy};
use crate::workload::BoundWorkload;

use super::exec::{execute_fragmented, execute_whole, CostReport, Execution, FragmentSet};
use super::route::{Router, RoutingPlan};
use super::{route_workload, routing_violations, Method};

/// Query id of the per-configuration aggregate rows in `efficiency.csv`.
pub const ALL_QUERIES: &str = "ALL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    /// Cluster count for KM in the efficiency runs.
    pub k: usize,
    /// Cluster counts for the k sweep; 1 stands for no fragmentation.
    pub ksweep: Vec<usize>,
    pub ksweep_sizes: Vec<usize>,
    pub seed: u64,
    /// Derivations timed per strategy; the median is reported.
    pub overhead_runs: usize,
    /// Also run the per-fact routing oracle on every configuration.
    pub verify: bool,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() && self.ksweep_sizes.is_empty() {
            return Err(Error::Parameter("no warehouse sizes given".into()));
        }
        if self.sizes.iter().chain(&self.ksweep_sizes).any(|&s| s == 0) {
            return Err(Error::Parameter("warehouse sizes must be at least 1".into()));
        }
        if !self.ksweep.is_empty() && self.ksweep_sizes.is_empty() {
            return Err(Error::Parameter("a k sweep needs at least one size".into()));
        }
        if self.ksweep.contains(&0) {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if self.methods.contains(&Method::Frag(Strategy::Km)) && self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRow {
    pub size: usize,
    pub strategy: String,
    pub query_id: String,
    pub fragments_accessed: usize,
    pub facts_scanned_total: usize,
    pub parallel_cost: usize,
    pub sequential_cost: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepRow {
    pub size: usize,
    pub k: usize,
    pub mean_parallel_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverheadRow {
    pub strategy: String,
    pub predicate_count: usize,
    pub derivation_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragCountRow {
    pub strategy: String,
    pub fragment_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    /// One report per (size, method) of the efficiency runs, sizes outer.
    pub reports: Vec<CostReport>,
    pub efficiency: Vec<EfficiencyRow>,
    pub ksweep: Vec<KSweepRow>,
    pub overhead: Vec<OverheadRow>,
    pub fragcounts: Vec<FragCountRow>,
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn efficiency_rows(size: usize, report: &CostReport) -> Vec<EfficiencyRow> {
    let mut rows: Vec<EfficiencyRow> = report
        .queries
        .iter()
        .map(|q| EfficiencyRow {
            size,
            strategy: report.strategy.clone(),
            query_id: q.query_id.clone(),
            fragments_accessed: q.fragments_accessed(),
            facts_scanned_total: q.sequential_cost,
            parallel_cost: q.parallel_cost,
            sequential_cost: q.sequential_cost,
            wall_ms: ms(q.wall),
        })
        .collect();
    rows.push(EfficiencyRow {
        size,
        strategy: report.strategy.clone(),
        query_id: ALL_QUERIES.into(),
        fragments_accessed: report.total_fragments_accessed(),
        facts_scanned_total: report.total_sequential(),
        parallel_cost: report.total_parallel(),
        sequential_cost: report.total_sequential(),
        wall_ms: ms(report.total_wall()),
    });
    rows
}

struct Prepared<'a> {
    method: Method,
    k: Option<usize>,
    schema: FragSchema,
    plans: Vec<RoutingPlan>,
    workload: &'a BoundWorkload,
}

impl<'a> Prepared<'a> {
    fn new(workload: &'a BoundWorkload, strategy: Strategy, k: usize, seed: u64) -> Result<Self> {
        let schema = derive_schema(workload, &DeriveConfig { strategy, k, seed })?;
        let router = Router::new(&schema, &workload.predicates)?;
        let plans = route_workload(&router, workload)?;
        Ok(Prepared {
            method: Method::Frag(strategy),
            k: (strategy == Strategy::Km).then_some(k),
            schema,
            plans,
            workload,
        })
    }

    fn run(&self, wh: &Warehouse, whole: &Execution, seed: u64, verify: bool) -> Result<CostReport> {
        let w = self.workload;
        let fragments = materialize(&self.schema, &w.predicates, wh)?;
        let set = FragmentSet::build(&fragments, wh)?;
        let run = execute_fragmented(w, &self.plans, &set, self.method.as_str(), self.k, seed)?;
        check_against(&run, whole)?;
        if verify {
            if let Some(v) = routing_violations(w, &self.schema, wh, &self.plans)?.first() {
                return Err(Error::Consistency(format!(
                    "{}: fact #{} answers {} but sits in pruned fragment {}",
                    self.method, v.fact, v.query_id, v.fragment_id
                )));
            }
        }
        Ok(run.report)
    }
}

fn check_against(run: &Execution, whole: &Execution) -> Result<()> {
    for ((q, got), want) in run.report.queries.iter().zip(&run.results).zip(&whole.results) {
        if got != want {
            return Err(Error::Consistency(format!(
                "{} returns {} facts for {} over fragments, {} without",
                run.report.strategy,
                got.len(),
                q.query_id,
                want.len()
            )));
        }
        if q.parallel_cost > q.sequential_cost {
            return Err(Error::Consistency(format!(
                "{}: parallel cost above sequential cost for {}",
                run.report.strategy, q.query_id
            )));
        }
    }
    Ok(())
}

/// Generate, fragment, route and execute for every configuration, timing
/// schema derivation on the side. Fragmented answers are checked against
/// the unfragmented ones; any difference is an error.
pub fn bench(workload: &BoundWorkload, config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let seed = config.seed;
    let prepared = config
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::Nf => None,
            Method::Frag(s) => Some(Prepared::new(workload, *s, config.k, seed)),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warehouses: BTreeMap<usize, (Warehouse, Execution)> = BTreeMap::new();
    let ensure = |size: usize, warehouses: &mut BTreeMap<usize, (Warehouse, Execution)>| -> Result<()> {
        if let Entry::Vacant(slot) = warehouses.entry(size) {
            let wh = generate_warehouse(&GeneratorSpec::xweb(seed).with_facts(size))?;
            let whole = execute_whole(workload, &wh, seed)?;
            slot.insert((wh, whole));
        }
        Ok(())
    };

    let mut report = BenchReport::default();
    for &size in &config.sizes {
        ensure(size, &mut warehouses)?;
        let (wh, whole) = &warehouses[&size];
        for m in &config.methods {
            let r = match m {
                Method::Nf => whole.report.clone(),
                Method::Frag(_) => {
                    let p = prepared.iter().find(|p| p.method == *m).expect("prepared above");
                    p.run(wh, whole, seed, config.verify)?
                }
            };
            report.efficiency.extend(efficiency_rows(size, &r));
            report.reports.push(r);
        }
        if config.ksweep.is_empty() {
            warehouses.remove(&size);
        }
    }

    let sweep = config
        .ksweep
        .iter()
        .map(|&k| if k == 1 { Ok(None) } else { Prepared::new(workload, Strategy::Km, k, seed).map(Some) })
        .collect::<Result<Vec<_>>>()?;
    for &size in &config.ksweep_sizes {
        ensure(size, &mut warehouses)?;
        let (wh, whole) = &warehouses[&size];
        for (&k, p) in config.ksweep.iter().zip(&sweep) {
            let r = match p {
                None => whole.report.clone(),
                Some(p) => p.run(wh, whole, seed, config.verify)?,
            };
            report.ksweep.push(KSweepRow {
                size,
                k,
                mean_parallel_cost: r.mean_parallel(),
            });
        }
    }

    for m in &config.methods {
        let (count, overhead) = match m {
            Method::Nf => (1, None),
            Method::Frag(s) => {
                let cfg = DeriveConfig { strategy: *s, k: config.k, seed };
                let (t, schema) = time_derivation(workload, &cfg, config.overhead_runs)?;
                (schema.fragment_count(), Some(t))
            }
        };
        report.fragcounts.push(FragCountRow {
            strategy: m.as_str().into(),
            fragment_count: count,
        });
        if let Some(t) = overhead {
            report.overhead.push(OverheadRow {
                strategy: m.as_str().into(),
                predicate_count: workload.predicates.len(),
                derivation_ms: ms(t),
            });
        }
    }
    Ok(report)
}

pub const EFFICIENCY_CSV: &str = "efficiency.csv";
pub const KSWEEP_CSV: &str = "ksweep.csv";
pub const OVERHEAD_CSV: &str = "overhead.csv";
pub const FRAGCOUNTS_CSV: &str = "fragcounts.csv";

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Consistency(format!("{}: {other:?}", path.display())),
    })?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl BenchReport {
    /// Writes the four CSVs into `dir`. Returns their paths.
    pub fn write_csvs(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths: Vec<PathBuf> = [EFFICIENCY_CSV, KSWEEP_CSV, OVERHEAD_CSV, FRAGCOUNTS_CSV]
            .iter()
            .map(|f| dir.join(f))
            .collect();
        write_csv(
            &paths[0],
            &[
                "size",
                "strategy",
                "query_id",
                "fragments_accessed",
                "facts_scanned_total",
                "parallel_cost",
                "sequential_cost",
                "wall_ms",
            ],
            self.efficiency.iter().map(|r| {
                vec![
                    r.size.to_string(),
                    r.strategy.clone(),
                    r.query_id.clone(),
                    r.fragments_accessed.to_string(),
                    r.facts_scanned_total.to_string(),
                    r.parallel_cost.to_string(),
                    r.sequential_cost.to_string(),
                    format!("{:.3}", r.wall_ms),
                ]
            }),
        )?;
        write_csv(
            &paths[1],
            &["size", "k", "mean_parallel_cost"],
            self.ksweep
                .iter()
                .map(|r| vec![r.size.to_string(), r.k.to_string(), format!("{:.3}", r.mean_parallel_cost)]),
        )?;
        write_csv(
            &paths[2],
            &["strategy", "predicate_count", "derivation_ms"],
            self.overhead.iter().map(|r| {
                vec![r.strategy.clone(), r.predicate_count.to_string(), format!("{:.4}", r.derivation_ms)]
            }),
        )?;
        write_csv(
            &paths[3],
            &["strategy", "fragment_count"],
            self.fragcounts
                .iter()
                .map(|r| vec![r.strategy.clone(), r.fragment_count.to_string()]),
        )?;
        Ok(paths)
    }

    /// The report of one efficiency configuration.
    pub fn report(&self, size: usize, method: Method) -> Option<&CostReport> {
        self.reports
            .iter()
            .find(|r| r.fact_count == size && r.strategy == method.as_str())
    }
}
