use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xfrag_core::clustering::{kmeans, predicate_vectors};
use xfrag_core::engine::{
    bench, execute_on_disk, execute_whole, route_workload, routing_violations, BenchConfig, Method, Router,
};
use xfrag_core::fragmenter::{
    check_partition, emit_fragment_script, materialize, read_manifest, write_fragments, MANIFEST_FILE,
};
use xfrag_core::generator::{generate_warehouse, GeneratorSpec, CUSTOMER, DATE, PART, SUPPLIER};
use xfrag_core::model::Warehouse;
use xfrag_core::store::{load_warehouse, read_file, save_warehouse, write_file, MODEL_FILE};
use xfrag_core::strategies::{derive_schema, schema_to_xml, DeriveConfig, Strategy};
use xfrag_core::workload::{
    bind_workload, build_qp_matrix, parse_workload, read_workload, BoundWorkload, BENCHMARK_WORKLOAD,
    SAMPLE_WORKLOAD,
};
use xfrag_core::{Error, Result};

/// Like `println!`, but a closed stdout (`| head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(io::stdout(), $($t)*);
    }};
}

/// Workload-driven horizontal fragmentation of XML data warehouses.
#[derive(Parser)]
#[command(name = "xfrag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic star-schema warehouse.
    Generate(GenerateArgs),
    /// Derive a fragmentation schema and write the fragments.
    Fragment(FragmentArgs),
    /// Run the benchmark protocol and write the CSV reports.
    Bench(BenchArgs),
    /// Print CSV reports as aligned tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 7000)]
    facts: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    customers: Option<usize>,
    #[arg(long)]
    suppliers: Option<usize>,
    #[arg(long)]
    dates: Option<usize>,
    #[arg(long)]
    parts: Option<usize>,
}

#[derive(Args)]
struct FragmentArgs {
    /// Warehouse directory or its dw-model.xml [default: the output directory]
    #[arg(short, long)]
    warehouse: Option<PathBuf>,
    /// Workload file, or `sample` / `benchmark` for the shipped ones.
    #[arg(long, default_value = "benchmark")]
    workload: String,
    /// km, pc or ab.
    #[arg(short, long)]
    strategy: String,
    /// Cluster count; required for km and refused otherwise.
    #[arg(short)]
    k: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
    /// Check partition, reload fragments from disk, compare every query
    /// with the unfragmented answer and run the per-fact routing oracle.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "benchmark")]
    workload: String,
    /// Fact counts: `a..b[:step]` (step defaults to 1000) or a comma list.
    #[arg(long, default_value = "1000..7000")]
    sizes: String,
    /// Comma list of nf, pc, ab, km.
    #[arg(long, default_value = "nf,pc,ab,km")]
    strategies: String,
    #[arg(short, long, default_value_t = 8)]
    k: usize,
    /// Cluster counts swept at every size: `a..b[:step]` or a comma list.
    #[arg(long)]
    ksweep: Option<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    overhead_runs: usize,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
    /// Also run the per-fact routing oracle on every configuration.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV files, or directories whose CSV files are all printed.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

fn parse_list(text: &str, default_step: usize, what: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parameter(format!("cannot read {what} {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Parameter(format!("empty {what} list")));
    }
    if let Some((a, rest)) = text.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (num(b)?, num(s)?),
            None => (num(rest)?, default_step),
        };
        let a = num(a)?;
        if step == 0 || b < a {
            return Err(bad());
        }
        return Ok((a..=b).step_by(step).collect());
    }
    text.split(',').map(num).collect()
}

fn load_workload(spec: &str, wh: &Warehouse) -> Result<BoundWorkload> {
    let workload = match spec {
        "sample" => parse_workload(SAMPLE_WORKLOAD)?,
        "benchmark" => parse_workload(BENCHMARK_WORKLOAD)?,
        path => read_workload(path)?,
    };
    bind_workload(&workload, &wh.meta)
}

fn model_path(dir_or_file: &Path) -> PathBuf {
    if dir_or_file.is_dir() {
        dir_or_file.join(MODEL_FILE)
    } else {
        dir_or_file.to_path_buf()
    }
}

fn thread_cap() -> Result<()> {
    let Ok(raw) = std::env::var("XFRAG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parameter(format!("XFRAG_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Parameter(format!("cannot size the thread pool: {e}")))
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let mut spec = GeneratorSpec::xweb(a.seed).with_facts(a.facts);
    for (dim, n) in [(CUSTOMER, a.customers), (SUPPLIER, a.suppliers), (DATE, a.dates), (PART, a.parts)] {
        if let Some(n) = n {
            spec = spec.with_dimension(dim, n);
        }
    }
    let wh = generate_warehouse(&spec)?;
    for p in save_warehouse(&wh, &a.out)? {
        say!("{}", p.display());
    }
    Ok(())
}

/// Rewrites `fragcounts.csv` in `dir` with `strategy`'s row replaced.
fn update_fragcounts(dir: &Path, strategy: Strategy, count: usize) -> Result<()> {
    let path = dir.join("fragcounts.csv");
    let mut rows: Vec<(String, usize)> = Vec::new();
    if path.exists() {
        let mut r = csv::Reader::from_path(&path)?;
        for rec in r.records() {
            let rec = rec?;
            if let (Some(s), Some(Ok(n))) = (rec.get(0), rec.get(1).map(str::parse)) {
                rows.push((s.to_string(), n));
            }
        }
    }
    rows.retain(|(s, _)| s != strategy.as_str());
    rows.push((strategy.as_str().to_string(), count));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["strategy", "fragment_count"])?;
    for (s, n) in &rows {
        w.write_record([s.as_str(), &n.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Consistency(e.to_string()))?;
    write_file(&path, &String::from_utf8_lossy(&bytes))
}

/// Removes the documents a previous run listed in its manifest.
fn clear_previous(frag_dir: &Path) -> Result<()> {
    let manifest = frag_dir.join(MANIFEST_FILE);
    if !manifest.exists() {
        return Ok(());
    }
    let old = read_manifest(&manifest)?;
    for f in &old.fragments {
        for p in f.facts.iter().chain(f.dimensions.iter().map(|(_, p)| p)) {
            let p = frag_dir.join(p);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            }
        }
    }
    Ok(())
}

fn cmd_fragment(a: &FragmentArgs) -> Result<()> {
    let strategy: Strategy = a.strategy.parse()?;
    let k = match (strategy, a.k) {
        (Strategy::Km, Some(k)) => k,
        (Strategy::Km, None) => return Err(Error::Parameter("km needs -k".into())),
        (_, Some(_)) => return Err(Error::Parameter(format!("-k only applies to km, not {strategy}"))),
        (_, None) => 0,
    };
    let wh = load_warehouse(model_path(a.warehouse.as_deref().unwrap_or(&a.out)))?;
    let workload = load_workload(&a.workload, &wh)?;
    let schema = derive_schema(&workload, &DeriveConfig { strategy, k, seed: a.seed })?;

    let out = &a.out;
    let qp = build_qp_matrix(&workload);
    write_file(&out.join("qp.csv"), &qp.to_csv())?;
    if strategy == Strategy::Km {
        let clustering = kmeans(&predicate_vectors(&qp), k, a.seed)?;
        let path = out.join("objectives.csv");
        let file = fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        clustering.write_objectives_csv(file)?;
    }
    write_file(&out.join("frag-schema.xml"), &schema_to_xml(&schema))?;
    write_file(
        &out.join("fragments.xq"),
        &emit_fragment_script(&schema, &workload.predicates, &wh.meta)?,
    )?;

    let fragments = materialize(&schema, &workload.predicates, &wh)?;
    let frag_dir = out.join("fragments");
    clear_previous(&frag_dir)?;
    let manifest = write_fragments(&fragments, &wh, &frag_dir)?;
    update_fragcounts(out, strategy, schema.fragment_count())?;

    say!(
        "{strategy}: {} fragments, {} documents in {}",
        schema.fragment_count(),
        manifest.file_count(),
        frag_dir.display()
    );
    for f in &fragments {
        say!("  {:<6} {:>7} facts{}", f.id, f.fact_count(), if f.is_else { "  (ELSE)" } else { "" });
    }

    if a.verify {
        check_partition(&fragments, wh.fact_count())?;
        let router = Router::new(&schema, &workload.predicates)?;
        let plans = route_workload(&router, &workload)?;
        if let Some(v) = routing_violations(&workload, &schema, &wh, &plans)?.first() {
            return Err(Error::Consistency(format!(
                "fact #{} answers {} but sits in pruned fragment {}",
                v.fact + 1,
                v.query_id,
                v.fragment_id
            )));
        }
        let reread = read_manifest(frag_dir.join(MANIFEST_FILE))?;
        let whole = execute_whole(&workload, &wh, a.seed)?;
        let split = execute_on_disk(&workload, &plans, &reread, &wh, strategy.as_str(), Some(k), a.seed)?;
        for ((q, got), want) in workload.queries.iter().zip(&split.results).zip(&whole.results) {
            if got != want {
                return Err(Error::Consistency(format!(
                    "{} returns {} facts over fragments, {} without",
                    q.id,
                    got.len(),
                    want.len()
                )));
            }
        }
        say!(
            "verified: partition of {} facts, {} queries equal to the unfragmented answers, routing sound",
            wh.fact_count(),
            workload.queries.len()
        );
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let sizes = parse_list(&a.sizes, 1000, "sizes")?;
    let methods = a
        .strategies
        .split(',')
        .map(|s| s.trim().parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    let ksweep = a.ksweep.as_deref().map(|s| parse_list(s, 1, "k range")).transpose()?.unwrap_or_default();
    let config = BenchConfig {
        ksweep_sizes: if ksweep.is_empty() { Vec::new() } else { sizes.clone() },
        sizes,
        methods,
        k: a.k,
        ksweep,
        seed: a.seed,
        overhead_runs: a.overhead_runs,
        verify: a.verify,
    };
    config.validate()?;
    // The shipped workloads bind against the generator's catalog.
    let meta_source = generate_warehouse(&GeneratorSpec::xweb(a.seed).with_facts(1))?;
    let workload = load_workload(&a.workload, &meta_source)?;
    let report = bench(&workload, &config)?;
    for p in report.write_csvs(&a.out)? {
        say!("{}", p.display());
    }
    Ok(())
}

fn print_table(path: &Path, out: &mut impl Write) -> Result<()> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let rows: Vec<Vec<String>> = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let numeric: Vec<bool> = (0..cols)
        .map(|c| rows.iter().skip(1).filter_map(|r| r.get(c)).all(|s| s.parse::<f64>().is_ok()))
        .collect();
    let io_err = |e| Error::Io { path: path.to_path_buf(), source: e };
    writeln!(out, "== {}", path.display()).map_err(io_err)?;
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = (0..cols)
            .map(|c| {
                let s = row.get(c).map_or("", String::as_str);
                if numeric[c] && i > 0 {
                    format!("{s:>w$}", w = widths[c])
                } else {
                    format!("{s:<w$}", w = widths[c])
                }
            })
            .collect();
        if let Err(e) = writeln!(out, "{}", cells.join("  ").trim_end()) {
            if e.kind() == io::ErrorKind::BrokenPipe {
                return Ok(());
            }
            return Err(io_err(e));
        }
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            writeln!(out, "{}", rule.join("  ")).map_err(io_err)?;
        }
    }
    writeln!(out).map_err(io_err)
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut files = Vec::new();
    for p in &a.paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::Io { path: p.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            read_file(p)?;
            files.push(p.clone());
        }
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for f in &files {
        print_table(f, &mut out)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { Error::Parameter(String::new()).exit_code() } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let result = thread_cap().and_then(|()| match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fragment(a) => cmd_fragment(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(a) => cmd_report(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xfrag: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
