use crate::error::{Error, Result};
use crate::predicate::{Atom, PredicateRef};
use crate::sat::satisfiable;
use crate::workload::BoundWorkload;

use super::{FragSchema, Strategy};

/// Minterm enumeration is exponential; larger predicate sets are refused.
pub const PC_PREDICATE_LIMIT: usize = 20;

/// Satisfiable minterms over the predicates of `dimension`, in workload
/// order. Minterm `m` negates predicate `i` iff bit `i` of `m` is set, and
/// minterms are listed by increasing `m`.
pub fn dimension_minterms(workload: &BoundWorkload, dimension: &str) -> Result<Vec<Vec<PredicateRef>>> {
    let preds: Vec<_> = workload
        .predicates
        .iter()
        .filter(|p| p.dimension == dimension)
        .collect();
    if preds.len() > PC_PREDICATE_LIMIT {
        return Err(Error::Parameter(format!(
            "{} predicates on {dimension} exceed the minterm limit of {PC_PREDICATE_LIMIT}",
            preds.len()
        )));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << preds.len()) {
        let atoms: Vec<Atom> = preds
            .iter()
            .enumerate()
            .map(|(i, p)| Atom::new(p, mask & (1 << i) != 0))
            .collect();
        if satisfiable(&atoms)? {
            out.push(
                atoms
                    .iter()
                    .map(|a| PredicateRef {
                        id: a.predicate.id.clone(),
                        negated: a.negated,
                    })
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// Minterm fragmentation restricted to the dimension sets queries use.
///
/// Every distinct set of dimensions that some query puts predicates on
/// yields the cross product of those dimensions' minterms. Sets are taken
/// largest first, ties in workload order of their dimensions. The first set's
/// minterms are already complete, so ELSE is flagged empty.
pub fn pc_schema(workload: &BoundWorkload) -> Result<FragSchema> {
    if workload.predicates.len() > PC_PREDICATE_LIMIT {
        return Err(Error::Parameter(format!(
            "predicate construction is limited to {PC_PREDICATE_LIMIT} predicates, the workload has {}",
            workload.predicates.len()
        )));
    }
    let mut dims: Vec<&str> = Vec::new();
    for p in &workload.predicates {
        if !dims.contains(&p.dimension.as_str()) {
            dims.push(&p.dimension);
        }
    }
    let minterms = dims
        .iter()
        .map(|d| dimension_minterms(workload, d))
        .collect::<Result<Vec<_>>>()?;

    let mut sets: Vec<Vec<usize>> = Vec::new();
    for q in &workload.queries {
        let mut set: Vec<usize> = q
            .predicate_ids
            .iter()
            .filter_map(|id| workload.predicate(id))
            .filter_map(|p| dims.iter().position(|d| *d == p.dimension))
            .collect();
        set.sort_unstable();
        set.dedup();
        if !set.is_empty() && !sets.contains(&set) {
            sets.push(set);
        }
    }
    sets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

    let mut groups: Vec<Vec<PredicateRef>> = Vec::new();
    for set in &sets {
        let mut combos: Vec<Vec<PredicateRef>> = vec![Vec::new()];
        for &d in set {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    minterms[d].iter().map(move |m| {
                        let mut c = prefix.clone();
                        c.extend(m.iter().cloned());
                        c
                    })
                })
                .collect();
        }
        groups.extend(combos);
    }
    FragSchema::from_groups(Strategy::Pc, groups, &workload.predicates, !sets.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::xweb_meta;
    use crate::workload::{bind_workload, parse_workload, BENCHMARK_WORKLOAD};

    fn bound(text: &str) -> BoundWorkload {
        bind_workload(&parse_workload(text).unwrap(), &xweb_meta()).unwrap()
    }

    fn customer(conds: &[&str]) -> String {
        conds
            .iter()
            .enumerate()
            .map(|(i, c)| {
                format!(
                    "for $x in //FactDoc/Fact, $y in //dimension[@dim-id=\"Customer\"]/Level/instance \
                     where $y/attribute[@id=\"c_nation_key\"]/@value{c} \
                     and $x/dimension[@dim-id=\"Customer\"]/@value-id=$y/@id return $x\n{}",
                    if i + 1 < conds.len() { "\n" } else { "" }
                )
            })
            .collect()
    }

    #[test]
    fn single_predicate_gives_two_minterms() {
        let w = bound(&customer(&["=\"1\""]));
        let s = pc_schema(&w).unwrap();
        assert_eq!(s.regular().len(), 2);
        assert!(s.else_empty);
    }

    #[test]
    fn contradictory_minterm_is_dropped() {
        let w = bound(&customer(&[">\"15\"", "=\"13\""]));
        let m = dimension_minterms(&w, "Customer").unwrap();
        assert_eq!(m.len(), 3);
        assert!(!m.contains(&vec![PredicateRef::positive("p1"), PredicateRef::positive("p2")]));
        // Brute force over 0..=30: which sign patterns occur.
        let mut seen: Vec<(bool, bool)> = (0..=30).map(|x| (x > 15, x == 13)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn benchmark_group_sizes() {
        let w = bound(BENCHMARK_WORKLOAD);
        let s = pc_schema(&w).unwrap();
        // Customer×Part 10·9, Part×Date 9·9, then Customer, Date, Part, Supplier.
        assert_eq!(s.regular().len(), 90 + 81 + 10 + 9 + 9 + 8);
        assert_eq!(dimension_minterms(&w, "Customer").unwrap().len(), 10);
        assert_eq!(dimension_minterms(&w, "Supplier").unwrap().len(), 8);
    }

    #[test]
    fn too_many_predicates_is_refused() {
        let conds: Vec<String> = (0..21).map(|i| format!("=\"{i}\"")).collect();
        let refs: Vec<&str> = conds.iter().map(String::as_str).collect();
        let w = bound(&customer(&refs));
        assert!(matches!(pc_schema(&w), Err(Error::Parameter(_))));
    }
}
