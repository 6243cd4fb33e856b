use crate::error::Result;
use crate::predicate::{Atom, Predicate, PredicateRef};
use crate::sat::{check_excluding, conflict, satisfiable, Sat, DEFAULT_BUDGET};
use crate::strategies::FragSchema;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PruneReason {
    /// The query and the fragment's own conjunction contradict; the atoms
    /// form a minimal unsatisfiable subset.
    Contradiction(Vec<PredicateRef>),
    /// Every fact matching both would have gone to an earlier fragment.
    Shadowed,
    /// The schema declares ELSE empty.
    ElseDeclaredEmpty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingPlan {
    pub query_id: String,
    /// Fragment ids in schema order.
    pub relevant: Vec<String>,
    pub pruned: Vec<(String, PruneReason)>,
}

impl RoutingPlan {
    pub fn routes(&self, fragment_id: &str) -> bool {
        self.relevant.iter().any(|f| f == fragment_id)
    }
}

fn to_refs(atoms: &[Atom]) -> Vec<PredicateRef> {
    atoms
        .iter()
        .map(|a| PredicateRef {
            id: a.predicate.id.clone(),
            negated: a.negated,
        })
        .collect()
}

/// Schema-level fragment selection. Never looks at data.
///
/// A regular fragment is kept when the query, its own conjunction and the
/// negations of all earlier fragments can hold together; ELSE when the
/// query can hold outside every regular fragment. When the search budget
/// runs out the fragment is kept.
pub struct Router<'p> {
    schema: &'p FragSchema,
    own: Vec<Vec<Atom<'p>>>,
    /// Earlier fragments whose conjunction is compatible with fragment `i`'s.
    overlaps: Vec<Vec<usize>>,
    budget: usize,
}

impl<'p> Router<'p> {
    pub fn new(schema: &'p FragSchema, predicates: &'p [Predicate]) -> Result<Self> {
        schema.validate(predicates)?;
        let own = schema
            .regular()
            .iter()
            .map(|f| f.atoms(predicates))
            .collect::<Result<Vec<_>>>()?;
        let mut overlaps = Vec::with_capacity(own.len());
        for i in 0..own.len() {
            let mut list = Vec::new();
            for j in 0..i {
                let both: Vec<Atom> = own[i].iter().chain(&own[j]).copied().collect();
                if satisfiable(&both)? {
                    list.push(j);
                }
            }
            overlaps.push(list);
        }
        Ok(Router {
            schema,
            own,
            overlaps,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn schema(&self) -> &FragSchema {
        self.schema
    }

    /// Conjunctions among `candidates` still compatible with `base`.
    fn live(&self, base: &[Atom<'p>], candidates: impl Iterator<Item = usize>) -> Result<Vec<Vec<Atom<'p>>>> {
        let mut out = Vec::new();
        for j in candidates {
            let both: Vec<Atom> = base.iter().chain(&self.own[j]).copied().collect();
            if satisfiable(&both)? {
                out.push(self.own[j].clone());
            }
        }
        Ok(out)
    }

    pub fn route(&self, query_id: &str, query: &[Atom<'p>]) -> Result<RoutingPlan> {
        let mut plan = RoutingPlan {
            query_id: query_id.to_string(),
            relevant: Vec::new(),
            pruned: Vec::new(),
        };
        for (i, def) in self.schema.regular().iter().enumerate() {
            let base: Vec<Atom> = query.iter().chain(&self.own[i]).copied().collect();
            if let Some(core) = conflict(&base)? {
                plan.pruned
                    .push((def.id.clone(), PruneReason::Contradiction(to_refs(&core))));
                continue;
            }
            let excluded = self.live(&base, self.overlaps[i].iter().copied())?;
            match check_excluding(&base, &excluded, self.budget)? {
                Sat::Unsat => plan.pruned.push((def.id.clone(), PruneReason::Shadowed)),
                Sat::Sat | Sat::Unknown => plan.relevant.push(def.id.clone()),
            }
        }
        let else_id = self.schema.else_fragment().id.clone();
        if self.schema.else_empty {
            plan.pruned.push((else_id, PruneReason::ElseDeclaredEmpty));
        } else if let Some(core) = conflict(query)? {
            plan.pruned
                .push((else_id, PruneReason::Contradiction(to_refs(&core))));
        } else {
            let excluded = self.live(query, 0..self.own.len())?;
            match check_excluding(query, &excluded, self.budget)? {
                Sat::Unsat => plan.pruned.push((else_id, PruneReason::Shadowed)),
                Sat::Sat | Sat::Unknown => plan.relevant.push(else_id),
            }
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::xweb_meta;
    use crate::strategies::{ab_schema, km_schema, pc_schema};
    use crate::workload::{bind_workload, build_qp_matrix, parse_workload, BoundWorkload, BENCHMARK_WORKLOAD, SAMPLE_WORKLOAD};

    fn bound(text: &str) -> BoundWorkload {
        bind_workload(&parse_workload(text).unwrap(), &xweb_meta()).unwrap()
    }

    #[test]
    fn q2_on_the_sample_clustering() {
        let w = bound(SAMPLE_WORKLOAD);
        let schema = km_schema(&build_qp_matrix(&w), &w.predicates, 2, 42).unwrap();
        let router = Router::new(&schema, &w.predicates).unwrap();
        let q2 = w.query("q2").unwrap();
        let plan = router.route("q2", &w.atoms(q2)).unwrap();
        // q2 is p2 ∧ p3 and f2 is p2 ∧ p3 ∧ p4, so facts with ¬p4 stay in ELSE.
        assert_eq!(plan.relevant, vec!["f2", "f3"]);
        let (id, reason) = &plan.pruned[0];
        assert_eq!(id, "f1");
        let PruneReason::Contradiction(core) = reason else {
            panic!("{reason:?}")
        };
        let mut ids: Vec<&str> = core.iter().map(|r| r.id.as_str()).collect();
        ids.sort_unstable();
        assert_eq!(ids, vec!["p1", "p2"]);
    }

    #[test]
    fn q4_implies_no_else() {
        let w = bound(SAMPLE_WORKLOAD);
        let schema = km_schema(&build_qp_matrix(&w), &w.predicates, 2, 42).unwrap();
        let router = Router::new(&schema, &w.predicates).unwrap();
        // q4 uses p2, p3, p4: exactly f2's conjunction.
        let q4 = w.query("q4").unwrap();
        let plan = router.route("q4", &w.atoms(q4)).unwrap();
        assert_eq!(plan.relevant, vec!["f2"]);
        assert!(plan.pruned.contains(&("f3".into(), PruneReason::Shadowed)));
    }

    #[test]
    fn no_predicates_routes_everything() {
        let w = bound(SAMPLE_WORKLOAD);
        let schema = km_schema(&build_qp_matrix(&w), &w.predicates, 2, 42).unwrap();
        let router = Router::new(&schema, &w.predicates).unwrap();
        let plan = router.route("q0", &[]).unwrap();
        assert_eq!(plan.relevant, vec!["f1", "f2", "f3"]);
    }

    #[test]
    fn pc_routes_into_the_first_dimension_set_only() {
        let w = bound(BENCHMARK_WORKLOAD);
        let schema = pc_schema(&w).unwrap();
        let router = Router::new(&schema, &w.predicates).unwrap();
        let plan = router.route("all", &[]).unwrap();
        // Customer × Part minterms come first and are complete; every later
        // group is shadowed.
        assert_eq!(plan.relevant.len(), 90);
        assert!(plan
            .pruned
            .iter()
            .all(|(_, r)| matches!(r, PruneReason::Shadowed | PruneReason::ElseDeclaredEmpty)));
    }

    #[test]
    fn adding_a_predicate_never_routes_more() {
        let w = bound(BENCHMARK_WORKLOAD);
        for schema in [
            km_schema(&build_qp_matrix(&w), &w.predicates, 8, 7).unwrap(),
            ab_schema(&w).unwrap(),
        ] {
            let router = Router::new(&schema, &w.predicates).unwrap();
            for q in &w.queries {
                let atoms = w.atoms(q);
                let full = router.route(&q.id, &atoms).unwrap().relevant.len();
                let fewer = router.route(&q.id, &atoms[..atoms.len() - 1]).unwrap().relevant.len();
                assert!(full <= fewer, "{}: {full} > {fewer}", q.id);
            }
        }
    }
}
