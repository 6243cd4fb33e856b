use crate::error::Result;
use crate::predicate::PredicateRef;
use crate::workload::BoundWorkload;

use super::{FragSchema, Strategy};

/// `values[p][q]` is the summed frequency of queries using both `p` and `q`;
/// the diagonal holds each predicate's own usage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffinityMatrix {
    pub predicates: Vec<String>,
    pub values: Vec<Vec<u64>>,
}

impl AffinityMatrix {
    pub fn get(&self, p: &str, q: &str) -> Option<u64> {
        let i = self.predicates.iter().position(|x| x == p)?;
        let j = self.predicates.iter().position(|x| x == q)?;
        Some(self.values[i][j])
    }
}

pub fn affinity_matrix(workload: &BoundWorkload) -> AffinityMatrix {
    let n = workload.predicates.len();
    let mut values = vec![vec![0u64; n]; n];
    for q in &workload.queries {
        let used: Vec<usize> = q
            .predicate_ids
            .iter()
            .filter_map(|id| workload.predicate_index(id))
            .collect();
        for &i in &used {
            for &j in &used {
                values[i][j] += u64::from(q.frequency);
            }
        }
    }
    AffinityMatrix {
        predicates: workload.predicates.iter().map(|p| p.id.clone()).collect(),
        values,
    }
}

/// Greedy cycle growth over the affinity graph.
///
/// A group starts from the strongest edge whose ends are both ungrouped and
/// grows along edges from a member to an ungrouped predicate as long as the
/// edge is at least as strong as the weakest edge already inside the group.
/// Whatever is left alone becomes a singleton. Ties go to lower indices.
pub fn ab_groups(aff: &AffinityMatrix) -> Vec<Vec<usize>> {
    let n = aff.predicates.len();
    let mut group_of: Vec<Option<usize>> = vec![None; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    loop {
        let mut seed: Option<(u64, usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let a = aff.values[i][j];
                if a == 0 || group_of[i].is_some() || group_of[j].is_some() {
                    continue;
                }
                if seed.is_none_or(|(best, _, _)| a > best) {
                    seed = Some((a, i, j));
                }
            }
        }
        let Some((mut weakest, i, j)) = seed else {
            break;
        };
        let g = groups.len();
        let mut members = vec![i, j];
        group_of[i] = Some(g);
        group_of[j] = Some(g);
        loop {
            let mut next: Option<(u64, usize)> = None;
            for r in (0..n).filter(|&r| group_of[r].is_none()) {
                let a = members.iter().map(|&m| aff.values[m][r]).max().unwrap_or(0);
                if a > 0 && a >= weakest && next.is_none_or(|(best, _)| a > best) {
                    next = Some((a, r));
                }
            }
            let Some((a, r)) = next else {
                break;
            };
            weakest = weakest.min(a);
            members.push(r);
            group_of[r] = Some(g);
        }
        members.sort_unstable();
        groups.push(members);
    }
    for (i, g) in group_of.iter().enumerate() {
        if g.is_none() {
            groups.push(vec![i]);
        }
    }
    groups.sort_by_key(|g| g[0]);
    groups
}

/// One fragment per affinity group, plus ELSE.
pub fn ab_schema(workload: &BoundWorkload) -> Result<FragSchema> {
    let aff = affinity_matrix(workload);
    let groups = ab_groups(&aff)
        .into_iter()
        .map(|g| {
            g.into_iter()
                .map(|i| PredicateRef::positive(aff.predicates[i].clone()))
                .collect()
        })
        .collect();
    FragSchema::from_groups(Strategy::Ab, groups, &workload.predicates, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::xweb_meta;
    use crate::workload::{bind_workload, parse_workload, render_workload, Workload, SAMPLE_WORKLOAD};

    fn bound(text: &str) -> BoundWorkload {
        bind_workload(&parse_workload(text).unwrap(), &xweb_meta()).unwrap()
    }

    /// The three rows the published matrix shows: q1, q2 and q10.
    fn published_rows() -> BoundWorkload {
        let full = bound(SAMPLE_WORKLOAD);
        let queries = full
            .queries
            .iter()
            .filter(|q| ["q1", "q2", "q10"].contains(&q.id.as_str()))
            .cloned()
            .collect();
        let w = Workload {
            queries,
            predicates: full.predicates.clone(),
        };
        bound(&render_workload(&w))
    }

    #[test]
    fn affinity_by_hand_on_published_rows() {
        let aff = affinity_matrix(&published_rows());
        assert_eq!(aff.get("p2", "p3"), Some(1));
        assert_eq!(aff.get("p1", "p2"), Some(0));
        assert_eq!(aff.get("p3", "p3"), Some(2));
        let groups = ab_groups(&aff);
        // p2-p3 and p3-p4 tie at 1; the lower pair seeds, p4 joins at 1.
        assert_eq!(groups, vec![vec![0], vec![1, 2, 3]]);
    }

    #[test]
    fn full_sample_groups() {
        let aff = affinity_matrix(&bound(SAMPLE_WORKLOAD));
        // p3-p4 co-occur in q4, q7, q8, q10; p2 edges are 3.
        assert_eq!(aff.get("p3", "p4"), Some(4));
        assert_eq!(aff.get("p2", "p3"), Some(3));
        assert_eq!(ab_groups(&aff), vec![vec![0], vec![1], vec![2, 3]]);
    }

    fn single(dim_var: &str, dim: &str, cond: &str, freq: u32, id: &str) -> String {
        format!(
            "(: id={id} freq={freq} :)\nfor $x in //FactDoc/Fact, ${dim_var} in //dimension[@dim-id=\"{dim}\"]/Level/instance \
             where ${dim_var}/{cond} and $x/dimension[@dim-id=\"{dim}\"]/@value-id=${dim_var}/@id return $x\n"
        )
    }

    #[test]
    fn disjoint_queries_give_singletons() {
        let text = [
            single("y", "Customer", "attribute[@id=\"c_region\"]/@value=\"ASIA\"", 1, "q1"),
            single("z", "Part", "attribute[@id=\"p_type\"]/@value=\"PBC\"", 2, "q2"),
        ]
        .join("\n");
        let aff = affinity_matrix(&bound(&text));
        assert_eq!(aff.values, vec![vec![1, 0], vec![0, 2]]);
        assert_eq!(ab_groups(&aff), vec![vec![0], vec![1]]);
    }

    #[test]
    fn frequency_two_equals_two_copies() {
        let cond = "attribute[@id=\"c_region\"]/@value=\"ASIA\"";
        let twice = [single("y", "Customer", cond, 1, "q1"), single("y", "Customer", cond, 1, "q2")].join("\n");
        let once = single("y", "Customer", cond, 2, "q1");
        assert_eq!(affinity_matrix(&bound(&twice)), affinity_matrix(&bound(&once)));
    }

    #[test]
    fn symmetric_with_usage_on_the_diagonal() {
        let w = bound(crate::workload::BENCHMARK_WORKLOAD);
        let aff = affinity_matrix(&w);
        for i in 0..aff.predicates.len() {
            let usage: u64 = w
                .queries
                .iter()
                .filter(|q| q.predicate_ids.contains(&aff.predicates[i]))
                .map(|q| u64::from(q.frequency))
                .sum();
            assert_eq!(aff.values[i][i], usage);
            for j in 0..aff.predicates.len() {
                assert_eq!(aff.values[i][j], aff.values[j][i]);
            }
        }
        let mut seen: Vec<usize> = ab_groups(&aff).concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..aff.predicates.len()).collect::<Vec<_>>());
    }
}
