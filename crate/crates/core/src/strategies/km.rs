use crate::clustering::{kmeans, predicate_vectors};
use crate::error::{Error, Result};
use crate::predicate::{Predicate, PredicateRef};
use crate::workload::QpMatrix;

use super::{FragSchema, Strategy};

/// One fragment per k-means cluster of the QP columns, plus ELSE.
///
/// Clusters come out ordered by their first predicate, which fixes the
/// fragment ids.
pub fn km_schema(qp: &QpMatrix, predicates: &[Predicate], k: usize, seed: u64) -> Result<FragSchema> {
    if qp.predicates.len() != predicates.len()
        || qp.predicates.iter().zip(predicates).any(|(a, p)| *a != p.id)
    {
        return Err(Error::Consistency(
            "QP matrix columns do not match the predicate list".into(),
        ));
    }
    let clustering = kmeans(&predicate_vectors(qp), k, seed)?;
    let groups = clustering
        .clusters
        .iter()
        .map(|c| c.iter().map(PredicateRef::positive).collect())
        .collect();
    FragSchema::from_groups(Strategy::Km, groups, predicates, false)
}
