use std::io::Write;

use crate::error::Result;

use super::BoundWorkload;

/// Binary query × predicate usage matrix: `cells[i][j] == 1` iff query `i`
/// uses predicate `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QpMatrix {
    pub queries: Vec<String>,
    pub predicates: Vec<String>,
    pub cells: Vec<Vec<u8>>,
}

impl QpMatrix {
    /// Column `j` as a real vector, the point k-means clusters.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.cells.iter().map(|row| row[j] as f64).collect()
    }

    pub fn column_sum(&self, j: usize) -> usize {
        self.cells.iter().map(|row| row[j] as usize).sum()
    }

    /// CSV with a header of predicate ids and one row per query.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["query".to_string()];
        header.extend(self.predicates.iter().cloned());
        w.write_record(&header)?;
        for (q, row) in self.queries.iter().zip(&self.cells) {
            let mut record = vec![q.clone()];
            record.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&record)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }
}

pub fn build_qp_matrix(workload: &BoundWorkload) -> QpMatrix {
    let predicates: Vec<String> = workload.predicates.iter().map(|p| p.id.clone()).collect();
    let cells = workload
        .queries
        .iter()
        .map(|q| {
            predicates
                .iter()
                .map(|p| u8::from(q.predicate_ids.contains(p)))
                .collect()
        })
        .collect();
    QpMatrix {
        queries: workload.queries.iter().map(|q| q.id.clone()).collect(),
        predicates,
        cells,
    }
}
