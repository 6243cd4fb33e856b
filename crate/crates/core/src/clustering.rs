//! k-means over the predicate columns of the query-predicate matrix.
//!
//! Each restart seeds farthest-first from a different start point (a seeded
//! permutation of the inputs); restarts beyond the number of inputs use
//! distance-squared sampling instead. Lloyd iterations run to a fixed point
//! and are followed by single-point moves until neither changes anything.
//! The lowest objective wins and ties go to the earliest restart. Vectors are
//! sorted by predicate id before anything else happens, so caller order never
//! affects the result.

use std::cmp::Ordering;
use std::io::Write;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::predicate::natural_cmp;
use crate::workload::QpMatrix;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_ITERATIONS: usize = 100;
/// Largest input [`exhaustive_optimum`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 12;

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateVector {
    pub predicate_id: String,
    pub coords: Vec<f64>,
}

/// One vector per predicate column of `qp`.
pub fn predicate_vectors(qp: &QpMatrix) -> Vec<PredicateVector> {
    qp.predicates
        .iter()
        .enumerate()
        .map(|(j, id)| PredicateVector {
            predicate_id: id.clone(),
            coords: qp.column(j),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// Member ids in natural order; clusters ordered by their first member.
    pub clusters: Vec<Vec<String>>,
    /// `centroids[i]` is the mean of `clusters[i]`.
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    /// Objective after each Lloyd update of the winning run.
    pub iteration_objectives: Vec<f64>,
}

impl Clustering {
    pub fn cluster_of(&self, predicate_id: &str) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.iter().any(|p| p == predicate_id))
    }

    /// `iteration,objective` rows for the winning run.
    pub fn write_objectives_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "objective"])?;
        for (i, o) in self.iteration_objectives.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{o:.12}")])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: DEFAULT_RESTARTS,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean(points: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for p in points {
        for (acc, x) in m.iter_mut().zip(p.iter()) {
            *acc += x;
        }
    }
    let n = points.len().max(1) as f64;
    m.iter_mut().for_each(|x| *x /= n);
    m
}

/// Total intra-cluster variance of `clusters`, given as member indices.
pub fn objective(points: &[Vec<f64>], clusters: &[Vec<usize>]) -> f64 {
    let dim = points.first().map_or(0, Vec::len);
    clusters
        .iter()
        .map(|c| {
            let members: Vec<&[f64]> = c.iter().map(|&i| points[i].as_slice()).collect();
            let mu = mean(&members, dim);
            members.iter().map(|p| sq_dist(p, &mu)).sum::<f64>()
        })
        .sum()
}

fn canonical(vectors: &[PredicateVector]) -> Result<Vec<&PredicateVector>> {
    let mut sorted: Vec<&PredicateVector> = vectors.iter().collect();
    sorted.sort_by(|a, b| natural_cmp(&a.predicate_id, &b.predicate_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].predicate_id == w[1].predicate_id) {
        return Err(Error::Parameter(format!(
            "duplicate predicate vector {}",
            w[0].predicate_id
        )));
    }
    if let Some(first) = sorted.first() {
        let len = first.coords.len();
        if let Some(v) = sorted.iter().find(|v| v.coords.len() != len) {
            return Err(Error::Parameter(format!(
                "vector {} has length {}, expected {len}",
                v.predicate_id,
                v.coords.len()
            )));
        }
    }
    Ok(sorted)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds the number of predicates ({n})"
        )));
    }
    Ok(())
}

/// Builds the reported clustering from an assignment over canonical points.
fn finish(
    ids: &[&str],
    points: &[Vec<f64>],
    k: usize,
    assignment: &[usize],
    iteration_objectives: Vec<f64>,
) -> Clustering {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        groups[c].push(i);
    }
    groups.retain(|g| !g.is_empty());
    // Members are already in canonical order, so the first member decides.
    groups.sort_by_key(|g| g[0]);
    let dim = points.first().map_or(0, Vec::len);
    let centroids = groups
        .iter()
        .map(|g| {
            let members: Vec<&[f64]> = g.iter().map(|&i| points[i].as_slice()).collect();
            mean(&members, dim)
        })
        .collect();
    Clustering {
        k,
        objective: objective(points, &groups),
        clusters: groups
            .iter()
            .map(|g| g.iter().map(|&i| ids[i].to_string()).collect())
            .collect(),
        centroids,
        iteration_objectives,
    }
}

struct Run {
    assignment: Vec<usize>,
    objectives: Vec<f64>,
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, mu) in centroids.iter().enumerate() {
                let d = sq_dist(p, mu);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Renumbers clusters by their first member, the order results are
/// reported in, so a converged labelling is also the reported one.
fn relabel(assignment: &mut [usize], k: usize) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for c in assignment.iter_mut() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
        *c = map[*c];
    }
}

/// Moves, for each empty cluster, the member of the currently largest
/// cluster farthest from that cluster's mean.
fn repair_empty(points: &[Vec<f64>], assignment: &mut [usize], k: usize) {
    let dim = points.first().map_or(0, Vec::len);
    loop {
        let mut sizes = vec![0usize; k];
        for &c in assignment.iter() {
            sizes[c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        // max_by_key keeps the last maximum; scan by hand for the first.
        let mut largest = 0;
        for (c, &s) in sizes.iter().enumerate() {
            if s > sizes[largest] {
                largest = c;
            }
        }
        let members: Vec<usize> = (0..points.len()).filter(|&i| assignment[i] == largest).collect();
        let refs: Vec<&[f64]> = members.iter().map(|&i| points[i].as_slice()).collect();
        let mu = mean(&refs, dim);
        let mut far = members[0];
        let mut far_d = -1.0;
        for &i in &members {
            let d = sq_dist(&points[i], &mu);
            if d > far_d {
                far = i;
                far_d = d;
            }
        }
        assignment[far] = empty;
    }
}

fn centroids_of(points: &[Vec<f64>], assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    (0..k)
        .map(|c| {
            let members: Vec<&[f64]> = assignment
                .iter()
                .enumerate()
                .filter(|(_, &a)| a == c)
                .map(|(i, _)| points[i].as_slice())
                .collect();
            mean(&members, dim)
        })
        .collect()
}

fn groups_of(assignment: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        groups[c].push(i);
    }
    groups
}

/// Lloyd iterations until the assignment stops changing. `previous` is the
/// assignment the centroids were computed from, if any.
fn lloyd(
    points: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    mut previous: Option<Vec<usize>>,
    budget: &mut usize,
    objectives: &mut Vec<f64>,
) -> Vec<usize> {
    let k = centroids.len();
    while *budget > 0 {
        let mut assignment = assign(points, &centroids);
        repair_empty(points, &mut assignment, k);
        relabel(&mut assignment, k);
        if previous.as_ref() == Some(&assignment) {
            break;
        }
        *budget -= 1;
        centroids = centroids_of(points, &assignment, k);
        objectives.push(objective(points, &groups_of(&assignment, k)));
        previous = Some(assignment);
    }
    previous.unwrap_or_else(|| assign(points, &centroids))
}

/// One pass of single-point moves, each taken only when it lowers the
/// objective: moving `x` from `A` to `B` changes it by
/// `|B|/(|B|+1)·d(x,μB) − |A|/(|A|−1)·d(x,μA)`.
fn hartigan_pass(points: &[Vec<f64>], assignment: &mut [usize], k: usize) -> bool {
    let mut centroids = centroids_of(points, assignment, k);
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    let mut moved = false;
    for (i, x) in points.iter().enumerate() {
        let a = assignment[i];
        if sizes[a] < 2 {
            continue;
        }
        let na = sizes[a] as f64;
        let removal = na / (na - 1.0) * sq_dist(x, &centroids[a]);
        let mut best = None;
        let mut best_cost = removal - 1e-12;
        for b in (0..k).filter(|&b| b != a) {
            let nb = sizes[b] as f64;
            let cost = nb / (nb + 1.0) * sq_dist(x, &centroids[b]);
            if cost < best_cost {
                best = Some(b);
                best_cost = cost;
            }
        }
        if let Some(b) = best {
            assignment[i] = b;
            sizes[a] -= 1;
            sizes[b] += 1;
            centroids = centroids_of(points, assignment, k);
            moved = true;
        }
    }
    moved
}

/// Lloyd to a fixed point, then single-point moves, repeated until neither
/// changes anything or the iteration budget runs out.
fn run_from(points: &[Vec<f64>], centroids: Vec<Vec<f64>>, max_iterations: usize) -> Run {
    let k = centroids.len();
    let mut budget = max_iterations;
    let mut objectives = Vec::new();
    let mut assignment = lloyd(points, centroids, None, &mut budget, &mut objectives);
    while budget > 0 && hartigan_pass(points, &mut assignment, k) {
        budget -= 1;
        objectives.push(objective(points, &groups_of(&assignment, k)));
        let centroids = centroids_of(points, &assignment, k);
        assignment = lloyd(points, centroids, Some(assignment), &mut budget, &mut objectives);
    }
    Run {
        assignment,
        objectives,
    }
}

/// Binary columns tie a lot, so equally far candidates are drawn with `rng`.
fn farthest_first(
    points: &[Vec<f64>],
    k: usize,
    start: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut chosen = vec![start];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[start])).collect();
    while chosen.len() < k {
        let far = (0..points.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| nearest[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let candidates: Vec<usize> = (0..points.len())
            .filter(|i| !chosen.contains(i) && nearest[*i] >= far - TIE_EPS)
            .collect();
        let next = *candidates.choose(rng).expect("k <= n leaves an unchosen point");
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Seeds after the first are drawn with probability proportional to their
/// squared distance from the nearest seed so far.
fn d2_sample(points: &[Vec<f64>], k: usize, start: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![start];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[start])).collect();
    while chosen.len() < k {
        let total: f64 = (0..points.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| nearest[i])
            .sum();
        let unchosen: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
        let next = if total <= 0.0 {
            *unchosen.choose(rng).expect("k <= n leaves an unchosen point")
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = *unchosen.last().expect("k <= n leaves an unchosen point");
            for &i in &unchosen {
                if target < nearest[i] {
                    pick = i;
                    break;
                }
                target -= nearest[i];
            }
            pick
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// k-means with the default restart schedule.
pub fn kmeans(vectors: &[PredicateVector], k: usize, seed: u64) -> Result<Clustering> {
    kmeans_with(vectors, k, seed, &KMeansOptions::default())
}

pub fn kmeans_with(
    vectors: &[PredicateVector],
    k: usize,
    seed: u64,
    options: &KMeansOptions,
) -> Result<Clustering> {
    let sorted = canonical(vectors)?;
    check_k(k, sorted.len())?;
    if options.restarts == 0 || options.max_iterations == 0 {
        return Err(Error::Parameter(
            "restarts and max_iterations must be positive".into(),
        ));
    }
    let ids: Vec<&str> = sorted.iter().map(|v| v.predicate_id.as_str()).collect();
    let points: Vec<Vec<f64>> = sorted.iter().map(|v| v.coords.clone()).collect();
    let n = points.len();

    // Restart r starts from the r-th point of a seeded permutation, so small
    // inputs get every start point tried.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let runs: Vec<Run> = (0..options.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            let seeds = if r < n {
                farthest_first(&points, k, order[r], &mut rng)
            } else {
                d2_sample(&points, k, order[r % n], &mut rng)
            };
            run_from(&points, seeds, options.max_iterations)
        })
        .collect();

    let mut best = 0;
    let mut best_obj = f64::INFINITY;
    for (r, run) in runs.iter().enumerate() {
        let obj = objective(&points, &groups_of(&run.assignment, k));
        if obj < best_obj - TIE_EPS {
            best = r;
            best_obj = obj;
        }
    }
    let run = runs.into_iter().nth(best).expect("at least one restart");
    Ok(finish(&ids, &points, k, &run.assignment, run.objectives))
}

/// Lloyd iterations starting from the given centroids, no reseeding.
pub fn refine(vectors: &[PredicateVector], centroids: &[Vec<f64>]) -> Result<Clustering> {
    let sorted = canonical(vectors)?;
    check_k(centroids.len(), sorted.len())?;
    let ids: Vec<&str> = sorted.iter().map(|v| v.predicate_id.as_str()).collect();
    let points: Vec<Vec<f64>> = sorted.iter().map(|v| v.coords.clone()).collect();
    if let Some(c) = centroids.iter().find(|c| points.first().is_some_and(|p| p.len() != c.len())) {
        return Err(Error::Parameter(format!(
            "centroid length {} does not match vector length",
            c.len()
        )));
    }
    let run = run_from(&points, centroids.to_vec(), MAX_ITERATIONS);
    Ok(finish(&ids, &points, centroids.len(), &run.assignment, run.objectives))
}

/// Minimum-objective partition into exactly `k` nonempty blocks, by
/// enumeration of restricted growth strings.
///
/// Splitting a block never raises the objective, so the optimum over at most
/// `k` blocks is always attained with exactly `k`. Among equal objectives the
/// partition whose sorted cluster list is lexicographically smallest wins.
pub fn exhaustive_optimum(vectors: &[PredicateVector], k: usize) -> Result<Clustering> {
    let sorted = canonical(vectors)?;
    if sorted.len() > EXHAUSTIVE_LIMIT {
        return Err(Error::Parameter(format!(
            "exhaustive search is limited to {EXHAUSTIVE_LIMIT} vectors, got {}",
            sorted.len()
        )));
    }
    check_k(k, sorted.len())?;
    let ids: Vec<&str> = sorted.iter().map(|v| v.predicate_id.as_str()).collect();
    let points: Vec<Vec<f64>> = sorted.iter().map(|v| v.coords.clone()).collect();
    let dim = points.first().map_or(0, Vec::len);

    // Blocks of a restricted growth string come out ordered by first member,
    // which over canonical points is the sorted cluster list.
    fn blocks(rgs: &[usize]) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, &b) in rgs.iter().enumerate() {
            if b == out.len() {
                out.push(Vec::new());
            }
            out[b].push(i);
        }
        out
    }

    struct Search<'a> {
        points: &'a [Vec<f64>],
        k: usize,
        rgs: Vec<usize>,
        sums: Vec<Vec<f64>>,
        sq: Vec<f64>,
        counts: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn block_sse(&self, b: usize) -> f64 {
            if self.counts[b] == 0 {
                return 0.0;
            }
            let norm: f64 = self.sums[b].iter().map(|x| x * x).sum();
            self.sq[b] - norm / self.counts[b] as f64
        }

        fn visit(&mut self, i: usize, used: usize) {
            let n = self.points.len();
            // Not enough points left to open the missing blocks.
            if self.k - used > n - i {
                return;
            }
            if i == n {
                let obj: f64 = (0..self.k).map(|b| self.block_sse(b)).sum();
                let better = match &self.best {
                    None => true,
                    Some((o, _)) if obj < o - TIE_EPS => true,
                    Some((o, rgs)) => obj <= o + TIE_EPS && blocks(&self.rgs) < blocks(rgs),
                };
                if better {
                    self.best = Some((obj, self.rgs.clone()));
                }
                return;
            }
            let limit = (used + 1).min(self.k);
            for b in 0..limit {
                self.rgs[i] = b;
                let p = &self.points[i];
                for (s, x) in self.sums[b].iter_mut().zip(p) {
                    *s += x;
                }
                self.sq[b] += p.iter().map(|x| x * x).sum::<f64>();
                self.counts[b] += 1;
                self.visit(i + 1, used.max(b + 1));
                let p = &self.points[i];
                for (s, x) in self.sums[b].iter_mut().zip(p) {
                    *s -= x;
                }
                self.sq[b] -= p.iter().map(|x| x * x).sum::<f64>();
                self.counts[b] -= 1;
            }
        }
    }

    let mut search = Search {
        points: &points,
        k,
        rgs: vec![0; points.len()],
        sums: vec![vec![0.0; dim]; k],
        sq: vec![0.0; k],
        counts: vec![0; k],
        best: None,
    };
    search.visit(0, 0);
    let (_, rgs) = search.best.expect("k <= n admits a partition");
    Ok(finish(&ids, &points, k, &rgs, Vec::new()))
}

/// Compares two partitions as sets of sets of ids.
pub fn same_partition(a: &[Vec<String>], b: &[Vec<String>]) -> bool {
    fn norm(p: &[Vec<String>]) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = p
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_by(|x, y| natural_cmp(x, y));
                c
            })
            .collect();
        out.sort_by(|x, y| {
            x.iter()
                .zip(y)
                .map(|(a, b)| natural_cmp(a, b))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(x.len().cmp(&y.len()))
        });
        out
    }
    norm(a) == norm(b)
}
