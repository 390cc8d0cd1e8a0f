//! Per-slot assignment: cost matrices with virtual padding, the Hungarian
//! method, and random-permutation assignment.
//!
//! With `k` powered servers and `m` pending jobs the matrix is square of
//! size `k + m`: real server rows are padded with `m` virtual server rows
//! (meaning "job stays unserved") and real job columns with `k` virtual job
//! columns (meaning "server idles"). Assigning server `i` to job `j` costs
//!
//! ```text
//! e_slot + exp((delay_j - deadline_j) / tau) * max(w_j - speed_i * tau, 0)
//! ```
//!
//! leaving a job unserved costs `exp((delay_j - deadline_j) / tau) * w_j`,
//! an idle powered server costs `e_slot`, and the virtual-virtual block is
//! zero.

use thiserror::Error;

use crate::model::EnergyParams;
use crate::rng::{random_permutation, SplitMix64};

/// Cap on the urgency exponent `(delay - deadline) / tau`. Runs that strand
/// a job hundreds of slots past its deadline (randomized routing during long
/// setups) would otherwise push `exp` past f64 range; beyond the cap the
/// urgency saturates and relative order among such jobs falls to their
/// remaining demand.
const EXP_ARG_CAP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    Server(u32),
    /// Padding row: the k-th virtual server.
    VirtualServer(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColLabel {
    Job(u32),
    /// Padding column: the k-th virtual job.
    VirtualJob(u32),
}

/// Square cost matrix for one slot.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    size: usize,
    costs: Vec<f64>,
    row_labels: Vec<RowLabel>,
    col_labels: Vec<ColLabel>,
}

/// Per-job inputs to the cost formula: the demand and delay carried over
/// from the previous slot and the deadline in seconds.
#[derive(Debug, Clone, Copy)]
pub struct JobCost {
    pub id: u32,
    pub remaining: f64,
    pub delay: f64,
    pub deadline: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum AssignError {
    #[error("nothing to assign: no powered servers and no jobs")]
    Empty,
    #[error("matrix rows have unequal lengths")]
    Ragged,
    #[error("matrix entry at ({row}, {col}) is not finite")]
    NotFinite { row: usize, col: usize },
}

impl CostMatrix {
    /// Builds the padded matrix for one slot. `on_servers` are (id, speed)
    /// pairs of powered servers; jobs must have positive remaining demand.
    pub fn build(
        jobs: &[JobCost],
        on_servers: &[(u32, f64)],
        energy: &EnergyParams,
    ) -> Result<CostMatrix, AssignError> {
        let k = on_servers.len();
        let m = jobs.len();
        let size = k + m;
        if size == 0 {
            return Err(AssignError::Empty);
        }

        let urgency =
            |j: &JobCost| -> f64 { ((j.delay - j.deadline) / energy.tau).min(EXP_ARG_CAP).exp() };

        let mut costs = vec![0.0; size * size];
        for (r, &(_, speed)) in on_servers.iter().enumerate() {
            for (c, job) in jobs.iter().enumerate() {
                let shortfall = (job.remaining - speed * energy.tau).max(0.0);
                costs[r * size + c] = energy.e_slot + urgency(job) * shortfall;
            }
            // Virtual job columns: the server idles but stays powered.
            for c in m..size {
                costs[r * size + c] = energy.e_slot;
            }
        }
        for r in k..size {
            // Virtual server rows: the job in this column goes unserved.
            for (c, job) in jobs.iter().enumerate() {
                costs[r * size + c] = urgency(job) * job.remaining;
            }
            // Virtual-virtual block stays zero.
        }

        let row_labels = on_servers
            .iter()
            .map(|&(id, _)| RowLabel::Server(id))
            .chain((1..=m as u32).map(RowLabel::VirtualServer))
            .collect();
        let col_labels = jobs
            .iter()
            .map(|j| ColLabel::Job(j.id))
            .chain((1..=k as u32).map(ColLabel::VirtualJob))
            .collect();

        Ok(CostMatrix { size, costs, row_labels, col_labels })
    }

    /// Builds a matrix from raw rows with synthetic labels; rows must be
    /// square and finite.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<CostMatrix, AssignError> {
        let size = rows.len();
        if size == 0 {
            return Err(AssignError::Empty);
        }
        let mut costs = Vec::with_capacity(size * size);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(AssignError::Ragged);
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(AssignError::NotFinite { row: r, col: c });
                }
                costs.push(v);
            }
        }
        let row_labels = (1..=size as u32).map(RowLabel::Server).collect();
        let col_labels = (1..=size as u32).map(ColLabel::Job).collect();
        Ok(CostMatrix { size, costs, row_labels, col_labels })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.size + col]
    }

    pub fn row_labels(&self) -> &[RowLabel] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[ColLabel] {
        &self.col_labels
    }

    /// CSV dump with labels in the header row/column, for debugging.
    pub fn to_csv(&self) -> String {
        fn row_name(l: &RowLabel) -> String {
            match l {
                RowLabel::Server(id) => format!("server{}", id),
                RowLabel::VirtualServer(k) => format!("vserver{}", k),
            }
        }
        fn col_name(l: &ColLabel) -> String {
            match l {
                ColLabel::Job(id) => format!("job{}", id),
                ColLabel::VirtualJob(k) => format!("vjob{}", k),
            }
        }
        let mut out = String::new();
        out.push_str("row");
        for l in &self.col_labels {
            out.push(',');
            out.push_str(&col_name(l));
        }
        out.push('\n');
        for (r, l) in self.row_labels.iter().enumerate() {
            out.push_str(&row_name(l));
            for c in 0..self.size {
                out.push(',');
                out.push_str(&format!("{}", self.at(r, c)));
            }
            out.push('\n');
        }
        out
    }
}

/// A perfect matching of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `pairs[row] = column`.
    pub pairs: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    fn from_pairs(matrix: &CostMatrix, pairs: Vec<usize>) -> Assignment {
        let total_cost = pairs.iter().enumerate().map(|(r, &c)| matrix.at(r, c)).sum();
        Assignment { pairs, total_cost }
    }

    /// Real (server id, job id) pairs selected by this matching, skipping
    /// any pair that touches a virtual row or column.
    pub fn server_job_pairs(&self, matrix: &CostMatrix) -> Vec<(u32, u32)> {
        self.pairs
            .iter()
            .enumerate()
            .filter_map(|(r, &c)| match (matrix.row_labels[r], matrix.col_labels[c]) {
                (RowLabel::Server(s), ColLabel::Job(j)) => Some((s, j)),
                _ => None,
            })
            .collect()
    }
}

/// Minimum-cost perfect matching in O(n^3) via shortest augmenting paths on
/// dual potentials. Ties are broken toward the lowest column index at every
/// augmenting step, so the result is deterministic.
pub fn hungarian(matrix: &CostMatrix) -> Result<Assignment, AssignError> {
    let n = matrix.size;
    for r in 0..n {
        for c in 0..n {
            if !matrix.at(r, c).is_finite() {
                return Err(AssignError::NotFinite { row: r, col: c });
            }
        }
    }

    // Potentials over rows/columns; `owner[c]` is the row matched to column
    // c, with an extra sentinel column n used to start each augmentation.
    let mut row_pot = vec![0.0f64; n];
    let mut col_pot = vec![0.0f64; n + 1];
    let mut owner: Vec<Option<usize>> = vec![None; n + 1];

    for row in 0..n {
        let mut cur_col = n;
        owner[cur_col] = Some(row);
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prev = vec![n; n + 1];
        let mut visited = vec![false; n + 1];

        while let Some(cur_row) = owner[cur_col] {
            visited[cur_col] = true;
            let mut delta = f64::INFINITY;
            let mut next_col = n;
            for c in 0..n {
                if visited[c] {
                    continue;
                }
                let reduced = matrix.at(cur_row, c) - row_pot[cur_row] - col_pot[c];
                if reduced < min_to[c] {
                    min_to[c] = reduced;
                    prev[c] = cur_col;
                }
                if min_to[c] < delta {
                    delta = min_to[c];
                    next_col = c;
                }
            }
            for c in 0..=n {
                if visited[c] {
                    if let Some(r) = owner[c] {
                        row_pot[r] += delta;
                    }
                    col_pot[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            cur_col = next_col;
        }

        // Walk the augmenting path back to the sentinel.
        while cur_col != n {
            let p = prev[cur_col];
            owner[cur_col] = owner[p];
            cur_col = p;
        }
    }

    let mut pairs = vec![0usize; n];
    for c in 0..n {
        pairs[owner[c].expect("perfect matching")] = c;
    }
    Ok(Assignment::from_pairs(matrix, pairs))
}

/// Uniformly random permutation assignment (the randomized-routing step),
/// drawn by Fisher–Yates on the caller's generator.
pub fn random_assignment(
    matrix: &CostMatrix,
    rng: &mut SplitMix64,
) -> Result<Assignment, AssignError> {
    let n = matrix.size;
    for r in 0..n {
        for c in 0..n {
            if !matrix.at(r, c).is_finite() {
                return Err(AssignError::NotFinite { row: r, col: c });
            }
        }
    }
    let pairs = random_permutation(rng, n);
    Ok(Assignment::from_pairs(matrix, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        fn rec(chosen: &mut Vec<usize>, rest: Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if rest.is_empty() {
                out.push(chosen.clone());
                return;
            }
            for (i, &x) in rest.iter().enumerate() {
                let mut rest2 = rest.clone();
                rest2.remove(i);
                chosen.push(x);
                rec(chosen, rest2, out);
                chosen.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), (0..n).collect(), &mut out);
        out
    }

    fn brute_force_min(matrix: &CostMatrix) -> f64 {
        permutations(matrix.size())
            .into_iter()
            .map(|perm| perm.iter().enumerate().map(|(r, &c)| matrix.at(r, c)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    fn brute_force_argmin_set(matrix: &CostMatrix) -> Vec<Vec<usize>> {
        let best = brute_force_min(matrix);
        permutations(matrix.size())
            .into_iter()
            .filter(|perm| {
                let cost: f64 =
                    perm.iter().enumerate().map(|(r, &c)| matrix.at(r, c)).sum();
                (cost - best).abs() <= 1e-9 * (1.0 + best.abs())
            })
            .collect()
    }

    fn random_matrix(rng: &mut crate::rng::SplitMix64, n: usize, span: u64) -> CostMatrix {
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| rng.below(span) as f64).collect()).collect();
        CostMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn block_layout_of_two_servers_four_jobs() {
        let energy = EnergyParams::defaults(250);
        let jobs: Vec<JobCost> = (1..=4)
            .map(|id| JobCost { id, remaining: 5.0 + id as f64, delay: 1.0, deadline: 3.0 })
            .collect();
        let servers = [(1u32, 4.0), (2u32, 2.0)];
        let m = CostMatrix::build(&jobs, &servers, &energy).unwrap();
        assert_eq!(m.size(), 6);
        assert_eq!(m.row_labels()[..2], [RowLabel::Server(1), RowLabel::Server(2)]);
        assert_eq!(m.row_labels()[2], RowLabel::VirtualServer(1));
        assert_eq!(m.col_labels()[4], ColLabel::VirtualJob(1));

        let urgency = |j: &JobCost| ((j.delay - j.deadline) / energy.tau).exp();
        // Real server x real job block.
        for (r, &(_, speed)) in servers.iter().enumerate() {
            for (c, j) in jobs.iter().enumerate() {
                let expect = 200.0 + urgency(j) * (j.remaining - speed).max(0.0);
                assert!((m.at(r, c) - expect).abs() < 1e-12);
            }
        }
        // Virtual job columns are constant e_slot on real rows.
        for r in 0..2 {
            for c in 4..6 {
                assert_eq!(m.at(r, c), 200.0);
            }
        }
        // Virtual server rows repeat the unserved cost of their column.
        for r in 2..6 {
            for (c, j) in jobs.iter().enumerate() {
                assert!((m.at(r, c) - urgency(j) * j.remaining).abs() < 1e-12);
            }
            for c in 4..6 {
                assert_eq!(m.at(r, c), 0.0);
            }
        }
    }

    #[test]
    fn assignment_cost_uses_positive_part_and_exponent() {
        let energy = EnergyParams::defaults(250);
        // delay equals deadline: exp(0) = 1, shortfall 1 cycle.
        let jobs = [JobCost { id: 1, remaining: 5.0, delay: 3.0, deadline: 3.0 }];
        let m = CostMatrix::build(&jobs, &[(1, 4.0)], &energy).unwrap();
        assert!((m.at(0, 0) - 201.0).abs() < 1e-12);

        // Demand below one slot of service: plain e_slot, any delay.
        let jobs = [JobCost { id: 1, remaining: 3.5, delay: 17.0, deadline: 2.0 }];
        let m = CostMatrix::build(&jobs, &[(1, 4.0)], &energy).unwrap();
        assert_eq!(m.at(0, 0), 200.0);
    }

    #[test]
    fn empty_slot_is_an_error() {
        let energy = EnergyParams::defaults(250);
        match CostMatrix::build(&[], &[], &energy) {
            Err(AssignError::Empty) => {}
            other => panic!("expected Empty, got {:?}", other.map(|m| m.size())),
        }
    }

    #[test]
    fn hungarian_single_cell() {
        let m = CostMatrix::from_rows(vec![vec![5.0]]).unwrap();
        let a = hungarian(&m).unwrap();
        assert_eq!(a.pairs, vec![0]);
        assert_eq!(a.total_cost, 5.0);
    }

    #[test]
    fn hungarian_picks_the_zero_diagonal() {
        let m = CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let a = hungarian(&m).unwrap();
        assert_eq!(a.pairs, vec![0, 1]);
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn hungarian_matches_brute_force_on_random_matrices() {
        let mut rng = crate::rng::SplitMix64::new(11);
        for _ in 0..200 {
            let m = random_matrix(&mut rng, 5, 100);
            let a = hungarian(&m).unwrap();
            let best = brute_force_min(&m);
            assert!((a.total_cost - best).abs() <= 1e-9 * (1.0 + best.abs()));
            // pairs is a bijection and the cost sums the selected entries.
            let mut seen = vec![false; 5];
            let mut recomputed = 0.0;
            for (r, &c) in a.pairs.iter().enumerate() {
                assert!(!seen[c]);
                seen[c] = true;
                recomputed += m.at(r, c);
            }
            assert_eq!(recomputed, a.total_cost);
        }
    }

    #[test]
    fn hungarian_handles_negative_entries() {
        let mut rng = crate::rng::SplitMix64::new(13);
        for _ in 0..50 {
            let rows: Vec<Vec<f64>> =
                (0..4).map(|_| (0..4).map(|_| rng.below(41) as f64 - 20.0).collect()).collect();
            let m = CostMatrix::from_rows(rows).unwrap();
            let a = hungarian(&m).unwrap();
            let best = brute_force_min(&m);
            assert!((a.total_cost - best).abs() <= 1e-9 * (1.0 + best.abs()));
        }
    }

    #[test]
    fn shifting_a_row_or_column_preserves_the_argmin_set() {
        let mut rng = crate::rng::SplitMix64::new(17);
        for _ in 0..40 {
            let n = 4;
            let m = random_matrix(&mut rng, n, 30);
            let before = brute_force_argmin_set(&m);

            let shift = rng.below(19) as f64 - 9.0;
            let mut rows: Vec<Vec<f64>> =
                (0..n).map(|r| (0..n).map(|c| m.at(r, c)).collect()).collect();
            if rng.below(2) == 0 {
                let r = rng.below(n as u64) as usize;
                for c in 0..n {
                    rows[r][c] += shift;
                }
            } else {
                let c = rng.below(n as u64) as usize;
                for row in rows.iter_mut() {
                    row[c] += shift;
                }
            }
            let shifted = CostMatrix::from_rows(rows).unwrap();
            let after = brute_force_argmin_set(&shifted);
            assert_eq!(before, after);

            // The solver's answer stays within the optimal set as well.
            let a = hungarian(&shifted).unwrap();
            assert!(after.contains(&a.pairs));
        }
    }

    #[test]
    fn random_assignment_single_cell() {
        let m = CostMatrix::from_rows(vec![vec![7.0]]).unwrap();
        let mut rng = crate::rng::SplitMix64::new(0);
        let a = random_assignment(&m, &mut rng).unwrap();
        assert_eq!(a.pairs, vec![0]);
        assert_eq!(a.total_cost, 7.0);
    }

    #[test]
    fn random_assignment_is_reproducible_under_a_seed() {
        let mut rng_a = crate::rng::SplitMix64::new(33);
        let mut rng_b = crate::rng::SplitMix64::new(33);
        let m = random_matrix(&mut crate::rng::SplitMix64::new(1), 6, 50);
        for _ in 0..10 {
            let a = random_assignment(&m, &mut rng_a).unwrap();
            let b = random_assignment(&m, &mut rng_b).unwrap();
            assert_eq!(a.pairs, b.pairs);
            assert_eq!(a.total_cost.to_bits(), b.total_cost.to_bits());
        }
    }

    #[test]
    fn random_assignment_mean_matches_permutation_average() {
        // Analytic mean of the uniform-permutation cost: average over all
        // 24 permutations of a fixed 4x4 matrix.
        let m = random_matrix(&mut crate::rng::SplitMix64::new(2), 4, 100);
        let perms = permutations(4);
        let costs: Vec<f64> = perms
            .iter()
            .map(|p| p.iter().enumerate().map(|(r, &c)| m.at(r, c)).sum::<f64>())
            .collect();
        let mean: f64 = costs.iter().sum::<f64>() / costs.len() as f64;
        let var: f64 =
            costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / costs.len() as f64;

        let draws = 10_000usize;
        let mut rng = crate::rng::SplitMix64::new(424242);
        let mut total = 0.0;
        for _ in 0..draws {
            total += random_assignment(&m, &mut rng).unwrap().total_cost;
        }
        let sample_mean = total / draws as f64;
        let stderr = (var / draws as f64).sqrt();
        assert!(
            (sample_mean - mean).abs() <= 3.0 * stderr,
            "sample mean {} vs analytic {} (3se = {})",
            sample_mean,
            mean,
            3.0 * stderr
        );
    }

    #[test]
    fn hungarian_never_loses_to_a_random_draw() {
        let mut rng = crate::rng::SplitMix64::new(5150);
        for _ in 0..30 {
            let m = random_matrix(&mut rng, 5, 100);
            let opt = hungarian(&m).unwrap().total_cost;
            for _ in 0..20 {
                let r = random_assignment(&m, &mut rng).unwrap();
                assert!(opt <= r.total_cost + 1e-9);
            }
        }
    }

    #[test]
    fn delay_cost_is_strictly_increasing_when_demand_exceeds_service() {
        let energy = EnergyParams::defaults(250);
        let mut last = f64::NEG_INFINITY;
        for delay in 0..20 {
            let jobs =
                [JobCost { id: 1, remaining: 6.0, delay: delay as f64, deadline: 4.0 }];
            let m = CostMatrix::build(&jobs, &[(1, 4.0)], &energy).unwrap();
            let c = m.at(0, 0);
            assert!(c > last, "cost must increase with delay");
            last = c;
        }
    }

    #[test]
    fn csv_dump_carries_labels() {
        let energy = EnergyParams::defaults(250);
        let jobs = [JobCost { id: 9, remaining: 2.0, delay: 0.0, deadline: 2.0 }];
        let m = CostMatrix::build(&jobs, &[(3, 4.0)], &energy).unwrap();
        let csv = m.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "row,job9,vjob1");
        assert!(lines.next().unwrap().starts_with("server3,200,200"));
        assert!(lines.next().unwrap().starts_with("vserver1,"));
    }
}
