//! Dense two-phase primal simplex over the unit box.
//!
//! The program is first reduced: fixed variables are substituted into the
//! rows, and rows left without free variables are checked for consistency
//! and dropped. Upper bounds `x <= 1` are appended as ordinary rows, lower
//! bounds are native to the standard form. Phase 1 minimizes the sum of
//! artificial variables; phase 2 minimizes the true objective.
//!
//! Pivoting is deterministic: Dantzig's most-negative-reduced-cost entering
//! rule with lowest-index ties, falling back permanently to Bland's rule
//! within a phase once a long degenerate streak shows up, and a ratio test
//! that breaks ties toward the lowest basic variable index. Pure Bland
//! pivoting - the textbook termination guarantee - stalls for tens of
//! thousands of degenerate pivots on the scheduling programs this crate
//! compiles, so it serves as the anti-cycling fallback rather than the
//! default.

use super::{
    Constraint, LpSolution, LpStatus, MilpError, Relation, ZeroOneProgram, EPS_FEAS, EPS_PIVOT,
};

/// Stability floor for pivot elements: dividing a row by smaller values
/// amplifies noise past the feasibility tolerance.
const PIVOT_MIN: f64 = 1e-6;

/// Entries below this magnitude are float dirt (the input data is unit
/// scale) and are snapped to zero after each pivot so they can never be
/// mistaken for structure.
const DIRT: f64 = 1e-11;

/// Program with fixings substituted out.
struct Reduced {
    /// Original variable index for each reduced column.
    free: Vec<usize>,
    rows: Vec<Constraint>,
    obj: Vec<f64>,
    /// Objective contribution of variables fixed to one.
    obj_offset: f64,
}

enum Reduction {
    Ok(Reduced),
    /// A row lost all free variables and its constant part is violated.
    TriviallyInfeasible,
}

fn reduce(program: &ZeroOneProgram, fixed: &[Option<bool>]) -> Reduction {
    let free: Vec<usize> =
        (0..program.num_vars).filter(|v| fixed[*v].is_none()).collect();
    let col_of: Vec<Option<usize>> = {
        let mut m = vec![None; program.num_vars];
        for (c, &v) in free.iter().enumerate() {
            m[v] = Some(c);
        }
        m
    };

    let mut obj_offset = 0.0;
    for (v, f) in fixed.iter().enumerate() {
        if *f == Some(true) {
            obj_offset += program.objective[v];
        }
    }
    let obj: Vec<f64> = free.iter().map(|&v| program.objective[v]).collect();

    let mut rows = Vec::with_capacity(program.constraints.len());
    for c in &program.constraints {
        let mut coeffs = vec![0.0; free.len()];
        let mut rhs = c.rhs;
        let mut any = false;
        for (v, &a) in c.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match col_of[v] {
                Some(col) => {
                    coeffs[col] = a;
                    any = true;
                }
                None => {
                    if fixed[v] == Some(true) {
                        rhs -= a;
                    }
                }
            }
        }
        if !any {
            let scale = 1.0 + c.rhs.abs() + c.coeffs.iter().map(|a| a.abs()).sum::<f64>();
            let tol = EPS_FEAS * scale;
            let ok = match c.relation {
                Relation::Le => 0.0 <= rhs + tol,
                Relation::Ge => 0.0 >= rhs - tol,
                Relation::Eq => rhs.abs() <= tol,
            };
            if !ok {
                return Reduction::TriviallyInfeasible;
            }
            continue;
        }
        rows.push(Constraint { coeffs, relation: c.relation, rhs });
    }

    Reduction::Ok(Reduced { free, rows, obj, obj_offset })
}

/// Dense tableau in standard form.
struct Tableau {
    /// First artificial column; columns `>= art_start` never re-enter.
    art_start: usize,
    /// Total columns excluding the rhs cell.
    cols: usize,
    /// Row-major data, stride `cols + 1`; the last cell of a row is its rhs.
    data: Vec<f64>,
    m: usize,
    basis: Vec<usize>,
    dropped: Vec<bool>,
    /// Phase-2 reduced-cost row (rhs cell tracks the negated objective).
    cost: Vec<f64>,
    /// Phase-1 reduced-cost row, present during phase 1.
    p1: Vec<f64>,
}

impl Tableau {
    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * (self.cols + 1)..(r + 1) * (self.cols + 1)]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.cols + 1;
        let (before, rest) = self.data.split_at_mut(pr * stride);
        let (prow, after) = rest.split_at_mut(stride);
        let inv = 1.0 / prow[pc];
        for x in prow.iter_mut() {
            *x *= inv;
            if x.abs() < DIRT {
                *x = 0.0;
            }
        }
        prow[pc] = 1.0;
        let update = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * *p;
                    if x.abs() < DIRT {
                        *x = 0.0;
                    }
                }
                row[pc] = 0.0;
            }
        };
        for chunk in before.chunks_exact_mut(stride) {
            update(chunk);
        }
        for chunk in after.chunks_exact_mut(stride) {
            update(chunk);
        }
        update(&mut self.cost);
        if !self.p1.is_empty() {
            update(&mut self.p1);
        }
        self.basis[pr] = pc;
    }

    /// Min-ratio row for the entering column `pc` over every positive pivot
    /// element, so primal feasibility is preserved exactly. Exact ratio ties
    /// resolve toward the largest pivot element (stability) in Dantzig mode
    /// and toward the lowest basic variable index (anti-cycling) in Bland
    /// mode. Returns the chosen row, its ratio and its pivot magnitude.
    fn ratio_test(&self, pc: usize, bland: bool) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for r in 0..self.m {
            if self.dropped[r] {
                continue;
            }
            let a = self.row(r)[pc];
            if a > EPS_PIVOT {
                let theta = (self.rhs(r) / a).max(0.0);
                match best {
                    None => best = Some((r, theta, a)),
                    Some((br, bt, ba)) => {
                        let better = if theta != bt {
                            theta < bt
                        } else if bland {
                            self.basis[r] < self.basis[br]
                        } else if a != ba {
                            a > ba
                        } else {
                            self.basis[r] < self.basis[br]
                        };
                        if better {
                            best = Some((r, theta, a));
                        }
                    }
                }
            }
        }
        best
    }

    /// One simplex phase. The entering column follows Dantzig's rule (most
    /// negative reduced cost, ties to the lowest index); after a long streak
    /// of degenerate pivots the phase switches permanently to Bland's rule
    /// (lowest eligible index), which cannot cycle. A column whose min-ratio
    /// pivot element sits below the stability floor is passed over for the
    /// next candidate; if only such columns remain the solve stalls rather
    /// than corrupt the tableau. Everything is deterministic.
    fn run(&mut self, phase_one: bool) -> PhaseOutcome {
        const MAX_PIVOTS: u64 = 200_000;
        const DEGENERATE_STREAK_LIMIT: u32 = 200;
        let mut pivots = 0u64;
        let mut degenerate_streak = 0u32;
        let mut bland = false;
        loop {
            let limit = if phase_one { self.cols } else { self.art_start };
            // Entering candidates in rule order, retried when a column has
            // no usable pivot element.
            let order: Vec<usize> = {
                let costs = if phase_one { &self.p1 } else { &self.cost };
                let mut eligible: Vec<usize> =
                    (0..limit).filter(|&j| costs[j] < -EPS_PIVOT).collect();
                if !bland {
                    eligible.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
                }
                eligible
            };
            if order.is_empty() {
                return PhaseOutcome::Done;
            }

            let mut pivoted = false;
            let mut saw_ray = false;
            let mut saw_unstable = false;
            for &pc in &order {
                match self.ratio_test(pc, bland) {
                    Some((pr, theta, a)) => {
                        if a < PIVOT_MIN {
                            saw_unstable = true;
                            continue;
                        }
                        self.pivot(pr, pc);
                        pivoted = true;
                        if theta <= EPS_PIVOT {
                            degenerate_streak += 1;
                            if degenerate_streak >= DEGENERATE_STREAK_LIMIT {
                                bland = true;
                            }
                        } else {
                            degenerate_streak = 0;
                        }
                        break;
                    }
                    None => saw_ray = true,
                }
            }
            if !pivoted {
                if saw_unstable {
                    return PhaseOutcome::Stalled;
                }
                if saw_ray {
                    return PhaseOutcome::Unbounded;
                }
                return PhaseOutcome::Done;
            }
            pivots += 1;
            if pivots >= MAX_PIVOTS {
                return PhaseOutcome::Stalled;
            }
        }
    }
}

#[derive(PartialEq, Eq)]
enum PhaseOutcome {
    Done,
    Unbounded,
    Stalled,
}

/// Solves the relaxation of `program` with the given fixing overlay (which
/// must already include `program.fixed`).
pub(crate) fn solve_lp_with(
    program: &ZeroOneProgram,
    fixed: &[Option<bool>],
) -> Result<LpSolution, MilpError> {
    debug_assert_eq!(fixed.len(), program.num_vars);

    let reduced = match reduce(program, fixed) {
        Reduction::TriviallyInfeasible => {
            return Ok(LpSolution { status: LpStatus::Infeasible, value: f64::INFINITY, point: vec![] })
        }
        Reduction::Ok(r) => r,
    };

    let expand = |vals: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut point = vec![0.0; program.num_vars];
        for (v, f) in fixed.iter().enumerate() {
            if *f == Some(true) {
                point[v] = 1.0;
            }
        }
        for (col, &v) in reduced.free.iter().enumerate() {
            point[v] = vals(col);
        }
        point
    };

    if reduced.free.is_empty() {
        let point = expand(&|_| 0.0);
        let value = program.objective_value(&point);
        return Ok(LpSolution { status: LpStatus::Optimal, value, point });
    }

    let n = reduced.free.len();

    // Assemble rows: reduced constraints plus one `x <= 1` row per variable,
    // all canonicalized to a nonnegative rhs.
    struct Row {
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(reduced.rows.len() + n);
    for c in &reduced.rows {
        let mut coeffs = c.coeffs.clone();
        let mut relation = c.relation;
        let mut rhs = c.rhs;
        if rhs < 0.0 {
            for a in &mut coeffs {
                *a = -*a;
            }
            rhs = -rhs;
            relation = match relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push(Row { coeffs, relation, rhs });
    }
    for j in 0..n {
        let mut coeffs = vec![0.0; n];
        coeffs[j] = 1.0;
        rows.push(Row { coeffs, relation: Relation::Le, rhs: 1.0 });
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.relation != Relation::Le).count();
    let art_start = n + n_slack;
    let cols = n + n_slack + n_art;
    let stride = cols + 1;

    let mut tab = Tableau {
        art_start,
        cols,
        data: vec![0.0; m * stride],
        m,
        basis: vec![0; m],
        dropped: vec![false; m],
        cost: vec![0.0; stride],
        p1: vec![0.0; stride],
    };

    let mut slack_idx = n;
    let mut art_idx = art_start;
    for (r, row) in rows.iter().enumerate() {
        let base = r * stride;
        tab.data[base..base + n].copy_from_slice(&row.coeffs);
        tab.data[base + cols] = row.rhs;
        match row.relation {
            Relation::Le => {
                tab.data[base + slack_idx] = 1.0;
                tab.basis[r] = slack_idx;
                slack_idx += 1;
            }
            Relation::Ge => {
                tab.data[base + slack_idx] = -1.0;
                slack_idx += 1;
                tab.data[base + art_idx] = 1.0;
                tab.basis[r] = art_idx;
                art_idx += 1;
            }
            Relation::Eq => {
                tab.data[base + art_idx] = 1.0;
                tab.basis[r] = art_idx;
                art_idx += 1;
            }
        }
    }

    // Phase-2 reduced costs start as the raw costs (the initial basis is all
    // zero-cost slack/artificial columns).
    tab.cost[..n].copy_from_slice(&reduced.obj);

    // Phase-1 reduced costs: 1 on artificials minus the sum of rows that
    // carry a basic artificial; equivalently start from sum over those rows.
    for r in 0..m {
        if tab.basis[r] >= art_start {
            let base = r * stride;
            for j in 0..stride {
                tab.p1[j] -= tab.data[base + j];
            }
        }
    }
    for j in art_start..cols {
        tab.p1[j] += 1.0;
    }

    if n_art > 0 {
        match tab.run(true) {
            PhaseOutcome::Done => {}
            PhaseOutcome::Unbounded => {
                return Err(MilpError::Numerical("phase-1 ray (cannot happen)".into()))
            }
            PhaseOutcome::Stalled => {
                return Err(MilpError::Numerical("phase-1 pivot budget exhausted".into()))
            }
        }
        let phase1_value = -tab.p1[cols];
        if phase1_value > EPS_FEAS {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: f64::INFINITY,
                point: vec![],
            });
        }
        // Drive leftover artificials out of the basis; rows that reduce to
        // zero are redundant and get dropped. Their basic value is zero up
        // to phase-1 tolerance, so the residue is squashed before pivoting.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if tab.rhs(r).abs() <= EPS_FEAS {
                    tab.data[r * stride + cols] = 0.0;
                }
                let mut pivot_col = None;
                for j in 0..art_start {
                    if tab.row(r)[j].abs() > PIVOT_MIN {
                        pivot_col = Some(j);
                        break;
                    }
                }
                match pivot_col {
                    Some(j) => tab.pivot(r, j),
                    None => tab.dropped[r] = true,
                }
            }
        }
    }
    tab.p1.clear();

    match tab.run(false) {
        PhaseOutcome::Done => {}
        PhaseOutcome::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                value: f64::NEG_INFINITY,
                point: vec![],
            })
        }
        PhaseOutcome::Stalled => {
            return Err(MilpError::Numerical("phase-2 pivot budget exhausted".into()))
        }
    }

    let mut reduced_point = vec![0.0; n];
    for r in 0..m {
        if !tab.dropped[r] && tab.basis[r] < n {
            reduced_point[tab.basis[r]] = tab.rhs(r);
        }
    }
    let point = expand(&|col| reduced_point[col]);
    let value: f64 = program.objective_value(&point);
    debug_assert!((value - (reduced.obj_offset + reduced
        .obj
        .iter()
        .zip(&reduced_point)
        .map(|(c, x)| c * x)
        .sum::<f64>()))
    .abs()
        < 1e-6 * (1.0 + value.abs()));

    // Independent feasibility check of the claimed optimum.
    let violated = super::violated_constraints(program, &point, EPS_FEAS);
    if !violated.is_empty() {
        return Err(MilpError::Numerical(format!(
            "simplex returned a point violating constraints {:?}",
            violated
        )));
    }
    for (v, &x) in point.iter().enumerate() {
        if !(-EPS_FEAS..=1.0 + EPS_FEAS).contains(&x) {
            return Err(MilpError::Numerical(format!("variable x{} = {} outside [0, 1]", v, x)));
        }
    }

    Ok(LpSolution { status: LpStatus::Optimal, value, point })
}
