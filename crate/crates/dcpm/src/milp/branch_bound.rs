//! Depth-first branch-and-bound for exact binary optima.
//!
//! Every node solves the LP relaxation under the node's fixings. Nodes are
//! pruned when the relaxation is infeasible or cannot beat the incumbent.
//! Branching picks the most fractional variable (ties: lowest index) and
//! explores the 1-branch first, which finds good incumbents quickly on
//! scheduling programs whose servers start powered.
//!
//! Before the search starts, `>=`-oriented rows with positive coefficients
//! are rounded into companion cardinality rows (divide by the largest
//! coefficient and round up): every binary-feasible point satisfies them, so
//! the optimum is untouched, but the node relaxations tighten enough to
//! refute plateaus that the plain relaxation cannot close in any reasonable
//! number of nodes. The caller-visible relaxation ([`super::solve_lp`])
//! stays exactly the plain one.

use std::time::Instant;

use super::{
    simplex, BipSolution, BipStatus, Constraint, LpStatus, MilpError, Relation, SolveLimits,
    ZeroOneProgram, EPS_FEAS, EPS_INT, EPS_OPT,
};

/// Adds the rounded companion of every eligible row. A row qualifies in its
/// `>=` orientation when all nonzero coefficients are positive and the right
/// side is positive; the companion `sum of support >= ceil(rhs / max coef)`
/// is skipped when it is implied (uniform coefficients with an exactly
/// divisible right side).
fn add_rounding_rows(program: &ZeroOneProgram) -> ZeroOneProgram {
    let mut out = program.clone();
    for c in &program.constraints {
        let oriented: &[(f64, &Vec<f64>)] = match c.relation {
            Relation::Ge => &[(1.0, &c.coeffs)],
            Relation::Le => &[(-1.0, &c.coeffs)],
            Relation::Eq => &[(1.0, &c.coeffs), (-1.0, &c.coeffs)],
        };
        for &(sign, coeffs) in oriented {
            let rhs = sign * c.rhs;
            if rhs <= 1e-9 {
                continue;
            }
            let mut max_coef = 0.0f64;
            let mut min_coef = f64::INFINITY;
            let mut eligible = true;
            for &a in coeffs.iter() {
                let a = sign * a;
                if a == 0.0 {
                    continue;
                }
                if a < 0.0 {
                    eligible = false;
                    break;
                }
                max_coef = max_coef.max(a);
                min_coef = min_coef.min(a);
            }
            if !eligible || max_coef <= 0.0 {
                continue;
            }
            let k = ((rhs - 1e-9) / max_coef).ceil();
            if k < 1.0 {
                continue;
            }
            let ratio = rhs / max_coef;
            let uniform = (max_coef - min_coef).abs() <= 1e-12;
            if uniform && (ratio - ratio.round()).abs() <= 1e-9 {
                continue; // the scaled original is already this row
            }
            let row: Vec<f64> = coeffs
                .iter()
                .map(|&a| if sign * a > 0.0 { 1.0 } else { 0.0 })
                .collect();
            out.constraints.push(Constraint { coeffs: row, relation: Relation::Ge, rhs: k });
        }
    }
    out
}

struct Search<'a> {
    program: &'a ZeroOneProgram,
    limits: SolveLimits,
    started: Instant,
    nodes: u64,
    incumbent: Option<(f64, Vec<bool>)>,
    /// Lower bounds of subtrees not yet explored (pending siblings along the
    /// DFS path); used to report the proof gap on timeout.
    open_bounds: Vec<f64>,
    hit_limit: bool,
    /// Best lower bound over everything unexplored, captured when a limit
    /// fires.
    abort_bound: f64,
    /// Stop as soon as the incumbent reaches this externally proven lower
    /// bound; further search cannot improve the value.
    target: Option<f64>,
    satisfied: bool,
}

enum NodeOutcome {
    Explored,
    Aborted,
}

impl Search<'_> {
    fn limit_reached(&self) -> bool {
        if let Some(max_nodes) = self.limits.max_nodes {
            if self.nodes >= max_nodes {
                return true;
            }
        }
        if let Some(max_seconds) = self.limits.max_seconds {
            if self.started.elapsed().as_secs_f64() >= max_seconds {
                return true;
            }
        }
        false
    }

    fn node(
        &mut self,
        fixed: &mut Vec<Option<bool>>,
        parent_bound: f64,
    ) -> Result<NodeOutcome, MilpError> {
        if self.limit_reached() {
            self.hit_limit = true;
            self.abort_bound = self
                .open_bounds
                .iter()
                .copied()
                .fold(parent_bound, f64::min);
            return Ok(NodeOutcome::Aborted);
        }
        self.nodes += 1;

        let lp = simplex::solve_lp_with(self.program, fixed)?;
        match lp.status {
            LpStatus::Infeasible => return Ok(NodeOutcome::Explored),
            LpStatus::Unbounded => {
                return Err(MilpError::Numerical(
                    "relaxation of a boxed binary program reported unbounded".into(),
                ))
            }
            LpStatus::Optimal => {}
        }
        if let Some((best, _)) = &self.incumbent {
            if lp.value >= best - EPS_OPT {
                return Ok(NodeOutcome::Explored);
            }
        }

        // Most fractional free variable; ties go to the lowest index.
        let mut branch_var: Option<(usize, f64)> = None;
        for (v, &x) in lp.point.iter().enumerate() {
            if fixed[v].is_some() {
                continue;
            }
            let dist = (x - x.round()).abs();
            if dist > EPS_INT {
                match branch_var {
                    Some((_, best_dist)) if dist <= best_dist => {}
                    _ => branch_var = Some((v, dist)),
                }
            }
        }

        let Some((var, _)) = branch_var else {
            // Integral relaxation: candidate incumbent after an exact
            // re-check that does not trust the tableau.
            let candidate: Vec<bool> = lp.point.iter().map(|&x| x > 0.5).collect();
            let as_floats: Vec<f64> =
                candidate.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            if super::violated_constraints(self.program, &as_floats, EPS_FEAS).is_empty() {
                let value = self.program.objective_value(&as_floats);
                let better = match &self.incumbent {
                    None => true,
                    Some((best, _)) => value < best - EPS_OPT,
                };
                if better {
                    self.incumbent = Some((value, candidate));
                    if let Some(target) = self.target {
                        if value <= target + EPS_OPT {
                            self.satisfied = true;
                            return Ok(NodeOutcome::Aborted);
                        }
                    }
                }
            }
            return Ok(NodeOutcome::Explored);
        };

        // The node bound is a valid lower bound for the sibling still
        // pending while the first child is explored.
        fixed[var] = Some(true);
        self.open_bounds.push(lp.value);
        let first = self.node(fixed, lp.value)?;
        self.open_bounds.pop();
        if matches!(first, NodeOutcome::Aborted) {
            fixed[var] = None;
            return Ok(NodeOutcome::Aborted);
        }

        fixed[var] = Some(false);
        let second = self.node(fixed, lp.value)?;
        fixed[var] = None;
        Ok(second)
    }
}

/// Node budget of each capped incumbent-hunting pass.
const DIVE_NODE_BUDGET: u64 = 5_000;

/// Exact minimization of a 0-1 program by branch-and-bound. Limits exceeded
/// yield `BipStatus::Timeout` with the best incumbent and the remaining gap;
/// LP numerical failures propagate as errors.
///
/// The search runs as a deterministic portfolio of depth-first passes that
/// share the wall clock, the node budget and the incumbent: a capped dive on
/// the plain relaxation, a capped dive on the rounding-strengthened program,
/// and finally an uncapped proving pass on the strengthened program. The
/// two relaxations round into good incumbents on different instances; the
/// strengthened root value doubles as a proven global lower bound that ends
/// the hunt as soon as an incumbent matches it. All passes search the same
/// feasible set, so the result is the exact optimum regardless of which
/// pass settles it.
pub fn solve_bip(program: &ZeroOneProgram, limits: SolveLimits) -> Result<BipSolution, MilpError> {
    let mut fixed = vec![None; program.num_vars];
    for (&var, &val) in &program.fixed {
        if var >= program.num_vars {
            return Err(MilpError::BadVariable { var, num_vars: program.num_vars });
        }
        fixed[var] = Some(val);
    }
    let started = Instant::now();

    // Root bound of the strengthened relaxation: a global lower bound that
    // lets a dive declare victory as soon as it matches it.
    let strengthened = add_rounding_rows(program);
    let root = simplex::solve_lp_with(&strengthened, &fixed)?;
    let root_bound = match root.status {
        LpStatus::Optimal => Some(root.value),
        LpStatus::Infeasible => {
            return Ok(BipSolution {
                status: BipStatus::Infeasible,
                value: f64::INFINITY,
                point: vec![],
                nodes_explored: 0,
                proof_gap: 0.0,
            })
        }
        LpStatus::Unbounded => None,
    };

    let passes: [(&ZeroOneProgram, Option<u64>); 3] = [
        (program, Some(DIVE_NODE_BUDGET)),
        (&strengthened, Some(DIVE_NODE_BUDGET)),
        (&strengthened, None),
    ];

    let mut nodes_explored = 0u64;
    let mut incumbent: Option<(f64, Vec<bool>)> = None;
    let mut last_hit_limit = false;
    let mut last_abort_bound = f64::NEG_INFINITY;

    for (pass_program, pass_budget) in passes {
        let remaining = limits.max_nodes.map(|m| m.saturating_sub(nodes_explored));
        let pass_nodes = match (pass_budget, remaining) {
            (Some(b), Some(r)) => Some(b.min(r)),
            (Some(b), None) => Some(b),
            (None, r) => r,
        };
        let mut search = Search {
            program: pass_program,
            limits: SolveLimits { max_nodes: pass_nodes, max_seconds: limits.max_seconds },
            started,
            nodes: 0,
            incumbent,
            open_bounds: Vec::new(),
            hit_limit: false,
            abort_bound: f64::NEG_INFINITY,
            target: root_bound,
            satisfied: false,
        };
        search.node(&mut fixed, f64::NEG_INFINITY)?;
        nodes_explored += search.nodes;
        incumbent = search.incumbent;
        last_hit_limit = search.hit_limit;
        last_abort_bound = search.abort_bound;

        if search.satisfied || !search.hit_limit {
            // Incumbent reached the proven bound, or the pass exhausted the
            // whole tree: the optimum is settled.
            return Ok(match incumbent {
                Some((value, point)) => BipSolution {
                    status: BipStatus::Optimal,
                    value,
                    point,
                    nodes_explored,
                    proof_gap: 0.0,
                },
                None => BipSolution {
                    status: BipStatus::Infeasible,
                    value: f64::INFINITY,
                    point: vec![],
                    nodes_explored,
                    proof_gap: 0.0,
                },
            });
        }
    }

    // Every pass was cut short by the caller's limits.
    debug_assert!(last_hit_limit);
    let (value, point) = match incumbent {
        Some((v, p)) => (v, p),
        None => (f64::INFINITY, vec![]),
    };
    let proof_gap = if value.is_finite() {
        let bound = last_abort_bound.max(root_bound.unwrap_or(f64::NEG_INFINITY));
        if bound.is_finite() {
            (value - bound).max(0.0)
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    };
    Ok(BipSolution { status: BipStatus::Timeout, value, point, nodes_explored, proof_gap })
}
