//! Generic 0-1 linear minimization.
//!
//! A [`ZeroOneProgram`] is a minimization over binary variables with linear
//! `<=`, `>=` and `=` constraints. Two solvers operate on it:
//!
//! * [`solve_lp`] — the continuous relaxation (every variable in `[0, 1]`)
//!   via a dense two-phase simplex with Bland's rule, so pivoting is
//!   deterministic and terminates;
//! * [`solve_bip`] — exact binary optimum via depth-first branch-and-bound
//!   on the LP relaxation, branching on the most fractional variable and
//!   exploring the 1-branch first.
//!
//! Returned points are always re-checked against the constraints by a plain
//! evaluator that is independent of the simplex tableau.

mod branch_bound;
mod simplex;

use std::collections::BTreeMap;

use thiserror::Error;

pub use branch_bound::solve_bip;

/// Feasibility tolerance for constraint checks on relaxed points.
pub const EPS_FEAS: f64 = 1e-7;
/// Smallest pivot magnitude the simplex accepts.
pub const EPS_PIVOT: f64 = 1e-9;
/// Optimality slack: bounds within this of the incumbent are pruned.
pub const EPS_OPT: f64 = 1e-6;
/// A coordinate within this of 0 or 1 counts as integral when branching.
pub const EPS_INT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization program over binary variables.
#[derive(Debug, Clone, Default)]
pub struct ZeroOneProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Variables pre-fixed by construction; substituted out before solving.
    pub fixed: BTreeMap<usize, bool>,
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("coefficient vector has length {got}, expected {expected}")]
    BadRowLength { got: usize, expected: usize },
    #[error("variable {var} out of range (program has {num_vars} variables)")]
    BadVariable { var: usize, num_vars: usize },
    #[error("variable {var} already fixed to {existing}, cannot re-fix to {requested}")]
    ConflictingFix { var: usize, existing: bool, requested: bool },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl ZeroOneProgram {
    pub fn new(num_vars: usize) -> Self {
        ZeroOneProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            fixed: BTreeMap::new(),
        }
    }

    pub fn add_constraint(
        &mut self,
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    ) -> Result<(), MilpError> {
        if coeffs.len() != self.num_vars {
            return Err(MilpError::BadRowLength { got: coeffs.len(), expected: self.num_vars });
        }
        self.constraints.push(Constraint { coeffs, relation, rhs });
        Ok(())
    }

    /// Pre-fixes a variable. Fixing the same variable twice to the same value
    /// is a no-op; conflicting values are an error.
    pub fn fix(&mut self, var: usize, value: bool) -> Result<(), MilpError> {
        if var >= self.num_vars {
            return Err(MilpError::BadVariable { var, num_vars: self.num_vars });
        }
        if let Some(&existing) = self.fixed.get(&var) {
            if existing != value {
                return Err(MilpError::ConflictingFix { var, existing, requested: value });
            }
            return Ok(());
        }
        self.fixed.insert(var, value);
        Ok(())
    }

    pub fn objective_value(&self, point: &[f64]) -> f64 {
        self.objective.iter().zip(point).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; meaningful only when `status == Optimal`.
    pub value: f64,
    /// Point in `[0, 1]^num_vars`; empty unless `status == Optimal`.
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BipStatus {
    Optimal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct BipSolution {
    pub status: BipStatus,
    /// Incumbent objective value. `f64::INFINITY` if no feasible point was
    /// found before a limit was hit.
    pub value: f64,
    /// Incumbent assignment; empty when no feasible point is known.
    pub point: Vec<bool>,
    pub nodes_explored: u64,
    /// Gap between the incumbent and the best open lower bound: 0 when the
    /// tree was exhausted (proven optimal), positive on timeout.
    pub proof_gap: f64,
}

/// Search limits for [`solve_bip`]; `None` means unlimited.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveLimits {
    pub max_nodes: Option<u64>,
    pub max_seconds: Option<f64>,
}

/// Indices of constraints violated by `point`, judged with tolerance `eps`
/// scaled by the row magnitude. This evaluator is deliberately independent
/// of the simplex machinery.
pub fn violated_constraints(program: &ZeroOneProgram, point: &[f64], eps: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for (idx, c) in program.constraints.iter().enumerate() {
        let lhs: f64 = c.coeffs.iter().zip(point).map(|(a, x)| a * x).sum();
        let scale = 1.0 + c.rhs.abs() + c.coeffs.iter().map(|a| a.abs()).sum::<f64>();
        let tol = eps * scale;
        let ok = match c.relation {
            Relation::Le => lhs <= c.rhs + tol,
            Relation::Ge => lhs >= c.rhs - tol,
            Relation::Eq => (lhs - c.rhs).abs() <= tol,
        };
        if !ok {
            out.push(idx);
        }
    }
    out
}

/// Solves the `[0, 1]` relaxation of the program. Deterministic: Bland's
/// rule (lowest eligible index) decides every pivot. Infeasibility and
/// unboundedness are reported through the status; only numerical breakdown
/// is an `Err`.
pub fn solve_lp(program: &ZeroOneProgram) -> Result<LpSolution, MilpError> {
    let mut fixed = vec![None; program.num_vars];
    for (&var, &val) in &program.fixed {
        if var >= program.num_vars {
            return Err(MilpError::BadVariable { var, num_vars: program.num_vars });
        }
        fixed[var] = Some(val);
    }
    simplex::solve_lp_with(program, &fixed)
}

/// Renders the program as a plain text listing for external cross-checking.
///
/// Format, one row per line:
/// ```text
/// min: <sign><coef> x<k> ...;
/// c<i>: <sign><coef> x<k> ... <relation> <rhs>;
/// bounds: x<k> in [0, 1] for all k
/// fixed: x<k> = <0|1>; ...
/// ```
/// Zero coefficients are omitted; an all-zero objective or row prints as `0`.
pub fn format_program(program: &ZeroOneProgram) -> String {
    fn terms(coeffs: &[f64]) -> String {
        let mut s = String::new();
        for (k, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                if c >= 0.0 {
                    s.push_str(&format!("+{} x{} ", c, k));
                } else {
                    s.push_str(&format!("-{} x{} ", -c, k));
                }
            }
        }
        if s.is_empty() {
            s.push_str("0 ");
        }
        s
    }

    let mut out = String::new();
    out.push_str(&format!("min: {};\n", terms(&program.objective).trim_end()));
    for (i, c) in program.constraints.iter().enumerate() {
        out.push_str(&format!(
            "c{}: {} {} {};\n",
            i,
            terms(&c.coeffs).trim_end(),
            c.relation,
            c.rhs
        ));
    }
    out.push_str(&format!("bounds: x<k> in [0, 1] for all k < {}\n", program.num_vars));
    if !program.fixed.is_empty() {
        let fixes: Vec<String> = program
            .fixed
            .iter()
            .map(|(v, b)| format!("x{} = {}", v, if *b { 1 } else { 0 }))
            .collect();
        out.push_str(&format!("fixed: {}\n", fixes.join("; ")));
    }
    out
}
