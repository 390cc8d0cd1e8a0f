//! Offline exact optimization: compiles an instance into a 0-1 program,
//! decodes solver points into schedules, prices schedules, and re-validates
//! them against every constraint family independently of the solver.
//!
//! Variables, all binary:
//!
//! * `x[i][j][t]` — server `i` handles job `j` in slot `t`. Index 0 plays the
//!   dummy on both axes: `x[0][j][t]` marks job `j` unserved in slot `t`,
//!   `x[i][0][t]` marks server `i` powered but idle. `x[0][0][t]` is pinned
//!   to zero.
//! * `y[i][t]` — slot `t` is a setup slot of server `i` (real servers only).
//! * `z[i][t]` — server `i` starts a setup in slot `t`, i.e. it was dark in
//!   `t-1` and is powered-idle in `t`; linearized through three coupling rows.
//!
//! A job may only be touched inside its lifetime window; all out-of-window
//! `x` are pre-fixed to zero and substituted away before the simplex runs.
//!
//! The objective charges `e_slot` per real serving slot plus `e_on` per setup
//! slot. Powered-idle slots outside setup are free to the optimizer, while
//! [`energy_of_schedule`] prices a finished schedule under the full per-slot
//! accounting (every powered slot costs `e_slot`, setup slots cost `e_on`
//! net); the two agree on schedules that never idle outside setup.


use thiserror::Error;

use crate::milp::{
    self, BipSolution, LpSolution, MilpError, Relation, SolveLimits, ZeroOneProgram,
};
use crate::model::{
    t_max_of, validate_instance, Instance, ModelError, Schedule, SlotAssignment, Violation,
};

/// Bijective map between (kind, server, job, slot) tuples and flat variable
/// indices of the compiled program.
#[derive(Debug, Clone)]
pub struct VariableIndex {
    pub num_servers: usize,
    pub num_jobs: usize,
    pub t_max: u32,
}

/// Decoded meaning of one flat variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// `server`/`job` use 0 for the dummy.
    X { server: usize, job: usize, slot: u32 },
    Y { server: usize, slot: u32 },
    Z { server: usize, slot: u32 },
}

impl VariableIndex {
    fn new(num_servers: usize, num_jobs: usize, t_max: u32) -> Self {
        VariableIndex { num_servers, num_jobs, t_max }
    }

    pub fn num_vars(&self) -> usize {
        let t = self.t_max as usize;
        (self.num_servers + 1) * (self.num_jobs + 1) * t + 2 * self.num_servers * t
    }

    fn x_count(&self) -> usize {
        (self.num_servers + 1) * (self.num_jobs + 1) * self.t_max as usize
    }

    /// `server` and `job` are 0 for the dummy, 1-based otherwise; slots are
    /// 1-based.
    pub fn x(&self, server: usize, job: usize, slot: u32) -> usize {
        debug_assert!(server <= self.num_servers && job <= self.num_jobs);
        debug_assert!((1..=self.t_max).contains(&slot));
        (server * (self.num_jobs + 1) + job) * self.t_max as usize + (slot - 1) as usize
    }

    /// Setup-slot variable of a real server (1-based).
    pub fn y(&self, server: usize, slot: u32) -> usize {
        debug_assert!((1..=self.num_servers).contains(&server));
        self.x_count() + (server - 1) * self.t_max as usize + (slot - 1) as usize
    }

    /// Setup-start variable of a real server (1-based).
    pub fn z(&self, server: usize, slot: u32) -> usize {
        self.x_count()
            + (self.num_servers + server - 1) * self.t_max as usize
            + (slot - 1) as usize
    }

    pub fn decode(&self, flat: usize) -> VarKind {
        let t = self.t_max as usize;
        let xs = self.x_count();
        if flat < xs {
            let slot = (flat % t) as u32 + 1;
            let rest = flat / t;
            let job = rest % (self.num_jobs + 1);
            let server = rest / (self.num_jobs + 1);
            VarKind::X { server, job, slot }
        } else if flat < xs + self.num_servers * t {
            let rel = flat - xs;
            VarKind::Y { server: rel / t + 1, slot: (rel % t) as u32 + 1 }
        } else {
            let rel = flat - xs - self.num_servers * t;
            VarKind::Z { server: rel / t + 1, slot: (rel % t) as u32 + 1 }
        }
    }
}

#[derive(Debug, Error)]
pub enum OfflineError {
    #[error("invalid instance: {0:?}")]
    InvalidInstance(Vec<Violation>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("slot {slot}: server {server} is assigned more than one job")]
    ServerOverload { slot: u32, server: u32 },
    #[error("slot {slot}: job {job} has {count} assignments, expected exactly one")]
    JobAssignment { slot: u32, job: u32, count: u32 },
    #[error("point has length {got}, expected {expected}")]
    BadLength { got: usize, expected: usize },
}

/// Compiles the instance into its exact binary program.
pub fn build_bip(instance: &Instance) -> Result<(ZeroOneProgram, VariableIndex), OfflineError> {
    build_bip_internal(instance, true)
}

/// Internal variant: `fix_out_of_window = false` keeps out-of-window
/// variables free, for the fixing-soundness checks.
pub(crate) fn build_bip_internal(
    instance: &Instance,
    fix_out_of_window: bool,
) -> Result<(ZeroOneProgram, VariableIndex), OfflineError> {
    let violations = validate_instance(instance);
    if !violations.is_empty() {
        return Err(OfflineError::InvalidInstance(violations));
    }
    let t_max = t_max_of(instance)?;
    let n = instance.servers.len();
    let m = instance.jobs.len();
    let idx = VariableIndex::new(n, m, t_max);
    let num_vars = idx.num_vars();
    let energy = &instance.energy;
    let n_on = energy.n_on;

    let mut program = ZeroOneProgram::new(num_vars);

    let speed = |i: usize| instance.servers[i - 1].speed;
    let on0 = |i: usize| -> f64 {
        if instance.servers[i - 1].initially_on {
            1.0
        } else {
            0.0
        }
    };
    let window = |j: usize| instance.jobs[j - 1].window();
    let in_window = |j: usize, t: u32| window(j).contains(&t);

    // Objective: e_slot per real serving slot, e_on per setup slot.
    for i in 1..=n {
        for j in 1..=m {
            for t in 1..=t_max {
                program.objective[idx.x(i, j, t)] = energy.e_slot;
            }
        }
        for t in 1..=t_max {
            program.objective[idx.y(i, t)] = energy.e_on;
        }
    }

    // Pre-fixed variables: the dummy-dummy combination and everything
    // outside a job's lifetime window.
    for t in 1..=t_max {
        program.fix(idx.x(0, 0, t), false)?;
    }
    if fix_out_of_window {
        for j in 1..=m {
            for t in 1..=t_max {
                if !in_window(j, t) {
                    for i in 0..=n {
                        program.fix(idx.x(i, j, t), false)?;
                    }
                }
            }
        }
    }

    let mut row = vec![0.0; num_vars];
    macro_rules! emit {
        ($rel:expr, $rhs:expr) => {{
            program.add_constraint(row.clone(), $rel, $rhs)?;
            for v in row.iter_mut() {
                *v = 0.0;
            }
        }};
    }

    // Per-job service budget: at most deadline_slots real-server slots.
    for j in 1..=m {
        for t in window(j) {
            for i in 1..=n {
                row[idx.x(i, j, t)] = 1.0;
            }
        }
        emit!(Relation::Le, instance.jobs[j - 1].deadline_slots as f64);
    }

    // Full service within the window.
    for j in 1..=m {
        for t in window(j) {
            for i in 1..=n {
                row[idx.x(i, j, t)] = speed(i) * energy.tau;
            }
        }
        emit!(Relation::Ge, instance.jobs[j - 1].demand);
    }

    // At most one job (or the idle marker) per server and slot.
    for i in 1..=n {
        for t in 1..=t_max {
            for j in 0..=m {
                row[idx.x(i, j, t)] = 1.0;
            }
            emit!(Relation::Le, 1.0);
        }
    }

    // A server serving real work in slot t must have been powered in t-1;
    // at t = 1 the previous-slot term is the initial state constant.
    for i in 1..=n {
        for t in 1..=t_max {
            for j in 1..=m {
                row[idx.x(i, j, t)] = 1.0;
            }
            if t == 1 {
                emit!(Relation::Le, on0(i));
            } else {
                for j in 0..=m {
                    row[idx.x(i, j, t - 1)] = -1.0;
                }
                emit!(Relation::Le, 0.0);
            }
        }
    }

    // Setup slots are powered-idle slots.
    for i in 1..=n {
        for t in 1..=t_max {
            row[idx.y(i, t)] = 1.0;
            row[idx.x(i, 0, t)] = -1.0;
            emit!(Relation::Le, 0.0);
        }
    }

    // A setup started in t runs for n_on consecutive slots (window clipped
    // at the horizon).
    for i in 1..=n {
        for t in 1..=t_max {
            let end = t_max.min(t + n_on - 1);
            for t2 in t..=end {
                row[idx.y(i, t2)] = 1.0;
            }
            row[idx.z(i, t)] = -(n_on as f64);
            emit!(Relation::Ge, 0.0);
        }
    }

    // Setup-start linearization: z = x_idle * (1 - previous-slot power).
    for i in 1..=n {
        for t in 1..=t_max {
            row[idx.z(i, t)] = 1.0;
            row[idx.y(i, t)] = -1.0;
            emit!(Relation::Le, 0.0);

            row[idx.z(i, t)] = 1.0;
            row[idx.x(i, 0, t)] = -1.0;
            emit!(Relation::Le, 0.0);

            row[idx.z(i, t)] = 1.0;
            if t == 1 {
                emit!(Relation::Le, 1.0 - on0(i));
            } else {
                for j in 0..=m {
                    row[idx.x(i, j, t - 1)] = 1.0;
                }
                emit!(Relation::Le, 1.0);
            }

            row[idx.z(i, t)] = 1.0;
            row[idx.x(i, 0, t)] = -1.0;
            if t == 1 {
                emit!(Relation::Ge, -on0(i));
            } else {
                for j in 0..=m {
                    row[idx.x(i, j, t - 1)] = 1.0;
                }
                emit!(Relation::Ge, 0.0);
            }
        }
    }

    // No setup can start so late that it would outlive the horizon. The
    // reference slot t_max - n_on - 1 walks off the grid for large n_on:
    // clipped to the initial state at 0 and to a flat ban below that.
    if t_max >= 2 {
        for i in 1..=n {
            let w_start = if n_on >= t_max { 1 } else { t_max - n_on };
            for t2 in w_start..=t_max - 1 {
                row[idx.y(i, t2)] = 1.0;
            }
            if t_max > n_on + 1 {
                let lag = t_max - n_on - 1;
                for j in 0..=m {
                    row[idx.x(i, j, lag)] = -(n_on as f64);
                }
                emit!(Relation::Le, 0.0);
            } else if t_max == n_on + 1 {
                emit!(Relation::Le, n_on as f64 * on0(i));
            } else {
                emit!(Relation::Le, 0.0);
            }
        }
    }

    // Exactly one assignment (possibly the dummy) per job and window slot.
    for j in 1..=m {
        for t in window(j) {
            for i in 0..=n {
                row[idx.x(i, j, t)] = 1.0;
            }
            emit!(Relation::Eq, 1.0);
        }
    }

    // Every setup start accounts for exactly n_on setup slots overall.
    for i in 1..=n {
        for t in 1..=t_max {
            row[idx.z(i, t)] = n_on as f64;
            row[idx.y(i, t)] = -1.0;
        }
        emit!(Relation::Eq, 0.0);
    }

    Ok((program, idx))
}

/// Decodes a binary point of the compiled program into a [`Schedule`].
pub fn decode_schedule(
    point: &[bool],
    idx: &VariableIndex,
    instance: &Instance,
) -> Result<Schedule, DecodeError> {
    if point.len() != idx.num_vars() {
        return Err(DecodeError::BadLength { got: point.len(), expected: idx.num_vars() });
    }
    let n = idx.num_servers;
    let m = idx.num_jobs;
    let mut schedule = Schedule::empty(idx.t_max);

    for i in 1..=n {
        for t in 1..=idx.t_max {
            let mut chosen: Option<SlotAssignment> = None;
            let mut count = 0;
            for j in 0..=m {
                if point[idx.x(i, j, t)] {
                    count += 1;
                    chosen = Some(if j == 0 {
                        SlotAssignment::Idle
                    } else {
                        SlotAssignment::Serving(j as u32)
                    });
                }
            }
            if count > 1 {
                return Err(DecodeError::ServerOverload { slot: t, server: i as u32 });
            }
            schedule
                .assign
                .insert((t, i as u32), chosen.unwrap_or(SlotAssignment::Off));
            if point[idx.y(i, t)] {
                schedule.setup.insert((t, i as u32));
            }
        }
    }

    for j in 1..=m {
        for t in instance.jobs[j - 1].window() {
            let mut count = 0;
            for i in 1..=n {
                if point[idx.x(i, j, t)] {
                    count += 1;
                }
            }
            if point[idx.x(0, j, t)] {
                schedule.unserved.insert((t, j as u32));
                count += 1;
            }
            if count != 1 {
                return Err(DecodeError::JobAssignment { slot: t, job: j as u32, count });
            }
        }
    }

    Ok(schedule)
}

/// Prices a schedule under the full per-slot accounting: `e_slot` joules for
/// every powered (serving or idle) server slot, `e_on` net for each setup
/// slot, nothing for unserved markers.
pub fn energy_of_schedule(schedule: &Schedule, instance: &Instance) -> f64 {
    let energy = &instance.energy;
    let powered = schedule
        .assign
        .values()
        .filter(|a| !matches!(a, SlotAssignment::Off))
        .count();
    let setups = schedule.setup.len();
    energy.e_slot * powered as f64 + (energy.e_on - energy.e_slot) * setups as f64
}

/// One breached constraint family instance found by [`validate_schedule`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleViolation {
    pub family: ConstraintFamily,
    pub message: String,
}

/// Constraint families checked by the schedule validator. Per-server slot
/// capacity (one job per server per slot) is enforced structurally by the
/// schedule's assignment map and at decode time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintFamily {
    /// A job is touched outside its lifetime window.
    WindowService,
    /// Real-server slots of a job exceed its slot budget.
    ServiceBudget,
    /// A job's demand is not fully covered inside its window.
    FullService,
    /// Exactly one of {some server, unserved marker} per job and window slot.
    ExactlyOne,
    /// A server served real work right after a dark slot.
    OffNoService,
    /// A setup slot where the server is not powered-idle.
    SetupIdle,
    /// A setup start without n_on consecutive setup slots after it.
    SetupRun,
    /// A setup start not marked as a setup slot.
    SetupStart,
    /// Setup slots too close to the end of the horizon.
    LateSetup,
    /// Total setup slots differ from n_on times the setup starts.
    SetupTotals,
}

/// Re-evaluates every constraint family directly on the schedule, returning
/// one violation per breach. Independent of the compiled program: works from
/// the schedule and instance alone, deriving setup starts from first
/// principles (powered-idle right after a dark slot).
pub fn validate_schedule(schedule: &Schedule, instance: &Instance) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    let mut push = |family: ConstraintFamily, message: String| {
        out.push(ScheduleViolation { family, message });
    };
    let t_max = schedule.t_max;
    let n = instance.servers.len() as u32;
    let energy = &instance.energy;
    let n_on = energy.n_on;

    let powered = |i: u32, t: u32| -> bool {
        if t == 0 {
            instance.servers[(i - 1) as usize].initially_on
        } else {
            !matches!(schedule.state(t, i), SlotAssignment::Off)
        }
    };
    let idle = |i: u32, t: u32| matches!(schedule.state(t, i), SlotAssignment::Idle);
    // Setup start: powered-idle in t after a dark t-1.
    let setup_start = |i: u32, t: u32| -> bool { idle(i, t) && !powered(i, t - 1) };

    // Window and per-slot assignment structure, per job.
    for job in &instance.jobs {
        let mut budget_used = 0u32;
        let mut service = 0.0f64;
        for t in 1..=t_max {
            let mut servers_serving = 0u32;
            for srv in &instance.servers {
                if schedule.state(t, srv.id) == SlotAssignment::Serving(job.id) {
                    servers_serving += 1;
                    service += srv.speed * energy.tau;
                }
            }
            let unserved = schedule.unserved.contains(&(t, job.id)) as u32;
            let total = servers_serving + unserved;
            if job.window().contains(&t) {
                budget_used += servers_serving;
                if total != 1 {
                    push(
                        ConstraintFamily::ExactlyOne,
                        format!("job {} has {} assignments in slot {}", job.id, total, t),
                    );
                }
            } else if total != 0 {
                push(
                    ConstraintFamily::WindowService,
                    format!("job {} touched outside its window in slot {}", job.id, t),
                );
            }
        }
        if budget_used > job.deadline_slots {
            push(
                ConstraintFamily::ServiceBudget,
                format!(
                    "job {} uses {} server slots, budget {}",
                    job.id, budget_used, job.deadline_slots
                ),
            );
        }
        if service + 1e-9 < job.demand {
            push(
                ConstraintFamily::FullService,
                format!("job {} served {} of {} cycles", job.id, service, job.demand),
            );
        }
    }

    // Per-server families.
    for i in 1..=n {
        for t in 1..=t_max {
            if matches!(schedule.state(t, i), SlotAssignment::Serving(_)) && !powered(i, t - 1) {
                push(
                    ConstraintFamily::OffNoService,
                    format!("server {} serves in slot {} right after a dark slot", i, t),
                );
            }
            if schedule.setup.contains(&(t, i)) && !idle(i, t) {
                push(
                    ConstraintFamily::SetupIdle,
                    format!("setup slot ({}, server {}) is not powered-idle", t, i),
                );
            }
            if setup_start(i, t) {
                if !schedule.setup.contains(&(t, i)) {
                    push(
                        ConstraintFamily::SetupStart,
                        format!("server {} restarts in slot {} without a setup mark", i, t),
                    );
                }
                let end = t_max.min(t + n_on - 1);
                let run = (t..=end).filter(|&t2| schedule.setup.contains(&(t2, i))).count();
                if (run as u32) < n_on {
                    push(
                        ConstraintFamily::SetupRun,
                        format!(
                            "server {} setup starting in slot {} covers {} of {} slots",
                            i, t, run, n_on
                        ),
                    );
                }
            }
        }

        // Setup budget near the horizon end.
        if t_max >= 2 {
            let w_start = if n_on >= t_max { 1 } else { t_max - n_on };
            let late: u32 =
                (w_start..=t_max - 1).filter(|&t2| schedule.setup.contains(&(t2, i))).count()
                    as u32;
            let allowance = if t_max > n_on + 1 {
                if powered(i, t_max - n_on - 1) {
                    n_on
                } else {
                    0
                }
            } else if t_max == n_on + 1 {
                if powered(i, 0) {
                    n_on
                } else {
                    0
                }
            } else {
                0
            };
            if late > allowance {
                push(
                    ConstraintFamily::LateSetup,
                    format!("server {} has {} late setup slots, allowance {}", i, late, allowance),
                );
            }
        }

        let starts = (1..=t_max).filter(|&t| setup_start(i, t)).count() as u32;
        let setups = (1..=t_max).filter(|&t| schedule.setup.contains(&(t, i))).count() as u32;
        if starts * n_on != setups {
            push(
                ConstraintFamily::SetupTotals,
                format!(
                    "server {}: {} setup starts require {} setup slots, found {}",
                    i,
                    starts,
                    starts * n_on,
                    setups
                ),
            );
        }
    }

    out
}

/// Value of the linear relaxation of the compiled program.
pub fn lp_relaxation(instance: &Instance) -> Result<LpSolution, OfflineError> {
    let (program, _) = build_bip(instance)?;
    Ok(milp::solve_lp(&program)?)
}

/// Outcome of an exact offline solve: the solver result plus the decoded
/// schedule whenever a feasible point is available.
#[derive(Debug, Clone)]
pub struct OfflineSolution {
    pub bip: BipSolution,
    pub schedule: Option<Schedule>,
}

/// Compiles and solves the instance exactly, decoding the incumbent.
pub fn solve_offline(
    instance: &Instance,
    limits: SolveLimits,
) -> Result<OfflineSolution, OfflineError> {
    let (program, idx) = build_bip(instance)?;
    let bip = milp::solve_bip(&program, limits)?;
    let schedule = if bip.point.is_empty() {
        None
    } else {
        match decode_schedule(&bip.point, &idx, instance) {
            Ok(s) => Some(s),
            Err(e) => {
                return Err(OfflineError::Milp(MilpError::Numerical(format!(
                    "solver point failed to decode: {}",
                    e
                ))))
            }
        }
    };
    Ok(OfflineSolution { bip, schedule })
}
