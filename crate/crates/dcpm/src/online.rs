//! The slot-by-slot online heuristic and its randomized-routing variant.
//!
//! Each slot runs the same fixed sequence:
//!
//! 1. servers whose setup timer has matured move ACTIVATING -> ON;
//! 2. flagged servers whose wait timer reached `t_wait` move ON -> OFF;
//! 3. the jobs-to-server ratio of the carried-over backlog is tested
//!    against `n_ja`; if it triggers, enough OFF servers are activated to
//!    bring powered-plus-activating capacity up to `ceil(|jobs| / n_ja)`
//!    (lowest ids first); all activation timers then advance;
//! 4. jobs arriving this slot join the backlog (visible to the assignment
//!    below, not to the ratio test above);
//! 5. the slot's padded cost matrix is assigned either optimally
//!    (Hungarian) or by a uniformly random permutation;
//! 6. served jobs shed one slot of service, every job gains one slot of
//!    delay, finished jobs leave (counting a deadline hit when they made
//!    it), and exactly one randomly chosen unassigned ON server advances
//!    its wait state.
//!
//! Energy per slot is `e_slot` per ON server plus `e_on` per ACTIVATING
//! server. A run ends once all arrivals are in and the backlog is empty;
//! servers still powered or warming up after that are not billed further.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{hungarian, random_assignment, CostMatrix, JobCost};
use crate::model::{
    t_max_of, validate_instance, Instance, JobSpec, OnlineParams, RunResult, SlotRecord,
    Violation,
};
use crate::rng::SplitMix64;

/// Assignment policy for the per-slot matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Hungarian,
    Random,
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hungarian" => Ok(Policy::Hungarian),
            "random" => Ok(Policy::Random),
            other => Err(format!("unknown policy `{}` (expected hungarian|random)", other)),
        }
    }
}

/// A job still in the system: remaining demand, accumulated delay and the
/// deadline both in seconds and as a slot index.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveJob {
    pub id: u32,
    pub remaining: f64,
    pub delay: f64,
    pub deadline: f64,
    pub arrival_slot: u32,
    pub deadline_slot: u32,
}

/// Full per-slot state of the online algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    pub slot: u32,
    /// Backlog ordered by job id.
    pub active_jobs: Vec<ActiveJob>,
    /// Powered servers, ascending ids.
    pub s_on: Vec<u32>,
    /// Dark servers, ascending ids.
    pub s_off: Vec<u32>,
    /// Servers in setup, ascending ids.
    pub s_act: Vec<u32>,
    /// Seconds spent activating, keyed by members of `s_act`.
    pub act_timers: BTreeMap<u32, f64>,
    /// Seconds waited, keyed by flagged members of `s_on`.
    pub wait_timers: BTreeMap<u32, f64>,
    pub wait_flags: BTreeMap<u32, bool>,
    pub cumulative_energy: f64,
    pub deadline_hits: u32,
}

impl OnlineState {
    /// Initial state: servers split by their initial power state, no jobs,
    /// cleared timers and flags.
    pub fn initial(instance: &Instance) -> OnlineState {
        let mut s_on = Vec::new();
        let mut s_off = Vec::new();
        for s in &instance.servers {
            if s.initially_on {
                s_on.push(s.id);
            } else {
                s_off.push(s.id);
            }
        }
        s_on.sort_unstable();
        s_off.sort_unstable();
        OnlineState {
            slot: 0,
            active_jobs: Vec::new(),
            s_on,
            s_off,
            s_act: Vec::new(),
            act_timers: BTreeMap::new(),
            wait_timers: BTreeMap::new(),
            wait_flags: BTreeMap::new(),
            cumulative_energy: 0.0,
            deadline_hits: 0,
        }
    }
}

/// Jobs-to-server ratio: backlog size over powered-plus-activating servers.
/// Empty backlog gives 0; jobs with no capacity at all give infinity.
pub fn jobs_to_server_ratio(state: &OnlineState) -> f64 {
    let jobs = state.active_jobs.len() as f64;
    let capacity = (state.s_on.len() + state.s_act.len()) as f64;
    if jobs == 0.0 {
        0.0
    } else if capacity == 0.0 {
        f64::INFINITY
    } else {
        jobs / capacity
    }
}

/// Behavior switches that are not part of the core parameter set.
#[derive(Debug, Clone)]
pub struct OnlineOptions {
    /// Advance the wait state of every unassigned ON server each slot
    /// instead of one randomly chosen one.
    pub wait_all_idle: bool,
    /// Abort a run after `horizon_cap_factor * t_max` slots.
    pub horizon_cap_factor: u32,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        OnlineOptions { wait_all_idle: false, horizon_cap_factor: 100 }
    }
}

#[derive(Debug, Error)]
pub enum OnlineError {
    #[error("invalid instance: {0:?}")]
    InvalidInstance(Vec<Violation>),
    #[error("run exceeded the safety horizon of {cap} slots")]
    HorizonExceeded { cap: u32 },
}

/// Advances the state by one slot. `arrivals` are the jobs whose arrival
/// slot equals the new slot number; the generator drives the random policy
/// and the idle-server pick and must be the same one across the whole run.
pub fn advance_slot(
    mut state: OnlineState,
    arrivals: &[JobSpec],
    instance: &Instance,
    params: &OnlineParams,
    policy: Policy,
    options: &OnlineOptions,
    rng: &mut SplitMix64,
) -> (OnlineState, SlotRecord) {
    state.slot += 1;
    let energy = &instance.energy;
    let tau = energy.tau;

    // Step 1: finished setups come online with a clean wait state.
    let matured: Vec<u32> = state
        .s_act
        .iter()
        .copied()
        .filter(|s| state.act_timers.get(s).copied().unwrap_or(0.0) >= energy.n_on as f64 * tau)
        .collect();
    for s in &matured {
        state.s_act.retain(|x| x != s);
        state.act_timers.remove(s);
        state.s_on.push(*s);
        state.wait_flags.insert(*s, false);
        state.wait_timers.insert(*s, 0.0);
    }
    state.s_on.sort_unstable();

    // Step 2: flagged servers that waited out t_wait power down.
    let deactivated: Vec<u32> = state
        .s_on
        .iter()
        .copied()
        .filter(|s| {
            state.wait_flags.get(s).copied().unwrap_or(false)
                && state.wait_timers.get(s).copied().unwrap_or(0.0) >= params.t_wait
        })
        .collect();
    for s in &deactivated {
        state.s_on.retain(|x| x != s);
        state.wait_flags.remove(s);
        state.wait_timers.remove(s);
        state.s_off.push(*s);
    }
    state.s_off.sort_unstable();

    // Step 3: activation test on the carried-over backlog. Activation tops
    // capacity up to ceil(backlog / n_ja), lowest server ids first.
    let ratio = jobs_to_server_ratio(&state);
    let mut activated = Vec::new();
    if !state.active_jobs.is_empty() && ratio >= params.n_ja as f64 {
        let target = state.active_jobs.len().div_ceil(params.n_ja as usize);
        let have = state.s_on.len() + state.s_act.len();
        let need = target.saturating_sub(have).min(state.s_off.len());
        for _ in 0..need {
            let s = state.s_off.remove(0);
            state.s_act.push(s);
            state.act_timers.insert(s, 0.0);
            activated.push(s);
        }
        state.s_act.sort_unstable();
    }
    for timer in state.act_timers.values_mut() {
        *timer += tau;
    }

    // Arrivals join the backlog with zero delay.
    for a in arrivals {
        state.active_jobs.push(ActiveJob {
            id: a.id,
            remaining: a.demand,
            delay: 0.0,
            deadline: a.deadline_slots as f64 * tau,
            arrival_slot: a.arrival_slot,
            deadline_slot: a.arrival_slot + a.deadline_slots,
        });
    }
    state.active_jobs.sort_by_key(|j| j.id);

    let energy_this_slot =
        energy.e_slot * state.s_on.len() as f64 + energy.e_on * state.s_act.len() as f64;
    state.cumulative_energy += energy_this_slot;

    // Steps 4-5: padded cost matrix, then the policy's matching.
    let mut assignments: Vec<(u32, u32)> = Vec::new();
    if !state.s_on.is_empty() || !state.active_jobs.is_empty() {
        let jobs: Vec<JobCost> = state
            .active_jobs
            .iter()
            .map(|j| JobCost {
                id: j.id,
                remaining: j.remaining,
                delay: j.delay,
                deadline: j.deadline,
            })
            .collect();
        let speed_of = |id: u32| -> f64 {
            instance.servers[(id - 1) as usize].speed
        };
        let servers: Vec<(u32, f64)> =
            state.s_on.iter().map(|&id| (id, speed_of(id))).collect();
        let matrix = CostMatrix::build(&jobs, &servers, energy)
            .expect("non-empty slot has a matrix");
        let matching = match policy {
            Policy::Hungarian => hungarian(&matrix),
            Policy::Random => random_assignment(&matrix, rng),
        }
        .expect("finite matrix");
        assignments = matching.server_job_pairs(&matrix);
        assignments.sort_unstable();
    }

    // Step 6a: wait-state bookkeeping. Assigned servers lose their flag;
    // of the unassigned ones, one random pick (or all, behind the option)
    // advances flag/timer.
    let assigned_servers: Vec<u32> = assignments.iter().map(|&(s, _)| s).collect();
    let mut idle_servers: Vec<u32> = state
        .s_on
        .iter()
        .copied()
        .filter(|s| !assigned_servers.contains(s))
        .collect();
    idle_servers.sort_unstable();
    for s in &assigned_servers {
        if state.wait_flags.get(s).copied().unwrap_or(false) {
            state.wait_flags.insert(*s, false);
            state.wait_timers.insert(*s, 0.0);
        }
    }
    let bump = |state: &mut OnlineState, s: u32| {
        if state.wait_flags.get(&s).copied().unwrap_or(false) {
            *state.wait_timers.entry(s).or_insert(0.0) += tau;
        } else {
            state.wait_flags.insert(s, true);
            state.wait_timers.insert(s, tau);
        }
    };
    if !idle_servers.is_empty() {
        if options.wait_all_idle {
            for s in idle_servers.clone() {
                bump(&mut state, s);
            }
        } else {
            let pick = idle_servers[rng.below(idle_servers.len() as u64) as usize];
            bump(&mut state, pick);
        }
    }

    // Step 6b: service and delay updates, then completions.
    let speed_of = |id: u32| -> f64 { instance.servers[(id - 1) as usize].speed };
    for &(server, job) in &assignments {
        let j = state
            .active_jobs
            .iter_mut()
            .find(|j| j.id == job)
            .expect("assigned job is active");
        j.remaining = (j.remaining - speed_of(server) * tau).max(0.0);
    }
    for j in state.active_jobs.iter_mut() {
        j.delay += tau;
    }
    let slot = state.slot;
    let mut hits = 0u32;
    state.active_jobs.retain(|j| {
        if j.remaining <= 0.0 {
            if slot <= j.deadline_slot {
                hits += 1;
            }
            false
        } else {
            true
        }
    });
    state.deadline_hits += hits;

    let record = SlotRecord {
        slot,
        assignments,
        activated,
        deactivated,
        energy_this_slot,
        ratio,
        jobs: state.active_jobs.len() as u32,
        on: state.s_on.len() as u32,
        off: state.s_off.len() as u32,
        activating: state.s_act.len() as u32,
    };
    (state, record)
}

/// Runs the policy over a whole instance. Deterministic given the seed.
pub fn run_online(
    instance: &Instance,
    params: &OnlineParams,
    policy: Policy,
    seed: u64,
    options: &OnlineOptions,
) -> Result<RunResult, OnlineError> {
    let violations = validate_instance(instance);
    if !violations.is_empty() {
        return Err(OnlineError::InvalidInstance(violations));
    }
    let t_max = t_max_of(instance).expect("validated instance has jobs");
    let cap = options.horizon_cap_factor.saturating_mul(t_max).max(t_max);
    let max_arrival = instance.jobs.iter().map(|j| j.arrival_slot).max().unwrap();

    let mut arrivals_by_slot: BTreeMap<u32, Vec<JobSpec>> = BTreeMap::new();
    for j in &instance.jobs {
        arrivals_by_slot.entry(j.arrival_slot).or_default().push(j.clone());
    }
    for v in arrivals_by_slot.values_mut() {
        v.sort_by_key(|j| j.id);
    }

    let mut rng = SplitMix64::new(seed);
    let mut state = OnlineState::initial(instance);
    let mut trace = Vec::new();
    loop {
        let next_slot = state.slot + 1;
        if next_slot > cap {
            return Err(OnlineError::HorizonExceeded { cap });
        }
        let empty = Vec::new();
        let arrivals = arrivals_by_slot.get(&next_slot).unwrap_or(&empty);
        let (next, record) =
            advance_slot(state, arrivals, instance, params, policy, options, &mut rng);
        state = next;
        trace.push(record);
        if state.slot >= max_arrival && state.active_jobs.is_empty() {
            break;
        }
    }

    Ok(RunResult {
        total_energy: state.cumulative_energy,
        jobs_within_deadline: state.deadline_hits,
        trace,
    })
}
