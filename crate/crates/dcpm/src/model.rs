//! Shared domain types: instances, parameters, schedules and run results.
//!
//! All types are immutable after construction and safe to share across
//! threads. Slot indices are 1-based throughout; a job arriving in slot
//! `arrival_slot` with `deadline_slots = n` may legally occupy the slots
//! `arrival_slot ..= arrival_slot + n` (its lifetime window).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A physical server: identifier, processing speed (cycles per second) and
/// its power state at the start of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub id: u32,
    pub speed: f64,
    pub initially_on: bool,
}

/// A job: identifier, total service demand in processor cycles, arrival slot
/// and deadline expressed as a slot count. The deadline in seconds is always
/// `deadline_slots * tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: u32,
    pub demand: f64,
    pub arrival_slot: u32,
    pub deadline_slots: u32,
}

impl JobSpec {
    /// Inclusive lifetime window `arrival_slot ..= arrival_slot + deadline_slots`.
    pub fn window(&self) -> std::ops::RangeInclusive<u32> {
        self.arrival_slot..=self.arrival_slot + self.deadline_slots
    }
}

/// Energy and timing constants of the data center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Slot duration in seconds.
    pub tau: f64,
    /// Energy drawn by a powered server per slot, in joules.
    pub e_slot: f64,
    /// Energy drawn per setup slot while a server switches on, in joules.
    pub e_on: f64,
    /// Number of consecutive setup slots an OFF server needs to come up.
    pub n_on: u32,
}

impl EnergyParams {
    /// Paper-style defaults: one-second slots, 200 J per powered slot,
    /// 160 J per setup slot.
    pub fn defaults(n_on: u32) -> Self {
        EnergyParams { tau: 1.0, e_slot: 200.0, e_on: 160.0, n_on }
    }
}

/// Tuning knobs of the online policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineParams {
    /// Maximal wait time in seconds before an idle server is switched off.
    pub t_wait: f64,
    /// Jobs-to-server ratio threshold that triggers activation of OFF servers.
    pub n_ja: u32,
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub servers: Vec<ServerSpec>,
    pub jobs: Vec<JobSpec>,
    pub energy: EnergyParams,
}

/// One violated invariant found by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub message: String,
}

impl Violation {
    fn new(message: impl Into<String>) -> Self {
        Violation { message: message.into() }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("instance has no jobs")]
    NoJobs,
}

/// Checks every structural invariant of an instance and returns one record
/// per breach. An empty list means the instance is well formed. This function
/// never panics on structurally well-formed input.
pub fn validate_instance(instance: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();

    if instance.servers.is_empty() {
        out.push(Violation::new("server list is empty"));
    }
    if instance.jobs.is_empty() {
        out.push(Violation::new("job list is empty"));
    }

    let mut server_ids = BTreeSet::new();
    for s in &instance.servers {
        if !(s.speed > 0.0) || !s.speed.is_finite() {
            out.push(Violation::new(format!(
                "server {}: speed must be positive and finite, got {}",
                s.id, s.speed
            )));
        }
        if !server_ids.insert(s.id) {
            out.push(Violation::new(format!("server id {} appears more than once", s.id)));
        }
    }
    if !instance.servers.is_empty() {
        let n = instance.servers.len() as u32;
        let dense = (1..=n).all(|id| server_ids.contains(&id));
        if !dense && server_ids.len() == instance.servers.len() {
            out.push(Violation::new(format!("server ids must be dense 1..={}", n)));
        }
    }

    let mut job_ids = BTreeSet::new();
    for j in &instance.jobs {
        if !(j.demand > 0.0) || !j.demand.is_finite() {
            out.push(Violation::new(format!(
                "job {}: demand must be positive and finite, got {}",
                j.id, j.demand
            )));
        }
        if j.arrival_slot < 1 {
            out.push(Violation::new(format!("job {}: arrival_slot must be >= 1", j.id)));
        }
        if j.deadline_slots < 1 {
            out.push(Violation::new(format!("job {}: deadline_slots must be >= 1", j.id)));
        }
        if !job_ids.insert(j.id) {
            out.push(Violation::new(format!("job id {} appears more than once", j.id)));
        }
    }
    if !instance.jobs.is_empty() {
        let n = instance.jobs.len() as u32;
        let dense = (1..=n).all(|id| job_ids.contains(&id));
        if !dense && job_ids.len() == instance.jobs.len() {
            out.push(Violation::new(format!("job ids must be dense 1..={}", n)));
        }
    }

    let e = &instance.energy;
    if !(e.tau > 0.0) || !e.tau.is_finite() {
        out.push(Violation::new(format!("tau must be positive, got {}", e.tau)));
    }
    if e.n_on < 1 {
        out.push(Violation::new("n_on must be >= 1"));
    }
    if !(e.e_slot >= 0.0) || !e.e_slot.is_finite() {
        out.push(Violation::new(format!("e_slot must be >= 0, got {}", e.e_slot)));
    }
    if !(e.e_on >= 0.0) || !e.e_on.is_finite() {
        out.push(Violation::new(format!("e_on must be >= 0, got {}", e.e_on)));
    }

    out
}

/// Last slot of the horizon: the maximum of `arrival_slot + deadline_slots`
/// over all jobs. The scheduling horizon is `1..=t_max_of(instance)`.
pub fn t_max_of(instance: &Instance) -> Result<u32, ModelError> {
    instance
        .jobs
        .iter()
        .map(|j| j.arrival_slot + j.deadline_slots)
        .max()
        .ok_or(ModelError::NoJobs)
}

/// What a server does in one slot of a decoded offline schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "job")]
pub enum SlotAssignment {
    /// Powered and serving the given job.
    Serving(u32),
    /// Powered but serving nothing (possibly a setup slot).
    Idle,
    /// Unpowered.
    Off,
}

/// A decoded offline schedule. `assign` covers every (slot, server) pair of
/// the horizon; `setup` marks the slots a server spends switching on;
/// `unserved` marks (slot, job) pairs inside the job's window where no real
/// server was assigned. Serializes as record lists (JSON objects cannot key
/// on pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ScheduleRepr", from = "ScheduleRepr")]
pub struct Schedule {
    pub t_max: u32,
    pub assign: BTreeMap<(u32, u32), SlotAssignment>,
    pub setup: BTreeSet<(u32, u32)>,
    pub unserved: BTreeSet<(u32, u32)>,
}

/// Wire form of [`Schedule`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleRepr {
    t_max: u32,
    assign: Vec<AssignRecord>,
    /// (slot, server id) pairs.
    setup: Vec<(u32, u32)>,
    /// (slot, job id) pairs.
    unserved: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AssignRecord {
    slot: u32,
    server: u32,
    #[serde(flatten)]
    state: SlotAssignment,
}

impl From<Schedule> for ScheduleRepr {
    fn from(s: Schedule) -> ScheduleRepr {
        ScheduleRepr {
            t_max: s.t_max,
            assign: s
                .assign
                .into_iter()
                .map(|((slot, server), state)| AssignRecord { slot, server, state })
                .collect(),
            setup: s.setup.into_iter().collect(),
            unserved: s.unserved.into_iter().collect(),
        }
    }
}

impl From<ScheduleRepr> for Schedule {
    fn from(r: ScheduleRepr) -> Schedule {
        Schedule {
            t_max: r.t_max,
            assign: r
                .assign
                .into_iter()
                .map(|rec| ((rec.slot, rec.server), rec.state))
                .collect(),
            setup: r.setup.into_iter().collect(),
            unserved: r.unserved.into_iter().collect(),
        }
    }
}

impl Schedule {
    pub fn empty(t_max: u32) -> Self {
        Schedule { t_max, assign: BTreeMap::new(), setup: BTreeSet::new(), unserved: BTreeSet::new() }
    }

    /// Assignment for (slot, server), defaulting to Off when absent.
    pub fn state(&self, slot: u32, server: u32) -> SlotAssignment {
        self.assign.get(&(slot, server)).copied().unwrap_or(SlotAssignment::Off)
    }
}

/// Per-slot record of an online run, suitable for CSV tracing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u32,
    /// (server id, job id) pairs chosen this slot.
    pub assignments: Vec<(u32, u32)>,
    /// Servers moved OFF -> ACTIVATING this slot.
    pub activated: Vec<u32>,
    /// Servers moved ON -> OFF this slot.
    pub deactivated: Vec<u32>,
    pub energy_this_slot: f64,
    /// Jobs-to-server ratio observed by the activation test.
    pub ratio: f64,
    pub jobs: u32,
    pub on: u32,
    pub off: u32,
    pub activating: u32,
}

/// Aggregate result of an online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub total_energy: f64,
    pub jobs_within_deadline: u32,
    pub trace: Vec<SlotRecord>,
}

/// Builds an instance from parallel per-server and per-job value rows, with
/// ids assigned 1.. in order and all servers initially on. Convenient for the
/// fixed examples used by the experiment drivers and tests.
pub fn instance_from_rows(
    speeds: &[f64],
    demands: &[f64],
    arrivals: &[u32],
    deadlines: &[u32],
    energy: EnergyParams,
) -> Instance {
    Instance {
        servers: speeds
            .iter()
            .enumerate()
            .map(|(i, &speed)| ServerSpec { id: i as u32 + 1, speed, initially_on: true })
            .collect(),
        jobs: demands
            .iter()
            .zip(arrivals)
            .zip(deadlines)
            .enumerate()
            .map(|(i, ((&demand, &arrival_slot), &deadline_slots))| JobSpec {
                id: i as u32 + 1,
                demand,
                arrival_slot,
                deadline_slots,
            })
            .collect(),
        energy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn example1() -> Instance {
        instance_from_rows(
            &[4.0, 2.0, 2.0],
            &[4.0, 1.0, 2.0, 5.0, 5.0, 5.0, 1.0, 3.0],
            &[2, 2, 3, 3, 3, 5, 5, 5],
            &[3, 4, 2, 2, 4, 4, 4, 3],
            EnergyParams::defaults(250),
        )
    }

    fn instance_from_rows(
        speeds: &[f64],
        demands: &[f64],
        arrivals: &[u32],
        deadlines: &[u32],
        energy: EnergyParams,
    ) -> Instance {
        super::instance_from_rows(speeds, demands, arrivals, deadlines, energy)
    }

    #[test]
    fn example_instance_is_valid() {
        assert_eq!(validate_instance(&example1()), Vec::new());
    }

    #[test]
    fn zero_demand_is_reported_once_naming_the_job() {
        let mut inst = example1();
        inst.jobs[2].demand = 0.0;
        let violations = validate_instance(&inst);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("job 3"));
    }

    #[test]
    fn duplicate_server_ids_are_reported() {
        let mut inst = example1();
        inst.servers[2].id = 1;
        let violations = validate_instance(&inst);
        assert!(violations.iter().any(|v| v.message.contains("server id 1")));
    }

    #[test]
    fn t_max_of_example_is_nine() {
        assert_eq!(t_max_of(&example1()), Ok(9));
    }

    #[test]
    fn t_max_of_single_job() {
        let inst = instance_from_rows(&[1.0], &[1.0], &[1], &[1], EnergyParams::defaults(1));
        assert_eq!(t_max_of(&inst), Ok(2));
    }

    #[test]
    fn t_max_of_two_jobs_takes_the_max() {
        let inst =
            instance_from_rows(&[1.0], &[1.0, 1.0], &[1, 4], &[3, 1], EnergyParams::defaults(1));
        assert_eq!(t_max_of(&inst), Ok(5));
    }

    #[test]
    fn t_max_errors_on_empty_jobs() {
        let mut inst = example1();
        inst.jobs.clear();
        assert_eq!(t_max_of(&inst), Err(ModelError::NoJobs));
    }

    #[test]
    fn serde_round_trip_preserves_structure() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..50 {
            let n = rng.uniform_inclusive(1, 5) as usize;
            let m = rng.uniform_inclusive(1, 8) as usize;
            let speeds: Vec<f64> = (0..n).map(|_| rng.uniform_inclusive(1, 4) as f64).collect();
            let demands: Vec<f64> = (0..m).map(|_| rng.uniform_inclusive(1, 5) as f64).collect();
            let arrivals: Vec<u32> = (0..m).map(|_| rng.uniform_inclusive(1, 6) as u32).collect();
            let deadlines: Vec<u32> = (0..m).map(|_| rng.uniform_inclusive(1, 4) as u32).collect();
            let inst = instance_from_rows(
                &speeds,
                &demands,
                &arrivals,
                &deadlines,
                EnergyParams::defaults(2),
            );
            let json = serde_json::to_string(&inst).unwrap();
            let back: Instance = serde_json::from_str(&json).unwrap();
            assert_eq!(inst, back);
        }
    }

    #[test]
    fn t_max_dominates_every_job_window_with_equality_somewhere() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..100 {
            let m = rng.uniform_inclusive(1, 10) as usize;
            let demands: Vec<f64> = (0..m).map(|_| rng.uniform_inclusive(1, 5) as f64).collect();
            let arrivals: Vec<u32> = (0..m).map(|_| rng.uniform_inclusive(1, 9) as u32).collect();
            let deadlines: Vec<u32> = (0..m).map(|_| rng.uniform_inclusive(1, 4) as u32).collect();
            let inst = instance_from_rows(
                &[2.0],
                &demands,
                &arrivals,
                &deadlines,
                EnergyParams::defaults(2),
            );
            let t_max = t_max_of(&inst).unwrap();
            assert!(inst.jobs.iter().all(|j| j.arrival_slot + j.deadline_slots <= t_max));
            assert!(inst.jobs.iter().any(|j| j.arrival_slot + j.deadline_slots == t_max));
        }
    }

    #[test]
    fn validator_is_total_on_degenerate_input() {
        let inst = Instance {
            servers: vec![],
            jobs: vec![],
            energy: EnergyParams { tau: 0.0, e_slot: -1.0, e_on: f64::NAN, n_on: 0 },
        };
        let violations = validate_instance(&inst);
        assert!(violations.len() >= 5);
    }

    #[test]
    fn schedule_serializes_as_records_and_round_trips() {
        let mut s = Schedule::empty(3);
        s.assign.insert((1, 1), SlotAssignment::Serving(2));
        s.assign.insert((2, 1), SlotAssignment::Idle);
        s.assign.insert((3, 1), SlotAssignment::Off);
        s.setup.insert((2, 1));
        s.unserved.insert((1, 2));
        let json = serde_json::to_string(&s).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["assign"][0]["slot"], 1);
        assert_eq!(v["assign"][0]["state"], "Serving");
        assert_eq!(v["assign"][0]["job"], 2);
        let back: Schedule = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn instance_json_uses_the_documented_field_names() {
        let inst = instance_from_rows(&[2.0], &[1.0], &[1], &[1], EnergyParams::defaults(1));
        let v: serde_json::Value = serde_json::to_value(&inst).unwrap();
        assert!(v["servers"][0]["initially_on"].is_boolean());
        assert!(v["jobs"][0]["arrival_slot"].is_number());
        assert!(v["jobs"][0]["deadline_slots"].is_number());
        assert!(v["energy"]["e_slot"].is_number());
        assert!(v["energy"]["n_on"].is_number());
    }
}
