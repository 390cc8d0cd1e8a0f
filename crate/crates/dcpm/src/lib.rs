//! Deadline-aware power management for data centers.
//!
//! The library models a slotted-time data center in which jobs with service
//! demands and deadlines are assigned to servers that can be switched ON and
//! OFF (switching ON takes a multi-slot setup). It provides:
//!
//! * [`model`] — shared domain types (instances, schedules, run results) with
//!   validation and JSON (de)serialization,
//! * [`milp`] — a generic 0-1 linear minimization engine (two-phase dense
//!   simplex and depth-first branch-and-bound),
//! * [`offline`] — compilation of an instance into the exact binary program,
//!   solution decoding and an independent schedule validator,
//! * [`assignment`] — per-slot cost matrices with virtual rows/columns, a
//!   Hungarian solver and random-permutation assignment,
//! * [`online`] — the slot-by-slot online heuristic (server lifecycle, wait
//!   timers, activation triggering) and its randomized-routing variant,
//! * [`harness`] — workload generation, experiment drivers and CSV/SVG output.

pub mod assignment;
pub mod harness;
pub mod milp;
pub mod model;
pub mod offline;
pub mod online;
pub mod rng;
