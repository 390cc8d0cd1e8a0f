//! Workload generation, experiment drivers and file emission.
//!
//! Experiments are pure functions from an [`ExperimentConfig`] to a set of
//! named files (CSV, SVG, JSONL); the CLI only writes them to disk. All
//! randomness flows through [`crate::rng::mix_seed`], so every data point is
//! reproducible in isolation and adding sweep points never disturbs
//! existing ones. Per-replication instances are serialized next to the
//! results so any single number can be re-derived.

pub mod cli;
pub mod svg;

use serde::{Deserialize, Serialize};

use crate::milp::{BipStatus, LpStatus, SolveLimits};
use crate::model::{instance_from_rows, EnergyParams, Instance, JobSpec, OnlineParams, ServerSpec};
use crate::offline::{lp_relaxation, solve_offline};
use crate::online::{run_online, OnlineOptions, Policy};
use crate::rng::{mix_seed, SplitMix64};

// ---------------------------------------------------------------------------
// Workload generation
// ---------------------------------------------------------------------------

/// Initial power state policy for generated fleets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    AllOn,
    Uniform01,
}

/// Ranges are inclusive integer intervals `[lo, hi]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub num_servers: u32,
    pub num_jobs: u32,
    pub speed_range: (u64, u64),
    pub demand_range: (u64, u64),
    pub arrival_range: (u64, u64),
    pub deadline_range: (u64, u64),
    pub initial_state: InitialState,
    pub energy: EnergyParams,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), String> {
        let ranges = [
            ("speed_range", self.speed_range),
            ("demand_range", self.demand_range),
            ("arrival_range", self.arrival_range),
            ("deadline_range", self.deadline_range),
        ];
        for (name, (lo, hi)) in ranges {
            if lo < 1 {
                return Err(format!("{name}: lower bound must be >= 1"));
            }
            if lo > hi {
                return Err(format!("{name}: empty range [{lo}, {hi}]"));
            }
        }
        if self.num_servers == 0 || self.num_jobs == 0 {
            return Err("need at least one server and one job".into());
        }
        Ok(())
    }
}

/// Draws an instance from the spec. Draw order is fixed and documented:
/// per server (ids 1..) the speed, then its initial state when the policy
/// is `uniform_01`; per job (ids 1..) demand, arrival slot, deadline slots.
/// All draws are uniform over the inclusive ranges via one SplitMix64
/// stream seeded with `seed`.
pub fn gen_workload(spec: &WorkloadSpec, seed: u64) -> Instance {
    let mut rng = SplitMix64::new(seed);
    let mut servers = Vec::with_capacity(spec.num_servers as usize);
    for id in 1..=spec.num_servers {
        let speed = rng.uniform_inclusive(spec.speed_range.0, spec.speed_range.1) as f64;
        let initially_on = match spec.initial_state {
            InitialState::AllOn => true,
            InitialState::Uniform01 => rng.below(2) == 1,
        };
        servers.push(ServerSpec { id, speed, initially_on });
    }
    let mut jobs = Vec::with_capacity(spec.num_jobs as usize);
    for id in 1..=spec.num_jobs {
        let demand = rng.uniform_inclusive(spec.demand_range.0, spec.demand_range.1) as f64;
        let arrival_slot =
            rng.uniform_inclusive(spec.arrival_range.0, spec.arrival_range.1) as u32;
        let deadline_slots =
            rng.uniform_inclusive(spec.deadline_range.0, spec.deadline_range.1) as u32;
        jobs.push(JobSpec { id, demand, arrival_slot, deadline_slots });
    }
    Instance { servers, jobs, energy: spec.energy.clone() }
}

/// Small-example spec: speeds 1..4, demands 1..5, arrivals 2..6, deadlines
/// 1..4 slots, servers all on.
pub fn small_example_spec(num_servers: u32, num_jobs: u32, n_on: u32) -> WorkloadSpec {
    WorkloadSpec {
        num_servers,
        num_jobs,
        speed_range: (1, 4),
        demand_range: (1, 5),
        arrival_range: (2, 6),
        deadline_range: (1, 4),
        initial_state: InitialState::AllOn,
        energy: EnergyParams::defaults(n_on),
    }
}

/// Large-example spec: speeds 2..4, demands 10..20, arrivals 2..200,
/// deadlines 10..20 slots, initial states uniform.
pub fn large_example_spec(num_servers: u32, num_jobs: u32, n_on: u32) -> WorkloadSpec {
    WorkloadSpec {
        num_servers,
        num_jobs,
        speed_range: (2, 4),
        demand_range: (10, 20),
        arrival_range: (2, 200),
        deadline_range: (10, 20),
        initial_state: InitialState::Uniform01,
        energy: EnergyParams::defaults(n_on),
    }
}

// ---------------------------------------------------------------------------
// Fixed benchmark instances
// ---------------------------------------------------------------------------

/// The five fixed three-server, eight-job benchmark instances. `k` is
/// 1-based.
pub fn benchmark_instance(k: usize) -> Instance {
    let (speeds, demands, arrivals, deadlines): (&[f64], &[f64], &[u32], &[u32]) = match k {
        1 => (
            &[4.0, 2.0, 2.0],
            &[4.0, 1.0, 2.0, 5.0, 5.0, 5.0, 1.0, 3.0],
            &[2, 2, 3, 3, 3, 5, 5, 5],
            &[3, 4, 2, 2, 4, 4, 4, 3],
        ),
        2 => (
            &[2.0, 2.0, 4.0],
            &[1.0, 1.0, 5.0, 3.0, 2.0, 1.0, 4.0, 1.0],
            &[2, 2, 2, 3, 4, 4, 5, 6],
            &[2, 4, 2, 2, 4, 3, 2, 3],
        ),
        3 => (
            &[4.0, 3.0, 2.0],
            &[3.0, 1.0, 2.0, 1.0, 3.0, 2.0, 3.0, 2.0],
            &[2, 2, 3, 4, 4, 6, 6, 6],
            &[3, 2, 3, 3, 4, 4, 2, 4],
        ),
        4 => (
            &[4.0, 4.0, 4.0],
            &[4.0, 4.0, 2.0, 3.0, 3.0, 3.0, 5.0, 2.0],
            &[2, 2, 2, 2, 4, 6, 6, 6],
            &[2, 3, 3, 2, 2, 4, 2, 4],
        ),
        5 => (
            &[4.0, 3.0, 4.0],
            &[4.0, 3.0, 1.0, 4.0, 3.0, 1.0, 2.0, 4.0],
            &[2, 2, 3, 4, 4, 4, 6, 6],
            &[4, 3, 4, 4, 2, 2, 4, 4],
        ),
        other => panic!("benchmark instance index {} out of 1..=5", other),
    };
    instance_from_rows(speeds, demands, arrivals, deadlines, EnergyParams::defaults(250))
}

/// Online parameters used by the fixed small benchmarks.
pub fn benchmark_online_params() -> OnlineParams {
    OnlineParams { t_wait: 1.0, n_ja: 1 }
}

// ---------------------------------------------------------------------------
// Experiment configuration and outputs
// ---------------------------------------------------------------------------

fn default_replications() -> u32 {
    100
}
fn default_seed() -> u64 {
    42
}
fn default_online_seeds() -> u32 {
    25
}

/// Experiment tuning mirrored by the JSON config files. Missing fields fall
/// back to the documented defaults; sweep lists default per experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub replications: u32,
    pub seed: u64,
    /// Seeds per online/randomized sweep in the table experiments.
    pub online_seeds: u32,
    pub n_ja_list: Option<Vec<u32>>,
    pub t_wait_list: Option<Vec<f64>>,
    pub num_servers_list: Option<Vec<u32>>,
    pub num_jobs_list: Option<Vec<u32>>,
    pub n_on: Option<u32>,
    /// Wall-clock limit per exact solve.
    pub max_seconds: Option<f64>,
    pub max_nodes: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            replications: default_replications(),
            seed: default_seed(),
            online_seeds: default_online_seeds(),
            n_ja_list: None,
            t_wait_list: None,
            num_servers_list: None,
            num_jobs_list: None,
            n_on: None,
            max_seconds: Some(60.0),
            max_nodes: None,
        }
    }
}

/// Named files produced by an experiment, ready to be written out.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub files: Vec<(String, String)>,
}

impl ExperimentOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs the online policy over a sweep of seeds; long horizon cap because
/// randomized runs can outlive many setup cycles.
fn seed_sweep(
    instance: &Instance,
    params: &OnlineParams,
    policy: Policy,
    base_seed: u64,
    tag: &str,
    point: u64,
    count: u32,
) -> Vec<f64> {
    let options = OnlineOptions { wait_all_idle: false, horizon_cap_factor: 100_000 };
    (0..count)
        .map(|rep| {
            let seed = mix_seed(base_seed, tag, point, rep as u64);
            run_online(instance, params, policy, seed, &options)
                .expect("benchmark run within horizon")
                .total_energy
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fixed-instance comparison table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Table1Row {
    pub example: usize,
    pub online: Vec<f64>,
    pub random: Vec<f64>,
    /// None when the exact solve hit its limits.
    pub optimal: Option<f64>,
    pub relaxed: f64,
}

/// Exact, relaxed, online and randomized costs for the five fixed
/// benchmark instances.
pub fn run_table1(config: &ExperimentConfig) -> (Vec<Table1Row>, ExperimentOutput) {
    let params = benchmark_online_params();
    let limits = SolveLimits { max_nodes: config.max_nodes, max_seconds: config.max_seconds };
    let mut rows = Vec::new();
    let mut csv = String::from("example,online_med,online_min,online_max,random_med,optimal,relaxed\n");
    let mut instances_json = Vec::new();

    for k in 1..=5 {
        let instance = benchmark_instance(k);
        instances_json.push(serde_json::to_string(&instance).unwrap());

        let exact = solve_offline(&instance, limits).expect("solvable benchmark");
        let optimal = match exact.bip.status {
            BipStatus::Optimal => Some(exact.bip.value),
            _ => None,
        };
        let relaxed_sol = lp_relaxation(&instance).expect("relaxation solves");
        assert_eq!(relaxed_sol.status, LpStatus::Optimal);
        let relaxed = relaxed_sol.value;

        let mut online = seed_sweep(
            &instance,
            &params,
            Policy::Hungarian,
            config.seed,
            "table1-online",
            k as u64,
            config.online_seeds,
        );
        let mut random = seed_sweep(
            &instance,
            &params,
            Policy::Random,
            config.seed,
            "table1-random",
            k as u64,
            config.online_seeds,
        );
        online.sort_by(f64::total_cmp);
        random.sort_by(f64::total_cmp);

        let optimal_cell = match optimal {
            Some(v) => format!("{}", v),
            None => "timeout".to_string(),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            k,
            median(&online),
            online.first().unwrap(),
            online.last().unwrap(),
            median(&random),
            optimal_cell,
            relaxed,
        ));
        rows.push(Table1Row { example: k, online, random, optimal, relaxed });
    }

    let output = ExperimentOutput {
        files: vec![
            ("table1.csv".into(), csv),
            ("table1_instances.jsonl".into(), instances_json.join("\n") + "\n"),
        ],
    };
    (rows, output)
}

// ---------------------------------------------------------------------------
// Parameter sweep on the fourth fixed instance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Table2Cell {
    pub t_wait: f64,
    pub n_ja: u32,
    pub online: Vec<f64>,
    pub random: Vec<f64>,
}

/// Sweeps (t_wait, n_ja) on the fourth benchmark instance for both
/// policies.
pub fn run_table2(config: &ExperimentConfig) -> (Vec<Table2Cell>, ExperimentOutput) {
    let instance = benchmark_instance(4);
    let t_waits = config.t_wait_list.clone().unwrap_or(vec![1.0, 2.0]);
    let n_jas = config.n_ja_list.clone().unwrap_or((1..=8).collect());

    let mut cells = Vec::new();
    let mut csv = String::from(
        "t_wait,n_ja,online_min,online_med,online_max,random_min,random_med,random_max\n",
    );
    for (wi, &t_wait) in t_waits.iter().enumerate() {
        for &n_ja in &n_jas {
            let params = OnlineParams { t_wait, n_ja };
            let point = (wi as u64) << 32 | n_ja as u64;
            let mut online = seed_sweep(
                &instance,
                &params,
                Policy::Hungarian,
                config.seed,
                "table2-online",
                point,
                config.online_seeds,
            );
            let mut random = seed_sweep(
                &instance,
                &params,
                Policy::Random,
                config.seed,
                "table2-random",
                point,
                config.online_seeds,
            );
            online.sort_by(f64::total_cmp);
            random.sort_by(f64::total_cmp);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t_wait,
                n_ja,
                online.first().unwrap(),
                median(&online),
                online.last().unwrap(),
                random.first().unwrap(),
                median(&random),
                random.last().unwrap(),
            ));
            cells.push(Table2Cell { t_wait, n_ja, online, random });
        }
    }

    let instance_json = serde_json::to_string(&instance).unwrap();
    let output = ExperimentOutput {
        files: vec![
            ("table2.csv".into(), csv),
            ("table2_instances.jsonl".into(), instance_json + "\n"),
        ],
    };
    (cells, output)
}

// ---------------------------------------------------------------------------
// Figure experiments
// ---------------------------------------------------------------------------

/// One aggregated data point of a figure.
#[derive(Debug, Clone)]
pub struct FigPoint {
    pub sweep: f64,
    pub series: String,
    pub mean: f64,
    pub stderr: f64,
}

fn fig_csv(points: &[FigPoint]) -> String {
    let mut csv = String::from("sweep,series,mean,stderr\n");
    for p in points {
        csv.push_str(&format!("{},{},{},{}\n", p.sweep, p.series, p.mean, p.stderr));
    }
    csv
}

fn fig_svg(title: &str, x_label: &str, y_label: &str, points: &[FigPoint]) -> String {
    let mut series_names: Vec<String> = Vec::new();
    for p in points {
        if !series_names.contains(&p.series) {
            series_names.push(p.series.clone());
        }
    }
    let series: Vec<svg::Series> = series_names
        .iter()
        .map(|name| svg::Series {
            label: name.clone(),
            points: points
                .iter()
                .filter(|p| &p.series == name)
                .map(|p| (p.sweep, p.mean))
                .collect(),
        })
        .collect();
    svg::line_chart(title, x_label, y_label, &series)
}

/// Shared driver for the activation-threshold figures: sweeps `n_ja`,
/// one series per fleet size, fixed 30-job workloads, short setups.
/// Returns (cost points, deadline-hit points, instances JSONL).
pub fn run_fig23(config: &ExperimentConfig) -> (Vec<FigPoint>, Vec<FigPoint>, String) {
    let n_jas = config.n_ja_list.clone().unwrap_or((1..=8).collect());
    let fleet_sizes = config.num_servers_list.clone().unwrap_or(vec![1, 2, 3, 4]);
    let num_jobs = config.num_jobs_list.as_ref().map(|l| l[0]).unwrap_or(30);
    let n_on = config.n_on.unwrap_or(10);
    let options = OnlineOptions { wait_all_idle: false, horizon_cap_factor: 100_000 };

    let mut cost_points = Vec::new();
    let mut hit_points = Vec::new();
    let mut instances = String::new();

    for &n in &fleet_sizes {
        let spec = large_example_spec(n, num_jobs, n_on);
        // One instance and one simulation seed per replication, shared
        // across the sweep so curves differ only through the parameter.
        let reps: Vec<(Instance, u64)> = (0..config.replications)
            .map(|rep| {
                let inst_seed = mix_seed(config.seed, "fig23-inst", n as u64, rep as u64);
                let sim_seed = mix_seed(config.seed, "fig23-sim", n as u64, rep as u64);
                (gen_workload(&spec, inst_seed), sim_seed)
            })
            .collect();
        for (rep, (inst, _)) in reps.iter().enumerate() {
            instances.push_str(&format!(
                "{{\"series\":\"N={}\",\"replication\":{},\"instance\":{}}}\n",
                n,
                rep,
                serde_json::to_string(inst).unwrap()
            ));
        }
        for &n_ja in &n_jas {
            let params = OnlineParams { t_wait: 2.0, n_ja };
            let mut costs = Vec::with_capacity(reps.len());
            let mut hits = Vec::with_capacity(reps.len());
            for (inst, sim_seed) in &reps {
                let r = run_online(inst, &params, Policy::Hungarian, *sim_seed, &options)
                    .expect("run within horizon");
                costs.push(r.total_energy);
                hits.push(r.jobs_within_deadline as f64);
            }
            let (mc, sc) = mean_stderr(&costs);
            let (mh, sh) = mean_stderr(&hits);
            let series = format!("N={}", n);
            cost_points.push(FigPoint { sweep: n_ja as f64, series: series.clone(), mean: mc, stderr: sc });
            hit_points.push(FigPoint { sweep: n_ja as f64, series, mean: mh, stderr: sh });
        }
    }
    (cost_points, hit_points, instances)
}

/// Wait-time sweep with slow setups; series over (fleet, jobs) pairs.
/// Uses the dense small-example arrival regime: with arrivals spread over
/// hundreds of slots, every fleet goes dark long before the first job no
/// matter the wait time, flattening the very effect the figure shows.
pub fn run_fig4(config: &ExperimentConfig) -> (Vec<FigPoint>, String) {
    let t_waits = config.t_wait_list.clone().unwrap_or(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let fleets = config.num_servers_list.clone().unwrap_or(vec![1, 2, 4]);
    let job_counts = config.num_jobs_list.clone().unwrap_or(vec![15, 30]);
    let n_on = config.n_on.unwrap_or(250);
    let options = OnlineOptions { wait_all_idle: false, horizon_cap_factor: 100_000 };

    let mut points = Vec::new();
    let mut instances = String::new();
    for (si, (&n, &j)) in fleets
        .iter()
        .flat_map(|n| job_counts.iter().map(move |j| (n, j)))
        .enumerate()
    {
        let spec = small_example_spec(n, j, n_on);
        let reps: Vec<(Instance, u64)> = (0..config.replications)
            .map(|rep| {
                let inst_seed = mix_seed(config.seed, "fig4-inst", si as u64, rep as u64);
                let sim_seed = mix_seed(config.seed, "fig4-sim", si as u64, rep as u64);
                (gen_workload(&spec, inst_seed), sim_seed)
            })
            .collect();
        for (rep, (inst, _)) in reps.iter().enumerate() {
            instances.push_str(&format!(
                "{{\"series\":\"N={} J={}\",\"replication\":{},\"instance\":{}}}\n",
                n,
                j,
                rep,
                serde_json::to_string(inst).unwrap()
            ));
        }
        for &t_wait in &t_waits {
            let params = OnlineParams { t_wait, n_ja: 5 };
            let mut costs = Vec::with_capacity(reps.len());
            for (inst, sim_seed) in &reps {
                let r = run_online(inst, &params, Policy::Hungarian, *sim_seed, &options)
                    .expect("run within horizon");
                costs.push(r.total_energy);
            }
            let (mean, stderr) = mean_stderr(&costs);
            points.push(FigPoint {
                sweep: t_wait,
                series: format!("N={} J={}", n, j),
                mean,
                stderr,
            });
        }
    }
    (points, instances)
}

/// Policy comparison over the job-count sweep: one (fleet, policy) series
/// pair per fleet size. Returns (cost points, deadline-hit points,
/// instances JSONL).
pub fn run_fig56(config: &ExperimentConfig) -> (Vec<FigPoint>, Vec<FigPoint>, String) {
    let job_counts = config.num_jobs_list.clone().unwrap_or(vec![10, 15, 20, 25, 30]);
    let fleets = config.num_servers_list.clone().unwrap_or(vec![6, 7, 8]);
    let n_on = config.n_on.unwrap_or(250);
    let params = OnlineParams { t_wait: 2.0, n_ja: 5 };
    let options = OnlineOptions { wait_all_idle: false, horizon_cap_factor: 100_000 };

    let mut cost_points = Vec::new();
    let mut hit_points = Vec::new();
    let mut instances = String::new();
    for &n in &fleets {
        for &j in &job_counts {
            let spec = large_example_spec(n, j, n_on);
            let point = (n as u64) << 32 | j as u64;
            let reps: Vec<(Instance, u64)> = (0..config.replications)
                .map(|rep| {
                    let inst_seed = mix_seed(config.seed, "fig56-inst", point, rep as u64);
                    let sim_seed = mix_seed(config.seed, "fig56-sim", point, rep as u64);
                    (gen_workload(&spec, inst_seed), sim_seed)
                })
                .collect();
            for (rep, (inst, _)) in reps.iter().enumerate() {
                instances.push_str(&format!(
                    "{{\"series\":\"N={} J={}\",\"replication\":{},\"instance\":{}}}\n",
                    n,
                    j,
                    rep,
                    serde_json::to_string(inst).unwrap()
                ));
            }
            for policy in [Policy::Hungarian, Policy::Random] {
                let mut costs = Vec::with_capacity(reps.len());
                let mut hits = Vec::with_capacity(reps.len());
                for (inst, sim_seed) in &reps {
                    let r = run_online(inst, &params, policy, *sim_seed, &options)
                        .expect("run within horizon");
                    costs.push(r.total_energy);
                    hits.push(r.jobs_within_deadline as f64);
                }
                let label = match policy {
                    Policy::Hungarian => format!("N={} online", n),
                    Policy::Random => format!("N={} randomized", n),
                };
                let (mc, sc) = mean_stderr(&costs);
                let (mh, sh) = mean_stderr(&hits);
                cost_points.push(FigPoint {
                    sweep: j as f64,
                    series: label.clone(),
                    mean: mc,
                    stderr: sc,
                });
                hit_points.push(FigPoint { sweep: j as f64, series: label, mean: mh, stderr: sh });
            }
        }
    }
    (cost_points, hit_points, instances)
}

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Table1,
    Table2,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl std::str::FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "table1" => Experiment::Table1,
            "table2" => Experiment::Table2,
            "fig2" => Experiment::Fig2,
            "fig3" => Experiment::Fig3,
            "fig4" => Experiment::Fig4,
            "fig5" => Experiment::Fig5,
            "fig6" => Experiment::Fig6,
            other => return Err(format!("unknown experiment `{}`", other)),
        })
    }
}

/// Runs one experiment and renders its files.
pub fn run_experiment(which: Experiment, config: &ExperimentConfig) -> ExperimentOutput {
    match which {
        Experiment::Table1 => run_table1(config).1,
        Experiment::Table2 => run_table2(config).1,
        Experiment::Fig2 | Experiment::Fig3 => {
            let (costs, hits, instances) = run_fig23(config);
            if which == Experiment::Fig2 {
                ExperimentOutput {
                    files: vec![
                        ("fig2.csv".into(), fig_csv(&costs)),
                        (
                            "fig2.svg".into(),
                            fig_svg(
                                "Average total power cost vs activation threshold",
                                "activation threshold",
                                "average total power cost (J)",
                                &costs,
                            ),
                        ),
                        ("fig2_instances.jsonl".into(), instances),
                    ],
                }
            } else {
                ExperimentOutput {
                    files: vec![
                        ("fig3.csv".into(), fig_csv(&hits)),
                        (
                            "fig3.svg".into(),
                            fig_svg(
                                "Jobs finished within deadline vs activation threshold",
                                "activation threshold",
                                "jobs within deadline",
                                &hits,
                            ),
                        ),
                        ("fig3_instances.jsonl".into(), instances),
                    ],
                }
            }
        }
        Experiment::Fig4 => {
            let (points, instances) = run_fig4(config);
            ExperimentOutput {
                files: vec![
                    ("fig4.csv".into(), fig_csv(&points)),
                    (
                        "fig4.svg".into(),
                        fig_svg(
                            "Average total power cost vs wait time",
                            "wait time (s)",
                            "average total power cost (J)",
                            &points,
                        ),
                    ),
                    ("fig4_instances.jsonl".into(), instances),
                ],
            }
        }
        Experiment::Fig5 | Experiment::Fig6 => {
            let (costs, hits, instances) = run_fig56(config);
            if which == Experiment::Fig5 {
                ExperimentOutput {
                    files: vec![
                        ("fig5.csv".into(), fig_csv(&costs)),
                        (
                            "fig5.svg".into(),
                            fig_svg(
                                "Online vs randomized: average total power cost",
                                "number of jobs",
                                "average total power cost (J)",
                                &costs,
                            ),
                        ),
                        ("fig5_instances.jsonl".into(), instances),
                    ],
                }
            } else {
                ExperimentOutput {
                    files: vec![
                        ("fig6.csv".into(), fig_csv(&hits)),
                        (
                            "fig6.svg".into(),
                            fig_svg(
                                "Online vs randomized: jobs within deadline",
                                "number of jobs",
                                "jobs within deadline",
                                &hits,
                            ),
                        ),
                        ("fig6_instances.jsonl".into(), instances),
                    ],
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_instance;

    #[test]
    fn degenerate_ranges_yield_constant_draws() {
        let spec = WorkloadSpec {
            num_servers: 3,
            num_jobs: 5,
            speed_range: (3, 3),
            demand_range: (3, 3),
            arrival_range: (3, 3),
            deadline_range: (3, 3),
            initial_state: InitialState::AllOn,
            energy: EnergyParams::defaults(2),
        };
        let inst = gen_workload(&spec, 17);
        assert!(inst.servers.iter().all(|s| s.speed == 3.0 && s.initially_on));
        assert!(inst.jobs.iter().all(|j| {
            j.demand == 3.0 && j.arrival_slot == 3 && j.deadline_slots == 3
        }));
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let spec = small_example_spec(3, 8, 250);
        let a = gen_workload(&spec, 99);
        let b = gen_workload(&spec, 99);
        assert_eq!(a, b);
        assert!(validate_instance(&a).is_empty());
        let c = gen_workload(&spec, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn demand_draws_are_uniform_within_three_sigma() {
        let spec = small_example_spec(1, 1, 1);
        let mut counts = [0u32; 5];
        let mut rng = SplitMix64::new(8);
        for _ in 0..10_000 {
            let inst = gen_workload(&spec, rng.next_u64());
            counts[(inst.jobs[0].demand as usize) - 1] += 1;
        }
        // Binomial(10000, 1/5): 3 sigma around 2000 is about +-120.
        let sigma = (10_000.0f64 * 0.2 * 0.8).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - 2000.0).abs() <= 3.0 * sigma,
                "value {} count {}",
                i + 1,
                c
            );
        }
    }

    #[test]
    fn benchmark_instances_are_valid_and_sized() {
        for k in 1..=5 {
            let inst = benchmark_instance(k);
            assert!(validate_instance(&inst).is_empty());
            assert_eq!(inst.servers.len(), 3);
            assert_eq!(inst.jobs.len(), 8);
        }
    }

    #[test]
    fn fig_csv_schema_is_stable() {
        let points = vec![FigPoint {
            sweep: 1.0,
            series: "N=2".into(),
            mean: 10.0,
            stderr: 0.5,
        }];
        let csv = fig_csv(&points);
        assert_eq!(csv, "sweep,series,mean,stderr\n1,N=2,10,0.5\n");
    }

    #[test]
    fn experiment_outputs_are_byte_identical_across_runs() {
        let config = ExperimentConfig {
            replications: 3,
            online_seeds: 3,
            num_servers_list: Some(vec![2]),
            n_ja_list: Some(vec![1, 2]),
            ..ExperimentConfig::default()
        };
        let a = run_experiment(Experiment::Fig2, &config);
        let b = run_experiment(Experiment::Fig2, &config);
        assert_eq!(a.files, b.files);
    }
}
