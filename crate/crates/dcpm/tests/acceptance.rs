//! Acceptance suite: one test per gate, each printing a PASS line with the
//! measured numbers once its assertions hold.
//!
//! The oracles here (permutation enumeration, exhaustive binary search,
//! vertex enumeration) are reimplemented locally so they share nothing with
//! the library's solvers.

use std::time::Instant;

use dcpm::assignment::{hungarian, CostMatrix};
use dcpm::harness::{
    benchmark_instance, benchmark_online_params, gen_workload, run_experiment, run_fig23,
    run_fig4, run_fig56, run_table1, run_table2, small_example_spec, Experiment,
    ExperimentConfig, FigPoint,
};
use dcpm::milp::{
    solve_bip, solve_lp, BipStatus, LpStatus, Relation, SolveLimits, ZeroOneProgram,
};
use dcpm::model::OnlineParams;
use dcpm::offline::{build_bip, decode_schedule, lp_relaxation, solve_offline, validate_schedule};
use dcpm::online::{run_online, OnlineOptions, Policy};
use dcpm::rng::{mix_seed, SplitMix64};

const TABLE1_OPTIMAL: [f64; 5] = [2200.0, 1800.0, 1600.0, 1800.0, 1600.0];
const TABLE1_RELAXED: [f64; 5] = [1300.0, 900.0, 850.0, 1300.0, 1100.0];

fn online_options() -> OnlineOptions {
    OnlineOptions { wait_all_idle: false, horizon_cap_factor: 100_000 }
}

/// Exact optimum of the five fixed instances, integer joules, 60 s each.
#[test]
fn acceptance_exact_optimum_reproduction() {
    for (k, expected) in TABLE1_OPTIMAL.iter().enumerate() {
        let instance = benchmark_instance(k + 1);
        let started = Instant::now();
        let sol = solve_offline(
            &instance,
            SolveLimits { max_nodes: None, max_seconds: Some(60.0) },
        )
        .expect("solve succeeds");
        let elapsed = started.elapsed().as_secs_f64();
        assert_eq!(sol.bip.status, BipStatus::Optimal, "example {} must prove optimality", k + 1);
        assert_eq!(sol.bip.value, *expected, "example {} optimal value", k + 1);
        assert!(elapsed <= 60.0, "example {} took {:.1}s", k + 1, elapsed);
        println!(
            "[PASS] exact optimum example {}: {} J in {:.1}s ({} nodes)",
            k + 1,
            sol.bip.value,
            elapsed,
            sol.bip.nodes_explored
        );
    }
}

/// Relaxation values of the five fixed instances, 1e-4 relative, 5 s each.
#[test]
fn acceptance_lp_relaxation_reproduction() {
    for (k, expected) in TABLE1_RELAXED.iter().enumerate() {
        let instance = benchmark_instance(k + 1);
        let started = Instant::now();
        let lp = lp_relaxation(&instance).expect("relaxation solves");
        let elapsed = started.elapsed().as_secs_f64();
        assert_eq!(lp.status, LpStatus::Optimal);
        let rel = (lp.value - expected).abs() / expected;
        assert!(rel <= 1e-4, "example {}: {} vs {} (rel {})", k + 1, lp.value, expected, rel);
        assert!(elapsed <= 5.0, "example {} took {:.2}s", k + 1, elapsed);
        println!("[PASS] relaxation example {}: {} J in {:.2}s", k + 1, lp.value, elapsed);
    }
}

/// relaxed <= exact <= every online cost <= randomized median, on the fixed
/// instances and on generated ones.
#[test]
fn acceptance_ordering_property() {
    let params = benchmark_online_params();
    let sweep = 25u32;

    let mut check = |label: &str, instance: &dcpm::model::Instance, params: &OnlineParams| {
        let exact = solve_offline(
            instance,
            SolveLimits { max_nodes: None, max_seconds: Some(60.0) },
        )
        .expect("exact solve");
        match exact.bip.status {
            BipStatus::Optimal => {}
            BipStatus::Infeasible => {
                // Tight windows can make an instance unschedulable offline;
                // there is no exact value to order against.
                println!("[skip] {}: offline infeasible", label);
                return;
            }
            BipStatus::Timeout => panic!("{}: exact solve timed out", label),
        }
        let relaxed = lp_relaxation(instance).expect("relaxation");
        assert!(relaxed.value <= exact.bip.value + 1e-6, "{}: relaxed > exact", label);

        let online: Vec<f64> = (0..sweep)
            .map(|r| {
                run_online(
                    instance,
                    params,
                    Policy::Hungarian,
                    mix_seed(7, "ordering-online", 0, r as u64),
                    &online_options(),
                )
                .expect("run")
                .total_energy
            })
            .collect();
        let mut random: Vec<f64> = (0..sweep)
            .map(|r| {
                run_online(
                    instance,
                    params,
                    Policy::Random,
                    mix_seed(7, "ordering-random", 0, r as u64),
                    &online_options(),
                )
                .expect("run")
                .total_energy
            })
            .collect();
        random.sort_by(f64::total_cmp);
        let random_median = random[random.len() / 2];
        for cost in &online {
            assert!(
                exact.bip.value <= cost + 1e-9,
                "{}: exact {} > online {}",
                label,
                exact.bip.value,
                cost
            );
            assert!(
                *cost <= random_median + 1e-9,
                "{}: online {} > randomized median {}",
                label,
                cost,
                random_median
            );
        }
        println!(
            "[PASS] ordering {}: {} <= {} <= [{}, {}] <= {}",
            label,
            relaxed.value,
            exact.bip.value,
            online.iter().copied().fold(f64::INFINITY, f64::min),
            online.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            random_median
        );
    };

    for k in 1..=5 {
        let instance = benchmark_instance(k);
        check(&format!("benchmark {}", k), &instance, &params);
    }
    // Small generated instances; gentle setup times keep the exact solves
    // quick and every regime reachable. Three servers keep most draws
    // schedulable; unschedulable ones are reported and skipped.
    let gen_params = OnlineParams { t_wait: 2.0, n_ja: 2 };
    for rep in 0..4u64 {
        let spec = small_example_spec(3, 5, 2);
        let instance = gen_workload(&spec, mix_seed(7, "ordering-inst", 0, rep));
        check(&format!("generated {}", rep), &instance, &gen_params);
    }
}

/// Sweep on the fourth instance: wait time 2 floors at 3600 for every
/// activation threshold; wait time 1 shows the staircase of setup waves.
#[test]
fn acceptance_table2_online() {
    let config = ExperimentConfig::default();
    let (cells, _) = run_table2(&config);
    for n_ja in 1..=8u32 {
        let cell = cells
            .iter()
            .find(|c| c.t_wait == 2.0 && c.n_ja == n_ja)
            .expect("cell exists");
        let min = cell.online.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, 3600.0, "t_wait=2 n_ja={} sweep minimum", n_ja);
    }
    println!("[PASS] table2: wait 2 s floors at 3600 J for all 8 thresholds");

    let env = |t_wait: f64, n_ja: u32| -> (f64, f64) {
        let cell = cells
            .iter()
            .find(|c| c.t_wait == t_wait && c.n_ja == n_ja)
            .expect("cell exists");
        (
            cell.online.iter().copied().fold(f64::INFINITY, f64::min),
            cell.online.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (lo1, hi1) = env(1.0, 1);
    let (lo4, hi4) = env(1.0, 4);
    // Three setup waves at threshold 1 versus one at threshold 4.
    assert!(lo1 >= 100_000.0, "threshold 1 must sit at the three-wave scale, got {}", lo1);
    assert!(hi4 <= 60_000.0, "threshold 4 must sit at the one-wave scale, got {}", hi4);
    assert!(hi4 < lo1, "threshold-4 envelope must sit below threshold-1");
    println!(
        "[PASS] table2: wait 1 s envelopes [{}, {}] (n_ja=1) vs [{}, {}] (n_ja=4)",
        lo1, hi1, lo4, hi4
    );
}

/// Hungarian equals brute force on 1000 random matrices up to 7x7, 10 s.
#[test]
fn acceptance_hungarian_oracle() {
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

    let started = Instant::now();
    let mut rng = SplitMix64::new(2026);
    for case in 0..1000 {
        let n = (rng.below(7) + 1) as usize;
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| rng.below(1000) as f64 / 10.0).collect()).collect();
        let matrix = CostMatrix::from_rows(rows).unwrap();
        let got = hungarian(&matrix).unwrap().total_cost;
        let best = permutations(n)
            .into_iter()
            .map(|p| p.iter().enumerate().map(|(r, &c)| matrix.at(r, c)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(got, best, "case {} (n={})", case, n);
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed <= 10.0, "took {:.1}s", elapsed);
    println!("[PASS] hungarian oracle: 1000 matrices exact in {:.1}s", elapsed);
}

/// Branch-and-bound equals exhaustive enumeration on 200 random programs
/// with up to 18 variables, 60 s.
#[test]
fn acceptance_bip_oracle() {
    fn exhaustive(program: &ZeroOneProgram) -> Option<f64> {
        let n = program.num_vars;
        let mut best: Option<f64> = None;
        let mut point = vec![0.0; n];
        for mask in 0u32..(1u32 << n) {
            for (v, x) in point.iter_mut().enumerate() {
                *x = if mask & (1 << v) != 0 { 1.0 } else { 0.0 };
            }
            let ok = program.constraints.iter().all(|c| {
                let lhs: f64 = c.coeffs.iter().zip(&point).map(|(a, x)| a * x).sum();
                match c.relation {
                    Relation::Le => lhs <= c.rhs + 1e-9,
                    Relation::Ge => lhs >= c.rhs - 1e-9,
                    Relation::Eq => (lhs - c.rhs).abs() <= 1e-9,
                }
            });
            if ok {
                let v: f64 =
                    program.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best
    }

    let started = Instant::now();
    let mut rng = SplitMix64::new(1618);
    for case in 0..200 {
        // Sizes lean small with a tail up to 18 variables.
        let n = (3 + rng.below(16)) as usize;
        let rows = (1 + rng.below(5)) as usize;
        let mut p = ZeroOneProgram::new(n);
        for c in p.objective.iter_mut() {
            *c = rng.below(11) as f64 - 5.0;
        }
        for _ in 0..rows {
            let coeffs: Vec<f64> =
                (0..n).map(|_| rng.below(11) as f64 - 5.0).collect();
            let relation = match rng.below(10) {
                0 => Relation::Eq,
                1..=5 => Relation::Le,
                _ => Relation::Ge,
            };
            let rhs = rng.below(9) as f64 - 2.0;
            p.add_constraint(coeffs, relation, rhs).unwrap();
        }
        let oracle = exhaustive(&p);
        let sol = solve_bip(&p, SolveLimits::default()).unwrap();
        match oracle {
            Some(v) => {
                assert_eq!(sol.status, BipStatus::Optimal, "case {}", case);
                assert!(
                    (sol.value - v).abs() <= 1e-6,
                    "case {}: bip {} vs exhaustive {}",
                    case,
                    sol.value,
                    v
                );
            }
            None => assert_eq!(sol.status, BipStatus::Infeasible, "case {}", case),
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed <= 60.0, "took {:.1}s", elapsed);
    println!("[PASS] branch-and-bound oracle: 200 programs exact in {:.1}s", elapsed);
}

/// Simplex equals vertex enumeration on 200 random small relaxations.
#[test]
fn acceptance_simplex_oracle() {
    fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for col in 0..n {
            let piv =
                (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
            if a[piv][col].abs() < 1e-10 {
                return None;
            }
            a.swap(col, piv);
            b.swap(col, piv);
            for r in 0..n {
                if r != col && a[r][col] != 0.0 {
                    let f = a[r][col] / a[col][col];
                    for c2 in col..n {
                        a[r][c2] -= f * a[col][c2];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    fn vertex_oracle(p: &ZeroOneProgram) -> Option<f64> {
        let n = p.num_vars;
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &p.constraints {
            planes.push((c.coeffs.clone(), c.rhs));
        }
        for i in 0..n {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            planes.push((row.clone(), 0.0));
            planes.push((row, 1.0));
        }
        let m = planes.len();
        let mut best: Option<f64> = None;
        let mut idx = vec![0usize; n];
        fn rec(
            start: usize,
            depth: usize,
            m: usize,
            idx: &mut Vec<usize>,
            f: &mut impl FnMut(&[usize]),
        ) {
            if depth == idx.len() {
                f(idx);
                return;
            }
            for i in start..m {
                idx[depth] = i;
                rec(i + 1, depth + 1, m, idx, f);
            }
        }
        let planes_ref = &planes;
        let p_ref = &p;
        rec(0, 0, m, &mut idx, &mut |chosen: &[usize]| {
            let a: Vec<Vec<f64>> = chosen.iter().map(|&i| planes_ref[i].0.clone()).collect();
            let b: Vec<f64> = chosen.iter().map(|&i| planes_ref[i].1).collect();
            if let Some(x) = solve_square(a, b) {
                if x.iter().any(|v| !(-1e-7..=1.0 + 1e-7).contains(v)) {
                    return;
                }
                let feasible = p_ref.constraints.iter().all(|c| {
                    let lhs: f64 = c.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
                    match c.relation {
                        Relation::Le => lhs <= c.rhs + 1e-7,
                        Relation::Ge => lhs >= c.rhs - 1e-7,
                        Relation::Eq => (lhs - c.rhs).abs() <= 1e-7,
                    }
                });
                if feasible {
                    let v: f64 = p_ref.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
        });
        best
    }

    let started = Instant::now();
    let mut rng = SplitMix64::new(31415);
    let mut feasible = 0;
    for case in 0..200 {
        let n = 4usize;
        let mut p = ZeroOneProgram::new(n);
        for c in p.objective.iter_mut() {
            *c = rng.below(11) as f64 - 5.0;
        }
        for _ in 0..4 {
            let coeffs: Vec<f64> = (0..n).map(|_| rng.below(11) as f64 - 5.0).collect();
            let relation = if rng.below(2) == 0 { Relation::Le } else { Relation::Ge };
            // Right sides lean permissive so enough draws stay feasible.
            let rhs = match relation {
                Relation::Ge => rng.below(5) as f64 - 2.0,
                _ => rng.below(9) as f64 - 2.0,
            };
            p.add_constraint(coeffs, relation, rhs).unwrap();
        }
        let oracle = vertex_oracle(&p);
        let lp = solve_lp(&p).unwrap();
        match oracle {
            Some(v) => {
                assert_eq!(lp.status, LpStatus::Optimal, "case {}", case);
                assert!(
                    (lp.value - v).abs() <= 1e-7 * (1.0 + v.abs()),
                    "case {}: lp {} vs vertices {}",
                    case,
                    lp.value,
                    v
                );
                feasible += 1;
            }
            None => assert_eq!(lp.status, LpStatus::Infeasible, "case {}", case),
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(feasible >= 100, "suite too degenerate: {}", feasible);
    println!(
        "[PASS] simplex oracle: 200 relaxations within 1e-7 in {:.1}s ({} feasible)",
        elapsed, feasible
    );
}

/// Every decoded optimal schedule passes the independent validator.
#[test]
fn acceptance_schedule_feasibility() {
    let mut checked = 0;
    for k in 1..=5 {
        let instance = benchmark_instance(k);
        let sol = solve_offline(
            &instance,
            SolveLimits { max_nodes: None, max_seconds: Some(60.0) },
        )
        .expect("solve");
        if sol.bip.status != BipStatus::Optimal {
            continue;
        }
        let schedule = sol.schedule.expect("schedule decodes");
        let violations = validate_schedule(&schedule, &instance);
        assert!(violations.is_empty(), "benchmark {}: {:?}", k, violations);
        checked += 1;
    }
    // Generated instances with reachable setups exercise the setup families.
    let mut rng = SplitMix64::new(5);
    for rep in 0..4u64 {
        let spec = small_example_spec(2, 4, 2);
        let mut instance = gen_workload(&spec, mix_seed(5, "feas", 0, rep));
        if rep % 2 == 0 {
            instance.servers[0].initially_on = false;
        }
        let (program, idx) = build_bip(&instance).expect("compiles");
        let sol = solve_bip(&program, SolveLimits::default()).expect("solves");
        if sol.status != BipStatus::Optimal {
            continue;
        }
        let schedule = decode_schedule(&sol.point, &idx, &instance).expect("decodes");
        let violations = validate_schedule(&schedule, &instance);
        assert!(violations.is_empty(), "generated {}: {:?}", rep, violations);
        checked += 1;
        let _ = rng.next_u64();
    }
    assert!(checked >= 6);
    println!("[PASS] schedule feasibility: {} decoded optima validate clean", checked);
}

fn series_of<'a>(points: &'a [FigPoint], series: &str) -> Vec<&'a FigPoint> {
    points.iter().filter(|p| p.series == series).collect()
}

/// Figure trends at 100 replications: deadline hits fall with the
/// activation threshold, aggressive wait times at least double the cost,
/// and the online policy beats randomized routing with separated bands.
#[test]
fn acceptance_figure_trends() {
    let started = Instant::now();
    let config = ExperimentConfig::default();

    let (_, hit_points, _) = run_fig23(&config);
    for n in [1u32, 2, 3] {
        let series = series_of(&hit_points, &format!("N={}", n));
        for pair in series.windows(2) {
            assert!(
                pair[1].mean <= pair[0].mean + 1e-9,
                "hits must be non-increasing: N={} at n_ja={} -> {}",
                n,
                pair[0].sweep,
                pair[1].sweep
            );
        }
    }
    println!("[PASS] deadline-hit means are non-increasing in the threshold for 1-3 servers");

    let (fig4_points, _) = run_fig4(&config);
    let sweeps: Vec<f64> = {
        let mut s: Vec<f64> = fig4_points.iter().map(|p| p.sweep).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    };
    let aggregate = |t: f64| -> f64 {
        let vals: Vec<f64> =
            fig4_points.iter().filter(|p| p.sweep == t).map(|p| p.mean).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let base = aggregate(1.0);
    for &t in sweeps.iter().filter(|&&t| t >= 2.0) {
        let v = aggregate(t);
        assert!(
            v * 2.0 <= base,
            "wait {} should at least halve the wait-1 cost: {} vs {}",
            t,
            v,
            base
        );
    }
    println!(
        "[PASS] wait-time cliff: mean cost {} at wait 1 vs {} at wait 2 ({}x)",
        base,
        aggregate(2.0),
        base / aggregate(2.0)
    );

    let (cost56, hits56, _) = run_fig56(&config);
    for n in [6u32, 7, 8] {
        for j in [10u32, 15, 20, 25, 30] {
            let pick = |points: &[FigPoint], label: &str| -> (f64, f64) {
                let p = points
                    .iter()
                    .find(|p| p.sweep == j as f64 && p.series == format!("N={} {}", n, label))
                    .expect("point exists");
                (p.mean, p.stderr)
            };
            let (on_cost, on_cost_se) = pick(&cost56, "online");
            let (rd_cost, rd_cost_se) = pick(&cost56, "randomized");
            assert!(
                on_cost + on_cost_se < rd_cost - rd_cost_se,
                "cost bands overlap at N={} J={}: {}+-{} vs {}+-{}",
                n,
                j,
                on_cost,
                on_cost_se,
                rd_cost,
                rd_cost_se
            );
            let (on_hits, on_hits_se) = pick(&hits56, "online");
            let (rd_hits, rd_hits_se) = pick(&hits56, "randomized");
            assert!(
                on_hits - on_hits_se > rd_hits + rd_hits_se,
                "hit bands overlap at N={} J={}: {}+-{} vs {}+-{}",
                n,
                j,
                on_hits,
                on_hits_se,
                rd_hits,
                rd_hits_se
            );
        }
    }
    println!("[PASS] online beats randomized with separated bands at every job count");

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed <= 600.0, "figure suite took {:.0}s", elapsed);
    println!("[PASS] figure suite finished in {:.0}s", elapsed);
}

/// Byte-identical experiment outputs from the same config and seed.
#[test]
fn acceptance_determinism() {
    let config = ExperimentConfig {
        replications: 5,
        online_seeds: 5,
        num_servers_list: Some(vec![2]),
        n_ja_list: Some(vec![1, 3]),
        ..ExperimentConfig::default()
    };
    for which in [Experiment::Fig2, Experiment::Fig4, Experiment::Table2] {
        let a = run_experiment(which, &config);
        let b = run_experiment(which, &config);
        assert_eq!(a.files, b.files, "{:?} output differs between runs", which);
    }
    // Table 1 is the heavyweight; compare only its online/random sweeps by
    // running the sweeps through the public row API.
    let (rows_a, out_a) = run_table1(&ExperimentConfig {
        online_seeds: 5,
        max_seconds: Some(60.0),
        ..ExperimentConfig::default()
    });
    let (rows_b, out_b) = run_table1(&ExperimentConfig {
        online_seeds: 5,
        max_seconds: Some(60.0),
        ..ExperimentConfig::default()
    });
    assert_eq!(out_a.files, out_b.files);
    for (a, b) in rows_a.iter().zip(&rows_b) {
        assert_eq!(a.online, b.online);
        assert_eq!(a.random, b.random);
        assert_eq!(a.optimal, b.optimal);
    }
    println!("[PASS] experiments are byte-identical under a fixed config and seed");
}

/// The emitted table rows respect the analytical ordering columnwise.
#[test]
fn acceptance_table1_row_ordering() {
    let (rows, output) = run_table1(&ExperimentConfig {
        online_seeds: 25,
        max_seconds: Some(60.0),
        ..ExperimentConfig::default()
    });
    for row in &rows {
        let optimal = row.optimal.expect("benchmarks solve to optimality");
        assert_eq!(optimal, TABLE1_OPTIMAL[row.example - 1]);
        let online_min = row.online.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(row.relaxed <= optimal + 1e-6);
        assert!(optimal <= online_min + 1e-9);
    }
    let csv = output.file("table1.csv").expect("csv present");
    assert!(csv.starts_with("example,online_med,online_min,online_max,random_med,optimal,relaxed"));
    println!("[PASS] table1 rows keep relaxed <= optimal <= online minimum");
}
