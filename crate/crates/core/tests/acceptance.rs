//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use mec_offload::analysis::{expected_lmax, max_offloaders, mean_total_time, MeanTimeStage, OffloaderCap, PopulationParams};
use mec_offload::costs::{decompose, total_energy, transmission_times, TimeMode};
use mec_offload::model::{
    EnergyParams, OffloadDecision, OutputSizeModel, RadioParams, ScenarioInstance, TaskSpec, UserState,
    DEFAULT_FADE_FLOOR,
};
use mec_offload::montecarlo::{run_trials, sample_trial, sweep, SamplingSpec, SweepAxis, SweepOptions, FIG2_SLOT};
use mec_offload::solver::{exhaustive_oracle, solve_offloading, SolverConfig, DEFAULT_TOLERANCE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Verdict = Result<String, String>;

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// 1. Solver and exhaustive search agree on 1000 instances with K = 8.
fn oracle_equivalence() -> Verdict {
    let spec = SamplingSpec {
        users: 8,
        ..SamplingSpec::fig2(4.0)
    };
    let cfg = SolverConfig::default();
    let trials = 1000;
    let results: Vec<(bool, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_trial(&spec, 2024, t);
            let sol = solve_offloading(&s, &cfg);
            let oracle = exhaustive_oracle(&s, cfg.tolerance, TimeMode::Linearized).unwrap();
            match (sol.energy(), oracle.energy()) {
                (Some(a), Some(b)) => (true, rel_diff(a, b)),
                (None, None) => (true, 0.0),
                _ => (false, f64::INFINITY),
            }
        })
        .collect();
    let flag_mismatch = results.iter().filter(|r| !r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let msg = format!("{trials} instances, feasibility mismatches {flag_mismatch}, worst rel diff {worst:.2e} (tol 1e-9)");
    if flag_mismatch == 0 && worst <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// 2. Linear decompositions of energy and time match the direct formulas.
fn decomposition_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut worst_e, mut worst_t) = (0.0f64, 0.0f64);
    let pairs = 1000;
    for i in 0..pairs {
        let users = rng.random_range(1..=12);
        let spec = SamplingSpec {
            users,
            ..SamplingSpec::fig2(rng.random_range(0.5..12.0))
        };
        let s = sample_trial(&spec, 77, i);
        let mut a = OffloadDecision::new((0..users).map(|_| rng.random::<bool>()).collect());
        if a.cardinality() == 0 {
            a = OffloadDecision::all(users);
        }
        let d = decompose(&s, a.cardinality()).unwrap();
        worst_e = worst_e.max(rel_diff(d.energy(&a), total_energy(&s, &a).unwrap()));
        let direct = transmission_times(&s, &a, TimeMode::Linearized).unwrap().total;
        worst_t = worst_t.max(rel_diff(d.time(&a), direct));
    }
    let msg = format!("{pairs} pairs, worst rel diff energy {worst_e:.2e}, time {worst_t:.2e} (tol 1e-12)");
    if worst_e <= 1e-12 && worst_t <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// 3. The time budget of the server-data sweep, `10 K / log2(1 + gamma_user)`.
fn quoted_slot_constant() -> Verdict {
    let population = PopulationParams {
        users: 10,
        mean_local: 2.0,
        mean_server: 10.0,
        output_model: OutputSizeModel::new(0.0, 0.1),
        radio: RadioParams::normalized(3.0, 6.0),
    };
    let tau = population.baseline_time();
    let msg = format!("computed {tau:.5}, quoted 35.63, tol 0.005, |diff| {:.4}", (tau - 35.63).abs());
    if (tau - 35.63).abs() <= 0.005 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// 4. Offloader-count mode is 2 for small server data, and the tail above 3
///    grows from mean server data 2 to 8, in at least 95% of master seeds.
fn fig2_mode_property() -> Verdict {
    let cfg = SolverConfig::default();
    let seeds = 20u64;
    let trials = 2000;
    let passes = (0..seeds)
        .filter(|&seed| {
            let agg = |b: f64| run_trials(&SamplingSpec::fig2(b), trials, 1000 + seed, &cfg);
            let (b1, b2, b8) = (agg(1.0), agg(2.0), agg(8.0));
            b1.mode() == Some(2) && b2.mode() == Some(2) && b8.tail_above(3) > b2.tail_above(3)
        })
        .count();
    let msg = format!("{passes}/{seeds} master seeds pass at {trials} trials/point (need >= 95%)");
    if passes as f64 >= 0.95 * seeds as f64 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// 5. Mean energy and mean offloader count are non-decreasing in the mean
///    server-data size, up to two adjacent-pair violations each.
fn fig2_trends() -> Verdict {
    let grid: Vec<f64> = (1..=10).map(f64::from).collect();
    let rows = sweep(&SamplingSpec::fig2(4.0), SweepAxis::MeanServer, &grid, 2000, 31, &SweepOptions::default());
    let drops = |f: &dyn Fn(usize) -> f64| (1..rows.len()).filter(|&i| f(i) < f(i - 1)).count();
    let energy = drops(&|i| rows[i].aggregate.mean_total_energy.unwrap());
    let count = drops(&|i| rows[i].aggregate.mean_num_offloaders.unwrap());
    let msg = format!("decreasing adjacent pairs: energy {energy}, offloaders {count} (allowed 2 each)");
    if energy <= 2 && count <= 2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// 6. Per instance, energy is non-increasing and feasibility monotone in the
///    budget; the CRN budget sweep's infeasible count is non-increasing.
fn slot_monotonicity() -> Verdict {
    let spec = SamplingSpec::fig2(4.0);
    let cfg = SolverConfig::default();
    let grid: Vec<f64> = (0..20).map(|i| 8.0 + 2.5 * i as f64).collect();
    let violations: usize = (0..200)
        .into_par_iter()
        .map(|t| {
            let s = sample_trial(&spec, 606, t);
            let energies: Vec<Option<f64>> = grid
                .iter()
                .map(|&tau| solve_offloading(&s.with_slot(tau), &cfg).energy())
                .collect();
            energies
                .windows(2)
                .filter(|w| match (w[0], w[1]) {
                    (Some(a), Some(b)) => b > a,
                    (Some(_), None) => true,
                    _ => false,
                })
                .count()
        })
        .sum();

    let opts = SweepOptions {
        common_random_numbers: true,
        ..SweepOptions::default()
    };
    let rows = sweep(&spec, SweepAxis::Slot, &grid, 1000, 606, &opts);
    let counts: Vec<usize> = rows.iter().map(|r| r.aggregate.infeasible_count).collect();
    let rising = counts.windows(2).filter(|w| w[1] > w[0]).count();
    let msg = format!(
        "200 instances x 20 budgets: {violations} violations; CRN sweep infeasible counts {counts:?}"
    );
    if violations == 0 && rising == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// 7. Mean-time analysis versus simulation, expected maximum, and the cap.
fn analysis_agreement() -> Verdict {
    let spec = SamplingSpec::fig2(4.0);
    let population = spec.population();
    let samples = 100_000;
    let mut worst = 0.0f64;
    for n in 0..=5 {
        let a = OffloadDecision::new((0..spec.users).map(|k| k < n).collect());
        let total: f64 = (0..samples)
            .into_par_iter()
            .map(|t| {
                let s = sample_trial(&spec, 700 + n as u64, t);
                transmission_times(&s, &a, TimeMode::Linearized).unwrap().total
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let empirical = total / samples as f64;
        let predicted = mean_total_time(&population, n, MeanTimeStage::ExactRate).unwrap();
        worst = worst.max(rel_diff(empirical, predicted));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 1_000_000;
    let sum: f64 = (0..draws)
        .map(|_| (0..10).map(|_| -2.0 * (1.0 - rng.random::<f64>()).ln()).fold(0.0, f64::max))
        .sum();
    let empirical_lmax = sum / draws as f64;
    let lmax = expected_lmax(10, 2.0);
    let cap = max_offloaders(&population, FIG2_SLOT);

    let msg = format!(
        "mean time worst rel diff {worst:.4} (tol 0.01); E[Lmax] {lmax:.5} vs empirical {empirical_lmax:.5} (tol 0.02); cap {cap:?}"
    );
    if worst <= 0.01
        && (lmax - 5.85794).abs() <= 0.02
        && (empirical_lmax - lmax).abs() <= 0.02
        && cap == OffloaderCap::Bounded(7)
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// 8. Single-user worked instance.
fn worked_instance() -> Verdict {
    let s = ScenarioInstance {
        radio: RadioParams::normalized(3.0, 6.0),
        energy: EnergyParams {
            server_energy_per_cycle: 1.0,
        },
        tasks: vec![TaskSpec::new(2.0, 4.0, 1.0, 0.6)],
        users: vec![UserState::new(1.0, 5.0)],
        slot: 10.0,
        fade_floor: DEFAULT_FADE_FLOOR,
    };
    let cfg = SolverConfig::default();
    let sol = solve_offloading(&s, &cfg);
    let tight = solve_offloading(&s.with_slot(1.0), &cfg);
    let oracle = exhaustive_oracle(&s, DEFAULT_TOLERANCE, TimeMode::Linearized).unwrap();
    let Some(o) = sol.optimum else {
        return Err("reported infeasible at tau = 10".into());
    };
    let msg = format!(
        "decision {}, energy {:.5}, time {:.5}; tau = 1.0 feasible: {}",
        o.decision,
        o.total_energy,
        o.total_time,
        tight.is_feasible()
    );
    if o.decision.flags() == [true]
        && (o.total_energy - 5.28234).abs() <= 1e-4
        && (o.total_time - 1.21372).abs() <= 1e-4
        && !tight.is_feasible()
        && oracle.optimum.map(|x| x.decision) == Some(o.decision)
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// 9. Two runs of the sweep command with the same seed give identical bytes.
fn sweep_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("fig2.cfg");
    fs::write(&cfg, "axis = mean_B\ngrid = 1,2,4,8\ntrials = 500\nseed = 123\n").map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_mec-offload"))
            .args(["sweep", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("sweep exited with {status}"));
        }
        outputs.push(fs::read(&out).map_err(|e| e.to_string())?);
    }
    let msg = format!("{} bytes per run", outputs[0].len());
    if outputs[0] == outputs[1] && !outputs[0].is_empty() {
        Ok(msg)
    } else {
        Err(format!("outputs differ; {msg}"))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 decomposition identities", decomposition_identities),
        ("3 quoted time budget constant", quoted_slot_constant),
        ("4 offloader-count mode and tail", fig2_mode_property),
        ("5 server-data trends", fig2_trends),
        ("6 budget monotonicity", slot_monotonicity),
        ("7 analysis agreement", analysis_agreement),
        ("8 worked instance", worked_instance),
        ("9 sweep determinism", sweep_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("[PASS] criterion {name}: {msg} ({secs:.1}s)"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {name}: {msg} ({secs:.1}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
