//! Random scenario sampling and seeded Monte Carlo sweeps.
//!
//! Per user, draws are taken in the order `L, B, C, g, beta`:
//!
//! - `L ~ Exp(mean_local)`, `B ~ Exp(mean_server)`, `C ~ Exp(mean_cycles)`
//! - `g ~ Unif[0, gbar]`
//! - `beta = epsilon + Exp(1 - epsilon)`, a shifted exponential with unit mean
//! - `Y = c0 + c1 (L + B)`
//!
//! Exponentials use the inverse CDF `-mean * ln(1 - U)` with `U` uniform on
//! `[0, 1)`. Every trial owns a ChaCha8 stream seeded by [`derive_seed`] from
//! the master seed and its indices, so results do not depend on thread count
//! or scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::PopulationParams;
use crate::model::{
    EnergyParams, OutputSizeModel, RadioParams, ScenarioInstance, TaskSpec, UserState,
    DEFAULT_FADE_FLOOR,
};
use crate::solver::{solve_offloading, SolverConfig};

/// Time budget of the server-data sweep: the mean no-offloading time at a
/// mean server-data size of 10, as quoted to two decimals.
pub const FIG2_SLOT: f64 = 35.63;

pub const DEFAULT_TRIALS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSpec {
    pub users: usize,
    pub mean_local: f64,
    pub mean_server: f64,
    pub mean_cycles: f64,
    /// Upper end of the uniform law of device energy per cycle.
    pub gbar: f64,
    pub g0: f64,
    pub epsilon: f64,
    pub output_model: OutputSizeModel,
    pub radio: RadioParams,
    pub tau: f64,
}

impl SamplingSpec {
    /// Ten users, SNRs 3 and 6, unit mean cycles, mean local data 2, and
    /// outcome size a tenth of the input.
    pub fn fig2(mean_server: f64) -> Self {
        Self {
            users: 10,
            mean_local: 2.0,
            mean_server,
            mean_cycles: 1.0,
            gbar: 10.0,
            g0: 1.0,
            epsilon: DEFAULT_FADE_FLOOR,
            output_model: OutputSizeModel::new(0.0, 0.1),
            radio: RadioParams::normalized(3.0, 6.0),
            tau: FIG2_SLOT,
        }
    }

    pub fn population(&self) -> PopulationParams {
        PopulationParams {
            users: self.users,
            mean_local: self.mean_local,
            mean_server: self.mean_server,
            output_model: self.output_model,
            radio: self.radio,
        }
    }

    /// Describes every violated constraint.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.users == 0 {
            out.push("K must be at least 1".to_string());
        }
        let positive = [
            ("mean_L", self.mean_local),
            ("mean_B", self.mean_server),
            ("mean_C", self.mean_cycles),
            ("gbar", self.gbar),
            ("c1", self.output_model.slope),
            ("gamma_bs", self.radio.snr_bs),
            ("gamma_user", self.radio.snr_user),
            ("W", self.radio.bandwidth),
            ("N0", self.radio.noise),
            ("tau", self.tau),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                out.push(format!("{name} must be positive, got {value}"));
            }
        }
        for (name, value) in [("g0", self.g0), ("c0", self.output_model.intercept)] {
            if !(value.is_finite() && value >= 0.0) {
                out.push(format!("{name} must be non-negative, got {value}"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            out.push(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        out
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream addressed by `path` under `master`.
///
/// Each index is folded in through a SplitMix64 round, so distinct paths give
/// unrelated seeds and the result depends only on `(master, path)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |h, &i| splitmix64(h ^ splitmix64(i)))
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    -mean * (1.0 - rng.random::<f64>()).ln()
}

pub fn sample_scenario<R: Rng + ?Sized>(spec: &SamplingSpec, rng: &mut R) -> ScenarioInstance {
    let mut tasks = Vec::with_capacity(spec.users);
    let mut users = Vec::with_capacity(spec.users);
    for _ in 0..spec.users {
        let local = exponential(rng, spec.mean_local);
        let server = exponential(rng, spec.mean_server);
        let cycles = exponential(rng, spec.mean_cycles);
        let g = spec.gbar * rng.random::<f64>();
        let gain = spec.epsilon + exponential(rng, 1.0 - spec.epsilon);
        tasks.push(TaskSpec::new(
            local,
            server,
            cycles,
            spec.output_model.output_size(local, server),
        ));
        users.push(UserState::new(gain, g));
    }
    ScenarioInstance {
        radio: spec.radio,
        energy: EnergyParams {
            server_energy_per_cycle: spec.g0,
        },
        tasks,
        users,
        slot: spec.tau,
        fade_floor: spec.epsilon,
    }
}

/// Scenario of trial `index` under master `seed`.
pub fn sample_trial(spec: &SamplingSpec, seed: u64, index: usize) -> ScenarioInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[index as u64]));
    sample_scenario(spec, &mut rng)
}

/// Statistics over a batch of trials. Means and the pmf are conditioned on
/// feasibility; infeasible trials only enter `infeasible_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialAggregate {
    pub trials: usize,
    pub infeasible_count: usize,
    pub mean_total_energy: Option<f64>,
    pub mean_num_offloaders: Option<f64>,
    /// Number of feasible trials with exactly `n` offloaders, `n = 0..=K`.
    pub offloader_counts: Vec<usize>,
    pub offloader_pmf: Vec<f64>,
}

impl TrialAggregate {
    fn from_outcomes(users: usize, outcomes: &[Option<(f64, usize)>]) -> Self {
        let mut counts = vec![0usize; users + 1];
        let mut energy = 0.0;
        let mut offloaders = 0usize;
        for &(e, n) in outcomes.iter().flatten() {
            counts[n] += 1;
            energy += e;
            offloaders += n;
        }
        let feasible = outcomes.len() - outcomes.iter().filter(|o| o.is_none()).count();
        let (mean_total_energy, mean_num_offloaders, offloader_pmf) = if feasible == 0 {
            (None, None, vec![0.0; users + 1])
        } else {
            let f = feasible as f64;
            (
                Some(energy / f),
                Some(offloaders as f64 / f),
                counts.iter().map(|&c| c as f64 / f).collect(),
            )
        };
        Self {
            trials: outcomes.len(),
            infeasible_count: outcomes.len() - feasible,
            mean_total_energy,
            mean_num_offloaders,
            offloader_counts: counts,
            offloader_pmf,
        }
    }

    /// Most frequent offloader count among feasible trials, smallest on ties.
    pub fn mode(&self) -> Option<usize> {
        let max = *self.offloader_counts.iter().max()?;
        (max > 0).then(|| self.offloader_counts.iter().position(|&c| c == max).unwrap())
    }

    /// Empirical probability of more than `n` offloaders.
    pub fn tail_above(&self, n: usize) -> f64 {
        self.offloader_pmf.iter().skip(n + 1).sum()
    }
}

/// Solves `trials` sampled scenarios and aggregates the optima.
pub fn run_trials(spec: &SamplingSpec, trials: usize, seed: u64, cfg: &SolverConfig) -> TrialAggregate {
    let outcomes: Vec<Option<(f64, usize)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_trial(spec, seed, t);
            solve_offloading(&s, cfg)
                .optimum
                .map(|o| (o.total_energy, o.n_star))
        })
        .collect();
    TrialAggregate::from_outcomes(spec.users, &outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    MeanServer,
    Slot,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::MeanServer => "mean_B",
            SweepAxis::Slot => "tau",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "mean_B" => Some(SweepAxis::MeanServer),
            "tau" => Some(SweepAxis::Slot),
            _ => None,
        }
    }

    fn apply(self, spec: &SamplingSpec, value: f64) -> SamplingSpec {
        let mut out = *spec;
        match self {
            SweepAxis::MeanServer => out.mean_server = value,
            SweepAxis::Slot => out.tau = value,
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOptions {
    pub solver: SolverConfig,
    /// Reuse the same uniform streams at every grid point instead of
    /// drawing a fresh sub-seed per point.
    pub common_random_numbers: bool,
}

/// Seed used for grid point `index`.
pub fn point_seed(seed: u64, index: usize, common_random_numbers: bool) -> u64 {
    if common_random_numbers {
        derive_seed(seed, &[0x5EED])
    } else {
        derive_seed(seed, &[0x5EED, index as u64 + 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub aggregate: TrialAggregate,
}

/// Runs [`run_trials`] at every grid value, in grid order.
pub fn sweep(
    spec: &SamplingSpec,
    axis: SweepAxis,
    grid: &[f64],
    trials: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Vec<SweepRow> {
    grid.iter()
        .enumerate()
        .map(|(i, &value)| SweepRow {
            axis_value: value,
            aggregate: run_trials(
                &axis.apply(spec, value),
                trials,
                point_seed(seed, i, opts.common_random_numbers),
                &opts.solver,
            ),
        })
        .collect()
}
