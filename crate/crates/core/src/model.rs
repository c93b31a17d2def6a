//! Domain types for a single-cell offloading scenario.
//!
//! Every user holds a task whose input is split between data stored on the
//! device (`local`) and data stored at the cloud server (`server`). A user
//! either offloads (uploads its local data, receives the outcome) or computes
//! locally (downloads the server data). Radio quantities are expressed with
//! channel-inversion power control, so only the received SNR targets and the
//! per-user power gains are needed.

use std::fmt;

/// Default deep-fade floor: users with a weaker power gain are not admitted.
pub const DEFAULT_FADE_FLOOR: f64 = 0.05;

/// Bandwidth, noise and received SNR targets of the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub bandwidth: f64,
    pub noise: f64,
    /// Uplink SNR at the base station.
    pub snr_bs: f64,
    /// Downlink SNR at a user.
    pub snr_user: f64,
}

impl RadioParams {
    /// Normalized radio with unit bandwidth and unit noise power.
    pub fn normalized(snr_bs: f64, snr_user: f64) -> Self {
        Self {
            bandwidth: 1.0,
            noise: 1.0,
            snr_bs,
            snr_user,
        }
    }

    /// Effective received power at the base station.
    pub fn received_power_bs(&self) -> f64 {
        self.snr_bs * self.noise
    }

    /// Effective received power at a user.
    pub fn received_power_user(&self) -> f64 {
        self.snr_user * self.noise
    }
}

/// One user's workload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    /// Data held by the user (bits per Hz).
    pub local: f64,
    /// Data held by the server (bits per Hz).
    pub server: f64,
    pub cycles: f64,
    /// Size of the task outcome (bits per Hz).
    pub output: f64,
}

impl TaskSpec {
    pub fn new(local: f64, server: f64, cycles: f64, output: f64) -> Self {
        Self {
            local,
            server,
            cycles,
            output,
        }
    }

    /// Total input size `local + server`.
    pub fn aggregated(&self) -> f64 {
        self.local + self.server
    }
}

/// Radio and energy state of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserState {
    /// Channel power gain `|h|^2`, shared by uplink and downlink.
    pub gain: f64,
    /// Energy consumed per CPU cycle on the device.
    pub energy_per_cycle: f64,
}

impl UserState {
    pub fn new(gain: f64, energy_per_cycle: f64) -> Self {
        Self {
            gain,
            energy_per_cycle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Energy consumed per CPU cycle at the edge server.
    pub server_energy_per_cycle: f64,
}

/// Affine model of the outcome size as a function of the total input size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSizeModel {
    pub intercept: f64,
    pub slope: f64,
}

impl OutputSizeModel {
    pub fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    /// Outcome size for a task with `local` and `server` input bits.
    pub fn output_size(&self, local: f64, server: f64) -> f64 {
        self.intercept + self.slope * (local + server)
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioInstance {
    pub radio: RadioParams,
    pub energy: EnergyParams,
    pub tasks: Vec<TaskSpec>,
    pub users: Vec<UserState>,
    /// Time budget shared by all uplink and downlink transmissions.
    pub slot: f64,
    /// Deep-fade floor on the admitted power gains.
    pub fade_floor: f64,
}

impl ScenarioInstance {
    /// Number of users. Only meaningful once `tasks` and `users` agree in length.
    pub fn num_users(&self) -> usize {
        self.tasks.len()
    }

    pub fn with_slot(&self, slot: f64) -> Self {
        Self {
            slot,
            ..self.clone()
        }
    }
}

/// Where a validation failure was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    /// Mismatched or empty user lists.
    Shape,
    Radio(&'static str),
    Energy(&'static str),
    Slot,
    FadeFloor,
    Task { user: usize, field: &'static str },
    User { user: usize, field: &'static str },
}

/// A single invariant that does not hold for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub site: Site,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.site {
            Site::Shape => write!(f, "{}", self.message),
            Site::Radio(field) | Site::Energy(field) => write!(f, "{field}: {}", self.message),
            Site::Slot => write!(f, "tau: {}", self.message),
            Site::FadeFloor => write!(f, "epsilon: {}", self.message),
            Site::Task { user, field } | Site::User { user, field } => {
                write!(f, "user {} {field}: {}", user + 1, self.message)
            }
        }
    }
}

fn positive(value: f64) -> bool {
    value.is_finite() && value > 0.0
}

fn non_negative(value: f64) -> bool {
    value.is_finite() && value >= 0.0
}

/// Returns every violated invariant of `s`; an empty list means the scenario is valid.
pub fn validate_scenario(s: &ScenarioInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |site, message: String| out.push(Violation { site, message });

    if s.tasks.len() != s.users.len() {
        push(
            Site::Shape,
            format!(
                "{} tasks but {} user states",
                s.tasks.len(),
                s.users.len()
            ),
        );
    } else if s.tasks.is_empty() {
        push(Site::Shape, "scenario has no users".to_string());
    }

    let radio = [
        ("W", s.radio.bandwidth),
        ("N0", s.radio.noise),
        ("gamma_bs", s.radio.snr_bs),
        ("gamma_user", s.radio.snr_user),
    ];
    for (name, value) in radio {
        if !positive(value) {
            push(Site::Radio(name), format!("must be positive and finite, got {value}"));
        }
    }
    let g0 = s.energy.server_energy_per_cycle;
    if !non_negative(g0) {
        push(Site::Energy("g0"), format!("must be non-negative and finite, got {g0}"));
    }
    if !positive(s.slot) {
        push(Site::Slot, format!("must be positive and finite, got {}", s.slot));
    }
    let floor_ok = positive(s.fade_floor);
    if !floor_ok {
        push(
            Site::FadeFloor,
            format!("must be positive and finite, got {}", s.fade_floor),
        );
    }

    for (user, task) in s.tasks.iter().enumerate() {
        let fields = [
            ("L", task.local),
            ("B", task.server),
            ("C", task.cycles),
            ("Y", task.output),
        ];
        for (field, value) in fields {
            if !non_negative(value) {
                push(
                    Site::Task { user, field },
                    format!("must be non-negative and finite, got {value}"),
                );
            }
        }
    }
    for (user, state) in s.users.iter().enumerate() {
        let gain = state.gain;
        if !gain.is_finite() {
            push(
                Site::User { user, field: "beta" },
                format!("must be finite, got {gain}"),
            );
        } else if floor_ok && gain < s.fade_floor {
            push(
                Site::User { user, field: "beta" },
                format!("{gain} is below the deep-fade floor {}", s.fade_floor),
            );
        } else if gain <= 0.0 {
            push(
                Site::User { user, field: "beta" },
                format!("{gain} is below the deep-fade floor"),
            );
        }
        let g = state.energy_per_cycle;
        if !non_negative(g) {
            push(
                Site::User { user, field: "g" },
                format!("must be non-negative and finite, got {g}"),
            );
        }
    }
    out
}

/// Binary offloading decision, one flag per user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OffloadDecision(Vec<bool>);

impl OffloadDecision {
    pub fn new(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    /// Nobody offloads.
    pub fn none(users: usize) -> Self {
        Self(vec![false; users])
    }

    /// Everybody offloads.
    pub fn all(users: usize) -> Self {
        Self(vec![true; users])
    }

    /// Decision whose user `k` offloads iff bit `k` of `mask` is set.
    pub fn from_mask(users: usize, mask: u64) -> Self {
        Self((0..users).map(|k| mask >> k & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of offloading users.
    pub fn cardinality(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }

    pub fn is_offloading(&self, k: usize) -> bool {
        self.0[k]
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    /// Indices of the offloading users.
    pub fn offloaders(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &a)| a).map(|(k, _)| k)
    }
}

impl fmt::Display for OffloadDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &a in &self.0 {
            f.write_str(if a { "1" } else { "0" })?;
        }
        Ok(())
    }
}
