//! Rates, transmission times and energies, plus their linear decomposition in
//! the decision vector for a fixed number of offloading users.
//!
//! Uplink transmissions are simultaneous (offloaders interfere with each other),
//! downlink transmissions are TDMA. Under channel-inversion power control every
//! offloader sees the same uplink SINR, so the uplink rate depends only on the
//! number of offloaders `n`, and the downlink rate is common to all users.

use crate::error::{Error, Result};
use crate::model::{EnergyParams, OffloadDecision, RadioParams, ScenarioInstance, TaskSpec, UserState};

/// How the total uplink time is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeMode {
    /// Largest local-data size over all users, offloading or not. This is the
    /// form that is linear in the decision for fixed `n`.
    #[default]
    Linearized,
    /// Largest local-data size over the offloading users only.
    Exact,
}

/// Channel-inversion uplink transmit powers `P_BS / beta_k`.
pub fn inversion_uplink_powers(s: &ScenarioInstance) -> Vec<f64> {
    let p = s.radio.received_power_bs();
    s.users.iter().map(|u| p / u.gain).collect()
}

/// Channel-inversion downlink transmit powers `P_user / beta_k`.
pub fn inversion_downlink_powers(s: &ScenarioInstance) -> Vec<f64> {
    let p = s.radio.received_power_user();
    s.users.iter().map(|u| p / u.gain).collect()
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

/// Per-user uplink SINR rates for arbitrary transmit powers.
///
/// Entry `k` is `None` for non-offloading users. Interference at the base
/// station is the sum of the received powers of the other offloaders.
pub fn uplink_rate_general(
    s: &ScenarioInstance,
    a: &OffloadDecision,
    powers: &[f64],
) -> Result<Vec<Option<f64>>> {
    let k_users = s.num_users();
    check_len(k_users, a.len())?;
    check_len(k_users, powers.len())?;
    if let Some((index, &power)) = powers.iter().enumerate().find(|(_, &p)| !(p > 0.0)) {
        return Err(Error::NonPositivePower { index, power });
    }

    let received: Vec<f64> = powers
        .iter()
        .zip(&s.users)
        .map(|(p, u)| p * u.gain)
        .collect();
    let total: f64 = a.offloaders().map(|k| received[k]).sum();
    let w = s.radio.bandwidth;
    let n0 = s.radio.noise;
    Ok((0..k_users)
        .map(|k| {
            a.is_offloading(k).then(|| {
                let interference = total - received[k];
                w * (1.0 + received[k] / (interference + n0)).log2()
            })
        })
        .collect())
}

/// Common uplink rate `u(n)` of `n >= 1` simultaneously transmitting offloaders.
pub fn uplink_rate_inversion(n: usize, radio: &RadioParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::NoUplink);
    }
    let gamma = radio.snr_bs;
    Ok(radio.bandwidth * (1.0 + gamma / ((n - 1) as f64 * gamma + 1.0)).log2())
}

/// Common interference-free downlink rate `v`.
pub fn downlink_rate(radio: &RadioParams) -> f64 {
    radio.bandwidth * (1.0 + radio.snr_user).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTimes {
    /// Duration of the simultaneous uplink phase (0 without offloaders).
    pub uplink: f64,
    /// Downlink time of each user: outcome for offloaders, server data otherwise.
    pub downlink: Vec<f64>,
    pub total: f64,
}

pub fn transmission_times(
    s: &ScenarioInstance,
    a: &OffloadDecision,
    mode: TimeMode,
) -> Result<TransmissionTimes> {
    check_len(s.num_users(), a.len())?;
    let v = downlink_rate(&s.radio);
    let downlink: Vec<f64> = s
        .tasks
        .iter()
        .zip(a.flags())
        .map(|(t, &off)| if off { t.output / v } else { t.server / v })
        .collect();

    let n = a.cardinality();
    let uplink = if n == 0 {
        0.0
    } else {
        let u = uplink_rate_inversion(n, &s.radio)?;
        let longest = match mode {
            TimeMode::Linearized => max_local(&s.tasks),
            TimeMode::Exact => a
                .offloaders()
                .map(|k| s.tasks[k].local)
                .fold(0.0, f64::max),
        };
        longest / u
    };
    let total = uplink + downlink.iter().sum::<f64>();
    Ok(TransmissionTimes {
        uplink,
        downlink,
        total,
    })
}

fn max_local(tasks: &[TaskSpec]) -> f64 {
    tasks.iter().map(|t| t.local).fold(0.0, f64::max)
}

/// Energy of one user under channel inversion, given the common rates.
///
/// Offloaders pay server computation plus upload and outcome download;
/// local users pay device computation plus server-data download.
pub(crate) fn user_energy(
    radio: &RadioParams,
    energy: &EnergyParams,
    task: &TaskSpec,
    user: &UserState,
    offloading: bool,
    uplink_rate: f64,
    downlink_rate: f64,
) -> f64 {
    let p_down = radio.received_power_user() / user.gain;
    if offloading {
        let p_up = radio.received_power_bs() / user.gain;
        energy.server_energy_per_cycle * task.cycles
            + p_up * task.local / uplink_rate
            + p_down * task.output / downlink_rate
    } else {
        user.energy_per_cycle * task.cycles + p_down * task.server / downlink_rate
    }
}

/// Energy spent on behalf of user `k` under decision `a`.
pub fn per_user_energy(s: &ScenarioInstance, a: &OffloadDecision, k: usize) -> Result<f64> {
    let users = s.num_users();
    check_len(users, a.len())?;
    if k >= users {
        return Err(Error::UserIndex { index: k, users });
    }
    let offloading = a.is_offloading(k);
    let u = if offloading {
        uplink_rate_inversion(a.cardinality(), &s.radio)?
    } else {
        f64::NAN
    };
    Ok(user_energy(
        &s.radio,
        &s.energy,
        &s.tasks[k],
        &s.users[k],
        offloading,
        u,
        downlink_rate(&s.radio),
    ))
}

/// Sum of [`per_user_energy`] over all users.
pub fn total_energy(s: &ScenarioInstance, a: &OffloadDecision) -> Result<f64> {
    (0..s.num_users()).map(|k| per_user_energy(s, a, k)).sum()
}

/// Coefficients of total energy and linearized total time as affine functions
/// of the decision vector, valid for decisions with exactly `n` offloaders.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDecomposition {
    pub n: usize,
    /// `u(n)`; absent for `n = 0`.
    pub uplink_rate: Option<f64>,
    pub downlink_rate: f64,
    /// Downlink time when nobody offloads, `sum_k B_k / v`.
    pub baseline_time: f64,
    /// Largest local-data size over all users.
    pub max_local: f64,
    /// `baseline_time + max_local / u(n)` for `n >= 1`, `baseline_time` for `n = 0`.
    pub time_offset: f64,
    /// Energy when nobody offloads.
    pub baseline_energy: f64,
    /// Energy change `e_k(n)` when user `k` offloads; absent for `n = 0`.
    pub energy_coeffs: Option<Vec<f64>>,
    /// Time change `d_k = (Y_k - B_k) / v` when user `k` offloads.
    pub time_coeffs: Vec<f64>,
}

impl CostDecomposition {
    /// `E_0 + e(n) . a`.
    pub fn energy(&self, a: &OffloadDecision) -> f64 {
        let delta = match &self.energy_coeffs {
            Some(e) => a.offloaders().map(|k| e[k]).sum(),
            None => 0.0,
        };
        self.baseline_energy + delta
    }

    /// `T_0(n) + d . a`.
    pub fn time(&self, a: &OffloadDecision) -> f64 {
        self.time_offset + a.offloaders().map(|k| self.time_coeffs[k]).sum::<f64>()
    }
}

pub fn decompose(s: &ScenarioInstance, n: usize) -> Result<CostDecomposition> {
    let k_users = s.num_users();
    if n > k_users {
        return Err(Error::Cardinality {
            n,
            min: 0,
            max: k_users,
        });
    }
    let v = downlink_rate(&s.radio);
    let p_bs = s.radio.received_power_bs();
    let p_user = s.radio.received_power_user();
    let g0 = s.energy.server_energy_per_cycle;

    let baseline_time = s.tasks.iter().map(|t| t.server).sum::<f64>() / v;
    let max_local = max_local(&s.tasks);
    let baseline_energy = s
        .tasks
        .iter()
        .zip(&s.users)
        .map(|(t, u)| u.energy_per_cycle * t.cycles + p_user * t.server / (u.gain * v))
        .sum();
    let time_coeffs = s.tasks.iter().map(|t| (t.output - t.server) / v).collect();

    let uplink_rate = if n == 0 {
        None
    } else {
        Some(uplink_rate_inversion(n, &s.radio)?)
    };
    let time_offset = match uplink_rate {
        Some(u) => baseline_time + max_local / u,
        None => baseline_time,
    };
    let energy_coeffs = uplink_rate.map(|u| {
        s.tasks
            .iter()
            .zip(&s.users)
            .map(|(t, usr)| {
                (g0 - usr.energy_per_cycle) * t.cycles
                    + p_bs * t.local / (usr.gain * u)
                    + p_user * (t.output - t.server) / (usr.gain * v)
            })
            .collect()
    });

    Ok(CostDecomposition {
        n,
        uplink_rate,
        downlink_rate: v,
        baseline_time,
        max_local,
        time_offset,
        baseline_energy,
        energy_coeffs,
        time_coeffs,
    })
}
