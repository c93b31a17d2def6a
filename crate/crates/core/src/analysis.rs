//! Mean total transmission time of a population of iid users as a function of
//! the number of offloaders, and the offloader cap it implies for a budget.

use std::f64::consts::LN_2;

use crate::costs::{downlink_rate, uplink_rate_inversion};
use crate::error::{Error, Result};
use crate::model::{OutputSizeModel, RadioParams, ScenarioInstance};

/// Statistics of a user population with exponential local-data sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationParams {
    pub users: usize,
    pub mean_local: f64,
    pub mean_server: f64,
    pub output_model: OutputSizeModel,
    pub radio: RadioParams,
}

impl PopulationParams {
    /// Mean downlink time with no offloaders, `K * mean_server / v`.
    pub fn baseline_time(&self) -> f64 {
        self.users as f64 * self.mean_server / downlink_rate(&self.radio)
    }

    /// Mean outcome size minus mean server-data size.
    fn mean_output_excess(&self) -> f64 {
        let m = &self.output_model;
        m.intercept + m.slope * self.mean_local - (1.0 - m.slope) * self.mean_server
    }
}

/// Mean of the maximum of `users` iid exponentials with mean `mean_local`.
pub fn expected_lmax(users: usize, mean_local: f64) -> f64 {
    let harmonic: f64 = (1..=users).map(|i| 1.0 / i as f64).sum();
    mean_local * harmonic
}

fn slope(longest: f64, output_excess: f64, radio: &RadioParams) -> f64 {
    longest * LN_2 / radio.bandwidth + output_excess / downlink_rate(radio)
}

/// Growth of the mean total time per additional offloader, using
/// `u(n) ~ W / (n ln 2)`.
pub fn theta(p: &PopulationParams) -> f64 {
    slope(
        expected_lmax(p.users, p.mean_local),
        p.mean_output_excess(),
        &p.radio,
    )
}

/// Which form of the mean-time expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanTimeStage {
    /// Exact uplink rate `u(n)` with the mean outcome size.
    ExactRate,
    /// Outcome size replaced by its affine model. Coincides with
    /// `ExactRate` because the model is affine.
    LinearizedOutput,
    /// `K B / v + n theta`.
    Asymptotic,
}

pub fn mean_total_time(p: &PopulationParams, n: usize, stage: MeanTimeStage) -> Result<f64> {
    if n > p.users {
        return Err(Error::Cardinality {
            n,
            min: 0,
            max: p.users,
        });
    }
    let base = p.baseline_time();
    if n == 0 {
        return Ok(base);
    }
    let v = downlink_rate(&p.radio);
    let m = &p.output_model;
    Ok(match stage {
        MeanTimeStage::ExactRate => {
            let mean_output = m.output_size(p.mean_local, p.mean_server);
            base + expected_lmax(p.users, p.mean_local) / uplink_rate_inversion(n, &p.radio)?
                + n as f64 * (mean_output - p.mean_server) / v
        }
        MeanTimeStage::LinearizedOutput => {
            base + expected_lmax(p.users, p.mean_local) / uplink_rate_inversion(n, &p.radio)?
                + n as f64 * p.mean_output_excess() / v
        }
        MeanTimeStage::Asymptotic => base + n as f64 * theta(p),
    })
}

/// Upper limit on the number of offloaders suggested by the mean-time line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffloaderCap {
    Bounded(usize),
    /// The slope is not positive, so the budget does not limit `n`.
    Unbounded,
}

fn cap_from_line(base: f64, slope: f64, users: usize, tau: f64) -> OffloaderCap {
    if !(slope > 0.0) {
        return OffloaderCap::Unbounded;
    }
    let headroom = (tau - base) / slope;
    if headroom < 0.0 {
        OffloaderCap::Bounded(0)
    } else {
        OffloaderCap::Bounded((headroom.floor() as usize).min(users))
    }
}

/// Largest `n` with `K B / v + n theta <= tau`. Heuristic: it bounds the mean,
/// not every instance.
pub fn max_offloaders(p: &PopulationParams, tau: f64) -> OffloaderCap {
    cap_from_line(p.baseline_time(), theta(p), p.users, tau)
}

/// Offloader cap of a single instance, with the population means replaced by
/// the instance's own sample means and its actual largest local-data size.
pub fn instance_offloader_cap(s: &ScenarioInstance) -> OffloaderCap {
    let k = s.num_users();
    if k == 0 {
        return OffloaderCap::Unbounded;
    }
    let v = downlink_rate(&s.radio);
    let longest = s.tasks.iter().map(|t| t.local).fold(0.0, f64::max);
    let excess = s.tasks.iter().map(|t| t.output - t.server).sum::<f64>() / k as f64;
    let base = s.tasks.iter().map(|t| t.server).sum::<f64>() / v;
    cap_from_line(base, slope(longest, excess, &s.radio), k, s.slot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig2(mean_server: f64) -> PopulationParams {
        PopulationParams {
            users: 10,
            mean_local: 2.0,
            mean_server,
            output_model: OutputSizeModel::new(0.0, 0.1),
            radio: RadioParams::normalized(3.0, 6.0),
        }
    }

    #[test]
    fn expected_lmax_examples() {
        assert_eq!(expected_lmax(1, 2.0), 2.0);
        assert_eq!(expected_lmax(2, 1.0), 1.5);
        assert_abs_diff_eq!(expected_lmax(10, 2.0), 5.85794, epsilon = 1e-5);
    }

    #[test]
    fn expected_lmax_against_sampled_maxima() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 200_000;
        let total: f64 = (0..draws)
            .map(|_| {
                (0..10)
                    .map(|_| -2.0 * (1.0 - rng.random::<f64>()).ln())
                    .fold(0.0, f64::max)
            })
            .sum();
        let empirical = total / draws as f64;
        assert!((empirical - expected_lmax(10, 2.0)).abs() < 0.03, "{empirical}");
    }

    #[test]
    fn theta_examples() {
        assert_abs_diff_eq!(theta(&fig2(4.0)), 2.84931, epsilon = 1e-5);
        let mut p = fig2(40.0);
        p.output_model = OutputSizeModel::new(0.0, 1.0);
        assert!(theta(&p) > 0.0);
    }

    #[test]
    fn theta_changes_sign_near_critical_server_size() {
        let p = fig2(4.0);
        let v = downlink_rate(&p.radio);
        let critical = (expected_lmax(10, 2.0) * v * LN_2 + 0.1 * 2.0) / 0.9;
        assert_abs_diff_eq!(critical, 12.89, epsilon = 5e-3);
        assert!(theta(&fig2(critical - 0.01)) > 0.0);
        assert!(theta(&fig2(critical + 0.01)) < 0.0);
        assert_eq!(max_offloaders(&fig2(critical + 1.0), 100.0), OffloaderCap::Unbounded);
    }

    #[test]
    fn mean_time_examples() {
        let p = fig2(4.0);
        for stage in [MeanTimeStage::ExactRate, MeanTimeStage::LinearizedOutput, MeanTimeStage::Asymptotic] {
            assert_abs_diff_eq!(mean_total_time(&p, 0, stage).unwrap(), 14.24829, epsilon = 1e-5);
        }
        assert_abs_diff_eq!(
            mean_total_time(&p, 1, MeanTimeStage::ExactRate).unwrap(),
            15.96615,
            epsilon = 1e-5
        );
        assert_abs_diff_eq!(
            mean_total_time(&p, 3, MeanTimeStage::Asymptotic).unwrap(),
            22.79621,
            epsilon = 1e-5
        );
        assert!(mean_total_time(&p, 11, MeanTimeStage::Asymptotic).is_err());
    }

    #[test]
    fn asymptotic_error_shrinks_with_n() {
        let p = fig2(4.0);
        let gap = |n| {
            (mean_total_time(&p, n, MeanTimeStage::Asymptotic).unwrap()
                - mean_total_time(&p, n, MeanTimeStage::ExactRate).unwrap())
            .abs()
        };
        assert!(gap(8) < gap(1));
    }

    #[test]
    fn cap_at_fig2_budget() {
        assert_eq!(max_offloaders(&fig2(4.0), 35.63), OffloaderCap::Bounded(7));
        assert_eq!(max_offloaders(&fig2(4.0), 10.0), OffloaderCap::Bounded(0));
    }

    proptest! {
        #[test]
        fn stages_one_and_two_coincide(b in 0.1..20.0f64, n in 0usize..=10) {
            let p = fig2(b);
            let x = mean_total_time(&p, n, MeanTimeStage::ExactRate).unwrap();
            let y = mean_total_time(&p, n, MeanTimeStage::LinearizedOutput).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }

        #[test]
        fn cap_monotone(b in 0.1..12.0f64, tau in 0.0..80.0f64, db in 0.0..2.0f64, dt in 0.0..20.0f64) {
            let as_n = |c: OffloaderCap| match c {
                OffloaderCap::Bounded(n) => n,
                OffloaderCap::Unbounded => usize::MAX,
            };
            let p = fig2(b);
            prop_assume!(theta(&fig2(b + db)) > 0.0);
            prop_assert!(as_n(max_offloaders(&p, tau + dt)) >= as_n(max_offloaders(&p, tau)));
            prop_assert!(as_n(max_offloaders(&fig2(b + db), tau)) <= as_n(max_offloaders(&p, tau)));
        }
    }
}
