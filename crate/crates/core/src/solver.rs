//! Exact solution of the offloading problem.
//!
//! Fixing the number of offloaders `n` makes both the total energy and the
//! (linearized) total time affine in the decision vector. Each `n` therefore
//! yields a binary program with one knapsack row and one cardinality row:
//!
//! ```text
//! min  E0 + e.a   s.t.  d.a <= b,  1.a = n,  a in {0,1}^K
//! ```
//!
//! `e` and `d` may have either sign. The programs are solved by depth-first
//! branch-and-bound with a Lagrangian bound on the knapsack row, and the best
//! cardinality wins.

use std::cmp::Ordering;

use crate::analysis::{instance_offloader_cap, OffloaderCap};
use crate::costs::{decompose, downlink_rate, transmission_times, uplink_rate_inversion, user_energy, CostDecomposition, TimeMode};
use crate::error::{Error, Result};
use crate::model::{OffloadDecision, ScenarioInstance};

/// Absolute slack accepted on the time constraint.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Largest instance the exhaustive search accepts.
pub const ORACLE_USER_LIMIT: usize = 24;

/// One fixed-cardinality subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct BilpProblem {
    /// Objective coefficients `e_k(n)`.
    pub objective: Vec<f64>,
    /// Knapsack weights `d_k`.
    pub weights: Vec<f64>,
    /// Right-hand side of the knapsack row; may be negative.
    pub budget: f64,
    /// Required number of ones.
    pub cardinality: usize,
    /// Constant added to the objective.
    pub offset: f64,
}

impl BilpProblem {
    pub fn new(
        objective: Vec<f64>,
        weights: Vec<f64>,
        budget: f64,
        cardinality: usize,
        offset: f64,
    ) -> Result<Self> {
        let k = objective.len();
        if weights.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                found: weights.len(),
            });
        }
        if cardinality == 0 || cardinality + 1 > k {
            return Err(Error::Cardinality {
                n: cardinality,
                min: 1,
                max: k.saturating_sub(1),
            });
        }
        Ok(Self {
            objective,
            weights,
            budget,
            cardinality,
            offset,
        })
    }

    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    pub fn value(&self, a: &OffloadDecision) -> f64 {
        self.offset + a.offloaders().map(|k| self.objective[k]).sum::<f64>()
    }

    pub fn is_feasible(&self, a: &OffloadDecision, tol: f64) -> bool {
        a.cardinality() == self.cardinality
            && a.offloaders().map(|k| self.weights[k]).sum::<f64>() <= self.budget + tol
    }
}

/// Packs the coefficients for `dec.n` offloaders and time budget `tau`.
pub fn build_subproblem(dec: &CostDecomposition, tau: f64) -> Result<BilpProblem> {
    let k = dec.time_coeffs.len();
    let objective = match &dec.energy_coeffs {
        Some(e) if dec.n < k => e.clone(),
        _ => {
            return Err(Error::Cardinality {
                n: dec.n,
                min: 1,
                max: k.saturating_sub(1),
            })
        }
    };
    BilpProblem::new(
        objective,
        dec.time_coeffs.clone(),
        tau - dec.time_offset,
        dec.n,
        dec.baseline_energy,
    )
}

/// Sum of the `r` smallest `e + lambda * d` over `items`.
fn cheapest_sum(items: &[(f64, f64)], r: usize, lambda: f64, scratch: &mut Vec<f64>) -> f64 {
    if r == 0 {
        return 0.0;
    }
    scratch.clear();
    scratch.extend(items.iter().map(|&(e, d)| e + lambda * d));
    if r < scratch.len() {
        scratch.select_nth_unstable_by(r - 1, f64::total_cmp);
    }
    scratch[..r].iter().sum()
}

/// Sum of the `r` smallest weights over `items`.
fn lightest_sum(items: &[(f64, f64)], r: usize, scratch: &mut Vec<f64>) -> f64 {
    if r == 0 {
        return 0.0;
    }
    scratch.clear();
    scratch.extend(items.iter().map(|&(_, d)| d));
    if r < scratch.len() {
        scratch.select_nth_unstable_by(r - 1, f64::total_cmp);
    }
    scratch[..r].iter().sum()
}

/// Multipliers at which the Lagrangian can change slope: zero plus every
/// positive pairwise crossing of the lines `e_i + lambda * d_i`.
fn breakpoints(items: &[(f64, f64)]) -> Vec<f64> {
    let mut out = vec![0.0];
    for (i, &(ei, di)) in items.iter().enumerate() {
        for &(ej, dj) in &items[i + 1..] {
            let lambda = (ei - ej) / (dj - di);
            if lambda.is_finite() && lambda > 0.0 {
                out.push(lambda);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Best Lagrangian bound on `min sum e` over `r`-subsets of `items` whose
/// weight is at most `capacity`, excluding the constant offset.
///
/// The dual function is concave and piecewise linear, so its maximum over the
/// candidate multipliers is found by a unimodal search.
fn dual_bound(items: &[(f64, f64)], r: usize, capacity: f64, scratch: &mut Vec<f64>) -> f64 {
    if r == 0 {
        return 0.0;
    }
    let dual = |lambda: f64, scratch: &mut Vec<f64>| {
        cheapest_sum(items, r, lambda, scratch) - lambda * capacity
    };

    // Slack at lambda = 0 means the right derivative is non-positive there.
    let mut by_cost: Vec<(f64, f64)> = items.to_vec();
    if r < by_cost.len() {
        by_cost.select_nth_unstable_by(r - 1, |x, y| x.0.total_cmp(&y.0));
    }
    let (cost, weight) = by_cost[..r]
        .iter()
        .fold((0.0, 0.0), |(c, w), &(e, d)| (c + e, w + d));
    if weight <= capacity {
        return cost;
    }

    let candidates = breakpoints(items);
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if dual(candidates[mid], scratch) < dual(candidates[mid + 1], scratch) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    dual(candidates[lo], scratch)
}

/// Lagrangian lower bound on the optimum of `p` for one multiplier.
pub fn lagrangian_bound(p: &BilpProblem, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::NegativeMultiplier(lambda));
    }
    let items: Vec<(f64, f64)> = p.objective.iter().copied().zip(p.weights.iter().copied()).collect();
    let mut scratch = Vec::with_capacity(items.len());
    Ok(p.offset + cheapest_sum(&items, p.cardinality, lambda, &mut scratch) - lambda * p.budget)
}

/// Largest Lagrangian bound of `p` over all candidate multipliers.
pub fn best_lagrangian_bound(p: &BilpProblem) -> f64 {
    let items: Vec<(f64, f64)> = p.objective.iter().copied().zip(p.weights.iter().copied()).collect();
    let mut scratch = Vec::with_capacity(items.len());
    p.offset + dual_bound(&items, p.cardinality, p.budget, &mut scratch)
}

/// Optimal decision of a [`BilpProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct BilpSolution {
    pub decision: OffloadDecision,
    pub value: f64,
}

struct Search<'a> {
    problem: &'a BilpProblem,
    tol: f64,
    /// Variables in ascending objective order.
    order: Vec<usize>,
    items: Vec<(f64, f64)>,
    current: Vec<bool>,
    incumbent: Option<(f64, Vec<bool>)>,
    scratch: Vec<f64>,
}

impl Search<'_> {
    fn offer(&mut self, value: f64) {
        if self.incumbent.as_ref().is_none_or(|(best, _)| value < *best) {
            self.incumbent = Some((value, self.current.clone()));
        }
    }

    fn visit(&mut self, depth: usize, ones: usize, cost: f64, weight: f64) {
        let p = self.problem;
        let remaining = p.cardinality - ones;
        let free = self.items.len() - depth;
        if remaining > free {
            return;
        }
        let suffix = &self.items[depth..];
        let capacity = p.budget + self.tol - weight;
        if lightest_sum(suffix, remaining, &mut self.scratch) > capacity {
            return;
        }
        if remaining == 0 {
            self.offer(p.offset + cost);
            return;
        }
        if remaining == free {
            let rest: f64 = suffix.iter().map(|&(e, _)| e).sum();
            for &k in &self.order[depth..] {
                self.current[k] = true;
            }
            self.offer(p.offset + cost + rest);
            for &k in &self.order[depth..] {
                self.current[k] = false;
            }
            return;
        }
        if let Some((best, _)) = &self.incumbent {
            let bound = p.offset + cost + dual_bound(suffix, remaining, capacity, &mut self.scratch);
            if bound >= *best {
                return;
            }
        }

        let k = self.order[depth];
        let (e, d) = self.items[depth];
        self.current[k] = true;
        self.visit(depth + 1, ones + 1, cost + e, weight + d);
        self.current[k] = false;
        self.visit(depth + 1, ones, cost, weight);
    }
}

/// Feasible starting point: the `n` cheapest variables, repaired by swaps that
/// trade the least objective increase per unit of weight removed.
fn greedy_incumbent(p: &BilpProblem, order: &[usize], tol: f64) -> Option<(f64, Vec<bool>)> {
    let k = p.len();
    let mut chosen = vec![false; k];
    for &i in &order[..p.cardinality] {
        chosen[i] = true;
    }
    let mut weight: f64 = (0..k).filter(|&i| chosen[i]).map(|i| p.weights[i]).sum();
    for _ in 0..k * k {
        if weight <= p.budget + tol {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for out in (0..k).filter(|&i| chosen[i]) {
            for inn in (0..k).filter(|&j| !chosen[j]) {
                let saved = p.weights[out] - p.weights[inn];
                if saved <= 0.0 {
                    continue;
                }
                let ratio = (p.objective[inn] - p.objective[out]) / saved;
                if best.is_none_or(|(r, _, _)| ratio < r) {
                    best = Some((ratio, out, inn));
                }
            }
        }
        let Some((_, out, inn)) = best else { break };
        chosen[out] = false;
        chosen[inn] = true;
        weight += p.weights[inn] - p.weights[out];
    }
    (weight <= p.budget + tol).then(|| {
        let value = p.offset + (0..k).filter(|&i| chosen[i]).map(|i| p.objective[i]).sum::<f64>();
        (value, chosen)
    })
}

/// Global optimum of `p`, or `None` if no binary vector meets both rows.
pub fn branch_and_bound(p: &BilpProblem, tol: f64) -> Option<BilpSolution> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| p.objective[i].total_cmp(&p.objective[j]).then(i.cmp(&j)));
    let items = order.iter().map(|&i| (p.objective[i], p.weights[i])).collect();

    let mut search = Search {
        problem: p,
        tol,
        incumbent: greedy_incumbent(p, &order, tol),
        order,
        items,
        current: vec![false; p.len()],
        scratch: Vec::with_capacity(p.len()),
    };
    search.visit(0, 0, 0.0, 0.0);
    search.incumbent.map(|(value, flags)| BilpSolution {
        decision: OffloadDecision::new(flags),
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    /// Only examine cardinalities up to the mean-time cap of the instance.
    pub prune_with_cap: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            prune_with_cap: false,
        }
    }
}

/// Optimal energy of one cardinality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubproblemValue {
    Optimal(f64),
    Infeasible,
}

impl SubproblemValue {
    pub fn energy(self) -> Option<f64> {
        match self {
            SubproblemValue::Optimal(e) => Some(e),
            SubproblemValue::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub decision: OffloadDecision,
    pub n_star: usize,
    pub total_energy: f64,
    /// Linearized total transmission time of `decision`.
    pub total_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffloadSolution {
    /// `None` when no decision meets the time budget.
    pub optimum: Option<Optimum>,
    /// Optimal value of every examined cardinality, in increasing `n`.
    pub per_n: Vec<(usize, SubproblemValue)>,
}

impl OffloadSolution {
    pub fn is_feasible(&self) -> bool {
        self.optimum.is_some()
    }

    pub fn energy(&self) -> Option<f64> {
        self.optimum.as_ref().map(|o| o.total_energy)
    }

    pub fn num_offloaders(&self) -> Option<usize> {
        self.optimum.as_ref().map(|o| o.n_star)
    }
}

/// Best per-cardinality candidates, first strictly better wins.
struct Tracker {
    best: Option<(f64, usize, OffloadDecision)>,
    per_n: Vec<(usize, SubproblemValue)>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            best: None,
            per_n: Vec::new(),
        }
    }

    fn record(&mut self, n: usize, candidate: Option<(f64, OffloadDecision)>) {
        match candidate {
            Some((energy, decision)) => {
                self.per_n.push((n, SubproblemValue::Optimal(energy)));
                if self.best.as_ref().is_none_or(|(e, _, _)| energy < *e) {
                    self.best = Some((energy, n, decision));
                }
            }
            None => self.per_n.push((n, SubproblemValue::Infeasible)),
        }
    }

    fn finish(self, s: &ScenarioInstance) -> OffloadSolution {
        let optimum = self.best.map(|(total_energy, n_star, decision)| {
            let total_time = transmission_times(s, &decision, TimeMode::Linearized)
                .expect("decision sized to the scenario")
                .total;
            Optimum {
                decision,
                n_star,
                total_energy,
                total_time,
            }
        });
        OffloadSolution {
            optimum,
            per_n: self.per_n,
        }
    }
}

/// Evaluates the all-same decisions directly from the decomposition.
fn uniform_candidate(
    s: &ScenarioInstance,
    n: usize,
    tol: f64,
) -> Option<(f64, OffloadDecision)> {
    let dec = decompose(s, n).expect("cardinality within range");
    let decision = if n == 0 {
        OffloadDecision::none(s.num_users())
    } else {
        OffloadDecision::all(s.num_users())
    };
    (dec.time(&decision) <= s.slot + tol).then(|| (dec.energy(&decision), decision))
}

/// Minimum-energy decision of a valid scenario under the linearized time budget.
///
/// Ties between cardinalities go to the smaller one.
pub fn solve_offloading(s: &ScenarioInstance, cfg: &SolverConfig) -> OffloadSolution {
    let k = s.num_users();
    let tol = cfg.tolerance;
    let max_n = match (cfg.prune_with_cap, instance_offloader_cap(s)) {
        (true, OffloaderCap::Bounded(cap)) => cap.min(k),
        _ => k,
    };

    let mut tracker = Tracker::new();
    tracker.record(0, uniform_candidate(s, 0, tol));
    for n in 1..=max_n.min(k.saturating_sub(1)) {
        let dec = decompose(s, n).expect("cardinality within range");
        let problem = build_subproblem(&dec, s.slot).expect("cardinality within BILP range");
        let candidate = branch_and_bound(&problem, tol).map(|sol| (sol.value, sol.decision));
        tracker.record(n, candidate);
    }
    if max_n == k && k > 0 {
        tracker.record(k, uniform_candidate(s, k, tol));
    }
    tracker.finish(s)
}

/// Brute-force reference over all `2^K` decisions, evaluating energy and time
/// directly from the per-user formulas.
///
/// Ties go to the smaller cardinality, then the lexicographically smallest decision.
pub fn exhaustive_oracle(s: &ScenarioInstance, tol: f64, mode: TimeMode) -> Result<OffloadSolution> {
    let k = s.num_users();
    if k > ORACLE_USER_LIMIT {
        return Err(Error::InstanceTooLarge {
            users: k,
            limit: ORACLE_USER_LIMIT,
        });
    }
    let v = downlink_rate(&s.radio);
    let uplink: Vec<f64> = (0..=k)
        .map(|n| uplink_rate_inversion(n, &s.radio).unwrap_or(f64::NAN))
        .collect();

    let mut best_per_n: Vec<Option<(f64, OffloadDecision)>> = vec![None; k + 1];
    for mask in 0..1u64 << k {
        let a = OffloadDecision::from_mask(k, mask);
        let n = a.cardinality();
        let time = transmission_times(s, &a, mode)?.total;
        if time > s.slot + tol {
            continue;
        }
        let energy: f64 = (0..k)
            .map(|i| {
                user_energy(
                    &s.radio,
                    &s.energy,
                    &s.tasks[i],
                    &s.users[i],
                    a.is_offloading(i),
                    uplink[n],
                    v,
                )
            })
            .sum();
        let slot = &mut best_per_n[n];
        let better = match slot {
            None => true,
            Some((e, d)) => match energy.total_cmp(e) {
                Ordering::Less => true,
                Ordering::Equal => a < *d,
                Ordering::Greater => false,
            },
        };
        if better {
            *slot = Some((energy, a));
        }
    }

    let mut tracker = Tracker::new();
    for (n, candidate) in best_per_n.into_iter().enumerate() {
        tracker.record(n, candidate);
    }
    Ok(tracker.finish(s))
}
