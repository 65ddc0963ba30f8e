//! Trajectory simulation under stopping rules.
//!
//! Every path draws from its own ChaCha8 stream selected by `(seed, path_index)`,
//! and estimators accumulate integer sums only, so results are bit-identical
//! for any worker count or scheduling order.

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::analytics::{limit_expectation, OccupationProfile, Regime};
use crate::chain::ChainSpec;
use crate::error::SimError;
use crate::number::{ExtendedValue, Scalar};

use num_rational::BigRational;

pub const DEFAULT_STEP_CAP: u64 = 100_000_000;
/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.96;

/// States with precomputed step thresholds; larger states are evaluated on demand.
const TABLE_LIMIT: u64 = 1 << 22;

/// Non-anticipating stopping rules. All of them also stop on absorption at 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StoppingRule {
    /// `m ∧ T_D`.
    Truncation { m: u64 },
    /// First exit from `(0, b)`.
    IntervalExit { b: u64 },
    /// `m` ∧ first exit from `(0, b)`.
    TruncatedIntervalExit { m: u64, b: u64 },
}

impl StoppingRule {
    pub fn stops(&self, time: u64, state: u64) -> bool {
        state == 0
            || match *self {
                StoppingRule::Truncation { m } => time >= m,
                StoppingRule::IntervalExit { b } => state >= b,
                StoppingRule::TruncatedIntervalExit { m, b } => time >= m || state >= b,
            }
    }

    /// Largest state a path started at `start` can visit.
    pub fn max_state(&self, start: u64) -> u64 {
        match *self {
            StoppingRule::Truncation { m } => start.saturating_add(m),
            StoppingRule::IntervalExit { b } => b.max(start),
            StoppingRule::TruncatedIntervalExit { m, b } => start.saturating_add(m).min(b.max(start)),
        }
    }
}

impl fmt::Display for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoppingRule::Truncation { m } => write!(f, "truncation(m={m})"),
            StoppingRule::IntervalExit { b } => write!(f, "interval-exit(b={b})"),
            StoppingRule::TruncatedIntervalExit { m, b } => write!(f, "truncated-interval-exit(m={m}, b={b})"),
        }
    }
}

/// A family of rules indexed by a grid value, non-decreasing in the index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleFamily {
    Truncation,
    /// The index is the upper level `b`.
    IntervalExit,
    /// The index is the time horizon `m`; the upper level is fixed.
    TruncatedIntervalExit {
        b: u64,
    },
}

impl RuleFamily {
    pub fn rule(&self, index: u64) -> StoppingRule {
        match *self {
            RuleFamily::Truncation => StoppingRule::Truncation { m: index },
            RuleFamily::IntervalExit => StoppingRule::IntervalExit { b: index },
            RuleFamily::TruncatedIntervalExit { b } => StoppingRule::TruncatedIntervalExit { m: index, b },
        }
    }
}

/// One simulated trajectory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathRecord {
    pub stopping_time: u64,
    pub terminal_state: u64,
    /// Visits to each state at times `0..stopping_time`.
    pub visits: BTreeMap<u64, u64>,
    pub right_steps: u64,
    pub left_steps: u64,
    /// The step cap was reached before the rule stopped the path.
    pub cap_hit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub workers: usize,
    pub step_cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { workers: 1, step_cap: DEFAULT_STEP_CAP }
    }
}

struct Outcome {
    stopping_time: u64,
    terminal: u64,
    right_steps: u64,
    cap_hit: bool,
}

/// Precomputed right-step thresholds for one chain and rule.
struct Simulator<'a> {
    spec: &'a ChainSpec,
    rule: StoppingRule,
    step_cap: u64,
    thresholds: Vec<u64>,
}

fn threshold(right: f64) -> u64 {
    // Saturating cast: r = 1 maps to u64::MAX.
    (right * 18_446_744_073_709_551_616.0) as u64
}

impl<'a> Simulator<'a> {
    fn new(spec: &'a ChainSpec, rule: StoppingRule, step_cap: u64) -> Result<Self, SimError> {
        let limit = rule.max_state(spec.start_state()).min(TABLE_LIMIT);
        let mut thresholds = Vec::with_capacity(limit as usize + 1);
        thresholds.push(0);
        for n in 1..=limit {
            thresholds.push(threshold(spec.probs_f64(n)?.1));
        }
        Ok(Self { spec, rule, step_cap, thresholds })
    }

    fn threshold_at(&self, state: u64) -> u64 {
        match self.thresholds.get(state as usize) {
            Some(t) => *t,
            None => threshold(self.spec.probs_f64(state).map(|p| p.1).unwrap_or(0.5)),
        }
    }

    fn run(&self, seed: u64, path_index: u64, mut visits: Option<&mut Vec<u64>>) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        let mut state = self.spec.start_state();
        let mut time = 0;
        let mut right_steps = 0;
        while !self.rule.stops(time, state) {
            if time >= self.step_cap {
                return Outcome { stopping_time: time, terminal: state, right_steps, cap_hit: true };
            }
            if let Some(v) = visits.as_deref_mut() {
                if v.len() <= state as usize {
                    v.resize(state as usize + 1, 0);
                }
                v[state as usize] += 1;
            }
            if rng.next_u64() < self.threshold_at(state) {
                state += 1;
                right_steps += 1;
            } else {
                state -= 1;
            }
            time += 1;
        }
        Outcome { stopping_time: time, terminal: state, right_steps, cap_hit: false }
    }
}

/// Simulates path `path_index` of the experiment keyed by `seed`.
pub fn simulate_path(
    spec: &ChainSpec,
    rule: StoppingRule,
    seed: u64,
    path_index: u64,
    step_cap: u64,
) -> Result<PathRecord, SimError> {
    let sim = Simulator::new(spec, rule, step_cap)?;
    let mut counts = Vec::new();
    let out = sim.run(seed, path_index, Some(&mut counts));
    let visits = counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(n, c)| (n as u64, *c)).collect();
    Ok(PathRecord {
        stopping_time: out.stopping_time,
        terminal_state: out.terminal,
        visits,
        right_steps: out.right_steps,
        left_steps: out.stopping_time - out.right_steps,
        cap_hit: out.cap_hit,
    })
}

/// Sample mean with a normal-approximation 95% interval.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub half_width_95: f64,
    /// Paths that contributed (cap hits excluded).
    pub paths: u64,
    pub seed: u64,
    pub rule: StoppingRule,
    pub cap_hits: u64,
}

/// Exact integer moments; merging is associative and commutative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Moments {
    count: u64,
    sum: u128,
    sum_sq: u128,
}

impl Moments {
    fn push(&mut self, value: u64) {
        self.count += 1;
        self.sum += value as u128;
        self.sum_sq += (value as u128) * (value as u128);
    }

    fn merge(mut self, other: Moments) -> Moments {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }
}

/// Mean and 95% half-width from integer sums over `n` observations.
fn summarize(n: u64, sum: u128, sum_sq: u128) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum as f64 / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let n128 = n as u128;
    let spread = n128 * sum_sq - sum * sum;
    let variance = spread as f64 / (n as f64 * (n - 1) as f64);
    (mean, Z_95 * variance.sqrt() / (n as f64).sqrt())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, SimError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(|e| SimError::ThreadPool(e.to_string()))
}

fn check_paths(paths: u64) -> Result<(), SimError> {
    if paths < 2 {
        return Err(SimError::InvalidArgument(format!("need at least 2 paths, got {paths}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Default)]
struct TerminalAcc {
    moments: Moments,
    cap_hits: u64,
}

/// Estimates `E[X_T]` from `paths` trajectories.
pub fn estimate_expectation(
    spec: &ChainSpec,
    rule: StoppingRule,
    paths: u64,
    seed: u64,
    options: SimOptions,
) -> Result<EstimateWithCI, SimError> {
    check_paths(paths)?;
    let sim = Simulator::new(spec, rule, options.step_cap)?;
    let acc = pool(options.workers)?.install(|| {
        (0..paths)
            .into_par_iter()
            .fold(TerminalAcc::default, |mut acc, i| {
                let out = sim.run(seed, i, None);
                if out.cap_hit {
                    acc.cap_hits += 1;
                } else {
                    acc.moments.push(out.terminal);
                }
                acc
            })
            .reduce(TerminalAcc::default, |a, b| TerminalAcc {
                moments: a.moments.merge(b.moments),
                cap_hits: a.cap_hits + b.cap_hits,
            })
    });
    let (mean, half_width_95) = summarize(acc.moments.count, acc.moments.sum, acc.moments.sum_sq);
    Ok(EstimateWithCI { mean, half_width_95, paths: acc.moments.count, seed, rule, cap_hits: acc.cap_hits })
}

/// Empirical occupation counts with per-state 95% half-widths.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationEstimate {
    pub profile: OccupationProfile<f64>,
    /// `half_widths[i]` belongs to state `i + 1`.
    pub half_widths: Vec<f64>,
    pub paths: u64,
    pub seed: u64,
    pub cap_hits: u64,
}

#[derive(Clone, Default)]
struct OccupationAcc {
    sums: Vec<u128>,
    sum_sqs: Vec<u128>,
    count: u64,
    cap_hits: u64,
}

impl OccupationAcc {
    fn merge(mut self, other: OccupationAcc) -> OccupationAcc {
        if self.sums.len() < other.sums.len() {
            self.sums.resize(other.sums.len(), 0);
            self.sum_sqs.resize(other.sums.len(), 0);
        }
        for (i, (s, q)) in other.sums.iter().zip(&other.sum_sqs).enumerate() {
            self.sums[i] += s;
            self.sum_sqs[i] += q;
        }
        self.count += other.count;
        self.cap_hits += other.cap_hits;
        self
    }
}

/// Estimates `E[G_T^n]` for every visited state `n >= 1`.
pub fn estimate_occupation(
    spec: &ChainSpec,
    rule: StoppingRule,
    paths: u64,
    seed: u64,
    options: SimOptions,
) -> Result<OccupationEstimate, SimError> {
    check_paths(paths)?;
    let sim = Simulator::new(spec, rule, options.step_cap)?;
    let acc = pool(options.workers)?.install(|| {
        (0..paths)
            .into_par_iter()
            .fold(
                || (OccupationAcc::default(), Vec::new()),
                |(mut acc, mut buf): (OccupationAcc, Vec<u64>), i| {
                    buf.clear();
                    let out = sim.run(seed, i, Some(&mut buf));
                    if out.cap_hit {
                        acc.cap_hits += 1;
                        return (acc, buf);
                    }
                    if acc.sums.len() < buf.len() {
                        acc.sums.resize(buf.len(), 0);
                        acc.sum_sqs.resize(buf.len(), 0);
                    }
                    for (n, &c) in buf.iter().enumerate() {
                        acc.sums[n] += c as u128;
                        acc.sum_sqs[n] += (c as u128) * (c as u128);
                    }
                    acc.count += 1;
                    (acc, buf)
                },
            )
            .map(|(acc, _)| acc)
            .reduce(OccupationAcc::default, OccupationAcc::merge)
    });
    let states = acc.sums.len().max(1) - 1;
    let mut values = Vec::with_capacity(states);
    let mut half_widths = Vec::with_capacity(states);
    for n in 1..=states {
        let (mean, hw) = summarize(acc.count, acc.sums[n], acc.sum_sqs[n]);
        values.push(mean);
        half_widths.push(hw);
    }
    Ok(OccupationEstimate {
        profile: OccupationProfile { start: spec.start_state(), values, regime: Regime::UnderRule(rule) },
        half_widths,
        paths: acc.count,
        seed,
        cap_hits: acc.cap_hits,
    })
}

/// Estimates along a rule family together with the analytic limit.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub family: RuleFamily,
    pub grid: Vec<u64>,
    pub rows: Vec<EstimateWithCI>,
    /// `Err` carries the reason the analytic limit is unavailable.
    pub analytic_limit: Result<ExtendedValue<f64>, String>,
}

pub fn convergence_sweep(
    spec: &ChainSpec,
    family: RuleFamily,
    grid: &[u64],
    paths: u64,
    seed: u64,
    options: SimOptions,
) -> Result<Sweep, SimError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::InvalidArgument("grid must be non-empty and strictly increasing".into()));
    }
    let rows = grid
        .iter()
        .map(|&index| estimate_expectation(spec, family.rule(index), paths, seed, options))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep { family, grid: grid.to_vec(), rows, analytic_limit: analytic_limit_f64(spec) })
}

/// Limit expectation as a double, computed exactly first when the chain is rational.
pub fn analytic_limit_f64(spec: &ChainSpec) -> Result<ExtendedValue<f64>, String> {
    let convert = |v: ExtendedValue<BigRational>| match v {
        ExtendedValue::Finite(q) => ExtendedValue::Finite(q.to_f64()),
        ExtendedValue::PosInfinity => ExtendedValue::PosInfinity,
    };
    if spec.is_exact() {
        limit_expectation::<BigRational>(spec).map(convert).map_err(|e| e.to_string())
    } else {
        limit_expectation::<f64>(spec).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::Number;

    #[test]
    fn zero_truncation_stops_immediately() {
        let spec = ChainSpec::example1(4).unwrap();
        let rec = simulate_path(&spec, StoppingRule::Truncation { m: 0 }, 1, 0, DEFAULT_STEP_CAP).unwrap();
        assert_eq!(rec.stopping_time, 0);
        assert_eq!(rec.terminal_state, 4);
        assert!(rec.visits.is_empty());
    }

    #[test]
    fn paths_are_reproducible_and_consistent() {
        let spec = ChainSpec::example1(3).unwrap();
        let rule = StoppingRule::Truncation { m: 500 };
        for i in 0..50 {
            let a = simulate_path(&spec, rule, 7, i, DEFAULT_STEP_CAP).unwrap();
            let b = simulate_path(&spec, rule, 7, i, DEFAULT_STEP_CAP).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.terminal_state as i64, 3 + a.right_steps as i64 - a.left_steps as i64);
            assert_eq!(a.visits.values().sum::<u64>(), a.stopping_time);
            assert!(!a.visits.contains_key(&0));
        }
    }

    #[test]
    fn step_cap_is_reported() {
        let spec = ChainSpec::constant_drift(Number::ratio(9, 10), 1).unwrap();
        let rec = simulate_path(&spec, StoppingRule::IntervalExit { b: 1_000_000 }, 3, 0, 100).unwrap();
        assert!(rec.cap_hit);
        assert_eq!(rec.stopping_time, 100);
        let est = estimate_expectation(
            &spec,
            StoppingRule::IntervalExit { b: 1_000_000 },
            20,
            3,
            SimOptions { workers: 1, step_cap: 100 },
        )
        .unwrap();
        assert!(est.cap_hits > 0);
        assert_eq!(est.paths + est.cap_hits, 20);
    }

    #[test]
    fn symmetric_interval_exit_is_fair() {
        let spec = ChainSpec::simple_symmetric(1).unwrap();
        let est = estimate_expectation(&spec, StoppingRule::IntervalExit { b: 2 }, 100_000, 11, SimOptions::default())
            .unwrap();
        // Terminal is 0 or 2, so P(terminal = 2) = mean / 2.
        let p = est.mean / 2.0;
        assert!((p - 0.5).abs() < 3.0 * est.half_width_95 / 2.0, "{p}");
    }

    #[test]
    fn drifted_interval_exit_matches_ruin_probability() {
        let spec = ChainSpec::constant_drift(Number::ratio(2, 3), 1).unwrap();
        let est = estimate_expectation(&spec, StoppingRule::IntervalExit { b: 3 }, 100_000, 5, SimOptions::default())
            .unwrap();
        let p = est.mean / 3.0;
        assert!((p - 4.0 / 7.0).abs() < 3.0 * est.half_width_95 / 3.0, "{p}");
    }

    #[test]
    fn moments_merge_exactly() {
        let mut a = Moments::default();
        let mut b = Moments::default();
        for v in [3u64, 9, 0, 12] {
            a.push(v);
        }
        for v in [5u64, 1] {
            b.push(v);
        }
        assert_eq!(a.merge(b), b.merge(a));
        let (mean, _) = summarize(6, 30, 9 + 81 + 144 + 25 + 1);
        assert_eq!(mean, 5.0);
    }

    #[test]
    fn worker_count_does_not_change_estimates() {
        let spec = ChainSpec::example1(2).unwrap();
        let rule = StoppingRule::Truncation { m: 200 };
        let one = estimate_expectation(&spec, rule, 2000, 42, SimOptions { workers: 1, ..Default::default() }).unwrap();
        let four =
            estimate_expectation(&spec, rule, 2000, 42, SimOptions { workers: 4, ..Default::default() }).unwrap();
        assert_eq!(one, four);
        let occ1 = estimate_occupation(&spec, rule, 500, 42, SimOptions { workers: 1, ..Default::default() }).unwrap();
        let occ3 = estimate_occupation(&spec, rule, 500, 42, SimOptions { workers: 3, ..Default::default() }).unwrap();
        assert_eq!(occ1, occ3);
    }

    #[test]
    fn zero_truncation_occupation_is_empty() {
        let spec = ChainSpec::simple_symmetric(3).unwrap();
        let occ = estimate_occupation(&spec, StoppingRule::Truncation { m: 0 }, 10, 1, SimOptions::default()).unwrap();
        assert!(occ.profile.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn truncation_family_is_monotone_per_path() {
        let spec = ChainSpec::simple_symmetric(2).unwrap();
        for i in 0..20 {
            let mut last_time = 0;
            let mut records = Vec::new();
            for m in [1u64, 10, 100, 1000, 100_000] {
                let rec = simulate_path(&spec, StoppingRule::Truncation { m }, 99, i, DEFAULT_STEP_CAP).unwrap();
                assert!(rec.stopping_time >= last_time);
                last_time = rec.stopping_time;
                records.push(rec);
            }
            // Common random numbers: a path absorbed early keeps the same record.
            let absorbed: Vec<_> = records.iter().filter(|r| r.terminal_state == 0).collect();
            assert!(absorbed.windows(2).all(|w| w[0].stopping_time == w[1].stopping_time));
        }
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let spec = ChainSpec::simple_symmetric(3).unwrap();
        assert!(convergence_sweep(&spec, RuleFamily::Truncation, &[10, 10], 10, 1, SimOptions::default()).is_err());
        assert!(convergence_sweep(&spec, RuleFamily::Truncation, &[], 10, 1, SimOptions::default()).is_err());
    }

    #[test]
    fn too_few_paths() {
        let spec = ChainSpec::simple_symmetric(3).unwrap();
        assert!(estimate_expectation(&spec, StoppingRule::Truncation { m: 5 }, 1, 1, SimOptions::default()).is_err());
    }
}
