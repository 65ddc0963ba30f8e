//! Closed-form and series quantities of a birth-death chain.
//!
//! Everything is expressed through the ratio sequence
//! `t_0 = 1`, `t_n = (l_1 ... l_n) / (r_1 ... r_n)` and its prefix sums
//! `x_n = t_0 + ... + t_{n-1}`. Functions generic over [`Scalar`] run exactly
//! with `BigRational` and in double precision with `f64`.

use std::fmt;

use crate::chain::{ChainSpec, Family};
use crate::error::AnalyticsError;
use crate::montecarlo::StoppingRule;
use crate::number::{ExtendedValue, Number, Scalar};

/// Default relative oscillation under which a numeric `t_n` counts as converged.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-9;
/// Default number of terms for numeric series and tail checks.
pub const DEFAULT_HORIZON: u64 = 1_000_000;
/// `t_n` below this (and decreasing) is classified as tending to zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;
/// `t_n` above this (and increasing) is classified as diverging.
pub const INFINITE_THRESHOLD: f64 = 1e12;

/// Limit of `t_n`.
#[derive(Clone, Debug, PartialEq)]
pub enum TailKind {
    PositiveFinite(Number),
    Zero,
    Infinite,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailClass {
    pub kind: TailKind,
    pub evidence: String,
}

impl TailClass {
    fn new(kind: TailKind, evidence: impl Into<String>) -> Self {
        Self { kind, evidence: evidence.into() }
    }

    pub fn is_determined(&self) -> bool {
        self.kind != TailKind::Undetermined
    }
}

impl fmt::Display for TailKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailKind::PositiveFinite(v) => write!(f, "positive-finite({v})"),
            TailKind::Zero => f.write_str("zero"),
            TailKind::Infinite => f.write_str("infinite"),
            TailKind::Undetermined => f.write_str("undetermined"),
        }
    }
}

/// Prefix of the ratio sequence: `t[0..=N]`, `x[0..=N+1]`.
#[derive(Clone, Debug)]
pub struct RatioTable<S> {
    pub t: Vec<S>,
    pub x: Vec<S>,
    pub tail: TailClass,
}

/// `t[0..=n]` and `x[0..=n+1]` without classifying the tail.
pub fn ratio_sequences<S: Scalar>(spec: &ChainSpec, n: u64) -> Result<(Vec<S>, Vec<S>), AnalyticsError> {
    let mut t = Vec::with_capacity(n as usize + 1);
    t.push(S::one());
    for i in 1..=n {
        let pair = spec.probs_at(i)?;
        let next = t[i as usize - 1].clone() * S::from_number(&pair.left) / S::from_number(&pair.right);
        if next.is_zero() {
            return Err(AnalyticsError::Underflow(i));
        }
        t.push(next);
    }
    let mut x = Vec::with_capacity(t.len() + 1);
    x.push(S::zero());
    for ti in &t {
        let last = x[x.len() - 1].clone();
        x.push(last + ti.clone());
    }
    Ok((t, x))
}

pub fn ratio_table<S: Scalar>(spec: &ChainSpec, n: u64) -> Result<RatioTable<S>, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::InvalidArgument("ratio table needs N >= 1".into()));
    }
    let (t, x) = ratio_sequences(spec, n)?;
    let tail = classify_tail(spec, DEFAULT_TAIL_TOLERANCE, DEFAULT_HORIZON);
    Ok(RatioTable { t, x, tail })
}

/// `ln(l_n / r_n)` in double precision.
fn log_ratio(spec: &ChainSpec, n: u64) -> Result<f64, AnalyticsError> {
    if let Family::RationalExpression(f) = spec.family() {
        return Ok(f.log_ratio_f64(n));
    }
    let (l, r) = spec.probs_f64(n)?;
    Ok((l / r).ln())
}

/// `ln t_n` for `n = 0..=horizon`.
fn log_ratio_prefix(spec: &ChainSpec, horizon: u64) -> Result<Vec<f64>, AnalyticsError> {
    let mut logs = Vec::with_capacity(horizon as usize + 1);
    logs.push(0.0);
    let mut acc = 0.0;
    for n in 1..=horizon {
        acc += log_ratio(spec, n)?;
        logs.push(acc);
    }
    Ok(logs)
}

/// Product `l_1 ... l_L / (r_1 ... r_L)` as a [`Number`].
fn ratio_product(spec: &ChainSpec, len: u64) -> Result<Number, AnalyticsError> {
    let mut prod = Number::one();
    for n in 1..=len {
        let pair = spec.probs_at(n)?;
        prod = &(&prod * &pair.left) / &pair.right;
    }
    Ok(prod)
}

/// Classifies `lim t_n`.
///
/// Families with a known tail are classified symbolically; rational
/// expressions get a numeric verdict from the last `horizon / 10` terms.
pub fn classify_tail(spec: &ChainSpec, tolerance: f64, horizon: u64) -> TailClass {
    match spec.family() {
        Family::Example1 => return TailClass::new(TailKind::Zero, "t_n = 1/(n+1)"),
        Family::Example1Mirrored => return TailClass::new(TailKind::Infinite, "t_n = n+1"),
        _ => {}
    }
    if let Some((len, pair)) = spec.constant_tail() {
        return match pair.left.partial_cmp(&pair.right) {
            Some(std::cmp::Ordering::Equal) => match ratio_product(spec, len) {
                Ok(v) => TailClass::new(
                    TailKind::PositiveFinite(v),
                    format!("l_n = r_n for n > {len}; t_n constant from n = {len}"),
                ),
                Err(e) => TailClass::new(TailKind::Undetermined, e.to_string()),
            },
            Some(std::cmp::Ordering::Less) => TailClass::new(
                TailKind::Zero,
                format!("geometric decay: l/r = {} < 1 for n > {len}", &pair.left / &pair.right),
            ),
            Some(std::cmp::Ordering::Greater) => TailClass::new(
                TailKind::Infinite,
                format!("geometric growth: l/r = {} > 1 for n > {len}", &pair.left / &pair.right),
            ),
            None => TailClass::new(TailKind::Undetermined, "non-comparable tail probabilities"),
        };
    }
    classify_numerically(spec, tolerance, horizon)
}

fn classify_numerically(spec: &ChainSpec, tolerance: f64, horizon: u64) -> TailClass {
    let horizon = horizon.max(10);
    let logs = match log_ratio_prefix(spec, horizon) {
        Ok(l) => l,
        Err(e) => return TailClass::new(TailKind::Undetermined, e.to_string()),
    };
    let window = &logs[(horizon - horizon / 10) as usize..];
    let last = *window.last().unwrap();
    let decreasing = window.windows(2).all(|w| w[1] < w[0]);
    let increasing = window.windows(2).all(|w| w[1] > w[0]);
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let oscillation = (hi - lo).exp_m1();
    let evidence = format!(
        "t_{horizon} = {:e}; relative oscillation over last {} terms = {oscillation:e}",
        last.exp(),
        window.len()
    );
    if last < ZERO_THRESHOLD.ln() && decreasing {
        TailClass::new(TailKind::Zero, evidence)
    } else if last > INFINITE_THRESHOLD.ln() && increasing {
        TailClass::new(TailKind::Infinite, evidence)
    } else if oscillation < tolerance {
        TailClass::new(TailKind::PositiveFinite(Number::Float(last.exp())), evidence)
    } else {
        TailClass::new(TailKind::Undetermined, evidence)
    }
}

/// Probabilities of exiting `(a, b)` through `a` and through `b` from `start`.
pub fn exit_probabilities<S: Scalar>(spec: &ChainSpec, a: u64, start: u64, b: u64) -> Result<(S, S), AnalyticsError> {
    if !(a < start && start < b) {
        return Err(AnalyticsError::InvalidInterval { a, start, b });
    }
    let (t, _) = ratio_sequences::<S>(spec, b - 1)?;
    exit_probabilities_from_ratios(&t, a, start, b)
}

/// As [`exit_probabilities`], reusing a ratio prefix `t[0..b]`.
pub fn exit_probabilities_from_ratios<S: Scalar>(
    t: &[S],
    a: u64,
    start: u64,
    b: u64,
) -> Result<(S, S), AnalyticsError> {
    if !(a < start && start < b) || t.len() < b as usize {
        return Err(AnalyticsError::InvalidInterval { a, start, b });
    }
    let sum = |from: u64, to: u64| S::sum_all(t[from as usize..to as usize].iter().cloned());
    let total = sum(a, b);
    let hit_a = sum(start, b) / total.clone();
    let hit_b = sum(a, start) / total;
    Ok((hit_a, hit_b))
}

/// Exit probabilities of `(0, b)` from every start `1..b`, sharing one prefix
/// sum of the ratio sequence; entry `i` belongs to start `i + 1`.
pub fn exit_probability_table<S: Scalar>(spec: &ChainSpec, b: u64) -> Result<Vec<(S, S)>, AnalyticsError> {
    if b < 2 {
        return Err(AnalyticsError::InvalidInterval { a: 0, start: 1, b });
    }
    let (t, x) = ratio_sequences::<S>(spec, b - 1)?;
    let total = if S::EXACT { x[b as usize].clone() } else { S::sum_all(t.iter().cloned()) };
    Ok((1..b)
        .map(|start| {
            let below = x[start as usize].clone();
            let above =
                if S::EXACT { total.clone() - below.clone() } else { S::sum_all(t[start as usize..].iter().cloned()) };
            (above / total.clone(), below / total.clone())
        })
        .collect())
}

/// Probability of ever reaching 0 from the start state.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtinctionProbability {
    /// Decided analytically.
    ClosedForm {
        value: Number,
        reason: String,
    },
    /// Partial sums plus an estimated tail contribution.
    Series {
        value: f64,
        tail_bound: f64,
        terms: u64,
        reason: String,
    },
    Inconclusive(String),
}

impl ExtinctionProbability {
    pub fn value_f64(&self) -> Option<f64> {
        match self {
            ExtinctionProbability::ClosedForm { value, .. } => Some(value.to_f64()),
            ExtinctionProbability::Series { value, .. } => Some(*value),
            ExtinctionProbability::Inconclusive(_) => None,
        }
    }

    /// `Some(true)` when extinction is certain, `Some(false)` when it is not.
    pub fn is_certain(&self) -> Option<bool> {
        match self {
            ExtinctionProbability::ClosedForm { value, .. } => Some(*value == Number::one() || value.to_f64() == 1.0),
            ExtinctionProbability::Series { value, tail_bound, .. } => Some(*value == 1.0 && *tail_bound == 0.0),
            ExtinctionProbability::Inconclusive(_) => None,
        }
    }
}

fn power(base: &Number, exp: u64) -> Number {
    let mut result = Number::one();
    let mut b = base.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &b;
        }
        b = &b * &b;
        e >>= 1;
    }
    result
}

/// `P(X hits 0) = (sum_{n>=k} t_n) / (sum_{n>=0} t_n)`, equal to 1 when the sums diverge.
pub fn extinction_probability(spec: &ChainSpec, series_horizon: u64, tolerance: f64) -> ExtinctionProbability {
    let certain = |reason: &str| ExtinctionProbability::ClosedForm { value: Number::one(), reason: reason.into() };
    match spec.family() {
        Family::Example1 => return certain("t_n = 1/(n+1) is not summable"),
        Family::Example1Mirrored => return certain("t_n = n+1 is not summable"),
        _ => {}
    }
    if let Some((len, pair)) = spec.constant_tail() {
        if pair.left >= pair.right {
            return certain("t_n is bounded below by a positive constant");
        }
        return match geometric_extinction(spec, len, &pair.left, &pair.right) {
            Ok(value) => ExtinctionProbability::ClosedForm {
                value,
                reason: format!("geometric tail with ratio l/r < 1 beyond n = {len}"),
            },
            Err(e) => ExtinctionProbability::Inconclusive(e.to_string()),
        };
    }
    numeric_extinction(spec, series_horizon, tolerance)
}

fn geometric_extinction(spec: &ChainSpec, len: u64, left: &Number, right: &Number) -> Result<Number, AnalyticsError> {
    let rho = left / right;
    let one = Number::one();
    let mut t = vec![Number::one()];
    for n in 1..=len {
        let pair = spec.probs_at(n)?;
        let next = &(&t[n as usize - 1] * &pair.left) / &pair.right;
        t.push(next);
    }
    let t_len = t[len as usize].clone();
    let geometric_tail = &t_len / &(&one - &rho);
    let head = |upto: u64| t[..upto as usize].iter().fold(Number::zero(), |acc, v| &acc + v);
    let total = &head(len) + &geometric_tail;
    let k = spec.start_state();
    let upper = if k >= len { &(&t_len * &power(&rho, k - len)) / &(&one - &rho) } else { &total - &head(k) };
    Ok(&upper / &total)
}

/// Local power-law exponent of a positive sequence from its logs at `n/2` and `n`.
fn decay_exponent(log_half: f64, log_full: f64) -> f64 {
    -(log_full - log_half) / std::f64::consts::LN_2
}

fn numeric_extinction(spec: &ChainSpec, horizon: u64, tolerance: f64) -> ExtinctionProbability {
    let horizon = horizon.max(10);
    let tail = classify_numerically(spec, DEFAULT_TAIL_TOLERANCE, horizon);
    if matches!(tail.kind, TailKind::PositiveFinite(_) | TailKind::Infinite) {
        return ExtinctionProbability::Series {
            value: 1.0,
            tail_bound: 0.0,
            terms: horizon,
            reason: format!("t_n does not tend to zero ({}), sums diverge", tail.evidence),
        };
    }
    let logs = match log_ratio_prefix(spec, horizon) {
        Ok(l) => l,
        Err(e) => return ExtinctionProbability::Inconclusive(e.to_string()),
    };
    let s = decay_exponent(logs[horizon as usize / 2], logs[horizon as usize]);
    if s < 0.9 {
        return ExtinctionProbability::Series {
            value: 1.0,
            tail_bound: 0.0,
            terms: horizon,
            reason: format!("t_n decays like n^-{s:.3}, slower than 1/n: sums diverge"),
        };
    }
    if s <= 1.1 {
        return ExtinctionProbability::Inconclusive(format!(
            "decay exponent of t_n is {s:.4} at n = {horizon}, too close to 1 to decide summability"
        ));
    }
    // Scale by the largest term so partial sums stay finite.
    let scale = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = logs.iter().map(|l| (l - scale).exp()).collect();
    let last = terms[horizon as usize];
    let ratio = (logs[horizon as usize] - logs[horizon as usize - 1]).exp();
    let power_tail = last * horizon as f64 / (s - 1.0);
    let tail_bound = if ratio < 1.0 { power_tail.min(last * ratio / (1.0 - ratio)).max(0.0) } else { power_tail };
    let k = spec.start_state().min(horizon) as usize;
    let total = f64::sum_all(terms.iter().copied()) + tail_bound;
    let upper = f64::sum_all(terms[k..].iter().copied()) + tail_bound;
    let value = upper / total;
    let relative = tail_bound / total;
    if relative > tolerance {
        return ExtinctionProbability::Inconclusive(format!(
            "tail estimate {relative:e} of the total exceeds tolerance {tolerance:e} after {horizon} terms"
        ));
    }
    ExtinctionProbability::Series {
        value,
        tail_bound: relative,
        terms: horizon,
        reason: format!("t_n decays like n^-{s:.3}; tail estimated beyond n = {horizon}"),
    }
}

fn require_recurrent(spec: &ChainSpec) -> Result<(), AnalyticsError> {
    let ext = extinction_probability(spec, DEFAULT_HORIZON, DEFAULT_TAIL_TOLERANCE);
    match ext.is_certain() {
        Some(true) => Ok(()),
        Some(false) => Err(AnalyticsError::Transient),
        None => match ext {
            ExtinctionProbability::Inconclusive(d) => Err(AnalyticsError::Inconclusive(d)),
            _ => unreachable!(),
        },
    }
}

/// Stopping regime an occupation profile was computed under.
#[derive(Clone, Debug, PartialEq)]
pub enum Regime {
    UntilExtinction,
    UnderRule(StoppingRule),
}

/// Expected visit counts `E[G_T^n]` for states `1..=values.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationProfile<S> {
    pub start: u64,
    /// `values[i]` belongs to state `i + 1`.
    pub values: Vec<S>,
    pub regime: Regime,
}

impl<S: Scalar> OccupationProfile<S> {
    pub fn value(&self, state: u64) -> Option<&S> {
        if state == 0 {
            return None;
        }
        self.values.get(state as usize - 1)
    }

    pub fn max_state(&self) -> u64 {
        self.values.len() as u64
    }
}

/// `E[G^n_{T_D}] = min(x_n, x_k) / (t_{n-1} l_n)`: expected visits to `n` before extinction.
pub fn occupation_until_extinction<S: Scalar>(spec: &ChainSpec, n: u64) -> Result<S, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::InvalidArgument("occupation is defined for n >= 1".into()));
    }
    require_recurrent(spec)?;
    let k = spec.start_state();
    let (t, x) = ratio_sequences::<S>(spec, n.max(k))?;
    lemma3_value(spec, &t, &x, k, n)
}

fn lemma3_value<S: Scalar>(spec: &ChainSpec, t: &[S], x: &[S], k: u64, n: u64) -> Result<S, AnalyticsError> {
    let xn = &x[n as usize];
    let xk = &x[k as usize];
    let min = if xn < xk { xn.clone() } else { xk.clone() };
    let left = S::from_number(&spec.probs_at(n)?.left);
    Ok(min / (t[n as usize - 1].clone() * left))
}

/// [`occupation_until_extinction`] for every state `1..=max_state`.
pub fn occupation_profile_until_extinction<S: Scalar>(
    spec: &ChainSpec,
    max_state: u64,
) -> Result<OccupationProfile<S>, AnalyticsError> {
    require_recurrent(spec)?;
    let k = spec.start_state();
    let (t, x) = ratio_sequences::<S>(spec, max_state.max(k))?;
    let values = (1..=max_state).map(|n| lemma3_value(spec, &t, &x, k, n)).collect::<Result<Vec<_>, _>>()?;
    Ok(OccupationProfile { start: k, values, regime: Regime::UntilExtinction })
}

/// `lim E[X_{T_m}] = x_k / t_inf`, with `0` when `t_inf = inf` and `+inf` when `t_inf = 0`
/// or the chain is transient.
pub fn limit_expectation<S: Scalar>(spec: &ChainSpec) -> Result<ExtendedValue<S>, AnalyticsError> {
    let tail = classify_tail(spec, DEFAULT_TAIL_TOLERANCE, DEFAULT_HORIZON);
    match tail.kind {
        TailKind::Undetermined => Err(AnalyticsError::UndeterminedTail(tail.evidence)),
        // Covers transient chains too: extinction < 1 forces t_n -> 0.
        TailKind::Zero => Ok(ExtendedValue::PosInfinity),
        TailKind::Infinite => Ok(ExtendedValue::Finite(S::zero())),
        TailKind::PositiveFinite(limit) => {
            let k = spec.start_state();
            let (_, x) = ratio_sequences::<S>(spec, k)?;
            Ok(ExtendedValue::Finite(x[k as usize].clone() / S::from_number(&limit)))
        }
    }
}

/// Right side of the stopping identity `E[X_T] = k + sum_n E[G_T^n] (r_n - l_n)`.
pub fn stopping_identity_rhs<S: Scalar>(profile: &OccupationProfile<S>, spec: &ChainSpec) -> Result<S, AnalyticsError> {
    if profile.start != spec.start_state() {
        return Err(AnalyticsError::InvalidArgument(format!(
            "profile starts at {} but the chain starts at {}",
            profile.start,
            spec.start_state()
        )));
    }
    let mut terms = Vec::with_capacity(profile.values.len());
    for (i, g) in profile.values.iter().enumerate() {
        if !g.to_f64().is_finite() {
            return Err(AnalyticsError::NonSummable(format!("non-finite occupation at state {}", i + 1)));
        }
        let drift = S::from_number(&spec.probs_at(i as u64 + 1)?.drift());
        terms.push(g.clone() * drift);
    }
    Ok(S::from_u64(spec.start_state()) + S::sum_all(terms))
}

/// `values[n] * t_{n-1} * l_n` for every state in the profile.
pub fn normalized_occupation<S: Scalar>(
    profile: &OccupationProfile<S>,
    spec: &ChainSpec,
) -> Result<Vec<S>, AnalyticsError> {
    let max = profile.max_state();
    if max == 0 {
        return Ok(Vec::new());
    }
    let (t, _) = ratio_sequences::<S>(spec, max)?;
    profile
        .values
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let left = S::from_number(&spec.probs_at(i as u64 + 1)?.left);
            Ok(g.clone() * t[i].clone() * left)
        })
        .collect()
}

/// First state `n >= k` where the normalized occupation fails to decrease strictly,
/// among consecutive pairs that are both positive.
pub fn monotonicity_violation<S: Scalar>(
    profile: &OccupationProfile<S>,
    spec: &ChainSpec,
) -> Result<Option<u64>, AnalyticsError> {
    let normalized = normalized_occupation(profile, spec)?;
    let k = profile.start as usize;
    for n in k..normalized.len() {
        let (cur, next) = (&normalized[n - 1], &normalized[n]);
        if cur > &S::zero() && next > &S::zero() && cur.partial_cmp(next) != Some(std::cmp::Ordering::Greater) {
            return Ok(Some(n as u64));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriterionVerdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl fmt::Display for CriterionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriterionVerdict::Satisfied => "satisfied",
            CriterionVerdict::Violated => "violated",
            CriterionVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// Verdict on `sum_n |1 - l_n / r_n| < inf` with partial-sum evidence.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub verdict: CriterionVerdict,
    pub partial_sum: f64,
    pub terms: u64,
    pub evidence: String,
}

fn criterion_term(spec: &ChainSpec, n: u64) -> Result<f64, AnalyticsError> {
    if let Family::RationalExpression(f) = spec.family() {
        let x = n as f64;
        let excess = crate::chain::RationalFormula::eval_f64(&f.excess_numerator(), x);
        let right = crate::chain::RationalFormula::eval_f64(&f.right_numerator(), x);
        return Ok((excess / right).abs());
    }
    let (l, r) = spec.probs_f64(n)?;
    Ok(((r - l) / r).abs())
}

pub fn convergence_criterion(spec: &ChainSpec, horizon: u64) -> Result<CriterionReport, AnalyticsError> {
    let horizon = horizon.max(10);
    let mut terms = Vec::with_capacity(horizon as usize);
    for n in 1..=horizon {
        terms.push(criterion_term(spec, n)?);
    }
    let partial_sum = f64::sum_all(terms.iter().copied());
    let report = |verdict, evidence: String| CriterionReport { verdict, partial_sum, terms: horizon, evidence };

    let symbolic = match spec.family() {
        Family::Example1 | Family::Example1Mirrored => {
            Some((CriterionVerdict::Violated, "|1 - l_n/r_n| is of order 1/n: harmonic divergence".to_string()))
        }
        Family::RationalExpression(f) if !f.is_identically_half() => None,
        _ => spec.constant_tail().map(|(len, pair)| {
            if pair.left == pair.right {
                (CriterionVerdict::Satisfied, format!("terms vanish for n > {len}"))
            } else {
                (
                    CriterionVerdict::Violated,
                    format!(
                        "terms equal {} > 0 for every n > {len}",
                        (&Number::one() - &(&pair.left / &pair.right)).to_f64().abs()
                    ),
                )
            }
        }),
    };
    if let Some((verdict, evidence)) = symbolic {
        return Ok(report(verdict, format!("{evidence}; partial sum over {horizon} terms = {partial_sum:.6}")));
    }

    let last = terms[horizon as usize - 1];
    let half = terms[horizon as usize / 2 - 1];
    if last == 0.0 && half == 0.0 {
        return Ok(report(CriterionVerdict::Satisfied, "terms vanish in the tail".into()));
    }
    if last == 0.0 || half == 0.0 {
        return Ok(report(CriterionVerdict::Inconclusive, "terms vanish intermittently".into()));
    }
    let s = decay_exponent(half.ln(), last.ln());
    let evidence = format!("term decay exponent {s:.4} at n = {horizon}; partial sum = {partial_sum:.6}");
    Ok(if s > 1.1 {
        report(
            CriterionVerdict::Satisfied,
            format!("{evidence}; tail estimate {:e}", last * horizon as f64 / (s - 1.0)),
        )
    } else if s < 0.9 {
        report(CriterionVerdict::Violated, evidence)
    } else {
        report(CriterionVerdict::Inconclusive, evidence)
    })
}
