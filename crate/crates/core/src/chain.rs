//! Birth-death chain descriptions.
//!
//! A chain lives on `0, 1, 2, ...`. From `n >= 1` it moves to `n - 1` with
//! probability `l_n` and to `n + 1` with probability `r_n`; state 0 is
//! absorbing and is never described explicitly.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::ChainError;
use crate::number::Number;

/// Transition pair `(l_n, r_n)` of a non-absorbing state.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbPair {
    pub left: Number,
    pub right: Number,
}

impl ProbPair {
    pub fn new(left: Number, right: Number) -> Self {
        Self { left, right }
    }

    pub fn half() -> Self {
        Self::new(Number::half(), Number::half())
    }

    /// Pair with right-step probability `p`.
    pub fn with_right(p: &Number) -> Self {
        Self::new(p.one_minus(), p.clone())
    }

    pub fn is_exact(&self) -> bool {
        self.left.is_exact() && self.right.is_exact()
    }

    /// `r_n - l_n`, the one-step drift.
    pub fn drift(&self) -> Number {
        &self.right - &self.left
    }
}

/// Transitions beyond the last entry of a [`Family::Table`].
#[derive(Clone, Debug, PartialEq)]
pub enum TailRule {
    /// `l_n = r_n = 1/2`.
    Half,
    /// Constant right-step probability `p`.
    Constant(Number),
    /// The last table entry repeats forever.
    RepeatLast,
}

/// `l_n = P(n) / Q(n)` with integer polynomial coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalFormula {
    pub numerator: Vec<i64>,
    pub denominator: Vec<i64>,
}

impl RationalFormula {
    fn eval(coeffs: &[i64], n: u64) -> BigInt {
        let x = BigInt::from(n);
        coeffs.iter().rev().fold(BigInt::zero(), |acc, &c| acc * &x + BigInt::from(c))
    }

    pub(crate) fn eval_f64(coeffs: &[i64], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
    }

    fn combine(a: &[i64], a_scale: i64, b: &[i64], b_scale: i64) -> Vec<i64> {
        let len = a.len().max(b.len());
        (0..len).map(|i| a_scale * a.get(i).copied().unwrap_or(0) + b_scale * b.get(i).copied().unwrap_or(0)).collect()
    }

    /// Coefficients of `Q - P`, so that `r_n = (Q - P)(n) / Q(n)`.
    pub fn right_numerator(&self) -> Vec<i64> {
        Self::combine(&self.denominator, 1, &self.numerator, -1)
    }

    /// Coefficients of `2P - Q`, so that `l_n / r_n - 1 = (2P - Q)(n) / (Q - P)(n)`.
    pub fn excess_numerator(&self) -> Vec<i64> {
        Self::combine(&self.numerator, 2, &self.denominator, -1)
    }

    /// `ln(l_n / r_n)` evaluated without cancellation near `l_n = r_n`.
    pub fn log_ratio_f64(&self, n: u64) -> f64 {
        let x = n as f64;
        let excess = Self::eval_f64(&self.excess_numerator(), x);
        let right = Self::eval_f64(&self.right_numerator(), x);
        (excess / right).ln_1p()
    }

    pub fn left_at(&self, n: u64) -> Result<BigRational, ChainError> {
        let den = Self::eval(&self.denominator, n);
        if den.is_zero() {
            return Err(ChainError::DegenerateFormula(n));
        }
        Ok(BigRational::new(Self::eval(&self.numerator, n), den))
    }

    /// True when `l_n = 1/2` for every `n`, i.e. `2P = Q` as polynomials.
    pub fn is_identically_half(&self) -> bool {
        let len = self.numerator.len().max(self.denominator.len());
        (0..len).all(|i| {
            let p = *self.numerator.get(i).unwrap_or(&0) as i128;
            let q = *self.denominator.get(i).unwrap_or(&0) as i128;
            2 * p == q
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `l_n = r_n = 1/2`: simple random walk stopped at 0.
    SimpleSymmetric,
    /// Constant right-step probability `p`.
    ConstantDrift(Number),
    /// `l_n = n/(2n+1)`, `r_n = (n+1)/(2n+1)`.
    Example1,
    /// `Example1` with left and right exchanged.
    Example1Mirrored,
    /// Arbitrary pairs on `1..=M`, then `1/2` forever. `M` is the prefix length.
    EventuallyConstant(Vec<ProbPair>),
    /// Finite table on `1..=len` followed by an explicit tail rule.
    Table {
        table: Vec<ProbPair>,
        tail: TailRule,
    },
    RationalExpression(RationalFormula),
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::SimpleSymmetric => "simple-symmetric",
            Family::ConstantDrift(_) => "constant",
            Family::Example1 => "example1",
            Family::Example1Mirrored => "example1-mirrored",
            Family::EventuallyConstant(_) => "eventually-constant",
            Family::Table { .. } => "table",
            Family::RationalExpression(_) => "rational",
        }
    }
}

/// Full description of a chain: transition family plus start state `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    family: Family,
    start_state: u64,
    name: String,
}

impl ChainSpec {
    pub fn new(family: Family, start_state: u64) -> Result<Self, ChainError> {
        if start_state == 0 {
            return Err(ChainError::InvalidStartState(0));
        }
        match &family {
            Family::EventuallyConstant(prefix) if prefix.is_empty() => {
                return Err(ChainError::Structure("eventually-constant prefix must be non-empty".into()))
            }
            Family::Table { table, .. } if table.is_empty() => {
                return Err(ChainError::Structure("table must be non-empty".into()))
            }
            Family::RationalExpression(f) if f.numerator.is_empty() || f.denominator.is_empty() => {
                return Err(ChainError::Structure("formula needs numerator and denominator coefficients".into()))
            }
            _ => {}
        }
        Ok(Self { family, start_state, name: String::new() })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same transitions, different start state.
    pub fn with_start(&self, start_state: u64) -> Result<Self, ChainError> {
        Ok(Self::new(self.family.clone(), start_state)?.with_name(self.name.clone()))
    }

    pub fn simple_symmetric(k: u64) -> Result<Self, ChainError> {
        Self::new(Family::SimpleSymmetric, k)
    }

    pub fn constant_drift(p: Number, k: u64) -> Result<Self, ChainError> {
        Self::new(Family::ConstantDrift(p), k)
    }

    pub fn example1(k: u64) -> Result<Self, ChainError> {
        Self::new(Family::Example1, k)
    }

    pub fn example1_mirrored(k: u64) -> Result<Self, ChainError> {
        Self::new(Family::Example1Mirrored, k)
    }

    pub fn eventually_constant(prefix: Vec<ProbPair>, k: u64) -> Result<Self, ChainError> {
        Self::new(Family::EventuallyConstant(prefix), k)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn start_state(&self) -> u64 {
        self.start_state
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `(l_n, r_n)` for `n >= 1`.
    pub fn probs_at(&self, n: u64) -> Result<ProbPair, ChainError> {
        if n == 0 {
            return Err(ChainError::AbsorbingState);
        }
        let pair = match &self.family {
            Family::SimpleSymmetric => ProbPair::half(),
            Family::ConstantDrift(p) => ProbPair::with_right(p),
            Family::Example1 => {
                let d = 2 * n as i64 + 1;
                ProbPair::new(Number::ratio(n as i64, d), Number::ratio(n as i64 + 1, d))
            }
            Family::Example1Mirrored => {
                let d = 2 * n as i64 + 1;
                ProbPair::new(Number::ratio(n as i64 + 1, d), Number::ratio(n as i64, d))
            }
            Family::EventuallyConstant(prefix) => match prefix.get(n as usize - 1) {
                Some(pair) => pair.clone(),
                None => ProbPair::half(),
            },
            Family::Table { table, tail } => match table.get(n as usize - 1) {
                Some(pair) => pair.clone(),
                None => match tail {
                    TailRule::Half => ProbPair::half(),
                    TailRule::Constant(p) => ProbPair::with_right(p),
                    TailRule::RepeatLast => table[table.len() - 1].clone(),
                },
            },
            Family::RationalExpression(f) => {
                let left = f.left_at(n)?;
                let right = BigRational::from_integer(1.into()) - &left;
                ProbPair::new(Number::Exact(left), Number::Exact(right))
            }
        };
        Ok(pair)
    }

    /// `(l_n, r_n)` in double precision without building rationals.
    pub fn probs_f64(&self, n: u64) -> Result<(f64, f64), ChainError> {
        if n == 0 {
            return Err(ChainError::AbsorbingState);
        }
        let nf = n as f64;
        Ok(match &self.family {
            Family::SimpleSymmetric => (0.5, 0.5),
            Family::Example1 => (nf / (2.0 * nf + 1.0), (nf + 1.0) / (2.0 * nf + 1.0)),
            Family::Example1Mirrored => ((nf + 1.0) / (2.0 * nf + 1.0), nf / (2.0 * nf + 1.0)),
            Family::RationalExpression(f) => {
                let p = RationalFormula::eval_f64(&f.numerator, nf);
                let q = RationalFormula::eval_f64(&f.denominator, nf);
                if q == 0.0 {
                    return Err(ChainError::DegenerateFormula(n));
                }
                let r = RationalFormula::eval_f64(&f.right_numerator(), nf);
                (p / q, r / q)
            }
            _ => {
                let pair = self.probs_at(n)?;
                (pair.left.to_f64(), pair.right.to_f64())
            }
        })
    }

    /// True when every parameter is an exact rational.
    pub fn is_exact(&self) -> bool {
        match &self.family {
            Family::SimpleSymmetric | Family::Example1 | Family::Example1Mirrored | Family::RationalExpression(_) => {
                true
            }
            Family::ConstantDrift(p) => p.is_exact(),
            Family::EventuallyConstant(prefix) => prefix.iter().all(ProbPair::is_exact),
            Family::Table { table, tail } => {
                table.iter().all(ProbPair::is_exact)
                    && match tail {
                        TailRule::Constant(p) => p.is_exact(),
                        _ => true,
                    }
            }
        }
    }

    /// For chains whose transitions are constant from some state on, returns
    /// `(L, pair)` such that `probs_at(n) == pair` for every `n > L`.
    pub fn constant_tail(&self) -> Option<(u64, ProbPair)> {
        match &self.family {
            Family::SimpleSymmetric => Some((0, ProbPair::half())),
            Family::ConstantDrift(p) => Some((0, ProbPair::with_right(p))),
            Family::EventuallyConstant(prefix) => Some((prefix.len() as u64, ProbPair::half())),
            Family::Table { table, tail } => {
                let pair = match tail {
                    TailRule::Half => ProbPair::half(),
                    TailRule::Constant(p) => ProbPair::with_right(p),
                    TailRule::RepeatLast => table[table.len() - 1].clone(),
                };
                Some((table.len() as u64, pair))
            }
            Family::RationalExpression(f) if f.is_identically_half() => Some((0, ProbPair::half())),
            _ => None,
        }
    }

    /// Checks the transition invariants on states `1..=probe_depth`.
    pub fn validate(&self, probe_depth: u64) -> ValidationReport {
        if self.start_state == 0 {
            return ValidationReport::violation(0, 0, ViolationKind::InvalidStartState);
        }
        // Past a constant tail every state repeats the tail pair.
        let depth = match self.constant_tail() {
            Some((l, _)) => probe_depth.min(l + 1),
            None => probe_depth,
        };
        for n in 1..=depth {
            let pair = match self.probs_at(n) {
                Ok(p) => p,
                Err(_) => return ValidationReport::violation(n, n, ViolationKind::Undefined),
            };
            if let Some(kind) = check_pair(&pair) {
                return ValidationReport::violation(n, n, kind);
            }
        }
        ValidationReport { checked_through: probe_depth, violation: None }
    }
}

/// Tolerance on `l + r = 1` for double-valued pairs.
pub const FLOAT_NORMALIZATION_TOL: f64 = 1e-15;

fn check_pair(pair: &ProbPair) -> Option<ViolationKind> {
    let (l, r) = (&pair.left, &pair.right);
    if !l.is_positive() || !r.is_positive() {
        return Some(ViolationKind::NotStrictlyPositive);
    }
    let normalized = if pair.is_exact() {
        (l + r) == Number::one()
    } else {
        let (lf, rf) = (l.to_f64(), r.to_f64());
        lf.is_finite() && rf.is_finite() && ((lf + rf) - 1.0).abs() <= FLOAT_NORMALIZATION_TOL
    };
    if !normalized {
        return Some(ViolationKind::NotNormalized);
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NotNormalized,
    NotStrictlyPositive,
    InvalidStartState,
    Undefined,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::NotNormalized => "not normalized",
            ViolationKind::NotStrictlyPositive => "probability not strictly positive",
            ViolationKind::InvalidStartState => "invalid start state",
            ViolationKind::Undefined => "transition probability undefined",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub state: u64,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    /// States `1..=checked_through` were inspected (or implied by a constant tail).
    pub checked_through: u64,
    pub violation: Option<Violation>,
}

impl ValidationReport {
    fn violation(checked_through: u64, state: u64, kind: ViolationKind) -> Self {
        Self { checked_through, violation: Some(Violation { state, kind }) }
    }

    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(f, "valid through state {}", self.checked_through),
            Some(v) => write!(f, "violation at n={}: {}", v.state, v.kind),
        }
    }
}
