//! Brute-force reference computations on a chain truncated to `0..=N`.
//!
//! Both 0 and `N` are absorbing. Nothing here uses the ratio sequence: exit
//! probabilities and occupation counts come from direct tridiagonal
//! elimination and distributions from step-by-step forward evolution, so the
//! results can be compared against the closed forms in [`crate::analytics`].

use crate::analytics::{OccupationProfile, Regime};
use crate::chain::ChainSpec;
use crate::error::OracleError;
use crate::montecarlo::StoppingRule;
use crate::number::{NeumaierSum, Number, Scalar};

/// Default bound on the escape probability when picking a truncation level.
pub const DEFAULT_ESCAPE_BOUND: f64 = 1e-10;

/// Chain on `0..=N` with absorbing ends.
#[derive(Clone, Debug)]
pub struct TruncatedChainModel<S> {
    level: usize,
    /// `left[i]`, `right[i]` belong to state `i + 1`, for states `1..N`.
    left: Vec<S>,
    right: Vec<S>,
}

impl<S: Scalar> TruncatedChainModel<S> {
    pub fn from_spec(spec: &ChainSpec, level: usize) -> Result<Self, OracleError> {
        if level < 2 {
            return Err(OracleError::Degenerate(level));
        }
        let mut left = Vec::with_capacity(level - 1);
        let mut right = Vec::with_capacity(level - 1);
        for n in 1..level as u64 {
            let pair = spec.probs_at(n)?;
            left.push(S::from_number(&pair.left));
            right.push(S::from_number(&pair.right));
        }
        Ok(Self { level, left, right })
    }

    /// `(l_n, r_n)` for the interior states `1..N`.
    fn interior_parts(&self) -> (Vec<S>, Vec<S>) {
        (self.left.clone(), self.right.clone())
    }

    /// Truncation level `N`.
    pub fn level(&self) -> usize {
        self.level
    }

    /// `l_n` for `1 <= n < N`; zero elsewhere.
    pub fn left(&self, n: usize) -> S {
        if n >= 1 && n < self.level {
            self.left[n - 1].clone()
        } else {
            S::zero()
        }
    }

    /// `r_n` for `1 <= n < N`; zero elsewhere.
    pub fn right(&self, n: usize) -> S {
        if n >= 1 && n < self.level {
            self.right[n - 1].clone()
        } else {
            S::zero()
        }
    }

    fn check_interior(&self, start: usize) -> Result<(), OracleError> {
        if start == 0 || start >= self.level {
            return Err(OracleError::StartOutOfRange { start, max: self.level });
        }
        Ok(())
    }
}

/// Solves `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` by forward
/// elimination and back substitution.
fn solve_tridiagonal<S: Scalar>(sub: &[S], diag: &[S], sup: &[S], rhs: &[S]) -> Result<Vec<S>, OracleError> {
    let n = diag.len();
    let mut c: Vec<S> = Vec::with_capacity(n);
    let mut d: Vec<S> = Vec::with_capacity(n);
    for i in 0..n {
        let (pivot, carried) = if i == 0 {
            (diag[0].clone(), rhs[0].clone())
        } else {
            (diag[i].clone() - sub[i].clone() * c[i - 1].clone(), rhs[i].clone() - sub[i].clone() * d[i - 1].clone())
        };
        if near_singular(&pivot, &diag[i]) {
            return Err(OracleError::NearSingular(i));
        }
        c.push(sup[i].clone() / pivot.clone());
        d.push(carried / pivot);
    }
    let mut x = vec![S::zero(); n];
    x[n - 1] = d[n - 1].clone();
    for i in (0..n - 1).rev() {
        x[i] = d[i].clone() - c[i].clone() * x[i + 1].clone();
    }
    Ok(x)
}

/// Rounds of iterative refinement applied to floating-point solves.
const REFINEMENT_ROUNDS: usize = 2;

/// Float solves get iterative refinement with residuals accumulated from
/// error-free products; this recovers full precision on chains whose ratio
/// sequence spans many orders of magnitude. The diagonal is passed as the two
/// outflow parts `l_n + r_n` so each row conserves probability exactly even
/// when the stored `l_n` and `r_n` do not sum to one in floating point.
fn solve_refined<S: Scalar>(sub: &[S], diag_parts: (&[S], &[S]), sup: &[S], rhs: &[S]) -> Result<Vec<S>, OracleError> {
    let diag: Vec<S> = diag_parts.0.iter().zip(diag_parts.1).map(|(u, v)| u.clone() + v.clone()).collect();
    let mut x = solve_tridiagonal(sub, &diag, sup, rhs)?;
    if S::EXACT {
        return Ok(x);
    }
    let floats = |v: &[S]| v.iter().map(Scalar::to_f64).collect::<Vec<f64>>();
    let (a, d1, d2, c, r) = (floats(sub), floats(diag_parts.0), floats(diag_parts.1), floats(sup), floats(rhs));
    let n = d1.len();
    for _ in 0..REFINEMENT_ROUNDS {
        let xf = floats(&x);
        let residual: Vec<S> = (0..n)
            .map(|i| {
                let mut acc = NeumaierSum::default();
                acc.add(r[i]);
                subtract_product(&mut acc, d1[i], xf[i]);
                subtract_product(&mut acc, d2[i], xf[i]);
                if i > 0 {
                    subtract_product(&mut acc, a[i], xf[i - 1]);
                }
                if i + 1 < n {
                    subtract_product(&mut acc, c[i], xf[i + 1]);
                }
                S::from_number(&Number::Float(acc.value()))
            })
            .collect();
        let delta = solve_tridiagonal(sub, &diag, sup, &residual)?;
        x = x.into_iter().zip(delta).map(|(xi, di)| xi + di).collect();
    }
    Ok(x)
}

/// `acc -= u * v`, carrying the rounding error of the product.
fn subtract_product(acc: &mut NeumaierSum, u: f64, v: f64) {
    let p = u * v;
    acc.add(-p);
    acc.add(-u.mul_add(v, -p));
}

fn near_singular<S: Scalar>(pivot: &S, diag: &S) -> bool {
    if S::EXACT {
        pivot.is_zero()
    } else {
        pivot.to_f64().abs() <= 1e-14 * diag.to_f64().abs()
    }
}

/// First-step analysis: `h_n = l_n h_{n-1} + r_n h_{n+1}`, `h_0 = 1`, `h_N = 0`.
/// Returns `(P(hit 0 first), P(hit N first))` from `start`.
pub fn exit_probs_by_recursion<S: Scalar>(model: &TruncatedChainModel<S>, start: usize) -> Result<(S, S), OracleError> {
    model.check_interior(start)?;
    Ok(exit_probs_all_starts(model)?.swap_remove(start - 1))
}

/// Exit probabilities from every interior start `1..N`; entry `i` belongs to start `i + 1`.
pub fn exit_probs_all_starts<S: Scalar>(model: &TruncatedChainModel<S>) -> Result<Vec<(S, S)>, OracleError> {
    let size = model.level - 1;
    let sub: Vec<S> = (1..=size).map(|n| S::zero() - model.left(n)).collect();
    let sup: Vec<S> = (1..=size).map(|n| S::zero() - model.right(n)).collect();
    let (lefts, rights) = model.interior_parts();
    let mut rhs = vec![S::zero(); size];
    rhs[0] = model.left(1);
    let h = solve_refined(&sub, (&lefts, &rights), &sup, &rhs)?;
    Ok(h.into_iter().map(|p| (p.clone(), S::one() - p)).collect())
}

/// Row `start` of the fundamental matrix `(I - Q)^-1`: expected visits to each
/// state `1..N` before absorption at 0 or `N`.
pub fn occupation_by_fundamental_matrix<S: Scalar>(
    model: &TruncatedChainModel<S>,
    start: usize,
) -> Result<OccupationProfile<S>, OracleError> {
    model.check_interior(start)?;
    let size = model.level - 1;
    // Transposed system: g_n - r_{n-1} g_{n-1} - l_{n+1} g_{n+1} = [n == start].
    let sub: Vec<S> = (1..=size).map(|n| S::zero() - model.right(n - 1)).collect();
    let sup: Vec<S> = (1..=size).map(|n| S::zero() - model.left(n + 1)).collect();
    let (lefts, rights) = model.interior_parts();
    let mut rhs = vec![S::zero(); size];
    rhs[start - 1] = S::one();
    let values = solve_refined(&sub, (&lefts, &rights), &sup, &rhs)?;
    Ok(OccupationProfile {
        start: start as u64,
        values,
        regime: Regime::UnderRule(StoppingRule::IntervalExit { b: model.level as u64 }),
    })
}

/// Probability mass over `0..=N` at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionVector<S> {
    pub time: u64,
    pub mass: Vec<S>,
}

impl<S: Scalar> DistributionVector<S> {
    pub fn point_mass(level: usize, state: usize) -> Self {
        let mut mass = vec![S::zero(); level + 1];
        mass[state] = S::one();
        Self { time: 0, mass }
    }

    pub fn total(&self) -> S {
        S::sum_all(self.mass.iter().cloned())
    }
}

/// `sum_n n * P(X = n)`.
pub fn expected_value_of<S: Scalar>(dist: &DistributionVector<S>) -> S {
    S::sum_all(dist.mass.iter().enumerate().filter(|(n, _)| *n > 0).map(|(n, p)| S::from_u64(n as u64) * p.clone()))
}

/// Step-by-step forward evolution with running occupation expectations
/// `sum_{m' < m} P(X_{m'} = n)`.
#[derive(Clone, Debug)]
pub struct Evolver<'a, S> {
    model: &'a TruncatedChainModel<S>,
    start: usize,
    current: DistributionVector<S>,
    scratch: Vec<S>,
    occupation: Vec<S>,
    lo: usize,
    hi: usize,
}

impl<'a, S: Scalar> Evolver<'a, S> {
    pub fn new(model: &'a TruncatedChainModel<S>, start: usize) -> Result<Self, OracleError> {
        if start > model.level {
            return Err(OracleError::StartOutOfRange { start, max: model.level });
        }
        let current = DistributionVector::point_mass(model.level, start);
        Ok(Self {
            model,
            start,
            scratch: vec![S::zero(); model.level + 1],
            occupation: vec![S::zero(); model.level - 1],
            current,
            lo: start,
            hi: start,
        })
    }

    pub fn time(&self) -> u64 {
        self.current.time
    }

    pub fn distribution(&self) -> &DistributionVector<S> {
        &self.current
    }

    pub fn expected_value(&self) -> S {
        expected_value_of(&self.current)
    }

    /// Occupation expectations accumulated so far, states `1..N`.
    pub fn occupation(&self) -> OccupationProfile<S> {
        OccupationProfile {
            start: self.start as u64,
            values: self.occupation.clone(),
            regime: Regime::UnderRule(StoppingRule::TruncatedIntervalExit {
                m: self.current.time,
                b: self.model.level as u64,
            }),
        }
    }

    pub fn step(&mut self) {
        let level = self.model.level;
        let (lo, hi) = (self.lo, self.hi);
        let new_lo = lo.saturating_sub(1);
        let new_hi = (hi + 1).min(level);
        let old = &self.current.mass;
        let (first, last) = (lo.max(1), hi.min(level - 1));
        if first <= last {
            for (g, p) in self.occupation[first - 1..last].iter_mut().zip(&old[first..=last]) {
                *g = g.clone() + p.clone();
            }
        }
        for n in new_lo..=new_hi {
            let stay = if n == 0 || n == level { old[n].clone() } else { S::zero() };
            let from_below = if n >= 1 { self.model.right(n - 1) * old[n - 1].clone() } else { S::zero() };
            let from_above = if n < level { self.model.left(n + 1) * old[n + 1].clone() } else { S::zero() };
            self.scratch[n] = stay + from_below + from_above;
        }
        std::mem::swap(&mut self.current.mass, &mut self.scratch);
        self.current.time += 1;
        self.lo = new_lo;
        self.hi = new_hi;
    }
}

/// Result of evolving `steps` times: final distribution and occupation expectations.
#[derive(Clone, Debug)]
pub struct Evolution<S> {
    pub distribution: DistributionVector<S>,
    pub occupation: OccupationProfile<S>,
}

pub fn evolve_distribution<S: Scalar>(
    model: &TruncatedChainModel<S>,
    start: usize,
    steps: u64,
) -> Result<Evolution<S>, OracleError> {
    let mut evolver = Evolver::new(model, start)?;
    for _ in 0..steps {
        evolver.step();
    }
    Ok(Evolution { occupation: evolver.occupation(), distribution: evolver.current })
}

/// Truncation level that never binds before time `steps`: the chain started at
/// `start` cannot reach `N` in `steps` moves.
pub fn non_binding_level(start: u64, steps: u64) -> usize {
    (start + steps + 1).max(2) as usize
}

/// Smallest `N` whose escape probability from `start` (hitting `N` before 0)
/// falls below `bound`.
pub fn escape_truncation(spec: &ChainSpec, start: u64, bound: f64, limit: usize) -> Result<usize, OracleError> {
    // Running sums of the weights w_n = prod_{i<=n} l_i / r_i; escape = W(start) / W(N).
    let mut weight = 1.0_f64;
    let mut below_start = 0.0_f64;
    let mut total = 0.0_f64;
    for n in 0..limit as u64 {
        if n == start {
            below_start = total;
        }
        total += weight;
        if n + 1 > start && below_start / total < bound {
            return Ok(n as usize + 1);
        }
        let (l, r) = spec.probs_f64(n + 1)?;
        weight *= l / r;
        if weight < 1e-300 * total {
            let escape = if n + 1 > start { below_start / total } else { f64::NAN };
            return Err(OracleError::Transient(escape));
        }
    }
    Err(OracleError::TruncationTooLarge { bound, limit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ProbPair;
    use crate::number::Number;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    fn model<S: Scalar>(spec: &ChainSpec, level: usize) -> TruncatedChainModel<S> {
        TruncatedChainModel::from_spec(spec, level).unwrap()
    }

    #[test]
    fn exit_examples() {
        let srw = ChainSpec::simple_symmetric(1).unwrap();
        assert_eq!(exit_probs_by_recursion(&model::<Q>(&srw, 2), 1).unwrap(), (q(1, 2), q(1, 2)));

        let cd = ChainSpec::constant_drift(Number::ratio(2, 3), 1).unwrap();
        assert_eq!(exit_probs_by_recursion(&model::<Q>(&cd, 3), 1).unwrap(), (q(3, 7), q(4, 7)));

        let ex1 = ChainSpec::example1(1).unwrap();
        assert_eq!(exit_probs_by_recursion(&model::<Q>(&ex1, 4), 2).unwrap(), (q(7, 25), q(18, 25)));
    }

    #[test]
    fn exit_recursion_by_hand() {
        // Example1, N = 4: h1 = 1/3 + 2/3 h2, h2 = 2/5 h1 + 3/5 h3, h3 = 3/7 h2.
        // Substituting: h3 = 3/7 h2, h2 = 2/5 h1 + 9/35 h2 => h2 = 14/26 h1 = 7/13 h1,
        // h1 = 1/3 + 14/39 h1 => h1 = 13/25, h2 = 7/25.
        let ex1 = ChainSpec::example1(1).unwrap();
        let m = model::<Q>(&ex1, 4);
        assert_eq!(exit_probs_by_recursion(&m, 1).unwrap().0, q(13, 25));
        assert_eq!(exit_probs_by_recursion(&m, 3).unwrap().0, q(3, 25));
    }

    #[test]
    fn degenerate_models() {
        let srw = ChainSpec::simple_symmetric(1).unwrap();
        assert_eq!(TruncatedChainModel::<f64>::from_spec(&srw, 1).unwrap_err(), OracleError::Degenerate(1));
        let m = model::<f64>(&srw, 5);
        assert!(matches!(exit_probs_by_recursion(&m, 0), Err(OracleError::StartOutOfRange { .. })));
        assert!(matches!(exit_probs_by_recursion(&m, 5), Err(OracleError::StartOutOfRange { .. })));
    }

    #[test]
    fn symmetric_occupation_closed_form() {
        let srw = ChainSpec::simple_symmetric(3).unwrap();
        let level = 10;
        let profile = occupation_by_fundamental_matrix(&model::<Q>(&srw, level), 3).unwrap();
        assert_eq!(profile.value(2).unwrap(), &q(28, 10));
        // 2 min(n,k) (N - max(n,k)) / N for every interior state.
        for n in 1..level as i64 {
            let expected = q(2 * n.min(3) * (level as i64 - n.max(3)), level as i64);
            assert_eq!(profile.value(n as u64).unwrap(), &expected);
        }
    }

    #[test]
    fn start_state_visited_at_least_once() {
        let specs = [
            ChainSpec::example1(1).unwrap(),
            ChainSpec::example1_mirrored(1).unwrap(),
            ChainSpec::constant_drift(Number::ratio(2, 3), 1).unwrap(),
        ];
        for spec in &specs {
            let m = model::<f64>(spec, 30);
            for start in 1..30 {
                let profile = occupation_by_fundamental_matrix(&m, start).unwrap();
                assert!(*profile.value(start as u64).unwrap() >= 1.0);
                assert!(profile.values.iter().all(|v| *v > 0.0));
            }
        }
    }

    #[test]
    fn example1_occupation_at_moderate_truncation() {
        // Escape from 1 through 2 needs hitting N before 1: (1/2) / (H_N - 1).
        // Visits to 1 are geometric with return-failure l_1 + r_1 * escape.
        let ex1 = ChainSpec::example1(1).unwrap();
        let level = 1000;
        let harmonic: f64 = (1..=level).map(|i| 1.0 / i as f64).sum();
        let escape = 0.5 / (harmonic - 1.0);
        let expected = 1.0 / (1.0 / 3.0 + 2.0 / 3.0 * escape);
        let profile = occupation_by_fundamental_matrix(&model::<f64>(&ex1, level), 1).unwrap();
        assert!((profile.value(1).unwrap() - expected).abs() < 1e-12);
        assert!(*profile.value(1).unwrap() < 3.0);
    }

    #[test]
    fn evolution_examples() {
        let srw = ChainSpec::simple_symmetric(5).unwrap();
        let m = model::<f64>(&srw, 1000);
        let evo = evolve_distribution(&m, 5, 0).unwrap();
        assert_eq!(evo.distribution.mass[5], 1.0);
        assert_eq!(expected_value_of(&evo.distribution), 5.0);
        assert!(evo.occupation.values.iter().all(|v| *v == 0.0));

        let evo = evolve_distribution(&m, 5, 200).unwrap();
        assert!((expected_value_of(&evo.distribution) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn one_step_expectation() {
        let ex1 = ChainSpec::example1(1).unwrap();
        let evo = evolve_distribution(&model::<Q>(&ex1, 10), 1, 1).unwrap();
        assert_eq!(evo.distribution.mass[0], q(1, 3));
        assert_eq!(evo.distribution.mass[2], q(2, 3));
        assert_eq!(expected_value_of(&evo.distribution), q(4, 3));
    }

    #[test]
    fn expected_value_of_simple_distributions() {
        let dist = DistributionVector { time: 0, mass: vec![q(1, 3), q(1, 3), q(1, 3)] };
        assert_eq!(expected_value_of(&dist), q(1, 1));
        let point = DistributionVector::<Q>::point_mass(8, 6);
        assert_eq!(expected_value_of(&point), q(6, 1));
    }

    #[test]
    fn exact_mass_conservation() {
        let ec =
            ChainSpec::eventually_constant(vec![ProbPair::new(Number::ratio(2, 3), Number::ratio(1, 3))], 2).unwrap();
        let m = model::<Q>(&ec, 12);
        let mut evolver = Evolver::new(&m, 2).unwrap();
        for _ in 0..40 {
            evolver.step();
            assert_eq!(evolver.distribution().total(), q(1, 1));
        }
    }

    #[test]
    fn absorbed_mass_converges_to_exit_probability() {
        let ex1 = ChainSpec::example1(1).unwrap();
        let m = model::<f64>(&ex1, 8);
        let (hit_zero, hit_top) = exit_probs_by_recursion(&m, 3).unwrap();
        let evo = evolve_distribution(&m, 3, 5000).unwrap();
        assert!((evo.distribution.mass[0] - hit_zero).abs() < 1e-12);
        assert!((evo.distribution.mass[8] - hit_top).abs() < 1e-12);
        // Accumulated occupation converges to the fundamental-matrix row.
        let fundamental = occupation_by_fundamental_matrix(&m, 3).unwrap();
        for (a, b) in evo.occupation.values.iter().zip(&fundamental.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn escape_truncation_levels() {
        // Symmetric walk: escape = k / N.
        let srw = ChainSpec::simple_symmetric(3).unwrap();
        assert_eq!(escape_truncation(&srw, 3, 1e-3, 1_000_000).unwrap(), 3001);
        assert!(matches!(escape_truncation(&srw, 3, 1e-10, 10_000), Err(OracleError::TruncationTooLarge { .. })));
        let cd = ChainSpec::constant_drift(Number::ratio(2, 3), 1).unwrap();
        match escape_truncation(&cd, 1, 1e-10, 1_000_000) {
            Err(OracleError::Transient(escape)) => assert!((escape - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
