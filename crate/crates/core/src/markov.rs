//! Finite-state continuous-time Markov jump processes.
//!
//! Rates `k(x, y)` are stored as a dense `N x N` matrix with zero diagonal.
//! The generator acts on functions as `Lg(x) = sum_y k(x,y) [g(y) - g(x)]`
//! and on distributions from the left, `d mu_t / dt = mu_t L`.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance on `|sum p - 1|` accepted by [`ProbDist::new`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Stationary weights below this floor are treated as a failed solve.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

/// Largest state count for which [`evolve_master`] uses the matrix exponential.
pub const EXPM_MAX_STATES: usize = 64;

const RK4_MAX_STEPS: f64 = 1e8;

/// Ordered set of distinct state labels.
#[derive(Clone)]
pub struct StateSpace {
    inner: Arc<SpaceInner>,
}

struct SpaceInner {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::TooFewStates(labels.len()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self {
            inner: Arc::new(SpaceInner { labels, index }),
        })
    }

    /// States labelled `s0, s1, ..., s{n-1}`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("s{i}")))
    }

    pub fn len(&self) -> usize {
        self.inner.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.inner.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.inner.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.inner
            .index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub(crate) fn ensure_same(&self, other: &StateSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }
}

impl PartialEq for StateSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.labels == other.inner.labels
    }
}

impl Eq for StateSpace {}

impl fmt::Debug for StateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.labels()).finish()
    }
}

/// Transition rates of a jump process: `k(x, y) >= 0` off the diagonal, zero on it.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    space: StateSpace,
    rates: DMatrix<f64>,
}

impl RateMatrix {
    pub fn new(space: StateSpace, rates: DMatrix<f64>) -> Result<Self> {
        let n = space.len();
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rates.nrows().max(rates.ncols()),
            });
        }
        for x in 0..n {
            for y in 0..n {
                let v = rates[(x, y)];
                let bad = if x == y {
                    v != 0.0
                } else {
                    !v.is_finite() || v < 0.0
                };
                if bad {
                    return Err(Error::InvalidRate {
                        from: space.label(x).to_string(),
                        to: space.label(y).to_string(),
                        value: v,
                    });
                }
            }
        }
        Ok(Self { space, rates })
    }

    /// Builds rates from `(from, to, rate)` triples; unlisted pairs get rate zero.
    pub fn from_edges<S: AsRef<str>>(space: StateSpace, edges: &[(S, S, f64)]) -> Result<Self> {
        let n = space.len();
        let mut rates = DMatrix::zeros(n, n);
        let mut seen = vec![false; n * n];
        for (a, b, v) in edges {
            let x = space.index_of(a.as_ref())?;
            let y = space.index_of(b.as_ref())?;
            if std::mem::replace(&mut seen[x * n + y], true) {
                return Err(Error::DuplicateEdge {
                    from: a.as_ref().to_string(),
                    to: b.as_ref().to_string(),
                });
            }
            rates[(x, y)] = *v;
        }
        Self::new(space, rates)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[(x, y)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rates
    }

    /// Total rate of leaving `x`.
    pub fn escape_rate(&self, x: usize) -> f64 {
        self.rates.row(x).sum()
    }

    /// `max_x sum_{y != x} k(x, y)`.
    pub fn max_escape_rate(&self) -> f64 {
        (0..self.len())
            .map(|x| self.escape_rate(x))
            .fold(0.0, f64::max)
    }

    pub fn generator(&self) -> Generator {
        build_generator(self)
    }
}

/// Generator matrix `L`: off-diagonal rates, rows summing to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    space: StateSpace,
    matrix: DMatrix<f64>,
}

impl Generator {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `(Lg)(x)` for a function `g` on states.
    pub fn apply(&self, g: &DVector<f64>) -> DVector<f64> {
        &self.matrix * g
    }

    /// `(mu L)(x)`, the time derivative of a distribution.
    pub fn apply_left(&self, mu: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(mu)
    }
}

pub fn build_generator(k: &RateMatrix) -> Generator {
    let mut matrix = k.rates.clone();
    for x in 0..k.len() {
        matrix[(x, x)] = -k.escape_rate(x);
    }
    Generator {
        space: k.space.clone(),
        matrix,
    }
}

/// Probability distribution on a state space.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist {
    space: StateSpace,
    p: DVector<f64>,
}

impl ProbDist {
    pub fn new(space: StateSpace, p: DVector<f64>) -> Result<Self> {
        if p.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                got: p.len(),
            });
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {v} is negative or not finite"
            )));
        }
        let total = p.sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Self { space, p })
    }

    pub fn from_vec(space: StateSpace, p: Vec<f64>) -> Result<Self> {
        Self::new(space, DVector::from_vec(p))
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(space: StateSpace, w: DVector<f64>) -> Result<Self> {
        if let Some(v) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weight {v} is negative or not finite"
            )));
        }
        let total = w.sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(space, w / total)
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.len();
        Self {
            space,
            p: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    /// Point mass at state `x`.
    pub fn point(space: StateSpace, x: usize) -> Self {
        let mut p = DVector::zeros(space.len());
        p[x] = 1.0;
        Self { space, p }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn probs(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn get(&self, x: usize) -> f64 {
        self.p[x]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.p.iter().all(|&v| v > 0.0)
    }

    /// Number of states carrying zero mass.
    pub fn zero_count(&self) -> usize {
        self.p.iter().filter(|&&v| v == 0.0).count()
    }

    /// `<phi>_mu`.
    pub fn expect(&self, phi: &DVector<f64>) -> f64 {
        self.p.dot(phi)
    }

    pub fn sup_distance(&self, other: &ProbDist) -> f64 {
        (&self.p - &other.p).amax()
    }
}

pub fn is_irreducible(k: &RateMatrix) -> bool {
    let n = k.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                let r = if forward { k.rate(x, y) } else { k.rate(y, x) };
                if r > 0.0 && !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary distribution `rho L = 0` of an irreducible chain.
///
/// Solves the balance equations with the last one replaced by the
/// normalization constraint, followed by one step of iterative refinement.
pub fn stationary_distribution(k: &RateMatrix) -> Result<ProbDist> {
    if !is_irreducible(k) {
        return Err(Error::NotIrreducible);
    }
    let n = k.len();
    let gen = build_generator(k);
    let mut a = gen.matrix().transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let lu = a.clone().lu();
    let mut rho = lu
        .solve(&b)
        .ok_or_else(|| Error::SolverFailure("singular balance system".into()))?;
    let r = &b - &a * &rho;
    if let Some(d) = lu.solve(&r) {
        rho += d;
    }

    if rho.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotANumber("stationary distribution"));
    }
    if let Some(m) = rho.iter().copied().reduce(f64::min) {
        if m < POSITIVITY_FLOOR {
            return Err(Error::SolverFailure(format!(
                "stationary weight {m:e} below positivity floor"
            )));
        }
    }
    rho /= rho.sum();
    let residual = gen.apply_left(&rho).amax();
    let scale = k.max_escape_rate().max(1.0);
    if residual > 1e-12 * scale {
        return Err(Error::SolverFailure(format!(
            "balance residual {residual:e} too large"
        )));
    }
    ProbDist::new(k.space.clone(), rho)
}

/// Largest `|rho(x) k(x,y) - rho(y) k(y,x)|` over all pairs.
pub fn detailed_balance_defect(k: &RateMatrix, rho: &ProbDist) -> f64 {
    let n = k.len();
    let mut worst = 0.0f64;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = (rho.get(x) * k.rate(x, y) - rho.get(y) * k.rate(y, x)).abs();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn is_detailed_balance(k: &RateMatrix, rho: &ProbDist, tol: f64) -> bool {
    k.space == rho.space && detailed_balance_defect(k, rho) <= tol
}

/// Detailed-balance tolerance used when an operation requires a reversible chain.
pub(crate) const REVERSIBILITY_TOL: f64 = 1e-10;

/// Stationary distribution of `k`, failing unless the chain is reversible.
pub(crate) fn reversible_stationary(k: &RateMatrix) -> Result<ProbDist> {
    let rho = stationary_distribution(k)?;
    let defect = detailed_balance_defect(k, &rho);
    if defect > REVERSIBILITY_TOL * k.max_escape_rate().max(1.0) {
        return Err(Error::NotDetailedBalance(defect));
    }
    Ok(rho)
}

/// Undirected edge `{a, b}` with symmetric prefactor `nu > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub nu: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, nu: f64) -> Self {
        Self { a, b, nu }
    }
}

/// Rates `k(x,y) = nu(x,y) exp(-beta [V(y) - V(x)] / 2)`, reversible with
/// respect to `rho(x) ∝ exp(-beta V(x))`.
pub fn reversible_rates_from_potential(
    space: StateSpace,
    edges: &[Edge],
    potential: &[f64],
    beta: f64,
) -> Result<RateMatrix> {
    let n = space.len();
    if potential.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: potential.len(),
        });
    }
    if !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta = {beta}")));
    }
    if let Some(v) = potential.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("potential value {v}")));
    }
    let mut rates = DMatrix::zeros(n, n);
    for e in edges {
        if e.a >= n || e.b >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: e.a.max(e.b) + 1,
            });
        }
        let (la, lb) = (space.label(e.a).to_string(), space.label(e.b).to_string());
        if e.a == e.b || !(e.nu > 0.0) || !e.nu.is_finite() {
            return Err(Error::InvalidRate {
                from: la,
                to: lb,
                value: e.nu,
            });
        }
        if rates[(e.a, e.b)] != 0.0 {
            return Err(Error::DuplicateEdge { from: la, to: lb });
        }
        let dv = potential[e.b] - potential[e.a];
        rates[(e.a, e.b)] = e.nu * (-0.5 * beta * dv).exp();
        rates[(e.b, e.a)] = e.nu * (0.5 * beta * dv).exp();
    }
    let k = RateMatrix::new(space, rates)?;
    if !is_irreducible(&k) {
        return Err(Error::DisconnectedGraph);
    }
    Ok(k)
}

/// Integration scheme for [`evolve_master_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolveMethod {
    /// Matrix exponential up to [`EXPM_MAX_STATES`] states, RK4 beyond.
    Auto,
    /// Scaling-and-squaring Padé exponential of `t L`.
    MatrixExponential,
    /// Classical RK4 with fixed step `0.01 / max |L(x,x)|`.
    RungeKutta4,
}

/// Solution `mu_t` of the master equation started from `mu0`.
pub fn evolve_master(k: &RateMatrix, mu0: &ProbDist, t: f64) -> Result<ProbDist> {
    evolve_master_with(k, mu0, t, EvolveMethod::Auto)
}

pub fn evolve_master_with(
    k: &RateMatrix,
    mu0: &ProbDist,
    t: f64,
    method: EvolveMethod,
) -> Result<ProbDist> {
    k.space.ensure_same(&mu0.space)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time t = {t}")));
    }
    if t == 0.0 {
        return Ok(mu0.clone());
    }
    let gen = build_generator(k);
    let method = match method {
        EvolveMethod::Auto if k.len() <= EXPM_MAX_STATES => EvolveMethod::MatrixExponential,
        EvolveMethod::Auto => EvolveMethod::RungeKutta4,
        m => m,
    };
    let raw = match method {
        EvolveMethod::MatrixExponential => {
            let prop = (gen.matrix() * t).exp();
            prop.tr_mul(mu0.probs())
        }
        _ => rk4(&gen, mu0.probs(), t)?,
    };
    project_to_simplex(k.space.clone(), raw)
}

fn rk4(gen: &Generator, mu0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let max_diag = gen
        .matrix()
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if max_diag == 0.0 {
        return Ok(mu0.clone());
    }
    let h0 = 0.01 / max_diag;
    let steps = (t / h0).ceil();
    if steps > RK4_MAX_STEPS || t + h0 == t {
        return Err(Error::StepSizeUnderflow {
            step: h0,
            horizon: t,
        });
    }
    let steps = steps as usize;
    let h = t / steps as f64;
    let mut mu = mu0.clone();
    for _ in 0..steps {
        let k1 = gen.apply_left(&mu);
        let k2 = gen.apply_left(&(&mu + &k1 * (0.5 * h)));
        let k3 = gen.apply_left(&(&mu + &k2 * (0.5 * h)));
        let k4 = gen.apply_left(&(&mu + &k3 * h));
        mu += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(mu)
}

// Mass and sign drift beyond this is reported rather than projected away.
const EVOLVE_DRIFT_TOL: f64 = 1e-10;

fn project_to_simplex(space: StateSpace, mut p: DVector<f64>) -> Result<ProbDist> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotANumber("master equation evolution"));
    }
    let total = p.sum();
    let most_negative = p.iter().copied().fold(0.0f64, f64::min);
    if (total - 1.0).abs() > EVOLVE_DRIFT_TOL || most_negative < -EVOLVE_DRIFT_TOL {
        return Err(Error::SolverFailure(format!(
            "evolution drifted off the simplex (mass {total}, min {most_negative:e})"
        )));
    }
    p.iter_mut().for_each(|v| *v = v.max(0.0));
    let total = p.sum();
    ProbDist::new(space, p / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state(k12: f64, k21: f64) -> RateMatrix {
        let s = StateSpace::new(["1", "2"]).unwrap();
        RateMatrix::from_edges(s, &[("1", "2", k12), ("2", "1", k21)]).unwrap()
    }

    #[test]
    fn generator_two_state() {
        let l = build_generator(&two_state(2.0, 1.0));
        assert_eq!(
            l.matrix(),
            &DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 1.0, -1.0])
        );
    }

    #[test]
    fn isolated_state_has_zero_row() {
        let s = StateSpace::indexed(3).unwrap();
        let k = RateMatrix::from_edges(s, &[("s0", "s1", 1.5)]).unwrap();
        let l = build_generator(&k);
        assert!(l.matrix().row(2).iter().all(|&v| v == 0.0));
        assert!(l.matrix().row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_rates_and_labels() {
        assert!(matches!(
            StateSpace::new(["a", "a"]),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(matches!(StateSpace::new(["a"]), Err(Error::TooFewStates(1))));
        let s = StateSpace::new(["a", "b"]).unwrap();
        assert!(matches!(
            RateMatrix::from_edges(s.clone(), &[("a", "b", -1.0)]),
            Err(Error::InvalidRate { .. })
        ));
        assert!(matches!(
            RateMatrix::from_edges(s.clone(), &[("a", "c", 1.0)]),
            Err(Error::UnknownState(_))
        ));
        assert!(matches!(
            RateMatrix::from_edges(s.clone(), &[("a", "b", 1.0), ("a", "b", 2.0)]),
            Err(Error::DuplicateEdge { .. })
        ));
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(RateMatrix::new(s, diag).is_err());
    }

    #[test]
    fn irreducibility() {
        assert!(is_irreducible(&two_state(2.0, 1.0)));
        assert!(!is_irreducible(&two_state(2.0, 0.0)));
        let s = StateSpace::indexed(5).unwrap();
        let mut m = DMatrix::zeros(5, 5);
        for x in 0..5 {
            m[(x, (x + 1) % 5)] = 1.0;
        }
        let ring = RateMatrix::new(s.clone(), m.clone()).unwrap();
        assert!(is_irreducible(&ring));
        m[(4, 0)] = 0.0;
        assert!(!is_irreducible(&RateMatrix::new(s, m).unwrap()));
    }

    #[test]
    fn stationary_two_state_and_uniform() {
        let rho = stationary_distribution(&two_state(2.0, 1.0)).unwrap();
        assert_relative_eq!(rho.get(0), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(rho.get(1), 2.0 / 3.0, epsilon = 1e-15);

        let s = StateSpace::indexed(3).unwrap();
        let mut m = DMatrix::from_element(3, 3, 1.0);
        m.fill_diagonal(0.0);
        let rho = stationary_distribution(&RateMatrix::new(s, m).unwrap()).unwrap();
        for x in 0..3 {
            assert_relative_eq!(rho.get(x), 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn stationary_requires_irreducible() {
        assert!(matches!(
            stationary_distribution(&two_state(1.0, 0.0)),
            Err(Error::NotIrreducible)
        ));
    }

    #[test]
    fn detailed_balance_examples() {
        let k = two_state(3.7, 0.2);
        let rho = stationary_distribution(&k).unwrap();
        assert!(is_detailed_balance(&k, &rho, 1e-14));

        let s = StateSpace::indexed(3).unwrap();
        let mut m = DMatrix::zeros(3, 3);
        for x in 0..3 {
            m[(x, (x + 1) % 3)] = 2.0;
            m[((x + 1) % 3, x)] = 1.0;
        }
        let ring = RateMatrix::new(s, m).unwrap();
        let rho = stationary_distribution(&ring).unwrap();
        assert_relative_eq!(rho.get(0), 1.0 / 3.0, epsilon = 1e-14);
        assert!(!is_detailed_balance(&ring, &rho, 1e-3));
        assert_relative_eq!(detailed_balance_defect(&ring, &rho), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn potential_rates() {
        let s = StateSpace::indexed(3).unwrap();
        let edges = [Edge::new(0, 1, 0.5), Edge::new(1, 2, 2.0)];
        let k = reversible_rates_from_potential(s.clone(), &edges, &[0.0; 3], 1.0).unwrap();
        assert_eq!(k.rate(0, 1), 0.5);
        assert_eq!(k.rate(2, 1), 2.0);
        let rho = stationary_distribution(&k).unwrap();
        assert_relative_eq!(rho.get(2), 1.0 / 3.0, epsilon = 1e-14);

        let s2 = StateSpace::indexed(2).unwrap();
        let k = reversible_rates_from_potential(
            s2,
            &[Edge::new(0, 1, 1.0)],
            &[4f64.ln(), 0.0],
            1.0,
        )
        .unwrap();
        assert_relative_eq!(k.rate(0, 1) / k.rate(1, 0), 4.0, epsilon = 1e-14);

        assert!(matches!(
            reversible_rates_from_potential(s, &[Edge::new(0, 1, 1.0)], &[0.0; 3], 1.0),
            Err(Error::DisconnectedGraph)
        ));
    }

    #[test]
    fn evolve_zero_time_and_stationary() {
        let k = two_state(2.0, 1.0);
        let mu0 = ProbDist::point(k.space().clone(), 0);
        assert_eq!(evolve_master(&k, &mu0, 0.0).unwrap(), mu0);
        let rho = stationary_distribution(&k).unwrap();
        for t in [0.1, 1.0, 10.0] {
            assert!(evolve_master(&k, &rho, t).unwrap().sup_distance(&rho) < 1e-12);
        }
    }

    #[test]
    fn evolve_two_state_decay() {
        // mu_t(1) = 1/3 + (2/3) exp(-3 t) from mu_0 = (1, 0).
        let k = two_state(2.0, 1.0);
        let mu0 = ProbDist::point(k.space().clone(), 0);
        for t in [0.05f64, 0.4, 2.0, 30.0] {
            let expected = 1.0 / 3.0 + (2.0 / 3.0) * (-3.0 * t).exp();
            // Fixed-step RK4 at h = 0.01/max|L_xx| carries a local error near 1e-11.
            for (method, tol) in [
                (EvolveMethod::MatrixExponential, 1e-13),
                (EvolveMethod::RungeKutta4, 1e-9),
            ] {
                let mu = evolve_master_with(&k, &mu0, t, method).unwrap();
                assert_relative_eq!(mu.get(0), expected, epsilon = tol);
            }
        }
    }

    #[test]
    fn rk4_underflow_is_reported() {
        let k = two_state(1e12, 1e12);
        let mu0 = ProbDist::point(k.space().clone(), 0);
        assert!(matches!(
            evolve_master_with(&k, &mu0, 1e3, EvolveMethod::RungeKutta4),
            Err(Error::StepSizeUnderflow { .. })
        ));
    }

    #[test]
    fn prob_dist_validation() {
        let s = StateSpace::indexed(2).unwrap();
        assert!(ProbDist::from_vec(s.clone(), vec![0.5, 0.6]).is_err());
        assert!(ProbDist::from_vec(s.clone(), vec![-0.1, 1.1]).is_err());
        assert!(ProbDist::from_vec(s.clone(), vec![1.0]).is_err());
        let p = ProbDist::from_weights(s, DVector::from_vec(vec![1.0, 3.0])).unwrap();
        assert_eq!(p.get(1), 0.75);
    }
}
