//! Entropy production of jump processes and its system/reservoir split.
//!
//! All rates are in units of 1/time and entropies in units of `k_B`.
//! Divergent quantities are represented by `f64::INFINITY`; NaN is always
//! turned into an error.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::markov::{build_generator, reversible_stationary, ProbDist, RateMatrix, StateSpace};

/// Tolerance on `|log k(x,y)/k(y,x) - beta(x,y) [E(x) - E(y)]|`.
pub const LOCAL_DETAILED_BALANCE_TOL: f64 = 1e-9;

/// Nonnegative entropy production rate, possibly `+inf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct EntropyRate(f64);

impl EntropyRate {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() {
            Err(Error::NotANumber("entropy production"))
        } else if value < 0.0 {
            Err(Error::InvalidParameter(format!(
                "negative entropy production {value}"
            )))
        } else {
            Ok(Self(value))
        }
    }

    pub const INFINITE: EntropyRate = EntropyRate(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for EntropyRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// `(a - b) log(a / b)` with `0 log(0/0) = 0` and divergence when exactly one flux vanishes.
fn flux_pair_term(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a == 0.0 || b == 0.0 {
        f64::INFINITY
    } else {
        (a - b) * ((a - b) / b).ln_1p()
    }
}

/// `sigma(mu) = sum_{x != y} mu(x) k(x,y) log[mu(x) k(x,y) / (mu(y) k(y,x))]`.
///
/// Evaluated pairwise as `sum_{x<y} (j_xy - j_yx) log(j_xy / j_yx)`, every
/// term of which is nonnegative.
pub fn entropy_production_rate(k: &RateMatrix, mu: &ProbDist) -> Result<EntropyRate> {
    k.space().ensure_same(mu.space())?;
    let n = k.len();
    let mut total = 0.0;
    for x in 0..n {
        for y in (x + 1)..n {
            let a = mu.get(x) * k.rate(x, y);
            let b = mu.get(y) * k.rate(y, x);
            total += flux_pair_term(a, b);
            if total.is_infinite() {
                return Ok(EntropyRate::INFINITE);
            }
        }
    }
    EntropyRate::new(total)
}

/// `S(mu | rho) = sum_x mu(x) log(mu(x) / rho(x))`, `+inf` unless `mu << rho`.
pub fn relative_entropy(mu: &ProbDist, rho: &ProbDist) -> Result<f64> {
    mu.space().ensure_same(rho.space())?;
    let mut s = 0.0;
    for x in 0..mu.len() {
        let (m, r) = (mu.get(x), rho.get(x));
        if m == 0.0 {
            continue;
        }
        if r == 0.0 {
            return Ok(f64::INFINITY);
        }
        s += m * (m / r).ln();
    }
    Ok(s)
}

/// Boltzmann-Gibbs distribution `rho(x) ∝ exp(-beta E(x))`.
pub fn boltzmann_gibbs(space: &StateSpace, energies: &DVector<f64>, beta: f64) -> Result<ProbDist> {
    if energies.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            got: energies.len(),
        });
    }
    let shift = energies.iter().map(|e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let w = energies.map(|e| (-beta * e - shift).exp());
    ProbDist::from_weights(space.clone(), w)
}

/// Energies and reservoir temperatures attached to a chain obeying local
/// detailed balance `k(x,y)/k(y,x) = exp(beta(x,y) [E(x) - E(y)])`.
#[derive(Clone, Debug)]
pub struct ThermoModel {
    rates: RateMatrix,
    energies: DVector<f64>,
    edge_beta: DMatrix<f64>,
    beta_ref: f64,
}

/// Undirected transition with its prefactor and reservoir inverse temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermoEdge {
    pub a: usize,
    pub b: usize,
    pub nu: f64,
    pub beta: f64,
}

impl ThermoModel {
    /// Validates local detailed balance on every edge. `edge_beta` is read
    /// only at pairs carrying a positive rate.
    pub fn new(
        rates: RateMatrix,
        energies: DVector<f64>,
        edge_beta: DMatrix<f64>,
        beta_ref: f64,
    ) -> Result<Self> {
        let n = rates.len();
        if energies.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: energies.len(),
            });
        }
        if edge_beta.nrows() != n || edge_beta.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: edge_beta.nrows(),
            });
        }
        if !beta_ref.is_finite() || energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(
                "energies and beta_ref must be finite".into(),
            ));
        }
        let space = rates.space().clone();
        let violation = |x: usize, y: usize, detail: String| Error::LocalDetailedBalanceViolated {
            from: space.label(x).to_string(),
            to: space.label(y).to_string(),
            detail,
        };
        for x in 0..n {
            for y in (x + 1)..n {
                let (kxy, kyx) = (rates.rate(x, y), rates.rate(y, x));
                if kxy == 0.0 && kyx == 0.0 {
                    continue;
                }
                if kxy == 0.0 || kyx == 0.0 {
                    return Err(violation(x, y, "one-way transition".into()));
                }
                let b = edge_beta[(x, y)];
                if !b.is_finite() || b != edge_beta[(y, x)] {
                    return Err(violation(x, y, format!("edge beta {b} not finite/symmetric")));
                }
                let defect = (kxy / kyx).ln() - b * (energies[x] - energies[y]);
                if defect.abs() > LOCAL_DETAILED_BALANCE_TOL {
                    return Err(violation(x, y, format!("log-ratio defect {defect:e}")));
                }
            }
        }
        Ok(Self {
            rates,
            energies,
            edge_beta,
            beta_ref,
        })
    }

    /// Every edge coupled to a reservoir at `beta_ref`.
    pub fn equilibrium(rates: RateMatrix, energies: DVector<f64>, beta_ref: f64) -> Result<Self> {
        let n = rates.len();
        Self::new(rates, energies, DMatrix::from_element(n, n, beta_ref), beta_ref)
    }

    /// Builds rates `k(x,y) = nu exp(beta(x,y) [E(x) - E(y)] / 2)` from edges.
    pub fn from_edges(
        space: StateSpace,
        edges: &[ThermoEdge],
        energies: DVector<f64>,
        beta_ref: f64,
    ) -> Result<Self> {
        let n = space.len();
        if energies.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: energies.len(),
            });
        }
        let mut k = DMatrix::zeros(n, n);
        let mut beta = DMatrix::from_element(n, n, beta_ref);
        for e in edges {
            if e.a >= n || e.b >= n || e.a == e.b {
                return Err(Error::InvalidParameter(format!(
                    "edge ({}, {}) out of range",
                    e.a, e.b
                )));
            }
            let half = 0.5 * e.beta * (energies[e.a] - energies[e.b]);
            k[(e.a, e.b)] = e.nu * half.exp();
            k[(e.b, e.a)] = e.nu * (-half).exp();
            beta[(e.a, e.b)] = e.beta;
            beta[(e.b, e.a)] = e.beta;
        }
        Self::new(RateMatrix::new(space, k)?, energies, beta, beta_ref)
    }

    pub fn rates(&self) -> &RateMatrix {
        &self.rates
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn edge_beta(&self, x: usize, y: usize) -> f64 {
        self.edge_beta[(x, y)]
    }

    pub fn beta_ref(&self) -> f64 {
        self.beta_ref
    }

    /// Reference Boltzmann-Gibbs distribution at `beta_ref`.
    pub fn reference(&self) -> ProbDist {
        boltzmann_gibbs(self.rates.space(), &self.energies, self.beta_ref)
            .expect("finite energies give a valid distribution")
    }
}

/// System and reservoir parts of the entropy production.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropySplit {
    /// `sigma_S`, minus `beta_ref` times the free-energy change rate. May be `+inf`.
    pub system: f64,
    /// `sigma_R`, the reservoir entropy flux beyond the `beta_ref` baseline.
    pub reservoir: f64,
}

impl EntropySplit {
    pub fn total(&self) -> f64 {
        self.system + self.reservoir
    }
}

pub fn entropy_decomposition(m: &ThermoModel, mu: &ProbDist) -> Result<EntropySplit> {
    let k = &m.rates;
    k.space().ensure_same(mu.space())?;
    let rho = m.reference();
    let n = k.len();
    let mut system = 0.0;
    let mut reservoir = 0.0;
    for x in 0..n {
        for y in (x + 1)..n {
            let (mx, my) = (mu.get(x), mu.get(y));
            let a = mx * k.rate(x, y);
            let b = my * k.rate(y, x);
            if a == b {
                continue;
            }
            reservoir += (m.edge_beta[(x, y)] - m.beta_ref)
                * (m.energies[x] - m.energies[y])
                * (a - b);
            let log_ratio = if mx == 0.0 || my == 0.0 {
                // One side has no mass: the flux difference and the
                // logarithm diverge with the same sign.
                f64::INFINITY
            } else {
                (mx / my).ln() + (rho.get(y) / rho.get(x)).ln()
            };
            system += if log_ratio.is_infinite() {
                f64::INFINITY
            } else {
                (a - b) * log_ratio
            };
        }
    }
    if system.is_nan() || reservoir.is_nan() {
        return Err(Error::NotANumber("entropy decomposition"));
    }
    Ok(EntropySplit { system, reservoir })
}

/// Entropy production and the relative-entropy decay rate under detailed balance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayCheck {
    pub sigma: f64,
    /// `-d/dt S(mu_t | rho)` at `t = 0`.
    pub neg_relative_entropy_rate: f64,
}

/// Evaluates `sigma(mu)` and `-sum_x log(mu(x)/rho(x)) (mu L)(x)` by two
/// independent routes; they coincide for reversible chains.
pub fn entropy_rate_derivative_check(k: &RateMatrix, mu: &ProbDist) -> Result<DecayCheck> {
    let rho = reversible_stationary(k)?;
    k.space().ensure_same(mu.space())?;
    let sigma = entropy_production_rate(k, mu)?.value();
    let dmu = build_generator(k).apply_left(mu.probs());
    let mut rate = 0.0;
    for x in 0..k.len() {
        let m = mu.get(x);
        if dmu[x] == 0.0 {
            continue;
        }
        if m == 0.0 {
            // Mass flows into an empty state; log(0) = -inf.
            rate = f64::INFINITY;
            break;
        }
        rate -= (m / rho.get(x)).ln() * dmu[x];
    }
    Ok(DecayCheck {
        sigma,
        neg_relative_entropy_rate: rate,
    })
}
