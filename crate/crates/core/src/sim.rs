//! Exact trajectory simulation, occupation measures and a Feynman-Kac
//! estimator for the principal eigenvalue of `L + diag(V)`.
//!
//! Streams: sample `i` of a run with seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(sample_seed(s, i))`, so results do not depend
//! on the number of worker threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markov::{build_generator, is_irreducible, stationary_distribution, ProbDist, RateMatrix, StateSpace};

/// Largest admissible spread of path exponents in one estimate.
pub const EXPONENT_GUARD: f64 = 700.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    space: StateSpace,
    initial: usize,
    jumps: Vec<(f64, usize)>,
    horizon: f64,
}

impl Trajectory {
    /// Validates increasing jump times in `(0, horizon)` and actual state changes.
    pub fn new(space: StateSpace, initial: usize, jumps: Vec<(f64, usize)>, horizon: f64) -> Result<Self> {
        if initial >= space.len() {
            return Err(Error::InvalidParameter(format!("initial state {initial}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon = {horizon}")));
        }
        let (mut prev_t, mut prev_x) = (0.0, initial);
        for &(t, x) in &jumps {
            if !(t > prev_t && t < horizon) || x >= space.len() || x == prev_x {
                return Err(Error::InvalidParameter(format!("invalid jump ({t}, {x})")));
            }
            prev_t = t;
            prev_x = x;
        }
        Ok(Self {
            space,
            initial,
            jumps,
            horizon,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn jumps(&self) -> &[(f64, usize)] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Holding intervals `(state, duration)` covering `[0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let starts = std::iter::once((0.0, self.initial)).chain(self.jumps.iter().copied());
        let ends = self
            .jumps
            .iter()
            .map(|&(t, _)| t)
            .chain(std::iter::once(self.horizon));
        starts.zip(ends).map(|((t0, x), t1)| (x, t1 - t0))
    }

    /// `int_0^T V(X_t) dt`.
    pub fn integral(&self, v: &DVector<f64>) -> f64 {
        self.segments().map(|(x, d)| v[x] * d).sum()
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent stream of a run seeded with `seed`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Escape rates and cumulative jump tables.
struct JumpTables {
    escape: Vec<f64>,
    cumulative: Vec<Vec<(f64, usize)>>,
}

impl JumpTables {
    fn new(k: &RateMatrix) -> Self {
        let n = k.len();
        let mut escape = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for x in 0..n {
            let mut acc = 0.0;
            let mut row = Vec::new();
            for y in 0..n {
                let r = k.rate(x, y);
                if r > 0.0 {
                    acc += r;
                    row.push((acc, y));
                }
            }
            escape.push(acc);
            cumulative.push(row);
        }
        Self { escape, cumulative }
    }

    fn holding_time<R: Rng>(&self, x: usize, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.escape[x]
    }

    fn target<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        let row = &self.cumulative[x];
        let u = rng.random::<f64>() * self.escape[x];
        row.iter()
            .find(|&&(c, _)| u < c)
            .map(|&(_, y)| y)
            .unwrap_or(row[row.len() - 1].1)
    }

    /// Runs one path, calling `visit(state, duration)` per holding interval.
    fn run<R: Rng, F: FnMut(usize, f64, Option<f64>)>(&self, x0: usize, horizon: f64, rng: &mut R, mut visit: F) {
        let (mut t, mut x) = (0.0, x0);
        loop {
            if self.escape[x] == 0.0 {
                visit(x, horizon - t, None);
                return;
            }
            let dt = self.holding_time(x, rng);
            if t + dt >= horizon {
                visit(x, horizon - t, None);
                return;
            }
            visit(x, dt, Some(t + dt));
            t += dt;
            x = self.target(x, rng);
        }
    }
}

fn validate_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("horizon T = {horizon}")))
    }
}

/// Exact sample path on `[0, horizon]`, deterministic in `seed`.
pub fn gillespie(k: &RateMatrix, x0: usize, horizon: f64, seed: u64) -> Result<Trajectory> {
    validate_horizon(horizon)?;
    if x0 >= k.len() {
        return Err(Error::InvalidParameter(format!("initial state {x0}")));
    }
    let tables = JumpTables::new(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jumps = Vec::new();
    let mut pending_time = None;
    tables.run(x0, horizon, &mut rng, |x, _, jump_at| {
        if let Some(t) = pending_time.take() {
            jumps.push((t, x));
        }
        pending_time = jump_at;
    });
    Ok(Trajectory {
        space: k.space().clone(),
        initial: x0,
        jumps,
        horizon,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupationRecord {
    pub fractions: ProbDist,
    pub horizon: f64,
}

/// Time fractions `p_T(x)` spent in each state.
pub fn occupation(traj: &Trajectory) -> OccupationRecord {
    let mut time = DVector::zeros(traj.space.len());
    for (x, d) in traj.segments() {
        time[x] += d;
    }
    let fractions = ProbDist::from_weights(traj.space.clone(), time)
        .expect("positive horizon gives positive total time");
    OccupationRecord {
        fractions,
        horizon: traj.horizon,
    }
}

/// Occupation fractions of `samples` independent paths from `x0`, in sample order.
pub fn occupation_samples(
    k: &RateMatrix,
    x0: usize,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<OccupationRecord>> {
    validate_horizon(horizon)?;
    if x0 >= k.len() {
        return Err(Error::InvalidParameter(format!("initial state {x0}")));
    }
    let tables = JumpTables::new(k);
    let space = k.space().clone();
    Ok((0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
            let mut time = DVector::zeros(space.len());
            tables.run(x0, horizon, &mut rng, |x, d, _| time[x] += d);
            OccupationRecord {
                fractions: ProbDist::from_weights(space.clone(), time).expect("positive time"),
                horizon,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeynmanKac {
    pub lambda: f64,
    pub stderr: f64,
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `(1/T) log E[exp int_0^T V(X_t) dt]` over paths started from the
/// stationary law, with a delta-method standard error.
pub fn feynman_kac_estimate(
    k: &RateMatrix,
    v: &DVector<f64>,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> Result<FeynmanKac> {
    validate_horizon(horizon)?;
    if v.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("V must be finite".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    if !is_irreducible(k) {
        return Err(Error::NotIrreducible);
    }
    let rho = stationary_distribution(k)?;
    let cum_rho: Vec<f64> = rho
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let v_max = v.max();
    let shifted = v.add_scalar(-v_max);
    let tables = JumpTables::new(k);
    let exponents: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
            let u: f64 = rng.random();
            let x0 = cum_rho.iter().position(|&c| u < c).unwrap_or(k.len() - 1);
            let mut a = 0.0;
            tables.run(x0, horizon, &mut rng, |x, d, _| a += shifted[x] * d);
            a
        })
        .collect();
    let a_max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_min = exponents.iter().copied().fold(f64::INFINITY, f64::min);
    if a_max - a_min > EXPONENT_GUARD {
        return Err(Error::OverflowGuard(a_max - a_min));
    }
    let weights: Vec<f64> = exponents.iter().map(|a| (a - a_max).exp()).collect();
    let n = samples as f64;
    let mean = pairwise_sum(&weights) / n;
    let sq: Vec<f64> = weights.iter().map(|w| (w - mean) * (w - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    let lambda = v_max + (a_max + mean.ln()) / horizon;
    let stderr = var.sqrt() / (mean * n.sqrt() * horizon);
    if !lambda.is_finite() || !stderr.is_finite() {
        return Err(Error::NotANumber("Feynman-Kac estimate"));
    }
    Ok(FeynmanKac { lambda, stderr })
}

/// Perron eigenvalue of `L + diag(V)` from a dense eigensolve.
pub fn tilted_perron_eigenvalue(k: &RateMatrix, v: &DVector<f64>) -> Result<f64> {
    if v.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: v.len(),
        });
    }
    let mut m = build_generator(k).into_matrix();
    for x in 0..k.len() {
        m[(x, x)] += v[x];
    }
    // For a Metzler matrix the Perron root is real and has the largest real part.
    let top = m
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if top.is_finite() {
        Ok(top)
    } else {
        Err(Error::NotANumber("tilted eigenvalue"))
    }
}
