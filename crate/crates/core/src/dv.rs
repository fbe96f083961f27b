//! Donsker-Varadhan occupation-time rate function of a finite jump process.
//!
//! The supremum over `g > 0` is computed in the log domain `u = log g`,
//! where the objective
//! `F(u) = sum_x mu(x) sum_y k(x,y) (1 - exp(u(y) - u(x)))`
//! is concave and the feasible set is all of `R^n` modulo constants.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::markov::{
    build_generator, is_irreducible, reversible_stationary, stationary_distribution, ProbDist,
    RateMatrix,
};

/// Certificate residuals above this abort with `CertificateFailed`.
pub const CERTIFICATE_FAIL_TOL: f64 = 1e-6;
/// Certificate residuals at or below this count as a clean pass.
pub const CERTIFICATE_PASS_TOL: f64 = 1e-8;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Optimizer controls for [`dv_rate_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DvOptions {
    /// State whose log-density is pinned to zero.
    pub gauge: usize,
    /// Stop once `|grad F|_inf <= grad_tol * max(1, max escape rate)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// `|u|_inf` beyond this is treated as divergence to the boundary.
    pub divergence_bound: f64,
}

impl Default for DvOptions {
    fn default() -> Self {
        Self {
            gauge: 0,
            grad_tol: 1e-12,
            max_iter: 200,
            divergence_bound: 50.0,
        }
    }
}

/// Tilted-generator optimality certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// `V*(x) = -(L g*)(x) / g*(x)`.
    pub tilt: DVector<f64>,
    /// Perron eigenvalue of `L + diag(V*)` from an independent power iteration.
    pub principal_eigenvalue: f64,
    /// Bound on `|lambda|` plus `|(L + diag V*) g*|_inf / |g*|_inf`.
    pub eigenvalue_residual: f64,
    /// `|<V*>_mu - I(mu)|`.
    pub mean_residual: f64,
    /// `|grad F(log g*)|_inf`.
    pub stationarity_residual: f64,
}

impl Certificate {
    pub fn max_residual(&self) -> f64 {
        self.eigenvalue_residual
            .max(self.mean_residual)
            .max(self.stationarity_residual)
    }

    pub fn passed(&self) -> bool {
        self.max_residual() <= CERTIFICATE_PASS_TOL
    }
}

#[derive(Clone, Debug)]
pub struct DVResult {
    pub value: f64,
    /// Maximizer `g* > 0`, scaled so that `<g*>_rho = 1`.
    pub maximizer: DVector<f64>,
    pub certificate: Certificate,
    pub iterations: usize,
}

/// `F(u)`; invariant under `u -> u + c`.
pub fn dv_objective(k: &RateMatrix, mu: &ProbDist, u: &DVector<f64>) -> f64 {
    let n = k.len();
    let mut total = 0.0;
    for x in 0..n {
        let mx = mu.get(x);
        if mx == 0.0 {
            continue;
        }
        for y in 0..n {
            let c = mx * k.rate(x, y);
            if c > 0.0 {
                total -= c * (u[y] - u[x]).exp_m1();
            }
        }
    }
    total
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn evaluate(k: &RateMatrix, mu: &ProbDist, u: &DVector<f64>) -> Eval {
    let n = k.len();
    let mut value = 0.0;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for x in 0..n {
        let mx = mu.get(x);
        if mx == 0.0 {
            continue;
        }
        for y in 0..n {
            let c = mx * k.rate(x, y);
            if c == 0.0 {
                continue;
            }
            let d = u[y] - u[x];
            value -= c * d.exp_m1();
            let w = c * d.exp();
            grad[x] += w;
            grad[y] -= w;
            hess[(x, y)] += w;
            hess[(y, x)] += w;
            hess[(x, x)] -= w;
            hess[(y, y)] -= w;
        }
    }
    Eval { value, grad, hess }
}

/// Newton direction on the free coordinates; falls back to the gradient.
fn ascent_direction(ev: &Eval, free: &[usize]) -> DVector<f64> {
    let m = free.len();
    let n = ev.grad.len();
    let neg_h = DMatrix::from_fn(m, m, |i, j| -ev.hess[(free[i], free[j])]);
    let g = DVector::from_fn(m, |i, _| ev.grad[free[i]]);
    let scale = neg_h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut step = None;
    for ridge in [0.0, 1e-12, 1e-8] {
        let mut a = neg_h.clone();
        for i in 0..m {
            a[(i, i)] += ridge * scale;
        }
        if let Some(ch) = a.cholesky() {
            let s = ch.solve(&g);
            if s.iter().all(|v| v.is_finite()) {
                step = Some(s);
                break;
            }
        }
    }
    let step = step.unwrap_or_else(|| g.clone() / scale.max(1.0));
    let mut full = DVector::zeros(n);
    for (i, &z) in free.iter().enumerate() {
        full[z] = step[i];
    }
    full
}

struct Ascent {
    u: DVector<f64>,
    value: f64,
    history: Vec<f64>,
    iterations: usize,
    diverged: bool,
}

fn maximize(k: &RateMatrix, mu: &ProbDist, u0: DVector<f64>, opts: &DvOptions) -> Ascent {
    let n = k.len();
    let tol = opts.grad_tol * k.max_escape_rate().max(1.0);
    let mut u = u0;
    let shift = u[opts.gauge];
    u.add_scalar_mut(-shift);
    let mut ev = evaluate(k, mu, &u);
    let mut history = vec![ev.value];
    let mut iterations = 0;
    let mut diverged = false;
    loop {
        let free: Vec<usize> = (0..n)
            .filter(|&z| z != opts.gauge && ev.hess[(z, z)] != 0.0)
            .collect();
        let grad_norm = free.iter().fold(0.0f64, |a, &z| a.max(ev.grad[z].abs()));
        if grad_norm <= tol || iterations >= opts.max_iter || free.is_empty() {
            return Ascent {
                u,
                value: ev.value,
                history,
                iterations,
                diverged,
            };
        }
        if u.amax() > opts.divergence_bound {
            diverged = true;
            return Ascent {
                u,
                value: ev.value,
                history,
                iterations,
                diverged,
            };
        }
        let dir = ascent_direction(&ev, &free);
        let slope = ev.grad.dot(&dir);
        let slack = 1e-15 * (1.0 + ev.value.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &u + &dir * t;
            let val = dv_objective(k, mu, &trial);
            if val.is_finite() && val >= ev.value + ARMIJO_C * t * slope - slack {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some(next) => {
                u = next;
                ev = evaluate(k, mu, &u);
                history.push(ev.value);
            }
            None => {
                // No representable ascent left: the iterate is optimal to rounding.
                return Ascent {
                    u,
                    value: ev.value,
                    history,
                    iterations,
                    diverged,
                };
            }
        }
    }
}

/// Aitken extrapolation of a monotone increasing tail, kept within `[last, cap]`.
fn extrapolate_supremum(history: &[f64], cap: f64) -> f64 {
    let last = *history.last().expect("nonempty history");
    if history.len() < 3 {
        return last.min(cap);
    }
    let (a, b, c) = (
        history[history.len() - 3],
        history[history.len() - 2],
        history[history.len() - 1],
    );
    let (d1, d2) = (b - a, c - b);
    let est = if d1 > d2 && d2 > 0.0 {
        c + d2 * d2 / (d1 - d2)
    } else {
        c
    };
    est.max(last).min(cap.max(last))
}

pub fn dv_rate(k: &RateMatrix, mu: &ProbDist) -> Result<DVResult> {
    dv_rate_with(k, mu, &DvOptions::default())
}

/// Maximizes `F` from the warm start `u = log(mu/rho) / 2` on the support of `mu`.
///
/// When `mu` vanishes somewhere no finite maximizer exists; the supremum is
/// then returned inside [`Error::NoInteriorMaximizer`].
pub fn dv_rate_with(k: &RateMatrix, mu: &ProbDist, opts: &DvOptions) -> Result<DVResult> {
    k.space().ensure_same(mu.space())?;
    if opts.gauge >= k.len() {
        return Err(Error::InvalidParameter(format!("gauge state {}", opts.gauge)));
    }
    if !is_irreducible(k) {
        return Err(Error::NotIrreducible);
    }
    let rho = stationary_distribution(k)?;
    let u0 = DVector::from_fn(k.len(), |x, _| {
        let m = mu.get(x);
        if m > 0.0 {
            0.5 * (m / rho.get(x)).ln()
        } else {
            0.0
        }
    });
    let run = maximize(k, mu, u0, opts);
    let zeros = mu.zero_count();
    if zeros > 0 {
        // Irreducibility forces a net inflow into the zero set, so the
        // gradient never vanishes and u runs off to the boundary.
        let cap: f64 = (0..k.len()).map(|x| mu.get(x) * k.escape_rate(x)).sum();
        return Err(Error::NoInteriorMaximizer {
            supremum: extrapolate_supremum(&run.history, cap),
            zero_states: zeros,
        });
    }
    if run.diverged {
        return Err(Error::SolverFailure(format!(
            "log-density diverged beyond {} for a strictly positive mu",
            opts.divergence_bound
        )));
    }
    let value = run.value.max(0.0);
    let certificate = certify(k, mu, &run.u, value)?;
    let mut g = run.u.map(|v| v.exp());
    let norm = rho.expect(&g);
    g /= norm;
    Ok(DVResult {
        value,
        maximizer: g,
        certificate,
        iterations: run.iterations,
    })
}

/// Rate-function value, falling back to the boundary supremum when `mu` has zeros.
pub fn dv_value(k: &RateMatrix, mu: &ProbDist) -> Result<f64> {
    match dv_rate(k, mu) {
        Ok(r) => Ok(r.value),
        Err(Error::NoInteriorMaximizer { supremum, .. }) => Ok(supremum),
        Err(e) => Err(e),
    }
}

/// Recomputes the certificate for a reported maximizer.
pub fn tilt_certificate(k: &RateMatrix, r: &DVResult, mu: &ProbDist) -> Result<Certificate> {
    k.space().ensure_same(mu.space())?;
    if r.maximizer.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: r.maximizer.len(),
        });
    }
    if r.maximizer.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidParameter(
            "maximizer must be finite and strictly positive".into(),
        ));
    }
    let u = r.maximizer.map(f64::ln);
    certify(k, mu, &u, r.value)
}

fn certify(k: &RateMatrix, mu: &ProbDist, u: &DVector<f64>, value: f64) -> Result<Certificate> {
    let n = k.len();
    // V*(x) = sum_y k(x,y) (1 - g(y)/g(x)), in the log domain.
    let tilt = DVector::from_fn(n, |x, _| {
        (0..n)
            .filter(|&y| k.rate(x, y) > 0.0)
            .map(|y| -k.rate(x, y) * (u[y] - u[x]).exp_m1())
            .sum::<f64>()
    });
    let top = u.max();
    let g = u.map(|v| (v - top).exp());
    let l = build_generator(k).into_matrix();
    let tilted = &l + DMatrix::from_diagonal(&tilt);
    let direct = (&tilted * &g).amax() / g.amax();

    let (lambda, bound) = perron_eigenvalue(&tilted);
    let eigenvalue_residual = bound.max(direct);
    let mean_residual = (mu.expect(&tilt) - value).abs();
    let ev = evaluate(k, mu, u);
    let stationarity_residual = ev.grad.amax();
    let cert = Certificate {
        tilt,
        principal_eigenvalue: lambda,
        eigenvalue_residual,
        mean_residual,
        stationarity_residual,
    };
    if cert.max_residual() > CERTIFICATE_FAIL_TOL || cert.max_residual().is_nan() {
        return Err(Error::CertificateFailed {
            eigenvalue: cert.eigenvalue_residual,
            mean: cert.mean_residual,
            stationarity: cert.stationarity_residual,
        });
    }
    Ok(cert)
}

/// Power iteration on `A + sI` (nonnegative, primitive for irreducible rates)
/// with Collatz-Wielandt bracketing. Returns the estimate and a bound on its
/// distance from zero.
fn perron_eigenvalue(a: &DMatrix<f64>) -> (f64, f64) {
    let n = a.nrows();
    let s = 1.0 + (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)].abs()));
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] += s;
    }
    let mut v = DVector::from_element(n, 1.0);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..POWER_MAX_ITER {
        let w = &shifted * &v;
        lo = f64::INFINITY;
        hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = w[i] / v[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        v = &w / w.amax();
        if hi - lo <= POWER_TOL * s {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi) - s;
    (lambda, (lo - s).abs().max((hi - s).abs()))
}

/// Closed form under detailed balance: the Dirichlet form of `sqrt(mu/rho)`.
pub fn dv_rate_reversible(k: &RateMatrix, mu: &ProbDist) -> Result<f64> {
    let rho = reversible_stationary(k)?;
    k.space().ensure_same(mu.space())?;
    let sqrt_f = DVector::from_fn(k.len(), |x, _| (mu.get(x) / rho.get(x)).sqrt());
    Ok(dirichlet_form(k, &rho, &sqrt_f))
}

/// `D(g, g) = (1/2) sum_{x,y} rho(x) k(x,y) (g(y) - g(x))^2`, symmetrized over pairs.
pub fn dirichlet_form(k: &RateMatrix, rho: &ProbDist, g: &DVector<f64>) -> f64 {
    let n = k.len();
    let mut total = 0.0;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = g[y] - g[x];
            let flux = 0.5 * (rho.get(x) * k.rate(x, y) + rho.get(y) * k.rate(y, x));
            total += flux * d * d;
        }
    }
    total
}

/// Smallest nonzero eigenvalue of `-L` in `l^2(rho)`.
pub fn spectral_gap(k: &RateMatrix) -> Result<f64> {
    let rho = reversible_stationary(k)?;
    let n = k.len();
    let l = build_generator(k).into_matrix();
    let sq = rho.probs().map(f64::sqrt);
    // D^{1/2} (-L) D^{-1/2} is symmetric under detailed balance.
    let mut s = DMatrix::from_fn(n, n, |x, y| -l[(x, y)] * sq[x] / sq[y]);
    s = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    Ok(eig[1])
}

/// `Delta (1 - <sqrt f>_rho^2)` with `f = mu/rho`, a lower bound for `I(mu)`.
pub fn spectral_gap_bound(k: &RateMatrix, mu: &ProbDist) -> Result<f64> {
    let gap = spectral_gap(k)?;
    let rho = reversible_stationary(k)?;
    let mean_sqrt: f64 = (0..k.len()).map(|x| (mu.get(x) * rho.get(x)).sqrt()).sum();
    Ok(gap * (1.0 - mean_sqrt * mean_sqrt))
}
