//! Near-equilibrium expansions around a reversible reference chain.
//!
//! Rates `k^eps = k0 + eps k1` and distributions `mu^eps = rho0 (1 + eps f1)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dv::dv_value;
use crate::error::{Error, Result};
use crate::markov::{
    build_generator, is_detailed_balance, is_irreducible, stationary_distribution, ProbDist,
    RateMatrix,
};
use crate::thermo::entropy_production_rate;

/// Reference chains must be detailed balanced to this absolute flux tolerance.
pub const REFERENCE_BALANCE_TOL: f64 = 1e-12;
/// Tolerance on `<f1>_rho0 = 0`.
pub const MEAN_ZERO_TOL: f64 = 1e-12;
const EXPANSION_RESIDUAL_TOL: f64 = 1e-11;

/// Generator-shaped matrix of an arbitrary-sign rate perturbation.
fn generator_of(k: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = k.clone();
    for x in 0..l.nrows() {
        l[(x, x)] = 0.0;
        let row: f64 = l.row(x).sum();
        l[(x, x)] = -row;
    }
    l
}

/// `L+ = D^{-1} L^T D` with `D = diag(rho0)`.
pub fn adjoint_matrix(l: &DMatrix<f64>, rho0: &ProbDist) -> DMatrix<f64> {
    let n = l.nrows();
    DMatrix::from_fn(n, n, |x, y| l[(y, x)] * rho0.get(y) / rho0.get(x))
}

/// `(L+ phi)` for the generator of `k` in `l^2(rho0)`.
pub fn adjoint_apply(k: &RateMatrix, rho0: &ProbDist, phi: &DVector<f64>) -> Result<DVector<f64>> {
    k.space().ensure_same(rho0.space())?;
    if phi.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: phi.len(),
        });
    }
    if !rho0.is_strictly_positive() {
        return Err(Error::InvalidDistribution(
            "adjoint needs a strictly positive reference".into(),
        ));
    }
    Ok(adjoint_matrix(build_generator(k).matrix(), rho0) * phi)
}

/// `k^eps = k0 + eps k1` for `|eps| <= eps_max`, with `k0` reversible.
#[derive(Clone, Debug)]
pub struct PerturbationFamily {
    k0: RateMatrix,
    k1: DMatrix<f64>,
    eps_max: f64,
    rho0: ProbDist,
}

impl PerturbationFamily {
    pub fn new(k0: RateMatrix, k1: DMatrix<f64>, eps_max: f64) -> Result<Self> {
        let n = k0.len();
        if k1.nrows() != n || k1.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: k1.nrows(),
            });
        }
        if !(eps_max > 0.0) || !eps_max.is_finite() {
            return Err(Error::InvalidParameter(format!("eps_max = {eps_max}")));
        }
        for x in 0..n {
            for y in 0..n {
                let v = k1[(x, y)];
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("k1({x},{y}) = {v}")));
                }
                if v != 0.0 && (x == y || k0.rate(x, y) == 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "k1({}, {}) nonzero outside the support of k0",
                        k0.space().label(x),
                        k0.space().label(y)
                    )));
                }
            }
        }
        if !is_irreducible(&k0) {
            return Err(Error::NotIrreducible);
        }
        let rho0 = stationary_distribution(&k0)?;
        if !is_detailed_balance(&k0, &rho0, REFERENCE_BALANCE_TOL) {
            return Err(Error::NotDetailedBalance(crate::markov::detailed_balance_defect(
                &k0, &rho0,
            )));
        }
        // Rates are affine in eps, so nonnegativity at the endpoints covers the interval.
        for eps in [-eps_max, eps_max] {
            for x in 0..n {
                for y in 0..n {
                    let r = k0.rate(x, y) + eps * k1[(x, y)];
                    if r < -1e-15 * k0.rate(x, y) {
                        return Err(Error::InvalidParameter(format!(
                            "k^eps({}, {}) < 0 at eps = {eps}",
                            k0.space().label(x),
                            k0.space().label(y)
                        )));
                    }
                }
            }
        }
        let family = Self {
            k0,
            k1,
            eps_max,
            rho0,
        };
        for eps in [-eps_max, eps_max] {
            if !is_irreducible(&family.rates_unchecked(eps)) {
                return Err(Error::NotIrreducible);
            }
        }
        Ok(family)
    }

    /// Rescales `direction` so that `max |k1 / k0| = 1` over the support of `k0`.
    pub fn normalized(k0: RateMatrix, direction: DMatrix<f64>, eps_max: f64) -> Result<Self> {
        let n = k0.len();
        let mut top = 0.0f64;
        for x in 0..n {
            for y in 0..n {
                if k0.rate(x, y) > 0.0 {
                    top = top.max((direction[(x, y)] / k0.rate(x, y)).abs());
                }
            }
        }
        let k1 = if top > 0.0 { direction / top } else { direction };
        Self::new(k0, k1, eps_max)
    }

    pub fn k0(&self) -> &RateMatrix {
        &self.k0
    }

    pub fn k1(&self) -> &DMatrix<f64> {
        &self.k1
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn rho0(&self) -> &ProbDist {
        &self.rho0
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        if eps.is_finite() && eps.abs() <= self.eps_max {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "eps = {eps} outside [-{0}, {0}]",
                self.eps_max
            )))
        }
    }

    fn rates_unchecked(&self, eps: f64) -> RateMatrix {
        let m = DMatrix::from_fn(self.k0.len(), self.k0.len(), |x, y| {
            (self.k0.rate(x, y) + eps * self.k1[(x, y)]).max(0.0)
        });
        RateMatrix::new(self.k0.space().clone(), m).expect("validated at construction")
    }

    pub fn rates_at(&self, eps: f64) -> Result<RateMatrix> {
        self.check_eps(eps)?;
        Ok(self.rates_unchecked(eps))
    }

    pub fn stationary_at(&self, eps: f64) -> Result<ProbDist> {
        stationary_distribution(&self.rates_at(eps)?)
    }

    /// `L1`, the generator-shaped first-order term.
    pub fn l1(&self) -> DMatrix<f64> {
        generator_of(&self.k1)
    }
}

/// `mu^eps = rho0 (1 + eps f1)`, truncated at first order.
#[derive(Clone, Debug)]
pub struct DistFamily {
    f1: DVector<f64>,
    rho0: ProbDist,
}

impl DistFamily {
    pub fn new(pf: &PerturbationFamily, f1: DVector<f64>) -> Result<Self> {
        let rho0 = pf.rho0.clone();
        if f1.len() != rho0.len() {
            return Err(Error::DimensionMismatch {
                expected: rho0.len(),
                got: f1.len(),
            });
        }
        if f1.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("f1 must be finite".into()));
        }
        let mean = rho0.expect(&f1);
        if mean.abs() > MEAN_ZERO_TOL {
            return Err(Error::InvalidParameter(format!(
                "<f1>_rho0 = {mean:e} is not zero"
            )));
        }
        if pf.eps_max * f1.amax() > 1.0 {
            return Err(Error::InvalidParameter(
                "mu^eps becomes negative within eps_max".into(),
            ));
        }
        Ok(Self { f1, rho0 })
    }

    /// Subtracts the `rho0`-mean of `raw`.
    pub fn centered(pf: &PerturbationFamily, raw: DVector<f64>) -> Result<Self> {
        let mean = pf.rho0.expect(&raw);
        Self::new(pf, raw.add_scalar(-mean))
    }

    /// Centers `raw` and rescales it to `max |f1| = 1`.
    pub fn normalized(pf: &PerturbationFamily, raw: DVector<f64>) -> Result<Self> {
        let mean = pf.rho0.expect(&raw);
        let centered = raw.add_scalar(-mean);
        let top = centered.amax();
        if top == 0.0 {
            return Self::new(pf, centered);
        }
        Self::new(pf, centered / top)
    }

    pub fn f1(&self) -> &DVector<f64> {
        &self.f1
    }

    pub fn dist_at(&self, eps: f64) -> Result<ProbDist> {
        let w = DVector::from_fn(self.f1.len(), |x, _| {
            (self.rho0.get(x) * (1.0 + eps * self.f1[x])).max(0.0)
        });
        ProbDist::from_weights(self.rho0.space().clone(), w)
    }
}

/// `h1` with `L0 h1 = -L1+ 1` and `<h1>_rho0 = 0`, via the bordered system
/// `[[L0, 1], [rho0^T, 0]] (h1, c) = (-L1+ 1, 0)`.
pub fn first_order_stationary(pf: &PerturbationFamily) -> Result<DVector<f64>> {
    let n = pf.k0.len();
    let l0 = build_generator(&pf.k0).into_matrix();
    let rhs_top = -(adjoint_matrix(&pf.l1(), &pf.rho0) * DVector::from_element(n, 1.0));
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&l0);
    for x in 0..n {
        a[(x, n)] = 1.0;
        a[(n, x)] = pf.rho0.get(x);
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&rhs_top);
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolveFailure("bordered system for h1 is singular".into()))?;
    let h1 = sol.rows(0, n).into_owned();
    let scale = l0.amax().max(1.0) * h1.amax().max(1.0);
    let residual = (&l0 * &h1 - &rhs_top).amax();
    if residual > EXPANSION_RESIDUAL_TOL * scale || !residual.is_finite() {
        return Err(Error::SolveFailure(format!("h1 residual {residual:e}")));
    }
    Ok(h1)
}

/// `g1* = (f1 - h1) / 2`, checked against `2 L0 g1 = L0 f1 + L1+ 1`.
pub fn first_order_maximizer(pf: &PerturbationFamily, df: &DistFamily) -> Result<DVector<f64>> {
    let n = pf.k0.len();
    let h1 = first_order_stationary(pf)?;
    let g1 = (&df.f1 - &h1) * 0.5;
    let l0 = build_generator(&pf.k0).into_matrix();
    let lhs = &l0 * &g1 * 2.0;
    let rhs = &l0 * &df.f1 + adjoint_matrix(&pf.l1(), &pf.rho0) * DVector::from_element(n, 1.0);
    let scale = l0.amax().max(1.0) * df.f1.amax().max(h1.amax()).max(1.0);
    let residual = (lhs - rhs).amax();
    if residual > EXPANSION_RESIDUAL_TOL * scale {
        return Err(Error::SolveFailure(format!("g1 residual {residual:e}")));
    }
    Ok(g1)
}

fn compact_form(pf: &PerturbationFamily, df: &DistFamily, eps: f64, weight_exact: bool) -> Result<f64> {
    let k = pf.rates_at(eps)?;
    let rho = stationary_distribution(&k)?;
    let mu = df.dist_at(eps)?;
    let l = build_generator(&k).into_matrix();
    let phi = DVector::from_fn(k.len(), |x, _| (mu.get(x) / rho.get(x)).sqrt());
    let lphi = &l * &phi;
    let weight = if weight_exact { &rho } else { &pf.rho0 };
    Ok(-(0..k.len())
        .map(|x| weight.get(x) * phi[x] * lphi[x])
        .sum::<f64>())
}

/// `-<phi L^eps phi>` with `phi = sqrt(mu^eps / rho^eps)`, averaged against
/// the exact `rho^eps`. Agrees with the rate function up to `O(eps^4)` for
/// these first-order families and exactly when `k^eps` is reversible.
pub fn dv_leading_order(pf: &PerturbationFamily, df: &DistFamily, eps: f64) -> Result<f64> {
    compact_form(pf, df, eps, true)
}

/// Same quadratic form averaged against `rho0`. Its `eps^2` coefficient falls
/// short of the rate function by `<L1 (f1 - h1)>_rho0 / 2`; kept to expose that offset.
pub fn dv_leading_order_reference_weighted(
    pf: &PerturbationFamily,
    df: &DistFamily,
    eps: f64,
) -> Result<f64> {
    compact_form(pf, df, eps, false)
}

/// `eps^2` coefficient
/// `-(1/4) <f1 L0 f1 - h1 L0 h1 + 2 L1 f1 - 2 L1 h1>_rho0`.
pub fn dv_second_order_coefficient(pf: &PerturbationFamily, df: &DistFamily) -> Result<f64> {
    let h1 = first_order_stationary(pf)?;
    let l0 = build_generator(&pf.k0).into_matrix();
    let l1 = pf.l1();
    let f1 = &df.f1;
    let integrand = f1.component_mul(&(&l0 * f1)) - h1.component_mul(&(&l0 * &h1))
        + (&l1 * f1) * 2.0
        - (&l1 * &h1) * 2.0;
    Ok(-0.25 * pf.rho0.expect(&integrand))
}

/// `|rho^eps - rho0 (1 + eps h1)|_inf`.
pub fn stationary_expansion_error(pf: &PerturbationFamily, eps: f64) -> Result<f64> {
    let h1 = first_order_stationary(pf)?;
    let rho = pf.stationary_at(eps)?;
    Ok((0..h1.len())
        .map(|x| (rho.get(x) - pf.rho0.get(x) * (1.0 + eps * h1[x])).abs())
        .fold(0.0, f64::max))
}

/// `|g*^eps - (1 + eps g1*)|_inf` with `g*^eps` rescaled to `<g*^eps>_rho0 = 1`.
pub fn maximizer_expansion_error(pf: &PerturbationFamily, df: &DistFamily, eps: f64) -> Result<f64> {
    let g1 = first_order_maximizer(pf, df)?;
    let k = pf.rates_at(eps)?;
    let mu = df.dist_at(eps)?;
    let g = crate::dv::dv_rate(&k, &mu)?.maximizer;
    let g = &g / pf.rho0.expect(&g);
    Ok((0..g.len())
        .map(|x| (g[x] - 1.0 - eps * g1[x]).abs())
        .fold(0.0, f64::max))
}

/// One line of the rate-function versus entropy-production comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub eps: f64,
    /// `I^eps(mu^eps)`.
    pub rate: f64,
    /// `(sigma^eps(mu^eps) - sigma^eps(rho^eps)) / 4`.
    pub excess: f64,
    pub diff: f64,
    pub diff_over_eps2: f64,
    pub rate_over_eps2: f64,
    pub excess_over_eps2: f64,
}

/// Default grid `10^-1, 10^-1.5, ..., 10^-4`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..7).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect()
}

fn scan_point(pf: &PerturbationFamily, df: &DistFamily, eps: f64) -> Result<ScanRow> {
    let k = pf.rates_at(eps)?;
    let mu = df.dist_at(eps)?;
    let rho = stationary_distribution(&k)?;
    let rate = dv_value(&k, &mu)?;
    let sigma_mu = entropy_production_rate(&k, &mu)?.value();
    let sigma_rho = entropy_production_rate(&k, &rho)?.value();
    let excess = 0.25 * (sigma_mu - sigma_rho);
    let diff = rate - excess;
    let e2 = eps * eps;
    Ok(ScanRow {
        eps,
        rate,
        excess,
        diff,
        diff_over_eps2: diff / e2,
        rate_over_eps2: rate / e2,
        excess_over_eps2: excess / e2,
    })
}

/// Evaluates the grid in parallel; rows keep the order of `eps_grid`.
pub fn theorem_main_scan(
    pf: &PerturbationFamily,
    df: &DistFamily,
    eps_grid: &[f64],
) -> Result<Vec<ScanRow>> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("empty eps grid".into()));
    }
    for &eps in eps_grid {
        if eps == 0.0 {
            return Err(Error::InvalidParameter("eps grid must exclude 0".into()));
        }
        pf.check_eps(eps)?;
    }
    eps_grid
        .par_iter()
        .map(|&eps| scan_point(pf, df, eps))
        .collect()
}
