//! Linear Langevin dynamics `dX = (E - gamma X) dt + sqrt(2 gamma / beta) dW`
//! evaluated on Gaussian distributions.
//!
//! With `f = dmu/drho` for the stationary law `rho = N(E/gamma, 1/beta)`:
//! the rate function is `(gamma / 4 beta) <f'^2 / f>_rho`, the entropy
//! production of an even variable is four times that, and for an odd
//! variable it is `(gamma/beta) <(f' + (beta E/gamma) f)^2 / f>_rho`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Behaviour of the state variable under time reversal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OUModel {
    drive: f64,
    friction: f64,
    beta: f64,
    parity: Parity,
}

impl OUModel {
    pub fn new(drive: f64, friction: f64, beta: f64, parity: Parity) -> Result<Self> {
        if !drive.is_finite() {
            return Err(Error::InvalidParameter(format!("drive = {drive}")));
        }
        if !(friction > 0.0 && friction.is_finite()) {
            return Err(Error::InvalidParameter(format!("friction = {friction}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {beta}")));
        }
        Ok(Self {
            drive,
            friction,
            beta,
            parity,
        })
    }

    pub fn drive(&self) -> f64 {
        self.drive
    }

    pub fn friction(&self) -> f64 {
        self.friction
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn with_parity(self, parity: Parity) -> Self {
        Self { parity, ..self }
    }

    /// Stationary law `N(E/gamma, 1/beta)`.
    pub fn stationary(&self) -> GaussianDist {
        GaussianDist {
            mean: self.drive / self.friction,
            var: 1.0 / self.beta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianDist {
    mean: f64,
    var: f64,
}

impl GaussianDist {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidParameter(format!("mean = {mean}")));
        }
        if !(var > 0.0 && var.is_finite()) {
            return Err(Error::InvalidParameter(format!("variance = {var}")));
        }
        Ok(Self { mean, var })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn var(&self) -> f64 {
        self.var
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = x - self.mean;
        (-0.5 * z * z / self.var).exp() / (2.0 * PI * self.var).sqrt()
    }
}

/// `<f'^2 / f>_rho = s^2 a^2 + (m - m0)^2 / s0^4` with `a = 1/s0^2 - 1/s^2`.
fn fisher_closed(m: &OUModel, mu: &GaussianDist) -> f64 {
    let rho = m.stationary();
    let a = 1.0 / rho.var - 1.0 / mu.var;
    let d = (mu.mean - rho.mean) / rho.var;
    mu.var * a * a + d * d
}

/// `(log f)'(x)` for `f = dmu/drho`.
fn log_density_slope(m: &OUModel, mu: &GaussianDist, x: f64) -> f64 {
    let rho = m.stationary();
    -(x - mu.mean) / mu.var + (x - rho.mean) / rho.var
}

const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-13;
const TAIL_WIDTHS: f64 = 12.0;

/// `int mu(x) g(x) dx` over `m +- 12 s` joined with `m0 +- 12 s0`.
fn mu_average<G: Fn(f64) -> f64>(m: &OUModel, mu: &GaussianDist, g: G) -> Result<f64> {
    let rho = m.stationary();
    let (s, s0) = (mu.var.sqrt(), rho.var.sqrt());
    let lo = (mu.mean - TAIL_WIDTHS * s).min(rho.mean - TAIL_WIDTHS * s0);
    let hi = (mu.mean + TAIL_WIDTHS * s).max(rho.mean + TAIL_WIDTHS * s0);
    Ok(integrate(|x| mu.density(x) * g(x), lo, hi, QUAD_ABS_TOL, QUAD_REL_TOL)?.value)
}

pub fn ou_dv_rate(m: &OUModel, mu: &GaussianDist) -> f64 {
    m.friction / (4.0 * m.beta) * fisher_closed(m, mu)
}

/// Rate function by quadrature of `int mu [(log f)']^2`.
pub fn ou_dv_rate_quadrature(m: &OUModel, mu: &GaussianDist) -> Result<f64> {
    let fisher = mu_average(m, mu, |x| log_density_slope(m, mu, x).powi(2))?;
    Ok(m.friction / (4.0 * m.beta) * fisher)
}

pub fn ou_entropy_production(m: &OUModel, mu: &GaussianDist) -> f64 {
    let g_over_b = m.friction / m.beta;
    match m.parity {
        Parity::Even => g_over_b * fisher_closed(m, mu),
        Parity::Odd => {
            let rho = m.stationary();
            let a = 1.0 / rho.var - 1.0 / mu.var;
            let b = mu.mean / mu.var - rho.mean / rho.var;
            let shifted = a * mu.mean + b + m.beta * m.drive / m.friction;
            g_over_b * (mu.var * a * a + shifted * shifted)
        }
    }
}

pub fn ou_entropy_production_quadrature(m: &OUModel, mu: &GaussianDist) -> Result<f64> {
    let shift = match m.parity {
        Parity::Even => 0.0,
        Parity::Odd => m.beta * m.drive / m.friction,
    };
    let avg = mu_average(m, mu, |x| (log_density_slope(m, mu, x) + shift).powi(2))?;
    Ok(m.friction / m.beta * avg)
}

/// `sigma(rho)`: zero for even parity, `beta E^2 / gamma` for odd.
pub fn ou_stationary_entropy_production(m: &OUModel) -> f64 {
    ou_entropy_production(m, &m.stationary())
}

/// `I(mu) - (sigma(mu) + sigma(rho) - 2 beta E <v>_mu) / 4` for odd parity.
pub fn ou_modified_identity_check(m: &OUModel, mu: &GaussianDist) -> Result<f64> {
    if m.parity != Parity::Odd {
        return Err(Error::InvalidParameter(
            "modified identity applies to odd parity".into(),
        ));
    }
    let rhs = 0.25
        * (ou_entropy_production(m, mu) + ou_stationary_entropy_production(m)
            - 2.0 * m.beta * m.drive * mu.mean);
    Ok(ou_dv_rate(m, mu) - rhs)
}

/// Means solving `sigma(N(m, var)) = beta E m` at fixed variance, ascending.
///
/// The constraint reads `gamma beta m^2 - beta E m + (gamma/beta) var a^2 = 0`.
pub fn constrained_means(m: &OUModel, var: f64) -> Result<Vec<f64>> {
    if m.parity != Parity::Odd {
        return Err(Error::InvalidParameter(
            "the entropy-production constraint applies to odd parity".into(),
        ));
    }
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::InvalidParameter(format!("variance = {var}")));
    }
    let (g, b, e) = (m.friction, m.beta, m.drive);
    let a = b - 1.0 / var;
    let c = g / b * var * a * a;
    let disc = b * b * e * e - 4.0 * g * b * c;
    if disc < 0.0 {
        return Err(Error::ConstraintInfeasible { variance: var });
    }
    let root = disc.sqrt();
    let lo = (b * e - root) / (2.0 * g * b);
    let hi = (b * e + root) / (2.0 * g * b);
    Ok(if root == 0.0 { vec![hi] } else { vec![lo, hi] })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxEpCheck {
    /// `sigma(mu) <= sigma(rho) + 1e-10` everywhere with equality at `rho`.
    pub holds: bool,
    pub sigma_rho: f64,
    /// Largest `sigma(mu) - sigma(rho)` over the constrained grid.
    pub max_excess: f64,
    /// Largest `|sigma(mu) - beta E m|` over the grid.
    pub max_constraint_residual: f64,
    pub points: Vec<(GaussianDist, f64)>,
}

const MAX_EP_TOL: f64 = 1e-10;
const CONSTRAINT_TOL: f64 = 1e-9;

/// For each variance, solves the constraint for the mean and compares
/// `sigma(mu)` with `sigma(rho)`. The stationary law is always included.
pub fn ou_max_ep_principle_check(m: &OUModel, variances: &[f64]) -> Result<MaxEpCheck> {
    let rho = m.stationary();
    let sigma_rho = ou_stationary_entropy_production(m);
    let mut points = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_residual = 0.0f64;
    let mut all_vars = vec![rho.var];
    all_vars.extend_from_slice(variances);
    for &var in &all_vars {
        for mean in constrained_means(m, var)? {
            let mu = GaussianDist::new(mean, var)?;
            let sigma = ou_entropy_production(m, &mu);
            let residual = (sigma - m.beta * m.drive * mean).abs();
            if residual > CONSTRAINT_TOL * (1.0 + sigma.abs()) {
                return Err(Error::SolverFailure(format!(
                    "constraint residual {residual:e} at variance {var}"
                )));
            }
            max_residual = max_residual.max(residual);
            max_excess = max_excess.max(sigma - sigma_rho);
            points.push((mu, sigma));
        }
    }
    let at_rho = ou_entropy_production(m, &rho);
    let holds = max_excess <= MAX_EP_TOL && (at_rho - sigma_rho).abs() <= MAX_EP_TOL;
    Ok(MaxEpCheck {
        holds,
        sigma_rho,
        max_excess,
        max_constraint_residual: max_residual,
        points,
    })
}

/// Series RL circuit driven by an emf and Johnson-Nyquist noise; the state
/// variable is the current.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitModel {
    resistance: f64,
    inductance: f64,
    emf: f64,
    beta: f64,
}

impl CircuitModel {
    pub fn new(resistance: f64, inductance: f64, emf: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("resistance", resistance), ("inductance", inductance), ("beta", beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if !emf.is_finite() {
            return Err(Error::InvalidParameter(format!("emf = {emf}")));
        }
        Ok(Self {
            resistance,
            inductance,
            emf,
            beta,
        })
    }

    /// `gamma = R/L`, drive `E/L`, inverse temperature `beta L`; the current is odd.
    pub fn to_ou(&self) -> OUModel {
        OUModel {
            drive: self.emf / self.inductance,
            friction: self.resistance / self.inductance,
            beta: self.beta * self.inductance,
            parity: Parity::Odd,
        }
    }

    pub fn stationary_current(&self) -> f64 {
        self.emf / self.resistance
    }
}

/// `(beta R / 4) (jbar - E/R)^2`.
pub fn circuit_contracted_rate(c: &CircuitModel, jbar: f64) -> f64 {
    let d = jbar - c.stationary_current();
    0.25 * c.beta * c.resistance * d * d
}

/// Minimizes the rate function over the variance of `N(jbar, s^2)` by
/// golden-section search on `log s^2`. Returns the minimum and its argmin.
pub fn circuit_contracted_rate_numerical(c: &CircuitModel, jbar: f64) -> Result<(f64, f64)> {
    let m = c.to_ou();
    let centre = m.stationary().var.ln();
    let objective = |log_var: f64| -> Result<f64> {
        Ok(ou_dv_rate(&m, &GaussianDist::new(jbar, log_var.exp())?))
    };
    let (mut a, mut b) = (centre - 20.0, centre + 20.0);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (objective(x1)?, objective(x2)?);
    while b - a > 1e-10 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((objective(x)?, x.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn odd(drive: f64) -> OUModel {
        OUModel::new(drive, 1.0, 1.0, Parity::Odd).unwrap()
    }

    #[test]
    fn stationary_values() {
        let m = OUModel::new(0.7, 1.3, 2.0, Parity::Even).unwrap();
        let rho = m.stationary();
        assert_eq!(ou_dv_rate(&m, &rho), 0.0);
        assert_eq!(ou_entropy_production(&m, &rho), 0.0);
        let m = m.with_parity(Parity::Odd);
        assert_relative_eq!(
            ou_stationary_entropy_production(&m),
            2.0 * 0.7 * 0.7 / 1.3,
            max_relative = 1e-15
        );
        assert!(ou_modified_identity_check(&m, &rho).unwrap().abs() < 1e-15);
    }

    #[test]
    fn mean_shift_rate() {
        let m = OUModel::new(0.0, 1.0, 1.0, Parity::Even).unwrap();
        let mu = GaussianDist::new(0.3, 1.0).unwrap();
        assert_relative_eq!(ou_dv_rate(&m, &mu), 0.0225, max_relative = 1e-14);
        assert_relative_eq!(ou_dv_rate_quadrature(&m, &mu).unwrap(), 0.0225, max_relative = 1e-10);
    }

    #[test]
    fn modified_identity_instance() {
        let m = odd(1.0);
        let mu = GaussianDist::new(1.5, 1.0).unwrap();
        assert!(ou_modified_identity_check(&m, &mu).unwrap().abs() <= 1e-12);
        assert!(ou_modified_identity_check(&m.with_parity(Parity::Even), &mu).is_err());
    }

    #[test]
    fn odd_entropy_production_can_fall_below_stationary() {
        let m = odd(1.0);
        let mu = GaussianDist::new(0.5, 1.0).unwrap();
        assert!(ou_entropy_production(&m, &mu) < ou_stationary_entropy_production(&m));
    }

    #[test]
    fn max_ep_on_constraint_set() {
        let m = odd(1.0);
        let vars: Vec<f64> = (1..20).map(|i| 0.6 + 0.04 * i as f64).collect();
        let check = ou_max_ep_principle_check(&m, &vars).unwrap();
        assert!(check.holds, "{check:?}");
        assert!(check.max_constraint_residual < 1e-12);
        assert!(matches!(
            ou_max_ep_principle_check(&m, &[50.0]),
            Err(Error::ConstraintInfeasible { .. })
        ));
        let eq = odd(0.0);
        let check = ou_max_ep_principle_check(&eq, &[]).unwrap();
        assert!(check.holds && check.sigma_rho == 0.0);
        assert!(ou_max_ep_principle_check(&eq, &[1.5]).is_err());
    }

    #[test]
    fn circuit_mapping_and_contraction() {
        let c = CircuitModel::new(2.0, 0.5, 1.0, 1.0).unwrap();
        let ou = c.to_ou();
        assert_relative_eq!(ou.stationary().var(), 1.0 / (1.0 * 0.5), max_relative = 1e-15);
        assert_relative_eq!(ou.stationary().mean(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(circuit_contracted_rate(&c, 1.0), 0.125, max_relative = 1e-15);
        let (num, var) = circuit_contracted_rate_numerical(&c, 1.0).unwrap();
        assert!((num - 0.125).abs() < 1e-12);
        assert_relative_eq!(var, ou.stationary().var(), max_relative = 1e-6);
        assert_eq!(circuit_contracted_rate(&c, 0.5), 0.0);
        for d in [0.1, 0.7, 2.5] {
            assert_eq!(circuit_contracted_rate(&c, 0.5 + d), circuit_contracted_rate(&c, 0.5 - d));
        }
    }

    proptest! {
        #[test]
        fn closed_forms_match_quadrature(
            mean in -2.0f64..3.0, var in 0.2f64..4.0, drive in -1.5f64..1.5,
            gamma in 0.3f64..3.0, beta in 0.3f64..3.0,
        ) {
            let mu = GaussianDist::new(mean, var).unwrap();
            for parity in [Parity::Even, Parity::Odd] {
                let m = OUModel::new(drive, gamma, beta, parity).unwrap();
                let i = ou_dv_rate(&m, &mu);
                let iq = ou_dv_rate_quadrature(&m, &mu).unwrap();
                prop_assert!((i - iq).abs() <= 1e-8 * i.abs().max(1e-4));
                let s = ou_entropy_production(&m, &mu);
                let sq = ou_entropy_production_quadrature(&m, &mu).unwrap();
                prop_assert!((s - sq).abs() <= 1e-8 * s.abs().max(1e-4));
            }
            let m = OUModel::new(drive, gamma, beta, Parity::Odd).unwrap();
            prop_assert!(ou_modified_identity_check(&m, &mu).unwrap().abs() <= 1e-10);
            let even = m.with_parity(Parity::Even);
            prop_assert!((ou_entropy_production(&even, &mu) - 4.0 * ou_dv_rate(&even, &mu)).abs()
                <= 1e-12 * ou_dv_rate(&even, &mu));
        }
    }
}
