//! Entropy production and occupation-time large deviations for finite
//! Markov jump processes and linear diffusions.

pub mod dv;
pub mod ensembles;
pub mod error;
pub mod io;
pub mod markov;
pub mod ou;
pub mod perturbation;
pub mod quadrature;
pub mod sim;
pub mod thermo;

pub use dv::{
    dirichlet_form, dv_objective, dv_rate, dv_rate_reversible, dv_rate_with, dv_value, spectral_gap,
    spectral_gap_bound, tilt_certificate, Certificate, DVResult, DvOptions,
};
pub use error::{Error, Result};
pub use markov::{
    build_generator, detailed_balance_defect, evolve_master, evolve_master_with, is_detailed_balance,
    is_irreducible, reversible_rates_from_potential, stationary_distribution, Edge, EvolveMethod,
    Generator, ProbDist, RateMatrix, StateSpace,
};
pub use thermo::{
    boltzmann_gibbs, entropy_decomposition, entropy_production_rate, entropy_rate_derivative_check,
    relative_entropy, EntropyRate, EntropySplit, ThermoEdge, ThermoModel,
};
pub use perturbation::{
    adjoint_apply, default_eps_grid, dv_leading_order, dv_second_order_coefficient,
    first_order_maximizer, first_order_stationary, theorem_main_scan, DistFamily,
    PerturbationFamily, ScanRow,
};
pub use ou::{
    circuit_contracted_rate, circuit_contracted_rate_numerical, constrained_means, ou_dv_rate,
    ou_dv_rate_quadrature, ou_entropy_production, ou_entropy_production_quadrature,
    ou_max_ep_principle_check, ou_modified_identity_check, ou_stationary_entropy_production,
    CircuitModel, GaussianDist, MaxEpCheck, OUModel, Parity,
};
pub use sim::{
    feynman_kac_estimate, gillespie, occupation, occupation_samples, tilted_perron_eigenvalue,
    FeynmanKac, OccupationRecord, Trajectory,
};
