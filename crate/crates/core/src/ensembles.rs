//! Random chains and distributions for sweeps and property checks.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::markov::{reversible_rates_from_potential, Edge, ProbDist, RateMatrix, StateSpace};
use crate::perturbation::{DistFamily, PerturbationFamily};

/// Edges of the undirected ring `0 - 1 - ... - (n-1) - 0` with unit prefactor.
pub fn ring_edges(n: usize) -> Vec<Edge> {
    (0..n).map(|x| Edge::new(x, (x + 1) % n, 1.0)).collect()
}

/// Reversible ring with unit prefactors and the given potential.
pub fn ring_potential_chain(potential: &[f64], beta: f64) -> RateMatrix {
    let n = potential.len();
    let space = StateSpace::indexed(n).expect("n >= 2");
    reversible_rates_from_potential(space, &ring_edges(n), potential, beta).expect("ring is connected")
}

/// Random connected undirected graph: a random spanning tree plus each
/// remaining pair with probability `extra`. Prefactors are uniform in [0.5, 2].
pub fn random_connected_edges<R: Rng + ?Sized>(rng: &mut R, n: usize, extra: f64) -> Vec<Edge> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut adj = vec![false; n * n];
    let mut edges = Vec::new();
    for i in 1..n {
        let a = order[i];
        let b = order[rng.random_range(0..i)];
        adj[a * n + b] = true;
        adj[b * n + a] = true;
        edges.push(Edge::new(a, b, rng.random_range(0.5..2.0)));
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if !adj[a * n + b] && rng.random_bool(extra) {
                edges.push(Edge::new(a, b, rng.random_range(0.5..2.0)));
            }
        }
    }
    edges
}

/// Reversible chain on a random connected graph with potential uniform in [-1, 1] and `beta = 1`.
pub fn random_reversible_chain<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RateMatrix {
    let space = StateSpace::indexed(n).expect("n >= 2");
    let edges = random_connected_edges(rng, n, 0.4);
    let potential: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    reversible_rates_from_potential(space, &edges, &potential, 1.0).expect("connected by construction")
}

/// Irreducible, generically non-reversible chain: a directed ring with rates
/// in [0.2, 2] plus random extra transitions.
pub fn random_irreducible_chain<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RateMatrix {
    let space = StateSpace::indexed(n).expect("n >= 2");
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        m[(x, (x + 1) % n)] = rng.random_range(0.2..2.0);
    }
    for x in 0..n {
        for y in 0..n {
            if x != y && m[(x, y)] == 0.0 && rng.random_bool(0.5) {
                m[(x, y)] = rng.random_range(0.2..2.0);
            }
        }
    }
    RateMatrix::new(space, m).expect("valid rates")
}

/// Driven family around a random reversible chain: on a ring with random
/// prefactors when `ring`, else on a random connected graph. Every directed
/// rate is perturbed by an independent relative amount, normalized to
/// `max |k1/k0| = 1` with `eps_max = 0.5`.
pub fn random_driven_family<R: Rng + ?Sized>(rng: &mut R, n: usize, ring: bool) -> PerturbationFamily {
    let space = StateSpace::indexed(n).expect("n >= 2");
    let edges = if ring {
        (0..n).map(|x| Edge::new(x, (x + 1) % n, rng.random_range(0.5..2.0))).collect()
    } else {
        random_connected_edges(rng, n, 0.4)
    };
    let potential: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let k0 = reversible_rates_from_potential(space, &edges, &potential, 1.0).expect("connected");
    let direction = DMatrix::from_fn(n, n, |x, y| {
        if k0.rate(x, y) > 0.0 {
            k0.rate(x, y) * rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    });
    PerturbationFamily::normalized(k0, direction, 0.5).expect("valid driven family")
}

/// Generic first-order distribution family, `max |f1| = 1`.
pub fn random_dist_family<R: Rng + ?Sized>(rng: &mut R, pf: &PerturbationFamily) -> DistFamily {
    let raw = random_function(rng, pf.k0().len(), 1.0);
    DistFamily::normalized(pf, raw).expect("bounded f1")
}

/// Distribution with weights uniform in `[floor, 1]`, normalized.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, space: &StateSpace, floor: f64) -> ProbDist {
    let w = DVector::from_fn(space.len(), |_, _| rng.random_range(floor..1.0));
    ProbDist::from_weights(space.clone(), w).expect("positive weights")
}

/// Function on states with entries uniform in `[-amp, amp]`.
pub fn random_function<R: Rng + ?Sized>(rng: &mut R, n: usize, amp: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-amp..amp))
}
