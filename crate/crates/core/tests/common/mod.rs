#![allow(dead_code)]

use drmc::proposal::{DimProposal, ProposalSpec, ThreeGaussianPair};
use drmc::rng::DrRng;
use drmc::targets::{IslandCombConfig, IslandDim, TargetSpec};
use rand::Rng;

pub fn random_pair(rng: &mut DrRng) -> ThreeGaussianPair {
    ThreeGaussianPair {
        sigma1: rng.random_range(0.1..1.0),
        sigma2: rng.random_range(0.05..0.6),
        mu: rng.random_range(0.5..3.0),
        na: rng.random_range(0.02..0.98),
        nb: rng.random_range(0.02..0.98),
    }
}

/// A 1-D or 2-D proposal; the second coordinate, when present, is sometimes a plain Gaussian.
pub fn random_proposal(rng: &mut DrRng, dim: usize) -> ProposalSpec {
    let dims = (0..dim)
        .map(|d| {
            if d > 0 && rng.random_bool(0.5) {
                DimProposal::SingleGaussian {
                    sigma: rng.random_range(0.1..1.5),
                }
            } else {
                DimProposal::ThreeGaussian(random_pair(rng))
            }
        })
        .collect();
    ProposalSpec::new(dims).unwrap()
}

pub fn random_target(rng: &mut DrRng, dim: usize) -> TargetSpec {
    if dim == 1 && rng.random_bool(0.5) {
        let n = rng.random_range(1..5);
        TargetSpec::gaussian_mixture(
            (0..n).map(|_| rng.random_range(0.1..1.0)).collect(),
            (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
            (0..n).map(|_| rng.random_range(0.1..1.5)).collect(),
        )
        .unwrap()
    } else {
        let mut dims = vec![IslandDim::Comb];
        for _ in 1..dim {
            dims.push(IslandDim::Nuisance {
                sigma: rng.random_range(0.3..2.0),
                shift: rng.random_range(-1.0..1.0),
            });
        }
        TargetSpec::island_comb(IslandCombConfig {
            n_modes: rng.random_range(2..6),
            spacing: rng.random_range(0.8..2.0),
            mode_width: rng.random_range(0.1..0.6),
            weight_decay: rng.random_range(0.2..1.0),
            dims,
        })
        .unwrap()
    }
}

/// `k + 1` states: a random start and candidates scattered around it.
pub fn random_path(rng: &mut DrRng, dim: usize, k: usize) -> Vec<Vec<f64>> {
    let scale = rng.random_range(0.3..3.0);
    let start: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..4.0)).collect();
    let mut path = vec![start.clone()];
    for _ in 0..k {
        path.push(start.iter().map(|s| s + rng.random_range(-scale..scale)).collect());
    }
    path
}

/// `|a - b| <= tol * max(1, |b|)`, with equal infinities accepted.
pub fn log_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * b.abs().max(1.0)
}
