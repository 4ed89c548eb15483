//! Built-in analytic target distributions.
//!
//! All continuous targets are normalized densities. The lattice target is a
//! normalized probability mass function over its grid points, with `-inf` off the
//! grid.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, DrError, Result};
use crate::logspace::{log_sum_exp, normal_cdf, normal_logpdf};

/// Something the sampler can evaluate. Dimensions are checked by the caller.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;

    /// Log-density at `x`; `-inf` outside the support.
    fn log_pi(&self, x: &[f64]) -> f64;
}

/// Role of one coordinate of an island comb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IslandDim {
    /// Mode `k` sits at `k * spacing` with width `mode_width`.
    Comb,
    /// Gaussian of width `sigma`; in island `k` it is centred at `k * shift`.
    Nuisance {
        sigma: f64,
        #[serde(default)]
        shift: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IslandCombConfig {
    pub n_modes: usize,
    pub spacing: f64,
    pub mode_width: f64,
    /// Island `k` carries weight proportional to `weight_decay^k`.
    pub weight_decay: f64,
    pub dims: Vec<IslandDim>,
}

/// Declarative description of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConfig {
    #[serde(rename = "gaussian_mixture_1d")]
    GaussianMixture1d {
        weights: Vec<f64>,
        centers: Vec<f64>,
        widths: Vec<f64>,
    },
    IslandComb(IslandCombConfig),
    DiscreteLattice {
        origin: f64,
        pitch: f64,
        probabilities: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    log_weight: f64,
    means: Vec<f64>,
    sds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Compiled {
    Mixture { dim: usize, components: Vec<Component> },
    Lattice { origin: f64, pitch: f64, log_p: Vec<f64> },
}

/// A validated target ready for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetConfig", into = "TargetConfig")]
pub struct TargetSpec {
    config: TargetConfig,
    compiled: Compiled,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn normalized_log_weights(weights: &[f64]) -> Vec<f64> {
    let log_total = weights.iter().sum::<f64>().ln();
    weights.iter().map(|w| w.ln() - log_total).collect()
}

impl TargetSpec {
    pub fn new(config: TargetConfig) -> Result<Self> {
        let compiled = match &config {
            TargetConfig::GaussianMixture1d {
                weights,
                centers,
                widths,
            } => {
                if weights.is_empty() {
                    return Err(invalid("weights", "at least one component is required"));
                }
                if centers.len() != weights.len() || widths.len() != weights.len() {
                    return Err(invalid("centers", "weights, centers and widths must have equal length"));
                }
                for &w in weights {
                    positive("weights", w)?;
                }
                for &c in centers {
                    if !c.is_finite() {
                        return Err(invalid("centers", format!("must be finite, got {c}")));
                    }
                }
                for &s in widths {
                    positive("widths", s)?;
                }
                let components = normalized_log_weights(weights)
                    .into_iter()
                    .zip(centers.iter().zip(widths))
                    .map(|(log_weight, (&c, &s))| Component {
                        log_weight,
                        means: vec![c],
                        sds: vec![s],
                    })
                    .collect();
                Compiled::Mixture { dim: 1, components }
            }
            TargetConfig::IslandComb(c) => {
                if c.n_modes == 0 {
                    return Err(invalid("n_modes", "at least one mode is required"));
                }
                positive("spacing", c.spacing)?;
                positive("mode_width", c.mode_width)?;
                positive("weight_decay", c.weight_decay)?;
                if c.dims.is_empty() {
                    return Err(invalid("dims", "at least one dimension is required"));
                }
                if !c.dims.iter().any(|d| matches!(d, IslandDim::Comb)) {
                    return Err(invalid("dims", "at least one comb dimension is required"));
                }
                for d in &c.dims {
                    if let IslandDim::Nuisance { sigma, shift } = d {
                        positive("sigma", *sigma)?;
                        if !shift.is_finite() {
                            return Err(invalid("shift", format!("must be finite, got {shift}")));
                        }
                    }
                }
                let weights: Vec<f64> = (0..c.n_modes).map(|k| c.weight_decay.powi(k as i32)).collect();
                if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(invalid("weight_decay", "mode weights underflow or overflow"));
                }
                let components = normalized_log_weights(&weights)
                    .into_iter()
                    .enumerate()
                    .map(|(k, log_weight)| {
                        let (means, sds) = c
                            .dims
                            .iter()
                            .map(|d| match d {
                                IslandDim::Comb => (k as f64 * c.spacing, c.mode_width),
                                IslandDim::Nuisance { sigma, shift } => (k as f64 * shift, *sigma),
                            })
                            .unzip();
                        Component { log_weight, means, sds }
                    })
                    .collect();
                Compiled::Mixture {
                    dim: c.dims.len(),
                    components,
                }
            }
            TargetConfig::DiscreteLattice {
                origin,
                pitch,
                probabilities,
            } => {
                if !origin.is_finite() {
                    return Err(invalid("origin", "must be finite"));
                }
                positive("pitch", *pitch)?;
                if probabilities.is_empty() {
                    return Err(invalid("probabilities", "at least one point is required"));
                }
                if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(invalid("probabilities", "entries must be finite and non-negative"));
                }
                let total: f64 = probabilities.iter().sum();
                if total <= 0.0 {
                    return Err(invalid("probabilities", "total mass must be positive"));
                }
                let log_p = probabilities.iter().map(|p| (p / total).ln()).collect();
                Compiled::Lattice {
                    origin: *origin,
                    pitch: *pitch,
                    log_p,
                }
            }
        };
        Ok(Self { config, compiled })
    }

    pub fn gaussian_mixture(weights: Vec<f64>, centers: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        Self::new(TargetConfig::GaussianMixture1d {
            weights,
            centers,
            widths,
        })
    }

    pub fn island_comb(config: IslandCombConfig) -> Result<Self> {
        Self::new(TargetConfig::IslandComb(config))
    }

    pub fn discrete_lattice(origin: f64, pitch: f64, probabilities: Vec<f64>) -> Result<Self> {
        Self::new(TargetConfig::DiscreteLattice {
            origin,
            pitch,
            probabilities,
        })
    }

    pub fn config(&self) -> &TargetConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        match &self.compiled {
            Compiled::Mixture { dim, .. } => *dim,
            Compiled::Lattice { .. } => 1,
        }
    }

    /// Log-density at `x` (log-mass for the lattice).
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.log_pi(x))
    }

    /// Number of modes (mixture components or lattice points).
    pub fn n_modes(&self) -> usize {
        match &self.compiled {
            Compiled::Mixture { components, .. } => components.len(),
            Compiled::Lattice { log_p, .. } => log_p.len(),
        }
    }

    /// Index of the heaviest mode; ties go to the lowest index.
    pub fn dominant_mode(&self) -> usize {
        let weights: Vec<f64> = match &self.compiled {
            Compiled::Mixture { components, .. } => components.iter().map(|c| c.log_weight).collect(),
            Compiled::Lattice { log_p, .. } => log_p.clone(),
        };
        let mut best = 0;
        for (i, w) in weights.iter().enumerate() {
            if *w > weights[best] {
                best = i;
            }
        }
        best
    }

    /// Center of mode `k`.
    pub fn mode_location(&self, k: usize) -> Option<Vec<f64>> {
        match &self.compiled {
            Compiled::Mixture { components, .. } => components.get(k).map(|c| c.means.clone()),
            Compiled::Lattice { origin, pitch, log_p } => (k < log_p.len()).then(|| vec![origin + k as f64 * pitch]),
        }
    }

    /// Mode with the largest posterior responsibility at `x`.
    pub fn mode_index(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        match &self.compiled {
            Compiled::Mixture { components, .. } => {
                let mut best = None;
                let mut best_v = f64::NEG_INFINITY;
                for (k, c) in components.iter().enumerate() {
                    let v = component_logpdf(c, x);
                    if v > best_v {
                        best_v = v;
                        best = Some(k);
                    }
                }
                best
            }
            Compiled::Lattice { origin, pitch, log_p } => lattice_index(*origin, *pitch, log_p.len(), x[0]),
        }
    }

    /// Grid points and probabilities of a lattice target.
    pub fn lattice(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.compiled {
            Compiled::Lattice { origin, pitch, log_p } => Some((
                (0..log_p.len()).map(|i| origin + i as f64 * pitch).collect(),
                log_p.iter().map(|l| l.exp()).collect(),
            )),
            Compiled::Mixture { .. } => None,
        }
    }

    /// Cumulative distribution function of a one-dimensional Gaussian mixture.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match &self.compiled {
            Compiled::Mixture { dim: 1, components } => {
                if let TargetConfig::IslandComb(c) = &self.config {
                    if !matches!(c.dims[0], IslandDim::Comb) {
                        return Err(DrError::Unsupported("cdf of a nuisance-only coordinate".into()));
                    }
                }
                let total: f64 = components
                    .iter()
                    .map(|c| c.log_weight.exp() * normal_cdf((x - c.means[0]) / c.sds[0]))
                    .sum();
                Ok(total.clamp(0.0, 1.0))
            }
            Compiled::Mixture { .. } => Err(DrError::Unsupported("cdf needs a one-dimensional target".into())),
            Compiled::Lattice { .. } => Err(DrError::Unsupported("cdf of a lattice target".into())),
        }
    }
}

fn component_logpdf(c: &Component, x: &[f64]) -> f64 {
    let mut v = c.log_weight;
    for ((&xi, &m), &s) in x.iter().zip(&c.means).zip(&c.sds) {
        v += normal_logpdf(xi, m, s);
    }
    v
}

fn lattice_index(origin: f64, pitch: f64, n: usize, x: f64) -> Option<usize> {
    let r = ((x - origin) / pitch).round();
    if !(r >= 0.0 && r < n as f64) {
        return None;
    }
    let off = (x - (origin + r * pitch)).abs();
    (off <= 1e-9 * pitch).then_some(r as usize)
}

impl LogTarget for TargetSpec {
    fn dim(&self) -> usize {
        TargetSpec::dim(self)
    }

    fn log_pi(&self, x: &[f64]) -> f64 {
        match &self.compiled {
            Compiled::Mixture { components, .. } => {
                if components.len() == 1 {
                    return component_logpdf(&components[0], x);
                }
                let mut terms = [0.0f64; 16];
                if components.len() <= terms.len() {
                    for (t, c) in terms.iter_mut().zip(components) {
                        *t = component_logpdf(c, x);
                    }
                    log_sum_exp(&terms[..components.len()])
                } else {
                    let v: Vec<f64> = components.iter().map(|c| component_logpdf(c, x)).collect();
                    log_sum_exp(&v)
                }
            }
            Compiled::Lattice { origin, pitch, log_p } => match lattice_index(*origin, *pitch, log_p.len(), x[0]) {
                Some(i) => log_p[i],
                None => f64::NEG_INFINITY,
            },
        }
    }
}

impl TryFrom<TargetConfig> for TargetSpec {
    type Error = DrError;

    fn try_from(config: TargetConfig) -> Result<Self> {
        Self::new(config)
    }
}

impl From<TargetSpec> for TargetConfig {
    fn from(t: TargetSpec) -> Self {
        t.config
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn comb(n: usize, decay: f64) -> TargetSpec {
        TargetSpec::island_comb(IslandCombConfig {
            n_modes: n,
            spacing: 1.25,
            mode_width: 0.2,
            weight_decay: decay,
            dims: vec![IslandDim::Comb],
        })
        .unwrap()
    }

    #[test]
    fn single_component_standard_normal() {
        let t = TargetSpec::gaussian_mixture(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        assert_relative_eq!(t.log_density(&[0.0]).unwrap(), -0.918_938_533_204_672_8, epsilon = 1e-14);
        assert_eq!(t.cdf(0.0).unwrap(), 0.5);
        assert_eq!(t.cdf(1e3).unwrap(), 1.0);
    }

    #[test]
    fn comb_modes_follow_geometric_weights() {
        let t = comb(5, 0.5);
        let v0 = t.log_density(&[0.0]).unwrap();
        for k in 1..5 {
            let vk = t.log_density(&[k as f64 * 1.25]).unwrap();
            // neighbours sit 6.25 widths away and leak about 2e-8 relative density
            assert!((vk - (v0 + k as f64 * 0.5f64.ln())).abs() < 1e-7);
        }
        assert_eq!(t.dominant_mode(), 0);
        assert_eq!(t.mode_index(&[3.0 * 1.25 + 0.1]), Some(3));
    }

    #[test]
    fn comb_reduces_to_mixture_exactly() {
        let t = comb(5, 0.5);
        let m = TargetSpec::gaussian_mixture(
            (0..5).map(|k| 0.5f64.powi(k)).collect(),
            (0..5).map(|k| k as f64 * 1.25).collect(),
            vec![0.2; 5],
        )
        .unwrap();
        for i in 0..200 {
            let x = -2.0 + i as f64 * 0.05;
            assert_eq!(t.log_density(&[x]).unwrap(), m.log_density(&[x]).unwrap());
            assert_eq!(t.cdf(x).unwrap(), m.cdf(x).unwrap());
        }
    }

    #[test]
    fn nuisance_shift_moves_islands_jointly() {
        let t = TargetSpec::island_comb(IslandCombConfig {
            n_modes: 3,
            spacing: 1.25,
            mode_width: 0.2,
            weight_decay: 0.5,
            dims: vec![IslandDim::Comb, IslandDim::Nuisance { sigma: 0.3, shift: 0.8 }],
        })
        .unwrap();
        assert_eq!(t.dim(), 2);
        let at_island = t.log_density(&[2.5, 1.6]).unwrap();
        let off_island = t.log_density(&[2.5, 0.0]).unwrap();
        assert!(at_island > off_island + 5.0);
        assert!(t.cdf(0.0).is_err());
        assert!(t.log_density(&[0.0]).is_err());
    }

    #[test]
    fn lattice_is_zero_off_grid() {
        let t = TargetSpec::discrete_lattice(-1.0, 0.5, vec![1.0, 2.0, 1.0]).unwrap();
        assert_relative_eq!(t.log_density(&[-0.5]).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
        assert_eq!(t.log_density(&[-0.4]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(t.log_density(&[5.0]).unwrap(), f64::NEG_INFINITY);
        assert!(t.cdf(0.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(TargetSpec::gaussian_mixture(vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(TargetSpec::gaussian_mixture(vec![-1.0], vec![0.0], vec![1.0]).is_err());
        assert!(TargetSpec::gaussian_mixture(vec![1.0, 1.0], vec![0.0], vec![1.0]).is_err());
        assert!(TargetSpec::island_comb(IslandCombConfig {
            n_modes: 3,
            spacing: 0.0,
            mode_width: 0.2,
            weight_decay: 0.5,
            dims: vec![IslandDim::Comb],
        })
        .is_err());
        assert!(TargetSpec::discrete_lattice(0.0, 1.0, vec![0.0, 0.0]).is_err());
    }
}
