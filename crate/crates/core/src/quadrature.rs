//! Deterministic quadrature rules shared by the semigroup oracles.

use std::sync::{Arc, OnceLock};

use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{Error, Result};

pub const DEFAULT_HERMITE_NODES: usize = 64;
pub const DEFAULT_LEGENDRE_NODES: usize = 64;

/// Nodes and weights for `E g(Z)`, `Z ~ N(0, 1)`; the weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(n: usize) -> Result<Self> {
        let rule = GaussHermite::new(n)
            .map_err(|e| Error::InvalidArgument(format!("Hermite rule of degree {n}: {e}")))?;
        let mut pairs = rule.into_node_weight_pairs();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(Self {
            nodes: pairs.iter().map(|p| std::f64::consts::SQRT_2 * p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    pub fn default_rule() -> Arc<NormalRule> {
        static RULE: OnceLock<Arc<NormalRule>> = OnceLock::new();
        RULE.get_or_init(|| Arc::new(NormalRule::new(DEFAULT_HERMITE_NODES).expect("valid degree")))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * g(*z))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LegendreRule {
    pub fn new(n: usize) -> Result<Self> {
        let rule = GaussLegendre::new(n)
            .map_err(|e| Error::InvalidArgument(format!("Legendre rule of degree {n}: {e}")))?;
        let mut pairs = rule.into_node_weight_pairs();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn default_rule() -> Arc<LegendreRule> {
        static RULE: OnceLock<Arc<LegendreRule>> = OnceLock::new();
        RULE.get_or_init(|| Arc::new(LegendreRule::new(DEFAULT_LEGENDRE_NODES).expect("valid degree")))
            .clone()
    }

    pub fn integrate(&self, a: f64, b: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w * g(mid + half * u))
            .sum::<f64>()
    }
}

/// Composite Simpson weights for `panels` panels (rounded up to even) of width `h`.
pub fn simpson_weights(panels: usize, h: f64) -> Vec<f64> {
    let n = panels + panels % 2;
    (0..=n)
        .map(|k| {
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Composite Simpson rule on `[a, b]`.
pub fn simpson(a: f64, b: f64, panels: usize, mut g: impl FnMut(f64) -> f64) -> f64 {
    if b == a {
        return 0.0;
    }
    let n = (panels + panels % 2).max(2);
    let h = (b - a) / n as f64;
    simpson_weights(n, h)
        .iter()
        .enumerate()
        .map(|(k, w)| w * g(a + k as f64 * h))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_rule_moments() {
        let r = NormalRule::default_rule();
        assert_eq!(r.len(), 64);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(r.expect(|z| z).abs() < 1e-13);
        assert!((r.expect(|z| z * z) - 1.0).abs() < 1e-13);
        assert!((r.expect(|z| z.powi(4)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_and_simpson_on_polynomials() {
        let r = LegendreRule::default_rule();
        assert!((r.integrate(0.0, 2.0, |x| x.powi(5)) - 64.0 / 6.0).abs() < 1e-12);
        assert!((simpson(0.0, 1.0, 10, |x| x.powi(3)) - 0.25).abs() < 1e-15);
        assert!((simpson(0.0, 1.0, 7, |x| x * x) - 1.0 / 3.0).abs() < 1e-15);
    }
}
