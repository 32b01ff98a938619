//! Bounded smooth test functions on the state space, with the closed forms the
//! Gaussian semigroup produces on them.

use serde::{Deserialize, Serialize};

use crate::functional::StateFn;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogFn {
    Cos,
    Sin,
    Tanh,
    /// `x -> exp(-x^2)`
    GaussianBump,
    /// `x -> x^2`, unbounded but convenient for moment checks.
    Square,
    Identity,
    Constant(f64),
    /// Projection on the given coordinate.
    Coordinate(usize),
}

impl CatalogFn {
    /// The bounded members used for property sweeps.
    pub const BOUNDED: [CatalogFn; 4] = [
        CatalogFn::Cos,
        CatalogFn::Tanh,
        CatalogFn::GaussianBump,
        CatalogFn::Constant(0.7),
    ];

    pub fn name(&self) -> String {
        match self {
            CatalogFn::Cos => "cos".into(),
            CatalogFn::Sin => "sin".into(),
            CatalogFn::Tanh => "tanh".into(),
            CatalogFn::GaussianBump => "gaussian_bump".into(),
            CatalogFn::Square => "square".into(),
            CatalogFn::Identity => "identity".into(),
            CatalogFn::Constant(c) => format!("const({c})"),
            CatalogFn::Coordinate(i) => format!("coord({i})"),
        }
    }

    pub fn bound(&self) -> Option<f64> {
        match self {
            CatalogFn::Cos | CatalogFn::Sin | CatalogFn::Tanh | CatalogFn::GaussianBump => Some(1.0),
            CatalogFn::Constant(c) => Some(c.abs()),
            CatalogFn::Square | CatalogFn::Identity | CatalogFn::Coordinate(_) => None,
        }
    }

    /// Value on a scalar argument.
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            CatalogFn::Cos => x.cos(),
            CatalogFn::Sin => x.sin(),
            CatalogFn::Tanh => x.tanh(),
            CatalogFn::GaussianBump => (-x * x).exp(),
            CatalogFn::Square => x * x,
            CatalogFn::Identity | CatalogFn::Coordinate(0) => x,
            CatalogFn::Constant(c) => c,
            CatalogFn::Coordinate(_) => 0.0,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            CatalogFn::Cos => -x.sin(),
            CatalogFn::Sin => x.cos(),
            CatalogFn::Tanh => {
                let c = x.cosh();
                1.0 / (c * c)
            }
            CatalogFn::GaussianBump => -2.0 * x * (-x * x).exp(),
            CatalogFn::Square => 2.0 * x,
            CatalogFn::Identity | CatalogFn::Coordinate(0) => 1.0,
            CatalogFn::Constant(_) | CatalogFn::Coordinate(_) => 0.0,
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            CatalogFn::Cos => -x.cos(),
            CatalogFn::Sin => -x.sin(),
            CatalogFn::Tanh => {
                let c = x.cosh();
                -2.0 * x.tanh() / (c * c)
            }
            CatalogFn::GaussianBump => (4.0 * x * x - 2.0) * (-x * x).exp(),
            CatalogFn::Square => 2.0,
            _ => 0.0,
        }
    }

    pub fn state_fn(&self) -> StateFn {
        let me = *self;
        match me {
            CatalogFn::Coordinate(i) => StateFn::new(me.name(), None, move |x| x[i]),
            _ => StateFn::new(me.name(), me.bound(), move |x| me.value(x[0])),
        }
    }

    pub fn derivative_fn(&self) -> StateFn {
        let me = *self;
        let bound = match me {
            CatalogFn::Cos | CatalogFn::Sin | CatalogFn::Tanh => Some(1.0),
            CatalogFn::GaussianBump => Some((2.0f64).sqrt() * (-0.5f64).exp()),
            CatalogFn::Identity | CatalogFn::Constant(_) => Some(1.0),
            _ => None,
        };
        StateFn::new(format!("d{}", me.name()), bound, move |x| me.derivative(x[0]))
    }

    /// `E f(x + sqrt(t) Z)` in closed form, when one is known.
    pub fn heat_closed_form(&self, t: f64, x: f64) -> Option<f64> {
        match *self {
            CatalogFn::Cos => Some((-t / 2.0).exp() * x.cos()),
            CatalogFn::Sin => Some((-t / 2.0).exp() * x.sin()),
            CatalogFn::GaussianBump => {
                let s = 1.0 + 2.0 * t;
                Some((-x * x / s).exp() / s.sqrt())
            }
            CatalogFn::Square => Some(x * x + t),
            CatalogFn::Identity => Some(x),
            CatalogFn::Constant(c) => Some(c),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for f in [
            CatalogFn::Cos,
            CatalogFn::Sin,
            CatalogFn::Tanh,
            CatalogFn::GaussianBump,
            CatalogFn::Square,
        ] {
            for x in [-1.3, -0.2, 0.0, 0.4, 2.1] {
                let d1 = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                let d2 = (f.derivative(x + h) - f.derivative(x - h)) / (2.0 * h);
                assert!((d1 - f.derivative(x)).abs() < 1e-8, "{f:?} at {x}");
                assert!((d2 - f.second_derivative(x)).abs() < 1e-8, "{f:?} at {x}");
            }
        }
    }

    #[test]
    fn bounds_hold_on_a_sweep() {
        for f in CatalogFn::BOUNDED {
            let b = f.bound().unwrap();
            for i in -200..=200 {
                assert!(f.value(i as f64 * 0.05).abs() <= b);
            }
        }
    }
}
