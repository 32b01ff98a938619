//! Time-dependent source terms `phi(t, x) = w(t) g(t, x)` and their integrals.
//!
//! The weight `w` carries the only possible singularity, an integrable
//! `1/sqrt(T - t)` blow-up at the terminal time. Integrals along paths use
//! product trapezoid weights computed in closed form, so the singular factor is
//! integrated exactly against the piecewise linear interpolant of `g`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{breakpoints, AdaptedProcess};
use crate::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeWeight {
    Unit,
    /// `scale / sqrt(terminal - t)`
    InverseSqrt { terminal: f64, scale: f64 },
}

impl TimeWeight {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            TimeWeight::Unit => 1.0,
            TimeWeight::InverseSqrt { terminal, scale } => scale / (terminal - t).sqrt(),
        }
    }

    /// `(∫_u^v w, ∫_u^v w(s) (s - u) ds)`, the moments needed for product
    /// integration against a linear function on `[u, v]`.
    pub fn moments(&self, u: f64, v: f64) -> (f64, f64) {
        match *self {
            TimeWeight::Unit => (v - u, 0.5 * (v - u) * (v - u)),
            TimeWeight::InverseSqrt { terminal, scale } => {
                let ru = (terminal - u).max(0.0);
                let rv = (terminal - v).max(0.0);
                let (su, sv) = (ru.sqrt(), rv.sqrt());
                let m0 = 2.0 * (su - sv);
                // ∫ (ru - r) r^{-1/2} dr over [rv, ru]
                let m1 = ru * m0 - (2.0 / 3.0) * (ru * su - rv * sv);
                (scale * m0, scale * m1)
            }
        }
    }
}

/// `phi(t, x) = w(t) g(t, x)`.
#[derive(Clone)]
pub struct SourceTerm {
    name: String,
    weight: TimeWeight,
    bound_hint: Option<f64>,
    g: Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
}

impl SourceTerm {
    pub fn new(
        name: impl Into<String>,
        weight: TimeWeight,
        g: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            weight,
            bound_hint: None,
            g: Arc::new(g),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", TimeWeight::Unit, |_, _| 0.0).with_bound_hint(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), TimeWeight::Unit, move |_, _| c).with_bound_hint(c.abs())
    }

    /// Declared bound on `|g|`; the solver checks it on every node it visits.
    pub fn with_bound_hint(mut self, hint: f64) -> Self {
        self.bound_hint = Some(hint);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weight(&self) -> TimeWeight {
        self.weight
    }

    pub fn bound_hint(&self) -> Option<f64> {
        self.bound_hint
    }

    /// The regular factor `g(t, x)`.
    #[inline]
    pub fn regular(&self, t: f64, x: &[f64]) -> f64 {
        (self.g)(t, x)
    }

    /// `phi(t, x)`.
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.weight.at(t) * self.regular(t, x)
    }

    pub(crate) fn check_hint(&self, t: f64, g: f64) -> Result<()> {
        match self.bound_hint {
            Some(hint) if !(g.abs() <= hint * (1.0 + 1e-12) + 1e-300) => Err(Error::Integrability {
                t,
                value: g.abs(),
                hint,
            }),
            _ => Ok(()),
        }
    }

    /// `∫_a^b phi(s, p(s)) ds` along a path, by product trapezoid on the path nodes.
    pub fn integrate_along(&self, p: &Path, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let reuse = !p.has_jump();
        let grid = p.grid();
        if let (Some(ka), Some(kb)) = (grid.node_index(a), grid.node_index(b)) {
            // node-aligned limits: walk the node values directly
            let mut gu = self.regular(a, p.node(ka));
            let mut total = 0.0;
            for k in ka..kb {
                let u = if k == ka { a } else { grid.node_time(k) };
                let v = if k + 1 == kb { b } else { grid.node_time(k + 1) };
                let gv = self.regular(v, p.node_left(k + 1));
                let (m0, m1) = self.weight.moments(u, v);
                total += gu * m0 + (gv - gu) / (v - u) * m1;
                gu = if reuse { gv } else { self.regular(v, p.node(k + 1)) };
            }
            return total;
        }
        let pts = breakpoints(p, a, b);
        let mut buf = vec![0.0; p.dim()];
        p.eval_into(pts[0], &mut buf);
        let mut gu = self.regular(pts[0], &buf);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let (u, v) = (w[0], w[1]);
            p.eval_left_into(v, &mut buf);
            let gv = self.regular(v, &buf);
            let (m0, m1) = self.weight.moments(u, v);
            total += gu * m0 + (gv - gu) / (v - u) * m1;
            gu = if reuse {
                gv
            } else {
                p.eval_into(v, &mut buf);
                self.regular(v, &buf)
            };
        }
        total
    }

    /// `Psi(t, p) = phi(t, p(t))` as an adapted process on `[0, end]`.
    pub fn as_process(&self, end: f64) -> AdaptedProcess {
        let me = self.clone();
        AdaptedProcess::cylinder(end, move |t, x| me.value(t, x))
    }
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm")
            .field("name", &self.name)
            .field("weight", &self.weight)
            .field("bound_hint", &self.bound_hint)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::TimeGrid;

    #[test]
    fn unit_weight_reduces_to_trapezoid() {
        let p = Path::scalar_fn(TimeGrid::new(0.0, 1.0, 10).unwrap(), |t| t);
        let src = SourceTerm::new("x", TimeWeight::Unit, |_, x| x[0]);
        assert!((src.integrate_along(&p, 0.0, 1.0) - 0.5).abs() < 1e-14);
        assert!((src.integrate_along(&p, 0.05, 0.95) - 0.45).abs() < 1e-14);
    }

    #[test]
    fn singular_weight_is_integrated_exactly_on_linear_data() {
        let terminal = 1.0;
        let w = TimeWeight::InverseSqrt {
            terminal,
            scale: 1.0,
        };
        let p = Path::scalar_fn(TimeGrid::new(0.0, 1.0, 8).unwrap(), |t| t);
        let src = SourceTerm::new("x/sqrt", w, |_, x| x[0]);
        // ∫_0^1 s / sqrt(1 - s) ds = 4/3
        assert!((src.integrate_along(&p, 0.0, 1.0) - 4.0 / 3.0).abs() < 1e-13);
        // ∫_0^1 1/sqrt(1-s) ds = 2
        let one = SourceTerm::new("1/sqrt", w, |_, _| 1.0);
        assert!((one.integrate_along(&p, 0.0, 1.0) - 2.0).abs() < 1e-13);
        let half = one.integrate_along(&p, 0.0, 0.5);
        assert!((half - 2.0 * (1.0 - 0.5f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn bound_hint_is_enforced() {
        let src = SourceTerm::constant(2.0).with_bound_hint(1.0);
        assert!(matches!(
            src.check_hint(0.0, src.regular(0.0, &[0.0])),
            Err(Error::Integrability { .. })
        ));
    }
}
