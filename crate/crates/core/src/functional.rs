//! Bounded functionals on path space and the shift action on them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::Path;

/// Tolerance used by [`check_adapted`].
pub const ADAPTED_TOL: f64 = 1e-10;

/// A real function on the state space `R^d` with an optional sup-norm bound.
#[derive(Clone)]
pub struct StateFn {
    name: String,
    bound: Option<f64>,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl StateFn {
    pub fn new(
        name: impl Into<String>,
        bound: Option<f64>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            bound,
            f: Arc::new(f),
        }
    }

    /// Wraps a scalar function applied to the first coordinate.
    pub fn scalar(
        name: impl Into<String>,
        bound: Option<f64>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, bound, move |x| f(x[0]))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), Some(c.abs()), move |_| c)
    }

    #[inline]
    pub fn call(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    #[inline]
    pub fn call1(&self, x: f64) -> f64 {
        (self.f)(std::slice::from_ref(&x))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }
}

impl fmt::Debug for StateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateFn")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .finish()
    }
}

/// `F: Path -> R` together with the metadata the operators rely on.
///
/// `horizon = Some(t)` promises that `F(p) == F(stop_at(p, t))`.
#[derive(Clone)]
pub struct Functional {
    eval: Arc<dyn Fn(&Path) -> f64 + Send + Sync>,
    horizon: Option<f64>,
    bound: Option<f64>,
    dim: Option<usize>,
}

impl Functional {
    pub fn new(f: impl Fn(&Path) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            horizon: None,
            bound: None,
            dim: None,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    /// Restricts the functional to paths of state dimension `dim`.
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c).with_horizon(f64::NEG_INFINITY).with_bound(c.abs())
    }

    #[inline]
    pub fn evaluate(&self, p: &Path) -> f64 {
        (self.eval)(p)
    }

    pub fn try_evaluate(&self, p: &Path) -> Result<f64> {
        self.check_dim(p.dim())?;
        Ok(self.evaluate(p))
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim {
            Some(d) if d != dim => Err(Error::Dimension {
                expected: d,
                found: dim,
            }),
            _ => Ok(()),
        }
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn bound_hint(&self) -> Option<f64> {
        self.bound
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// `[shift(F, t)](p) = F(shift(p, t))`.
    ///
    /// A functional looking at the path up to time `h` becomes one that looks
    /// up to `h + t` (e.g. evaluation at `s` turns into evaluation at `s + t`).
    pub fn shift(&self, t: f64) -> Functional {
        if t == 0.0 {
            return self.clone();
        }
        let inner = self.eval.clone();
        Functional {
            eval: Arc::new(move |p| inner(&p.shift(t))),
            horizon: self.horizon.map(|h| h + t),
            bound: self.bound,
            dim: self.dim,
        }
    }

    pub fn product(&self, other: &Functional) -> Functional {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Functional {
            eval: Arc::new(move |p| a(p) * b(p)),
            horizon: max_horizon(self.horizon, other.horizon),
            bound: self.bound.zip(other.bound).map(|(x, y)| x * y),
            dim: self.dim.or(other.dim),
        }
    }

    pub fn sum(&self, other: &Functional) -> Functional {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Functional {
            eval: Arc::new(move |p| a(p) + b(p)),
            horizon: max_horizon(self.horizon, other.horizon),
            bound: self.bound.zip(other.bound).map(|(x, y)| x + y),
            dim: self.dim.or(other.dim),
        }
    }

    pub fn scaled(&self, c: f64) -> Functional {
        let a = self.eval.clone();
        Functional {
            eval: Arc::new(move |p| c * a(p)),
            horizon: self.horizon,
            bound: self.bound.map(|b| b * c.abs()),
            dim: self.dim,
        }
    }

    pub fn abs(&self) -> Functional {
        let a = self.eval.clone();
        Functional {
            eval: Arc::new(move |p| a(p).abs()),
            ..self.clone()
        }
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("horizon", &self.horizon)
            .field("bound", &self.bound)
            .field("dim", &self.dim)
            .finish()
    }
}

fn max_horizon(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    }
}

/// `p -> f(p(t))`.
pub fn make_eval(f: &StateFn, t: f64) -> Functional {
    let f = f.clone();
    let bound = f.bound();
    let mut out = Functional::new(move |p| {
        if p.dim() == 1 {
            f.call1(p.eval1(t))
        } else {
            f.call(&p.eval(t))
        }
    })
    .with_horizon(t);
    out.bound = bound;
    out
}

/// Breakpoints of `[a, b]`: the endpoints and every grid node strictly inside.
pub(crate) fn breakpoints(p: &Path, a: f64, b: f64) -> Vec<f64> {
    let grid = p.grid();
    let eps = 1e-9 * grid.dt();
    let mut pts = Vec::with_capacity(grid.n_nodes() + 2);
    pts.push(a);
    pts.extend(grid.node_times().filter(|&t| t > a + eps && t < b - eps));
    if b > a {
        pts.push(b);
    }
    pts
}

/// Composite trapezoid of `s -> f(p(s))` over `[a, b]` on the path's own nodes.
///
/// Segment right ends use left limits, so a jump at `b` does not enter.
pub(crate) fn path_trapezoid(p: &Path, a: f64, b: f64, f: &StateFn) -> f64 {
    if b <= a {
        return 0.0;
    }
    let reuse = !p.has_jump();
    let grid = p.grid();
    if let (Some(ka), Some(kb)) = (grid.node_index(a), grid.node_index(b)) {
        let mut left = f.call(p.node(ka));
        let mut total = 0.0;
        for k in ka..kb {
            let u = if k == ka { a } else { grid.node_time(k) };
            let v = if k + 1 == kb { b } else { grid.node_time(k + 1) };
            let right = f.call(p.node_left(k + 1));
            total += 0.5 * (left + right) * (v - u);
            left = if reuse { right } else { f.call(p.node(k + 1)) };
        }
        return total;
    }
    let pts = breakpoints(p, a, b);
    let mut buf = vec![0.0; p.dim()];
    p.eval_into(pts[0], &mut buf);
    let mut left = f.call(&buf);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (u, v) = (w[0], w[1]);
        p.eval_left_into(v, &mut buf);
        let right = f.call(&buf);
        total += 0.5 * (left + right) * (v - u);
        left = if reuse {
            right
        } else {
            p.eval_into(v, &mut buf);
            f.call(&buf)
        };
    }
    total
}

/// Composite trapezoid of `s -> psi(s, p)` over `[a, b]` on the path's own nodes.
pub fn path_trapezoid_process(p: &Path, a: f64, b: f64, psi: &AdaptedProcess) -> f64 {
    if b <= a {
        return 0.0;
    }
    let pts = breakpoints(p, a, b);
    let vals: Vec<f64> = pts.iter().map(|&s| psi.at(s, p)).collect();
    pts.windows(2)
        .zip(vals.windows(2))
        .map(|(w, v)| 0.5 * (v[0] + v[1]) * (w[1] - w[0]))
        .sum()
}

/// `p -> ∫_a^b f(p(s)) ds` by the composite trapezoid rule on the path grid.
pub fn make_integral(f: &StateFn, a: f64, b: f64) -> Result<Functional> {
    if !(a <= b) {
        return Err(Error::InvalidInterval { a, b });
    }
    let f = f.clone();
    let bound = f.bound().map(|m| m * (b - a));
    let mut out = Functional::new(move |p| path_trapezoid(p, a, b, &f)).with_horizon(b);
    out.bound = bound;
    Ok(out)
}

/// `p -> f(max_{s in [t, end]} p(s))` for scalar paths.
pub fn make_running_max(f: &StateFn, t: f64, end: f64) -> Result<Functional> {
    if !(t <= end) {
        return Err(Error::InvalidInterval { a: t, b: end });
    }
    let f = f.clone();
    let bound = f.bound();
    let mut out = Functional::new(move |p| f.call1(running_max(p, t, end)))
        .with_horizon(end)
        .with_dim(1);
    out.bound = bound;
    Ok(out)
}

/// Maximum of the first coordinate over `[a, b]`, exact for piecewise linear paths.
pub fn running_max(p: &Path, a: f64, b: f64) -> f64 {
    let grid = p.grid();
    let mut m = p.eval1(a).max(p.eval1(b));
    let first = grid.floor_index(a).map_or(0, |k| k + 1);
    for k in first..grid.n_nodes() {
        let s = grid.node_time(k);
        if s > b {
            break;
        }
        if s >= a {
            m = m.max(p.node(k)[0]);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptedReport {
    pub adapted: bool,
    pub worst_index: usize,
    pub worst_gap: f64,
}

/// Spot check of `F == F ∘ stop_at(·, t)` on a panel of paths.
pub fn check_adapted(f: &Functional, t: f64, test_paths: &[Path]) -> Result<AdaptedReport> {
    if test_paths.is_empty() {
        return Err(Error::InvalidArgument("need at least one test path".into()));
    }
    let mut report = AdaptedReport {
        adapted: true,
        worst_index: 0,
        worst_gap: 0.0,
    };
    for (i, p) in test_paths.iter().enumerate() {
        let gap = (f.evaluate(p) - f.evaluate(&p.stop_at(t))).abs();
        if gap > report.worst_gap || gap.is_nan() {
            report.worst_gap = gap;
            report.worst_index = i;
        }
    }
    report.adapted = report.worst_gap <= ADAPTED_TOL;
    Ok(report)
}

/// An adapted process `V(t, p)` on the window `[0, end]`.
#[derive(Clone)]
pub struct AdaptedProcess {
    value: Arc<dyn Fn(f64, &Path) -> f64 + Send + Sync>,
    end: f64,
}

impl AdaptedProcess {
    pub fn new(end: f64, f: impl Fn(f64, &Path) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(f),
            end,
        }
    }

    /// `V(t, p) = u(t, p(t))`.
    pub fn cylinder(end: f64, u: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(end, move |t, p| {
            if p.dim() == 1 {
                u(t, std::slice::from_ref(&p.eval1(t)))
            } else {
                u(t, &p.eval(t))
            }
        })
    }

    #[inline]
    pub fn at(&self, t: f64, p: &Path) -> f64 {
        (self.value)(t, p)
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn check_window(&self, t: f64) -> Result<()> {
        if t < -1e-12 || t > self.end + 1e-12 {
            return Err(Error::Window { t, end: self.end });
        }
        Ok(())
    }

    /// The `t`-section `p -> V(t, p)` as a functional with horizon `t`.
    pub fn section(&self, t: f64) -> Functional {
        let v = self.value.clone();
        Functional::new(move |p| v(t, p)).with_horizon(t)
    }

    /// `V(t) - W(t)`.
    pub fn minus(&self, other: &AdaptedProcess) -> AdaptedProcess {
        let (a, b) = (self.value.clone(), other.value.clone());
        AdaptedProcess {
            value: Arc::new(move |t, p| a(t, p) - b(t, p)),
            end: self.end.min(other.end),
        }
    }
}

impl fmt::Debug for AdaptedProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptedProcess").field("end", &self.end).finish()
    }
}
