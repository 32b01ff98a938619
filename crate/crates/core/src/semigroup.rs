//! Semigroups induced by expectation operators, the analytic Gaussian oracle,
//! Laplace resolvents and the variation-of-constants final value solver.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expectation::{check_homogeneity, AxiomReport, EvolutionMap, ExpectationOperator, McEstimate, OperatorKind};
use crate::functional::{make_eval, Functional, StateFn};
use crate::path::{Path, TimeGrid};
use crate::quadrature::{simpson, simpson_weights, LegendreRule, NormalRule};
use crate::source::{SourceTerm, TimeWeight};

/// `S(t) F = E shift(F, t)` acting on functionals that only see the past.
#[derive(Debug, Clone)]
pub struct EvolutionarySemigroup {
    op: ExpectationOperator,
}

impl EvolutionarySemigroup {
    pub fn new(op: ExpectationOperator) -> Self {
        Self { op }
    }

    pub fn operator(&self) -> &ExpectationOperator {
        &self.op
    }

    pub fn evo_apply(&self, t: f64, f: &Functional, x: &Path, n: usize) -> Result<McEstimate> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("semigroup time must be nonnegative, got {t}")));
        }
        match f.horizon() {
            Some(h) if h <= 1e-12 => {}
            h => return Err(Error::Horizon { horizon: h, allowed: 0.0 }),
        }
        self.op.apply(&f.shift(t), x, n)
    }

    /// `[S(t) f](x0)` for the Markov semigroup behind the operator.
    pub fn markov_restrict(&self, t: f64, f: &StateFn, x0: &[f64], n: usize) -> Result<McEstimate> {
        if let OperatorKind::Deterministic(EvolutionMap::Shift(_)) = self.op.kind() {
            return Err(Error::InvalidArgument("the shift map induces no Markov semigroup".into()));
        }
        let dt = self.op.dt();
        let x = Path::constant(TimeGrid::with_step(-dt, dt, 1)?, x0);
        self.evo_apply(t, &make_eval(f, 0.0), &x, n)
    }

    /// `S(t) shift(F, -t) = F` for `F` seeing only the past.
    pub fn check_evolutionary(&self, t: f64, f: &Functional, x: &Path, n: usize) -> Result<AxiomReport> {
        let est = self.evo_apply(t, &f.shift(-t), x, n)?;
        let direct = f.evaluate(x);
        Ok(AxiomReport::compare(est, McEstimate::exact(direct), est.mean - direct, est.std_error))
    }

    /// `S(t + s) f` against `S(t) S(s) f` at `x0` by nested sampling.
    pub fn check_semigroup_law(
        &self,
        t: f64,
        s: f64,
        f: &StateFn,
        x0: &[f64],
        n_outer: usize,
        n_inner: usize,
    ) -> Result<AxiomReport> {
        let dt = self.op.dt();
        let x = Path::constant(TimeGrid::with_step(-dt, dt, 1)?, x0);
        check_homogeneity(&self.op, t, &make_eval(f, t + s), &x, n_outer, n_inner)
    }
}

/// Closed-form Markov semigroups used as oracles.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkovSemigroupOracle {
    /// Heat semigroup on `R^dim`, Gauss–Hermite tensor rule in each coordinate.
    Gaussian { dim: usize, rule: Arc<NormalRule> },
    /// `S(t) f = f`, induced by the stopping operator.
    Identity,
}

impl MarkovSemigroupOracle {
    pub fn gaussian(dim: usize) -> Self {
        MarkovSemigroupOracle::Gaussian {
            dim,
            rule: NormalRule::default_rule(),
        }
    }

    pub fn gaussian_with_nodes(dim: usize, nodes: usize) -> Result<Self> {
        Ok(MarkovSemigroupOracle::Gaussian {
            dim,
            rule: Arc::new(NormalRule::new(nodes)?),
        })
    }

    pub fn hermite_nodes(&self) -> usize {
        match self {
            MarkovSemigroupOracle::Gaussian { rule, .. } => rule.len(),
            MarkovSemigroupOracle::Identity => 0,
        }
    }

    /// `[S(t) f](x)`.
    pub fn apply(&self, t: f64, f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
        match self {
            MarkovSemigroupOracle::Identity => f(x),
            MarkovSemigroupOracle::Gaussian { dim, rule } => {
                debug_assert_eq!(*dim, x.len());
                if t <= 0.0 {
                    return f(x);
                }
                let sd = t.sqrt();
                if x.len() == 1 {
                    return rule.expect(|z| f(&[x[0] + sd * z]));
                }
                let mut y = x.to_vec();
                tensor_expect(rule, sd, x, &mut y, 0, f)
            }
        }
    }

    pub fn apply_state(&self, t: f64, f: &StateFn, x: &[f64]) -> f64 {
        self.apply(t, &|y| f.call(y), x)
    }

    /// `[S(t) S(s) f](x)` by nested quadrature.
    pub fn apply_nested(&self, t: f64, s: f64, f: &StateFn, x: &[f64]) -> f64 {
        self.apply(t, &|y| self.apply_state(s, f, y), x)
    }
}

fn tensor_expect(
    rule: &NormalRule,
    sd: f64,
    x: &[f64],
    y: &mut Vec<f64>,
    axis: usize,
    f: &dyn Fn(&[f64]) -> f64,
) -> f64 {
    if axis == x.len() {
        return f(y);
    }
    let mut total = 0.0;
    for (z, w) in rule.nodes.iter().zip(&rule.weights) {
        y[axis] = x[axis] + sd * z;
        total += w * tensor_expect(rule, sd, x, y, axis + 1, f);
    }
    total
}

/// `E f(x + sqrt(t) Z)` with the default 64-node rule.
pub fn gaussian_apply(t: f64, f: &StateFn, x: &[f64]) -> f64 {
    MarkovSemigroupOracle::gaussian(x.len()).apply_state(t, f, x)
}

/// Tail bound above which a truncated Laplace integral is flagged.
pub const TAIL_WARNING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceSpec {
    pub panels: usize,
    /// Target for `exp(-lambda T) |f| / lambda` when the truncation is chosen automatically.
    pub tail_tol: f64,
    pub t_trunc: Option<f64>,
}

impl Default for LaplaceSpec {
    fn default() -> Self {
        Self {
            panels: 2000,
            tail_tol: 1e-12,
            t_trunc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceValue {
    pub value: f64,
    pub t_trunc: f64,
    pub tail_bound: f64,
    pub warning: Option<String>,
}

fn truncation(lambda: f64, bound: f64, spec: &LaplaceSpec) -> (f64, f64) {
    let t = spec.t_trunc.unwrap_or_else(|| {
        if bound == 0.0 {
            1.0
        } else {
            ((bound / (lambda * spec.tail_tol)).ln() / lambda).max(1.0)
        }
    });
    (t, (-lambda * t).exp() * bound / lambda)
}

fn laplace_inputs(lambda: f64, f: &StateFn) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("resolvent needs lambda > 0, got {lambda}")));
    }
    f.bound()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no declared bound", f.name())))
}

fn tail_warning(tail: f64) -> Option<String> {
    (tail > TAIL_WARNING).then(|| format!("truncated tail bound {tail:.3e} exceeds {TAIL_WARNING:e}"))
}

/// `R(lambda) f (x) = ∫_0^∞ e^{-lambda t} [S(t) f](x) dt`, truncated and integrated by Simpson.
pub fn laplace_resolvent(
    oracle: &MarkovSemigroupOracle,
    lambda: f64,
    f: &StateFn,
    x: &[f64],
    spec: &LaplaceSpec,
) -> Result<LaplaceValue> {
    let bound = laplace_inputs(lambda, f)?;
    let (t_trunc, tail_bound) = truncation(lambda, bound, spec);
    let value = simpson(0.0, t_trunc, spec.panels, |t| (-lambda * t).exp() * oracle.apply_state(t, f, x));
    Ok(LaplaceValue {
        value,
        t_trunc,
        tail_bound,
        warning: tail_warning(tail_bound),
    })
}

/// `R(lambda) R(mu) f (x)`, written as the double integral of
/// `e^{-lambda s - mu r} S(s + r) f` on a common Simpson step, so `S(k h) f (x)`
/// is computed once per node sum.
pub fn resolvent_product(
    oracle: &MarkovSemigroupOracle,
    lambda: f64,
    mu: f64,
    f: &StateFn,
    x: &[f64],
    spec: &LaplaceSpec,
) -> Result<LaplaceValue> {
    let bound = laplace_inputs(lambda, f)?;
    laplace_inputs(mu, f)?;
    let (ta, tail_a) = truncation(lambda, bound, spec);
    let (tb, tail_b) = truncation(mu, bound, spec);
    let h = ta.max(tb) / spec.panels as f64;
    let even = |t: f64| {
        let n = (t / h).ceil() as usize;
        n + n % 2
    };
    let (na, nb) = (even(ta), even(tb));
    let cache: Vec<f64> = (0..=na + nb)
        .into_par_iter()
        .map(|k| oracle.apply_state(k as f64 * h, f, x))
        .collect();
    let (wa, wb) = (simpson_weights(na, h), simpson_weights(nb, h));
    let mut value = 0.0;
    for (i, wi) in wa.iter().enumerate() {
        let ei = wi * (-lambda * i as f64 * h).exp();
        let inner: f64 = wb
            .iter()
            .enumerate()
            .map(|(j, wj)| wj * (-mu * j as f64 * h).exp() * cache[i + j])
            .sum();
        value += ei * inner;
    }
    // each factor contributes its own tail; R(mu) has norm 1/mu
    let tail = tail_a / mu + tail_b / lambda;
    Ok(LaplaceValue {
        value,
        t_trunc: ta.max(tb),
        tail_bound: tail,
        warning: tail_warning(tail),
    })
}

/// `|R(l1) f - R(l2) f - (l2 - l1) R(l1) R(l2) f|` at `x`.
pub fn resolvent_identity_residual(
    oracle: &MarkovSemigroupOracle,
    l1: f64,
    l2: f64,
    f: &StateFn,
    x: &[f64],
    spec: &LaplaceSpec,
) -> Result<f64> {
    let r1 = laplace_resolvent(oracle, l1, f, x, spec)?.value;
    let r2 = laplace_resolvent(oracle, l2, f, x, spec)?.value;
    let r12 = resolvent_product(oracle, l1, l2, f, x, spec)?.value;
    Ok((r1 - r2 - (l2 - l1) * r12).abs())
}

/// `|S(t + s) f - S(t) S(s) f|` at `x`.
pub fn semigroup_law_residual(oracle: &MarkovSemigroupOracle, t: f64, s: f64, f: &StateFn, x: &[f64]) -> f64 {
    (oracle.apply_state(t + s, f, x) - oracle.apply_nested(t, s, f, x)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FvpSpec {
    pub panels: usize,
}

impl Default for FvpSpec {
    fn default() -> Self {
        Self { panels: 400 }
    }
}

/// `u(t) = S(T - t) f - ∫_t^T S(r - t) phi(r) dr` evaluated pointwise.
#[derive(Debug, Clone)]
pub struct MildSolver {
    oracle: MarkovSemigroupOracle,
    terminal: StateFn,
    source: SourceTerm,
    horizon: f64,
    spec: FvpSpec,
}

impl MildSolver {
    pub fn new(oracle: MarkovSemigroupOracle, terminal: StateFn, source: SourceTerm, horizon: f64) -> Self {
        Self {
            oracle,
            terminal,
            source,
            horizon,
            spec: FvpSpec::default(),
        }
    }

    pub fn with_spec(mut self, spec: FvpSpec) -> Self {
        self.spec = spec;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn source(&self) -> &SourceTerm {
        &self.source
    }

    pub fn oracle(&self) -> &MarkovSemigroupOracle {
        &self.oracle
    }

    /// `∫_a^T g(r) dr` for `g` integrable against the source weight, with the
    /// substitution `r = c - rho^2` when the weight blows up at `c`.
    fn time_integral(&self, a: f64, g: impl Fn(f64) -> f64) -> f64 {
        let big_t = self.horizon;
        match self.source.weight() {
            TimeWeight::Unit => simpson(a, big_t, self.spec.panels, g),
            TimeWeight::InverseSqrt { terminal, .. } => {
                let (lo, hi) = ((terminal - big_t).max(0.0).sqrt(), (terminal - a).sqrt());
                simpson(lo, hi, self.spec.panels, |rho| {
                    let r = terminal - rho * rho;
                    2.0 * rho * g(r)
                })
            }
        }
    }

    /// `∫_a^T phi(r) h(r) dr` with the singular weight folded into the Jacobian.
    fn weighted_integral(&self, a: f64, g: impl Fn(f64) -> f64) -> f64 {
        let big_t = self.horizon;
        match self.source.weight() {
            TimeWeight::Unit => simpson(a, big_t, self.spec.panels, g),
            TimeWeight::InverseSqrt { terminal, scale } => {
                let (lo, hi) = ((terminal - big_t).max(0.0).sqrt(), (terminal - a).sqrt());
                simpson(lo, hi, self.spec.panels, |rho| 2.0 * scale * g(terminal - rho * rho))
            }
        }
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        if t >= self.horizon {
            return self.terminal.call(x);
        }
        let head = self.oracle.apply_state(self.horizon - t, &self.terminal, x);
        let src = &self.source;
        let tail = self.weighted_integral(t, |r| self.oracle.apply(r - t, &|y| src.regular(r, y), x));
        head - tail
    }

    /// `|u(t) - f - A ∫_t^T u(s) ds + ∫_t^T phi(s) ds|` at `x` (scalar state),
    /// with `A = ½ ∂²` applied by central differences of step `h`.
    pub fn mild_identity_residual(&self, t: f64, x: f64, h: f64) -> f64 {
        let integrated = |y: f64| self.time_integral(t, |s| self.value(s, &[y]));
        let lap = 0.5 * (integrated(x + h) - 2.0 * integrated(x) + integrated(x - h)) / (h * h);
        let phi = self.weighted_integral(t, |r| self.source.regular(r, &[x]));
        (self.value(t, &[x]) - self.terminal.call1(x) - lap + phi).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub hermite_nodes: usize,
    pub time_panels: usize,
    pub singular_substitution: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FvpSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Row-major in `(time, state)`.
    pub u: Vec<f64>,
    pub terminal: String,
    pub source: String,
    pub horizon: f64,
    pub meta: SolverMeta,
    /// Strong residual per entry, absent where the stencil leaves `[.., T]`.
    pub residual: Option<Vec<Option<f64>>>,
}

impl FvpSolution {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.states.len() + j]
    }

    /// `max |u - exact|` over the sample set.
    pub fn max_error(&self, exact: impl Fn(f64, &[f64]) -> f64) -> f64 {
        let mut worst = 0.0f64;
        for (i, &t) in self.times.iter().enumerate() {
            for (j, x) in self.states.iter().enumerate() {
                worst = worst.max((self.at(i, j) - exact(t, x)).abs());
            }
        }
        worst
    }

    /// CSV-ready table with columns `t, x..., u, residual`.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
        let d = self.states.first().map_or(1, Vec::len);
        let mut header = vec!["t".to_string()];
        if d == 1 {
            header.push("x".into());
        } else {
            header.extend((0..d).map(|k| format!("x{k}")));
        }
        header.push("u".into());
        header.push("residual".into());
        let mut rows = Vec::with_capacity(self.u.len());
        for (i, &t) in self.times.iter().enumerate() {
            for (j, x) in self.states.iter().enumerate() {
                let k = i * self.states.len() + j;
                let mut row = vec![Some(t)];
                row.extend(x.iter().map(|v| Some(*v)));
                row.push(Some(self.u[k]));
                row.push(self.residual.as_ref().and_then(|r| r[k]));
                rows.push(row);
            }
        }
        (header, rows)
    }
}

/// Solves the final value problem on the sample set `times × states`.
pub fn solve_fvp_mild(solver: &MildSolver, times: &[f64], states: &[Vec<f64>]) -> Result<FvpSolution> {
    let big_t = solver.horizon;
    for &t in times {
        if !(t <= big_t) {
            return Err(Error::InvalidArgument(format!("sample time {t} lies after the horizon {big_t}")));
        }
        for x in states {
            solver.source.check_hint(t, solver.source.regular(t, x))?;
        }
    }
    if let Some(b) = solver.terminal.bound() {
        for x in states {
            let v = solver.terminal.call(x).abs();
            if v > b * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "terminal datum {} exceeds its bound {b} at {x:?}",
                    solver.terminal.name()
                )));
            }
        }
    }
    let ns = states.len();
    let u: Vec<f64> = (0..times.len() * ns)
        .into_par_iter()
        .map(|k| solver.value(times[k / ns], &states[k % ns]))
        .collect();
    Ok(FvpSolution {
        times: times.to_vec(),
        states: states.to_vec(),
        u,
        terminal: solver.terminal.name().to_string(),
        source: solver.source.name().to_string(),
        horizon: big_t,
        meta: SolverMeta {
            hermite_nodes: solver.oracle.hermite_nodes(),
            time_panels: solver.spec.panels,
            singular_substitution: matches!(solver.source.weight(), TimeWeight::InverseSqrt { .. }),
        },
        residual: None,
    })
}

/// Generator actions available to the residual check (scalar state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `½ ∂²`, the Brownian generator.
    HalfLaplacian,
    Zero,
}

impl Generator {
    pub fn apply(&self, u: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        match self {
            Generator::HalfLaplacian => 0.5 * (u(x + h) - 2.0 * u(x) + u(x - h)) / (h * h),
            Generator::Zero => 0.0,
        }
    }
}

/// `D_t u + A u - phi` at `(t, x)` with central differences of step `h`.
pub fn pointwise_residual(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    source: &SourceTerm,
    generator: Generator,
    t: f64,
    x: f64,
    h: f64,
) -> f64 {
    let dt = (u(t + h, x) - u(t - h, x)) / (2.0 * h);
    let a = generator.apply(|y| u(t, y), x, h);
    dt + a - source.value(t, &[x])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRegion {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
    /// Spacing of the evaluation lattice and finite-difference step.
    pub step: f64,
}

impl ResidualRegion {
    fn axis(a: f64, b: f64, h: f64) -> Vec<f64> {
        let n = ((b - a) / h).round() as usize;
        (0..=n).map(|k| a + k as f64 * h).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        Self::axis(self.t0, self.t1, self.step)
    }

    pub fn states(&self) -> Vec<f64> {
        Self::axis(self.x0, self.x1, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub t: f64,
    pub x: f64,
    pub residual: f64,
    pub residual_coarse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub max_abs_coarse: f64,
    /// `max |r_h - r_2h|` over the lattice.
    pub disagreement: f64,
    /// `max |(4 r_h - r_2h) / 3|`.
    pub extrapolated_max: f64,
    pub tolerance: f64,
    pub worst: (f64, f64),
    pub confirmed: bool,
    pub warning: Option<String>,
    pub field: Vec<ResidualPoint>,
}

/// Strong residual of `u` on a lattice, at steps `h` and `2h`.
pub fn strong_residual(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    source: &SourceTerm,
    generator: Generator,
    region: &ResidualRegion,
    tolerance: f64,
) -> ResidualReport {
    let h = region.step;
    let ts = region.times();
    let xs = region.states();
    let nx = xs.len();
    let field: Vec<ResidualPoint> = (0..ts.len() * nx)
        .into_par_iter()
        .map(|k| {
            let (t, x) = (ts[k / nx], xs[k % nx]);
            ResidualPoint {
                t,
                x,
                residual: pointwise_residual(u, source, generator, t, x, h),
                residual_coarse: pointwise_residual(u, source, generator, t, x, 2.0 * h),
            }
        })
        .collect();
    let mut report = ResidualReport {
        max_abs: 0.0,
        max_abs_coarse: 0.0,
        disagreement: 0.0,
        extrapolated_max: 0.0,
        tolerance,
        worst: (ts[0], xs[0]),
        confirmed: false,
        warning: None,
        field: Vec::new(),
    };
    for p in &field {
        if p.residual.abs() > report.max_abs || p.residual.is_nan() {
            report.max_abs = p.residual.abs();
            report.worst = (p.t, p.x);
        }
        report.max_abs_coarse = report.max_abs_coarse.max(p.residual_coarse.abs());
        report.disagreement = report.disagreement.max((p.residual - p.residual_coarse).abs());
        report.extrapolated_max = report
            .extrapolated_max
            .max(((4.0 * p.residual - p.residual_coarse) / 3.0).abs());
    }
    if report.disagreement > 10.0 * tolerance {
        report.warning = Some(format!(
            "grid too coarse: residuals at h and 2h differ by {:.3e}",
            report.disagreement
        ));
    }
    report.confirmed = report.max_abs <= tolerance && report.warning.is_none();
    report.field = field;
    report
}

impl MildSolver {
    /// Fills the residual column of a solution on a scalar state space.
    pub fn attach_residual(&self, sol: &mut FvpSolution, generator: Generator, h: f64) {
        let u = |t: f64, x: f64| self.value(t, &[x]);
        let ns = sol.states.len();
        let big_t = self.horizon;
        let res: Vec<Option<f64>> = (0..sol.u.len())
            .into_par_iter()
            .map(|k| {
                let (t, x) = (sol.times[k / ns], sol.states[k % ns][0]);
                (t + h < big_t).then(|| pointwise_residual(&u, &self.source, generator, t, x, h))
            })
            .collect();
        sol.residual = Some(res);
    }
}

pub const PAIR_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCheckReport {
    pub max_violation: f64,
    pub worst: (f64, f64),
    pub tolerance: f64,
    pub pass: bool,
}

/// `S(t) f - f = ∫_0^t S(s) g ds` on `t_list × x_list` (scalar states).
pub fn full_generator_pair_check(
    oracle: &MarkovSemigroupOracle,
    f: &StateFn,
    g: &StateFn,
    t_list: &[f64],
    x_list: &[f64],
    panels: usize,
) -> PairCheckReport {
    let mut report = PairCheckReport {
        max_violation: 0.0,
        worst: (0.0, 0.0),
        tolerance: PAIR_CHECK_TOL,
        pass: true,
    };
    for &t in t_list {
        for &x in x_list {
            let lhs = oracle.apply_state(t, f, &[x]) - f.call1(x);
            let rhs = simpson(0.0, t, panels, |s| oracle.apply_state(s, g, &[x]));
            let v = (lhs - rhs).abs();
            if v > report.max_violation {
                report.max_violation = v;
                report.worst = (t, x);
            }
        }
    }
    report.pass = report.max_violation <= PAIR_CHECK_TOL;
    report
}

/// Truncation radius, in standard deviations, of the half-line integrals.
pub const HALF_LINE_RADIUS: f64 = 10.0;

/// `E f(x + sup_{[0, tau]} B) = 2 ∫_0^∞ f(x + sqrt(tau) z) φ(z) dz`.
pub fn running_max_value(f: &StateFn, tau: f64, x: f64) -> f64 {
    if tau <= 0.0 {
        return f.call1(x);
    }
    let sd = tau.sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    2.0 * LegendreRule::default_rule().integrate(0.0, HALF_LINE_RADIUS, |z| {
        f.call1(x + sd * z) * norm * (-0.5 * z * z).exp()
    })
}

/// `phi(t, x) = -f'(x) / sqrt(2 pi (T - t))`, the compensator of the running maximum.
pub fn running_max_source(f_prime: &StateFn, horizon: f64) -> SourceTerm {
    let fp = f_prime.clone();
    let src = SourceTerm::new(
        format!("running_max_compensator({})", f_prime.name()),
        TimeWeight::InverseSqrt {
            terminal: horizon,
            scale: 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
        },
        move |_, x| -fp.call(x),
    );
    match f_prime.bound() {
        Some(b) => src.with_bound_hint(b),
        None => src,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogFn;

    fn heat() -> MarkovSemigroupOracle {
        MarkovSemigroupOracle::gaussian(1)
    }

    #[test]
    fn gaussian_oracle_closed_forms() {
        for x in [-1.0, 0.0, 0.7, 2.0] {
            for t in [0.0, 0.25, 1.0, 3.0] {
                let sq = gaussian_apply(t, &CatalogFn::Square.state_fn(), &[x]);
                assert!((sq - (x * x + t)).abs() < 1e-10);
                let c = gaussian_apply(t, &CatalogFn::Cos.state_fn(), &[x]);
                assert!((c - (-t / 2.0f64).exp() * x.cos()).abs() < 1e-8);
                let b = gaussian_apply(t, &CatalogFn::GaussianBump.state_fn(), &[x]);
                assert!((b - CatalogFn::GaussianBump.heat_closed_form(t, x).unwrap()).abs() < 1e-8);
                assert_eq!(gaussian_apply(t, &StateFn::constant(0.3), &[x]), 0.3 * 1.0);
            }
        }
    }

    #[test]
    fn two_dimensional_tensor_rule() {
        let oracle = MarkovSemigroupOracle::gaussian(2);
        let f = StateFn::new("cos_sum", Some(1.0), |x| (x[0] + x[1]).cos());
        // x0 + x1 + sqrt(t)(Z0 + Z1) has variance 2t
        let v = oracle.apply_state(0.5, &f, &[0.3, -0.1]);
        assert!((v - (-0.5f64).exp() * 0.2f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn identity_oracle() {
        let f = CatalogFn::Tanh.state_fn();
        assert_eq!(MarkovSemigroupOracle::Identity.apply_state(5.0, &f, &[0.4]), 0.4f64.tanh());
    }

    #[test]
    fn laplace_transforms() {
        let spec = LaplaceSpec::default();
        for lambda in [0.5, 1.0, 2.0] {
            let one = laplace_resolvent(&heat(), lambda, &StateFn::constant(1.0), &[0.3], &spec).unwrap();
            assert!((one.value - 1.0 / lambda).abs() < 1e-8, "{lambda}: {one:?}");
            assert!(one.warning.is_none());
            let c = laplace_resolvent(&heat(), lambda, &CatalogFn::Cos.state_fn(), &[0.0], &spec).unwrap();
            assert!((c.value - 1.0 / (lambda + 0.5)).abs() < 1e-6);
        }
        let short = LaplaceSpec {
            t_trunc: Some(5.0),
            ..spec
        };
        let v = laplace_resolvent(&heat(), 1.0, &StateFn::constant(1.0), &[0.0], &short).unwrap();
        assert!(v.warning.is_some());
        assert!(laplace_resolvent(&heat(), 0.0, &StateFn::constant(1.0), &[0.0], &spec).is_err());
    }

    #[test]
    fn resolvent_identity_holds() {
        let spec = LaplaceSpec::default();
        for f in [CatalogFn::Cos, CatalogFn::GaussianBump] {
            let r = resolvent_identity_residual(&heat(), 1.0, 2.0, &f.state_fn(), &[0.4], &spec).unwrap();
            assert!(r <= 1e-5, "{f:?}: {r}");
        }
        // closed form for cos at 0: 1/((1 + 1/2)(2 + 1/2))
        let p = resolvent_product(&heat(), 1.0, 2.0, &CatalogFn::Cos.state_fn(), &[0.0], &spec).unwrap();
        assert!((p.value - 1.0 / (1.5 * 2.5)).abs() < 1e-7);
    }

    #[test]
    fn semigroup_law_by_nested_quadrature() {
        for f in CatalogFn::BOUNDED {
            for t in [0.25, 0.5, 1.0] {
                for s in [0.25, 0.5, 1.0] {
                    let r = semigroup_law_residual(&heat(), t, s, &f.state_fn(), &[0.3]);
                    assert!(r <= 1e-6, "{f:?} {t} {s}: {r}");
                }
            }
        }
    }

    #[test]
    fn mild_solutions_match_closed_forms() {
        let big_t = 1.0;
        let times: Vec<f64> = (0..32).map(|k| k as f64 / 31.0).collect();
        let states: Vec<Vec<f64>> = (0..41).map(|k| vec![-2.0 + 0.1 * k as f64]).collect();

        let heat_solver = MildSolver::new(heat(), CatalogFn::Cos.state_fn(), SourceTerm::zero(), big_t);
        let sol = solve_fvp_mild(&heat_solver, &times, &states).unwrap();
        let err = sol.max_error(|t, x| (-(big_t - t) / 2.0).exp() * x[0].cos());
        assert!(err <= 1e-6, "{err}");
        assert_eq!(sol.at(31, 7), states[7][0].cos());

        let c = 0.8;
        let mean = MildSolver::new(heat(), StateFn::constant(0.0), SourceTerm::constant(-c), big_t);
        let sol = solve_fvp_mild(&mean, &times, &states).unwrap();
        assert!(sol.max_error(|t, _| c * (big_t - t)) <= 1e-8);

        let quad = SourceTerm::new("-x^2", TimeWeight::Unit, |_, x| -x[0] * x[0]);
        let solver = MildSolver::new(heat(), StateFn::constant(0.0), quad, big_t);
        let sol = solve_fvp_mild(&solver, &times, &states).unwrap();
        let err = sol.max_error(|t, x| x[0] * x[0] * (big_t - t) + (big_t - t).powi(2) / 2.0);
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn bound_hint_violation_is_an_error() {
        let src = SourceTerm::new("x", TimeWeight::Unit, |_, x| x[0]).with_bound_hint(1.0);
        let solver = MildSolver::new(heat(), CatalogFn::Cos.state_fn(), src, 1.0);
        assert!(matches!(
            solve_fvp_mild(&solver, &[0.0, 0.5], &[vec![0.5], vec![3.0]]),
            Err(Error::Integrability { .. })
        ));
    }

    #[test]
    fn running_max_by_mild_solver_matches_reflection_formula() {
        let f = CatalogFn::Tanh;
        let solver = MildSolver::new(heat(), f.state_fn(), running_max_source(&f.derivative_fn(), 1.0), 1.0);
        for t in [0.0, 0.5, 0.9] {
            for x in [-1.0, 0.0, 1.5] {
                let a = solver.value(t, &[x]);
                let b = running_max_value(&f.state_fn(), 1.0 - t, x);
                assert!((a - b).abs() < 1e-6, "{t} {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn polynomial_residual_is_exact() {
        let u = |t: f64, x: f64| x * x + (1.0 - t);
        let region = ResidualRegion {
            t0: 0.0,
            t1: 0.9,
            x0: -2.0,
            x1: 2.0,
            step: 0.1,
        };
        let r = strong_residual(&u, &SourceTerm::zero(), Generator::HalfLaplacian, &region, 1e-10);
        assert!(r.max_abs <= 1e-10 && r.confirmed, "{r:?}");
    }

    #[test]
    fn heat_residual_and_running_max_residual() {
        let u = |t: f64, x: f64| (-(1.0 - t) / 2.0).exp() * x.cos();
        let region = ResidualRegion {
            t0: 0.0,
            t1: 0.9,
            x0: -2.0,
            x1: 2.0,
            step: 1e-2,
        };
        let r = strong_residual(&u, &SourceTerm::zero(), Generator::HalfLaplacian, &region, 1e-4);
        assert!(r.confirmed, "{:?}", (r.max_abs, r.disagreement));

        let f = CatalogFn::Tanh;
        let fs = f.state_fn();
        let rm = move |t: f64, x: f64| running_max_value(&fs, 1.0 - t, x);
        let src = running_max_source(&f.derivative_fn(), 1.0);
        let r = strong_residual(&rm, &src, Generator::HalfLaplacian, &region, 5e-3);
        assert!(r.confirmed, "{:?}", (r.max_abs, r.disagreement, r.worst));
    }

    #[test]
    fn generator_pairs() {
        let cos = CatalogFn::Cos.state_fn();
        let half_neg = StateFn::scalar("-cos/2", Some(0.5), |x| -0.5 * x.cos());
        let half_pos = StateFn::scalar("cos/2", Some(0.5), |x| 0.5 * x.cos());
        let ts = [0.25, 0.5, 1.0];
        let xs = [-1.0, 0.0, 2.0];
        assert!(full_generator_pair_check(&heat(), &cos, &half_neg, &ts, &xs, 400).pass);
        let c = StateFn::constant(0.4);
        let r = full_generator_pair_check(&heat(), &c, &StateFn::constant(0.0), &ts, &xs, 400);
        assert!(r.pass && r.max_violation <= 1e-15);
        let bad = full_generator_pair_check(&heat(), &cos, &half_pos, &ts, &xs, 400);
        assert!(!bad.pass);
        // S(t)cos - cos - ∫ S(s)(cos/2) = (e^{-t/2} - 1) cos x - (1 - e^{-t/2}) cos x
        let expected = 2.0 * (1.0 - (-0.5f64).exp());
        assert!((bad.max_violation - expected).abs() < 1e-8);
    }

    #[test]
    fn mild_identity_holds_for_solver_output() {
        let quad = SourceTerm::new("-cos", TimeWeight::Unit, |_, x| -x[0].cos());
        let solver = MildSolver::new(heat(), CatalogFn::Cos.state_fn(), quad, 1.0).with_spec(FvpSpec { panels: 64 });
        for (t, x) in [(0.0, 0.3), (0.5, -1.0)] {
            let r = solver.mild_identity_residual(t, x, 1e-2);
            assert!(r <= 1e-4, "{t} {x}: {r}");
        }
    }

    #[test]
    fn evolutionary_semigroup_on_wiener() {
        let op = ExpectationOperator::wiener(1, 1.0, 1.0 / 64.0, 5);
        let sg = EvolutionarySemigroup::new(op);
        let est = sg.markov_restrict(1.0, &CatalogFn::Cos.state_fn(), &[0.0], 20_000).unwrap();
        assert!(est.z_against((-0.5f64).exp()) <= 4.0);
        let one = sg.markov_restrict(1.0, &StateFn::constant(1.0), &[0.0], 100).unwrap();
        assert_eq!((one.mean, one.std_error), (1.0, 0.0));
        let late = make_eval(&CatalogFn::Cos.state_fn(), 0.5);
        let x = Path::constant(TimeGrid::with_step(-1.0 / 64.0, 1.0 / 64.0, 1).unwrap(), &[0.0]);
        assert!(matches!(sg.evo_apply(1.0, &late, &x, 10), Err(Error::Horizon { .. })));
        let stop = EvolutionarySemigroup::new(ExpectationOperator::stopping(1.0 / 64.0));
        let v = stop.markov_restrict(0.7, &CatalogFn::Tanh.state_fn(), &[0.4], 1).unwrap();
        assert_eq!(v.mean, 0.4f64.tanh());
    }
}
