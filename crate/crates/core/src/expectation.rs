//! Expectation operators on path space.
//!
//! An operator maps a functional `F` and a path `x` to the average of `F` over
//! continuations of the past of `x`:
//!
//! * stopping: `F(stop(x))`
//! * deterministic: `F(phi(x))` for an evolution map `phi`
//! * Wiener: `E[F(x ⊗₀ B)]`
//! * Itô: `E[F(x ⊗₀ (X^{x(0)} - x(0)))]` with `X` an Euler–Maruyama solution
//!
//! Conditional versions act through the shift: `E_t = Θ_t E Θ_{-t}`.
//! Stochastic operators draw sample `i` from the counter-based stream
//! `(seed, i)`, so every estimate is reproducible bit for bit.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::path::{concat_at_zero, continue_at_zero_into, Path, TimeGrid};
use crate::rng::{derive_seed, sample_rng};

/// z-threshold of every statistical check in the crate.
pub const Z_THRESHOLD: f64 = 4.0;

/// Absolute tolerance applied when a comparison has zero standard error.
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            n_samples: 1,
        }
    }

    /// Mean and standard error of the samples; compensated summation in index order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n > 0, "estimate needs at least one sample");
        let mean = neumaier_sum(samples.iter().copied()) / n as f64;
        if n == 1 {
            return Self::exact(mean);
        }
        let ss = neumaier_sum(samples.iter().map(|v| (v - mean) * (v - mean)));
        let var = ss / (n - 1) as f64;
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            n_samples: n,
        }
    }

    /// |mean - target| in units of the standard error. Zero-error estimates
    /// give 0 within [`EXACT_TOL`] and `f64::MAX` beyond it.
    pub fn z_against(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.std_error)
    }
}

pub fn z_score(deviation: f64, std_error: f64) -> f64 {
    if std_error > 0.0 {
        deviation.abs() / std_error
    } else if deviation.abs() <= EXACT_TOL {
        0.0
    } else {
        f64::MAX
    }
}

pub fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Coefficients of `dX = b(X) dt + sigma(X) dB` on `R^d`; `sigma` is written
/// row-major into a `d * d` buffer.
#[derive(Clone)]
pub struct SdeCoefficients {
    dim: usize,
    drift: VectorField,
    diffusion: VectorField,
    zero_diffusion: bool,
    drift_bound: Option<f64>,
    diffusion_bound: Option<f64>,
}

impl SdeCoefficients {
    pub fn new(
        dim: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            zero_diffusion: false,
            drift_bound: None,
            diffusion_bound: None,
        }
    }

    pub fn brownian(dim: usize) -> Self {
        let mut c = Self::new(
            dim,
            |_, out| out.fill(0.0),
            move |_, out| {
                out.fill(0.0);
                for i in 0..dim {
                    out[i * dim + i] = 1.0;
                }
            },
        );
        c.drift_bound = Some(0.0);
        c.diffusion_bound = Some(1.0);
        c
    }

    pub fn scalar(
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(1, move |x, out| out[0] = b(x[0]), move |x, out| out[0] = sigma(x[0]))
    }

    /// `dX = b(X) dt`: the diffusion is identically zero and no noise is drawn.
    pub fn drift_only(dim: usize, b: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        let mut c = Self::new(dim, b, |_, out| out.fill(0.0));
        c.zero_diffusion = true;
        c.diffusion_bound = Some(0.0);
        c
    }

    pub fn with_bounds(mut self, drift: f64, diffusion: f64) -> Self {
        self.drift_bound = Some(drift);
        self.diffusion_bound = Some(diffusion);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> (Option<f64>, Option<f64>) {
        (self.drift_bound, self.diffusion_bound)
    }

    pub fn has_zero_diffusion(&self) -> bool {
        self.zero_diffusion
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.drift)(x, &mut out);
        out
    }

    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        (self.diffusion)(x, &mut out);
        out
    }

    /// `sigma sigma^T` at `x`, row-major.
    pub fn covariance(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let s = self.diffusion(x);
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| s[i * d + k] * s[j * d + k]).sum();
            }
        }
        out
    }
}

impl fmt::Debug for SdeCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeCoefficients")
            .field("dim", &self.dim)
            .field("zero_diffusion", &self.zero_diffusion)
            .field("drift_bound", &self.drift_bound)
            .field("diffusion_bound", &self.diffusion_bound)
            .finish()
    }
}

/// Maps `phi: Path -> Path` realizing deterministic expectation operators.
#[derive(Clone)]
pub enum EvolutionMap {
    /// `phi = stop`
    Stopping,
    /// Past frozen, future solving `y' = b(y)` from `x(0)` with classical RK4 on
    /// `substeps` substeps per grid step.
    OdeFlow { drift: VectorField, dim: usize, substeps: usize },
    /// `phi = shift(·, t)`; not an evolution map, kept as a counterexample.
    Shift(f64),
}

impl EvolutionMap {
    pub fn ode_flow(dim: usize, drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        EvolutionMap::OdeFlow {
            drift: Arc::new(drift),
            dim,
            substeps: 4,
        }
    }

    pub fn scalar_flow(b: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::ode_flow(1, move |x, out| out[0] = b(x[0]))
    }

    /// Image of `x`, computed on `x`'s grid up to time `horizon`.
    pub fn apply(&self, x: &Path, horizon: f64) -> Result<Path> {
        match self {
            EvolutionMap::Stopping => Ok(x.stop()),
            EvolutionMap::Shift(t) => Ok(x.shift(*t)),
            EvolutionMap::OdeFlow {
                drift,
                dim,
                substeps,
            } => {
                if x.dim() != *dim {
                    return Err(Error::Dimension {
                        expected: *dim,
                        found: x.dim(),
                    });
                }
                let dt = x.grid().dt();
                let steps = steps_for(horizon, dt);
                let x0 = x.eval(0.0);
                let future = rk4_increments(drift.as_ref(), &x0, dt, steps, *substeps)?;
                concat_at_zero(x, &future)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EvolutionMap::Stopping => "stopping",
            EvolutionMap::OdeFlow { .. } => "ode_flow",
            EvolutionMap::Shift(_) => "shift",
        }
    }
}

impl fmt::Debug for EvolutionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvolutionMap::Shift(t) => write!(f, "Shift({t})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Per-sample scratch lives on the stack for small state dimensions.
const SCRATCH: usize = 32;

fn scratch<'a>(stack: &'a mut [f64; SCRATCH], heap: &'a mut Vec<f64>, len: usize) -> &'a mut [f64] {
    if len <= SCRATCH {
        &mut stack[..len]
    } else {
        heap.resize(len, 0.0);
        heap
    }
}

fn steps_for(horizon: f64, dt: f64) -> usize {
    let r = horizon.max(0.0) / dt;
    ((r - 1e-9).ceil() as usize).max(1)
}

fn rk4_increments(
    drift: &(dyn Fn(&[f64], &mut [f64]) + Send + Sync),
    x0: &[f64],
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<Path> {
    let d = x0.len();
    let h = dt / substeps as f64;
    let mut y = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    let mut values = Vec::with_capacity((steps + 1) * d);
    values.extend(std::iter::repeat(0.0).take(d));
    for _ in 0..steps {
        for _ in 0..substeps {
            drift(&y, &mut k1);
            for i in 0..d {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            drift(&tmp, &mut k2);
            for i in 0..d {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            drift(&tmp, &mut k3);
            for i in 0..d {
                tmp[i] = y[i] + h * k3[i];
            }
            drift(&tmp, &mut k4);
            for i in 0..d {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        values.extend(y.iter().zip(x0).map(|(a, b)| a - b));
    }
    Path::from_nodes(TimeGrid::with_step(0.0, dt, steps)?, d, values)
}

#[derive(Clone)]
pub enum OperatorKind {
    Stopping,
    Deterministic(EvolutionMap),
    Wiener { dim: usize },
    Ito(SdeCoefficients),
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::Stopping => f.write_str("Stopping"),
            OperatorKind::Deterministic(m) => write!(f, "Deterministic({m:?})"),
            OperatorKind::Wiener { dim } => write!(f, "Wiener({dim})"),
            OperatorKind::Ito(c) => write!(f, "Ito({c:?})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpectationOperator {
    kind: OperatorKind,
    horizon: f64,
    dt: f64,
    seed: u64,
}

impl ExpectationOperator {
    pub fn new(kind: OperatorKind, horizon: f64, dt: f64, seed: u64) -> Self {
        Self {
            kind,
            horizon,
            dt,
            seed,
        }
    }

    pub fn stopping(dt: f64) -> Self {
        Self::new(OperatorKind::Stopping, 0.0, dt, 0)
    }

    pub fn deterministic(map: EvolutionMap, horizon: f64, dt: f64) -> Self {
        Self::new(OperatorKind::Deterministic(map), horizon, dt, 0)
    }

    pub fn wiener(dim: usize, horizon: f64, dt: f64, seed: u64) -> Self {
        Self::new(OperatorKind::Wiener { dim }, horizon, dt, seed)
    }

    pub fn ito(coeffs: SdeCoefficients, horizon: f64, dt: f64, seed: u64) -> Self {
        Self::new(OperatorKind::Ito(coeffs), horizon, dt, seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_stochastic(&self) -> bool {
        match &self.kind {
            OperatorKind::Wiener { .. } => true,
            OperatorKind::Ito(c) => !c.has_zero_diffusion(),
            _ => false,
        }
    }

    /// Whether `apply` draws samples (Itô operators always do, even with zero noise).
    fn samples(&self) -> bool {
        matches!(self.kind, OperatorKind::Wiener { .. } | OperatorKind::Ito(_))
    }

    fn state_dim(&self) -> Option<usize> {
        match &self.kind {
            OperatorKind::Wiener { dim } => Some(*dim),
            OperatorKind::Ito(c) => Some(c.dim()),
            OperatorKind::Deterministic(EvolutionMap::OdeFlow { dim, .. }) => Some(*dim),
            _ => None,
        }
    }

    fn check_inputs(&self, f: &Functional, x: &Path, n: usize) -> Result<()> {
        f.check_dim(x.dim())?;
        if let Some(d) = self.state_dim() {
            if d != x.dim() {
                return Err(Error::Dimension {
                    expected: d,
                    found: x.dim(),
                });
            }
        }
        if self.samples() && n < 2 {
            return Err(Error::Budget(n));
        }
        Ok(())
    }

    fn sim_horizon(&self, f: &Functional) -> f64 {
        f.horizon().unwrap_or(self.horizon)
    }

    /// Appends `x0 + (X - X_0)` on `(0, steps * dt]` for sample `index`.
    fn fill_future(&self, x0: &[f64], steps: usize, index: u64, out: &mut Vec<f64>) {
        let d = x0.len();
        let dt = self.dt;
        let sqdt = dt.sqrt();
        match &self.kind {
            OperatorKind::Wiener { .. } => {
                let mut rng = sample_rng(self.seed, index);
                let mut stack = [0.0; SCRATCH];
                let mut heap = Vec::new();
                let w = scratch(&mut stack, &mut heap, d);
                for _ in 0..steps {
                    for wi in w.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *wi += sqdt * z;
                    }
                    out.extend(x0.iter().zip(w.iter()).map(|(a, b)| a + b));
                }
            }
            OperatorKind::Ito(c) => {
                let mut rng = sample_rng(self.seed, index);
                let mut stack = [0.0; SCRATCH];
                let mut heap = Vec::new();
                let buf = scratch(&mut stack, &mut heap, 3 * d + d * d);
                let (y, rest) = buf.split_at_mut(d);
                let (b, rest) = rest.split_at_mut(d);
                let (dw, s) = rest.split_at_mut(d);
                y.copy_from_slice(x0);
                for _ in 0..steps {
                    (c.drift)(y, b);
                    if c.zero_diffusion {
                        for i in 0..d {
                            y[i] += b[i] * dt;
                        }
                    } else {
                        (c.diffusion)(y, s);
                        for dwi in dw.iter_mut() {
                            let z: f64 = rng.sample(StandardNormal);
                            *dwi = sqdt * z;
                        }
                        for i in 0..d {
                            let noise: f64 = (0..d).map(|k| s[i * d + k] * dw[k]).sum();
                            y[i] += b[i] * dt + noise;
                        }
                    }
                    // anchor plus increment, in that order, as concat_at_zero would
                    out.extend(x0.iter().zip(y.iter()).map(|(a, yi)| a + (yi - a)));
                }
            }
            _ => unreachable!("future paths are only drawn by sampling operators"),
        }
    }

    /// `x ⊗₀ X` for sample `index`, simulated up to `horizon`.
    pub fn continuation(&self, x: &Path, horizon: f64, index: u64) -> Result<Path> {
        match &self.kind {
            OperatorKind::Stopping => Ok(x.stop()),
            OperatorKind::Deterministic(map) => map.apply(x, horizon),
            _ => {
                if ((x.grid().dt() - self.dt) / self.dt).abs() > 1e-12 {
                    return Err(Error::GridMismatch(format!(
                        "path step {} differs from the operator step {}",
                        x.grid().dt(),
                        self.dt
                    )));
                }
                let mut out = x.clone();
                self.sampled_continuation_into(x, horizon, index, &mut out)?;
                Ok(out)
            }
        }
    }

    /// `continuation` for sampling operators, reusing the storage of `out`.
    fn sampled_continuation_into(&self, x: &Path, horizon: f64, index: u64, out: &mut Path) -> Result<()> {
        let steps = steps_for(horizon, self.dt);
        continue_at_zero_into(x, steps, |x0, values| self.fill_future(x0, steps, index, values), out)
    }

    /// The continuation used by `E_t`: past of `x` up to `t`, then the operator's
    /// future, simulated up to absolute time `until`.
    pub fn conditional_continuation(&self, t: f64, x: &Path, until: f64, index: u64) -> Result<Path> {
        if t == 0.0 {
            return self.continuation(x, until, index);
        }
        if !matches!(self.kind, OperatorKind::Stopping) && x.grid().node_index(t).is_none() {
            return Err(Error::GridMismatch(format!(
                "conditioning time {t} is not a node of the path grid"
            )));
        }
        Ok(self.continuation(&x.shift(t), until - t, index)?.shift(-t))
    }

    /// Per-sample values `F(x ⊗₀ X_i)`, in sample order.
    pub fn sample_values(&self, f: &Functional, x: &Path, n: usize) -> Result<Vec<f64>> {
        self.check_inputs(f, x, n)?;
        let horizon = self.sim_horizon(f);
        if !self.samples() {
            return Ok(vec![f.evaluate(&self.continuation(x, horizon, 0)?)]);
        }
        if ((x.grid().dt() - self.dt) / self.dt).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!(
                "path step {} differs from the operator step {}",
                x.grid().dt(),
                self.dt
            )));
        }
        (0..n as u64)
            .into_par_iter()
            .map_init(
                || x.clone(),
                |buf, i| {
                    self.sampled_continuation_into(x, horizon, i, buf)?;
                    Ok(f.evaluate(buf))
                },
            )
            .collect()
    }

    pub fn apply(&self, f: &Functional, x: &Path, n: usize) -> Result<McEstimate> {
        Ok(McEstimate::from_samples(&self.sample_values(f, x, n)?))
    }

    /// `[E_t F](x) = [E Θ_{-t} F](shift(x, t))`.
    pub fn conditional_apply(&self, t: f64, f: &Functional, x: &Path, n: usize) -> Result<McEstimate> {
        Ok(McEstimate::from_samples(&self.conditional_sample_values(t, f, x, n)?))
    }

    pub fn conditional_sample_values(&self, t: f64, f: &Functional, x: &Path, n: usize) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "conditioning time must be nonnegative, got {t}"
            )));
        }
        if t == 0.0 {
            return self.sample_values(f, x, n);
        }
        self.sample_values(&f.shift(-t), &x.shift(t), n)
    }
}

/// Outcome of a two-sided comparison between two estimates of the same quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub difference: f64,
    pub std_error: f64,
    pub z: f64,
    pub pass: bool,
}

impl AxiomReport {
    fn from_paired(lhs: McEstimate, rhs: McEstimate, diffs: &[f64]) -> Self {
        let d = McEstimate::from_samples(diffs);
        Self::compare(lhs, rhs, d.mean, d.std_error)
    }

    pub fn compare(lhs: McEstimate, rhs: McEstimate, difference: f64, std_error: f64) -> Self {
        let z = z_score(difference, std_error);
        Self {
            lhs,
            rhs,
            difference,
            std_error,
            z,
            pass: z <= Z_THRESHOLD,
        }
    }
}

/// `[E_s E_t F](x)` against `[E_s F](x)`, `0 <= s <= t`.
///
/// Outer sample `i` continues `x` from `s` to `t` on stream `i`; its inner
/// estimator uses `n_inner` samples of an independent child seed. The right-hand
/// side reuses stream `i` from `s` to the horizon of `F`, so both sides share the
/// outer randomness and the comparison is paired.
pub fn check_tower(
    op: &ExpectationOperator,
    s: f64,
    t: f64,
    f: &Functional,
    x: &Path,
    n_outer: usize,
    n_inner: usize,
) -> Result<AxiomReport> {
    if !(0.0 <= s && s <= t) {
        return Err(Error::InvalidArgument(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
    }
    op.check_inputs(f, x, n_outer)?;
    if op.samples() && n_inner < 2 {
        return Err(Error::Budget(n_inner));
    }
    let until = op.sim_horizon(f);
    if !op.samples() {
        let y = op.conditional_continuation(s, x, t, 0)?;
        let lhs = op.conditional_apply(t, f, &y, 1)?;
        let rhs = op.conditional_apply(s, f, x, 1)?;
        return Ok(AxiomReport::compare(lhs, rhs, lhs.mean - rhs.mean, 0.0));
    }
    let pairs: Vec<(f64, f64)> = (0..n_outer as u64)
        .into_par_iter()
        .map(|i| {
            let y = op.conditional_continuation(s, x, t, i)?;
            let inner = op.with_seed(derive_seed(op.seed, i));
            let inner_mean = inner.conditional_apply(t, f, &y, n_inner)?.mean;
            let direct = f.evaluate(&op.conditional_continuation(s, x, until, i)?);
            Ok((inner_mean, direct))
        })
        .collect::<Result<_>>()?;
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diffs: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(AxiomReport::from_paired(
        McEstimate::from_samples(&lhs),
        McEstimate::from_samples(&rhs),
        &diffs,
    ))
}

/// `[E E_t F](x)` against `[E F](x)`.
pub fn check_homogeneity(
    op: &ExpectationOperator,
    t: f64,
    f: &Functional,
    x: &Path,
    n_outer: usize,
    n_inner: usize,
) -> Result<AxiomReport> {
    check_tower(op, 0.0, t, f, x, n_outer, n_inner)
}

/// `E_t(F G)` against `F E_t G` for `F` with horizon `<= t`, on common random numbers.
pub fn check_taking_out_known(
    op: &ExpectationOperator,
    t: f64,
    known: &Functional,
    g: &Functional,
    x: &Path,
    n: usize,
) -> Result<AxiomReport> {
    match known.horizon() {
        Some(h) if h <= t + 1e-12 => {}
        h => return Err(Error::Horizon { horizon: h, allowed: t }),
    }
    op.check_inputs(g, x, n)?;
    let until = op.sim_horizon(g).max(known.horizon().unwrap_or(t));
    let count = if op.samples() { n } else { 1 };
    let known_at_x = known.evaluate(x);
    let triples: Vec<(f64, f64)> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let y = op.conditional_continuation(t, x, until, i)?;
            let gy = g.evaluate(&y);
            Ok((known.evaluate(&y) * gy, known_at_x * gy))
        })
        .collect::<Result<_>>()?;
    let lhs: Vec<f64> = triples.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = triples.iter().map(|p| p.1).collect();
    let diffs: Vec<f64> = triples.iter().map(|p| p.0 - p.1).collect();
    Ok(AxiomReport::from_paired(
        McEstimate::from_samples(&lhs),
        McEstimate::from_samples(&rhs),
        &diffs,
    ))
}

/// `E F = F` for `F` with horizon `<= 0`.
pub fn check_projection(op: &ExpectationOperator, f: &Functional, x: &Path, n: usize) -> Result<AxiomReport> {
    match f.horizon() {
        Some(h) if h <= 1e-12 => {}
        h => return Err(Error::Horizon { horizon: h, allowed: 0.0 }),
    }
    let est = op.apply(f, x, n)?;
    let direct = McEstimate::exact(f.evaluate(x));
    Ok(AxiomReport::compare(est, direct, est.mean - direct.mean, est.std_error))
}

/// `E|F|` at `x`; zero for a nonzero continuous `F` exposes a lack of full support.
pub fn support_probe(op: &ExpectationOperator, f: &Functional, x: &Path, n: usize) -> Result<McEstimate> {
    op.apply(&f.abs(), x, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionAxioms {
    /// `phi ∘ stop = phi`
    pub ignores_future: bool,
    /// `stop ∘ phi = stop`
    pub keeps_past: bool,
    /// `phi(shift(phi(x), t)) = shift(phi(x), t)` for `t >= 0`
    pub flow_property: bool,
    pub max_errors: [f64; 3],
}

impl EvolutionAxioms {
    pub fn all_hold(&self) -> bool {
        self.ignores_future && self.keeps_past && self.flow_property
    }
}

pub const EVOLUTION_TOL: f64 = 1e-8;

fn sup_gap(a: &Path, b: &Path, times: &[f64]) -> f64 {
    times
        .iter()
        .map(|&t| {
            a.eval(t)
                .iter()
                .zip(b.eval(t))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Checks the three evolution-map axioms on a panel of paths, comparing paths on
/// every node of their grids up to `horizon`. The flow property is tested at the
/// shift times `shifts` (nonnegative, node-aligned).
pub fn evolution_map_axioms(
    map: &EvolutionMap,
    test_paths: &[Path],
    horizon: f64,
    shifts: &[f64],
) -> Result<EvolutionAxioms> {
    let mut errs = [0.0f64; 3];
    for x in test_paths {
        let dt = x.grid().dt();
        let start = x.grid().t_start();
        let n = ((horizon - start) / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| start + k as f64 * dt).collect();
        let image = map.apply(x, horizon)?;
        errs[0] = errs[0].max(sup_gap(&map.apply(&x.stop(), horizon)?, &image, &times));
        errs[1] = errs[1].max(sup_gap(&image.stop(), &x.stop(), &times));
        for &t in shifts {
            let moved = image.shift(t);
            let again = map.apply(&moved, horizon - t)?;
            let window: Vec<f64> = times.iter().map(|s| s - t).filter(|s| *s <= horizon - t).collect();
            errs[2] = errs[2].max(sup_gap(&again, &moved, &window));
        }
    }
    Ok(EvolutionAxioms {
        ignores_future: errs[0] <= EVOLUTION_TOL,
        keeps_past: errs[1] <= EVOLUTION_TOL,
        flow_property: errs[2] <= EVOLUTION_TOL,
        max_errors: errs,
    })
}
