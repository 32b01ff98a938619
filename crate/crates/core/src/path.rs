//! Discretized path space.
//!
//! A [`Path`] is a continuous map `R -> R^d` stored on a uniform [`TimeGrid`]:
//! linear interpolation between nodes and constant extension outside the grid
//! window. Shifts, stopping maps and the concatenation at time zero act exactly
//! on this representation.
//!
//! Vertical bumps introduce a single jump at a grid node. The node stores the
//! post-jump value and the pre-jump value is kept as a left limit, so the path
//! is evaluated right-continuously and the past before the jump is untouched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance (in units of `dt`) under which a time is treated as a node.
const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_start >= t_end {
            return Err(Error::InvalidGrid(format!(
                "need t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Self {
            t_start,
            dt: (t_end - t_start) / n_steps as f64,
            n_steps,
        })
    }

    /// Grid with a prescribed step, `t_start + k * dt` for `k = 0..=n_steps`.
    pub fn with_step(t_start: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t_start.is_finite()) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Self { t_start, dt, n_steps })
    }

    /// Grid of step `dt` covering `[t_start, t_end]`; `t_end - t_start` must be a
    /// multiple of `dt`.
    pub fn spanning(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        let ratio = (t_end - t_start) / dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "[{t_start}, {t_end}] is not a positive multiple of dt = {dt}"
            )));
        }
        Self::with_step(t_start, dt, n as usize)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.node_time(self.n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn node_time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn node_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|k| self.node_time(k))
    }

    fn position(&self, t: f64) -> f64 {
        (t - self.t_start) / self.dt
    }

    /// Index of the node at time `t`, if `t` is a node of this grid.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let pos = self.position(t);
        let k = pos.round();
        if (pos - k).abs() <= NODE_SNAP && k >= 0.0 && k <= self.n_steps as f64 {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Largest node index whose time is `<= t` (up to node snapping), clamped
    /// to `[0, n_steps]`. Returns `None` when `t` lies before the first node.
    pub fn floor_index(&self, t: f64) -> Option<usize> {
        let pos = self.position(t);
        let snapped = if (pos - pos.round()).abs() <= NODE_SNAP {
            pos.round()
        } else {
            pos.floor()
        };
        if snapped < 0.0 {
            None
        } else {
            Some((snapped as usize).min(self.n_steps))
        }
    }

    pub fn translated(&self, by: f64) -> Self {
        Self {
            t_start: self.t_start + by,
            ..*self
        }
    }

    /// Same step (to relative precision) and node sets that differ by an integer offset.
    pub fn is_aligned_with(&self, other: &TimeGrid) -> bool {
        if ((self.dt - other.dt) / self.dt).abs() > 1e-12 {
            return false;
        }
        let offset = (other.t_start - self.t_start) / self.dt;
        (offset - offset.round()).abs() <= NODE_SNAP
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LeftLimit {
    node: usize,
    value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    jump: Option<LeftLimit>,
}

impl Path {
    /// Builds a path from node values stored row-major (`values[k * dim + i]`).
    pub fn from_nodes(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        if values.len() != grid.n_nodes() * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} node values, got {}",
                grid.n_nodes() * dim,
                values.len()
            )));
        }
        Ok(Self {
            grid,
            dim,
            values,
            jump: None,
        })
    }

    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::from_nodes(grid, 1, values)
    }

    pub fn from_fn(grid: TimeGrid, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n_nodes() * dim);
        for t in grid.node_times() {
            let v = f(t);
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: v.len(),
                });
            }
            values.extend(v);
        }
        Self::from_nodes(grid, dim, values)
    }

    pub fn scalar_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.node_times().map(f).collect();
        Self {
            grid,
            dim: 1,
            values,
            jump: None,
        }
    }

    pub fn constant(grid: TimeGrid, state: &[f64]) -> Self {
        let mut values = Vec::with_capacity(grid.n_nodes() * state.len());
        for _ in 0..grid.n_nodes() {
            values.extend_from_slice(state);
        }
        Self {
            grid,
            dim: state.len(),
            values,
            jump: None,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Value approached from the left at node `k`.
    pub fn node_left(&self, k: usize) -> &[f64] {
        match &self.jump {
            Some(j) if j.node == k => &j.value,
            _ => self.node(k),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Node and weight of the interpolation at `t`: `(k, w)` means
    /// `(1 - w) * right_of(k) + w * left_of(k + 1)`; `w == 0` selects node `k`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let pos = self.grid.position(t);
        if pos <= 0.0 {
            return (0, 0.0);
        }
        let n = self.grid.n_steps as f64;
        if pos >= n {
            return (self.grid.n_steps, 0.0);
        }
        let r = pos.round();
        if (pos - r).abs() <= NODE_SNAP {
            return (r as usize, 0.0);
        }
        let k = pos.floor();
        (k as usize, pos - k)
    }

    /// Writes the (right-continuous) state at `t` into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (k, w) = self.locate(t);
        let a = self.node(k);
        if w == 0.0 {
            out.copy_from_slice(a);
            return;
        }
        let b = self.node_left(k + 1);
        for i in 0..self.dim {
            out[i] = (1.0 - w) * a[i] + w * b[i];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// First coordinate at `t`; the natural accessor for scalar paths.
    pub fn eval1(&self, t: f64) -> f64 {
        let (k, w) = self.locate(t);
        let a = self.values[k * self.dim];
        if w == 0.0 {
            return a;
        }
        let b = self.node_left(k + 1)[0];
        (1.0 - w) * a + w * b
    }

    /// Left limit at `t`. Differs from [`Path::eval`] only at a bumped node.
    pub fn eval_left(&self, t: f64) -> Vec<f64> {
        match self.grid.node_index(t) {
            Some(k) => self.node_left(k).to_vec(),
            None => self.eval(t),
        }
    }

    pub fn eval_left_into(&self, t: f64, out: &mut [f64]) {
        match self.grid.node_index(t) {
            Some(k) => out.copy_from_slice(self.node_left(k)),
            None => self.eval_into(t, out),
        }
    }

    /// Whether the path carries a recorded left limit (after a vertical bump).
    pub fn has_jump(&self) -> bool {
        self.jump.is_some()
    }

    /// `[shift(p, t)](s) = p(t + s)`.
    pub fn shift(&self, t: f64) -> Path {
        Path {
            grid: self.grid.translated(-t),
            ..self.clone()
        }
    }

    /// Freezes the path at time zero.
    pub fn stop(&self) -> Path {
        self.stop_at(0.0)
    }

    /// `[stop_at(p, t)](s) = p(min(s, t))`, with `t` snapped down to the nearest node.
    pub fn stop_at(&self, t: f64) -> Path {
        let Some(k) = self.grid.floor_index(t) else {
            return Path::constant(self.grid, self.node(0));
        };
        if k >= self.grid.n_steps {
            return self.clone();
        }
        let mut values = self.values.clone();
        let frozen = self.node(k).to_vec();
        for chunk in values[(k + 1) * self.dim..].chunks_exact_mut(self.dim) {
            chunk.copy_from_slice(&frozen);
        }
        let jump = self.jump.clone().filter(|j| j.node <= k);
        Path {
            grid: self.grid,
            dim: self.dim,
            values,
            jump,
        }
    }

    /// Adds `h * v` from time `t` on to the path stopped at `t`.
    pub fn vertical_bump(&self, t: f64, v: &[f64], h: f64) -> Result<Path> {
        if v.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: v.len(),
            });
        }
        let mut bumped = self.stop_at(t);
        if h == 0.0 {
            return Ok(bumped);
        }
        let k = self.grid.floor_index(t).unwrap_or(0);
        let left = bumped.node_left(k).to_vec();
        for chunk in bumped.values[k * self.dim..].chunks_exact_mut(self.dim) {
            for (c, vi) in chunk.iter_mut().zip(v) {
                *c += h * vi;
            }
        }
        if k > 0 {
            bumped.jump = Some(LeftLimit { node: k, value: left });
        }
        Ok(bumped)
    }

    /// Truncated path metric `sum_{n=1}^{n_max} 2^-n (1 ^ sup_{[-n, n]} |p - q|)`.
    ///
    /// The supremum runs over the nodes of both grids inside `[-n, n]` and the
    /// interval endpoints, which is exact for piecewise linear paths.
    ///
    /// # Panics
    ///
    /// Panics if the paths have different state dimensions.
    pub fn distance(&self, other: &Path, n_max: usize) -> PathMetricValue {
        assert_eq!(self.dim, other.dim, "paths must share a state dimension");
        let mut times: Vec<f64> = self
            .grid
            .node_times()
            .chain(other.grid.node_times())
            .collect();
        times.sort_by(f64::total_cmp);
        let gap = |t: f64| -> f64 {
            let (a, b) = (self.eval(t), other.eval(t));
            a.iter()
                .zip(&b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let mut total = 0.0;
        let mut weight = 1.0;
        for n in 1..=n_max.max(1) {
            weight *= 0.5;
            let r = n as f64;
            let mut sup = gap(-r).max(gap(r));
            let lo = times.partition_point(|&t| t < -r);
            let hi = times.partition_point(|&t| t <= r);
            for &t in &times[lo..hi] {
                sup = sup.max(gap(t));
                if sup >= 1.0 {
                    break;
                }
            }
            total += weight * sup.min(1.0);
        }
        PathMetricValue(total)
    }
}

/// `x ⊗₀ future`: the past of `past` up to time zero followed by `past(0)` plus the
/// increments of `future`.
pub fn concat_at_zero(past: &Path, future: &Path) -> Result<Path> {
    if past.dim != future.dim {
        return Err(Error::Dimension {
            expected: past.dim,
            found: future.dim,
        });
    }
    if !past.grid.is_aligned_with(&future.grid) {
        return Err(Error::GridMismatch(format!(
            "steps {} and {} or node offsets differ",
            past.grid.dt, future.grid.dt
        )));
    }
    let k0 = past
        .grid
        .node_index(0.0)
        .ok_or_else(|| Error::GridMismatch("time 0 is not a node of the past grid".into()))?;
    let j0 = future
        .grid
        .node_index(0.0)
        .ok_or_else(|| Error::GridMismatch("time 0 is not a node of the future grid".into()))?;
    let origin = future.node(j0);
    if let Some(bad) = origin.iter().find(|v| v.abs() > 1e-12) {
        return Err(Error::NonzeroOrigin(*bad));
    }
    let dim = past.dim;
    let n_future = future.grid.n_steps - j0;
    let mut values = Vec::with_capacity((k0 + 1 + n_future) * dim);
    values.extend_from_slice(&past.values[..(k0 + 1) * dim]);
    let anchor = past.node(k0).to_vec();
    for j in (j0 + 1)..=future.grid.n_steps {
        values.extend(anchor.iter().zip(future.node(j)).map(|(a, b)| a + b));
    }
    let n_steps = k0 + n_future;
    let jump = past.jump.clone().filter(|j| j.node <= k0);
    if n_steps == 0 {
        // single node: extend by one step so the result is a valid grid
        values.extend_from_slice(&anchor);
        let grid = TimeGrid::with_step(past.grid.t_start, past.grid.dt, 1)?;
        return Ok(Path { grid, dim, values, jump });
    }
    let grid = TimeGrid::with_step(past.grid.t_start, past.grid.dt, n_steps)?;
    Ok(Path { grid, dim, values, jump })
}

/// Same result as `concat_at_zero` with a future of `steps` steps on the grid of
/// `past`, but written in place into `out`, reusing its storage:
/// `fill(anchor, values)` appends `steps` nodes, each already offset by
/// `anchor = past(0)`.
pub(crate) fn continue_at_zero_into(
    past: &Path,
    steps: usize,
    fill: impl FnOnce(&[f64], &mut Vec<f64>),
    out: &mut Path,
) -> Result<()> {
    let k0 = past
        .grid
        .node_index(0.0)
        .ok_or_else(|| Error::GridMismatch("time 0 is not a node of the past grid".into()))?;
    let dim = past.dim;
    let values = &mut out.values;
    values.clear();
    values.extend_from_slice(&past.values[..(k0 + 1) * dim]);
    let anchor = past.node(k0);
    fill(anchor, values);
    debug_assert_eq!(values.len(), (k0 + 1 + steps) * dim);
    let mut n_steps = k0 + steps;
    if n_steps == 0 {
        values.extend_from_slice(anchor);
        n_steps = 1;
    }
    out.grid = TimeGrid::with_step(past.grid.t_start, past.grid.dt, n_steps)?;
    out.dim = dim;
    out.jump = past.jump.clone().filter(|j| j.node <= k0);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PathMetricValue(f64);

impl PathMetricValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> Path {
        Path::scalar(TimeGrid::new(0.0, 1.0, 1).unwrap(), vec![0.0, 2.0]).unwrap()
    }

    fn ramp(a: f64, b: f64, n: usize) -> Path {
        Path::scalar_fn(TimeGrid::new(a, b, n).unwrap(), |t| t)
    }

    fn samples(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn eval_interpolates_and_extends() {
        let p = two_node();
        assert_eq!(p.eval1(0.5), 1.0);
        assert_eq!(p.eval1(-5.0), 0.0);
        assert_eq!(p.eval1(2.0), 2.0);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::spanning(0.0, 1.0, 0.3).is_err());
        assert_eq!(TimeGrid::spanning(0.0, 1.0, 0.25).unwrap().n_steps(), 4);
    }

    #[test]
    fn shift_examples() {
        let p = two_node();
        assert_eq!(p.shift(0.0), p);
        assert_eq!(p.shift(1.0).eval1(0.0), 2.0);
        let q = Path::scalar_fn(TimeGrid::new(-1.0, 1.0, 40).unwrap(), |t| (3.0 * t).sin());
        let lhs = q.shift(0.3).shift(0.7);
        let rhs = q.shift(1.0);
        for s in samples(-2.0, 2.0, 101) {
            assert!((lhs.eval1(s) - rhs.eval1(s)).abs() <= 1e-12);
        }
    }

    #[test]
    fn stop_examples() {
        let c = Path::constant(TimeGrid::new(-1.0, 1.0, 8).unwrap(), &[4.0]);
        assert_eq!(c.stop(), c);
        let p = Path::scalar(TimeGrid::new(-1.0, 1.0, 2).unwrap(), vec![3.0, 5.0, 7.0]).unwrap();
        assert_eq!(p.stop().eval1(1.0), 5.0);
        let once = p.stop();
        let twice = once.stop();
        for s in samples(-2.0, 2.0, 101) {
            assert_eq!(once.eval1(s), twice.eval1(s));
        }
    }

    #[test]
    fn stop_at_examples() {
        let p = ramp(-1.0, 2.0, 30);
        assert_eq!(p.stop_at(0.0), p.stop());
        assert_eq!(p.stop_at(1.0).eval1(1.5), 1.0);
        let stopped = p.stop_at(1.0);
        for s in samples(-2.0, 1.0, 101) {
            assert_eq!(stopped.eval1(s), p.eval1(s));
        }
    }

    #[test]
    fn stop_at_snaps_down_between_nodes() {
        let p = ramp(0.0, 1.0, 4);
        assert_eq!(p.stop_at(0.6).eval1(1.0), 0.5);
        assert_eq!(p.stop_at(-3.0).eval1(1.0), 0.0);
        assert_eq!(p.stop_at(9.0), p);
    }

    #[test]
    fn concat_examples() {
        let grid = TimeGrid::new(-1.0, 1.0, 8).unwrap();
        let future_grid = TimeGrid::new(0.0, 2.0, 8).unwrap();
        let b = Path::scalar_fn(future_grid, |t| (5.0 * t).sin());
        let zero = Path::constant(grid, &[0.0]);
        let r = concat_at_zero(&zero, &b).unwrap();
        for s in samples(0.01, 2.0, 50) {
            assert!((r.eval1(s) - b.eval1(s)).abs() < 1e-14);
        }

        let past = Path::scalar_fn(grid, |t| 3.0 + t);
        let flat = Path::constant(future_grid, &[0.0]);
        let r = concat_at_zero(&past, &flat).unwrap();
        for s in samples(0.0, 5.0, 50) {
            assert_eq!(r.eval1(s), 3.0);
        }

        let past = Path::scalar_fn(grid, |t| 1.0 + t * t);
        let fut = Path::scalar_fn(future_grid, |t| 0.5 * t);
        assert_eq!(concat_at_zero(&past, &fut).unwrap().eval1(1.0), 1.5);
    }

    #[test]
    fn concat_errors() {
        let past = Path::constant(TimeGrid::new(-1.0, 1.0, 8).unwrap(), &[0.0]);
        let coarse = Path::constant(TimeGrid::new(0.0, 1.0, 2).unwrap(), &[0.0]);
        assert!(matches!(concat_at_zero(&past, &coarse), Err(Error::GridMismatch(_))));
        let offset = Path::constant(TimeGrid::with_step(0.1, 0.25, 4).unwrap(), &[0.0]);
        assert!(matches!(concat_at_zero(&past, &offset), Err(Error::GridMismatch(_))));
        let lifted = Path::constant(TimeGrid::new(0.0, 1.0, 4).unwrap(), &[1.0]);
        assert!(matches!(concat_at_zero(&past, &lifted), Err(Error::NonzeroOrigin(_))));
    }

    #[test]
    fn vertical_bump_examples() {
        let p = Path::scalar_fn(TimeGrid::new(0.0, 1.0, 16).unwrap(), |t| (4.0 * t).cos());
        let t = 0.5;
        assert_eq!(p.vertical_bump(t, &[1.0], 0.0).unwrap(), p.stop_at(t));

        let zero = Path::constant(TimeGrid::new(-1.0, 1.0, 8).unwrap(), &[0.0, 0.0]);
        let bumped = zero.vertical_bump(0.0, &[1.0, 0.0], 1.0).unwrap();
        for (k, s) in bumped.grid().node_times().enumerate() {
            let expected = if s >= 0.0 { 1.0 } else { 0.0 };
            assert_eq!(bumped.node(k), &[expected, 0.0]);
        }

        let b = p.vertical_bump(t, &[1.0], 0.3).unwrap();
        let stopped = p.stop_at(t);
        for s in samples(-1.0, t - 1e-6, 101) {
            assert_eq!(b.eval1(s), stopped.eval1(s));
        }
        assert!((b.eval1(t) - (p.eval1(t) + 0.3)).abs() < 1e-15);
        assert!((b.eval_left(t)[0] - p.eval1(t)).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let p = Path::constant(grid, &[0.0]);
        let q = Path::constant(grid, &[10.0]);
        assert_eq!(p.distance(&p, 20).value(), 0.0);
        assert!((p.distance(&q, 20).value() - (1.0 - 2f64.powi(-20))).abs() < 1e-15);
        let r = ramp(-3.0, 3.0, 12);
        assert_eq!(r.distance(&p, 20), p.distance(&r, 20));
        assert!(r.distance(&p, 20).value() <= 1.0);
    }
}
