//! Finite-difference estimators of path derivatives.
//!
//! All quotients are one-sided with `h ↓ 0`. A ladder of step sizes is
//! combined by one Richardson step that removes an `O(h)` bias; the spread of
//! the last two extrapolants serves as the error estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expectation::{neumaier_sum, ExpectationOperator, McEstimate, SdeCoefficients};
use crate::functional::AdaptedProcess;
use crate::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub h_ladder: Vec<f64>,
    pub raw_quotients: Vec<f64>,
    pub extrapolated: bool,
    /// `|e_last - e_prev|` over the extrapolants (raw quotients for a two-step ladder).
    pub error_estimate: f64,
    /// Monte Carlo standard error of `value`; zero for deterministic estimators.
    pub std_error: f64,
    /// False when the spread between consecutive quotients fails to shrink.
    pub reliable: bool,
}

impl DerivativeEstimate {
    /// `max(z * std_error, error_estimate)`.
    pub fn tolerance(&self, z: f64) -> f64 {
        (z * self.std_error).max(self.error_estimate)
    }
}

/// One Richardson step for an `O(h)` bias.
pub fn richardson(h1: f64, q1: f64, h2: f64, q2: f64) -> f64 {
    (h1 * q2 - h2 * q1) / (h1 - h2)
}

fn extrapolants(ladder: &[f64], q: &[f64]) -> Vec<f64> {
    (1..ladder.len())
        .map(|k| richardson(ladder[k - 1], q[k - 1], ladder[k], q[k]))
        .collect()
}

fn spreads_shrink(q: &[f64]) -> bool {
    let spreads: Vec<f64> = q.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    spreads
        .windows(2)
        .all(|s| s[1] <= s[0] * (1.0 + 1e-9) + 1e-12 * (1.0 + q[0].abs()))
}

fn combine(ladder: &[f64], raw: Vec<f64>, std_error: f64) -> DerivativeEstimate {
    let m = raw.len();
    let (value, error_estimate, extrapolated) = match m {
        1 => (raw[0], 0.0, false),
        2 => (extrapolants(ladder, &raw)[0], (raw[1] - raw[0]).abs(), true),
        _ => {
            let e = extrapolants(ladder, &raw);
            let k = e.len();
            (e[k - 1], (e[k - 1] - e[k - 2]).abs(), true)
        }
    };
    DerivativeEstimate {
        value,
        h_ladder: ladder.to_vec(),
        reliable: spreads_shrink(&raw),
        raw_quotients: raw,
        extrapolated,
        error_estimate,
        std_error,
    }
}

fn check_ladder(ladder: &[f64], min_h: f64) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("empty step ladder".into()));
    }
    for w in ladder.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidArgument(format!("step ladder must decrease: {ladder:?}")));
        }
    }
    let last = ladder[ladder.len() - 1];
    if !(last > 0.0) || last < min_h * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "smallest step {last} is below the admissible {min_h}"
        )));
    }
    Ok(())
}

/// `{4 dt, 2 dt, dt}`.
pub fn default_ladder(dt: f64) -> Vec<f64> {
    vec![4.0 * dt, 2.0 * dt, dt]
}

/// Bump ladder used by the vertical derivatives.
pub const VERTICAL_LADDER: [f64; 3] = [4e-3, 2e-3, 1e-3];

/// `lim E_t[(V(t + h) - V(t)) / h]` at `x`, with common random numbers over
/// the ladder and over both terms of each quotient.
pub fn e_derivative(
    v: &AdaptedProcess,
    op: &ExpectationOperator,
    t: f64,
    x: &Path,
    ladder: &[f64],
    n: usize,
) -> Result<DerivativeEstimate> {
    check_ladder(ladder, op.dt())?;
    v.check_window(t)?;
    v.check_window(t + ladder[0])?;
    check_node(x, t)?;
    let stochastic = matches!(
        op.kind(),
        crate::expectation::OperatorKind::Wiener { .. } | crate::expectation::OperatorKind::Ito(_)
    );
    if stochastic && n < 2 {
        return Err(Error::Budget(n));
    }
    let count = if stochastic { n } else { 1 };
    let until = t + ladder[0];
    let base = v.at(t, x);
    let rows: Vec<Vec<f64>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let y = op.conditional_continuation(t, x, until, i)?;
            Ok(ladder.iter().map(|&h| (v.at(t + h, &y) - base) / h).collect())
        })
        .collect::<Result<_>>()?;
    let m = ladder.len();
    let raw: Vec<f64> = (0..m)
        .map(|k| neumaier_sum(rows.iter().map(|r| r[k])) / count as f64)
        .collect();
    let per_sample: Vec<f64> = rows
        .iter()
        .map(|r| match m {
            1 => r[0],
            _ => richardson(ladder[m - 2], r[m - 2], ladder[m - 1], r[m - 1]),
        })
        .collect();
    let se = McEstimate::from_samples(&per_sample).std_error;
    Ok(combine(ladder, raw, se))
}

/// `lim (V(t + h, stop_at(x, t)) - V(t, x)) / h`.
pub fn dupire_horizontal(v: &AdaptedProcess, t: f64, x: &Path, ladder: &[f64]) -> Result<DerivativeEstimate> {
    check_ladder(ladder, 0.0)?;
    v.check_window(t)?;
    v.check_window(t + ladder[0])?;
    check_node(x, t)?;
    let frozen = x.stop_at(t);
    let base = v.at(t, x);
    let raw = ladder.iter().map(|&h| (v.at(t + h, &frozen) - base) / h).collect();
    Ok(combine(ladder, raw, 0.0))
}

/// `lim (V(t, x + h v 1_{[t, ∞)}) - V(t, x)) / h`.
pub fn dupire_vertical(
    v: &AdaptedProcess,
    t: f64,
    x: &Path,
    direction: &[f64],
    ladder: &[f64],
) -> Result<DerivativeEstimate> {
    check_ladder(ladder, 0.0)?;
    v.check_window(t)?;
    let base = v.at(t, x);
    let raw = ladder
        .iter()
        .map(|&h| Ok((v.at(t, &x.vertical_bump(t, direction, h)?) - base) / h))
        .collect::<Result<_>>()?;
    Ok(combine(ladder, raw, 0.0))
}

fn check_node(x: &Path, t: f64) -> Result<()> {
    if x.grid().node_index(t).is_none() {
        return Err(Error::GridMismatch(format!("time {t} is not a node of the path grid")));
    }
    Ok(())
}

fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivative {
    pub estimate: DerivativeEstimate,
    /// Both iteration orders before averaging.
    pub orders: (f64, f64),
    pub warning: Option<String>,
}

fn iterated(v: &AdaptedProcess, t: f64, x: &Path, i: usize, j: usize, h: f64) -> Result<DerivativeEstimate> {
    let d = x.dim();
    let (ei, ej) = (unit(d, i), unit(d, j));
    let ladder = [2.0 * h, h];
    let inner = |y: &Path| dupire_vertical(v, t, y, &ei, &ladder).map(|e| e.value);
    let base = inner(x)?;
    let raw = ladder
        .iter()
        .map(|&s| Ok((inner(&x.vertical_bump(t, &ej, s)?)? - base) / s))
        .collect::<Result<_>>()?;
    Ok(combine(&ladder, raw, 0.0))
}

/// Second vertical derivative in directions `e_i, e_j`, symmetrized over the
/// order of the two bumps.
pub fn dupire_vertical2(v: &AdaptedProcess, t: f64, x: &Path, i: usize, j: usize, h: f64) -> Result<SecondDerivative> {
    v.check_window(t)?;
    let d = x.dim();
    if i >= d || j >= d {
        return Err(Error::Dimension {
            expected: d,
            found: i.max(j) + 1,
        });
    }
    let a = iterated(v, t, x, i, j, h)?;
    if i == j {
        return Ok(SecondDerivative {
            orders: (a.value, a.value),
            estimate: a,
            warning: None,
        });
    }
    let b = iterated(v, t, x, j, i, h)?;
    let err = a.error_estimate.max(b.error_estimate);
    let gap = (a.value - b.value).abs();
    let warning = (gap > 10.0 * err && gap > 1e-9).then(|| {
        format!("bump orders disagree by {gap:.3e}, ten times the ladder error {err:.3e}")
    });
    let raw: Vec<f64> = a
        .raw_quotients
        .iter()
        .zip(&b.raw_quotients)
        .map(|(p, q)| 0.5 * (p + q))
        .collect();
    let mut estimate = combine(&a.h_ladder, raw, 0.0);
    estimate.error_estimate = estimate.error_estimate.max(0.5 * gap);
    Ok(SecondDerivative {
        orders: (a.value, b.value),
        estimate,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItoSteps {
    pub horizontal: [f64; 3],
    pub vertical: [f64; 3],
    pub second: f64,
}

impl ItoSteps {
    pub fn for_grid(dt: f64) -> Self {
        Self {
            horizontal: [4.0 * dt, 2.0 * dt, dt],
            vertical: VERTICAL_LADDER,
            second: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoResidual {
    pub value: f64,
    pub horizontal: DerivativeEstimate,
    pub gradient: Vec<DerivativeEstimate>,
    /// Row-major `d × d`.
    pub hessian: Vec<f64>,
    pub error_bound: f64,
    pub warnings: Vec<String>,
}

/// `Psi = ∂_t V + <b, ∇V> + ½ tr(σσ^T ∇²V)` at `(t, x)`, coefficients frozen at `x(t)`.
pub fn ito_residual(
    v: &AdaptedProcess,
    coeffs: &SdeCoefficients,
    t: f64,
    x: &Path,
    steps: &ItoSteps,
) -> Result<ItoResidual> {
    let d = x.dim();
    if coeffs.dim() != d {
        return Err(Error::Dimension {
            expected: coeffs.dim(),
            found: d,
        });
    }
    let state = x.eval(t);
    let b = coeffs.drift(&state);
    let a = coeffs.covariance(&state);
    let horizontal = dupire_horizontal(v, t, x, &steps.horizontal)?;
    let mut value = horizontal.value;
    let mut error_bound = horizontal.error_estimate;
    let mut warnings = Vec::new();
    let mut gradient = Vec::with_capacity(d);
    for i in 0..d {
        let g = dupire_vertical(v, t, x, &unit(d, i), &steps.vertical)?;
        value += b[i] * g.value;
        error_bound += b[i].abs() * g.error_estimate;
        gradient.push(g);
    }
    let mut hessian = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            if a[i * d + j] == 0.0 && a[j * d + i] == 0.0 {
                continue;
            }
            let s = dupire_vertical2(v, t, x, i, j, steps.second)?;
            if let Some(w) = s.warning {
                warnings.push(w);
            }
            hessian[i * d + j] = s.estimate.value;
            hessian[j * d + i] = s.estimate.value;
            let weight = if i == j { 0.5 * a[i * d + i] } else { a[i * d + j] };
            value += weight * s.estimate.value;
            error_bound += weight.abs() * s.estimate.error_estimate;
        }
    }
    if !horizontal.reliable {
        warnings.push("horizontal ladder spread does not shrink".into());
    }
    Ok(ItoResidual {
        value,
        horizontal,
        gradient,
        hessian,
        error_bound,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogFn;
    use crate::expectation::EvolutionMap;
    use crate::functional::{make_integral, StateFn};
    use crate::path::TimeGrid;

    const DT: f64 = 1.0 / 256.0;

    fn grid() -> TimeGrid {
        TimeGrid::spanning(-0.25, 1.0, DT).unwrap()
    }

    fn wiggle() -> Path {
        Path::scalar_fn(grid(), |t| 0.4 * (5.0 * t).sin() + 0.2)
    }

    fn coordinate() -> AdaptedProcess {
        AdaptedProcess::cylinder(1.0, |_, x| x[0])
    }

    fn square() -> AdaptedProcess {
        AdaptedProcess::cylinder(1.0, |_, x| x[0] * x[0])
    }

    fn heat_cos() -> AdaptedProcess {
        AdaptedProcess::cylinder(1.0, |t, x| (-(1.0 - t) / 2.0).exp() * x[0].cos())
    }

    #[test]
    fn richardson_removes_linear_bias() {
        let q = |h: f64| 3.0 + 2.0 * h;
        assert!((richardson(0.2, q(0.2), 0.1, q(0.1)) - 3.0).abs() < 1e-14);
        let est = combine(&[0.4, 0.2, 0.1], vec![q(0.4), q(0.2), q(0.1)], 0.0);
        assert!((est.value - 3.0).abs() < 1e-14 && est.error_estimate < 1e-14 && est.reliable);
        let noisy = combine(&[0.4, 0.2, 0.1], vec![1.0, 1.1, 0.5], 0.0);
        assert!(!noisy.reliable);
    }

    #[test]
    fn horizontal_derivatives() {
        let x = wiggle();
        let z = dupire_horizontal(&coordinate(), 0.5, &x, &default_ladder(DT)).unwrap();
        assert_eq!(z.value, 0.0);
        for t in [0.25, 0.5, 0.875] {
            let a = x.eval1(t);
            let d = dupire_horizontal(&heat_cos(), t, &x, &default_ladder(DT)).unwrap();
            let exact = 0.5 * (-(1.0 - t) / 2.0f64).exp() * a.cos();
            assert!((d.value - exact).abs() < 1e-6, "{t}: {d:?}");
        }
        let f = CatalogFn::Tanh.state_fn();
        let integral = AdaptedProcess::new(1.0, move |t, p| make_integral(&f, 0.0, t).unwrap().evaluate(p));
        let t = 0.5;
        let d = dupire_horizontal(&integral, t, &x, &default_ladder(DT)).unwrap();
        assert!((d.value - x.eval1(t).tanh()).abs() < 1e-12, "{d:?}");
        let dv = dupire_vertical(&integral, t, &x, &[1.0], &VERTICAL_LADDER).unwrap();
        assert!(dv.value.abs() < 1e-12);
    }

    #[test]
    fn vertical_derivatives() {
        let x = wiggle();
        let t = 0.5;
        let a = x.eval1(t);
        let one = dupire_vertical(&coordinate(), t, &x, &[1.0], &VERTICAL_LADDER).unwrap();
        assert!((one.value - 1.0).abs() < 1e-10);
        let sq = dupire_vertical(&square(), t, &x, &[1.0], &VERTICAL_LADDER).unwrap();
        assert!((sq.value - 2.0 * a).abs() < 1e-8);
        let s2 = dupire_vertical2(&square(), t, &x, 0, 0, 1e-3).unwrap();
        assert!((s2.estimate.value - 2.0).abs() < 1e-6);
        let lin = dupire_vertical2(&coordinate(), t, &x, 0, 0, 1e-3).unwrap();
        assert!(lin.estimate.value.abs() < 1e-8);
        let zero = Path::constant(grid(), &[0.0]);
        let cos = AdaptedProcess::cylinder(1.0, |_, x| x[0].cos());
        let c2 = dupire_vertical2(&cos, t, &zero, 0, 0, 1e-3).unwrap();
        assert!((c2.estimate.value + 1.0).abs() < 1e-5, "{c2:?}");
    }

    #[test]
    fn mixed_second_derivative_in_two_dimensions() {
        let x = Path::from_fn(grid(), 2, |t| vec![t, 1.0 - t]).unwrap();
        let v = AdaptedProcess::cylinder(1.0, |_, y| y[0] * y[1] * y[1]);
        let t = 0.25;
        let m = dupire_vertical2(&v, t, &x, 0, 1, 1e-3).unwrap();
        // ∂0∂1 (x y^2) = 2 y
        assert!((m.estimate.value - 2.0 * 0.75).abs() < 1e-6, "{m:?}");
        assert!(m.warning.is_none());
    }

    #[test]
    fn ito_residuals() {
        let x = wiggle();
        let steps = ItoSteps::for_grid(DT);
        let bm = SdeCoefficients::brownian(1);
        let sq_minus_t = AdaptedProcess::cylinder(1.0, |t, x| x[0] * x[0] - t);
        let r = ito_residual(&sq_minus_t, &bm, 0.5, &x, &steps).unwrap();
        assert!(r.value.abs() < 1e-5, "{r:?}");
        let r = ito_residual(&heat_cos(), &bm, 0.5, &x, &steps).unwrap();
        assert!(r.value.abs() < 1e-4, "{r:?}");
        let b0 = 0.7;
        let drifted = SdeCoefficients::scalar(move |_| b0, |_| 1.0);
        let r = ito_residual(&coordinate(), &drifted, 0.5, &x, &steps).unwrap();
        assert!((r.value - b0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn e_derivative_under_stopping_equals_horizontal() {
        let op = ExpectationOperator::stopping(DT);
        let x = wiggle();
        let a = e_derivative(&heat_cos(), &op, 0.375, &x, &default_ladder(DT), 1).unwrap();
        let b = dupire_horizontal(&heat_cos(), 0.375, &x, &default_ladder(DT)).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.std_error, 0.0);
    }

    #[test]
    fn e_derivative_of_martingale_vanishes() {
        let op = ExpectationOperator::wiener(1, 1.0, DT, 17);
        let d = e_derivative(&heat_cos(), &op, 0.3125, &wiggle(), &default_ladder(DT), 20_000).unwrap();
        assert!(d.value.abs() <= d.tolerance(4.0), "{d:?}");
        let sq = e_derivative(&square(), &op, 0.3125, &wiggle(), &default_ladder(DT), 20_000).unwrap();
        assert!((sq.value - 1.0).abs() <= sq.tolerance(4.0), "{sq:?}");
    }

    #[test]
    fn e_derivative_of_coordinate_is_drift() {
        let coeffs = SdeCoefficients::scalar(|x| -x.atan(), |_| 1.0);
        let op = ExpectationOperator::ito(coeffs, 1.0, DT, 23);
        let x = wiggle();
        let t = 0.5;
        let d = e_derivative(&coordinate(), &op, t, &x, &default_ladder(DT), 20_000).unwrap();
        let exact = -x.eval1(t).atan();
        assert!((d.value - exact).abs() <= d.tolerance(4.0) + 1e-3, "{d:?} vs {exact}");
    }

    #[test]
    fn deterministic_chain_rule() {
        let flow = EvolutionMap::scalar_flow(|x| -x.atan());
        let op = ExpectationOperator::deterministic(flow, 1.0, DT);
        let x = wiggle();
        for t in [0.25, 0.5] {
            let a = x.eval1(t);
            let d = e_derivative(&heat_cos(), &op, t, &x, &default_ladder(DT), 1).unwrap();
            let e = (-(1.0 - t) / 2.0f64).exp();
            let exact = 0.5 * e * a.cos() + (-e * a.sin()) * (-a.atan());
            assert!((d.value - exact).abs() < 1e-5, "{t}: {d:?} vs {exact}");
        }
    }

    #[test]
    fn window_and_ladder_errors() {
        let x = wiggle();
        assert!(matches!(
            dupire_horizontal(&coordinate(), 0.999, &x, &default_ladder(DT)),
            Err(Error::Window { .. })
        ));
        assert!(dupire_horizontal(&coordinate(), 0.5, &x, &[0.1, 0.2]).is_err());
        assert!(matches!(
            dupire_horizontal(&coordinate(), 0.3, &x, &default_ladder(DT)),
            Err(Error::GridMismatch(_))
        ));
        let op = ExpectationOperator::wiener(1, 1.0, DT, 1);
        assert!(e_derivative(&coordinate(), &op, 0.5, &x, &[DT / 2.0], 10).is_err());
        assert!(matches!(
            e_derivative(&coordinate(), &op, 0.5, &x, &default_ladder(DT), 1),
            Err(Error::Budget(1))
        ));
        let _ = StateFn::constant(0.0);
    }
}
