//! Statistical tests of the martingale property under an expectation operator.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expectation::{
    support_probe, z_score, EvolutionMap, ExpectationOperator, McEstimate, OperatorKind, SdeCoefficients,
    Z_THRESHOLD,
};
use crate::functional::{path_trapezoid_process, AdaptedProcess, Functional, StateFn};
use crate::path::{Path, TimeGrid};
use crate::rng::sample_rng;
use crate::semigroup::{solve_fvp_mild, FvpSolution, MarkovSemigroupOracle, MildSolver};
use crate::source::SourceTerm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub s: f64,
    pub t: f64,
    pub path_id: usize,
}

/// `E_s V(t) - V(s)` at one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub s: f64,
    pub t: f64,
    pub path_id: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub pairs_tested: Vec<PairCell>,
    pub deviations: Vec<Deviation>,
    pub max_z: f64,
    pub z_threshold: f64,
    pub pass: bool,
    /// Total number of simulated continuations.
    pub budget: usize,
    pub worst: Option<Deviation>,
}

impl MartingaleReport {
    fn from_deviations(deviations: Vec<Deviation>, budget: usize) -> Self {
        let mut worst: Option<Deviation> = None;
        for d in &deviations {
            if worst.map_or(true, |w| d.z > w.z) {
                worst = Some(*d);
            }
        }
        let max_z = worst.map_or(0.0, |w| w.z);
        Self {
            pairs_tested: deviations
                .iter()
                .map(|d| PairCell {
                    s: d.s,
                    t: d.t,
                    path_id: d.path_id,
                })
                .collect(),
            deviations,
            max_z,
            z_threshold: Z_THRESHOLD,
            pass: max_z <= Z_THRESHOLD,
            budget,
            worst,
        }
    }

    /// Re-scores the report under another z threshold.
    pub fn with_threshold(mut self, z: f64) -> Self {
        self.z_threshold = z;
        self.pass = self.max_z <= z;
        self
    }

    /// Deviation table with a header row.
    pub fn table(&self) -> (Vec<&'static str>, Vec<[f64; 6]>) {
        let rows = self
            .deviations
            .iter()
            .map(|d| [d.s, d.t, d.path_id as f64, d.estimate, d.std_error, d.z])
            .collect();
        (vec!["s", "t", "path_id", "deviation", "std_error", "z"], rows)
    }
}

/// `{(0, T/2), (0, T), (T/4, 3T/4), (T/2, T)}`.
pub fn default_pairs(horizon: f64) -> Vec<(f64, f64)> {
    vec![
        (0.0, 0.5 * horizon),
        (0.0, horizon),
        (0.25 * horizon, 0.75 * horizon),
        (0.5 * horizon, horizon),
    ]
}

/// Constants at -1, 0, 2, the ramp `t`, and one frozen Brownian path, all on `[0, T]`.
pub fn default_panel(horizon: f64, dt: f64, seed: u64) -> Result<Vec<Path>> {
    let grid = TimeGrid::spanning(0.0, horizon, dt)?;
    let mut rng = sample_rng(seed, u64::MAX);
    let mut w = 0.0;
    let brownian: Vec<f64> = grid
        .node_times()
        .enumerate()
        .map(|(k, _)| {
            if k > 0 {
                let z: f64 = rng.sample(StandardNormal);
                w += dt.sqrt() * z;
            }
            w
        })
        .collect();
    Ok(vec![
        Path::constant(grid, &[-1.0]),
        Path::constant(grid, &[0.0]),
        Path::constant(grid, &[2.0]),
        Path::scalar_fn(grid, |t| t),
        Path::from_nodes(grid, 1, brownian)?,
    ])
}

fn check_pairs(v: &AdaptedProcess, pairs: &[(f64, f64)]) -> Result<()> {
    for &(s, t) in pairs {
        if !(0.0 <= s && s <= t) {
            return Err(Error::InvalidArgument(format!("need 0 <= s <= t, got ({s}, {t})")));
        }
        v.check_window(t)?;
    }
    Ok(())
}

/// Tests `V(s) = E_s V(t)` on every pair and path.
pub fn test_martingale(
    v: &AdaptedProcess,
    op: &ExpectationOperator,
    pairs: &[(f64, f64)],
    paths: &[Path],
    n: usize,
) -> Result<MartingaleReport> {
    check_pairs(v, pairs)?;
    let mut deviations = Vec::with_capacity(pairs.len() * paths.len());
    let mut budget = 0;
    for &(s, t) in pairs {
        let section = v.section(t);
        for (id, x) in paths.iter().enumerate() {
            let est = op.conditional_apply(s, &section, x, n)?;
            let dev = est.mean - v.at(s, x);
            budget += est.n_samples;
            deviations.push(Deviation {
                s,
                t,
                path_id: id,
                estimate: dev,
                std_error: est.std_error,
                z: z_score(dev, est.std_error),
            });
        }
    }
    Ok(MartingaleReport::from_deviations(deviations, budget))
}

/// Integrand of a compensator.
#[derive(Debug, Clone)]
pub enum Compensator {
    /// `Psi(s, p) = phi(s, p(s))`; singular time weights are integrated exactly.
    Markov(SourceTerm),
    /// General adapted integrand, trapezoid rule on the path nodes.
    Adapted(AdaptedProcess),
}

impl Compensator {
    /// `∫_0^t Psi(s, p) ds`.
    pub fn integral(&self, p: &Path, t: f64) -> f64 {
        match self {
            Compensator::Markov(src) => src.integrate_along(p, 0.0, t),
            Compensator::Adapted(psi) => path_trapezoid_process(p, 0.0, t, psi),
        }
    }
}

/// `M(t) = V(t) - ∫_0^t Psi(s) ds`.
pub fn compensated(v: &AdaptedProcess, psi: &Compensator) -> AdaptedProcess {
    let (v, psi) = (v.clone(), psi.clone());
    AdaptedProcess::new(v.end(), move |t, p| v.at(t, p) - psi.integral(p, t))
}

/// Runs [`test_martingale`] on `V - ∫ Psi`.
pub fn test_compensated(
    v: &AdaptedProcess,
    psi: &Compensator,
    op: &ExpectationOperator,
    pairs: &[(f64, f64)],
    paths: &[Path],
    n: usize,
) -> Result<MartingaleReport> {
    if let Compensator::Markov(src) = psi {
        for x in paths {
            for &(_, t) in pairs {
                let grid = x.grid();
                for s in grid.node_times().filter(|s| (0.0..=t).contains(s)) {
                    src.check_hint(s, src.regular(s, &x.eval(s)))?;
                }
            }
        }
    }
    test_martingale(&compensated(v, psi), op, pairs, paths, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub sup_difference: f64,
    pub worst: (f64, f64),
    pub tolerance: f64,
    pub pass: bool,
    pub solution: FvpSolution,
}

/// Compares `U(t, x) = V(t, const x)` with the mild solution whose terminal
/// datum is `V(T, const ·)` and whose source is the Markov compensator.
pub fn test_shifted_fvp_equivalence(
    v: &AdaptedProcess,
    psi: &SourceTerm,
    oracle: &MarkovSemigroupOracle,
    times: &[f64],
    states: &[f64],
) -> Result<EquivalenceReport> {
    if let MarkovSemigroupOracle::Identity = oracle {
        return Err(Error::InvalidArgument("equivalence test needs the Gaussian oracle".into()));
    }
    let horizon = v.end();
    let constant = |x: f64| Path::constant(TimeGrid::with_step(-1.0, 1.0, 1).expect("unit grid"), &[x]);
    let vt = v.clone();
    let terminal = StateFn::scalar("V(T)", None, move |x| vt.at(horizon, &constant(x)));
    let solver = MildSolver::new(oracle.clone(), terminal, psi.clone(), horizon);
    let state_vecs: Vec<Vec<f64>> = states.iter().map(|x| vec![*x]).collect();
    let solution = solve_fvp_mild(&solver, times, &state_vecs)?;
    let mut sup = 0.0f64;
    let mut worst = (times[0], states[0]);
    for (i, &t) in times.iter().enumerate() {
        for (j, &x) in states.iter().enumerate() {
            let d = (v.at(t, &constant(x)) - solution.at(i, j)).abs();
            if d > sup || d.is_nan() {
                sup = d;
                worst = (t, x);
            }
        }
    }
    let tolerance = 1e-4;
    Ok(EquivalenceReport {
        sup_difference: sup,
        worst,
        tolerance,
        pass: sup <= tolerance,
        solution,
    })
}

/// `H(s) = H_k` on `(t_k, t_{k+1}]`, each `H_k` seeing the path up to `t_k`.
#[derive(Debug, Clone)]
pub struct SimpleProcess {
    partition: Vec<f64>,
    values: Vec<Functional>,
}

impl SimpleProcess {
    pub fn new(partition: Vec<f64>, values: Vec<Functional>) -> Result<Self> {
        if partition.len() != values.len() + 1 || partition.len() < 2 {
            return Err(Error::InvalidArgument(
                "a partition of m + 1 points needs m values".into(),
            ));
        }
        for w in partition.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidArgument(format!("partition must increase: {partition:?}")));
            }
        }
        for (k, h) in values.iter().enumerate() {
            match h.horizon() {
                Some(hz) if hz <= partition[k] + 1e-12 => {}
                hz => {
                    return Err(Error::Horizon {
                        horizon: hz,
                        allowed: partition[k],
                    })
                }
            }
        }
        Ok(Self { partition, values })
    }

    pub fn constant(c: f64, horizon: f64) -> Self {
        Self::new(vec![0.0, horizon], vec![Functional::constant(c)]).expect("valid")
    }

    pub fn partition(&self) -> &[f64] {
        &self.partition
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    /// `E[(H · M)(T)^2]`
    pub lhs: McEstimate,
    /// `E ∫ H^2 Psi^2`
    pub rhs: McEstimate,
    pub relative_difference: f64,
    /// Standard error of the paired difference.
    pub combined_std_error: f64,
    pub allowed: f64,
    pub pass: bool,
}

/// Compares both sides of the Itô isometry for the coordinate martingale
/// `M = X - ∫ b(X)`, whose quadratic variation density is `sigma^2(X)`.
pub fn ito_isometry_check(
    h: &SimpleProcess,
    op: &ExpectationOperator,
    horizon: f64,
    n: usize,
) -> Result<IsometryReport> {
    let coeffs = match op.kind() {
        OperatorKind::Wiener { dim: 1 } => SdeCoefficients::brownian(1),
        OperatorKind::Ito(c) if c.dim() == 1 => c.clone(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "isometry check needs a scalar Wiener or Itô operator, got {other:?}"
            )))
        }
    };
    if n < 2 {
        return Err(Error::Budget(n));
    }
    let dt = op.dt();
    let grid = TimeGrid::spanning(0.0, horizon, dt)?;
    let idx = h
        .partition
        .iter()
        .map(|&t| {
            grid.node_index(t)
                .ok_or_else(|| Error::GridMismatch(format!("partition point {t} is not a grid node")))
        })
        .collect::<Result<Vec<_>>>()?;
    if *h.partition.last().expect("nonempty") > horizon + 1e-12 || h.partition[0] < -1e-12 {
        return Err(Error::InvalidArgument("partition leaves [0, T]".into()));
    }
    let start = Path::constant(TimeGrid::with_step(-dt, dt, 1)?, &[0.0]);
    let pairs: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let y = op.continuation(&start, horizon, i)?;
            let mut stoch = 0.0;
            let mut qv = 0.0;
            for (k, hk) in h.values.iter().enumerate() {
                let value = hk.evaluate(&y);
                let mut dm = 0.0;
                let mut dq = 0.0;
                for j in idx[k]..idx[k + 1] {
                    let (a, b) = (grid.node_time(j), grid.node_time(j + 1));
                    let xa = y.eval1(a);
                    dm += y.eval1(b) - xa - coeffs.drift(&[xa])[0] * dt;
                    let s = coeffs.diffusion(&[xa])[0];
                    dq += s * s * dt;
                }
                stoch += value * dm;
                qv += value * value * dq;
            }
            Ok((stoch * stoch, qv))
        })
        .collect::<Result<_>>()?;
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (l, r, d) = (
        McEstimate::from_samples(&lhs),
        McEstimate::from_samples(&rhs),
        McEstimate::from_samples(&diff),
    );
    let relative = (l.mean - r.mean).abs() / r.mean.abs();
    let allowed = 0.05f64.max(Z_THRESHOLD * d.std_error / r.mean.abs());
    Ok(IsometryReport {
        lhs: l,
        rhs: r,
        relative_difference: relative,
        combined_std_error: d.std_error,
        allowed,
        pass: relative <= allowed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub paths_checked: usize,
    pub nodes_checked: usize,
    /// Node values of `V` along simulated paths that are not exactly zero.
    pub nonzero_count: usize,
    pub max_abs_along_paths: f64,
    pub s: f64,
    pub t: f64,
    /// `V(s)` at the ramp.
    pub v_s: f64,
    /// `E_s V(t)` at the ramp, by the deterministic flow.
    pub conditional: f64,
    /// Same quantity under the zero-noise Euler scheme.
    pub conditional_euler: f64,
    /// `E_s V(t) - V(s)`.
    pub margin: f64,
    /// `E|V(t)|` started from the zero path.
    pub support_probe: f64,
    pub required_margin: f64,
    pub pass: bool,
}

/// `V(t, x) = min{(|x(t)| - |x(0)|)^+, 1}`.
pub fn support_process(horizon: f64) -> AdaptedProcess {
    AdaptedProcess::new(horizon, |t, p| {
        let gap = p.eval1(t).abs() - p.eval1(0.0).abs();
        gap.max(0.0).min(1.0)
    })
}

/// Drift `b(x) = -arctan x` with no noise: `V` vanishes along every solution
/// although it fails the martingale identity at the ramp.
pub fn support_counterexample(horizon: f64, dt: f64, n: usize) -> Result<SupportReport> {
    if n < 2 {
        return Err(Error::Budget(n));
    }
    let (s, t) = (0.5 * horizon, horizon);
    let v = support_process(horizon);
    let coeffs = SdeCoefficients::drift_only(1, |x, out| out[0] = -x[0].atan()).with_bounds(std::f64::consts::FRAC_PI_2, 0.0);
    let ito = ExpectationOperator::ito(coeffs, horizon, dt, 0);
    let flow = ExpectationOperator::deterministic(EvolutionMap::scalar_flow(|x| -x.atan()), horizon, dt);

    let past = TimeGrid::with_step(-dt, dt, 1)?;
    let grid = TimeGrid::spanning(0.0, horizon, dt)?;
    let counts: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let c = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
            let y = ito.continuation(&Path::constant(past, &[c]), horizon, i as u64)?;
            let mut nonzero = 0;
            let mut worst = 0.0f64;
            for tk in grid.node_times() {
                let val = v.at(tk, &y);
                if val != 0.0 {
                    nonzero += 1;
                }
                worst = worst.max(val.abs());
            }
            Ok((nonzero, worst))
        })
        .collect::<Result<_>>()?;

    let ramp = Path::scalar_fn(grid, |u| u);
    let v_s = v.at(s, &ramp);
    let section = v.section(t);
    let conditional = flow.conditional_apply(s, &section, &ramp, 1)?.mean;
    let conditional_euler = ito.conditional_apply(s, &section, &ramp, 2)?.mean;
    let zero = Path::constant(past, &[0.0]);
    let probe = support_probe(&ito, &section, &zero, 2)?.mean;
    let nonzero_count = counts.iter().map(|c| c.0).sum();
    let margin = conditional - v_s;
    let required_margin = -0.1;
    Ok(SupportReport {
        paths_checked: n,
        nodes_checked: n * grid.n_nodes(),
        nonzero_count,
        max_abs_along_paths: counts.iter().map(|c| c.1).fold(0.0, f64::max),
        s,
        t,
        v_s,
        conditional,
        conditional_euler,
        margin,
        support_probe: probe,
        required_margin,
        pass: nonzero_count == 0 && margin <= required_margin,
    })
}
