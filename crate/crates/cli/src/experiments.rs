//! The nine registry experiments. Each is a sequence of timed sections that
//! call into `pathlab`, record named checks, and collect plot-ready tables.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use pathlab::catalog::CatalogFn;
use pathlab::derivatives::{default_ladder, dupire_horizontal, e_derivative, ito_residual, ItoSteps};
use pathlab::expectation::{
    check_homogeneity, check_projection, check_taking_out_known, check_tower, evolution_map_axioms,
    AxiomReport, EvolutionMap, ExpectationOperator, SdeCoefficients,
};
use pathlab::functional::{make_eval, make_integral, running_max, AdaptedProcess, Functional, StateFn};
use pathlab::martingale::{
    default_pairs, default_panel, ito_isometry_check, support_counterexample, test_compensated,
    test_martingale, test_shifted_fvp_equivalence, Compensator, MartingaleReport, SimpleProcess,
};
use pathlab::rng::derive_seed;
use pathlab::semigroup::{
    gaussian_apply, laplace_resolvent, resolvent_identity_residual, running_max_source, running_max_value,
    semigroup_law_residual, solve_fvp_mild, strong_residual, EvolutionarySemigroup, FvpSolution, Generator,
    LaplaceSpec, MarkovSemigroupOracle, MildSolver, ResidualRegion,
};
use pathlab::source::{SourceTerm, TimeWeight};
use pathlab::{Path, TimeGrid};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::registry;
use crate::result::{ExperimentResult, Recorder, Table};

/// Finite-difference step of the strong-residual lattice in E3.
pub const RESIDUAL_STEP: f64 = 1e-2;
pub const RESIDUAL_TOL: f64 = 5e-3;
pub const FVP_TOL: f64 = 1e-6;
pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const ITO_TOL: f64 = 1e-4;
pub const CHAIN_RULE_TOL: f64 = 1e-5;
/// Required z at `(0, T)` for the running maximum without its compensator.
pub const UNCOMPENSATED_Z: f64 = 8.0;
/// Path grid of the operator-axiom panel; the nested checks are quadratic in it.
pub const AXIOM_DT: f64 = 1.0 / 32.0;
pub const SUPPORT_PATHS: usize = 500;
pub const STOPPING_CASES: usize = 30;
pub const RESOLVENT_TOL: f64 = 1e-8;
pub const RESOLVENT_IDENTITY_TOL: f64 = 1e-5;
pub const SEMIGROUP_LAW_TOL: f64 = 1e-6;

/// Validates `cfg` and runs the experiment it names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let entry = registry::find(&cfg.experiment).ok_or_else(|| CliError::UnknownExperiment(cfg.experiment.clone()))?;
    let start = Instant::now();
    let mut rec = Recorder::new(cfg);
    match entry.id {
        "E1" => heat_final_value(&mut rec)?,
        "E2" => integral_mean(&mut rec)?,
        "E3" => running_maximum(&mut rec)?,
        "E4" => ito_residual_panel(&mut rec)?,
        "E5" => deterministic_evolution(&mut rec)?,
        "E6" => support(&mut rec)?,
        "E7" => operator_axioms(&mut rec)?,
        "E8" => resolvent(&mut rec)?,
        "E9" => isometry(&mut rec)?,
        other => return Err(CliError::UnknownExperiment(other.into())),
    }
    Ok(rec.finish(entry.id, entry.name, start.elapsed().as_secs_f64()))
}

fn wiener(cfg: &ExperimentConfig, stream: u64) -> ExpectationOperator {
    ExpectationOperator::wiener(1, cfg.horizon, cfg.dt, derive_seed(cfg.base_seed, stream))
}

fn panel(cfg: &ExperimentConfig) -> Result<Vec<Path>> {
    Ok(default_panel(cfg.horizon, cfg.dt, cfg.base_seed)?)
}

/// `32 × 41` sample set: `t = kT/32` for `k < 32`, `x` in `[-4, 4]` with step 0.2.
fn fvp_lattice(horizon: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let times = (0..32).map(|k| k as f64 * horizon / 32.0).collect();
    let states = (0..41).map(|j| vec![-4.0 + 0.2 * j as f64]).collect();
    (times, states)
}

fn solution_table(name: &str, sol: &FvpSolution, exact: impl Fn(f64, f64) -> f64) -> Table {
    let mut t = Table::new(name, &["t", "x", "u", "exact", "error"]);
    for (i, &ti) in sol.times.iter().enumerate() {
        for (j, x) in sol.states.iter().enumerate() {
            let (u, e) = (sol.at(i, j), exact(ti, x[0]));
            t.push(&[ti, x[0], u, e, u - e]);
        }
    }
    t
}

fn deviation_rows(table: &mut Table, report: &MartingaleReport, compensated: f64) {
    for d in &report.deviations {
        table.push(&[compensated, d.s, d.t, d.path_id as f64, d.estimate, d.std_error, d.z]);
    }
}

fn deviation_table() -> Table {
    Table::new("deviations", &["compensated", "s", "t", "path_id", "deviation", "std_error", "z"])
}

/// Largest z over the cells at `(s, t)`.
fn z_at(report: &MartingaleReport, s: f64, t: f64) -> f64 {
    report
        .deviations
        .iter()
        .filter(|d| d.s == s && d.t == t)
        .map(|d| d.z)
        .fold(0.0, f64::max)
}

fn heat_final_value(rec: &mut Recorder) -> Result<()> {
    let cfg = rec.cfg.clone();
    let big_t = cfg.horizon;
    let heat = move |t: f64, x: f64| (-(big_t - t) / 2.0).exp() * x.cos();

    rec.section("markov_agreement", |rec| {
        let funcs = [CatalogFn::Cos, CatalogFn::GaussianBump];
        let mut table = Table::new("markov_agreement", &["f", "t", "x0", "mc_mean", "std_error", "oracle", "z"]);
        let (mut max_z, mut max_closed) = (0.0f64, 0.0f64);
        let mut cell = 0;
        for (fi, f) in funcs.iter().enumerate() {
            for t in [0.25 * big_t, big_t] {
                for x0 in [-1.0, 0.0, 2.0] {
                    let sg = EvolutionarySemigroup::new(wiener(&cfg, 100 + cell));
                    cell += 1;
                    let est = sg.markov_restrict(t, &f.state_fn(), &[x0], cfg.n_samples)?;
                    let oracle = gaussian_apply(t, &f.state_fn(), &[x0]);
                    let z = est.z_against(oracle).abs();
                    max_z = max_z.max(z);
                    let closed = f.heat_closed_form(t, x0).expect("closed form known");
                    max_closed = max_closed.max((oracle - closed).abs());
                    table.push(&[fi as f64, t, x0, est.mean, est.std_error, oracle, z]);
                }
            }
        }
        rec.op("markov_restrict");
        rec.op("gaussian_apply");
        rec.at_most("max_z", max_z, cfg.z_threshold);
        rec.at_most("oracle_vs_closed_form", max_closed, CLOSED_FORM_TOL);
        rec.headline("markov_max_z", max_z);
        rec.headline("oracle_closed_form_error", max_closed);
        rec.table(table);
        Ok(())
    })?;

    rec.section("final_value_problem", |rec| {
        let solver = MildSolver::new(
            MarkovSemigroupOracle::gaussian(1),
            CatalogFn::Cos.state_fn(),
            SourceTerm::zero(),
            big_t,
        );
        let (times, states) = fvp_lattice(big_t);
        let sol = solve_fvp_mild(&solver, &times, &states)?;
        rec.op("solve_fvp_mild");
        let err = sol.max_error(|t, x| heat(t, x[0]));
        rec.at_most("max_error", err, FVP_TOL);
        rec.headline("fvp_max_error", err);
        rec.table(solution_table("u_field", &sol, heat));
        Ok(())
    })?;

    let v = AdaptedProcess::cylinder(big_t, move |t, x| heat(t, x[0]));

    rec.section("martingale", |rec| {
        let r = test_martingale(&v, &wiener(&cfg, 1), &default_pairs(big_t), &panel(&cfg)?, cfg.n_samples)?
            .with_threshold(cfg.z_threshold);
        rec.op("test_martingale");
        rec.at_most("max_z", r.max_z, cfg.z_threshold);
        rec.headline("martingale_max_z", r.max_z);
        let mut table = deviation_table();
        deviation_rows(&mut table, &r, 0.0);
        rec.table(table);
        rec.report(&r)
    })?;

    rec.section("equivalence", |rec| {
        let times: Vec<f64> = (0..=4).map(|k| k as f64 * big_t / 4.0).collect();
        let states = [-1.0, 0.0, 0.5, 2.0];
        let r = test_shifted_fvp_equivalence(&v, &SourceTerm::zero(), &MarkovSemigroupOracle::gaussian(1), &times, &states)?;
        rec.op("test_shifted_fvp_equivalence");
        rec.at_most("sup_difference", r.sup_difference, r.tolerance);
        rec.headline("equivalence_sup_difference", r.sup_difference);
        Ok(())
    })
}

fn integral_mean(rec: &mut Recorder) -> Result<()> {
    let cfg = rec.cfg.clone();
    let big_t = cfg.horizon;
    let minus_cos = SourceTerm::new("-cos", TimeWeight::Unit, |_, x| -x[0].cos()).with_bound_hint(1.0);
    let u_cos = move |t: f64, x: f64| 2.0 * (1.0 - (-(big_t - t) / 2.0).exp()) * x.cos();

    rec.section("cos_source", |rec| {
        let solver = MildSolver::new(
            MarkovSemigroupOracle::gaussian(1),
            StateFn::constant(0.0),
            minus_cos.clone(),
            big_t,
        );
        let (times, states) = fvp_lattice(big_t);
        let sol = solve_fvp_mild(&solver, &times, &states)?;
        rec.op("solve_fvp_mild");
        let err = sol.max_error(|t, x| u_cos(t, x[0]));
        rec.at_most("max_error", err, FVP_TOL);
        rec.headline("fvp_cos_max_error", err);
        rec.table(solution_table("u_field_cos", &sol, u_cos));
        Ok(())
    })?;

    rec.section("square_source", |rec| {
        let source = SourceTerm::new("-x^2", TimeWeight::Unit, |_, x| -x[0] * x[0]);
        let solver = MildSolver::new(MarkovSemigroupOracle::gaussian(1), StateFn::constant(0.0), source, big_t);
        let (times, states) = fvp_lattice(big_t);
        let sol = solve_fvp_mild(&solver, &times, &states)?;
        let exact = move |t: f64, x: f64| {
            let r = big_t - t;
            x * x * r + 0.5 * r * r
        };
        let err = sol.max_error(|t, x| exact(t, x[0]));
        rec.at_most("max_error", err, FVP_TOL);
        rec.headline("fvp_square_max_error", err);
        rec.table(solution_table("u_field_square", &sol, exact));
        Ok(())
    })?;

    let v = AdaptedProcess::cylinder(big_t, move |t, x| u_cos(t, x[0]));

    rec.section("compensated", |rec| {
        let op = wiener(&cfg, 2);
        let (pairs, paths) = (default_pairs(big_t), panel(&cfg)?);
        let psi = Compensator::Markov(minus_cos.clone());
        let r = test_compensated(&v, &psi, &op, &pairs, &paths, cfg.n_samples)?.with_threshold(cfg.z_threshold);
        rec.op("test_compensated");
        let bare = test_martingale(&v, &op, &pairs, &paths, cfg.n_samples)?.with_threshold(cfg.z_threshold);
        rec.op("test_martingale");
        rec.at_most("compensated_max_z", r.max_z, cfg.z_threshold);
        rec.at_least("uncompensated_max_z", bare.max_z, cfg.z_threshold);
        rec.headline("compensated_max_z", r.max_z);
        rec.headline("uncompensated_max_z", bare.max_z);
        let mut table = deviation_table();
        deviation_rows(&mut table, &r, 1.0);
        deviation_rows(&mut table, &bare, 0.0);
        rec.table(table);
        rec.report(&r)
    })?;

    rec.section("equivalence", |rec| {
        let times: Vec<f64> = (0..=4).map(|k| k as f64 * big_t / 4.0).collect();
        let r = test_shifted_fvp_equivalence(
            &v,
            &minus_cos,
            &MarkovSemigroupOracle::gaussian(1),
            &times,
            &[-1.0, 0.0, 0.5, 2.0],
        )?;
        rec.op("test_shifted_fvp_equivalence");
        rec.at_most("sup_difference", r.sup_difference, r.tolerance);
        rec.headline("equivalence_sup_difference", r.sup_difference);
        Ok(())
    })
}

fn running_maximum(rec: &mut Recorder) -> Result<()> {
    let cfg = rec.cfg.clone();
    let big_t = cfg.horizon;
    let f = CatalogFn::Tanh;
    let fs = f.state_fn();
    let source = running_max_source(&f.derivative_fn(), big_t);

    rec.section("strong_residual", |rec| {
        let fs = fs.clone();
        let u = move |t: f64, x: f64| running_max_value(&fs, big_t - t, x);
        let region = ResidualRegion {
            t0: 0.0,
            t1: 0.9 * big_t,
            x0: -2.0,
            x1: 2.0,
            step: RESIDUAL_STEP,
        };
        let r = strong_residual(&u, &source, Generator::HalfLaplacian, &region, RESIDUAL_TOL);
        rec.op("strong_residual");
        rec.at_most("max_abs_residual", r.max_abs, RESIDUAL_TOL);
        // confirmation on the doubled step
        rec.at_most("coarse_disagreement", r.disagreement, 10.0 * RESIDUAL_TOL);
        rec.headline("residual_max", r.max_abs);
        rec.headline("residual_extrapolated_max", r.extrapolated_max);
        let mut table = Table::new("residuals", &["t", "x", "residual", "residual_2h"]);
        for p in &r.field {
            table.push(&[p.t, p.x, p.residual, p.residual_coarse]);
        }
        rec.table(table);
        let summary = serde_json::json!({
            "max_abs": r.max_abs,
            "max_abs_coarse": r.max_abs_coarse,
            "disagreement": r.disagreement,
            "extrapolated_max": r.extrapolated_max,
            "worst": r.worst,
            "confirmed": r.confirmed,
            "warning": r.warning,
        });
        rec.report(&summary)
    })?;

    let v = AdaptedProcess::cylinder(big_t, move |t, x| running_max_value(&fs, big_t - t, x[0]));
    let op = wiener(&cfg, 3);
    let (pairs, paths) = (default_pairs(big_t), panel(&cfg)?);
    let mut table = deviation_table();

    rec.section("compensated", |rec| {
        let psi = Compensator::Markov(source.clone());
        let r = test_compensated(&v, &psi, &op, &pairs, &paths, cfg.n_samples)?.with_threshold(cfg.z_threshold);
        rec.op("test_compensated");
        rec.at_most("max_z", r.max_z, cfg.z_threshold);
        rec.headline("compensated_max_z", r.max_z);
        deviation_rows(&mut table, &r, 1.0);
        rec.report(&r)
    })?;

    rec.section("uncompensated", |rec| {
        let r = test_martingale(&v, &op, &pairs, &paths, cfg.n_samples)?.with_threshold(cfg.z_threshold);
        rec.op("test_martingale");
        let z = z_at(&r, 0.0, big_t);
        rec.at_least("z_at_0_T", z, UNCOMPENSATED_Z);
        rec.headline("uncompensated_z_at_0_T", z);
        deviation_rows(&mut table, &r, 0.0);
        Ok(())
    })?;
    rec.table(table);
    Ok(())
}

fn ito_residual_panel(rec: &mut Recorder) -> Result<()> {
    let cfg = rec.cfg.clone();
    let big_t = cfg.horizon;
    let paths = panel(&cfg)?;
    let times = [0.0, 0.125 * big_t, 0.25 * big_t, 0.5 * big_t, 0.75 * big_t];
    let brownian = SdeCoefficients::brownian(1);
    let steps = ItoSteps::for_grid(cfg.dt);
    let mut table = Table::new("ito_residuals", &["functional", "t", "path_id", "psi", "error_bound"]);

    rec.section("heat_panel", |rec| {
        let funcs = [
            CatalogFn::Cos,
            CatalogFn::Sin,
            CatalogFn::GaussianBump,
            CatalogFn::Square,
            CatalogFn::Identity,
        ];
        let mut worst = 0.0f64;
        for (k, f) in funcs.iter().enumerate() {
            let f = *f;
            let v = AdaptedProcess::cylinder(big_t, move |t, x| {
                f.heat_closed_form(big_t - t, x[0]).expect("closed form known")
            });
            for &t in &times {
                for (id, x) in paths.iter().enumerate() {
                    let r = ito_residual(&v, &brownian, t, x, &steps)?;
                    worst = worst.max(r.value.abs());
                    table.push(&[k as f64, t, id as f64, r.value, r.error_bound]);
                }
            }
        }
        rec.op("ito_residual");
        rec.at_most("max_abs_psi", worst, ITO_TOL);
        rec.headline("heat_max_abs_psi", worst);
        Ok(())
    })?;

    let square = AdaptedProcess::cylinder(big_t, |_, x| x[0] * x[0]);

    rec.section("square_panel", |rec| {
        let mut worst = 0.0f64;
        for &t in &times {
            for (id, x) in paths.iter().enumerate() {
                let r = ito_residual(&square, &brownian, t, x, &steps)?;
                worst = worst.max((r.value - 1.0).abs());
                table.push(&[5.0, t, id as f64, r.value, r.error_bound]);
            }
        }
        rec.at_most("max_abs_psi_minus_one", worst, ITO_TOL);
        rec.headline("square_max_abs_psi_minus_one", worst);
        Ok(())
    })?;
    rec.table(table);

    rec.section("compensated", |rec| {
        let psi = Compensator::Markov(SourceTerm::constant(1.0));
        let r = test_compensated(&square, &psi, &wiener(&cfg, 4), &default_pairs(big_t), &paths, cfg.n_samples)?
            .with_threshold(cfg.z_threshold);
        rec.op("test_compensated");
        rec.at_most("max_z", r.max_z, cfg.z_threshold);
        rec.headline("square_compensated_max_z", r.max_z);
        let mut dev = deviation_table();
        deviation_rows(&mut dev, &r, 1.0);
        rec.table(dev);
        rec.report(&r)
    })
}

/// Adapted processes for the stopping-operator comparison.
fn stopping_catalog(big_t: f64) -> Result<Vec<AdaptedProcess>> {
    let tanh = CatalogFn::Tanh.state_fn();
    let integral = {
        let tanh = tanh.clone();
        AdaptedProcess::new(big_t, move |t, p| {
            make_integral(&tanh, 0.0, t).map(|f| f.evaluate(p)).unwrap_or(0.0)
        })
    };
    Ok(vec![
        AdaptedProcess::cylinder(big_t, move |t, x| (-(big_t - t) / 2.0).exp() * x[0].cos()),
        AdaptedProcess::cylinder(big_t, |t, x| t * x[0].sin()),
        integral,
        AdaptedProcess::new(big_t, |t, p| running_max(p, 0.0, t) + t * t),
        AdaptedProcess::new(big_t, |t, p| (t - 0.5 * p.eval1(0.0)).exp() * p.eval1(t)),
    ])
}

fn random_path(grid: TimeGrid, rng: &mut ChaCha8Rng) -> Result<Path> {
    let sd = grid.dt().sqrt();
    let mut w: f64 = rng.gen_range(-1.0..1.0);
    let mut values = Vec::with_capacity(grid.n_nodes());
    for _ in 0..grid.n_nodes() {
        values.push(w);
        w += sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
    }
    Ok(Path::scalar(grid, values)?)
}

fn deterministic_evolution(rec: &mut Recorder) -> Result<()> {
    let cfg = rec.cfg.clone();
    let big_t = cfg.horizon;
    let paths = panel(&cfg)?;

    rec.section("evolution_axioms", |rec| {
        let shifts = [0.25 * big_t, 0.5 * big_t];
        let flow = EvolutionMap::scalar_flow(|x| -x.atan());
        let stop = evolution_map_axioms(&EvolutionMap::Stopping, &paths, big_t, &shifts)?;
        let ode = evolution_map_axioms(&flow, &paths, big_t, &shifts)?;
        rec.op("evolution_map_axioms");
        let worst = stop.max_errors.iter().chain(&ode.max_errors).copied().fold(0.0, f64::max);
        rec.at_most("max_axiom_error", worst, pathlab::expectation::EVOLUTION_TOL);
        rec.headline("evolution_max_error", worst);
        rec.report(&serde_json::json!({ "stopping": stop, "arctan_flow": ode }))
    })?;

    rec.section("stopping_identity", |rec| {
        let catalog = stopping_catalog(big_t)?;
        let grid = TimeGrid::spanning(-0.25 * big_t, big_t, cfg.dt)?;
        let stopping = ExpectationOperator::stopping(cfg.dt);
        let ladder = default_ladder(cfg.dt);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, 5));
        let last = cfg.n_steps() / 2;
        let mut table = Table::new("stopping_identity", &["case", "functional", "t", "e_derivative", "horizontal", "allowed"]);
        let mut worst_ratio = 0.0f64;
        for case in 0..STOPPING_CASES {
            let k = rng.gen_range(0..catalog.len());
            let t = rng.gen_range(0..=last) as f64 * cfg.dt;
            let x = random_path(grid, &mut rng)?;
            let a = e_derivative(&catalog[k], &stopping, t, &x, &ladder, 1)?;
            let b = dupire_horizontal(&catalog[k], t, &x, &ladder)?;
            let allowed = a.tolerance(cfg.z_threshold) + b.tolerance(cfg.z_threshold) + 1e-12;
            worst_ratio = worst_ratio.max((a.value - b.value).abs() / allowed);
            table.push(&[case as f64, k as f64, t, a.value, b.value, allowed]);
        }
        rec.op("e_derivative");
        rec.op("dupire_horizontal");
        rec.at_most("max_difference_over_bound", worst_ratio, 1.0);
        rec.headline("stopping_identity_ratio", worst_ratio);
        rec.table(table);
        Ok(())
    })?;

    let heat = AdaptedProcess::cylinder(big_t, move |t, x| (-(big_t - t) / 2.0).exp() * x[0].cos());

    rec.section("chain_rule", |rec| {
        let op = ExpectationOperator::deterministic(EvolutionMap::scalar_flow(|x| -x.atan()), big_t, cfg.dt);
        let mut worst = 0.0f64;
        for &t in &[0.25 * big_t, 0.5 * big_t] {
            for x in &paths {
                let a = x.eval1(t);
                let d = e_derivative(&heat, &op, t, x, &default_ladder(cfg.dt), 1)?;
                let e = (-(big_t - t) / 2.0).exp();
                let exact = 0.5 * e * a.cos() + (-e * a.sin()) * (-a.atan());
                worst = worst.max((d.value - exact).abs());
            }
        }
        rec.at_most("max_error", worst, CHAIN_RULE_TOL);
        rec.headline("chain_rule_max_error", worst);
        Ok(())
    })?;

    rec.section("annihilation", |rec| {
        let op = wiener(&cfg, 6);
        // E_t[x(T)^2] = x(t)^2 + (T - t)
        let second = AdaptedProcess::cylinder(big_t, move |t, x| x[0] * x[0] + big_t - t);
        let mut worst_ratio = 0.0f64;
        let mut table = Table::new("annihilation", &["functional", "t", "path_id", "value", "std_error", "allowed"]);
        for (k, v) in [&heat, &second].into_iter().enumerate() {
            for &t in &[0.25 * big_t, 0.5 * big_t] {
                for (id, x) in paths.iter().enumerate() {
                    let d = e_derivative(v, &op, t, x, &default_ladder(cfg.dt), cfg.n_samples)?;
                    let allowed = d.tolerance(cfg.z_threshold);
                    worst_ratio = worst_ratio.max(d.value.abs() / allowed);
                    table.push(&[k as f64, t, id as f64, d.value, d.std_error, allowed]);
                }
            }
        }
        rec.at_most("max_value_over_bound", worst_ratio, 1.0);
        rec.headline("annihilation_ratio", worst_ratio);
        rec.table(table);
        Ok(())
    })
}

fn support(rec: &mut Recorder) -> Result<()> {
    let cfg = rec.cfg.clone();
    rec.section("support_counterexample", |rec| {
        let r = support_counterexample(cfg.horizon, cfg.dt, SUPPORT_PATHS)?;
        rec.op("support_counterexample");
        rec.at_most("nonzero_values_along_paths", r.nonzero_count as f64, 0.0);
        rec.at_most("margin", r.margin, r.required_margin);
        rec.headline("margin", r.margin);
        rec.headline("conditional_expectation", r.conditional);
        rec.headline("nonzero_count", r.nonzero_count as f64);
        rec.report(&r)
    })
}

#[derive(Serialize)]
struct AxiomRow {
    operator: &'static str,
    check: &'static str,
    report: AxiomReport,
}

fn operator_axioms(rec: &mut Recorder) -> Result<()> {
    let cfg = rec.cfg.clone();
    let big_t = cfg.horizon;
    let grid = TimeGrid::spanning(0.0, big_t, AXIOM_DT)?;
    if ((big_t / 4.0) / AXIOM_DT - (big_t / 4.0 / AXIOM_DT).round()).abs() > 1e-9 {
        return Err(CliError::Config(format!("T/4 must be a multiple of {AXIOM_DT} for E7")));
    }
    let x = Path::scalar_fn(grid, |t| 0.5 * t - 0.25);
    let ito = SdeCoefficients::scalar(|x| -x.atan(), |_| 1.0);
    let ops = [
        ("wiener", ExpectationOperator::wiener(1, big_t, AXIOM_DT, derive_seed(cfg.base_seed, 7))),
        ("ito_arctan", ExpectationOperator::ito(ito, big_t, AXIOM_DT, derive_seed(cfg.base_seed, 8))),
    ];
    let (q, h, tq) = (0.25 * big_t, 0.5 * big_t, 0.75 * big_t);
    let cos = CatalogFn::Cos.state_fn();
    let id = CatalogFn::Identity.state_fn();
    let mut rows = Vec::new();
    let mut table = Table::new("axioms", &["operator", "check", "lhs", "rhs", "difference", "std_error", "z"]);
    for (k, (name, op)) in ops.iter().enumerate() {
        let checks: [(&'static str, &str); 4] = [
            ("projection", "check_projection"),
            ("homogeneity", "check_homogeneity"),
            ("tower", "check_tower"),
            ("taking_out_known", "check_taking_out_known"),
        ];
        for (j, (check, op_name)) in checks.iter().enumerate() {
            let section = format!("{name}_{check}");
            rec.section(&section, |rec| {
                let report = match *check {
                    "projection" => check_projection(op, &make_eval(&cos, 0.0), &x, cfg.n_samples)?,
                    "homogeneity" => {
                        check_homogeneity(op, q, &make_eval(&CatalogFn::Square.state_fn(), h), &x, cfg.n_samples, cfg.n_inner)?
                    }
                    "tower" => check_tower(op, q, h, &make_eval(&cos, tq), &x, cfg.n_samples, cfg.n_inner)?,
                    _ => check_taking_out_known(op, h, &make_eval(&id, h), &make_eval(&id, big_t), &x, cfg.n_samples)?,
                };
                rec.op(op_name);
                rec.at_most("z", report.z, cfg.z_threshold);
                table.push(&[k as f64, j as f64, report.lhs.mean, report.rhs.mean, report.difference, report.std_error, report.z]);
                rows.push(AxiomRow {
                    operator: name,
                    check,
                    report,
                });
                Ok(())
            })?;
        }
    }
    let max_z = rows.iter().map(|r| r.report.z).fold(0.0, f64::max);
    rec.headline("max_z", max_z);
    rec.table(table);
    rec.section("summary", |rec| rec.report(&rows))
}

fn resolvent(rec: &mut Recorder) -> Result<()> {
    let oracle = MarkovSemigroupOracle::gaussian(1);
    let spec = LaplaceSpec::default();
    rec.section("laplace", |rec| {
        let one = StateFn::constant(1.0);
        let mut worst = 0.0f64;
        let mut table = Table::new("resolvent", &["lambda", "x", "value", "exact", "t_trunc", "tail_bound"]);
        for lambda in [0.5, 1.0, 2.0] {
            for x in [-1.0, 0.0, 2.0] {
                let r = laplace_resolvent(&oracle, lambda, &one, &[x], &spec)?;
                worst = worst.max((r.value - 1.0 / lambda).abs());
                table.push(&[lambda, x, r.value, 1.0 / lambda, r.t_trunc, r.tail_bound]);
            }
        }
        rec.op("laplace_resolvent");
        rec.at_most("max_error_constant", worst, RESOLVENT_TOL);
        rec.headline("resolvent_constant_error", worst);
        rec.table(table);
        Ok(())
    })?;
    rec.section("resolvent_identity", |rec| {
        let mut worst = 0.0f64;
        for f in [CatalogFn::Cos, CatalogFn::GaussianBump] {
            for (l1, l2) in [(0.5, 1.0), (1.0, 2.0)] {
                for x in [0.0, 1.0] {
                    worst = worst.max(resolvent_identity_residual(&oracle, l1, l2, &f.state_fn(), &[x], &spec)?);
                }
            }
        }
        rec.op("resolvent_identity_residual");
        rec.at_most("max_residual", worst, RESOLVENT_IDENTITY_TOL);
        rec.headline("resolvent_identity_residual", worst);
        Ok(())
    })?;
    rec.section("semigroup_law", |rec| {
        let mut worst = 0.0f64;
        for f in [CatalogFn::Cos, CatalogFn::Tanh, CatalogFn::GaussianBump] {
            for (t, s) in [(0.25, 0.5), (0.5, 1.0), (1.0, 1.0)] {
                for x in [-1.0, 0.0, 2.0] {
                    worst = worst.max(semigroup_law_residual(&oracle, t, s, &f.state_fn(), &[x]));
                }
            }
        }
        rec.op("semigroup_law_residual");
        rec.at_most("max_residual", worst, SEMIGROUP_LAW_TOL);
        rec.headline("semigroup_law_residual", worst);
        Ok(())
    })
}

fn isometry(rec: &mut Recorder) -> Result<()> {
    let cfg = rec.cfg.clone();
    let big_t = cfg.horizon;
    let half = 0.5 * big_t;
    let sign = StateFn::scalar("sign", Some(1.0), |x| if x >= 0.0 { 1.0 } else { -1.0 });
    let integrands = [
        ("one", SimpleProcess::constant(1.0, big_t)),
        (
            "late",
            SimpleProcess::new(vec![0.0, half, big_t], vec![Functional::constant(0.0), Functional::constant(1.0)])?,
        ),
        (
            "signed_late",
            SimpleProcess::new(vec![0.0, half, big_t], vec![Functional::constant(0.0), make_eval(&sign, half)])?,
        ),
    ];
    let mut table = Table::new("isometry", &["integrand", "lhs", "lhs_se", "rhs", "relative_difference", "allowed"]);
    let mut reports = Vec::new();
    rec.section("isometry", |rec| {
        let mut worst = 0.0f64;
        for (k, (name, h)) in integrands.iter().enumerate() {
            let r = ito_isometry_check(h, &wiener(&cfg, 9 + k as u64), big_t, cfg.n_samples)?;
            rec.at_most(&format!("{name}_relative_difference"), r.relative_difference, r.allowed);
            worst = worst.max(r.relative_difference);
            table.push(&[k as f64, r.lhs.mean, r.lhs.std_error, r.rhs.mean, r.relative_difference, r.allowed]);
            reports.push(r);
        }
        rec.op("ito_isometry_check");
        rec.headline("max_relative_difference", worst);
        rec.report(&reports)
    })?;
    rec.table(table);
    Ok(())
}
