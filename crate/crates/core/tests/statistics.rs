use approx::assert_abs_diff_eq;
use pathlab::catalog::CatalogFn;
use pathlab::expectation::ExpectationOperator;
use pathlab::functional::{make_eval, AdaptedProcess};
use pathlab::martingale::{default_pairs, default_panel, test_martingale};
use pathlab::rng::derive_seed;
use pathlab::semigroup::{gaussian_apply, running_max_value};
use pathlab::{Path, TimeGrid};

const DT: f64 = 1.0 / 32.0;

fn heat_cos() -> AdaptedProcess {
    AdaptedProcess::cylinder(1.0, |t, x| (-(1.0 - t) / 2.0).exp() * x[0].cos())
}

// Under the null the z-scores should look roughly standard normal.
#[test]
fn z_scores_of_a_true_martingale_are_roughly_normal() {
    let v = heat_cos();
    let x = Path::constant(TimeGrid::spanning(0.0, 1.0, DT).unwrap(), &[0.3]);
    let reps = 200;
    let mut exceed = 0;
    for rep in 0..reps {
        let op = ExpectationOperator::wiener(1, 1.0, DT, derive_seed(2024, rep));
        let r = test_martingale(&v, &op, &[(0.0, 1.0)], std::slice::from_ref(&x), 2000).unwrap();
        let z = r.deviations[0].estimate / r.deviations[0].std_error;
        if z.abs() > 2.0 {
            exceed += 1;
        }
    }
    let frac = exceed as f64 / reps as f64;
    assert!((0.005..=0.15).contains(&frac), "fraction with |z| > 2 was {frac}");
}

#[test]
fn reruns_with_the_same_seed_are_bit_identical() {
    let v = heat_cos();
    let panel = default_panel(1.0, DT, 5).unwrap();
    let run = |seed| {
        let op = ExpectationOperator::wiener(1, 1.0, DT, seed);
        test_martingale(&v, &op, &default_pairs(1.0), &panel, 4000).unwrap()
    };
    let (a, b, c) = (run(11), run(11), run(12));
    assert_eq!(a, b);
    for (x, y) in a.deviations.iter().zip(&b.deviations) {
        assert_eq!(x.estimate.to_bits(), y.estimate.to_bits());
    }
    assert_ne!(a.deviations, c.deviations);
}

#[test]
fn quadrature_oracles_match_closed_forms() {
    for &(t, x) in &[(0.25, -1.0), (1.0, 0.0), (1.0, 2.0)] {
        let cos = gaussian_apply(t, &CatalogFn::Cos.state_fn(), &[x]);
        assert_abs_diff_eq!(cos, (-t / 2.0).exp() * x.cos(), epsilon = 1e-12);
        // e^{-x^2} under N(x, t): closed form e^{-x^2/(1+2t)} / sqrt(1+2t)
        let bump = gaussian_apply(t, &CatalogFn::GaussianBump.state_fn(), &[x]);
        let exact = (-x * x / (1.0 + 2.0 * t)).exp() / (1.0 + 2.0 * t).sqrt();
        assert_abs_diff_eq!(bump, exact, epsilon = 1e-12);
    }
    // identity: E max_{[0,tau]} (x + B) = x + sqrt(2 tau / pi)
    let id = CatalogFn::Identity.state_fn();
    for &tau in &[0.1, 0.5, 1.0] {
        let exact = 0.7 + (2.0 * tau / std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(running_max_value(&id, tau, 0.7), exact, epsilon = 1e-10);
    }
}

#[test]
fn monte_carlo_agrees_with_the_heat_oracle() {
    let op = ExpectationOperator::wiener(1, 1.0, DT, 99);
    let x = Path::constant(TimeGrid::spanning(0.0, 1.0, DT).unwrap(), &[1.0]);
    let est = op.apply(&make_eval(&CatalogFn::Cos.state_fn(), 0.5), &x, 20_000).unwrap();
    let exact = (-0.25f64).exp() * 1.0f64.cos();
    assert!(est.z_against(exact).abs() <= 4.0, "{est:?} vs {exact}");
}
