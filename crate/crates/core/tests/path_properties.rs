use pathlab::catalog::CatalogFn;
use pathlab::functional::{make_eval, make_integral, running_max};
use pathlab::{concat_at_zero, Path, TimeGrid};
use proptest::prelude::*;

const DT: f64 = 1.0 / 16.0;

fn grid() -> TimeGrid {
    TimeGrid::spanning(-1.0, 2.0, DT).unwrap()
}

fn scalar_path() -> impl Strategy<Value = Path> {
    prop::collection::vec(-3.0..3.0f64, grid().n_nodes()).prop_map(|v| Path::scalar(grid(), v).unwrap())
}

fn node_time() -> impl Strategy<Value = f64> {
    (0..=16usize).prop_map(|k| k as f64 * DT)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifts_compose(p in scalar_path(), a in node_time(), b in node_time(), s in -2.0..1.0f64) {
        let lhs = p.shift(a).shift(b).eval1(s);
        let rhs = p.shift(a + b).eval1(s);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn stopping_is_idempotent_and_freezes_the_future(p in scalar_path(), t in node_time(), s in -1.0..2.0f64) {
        let once = p.stop_at(t);
        let twice = once.stop_at(t);
        prop_assert_eq!(once.values(), twice.values());
        let expect = if s <= t { p.eval1(s) } else { p.eval1(t) };
        prop_assert!((once.eval1(s) - expect).abs() < 1e-12);
    }

    #[test]
    fn concatenation_keeps_the_past_and_the_increments(p in scalar_path(), q in scalar_path(), s in 0.0..1.0f64) {
        let future = Path::scalar_fn(grid(), |u| q.eval1(u) - q.eval1(0.0));
        let joined = concat_at_zero(&p, &future).unwrap();
        prop_assert!((joined.eval1(-s) - p.eval1(-s)).abs() < 1e-12);
        let inc = joined.eval1(s) - p.eval1(0.0);
        prop_assert!((inc - future.eval1(s)).abs() < 1e-12);
    }

    #[test]
    fn metric_axioms(p in scalar_path(), q in scalar_path(), r in scalar_path()) {
        let d = |a: &Path, b: &Path| a.distance(b, 4).value();
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-15);
        prop_assert!(d(&p, &q) <= 1.0);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
    }

    #[test]
    fn shifted_functionals_read_later_states(p in scalar_path(), t in node_time(), s in 0.0..0.5f64) {
        let f = make_eval(&CatalogFn::Tanh.state_fn(), s);
        prop_assert!((f.shift(t).evaluate(&p) - f.evaluate(&p.shift(t))).abs() < 1e-15);
        prop_assert!((f.shift(t).evaluate(&p) - p.eval1(s + t).tanh()).abs() < 1e-12);
    }

    #[test]
    fn integrals_are_bounded_by_the_running_max(p in scalar_path(), a in 0.0..0.5f64, len in 0.0..1.0f64) {
        let id = CatalogFn::Identity.state_fn();
        let b = a + len;
        let integral = make_integral(&id, a, b).unwrap().evaluate(&p);
        prop_assert!(integral <= running_max(&p, a, b) * len + 1e-12);
    }
}
