//! Acceptance criteria 1-11, one PASS/FAIL line each.
//!
//! Everything runs inside a single test so the criteria execute one after
//! another and their wall-clock budgets are measured without contention.
//! Run with `cargo test -p pathlab-cli --test acceptance -- --nocapture`.

use std::collections::BTreeMap;

use pathlab_cli::{run_experiment, ExperimentConfig, ExperimentResult};

struct Outcome {
    lines: Vec<String>,
    all_pass: bool,
}

impl Outcome {
    fn record(&mut self, id: u32, title: &str, pass: bool, detail: String) {
        let line = format!("criterion {id:>2} [{}] {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
        self.all_pass &= pass;
    }
}

fn run(id: &str, n_samples: Option<usize>) -> ExperimentResult {
    let mut cfg = ExperimentConfig::for_experiment(id);
    if let Some(n) = n_samples {
        cfg.n_samples = n;
    }
    run_experiment(&cfg).unwrap_or_else(|e| panic!("{id} failed to run: {e}"))
}

fn checks_pass(r: &ExperimentResult, sections: &[&str]) -> bool {
    let relevant: Vec<_> = r.checks.iter().filter(|c| sections.contains(&c.section.as_str())).collect();
    !relevant.is_empty() && relevant.iter().all(|c| c.pass)
}

fn seconds(r: &ExperimentResult, sections: &[&str]) -> f64 {
    sections.iter().map(|s| r.section_seconds(s).unwrap_or(f64::INFINITY)).sum()
}

fn failed(r: &ExperimentResult, sections: &[&str]) -> String {
    r.checks
        .iter()
        .filter(|c| !c.pass && sections.contains(&c.section.as_str()))
        .map(|c| format!(" {}/{}={:.3e}", c.section, c.name, c.value))
        .collect()
}

fn h(r: &ExperimentResult, key: &str) -> f64 {
    r.headline[key]
}

#[test]
fn acceptance_criteria() {
    let mut out = Outcome {
        lines: Vec::new(),
        all_pass: true,
    };

    let e1 = run("E1", None);
    let e2 = run("E2", None);
    {
        let s = ["markov_agreement"];
        let t = seconds(&e1, &s);
        out.record(
            1,
            "Gaussian-semigroup agreement",
            checks_pass(&e1, &s) && t <= 30.0,
            format!(
                "max z {:.3} (<= 4), oracle vs e^(-t/2)cos x {:.2e} (<= 1e-8), {t:.1}s (<= 30s){}",
                h(&e1, "markov_max_z"),
                h(&e1, "oracle_closed_form_error"),
                failed(&e1, &s)
            ),
        );
    }
    {
        let t = seconds(&e1, &["final_value_problem"]) + seconds(&e2, &["square_source"]);
        let pass = checks_pass(&e1, &["final_value_problem"]) && checks_pass(&e2, &["square_source"]) && t <= 10.0;
        out.record(
            2,
            "FVP solver vs closed forms",
            pass,
            format!(
                "heat max err {:.2e}, x^2 source max err {:.2e} (<= 1e-6 on 32x41), {t:.1}s (<= 10s)",
                h(&e1, "fvp_max_error"),
                h(&e2, "fvp_square_max_error")
            ),
        );
    }

    let e3 = run("E3", None);
    {
        let s = ["strong_residual"];
        let t = seconds(&e3, &s);
        out.record(
            3,
            "running-max strong residual",
            checks_pass(&e3, &s) && t <= 20.0,
            format!(
                "max |residual| {:.3e} (<= 5e-3), h/2h confirmed, {t:.1}s (<= 20s){}",
                h(&e3, "residual_max"),
                failed(&e3, &s)
            ),
        );
        let s = ["compensated", "uncompensated"];
        let t = seconds(&e3, &s);
        out.record(
            4,
            "running-max martingale",
            checks_pass(&e3, &s) && t <= 180.0,
            format!(
                "compensated max z {:.3} (<= 4), uncompensated z at (0,T) {:.1} (>= 8), {t:.1}s (<= 180s){}",
                h(&e3, "compensated_max_z"),
                h(&e3, "uncompensated_z_at_0_T"),
                failed(&e3, &s)
            ),
        );
    }

    let e4 = run("E4", None);
    {
        let t = e4.wall_clock["total"];
        out.record(
            5,
            "Itô residual panel",
            e4.pass && t <= 30.0,
            format!(
                "heat max |psi| {:.2e}, |psi - 1| for x(t)^2 {:.2e} (<= 1e-4), compensated max z {:.3}, {t:.1}s (<= 30s){}",
                h(&e4, "heat_max_abs_psi"),
                h(&e4, "square_max_abs_psi_minus_one"),
                h(&e4, "square_compensated_max_z"),
                failed(&e4, &["heat_panel", "square_panel", "compensated"])
            ),
        );
    }

    let e7 = run("E7", Some(100_000));
    {
        let t = e7.wall_clock["total"];
        out.record(
            6,
            "operator axioms",
            e7.pass && t <= 180.0,
            format!(
                "8 checks, max z {:.3} (<= 4), n = 1e5, n_inner = 512, {t:.1}s (<= 180s)",
                h(&e7, "max_z")
            ),
        );
    }

    let e8 = run("E8", None);
    {
        let t = e8.wall_clock["total"];
        out.record(
            7,
            "resolvent",
            e8.pass && t <= 10.0,
            format!(
                "|R(l)1 - 1/l| {:.2e} (<= 1e-8), identity {:.2e} (<= 1e-5), semigroup law {:.2e} (<= 1e-6), {t:.2}s (<= 10s)",
                h(&e8, "resolvent_constant_error"),
                h(&e8, "resolvent_identity_residual"),
                h(&e8, "semigroup_law_residual")
            ),
        );
    }

    let e9 = run("E9", Some(100_000));
    {
        let t = e9.wall_clock["total"];
        out.record(
            8,
            "Itô isometry",
            e9.pass && t <= 60.0,
            format!(
                "max relative difference {:.2e} (<= 5%), n = 1e5, {t:.1}s (<= 60s)",
                h(&e9, "max_relative_difference")
            ),
        );
    }

    let e6 = run("E6", None);
    {
        let t = e6.wall_clock["total"];
        out.record(
            9,
            "support counterexample",
            e6.pass && t <= 5.0,
            format!(
                "nonzero values along 500 paths: {}, margin {:.4} (<= -0.1), {t:.3}s (<= 5s)",
                h(&e6, "nonzero_count"),
                h(&e6, "margin")
            ),
        );
    }

    let e5 = run("E5", None);
    {
        let t = e5.wall_clock["total"];
        out.record(
            10,
            "derivative identities",
            e5.pass && t <= 60.0,
            format!(
                "stopping identity ratio {:.2} (<= 1), chain rule err {:.2e} (<= 1e-5), annihilation ratio {:.3} (<= 1), {t:.1}s (<= 60s)",
                h(&e5, "stopping_identity_ratio"),
                h(&e5, "chain_rule_max_error"),
                h(&e5, "annihilation_ratio")
            ),
        );
    }

    // Determinism: every experiment at a light budget twice, plus full-budget
    // reruns of the experiments that are cheap to repeat.
    {
        let mut mismatches = Vec::new();
        for id in ["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9"] {
            let cfg = ExperimentConfig {
                experiment: id.into(),
                dt: 1.0 / 64.0,
                n_samples: 2000,
                n_inner: 16,
                ..Default::default()
            };
            let a = run_experiment(&cfg).unwrap();
            let b = run_experiment(&cfg).unwrap();
            if a.without_timings() != b.without_timings() {
                mismatches.push(format!("{id} (light)"));
            }
        }
        let full: [(&str, &ExperimentResult, Option<usize>); 4] =
            [("E5", &e5, None), ("E6", &e6, None), ("E8", &e8, None), ("E9", &e9, Some(100_000))];
        for (id, first, n) in full {
            let again = run(id, n);
            let bits = |m: &BTreeMap<String, f64>| m.values().map(|v| v.to_bits()).collect::<Vec<_>>();
            if bits(&first.headline) != bits(&again.headline) || first.without_timings() != again.without_timings() {
                mismatches.push(format!("{id} (full)"));
            }
        }
        out.record(
            11,
            "determinism",
            mismatches.is_empty(),
            if mismatches.is_empty() {
                "all 9 experiments rerun bit-identically (light budget); E5, E6, E8, E9 at full budget".into()
            } else {
                format!("differences in {mismatches:?}")
            },
        );
    }

    println!("\n{}", out.lines.join("\n"));
    assert!(out.all_pass, "some acceptance criteria failed");
}
