//! The experiment registry.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExperimentEntry {
    pub id: &'static str,
    pub name: &'static str,
    pub description: &'static str,
    /// The result being reproduced, in words.
    pub claim: &'static str,
    pub tags: &'static [&'static str],
    /// Library operations the experiment must exercise.
    pub operations: &'static [&'static str],
}

pub const REGISTRY: [ExperimentEntry; 9] = [
    ExperimentEntry {
        id: "E1",
        name: "heat-final-value",
        description: "Gaussian semigroup vs Monte Carlo, mild final-value solution, heat martingale",
        claim: "u(t) = S(T - t) f solves the final value problem and u(t, B_t) is a martingale",
        tags: &["semigroup", "fvp", "martingale"],
        operations: &[
            "markov_restrict",
            "gaussian_apply",
            "solve_fvp_mild",
            "test_martingale",
            "test_shifted_fvp_equivalence",
        ],
    },
    ExperimentEntry {
        id: "E2",
        name: "integral-mean",
        description: "mild solutions with a source term and the compensated integral-mean process",
        claim: "u(t) = ∫_t^T S(r - t) f dr solves the inhomogeneous final value problem",
        tags: &["fvp", "martingale"],
        operations: &["solve_fvp_mild", "test_compensated", "test_shifted_fvp_equivalence"],
    },
    ExperimentEntry {
        id: "E3",
        name: "running-max",
        description: "strong residual and compensated martingale test for the running maximum",
        claim: "E[f(max B) | F_t] minus the integral of f'(B_s)/sqrt(2 pi (T - s)) is a martingale",
        tags: &["fvp", "martingale", "residual"],
        operations: &["strong_residual", "test_compensated", "test_martingale"],
    },
    ExperimentEntry {
        id: "E4",
        name: "ito-residual",
        description: "functional Itô residual on smooth heat solutions and on x(t)^2",
        claim: "the Dupire residual vanishes exactly on martingales of the diffusion",
        tags: &["derivatives", "martingale"],
        operations: &["ito_residual", "test_compensated"],
    },
    ExperimentEntry {
        id: "E5",
        name: "deterministic-evolution",
        description: "evolution-map axioms, stopping-operator derivative, chain rule, annihilation",
        claim: "the stopping operator's derivative is the horizontal derivative; flows obey the chain rule",
        tags: &["derivatives", "evolution"],
        operations: &["evolution_map_axioms", "e_derivative", "dupire_horizontal"],
    },
    ExperimentEntry {
        id: "E6",
        name: "support-counterexample",
        description: "zero-noise arctan flow: a pathwise martingale that is not an expectation martingale",
        claim: "without full support, martingales along every path need not be operator martingales",
        tags: &["martingale", "support"],
        operations: &["support_counterexample"],
    },
    ExperimentEntry {
        id: "E7",
        name: "operator-axioms",
        description: "projection, homogeneity, tower and taking-out-known for Wiener and Itô operators",
        claim: "conditional expectation operators satisfy the tower and pull-out rules",
        tags: &["operator"],
        operations: &[
            "check_projection",
            "check_homogeneity",
            "check_tower",
            "check_taking_out_known",
        ],
    },
    ExperimentEntry {
        id: "E8",
        name: "resolvent",
        description: "Laplace-transform resolvent, resolvent identity and semigroup law",
        claim: "R(l) - R(m) = (m - l) R(l) R(m) and S(t + s) = S(t) S(s)",
        tags: &["semigroup"],
        operations: &["laplace_resolvent", "resolvent_identity_residual", "semigroup_law_residual"],
    },
    ExperimentEntry {
        id: "E9",
        name: "ito-isometry",
        description: "both sides of the Itô isometry for three simple integrands",
        claim: "E[(H · M)(T)^2] = E ∫ H^2 d<M>",
        tags: &["martingale", "isometry"],
        operations: &["ito_isometry_check"],
    },
];

pub fn find(id: &str) -> Option<&'static ExperimentEntry> {
    REGISTRY
        .iter()
        .find(|e| e.id.eq_ignore_ascii_case(id) || e.name == id)
}

pub fn list(tag: Option<&str>) -> Vec<&'static ExperimentEntry> {
    REGISTRY
        .iter()
        .filter(|e| tag.map_or(true, |t| e.tags.contains(&t)))
        .collect()
}

/// Plain-text listing, one row per experiment.
pub fn render_table(entries: &[&ExperimentEntry]) -> String {
    let mut out = format!("{:<4} {:<24} {}\n", "id", "name", "description");
    for e in entries {
        out.push_str(&format!("{:<4} {:<24} {}\n", e.id, e.name, e.description));
        out.push_str(&format!("{:<4} {:<24} reproduces: {}\n", "", "", e.claim));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_id_or_name() {
        assert_eq!(find("e3").unwrap().name, "running-max");
        assert_eq!(find("resolvent").unwrap().id, "E8");
        assert!(find("E10").is_none());
    }

    #[test]
    fn martingale_tag() {
        let ids: Vec<_> = list(Some("martingale")).iter().map(|e| e.id).collect();
        for id in ["E1", "E2", "E3", "E6", "E9"] {
            assert!(ids.contains(&id), "{ids:?}");
        }
        assert_eq!(list(None).len(), 9);
    }
}
