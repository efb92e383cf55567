//! Orthogonal-transition realizations of contractive networks: the exact
//! `2n`-state embedding, sampling-based equivalence checks, parameter
//! counts, and witnesses for the converse directions.

mod converse;
mod embed;
mod verify;

pub use converse::{
    converse_relu_witness, default_x_grid, one_state_urnn_gap, one_state_urnn_search, reference_g, sample_scalar_unitary_sigmoid,
    sigmoid_mismatch_witness, GapReport, GapSearch, MismatchReport, ScalarCandidate,
};
pub use embed::{params_digest, unitary_embedding, EmbeddingCertificate, EmbeddingRecord};
pub use verify::{
    ball_sequence, edge_probe, embedding_invariants, output_deviation, verify_equivalence, EquivalenceReport,
    HiddenBlockReport, EDGE_PROBES,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofKind {
    /// General network with `n` states.
    Rnn,
    /// Orthogonal-transition network with `2n` states.
    UrnnDouble,
}

/// Free parameter counts: `n² + (p+m)n` for a general network and
/// `n(2n−1) + 2n(p+m)` for the `2n`-state orthogonal one (an orthogonal
/// `2n × 2n` matrix has `n(2n−1)` degrees of freedom).
pub fn dof_count(n: u64, m: u64, p: u64, kind: DofKind) -> u64 {
    match kind {
        DofKind::Rnn => n * n + (p + m) * n,
        DofKind::UrnnDouble => n * (2 * n - 1) + 2 * n * (p + m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dof_examples() {
        assert_eq!(dof_count(4, 2, 2, DofKind::Rnn), 32);
        assert_eq!(dof_count(4, 2, 2, DofKind::UrnnDouble), 60);
        assert_eq!(dof_count(1, 1, 1, DofKind::Rnn), 3);
        assert_eq!(dof_count(1, 1, 1, DofKind::UrnnDouble), 5);
    }

    proptest! {
        #[test]
        fn doubled_orthogonal_has_fewer_than_twice(n in 1u64..500, m in 0u64..100, p in 0u64..100) {
            prop_assert!(dof_count(n, m, p, DofKind::UrnnDouble) < 2 * dof_count(n, m, p, DofKind::Rnn));
        }
    }
}
