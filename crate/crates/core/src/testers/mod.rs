//! The connectedness testers.
//!
//! [`run_tester`] pads the image, then runs the top-level sampler with
//! either the exhaustive subroutine (nonadaptive variant) or the diamond
//! lattice subroutine (adaptive variant) on the sampled squares.

mod driver;
mod square;
mod stop;

pub use driver::{
    adaptive_expected_bound, check_premise, nonadaptive_query_cap, nonadaptive_query_count, normalize, premise_side, run_tester,
    step_one_samples, test_connectedness, verify_certificate, CertificateError, Decision, LevelQueries,
    NormalizedInstance, QueryBudget, QueryReport, TesterConfig, TesterError, Variant, Verdict, Witness,
};
pub use square::{
    diagonal_square_test, evaluate_square, exhaustive_square_test, BfsRecord, Certificate, CertificateKind,
    DiagonalOptions, SubOutcome, SubVerdict,
};
pub use stop::StopSampler;
