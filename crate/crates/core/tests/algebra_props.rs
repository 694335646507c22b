//! Randomized checks of the log-power algebra and the characteristic function.

mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ring_laws_hold(input in triple()) {
        ring_laws(input)?;
    }

    #[test]
    fn truncation_commutes_with_ring_operations((p, q, _) in triple(), cut in 0..=MAX_ORDER) {
        truncation_commutes((p, q, cut))?;
    }

    #[test]
    fn differentiation_inverts_integration(p in integrable()) {
        round_trip(p)?;
    }

    #[test]
    fn integration_matches_integration_by_parts(input in identity_input()) {
        integration_identity(input)?;
    }

    #[test]
    fn linear_substitution_matches_pointwise_evaluation(input in linear_substitution_input()) {
        linear_substitution(input)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn curved_substitution_error_has_truncation_order(input in curved_substitution_input()) {
        curved_substitution(input)?;
    }

    #[test]
    fn characteristic_derivative_matches_finite_differences(input in characteristic_input()) {
        characteristic_derivative(input)?;
    }
}
