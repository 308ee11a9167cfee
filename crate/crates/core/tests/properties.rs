//! Randomized invariants of the model and numerics.

mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use nodecoy::finitesize::{kappa_bounds, CARD_SIGMA};
use nodecoy::measure::{lossy_click_distribution, squash};
use nodecoy::numerics::{beta_quantile, binary_entropy, partial_trace, reg_inc_beta, rel_entropy, RegisterShape};
use nodecoy::protocol::sift_statistics;
use nodecoy::{expected_frequencies, ChannelScenario, ProtocolKind, ProtocolSpec, SourceConfig};

fn density_from_seed(seed: u64, d: usize) -> DMatrix<f64> {
    common::random_density(&mut common::rng(seed), d)
}

proptest! {
    #[test]
    fn partial_trace_preserves_trace(d0 in 1usize..5, d1 in 1usize..5, d2 in 1usize..4, seed in any::<u64>()) {
        let m = density_from_seed(seed, d0 * d1 * d2);
        let shape = RegisterShape::new([("P", d0), ("Q", d1), ("R", d2)]).unwrap();
        for keep in [&["P"][..], &["Q"], &["P", "R"], &["Q", "R"]] {
            let r = partial_trace(&m, &shape, keep).unwrap();
            prop_assert!((r.trace() - 1.0).abs() < 1e-12);
            prop_assert!((&r - r.transpose()).amax() < 1e-12);
        }
    }

    #[test]
    fn relative_entropy_is_nonnegative(seed in any::<u64>(), d in 2usize..6) {
        let rho = density_from_seed(seed, d);
        let sigma = density_from_seed(seed.wrapping_add(1), d);
        prop_assert!(rel_entropy(&rho, &sigma, 1e-14).unwrap() >= -1e-12);
        prop_assert!(rel_entropy(&rho, &rho, 1e-14).unwrap().abs() < 1e-10);
    }

    #[test]
    fn beta_quantile_inverts_incomplete_beta(p in 1e-6f64..0.999_999, a in 0.5f64..500.0, b in 0.5f64..500.0) {
        let x = beta_quantile(p, a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!((reg_inc_beta(x, a, b).unwrap() - p).abs() < 1e-8);
    }

    #[test]
    fn binary_entropy_is_symmetric_and_bounded(q in 0.0f64..=1.0) {
        let v = binary_entropy(q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-15).contains(&v));
        prop_assert!((v - binary_entropy(1.0 - q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn squashing_preserves_probability(n in 0usize..8, eta in 0.0f64..=1.0, angle in -3.2f64..3.2, basis in -3.2f64..3.2) {
        let d = lossy_click_distribution(n, eta, angle, basis);
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        let s = squash(&d);
        prop_assert!(s.iter().all(|&v| v >= 0.0));
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_frequencies_are_consistent(
        k in 0usize..3,
        mu in 1e-4f64..2.0,
        loss in 0.0f64..40.0,
        theta in -0.8f64..0.8,
        vis in 0.5f64..=1.0,
        p_z in 0.05f64..0.95,
    ) {
        let kind = ProtocolKind::ALL[k];
        let proto = ProtocolSpec::new(kind).with_p_z(p_z);
        let src = SourceConfig::new(mu, proto.cutoff, p_z).unwrap();
        let ch = ChannelScenario::new(loss, theta, vis).unwrap();
        let f = expected_frequencies(&src, &ch, &proto).unwrap();
        let w: f64 = f.photon_weights.iter().sum();
        prop_assert!((w - 1.0).abs() < 1e-12);
        for x in 0..4 {
            let row: f64 = f.table[x].iter().sum();
            prop_assert!((row - f.signal_probs[x]).abs() < 1e-12);
            prop_assert!(f.table[x].iter().all(|&v| v >= 0.0));
        }
        let s = sift_statistics(&proto, &f).unwrap();
        prop_assert!(s.p_sift >= 0.0 && s.p_sift <= f.detection_probability() + 1e-15);
        prop_assert!((0.0..=0.5 + 1e-12).contains(&s.error_rate()));
    }

    #[test]
    fn acceptance_intervals_contain_frequency(f in 0.0f64..=1.0, trials in 10.0f64..1e12) {
        let (kl, ku) = kappa_bounds(f, trials, 1e-12 / 3.0, CARD_SIGMA).unwrap();
        prop_assert!(kl >= 0.0 && ku >= 0.0);
        prop_assert!(f - kl >= -1e-15 && f + ku <= 1.0 + 1e-15);
    }
}
