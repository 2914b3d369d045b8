use landsig_core::classify::{assign_label, mse, ReferenceTemplate};
use landsig_core::signature::{normalize, normalize_sum_one};
use landsig_core::{HourlyCounts, LandUseLabel, TemporalSignature, HOURS};
use proptest::prelude::*;

fn counts() -> impl Strategy<Value = HourlyCounts> {
    prop::array::uniform24(0u64..10_000)
        .prop_filter("needs at least one event", |c| c.iter().any(|&v| v > 0))
        .prop_map(HourlyCounts)
}

fn signature() -> impl Strategy<Value = TemporalSignature> {
    counts().prop_map(|c| normalize(&c).unwrap())
}

fn template_from(sigs: &[TemporalSignature]) -> ReferenceTemplate {
    ReferenceTemplate::from_signatures(
        "prop",
        LandUseLabel::ALL.iter().copied().zip(sigs.iter().copied()),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn normalized_mean_is_one(c in counts()) {
        let sig = normalize(&c).unwrap();
        prop_assert!((sig.mean() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalization_ignores_scale(c in counts(), k in 1u64..1000) {
        let a = normalize(&c).unwrap();
        let b = normalize(&c.scaled(k)).unwrap();
        for h in 0..HOURS {
            prop_assert!((a[h] - b[h]).abs() <= 1e-12 * a[h].max(1.0));
        }
    }

    #[test]
    fn sum_one_is_mean_one_over_24(c in counts()) {
        let mean1 = normalize(&c).unwrap();
        let sum1 = normalize_sum_one(&c).unwrap();
        for h in 0..HOURS {
            prop_assert!((sum1[h] - mean1[h] / HOURS as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_is_a_symmetric_nonnegative_discrepancy(x in signature(), y in signature()) {
        prop_assert_eq!(mse(&x, &y), mse(&y, &x));
        prop_assert!(mse(&x, &y) >= 0.0);
        prop_assert_eq!(mse(&x, &x), 0.0);
    }

    #[test]
    fn common_scale_preserves_label(
        sigs in prop::array::uniform4(signature()),
        probe in signature(),
        c in 0.01f64..100.0,
    ) {
        let base = assign_label(&probe, &template_from(&sigs));
        let scaled: Vec<_> = sigs.iter().map(|s| s.scaled(c)).collect();
        let after = assign_label(&probe.scaled(c), &template_from(&scaled));
        prop_assert_eq!(base.label, after.label);
        for (l, v) in &base.mse_row {
            prop_assert!((after.mse_row[l] - v * c * c).abs() <= 1e-9 * (1.0 + v * c * c));
        }
    }

    #[test]
    fn entry_order_only_matters_for_ties(
        sigs in prop::array::uniform4(signature()),
        probe in signature(),
        rot in 0usize..4,
    ) {
        let t = template_from(&sigs);
        let mut rotated = t.clone();
        rotated.entries.rotate_left(rot);
        let a = assign_label(&probe, &t);
        let b = assign_label(&probe, &rotated);
        if a.margin > 0.0 {
            prop_assert_eq!(a.label, b.label);
        }
    }
}
