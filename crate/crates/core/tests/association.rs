use assoclt::covariance::{
    association_probe, demimartingale_probe, expected_associated, AssociationBattery, PrefixStat,
};
use assoclt::generators::replicate_with;
use assoclt::model::{BaseDist, FamilySpec, MonotoneMap};
use assoclt::Exec;

const REPS: usize = 10_000;
const LEN: usize = 16;

fn families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::iid_normal(),
        FamilySpec::iid(BaseDist::CenteredExponential { rate: 1.0 }),
        FamilySpec::iid(BaseDist::Rademacher),
        FamilySpec::geometric_gaussian(0.7),
        FamilySpec::gaussian_explicit(vec![1.0, 0.5, 0.5, 0.1]),
        FamilySpec::moving_average(vec![1.0, 0.5, 0.25], BaseDist::CenteredExponential { rate: 1.0 }),
        FamilySpec::common_factor(BaseDist::Normal),
        FamilySpec::markov(0.9, 0.8, true),
        FamilySpec::transform(FamilySpec::geometric_gaussian(0.5), MonotoneMap::Tanh { scale: 1.0 }, true),
        FamilySpec::antithetic(BaseDist::Normal),
    ]
}

#[test]
fn probes_separate_associated_families_from_the_negative_control() {
    let battery = AssociationBattery::for_len(LEN);
    let prefixes = PrefixStat::default_battery();
    for (k, fam) in families().into_iter().enumerate() {
        let set = replicate_with(&fam, LEN, REPS, 500 + k as u64, Exec::default()).unwrap();
        let assoc = association_probe(&set, &battery).unwrap();
        let expected = expected_associated(&fam);
        assert_eq!(
            !assoc.violation,
            expected,
            "{}: min cov {} (expected associated: {expected})",
            fam.kind_name(),
            assoc.min_value
        );
        if expected {
            let demi = demimartingale_probe(&set, &prefixes).unwrap();
            assert!(!demi.violation, "{}: demimartingale probe min {}", fam.kind_name(), demi.min_value);
        }
    }
}
