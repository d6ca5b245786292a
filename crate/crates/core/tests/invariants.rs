use assoclt::blocking::{
    block_stats, cross_block_mass, eval_feller_max, eval_ha, eval_hab, eval_hb, BlockSums, Verdict,
};
use assoclt::cf::ecf;
use assoclt::covariance::{analytic_profile, hoeffding_cov, DiscreteBivariate};
use assoclt::generators::{derive_seed, map_replicates, replicate_with};
use assoclt::harness::ks_distance;
use assoclt::model::{
    make_block_scheme, parse_family, BaseDist, BlockRule, BlockScheme, ExperimentConfig, FamilySpec,
};
use assoclt::Exec;
use proptest::prelude::*;

fn scheme(n: u64, ell: u64) -> BlockScheme {
    make_block_scheme(n, &BlockRule::Fixed { ell }).unwrap()
}

fn analytic_family() -> impl Strategy<Value = FamilySpec> {
    prop_oneof![
        Just(FamilySpec::iid_normal()),
        (0.0..0.95f64).prop_map(FamilySpec::geometric_gaussian),
        prop::collection::vec(0.0..2.0f64, 1..5).prop_map(|w| {
            let mut w = w;
            w[0] += 0.5;
            FamilySpec::moving_average(w, BaseDist::Normal)
        }),
        (0.5..0.99f64, 0.5..0.99f64).prop_map(|(a, b)| FamilySpec::markov(a, b, true)),
    ]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn iid_block_ratios(n in 2u64..3000, ell_frac in 0.01..1.0f64) {
        let ell = ((n as f64 * ell_frac) as u64).clamp(1, n);
        let sc = scheme(n, ell);
        let st = block_stats(&analytic_profile(&FamilySpec::iid_normal(), n as usize).unwrap(), &sc).unwrap();
        let nf = n as f64;
        prop_assert!(close(eval_ha(&st, st.s_n_sq).unwrap().value, (sc.m * sc.ell) as f64 / nf, 1e-12));
        prop_assert!(close(eval_hab(&st, st.s_n_sq).unwrap().value + 1.0, sc.r as f64 / nf + 1.0, 1e-12));
        prop_assert_eq!(sc.m * sc.ell + sc.r, n);
        prop_assert!(sc.r < sc.ell);
    }

    #[test]
    fn max_block_variance_ordering(fam in analytic_family(), n in 16u64..2048, alpha in 0.2..0.8f64) {
        let sc = make_block_scheme(n, &BlockRule::Power { alpha }).unwrap();
        let st = block_stats(&analytic_profile(&fam, n as usize).unwrap(), &sc).unwrap();
        let s2 = st.s_n_sq;
        let hb = eval_hb(&st, s2).unwrap().value;
        let feller = eval_feller_max(&st, s2).unwrap().value;
        let ha = eval_ha(&st, s2).unwrap().value;
        prop_assert!(hb >= feller);
        prop_assert!(feller * (1.0 + 1e-12) >= ha / sc.m as f64);
        // association makes every cross-block covariance nonnegative
        let cross = cross_block_mass(&analytic_profile(&fam, n as usize).unwrap(), &sc).unwrap();
        prop_assert!(cross >= -1e-9 * s2);
        prop_assert!(close(st.nu_sq + st.tail_var + cross, s2, 1e-10));
    }

    #[test]
    fn cox_coefficient_is_nonincreasing(fam in analytic_family(), n in 8usize..512) {
        let p = analytic_profile(&fam, n).unwrap();
        let us: Vec<f64> = (1..n).map(|r| p.cox_coefficient(r)).collect();
        for w in us.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(us.iter().all(|&u| u >= -1e-12));
    }

    #[test]
    fn ecf_conjugate_symmetry(xs in prop::collection::vec(-50.0..50.0f64, 1..200), t in 0.0..5.0f64) {
        let p = ecf(&xs, &[t, -t]).unwrap();
        prop_assert!((p[0].re - p[1].re).abs() < 1e-12);
        prop_assert!((p[0].im + p[1].im).abs() < 1e-12);
        prop_assert!(p[0].value().norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn ks_is_permutation_invariant(xs in prop::collection::vec(-5.0..5.0f64, 1..300), seed in any::<u64>()) {
        let d = ks_distance(&xs).unwrap();
        let mut ys = xs.clone();
        // deterministic shuffle
        let k = ys.len();
        for i in (1..k).rev() {
            let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 33) as usize % (i + 1);
            ys.swap(i, j);
        }
        prop_assert_eq!(d, ks_distance(&ys).unwrap());
        prop_assert!(d >= 0.5 / k as f64 - 1e-15 && d <= 1.0);
    }

    #[test]
    fn hoeffding_matches_direct(atoms in prop::collection::vec((0u8..4, 0u8..4, 0.01..1.0f64), 1..16)) {
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        let law = DiscreteBivariate::new(atoms.iter().map(|&(x, y, w)| (x as f64 * 1.5 - 1.0, y as f64, w / total)).collect());
        let (mut ex, mut ey, mut exy) = (0.0, 0.0, 0.0);
        for &(x, y, p) in &law.atoms {
            ex += p * x;
            ey += p * y;
            exy += p * x * y;
        }
        prop_assert!((hoeffding_cov(&law, 1e-9).unwrap() - (exy - ex * ey)).abs() < 1e-12);
    }

    #[test]
    fn verdict_algebra(a in 0usize..3, b in 0usize..3) {
        let vs = [Verdict::HoldsEmpirically, Verdict::Inconclusive, Verdict::FailsEmpirically];
        let (x, y) = (vs[a], vs[b]);
        prop_assert_eq!(Verdict::all([x]), x);
        prop_assert_eq!(Verdict::any([x]), x);
        prop_assert_eq!(Verdict::all([x, y]), Verdict::all([y, x]));
        // all takes the worse, any the better, under holds > inconclusive > fails
        prop_assert_eq!(Verdict::all([x, y]), vs[a.max(b)]);
        prop_assert_eq!(Verdict::any([x, y]), vs[a.min(b)]);
    }

    #[test]
    fn shorthand_round_trips_through_json(rho in 0.0..0.99f64, p0 in 0.5..0.99f64, p1 in 0.5..0.99f64) {
        for s in [format!("geo-gauss:rho={rho}"), format!("markov:p0={p0},p1={p1}"), "iid-exp".into()] {
            let f = parse_family(&s).unwrap();
            let back: FamilySpec = serde_json::from_str(&f.canonical_json()).unwrap();
            prop_assert_eq!(back.hash(), f.hash());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parallel_equals_sequential(seed in any::<u64>(), n in 1usize..200, reps in 1usize..50) {
        let fam = FamilySpec::markov(0.8, 0.7, true);
        let a = map_replicates(&fam, n, reps, seed, Exec::Sequential, |_, x| x.to_vec()).unwrap();
        let b = map_replicates(&fam, n, reps, seed, Exec::Parallel, |_, x| x.to_vec()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn replicate_prefix_is_stable(seed in any::<u64>(), reps in 2usize..20) {
        // replicate i depends on (seed, i) only, not on how many were drawn
        let fam = FamilySpec::geometric_gaussian(0.4);
        let many = replicate_with(&fam, 32, reps, seed, Exec::Parallel).unwrap();
        let few = replicate_with(&fam, 32, 1, seed, Exec::Sequential).unwrap();
        prop_assert_eq!(&many.paths[0].values, &few.paths[0].values);
    }

    #[test]
    fn block_sums_add_up(seed in any::<u64>(), n in 4u64..300, ell in 1u64..20) {
        let sc = scheme(n, ell.min(n));
        let fam = FamilySpec::iid(BaseDist::Rademacher);
        let set = replicate_with(&fam, n as usize, 5, seed, Exec::Sequential).unwrap();
        let sums = BlockSums::from_replicates(&set, &sc).unwrap();
        for (row, p) in sums.rows().zip(&set.paths) {
            // Rademacher paths: all sums are small integers, so this is exact
            prop_assert_eq!(row.iter().sum::<f64>(), p.values.iter().sum::<f64>());
            prop_assert_eq!(row.len() as u64, sc.m + 1);
        }
    }
}

#[test]
fn derived_seeds_separate_labels_and_n() {
    let a = derive_seed(1, "block-sums", 256);
    assert_ne!(a, derive_seed(1, "block-sums", 512));
    assert_ne!(a, derive_seed(1, "covariance-rows", 256));
    assert_ne!(a, derive_seed(2, "block-sums", 256));
    assert_eq!(a, derive_seed(1, "block-sums", 256));
}

#[test]
fn config_json_round_trip() {
    let mut c = ExperimentConfig::new(FamilySpec::geometric_gaussian(0.5), ExperimentConfig::pow2_grid(6, 9));
    c.seed = 77;
    c.block_rule = BlockRule::Explicit {
        table: vec![(64, 8), (128, 11), (256, 16), (512, 22)],
    };
    let back = ExperimentConfig::from_value(c.to_value()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
}
