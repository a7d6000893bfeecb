use fairslot::audit::{ordered_vs_audit_all, tv_vs_audit, weak_vs_audit};
use fairslot::feasibility::{bvn_decompose, extend_doubly_stochastic, sample_matching, MatchingDistribution, DEFAULT_TOL};
use fairslot::payments::click_allocation_curve;
use fairslot::{
    generalized, kunit, lambda_of, scale_free_lambda, stability_bound, tv_stability_bound, AuctionInstance, Family,
    MechanismConfig,
};
use proptest::prelude::*;

const FAMILIES: [Family; 2] = [Family::Ipa, Family::Pa];

fn ell() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(4.0), 0.25f64..6.0]
}

/// Effective values spread over six decades, with the occasional exact zero.
fn values(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 9 => (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))], 1..=max_n)
}

fn instance(max_n: usize) -> impl Strategy<Value = AuctionInstance> {
    values(max_n).prop_flat_map(|v| {
        let n = v.len();
        (0..=n.min(4)).prop_flat_map(move |k| {
            let v = v.clone();
            (
                prop::collection::vec(0.1f64..10.0, n),
                prop::collection::vec(0.0f64..=1.0, k),
            )
                .prop_map(move |(alpha, mut beta)| {
                    beta.sort_by(|a, b| b.total_cmp(a));
                    AuctionInstance::new(v.clone(), alpha, beta, k).unwrap()
                })
        })
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kunit_spends_exactly_k(v in values(16), ell in ell(), k_frac in 0.0f64..=1.0) {
        let k = (k_frac * v.len() as f64).floor() as usize;
        for family in FAMILIES {
            let a = kunit(family, &v, k, ell).unwrap().a;
            prop_assert!((a.iter().sum::<f64>() - k as f64).abs() <= 1e-9);
            prop_assert!(a.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn kunit_ignores_a_common_scale(v in values(12), ell in ell(), k_frac in 0.0f64..=1.0, e in -2.0f64..2.0) {
        let k = (k_frac * v.len() as f64).floor() as usize;
        let c = 10f64.powf(e);
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        for family in FAMILIES {
            let a = kunit(family, &v, k, ell).unwrap().a;
            let b = kunit(family, &scaled, k, ell).unwrap().a;
            prop_assert!(close(&a, &b, 1e-9), "{family}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn own_allocation_grows_with_own_value(v in values(12), ell in ell(), k_frac in 0.0f64..=1.0, i_frac in 0.0f64..1.0, up in 1.0f64..50.0) {
        let k = (k_frac * v.len() as f64).floor() as usize;
        let i = (i_frac * v.len() as f64) as usize;
        let mut raised = v.clone();
        raised[i] = if v[i] == 0.0 { up } else { v[i] * up };
        for family in FAMILIES {
            let a = kunit(family, &v, k, ell).unwrap().a;
            let b = kunit(family, &raised, k, ell).unwrap().a;
            prop_assert!(b[i] >= a[i] - 1e-12, "{family}: {} -> {}", a[i], b[i]);
        }
    }

    #[test]
    fn more_units_never_hurt(v in values(12), ell in ell(), k_frac in 0.0f64..1.0) {
        let k = (k_frac * v.len() as f64).floor() as usize;
        for family in FAMILIES {
            let a = kunit(family, &v, k, ell).unwrap().a;
            let b = kunit(family, &v, k + 1, ell).unwrap().a;
            prop_assert!(a.iter().zip(&b).all(|(x, y)| *y >= x - 1e-12), "{family}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn lambda_is_symmetric_and_scale_free(x in values(8), seed in prop::collection::vec(-1.0f64..1.0, 8), e in -3.0f64..3.0) {
        let y: Vec<f64> = x.iter().zip(&seed).map(|(a, s)| a * 10f64.powf(*s)).collect();
        prop_assert_eq!(lambda_of(&x, &y).unwrap(), lambda_of(&y, &x).unwrap());
        let c = 10f64.powf(e);
        let cy: Vec<f64> = y.iter().map(|v| v * c).collect();
        let (l1, l2) = (scale_free_lambda(&x, &y).unwrap(), scale_free_lambda(&x, &cy).unwrap());
        prop_assert!(l1 >= 1.0);
        prop_assert!(l1 == l2 || (l1 - l2).abs() <= 1e-9 * l1, "{} vs {}", l1, l2);
        prop_assert!(l1 <= lambda_of(&x, &y).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn bounds_grow_with_lambda_and_ell(l in 1.0f64..100.0, dl in 0.0f64..10.0, ell in 0.25f64..6.0, de in 0.0f64..2.0) {
        let f = stability_bound(l, ell).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(stability_bound(l + dl, ell).unwrap() >= f);
        prop_assert!(stability_bound(l, ell + de).unwrap() >= f);
        let t = tv_stability_bound(l, ell).unwrap();
        prop_assert!(t <= f + 1e-15);
        prop_assert!(tv_stability_bound(l + dl, ell).unwrap() >= t);
    }

    #[test]
    fn witnesses_replay_to_the_measured_value(a in instance(8), v2 in values(8), ell in ell()) {
        let n = a.n();
        let mut other = v2;
        other.resize(n, 1.0);
        let b = AuctionInstance::new(other, a.alpha().to_vec(), a.beta().to_vec(), a.k()).unwrap();
        for family in FAMILIES {
            let config = MechanismConfig::new(family, ell).unwrap();
            let (m, m2) = (generalized(&a, &config).unwrap(), generalized(&b, &config).unwrap());
            let mut records = vec![weak_vs_audit(&m, &m2, 2.0, ell).unwrap(), ordered_vs_audit_all(&m, &m2, 2.0, ell).unwrap()];
            records.extend(tv_vs_audit(&m, &m2, 2.0, ell).unwrap());
            for r in records {
                let replayed = r.witness.replay(&m, &m2);
                prop_assert!((replayed - r.measured).abs() <= 1e-12, "{:?}: {} vs {}", r.metric, replayed, r.measured);
            }
        }
    }

    #[test]
    fn click_curves_are_monotone_and_compact(inst in instance(7), ell in ell(), i_frac in 0.0f64..1.0) {
        let i = (i_frac * inst.n() as f64) as usize;
        let (n, k) = (inst.n(), inst.k());
        for family in FAMILIES {
            let curve = click_allocation_curve(&inst, i, ell, family).unwrap();
            prop_assert!(curve.piece_count() <= k * n.saturating_sub(1) + 1, "{family}: {} pieces", curve.piece_count());
            let top = 1e3 * inst.values().iter().cloned().fold(1.0, f64::max);
            let mut last = curve.eval(0.0);
            for s in 1..=400 {
                let x = curve.eval(top * (s as f64 / 400.0).powi(3));
                prop_assert!(x >= last - 1e-12, "{family}: not monotone");
                last = x;
            }
        }
    }
}

#[test]
fn sampled_matchings_follow_the_weights() {
    let dist = MatchingDistribution { n: 2, shown: 2, weights: vec![0.6, 0.4], assignments: vec![vec![0, 1], vec![1, 0]] };
    let draws = 100_000;
    let identity = (0..draws).filter(|&s| sample_matching(&dist, s) == [0, 1]).count();
    let freq = identity as f64 / draws as f64;
    assert!((freq - 0.6).abs() <= 0.005, "{freq}");
}

#[test]
fn sampled_slots_match_the_allocation_matrix() {
    let inst = AuctionInstance::new(vec![5.0, 3.0, 2.0, 1.0, 0.5], vec![1.0, 0.8, 1.2, 1.0, 2.0], vec![1.0, 0.5, 0.2], 3).unwrap();
    for family in FAMILIES {
        let m = generalized(&inst, &MechanismConfig::new(family, 1.0).unwrap()).unwrap();
        let dist = bvn_decompose(&extend_doubly_stochastic(&m).unwrap(), DEFAULT_TOL).unwrap();
        let draws = 100_000u64;
        let mut counts = vec![vec![0usize; m.k()]; m.n()];
        for seed in 0..draws {
            let perm = sample_matching(&dist, seed);
            for (i, &c) in perm.iter().enumerate() {
                if c < m.k() {
                    counts[i][c] += 1;
                }
            }
        }
        for (i, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let p = m.get(i, j);
                let sigma = (p * (1.0 - p) / draws as f64).sqrt();
                let freq = c as f64 / draws as f64;
                assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "{family} ({i},{j}): {freq} vs {p}");
            }
        }
    }
}
