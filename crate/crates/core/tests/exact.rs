use std::collections::BTreeMap;

use isinglab_core::contours::{for_each_hole_free_connected, Boundary, Spin, SpinConfig};
use isinglab_core::exact::{
    constrained_partition_x, hamiltonian, markov_bound_check, partition_function, peierls_ratio_check, theorem32_check,
    Ensemble, EnsembleConstraint,
};
use isinglab_core::field::{peierls_condition, CouplingSpec, FieldSpec};
use isinglab_core::geometry::{connected_subsets_within, delta_out};
use isinglab_core::{Adjacency, Region, Site};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn coupling(beta: f64) -> CouplingSpec<f64> {
    CouplingSpec::new(1.0, beta).unwrap()
}

/// A connected region of up to `max` sites inside the 4x4 box around the origin.
fn arb_region(max: usize) -> impl Strategy<Value = Region<2>> {
    let bx = Region::<2>::rect([-2, -2], [1, 1]);
    let mut all = Vec::new();
    let mut sub = connected_subsets_within(&bx, max, Adjacency::NearestNeighbor);
    while let Some(s) = sub.next_slice() {
        all.push(s.iter().copied().collect::<Region<2>>());
    }
    prop::sample::select(all)
}

#[test]
fn direct_boltzmann_sum_matches_enumeration() {
    let region = Region::<2>::rect([-1, -1], [1, 1]);
    let f = FieldSpec::new(2.5, 0.5).unwrap();
    let c = coupling(0.8);
    for constraint in [EnsembleConstraint::Unrestricted, EnsembleConstraint::SlimOnly, EnsembleConstraint::HasFat] {
        let ens = Ensemble::new(region.clone(), Boundary::Minus, c, f.clone()).with_constraint(constraint);
        let r = ens.run().unwrap();
        let mut z = 0.0;
        let mut count = 0;
        let mut m0 = 0.0;
        for mask in 0u32..1 << region.len() {
            let values: Vec<i8> = (0..region.len()).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            let s = SpinConfig::from_values(region.clone(), Boundary::Minus, &values).unwrap();
            if ens.admits(&s).unwrap() {
                let w = (-0.8 * hamiltonian(&s, &c, &f)).exp();
                z += w;
                count += 1;
                m0 += w * s.spin(&Site::origin()).unwrap().value() as f64;
            }
        }
        assert_eq!(r.config_count, count);
        assert!((r.log_z - z.ln()).abs() < 1e-12);
        assert!((r.expectation("sigma_origin").unwrap() - m0 / z).abs() < 1e-12);
    }
}

#[test]
fn peierls_ratio_on_small_interiors() {
    let bx = Region::<2>::rect([-2, -2], [1, 1]);
    let mut interiors = Vec::new();
    for_each_hole_free_connected(&bx, 4, |s, _| interiors.push(s.iter().copied().collect::<Region<2>>()));
    for beta in [0.5, 2.0] {
        for (h, alpha) in [(0.5, 0.5), (1.0, 2.0)] {
            let c = coupling(beta);
            let f = FieldSpec::new(h, alpha).unwrap();
            for i in &interiors {
                if !peierls_condition(i, &c, &f).unwrap().holds {
                    continue;
                }
                let r = peierls_ratio_check(&bx, i, &c, &f).unwrap();
                assert!(r.holds, "{i:?} {r:?}");
            }
        }
    }
}

#[test]
fn x_constraint_membership_and_ratio() {
    let lambda = Region::<2>::rect([-2, -2], [1, 1]);
    let delta = Region::<2>::rect([-1, -1], [0, 0]);
    let m = Region::single(Site([1, 0]));
    let c = coupling(1.0);
    let f = FieldSpec::new(1.0, 0.5).unwrap();
    let constraint = EnsembleConstraint::XConstraint { delta: delta.clone(), k: Region::new(), m: m.clone() };
    let ens = Ensemble::new(lambda.clone(), Boundary::Plus, c, f.clone()).with_constraint(constraint);
    let member = SpinConfig::from_fn(lambda.clone(), Boundary::Plus, |x| {
        if delta.contains(x) || m.contains(x) { Spin::Down } else { Spin::Up }
    })
    .unwrap();
    assert!(ens.admits(&member).unwrap());
    let mut bad = member.clone();
    bad.set(&Site([-2, 0]), Spin::Down).unwrap();
    assert!(!ens.admits(&bad).unwrap());

    let r = constrained_partition_x(&lambda, &delta, &Region::new(), &m, &Boundary::Plus, &c, &f, None).unwrap();
    assert!(r.result.log_z < r.log_z_reference);
    assert!(r.result.config_count > 0);
}

#[test]
fn x_constraint_validates_geometry() {
    let lambda = Region::<2>::rect([-3, -3], [3, 3]);
    let delta = Region::<2>::rect([-2, -2], [2, 2]);
    let c = coupling(1.0);
    let weak = FieldSpec::new(0.5, 1.0).unwrap();
    let strong = FieldSpec::new(5.0, 0.1).unwrap();
    let k = Region::single(Site::origin());
    let none = Region::new();
    // {0} is fat only when 4 ≤ 2h(0).
    assert!(constrained_partition_x(&lambda, &delta, &k, &none, &Boundary::Plus, &c, &weak, None).is_err());
    let bad_k = Region::single(Site([2, 2]));
    assert!(constrained_partition_x(&lambda, &delta, &bad_k, &none, &Boundary::Plus, &c, &strong, None).is_err());
    let small = Region::<2>::rect([-2, -2], [1, 1]);
    let d2 = Region::<2>::rect([-1, -1], [0, 0]);
    let r = constrained_partition_x(&small, &d2, &none, &none, &Boundary::Plus, &c, &strong, None).unwrap();
    assert!(r.result.config_count > 0);
}

#[test]
fn markov_bound_on_random_laws() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let mut checked = 0;
    while checked < 10_000 {
        let n = rng.random_range(1..6);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let law: Vec<(f64, f64)> = values.iter().zip(&raw).map(|(v, p)| (*v, p / total)).collect();
        let mean: f64 = law.iter().map(|(v, p)| v * p).sum();
        if mean >= 0.0 {
            continue;
        }
        let m_star = rng.random_range(0.0..1.0) * (-mean);
        if m_star <= 0.0 {
            continue;
        }
        assert!(markov_bound_check(&law, m_star).unwrap(), "{law:?} {m_star}");
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slim_and_fat_partition_configuration_space(region in arb_region(9), h in 0.5f64..4.0, alpha in 0.3f64..2.0, beta in 0.1f64..1.5, plus in any::<bool>()) {
        let boundary = if plus { Boundary::Plus } else { Boundary::Minus };
        let c = coupling(beta);
        let f = FieldSpec::new(h, alpha).unwrap();
        let all = partition_function(&region, &boundary, &c, &f, EnsembleConstraint::Unrestricted).unwrap();
        let slim = partition_function(&region, &boundary, &c, &f, EnsembleConstraint::SlimOnly);
        let fat = partition_function(&region, &boundary, &c, &f, EnsembleConstraint::HasFat);
        let mut z = 0.0;
        let mut count = 0;
        for r in [slim, fat].into_iter().flatten() {
            z += r.log_z.exp();
            count += r.config_count;
        }
        prop_assert_eq!(count, all.config_count);
        prop_assert!((z - all.log_z.exp()).abs() <= 1e-12 * z);
    }

    #[test]
    fn flip_symmetry_without_field(region in arb_region(10), beta in 0.1f64..2.0) {
        let c = coupling(beta);
        let f = FieldSpec::vanishing();
        for constraint in [EnsembleConstraint::Unrestricted, EnsembleConstraint::SlimOnly] {
            let probes: Vec<Site<2>> = region.iter().copied().collect();
            let plus = Ensemble::new(region.clone(), Boundary::Plus, c, f.clone()).with_constraint(constraint.clone()).with_probes(probes.clone()).run().unwrap();
            let minus = Ensemble::new(region.clone(), Boundary::Minus, c, f.clone()).with_constraint(constraint).with_probes(probes.clone()).run().unwrap();
            prop_assert!((plus.log_z - minus.log_z).abs() < 1e-12 * plus.log_z.abs().max(1.0));
            for x in &probes {
                prop_assert!((plus.probe(x).unwrap() + minus.probe(x).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plus_dominates_minus(region in arb_region(9), h in 0.0f64..2.0, alpha in 0.3f64..2.0, beta in 0.1f64..1.5) {
        let c = coupling(beta);
        let f = if h > 0.0 { FieldSpec::new(h, alpha).unwrap() } else { FieldSpec::vanishing() };
        let probes: Vec<Site<2>> = region.iter().copied().collect();
        let plus = Ensemble::new(region.clone(), Boundary::Plus, c, f.clone()).with_probes(probes.clone()).run().unwrap();
        let minus = Ensemble::new(region.clone(), Boundary::Minus, c, f).with_probes(probes.clone()).run().unwrap();
        for x in &probes {
            prop_assert!(plus.probe(x).unwrap() >= minus.probe(x).unwrap() - 1e-12);
        }
    }

    #[test]
    fn slim_log_ratio_is_nonpositive(region in arb_region(9), h in 0.0f64..2.0, alpha in 0.3f64..2.0, beta in 0.1f64..1.5) {
        let c = coupling(beta);
        let f = if h > 0.0 { FieldSpec::new(h, alpha).unwrap() } else { FieldSpec::vanishing() };
        let t = theorem32_check(&region, &c, &f).unwrap();
        if t.field_sum == 0.0 {
            prop_assert!(t.log_ratio.abs() < 1e-12);
        } else {
            prop_assert!(t.log_ratio < 0.0);
        }
    }

    #[test]
    fn energy_is_flip_invariant_without_field(mask in 0u32..512, plus in any::<bool>()) {
        let region = Region::<2>::rect([-1, -1], [1, 1]);
        let values: Vec<i8> = (0..9).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
        let b = if plus { Boundary::Plus } else { Boundary::Minus };
        let s = SpinConfig::from_values(region, b, &values).unwrap();
        let c = coupling(1.0);
        let f = FieldSpec::vanishing();
        prop_assert_eq!(hamiltonian(&s, &c, &f), hamiltonian(&s.flipped(), &c, &f));
    }
}

#[test]
fn explicit_boundary_spins_enter_the_energy() {
    let region = Region::<2>::single(Site::origin());
    let map: BTreeMap<_, _> = delta_out(&region).iter().map(|y| (*y, if y.0[0] == 1 { Spin::Down } else { Spin::Up })).collect();
    let s = SpinConfig::uniform(region, Spin::Up, Boundary::Explicit(map)).unwrap();
    // Three aligned and one anti-aligned boundary bond, no field.
    assert_eq!(hamiltonian(&s, &coupling(1.0), &FieldSpec::vanishing()), -2.0);
}
