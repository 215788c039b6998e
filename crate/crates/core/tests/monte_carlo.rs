use isinglab_core::contours::{Boundary, Spin, SpinConfig};
use isinglab_core::exact::{Ensemble, EnsembleConstraint};
use isinglab_core::field::{CouplingSpec, FieldSpec};
use isinglab_core::geometry::delta_out;
use isinglab_core::mc::clusters::{minus_boundary_cluster, restricted_cluster, shell_trace};
use isinglab_core::mc::{rng_stream, run_chain, Algorithm, Chain, ChainConfig};
use isinglab_core::union_find::UnionFind;
use isinglab_core::{Region, Site};
use proptest::prelude::*;

fn chain_cfg(region: Region<2>, boundary: Boundary<2>, beta: f64, f: FieldSpec<f64>, alg: Algorithm, steps: u64, seed: u64) -> ChainConfig<2, f64> {
    ChainConfig {
        region,
        boundary,
        coupling: CouplingSpec::new(1.0, beta).unwrap(),
        field: f,
        sweeps: steps + 2_000,
        burn_in: 2_000,
        thin: 1,
        seed,
        stream: 0,
        algorithm: alg,
        initial: None,
    }
}

#[test]
fn chains_agree_with_enumeration_on_small_regions() {
    let regions = [
        Region::<2>::rect([-1, -1], [1, 1]),
        Region::<2>::rect([-1, 0], [2, 1]),
        Region::<2>::from_iter([[0, 0], [1, 0], [2, 0], [2, 1], [2, 2], [1, 2], [0, 2], [-1, 1]]),
    ];
    let f = FieldSpec::new(0.5, 1.0).unwrap();
    for (r_idx, region) in regions.iter().enumerate() {
        for beta in [0.3, 0.6, 1.0] {
            let c = CouplingSpec::new(1.0, beta).unwrap();
            let exact = Ensemble::new(region.clone(), Boundary::Minus, c, f.clone())
                .with_constraint(EnsembleConstraint::Unrestricted)
                .run()
                .unwrap();
            for alg in [Algorithm::Metropolis, Algorithm::Wolff] {
                let cfg = chain_cfg(region.clone(), Boundary::Minus, beta, f.clone(), alg, 60_000, 100 + r_idx as u64);
                let s = run_chain(&cfg).unwrap();
                let m = exact.expectation("magnetization").unwrap();
                assert!((s.magnetization.mean - m).abs() < 4.0 * s.magnetization.std_error + 1e-9, "{alg:?} β={beta} {s:?} {m}");
                if let (Some(e), Some(x)) = (s.sigma_origin, exact.expectation("sigma_origin")) {
                    assert!((e.mean - x).abs() < 4.0 * e.std_error + 1e-9, "{alg:?} β={beta} {e:?} {x}");
                }
            }
        }
    }
}

#[test]
fn wolff_and_metropolis_agree_without_field() {
    let region = Region::<2>::rect([-4, -4], [3, 3]);
    let f = FieldSpec::vanishing();
    let a = run_chain(&chain_cfg(region.clone(), Boundary::Plus, 0.3, f.clone(), Algorithm::Metropolis, 40_000, 1)).unwrap();
    let b = run_chain(&chain_cfg(region, Boundary::Plus, 0.3, f, Algorithm::Wolff, 200_000, 2)).unwrap();
    let (x, y) = (a.magnetization, b.magnetization);
    let tol = 3.0 * (x.std_error.powi(2) + y.std_error.powi(2)).sqrt();
    assert!((x.mean - y.mean).abs() < tol, "{x:?} {y:?}");
}

#[test]
fn infinite_temperature_marginal_is_uniform() {
    let region = Region::<2>::rect([0, 0], [2, 2]);
    let cfg = chain_cfg(region, Boundary::Plus, 0.0, FieldSpec::new(1.0, 1.0).unwrap(), Algorithm::Wolff, 1, 5);
    let mut chain = Chain::new(&cfg).unwrap();
    let n = 10_000;
    let mut plus = 0.0;
    for _ in 0..n {
        for _ in 0..9 {
            chain.wolff_update();
        }
        plus += f64::from(chain.spins()[4] > 0);
    }
    let expected = n as f64 / 2.0;
    let chi2 = 2.0 * (plus - expected).powi(2) / expected;
    // 99.9% quantile of χ² with one degree of freedom.
    assert!(chi2 < 10.83, "{chi2}");
}

#[test]
fn seeded_trajectories_are_bit_identical() {
    let cfg = chain_cfg(Region::cube(6), Boundary::Minus, 0.6, FieldSpec::new(1.0, 0.5).unwrap(), Algorithm::Mixed, 3_000, 77);
    let mut a = Chain::new(&cfg).unwrap();
    let mut b = Chain::new(&cfg).unwrap();
    for _ in 0..500 {
        a.step();
        b.step();
        assert_eq!(a.spins(), b.spins());
    }
    assert_eq!(run_chain(&cfg).unwrap(), run_chain(&cfg).unwrap());
}

/// `ℭ_L` by union-find over minus bonds plus a virtual shell vertex.
fn cluster_by_union_find(s: &SpinConfig<2>, l: u32) -> Region<2> {
    let sites: Vec<Site<2>> = s.region().iter().copied().collect();
    let shell = sites.len();
    let mut uf = UnionFind::new(sites.len() + 1);
    let idx = |x: &Site<2>| sites.binary_search(x).ok();
    for (i, x) in sites.iter().enumerate() {
        if s.spin(x) != Some(Spin::Down) {
            continue;
        }
        if x.linf_norm() == l {
            uf.union(i, shell);
        }
        for y in x.neighbors() {
            if let Some(j) = idx(&y) {
                if s.spin(&y) == Some(Spin::Down) {
                    uf.union(i, j);
                }
            }
        }
    }
    sites.iter().enumerate().filter(|(i, x)| s.spin(x) == Some(Spin::Down) && uf.same(*i, shell)).map(|(_, x)| *x).collect()
}

fn sampled_configs(l: u32, beta: f64, seed: u64, n: usize) -> Vec<SpinConfig<2>> {
    let cfg = chain_cfg(Region::cube(l), Boundary::Minus, beta, FieldSpec::new(1.0, 0.5).unwrap(), Algorithm::Metropolis, 1, seed);
    let mut chain = Chain::new(&cfg).unwrap();
    let mut out = Vec::new();
    for _ in 0..n {
        for _ in 0..3 {
            chain.step();
        }
        out.push(chain.to_config(&cfg.region, &cfg.boundary).unwrap());
    }
    out
}

#[test]
fn boundary_cluster_properties_on_sampled_configurations() {
    for (l, beta) in [(6, 0.4), (8, 0.6)] {
        for s in sampled_configs(l, beta, 3, 40) {
            let c = minus_boundary_cluster(&s).unwrap();
            assert_eq!(c, cluster_by_union_find(&s, l));
            // Closed under minus paths.
            for x in c.iter() {
                for y in x.neighbors() {
                    if s.spin(&y) == Some(Spin::Down) {
                        assert!(c.contains(&y));
                    }
                }
            }
            let sizes = shell_trace(&c, l).unwrap();
            assert_eq!(sizes[..l as usize].iter().sum::<usize>() + usize::from(c.contains(&Site::origin())), c.len());
            for k in 0..l {
                let m_k: Region<2> = c.iter().filter(|x| x.linf_norm() == k + 1).copied().collect();
                assert_eq!(m_k.len(), sizes[k as usize]);
                let inner = restricted_cluster(&s, k, &m_k);
                let c_in: Region<2> = c.iter().filter(|x| x.linf_norm() <= k).copied().collect();
                assert_eq!(inner, c_in);
                for y in delta_out(&inner).difference(&m_k).iter() {
                    assert_eq!(s.spin(y), Some(Spin::Up), "k={k} y={y}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn streams_from_distinct_indices_differ(seed in any::<u64>(), a in 0u64..8, b in 0u64..8) {
        use rand::Rng;
        let x: u64 = rng_stream(seed, a).random();
        let y: u64 = rng_stream(seed, b).random();
        prop_assert_eq!(x == y, a == b);
    }
}
