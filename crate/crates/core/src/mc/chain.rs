//! Markov chains for the Ising Gibbs measure on a finite volume: Metropolis sweeps and
//! single-cluster updates with a ghost spin for the field and the boundary.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::contours::{Boundary, Spin, SpinConfig};
use crate::error::{Error, Result};
use crate::field::{CouplingSpec, FieldSpec};
use crate::geometry::{check_dimension, Region, Site};
use crate::mc::stats::Estimate;
use crate::scalar::Real;

/// Identifier of the generator recorded alongside results.
pub const RNG_NAME: &str = "xoshiro256++ (seed_from_u64, jump per stream)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Metropolis,
    Wolff,
    /// One cluster update followed by one Metropolis sweep.
    Mixed,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Metropolis => "metropolis",
            Algorithm::Wolff => "wolff",
            Algorithm::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metropolis" => Ok(Algorithm::Metropolis),
            "wolff" => Ok(Algorithm::Wolff),
            "mixed" => Ok(Algorithm::Mixed),
            other => Err(Error::InvalidParameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Generator for stream `stream` of `seed`: seeded, then jumped `stream` times.
pub fn rng_stream(seed: u64, stream: u64) -> Xoshiro256PlusPlus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for _ in 0..stream {
        rng.jump();
    }
    rng
}

/// `Λ_L`: the cube of side `2L + 1` centred at the origin.
pub fn cube<const D: usize>(l: u32) -> Region<D> {
    Region::cube(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig<const D: usize, T> {
    pub region: Region<D>,
    pub boundary: Boundary<D>,
    pub coupling: CouplingSpec<T>,
    pub field: FieldSpec<T>,
    /// Total steps, burn-in included.
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    /// Independent stream index within `seed`.
    pub stream: u64,
    pub algorithm: Algorithm,
    /// Starting spin everywhere; defaults to the boundary spin (plus for mixed boundaries).
    pub initial: Option<Spin>,
}

impl<const D: usize, T: Real> ChainConfig<D, T> {
    /// A chain on `Λ_L` with a uniform boundary and burn-in `10 L` steps.
    pub fn cube(l: u32, boundary: Spin, coupling: CouplingSpec<T>, field: FieldSpec<T>, sweeps: u64, seed: u64) -> Self {
        Self {
            region: cube(l),
            boundary: Boundary::uniform(boundary),
            coupling,
            field,
            sweeps,
            burn_in: (10 * l as u64).min(sweeps.saturating_sub(1)),
            thin: 1,
            seed,
            stream: 0,
            algorithm: Algorithm::Mixed,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dimension::<D>()?;
        if self.region.is_empty() {
            return Err(Error::InvalidParameter("region must be nonempty".into()));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::InvalidParameter("sweeps must exceed burn_in".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be >= 1".into()));
        }
        self.boundary.validate_for(&self.region)
    }

    pub fn n_samples(&self) -> u64 {
        (self.sweeps - self.burn_in).div_ceil(self.thin)
    }
}

const NONE: u32 = u32::MAX;

/// A running chain. Sampling is in `f64` whatever scalar the configuration used.
#[derive(Debug, Clone)]
pub struct Chain<const D: usize> {
    sites: Vec<Site<D>>,
    neighbors: Vec<u32>,
    /// Field plus boundary coupling on each site.
    external: Vec<f64>,
    /// Probability that no fixed bond (ghost or boundary) is activated at a site, for
    /// each spin value (index 0: minus, 1: plus).
    free_of_fixed: Vec<[f64; 2]>,
    j: f64,
    beta: f64,
    p_bond: f64,
    origin: Option<usize>,
    spins: Vec<i8>,
    rng: Xoshiro256PlusPlus,
    algorithm: Algorithm,
    stack: Vec<u32>,
    mark: Vec<u32>,
    stamp: u32,
    stats: UpdateStats,
}

/// Counters of proposals and outcomes since the chain was built.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub metropolis_proposals: u64,
    pub metropolis_accepted: u64,
    pub cluster_updates: u64,
    pub clusters_flipped: u64,
    /// Sum of flipped cluster sizes.
    pub flipped_sites: u64,
}

impl<const D: usize> Chain<D> {
    pub fn new<T: Real>(cfg: &ChainConfig<D, T>) -> Result<Self> {
        cfg.validate()?;
        let initial = cfg.initial.or(cfg.boundary.uniform_spin()).unwrap_or(Spin::Up);
        let mut chain = Self::build(
            &cfg.region,
            &cfg.boundary,
            &cfg.coupling,
            &cfg.field,
            rng_stream(cfg.seed, cfg.stream),
            cfg.algorithm,
        );
        chain.spins.fill(initial.value());
        Ok(chain)
    }

    /// A chain started from `state`.
    pub fn from_state<T: Real>(
        state: &SpinConfig<D>,
        c: &CouplingSpec<T>,
        f: &FieldSpec<T>,
        rng: Xoshiro256PlusPlus,
        algorithm: Algorithm,
    ) -> Self {
        let mut chain = Self::build(state.region(), state.boundary(), c, f, rng, algorithm);
        chain.spins = state.values();
        chain
    }

    fn build<T: Real>(
        region: &Region<D>,
        boundary: &Boundary<D>,
        c: &CouplingSpec<T>,
        f: &FieldSpec<T>,
        rng: Xoshiro256PlusPlus,
        algorithm: Algorithm,
    ) -> Self {
        let sites: Vec<Site<D>> = region.iter().copied().collect();
        let index: BTreeMap<Site<D>, usize> = sites.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let j = c.j().to_f64_lossy();
        let beta = c.beta().to_f64_lossy();
        let mut neighbors = vec![NONE; sites.len() * 2 * D];
        let mut external = vec![0.0; sites.len()];
        let mut free_of_fixed = vec![[1.0; 2]; sites.len()];
        for (i, x) in sites.iter().enumerate() {
            let h = f.at(x).to_f64_lossy();
            let (mut plus, mut minus) = (0u32, 0u32);
            for (k, y) in x.neighbors().enumerate() {
                match index.get(&y) {
                    Some(&n) => neighbors[i * 2 * D + k] = n as u32,
                    None => match boundary.spin_at(&y).expect("validated boundary") {
                        Spin::Up => plus += 1,
                        Spin::Down => minus += 1,
                    },
                }
            }
            external[i] = h + j * (plus as f64 - minus as f64);
            free_of_fixed[i] = [(-2.0 * beta * j * minus as f64).exp(), (-2.0 * beta * (j * plus as f64 + h)).exp()];
        }
        let n = sites.len();
        Self {
            origin: index.get(&Site::origin()).copied(),
            sites,
            neighbors,
            external,
            free_of_fixed,
            j,
            beta,
            p_bond: 1.0 - (-2.0 * beta * j).exp(),
            spins: vec![1; n],
            rng,
            algorithm,
            stack: Vec::new(),
            mark: vec![0; n],
            stamp: 0,
            stats: UpdateStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn sites(&self) -> &[Site<D>] {
        &self.sites
    }

    /// Spins in region order.
    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn set_spins(&mut self, spins: &[i8]) {
        self.spins.copy_from_slice(spins);
    }

    pub fn stats(&self) -> UpdateStats {
        self.stats
    }

    pub fn origin_spin(&self) -> Option<i8> {
        self.origin.map(|o| self.spins[o])
    }

    /// `E[σ(0) | σ off the origin] = tanh(β(J Σ σ_nb + w-terms + h(0)))`, an
    /// estimator of `E[σ(0)]` with lower variance than `σ(0)` itself.
    pub fn origin_conditional_mean(&self) -> Option<f64> {
        self.origin.map(|o| (self.beta * self.local_field(o)).tanh())
    }

    pub fn magnetization(&self) -> f64 {
        self.spins.iter().map(|&s| s as f64).sum::<f64>() / self.spins.len() as f64
    }

    #[inline]
    fn local_field(&self, i: usize) -> f64 {
        let mut sum = 0i32;
        for &n in &self.neighbors[i * 2 * D..(i + 1) * 2 * D] {
            if n != NONE {
                sum += self.spins[n as usize] as i32;
            }
        }
        self.j * sum as f64 + self.external[i]
    }

    /// One pass over all sites in region order, each proposing a single flip accepted
    /// with probability `min(1, e^{-βΔH})`.
    pub fn metropolis_sweep(&mut self) {
        for i in 0..self.spins.len() {
            let delta = 2.0 * self.spins[i] as f64 * self.local_field(i);
            self.stats.metropolis_proposals += 1;
            if delta <= 0.0 || self.rng.random::<f64>() < (-self.beta * delta).exp() {
                self.spins[i] = -self.spins[i];
                self.stats.metropolis_accepted += 1;
            }
        }
    }

    /// One single-cluster update. Aligned neighbours join with probability
    /// `1 - e^{-2βJ}`; a site aligned with the ghost (`+1`, strength `h(x)`) or with a
    /// boundary spin activates that fixed bond with probability `1 - e^{-2βh(x)}` or
    /// `1 - e^{-2βJ}`, and a cluster that activates any fixed bond is left unflipped.
    /// Returns the number of flipped sites.
    pub fn wolff_update(&mut self) -> usize {
        self.stats.cluster_updates += 1;
        let n = self.spins.len();
        let seed = self.rng.random_range(0..n);
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.fill(0);
            self.stamp = 1;
        }
        let stamp = self.stamp;
        let s = self.spins[seed];
        let side = usize::from(s > 0);
        self.stack.clear();
        self.stack.push(seed as u32);
        self.mark[seed] = stamp;
        let mut size = 0;
        let mut head = 0;
        while head < self.stack.len() {
            let i = self.stack[head] as usize;
            head += 1;
            size += 1;
            if self.rng.random::<f64>() >= self.free_of_fixed[i][side] {
                return 0;
            }
            for k in 0..2 * D {
                let nb = self.neighbors[i * 2 * D + k];
                if nb == NONE {
                    continue;
                }
                let nb = nb as usize;
                if self.mark[nb] != stamp && self.spins[nb] == s && self.rng.random::<f64>() < self.p_bond {
                    self.mark[nb] = stamp;
                    self.stack.push(nb as u32);
                }
            }
        }
        for &i in &self.stack {
            self.spins[i as usize] = -s;
        }
        self.stats.clusters_flipped += 1;
        self.stats.flipped_sites += size as u64;
        size
    }

    /// One step of the configured algorithm.
    pub fn step(&mut self) {
        match self.algorithm {
            Algorithm::Metropolis => self.metropolis_sweep(),
            Algorithm::Wolff => {
                self.wolff_update();
            }
            Algorithm::Mixed => {
                self.wolff_update();
                self.metropolis_sweep();
            }
        }
    }

    pub fn to_config(&self, region: &Region<D>, boundary: &Boundary<D>) -> Result<SpinConfig<D>> {
        SpinConfig::from_values(region.clone(), boundary.clone(), &self.spins)
    }
}

/// One Metropolis sweep applied to `state`.
pub fn metropolis_sweep<const D: usize, T: Real>(
    state: &SpinConfig<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    rng: &mut Xoshiro256PlusPlus,
) -> SpinConfig<D> {
    let mut chain = Chain::from_state(state, c, f, rng.clone(), Algorithm::Metropolis);
    chain.metropolis_sweep();
    *rng = chain.rng.clone();
    chain.to_config(state.region(), state.boundary()).expect("same volume")
}

/// One ghost-spin cluster update applied to `state`.
pub fn wolff_update<const D: usize, T: Real>(
    state: &SpinConfig<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    rng: &mut Xoshiro256PlusPlus,
) -> SpinConfig<D> {
    let mut chain = Chain::from_state(state, c, f, rng.clone(), Algorithm::Wolff);
    chain.wolff_update();
    *rng = chain.rng.clone();
    chain.to_config(state.region(), state.boundary()).expect("same volume")
}

/// Estimates from one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    /// `E[σ(0)]`, when the origin is in the volume, estimated through the conditional
    /// mean of `σ(0)` given its neighbours.
    pub sigma_origin: Option<Estimate>,
    pub magnetization: Estimate,
    pub stats: UpdateStats,
}

/// Runs the chain and calls `observe` on every retained sample.
pub fn run_chain_with<const D: usize, T: Real>(
    cfg: &ChainConfig<D, T>,
    mut observe: impl FnMut(&Chain<D>),
) -> Result<ChainSummary> {
    let mut chain = Chain::new(cfg)?;
    for _ in 0..cfg.burn_in {
        chain.step();
    }
    let n = cfg.n_samples() as usize;
    let mut origin = Vec::with_capacity(if chain.origin.is_some() { n } else { 0 });
    let mut mag = Vec::with_capacity(n);
    for t in 0..cfg.sweeps - cfg.burn_in {
        chain.step();
        if t % cfg.thin == 0 {
            if let Some(m) = chain.origin_conditional_mean() {
                origin.push(m);
            }
            mag.push(chain.magnetization());
            observe(&chain);
        }
    }
    Ok(ChainSummary {
        sigma_origin: (!origin.is_empty()).then(|| Estimate::from_series(&origin)),
        magnetization: Estimate::from_series(&mag),
        stats: chain.stats,
    })
}

pub fn run_chain<const D: usize, T: Real>(cfg: &ChainConfig<D, T>) -> Result<ChainSummary> {
    run_chain_with(cfg, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(region: Region<2>, boundary: Boundary<2>, beta: f64, h: Option<f64>, algorithm: Algorithm) -> ChainConfig<2, f64> {
        ChainConfig {
            region,
            boundary,
            coupling: CouplingSpec::new(1.0, beta).unwrap(),
            field: h.map(|h| FieldSpec::new(h, 1.0).unwrap()).unwrap_or_else(FieldSpec::vanishing),
            sweeps: 20_000,
            burn_in: 1_000,
            thin: 1,
            seed: 11,
            stream: 0,
            algorithm,
            initial: None,
        }
    }

    #[test]
    fn infinite_temperature_accepts_everything() {
        let c = cfg(Region::single(Site::origin()), Boundary::Plus, 0.0, Some(1.0), Algorithm::Metropolis);
        let mut chain = Chain::new(&c).unwrap();
        let mut plus = 0u32;
        let n = 10_000;
        for _ in 0..n {
            chain.metropolis_sweep();
            plus += u32::from(chain.spins()[0] > 0);
        }
        assert_eq!(chain.stats().metropolis_accepted, n as u64);
        // Every proposal is accepted, so the spin alternates deterministically.
        assert_eq!(plus, n / 2);
    }

    #[test]
    fn infinite_temperature_clusters_are_single_sites() {
        let c = cfg(Region::cube(3), Boundary::Plus, 0.0, Some(1.0), Algorithm::Wolff);
        let mut chain = Chain::new(&c).unwrap();
        for _ in 0..1000 {
            assert_eq!(chain.wolff_update(), 1);
        }
    }

    #[test]
    fn low_temperature_reaches_ground_state() {
        let region = Region::<2>::rect([-8, -8], [7, 7]);
        let mut c = cfg(region, Boundary::Plus, 20.0, Some(1.0), Algorithm::Metropolis);
        c.initial = Some(Spin::Down);
        let mut chain = Chain::new(&c).unwrap();
        for _ in 0..100 {
            chain.metropolis_sweep();
        }
        assert!(chain.spins().iter().all(|&s| s == 1));
    }

    #[test]
    fn single_site_matches_exact_probability() {
        let beta: f64 = 0.3;
        let exact = (5.0 * beta).tanh();
        for alg in [Algorithm::Metropolis, Algorithm::Wolff, Algorithm::Mixed] {
            let c = cfg(Region::single(Site::origin()), Boundary::Plus, beta, Some(1.0), alg);
            let s = run_chain(&c).unwrap();
            let e = s.sigma_origin.unwrap();
            assert!((e.mean - exact).abs() < 3.0 * e.std_error + 1e-3, "{alg:?} {e:?} {exact}");
        }
    }

    #[test]
    fn strong_field_freezes_the_origin() {
        let c = cfg(Region::<2>::cube(2), Boundary::Plus, 1.0, Some(5.0), Algorithm::Wolff);
        let mut chain = Chain::new(&c).unwrap();
        let mut flips = 0;
        let mut prev = chain.origin_spin().unwrap();
        let n = 20_000;
        for _ in 0..n {
            chain.wolff_update();
            let now = chain.origin_spin().unwrap();
            flips += u32::from(now != prev);
            prev = now;
        }
        assert!((flips as f64) < 0.01 * n as f64, "{flips}");
    }

    #[test]
    fn seeded_runs_are_identical() {
        let c = cfg(Region::cube(3), Boundary::Minus, 0.5, Some(1.0), Algorithm::Mixed);
        let a = run_chain(&c).unwrap();
        let b = run_chain(&c).unwrap();
        assert_eq!(a, b);
        let mut other = c.clone();
        other.stream = 1;
        assert_ne!(run_chain(&other).unwrap(), a);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(Region::cube(1), Boundary::Plus, 0.5, None, Algorithm::Mixed);
        c.burn_in = c.sweeps;
        assert!(c.validate().is_err());
        c.burn_in = 0;
        c.thin = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn state_wrappers_preserve_volume() {
        let region = Region::<2>::cube(1);
        let s = SpinConfig::uniform(region, Spin::Down, Boundary::Plus).unwrap();
        let c = CouplingSpec::new(1.0, 0.0).unwrap();
        let f = FieldSpec::new(1.0, 1.0).unwrap();
        let mut rng = rng_stream(5, 0);
        let next = metropolis_sweep(&s, &c, &f, &mut rng);
        assert!(next.spins().all(|(_, v)| v == Spin::Up));
        let next = wolff_update(&next, &c, &f, &mut rng);
        assert_eq!(next.spins().filter(|(_, v)| *v == Spin::Down).count(), 1);
    }
}
