//! Exhaustive enumeration of Ising configurations on small volumes: Hamiltonian,
//! partition functions of restricted and constrained ensembles, and the checks built
//! on them.
//!
//! Configurations of the free sites are visited in Gray-code order inside fixed-size
//! blocks, so each step changes one spin and the energy is updated in `O(degree)`.
//! Boltzmann weights are accumulated relative to a running maximum of `-βH`, and the
//! block partials are merged in block order, so results do not depend on scheduling.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contours::{for_each_hole_free_connected, Boundary, ContourExtractor, Spin, SpinConfig};
use crate::error::{Error, Result};
use crate::field::{field_sum, peierls_condition, CouplingSpec, FieldSpec};
use crate::geometry::{boundary_edge_count, check_dimension, connected_components, delta_in, delta_out, is_hole_free, Adjacency, Region, Site};
use crate::scalar::{CompensatedSum, Real};

pub const DEFAULT_SITE_CAP: usize = 25;
pub const HARD_SITE_CAP: usize = 30;
const BLOCK_BITS: usize = 12;

/// Which configurations an ensemble admits.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleConstraint<const D: usize> {
    Unrestricted,
    /// Every contour is slim.
    SlimOnly,
    /// At least one contour is fat (the complement of `SlimOnly`).
    HasFat,
    /// Sites held at the given spins.
    Pinned(BTreeMap<Site<D>, Spin>),
    /// The set `X_{Λ,Δ,K,M}`: `σ = -1` on `δ_in(Δ)` and on `M`, `σ = +1` on
    /// `δ_out(Δ) \ M`, `σ = -1` on `δ_out(K)`, `σ = +1` on `δ_in(K)`, and every
    /// contour whose bonds lie in `Δ \ K` is slim.
    XConstraint { delta: Region<D>, k: Region<D>, m: Region<D> },
}

impl<const D: usize> EnsembleConstraint<D> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EnsembleConstraint::Unrestricted => "unrestricted",
            EnsembleConstraint::SlimOnly => "slim_only",
            EnsembleConstraint::HasFat => "has_fat",
            EnsembleConstraint::Pinned(_) => "pinned",
            EnsembleConstraint::XConstraint { .. } => "x_constraint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult<T> {
    pub log_z: T,
    /// `magnetization` (per site), `field_magnetization` (`Σhσ/Σh`, when `Σh > 0`),
    /// `sigma_origin` (when the origin is in the volume), and `sigma(x)` for each probe.
    pub expectations: BTreeMap<String, T>,
    pub config_count: u64,
}

impl<T: Real> ExactResult<T> {
    pub fn expectation(&self, name: &str) -> Option<T> {
        self.expectations.get(name).copied()
    }

    pub fn probe<const D: usize>(&self, x: &Site<D>) -> Option<T> {
        self.expectation(&probe_name(x))
    }
}

fn probe_name<const D: usize>(x: &Site<D>) -> String {
    format!("sigma{x}")
}

/// `-J Σ_{<xy> ⊂ Λ} σσ - Σ_Λ hσ - J Σ_{<xy>, x∈Λ, y∉Λ} σ(x) w(y)`.
pub fn hamiltonian<const D: usize, T: Real>(s: &SpinConfig<D>, c: &CouplingSpec<T>, f: &FieldSpec<T>) -> T {
    let mut bulk = CompensatedSum::new();
    let mut field = CompensatedSum::new();
    for (x, sx) in s.spins() {
        let sx = T::of(sx.value() as f64);
        field.add(f.at(x) * sx);
        for y in x.neighbors() {
            match s.spin(&y) {
                Some(sy) if *x < y => bulk.add(sx * T::of(sy.value() as f64)),
                Some(_) => {}
                None => {
                    let w = s.boundary().spin_at(&y).expect("validated boundary");
                    bulk.add(sx * T::of(w.value() as f64));
                }
            }
        }
    }
    -c.j() * bulk.value() - field.value()
}

/// An exactly enumerated Gibbs ensemble on a finite volume.
#[derive(Debug, Clone)]
pub struct Ensemble<const D: usize, T> {
    region: Region<D>,
    boundary: Boundary<D>,
    coupling: CouplingSpec<T>,
    field: FieldSpec<T>,
    constraint: EnsembleConstraint<D>,
    cap: usize,
    probes: Vec<Site<D>>,
}

impl<const D: usize, T: Real> Ensemble<D, T> {
    pub fn new(region: Region<D>, boundary: Boundary<D>, coupling: CouplingSpec<T>, field: FieldSpec<T>) -> Self {
        Self {
            region,
            boundary,
            coupling,
            field,
            constraint: EnsembleConstraint::Unrestricted,
            cap: DEFAULT_SITE_CAP,
            probes: Vec::new(),
        }
    }

    pub fn with_constraint(mut self, constraint: EnsembleConstraint<D>) -> Self {
        self.constraint = constraint;
        self
    }

    /// Raises or lowers the site cap; refuses anything above [`HARD_SITE_CAP`].
    pub fn with_cap(mut self, cap: usize) -> Result<Self> {
        if cap > HARD_SITE_CAP {
            return Err(Error::ResourceLimit { what: "enumeration cap", requested: cap, cap: HARD_SITE_CAP });
        }
        self.cap = cap;
        Ok(self)
    }

    /// Adds `sigma(x)` expectations for the given sites.
    pub fn with_probes(mut self, probes: impl IntoIterator<Item = Site<D>>) -> Self {
        self.probes.extend(probes);
        self
    }

    pub fn region(&self) -> &Region<D> {
        &self.region
    }

    pub fn run(&self) -> Result<ExactResult<T>> {
        check_dimension::<D>()?;
        if self.region.len() > self.cap {
            return Err(Error::ResourceLimit { what: "exact enumeration sites", requested: self.region.len(), cap: self.cap });
        }
        if self.region.is_empty() {
            return Err(Error::InvalidParameter("region must be nonempty".into()));
        }
        self.boundary.validate_for(&self.region)?;
        for p in &self.probes {
            if !self.region.contains(p) {
                return Err(Error::InvalidParameter(format!("probe {p} is outside the region")));
            }
        }
        let plan = Plan::build(self)?;
        plan.enumerate()
    }

    /// Whether the constraint admits `s`, which must live on this volume.
    pub fn admits(&self, s: &SpinConfig<D>) -> Result<bool> {
        if s.region() != &self.region || s.boundary() != &self.boundary {
            return Err(Error::InvalidParameter("configuration does not match the ensemble volume".into()));
        }
        let mut plan = Plan::build(self)?;
        let values = s.values();
        let mut is_free = vec![false; values.len()];
        for &i in &plan.free {
            is_free[i] = true;
        }
        if values.iter().zip(&plan.base).zip(&is_free).any(|((v, b), free)| !free && v != b) {
            return Ok(false);
        }
        Ok(plan.filter.admits(&values, plan.j))
    }
}

/// `Σ e^{-βH}` over the admitted configurations, with the default cap.
pub fn partition_function<const D: usize, T: Real>(
    region: &Region<D>,
    boundary: &Boundary<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    constraint: EnsembleConstraint<D>,
) -> Result<ExactResult<T>> {
    Ensemble::new(region.clone(), boundary.clone(), *c, f.clone()).with_constraint(constraint).run()
}

#[derive(Clone)]
enum Filter<const D: usize, T> {
    None,
    AllSlim(ContourExtractor<D, T>),
    HasFat(ContourExtractor<D, T>),
    SlimWithin(ContourExtractor<D, T>, HashSet<Site<D>>),
}

impl<const D: usize, T: Real> Filter<D, T> {
    fn admits(&mut self, spins: &[i8], j: T) -> bool {
        match self {
            Filter::None => true,
            Filter::AllSlim(ex) => ex.all_slim(spins, j),
            Filter::HasFat(ex) => !ex.all_slim(spins, j),
            Filter::SlimWithin(ex, allowed) => ex
                .scan(spins, |v| {
                    let inside = v.bonds().all(|b| allowed.contains(&b.lo) && allowed.contains(&b.hi));
                    if inside && !v.is_slim(j) {
                        std::ops::ControlFlow::Break(())
                    } else {
                        std::ops::ControlFlow::Continue(())
                    }
                })
                .is_continue(),
        }
    }
}

struct Plan<const D: usize, T> {
    base: Vec<i8>,
    free: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    /// Field plus boundary coupling acting on each site.
    external: Vec<T>,
    h: Vec<T>,
    field_total: T,
    j: T,
    beta: T,
    filter: Filter<D, T>,
    /// Observable site indices: origin (if present) then probes.
    tracked: Vec<usize>,
    names: Vec<String>,
}

#[derive(Clone)]
struct Partial<T> {
    shift: T,
    z: CompensatedSum<T>,
    obs: Vec<T>,
    count: u64,
}

impl<T: Real> Partial<T> {
    fn new(n_obs: usize) -> Self {
        Self { shift: T::neg_infinity(), z: CompensatedSum::new(), obs: vec![T::zero(); n_obs], count: 0 }
    }

    #[inline]
    fn add(&mut self, log_w: T, values: impl Iterator<Item = T>) {
        if log_w > self.shift {
            if self.count > 0 {
                let factor = (self.shift - log_w).exp();
                self.z.scale(factor);
                for o in &mut self.obs {
                    *o *= factor;
                }
            }
            self.shift = log_w;
        }
        let w = (log_w - self.shift).exp();
        self.z.add(w);
        for (o, v) in self.obs.iter_mut().zip(values) {
            *o += w * v;
        }
        self.count += 1;
    }

    fn merge(mut self, other: Partial<T>) -> Partial<T> {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (hi, lo) = if other.shift > self.shift { (other, self) } else { (self, other) };
        self = hi;
        let factor = (lo.shift - self.shift).exp();
        self.z.add(lo.z.value() * factor);
        for (o, v) in self.obs.iter_mut().zip(&lo.obs) {
            *o += *v * factor;
        }
        self.count += lo.count;
        self
    }
}

impl<const D: usize, T: Real> Plan<D, T> {
    fn build(e: &Ensemble<D, T>) -> Result<Self> {
        let sites: Vec<Site<D>> = e.region.iter().copied().collect();
        let index: BTreeMap<Site<D>, usize> = sites.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let j = e.coupling.j();
        let mut neighbors = vec![Vec::new(); sites.len()];
        let mut external = vec![T::zero(); sites.len()];
        let h: Vec<T> = sites.iter().map(|x| e.field.at(x)).collect();
        for (i, x) in sites.iter().enumerate() {
            external[i] = h[i];
            for y in x.neighbors() {
                match index.get(&y) {
                    Some(&k) => neighbors[i].push(k),
                    None => {
                        let w = e.boundary.spin_at(&y).expect("validated boundary");
                        external[i] += j * T::of(w.value() as f64);
                    }
                }
            }
        }

        let mut pins: BTreeMap<Site<D>, Spin> = BTreeMap::new();
        let mut pin = |x: Site<D>, s: Spin| -> Result<()> {
            match pins.insert(x, s) {
                Some(prev) if prev != s => Err(Error::EmptyEnsemble),
                _ => Ok(()),
            }
        };
        let needs_extractor = !matches!(e.constraint, EnsembleConstraint::Unrestricted | EnsembleConstraint::Pinned(_));
        let extractor = if needs_extractor {
            Some(ContourExtractor::new(&e.region, &e.boundary, Some(&e.field))?)
        } else {
            None
        };
        let filter = match &e.constraint {
            EnsembleConstraint::Unrestricted => Filter::None,
            EnsembleConstraint::SlimOnly => Filter::AllSlim(extractor.expect("built")),
            EnsembleConstraint::HasFat => Filter::HasFat(extractor.expect("built")),
            EnsembleConstraint::Pinned(map) => {
                for (x, s) in map {
                    if !e.region.contains(x) {
                        return Err(Error::InvalidParameter(format!("pinned site {x} is outside the region")));
                    }
                    pin(*x, *s)?;
                }
                Filter::None
            }
            EnsembleConstraint::XConstraint { delta, k, m } => {
                validate_x_constraint(&e.region, delta, k, m, &e.coupling, &e.field)?;
                for x in delta_in(delta).iter().chain(m.iter()) {
                    pin(*x, Spin::Down)?;
                }
                for x in delta_out(delta).difference(m).iter() {
                    pin(*x, Spin::Up)?;
                }
                if !k.is_empty() {
                    for x in delta_out(k).iter() {
                        pin(*x, Spin::Down)?;
                    }
                    for x in delta_in(k).iter() {
                        pin(*x, Spin::Up)?;
                    }
                }
                let allowed = delta.difference(k).iter().copied().collect();
                Filter::SlimWithin(extractor.expect("built"), allowed)
            }
        };

        let mut base = vec![1i8; sites.len()];
        let mut free = Vec::new();
        for (i, x) in sites.iter().enumerate() {
            match pins.get(x) {
                Some(s) => base[i] = s.value(),
                None => free.push(i),
            }
        }

        let mut tracked = Vec::new();
        let mut names = vec!["magnetization".to_string()];
        let field_total: T = h.iter().copied().sum();
        if field_total > T::zero() {
            names.push("field_magnetization".into());
        }
        if let Some(&o) = index.get(&Site::origin()) {
            tracked.push(o);
            names.push("sigma_origin".into());
        }
        for p in &e.probes {
            tracked.push(index[p]);
            names.push(probe_name(p));
        }
        Ok(Self {
            base,
            free,
            neighbors,
            external,
            h,
            field_total,
            j,
            beta: e.coupling.beta(),
            filter,
            tracked,
            names,
        })
    }

    fn energy(&self, spins: &[i8]) -> T {
        let mut e = T::zero();
        for (i, &s) in spins.iter().enumerate() {
            let s = T::of(s as f64);
            let mut nb = 0i32;
            for &k in &self.neighbors[i] {
                if k > i {
                    nb += spins[k] as i32;
                }
            }
            e -= s * (self.j * T::of(nb as f64) + self.external[i]);
        }
        e
    }

    fn run_block(&self, block: u64, low_bits: usize, filter: &mut Filter<D, T>) -> Partial<T> {
        let mut spins = self.base.clone();
        for (bit, &i) in self.free[low_bits..].iter().enumerate() {
            if block >> bit & 1 == 1 {
                spins[i] = -1;
            }
        }
        let mut energy = self.energy(&spins);
        let mut mag: i64 = spins.iter().map(|&s| s as i64).sum();
        let mut field_mag: T = spins.iter().zip(&self.h).map(|(&s, &h)| h * T::of(s as f64)).sum();
        let n = T::of_usize(spins.len());
        let has_field = self.field_total > T::zero();
        let mut part = Partial::new(self.names.len());
        let two = T::of(2.0);
        let mut visit = |spins: &[i8], energy: T, mag: i64, field_mag: T, part: &mut Partial<T>| {
            if !filter.admits(spins, self.j) {
                return;
            }
            let head = [T::of(mag as f64) / n, field_mag / self.field_total];
            let head = head.into_iter().take(if has_field { 2 } else { 1 });
            let tail = self.tracked.iter().map(|&i| T::of(spins[i] as f64));
            part.add(-self.beta * energy, head.chain(tail));
        };
        visit(&spins, energy, mag, field_mag, &mut part);
        for g in 1u64..(1u64 << low_bits) {
            let i = self.free[g.trailing_zeros() as usize];
            let old = spins[i];
            let nb: i32 = self.neighbors[i].iter().map(|&k| spins[k] as i32).sum();
            energy += two * T::of(old as f64) * (self.j * T::of(nb as f64) + self.external[i]);
            spins[i] = -old;
            mag -= 2 * old as i64;
            field_mag -= two * T::of(old as f64) * self.h[i];
            visit(&spins, energy, mag, field_mag, &mut part);
        }
        part
    }

    fn enumerate(&self) -> Result<ExactResult<T>> {
        let low_bits = self.free.len().min(BLOCK_BITS);
        let blocks = 1u64 << (self.free.len() - low_bits);
        let partials: Vec<Partial<T>> = (0..blocks)
            .into_par_iter()
            .map_init(|| self.filter.clone(), |filter, b| self.run_block(b, low_bits, filter))
            .collect();
        let total = partials.into_iter().fold(Partial::new(self.names.len()), Partial::merge);
        if total.count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let z = total.z.value();
        let expectations = self.names.iter().cloned().zip(total.obs.iter().map(|o| *o / z)).collect();
        Ok(ExactResult { log_z: total.shift + z.ln(), expectations, config_count: total.count })
    }
}

fn validate_x_constraint<const D: usize, T: Real>(
    lambda: &Region<D>,
    delta: &Region<D>,
    k: &Region<D>,
    m: &Region<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
) -> Result<()> {
    let fail = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
    if !delta.is_subset(lambda) {
        return fail("Delta must be a subset of Lambda");
    }
    if !k.is_subset(delta) {
        return fail("K must be a subset of Delta");
    }
    let outer = delta_out(delta);
    if !outer.is_subset(lambda) {
        return fail("delta_out(Delta) must lie inside Lambda");
    }
    if !m.is_subset(&outer) {
        return fail("M must be a subset of delta_out(Delta)");
    }
    if !k.is_empty() && !delta_out(k).is_subset(delta) {
        return fail("delta_out(K) must be a subset of Delta");
    }
    for component in connected_components(k, Adjacency::NearestNeighbor) {
        if !is_hole_free(&component) {
            return fail("every component of K must be hole free");
        }
        let lhs = c.j() * T::of_usize(boundary_edge_count(&component));
        if lhs > T::of(2.0) * field_sum(&component, f) {
            return fail("every component of K must be fat");
        }
    }
    Ok(())
}

/// Exact ratio of Peierls-constrained partition functions on `I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeierlsRatio<T> {
    pub ratio: T,
    pub log_ratio: T,
    /// `e^{-βJ|∂I|}`.
    pub bound: T,
    pub holds: bool,
}

/// Absolute slack allowed at the equality edge of the Peierls ratio.
pub const PEIERLS_TOLERANCE: f64 = 1e-12;

/// `Z^-_I(σ = +1 on δ_in I) / Z^-_I(σ = -1 on δ_in I)` against `e^{-βJ|∂I|}`.
pub fn peierls_ratio_check<const D: usize, T: Real>(
    region: &Region<D>,
    gamma_interior: &Region<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
) -> Result<PeierlsRatio<T>> {
    if !gamma_interior.is_subset(region) {
        return Err(Error::InvalidParameter("the interior must lie inside the region".into()));
    }
    if !peierls_condition(gamma_interior, c, f)?.holds {
        return Err(Error::Precondition("the interior violates J|dI| > 2 sum h".into()));
    }
    let pinned = |s: Spin| -> EnsembleConstraint<D> {
        EnsembleConstraint::Pinned(delta_in(gamma_interior).iter().map(|x| (*x, s)).collect())
    };
    let run = |s: Spin| {
        Ensemble::new(gamma_interior.clone(), Boundary::Minus, *c, f.clone()).with_constraint(pinned(s)).run()
    };
    let up = run(Spin::Up)?;
    let down = run(Spin::Down)?;
    let log_ratio = up.log_z - down.log_z;
    let ratio = log_ratio.exp();
    let bound = (-c.beta() * c.j() * T::of_usize(boundary_edge_count(gamma_interior))).exp();
    Ok(PeierlsRatio { ratio, log_ratio, bound, holds: ratio <= bound + T::of(PEIERLS_TOLERANCE) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlimRatioCheck<T> {
    /// `ln(Z^{-,slim} / Z^{+,slim})`.
    pub log_ratio: T,
    pub field_sum: T,
    /// `-log_ratio / (β Σh)`; absent when `β Σh = 0`.
    pub fitted_c2: Option<T>,
    pub passes: bool,
}

/// Compares the slim-restricted partition functions with minus and plus boundary.
pub fn theorem32_check<const D: usize, T: Real>(
    region: &Region<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
) -> Result<SlimRatioCheck<T>> {
    theorem32_check_with(Ensemble::new(region.clone(), Boundary::Plus, *c, f.clone()))
}

/// As [`theorem32_check`], with the cap and volume taken from `template`.
pub fn theorem32_check_with<const D: usize, T: Real>(template: Ensemble<D, T>) -> Result<SlimRatioCheck<T>> {
    let mut plus = template.with_constraint(EnsembleConstraint::SlimOnly);
    plus.boundary = Boundary::Plus;
    let mut minus = plus.clone();
    minus.boundary = Boundary::Minus;
    let log_ratio = minus.run()?.log_z - plus.run()?.log_z;
    let field_sum = field_sum(&plus.region, &plus.field);
    let scale = plus.coupling.beta() * field_sum;
    let fitted_c2 = if scale > T::zero() { Some(-log_ratio / scale) } else { None };
    Ok(SlimRatioCheck { log_ratio, field_sum, fitted_c2, passes: log_ratio < T::zero() })
}

/// `E^{-,slim}_Λ[σ(x)]`.
pub fn restricted_minus_magnetization<const D: usize, T: Real>(
    region: &Region<D>,
    x: &Site<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
) -> Result<T> {
    if !region.contains(x) {
        return Err(Error::InvalidParameter(format!("site {x} is outside the region")));
    }
    let r = Ensemble::new(region.clone(), Boundary::Minus, *c, f.clone())
        .with_constraint(EnsembleConstraint::SlimOnly)
        .with_probes([*x])
        .run()?;
    Ok(r.probe(x).expect("probe requested"))
}

/// `Σ e^{-βJ|∂I|}` over hole-free connected `I ⊆ region` containing `x`.
pub fn interior_weight_sum_containing<const D: usize, T: Real>(region: &Region<D>, x: &Site<D>, c: &CouplingSpec<T>) -> T {
    let mut sum = CompensatedSum::new();
    for_each_hole_free_connected(region, region.len(), |sites, boundary| {
        if sites.contains(x) {
            sum.add((-c.beta() * c.j() * T::of_usize(boundary)).exp());
        }
    });
    sum.value()
}

/// `P[X ≤ -m*/2] ≥ m*/(2 - m*)` for a finite law on `[-1, 1]` with mean `≤ -m*`.
pub fn markov_bound_check<T: Real>(distribution: &[(T, T)], m_star: T) -> Result<bool> {
    let tol = T::of(1e-9);
    if !(m_star > T::zero() && m_star <= T::one()) {
        return Err(Error::Precondition("m* must lie in (0, 1]".into()));
    }
    let mut total = T::zero();
    let mut mean = T::zero();
    for &(v, p) in distribution {
        if v < -T::one() - tol || v > T::one() + tol || p < T::zero() {
            return Err(Error::Precondition("values must lie in [-1, 1] with nonnegative probabilities".into()));
        }
        total += p;
        mean += v * p;
    }
    if (total - T::one()).abs() > tol {
        return Err(Error::Precondition("probabilities must sum to 1".into()));
    }
    if mean > -m_star + tol {
        return Err(Error::Precondition("the mean must be at most -m*".into()));
    }
    let half = m_star / T::of(2.0);
    let p: T = distribution.iter().filter(|(v, _)| *v <= -half).map(|(_, p)| *p).sum();
    Ok(p >= m_star / (T::of(2.0) - m_star) - T::of(1e-12))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedResult<T> {
    pub result: ExactResult<T>,
    /// `ln Z^ω_Λ` without constraint.
    pub log_z_reference: T,
    /// `ln` of `c1 e^{-βc2 Σ_{Δ\K} h} e^{-2βJ|∂K|} e^{-2βJ|∂Δ| + 4βJ|M|} Z^ω_Λ`, when
    /// constants were supplied.
    pub log_rhs: Option<T>,
}

/// Partition function of `X_{Λ,Δ,K,M}` with boundary `ω`, the unconstrained reference,
/// and the corresponding upper bound for supplied `(c1, c2)`.
#[allow(clippy::too_many_arguments)]
pub fn constrained_partition_x<const D: usize, T: Real>(
    lambda: &Region<D>,
    delta: &Region<D>,
    k: &Region<D>,
    m: &Region<D>,
    boundary: &Boundary<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    constants: Option<(T, T)>,
) -> Result<ConstrainedResult<T>> {
    let base = Ensemble::new(lambda.clone(), boundary.clone(), *c, f.clone());
    let result = base
        .clone()
        .with_constraint(EnsembleConstraint::XConstraint { delta: delta.clone(), k: k.clone(), m: m.clone() })
        .run()?;
    let log_z_reference = base.run()?.log_z;
    let log_rhs = constants.map(|(c1, c2)| {
        let bj = c.beta() * c.j();
        let two = T::of(2.0);
        c1.ln() - c.beta() * c2 * field_sum(&delta.difference(k), f) - two * bj * T::of_usize(boundary_edge_count(k))
            - two * bj * T::of_usize(boundary_edge_count(delta))
            + T::of(4.0) * bj * T::of_usize(m.len())
            + log_z_reference
    });
    Ok(ConstrainedResult { result, log_z_reference, log_rhs })
}
