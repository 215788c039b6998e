//! The decaying external field `h(x) = h*/|x|^α` (with `h(0) = h*`), its truncation
//! inside a ball, optional local perturbations, and the field-versus-boundary tests
//! that decide when Peierls estimates apply.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ball_volume, boundary_edge_count, sphere_count, Region, Site, DEFAULT_BALL_CAP};
use crate::scalar::{CompensatedSum, Real};

/// Parameters of the external field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "FieldSpecRepr<T>",
    into = "FieldSpecRepr<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct FieldSpec<T> {
    h_star: T,
    alpha: T,
    truncation_radius: Option<u32>,
    perturbation: BTreeMap<Vec<i32>, T>,
}

#[derive(Serialize, Deserialize)]
struct FieldSpecRepr<T> {
    h_star: T,
    alpha: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation_radius: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    perturbation: Vec<(Vec<i32>, T)>,
}

impl<T: Real> TryFrom<FieldSpecRepr<T>> for FieldSpec<T> {
    type Error = Error;

    fn try_from(r: FieldSpecRepr<T>) -> Result<Self> {
        let mut f = FieldSpec::new(r.h_star, r.alpha)?;
        f.truncation_radius = r.truncation_radius;
        f.with_perturbation(r.perturbation)
    }
}

impl<T: Real> From<FieldSpec<T>> for FieldSpecRepr<T> {
    fn from(f: FieldSpec<T>) -> Self {
        FieldSpecRepr {
            h_star: f.h_star,
            alpha: f.alpha,
            truncation_radius: f.truncation_radius,
            perturbation: f.perturbation.into_iter().collect(),
        }
    }
}

impl<T: Real> FieldSpec<T> {
    pub fn new(h_star: T, alpha: T) -> Result<Self> {
        if !(h_star > T::zero()) || !h_star.is_finite() {
            return Err(Error::InvalidParameter("h_star must be > 0".into()));
        }
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be > 0".into()));
        }
        Ok(Self { h_star, alpha, truncation_radius: None, perturbation: BTreeMap::new() })
    }

    /// A field that is zero everywhere, realized as a truncation covering the lattice.
    pub fn vanishing() -> Self {
        Self { h_star: T::one(), alpha: T::one(), truncation_radius: Some(u32::MAX), perturbation: BTreeMap::new() }
    }

    /// Sets the field to zero on `B(0, radius)`.
    pub fn with_truncation(mut self, radius: u32) -> Self {
        self.truncation_radius = Some(radius);
        self
    }

    /// Adds a finitely supported perturbation. Fails if the total field would be
    /// negative anywhere.
    pub fn with_perturbation<I>(mut self, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i32>, T)>,
    {
        for (coords, value) in entries {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("perturbation at {coords:?} is not finite")));
            }
            *self.perturbation.entry(coords).or_insert_with(T::zero) += value;
        }
        for (coords, value) in &self.perturbation {
            let norm = coords.iter().map(|c| c.unsigned_abs() as u64).sum();
            if self.base_at_norm(norm) + *value < T::zero() {
                return Err(Error::InvalidParameter(format!("perturbation makes the field negative at {coords:?}")));
            }
        }
        Ok(self)
    }

    pub fn h_star(&self) -> T {
        self.h_star
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn truncation_radius(&self) -> Option<u32> {
        self.truncation_radius
    }

    pub fn perturbation(&self) -> &BTreeMap<Vec<i32>, T> {
        &self.perturbation
    }

    pub fn has_perturbation(&self) -> bool {
        !self.perturbation.is_empty()
    }

    /// The same field with `h*` replaced.
    pub fn with_h_star(&self, h_star: T) -> Result<Self> {
        let mut f = self.clone();
        if !(h_star > T::zero()) {
            return Err(Error::InvalidParameter("h_star must be > 0".into()));
        }
        f.h_star = h_star;
        Ok(f)
    }

    /// Unperturbed (possibly truncated) field value at `l1` norm `norm`.
    pub fn base_at_norm(&self, norm: u64) -> T {
        if let Some(r) = self.truncation_radius {
            if norm <= r as u64 {
                return T::zero();
            }
        }
        if norm == 0 {
            self.h_star
        } else {
            self.h_star * T::of(norm as f64).powf(-self.alpha)
        }
    }

    /// `h(x)`, including truncation and perturbation.
    pub fn at<const D: usize>(&self, x: &Site<D>) -> T {
        let base = self.base_at_norm(x.l1_norm());
        match self.perturbation.get(&x.0[..]) {
            Some(p) => base + *p,
            None => base,
        }
    }
}

/// `h(x)` for the field `f`.
pub fn field_at<const D: usize, T: Real>(x: &Site<D>, f: &FieldSpec<T>) -> T {
    f.at(x)
}

/// `Σ_{x ∈ K} h(x)`.
pub fn field_sum<const D: usize, T: Real>(k: &Region<D>, f: &FieldSpec<T>) -> T {
    k.iter().map(|x| f.at(x)).collect::<CompensatedSum<T>>().value()
}

/// Coupling `J` and inverse temperature `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingRepr<T>", into = "CouplingRepr<T>", bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct CouplingSpec<T> {
    j: T,
    beta: T,
}

#[derive(Serialize, Deserialize)]
struct CouplingRepr<T> {
    #[serde(rename = "J")]
    j: T,
    beta: T,
}

impl<T: Real> TryFrom<CouplingRepr<T>> for CouplingSpec<T> {
    type Error = Error;

    fn try_from(r: CouplingRepr<T>) -> Result<Self> {
        CouplingSpec::new(r.j, r.beta)
    }
}

impl<T: Real> From<CouplingSpec<T>> for CouplingRepr<T> {
    fn from(c: CouplingSpec<T>) -> Self {
        CouplingRepr { j: c.j, beta: c.beta }
    }
}

impl<T: Real> CouplingSpec<T> {
    /// `J > 0`; `β = 0` is admitted as the infinite-temperature point.
    pub fn new(j: T, beta: T) -> Result<Self> {
        if !(j > T::zero()) || !j.is_finite() {
            return Err(Error::InvalidParameter("J must be > 0".into()));
        }
        if !(beta >= T::zero()) || !beta.is_finite() {
            return Err(Error::InvalidParameter("beta must be >= 0".into()));
        }
        Ok(Self { j, beta })
    }

    pub fn j(&self) -> T {
        self.j
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn with_beta(&self, beta: T) -> Result<Self> {
        Self::new(self.j, beta)
    }
}

/// Outcome of a strict inequality `lhs > rhs` (or `lhs ≤ rhs` where documented).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

/// `J|∂K| > 2 Σ_{x∈K} h(x)`.
pub fn peierls_condition<const D: usize, T: Real>(
    k: &Region<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
) -> Result<InequalityCheck<T>> {
    if k.is_empty() {
        return Err(Error::Precondition("peierls condition needs a nonempty region".into()));
    }
    let lhs = c.j() * T::of_usize(boundary_edge_count(k));
    let rhs = T::of(2.0) * field_sum(k, f);
    Ok(InequalityCheck { lhs, rhs, holds: lhs > rhs })
}

fn check_runtime_dimension(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// `⌈c · boundary_size^{1/(d-1)}⌉`, the radius of a ball guaranteed to be at least
/// as large as any region with that boundary.
pub fn dominating_ball_radius<T: Real>(boundary_size: u64, c_const: T, d: usize) -> Result<u64> {
    check_runtime_dimension(d)?;
    if boundary_size == 0 {
        return Err(Error::Precondition("boundary_size must be >= 1".into()));
    }
    if !(c_const > T::zero()) {
        return Err(Error::Precondition("c must be > 0".into()));
    }
    let v = c_const.to_f64_lossy() * (boundary_size as f64).powf(1.0 / (d as f64 - 1.0));
    // Shave a few ulps so exact integers are not pushed up by rounding.
    Ok((v * (1.0 - 4.0 * f64::EPSILON)).ceil() as u64)
}

/// `R^{-(d-1)} Σ_{|x| ≤ R} h(x)`.
pub fn surface_normalized_ball_sum<const D: usize, T: Real>(radius: u32, f: &FieldSpec<T>) -> Result<T> {
    surface_normalized_ball_sum_with_cap::<D, T>(radius, f, DEFAULT_BALL_CAP)
}

pub fn surface_normalized_ball_sum_with_cap<const D: usize, T: Real>(
    radius: u32,
    f: &FieldSpec<T>,
    cap: usize,
) -> Result<T> {
    if radius == 0 {
        return Err(Error::Precondition("radius must be >= 1".into()));
    }
    let total = ball_field_sum::<D, T>(radius, f, cap)?;
    Ok(total / T::of(radius as f64).powi(D as i32 - 1))
}

/// `Σ_{|x| ≤ R} h(x)`, summed shell by shell.
pub fn ball_field_sum<const D: usize, T: Real>(radius: u32, f: &FieldSpec<T>, cap: usize) -> Result<T> {
    crate::geometry::check_dimension::<D>()?;
    let volume = ball_volume(radius as u64, D);
    if volume > cap as u128 {
        return Err(Error::ResourceLimit { what: "ball", requested: volume.min(usize::MAX as u128) as usize, cap });
    }
    let mut acc = CompensatedSum::new();
    for n in 0..=radius as u64 {
        acc.add(T::of(sphere_count(n, D) as f64) * f.base_at_norm(n));
    }
    for (coords, v) in f.perturbation() {
        if coords.len() == D && coords.iter().map(|c| c.unsigned_abs() as u64).sum::<u64>() <= radius as u64 {
            acc.add(*v);
        }
    }
    Ok(acc.value())
}

/// Smallest `R ≥ 1` with `h* C^{1/(d-1)} / (R^α (2d)^{d/(d-1)}) ≤ J`.
pub fn truncation_radius_for<T: Real>(c: &CouplingSpec<T>, f: &FieldSpec<T>, c_threshold: T, d: usize) -> Result<u32> {
    check_runtime_dimension(d)?;
    if !(c_threshold > T::zero()) {
        return Err(Error::Precondition("C must be > 0".into()));
    }
    let d_r = T::of_usize(d);
    let one = T::one();
    let numerator = f.h_star() * c_threshold.powf(one / (d_r - one));
    let surface = (T::of(2.0) * d_r).powf(d_r / (d_r - one));
    let holds = |r: u32| numerator / (T::of(r as f64).powf(f.alpha()) * surface) <= c.j();
    let guess = (numerator / (surface * c.j())).powf(one / f.alpha()).to_f64_lossy();
    let mut r = if guess.is_finite() { guess.ceil().clamp(1.0, u32::MAX as f64) as u32 } else { u32::MAX };
    while r > 1 && holds(r - 1) {
        r -= 1;
    }
    while !holds(r) {
        if r == u32::MAX {
            return Err(Error::Domain("no finite truncation radius satisfies the bound".into()));
        }
        r += 1;
    }
    Ok(r)
}

/// Result of [`lemma21_threshold_scan`]: every ball from `radius` up to the scan
/// limit satisfies the ball-dominated Peierls condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub radius: u32,
    pub volume: u64,
}

/// Scans `R = 0..=max_radius` for the ball-dominated condition
/// `J · 2d · R^{d-1} > 2 Σ_{B(0,R)} h` and returns the smallest ball from which it
/// holds up to `max_radius`, or `None` when it fails at `max_radius`.
pub fn lemma21_threshold_scan<const D: usize, T: Real>(
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    max_radius: u32,
) -> Result<Option<ThresholdScan>> {
    crate::geometry::check_dimension::<D>()?;
    let volume = ball_volume(max_radius as u64, D);
    if volume > DEFAULT_BALL_CAP as u128 {
        return Err(Error::ResourceLimit { what: "ball", requested: volume.min(usize::MAX as u128) as usize, cap: DEFAULT_BALL_CAP });
    }
    let two = T::of(2.0);
    let surface_const = c.j() * two * T::of_usize(D);
    let mut acc = CompensatedSum::new();
    let mut conditions = Vec::with_capacity(max_radius as usize + 1);
    for n in 0..=max_radius as u64 {
        acc.add(T::of(sphere_count(n, D) as f64) * f.base_at_norm(n));
        let mut total = acc.value();
        for (coords, v) in f.perturbation() {
            if coords.len() == D && coords.iter().map(|c| c.unsigned_abs() as u64).sum::<u64>() <= n {
                total += *v;
            }
        }
        let lhs = surface_const * T::of(n as f64).powi(D as i32 - 1);
        conditions.push(lhs > two * total);
    }
    if !conditions.last().copied().unwrap_or(false) {
        return Ok(None);
    }
    let first_failure_from_top = conditions.iter().rposition(|ok| !ok);
    let radius = first_failure_from_top.map_or(0, |i| i + 1) as u32;
    Ok(Some(ThresholdScan { radius, volume: ball_volume(radius as u64, D) as u64 }))
}
