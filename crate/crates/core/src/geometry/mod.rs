//! Finite-region geometry on `Z^d`: sites, regions, boundaries, connectivity and
//! isoperimetry, plus lattice-animal enumeration in [`animals`].

pub mod animals;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use animals::{
    animal_counts, animal_partial_sum, connected_subsets_within, star_animals, star_animals_with_cap,
    AnimalWalker, ConnectedSubsets, StarAnimals,
};

/// Default number of sites a materialized ball may hold.
pub const DEFAULT_BALL_CAP: usize = 10_000_000;

/// Returns an error unless `D` is a supported lattice dimension.
pub fn check_dimension<const D: usize>() -> Result<()> {
    if D == 2 || D == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(D))
    }
}

/// A point of the integer lattice `Z^D`.
///
/// Ordered lexicographically by coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site<const D: usize>(pub [i32; D]);

impl<const D: usize> Site<D> {
    pub const fn new(coords: [i32; D]) -> Self {
        Self(coords)
    }

    pub const fn origin() -> Self {
        Self([0; D])
    }

    pub fn coords(&self) -> &[i32; D] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// `Σ_i |x_i|`.
    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    /// `max_i |x_i|`; the cube `Λ_n` is `{x : linf_norm(x) ≤ n}`.
    pub fn linf_norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn offset(&self, delta: &Site<D>) -> Self {
        let mut out = self.0;
        for (o, d) in out.iter_mut().zip(delta.0.iter()) {
            *o += d;
        }
        Self(out)
    }

    pub fn sub(&self, other: &Site<D>) -> Self {
        let mut out = self.0;
        for (o, d) in out.iter_mut().zip(other.0.iter()) {
            *o -= d;
        }
        Self(out)
    }

    /// Unit vector along `axis` scaled by `sign`.
    pub fn unit(axis: usize, sign: i32) -> Self {
        let mut c = [0; D];
        c[axis] = sign;
        Self(c)
    }

    /// The `2D` nearest neighbours.
    pub fn neighbors(&self) -> impl Iterator<Item = Site<D>> + '_ {
        (0..D).flat_map(move |axis| [-1, 1].into_iter().map(move |s| self.offset(&Site::unit(axis, s))))
    }

    /// Ordering used to pick `X(γ)`: by `l1` norm, ties broken lexicographically.
    pub fn radial_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.l1_norm().cmp(&other.l1_norm()).then_with(|| self.cmp(other))
    }
}

/// `Σ_i |x_i|`.
pub fn l1_norm<const D: usize>(x: &Site<D>) -> u64 {
    x.l1_norm()
}

impl<const D: usize> fmt::Debug for Site<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl<const D: usize> fmt::Display for Site<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl<const D: usize> From<[i32; D]> for Site<D> {
    fn from(c: [i32; D]) -> Self {
        Self(c)
    }
}

impl<const D: usize> Serialize for Site<D> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(D))?;
        for c in &self.0 {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

impl<'de, const D: usize> Deserialize<'de> for Site<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> std::result::Result<Self, De::Error> {
        struct SiteVisitor<const D: usize>;

        impl<'de, const D: usize> Visitor<'de> for SiteVisitor<D> {
            type Value = Site<D>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a list of {D} integer coordinates")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Site<D>, A::Error> {
                let mut coords = [0i32; D];
                for (i, c) in coords.iter_mut().enumerate() {
                    *c = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(i, &self))?;
                }
                if seq.next_element::<i32>()?.is_some() {
                    return Err(de::Error::invalid_length(D + 1, &self));
                }
                Ok(Site(coords))
            }
        }

        deserializer.deserialize_seq(SiteVisitor::<D>)
    }
}

/// Which pairs of sites count as adjacent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adjacency {
    /// `l1` distance one.
    NearestNeighbor,
    /// `l∞` distance one (diagonals included).
    Star,
}

impl Adjacency {
    /// Offsets of the adjacent sites of the origin, in a fixed order.
    pub fn offsets<const D: usize>(self) -> Vec<Site<D>> {
        match self {
            Adjacency::NearestNeighbor => Site::<D>::origin().neighbors().collect(),
            Adjacency::Star => {
                let mut out = Vec::with_capacity(3usize.pow(D as u32) - 1);
                let mut c = [-1i32; D];
                loop {
                    if c.iter().any(|&v| v != 0) {
                        out.push(Site(c));
                    }
                    let mut axis = 0;
                    loop {
                        if axis == D {
                            return out;
                        }
                        if c[axis] < 1 {
                            c[axis] += 1;
                            break;
                        }
                        c[axis] = -1;
                        axis += 1;
                    }
                }
            }
        }
    }
}

/// A finite set of lattice sites. Iterates in lexicographic order and serializes as
/// a sorted list of coordinate tuples.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region<const D: usize> {
    sites: BTreeSet<Site<D>>,
}

impl<const D: usize> fmt::Debug for Region<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.sites.iter()).finish()
    }
}

impl<const D: usize> FromIterator<Site<D>> for Region<D> {
    fn from_iter<I: IntoIterator<Item = Site<D>>>(iter: I) -> Self {
        Self { sites: iter.into_iter().collect() }
    }
}

impl<const D: usize> FromIterator<[i32; D]> for Region<D> {
    fn from_iter<I: IntoIterator<Item = [i32; D]>>(iter: I) -> Self {
        Self { sites: iter.into_iter().map(Site).collect() }
    }
}

impl<'a, const D: usize> IntoIterator for &'a Region<D> {
    type Item = &'a Site<D>;
    type IntoIter = std::collections::btree_set::Iter<'a, Site<D>>;

    fn into_iter(self) -> Self::IntoIter {
        self.sites.iter()
    }
}

impl<const D: usize> Region<D> {
    pub fn new() -> Self {
        Self { sites: BTreeSet::new() }
    }

    pub fn single(x: Site<D>) -> Self {
        std::iter::once(x).collect()
    }

    /// The axis-aligned box `[lo, hi]` (inclusive on both ends).
    pub fn rect(lo: [i32; D], hi: [i32; D]) -> Self {
        let mut sites = BTreeSet::new();
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Self { sites };
        }
        let mut c = lo;
        loop {
            sites.insert(Site(c));
            let mut axis = 0;
            loop {
                if axis == D {
                    return Self { sites };
                }
                if c[axis] < hi[axis] {
                    c[axis] += 1;
                    break;
                }
                c[axis] = lo[axis];
                axis += 1;
            }
        }
    }

    /// The cube `Λ_n` of side `2n+1` centred at the origin.
    pub fn cube(n: u32) -> Self {
        let n = n as i32;
        Self::rect([-n; D], [n; D])
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, x: &Site<D>) -> bool {
        self.sites.contains(x)
    }

    pub fn insert(&mut self, x: Site<D>) -> bool {
        self.sites.insert(x)
    }

    pub fn remove(&mut self, x: &Site<D>) -> bool {
        self.sites.remove(x)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Site<D>> + ExactSizeIterator + '_ {
        self.sites.iter()
    }

    pub fn sites(&self) -> &BTreeSet<Site<D>> {
        &self.sites
    }

    pub fn first(&self) -> Option<&Site<D>> {
        self.sites.first()
    }

    pub fn is_subset(&self, other: &Region<D>) -> bool {
        self.sites.is_subset(&other.sites)
    }

    pub fn is_disjoint(&self, other: &Region<D>) -> bool {
        self.sites.is_disjoint(&other.sites)
    }

    pub fn union(&self, other: &Region<D>) -> Region<D> {
        Region { sites: self.sites.union(&other.sites).copied().collect() }
    }

    pub fn intersection(&self, other: &Region<D>) -> Region<D> {
        Region { sites: self.sites.intersection(&other.sites).copied().collect() }
    }

    pub fn difference(&self, other: &Region<D>) -> Region<D> {
        Region { sites: self.sites.difference(&other.sites).copied().collect() }
    }

    /// Smallest box containing the region, or `None` when empty.
    pub fn bounding_box(&self) -> Option<([i32; D], [i32; D])> {
        let mut it = self.sites.iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first.0, first.0);
        for s in it {
            for a in 0..D {
                lo[a] = lo[a].min(s.0[a]);
                hi[a] = hi[a].max(s.0[a]);
            }
        }
        Some((lo, hi))
    }

    /// The bounding box grown by `margin` sites on every side, as a region.
    pub fn padded_box(&self, margin: i32) -> Region<D> {
        match self.bounding_box() {
            Some((lo, hi)) => Region::rect(lo.map(|v| v - margin), hi.map(|v| v + margin)),
            None => Region::new(),
        }
    }

    /// Translates every site by `delta`.
    pub fn translate(&self, delta: &Site<D>) -> Region<D> {
        self.sites.iter().map(|s| s.offset(delta)).collect()
    }
}

/// All sites with `l1` norm at most `radius`.
pub fn ball<const D: usize>(radius: u32) -> Result<Region<D>> {
    ball_with_cap(radius, DEFAULT_BALL_CAP)
}

pub fn ball_with_cap<const D: usize>(radius: u32, cap: usize) -> Result<Region<D>> {
    check_dimension::<D>()?;
    let volume = ball_volume(radius as u64, D);
    if volume > cap as u128 {
        return Err(Error::ResourceLimit { what: "ball", requested: volume.min(usize::MAX as u128) as usize, cap });
    }
    let r = radius as i32;
    Ok(Region::rect([-r; D], [r; D]).sites.into_iter().filter(|s| s.l1_norm() <= radius as u64).collect())
}

/// Number of sites of `Z^d` with `l1` norm exactly `n`.
pub fn sphere_count(n: u64, d: usize) -> u128 {
    if n == 0 {
        return 1;
    }
    // Σ_k 2^k C(d,k) C(n-1,k-1): choose k nonzero coordinates, their signs and a
    // composition of n into k positive parts.
    (1..=d.min(n as usize))
        .map(|k| (1u128 << k) * binomial(d as u64, k as u64) * binomial(n - 1, k as u64 - 1))
        .sum()
}

/// `|B(0, radius)|` in dimension `d`.
pub fn ball_volume(radius: u64, d: usize) -> u128 {
    (0..=radius).map(|n| sphere_count(n, d)).sum()
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Sites outside `k` that have a nearest neighbour in `k`.
pub fn delta_out<const D: usize>(k: &Region<D>) -> Region<D> {
    k.iter().flat_map(|x| x.neighbors()).filter(|y| !k.contains(y)).collect()
}

/// Sites of `k` that have a nearest neighbour outside `k`.
pub fn delta_in<const D: usize>(k: &Region<D>) -> Region<D> {
    k.iter().filter(|x| x.neighbors().any(|y| !k.contains(&y))).copied().collect()
}

/// `|∂K|`: the number of nearest-neighbour pairs `(x, y)` with `x ∈ K`, `y ∉ K`.
pub fn boundary_edge_count<const D: usize>(k: &Region<D>) -> usize {
    k.iter().map(|x| x.neighbors().filter(|y| !k.contains(y)).count()).sum()
}

/// Partition of `k` into maximal connected pieces, ordered by their smallest site.
pub fn connected_components<const D: usize>(k: &Region<D>, adjacency: Adjacency) -> Vec<Region<D>> {
    let offsets = adjacency.offsets::<D>();
    let mut seen: HashSet<Site<D>> = HashSet::with_capacity(k.len());
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for &start in k.iter() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = Region::new();
        queue.push_back(start);
        while let Some(x) = queue.pop_front() {
            comp.insert(x);
            for off in &offsets {
                let y = x.offset(off);
                if k.contains(&y) && seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Sites of `bounding_box` not in `k` that can be reached by a nearest-neighbour
/// path avoiding `k`, starting from the frame of the box.
fn exterior_within<const D: usize>(k: &Region<D>, bounding_box: &Region<D>) -> HashSet<Site<D>> {
    let mut reached = HashSet::new();
    let mut queue = VecDeque::new();
    for x in delta_in(bounding_box).iter() {
        if !k.contains(x) && reached.insert(*x) {
            queue.push_back(*x);
        }
    }
    while let Some(x) = queue.pop_front() {
        for y in x.neighbors() {
            if bounding_box.contains(&y) && !k.contains(&y) && reached.insert(y) {
                queue.push_back(y);
            }
        }
    }
    reached
}

/// `k` together with every finite component of its complement ("holes").
///
/// Components of the complement are judged finite when they do not reach the frame
/// of `bounding_box`, which must contain `k`.
pub fn fill_holes<const D: usize>(k: &Region<D>, bounding_box: &Region<D>) -> Region<D> {
    if k.is_empty() {
        return Region::new();
    }
    let exterior = exterior_within(k, bounding_box);
    bounding_box.iter().filter(|x| !exterior.contains(x)).copied().collect()
}

/// [`fill_holes`] inside the bounding box of `k` padded by one site.
pub fn hole_free_hull<const D: usize>(k: &Region<D>) -> Region<D> {
    fill_holes(k, &k.padded_box(1))
}

pub fn is_hole_free<const D: usize>(k: &Region<D>) -> bool {
    hole_free_hull(k).len() == k.len()
}

/// Both sides of `|K|^{(d-1)/d} ≤ |∂K|/(2d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn isoperimetric_check<const D: usize>(k: &Region<D>) -> Result<IsoperimetricCheck> {
    if k.is_empty() {
        return Err(Error::Precondition("isoperimetric check needs a nonempty region".into()));
    }
    let d = D as f64;
    let lhs = (k.len() as f64).powf((d - 1.0) / d);
    let rhs = boundary_edge_count(k) as f64 / (2.0 * d);
    // |K| and |∂K| are integers; allow for rounding in the fractional power.
    let holds = lhs <= rhs * (1.0 + 1e-12);
    Ok(IsoperimetricCheck { lhs, rhs, holds })
}
