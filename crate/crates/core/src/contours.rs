//! Spin configurations, Peierls contours and their interiors, slim/fat
//! classification, and the fat-contour estimates.
//!
//! A contour is a maximal set of broken bonds whose dual faces are connected by
//! nonempty intersection. Two closed faces of the dual complex intersect exactly when
//! they share a dual vertex, so contours are grouped with a union-find over dual
//! vertices. The interior `I(γ)` is everything that cannot be reached from far away
//! without crossing a face of `γ`.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CouplingSpec, FieldSpec};
use crate::geometry::{ball, check_dimension, connected_subsets_within, delta_in, delta_out, Adjacency, Region, Site};
use crate::grid::BoxGrid;
use crate::scalar::Real;
use crate::union_find::UnionFind;

/// Largest interior size [`fat_sum_partial`] will enumerate.
pub const FAT_INTERIOR_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    #[serde(rename = "minus")]
    Down,
    #[serde(rename = "plus")]
    Up,
}

impl Spin {
    #[inline]
    pub fn value(self) -> i8 {
        match self {
            Spin::Up => 1,
            Spin::Down => -1,
        }
    }

    pub fn from_value(v: i8) -> Option<Spin> {
        match v {
            1 => Some(Spin::Up),
            -1 => Some(Spin::Down),
            _ => None,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Spin::Up => "plus",
            Spin::Down => "minus",
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Spins outside the volume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Boundary<const D: usize> {
    Plus,
    Minus,
    /// Spins on `δ_out(region)`; other exterior sites never interact.
    Explicit(BTreeMap<Site<D>, Spin>),
}

impl<const D: usize> Boundary<D> {
    pub fn uniform(spin: Spin) -> Self {
        match spin {
            Spin::Up => Boundary::Plus,
            Spin::Down => Boundary::Minus,
        }
    }

    pub fn spin_at(&self, y: &Site<D>) -> Option<Spin> {
        match self {
            Boundary::Plus => Some(Spin::Up),
            Boundary::Minus => Some(Spin::Down),
            Boundary::Explicit(map) => map.get(y).copied(),
        }
    }

    pub fn flipped(&self) -> Self {
        match self {
            Boundary::Plus => Boundary::Minus,
            Boundary::Minus => Boundary::Plus,
            Boundary::Explicit(map) => Boundary::Explicit(map.iter().map(|(k, v)| (*k, v.flipped())).collect()),
        }
    }

    /// The uniform spin, if the boundary is uniform.
    pub fn uniform_spin(&self) -> Option<Spin> {
        match self {
            Boundary::Plus => Some(Spin::Up),
            Boundary::Minus => Some(Spin::Down),
            Boundary::Explicit(_) => None,
        }
    }

    pub(crate) fn validate_for(&self, region: &Region<D>) -> Result<()> {
        if let Boundary::Explicit(map) = self {
            let outer = delta_out(region);
            if map.len() != outer.len() || !outer.iter().all(|y| map.contains_key(y)) {
                return Err(Error::InvalidParameter("explicit boundary must be defined exactly on delta_out(region)".into()));
            }
        }
        Ok(())
    }
}

/// Spins on a finite volume together with a boundary condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig<const D: usize> {
    region: Region<D>,
    spins: BTreeMap<Site<D>, Spin>,
    boundary: Boundary<D>,
}

impl<const D: usize> SpinConfig<D> {
    pub fn new(region: Region<D>, spins: BTreeMap<Site<D>, Spin>, boundary: Boundary<D>) -> Result<Self> {
        if spins.len() != region.len() || !region.iter().all(|x| spins.contains_key(x)) {
            return Err(Error::InvalidParameter("spins must be defined exactly on the region".into()));
        }
        boundary.validate_for(&region)?;
        Ok(Self { region, spins, boundary })
    }

    pub fn uniform(region: Region<D>, spin: Spin, boundary: Boundary<D>) -> Result<Self> {
        Self::from_fn(region, boundary, |_| spin)
    }

    pub fn from_fn(region: Region<D>, boundary: Boundary<D>, f: impl Fn(&Site<D>) -> Spin) -> Result<Self> {
        let spins = region.iter().map(|x| (*x, f(x))).collect();
        Self::new(region, spins, boundary)
    }

    /// Spins taken from `values` in the region's iteration order.
    pub fn from_values(region: Region<D>, boundary: Boundary<D>, values: &[i8]) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::InvalidParameter("one spin value per site is required".into()));
        }
        let mut spins = BTreeMap::new();
        for (x, &v) in region.iter().zip(values) {
            let s = Spin::from_value(v).ok_or_else(|| Error::InvalidParameter(format!("spin value {v} is not ±1")))?;
            spins.insert(*x, s);
        }
        Self::new(region, spins, boundary)
    }

    pub fn region(&self) -> &Region<D> {
        &self.region
    }

    pub fn boundary(&self) -> &Boundary<D> {
        &self.boundary
    }

    pub fn spin(&self, x: &Site<D>) -> Option<Spin> {
        self.spins.get(x).copied()
    }

    /// Spin in the volume or on its outer boundary.
    pub fn extended_spin(&self, x: &Site<D>) -> Option<Spin> {
        match self.spins.get(x) {
            Some(s) => Some(*s),
            None if x.neighbors().any(|y| self.region.contains(&y)) => self.boundary.spin_at(x),
            None => None,
        }
    }

    pub fn set(&mut self, x: &Site<D>, s: Spin) -> Result<()> {
        match self.spins.get_mut(x) {
            Some(slot) => {
                *slot = s;
                Ok(())
            }
            None => Err(Error::InvalidParameter(format!("site {x} is outside the region"))),
        }
    }

    pub fn spins(&self) -> impl Iterator<Item = (&Site<D>, Spin)> + '_ {
        self.spins.iter().map(|(k, v)| (k, *v))
    }

    /// Spin values in the region's iteration order.
    pub fn values(&self) -> Vec<i8> {
        self.spins.values().map(|s| s.value()).collect()
    }

    /// Global spin flip, boundary included.
    pub fn flipped(&self) -> Self {
        Self {
            region: self.region.clone(),
            spins: self.spins.iter().map(|(k, v)| (*k, v.flipped())).collect(),
            boundary: self.boundary.flipped(),
        }
    }

    pub fn magnetization(&self) -> f64 {
        if self.spins.is_empty() {
            return 0.0;
        }
        self.spins.values().map(|s| s.value() as f64).sum::<f64>() / self.spins.len() as f64
    }
}

/// An unordered nearest-neighbour pair, stored with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bond<const D: usize> {
    pub lo: Site<D>,
    pub hi: Site<D>,
}

impl<const D: usize> Bond<D> {
    pub fn new(a: Site<D>, b: Site<D>) -> Self {
        if a < b {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        }
    }
}

/// A Peierls contour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour<const D: usize> {
    pub broken_bonds: Vec<Bond<D>>,
    /// `I(γ)`.
    pub interior: Region<D>,
    /// `|∂I(γ)|`.
    pub boundary_size: usize,
    /// Spin on `δ_out(I(γ))`.
    pub sign: Spin,
    /// `X(γ)`: the interior site closest to the origin (l1, then lexicographic).
    pub min_site: Site<D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Slim,
    Fat,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Slim => "slim",
            Tag::Fat => "fat",
        })
    }
}

/// `J|∂I(γ)|` against `2 Σ_{I(γ)} h`; slim iff `lhs > rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlimFatTag<T> {
    pub tag: Tag,
    pub lhs: T,
    pub rhs: T,
}

impl<T: Real> SlimFatTag<T> {
    pub fn from_sides(lhs: T, rhs: T) -> Self {
        Self { tag: if lhs > rhs { Tag::Slim } else { Tag::Fat }, lhs, rhs }
    }
}

#[derive(Debug, Clone, Copy)]
struct BondSlot {
    a: usize,
    b: usize,
    corners: [usize; 4],
    n_corners: u8,
}

/// Borrowed view of one contour produced by [`ContourExtractor::scan`].
pub struct ContourView<'a, const D: usize, T> {
    grid: &'a BoxGrid<D>,
    slots: &'a [BondSlot],
    bond_ids: &'a [u32],
    interior_cells: &'a [usize],
    /// `|∂I(γ)|`.
    pub boundary_size: usize,
    /// `Σ_{I(γ)} h`, zero when the extractor has no field.
    pub field_sum: T,
    pub sign: Spin,
}

impl<'a, const D: usize, T: Real> ContourView<'a, D, T> {
    pub fn interior_len(&self) -> usize {
        self.interior_cells.len()
    }

    pub fn interior_sites(&self) -> impl Iterator<Item = Site<D>> + '_ {
        self.interior_cells.iter().map(|&c| self.grid.site(c))
    }

    pub fn bonds(&self) -> impl Iterator<Item = Bond<D>> + '_ {
        self.bond_ids.iter().map(|&id| {
            let s = &self.slots[id as usize];
            Bond::new(self.grid.site(s.a), self.grid.site(s.b))
        })
    }

    pub fn bond_count(&self) -> usize {
        self.bond_ids.len()
    }

    pub fn is_slim(&self, j: T) -> bool {
        j * T::of_usize(self.boundary_size) > T::of(2.0) * self.field_sum
    }

    pub fn min_site(&self) -> Site<D> {
        let from_interior = self.interior_sites().min_by(|a, b| a.radial_cmp(b));
        from_interior.unwrap_or_else(|| {
            self.bonds().flat_map(|b| [b.lo, b.hi]).min_by(|a, b| a.radial_cmp(b)).expect("contour has bonds")
        })
    }

    pub fn to_contour(&self) -> Contour<D> {
        let mut broken_bonds: Vec<_> = self.bonds().collect();
        broken_bonds.sort();
        Contour {
            broken_bonds,
            interior: self.interior_sites().collect(),
            boundary_size: self.boundary_size,
            sign: self.sign,
            min_site: self.min_site(),
        }
    }
}

/// Reusable contour extractor for a fixed volume and boundary condition.
///
/// Holds a dense grid over the bounding box of `Λ ∪ δ_out(Λ)` padded by one site, so
/// repeated extraction over many configurations allocates nothing.
#[derive(Clone)]
pub struct ContourExtractor<const D: usize, T> {
    grid: BoxGrid<D>,
    region_cells: Vec<usize>,
    in_region: Vec<bool>,
    cell_spin: Vec<i8>,
    slots: Vec<BondSlot>,
    /// Bond id for the bond `(cell, cell + e_axis)` at `cell * D + axis`.
    bond_at: Vec<u32>,
    field: Vec<T>,
    coords: Vec<[u32; D]>,
    broken: Vec<u32>,
    uf: UnionFind,
    corner_owner: Vec<u32>,
    corner_stamp: Vec<u32>,
    blocked: Vec<u32>,
    visited: Vec<u32>,
    stamp: u32,
    queue: Vec<usize>,
    group_of_root: Vec<u32>,
    groups: Vec<Vec<u32>>,
    group_bonds: Vec<u32>,
    interior: Vec<usize>,
    window: Vec<usize>,
}

const NONE: u32 = u32::MAX;

impl<const D: usize, T: Real> ContourExtractor<D, T> {
    /// `field` is only needed for [`ContourView::field_sum`].
    pub fn new(region: &Region<D>, boundary: &Boundary<D>, field: Option<&FieldSpec<T>>) -> Result<Self> {
        check_dimension::<D>()?;
        boundary.validate_for(region)?;
        let (lo, hi) = region.bounding_box().unwrap_or(([0; D], [0; D]));
        let grid = BoxGrid::new(lo.map(|v| v - 2), hi.map(|v| v + 2));
        let n = grid.len();
        let mut in_region = vec![false; n];
        let mut cell_spin = vec![0i8; n];
        let mut region_cells = Vec::with_capacity(region.len());
        for x in region.iter() {
            let c = grid.index(x).expect("region inside grid");
            in_region[c] = true;
            cell_spin[c] = 1;
            region_cells.push(c);
        }
        for y in delta_out(region).iter() {
            let c = grid.index(y).expect("boundary inside grid");
            cell_spin[c] = boundary.spin_at(y).expect("validated boundary").value();
        }
        let mut slots = Vec::new();
        let mut bond_at = vec![NONE; n * D];
        for c in 0..n {
            if cell_spin[c] == 0 {
                continue;
            }
            for axis in 0..D {
                let Some(nb) = grid.step(c, axis, true) else { continue };
                if cell_spin[nb] == 0 || !(in_region[c] || in_region[nb]) {
                    continue;
                }
                let mut corners = [0usize; 4];
                let others: Vec<usize> = (0..D).filter(|&a| a != axis).collect();
                let n_corners = 1usize << others.len();
                for (k, corner) in corners.iter_mut().enumerate().take(n_corners) {
                    let mut v = c;
                    for (bit, &a) in others.iter().enumerate() {
                        if k >> bit & 1 == 1 {
                            v -= grid.stride(a);
                        }
                    }
                    *corner = v;
                }
                bond_at[c * D + axis] = slots.len() as u32;
                slots.push(BondSlot { a: c, b: nb, corners, n_corners: n_corners as u8 });
            }
        }
        let field_values = match field {
            Some(f) => (0..n).map(|c| f.at(&grid.site(c))).collect(),
            None => vec![T::zero(); n],
        };
        let coords = (0..n).map(|c| std::array::from_fn(|a| grid.coord(c, a) as u32)).collect();
        Ok(Self {
            region_cells,
            in_region,
            cell_spin,
            bond_at,
            field: field_values,
            coords,
            broken: Vec::new(),
            uf: UnionFind::new(0),
            corner_owner: vec![0; n],
            corner_stamp: vec![0; n],
            blocked: vec![0; slots.len()],
            visited: vec![0; n],
            stamp: 0,
            queue: Vec::new(),
            group_of_root: Vec::new(),
            groups: Vec::new(),
            group_bonds: Vec::new(),
            interior: Vec::new(),
            window: Vec::new(),
            slots,
            grid,
        })
    }

    pub fn region_len(&self) -> usize {
        self.region_cells.len()
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.corner_stamp.fill(0);
            self.blocked.fill(0);
            self.visited.fill(0);
            self.stamp = 1;
        }
        self.stamp
    }

    /// Calls `visit` for each contour of the configuration whose volume spins are
    /// `spins` (region iteration order, values ±1). Stops early on `Break`.
    pub fn scan<F>(&mut self, spins: &[i8], mut visit: F) -> ControlFlow<()>
    where
        F: FnMut(&ContourView<'_, D, T>) -> ControlFlow<()>,
    {
        debug_assert_eq!(spins.len(), self.region_cells.len());
        for (&c, &s) in self.region_cells.iter().zip(spins) {
            self.cell_spin[c] = s;
        }
        self.broken.clear();
        for (id, s) in self.slots.iter().enumerate() {
            if self.cell_spin[s.a] != self.cell_spin[s.b] {
                self.broken.push(id as u32);
            }
        }
        if self.broken.is_empty() {
            return ControlFlow::Continue(());
        }

        let nb = self.broken.len();
        self.uf.reset(nb);
        let corner_gen = self.next_stamp();
        for k in 0..nb {
            let slot = self.slots[self.broken[k] as usize];
            for &corner in &slot.corners[..slot.n_corners as usize] {
                if self.corner_stamp[corner] == corner_gen {
                    self.uf.union(k, self.corner_owner[corner] as usize);
                } else {
                    self.corner_stamp[corner] = corner_gen;
                    self.corner_owner[corner] = k as u32;
                }
            }
        }
        self.group_of_root.clear();
        self.group_of_root.resize(nb, NONE);
        let mut n_groups = 0;
        for k in 0..nb {
            let root = self.uf.find(k);
            if self.group_of_root[root] == NONE {
                self.group_of_root[root] = n_groups as u32;
                if self.groups.len() <= n_groups {
                    self.groups.push(Vec::new());
                }
                self.groups[n_groups].clear();
                n_groups += 1;
            }
            let g = self.group_of_root[root] as usize;
            self.groups[g].push(k as u32);
        }

        for g in 0..n_groups {
            let gen = self.next_stamp();
            self.group_bonds.clear();
            for i in 0..self.groups[g].len() {
                let id = self.broken[self.groups[g][i] as usize];
                self.blocked[id as usize] = gen;
                self.group_bonds.push(id);
            }
            self.flood_exterior(gen);
            self.interior.clear();
            let mut boundary_size = 0;
            let mut field_sum = T::zero();
            let mut sign = None;
            for w in 0..self.window.len() {
                let c = self.window[w];
                if self.visited[c] == gen {
                    continue;
                }
                self.interior.push(c);
                field_sum += self.field[c];
                for axis in 0..D {
                    for up in [false, true] {
                        let n = self.grid.step(c, axis, up).expect("interior cells are off the frame");
                        if self.visited[n] == gen {
                            boundary_size += 1;
                            if sign.is_none() {
                                sign = Spin::from_value(self.cell_spin[n]);
                            }
                        }
                    }
                }
            }
            let sign = sign.unwrap_or_else(|| {
                // Open contour (possible only with mixed explicit boundaries): take the
                // spin on the outer side of its first bond.
                let s = self.slots[self.group_bonds[0] as usize];
                let outer = if self.in_region[s.a] { s.b } else { s.a };
                Spin::from_value(self.cell_spin[outer]).unwrap_or(Spin::Up)
            });
            let view = ContourView {
                grid: &self.grid,
                slots: &self.slots,
                bond_ids: &self.group_bonds,
                interior_cells: &self.interior,
                boundary_size,
                field_sum,
                sign,
            };
            visit(&view)?;
        }
        ControlFlow::Continue(())
    }

    /// Cells of the box `[lo, hi]` (grid coordinates) in ascending index order.
    fn fill_window(&mut self, lo: [u32; D], hi: [u32; D]) {
        self.window.clear();
        let mut at = lo;
        loop {
            let idx = (0..D).map(|a| at[a] as usize * self.grid.stride(a)).sum();
            self.window.push(idx);
            let mut a = D;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                if at[a] < hi[a] {
                    at[a] += 1;
                    break;
                }
                at[a] = lo[a];
            }
        }
    }

    /// Marks the exterior of the current group. Cells outside the bounding box of the
    /// group's bonds are exterior, so the flood runs inside that box grown by one and
    /// starts from its frame; the box's cells are left in `window`.
    fn flood_exterior(&mut self, gen: u32) {
        let mut lo = [u32::MAX; D];
        let mut hi = [0u32; D];
        for &id in &self.group_bonds {
            let s = self.slots[id as usize];
            for c in [s.a, s.b] {
                for a in 0..D {
                    lo[a] = lo[a].min(self.coords[c][a]);
                    hi[a] = hi[a].max(self.coords[c][a]);
                }
            }
        }
        // Bond endpoints sit at least one cell inside the padded grid.
        for a in 0..D {
            lo[a] -= 1;
            hi[a] += 1;
        }
        self.fill_window(lo, hi);
        self.queue.clear();
        for &c in &self.window {
            let xc = &self.coords[c];
            if (0..D).any(|a| xc[a] == lo[a] || xc[a] == hi[a]) {
                self.visited[c] = gen;
                self.queue.push(c);
            }
        }
        while let Some(c) = self.queue.pop() {
            for axis in 0..D {
                let x = self.coords[c][axis];
                if x < hi[axis] {
                    let n = c + self.grid.stride(axis);
                    let id = self.bond_at[c * D + axis];
                    let open = id == NONE || self.blocked[id as usize] != gen;
                    if open && self.visited[n] != gen {
                        self.visited[n] = gen;
                        self.queue.push(n);
                    }
                }
                if x > lo[axis] {
                    let n = c - self.grid.stride(axis);
                    let id = self.bond_at[n * D + axis];
                    let open = id == NONE || self.blocked[id as usize] != gen;
                    if open && self.visited[n] != gen {
                        self.visited[n] = gen;
                        self.queue.push(n);
                    }
                }
            }
        }
    }

    /// All contours, ordered by `X(γ)` (then by first bond).
    pub fn extract(&mut self, spins: &[i8]) -> Vec<Contour<D>> {
        let mut out = Vec::new();
        let _ = self.scan(spins, |v| {
            out.push(v.to_contour());
            ControlFlow::Continue(())
        });
        out.sort_by(|a, b| a.min_site.radial_cmp(&b.min_site).then_with(|| a.broken_bonds.cmp(&b.broken_bonds)));
        out
    }

    /// True when every contour is slim for coupling `j`.
    pub fn all_slim(&mut self, spins: &[i8], j: T) -> bool {
        self.scan(spins, |v| if v.is_slim(j) { ControlFlow::Continue(()) } else { ControlFlow::Break(()) })
            .is_continue()
    }
}

/// Contours of `s` extended by its boundary condition.
pub fn extract_contours<const D: usize>(s: &SpinConfig<D>) -> Result<Vec<Contour<D>>> {
    let mut ex = ContourExtractor::<D, f64>::new(s.region(), s.boundary(), None)?;
    Ok(ex.extract(&s.values()))
}

fn flood_avoiding<const D: usize>(bonds: &HashSet<Bond<D>>, bounding_box: &Region<D>) -> HashSet<Site<D>> {
    let mut reached = HashSet::new();
    let mut queue = VecDeque::new();
    for x in delta_in(bounding_box).iter() {
        reached.insert(*x);
        queue.push_back(*x);
    }
    while let Some(x) = queue.pop_front() {
        for y in x.neighbors() {
            if bounding_box.contains(&y) && !bonds.contains(&Bond::new(x, y)) && reached.insert(y) {
                queue.push_back(y);
            }
        }
    }
    reached
}

/// Sites of `bounding_box` that cannot be reached from its frame without crossing a
/// bond of `gamma`. The box must contain the contour with a margin of one site.
pub fn interior<const D: usize>(gamma: &Contour<D>, bounding_box: &Region<D>) -> Region<D> {
    let bonds: HashSet<_> = gamma.broken_bonds.iter().copied().collect();
    let reached = flood_avoiding(&bonds, bounding_box);
    bounding_box.iter().filter(|x| !reached.contains(x)).copied().collect()
}

/// Sites separated from the frame of `bounding_box` by an odd number of bonds of
/// `gamma`. Unlike [`interior`], this excludes pockets enclosed by `γ` twice.
pub fn odd_crossing_region<const D: usize>(gamma: &Contour<D>, bounding_box: &Region<D>) -> Region<D> {
    let bonds: HashSet<_> = gamma.broken_bonds.iter().copied().collect();
    let mut parity: BTreeMap<Site<D>, bool> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for x in delta_in(bounding_box).iter() {
        parity.insert(*x, false);
        queue.push_back(*x);
    }
    while let Some(x) = queue.pop_front() {
        let px = parity[&x];
        for y in x.neighbors() {
            if bounding_box.contains(&y) && !parity.contains_key(&y) {
                parity.insert(y, px ^ bonds.contains(&Bond::new(x, y)));
                queue.push_back(y);
            }
        }
    }
    parity.into_iter().filter(|(_, odd)| *odd).map(|(x, _)| x).collect()
}

/// Rebuilds the volume spins of a uniform-boundary configuration from its contours:
/// a site's spin is the boundary spin flipped once per contour it sits oddly inside.
pub fn reconstruct_from_contours<const D: usize>(
    region: &Region<D>,
    boundary_spin: Spin,
    contours: &[Contour<D>],
) -> BTreeMap<Site<D>, Spin> {
    let bbox = region.padded_box(2);
    let mut out: BTreeMap<Site<D>, Spin> = region.iter().map(|x| (*x, boundary_spin)).collect();
    for gamma in contours {
        for x in odd_crossing_region(gamma, &bbox).iter() {
            if let Some(s) = out.get_mut(x) {
                *s = s.flipped();
            }
        }
    }
    out
}

/// Slim iff `J|∂I(γ)| > 2 Σ_{I(γ)} h`.
pub fn classify<const D: usize, T: Real>(gamma: &Contour<D>, c: &CouplingSpec<T>, f: &FieldSpec<T>) -> SlimFatTag<T> {
    let lhs = c.j() * T::of_usize(gamma.boundary_size);
    let rhs = T::of(2.0) * crate::field::field_sum(&gamma.interior, f);
    SlimFatTag::from_sides(lhs, rhs)
}

/// `e^{-βJ|∂I(γ)|}`.
pub fn peierls_weight_bound<const D: usize, T: Real>(gamma: &Contour<D>, c: &CouplingSpec<T>) -> T {
    (-c.beta() * c.j() * T::of_usize(gamma.boundary_size)).exp()
}

/// `C_p = (2d)^{-d/(d-1)}`, so that `|I| ≤ C_p |∂I|^{d/(d-1)}`.
pub fn isoperimetric_constant<T: Real>(d: usize) -> T {
    let d = T::of_usize(d);
    (T::of(2.0) * d).powf(-d / (d - T::one()))
}

/// `(J/(2 C_p h*))^{d-1} |x|^{α(d-1)}`, a lower bound on `|∂I(γ)|` for fat contours
/// with `X(γ) = x ≠ 0`.
pub fn fat_boundary_lower_bound<const D: usize, T: Real>(x: &Site<D>, c: &CouplingSpec<T>, f: &FieldSpec<T>) -> Result<T> {
    check_dimension::<D>()?;
    if x.is_origin() {
        return Err(Error::Domain("the fat-contour bound needs X(γ) ≠ 0".into()));
    }
    let dm1 = T::of_usize(D - 1);
    let cp = isoperimetric_constant::<T>(D);
    let base = c.j() / (T::of(2.0) * cp * f.h_star());
    Ok(base.powf(dm1) * T::of(x.l1_norm() as f64).powf(f.alpha() * dm1))
}

/// Calls `visit(sites, |∂K|)` for every hole-free nearest-neighbour-connected
/// `K ⊆ region` with `|K| ≤ max_size`.
pub fn for_each_hole_free_connected<const D: usize>(
    region: &Region<D>,
    max_size: usize,
    mut visit: impl FnMut(&[Site<D>], usize),
) {
    let Some((lo, hi)) = region.bounding_box() else { return };
    let grid = BoxGrid::new(lo.map(|v| v - 1), hi.map(|v| v + 1));
    let mut member = vec![0u32; grid.len()];
    let mut seen = vec![0u32; grid.len()];
    let mut stamp = 0u32;
    let mut cells = Vec::new();
    let mut stack = Vec::new();
    let mut subsets = connected_subsets_within(region, max_size, Adjacency::NearestNeighbor);
    while let Some(sites) = subsets.next_slice() {
        stamp += 1;
        cells.clear();
        let (mut wlo, mut whi) = (sites[0].0, sites[0].0);
        for s in sites {
            let c = grid.index(s).expect("subset inside grid");
            member[c] = stamp;
            cells.push(c);
            for a in 0..D {
                wlo[a] = wlo[a].min(s.0[a]);
                whi[a] = whi[a].max(s.0[a]);
            }
        }
        let mut boundary = 0;
        for &c in &cells {
            for a in 0..D {
                for up in [false, true] {
                    let n = grid.step(c, a, up).expect("padded");
                    if member[n] != stamp {
                        boundary += 1;
                    }
                }
            }
        }
        // Flood the complement inside the window [wlo-1, whi+1] from its frame.
        let wlo = wlo.map(|v| v - 1);
        let whi = whi.map(|v| v + 1);
        let in_window = |site: &Site<D>| (0..D).all(|a| site.0[a] >= wlo[a] && site.0[a] <= whi[a]);
        let on_window_frame = |site: &Site<D>| (0..D).any(|a| site.0[a] == wlo[a] || site.0[a] == whi[a]);
        let window_cells: usize = (0..D).map(|a| (whi[a] - wlo[a] + 1) as usize).product();
        let mut reached = 0usize;
        stack.clear();
        for site in Region::rect(wlo, whi).iter().filter(|s| on_window_frame(s)) {
            let c = grid.index(site).expect("window inside padded grid");
            seen[c] = stamp;
            stack.push(c);
            reached += 1;
        }
        while let Some(c) = stack.pop() {
            for a in 0..D {
                for up in [false, true] {
                    let Some(n) = grid.step(c, a, up) else { continue };
                    if seen[n] == stamp || member[n] == stamp || !in_window(&grid.site(n)) {
                        continue;
                    }
                    seen[n] = stamp;
                    reached += 1;
                    stack.push(n);
                }
            }
        }
        if reached + sites.len() == window_cells {
            visit(sites, boundary);
        }
    }
}

/// Partial fat-contour sum over single contours with interior in `B(0, box_radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatSum<T> {
    /// `Σ e^{-βJ|∂I|}` over fat interiors.
    pub sum: T,
    /// `Π_x (1 + Σ_{fat, X = x} e^{-βJ|∂I|})`.
    pub product_bound: T,
    pub fat_count: usize,
    /// Interiors were enumerated up to this many sites.
    pub max_interior_size: usize,
}

/// Enumerates hole-free connected interiors in `B(0, box_radius)` with
/// `|∂I| ≤ max_boundary` and sums the weights of the fat ones.
pub fn fat_sum_partial<const D: usize, T: Real>(
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    box_radius: u32,
    max_boundary: usize,
) -> Result<FatSum<T>> {
    check_dimension::<D>()?;
    let region = ball::<D>(box_radius)?;
    // Isoperimetry: |I| ≤ (|∂I| / 2d)^{d/(d-1)}.
    let d = D as f64;
    let iso = ((max_boundary as f64 / (2.0 * d)).powf(d / (d - 1.0)) + 1e-9).floor() as usize;
    let max_size = iso.min(region.len());
    if max_size > FAT_INTERIOR_CAP {
        return Err(Error::ResourceLimit { what: "fat interior enumeration", requested: max_size, cap: FAT_INTERIOR_CAP });
    }
    let two = T::of(2.0);
    let mut per_x: BTreeMap<Site<D>, T> = BTreeMap::new();
    let mut sum = T::zero();
    let mut fat_count = 0;
    for_each_hole_free_connected(&region, max_size, |sites, boundary| {
        if boundary > max_boundary {
            return;
        }
        let field: T = sites.iter().map(|x| f.at(x)).sum();
        let lhs = c.j() * T::of_usize(boundary);
        if lhs > two * field {
            return;
        }
        let w = (-c.beta() * lhs).exp();
        sum += w;
        fat_count += 1;
        let x = *sites.iter().min_by(|a, b| a.radial_cmp(b)).expect("nonempty");
        *per_x.entry(x).or_insert_with(T::zero) += w;
    });
    let product_bound = per_x.values().fold(T::one(), |acc, s| acc * (T::one() + *s));
    Ok(FatSum { sum, product_bound, fat_count, max_interior_size: max_size })
}
