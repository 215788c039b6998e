//! Lattice-animal enumeration (Redelmeier's algorithm).
//!
//! [`AnimalWalker`] lists every connected set containing a root, each exactly once,
//! restricted to sites accepted by a caller-supplied predicate. Restricting to sites
//! greater than the root gives each finite connected set exactly once over all roots,
//! which is how [`ConnectedSubsets`] walks a region.

use std::collections::HashSet;

use super::{check_dimension, Adjacency, Region, Site};
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Real};

/// Default size cap for star-animal enumeration in `d = 2`.
pub const STAR_ANIMAL_CAP_D2: usize = 10;
/// Default size cap for star-animal enumeration in `d = 3`.
pub const STAR_ANIMAL_CAP_D3: usize = 6;

#[derive(Debug, Clone)]
struct Frame<const D: usize> {
    untried: Vec<Site<D>>,
    added: Vec<Site<D>>,
}

/// Depth-first enumerator of connected sets containing a fixed root.
#[derive(Debug, Clone)]
pub struct AnimalWalker<const D: usize> {
    max_size: usize,
    offsets: Vec<Site<D>>,
    seen: HashSet<Site<D>>,
    current: Vec<Site<D>>,
    stack: Vec<Frame<D>>,
}

impl<const D: usize> AnimalWalker<D> {
    pub fn new(root: Site<D>, max_size: usize, adjacency: Adjacency) -> Self {
        let mut seen = HashSet::new();
        seen.insert(root);
        let stack = if max_size == 0 { Vec::new() } else { vec![Frame { untried: vec![root], added: Vec::new() }] };
        Self { max_size, offsets: adjacency.offsets::<D>(), seen, current: Vec::new(), stack }
    }

    /// Advances to the next animal; `allowed` must be the same predicate on every call.
    pub fn next_animal(&mut self, allowed: impl Fn(&Site<D>) -> bool) -> Option<&[Site<D>]> {
        loop {
            let frame = self.stack.last_mut()?;
            match frame.untried.pop() {
                Some(s) => {
                    self.current.push(s);
                    let child = if self.current.len() < self.max_size {
                        let mut untried = frame.untried.clone();
                        let mut added = Vec::new();
                        for off in &self.offsets {
                            let n = s.offset(off);
                            if allowed(&n) && self.seen.insert(n) {
                                untried.push(n);
                                added.push(n);
                            }
                        }
                        Frame { untried, added }
                    } else {
                        Frame { untried: Vec::new(), added: Vec::new() }
                    };
                    self.stack.push(child);
                    return Some(&self.current);
                }
                None => {
                    let done = self.stack.pop().expect("frame present");
                    for a in &done.added {
                        self.seen.remove(a);
                    }
                    if !self.stack.is_empty() {
                        self.current.pop();
                    }
                }
            }
        }
    }
}

/// Every star-connected set containing the origin, up to a size cap.
#[derive(Debug, Clone)]
pub struct StarAnimals<const D: usize> {
    walker: AnimalWalker<D>,
}

impl<const D: usize> StarAnimals<D> {
    /// The next animal as a slice of sites in discovery order.
    pub fn next_slice(&mut self) -> Option<&[Site<D>]> {
        self.walker.next_animal(|_| true)
    }
}

impl<const D: usize> Iterator for StarAnimals<D> {
    type Item = Region<D>;

    fn next(&mut self) -> Option<Region<D>> {
        self.next_slice().map(|s| s.iter().copied().collect())
    }
}

fn default_star_cap<const D: usize>() -> usize {
    if D == 2 {
        STAR_ANIMAL_CAP_D2
    } else {
        STAR_ANIMAL_CAP_D3
    }
}

/// Star-connected sets `D ∋ 0` with `|D| ≤ max_size`, each exactly once.
pub fn star_animals<const D: usize>(max_size: usize) -> Result<StarAnimals<D>> {
    star_animals_with_cap(max_size, default_star_cap::<D>())
}

pub fn star_animals_with_cap<const D: usize>(max_size: usize, cap: usize) -> Result<StarAnimals<D>> {
    check_dimension::<D>()?;
    if max_size > cap {
        return Err(Error::ResourceLimit { what: "star animal enumeration", requested: max_size, cap });
    }
    Ok(StarAnimals { walker: AnimalWalker::new(Site::origin(), max_size, Adjacency::Star) })
}

/// `counts[m-1]` is the number of star-connected sets of size `m` containing the origin.
pub fn animal_counts<const D: usize>(max_size: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; max_size];
    let mut animals = star_animals::<D>(max_size)?;
    while let Some(a) = animals.next_slice() {
        counts[a.len() - 1] += 1;
    }
    Ok(counts)
}

/// `Σ_{D ∋ 0, |D| ≤ max_size} e^{-2βJ|D|}` over star-connected `D`.
pub fn animal_partial_sum<const D: usize, T: Real>(beta: T, coupling: T, max_size: usize) -> Result<T> {
    let counts = animal_counts::<D>(max_size)?;
    let two = T::of(2.0);
    let sum: CompensatedSum<T> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| T::of(c as f64) * (-two * beta * coupling * T::of_usize(i + 1)).exp())
        .collect();
    Ok(sum.value())
}

/// Every connected subset of a finite region with at most `max_size` sites, each once.
#[derive(Debug, Clone)]
pub struct ConnectedSubsets<const D: usize> {
    members: HashSet<Site<D>>,
    roots: Vec<Site<D>>,
    next_root: usize,
    root: Site<D>,
    max_size: usize,
    adjacency: Adjacency,
    walker: Option<AnimalWalker<D>>,
}

impl<const D: usize> ConnectedSubsets<D> {
    pub fn next_slice(&mut self) -> Option<&[Site<D>]> {
        loop {
            if self.walker.is_none() {
                let root = *self.roots.get(self.next_root)?;
                self.next_root += 1;
                self.root = root;
                self.walker = Some(AnimalWalker::new(root, self.max_size, self.adjacency));
            }
            let root = self.root;
            let members = &self.members;
            let walker = self.walker.as_mut().expect("walker set above");
            // Returning the slice straight out of this match is a conditional borrow
            // the borrow checker rejects, hence the probe and re-borrow.
            let len = walker.next_animal(|n| *n > root && members.contains(n)).map(|a| a.len());
            match len {
                Some(_) => {
                    let walker = self.walker.as_ref().expect("walker set above");
                    return Some(&walker.current);
                }
                None => self.walker = None,
            }
        }
    }
}

impl<const D: usize> Iterator for ConnectedSubsets<D> {
    type Item = Region<D>;

    fn next(&mut self) -> Option<Region<D>> {
        self.next_slice().map(|s| s.iter().copied().collect())
    }
}

/// Connected subsets of `region` (under `adjacency`) with `1 ≤ size ≤ max_size`.
pub fn connected_subsets_within<const D: usize>(
    region: &Region<D>,
    max_size: usize,
    adjacency: Adjacency,
) -> ConnectedSubsets<D> {
    ConnectedSubsets {
        members: region.iter().copied().collect(),
        roots: region.iter().copied().collect(),
        next_root: 0,
        root: Site::origin(),
        max_size,
        adjacency,
        walker: None,
    }
}
