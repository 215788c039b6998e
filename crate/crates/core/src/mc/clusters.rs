//! The minus cluster attached to the boundary shell of `Λ_L`, its shell trace, and the
//! iterated shell sequence used to show that it does not penetrate deep into the box.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::contours::{Spin, SpinConfig};
use crate::error::{Error, Result};
use crate::geometry::{Region, Site};
use crate::scalar::Real;

/// Side parameter `L` of a cube region `Λ_L`, if the region is one.
pub fn cube_side<const D: usize>(region: &Region<D>) -> Option<u32> {
    let (lo, hi) = region.bounding_box()?;
    let l = hi[0];
    let expected = (2 * l as usize + 1).pow(D as u32);
    if l < 0 || lo.iter().any(|&v| v != -l) || hi.iter().any(|&v| v != l) || region.len() != expected {
        return None;
    }
    Some(l as u32)
}

/// `|Λ_{L+1} \ Λ_L|`.
pub fn shell_size(l: u32, d: usize) -> usize {
    (2 * l as usize + 3).pow(d as u32) - (2 * l as usize + 1).pow(d as u32)
}

/// Sites of `Λ_k` joined by a path of minus spins inside `Λ_k` to a site adjacent to
/// `seeds` (sites outside `Λ_k`). Spins on the seeds themselves are not consulted.
fn minus_connected<const D: usize>(
    in_volume: impl Fn(&Site<D>) -> bool,
    spin: impl Fn(&Site<D>) -> i8,
    seeds: impl Iterator<Item = Site<D>>,
) -> Region<D> {
    let mut found = Region::new();
    let mut queue = VecDeque::new();
    for b in seeds {
        for y in b.neighbors() {
            if in_volume(&y) && spin(&y) < 0 && found.insert(y) {
                queue.push_back(y);
            }
        }
    }
    while let Some(x) = queue.pop_front() {
        for y in x.neighbors() {
            if in_volume(&y) && spin(&y) < 0 && found.insert(y) {
                queue.push_back(y);
            }
        }
    }
    found
}

fn in_cube<const D: usize>(x: &Site<D>, k: u32) -> bool {
    x.linf_norm() <= k
}

/// `ℭ_L`: sites of `Λ_L` joined to the shell `Λ_{L+1} \ Λ_L` by a nearest-neighbour
/// path of minus spins in `Λ_L`.
pub fn minus_boundary_cluster<const D: usize>(state: &SpinConfig<D>) -> Result<Region<D>> {
    let l = cube_side(state.region()).ok_or_else(|| Error::InvalidParameter("region must be a cube centred at the origin".into()))?;
    let seeds: Vec<Site<D>> = state.region().iter().filter(|x| x.linf_norm() == l).flat_map(|x| x.neighbors().filter(move |y| y.linf_norm() == l + 1)).collect();
    Ok(minus_connected(|x| in_cube(x, l), |x| state.spin(x).map_or(1, Spin::value), seeds.into_iter()))
}

/// `ℭ_{k,M}`: sites of `Λ_k` minus-connected inside `Λ_k` to `M ⊆ Λ_{k+1} \ Λ_k`.
pub fn restricted_cluster<const D: usize>(state: &SpinConfig<D>, k: u32, m: &Region<D>) -> Region<D> {
    minus_connected(|x| in_cube(x, k), |x| state.spin(x).map_or(1, Spin::value), m.iter().copied())
}

/// `|𝔐_k|` for `k = 0, …, L`: `𝔐_k = ℭ_L ∩ (Λ_{k+1} \ Λ_k)` for `k < L`, and
/// `𝔐_L` is the whole shell. The origin belongs to no `𝔐_k`.
pub fn shell_trace<const D: usize>(c_l: &Region<D>, l: u32) -> Result<Vec<usize>> {
    let mut sizes = vec![0usize; l as usize + 1];
    for x in c_l.iter() {
        let r = x.linf_norm();
        if r > l {
            return Err(Error::InvalidParameter(format!("site {x} is outside the cube")));
        }
        if r >= 1 {
            sizes[r as usize - 1] += 1;
        }
    }
    sizes[l as usize] = shell_size(l, D);
    Ok(sizes)
}

/// `a_n = (d-1) - n(1-α)/2` for `n = 0, …, n*`, with `n*` the last index where
/// `a_n ≥ 0`.
pub fn a_sequence<T: Real>(alpha: T, d: usize) -> Result<(Vec<T>, usize)> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter("alpha must be > 0".into()));
    }
    if alpha >= T::one() {
        return Err(Error::Precondition("the sequence only decreases for alpha < 1".into()));
    }
    let step = (T::one() - alpha) / T::of(2.0);
    let top = T::of_usize(d - 1);
    let eps = T::of(1e-9);
    let n_star = ((top / step) + eps).floor().to_usize().expect("finite");
    let a = (0..=n_star).map(|n| (top - T::of_usize(n) * step).max(T::zero())).collect();
    Ok((a, n_star))
}

/// Default `b = 0.009 / n*`, which satisfies `b n* < 1/100`.
pub fn default_b(n_star: usize) -> f64 {
    0.009 / n_star as f64
}

/// Default penetration depth parameter.
pub const DEFAULT_B_STAR: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSequence {
    /// `s_0, s_1, …`; shorter than `n* + 2` when the sequence stopped.
    pub s: Vec<u32>,
    pub stopped: bool,
    /// Every gap `s_{n-1} - s_n` is at most `bL`.
    pub g_event: bool,
    /// Whether `b n* < 1/100`.
    pub b_condition_holds: bool,
}

/// The shell sequence: `s_0 = L`; for `1 ≤ n ≤ n*`, `s_n` is the largest `k ≤ s_{n-1}`
/// with `|𝔐_k| ≤ L^{a_n}` (stop with `s_n = 0` if none); then `s_{n*+1}` is the
/// largest `k ≤ s_{n*}` with `|𝔐_k| = 0`, or 0.
pub fn s_sequence(m_sizes: &[usize], l: u32, alpha: f64, d: usize, b: f64) -> Result<ShellSequence> {
    if m_sizes.len() != l as usize + 1 {
        return Err(Error::InvalidParameter("one shell size per k = 0..=L is required".into()));
    }
    let (a, n_star) = a_sequence(alpha, d)?;
    let lf = l as f64;
    let largest = |upto: u32, ok: &dyn Fn(usize) -> bool| (0..=upto).rev().find(|&k| ok(m_sizes[k as usize]));
    let mut s = vec![l];
    let mut stopped = false;
    for a_n in a.iter().skip(1) {
        let cap = lf.powf(*a_n);
        match largest(*s.last().expect("nonempty"), &|m| m as f64 <= cap) {
            Some(k) => s.push(k),
            None => {
                s.push(0);
                stopped = true;
                break;
            }
        }
    }
    if !stopped {
        s.push(largest(*s.last().expect("nonempty"), &|m| m == 0).unwrap_or(0));
    }
    let g_event = s.windows(2).all(|w| (w[0] - w[1]) as f64 <= b * lf);
    Ok(ShellSequence { s, stopped, g_event, b_condition_holds: b * (n_star as f64) < 0.01 })
}

/// Everything derived from one sampled configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDiagnostics<const D: usize> {
    pub l: u32,
    pub c_l: Region<D>,
    pub m_k_sizes: Vec<usize>,
    pub s_sequence: Vec<u32>,
    pub g_event: bool,
    /// `ℭ_L ∩ Λ_{⌊L(1-b*)⌋} = ∅`.
    pub penetration_empty: bool,
}

/// Radius `⌊L(1-b*)⌋` of the inner cube probed for penetration.
pub fn inner_radius(l: u32, b_star: f64) -> u32 {
    ((l as f64) * (1.0 - b_star) + 1e-9).floor() as u32
}

/// Whether `ℭ_L` stays outside `Λ_r`.
pub fn avoids_cube<const D: usize>(c_l: &Region<D>, r: u32) -> bool {
    c_l.iter().all(|x| x.linf_norm() > r)
}

/// Shell diagnostics of one configuration on `Λ_L`.
pub fn cluster_diagnostics<const D: usize>(state: &SpinConfig<D>, alpha: f64, b: f64, b_star: f64) -> Result<ClusterDiagnostics<D>> {
    let c_l = minus_boundary_cluster(state)?;
    let l = cube_side(state.region()).expect("checked by minus_boundary_cluster");
    let m_k_sizes = shell_trace(&c_l, l)?;
    let seq = s_sequence(&m_k_sizes, l, alpha, D, b)?;
    let penetration_empty = avoids_cube(&c_l, inner_radius(l, b_star));
    Ok(ClusterDiagnostics { l, c_l, m_k_sizes, s_sequence: seq.s, g_event: seq.g_event, penetration_empty })
}

/// Fast `ℭ_L` on a chain's spin vector, for a chain over `Λ_L` in region order.
pub(crate) struct ClusterScanner {
    neighbors: Vec<u32>,
    seeds: Vec<u32>,
    radius: Vec<u32>,
    mark: Vec<bool>,
    queue: Vec<u32>,
}

impl ClusterScanner {
    pub fn new<const D: usize>(sites: &[Site<D>], l: u32) -> Self {
        let index: BTreeMap<Site<D>, u32> = sites.iter().enumerate().map(|(i, x)| (*x, i as u32)).collect();
        let mut neighbors = vec![u32::MAX; sites.len() * 2 * D];
        for (i, x) in sites.iter().enumerate() {
            for (k, y) in x.neighbors().enumerate() {
                if let Some(&n) = index.get(&y) {
                    neighbors[i * 2 * D + k] = n;
                }
            }
        }
        let seeds = sites.iter().enumerate().filter(|(_, x)| x.linf_norm() == l).map(|(i, _)| i as u32).collect();
        Self {
            neighbors,
            seeds,
            radius: sites.iter().map(|x| x.linf_norm()).collect(),
            mark: vec![false; sites.len()],
            queue: Vec::new(),
        }
    }

    /// Marks `ℭ_L` and returns the smallest `‖x‖_∞` over it (`None` if empty).
    pub fn scan(&mut self, spins: &[i8]) -> Option<u32> {
        let deg = self.neighbors.len() / spins.len().max(1);
        self.mark.fill(false);
        self.queue.clear();
        for &s in &self.seeds {
            if spins[s as usize] < 0 {
                self.mark[s as usize] = true;
                self.queue.push(s);
            }
        }
        let mut head = 0;
        let mut min_r = None::<u32>;
        while head < self.queue.len() {
            let i = self.queue[head] as usize;
            head += 1;
            min_r = Some(min_r.map_or(self.radius[i], |r| r.min(self.radius[i])));
            for k in 0..deg {
                let n = self.neighbors[i * deg + k];
                if n != u32::MAX && !self.mark[n as usize] && spins[n as usize] < 0 {
                    self.mark[n as usize] = true;
                    self.queue.push(n);
                }
            }
        }
        min_r
    }

    /// Sites of the last scan's cluster, as indices.
    pub fn members(&self) -> &[u32] {
        &self.queue
    }
}
