//! Multi-chain experiments: boundary magnetization gaps and minus-cluster penetration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contours::{Boundary, Spin};
use crate::error::{Error, Result};
use crate::field::{CouplingSpec, FieldSpec};
use crate::mc::chain::{cube, Algorithm, Chain, ChainConfig};
use crate::mc::clusters::{a_sequence, default_b, inner_radius, s_sequence, shell_size, ClusterDiagnostics, ClusterScanner};
use crate::mc::stats::{wilson_interval, Estimate};
use crate::scalar::Real;

/// Largest `L` accepted by the experiments in `d = 2`.
pub const MAX_L_D2: u32 = 128;

/// Chain length settings shared by every chain of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Retained-phase steps (after burn-in).
    pub steps: u64,
    /// Defaults to `10 L`.
    pub burn_in: Option<u64>,
    pub thin: u64,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Starting spin everywhere; defaults to the boundary spin.
    pub initial: Option<Spin>,
}

impl ChainParams {
    pub fn new(steps: u64, seed: u64) -> Self {
        Self { steps, burn_in: None, thin: 1, seed, algorithm: Algorithm::Mixed, initial: None }
    }

    fn config<const D: usize, T: Real>(
        &self,
        l: u32,
        boundary: Boundary<D>,
        c: &CouplingSpec<T>,
        f: &FieldSpec<T>,
        stream: u64,
    ) -> ChainConfig<D, T> {
        let burn_in = self.burn_in.unwrap_or(10 * l as u64);
        ChainConfig {
            region: cube(l),
            boundary,
            coupling: *c,
            field: f.clone(),
            sweeps: burn_in + self.steps,
            burn_in,
            thin: self.thin,
            seed: self.seed,
            stream,
            algorithm: self.algorithm,
            initial: self.initial,
        }
    }
}

fn check_sizes<const D: usize>(l_values: &[u32]) -> Result<()> {
    if l_values.is_empty() {
        return Err(Error::InvalidParameter("at least one L is required".into()));
    }
    let cap = if D == 2 { MAX_L_D2 } else { 32 };
    match l_values.iter().find(|&&l| l == 0 || l > cap) {
        Some(l) => Err(Error::ResourceLimit { what: "cube side L", requested: *l as usize, cap: cap as usize }),
        None => Ok(()),
    }
}

/// `E[σ(0)]` in `Λ_L` with a uniform boundary, for each `L`. Chain `i` uses stream
/// `2i` for plus and `2i + 1` for minus boundaries.
pub fn magnetization_probe<const D: usize, T: Real>(
    l_values: &[u32],
    boundary: Spin,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    params: &ChainParams,
) -> Result<Vec<(u32, Estimate)>> {
    check_sizes::<D>(l_values)?;
    let offset = u64::from(boundary == Spin::Down);
    l_values
        .par_iter()
        .enumerate()
        .map(|(i, &l)| {
            let cfg = params.config::<D, T>(l, Boundary::uniform(boundary), c, f, 2 * i as u64 + offset);
            let summary = crate::mc::chain::run_chain(&cfg)?;
            Ok((l, summary.sigma_origin.expect("the cube contains the origin")))
        })
        .collect()
}

/// `m⁺(0) - m⁻(0)` in `Λ_L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub l: u32,
    pub plus: Estimate,
    pub minus: Estimate,
    pub gap: f64,
    pub std_error: f64,
}

/// Boundary gap for each `L`, from independent plus and minus chains.
pub fn gap_probe<const D: usize, T: Real>(
    l_values: &[u32],
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    params: &ChainParams,
) -> Result<Vec<Gap>> {
    let plus = magnetization_probe::<D, T>(l_values, Spin::Up, c, f, params)?;
    let minus = magnetization_probe::<D, T>(l_values, Spin::Down, c, f, params)?;
    Ok(plus
        .into_iter()
        .zip(minus)
        .map(|((l, p), (_, m))| Gap {
            l,
            plus: p,
            minus: m,
            gap: p.mean - m.mean,
            std_error: (p.std_error * p.std_error + m.std_error * m.std_error).sqrt(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenetrationResult {
    pub l: u32,
    /// `⌊L(1-b*)⌋`.
    pub inner_radius: u32,
    pub n_samples: usize,
    /// Samples with `ℭ_L ∩ Λ_{⌊L(1-b*)⌋} = ∅`.
    pub successes: usize,
    pub fraction: f64,
    /// Autocorrelation-aware standard error of `fraction`.
    pub std_error: f64,
    pub autocorrelation_time: f64,
    /// 95% Wilson interval using the effective sample size.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fraction of samples in the event `G` (only for `α < 1`).
    pub g_fraction: Option<f64>,
}

/// Settings of the penetration experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenetrationParams {
    pub b_star: f64,
    /// Defaults to `0.009 / n*`.
    pub b: Option<f64>,
    pub n_samples: u64,
}

/// Runs a minus-boundary chain in `Λ_L` and records the penetration indicator of
/// every retained sample. With `keep_diagnostics`, also returns the per-sample
/// diagnostics.
pub fn penetration_run<const D: usize, T: Real>(
    l: u32,
    boundary: Boundary<D>,
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    pp: &PenetrationParams,
    params: &ChainParams,
    stream: u64,
    keep_diagnostics: bool,
) -> Result<(PenetrationResult, Vec<ClusterDiagnostics<D>>)> {
    if !(pp.b_star > 0.5 && pp.b_star < 1.0) {
        return Err(Error::InvalidParameter("b_star must lie in (1/2, 1)".into()));
    }
    if pp.n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let mut params = *params;
    params.steps = pp.n_samples * params.thin;
    let cfg = params.config::<D, T>(l, boundary, c, f, stream);
    let alpha = f.alpha().to_f64_lossy();
    let shell_params = if alpha < 1.0 {
        let (_, n_star) = a_sequence(alpha, D)?;
        Some(pp.b.unwrap_or_else(|| default_b(n_star)))
    } else {
        None
    };
    let r_in = inner_radius(l, pp.b_star);
    let mut chain = Chain::new(&cfg)?;
    let sites = chain.sites().to_vec();
    let mut scanner = ClusterScanner::new(&sites, l);
    let mut indicator = Vec::with_capacity(pp.n_samples as usize);
    let mut g_hits = 0usize;
    let mut diagnostics = Vec::new();
    let mut sizes = vec![0usize; l as usize + 1];
    for _ in 0..cfg.burn_in {
        chain.step();
    }
    for t in 0..cfg.sweeps - cfg.burn_in {
        chain.step();
        if t % cfg.thin != 0 {
            continue;
        }
        let min_r = scanner.scan(chain.spins());
        let empty = min_r.is_none_or(|r| r > r_in);
        indicator.push(if empty { 1.0 } else { 0.0 });
        let mut g_event = false;
        let mut s_seq = Vec::new();
        if let Some(b) = shell_params {
            sizes.fill(0);
            for &i in scanner.members() {
                let r = sites[i as usize].linf_norm();
                if r >= 1 {
                    sizes[r as usize - 1] += 1;
                }
            }
            sizes[l as usize] = shell_size(l, D);
            let seq = s_sequence(&sizes, l, alpha, D, b)?;
            g_event = seq.g_event;
            g_hits += usize::from(g_event);
            s_seq = seq.s;
        }
        if keep_diagnostics {
            diagnostics.push(ClusterDiagnostics {
                l,
                c_l: scanner.members().iter().map(|&i| sites[i as usize]).collect(),
                m_k_sizes: sizes.clone(),
                s_sequence: s_seq,
                g_event,
                penetration_empty: empty,
            });
        }
    }
    let est = Estimate::from_series(&indicator);
    let successes = indicator.iter().filter(|&&v| v > 0.0).count();
    let (ci_low, ci_high) = wilson_interval(est.mean, est.effective_samples());
    let n = indicator.len();
    Ok((
        PenetrationResult {
            l,
            inner_radius: r_in,
            n_samples: n,
            successes,
            fraction: est.mean,
            std_error: est.std_error,
            autocorrelation_time: est.autocorrelation_time,
            ci_low,
            ci_high,
            g_fraction: shell_params.map(|_| g_hits as f64 / n as f64),
        },
        diagnostics,
    ))
}

/// Penetration fractions with all-minus boundary for each `L`; chain `i` uses stream
/// `i`.
pub fn penetration_experiment<const D: usize, T: Real>(
    l_values: &[u32],
    c: &CouplingSpec<T>,
    f: &FieldSpec<T>,
    pp: &PenetrationParams,
    params: &ChainParams,
) -> Result<Vec<PenetrationResult>> {
    check_sizes::<D>(l_values)?;
    l_values
        .par_iter()
        .enumerate()
        .map(|(i, &l)| penetration_run::<D, T>(l, Boundary::Minus, c, f, pp, params, i as u64, false).map(|r| r.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_minus_has_no_penetration_free_samples() {
        // At β = 20 with no field, the minus boundary keeps Λ_L all minus.
        let c = CouplingSpec::new(1.0, 20.0).unwrap();
        let f = FieldSpec::new(1e-9, 0.5).unwrap();
        let pp = PenetrationParams { b_star: 0.6, b: None, n_samples: 20 };
        let mut params = ChainParams::new(0, 1);
        params.algorithm = Algorithm::Metropolis;
        let r = penetration_experiment::<2, f64>(&[8], &c, &f, &pp, &params).unwrap();
        assert_eq!(r[0].fraction, 0.0);
        assert_eq!(r[0].g_fraction, Some(0.0));
    }

    #[test]
    fn low_temperature_strong_field_pins_interior_plus() {
        let c = CouplingSpec::new(1.0, 20.0).unwrap();
        let f = FieldSpec::new(1.0, 0.5).unwrap();
        let pp = PenetrationParams { b_star: 0.6, b: None, n_samples: 50 };
        let mut params = ChainParams::new(0, 3);
        params.burn_in = Some(400);
        // From a minus start the chain cannot nucleate the plus interior at β = 20.
        params.initial = Some(Spin::Up);
        let (r, diag) = penetration_run::<2, f64>(16, Boundary::Minus, &c, &f, &pp, &params, 0, true).unwrap();
        assert_eq!(r.fraction, 1.0, "{r:?}");
        assert_eq!(diag.len(), 50);
        assert!(diag.iter().all(|d| d.penetration_empty));
    }

    #[test]
    fn size_limits() {
        let c = CouplingSpec::new(1.0, 1.0).unwrap();
        let f = FieldSpec::new(1.0, 0.5).unwrap();
        let p = ChainParams::new(10, 1);
        assert!(matches!(magnetization_probe::<2, f64>(&[200], Spin::Up, &c, &f, &p), Err(Error::ResourceLimit { .. })));
        assert!(magnetization_probe::<2, f64>(&[], Spin::Up, &c, &f, &p).is_err());
    }

    #[test]
    fn high_temperature_gap_is_small() {
        let c = CouplingSpec::new(1.0, 0.2).unwrap();
        let f = FieldSpec::new(1.0, 2.0).unwrap();
        let mut p = ChainParams::new(4000, 9);
        p.algorithm = Algorithm::Metropolis;
        for g in gap_probe::<2, f64>(&[8, 12], &c, &f, &p).unwrap() {
            assert!(g.gap < 0.1, "{g:?}");
        }
    }
}
