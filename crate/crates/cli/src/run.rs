//! Executes the grid points of a configuration.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::mpsc;

use isinglab_core::contours::{fat_sum_partial, for_each_hole_free_connected, Boundary, Spin};
use isinglab_core::exact::{peierls_ratio_check, theorem32_check_with, Ensemble};
use isinglab_core::field::{ball_field_sum, peierls_condition, surface_normalized_ball_sum};
use isinglab_core::geometry::animals::animal_counts;
use isinglab_core::geometry::{Region, Site, DEFAULT_BALL_CAP};
use isinglab_core::mc::chain::cube;
use isinglab_core::mc::experiments::{penetration_run, PenetrationParams};
use isinglab_core::mc::{run_chain, ChainConfig, ChainParams, Estimate, RNG_NAME};
use isinglab_core::{CouplingSpec64, FieldSpec64};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ExperimentKind, GridPoint, RunConfig};
use crate::output::{artifact_version, fingerprint, num, opt, schema, RecordWriter, RunPaths, RunRecord, Status};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub diagnostics: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), workers: None, diagnostics: false }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub paths: RunPaths,
    pub records: Vec<RunRecord>,
}

impl RunOutput {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

struct PointResult {
    rows: Vec<Vec<String>>,
    rng: Option<String>,
    diagnostics: Vec<String>,
}

/// Runs every grid point of a validated configuration, writing CSV rows and one JSON
/// manifest per point as they complete. Errors inside a point are recorded in its
/// manifest; only I/O errors abort.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let fp = fingerprint(cfg);
    let paths = RunPaths::new(&opts.out_dir, cfg.kind, &fp);
    let mut writer = RecordWriter::create(paths.clone(), cfg.kind)?;
    if opts.diagnostics && cfg.kind == ExperimentKind::Penetration {
        fs::create_dir_all(&paths.diagnostics)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    let points = cfg.points();
    let (tx, rx) = mpsc::channel::<io::Result<RunRecord>>();

    let version = artifact_version();
    let records = std::thread::scope(|scope| {
        let handle = scope.spawn(move || -> io::Result<Vec<RunRecord>> {
            for r in rx {
                writer.push(r?)?;
            }
            writer.finish()
        });
        pool.install(|| {
            points.par_iter().for_each_with(tx, |tx, p| {
                let started_at = chrono::Utc::now().to_rfc3339();
                let outcome = run_point(cfg, p, opts.diagnostics);
                let finished_at = chrono::Utc::now().to_rfc3339();
                let record = match outcome {
                    Ok(res) => write_diagnostics(&paths, p.index, &res.diagnostics).map(|_| RunRecord {
                        kind: cfg.kind,
                        fingerprint: fp.clone(),
                        artifact_version: version.clone(),
                        config: cfg.clone(),
                        point: p.clone(),
                        started_at,
                        finished_at,
                        status: Status::Ok,
                        error: None,
                        rng: res.rng,
                        columns: schema(cfg.kind).iter().map(|s| s.to_string()).collect(),
                        rows: res.rows,
                    }),
                    Err(e) => Ok(RunRecord {
                        kind: cfg.kind,
                        fingerprint: fp.clone(),
                        artifact_version: version.clone(),
                        config: cfg.clone(),
                        point: p.clone(),
                        started_at,
                        finished_at,
                        status: Status::Error,
                        error: Some(e.to_string()),
                        rng: None,
                        columns: schema(cfg.kind).iter().map(|s| s.to_string()).collect(),
                        rows: Vec::new(),
                    }),
                };
                // The writer only hangs up after an I/O failure, which it reports itself.
                let _ = tx.send(record);
            });
        });
        handle.join().expect("writer thread panicked")
    })?;
    Ok(RunOutput { paths, records })
}

fn write_diagnostics(paths: &RunPaths, index: usize, lines: &[String]) -> io::Result<()> {
    if lines.is_empty() {
        return Ok(());
    }
    let mut w = BufWriter::new(fs::File::create(paths.diagnostics_file(index))?);
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()
}

fn run_point(cfg: &RunConfig, p: &GridPoint, diagnostics: bool) -> isinglab_core::Result<PointResult> {
    match p.d {
        2 => run_point_d::<2>(cfg, p, diagnostics),
        3 => run_point_d::<3>(cfg, p, diagnostics),
        d => Err(isinglab_core::Error::UnsupportedDimension(d)),
    }
}

/// Side-`L` box holding the origin: `[-⌊L/2⌋, L - 1 - ⌊L/2⌋]^d`.
pub fn side_box<const D: usize>(l: u32) -> Region<D> {
    let lo = -((l / 2) as i32);
    Region::rect([lo; D], [lo + l as i32 - 1; D])
}

fn format_sites<const D: usize>(sites: &[Site<D>]) -> String {
    sites.iter().map(|s| s.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(":")).collect::<Vec<_>>().join(";")
}

struct Prefix(Vec<String>);

impl Prefix {
    fn params(p: &GridPoint, algorithm: &str) -> Self {
        Prefix(vec![
            opt(p.l),
            p.d.to_string(),
            opt(p.alpha.map(num)),
            opt(p.beta.map(num)),
            opt(p.h_star.map(num)),
            opt(p.j.map(num)),
            opt(p.boundary.map(Spin::name)),
            algorithm.to_string(),
            opt(p.seed),
        ])
    }

    fn row(&self, observable: &str, mean: f64, std_error: Option<f64>, n: Option<u64>, tau: Option<f64>) -> Vec<String> {
        let mut r = self.0.clone();
        r.extend([observable.to_string(), num(mean), opt(std_error.map(num)), opt(n), opt(tau.map(num))]);
        r
    }

    fn estimate(&self, observable: &str, e: &Estimate) -> Vec<String> {
        self.row(observable, e.mean, Some(e.std_error), Some(e.n_samples as u64), Some(e.autocorrelation_time))
    }
}

fn run_point_d<const D: usize>(cfg: &RunConfig, p: &GridPoint, diagnostics: bool) -> isinglab_core::Result<PointResult> {
    let field = || -> isinglab_core::Result<FieldSpec64> { FieldSpec64::new(p.h_star.unwrap_or(1.0), p.alpha.unwrap_or(1.0)) };
    let coupling = || CouplingSpec64::new(p.j.unwrap_or(1.0), p.beta.unwrap_or(0.0));
    let mut out = PointResult { rows: Vec::new(), rng: None, diagnostics: Vec::new() };
    match cfg.kind {
        ExperimentKind::ExactVerify => {
            let (c, f) = (coupling()?, field()?);
            let l = p.l.expect("exact-verify has L");
            let boundary = p.boundary.expect("exact-verify has a boundary");
            let template = Ensemble::new(side_box::<D>(l), Boundary::uniform(boundary), c, f).with_cap(cfg.caps.sites)?;
            let res = template.run()?;
            let prefix = Prefix::params(p, "exact");
            let n = Some(res.config_count);
            out.rows.push(prefix.row("log_z", res.log_z, None, n, None));
            for (name, v) in &res.expectations {
                out.rows.push(prefix.row(name, *v, None, n, None));
            }
            let t = theorem32_check_with(template)?;
            out.rows.push(prefix.row("slim_log_ratio", t.log_ratio, None, None, None));
            out.rows.push(prefix.row("field_sum", t.field_sum, None, None, None));
            if let Some(c2) = t.fitted_c2 {
                out.rows.push(prefix.row("fitted_c2", c2, None, None, None));
            }
        }
        ExperimentKind::PeierlsScan => {
            let (c, f) = (coupling()?, field()?);
            let l = p.l.expect("peierls-scan has L");
            let region = side_box::<D>(l);
            let mut interiors = Vec::new();
            for_each_hole_free_connected(&region, cfg.scan.max_size, |sites, boundary| {
                interiors.push((Region::from_iter(sites.iter().copied()), format_sites(sites), boundary));
            });
            let head = Prefix::params(p, "").0;
            for (interior, label, boundary) in interiors {
                if !peierls_condition(&interior, &c, &f)?.holds {
                    continue;
                }
                let r = peierls_ratio_check(&region, &interior, &c, &f)?;
                let mut row = head[..6].to_vec();
                row.extend([
                    interior.len().to_string(),
                    label,
                    boundary.to_string(),
                    num(r.ratio),
                    num(r.bound),
                    r.holds.to_string(),
                ]);
                out.rows.push(row);
            }
        }
        ExperimentKind::FieldScan => {
            let f = field()?;
            for &r in &cfg.scan.radii {
                let total = ball_field_sum::<D, f64>(r, &f, DEFAULT_BALL_CAP)?;
                let norm = surface_normalized_ball_sum::<D, f64>(r, &f)?;
                out.rows.push(vec![
                    p.d.to_string(),
                    opt(p.alpha.map(num)),
                    opt(p.h_star.map(num)),
                    r.to_string(),
                    num(total),
                    num(norm),
                ]);
            }
        }
        ExperimentKind::McGap | ExperimentKind::Penetration => {
            let (c, f) = (coupling()?, field()?);
            let l = p.l.expect("monte carlo has L");
            let boundary = p.boundary.expect("monte carlo has a boundary");
            let seed = p.seed.expect("monte carlo has a seed");
            // Plus and minus chains at the same seed use distinct streams.
            let stream = match boundary {
                Spin::Up => 0,
                Spin::Down => 1,
            };
            out.rng = Some(format!("{RNG_NAME}; seed {seed}; stream {stream}"));
            let ch = &cfg.chain;
            let prefix = Prefix::params(p, ch.algorithm.name());
            if cfg.kind == ExperimentKind::McGap {
                let burn_in = ch.burn_in.unwrap_or(10 * l as u64);
                let chain = ChainConfig {
                    region: cube::<D>(l),
                    boundary: Boundary::uniform(boundary),
                    coupling: c,
                    field: f,
                    sweeps: burn_in + ch.steps,
                    burn_in,
                    thin: ch.thin,
                    seed,
                    stream,
                    algorithm: ch.algorithm,
                    initial: ch.initial,
                };
                let s = run_chain(&chain)?;
                if let Some(e) = &s.sigma_origin {
                    out.rows.push(prefix.estimate("sigma_origin", e));
                }
                out.rows.push(prefix.estimate("magnetization", &s.magnetization));
            } else {
                let params = ChainParams {
                    steps: ch.steps,
                    burn_in: ch.burn_in,
                    thin: ch.thin,
                    seed,
                    algorithm: ch.algorithm,
                    initial: ch.initial,
                };
                let pp = PenetrationParams { b_star: cfg.scan.b_star, b: cfg.scan.b, n_samples: cfg.scan.samples };
                let (r, diags) =
                    penetration_run::<D, f64>(l, Boundary::uniform(boundary), &c, &f, &pp, &params, stream, diagnostics)?;
                let mut row = prefix.row(
                    "penetration_empty",
                    r.fraction,
                    Some(r.std_error),
                    Some(r.n_samples as u64),
                    Some(r.autocorrelation_time),
                );
                row.extend([r.successes.to_string(), num(r.ci_low), num(r.ci_high), r.inner_radius.to_string(), opt(r.g_fraction.map(num))]);
                out.rows.push(row);
                out.diagnostics = diags.iter().map(|d| serde_json::to_string(d).expect("diagnostics serialize")).collect();
            }
        }
        ExperimentKind::Animals => {
            let (beta, j) = (p.beta.expect("animals has beta"), p.j.unwrap_or(1.0));
            let counts = animal_counts::<D>(cfg.scan.max_size)?;
            let mut partial = isinglab_core::scalar::CompensatedSum::<f64>::new();
            for (i, &n) in counts.iter().enumerate() {
                let size = i + 1;
                partial.add(n as f64 * (-2.0 * beta * j * size as f64).exp());
                out.rows.push(vec![
                    p.d.to_string(),
                    num(beta),
                    num(j),
                    size.to_string(),
                    n.to_string(),
                    num(partial.value()),
                ]);
            }
        }
        ExperimentKind::FatSum => {
            let (c, f) = (coupling()?, field()?);
            let s = fat_sum_partial::<D, f64>(&c, &f, cfg.scan.box_radius, cfg.scan.max_boundary)?;
            let head = Prefix::params(p, "").0;
            let mut row = vec![head[1].clone(), head[2].clone(), head[3].clone(), head[4].clone(), head[5].clone()];
            row.extend([
                cfg.scan.box_radius.to_string(),
                cfg.scan.max_boundary.to_string(),
                num(s.sum),
                num(s.product_bound),
                s.fat_count.to_string(),
                s.max_interior_size.to_string(),
            ]);
            out.rows.push(row);
        }
    }
    debug_assert!(out.rows.iter().all(|r| r.len() == schema(cfg.kind).len()));
    Ok(out)
}
