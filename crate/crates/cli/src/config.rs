//! Run configuration and its sectioned key-value grammar.
//!
//! ```text
//! # comment
//! [experiment]
//! kind = mc-gap
//! seeds = 1, 2
//!
//! [grid]
//! L = 16, 32
//! alpha = 2
//! beta = 0.6
//! h_star = 1
//! boundary = plus, minus
//! ```
//!
//! Every value is a scalar or a comma-separated list. Unknown sections and keys are
//! rejected with their line and column.

use std::fmt;
use std::str::FromStr;

use isinglab_core::contours::Spin;
use isinglab_core::exact::{DEFAULT_SITE_CAP, HARD_SITE_CAP};
use isinglab_core::geometry::animals::{STAR_ANIMAL_CAP_D2, STAR_ANIMAL_CAP_D3};
use isinglab_core::geometry::{ball_volume, DEFAULT_BALL_CAP};
use isinglab_core::mc::experiments::MAX_L_D2;
use isinglab_core::mc::Algorithm;
use isinglab_core::{CouplingSpec64, FieldSpec64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable overriding the enumeration cap.
pub const CAP_ENV: &str = "ISINGLAB_CAP_SITES";

const MAX_L_D3: u32 = 32;
const MAX_PEIERLS_INTERIOR: usize = 12;
const MAX_PEIERLS_BOX: u32 = 8;
const MAX_FAT_INTERIOR: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        ConfigError::Parse { line, column, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ExactVerify,
    PeierlsScan,
    FieldScan,
    McGap,
    Penetration,
    Animals,
    FatSum,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::ExactVerify,
        ExperimentKind::PeierlsScan,
        ExperimentKind::FieldScan,
        ExperimentKind::McGap,
        ExperimentKind::Penetration,
        ExperimentKind::Animals,
        ExperimentKind::FatSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ExactVerify => "exact-verify",
            ExperimentKind::PeierlsScan => "peierls-scan",
            ExperimentKind::FieldScan => "field-scan",
            ExperimentKind::McGap => "mc-gap",
            ExperimentKind::Penetration => "penetration",
            ExperimentKind::Animals => "animals",
            ExperimentKind::FatSum => "fat-sum",
        }
    }

    /// Grid axes that span this kind's parameter grid. Any other axis in the config
    /// is rejected.
    pub fn axes(self) -> &'static [Axis] {
        use Axis::*;
        match self {
            ExperimentKind::ExactVerify => &[D, L, Alpha, Beta, HStar, J, Boundary],
            ExperimentKind::PeierlsScan => &[D, L, Alpha, Beta, HStar, J],
            ExperimentKind::FieldScan => &[D, Alpha, HStar],
            ExperimentKind::McGap | ExperimentKind::Penetration => &[D, L, Alpha, Beta, HStar, J, Boundary, Seed],
            ExperimentKind::Animals => &[D, Beta, J],
            ExperimentKind::FatSum => &[D, Alpha, Beta, HStar, J],
        }
    }

    pub fn uses(self, axis: Axis) -> bool {
        self.axes().contains(&axis)
    }

    pub fn is_monte_carlo(self) -> bool {
        matches!(self, ExperimentKind::McGap | ExperimentKind::Penetration)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    D,
    L,
    Alpha,
    Beta,
    HStar,
    J,
    Boundary,
    Seed,
}

impl Axis {
    fn key(self) -> &'static str {
        match self {
            Axis::D => "d",
            Axis::L => "L",
            Axis::Alpha => "alpha",
            Axis::Beta => "beta",
            Axis::HStar => "h_star",
            Axis::J => "J",
            Axis::Boundary => "boundary",
            Axis::Seed => "seeds",
        }
    }
}

/// Lists spanning the parameter grid. Empty lists mean "not given".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: Vec<usize>,
    #[serde(rename = "L")]
    pub l: Vec<u32>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub h_star: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    pub boundary: Vec<Spin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub steps: u64,
    /// Defaults to `10 L`.
    pub burn_in: Option<u64>,
    pub thin: u64,
    pub algorithm: Algorithm,
    /// Defaults to the boundary spin.
    pub initial: Option<Spin>,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self { steps: 10_000, burn_in: None, thin: 1, algorithm: Algorithm::Mixed, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    /// Largest interior (peierls-scan) or animal (animals) size.
    pub max_size: usize,
    /// Radii for field-scan.
    pub radii: Vec<u32>,
    pub b_star: f64,
    pub b: Option<f64>,
    /// Retained samples per penetration chain.
    pub samples: u64,
    /// Ball radius for fat-sum.
    pub box_radius: u32,
    pub max_boundary: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            max_size: 6,
            radii: vec![10, 20, 50, 100, 200],
            b_star: 0.6,
            b: None,
            samples: 1000,
            box_radius: 5,
            max_boundary: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest region handed to exact enumeration.
    pub sites: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self { sites: DEFAULT_SITE_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub grid: Grid,
    pub seeds: Vec<u64>,
    pub chain: ChainSettings,
    pub scan: ScanSettings,
    pub caps: Caps,
    /// Output directory requested by the config; the command line wins.
    #[serde(skip)]
    pub output: Option<String>,
}

/// One point of the parameter grid. Axes not used by the kind are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub l: Option<u32>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub h_star: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub boundary: Option<Spin>,
    pub seed: Option<u64>,
}

impl GridPoint {
    pub fn field(&self) -> Result<FieldSpec64, ConfigError> {
        let (h, a) = (self.h_star.unwrap_or(1.0), self.alpha.unwrap_or(1.0));
        FieldSpec64::new(h, a).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn coupling(&self) -> Result<CouplingSpec64, ConfigError> {
        CouplingSpec64::new(self.j.unwrap_or(1.0), self.beta.unwrap_or(0.0)).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

impl RunConfig {
    /// Cartesian product of the used axes in a fixed order: d, L, alpha, beta, h_star,
    /// J, boundary, seed (last varies fastest).
    pub fn points(&self) -> Vec<GridPoint> {
        let k = self.kind;
        fn axis<T: Copy>(used: bool, values: &[T]) -> Vec<Option<T>> {
            if used {
                values.iter().map(|&v| Some(v)).collect()
            } else {
                vec![None]
            }
        }
        let d = if self.grid.d.is_empty() { vec![2] } else { self.grid.d.clone() };
        let ls = axis(k.uses(Axis::L), &self.grid.l);
        let alphas = axis(k.uses(Axis::Alpha), &self.grid.alpha);
        let betas = axis(k.uses(Axis::Beta), &self.grid.beta);
        let hs = axis(k.uses(Axis::HStar), &self.grid.h_star);
        let js = axis(k.uses(Axis::J), if self.grid.j.is_empty() { &[1.0] } else { &self.grid.j });
        let bs = axis(k.uses(Axis::Boundary), if self.grid.boundary.is_empty() { &[Spin::Down] } else { &self.grid.boundary });
        let seeds = axis(k.uses(Axis::Seed), if self.seeds.is_empty() { &[0] } else { &self.seeds });
        let mut out = Vec::new();
        for &d in &d {
            for &l in &ls {
                for &alpha in &alphas {
                    for &beta in &betas {
                        for &h_star in &hs {
                            for &j in &js {
                                for &boundary in &bs {
                                    for &seed in &seeds {
                                        out.push(GridPoint {
                                            index: out.len(),
                                            d,
                                            l,
                                            alpha,
                                            beta,
                                            h_star,
                                            j,
                                            boundary,
                                            seed,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Checks every grid point against the preconditions of its experiment.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let k = self.kind;
        let required = [(Axis::L, self.grid.l.is_empty()), (Axis::Alpha, self.grid.alpha.is_empty()), (Axis::Beta, self.grid.beta.is_empty()), (Axis::HStar, self.grid.h_star.is_empty())];
        for (axis, missing) in required {
            if k.uses(axis) && missing {
                return invalid(format!("{} needs at least one value of {}", k, axis.key()));
            }
        }
        let given = [
            (Axis::L, !self.grid.l.is_empty()),
            (Axis::Alpha, !self.grid.alpha.is_empty()),
            (Axis::Beta, !self.grid.beta.is_empty()),
            (Axis::HStar, !self.grid.h_star.is_empty()),
            (Axis::J, !self.grid.j.is_empty()),
            (Axis::Boundary, !self.grid.boundary.is_empty()),
            (Axis::Seed, !self.seeds.is_empty()),
        ];
        for (axis, present) in given {
            if present && !k.uses(axis) {
                return invalid(format!("{} is not a parameter of {}", axis.key(), k));
            }
        }
        if self.caps.sites == 0 || self.caps.sites > HARD_SITE_CAP {
            return invalid(format!("the site cap must lie in 1..={HARD_SITE_CAP}"));
        }
        if k.is_monte_carlo() {
            if self.chain.steps == 0 {
                return invalid("steps must be >= 1".into());
            }
            if self.chain.thin == 0 {
                return invalid("thin must be >= 1".into());
            }
        }
        if k == ExperimentKind::Penetration {
            if !(self.scan.b_star > 0.5 && self.scan.b_star < 1.0) {
                return invalid("b_star must lie in (1/2, 1)".into());
            }
            if self.scan.b.is_some_and(|b| !(b > 0.0)) {
                return invalid("b must be > 0".into());
            }
            if self.scan.samples == 0 {
                return invalid("samples must be >= 1".into());
            }
        }
        if k == ExperimentKind::FieldScan && (self.scan.radii.is_empty() || self.scan.radii.contains(&0)) {
            return invalid("radii must be a nonempty list of values >= 1".into());
        }
        let points = self.points();
        if points.is_empty() {
            return invalid("the parameter grid is empty".into());
        }
        for p in &points {
            self.validate_point(p)?;
        }
        Ok(())
    }

    fn validate_point(&self, p: &GridPoint) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if p.d != 2 && p.d != 3 {
            return invalid(format!("d must be 2 or 3, got {}", p.d));
        }
        if self.kind.uses(Axis::Alpha) || self.kind.uses(Axis::HStar) {
            p.field()?;
        }
        if self.kind.uses(Axis::Beta) || self.kind.uses(Axis::J) {
            p.coupling()?;
        }
        let l = p.l.unwrap_or(0);
        if self.kind.uses(Axis::L) && l == 0 {
            return invalid("L must be >= 1".into());
        }
        match self.kind {
            ExperimentKind::ExactVerify => {
                let sites = (l as usize).pow(p.d as u32);
                if sites > self.caps.sites {
                    return invalid(format!("a side-{l} box in d={} has {sites} sites, above the cap of {}", p.d, self.caps.sites));
                }
            }
            ExperimentKind::PeierlsScan => {
                if l > MAX_PEIERLS_BOX {
                    return invalid(format!("peierls-scan box side must be <= {MAX_PEIERLS_BOX}"));
                }
                if self.scan.max_size == 0 || self.scan.max_size > MAX_PEIERLS_INTERIOR.min(self.caps.sites) {
                    return invalid(format!("max_size must lie in 1..={}", MAX_PEIERLS_INTERIOR.min(self.caps.sites)));
                }
            }
            ExperimentKind::FieldScan => {
                let r = *self.scan.radii.iter().max().expect("validated nonempty");
                if ball_volume(r as u64, p.d) > DEFAULT_BALL_CAP as u128 {
                    return invalid(format!("ball of radius {r} in d={} exceeds {DEFAULT_BALL_CAP} sites", p.d));
                }
            }
            ExperimentKind::McGap | ExperimentKind::Penetration => {
                let cap = if p.d == 2 { MAX_L_D2 } else { MAX_L_D3 };
                if l > cap {
                    return invalid(format!("L must be <= {cap} in d={}", p.d));
                }
            }
            ExperimentKind::Animals => {
                let cap = if p.d == 2 { STAR_ANIMAL_CAP_D2 } else { STAR_ANIMAL_CAP_D3 };
                if self.scan.max_size == 0 || self.scan.max_size > cap {
                    return invalid(format!("max_size must lie in 1..={cap} in d={}", p.d));
                }
            }
            ExperimentKind::FatSum => {
                let d = p.d as f64;
                let iso = ((self.scan.max_boundary as f64 / (2.0 * d)).powf(d / (d - 1.0)) + 1e-9).floor() as usize;
                if self.scan.max_boundary == 0 || iso > MAX_FAT_INTERIOR {
                    return invalid(format!("max_boundary {} allows interiors above {MAX_FAT_INTERIOR} sites", self.scan.max_boundary));
                }
            }
        }
        Ok(())
    }

    /// Applies `ISINGLAB_CAP_SITES` when set.
    pub fn apply_cap_override(&mut self, value: Option<&str>) -> Result<(), ConfigError> {
        let Some(v) = value else { return Ok(()) };
        let cap: usize = v.trim().parse().map_err(|_| ConfigError::Invalid(format!("{CAP_ENV} must be an integer, got {v:?}")))?;
        if cap == 0 || cap > HARD_SITE_CAP {
            return Err(ConfigError::Invalid(format!("{CAP_ENV} must lie in 1..={HARD_SITE_CAP}, got {cap}")));
        }
        self.caps.sites = cap;
        Ok(())
    }
}

struct Value<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl Value<'_> {
    fn items(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for part in self.text.split(',') {
            let lead = part.len() - part.trim_start().len();
            out.push((self.column + offset + lead, part.trim()));
            offset += part.len() + 1;
        }
        out
    }

    fn list<T: FromStr>(&self, what: &str) -> Result<Vec<T>, ConfigError> {
        self.items()
            .into_iter()
            .map(|(col, item)| {
                if item.is_empty() {
                    return Err(ConfigError::at(self.line, col, "empty list item"));
                }
                item.parse().map_err(|_| ConfigError::at(self.line, col, format!("expected {what}, got {item:?}")))
            })
            .collect()
    }

    fn scalar<T: FromStr>(&self, what: &str) -> Result<T, ConfigError> {
        let mut v = self.list(what)?;
        if v.len() != 1 {
            return Err(ConfigError::at(self.line, self.column, "expected a single value"));
        }
        Ok(v.remove(0))
    }

    fn with<T>(&self, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, ConfigError> {
        self.items()
            .into_iter()
            .map(|(col, item)| f(item).ok_or_else(|| ConfigError::at(self.line, col, format!("expected {what}, got {item:?}"))))
            .collect()
    }
}

fn parse_spin(s: &str) -> Option<Spin> {
    match s {
        "plus" | "+" => Some(Spin::Up),
        "minus" | "-" => Some(Spin::Down),
        _ => None,
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_for(text, None)
}

/// As [`parse_config`]; `kind` supplies the experiment kind when the text has none and
/// must agree with it otherwise.
pub fn parse_config_for(text: &str, kind: Option<ExperimentKind>) -> Result<RunConfig, ConfigError> {
    let cfg = parse_unvalidated(text, kind)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_unvalidated(text: &str, cli_kind: Option<ExperimentKind>) -> Result<RunConfig, ConfigError> {
    let mut section: Option<String> = None;
    let mut kind: Option<(ExperimentKind, usize, usize)> = None;
    let mut grid = Grid::default();
    let mut seeds = Vec::new();
    let mut chain = ChainSettings::default();
    let mut scan = ScanSettings::default();
    let mut caps = Caps::default();
    let mut output = None;
    let mut seen: Vec<(String, String)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ConfigError::at(line, indent + 1, "section header must end with ']'"));
            };
            let name = name.trim();
            if !["experiment", "grid", "chain", "scan", "caps"].contains(&name) {
                return Err(ConfigError::at(line, indent + 2, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(ConfigError::at(line, indent + 1, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        if !is_identifier(key) {
            return Err(ConfigError::at(line, indent + 1, format!("invalid key {key:?}")));
        }
        let Some(sec) = section.as_deref() else {
            return Err(ConfigError::at(line, indent + 1, "key outside of any section"));
        };
        if seen.iter().any(|(s, k)| s == sec && k == key) {
            return Err(ConfigError::at(line, indent + 1, format!("duplicate key {key:?} in [{sec}]")));
        }
        seen.push((sec.to_string(), key.to_string()));
        let after = &content[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let value_column = eq + 2 + lead;
        if after.trim().is_empty() {
            return Err(ConfigError::at(line, value_column, format!("missing value for {key:?}")));
        }
        let value = Value { text: after.trim(), line, column: value_column };
        let unknown = || Err(ConfigError::at(line, indent + 1, format!("unknown key {key:?} in [{sec}]")));
        match (sec, key) {
            ("experiment", "kind") => {
                let k = value.with("an experiment kind", |s| s.parse().ok())?;
                if k.len() != 1 {
                    return Err(ConfigError::at(line, value_column, "expected a single value"));
                }
                kind = Some((k[0], line, value_column));
            }
            ("experiment", "seeds") => seeds = value.list("a non-negative integer seed")?,
            ("experiment", "output") => output = Some(value.text.trim().to_string()),
            ("grid", "d") => grid.d = value.list("a dimension")?,
            ("grid", "L") => grid.l = value.list("a positive integer")?,
            ("grid", "alpha") => grid.alpha = value.list("a number")?,
            ("grid", "beta") => grid.beta = value.list("a number")?,
            ("grid", "h_star") => grid.h_star = value.list("a number")?,
            ("grid", "J") => grid.j = value.list("a number")?,
            ("grid", "boundary") => grid.boundary = value.with("plus or minus", parse_spin)?,
            ("chain", "steps") => chain.steps = value.scalar("an integer")?,
            ("chain", "burn_in") => chain.burn_in = Some(value.scalar("an integer")?),
            ("chain", "thin") => chain.thin = value.scalar("an integer")?,
            ("chain", "algorithm") => {
                let a = value.with("metropolis, wolff or mixed", |s| s.parse::<Algorithm>().ok())?;
                if a.len() != 1 {
                    return Err(ConfigError::at(line, value_column, "expected a single value"));
                }
                chain.algorithm = a[0];
            }
            ("chain", "initial") => {
                let s = value.with("plus or minus", parse_spin)?;
                if s.len() != 1 {
                    return Err(ConfigError::at(line, value_column, "expected a single value"));
                }
                chain.initial = Some(s[0]);
            }
            ("scan", "max_size") => scan.max_size = value.scalar("an integer")?,
            ("scan", "radii") => scan.radii = value.list("a positive integer")?,
            ("scan", "b_star") => scan.b_star = value.scalar("a number")?,
            ("scan", "b") => scan.b = Some(value.scalar("a number")?),
            ("scan", "samples") => scan.samples = value.scalar("an integer")?,
            ("scan", "box_radius") => scan.box_radius = value.scalar("an integer")?,
            ("scan", "max_boundary") => scan.max_boundary = value.scalar("an integer")?,
            ("caps", "sites") => caps.sites = value.scalar("an integer")?,
            _ => return unknown(),
        }
    }

    let kind = match (kind, cli_kind) {
        (Some((k, line, column)), Some(c)) if k != c => {
            return Err(ConfigError::at(line, column, format!("config declares {k} but {c} was requested")));
        }
        (Some((k, _, _)), _) => k,
        (None, Some(c)) => c,
        (None, None) => return Err(ConfigError::Invalid("no experiment kind given".into())),
    };
    Ok(RunConfig { kind, grid, seeds, chain, scan, caps, output })
}
