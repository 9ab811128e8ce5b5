//! Experiment configuration: a TOML file merged with command-line overrides.
//!
//! Lists of degrees and levels accept integers, arrays, or text such as
//! `"2..5"` (inclusive), `"0,2,4"` and, for levels, `"all"`.

use std::path::{Path, PathBuf};

use riga_core::assembly::dof_count;
use riga_core::eigensolver::{SolverOptions, SpectrumRequest};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A list written as a number, an array, or a range/list string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ListSpec {
    One(u64),
    Many(Vec<u64>),
    Text(String),
}

impl ListSpec {
    /// Expand to sorted, deduplicated values. `all` expands to `0..=all_max`
    /// when given.
    pub fn expand(&self, all_max: Option<u64>) -> Result<Vec<u64>, CliError> {
        let mut out = match self {
            Self::One(v) => vec![*v],
            Self::Many(v) => v.clone(),
            Self::Text(s) => parse_list(s, all_max)?,
        };
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Parse `"3"`, `"2..5"`, `"0,2..3"` or `"all"`.
pub fn parse_list(text: &str, all_max: Option<u64>) -> Result<Vec<u64>, CliError> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("all") {
        return all_max
            .map(|m| (0..=m).collect())
            .ok_or_else(|| CliError::Config("`all` is only valid for levels".into()));
    }
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("`{s}` is not a non-negative integer")))
        };
        match item.split_once("..") {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(CliError::Config(format!("empty range `{item}`")));
                }
                out.extend(a..=b);
            }
            None => out.push(num(item)?),
        }
    }
    Ok(out)
}

/// `nev` as a count or `"all"` (the IGA DOF count of each degree).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NevSpec {
    Count(usize),
    Text(String),
}

impl NevSpec {
    fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::Text("all".into()));
        }
        text.trim()
            .parse()
            .map(Self::Count)
            .map_err(|_| CliError::Config(format!("nev `{text}` is neither a count nor `all`")))
    }
}

/// Contents of a config file; every field may also come from a flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub d: Option<u32>,
    pub ne: Option<usize>,
    pub degrees: Option<ListSpec>,
    pub levels: Option<ListSpec>,
    pub nev: Option<NevSpec>,
    pub interval: Option<[f64; 2]>,
    pub lanczos_m: Option<usize>,
    pub keep: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub solve: Option<bool>,
    pub export_matrices: Option<bool>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

/// Flag overrides, all optional. Text fields use the list syntax.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub d: Option<u32>,
    pub ne: Option<usize>,
    pub degrees: Option<String>,
    pub levels: Option<String>,
    pub nev: Option<String>,
    pub interval: Option<[f64; 2]>,
    pub lanczos_m: Option<usize>,
    pub keep: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub no_solve: bool,
    pub export_matrices: bool,
}

/// Which eigenpairs every sweep point computes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Request {
    Lowest(usize),
    /// As many as the IGA space of the same degree has DOFs.
    LowestIga,
    Interval(f64, f64),
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: u32,
    pub ne: usize,
    pub degrees: Vec<usize>,
    pub levels: Vec<u32>,
    pub request: Request,
    pub lanczos_m: usize,
    pub keep: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Run the eigensolver; otherwise only the symbolic FLOP sweep is emitted.
    pub solve: bool,
    pub export_matrices: bool,
}

impl ExperimentConfig {
    /// Merge file values with overrides (overrides win) and validate.
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Self, CliError> {
        let defaults = SolverOptions::default();
        let d = flags.d.or(file.d).unwrap_or(2);
        let ne = flags
            .ne
            .or(file.ne)
            .ok_or_else(|| CliError::Config("`ne` is required".into()))?;
        let max_level = ne.is_power_of_two().then(|| ne.trailing_zeros() as u64);
        let degrees = match flags.degrees {
            Some(s) => parse_list(&s, None)?,
            None => file
                .degrees
                .ok_or_else(|| CliError::Config("`degrees` is required".into()))?
                .expand(None)?,
        };
        let levels = match flags.levels {
            Some(s) => parse_list(&s, max_level)?,
            None => file.levels.unwrap_or(ListSpec::One(0)).expand(max_level)?,
        };
        let mut levels = levels;
        levels.sort_unstable();
        levels.dedup();
        let nev = match flags.nev {
            Some(s) => Some(NevSpec::parse(&s)?),
            None => file.nev,
        };
        let interval = flags.interval.or(file.interval);
        let request = match (nev, interval) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either `nev` or `interval`, not both".into()))
            }
            (None, Some([a, b])) => Request::Interval(a, b),
            (Some(NevSpec::Count(n)), None) => Request::Lowest(n),
            (Some(NevSpec::Text(t)), None) => match NevSpec::parse(&t)? {
                NevSpec::Count(n) => Request::Lowest(n),
                NevSpec::Text(_) => Request::LowestIga,
            },
            (None, None) => Request::LowestIga,
        };
        let cfg = Self {
            d,
            ne,
            degrees: degrees.into_iter().map(|p| p as usize).collect(),
            levels: levels.into_iter().map(|l| l as u32).collect(),
            request,
            lanczos_m: flags.lanczos_m.or(file.lanczos_m).unwrap_or(defaults.lanczos_m),
            keep: flags.keep.or(file.keep).unwrap_or(defaults.keep),
            tol: flags.tol.or(file.tol).unwrap_or(defaults.tol),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("riga-out")),
            solve: !flags.no_solve && file.solve.unwrap_or(true),
            export_matrices: flags.export_matrices || file.export_matrices.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(1..=3).contains(&self.d) {
            return bad(format!("dimension {} not in 1..=3", self.d));
        }
        if self.ne == 0 {
            return bad("`ne` must be positive".into());
        }
        if self.degrees.is_empty() {
            return bad("empty degree list".into());
        }
        if self.levels.is_empty() {
            return bad("empty level list".into());
        }
        if let Some(&p) = self.degrees.iter().find(|&&p| p == 0) {
            return bad(format!("degree {p} must be at least 1"));
        }
        let top = *self.levels.last().unwrap();
        if top > 0 {
            if !self.ne.is_power_of_two() {
                return bad(format!("levels > 0 need a power-of-two `ne`, got {}", self.ne));
            }
            if top > self.ne.trailing_zeros() {
                return bad(format!("level {top} exceeds log2(ne) = {}", self.ne.trailing_zeros()));
            }
        }
        if self.lanczos_m < 4 {
            return bad(format!("lanczos_m = {} is below 4", self.lanczos_m));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol = {} not in (0, 1)", self.tol));
        }
        match self.request {
            Request::Interval(a, b) if !(a.is_finite() && b.is_finite() && a < b) => {
                return bad(format!("interval [{a}, {b}] is empty or not finite"));
            }
            Request::Lowest(0) => return bad("`nev` must be positive".into()),
            Request::Lowest(n) => {
                for &p in &self.degrees {
                    for &l in &self.levels {
                        let dofs = dof_count(self.ne, p, l, self.d);
                        if n > dofs {
                            return bad(format!("nev = {n} exceeds N = {dofs} at p = {p}, level = {l}"));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Eigensolver request for one sweep point.
    pub fn spectrum_request(&self, p: usize) -> SpectrumRequest {
        match self.request {
            Request::Lowest(n) => SpectrumRequest::Lowest(n),
            Request::LowestIga => SpectrumRequest::Lowest(dof_count(self.ne, p, 0, self.d)),
            Request::Interval(a, b) => SpectrumRequest::Interval(a, b),
        }
    }

    pub fn solver_options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            lanczos_m: self.lanczos_m,
            keep: self.keep,
            tol: self.tol,
            seed,
            ..SolverOptions::default()
        }
    }

    /// Sweep points `(p, level)` in output order.
    pub fn points(&self) -> Vec<(usize, u32)> {
        self.degrees
            .iter()
            .flat_map(|&p| self.levels.iter().map(move |&l| (p, l)))
            .collect()
    }

    /// Seed of one sweep point, derived from the base seed.
    pub fn point_seed(&self, p: usize, level: u32) -> u64 {
        self.seed
            .wrapping_add((p as u64) << 16)
            .wrapping_add(level as u64)
    }
}
