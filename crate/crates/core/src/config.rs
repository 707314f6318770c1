//! Experiment configuration: defaults, config-file parsing, validation.
//!
//! The config file is flat `key = value` text with one optional section
//! per experiment name; keys before any section header apply to every
//! experiment. Defaults reproduce the reference setup (unit coefficients
//! on [0, 1/2]^3 with 25 points per axis, tau = 1/32, M = 10), so the
//! zero-configuration run is the standard energy experiment.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::stepper::Method;

/// Which experiment the runner executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Energy trace per (method, lambda).
    Energy,
    /// Energy deviation from the initial energy per (method, lambda).
    EnergyError,
    /// Energy traces over independent noise paths.
    Paths,
    /// Mean-square temporal convergence table against a fine reference.
    Order,
    /// Dense-oracle property and equivalence checks.
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Energy,
        ExperimentKind::EnergyError,
        ExperimentKind::Paths,
        ExperimentKind::Order,
        ExperimentKind::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Energy => "energy",
            ExperimentKind::EnergyError => "energy-error",
            ExperimentKind::Paths => "paths",
            ExperimentKind::Order => "order",
            ExperimentKind::OracleCheck => "oracle-check",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig {
                field: "experiment".into(),
                reason: format!(
                    "unknown experiment `{s}`; expected one of energy, energy-error, paths, order, oracle-check"
                ),
            })
    }
}

/// Which methods an experiment runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodSelection {
    Single(Method),
    Both,
}

impl MethodSelection {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSelection::Single(m) => vec![m],
            MethodSelection::Both => Method::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for MethodSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("both") {
            Ok(MethodSelection::Both)
        } else {
            Ok(MethodSelection::Single(s.parse()?))
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub method: MethodSelection,
    pub bounds: [(f64, f64); 3],
    pub counts: [usize; 3],
    /// Time step for the trace experiments.
    pub tau: f64,
    pub t_end: f64,
    /// Coarse time steps of the order experiment, halving down the list.
    pub taus: Vec<f64>,
    /// Reference time step of the order experiment.
    pub tau_ref: f64,
    pub eps: f64,
    pub mu: f64,
    pub lambdas: Vec<f64>,
    /// Noise truncation level M.
    pub modes: usize,
    pub seed: u64,
    pub n_paths: usize,
    /// Worker threads; 0 keeps the global default pool.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for one experiment kind. For `Order`, `full_scale`
    /// switches from the desk-scale grid (11^3, taus 2^-3..2^-6) to the
    /// full reference setup (25^3, taus 2^-4..2^-8), roughly a 12x
    /// longer run.
    pub fn defaults(experiment: ExperimentKind, full_scale: bool) -> Self {
        let mut config = ExperimentConfig {
            experiment,
            method: MethodSelection::Both,
            bounds: [(0.0, 0.5); 3],
            counts: [25; 3],
            tau: 1.0 / 32.0,
            t_end: 10.0,
            taus: Vec::new(),
            tau_ref: 1.0 / 512.0,
            eps: 1.0,
            mu: 1.0,
            lambdas: vec![0.0, 0.1, 1.0, 10.0],
            modes: 10,
            seed: 42,
            n_paths: 1,
            threads: 0,
            out_dir: PathBuf::from("out"),
        };
        match experiment {
            ExperimentKind::Energy | ExperimentKind::EnergyError => {}
            ExperimentKind::Paths => {
                config.lambdas = vec![1.0];
                config.n_paths = 3;
            }
            ExperimentKind::Order => {
                config.lambdas = vec![0.1];
                config.t_end = 0.25;
                config.n_paths = 10;
                if full_scale {
                    config.counts = [25; 3];
                    config.taus = (4..=8).map(|k| 0.5_f64.powi(k)).collect();
                } else {
                    config.counts = [11; 3];
                    config.taus = (3..=6).map(|k| 0.5_f64.powi(k)).collect();
                }
                config.tau = config.taus[0];
            }
            ExperimentKind::OracleCheck => {}
        }
        config
    }

    /// Number of time steps `t_end / tau`, which must be integral.
    pub fn steps_for(&self, tau: f64, field: &str) -> Result<usize> {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::InvalidConfig {
                field: field.into(),
                reason: format!("time step must be positive, got {tau}"),
            });
        }
        let ratio = self.t_end / tau;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidConfig {
                field: field.into(),
                reason: format!(
                    "t_end / tau = {ratio} is not a positive integer (t_end = {}, tau = {tau})",
                    self.t_end
                ),
            });
        }
        Ok(rounded as usize)
    }

    /// Grid for a run at time step `tau` over the configured box.
    pub fn grid_for(&self, tau: f64, n_steps: usize) -> Result<Grid> {
        Grid::new(self.bounds, self.counts, tau, n_steps)
    }

    /// Coarsening ratio `tau / tau_ref`, checked to be a power of two.
    pub fn coarsening_ratio(&self, tau: f64) -> Result<usize> {
        let ratio = tau / self.tau_ref;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 * rounded.max(1.0)
            || rounded < 2.0
            || !(rounded as u64).is_power_of_two()
        {
            return Err(Error::InvalidConfig {
                field: "taus".into(),
                reason: format!(
                    "tau = {tau} must be tau_ref * 2^k (k >= 1) with tau_ref = {}",
                    self.tau_ref
                ),
            });
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Error::InvalidConfig {
            field: field.into(),
            reason,
        };
        for &(lo, hi) in &self.bounds {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(bad(
                    "domain",
                    format!("bounds [{lo}, {hi}] are not ordered"),
                ));
            }
        }
        for &count in &self.counts {
            if count < 3 || count % 2 == 0 {
                return Err(bad(
                    "counts",
                    format!("point count {count} must be odd and >= 3"),
                ));
            }
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(bad("eps", format!("must be positive, got {}", self.eps)));
        }
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return Err(bad("mu", format!("must be positive, got {}", self.mu)));
        }
        if self.lambdas.is_empty() {
            return Err(bad(
                "lambda",
                "at least one noise intensity required".into(),
            ));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(bad("lambda", "noise intensities must be finite".into()));
        }
        if self.modes == 0 {
            return Err(bad("m_modes", "truncation level must be >= 1".into()));
        }
        if self.n_paths == 0 {
            return Err(bad("n_paths", "at least one path required".into()));
        }
        if !self.t_end.is_finite() || self.t_end <= 0.0 {
            return Err(bad(
                "t_end",
                format!("must be positive, got {}", self.t_end),
            ));
        }
        match self.experiment {
            ExperimentKind::Energy | ExperimentKind::EnergyError | ExperimentKind::Paths => {
                self.steps_for(self.tau, "tau")?;
            }
            ExperimentKind::Order => {
                if self.taus.is_empty() {
                    return Err(bad("taus", "at least one coarse time step required".into()));
                }
                self.steps_for(self.tau_ref, "tau_ref")?;
                for window in self.taus.windows(2) {
                    if (window[0] / window[1] - 2.0).abs() > 1e-9 {
                        return Err(bad(
                            "taus",
                            format!(
                                "time steps must halve down the list, got {} then {}",
                                window[0], window[1]
                            ),
                        ));
                    }
                }
                for &tau in &self.taus {
                    self.steps_for(tau, "taus")?;
                    self.coarsening_ratio(tau)?;
                }
            }
            ExperimentKind::OracleCheck => {}
        }
        Ok(())
    }

    /// Applies config-file entries; `section` names the origin for error
    /// messages.
    pub fn apply_entries(&mut self, section: &str, entries: &[(String, String)]) -> Result<()> {
        for (key, value) in entries {
            self.apply_entry(section, key, value)?;
        }
        Ok(())
    }

    fn apply_entry(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let field = if section.is_empty() {
            key.to_string()
        } else {
            format!("[{section}] {key}")
        };
        let bad = |reason: String| Error::InvalidConfig {
            field: field.clone(),
            reason,
        };
        match key {
            "method" => self.method = value.parse()?,
            "domain" => {
                let v = parse_f64_list(&field, value)?;
                self.bounds = match v.len() {
                    2 => [(v[0], v[1]); 3],
                    6 => [(v[0], v[1]), (v[2], v[3]), (v[4], v[5])],
                    n => return Err(bad(format!("expected 2 or 6 values, got {n}"))),
                };
            }
            "counts" => {
                let v = parse_usize_list(&field, value)?;
                self.counts = match v.len() {
                    1 => [v[0]; 3],
                    3 => [v[0], v[1], v[2]],
                    n => return Err(bad(format!("expected 1 or 3 values, got {n}"))),
                };
            }
            "tau" => self.tau = parse_f64(&field, value)?,
            "t_end" => self.t_end = parse_f64(&field, value)?,
            "taus" => self.taus = parse_f64_list(&field, value)?,
            "tau_ref" => self.tau_ref = parse_f64(&field, value)?,
            "eps" => self.eps = parse_f64(&field, value)?,
            "mu" => self.mu = parse_f64(&field, value)?,
            "lambda" => self.lambdas = parse_f64_list(&field, value)?,
            "m_modes" => self.modes = parse_usize(&field, value)?,
            "seed" => {
                self.seed = value.trim().parse().map_err(|e| bad(format!("{e}")))?;
            }
            "n_paths" => self.n_paths = parse_usize(&field, value)?,
            "threads" => self.threads = parse_usize(&field, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            other => {
                return Err(Error::InvalidConfig {
                    field: field.clone(),
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Renders the fully resolved configuration; written next to every
    /// experiment's outputs so runs are reproducible from their artifacts.
    pub fn render_resolved(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment.name());
        let method = match self.method {
            MethodSelection::Both => "both".to_string(),
            MethodSelection::Single(m) => m.tag().to_string(),
        };
        let _ = writeln!(s, "method = {method}");
        let _ = writeln!(
            s,
            "domain = {}, {}, {}, {}, {}, {}",
            self.bounds[0].0,
            self.bounds[0].1,
            self.bounds[1].0,
            self.bounds[1].1,
            self.bounds[2].0,
            self.bounds[2].1
        );
        let _ = writeln!(
            s,
            "counts = {}, {}, {}",
            self.counts[0], self.counts[1], self.counts[2]
        );
        let _ = writeln!(s, "tau = {}", crate::csv::fmt_f64(self.tau));
        let _ = writeln!(s, "t_end = {}", crate::csv::fmt_f64(self.t_end));
        if !self.taus.is_empty() {
            let taus: Vec<String> = self.taus.iter().map(|t| crate::csv::fmt_f64(*t)).collect();
            let _ = writeln!(s, "taus = {}", taus.join(", "));
            let _ = writeln!(s, "tau_ref = {}", crate::csv::fmt_f64(self.tau_ref));
        }
        let _ = writeln!(s, "eps = {}", crate::csv::fmt_f64(self.eps));
        let _ = writeln!(s, "mu = {}", crate::csv::fmt_f64(self.mu));
        let lambdas: Vec<String> = self
            .lambdas
            .iter()
            .map(|l| crate::csv::fmt_f64(*l))
            .collect();
        let _ = writeln!(s, "lambda = {}", lambdas.join(", "));
        let _ = writeln!(s, "m_modes = {}", self.modes);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_paths = {}", self.n_paths);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        s
    }
}

fn parse_f64(field: &str, value: &str) -> Result<f64> {
    value.trim().parse().map_err(|e| Error::InvalidConfig {
        field: field.into(),
        reason: format!("{e}"),
    })
}

fn parse_usize(field: &str, value: &str) -> Result<usize> {
    value.trim().parse().map_err(|e| Error::InvalidConfig {
        field: field.into(),
        reason: format!("{e}"),
    })
}

fn parse_f64_list(field: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|part| parse_f64(field, part))
        .collect()
}

fn parse_usize_list(field: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|part| parse_usize(field, part))
        .collect()
}

/// A parsed config file: global entries plus per-experiment sections, in
/// file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    pub global: Vec<(String, String)>,
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

impl RawConfig {
    pub fn section(&self, name: &str) -> Option<&[(String, String)]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, entries)| entries.as_slice())
    }

    /// Value of a global key, if present.
    pub fn global_value(&self, key: &str) -> Option<&str> {
        self.global
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Parses the flat `key = value` format with `[section]` headers and
/// `#`/`;` comments.
pub fn parse_config_str(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    let mut current: Option<String> = None;
    for (line_no, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::InvalidConfig {
                field: format!("line {}", line_no + 1),
                reason: format!("unterminated section header `{line}`"),
            })?;
            let name = name.trim().to_string();
            if !raw.sections.iter().any(|(n, _)| *n == name) {
                raw.sections.push((name.clone(), Vec::new()));
            }
            current = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidConfig {
            field: format!("line {}", line_no + 1),
            reason: format!("expected `key = value`, got `{line}`"),
        })?;
        let entry = (key.trim().to_string(), value.trim().to_string());
        match &current {
            None => raw.global.push(entry),
            Some(name) => raw
                .sections
                .iter_mut()
                .find(|(n, _)| n == name)
                .expect("section exists")
                .1
                .push(entry),
        }
    }
    Ok(raw)
}

/// Reads and parses a config file.
pub fn parse_config_file(path: &std::path::Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// Resolves a full configuration: defaults for the chosen experiment,
/// overlaid with the file's global entries, then its `[experiment]`
/// section, then the explicit CLI overrides.
pub struct CliOverrides {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub full_scale: bool,
}

pub fn resolve_config(raw: Option<&RawConfig>, cli: &CliOverrides) -> Result<ExperimentConfig> {
    let experiment = match cli.experiment {
        Some(kind) => kind,
        None => match raw.and_then(|r| r.global_value("experiment")) {
            Some(name) => name.parse()?,
            None => ExperimentKind::Energy,
        },
    };
    let mut config = ExperimentConfig::defaults(experiment, cli.full_scale);
    if let Some(raw) = raw {
        let global: Vec<(String, String)> = raw
            .global
            .iter()
            .filter(|(k, _)| k != "experiment")
            .cloned()
            .collect();
        config.apply_entries("", &global)?;
        if let Some(entries) = raw.section(experiment.name()) {
            config.apply_entries(experiment.name(), entries)?;
        }
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if let Some(out_dir) = &cli.out_dir {
        config.out_dir = out_dir.clone();
    }
    config.validate()?;
    Ok(config)
}
