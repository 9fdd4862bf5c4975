//! Experiment configuration: an INI-style text format with named presets.
//!
//! A config file has an `[experiment]` section, a `[state]` section, one
//! `[schedule eps=…]` section per ε, and an optional `[grid]` section:
//!
//! ```ini
//! [experiment]
//! name = torsional-d-desk
//! potential = torsional
//! dim = 2
//! epsilons = 0.1, 0.05, 0.01
//! methods = husimi-corrected
//! observables = all
//! t_final = 5
//! record_dt = 0.25
//! seed = 24221
//! sampling = auto
//! output = out
//!
//! [state]
//! center = 1, 0, 0, 0
//!
//! [schedule eps=0.1]
//! n1 = 10000
//! n2 = 1000
//! h1 = 0.01
//! h2 = 0.001
//! ```
//!
//! `preset = NAME` inside `[experiment]` starts from a built-in preset; any
//! other keys or sections then override individual fields. Serialization via
//! [`ExperimentConfig::to_ini`] round-trips: parsing the output yields a
//! semantically identical config.

use semiclass::prelude::*;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

/// A config-file problem, with enough context to fix the offending line.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> ConfigResult<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Harmonic,
    Free,
    Torsional,
    HenonHeiles,
}

impl PotentialKind {
    pub fn parse(s: &str) -> ConfigResult<Self> {
        match s {
            "harmonic" => Ok(Self::Harmonic),
            "free" => Ok(Self::Free),
            "torsional" => Ok(Self::Torsional),
            "henon-heiles" => Ok(Self::HenonHeiles),
            other => err(format!(
                "unknown potential `{other}` (expected harmonic, free, torsional, henon-heiles)"
            )),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Harmonic => "harmonic",
            Self::Free => "free",
            Self::Torsional => "torsional",
            Self::HenonHeiles => "henon-heiles",
        }
    }

    pub fn build(&self, dim: usize) -> Arc<dyn Potential> {
        match self {
            Self::Harmonic => HarmonicPotential::new(dim).into_shared(),
            Self::Free => FreePotential::new(dim).into_shared(),
            Self::Torsional => TorsionalPotential::new(dim).into_shared(),
            Self::HenonHeiles => HenonHeilesChain::new(dim).into_shared(),
        }
    }
}

/// Ensemble sizes and step sizes for one value of ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSchedule {
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
}

/// Geometry of the grid reference solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub half_width: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableSelection {
    All,
    Named(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub potential: PotentialKind,
    pub dim: usize,
    /// One or two flat phase-space centers, `(q_1..q_d, p_1..p_d)` each.
    pub centers: Vec<Vec<f64>>,
    /// Packet weights when two centers are given (equal weights otherwise).
    pub weights: Option<(f64, f64)>,
    pub epsilons: Vec<f64>,
    pub methods: Vec<Method>,
    pub observables: ObservableSelection,
    pub t_final: f64,
    pub record_dt: f64,
    pub seed: u64,
    pub sampling: Sampling,
    pub output: PathBuf,
    /// One entry per ε in `epsilons`, matched by value.
    pub schedules: Vec<(f64, SamplingSchedule)>,
    pub grid: Option<GridSpec>,
}

impl ExperimentConfig {
    pub fn schedule_for(&self, eps: f64) -> Option<SamplingSchedule> {
        self.schedules
            .iter()
            .find(|(e, _)| *e == eps)
            .map(|(_, s)| *s)
    }

    /// Expand the observable selection against the built-in set for `dim`.
    pub fn observable_names(&self) -> ConfigResult<Vec<String>> {
        let builtin = builtin_names(self.dim);
        match &self.observables {
            ObservableSelection::All => Ok(builtin),
            ObservableSelection::Named(names) => {
                for n in names {
                    if !builtin.contains(n) {
                        return err(format!(
                            "unknown observable `{n}` for dimension {} \
                             (expected one of {})",
                            self.dim,
                            builtin.join(", ")
                        ));
                    }
                }
                Ok(names.clone())
            }
        }
    }

    /// Build the initial state for a given ε.
    pub fn state(&self, eps: f64) -> ConfigResult<GaussianSuperposition> {
        let point = |flat: &[f64]| {
            PhasePoint::new(flat[..self.dim].to_vec(), flat[self.dim..].to_vec()).unwrap()
        };
        let state = match (self.centers.len(), self.weights) {
            (1, _) => GaussianSuperposition::single(point(&self.centers[0]), eps),
            (2, None) => {
                GaussianSuperposition::pair(point(&self.centers[0]), point(&self.centers[1]), eps)
            }
            (2, Some((w1, w2))) => GaussianSuperposition::weighted_pair(
                point(&self.centers[0]),
                w1,
                point(&self.centers[1]),
                w2,
                eps,
            ),
            _ => unreachable!("validated"),
        };
        state.map_err(|e| ConfigError(format!("invalid state: {e}")))
    }

    pub fn model(&self, eps: f64) -> ConfigResult<HamiltonianModel> {
        HamiltonianModel::new(self.potential.build(self.dim), eps)
            .map_err(|e| ConfigError(format!("invalid model: {e}")))
    }

    /// Consistency checks beyond per-line syntax.
    pub fn validate(&self) -> ConfigResult<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return err(format!("experiment name `{}` is empty or has separators", self.name));
        }
        if self.dim == 0 {
            return err("dimension must be at least 1");
        }
        if self.centers.is_empty() || self.centers.len() > 2 {
            return err("state needs one `center` (optionally a `center2`)");
        }
        for (i, c) in self.centers.iter().enumerate() {
            if c.len() != 2 * self.dim {
                return err(format!(
                    "center{} has {} entries, expected 2·dim = {}",
                    if i == 0 { String::new() } else { "2".into() },
                    c.len(),
                    2 * self.dim
                ));
            }
        }
        if self.weights.is_some() && self.centers.len() != 2 {
            return err("weights are only meaningful with two centers");
        }
        if let Some((w1, w2)) = self.weights {
            if !(w1 >= 0.0 && w2 >= 0.0 && w1 + w2 > 0.0) {
                return err(format!("weights ({w1}, {w2}) must be non-negative, not both zero"));
            }
        }
        if self.epsilons.is_empty() {
            return err("epsilons list is empty");
        }
        for &eps in &self.epsilons {
            if !(eps > 0.0) || !eps.is_finite() {
                return err(format!("epsilon {eps} must be positive and finite"));
            }
            let Some(s) = self.schedule_for(eps) else {
                return err(format!("no [schedule eps={eps}] section for epsilon {eps}"));
            };
            if s.n1 == 0 {
                return err(format!("schedule eps={eps}: n1 must be positive"));
            }
            if s.n2 > s.n1 {
                return err(format!(
                    "schedule eps={eps}: n2 = {} exceeds n1 = {}",
                    s.n2, s.n1
                ));
            }
            for (label, h) in [("h1", s.h1), ("h2", s.h2)] {
                if !(h > 0.0) || !h.is_finite() {
                    return err(format!("schedule eps={eps}: {label} must be positive"));
                }
                if !divides(h, self.record_dt) {
                    return err(format!(
                        "schedule eps={eps}: {label} = {h} does not divide record_dt = {}",
                        self.record_dt
                    ));
                }
            }
        }
        if self.methods.is_empty() {
            return err("methods list is empty");
        }
        if self.methods.contains(&Method::Wigner) && self.centers.len() == 2 {
            return err("the wigner method needs a single-packet state, not a superposition");
        }
        if let ObservableSelection::Named(names) = &self.observables {
            if names.is_empty() {
                return err("observables list is empty");
            }
        }
        self.observable_names()?;
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return err(format!("t_final = {} must be non-negative", self.t_final));
        }
        if !(self.record_dt > 0.0) || !self.record_dt.is_finite() {
            return err(format!("record_dt = {} must be positive", self.record_dt));
        }
        if let Some(g) = &self.grid {
            if self.dim > 2 {
                return err(format!(
                    "grid reference supports dimension ≤ 2, config has dim = {}",
                    self.dim
                ));
            }
            if g.points < 8 || g.points % 2 != 0 {
                return err(format!("grid points = {} must be even and ≥ 8", g.points));
            }
            if !(g.half_width > 0.0) {
                return err(format!("grid half_width = {} must be positive", g.half_width));
            }
            if !(g.h > 0.0) || !divides(g.h, self.record_dt) {
                return err(format!(
                    "grid h = {} must be positive and divide record_dt = {}",
                    g.h, self.record_dt
                ));
            }
        }
        Ok(())
    }

    /// Serialize back to the INI dialect accepted by [`parse`].
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        push(&mut out, "[experiment]".into());
        push(&mut out, format!("name = {}", self.name));
        push(&mut out, format!("potential = {}", self.potential.label()));
        push(&mut out, format!("dim = {}", self.dim));
        push(&mut out, format!("epsilons = {}", join_f64(&self.epsilons)));
        push(
            &mut out,
            format!(
                "methods = {}",
                self.methods.iter().map(|m| m.label()).collect::<Vec<_>>().join(", ")
            ),
        );
        match &self.observables {
            ObservableSelection::All => push(&mut out, "observables = all".into()),
            ObservableSelection::Named(names) => {
                push(&mut out, format!("observables = {}", names.join(", ")))
            }
        }
        push(&mut out, format!("t_final = {}", self.t_final));
        push(&mut out, format!("record_dt = {}", self.record_dt));
        push(&mut out, format!("seed = {}", self.seed));
        push(&mut out, format!("sampling = {}", self.sampling.label()));
        push(&mut out, format!("output = {}", self.output.display()));
        push(&mut out, String::new());
        push(&mut out, "[state]".into());
        push(&mut out, format!("center = {}", join_f64(&self.centers[0])));
        if let Some(c2) = self.centers.get(1) {
            push(&mut out, format!("center2 = {}", join_f64(c2)));
        }
        if let Some((w1, w2)) = self.weights {
            push(&mut out, format!("weights = {w1}, {w2}"));
        }
        for (eps, s) in &self.schedules {
            push(&mut out, String::new());
            push(&mut out, format!("[schedule eps={eps}]"));
            push(&mut out, format!("n1 = {}", s.n1));
            push(&mut out, format!("n2 = {}", s.n2));
            push(&mut out, format!("h1 = {}", s.h1));
            push(&mut out, format!("h2 = {}", s.h2));
        }
        if let Some(g) = &self.grid {
            push(&mut out, String::new());
            push(&mut out, "[grid]".into());
            push(&mut out, format!("points = {}", g.points));
            push(&mut out, format!("half_width = {}", g.half_width));
            push(&mut out, format!("h = {}", g.h));
        }
        out
    }
}

fn divides(h: f64, dt: f64) -> bool {
    let steps = dt / h;
    (steps - steps.round()).abs() <= 1e-9 * steps.max(1.0) && steps.round() >= 1.0
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

fn builtin_names(dim: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=dim).map(|i| format!("q{i}")).collect();
    names.extend((1..=dim).map(|i| format!("p{i}")));
    names.extend(["kinetic", "potential", "total"].map(String::from));
    names
}

// --- parsing -----------------------------------------------------------------

#[derive(Debug)]
struct RawSection {
    header: String,
    line: usize,
    entries: Vec<(String, String, usize)>, // key, value, line
}

fn split_sections(text: &str) -> ConfigResult<Vec<RawSection>> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(header) = rest.strip_suffix(']') else {
                return err(format!("line {line}: unterminated section header `{raw}`"));
            };
            sections.push(RawSection {
                header: header.trim().to_string(),
                line,
                entries: Vec::new(),
            });
        } else if let Some((key, value)) = trimmed.split_once('=') {
            let Some(section) = sections.last_mut() else {
                return err(format!("line {line}: key `{}` before any [section]", key.trim()));
            };
            section
                .entries
                .push((key.trim().to_string(), value.trim().to_string(), line));
        } else {
            return err(format!("line {line}: expected `key = value`, got `{trimmed}`"));
        }
    }
    Ok(sections)
}

fn parse_f64(value: &str, line: usize, key: &str) -> ConfigResult<f64> {
    value
        .parse::<f64>()
        .map_err(|_| ConfigError(format!("line {line}: {key} = `{value}` is not a number")))
}

fn parse_usize(value: &str, line: usize, key: &str) -> ConfigResult<usize> {
    value.parse::<usize>().map_err(|_| {
        ConfigError(format!("line {line}: {key} = `{value}` is not a non-negative integer"))
    })
}

fn parse_list<T>(
    value: &str,
    line: usize,
    key: &str,
    item: impl Fn(&str, usize, &str) -> ConfigResult<T>,
) -> ConfigResult<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(s, line, key))
        .collect()
}

/// Parse a config from text. A `preset = NAME` key pulls in the named preset
/// first; every other key or section then overrides the preset's fields.
pub fn parse(text: &str) -> ConfigResult<ExperimentConfig> {
    let sections = split_sections(text)?;

    // Start from a preset when requested, otherwise from neutral defaults.
    let preset_name = sections
        .iter()
        .filter(|s| s.header == "experiment")
        .flat_map(|s| s.entries.iter())
        .find(|(k, _, _)| k == "preset");
    let mut cfg = match preset_name {
        Some((_, name, line)) => preset(name).ok_or_else(|| {
            ConfigError(format!(
                "line {line}: unknown preset `{name}` (expected one of {})",
                PRESET_NAMES.join(", ")
            ))
        })?,
        None => ExperimentConfig {
            name: "experiment".into(),
            potential: PotentialKind::Harmonic,
            dim: 1,
            centers: vec![],
            weights: None,
            epsilons: vec![],
            methods: vec![Method::HusimiCorrected],
            observables: ObservableSelection::All,
            t_final: 1.0,
            record_dt: 0.25,
            seed: 0x5EED,
            sampling: Sampling::Auto,
            output: PathBuf::from("."),
            schedules: vec![],
            grid: None,
        },
    };

    let mut saw_state = false;
    let mut saw_grid = false;
    for section in &sections {
        match section.header.as_str() {
            "experiment" => apply_experiment(&mut cfg, section)?,
            "state" => {
                // A [state] section replaces the preset's state wholesale.
                if !saw_state {
                    cfg.centers.clear();
                    cfg.weights = None;
                    saw_state = true;
                }
                apply_state(&mut cfg, section)?;
            }
            "grid" => {
                if !saw_grid {
                    cfg.grid = None;
                    saw_grid = true;
                }
                apply_grid(&mut cfg, section)?;
            }
            other => {
                if let Some(eps_text) = other.strip_prefix("schedule eps=") {
                    apply_schedule(&mut cfg, eps_text.trim(), section)?;
                } else {
                    return err(format!(
                        "line {}: unknown section [{other}] (expected [experiment], [state], \
                         [schedule eps=…], [grid])",
                        section.line
                    ));
                }
            }
        }
    }

    cfg.validate()?;
    Ok(cfg)
}

fn apply_experiment(cfg: &mut ExperimentConfig, section: &RawSection) -> ConfigResult<()> {
    for (key, value, line) in &section.entries {
        let line = *line;
        match key.as_str() {
            "preset" => {} // consumed above
            "name" => cfg.name = value.clone(),
            "potential" => {
                cfg.potential = PotentialKind::parse(value)
                    .map_err(|e| ConfigError(format!("line {line}: {e}")))?
            }
            "dim" => cfg.dim = parse_usize(value, line, key)?,
            "epsilons" => cfg.epsilons = parse_list(value, line, key, parse_f64)?,
            "methods" => {
                cfg.methods = parse_list(value, line, key, |s, line, _| {
                    Method::parse(s).map_err(|e| ConfigError(format!("line {line}: {e}")))
                })?
            }
            "observables" => {
                cfg.observables = if value.trim() == "all" {
                    ObservableSelection::All
                } else {
                    ObservableSelection::Named(
                        value
                            .split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(String::from)
                            .collect(),
                    )
                }
            }
            "t_final" => cfg.t_final = parse_f64(value, line, key)?,
            "record_dt" => cfg.record_dt = parse_f64(value, line, key)?,
            "seed" => {
                cfg.seed = value.parse::<u64>().map_err(|_| {
                    ConfigError(format!("line {line}: seed = `{value}` is not a u64"))
                })?
            }
            "sampling" => {
                cfg.sampling = Sampling::parse(value)
                    .map_err(|e| ConfigError(format!("line {line}: {e}")))?
            }
            "output" => cfg.output = PathBuf::from(value),
            other => {
                return err(format!("line {line}: unknown key `{other}` in [experiment]"))
            }
        }
    }
    Ok(())
}

fn apply_state(cfg: &mut ExperimentConfig, section: &RawSection) -> ConfigResult<()> {
    for (key, value, line) in &section.entries {
        let line = *line;
        match key.as_str() {
            "center" => {
                let c = parse_list(value, line, key, parse_f64)?;
                if cfg.centers.is_empty() {
                    cfg.centers.push(c)
                } else {
                    cfg.centers[0] = c
                }
            }
            "center2" => {
                let c = parse_list(value, line, key, parse_f64)?;
                if cfg.centers.len() < 2 {
                    cfg.centers.resize(2, Vec::new());
                }
                cfg.centers[1] = c;
            }
            "weights" => {
                let w = parse_list(value, line, key, parse_f64)?;
                if w.len() != 2 {
                    return err(format!("line {line}: weights needs exactly two entries"));
                }
                cfg.weights = Some((w[0], w[1]));
            }
            other => return err(format!("line {line}: unknown key `{other}` in [state]")),
        }
    }
    Ok(())
}

fn apply_grid(cfg: &mut ExperimentConfig, section: &RawSection) -> ConfigResult<()> {
    let mut g = cfg.grid.unwrap_or(GridSpec { points: 512, half_width: 3.0, h: 1e-3 });
    for (key, value, line) in &section.entries {
        let line = *line;
        match key.as_str() {
            "points" => g.points = parse_usize(value, line, key)?,
            "half_width" => g.half_width = parse_f64(value, line, key)?,
            "h" => g.h = parse_f64(value, line, key)?,
            other => return err(format!("line {line}: unknown key `{other}` in [grid]")),
        }
    }
    cfg.grid = Some(g);
    Ok(())
}

fn apply_schedule(
    cfg: &mut ExperimentConfig,
    eps_text: &str,
    section: &RawSection,
) -> ConfigResult<()> {
    let eps = parse_f64(eps_text, section.line, "schedule eps")?;
    let mut schedule = cfg
        .schedule_for(eps)
        .unwrap_or(SamplingSchedule { n1: 0, n2: 0, h1: 0.0, h2: 0.0 });
    for (key, value, line) in &section.entries {
        let line = *line;
        match key.as_str() {
            "n1" => schedule.n1 = parse_usize(value, line, key)?,
            "n2" => schedule.n2 = parse_usize(value, line, key)?,
            "h1" => schedule.h1 = parse_f64(value, line, key)?,
            "h2" => schedule.h2 = parse_f64(value, line, key)?,
            other => {
                return err(format!("line {line}: unknown key `{other}` in [schedule]"))
            }
        }
    }
    if let Some(entry) = cfg.schedules.iter_mut().find(|(e, _)| *e == eps) {
        entry.1 = schedule;
    } else {
        cfg.schedules.push((eps, schedule));
    }
    Ok(())
}

// --- presets -------------------------------------------------------------------

pub const PRESET_NAMES: [&str; 7] = [
    "torsional-d",
    "torsional-d-desk",
    "torsional-e",
    "torsional-e-desk",
    "henon-heiles",
    "henon-heiles-desk",
    "harmonic-sanity",
];

/// Published sampling budgets for the torsional experiments, per ε:
/// `(eps, n1_single, n2_single, n1_pair, n2_pair, h1, h2)`.
const TORSIONAL_BUDGETS: [(f64, usize, usize, usize, usize, f64, f64); 5] = [
    (1e-1, 10_000, 1_000, 100_000, 10_000, 1e-2, 1e-3),
    (5e-2, 30_000, 3_000, 200_000, 20_000, 1e-2, 1e-3),
    (1e-2, 100_000, 10_000, 100_000, 10_000, 1e-3, 1e-3),
    (5e-3, 300_000, 20_000, 300_000, 20_000, 1e-3, 1e-3),
    (1e-3, 1_000_000, 50_000, 1_000_000, 50_000, 1e-3, 2e-4),
];

fn torsional_preset(pair: bool, desk: bool) -> ExperimentConfig {
    let budgets: Vec<_> = TORSIONAL_BUDGETS
        .iter()
        .filter(|(eps, ..)| !desk || *eps >= 1e-2)
        .collect();
    let schedules = budgets
        .iter()
        .map(|&&(eps, n1s, n2s, n1p, n2p, h1, h2)| {
            let (n1, n2) = if pair { (n1p, n2p) } else { (n1s, n2s) };
            (eps, SamplingSchedule { n1, n2, h1, h2 })
        })
        .collect();
    let name = format!(
        "torsional-{}{}",
        if pair { "e" } else { "d" },
        if desk { "-desk" } else { "" }
    );
    ExperimentConfig {
        name,
        potential: PotentialKind::Torsional,
        dim: 2,
        centers: if pair {
            vec![vec![0.5, -0.6, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]
        } else {
            vec![vec![1.0, 0.0, 0.0, 0.0]]
        },
        weights: None,
        epsilons: budgets.iter().map(|b| b.0).collect(),
        methods: vec![Method::HusimiCorrected],
        observables: ObservableSelection::All,
        t_final: if desk { 5.0 } else { 20.0 },
        record_dt: 0.25,
        seed: 0x5EED,
        sampling: Sampling::Auto,
        output: PathBuf::from("out"),
        schedules,
        grid: Some(if desk {
            GridSpec { points: 512, half_width: 3.0, h: 1e-3 }
        } else {
            GridSpec { points: 1536, half_width: 3.0, h: 2.5e-4 }
        }),
    }
}

fn henon_preset(desk: bool) -> ExperimentConfig {
    ExperimentConfig {
        name: format!("henon-heiles{}", if desk { "-desk" } else { "" }),
        potential: PotentialKind::HenonHeiles,
        dim: 6,
        centers: vec![vec![2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]],
        weights: None,
        epsilons: vec![1e-2],
        methods: vec![Method::HusimiCorrected, Method::HusimiNaive, Method::Wigner],
        observables: ObservableSelection::Named(
            ["kinetic", "potential", "total"].map(String::from).to_vec(),
        ),
        t_final: if desk { 2.0 } else { 10.0 },
        record_dt: 0.1,
        seed: 0x5EED,
        sampling: Sampling::Auto,
        output: PathBuf::from("out"),
        schedules: vec![(
            1e-2,
            SamplingSchedule { n1: 1 << 14, n2: 1 << 10, h1: 1e-3, h2: 1e-3 },
        )],
        grid: None,
    }
}

fn harmonic_sanity_preset() -> ExperimentConfig {
    ExperimentConfig {
        name: "harmonic-sanity".into(),
        potential: PotentialKind::Harmonic,
        dim: 1,
        centers: vec![vec![1.0, 0.5]],
        weights: None,
        epsilons: vec![1e-2],
        methods: vec![Method::HusimiCorrected],
        observables: ObservableSelection::All,
        t_final: 5.0,
        record_dt: 0.25,
        seed: 0x5EED,
        sampling: Sampling::Auto,
        output: PathBuf::from("out"),
        schedules: vec![(
            1e-2,
            SamplingSchedule { n1: 1 << 14, n2: 1 << 10, h1: 1e-2, h2: 1e-3 },
        )],
        grid: Some(GridSpec { points: 512, half_width: 4.0, h: 1e-3 }),
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "torsional-d" => Some(torsional_preset(false, false)),
        "torsional-d-desk" => Some(torsional_preset(false, true)),
        "torsional-e" => Some(torsional_preset(true, false)),
        "torsional-e-desk" => Some(torsional_preset(true, true)),
        "henon-heiles" => Some(henon_preset(false)),
        "henon-heiles-desk" => Some(henon_preset(true)),
        "harmonic-sanity" => Some(harmonic_sanity_preset()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let text = cfg.to_ini();
            let back = parse(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(cfg, back, "round trip changed preset {name}");
        }
    }

    #[test]
    fn preset_key_with_overrides() {
        let text = "[experiment]\npreset = harmonic-sanity\nt_final = 1\nseed = 7\n";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.t_final, 1.0);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.name, "harmonic-sanity");
        assert_eq!(cfg.schedule_for(1e-2).unwrap().n1, 1 << 14);
    }

    #[test]
    fn torsional_budgets_match_published_table() {
        let d = preset("torsional-d").unwrap();
        assert_eq!(d.epsilons, vec![1e-1, 5e-2, 1e-2, 5e-3, 1e-3]);
        assert_eq!(
            d.schedule_for(1e-1).unwrap(),
            SamplingSchedule { n1: 10_000, n2: 1_000, h1: 1e-2, h2: 1e-3 }
        );
        assert_eq!(
            d.schedule_for(1e-3).unwrap(),
            SamplingSchedule { n1: 1_000_000, n2: 50_000, h1: 1e-3, h2: 2e-4 }
        );
        let e = preset("torsional-e").unwrap();
        assert_eq!(
            e.schedule_for(5e-2).unwrap(),
            SamplingSchedule { n1: 200_000, n2: 20_000, h1: 1e-2, h2: 1e-3 }
        );
        assert_eq!(e.centers, vec![vec![0.5, -0.6, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]);
        let desk = preset("torsional-d-desk").unwrap();
        assert_eq!(desk.epsilons, vec![1e-1, 5e-2, 1e-2]);
        assert_eq!(desk.t_final, 5.0);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let text = "[experiment]\npreset = harmonic-sanity\n\n[schedule eps=0.01]\nn3 = 4\n";
        let e = parse(text).unwrap_err();
        assert!(e.0.contains("line 5"), "{e}");
        assert!(e.0.contains("n3"), "{e}");

        let e = parse("t_final = 1\n").unwrap_err();
        assert!(e.0.contains("line 1"), "{e}");
    }

    #[test]
    fn empty_observable_list_is_rejected() {
        let text = "[experiment]\npreset = harmonic-sanity\nobservables = ,\n";
        let e = parse(text).unwrap_err();
        assert!(e.0.contains("observables"), "{e}");
    }

    #[test]
    fn wigner_rejects_superpositions_at_config_time() {
        let text = "[experiment]\npreset = torsional-e-desk\nmethods = wigner\n";
        let e = parse(text).unwrap_err();
        assert!(e.0.contains("single-packet"), "{e}");
    }

    #[test]
    fn step_sizes_must_divide_the_record_interval() {
        let text = "[experiment]\npreset = harmonic-sanity\n\n[schedule eps=0.01]\nh1 = 0.11\n";
        let e = parse(text).unwrap_err();
        assert!(e.0.contains("divide"), "{e}");
    }
}
