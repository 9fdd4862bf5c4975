//! Drivers for the subcommands and the CSV formats they share.
//!
//! All numeric CSV fields carry 17 significant digits so reruns can be
//! compared bit-for-bit; the time-series schema is
//! `time,observable,method,value[,reference,error]` with the reference and
//! error columns present whenever a grid reference was configured.

use crate::config::{ConfigError, ExperimentConfig};
use semiclass::prelude::*;
use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Failure classes mapped to exit codes: config 2, instability 3, other 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Instability(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Instability(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Instability(m) => write!(f, "numerical instability: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Unstable(m) => CliError::Instability(m),
            Error::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Grid observables at every record time, in `grid_expectations` order.
struct GridTable {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    final_state: GridState,
}

impl GridTable {
    fn column_index(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("grid table lacks observable {name}"))
    }
}

fn record_count(t_final: f64, record_dt: f64) -> CliResult<usize> {
    if t_final == 0.0 {
        return Ok(0);
    }
    let records = t_final / record_dt;
    if (records - records.round()).abs() > 1e-9 * records.max(1.0) {
        return Err(CliError::Config(format!(
            "record_dt = {record_dt} does not divide t_final = {t_final}"
        )));
    }
    Ok(records.round() as usize)
}

fn grid_table(cfg: &ExperimentConfig, eps: f64) -> CliResult<GridTable> {
    let grid = cfg.grid.as_ref().expect("caller checked");
    let model = cfg.model(eps)?;
    let state = cfg.state(eps)?;
    let mut g = GridState::from_state(&state, grid.half_width, grid.points)?;
    let prop = SplitStepPropagator::new(&model, &g, grid.h)?;
    let records = record_count(cfg.t_final, cfg.record_dt)?;
    let steps = (cfg.record_dt / grid.h).round() as u64;
    let first = grid_expectations(&g, &model)?;
    let names: Vec<String> = first.iter().map(|(n, _)| n.clone()).collect();
    let mut rows = vec![first.into_iter().map(|(_, v)| v).collect::<Vec<_>>()];
    for _ in 0..records {
        prop.propagate(&mut g, steps)?;
        let row = grid_expectations(&g, &model)?;
        rows.push(row.into_iter().map(|(_, v)| v).collect());
    }
    let alias = high_wavenumber_fraction(&g);
    if alias > 1e-10 {
        eprintln!(
            "warning: grid run at ε = {eps} is under-resolved \
             (high-wavenumber mass fraction {alias:.3e})"
        );
    }
    Ok(GridTable { names, rows, final_state: g })
}

fn format_eps(eps: f64) -> String {
    format!("{eps}")
}

fn series_path(cfg: &ExperimentConfig, eps: f64, label: &str) -> PathBuf {
    cfg.output
        .join(format!("{}-eps{}-{}.csv", cfg.name, format_eps(eps), label))
}

fn write_series_csv(
    path: &Path,
    series: &ExpectationSeries,
    observables: &[String],
    reference: Option<&GridTable>,
) -> CliResult<()> {
    let mut out = String::new();
    out.push_str(match reference {
        Some(_) => "time,observable,method,value,reference,error\n",
        None => "time,observable,method,value\n",
    });
    let label = series.method.label();
    for (r, &t) in series.times.iter().enumerate() {
        for name in observables {
            let v = series.values[r][series
                .observable_index(name)
                .unwrap_or_else(|| panic!("series lacks observable {name}"))];
            match reference {
                Some(table) => {
                    let rv = table.rows[r][table.column_index(name)];
                    writeln!(
                        out,
                        "{t:.16e},{name},{label},{v:.16e},{rv:.16e},{:.16e}",
                        (v - rv).abs()
                    )
                    .unwrap();
                }
                None => writeln!(out, "{t:.16e},{name},{label},{v:.16e}").unwrap(),
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_convergence_csv(path: &Path, rows: &[(String, f64, f64, f64)]) -> CliResult<()> {
    let mut out = String::from("method,epsilon,mean_error,slope\n");
    for (method, eps, mean_error, slope) in rows {
        writeln!(out, "{method},{},{mean_error:.16e},{slope:.16e}", format_eps(*eps)).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Record the resolved configuration (after CLI overrides) next to the
/// outputs, so a run can be reproduced from its artifacts alone.
fn write_config_echo(cfg: &ExperimentConfig) -> CliResult<()> {
    let path = cfg.output.join(format!("{}-config.ini", cfg.name));
    fs::write(path, cfg.to_ini())?;
    Ok(())
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(e, _)| e.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    num / den
}

/// `simulate`: particle runs for every (ε, method), with reference and error
/// columns plus a convergence summary when a grid reference is configured.
pub fn simulate(cfg: &ExperimentConfig) -> CliResult<()> {
    let observables = cfg.observable_names()?;
    fs::create_dir_all(&cfg.output)?;
    write_config_echo(cfg)?;
    let mut instability: Vec<String> = Vec::new();
    // (method, eps) → time-averaged absolute error against the reference.
    let mut mean_errors: BTreeMap<&'static str, Vec<(f64, f64)>> = BTreeMap::new();

    for &eps in &cfg.epsilons {
        let model = cfg.model(eps)?;
        let state = cfg.state(eps)?;
        let schedule = cfg.schedule_for(eps).expect("validated");
        let est_cfg = EstimatorConfig {
            n_leading: schedule.n1,
            n_correction: schedule.n2,
            h_leading: schedule.h1,
            h_correction: schedule.h2,
            t_final: cfg.t_final,
            record_dt: cfg.record_dt,
            seed: cfg.seed,
            sampling: cfg.sampling,
            ..EstimatorConfig::default()
        };
        let reference = match &cfg.grid {
            Some(_) => Some(grid_table(cfg, eps)?),
            None => None,
        };
        for &method in &cfg.methods {
            let started = Instant::now();
            let report = estimate_report(&model, &state, method, &est_cfg)?;
            let path = series_path(cfg, eps, method.label());
            write_series_csv(&path, &report.series, &observables, reference.as_ref())?;
            println!(
                "wrote {} ({:.1}s)",
                path.display(),
                started.elapsed().as_secs_f64()
            );
            if !report.fully_stable() {
                instability.push(format!(
                    "{} at ε = {}: {} leading and {} correction trajectories left the \
                     trusted region",
                    method.label(),
                    format_eps(eps),
                    report.failed_leading.len(),
                    report.failed_correction.len()
                ));
            }
            if let Some(table) = &reference {
                let mut acc = 0.0;
                let mut count = 0usize;
                for (r, _) in report.series.times.iter().enumerate() {
                    for name in &observables {
                        let v = report.series.values[r]
                            [report.series.observable_index(name).unwrap()];
                        acc += (v - table.rows[r][table.column_index(name)]).abs();
                        count += 1;
                    }
                }
                mean_errors
                    .entry(method.label())
                    .or_default()
                    .push((eps, acc / count as f64));
            }
        }
    }

    if cfg.grid.is_some() && cfg.epsilons.len() >= 3 {
        let mut rows = Vec::new();
        for (method, points) in &mean_errors {
            let slope = log_log_slope(points);
            for &(eps, mean_error) in points {
                rows.push((method.to_string(), eps, mean_error, slope));
            }
        }
        let path = cfg.output.join(format!("{}-convergence.csv", cfg.name));
        write_convergence_csv(&path, &rows)?;
        println!("wrote {}", path.display());
    }

    if instability.is_empty() {
        Ok(())
    } else {
        Err(CliError::Instability(instability.join("; ")))
    }
}

/// `reference`: grid expectations per ε plus a final-state checkpoint.
pub fn reference(cfg: &ExperimentConfig) -> CliResult<()> {
    if cfg.grid.is_none() {
        return Err(CliError::Config(
            "the reference solver needs a [grid] section in the config".into(),
        ));
    }
    let observables = cfg.observable_names()?;
    fs::create_dir_all(&cfg.output)?;
    write_config_echo(cfg)?;
    for &eps in &cfg.epsilons {
        let started = Instant::now();
        let table = grid_table(cfg, eps)?;
        let mut out = String::from("time,observable,method,value\n");
        for (r, row) in table.rows.iter().enumerate() {
            let t = r as f64 * cfg.record_dt;
            for name in &observables {
                writeln!(
                    out,
                    "{t:.16e},{name},grid,{:.16e}",
                    row[table.column_index(name)]
                )
                .unwrap();
            }
        }
        let path = series_path(cfg, eps, "grid");
        fs::write(&path, out)?;
        let ckpt = cfg
            .output
            .join(format!("{}-eps{}.ckpt", cfg.name, format_eps(eps)));
        let file = fs::File::create(&ckpt)?;
        write_checkpoint(&table.final_state, std::io::BufWriter::new(file))?;
        println!(
            "wrote {} and {} ({:.1}s)",
            path.display(),
            ckpt.display(),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

/// Extract the ε encoded in a series filename (the `-eps…-` segment).
fn epsilon_from_filename(path: &Path) -> Option<f64> {
    let stem = path.file_stem()?.to_str()?;
    let at = stem.rfind("-eps")?;
    let digits: String = stem[at + 4..]
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    digits.parse().ok()
}

/// `converge`: aggregate error tables into per-method convergence fits.
pub fn converge(pattern: &str, output: &Path) -> CliResult<()> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| CliError::Config(format!("bad input pattern `{pattern}`: {e}")))?
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    if paths.is_empty() {
        return Err(CliError::Config(format!("no inputs match `{pattern}`")));
    }
    // (method, eps bits) → (error sum, row count, eps)
    let mut acc: BTreeMap<(String, u64), (f64, usize, f64)> = BTreeMap::new();
    for path in &paths {
        let eps = epsilon_from_filename(path).ok_or_else(|| {
            CliError::Config(format!(
                "cannot read an epsilon from `{}` (expected an `-eps…` segment)",
                path.display()
            ))
        })?;
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some("time,observable,method,value,reference,error") => {}
            _ => {
                return Err(CliError::Config(format!(
                    "`{}` is not an error table (header must be \
                     time,observable,method,value,reference,error)",
                    path.display()
                )))
            }
        }
        for (idx, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(CliError::Config(format!(
                    "{}:{}: expected 6 fields, got {}",
                    path.display(),
                    idx + 2,
                    fields.len()
                )));
            }
            let error: f64 = fields[5].parse().map_err(|_| {
                CliError::Config(format!(
                    "{}:{}: error field `{}` is not a number",
                    path.display(),
                    idx + 2,
                    fields[5]
                ))
            })?;
            let entry = acc
                .entry((fields[2].to_string(), eps.to_bits()))
                .or_insert((0.0, 0, eps));
            entry.0 += error;
            entry.1 += 1;
        }
    }

    let mut by_method: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((method, _), (sum, count, eps)) in &acc {
        by_method
            .entry(method.clone())
            .or_default()
            .push((*eps, sum / *count as f64));
    }
    let mut rows = Vec::new();
    for (method, mut points) in by_method {
        if points.len() < 3 {
            return Err(CliError::Config(format!(
                "method {method} has {} epsilon value(s); a convergence fit needs at least 3",
                points.len()
            )));
        }
        points.sort_by(|a, b| b.0.total_cmp(&a.0));
        let slope = log_log_slope(&points);
        for (eps, mean_error) in points {
            rows.push((method.clone(), eps, mean_error, slope));
        }
    }
    write_convergence_csv(output, &rows)?;
    println!("wrote {}", output.display());
    Ok(())
}
