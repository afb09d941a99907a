use serde_json::{json, Value};

use super::config::{ModelKind, OutputFormat, RunConfig};
use super::{CliError, Report, SCHEMA_VERSION};
use crate::dynamics::{divisibility_report, GeneratorSpec, TimeGrid};
use crate::error::Error;
use crate::io::{format_float, parse_generator, read_state_file, CsvTable};
use crate::measure::{
    n_measure, pair_bloch, sweep as run_sweep, trajectory as run_trajectory, MeasureSettings, PairEvolution,
};
use crate::models::{semigroup_generator, JCParams, SpinBathParams};
use crate::state::{DensityMatrix, StatePair};

enum Process {
    Generator(GeneratorSpec),
    SpinBath(SpinBathParams),
}

impl Process {
    fn evolution(&self) -> &dyn PairEvolution {
        match self {
            Process::Generator(g) => g,
            Process::SpinBath(s) => s,
        }
    }
}

fn jc_params(cfg: &RunConfig, delta: f64) -> Result<JCParams, CliError> {
    Ok(JCParams::new(cfg.gamma0_over_lambda, 1.0, delta)?)
}

fn jc_generator(cfg: &RunConfig, delta: f64) -> Result<GeneratorSpec, CliError> {
    let p = jc_params(cfg, delta)?;
    Ok(if cfg.clamp_rate { p.clamped_generator() } else { p.generator() })
}

fn spin_bath(cfg: &RunConfig) -> Result<SpinBathParams, CliError> {
    Ok(SpinBathParams::new(1.0, cfg.n_spins)?)
}

fn custom_generator(cfg: &RunConfig) -> Result<GeneratorSpec, CliError> {
    let path = cfg.generator_file.as_ref().ok_or_else(|| CliError::Config("no generator_file".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read generator file {}: {e}", path.display())))?;
    parse_generator(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn process(cfg: &RunConfig) -> Result<Process, CliError> {
    Ok(match cfg.model {
        ModelKind::Jc => Process::Generator(jc_generator(cfg, cfg.delta_over_lambda)?),
        ModelKind::Spinbath => Process::SpinBath(spin_bath(cfg)?),
        ModelKind::Semigroup => Process::Generator(semigroup_generator(1.0)?),
        ModelKind::CustomFile => Process::Generator(custom_generator(cfg)?),
    })
}

type RateCurve = Box<dyn Fn(f64) -> crate::Result<f64>>;

/// Analytic rate of the configured model, if it has one.
fn analytic_rate(cfg: &RunConfig) -> Result<Option<RateCurve>, CliError> {
    Ok(match cfg.model {
        ModelKind::Jc => {
            let p = jc_params(cfg, cfg.delta_over_lambda)?;
            let clamp = cfg.clamp_rate;
            Some(Box::new(move |t| p.rate(t).map(|g| if clamp { g.max(0.0) } else { g })))
        }
        ModelKind::Spinbath => {
            let p = spin_bath(cfg)?;
            Some(Box::new(move |t| p.rate(t)))
        }
        ModelKind::Semigroup => Some(Box::new(|_| Ok(1.0))),
        ModelKind::CustomFile => None,
    })
}

fn parse_bloch(s: &str) -> Result<DensityMatrix, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("bad Bloch vector `{s}`")))?;
    match v.as_slice() {
        [x, y, z] => Ok(DensityMatrix::from_bloch(*x, *y, *z)?),
        _ => Err(CliError::Config(format!("Bloch vector `{s}` needs three components"))),
    }
}

/// `sz`, `sx`, `bloch:x,y,z;x,y,z` or `files:PATH1,PATH2`.
fn parse_pair(spec: &str, dim: usize) -> Result<StatePair, CliError> {
    let pair = match spec.trim() {
        "sz" => StatePair::sigma_z_pair(dim)?,
        "sx" => StatePair::sigma_x_pair(dim)?,
        s => {
            if let Some(rest) = s.strip_prefix("bloch:") {
                let (a, b) = rest
                    .split_once(';')
                    .ok_or_else(|| CliError::Config(format!("expected `bloch:x,y,z;x,y,z`, found `{s}`")))?;
                StatePair::new(parse_bloch(a)?, parse_bloch(b)?)?.labelled(s)
            } else if let Some(rest) = s.strip_prefix("files:") {
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| CliError::Config(format!("expected `files:PATH1,PATH2`, found `{s}`")))?;
                let read = |p: &str| {
                    read_state_file(p.trim().as_ref()).map_err(|e| CliError::Config(format!("{}: {e}", p.trim())))
                };
                StatePair::new(read(a)?, read(b)?)?.labelled(s)
            } else {
                return Err(CliError::Config(format!("unknown pair spec `{s}`")));
            }
        }
    };
    if pair.dim() != dim {
        return Err(CliError::Config(format!("pair has dimension {}, model has {dim}", pair.dim())));
    }
    Ok(pair)
}

fn unit(cfg: &RunConfig) -> &'static str {
    cfg.model.unit()
}

fn model_name(cfg: &RunConfig) -> String {
    serde_json::to_value(cfg.model).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn preamble(command: &str, cfg: &RunConfig) -> Vec<String> {
    let mut lines = vec![format!("command = {command}"), format!("model = {}", model_name(cfg))];
    match cfg.model {
        ModelKind::Jc => {
            lines.push(format!("gamma0_over_lambda = {}", format_float(cfg.gamma0_over_lambda)));
            if command != "sweep" {
                lines.push(format!("delta_over_lambda = {}", format_float(cfg.delta_over_lambda)));
            }
            lines.push(format!("clamp_rate = {}", cfg.clamp_rate));
        }
        ModelKind::Spinbath => lines.push(format!("n_spins = {}", cfg.n_spins)),
        ModelKind::Semigroup => {}
        ModelKind::CustomFile => {
            if let Some(p) = &cfg.generator_file {
                lines.push(format!("generator_file = {}", p.display()));
            }
        }
    }
    lines
}

fn cell_value(cell: &str) -> Value {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => json!(v),
        Ok(_) => Value::Null,
        Err(_) => match cell {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => Value::String(cell.to_string()),
        },
    }
}

fn table_report(command: &str, cfg: &RunConfig, format: OutputFormat, table: CsvTable, extra: Value) -> Report {
    match format {
        OutputFormat::Csv => Report::Csv { preamble: preamble(command, cfg), table },
        OutputFormat::Json => {
            let rows: Vec<Value> =
                table.rows.iter().map(|r| Value::Array(r.iter().map(|c| cell_value(c)).collect())).collect();
            let mut v = json!({
                "schema_version": SCHEMA_VERSION,
                "command": command,
                "config": cfg,
                "columns": table.headers,
                "rows": rows,
            });
            if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
                m.extend(e);
            }
            Report::Json(v)
        }
    }
}

fn nan() -> String {
    format_float(f64::NAN)
}

pub(super) fn rate(cfg: &RunConfig, format: OutputFormat) -> Result<Report, CliError> {
    let grid = TimeGrid::covering(cfg.horizon, cfg.step)?;
    let u = unit(cfg);
    let t_col = format!("t [1/{u}]");
    let g_col = format!("gamma [{u}]");
    let table = match cfg.model {
        ModelKind::Jc => {
            let deltas = if cfg.delta_points.is_some() { cfg.delta_range() } else { vec![cfg.delta_over_lambda] };
            let mut table = CsvTable::new(&["delta [lambda]", &t_col, &g_col, "Gamma", "sigma_pm [lambda]", "status"]);
            for delta in deltas {
                let p = jc_params(cfg, delta)?;
                for t in grid.times() {
                    let row = match (p.rate(t), p.integrated_rate(t)) {
                        (Ok(g), Ok(big)) => {
                            let g = if cfg.clamp_rate { g.max(0.0) } else { g };
                            vec![format_float(g), format_float(big), format_float(-g * (-big).exp() + 0.0), "ok".into()]
                        }
                        (Err(Error::AmplitudeZero { .. }), _) | (_, Err(Error::AmplitudeZero { .. })) => {
                            vec![nan(), nan(), nan(), "amplitude-zero".into()]
                        }
                        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
                    };
                    let mut full = vec![format_float(delta), format_float(t)];
                    full.extend(row);
                    table.push(full);
                }
            }
            table
        }
        ModelKind::Spinbath => {
            let p = spin_bath(cfg)?;
            let mut table = CsvTable::new(&[&t_col, &g_col, "status"]);
            for t in grid.times() {
                let (g, status) = match p.rate(t) {
                    Ok(g) => (format_float(g), "ok"),
                    Err(Error::RatePole { .. }) => (nan(), "pole"),
                    Err(e) => return Err(e.into()),
                };
                table.push(vec![format_float(t), g, status.into()]);
            }
            table
        }
        ModelKind::Semigroup => {
            let mut table = CsvTable::new(&[&t_col, &g_col, "status"]);
            for t in grid.times() {
                table.push(vec![format_float(t), format_float(1.0), "ok".into()]);
            }
            table
        }
        ModelKind::CustomFile => {
            return Err(CliError::Config("model `custom-file` has no analytic rate".into()));
        }
    };
    Ok(table_report("rate", cfg, format, table, json!({})))
}

pub(super) fn trajectory(cfg: &RunConfig, format: OutputFormat) -> Result<Report, CliError> {
    let process = process(cfg)?;
    let evo = process.evolution();
    let pair = parse_pair(&cfg.pair, evo.dim())?;
    let traj = run_trajectory(evo, &pair, cfg.horizon, cfg.step)?;
    let u = unit(cfg);
    let mut table = CsvTable::new(&[&format!("t [1/{u}]"), "D", &format!("sigma [{u}]")]);
    for k in 0..traj.len() {
        table.push(vec![format_float(traj.times[k]), format_float(traj.distances[k]), format_float(traj.sigma[k])]);
    }
    let mut report = table_report("trajectory", cfg, format, table, json!({ "pair": pair.label }));
    if let Report::Csv { preamble, .. } = &mut report {
        preamble.push(format!("pair = {}", cfg.pair));
    }
    Ok(report)
}

fn settings(cfg: &RunConfig) -> MeasureSettings {
    MeasureSettings {
        threshold: cfg.threshold,
        n_pairs: cfg.n_pairs,
        seed: cfg.rng_seed(),
        ..MeasureSettings::new(cfg.horizon, cfg.step)
    }
}

pub(super) fn measure(cfg: &RunConfig, format: OutputFormat) -> Result<Report, CliError> {
    let process = process(cfg)?;
    let r = n_measure(process.evolution(), &settings(cfg))?;
    let bloch = pair_bloch(&r.best_pair);
    let label = r.best_pair.label.clone().unwrap_or_default();
    Ok(match format {
        OutputFormat::Json => Report::Json(json!({
            "schema_version": SCHEMA_VERSION,
            "command": "measure",
            "config": cfg,
            "n_value": r.n_value,
            "horizon": r.horizon,
            "diverging": r.diverging,
            "intervals": r.intervals,
            "best_pair": { "label": label, "bloch": bloch },
            "samples_evaluated": r.samples_evaluated,
            "seed": r.seed.0,
            "canonical": r.canonical,
            "sampled_max": r.sampled_max,
            "failures": r.failures,
        })),
        OutputFormat::Csv => {
            let u = unit(cfg);
            let mut pre = preamble("measure", cfg);
            pre.push(format!("n_value = {}", format_float(r.n_value)));
            pre.push(format!("horizon = {}", format_float(r.horizon)));
            pre.push(format!("diverging = {}", r.diverging));
            pre.push(format!("best_pair = {label}"));
            if let Some([a, b]) = bloch {
                let v = |x: [f64; 3]| x.map(format_float).join(",");
                pre.push(format!("best_pair_bloch = {};{}", v(a), v(b)));
            }
            pre.push(format!("samples_evaluated = {}", r.samples_evaluated));
            pre.push(format!("seed = {}", r.seed.0));
            for f in &r.failures {
                pre.push(format!("failure = {}: {}", f.label, f.message));
            }
            let mut table = CsvTable::new(&[&format!("start [1/{u}]"), &format!("end [1/{u}]"), "contribution"]);
            for i in &r.intervals {
                table.push(vec![format_float(i.start), format_float(i.end), format_float(i.contribution)]);
            }
            Report::Csv { preamble: pre, table }
        }
    })
}

/// Runs the sweep; the second element is an error iff every point failed.
pub(super) fn sweep(cfg: &RunConfig, format: OutputFormat) -> Result<(Report, Result<(), CliError>), CliError> {
    if cfg.model != ModelKind::Jc {
        return Err(CliError::Config("sweep supports model `jc` only (detuning range)".into()));
    }
    let deltas = cfg.delta_range();
    let family = |d: f64| {
        let p = JCParams::new(cfg.gamma0_over_lambda, 1.0, d)?;
        Ok(if cfg.clamp_rate { p.clamped_generator() } else { p.generator() })
    };
    let records = run_sweep(family, &deltas, &settings(cfg))?;
    let mut table = CsvTable::new(&["delta [lambda]", "N_sampled_max", "N_canonical_pair", "N", "best_pair", "error"]);
    for r in &records {
        table.push(vec![
            format_float(r.parameter),
            format_float(r.n_sampled_max),
            format_float(r.n_canonical),
            format_float(r.n_value),
            r.best_pair.clone(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    let outcome = if records.iter().all(|r| r.error.is_some()) {
        Err(CliError::SweepFailed(records.len(), records[0].error.clone().unwrap_or_default()))
    } else {
        Ok(())
    };
    let mut report = table_report("sweep", cfg, format, table, json!({ "records": records }));
    if let Report::Csv { preamble, .. } = &mut report {
        preamble.push(format!("n_pairs = {}", cfg.n_pairs));
        preamble.push(format!("seed = {}", cfg.seed));
    }
    Ok((report, outcome))
}

/// Smallest rate on `[t1, t2]` sampled at the integration step.
fn min_rate(rate: &dyn Fn(f64) -> crate::Result<f64>, t1: f64, t2: f64, h: f64) -> f64 {
    let n = ((t2 - t1) / h).ceil().max(1.0) as usize;
    (0..=n).map(|k| rate(t1 + (t2 - t1) * k as f64 / n as f64).unwrap_or(f64::NAN)).fold(f64::INFINITY, |m, g| {
        if g.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.min(g)
        }
    })
}

pub(super) fn divisibility(cfg: &RunConfig, format: OutputFormat) -> Result<Report, CliError> {
    let gen = match process(cfg)? {
        Process::Generator(g) => g,
        Process::SpinBath(s) => s.formal_generator(),
    };
    if cfg.interval > cfg.horizon {
        return Err(CliError::Config("`interval` exceeds `horizon`".into()));
    }
    let grid = TimeGrid::covering(cfg.horizon, cfg.interval)?;
    let report = divisibility_report(&gen, &grid, cfg.cp_tolerance, cfg.step)?;
    let rate = analytic_rate(cfg)?;
    let u = unit(cfg);
    let mut table = CsvTable::new(&[
        &format!("t_start [1/{u}]"),
        &format!("t_end [1/{u}]"),
        "is_cp",
        "least_choi_eigenvalue",
        &format!("min_rate [{u}]"),
    ]);
    for v in &report.intervals {
        let m = rate.as_ref().map_or(f64::NAN, |r| min_rate(r.as_ref(), v.t_start, v.t_end, cfg.step));
        table.push(vec![
            format_float(v.t_start),
            format_float(v.t_end),
            v.is_cp.to_string(),
            format_float(v.least_eigenvalue),
            format_float(m),
        ]);
    }
    let mut out = table_report("divisibility", cfg, format, table, json!({ "divisible": report.divisible }));
    if let Report::Csv { preamble, .. } = &mut out {
        preamble.push(format!("divisible = {}", report.divisible));
        preamble.push(format!("cp_tolerance = {}", format_float(cfg.cp_tolerance)));
    }
    Ok(out)
}
