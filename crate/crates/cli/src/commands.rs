use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use lambdamix::config::{apply_override, parse_override, ProfileSpec, PulseConfig, RunMode};
use lambdamix::fit::{Controls, Model, Observation, Target};
use lambdamix::geometry::{transverse_average, RayResult};
use lambdamix::steady::OdPoint;
use lambdamix::{
    fit_params, od_from_delay, simulate_pulse, sweep_od, validate_config, Config, Cplx, Error, FitProblem,
    Result, RunKind,
};
use serde_json::{json, Value};

use crate::manifest::{as_manifest, RunManifest};
use crate::output::Outputs;
use crate::{Axis, Common, FitArgs};

struct Run {
    config: Config,
    warnings: Vec<String>,
    started: Instant,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve(mut doc: Value, set: &[String]) -> Result<Run> {
    for s in set {
        let (path, value) = parse_override(s)?;
        apply_override(&mut doc, &path, value)?;
    }
    let v = validate_config(&doc)?;
    Ok(Run {
        config: v.config,
        warnings: v.warnings,
        started: Instant::now(),
    })
}

fn load(path: &Path, set: &[String]) -> Result<Run> {
    let doc = read_json(path)?;
    let doc = match as_manifest(&doc) {
        Some(m) => m.config,
        None => doc,
    };
    resolve(doc, set)
}

fn finish(
    run: &Run,
    out: Outputs,
    subcommand: &str,
    axis: Option<Axis>,
    data_csv: Option<String>,
    converged: BTreeMap<String, bool>,
    dir: &Path,
) -> Result<bool> {
    let m = RunManifest {
        subcommand: subcommand.to_string(),
        axis,
        config: run.config.to_value(),
        data_csv,
        outputs: out
            .written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        wall_clock_s: run.started.elapsed().as_secs_f64(),
        converged,
        warnings: run.warnings.clone(),
    };
    m.write(dir)?;
    Ok(m.all_converged())
}

fn ray_average_applies(config: &Config) -> Option<(lambdamix::BeamGeometry, usize)> {
    match config.profile.as_ref()?.geometry(config.length_mm) {
        Some((g, n)) if g.probe_waist_um > 0.0 => Some((g, n)),
        _ => None,
    }
}

pub fn steady(c: &Common) -> Result<bool> {
    let run = load(&c.config, &c.set)?;
    run_steady(&run, &c.out)
}

fn run_steady(run: &Run, dir: &Path) -> Result<bool> {
    let cfg = &run.config;
    let params = cfg.params();
    let profile = cfg.control_profile()?;
    let solver = cfg.steady_solver();
    let sol = solver.solve(&profile, &params, Cplx::new(1.0, 0.0))?;
    let modes = sol.normal_modes(&profile)?;
    let mut out = Outputs::new(dir, "steady", cfg)?;
    out.steady_fields(&sol.fields, &modes, params.length_mm)?;
    let mut summary = json!({
        "T_p": sol.probe_transmission,
        "CE": sol.conversion_efficiency,
        "refinement_delta": sol.refinement_delta,
    });
    if let Some((geom, n_rays)) = ray_average_applies(cfg) {
        let avg = transverse_average(&geom, &params, &RunKind::Cw(solver), n_rays)?;
        summary["on_axis"] = json!({"T_p": sol.probe_transmission, "CE": sol.conversion_efficiency});
        summary["T_p"] = json!(avg.t_p);
        summary["CE"] = json!(avg.t_s);
        out.rays(&[(geom.delta_s_um, avg.rays)])?;
    }
    out.json("summary.json", &summary)?;
    let mut conv = BTreeMap::new();
    if solver.check_convergence {
        conv.insert("steady".to_string(), sol.refinement_delta.is_some());
    }
    finish(run, out, "steady", None, None, conv, dir)
}

/// Writes derived pulse timing and grid sizes back into the configuration.
fn pin_pulse(cfg: &mut Config) -> Result<()> {
    let pulse = cfg.pulse_spec()?;
    let grids = cfg.pulse_grids(&pulse)?;
    if let (Some(PulseConfig::Gaussian(g)), lambdamix::PulseSpec::Gaussian { t0, .. }) = (&mut cfg.pulse, &pulse) {
        g.t0 = Some(*t0);
    }
    let t = grids.t.as_ref().unwrap();
    cfg.grid.n_z = Some(grids.z.len());
    cfg.grid.n_t = Some(t.len());
    cfg.grid.t_span = Some(*t.last().unwrap());
    Ok(())
}

pub fn pulse(c: &Common) -> Result<bool> {
    let mut run = load(&c.config, &c.set)?;
    pin_pulse(&mut run.config)?;
    run_pulse(&run, &c.out)
}

fn run_pulse(run: &Run, dir: &Path) -> Result<bool> {
    let cfg = &run.config;
    let params = cfg.params();
    let profile = cfg.control_profile()?;
    let RunKind::Pulse { pulse, grids } = cfg.run_kind(RunMode::Pulse)? else {
        unreachable!()
    };
    let r = simulate_pulse(&pulse, &profile, &params, &grids)?;
    let mut out = Outputs::new(dir, "pulse", cfg)?;
    out.trace("trace.csv", &r, params.gamma_unit())?;
    let m = r.metrics;
    let mut metrics = json!({
        "T_p": m.t_p,
        "T_s": m.t_s,
        "delay_p": m.delay_p,
        "delay_s": m.delay_s,
        "delay_p_s": m.delay_p_seconds(&params),
        "delay_s_s": m.delay_s_seconds(&params),
        "clipped": m.clipped,
        "max_coherence": r.max_coherence,
    });
    if let Some((geom, n_rays)) = ray_average_applies(cfg) {
        let avg = transverse_average(&geom, &params, &RunKind::Pulse { pulse, grids }, n_rays)?;
        metrics["on_axis"] = json!({"T_p": m.t_p, "T_s": m.t_s});
        metrics["T_p"] = json!(avg.t_p);
        metrics["T_s"] = json!(avg.t_s);
        out.rays(&[(geom.delta_s_um, avg.rays)])?;
    }
    out.json("metrics.json", &metrics)?;
    finish(run, out, "pulse", None, None, BTreeMap::new(), dir)
}

pub fn sweep(c: &Common, axis: Axis) -> Result<bool> {
    let mut run = load(&c.config, &c.set)?;
    let mode = run.config.sweep.as_ref().map(|s| s.mode).unwrap_or_default();
    if mode == RunMode::Pulse {
        pin_pulse(&mut run.config)?;
    }
    run_sweep(&run, axis, &c.out)
}

/// Configuration of one sweep point: the base plus the swept value plus per-point overrides.
fn point_config(base: &Config, path: &str, value: f64, k: usize) -> Result<Config> {
    let mut doc = base.to_value();
    apply_override(&mut doc, path, json!(value))?;
    if let Some(o) = base.sweep.as_ref().and_then(|s| s.overrides.get(k)) {
        for (p, v) in o {
            apply_override(&mut doc, p, v.clone())?;
        }
    }
    Config::from_value(&doc)
}

fn run_sweep(run: &Run, axis: Axis, dir: &Path) -> Result<bool> {
    let cfg = &run.config;
    let spec = cfg.sweep.as_ref().ok_or_else(|| Error::MissingKey("sweep".into()))?;
    let n = match axis {
        Axis::Od => spec.alphas.len(),
        Axis::Ds => spec.ds_um.len(),
    };
    if !spec.overrides.is_empty() && spec.overrides.len() != n {
        return Err(Error::Config(format!(
            "sweep.overrides has {} entries for {n} sweep points",
            spec.overrides.len()
        )));
    }
    let mut out = Outputs::new(dir, &format!("sweep --axis {}", if axis == Axis::Od { "od" } else { "ds" }), cfg)?;
    let mut conv = BTreeMap::new();
    let summary = match axis {
        Axis::Od => {
            if spec.mode == RunMode::Pulse {
                return Err(Error::Config("optical-density sweeps run in cw mode".into()));
            }
            let rows: Vec<OdPoint> = if spec.overrides.is_empty() {
                sweep_od(&spec.alphas, &cfg.control_profile()?, &cfg.params(), &cfg.steady_solver())?
            } else {
                let mut rows = Vec::with_capacity(n);
                for (k, &a) in spec.alphas.iter().enumerate() {
                    let pc = point_config(cfg, "alpha", a, k)?;
                    rows.extend(sweep_od(&[a], &pc.control_profile()?, &pc.params(), &pc.steady_solver())?);
                }
                rows
            };
            if cfg.solver.check_convergence {
                conv.insert("sweep".into(), true);
            }
            out.od_sweep(&rows)?;
            let best = rows.iter().max_by(|a, b| a.ce.total_cmp(&b.ce));
            json!({"peak_alpha": best.map(|b| b.alpha), "peak_CE": best.map(|b| b.ce), "points": rows})
        }
        Axis::Ds => {
            if spec.ds_um.is_empty() {
                return Err(Error::MissingKey("sweep.ds_um".into()));
            }
            if !matches!(cfg.profile, Some(ProfileSpec::GaussianPair(_))) {
                return Err(Error::Config("separation sweeps need a gaussian-pair profile".into()));
            }
            let mut rows = Vec::with_capacity(n);
            let mut rays: Vec<(f64, Vec<RayResult<f64>>)> = Vec::with_capacity(n);
            for (k, &ds) in spec.ds_um.iter().enumerate() {
                let pc = point_config(cfg, "profile.delta_s_um", ds, k)?;
                let Some((geom, n_rays)) = pc.profile_spec()?.geometry(pc.length_mm) else {
                    unreachable!()
                };
                let kind = pc.run_kind(spec.mode)?;
                let avg = transverse_average(&geom, &pc.params(), &kind, n_rays)?;
                log::info!("ds = {ds} um: T_p = {:.5}, T_s = {:.5}", avg.t_p, avg.t_s);
                rows.push((ds, avg.t_p, avg.t_s));
                rays.push((ds, avg.rays));
            }
            if spec.mode == RunMode::Cw && cfg.solver.check_convergence {
                conv.insert("sweep".into(), true);
            }
            out.ds_sweep(&rows)?;
            out.rays(&rays)?;
            let best = rows.iter().max_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
            let points: Vec<Value> = rows
                .iter()
                .map(|&(d, p, s)| json!({"ds_um": d, "T_p": p, "T_s": s}))
                .collect();
            json!({"peak_ds_um": best.0, "peak_T_s": best.2, "points": points})
        }
    };
    out.json("summary.json", &summary)?;
    finish(run, out, "sweep", Some(axis), None, conv, dir)
}

/// Fit data rows as (override paths and values, T_p, T_s).
type DataRow = (Vec<(String, f64)>, Option<f64>, Option<f64>);

fn parse_data(text: &str) -> Result<Vec<DataRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    };
    let headers: Vec<String> = rdr.headers().map_err(parse_err)?.iter().map(str::to_string).collect();
    if !headers.iter().any(|h| h == "T_p" || h == "T_s") {
        return Err(Error::Parse {
            line: 1,
            message: "header needs a T_p or T_s column".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut overrides = Vec::new();
        let (mut t_p, mut t_s) = (None, None);
        for (h, cell) in headers.iter().zip(rec.iter()) {
            let v = if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {h}: '{cell}' is not a number"),
                })?)
            };
            match (h.as_str(), v) {
                ("T_p", v) => t_p = v,
                ("T_s", v) => t_s = v,
                (_, Some(v)) => overrides.push((h.clone(), v)),
                (_, None) => {
                    return Err(Error::Parse {
                        line,
                        message: format!("column {h} is empty"),
                    })
                }
            }
        }
        if t_p.is_none() && t_s.is_none() {
            return Err(Error::Parse {
                line,
                message: "row has neither T_p nor T_s".into(),
            });
        }
        rows.push((overrides, t_p, t_s));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

pub fn fit(f: &FitArgs) -> Result<bool> {
    if let Some(delay) = f.delay {
        return delay_mode(delay, f.omega_c.unwrap(), f.gamma31, &f.out);
    }
    let (config, data) = (f.config.as_ref().unwrap(), f.data.as_ref().unwrap());
    let doc = read_json(config)?;
    let (doc, embedded) = match as_manifest(&doc) {
        Some(m) => (m.config, m.data_csv),
        None => (doc, None),
    };
    let text = match embedded {
        Some(t) if !data.exists() => t,
        _ => std::fs::read_to_string(data)?,
    };
    let run = resolve(doc, &f.set)?;
    run_fit(&run, &text, &f.out)
}

fn run_fit(run: &Run, data: &str, dir: &Path) -> Result<bool> {
    let cfg = &run.config;
    let spec = cfg.fit.as_ref().ok_or_else(|| Error::MissingKey("fit".into()))?;
    let rows = parse_data(data)?;
    let mut observations = Vec::with_capacity(rows.len());
    for (overrides, t_p, t_s) in rows {
        let mut doc = cfg.to_value();
        for (p, v) in &overrides {
            apply_override(&mut doc, p, json!(v))?;
        }
        let pc = Config::from_value(&doc)?;
        let controls = match pc.profile_spec()?.geometry(pc.length_mm) {
            Some((geom, n_rays)) => Controls::Geometry { geom, n_rays },
            None => Controls::Profile(pc.control_profile()?),
        };
        observations.push(Observation {
            model: Model {
                params: pc.params(),
                controls,
                run: pc.run_kind(spec.mode)?,
            },
            target: Target::Transmissions { t_p, t_s },
        });
    }
    let problem = FitProblem {
        free: spec.free.clone(),
        observations,
        settings: spec.settings,
        extra_starts: spec.extra_starts.clone(),
    };
    let report = fit_params(&problem)?;
    let best: serde_json::Map<String, Value> = report
        .names
        .iter()
        .zip(&report.values)
        .map(|(n, v)| (n.to_string(), json!(v)))
        .collect();
    let mut out = Outputs::new(dir, "fit", cfg)?;
    out.json(
        "fit.json",
        &json!({
            "best_fit": best,
            "loss": report.loss,
            "initial_loss": report.initial_loss,
            "evaluations": report.evaluations,
            "converged": report.converged,
            "loss_trace": report.loss_trace,
            "settings": report.settings,
            "free": spec.free,
        }),
    )?;
    let mut conv = BTreeMap::new();
    conv.insert("fit".into(), report.converged);
    finish(run, out, "fit", None, Some(data.to_string()), conv, dir)
}

fn delay_mode(delay: f64, omega_c: f64, gamma31: f64, dir: &Path) -> Result<bool> {
    let started = Instant::now();
    let alpha = od_from_delay(delay, omega_c, gamma31)?;
    println!("alpha = {alpha}");
    std::fs::create_dir_all(dir)?;
    let args = json!({"delay": delay, "omega_c": omega_c, "gamma31": gamma31});
    std::fs::write(
        dir.join("od_from_delay.json"),
        serde_json::to_string_pretty(&json!({"alpha": alpha, "inputs": args}))? + "\n",
    )?;
    RunManifest {
        subcommand: "od-from-delay".into(),
        axis: None,
        config: args,
        data_csv: None,
        outputs: vec!["od_from_delay.json".into()],
        wall_clock_s: started.elapsed().as_secs_f64(),
        converged: BTreeMap::new(),
        warnings: vec![],
    }
    .write(dir)?;
    Ok(true)
}

pub fn rerun(manifest: &Path, dir: &Path) -> Result<bool> {
    let doc = read_json(manifest)?;
    let m = as_manifest(&doc).ok_or_else(|| Error::Config(format!("{} is not a run manifest", manifest.display())))?;
    if m.subcommand == "od-from-delay" {
        let get = |k: &str| {
            m.config[k]
                .as_f64()
                .ok_or_else(|| Error::MissingKey(format!("config.{k}")))
        };
        return delay_mode(get("delay")?, get("omega_c")?, get("gamma31")?, dir);
    }
    let run = resolve(m.config.clone(), &[])?;
    match m.subcommand.as_str() {
        "steady" => run_steady(&run, dir),
        "pulse" => run_pulse(&run, dir),
        "sweep" => run_sweep(&run, m.axis.ok_or_else(|| Error::MissingKey("axis".into()))?, dir),
        "fit" => run_fit(&run, m.data_csv.as_deref().ok_or_else(|| Error::MissingKey("data_csv".into()))?, dir),
        other => Err(Error::Config(format!("unknown subcommand '{other}' in manifest"))),
    }
}
