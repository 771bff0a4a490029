use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use serde_json::{json, Value};
use tvspec_core::adaptive::{reconstruct_kernel, run_adaptive, EstimatorConfig, RunResult};
use tvspec_core::eval::{
    default_bandwidth_grid, detect_break, freq_average, optimal_global_bandwidth, squared_error, truth_plane, ErrorReport,
    Margin,
};
use tvspec_core::io::{
    config_to_toml, read_config, read_plane_csv, read_raw_bin, read_series_csv, write_plane_csv, write_raw_bin,
    write_series_csv, Container,
};
use tvspec_core::raw::preperiodogram_modified;
use tvspec_core::sim::{generate, ModelSpec, DEFAULT_SHIFT};
use tvspec_core::smoother::{smooth_nonadaptive, smooth_pointwise};
use tvspec_core::{EstGrid, RawGrid, RawPlane};

use crate::manifest::{sha256_file, Manifest};
use crate::render::{render, Ramp};
use crate::{Command, Failure, GridArgs, Model, ModelArgs, RawFormat};

type Res<T = ()> = anyhow::Result<T>;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Failure::Usage(msg.into()).into()
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json(path: &Path, v: &Value) -> Res {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn model_spec(m: &ModelArgs) -> Res<ModelSpec> {
    let len = m.len;
    let at = |num: usize| ((num * len) as f64 / 1024.0).round().max(1.0) as usize;
    let spec = match m.model {
        Model::WnBreak => {
            if m.shift.is_some() {
                return Err(usage("--shift applies to tvma2-break only"));
            }
            let sigma1 = m.sigma.unwrap_or(1.0);
            ModelSpec::WhiteNoiseBreak {
                t0: m.t0.unwrap_or_else(|| at(576)),
                sigma1,
                sigma2: m.sigma2.unwrap_or(10f64.sqrt() * sigma1),
            }
        }
        Model::Tvma2 => {
            if m.t0.is_some() || m.sigma.is_some() || m.sigma2.is_some() || m.shift.is_some() {
                return Err(usage("tvma2 takes no --t0, --sigma, --sigma2 or --shift"));
            }
            ModelSpec::Tvma2
        }
        Model::Tvma2Break => {
            if m.sigma2.is_some() {
                return Err(usage("--sigma2 applies to wn-break only"));
            }
            ModelSpec::BreakTvma2 {
                t0: m.t0.unwrap_or_else(|| at(410)),
                sigma: m.sigma.unwrap_or(1.0),
                shift: m.shift.unwrap_or(DEFAULT_SHIFT),
            }
        }
    };
    spec.validate(len)?;
    Ok(spec)
}

/// Parses `name[:key=value,...]`.
fn parse_truth_model(text: &str, len: usize) -> Res<ModelSpec> {
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let model = Model::from_str(name, true).map_err(|_| usage(format!("unknown model {name:?}")))?;
    let mut m = ModelArgs { model, len, t0: None, sigma: None, sigma2: None, shift: None };
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("expected key=value, got {kv:?}")))?;
        let bad = || usage(format!("bad value for {k}: {v:?}"));
        match k.trim() {
            "t0" => m.t0 = Some(v.trim().parse().map_err(|_| bad())?),
            "sigma" => m.sigma = Some(v.trim().parse().map_err(|_| bad())?),
            "sigma2" => m.sigma2 = Some(v.trim().parse().map_err(|_| bad())?),
            "shift" => m.shift = Some(v.trim().parse().map_err(|_| bad())?),
            other => return Err(usage(format!("unknown model parameter {other:?}"))),
        }
    }
    model_spec(&m)
}

fn est_grid(len: usize, g: &GridArgs) -> Res<EstGrid> {
    Ok(EstGrid::new(RawGrid::new(len)?, g.d_t.unwrap_or(1), g.d_f.unwrap_or(1))?)
}

fn load_config(path: Option<&Path>, len: usize, grid: Option<&GridArgs>) -> Res<EstimatorConfig> {
    let mut cfg = match path {
        Some(p) => read_config(p, len).with_context(|| format!("reading {}", p.display()))?,
        None => EstimatorConfig::for_length(len),
    };
    if let Some(g) = grid {
        cfg.d_t = g.d_t.unwrap_or(cfg.d_t);
        cfg.d_f = g.d_f.unwrap_or(cfg.d_f);
    }
    cfg.validate(len)?;
    Ok(cfg)
}

fn check_warnings(cfg: &EstimatorConfig, len: usize, strict: bool) -> Res {
    let warnings = cfg.warnings(len);
    for w in &warnings {
        log::warn!("{w}");
    }
    if strict && !warnings.is_empty() {
        return Err(Failure::Strict(warnings).into());
    }
    Ok(())
}

fn write_diagnostics(path: &Path, res: &RunResult<f64>) -> Res {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for d in &res.diagnostics {
        writeln!(w, "{}", serde_json::to_string(d)?)?;
    }
    w.flush()?;
    Ok(())
}

fn write_history(path: &Path, res: &RunResult<f64>) -> Res {
    let mut planes = Vec::with_capacity(4 * res.history.len());
    for s in &res.history {
        planes.extend([s.f_hat.clone(), s.n_hat.clone(), s.b_eff.clone(), s.theta.clone()]);
    }
    Container::for_grid(&res.state.grid, planes).write(path)?;
    Ok(())
}

fn write_raw_csv(path: &Path, raw: &RawPlane<f64>) -> Res {
    let g = raw.grid();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "tau,j,value")?;
    for i in 0..g.n_times() {
        for j in 0..g.n_freqs() {
            writeln!(w, "{},{j},{}", g.tau(i), num(raw.get(i, j)))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn report_json(r: &ErrorReport<f64>) -> Value {
    json!({ "mse": r.mse, "se_quantiles": r.se_quantiles, "n_points": r.n_points })
}

fn ensure_dir(dir: &Path) -> Res {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn run(cmd: Command, strict: bool) -> Res {
    match cmd {
        Command::Simulate { model, seed, out, truth, grid } => {
            let spec = model_spec(&model)?;
            let series = generate::<f64>(&spec, model.len, seed)?;
            let mut man = Manifest::new("simulate");
            man.seed = Some(seed);
            write_series_csv(&out, &series)?;
            man.output("series", &out)?;
            if let Some(t) = truth {
                let plane = truth_plane::<f64>(&spec, &est_grid(model.len, &grid)?)?;
                write_plane_csv(&t, &plane)?;
                man.output("truth", &t)?;
            }
            man.write_beside(&out)
        }
        Command::Preperiodogram { input, out, format } => {
            let series = read_series_csv(&input)?;
            let raw = preperiodogram_modified(&series)?;
            let mut man = Manifest::new("preperiodogram");
            man.input("series", &input)?;
            match format {
                RawFormat::Bin => write_raw_bin(&out, &raw)?,
                RawFormat::Csv => write_raw_csv(&out, &raw)?,
            }
            man.output("raw", &out)?;
            man.write_beside(&out)
        }
        Command::Baseline { raw, bt, bf, out, grid } => {
            let plane = read_raw_bin(&raw)?;
            let g = est_grid(plane.grid().len(), &grid)?;
            let est = smooth_nonadaptive(&plane, bt, bf, &g)?;
            let mut man = Manifest::new("baseline");
            man.input("raw", &raw)?;
            write_plane_csv(&out, &est)?;
            man.output("estimate", &out)?;
            man.write_beside(&out)
        }
        Command::Estimate { raw, config, out, history } => {
            let plane = read_raw_bin(&raw)?;
            let len = plane.grid().len();
            let mut cfg = load_config(config.as_deref(), len, None)?;
            check_warnings(&cfg, len, strict)?;
            cfg.keep_history |= history;
            ensure_dir(&out)?;
            let mut man = Manifest::new("estimate");
            man.input("raw", &raw)?;
            if let Some(c) = &config {
                man.input("config", c)?;
            }
            let res = run_adaptive(&plane, &cfg)?;
            let files = [out.join("estimate.csv"), out.join("diagnostics.jsonl"), out.join("config.toml")];
            write_plane_csv(&files[0], &res.estimate)?;
            write_diagnostics(&files[1], &res)?;
            fs::write(&files[2], config_to_toml(&cfg))?;
            for (role, f) in ["estimate", "diagnostics", "config"].iter().zip(&files) {
                man.output(role, f)?;
            }
            if history {
                let h = out.join("history.bin");
                write_history(&h, &res)?;
                man.output("history", &h)?;
            }
            man.config = Some(cfg);
            man.iteration_timings = res.timings.clone();
            man.write(&out.join("manifest.json"))
        }
        Command::Evaluate { est, truth_model, truth, report, margin } => {
            let plane = read_plane_csv(&est)?;
            let len = plane.grid().raw().len();
            let mut man = Manifest::new("evaluate");
            man.input("estimate", &est)?;
            let truth_plane = match (&truth_model, &truth) {
                (Some(m), _) => truth_plane::<f64>(&parse_truth_model(m, len)?, plane.grid())?,
                (None, Some(t)) => {
                    man.input("truth", t)?;
                    read_plane_csv(t)?
                }
                (None, None) => return Err(usage("one of --truth-model or --truth is required")),
            };
            let m = margin.then(|| {
                let b = tvspec_core::adaptive::default_initial_bandwidth(len);
                Margin { u: b, lambda: 2.0 * std::f64::consts::PI * b }
            });
            let (r, _) = squared_error(&plane, &truth_plane, m)?;
            let mut v = report_json(&r);
            v["margin"] = json!(m.map(|m| json!({ "u": m.u, "lambda": m.lambda })));
            write_json(&report, &v)?;
            man.output("report", &report)?;
            man.write_beside(&report)
        }
        Command::Kernel { result, u, lambda, out } => {
            if !(0.0..=1.0).contains(&u) || !(0.0..=std::f64::consts::PI).contains(&lambda) {
                return Err(usage(format!("point ({u}, {lambda}) lies outside [0,1] x [0,pi]")));
            }
            let (raw_path, hash) = crate::manifest::recorded_input(&result, "raw")
                .map_err(|e| Failure::Data(format!("{}: {e}", result.display())))?;
            if sha256_file(&raw_path).ok().as_deref() != Some(hash.as_str()) {
                return Err(Failure::Data(format!("raw input {} is missing or has changed", raw_path.display())).into());
            }
            let plane = read_raw_bin(&raw_path)?;
            let len = plane.grid().len();
            let mut cfg = load_config(Some(&result.join("config.toml")), len, None)?;
            cfg.keep_history = true;
            let res = run_adaptive(&plane, &cfg)?;
            let km = reconstruct_kernel(&res, &plane, u, lambda)?;
            let rg = plane.grid();
            let mut w = BufWriter::new(fs::File::create(&out)?);
            writeln!(w, "u,lambda,weight,penalty")?;
            for i in 0..rg.n_times() {
                for j in 0..rg.n_freqs() {
                    let wt = km.weights.get(i, j);
                    if wt != 0.0 {
                        let pen = km.penalty.get(i, j);
                        let pen = if pen.is_nan() { "NaN".to_string() } else { num(pen) };
                        writeln!(w, "{},{},{},{pen}", num(rg.u(i)), num(rg.lambda(j)), num(wt))?;
                    }
                }
            }
            w.flush()?;
            drop(w);
            let mut man = Manifest::new("kernel");
            man.input("raw", &raw_path)?;
            man.input("config", &result.join("config.toml"))?;
            man.config = Some(cfg);
            man.output("kernel", &out)?;
            log::info!(
                "kernel at u={:.4}, lambda={:.4}: weight sum {:.6e}, stored N {:.6e}",
                km.u,
                km.lambda,
                km.weight_sum(),
                km.n_hat
            );
            man.write_beside(&out)
        }
        Command::Render { plane, out, ramp } => {
            let p = read_plane_csv(&plane)?;
            let (bytes, side) = render(&p, ramp);
            fs::write(&out, bytes)?;
            let mut sidecar = out.clone().into_os_string();
            sidecar.push(".json");
            let sidecar = std::path::PathBuf::from(sidecar);
            write_json(&sidecar, &serde_json::to_value(&side)?)?;
            let mut man = Manifest::new("render");
            man.input("plane", &plane)?;
            man.output("image", &out)?;
            man.output("scaling", &sidecar)?;
            man.write_beside(&out)
        }
        Command::Demo { example, len, seed, out, config, grid } => demo(example, len, seed, &out, config.as_deref(), &grid, strict),
    }
}

fn demo(example: Model, len: usize, seed: u64, out: &Path, config: Option<&Path>, grid: &GridArgs, strict: bool) -> Res {
    let spec = model_spec(&ModelArgs { model: example, len, t0: None, sigma: None, sigma2: None, shift: None })?;
    let cfg = load_config(config, len, Some(grid))?;
    check_warnings(&cfg, len, strict)?;
    ensure_dir(out)?;
    let mut man = Manifest::new("demo");
    man.seed = Some(seed);
    if let Some(c) = config {
        man.input("config", c)?;
    }

    let series = generate::<f64>(&spec, len, seed)?;
    let p = |name: &str| out.join(name);
    write_series_csv(&p("series.csv"), &series)?;
    let raw = preperiodogram_modified(&series)?;
    write_raw_bin(&p("raw.bin"), &raw)?;

    let res = run_adaptive(&raw, &cfg)?;
    let g = res.estimate.grid().clone();
    let truth = truth_plane::<f64>(&spec, &g)?;
    let (bt, bf) = res.last_search_bandwidths().unwrap_or_else(|| res.final_search_bandwidths());
    let (na_same, _) = smooth_pointwise(&raw, &g, &bt, &bf)?;
    let opt = optimal_global_bandwidth(&raw, &truth, &default_bandwidth_grid(len), None)?;

    write_plane_csv(&p("truth.csv"), &truth)?;
    write_plane_csv(&p("estimate.csv"), &res.estimate)?;
    write_plane_csv(&p("na_same.csv"), &na_same)?;
    write_plane_csv(&p("na_opt.csv"), &opt.estimate)?;
    write_diagnostics(&p("diagnostics.jsonl"), &res)?;
    fs::write(p("config.toml"), config_to_toml(&cfg))?;
    let (img, side) = render(&res.estimate, Ramp::Heat);
    fs::write(p("estimate.ppm"), img)?;
    write_json(&p("estimate.ppm.json"), &serde_json::to_value(&side)?)?;

    let r_ad = squared_error(&res.estimate, &truth, None)?.0;
    let r_same = squared_error(&na_same, &truth, None)?.0;
    let r_opt = opt.report.clone();
    let brk = detect_break(&g.us::<f64>(), &freq_average(&res.estimate))?;
    let summary = json!({
        "example": example.to_possible_value().map(|v| v.get_name().to_string()),
        "T": len,
        "seed": seed,
        "iterations": res.iterations(),
        "stop_reason": res.diagnostics.last().map(|d| d.stop_reason),
        "mse_adaptive": r_ad.mse,
        "mse_na_same_window": r_same.mse,
        "mse_na_opt": r_opt.mse,
        "se_quantiles_adaptive": r_ad.se_quantiles,
        "se_quantiles_na_same_window": r_same.se_quantiles,
        "se_quantiles_na_opt": r_opt.se_quantiles,
        "na_opt_bandwidths": { "b_t": opt.b_t, "b_f": opt.b_f },
        "break_location": {
            "u_hat": brk.u_hat,
            "statistic": brk.statistic,
            "confident": brk.confident,
            "true_u": spec.break_u(len),
        },
    });
    write_json(&p("summary.json"), &summary)?;
    log::info!(
        "MSE adaptive {:.4e}, nonadaptive same window {:.4e}, oracle global {:.4e}; break at u = {:.4}",
        r_ad.mse,
        r_same.mse,
        r_opt.mse,
        brk.u_hat
    );

    for name in [
        "series.csv",
        "raw.bin",
        "truth.csv",
        "estimate.csv",
        "na_same.csv",
        "na_opt.csv",
        "diagnostics.jsonl",
        "config.toml",
        "estimate.ppm",
        "estimate.ppm.json",
        "summary.json",
    ] {
        man.output(name.split('.').next().unwrap_or(name), &p(name))?;
    }
    man.config = Some(cfg);
    man.iteration_timings = res.timings.clone();
    man.write(&p("manifest.json"))
}
