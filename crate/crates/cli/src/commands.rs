//! Command implementations. Each returns what it read and wrote; the
//! manifest is assembled by [`execute`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use besov_sparse::experiments::{
    build_dome_lightning_rod, build_mollified_log, calibrate_cstar, counterexample_report, default_host_grid, eta_for,
    linear_fit, mixing_constant, mollified_log_report, verify_mixing_lemma, Calibration,
};
use besov_sparse::io::{read_field, write_field};
use besov_sparse::lp::{besov_11_fd, default_hmax};
use besov_sparse::nse::{find_escape_times, simulate, MonitorConstants, MonitorRecord, Preset, SimulationParams};
use besov_sparse::sparse::{mixed, remark_3d_implies_1d, semi_mixed, sparseness_1d, sparseness_3d};
use besov_sparse::{
    besov_inf_inf, component_superlevel, scalar_superlevel, AnyField, Grid3, LPBank, LevelSet, ScalarField, Sign,
    VectorField,
};
use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::config::{relative_to, SimulationConfig};
use crate::format::{g17, write_csv, write_json};
use crate::manifest::{strip_out_dir, FileRef, RunManifest, SCHEMA};
use crate::{exit, CliError, CliResult};

pub const THREADS_VAR: &str = "BESOV_SPARSE_THREADS";

/// Sizes the global thread pool from [`THREADS_VAR`].
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::param(format!("{THREADS_VAR}={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::param(format!("cannot size thread pool: {e}")))
}

/// What a command consumed and produced.
#[derive(Default)]
pub struct RunRecord {
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub calibration: Option<FileRef>,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<PathBuf>,
}

/// `calibration.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub lambda: f64,
    pub delta: f64,
    #[serde(flatten)]
    pub calibration: Calibration,
}

/// Runs the parsed command and writes its manifest; returns the manifest
/// path.
pub fn execute(cli: Cli, argv: &[String]) -> CliResult<PathBuf> {
    if let Command::Rerun(r) = &cli.command {
        return rerun(&r.manifest, &cli.out_dir);
    }
    let cwd = std::env::current_dir().map_err(|e| CliError::new(exit::IO, format!("working directory: {e}")))?;
    run_and_record(cli, strip_out_dir(argv), cwd)
}

fn run_and_record(cli: Cli, argv: Vec<String>, cwd: PathBuf) -> CliResult<PathBuf> {
    let out = cli.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let start = Instant::now();
    let (name, rec) = match &cli.command {
        Command::Field(a) => ("field", run_field(a, &out)?),
        Command::Norms(a) => ("norms", run_norms(a, &out)?),
        Command::Sparseness(a) => ("sparseness", run_sparseness(a, &out)?),
        Command::Experiment(ExperimentCommand::Lemma(a)) => ("experiment lemma", run_lemma(a, &out)?),
        Command::Experiment(ExperimentCommand::Counterexample(a)) => {
            ("experiment counterexample", run_counterexample(a, &out)?)
        }
        Command::Experiment(ExperimentCommand::MollifiedLog(a)) => {
            ("experiment mollified-log", run_mollified_log(a, &out)?)
        }
        Command::Experiment(ExperimentCommand::Calibrate(a)) => ("experiment calibrate", run_calibrate(a, &out)?),
        Command::Simulate(a) => ("simulate", run_simulate(a, &out)?),
        Command::Rerun(_) => unreachable!("handled by execute"),
    };
    let outputs = rec
        .outputs
        .iter()
        .map(|p| {
            let mut r = FileRef::of(p)?;
            r.path = p.strip_prefix(&out).unwrap_or(p).to_path_buf();
            Ok(r)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = RunManifest {
        schema: SCHEMA,
        tool: "besov-sparse".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        argv,
        cwd,
        config: rec.config,
        seed: rec.seed,
        calibration: rec.calibration,
        inputs: rec.inputs,
        outputs,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    manifest.write(&out)
}

fn rerun(manifest_path: &Path, out: &Path) -> CliResult<PathBuf> {
    let m = RunManifest::load(manifest_path)?;
    let out = std::path::absolute(out).map_err(|e| CliError::io(out, e))?;
    let mut argv = m.argv.clone();
    argv.push("--out-dir".into());
    argv.push(out.display().to_string());
    let cli = Cli::try_parse_from(&argv).map_err(|e| {
        CliError::new(exit::IO, format!("{}: recorded arguments do not parse: {e}", manifest_path.display()))
    })?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(CliError::new(exit::IO, format!("{}: manifest records a rerun", manifest_path.display())));
    }
    std::env::set_current_dir(&m.cwd).map_err(|e| CliError::io(&m.cwd, e))?;
    run_and_record(cli, m.argv, m.cwd)
}

fn load_field(path: &Path) -> CliResult<AnyField> {
    read_field(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn config_echo(args: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(args).expect("argument structs serialise")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

fn run_field(a: &FieldArgs, out: &Path) -> CliResult<RunRecord> {
    let grid = Grid3::new(a.n, a.length.unwrap_or(std::f64::consts::TAU))?;
    let vector = |p: Preset| -> CliResult<AnyField> { Ok(AnyField::Vector(p.velocity(&grid)?.scaled(a.amplitude))) };
    let field = match a.kind {
        FieldKind::Zero => vector(Preset::Zero)?,
        FieldKind::Shear => vector(Preset::Shear)?,
        FieldKind::TaylorGreen => vector(Preset::TaylorGreen)?,
        FieldKind::RandomBand => {
            AnyField::Vector(Preset::RandomBand { seed: a.seed, kmax: a.kmax, amplitude: a.amplitude }.velocity(&grid)?)
        }
        FieldKind::Cosine => {
            if !(1..=3).contains(&a.axis) {
                return Err(CliError::param(format!("axis {} must be 1, 2 or 3", a.axis)));
            }
            let k = a.mode as f64 * std::f64::consts::TAU / grid.length();
            AnyField::Scalar(ScalarField::from_fn(grid, |x| a.amplitude * (k * x[a.axis - 1]).cos())?)
        }
        FieldKind::Dome => AnyField::Scalar(build_dome_lightning_rod(a.n_rod, &grid)?.scaled(a.amplitude)),
        FieldKind::MollifiedLog => AnyField::Scalar(build_mollified_log(a.eps, &grid)?.scaled(a.amplitude)),
    };
    let path = out.join("field.bsf1");
    write_field(&field, &path).map_err(|e| CliError::from(e).context(path.display()))?;
    let seed = (a.kind == FieldKind::RandomBand).then_some(a.seed);
    Ok(RunRecord { config: config_echo(a), seed, outputs: vec![path], ..Default::default() })
}

fn run_norms(a: &NormsArgs, out: &Path) -> CliResult<RunRecord> {
    let field = load_field(&a.input)?;
    let grid = *field.grid();
    let bank = LPBank::new(grid)?;
    let hmax = a.hmax.unwrap_or_else(|| default_hmax(&grid));
    let mut rows = vec![vec!["linf".into(), String::new(), "all".into(), g17(field.linf_norm()), String::new()]];
    for &s in &a.s {
        let b = besov_inf_inf(&field, s, &bank)?;
        rows.push(vec!["besov_inf_inf".into(), g17(s), "all".into(), g17(b.value), b.j_star.to_string()]);
    }
    let comps: Vec<(String, &ScalarField)> = match &field {
        AnyField::Scalar(f) => vec![("all".into(), f)],
        AnyField::Vector(u) => (0..3).map(|i| ((i + 1).to_string(), u.component(i))).collect(),
    };
    for &eps in &a.eps {
        for (label, f) in &comps {
            let v = besov_11_fd(f, eps, hmax)?;
            rows.push(vec!["besov_11_fd".into(), g17(eps), label.clone(), g17(v), String::new()]);
        }
    }
    let path = out.join("norms.csv");
    write_csv(&path, &["norm", "parameter", "component", "value", "j_star"], &rows).map_err(io_err(&path))?;
    Ok(RunRecord {
        config: config_echo(a),
        inputs: vec![FileRef::of(&a.input)?],
        outputs: vec![path],
        ..Default::default()
    })
}

fn check_delta(delta: f64) -> CliResult<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(CliError::param(format!("delta {} must lie in (0, 1)", g17(delta))))
    }
}

fn level_set(field: &AnyField, component: Option<usize>, sign: Sign, lambda: f64) -> CliResult<LevelSet> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(CliError::param(format!("lambda {} must lie in (0, 1)", g17(lambda))));
    }
    match field {
        AnyField::Scalar(f) => {
            if component.is_some_and(|c| c != 1) {
                return Err(CliError::param("scalar input has only component 1"));
            }
            Ok(scalar_superlevel(f, sign, lambda * f.linf_norm())?)
        }
        AnyField::Vector(u) => {
            let i = component.ok_or_else(|| CliError::param("vector input needs --component"))?;
            Ok(component_superlevel(u, i, sign, lambda)?)
        }
    }
}

fn run_sparseness(a: &SparsenessArgs, out: &Path) -> CliResult<RunRecord> {
    check_delta(a.delta)?;
    let field = load_field(&a.input)?;
    let sign = match a.sign {
        SignArg::Plus => Sign::Plus,
        SignArg::Minus => Sign::Minus,
    };
    let set = level_set(&field, a.component, sign, a.lambda)?;
    let report = match a.mode {
        Mode::OneD => serde_json::to_value(sparseness_1d(&set, a.center, a.scale, a.ndir, a.delta)?),
        Mode::ThreeD => serde_json::to_value(sparseness_3d(&set, a.center, a.scale, a.delta)?),
        Mode::Semi => serde_json::to_value(semi_mixed(&set, a.scale, a.delta)?),
        Mode::Mixed => serde_json::to_value(mixed(&set, a.scale, a.delta)?),
        Mode::Remark => serde_json::to_value(remark_3d_implies_1d(&set, a.center, a.scale, a.delta, a.ndir)?),
    }
    .expect("reports serialise");
    let doc = json!({
        "mode": a.mode,
        "set": {
            "component": set.meta().component,
            "sign": set.meta().sign,
            "threshold": set.meta().threshold,
            "volume_fraction": set.volume_fraction(),
        },
        "report": report,
    });
    let path = out.join("sparseness.json");
    write_json(&path, &doc).map_err(io_err(&path))?;
    Ok(RunRecord {
        config: config_echo(a),
        inputs: vec![FileRef::of(&a.input)?],
        outputs: vec![path],
        ..Default::default()
    })
}

fn missing_calibration(path: &Path) -> CliError {
    CliError::new(
        exit::MISSING_ARTIFACT,
        format!("calibration file {} not found; run `besov-sparse experiment calibrate` first", path.display()),
    )
}

pub fn load_calibration(path: &Path) -> CliResult<(CalibrationFile, FileRef)> {
    if !path.is_file() {
        return Err(missing_calibration(path));
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let cal: CalibrationFile =
        serde_json::from_str(&text).map_err(|e| CliError::new(exit::IO, format!("{}: {e}", path.display())))?;
    Ok((cal, FileRef::of(path)?))
}

fn run_lemma(a: &LemmaArgs, out: &Path) -> CliResult<RunRecord> {
    let (cal, cal_ref) = load_calibration(&a.calibration)?;
    let u = match load_field(&a.input)? {
        AnyField::Vector(u) => u,
        AnyField::Scalar(_) => {
            return Err(CliError::param(format!("{}: lemma needs a vector field", a.input.display())))
        }
    };
    let c = &cal.calibration;
    let params = mixing_constant(cal.lambda, cal.delta, c.eps, c.c_star)?;
    let bank = LPBank::new(*u.grid())?;
    let verdict = verify_mixing_lemma(&u, &params, a.scale, &bank)?;
    let grid_matches = u.grid().n() == c.n && u.grid().length() == c.length;
    let doc = json!({
        "verdict": verdict,
        "calibration": cal_ref,
        "calibration_grid_matches": grid_matches,
    });
    let path = out.join("lemma.json");
    write_json(&path, &doc).map_err(io_err(&path))?;
    Ok(RunRecord {
        config: config_echo(a),
        seed: Some(c.seed),
        calibration: Some(cal_ref),
        inputs: vec![FileRef::of(&a.input)?],
        outputs: vec![path],
    })
}

fn run_counterexample(a: &CounterexampleArgs, out: &Path) -> CliResult<RunRecord> {
    let rows = counterexample_report(&a.n_list, &default_host_grid(), a.zoom_n)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                g17(r.r),
                g17(r.r_linf),
                g17(r.l2_squared),
                g17(r.besov_11),
                g17(r.besov_lower_bound),
                g17(r.ratio),
                g17(r.set_ratio),
                g17(r.complement_ratio),
                r.set_semi_mixed.to_string(),
                r.mixed.to_string(),
                g17(r.delta),
            ]
        })
        .collect();
    let path = out.join("counterexample.csv");
    let header = [
        "n",
        "r",
        "r_linf",
        "l2_squared",
        "besov_11",
        "besov_lower_bound",
        "ratio",
        "set_ratio",
        "complement_ratio",
        "set_semi_mixed",
        "mixed",
        "delta",
    ];
    write_csv(&path, &header, &table).map_err(io_err(&path))?;
    Ok(RunRecord { config: config_echo(a), outputs: vec![path], ..Default::default() })
}

fn run_mollified_log(a: &MollifiedLogArgs, out: &Path) -> CliResult<RunRecord> {
    let rows = mollified_log_report(&a.eps)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![g17(r.eps), g17(r.linf), g17(r.besov0), g17(r.ratio), r.j_star.to_string(), r.levels.to_string()])
        .collect();
    let path = out.join("mollified_log.csv");
    write_csv(&path, &["eps", "linf", "besov0", "ratio", "j_star", "levels"], &table).map_err(io_err(&path))?;

    let x: Vec<f64> = rows.iter().map(|r| (1.0 / r.eps).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.linf).collect();
    let fit = linear_fit(&x, &y);
    let b0 = rows.iter().map(|r| r.besov0);
    let (lo, hi) = b0.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let summary = json!({
        "linf_vs_log_inv_eps": { "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared },
        "besov0_max_over_min": hi / lo,
        "ratio_strictly_increasing": rows.windows(2).all(|w| w[1].ratio > w[0].ratio),
    });
    let spath = out.join("mollified_log_summary.json");
    write_json(&spath, &summary).map_err(io_err(&spath))?;
    Ok(RunRecord { config: config_echo(a), outputs: vec![path, spath], ..Default::default() })
}

fn run_calibrate(a: &CalibrateArgs, out: &Path) -> CliResult<RunRecord> {
    let grid = Grid3::new(a.n, a.length.unwrap_or(std::f64::consts::TAU))?;
    // validates (λ, δ, ε) before the expensive part
    mixing_constant(a.lambda, a.delta, a.eps, 1.0)?;
    let eta = eta_for(a.lambda, a.delta);
    let calibration = calibrate_cstar(&grid, eta, a.eps, a.trials, a.seed)?;
    let file = CalibrationFile { lambda: a.lambda, delta: a.delta, calibration };
    let path = out.join("calibration.json");
    write_json(&path, &file).map_err(io_err(&path))?;
    Ok(RunRecord { config: config_echo(a), seed: Some(a.seed), outputs: vec![path], ..Default::default() })
}

const MONITOR_HEADER: [&str; 15] = [
    "t",
    "linf",
    "besov_m1",
    "besov_0",
    "r",
    "f1p",
    "f1m",
    "f2p",
    "f2m",
    "f3p",
    "f3m",
    "smallness",
    "nonsmallness",
    "sparsity",
    "scale_clamped",
];

fn monitor_row(r: &MonitorRecord) -> Vec<String> {
    let mut row = vec![g17(r.t), g17(r.linf), g17(r.besov_m1), g17(r.besov_0), g17(r.r)];
    row.extend(r.fractions.iter().map(|&f| g17(f)));
    row.extend([r.smallness, r.nonsmallness, r.sparsity, r.scale_clamped].map(|b| b.to_string()));
    row
}

fn run_simulate(a: &SimulateArgs, out: &Path) -> CliResult<RunRecord> {
    let cfg = SimulationConfig::load(&a.config)?;
    let grid = Grid3::new(cfg.grid.n, cfg.grid.length)?;
    let mut inputs = vec![FileRef::of(&a.config)?];
    let u0: VectorField = match (&cfg.preset, &cfg.input) {
        (Some(p), _) => p.velocity(&grid)?,
        (None, Some(rel)) => {
            let path = relative_to(&a.config, rel);
            let u = match load_field(&path)? {
                AnyField::Vector(u) => u,
                AnyField::Scalar(_) => {
                    return Err(CliError::param(format!("{}: initial data must be a vector field", path.display())))
                }
            };
            if *u.grid() != grid {
                return Err(CliError::param(format!("{}: grid differs from the config grid", path.display())));
            }
            inputs.push(FileRef::of(&path)?);
            u
        }
        (None, None) => unreachable!("checked when loading"),
    };
    let mut calibration = None;
    let c_star = match (cfg.constants.c_star, &cfg.constants.calibration) {
        (Some(c), _) => c,
        (None, Some(rel)) => {
            let (cal, r) = load_calibration(&relative_to(&a.config, rel))?;
            calibration = Some(r);
            cal.calibration.c_star
        }
        (None, None) => {
            return Err(CliError::new(
                exit::MISSING_ARTIFACT,
                "config gives neither constants.c_star nor constants.calibration; run `besov-sparse experiment calibrate` first",
            ))
        }
    };
    let consts = MonitorConstants::new(cfg.constants.c_m, cfg.constants.ctilde_m, c_star)?;
    let params = SimulationParams {
        nu: cfg.nu,
        dt: cfg.dt,
        t_end: cfg.t_end,
        cadence: cfg.cadence,
        subtract_mean: cfg.flags.subtract_mean,
    };

    let mut outputs = Vec::new();
    let snap_dir = out.join("snapshots");
    if cfg.snapshot_every.is_some() {
        std::fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
    }
    let every = cfg.snapshot_every.unwrap_or(0);
    let trajectory = simulate(&u0, &params, &consts, |step, state| {
        if every > 0 && step % every == 0 {
            let path = snap_dir.join(format!("snap_{step:06}.bsf1"));
            write_field(&AnyField::Vector(state.velocity()), &path)?;
            outputs.push(path);
        }
        Ok(())
    })?;

    let rows: Vec<Vec<String>> = trajectory.records.iter().map(monitor_row).collect();
    let csv_path = out.join("monitor.csv");
    write_csv(&csv_path, &MONITOR_HEADER, &rows).map_err(io_err(&csv_path))?;
    let escapes = find_escape_times(&trajectory.records, &consts);
    let doc = json!({
        "constants": consts,
        "t_end": cfg.t_end,
        "steps": trajectory.steps,
        "records": trajectory.records.len(),
        "max_divergence": trajectory.max_divergence,
        "consistency_incidents": trajectory.incidents,
        "escape_times": escapes,
    });
    let esc_path = out.join("escape_times.json");
    write_json(&esc_path, &doc).map_err(io_err(&esc_path))?;
    outputs.insert(0, esc_path);
    outputs.insert(0, csv_path);
    Ok(RunRecord {
        config: serde_json::to_value(&cfg).expect("config serialises"),
        seed: match cfg.preset {
            Some(Preset::RandomBand { seed, .. }) => Some(seed),
            _ => None,
        },
        calibration,
        inputs,
        outputs,
    })
}
