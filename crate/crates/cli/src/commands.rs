use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use panm::conic::Status;
use panm::estimator::{solve_panm, solve_plm, PanmParams, PlmParams};
use panm::experiments::{
    error_norm, run_mse_sweep, run_phase_transition, Estimator, Execution, PhaseGrid, SweepTable,
    TrialConfig,
};
use panm::localize::{dual_poly, localize};
use panm::model::{Measurement, PilotGrid, Scenario};
use panm::Error;

use crate::svg::{heatmap, Figure, PALETTE};
use crate::{Common, EstimateArgs, PhaseArgs, PlotArgs, SimArgs, SweepArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, scenario or input data.
    Input(String),
    /// Solver trouble or a failed write.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Run(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical { .. }
            | Error::Factorization(_)
            | Error::Eigen(_)
            | Error::Identifiability { .. }
            | Error::Io(_) => CliError::Run(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type Res<T = ()> = Result<T, CliError>;

fn read_input(path: &Path) -> Res<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Writes every artifact atomically, creating the directory first.
fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> Res {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))?;
    for (name, bytes) in files {
        panm::io::write_atomic(&dir.join(name), bytes).map_err(|e| CliError::Run(e.to_string()))?;
    }
    Ok(())
}

fn base_config(c: &Common, s: usize, r: usize, snr: f64) -> Res<TrialConfig> {
    let grid = PilotGrid::new(c.subcarriers, c.pilots, c.ts)?;
    let mut cfg = TrialConfig::new(grid, s, r, snr, c.lambda, c.seed);
    cfg.impulse_scale = c.impulse_scale;
    cfg.noise_ball = c.noise_ball;
    cfg.plm_grid = c.grid_size;
    cfg.settings = cfg.settings.with_tol(c.tol).with_max_iter(c.max_iter);
    cfg.validate()?;
    Ok(cfg)
}

fn sim_config(a: &SimArgs) -> Res<(TrialConfig, Option<Scenario>)> {
    let Some(path) = &a.scenario else {
        return Ok((base_config(&a.common, a.s, a.r, a.snr)?, None));
    };
    let text = String::from_utf8(read_input(path)?)
        .map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))?;
    let sc = Scenario::parse(&text)?;
    let mut cfg = base_config(&a.common, sc.s, sc.r, sc.snr_db)?;
    cfg.grid = sc.grid()?;
    cfg.lambda = sc.lambda;
    cfg.seed = sc.seed;
    cfg.impulse_scale = sc.impulse_scale;
    cfg.noise_ball = sc.noise_ball;
    cfg.validate()?;
    Ok((cfg, Some(sc)))
}

fn scenario_of(cfg: &TrialConfig) -> Scenario {
    Scenario {
        subcarriers: cfg.grid.subcarriers(),
        pilots: cfg.grid.pilots(),
        ts: cfg.grid.ts(),
        s: cfg.s,
        r: cfg.r,
        snr_db: cfg.snr_db,
        lambda: cfg.lambda,
        seed: cfg.seed,
        impulse_scale: cfg.impulse_scale,
        noise_ball: cfg.noise_ball,
    }
}

fn truth_files(cfg: &TrialConfig, meas: &Measurement) -> Res<Vec<(&'static str, Vec<u8>)>> {
    let truth = meas.truth.as_ref().expect("simulated measurement");
    let grid = &cfg.grid;
    let freqs = truth.channel.frequencies(grid);
    let taps = panm::localize::EstimateResult {
        delays: truth.channel.delays(),
        freqs,
        gains: truth.channel.gains(),
        impulse_support: truth.impulse_support.clone(),
        impulses: truth
            .impulse_support
            .iter()
            .map(|&k| truth.impulses[k])
            .collect(),
        h: truth.h.clone(),
    };
    Ok(vec![
        ("truth_taps.csv", taps.taps_csv()?),
        ("truth_impulses.csv", taps.impulses_csv(grid)?),
    ])
}

pub fn simulate(a: &SimArgs) -> Res {
    let (cfg, _) = sim_config(a)?;
    let meas = cfg.instance()?;
    let mut files = vec![
        ("measurement.csv", meas.to_csv(&cfg.grid)?),
        ("scenario.toml", scenario_of(&cfg).to_text().into_bytes()),
    ];
    files.extend(truth_files(&cfg, &meas)?);
    write_all(&a.common.out, &files)?;
    println!(
        "simulated P={} s={} r={} snr={} dB seed={} -> {}",
        cfg.grid.pilots(),
        cfg.s,
        cfg.r,
        cfg.snr_db,
        cfg.seed,
        a.common.out.display()
    );
    Ok(())
}

pub fn estimate(a: &EstimateArgs, flags: &str) -> Res {
    let (cfg, _) = sim_config(&a.sim)?;
    let estimator: Estimator = a.estimator.parse()?;
    let grid = cfg.grid;
    let meas = match &a.measurement {
        Some(path) => Measurement::from_csv(&read_input(path)?, &grid)?,
        None => cfg.instance()?,
    };
    let eps = cfg.epsilon()?;
    let mut files = vec![("measurement.csv", meas.to_csv(&grid)?)];
    let truth_f = meas
        .truth
        .as_ref()
        .map(|t| t.channel.frequencies(&grid))
        .unwrap_or_default();
    if meas.truth.is_some() {
        files.extend(truth_files(&cfg, &meas)?);
    }

    let (est, status, iters) = match estimator {
        Estimator::Panm => {
            let params = PanmParams::new(cfg.lambda, eps)?.with_settings(cfg.settings);
            let dual = solve_panm(&meas.y, &params)?;
            check_status(dual.result.status, dual.result.iterations)?;
            let est = localize(&meas.y, &grid, &dual, cfg.lambda, &cfg.localize)?;
            files.push(("dual.csv", dual.to_csv(&grid)?));
            files.push((
                "dual_poly.svg",
                dual_poly_svg(&dual.q, &grid, &truth_f, &est.freqs, flags)?.into_bytes(),
            ));
            let truth_imp = meas
                .truth
                .as_ref()
                .map(|t| t.impulse_support.clone())
                .unwrap_or_default();
            files.push((
                "dual_mag.svg",
                dual_mag_svg(&dual.q, cfg.lambda, &truth_imp, &est.impulse_support, flags)
                    .into_bytes(),
            ));
            (est, dual.result.status, dual.result.iterations)
        }
        Estimator::Plm => {
            let g = cfg.plm_grid_size();
            let params = PlmParams::new(cfg.lambda, eps, g)?.with_settings(cfg.settings);
            let sol = solve_plm(&meas.y, &grid, &params)?;
            check_status(sol.result.status, sol.result.iterations)?;
            let mut fig = Figure::new(
                "Grid coefficient magnitudes",
                "f",
                "|c_g|",
                (0.0, 1.0),
                (0.0, max_norm(&sol.c)),
            );
            let pts: Vec<(f64, f64)> = sol
                .c
                .iter()
                .enumerate()
                .map(|(k, c)| (k as f64 / g as f64, c.norm()))
                .collect();
            fig.stems(&pts, PALETTE[0]);
            fig.vlines(&truth_f, PALETTE[2], true, Some("true f"));
            files.push(("plm_coefficients.svg", fig.render(flags).into_bytes()));
            (
                sol.to_estimate(&grid, g),
                sol.result.status,
                sol.result.iterations,
            )
        }
    };
    files.push(("estimate.csv", est.taps_csv()?));
    files.push(("impulses.csv", est.impulses_csv(&grid)?));
    write_all(&a.sim.common.out, &files)?;
    let err = meas
        .truth
        .as_ref()
        .map(|t| error_norm(&t.h, &est.h).map(|e| format!(" |h-h_hat|={e:.4e}")))
        .transpose()?
        .unwrap_or_default();
    println!(
        "{estimator}: {status} after {iters} iterations, {} paths, {} impulses{err} -> {}",
        est.freqs.len(),
        est.impulse_support.len(),
        a.sim.common.out.display()
    );
    Ok(())
}

fn max_norm(v: &[Complex<f64>]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn check_status(status: Status, iters: usize) -> Res {
    if status == Status::Converged {
        Ok(())
    } else {
        Err(CliError::Run(format!(
            "solver stopped after {iters} iterations: {status}"
        )))
    }
}

fn dual_poly_svg(
    q: &[Complex<f64>],
    grid: &PilotGrid,
    truth: &[f64],
    est: &[f64],
    flags: &str,
) -> Res<String> {
    let n = 2048.max(8 * grid.pilots());
    let vals = dual_poly(q, grid, n)?;
    let pts: Vec<(f64, f64)> = vals
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 / n as f64, v.norm()))
        .collect();
    let mut fig = Figure::new("Dual polynomial", "f", "|Q(f)|", (0.0, 1.0), (0.0, 1.1));
    fig.polyline(&pts, PALETTE[0], Some("|Q(f)|"));
    fig.vlines(
        truth,
        PALETTE[2],
        false,
        (!truth.is_empty()).then_some("true f"),
    );
    fig.vlines(est, PALETTE[1], true, Some("estimated f"));
    Ok(fig.render(flags))
}

fn dual_mag_svg(
    q: &[Complex<f64>],
    lambda: f64,
    truth: &[usize],
    est: &[usize],
    flags: &str,
) -> String {
    let p = q.len();
    let mut fig = Figure::new(
        "Dual vector magnitude",
        "pilot position",
        "|q_k|",
        (0.0, p as f64 - 1.0),
        (0.0, 1.1 * lambda),
    );
    let pts: Vec<(f64, f64)> = q
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64, v.norm()))
        .collect();
    fig.polyline(&pts, PALETTE[0], Some("|q_k|"));
    fig.hline(lambda, "#777777", Some("lambda"));
    let mark = |s: &[usize]| {
        s.iter()
            .map(|&k| (k as f64, q[k].norm()))
            .collect::<Vec<_>>()
    };
    fig.markers(&mark(est), PALETTE[1], Some("detected impulses"));
    if !truth.is_empty() {
        fig.vlines(
            &truth.iter().map(|&k| k as f64).collect::<Vec<_>>(),
            PALETTE[2],
            true,
            Some("planted impulses"),
        );
    }
    fig.render(flags)
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn phase(a: &PhaseArgs, flags: &str) -> Res {
    if a.smin > a.smax || a.rmin > a.rmax {
        return Err(CliError::Input("empty s or r range".into()));
    }
    let s_values: Vec<usize> = (a.smin..=a.smax).collect();
    let r_values: Vec<usize> = (a.rmin..=a.rmax).collect();
    let base = base_config(&a.common, a.smax, a.rmax, a.snr)?;
    let grid = run_phase_transition(&base, &s_values, &r_values, a.trials, exec(a.sequential))?;
    for (s, r, k) in grid.cells() {
        println!("s={s} r={r} successes={k}/{}", grid.trials);
    }
    let svg = phase_svg(&grid, flags);
    write_all(
        &a.common.out,
        &[
            ("phase.csv", grid.to_csv()?),
            ("phase.svg", svg.into_bytes()),
        ],
    )
}

fn phase_svg(grid: &PhaseGrid, flags: &str) -> String {
    heatmap(
        "Empirical success rate",
        &grid.s_values,
        &grid.r_values,
        |i, j| grid.rate(i, j),
        flags,
    )
}

pub fn sweep(a: &SweepArgs, flags: &str) -> Res {
    let estimators = a
        .estimator
        .iter()
        .map(|e| e.parse())
        .collect::<Result<Vec<Estimator>, _>>()?;
    let base = base_config(&a.common, a.s, a.r, a.snr.first().copied().unwrap_or(10.0))?;
    let table = run_mse_sweep(&base, &a.snr, a.trials, &estimators, exec(a.sequential))?;
    for r in &table.rows {
        println!(
            "{} snr={} dB mean={:.4e} stderr={:.2e} trials={}",
            r.estimator, r.snr_db, r.mean_mse, r.stderr, r.trials
        );
    }
    let svg = sweep_svg(&table, flags);
    write_all(
        &a.common.out,
        &[
            ("sweep.csv", table.to_csv()?),
            ("sweep.svg", svg.into_bytes()),
        ],
    )
}

fn sweep_svg(t: &SweepTable, flags: &str) -> String {
    let xs = t.rows.iter().map(|r| r.snr_db);
    let (x0, x1) = xs
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        });
    let ymax = t
        .rows
        .iter()
        .map(|r| r.mean_mse + r.stderr)
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mut fig = Figure::new(
        "Channel error versus SNR",
        "SNR (dB)",
        "mean |h - h_hat|_2",
        (x0, x1),
        (0.0, 1.1 * ymax),
    );
    let mut names: Vec<Estimator> = Vec::new();
    for r in &t.rows {
        if !names.contains(&r.estimator) {
            names.push(r.estimator);
        }
    }
    for (i, e) in names.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let rows: Vec<_> = t.rows.iter().filter(|r| r.estimator == *e).collect();
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.snr_db, r.mean_mse)).collect();
        fig.polyline(&pts, color, Some(&e.to_string()));
        fig.markers(&pts, color, None);
        fig.error_bars(
            &rows
                .iter()
                .map(|r| (r.snr_db, r.mean_mse, r.stderr))
                .collect::<Vec<_>>(),
            color,
        );
    }
    fig.render(flags)
}

pub fn plot(a: &PlotArgs, flags: &str) -> Res {
    if a.phase.is_none() && a.sweep.is_none() {
        return Err(CliError::Input("plot needs --phase or --sweep".into()));
    }
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    if let Some(p) = &a.phase {
        let grid = PhaseGrid::from_csv(&read_input(p)?)?;
        files.push(("phase.svg", phase_svg(&grid, flags).into_bytes()));
    }
    if let Some(p) = &a.sweep {
        let table = SweepTable::from_csv(&read_input(p)?)?;
        files.push(("sweep.svg", sweep_svg(&table, flags).into_bytes()));
    }
    write_all(&a.out, &files)?;
    let names: Vec<PathBuf> = files.iter().map(|(n, _)| a.out.join(n)).collect();
    println!(
        "wrote {}",
        names
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}
