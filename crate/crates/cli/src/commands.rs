//! The five subcommands. Each returns the files it wrote.

use std::path::PathBuf;

use grover_decoherence::analysis::{extract_c, fit_ensemble, DecayFit, FitSource, FitWindow, RateScale};
use grover_decoherence::density::exact_series;
use grover_decoherence::grover::ideal_probability;
use grover_decoherence::observables::{default_sigma, husimi_summary, w_searched, HusimiSummary, Observable};
use grover_decoherence::{
    run_ensemble, run_trajectory, trajectory_rng, EnsembleSpec, GroverCircuit, GroverConfig, NoiseModel,
    StateVector, TrajectoryEnsemble,
};

use crate::config::{CommandKind, ExperimentConfig};
use crate::output::{ensure_dir, gamma_tag, gnuplot_lines, gnuplot_matrix, num, write_script, OutputFile};
use crate::CliError;

/// Largest default Husimi output grid.
pub const DEFAULT_HUSIMI_BINS: usize = 256;

/// Validation tolerance: fraction of recorded points that must lie within
/// three standard errors, per (point, seed, observable).
pub const VALIDATE_COVERAGE: f64 = 0.95;
/// Slack for points whose ensemble standard error is exactly zero.
pub const VALIDATE_SLACK: f64 = 1e-9;
/// Required agreement when `Gamma = 0`.
pub const VALIDATE_EXACT_TOL: f64 = 1e-8;

struct Point {
    config: GroverConfig,
    circuit: GroverCircuit,
    t_max: usize,
}

impl Point {
    fn notes(&self) -> Vec<String> {
        let c = &self.config;
        vec![
            format!(
                "n_q={} n_tot={} tau={} n_u={} N={}",
                c.n_q(),
                c.n_tot(),
                c.tau(),
                c.n_units(),
                c.search_size()
            ),
            format!("omega_G={} t_G={}", num(c.omega()), num(c.t_grover())),
            format!(
                "n_g_actual={} n_g_paper={} tick_mode={} ticks_per_iteration={} t_max={}",
                self.circuit.n_g_actual(),
                self.circuit.n_g_paper().map_or_else(|| "NA".into(), |n| n.to_string()),
                self.circuit.tick_mode().as_str(),
                self.circuit.ticks_per_iteration(),
                self.t_max
            ),
        ]
    }

    fn tag(&self) -> String {
        format!("nq{}_tau{}", self.config.n_q(), self.config.tau())
    }
}

fn points(cfg: &ExperimentConfig) -> Result<Vec<Point>, CliError> {
    let mut out = Vec::new();
    for &n_q in &cfg.n_q {
        for tau in cfg.taus(n_q) {
            let config = GroverConfig::new(n_q, tau)?;
            let circuit = GroverCircuit::build(config)?.with_tick_mode(cfg.tick_mode)?;
            let t_max = cfg.t_max_for(&config);
            out.push(Point { config, circuit, t_max });
        }
    }
    Ok(out)
}

fn ensemble(cfg: &ExperimentConfig, p: &Point, noise: &NoiseModel, seed: u64) -> Result<TrajectoryEnsemble, CliError> {
    let spec = EnsembleSpec::new(p.t_max, cfg.trajectories, seed).with_workers(cfg.workers);
    Ok(run_ensemble(&p.circuit, noise, spec)?)
}

fn write_series(
    cfg: &ExperimentConfig,
    kind: CommandKind,
    path: PathBuf,
    p: &Point,
    ens: &TrajectoryEnsemble,
) -> Result<Vec<PathBuf>, CliError> {
    let mut notes = p.notes();
    notes.push(format!(
        "Gamma={} trajectories={} seed={} jumps={}",
        num(ens.gamma()),
        ens.trajectories(),
        ens.spec().master_seed,
        ens.total_jumps()
    ));
    let mut f = OutputFile::new(path, kind, cfg, &notes);
    f.row(["t", "w_G", "w_G_se", "w_4", "w_4_se", "f", "f_se"]);
    for r in ens.series().records {
        let mut row = vec![r.t.to_string()];
        for obs in Observable::ALL {
            row.push(num(r.mean.get(obs)));
            row.push(num(r.stderr.get(obs)));
        }
        f.row(row);
    }
    let title = format!("{} Gamma={}", p.tag(), num(ens.gamma()));
    let path = f.write()?;
    let mut written = vec![path.clone()];
    if cfg.gnuplot {
        written.push(write_script(
            &path,
            gnuplot_lines(&path, &title, &[(2, "w_G"), (4, "w_4"), (6, "f")]),
        )?);
    }
    Ok(written)
}

/// `(t, w_G analytic, w_G circuit)` for every configured point.
pub fn ideal(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    let mut worst: f64 = 0.0;
    for p in points(cfg)? {
        let path = cfg.out.join(format!("ideal_{}.csv", p.tag()));
        let mut f = OutputFile::new(path, CommandKind::Ideal, cfg, &p.notes());
        f.row(["t", "w_G_analytic", "w_G_circuit", "abs_diff"]);
        let mut state = StateVector::uniform_state(p.config.n_q(), 0)?;
        for t in 0..=p.t_max {
            if t > 0 {
                p.circuit.apply(&mut state)?;
            }
            let analytic = ideal_probability(t, &p.config);
            let circuit = w_searched(&state, &p.config)?;
            let diff = (analytic - circuit).abs();
            worst = worst.max(diff);
            f.row([t.to_string(), num(analytic), num(circuit), num(diff)]);
        }
        let path = f.write()?;
        if cfg.gnuplot {
            written.push(write_script(
                &path,
                gnuplot_lines(&path, &p.tag(), &[(2, "analytic"), (3, "circuit")]),
            )?);
        }
        written.push(path);
    }
    eprintln!("largest |analytic - circuit| = {worst:.3e}");
    if worst > VALIDATE_EXACT_TOL {
        return Err(CliError::ValidationFailed(format!(
            "circuit deviates from the closed form by {worst:.3e}"
        )));
    }
    Ok(written)
}

/// One ensemble series file per point and rate.
pub fn trajectories(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    for p in points(cfg)? {
        for &gamma in &cfg.gamma {
            eprintln!("trajectories: {} Gamma={gamma:e}", p.tag());
            let ens = ensemble(cfg, &p, &NoiseModel::new(gamma)?, cfg.seed)?;
            let path = cfg.out.join(format!("traj_{}_g{}.csv", p.tag(), gamma_tag(gamma)));
            written.extend(write_series(cfg, CommandKind::Trajectories, path, &p, &ens)?);
        }
    }
    Ok(written)
}

/// Column order of `fit_report.csv`.
pub const FIT_REPORT_COLUMNS: [&str; 17] = [
    "source",
    "n_tot",
    "n_q",
    "tau",
    "n_u",
    "Gamma",
    "n_g_used",
    "gamma",
    "gamma_stderr",
    "C",
    "window_lo",
    "window_hi",
    "status",
    "n_g_actual",
    "n_g_paper",
    "C_actual",
    "C_paper",
];

struct ScanRow {
    fit: DecayFit,
    scales: [Option<RateScale>; 3],
}

/// Sweeps points and rates, fits `w_G` peaks, `w_4` and `f`, and writes the
/// fit report and the `C` summary.
pub fn scan(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    let mut report = OutputFile::new(
        cfg.out.join("fit_report.csv"),
        CommandKind::Scan,
        cfg,
        &["C = gamma / (Gamma n_g n_tot); fits use the full recorded window".into()],
    );
    report.row(FIT_REPORT_COLUMNS);
    let mut rows: Vec<(FitSource, ScanRow)> = Vec::new();

    for p in points(cfg)? {
        for &gamma in &cfg.gamma {
            eprintln!("scan: {} Gamma={gamma:e}", p.tag());
            let ens = ensemble(cfg, &p, &NoiseModel::new(gamma)?, cfg.seed)?;
            let path = cfg.out.join(format!("series_{}_g{}.csv", p.tag(), gamma_tag(gamma)));
            written.extend(write_series(cfg, CommandKind::Scan, path, &p, &ens)?);

            let n_tot = p.config.n_tot();
            let used = RateScale {
                gamma,
                n_g: p.circuit.ticks_per_iteration(),
                n_tot,
            };
            let actual = RateScale {
                n_g: p.circuit.n_g_actual(),
                ..used
            };
            let paper = p.circuit.n_g_paper().map(|n_g| RateScale { n_g, ..used });
            for source in FitSource::ALL {
                let mut row = vec![
                    source.as_str().to_string(),
                    n_tot.to_string(),
                    p.config.n_q().to_string(),
                    p.config.tau().to_string(),
                    p.config.n_units().to_string(),
                    num(gamma),
                    used.n_g.to_string(),
                ];
                let tail = vec![
                    p.circuit.n_g_actual().to_string(),
                    p.circuit.n_g_paper().map_or_else(String::new, |n| n.to_string()),
                ];
                match fit_ensemble(&ens, source, FitWindow::new(0, p.t_max)) {
                    Ok(fit) => {
                        let c = |s: Option<RateScale>| {
                            s.and_then(|s| s.normalize(&fit)).map_or_else(String::new, |(c, _)| num(c))
                        };
                        let status = if gamma == 0.0 { "excluded:gamma=0" } else { "ok" };
                        row.extend([
                            num(fit.rate),
                            num(fit.rate_stderr),
                            c(Some(used)),
                            fit.window.lo.to_string(),
                            fit.window.hi.to_string(),
                            status.to_string(),
                        ]);
                        row.extend(tail);
                        row.extend([c(Some(actual)), c(paper)]);
                        rows.push((
                            source,
                            ScanRow {
                                fit,
                                scales: [Some(used), Some(actual), paper],
                            },
                        ));
                    }
                    Err(e) => {
                        let status = format!("failed:{}", e.to_string().replace(',', ";"));
                        row.extend([String::new(), String::new(), String::new(), String::new(), String::new()]);
                        row.push(status);
                        row.extend(tail);
                        row.extend([String::new(), String::new()]);
                    }
                }
                report.row(row);
            }
        }
    }
    written.push(report.write()?);

    let mut summary = OutputFile::new(cfg.out.join("c_summary.csv"), CommandKind::Scan, cfg, &[]);
    summary.row(["source", "normalization", "n_points", "mean_C", "scatter_C"]);
    for source in FitSource::ALL {
        for (i, name) in ["n_g_used", "n_g_actual", "n_g_paper"].iter().enumerate() {
            let fits: Vec<(DecayFit, RateScale)> = rows
                .iter()
                .filter(|(s, _)| *s == source)
                .filter_map(|(_, r)| r.scales[i].map(|scale| (r.fit, scale)))
                .collect();
            let c = extract_c(&fits);
            let n = c.values.iter().flatten().count();
            let opt = |x: Option<f64>| x.map_or_else(String::new, num);
            summary.row([
                source.as_str().to_string(),
                name.to_string(),
                n.to_string(),
                opt(c.mean),
                opt(c.scatter),
            ]);
            if i == 0 {
                if let Some(m) = c.mean {
                    eprintln!("C[{}] = {m:.4} over {n} points", source.as_str());
                }
            }
        }
    }
    written.push(summary.write()?);
    Ok(written)
}

/// Husimi grids at the requested iterations, for `Gamma = 0` and every
/// configured rate, averaged over the configured number of trajectories.
pub fn husimi(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    let mut gammas = vec![0.0];
    gammas.extend(cfg.gamma.iter().copied().filter(|&g| g != 0.0));
    let t_last = *cfg.husimi_times.iter().max().expect("validated non-empty");
    for p in points(cfg)? {
        let dim = 1usize << p.config.n_tot();
        let bins = cfg.husimi_bins.unwrap_or(dim.min(DEFAULT_HUSIMI_BINS));
        if bins == 0 || dim % bins != 0 {
            return Err(CliError::Config(format!("bins = {bins} must divide 2N = {dim}")));
        }
        let sigma = default_sigma(dim);
        let t_max = cfg.t_max.unwrap_or(t_last);
        for &gamma in &gammas {
            eprintln!("husimi: {} Gamma={gamma:e}", p.tag());
            let noise = NoiseModel::new(gamma)?;
            // A noiseless run is deterministic; one trajectory is exact.
            let m = if gamma == 0.0 { 1 } else { cfg.trajectories };
            let mut sums: Vec<HusimiSummary> =
                cfg.husimi_times.iter().map(|_| HusimiSummary::zeros(dim, bins, sigma)).collect();
            for a in 0..m {
                let mut rng = trajectory_rng(cfg.seed, a as u64);
                let mut failure = None;
                run_trajectory(&p.circuit, &noise, t_max, &mut rng, |t, state| {
                    for (i, _) in cfg.husimi_times.iter().enumerate().filter(|(_, &ht)| ht == t) {
                        let r = husimi_summary(state, sigma, bins).and_then(|h| sums[i].accumulate(&h, 1.0 / m as f64));
                        if let Err(e) = r {
                            failure = Some(e);
                        }
                    }
                })?;
                if let Some(e) = failure {
                    return Err(e.into());
                }
            }
            for (&t, sum) in cfg.husimi_times.iter().zip(&sums) {
                let stem = format!("husimi_{}_g{}_t{}", p.tag(), gamma_tag(gamma), t);
                let mut notes = p.notes();
                notes.push(format!(
                    "Gamma={} t={t} trajectories={m} sigma={} bins={bins} heaviest_column={}",
                    num(gamma),
                    num(sigma),
                    sum.heaviest_column()
                ));
                notes.push("rows: p0 bins, columns: x0 bins; values summed over each bin".into());
                let mut grid = OutputFile::new(cfg.out.join(format!("{stem}.txt")), CommandKind::Husimi, cfg, &notes);
                let mut text = Vec::new();
                sum.binned
                    .write_text(&mut text)
                    .map_err(|e| CliError::Io(e.to_string()))?;
                for line in String::from_utf8(text).expect("ascii").lines() {
                    grid.line(line);
                }
                let grid_path = grid.write()?;
                if cfg.gnuplot {
                    written.push(write_script(&grid_path, gnuplot_matrix(&grid_path, &stem))?);
                }
                written.push(grid_path);

                let mut cols = OutputFile::new(
                    cfg.out.join(format!("{stem}_columns.csv")),
                    CommandKind::Husimi,
                    cfg,
                    &notes,
                );
                cols.row(["x0", "mass"]);
                let norm = 1.0 / dim as f64;
                for (x0, m) in sum.columns.iter().enumerate() {
                    cols.row([x0.to_string(), num(m * norm)]);
                }
                written.push(cols.write()?);
            }
        }
    }
    Ok(written)
}

/// Outcome of one (point, rate, seed, observable) comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationGroup {
    pub n_q: usize,
    pub tau: usize,
    pub gamma: f64,
    pub seed: u64,
    pub observable: Observable,
    pub points: usize,
    pub within: usize,
    pub max_abs_z: f64,
    pub max_abs_diff: f64,
    pub pass: bool,
}

/// Exact channel evolution against the trajectory ensemble. Fails (exit 1)
/// unless every group passes.
pub fn validate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cfg.out)?;
    let mut detail = OutputFile::new(cfg.out.join("validate.csv"), CommandKind::Validate, cfg, &[]);
    detail.row(["n_q", "tau", "Gamma", "seed", "t", "observable", "ensemble", "exact", "stderr", "z"]);
    let mut groups = Vec::new();
    for p in points(cfg)? {
        for &gamma in &cfg.gamma {
            let exact = exact_series(&p.circuit, &NoiseModel::new(gamma)?, p.t_max)?;
            let noise = match cfg.corrupt_no_jump {
                Some(g) => NoiseModel::corrupted(gamma, g)?,
                None => NoiseModel::new(gamma)?,
            };
            for s in 0..cfg.validate_seeds {
                let seed = cfg.seed + s as u64;
                eprintln!("validate: {} Gamma={gamma:e} seed={seed}", p.tag());
                let ens = ensemble(cfg, &p, &noise, seed)?;
                for obs in Observable::ALL {
                    let mut g = ValidationGroup {
                        n_q: p.config.n_q(),
                        tau: p.config.tau(),
                        gamma,
                        seed,
                        observable: obs,
                        points: 0,
                        within: 0,
                        max_abs_z: 0.0,
                        max_abs_diff: 0.0,
                        pass: false,
                    };
                    for t in 0..=p.t_max {
                        let e = ens.mean(t, obs);
                        let x = exact.records[t].mean.get(obs);
                        let se = ens.stderr(t, obs);
                        let diff = e - x;
                        let z = if se > 0.0 {
                            diff / se
                        } else if diff.abs() <= VALIDATE_SLACK {
                            0.0
                        } else {
                            f64::INFINITY.copysign(diff)
                        };
                        g.points += 1;
                        if diff.abs() <= 3.0 * se + VALIDATE_SLACK {
                            g.within += 1;
                        }
                        g.max_abs_z = g.max_abs_z.max(z.abs());
                        g.max_abs_diff = g.max_abs_diff.max(diff.abs());
                        detail.row([
                            g.n_q.to_string(),
                            g.tau.to_string(),
                            num(gamma),
                            seed.to_string(),
                            t.to_string(),
                            obs.name().to_string(),
                            num(e),
                            num(x),
                            num(se),
                            num(z),
                        ]);
                    }
                    g.pass = if gamma == 0.0 {
                        g.max_abs_diff <= VALIDATE_EXACT_TOL
                    } else {
                        g.within as f64 >= VALIDATE_COVERAGE * g.points as f64
                    };
                    groups.push(g);
                }
            }
        }
    }
    let mut written = vec![detail.write()?];

    let rule = format!(
        "pass: at least {VALIDATE_COVERAGE} of points with |ensemble - exact| <= 3 stderr + {VALIDATE_SLACK}; \
         Gamma=0 requires |diff| <= {VALIDATE_EXACT_TOL} everywhere"
    );
    let mut summary = OutputFile::new(cfg.out.join("validate_summary.csv"), CommandKind::Validate, cfg, &[rule]);
    summary.row([
        "n_q",
        "tau",
        "Gamma",
        "seed",
        "observable",
        "points",
        "within_3se",
        "fraction",
        "max_abs_z",
        "max_abs_diff",
        "pass",
    ]);
    for g in &groups {
        summary.row([
            g.n_q.to_string(),
            g.tau.to_string(),
            num(g.gamma),
            g.seed.to_string(),
            g.observable.name().to_string(),
            g.points.to_string(),
            g.within.to_string(),
            num(g.within as f64 / g.points as f64),
            num(g.max_abs_z),
            num(g.max_abs_diff),
            g.pass.to_string(),
        ]);
    }
    written.push(summary.write()?);

    let failed = groups.iter().filter(|g| !g.pass).count();
    if failed > 0 {
        return Err(CliError::ValidationFailed(format!(
            "{failed} of {} comparisons outside tolerance",
            groups.len()
        )));
    }
    eprintln!("validate: all {} comparisons pass", groups.len());
    Ok(written)
}
