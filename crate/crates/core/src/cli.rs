//! Batch front end behind the `mfp` binary.
//!
//! Exit codes: 0 success, 1 I/O failure or a negative convergence verdict,
//! 2 configuration error, 3 unmet precondition, 4 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dynamics::{
    calibrate_certificate, certificate_check, limit_set, window_distances, AttractorSpec,
    CalibrationOptions, ShadowOptions, StepSchedule,
};
use crate::game::{br_dynamics_map, tilde_a, Interpretation};
use crate::geometry::Polytope;
use crate::sim::{
    attainability_flag, convergence_from_terminals, last_exceedance, map_replicas,
    noise_decomposition, schedule_checks, strict_nash_targets, tail_from_exceedances, ConfigFile,
    MfpConfig, MomentBound, NoiseRecording, Target, ToolSection,
};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "mfp", version, about = "Markovian fictitious play experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration (a manifest of an earlier run also works).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run replicas and write one trajectory CSV per replica.
    Simulate(Common),
    /// Limit sets and window distances of the simulated paths.
    Analyze(Common),
    /// Energy barriers and inverse-temperature thresholds.
    Barrier(Common),
    /// Δ(n,T) tail table, noise decomposition and step-size checks.
    NoiseCheck(Common),
    /// Fractions of replicas ending near the target profiles.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Sup-norm radius around each target.
        #[arg(long)]
        radius: Option<f64>,
        /// `auto` (strict Nash profiles) or one-based pairs like `1,1;2,2`.
        #[arg(long, default_value = "auto")]
        targets: String,
    },
    /// Attractor certificates around each strict Nash profile.
    Certify(Common),
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) => Self::new(3, e.to_string()),
            Error::Numerical(_) => Self::new(4, e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(1, format!("i/o error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parsed configuration with command-line overrides applied.
struct Loaded {
    file: ConfigFile,
    cfg: MfpConfig,
    out: PathBuf,
}

fn load(common: &Common) -> CliResult<Loaded> {
    let text = fs::read_to_string(&common.config).map_err(|e| {
        CliError::new(2, format!("cannot read {}: {e}", common.config.display()))
    })?;
    let mut file = ConfigFile::parse(&text)
        .map_err(|e| CliError::new(2, format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        file.run.seed = seed;
    }
    if let Some(r) = common.replicas {
        file.run.replicas = r;
    }
    file.tool = Some(ToolSection {
        name: "mfp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    });
    let cfg = file
        .to_config()
        .map_err(|e| CliError::new(2, format!("{}: {e}", common.config.display())))?;
    fs::create_dir_all(&common.out)?;
    fs::write(common.out.join("manifest.toml"), file.to_toml())?;
    Ok(Loaded {
        file,
        cfg,
        out: common.out.clone(),
    })
}

fn write_report(out: &Path, name: &str, text: &str) -> CliResult<()> {
    print!("{text}");
    fs::write(out.join(name), text)?;
    Ok(())
}

/// Runs the command and returns its exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate(c) => simulate(&c),
        Command::Analyze(c) => analyze(&c),
        Command::Barrier(c) => barrier(&c),
        Command::NoiseCheck(c) => noise_check(&c),
        Command::Converge {
            common,
            radius,
            targets,
        } => converge(&common, radius, &targets),
        Command::Certify(c) => certify(&c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn simulate(common: &Common) -> CliResult<i32> {
    let l = load(common)?;
    let (m1, _) = l.cfg.game.actions();
    let out = l.out.clone();
    let terminals = map_replicas(&l.cfg, |rec| {
        let path = out.join(format!("replica_{:04}.csv", rec.replica));
        rec.write_csv(&path, m1)
            .map_err(|e| Error::Numerical(format!("writing {}: {e}", path.display())))?;
        Ok(rec.terminal)
    })?;
    let mut s = String::new();
    let _ = writeln!(s, "replicas = {}", terminals.len());
    let _ = writeln!(s, "horizon = {}", l.cfg.horizon);
    for (r, t) in terminals.iter().enumerate() {
        let _ = writeln!(s, "terminal_{r:04} = {t:?}");
    }
    write_report(&l.out, "summary.txt", &s)?;
    Ok(0)
}

fn analyze(common: &Common) -> CliResult<i32> {
    let l = load(common)?;
    let a = &l.file.analysis;
    let map = br_dynamics_map(&l.cfg.game, a.tie_tol);
    let opts = ShadowOptions {
        bundle: a.bundle,
        h: a.h,
        seed: l.cfg.seed,
    };
    let window = a.window;
    let rows = map_replicas(&l.cfg, |rec| {
        let path = &rec.path;
        let k_max = ((path.end() - path.start()) / window).floor() as usize;
        let d = if k_max > 0 {
            window_distances(path, &map, window, k_max, &opts)?
        } else {
            Vec::new()
        };
        let cells = limit_set(path, a.tail_fraction, a.grid_eps)?;
        Ok((rec.replica, path.start(), d, cells))
    })?;
    let mut csv = String::from("replica,k,window_start,distance\n");
    let mut s = String::new();
    for (r, start, d, cells) in &rows {
        for (k, v) in d.iter().enumerate() {
            let _ = writeln!(csv, "{r},{k},{},{v:.16e}", start + k as f64 * window);
        }
        let d_x = d.iter().cloned().fold(0.0, f64::max);
        let _ = writeln!(
            s,
            "replica {r}: d_X(T={window}) = {d_x:.6} over {} windows, limit set cells = {}",
            d.len(),
            cells.len()
        );
        for c in cells {
            let _ = writeln!(s, "  cell {c:?}");
        }
    }
    fs::write(l.out.join("windows.csv"), csv)?;
    write_report(&l.out, "analysis.txt", &s)?;
    Ok(0)
}

fn barrier(common: &Common) -> CliResult<i32> {
    let l = load(common)?;
    let a = &l.file.analysis;
    let [e1, e2] = &l.cfg.exploration;
    let ratio = tilde_a(&l.cfg.game, e1, e2, a.grid_resolution, Interpretation::Ratio)?;
    let half = tilde_a(&l.cfg.game, e1, e2, a.grid_resolution, Interpretation::Half)?;
    let mut s = String::new();
    let _ = writeln!(s, "grid_resolution = {}", a.grid_resolution);
    for p in 0..2 {
        let u = &ratio.u_sharp[p];
        let _ = writeln!(s, "player {}:", p + 1);
        let _ = writeln!(s, "  U# = {} (grid lower bound, {} points)", u.value, u.grid_points);
        let _ = writeln!(s, "  argmax opponent mix = {:?}", u.argmax);
        let _ = writeln!(s, "  tilde_A ratio = {}", ratio.values[p]);
        let _ = writeln!(s, "  tilde_A half = {}", half.values[p]);
        let _ = writeln!(s, "  A = {}", l.cfg.beta[p].a);
    }
    let chosen = match l.cfg.interpretation {
        Interpretation::Ratio => &ratio,
        Interpretation::Half => &half,
    };
    for note in &chosen.notes {
        let _ = writeln!(s, "note: {note}");
    }
    let _ = writeln!(
        s,
        "attainability (positive diagonals) = {}",
        attainability_flag(e1, e2)
    );
    write_report(&l.out, "barrier.txt", &s)?;
    Ok(0)
}

fn noise_check(common: &Common) -> CliResult<i32> {
    let l = load(common)?;
    let a = l.file.analysis.clone();
    let mut cfg = l.cfg.clone();
    cfg.noise = NoiseRecording::Full;
    cfg.thin = cfg.horizon;
    let harmonic = StepSchedule::harmonic();
    let per = map_replicas(&cfg, |rec| {
        let noise = rec.noise.as_ref().expect("full noise requested");
        let last = last_exceedance(noise, &harmonic, a.window, a.eps)?;
        Ok(last)
    })?;
    let mut s = String::new();
    if per.len() >= 30 {
        if let Some(&n) = a.n_grid.iter().find(|&&n| n >= cfg.horizon) {
            return Err(CliError::new(2, format!("n_grid point {n} is past the horizon")));
        }
        let rows = tail_from_exceedances(&per, &a.n_grid, cfg.horizon);
        let _ = writeln!(
            s,
            "tail P(Δ(m,{}) >= {} for some n <= m <= {}), {} replicas",
            a.window,
            a.eps,
            cfg.horizon,
            per.len()
        );
        for r in rows {
            let e = r.estimate;
            let _ = writeln!(
                s,
                "  n = {:>8}: {:.4} [{:.4}, {:.4}]",
                r.n, e.fraction, e.interval.0, e.interval.1
            );
        }
    } else {
        let _ = writeln!(s, "tail table skipped: needs at least 30 replicas, have {}", per.len());
    }
    // per-step decomposition on replica 0
    let mut one = cfg.clone();
    one.keep_actions = true;
    let rec = crate::sim::run_replica(&one, 0)?;
    let diag = noise_decomposition(&rec, &one, a.window)?;
    fs::write(l.out.join("noise.csv"), diag.to_csv())?;
    let last = diag.rows.last().expect("at least one row");
    let _ = writeln!(s, "decomposition (replica 0):");
    let _ = writeln!(s, "  identity error = {:e}", diag.identity_error);
    let _ = writeln!(s, "  |Q_N| = {}", last.q_norm);
    let _ = writeln!(s, "  |Q_N|^2 log N / N = {:e}", last.q_rate);
    let sch = schedule_checks(&harmonic, a.q, MomentBound { r: 0.0, s: 0.0 })?;
    let _ = writeln!(s, "step sizes 1/n with bounded noise, q = {}:", sch.q);
    let _ = writeln!(s, "  sum gamma^(1+q/2) finite = {}", sch.power_sum_converges);
    let _ = writeln!(s, "  sum exp(-c/gamma) finite = {}", sch.exp_summable);
    let _ = writeln!(s, "  M^2 gamma log n -> 0 = {}", sch.moment_condition);
    write_report(&l.out, "noise.txt", &s)?;
    Ok(0)
}

fn parse_targets(spec: &str, cfg: &MfpConfig) -> CliResult<Vec<Target>> {
    let (m1, m2) = cfg.game.actions();
    spec.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let ix: Vec<usize> = pair
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CliError::new(2, format!("target `{pair}`: {e}")))?;
            match ix[..] {
                [i, l] if (1..=m1).contains(&i) && (1..=m2).contains(&l) => {
                    let mut point = vec![0.0; m1 + m2];
                    point[i - 1] = 1.0;
                    point[m1 + l - 1] = 1.0;
                    Ok(Target {
                        label: format!("({i},{l})"),
                        point,
                    })
                }
                _ => Err(CliError::new(2, format!("target `{pair}` is not a valid one-based pair"))),
            }
        })
        .collect()
}

fn converge(common: &Common, radius: Option<f64>, targets: &str) -> CliResult<i32> {
    let l = load(common)?;
    let radius = radius.unwrap_or(l.file.analysis.radius);
    let targets = if targets == "auto" {
        let t = strict_nash_targets(&l.cfg.game, 0.0);
        if t.is_empty() {
            return Err(CliError::new(3, "the game has no strict Nash equilibrium"));
        }
        t
    } else {
        parse_targets(targets, &l.cfg)?
    };
    if l.cfg.replicas < 30 {
        return Err(CliError::new(3, format!("need at least 30 replicas, got {}", l.cfg.replicas)));
    }
    let mut cfg = l.cfg.clone();
    cfg.thin = cfg.horizon;
    let terminals = map_replicas(&cfg, |r| Ok(r.terminal))?;
    let rep = convergence_from_terminals(&terminals, &targets, radius)?;
    let mut s = String::new();
    let _ = writeln!(s, "radius = {radius} (sup-norm), replicas = {}", terminals.len());
    for (t, p) in &rep.per_target {
        let _ = writeln!(
            s,
            "target {}: {:.4} [{:.4}, {:.4}] ({}/{})",
            t.label, p.fraction, p.interval.0, p.interval.1, p.successes, p.trials
        );
    }
    let o = rep.overall;
    let _ = writeln!(s, "any target: {:.4} [{:.4}, {:.4}]", o.fraction, o.interval.0, o.interval.1);
    let _ = writeln!(s, "all targets positive = {}", rep.all_positive());
    write_report(&l.out, "converge.txt", &s)?;
    Ok(if rep.all_positive() { 0 } else { 1 })
}

/// Product of the faces `{(1−w)e_i + w e_k}` around a pure profile.
fn probe_around(target: &Target, m1: usize, m2: usize, w: f64) -> crate::Result<Polytope> {
    let i = target.point[..m1].iter().position(|&v| v == 1.0).unwrap_or(0);
    let l = target.point[m1..].iter().position(|&v| v == 1.0).unwrap_or(0);
    let mixes = |m: usize, at: usize| -> Vec<Vec<f64>> {
        (0..m)
            .map(|k| {
                let mut v = vec![0.0; m];
                v[at] += 1.0 - w;
                v[k] += w;
                v
            })
            .collect()
    };
    let mut verts = Vec::new();
    for x in mixes(m1, i) {
        for y in mixes(m2, l) {
            verts.push([x.as_slice(), y.as_slice()].concat());
        }
    }
    Polytope::new(verts)
}

fn certify(common: &Common) -> CliResult<i32> {
    let l = load(common)?;
    let a = l.file.analysis.clone();
    let (m1, m2) = l.cfg.game.actions();
    let targets = strict_nash_targets(&l.cfg.game, 0.0);
    if targets.is_empty() {
        return Err(CliError::new(3, "the game has no strict Nash equilibrium to certify"));
    }
    let map = br_dynamics_map(&l.cfg.game, a.tie_tol);
    let opts = ShadowOptions {
        bundle: a.bundle,
        h: a.h,
        seed: l.cfg.seed,
    };
    let mut specs = Vec::new();
    let mut s = String::new();
    for t in &targets {
        let attractor = Polytope::new(vec![t.point.clone()])?;
        let probe = probe_around(t, m1, m2, a.probe_width)?;
        let (alpha, t_cert) = match (a.alpha, a.t_cert) {
            (Some(al), Some(tc)) => (al, tc),
            _ => {
                let cal = calibrate_certificate(
                    &map,
                    &attractor,
                    &probe,
                    &CalibrationOptions {
                        h: a.h,
                        seed: l.cfg.seed,
                        ..CalibrationOptions::default()
                    },
                )?;
                match cal.constants {
                    Some(c) => {
                        let _ = writeln!(
                            s,
                            "target {}: calibrated alpha = {}, T = {} ({} solutions, {} starts skipped)",
                            t.label, c.0, c.1, cal.solutions, cal.skipped_starts
                        );
                        c
                    }
                    None => {
                        return Err(CliError::new(
                            3,
                            format!("no certificate constants found for target {}", t.label),
                        ))
                    }
                }
            }
        };
        specs.push((
            t.label.clone(),
            AttractorSpec {
                attractor,
                basin_probe: probe,
                alpha,
                t_cert,
            },
        ));
    }
    let certs = map_replicas(&l.cfg, |rec| {
        specs
            .iter()
            .map(|(_, spec)| certificate_check(&rec.path, &map, spec, &opts))
            .collect::<crate::Result<Vec<_>>>()
    })?;
    for (k, (label, spec)) in specs.iter().enumerate() {
        let certified = certs.iter().filter(|c| c[k].certified).count();
        let contra = certs.iter().filter(|c| c[k].contradiction).count();
        let _ = writeln!(
            s,
            "target {label}: alpha = {}, T = {}, certified {certified}/{} replicas, contradictions {contra}",
            spec.alpha,
            spec.t_cert,
            certs.len()
        );
    }
    write_report(&l.out, "certify.txt", &s)?;
    Ok(0)
}
