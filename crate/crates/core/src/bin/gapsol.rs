#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use gapsol::cme::{cme_params, conserved, ode_residual, params_json, CmeParams, Soliton};
use gapsol::gpsim::{run_error_experiment, scaling_study, ErrorConfig, GpGrid, ScalingConfig};
use gapsol::hamiltonian::{check_hamiltonian, random_states, CanonicalState, Model};
use gapsol::io::{fmt_f64, parse_scalar, Csv};
use gapsol::potential::{build_potential, PotentialSpec};
use gapsol::spatial::{build_system, integrate_spatial, summary_json, tail_experiment, ShootOptions};
use gapsol::spectral::{
    check_monotonicity, model_dispersion, model_residual, resonance_scan, resonances_to_csv, root_atlas,
    Model as Dispersion,
};
use gapsol::Error;

const OUT_DIR_ENV: &str = "GAPSOL_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "gapsol",
    version,
    about = "Gap-soliton toolkit: coupled-mode solitons, root atlases, spatial dynamics and split-step checks"
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true, value_parser = parse_count)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form coupled-mode soliton profile and its residual.
    Soliton(SolitonArgs),
    /// Characteristic-root atlas of the spatial linearisation.
    Roots(RangeArgs),
    /// Resonant collisions of purely imaginary roots.
    Resonances(RangeArgs),
    /// Roots of the model characteristic equations.
    Dispersion(DispersionArgs),
    /// Hamiltonian equivalence and finite-difference gradient checks.
    HamiltonianCheck(HamCheckArgs),
    /// Integrates the truncated spatial system from a seeded small state.
    Spatial(SpatialArgs),
    /// Reversible shot from the corrected ansatz and tail deviation.
    Tails(TailArgs),
    /// Split-step evolution of the ansatz and its deviation in time.
    Evolve(EvolveArgs),
    /// Error scaling of the time-domain ansatz over a list of eps values.
    Scaling(ScalingArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Default)]
struct OutArgs {
    /// Output file; relative paths resolve against $GAPSOL_OUT_DIR when set. Default: stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ParamArgs {
    #[arg(long, value_parser = parse_int, allow_hyphen_values = true)]
    n: i32,
    #[arg(long, value_parser = parse_num, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, value_parser = parse_num, allow_hyphen_values = true, default_value = "0")]
    omega: f64,
    #[arg(long, value_parser = parse_int, allow_hyphen_values = true, default_value = "-1")]
    sigma: i32,
    /// Resonant coefficient; ignored when --potential is given.
    #[arg(long, value_parser = parse_num, allow_hyphen_values = true, default_value = "1")]
    w2n: f64,
    /// Potential JSON file `{"coeffs": [{"m": 1, "w": 1.0}], "s": 1.0}`.
    #[arg(long)]
    potential: Option<PathBuf>,
}

impl ParamArgs {
    fn potential(&self) -> Result<PotentialSpec, Failure> {
        match &self.potential {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
                Ok(PotentialSpec::from_json(&text)?)
            }
            None => Ok(build_potential(&[(self.n, self.w2n)], 1.0)?),
        }
    }

    fn resolve(&self) -> Result<(CmeParams, PotentialSpec), Failure> {
        let pot = self.potential()?;
        let p = cme_params(self.n, self.c, self.omega, self.sigma, &pot)?;
        Ok((p, pot))
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SolitonArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_parser = parse_num, allow_hyphen_values = true, default_value = "-20")]
    y_min: f64,
    #[arg(long, value_parser = parse_num, allow_hyphen_values = true, default_value = "20")]
    y_max: f64,
    #[arg(long, value_parser = parse_count, default_value = "401")]
    samples: usize,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RangeArgs {
    #[arg(long, value_parser = parse_int, allow_hyphen_values = true)]
    n: i32,
    #[arg(long, value_parser = parse_num, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, value_parser = parse_int, allow_hyphen_values = true)]
    m_min: i32,
    #[arg(long, value_parser = parse_int, allow_hyphen_values = true)]
    m_max: i32,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DispersionArgs {
    /// kg, reggp or discretegp.
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_num, allow_hyphen_values = true)]
    omega: f64,
    #[arg(long, value_parser = parse_num, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, value_parser = parse_int, allow_hyphen_values = true)]
    m_min: i32,
    #[arg(long, value_parser = parse_int, allow_hyphen_values = true)]
    m_max: i32,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HamCheckArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_parser = parse_int, default_value = "21")]
    m_max: i32,
    #[arg(long, value_parser = parse_num, default_value = "0.1")]
    eps: f64,
    #[arg(long, value_parser = parse_count, default_value = "32")]
    states: usize,
    #[arg(long, value_parser = parse_num, default_value = "0.3")]
    scale: f64,
    #[arg(long, default_value = "1")]
    seed: u64,
    #[arg(long, value_parser = parse_num, default_value = "1e-6")]
    fd_step: f64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpatialArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_parser = parse_int, default_value = "21")]
    m_max: i32,
    #[arg(long, value_parser = parse_num, default_value = "0.1")]
    eps: f64,
    #[arg(long, value_parser = parse_num, default_value = "10")]
    y_max: f64,
    #[arg(long, value_parser = parse_num, default_value = "1e-10")]
    tol: f64,
    /// Amplitude of the seeded initial state, restricted to center modes.
    #[arg(long, value_parser = parse_num, default_value = "0.1")]
    scale: f64,
    #[arg(long, default_value = "1")]
    seed: u64,
    #[arg(long, value_parser = parse_count, default_value = "101")]
    samples: usize,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TailArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_parser = parse_int, default_value = "21")]
    m_max: i32,
    #[arg(long, value_parser = parse_num, default_value = "0.1")]
    eps: f64,
    /// Window length in units of 1/eps^2.
    #[arg(long, value_parser = parse_num, default_value = "1")]
    l_window: f64,
    #[arg(long, value_parser = parse_num, default_value = "0.01")]
    h: f64,
    #[arg(long, value_parser = parse_num, default_value = "1e-7")]
    shoot_tol: f64,
    #[arg(long, value_parser = parse_count, default_value = "40")]
    max_iter: usize,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvolveArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_parser = parse_num, default_value = "0.1")]
    eps: f64,
    #[arg(long, value_parser = parse_num, default_value = "2")]
    t_end_slow: f64,
    #[arg(long, value_parser = parse_num, default_value = "0.01")]
    dt: f64,
    #[arg(long, value_parser = parse_count, default_value = "20")]
    samples: usize,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScalingArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated geometric sequence of eps values.
    #[arg(long, value_parser = parse_num, value_delimiter = ',', default_value = "0.1,0.05,0.025")]
    eps: Vec<f64>,
    #[arg(long, value_parser = parse_num, default_value = "2")]
    t_end_slow: f64,
    #[arg(long, value_parser = parse_num, default_value = "0.01")]
    dt: f64,
    #[arg(long, value_parser = parse_count, default_value = "20")]
    samples: usize,
    /// Skip the refined-discretisation rerun.
    #[arg(long)]
    no_refine: bool,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

impl PartialEq for OutArgs {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    parse_scalar(s).map_err(|e| e.to_string())
}

fn parse_int(s: &str) -> Result<i32, String> {
    let v = parse_num(s)?;
    if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
        return Err(format!("'{s}' is not an integer"));
    }
    Ok(v as i32)
}

fn parse_count(s: &str) -> Result<usize, String> {
    let v = parse_int(s)?;
    if v < 1 {
        return Err(format!("'{s}' must be a positive integer"));
    }
    Ok(v as usize)
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl Failure {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Failure::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Lib(e) if e.is_validation() => 2,
            _ => 1,
        }
    }

    fn diagnostic(&self) -> Value {
        match self {
            Failure::Lib(e) => json!({ "error": e.kind(), "message": e.to_string() }),
            Failure::Io { path, source } => {
                json!({ "error": "io", "path": path.display().to_string(), "message": source.to_string() })
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Both renderings of a result; the format flag picks one.
struct Report {
    csv: String,
    json: Value,
    default: Format,
}

fn envelope(command: &str, config: &impl Serialize, body: Value) -> Value {
    let mut v = json!({ "command": command, "config": config });
    if let (Some(obj), Value::Object(extra)) = (v.as_object_mut(), body) {
        obj.extend(extra);
    }
    v
}

fn run_soliton(a: &SolitonArgs) -> Result<Report, Failure> {
    let (p, _) = a.params.resolve()?;
    let sol = Soliton::new(&p)?;
    if !(a.y_max > a.y_min) || a.samples < 2 {
        return Err(Error::invalid("need y_max > y_min and at least two samples").into());
    }
    let mut csv = Csv::new(&["Y", "re_a", "im_a", "re_b", "im_b", "Q", "H_S", "residual"]);
    let mut max_res: f64 = 0.0;
    for i in 0..a.samples {
        let y = a.y_min + (a.y_max - a.y_min) * i as f64 / (a.samples - 1) as f64;
        let pt = sol.profile(y)?;
        let r = ode_residual(&p, &pt);
        let res = r[0].norm().max(r[1].norm());
        max_res = max_res.max(res);
        let (q, h) = conserved(&p, [pt.a, pt.b]);
        csv.row_f64(&[y, pt.a.re, pt.a.im, pt.b.re, pt.b.im, q, h, res]);
    }
    let peak = sol.profile(0.0)?;
    let json = envelope(
        "soliton",
        a,
        json!({
            "params": params_json(&p),
            "kappa": sol.kappa(),
            "decay_rate_y": p.decay_rate_y(),
            "peak_abs_a": peak.a.norm(),
            "peak_abs_b": peak.b.norm(),
            "max_residual": max_res,
        }),
    );
    Ok(Report { csv: csv.into_string(), json, default: Format::Csv })
}

fn run_roots(a: &RangeArgs) -> Result<Report, Failure> {
    let atlas = root_atlas(a.n, a.c, (a.m_min, a.m_max))?;
    let mono = check_monotonicity(&atlas);
    let json =
        envelope("roots", a, json!({ "m0": atlas.m0, "m1": atlas.m1, "entries": atlas.entries, "monotonicity": mono }));
    Ok(Report { csv: atlas.to_csv(), json, default: Format::Csv })
}

fn run_resonances(a: &RangeArgs) -> Result<Report, Failure> {
    let list = resonance_scan(a.n, a.c, (a.m_min, a.m_max))?;
    let json = envelope("resonances", a, json!({ "resonances": list }));
    Ok(Report { csv: resonances_to_csv(&list), json, default: Format::Csv })
}

fn run_dispersion(a: &DispersionArgs) -> Result<Report, Failure> {
    let model: Dispersion = a.model.parse()?;
    if a.m_min > a.m_max {
        return Err(Error::invalid(format!("empty mode range [{}, {}]", a.m_min, a.m_max)).into());
    }
    let per_mode: Vec<(i32, Vec<(num_complex::Complex64, f64)>)> = (a.m_min..=a.m_max)
        .into_par_iter()
        .map(|m| {
            let ks = model_dispersion(model, a.omega, a.c, m)?;
            Ok((m, ks.into_iter().map(|k| (k, model_residual(model, a.omega, a.c, m, k).norm())).collect()))
        })
        .collect::<Result<_, Error>>()?;
    let mut csv = Csv::new(&["m", "re_kappa", "im_kappa", "residual", "imaginary"]);
    let mut modes = Vec::new();
    for (m, roots) in &per_mode {
        for (k, r) in roots {
            let imag = if k.re.abs() < 1e-10 { "1" } else { "0" };
            csv.row_str(&[m.to_string(), fmt_f64(k.re), fmt_f64(k.im), fmt_f64(*r), imag.to_string()]);
        }
        modes.push(json!({
            "m": m,
            "roots": roots.iter().map(|(k, _)| k).collect::<Vec<_>>(),
            "max_residual": roots.iter().map(|(_, r)| *r).fold(0.0, f64::max),
            "imaginary": roots.iter().filter(|(k, _)| k.re.abs() < 1e-10).count(),
        }));
    }
    let json = envelope("dispersion", a, json!({ "modes": modes }));
    Ok(Report { csv: csv.into_string(), json, default: Format::Csv })
}

fn run_ham_check(a: &HamCheckArgs) -> Result<Report, Failure> {
    let (p, pot) = a.params.resolve()?;
    let model = Model::new(p, pot, a.m_max, a.eps)?;
    let states = random_states(&model, a.states, a.scale, a.seed);
    let rep = check_hamiltonian(&model, &states, a.fd_step)?;
    let mut csv =
        Csv::new(&["states", "modes", "fd_step", "h_mismatch", "canonical_gradient_error", "normal_gradient_error"]);
    csv.row_str(&[
        rep.states.to_string(),
        rep.modes.to_string(),
        fmt_f64(rep.fd_step),
        fmt_f64(rep.h_mismatch),
        fmt_f64(rep.canonical_gradient_error),
        fmt_f64(rep.normal_gradient_error),
    ]);
    let json = envelope("hamiltonian-check", a, json!({ "check": rep }));
    Ok(Report { csv: csv.into_string(), json, default: Format::Json })
}

fn run_spatial(a: &SpatialArgs) -> Result<Report, Failure> {
    let (p, pot) = a.params.resolve()?;
    let sys = build_system(&p, &pot, a.m_max, a.eps)?;
    let mut st: CanonicalState = random_states(&sys.model, 1, a.scale, a.seed).remove(0);
    for i in 0..sys.len() {
        if !sys.model.is_center(i) {
            st.psi[i] = num_complex::Complex64::new(0.0, 0.0);
            st.phi[i] = st.psi[i];
        }
    }
    let traj = integrate_spatial(&sys, (0.0, a.y_max), &st, a.tol, a.samples)?;
    let json = envelope(
        "spatial",
        a,
        json!({
            "modes": sys.len(),
            "h0": traj.monitor_h[0],
            "q0": traj.monitor_q[0],
            "h_drift": traj.h_drift(),
            "q_drift": traj.q_drift(),
            "steps": traj.monitor_y.len(),
        }),
    );
    Ok(Report { csv: traj.to_csv(), json, default: Format::Csv })
}

fn run_tails(a: &TailArgs) -> Result<Report, Failure> {
    let (p, pot) = a.params.resolve()?;
    let sys = build_system(&p, &pot, a.m_max, a.eps)?;
    let opts = ShootOptions { h: a.h, tol: a.shoot_tol, max_iter: a.max_iter, ..ShootOptions::default() };
    let (report, shot) = tail_experiment(&sys, a.l_window, &opts)?;
    let mut csv = Csv::new(&["m", "sup_deviation"]);
    for ms in &report.modes {
        csv.row_str(&[ms.m.to_string(), fmt_f64(ms.sup)]);
    }
    let json = envelope("tails", a, summary_json(&report, &shot));
    Ok(Report { csv: csv.into_string(), json, default: Format::Json })
}

fn run_evolve(a: &EvolveArgs) -> Result<Report, Failure> {
    let (p, pot) = a.params.resolve()?;
    let grid = GpGrid::for_soliton(&p, a.eps)?;
    let cfg = ErrorConfig { t_end_slow: a.t_end_slow, dt: a.dt, samples: a.samples };
    let curve = run_error_experiment(&p, &pot, a.eps, &grid, &cfg)?;
    let json = envelope(
        "evolve",
        a,
        json!({
            "grid": curve.grid,
            "max_error": curve.max_error(),
            "peak_speed": curve.peak_speed(),
            "samples": curve.samples,
        }),
    );
    Ok(Report { csv: curve.to_csv(), json, default: Format::Csv })
}

fn run_scaling(a: &ScalingArgs) -> Result<Report, Failure> {
    let (p, pot) = a.params.resolve()?;
    let cfg = ScalingConfig {
        eps: a.eps.clone(),
        run: ErrorConfig { t_end_slow: a.t_end_slow, dt: a.dt, samples: a.samples },
        self_convergence: !a.no_refine,
    };
    let rep = scaling_study(&p, &pot, &cfg)?;
    let mut csv = Csv::new(&["eps", "max_error"]);
    for (e, m) in rep.eps.iter().zip(&rep.max_error) {
        csv.row_f64(&[*e, *m]);
    }
    let json = envelope("scaling", a, json!({ "report": rep }));
    Ok(Report { csv: csv.into_string(), json, default: Format::Json })
}

fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(report: Report, out: &OutArgs) -> Result<(), Failure> {
    let text = match out.format.unwrap_or(report.default) {
        Format::Csv => report.csv,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json).map_err(Error::from)?;
            s.push('\n');
            s
        }
    };
    match &out.out {
        Some(path) => {
            let path = resolve_out(path);
            std::fs::write(&path, text).map_err(|e| Failure::io(&path, e))
        }
        None => {
            use std::io::Write;
            let mut lock = std::io::stdout().lock();
            lock.write_all(text.as_bytes()).map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
    }
}

fn dispatch(cmd: &Command) -> Result<(), Failure> {
    let (report, out) = match cmd {
        Command::Soliton(a) => (run_soliton(a)?, &a.out),
        Command::Roots(a) => (run_roots(a)?, &a.out),
        Command::Resonances(a) => (run_resonances(a)?, &a.out),
        Command::Dispersion(a) => (run_dispersion(a)?, &a.out),
        Command::HamiltonianCheck(a) => (run_ham_check(a)?, &a.out),
        Command::Spatial(a) => (run_spatial(a)?, &a.out),
        Command::Tails(a) => (run_tails(a)?, &a.out),
        Command::Evolve(a) => (run_evolve(a)?, &a.out),
        Command::Scaling(a) => (run_scaling(a)?, &a.out),
    };
    emit(report, out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("{}", json!({ "error": "runtime", "message": e.to_string() }));
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.diagnostic());
            ExitCode::from(f.exit_code())
        }
    }
}
