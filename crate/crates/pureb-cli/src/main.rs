//! Command-line front end: every subcommand reproduces one family of
//! toolkit artifacts (REE values, boundary tables, plane scans, random
//! surveys, circuit runs) as CSV/JSON files plus diagnostic SVG plots, and
//! writes a manifest capturing the full effective configuration so any CSV
//! is regenerable byte-identically.

mod svgplot;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use pureb::circuit::{circuit_ree_full, CircuitParams};
use pureb::geometry::{
    alpha_for_beta, boundary_for_ray, build_tensors, gap_survey, plane_rays,
    random_direction_kext_error, state_beta, BchaConfig, MethodSelection, PurebBoundaryConfig, Ray,
};
use pureb::models;
use pureb::opt::{minimize_ree, LogBackend, OptimizerConfig};
use pureb::qstate::{DensityMatrix, GellMannBasis, QstateError};
use rayon::prelude::*;
use svgplot::Series;

const VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Errors and exit codes: 0 success, 2 usage, 3 numerical, 4 I/O.

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<QstateError> for CliError {
    fn from(e: QstateError) -> Self {
        match e {
            QstateError::Io(io) => CliError::Io(io.to_string()),
            QstateError::InvalidArgument(_) | QstateError::Format(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

// ---------------------------------------------------------------------------
// Argument surface.

#[derive(Parser)]
#[command(name = "pureb", version = VERSION, about = "Entanglement detection via pure bosonic extension")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Output directory for CSV/JSON/SVG artifacts
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Base RNG seed; fixed seed + --threads 1 gives byte-identical CSVs
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: QPUREB_THREADS or 1)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// key=value config file; entries override the flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// REE lower bound of one state at extension count k
    Ree {
        /// werner:d:alpha | isotropic:d:alpha | tiles | pyramid | file:PATH | example1:lam | example2:lam
        spec: String,
        #[arg(long, default_value_t = 32)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        /// eigen | pade
        #[arg(long, default_value = "eigen")]
        backend: String,
    },
    /// REE curves over a one-parameter family for several k
    Curve {
        /// werner:d | isotropic:d | example1
        family: String,
        /// comma list, or lo:hi:count
        #[arg(long, default_value = "0.0:1.0:21")]
        alphas: String,
        #[arg(long = "k-list", default_value = "4,8")]
        k_list: String,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
    },
    /// Boundary parameters along one ray (Werner rays report alpha too)
    Boundary {
        /// werner:d | isotropic:d | tiles | pyramid | file:PATH
        spec: String,
        /// comma subset of dm,ppt,cha,pureb
        #[arg(long, default_value = "dm,ppt,cha,pureb")]
        methods: String,
        #[arg(long = "k-list", default_value = "4")]
        k_list: String,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        #[arg(long = "cha-states", default_value_t = 200)]
        cha_states: usize,
        #[arg(long = "cha-rounds", default_value_t = 20)]
        cha_rounds: usize,
    },
    /// Boundary scan over the plane spanned by two states
    Plane {
        /// first spanning state (same specs as `ree`)
        #[arg(long)]
        v1: String,
        /// second spanning state
        #[arg(long)]
        v2: String,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, default_value = "dm,ppt")]
        methods: String,
        #[arg(long = "k-list", default_value = "4")]
        k_list: String,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        #[arg(long = "cha-states", default_value_t = 200)]
        cha_states: usize,
        #[arg(long = "cha-rounds", default_value_t = 20)]
        cha_rounds: usize,
    },
    /// beta_PPT vs beta_BCHA gaps on random rays
    Survey {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// dAxdB, e.g. 3x3
        #[arg(long, default_value = "3x3")]
        dims: String,
        #[arg(long = "cha-states", default_value_t = 800)]
        cha_states: usize,
        #[arg(long = "cha-rounds", default_value_t = 30)]
        cha_rounds: usize,
    },
    /// Relative PureB(k) boundary error on random directions
    KextError {
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value = "2x2")]
        dims: String,
        #[arg(long = "k-list", default_value = "4,8")]
        k_list: String,
        /// CSV with header direction_id,k,beta; omitted = self-consistency vs PureB(4k)
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Variational-circuit REE over a Werner curve
    Circuit {
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// layer count (default k+1)
        #[arg(long)]
        layers: Option<usize>,
        /// werner:d (qubits only)
        #[arg(long, default_value = "werner:2")]
        family: String,
        #[arg(long, default_value = "0.4:0.9:11")]
        alphas: String,
        #[arg(long, default_value_t = 2)]
        restarts: usize,
    },
}

// ---------------------------------------------------------------------------
// Config file: key=value lines, '#' comments; entries override flags.

fn read_config(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {} is not key=value: {line}", ln + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn override_parse<T: std::str::FromStr>(
    cfg: &HashMap<String, String>,
    key: &str,
    slot: &mut T,
) -> CliResult<()> {
    if let Some(v) = cfg.get(key) {
        *slot = v
            .parse()
            .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{v}'")))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Spec parsers.

fn parse_state_spec(spec: &str) -> CliResult<DensityMatrix> {
    let parts: Vec<&str> = spec.split(':').collect();
    let usage = || CliError::Usage(format!("unknown state spec '{spec}'"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| usage());
    let dim = |s: &str| s.parse::<usize>().map_err(|_| usage());
    let dm = match parts.as_slice() {
        ["werner", d, a] => models::werner(dim(d)?, num(a)?)?,
        ["isotropic", d, a] => models::isotropic(dim(d)?, num(a)?)?,
        ["tiles"] => models::upb_bes(models::UpbName::Tiles),
        ["pyramid"] => models::upb_bes(models::UpbName::Pyramid),
        ["file", path] => {
            let text = fs::read_to_string(path)?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad state file {path}: {e}")))?;
            DensityMatrix::from_json(&v)?
        }
        ["example1", lam] => models::appendix_b_example1(num(lam)?)?,
        ["example2", lam] => models::appendix_b_example2(num(lam)?, 2)?,
        _ => return Err(usage()),
    };
    Ok(dm)
}

/// A one-parameter family for curves and alpha-equivalents, plus the
/// parameter range on which beta(alpha) is monotone from the origin.
type Family = Box<dyn Fn(f64) -> pureb::qstate::Result<DensityMatrix> + Sync>;

fn parse_family(spec: &str) -> CliResult<(Family, f64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["werner", _] => {
            let d: usize = parts[1]
                .parse()
                .map_err(|_| CliError::Usage(format!("bad dimension in '{spec}'")))?;
            Ok((Box::new(move |a| models::werner(d, a)), 0.0, 1.0))
        }
        ["isotropic", _] => {
            let d: usize = parts[1]
                .parse()
                .map_err(|_| CliError::Usage(format!("bad dimension in '{spec}'")))?;
            Ok((Box::new(move |a| models::isotropic(d, a)), 0.0, 1.0))
        }
        ["example1"] => Ok((Box::new(models::appendix_b_example1), 0.0, 1.0)),
        _ => Err(CliError::Usage(format!("unknown family spec '{spec}'"))),
    }
}

fn parse_alphas(s: &str) -> CliResult<Vec<f64>> {
    let usage = || CliError::Usage(format!("bad alpha list '{s}' (want a,b,c or lo:hi:count)"));
    if s.contains(':') {
        let p: Vec<&str> = s.split(':').collect();
        if p.len() != 3 {
            return Err(usage());
        }
        let lo: f64 = p[0].parse().map_err(|_| usage())?;
        let hi: f64 = p[1].parse().map_err(|_| usage())?;
        let count: usize = p[2].parse().map_err(|_| usage())?;
        if count < 2 || hi <= lo {
            return Err(usage());
        }
        Ok((0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect())
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| usage())).collect()
    }
}

fn parse_k_list(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad k list '{s}'")))
        })
        .collect()
}

fn parse_dims(s: &str) -> CliResult<(usize, usize)> {
    let usage = || CliError::Usage(format!("bad dims '{s}' (want dAxdB, e.g. 3x3)"));
    let (a, b) = s.split_once('x').ok_or_else(usage)?;
    Ok((a.parse().map_err(|_| usage())?, b.parse().map_err(|_| usage())?))
}

fn parse_backend(s: &str) -> CliResult<LogBackend> {
    match s {
        "eigen" => Ok(LogBackend::Eigen),
        "pade" => Ok(LogBackend::Pade { m: 8, k: 6 }),
        _ => Err(CliError::Usage(format!("unknown backend '{s}' (eigen | pade)"))),
    }
}

// ---------------------------------------------------------------------------
// Artifact plumbing.

fn write_manifest(
    out: &Path,
    command: &str,
    config: serde_json::Value,
    started: Instant,
) -> CliResult<()> {
    let manifest = serde_json::json!({
        "command": command,
        "config": config,
        "version": VERSION,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap() + "\n")?;
    Ok(())
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> CliResult<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn opt_config(seed: u64, restarts: usize, backend: LogBackend) -> OptimizerConfig {
    OptimizerConfig { restarts, seed, log_backend: backend, ..Default::default() }
}

// ---------------------------------------------------------------------------
// Command handlers.

fn cmd_ree(
    g: &GlobalArgs,
    cfg: &HashMap<String, String>,
    spec: String,
    mut k: usize,
    mut restarts: usize,
    mut backend: String,
) -> CliResult<()> {
    override_parse(cfg, "k", &mut k)?;
    override_parse(cfg, "restarts", &mut restarts)?;
    override_parse(cfg, "backend", &mut backend)?;
    let started = Instant::now();
    let rho = parse_state_spec(&spec)?;
    let opt = opt_config(g.seed, restarts, parse_backend(&backend)?);
    let res = minimize_ree(&rho, k, &opt)?;
    let checkpoint = res.to_checkpoint(g.seed, &opt.log_backend);
    fs::write(
        g.out.join("checkpoint.json"),
        serde_json::to_string_pretty(&checkpoint).unwrap() + "\n",
    )?;
    write_manifest(
        &g.out,
        "ree",
        serde_json::json!({
            "spec": spec, "k": k, "restarts": restarts, "backend": backend,
            "seed": g.seed, "threads": effective_threads(g),
        }),
        started,
    )?;
    println!("E_R = {:.9e}  (k = {k}, converged = {})", res.ree, res.converged);
    if !res.converged {
        return Err(CliError::Numerical(
            "optimizer budget exhausted; partial checkpoint written".into(),
        ));
    }
    Ok(())
}

fn cmd_curve(
    g: &GlobalArgs,
    cfg: &HashMap<String, String>,
    family_spec: String,
    mut alphas: String,
    mut k_list: String,
    mut restarts: usize,
) -> CliResult<()> {
    override_parse(cfg, "alphas", &mut alphas)?;
    override_parse(cfg, "k-list", &mut k_list)?;
    override_parse(cfg, "restarts", &mut restarts)?;
    let started = Instant::now();
    let (family, _, _) = parse_family(&family_spec)?;
    let alphas = parse_alphas(&alphas)?;
    let ks = parse_k_list(&k_list)?;
    let opt = opt_config(g.seed, restarts, LogBackend::Eigen);
    // independent per k; points within one k share warm starts sequentially
    let per_k: Vec<CliResult<Vec<(f64, f64, bool)>>> = ks
        .par_iter()
        .map(|&k| {
            let curve = pureb::opt::ree_curve(&family, &alphas, k, &opt, true)?;
            Ok(curve.into_iter().map(|(a, r)| (a, r.ree, r.converged)).collect())
        })
        .collect();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut all_converged = true;
    for (&k, result) in ks.iter().zip(per_k) {
        let pts = result?;
        let mut s = Series { label: format!("k = {k}"), points: Vec::new() };
        for (a, ree, conv) in pts {
            all_converged &= conv;
            rows.push(format!("{a},{k},{ree:.12e}"));
            s.points.push((a, ree.max(1e-18)));
        }
        series.push(s);
    }
    write_csv(&g.out.join("curve.csv"), "alpha,k,ree", &rows)?;
    svgplot::line_chart(
        &g.out.join("curve.svg"),
        &format!("REE lower bounds: {family_spec}"),
        "alpha",
        "E_R",
        &series,
        true,
    )?;
    write_manifest(
        &g.out,
        "curve",
        serde_json::json!({
            "family": family_spec, "alphas": alphas, "k_list": ks,
            "restarts": restarts, "seed": g.seed, "threads": effective_threads(g),
        }),
        started,
    )?;
    println!("wrote {} curve points to {}", rows.len(), g.out.join("curve.csv").display());
    if !all_converged {
        return Err(CliError::Numerical(
            "some curve points hit the optimizer budget; CSV written".into(),
        ));
    }
    Ok(())
}

struct MethodFlags {
    dm: bool,
    ppt: bool,
    cha: bool,
    pureb: bool,
}

fn parse_methods(s: &str) -> CliResult<MethodFlags> {
    let mut f = MethodFlags { dm: false, ppt: false, cha: false, pureb: false };
    for tok in s.split(',') {
        match tok.trim() {
            "dm" => f.dm = true,
            "ppt" => f.ppt = true,
            "cha" => f.cha = true,
            "pureb" => f.pureb = true,
            other => return Err(CliError::Usage(format!("unknown method '{other}'"))),
        }
    }
    Ok(f)
}

/// The boundary ray of a direction spec, plus the alpha-parameterized
/// family when the spec is a Werner/isotropic ray (for alpha-equivalents).
fn parse_direction(spec: &str) -> CliResult<(DensityMatrix, Option<(Family, f64, f64)>)> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["werner", _] | ["isotropic", _] => {
            let (family, lo, hi) = parse_family(spec)?;
            let extremal = family(hi)?;
            Ok((extremal, Some((family, lo, hi))))
        }
        _ => Ok((parse_state_spec(spec)?, None)),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_boundary(
    g: &GlobalArgs,
    cfg: &HashMap<String, String>,
    spec: String,
    mut methods: String,
    mut k_list: String,
    mut epsilon: f64,
    mut cha_states: usize,
    mut cha_rounds: usize,
) -> CliResult<()> {
    override_parse(cfg, "methods", &mut methods)?;
    override_parse(cfg, "k-list", &mut k_list)?;
    override_parse(cfg, "epsilon", &mut epsilon)?;
    override_parse(cfg, "cha-states", &mut cha_states)?;
    override_parse(cfg, "cha-rounds", &mut cha_rounds)?;
    let started = Instant::now();
    let flags = parse_methods(&methods)?;
    let ks = if flags.pureb { parse_k_list(&k_list)? } else { Vec::new() };
    let (extremal, family) = parse_direction(&spec)?;
    let (d_a, d_b) = extremal.dims();
    let basis = GellMannBasis::new(d_a * d_b);
    let ray = Ray::from_state(&extremal, &basis)?;
    let selection = MethodSelection {
        cha: flags.cha.then(|| BchaConfig {
            n_states: cha_states.max(2 * d_a * d_a * d_b * d_b),
            bagging_rounds: cha_rounds,
            seed: g.seed,
            ..Default::default()
        }),
        pureb_k: ks.clone(),
        pureb: PurebBoundaryConfig {
            epsilon,
            opt: OptimizerConfig { seed: g.seed, ..Default::default() },
            ..Default::default()
        },
    };
    let tensors = build_tensors(&ks, d_b)?;
    let result = boundary_for_ray(&ray, &basis, &tensors, &selection)?;

    // alpha-equivalent: invert beta(alpha) on the generating family, with
    // the target clamped to the family's own extremal beta against 1e-12
    // bisection overshoot
    let alpha_of = |beta: f64| -> CliResult<Option<f64>> {
        match &family {
            Some((fam, lo, hi)) => {
                let b_max = state_beta(&fam(*hi)?, &basis);
                Ok(Some(alpha_for_beta(fam, &basis, beta.min(b_max), *lo, *hi)?))
            }
            None => Ok(None),
        }
    };
    let fmt_alpha = |a: Option<f64>| a.map_or(String::new(), |a| format!("{a:.6}"));
    let mut rows = Vec::new();
    let mut print_row = |method: &str, k: Option<usize>, beta: f64| -> CliResult<()> {
        let alpha = alpha_of(beta)?;
        let kcol = k.map_or(String::new(), |k| k.to_string());
        rows.push(format!("{method},{kcol},{beta:.9e},{}", fmt_alpha(alpha)));
        match alpha {
            Some(a) => println!("{method:>10} {kcol:>5}  beta = {beta:.6}  alpha = {a:.6}"),
            None => println!("{method:>10} {kcol:>5}  beta = {beta:.6}"),
        }
        Ok(())
    };
    if flags.dm {
        print_row("dm", None, result.beta_dm)?;
    }
    if flags.ppt {
        print_row("ppt", None, result.beta_ppt)?;
    }
    if let Some(b) = result.beta_cha {
        print_row("cha", None, b)?;
    }
    let mut suspect = false;
    for (k, pb) in &result.beta_pureb {
        suspect |= pb.suspect;
        print_row("pureb", Some(*k), pb.beta)?;
    }
    write_csv(&g.out.join("boundary.csv"), "method,k,beta,alpha", &rows)?;
    write_manifest(
        &g.out,
        "boundary",
        serde_json::json!({
            "spec": spec, "methods": methods, "k_list": ks, "epsilon": epsilon,
            "cha_states": cha_states, "cha_rounds": cha_rounds,
            "seed": g.seed, "threads": effective_threads(g),
        }),
        started,
    )?;
    if suspect {
        // the search resolves ambiguous steps conservatively (outer edge),
        // so the reported beta is still a valid bracket — warn, don't fail
        eprintln!("pureb: warning: a PureB bisection step stayed ambiguous after retries");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_plane(
    g: &GlobalArgs,
    cfg: &HashMap<String, String>,
    v1: String,
    v2: String,
    mut resolution: usize,
    mut methods: String,
    mut k_list: String,
    mut epsilon: f64,
    mut cha_states: usize,
    mut cha_rounds: usize,
) -> CliResult<()> {
    override_parse(cfg, "resolution", &mut resolution)?;
    override_parse(cfg, "methods", &mut methods)?;
    override_parse(cfg, "k-list", &mut k_list)?;
    override_parse(cfg, "epsilon", &mut epsilon)?;
    override_parse(cfg, "cha-states", &mut cha_states)?;
    override_parse(cfg, "cha-rounds", &mut cha_rounds)?;
    let started = Instant::now();
    let flags = parse_methods(&methods)?;
    let ks = if flags.pureb { parse_k_list(&k_list)? } else { Vec::new() };
    let s1 = parse_state_spec(&v1)?;
    let s2 = parse_state_spec(&v2)?;
    let (d_a, d_b) = s1.dims();
    let basis = GellMannBasis::new(d_a * d_b);
    let selection = MethodSelection {
        cha: flags.cha.then(|| BchaConfig {
            n_states: cha_states.max(2 * d_a * d_a * d_b * d_b),
            bagging_rounds: cha_rounds,
            seed: g.seed,
            ..Default::default()
        }),
        pureb_k: ks.clone(),
        pureb: PurebBoundaryConfig {
            epsilon,
            opt: OptimizerConfig { seed: g.seed, ..Default::default() },
            ..Default::default()
        },
    };
    let tensors = build_tensors(&ks, d_b)?;
    let rays = plane_rays(&s1, &s2, resolution, &basis)?;
    let results: Vec<_> = rays
        .par_iter()
        .map(|(theta, ray)| {
            boundary_for_ray(ray, &basis, &tensors, &selection).map(|mut r| {
                r.theta = Some(*theta);
                r
            })
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut by_method: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    for r in &results {
        let theta = r.theta.unwrap();
        let mut push = |name: String, k: Option<usize>, beta: f64| {
            let kcol = k.map_or(String::new(), |k| k.to_string());
            rows.push(format!("{theta:.9},{},{kcol},{beta:.9e}", name.split('(').next().unwrap()));
            by_method.entry(name).or_default().push((theta, beta));
        };
        if flags.dm {
            push("dm".into(), None, r.beta_dm);
        }
        if flags.ppt {
            push("ppt".into(), None, r.beta_ppt);
        }
        if let Some(b) = r.beta_cha {
            push("cha".into(), None, b);
        }
        for (k, pb) in &r.beta_pureb {
            push(format!("pureb({k})"), Some(*k), pb.beta);
        }
    }
    // stable series order: dm, ppt, cha, pureb(k) ascending
    let mut names: Vec<String> = by_method.keys().cloned().collect();
    names.sort();
    let series: Vec<Series> = ["dm", "ppt", "cha"]
        .iter()
        .map(|s| s.to_string())
        .chain(names.iter().filter(|n| n.starts_with("pureb")).cloned())
        .filter_map(|n| {
            by_method.get(&n).map(|pts| Series { label: n.clone(), points: pts.clone() })
        })
        .collect();
    write_csv(&g.out.join("plane.csv"), "theta,method,k,beta", &rows)?;
    svgplot::polar_chart(
        &g.out.join("plane.svg"),
        &format!("boundary scan: span({v1}, {v2})"),
        &series,
    )?;
    write_manifest(
        &g.out,
        "plane",
        serde_json::json!({
            "v1": v1, "v2": v2, "resolution": resolution, "methods": methods,
            "k_list": ks, "epsilon": epsilon, "cha_states": cha_states,
            "cha_rounds": cha_rounds, "seed": g.seed, "threads": effective_threads(g),
        }),
        started,
    )?;
    println!(
        "wrote {} boundary points over {resolution} directions to {}",
        rows.len(),
        g.out.join("plane.csv").display()
    );
    Ok(())
}

fn cmd_survey(
    g: &GlobalArgs,
    cfg: &HashMap<String, String>,
    mut samples: usize,
    mut dims: String,
    mut cha_states: usize,
    mut cha_rounds: usize,
) -> CliResult<()> {
    override_parse(cfg, "samples", &mut samples)?;
    override_parse(cfg, "dims", &mut dims)?;
    override_parse(cfg, "cha-states", &mut cha_states)?;
    override_parse(cfg, "cha-rounds", &mut cha_rounds)?;
    let started = Instant::now();
    let (d_a, d_b) = parse_dims(&dims)?;
    let cha = BchaConfig {
        n_states: cha_states.max(2 * d_a * d_a * d_b * d_b),
        bagging_rounds: cha_rounds,
        seed: g.seed,
        ..Default::default()
    };
    let stats = gap_survey(samples, (d_a, d_b), g.seed, &cha)?;
    let rows: Vec<String> = stats
        .samples
        .iter()
        .map(|s| format!("{},{:.9e},{:.9e},{:.9e}", s.index, s.beta_ppt, s.beta_cha, s.gap))
        .collect();
    write_csv(&g.out.join("survey.csv"), "index,beta_ppt,beta_cha,gap", &rows)?;
    write_manifest(
        &g.out,
        "survey",
        serde_json::json!({
            "samples": samples, "dims": dims, "cha_states": cha.n_states,
            "cha_rounds": cha_rounds, "seed": g.seed, "threads": effective_threads(g),
        }),
        started,
    )?;
    println!(
        "gap beta_PPT - beta_BCHA over {samples} samples: median = {:.3e}, min = {:.3e}, max = {:.3e}",
        stats.median_gap, stats.min_gap, stats.max_gap
    );
    Ok(())
}

fn read_reference_csv(path: &Path) -> CliResult<HashMap<(usize, usize), f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim();
    if header != "direction_id,k,beta" {
        return Err(CliError::Usage(format!(
            "reference CSV must start with 'direction_id,k,beta', got '{header}'"
        )));
    }
    let mut map = HashMap::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || CliError::Usage(format!("reference CSV line {}: '{line}'", ln + 2));
        if f.len() != 3 {
            return Err(bad());
        }
        map.insert(
            (f[0].trim().parse().map_err(|_| bad())?, f[1].trim().parse().map_err(|_| bad())?),
            f[2].trim().parse().map_err(|_| bad())?,
        );
    }
    Ok(map)
}

fn cmd_kext_error(
    g: &GlobalArgs,
    cfg: &HashMap<String, String>,
    mut samples: usize,
    mut dims: String,
    mut k_list: String,
    reference: Option<PathBuf>,
) -> CliResult<()> {
    override_parse(cfg, "samples", &mut samples)?;
    override_parse(cfg, "dims", &mut dims)?;
    override_parse(cfg, "k-list", &mut k_list)?;
    let started = Instant::now();
    let dims_parsed = parse_dims(&dims)?;
    let ks = parse_k_list(&k_list)?;
    let reference_map = reference.as_deref().map(read_reference_csv).transpose()?;
    let pb = PurebBoundaryConfig {
        opt: OptimizerConfig { seed: g.seed, ..Default::default() },
        ..Default::default()
    };
    let samples_out = random_direction_kext_error(
        samples,
        dims_parsed,
        &ks,
        reference_map.as_ref(),
        g.seed,
        &pb,
    )?;
    let rows: Vec<String> = samples_out
        .iter()
        .map(|s| {
            format!(
                "{},{},{:.9e},{:.9e},{:.9e}",
                s.direction_id, s.k, s.beta, s.beta_ref, s.rel_error
            )
        })
        .collect();
    write_csv(
        &g.out.join("kext_error.csv"),
        "direction_id,k,beta,beta_ref,rel_error",
        &rows,
    )?;
    let mean_by_k: Vec<(f64, f64)> = ks
        .iter()
        .map(|&k| {
            let errs: Vec<f64> = samples_out
                .iter()
                .filter(|s| s.k == k)
                .map(|s| s.rel_error)
                .collect();
            (k as f64, errs.iter().sum::<f64>() / errs.len().max(1) as f64)
        })
        .collect();
    svgplot::line_chart(
        &g.out.join("kext_error.svg"),
        "mean relative boundary error vs k",
        "k",
        "mean |beta - beta_ref| / beta_ref",
        &[Series { label: "mean rel. error".into(), points: mean_by_k }],
        true,
    )?;
    write_manifest(
        &g.out,
        "kext-error",
        serde_json::json!({
            "samples": samples, "dims": dims, "k_list": ks,
            "reference": reference.as_ref().map(|p| p.display().to_string()),
            "seed": g.seed, "threads": effective_threads(g),
        }),
        started,
    )?;
    println!("wrote {} error samples to {}", rows.len(), g.out.join("kext_error.csv").display());
    Ok(())
}

fn cmd_circuit(
    g: &GlobalArgs,
    cfg: &HashMap<String, String>,
    mut k: usize,
    layers: Option<usize>,
    mut family_spec: String,
    mut alphas: String,
    mut restarts: usize,
) -> CliResult<()> {
    override_parse(cfg, "k", &mut k)?;
    let mut layers = layers.unwrap_or(k + 1);
    override_parse(cfg, "layers", &mut layers)?;
    override_parse(cfg, "family", &mut family_spec)?;
    override_parse(cfg, "alphas", &mut alphas)?;
    override_parse(cfg, "restarts", &mut restarts)?;
    let started = Instant::now();
    if layers == 0 {
        return Err(CliError::Usage("circuit needs at least one layer".into()));
    }
    let (family, _, _) = parse_family(&family_spec)?;
    let alphas = parse_alphas(&alphas)?;
    let opt = opt_config(g.seed, restarts, LogBackend::Eigen);
    let mut init = CircuitParams::zeros(layers, k)?;
    let mut rows = Vec::new();
    let mut checkpoints = Vec::new();
    let mut pts = Vec::new();
    let mut all_converged = true;
    for &a in &alphas {
        let rho = family(a)?;
        let (res, angles) = circuit_ree_full(&rho, &init, &opt)?;
        // warm-start the next alpha from the optimized angles
        init = angles.clone();
        all_converged &= res.converged;
        rows.push(format!("{a},{k},{layers},{:.12e}", res.ree));
        pts.push((a, res.ree.max(1e-18)));
        let mut ck = angles.to_json();
        ck["alpha"] = serde_json::json!(a);
        ck["ree"] = serde_json::json!(res.ree);
        checkpoints.push(ck);
    }
    write_csv(&g.out.join("circuit.csv"), "alpha,k,layers,ree", &rows)?;
    fs::write(
        g.out.join("circuit_checkpoints.json"),
        serde_json::to_string_pretty(&serde_json::Value::Array(checkpoints)).unwrap() + "\n",
    )?;
    svgplot::line_chart(
        &g.out.join("circuit.svg"),
        &format!("variational circuit REE: {family_spec}, k = {k}, {layers} layers"),
        "alpha",
        "E_R",
        &[Series { label: format!("k = {k}"), points: pts }],
        true,
    )?;
    write_manifest(
        &g.out,
        "circuit",
        serde_json::json!({
            "k": k, "layers": layers, "family": family_spec, "alphas": alphas,
            "restarts": restarts, "seed": g.seed, "threads": effective_threads(g),
        }),
        started,
    )?;
    println!("wrote {} circuit points to {}", rows.len(), g.out.join("circuit.csv").display());
    if !all_converged {
        return Err(CliError::Numerical(
            "some circuit optimizations hit the budget; CSV written".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn effective_threads(g: &GlobalArgs) -> usize {
    g.threads
        .or_else(|| std::env::var("QPUREB_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut g = cli.global;
    let cfg = match &g.config {
        Some(p) => read_config(p)?,
        None => HashMap::new(),
    };
    if let Some(v) = cfg.get("out") {
        g.out = PathBuf::from(v);
    }
    override_parse(&cfg, "seed", &mut g.seed)?;
    if let Some(v) = cfg.get("threads") {
        g.threads = Some(
            v.parse()
                .map_err(|_| CliError::Usage(format!("config key 'threads': bad value '{v}'")))?,
        );
    }
    fs::create_dir_all(&g.out)?;
    let threads = effective_threads(&g);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;

    match cli.command {
        Command::Ree { spec, k, restarts, backend } => cmd_ree(&g, &cfg, spec, k, restarts, backend),
        Command::Curve { family, alphas, k_list, restarts } => {
            cmd_curve(&g, &cfg, family, alphas, k_list, restarts)
        }
        Command::Boundary { spec, methods, k_list, epsilon, cha_states, cha_rounds } => {
            cmd_boundary(&g, &cfg, spec, methods, k_list, epsilon, cha_states, cha_rounds)
        }
        Command::Plane { v1, v2, resolution, methods, k_list, epsilon, cha_states, cha_rounds } => {
            cmd_plane(&g, &cfg, v1, v2, resolution, methods, k_list, epsilon, cha_states, cha_rounds)
        }
        Command::Survey { samples, dims, cha_states, cha_rounds } => {
            cmd_survey(&g, &cfg, samples, dims, cha_states, cha_rounds)
        }
        Command::KextError { samples, dims, k_list, reference } => {
            cmd_kext_error(&g, &cfg, samples, dims, k_list, reference)
        }
        Command::Circuit { k, layers, family, alphas, restarts } => {
            cmd_circuit(&g, &cfg, k, layers, family, alphas, restarts)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (label, msg) = match &e {
                CliError::Usage(m) => ("usage error", m),
                CliError::Numerical(m) => ("numerical error", m),
                CliError::Io(m) => ("i/o error", m),
            };
            eprintln!("pureb: {label}: {msg}");
            ExitCode::from(e.code())
        }
    }
}
