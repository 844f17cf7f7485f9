//! Command line front end. Every subcommand reads a TOML study file, writes JSON (and
//! CSV where tabular) into the output directory and maps failures to exit codes:
//! 0 success, 2 invalid input, 3 solver non-convergence, 4 contract violation.

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::assembly::{assemble_rescaled_form, build_grid};
use crate::error::{Error, Result};
use crate::fermi::{metric_jet, potential_field, FermiJet};
use crate::geometry::Geometry;
use crate::lab::output::{loglog_svg, plot_eigen_errors, write_csv, write_json, Series};
use crate::lab::{
    asymptotics_check, coercivity_check, eigenvalue_convergence_study, kato_check, semigroup_convergence_study,
    ContractOutcome, Datum, Discretization, StudyContext, ASYMPTOTIC_QUANTITIES,
};
pub use config::{CliConfig, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "tubelab", version, about = "Thin-tube spectral convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Study file in TOML.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Also write SVG log-log plots.
    #[arg(long, global = true)]
    plot: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to TUBE_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Curvature scalars and effective potential on the base grid.
    Geometry {
        #[arg(value_enum, default_value = "report")]
        action: GeometryAction,
    },
    /// Lowest eigenpairs of the renormalized tube operator at one ε.
    Spectrum {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Eigenvalue convergence along the ε-ladder.
    Converge,
    /// Kato inequality, coercivity or asymptotic orders.
    Check {
        #[arg(value_enum)]
        which: CheckKind,
    },
    /// Heat semigroup convergence.
    Semigroup {
        #[arg(long, value_enum)]
        datum: Option<DatumArg>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GeometryAction {
    Report,
    /// Also dump the second-order metric jet at every sample point.
    Jet,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CheckKind {
    Kato,
    Coercivity,
    Asymptotics,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DatumArg {
    GroundFiber,
    Generic,
    Antisymmetric,
}

impl From<DatumArg> for Datum {
    fn from(d: DatumArg) -> Self {
        match d {
            DatumArg::GroundFiber => Datum::GroundFiber,
            DatumArg::Generic => Datum::Generic,
            DatumArg::Antisymmetric => Datum::Antisymmetric,
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

/// Parse `args` (program name first), run the subcommand and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                emit_error("usage", e.to_string().trim_end().to_string(), 2);
            }
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(contract) if contract.passed => 0,
        Ok(contract) => {
            emit_error("contract", contract.violations.join("; "), 4);
            4
        }
        Err(e) => {
            let code = e.exit_code();
            emit_error(e.kind(), e.to_string(), code);
            code
        }
    }
}

fn emit_error(kind: &str, message: String, exit_code: i32) {
    let report = ErrorReport { error: kind, message, exit_code };
    eprintln!("{}", serde_json::to_string(&report).expect("plain struct"));
}

fn configure_threads(requested: Option<usize>) -> Result<()> {
    let n = match requested {
        Some(n) => Some(n),
        None => match std::env::var("TUBE_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| Error::Validation(format!("TUBE_THREADS = {v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Validation("thread count must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn load(cli: &Cli) -> Result<CliConfig> {
    let path = cli
        .common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config(format!("--config is required; {}", config::SCHEMA_HINT)))?;
    let file = FileConfig::load(path)?;
    let mut study = file.study_config();
    if let Some(seed) = cli.common.seed {
        study.seed = seed;
    }
    let epsilon = file.study.epsilon.unwrap_or_else(|| study.epsilons.first().copied().unwrap_or(0.1));
    Ok(CliConfig {
        study,
        epsilon,
        datum: file.study.datum.unwrap_or(Datum::Generic),
        out: cli.common.out.clone(),
        plot: cli.common.plot,
        verbose: cli.common.verbose,
    })
}

fn dispatch(cli: &Cli) -> Result<ContractOutcome> {
    configure_threads(cli.common.threads)?;
    let mut cfg = load(cli)?;
    let geom = Geometry::new(cfg.study.geometry.clone())?;
    cfg.study.validate(&geom)?;
    std::fs::create_dir_all(&cfg.out)?;
    match &cli.command {
        Command::Geometry { action } => geometry_report(&geom, &cfg, matches!(action, GeometryAction::Jet)),
        Command::Spectrum { epsilon } => {
            if let Some(e) = epsilon {
                cfg.epsilon = *e;
            }
            spectrum(&geom, &cfg)
        }
        Command::Converge => converge(&cfg),
        Command::Check { which } => match which {
            CheckKind::Kato => kato(&cfg),
            CheckKind::Coercivity => coercivity(&cfg),
            CheckKind::Asymptotics => asymptotics(&geom, &cfg),
        },
        Command::Semigroup { datum } => {
            if let Some(d) = datum {
                cfg.datum = (*d).into();
            }
            semigroup(&cfg)
        }
    }
}

fn written(cfg: &CliConfig, path: &Path) {
    if cfg.verbose {
        eprintln!("wrote {}", path.display());
    }
}

fn save_json(cfg: &CliConfig, name: &str, value: &impl Serialize) -> Result<()> {
    let path = cfg.out.join(name);
    write_json(value, &path)?;
    written(cfg, &path);
    Ok(())
}

#[derive(Serialize)]
struct GeometrySample {
    x: Vec<f64>,
    scal_l: f64,
    scal_m: f64,
    ric_bar: f64,
    r_bar: f64,
    tension_norm_sq: f64,
    effective_potential: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    jet: Option<FermiJet>,
}

#[derive(Serialize)]
struct GeometryReport {
    geometry: crate::geometry::GeometrySpec,
    dim: usize,
    ambient_dim: usize,
    codim: usize,
    volume: f64,
    eps_max: f64,
    lambda0: f64,
    alpha_floor: f64,
    samples: Vec<GeometrySample>,
}

fn geometry_report(geom: &Geometry, cfg: &CliConfig, with_jet: bool) -> Result<ContractOutcome> {
    let grid = build_grid(geom, cfg.study.grid.n_x, cfg.study.grid.n_fiber)?;
    let field = potential_field(geom, &grid)?;
    let samples = field
        .points
        .iter()
        .zip(&field.wl)
        .map(|(x, &wl)| {
            let cd = geom.curvature_at(x)?;
            Ok(GeometrySample {
                x: x.clone(),
                scal_l: cd.scal_l,
                scal_m: cd.scal_m,
                ric_bar: cd.ric_bar,
                r_bar: cd.r_bar,
                tension_norm_sq: cd.tension_norm_sq,
                effective_potential: wl,
                jet: if with_jet { Some(metric_jet(geom, x)?) } else { None },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = GeometryReport {
        geometry: geom.spec().clone(),
        dim: geom.l(),
        ambient_dim: geom.m(),
        codim: geom.codim(),
        volume: geom.volume(),
        eps_max: geom.eps_max(),
        lambda0: field.lambda0,
        alpha_floor: field.alpha_floor,
        samples,
    };
    save_json(cfg, "geometry.json", &report)?;
    let lo = field.wl.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.wl.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("{:?}: {} samples, W_L in [{lo:.6}, {hi:.6}]", report.geometry.kind, report.samples.len());
    Ok(ContractOutcome::new())
}

#[derive(Serialize)]
struct SpectrumReport {
    epsilon: f64,
    context: StudyContext,
    grid: crate::lab::GridInfo,
    spectrum: crate::eigen::SpectrumResult,
}

fn spectrum(geom: &Geometry, cfg: &CliConfig) -> Result<ContractOutcome> {
    let eps = cfg.epsilon;
    let top = geom.eps_max();
    if !(eps > 0.0 && eps <= top) {
        return Err(Error::Validation(format!("ε = {eps} outside (0, {top}]")));
    }
    let disc = Discretization::new(geom, cfg.study.grid.n_x, cfg.study.grid.n_fiber)?;
    let ctx = StudyContext::new(geom, &disc, &cfg.study)?;
    let form = assemble_rescaled_form(geom, &disc.grid, eps, ctx.alpha, &disc.pencil)?;
    let spec = disc.solve(&form, cfg.study.k, &cfg.study)?.shifted(ctx.alpha);
    let path = cfg.out.join("spectrum.csv");
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path).map_err(csv_io)?;
    w.write_record(["k", "eigenvalue", "residual"]).map_err(csv_io)?;
    for (j, (v, r)) in spec.eigenvalues.iter().zip(&spec.residuals).enumerate() {
        w.write_record([j.to_string(), format!("{v:.16e}"), format!("{r:.16e}")]).map_err(csv_io)?;
    }
    w.flush()?;
    written(cfg, &path);
    for (j, v) in spec.eigenvalues.iter().enumerate() {
        println!("{j} {v:.12}");
    }
    save_json(cfg, "spectrum.json", &SpectrumReport { epsilon: eps, context: ctx, grid: disc.info(), spectrum: spec })?;
    Ok(ContractOutcome::new())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn converge(cfg: &CliConfig) -> Result<ContractOutcome> {
    let report = eigenvalue_convergence_study(&cfg.study)?;
    let path = cfg.out.join("table.csv");
    write_csv(&report, std::fs::File::create(&path)?)?;
    written(cfg, &path);
    save_json(cfg, "report.json", &report)?;
    if cfg.plot {
        let path = cfg.out.join("eigen_errors.svg");
        plot_eigen_errors(&report, &path)?;
        written(cfg, &path);
    }
    for row in report.rows.iter().filter(|r| r.epsilon == *cfg.study.epsilons.last().unwrap()) {
        println!("ε = {} k = {}: λ = {:.10} μ = {:.10} err = {:.3e}", row.epsilon, row.k, row.lambda_eps, row.mu_limit, row.abs_err);
    }
    Ok(report.contract)
}

fn kato(cfg: &CliConfig) -> Result<ContractOutcome> {
    let report = kato_check(&cfg.study)?;
    save_json(cfg, "kato.json", &report)?;
    if cfg.plot {
        let path = cfg.out.join("kato.svg");
        let pts = report.rows.iter().map(|r| (r.epsilon, r.ratio)).collect();
        loglog_svg(&path, "Kato ratio", "epsilon", "ratio", &[Series { label: "max over samples".into(), points: pts }])?;
        written(cfg, &path);
    }
    println!("Kato constant {:.6e}, log-log slope {:.3}", report.k_fit, report.slope);
    Ok(report.contract)
}

fn coercivity(cfg: &CliConfig) -> Result<ContractOutcome> {
    let kato = kato_check(&cfg.study)?;
    let report = coercivity_check(&cfg.study, Some(kato.k_fit))?;
    save_json(cfg, "coercivity.json", &report)?;
    for r in &report.rows {
        println!("ε = {}: margin {:.4e}, reference margin {:.4e}", r.epsilon, r.margin, r.reference_margin);
    }
    Ok(report.contract)
}

fn asymptotics(geom: &Geometry, cfg: &CliConfig) -> Result<ContractOutcome> {
    let report = asymptotics_check(geom, &cfg.study.epsilons)?;
    save_json(cfg, "asymptotics.json", &report)?;
    if cfg.plot {
        let path = cfg.out.join("asymptotics.svg");
        let series: Vec<Series> = ASYMPTOTIC_QUANTITIES
            .iter()
            .enumerate()
            .filter(|(i, _)| !report.identically_zero[*i])
            .map(|(i, name)| Series {
                label: name.to_string(),
                points: report.rows.iter().map(|r| (r.epsilon, r.values()[i])).collect(),
            })
            .collect();
        if !series.is_empty() {
            loglog_svg(&path, "sup-norm deviations", "epsilon", "sup", &series)?;
            written(cfg, &path);
        }
    }
    for (name, slope) in ASYMPTOTIC_QUANTITIES.iter().zip(report.slopes) {
        println!("{name}: slope {slope:.3}");
    }
    Ok(report.contract)
}

fn semigroup(cfg: &CliConfig) -> Result<ContractOutcome> {
    let report = semigroup_convergence_study(&cfg.study, &cfg.study.times, cfg.datum)?;
    save_json(cfg, "semigroup.json", &report)?;
    if cfg.plot {
        let path = cfg.out.join("semigroup.svg");
        let series: Vec<Series> = cfg
            .study
            .times
            .iter()
            .map(|&t| Series {
                label: format!("t = {t}"),
                points: report.rows.iter().filter(|r| r.t == t).map(|r| (r.epsilon, r.err)).collect(),
            })
            .collect();
        loglog_svg(&path, "semigroup error", "epsilon", "error", &series)?;
        written(cfg, &path);
    }
    for (eps, err) in &report.sup_err {
        println!("ε = {eps}: sup_t err {err:.4e}");
    }
    Ok(report.contract)
}
