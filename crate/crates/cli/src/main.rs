//! `layered-fsi`: mesh generation, time stepping, resolvent sweeps and
//! identity probes driven by a TOML configuration.

mod config;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use config::{Initial, RunConfig};
use layered_fsi::assembly::{build_system, AssemblyError, SystemMatrices};
use layered_fsi::evolution::{fit_decay, prepare_smooth_data, simulate, DecayFit, EvolutionError};
use layered_fsi::geometry::{build_mesh, read_mesh, write_mesh, Mesh, MeshError};
use layered_fsi::io::to_json;
use layered_fsi::linalg::PowerOptions;
use layered_fsi::proof_probe::{
    build_z, flux_chain_monitor, manufactured_study, multiplier_residual, z_forcing, ChainRecord, Forcing, Identity,
    ManufacturedStudy, MultiplierReport, ProbeContext, ProbeError, VectorField,
};
use layered_fsi::resolvent::{
    fit_growth, log_grid, random_state, solve_static, sweep, sweep_csv, GrowthFit, ResolventError, SweepOptions,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TIME: u8 = 3;
const EXIT_FREQUENCY: u8 = 4;

const DECAY_REFERENCE: f64 = 2.0 / 11.0;
const GROWTH_REFERENCE: f64 = 5.5;

#[derive(Parser, Debug)]
#[command(name = "layered-fsi", version, about = "Coupled heat / thin-wave / thick-wave FEM laboratory")]
struct Cli {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Seed for the initial data and the sweep probe vector.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build the mesh and write `mesh.txt`.
    Mesh,
    /// Time-step smooth data; writes `energy.csv` and `decay.json`.
    Simulate,
    /// Resolvent sweep; writes `sweep.csv` and `growth.json`.
    Sweep,
    /// Multiplier and monitor checks; writes `probe.json`.
    Probe,
    /// Every command in turn.
    All,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::new(EXIT_CONFIG, e)
}

fn mesh_err(e: MeshError) -> Failure {
    config_err(e)
}

fn assembly_err(e: AssemblyError) -> Failure {
    config_err(e)
}

fn evolution_err(e: EvolutionError) -> Failure {
    match e {
        EvolutionError::BadStep { .. } | EvolutionError::Window { .. } => config_err(e),
        _ => Failure::new(EXIT_TIME, e),
    }
}

fn resolvent_err(e: ResolventError) -> Failure {
    match e {
        ResolventError::InsufficientPoints { .. } | ResolventError::Grid(_) | ResolventError::Dimension { .. } => {
            config_err(e)
        }
        _ => Failure::new(EXIT_FREQUENCY, e),
    }
}

fn probe_err(e: ProbeError) -> Failure {
    match e {
        ProbeError::Linalg(_) => Failure::new(EXIT_FREQUENCY, e),
        _ => config_err(e),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Failure::new(EXIT_IO, anyhow!("writing {}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> Outcome<String> {
    to_json(value).map_err(|e| Failure::new(EXIT_IO, e))
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

impl Context {
    fn mesh(&self) -> Outcome<Mesh> {
        build_mesh(&self.cfg.geometry.mesh_config()).map_err(mesh_err)
    }

    fn system(&self) -> Outcome<(Mesh, SystemMatrices)> {
        let mesh = self.mesh()?;
        let sys = build_system(&mesh).map_err(assembly_err)?;
        Ok((mesh, sys))
    }
}

fn cmd_mesh(ctx: &Context) -> Outcome {
    let mesh = ctx.mesh()?;
    let text = write_mesh(&mesh);
    // the file must load back to the same mesh
    let back = read_mesh(&text).map_err(mesh_err)?;
    if back != mesh {
        return Err(Failure::new(EXIT_IO, anyhow!("mesh dump does not round-trip")));
    }
    write(&ctx.out, "mesh.txt", &text)?;
    eprintln!(
        "mesh: {} vertices, {} tetrahedra, {} boundary triangles",
        mesh.vertices.len(),
        mesh.tets.len(),
        mesh.boundary.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct DecayReport {
    n: usize,
    dim: usize,
    tau: f64,
    t_end: f64,
    seed: u64,
    initial: &'static str,
    fit_window: [f64; 2],
    reference_exponent: f64,
    fit: Option<DecayFit>,
    fit_note: Option<String>,
    max_balance_residual: f64,
    initial_energy: f64,
}

fn cmd_simulate(ctx: &Context) -> Outcome {
    let s = &ctx.cfg.simulate;
    let (_, sys) = ctx.system()?;
    let x0 = match s.initial {
        Initial::Smooth => prepare_smooth_data(s.seed, &sys).map_err(evolution_err)?,
        Initial::Zero => vec![0.0; sys.dim()],
    };
    let trace = simulate(&x0, s.t_end, s.tau, &sys).map_err(evolution_err)?;
    write(&ctx.out, "energy.csv", &trace.to_csv())?;
    let (fit, fit_note) = match fit_decay(&trace, (s.fit_window[0], s.fit_window[1])) {
        Ok(f) => (Some(f), None),
        Err(EvolutionError::Window { reason, .. }) if s.initial == Initial::Zero => (None, Some(reason)),
        Err(e) => return Err(evolution_err(e)),
    };
    let report = DecayReport {
        n: ctx.cfg.geometry.n,
        dim: sys.dim(),
        tau: s.tau,
        t_end: s.t_end,
        seed: s.seed,
        initial: match s.initial {
            Initial::Smooth => "smooth",
            Initial::Zero => "zero",
        },
        fit_window: s.fit_window,
        reference_exponent: DECAY_REFERENCE,
        fit,
        fit_note,
        max_balance_residual: trace.max_balance_residual,
        initial_energy: trace.initial_energy(),
    };
    write(&ctx.out, "decay.json", &json(&report)?)?;
    if let Some(f) = fit {
        eprintln!("simulate: decay exponent {:.4} (reference {:.4})", f.exponent, DECAY_REFERENCE);
    }
    Ok(())
}

#[derive(Serialize)]
struct GrowthReport {
    n: usize,
    beta_min: f64,
    beta_max: f64,
    points: usize,
    probe_seed: u64,
    reference_exponent: f64,
    fit: GrowthFit,
}

fn cmd_sweep(ctx: &Context) -> Outcome {
    let w = &ctx.cfg.sweep;
    let t = &ctx.cfg.tolerances;
    let (_, sys) = ctx.system()?;
    let grid = log_grid(w.beta_min, w.beta_max, w.points);
    let opts = SweepOptions {
        probe_seed: w.probe_seed,
        opnorm: w.opnorm,
        power: PowerOptions {
            tol: t.power_tol,
            max_iter: t.power_max_iter,
            ..Default::default()
        },
    };
    let samples = sweep(&grid, &sys, &opts).map_err(resolvent_err)?;
    write(&ctx.out, "sweep.csv", &sweep_csv(&samples))?;
    if !w.opnorm {
        return Ok(());
    }
    let fit = fit_growth(&samples).map_err(resolvent_err)?;
    eprintln!("sweep: growth slope {:.4} (reference {GROWTH_REFERENCE})", fit.slope);
    let report = GrowthReport {
        n: ctx.cfg.geometry.n,
        beta_min: w.beta_min,
        beta_max: w.beta_max,
        points: w.points,
        probe_seed: w.probe_seed,
        reference_exponent: GROWTH_REFERENCE,
        fit,
    };
    write(&ctx.out, "growth.json", &json(&report)?)
}

#[derive(Serialize)]
struct Monitor {
    beta: f64,
    probe_seed: u64,
    chain: ChainRecord,
    energy: MultiplierReport,
    multiplier_radial: MultiplierReport,
    multiplier_grisvard: MultiplierReport,
    /// `sup ‖E g‖_{H¹} / ‖g‖_{H^{1/2}}` of the discrete harmonic extension.
    extension_constant: f64,
}

#[derive(Serialize)]
struct ProbeReport {
    n: usize,
    monitor: Monitor,
    manufactured: Option<ManufacturedStudy>,
}

fn cmd_probe(ctx: &Context) -> Outcome {
    let p = &ctx.cfg.probe;
    let (mesh, sys) = ctx.system()?;
    let pctx = ProbeContext::new(&sys).map_err(probe_err)?;
    let beta = p.monitor_beta;
    let b = random_state(ctx.cfg.sweep.probe_seed, &sys);
    let x = solve_static(beta, &b, &sys).map_err(resolvent_err)?;
    let z = build_z(&x, &b, beta, &sys, &pctx.dmap).map_err(probe_err)?;
    let f = z_forcing(&x, &b, beta, &sys, &pctx.dmap).map_err(probe_err)?;
    let grisvard = VectorField::grisvard_for(&mesh).ok_or_else(|| config_err(anyhow!("mesh has no solid region")))?;
    let report = |identity, field| {
        multiplier_residual(&mesh, &sys, &pctx, &z, Forcing::Nodal(&f), identity, field).map_err(probe_err)
    };
    let monitor = Monitor {
        beta,
        probe_seed: ctx.cfg.sweep.probe_seed,
        chain: flux_chain_monitor(&pctx, &sys, &x, &b, beta).map_err(probe_err)?,
        energy: report(Identity::Energy, VectorField::Radial)?,
        multiplier_radial: report(Identity::Multiplier, VectorField::Radial)?,
        multiplier_grisvard: report(Identity::Multiplier, grisvard)?,
        extension_constant: pctx.dmap.extension_constant(&sys, &pctx.norms),
    };
    let manufactured = if p.manufactured {
        let study = manufactured_study(&p.refinements, p.beta, p.amplitude).map_err(probe_err)?;
        eprintln!(
            "probe: manufactured orders multiplier {:?}, energy {:?}",
            study.order_multiplier, study.order_energy
        );
        Some(study)
    } else {
        None
    };
    let out = ProbeReport {
        n: ctx.cfg.geometry.n,
        monitor,
        manufactured,
    };
    write(&ctx.out, "probe.json", &json(&out)?)
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(config_err)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.simulate.seed = seed;
        cfg.sweep.probe_seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(config_err(anyhow!("--jobs must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::new(EXIT_IO, e))?;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.clone());
    std::fs::create_dir_all(&out)
        .map_err(|e| Failure::new(EXIT_IO, anyhow!("creating {}: {e}", out.display())))?;
    let ctx = Context { cfg, out };
    match cli.command {
        Command::Mesh => cmd_mesh(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Probe => cmd_probe(&ctx),
        Command::All => {
            cmd_mesh(&ctx)?;
            cmd_simulate(&ctx)?;
            cmd_sweep(&ctx)?;
            cmd_probe(&ctx)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
