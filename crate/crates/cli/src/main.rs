//! Command-line front end: one subcommand per pipeline stage, figure presets
//! as data files, deterministic outputs plus a manifest per run.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lambdaprop::analysis::{density_scan, threshold_table, ThresholdQuery};
use lambdaprop::bloch::{self, solve_bloch, solve_bloch_checked};
use lambdaprop::config::{self, Config};
use lambdaprop::domain::validate_cpr_conditions;
use lambdaprop::error::Error;
use lambdaprop::export::{
    run_id, write_grid, write_table, write_trajectory, GridFormat, GridMeta, GridQuantity,
    OutputFileEntry, RunManifest, TriggerSummary, TOOL_VERSION,
};
use lambdaprop::propagation::{
    check_z_convergence, run_propagation, saturation_distance, PropagationOptions,
    DEFAULT_SATURATION_THRESHOLD,
};
use lambdaprop::transverse::{radial_to_xy_raster, run_transverse};
use lambdaprop::trigger::{fluence_per_z, photon_yield, solve_trigger};
use lambdaprop::units::PhysicalConstants;

#[derive(Parser)]
#[command(
    name = "lambdaprop",
    version,
    about = "Maxwell-Bloch coherence preparation in dense three-level media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Explicit configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset from the presets directory.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Grid export layout.
    #[arg(long, value_enum, default_value = "binary")]
    format: FormatArg,
    /// Worker threads for transverse/scan parallelism (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Persist every K-th z plane.
    #[arg(long, value_name = "K")]
    z_stride: Option<usize>,
    /// Run the step-halving convergence diagnostics before the main run.
    #[arg(long)]
    check_convergence: bool,
    /// Also regrid transverse radial maps onto an N x N (x, y) raster.
    #[arg(long, value_name = "N")]
    xy_raster: Option<usize>,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum FormatArg {
    Columns,
    Binary,
}

impl From<FormatArg> for GridFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Columns => GridFormat::Columns,
            FormatArg::Binary => GridFormat::Binary,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the density matrix at the entrance plane and export the
    /// trajectory.
    Bloch(RunArgs),
    /// March pump and Stokes envelopes through the medium; export field and
    /// coherence maps.
    Propagate(RunArgs),
    /// Propagate, then solve the triggered two-photon emission over the
    /// prepared coherence.
    Trigger(RunArgs),
    /// Sweep the transverse beam profile with independent 1D pipelines.
    Transverse(RunArgs),
    /// Run the propagation pipeline over a density scan and fit the
    /// inverse-density saturation law.
    Scan(RunArgs),
    /// Pair-emission photon-energy thresholds.
    Thresholds(ThresholdArgs),
}

#[derive(Args)]
struct ThresholdArgs {
    /// Energy gap between the metastable and ground state, eV.
    #[arg(long, value_name = "EV", conflicts_with_all = ["config", "preset"])]
    e31_ev: Option<f64>,
    /// Mass value, eV; repeat per mass state.
    #[arg(long = "mass-ev", value_name = "EV")]
    masses_ev: Vec<f64>,
    /// Configuration file with a `thresholds` section.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named preset with a `thresholds` section.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory (optional; prints to stdout regardless).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err.root() {
        Error::Config { .. }
        | Error::Invalid { .. }
        | Error::FarDetuning { .. }
        | Error::KinematicallyForbidden { .. }
        | Error::DegenerateFit(_) => 2,
        Error::NonFinite { .. } | Error::Convergence { .. } => 3,
        Error::Io(_) => 4,
        Error::Sample { .. } | Error::ScanPoint { .. } => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bloch(args) => cmd_bloch(&args),
        Command::Propagate(args) => cmd_propagate(&args, false),
        Command::Trigger(args) => cmd_propagate(&args, true),
        Command::Transverse(args) => cmd_transverse(&args),
        Command::Scan(args) => cmd_scan(&args),
        Command::Thresholds(args) => cmd_thresholds(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn load_config(config: &Option<PathBuf>, preset: &Option<String>) -> Result<Config, Error> {
    match (config, preset) {
        (Some(path), _) => Config::from_path(path),
        (None, Some(name)) => config::load_preset(name),
        (None, None) => Err(Error::config(
            "--config/--preset",
            format!(
                "one of --config or --preset is required; available presets: {}",
                config::list_presets().join(", ")
            ),
        )),
    }
}

fn init_workers(jobs: Option<usize>) {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .ok();
    }
}

fn grid_meta(cfg: &Config) -> GridMeta {
    GridMeta {
        n_t: cfg.grid.n_t,
        t_min_ns: cfg.grid.t_min_ns,
        t_max_ns: cfg.grid.t_max_ns,
        dz_um: cfg.grid.dz_um,
        n_z: None,
        z_stride: Some(cfg.grid.z_stride),
    }
}

struct RunContext {
    cfg: Config,
    id: String,
    out_dir: PathBuf,
    started: Instant,
    outputs: Vec<OutputFileEntry>,
}

impl RunContext {
    fn new(args: &RunArgs, command: &str) -> Result<Self, Error> {
        init_workers(args.jobs);
        let mut cfg = load_config(&args.config, &args.preset)?;
        if let Some(stride) = args.z_stride {
            cfg.grid.z_stride = stride.max(1);
        }
        let id = run_id(command, &cfg.to_json());
        std::fs::create_dir_all(&args.out)?;
        Ok(Self {
            cfg,
            id,
            out_dir: args.out.clone(),
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    fn finish(
        self,
        command: &str,
        n_z: Option<usize>,
        invariants: serde_json::Value,
        trigger_summary: Option<TriggerSummary>,
    ) -> Result<(), Error> {
        let mut meta = grid_meta(&self.cfg);
        meta.n_z = n_z;
        let manifest = RunManifest {
            run_id: self.id.clone(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            config: self.cfg.to_json(),
            grid: meta,
            duration_seconds: self.started.elapsed().as_secs_f64(),
            invariants,
            trigger_summary,
            outputs: self.outputs,
        };
        let path = manifest.write(&self.out_dir)?;
        println!("manifest: {}", path.display());
        Ok(())
    }
}

fn cmd_bloch(args: &RunArgs) -> Result<(), Error> {
    let mut ctx = RunContext::new(args, "bloch")?;
    let cfg = ctx.cfg.clone();
    let pump = cfg.pump()?;
    let stokes = cfg.stokes()?;
    let grid = cfg.time_grid()?;
    let initial = cfg.initial_state()?;

    let report = validate_cpr_conditions(&pump, &stokes);
    println!("coherence-preparation conditions: {}", report.summary());

    let traj = if args.check_convergence {
        solve_bloch_checked(&pump, &stokes, &grid, &initial)?
    } else {
        solve_bloch(&pump, &stokes, &grid, &initial)
    };
    traj.validate()?;

    let params = format!(
        "pump: omega0 {} ns^-1, tau {} ns, detuning {} ns^-1; stokes: omega0 {} ns^-1, tau {} ns, detuning {} ns^-1",
        pump.omega0_ns_inv, pump.tau_ns, pump.detuning_ns_inv,
        stokes.omega0_ns_inv, stokes.tau_ns, stokes.detuning_ns_inv,
    );
    let path = ctx.out_dir.join("trajectory.tsv");
    write_trajectory(&path, &traj, &ctx.id, &params)?;
    ctx.outputs.push(OutputFileEntry {
        path: "trajectory.tsv".into(),
        kind: "Bloch trajectory".into(),
    });

    let peak13 = bloch::coherence_13(&traj)
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max);
    println!("max |rho13| = {peak13:.4}");
    let invariants = json!({
        "conservation": traj.stats,
        "cpr_conditions": report,
        "max_abs_rho13": peak13,
    });
    ctx.finish("bloch", None, invariants, None)
}

fn cmd_propagate(args: &RunArgs, with_trigger: bool) -> Result<(), Error> {
    let command = if with_trigger { "trigger" } else { "propagate" };
    let mut ctx = RunContext::new(args, command)?;
    let cfg = ctx.cfg.clone();
    let pump = cfg.pump()?;
    let stokes = cfg.stokes()?;
    let scheme = cfg.level_scheme()?;
    let medium = cfg.medium()?;
    let grid = cfg.sim_grid()?;
    let initial = cfg.initial_state()?;
    let trig = if with_trigger {
        Some(cfg.trigger()?)
    } else {
        None
    };

    let report = validate_cpr_conditions(&pump, &stokes);
    if !report.pass {
        eprintln!(
            "warning: pulse parameters leave the robust-coherence region: {}",
            report.summary()
        );
    }
    if args.check_convergence {
        let worst =
            check_z_convergence(
                &pump,
                &stokes,
                &scheme,
                &medium,
                &grid,
                &initial,
                100,
                lambdaprop::propagation::Z_CONVERGENCE_TOL,
            )?;
        println!("z-march convergence probe: max relative change {worst:.3e}");
    }

    let opts = PropagationOptions {
        z_stride: cfg.grid.z_stride,
        store_fields: true,
    };
    let out = run_propagation(&pump, &stokes, &scheme, &medium, &grid, &initial, &opts)?;
    out.coherence.validate()?;
    let fields = out.fields.as_ref().expect("fields stored");

    let format: GridFormat = args.format.into();
    for (stem, name, unit, rows) in [
        ("pump", "pump Rabi envelope", "ns^-1", &fields.omega_p),
        ("stokes", "Stokes Rabi envelope", "ns^-1", &fields.omega_s),
        ("coherence", "rho13", "1", &out.coherence.rho13),
    ] {
        let q = GridQuantity {
            name,
            unit,
            z_um: &out.coherence.z_um,
            t_ns: &out.coherence.t_ns,
            rows,
        };
        ctx.outputs
            .extend(write_grid(&ctx.out_dir, stem, &q, &ctx.id, format)?);
    }

    let sat = saturation_distance(&out.coherence, DEFAULT_SATURATION_THRESHOLD);
    println!(
        "saturation distance (threshold {DEFAULT_SATURATION_THRESHOLD}): {sat:.5} um over {} um",
        grid.length_um()
    );

    let mut trigger_summary = None;
    if let Some(trig) = &trig {
        let gen = solve_trigger(&out.coherence, trig, &scheme, &medium, &grid)?;
        let mr = gen.manley_rowe_residual();
        let fluence = fluence_per_z(&gen, &scheme, grid.time.dt_ns());
        let (max_fluence, zi) = fluence
            .iter()
            .enumerate()
            .map(|(i, f)| (*f, i))
            .fold((0.0, 0), |acc, (f, i)| if f > acc.0 { (f, i) } else { acc });
        let area = cfg
            .pulses
            .trigger
            .as_ref()
            .and_then(|t| t.beam_area_mm2)
            .unwrap_or(1.0);
        let photons = photon_yield(&gen, &scheme, trig, area, &PhysicalConstants::default());
        println!(
            "trigger: max fluence {max_fluence:.4e} J/m^2 at z = {:.5} um; \
             photons/shot through {area} mm^2: {photons:.3e}; Manley-Rowe residual {mr:.2e}",
            gen.z_um[zi]
        );
        for (stem, name, rows) in [
            ("trigger_field", "trigger Rabi envelope", &gen.omega_t),
            ("generated_field", "generated Rabi envelope", &gen.omega_g),
        ] {
            let q = GridQuantity {
                name,
                unit: "ns^-1",
                z_um: &gen.z_um,
                t_ns: &gen.t_ns,
                rows,
            };
            ctx.outputs
                .extend(write_grid(&ctx.out_dir, stem, &q, &ctx.id, format)?);
        }
        trigger_summary = Some(TriggerSummary {
            max_fluence_j_m2: max_fluence,
            z_of_max_um: gen.z_um[zi],
            photons_per_shot: photons,
            manley_rowe_residual: mr,
        });
    }

    let invariants = json!({
        "diagnostics": out.diagnostics,
        "cpr_conditions": report,
        "saturation_um": sat,
    });
    ctx.finish(command, Some(grid.n_z), invariants, trigger_summary)
}

fn cmd_transverse(args: &RunArgs) -> Result<(), Error> {
    let mut ctx = RunContext::new(args, "transverse")?;
    let cfg = ctx.cfg.clone();
    let pump = cfg.pump()?;
    let stokes = cfg.stokes()?;
    let scheme = cfg.level_scheme()?;
    let medium = cfg.medium()?;
    let grid = cfg.sim_grid()?;
    let initial = cfg.initial_state()?;
    let trig = cfg.trigger_optional()?;
    let tgrid = cfg.transverse_grid()?;

    let opts = PropagationOptions {
        z_stride: cfg.grid.z_stride,
        store_fields: false,
    };
    let result = run_transverse(
        &pump,
        &stokes,
        trig.as_ref(),
        &scheme,
        &medium,
        &grid,
        &tgrid,
        &initial,
        &opts,
    )?;

    let mut rows = Vec::new();
    for (si, r) in result.r_mm.iter().enumerate() {
        for (zi, z) in result.z_um.iter().enumerate() {
            rows.push(vec![*r, *z, result.peak_coherence[si][zi]]);
        }
    }
    write_table(
        &ctx.out_dir.join("transverse_coherence.tsv"),
        &ctx.id,
        "r_mm z_um peak_abs_rho13",
        &rows,
    )?;
    ctx.outputs.push(OutputFileEntry {
        path: "transverse_coherence.tsv".into(),
        kind: "peak coherence over (r, z)".into(),
    });

    let mut trigger_summary = None;
    if let Some(fluence) = &result.fluence_j_m2 {
        let mut rows = Vec::new();
        for (si, r) in result.r_mm.iter().enumerate() {
            for (zi, z) in result.z_um.iter().enumerate() {
                rows.push(vec![*r, *z, fluence[si][zi]]);
            }
        }
        write_table(
            &ctx.out_dir.join("transverse_fluence.tsv"),
            &ctx.id,
            "r_mm z_um fluence_j_m2",
            &rows,
        )?;
        ctx.outputs.push(OutputFileEntry {
            path: "transverse_fluence.tsv".into(),
            kind: "generated-field fluence over (r, z)".into(),
        });
        let trig = trig.as_ref().unwrap();
        if let Some((photons, zi)) = result.total_photons(trig.photon_energy_ev) {
            println!(
                "beam-integrated photons/shot: {photons:.3e} at z = {:.5} um",
                result.z_um[zi]
            );
            let max_fluence = fluence.iter().map(|per_z| per_z[zi]).fold(0.0f64, f64::max);
            trigger_summary = Some(TriggerSummary {
                max_fluence_j_m2: max_fluence,
                z_of_max_um: result.z_um[zi],
                photons_per_shot: photons,
                manley_rowe_residual: 0.0,
            });
        }
    }

    if let Some(n) = args.xy_raster {
        let n = n.max(2);
        // per-sample peak over z, regridded onto the beam cross-section
        let peaks: Vec<f64> = result
            .peak_coherence
            .iter()
            .map(|per_z| per_z.iter().cloned().fold(0.0, f64::max))
            .collect();
        let raster = radial_to_xy_raster(&result.r_mm, &peaks, n);
        let rows: Vec<Vec<f64>> = raster.iter().map(|(x, y, v)| vec![*x, *y, *v]).collect();
        write_table(
            &ctx.out_dir.join("transverse_coherence_xy.tsv"),
            &ctx.id,
            "x_mm y_mm peak_abs_rho13",
            &rows,
        )?;
        ctx.outputs.push(OutputFileEntry {
            path: "transverse_coherence_xy.tsv".into(),
            kind: "peak coherence raster over (x, y)".into(),
        });
        if let (Some(fluence), Some((_, zi))) = (
            &result.fluence_j_m2,
            trig.as_ref().and_then(|t| result.total_photons(t.photon_energy_ev)),
        ) {
            let per_r: Vec<f64> = fluence.iter().map(|per_z| per_z[zi]).collect();
            let raster = radial_to_xy_raster(&result.r_mm, &per_r, n);
            let rows: Vec<Vec<f64>> = raster.iter().map(|(x, y, v)| vec![*x, *y, *v]).collect();
            write_table(
                &ctx.out_dir.join("transverse_fluence_xy.tsv"),
                &ctx.id,
                "x_mm y_mm fluence_j_m2",
                &rows,
            )?;
            ctx.outputs.push(OutputFileEntry {
                path: "transverse_fluence_xy.tsv".into(),
                kind: "fluence raster over (x, y)".into(),
            });
        }
    }

    let on_axis_peak = result.peak_coherence[0]
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    println!(
        "{} radial samples, on-axis peak |rho13| = {on_axis_peak:.4}",
        result.r_mm.len()
    );
    let invariants = json!({
        "diagnostics": result.diagnostics,
        "on_axis_peak_abs_rho13": on_axis_peak,
    });
    ctx.finish("transverse", Some(grid.n_z), invariants, trigger_summary)
}

fn cmd_scan(args: &RunArgs) -> Result<(), Error> {
    let mut ctx = RunContext::new(args, "scan")?;
    let cfg = ctx.cfg.clone();
    let (preset, densities) = cfg.scan_preset()?;
    let result = density_scan(&preset, &densities)?;

    let rows: Vec<Vec<f64>> = result
        .entries
        .iter()
        .map(|e| {
            vec![
                e.density_per_um3,
                e.saturation_um,
                e.peak_generated_intensity,
                result.fit.constant,
                result.fit.max_rel_residual,
            ]
        })
        .collect();
    write_table(
        &ctx.out_dir.join("scan_summary.tsv"),
        &ctx.id,
        "density_per_um3 saturation_um peak_generated_intensity fit_constant max_rel_residual",
        &rows,
    )?;
    ctx.outputs.push(OutputFileEntry {
        path: "scan_summary.tsv".into(),
        kind: "density scan summary".into(),
    });

    println!(
        "inverse-law fit: C = {:.4e} um*um^-3 (max residual {:.2e}); free slope {:.4}",
        result.fit.constant, result.fit.max_rel_residual, result.fit.free_slope
    );
    for e in &result.entries {
        println!(
            "  N = {:.3e}: saturation {:.5e} um, peak |Omega_g|^2 = {:.4e}",
            e.density_per_um3, e.saturation_um, e.peak_generated_intensity
        );
    }
    let invariants = json!({
        "diagnostics": result.diagnostics,
        "fit": result.fit,
    });
    ctx.finish("scan", None, invariants, None)
}

fn cmd_thresholds(args: &ThresholdArgs) -> Result<(), Error> {
    let query = if let Some(e31) = args.e31_ev {
        ThresholdQuery::new(e31, args.masses_ev.clone())?
    } else {
        let cfg = load_config(&args.config, &args.preset)?;
        cfg.threshold_query()?
    };
    let table = threshold_table(&query)?;
    println!(
        "E31 = {} eV; {} mass states",
        query.e31_ev,
        query.masses_ev.len()
    );
    println!("i j  m_i+m_j_eV      E_gamma_eV");
    for e in &table {
        println!(
            "{} {}  {:<14.9} {:.12}",
            e.i + 1,
            e.j + 1,
            e.mass_sum_ev,
            e.photon_energy_ev
        );
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let id = run_id("thresholds", &serde_json::to_value(&query).unwrap());
        let rows: Vec<Vec<f64>> = table
            .iter()
            .map(|e| {
                vec![
                    (e.i + 1) as f64,
                    (e.j + 1) as f64,
                    e.mass_sum_ev,
                    e.photon_energy_ev,
                ]
            })
            .collect();
        write_table(
            &out.join("thresholds.tsv"),
            &id,
            "i j mass_sum_ev photon_energy_ev",
            &rows,
        )?;
        println!("wrote {}", out.join("thresholds.tsv").display());
    }
    Ok(())
}
