use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::de::DeserializeOwned;

use wallflux::besov::{besov_seminorm, dyadic_probes, max_octave, structure_function};
use wallflux::budget::{Budget, BudgetScales, Mode};
use wallflux::limits::{sweep, KatoLadder, RelativeEnergy, SweepSpec};
use wallflux::report::{
    budget_table, kato_table, ledger_table, relative_energy_table, structure_table, sweep_table,
    write_atomic, RunManifest,
};
use wallflux::solver::{euler_reference, run, Scenario, SolverConfig};
use wallflux::{ChannelDomain, Error, ErrorClass, Region, Side, Snapshot};

#[derive(Parser)]
#[command(
    name = "wallflux",
    version,
    about = "Wall-bounded flow simulations and energy-budget diagnostics"
)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a channel flow and write snapshots plus the energy ledger.
    Simulate(Common),
    /// Boundary-localized energy budget of a snapshot series.
    Budget(BudgetArgs),
    /// Structure functions and Besov seminorms of snapshots.
    Besov(BesovArgs),
    /// Viscosity sweep with the hypothesis verdict table.
    Sweep(Common),
    /// Relative energy of decaying shear against its Euler profile.
    RelativeEnergy(Common),
    /// Dissipation inside wall strips of a snapshot series.
    Kato(KatoArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long)]
    snapshots: String,
    #[arg(long)]
    out: PathBuf,
    /// JSON file with the budget scales; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Viscosity for `ns` mode (default: the value stored in the snapshots).
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Euler,
    Ns,
}

#[derive(Args)]
struct BesovArgs {
    #[arg(long)]
    snapshots: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    sigma: f64,
    /// `full`, `near:A` (rows with d < A) or `far:A` (rows with d >= A).
    #[arg(long, default_value = "full")]
    region: String,
}

#[derive(Args)]
struct KatoArgs {
    #[arg(long)]
    snapshots: String,
    #[arg(long)]
    out: PathBuf,
    /// Strip widths; `Ly/2` means the whole channel.
    #[arg(long, value_delimiter = ',', required = true)]
    a: Vec<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Numeric => 3,
                ErrorClass::Scale => 4,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OBL_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(&a),
        Command::Budget(a) => budget(&a),
        Command::Besov(a) => besov(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::RelativeEnergy(a) => run_relative_energy(&a),
        Command::Kato(a) => kato(&a),
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<(T, serde_json::Value)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing {}", path.display()))?;
    let cfg = serde_json::from_value(value.clone())
        .map_err(|e| Error::Config(e.to_string()))
        .with_context(|| format!("invalid configuration in {}", path.display()))?;
    Ok((cfg, value))
}

fn out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .map_err(Error::from)
        .with_context(|| format!("creating {}", path.display()))
}

fn snapshot_paths(pattern: &str) -> Result<Vec<PathBuf>> {
    let mut paths = glob::glob(pattern)
        .map_err(|e| Error::Config(format!("bad snapshot pattern {pattern}: {e}")))?
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Io(e.into()))?;
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no snapshots match {pattern}")).into());
    }
    Ok(paths)
}

fn read_snapshot(path: &Path) -> Result<Snapshot> {
    Snapshot::read(path).with_context(|| format!("reading snapshot {}", path.display()))
}

fn finish(mut manifest: RunManifest, out: &Path, started: Instant) -> Result<()> {
    manifest.stage("total", started.elapsed().as_secs_f64());
    let path = manifest.finish(out)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn simulate(a: &Common) -> Result<()> {
    let started = Instant::now();
    let (cfg, value): (SolverConfig, _) = read_config(&a.config)?;
    cfg.validate()?;
    let snap_dir = a.out.join("snapshots");
    out_dir(&snap_dir)?;
    let mut manifest = RunManifest::new("simulate", value);
    manifest.inputs.push(a.config.clone());
    let mut index = 0usize;
    let mut written = Vec::new();
    let summary = run(&cfg, |s| {
        let path = snap_dir.join(format!("snap_{index:06}.obl"));
        write_atomic(&path, &s.encode())?;
        written.push(path);
        index += 1;
        Ok(())
    })?;
    manifest.stage("solve", started.elapsed().as_secs_f64());
    let ledger = a.out.join("ledger.csv");
    ledger_table(&summary.ledger).write(&ledger)?;
    manifest.outputs.extend(written);
    manifest.outputs.push(ledger);
    info!("{} steps, {} snapshots", summary.steps, summary.snapshots);
    finish(manifest, &a.out, started)
}

fn budget_scales(a: &BudgetArgs, snapshot_nu: f64) -> Result<(BudgetScales, serde_json::Value)> {
    let (mut scales, value) = match &a.config {
        Some(p) => read_config::<BudgetScales>(p)?,
        None => {
            let (Some(ell), Some(h)) = (a.ell, a.h) else {
                return Err(
                    Error::Config("budget needs --config or both --ell and --h".into()).into(),
                );
            };
            (BudgetScales::euler(ell, h), serde_json::Value::Null)
        }
    };
    if let Some(v) = a.ell {
        scales.ell = v;
    }
    if let Some(v) = a.h {
        scales.h = v;
    }
    match a.mode {
        Some(ModeArg::Euler) => scales.mode = Mode::Euler,
        Some(ModeArg::Ns) => scales.mode = Mode::Ns,
        None => {}
    }
    if let Some(nu) = a.nu {
        scales.nu = nu;
    } else if scales.mode == Mode::Ns && scales.nu == 0.0 {
        scales.nu = snapshot_nu;
    }
    let echo = serde_json::json!({ "file": value, "scales": scales });
    Ok((scales, echo))
}

fn budget(a: &BudgetArgs) -> Result<()> {
    let started = Instant::now();
    let paths = snapshot_paths(&a.snapshots)?;
    let first = read_snapshot(&paths[0])?;
    let (scales, echo) = budget_scales(a, first.nu)?;
    let mut acc = Budget::new(first.grid(), scales)?.accumulator();
    acc.push(&first)?;
    for p in &paths[1..] {
        acc.push(&read_snapshot(p)?)?;
    }
    let report = acc.finish()?;
    out_dir(&a.out)?;
    let csv = a.out.join("budget.csv");
    let json = a.out.join("budget.json");
    budget_table(&report.rows).write(&csv)?;
    write_atomic(&json, &serde_json::to_vec_pretty(&report)?)?;
    let mut manifest = RunManifest::new("budget", echo);
    manifest.inputs = paths;
    manifest.outputs = vec![csv, json];
    finish(manifest, &a.out, started)
}

fn parse_region(spec: &str, dom: &ChannelDomain) -> Result<Region> {
    if spec == "full" {
        return Ok(Region::full(dom.grid()));
    }
    let (side, width) = spec.split_once(':').ok_or_else(|| {
        Error::Config(format!("region must be full, near:A or far:A, got {spec}"))
    })?;
    let side = match side {
        "near" => Side::Near,
        "far" => Side::Far,
        _ => return Err(Error::Config(format!("unknown region side {side}")).into()),
    };
    let a: f64 = width
        .parse()
        .map_err(|_| Error::Config(format!("bad strip width {width}")))?;
    Ok(dom.strip_region(a, side)?)
}

fn besov(a: &BesovArgs) -> Result<()> {
    let started = Instant::now();
    let paths = snapshot_paths(&a.snapshots)?;
    let first = read_snapshot(&paths[0])?;
    let grid = *first.grid();
    let dom = ChannelDomain::from_grid(grid);
    let region = parse_region(&a.region, &dom)?;
    let probes = dyadic_probes(&grid, 0..=max_octave(&grid));
    let mut tables = Vec::new();
    let mut estimates = Vec::new();
    for p in &paths {
        let s = if p == &paths[0] {
            first.clone()
        } else {
            read_snapshot(p)?
        };
        tables.push(structure_function(&s.u, a.p, &probes, &region, s.t)?);
        let e = besov_seminorm(&s.u, a.p, a.sigma, &region, &probes)?;
        estimates.push(serde_json::json!({ "t": s.t, "estimate": e }));
    }
    out_dir(&a.out)?;
    let csv = a.out.join("structure.csv");
    let json = a.out.join("besov.json");
    structure_table(&tables, a.sigma).write(&csv)?;
    write_atomic(&json, &serde_json::to_vec_pretty(&estimates)?)?;
    let echo = serde_json::json!({ "p": a.p, "sigma": a.sigma, "region": a.region });
    let mut manifest = RunManifest::new("besov", echo);
    manifest.inputs = paths;
    manifest.outputs = vec![csv, json];
    finish(manifest, &a.out, started)
}

fn run_sweep(a: &Common) -> Result<()> {
    let started = Instant::now();
    let (spec, value): (SweepSpec, _) = read_config(&a.config)?;
    let outcome = sweep(&spec)?;
    out_dir(&a.out)?;
    let csv = a.out.join("sweep.csv");
    let json = a.out.join("verdicts.json");
    sweep_table(&outcome.records).write(&csv)?;
    write_atomic(&json, &serde_json::to_vec_pretty(&outcome)?)?;
    let mut manifest = RunManifest::new("sweep", value);
    manifest.inputs.push(a.config.clone());
    manifest.outputs = vec![csv, json];
    finish(manifest, &a.out, started)
}

fn run_relative_energy(a: &Common) -> Result<()> {
    let started = Instant::now();
    // a solver configuration plus an optional cutoff width `h` (default: nu)
    let (mut raw, value): (serde_json::Map<String, serde_json::Value>, _) = read_config(&a.config)?;
    let h = match raw.remove("h") {
        Some(v) => Some(
            v.as_f64()
                .ok_or_else(|| Error::Config("h must be a number".into()))?,
        ),
        None => None,
    };
    let solver: SolverConfig =
        serde_json::from_value(raw.into()).map_err(|e| Error::Config(e.to_string()))?;
    let grid = solver.validate()?;
    let Scenario::DecayingShear { n } = solver.scenario else {
        return Err(
            Error::Config("relative-energy needs the decaying_shear scenario".into()).into(),
        );
    };
    let ly = grid.ly;
    let k = n as f64 * std::f64::consts::PI / ly;
    let reference = euler_reference(&grid, |y| (k * y).sin())?;
    let h = h.unwrap_or(solver.nu);
    let mut re = RelativeEnergy::new(&reference, solver.nu, h)?;
    run(&solver, |s| re.push(s))?;
    let report = re.finish()?;
    out_dir(&a.out)?;
    let csv = a.out.join("relative_energy.csv");
    let json = a.out.join("relative_energy.json");
    relative_energy_table(&report).write(&csv)?;
    write_atomic(&json, &serde_json::to_vec_pretty(&report)?)?;
    if !report.holds {
        log::warn!(
            "relative energy exceeds the Gronwall envelope by {:e}",
            report.max_excess
        );
    }
    let mut manifest = RunManifest::new("relative-energy", value);
    manifest.inputs.push(a.config.clone());
    manifest.outputs = vec![csv, json];
    finish(manifest, &a.out, started)
}

fn kato(a: &KatoArgs) -> Result<()> {
    let started = Instant::now();
    let paths = snapshot_paths(&a.snapshots)?;
    let first = read_snapshot(&paths[0])?;
    let mut ladder = KatoLadder::new(first.grid(), &a.a)?;
    ladder.push(&first);
    for p in &paths[1..] {
        let s = read_snapshot(p)?;
        if s.grid() != first.grid() {
            bail!(Error::Config(format!(
                "{} is on a different grid",
                p.display()
            )));
        }
        ladder.push(&s);
    }
    let values = ladder.finish()?;
    out_dir(&a.out)?;
    let csv = a.out.join("kato.csv");
    kato_table(&values).write(&csv)?;
    let mut manifest = RunManifest::new("kato", serde_json::json!({ "a": a.a }));
    manifest.inputs = paths;
    manifest.outputs = vec![csv];
    finish(manifest, &a.out, started)
}
