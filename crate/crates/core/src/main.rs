//! Command-line driver for the scleral growth-and-remodeling simulator.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oculogr::config::{ConfigError, RunConfig};
use oculogr::fem::FemError;
use oculogr::mesh::generate;
use oculogr::output::{
    snapshot_fields, write_snapshot, write_summary, write_timeseries, SnapshotFields,
    TIMESERIES_HEADER,
};
use oculogr::protocol::{classify, run_scenario, ProtocolError, TimeSeriesRecord};

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_STATE_COLLAPSE: u8 = 4;

#[derive(Parser)]
#[command(name = "oculogr", about = "Scleral growth-and-remodeling simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (flat `key = value` lines); missing keys take defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset applied before config-file overrides
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    scenario: Option<u8>,
    /// Output directory (overrides `output.dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for element assembly (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the shell mesh and write it as a VTK file
    GenerateMesh(CommonArgs),
    /// Run the three-step growth-and-remodeling protocol
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// VTK snapshot cadence in days (0 disables; overrides config)
        #[arg(long)]
        snapshot_every: Option<f64>,
    },
    /// Run the independent verification oracles
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Seed for the randomized state sampler
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize an existing run directory from its time-series CSV
    Report(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::GenerateMesh(c) | Command::Report(c) => c,
        Command::Run { common, .. } | Command::Verify { common, .. } => common,
    };
    if let Some(threads) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let config = match load_config(common) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match cli.command {
        Command::GenerateMesh(_) => generate_mesh(&config),
        Command::Run { snapshot_every, .. } => run(&config, snapshot_every),
        Command::Verify { seed, .. } => verify(seed),
        Command::Report(_) => report(&config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Mesh(#[from] oculogr::mesh::MeshError),
    #[error(transparent)]
    Output(#[from] oculogr::output::OutputError),
    #[error("{0}")]
    Other(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Protocol(ProtocolError::Solve { source, .. }) => match source {
                FemError::Nonconvergence { .. } | FemError::Linear(_) => EXIT_NONCONVERGENCE,
                _ => EXIT_NONCONVERGENCE,
            },
            CliError::Protocol(ProtocolError::StateCollapse { .. }) => EXIT_STATE_COLLAPSE,
            CliError::Protocol(ProtocolError::Material(_)) => EXIT_STATE_COLLAPSE,
            _ => 1,
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let mut config = match common.scenario {
        Some(id) => RunConfig::for_scenario(id),
        None => RunConfig::default(),
    };
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Validation {
            key: path.display().to_string(),
            constraint: format!("unreadable config file: {e}"),
        })?;
        config.apply(&text)?;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn generate_mesh(config: &RunConfig) -> Result<ExitCode, CliError> {
    let mesh = generate(&config.mesh)?;
    fs::create_dir_all(&config.out_dir)?;
    let n = mesh.elements.len();
    let region_id: Vec<f64> = mesh
        .elements
        .iter()
        .map(|e| match e.region {
            oculogr::mesh::Region::Lc => 0.0,
            oculogr::mesh::Region::Pps => 1.0,
            oculogr::mesh::Region::Ps => 2.0,
        })
        .collect();
    let fields = SnapshotFields {
        region_id,
        mean_dg_circ: vec![0.0; n],
        mean_dg_merid: vec![0.0; n],
        thickness_stretch: vec![1.0; n],
        rho0_fc: mesh
            .elements
            .iter()
            .map(|e| config.regions.get(e.region).rho0_fc0)
            .collect(),
        rho0_fm: mesh
            .elements
            .iter()
            .map(|e| config.regions.get(e.region).rho0_fm0)
            .collect(),
        lambda_r_circ: vec![1.0; n],
        lambda_r_merid: vec![1.0; n],
    };
    let zeros = vec![nalgebra::Vector3::zeros(); mesh.nodes.len()];
    write_snapshot(&config.out_dir, &mesh, &zeros, &fields, 0.0)?;
    println!(
        "mesh: {} nodes, {} elements ({} hex, {} wedge), volume {:.6e} m^3",
        mesh.nodes.len(),
        n,
        mesh.elements
            .iter()
            .filter(|e| e.kind == oculogr::elements::ElementKind::Hex8)
            .count(),
        mesh.elements
            .iter()
            .filter(|e| e.kind == oculogr::elements::ElementKind::Wedge6)
            .count(),
        oculogr::mesh::mesh_volume(&mesh),
    );
    for w in &mesh.warnings {
        println!("warning: {w}");
    }
    println!("wrote {}", config.out_dir.join("snapshot_0.vtk").display());
    Ok(ExitCode::SUCCESS)
}

fn run(config: &RunConfig, snapshot_every: Option<f64>) -> Result<ExitCode, CliError> {
    let cadence = snapshot_every.unwrap_or(config.snapshot_every_days);
    fs::create_dir_all(&config.out_dir)?;
    let mesh = generate(&config.mesh)?;
    let mut next_snapshot = 0.0;
    let mut snapshot_err: Option<CliError> = None;
    let (result, _sim) = run_scenario(
        &mesh,
        &config.regions,
        &config.scenario,
        config.opts,
        config.newton,
        |record, sim| {
            if cadence > 0.0 && record.day + 1e-9 >= next_snapshot && snapshot_err.is_none() {
                next_snapshot = record.day + cadence;
                let outcome = snapshot_fields(sim).map_err(CliError::from).and_then(|f| {
                    write_snapshot(
                        &config.out_dir,
                        sim.mesh(),
                        &sim.displacements(),
                        &f,
                        record.day,
                    )
                    .map_err(CliError::from)
                });
                if let Err(e) = outcome {
                    snapshot_err = Some(e);
                }
            }
            println!(
                "day {:7.1}  dG_c {:+.5}  dG_m {:+.5}  thickness {:.4} mm  apex {:+.3} mm",
                record.day,
                record.max_dg_circ_pps,
                record.max_dg_merid_pps,
                record.mean_pps_thickness_mm,
                record.apex_disp_mm
            );
            Ok(())
        },
    )?;
    if let Some(e) = snapshot_err {
        return Err(e);
    }
    write_timeseries(&config.out_dir.join("timeseries.csv"), &result.records)?;
    write_summary(&config.out_dir.join("summary.json"), &result, config)?;
    println!(
        "{:?} (event day {:.0}); final PPS thickness {:.4} mm ({:.1}% reduction); fractions {:.1}/{:.1}",
        result.classification,
        result.event_day,
        result.final_thickness_mm,
        result.thickness_reduction_pct,
        result.final_circ_fraction_pct,
        result.final_merid_fraction_pct,
    );
    println!("wrote {}", config.out_dir.join("timeseries.csv").display());
    println!("wrote {}", config.out_dir.join("summary.json").display());
    Ok(ExitCode::SUCCESS)
}

fn verify(seed: u64) -> Result<ExitCode, CliError> {
    let report = oculogr::oracle::run_all(seed);
    println!("{}", report.render_table());
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Other(e.to_string()))?
    );
    if report.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Other("oracle verification failed".into()))
    }
}

fn report(config: &RunConfig) -> Result<ExitCode, CliError> {
    let path = config.out_dir.join("timeseries.csv");
    let text = fs::read_to_string(&path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != TIMESERIES_HEADER {
        return Err(CliError::Other(format!(
            "{}: unexpected header `{header}`",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Other(format!("{}: row {}: {e}", path.display(), idx + 2)))?;
        if fields.len() != 7 {
            return Err(CliError::Other(format!(
                "{}: row {}: expected 7 fields",
                path.display(),
                idx + 2
            )));
        }
        records.push(TimeSeriesRecord {
            day: fields[0],
            max_dg_circ_pps: fields[1],
            max_dg_merid_pps: fields[2],
            mean_pps_thickness_mm: fields[3],
            circ_fraction_pct: fields[4],
            merid_fraction_pct: fields[5],
            apex_disp_mm: fields[6],
        });
    }
    if records.is_empty() {
        return Err(CliError::Other(format!("{}: no rows", path.display())));
    }
    let (classification, event_day) = classify(&records);
    let first = records.first().unwrap();
    let last = records.last().unwrap();
    println!(
        "{} rows over {:.0} days",
        records.len(),
        last.day - first.day
    );
    println!("classification: {classification:?} (event day {event_day:.0})");
    println!(
        "PPS thickness: {:.4} -> {:.4} mm ({:.1}% reduction)",
        first.mean_pps_thickness_mm,
        last.mean_pps_thickness_mm,
        100.0 * (1.0 - last.mean_pps_thickness_mm / first.mean_pps_thickness_mm)
    );
    println!(
        "fiber fractions: {:.1}/{:.1} -> {:.1}/{:.1}",
        first.circ_fraction_pct,
        first.merid_fraction_pct,
        last.circ_fraction_pct,
        last.merid_fraction_pct
    );
    Ok(ExitCode::SUCCESS)
}
