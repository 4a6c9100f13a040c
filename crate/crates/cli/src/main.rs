use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rtk_eval::config::{resolve, RunConfig};
use rtk_eval::geodesy::{
    ecef_to_geodetic, geodetic_to_ecef, geodetic_to_utm, utm_to_geodetic, EcefCoord, Ellipsoid, GeodesyError,
    GeodeticCoord, UtmCoord, UtmZone,
};
use rtk_eval::matching::export_visit_table;
use rtk_eval::pipeline::{build_table, evaluate, load_inputs, EvalError};
use rtk_eval::report::{aggregate_drift, build_report, drift_fit_table, sha256_hex, write_artifacts, EvaluationReport, Provenance};
use rtk_eval::synth::{generate, write_scenario, ScenarioSpec, SynthError};
use rtk_eval::trajectory_io::first_rtk_fix;

const OUT_DIR_ENV: &str = "RTK_EVAL_OUT_DIR";

#[derive(Parser)]
#[command(name = "rtk-eval", version, about = "Absolute accuracy of RTK-SLAM trajectories against surveyed checkpoints")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Output directory; overrides the config.
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every method of one sequence and write the report.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Evaluate at the visits of an existing table.
        #[arg(long)]
        visit_table: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Detect checkpoint visits on the reference method and export the table.
    Match {
        #[arg(long)]
        config: PathBuf,
        /// Target file; defaults to visit_table.json in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Pool drift samples from several reports and fit the drift model.
    Drift {
        /// report.json files, one per sequence.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Fixed intercept in meters.
        #[arg(long, default_value_t = rtk_eval::drift::DEFAULT_EPS0)]
        eps0: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Generate a synthetic scenario with known expected metrics.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert one point between geodetic, ECEF and UTM.
    Convert {
        /// geodetic, ecef or a UTM zone such as utm32n.
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// lat lon h (degrees, meters), x y z, or easting northing height.
        #[arg(num_args = 3, allow_negative_numbers = true, required = true)]
        values: Vec<f64>,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure { code: e.exit_code() as u8, error: e.into() }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        let code = match e {
            SynthError::InvalidSpec(_) => 3,
            SynthError::Geodesy(_) => 5,
            SynthError::Io(_) => 6,
        };
        Failure { code, error: e.into() }
    }
}

fn io_failure(e: anyhow::Error) -> Failure {
    Failure { code: 6, error: e }
}

fn out_dir(out: &OutDir, config_path: &Path, config: &RunConfig) -> PathBuf {
    out.out_dir.clone().unwrap_or_else(|| resolve(config_path, &config.output_dir))
}

fn hash_file(path: &Path) -> Result<String, Failure> {
    fs::read(path)
        .map(|b| sha256_hex(&b))
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io_failure)
}

fn cmd_evaluate(config_path: &Path, visit_table: Option<&Path>, out: &OutDir) -> Result<(), Failure> {
    let (config, bytes) = RunConfig::load(config_path).map_err(EvalError::from)?;
    let inputs = load_inputs(&config, config_path, visit_table)?;
    let ev = evaluate(&inputs)?;

    let mut hashes = BTreeMap::new();
    let mut named: Vec<(String, PathBuf)> = vec![
        (config.checkpoints.display().to_string(), resolve(config_path, &config.checkpoints)),
        (config.rtk_log.display().to_string(), resolve(config_path, &config.rtk_log)),
    ];
    for m in &config.methods {
        named.push((m.trajectory.display().to_string(), resolve(config_path, &m.trajectory)));
    }
    match (visit_table, &config.visit_table) {
        (Some(p), _) => named.push(("--visit-table".to_string(), p.to_path_buf())),
        (None, Some(p)) => named.push((p.display().to_string(), resolve(config_path, p))),
        _ => {}
    }
    for (key, path) in named {
        hashes.insert(key, hash_file(&path)?);
    }
    let report = build_report(&ev, Provenance::new(&bytes, hashes));
    let dir = out_dir(out, config_path, &config);
    write_artifacts(&dir, &report, &ev, &inputs.checkpoints)
        .with_context(|| format!("writing artifacts to {}", dir.display()))
        .map_err(io_failure)?;
    print!("{}", report.summary_table());
    println!("artifacts written to {}", dir.display());
    Ok(())
}

fn cmd_match(config_path: &Path, output: Option<&Path>, out: &OutDir) -> Result<(), Failure> {
    let (config, _) = RunConfig::load(config_path).map_err(EvalError::from)?;
    let mut inputs = load_inputs(&config, config_path, None)?;
    inputs.visit_table = None;
    let origin = first_rtk_fix(&inputs.rtk).map_err(|source| EvalError::Parse { path: config.rtk_log.clone(), source })?;
    let frame = rtk_eval::geodesy::LocalFrame::new(origin, inputs.zone);
    let table = build_table(&inputs, &frame)?;
    let target = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir(out, config_path, &config).join(rtk_eval::report::VISIT_TABLE_FILE));
    if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display())).map_err(io_failure)?;
    }
    fs::write(&target, export_visit_table(&table))
        .with_context(|| format!("writing {}", target.display()))
        .map_err(io_failure)?;
    if !table.unvisited_checkpoints.is_empty() {
        log::warn!("unvisited checkpoints: {}", table.unvisited_checkpoints.join(", "));
    }
    println!(
        "{} visits ({} unmatched dwells) from '{}' written to {}",
        table.visits.len(),
        table.unmatched_segments.len(),
        table.generator_method,
        target.display()
    );
    Ok(())
}

fn cmd_drift(reports: &[PathBuf], eps0: f64, out: &OutDir) -> Result<(), Failure> {
    if !(eps0.is_finite() && eps0 >= 0.0) {
        return Err(Failure { code: 2, error: anyhow!("eps0 must be non-negative") });
    }
    let mut parsed = Vec::new();
    for p in reports {
        let bytes = fs::read(p).with_context(|| format!("reading {}", p.display())).map_err(io_failure)?;
        let r = EvaluationReport::from_json(&bytes)
            .with_context(|| format!("parsing {}", p.display()))
            .map_err(|error| Failure { code: 4, error })?;
        parsed.push(r);
    }
    let art = aggregate_drift(&parsed, eps0);
    let dir = out.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("drift.csv"), &art.csv)).and_then(|_| fs::write(dir.join("drift.svg"), &art.svg))
        .with_context(|| format!("writing drift artifacts to {}", dir.display()))
        .map_err(io_failure)?;
    print!("{}", drift_fit_table(&art));
    Ok(())
}

fn cmd_synth(spec_path: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let bytes = fs::read(spec_path).with_context(|| format!("reading {}", spec_path.display())).map_err(io_failure)?;
    let mut spec = ScenarioSpec::from_json(&bytes)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let scenario = generate(&spec)?;
    write_scenario(&spec, &scenario, out)?;
    for e in &scenario.expected {
        println!(
            "{}: expected abs {:.6} m, SE3 {}, {} checkpoints",
            e.label,
            e.summary.rmse_absolute,
            e.summary.rmse_aligned.map_or("-".to_string(), |a| format!("{a:.6} m")),
            e.summary.n_points
        );
    }
    println!("scenario written to {} (run.json)", out.display());
    Ok(())
}

enum Space {
    Geodetic,
    Ecef,
    Utm(UtmZone),
}

fn parse_space(s: &str) -> Result<Space, Failure> {
    match s.to_ascii_lowercase().as_str() {
        "geodetic" | "llh" => Ok(Space::Geodetic),
        "ecef" => Ok(Space::Ecef),
        other => other
            .parse::<UtmZone>()
            .map(Space::Utm)
            .map_err(|e| Failure { code: 2, error: anyhow!("unknown coordinate space '{s}': {e}") }),
    }
}

fn convert(from: &Space, to: &Space, v: [f64; 3]) -> Result<[f64; 3], GeodesyError> {
    let ell = Ellipsoid::GRS80;
    let g = match from {
        Space::Geodetic => GeodeticCoord::from_degrees(v[0], v[1], v[2])?,
        Space::Ecef => ecef_to_geodetic(&EcefCoord::new(v[0], v[1], v[2]), &ell)?,
        Space::Utm(z) => utm_to_geodetic(&UtmCoord::new(v[0], v[1], v[2], *z), &ell)?,
    };
    Ok(match to {
        Space::Geodetic => [g.lat_deg(), g.lon_deg(), g.h()],
        Space::Ecef => geodetic_to_ecef(&g, &ell).to_array(),
        Space::Utm(z) => geodetic_to_utm(&g, *z, &ell)?.to_array(),
    })
}

fn cmd_convert(from: &str, to: &str, values: &[f64]) -> Result<(), Failure> {
    let (f, t) = (parse_space(from)?, parse_space(to)?);
    let v = [values[0], values[1], values[2]];
    let r = convert(&f, &t, v).map_err(|e| Failure { code: 5, error: e.into() })?;
    match t {
        Space::Geodetic => println!("{:.10} {:.10} {:.4}", r[0], r[1], r[2]),
        _ => println!("{:.4} {:.4} {:.4}", r[0], r[1], r[2]),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match &cli.command {
        Command::Evaluate { config, visit_table, out } => cmd_evaluate(config, visit_table.as_deref(), out),
        Command::Match { config, output, out } => cmd_match(config, output.as_deref(), out),
        Command::Drift { reports, eps0, out } => cmd_drift(reports, *eps0, out),
        Command::Synth { spec, seed, out } => cmd_synth(spec, *seed, out),
        Command::Convert { from, to, values } => cmd_convert(from, to, values),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
