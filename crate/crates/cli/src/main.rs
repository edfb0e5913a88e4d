//! Command-line front end: argument parsing, bit-exact file I/O, manifest
//! echoing, and exit-code mapping for the bbs-ghd library.
//!
//! Every JSON or CSV artifact embeds the run manifest and tool version, and
//! reruns with identical arguments produce identical bytes.  Configuration
//! text stays headerless so decompose → reconstruct round-trips files
//! byte-for-byte.  Exit codes: 0 ok, 2 schema error, 3 domain error,
//! 4 internal invariant violation.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use bbs_ghd::bbs::BallConfig;
use bbs_ghd::codec::{reconstruct, shift_slots, slot_decompose, SlotDecomposition};
use bbs_ghd::empirics::{convergence_sweep, evolve_via, EvolutionPath, SweepParams};
use bbs_ghd::hydro::{differentiate_frame, particle_density, pde_residual, SmoothDensity};
use bbs_ghd::plf::PiecewiseLinear;
use bbs_ghd::scattering::{flow, Frame};
use bbs_ghd::speeds::{effective_speeds, DensityVector};
use bbs_ghd::{Error, ErrorCategory, Result};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "bbs-ghd", version, about = "Box-ball dynamics, slot coordinates, and hydrodynamic flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Advance a configuration by k time steps.
    Evolve {
        /// Text file: one line of 0/1 characters, site 1 first.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        steps: usize,
        /// How to advance: the carrier, the slot shift, or both compared.
        #[arg(long, value_enum, default_value_t = Method::Carrier)]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slot coordinates of a configuration, as JSON.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the configuration text from slot JSON.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Advance slot contents by k linear shifts.
    SlotsShift {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flow piecewise-linear profiles for time t and sample them as CSV.
    Flow {
        /// JSON file with a "direct" frame tag and one profile per species.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        time: f64,
        /// Sampling step of the output grid.
        #[arg(long, default_value_t = 0.01)]
        grid: f64,
        /// Right edge of the output grid (default: past every breakpoint).
        #[arg(long = "u-max")]
        u_max: Option<f64>,
        /// Emit densities and the particle density instead of profiles.
        #[arg(long)]
        density: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective speeds with residual and determinant certificates, as JSON.
    Speeds {
        /// Densities rho_1,...,rho_I (comma-separated).
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        rho: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transport-equation residuals of the exact flow for smooth bump data.
    PdeCheck {
        /// JSON file of per-species bump lists {a, b, c}.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        time: f64,
        /// Spatial difference step.
        #[arg(long)]
        h: f64,
        /// Temporal difference step (default: h).
        #[arg(long)]
        delta: Option<f64>,
        /// Right edge of the sampled interval (default: covers the support).
        #[arg(long = "u-max")]
        u_max: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Desk-scale hydrodynamic experiments.
    Experiment {
        #[command(subcommand)]
        what: Experiment,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// Sample slots at several scales, evolve, and measure sup errors
    /// against the exact flow of the rate integrals.
    Convergence {
        /// JSON file of per-size step rates.
        #[arg(long)]
        rates: PathBuf,
        /// Scales, comma-separated.
        #[arg(long = "N", value_delimiter = ',', num_args = 1.., required = true)]
        scales: Vec<u64>,
        /// Times, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        time: Vec<f64>,
        /// Right edge of the comparison window.
        #[arg(long, default_value_t = 2.0)]
        u0: f64,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Carrier,
    SlotShift,
    Both,
}

impl From<Method> for EvolutionPath {
    fn from(m: Method) -> Self {
        match m {
            Method::Carrier => EvolutionPath::Carrier,
            Method::SlotShift => EvolutionPath::SlotShift,
            Method::Both => EvolutionPath::BothAsserted,
        }
    }
}

/// Everything a rerun needs to reproduce an artifact; echoed into each
/// JSON and CSV output.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    inputs: Vec<String>,
    params: BTreeMap<String, String>,
    output: Option<String>,
    format: String,
}

impl RunManifest {
    fn new(command: &str, format: &str) -> Self {
        Self {
            command: command.into(),
            inputs: Vec::new(),
            params: BTreeMap::new(),
            output: None,
            format: format.into(),
        }
    }

    fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    fn output(mut self, out: &Option<PathBuf>) -> Self {
        self.output = out.as_ref().map(|p| p.display().to_string());
        self
    }
}

/// Flowable profile file: the frame tag keeps spatial and effective-scale
/// serializations from being confused.
#[derive(Serialize, Deserialize)]
struct ProfileFile {
    frame: String,
    profiles: Vec<PiecewiseLinear>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn write_out(out: &Option<PathBuf>, body: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| Error::Internal(format!("stdout: {e}")))
        }
    }
}

/// JSON artifact: manifest and version first, then the payload keys.
fn emit_json(manifest: &RunManifest, payload: Value, out: &Option<PathBuf>) -> Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("manifest".into(), serde_json::to_value(manifest).expect("manifest serializes"));
    doc.insert("version".into(), Value::String(VERSION.into()));
    if let Value::Object(fields) = payload {
        doc.extend(fields);
    }
    let mut body = serde_json::to_string_pretty(&Value::Object(doc)).expect("artifact serializes");
    body.push('\n');
    write_out(out, &body)
}

/// CSV artifact: `#`-prefixed manifest and version lines, then the rows.
fn emit_csv(manifest: &RunManifest, header: &str, rows: &[String], out: &Option<PathBuf>) -> Result<()> {
    let mut body = format!(
        "# manifest: {}\n# version: {VERSION}\n{header}\n",
        serde_json::to_string(manifest).expect("manifest serializes")
    );
    for row in rows {
        body.push_str(row);
        body.push('\n');
    }
    write_out(out, &body)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_config(path: &Path) -> Result<BallConfig> {
    BallConfig::from_text(read_text(path)?.trim_end_matches(['\r', '\n']))
}

/// Accepts slot JSON either bare or wrapped in a manifest-bearing artifact.
fn read_slots(path: &Path) -> Result<SlotDecomposition> {
    let value: Value = parse_json(path)?;
    let slots = value.get("slots").cloned().unwrap_or(value);
    serde_json::from_value(slots)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evolve { input, steps, method, out } => {
            let config = read_config(&input)?;
            let evolved = evolve_via(&config, steps, method.into())?;
            write_out(&out, &format!("{}\n", evolved.to_text()))
        }
        Command::Decompose { input, out } => {
            let manifest = RunManifest::new("decompose", "json").input(&input).output(&out);
            let zeta = slot_decompose(&read_config(&input)?)?;
            emit_json(&manifest, json!({ "slots": zeta }), &out)
        }
        Command::Reconstruct { input, out } => {
            let config = reconstruct(&read_slots(&input)?);
            write_out(&out, &format!("{}\n", config.to_text()))
        }
        Command::SlotsShift { input, steps, out } => {
            let manifest = RunManifest::new("slots-shift", "json")
                .input(&input)
                .param("steps", steps)
                .output(&out);
            let shifted = shift_slots(&read_slots(&input)?, steps);
            emit_json(&manifest, json!({ "slots": shifted }), &out)
        }
        Command::Flow { profile, time, grid, u_max, density, out } => {
            let mut manifest = RunManifest::new("flow", "csv")
                .input(&profile)
                .param("time", time)
                .param("grid", grid)
                .param("density", density)
                .output(&out);
            if let Some(u) = u_max {
                manifest = manifest.param("u_max", u);
            }
            let file: ProfileFile = parse_json(&profile)?;
            if file.frame != "direct" {
                return Err(Error::InvalidInput(format!(
                    "flow needs a \"direct\" frame, got {:?}",
                    file.frame
                )));
            }
            if !(grid > 0.0 && grid.is_finite()) {
                return Err(Error::InvalidInput(format!("grid step must be positive, got {grid}")));
            }
            let frame = Frame::new(file.profiles)?;
            let flowed = flow(&frame, time)?;
            let reach = u_max.unwrap_or_else(|| {
                (1..=flowed.max_size())
                    .map(|i| flowed.psi(i).last_x())
                    .fold(0.0, f64::max)
                    + 1.0
            });
            let n = (reach / grid).ceil() as usize + 1;
            let species = flowed.max_size();
            let (header, rows): (String, Vec<String>) = if density {
                let grid_out = differentiate_frame(&flowed, grid, n.max(2))?;
                let particle = particle_density(&grid_out);
                let names: Vec<String> = (1..=species).map(|i| format!("rho_{i}")).collect();
                let header = format!("u,{},rho_particle", names.join(","));
                let rows = (0..grid_out.len())
                    .map(|k| {
                        let mut cells = vec![num(k as f64 * grid)];
                        cells.extend((1..=species).map(|i| num(grid_out.row(i)[k])));
                        cells.push(num(particle[k]));
                        cells.join(",")
                    })
                    .collect();
                (header, rows)
            } else {
                let names: Vec<String> = (1..=species).map(|i| format!("psi_{i}")).collect();
                let header = format!("u,{}", names.join(","));
                let rows = (0..n)
                    .map(|k| {
                        let u = k as f64 * grid;
                        let mut cells = vec![num(u)];
                        cells.extend((1..=species).map(|i| num(flowed.psi(i).eval(u))));
                        cells.join(",")
                    })
                    .collect();
                (header, rows)
            };
            emit_csv(&manifest, &header, &rows, &out)
        }
        Command::Speeds { rho, out } => {
            let manifest = RunManifest::new("speeds", "json")
                .param("rho", rho.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","))
                .output(&out);
            let report = effective_speeds(&DensityVector::new(rho)?)?;
            emit_json(
                &manifest,
                serde_json::to_value(&report).expect("report serializes"),
                &out,
            )
        }
        Command::PdeCheck { profile, time, h, delta, u_max, out } => {
            let delta = delta.unwrap_or(h);
            let mut manifest = RunManifest::new("pde-check", "json")
                .input(&profile)
                .param("time", time)
                .param("h", h)
                .param("delta", delta)
                .output(&out);
            if let Some(u) = u_max {
                manifest = manifest.param("u_max", u);
            }
            let density: SmoothDensity = parse_json(&profile)?;
            let span = u_max
                .unwrap_or_else(|| density.support_end() + density.max_size() as f64 * time + 1.0);
            let residuals = pde_residual(&density, time, h, delta, span)?;
            emit_json(
                &manifest,
                json!({ "residuals": residuals, "u_max": span }),
                &out,
            )
        }
        Command::Experiment { what } => match what {
            Experiment::Convergence { rates, scales, time, u0, trials, seed, out } => {
                let manifest = RunManifest::new("experiment convergence", "csv")
                    .input(&rates)
                    .param("N", scales.iter().map(u64::to_string).collect::<Vec<_>>().join(","))
                    .param("time", time.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
                    .param("u0", u0)
                    .param("trials", trials)
                    .param("seed", seed)
                    .output(&Some(out.clone()));
                let params = SweepParams {
                    rates: parse_json(&rates)?,
                    scales,
                    times: time,
                    trials,
                    seed,
                    u_max: u0,
                };
                let rows = convergence_sweep(&params)?;
                let lines: Vec<String> = rows
                    .iter()
                    .map(|r| {
                        format!(
                            "{},{},{},{},{},{seed}",
                            r.n,
                            r.size,
                            r.trial,
                            num(r.t),
                            num(r.sup_error)
                        )
                    })
                    .collect();
                emit_csv(&manifest, "N,size_i,trial,t,sup_error,seed", &lines, &Some(out))
            }
        },
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("BBS_GHD_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                return fail(&Error::InvalidInput(format!(
                    "BBS_GHD_THREADS must be a positive integer, got {threads:?}"
                )));
            }
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    let (category, code) = match e.category() {
        ErrorCategory::Schema => ("schema", 2u8),
        ErrorCategory::Domain => ("domain", 3),
        ErrorCategory::Internal => ("internal", 4),
    };
    eprintln!(
        "{}",
        json!({ "error": { "category": category, "exit": code, "message": e.to_string() } })
    );
    ExitCode::from(code)
}
