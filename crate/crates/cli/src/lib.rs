//! Batch front end: loads system files, runs checks and constructions, and
//! writes JSON reports and CSV grids.

pub mod commands;
pub mod report;
pub mod spec;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use eds_core::decomposable::Status;
use eds_core::Error as CoreError;

pub use commands::{run as run_command, Command, Options, RunError};
pub use report::Report;
pub use spec::{load_system_spec, parse_spec, Overrides, SpecError, SystemSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INDETERMINATE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "eds", version, about = "Decomposable exterior differential systems")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// System definition file
    spec: PathBuf,
    /// Zero-test tolerance (and ODE tolerance for lift)
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Report file; for lift and reciprocal the CSV grid, with the report
    /// written next to it as <out>.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Decomposability and Darboux integrability
    Check(Common),
    /// Invariant counts and verification of the supplied invariants
    Invariants(Common),
    /// Lifted frames, derived tangential algebras and supplied symmetries
    Symmetries(Common),
    /// Reciprocal pair check and grid reconstruction of frame_B
    Reciprocal {
        #[command(flatten)]
        common: Common,
        /// Nodes per axis, e.g. 21 or 21x21
        #[arg(long, value_parser = parse_dims)]
        grid: Option<Dims>,
    },
    /// Prolongation to the space of integral elements
    Prolong(Common),
    /// Integral surface over two base curves
    Lift {
        #[command(flatten)]
        common: Common,
        /// Curve in the first base factor, components in the parameter u
        #[arg(long, allow_hyphen_values = true)]
        gamma1: Option<String>,
        /// Curve in the second base factor, components in the parameter v
        #[arg(long, allow_hyphen_values = true)]
        gamma2: Option<String>,
        /// NxM
        #[arg(long, value_parser = parse_dims)]
        grid: Option<Dims>,
        /// lo,hi
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        urange: Option<(f64, f64)>,
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        vrange: Option<(f64, f64)>,
        /// Initial point, comma separated, in chart order
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        m0: Option<Point>,
    },
}

#[derive(Clone, Debug)]
struct Dims(Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims, String> {
    s.split('x')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad node count '{p}'")))
        .collect::<Result<_, _>>()
        .map(Dims)
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number '{p}'")))
        .collect()
}

#[derive(Clone, Debug)]
struct Point(Vec<f64>);

fn parse_point(s: &str) -> Result<Point, String> {
    parse_list(s).map(Point)
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] if a < b => Ok((*a, *b)),
        _ => Err("expected lo,hi with lo < hi".into()),
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Ok => EXIT_OK,
        Status::Fail => EXIT_FAIL,
        Status::Indeterminate => EXIT_INDETERMINATE,
    }
}

/// Runs the command line; returns the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let help = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            if help {
                let _ = write!(stdout, "{e}");
            } else {
                let _ = write!(stderr, "{e}");
            }
            return if help { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let (cmd, common, opts) = match cli.command {
        Sub::Check(c) => (Command::Check, c, Options::default()),
        Sub::Invariants(c) => (Command::Invariants, c, Options::default()),
        Sub::Symmetries(c) => (Command::Symmetries, c, Options::default()),
        Sub::Prolong(c) => (Command::Prolong, c, Options::default()),
        Sub::Reciprocal { common, grid } => {
            let o = Options {
                out: common.out.clone(),
                grid: grid.map(|d| d.0),
                ..Options::default()
            };
            (Command::Reciprocal, common, o)
        }
        Sub::Lift {
            common,
            gamma1,
            gamma2,
            grid,
            urange,
            vrange,
            m0,
        } => {
            let o = Options {
                out: common.out.clone(),
                gamma1,
                gamma2,
                grid: grid.map(|d| d.0),
                urange,
                vrange,
                m0: m0.map(|p| p.0),
            };
            (Command::Lift, common, o)
        }
    };
    let overrides = Overrides {
        seed: common.seed,
        samples: common.samples,
        tol: common.tol,
    };
    let spec = match load_system_spec(&common.spec, &overrides) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", common.spec.display());
            return EXIT_USAGE;
        }
    };
    let (report, artifact) = match run_command(cmd, &spec, &opts) {
        Ok(r) => r,
        Err(RunError::Usage(m)) => {
            let _ = writeln!(stderr, "{}: {m}", common.spec.display());
            return EXIT_USAGE;
        }
        Err(RunError::Core(e)) => {
            let _ = writeln!(stderr, "{}: {e}", common.spec.display());
            return match e {
                CoreError::Indeterminate(_) => EXIT_INDETERMINATE,
                _ => EXIT_FAIL,
            };
        }
    };
    let json = serde_json::to_string_pretty(&report.to_json()).expect("serializable") + "\n";
    let rendered = if common.json { json.clone() } else { report.to_text() };
    let written = match (&artifact, &common.out) {
        (Some(a), Some(path)) => {
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".json");
            std::fs::write(path, &a.csv).and_then(|_| std::fs::write(PathBuf::from(sidecar), &json))
        }
        (None, Some(path)) => std::fs::write(path, &rendered),
        _ => Ok(()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "cannot write output: {e}");
        return EXIT_USAGE;
    }
    if artifact.is_some() || common.out.is_none() {
        let _ = stdout.write_all(rendered.as_bytes());
    }
    exit_code(report.status())
}
