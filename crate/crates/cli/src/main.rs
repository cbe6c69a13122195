use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coredel::explicit::{ExplicitModel, RangeBox};
use coredel::model_json::{emit_model, load_model};
use coredel::pipeline::{self, run_pipeline, Output, Stage};
use coredel::sim::{simulate, SimState};

/// Compiles equational hybrid models into explicit hybrid ODE models.
#[derive(Parser)]
#[command(name = "coredel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, type check and binding-time analyze a model.
    Check { file: PathBuf },
    /// Compile a model to JSON.
    Compile {
        file: PathBuf,
        /// Output file (default: standard output).
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Variable ranges used to certify pivots, lines of `variable lo hi`.
        #[arg(long, value_name = "FILE")]
        ranges: Option<PathBuf>,
        /// Print an intermediate stage and stop.
        #[arg(long, value_parser = ["bta", "spec", "explicit"])]
        dump: Option<String>,
    },
    /// Simulate a compiled model (.json) or a source model.
    Simulate {
        model: PathBuf,
        /// Initial values, lines of `variable value`.
        #[arg(long, value_name = "FILE")]
        init: PathBuf,
        /// Step size.
        #[arg(long)]
        dt: f64,
        /// End time; the simulation starts at 0.
        #[arg(long)]
        end: f64,
        /// Output file (default: standard output).
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// Variable ranges when compiling a source model.
        #[arg(long, value_name = "FILE")]
        ranges: Option<PathBuf>,
    },
}

/// Exit status for unreadable or malformed input files.
const EXIT_INPUT: u8 = 1;
/// Exit status when a simulation fails.
const EXIT_SIM: u8 = 5;
/// Exit status for bad command lines.
const EXIT_USAGE: u8 = 64;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure { code, message: message.into() }
    }
}

impl From<pipeline::Diagnostic> for Failure {
    fn from(d: pipeline::Diagnostic) -> Failure {
        Failure::new(d.exit_code() as u8, d.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ranges(path: Option<&Path>) -> Result<RangeBox, Failure> {
    match path {
        Some(p) => pipeline::parse_ranges(&read(p)?).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", p.display()))),
        None => Ok(RangeBox::new()),
    }
}

fn compile(file: &Path, ranges: &RangeBox, dump: Option<Stage>) -> Result<Output, Failure> {
    let text = read(file)?;
    Ok(run_pipeline(&file.display().to_string(), &text, ranges, dump)?)
}

fn load(path: &Path, range_file: Option<&Path>) -> Result<ExplicitModel, Failure> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = read(path)?;
        return load_model(&text).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())));
    }
    match compile(path, &ranges(range_file)?, None)? {
        Output::Model(m) => Ok(m),
        Output::Dump(_) => unreachable!("no dump requested"),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check { file } => {
            let text = read(&file)?;
            pipeline::analyze(&file.display().to_string(), &text)?;
            println!("{}: ok", file.display());
        }
        Command::Compile { file, output, ranges: range_file, dump } => {
            let stage = dump.map(|d| d.parse::<Stage>().expect("validated by clap"));
            match compile(&file, &ranges(range_file.as_deref())?, stage)? {
                Output::Dump(text) => print!("{text}"),
                Output::Model(m) => write(output.as_deref(), &emit_model(&m))?,
            }
        }
        Command::Simulate { model, init, dt, end, csv, ranges: range_file } => {
            if !(dt > 0.0 && end >= 0.0) {
                return Err(Failure::new(EXIT_USAGE, "--dt must be positive and --end nonnegative"));
            }
            let m = load(&model, range_file.as_deref())?;
            let values =
                pipeline::parse_init(&read(&init)?).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", init.display())))?;
            let start =
                SimState::from_map(&m, 0.0, &values).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", init.display())))?;
            let tr = simulate(&m, &start, dt, end).map_err(|e| Failure::new(EXIT_SIM, e.to_string()))?;
            write(csv.as_deref(), &tr.to_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
