use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spinsplit::commands;
use spinsplit::output::dump_snapshots;
use spinsplit::scenario_file::OutputFormat;
use spinsplit::{parse_scenario, Overrides};
use spinsplit_core::fields::AmplitudeConvention;
use spinsplit_core::solver::Backend;

#[derive(Parser)]
#[command(name = "spinsplit", version, about = "Spin-polarizing Kapitza-Dirac beam splitter simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the scenario and write snapshots, the time series and a summary.
    Simulate(RunArgs),
    /// Bragg-subspace predictions for the scenario's pulse areas.
    Analytic(RunArgs),
    /// Laser and beam design report from the scenario's stages.
    Design(RunArgs),
    /// Run several backends side by side against the analytic prediction.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Backends to compare (default: effective, mode-lattice, full-field).
        #[arg(long = "backends", value_delimiter = ',')]
        backends: Vec<BackendArg>,
    },
    /// Convert a binary snapshot container to text.
    Dump {
        /// Binary snapshot file.
        input: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    backend: Option<BackendArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Snapshot interval in fs.
    #[arg(long = "snapshot-every")]
    snapshot_every: Option<f64>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    /// Timestep in attoseconds.
    #[arg(long)]
    dt: Option<f64>,
    /// How monochromatic amplitudes are read.
    #[arg(long)]
    convention: Option<ConventionArg>,
    #[arg(long)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    FullField,
    Effective,
    ModeLattice,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::FullField => Backend::FullField,
            BackendArg::Effective => Backend::Effective,
            BackendArg::ModeLattice => Backend::ModeLattice,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Standing,
    Traveling,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Binary,
}

impl RunArgs {
    fn load(&self) -> Result<spinsplit::ScenarioSpec> {
        let mut spec = parse_scenario(&self.scenario)?;
        let overrides = Overrides {
            backend: self.backend.map(Backend::from),
            out: self.out.clone(),
            snapshot_every_fs: self.snapshot_every,
            grid_points: self.grid_points,
            dt_as: self.dt,
            convention: self.convention.map(|c| match c {
                ConventionArg::Standing => AmplitudeConvention::Standing,
                ConventionArg::Traveling => AmplitudeConvention::Traveling,
            }),
            format: self.format.map(|f| match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Binary => OutputFormat::Binary,
            }),
        };
        spec.apply(&overrides);
        spec.scenario().validate().context("scenario invalid after command-line overrides")?;
        Ok(spec)
    }
}

fn print_file(path: &std::path::Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let spec = args.load()?;
            let out = commands::simulate(&spec)?;
            for w in &out.result.warnings {
                eprintln!("warning: {w}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Analytic(args) => {
            let spec = args.load()?;
            let report = commands::analytic(&spec)?;
            let h = commands::header(&spec, "analytic");
            let path = commands::write_in_out_dir(&spec, "analytic.txt", |w| commands::write_analytic(w, &h, &report))?;
            print_file(&path)?;
        }
        Command::Design(args) => {
            let spec = args.load()?;
            let report = commands::design(&spec)?;
            let h = commands::header(&spec, "design");
            let path =
                commands::write_in_out_dir(&spec, "design.txt", |w| commands::write_design(w, &h, &spec, &report))?;
            print_file(&path)?;
        }
        Command::Compare { run, backends } => {
            let spec = run.load()?;
            let backends: Vec<Backend> = if backends.is_empty() {
                vec![Backend::Effective, Backend::ModeLattice, Backend::FullField]
            } else {
                backends.into_iter().map(Backend::from).collect()
            };
            let report = commands::compare(&spec, &backends)?;
            let h = commands::header(&spec, "compare");
            let path = commands::write_in_out_dir(&spec, "compare.txt", |w| commands::write_compare(w, &h, &report))?;
            print_file(&path)?;
        }
        Command::Dump { input, out } => {
            let r = BufReader::new(File::open(&input).with_context(|| format!("cannot open {}", input.display()))?);
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(&path)?);
                    dump_snapshots(r, &mut w)?;
                    w.flush()?;
                }
                None => {
                    let stdout = io::stdout();
                    let mut w = BufWriter::new(stdout.lock());
                    dump_snapshots(r, &mut w)?;
                    w.flush()?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
