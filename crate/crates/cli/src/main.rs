mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hk_echo::harness::{run_sweep, summarize, write_records, write_summaries};
use hk_echo::io::{write_events, write_population, write_summary, write_trajectory};
use hk_echo::opinion::simulate;
use hk_echo::placement::run_with_placement;
use hk_echo::{InfluenceGraph, Population};

use config::{Config, GraphFormat, LoadError};

#[derive(Debug, Parser)]
#[command(
    name = "hk-echo",
    version,
    about = "Bounded-confidence opinion dynamics experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the initial population as CSV.
    Gen(Common),
    /// Run the dynamics and write the trajectory and a summary.
    Simulate(Common),
    /// Run the dynamics with moderate-agent placement.
    Place(Common),
    /// Run a parameter sweep and write per-run records and per-point means.
    Sweep(Common),
    /// Export the influence graph at a given step.
    Graph(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Override a config value by dotted path, e.g. `dynamics.delta=1e-8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Seed for every stochastic section present in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    quiet: bool,
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Invalid(m) => Failure::Invalid(m),
            LoadError::Io(m) => Failure::Io(m),
        }
    }
}

impl From<hk_echo::Error> for Failure {
    fn from(e: hk_echo::Error) -> Self {
        LoadError::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    let (Command::Gen(common)
    | Command::Simulate(common)
    | Command::Place(common)
    | Command::Sweep(common)
    | Command::Graph(common)) = &cmd;
    let (cfg, base) = config::load(&common.config, common.seed, &common.sets)?;
    let out = Output::new(&common.out, common.quiet)?;
    match cmd {
        Command::Gen(_) => {
            let pop = cfg.build_population(&base)?;
            out.write("population.csv", |w| write_population(&pop, w))?;
        }
        Command::Simulate(_) => {
            let pop = cfg.build_population(&base)?;
            let res = simulate(&pop, &cfg.dynamics)?;
            out.write("trajectory.csv", |w| write_trajectory(&res, w))?;
            out.write("summary.csv", |w| write_summary(&res, &[], w))?;
            out.note(format_args!("t_eqm={:?} c_eqm={}", res.t_eqm, res.c_eqm));
        }
        Command::Place(_) => {
            let pop = cfg.build_population(&base)?;
            let place = cfg.placement.clone().unwrap_or_default();
            let (res, events) = run_with_placement(&pop, &cfg.dynamics, &place)?;
            out.write("trajectory.csv", |w| write_trajectory(&res, w))?;
            out.write("placement_events.csv", |w| write_events(&events, w))?;
            out.write("summary.csv", |w| write_summary(&res, &events, w))?;
            out.note(format_args!("t_eqm={:?} c_eqm={}", res.t_eqm, res.c_eqm));
        }
        Command::Sweep(_) => {
            let spec = cfg
                .sweep
                .as_ref()
                .ok_or_else(|| Failure::Invalid("config has no `sweep` section".into()))?;
            let records = run_sweep(spec)?;
            out.write("sweep_records.csv", |w| write_records(&records, w))?;
            out.write("sweep_summary.csv", |w| {
                write_summaries(&summarize(&records), w)
            })?;
        }
        Command::Graph(_) => graph(&cfg, &base, &out)?,
    }
    Ok(())
}

fn graph(cfg: &Config, base: &Path, out: &Output) -> Result<(), Failure> {
    let pop = cfg.build_population(base)?;
    let step = cfg.graph.step;
    let snapshot = if step == 0 && cfg.placement.is_none() {
        pop
    } else {
        let (res, _) = match &cfg.placement {
            Some(place) => run_with_placement(&pop, &cfg.dynamics, place)?,
            None => (simulate(&pop, &cfg.dynamics)?, Vec::new()),
        };
        let profile = res.trajectory.get(step).ok_or_else(|| {
            Failure::Invalid(format!(
                "graph.step {step} is past the last recorded step {}",
                res.trajectory.len() - 1
            ))
        })?;
        let mut agents = res.population.agents()[..profile.len()].to_vec();
        for (a, &x) in agents.iter_mut().zip(profile) {
            a.opinion = hk_echo::OpinionValue::new(x)?;
        }
        Population::new(agents)?
    };
    let g = InfluenceGraph::build(&snapshot, step);
    for fmt in &cfg.graph.formats {
        match fmt {
            GraphFormat::Dot => {
                out.write("graph.dot", |w| Ok(w.write_all(g.to_dot().as_bytes())?))?
            }
            GraphFormat::Json => {
                out.write("graph.json", |w| Ok(w.write_all(g.to_json().as_bytes())?))?
            }
        }
    }
    Ok(())
}

struct Output {
    dir: PathBuf,
    quiet: bool,
}

impl Output {
    fn new(dir: &Path, quiet: bool) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            quiet,
        })
    }

    fn write<F>(&self, name: &str, body: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> hk_echo::Result<()>,
    {
        let path = self.dir.join(name);
        let io_err = |e: std::io::Error| Failure::Io(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w)?;
        w.flush().map_err(io_err)?;
        self.note(format_args!("wrote {}", path.display()));
        Ok(())
    }

    fn note(&self, msg: std::fmt::Arguments<'_>) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}
