use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowmap::config::RunConfig;
use flowmap::pipeline::{self, ModelSnapshot};
use flowmap::service::Service;
use flowmap::{formats, Error, Result};
use flowmap_core::{Mode, NodeId};

#[derive(Parser)]
#[command(
    name = "flowmap",
    version,
    about = "Sparse graph-bound maps of human motion dynamics"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes, observation streams, node layouts and topology events.
    Simulate {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scenes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        event_density: Option<f64>,
        /// Scene template (TOML).
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        spacing: Option<f64>,
    },
    /// Replay streams into graph and grid models and write snapshots.
    Build {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to these scene ids.
        #[arg(long = "scene")]
        scenes: Vec<String>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Compare graph and grid models and write the aggregate report.
    Evaluate {
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Prediction time, seconds.
        #[arg(long)]
        t_eval: Option<f64>,
    },
    /// Plan a path between two nodes of a built model.
    Plan {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        start: u64,
        #[arg(long)]
        goal: u64,
        #[arg(long, value_enum, default_value_t = SourceArg::Historical)]
        mode: SourceArg,
        /// Prediction time, seconds.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        w_entropy: Option<f64>,
        #[arg(long)]
        w_flow: Option<f64>,
        #[arg(long)]
        w_direction: Option<f64>,
    },
    /// Answer line-delimited JSON queries against a snapshot.
    Serve {
        #[arg(long)]
        model: PathBuf,
        /// Address to listen on, e.g. 127.0.0.1:7878.
        #[arg(long, conflicts_with = "stdio", required_unless_present = "stdio")]
        listen: Option<String>,
        /// Read requests from stdin and answer on stdout.
        #[arg(long)]
        stdio: bool,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    bind_radius: Option<f64>,
    /// Candidate periods, seconds.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<f64>>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    update_interval: Option<f64>,
    #[arg(long)]
    grid_resolution: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Historical,
    Predicted,
}

impl From<SourceArg> for Mode {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Historical => Mode::Historical,
            SourceArg::Predicted => Mode::Predicted,
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let check = |cfg: &RunConfig| cfg.validate().map_err(|e| Error::Usage(e.to_string()));
    match cli.command {
        Command::Simulate {
            out,
            scenes,
            seed,
            event_density,
            template,
            spacing,
        } => {
            set(&mut cfg.paths.data, out);
            set(&mut cfg.dataset.scenes, scenes);
            set(&mut cfg.seed, seed);
            set(&mut cfg.dataset.event_density, event_density);
            set(&mut cfg.placement.spacing, spacing);
            if template.is_some() {
                cfg.dataset.template = template;
            }
            check(&cfg)?;
            let manifest = pipeline::run_simulate(&cfg, &cfg.paths.data)?;
            println!("wrote {} scenes to {}", manifest.scenes.len(), cfg.paths.data.display());
        }
        Command::Build {
            data,
            out,
            scenes,
            model,
        } => {
            set(&mut cfg.paths.data, data);
            set(&mut cfg.paths.models, out);
            let m = &mut cfg.model;
            set(&mut m.delta, model.delta);
            set(&mut m.bins, model.bins);
            set(&mut m.d_max, model.d_max);
            set(&mut m.tau, model.tau);
            set(&mut m.order, model.order);
            set(&mut m.update_interval, model.update_interval);
            if model.bind_radius.is_some() {
                m.bind_radius = model.bind_radius;
            }
            if model.candidates.is_some() {
                m.candidates = model.candidates;
            }
            set(&mut cfg.grid.resolution, model.grid_resolution);
            check(&cfg)?;
            let written = pipeline::run_build(&cfg, &cfg.paths.data, &cfg.paths.models, &scenes)?;
            println!("wrote {} snapshots to {}", written.len(), cfg.paths.models.display());
        }
        Command::Evaluate { models, out, t_eval } => {
            set(&mut cfg.paths.models, models);
            set(&mut cfg.paths.reports, out);
            if t_eval.is_some() {
                cfg.evaluation.t_eval = t_eval;
            }
            check(&cfg)?;
            print!(
                "{}",
                pipeline::run_evaluate(&cfg, &cfg.paths.models, &cfg.paths.reports)?
            );
        }
        Command::Plan {
            model,
            start,
            goal,
            mode,
            t,
            out,
            w_entropy,
            w_flow,
            w_direction,
        } => {
            set(&mut cfg.paths.reports, out);
            set(&mut cfg.planner.entropy, w_entropy);
            set(&mut cfg.planner.flow, w_flow);
            set(&mut cfg.planner.direction, w_direction);
            check(&cfg)?;
            let record = pipeline::run_plan(
                &cfg,
                &model,
                NodeId(start),
                NodeId(goal),
                mode.into(),
                t,
                &cfg.paths.reports,
            )?;
            let path: Vec<String> = record.path.iter().map(ToString::to_string).collect();
            println!("path {} cost {:.4}", path.join(" -> "), record.total);
        }
        Command::Serve { model, listen, stdio } => {
            let snapshot: ModelSnapshot = formats::read_json(&model)?;
            let service = Service::new(Arc::new(snapshot));
            if stdio {
                let stdin = std::io::stdin();
                service
                    .serve_lines(stdin.lock(), std::io::stdout().lock())
                    .map_err(|e| Error::io("<stdio>", e))?;
            } else {
                let addr = listen.unwrap_or_default();
                let listener = TcpListener::bind(&addr).map_err(|e| Error::io(&addr, e))?;
                eprintln!(
                    "listening on {}",
                    listener.local_addr().map_err(|e| Error::io(&addr, e))?
                );
                service.serve_tcp(listener).map_err(|e| Error::io(&addr, e))?;
            }
        }
    }
    Ok(())
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
