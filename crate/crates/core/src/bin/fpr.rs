use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fpr_core::cep::CepModel;
use fpr_core::fpr_builder::CapacityMetric;
use fpr_core::pipeline::{self, GridEntry, PipelineConfig, RunOptions};
use fpr_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "fpr",
    version,
    about = "Feasible planning regions of distribution grids"
)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory, overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip unplannable scenarios instead of failing.
    #[arg(long, global = true)]
    skip_failed: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw supply-task scenarios and reinforce each one.
    Variate {
        #[arg(long)]
        grid: Option<String>,
    },
    /// Operating regions of the stored expansion stages.
    For {
        #[arg(long)]
        grid: Option<String>,
    },
    /// Assemble planning regions and fit their linear models.
    Fpr {
        #[arg(long)]
        grid: Option<String>,
    },
    /// Re-fit linear models of stored planning regions.
    Linearize {
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, value_enum)]
        metric: Option<Metric>,
        #[arg(long)]
        opex: Option<f64>,
    },
    /// Solve the A/B capacity expansion study.
    Cep {
        /// Study model used as is, without a config.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write both LPs in LP text format.
        #[arg(long)]
        export_lp: bool,
    },
    /// Everything, bottom-up, followed by the study.
    Pipeline {
        #[arg(long)]
        export_lp: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Metric {
    MaxAbsP,
    MaxApparent,
}

impl From<Metric> for CapacityMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::MaxAbsP => CapacityMetric::MaxAbsP,
            Metric::MaxApparent => CapacityMetric::MaxApparent,
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Invalid("--config is required for this subcommand".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = std::env::current_dir()
            .map_err(|e| Error::Io {
                path: ".".into(),
                source: e,
            })?
            .join(out);
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    Ok(cfg)
}

fn selected<'a>(cfg: &'a PipelineConfig, grid: &Option<String>) -> Result<Vec<&'a GridEntry>> {
    match grid {
        Some(id) => Ok(vec![cfg.grid(id)?]),
        None => cfg.grid_order(),
    }
}

fn init_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Invalid("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Cep {
        model: Some(model),
        export_lp,
    } = &cli.command
    {
        init_pool(cli.jobs)?;
        let model = CepModel::load(model)?;
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("study"));
        pipeline::run_study(&model, &out, *export_lp)?;
        return Ok(());
    }

    let mut cfg = load_config(cli)?;
    init_pool(cfg.jobs)?;
    match &cli.command {
        Command::Variate { grid } => {
            for g in selected(&cfg, grid)? {
                let stages = pipeline::variate(&cfg, g, cli.skip_failed)?;
                log::info!("grid {}: {} stages written", g.id, stages.len());
            }
        }
        Command::For { grid } => {
            for g in selected(&cfg, grid)? {
                pipeline::compute_fors(&cfg, g, cli.skip_failed)?;
            }
        }
        Command::Fpr { grid } => {
            for g in selected(&cfg, grid)? {
                pipeline::build_fpr(&cfg, g)?;
            }
        }
        Command::Linearize { grid, metric, opex } => {
            if let Some(m) = metric {
                cfg.metric = (*m).into();
            }
            if let Some(o) = opex {
                cfg.opex_per_mwh = *o;
            }
            for g in selected(&cfg, grid)? {
                pipeline::relinearize(&cfg, g)?;
            }
        }
        Command::Cep { export_lp, .. } => {
            pipeline::run_study(
                &pipeline::study_model(&cfg)?,
                &cfg.layout().study_dir(),
                *export_lp,
            )?;
        }
        Command::Pipeline { export_lp } => {
            pipeline::run_pipeline(
                &cfg,
                RunOptions {
                    skip_failed: cli.skip_failed,
                    export_lp: *export_lp,
                },
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            match e {
                Error::Io { .. } | Error::Schema { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
