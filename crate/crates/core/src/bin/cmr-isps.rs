use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use cmr_isps::cg::Method;
use cmr_isps::experiment::{run_sweep, validate_analysis, SweepAxis, SweepSpec};
use cmr_isps::export;
use cmr_isps::geometry::make_grid;
use cmr_isps::metrics::beampattern;
use cmr_isps::par::Execution;
use cmr_isps::pipeline::{method_weights, run_pipeline, PipelineConfig};
use cmr_isps::scene::{simulate, Scenario};
use cmr_isps::spectrum::capon_spectrum;
use cmr_isps::Error;

#[derive(Debug, Parser)]
#[command(name = "cmr-isps", version, about = "Reduced-sector covariance reconstruction beamformer experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with optional `scenario`, `pipeline` and `sweep` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scenario seed; the master seed for sweeps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long, global = true)]
    snapshots: Option<usize>,
    #[arg(long, global = true)]
    sensors: Option<usize>,
    /// Presumed look direction in degrees.
    #[arg(long, global = true, allow_hyphen_values = true)]
    presumed_doa: Option<f64>,
    /// Angular grid size.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the simulated snapshot block.
    Simulate,
    /// Write Capon and maximum-entropy spectra on the grid.
    Spectrum,
    /// Write per-snapshot interferer DoA tracks.
    Track,
    /// Write the beampattern of one method and the reconstruction eigenvalues.
    Beampattern {
        #[arg(long, default_value = "cmr-isps")]
        method: Method,
    },
    /// Monte Carlo SINR sweep.
    Sweep {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
    },
    /// Run the analytical checks and write a report.
    Validate,
    /// Write the conjugate-gradient cost and gradient history.
    Convergence,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Snr,
    Snapshots,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    scenario: Scenario,
    pipeline: PipelineConfig,
    sweep: SweepSection,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepSection {
    axis: SweepAxis,
    trials: usize,
    methods: Vec<Method>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepSpec::default();
        Self {
            axis: s.axis,
            trials: s.trials,
            methods: s.methods,
        }
    }
}

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

struct Context {
    scenario: Scenario,
    pipeline: PipelineConfig,
    sweep: SweepSection,
    execution: Execution,
    out_dir: PathBuf,
}

impl Context {
    fn load(c: &Common) -> Result<Self, Failure> {
        let mut file = match &c.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        let scn = &mut file.scenario;
        if let Some(s) = c.seed {
            scn.seed = s;
        }
        if let Some(v) = c.snr_db {
            scn.soi.power_db = v;
        }
        if let Some(k) = c.snapshots {
            scn.snapshots = k;
        }
        if let Some(m) = c.sensors {
            scn.m = m;
        }
        if let Some(d) = c.presumed_doa {
            file.pipeline.presumed_doa_deg = Some(d);
        }
        if let Some(q) = c.grid {
            file.pipeline.q = q;
        }
        let execution = if c.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        };
        file.pipeline.execution = execution;
        scn.validate()?;
        file.pipeline.validate()?;
        fs::create_dir_all(&c.out_dir).map_err(|e| Failure::Usage(format!("{}: {e}", c.out_dir.display())))?;
        Ok(Self {
            scenario: file.scenario,
            pipeline: file.pipeline,
            sweep: file.sweep,
            execution,
            out_dir: c.out_dir.clone(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn written(path: &Path) {
    eprintln!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = Context::load(&cli.common)?;
    match cli.command {
        Command::Simulate => {
            let snap = simulate(&ctx.scenario)?;
            let p = ctx.path("snapshots.csv");
            export::write_snapshots(export::create(&p)?, &snap)?;
            written(&p);
        }
        Command::Spectrum => {
            let snap = simulate(&ctx.scenario)?;
            let out = run_pipeline(&snap, &ctx.pipeline)?;
            let grid = make_grid(ctx.pipeline.q)?;
            let capon = capon_spectrum(&out.trace.covariance, &grid, &ctx.scenario.nominal_array())?;
            let p = ctx.path("spectrum.csv");
            export::write_spectrum(export::create(&p)?, &capon, &out.trace.spectrum)?;
            written(&p);
        }
        Command::Track => {
            let snap = simulate(&ctx.scenario)?;
            let out = run_pipeline(&snap, &ctx.pipeline)?;
            for w in &out.trace.sectors.warnings {
                eprintln!("warning: {w}");
            }
            let p = ctx.path("tracks.csv");
            export::write_tracks(export::create(&p)?, &out.trace.tracks)?;
            written(&p);
        }
        Command::Beampattern { method } => {
            let snap = simulate(&ctx.scenario)?;
            let out = run_pipeline(&snap, &ctx.pipeline)?;
            let w = method_weights(method, &snap, &ctx.pipeline, Some(&out))?;
            let grid = make_grid(ctx.pipeline.q)?;
            let bp = beampattern(&w.w, &grid, &snap.truth.array);
            let p = ctx.path("beampattern.csv");
            export::write_beampattern(export::create(&p)?, &bp)?;
            written(&p);
            let p = ctx.path("inc_eigenvalues.csv");
            export::write_eigenvalues(export::create(&p)?, &out.trace.inc.eigenvalues())?;
            written(&p);
        }
        Command::Sweep {
            trials,
            axis,
            values,
            methods,
        } => {
            let mut axis_spec = match axis {
                Some(AxisArg::Snr) => SweepAxis::default(),
                Some(AxisArg::Snapshots) => SweepAxis::snapshots((1..=10).map(|i| 20 * i).collect()),
                None => ctx.sweep.axis.clone(),
            };
            if let Some(v) = values {
                axis_spec.values = v;
            }
            let spec = SweepSpec {
                scenario: ctx.scenario.clone(),
                pipeline: ctx.pipeline.clone(),
                axis: axis_spec,
                trials: trials.unwrap_or(ctx.sweep.trials),
                methods: methods.unwrap_or_else(|| ctx.sweep.methods.clone()),
                seed: ctx.scenario.seed,
                execution: ctx.execution,
            };
            let res = run_sweep(&spec)?;
            for f in &res.failures {
                eprintln!("trial failed: {f}");
            }
            let p = ctx.path("sweep.csv");
            export::write_sweep(export::create(&p)?, &res.records)?;
            written(&p);
            let p = ctx.path("summary.csv");
            export::write_summary(export::create(&p)?, &res.summary)?;
            written(&p);
        }
        Command::Validate => {
            let rep = validate_analysis()?;
            let text = rep.to_text();
            let p = ctx.path("validate.txt");
            fs::write(&p, &text).map_err(Error::from)?;
            print!("{text}");
            written(&p);
            if !rep.passed() {
                return Err(Failure::Validation("analytical checks failed".into()));
            }
        }
        Command::Convergence => {
            let snap = simulate(&ctx.scenario)?;
            let out = run_pipeline(&snap, &ctx.pipeline)?;
            let p = ctx.path("convergence.csv");
            export::write_convergence(export::create(&p)?, &out.trace.cg)?;
            written(&p);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
