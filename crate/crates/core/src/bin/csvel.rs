use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csvel::ingest::{generate_synthetic, write_pgm, MaskSpec, SyntheticSceneSpec};
use csvel::output::format_sig;
use csvel::pipeline::{run_pipeline, write_outputs, MuSetting, PipelineConfig};
use csvel::propagation::Mu;
use csvel::tfa::WindowSpec;
use csvel::track::Method;

const CONFIG_ERROR: u8 = 1;
const PIPELINE_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "csvel",
    version,
    about = "Object velocity from incomplete video frame sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the estimation pipeline described by a JSON config.
    Run(RunArgs),
    /// Render a synthetic scene to numbered PGM frames plus ground truth.
    Generate {
        /// Scene description (JSON).
        #[arg(long)]
        scene: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Window length Np (even).
    #[arg(long)]
    np: Option<usize>,
    /// Single μ, replacing any sweep.
    #[arg(long, conflicts_with = "mu_sweep")]
    mu: Option<f64>,
    /// Comma-separated μ values to sweep.
    #[arg(long, value_delimiter = ',')]
    mu_sweep: Option<Vec<f64>>,
    /// S-method half-width L.
    #[arg(long)]
    sm_l: Option<usize>,
    /// Keep this fraction of frames, chosen at random.
    #[arg(long)]
    keep_ratio: Option<f64>,
    /// Seed for the random frame mask.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of initial_sm, cs_spec, cs_sm.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_plot: Option<PathBuf>,
    /// Physical units per pixel/frame.
    #[arg(long)]
    velocity_scale: Option<f64>,
}

fn to_mu(v: f64) -> Result<Mu, String> {
    Mu::new(v).map_err(|e| e.to_string())
}

fn apply_overrides(cfg: &mut PipelineConfig, args: &RunArgs) -> Result<(), String> {
    if let Some(np) = args.np {
        cfg.window = WindowSpec { np, ..cfg.window };
    }
    if let Some(mu) = args.mu {
        cfg.mu = MuSetting::Single(to_mu(mu)?);
    }
    if let Some(sweep) = &args.mu_sweep {
        cfg.mu = MuSetting::Sweep(sweep.iter().map(|&m| to_mu(m)).collect::<Result<_, _>>()?);
    }
    if let Some(l) = args.sm_l {
        cfg.sm.l = l;
    }
    match (args.keep_ratio, args.seed, &mut cfg.mask) {
        (Some(keep_ratio), seed, mask) => {
            let old_seed = match mask {
                MaskSpec::Random { seed, .. } => *seed,
                _ => 0,
            };
            *mask = MaskSpec::Random {
                keep_ratio,
                seed: seed.unwrap_or(old_seed),
            };
        }
        (None, Some(s), MaskSpec::Random { seed, .. }) => *seed = s,
        (None, Some(_), _) => return Err("--seed needs a random mask; add --keep-ratio".into()),
        (None, None, _) => {}
    }
    if let Some(methods) = &args.methods {
        cfg.methods = methods.clone();
    }
    if let Some(p) = &args.out_csv {
        cfg.output_csv = Some(p.clone());
    }
    if let Some(p) = &args.out_plot {
        cfg.output_plot = Some(p.clone());
    }
    if let Some(s) = args.velocity_scale {
        cfg.velocity_scale = s;
    }
    Ok(())
}

fn run(args: RunArgs) -> ExitCode {
    let mut cfg = match PipelineConfig::from_json_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Err(e) = apply_overrides(&mut cfg, &args) {
        eprintln!("error: invalid config: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }

    let out = match run_pipeline(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(PIPELINE_ERROR);
        }
    };
    if let Err(e) = write_outputs(&out, &cfg, io::stdout().lock()) {
        eprintln!("error: {e}");
        return ExitCode::from(PIPELINE_ERROR);
    }

    eprintln!(
        "{} of {} frames available, {} reconstruction failures",
        out.available.len(),
        out.projection.n_total(),
        out.solver_failures
    );
    for (method, mu) in &out.selected {
        match mu {
            Some(mu) => eprintln!("{method}: smoothest track at mu={mu}"),
            None => eprintln!("{method}: no admissible mu"),
        }
    }
    ExitCode::SUCCESS
}

fn generate(scene: &Path, out: &Path) -> Result<(), (u8, String)> {
    let spec = SyntheticSceneSpec::from_json_file(scene).map_err(|e| (CONFIG_ERROR, e.to_string()))?;
    let (seq, truth) = generate_synthetic(&spec).map_err(|e| (CONFIG_ERROR, e.to_string()))?;
    let fail = |e: io::Error| (PIPELINE_ERROR, e.to_string());
    fs::create_dir_all(out).map_err(fail)?;
    for (t, frame) in seq.iter() {
        let mut w = BufWriter::new(File::create(out.join(format!("frame_{t:04}.pgm"))).map_err(fail)?);
        write_pgm(frame, &mut w).and_then(|_| w.flush()).map_err(fail)?;
    }
    let mut w = BufWriter::new(File::create(out.join("ground_truth.csv")).map_err(fail)?);
    writeln!(w, "frame,position_px,velocity_px_per_frame").map_err(fail)?;
    for (t, (x, v)) in truth.position.iter().zip(&truth.velocity).enumerate() {
        writeln!(w, "{t},{x},{}", format_sig(*v, 6)).map_err(fail)?;
    }
    w.flush().map_err(fail)?;
    eprintln!("wrote {} frames to {}", seq.n_total(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(args) => run(args),
        Command::Generate { scene, out } => match generate(&scene, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err((code, msg)) => {
                eprintln!("error: {msg}");
                ExitCode::from(code)
            }
        },
    }
}
