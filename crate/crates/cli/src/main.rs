use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use usvar::beamform::BeamformMethod;
use usvar::config::{RunConfig, EC_DEMO};
use usvar::io::{read_channel_data, read_image, write_image, Metadata};
use usvar::pipeline::{self, ImageKind, Manifest};
use usvar::{Error, Result};

/// Plane-wave ultrasound beamforming and diffusion variance imaging.
///
/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 external
/// denoiser failure.
#[derive(Parser)]
#[command(name = "usvar", version)]
struct Cli {
    /// Worker threads (0 = all cores). Does not change any output byte.
    #[arg(long, global = true, env = "USVAR_THREADS", default_value_t = 0)]
    threads: usize,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true, env = "USVAR_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate channel data for the configured phantom.
    ///
    /// Writes simulate/channels.ust, simulate/phantom.ust and
    /// simulate/labels.ust (each with a .meta sidecar).
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Beamform channel data into an RF image on the configured grid.
    Beamform {
        #[arg(long)]
        config: PathBuf,
        /// Channel data tensor written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        /// das or ebmv; defaults to the config.
        #[arg(long)]
        method: Option<BeamformMethod>,
        /// Scale the image to max |x| = 1 (also enabled by the config).
        #[arg(long)]
        normalize: bool,
        /// Defaults to <out>/<method>/beamformed.ust.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Draw diffusion samples conditioned on a normalized RF image and write
    /// their variance and median with PGM renders.
    Enhance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to an `enhance` directory next to the input.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Evaluate FWHM, gCNR and SNR on an image tensor.
    Metrics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Phantom labels for label regions.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Defaults to the input path with extension metrics.json.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Exit 0 even when some metric could not be computed.
        #[arg(long)]
        lenient: bool,
    },
    /// Run every stage for DAS and EBMV and write the five comparison panels.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the bundled demo scene.
    EcDemo {
        /// Override the demo seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the bundled config and exit.
        #[arg(long)]
        print_config: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    let out_dir = |cfg: &RunConfig| cli.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = RunConfig::load(config)?;
            let dir = out_dir(&cfg);
            let sim = pipeline::simulate(&cfg)?;
            let written = pipeline::write_simulation(&dir.join("simulate"), &sim)?;
            update_manifest(&cfg, &dir, "simulate", &[], &written)?;
            info!("wrote {} files to {}", written.len(), dir.join("simulate").display());
        }
        Command::Beamform {
            config,
            input,
            method,
            normalize,
            output,
        } => {
            let cfg = RunConfig::load(config)?;
            let dir = out_dir(&cfg);
            let method = method.unwrap_or(cfg.beamform.method);
            let data = read_channel_data(input)?;
            let grid = cfg.grid()?;
            let img = pipeline::beamform_stage(&data, &grid, method, &cfg, *normalize || cfg.beamform.normalize)?;
            let name = method_name(method);
            let path = output.clone().unwrap_or_else(|| dir.join(name).join("beamformed.ust"));
            create_parent(&path)?;
            let mut meta = Metadata::default();
            meta.set("kind", "rf").set("method", name);
            write_image(&path, &img, &meta)?;
            update_manifest(&cfg, &dir, &format!("beamform:{name}"), &[input.clone()], &[path.clone()])?;
            info!("wrote {}", path.display());
        }
        Command::Enhance {
            config,
            input,
            output_dir,
        } => {
            let cfg = RunConfig::load(config)?;
            let dir = out_dir(&cfg);
            let (img, meta) = read_image(input)?;
            if ImageKind::from_meta(&meta)? != ImageKind::Rf {
                return Err(Error::config("enhance expects an RF image"));
            }
            let target = output_dir
                .clone()
                .unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).join("enhance"));
            let e = pipeline::enhance(&img, &cfg)?;
            info!("measurement noise {:.4e}", e.measurement_noise);
            let written = pipeline::write_enhancement(&target, &e)?;
            let stage = format!("enhance:{}", meta.get("method").unwrap_or("image"));
            update_manifest(&cfg, &dir, &stage, &[input.clone()], &written)?;
            info!("wrote {} files to {}", written.len(), target.display());
        }
        Command::Metrics {
            config,
            input,
            labels,
            output,
            lenient,
        } => {
            let cfg = RunConfig::load(config)?;
            let dir = out_dir(&cfg);
            let (img, meta) = read_image(input)?;
            let phantom = labels.as_deref().map(pipeline::read_labels).transpose()?;
            let report = pipeline::metrics_stage(&img, ImageKind::from_meta(&meta)?, &cfg, phantom.as_ref())?;
            let path = output.clone().unwrap_or_else(|| input.with_extension("metrics.json"));
            create_parent(&path)?;
            pipeline::write_text(&path, &report.to_json())?;
            let mut inputs = vec![input.clone()];
            inputs.extend(labels.clone());
            update_manifest(&cfg, &dir, "metrics", &inputs, &[path.clone()])?;
            print!("{}", report.to_json());
            let failures = report.failures();
            for (metric, reason) in &failures {
                warn!("{metric}: {reason}");
            }
            if !failures.is_empty() && !lenient {
                return Err(Error::data(format!("{} metric(s) could not be computed", failures.len())));
            }
        }
        Command::Run { config } => {
            let cfg = RunConfig::load(config)?;
            run_all(&cfg, &out_dir(&cfg))?;
        }
        Command::EcDemo { seed, print_config } => {
            if *print_config {
                print!("{EC_DEMO}");
                return Ok(());
            }
            let mut cfg = RunConfig::ec_demo();
            if let Some(seed) = seed {
                cfg.seed = *seed;
            }
            run_all(&cfg, &out_dir(&cfg))?;
        }
    }
    Ok(())
}

fn run_all(cfg: &RunConfig, dir: &Path) -> Result<()> {
    pipeline::create_dir(dir)?;
    let manifest = pipeline::run_all(cfg, dir)?;
    for rec in &manifest.stages {
        info!("{}: {} output(s)", rec.stage, rec.outputs.len());
    }
    for panel in pipeline::PANELS {
        let report = std::fs::read_to_string(dir.join(format!("{panel}.metrics.json"))).map_err(|e| Error::io(dir, e))?;
        let report = usvar::metrics::MetricReport::from_json(&report)?;
        let summary: Vec<String> = report
            .metrics()
            .map(|(k, v)| match v.value {
                Some(x) => format!("{k}={x:.4e}"),
                None => format!("{k}=n/a"),
            })
            .collect();
        info!("{panel}: {}", summary.join(" "));
    }
    info!("wrote {}", dir.display());
    Ok(())
}

fn method_name(method: BeamformMethod) -> &'static str {
    match method {
        BeamformMethod::Das => "das",
        BeamformMethod::Ebmv => "ebmv",
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => pipeline::create_dir(p),
        _ => Ok(()),
    }
}

fn update_manifest(cfg: &RunConfig, dir: &Path, stage: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<()> {
    pipeline::create_dir(dir)?;
    let mut manifest = Manifest::open(cfg, dir)?;
    manifest.record(dir, stage, inputs, outputs)?;
    manifest.write(dir)
}
