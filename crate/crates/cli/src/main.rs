//! `logeq` command-line experiment runner.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use logeq::analysis::{emse_lclma_gaussian, emse_lclma_impulsive, steady_mse, TrackingScenario};
use logeq::channel::snr_to_noise;
use logeq::harness::{
    emit_results, load_config, run_experiment, ExperimentConfig, Preset, ResultBundle, Scale,
};

#[derive(Parser)]
#[command(name = "logeq", version, about = "Logarithmic-cost adaptive equalizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config or manifest (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in preset: linear-training, linear-decision-directed, dfe, a-sweep, snr-sweep.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Use the full-size preset instead of the desk-scale one.
    #[arg(long, global = true)]
    full_scale: bool,
    /// Master seed override.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Simulate,
    /// BER against E_b/N0.
    SweepSnr,
    /// Final NASE of LCLMA against a.
    SweepA,
    /// Closed-form steady-state EMSE of LCLMA for the configured scenario.
    PredictEmse(PredictArgs),
    /// Print the effective configuration.
    ShowConfig,
}

#[derive(Args)]
struct PredictArgs {
    /// Tr(R). Defaults to the feed-forward length times the received power.
    #[arg(long)]
    trace_r: Option<f64>,
    /// Tr(A). Defaults to the feed-forward length times the squared tap drift.
    #[arg(long)]
    trace_a: Option<f64>,
    /// E_b/N0 in dB. Defaults to the first grid point.
    #[arg(long)]
    snr_db: Option<f64>,
}

fn base_config(common: &Common, fallback: Preset) -> Result<ExperimentConfig> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(_), Some(_)) => bail!("--config and --preset are mutually exclusive"),
        (Some(path), None) => load_config(path)
            .with_context(|| format!("loading {}", path.display()))?,
        (None, name) => {
            let preset = match name {
                Some(n) => n.parse()?,
                None => fallback,
            };
            let scale = if common.full_scale { Scale::Full } else { Scale::Desk };
            ExperimentConfig::preset(preset, scale)
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_and_emit(cfg: &ExperimentConfig, common: &Common) -> Result<ResultBundle> {
    let bundle = run_experiment(cfg, common.workers)?;
    let files = emit_results(&bundle, &common.out)?;
    for c in &bundle.cells {
        let avg = &c.average;
        eprintln!(
            "{:>6} snr={:>5} a={:<5} ber={:.5} final_nase={:.5} diverged={}/{}",
            c.key.algorithm.name(),
            c.key.snr_db,
            c.key.a,
            avg.ber,
            avg.final_nase,
            avg.diverged_count,
            cfg.trials
        );
    }
    eprintln!("wrote {} files to {}", files.len(), common.out.display());
    Ok(bundle)
}

fn predict(cfg: &ExperimentConfig, args: &PredictArgs, out: &mut impl Write) -> Result<()> {
    let snr = args.snr_db.unwrap_or(cfg.snr_db[0]);
    let noise = snr_to_noise(snr, cfg.impulse_ratio, cfg.impulse_prob)?;
    let channel = cfg.channel.model()?;
    let h = (cfg.equalizer.anti_causal + cfg.equalizer.causal + 1) as f64;
    let energy: f64 = channel.taps().iter().map(|t| t * t).sum();
    let trace_r = args.trace_r.unwrap_or(h * (energy + noise.variance()));
    let trace_a = args.trace_a.unwrap_or(h * cfg.channel.drift * cfg.channel.drift);
    let mut s = TrackingScenario::from_noise(&noise, trace_r, trace_a, cfg.equalizer.mu, cfg.equalizer.a);
    s.feedback = cfg.equalizer.feedback;

    writeln!(out, "quantity,value")?;
    for (name, value) in [
        ("trace_r", s.trace_r),
        ("effective_trace_r", s.effective_trace()),
        ("trace_a", s.trace_a),
        ("sigma_v2", s.sigma_v2),
        ("sigma_n2", s.sigma_n2),
        ("nu", s.nu),
        ("mu", s.mu),
        ("a", s.a),
    ] {
        writeln!(out, "{name},{value}")?;
    }
    let eta_g = emse_lclma_gaussian(&s);
    let eta_i = emse_lclma_impulsive(&s);
    for (name, eta) in [("eta_gaussian", &eta_g), ("eta_impulsive", &eta_i)] {
        match eta {
            Ok(v) => writeln!(out, "{name},{v}")?,
            Err(e) => {
                eprintln!("{name}: {e}");
                writeln!(out, "{name},NaN")?
            }
        }
    }
    let eta = if s.nu > 0.0 { eta_i } else { eta_g };
    if let Ok(v) = eta {
        writeln!(out, "steady_mse,{}", steady_mse(&s, v)?)?;
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = &cli.common;
    match &cli.command {
        Command::Simulate => {
            let cfg = base_config(common, Preset::LinearTraining)?;
            run_and_emit(&cfg, common)?;
        }
        Command::SweepSnr => {
            let mut cfg = base_config(common, Preset::SnrSweep)?;
            cfg.preset = Preset::SnrSweep;
            run_and_emit(&cfg, common)?;
        }
        Command::SweepA => {
            let mut cfg = base_config(common, Preset::ASweep)?;
            cfg.preset = Preset::ASweep;
            if cfg.a_grid.is_empty() {
                cfg.a_grid = vec![0.1, 1.0, 10.0];
            }
            run_and_emit(&cfg, common)?;
        }
        Command::PredictEmse(args) => {
            let cfg = base_config(common, Preset::LinearTraining)?;
            let mut buf = Vec::new();
            predict(&cfg, args, &mut buf)?;
            std::io::stdout().write_all(&buf)?;
            let path = write_file(&common.out, "emse.csv", &buf)?;
            eprintln!("wrote {}", path.display());
        }
        Command::ShowConfig => {
            let cfg = base_config(common, Preset::LinearTraining)?;
            print!("{}", cfg.to_toml()?);
        }
    }
    Ok(())
}
