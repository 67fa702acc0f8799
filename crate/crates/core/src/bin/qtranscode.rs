use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtranscode::channel::NoiseParam;
use qtranscode::checkpoint;
use qtranscode::cli::{
    run_baseline, run_encode, run_shadow_bench, run_sweep, shadow_csv, sweep_csv, SweepConfig, DATA_DIR_ENV,
};
use qtranscode::codec::{self, NoiseSchedule};
use qtranscode::{Error, Result};

#[derive(Parser)]
#[command(name = "qtranscode", version, about = "Quantum transcoding simulator and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode one latent vector, report physicality and the decode round trip.
    Encode {
        /// Comma-separated latent values (normalized before encoding).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        y: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train one codec and write its checkpoint.
    Train(Common),
    /// Evaluate the codec and the QPIE baseline over the (eps, n, K, seed) grid.
    Sweep(Common),
    /// Classical-shadow error versus shot count.
    ShadowBench(Common),
    /// QPIE baseline only.
    Baseline(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long = "k", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Number of training samples.
    #[arg(long)]
    limit: Option<usize>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shot budget for sampled decoding.
    #[arg(long)]
    shots: Option<u64>,
    /// Checkpoint file (train) or directory (sweep).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// reconstruct, classify or both.
    #[arg(long)]
    task: Option<String>,
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    /// Extra key=value settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::from_file(path)?,
            None => SweepConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::InvalidArgument(format!("bad --set '{kv}'")))?;
            cfg.set(k, v)?;
        }
        if let Some(v) = &self.eps {
            cfg.eps = v.clone();
        }
        if let Some(v) = &self.n {
            cfg.n = v.clone();
        }
        if let Some(v) = &self.k {
            cfg.k = v.clone();
        }
        if let Some(v) = &self.seed {
            cfg.seeds = v.clone();
        }
        if let Some(v) = self.limit {
            cfg.train_limit = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.shots {
            cfg.shots = Some(v);
        }
        if let Some(v) = &self.checkpoint {
            cfg.checkpoint_dir = Some(v.clone());
        }
        if let Some(v) = &self.task {
            cfg.task = v.parse()?;
        }
        if let Some(v) = &self.data_dir {
            cfg.data_dir = v.clone();
        }
        Ok(cfg)
    }
}

fn emit(cfg: &SweepConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn train(cfg: &SweepConfig) -> Result<()> {
    let path = cfg
        .checkpoint_dir
        .clone()
        .ok_or_else(|| Error::InvalidArgument("train needs --checkpoint".into()))?;
    let (train, test) = cfg.load_data()?;
    let schedule = match cfg.eps.as_slice() {
        [e] => NoiseSchedule::Fixed(*e),
        _ => NoiseSchedule::default_grid(),
    };
    let tc = cfg.train_config(cfg.n[0], cfg.k[0], cfg.seeds[0], schedule);
    let outcome = codec::train(&train.samples, &tc)?;
    let mut log = String::from("epoch,loss\n");
    for e in &outcome.log {
        log.push_str(&format!("{},{}\n", e.epoch, e.loss));
    }
    emit(cfg, &log)?;
    checkpoint::save(&outcome.params, &path)?;
    for &e in &cfg.eps {
        let r = codec::evaluate(&outcome.params, &test.samples, NoiseParam::new(e)?)?;
        eprintln!("eps={e} psnr={:.3} ssim={:.4} top1={:.3}", r.psnr_db, r.ssim, r.top1);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode { y, common } => {
            let cfg = common.resolve()?;
            let eps = NoiseParam::new(cfg.eps.first().copied().unwrap_or(0.0))?;
            let n = common.n.as_ref().and_then(|v| v.first().copied());
            println!("{}", run_encode(&y, n, eps)?);
            Ok(())
        }
        Command::Train(common) => train(&common.resolve()?),
        Command::Sweep(common) => {
            let cfg = common.resolve()?;
            emit(&cfg, &sweep_csv(&run_sweep(&cfg)?))
        }
        Command::ShadowBench(common) => {
            let cfg = common.resolve()?;
            emit(&cfg, &shadow_csv(&run_shadow_bench(&cfg)?))
        }
        Command::Baseline(common) => {
            let cfg = common.resolve()?;
            emit(&cfg, &sweep_csv(&run_baseline(&cfg)?))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
