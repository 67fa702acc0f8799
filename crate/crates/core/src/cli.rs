//! Experiment harness behind the `qtranscode` binary.
//!
//! Sweep CSV columns: `method,eps,n,K,seed,psnr,ssim,top1,wall_ms`. PSNR is
//! written as `inf` when the reconstruction is exact, `top1` as `nan` for
//! methods without a classifier. Rows come out in grid order
//! (n, K, seed, eps, method) however the work was scheduled.
//!
//! Shadow-bench CSV columns: `shots,K,eps_add,max_error,success_rate`, where
//! `max_error` is the median over trials of the worst error across the K
//! observables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baseline::{qpie_decode, qpie_decode_sampled, qpie_encode};
use crate::channel::{depolarize, NoiseParam};
use crate::checkpoint;
use crate::codec::{self, CodecParams, LossWeights, NoiseSchedule, TrainConfig};
use crate::dataset::{load_idx, IdxDataset};
use crate::encode::{decode, encode, min_dim, LatentVector};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport};
use crate::qcore::random_density;
use crate::readout::{expectations, ObservableSet};
use crate::shadows::{self, enumerate_clifford};

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "QTRANSCODE_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data";

pub const SWEEP_HEADER: &str = "method,eps,n,K,seed,psnr,ssim,top1,wall_ms";
pub const SHADOW_HEADER: &str = "shots,K,eps_add,max_error,success_rate";

/// Which loss terms the proposed codec is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Reconstruct,
    Classify,
    Both,
}

impl Task {
    pub fn weights(self) -> LossWeights {
        match self {
            Task::Reconstruct => LossWeights { mse: 1.0, ce: 0.0 },
            Task::Classify => LossWeights { mse: 0.0, ce: 1.0 },
            Task::Both => LossWeights { mse: 1.0, ce: 1.0 },
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reconstruct" => Ok(Task::Reconstruct),
            "classify" => Ok(Task::Classify),
            "both" => Ok(Task::Both),
            other => Err(Error::InvalidArgument(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// One model per (n, K, seed), trained over the default noise grid.
    Grid,
    /// One model per grid point, trained at that noise level.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub seeds: Vec<u64>,
    pub task: Task,
    pub data_dir: PathBuf,
    pub train_images: String,
    pub train_labels: String,
    pub test_images: String,
    pub test_labels: String,
    pub train_limit: usize,
    pub test_limit: usize,
    pub image_size: usize,
    /// Keep only these labels, renumbered 0.. in the listed order.
    pub classes: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    /// Adds `qpie-sampled` rows decoded from this many shots.
    pub shots: Option<u64>,
    pub checkpoint_dir: Option<PathBuf>,
    pub train_in_place: bool,
    pub timing: bool,
    pub noise: NoiseMode,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub hidden: usize,
    /// Latent size; 0 means n^2.
    pub latent: usize,
    pub bench_qubits: usize,
    pub bench_shots: Vec<usize>,
    pub bench_error: f64,
    pub bench_delta: f64,
    pub bench_trials: usize,
    pub bench_eps: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.1, 0.3, 0.5, 0.7, 0.9, 0.95],
            n: vec![8],
            k: vec![10],
            seeds: vec![0],
            task: Task::Both,
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            train_images: "digits8-train-images-idx3-ubyte".into(),
            train_labels: "digits8-train-labels-idx1-ubyte".into(),
            test_images: "digits8-test-images-idx3-ubyte".into(),
            test_labels: "digits8-test-labels-idx1-ubyte".into(),
            train_limit: 256,
            test_limit: 64,
            image_size: 8,
            classes: None,
            out: None,
            shots: None,
            checkpoint_dir: None,
            train_in_place: true,
            timing: false,
            noise: NoiseMode::Grid,
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 16,
            weight_decay: 1e-2,
            hidden: 32,
            latent: 0,
            bench_qubits: 1,
            bench_shots: vec![1_000, 10_000, 100_000],
            bench_error: 0.1,
            bench_delta: 0.1,
            bench_trials: 20,
            bench_eps: 0.3,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::InvalidArgument(format!("bad value '{s}' for {key}"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| Error::InvalidArgument(format!("bad value '{value}' for {key}")))
}

impl SweepConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "eps" => self.eps = parse_list(key, value)?,
            "n" => self.n = parse_list(key, value)?,
            "k" | "K" => self.k = parse_list(key, value)?,
            "seed" | "seeds" => self.seeds = parse_list(key, value)?,
            "task" => self.task = value.parse()?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "train_images" => self.train_images = value.into(),
            "train_labels" => self.train_labels = value.into(),
            "test_images" => self.test_images = value.into(),
            "test_labels" => self.test_labels = value.into(),
            "limit" | "train_limit" => self.train_limit = parse_one(key, value)?,
            "test_limit" => self.test_limit = parse_one(key, value)?,
            "image_size" => self.image_size = parse_one(key, value)?,
            "classes" => self.classes = if value.is_empty() { None } else { Some(parse_list(key, value)?) },
            "out" => self.out = Some(PathBuf::from(value)),
            "shots" => self.shots = if value.is_empty() { None } else { Some(parse_one(key, value)?) },
            "checkpoint" | "checkpoint_dir" => self.checkpoint_dir = Some(PathBuf::from(value)),
            "train_in_place" => self.train_in_place = parse_one(key, value)?,
            "timing" => self.timing = parse_one(key, value)?,
            "noise" => {
                self.noise = match value {
                    "grid" => NoiseMode::Grid,
                    "fixed" => NoiseMode::Fixed,
                    other => return Err(Error::InvalidArgument(format!("unknown noise mode '{other}'"))),
                }
            }
            "epochs" => self.epochs = parse_one(key, value)?,
            "learning_rate" | "lr" => self.learning_rate = parse_one(key, value)?,
            "batch_size" => self.batch_size = parse_one(key, value)?,
            "weight_decay" => self.weight_decay = parse_one(key, value)?,
            "hidden" => self.hidden = parse_one(key, value)?,
            "latent" => self.latent = parse_one(key, value)?,
            "bench_qubits" => self.bench_qubits = parse_one(key, value)?,
            "bench_shots" => self.bench_shots = parse_list(key, value)?,
            "bench_error" => self.bench_error = parse_one(key, value)?,
            "bench_delta" => self.bench_delta = parse_one(key, value)?,
            "bench_trials" => self.bench_trials = parse_one(key, value)?,
            "bench_eps" => self.bench_eps = parse_one(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a line-oriented `key=value` file. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key, value).map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() || self.n.is_empty() || self.k.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidArgument("eps, n, K and seed grids must be nonempty".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::BadNoise(*e));
        }
        if self.n.iter().any(|&n| n < 2) || self.k.iter().any(|&k| k == 0) {
            return Err(Error::InvalidArgument("n must be at least 2 and K at least 1".into()));
        }
        if self.latent > 0 {
            if let Some(&n) = self.n.iter().find(|&&n| n * n < self.latent) {
                return Err(Error::DimensionTooSmall { len: self.latent, n });
            }
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        Ok(())
    }

    pub fn latent_for(&self, n: usize) -> usize {
        if self.latent == 0 {
            n * n
        } else {
            self.latent
        }
    }

    pub fn train_config(&self, n: usize, k: usize, seed: u64, noise: NoiseSchedule) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            seed,
            noise,
            n,
            observables: k,
            latent: self.latent_for(n),
            hidden: self.hidden,
            weights: self.task.weights(),
            ..TrainConfig::default()
        }
    }

    fn load_split(&self, images: &str, labels: &str, limit: usize) -> Result<IdxDataset> {
        let full = load_idx(&self.data_dir.join(images), &self.data_dir.join(labels), None)?;
        let filtered = match &self.classes {
            Some(classes) => full.with_classes(classes),
            None => full,
        };
        filtered.take(limit).resized(self.image_size)
    }

    /// Train and test splits after class filtering, limits and resizing.
    pub fn load_data(&self) -> Result<(IdxDataset, IdxDataset)> {
        let train = self.load_split(&self.train_images, &self.train_labels, self.train_limit)?;
        let test = self.load_split(&self.test_images, &self.test_labels, self.test_limit)?;
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidArgument("empty train or test split".into()));
        }
        Ok((train, test))
    }

    fn checkpoint_path(&self, n: usize, k: usize, seed: u64, eps: Option<f64>) -> Option<PathBuf> {
        self.checkpoint_dir.as_ref().map(|dir| {
            let name = match eps {
                Some(e) => format!("codec-n{n}-k{k}-s{seed}-e{e}.qtc"),
                None => format!("codec-n{n}-k{k}-s{seed}.qtc"),
            };
            dir.join(name)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub eps: f64,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub report: MetricReport,
    pub wall_ms: u64,
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            fmt_float(r.eps),
            r.n,
            r.k,
            r.seed,
            fmt_float(r.report.psnr_db),
            fmt_float(r.report.ssim),
            fmt_float(r.report.top1),
            r.wall_ms
        );
    }
    out
}

/// Mean PSNR, SSIM and MSE of the QPIE baseline over `test`; `shots` selects
/// the sampled decoder.
pub fn evaluate_qpie(test: &IdxDataset, eps: NoiseParam, shots: Option<u64>, seed: u64) -> Result<MetricReport> {
    let rows: Vec<Result<(f64, f64, f64)>> = test
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let enc = qpie_encode(&s.image)?;
            let noisy = depolarize(&enc.rho, eps);
            let out = match shots {
                Some(shots) => {
                    let stream = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
                    qpie_decode_sampled(&noisy, eps, shots, stream, enc.norm, enc.height, enc.width)?
                }
                None => qpie_decode(&noisy, eps, enc.norm, enc.height, enc.width)?,
            };
            let mse = metrics::mse(&out.pixels, &s.image.pixels)?;
            Ok((metrics::psnr_from_mse(mse, 1.0), metrics::ssim(&out.pixels, &s.image.pixels, 1.0)?, mse))
        })
        .collect();
    let mut acc = (0.0, 0.0, 0.0);
    for r in rows {
        let (p, s, m) = r?;
        acc.0 += p;
        acc.1 += s;
        acc.2 += m;
    }
    let count = test.len() as f64;
    Ok(MetricReport { psnr_db: acc.0 / count, ssim: acc.1 / count, top1: f64::NAN, mse: acc.2 / count })
}

fn obtain_model(
    cfg: &SweepConfig,
    train: &IdxDataset,
    n: usize,
    k: usize,
    seed: u64,
    fixed_eps: Option<f64>,
) -> Result<CodecParams> {
    let path = cfg.checkpoint_path(n, k, seed, fixed_eps);
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        return checkpoint::load(p);
    }
    if !cfg.train_in_place {
        let shown = path.map(|p| p.display().to_string()).unwrap_or_else(|| "<no checkpoint dir>".into());
        return Err(Error::InvalidArgument(format!("missing checkpoint {shown}")));
    }
    let schedule = match fixed_eps {
        Some(e) => NoiseSchedule::Fixed(e),
        None => NoiseSchedule::default_grid(),
    };
    let params = codec::train(&train.samples, &cfg.train_config(n, k, seed, schedule))?.params;
    if let Some(p) = path {
        checkpoint::save(&params, &p)?;
    }
    Ok(params)
}

fn timed<T>(timing: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, u64)> {
    let start = Instant::now();
    let value = f()?;
    let ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok((value, ms))
}

/// Sweep over data already loaded. Rows for `proposed`, `qpie` and, when
/// shots are configured, `qpie-sampled`.
pub fn run_sweep_on(cfg: &SweepConfig, train: &IdxDataset, test: &IdxDataset) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &n in &cfg.n {
        for &k in &cfg.k {
            for &seed in &cfg.seeds {
                cells.push((n, k, seed));
            }
        }
    }
    let results: Vec<Result<Vec<SweepRow>>> = cells
        .par_iter()
        .map(|&(n, k, seed)| {
            let shared = match cfg.noise {
                NoiseMode::Grid => Some(obtain_model(cfg, train, n, k, seed, None)?),
                NoiseMode::Fixed => None,
            };
            let mut rows = Vec::new();
            for &e in &cfg.eps {
                let eps = NoiseParam::new(e)?;
                let model = match &shared {
                    Some(m) => m.clone(),
                    None => obtain_model(cfg, train, n, k, seed, Some(e))?,
                };
                let (report, wall_ms) = timed(cfg.timing, || codec::evaluate(&model, &test.samples, eps))?;
                rows.push(SweepRow { method: "proposed".into(), eps: e, n, k, seed, report, wall_ms });
                let (report, wall_ms) = timed(cfg.timing, || evaluate_qpie(test, eps, None, seed))?;
                rows.push(SweepRow { method: "qpie".into(), eps: e, n, k, seed, report, wall_ms });
                if let Some(shots) = cfg.shots {
                    let (report, wall_ms) = timed(cfg.timing, || evaluate_qpie(test, eps, Some(shots), seed))?;
                    rows.push(SweepRow { method: "qpie-sampled".into(), eps: e, n, k, seed, report, wall_ms });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let (train, test) = cfg.load_data()?;
    run_sweep_on(cfg, &train, &test)
}

/// QPIE rows only; no training involved.
pub fn run_baseline(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let (_, test) = cfg.load_data()?;
    let n = test.rows * test.cols;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        for &e in &cfg.eps {
            let eps = NoiseParam::new(e)?;
            let (report, wall_ms) = timed(cfg.timing, || evaluate_qpie(&test, eps, None, seed))?;
            rows.push(SweepRow { method: "qpie".into(), eps: e, n: n.next_power_of_two(), k: 0, seed, report, wall_ms });
            if let Some(shots) = cfg.shots {
                let (report, wall_ms) = timed(cfg.timing, || evaluate_qpie(&test, eps, Some(shots), seed))?;
                rows.push(SweepRow {
                    method: "qpie-sampled".into(),
                    eps: e,
                    n: n.next_power_of_two(),
                    k: 0,
                    seed,
                    report,
                    wall_ms,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowRow {
    pub shots: usize,
    pub k: usize,
    pub eps_add: f64,
    pub max_error: f64,
    pub success_rate: f64,
}

pub fn shadow_csv(rows: &[ShadowRow]) -> String {
    let mut out = String::from(SHADOW_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.shots,
            r.k,
            fmt_float(r.eps_add),
            fmt_float(r.max_error),
            fmt_float(r.success_rate)
        );
    }
    out
}

/// Worst-case error of shadow estimates against exact expectations, for every
/// shot count in `bench_shots` and every K in `k`. Trial `t` uses a random
/// state and observable set seeded from (seed, t), shared across shot counts.
pub fn run_shadow_bench(cfg: &SweepConfig) -> Result<Vec<ShadowRow>> {
    if cfg.bench_shots.is_empty() || cfg.k.is_empty() || cfg.bench_trials == 0 {
        return Err(Error::InvalidArgument("shadow bench needs nonempty shot and K grids".into()));
    }
    let group = enumerate_clifford(cfg.bench_qubits)?;
    let n = group.dim();
    let eps = NoiseParam::new(cfg.bench_eps)?;
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let mut rows = Vec::new();
    for &k in &cfg.k {
        if k == 0 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        let batches = shadows::batches_for(k, cfg.bench_delta);
        for &shots in &cfg.bench_shots {
            let errors: Vec<Result<f64>> = (0..cfg.bench_trials)
                .into_par_iter()
                .map(|t| {
                    let trial_seed = seed.wrapping_mul(1_000_003).wrapping_add(t as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
                    let rho = depolarize(&random_density(n, n, &mut rng), eps);
                    let obs = ObservableSet::random(n, k, &mut rng);
                    let exact = expectations(&rho, &obs)?;
                    let snaps = shadows::sample_shots(&rho, &group, shots, trial_seed ^ 0xa5a5_5a5a)?;
                    let est = shadows::estimate(&snaps, &group, &obs, batches.min(shots))?;
                    Ok(est.estimates.iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                })
                .collect();
            let mut errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
            let successes = errors.iter().filter(|&&e| e <= cfg.bench_error).count();
            errors.sort_by(f64::total_cmp);
            let mid = errors.len() / 2;
            let median = if errors.len() % 2 == 1 { errors[mid] } else { 0.5 * (errors[mid - 1] + errors[mid]) };
            rows.push(ShadowRow {
                shots,
                k,
                eps_add: cfg.bench_error,
                max_error: median,
                success_rate: successes as f64 / cfg.bench_trials as f64,
            });
        }
    }
    Ok(rows)
}

/// Report of the single-vector round-trip demo.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeReport {
    pub n: usize,
    pub latent: Vec<f64>,
    pub purity: f64,
    pub min_eigenvalue: f64,
    pub noisy_purity: f64,
    pub decoded: Vec<f64>,
    pub max_error: f64,
}

/// Encodes `values` (normalized first), depolarizes with `eps` and decodes the
/// noiseless state. `n` defaults to the smallest dimension that fits.
pub fn run_encode(values: &[f64], n: Option<usize>, eps: NoiseParam) -> Result<EncodeReport> {
    let y = LatentVector::normalized(values)?;
    let n = n.unwrap_or_else(|| min_dim(y.dim()));
    let rho = encode(&y, n)?;
    let decoded = decode(&rho, y.dim())?;
    let max_error = decoded.iter().zip(y.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(EncodeReport {
        n,
        latent: y.values().to_vec(),
        purity: rho.purity(),
        min_eigenvalue: rho.min_eigenvalue(),
        noisy_purity: depolarize(&rho, eps).purity(),
        decoded,
        max_error,
    })
}

impl std::fmt::Display for EncodeReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(",");
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "latent={}", join(&self.latent))?;
        writeln!(f, "decoded={}", join(&self.decoded))?;
        writeln!(f, "max_error={:e}", self.max_error)?;
        writeln!(f, "purity={:.12}", self.purity)?;
        writeln!(f, "min_eigenvalue={:e}", self.min_eigenvalue)?;
        write!(f, "noisy_purity={:.12}", self.noisy_purity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_overrides_defaults() {
        let mut cfg = SweepConfig::default();
        cfg.apply_text("# comment\neps = 0.1, 0.5\nn=2,4\n\nK=3\nseeds=1,2\ntask=classify\nshots=100\n").unwrap();
        assert_eq!(cfg.eps, vec![0.1, 0.5]);
        assert_eq!(cfg.n, vec![2, 4]);
        assert_eq!(cfg.k, vec![3]);
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.task, Task::Classify);
        assert_eq!(cfg.shots, Some(100));
        assert!(cfg.apply_text("bogus=1").is_err());
        assert!(cfg.apply_text("eps").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = SweepConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.eps = vec![1.5];
        assert!(matches!(cfg.validate(), Err(Error::BadNoise(_))));
        cfg.eps.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_sentinels() {
        let row = SweepRow {
            method: "qpie".into(),
            eps: 0.0,
            n: 64,
            k: 0,
            seed: 0,
            report: MetricReport { psnr_db: f64::INFINITY, ssim: 1.0, top1: f64::NAN, mse: 0.0 },
            wall_ms: 0,
        };
        let csv = sweep_csv(&[row]);
        assert_eq!(csv, format!("{SWEEP_HEADER}\nqpie,0,64,0,0,inf,1,nan,0\n"));
        assert_eq!(sweep_csv(&[]), format!("{SWEEP_HEADER}\n"));
    }

    #[test]
    fn encode_demo_round_trips() {
        let report = run_encode(&[0.5, 0.5, 0.5, 0.5], None, NoiseParam::new(0.2).unwrap()).unwrap();
        assert_eq!(report.n, 2);
        assert!(report.max_error < 1e-10);
        assert!((report.purity - 1.0).abs() < 1e-12 || report.purity < 1.0);
        assert!(report.noisy_purity < report.purity);
    }

    #[test]
    fn shadow_bench_rejects_empty_grid() {
        let cfg = SweepConfig { bench_shots: vec![], ..SweepConfig::default() };
        assert!(run_shadow_bench(&cfg).is_err());
        let cfg = SweepConfig { k: vec![], ..SweepConfig::default() };
        assert!(run_shadow_bench(&cfg).is_err());
        let cfg = SweepConfig { bench_qubits: 3, ..SweepConfig::default() };
        assert!(run_shadow_bench(&cfg).is_err());
    }
}
