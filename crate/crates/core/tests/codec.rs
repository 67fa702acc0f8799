use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtranscode::channel::NoiseParam;
use qtranscode::checkpoint;
use qtranscode::codec::{evaluate, train, LossWeights, NoiseSchedule, TrainConfig};
use qtranscode::dataset::{Image, Sample};

fn triples(count: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Sample { image: Image::new(1, 3, (0..3).map(|_| rng.gen()).collect()).unwrap(), label: 0 })
        .collect()
}

fn identity_fit_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        epochs: 1000,
        batch_size: 16,
        weight_decay: 0.0,
        seed: 3,
        noise: NoiseSchedule::Fixed(0.0),
        n: 3,
        observables: 9,
        latent: 9,
        hidden: 16,
        weights: LossWeights { mse: 1.0, ce: 0.0 },
        ..TrainConfig::default()
    }
}

#[test]
fn identity_fit_reaches_low_mse() {
    // Noiseless channel with K = n^2 observables: the decoder can invert the readout.
    let data = triples(64, 1);
    let out = train(&data, &identity_fit_config()).unwrap();
    let report = evaluate(&out.params, &data, NoiseParam::NOISELESS).unwrap();
    assert!(report.mse < 1e-3, "mse {}", report.mse);
}

#[test]
fn training_is_independent_of_thread_count() {
    let data = triples(32, 2);
    let cfg = TrainConfig { epochs: 20, ..identity_fit_config() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| train(&data, &cfg).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(checkpoint::to_bytes(&a.params), checkpoint::to_bytes(&b.params));
    assert_eq!(a.log, b.log);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let data = triples(16, 4);
    let cfg = TrainConfig { epochs: 5, ..identity_fit_config() };
    let params = train(&data, &cfg).unwrap().params;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("codec.qtc");
    checkpoint::save(&params, &path).unwrap();
    let loaded = checkpoint::load(&path).unwrap();
    let eps = NoiseParam::new(0.4).unwrap();
    assert_eq!(evaluate(&params, &data, eps).unwrap(), evaluate(&loaded, &data, eps).unwrap());
}
