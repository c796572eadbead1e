use std::fs;
use std::path::{Path, PathBuf};

use novelty_core::dataset::{build_split, Corpus, DatasetSplit, LabeledImage, SplitManifest, PIXELS, SIDE};
use novelty_core::detectors::{
    calibrate_threshold, evaluate_detector, reconstruction_scores, Detector, DetectorKind, Threshold,
};
use novelty_core::nn::rng::RNG_VERSION;
use novelty_core::nn::{
    encode, load_checkpoint, save_checkpoint, train, Loss, Network, NetworkSpec, Tensor, TrainConfig, TrainingMeta,
};
use novelty_core::topology::TopologySpec;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::profile::ExperimentProfile;
use crate::report::{emit_report, Format, ModelSummary, Report};
use crate::PipelineError;

const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

/// Where a run reads data, writes results and caches trained models.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Checkpoints keyed by training inputs; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn json_digest<T: Serialize>(value: &T) -> String {
    hex_digest(&serde_json::to_vec(value).expect("serializable"))
}

/// Fails early, naming the first missing input file.
pub fn check_data(data_dir: &Path) -> Result<(), PipelineError> {
    for f in MNIST_FILES {
        let p = data_dir.join("mnist").join(f);
        if !p.is_file() {
            return Err(PipelineError::MissingData(p));
        }
    }
    let letters = data_dir.join("notmnist_small");
    if !letters.is_dir() {
        return Err(PipelineError::MissingData(letters));
    }
    Ok(())
}

pub fn load_corpus(data_dir: &Path, letters: &[char]) -> Result<Corpus, PipelineError> {
    check_data(data_dir)?;
    Ok(Corpus::load(data_dir, letters)?)
}

pub fn split_for(profile: &ExperimentProfile, corpus: &Corpus) -> Result<DatasetSplit, PipelineError> {
    Ok(build_split(corpus, &profile.partition, profile.sizes, profile.seed)?)
}

pub fn read_manifest(path: &Path) -> Result<SplitManifest, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// `[n, 784]` batch of flat images.
pub fn autoencoder_inputs(images: &[LabeledImage]) -> Result<Tensor, PipelineError> {
    let flat = images.iter().flat_map(|i| i.pixels.iter().copied()).collect();
    Ok(Tensor::new(vec![images.len(), PIXELS], flat)?)
}

/// `[n, 1, 28, 28]` images and one-hot targets over the known classes.
pub fn classifier_inputs(split: &DatasetSplit) -> Result<(Tensor, Tensor), PipelineError> {
    let partition = &split.manifest.partition;
    let classes = partition.known.len();
    let images = &split.train;
    let flat = images.iter().flat_map(|i| i.pixels.iter().copied()).collect();
    let x = Tensor::new(vec![images.len(), 1, SIDE, SIDE], flat)?;
    let mut y = vec![0.0; images.len() * classes];
    for (i, im) in images.iter().enumerate() {
        let k = partition
            .known_index(im.label)
            .ok_or_else(|| PipelineError::Profile(format!("training image of unknown class {}", im.label)))?;
        y[i * classes + k] = 1.0;
    }
    Ok((x, Tensor::new(vec![images.len(), classes], y)?))
}

fn finish(net: Network, cfg: &TrainConfig, report: novelty_core::nn::TrainReport) -> (Network, TrainingMeta) {
    let meta = TrainingMeta {
        seed: cfg.seed,
        epochs_run: report.epochs_run,
        final_loss: report.final_loss,
        rng: RNG_VERSION.to_string(),
    };
    (net, meta)
}

pub fn train_autoencoder(
    split: &DatasetSplit,
    topology: &TopologySpec,
    cfg: &TrainConfig,
) -> Result<(Network, TrainingMeta), PipelineError> {
    let x = autoencoder_inputs(&split.train)?;
    let mut net = Network::new(topology.network_spec()?, cfg.seed)?;
    tracing::info!(%topology, epochs = cfg.epochs, "training autoencoder");
    let report = train(&mut net, &x, &x, Loss::Mse, cfg)?;
    Ok(finish(net, cfg, report))
}

pub fn train_classifier(split: &DatasetSplit, cfg: &TrainConfig) -> Result<(Network, TrainingMeta), PipelineError> {
    let (x, y) = classifier_inputs(split)?;
    let spec = NetworkSpec::conv_classifier(SIDE, split.manifest.partition.known.len())?;
    let mut net = Network::new(spec, cfg.seed)?;
    tracing::info!(epochs = cfg.epochs, "training classifier");
    let report = train(&mut net, &x, &y, Loss::CrossEntropy, cfg)?;
    Ok(finish(net, cfg, report))
}

/// Threshold at `percentile` of the training-set reconstruction errors.
pub fn calibrate(ae: &Network, train_images: &[LabeledImage], percentile: f64) -> Result<Threshold, PipelineError> {
    let images: Vec<&[f32]> = train_images.iter().map(|i| i.pixels.as_slice()).collect();
    let errors = reconstruction_scores(ae, &images)?;
    Ok(calibrate_threshold(&errors, percentile)?)
}

/// Loads the checkpoint cached under `key`, or trains and caches it.
fn cached(
    cache_dir: Option<&Path>,
    key: &str,
    train: impl FnOnce() -> Result<(Network, TrainingMeta), PipelineError>,
) -> Result<(Network, TrainingMeta), PipelineError> {
    let path = cache_dir.map(|d| d.join(format!("{key}.nckp")));
    if let Some(p) = path.as_ref().filter(|p| p.is_file()) {
        match load_checkpoint(p) {
            Ok(c) => {
                tracing::info!(path = %p.display(), "using cached checkpoint");
                return Ok((c.network, c.meta));
            }
            Err(e) => tracing::warn!(path = %p.display(), error = %e, "ignoring unreadable cached checkpoint"),
        }
    }
    let (net, meta) = train()?;
    if let Some(p) = path {
        let dir = p.parent().expect("cache file has a parent");
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        save_checkpoint(&net, &meta, &p)?;
    }
    Ok((net, meta))
}

#[derive(Serialize)]
struct CacheKey<'a> {
    role: &'static str,
    architecture: String,
    training: &'a TrainConfig,
    manifest: &'a str,
    rng: &'static str,
}

fn cache_key(role: &'static str, architecture: String, training: &TrainConfig, manifest: &str) -> String {
    json_digest(&CacheKey {
        role,
        architecture,
        training,
        manifest,
        rng: RNG_VERSION,
    })
}

fn summarize(role: &'static str, architecture: String, net: &Network, meta: TrainingMeta, file: &str) -> ModelSummary {
    ModelSummary {
        role: role.to_string(),
        architecture,
        checkpoint: file.to_string(),
        checkpoint_sha256: hex_digest(&encode(net, &meta)),
        meta,
    }
}

/// Runs a profile end to end with data loaded from `paths.data_dir`.
pub fn run_profile(profile: &ExperimentProfile, paths: &RunPaths) -> Result<Report, PipelineError> {
    profile.validate()?;
    let corpus = load_corpus(&paths.data_dir, &profile.partition.letters)?;
    run_profile_on(profile, &corpus, paths)
}

/// Runs a profile on an already loaded corpus: split, train (or load cached
/// models), calibrate, evaluate, and write everything to `paths.out_dir`.
pub fn run_profile_on(profile: &ExperimentProfile, corpus: &Corpus, paths: &RunPaths) -> Result<Report, PipelineError> {
    profile.validate()?;
    let out = &paths.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let split = split_for(profile, corpus)?;
    write_json(&split.manifest, &out.join("split.json"))?;
    let manifest_digest = json_digest(&split.manifest);
    let cache = paths.cache_dir.as_deref();
    let mut models = Vec::new();

    let autoencoder = if profile.needs_autoencoder() {
        let topology = profile.topology.as_ref().expect("validated");
        let cfg = profile.autoencoder_training.as_ref().expect("validated");
        let key = cache_key("autoencoder", topology.to_string(), cfg, &manifest_digest);
        let (net, meta) = cached(cache, &key, || train_autoencoder(&split, topology, cfg))?;
        save_checkpoint(&net, &meta, &out.join("autoencoder.nckp"))?;
        models.push(summarize(
            "autoencoder",
            topology.to_string(),
            &net,
            meta,
            "autoencoder.nckp",
        ));
        Some(net)
    } else {
        None
    };
    let classifier = if profile.needs_classifier() {
        let cfg = profile.classifier_training.as_ref().expect("validated");
        let arch = format!("conv-classifier-{}", profile.partition.known.len());
        let key = cache_key("classifier", arch.clone(), cfg, &manifest_digest);
        let (net, meta) = cached(cache, &key, || train_classifier(&split, cfg))?;
        save_checkpoint(&net, &meta, &out.join("classifier.nckp"))?;
        models.push(summarize("classifier", arch, &net, meta, "classifier.nckp"));
        Some(net)
    } else {
        None
    };

    let (detector, threshold) = match profile.detector {
        kind @ (DetectorKind::Naive | DetectorKind::SemiSemantic) => {
            let ae = autoencoder.expect("validated");
            let threshold = calibrate(&ae, &split.train, profile.percentile)?;
            write_json(&threshold, &out.join("threshold.json"))?;
            (Detector::reconstruction(kind, ae, threshold)?, Some(threshold))
        }
        DetectorKind::ClassifierConfidence => (
            Detector::classifier_confidence(classifier.expect("validated"), profile.min_probability)?,
            None,
        ),
        DetectorKind::FullySemantic => (
            Detector::fully_semantic(
                classifier.expect("validated"),
                autoencoder.expect("validated"),
                profile.min_probability,
            )?,
            None,
        ),
    };
    let evaluation = evaluate_detector(&detector, &split)?;
    let report = Report {
        profile: profile.clone(),
        manifest_sha256: manifest_digest,
        rng: RNG_VERSION.to_string(),
        table: evaluation.table.clone(),
        threshold,
        models,
        evaluation,
    };
    emit_report(&report, out, &Format::ALL)?;
    Ok(report)
}
