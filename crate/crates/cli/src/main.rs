use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use novelty_cli::pipeline::{
    self, calibrate, load_corpus, read_manifest, train_autoencoder, train_classifier, write_json, RunPaths,
};
use novelty_cli::profile::{faithful_autoencoder_training, ExperimentProfile, ProfileName};
use novelty_cli::{emit_report, Format, Report};
use novelty_client::MonitorClient;
use novelty_core::dataset::{read_image, Corpus, DatasetSplit, SplitManifest};
use novelty_core::detectors::{evaluate_detector, Detector, DetectorKind, Threshold};
use novelty_core::nn::{load_checkpoint, save_checkpoint, OptimizerKind};
use novelty_core::topology::{enumerate_topologies, LatentRounding, TopologySpec};
use novelty_monitor::{MonitorConfig, Server, Transport};

#[derive(Parser)]
#[command(name = "novelty", version, about = "Autoencoder-based novelty detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the seeded dataset split and write its manifest.
    Split {
        #[arg(long, default_value = "data")]
        data: PathBuf,
        /// Profile whose class partition and set sizes to use.
        #[arg(long, default_value = "naive")]
        profile: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "split.json")]
        out: PathBuf,
    },
    /// Train an autoencoder on a split's training images.
    TrainAe {
        #[command(flatten)]
        input: SplitInput,
        #[arg(long, default_value = "784-512-128-7-128-512-784")]
        topology: TopologySpec,
        #[command(flatten)]
        train: TrainFlags,
        /// Use the long 3000-epoch schedule without early stopping.
        #[arg(long)]
        faithful: bool,
        #[arg(long, default_value = "autoencoder.nckp")]
        out: PathBuf,
    },
    /// Train the convolutional classifier on a split's training images.
    TrainClassifier {
        #[command(flatten)]
        input: SplitInput,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long, default_value = "classifier.nckp")]
        out: PathBuf,
    },
    /// Calibrate a reconstruction threshold on the training images.
    Calibrate {
        #[command(flatten)]
        input: SplitInput,
        #[arg(long)]
        autoencoder: PathBuf,
        #[arg(long, default_value_t = 99.0)]
        percentile: f64,
        #[arg(long, default_value = "threshold.json")]
        out: PathBuf,
    },
    /// Evaluate a detector on a split's three eval sets.
    Evaluate {
        #[command(flatten)]
        input: SplitInput,
        #[command(flatten)]
        models: ModelFlags,
        #[arg(long, default_value = "evaluation")]
        out: PathBuf,
    },
    /// List rule-conforming autoencoder topologies.
    EnumerateTopologies {
        #[arg(long, default_value_t = 7)]
        classes: usize,
        #[arg(long, default_value_t = 784)]
        io: usize,
        /// Round the lower latent bound down instead of up.
        #[arg(long)]
        floor: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run a whole experiment profile.
    Run(RunArgs),
    /// Re-emit a saved report in other formats.
    Report {
        #[arg(long, default_value = "report.json")]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "json,csv,markdown")]
        format: Vec<String>,
    },
    /// Run the monitor service.
    Serve {
        /// JSON monitor config; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        models: ModelFlags,
        #[arg(long)]
        sink: Option<PathBuf>,
        /// Serve JSON lines over TCP on this address.
        #[arg(long, conflicts_with = "http")]
        tcp: Option<String>,
        /// Serve HTTP on this address.
        #[arg(long)]
        http: Option<String>,
    },
    /// Send image files to a running monitor's TCP transport.
    Query {
        #[arg(long)]
        addr: String,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct SplitInput {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "split.json")]
    manifest: PathBuf,
}

impl SplitInput {
    fn load(&self) -> Result<DatasetSplit> {
        let manifest: SplitManifest = read_manifest(&self.manifest)?;
        let corpus = load_corpus(&self.data, &manifest.partition.letters)?;
        Ok(manifest.materialize(&corpus)?)
    }
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// sgd or adam
    #[arg(long)]
    optimizer: Option<String>,
    /// Defaults to the split's seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainFlags {
    fn apply(&self, cfg: &mut novelty_core::nn::TrainConfig) -> Result<()> {
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            cfg.learning_rate = lr;
        }
        if let Some(o) = &self.optimizer {
            cfg.optimizer = match o.as_str() {
                "sgd" => OptimizerKind::Sgd,
                "adam" => OptimizerKind::Adam,
                _ => bail!("unknown optimizer {o:?}"),
            };
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(())
    }
}

#[derive(Args)]
struct ModelFlags {
    /// naive, semi-semantic, classifier-confidence or fully-semantic
    #[arg(long)]
    detector: Option<String>,
    #[arg(long)]
    autoencoder: Option<PathBuf>,
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Threshold JSON written by `calibrate`.
    #[arg(long)]
    threshold: Option<PathBuf>,
    #[arg(long)]
    min_probability: Option<f64>,
}

fn parse_detector(s: &str) -> Result<DetectorKind> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).with_context(|| format!("unknown detector {s:?}"))
}

fn read_threshold(path: &Path) -> Result<Threshold> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

impl ModelFlags {
    fn apply(&self, cfg: &mut MonitorConfig) -> Result<()> {
        if let Some(d) = &self.detector {
            cfg.detector = parse_detector(d)?;
        }
        if let Some(p) = &self.autoencoder {
            cfg.autoencoder = Some(p.clone());
        }
        if let Some(p) = &self.classifier {
            cfg.classifier = Some(p.clone());
        }
        if let Some(p) = &self.threshold {
            cfg.threshold = Some(read_threshold(p)?);
        }
        if let Some(m) = self.min_probability {
            cfg.min_probability = m;
        }
        Ok(())
    }

    fn config(&self) -> Result<MonitorConfig> {
        let mut cfg = MonitorConfig {
            detector: DetectorKind::Naive,
            autoencoder: None,
            classifier: None,
            threshold: None,
            min_probability: novelty_core::detectors::DEFAULT_MIN_PROBABILITY,
            sink: PathBuf::from("records.nrec"),
            transport: Transport::Stdio,
        };
        if self.detector.is_none() {
            bail!("--detector is required without --config");
        }
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    /// One of richter-repro, naive, classifier-baseline, semi-semantic-first,
    /// semi-semantic-best, fully-semantic.
    #[arg(long)]
    profile: String,
    /// JSON profile file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Defaults to runs/<profile>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "runs/cache")]
    cache: PathBuf,
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    topology: Option<TopologySpec>,
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long)]
    min_probability: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    classifier_epochs: Option<usize>,
    /// Use the long 3000-epoch autoencoder schedule without early stopping.
    #[arg(long)]
    faithful: bool,
    /// Round the lower latent bound down instead of up.
    #[arg(long)]
    floor: bool,
}

impl RunArgs {
    fn profile(&self) -> Result<ExperimentProfile> {
        let name: ProfileName = self.profile.parse()?;
        let mut p = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentProfile::builtin(name),
        };
        p.name = name;
        if let Some(s) = self.seed {
            p = p.with_seed(s);
        }
        if self.faithful && p.autoencoder_training.is_some() {
            p.autoencoder_training = Some(faithful_autoencoder_training(p.seed));
        }
        if let Some(t) = &self.topology {
            p.topology = Some(t.clone());
        }
        if let Some(v) = self.percentile {
            p.percentile = v;
        }
        if let Some(v) = self.min_probability {
            p.min_probability = v;
        }
        if let (Some(e), Some(cfg)) = (self.epochs, p.autoencoder_training.as_mut()) {
            cfg.epochs = e;
        }
        if let (Some(e), Some(cfg)) = (self.classifier_epochs, p.classifier_training.as_mut()) {
            cfg.epochs = e;
        }
        if self.floor {
            p.latent_rounding = LatentRounding::Floor;
        }
        Ok(p)
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_current_thread().enable_all().build()?)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Split {
            data,
            profile,
            seed,
            out,
        } => {
            let mut p = ExperimentProfile::builtin(profile.parse()?);
            if let Some(s) = seed {
                p = p.with_seed(s);
            }
            let corpus: Corpus = load_corpus(&data, &p.partition.letters)?;
            let split = pipeline::split_for(&p, &corpus)?;
            write_json(&split.manifest, &out)?;
            println!(
                "train {} test {} eval {}/{}/{} -> {}",
                split.train.len(),
                split.test.len(),
                split.eval_known.len(),
                split.eval_unknown.len(),
                split.eval_letters.len(),
                out.display()
            );
        }
        Command::TrainAe {
            input,
            topology,
            train,
            faithful,
            out,
        } => {
            let split = input.load()?;
            let seed = split.manifest.seed;
            let mut cfg = if faithful {
                faithful_autoencoder_training(seed)
            } else {
                novelty_cli::profile::autoencoder_training(seed)
            };
            train.apply(&mut cfg)?;
            let (net, meta) = train_autoencoder(&split, &topology, &cfg)?;
            save_checkpoint(&net, &meta, &out)?;
            println!(
                "{} epochs, final loss {:.6} -> {}",
                meta.epochs_run,
                meta.final_loss,
                out.display()
            );
        }
        Command::TrainClassifier { input, train, out } => {
            let split = input.load()?;
            let mut cfg = novelty_cli::profile::classifier_training(split.manifest.seed);
            train.apply(&mut cfg)?;
            let (net, meta) = train_classifier(&split, &cfg)?;
            save_checkpoint(&net, &meta, &out)?;
            println!(
                "{} epochs, final loss {:.6} -> {}",
                meta.epochs_run,
                meta.final_loss,
                out.display()
            );
        }
        Command::Calibrate {
            input,
            autoencoder,
            percentile,
            out,
        } => {
            let split = input.load()?;
            let ae = load_checkpoint(&autoencoder)?.network;
            let t = calibrate(&ae, &split.train, percentile)?;
            write_json(&t, &out)?;
            println!("threshold {} -> {}", t.value, out.display());
        }
        Command::Evaluate { input, models, out } => {
            let split = input.load()?;
            let cfg = models.config()?;
            let detector: Detector = cfg.load_detector()?;
            let evaluation = evaluate_detector(&detector, &split)?;
            std::fs::create_dir_all(&out)?;
            write_json(&evaluation, &out.join("evaluation.json"))?;
            std::fs::write(out.join("table.csv"), evaluation.table.to_csv())?;
            std::fs::write(out.join("table.md"), evaluation.table.to_markdown())?;
            print!("{}", evaluation.table.to_markdown());
        }
        Command::EnumerateTopologies {
            classes,
            io,
            floor,
            json,
        } => {
            let rounding = if floor {
                LatentRounding::Floor
            } else {
                LatentRounding::Ceil
            };
            let all = enumerate_topologies(classes, io, rounding)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&all)?);
            } else {
                let mut out = std::io::stdout().lock();
                for t in all {
                    // a closed pipe (e.g. `| head`) just ends the listing
                    if writeln!(out, "{t}").is_err() {
                        break;
                    }
                }
            }
        }
        Command::Run(args) => {
            let profile = args.profile()?;
            let paths = RunPaths {
                data_dir: args.data.clone(),
                out_dir: args
                    .out
                    .clone()
                    .unwrap_or_else(|| Path::new("runs").join(profile.name.as_str())),
                cache_dir: (!args.no_cache).then(|| args.cache.clone()),
            };
            let report = novelty_cli::run_profile(&profile, &paths)?;
            print!("{}", report.to_markdown());
            eprintln!("wrote {}", paths.out_dir.display());
        }
        Command::Report { input, out, format } => {
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let report: Report = serde_json::from_str(&text)?;
            let formats = format.iter().map(|f| f.parse()).collect::<Result<Vec<Format>, _>>()?;
            for path in emit_report(&report, &out, &formats)? {
                println!("{}", path.display());
            }
        }
        Command::Serve {
            config,
            models,
            sink,
            tcp,
            http,
        } => {
            let mut cfg = match &config {
                Some(path) => {
                    let mut c = MonitorConfig::from_file(path)?;
                    models.apply(&mut c)?;
                    c
                }
                None => models.config()?,
            };
            if let Some(s) = sink {
                cfg.sink = s;
            }
            if let Some(addr) = tcp {
                cfg.transport = Transport::Tcp { addr };
            } else if let Some(addr) = http {
                cfg.transport = Transport::Http { addr };
            }
            runtime()?.block_on(async {
                let server = Server::bind(&cfg).await?;
                if let Some(addr) = server.local_addr() {
                    // Machine-readable so scripts can discover an ephemeral port.
                    println!("listening {addr}");
                }
                server
                    .run(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
        Command::Query { addr, images } => {
            runtime()?.block_on(async {
                let mut client = MonitorClient::connect(addr.as_str()).await?;
                for (i, path) in images.iter().enumerate() {
                    let bytes = read_image(path)?;
                    let response = client.detect(i, &bytes).await?;
                    println!("{}\t{}", path.display(), serde_json::to_string(&response)?);
                }
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}
