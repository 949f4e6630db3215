use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use terraseg_core::config::{ClassifierKind, Config, ConfigError};
use terraseg_core::image::load_pgm;
use terraseg_core::pipeline::{
    bench_match, extract_frame, load_classifier, par_map, run_benchmark, segment_image, train_model, DetectorVariant,
    MatchRow, PipelineError, PoseRecord, Tracker,
};
use terraseg_core::segment::{error_rate, stats_table, ErrorStats, SegmentationMap};
use terraseg_core::surf::{read_features, write_features};
use terraseg_core::synth::{mosaic_set, translating_sequence, STREAM_TEST, STREAM_TRAIN};
use terraseg_core::texmodel::{LabelMap, TrainingSet};
use terraseg_core::track::TrackRecord;

#[derive(Parser, Debug)]
#[command(name = "terraseg", version, about = "Terrain texture segmentation and tracking")]
struct Cli {
    /// TOML configuration file; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set segment.radius=32`. Repeatable;
    /// applied after the file, before command flags.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Nn,
    Mlp,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic mosaics and their label maps.
    GenMosaic {
        #[arg(long)]
        out_dir: PathBuf,
        /// Number of independent mosaics.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Seed stream; train and test mosaics never coincide.
        #[arg(long, value_enum, default_value = "train")]
        split: Split,
        /// Write a panning sequence of this many frames instead.
        #[arg(long)]
        sequence: Option<usize>,
        /// Pixels per frame for `--sequence`.
        #[arg(long, default_value_t = 16)]
        step: usize,
        /// File name prefix; files are `<prefix>_NNN.pgm` and `<prefix>_NNN_labels.pgm`.
        #[arg(long, default_value = "mosaic")]
        prefix: String,
    },
    /// Detect and describe features; label them when maps are given.
    Extract {
        /// PGM images.
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// One label map per image, in the same order.
        #[arg(long, num_args = 1..)]
        labels: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write all features pooled into this file.
        #[arg(long)]
        aggregate: Option<PathBuf>,
    },
    /// Filter a labeled feature set and train a classifier.
    Train {
        /// Labeled feature CSVs, pooled.
        #[arg(required = true)]
        features: Vec<PathBuf>,
        /// Defaults to the configured classifier.
        #[arg(long, value_enum)]
        classifier: Option<Kind>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Segment images; with ground truth, report error statistics.
    Segment {
        /// PGM images.
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// `.json` network or labeled feature CSV.
        #[arg(long)]
        model: PathBuf,
        /// Label maps, one per image, to score against.
        #[arg(long, num_args = 1..)]
        truth: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Set name for the statistics block.
        #[arg(long, default_value = "test")]
        set_name: String,
    },
    /// Track features through an ordered frame sequence.
    Track {
        /// PGM frames in temporal order.
        #[arg(required = true, num_args = 2..)]
        frames: Vec<PathBuf>,
        /// `.json` network or labeled feature CSV.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare detector variants on image pairs.
    BenchMatch {
        /// Images taken two at a time as pairs.
        #[arg(required = true, num_args = 2..)]
        images: Vec<PathBuf>,
        /// `name` or `name:key=value,...` with keys octaves, threshold,
        /// cell, max_features. Repeatable; defaults to the configured detector.
        #[arg(long = "variant")]
        variants: Vec<String>,
        /// CSV destination; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error statistics of segmentation maps, or the synthetic benchmark.
    Eval {
        /// Predicted class maps (PGM, values 0..=3).
        #[arg(long, num_args = 1.., required_unless_present = "synthetic")]
        pred: Vec<PathBuf>,
        /// Ground-truth label maps, one per prediction.
        #[arg(long, num_args = 1.., required_unless_present = "synthetic")]
        truth: Vec<PathBuf>,
        /// Classifier name for the statistics block.
        #[arg(long, default_value = "model")]
        name: String,
        /// Set name for the statistics block.
        #[arg(long, default_value = "test")]
        set_name: String,
        /// Generate mosaics, train both classifiers and evaluate them.
        #[arg(long, conflicts_with_all = ["pred", "truth"])]
        synthetic: bool,
        /// CSV destination; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit status 1 for usage problems, 2 for bad or unreadable data.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Data(m) => f.write_str(m),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Data(e.to_string())
            }
        }
    )*};
}
data_error!(
    PipelineError,
    std::io::Error,
    terraseg_core::image::PgmError,
    terraseg_core::texmodel::TexModelError,
    terraseg_core::surf::FeatureCsvError,
    terraseg_core::segment::SegmentError,
    terraseg_core::synth::SynthError,
    terraseg_core::classify::ClassifyError
);

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Override(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn load_config(cli: &Cli, extra: &[String]) -> Result<Config> {
    let base = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    overrides.extend_from_slice(extra);
    Ok(base.with_overrides(&overrides)?)
}

fn read_image(p: &Path) -> Result<terraseg_core::image::GrayImage> {
    load_pgm(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn read_labels(p: &Path) -> Result<LabelMap> {
    LabelMap::load(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                ensure_dir(dir)?;
            }
            fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn paired(what: &str, a: &[PathBuf], b: &[PathBuf]) -> Result<()> {
    if !b.is_empty() && a.len() != b.len() {
        return Err(CliError::Usage(format!("{} images but {} {what}", a.len(), b.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenMosaic {
            out_dir,
            count,
            split,
            sequence,
            step,
            prefix,
        } => {
            let cfg = load_config(&cli, &[])?;
            ensure_dir(out_dir)?;
            let mosaics = match sequence {
                Some(n) => translating_sequence(&cfg.mosaic, *n, *step)?,
                None => {
                    let stream = match split {
                        Split::Train => STREAM_TRAIN,
                        Split::Test => STREAM_TEST,
                    };
                    mosaic_set(&cfg.mosaic, stream, *count)?
                }
            };
            for (i, m) in mosaics.iter().enumerate() {
                terraseg_core::image::save_pgm(&m.image, out_dir.join(format!("{prefix}_{i:03}.pgm")))?;
                m.labels.save(out_dir.join(format!("{prefix}_{i:03}_labels.pgm")))?;
            }
            fs::write(out_dir.join(format!("{prefix}_config.toml")), cfg.to_toml())?;
            info!("wrote {} mosaics to {}", mosaics.len(), out_dir.display());
        }
        Command::Extract {
            images,
            labels,
            out_dir,
            aggregate,
        } => {
            paired("label maps", images, labels)?;
            let cfg = load_config(&cli, &[])?;
            ensure_dir(out_dir)?;
            let jobs: Vec<(PathBuf, Option<PathBuf>)> = images
                .iter()
                .enumerate()
                .map(|(i, p)| (p.clone(), labels.get(i).cloned()))
                .collect();
            let results = par_map(&jobs, |(img, lab)| -> Result<_> {
                let image = read_image(img)?;
                let map = lab.as_deref().map(read_labels).transpose()?;
                Ok(extract_frame(&image, map.as_ref(), &cfg.detector)?)
            });
            let mut all = Vec::new();
            for ((img, _), feats) in jobs.iter().zip(results) {
                let feats = feats?;
                write_features(&feats, out_dir.join(format!("{}.csv", stem(img))))?;
                info!("{}: {} features", img.display(), feats.len());
                all.extend(feats);
            }
            if !labels.is_empty() {
                let counts = TrainingSet::new(all.clone()).counts();
                eprintln!(
                    "{} features: grass {}, trees {}, road {}",
                    all.len(),
                    counts[0],
                    counts[1],
                    counts[2]
                );
            }
            if let Some(p) = aggregate {
                write_features(&all, p)?;
            }
        }
        Command::Train {
            features,
            classifier,
            out_dir,
        } => {
            let extra: Vec<String> = classifier
                .map(|k| format!("classifier={}", if matches!(k, Kind::Nn) { "nn" } else { "mlp" }))
                .into_iter()
                .collect();
            let cfg = load_config(&cli, &extra)?;
            ensure_dir(out_dir)?;
            let mut ts = TrainingSet::default();
            for f in features {
                ts.extend(TrainingSet::new(
                    read_features(f).map_err(|e| CliError::Data(format!("{}: {e}", f.display())))?,
                ));
            }
            let rep = train_model(&ts, &cfg, cfg.classifier)?;
            match &rep.model {
                Some(m) => m.save(out_dir.join("model.json"))?,
                None => write_features(rep.training.features(), out_dir.join("model.csv"))?,
            }
            if cfg.classifier == ClassifierKind::Mlp {
                let mut log = String::from("epoch,loss\n");
                for (e, l) in &rep.history {
                    log.push_str(&format!("{e},{l:.9}\n"));
                }
                fs::write(out_dir.join("training_log.csv"), log)?;
            }
            fs::write(out_dir.join("variability.csv"), rep.variability.to_csv())?;
            if let Some(v) = &rep.variability_dense {
                fs::write(out_dir.join("variability_dense.csv"), v.to_csv())?;
            }
            if let Some(v) = &rep.variability_sparse {
                fs::write(out_dir.join("variability_nondense.csv"), v.to_csv())?;
            }
            if let Some(p) = &rep.pca {
                fs::write(out_dir.join("pca.csv"), p.to_csv(rep.training.features()))?;
            }
            fs::write(out_dir.join("config.toml"), cfg.to_toml())?;
            eprintln!(
                "trained {} on {} features ({} isolated removed)",
                rep.classifier.name(),
                rep.training.len(),
                rep.removed
            );
        }
        Command::Segment {
            images,
            model,
            truth,
            out_dir,
            set_name,
        } => {
            paired("truth maps", images, truth)?;
            let cfg = load_config(&cli, &[])?;
            let classifier = load_classifier(model, cfg.nn.tau)?;
            ensure_dir(out_dir)?;
            let mut rates = Vec::new();
            let mut per_image = String::from("image,error\n");
            for (i, path) in images.iter().enumerate() {
                let img = read_image(path)?;
                let s = segment_image(&img, &classifier, &cfg)?;
                let name = stem(path);
                s.map.save_pgm(out_dir.join(format!("{name}_seg.pgm")))?;
                s.map.save_ppm(out_dir.join(format!("{name}_seg.ppm")))?;
                if let Some(t) = truth.get(i) {
                    let r = error_rate(&s.map, &read_labels(t)?)?;
                    per_image.push_str(&format!("{name},{:.4}\n", 100.0 * r));
                    rates.push(r);
                }
            }
            if !rates.is_empty() {
                let stats = ErrorStats::from_rates(&rates)?;
                let table = stats_table(&[(classifier.name(), set_name, stats)]);
                fs::write(out_dir.join("errors.csv"), per_image)?;
                fs::write(out_dir.join("stats.csv"), &table)?;
                print!("{table}");
            }
        }
        Command::Track { frames, model, out_dir } => {
            let cfg = load_config(&cli, &[])?;
            let classifier = load_classifier(model, cfg.nn.tau)?;
            ensure_dir(out_dir)?;
            let mut tracker = Tracker::new(&classifier, &cfg)?;
            let mut track_log = format!("{},transferred,disagreement\n", TrackRecord::HEADER);
            let mut pose_log = format!("{}\n", PoseRecord::HEADER);
            for (i, path) in frames.iter().enumerate() {
                let img = read_image(path)?;
                let out = tracker.step(&img)?;
                out.segmented.map.save_pgm(out_dir.join(format!("frame_{i:03}_seg.pgm")))?;
                out.segmented.map.save_ppm(out_dir.join(format!("frame_{i:03}_seg.ppm")))?;
                let dis = out.disagreement.map_or(String::new(), |d| format!("{d:.6}"));
                track_log.push_str(&format!("{},{},{dis}\n", out.record.csv_row(), out.transferred));
                pose_log.push_str(&format!("{}\n", out.pose.csv_row()));
            }
            fs::write(out_dir.join("track.csv"), track_log)?;
            fs::write(out_dir.join("pose.csv"), pose_log)?;
        }
        Command::BenchMatch { images, variants, out } => {
            if images.len() % 2 != 0 {
                return Err(CliError::Usage(format!("{} images do not form pairs", images.len())));
            }
            let cfg = load_config(&cli, &[])?;
            let variants = if variants.is_empty() {
                vec![DetectorVariant {
                    name: "default".into(),
                    params: cfg.detector,
                }]
            } else {
                variants
                    .iter()
                    .map(|v| DetectorVariant::parse(v, &cfg.detector).map_err(CliError::Usage))
                    .collect::<Result<Vec<_>>>()?
            };
            let pairs = images
                .chunks(2)
                .map(|p| Ok((read_image(&p[0])?, read_image(&p[1])?)))
                .collect::<Result<Vec<_>>>()?;
            let rows = bench_match(&pairs, &variants, &cfg)?;
            let mut csv = format!("{}\n", MatchRow::HEADER);
            for r in rows {
                csv.push_str(&format!("{}\n", r.csv_row()));
            }
            write_or_print(out.as_deref(), &csv)?;
        }
        Command::Eval {
            pred,
            truth,
            name,
            set_name,
            synthetic,
            out,
        } => {
            let table = if *synthetic {
                let cfg = load_config(&cli, &[])?;
                run_benchmark(&cfg)?.table()
            } else {
                if pred.len() != truth.len() {
                    return Err(CliError::Usage(format!("{} maps but {} truth maps", pred.len(), truth.len())));
                }
                let rates = pred
                    .iter()
                    .zip(truth)
                    .map(|(p, t)| {
                        let p = read_labels(p)?;
                        let seg = SegmentationMap::from_classes(p.width(), p.height(), p.labels().to_vec());
                        Ok(error_rate(&seg, &read_labels(t)?)?)
                    })
                    .collect::<Result<Vec<_>>>()?;
                stats_table(&[(name, set_name, ErrorStats::from_rates(&rates)?)])
            };
            write_or_print(out.as_deref(), &table)?;
        }
    }
    Ok(())
}
