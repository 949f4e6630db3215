//! End-to-end pipelines shared by the command line, the benchmarks and
//! the acceptance suite.

use std::path::Path;

use log::{info, warn};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::classify::{train, Classifier, ClassifyError, MlpModel, NnClassifier};
use crate::config::{ClassifierKind, Config};
use crate::image::{GrayImage, PgmError};
use crate::segment::{error_rate, segment, stats_table, ErrorStats, FeatureIndex, SegParams, SegmentError, SegmentationMap};
use crate::surf::{extract, read_features, DetectorParams, Feature, FeatureCsvError, SurfError};
use crate::synth::{mosaic_set, translating_sequence, Mosaic, SynthError, STREAM_TEST, STREAM_TRAIN};
use crate::texmodel::{filter_isolated, label_features, pca2, split_dense, variability_matrix, LabelMap, Pca2, TexModelError, TrainingSet, VariabilityMatrix};
use crate::track::{
    correspondences, decompose, essential, match_features, ransac_f, transfer_memberships, Correspondence, PoseFilter,
    TrackError, TrackParams, TrackRecord,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Surf(#[from] SurfError),
    #[error(transparent)]
    TexModel(#[from] TexModelError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    FeatureCsv(#[from] FeatureCsvError),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, PipelineError>;

/// Maps `f` over `items` on scoped threads, preserving order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let per = items.len().div_ceil(threads).max(1);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(per)
            .map(|chunk| s.spawn(move || chunk.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Extracts features; with a label map, keeps only labeled features.
pub fn extract_frame(img: &GrayImage, labels: Option<&LabelMap>, det: &DetectorParams) -> Result<Vec<Feature>> {
    let features = extract(img, det)?;
    match labels {
        None => Ok(features),
        Some(map) => Ok(label_features(&features, map, img.width(), img.height())?.into_features()),
    }
}

/// Labeled features of a set of mosaics, pooled.
pub fn training_set(mosaics: &[Mosaic], det: &DetectorParams) -> Result<TrainingSet> {
    let parts = par_map(mosaics, |m| extract_frame(&m.image, Some(&m.labels), det));
    let mut ts = TrainingSet::default();
    for p in parts {
        ts.extend(TrainingSet::new(p?));
    }
    Ok(ts)
}

/// Everything produced by training.
pub struct TrainReport {
    pub classifier: Classifier,
    /// Training set after isolated-feature removal.
    pub training: TrainingSet,
    pub removed: usize,
    /// `(epoch, loss)`; empty for the instance-based classifier.
    pub history: Vec<(usize, f64)>,
    pub model: Option<MlpModel>,
    pub variability: VariabilityMatrix,
    /// Variability of the dense and non-dense subsets, when every class is
    /// present in them.
    pub variability_dense: Option<VariabilityMatrix>,
    pub variability_sparse: Option<VariabilityMatrix>,
    pub pca: Option<Pca2>,
}

pub fn train_model(ts: &TrainingSet, cfg: &Config, kind: ClassifierKind) -> Result<TrainReport> {
    if ts.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet.into());
    }
    let training = if cfg.filter.enabled {
        filter_isolated(ts, cfg.filter.k, cfg.filter.quantile)?
    } else {
        ts.clone()
    };
    let removed = ts.len() - training.len();
    info!("training on {} features (removed {removed}), per class {:?}", training.len(), training.counts());
    let (classifier, history, model) = match kind {
        ClassifierKind::Nn => (Classifier::Nn(NnClassifier::new(&training, cfg.nn.tau)?), Vec::new(), None),
        ClassifierKind::Mlp => {
            let t = train(&training, &cfg.train)?;
            if let (Some(first), Some(last)) = (t.history.first(), t.history.last()) {
                info!("loss {:.6} -> {:.6} after {} epochs", first.1, last.1, last.0);
            }
            (Classifier::mlp(t.model.clone())?, t.history, Some(t.model))
        }
    };
    let (dense, sparse) = split_dense(&training, cfg.filter.dense_k);
    Ok(TrainReport {
        classifier,
        variability: variability_matrix(&training)?,
        variability_dense: variability_matrix(&dense).ok(),
        variability_sparse: variability_matrix(&sparse).ok(),
        pca: pca2(training.features()).ok(),
        training,
        removed,
        history,
        model,
    })
}

/// Loads a classifier: `.json` files hold a network, anything else a
/// labeled feature CSV for the nearest-neighbour classifier.
pub fn load_classifier(path: impl AsRef<Path>, tau: Option<f64>) -> Result<Classifier> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = std::fs::read_to_string(path)?;
        Ok(Classifier::mlp(MlpModel::from_json(&text)?)?)
    } else {
        let ts = TrainingSet::new(read_features(path)?);
        Ok(Classifier::Nn(NnClassifier::new(&ts, tau)?))
    }
}

pub fn segment_features(width: usize, height: usize, features: &[Feature], params: &SegParams) -> Result<SegmentationMap> {
    if features.is_empty() {
        warn!("no features in a {width}x{height} frame; every pixel is unknown");
    }
    let index = FeatureIndex::from_features(features, params.radius)?;
    Ok(segment(width, height, &index, params)?)
}

/// One processed frame.
#[derive(Debug, Clone)]
pub struct Segmented {
    pub features: Vec<Feature>,
    pub map: SegmentationMap,
}

/// Extract, classify and segment a single image.
pub fn segment_image(img: &GrayImage, classifier: &Classifier, cfg: &Config) -> Result<Segmented> {
    let mut features = extract_frame(img, None, &cfg.detector)?;
    classifier.classify(&mut features);
    let map = segment_features(img.width(), img.height(), &features, &cfg.segment)?;
    Ok(Segmented { features, map })
}

/// Error rates of a classifier over labeled mosaics.
pub fn error_rates(mosaics: &[Mosaic], classifier: &Classifier, cfg: &Config) -> Result<Vec<f64>> {
    mosaics
        .iter()
        .map(|m| {
            let s = segment_image(&m.image, classifier, cfg)?;
            Ok(error_rate(&s.map, &m.labels)?)
        })
        .collect()
}

/// The synthetic train/test protocol: per-image error statistics of both
/// classifiers on both splits.
pub struct BenchmarkReport {
    pub train_features: usize,
    pub nn_train: ErrorStats,
    pub nn_test: ErrorStats,
    pub mlp_train: ErrorStats,
    pub mlp_test: ErrorStats,
    /// Final MLP training loss.
    pub mlp_loss: f64,
}

impl BenchmarkReport {
    pub fn table(&self) -> String {
        stats_table(&[
            ("NN", "training", self.nn_train),
            ("NN", "test", self.nn_test),
            ("MLP", "training", self.mlp_train),
            ("MLP", "test", self.mlp_test),
        ])
    }
}

pub fn run_benchmark(cfg: &Config) -> Result<BenchmarkReport> {
    let train_set = mosaic_set(&cfg.mosaic, STREAM_TRAIN, cfg.benchmark.train_images)?;
    let test_set = mosaic_set(&cfg.mosaic, STREAM_TEST, cfg.benchmark.test_images)?;
    let ts = training_set(&train_set, &cfg.detector)?;
    let nn = train_model(&ts, cfg, ClassifierKind::Nn)?;
    let mlp = train_model(&ts, cfg, ClassifierKind::Mlp)?;
    let stats = |set: &[Mosaic], c: &Classifier| -> Result<ErrorStats> { Ok(ErrorStats::from_rates(&error_rates(set, c, cfg)?)?) };
    Ok(BenchmarkReport {
        train_features: ts.len(),
        nn_train: stats(&train_set, &nn.classifier)?,
        nn_test: stats(&test_set, &nn.classifier)?,
        mlp_train: stats(&train_set, &mlp.classifier)?,
        mlp_test: stats(&test_set, &mlp.classifier)?,
        mlp_loss: mlp.history.last().map_or(f64::NAN, |h| h.1),
    })
}

/// How the inter-frame motion was explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionStatus {
    /// First frame of the sequence.
    Initial,
    /// Epipolar model and pose recovered; the filter was updated.
    Pose,
    /// Correspondences fit a pure image translation (F is not unique); the
    /// filter only predicted.
    Translation,
    /// Neither model fit; segmentation proceeded frame by frame.
    Lost,
}

impl MotionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Initial => "initial",
            Self::Pose => "pose",
            Self::Translation => "translation",
            Self::Lost => "lost",
        }
    }
}

/// Inliers of the dominant image translation: correspondences whose
/// displacement lies within `tol` of the componentwise median.
pub fn translation_inliers(corr: &[Correspondence], tol: f64) -> (Vec<usize>, [f64; 2]) {
    if corr.is_empty() {
        return (Vec::new(), [0.0, 0.0]);
    }
    let median = |k: usize| {
        let mut v: Vec<f64> = corr.iter().map(|c| c.1[k] - c.0[k]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    let d = [median(0), median(1)];
    let inl = (0..corr.len())
        .filter(|&i| {
            let c = &corr[i];
            let ex = c.1[0] - c.0[0] - d[0];
            let ey = c.1[1] - c.0[1] - d[1];
            (ex * ex + ey * ey).sqrt() < tol
        })
        .collect();
    (inl, d)
}

pub const TRANSLATION_SHARE: f64 = 0.8;

/// Motion between two frames' matched features.
pub struct MotionEstimate {
    pub status: MotionStatus,
    pub inliers: usize,
    /// Relative pose `P′ = A[R|t]` with unit `t`, when recovered.
    pub pose: Option<(Matrix3<f64>, Vector3<f64>)>,
    /// Median image displacement of the matches.
    pub shift: [f64; 2],
}

/// Prefers the translation model when it explains at least
/// [`TRANSLATION_SHARE`] of the epipolar inliers: pure image translation
/// leaves F underdetermined, its extra freedom soaks up a few outliers, and
/// any pose recovered from it would be spurious.
pub fn estimate_motion(corr: &[Correspondence], params: &TrackParams, a: &Matrix3<f64>) -> MotionEstimate {
    let (t_inl, shift) = translation_inliers(corr, params.ransac.tol);
    let fit = ransac_f(corr, &params.ransac);
    let nf = fit.as_ref().map_or(0, |f| f.inliers.len());
    let estimate = |status, inliers, pose| MotionEstimate {
        status,
        inliers,
        pose,
        shift,
    };
    if t_inl.len() >= 8 && t_inl.len() as f64 >= TRANSLATION_SHARE * nf as f64 {
        return estimate(MotionStatus::Translation, t_inl.len(), None);
    }
    match fit {
        Ok(fit) => {
            let inl: Vec<Correspondence> = fit.inliers.iter().map(|&i| corr[i]).collect();
            match decompose(&essential(&fit.f, a), a, &inl) {
                Ok(p) => estimate(MotionStatus::Pose, nf, Some((p.r, p.t))),
                Err(e) => {
                    warn!("epipolar model without a pose: {e}");
                    estimate(MotionStatus::Lost, nf, None)
                }
            }
        }
        Err(e) => {
            warn!("no motion model: {e}");
            estimate(MotionStatus::Lost, 0, None)
        }
    }
}

/// Filter output for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRecord {
    pub frame: usize,
    pub status: MotionStatus,
    /// Camera centre predicted before this frame's measurement.
    pub predicted: [f64; 3],
    pub measured: Option<[f64; 3]>,
    /// Orientation after the update, `[w, x, y, z]`.
    pub quaternion: [f64; 4],
}

impl PoseRecord {
    pub const HEADER: &'static str = "frame,status,pred_x,pred_y,pred_z,meas_x,meas_y,meas_z,qw,qx,qy,qz";

    pub fn csv_row(&self) -> String {
        let m = self.measured.map_or_else(|| ",,".to_string(), |m| format!("{:.9},{:.9},{:.9}", m[0], m[1], m[2]));
        let p = self.predicted;
        let q = self.quaternion;
        format!(
            "{},{},{:.9},{:.9},{:.9},{m},{:.9},{:.9},{:.9},{:.9}",
            self.frame,
            self.status.as_str(),
            p[0],
            p[1],
            p[2],
            q[0],
            q[1],
            q[2],
            q[3]
        )
    }
}

/// One tracked frame.
#[derive(Debug, Clone)]
pub struct TrackedFrame {
    pub segmented: Segmented,
    pub record: TrackRecord,
    pub pose: PoseRecord,
    /// Features whose membership came from the previous frame.
    pub transferred: usize,
    /// Class-map disagreement with the previous frame after compensating
    /// the median image shift.
    pub disagreement: Option<f64>,
}

/// Strictly ordered frame-to-frame tracker.
pub struct Tracker<'a> {
    cfg: &'a Config,
    classifier: &'a Classifier,
    a: Matrix3<f64>,
    filter: Option<PoseFilter>,
    prev: Option<Segmented>,
    frame: usize,
}

impl<'a> Tracker<'a> {
    pub fn new(classifier: &'a Classifier, cfg: &'a Config) -> Result<Self> {
        cfg.track.validate()?;
        cfg.intrinsics.validate()?;
        Ok(Self {
            cfg,
            classifier,
            a: cfg.intrinsics.matrix(),
            filter: None,
            prev: None,
            frame: 0,
        })
    }

    pub fn step(&mut self, img: &GrayImage) -> Result<TrackedFrame> {
        let cfg = self.cfg;
        let frame = self.frame;
        let Some(prev) = self.prev.take() else {
            let seg = segment_image(img, self.classifier, cfg)?;
            let n = seg.features.len();
            let filter = PoseFilter::new(cfg.track.filter, Vector3::zeros(), &Matrix3::identity());
            let pose = PoseRecord {
                frame,
                status: MotionStatus::Initial,
                predicted: [0.0; 3],
                measured: Some([0.0; 3]),
                quaternion: filter.quaternion().into(),
            };
            self.filter = Some(filter);
            self.prev = Some(seg.clone());
            self.frame += 1;
            return Ok(TrackedFrame {
                segmented: seg,
                record: TrackRecord::new(frame, n, n, 0, 0),
                pose,
                transferred: 0,
                disagreement: None,
            });
        };
        if (img.width(), img.height()) != (prev.map.width(), prev.map.height()) {
            return Err(PipelineError::Invalid(format!(
                "frame {frame} is {}x{}, previous frames are {}x{}",
                img.width(),
                img.height(),
                prev.map.width(),
                prev.map.height()
            )));
        }
        let mut features = extract_frame(img, None, &cfg.detector)?;
        let matches = match_features(&prev.features, &features, cfg.track.radius, cfg.track.theta);
        let transferred = transfer_memberships(&matches, &prev.features, &mut features);
        for f in features.iter_mut().filter(|f| f.membership.is_none()) {
            f.membership = Some(self.classifier.membership(&f.desc));
        }
        let map = segment_features(img.width(), img.height(), &features, &cfg.segment)?;

        let corr = correspondences(&matches, &prev.features, &features);
        let motion = estimate_motion(&corr, &cfg.track, &self.a);
        let filter = self.filter.as_mut().expect("initialized on the first frame");
        let (r_prev, c_prev) = (filter.rotation(), filter.centre());
        filter.predict(cfg.track.dt, &self.a);
        let predicted: [f64; 3] = filter.centre().into();
        let measured = motion.pose.map(|(r, t)| {
            let r_k = r * r_prev;
            let c_k = c_prev - r_k.transpose() * (t * cfg.translation_scale);
            filter.update(&c_k, &r_k);
            c_k.into()
        });
        if motion.status != MotionStatus::Pose {
            info!("frame {frame}: {} ({} inliers)", motion.status.as_str(), motion.inliers);
        }
        let pose = PoseRecord {
            frame,
            status: motion.status,
            predicted,
            measured,
            quaternion: filter.quaternion().into(),
        };
        let dx = -motion.shift[0].round() as i64;
        let dy = -motion.shift[1].round() as i64;
        let disagreement = if matches.is_empty() { None } else { prev.map.disagreement_shifted(&map, dx, dy) };
        let record = TrackRecord::new(frame, prev.features.len(), features.len(), matches.len(), motion.inliers);
        let seg = Segmented { features, map };
        self.prev = Some(seg.clone());
        self.frame += 1;
        Ok(TrackedFrame {
            segmented: seg,
            record,
            pose,
            transferred,
            disagreement,
        })
    }
}

pub fn track_sequence(frames: &[GrayImage], classifier: &Classifier, cfg: &Config) -> Result<Vec<TrackedFrame>> {
    if frames.len() < 2 {
        return Err(PipelineError::Invalid(format!("tracking needs at least 2 frames, got {}", frames.len())));
    }
    let mut tracker = Tracker::new(classifier, cfg)?;
    frames.iter().map(|f| tracker.step(f)).collect()
}

/// The synthetic translating sequence described by the config.
pub fn benchmark_sequence(cfg: &Config) -> Result<Vec<Mosaic>> {
    Ok(translating_sequence(&cfg.mosaic, cfg.benchmark.sequence_frames, cfg.benchmark.sequence_step)?)
}

/// A named detector configuration for matching comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorVariant {
    pub name: String,
    pub params: DetectorParams,
}

impl DetectorVariant {
    /// Parses `name` or `name:key=value,key=value` over `base`, with keys
    /// `octaves`, `threshold`, `cell` and `max_features`.
    pub fn parse(spec: &str, base: &DetectorParams) -> std::result::Result<Self, String> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        if name.is_empty() {
            return Err(format!("variant {spec:?} has no name"));
        }
        let mut p = *base;
        for kv in rest.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got {kv:?}"))?;
            let bad = |e: &dyn std::fmt::Display| format!("{k}: {e}");
            match k.trim() {
                "octaves" => p.octaves = v.trim().parse().map_err(|e| bad(&e))?,
                "threshold" => p.threshold = v.trim().parse().map_err(|e| bad(&e))?,
                "cell" => p.cell = v.trim().parse().map_err(|e| bad(&e))?,
                "max_features" => p.max_features = v.trim().parse().map_err(|e| bad(&e))?,
                other => return Err(format!("unknown detector key {other:?}")),
            }
        }
        p.validate().map_err(|e| e.to_string())?;
        Ok(Self {
            name: name.to_string(),
            params: p,
        })
    }
}

/// One comparison row.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRow {
    pub variant: String,
    pub detected1: usize,
    pub detected2: usize,
    pub matched: usize,
    pub inliers: usize,
    /// Inliers over the mean detected count.
    pub ratio: f64,
}

impl MatchRow {
    pub const HEADER: &'static str = "impl,detected1,detected2,matched,inliers,ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6}",
            self.variant, self.detected1, self.detected2, self.matched, self.inliers, self.ratio
        )
    }
}

/// Detect, match and count epipolar inliers for every pair and variant,
/// pair-major.
pub fn bench_match(pairs: &[(GrayImage, GrayImage)], variants: &[DetectorVariant], cfg: &Config) -> Result<Vec<MatchRow>> {
    if pairs.is_empty() || variants.is_empty() {
        return Err(PipelineError::Invalid("need at least one pair and one detector variant".into()));
    }
    let a = cfg.intrinsics.matrix();
    let mut rows = Vec::new();
    for (i1, i2) in pairs {
        for v in variants {
            let f1 = extract(i1, &v.params)?;
            let f2 = extract(i2, &v.params)?;
            let matches = match_features(&f1, &f2, cfg.track.radius, cfg.track.theta);
            let corr = correspondences(&matches, &f1, &f2);
            let motion = estimate_motion(&corr, &cfg.track, &a);
            let rec = TrackRecord::new(0, f1.len(), f2.len(), matches.len(), motion.inliers);
            rows.push(MatchRow {
                variant: v.name.clone(),
                detected1: f1.len(),
                detected2: f2.len(),
                matched: matches.len(),
                inliers: motion.inliers,
                ratio: rec.ratio,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, MosaicSpec};

    fn small_cfg() -> Config {
        let mut c = Config::default();
        c.mosaic = MosaicSpec {
            width: 96,
            height: 96,
            wobble: 4.0,
            ..c.mosaic
        };
        c.segment.radius = 24.0;
        c.train.max_epochs = 30;
        c.train.layers = vec![36, 6, 4, 3];
        c
    }

    #[test]
    fn par_map_keeps_order() {
        let v: Vec<usize> = (0..103).collect();
        assert_eq!(par_map(&v, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(par_map(&Vec::<u8>::new(), |x| *x).is_empty());
    }

    #[test]
    fn labeled_extraction_drops_nothing_on_full_maps() {
        let cfg = small_cfg();
        let m = generate(&cfg.mosaic).unwrap();
        let all = extract_frame(&m.image, None, &cfg.detector).unwrap();
        let lab = extract_frame(&m.image, Some(&m.labels), &cfg.detector).unwrap();
        assert_eq!(all.len(), lab.len());
        assert!(lab.iter().all(|f| (1..=3).contains(&f.label)));
    }

    #[test]
    fn train_and_segment_small() {
        let cfg = small_cfg();
        let set = mosaic_set(&cfg.mosaic, STREAM_TRAIN, 3).unwrap();
        let ts = training_set(&set, &cfg.detector).unwrap();
        for kind in [ClassifierKind::Nn, ClassifierKind::Mlp] {
            let rep = train_model(&ts, &cfg, kind).unwrap();
            assert_eq!(rep.training.len() + rep.removed, ts.len());
            let v = rep.variability.0;
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(v[i][j], v[j][i]);
                }
            }
            if kind == ClassifierKind::Mlp {
                assert!(rep.history.last().unwrap().1 < rep.history[0].1);
            } else {
                assert!(rep.history.is_empty());
            }
            let rates = error_rates(&set[..1], &rep.classifier, &cfg).unwrap();
            assert!(rates[0] < 0.5, "{kind:?} error {}", rates[0]);
        }
    }

    #[test]
    fn blank_image_segments_to_unknown() {
        let cfg = small_cfg();
        let set = mosaic_set(&cfg.mosaic, STREAM_TRAIN, 1).unwrap();
        let ts = training_set(&set, &cfg.detector).unwrap();
        let c = train_model(&ts, &cfg, ClassifierKind::Nn).unwrap().classifier;
        let s = segment_image(&GrayImage::constant(64, 60, 0.5), &c, &cfg).unwrap();
        assert!(s.features.is_empty());
        assert!(s.map.classes().iter().all(|&c| c == 0));
    }

    #[test]
    fn translation_model() {
        let corr: Vec<Correspondence> = (0..20)
            .map(|i| {
                let p = [i as f64 * 7.0, (i * i % 13) as f64 * 5.0];
                let d = if i < 15 { [3.0, -1.0] } else { [40.0 - 11.0 * i as f64, (i * 37 % 23) as f64] };
                (p, [p[0] + d[0], p[1] + d[1]])
            })
            .collect();
        let (inl, d) = translation_inliers(&corr, 0.5);
        assert_eq!(d, [3.0, -1.0]);
        assert_eq!(inl, (0..15).collect::<Vec<_>>());
        let m = estimate_motion(&corr, &TrackParams::default(), &Matrix3::identity());
        assert_eq!(m.status, MotionStatus::Translation);
        assert_eq!(m.inliers, 15);
    }

    #[test]
    fn identical_pair_matches_almost_everything() {
        let cfg = small_cfg();
        let img = generate(&cfg.mosaic).unwrap().image;
        let v = DetectorVariant::parse("base", &cfg.detector).unwrap();
        let rows = bench_match(&[(img.clone(), img)], &[v], &cfg).unwrap();
        let r = &rows[0];
        assert_eq!(r.detected1, r.detected2);
        assert_eq!(r.matched, r.detected1);
        assert!(r.ratio > 0.99, "{r:?}");
    }

    #[test]
    fn variant_parsing() {
        let base = DetectorParams::default();
        let v = DetectorVariant::parse("hi:threshold=2e-4,octaves=3", &base).unwrap();
        assert_eq!(v.name, "hi");
        assert_eq!(v.params.threshold, 2e-4);
        assert_eq!(v.params.octaves, 3);
        assert_eq!(v.params.cell, base.cell);
        assert!(DetectorVariant::parse(":octaves=2", &base).is_err());
        assert!(DetectorVariant::parse("x:bogus=1", &base).is_err());
        assert!(DetectorVariant::parse("x:octaves=9", &base).is_err());
        assert!(DetectorVariant::parse("x:octaves", &base).is_err());
    }

    #[test]
    fn first_tracked_frame_equals_single_segmentation() {
        let cfg = small_cfg();
        let seq = translating_sequence(&cfg.mosaic, 3, 16).unwrap();
        let ts = training_set(&mosaic_set(&cfg.mosaic, STREAM_TRAIN, 3).unwrap(), &cfg.detector).unwrap();
        let c = train_model(&ts, &cfg, ClassifierKind::Nn).unwrap().classifier;
        let frames: Vec<GrayImage> = seq.iter().map(|m| m.image.clone()).collect();
        let out = track_sequence(&frames, &c, &cfg).unwrap();
        let single = segment_image(&frames[0], &c, &cfg).unwrap();
        assert_eq!(out[0].segmented.map, single.map);
        assert_eq!(out[0].segmented.features, single.features);
        assert_eq!(out[0].pose.status, MotionStatus::Initial);
        for f in &out[1..] {
            assert!(f.record.matched > 0);
            assert_eq!(f.transferred, f.record.matched);
        }
        assert!(track_sequence(&frames[..1], &c, &cfg).is_err());
    }
}
