use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use terraseg_bench::Inputs;
use terraseg_core::classify::{Dataset, MlpModel, CANONICAL_LAYERS};
use terraseg_core::pipeline::{segment_features, segment_image};
use terraseg_core::surf::{extract_from_integral, hessian_responses};
use terraseg_core::texmodel::variability_matrix;
use terraseg_core::track::{match_features, ransac_f};

fn stages(c: &mut Criterion) {
    let inp = Inputs::new();
    let img = &inp.mosaic.image;
    let ii = img.integral();
    let cfg = &inp.cfg;

    c.bench_function("integral_image", |b| b.iter(|| black_box(img).integral()));
    c.bench_function("hessian_stack", |b| b.iter(|| hessian_responses(black_box(&ii), &cfg.detector).unwrap()));
    c.bench_function("extract", |b| b.iter(|| extract_from_integral(black_box(&ii), &cfg.detector).unwrap()));

    let features = &inp.segmented.features;
    c.bench_function("nn_classify_frame", |b| {
        b.iter(|| {
            let mut f = features.clone();
            inp.nn.classify(&mut f);
            f
        })
    });
    c.bench_function("segment_map", |b| {
        b.iter(|| segment_features(img.width(), img.height(), black_box(features), &cfg.segment).unwrap())
    });
    c.bench_function("segment_image", |b| b.iter(|| segment_image(black_box(img), &inp.nn, cfg).unwrap()));
    c.bench_function("variability_matrix", |b| b.iter(|| variability_matrix(black_box(&inp.training)).unwrap()));

    c.bench_function("match_features", |b| {
        b.iter(|| match_features(black_box(features), features, cfg.track.radius, cfg.track.theta))
    });
    let corr = inp.correspondences();
    c.bench_function("ransac_f", |b| b.iter(|| ransac_f(black_box(&corr), &cfg.track.ransac).unwrap()));

    let ds = Dataset::from_training(&inp.training);
    let model = MlpModel::zeros(&CANONICAL_LAYERS);
    c.bench_function("mlp_gradient", |b| b.iter(|| model.gradient(black_box(&ds))));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = stages
}
criterion_main!(benches);
