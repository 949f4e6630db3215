//! Procedural terrain mosaics with known per-pixel classes.
//!
//! A frame is split into three horizontal bands with wavy borders: trees at
//! the top, grass in the middle, road at the bottom. Each band carries its
//! own texture: an oriented plaid grating for trees, dense small blobs for
//! grass, and a smooth gradient with sparse larger speckle for road.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::GrayImage;
use crate::texmodel::LabelMap;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid mosaic spec: {0}")]
    Invalid(String),
}

/// Gaussian bumps scattered at a given density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobTexture {
    /// Blobs per pixel.
    pub density: f64,
    pub sigma: [f64; 2],
    /// Absolute amplitude range; the sign is random unless `dark_only`.
    pub amplitude: [f64; 2],
    pub dark_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingTexture {
    pub amplitude: [f64; 2],
    /// Period of the primary grating in pixels.
    pub period: [f64; 2],
    pub angle_deg: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MosaicSpec {
    pub width: usize,
    pub height: usize,
    /// Area shares of grass, trees and road.
    pub fractions: [f64; 3],
    /// Border wave amplitude in pixels.
    pub wobble: f64,
    /// Whole border waves across the frame width (keeps the shares exact).
    pub wobble_cycles: u32,
    /// Standard deviation of additive pixel noise.
    pub noise: f64,
    pub grass: BlobTexture,
    pub trees: GratingTexture,
    pub road_gradient: [f64; 2],
    pub road_speckle: BlobTexture,
    pub seed: u64,
}

impl Default for MosaicSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            fractions: [0.4, 0.3, 0.3],
            wobble: 10.0,
            wobble_cycles: 2,
            noise: 0.01,
            grass: BlobTexture {
                density: 0.025,
                sigma: [1.2, 2.0],
                amplitude: [0.12, 0.25],
                dark_only: false,
            },
            trees: GratingTexture {
                amplitude: [0.15, 0.2],
                period: [8.0, 10.0],
                angle_deg: [20.0, 40.0],
            },
            road_gradient: [0.05, 0.15],
            road_speckle: BlobTexture {
                density: 0.003,
                sigma: [2.5, 4.0],
                amplitude: [0.1, 0.2],
                dark_only: true,
            },
            seed: 1,
        }
    }
}

impl MosaicSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.width < 32 || self.height < 32 {
            return bad(format!("frame {}x{} is below 32x32", self.width, self.height));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.fractions.iter().any(|&f| f < 0.1) {
            return bad(format!("fractions {:?} must each be >= 0.1 and sum to 1", self.fractions));
        }
        // borders must not cross each other or the frame edges
        let min_band = self.fractions.iter().copied().fold(f64::INFINITY, f64::min) * self.height as f64;
        if self.wobble < 0.0 || 2.0 * self.wobble >= min_band {
            return bad(format!("wobble {} too large for the thinnest band", self.wobble));
        }
        if self.wobble_cycles == 0 {
            return bad("wobble_cycles must be at least 1".into());
        }
        for (name, b) in [("grass", &self.grass), ("road_speckle", &self.road_speckle)] {
            if !(b.density >= 0.0 && b.sigma[0] > 0.0 && b.sigma[0] <= b.sigma[1] && b.amplitude[0] <= b.amplitude[1]) {
                return bad(format!("{name} blob ranges are inconsistent"));
            }
        }
        if !(self.trees.period[0] > 2.0 && self.trees.period[0] <= self.trees.period[1]) {
            return bad("tree grating period must exceed 2 px".into());
        }
        if !(self.noise >= 0.0) {
            return bad("noise must be non-negative".into());
        }
        Ok(())
    }
}

/// A rendered frame and its per-pixel classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mosaic {
    pub image: GrayImage,
    pub labels: LabelMap,
}

/// Independent child seed for a named stream and index.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(root) ^ stream) ^ index)
}

pub const STREAM_TRAIN: u64 = 1;
pub const STREAM_TEST: u64 = 2;
pub const STREAM_SEQUENCE: u64 = 3;

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] < r[1] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Class layout: trees on top, grass in the middle, road at the bottom.
fn layout(spec: &MosaicSpec, rng: &mut ChaCha8Rng) -> LabelMap {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let [f_grass, f_trees, _] = spec.fractions;
    let phase = [rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU)];
    let k = spec.wobble_cycles as f64 * std::f64::consts::TAU / w;
    LabelMap::from_fn(spec.width, spec.height, |x, y| {
        let xc = x as f64 + 0.5;
        let yc = y as f64 + 0.5;
        let b1 = h * f_trees + spec.wobble * (k * xc + phase[0]).sin();
        let b2 = h * (f_trees + f_grass) + spec.wobble * (k * xc + phase[1]).sin();
        if yc < b1 {
            2
        } else if yc < b2 {
            1
        } else {
            3
        }
    })
    .expect("labels are 1..=3")
}

fn stamp_blobs(img: &mut [f64], labels: &LabelMap, class: u8, tex: &BlobTexture, rng: &mut ChaCha8Rng) {
    let (w, h) = (labels.width(), labels.height());
    let count = (tex.density * (w * h) as f64).round() as usize;
    for _ in 0..count {
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let sigma = uniform(rng, tex.sigma);
        let mut amp = uniform(rng, tex.amplitude);
        if tex.dark_only || rng.random_bool(0.5) {
            amp = -amp;
        }
        let reach = (3.0 * sigma).ceil() as i64;
        let (x0, y0) = (cx.floor() as i64, cy.floor() as i64);
        for y in (y0 - reach).max(0)..=(y0 + reach).min(h as i64 - 1) {
            for x in (x0 - reach).max(0)..=(x0 + reach).min(w as i64 - 1) {
                let (xu, yu) = (x as usize, y as usize);
                if labels.get(xu, yu) != class {
                    continue;
                }
                let d2 = (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2);
                img[yu * w + xu] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
}

/// Renders one mosaic; identical specs give identical output.
pub fn generate(spec: &MosaicSpec) -> Result<Mosaic, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = layout(spec, &mut rng);
    let (w, h) = (spec.width, spec.height);

    let a1 = uniform(&mut rng, spec.trees.amplitude);
    let p1 = uniform(&mut rng, spec.trees.period);
    let th1 = uniform(&mut rng, spec.trees.angle_deg).to_radians();
    let (a2, p2, th2) = (0.5 * a1, 1.6 * p1, th1 + std::f64::consts::FRAC_PI_2);
    let phase = [rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU)];
    let grad = uniform(&mut rng, spec.road_gradient);

    let mut img: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            match labels.labels()[i] {
                1 => 0.45,
                2 => {
                    let g1 = (std::f64::consts::TAU * (x * th1.cos() + y * th1.sin()) / p1 + phase[0]).sin();
                    let g2 = (std::f64::consts::TAU * (x * th2.cos() + y * th2.sin()) / p2 + phase[1]).sin();
                    0.5 + a1 * g1 + a2 * g2
                }
                _ => 0.6 + grad * (y / h as f64 - 0.5),
            }
        })
        .collect();
    stamp_blobs(&mut img, &labels, 1, &spec.grass, &mut rng);
    stamp_blobs(&mut img, &labels, 3, &spec.road_speckle, &mut rng);
    if spec.noise > 0.0 {
        let n = Normal::new(0.0, spec.noise).expect("finite noise");
        for v in &mut img {
            *v += n.sample(&mut rng);
        }
    }
    let image = GrayImage::from_fn(w, h, |x, y| img[y * w + x]);
    Ok(Mosaic { image, labels })
}

/// `n` mosaics from a shared spec, each with its own derived seed.
pub fn mosaic_set(base: &MosaicSpec, stream: u64, n: usize) -> Result<Vec<Mosaic>, SynthError> {
    (0..n)
        .map(|i| {
            generate(&MosaicSpec {
                seed: derive_seed(base.seed, stream, i as u64),
                ..base.clone()
            })
        })
        .collect()
}

/// Frames of a camera panning sideways over one wide mosaic by `step`
/// pixels per frame.
pub fn translating_sequence(base: &MosaicSpec, frames: usize, step: usize) -> Result<Vec<Mosaic>, SynthError> {
    let world = generate(&MosaicSpec {
        width: base.width + step * frames.saturating_sub(1),
        seed: derive_seed(base.seed, STREAM_SEQUENCE, 0),
        ..base.clone()
    })?;
    Ok((0..frames)
        .map(|i| {
            let x0 = i * step;
            let image = world.image.crop(x0, 0, base.width, base.height).expect("crop inside world");
            let labels = LabelMap::from_fn(base.width, base.height, |x, y| world.labels.get(x0 + x, y)).expect("labels");
            Mosaic { image, labels }
        })
        .collect())
}
