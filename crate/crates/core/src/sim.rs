//! Synthetic sensor simulator: planted PRNU, procedural scenes, exposure offsets, shot and
//! read noise, clipping and 8-bit quantization.
//!
//! Every random draw comes from a ChaCha stream keyed by an explicit seed, and corpus images
//! derive their seeds from `(corpus seed, camera, scene, exposure)` alone, so rendering order
//! and worker count never change a pixel.

use std::path::Path;

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ImageSource, Manifest, ManifestRow};
use crate::error::{Error, Result};
use crate::exposure::{OVER_RATIOS, UNDER_RATIOS};
use crate::image::{ExposureType, Image, ImageMeta};

/// SplitMix64 finalizer; turns structured seed material into well-spread stream keys.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent seed from a base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    /// Signal-independent noise standard deviation, intensity units.
    pub read_std: f64,
    /// Shot-noise coefficient: std grows as `shot_scale * sqrt(signal)`.
    pub shot_scale: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            read_std: 2.0,
            shot_scale: 0.2,
        }
    }
}

impl SensorNoise {
    pub const NONE: SensorNoise = SensorNoise {
        read_std: 0.0,
        shot_scale: 0.0,
    };
}

#[derive(Debug, Clone)]
pub struct SyntheticCamera {
    k_true: Array2<f64>,
    k_strength: f64,
    seed: u64,
    pub noise: SensorNoise,
    pub camera_id: String,
    pub camera_model: String,
    pub f_number: f64,
}

impl SyntheticCamera {
    /// Gaussian PRNU field rescaled to mean exactly 0 and standard deviation `k_strength`.
    pub fn new(shape: (usize, usize), k_strength: f64, seed: u64) -> Self {
        let k_true = if k_strength > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x4b]));
            let raw: Array2<f64> = Array2::from_shape_simple_fn(shape, || StandardNormal.sample(&mut rng));
            let mean = raw.sum() / raw.len() as f64;
            let centred = raw.mapv(|v| v - mean);
            let std = (centred.iter().map(|v| v * v).sum::<f64>() / centred.len() as f64).sqrt();
            centred * (k_strength / std)
        } else {
            Array2::zeros(shape)
        };
        SyntheticCamera {
            k_true,
            k_strength,
            seed,
            noise: SensorNoise::default(),
            camera_id: format!("sim-{seed:016x}"),
            camera_model: "sim-model".into(),
            f_number: 1.8,
        }
    }

    pub fn with_noise(mut self, noise: SensorNoise) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_ids(mut self, camera_id: impl Into<String>, camera_model: impl Into<String>) -> Self {
        self.camera_id = camera_id.into();
        self.camera_model = camera_model.into();
        self
    }

    pub fn k_true(&self) -> &Array2<f64> {
        &self.k_true
    }

    pub fn k_strength(&self) -> f64 {
        self.k_strength
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shape(&self) -> (usize, usize) {
        self.k_true.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneGenerator {
    SmoothGradient,
    TexturePatches,
    NaturalMix,
}

/// Scene-level brightness range; each scene draws its level log-uniformly from it.
pub const SCENE_LEVEL_RANGE: (f64, f64) = (12.0, 220.0);
/// Darkest point of a scene relative to its level; the pattern spans `[floor, 1] * level`.
const SCENE_FLOOR: f64 = 0.6;

/// Noiseless scene radiance `I0`, in intensity units at auto exposure.
#[derive(Debug, Clone)]
pub struct SceneModel {
    i0: Array2<f64>,
    pub generator: SceneGenerator,
    pub seed: u64,
    pub scene_id: String,
    /// Brightest intensity of the scene at auto exposure.
    pub level: f64,
}

fn normalize_unit(mut p: Array2<f64>) -> Array2<f64> {
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 0.0 {
        p.mapv_inplace(|v| (v - lo) / (hi - lo));
    } else {
        p.fill(0.5);
    }
    p
}

fn gradient_pattern(shape: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (rows, cols) = shape;
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (dy, dx) = angle.sin_cos();
    let wave = rng.random_range(0.5..2.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    Array2::from_shape_fn(shape, |(r, c)| {
        let y = r as f64 / rows as f64;
        let x = c as f64 / cols as f64;
        (dx * x + dy * y) + 0.3 * (std::f64::consts::TAU * wave * (x - y) + phase).sin()
    })
}

fn patch_pattern(shape: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (rows, cols) = shape;
    let mut p = Array2::from_elem(shape, rng.random_range(0.0..1.0));
    for _ in 0..rng.random_range(4..10) {
        let h = rng.random_range(rows / 8..rows / 2);
        let w = rng.random_range(cols / 8..cols / 2);
        let r0 = rng.random_range(0..rows - h);
        let c0 = rng.random_range(0..cols - w);
        let v = rng.random_range(0.0..1.0);
        p.slice_mut(ndarray::s![r0..r0 + h, c0..c0 + w]).fill(v);
    }
    p
}

fn blob_pattern(shape: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (rows, cols) = shape;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(3..7))
        .map(|_| {
            (
                rng.random_range(0.0..rows as f64),
                rng.random_range(0.0..cols as f64),
                rng.random_range(0.05..0.25) * rows.min(cols) as f64,
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    Array2::from_shape_fn(shape, |(r, c)| {
        blobs
            .iter()
            .map(|&(br, bc, s, a)| {
                let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum()
    })
}

impl SceneModel {
    /// Procedural scene with a seeded brightness level drawn from [`SCENE_LEVEL_RANGE`].
    pub fn generate(generator: SceneGenerator, shape: (usize, usize), seed: u64) -> Self {
        Self::with_level(generator, shape, seed, scene_level(seed))
    }

    pub fn with_level(generator: SceneGenerator, shape: (usize, usize), seed: u64, level: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5d]));
        let pattern = match generator {
            SceneGenerator::SmoothGradient => normalize_unit(gradient_pattern(shape, &mut rng)),
            SceneGenerator::TexturePatches => {
                let patches = normalize_unit(patch_pattern(shape, &mut rng));
                let texture: Array2<f64> = Array2::from_shape_simple_fn(shape, || rng.random_range(-1.0..1.0));
                normalize_unit(patches + texture * 0.02)
            }
            SceneGenerator::NaturalMix => {
                let g = normalize_unit(gradient_pattern(shape, &mut rng));
                let b = normalize_unit(blob_pattern(shape, &mut rng));
                let p = normalize_unit(patch_pattern(shape, &mut rng));
                normalize_unit(g * 0.5 + b * 0.3 + p * 0.2)
            }
        };
        let i0 = pattern.mapv(|p| level * (SCENE_FLOOR + (1.0 - SCENE_FLOOR) * p));
        SceneModel {
            i0,
            generator,
            seed,
            scene_id: format!("scene-{seed:016x}"),
            level,
        }
    }

    /// Wrap an explicit radiance map (values are clamped into `[0, 255]`).
    pub fn from_radiance(i0: Array2<f64>, scene_id: impl Into<String>) -> Self {
        let i0 = i0.mapv(|v| v.clamp(0.0, 255.0));
        let level = i0.iter().copied().fold(0.0, f64::max);
        SceneModel {
            i0,
            generator: SceneGenerator::SmoothGradient,
            seed: 0,
            scene_id: scene_id.into(),
            level,
        }
    }

    pub fn i0(&self) -> &Array2<f64> {
        &self.i0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.i0.dim()
    }

    pub fn auto_iso(&self) -> f64 {
        auto_iso_for_level(self.level)
    }
}

/// Brightness level that [`SceneModel::generate`] picks for `seed`.
pub fn scene_level(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5c]));
    let (lo, hi) = SCENE_LEVEL_RANGE;
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// ISO an auto-exposing camera would pick: darker scenes get more gain.
pub fn auto_iso_for_level(level: f64) -> f64 {
    let stops = (SCENE_LEVEL_RANGE.1 / level.max(1.0)).log2().round().clamp(0.0, 5.0);
    100.0 * 2f64.powf(stops)
}

/// Cap on the simulated over-exposure brightness gain; tone mapping keeps real cameras well
/// below the raw 3x ISO * 2x time product.
pub const DEFAULT_GAIN_CAP: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureModel {
    pub mode: ExposureType,
    pub brightness_gain: f64,
    /// Multiplier on the shot-noise term; grows with ISO.
    pub iso_noise_scale: f64,
    pub iso_ratio: f64,
    pub time_ratio: f64,
}

impl ExposureModel {
    pub fn auto() -> Self {
        ExposureModel {
            mode: ExposureType::Auto,
            brightness_gain: 1.0,
            iso_noise_scale: 1.0,
            iso_ratio: 1.0,
            time_ratio: 1.0,
        }
    }

    pub fn over(gain_cap: f64) -> Self {
        let (iso, time) = OVER_RATIOS;
        ExposureModel {
            mode: ExposureType::Over,
            brightness_gain: (iso * time).min(gain_cap),
            iso_noise_scale: iso.sqrt(),
            iso_ratio: iso,
            time_ratio: time,
        }
    }

    pub fn under() -> Self {
        let (iso, time) = UNDER_RATIOS;
        ExposureModel {
            mode: ExposureType::Under,
            brightness_gain: iso * time,
            iso_noise_scale: iso.sqrt(),
            iso_ratio: iso,
            time_ratio: time,
        }
    }

    pub fn for_mode(mode: ExposureType, gain_cap: f64) -> Self {
        match mode {
            ExposureType::Auto => Self::auto(),
            ExposureType::Over => Self::over(gain_cap),
            ExposureType::Under => Self::under(),
        }
    }
}

/// Pre-clip sensor output `g*I0 + g*I0*K + noise` as real values.
pub fn render_linear(
    camera: &SyntheticCamera,
    scene: &SceneModel,
    exposure: &ExposureModel,
    seed: u64,
) -> Array2<f64> {
    assert_eq!(camera.shape(), scene.shape(), "camera and scene shapes differ");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7e]));
    let g = exposure.brightness_gain;
    let noise = camera.noise;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    Zip::from(scene.i0()).and(camera.k_true()).map_collect(|&i0, &k| {
        let signal = g * i0;
        let std = noise.read_std + noise.shot_scale * signal.max(0.0).sqrt() * exposure.iso_noise_scale;
        let theta = if std > 0.0 { std * unit.sample(&mut rng) } else { 0.0 };
        signal + signal * k + theta
    })
}

fn quantize(v: f64) -> f64 {
    v.clamp(0.0, 255.0).round()
}

/// Render one 8-bit image of `scene` through `camera`.
pub fn render(camera: &SyntheticCamera, scene: &SceneModel, exposure: &ExposureModel, seed: u64) -> Image {
    let pixels = render_linear(camera, scene, exposure, seed).mapv_into(quantize);
    let auto_iso = scene.auto_iso();
    let meta = ImageMeta {
        camera_id: camera.camera_id.clone(),
        camera_model: camera.camera_model.clone(),
        scene_id: scene.scene_id.clone(),
        exposure_type: exposure.mode,
        iso: auto_iso * exposure.iso_ratio,
        exposure_time_s: AUTO_EXPOSURE_TIME_S * exposure.time_ratio,
        f_number: camera.f_number,
    };
    Image::new(pixels, meta).expect("rendered image satisfies image invariants")
}

const AUTO_EXPOSURE_TIME_S: f64 = 1.0 / 50.0;

/// Fraction of pixels at 0 or 255.
pub fn clipped_fraction(image: &Image) -> f64 {
    let n = image.pixels().iter().filter(|&&v| v <= 0.0 || v >= 255.0).count();
    n as f64 / image.pixels().len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Every camera photographs the same scenes.
    SameScene,
    /// No scene is shared between cameras.
    UniqueScene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_cameras: usize,
    pub scenes_per_camera: usize,
    pub modes: Vec<ExposureType>,
    pub protocol: Protocol,
    /// `(height, width)`
    pub shape: (usize, usize),
    pub seed: u64,
    pub k_strength: f64,
    pub noise: SensorNoise,
    pub generator: SceneGenerator,
    pub gain_cap: f64,
    /// Consecutive cameras sharing one model name.
    pub cameras_per_model: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_cameras: 8,
            scenes_per_camera: 100,
            modes: ExposureType::ALL.to_vec(),
            protocol: Protocol::SameScene,
            shape: (256, 256),
            seed: 0,
            k_strength: 0.02,
            noise: SensorNoise::default(),
            generator: SceneGenerator::NaturalMix,
            gain_cap: DEFAULT_GAIN_CAP,
            cameras_per_model: 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct CorpusSlot {
    camera: usize,
    scene: usize,
    mode: ExposureType,
}

/// Lazily rendered synthetic corpus; images are produced on demand from their seeds.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    config: CorpusConfig,
    cameras: Vec<SyntheticCamera>,
    slots: Vec<CorpusSlot>,
    manifest: Manifest,
}

fn mode_index(mode: ExposureType) -> u64 {
    match mode {
        ExposureType::Auto => 0,
        ExposureType::Over => 1,
        ExposureType::Under => 2,
    }
}

impl SyntheticCorpus {
    pub fn config(&self) -> &CorpusConfig {
        &self.config
    }

    pub fn cameras(&self) -> &[SyntheticCamera] {
        &self.cameras
    }

    fn scene_key(&self, camera: usize, scene: usize) -> u64 {
        match self.config.protocol {
            Protocol::SameScene => scene as u64,
            Protocol::UniqueScene => (camera * self.config.scenes_per_camera + scene) as u64,
        }
    }

    fn scene_seed(&self, camera: usize, scene: usize) -> u64 {
        derive_seed(self.config.seed, &[0x5ce, self.scene_key(camera, scene)])
    }

    pub fn scene(&self, camera: usize, scene: usize) -> SceneModel {
        let key = self.scene_key(camera, scene);
        let mut s = SceneModel::generate(self.config.generator, self.config.shape, self.scene_seed(camera, scene));
        s.scene_id = format!("scene-{key:04}");
        s
    }

    fn render_slot(&self, slot: CorpusSlot) -> Image {
        let camera = &self.cameras[slot.camera];
        let scene = self.scene(slot.camera, slot.scene);
        let exposure = ExposureModel::for_mode(slot.mode, self.config.gain_cap);
        let seed = derive_seed(
            self.config.seed,
            &[0x1a, slot.camera as u64, slot.scene as u64, mode_index(slot.mode)],
        );
        render(camera, &scene, &exposure, seed)
    }

    /// Render every image to 8-bit grayscale PNG under `dir` and write `dir/manifest.csv`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<Manifest> {
        let dir = dir.as_ref();
        self.slots
            .par_iter()
            .zip(self.manifest.rows())
            .try_for_each(|(slot, row)| {
                let img = self.render_slot(*slot);
                let path = dir.join(&row.path);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                crate::dataset::write_png(&img, &path)
            })?;
        let mut manifest = self.manifest.clone();
        manifest.set_base_dir(dir);
        manifest.write(dir.join("manifest.csv"))?;
        Ok(manifest)
    }
}

impl ImageSource for SyntheticCorpus {
    fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn load(&self, row: usize) -> Result<Image> {
        let slot = *self
            .slots
            .get(row)
            .ok_or_else(|| Error::domain(format!("row {row} out of range")))?;
        Ok(self.render_slot(slot))
    }
}

/// Build a corpus of `n_cameras x scenes_per_camera x modes` images.
pub fn render_corpus(config: &CorpusConfig) -> Result<SyntheticCorpus> {
    if config.n_cameras < 2 {
        return Err(Error::domain("a corpus needs at least two cameras"));
    }
    if config.modes.is_empty() || config.scenes_per_camera == 0 {
        return Err(Error::domain("a corpus needs at least one scene and one exposure mode"));
    }
    let (h, w) = config.shape;
    if h < crate::image::MIN_IMAGE_SIDE || w < crate::image::MIN_IMAGE_SIDE {
        return Err(Error::domain(format!("corpus images must be at least 64x64, got {w}x{h}")));
    }
    if !(config.gain_cap.is_finite() && config.gain_cap > 1.0) {
        return Err(Error::domain("over-exposure gain cap must exceed 1"));
    }
    let per_model = config.cameras_per_model.max(1);
    let cameras: Vec<SyntheticCamera> = (0..config.n_cameras)
        .into_par_iter()
        .map(|c| {
            SyntheticCamera::new(config.shape, config.k_strength, derive_seed(config.seed, &[0xca, c as u64]))
                .with_noise(config.noise)
                .with_ids(format!("cam-{c:02}"), format!("model-{:02}", c / per_model))
        })
        .collect();

    let mut slots = Vec::new();
    for camera in 0..config.n_cameras {
        for scene in 0..config.scenes_per_camera {
            for &mode in &config.modes {
                slots.push(CorpusSlot { camera, scene, mode });
            }
        }
    }
    let mut corpus = SyntheticCorpus {
        config: config.clone(),
        cameras,
        slots: Vec::new(),
        manifest: Manifest::default(),
    };
    let rows = slots
        .iter()
        .map(|slot| {
            let cam = &corpus.cameras[slot.camera];
            let scene_key = corpus.scene_key(slot.camera, slot.scene);
            let auto_iso = auto_iso_for_level(scene_level(corpus.scene_seed(slot.camera, slot.scene)));
            let exposure = ExposureModel::for_mode(slot.mode, config.gain_cap);
            let scene_id = format!("scene-{scene_key:04}");
            ManifestRow {
                path: format!("images/{}/{}_{}.png", cam.camera_id, scene_id, slot.mode).into(),
                meta: ImageMeta {
                    camera_id: cam.camera_id.clone(),
                    camera_model: cam.camera_model.clone(),
                    scene_id,
                    exposure_type: slot.mode,
                    iso: auto_iso * exposure.iso_ratio,
                    exposure_time_s: AUTO_EXPOSURE_TIME_S * exposure.time_ratio,
                    f_number: cam.f_number,
                },
            }
        })
        .collect();
    corpus.manifest = Manifest::from_rows(rows)?;
    corpus.slots = slots;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_prnu_statistics() {
        let cam = SyntheticCamera::new((64, 64), 0.02, 3);
        let k = cam.k_true();
        let mean = k.sum() / k.len() as f64;
        let std = (k.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k.len() as f64).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((std / 0.02 - 1.0).abs() < 0.01);
    }

    #[test]
    fn noiseless_unit_gain_render_is_quantized_scene() {
        let cam = SyntheticCamera::new((64, 64), 0.0, 1).with_noise(SensorNoise::NONE);
        let scene = SceneModel::generate(SceneGenerator::NaturalMix, (64, 64), 8);
        let img = render(&cam, &scene, &ExposureModel::auto(), 5);
        let expected = scene.i0().mapv(|v| v.round());
        assert_eq!(img.pixels(), &expected);
    }

    #[test]
    fn exposure_gains_are_ordered() {
        let over = ExposureModel::over(DEFAULT_GAIN_CAP);
        let under = ExposureModel::under();
        assert_eq!(over.brightness_gain, 4.0);
        assert_eq!(under.brightness_gain, 0.25);
        assert!(over.brightness_gain > 1.0 && 1.0 > under.brightness_gain);
        assert_eq!(ExposureModel::over(10.0).brightness_gain, 6.0);
    }

    #[test]
    fn over_render_is_brighter_before_clipping() {
        let cam = SyntheticCamera::new((64, 64), 0.02, 2);
        let scene = SceneModel::generate(SceneGenerator::SmoothGradient, (64, 64), 4);
        let auto = render_linear(&cam, &scene, &ExposureModel::auto(), 1);
        let over = render_linear(&cam, &scene, &ExposureModel::over(DEFAULT_GAIN_CAP), 1);
        assert!(over.mean().unwrap() > auto.mean().unwrap());
    }

    #[test]
    fn strong_gain_clips_bright_scene() {
        let cam = SyntheticCamera::new((128, 128), 0.02, 7);
        let scene = SceneModel::with_level(SceneGenerator::NaturalMix, (128, 128), 3, 200.0);
        let auto = render(&cam, &scene, &ExposureModel::auto(), 9);
        let hot = ExposureModel {
            brightness_gain: 6.0,
            ..ExposureModel::over(10.0)
        };
        let over = render(&cam, &scene, &hot, 9);
        assert!(clipped_fraction(&over) > 0.10);
        assert!(clipped_fraction(&auto) < 0.01);
    }

    #[test]
    fn renders_are_reproducible() {
        let cam = SyntheticCamera::new((64, 64), 0.02, 2);
        let scene = SceneModel::generate(SceneGenerator::TexturePatches, (64, 64), 4);
        let a = render(&cam, &scene, &ExposureModel::under(), 42);
        let b = render(&cam, &scene, &ExposureModel::under(), 42);
        let c = render(&cam, &scene, &ExposureModel::under(), 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn corpus_counts_and_protocols() {
        let cfg = CorpusConfig {
            n_cameras: 2,
            scenes_per_camera: 3,
            shape: (64, 64),
            ..CorpusConfig::default()
        };
        let a = render_corpus(&cfg).unwrap();
        let rows = a.manifest().rows();
        assert_eq!(rows.len(), 18);
        for mode in ExposureType::ALL {
            assert_eq!(rows.iter().filter(|r| r.meta.exposure_type == mode).count(), 6);
        }
        let scenes_of = |m: &Manifest, cam: &str| {
            m.rows()
                .iter()
                .filter(|r| r.meta.camera_id == cam)
                .map(|r| r.meta.scene_id.clone())
                .collect::<std::collections::BTreeSet<_>>()
        };
        assert_eq!(scenes_of(a.manifest(), "cam-00"), scenes_of(a.manifest(), "cam-01"));

        let b = render_corpus(&CorpusConfig {
            protocol: Protocol::UniqueScene,
            ..cfg.clone()
        })
        .unwrap();
        let (s0, s1) = (scenes_of(b.manifest(), "cam-00"), scenes_of(b.manifest(), "cam-01"));
        assert!(s0.is_disjoint(&s1));
        assert_eq!(s0.len() + s1.len(), 6);
    }

    #[test]
    fn corpus_triples_share_scene_content() {
        let corpus = render_corpus(&CorpusConfig {
            n_cameras: 2,
            scenes_per_camera: 2,
            shape: (64, 64),
            ..CorpusConfig::default()
        })
        .unwrap();
        let rows = corpus.manifest().rows();
        let auto = corpus.load(0).unwrap();
        let over = corpus.load(1).unwrap();
        assert_eq!(rows[0].meta.scene_id, rows[1].meta.scene_id);
        assert_eq!(rows[1].meta.exposure_type, ExposureType::Over);
        assert!(over.pixels().mean().unwrap() > auto.pixels().mean().unwrap());
        assert_eq!(corpus.load(3).unwrap(), corpus.load(3).unwrap());
    }

    #[test]
    fn corpus_needs_two_cameras() {
        let cfg = CorpusConfig {
            n_cameras: 1,
            ..CorpusConfig::default()
        };
        assert!(render_corpus(&cfg).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, &[1, 2]);
        assert_ne!(a, derive_seed(1, &[2, 1]));
        assert_ne!(a, derive_seed(2, &[1, 2]));
        assert_eq!(a, derive_seed(1, &[1, 2]));
    }

    #[test]
    fn manifest_metadata_matches_rendered_images() {
        let corpus = render_corpus(&CorpusConfig {
            n_cameras: 2,
            scenes_per_camera: 6,
            shape: (64, 64),
            ..CorpusConfig::default()
        })
        .unwrap();
        for (i, row) in corpus.manifest().rows().iter().enumerate() {
            assert_eq!(corpus.load(i).unwrap().meta(), &row.meta);
        }
    }
}
