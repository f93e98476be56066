//! Corpus manifests, image decoding and scene-disjoint trial partitions.
//!
//! A manifest is UTF-8 CSV with the header
//! `path,camera_id,camera_model,scene_id,exposure_type,iso,exposure_time_s,f_number`,
//! optionally preceded by a `#prnu-manifest v<N>` line. Paths are relative to the manifest's
//! directory unless absolute.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::{luminance, ExposureType, Image, ImageMeta};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const VERSION_PREFIX: &str = "#prnu-manifest v";
const HEADER: [&str; 8] = [
    "path",
    "camera_id",
    "camera_model",
    "scene_id",
    "exposure_type",
    "iso",
    "exposure_time_s",
    "f_number",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: PathBuf,
    #[serde(flatten)]
    pub meta: ImageMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    rows: Vec<ManifestRow>,
    schema_version: u32,
    base_dir: PathBuf,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            rows: Vec::new(),
            schema_version: MANIFEST_SCHEMA_VERSION,
            base_dir: PathBuf::new(),
        }
    }
}

#[derive(Deserialize)]
struct RawRow {
    path: String,
    camera_id: String,
    camera_model: String,
    scene_id: String,
    exposure_type: String,
    iso: f64,
    exposure_time_s: f64,
    f_number: f64,
}

impl Manifest {
    /// Validate rows in memory (uniqueness and metadata), without touching the filesystem.
    pub fn from_rows(rows: Vec<ManifestRow>) -> Result<Self> {
        check_unique(&rows)?;
        for (i, row) in rows.iter().enumerate() {
            row.meta.validate().map_err(|e| Error::Schema {
                line: i as u64 + 2,
                message: e.to_string(),
            })?;
        }
        Ok(Manifest {
            rows,
            ..Manifest::default()
        })
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, row: usize) -> PathBuf {
        let p = &self.rows[row].path;
        if p.is_absolute() {
            p.clone()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Sorted, de-duplicated camera ids.
    pub fn camera_ids(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.meta.camera_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn find(&self, camera_id: &str, scene_id: &str, exposure: ExposureType) -> Option<usize> {
        self.rows.iter().position(|r| {
            r.meta.camera_id == camera_id && r.meta.scene_id == scene_id && r.meta.exposure_type == exposure
        })
    }

    fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!("{VERSION_PREFIX}{}\n", self.schema_version).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(HEADER)?;
            for row in &self.rows {
                let m = &row.meta;
                w.write_record([
                    row.path.to_string_lossy().as_ref(),
                    &m.camera_id,
                    &m.camera_model,
                    &m.scene_id,
                    m.exposure_type.as_str(),
                    &m.iso.to_string(),
                    &m.exposure_time_s.to_string(),
                    &m.f_number.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<manifest>", e))?;
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_bytes()?).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical serialization; independent of where the manifest lives.
    pub fn content_hash(&self) -> String {
        let bytes = self.to_csv_bytes().expect("in-memory CSV serialization");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn check_unique(rows: &[ManifestRow]) -> Result<()> {
    let mut seen = HashSet::with_capacity(rows.len());
    for row in rows {
        let m = &row.meta;
        if !seen.insert((m.camera_id.as_str(), m.scene_id.as_str(), m.exposure_type)) {
            return Err(Error::DuplicateEntry {
                camera_id: m.camera_id.clone(),
                scene_id: m.scene_id.clone(),
                exposure: m.exposure_type,
            });
        }
    }
    Ok(())
}

/// Parse and validate a manifest; every referenced image must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    let (schema_version, body, line_offset) = match text.strip_prefix(VERSION_PREFIX) {
        Some(rest) => {
            let (v, body) = rest.split_once('\n').unwrap_or((rest, ""));
            let version: u32 = v.trim().parse().map_err(|_| Error::Schema {
                line: 1,
                message: format!("bad schema version {v:?}"),
            })?;
            if version != MANIFEST_SCHEMA_VERSION {
                return Err(Error::Schema {
                    line: 1,
                    message: format!("unsupported schema version {version}"),
                });
            }
            (version, body, 1)
        }
        None => (MANIFEST_SCHEMA_VERSION, text.as_str(), 0),
    };

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| Error::Schema {
        line: line_offset + 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Schema {
            line: line_offset + 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<RawRow>().enumerate() {
        let line = line_offset + i as u64 + 2;
        let schema = |message: String| Error::Schema { line, message };
        let raw = rec.map_err(|e| schema(e.to_string()))?;
        let exposure_type = raw.exposure_type.parse().map_err(|e: Error| schema(e.to_string()))?;
        let meta = ImageMeta {
            camera_id: raw.camera_id,
            camera_model: raw.camera_model,
            scene_id: raw.scene_id,
            exposure_type,
            iso: raw.iso,
            exposure_time_s: raw.exposure_time_s,
            f_number: raw.f_number,
        };
        meta.validate().map_err(|e| schema(e.to_string()))?;
        if raw.path.is_empty() {
            return Err(schema("empty path".into()));
        }
        rows.push(ManifestRow {
            path: raw.path.into(),
            meta,
        });
    }
    check_unique(&rows)?;
    let manifest = Manifest {
        rows,
        schema_version,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    for i in 0..manifest.len() {
        let p = manifest.resolve(i);
        if !p.is_file() {
            return Err(Error::MissingAsset(p));
        }
    }
    Ok(manifest)
}

/// Decode an 8-bit grayscale or RGB PNG/JPEG into a luminance image.
pub fn decode_image(path: impl AsRef<Path>, meta: ImageMeta) -> Result<Image> {
    let path = path.as_ref();
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| decode_err(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let image = match img {
        image::DynamicImage::ImageLuma8(buf) => Image::from_luma8(w, h, buf.as_raw(), meta),
        other => {
            let rgb = other.to_rgb8();
            let px = ndarray::Array2::from_shape_fn((h, w), |(r, c)| {
                let p = rgb.get_pixel(c as u32, r as u32).0;
                luminance(p[0], p[1], p[2])
            });
            Image::new(px, meta)
        }
    };
    image.map_err(|e| decode_err(e.to_string()))
}

/// Write an image as 8-bit grayscale PNG (values are rounded and clamped).
pub fn write_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = image.shape();
    let bytes: Vec<u8> = image.pixels().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    let buf = image::GrayImage::from_raw(w as u32, h as u32, bytes).expect("buffer sized to image");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Anything that can hand out the images listed in a manifest.
pub trait ImageSource: Sync {
    fn manifest(&self) -> &Manifest;
    fn load(&self, row: usize) -> Result<Image>;
}

impl ImageSource for Manifest {
    fn manifest(&self) -> &Manifest {
        self
    }

    fn load(&self, row: usize) -> Result<Image> {
        let meta = self
            .rows
            .get(row)
            .ok_or_else(|| Error::domain(format!("row {row} out of range")))?
            .meta
            .clone();
        decode_image(self.resolve(row), meta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSizes {
    pub fingerprint: usize,
    pub questioned: usize,
}

impl Default for PartitionSizes {
    fn default() -> Self {
        PartitionSizes {
            fingerprint: 30,
            questioned: 70,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraSplit {
    pub camera_id: String,
    pub camera_model: String,
    pub fingerprint_scenes: Vec<String>,
    pub questioned_scenes: Vec<String>,
    /// Manifest rows of the fingerprint images (fingerprint exposure type).
    pub fingerprint_images: Vec<usize>,
    /// Manifest rows of the questioned images (questioned exposure type).
    pub questioned_images: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPartition {
    pub trial_seed: u64,
    pub fingerprint_exposure: ExposureType,
    pub questioned_exposure: ExposureType,
    pub sizes: PartitionSizes,
    /// Sorted by camera id.
    pub cameras: Vec<CameraSplit>,
}

impl TrialPartition {
    pub fn camera_ids(&self) -> Vec<String> {
        self.cameras.iter().map(|c| c.camera_id.clone()).collect()
    }

    /// Whether two partitions place the same scenes on the same side for every camera.
    pub fn same_scene_split(&self, other: &TrialPartition) -> bool {
        self.cameras.len() == other.cameras.len()
            && self.cameras.iter().zip(&other.cameras).all(|(a, b)| {
                a.camera_id == b.camera_id
                    && a.fingerprint_scenes == b.fingerprint_scenes
                    && a.questioned_scenes == b.questioned_scenes
            })
    }
}

/// scene id -> exposure -> manifest row, for one camera.
type SceneRows<'a> = BTreeMap<&'a str, BTreeMap<ExposureType, usize>>;

/// Seeded scene-level split of each camera's images into fingerprint and questioned sets.
///
/// Eligible scenes are those with both requested exposure types. The shuffle is keyed by the
/// trial seed alone, so cameras with identical scene lists (same-scene acquisition) receive
/// the identical split and no scene crosses from one side to the other across cameras.
pub fn partition_trial(
    manifest: &Manifest,
    fingerprint_exposure: ExposureType,
    questioned_exposure: ExposureType,
    trial_seed: u64,
    sizes: PartitionSizes,
) -> Result<TrialPartition> {
    if sizes.fingerprint == 0 || sizes.questioned == 0 {
        return Err(Error::domain("partition sizes must be positive"));
    }
    let mut index: BTreeMap<&str, (String, SceneRows)> = BTreeMap::new();
    for (i, row) in manifest.rows().iter().enumerate() {
        let m = &row.meta;
        index
            .entry(m.camera_id.as_str())
            .or_insert_with(|| (m.camera_model.clone(), BTreeMap::new()))
            .1
            .entry(m.scene_id.as_str())
            .or_default()
            .insert(m.exposure_type, i);
    }
    if index.is_empty() {
        return Err(Error::domain("manifest is empty"));
    }
    let need = sizes.fingerprint + sizes.questioned;
    let mut cameras = Vec::with_capacity(index.len());
    for (camera_id, (camera_model, scenes)) in index {
        let eligible: Vec<(&str, usize, usize)> = scenes
            .iter()
            .filter_map(|(scene, by_exp)| {
                Some((*scene, *by_exp.get(&fingerprint_exposure)?, *by_exp.get(&questioned_exposure)?))
            })
            .collect();
        if eligible.len() < need {
            return Err(Error::InsufficientImages {
                camera_id: camera_id.to_string(),
                have: eligible.len(),
                need,
            });
        }
        let mut order: Vec<usize> = (0..eligible.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(crate::sim::derive_seed(trial_seed, &[0x9a27]));
        order.shuffle(&mut rng);
        let fp = &order[..sizes.fingerprint];
        let q = &order[sizes.fingerprint..need];
        cameras.push(CameraSplit {
            camera_id: camera_id.to_string(),
            camera_model,
            fingerprint_scenes: fp.iter().map(|&i| eligible[i].0.to_string()).collect(),
            questioned_scenes: q.iter().map(|&i| eligible[i].0.to_string()).collect(),
            fingerprint_images: fp.iter().map(|&i| eligible[i].1).collect(),
            questioned_images: q.iter().map(|&i| eligible[i].2).collect(),
        });
    }
    Ok(TrialPartition {
        trial_seed,
        fingerprint_exposure,
        questioned_exposure,
        sizes,
        cameras,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(cam: &str, scene: &str, exp: ExposureType) -> ImageMeta {
        ImageMeta {
            camera_id: cam.into(),
            camera_model: "m".into(),
            scene_id: scene.into(),
            exposure_type: exp,
            iso: 100.0,
            exposure_time_s: 0.02,
            f_number: 1.8,
        }
    }

    fn synthetic_manifest(cameras: usize, scenes: usize) -> Manifest {
        let mut rows = Vec::new();
        for c in 0..cameras {
            for s in 0..scenes {
                for e in ExposureType::ALL {
                    let cam = format!("c{c}");
                    let scene = format!("s{s:03}");
                    rows.push(ManifestRow {
                        path: format!("{cam}/{scene}_{e}.png").into(),
                        meta: meta(&cam, &scene, e),
                    });
                }
            }
        }
        Manifest::from_rows(rows).unwrap()
    }

    #[test]
    fn duplicates_rejected_in_memory() {
        let row = ManifestRow {
            path: "a.png".into(),
            meta: meta("c", "s", ExposureType::Auto),
        };
        let err = Manifest::from_rows(vec![row.clone(), row]).unwrap_err();
        assert_eq!(err.kind(), "duplicate_entry");
    }

    #[test]
    fn split_is_30_70_and_disjoint() {
        let m = synthetic_manifest(3, 100);
        let p = partition_trial(&m, ExposureType::Auto, ExposureType::Auto, 11, PartitionSizes::default()).unwrap();
        assert_eq!(p.cameras.len(), 3);
        for cam in &p.cameras {
            assert_eq!(cam.fingerprint_images.len(), 30);
            assert_eq!(cam.questioned_images.len(), 70);
            let fp: BTreeSet<_> = cam.fingerprint_scenes.iter().collect();
            let q: BTreeSet<_> = cam.questioned_scenes.iter().collect();
            assert!(fp.is_disjoint(&q));
            for &r in &cam.fingerprint_images {
                assert_eq!(m.rows()[r].meta.camera_id, cam.camera_id);
            }
        }
    }

    #[test]
    fn split_is_deterministic_and_seed_dependent() {
        let m = synthetic_manifest(2, 100);
        let sizes = PartitionSizes::default();
        let a = partition_trial(&m, ExposureType::Auto, ExposureType::Auto, 5, sizes).unwrap();
        let b = partition_trial(&m, ExposureType::Auto, ExposureType::Auto, 5, sizes).unwrap();
        assert_eq!(a, b);
        let parts: Vec<_> = (0..5)
            .map(|s| partition_trial(&m, ExposureType::Auto, ExposureType::Auto, 100 + s, sizes).unwrap())
            .collect();
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                assert_ne!(parts[i].cameras, parts[j].cameras, "seeds {i} and {j} collide");
            }
        }
    }

    #[test]
    fn cross_exposure_sides_share_the_scene_split() {
        let m = synthetic_manifest(2, 100);
        let sizes = PartitionSizes::default();
        for seed in 0..20 {
            let p = partition_trial(&m, ExposureType::Auto, ExposureType::Over, seed, sizes).unwrap();
            let nominal = partition_trial(&m, ExposureType::Auto, ExposureType::Auto, seed, sizes).unwrap();
            assert!(p.same_scene_split(&nominal));
            for cam in &p.cameras {
                let fp: BTreeSet<_> = cam.fingerprint_images.iter().map(|&r| &m.rows()[r].meta.scene_id).collect();
                let q: BTreeSet<_> = cam.questioned_images.iter().map(|&r| &m.rows()[r].meta.scene_id).collect();
                assert!(fp.is_disjoint(&q));
                assert!(cam.questioned_images.iter().all(|&r| m.rows()[r].meta.exposure_type == ExposureType::Over));
            }
            // Same-scene cameras share the split, so no fingerprint scene is questioned anywhere.
            let fp_all: BTreeSet<_> = p.cameras.iter().flat_map(|c| c.fingerprint_scenes.iter()).collect();
            let q_all: BTreeSet<_> = p.cameras.iter().flat_map(|c| c.questioned_scenes.iter()).collect();
            assert!(fp_all.is_disjoint(&q_all));
        }
    }

    #[test]
    fn shortfall_reported() {
        let m = synthetic_manifest(2, 99);
        let err = partition_trial(&m, ExposureType::Auto, ExposureType::Auto, 0, PartitionSizes::default()).unwrap_err();
        match err {
            Error::InsufficientImages { have, need, .. } => assert_eq!((have, need), (99, 100)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn content_hash_tracks_rows() {
        let a = synthetic_manifest(2, 3);
        let mut b = a.clone();
        b.set_base_dir("/elsewhere");
        assert_eq!(a.content_hash(), b.content_hash());
        let c = synthetic_manifest(2, 4);
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
