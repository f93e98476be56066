use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ImageSource, TrialPartition};
use crate::denoise::DenoiseConfig;
use crate::error::{Error, Result};
use crate::fingerprint::{estimate_camera_fingerprint, CameraFingerprint, NuaConfig, SaturationRule};
use crate::image::{ExposureType, Image};
use crate::matching::{MatchConfig, PreparedQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreProvenance {
    pub trial_seed: u64,
    pub fingerprint_exposure: ExposureType,
    pub questioned_exposure: ExposureType,
}

/// Signed PCE of every (fingerprint camera, source camera, questioned image) triple.
///
/// `scores[f][s][j]` scores camera `f`'s fingerprint against questioned image `j` of camera
/// `s`; `None` marks a pair whose image and fingerprint shapes differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub camera_ids: Vec<String>,
    pub camera_models: Vec<String>,
    pub scores: Vec<Vec<Vec<Option<f64>>>>,
    pub provenance: ScoreProvenance,
}

impl ScoreMatrix {
    /// Build from explicit scores (e.g. hand-built test matrices). All cameras must have the
    /// same ragged layout across fingerprint rows.
    pub fn from_scores(
        camera_ids: Vec<String>,
        camera_models: Vec<String>,
        scores: Vec<Vec<Vec<Option<f64>>>>,
        provenance: ScoreProvenance,
    ) -> Result<Self> {
        let n = camera_ids.len();
        if camera_models.len() != n || scores.len() != n {
            return Err(Error::domain("score matrix dimensions disagree with camera list"));
        }
        let counts: Vec<usize> = scores.first().map(|r| r.iter().map(Vec::len).collect()).unwrap_or_default();
        for row in &scores {
            if row.len() != n || row.iter().map(Vec::len).collect::<Vec<_>>() != counts {
                return Err(Error::domain("score matrix rows are not consistently shaped"));
            }
        }
        if scores.iter().flatten().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("score matrix contains non-finite scores"));
        }
        Ok(ScoreMatrix {
            camera_ids,
            camera_models,
            scores,
            provenance,
        })
    }

    pub fn n_cameras(&self) -> usize {
        self.camera_ids.len()
    }

    /// Questioned images per source camera.
    pub fn questioned_counts(&self) -> Vec<usize> {
        self.scores
            .first()
            .map(|row| row.iter().map(Vec::len).collect())
            .unwrap_or_default()
    }

    /// Same-camera scores, in (camera, image) order.
    pub fn positives(&self) -> Vec<f64> {
        (0..self.n_cameras())
            .flat_map(|c| self.scores[c][c].iter().flatten().copied())
            .collect()
    }

    /// Different-camera scores, in (fingerprint, source, image) order.
    pub fn negatives(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (f, row) in self.scores.iter().enumerate() {
            for (s, cell) in row.iter().enumerate() {
                if f != s {
                    out.extend(cell.iter().flatten().copied());
                }
            }
        }
        out
    }

    pub fn incomparable_count(&self) -> usize {
        self.scores.iter().flatten().flatten().filter(|v| v.is_none()).count()
    }
}

fn load_all(source: &dyn ImageSource, rows: &[usize]) -> Result<Vec<Image>> {
    rows.iter().map(|&r| source.load(r)).collect()
}

/// One fingerprint per camera of the partition, from its fingerprint images.
pub fn estimate_fingerprints(
    source: &dyn ImageSource,
    partition: &TrialPartition,
    denoise_cfg: &DenoiseConfig,
    nua_cfg: &NuaConfig,
    rule: &SaturationRule,
) -> Result<Vec<CameraFingerprint>> {
    partition
        .cameras
        .par_iter()
        .map(|cam| {
            let images = load_all(source, &cam.fingerprint_images)?;
            estimate_camera_fingerprint(&images, denoise_cfg, nua_cfg, rule)
        })
        .collect()
}

/// Score every questioned image of the partition against every fingerprint.
///
/// Work is spread over questioned images; each result lands in its own slot, so the matrix
/// does not depend on scheduling.
pub fn compute_scores(
    source: &dyn ImageSource,
    partition: &TrialPartition,
    fingerprints: &[CameraFingerprint],
    denoise_cfg: &DenoiseConfig,
    nua_cfg: &NuaConfig,
    match_cfg: &MatchConfig,
) -> Result<ScoreMatrix> {
    let n = partition.cameras.len();
    if fingerprints.len() != n {
        return Err(Error::domain(format!(
            "{} fingerprints for {n} cameras",
            fingerprints.len()
        )));
    }
    let jobs: Vec<(usize, usize)> = partition
        .cameras
        .iter()
        .enumerate()
        .flat_map(|(s, cam)| (0..cam.questioned_images.len()).map(move |j| (s, j)))
        .collect();
    let per_image: Vec<Vec<Option<f64>>> = jobs
        .par_iter()
        .map(|&(s, j)| {
            let image = source.load(partition.cameras[s].questioned_images[j])?;
            let query = PreparedQuery::new(&image, denoise_cfg, nua_cfg)?;
            fingerprints
                .iter()
                .map(|fp| {
                    if fp.shape() != query.shape() {
                        Ok(None)
                    } else {
                        query.score(fp, match_cfg).map(|r| Some(r.pce))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut scores: Vec<Vec<Vec<Option<f64>>>> = (0..n)
        .map(|_| {
            partition
                .cameras
                .iter()
                .map(|c| vec![None; c.questioned_images.len()])
                .collect()
        })
        .collect();
    for (&(s, j), row) in jobs.iter().zip(per_image) {
        for (f, v) in row.into_iter().enumerate() {
            scores[f][s][j] = v;
        }
    }
    Ok(ScoreMatrix {
        camera_ids: partition.camera_ids(),
        camera_models: partition.cameras.iter().map(|c| c.camera_model.clone()).collect(),
        scores,
        provenance: ScoreProvenance {
            trial_seed: partition.trial_seed,
            fingerprint_exposure: partition.fingerprint_exposure,
            questioned_exposure: partition.questioned_exposure,
        },
    })
}
