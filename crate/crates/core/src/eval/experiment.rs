//! Multi-trial experiment runner and report serialization.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::rates::{balanced_rates_from_scores, zero_fpr_threshold, ErrorRates, MixingPoint, SweepPoint, ZeroFprThreshold};
use super::scores::{compute_scores, estimate_fingerprints, ScoreMatrix};
use crate::dataset::{partition_trial, ImageSource, PartitionSizes, TrialPartition};
use crate::denoise::DenoiseConfig;
use crate::error::{Error, Result};
use crate::fingerprint::{NuaConfig, SaturationRule};
use crate::image::ExposureType;
use crate::matching::MatchConfig;
use crate::sim::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AutoAuto,
    AutoOver,
    AutoUnder,
    OverOver,
    UnderUnder,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::AutoAuto,
        ExperimentKind::AutoOver,
        ExperimentKind::AutoUnder,
        ExperimentKind::OverOver,
        ExperimentKind::UnderUnder,
    ];

    pub fn exposures(self) -> (ExposureType, ExposureType) {
        use ExposureType::*;
        match self {
            ExperimentKind::AutoAuto => (Auto, Auto),
            ExperimentKind::AutoOver => (Auto, Over),
            ExperimentKind::AutoUnder => (Auto, Under),
            ExperimentKind::OverOver => (Over, Over),
            ExperimentKind::UnderUnder => (Under, Under),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::AutoAuto => "auto_auto",
            ExperimentKind::AutoOver => "auto_over",
            ExperimentKind::AutoUnder => "auto_under",
            ExperimentKind::OverOver => "over_over",
            ExperimentKind::UnderUnder => "under_under",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::domain(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub denoise: DenoiseConfig,
    pub nua: NuaConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub saturation: SaturationRule,
    pub n_resamples: usize,
    pub sizes: PartitionSizes,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            denoise: DenoiseConfig::default(),
            nua: NuaConfig::default(),
            matching: MatchConfig::default(),
            saturation: SaturationRule::default(),
            n_resamples: 100,
            sizes: PartitionSizes::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.denoise.validate()?;
        self.matching.validate()?;
        self.saturation.validate()?;
        if self.n_resamples == 0 {
            return Err(Error::domain("n_resamples must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// The usual five trial seeds derived from one base seed.
pub fn trial_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| derive_seed(base, &[0x7e1a1, i])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRates {
    pub camera_model: String,
    pub n_cameras: usize,
    pub rates: ErrorRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub trial_seed: u64,
    pub resample_seed: u64,
    pub rates: ErrorRates,
    pub zero_fpr: ZeroFprThreshold,
    /// Questioned images grouped by the source camera's model.
    pub per_model: Vec<ModelRates>,
    pub n_incomparable: usize,
}

/// Mean over trials with the trial-to-trial std, plus the mean within-trial resample std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRates {
    pub tpr: f64,
    pub tnr: f64,
    pub fpr: f64,
    pub accuracy: f64,
    pub tpr_trial_std: f64,
    pub tnr_trial_std: f64,
    pub accuracy_trial_std: f64,
    pub tnr_resample_std: f64,
    pub accuracy_resample_std: f64,
    pub zero_fpr_threshold_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub fingerprint_exposure: ExposureType,
    pub questioned_exposure: ExposureType,
    pub threshold: f64,
    pub seeds: Vec<u64>,
    pub manifest_hash: String,
    pub config_hash: String,
    pub config: EvalConfig,
    pub trials: Vec<TrialReport>,
    pub aggregate: AggregateRates,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub matrices: Vec<ScoreMatrix>,
}

fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn per_model_rates(matrix: &ScoreMatrix, threshold: f64, n_resamples: usize, seed: u64) -> Result<Vec<ModelRates>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, m) in matrix.camera_models.iter().enumerate() {
        groups.entry(m.as_str()).or_default().push(i);
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(g, (model, members))| {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for &s in &members {
                for (f, row) in matrix.scores.iter().enumerate() {
                    let target = if f == s { &mut pos } else { &mut neg };
                    target.extend(row[s].iter().flatten().copied());
                }
            }
            let rates = balanced_rates_from_scores(&pos, &neg, threshold, n_resamples, derive_seed(seed, &[g as u64]))?;
            Ok(ModelRates {
                camera_model: model.to_string(),
                n_cameras: members.len(),
                rates,
            })
        })
        .collect()
}

/// Fingerprints and scores for one partition.
pub fn score_partition(source: &dyn ImageSource, partition: &TrialPartition, cfg: &EvalConfig) -> Result<ScoreMatrix> {
    let fps = estimate_fingerprints(source, partition, &cfg.denoise, &cfg.nua, &cfg.saturation)?;
    compute_scores(source, partition, &fps, &cfg.denoise, &cfg.nua, &cfg.matching)
}

pub fn run_experiment(
    kind: ExperimentKind,
    source: &dyn ImageSource,
    seeds: &[u64],
    cfg: &EvalConfig,
) -> Result<ExperimentRun> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::domain("at least one trial seed is required"));
    }
    let (fp_exp, q_exp) = kind.exposures();
    let threshold = cfg.matching.threshold;
    let mut trials = Vec::with_capacity(seeds.len());
    let mut matrices = Vec::with_capacity(seeds.len());
    for (t, &seed) in seeds.iter().enumerate() {
        let partition = partition_trial(source.manifest(), fp_exp, q_exp, seed, cfg.sizes)?;
        let matrix = score_partition(source, &partition, cfg)?;
        let resample_seed = derive_seed(seed, &[0x5a3b1e]);
        let rates = balanced_rates_from_scores(
            &matrix.positives(),
            &matrix.negatives(),
            threshold,
            cfg.n_resamples,
            resample_seed,
        )?;
        trials.push(TrialReport {
            trial: t,
            trial_seed: seed,
            resample_seed,
            rates,
            zero_fpr: zero_fpr_threshold(&matrix)?,
            per_model: per_model_rates(&matrix, threshold, cfg.n_resamples, resample_seed)?,
            n_incomparable: matrix.incomparable_count(),
        });
        matrices.push(matrix);
    }

    let (tpr, tpr_trial_std) = mean_std(trials.iter().map(|t| t.rates.tpr));
    let (tnr, tnr_trial_std) = mean_std(trials.iter().map(|t| t.rates.tnr));
    let (_, accuracy_trial_std) = mean_std(trials.iter().map(|t| t.rates.accuracy));
    let aggregate = AggregateRates {
        tpr,
        tnr,
        fpr: 1.0 - tnr,
        accuracy: (tpr + tnr) / 2.0,
        tpr_trial_std,
        tnr_trial_std,
        accuracy_trial_std,
        tnr_resample_std: mean_std(trials.iter().map(|t| t.rates.tnr_std)).0,
        accuracy_resample_std: mean_std(trials.iter().map(|t| t.rates.accuracy_std)).0,
        zero_fpr_threshold_mean: mean_std(trials.iter().map(|t| t.zero_fpr.threshold as f64)).0,
    };
    Ok(ExperimentRun {
        report: ExperimentReport {
            experiment: kind,
            fingerprint_exposure: fp_exp,
            questioned_exposure: q_exp,
            threshold,
            seeds: seeds.to_vec(),
            manifest_hash: source.manifest().content_hash(),
            config_hash: cfg.content_hash(),
            config: cfg.clone(),
            trials,
            aggregate,
        },
        matrices,
    })
}

/// Score matrices for nominal and off-nominal questioned images against the same fingerprints.
///
/// Both partitions share the trial seed; the call fails unless they place identical scenes
/// on each side, which is what makes per-image replacement meaningful.
pub fn paired_score_matrices(
    source: &dyn ImageSource,
    fingerprint_exposure: ExposureType,
    nominal: ExposureType,
    offnominal: ExposureType,
    seed: u64,
    cfg: &EvalConfig,
) -> Result<(ScoreMatrix, ScoreMatrix)> {
    cfg.validate()?;
    let p_nom = partition_trial(source.manifest(), fingerprint_exposure, nominal, seed, cfg.sizes)?;
    let p_off = partition_trial(source.manifest(), fingerprint_exposure, offnominal, seed, cfg.sizes)?;
    if !p_nom.same_scene_split(&p_off) {
        return Err(Error::domain(
            "nominal and off-nominal partitions differ; every scene needs all requested exposures",
        ));
    }
    let fps = estimate_fingerprints(source, &p_nom, &cfg.denoise, &cfg.nua, &cfg.saturation)?;
    let a = compute_scores(source, &p_nom, &fps, &cfg.denoise, &cfg.nua, &cfg.matching)?;
    let b = compute_scores(source, &p_off, &fps, &cfg.denoise, &cfg.nua, &cfg.matching)?;
    Ok((a, b))
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per trial followed by an aggregate row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            experiment: &'a str,
            trial: String,
            trial_seed: String,
            threshold: f64,
            tpr: f64,
            tnr: f64,
            fpr: f64,
            accuracy: f64,
            tpr_std: f64,
            tnr_std: f64,
            accuracy_std: f64,
            zero_fpr_threshold: f64,
            zero_fpr_tpr: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        let name = self.experiment.as_str();
        for t in &self.trials {
            w.serialize(Row {
                experiment: name,
                trial: t.trial.to_string(),
                trial_seed: t.trial_seed.to_string(),
                threshold: self.threshold,
                tpr: t.rates.tpr,
                tnr: t.rates.tnr,
                fpr: t.rates.fpr(),
                accuracy: t.rates.accuracy,
                tpr_std: t.rates.tpr_std,
                tnr_std: t.rates.tnr_std,
                accuracy_std: t.rates.accuracy_std,
                zero_fpr_threshold: t.zero_fpr.threshold as f64,
                zero_fpr_tpr: t.zero_fpr.rates.tpr,
            })?;
        }
        let a = &self.aggregate;
        w.serialize(Row {
            experiment: name,
            trial: "aggregate".into(),
            trial_seed: String::new(),
            threshold: self.threshold,
            tpr: a.tpr,
            tnr: a.tnr,
            fpr: a.fpr,
            accuracy: a.accuracy,
            tpr_std: a.tpr_trial_std,
            tnr_std: a.tnr_trial_std,
            accuracy_std: a.accuracy_trial_std,
            zero_fpr_threshold: a.zero_fpr_threshold_mean,
            zero_fpr_tpr: mean_std(self.trials.iter().map(|t| t.zero_fpr.rates.tpr)).0,
        })?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let json = dir.join(format!("{}.json", self.experiment));
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(file)
    }
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv(points: &[SweepPoint], path: impl AsRef<Path>) -> Result<()> {
    write_rows(points, path.as_ref())
}

pub fn write_mixing_csv(points: &[MixingPoint], path: impl AsRef<Path>) -> Result<()> {
    write_rows(points, path.as_ref())
}
