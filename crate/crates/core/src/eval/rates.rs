//! Error-rate estimation at a fixed PCE threshold, plus the threshold and mixing
//! sensitivity curves.

use std::ops::RangeInclusive;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScoreMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub tpr: f64,
    pub tnr: f64,
    /// Balanced accuracy `(tpr + tnr) / 2`.
    pub accuracy: f64,
    /// Standard deviations across negative-class resamples (sample std; 0 with one resample).
    pub tpr_std: f64,
    pub tnr_std: f64,
    pub accuracy_std: f64,
    /// 0 when the rates come from the full matrix without resampling.
    pub n_resamples: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub negative_sample_size: usize,
}

impl ErrorRates {
    pub fn fpr(&self) -> f64 {
        1.0 - self.tnr
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `(count of positives > threshold) / n`.
fn true_positive_rate(positives: &[f64], threshold: f64) -> f64 {
    positives.iter().filter(|&&p| p > threshold).count() as f64 / positives.len() as f64
}

fn resample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Balanced error rates from raw score lists.
///
/// TPR uses every positive. Each resample draws, without replacement, as many negatives as
/// there are positives (all negatives if there are fewer) and evaluates TNR on them.
/// Resample `r` uses its own ChaCha stream, so results do not depend on parallelism.
pub fn balanced_rates_from_scores(
    positives: &[f64],
    negatives: &[f64],
    threshold: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<ErrorRates> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::domain(format!(
            "balanced error rates need both classes ({} positive, {} negative scores)",
            positives.len(),
            negatives.len()
        )));
    }
    if n_resamples == 0 {
        return Err(Error::domain("n_resamples must be at least 1"));
    }
    let tpr = true_positive_rate(positives, threshold);
    let k = positives.len().min(negatives.len());
    let tnrs: Vec<f64> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = resample_rng(seed, r);
            let picked = index::sample(&mut rng, negatives.len(), k);
            picked.iter().filter(|&i| negatives[i] <= threshold).count() as f64 / k as f64
        })
        .collect();
    let accs: Vec<f64> = tnrs.iter().map(|t| (tpr + t) / 2.0).collect();
    let (tnr, tnr_std) = mean_std(&tnrs);
    let (_, accuracy_std) = mean_std(&accs);
    Ok(ErrorRates {
        tpr,
        tnr,
        accuracy: (tpr + tnr) / 2.0,
        tpr_std: 0.0,
        tnr_std,
        accuracy_std,
        n_resamples,
        n_positive: positives.len(),
        n_negative: negatives.len(),
        negative_sample_size: k,
    })
}

pub fn balanced_error_rates(
    matrix: &ScoreMatrix,
    threshold: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<ErrorRates> {
    balanced_rates_from_scores(&matrix.positives(), &matrix.negatives(), threshold, n_resamples, seed)
}

/// Rates over every score, no resampling.
pub fn full_rates_from_scores(positives: &[f64], negatives: &[f64], threshold: f64) -> Result<ErrorRates> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::domain("error rates need both positive and negative scores"));
    }
    let tpr = true_positive_rate(positives, threshold);
    let tnr = negatives.iter().filter(|&&n| n <= threshold).count() as f64 / negatives.len() as f64;
    Ok(ErrorRates {
        tpr,
        tnr,
        accuracy: (tpr + tnr) / 2.0,
        tpr_std: 0.0,
        tnr_std: 0.0,
        accuracy_std: 0.0,
        n_resamples: 0,
        n_positive: positives.len(),
        n_negative: negatives.len(),
        negative_sample_size: negatives.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: i64,
    pub tpr: f64,
    pub tnr: f64,
}

/// TPR and TNR over the full score sets at each integer threshold.
pub fn sweep_scores(positives: &[f64], negatives: &[f64], thresholds: RangeInclusive<i64>) -> Result<Vec<SweepPoint>> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::domain("threshold sweep needs both positive and negative scores"));
    }
    let mut pos = positives.to_vec();
    let mut neg = negatives.to_vec();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let at_most = |sorted: &[f64], t: f64| sorted.partition_point(|&v| v <= t);
    Ok(thresholds
        .map(|t| {
            let tf = t as f64;
            SweepPoint {
                threshold: t,
                tpr: (pos.len() - at_most(&pos, tf)) as f64 / pos.len() as f64,
                tnr: at_most(&neg, tf) as f64 / neg.len() as f64,
            }
        })
        .collect())
}

pub fn threshold_sweep(matrix: &ScoreMatrix, thresholds: RangeInclusive<i64>) -> Result<Vec<SweepPoint>> {
    sweep_scores(&matrix.positives(), &matrix.negatives(), thresholds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroFprThreshold {
    pub threshold: i64,
    pub rates: ErrorRates,
}

/// Smallest integer strictly above the largest negative score.
pub fn zero_fpr_threshold_from_scores(positives: &[f64], negatives: &[f64]) -> Result<ZeroFprThreshold> {
    let max_neg = negatives
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::domain("zero-FPR threshold needs negative scores"))?;
    let threshold = max_neg.floor() as i64 + 1;
    let rates = full_rates_from_scores(positives, negatives, threshold as f64)?;
    debug_assert_eq!(rates.tnr, 1.0);
    Ok(ZeroFprThreshold { threshold, rates })
}

pub fn zero_fpr_threshold(matrix: &ScoreMatrix) -> Result<ZeroFprThreshold> {
    zero_fpr_threshold_from_scores(&matrix.positives(), &matrix.negatives())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingPoint {
    /// Nominal proportion step `i / (steps - 1)`.
    pub proportion: f64,
    /// Questioned images swapped for their off-nominal counterparts.
    pub replaced: usize,
    pub tpr: f64,
    pub tnr: f64,
    /// `(1 - q) * TPR_nominal + q * TPR_offnominal` with `q = replaced / n`.
    pub expected_tpr: f64,
}

/// Per questioned-image tallies at one threshold.
#[derive(Debug, Clone, Copy, Default)]
struct SlotTally {
    positive: u64,
    negative_pass: u64,
    negative_total: u64,
}

fn slot_tallies(matrix: &ScoreMatrix, threshold: f64) -> Result<Vec<SlotTally>> {
    let n = matrix.n_cameras();
    let mut out = Vec::new();
    for s in 0..n {
        for j in 0..matrix.scores[s][s].len() {
            let pos = matrix.scores[s][s][j]
                .ok_or_else(|| Error::domain("mixing needs every same-camera pair to be comparable"))?;
            let mut t = SlotTally {
                positive: u64::from(pos > threshold),
                ..SlotTally::default()
            };
            for f in (0..n).filter(|&f| f != s) {
                if let Some(v) = matrix.scores[f][s][j] {
                    t.negative_total += 1;
                    t.negative_pass += u64::from(v <= threshold);
                }
            }
            out.push(t);
        }
    }
    Ok(out)
}

/// TPR/TNR as a growing share of questioned images is swapped for off-nominal captures.
///
/// Questioned image `j` of camera `s` in `offnominal` must be the off-nominal capture of the
/// same scene as in `nominal` (same partition, same fingerprints). For each resample a random
/// order of the questioned images is drawn; step `i` swaps the first `floor(i * n / (steps-1))`
/// of them. Rates are averaged over resamples.
pub fn mixing_sensitivity(
    nominal: &ScoreMatrix,
    offnominal: &ScoreMatrix,
    threshold: f64,
    steps: usize,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<MixingPoint>> {
    if nominal.camera_ids != offnominal.camera_ids || nominal.questioned_counts() != offnominal.questioned_counts() {
        return Err(Error::domain("nominal and off-nominal matrices cover different cameras or question counts"));
    }
    if steps < 2 || n_resamples == 0 {
        return Err(Error::domain("mixing needs at least 2 steps and 1 resample"));
    }
    let nom = slot_tallies(nominal, threshold)?;
    let off = slot_tallies(offnominal, threshold)?;
    if nom.iter().zip(&off).any(|(a, b)| a.negative_total != b.negative_total) {
        return Err(Error::domain("nominal and off-nominal matrices differ in comparable pairs"));
    }
    let n = nom.len();
    if n == 0 {
        return Err(Error::domain("no questioned images"));
    }
    let neg_total: u64 = nom.iter().map(|t| t.negative_total).sum();
    if neg_total == 0 {
        return Err(Error::domain("mixing needs negative scores"));
    }
    let pos_nom: u64 = nom.iter().map(|t| t.positive).sum();
    let neg_nom: u64 = nom.iter().map(|t| t.negative_pass).sum();
    let replaced: Vec<usize> = (0..steps).map(|i| i * n / (steps - 1)).collect();

    // Integer tallies summed over resamples keep the endpoints exact.
    let per_resample: Vec<Vec<(u64, u64)>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut resample_rng(seed, r));
            let (mut pos, mut neg) = (pos_nom as i64, neg_nom as i64);
            let mut done = 0usize;
            replaced
                .iter()
                .map(|&k| {
                    for &slot in &order[done..k] {
                        pos += off[slot].positive as i64 - nom[slot].positive as i64;
                        neg += off[slot].negative_pass as i64 - nom[slot].negative_pass as i64;
                    }
                    done = k;
                    (pos as u64, neg as u64)
                })
                .collect()
        })
        .collect();

    let tpr_nom = pos_nom as f64 / n as f64;
    let tpr_off = off.iter().map(|t| t.positive).sum::<u64>() as f64 / n as f64;
    let r = n_resamples as f64;
    Ok(replaced
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (pos_sum, neg_sum) = per_resample
                .iter()
                .fold((0u64, 0u64), |(p, q), row| (p + row[i].0, q + row[i].1));
            let share = k as f64 / n as f64;
            MixingPoint {
                proportion: i as f64 / (steps - 1) as f64,
                replaced: k,
                tpr: pos_sum as f64 / (r * n as f64),
                tnr: neg_sum as f64 / (r * neg_total as f64),
                expected_tpr: (1.0 - share) * tpr_nom + share * tpr_off,
            }
        })
        .collect())
}
