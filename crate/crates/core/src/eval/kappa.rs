//! Fleiss' kappa for agreement among a fixed number of raters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    /// Every rating falls in one category, so chance agreement is 1 and kappa is set to 1.
    pub degenerate: bool,
    pub n_subjects: usize,
    pub n_raters: usize,
    pub n_categories: usize,
}

/// `ratings[i][r]` is rater `r`'s label for subject `i`. Labels are arbitrary ordered values;
/// only equality matters.
pub fn fleiss_kappa<T: Ord + Clone>(ratings: &[Vec<T>]) -> Result<KappaResult> {
    let n_subjects = ratings.len();
    let n_raters = ratings.first().map_or(0, Vec::len);
    if n_subjects < 2 || n_raters < 2 {
        return Err(Error::domain(format!(
            "fleiss kappa needs at least 2 subjects and 2 raters (got {n_subjects} x {n_raters})"
        )));
    }
    if let Some(i) = ratings.iter().position(|row| row.len() != n_raters) {
        return Err(Error::domain(format!(
            "subject {i} has {} ratings, expected {n_raters}",
            ratings[i].len()
        )));
    }

    let mut index = BTreeMap::new();
    for label in ratings.iter().flatten() {
        let next = index.len();
        index.entry(label.clone()).or_insert(next);
    }
    let k = index.len();
    let mut totals = vec![0u64; k];
    let n = n_raters as f64;
    let mut p_bar = 0.0;
    for row in ratings {
        let mut counts = vec![0u64; k];
        for label in row {
            counts[index[label]] += 1;
        }
        let agree: u64 = counts.iter().map(|&c| c * c.saturating_sub(1)).sum();
        p_bar += agree as f64 / (n * (n - 1.0));
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
    }
    p_bar /= n_subjects as f64;
    let all = (n_subjects * n_raters) as f64;
    let p_e: f64 = totals.iter().map(|&t| (t as f64 / all).powi(2)).sum();

    let degenerate = k == 1;
    let kappa = if degenerate { 1.0 } else { (p_bar - p_e) / (1.0 - p_e) };
    Ok(KappaResult {
        kappa,
        degenerate,
        n_subjects,
        n_raters,
        n_categories: k,
    })
}
