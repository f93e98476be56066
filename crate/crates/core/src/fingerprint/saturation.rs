use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    Four,
    Eight,
}

/// Which pixels count as saturated and are dropped from fingerprint estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturationRule {
    pub intensity_floor: u32,
    pub require_equal_neighbor: bool,
    pub neighborhood: Neighborhood,
}

impl Default for SaturationRule {
    fn default() -> Self {
        SaturationRule {
            intensity_floor: 250,
            require_equal_neighbor: true,
            neighborhood: Neighborhood::Four,
        }
    }
}

impl SaturationRule {
    pub fn validate(&self) -> Result<()> {
        if self.intensity_floor == 0 || self.intensity_floor > 255 {
            return Err(Error::domain(format!(
                "saturation floor must be in 1..=255, got {}",
                self.intensity_floor
            )));
        }
        Ok(())
    }
}

const FOUR: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
const EIGHT: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Pixels at the image maximum (when that maximum reaches the floor) that have an in-bounds
/// neighbour of the same value.
pub fn saturation_mask(image: &Image, rule: &SaturationRule) -> Array2<bool> {
    let px = image.pixels();
    let (rows, cols) = px.dim();
    let max = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max < f64::from(rule.intensity_floor) {
        return Array2::from_elem((rows, cols), false);
    }
    let offsets: &[(isize, isize)] = match rule.neighborhood {
        Neighborhood::Four => &FOUR,
        Neighborhood::Eight => &EIGHT,
    };
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        if px[[r, c]] != max {
            return false;
        }
        if !rule.require_equal_neighbor {
            return true;
        }
        offsets.iter().any(|&(dr, dc)| {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            rr >= 0
                && cc >= 0
                && (rr as usize) < rows
                && (cc as usize) < cols
                && px[[rr as usize, cc as usize]] == max
        })
    })
}
