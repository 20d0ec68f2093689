//! Reference trajectories `p*(k)` for the controller to track.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetProfile {
    values: Vec<f64>,
    mean_load: f64,
}

impl TargetProfile {
    pub fn new(values: Vec<f64>, mean_load: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidTarget("profile is empty".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTarget(format!(
                "non-finite value at k={}",
                k + 1
            )));
        }
        if !mean_load.is_finite() {
            return Err(Error::InvalidTarget("non-finite mean load".into()));
        }
        Ok(Self { values, mean_load })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean_load(&self) -> f64 {
        self.mean_load
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// `p*(k)` at 1-based period `k`. Panics when out of range.
    pub fn at(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    /// Writes the profile as a header-less one-column CSV.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 8);
        for v in &self.values {
            out.push_str(&format!("{v:?}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// A single V-shaped dip: flat at `mean_load` outside `[dip_start, dip_end]`,
/// falling linearly to `mean_load · (1 − magnitude_fraction)` at
/// `floor((dip_start + dip_end) / 2)` and rising back by `dip_end`.
pub fn triangular_target(
    mean_load: f64,
    magnitude_fraction: f64,
    dip_start: usize,
    dip_end: usize,
    horizon: usize,
) -> Result<TargetProfile> {
    if !(0.0..=1.0).contains(&magnitude_fraction) {
        return Err(Error::InvalidTarget(format!(
            "magnitude fraction {magnitude_fraction} outside [0, 1]"
        )));
    }
    if dip_start < 1 || dip_start >= dip_end || dip_end > horizon {
        return Err(Error::InvalidTarget(format!(
            "dip window [{dip_start}, {dip_end}] invalid for horizon {horizon}"
        )));
    }
    let mid = (dip_start + dip_end) / 2;
    let values = (1..=horizon)
        .map(|k| {
            // depth in [0, 1]: 0 on the flat, 1 at the midpoint
            let depth = if k < dip_start || k > dip_end {
                0.0
            } else if k == mid {
                1.0
            } else if k < mid {
                (k - dip_start) as f64 / (mid - dip_start) as f64
            } else {
                (dip_end - k) as f64 / (dip_end - mid) as f64
            };
            mean_load * (1.0 - magnitude_fraction * depth)
        })
        .collect();
    TargetProfile::new(values, mean_load)
}

pub fn constant_target(level: f64, horizon: usize) -> Result<TargetProfile> {
    if horizon == 0 {
        return Err(Error::InvalidTarget("horizon must be at least 1".into()));
    }
    TargetProfile::new(vec![level; horizon], level)
}

/// Reads a header-less one-column CSV; the mean load is the arithmetic mean.
pub fn target_from_file(path: impl AsRef<Path>) -> Result<TargetProfile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let malformed = |message: String| Error::Malformed {
        path: path.to_path_buf(),
        message,
    };
    let values = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: f64 = l
                .trim()
                .parse()
                .map_err(|e| malformed(format!("line {}: {e}", i + 1)))?;
            if !v.is_finite() {
                return Err(malformed(format!("line {}: non-finite value", i + 1)));
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(malformed("no values".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    TargetProfile::new(values, mean)
}
