//! OFDM subcarrier grid.
//!
//! Subcarrier vectors throughout the crate are stored in ascending index
//! order, from `index_min` to `index_max`. The DC gap, the device notches and
//! the pilot positions are index sets on that grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subcarrier spacing of an 802.11ax 160 MHz channel.
pub const HE160_SPACING_HZ: f64 = 78_125.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierLayout {
    pub count: usize,
    pub spacing_hz: f64,
    pub index_min: i32,
    pub index_max: i32,
    pub dc_indices: Vec<i32>,
    pub notch_indices: Vec<i32>,
    #[serde(default)]
    pub pilot_indices: Vec<i32>,
}

impl SubcarrierLayout {
    /// Builds a layout and checks its invariants.
    pub fn new(
        spacing_hz: f64,
        index_min: i32,
        index_max: i32,
        dc_indices: Vec<i32>,
        notch_indices: Vec<i32>,
        pilot_indices: Vec<i32>,
    ) -> Result<Self> {
        if index_max < index_min {
            return Err(Error::InvalidLayout(format!(
                "index range {index_min}..={index_max} is empty"
            )));
        }
        let layout = SubcarrierLayout {
            count: (index_max - index_min + 1) as usize,
            spacing_hz,
            index_min,
            index_max,
            dc_indices,
            notch_indices,
            pilot_indices,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// The 2025-subcarrier, 78.125 kHz grid of an 802.11ax 160 MHz capture,
    /// with the 23 unobserved DC subcarriers and the ±766..±770 device notches.
    pub fn he160() -> Self {
        let notch = (-770..=-766).chain(766..=770).collect();
        SubcarrierLayout::new(
            HE160_SPACING_HZ,
            -1012,
            1012,
            (-11..=11).collect(),
            notch,
            Vec::new(),
        )
        .expect("he160 layout is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_hz.is_finite() && self.spacing_hz > 0.0) {
            return Err(Error::InvalidLayout("spacing must be positive".into()));
        }
        if self.index_max < self.index_min {
            return Err(Error::InvalidLayout("empty index range".into()));
        }
        let span = (self.index_max - self.index_min + 1) as usize;
        if self.count != span {
            return Err(Error::InvalidLayout(format!(
                "count {} does not match index range {}..={}",
                self.count, self.index_min, self.index_max
            )));
        }
        for (name, set) in [
            ("dc", &self.dc_indices),
            ("notch", &self.notch_indices),
            ("pilot", &self.pilot_indices),
        ] {
            if !set.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidLayout(format!(
                    "{name} indices must be strictly increasing"
                )));
            }
            if let Some(k) = set.iter().find(|&&k| !self.contains(k)) {
                return Err(Error::InvalidLayout(format!(
                    "{name} index {k} outside the grid"
                )));
            }
        }
        if let Some(k) = self
            .notch_indices
            .iter()
            .find(|k| self.dc_indices.binary_search(k).is_ok())
        {
            return Err(Error::InvalidLayout(format!(
                "index {k} is both a DC and a notch subcarrier"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, k: i32) -> bool {
        (self.index_min..=self.index_max).contains(&k)
    }

    /// Position of subcarrier `k` in a CSI vector.
    pub fn position(&self, k: i32) -> Option<usize> {
        self.contains(k).then(|| (k - self.index_min) as usize)
    }

    /// Subcarrier indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = i32> + Clone {
        self.index_min..=self.index_max
    }

    pub fn frequency_offset_hz(&self, k: i32) -> f64 {
        k as f64 * self.spacing_hz
    }

    /// Occupied bandwidth `count × spacing`.
    pub fn bandwidth_hz(&self) -> f64 {
        self.count as f64 * self.spacing_hz
    }

    /// Size of the un-oversampled transform grid: the smallest power of two
    /// holding every subcarrier (2048 for the 160 MHz grid). Any length of at
    /// least `count` keeps the indices distinct modulo the grid length.
    pub fn base_fft_len(&self) -> usize {
        self.count.next_power_of_two()
    }

    /// Nominal channel bandwidth spanned by the transform grid.
    pub fn grid_bandwidth_hz(&self) -> f64 {
        self.base_fft_len() as f64 * self.spacing_hz
    }

    /// Unambiguous delay span `1/Δf`.
    pub fn delay_span_s(&self) -> f64 {
        1.0 / self.spacing_hz
    }

    /// DC gap as an inclusive index range, `None` when there is no gap.
    pub fn dc_gap(&self) -> Result<Option<(i32, i32)>> {
        match (self.dc_indices.first(), self.dc_indices.last()) {
            (Some(&lo), Some(&hi)) => {
                if (hi - lo + 1) as usize != self.dc_indices.len() {
                    return Err(Error::InvalidLayout("DC indices are not contiguous".into()));
                }
                Ok(Some((lo, hi)))
            }
            _ => Ok(None),
        }
    }
}

impl Default for SubcarrierLayout {
    fn default() -> Self {
        SubcarrierLayout::he160()
    }
}

/// Splits a sorted index set into maximal runs of consecutive indices.
pub(crate) fn contiguous_runs(indices: &[i32]) -> Vec<(i32, i32)> {
    let mut runs: Vec<(i32, i32)> = Vec::new();
    for &k in indices {
        match runs.last_mut() {
            Some((_, hi)) if *hi + 1 == k => *hi = k,
            _ => runs.push((k, k)),
        }
    }
    runs
}
