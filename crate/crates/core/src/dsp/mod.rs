//! Signal primitives shared by the pipeline stages.
//!
//! Everything here is a pure function over slices (or small matrices), so the
//! callers are free to fan out across rows or windows with rayon.

mod butterworth;
mod pca;
mod spectral;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use butterworth::{bandpass, Biquad, ButterworthBandpass};
pub use pca::{pca_first, PcaComponent};
pub use spectral::{
    band_power_ratio, dominant_hr_bpm, dominant_hr_bpm_windowed, power_spectrum, HrReadout,
    LOW_CONFIDENCE_RATIO,
};
pub use stats::{mean, pearson, sliding_pearson, stability, std_dev, zscore, STABILITY_GUARD};

/// Heart-rate pass band and Butterworth order.
///
/// `order` is the effective order after forward-backward application, so the
/// designed prototype has `order / 2` poles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub low: f64,
    pub high: f64,
    pub order: usize,
}

impl Default for BandSpec {
    fn default() -> Self {
        BandSpec {
            low: 0.75,
            high: 2.5,
            order: 4,
        }
    }
}

impl BandSpec {
    pub fn validate(&self, fps: f64) -> Result<()> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::validation("fps", format!("must be > 0, got {fps}")));
        }
        if !(self.low > 0.0 && self.low < self.high) {
            return Err(Error::validation(
                "band",
                format!("need 0 < low < high, got [{}, {}]", self.low, self.high),
            ));
        }
        if self.order < 2 || self.order % 2 != 0 {
            return Err(Error::validation(
                "band.order",
                format!("effective order must be even and >= 2, got {}", self.order),
            ));
        }
        if self.high >= fps / 2.0 {
            return Err(Error::Nyquist {
                fps,
                high: self.high,
            });
        }
        Ok(())
    }

    /// Band edges expressed in beats per minute.
    pub fn bpm_range(&self) -> (f64, f64) {
        (self.low * 60.0, self.high * 60.0)
    }
}
