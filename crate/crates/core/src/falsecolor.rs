//! Log-scaled false-colour rendering of luminance maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdr_io::LuminanceMap;

/// Colour stops, evenly spaced from the low to the high scale bound.
pub const RAMP: [[u8; 3]; 6] = [
    [0, 0, 96],
    [0, 0, 255],
    [0, 255, 255],
    [0, 255, 0],
    [255, 255, 0],
    [255, 0, 0],
];

/// Luminance bounds of the ramp, cd/m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalseColorScale {
    pub min: f64,
    pub max: f64,
}

impl Default for FalseColorScale {
    fn default() -> Self {
        FalseColorScale {
            min: 10.0,
            max: 10000.0,
        }
    }
}

impl FalseColorScale {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "false-colour scale [{}, {}] must satisfy 0 < min < max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// Position on the ramp in [0, 1]; non-positive luminance maps to 0.
    pub fn position(&self, l: f64) -> f64 {
        if !(l > 0.0) {
            return 0.0;
        }
        let (a, b) = (self.min.log10(), self.max.log10());
        ((l.log10() - a) / (b - a)).clamp(0.0, 1.0)
    }
}

/// Colour at ramp position `t` (linear interpolation between stops).
pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let f = t * (RAMP.len() - 1) as f64;
    let i = (f.floor() as usize).min(RAMP.len() - 2);
    let w = f - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    [0, 1, 2].map(|k| (a[k] as f64 + (b[k] as f64 - a[k] as f64) * w).round() as u8)
}

/// Row-major RGB8 buffer.
pub fn false_color(lum: &LuminanceMap, scale: &FalseColorScale) -> Result<Vec<u8>> {
    scale.validate()?;
    Ok(lum
        .values()
        .iter()
        .flat_map(|&l| ramp_color(scale.position(l)))
        .collect())
}
