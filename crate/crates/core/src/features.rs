//! Occupancy features: per-segment accelerometer magnitude statistics and
//! per-window audio zero-crossing counts.
//!
//! Both extractors discard a trailing partial segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    AccelX,
    AccelY,
    AccelZ,
    AudioZcr,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::AccelX => "accel_x",
            Modality::AccelY => "accel_y",
            Modality::AccelZ => "accel_z",
            Modality::AudioZcr => "audio_zcr",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Statistic of `|sample|` taken over each accelerometer segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelStat {
    #[default]
    MaxMagnitude,
    MeanMagnitude,
    Percentile25,
    Percentile75,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub values: Vec<f64>,
    pub segment_len_s: f64,
    pub modality: Modality,
}

impl FeatureSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn segment_samples(len: usize, rate: f64, segment_len_s: f64) -> Result<usize> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::param(format!("sample rate must be positive, got {rate}")));
    }
    if !(segment_len_s > 0.0) || !segment_len_s.is_finite() {
        return Err(Error::param(format!("segment length must be positive, got {segment_len_s}")));
    }
    if len == 0 {
        return Err(Error::param("empty signal"));
    }
    let seg = (rate * segment_len_s).round() as usize;
    if seg == 0 {
        return Err(Error::param("segment shorter than one sample"));
    }
    if len < seg {
        return Err(Error::param(format!(
            "signal of {len} samples is shorter than one {segment_len_s} s segment ({seg} samples)"
        )));
    }
    Ok(seg)
}

/// Maximum `|sample|` per segment.
pub fn accel_max_magnitude(axis: Modality, channel: &[f64], rate: f64, segment_len_s: f64) -> Result<FeatureSeries> {
    accel_feature(axis, channel, rate, segment_len_s, AccelStat::MaxMagnitude)
}

pub fn accel_feature(
    axis: Modality,
    channel: &[f64],
    rate: f64,
    segment_len_s: f64,
    stat: AccelStat,
) -> Result<FeatureSeries> {
    if axis == Modality::AudioZcr {
        return Err(Error::param("accelerometer features need an accelerometer axis"));
    }
    let seg = segment_samples(channel.len(), rate, segment_len_s)?;
    let values = channel
        .chunks_exact(seg)
        .map(|chunk| {
            let mut mags: Vec<f64> = chunk.iter().map(|v| v.abs()).collect();
            match stat {
                AccelStat::MaxMagnitude => mags.iter().fold(0.0, |m: f64, &v| m.max(v)),
                AccelStat::MeanMagnitude => mags.iter().sum::<f64>() / mags.len() as f64,
                AccelStat::Percentile25 => percentile(&mut mags, 0.25),
                AccelStat::Percentile75 => percentile(&mut mags, 0.75),
            }
        })
        .collect();
    Ok(FeatureSeries {
        values,
        segment_len_s,
        modality: axis,
    })
}

/// Linear-interpolated percentile, `q` in [0, 1].
fn percentile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Sign changes between adjacent samples inside each window. Zero counts as
/// positive.
pub fn audio_zero_crossings(audio: &[f64], rate: f64, window_s: f64) -> Result<FeatureSeries> {
    let win = segment_samples(audio.len(), rate, window_s)?;
    let values = audio
        .chunks_exact(win)
        .map(|w| w.windows(2).filter(|p| (p[0] < 0.0) != (p[1] < 0.0)).count() as f64)
        .collect();
    Ok(FeatureSeries {
        values,
        segment_len_s: window_s,
        modality: Modality::AudioZcr,
    })
}
