//! Short-time Fourier tensorization: a batch of multichannel time series
//! becomes one order-4 tensor [samples, channels, frequency bins, frames]
//! of one-sided spectral magnitudes.

use crate::augment::TimeSeriesBatch;
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Rect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 64,
            hop: 32,
            window: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self, n_timesteps: usize) -> Result<()> {
        if self.window_len == 0 || self.hop == 0 {
            return Err(Error::Config("window_len and hop must be positive".into()));
        }
        if self.hop > self.window_len {
            return Err(Error::Config(format!(
                "hop {} exceeds window_len {}",
                self.hop, self.window_len
            )));
        }
        if self.window_len > n_timesteps {
            return Err(Error::Config(format!(
                "window_len {} exceeds signal length {}",
                self.window_len, n_timesteps
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    pub fn n_frames(&self, n_timesteps: usize) -> usize {
        (n_timesteps - self.window_len) / self.hop + 1
    }
}

fn window_coefficients(kind: WindowKind, len: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rect => vec![1.0; len],
        WindowKind::Hann => (0..len)
            .map(|m| {
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * m as f64 / len as f64).cos())
            })
            .collect(),
    }
}

/// Magnitude STFT of every (sample, channel) signal. Output dims are
/// [n_samples, n_channels, window_len/2 + 1, n_frames] with
/// n_frames = floor((n_timesteps - window_len)/hop) + 1.
pub fn stft_tensorize(b: &TimeSeriesBatch, cfg: &StftConfig) -> Result<DenseTensor> {
    cfg.validate(b.n_timesteps)?;
    let wl = cfg.window_len;
    let n_bins = cfg.n_bins();
    let n_frames = cfg.n_frames(b.n_timesteps);
    let win = window_coefficients(cfg.window, wl);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(wl);

    let spectrum_len = n_bins * n_frames;
    let mut out = vec![0.0; b.n_samples * b.n_channels * spectrum_len];
    out.par_chunks_mut(spectrum_len)
        .enumerate()
        .for_each(|(flat, chunk)| {
            let sample = flat / b.n_channels;
            let channel = flat % b.n_channels;
            let signal = b.channel(sample, channel);
            let mut buf = vec![Complex::new(0.0, 0.0); wl];
            for frame in 0..n_frames {
                let start = frame * cfg.hop;
                for (m, slot) in buf.iter_mut().enumerate() {
                    *slot = Complex::new(signal[start + m] * win[m], 0.0);
                }
                fft.process(&mut buf);
                for bin in 0..n_bins {
                    chunk[bin * n_frames + frame] = buf[bin].norm();
                }
            }
        });

    DenseTensor::new(vec![b.n_samples, b.n_channels, n_bins, n_frames], out)
}
