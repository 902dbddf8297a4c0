use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::corpus::Waveform;
use crate::labeling::num_frames;

pub const NUM_BANDS: usize = 8;

/// log-energy, zero-crossing rate, `NUM_BANDS` log band energies, delta
/// log-energy.
pub const FEATURE_DIM: usize = NUM_BANDS + 3;

const ENERGY_EPS: f64 = 1e-10;

/// Log-energy of an all-zero frame.
pub const LOG_ENERGY_FLOOR: f64 = -23.025_850_929_940_457; // ln(1e-10)

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub utterance_id: String,
    pub rows: Vec<[f64; FEATURE_DIM]>,
    pub frame_len: usize,
    pub sample_rate: u32,
}

impl FeatureMatrix {
    pub fn num_frames(&self) -> usize {
        self.rows.len()
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Frame-level feature extractor. Band energies come from `NUM_BANDS`
/// triangular filters whose `NUM_BANDS + 2` edges are equally spaced on the
/// mel scale between 0 Hz and Nyquist, applied to the Hann-windowed power
/// spectrum.
pub struct FeatureExtractor {
    frame_len: usize,
    sample_rate: u32,
    fft: Arc<dyn Fft<f64>>,
    fft_len: usize,
    window: Vec<f64>,
    /// Per band: (first bin, weights).
    filters: Vec<(usize, Vec<f64>)>,
}

impl FeatureExtractor {
    pub fn new(frame_len: usize, sample_rate: u32) -> Self {
        let frame_len = frame_len.max(1);
        let fft_len = frame_len.next_power_of_two().max(2);
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        let window = (0..frame_len)
            .map(|n| {
                if frame_len == 1 {
                    1.0
                } else {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (frame_len - 1) as f64).cos()
                }
            })
            .collect();
        let edges = Self::band_edges_hz(sample_rate);
        let bin_hz = sample_rate as f64 / fft_len as f64;
        let n_bins = fft_len / 2 + 1;
        let filters = (0..NUM_BANDS)
            .map(|b| {
                let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f >= lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f <= hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let first = weights.first().map_or(0, |(k, _)| *k);
                let last = weights.last().map_or(0, |(k, _)| *k);
                let mut dense = vec![0.0; if weights.is_empty() { 0 } else { last - first + 1 }];
                for (k, w) in weights {
                    dense[k - first] = w;
                }
                (first, dense)
            })
            .collect();
        Self {
            frame_len,
            sample_rate,
            fft,
            fft_len,
            window,
            filters,
        }
    }

    /// The `NUM_BANDS + 2` filter edge frequencies in Hz.
    pub fn band_edges_hz(sample_rate: u32) -> Vec<f64> {
        let top = hz_to_mel(sample_rate as f64 / 2.0);
        (0..NUM_BANDS + 2)
            .map(|i| mel_to_hz(top * i as f64 / (NUM_BANDS + 1) as f64))
            .collect()
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    fn frame_features(&self, frame: &[f64], buf: &mut [Complex<f64>]) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        let n = self.frame_len as f64;
        let energy = frame.iter().map(|x| x * x).sum::<f64>() / n;
        out[0] = (energy + ENERGY_EPS).ln();
        let crossings = frame.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        out[1] = if self.frame_len > 1 {
            crossings as f64 / (self.frame_len - 1) as f64
        } else {
            0.0
        };

        for (i, c) in buf.iter_mut().enumerate() {
            let x = if i < frame.len() {
                frame[i] * self.window[i]
            } else {
                0.0
            };
            *c = Complex::new(x, 0.0);
        }
        self.fft.process(buf);
        let scale = 1.0 / self.fft_len as f64;
        for (b, (first, weights)) in self.filters.iter().enumerate() {
            let e: f64 = weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * buf[first + i].norm_sqr() * scale)
                .sum();
            out[2 + b] = (e + ENERGY_EPS).ln();
        }
        out
    }

    /// One row per `frame_len` samples over the full (possibly padded)
    /// waveform; the last frame is zero-filled.
    pub fn extract(&self, w: &Waveform) -> FeatureMatrix {
        let m = num_frames(w.len(), self.frame_len);
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let mut frame = vec![0.0; self.frame_len];
        let mut rows: Vec<[f64; FEATURE_DIM]> = Vec::with_capacity(m);
        for j in 0..m {
            let start = j * self.frame_len;
            let end = (start + self.frame_len).min(w.len());
            frame.fill(0.0);
            frame[..end - start].copy_from_slice(&w.samples[start..end]);
            let mut row = self.frame_features(&frame, &mut buf);
            row[FEATURE_DIM - 1] = match rows.last() {
                Some(prev) => row[0] - prev[0],
                None => 0.0,
            };
            rows.push(row);
        }
        FeatureMatrix {
            utterance_id: w.utterance_id.clone(),
            rows,
            frame_len: self.frame_len,
            sample_rate: self.sample_rate,
        }
    }
}

pub fn extract_features(w: &Waveform, frame_len: usize) -> FeatureMatrix {
    FeatureExtractor::new(frame_len, w.sample_rate).extract(w)
}
