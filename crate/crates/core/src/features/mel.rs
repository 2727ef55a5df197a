//! Log-mel frontend matching common speech-encoder conventions:
//! 16 kHz input, 25 ms Hann window, 10 ms hop, 80 HTK-scale mel bands and a
//! natural log floored at 1e-10.

use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use super::FeatureError;

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate: u32,
    /// Leading samples that are original audio rather than padding.
    valid_samples: usize,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, FeatureError> {
        if sample_rate == 0 {
            return Err(FeatureError::InvalidSampleRate);
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        let valid_samples = samples.len();
        Ok(Self { samples, sample_rate, valid_samples })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn valid_samples(&self) -> usize {
        self.valid_samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Zero-pads at the end or truncates so the waveform lasts exactly `target_s` seconds.
pub fn pad_or_trim(w: &Waveform, target_s: f64) -> Result<Waveform, FeatureError> {
    if !(target_s.is_finite() && target_s > 0.0) {
        return Err(FeatureError::InvalidTarget(target_s));
    }
    let target = (target_s * w.sample_rate as f64).round() as usize;
    let mut samples = w.samples.clone();
    samples.resize(target, 0.0);
    Ok(Waveform {
        samples,
        sample_rate: w.sample_rate,
        valid_samples: w.valid_samples.min(target),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub log_floor: f64,
    /// Duration the waveform is padded or trimmed to before analysis.
    pub pad_s: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            n_fft: 400,
            hop: 160,
            n_mels: 80,
            log_floor: 1e-10,
            pad_s: 30.0,
        }
    }
}

impl MelConfig {
    pub fn n_freqs(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Triangular HTK-scale filters, `[n_mels, n_freqs]`, unit peak height.
    pub fn filterbank(&self) -> Array2<f64> {
        let n_freqs = self.n_freqs();
        let nyquist = self.sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..self.n_mels + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (self.n_mels + 1) as f64))
            .collect();
        let bin_hz = self.sample_rate as f64 / self.n_fft as f64;
        Array2::from_shape_fn((self.n_mels, n_freqs), |(m, k)| {
            let f = k as f64 * bin_hz;
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            }
        })
    }

    /// Center frequency in Hz of mel band `m`.
    pub fn band_center_hz(&self, m: usize) -> f64 {
        let mel_max = hz_to_mel(self.sample_rate as f64 / 2.0);
        mel_to_hz(mel_max * (m + 1) as f64 / (self.n_mels + 1) as f64)
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Log-mel energies, `[T_mel, n_mels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub frames: Array2<f32>,
    pub hop_s: f64,
    pub win_s: f64,
    /// Frames whose center lies inside the unpadded audio.
    pub valid_frames: usize,
}

impl MelSpectrogram {
    pub fn frame_count(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_mels(&self) -> usize {
        self.frames.ncols()
    }
}

fn reflect(i: isize, n: usize) -> Option<usize> {
    let n = n as isize;
    let j = if i < 0 { -i } else if i >= n { 2 * (n - 1) - i } else { i };
    (0..n).contains(&j).then_some(j as usize)
}

/// Short-time log-mel analysis of an already padded waveform.
///
/// Frame `t` is centered on sample `t * hop`, with reflection at the signal
/// boundaries, so `T_mel = ceil(len / hop)`.
pub fn compute_log_mel(w: &Waveform, cfg: &MelConfig) -> Result<MelSpectrogram, FeatureError> {
    if w.is_empty() {
        return Err(FeatureError::EmptyWaveform);
    }
    if w.sample_rate != cfg.sample_rate {
        return Err(FeatureError::SampleRateMismatch { expected: cfg.sample_rate, found: w.sample_rate });
    }
    let n = w.len();
    let n_frames = n.div_ceil(cfg.hop);
    let n_freqs = cfg.n_freqs();
    let window: Vec<f64> = (0..cfg.n_fft)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / cfg.n_fft as f64).cos())
        .collect();
    let filters = cfg.filterbank();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut power = vec![0.0f64; n_freqs];
    let mut frames = Array2::<f32>::zeros((n_frames, cfg.n_mels));
    let half = (cfg.n_fft / 2) as isize;

    for t in 0..n_frames {
        let start = (t * cfg.hop) as isize - half;
        for (i, slot) in buf.iter_mut().enumerate() {
            let x = reflect(start + i as isize, n).map_or(0.0, |j| w.samples[j] as f64);
            *slot = Complex::new(x * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for m in 0..cfg.n_mels {
            let energy: f64 = filters.row(m).iter().zip(&power).map(|(f, p)| f * p).sum();
            frames[[t, m]] = energy.max(cfg.log_floor).ln() as f32;
        }
    }

    Ok(MelSpectrogram {
        frames,
        hop_s: cfg.hop as f64 / cfg.sample_rate as f64,
        win_s: cfg.n_fft as f64 / cfg.sample_rate as f64,
        valid_frames: w.valid_samples.div_ceil(cfg.hop).min(n_frames),
    })
}
