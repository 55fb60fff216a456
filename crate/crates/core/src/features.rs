//! Frame-level feature extraction and synthetic data.
//!
//! The MFCC pipeline follows the usual chain: Hann window, magnitude
//! spectrum, triangular mel filterbank, log (floored), orthonormal DCT-II.
//! The FFT is a self-contained iterative radix-2 transform; frame lengths
//! are padded to the next power of two, so nothing more general is needed.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::FrameSequence;
use crate::matrix::Matrix;

const PI: f64 = core::f64::consts::PI;

/// Mono audio in `[-1, 1]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("audio clip has no samples".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { op: "AudioClip::new" });
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub frame_ms: u32,
    pub hop_ms: u32,
    pub n_mels: usize,
    pub n_mfcc: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            sample_rate: 22_050,
            frame_ms: 25,
            hop_ms: 10,
            n_mels: 64,
            n_mfcc: 40,
        }
    }
}

impl MfccConfig {
    pub fn frame_len(&self) -> usize {
        (self.sample_rate as u64 * self.frame_ms as u64 / 1000) as usize
    }

    pub fn hop_len(&self) -> usize {
        (self.sample_rate as u64 * self.hop_ms as u64 / 1000) as usize
    }

    /// Next power of two at or above the frame length.
    pub fn fft_size(&self) -> usize {
        self.frame_len().next_power_of_two()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidInput("sample_rate must be positive".into()));
        }
        if self.frame_ms <= self.hop_ms {
            return Err(Error::InvalidInput("frame_ms must exceed hop_ms".into()));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return Err(Error::InvalidInput("need 1 <= n_mfcc <= n_mels".into()));
        }
        if self.frame_len() < 2 || self.hop_len() == 0 {
            return Err(Error::InvalidInput(
                "frame and hop must be at least 2 and 1 samples".into(),
            ));
        }
        Ok(())
    }
}

/// Splits a clip into overlapping frames. A clip shorter than one frame
/// yields a single zero-padded frame.
pub fn frame_signal(clip: &AudioClip, frame_ms: u32, hop_ms: u32) -> Vec<Vec<f64>> {
    let frame = (clip.sample_rate() as u64 * frame_ms as u64 / 1000) as usize;
    let hop = ((clip.sample_rate() as u64 * hop_ms as u64 / 1000) as usize).max(1);
    let frame = frame.max(1);
    let len = clip.len();
    if len < frame {
        let mut padded = clip.samples().to_vec();
        padded.resize(frame, 0.0);
        return vec![padded];
    }
    let count = (len - frame) / hop + 1;
    (0..count)
        .map(|i| clip.samples()[i * hop..i * hop + frame].to_vec())
        .collect()
}

/// In-place iterative radix-2 FFT; `re`/`im` lengths must be a power of two.
fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two() && im.len() == n);
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let step = -2.0 * PI / len as f64;
        let half = len / 2;
        let mut start = 0;
        while start < n {
            for k in 0..half {
                let angle = step * k as f64;
                let (wr, wi) = (libm::cos(angle), libm::sin(angle));
                let (ur, ui) = (re[start + k], im[start + k]);
                let (xr, xi) = (re[start + k + half], im[start + k + half]);
                let (vr, vi) = (xr * wr - xi * wi, xr * wi + xi * wr);
                re[start + k] = ur + vr;
                im[start + k] = ui + vi;
                re[start + k + half] = ur - vr;
                im[start + k + half] = ui - vi;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Magnitude spectrum of a real signal zero-padded to `fft_size`; returns
/// bins `0..=fft_size/2`.
pub fn fft_magnitude(signal: &[f64], fft_size: usize) -> Vec<f64> {
    debug_assert!(fft_size.is_power_of_two() && fft_size >= signal.len());
    let mut re = vec![0.0; fft_size];
    let mut im = vec![0.0; fft_size];
    re[..signal.len()].copy_from_slice(signal);
    fft_in_place(&mut re, &mut im);
    (0..=fft_size / 2)
        .map(|k| libm::sqrt(re[k] * re[k] + im[k] * im[k]))
        .collect()
}

/// Symmetric Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - libm::cos(2.0 * PI * i as f64 / (n - 1) as f64)))
        .collect()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * libm::log10(1.0 + f / 700.0)
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (libm::pow(10.0, m / 2595.0) - 1.0)
}

fn mel_points(cfg: &MfccConfig) -> Vec<f64> {
    let max_mel = hz_to_mel(cfg.sample_rate as f64 / 2.0);
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (cfg.n_mels + 1) as f64))
        .collect()
}

/// Center frequency (Hz) of each triangular filter.
pub fn mel_filter_centers(cfg: &MfccConfig) -> Vec<f64> {
    let points = mel_points(cfg);
    points[1..=cfg.n_mels].to_vec()
}

/// Triangular mel filterbank over FFT bins `0..=fft_size/2`, one filter per
/// row.
pub fn mel_filterbank(cfg: &MfccConfig) -> Matrix {
    let points = mel_points(cfg);
    let bins = cfg.fft_size() / 2 + 1;
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_size() as f64;
    Matrix::from_fn(cfg.n_mels, bins, |filter, bin| {
        let f = bin as f64 * bin_hz;
        let (lower, center, upper) = (points[filter], points[filter + 1], points[filter + 2]);
        if f <= lower || f >= upper {
            0.0
        } else if f <= center {
            (f - lower) / (center - lower)
        } else {
            (upper - f) / (upper - center)
        }
    })
}

/// Mel filterbank energies per frame (before the log), `T x n_mels`.
pub fn mel_spectrogram(clip: &AudioClip, cfg: &MfccConfig) -> Result<Matrix> {
    cfg.validate()?;
    if clip.sample_rate() != cfg.sample_rate {
        return Err(Error::InvalidInput(alloc::format!(
            "clip sample rate {} does not match config {}",
            clip.sample_rate(),
            cfg.sample_rate
        )));
    }
    let frames = frame_signal(clip, cfg.frame_ms, cfg.hop_ms);
    let window = hann_window(cfg.frame_len());
    let bank = mel_filterbank(cfg);
    let fft_size = cfg.fft_size();
    let mut out = Matrix::zeros(frames.len(), cfg.n_mels);
    for (t, frame) in frames.iter().enumerate() {
        let windowed: Vec<f64> = frame.iter().zip(&window).map(|(s, w)| s * w).collect();
        let spectrum = fft_magnitude(&windowed, fft_size);
        for filter in 0..cfg.n_mels {
            let energy: f64 = bank
                .row(filter)
                .iter()
                .zip(&spectrum)
                .map(|(w, s)| w * s)
                .sum();
            out.set(t, filter, energy);
        }
    }
    Ok(out)
}

/// Orthonormal DCT-II matrix with `n_out` rows over inputs of length `n`.
pub fn dct_matrix(n_out: usize, n: usize) -> Matrix {
    Matrix::from_fn(n_out, n, |k, i| {
        let scale = if k == 0 {
            libm::sqrt(1.0 / n as f64)
        } else {
            libm::sqrt(2.0 / n as f64)
        };
        scale * libm::cos(PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * n as f64))
    })
}

const LOG_FLOOR: f64 = 1e-10;

/// MFCC matrix, `T x n_mfcc` with `T` the frame count of the clip.
pub fn mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<Matrix> {
    let energies = mel_spectrogram(clip, cfg)?;
    let log_mel = energies.map(|e| libm::log(e.max(LOG_FLOOR)));
    let dct = dct_matrix(cfg.n_mfcc, cfg.n_mels);
    // Coefficients per frame: DCT applied to that frame's log energies.
    log_mel.matmul(&dct.transpose())
}

/// Fixes the frame count: crop the tail when too long, zero-pad when short.
pub fn pad_or_crop(seq: &FrameSequence, target_frames: usize) -> Result<FrameSequence> {
    if target_frames == 0 {
        return Err(Error::InvalidInput("target frame count must be >= 1".into()));
    }
    let src = seq.features();
    let fixed = Matrix::from_fn(target_frames, seq.dim(), |i, j| {
        if i < src.rows() {
            src.get(i, j)
        } else {
            0.0
        }
    });
    FrameSequence::new(fixed, seq.label(), seq.id())
}

/// Deterministic synthetic dataset for desk-scale verification: each class
/// has its own per-feature offset, sinusoid frequency, and phase pattern
/// along the frame axis, plus Gaussian noise. At zero noise the class mean
/// vectors are exactly the offsets, so a nearest-centroid classifier on mean
/// features separates the classes perfectly.
pub fn synth_dataset(
    n_per_class: usize,
    classes: usize,
    frames: usize,
    dim: usize,
    noise: f64,
    seed: u64,
) -> Result<Vec<FrameSequence>> {
    if n_per_class == 0 || classes == 0 || frames == 0 || dim == 0 {
        return Err(Error::InvalidInput("all synthetic dataset counts must be >= 1".into()));
    }
    if noise.is_nan() || noise < 0.0 {
        return Err(Error::InvalidInput("noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets = vec![vec![0.0; dim]; classes];
    let mut phases = vec![vec![0.0; dim]; classes];
    for k in 0..classes {
        for j in 0..dim {
            offsets[k][j] = rng.random_range(-1.0..1.0);
            phases[k][j] = rng.random_range(0.0..2.0 * PI);
        }
    }
    let mut out = Vec::with_capacity(n_per_class * classes);
    for class in 0..classes {
        let freq = (class + 1) as f64;
        for sample in 0..n_per_class {
            let mut features = Matrix::zeros(frames, dim);
            for t in 0..frames {
                for j in 0..dim {
                    let angle = 2.0 * PI * freq * t as f64 / frames as f64 + phases[class][j];
                    let z: f64 = StandardNormal.sample(&mut rng);
                    features.set(
                        t,
                        j,
                        offsets[class][j] + 0.8 * libm::sin(angle) + noise * z,
                    );
                }
            }
            out.push(FrameSequence::new(
                features,
                class,
                alloc::format!("synth-{class}-{sample}"),
            )?);
        }
    }
    Ok(out)
}
