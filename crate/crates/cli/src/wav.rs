//! WAV ingestion: 16-bit PCM and 32-bit float, mono or downmixed by
//! channel averaging.

use std::path::Path;

use anyhow::{bail, Context, Result};
use dyngraph_core::features::AudioClip;

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let mut reader =
        hound::WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        bail!("{}: zero channels", path.display());
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()?,
        (format, bits) => bail!(
            "{}: unsupported WAV encoding {format:?}/{bits}-bit (supported: 16-bit PCM, 32-bit float)",
            path.display()
        ),
    };
    if interleaved.is_empty() {
        bail!("{}: no samples", path.display());
    }

    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
            .collect()
    };
    AudioClip::new(mono, spec.sample_rate).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Linear-interpolation resampling to `target_rate`. Adequate for feature
/// extraction from speech corpora recorded at other rates (e.g. 48 kHz).
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if clip.sample_rate() == target_rate {
        return Ok(clip.clone());
    }
    let ratio = clip.sample_rate() as f64 / target_rate as f64;
    let out_len = ((clip.len() as f64 / ratio).floor() as usize).max(1);
    let src = clip.samples();
    let samples: Vec<f64> = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let base = pos.floor() as usize;
            let frac = pos - base as f64;
            let a = src[base.min(src.len() - 1)];
            let b = src[(base + 1).min(src.len() - 1)];
            a + (b - a) * frac
        })
        .collect();
    AudioClip::new(samples, target_rate).map_err(|e| anyhow::anyhow!("resample: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pcm16(path: &Path, channels: u16, samples: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: 22_050,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            writer.write_sample(s).unwrap();
        }
        writer.finalize().unwrap();
    }

    #[test]
    fn reads_mono_pcm16() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mono.wav");
        write_pcm16(&path, 1, &[0, 16384, -16384, 32767]);
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.sample_rate(), 22_050);
        assert_eq!(clip.len(), 4);
        assert!((clip.samples()[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn downmixes_stereo_by_averaging() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        write_pcm16(&path, 2, &[16384, -16384, 32767, 32767]);
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.len(), 2);
        assert!(clip.samples()[0].abs() < 1e-9);
        assert!((clip.samples()[1] - 32767.0 / 32768.0).abs() < 1e-9);
    }

    #[test]
    fn resampling_preserves_a_sine_within_tolerance() {
        // 440 Hz at 48 kHz, resampled to 22,050 Hz.
        let src: Vec<f64> = (0..48_000)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 48_000.0).sin())
            .collect();
        let clip = AudioClip::new(src, 48_000).unwrap();
        let down = resample(&clip, 22_050).unwrap();
        assert_eq!(down.sample_rate(), 22_050);
        assert!((down.len() as i64 - 22_050).unsigned_abs() <= 1);
        for (i, &s) in down.samples().iter().enumerate().take(2000) {
            let expect = (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 22_050.0).sin();
            assert!((s - expect).abs() < 0.01, "sample {i}: {s} vs {expect}");
        }
        // Same rate is a no-op.
        let same = resample(&clip, 48_000).unwrap();
        assert_eq!(same.samples(), clip.samples());
    }

    #[test]
    fn reads_float32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f32.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        for s in [0.25f32, -0.75] {
            writer.write_sample(s).unwrap();
        }
        writer.finalize().unwrap();
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.samples(), &[0.25, -0.75]);
    }
}
