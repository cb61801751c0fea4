use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::AudioClip;

const PCM: u16 = 1;
const EXTENSIBLE: u16 = 0xFFFE;

/// Reads a 16-bit PCM RIFF/WAVE file. Stereo is averaged to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("missing RIFF/WAVE signature".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "chunk {:?} overruns file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Format("fmt chunk too short".into()));
                }
                let mut format = u16_at(body, 0);
                if format == EXTENSIBLE && body.len() >= 26 {
                    format = u16_at(body, 24);
                }
                fmt = Some((format, u16_at(body, 2), u32_at(body, 4), u16_at(body, 14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }
    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::Format("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("no data chunk".into()))?;
    if format != PCM {
        return Err(Error::Unsupported(format!("format tag {format}")));
    }
    if bits != 16 {
        return Err(Error::Unsupported(format!("{bits}-bit samples")));
    }
    if channels == 0 || channels > 2 {
        return Err(Error::Unsupported(format!("{channels} channels")));
    }
    if rate == 0 {
        return Err(Error::Format("zero sample rate".into()));
    }
    let channels = channels as usize;
    let frame_bytes = 2 * channels;
    let samples: Vec<f64> = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|s| f64::from(i16::from_le_bytes([s[0], s[1]])) / 32768.0)
                .sum();
            sum / channels as f64
        })
        .collect();
    AudioClip::new(samples, rate)
}

/// Encodes mono 16-bit PCM. Samples are clipped to [-1, 1] and scaled by 32767.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let n = clip.samples().len();
    let data_len = (n * 2) as u32;
    let rate = clip.sample_rate_hz();
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in clip.samples() {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
pub(crate) fn raw_wav(channels: u16, rate: u32, bits: u16, format: u16, frames: &[i16]) -> Vec<u8> {
    let data_len = (frames.len() * 2) as u32;
    let mut out = Vec::new();
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * u32::from(channels) * 2).to_le_bytes());
    out.extend_from_slice(&(channels * 2).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in frames {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_decodes_to_zeros() {
        let bytes = raw_wav(1, 22050, 16, PCM, &vec![0; 22050]);
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples().len(), 22050);
        assert_eq!(clip.sample_rate_hz(), 22050);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_opposite_channels_cancel() {
        let frames: Vec<i16> = (0..200).flat_map(|_| [16384i16, -16384]).collect();
        let clip = decode_wav(&raw_wav(2, 16000, 16, PCM, &frames)).unwrap();
        assert_eq!(clip.samples().len(), 200);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
        assert_eq!(clip.sample_rate_hz(), 16000);
    }

    #[test]
    fn most_negative_sample_is_minus_one() {
        let clip = decode_wav(&raw_wav(1, 22050, 16, PCM, &[-32768, 0])).unwrap();
        assert_eq!(clip.samples()[0], -1.0);
    }

    #[test]
    fn rejects_bad_headers_and_encodings() {
        assert!(matches!(decode_wav(b"RIFX0000WAVE"), Err(Error::Format(_))));
        let mut truncated = raw_wav(1, 22050, 16, PCM, &[1, 2, 3]);
        truncated.truncate(46);
        assert!(matches!(decode_wav(&truncated), Err(Error::Format(_))));
        assert!(matches!(
            decode_wav(&raw_wav(1, 22050, 8, PCM, &[0; 4])),
            Err(Error::Unsupported(_))
        ));
        // IEEE float tag
        assert!(matches!(
            decode_wav(&raw_wav(1, 22050, 16, 3, &[0; 4])),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn encode_then_decode_preserves_samples_to_quantization() {
        let samples: Vec<f64> = (0..500).map(|i| (i as f64 * 0.01).sin() * 0.8).collect();
        let clip = AudioClip::new(samples.clone(), 22050).unwrap();
        let back = decode_wav(&encode_wav(&clip)).unwrap();
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() < 2.0 / 32768.0);
        }
    }
}
