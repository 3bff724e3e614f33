use std::path::Path;

use super::FormatError;

/// Mono samples in [-1, 1] at an integer sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<AudioBuffer, FormatError> {
        if sample_rate == 0 {
            return Err(FormatError::Invalid("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(FormatError::Invalid("non-finite sample".into()));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

/// Decodes a RIFF/WAVE byte stream (16-bit PCM mono only).
pub(crate) fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, FormatError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(FormatError::Unsupported("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if body + size > bytes.len() {
            return Err(FormatError::Invalid(format!(
                "truncated {} chunk",
                String::from_utf8_lossy(id)
            )));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(FormatError::Invalid("truncated fmt chunk".into()));
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => data = Some(&bytes[body..body + size]),
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    let (tag, channels, rate, bits) =
        format.ok_or_else(|| FormatError::Invalid("missing fmt chunk".into()))?;
    if tag != 1 {
        return Err(FormatError::Unsupported(format!(
            "format tag {tag} is not PCM"
        )));
    }
    if channels != 1 {
        return Err(FormatError::Unsupported(format!(
            "{channels} channels; only mono is supported"
        )));
    }
    if bits != 16 {
        return Err(FormatError::Unsupported(format!(
            "{bits}-bit samples; only 16-bit is supported"
        )));
    }
    let data = data.ok_or_else(|| FormatError::Invalid("missing data chunk".into()))?;
    if data.len() % 2 != 0 {
        return Err(FormatError::Invalid(
            "data chunk has a dangling byte".into(),
        ));
    }
    let samples = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    AudioBuffer::new(samples, rate)
}

pub(crate) fn encode_wav(buffer: &AudioBuffer) -> Vec<u8> {
    let data_len = buffer.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &buffer.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn read_wav(path: &Path) -> Result<AudioBuffer, FormatError> {
    decode_wav(&std::fs::read(path)?)
}

pub fn write_wav(buffer: &AudioBuffer, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, encode_wav(buffer))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_second_of_silence() {
        let buf = AudioBuffer::new(vec![0.0; 22050], 22050).unwrap();
        let back = decode_wav(&encode_wav(&buf)).unwrap();
        assert_eq!(back.samples.len(), 22050);
        assert!(back.samples.iter().all(|&s| s == 0.0));
        assert_eq!(back.sample_rate, 22050);
    }

    #[test]
    fn ramp_is_bit_identical() {
        let samples: Vec<f64> = (-32768..32768)
            .step_by(7)
            .map(|i| i as f64 / 32768.0)
            .collect();
        let buf = AudioBuffer::new(samples, 16000).unwrap();
        let bytes = encode_wav(&buf);
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back, buf);
        assert_eq!(encode_wav(&back), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = encode_wav(&AudioBuffer::new(vec![0.5, -1.0], 8000).unwrap());
        assert_eq!(bytes.len(), 48);
        assert_eq!(&bytes[36..40], b"data");
        assert_eq!(&bytes[44..], &[0x00, 0x40, 0x00, 0x80]);
    }

    fn with_fmt(tag: u16, channels: u16, bits: u16) -> Vec<u8> {
        let mut b = encode_wav(&AudioBuffer::new(vec![0.0; 4], 8000).unwrap());
        b[20..22].copy_from_slice(&tag.to_le_bytes());
        b[22..24].copy_from_slice(&channels.to_le_bytes());
        b[34..36].copy_from_slice(&bits.to_le_bytes());
        b
    }

    #[test]
    fn rejects_unsupported() {
        assert!(matches!(
            decode_wav(&with_fmt(1, 1, 24)),
            Err(FormatError::Unsupported(_))
        ));
        assert!(matches!(
            decode_wav(&with_fmt(3, 1, 16)),
            Err(FormatError::Unsupported(_))
        ));
        assert!(matches!(
            decode_wav(&with_fmt(1, 2, 16)),
            Err(FormatError::Unsupported(_))
        ));
        assert!(matches!(
            decode_wav(b"RIFX0000WAVE"),
            Err(FormatError::Unsupported(_))
        ));
    }

    #[test]
    fn rejects_truncation() {
        let bytes = encode_wav(&AudioBuffer::new(vec![0.1; 10], 8000).unwrap());
        assert!(matches!(
            decode_wav(&bytes[..bytes.len() - 3]),
            Err(FormatError::Invalid(_))
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = encode_wav(&AudioBuffer::new(vec![0.25, -0.25, 0.0], 8000).unwrap());
        let mut bytes = plain[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]);
        bytes.extend_from_slice(&plain[36..]);
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back.samples, vec![0.25, -0.25, 0.0]);
    }

    #[test]
    fn invalid_buffers() {
        assert!(AudioBuffer::new(vec![0.0], 0).is_err());
        assert!(AudioBuffer::new(vec![f64::NAN], 8000).is_err());
    }

    proptest! {
        #[test]
        fn quantized_round_trip(raw in prop::collection::vec(any::<i16>(), 0..500), rate in 1u32..96000) {
            let buf = AudioBuffer::new(raw.iter().map(|&q| q as f64 / 32768.0).collect(), rate).unwrap();
            prop_assert_eq!(decode_wav(&encode_wav(&buf)).unwrap(), buf);
        }
    }
}
