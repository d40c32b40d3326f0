use std::io::{Read, Seek, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Mono audio in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

/// Decode 16-bit integer PCM WAV, averaging channels down to mono.
pub fn read_wav<R: Read>(reader: R) -> Result<Audio> {
    let mut wav = hound::WavReader::new(reader).map_err(wav_err)?;
    let spec = wav.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::data(format!(
            "unsupported WAV encoding: {:?} {}-bit (need 16-bit PCM)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels == 0 || spec.sample_rate == 0 {
        return Err(Error::data("WAV header has zero channels or sample rate"));
    }
    let channels = spec.channels as usize;
    let mut samples = Vec::with_capacity(wav.len() as usize / channels);
    let mut acc = 0.0f32;
    let mut n = 0;
    for s in wav.samples::<i16>() {
        acc += s.map_err(wav_err)? as f32 / 32768.0;
        n += 1;
        if n == channels {
            samples.push(acc / channels as f32);
            acc = 0.0;
            n = 0;
        }
    }
    Ok(Audio {
        sample_rate: spec.sample_rate,
        samples,
    })
}

pub fn read_wav_file(path: &Path) -> Result<Audio> {
    let file = std::fs::File::open(path)?;
    read_wav(std::io::BufReader::new(file))
}

/// Encode mono 16-bit PCM. Samples are clamped to `[-1, 1]`.
pub fn write_wav<W: Write + Seek>(writer: W, audio: &Audio) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::new(writer, spec).map_err(wav_err)?;
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

fn wav_err(err: hound::Error) -> Error {
    match err {
        // hound reports short reads as `Other` rather than `UnexpectedEof`.
        hound::Error::IoError(e)
            if matches!(
                e.kind(),
                std::io::ErrorKind::UnexpectedEof | std::io::ErrorKind::Other
            ) =>
        {
            Error::data(format!("truncated WAV: {e}"))
        }
        hound::Error::IoError(e) => Error::Io(e),
        other => Error::data(format!("WAV: {other}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn stereo_is_downmixed() {
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut buf = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
            for (l, r) in [(16384i16, 0i16), (-16384, -16384)] {
                w.write_sample(l).unwrap();
                w.write_sample(r).unwrap();
            }
            w.finalize().unwrap();
        }
        let audio = read_wav(Cursor::new(buf.into_inner())).unwrap();
        assert_eq!(audio.sample_rate, 8000);
        assert_eq!(audio.samples, [0.25, -0.5]);
    }

    #[test]
    fn mono_round_trip() {
        let audio = Audio {
            sample_rate: 16000,
            samples: vec![0.0, 0.5, -0.5, 0.25],
        };
        let mut buf = Cursor::new(Vec::new());
        write_wav(&mut buf, &audio).unwrap();
        let back = read_wav(Cursor::new(buf.into_inner())).unwrap();
        for (a, b) in audio.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn garbage_is_a_data_error() {
        assert!(matches!(
            read_wav(Cursor::new(b"RIFFnope".to_vec())),
            Err(Error::Data(_))
        ));
    }
}
