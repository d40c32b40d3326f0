//! Synthetic voices for exercising the audio fingerprinting path.
//!
//! A voice is a harmonic source at a fundamental `f0` shaped by three
//! formant resonances. The "text" seed only changes the syllable rhythm
//! and intonation, so two clips of one voice share their spectral envelope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct VoiceProfile {
    pub f0: f64,
    /// `(center Hz, bandwidth Hz)` per formant.
    pub formants: [(f64, f64); 3],
    /// Spectral tilt in dB per octave above `f0`.
    pub tilt_db: f64,
}

impl VoiceProfile {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VoiceProfile {
            f0: rng.random_range(85.0..260.0),
            formants: [
                (rng.random_range(300.0..900.0), rng.random_range(60.0..140.0)),
                (rng.random_range(1000.0..2400.0), rng.random_range(80.0..200.0)),
                (rng.random_range(2500.0..3600.0), rng.random_range(120.0..300.0)),
            ],
            tilt_db: rng.random_range(-9.0..-3.0),
        }
    }

    fn envelope(&self, f: f64) -> f64 {
        let resonance: f64 = self
            .formants
            .iter()
            .map(|&(c, b)| (-0.5 * ((f - c) / b).powi(2)).exp())
            .sum();
        let tilt = 10f64.powf(self.tilt_db * (f / self.f0).log2().max(0.0) / 20.0);
        (0.05 + resonance) * tilt
    }
}

/// Render `seconds` of speech-like audio.
pub fn render(voice: &VoiceProfile, text_seed: u64, seconds: f64, sample_rate: u32) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(text_seed);
    let sr = f64::from(sample_rate);
    let n = (seconds * sr).round() as usize;
    let nyquist = sr / 2.0;

    // Syllables: (end sample, loudness, pitch factor), with short pauses.
    let mut syllables = Vec::new();
    let mut at = 0usize;
    while at < n {
        let len = (rng.random_range(0.12..0.30) * sr) as usize;
        let gap = (rng.random_range(0.02..0.08) * sr) as usize;
        syllables.push((at + len, rng.random_range(0.4..1.0), rng.random_range(0.92..1.08)));
        syllables.push((at + len + gap, 0.0, 1.0));
        at += len + gap;
    }

    let max_h = (nyquist * 0.9 / (voice.f0 * 0.92)).floor() as usize;
    let mut phases = vec![0.0f64; max_h + 1];
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    let mut gain = 0.0f64;
    for i in 0..n {
        while i >= syllables[seg].0 {
            seg += 1;
        }
        let (_, loud, pitch) = syllables[seg];
        gain += (loud - gain) * 0.002;
        let f0 = voice.f0 * pitch;
        let mut x = 0.0;
        for (h, phase) in phases.iter_mut().enumerate().skip(1) {
            let f = f0 * h as f64;
            if f >= nyquist * 0.9 {
                break;
            }
            *phase = (*phase + 2.0 * std::f64::consts::PI * f / sr) % (2.0 * std::f64::consts::PI);
            x += voice.envelope(f) * phase.sin();
        }
        let noise: f64 = rng.sample(StandardNormal);
        out.push((0.1 * gain * x + 0.002 * noise) as f32);
    }
    out
}

/// Voiceprint-like vectors in `groups` tight clusters: each group has its
/// own base vector and members add Gaussian noise with deviation `sigma`.
/// Returns the vectors and their group labels.
pub fn planted_voiceprints(
    groups: usize,
    per_group: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<Vec<f64>> = (0..groups)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let mut vectors = Vec::with_capacity(groups * per_group);
    let mut labels = Vec::with_capacity(groups * per_group);
    for _ in 0..per_group {
        for (g, base) in bases.iter().enumerate() {
            vectors.push(
                base.iter()
                    .map(|&b| b + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            labels.push(g);
        }
    }
    (vectors, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audiofp::{mel_spectrogram, voiceprint, MelParams};

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    fn print(voice: &VoiceProfile, text: u64) -> Vec<f64> {
        let audio = render(voice, text, 2.0, 16_000);
        voiceprint(&mel_spectrogram(&audio, &MelParams::default()).unwrap()).unwrap()
    }

    #[test]
    fn same_voice_beats_different_voice() {
        let a = VoiceProfile::random(1);
        let b = VoiceProfile::random(2);
        let same = cosine(&print(&a, 10), &print(&a, 11));
        let diff = cosine(&print(&a, 10), &print(&b, 11));
        assert!(same > diff, "same {same} diff {diff}");
    }

    #[test]
    fn render_is_deterministic() {
        let v = VoiceProfile::random(3);
        assert_eq!(render(&v, 4, 0.5, 16_000), render(&v, 4, 0.5, 16_000));
        assert_eq!(render(&v, 4, 0.5, 16_000).len(), 8000);
    }

    #[test]
    fn planted_groups_shape() {
        let (v, l) = planted_voiceprints(9, 20, 16, 0.1, 7);
        assert_eq!(v.len(), 180);
        assert_eq!(l.iter().filter(|&&g| g == 4).count(), 20);
    }
}
