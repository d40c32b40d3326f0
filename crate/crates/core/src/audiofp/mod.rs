//! Voiceover fingerprints: log-mel spectrogram summaries clustered with
//! DBSCAN.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelParams {
    pub sample_rate: u32,
    pub frame_size: usize,
    pub hop: usize,
    pub mel_bands: usize,
    pub fmin: f64,
    /// Defaults to half the sample rate when `None`.
    pub fmax: Option<f64>,
}

impl Default for MelParams {
    fn default() -> Self {
        MelParams {
            sample_rate: 16_000,
            frame_size: 2048,
            hop: 512,
            mel_bands: 128,
            fmin: 0.0,
            fmax: None,
        }
    }
}

impl MelParams {
    pub fn fmax(&self) -> f64 {
        self.fmax.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.frame_size.is_power_of_two() || self.frame_size < 16 {
            return Err(Error::config(format!(
                "frame size must be a power of two >= 16, got {}",
                self.frame_size
            )));
        }
        if self.hop == 0 || self.hop > self.frame_size {
            return Err(Error::config(format!("hop must be in 1..={}", self.frame_size)));
        }
        if self.mel_bands < 8 {
            return Err(Error::config("at least 8 mel bands are required"));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.sample_rate == 0 || !(0.0..self.fmax()).contains(&self.fmin) || self.fmax() > nyquist {
            return Err(Error::config(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got {} and {}",
                self.fmin,
                self.fmax()
            )));
        }
        Ok(())
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Band edges in Hz: `mel_bands + 2` points equally spaced on the mel
/// scale. Band `b` rises from edge `b`, peaks at `b + 1`, falls to `b + 2`.
pub fn mel_band_edges(params: &MelParams) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(params.fmin), hz_to_mel(params.fmax()));
    let n = params.mel_bands + 1;
    (0..=n)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / n as f64))
        .collect()
}

/// Triangular filters with unit peak over the `frame_size / 2 + 1`
/// spectrum bins. Errors if some band catches no bin at all.
pub fn mel_filterbank(params: &MelParams) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let edges = mel_band_edges(params);
    let bins = params.frame_size / 2 + 1;
    let bin_hz = params.sample_rate as f64 / params.frame_size as f64;
    let mut bank = Vec::with_capacity(params.mel_bands);
    for b in 0..params.mel_bands {
        let (l, c, r) = (edges[b], edges[b + 1], edges[b + 2]);
        let row: Vec<f64> = (0..bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                let up = (f - l) / (c - l);
                let down = (r - f) / (r - c);
                up.min(down).max(0.0)
            })
            .collect();
        if row.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config(format!(
                "mel band {b} ({l:.1}-{r:.1} Hz) falls between FFT bins; use fewer bands or a larger frame"
            )));
        }
        bank.push(row);
    }
    Ok(bank)
}

/// Log-mel power spectrogram as `[band][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub bands: Vec<Vec<f64>>,
}

impl MelSpectrogram {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn n_frames(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }
}

/// Computes log-mel spectrograms for one parameter set, reusing the FFT
/// plan and filterbank.
pub struct MelAnalyzer {
    params: MelParams,
    window: Vec<f64>,
    bank: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MelAnalyzer {
    pub fn new(params: MelParams) -> Result<Self> {
        let bank = mel_filterbank(&params)?;
        let n = params.frame_size;
        // Periodic Hann.
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(MelAnalyzer {
            params,
            window,
            bank,
            fft,
        })
    }

    pub fn params(&self) -> &MelParams {
        &self.params
    }

    /// Frames start every `hop` samples with no padding, so a clip of `n`
    /// samples yields `1 + (n - frame_size) / hop` frames.
    pub fn spectrogram(&self, samples: &[f32]) -> Result<MelSpectrogram> {
        let n = self.params.frame_size;
        if samples.len() < n {
            return Err(Error::data(format!(
                "audio has {} samples; at least {n} are needed",
                samples.len()
            )));
        }
        let frames = 1 + (samples.len() - n) / self.params.hop;
        let mut bands = vec![Vec::with_capacity(frames); self.bank.len()];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; n / 2 + 1];
        for f in 0..frames {
            let start = f * self.params.hop;
            for (i, c) in buf.iter_mut().enumerate() {
                *c = Complex::new(samples[start + i] as f64 * self.window[i], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (row, filt) in bands.iter_mut().zip(&self.bank) {
                let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                row.push((e + LOG_FLOOR).log10());
            }
        }
        Ok(MelSpectrogram { bands })
    }
}

pub fn mel_spectrogram(samples: &[f32], params: &MelParams) -> Result<MelSpectrogram> {
    MelAnalyzer::new(*params)?.spectrogram(samples)
}

/// Linear-interpolation resampler.
pub fn resample_linear(samples: &[f32], from: u32, to: u32) -> Result<Vec<f32>> {
    if from == 0 || to == 0 {
        return Err(Error::config("sample rates must be positive"));
    }
    if from == to || samples.is_empty() {
        return Ok(samples.to_vec());
    }
    let out_len = (samples.len() as u64 * to as u64 / from as u64) as usize;
    let step = from as f64 / to as f64;
    Ok((0..out_len)
        .map(|i| {
            let x = i as f64 * step;
            let j = x.floor() as usize;
            let t = (x - j as f64) as f32;
            let a = samples[j.min(samples.len() - 1)];
            let b = samples[(j + 1).min(samples.len() - 1)];
            a + (b - a) * t
        })
        .collect())
}

/// Per-band mean followed by per-band (population) standard deviation.
pub fn voiceprint(spec: &MelSpectrogram) -> Result<Vec<f64>> {
    let frames = spec.n_frames();
    if frames < 2 {
        return Err(Error::data(format!("voiceprint needs at least 2 frames, got {frames}")));
    }
    let mut means = Vec::with_capacity(spec.n_bands());
    let mut stds = Vec::with_capacity(spec.n_bands());
    for row in &spec.bands {
        let m = row.iter().sum::<f64>() / frames as f64;
        let v = row.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / frames as f64;
        means.push(m);
        stds.push(v.sqrt());
    }
    means.extend(stds);
    Ok(means)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 - cos`.
    Cosine,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    return 1.0;
                }
                (1.0 - dot / (na * nb)).max(0.0)
            }
        }
    }
}

fn check_dims(vectors: &[Vec<f64>]) -> Result<()> {
    if let Some(first) = vectors.first() {
        if let Some(i) = vectors.iter().position(|v| v.len() != first.len()) {
            return Err(Error::data(format!(
                "vector {i} has dimension {}, expected {}",
                vectors[i].len(),
                first.len()
            )));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::data("vectors contain non-finite values"));
        }
    }
    Ok(())
}

/// Each point's distance to its `k`-th nearest other point, sorted
/// descending.
pub fn k_distance_curve(vectors: &[Vec<f64>], k: usize, metric: Metric) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    if vectors.len() < k + 1 {
        return Err(Error::contract(format!(
            "k-distance with k = {k} needs at least {} points, got {}",
            k + 1,
            vectors.len()
        )));
    }
    check_dims(vectors)?;
    let mut curve: Vec<f64> = (0..vectors.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..vectors.len())
                .filter(|&j| j != i)
                .map(|j| metric.distance(&vectors[i], &vectors[j]))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1]
        })
        .collect();
    curve.sort_by(|a, b| b.total_cmp(a));
    Ok(curve)
}

/// Index of the largest discrete second difference of a curve, smallest
/// index on ties. Curves shorter than 3 have no interior, giving 0.
pub fn elbow_index(curve: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 1..curve.len().saturating_sub(1) {
        let d2 = curve[i - 1] - 2.0 * curve[i] + curve[i + 1];
        if d2 > best_val {
            best_val = d2;
            best = i;
        }
    }
    best
}

/// DBSCAN radius at the elbow of the k-distance curve.
pub fn select_eps(vectors: &[Vec<f64>], k: usize, metric: Metric) -> Result<f64> {
    let curve = k_distance_curve(vectors, k, metric)?;
    Ok(curve[elbow_index(&curve)])
}

pub const NOISE: i32 = -1;

/// DBSCAN over points in input order. A point is core when at least
/// `min_pts` points (itself included) lie within `eps`, inclusive.
/// Clusters are numbered in discovery order; a border point reachable
/// from several clusters joins the first one that reaches it.
pub fn dbscan(vectors: &[Vec<f64>], eps: f64, min_pts: usize, metric: Metric) -> Result<Vec<i32>> {
    if !(eps >= 0.0) || min_pts == 0 {
        return Err(Error::config(format!("need eps >= 0 and min_pts >= 1, got {eps} and {min_pts}")));
    }
    check_dims(vectors)?;
    let n = vectors.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| metric.distance(&vectors[i], &vectors[j]) <= eps)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    const UNSET: i32 = -2;
    let mut labels = vec![UNSET; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i] != UNSET {
            continue;
        }
        if !core[i] {
            labels[i] = NOISE;
            continue;
        }
        let id = next;
        next += 1;
        labels[i] = id;
        let mut queue = std::collections::VecDeque::from([i]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q] == UNSET || labels[q] == NOISE {
                    labels[q] = id;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    Ok(labels)
}

pub fn write_labels_csv<W: Write, S: AsRef<str>>(writer: W, ids: &[S], labels: &[i32]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["post_id", "cluster_label"])?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.as_ref(), &l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_k_distance_csv<W: Write>(writer: W, curve: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "k_distance"])?;
    for (i, d) in curve.iter().enumerate() {
        w.write_record([i.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub min_pts: usize,
    /// Fixed radius; chosen from the k-distance elbow when `None`.
    pub eps: Option<f64>,
    pub metric: Metric,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            min_pts: 5,
            eps: None,
            metric: Metric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceClusters {
    pub eps: f64,
    pub labels: Vec<i32>,
    pub k_distance: Vec<f64>,
    pub n_clusters: usize,
}

/// Cluster voiceprints, picking eps with `k = min_pts - 1` unless fixed.
pub fn cluster_voiceprints(vectors: &[Vec<f64>], params: &ClusterParams) -> Result<VoiceClusters> {
    let k = params.min_pts.saturating_sub(1).max(1);
    let k_distance = if vectors.len() > k {
        k_distance_curve(vectors, k, params.metric)?
    } else {
        Vec::new()
    };
    let eps = match params.eps {
        Some(e) => e,
        None if !k_distance.is_empty() => k_distance[elbow_index(&k_distance)],
        None => {
            return Err(Error::contract(format!(
                "too few clips ({}) to choose eps with k = {k}",
                vectors.len()
            )))
        }
    };
    let labels = dbscan(vectors, eps, params.min_pts, params.metric)?;
    let n_clusters = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    Ok(VoiceClusters {
        eps,
        labels,
        k_distance,
        n_clusters,
    })
}
