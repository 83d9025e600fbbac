//! Sampled hypothesis predictions on the test set, shared by both hypothesis
//! spaces, plus their `sample,point,channel,value` CSV form and JSON sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Kernel,
    NeuralNet,
    ExactOracle,
}

/// An `S × n × k` tensor of test-set predictions, one slab per hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSamples {
    n_samples: usize,
    n_points: usize,
    n_channels: usize,
    values: Vec<f64>,
    pub seed: u64,
    pub source: SampleSource,
}

impl HypothesisSamples {
    /// `values` is laid out sample-major, then point, then channel.
    pub fn new(
        n_samples: usize,
        n_points: usize,
        n_channels: usize,
        values: Vec<f64>,
        seed: u64,
        source: SampleSource,
    ) -> Result<Self> {
        if n_samples == 0 || n_points == 0 || n_channels == 0 {
            return Err(Error::invalid("samples", "S, n and k must all be at least 1"));
        }
        let expected = n_samples * n_points * n_channels;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "hypothesis sample tensor",
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite hypothesis prediction".into()));
        }
        Ok(HypothesisSamples {
            n_samples,
            n_points,
            n_channels,
            values,
            seed,
            source,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn get(&self, sample: usize, point: usize, channel: usize) -> f64 {
        self.values[(sample * self.n_points + point) * self.n_channels + channel]
    }

    /// Predictions of one hypothesis, point-major `n × k`.
    pub fn sample(&self, s: usize) -> &[f64] {
        let len = self.n_points * self.n_channels;
        &self.values[s * len..(s + 1) * len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// JSON sidecar written next to `samples.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesManifest {
    pub seed: u64,
    pub source: SampleSource,
    #[serde(rename = "S")]
    pub n_samples: usize,
    pub n: usize,
    pub k: usize,
    pub residual_alpha: Option<f64>,
    #[serde(rename = "residual_A")]
    pub residual_a: Option<f64>,
    pub clamped_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_train_losses: Option<Vec<f64>>,
    /// Full sampler configuration (kernel spec, SGD settings, resolved step sizes).
    #[serde(default)]
    pub config: serde_json::Value,
}

impl SamplesManifest {
    pub fn for_samples(samples: &HypothesisSamples) -> Self {
        SamplesManifest {
            seed: samples.seed,
            source: samples.source,
            n_samples: samples.n_samples,
            n: samples.n_points,
            k: samples.n_channels,
            residual_alpha: None,
            residual_a: None,
            clamped_mass: None,
            arch: None,
            optimizer: None,
            final_train_losses: None,
            config: serde_json::Value::Null,
        }
    }
}

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SAMPLES_MANIFEST_FILE: &str = "samples.json";

pub fn write_samples(dir: &Path, samples: &HypothesisSamples, manifest: &SamplesManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(SAMPLES_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    let io = |e| Error::io(&path, e);
    writeln!(w, "sample,point,channel,value").map_err(io)?;
    for s in 0..samples.n_samples {
        for j in 0..samples.n_points {
            for c in 0..samples.n_channels {
                writeln!(w, "{s},{j},{c},{}", samples.get(s, j, c)).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;

    let m_path = dir.join(SAMPLES_MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(&m_path, json + "\n").map_err(|e| Error::io(&m_path, e))?;
    Ok(())
}

pub fn read_samples(dir: &Path) -> Result<(HypothesisSamples, SamplesManifest)> {
    let m_path = dir.join(SAMPLES_MANIFEST_FILE);
    let text = fs::read_to_string(&m_path).map_err(|e| Error::io(&m_path, e))?;
    let manifest: SamplesManifest = serde_json::from_str(&text)?;

    let path = dir.join(SAMPLES_FILE);
    let mut reader = csv::Reader::from_path(&path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(["sample", "point", "channel", "value"]) {
        return Err(Error::format(&path, "expected header sample,point,channel,value"));
    }
    let (s_count, n, k) = (manifest.n_samples, manifest.n, manifest.k);
    let total = s_count * n * k;
    let mut values = vec![f64::NAN; total];
    let mut seen = 0usize;
    for rec in reader.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::format(&path, "short record"));
        let idx = |i: usize| -> Result<usize> {
            field(i)?
                .parse()
                .map_err(|_| Error::format(&path, "bad index"))
        };
        let (s, j, c) = (idx(0)?, idx(1)?, idx(2)?);
        if s >= s_count || j >= n || c >= k {
            return Err(Error::format(&path, format!("entry ({s}, {j}, {c}) out of range")));
        }
        values[(s * n + j) * k + c] = field(3)?
            .parse()
            .map_err(|_| Error::format(&path, "bad value"))?;
        seen += 1;
    }
    if seen != total || values.iter().any(|v| v.is_nan()) {
        return Err(Error::format(&path, format!("expected {total} entries, found {seen}")));
    }
    let samples = HypothesisSamples::new(s_count, n, k, values, manifest.seed, manifest.source)?;
    Ok((samples, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_sidecar_round_trip() {
        let values: Vec<f64> = (0..2 * 3 * 2).map(|i| (i as f64).sin() * 1e3).collect();
        let samples = HypothesisSamples::new(2, 3, 2, values, 42, SampleSource::Kernel).unwrap();
        let mut manifest = SamplesManifest::for_samples(&samples);
        manifest.residual_alpha = Some(0.5);
        manifest.residual_a = Some(1.25);
        manifest.clamped_mass = Some(0.0);
        let dir = tempfile::tempdir().unwrap();
        write_samples(dir.path(), &samples, &manifest).unwrap();
        let (back, m) = read_samples(dir.path()).unwrap();
        assert_eq!(back, samples);
        assert_eq!(m, manifest);

        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(SAMPLES_MANIFEST_FILE)).unwrap()).unwrap();
        for key in ["seed", "source", "S", "n", "k", "residual_alpha", "residual_A", "clamped_mass"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["source"], "kernel");
        assert_eq!(back.get(1, 2, 1), samples.sample(1)[2 * 2 + 1]);
    }

    #[test]
    fn shape_validation() {
        assert!(HypothesisSamples::new(0, 1, 1, vec![], 0, SampleSource::Kernel).is_err());
        assert!(HypothesisSamples::new(1, 2, 1, vec![0.0], 0, SampleSource::Kernel).is_err());
        assert!(HypothesisSamples::new(1, 1, 1, vec![f64::NAN], 0, SampleSource::Kernel).is_err());
    }
}
