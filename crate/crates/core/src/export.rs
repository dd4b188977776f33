//! Impulse-response file formats: CSV, 16-bit WAV with a JSON sidecar, and plot data.

use crate::acoustics::ImpulseResponse;
use crate::num::Real;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CSV_HEADER: &str = "time_s,amplitude";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Header `time_s,amplitude`, one row per sample, shortest round-trip decimals.
pub fn impulse_csv<T: Real>(impulse: &ImpulseResponse<T>) -> String {
    let mut out = String::with_capacity(impulse.len() * 24);
    out.push_str(CSV_HEADER);
    out.push('\n');
    let fs = impulse.sample_rate.as_f64();
    for (i, x) in impulse.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i as f64 / fs, x.as_f64());
    }
    out
}

pub fn write_impulse_csv<T: Real>(
    path: &Path,
    impulse: &ImpulseResponse<T>,
) -> Result<(), ExportError> {
    fs::write(path, impulse_csv(impulse)).map_err(io_err(path))
}

/// Reads a file written by [`write_impulse_csv`] into `(times, amplitudes)`.
pub fn read_impulse_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ExportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let fmt = |line: usize, message: &str| ExportError::Format {
        path: path.to_owned(),
        line,
        message: message.to_owned(),
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(fmt(1, "expected header `time_s,amplitude`"));
    }
    let mut times = Vec::new();
    let mut amps = Vec::new();
    for (i, line) in lines.enumerate() {
        let (t, a) = line
            .split_once(',')
            .ok_or_else(|| fmt(i + 2, "expected two fields"))?;
        times.push(t.trim().parse().map_err(|_| fmt(i + 2, "invalid time"))?);
        amps.push(
            a.trim()
                .parse()
                .map_err(|_| fmt(i + 2, "invalid amplitude"))?,
        );
    }
    Ok((times, amps))
}

/// Sidecar describing how WAV integers map back to amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavMetadata {
    pub sample_rate: u32,
    pub samples: usize,
    pub bits_per_sample: u16,
    /// Largest absolute amplitude in the impulse.
    pub peak_amplitude: f64,
    /// `pcm = round(amplitude * normalization)`; zero for a silent impulse.
    pub normalization: f64,
}

/// Writes a mono peak-normalised 16-bit WAV plus `<path>.json` metadata.
pub fn write_impulse_wav<T: Real>(
    path: &Path,
    impulse: &ImpulseResponse<T>,
) -> Result<WavMetadata, ExportError> {
    let peak = impulse
        .samples
        .iter()
        .map(|x| x.as_f64().abs())
        .fold(0.0, f64::max);
    let normalization = if peak > 0.0 {
        f64::from(i16::MAX) / peak
    } else {
        0.0
    };
    let sample_rate = impulse.sample_rate.as_f64().round() as u32;
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |source| ExportError::Wav {
        path: path.to_owned(),
        source,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for x in &impulse.samples {
        let v = (x.as_f64() * normalization)
            .round()
            .clamp(f64::from(i16::MIN), f64::from(i16::MAX));
        w.write_sample(v as i16).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)?;
    let meta = WavMetadata {
        sample_rate,
        samples: impulse.len(),
        bits_per_sample: 16,
        peak_amplitude: peak,
        normalization,
    };
    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&sidecar, json + "\n").map_err(io_err(&sidecar))?;
    Ok(meta)
}

pub fn sidecar_path(wav: &Path) -> PathBuf {
    let mut s = wav.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Peak (largest |amplitude|) annotation for plot data; first index wins ties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub time_s: f64,
    pub amplitude: f64,
}

pub fn find_peak(times: &[f64], amps: &[f64]) -> Option<Peak> {
    let mut best: Option<usize> = None;
    for (i, a) in amps.iter().enumerate() {
        if best.is_none_or(|b| a.abs() > amps[b].abs()) {
            best = Some(i);
        }
    }
    best.map(|index| Peak {
        index,
        time_s: times[index],
        amplitude: amps[index],
    })
}

/// Whitespace-separated `time_s amplitude envelope` columns under `#` annotations.
pub fn write_plot_data(
    path: &Path,
    times: &[f64],
    amps: &[f64],
    envelope: &[f64],
) -> Result<(), ExportError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let peak = find_peak(times, amps).unwrap_or(Peak {
        index: 0,
        time_s: 0.0,
        amplitude: 0.0,
    });
    let body = (|| -> io::Result<()> {
        writeln!(w, "# peak_index {}", peak.index)?;
        writeln!(w, "# peak_time_s {}", peak.time_s)?;
        writeln!(w, "# peak_amplitude {}", peak.amplitude)?;
        writeln!(w, "# columns: time_s amplitude envelope")?;
        for ((t, a), e) in times.iter().zip(amps).zip(envelope) {
            writeln!(w, "{t} {a} {e}")?;
        }
        w.flush()
    })();
    body.map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse() -> ImpulseResponse<f64> {
        ImpulseResponse {
            samples: vec![0.0, 0.5, -1.25, 0.125],
            sample_rate: 400_000.0,
        }
    }

    #[test]
    fn csv_layout_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_impulse_csv(&p, &impulse()).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("time_s,amplitude\n0,0\n0.0000025,0.5\n"));
        let (t, a) = read_impulse_csv(&p).unwrap();
        assert_eq!(a, impulse().samples);
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn wav_is_peak_normalised_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let meta = write_impulse_wav(&p, &impulse()).unwrap();
        assert_eq!(meta.peak_amplitude, 1.25);
        let r = hound::WavReader::open(&p).unwrap();
        assert_eq!(r.spec().sample_rate, 400_000);
        let s: Vec<i16> = r.into_samples::<i16>().map(Result::unwrap).collect();
        assert_eq!(s[2], -32767);
        assert_eq!(s[1], (0.5f64 * 32767.0 / 1.25).round() as i16);
        let side: WavMetadata =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(side, meta);
    }

    #[test]
    fn silent_wav_has_zero_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        let imp = ImpulseResponse {
            samples: vec![0.0; 8],
            sample_rate: 1000.0,
        };
        assert_eq!(write_impulse_wav(&p, &imp).unwrap().normalization, 0.0);
    }

    #[test]
    fn peak_is_first_largest_magnitude() {
        let p = find_peak(&[0.0, 1.0, 2.0], &[0.5, -2.0, 2.0]).unwrap();
        assert_eq!(p.index, 1);
        assert!(find_peak(&[], &[]).is_none());
    }

    #[test]
    fn bad_csv_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "t,a\n0,0\n").unwrap();
        assert!(matches!(
            read_impulse_csv(&p),
            Err(ExportError::Format { line: 1, .. })
        ));
    }
}
