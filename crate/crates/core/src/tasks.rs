//! Synthetic sequence-regression tasks and the dataset CSV format.
//!
//! Datasets are stored with header `k,s1,..,sm,d1,..,dr` and one row per
//! step `k = 0..=N`. Values are written in shortest round-trip decimal form,
//! so reading a written file gives back the identical sequence.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{BrnnError, Result};
use crate::model::Sequence;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub enum TaskKind {
    /// `s[k] = sin(ω k + φ) + noise`, `d[k] = sin(ω (k+1) + φ)`: one-step-ahead prediction.
    SineTrack { omega: f64, phase: f64 },
    /// White noise through the biquad
    /// `d[k] = b0 s[k] + b1 s[k-1] + b2 s[k-2] − a1 d[k-1] − a2 d[k-2]`.
    BandpassFilter {
        a1: f64,
        a2: f64,
        b0: f64,
        b1: f64,
        b2: f64,
    },
    /// Noise input, target delayed by `lag` steps (zero before the lag).
    LagCopy { lag: usize },
}

impl TaskKind {
    /// A resonator with poles at radius `r`, angle `θ` and zeros at `±1`,
    /// normalized to unit gain at the center frequency.
    pub fn resonator(r: f64, theta: f64) -> TaskKind {
        let g = 0.5 * (1.0 - r * r);
        TaskKind::BandpassFilter {
            a1: -2.0 * r * theta.cos(),
            a2: r * r,
            b0: g,
            b1: 0.0,
            b2: -g,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::SineTrack { .. } => "sine",
            TaskKind::BandpassFilter { .. } => "bandpass",
            TaskKind::LagCopy { .. } => "lag",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub horizon: usize,
    /// Input channels. Every channel carries the same kind of signal; for the
    /// noise-driven tasks each channel gets its own draws.
    pub m: usize,
    /// Target channels; channel `j` is built from input channel `j % m`.
    pub r: usize,
    /// Amplitude of uniform noise: added to the sine input, or the whole
    /// input signal for the filter and lag tasks.
    pub noise: f64,
    pub seed: u64,
}

impl TaskSpec {
    pub fn sine(horizon: usize, omega: f64) -> Self {
        TaskSpec {
            kind: TaskKind::SineTrack { omega, phase: 0.0 },
            horizon,
            m: 1,
            r: 1,
            noise: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(BrnnError::Config("horizon N must be at least 1".into()));
        }
        if self.m == 0 || self.r == 0 {
            return Err(BrnnError::Config("m and r must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(BrnnError::Config(
                "noise amplitude must be finite and >= 0".into(),
            ));
        }
        match self.kind {
            TaskKind::SineTrack { omega, phase } => {
                if !omega.is_finite() || !phase.is_finite() {
                    return Err(BrnnError::Config("ω and φ must be finite".into()));
                }
            }
            TaskKind::BandpassFilter { a1, a2, .. } => {
                // z² + a1 z + a2 has both roots inside the unit circle iff
                // |a2| < 1 and |a1| < 1 + a2.
                if !(a2.abs() < 1.0 && a1.abs() < 1.0 + a2) {
                    return Err(BrnnError::Config(format!(
                        "filter with a1={a1}, a2={a2} has poles on or outside the unit circle"
                    )));
                }
                if self.noise == 0.0 {
                    return Err(BrnnError::Config(
                        "bandpass task needs a positive noise amplitude for its input".into(),
                    ));
                }
            }
            TaskKind::LagCopy { lag } => {
                if lag >= self.horizon {
                    return Err(BrnnError::Config(format!(
                        "lag {lag} must be below the horizon {}",
                        self.horizon
                    )));
                }
                if self.noise == 0.0 {
                    return Err(BrnnError::Config(
                        "lag task needs a positive noise amplitude for its input".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Generates the sequence described by `spec`. Deterministic in `spec.seed`.
pub fn gen_task(spec: &TaskSpec) -> Result<Sequence> {
    spec.validate()?;
    let steps = spec.horizon + 1;
    let mut rng = SplitMix64::new(spec.seed);

    // inputs[k][j], draws ordered by k then channel
    let (inputs, targets): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match spec.kind {
        TaskKind::SineTrack { omega, phase } => {
            let s = (0..steps)
                .map(|k| {
                    let clean = (omega * k as f64 + phase).sin();
                    (0..spec.m)
                        .map(|_| {
                            if spec.noise > 0.0 {
                                clean + rng.symmetric(spec.noise)
                            } else {
                                clean
                            }
                        })
                        .collect()
                })
                .collect();
            let d = (0..steps)
                .map(|k| vec![(omega * (k + 1) as f64 + phase).sin(); spec.r])
                .collect();
            (s, d)
        }
        TaskKind::BandpassFilter { a1, a2, b0, b1, b2 } => {
            let s: Vec<Vec<f64>> = (0..steps)
                .map(|_| (0..spec.m).map(|_| rng.symmetric(spec.noise)).collect())
                .collect();
            let mut d = vec![vec![0.0; spec.r]; steps];
            for j in 0..spec.r {
                let ch = j % spec.m;
                let at = |k: usize, back: usize| if k >= back { s[k - back][ch] } else { 0.0 };
                for k in 0..steps {
                    let dk1 = if k >= 1 { d[k - 1][j] } else { 0.0 };
                    let dk2 = if k >= 2 { d[k - 2][j] } else { 0.0 };
                    d[k][j] = b0 * at(k, 0) + b1 * at(k, 1) + b2 * at(k, 2) - a1 * dk1 - a2 * dk2;
                }
            }
            (s, d)
        }
        TaskKind::LagCopy { lag } => {
            let s: Vec<Vec<f64>> = (0..steps)
                .map(|_| (0..spec.m).map(|_| rng.symmetric(spec.noise)).collect())
                .collect();
            let d = (0..steps)
                .map(|k| {
                    (0..spec.r)
                        .map(|j| {
                            if k >= lag {
                                s[k - lag][j % spec.m]
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            (s, d)
        }
    };

    Sequence::new(
        inputs.into_iter().map(DVector::from_vec).collect(),
        targets.into_iter().map(DVector::from_vec).collect(),
    )
}

pub fn write_csv_to<W: Write>(seq: &Sequence, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((1..=seq.m()).map(|j| format!("s{j}")));
    header.extend((1..=seq.r()).map(|j| format!("d{j}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for (k, (s, d)) in seq.s.iter().zip(&seq.d).enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(s.iter().chain(d.iter()).map(|v| v.to_string()));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv(seq: &Sequence, path: impl AsRef<Path>) -> Result<()> {
    write_csv_to(seq, File::create(path)?)
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Sequence> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let (m, r) = parse_header(&header)?;

    let mut s = Vec::new();
    let mut d = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(k + 2, |p| p.line() as usize);
        if rec.len() != 1 + m + r {
            return Err(BrnnError::parse(
                line,
                format!("expected {} columns, found {}", 1 + m + r, rec.len()),
            ));
        }
        let idx: usize = rec[0]
            .parse()
            .map_err(|_| BrnnError::parse(line, format!("bad step index '{}'", &rec[0])))?;
        if idx != k {
            return Err(BrnnError::parse(
                line,
                format!("expected step {k}, found {idx}"),
            ));
        }
        let mut vals = Vec::with_capacity(m + r);
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| BrnnError::parse(line, format!("bad number '{field}'")))?;
            if !v.is_finite() {
                return Err(BrnnError::parse(
                    line,
                    format!("non-finite value '{field}'"),
                ));
            }
            vals.push(v);
        }
        s.push(DVector::from_column_slice(&vals[..m]));
        d.push(DVector::from_column_slice(&vals[m..]));
    }
    if s.len() < 2 {
        return Err(BrnnError::parse(
            s.len() + 1,
            format!("dataset has {} row(s); N >= 1 needs at least 2", s.len()),
        ));
    }
    Sequence::new(s, d)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Sequence> {
    read_csv_from(File::open(path)?)
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let cols: Vec<&str> = header.iter().collect();
    if cols.first() != Some(&"k") {
        return Err(BrnnError::parse(1, "header must start with 'k'"));
    }
    let m = cols[1..].iter().take_while(|c| c.starts_with('s')).count();
    let r = cols.len() - 1 - m;
    for (j, c) in cols[1..=m].iter().enumerate() {
        if *c != format!("s{}", j + 1) {
            return Err(BrnnError::parse(
                1,
                format!("expected column s{}, found '{c}'", j + 1),
            ));
        }
    }
    for (j, c) in cols[1 + m..].iter().enumerate() {
        if *c != format!("d{}", j + 1) {
            return Err(BrnnError::parse(
                1,
                format!("expected column d{}, found '{c}'", j + 1),
            ));
        }
    }
    if m == 0 || r == 0 {
        return Err(BrnnError::parse(1, "need at least one s and one d column"));
    }
    Ok((m, r))
}

fn csv_err(e: csv::Error) -> BrnnError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BrnnError::Io(io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => BrnnError::parse(
            line,
            format!("expected {expected_len} columns, found {len}"),
        ),
        other => BrnnError::parse(line, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frequency_sine_is_silent() {
        let seq = gen_task(&TaskSpec::sine(10, 0.0)).unwrap();
        assert!(seq.s.iter().chain(&seq.d).all(|v| v[0] == 0.0));
    }

    #[test]
    fn sine_targets_lead_inputs() {
        let seq = gen_task(&TaskSpec::sine(20, 0.3)).unwrap();
        for k in 0..20 {
            assert_eq!(seq.d[k][0], seq.s[k + 1][0]);
        }
    }

    #[test]
    fn lag_copy_delays_input() {
        let spec = TaskSpec {
            kind: TaskKind::LagCopy { lag: 2 },
            horizon: 9,
            m: 1,
            r: 1,
            noise: 1.0,
            seed: 3,
        };
        let seq = gen_task(&spec).unwrap();
        assert_eq!(seq.d[0][0], 0.0);
        assert_eq!(seq.d[1][0], 0.0);
        for k in 2..10 {
            assert_eq!(seq.d[k][0], seq.s[k - 2][0]);
        }
        let bad = TaskSpec {
            kind: TaskKind::LagCopy { lag: 9 },
            ..spec
        };
        assert!(gen_task(&bad).is_err());
    }

    #[test]
    fn identity_filter_passes_input_through() {
        let spec = TaskSpec {
            kind: TaskKind::BandpassFilter {
                a1: 0.0,
                a2: 0.0,
                b0: 1.0,
                b1: 0.0,
                b2: 0.0,
            },
            horizon: 50,
            m: 2,
            r: 2,
            noise: 1.0,
            seed: 9,
        };
        let seq = gen_task(&spec).unwrap();
        assert_eq!(seq.s, seq.d);
    }

    #[test]
    fn unstable_filter_is_rejected() {
        let spec = TaskSpec {
            kind: TaskKind::BandpassFilter {
                a1: -2.0,
                a2: 1.0,
                b0: 1.0,
                b1: 0.0,
                b2: 0.0,
            },
            horizon: 5,
            m: 1,
            r: 1,
            noise: 1.0,
            seed: 0,
        };
        assert!(matches!(gen_task(&spec), Err(BrnnError::Config(_))));
    }

    #[test]
    fn header_gives_dimensions() {
        let text = "k,s1,s2,d1\n0,1,2,3\n1,4,5,6\n";
        let seq = read_csv_from(text.as_bytes()).unwrap();
        assert_eq!((seq.m(), seq.r(), seq.horizon()), (2, 1, 1));
        assert_eq!(seq.d[1][0], 6.0);
    }

    #[test]
    fn single_row_is_rejected() {
        let err = read_csv_from("k,s1,d1\n0,1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, BrnnError::Parse { .. }), "{err:?}");
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let err = read_csv_from("k,s1,d1\n0,1,2\n1,x,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, BrnnError::Parse { line: 3, .. }), "{err:?}");
        let err = read_csv_from("k,s1,d1\n0,1,2\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, BrnnError::Parse { line: 3, .. }), "{err:?}");
        let err = read_csv_from("k,s1,d1\n0,1,2\n2,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, BrnnError::Parse { line: 3, .. }), "{err:?}");
        let err = read_csv_from("k,x1,d1\n0,1,2\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, BrnnError::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = TaskSpec {
            kind: TaskKind::resonator(0.9, std::f64::consts::FRAC_PI_4),
            horizon: 100,
            m: 1,
            r: 1,
            noise: 3f64.sqrt(),
            seed: 17,
        };
        assert_eq!(gen_task(&spec).unwrap(), gen_task(&spec).unwrap());
        let other = TaskSpec {
            seed: 18,
            ..spec.clone()
        };
        assert_ne!(gen_task(&spec).unwrap(), gen_task(&other).unwrap());
    }
}
