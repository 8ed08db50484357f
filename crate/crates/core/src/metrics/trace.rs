use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Provenance and run diagnostics attached to a trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub scenario_name: String,
    /// SHA-256 of the canonical scenario text.
    pub scenario_hash: String,
    pub version: String,
    /// Largest per-step energy residual relative to the energy exchanged in that step.
    pub max_energy_residual: f64,
    pub ess_saturated_steps: u64,
    pub qs_clamped_steps: u64,
    pub undervoltage_steps: u64,
}

/// Uniformly sampled, named signal record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub time: Vec<f64>,
    channels: IndexMap<String, Vec<f64>>,
    pub metadata: TraceMetadata,
}

impl SimulationTrace {
    /// Empty trace with the given channel names, which must be unique.
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let mut channels = IndexMap::new();
        for n in names {
            let n = n.into();
            assert!(channels.insert(n.clone(), Vec::new()).is_none(), "duplicate channel `{n}`");
        }
        Self { time: Vec::new(), channels, metadata: TraceMetadata::default() }
    }

    /// Builds a trace from already sampled columns of equal length.
    pub fn from_columns(time: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Self {
        let mut t = Self::new(columns.iter().map(|(n, _)| n.clone()));
        for (name, col) in columns {
            assert_eq!(col.len(), time.len(), "channel `{name}` length");
            t.channels[&name] = col;
        }
        t.time = time;
        t
    }

    pub fn push_row(&mut self, t: f64, values: &[f64]) {
        assert_eq!(values.len(), self.channels.len());
        self.time.push(t);
        for (col, v) in self.channels.values_mut().zip(values) {
            col.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Sample spacing, from the first two samples.
    pub fn dt(&self) -> Option<f64> {
        (self.time.len() >= 2).then(|| self.time[1] - self.time[0])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(String::as_str)
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }

    /// Index range of samples with `start <= t <= end`.
    pub fn index_range(&self, start: f64, end: f64) -> std::ops::Range<usize> {
        let eps = self.dt().unwrap_or(0.0) * 1e-6;
        let lo = self.time.partition_point(|&t| t < start - eps);
        let hi = self.time.partition_point(|&t| t <= end + eps);
        lo..hi.max(lo)
    }

    /// `time,<channel>...` with nine significant digits and LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut line = String::from("time");
        for n in self.channels.keys() {
            line.push(',');
            line.push_str(n);
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
        let cols: Vec<&Vec<f64>> = self.channels.values().collect();
        for (k, t) in self.time.iter().enumerate() {
            line.clear();
            line.push_str(&format_sig(*t, 9));
            for c in &cols {
                line.push(',');
                line.push_str(&format_sig(c[k], 9));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Shortest rendering of `x` with `digits` significant digits, in the style of `%g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
