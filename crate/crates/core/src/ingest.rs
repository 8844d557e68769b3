//! Loading per-cycle capacity tables and synthesizing degradation curves.
//!
//! Real datasets arrive as one capacity reading per cycle; the loader
//! normalizes them to SoH against a nominal capacity. The synthesizer
//! covers the same regimes the measured data spans: smooth knee-shaped
//! fades and irregular trajectories with capacity-regeneration spikes.

use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::Path;

use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{soh_from_capacity, SohSeries};

/// Values are clamped to at least this after noise and spikes.
const SYNTH_FLOOR: f64 = 1e-3;

/// A CSV column picked by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    fn describe(&self) -> String {
        match self {
            ColumnRef::Name(n) => format!("`{n}`"),
            ColumnRef::Index(i) => format!("#{i}"),
        }
    }
}

/// How to read one cycle/capacity file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar", default)]
pub struct CsvSchema<F: Scalar> {
    pub cycle_column: ColumnRef,
    pub capacity_column: ColumnRef,
    pub delimiter: char,
    pub has_header: bool,
    /// Amp-hours; capacities are divided by this to get SoH.
    pub nominal_capacity: F,
}

impl<F: Scalar> Default for CsvSchema<F> {
    fn default() -> Self {
        Self {
            cycle_column: ColumnRef::Name("cycle".into()),
            capacity_column: ColumnRef::Name("soh".into()),
            delimiter: ',',
            has_header: true,
            nominal_capacity: F::one(),
        }
    }
}

impl<F: Scalar> CsvSchema<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_capacity > F::zero()) {
            return Err(Error::invalid(
                "nominal_capacity",
                format!("must be positive, got {}", self.nominal_capacity),
            ));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::invalid("delimiter", "must be a single ASCII character"));
        }
        Ok(())
    }
}

/// Schemas for the common public dataset exports, keyed by a short name.
///
/// `mit` expects `cycle_index`/`QD` at 1.1 Ah nominal, `nasa` expects
/// `cycle`/`capacity` at 2.0 Ah, `calce` expects `Cycle_Index`/
/// `Discharge_Capacity(Ah)` at 1.35 Ah, and `soh` reads an already
/// normalized `cycle`/`soh` table (nominal 1.0, the layout
/// [`write_soh_csv`] emits).
pub fn schema_presets<F: Scalar>() -> Vec<(&'static str, CsvSchema<F>)> {
    let named = |cycle: &str, capacity: &str, nominal: f64| CsvSchema {
        cycle_column: ColumnRef::Name(cycle.into()),
        capacity_column: ColumnRef::Name(capacity.into()),
        nominal_capacity: F::from_f64_lossy(nominal),
        ..CsvSchema::default()
    };
    vec![
        ("mit", named("cycle_index", "QD", 1.1)),
        ("nasa", named("cycle", "capacity", 2.0)),
        ("calce", named("Cycle_Index", "Discharge_Capacity(Ah)", 1.35)),
        ("soh", named("cycle", "soh", 1.0)),
    ]
}

/// Looks up one of the [`schema_presets`] by name.
pub fn schema_preset<F: Scalar>(name: &str) -> Result<CsvSchema<F>> {
    schema_presets()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
        .ok_or_else(|| {
            Error::invalid("schema", format!("unknown schema preset `{name}`; expected mit|nasa|calce|soh"))
        })
}

/// Reads a cycle/capacity CSV into a SoH series.
///
/// Rows are sorted by cycle; duplicate cycle indices are an error, as are
/// unparseable cells (reported with their line and column). Lines starting
/// with `#` are skipped. The series label is the file stem.
pub fn load_cycle_capacity_csv<F: Scalar>(
    path: &Path,
    schema: &CsvSchema<F>,
) -> Result<SohSeries<F>> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.has_header)
        .comment(Some(b'#'))
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("opening {}: {e}", path.display())))?;

    let resolve = |column: &ColumnRef, headers: Option<&csv::StringRecord>| -> Result<usize> {
        match column {
            ColumnRef::Index(i) => Ok(*i),
            ColumnRef::Name(name) => {
                let headers = headers.ok_or_else(|| {
                    Error::Data(format!(
                        "schema refers to column `{name}` by name but has_header is false"
                    ))
                })?;
                headers.iter().position(|h| h == name).ok_or_else(|| {
                    Error::Data(format!(
                        "column `{name}` not found in header [{}]",
                        headers.iter().collect::<Vec<_>>().join(", ")
                    ))
                })
            }
        }
    };
    let headers = if schema.has_header {
        Some(reader.headers().map_err(|e| Error::Data(format!("reading header: {e}")))?.clone())
    } else {
        None
    };
    let cycle_idx = resolve(&schema.cycle_column, headers.as_ref())?;
    let capacity_idx = resolve(&schema.capacity_column, headers.as_ref())?;

    let mut rows: Vec<(u32, F)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("reading row: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |idx: usize, which: &ColumnRef| -> Result<&str> {
            record.get(idx).ok_or_else(|| {
                Error::Data(format!(
                    "line {line}: column {} (index {idx}) is out of range for a {}-field row",
                    which.describe(),
                    record.len()
                ))
            })
        };
        let cycle_cell = cell(cycle_idx, &schema.cycle_column)?;
        let cycle: u32 = cycle_cell.trim().parse().map_err(|_| {
            Error::Data(format!(
                "line {line}, column {}: cannot parse `{cycle_cell}` as a cycle index",
                schema.cycle_column.describe()
            ))
        })?;
        let capacity_cell = cell(capacity_idx, &schema.capacity_column)?;
        let capacity: f64 = capacity_cell.trim().parse().map_err(|_| {
            Error::Data(format!(
                "line {line}, column {}: cannot parse `{capacity_cell}` as a capacity",
                schema.capacity_column.describe()
            ))
        })?;
        rows.push((cycle, F::from_f64_lossy(capacity)));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    rows.sort_by_key(|(c, _)| *c);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Data(format!("duplicate cycle index {}", pair[0].0)));
        }
    }

    let cycles: Vec<u32> = rows.iter().map(|(c, _)| *c).collect();
    let values = rows
        .iter()
        .map(|(_, q)| soh_from_capacity(*q, schema.nominal_capacity))
        .collect::<Result<Vec<F>>>()?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    SohSeries::new(cycles, values, schema.nominal_capacity, label)
}

/// Writes a series as `cycle,soh` rows; [`schema_preset`]'s `soh` entry
/// reads it back. A generator seed, when given, is recorded as a leading
/// `# seed:` comment the loader skips.
pub fn write_soh_csv<F: Scalar>(
    path: &Path,
    series: &SohSeries<F>,
    seed: Option<u64>,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    if let Some(seed) = seed {
        writeln!(file, "# seed: {seed}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["cycle", "soh"]).map_err(|e| Error::Data(format!("writing csv: {e}")))?;
    for (cycle, value) in series.cycles().iter().zip(series.values()) {
        w.write_record([cycle.to_string(), value.to_string()])
            .map_err(|e| Error::Data(format!("writing csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Base shape of a synthetic trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthModel {
    /// Straight fade from initial to end SoH.
    Linear,
    /// Knee-shaped fade: slow early loss accelerating past the knee. The
    /// accumulated loss follows a normalized logistic whose inflection sits
    /// exactly at `knee_position`, so the curve passes through both
    /// endpoints and has one curvature sign change.
    ExponentialKnee,
}

impl std::fmt::Display for SynthModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SynthModel::Linear => write!(f, "linear"),
            SynthModel::ExponentialKnee => write!(f, "exponential-knee"),
        }
    }
}

impl std::str::FromStr for SynthModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SynthModel::Linear),
            "exponential-knee" | "knee" => Ok(SynthModel::ExponentialKnee),
            other => Err(Error::invalid(
                "model",
                format!("unknown synth model `{other}`; expected linear|exponential-knee"),
            )),
        }
    }
}

/// Parameters of one synthetic degradation trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SynthParams<F: Scalar> {
    pub length: usize,
    pub model: SynthModel,
    pub initial_soh: F,
    pub end_soh: F,
    /// Fraction of the lifetime at which the knee sits (knee model only).
    pub knee_position: F,
    pub knee_sharpness: F,
    /// Probability per cycle of a regeneration spike.
    pub spike_rate: F,
    pub spike_amplitude: F,
    /// Time constant, in cycles, of a spike's decay back to trend.
    pub spike_decay: F,
    pub noise_sigma: F,
    pub seed: u64,
}

impl<F: Scalar> SynthParams<F> {
    pub fn validate(&self) -> Result<()> {
        if self.length < 1 {
            return Err(Error::invalid("length", "must be at least 1"));
        }
        let zero = F::zero();
        if !(self.end_soh > zero) {
            return Err(Error::invalid("end_soh", format!("must be positive, got {}", self.end_soh)));
        }
        if !(self.end_soh < self.initial_soh) {
            return Err(Error::invalid(
                "end_soh",
                format!("must be below initial_soh, got {} >= {}", self.end_soh, self.initial_soh),
            ));
        }
        if self.initial_soh > F::from_f64_lossy(1.1) {
            return Err(Error::invalid(
                "initial_soh",
                format!("must be at most 1.1, got {}", self.initial_soh),
            ));
        }
        if self.model == SynthModel::ExponentialKnee {
            if !(self.knee_position > zero && self.knee_position < F::one()) {
                return Err(Error::invalid(
                    "knee_position",
                    format!("must be in (0, 1), got {}", self.knee_position),
                ));
            }
            if !(self.knee_sharpness > zero) {
                return Err(Error::invalid(
                    "knee_sharpness",
                    format!("must be positive, got {}", self.knee_sharpness),
                ));
            }
        }
        if self.spike_rate < zero || self.spike_rate > F::one() {
            return Err(Error::invalid(
                "spike_rate",
                format!("must be in [0, 1], got {}", self.spike_rate),
            ));
        }
        if self.spike_amplitude < zero {
            return Err(Error::invalid("spike_amplitude", "must be nonnegative"));
        }
        if self.spike_rate > zero && !(self.spike_decay > zero) {
            return Err(Error::invalid(
                "spike_decay",
                format!("must be positive when spikes are on, got {}", self.spike_decay),
            ));
        }
        if self.noise_sigma < zero {
            return Err(Error::invalid("noise_sigma", "must be nonnegative"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Noiseless base value at sample `t` of `len`, in f64 for reproducibility
/// across scalar widths.
fn base_value<F: Scalar>(params: &SynthParams<F>, t: usize, len: usize) -> f64 {
    let initial = params.initial_soh.to_f64_lossy();
    let end = params.end_soh.to_f64_lossy();
    let u = if len > 1 { t as f64 / (len - 1) as f64 } else { 0.0 };
    let progress = match params.model {
        SynthModel::Linear => u,
        SynthModel::ExponentialKnee => {
            let k = params.knee_sharpness.to_f64_lossy();
            let p = params.knee_position.to_f64_lossy();
            let lo = sigmoid(-k * p);
            let hi = sigmoid(k * (1.0 - p));
            (sigmoid(k * (u - p)) - lo) / (hi - lo)
        }
    };
    initial - (initial - end) * progress
}

/// Generates one deterministic synthetic SoH series.
///
/// Composition order: base curve, plus each spike's `amplitude * e^(-d/decay)`
/// contribution to every later cycle (d = cycles since the spike), plus
/// Gaussian noise, floored at a small positive constant. Spike sites are
/// drawn first, then the noise sequence, from the same seeded generator.
pub fn synth_degradation<F: Scalar>(params: &SynthParams<F>) -> Result<SohSeries<F>> {
    synth_named(params, "synthetic")
}

/// As [`synth_degradation`] with an explicit series label.
pub fn synth_named<F: Scalar>(
    params: &SynthParams<F>,
    label: impl Into<String>,
) -> Result<SohSeries<F>> {
    params.validate()?;
    let len = params.length;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut spikes: Vec<usize> = Vec::new();
    let rate = params.spike_rate.to_f64_lossy();
    if rate > 0.0 {
        let bernoulli = Bernoulli::new(rate)
            .map_err(|e| Error::invalid("spike_rate", format!("not a probability: {e}")))?;
        for t in 0..len {
            if bernoulli.sample(&mut rng) {
                spikes.push(t);
            }
        }
    }
    let sigma = params.noise_sigma.to_f64_lossy();
    let noise: Vec<f64> = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::invalid("noise_sigma", format!("bad sigma: {e}")))?;
        (0..len).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; len]
    };

    let amplitude = params.spike_amplitude.to_f64_lossy();
    let decay = params.spike_decay.to_f64_lossy();
    let values: Vec<F> = (0..len)
        .map(|t| {
            let mut v = base_value(params, t, len);
            for &s in &spikes {
                if t >= s {
                    v += amplitude * (-((t - s) as f64) / decay).exp();
                }
            }
            v += noise[t];
            F::from_f64_lossy(v.max(SYNTH_FLOOR))
        })
        .collect();
    SohSeries::new((0..len as u32).collect(), values, F::one(), label)
}

/// The four synthetic regimes used throughout the tests and docs: smooth
/// knee-shaped fades (noiseless) and irregular spiky ones, in short and
/// long lifetimes.
pub fn preset_profiles<F: Scalar>() -> Vec<(&'static str, SynthParams<F>)> {
    let f = F::from_f64_lossy;
    vec![
        (
            "smooth-short",
            SynthParams {
                length: 557,
                model: SynthModel::ExponentialKnee,
                initial_soh: f(1.0),
                end_soh: f(0.78),
                knee_position: f(0.7),
                knee_sharpness: f(10.0),
                spike_rate: f(0.0),
                spike_amplitude: f(0.0),
                spike_decay: f(1.0),
                noise_sigma: f(0.0),
                seed: 42,
            },
        ),
        (
            "irregular-short",
            SynthParams {
                length: 168,
                model: SynthModel::Linear,
                initial_soh: f(1.0),
                end_soh: f(0.85),
                knee_position: f(0.5),
                knee_sharpness: f(10.0),
                spike_rate: f(0.05),
                spike_amplitude: f(0.01),
                spike_decay: f(5.0),
                noise_sigma: f(0.002),
                seed: 42,
            },
        ),
        (
            "smooth-long",
            SynthParams {
                length: 1224,
                model: SynthModel::ExponentialKnee,
                initial_soh: f(1.0),
                end_soh: f(0.8),
                knee_position: f(0.75),
                knee_sharpness: f(12.0),
                spike_rate: f(0.0),
                spike_amplitude: f(0.0),
                spike_decay: f(1.0),
                noise_sigma: f(0.0),
                seed: 42,
            },
        ),
        (
            "irregular-long",
            SynthParams {
                length: 1887,
                model: SynthModel::Linear,
                initial_soh: f(1.0),
                end_soh: f(0.7),
                knee_position: f(0.5),
                knee_sharpness: f(10.0),
                spike_rate: f(0.03),
                spike_amplitude: f(0.008),
                spike_decay: f(8.0),
                noise_sigma: f(0.0015),
                seed: 42,
            },
        ),
    ]
}

/// Looks up one of the [`preset_profiles`] by name.
pub fn preset<F: Scalar>(name: &str) -> Result<SynthParams<F>> {
    preset_profiles()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, p)| p)
        .ok_or_else(|| {
            Error::invalid(
                "preset",
                format!(
                    "unknown preset `{name}`; expected smooth-short|irregular-short|smooth-long|irregular-long"
                ),
            )
        })
}

/// Generates a preset series labeled with the preset's name.
pub fn preset_series<F: Scalar>(name: &str) -> Result<SohSeries<F>> {
    synth_named(&preset::<F>(name)?, name)
}
