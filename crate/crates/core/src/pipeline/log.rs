use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::stats;

/// Header of the flight-log CSV, in order.
pub const LOG_COLUMNS: [&str; 6] = ["time_s", "px_m", "py_m", "pz_m", "speed_mps", "anemo_mps"];

/// Fewest pre-takeoff samples accepted for an ambient estimate.
pub const MIN_AMBIENT_SAMPLES: usize = 10;

/// One synchronized sample: drone pose in the probe frame (probe at the
/// origin, z up) and the probe reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// s
    pub time: f64,
    /// m
    pub drone_position: [f64; 3],
    /// Magnitude of the drone velocity, m/s.
    pub drone_speed: f64,
    /// m/s
    pub anemometer_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedLog {
    pub records: Vec<MeasurementRecord>,
    pub rejected: Vec<RejectedRow>,
}

/// Parses a flight log. Rows violating the record invariants are skipped and
/// listed in [`LoadedLog::rejected`].
pub fn load_log<R: Read>(source: R) -> Result<LoadedLog> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| PipelineError::Format(e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(PipelineError::EmptyInput);
    }
    let mut columns = [0usize; 6];
    for (slot, name) in columns.iter_mut().zip(LOG_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PipelineError::MissingColumn(name.to_string()))?;
    }

    let mut loaded = LoadedLog::default();
    let mut last_time = f64::NEG_INFINITY;
    for row in reader.records() {
        let row = row.map_err(|e| PipelineError::Format(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let mut values = [0.0; 6];
        let mut problem = None;
        for (value, (&col, name)) in values.iter_mut().zip(columns.iter().zip(LOG_COLUMNS)) {
            match row.get(col).map(str::parse::<f64>) {
                Some(Ok(v)) if v.is_finite() => *value = v,
                Some(_) => {
                    problem = Some(format!("`{name}` is not a finite number"));
                    break;
                }
                None => {
                    problem = Some(format!("`{name}` is missing"));
                    break;
                }
            }
        }
        let [time, px, py, pz, speed, anemo] = values;
        if problem.is_none() {
            problem = if anemo < 0.0 {
                Some(format!("negative anemometer speed {anemo}"))
            } else if speed < 0.0 {
                Some(format!("negative drone speed {speed}"))
            } else if time < last_time {
                Some(format!("time {time} goes backwards (previous {last_time})"))
            } else {
                None
            };
        }
        match problem {
            Some(reason) => loaded.rejected.push(RejectedRow { line, reason }),
            None => {
                last_time = time;
                loaded.records.push(MeasurementRecord {
                    time,
                    drone_position: [px, py, pz],
                    drone_speed: speed,
                    anemometer_speed: anemo,
                });
            }
        }
    }
    if loaded.records.is_empty() && loaded.rejected.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    Ok(loaded)
}

/// Writes records in the log CSV schema, lines starting with `#` first.
pub fn write_log<W: Write>(
    sink: W,
    records: &[MeasurementRecord],
    comments: &[String],
) -> std::io::Result<()> {
    let mut sink = sink;
    for c in comments {
        writeln!(sink, "# {c}")?;
    }
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(LOG_COLUMNS)?;
    for r in records {
        let [x, y, z] = r.drone_position;
        writer.write_record(
            [r.time, x, y, z, r.drone_speed, r.anemometer_speed]
                .iter()
                .map(|v| v.to_string()),
        )?;
    }
    writer.flush()
}

/// Keeps the samples taken while the drone moved no faster than `v_max`.
pub fn filter_hover(records: &[MeasurementRecord], v_max: f64) -> Vec<MeasurementRecord> {
    records
        .iter()
        .filter(|r| r.drone_speed <= v_max)
        .copied()
        .collect()
}

/// Removes a static ambient flow from every reading, clamping at zero.
pub fn subtract_ambient(records: &[MeasurementRecord], ambient: f64) -> Vec<MeasurementRecord> {
    records
        .iter()
        .map(|r| MeasurementRecord {
            anemometer_speed: (r.anemometer_speed - ambient).max(0.0),
            ..*r
        })
        .collect()
}

/// Median probe reading within `window` seconds of the first sample.
pub fn estimate_ambient(records: &[MeasurementRecord], window: f64) -> Result<f64> {
    let Some(start) = records.first().map(|r| r.time) else {
        return Err(PipelineError::InsufficientAmbientSamples {
            found: 0,
            required: MIN_AMBIENT_SAMPLES,
        });
    };
    let readings: Vec<f64> = records
        .iter()
        .take_while(|r| r.time <= start + window)
        .map(|r| r.anemometer_speed)
        .collect();
    if readings.len() < MIN_AMBIENT_SAMPLES {
        return Err(PipelineError::InsufficientAmbientSamples {
            found: readings.len(),
            required: MIN_AMBIENT_SAMPLES,
        });
    }
    Ok(stats::median(&readings).expect("non-empty, finite readings"))
}
