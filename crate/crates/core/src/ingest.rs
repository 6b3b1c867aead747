//! CSV ingestion for insole, ankle-IMU and mocap recordings, plus the
//! amplifier model that turns ADC counts back into sensor voltages.
//!
//! Schemas (UTF-8, comma separated, `.` decimal, one header row):
//!
//! ```text
//! insole: t,p00,...,p34,gx,gy,gz,ax,ay,az     (pressure cells are ADC counts)
//! imu:    t,gx,gy,gz,ax,ay,az
//! mocap:  t,Hips.x,Hips.y,Hips.z,...,RToe.z   (millimetres)
//! ```
//!
//! Empty cells become NaN. Duplicate timestamps keep the last row.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    skeleton_column_names, Channel, FootSide, JointId, SensorSeries, SeriesMeta, SkeletonSeries,
    TimeSeries, ACCEL_CHANNELS, FOOT_WIDTH, GYRO_CHANNELS, PRESSURE_CHANNELS, SKELETON_WIDTH,
};

/// Electrical parameters of the non-inverting amplifier and ADC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplifierParams {
    pub r1_ohms: f64,
    pub r2_ohms: f64,
    pub supply_volts: f64,
    pub adc_bits: u32,
}

impl Default for AmplifierParams {
    fn default() -> Self {
        AmplifierParams {
            r1_ohms: 10_000.0,
            r2_ohms: 10_000.0,
            supply_volts: 3.3,
            adc_bits: 12,
        }
    }
}

impl AmplifierParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r1_ohms > 0.0) {
            return Err(Error::Parameter(format!("R1 must be positive, got {}", self.r1_ohms)));
        }
        if !(self.r2_ohms >= 0.0) {
            return Err(Error::Parameter(format!("R2 must be non-negative, got {}", self.r2_ohms)));
        }
        if !(self.supply_volts > 0.0) {
            return Err(Error::Parameter(format!(
                "supply voltage must be positive, got {}",
                self.supply_volts
            )));
        }
        if !(8..=16).contains(&self.adc_bits) {
            return Err(Error::Parameter(format!("adc_bits {} not in 8..=16", self.adc_bits)));
        }
        Ok(())
    }

    /// Largest representable count, `2^bits - 1`.
    pub fn max_count(&self) -> u32 {
        (1u32 << self.adc_bits) - 1
    }

    /// One ADC step expressed as sensor-side voltage.
    pub fn lsb_volts(&self) -> Result<f64> {
        Ok(self.supply_volts / (amplifier_gain(self)? * self.max_count() as f64))
    }
}

/// Gain of the non-inverting stage: `V_out = (1 + R2/R1) · V_in`.
pub fn amplifier_gain(params: &AmplifierParams) -> Result<f64> {
    if !(params.r1_ohms > 0.0) {
        return Err(Error::Parameter(format!("R1 must be positive, got {}", params.r1_ohms)));
    }
    Ok(1.0 + params.r2_ohms / params.r1_ohms)
}

/// Sensor-side voltage for an ADC reading.
pub fn adc_to_sensor_voltage(count: i64, params: &AmplifierParams) -> Result<f64> {
    params.validate()?;
    let max = params.max_count() as i64;
    if !(0..=max).contains(&count) {
        return Err(Error::Parse {
            location: "adc".into(),
            message: format!("count {count} outside 0..={max}"),
        });
    }
    Ok(count as f64 / max as f64 * params.supply_volts / amplifier_gain(params)?)
}

/// Nearest ADC count for a sensor-side voltage; inverse of
/// [`adc_to_sensor_voltage`] on its image.
pub fn sensor_voltage_to_count(volts: f64, params: &AmplifierParams) -> Result<u32> {
    let gain = amplifier_gain(params)?;
    let max = params.max_count() as f64;
    let count = (volts * gain / params.supply_volts * max).round();
    Ok(count.clamp(0.0, max) as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Abort on the first malformed row.
    Strict,
    /// Skip malformed rows and record them in the report.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

/// What happened while reading one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub source: String,
    pub side: Option<FootSide>,
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub duplicate_timestamps: usize,
    pub malformed: Vec<MalformedRow>,
    pub columns: Vec<String>,
    pub nan_counts: Vec<usize>,
    pub detected_rate_hz: Option<f64>,
    pub time_span: Option<[f64; 2]>,
}

impl IngestReport {
    pub fn nan_total(&self) -> usize {
        self.nan_counts.iter().sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Copy)]
enum CellKind {
    Adc,
    Real,
}

fn insole_columns() -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((0..FOOT_WIDTH).map(|o| Channel::from_foot_offset(o).expect("in range").column_name()))
        .collect()
}

fn imu_columns() -> Vec<String> {
    ["t", "gx", "gy", "gz", "ax", "ay", "az"].map(String::from).to_vec()
}

/// Column names of the insole CSV schema.
pub fn insole_header() -> Vec<String> {
    insole_columns()
}

/// Column names of the mocap CSV schema.
pub fn mocap_header() -> Vec<String> {
    std::iter::once("t".to_string()).chain(skeleton_column_names()).collect()
}

/// Shared row reader: `sources[i]` is the CSV column feeding output value `i`.
fn read_table(
    path: &Path,
    mode: ParseMode,
    header: &csv::StringRecord,
    sources: &[(usize, CellKind)],
    names: Vec<String>,
    params: Option<&AmplifierParams>,
    mut reader: csv::Reader<std::fs::File>,
) -> Result<(TimeSeries, IngestReport)> {
    let width = sources.len();
    let t_col = header
        .iter()
        .position(|h| h.trim() == "t")
        .ok_or_else(|| Error::Format(format!("{}: missing time column \"t\"", path.display())))?;
    let mut report = IngestReport {
        source: path.display().to_string(),
        side: None,
        rows_read: 0,
        rows_kept: 0,
        rows_dropped: 0,
        duplicate_timestamps: 0,
        malformed: Vec::new(),
        columns: names,
        nan_counts: vec![0; width],
        detected_rate_hz: None,
        time_span: None,
    };
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut row = vec![0.0; width];

    for (i, rec) in reader.records().enumerate() {
        report.rows_read += 1;
        let line = i as u64 + 2;
        let parsed = rec
            .map_err(|e| e.to_string())
            .and_then(|rec| parse_row(&rec, header.len(), t_col, sources, params, &mut row).map(|t| (t, rec)));
        let t = match parsed {
            Ok((t, _)) => t,
            Err(reason) => {
                if mode == ParseMode::Strict {
                    return Err(Error::Parse {
                        location: format!("{}:{line}", path.display()),
                        message: reason,
                    });
                }
                report.malformed.push(MalformedRow { line, reason });
                report.rows_dropped += 1;
                continue;
            }
        };
        match times.last() {
            Some(&last) if t == last => {
                let n = times.len();
                values[(n - 1) * width..n * width].copy_from_slice(&row);
                report.duplicate_timestamps += 1;
                report.rows_dropped += 1;
            }
            Some(&last) if t < last => {
                let reason = format!("timestamp {t} precedes {last}");
                if mode == ParseMode::Strict {
                    return Err(Error::Parse {
                        location: format!("{}:{line}", path.display()),
                        message: reason,
                    });
                }
                report.malformed.push(MalformedRow { line, reason });
                report.rows_dropped += 1;
            }
            _ => {
                times.push(t);
                values.extend_from_slice(&row);
            }
        }
    }

    for chunk in values.chunks_exact(width) {
        for (c, v) in chunk.iter().enumerate() {
            if v.is_nan() {
                report.nan_counts[c] += 1;
            }
        }
    }
    report.rows_kept = times.len();
    if let (Some(&a), Some(&b)) = (times.first(), times.last()) {
        report.time_span = Some([a, b]);
        if times.len() > 1 && b > a {
            report.detected_rate_hz = Some((times.len() - 1) as f64 / (b - a));
        }
    }
    let meta = SeriesMeta {
        sample_rate: report.detected_rate_hz,
        ..SeriesMeta::default()
    };
    let series = TimeSeries::new(times, width, values, meta)?;
    Ok((series, report))
}

fn parse_row(
    rec: &csv::StringRecord,
    expected_len: usize,
    t_col: usize,
    sources: &[(usize, CellKind)],
    params: Option<&AmplifierParams>,
    row: &mut [f64],
) -> std::result::Result<f64, String> {
    if rec.len() != expected_len {
        return Err(format!("expected {expected_len} cells, found {}", rec.len()));
    }
    let t_cell = rec.get(t_col).unwrap_or("").trim();
    let t: f64 = t_cell
        .parse()
        .map_err(|_| format!("bad timestamp {t_cell:?}"))?;
    if !t.is_finite() || t < 0.0 {
        return Err(format!("timestamp {t} must be finite and non-negative"));
    }
    for (out, &(col, kind)) in row.iter_mut().zip(sources) {
        let cell = rec.get(col).unwrap_or("").trim();
        if cell.is_empty() {
            *out = f64::NAN;
            continue;
        }
        *out = match kind {
            CellKind::Real => {
                let v: f64 = cell.parse().map_err(|_| format!("bad number {cell:?} in column {col}"))?;
                if !v.is_finite() {
                    return Err(format!("non-finite value in column {col}"));
                }
                v
            }
            CellKind::Adc => {
                let count: i64 = cell
                    .parse()
                    .map_err(|_| format!("bad ADC count {cell:?} in column {col}"))?;
                let p = params.expect("adc columns need amplifier params");
                adc_to_sensor_voltage(count, p).map_err(|e| e.to_string())?
            }
        };
    }
    Ok(t)
}

fn open(path: &Path) -> Result<(csv::Reader<std::fs::File>, csv::StringRecord)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: unreadable header: {e}", path.display())))?
        .clone();
    Ok((reader, header))
}

fn require_exact_header(path: &Path, header: &csv::StringRecord, expected: &[String]) -> Result<()> {
    if header.len() != expected.len() {
        return Err(Error::Format(format!(
            "{}: expected {} columns, found {}",
            path.display(),
            expected.len(),
            header.len()
        )));
    }
    for (i, (got, want)) in header.iter().zip(expected).enumerate() {
        if got.trim() != want {
            return Err(Error::Format(format!(
                "{}: column {i} is {got:?}, expected {want:?}",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Reads one foot's insole file into a 41-wide series of sensor voltages
/// (pressure) and IMU readings.
pub fn read_insole_csv(
    path: impl AsRef<Path>,
    side: FootSide,
    params: &AmplifierParams,
    mode: ParseMode,
) -> Result<(SensorSeries, IngestReport)> {
    let path = path.as_ref();
    params.validate()?;
    let (reader, header) = open(path)?;
    let expected = insole_columns();
    require_exact_header(path, &header, &expected)?;
    let sources: Vec<(usize, CellKind)> = (1..=FOOT_WIDTH)
        .map(|c| (c, if c <= PRESSURE_CHANNELS { CellKind::Adc } else { CellKind::Real }))
        .collect();
    let (series, mut report) = read_table(
        path,
        mode,
        &header,
        &sources,
        expected[1..].to_vec(),
        Some(params),
        reader,
    )?;
    report.side = Some(side);
    Ok((series, report))
}

/// Reads a standalone ankle IMU file into a 6-wide series `[gx,gy,gz,ax,ay,az]`.
pub fn read_imu_csv(path: impl AsRef<Path>, mode: ParseMode) -> Result<(SensorSeries, IngestReport)> {
    let path = path.as_ref();
    let (reader, header) = open(path)?;
    let expected = imu_columns();
    require_exact_header(path, &header, &expected)?;
    let sources: Vec<(usize, CellKind)> = (1..expected.len()).map(|c| (c, CellKind::Real)).collect();
    read_table(path, mode, &header, &sources, expected[1..].to_vec(), None, reader)
}

/// Reads a mocap export. Columns are located by name, so extra columns and
/// any column order are accepted; every `<Joint>.<axis>` must be present.
pub fn read_mocap_csv(path: impl AsRef<Path>, mode: ParseMode) -> Result<(SkeletonSeries, IngestReport)> {
    let path = path.as_ref();
    let (reader, header) = open(path)?;
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    if !index.contains_key("t") {
        return Err(Error::Format(format!("{}: missing time column \"t\"", path.display())));
    }
    let names = skeleton_column_names();
    let mut sources = Vec::with_capacity(SKELETON_WIDTH);
    for (i, name) in names.iter().enumerate() {
        match index.get(name.as_str()) {
            Some(&c) => sources.push((c, CellKind::Real)),
            None => {
                let joint = JointId::ALL[i / 3];
                return Err(Error::Format(format!(
                    "{}: missing column {name:?} for joint {joint}",
                    path.display()
                )));
            }
        }
    }
    read_table(path, mode, &header, &sources, names, None, reader)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub paired: usize,
    pub unpaired_left: usize,
    pub unpaired_right: usize,
    pub tolerance_s: f64,
}

/// Default pairing tolerance for left/right frames, half the 10 ms grid.
pub const DEFAULT_PAIR_TOLERANCE: f64 = 0.005;

fn nearest(times: &[f64], t: f64) -> Option<usize> {
    if times.is_empty() {
        return None;
    }
    let i = times.partition_point(|x| *x < t);
    let mut best = None;
    for j in [i.wrapping_sub(1), i] {
        if j < times.len() {
            let d = (times[j] - t).abs();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
    }
    best.map(|(j, _)| j)
}

/// Pairs each left frame with the nearest right frame within `tolerance`
/// seconds and concatenates them into 82-wide frames on left timestamps.
pub fn merge_feet(left: &SensorSeries, right: &SensorSeries, tolerance: f64) -> Result<(SensorSeries, MergeReport)> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::Data("cannot merge an empty foot series".into()));
    }
    for (s, name) in [(left, "left"), (right, "right")] {
        if s.width() != FOOT_WIDTH {
            return Err(Error::Shape(format!("{name} series has width {}, expected {FOOT_WIDTH}", s.width())));
        }
    }
    let (l0, l1) = (left.first_time().unwrap(), left.last_time().unwrap());
    let (r0, r1) = (right.first_time().unwrap(), right.last_time().unwrap());
    if l1 + tolerance < r0 || r1 + tolerance < l0 {
        return Err(Error::Alignment(format!(
            "left [{l0}, {l1}] s and right [{r0}, {r1}] s do not overlap"
        )));
    }
    let mut used = vec![false; right.len()];
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (t, frame) in left.frames() {
        let Some(j) = nearest(right.timestamps(), t) else { continue };
        if (right.timestamps()[j] - t).abs() <= tolerance {
            used[j] = true;
            times.push(t);
            values.extend_from_slice(frame);
            values.extend_from_slice(right.frame(j));
        }
    }
    let paired = times.len();
    let report = MergeReport {
        paired,
        unpaired_left: left.len() - paired,
        unpaired_right: used.iter().filter(|u| !**u).count(),
        tolerance_s: tolerance,
    };
    let meta = SeriesMeta {
        sample_rate: left.meta.sample_rate,
        ..left.meta.clone()
    };
    Ok((TimeSeries::new(times, 2 * FOOT_WIDTH, values, meta)?, report))
}

/// Replaces the gyro/accel channels of a 41-wide foot series with the
/// nearest samples of a standalone 6-wide IMU series. Foot frames without an
/// IMU sample within `tolerance` get NaN IMU channels.
pub fn substitute_imu(foot: &SensorSeries, imu: &SensorSeries, tolerance: f64) -> Result<SensorSeries> {
    if foot.width() != FOOT_WIDTH || imu.width() != GYRO_CHANNELS + ACCEL_CHANNELS {
        return Err(Error::Shape(format!(
            "substitute_imu needs widths {FOOT_WIDTH} and 6, got {} and {}",
            foot.width(),
            imu.width()
        )));
    }
    let mut out = foot.clone();
    for i in 0..foot.len() {
        let t = foot.timestamps()[i];
        let src = nearest(imu.timestamps(), t)
            .filter(|&j| (imu.timestamps()[j] - t).abs() <= tolerance)
            .map(|j| imu.frame(j).to_vec());
        let dst = &mut out.frame_mut(i)[PRESSURE_CHANNELS..];
        match src {
            Some(v) => dst.copy_from_slice(&v),
            None => dst.iter_mut().for_each(|v| *v = f64::NAN),
        }
    }
    Ok(out)
}

fn write_table(
    path: &Path,
    header: &[String],
    series: &TimeSeries,
    mut cell: impl FnMut(usize, f64) -> Result<String>,
) -> Result<()> {
    if header.len() != series.width() + 1 {
        return Err(Error::Shape(format!(
            "{}: {} columns for a {}-wide series",
            path.display(),
            header.len(),
            series.width()
        )));
    }
    let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for (t, frame) in series.frames() {
        row.clear();
        row.push(format!("{t:.6}"));
        for (c, &v) in frame.iter().enumerate() {
            row.push(if v.is_nan() { String::new() } else { cell(c, v)? });
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a 41-wide foot series (pressure as sensor voltages) in the insole
/// schema, converting pressure to ADC counts. NaN cells are left empty.
pub fn write_insole_csv(path: impl AsRef<Path>, series: &SensorSeries, params: &AmplifierParams) -> Result<()> {
    params.validate()?;
    write_table(path.as_ref(), &insole_columns(), series, |c, v| {
        Ok(if c < PRESSURE_CHANNELS {
            sensor_voltage_to_count(v, params)?.to_string()
        } else {
            format!("{v:.4}")
        })
    })
}

/// Writes a 6-wide `[gx,gy,gz,ax,ay,az]` series in the IMU schema.
pub fn write_imu_csv(path: impl AsRef<Path>, series: &SensorSeries) -> Result<()> {
    write_table(path.as_ref(), &imu_columns(), series, |_, v| Ok(format!("{v:.4}")))
}

/// Writes a skeleton series in the mocap schema, millimetres to 3 decimals.
pub fn write_mocap_csv(path: impl AsRef<Path>, series: &SkeletonSeries) -> Result<()> {
    write_table(path.as_ref(), &mocap_header(), series, |_, v| Ok(format!("{v:.3}")))
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn amp(r1: f64, r2: f64) -> AmplifierParams {
        AmplifierParams {
            r1_ohms: r1,
            r2_ohms: r2,
            ..AmplifierParams::default()
        }
    }

    #[test]
    fn gain_examples() {
        assert_eq!(amplifier_gain(&amp(4700.0, 4700.0)).unwrap(), 2.0);
        assert_eq!(amplifier_gain(&amp(4700.0, 0.0)).unwrap(), 1.0);
        assert!((amplifier_gain(&amp(10_000.0, 33_000.0)).unwrap() - 4.3).abs() < 1e-12);
        assert!(matches!(amplifier_gain(&amp(0.0, 1.0)), Err(Error::Parameter(_))));
        assert!(amp(-1.0, 1.0).validate().is_err());
        let bad_bits = AmplifierParams {
            adc_bits: 20,
            ..AmplifierParams::default()
        };
        assert!(bad_bits.validate().is_err());
    }

    #[test]
    fn adc_conversion_examples() {
        let p = amp(10_000.0, 10_000.0);
        assert_eq!(adc_to_sensor_voltage(0, &p).unwrap(), 0.0);
        assert!((adc_to_sensor_voltage(4095, &p).unwrap() - 1.65).abs() < 1e-12);
        assert!(adc_to_sensor_voltage(4096, &p).is_err());
        assert!(adc_to_sensor_voltage(-1, &p).is_err());
        let mut prev = -1.0;
        for c in 0..=4095 {
            let v = adc_to_sensor_voltage(c, &p).unwrap();
            assert!(v > prev);
            prev = v;
            assert_eq!(sensor_voltage_to_count(v, &p).unwrap(), c as u32);
        }
    }

    fn insole_file(rows: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", insole_columns().join(",")).unwrap();
        for r in rows {
            writeln!(f, "{r}").unwrap();
        }
        f
    }

    fn insole_row(t: &str, count: u32) -> String {
        let mut cells = vec![t.to_string()];
        cells.extend((0..PRESSURE_CHANNELS).map(|_| count.to_string()));
        cells.extend(["0.1", "0.2", "0.3", "0", "9.81", "0"].map(String::from));
        cells.join(",")
    }

    #[test]
    fn reads_well_formed_insole_file() {
        let f = insole_file(&[insole_row("0.00", 0), insole_row("0.01", 100), insole_row("0.02", 4095)]);
        let (s, rep) =
            read_insole_csv(f.path(), FootSide::Left, &AmplifierParams::default(), ParseMode::Strict).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.width(), FOOT_WIDTH);
        assert_eq!(rep.rows_dropped, 0);
        assert!((s.frame(2)[0] - 1.65).abs() < 1e-12);
        assert_eq!(s.frame(0)[36], 0.2);
        assert!((rep.detected_rate_hz.unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_timestamp_keeps_last() {
        let f = insole_file(&[insole_row("0.00", 1), insole_row("0.01", 2), insole_row("0.01", 3)]);
        let (s, rep) =
            read_insole_csv(f.path(), FootSide::Right, &AmplifierParams::default(), ParseMode::Lenient).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(rep.rows_dropped, 1);
        assert_eq!(rep.duplicate_timestamps, 1);
        let expected = adc_to_sensor_voltage(3, &AmplifierParams::default()).unwrap();
        assert_eq!(s.frame(1)[0], expected);
    }

    #[test]
    fn empty_cell_becomes_nan() {
        let mut row = insole_row("0.00", 5);
        row = row.replacen(",5,", ",,", 1);
        let f = insole_file(&[row, insole_row("0.01", 5)]);
        let (s, rep) =
            read_insole_csv(f.path(), FootSide::Left, &AmplifierParams::default(), ParseMode::Strict).unwrap();
        assert!(s.frame(0)[0].is_nan());
        assert_eq!(rep.nan_counts[0], 1);
        assert_eq!(rep.nan_total(), 1);
    }

    #[test]
    fn malformed_rows_lenient_vs_strict() {
        let f = insole_file(&[insole_row("0.00", 1), insole_row("0.01", 9999), "0.02,1,2".into(), insole_row("0.03", 1)]);
        let (s, rep) =
            read_insole_csv(f.path(), FootSide::Left, &AmplifierParams::default(), ParseMode::Lenient).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(rep.malformed.len(), 2);
        assert_eq!(rep.rows_read, 4);
        assert!(rep.rows_read >= rep.rows_kept);
        let err = read_insole_csv(f.path(), FootSide::Left, &AmplifierParams::default(), ParseMode::Strict);
        assert!(matches!(err, Err(Error::Parse { .. })));
    }

    #[test]
    fn wrong_header_is_format_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "t,p00,p01").unwrap();
        writeln!(f, "0,1,2").unwrap();
        let err = read_insole_csv(f.path(), FootSide::Left, &AmplifierParams::default(), ParseMode::Lenient);
        assert!(matches!(err, Err(Error::Format(_))));
    }

    fn mocap_file(columns: &[String], rows: usize, rate: f64) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", columns.join(",")).unwrap();
        for i in 0..rows {
            let t = i as f64 / rate;
            let mut cells = vec![format!("{t}")];
            cells.extend((1..columns.len()).map(|c| format!("{}", c as f64 + t)));
            writeln!(f, "{}", cells.join(",")).unwrap();
        }
        f
    }

    #[test]
    fn reads_mocap_and_detects_rate() {
        let f = mocap_file(&mocap_header(), 241, 120.0);
        let (s, rep) = read_mocap_csv(f.path(), ParseMode::Strict).unwrap();
        assert_eq!(s.width(), SKELETON_WIDTH);
        assert_eq!(s.len(), 241);
        assert!((rep.detected_rate_hz.unwrap() - 120.0).abs() < 1e-6);
        assert_eq!(s.skeleton_frame(0).unwrap().joints.len(), 21);
    }

    #[test]
    fn missing_mocap_column_names_joint() {
        let cols: Vec<String> = mocap_header().into_iter().filter(|c| c != "Head.z").collect();
        let f = mocap_file(&cols, 3, 120.0);
        let err = read_mocap_csv(f.path(), ParseMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(err.to_string().contains("Head"), "{err}");
    }

    #[test]
    fn mocap_columns_may_be_reordered() {
        let mut cols = mocap_header();
        cols[1..].reverse();
        let f = mocap_file(&cols, 2, 100.0);
        let (s, _) = read_mocap_csv(f.path(), ParseMode::Strict).unwrap();
        // Hips.x was written in the last column.
        assert_eq!(s.frame(0)[0], (cols.len() - 1) as f64);
    }

    fn foot(times: &[f64], fill: f64) -> SensorSeries {
        let values = times.iter().flat_map(|_| vec![fill; FOOT_WIDTH]).collect();
        TimeSeries::new(times.to_vec(), FOOT_WIDTH, values, SeriesMeta::default()).unwrap()
    }

    #[test]
    fn merge_examples() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.01).collect();
        let (m, rep) = merge_feet(&foot(&t, 1.0), &foot(&t, 2.0), DEFAULT_PAIR_TOLERANCE).unwrap();
        assert_eq!(m.len(), 10);
        assert_eq!(m.width(), 82);
        assert_eq!(m.frame(3)[40], 1.0);
        assert_eq!(m.frame(3)[41], 2.0);
        assert_eq!(rep.unpaired_left, 0);

        let shifted: Vec<f64> = t.iter().map(|x| x + 0.002).collect();
        let (m, rep) = merge_feet(&foot(&t, 1.0), &foot(&shifted, 2.0), DEFAULT_PAIR_TOLERANCE).unwrap();
        assert_eq!(m.len(), 10);
        assert_eq!(rep.unpaired_right, 0);

        let far: Vec<f64> = t.iter().map(|x| x + 5.0).collect();
        assert!(matches!(
            merge_feet(&foot(&t, 1.0), &foot(&far, 2.0), DEFAULT_PAIR_TOLERANCE),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn imu_substitution() {
        let t: Vec<f64> = (0..5).map(|i| i as f64 * 0.01).collect();
        let f = foot(&t, 1.0);
        let imu = TimeSeries::new(t[..3].to_vec(), 6, vec![7.0; 18], SeriesMeta::default()).unwrap();
        let out = substitute_imu(&f, &imu, DEFAULT_PAIR_TOLERANCE).unwrap();
        assert_eq!(out.frame(0)[0], 1.0);
        assert_eq!(out.frame(0)[35], 7.0);
        assert!(out.frame(4)[40].is_nan());
    }
}
