//! Instrument-log ingestion: turn a raw (t, V, I) cycler log into a
//! capacity curve by segmenting on current setpoints, locating the final
//! discharge at each setpoint, and integrating the current over it.
//!
//! The log format is the generic 3-column CSV `t_s,v_V,i_A` with one
//! header row; vendor formats can be adapted by converting to this form
//! (or by constructing [`InstrumentLog`] rows directly).

use fracbat::{CapacityPoint, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub v: f64,
    pub i: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentLog {
    rows: Vec<LogRow>,
}

impl InstrumentLog {
    pub fn new(rows: Vec<LogRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::NotEnoughData(format!(
                "instrument log has {} rows, need at least 2",
                rows.len()
            )));
        }
        if rows.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::InvalidParameter(
                "log timestamps must be non-decreasing".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    /// Parse `t_s,v_V,i_A` CSV (one header row).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 3 {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected t_s,v_V,i_A, got {line:?}"),
                });
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: n + 1,
                    message: format!("expected a number, got {s:?}"),
                })
            };
            rows.push(LogRow {
                t: parse(fields[0])?,
                v: parse(fields[1])?,
                i: parse(fields[2])?,
            });
        }
        Self::new(rows)
    }
}

/// Outcome of ingestion: the usable capacity points plus any warnings
/// (incomplete discharges, timestamp gaps, idle logs).
#[derive(Debug, Clone)]
pub struct IngestReport {
    pub points: Vec<CapacityPoint>,
    pub warnings: Vec<String>,
}

/// A new segment begins when |dI| between consecutive rows exceeds
/// `threshold` (default 0.1) times the larger magnitude.
pub const DEFAULT_SEGMENT_THRESHOLD: f64 = 0.1;

/// Two discharge setpoints belong to the same group when their mean
/// currents agree within this relative tolerance.
const GROUP_TOLERANCE: f64 = 0.1;

/// Currents below this are treated as idle, not as a setpoint.
const IDLE_CURRENT: f64 = 1e-9;

struct Segment {
    first: usize,
    last: usize,
    mean_i: f64,
}

fn segment(rows: &[LogRow], threshold: f64) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut first = 0;
    for k in 1..=rows.len() {
        let split = k == rows.len() || {
            let (a, b) = (rows[k - 1].i, rows[k].i);
            (b - a).abs() > threshold * a.abs().max(b.abs())
        };
        if split {
            let slice = &rows[first..k];
            let mean_i = slice.iter().map(|r| r.i).sum::<f64>() / slice.len() as f64;
            segments.push(Segment {
                first,
                last: k - 1,
                mean_i,
            });
            first = k;
        }
    }
    segments
}

/// Charge conveyed by a segment, by trapezoidal integration of |I| over
/// the timestamps.
fn trapezoid_charge(rows: &[LogRow]) -> f64 {
    rows.windows(2)
        .map(|w| 0.5 * (w[0].i.abs() + w[1].i.abs()) * (w[1].t - w[0].t))
        .sum()
}

pub fn ingest_log(
    log: &InstrumentLog,
    v_high: f64,
    v_low: f64,
    threshold: f64,
) -> Result<IngestReport> {
    if !(v_high > v_low) {
        return Err(Error::InvalidParameter(format!(
            "need v_high > v_low, got {v_high} <= {v_low}"
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "segmentation threshold must be in (0, 1), got {threshold}"
        )));
    }
    let rows = log.rows();
    let mut warnings = Vec::new();

    let mut dts: Vec<f64> = rows.windows(2).map(|w| w[1].t - w[0].t).collect();
    dts.sort_by(f64::total_cmp);
    let median_dt = dts[dts.len() / 2];
    if median_dt > 0.0 {
        for w in rows.windows(2) {
            let dt = w[1].t - w[0].t;
            if dt > 10.0 * median_dt {
                warnings.push(format!(
                    "gap of {dt} s at t = {} s (median sample interval {median_dt} s)",
                    w[0].t
                ));
            }
        }
    }

    let discharges: Vec<Segment> = segment(rows, threshold)
        .into_iter()
        .filter(|s| s.mean_i < -IDLE_CURRENT)
        .collect();
    if discharges.is_empty() {
        warnings.push("no discharge segments found; curve is empty".into());
        return Ok(IngestReport {
            points: Vec::new(),
            warnings,
        });
    }

    // Group discharge segments by current magnitude; the last segment of
    // each group is the final discharge at that setpoint.
    let mut groups: Vec<Vec<&Segment>> = Vec::new();
    for seg in &discharges {
        let m = seg.mean_i.abs();
        match groups.iter_mut().find(|g| {
            let gm = g[0].mean_i.abs();
            (m - gm).abs() <= GROUP_TOLERANCE * gm.max(m)
        }) {
            Some(group) => group.push(seg),
            None => groups.push(vec![seg]),
        }
    }

    let mut points = Vec::new();
    for group in &groups {
        let seg = group.last().unwrap();
        let slice = &rows[seg.first..=seg.last];
        let setpoint = seg.mean_i.abs();
        let v_end = slice.last().unwrap().v;
        if v_end > v_low + 0.01 * (v_high - v_low) {
            warnings.push(format!(
                "final discharge at {setpoint} A is incomplete \
                 (ends at {v_end} V, cutoff {v_low} V); point omitted"
            ));
            continue;
        }
        points.push(CapacityPoint::new(setpoint, trapezoid_charge(slice))?);
    }
    points.sort_by(|a, b| a.current.total_cmp(&b.current));
    Ok(IngestReport { points, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, v: f64, i: f64) -> LogRow {
        LogRow { t, v, i }
    }

    /// Two discharge/charge cycles at 1 A then one pair at 2 A, with
    /// simple linear voltage ramps between 4.0 and 3.0 V.
    fn two_current_log() -> InstrumentLog {
        let mut rows = Vec::new();
        let mut t = 0.0;
        for &(i, dur) in &[
            (-1.0, 100.0),
            (1.0, 100.0),
            (-1.0, 100.0),
            (1.0, 100.0),
            (-2.0, 50.0),
            (2.0, 50.0),
            (-2.0, 50.0),
        ] {
            let n = 50;
            for k in 0..n {
                let frac = k as f64 / (n - 1) as f64;
                let v = if i < 0.0 { 4.0 - frac } else { 3.0 + frac };
                rows.push(row(t + frac * dur, v, i));
            }
            t += dur;
        }
        InstrumentLog::new(rows).unwrap()
    }

    #[test]
    fn final_discharges_are_integrated_per_setpoint() {
        let report = ingest_log(&two_current_log(), 4.0, 3.0, 0.1).unwrap();
        assert_eq!(report.points.len(), 2);
        assert!((report.points[0].current - 1.0).abs() < 1e-12);
        assert!((report.points[0].capacity - 100.0).abs() < 1e-9);
        assert!((report.points[1].current - 2.0).abs() < 1e-12);
        assert!((report.points[1].capacity - 100.0).abs() < 1e-9);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    }

    #[test]
    fn truncated_final_discharge_is_dropped_with_warning() {
        let mut rows = two_current_log().rows().to_vec();
        // Chop the tail off the last (2 A) discharge so it never
        // reaches the cutoff voltage.
        rows.truncate(rows.len() - 20);
        let log = InstrumentLog::new(rows).unwrap();
        let report = ingest_log(&log, 4.0, 3.0, 0.1).unwrap();
        assert_eq!(report.points.len(), 1);
        assert!((report.points[0].current - 1.0).abs() < 1e-12);
        assert!(report.warnings.iter().any(|w| w.contains("incomplete")));
    }

    #[test]
    fn idle_log_gives_empty_curve_and_warning() {
        let rows = (0..100).map(|k| row(k as f64, 3.7, 0.0)).collect();
        let log = InstrumentLog::new(rows).unwrap();
        let report = ingest_log(&log, 4.0, 3.0, 0.1).unwrap();
        assert!(report.points.is_empty());
        assert!(report.warnings.iter().any(|w| w.contains("no discharge")));
    }

    #[test]
    fn timestamp_gap_is_flagged_not_interpolated() {
        let mut rows: Vec<LogRow> = (0..100).map(|k| row(k as f64, 4.0 - 0.005 * k as f64, -1.0)).collect();
        for r in rows.iter_mut().skip(50) {
            r.t += 500.0;
        }
        let log = InstrumentLog::new(rows).unwrap();
        let report = ingest_log(&log, 4.0, 3.0, 0.1).unwrap();
        assert!(report.warnings.iter().any(|w| w.contains("gap")));
    }

    #[test]
    fn decreasing_timestamps_rejected() {
        let rows = vec![row(0.0, 4.0, -1.0), row(1.0, 3.9, -1.0), row(0.5, 3.8, -1.0)];
        assert!(InstrumentLog::new(rows).is_err());
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = InstrumentLog::from_csv_str("t_s,v_V,i_A\n0,4.0,-1\n1,oops,-1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
