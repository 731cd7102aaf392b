//! Piecewise-linear anneal schedules and the A(s)/B(s) energy curves.
//!
//! A schedule maps time (microseconds) to the anneal fraction `s` in
//! [0,1]. Hardware limits apply: at most 50 points, forward-only, and a
//! maximum slope of 1 anneal fraction per microsecond (the steepest
//! permitted quench reaches s = 1 within one microsecond from anywhere).

use std::fmt;

use crate::error::{Error, Result};

pub const MAX_SCHEDULE_POINTS: usize = 50;
pub const DEFAULT_MAX_SLOPE: f64 = 1.0;
pub const DEFAULT_QUENCH_WIDTH_US: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub t_us: f64,
    pub s: f64,
}

/// A constraint violation found by [`AnnealSchedule::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewPoints { count: usize },
    TooManyPoints { count: usize },
    FirstPointNotOrigin { t_us: f64, s: f64 },
    LastPointNotFull { t_us: f64, s: f64 },
    NegativeTime { index: usize, t_us: f64 },
    FractionOutOfRange { index: usize, s: f64 },
    TimeNotIncreasing { index: usize, t_prev: f64, t_us: f64 },
    NonMonotone { index: usize, s_prev: f64, s: f64 },
    SlopeTooSteep { index: usize, slope: f64, max_slope: f64 },
    NonFinite { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewPoints { count } => {
                write!(f, "too few points ({count}, need at least 2)")
            }
            Violation::TooManyPoints { count } => {
                write!(f, "too many points ({count} > {MAX_SCHEDULE_POINTS})")
            }
            Violation::FirstPointNotOrigin { t_us, s } => {
                write!(f, "first point ({t_us},{s}) is not (0,0)")
            }
            Violation::LastPointNotFull { t_us, s } => {
                write!(f, "last point ({t_us},{s}) does not reach s=1")
            }
            Violation::NegativeTime { index, t_us } => {
                write!(f, "point {index} has negative time {t_us}")
            }
            Violation::FractionOutOfRange { index, s } => {
                write!(f, "point {index} has s={s} outside [0,1]")
            }
            Violation::TimeNotIncreasing { index, t_prev, t_us } => {
                write!(
                    f,
                    "segment {}..{index}: time not strictly increasing ({t_prev} -> {t_us})",
                    index - 1
                )
            }
            Violation::NonMonotone { index, s_prev, s } => {
                write!(
                    f,
                    "segment {}..{index}: non-monotone s ({s_prev} -> {s})",
                    index - 1
                )
            }
            Violation::SlopeTooSteep {
                index,
                slope,
                max_slope,
            } => {
                write!(
                    f,
                    "segment {}..{index}: slope {slope} exceeds {max_slope}/us",
                    index - 1
                )
            }
            Violation::NonFinite { index } => write!(f, "point {index} is not finite"),
        }
    }
}

/// Forward anneal schedule: strictly increasing times, non-decreasing
/// anneal fraction from (0,0) to (total_time, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    points: Vec<SchedulePoint>,
}

impl AnnealSchedule {
    /// Builds from raw points, rejecting anything that fails validation.
    pub fn from_points(points: Vec<SchedulePoint>) -> Result<Self> {
        let schedule = AnnealSchedule { points };
        let violations = schedule.validate();
        if violations.is_empty() {
            Ok(schedule)
        } else {
            Err(Error::InvalidSchedule(violations))
        }
    }

    /// Builds without validating, for feeding [`AnnealSchedule::validate`]
    /// as a checker. Samplers reject invalid schedules regardless.
    pub fn from_points_unchecked(points: Vec<SchedulePoint>) -> Self {
        AnnealSchedule { points }
    }

    /// The standard linear schedule: s(t) = t / T.
    pub fn standard(total_us: f64) -> Result<Self> {
        if !(total_us >= 1.0) || !total_us.is_finite() {
            return Err(Error::InvalidParameter {
                name: "total_us",
                message: format!("{total_us} must be >= 1"),
            });
        }
        Self::from_points(vec![
            SchedulePoint { t_us: 0.0, s: 0.0 },
            SchedulePoint {
                t_us: total_us,
                s: 1.0,
            },
        ])
    }

    /// Schedule that pauses (holds s constant) for `pause_len_us` starting
    /// at `pause_start_us` of a `active_us`-long standard anneal, then
    /// resumes the original slope until s = 1.
    pub fn with_pause(pause_start_us: f64, pause_len_us: f64, active_us: f64) -> Result<Self> {
        if !(pause_start_us > 0.0 && pause_start_us < active_us) {
            return Err(Error::InvalidParameter {
                name: "pause_start_us",
                message: format!("{pause_start_us} must lie strictly inside (0, {active_us})"),
            });
        }
        if !(pause_len_us >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "pause_len_us",
                message: format!("{pause_len_us} must be >= 0"),
            });
        }
        if pause_len_us == 0.0 {
            return Self::standard(active_us);
        }
        let s_pause = pause_start_us / active_us;
        Self::from_points(vec![
            SchedulePoint { t_us: 0.0, s: 0.0 },
            SchedulePoint {
                t_us: pause_start_us,
                s: s_pause,
            },
            SchedulePoint {
                t_us: pause_start_us + pause_len_us,
                s: s_pause,
            },
            SchedulePoint {
                t_us: active_us + pause_len_us,
                s: 1.0,
            },
        ])
    }

    /// Sliced schedule: follow the standard anneal until `quench_at_us`,
    /// then jump to s = 1 within one microsecond.
    pub fn sliced(total_us: f64, quench_at_us: f64) -> Result<Self> {
        Self::standard(total_us)?.quench_at(quench_at_us, DEFAULT_QUENCH_WIDTH_US)
    }

    /// [`AnnealSchedule::sliced`] with an explicit quench width.
    pub fn sliced_with_width(total_us: f64, quench_at_us: f64, width_us: f64) -> Result<Self> {
        Self::standard(total_us)?.quench_at(quench_at_us, width_us)
    }

    /// Quench inserted at `quench_at_us` on a paused schedule, so slices
    /// taken mid-pause snapshot the held anneal fraction.
    pub fn sliced_with_pause(paused: &AnnealSchedule, quench_at_us: f64) -> Result<Self> {
        paused.quench_at(quench_at_us, DEFAULT_QUENCH_WIDTH_US)
    }

    /// Inserts a quench: follow `self` until time `t_us`, then a straight
    /// segment to (t_us + width_us, 1). Fails when the required slope
    /// exceeds [`DEFAULT_MAX_SLOPE`].
    pub fn quench_at(&self, t_us: f64, width_us: f64) -> Result<Self> {
        if !(width_us > 0.0) || !width_us.is_finite() {
            return Err(Error::InvalidParameter {
                name: "width_us",
                message: format!("{width_us} must be > 0"),
            });
        }
        let total = self.total_time();
        if !(t_us > 0.0 && t_us <= total - width_us) {
            return Err(Error::QuenchTimeOutOfRange {
                t: t_us,
                lo: 0.0,
                hi: total - width_us,
            });
        }
        let s_at = self.s_of_t(t_us)?;
        let slope = (1.0 - s_at) / width_us;
        if slope > DEFAULT_MAX_SLOPE + 1e-12 {
            return Err(Error::InfeasibleQuench {
                slope,
                max_slope: DEFAULT_MAX_SLOPE,
            });
        }
        let mut points: Vec<SchedulePoint> = self
            .points
            .iter()
            .copied()
            .take_while(|p| p.t_us < t_us)
            .collect();
        points.push(SchedulePoint { t_us, s: s_at });
        points.push(SchedulePoint {
            t_us: t_us + width_us,
            s: 1.0,
        });
        Self::from_points(points)
    }

    /// Checks every schedule invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        self.validate_with_max_slope(DEFAULT_MAX_SLOPE)
    }

    pub fn validate_with_max_slope(&self, max_slope: f64) -> Vec<Violation> {
        let mut violations = Vec::new();
        let pts = &self.points;
        if pts.len() < 2 {
            violations.push(Violation::TooFewPoints { count: pts.len() });
            return violations;
        }
        if pts.len() > MAX_SCHEDULE_POINTS {
            violations.push(Violation::TooManyPoints { count: pts.len() });
        }
        for (index, p) in pts.iter().enumerate() {
            if !p.t_us.is_finite() || !p.s.is_finite() {
                violations.push(Violation::NonFinite { index });
                continue;
            }
            if p.t_us < 0.0 {
                violations.push(Violation::NegativeTime {
                    index,
                    t_us: p.t_us,
                });
            }
            if !(0.0..=1.0).contains(&p.s) {
                violations.push(Violation::FractionOutOfRange { index, s: p.s });
            }
        }
        let first = pts[0];
        if first.t_us != 0.0 || first.s != 0.0 {
            violations.push(Violation::FirstPointNotOrigin {
                t_us: first.t_us,
                s: first.s,
            });
        }
        let last = pts[pts.len() - 1];
        if last.s != 1.0 {
            violations.push(Violation::LastPointNotFull {
                t_us: last.t_us,
                s: last.s,
            });
        }
        for index in 1..pts.len() {
            let (a, b) = (pts[index - 1], pts[index]);
            if !(b.t_us > a.t_us) {
                violations.push(Violation::TimeNotIncreasing {
                    index,
                    t_prev: a.t_us,
                    t_us: b.t_us,
                });
                continue;
            }
            if b.s < a.s {
                violations.push(Violation::NonMonotone {
                    index,
                    s_prev: a.s,
                    s: b.s,
                });
            }
            let slope = (b.s - a.s) / (b.t_us - a.t_us);
            if slope > max_slope + 1e-12 {
                violations.push(Violation::SlopeTooSteep {
                    index,
                    slope,
                    max_slope,
                });
            }
        }
        violations
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn points(&self) -> &[SchedulePoint] {
        &self.points
    }

    pub fn total_time(&self) -> f64 {
        self.points.last().map(|p| p.t_us).unwrap_or(0.0)
    }

    /// Anneal fraction at time `t_us` by linear interpolation.
    pub fn s_of_t(&self, t_us: f64) -> Result<f64> {
        let total = self.total_time();
        if !(0.0..=total).contains(&t_us) {
            return Err(Error::TimeOutOfRange { t: t_us, total });
        }
        let pts = &self.points;
        // exact endpoint hits bypass interpolation rounding
        if t_us == total {
            return Ok(pts[pts.len() - 1].s);
        }
        let idx = pts.partition_point(|p| p.t_us <= t_us);
        if idx == 0 {
            return Ok(pts[0].s);
        }
        let (a, b) = (pts[idx - 1], pts[idx]);
        let frac = (t_us - a.t_us) / (b.t_us - a.t_us);
        Ok(a.s + frac * (b.s - a.s))
    }

    /// CSV export with header `t_us,s`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_us,s\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.t_us, p.s));
        }
        out
    }
}

/// Table of the transverse (`A`) and problem (`B`) energy scales in GHz
/// as functions of the anneal fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCurves {
    label: String,
    table: Vec<(f64, f64, f64)>, // (s, A, B)
}

impl EnergyCurves {
    /// Built-in default table: 33 evenly spaced s values with
    /// A(s) = 8 (1-s)^3 and B(s) = 16 s^1.5 GHz. Qualitatively matches a
    /// hardware curve (A falls to zero, B grows); load a measured table
    /// from CSV for quantitative work.
    pub fn builtin_default() -> Self {
        let table = (0..33)
            .map(|i| {
                let s = i as f64 / 32.0;
                (s, 8.0 * (1.0 - s).powi(3), 16.0 * s.powf(1.5))
            })
            .collect();
        EnergyCurves {
            label: "builtin-default".into(),
            table,
        }
    }

    pub fn from_table(label: &str, table: Vec<(f64, f64, f64)>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: table.len(),
            });
        }
        let first = table[0].0;
        let last = table[table.len() - 1].0;
        if first != 0.0 || last != 1.0 {
            return Err(Error::InvalidParameter {
                name: "curves",
                message: format!("s must span [0,1], got [{first},{last}]"),
            });
        }
        for w in table.windows(2) {
            let (s0, a0, b0) = w[0];
            let (s1, a1, b1) = w[1];
            if !(s1 > s0) {
                return Err(Error::InvalidParameter {
                    name: "curves",
                    message: format!("s not strictly increasing at {s1}"),
                });
            }
            if a1 > a0 {
                return Err(Error::InvalidParameter {
                    name: "curves",
                    message: format!("A increases at s={s1}"),
                });
            }
            if b1 < b0 {
                return Err(Error::InvalidParameter {
                    name: "curves",
                    message: format!("B decreases at s={s1}"),
                });
            }
        }
        let a_end = table[table.len() - 1].1;
        if a_end != 0.0 {
            return Err(Error::InvalidParameter {
                name: "curves",
                message: format!("A(1) must be 0, got {a_end}"),
            });
        }
        Ok(EnergyCurves {
            label: label.into(),
            table,
        })
    }

    /// Which table this is (builtin name or source file); every freezeout
    /// conversion reports it.
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn table(&self) -> &[(f64, f64, f64)] {
        &self.table
    }

    fn interpolate(&self, s: f64, pick: impl Fn(&(f64, f64, f64)) -> f64) -> f64 {
        let t = &self.table;
        if s <= t[0].0 {
            return pick(&t[0]);
        }
        if s >= t[t.len() - 1].0 {
            return pick(&t[t.len() - 1]);
        }
        let idx = t.partition_point(|row| row.0 <= s);
        let (lo, hi) = (&t[idx - 1], &t[idx]);
        let frac = (s - lo.0) / (hi.0 - lo.0);
        pick(lo) + frac * (pick(hi) - pick(lo))
    }

    /// Transverse energy A(s) in GHz.
    pub fn a_at(&self, s: f64) -> f64 {
        self.interpolate(s, |row| row.1)
    }

    /// Problem energy B(s) in GHz.
    pub fn b_at(&self, s: f64) -> f64 {
        self.interpolate(s, |row| row.2)
    }

    /// The anneal fraction s with B(s) = `target`; errors when the target
    /// lies outside [B(0), B(1)] (no freezeout point in schedule range).
    pub fn invert_b(&self, target: f64) -> Result<f64> {
        let t = &self.table;
        let lo = t[0].2;
        let hi = t[t.len() - 1].2;
        if !(lo..=hi).contains(&target) {
            return Err(Error::CurveTargetOutOfRange { target, lo, hi });
        }
        for w in t.windows(2) {
            let (s0, _, b0) = w[0];
            let (s1, _, b1) = w[1];
            if target <= b1 {
                if b1 == b0 {
                    return Ok(s0);
                }
                return Ok(s0 + (target - b0) / (b1 - b0) * (s1 - s0));
            }
        }
        Ok(t[t.len() - 1].0)
    }

    /// CSV with header `s,A_GHz,B_GHz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,A_GHz,B_GHz\n");
        for &(s, a, b) in &self.table {
            out.push_str(&format!("{s},{a},{b}\n"));
        }
        out
    }

    pub fn from_csv(label: &str, text: &str) -> Result<Self> {
        let mut table = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if idx == 0 && line.starts_with("s,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected `s,A_GHz,B_GHz`".into(),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                })
            };
            table.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        }
        Self::from_table(label, table)
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&path.display().to_string(), &text)
    }
}
