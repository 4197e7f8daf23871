//! Interval algebra over integer time points.
//!
//! Abnormal events are qualified existentially ("at some time within" an
//! interval) and normal conditions universally ("during" a prefix interval).
//! Boundary convention: the instant `t` of a change is the first instant at
//! which the variable holds its abnormal value, so a variable required normal
//! on `(-inf, c]` can only change strictly after `c`. Every `During` interval
//! this crate produces is a prefix `(-inf, c)` or `(-inf, c]`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A point on the discrete time line, extended with both infinities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimePoint {
    NegInf,
    At(i64),
    PosInf,
}

impl TimePoint {
    pub fn is_finite(self) -> bool {
        matches!(self, TimePoint::At(_))
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            TimePoint::At(t) => Some(t),
            _ => None,
        }
    }

    // Addition used for lower ends: -inf absorbs.
    fn add_low(self, other: TimePoint) -> TimePoint {
        match (self, other) {
            (TimePoint::NegInf, _) | (_, TimePoint::NegInf) => TimePoint::NegInf,
            (TimePoint::PosInf, _) | (_, TimePoint::PosInf) => TimePoint::PosInf,
            (TimePoint::At(a), TimePoint::At(b)) => TimePoint::At(a.saturating_add(b)),
        }
    }

    // Addition used for upper ends: +inf absorbs.
    fn add_high(self, other: TimePoint) -> TimePoint {
        match (self, other) {
            (TimePoint::PosInf, _) | (_, TimePoint::PosInf) => TimePoint::PosInf,
            (TimePoint::NegInf, _) | (_, TimePoint::NegInf) => TimePoint::NegInf,
            (TimePoint::At(a), TimePoint::At(b)) => TimePoint::At(a.saturating_add(b)),
        }
    }
}

impl From<i64> for TimePoint {
    fn from(t: i64) -> Self {
        TimePoint::At(t)
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimePoint::NegInf => f.write_str("-inf"),
            TimePoint::At(t) => write!(f, "{t}"),
            TimePoint::PosInf => f.write_str("+inf"),
        }
    }
}

impl Serialize for TimePoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimePoint::At(t) => s.serialize_i64(*t),
            TimePoint::NegInf => s.serialize_str("-inf"),
            TimePoint::PosInf => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(t) => Ok(TimePoint::At(t)),
            Raw::Text(s) => match s.as_str() {
                "-inf" => Ok(TimePoint::NegInf),
                "+inf" | "inf" => Ok(TimePoint::PosInf),
                other => other
                    .parse::<i64>()
                    .map(TimePoint::At)
                    .map_err(|_| serde::de::Error::custom(format!("bad time point `{other}`"))),
            },
        }
    }
}

/// An interval of time points with independently open or closed ends.
///
/// Infinite ends are always stored open. The value may be empty; operations
/// that can produce an empty result return `Option<Interval>` instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: TimePoint,
    pub hi: TimePoint,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn new(lo: TimePoint, hi: TimePoint, lo_open: bool, hi_open: bool) -> Self {
        Interval {
            lo,
            hi,
            lo_open: lo_open || !lo.is_finite(),
            hi_open: hi_open || !hi.is_finite(),
        }
    }

    pub fn closed(lo: i64, hi: i64) -> Self {
        Interval::new(lo.into(), hi.into(), false, false)
    }

    pub fn point(t: i64) -> Self {
        Interval::closed(t, t)
    }

    pub fn all() -> Self {
        Interval::new(TimePoint::NegInf, TimePoint::PosInf, true, true)
    }

    /// `(-inf, c)` when `open`, `(-inf, c]` otherwise.
    pub fn prefix(c: TimePoint, open: bool) -> Self {
        Interval::new(TimePoint::NegInf, c, true, open)
    }

    /// `(c, +inf)` when `open`, `[c, +inf)` otherwise.
    pub fn suffix(c: TimePoint, open: bool) -> Self {
        Interval::new(c, TimePoint::PosInf, open, true)
    }

    /// Smallest tick inside, ignoring emptiness.
    fn first_tick(&self) -> TimePoint {
        match self.lo {
            TimePoint::At(v) if self.lo_open => TimePoint::At(v + 1),
            other => other,
        }
    }

    /// Largest tick inside, ignoring emptiness.
    fn last_tick(&self) -> TimePoint {
        match self.hi {
            TimePoint::At(v) if self.hi_open => TimePoint::At(v - 1),
            other => other,
        }
    }

    /// First and last tick, or `None` when empty. Two intervals with equal
    /// ticks hold the same instants whatever their notation.
    pub fn ticks(&self) -> Option<(TimePoint, TimePoint)> {
        (!self.is_empty()).then(|| (self.first_tick(), self.last_tick()))
    }

    /// Emptiness over integer ticks: `(5, 6)` holds no tick.
    pub fn is_empty(&self) -> bool {
        self.first_tick() > self.last_tick() || (self.lo == self.hi && !self.lo.is_finite())
    }

    pub fn is_prefix(&self) -> bool {
        self.lo == TimePoint::NegInf
    }

    pub fn contains(&self, t: TimePoint) -> bool {
        let above = match self.lo.cmp(&t) {
            Ordering::Less => true,
            Ordering::Equal => !self.lo_open,
            Ordering::Greater => false,
        };
        let below = match t.cmp(&self.hi) {
            Ordering::Less => true,
            Ordering::Equal => !self.hi_open,
            Ordering::Greater => false,
        };
        above && below
    }

    /// Set inclusion over ticks; the empty interval is a subset of everything.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        if self.is_empty() {
            return true;
        }
        !other.is_empty() && other.first_tick() <= self.first_tick() && self.last_tick() <= other.last_tick()
    }

    /// Minkowski sum with an offset interval.
    pub fn shift(&self, offset: &Interval) -> Interval {
        Interval::new(
            self.lo.add_low(offset.lo),
            self.hi.add_high(offset.hi),
            self.lo_open || offset.lo_open,
            self.hi_open || offset.hi_open,
        )
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

/// Minimum and maximum propagation delay, in ticks. `max == None` is an
/// unknown upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Delay {
    pub min: i64,
    pub max: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemporalError {
    #[error("invalid delay [{min}, {max}]: need 0 <= min <= max")]
    InvalidDelay { min: i64, max: String },
    #[error("`during` merge needs prefix intervals, got {0}")]
    NotPrefix(Interval),
}

impl Delay {
    pub const ZERO: Delay = Delay { min: 0, max: Some(0) };

    pub fn new(min: i64, max: Option<i64>) -> Result<Self, TemporalError> {
        let ok = min >= 0 && max.map_or(true, |m| m >= min);
        if ok {
            Ok(Delay { min, max })
        } else {
            Err(TemporalError::InvalidDelay {
                min,
                max: max.map_or_else(|| "+inf".to_string(), |m| m.to_string()),
            })
        }
    }

    pub fn fixed(min: i64, max: i64) -> Self {
        Delay::new(min, Some(max)).expect("valid delay")
    }

    pub fn is_zero(&self) -> bool {
        *self == Delay::ZERO
    }

    /// Offset that maps an effect time to the window of its cause time:
    /// `[-max, -min]`.
    pub fn backward_offset(&self) -> Interval {
        let lo = match self.max {
            Some(m) => TimePoint::At(-m),
            None => TimePoint::NegInf,
        };
        Interval::new(lo, TimePoint::At(-self.min), false, false)
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(m) => write!(f, "[{},{}]", self.min, m),
            None => write!(f, "[{},+inf]", self.min),
        }
    }
}

/// Whether a constraint concerns an abnormal event or a held normal value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    AbnormalEvent,
    NormalHolds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The event happens at some instant of the interval.
    ExistsWithin,
    /// The value holds at every instant of the interval.
    During,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalConstraint {
    pub variable: String,
    pub polarity: Polarity,
    pub mode: Mode,
    pub interval: Interval,
}

impl TemporalConstraint {
    pub fn event(variable: impl Into<String>, interval: Interval) -> Self {
        TemporalConstraint {
            variable: variable.into(),
            polarity: Polarity::AbnormalEvent,
            mode: Mode::ExistsWithin,
            interval,
        }
    }

    pub fn holds(variable: impl Into<String>, interval: Interval) -> Self {
        TemporalConstraint {
            variable: variable.into(),
            polarity: Polarity::NormalHolds,
            mode: Mode::During,
            interval,
        }
    }
}

/// Window of a cause event given the window of its effect and the delay.
pub fn back_project(effect: &Interval, delay: &Delay) -> Interval {
    effect.shift(&delay.backward_offset())
}

pub fn intersect_exists(a: &Interval, b: &Interval) -> Option<Interval> {
    let (lo, lo_open) = match a.lo.cmp(&b.lo) {
        Ordering::Less => (b.lo, b.lo_open),
        Ordering::Greater => (a.lo, a.lo_open),
        Ordering::Equal => (a.lo, a.lo_open || b.lo_open),
    };
    let (hi, hi_open) = match a.hi.cmp(&b.hi) {
        Ordering::Less => (a.hi, a.hi_open),
        Ordering::Greater => (b.hi, b.hi_open),
        Ordering::Equal => (a.hi, a.hi_open || b.hi_open),
    };
    let out = Interval::new(lo, hi, lo_open, hi_open);
    (!out.is_empty()).then_some(out)
}

/// Both "holds during" prefixes must be satisfied, so the result is the
/// longer prefix.
pub fn merge_during(a: &Interval, b: &Interval) -> Result<Interval, TemporalError> {
    for i in [a, b] {
        if !i.is_prefix() {
            return Err(TemporalError::NotPrefix(*i));
        }
    }
    let (hi, hi_open) = match a.hi.cmp(&b.hi) {
        Ordering::Less => (b.hi, b.hi_open),
        Ordering::Greater => (a.hi, a.hi_open),
        Ordering::Equal => (a.hi, a.hi_open && b.hi_open),
    };
    Ok(Interval::prefix(hi, hi_open))
}

/// Restrict an event window to the instants after the variable stops being
/// required normal. `None` means no instant is left.
pub fn refine_exists_against_during(event: &Interval, during: &Interval) -> Option<Interval> {
    debug_assert!(during.is_prefix());
    // A closed end c admits the change only after c; an open end from c on.
    let after = Interval::suffix(during.hi, !during.hi_open);
    intersect_exists(event, &after)
}
