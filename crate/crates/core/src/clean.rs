//! Row-wise noise flagging and exclusion.
//!
//! A row is noisy when it has a non-finite band power, a band power outside
//! `[band_power_min, band_power_max]`, belongs to a run of identical values
//! in any single band column, has the headband off, or reports a contact
//! code above `max_contact_quality_code`. Noisy rows are dropped, never
//! repaired.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use bitflags::bitflags;

use crate::types::Recording;

bitflags! {
    /// Set of rules a row violated.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub struct RuleSet: u8 {
        const NON_FINITE = 1 << 0;
        const OUT_OF_RANGE = 1 << 1;
        const FLATLINE = 1 << 2;
        const HEADBAND_OFF = 1 << 3;
        const BAD_CONTACT = 1 << 4;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    NonFinite,
    OutOfRange,
    Flatline,
    HeadbandOff,
    BadContact,
}

impl Rule {
    pub const ALL: [Rule; 5] = [
        Rule::NonFinite,
        Rule::OutOfRange,
        Rule::Flatline,
        Rule::HeadbandOff,
        Rule::BadContact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::NonFinite => "non_finite",
            Rule::OutOfRange => "out_of_range",
            Rule::Flatline => "flatline",
            Rule::HeadbandOff => "headband_off",
            Rule::BadContact => "bad_contact",
        }
    }

    pub fn from_name(name: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn flag(self) -> RuleSet {
        match self {
            Rule::NonFinite => RuleSet::NON_FINITE,
            Rule::OutOfRange => RuleSet::OUT_OF_RANGE,
            Rule::Flatline => RuleSet::FLATLINE,
            Rule::HeadbandOff => RuleSet::HEADBAND_OFF,
            Rule::BadContact => RuleSet::BAD_CONTACT,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl RuleSet {
    pub fn rules(self) -> impl Iterator<Item = Rule> {
        Rule::ALL.into_iter().filter(move |r| self.contains(r.flag()))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CleanRules {
    pub band_power_min: f64,
    pub band_power_max: f64,
    /// Minimum length of a run of identical values that counts as a flatline.
    pub flatline_run: usize,
    /// Flag rows whose headband flag is off (ignored when the column is absent).
    pub require_headband_on: bool,
    /// Contact codes above this are flagged. Headset codes are 1 (good),
    /// 2 (medium) and 4 (no contact).
    pub max_contact_quality_code: f64,
}

impl Default for CleanRules {
    fn default() -> Self {
        Self {
            band_power_min: -5.0,
            band_power_max: 5.0,
            flatline_run: 20,
            require_headband_on: true,
            max_contact_quality_code: 3.0,
        }
    }
}

/// Outcome of [`flag_noise`].
#[derive(Debug, Clone, PartialEq)]
pub struct CleanReport {
    rows_in: usize,
    /// Sorted by row; every entry has at least one rule.
    flagged: Vec<(usize, RuleSet)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanError {
    ReportMismatch { rows_in: usize, recording_rows: usize },
    RowOutOfRange { row: usize, rows_in: usize },
    EmptyRuleSet { row: usize },
}

impl fmt::Display for CleanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CleanError::ReportMismatch {
                rows_in,
                recording_rows,
            } => write!(f, "report covers {rows_in} rows but the recording has {recording_rows}"),
            CleanError::RowOutOfRange { row, rows_in } => {
                write!(f, "flagged row {row} is outside the {rows_in} report rows")
            }
            CleanError::EmptyRuleSet { row } => write!(f, "flagged row {row} cites no rule"),
        }
    }
}

impl core::error::Error for CleanError {}

impl CleanReport {
    /// Rebuilds a report from stored `(row, rules)` pairs, e.g. a parsed
    /// report file. Duplicate rows are merged.
    pub fn from_flags(rows_in: usize, flags: impl IntoIterator<Item = (usize, RuleSet)>) -> Result<Self, CleanError> {
        let mut flagged: Vec<(usize, RuleSet)> = Vec::new();
        for (row, rules) in flags {
            if rules.is_empty() {
                return Err(CleanError::EmptyRuleSet { row });
            }
            if row >= rows_in {
                return Err(CleanError::RowOutOfRange { row, rows_in });
            }
            flagged.push((row, rules));
        }
        flagged.sort_by_key(|(r, _)| *r);
        flagged.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 |= b.1;
                true
            } else {
                false
            }
        });
        Ok(Self { rows_in, flagged })
    }

    pub fn rows_in(&self) -> usize {
        self.rows_in
    }

    pub fn rows_out(&self) -> usize {
        self.rows_in - self.flagged.len()
    }

    pub fn flagged(&self) -> &[(usize, RuleSet)] {
        &self.flagged
    }

    pub fn rules_for(&self, row: usize) -> RuleSet {
        self.flagged
            .binary_search_by_key(&row, |(r, _)| *r)
            .map_or(RuleSet::empty(), |i| self.flagged[i].1)
    }

    /// Rows flagged by `rule` (a row may count toward several rules).
    pub fn count(&self, rule: Rule) -> usize {
        self.flagged.iter().filter(|(_, s)| s.contains(rule.flag())).count()
    }
}

/// Flags noisy rows. Pure: the recording is not modified.
pub fn flag_noise(recording: &Recording, rules: &CleanRules) -> CleanReport {
    let samples = recording.samples();
    let mut marks = vec![RuleSet::empty(); samples.len()];

    for (row, s) in samples.iter().enumerate() {
        let m = &mut marks[row];
        for &v in &s.band_power {
            if !v.is_finite() {
                *m |= RuleSet::NON_FINITE;
            } else if v < rules.band_power_min || v > rules.band_power_max {
                *m |= RuleSet::OUT_OF_RANGE;
            }
        }
        if rules.require_headband_on && s.headband_on == Some(false) {
            *m |= RuleSet::HEADBAND_OFF;
        }
        if s.contact.iter().any(|&c| c > rules.max_contact_quality_code) {
            *m |= RuleSet::BAD_CONTACT;
        }
    }

    let columns = recording.schema().band_power_len();
    for col in 0..columns {
        let mut start = 0;
        while start < samples.len() {
            let v = samples[start].band_power[col];
            let mut end = start + 1;
            // NaN never equals itself, so non-finite cells never extend a run.
            while end < samples.len() && samples[end].band_power[col] == v {
                end += 1;
            }
            if end - start >= rules.flatline_run {
                for m in &mut marks[start..end] {
                    *m |= RuleSet::FLATLINE;
                }
            }
            start = end;
        }
    }

    let flagged = marks.into_iter().enumerate().filter(|(_, m)| !m.is_empty()).collect();
    CleanReport {
        rows_in: samples.len(),
        flagged,
    }
}

/// Keeps exactly the unflagged rows, in order, with timestamps untouched.
pub fn apply_exclusions(recording: &Recording, report: &CleanReport) -> Result<Recording, CleanError> {
    if report.rows_in != recording.len() {
        return Err(CleanError::ReportMismatch {
            rows_in: report.rows_in,
            recording_rows: recording.len(),
        });
    }
    let mut flagged = report.flagged.iter().map(|(r, _)| *r).peekable();
    let kept = recording
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            if flagged.peek() == Some(i) {
                flagged.next();
                false
            } else {
                true
            }
        })
        .map(|(_, s)| s.clone())
        .collect();
    Ok(recording.with_samples(kept))
}
