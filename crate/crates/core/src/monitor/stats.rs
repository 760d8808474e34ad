//! Aggregates over selection events: per-emotion percentages by segment,
//! valence split and per-user timelines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;

use super::events::SelectionEvent;
use super::users::{AgeBucket, Gender, UserProfile};
use super::MonitorError;
use crate::taxonomy::{Emotion, Valence};

/// Population slice; `None` fields match everyone.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub gender: Option<Gender>,
    pub age_bucket: Option<AgeBucket>,
}

impl Segment {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn is_all(&self) -> bool {
        self.gender.is_none() && self.age_bucket.is_none()
    }

    /// Whether an event by a user with `profile` belongs here. Events without
    /// a profile only count in the unsegmented view.
    pub fn admits(&self, profile: Option<&UserProfile>) -> bool {
        match profile {
            None => self.is_all(),
            Some(p) => {
                self.gender.is_none_or(|g| g == p.gender) && self.age_bucket.is_none_or(|b| b == p.age_bucket())
            }
        }
    }
}

/// Parses `gender:bucket`, `gender` or `bucket`, e.g. `female:18-23`.
impl FromStr for Segment {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut seg = Segment::default();
        for part in s.split(':').map(str::trim).filter(|p| !p.is_empty()) {
            if let Ok(b) = part.parse::<AgeBucket>() {
                seg.age_bucket = Some(b);
            } else if matches!(part.to_ascii_lowercase().as_str(), "male" | "female" | "unspecified") {
                seg.gender = Some(part.parse()?);
            } else {
                return Err(MonitorError::BadSegment(format!("cannot read '{part}' as a gender or age bucket")));
            }
        }
        Ok(seg)
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.gender, self.age_bucket) {
            (None, None) => f.write_str("all"),
            (Some(g), None) => f.write_str(g.as_str()),
            (None, Some(b)) => f.write_str(b.as_str()),
            (Some(g), Some(b)) => write!(f, "{}:{}", g.as_str(), b.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmotionStats {
    pub segment: Segment,
    pub total: usize,
    /// True when no event falls in the segment; every percentage is then 0.
    pub empty: bool,
    /// All 30 emotions, registry order.
    pub counts: Vec<(Emotion, usize)>,
    pub percentages: Vec<(Emotion, f64)>,
}

impl EmotionStats {
    pub fn count(&self, e: Emotion) -> usize {
        self.counts[e.index()].1
    }

    pub fn percentage(&self, e: Emotion) -> f64 {
        self.percentages[e.index()].1
    }
}

pub fn emotion_stats<'e, 'p, P>(events: impl IntoIterator<Item = &'e SelectionEvent>, profile_of: P, segment: Segment) -> EmotionStats
where
    P: Fn(&str) -> Option<&'p UserProfile>,
{
    let mut counts = vec![0usize; Emotion::ALL.len()];
    for ev in events {
        if segment.admits(profile_of(&ev.user)) {
            counts[ev.emotion.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let pct = |c: usize| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
    EmotionStats {
        segment,
        total,
        empty: total == 0,
        counts: Emotion::ALL.iter().map(|e| (*e, counts[e.index()])).collect(),
        percentages: Emotion::ALL.iter().map(|e| (*e, pct(counts[e.index()]))).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValenceSplit {
    pub positive: f64,
    pub negative: f64,
}

/// Positive and negative shares (percent) of the events in `stats`.
pub fn valence_split(stats: &EmotionStats) -> ValenceSplit {
    if stats.total == 0 {
        return ValenceSplit {
            positive: 0.0,
            negative: 0.0,
        };
    }
    let pos: usize = stats
        .counts
        .iter()
        .filter(|(e, _)| e.valence() == Valence::Positive)
        .map(|(_, c)| c)
        .sum();
    let total = stats.total as f64;
    ValenceSplit {
        positive: 100.0 * pos as f64 / total,
        negative: 100.0 * (stats.total - pos) as f64 / total,
    }
}

/// Parses `<n><unit>` with unit `s`, `m`, `h`, `d` or `w` (e.g. `1d`, `12h`).
pub fn parse_window(s: &str) -> Result<Duration, MonitorError> {
    let s = s.trim();
    let bad = || MonitorError::BadWindow(s.to_string());
    let split = s.find(|c: char| !c.is_ascii_digit()).ok_or_else(bad)?;
    let n: i64 = s[..split].parse().map_err(|_| bad())?;
    let d = match &s[split..] {
        "s" => Duration::try_seconds(n),
        "m" => Duration::try_minutes(n),
        "h" => Duration::try_hours(n),
        "d" => Duration::try_days(n),
        "w" => Duration::try_weeks(n),
        _ => None,
    }
    .ok_or_else(bad)?;
    if d <= Duration::zero() {
        return Err(bad());
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimelineBucket {
    pub start: DateTime<Utc>,
    pub total: usize,
    /// Emotions with at least one event in the window.
    pub counts: BTreeMap<Emotion, usize>,
}

/// Buckets `user`'s events into windows aligned to the Unix epoch; only
/// windows containing events are returned, oldest first.
pub fn timeline<'a>(events: impl IntoIterator<Item = &'a SelectionEvent>, user: &str, window: Duration) -> Vec<TimelineBucket> {
    let step = window.num_milliseconds().max(1);
    let mut buckets: BTreeMap<i64, BTreeMap<Emotion, usize>> = BTreeMap::new();
    for ev in events.into_iter().filter(|e| e.user == user) {
        let key = ev.timestamp.timestamp_millis().div_euclid(step);
        *buckets.entry(key).or_default().entry(ev.emotion).or_default() += 1;
    }
    buckets
        .into_iter()
        .map(|(k, counts)| TimelineBucket {
            start: DateTime::from_timestamp_millis(k * step).expect("bucket start within range"),
            total: counts.values().sum(),
            counts,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::events::SelectionContext;
    use chrono::TimeZone;
    use std::collections::BTreeSet;

    fn ev(user: &str, emotion: Emotion, day: u32) -> SelectionEvent {
        SelectionEvent {
            timestamp: Utc.with_ymd_and_hms(2023, 5, day, 10, 0, 0).unwrap(),
            user: user.into(),
            emotion,
            context: SelectionContext::SearchFilter,
        }
    }

    fn profile(id: &str, age: u32, gender: Gender) -> UserProfile {
        UserProfile {
            id: id.into(),
            age,
            gender,
            visible_to_supervisor: false,
            read_tales: BTreeSet::new(),
            flags: vec![],
        }
    }

    #[test]
    fn hand_counted_percentages() {
        let events = [
            ev("a", Emotion::Joy, 1),
            ev("a", Emotion::Joy, 1),
            ev("a", Emotion::Calm, 1),
            ev("a", Emotion::Fear, 1),
        ];
        let s = emotion_stats(&events, |_| None, Segment::all());
        assert_eq!(s.percentage(Emotion::Joy), 50.0);
        assert_eq!(s.percentage(Emotion::Calm), 25.0);
        assert_eq!(s.percentage(Emotion::Fear), 25.0);
        let v = valence_split(&s);
        assert_eq!((v.positive, v.negative), (75.0, 25.0));
    }

    #[test]
    fn segments_filter_by_profile() {
        let users = [profile("f20", 20, Gender::Female), profile("m17", 17, Gender::Male)];
        let lookup = |id: &str| users.iter().find(|u| u.id == id);
        let events = [ev("f20", Emotion::Joy, 1), ev("m17", Emotion::Fear, 1), ev("anon", Emotion::Calm, 1)];
        let seg: Segment = "female:18-23".parse().unwrap();
        let s = emotion_stats(&events, lookup, seg);
        assert_eq!((s.total, s.percentage(Emotion::Joy)), (1, 100.0));
        let s = emotion_stats(&events, lookup, "male:18-23".parse().unwrap());
        assert!(s.empty);
        assert!(s.percentages.iter().all(|(_, p)| *p == 0.0));
        assert_eq!(valence_split(&s), ValenceSplit { positive: 0.0, negative: 0.0 });
        assert_eq!(emotion_stats(&events, lookup, Segment::all()).total, 3);
        assert!("female:teen".parse::<Segment>().is_err());
        assert_eq!(seg.to_string(), "female:18-23");
    }

    #[test]
    fn windows_and_timeline() {
        assert_eq!(parse_window("1d").unwrap(), Duration::days(1));
        assert_eq!(parse_window("12h").unwrap(), Duration::hours(12));
        for bad in ["", "d", "0d", "3y", "-1d"] {
            assert!(parse_window(bad).is_err(), "{bad}");
        }
        let events = [ev("u", Emotion::Joy, 1), ev("u", Emotion::Doubt, 2), ev("v", Emotion::Joy, 2)];
        let t = timeline(&events, "u", Duration::days(1));
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|b| b.total == 1));
        assert!(t[0].start < t[1].start);
        assert_eq!(t[0].start, Utc.with_ymd_and_hms(2023, 5, 1, 0, 0, 0).unwrap());
    }
}
