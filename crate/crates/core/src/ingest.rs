//! JSONL report/track parsing, per-aircraft track segmentation and the
//! aircraft selection filter.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdsbReport, Icao, Track, TrackPoint, MAX_NACP};
use crate::scalar::Vec2;
use crate::spline::MIN_SAMPLES;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Default gap that splits one aircraft's points into separate tracks, seconds.
pub const DEFAULT_GAP_THRESHOLD: f64 = 60.0;

/// One line of the report JSONL format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub icao: Icao,
    pub toa_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub vx_mps: f64,
    pub vy_mps: f64,
    pub nacp: i64,
    pub utc_coupled: bool,
    pub link_version: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl TryFrom<ReportRecord> for AdsbReport {
    type Error = Error;

    fn try_from(r: ReportRecord) -> Result<Self> {
        if !(0..=MAX_NACP as i64).contains(&r.nacp) {
            return Err(Error::InvalidNacp(r.nacp));
        }
        let report = AdsbReport {
            icao: r.icao,
            toa: r.toa_s,
            pos: Vec2::new(r.x_m, r.y_m),
            vel: Vec2::new(r.vx_mps, r.vy_mps),
            nacp: r.nacp as u8,
            utc_coupled: r.utc_coupled,
            link_version: r.link_version,
            link: r.link,
            source_tag: r.source.unwrap_or_default(),
        };
        report.validate()?;
        Ok(report)
    }
}

impl From<&AdsbReport> for ReportRecord {
    fn from(r: &AdsbReport) -> Self {
        Self {
            icao: r.icao,
            toa_s: r.toa,
            x_m: r.pos.x,
            y_m: r.pos.y,
            vx_mps: r.vel.x,
            vy_mps: r.vel.y,
            nacp: r.nacp as i64,
            utc_coupled: r.utc_coupled,
            link_version: r.link_version,
            link: r.link.clone(),
            source: (!r.source_tag.is_empty()).then(|| r.source_tag.clone()),
        }
    }
}

/// One line of the track JSONL format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub icao: Icao,
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub vx_mps: f64,
    pub vy_mps: f64,
}

impl TrackRecord {
    pub fn new(icao: Icao, p: &TrackPoint) -> Self {
        Self { icao, t_s: p.t, x_m: p.pos.x, y_m: p.pos.y, vx_mps: p.vel.x, vy_mps: p.vel.y }
    }

    fn into_point(self) -> Result<(Icao, TrackPoint)> {
        let p = TrackPoint {
            t: self.t_s,
            pos: Vec2::new(self.x_m, self.y_m),
            vel: Vec2::new(self.vx_mps, self.vy_mps),
        };
        if !p.t.is_finite() || p.t < 0.0 || !p.pos.is_finite() || !p.vel.is_finite() {
            return Err(Error::InvalidInput("non-finite or negative track sample".into()));
        }
        Ok((self.icao, p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MalformedLine {
    pub line: usize,
    pub message: String,
}

/// Parsed records plus every line that failed to parse.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub malformed: Vec<MalformedLine>,
    /// Non-blank lines seen.
    pub total_lines: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Fraction of malformed lines above which the stream is rejected.
    pub max_malformed_fraction: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { max_malformed_fraction: 0.1 }
    }
}

fn parse_lines<R, T, F>(reader: R, opts: ParseOptions, mut convert: F) -> Result<Parsed<T>>
where
    R: BufRead,
    F: FnMut(&str) -> Result<T>,
{
    let mut records = Vec::new();
    let mut malformed = Vec::new();
    let mut total = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        total += 1;
        match convert(trimmed) {
            Ok(r) => records.push(r),
            Err(e) => malformed.push(MalformedLine { line: i + 1, message: e.to_string() }),
        }
    }
    if total > 0 && malformed.len() as f64 > opts.max_malformed_fraction * total as f64 {
        return Err(Error::CorruptInput {
            malformed: malformed.len(),
            total,
            limit_fraction: opts.max_malformed_fraction,
        });
    }
    Ok(Parsed { records, malformed, total_lines: total })
}

/// Tracks the day offset per aircraft so time-of-day stamps stay monotone
/// across midnight.
#[derive(Default)]
struct DayUnwrapper {
    state: BTreeMap<Icao, (f64, f64)>,
}

impl DayUnwrapper {
    fn unwrap(&mut self, icao: Icao, t: f64) -> f64 {
        let (offset, last) = self.state.entry(icao).or_insert((0.0, t));
        let mut v = t + *offset;
        if v < *last - SECONDS_PER_DAY / 2.0 {
            *offset += SECONDS_PER_DAY;
            v += SECONDS_PER_DAY;
        }
        *last = v;
        v
    }
}

/// Parses report JSONL. Order is preserved; midnight rollovers are
/// unwrapped per aircraft.
pub fn parse_reports<R: BufRead>(reader: R, opts: ParseOptions) -> Result<Parsed<AdsbReport>> {
    let mut days = DayUnwrapper::default();
    parse_lines(reader, opts, |line| {
        let rec: ReportRecord =
            serde_json::from_str(line).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut report = AdsbReport::try_from(rec)?;
        report.toa = days.unwrap(report.icao, report.toa);
        Ok(report)
    })
}

/// Parses track JSONL. Out-of-order samples are kept as-is.
pub fn parse_track_points<R: BufRead>(reader: R, opts: ParseOptions) -> Result<Parsed<(Icao, TrackPoint)>> {
    let mut days = DayUnwrapper::default();
    parse_lines(reader, opts, |line| {
        let rec: TrackRecord =
            serde_json::from_str(line).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let (icao, mut p) = rec.into_point()?;
        p.t = days.unwrap(icao, p.t);
        Ok((icao, p))
    })
}

pub fn group_reports(reports: &[AdsbReport]) -> BTreeMap<Icao, Vec<AdsbReport>> {
    let mut out: BTreeMap<Icao, Vec<AdsbReport>> = BTreeMap::new();
    for r in reports {
        out.entry(r.icao).or_default().push(r.clone());
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.toa.total_cmp(&b.toa));
    }
    out
}

pub fn group_points(points: &[(Icao, TrackPoint)]) -> BTreeMap<Icao, Vec<TrackPoint>> {
    let mut out: BTreeMap<Icao, Vec<TrackPoint>> = BTreeMap::new();
    for (icao, p) in points {
        out.entry(*icao).or_default().push(*p);
    }
    out
}

/// A run of samples too short to become a track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortRun {
    pub icao: Icao,
    pub start_s: f64,
    pub end_s: f64,
    pub samples: usize,
}

/// Splits one aircraft's points wherever consecutive samples are more than
/// `gap_threshold` seconds apart. Tracks shorter than a cubic fit needs are
/// dropped; duplicate timestamps keep the first sample.
pub fn segment_tracks(icao: Icao, points: &[TrackPoint], gap_threshold: f64) -> Vec<Track> {
    segment_tracks_detailed(icao, points, gap_threshold).0
}

/// As [`segment_tracks`], also returning the runs that were dropped.
pub fn segment_tracks_detailed(icao: Icao, points: &[TrackPoint], gap_threshold: f64) -> (Vec<Track>, Vec<ShortRun>) {
    if !(gap_threshold > 0.0) {
        return (Vec::new(), Vec::new());
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    sorted.dedup_by(|b, a| b.t == a.t);

    let mut runs: Vec<Vec<TrackPoint>> = Vec::new();
    for p in sorted {
        match runs.last_mut() {
            Some(run) if p.t - run[run.len() - 1].t <= gap_threshold => run.push(p),
            _ => runs.push(vec![p]),
        }
    }
    let (keep, short): (Vec<_>, Vec<_>) = runs.into_iter().partition(|r| r.len() >= MIN_SAMPLES);
    let tracks = keep
        .into_iter()
        .enumerate()
        .map(|(i, pts)| Track::new(icao, i, pts).expect("sorted, deduplicated run"))
        .collect();
    let short = short
        .into_iter()
        .map(|r| ShortRun { icao, start_s: r[0].t, end_s: r[r.len() - 1].t, samples: r.len() })
        .collect();
    (tracks, short)
}

pub fn segment_all(points: &[(Icao, TrackPoint)], gap_threshold: f64) -> BTreeMap<Icao, Vec<Track>> {
    group_points(points)
        .into_iter()
        .map(|(icao, pts)| (icao, segment_tracks(icao, &pts, gap_threshold)))
        .collect()
}

/// Reports whose TOA lies inside the track's time span.
pub fn reports_in_track<'a>(reports: &'a [AdsbReport], track: &Track) -> Vec<&'a AdsbReport> {
    reports.iter().filter(|r| track.contains_time(r.toa)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterCriteria {
    pub require_1090es: bool,
    pub nacp_min: u8,
    pub nacp_max: u8,
    pub require_non_utc_coupled: bool,
    pub min_tracks_per_icao: usize,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            require_1090es: true,
            nacp_min: 8,
            nacp_max: 11,
            require_non_utc_coupled: true,
            min_tracks_per_icao: 2,
        }
    }
}

/// Why an aircraft was not selected. Only the first failing criterion, in
/// declaration order, is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoReports,
    Not1090es,
    NacpOutOfRange,
    UtcCoupled,
    TooFewTracks,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NoReports => "no_reports",
            RejectReason::Not1090es => "not_1090es",
            RejectReason::NacpOutOfRange => "nacp_out_of_range",
            RejectReason::UtcCoupled => "utc_coupled",
            RejectReason::TooFewTracks => "too_few_tracks",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub total_reports: usize,
    pub unique_icaos: usize,
    pub utc_coupled_icaos: usize,
    pub accepted_icaos: usize,
    pub rejected_reason_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub accepted: BTreeSet<Icao>,
    pub rejected: BTreeMap<Icao, RejectReason>,
    pub summary: IngestSummary,
}

fn check_aircraft(
    reports: &[AdsbReport],
    tracks: &[Track],
    criteria: &FilterCriteria,
) -> std::result::Result<(), RejectReason> {
    // Reports inside the aircraft's tracks are the analyzed ones; fall back
    // to every report when none overlap.
    let analyzed: Vec<&AdsbReport> = {
        let inside: Vec<&AdsbReport> = reports
            .iter()
            .filter(|r| tracks.iter().any(|t| t.contains_time(r.toa)))
            .collect();
        if inside.is_empty() { reports.iter().collect() } else { inside }
    };
    if analyzed.is_empty() {
        return Err(RejectReason::NoReports);
    }
    if criteria.require_1090es && analyzed.iter().any(|r| !r.is_1090es()) {
        return Err(RejectReason::Not1090es);
    }
    if analyzed.iter().any(|r| r.nacp < criteria.nacp_min || r.nacp > criteria.nacp_max) {
        return Err(RejectReason::NacpOutOfRange);
    }
    if criteria.require_non_utc_coupled && analyzed.iter().any(|r| r.utc_coupled) {
        return Err(RejectReason::UtcCoupled);
    }
    if tracks.len() < criteria.min_tracks_per_icao {
        return Err(RejectReason::TooFewTracks);
    }
    Ok(())
}

/// Applies the aircraft selection criteria.
pub fn filter_aircraft(
    reports: &BTreeMap<Icao, Vec<AdsbReport>>,
    tracks: &BTreeMap<Icao, Vec<Track>>,
    criteria: &FilterCriteria,
) -> FilterOutcome {
    let icaos: BTreeSet<Icao> = reports.keys().chain(tracks.keys()).copied().collect();
    let mut out = FilterOutcome::default();
    out.summary.total_reports = reports.values().map(Vec::len).sum();
    out.summary.unique_icaos = icaos.len();
    out.summary.utc_coupled_icaos =
        reports.values().filter(|rs| rs.iter().any(|r| r.utc_coupled)).count();
    for icao in icaos {
        let rs = reports.get(&icao).map(Vec::as_slice).unwrap_or(&[]);
        let ts = tracks.get(&icao).map(Vec::as_slice).unwrap_or(&[]);
        match check_aircraft(rs, ts, criteria) {
            Ok(()) => {
                out.accepted.insert(icao);
            }
            Err(reason) => {
                out.rejected.insert(icao, reason);
                *out.summary.rejected_reason_counts.entry(reason.as_str().to_string()).or_default() += 1;
            }
        }
    }
    out.summary.accepted_icaos = out.accepted.len();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn icao(s: &str) -> Icao {
        s.parse().unwrap()
    }

    fn report(icao_s: &str, toa: f64, nacp: u8, utc: bool) -> AdsbReport {
        AdsbReport {
            icao: icao(icao_s),
            toa,
            pos: Vec2::new(0.0, 0.0),
            vel: Vec2::new(100.0, 0.0),
            nacp,
            utc_coupled: utc,
            link_version: 2,
            link: None,
            source_tag: String::new(),
        }
    }

    fn points(times: impl IntoIterator<Item = f64>) -> Vec<TrackPoint> {
        times
            .into_iter()
            .map(|t| TrackPoint { t, pos: Vec2::new(100.0 * t, 0.0), vel: Vec2::new(100.0, 0.0) })
            .collect()
    }

    #[test]
    fn parses_one_report() {
        let line = r#"{"icao": "A637E1", "toa_s": 46800.40625, "x_m": 1000.0, "y_m": -2500.0, "vx_mps": 120.0, "vy_mps": -5.0, "nacp": 9, "utc_coupled": false, "link_version": 2}"#;
        let parsed = parse_reports(line.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let r = &parsed.records[0];
        assert_eq!(r.toa, 46800.40625);
        assert_eq!(r.nacp, 9);
        assert!(!r.utc_coupled);
        assert_eq!(r.icao.to_string(), "A637E1");
        assert_eq!(r.vel, Vec2::new(120.0, -5.0));
    }

    #[test]
    fn empty_streams_parse_to_nothing() {
        let p = parse_reports(&b""[..], ParseOptions::default()).unwrap();
        assert!(p.records.is_empty() && p.malformed.is_empty());
        let p = parse_track_points(&b"\n\n"[..], ParseOptions::default()).unwrap();
        assert!(p.records.is_empty());
    }

    #[test]
    fn bad_nacp_line_is_recorded_not_dropped() {
        let good = r#"{"icao": "A637E1", "toa_s": 1.0, "x_m": 0, "y_m": 0, "vx_mps": 1, "vy_mps": 0, "nacp": 9, "utc_coupled": false, "link_version": 2}"#;
        let bad = good.replace("\"nacp\": 9", "\"nacp\": 13");
        let text = std::iter::repeat_n(good, 10).chain([bad.as_str()]).collect::<Vec<_>>().join("\n");
        let opts = ParseOptions { max_malformed_fraction: 0.5 };
        let p = parse_reports(text.as_bytes(), opts).unwrap();
        assert_eq!(p.records.len(), 10);
        assert_eq!(p.malformed.len(), 1);
        assert_eq!(p.malformed[0].line, 11);
    }

    #[test]
    fn too_many_bad_lines_is_corrupt() {
        let text = "not json\nalso not json\n";
        assert!(matches!(
            parse_reports(text.as_bytes(), ParseOptions::default()),
            Err(Error::CorruptInput { malformed: 2, total: 2, .. })
        ));
    }

    #[test]
    fn parses_track_point_without_reordering() {
        let text = concat!(
            r#"{"icao": "A637E1", "t_s": 100.0, "x_m": 0, "y_m": 0, "vx_mps": 100, "vy_mps": 0}"#,
            "\n",
            r#"{"icao": "A637E1", "t_s": 99.0, "x_m": 0, "y_m": 0, "vx_mps": 100, "vy_mps": 0}"#
        );
        let p = parse_track_points(text.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.records[0].1.t, 100.0);
        assert_eq!(p.records[0].1.vel, Vec2::new(100.0, 0.0));
        assert_eq!(p.records[1].1.t, 99.0);
    }

    #[test]
    fn midnight_rollover_is_unwrapped() {
        let mk = |t: f64| {
            format!(r#"{{"icao": "ABC123", "t_s": {t}, "x_m": 0, "y_m": 0, "vx_mps": 100, "vy_mps": 0}}"#)
        };
        let text = [mk(86399.0), mk(86399.5), mk(0.0), mk(0.5)].join("\n");
        let p = parse_track_points(text.as_bytes(), ParseOptions::default()).unwrap();
        let ts: Vec<f64> = p.records.iter().map(|r| r.1.t).collect();
        assert_eq!(ts, vec![86399.0, 86399.5, 86400.0, 86400.5]);
    }

    #[test]
    fn segmentation_examples() {
        let a = icao("ABC123");
        let mut pts = points((0..=100).map(|t| t as f64));
        pts.extend(points((1000..=1100).map(|t| t as f64)));
        let tracks = segment_tracks(a, &pts, 60.0);
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].track_index, 0);
        assert_eq!(tracks[1].start(), 1000.0);

        let tracks = segment_tracks(a, &points((0..=300).map(|t| t as f64)), 60.0);
        assert_eq!(tracks.len(), 1);

        let tracks = segment_tracks(a, &points([0.0, 500.0, 1000.0]), 60.0);
        assert!(tracks.is_empty());
    }

    #[test]
    fn filter_examples() {
        let a = icao("AAAAAA");
        let b = icao("BBBBBB");
        let c = icao("CCCCCC");
        let mut reports = BTreeMap::new();
        let mut tracks = BTreeMap::new();
        let two_tracks = |i: Icao| {
            let mut p = points((0..=20).map(|t| t as f64));
            p.extend(points((200..=220).map(|t| t as f64)));
            segment_tracks(i, &p, 60.0)
        };
        reports.insert(a, vec![report("AAAAAA", 5.0, 9, false), report("AAAAAA", 205.0, 9, false)]);
        tracks.insert(a, two_tracks(a));
        reports.insert(b, vec![report("BBBBBB", 5.0, 9, true)]);
        tracks.insert(b, two_tracks(b));
        reports.insert(c, vec![report("CCCCCC", 5.0, 9, false)]);
        tracks.insert(c, segment_tracks(c, &points((0..=20).map(|t| t as f64)), 60.0));

        let out = filter_aircraft(&reports, &tracks, &FilterCriteria::default());
        assert_eq!(out.accepted, BTreeSet::from([a]));
        assert_eq!(out.rejected[&b], RejectReason::UtcCoupled);
        assert_eq!(out.rejected[&c], RejectReason::TooFewTracks);
        assert_eq!(out.summary.unique_icaos, 3);
        assert_eq!(out.summary.utc_coupled_icaos, 1);
        assert_eq!(out.summary.accepted_icaos, 1);
        assert_eq!(out.summary.rejected_reason_counts["utc_coupled"], 1);
        assert_eq!(out.summary.rejected_reason_counts["too_few_tracks"], 1);
    }

    #[test]
    fn mixed_nacp_rejects_aircraft() {
        let a = icao("AAAAAA");
        let mut p = points((0..=20).map(|t| t as f64));
        p.extend(points((200..=220).map(|t| t as f64)));
        let tracks = BTreeMap::from([(a, segment_tracks(a, &p, 60.0))]);
        let reports = BTreeMap::from([(a, vec![report("AAAAAA", 5.0, 9, false), report("AAAAAA", 6.0, 7, false)])]);
        let out = filter_aircraft(&reports, &tracks, &FilterCriteria::default());
        assert_eq!(out.rejected[&a], RejectReason::NacpOutOfRange);
    }

    #[test]
    fn explicit_non_1090_link_is_rejected() {
        let a = icao("AAAAAA");
        let mut p = points((0..=20).map(|t| t as f64));
        p.extend(points((200..=220).map(|t| t as f64)));
        let tracks = BTreeMap::from([(a, segment_tracks(a, &p, 60.0))]);
        let mut r = report("AAAAAA", 5.0, 9, false);
        r.link = Some("UAT".into());
        let out = filter_aircraft(&BTreeMap::from([(a, vec![r])]), &tracks, &FilterCriteria::default());
        assert_eq!(out.rejected[&a], RejectReason::Not1090es);
    }
}
