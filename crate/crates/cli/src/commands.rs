use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use adsb_latency::anomaly::run_anomaly_suite;
use adsb_latency::export::{
    epoch_fractions_csv, estimates_csv, histograms_csv, jsonl_bytes, pretty_json, simulate_files, speed_comparison_csv,
    track_means_csv,
};
use adsb_latency::ingest::{
    filter_aircraft, group_points, group_reports, parse_reports, parse_track_points, segment_tracks_detailed,
    ReportRecord, ShortRun, TrackRecord,
};
use adsb_latency::latency::{aggregate_fleet, analyze_track, LatencyEstimate, TrackLatencySummary};
use adsb_latency::simgen::parse_scenarios;
use adsb_latency::validation::{render_table, run_all};
use adsb_latency::{AdsbReport, Icao, Track, TrackPoint};
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::InputError;

pub enum Outcome {
    Ok,
    ValidationFailed,
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(InputError::wrap)
}

struct Inputs {
    reports: BTreeMap<Icao, Vec<AdsbReport>>,
    points: BTreeMap<Icao, Vec<TrackPoint>>,
    malformed_reports: usize,
    malformed_points: usize,
}

fn read_inputs(cfg: &RunConfig, want_tracks: bool) -> Result<Inputs> {
    let opts = cfg.parse_options();
    let path = cfg.reports.as_deref().expect("checked by require_inputs");
    let reports = parse_reports(open(path)?, opts).with_context(|| format!("reading {}", path.display()))?;
    let (points, malformed_points) = match (want_tracks, cfg.tracks.as_deref()) {
        (true, Some(path)) => {
            let p = parse_track_points(open(path)?, opts).with_context(|| format!("reading {}", path.display()))?;
            (group_points(&p.records), p.malformed.len())
        }
        _ => (BTreeMap::new(), 0),
    };
    if cfg.verbose > 0 {
        eprintln!(
            "read {} reports ({} malformed), {} aircraft with track data ({} malformed lines)",
            reports.records.len(),
            reports.malformed.len(),
            points.len(),
            malformed_points
        );
    }
    Ok(Inputs {
        reports: group_reports(&reports.records),
        points,
        malformed_reports: reports.malformed.len(),
        malformed_points,
    })
}

fn segment(cfg: &RunConfig, inputs: &Inputs) -> (BTreeMap<Icao, Vec<Track>>, Vec<ShortRun>) {
    let mut tracks = BTreeMap::new();
    let mut short = Vec::new();
    for (icao, pts) in &inputs.points {
        let (t, s) = segment_tracks_detailed(*icao, pts, cfg.gap_threshold);
        tracks.insert(*icao, t);
        short.extend(s);
    }
    (tracks, short)
}

fn thread_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        b = b.num_threads(n);
    }
    b.build().context("building worker pool")
}

#[derive(Serialize)]
struct IngestOutput<'a> {
    #[serde(flatten)]
    summary: &'a adsb_latency::ingest::IngestSummary,
    malformed_report_lines: usize,
    malformed_track_lines: usize,
    accepted_tracks: usize,
    short_runs: &'a [ShortRun],
    rejected: BTreeMap<String, &'static str>,
}

/// Parses, segments and filters; writes normalized files for the accepted
/// aircraft plus `summary.json`.
pub fn ingest(cfg: &RunConfig) -> Result<Outcome> {
    cfg.require_inputs(true)?;
    let out = cfg.out_dir()?;
    let inputs = read_inputs(cfg, true)?;
    let (tracks, short) = segment(cfg, &inputs);
    let outcome = filter_aircraft(&inputs.reports, &tracks, &cfg.filter);

    let mut all_reports = Vec::new();
    let mut all_points = Vec::new();
    let mut accepted_tracks = 0;
    for icao in &outcome.accepted {
        let reports = inputs.reports.get(icao).map(Vec::as_slice).unwrap_or(&[]);
        all_reports.extend(reports.iter().map(ReportRecord::from));
        for track in tracks.get(icao).map(Vec::as_slice).unwrap_or(&[]) {
            accepted_tracks += 1;
            let points: Vec<TrackRecord> = track.points.iter().map(|p| TrackRecord::new(*icao, p)).collect();
            let inside: Vec<ReportRecord> =
                reports.iter().filter(|r| track.contains_time(r.toa)).map(ReportRecord::from).collect();
            let dir = format!("tracks/{icao}");
            write(&out, &format!("{dir}/track_{}.jsonl", track.track_index), jsonl_bytes(&points)?)?;
            write(&out, &format!("{dir}/reports_{}.jsonl", track.track_index), jsonl_bytes(&inside)?)?;
            all_points.extend(points);
        }
    }
    write(&out, "reports.jsonl", jsonl_bytes(&all_reports)?)?;
    write(&out, "tracks.jsonl", jsonl_bytes(&all_points)?)?;
    let summary = IngestOutput {
        summary: &outcome.summary,
        malformed_report_lines: inputs.malformed_reports,
        malformed_track_lines: inputs.malformed_points,
        accepted_tracks,
        short_runs: &short,
        rejected: outcome.rejected.iter().map(|(i, r)| (i.to_string(), r.as_str())).collect(),
    };
    write(&out, "summary.json", pretty_json(&summary)?)?;
    write(&out, "run_config.json", pretty_json(cfg)?)?;
    if cfg.verbose > 0 {
        eprintln!(
            "{} aircraft, {} accepted, {} tracks",
            outcome.summary.unique_icaos, outcome.summary.accepted_icaos, accepted_tracks
        );
    }
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct Skipped {
    icao: Icao,
    track_index: Option<usize>,
    start_s: Option<f64>,
    end_s: Option<f64>,
    reason: &'static str,
    message: String,
}

#[derive(Serialize)]
struct LatencyOutput<'a> {
    tracks: &'a [TrackLatencySummary],
    skipped: &'a [Skipped],
}

/// Fits each track and runs all estimators; failed tracks are listed under
/// `skipped` and never abort the run.
pub fn latency(cfg: &RunConfig) -> Result<Outcome> {
    cfg.require_inputs(true)?;
    let out = cfg.out_dir()?;
    let table = cfg.epu()?;
    let budget = cfg.budget()?;
    let lcfg = cfg.latency();
    let inputs = read_inputs(cfg, true)?;
    let (tracks, short) = segment(cfg, &inputs);

    let mut skipped: Vec<Skipped> = short
        .iter()
        .map(|s| Skipped {
            icao: s.icao,
            track_index: None,
            start_s: Some(s.start_s),
            end_s: Some(s.end_s),
            reason: "track_too_short",
            message: format!("{} samples", s.samples),
        })
        .collect();
    for icao in inputs.reports.keys().filter(|i| !inputs.points.contains_key(i)) {
        skipped.push(Skipped {
            icao: *icao,
            track_index: None,
            start_s: None,
            end_s: None,
            reason: "no_track",
            message: "reports without track data".into(),
        });
    }

    let work: Vec<&Track> = tracks.values().flatten().collect();
    let empty = Vec::new();
    let results: Vec<_> = thread_pool(cfg)?.install(|| {
        work.par_iter()
            .map(|t| {
                let rs = inputs.reports.get(&t.icao).unwrap_or(&empty);
                analyze_track(t, rs, &table, &lcfg, cfg.accel_margin)
            })
            .collect()
    });

    let mut estimates: Vec<LatencyEstimate> = Vec::new();
    let mut summaries = Vec::new();
    for (track, result) in work.iter().zip(results) {
        match result {
            Ok((_, e, s)) => {
                estimates.extend(e);
                summaries.push(s);
            }
            Err(e) => skipped.push(Skipped {
                icao: track.icao,
                track_index: Some(track.track_index),
                start_s: Some(track.start()),
                end_s: Some(track.end()),
                reason: e.code(),
                message: e.to_string(),
            }),
        }
    }
    let fleet = aggregate_fleet(&summaries, &budget)?;

    write(&out, "estimates.csv", estimates_csv(&estimates))?;
    write(&out, "summaries.json", pretty_json(&LatencyOutput { tracks: &summaries, skipped: &skipped })?)?;
    write(&out, "fleet.json", pretty_json(&fleet)?)?;
    write(&out, "plot_track_means.csv", track_means_csv(&fleet))?;
    write(&out, "histograms.csv", histograms_csv(&summaries))?;
    write(&out, "run_config.json", pretty_json(cfg)?)?;
    if cfg.verbose > 0 {
        eprintln!("{} tracks analyzed, {} skipped", summaries.len(), skipped.len());
    }
    Ok(Outcome::Ok)
}

/// Runs the detectors; findings are data, so the exit status is success
/// whatever they say.
pub fn anomaly(cfg: &RunConfig) -> Result<Outcome> {
    cfg.require_inputs(false)?;
    let out = cfg.out_dir()?;
    let inputs = read_inputs(cfg, false)?;
    let findings = run_anomaly_suite(&inputs.reports, &cfg.anomaly);
    let checked: BTreeMap<Icao, Vec<AdsbReport>> = inputs
        .reports
        .iter()
        .filter(|(_, rs)| cfg.anomaly.all_icaos || rs.iter().any(|r| r.utc_coupled))
        .map(|(i, rs)| (*i, rs.clone()))
        .collect();
    write(&out, "findings.jsonl", jsonl_bytes(&findings)?)?;
    write(&out, "plot_epoch_fractions.csv", epoch_fractions_csv(&checked))?;
    write(&out, "plot_speed_comparison.csv", speed_comparison_csv(&checked))?;
    write(&out, "run_config.json", pretty_json(cfg)?)?;
    if cfg.verbose > 0 {
        let hits = findings.iter().filter(|f| f.triggered).count();
        eprintln!("{} aircraft checked, {} findings triggered", checked.len(), hits);
    }
    Ok(Outcome::Ok)
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let path = cfg.require_scenario()?;
    let out = cfg.out_dir()?;
    let table = cfg.epu()?;
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(InputError::wrap)?;
    let scenarios = parse_scenarios(&text).with_context(|| format!("parsing {}", path.display()))?;
    for (name, bytes) in simulate_files(&scenarios, &table)? {
        write(&out, name, bytes)?;
    }
    Ok(Outcome::Ok)
}

pub fn validate(cfg: &RunConfig) -> Result<Outcome> {
    let vcfg = cfg.validation()?;
    let results = run_all(&vcfg);
    print!("{}", render_table(&results));
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria passed", results.len());
    if let Some(out) = &cfg.out {
        write(out, "validation.json", pretty_json(&results)?)?;
    }
    Ok(if passed == results.len() { Outcome::Ok } else { Outcome::ValidationFailed })
}
