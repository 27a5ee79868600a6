//! Output writers: JSONL records, per-report CSV and plot-data CSVs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so output
//! bytes depend only on the values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::anomaly::{speed_series, toa_fractions};
use crate::error::{Error, Result};
use crate::ingest::{ReportRecord, TrackRecord};
use crate::latency::{FleetReport, LatencyEstimate, TrackLatencySummary};
use crate::model::{AdsbReport, EpuTable, Icao};
use crate::simgen::{generate_reports, generate_scenario_track, SyntheticScenario, RNG_ALGORITHM};

fn json_err(e: serde_json::Error) -> Error {
    Error::InvalidInput(format!("serialization failed: {e}"))
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: impl IntoIterator<Item = T>) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(json_err)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn jsonl_bytes<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, items)?;
    Ok(buf)
}

pub fn pretty_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(json_err)?;
    buf.push(b'\n');
    Ok(buf)
}

pub const ESTIMATES_HEADER: &str = "icao,track_index,toa_s,ul_s,e_at_m,speed_mps,excluded,reason";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per report; `ul_s` and `e_at_m` are empty for excluded reports.
pub fn estimates_csv(estimates: &[LatencyEstimate]) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for e in estimates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.icao,
            e.track_index,
            e.toa,
            opt(e.ul),
            opt(e.along_track_error),
            e.speed_used,
            e.excluded.is_some(),
            e.excluded.map(|x| x.as_str()).unwrap_or(""),
        );
    }
    out
}

/// Per-track mean/std with sequential track numbering across the fleet.
pub fn track_means_csv(fleet: &FleetReport) -> String {
    let mut out = String::from("seq,icao,track_index,mean_ul_s,std_ul_s,mtpes_ul_s,class\n");
    for group in &fleet.aircraft {
        for t in &group.tracks {
            let class = serde_json::to_value(t.class).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                t.seq, group.icao, t.track_index, t.mean_ul, t.std_ul, t.mtpes_ul, class
            );
        }
    }
    out
}

/// Histogram bins, one row per bin: `[bin_lo_s, bin_hi_s)`.
pub fn histograms_csv(summaries: &[TrackLatencySummary]) -> String {
    let mut out = String::from("icao,track_index,bin_lo_s,bin_hi_s,count\n");
    for s in summaries {
        let h = &s.histogram;
        for (i, c) in h.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", s.icao, s.track_index, h.edges[i], h.edges[i + 1], c);
        }
    }
    out
}

/// TOA fractional seconds per report.
pub fn epoch_fractions_csv(reports: &BTreeMap<Icao, Vec<AdsbReport>>) -> String {
    let mut out = String::from("icao,utc_coupled,toa_s,frac_s\n");
    for (icao, rs) in reports {
        let utc = rs.iter().any(|r| r.utc_coupled);
        for (toa, frac) in toa_fractions(rs) {
            let _ = writeln!(out, "{icao},{utc},{toa},{frac}");
        }
    }
    out
}

/// Calculated inter-report speed next to the reported speed.
pub fn speed_comparison_csv(reports: &BTreeMap<Icao, Vec<AdsbReport>>) -> String {
    let mut out = String::from("icao,toa_s,calculated_mps,reported_mps\n");
    for (icao, rs) in reports {
        for s in speed_series(rs) {
            let _ = writeln!(out, "{icao},{},{},{}", s.toa, s.calculated_mps, s.reported_mps);
        }
    }
    out
}

#[derive(Serialize)]
struct SimulationRunConfig<'a> {
    rng: &'a str,
    crate_version: &'a str,
    epu_table: String,
    scenarios: &'a [SyntheticScenario],
}

pub const SIM_REPORTS: &str = "reports.jsonl";
pub const SIM_TRACKS: &str = "tracks.jsonl";
pub const SIM_TRUTH: &str = "ground_truth.jsonl";
pub const SIM_RUN_CONFIG: &str = "run_config.json";

/// Simulation outputs as `(file name, bytes)`, in a fixed order.
pub fn simulate_files(scenarios: &[SyntheticScenario], table: &EpuTable) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut reports = Vec::new();
    let mut truth = Vec::new();
    let mut tracks = Vec::new();
    for sc in scenarios {
        let sim = generate_reports(sc, table)?;
        reports.extend(sim.reports.iter().map(ReportRecord::from));
        truth.extend(sim.truth);
        tracks.extend(generate_scenario_track(sc)?.iter().map(|p| TrackRecord::new(sc.icao, p)));
    }
    let run = SimulationRunConfig {
        rng: RNG_ALGORITHM,
        crate_version: env!("CARGO_PKG_VERSION"),
        epu_table: table.to_config_string(),
        scenarios,
    };
    Ok(vec![
        (SIM_REPORTS, jsonl_bytes(&reports)?),
        (SIM_TRACKS, jsonl_bytes(&tracks)?),
        (SIM_TRUTH, jsonl_bytes(&truth)?),
        (SIM_RUN_CONFIG, pretty_json(&run)?),
    ])
}
