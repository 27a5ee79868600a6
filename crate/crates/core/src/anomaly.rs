//! Detectors for timing anomalies in UTC-coupled report streams.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{AdsbReport, Icao};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    EpochQuantization,
    SpeedMismatch,
    LinkNoncompliance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    Epoch {
        on_epoch_fraction: f64,
        max_residual_s: f64,
        /// Distance of each TOA from the nearest epoch, seconds.
        residuals_s: Vec<f64>,
    },
    Speed {
        median_offset_mps: f64,
        max_offset_mps: f64,
        mean_calculated_mps: f64,
        mean_reported_mps: f64,
        n_pairs: usize,
    },
    LinkVersions {
        histogram: BTreeMap<u8, usize>,
    },
    InsufficientData {
        required: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyFinding {
    pub icao: Icao,
    pub kind: AnomalyKind,
    pub triggered: bool,
    pub evidence: Evidence,
    pub n_reports: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyConfig {
    /// Max distance from an epoch that still counts as on-epoch, seconds.
    pub epoch_tolerance: f64,
    pub epoch_spacing: f64,
    pub min_epoch_reports: usize,
    /// Median |calculated − reported| speed that triggers, m/s.
    pub speed_threshold: f64,
    pub compliant_link_versions: BTreeSet<u8>,
    /// Check every aircraft, not only UTC-coupled ones.
    pub all_icaos: bool,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            epoch_tolerance: 0.001,
            epoch_spacing: 0.2,
            min_epoch_reports: 10,
            speed_threshold: 50.0,
            compliant_link_versions: BTreeSet::from([2]),
            all_icaos: false,
        }
    }
}

/// Distance from `toa` to the nearest multiple of `spacing`, seconds.
///
/// Computed in epoch units so that TOAs stamped as `n / epochs_per_second`
/// come out at exactly zero.
pub fn epoch_residual(toa: f64, spacing: f64) -> f64 {
    let per_second = spacing.recip();
    let e = toa * per_second;
    (e - e.round()).abs() / per_second
}

/// Fractional second of each TOA, for plotting.
pub fn toa_fractions(reports: &[AdsbReport]) -> Vec<(f64, f64)> {
    reports.iter().map(|r| (r.toa, r.toa - r.toa.floor())).collect()
}

fn sorted_by_toa(reports: &[AdsbReport]) -> Vec<&AdsbReport> {
    let mut v: Vec<&AdsbReport> = reports.iter().collect();
    v.sort_by(|a, b| a.toa.total_cmp(&b.toa));
    v
}

fn icao_of(reports: &[AdsbReport]) -> Icao {
    reports.first().map(|r| r.icao).unwrap_or_else(|| Icao::new(0).expect("zero fits"))
}

pub fn check_epoch_quantization(reports: &[AdsbReport], tolerance: f64, spacing: f64, min_reports: usize) -> AnomalyFinding {
    let icao = icao_of(reports);
    let n = reports.len();
    if n < min_reports.max(1) {
        return AnomalyFinding {
            icao,
            kind: AnomalyKind::EpochQuantization,
            triggered: false,
            evidence: Evidence::InsufficientData { required: min_reports.max(1), available: n },
            n_reports: n,
        };
    }
    let residuals: Vec<f64> = sorted_by_toa(reports).iter().map(|r| epoch_residual(r.toa, spacing)).collect();
    let on = residuals.iter().filter(|r| **r <= tolerance).count();
    AnomalyFinding {
        icao,
        kind: AnomalyKind::EpochQuantization,
        triggered: on == n,
        evidence: Evidence::Epoch {
            on_epoch_fraction: on as f64 / n as f64,
            max_residual_s: residuals.iter().copied().fold(0.0, f64::max),
            residuals_s: residuals,
        },
        n_reports: n,
    }
}

/// Inter-report speed next to the reported one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    /// TOA of the later report of the pair.
    pub toa: f64,
    pub calculated_mps: f64,
    /// Mean reported speed of the two reports.
    pub reported_mps: f64,
}

/// Speed implied by consecutive positions and TOAs. Pairs with equal TOAs
/// are skipped.
pub fn speed_series(reports: &[AdsbReport]) -> Vec<SpeedSample> {
    sorted_by_toa(reports)
        .windows(2)
        .filter_map(|w| {
            let dt = w[1].toa - w[0].toa;
            (dt > 0.0).then(|| SpeedSample {
                toa: w[1].toa,
                calculated_mps: (w[1].pos - w[0].pos).norm() / dt,
                reported_mps: 0.5 * (w[0].speed() + w[1].speed()),
            })
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

pub fn check_speed_consistency(reports: &[AdsbReport], threshold: f64) -> AnomalyFinding {
    let icao = icao_of(reports);
    let n = reports.len();
    let series = speed_series(reports);
    if series.is_empty() {
        return AnomalyFinding {
            icao,
            kind: AnomalyKind::SpeedMismatch,
            triggered: false,
            evidence: Evidence::InsufficientData { required: 2, available: n.min(1) },
            n_reports: n,
        };
    }
    let offsets: Vec<f64> = series.iter().map(|s| (s.calculated_mps - s.reported_mps).abs()).collect();
    let k = series.len() as f64;
    let median_offset = median(offsets.clone());
    AnomalyFinding {
        icao,
        kind: AnomalyKind::SpeedMismatch,
        triggered: median_offset > threshold,
        evidence: Evidence::Speed {
            median_offset_mps: median_offset,
            max_offset_mps: offsets.iter().copied().fold(0.0, f64::max),
            mean_calculated_mps: series.iter().map(|s| s.calculated_mps).sum::<f64>() / k,
            mean_reported_mps: series.iter().map(|s| s.reported_mps).sum::<f64>() / k,
            n_pairs: series.len(),
        },
        n_reports: n,
    }
}

pub fn check_link_version(reports: &[AdsbReport], compliant: &BTreeSet<u8>) -> AnomalyFinding {
    let mut histogram = BTreeMap::new();
    for r in reports {
        *histogram.entry(r.link_version).or_insert(0usize) += 1;
    }
    AnomalyFinding {
        icao: icao_of(reports),
        kind: AnomalyKind::LinkNoncompliance,
        triggered: histogram.keys().any(|v| !compliant.contains(v)),
        evidence: Evidence::LinkVersions { histogram },
        n_reports: reports.len(),
    }
}

/// Runs all three detectors for each UTC-coupled aircraft (or every
/// aircraft when `all_icaos` is set).
pub fn run_anomaly_suite(reports: &BTreeMap<Icao, Vec<AdsbReport>>, cfg: &AnomalyConfig) -> Vec<AnomalyFinding> {
    let mut out = Vec::new();
    for rs in reports.values() {
        if rs.is_empty() || !(cfg.all_icaos || rs.iter().any(|r| r.utc_coupled)) {
            continue;
        }
        out.push(check_epoch_quantization(rs, cfg.epoch_tolerance, cfg.epoch_spacing, cfg.min_epoch_reports));
        out.push(check_speed_consistency(rs, cfg.speed_threshold));
        out.push(check_link_version(rs, &cfg.compliant_link_versions));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Vec2;

    fn rep(toa: f64, x: f64, speed: f64, version: u8) -> AdsbReport {
        AdsbReport {
            icao: "A637E1".parse().unwrap(),
            toa,
            pos: Vec2::new(x, 0.0),
            vel: Vec2::new(speed, 0.0),
            nacp: 9,
            utc_coupled: true,
            link_version: version,
            link: None,
            source_tag: String::new(),
        }
    }

    #[test]
    fn epoch_examples() {
        let on: Vec<AdsbReport> = (0..20).map(|k| rep(46800.0 + k as f64 / 5.0, 0.0, 100.0, 1)).collect();
        let f = check_epoch_quantization(&on, 0.001, 0.2, 10);
        assert!(f.triggered);
        let f0 = check_epoch_quantization(&on, 0.0, 0.2, 10);
        assert!(f0.triggered);

        let mut off = on.clone();
        off[7].toa = 46801.40625;
        assert!(!check_epoch_quantization(&off, 0.001, 0.2, 10).triggered);

        let few = &on[..3];
        let f = check_epoch_quantization(few, 0.001, 0.2, 10);
        assert!(!f.triggered);
        assert!(matches!(f.evidence, Evidence::InsufficientData { .. }));
    }

    #[test]
    fn epoch_shift_by_whole_seconds_is_invariant() {
        let reports: Vec<AdsbReport> = (0..15).map(|k| rep(100.0 + k as f64 * 0.4, 0.0, 100.0, 2)).collect();
        let shifted: Vec<AdsbReport> = reports.iter().map(|r| AdsbReport { toa: r.toa + 3600.0, ..r.clone() }).collect();
        let a = check_epoch_quantization(&reports, 0.001, 0.2, 10);
        let b = check_epoch_quantization(&shifted, 0.001, 0.2, 10);
        assert_eq!(a.triggered, b.triggered);
    }

    #[test]
    fn speed_examples() {
        let ok: Vec<AdsbReport> = (0..10).map(|k| rep(k as f64, 100.0 * k as f64, 100.0, 2)).collect();
        let f = check_speed_consistency(&ok, 50.0);
        assert!(!f.triggered);
        match f.evidence {
            Evidence::Speed { median_offset_mps, .. } => assert!(median_offset_mps.abs() < 1e-9),
            _ => panic!("wrong evidence"),
        }
        let fast: Vec<AdsbReport> = (0..10).map(|k| rep(k as f64, 100.0 * k as f64, 250.0, 2)).collect();
        let f = check_speed_consistency(&fast, 50.0);
        assert!(f.triggered);
        match f.evidence {
            Evidence::Speed { median_offset_mps, .. } => assert!((median_offset_mps - 150.0).abs() < 1e-9),
            _ => panic!("wrong evidence"),
        }
        let same: Vec<AdsbReport> = (0..3).map(|_| rep(5.0, 0.0, 100.0, 2)).collect();
        assert!(matches!(check_speed_consistency(&same, 50.0).evidence, Evidence::InsufficientData { .. }));
    }

    #[test]
    fn link_examples() {
        let compliant = BTreeSet::from([2]);
        let v2: Vec<AdsbReport> = (0..4).map(|k| rep(k as f64, 0.0, 100.0, 2)).collect();
        assert!(!check_link_version(&v2, &compliant).triggered);
        let v1: Vec<AdsbReport> = (0..4).map(|k| rep(k as f64, 0.0, 100.0, 1)).collect();
        assert!(check_link_version(&v1, &compliant).triggered);
        let mixed: Vec<AdsbReport> = v1.iter().chain(&v2).cloned().collect();
        let f = check_link_version(&mixed, &compliant);
        assert!(f.triggered);
        match f.evidence {
            Evidence::LinkVersions { histogram } => assert_eq!(histogram, BTreeMap::from([(1, 4), (2, 4)])),
            _ => panic!("wrong evidence"),
        }
    }

    #[test]
    fn suite_only_visits_utc_coupled() {
        let utc: Vec<AdsbReport> = (0..12).map(|k| rep(k as f64 * 0.2, 20.0 * k as f64, 100.0, 1)).collect();
        let mut non = utc.clone();
        for r in &mut non {
            r.icao = "000001".parse().unwrap();
            r.utc_coupled = false;
        }
        let mut grouped = BTreeMap::new();
        grouped.insert(non[0].icao, non);
        assert!(run_anomaly_suite(&grouped, &AnomalyConfig::default()).is_empty());
        grouped.insert(utc[0].icao, utc);
        let findings = run_anomaly_suite(&grouped, &AnomalyConfig::default());
        assert_eq!(findings.len(), 3);
        let all = run_anomaly_suite(&grouped, &AnomalyConfig { all_icaos: true, ..Default::default() });
        assert_eq!(all.len(), 6);
    }
}
