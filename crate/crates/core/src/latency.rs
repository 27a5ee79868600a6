//! Latency estimators.
//!
//! * Along-track position error (ATPE): one latency per report, the signed
//!   along-track component of `P(t_R) − P*` divided by the reported speed.
//! * Minimum total position-error squares (MTPES): one time shift per track,
//!   `argmin_ΔT Σ ‖P(t_Rn − ΔT) − P*_n‖²`.
//! * EPU-constrained variant of MTPES: the shift must leave at least 95% of
//!   the residuals inside each report's EPU radius.
//!
//! Sign convention: a reported position that lags the aircraft (it was
//! valid before its timestamp) gives a positive latency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdsbReport, EpuTable, Icao, Track, UlBudget, UlClass};
use crate::optimize::scan_then_golden;
use crate::scalar::{along_cross_split, Scalar, Vec2};
use crate::spline::{fit_pseudo_truth, schedule_for_track, FitDiagnostics, PseudoTruthTrack};

/// Reports slower than this are excluded from ATPE, m/s.
pub const DEFAULT_SPEED_FLOOR: f64 = 30.0;
pub const DEFAULT_BIN_WIDTH: f64 = 0.010;
pub const DEFAULT_BRACKET: (f64, f64) = (-1.0, 1.0);
pub const DEFAULT_TOL: f64 = 0.001;
pub const DEFAULT_SCAN_STEP: f64 = 0.010;
/// Fraction of residuals that must fall inside the EPU radius.
pub const EPU_CONTAINMENT: f64 = 0.95;
/// Fewest reports MTPES will fit a shift to.
pub const MIN_SHIFT_REPORTS: usize = 4;

/// Signed along-track error `(P_ref − P*)·v̂` and the latency it implies,
/// `e_AT / |v|`. `None` for a zero velocity.
pub fn along_track_latency<T: Scalar>(reference: Vec2<T>, reported: Vec2<T>, velocity: Vec2<T>) -> Option<(T, T)> {
    let (e_at, _) = along_cross_split(reference - reported, velocity)?;
    Some((e_at, e_at / velocity.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    OutsidePseudoTruth,
    SpeedTooLow,
}

impl Exclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Exclusion::OutsidePseudoTruth => "outside_pseudo_truth",
            Exclusion::SpeedTooLow => "speed_too_low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyEstimate {
    pub icao: Icao,
    pub track_index: usize,
    pub toa: f64,
    pub ul: Option<f64>,
    pub along_track_error: Option<f64>,
    pub speed_used: f64,
    pub excluded: Option<Exclusion>,
}

/// ATPE for one report.
pub fn atpe_single(report: &AdsbReport, ptt: &PseudoTruthTrack, speed_floor: f64) -> LatencyEstimate {
    let speed = report.speed();
    let mut est = LatencyEstimate {
        icao: report.icao,
        track_index: ptt.track_index,
        toa: report.toa,
        ul: None,
        along_track_error: None,
        speed_used: speed,
        excluded: None,
    };
    let Ok(reference) = ptt.position(report.toa) else {
        est.excluded = Some(Exclusion::OutsidePseudoTruth);
        return est;
    };
    if !(speed >= speed_floor) || speed == 0.0 {
        est.excluded = Some(Exclusion::SpeedTooLow);
        return est;
    }
    if let Some((e_at, ul)) = along_track_latency(reference, report.pos, report.vel) {
        est.along_track_error = Some(e_at);
        est.ul = Some(ul);
    }
    est
}

/// Histogram with fixed-width bins aligned so that 0 is a bin edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `counts.len() + 1` edges, seconds.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::InvalidInput(format!("bin width {bin_width} must be positive")));
        }
        if values.is_empty() {
            return Ok(Self { bin_width, edges: vec![0.0], counts: Vec::new() });
        }
        let bin = |v: f64| (v / bin_width).floor() as i64;
        let lo = values.iter().map(|v| bin(*v)).min().unwrap_or(0);
        let hi = values.iter().map(|v| bin(*v)).max().unwrap_or(0);
        let mut counts = vec![0usize; (hi - lo + 1) as usize];
        for v in values {
            counts[(bin(*v) - lo) as usize] += 1;
        }
        let edges = (lo..=hi + 1).map(|k| k as f64 * bin_width).collect();
        Ok(Self { bin_width, edges, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtpeStats {
    pub n_used: usize,
    pub n_excluded: usize,
    pub mean_ul: f64,
    pub std_ul: f64,
    pub histogram: Histogram,
}

/// ATPE over every report of a track, with distribution statistics over the
/// estimates that were not excluded.
pub fn atpe_track(
    reports: &[AdsbReport],
    ptt: &PseudoTruthTrack,
    speed_floor: f64,
    bin_width: f64,
) -> Result<(Vec<LatencyEstimate>, AtpeStats)> {
    let estimates: Vec<LatencyEstimate> = reports.iter().map(|r| atpe_single(r, ptt, speed_floor)).collect();
    let used: Vec<f64> = estimates.iter().filter_map(|e| e.ul).collect();
    let (mean_ul, std_ul) = mean_std(&used).ok_or(Error::EmptyTrack)?;
    let histogram = Histogram::build(&used, bin_width)?;
    let stats = AtpeStats {
        n_used: used.len(),
        n_excluded: estimates.len() - used.len(),
        mean_ul,
        std_ul,
        histogram,
    };
    Ok((estimates, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    /// Search interval for the time shift, seconds.
    pub bracket: (f64, f64),
    pub tol: f64,
    /// Spacing of the coarse scan that precedes golden-section refinement.
    pub scan_step: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self { bracket: DEFAULT_BRACKET, tol: DEFAULT_TOL, scan_step: DEFAULT_SCAN_STEP }
    }
}

impl ShiftConfig {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bracket;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("bad shift bracket [{lo}, {hi}]")));
        }
        if !(self.tol > 0.0 && self.scan_step > 0.0) {
            return Err(Error::InvalidInput("tolerance and scan step must be positive".into()));
        }
        Ok(())
    }
}

/// Reports whose shifted time `t_R − ΔT` stays inside the pseudo-truth for
/// every ΔT in the bracket.
pub fn shiftable_reports<'a>(reports: &'a [AdsbReport], ptt: &PseudoTruthTrack, bracket: (f64, f64)) -> Vec<&'a AdsbReport> {
    let (start, end) = ptt.domain();
    reports
        .iter()
        .filter(|r| r.toa - bracket.1 >= start && r.toa - bracket.0 <= end)
        .collect()
}

/// `Σ ‖P(t_Rn − ΔT) − P*_n‖²` over the given reports.
pub fn shift_objective(reports: &[&AdsbReport], ptt: &PseudoTruthTrack, shift: f64) -> f64 {
    reports
        .iter()
        .map(|r| match ptt.position(r.toa - shift) {
            Ok(p) => (p - r.pos).norm_squared(),
            Err(_) => f64::INFINITY,
        })
        .sum()
}

fn usable_for_shift<'a>(reports: &'a [AdsbReport], ptt: &PseudoTruthTrack, cfg: &ShiftConfig) -> Result<Vec<&'a AdsbReport>> {
    cfg.validate()?;
    let used = shiftable_reports(reports, ptt, cfg.bracket);
    if used.is_empty() {
        return Err(Error::EmptyTrack);
    }
    if used.len() < MIN_SHIFT_REPORTS {
        return Err(Error::InsufficientData { required: MIN_SHIFT_REPORTS, available: used.len() });
    }
    Ok(used)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtpesResult {
    pub ul: f64,
    /// Objective at the minimizer, m².
    pub residual: f64,
    pub n_used: usize,
}

/// Single track-level latency minimizing the total squared position error.
pub fn mtpes(reports: &[AdsbReport], ptt: &PseudoTruthTrack, cfg: &ShiftConfig) -> Result<MtpesResult> {
    let used = usable_for_shift(reports, ptt, cfg)?;
    let (lo, hi) = cfg.bracket;
    let min = scan_then_golden(|dt| shift_objective(&used, ptt, dt), lo, hi, cfg.scan_step, cfg.tol)?;
    Ok(MtpesResult { ul: min.x, residual: min.value, n_used: used.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EpuVariant {
    Feasible { ul: f64, contained_fraction: f64 },
    Infeasible { best_fraction: f64 },
}

impl EpuVariant {
    pub fn ul(&self) -> Option<f64> {
        match self {
            EpuVariant::Feasible { ul, .. } => Some(*ul),
            EpuVariant::Infeasible { .. } => None,
        }
    }
}

/// Fraction of reports whose residual at `shift` lies inside their EPU.
pub fn epu_contained_fraction(reports: &[&AdsbReport], ptt: &PseudoTruthTrack, table: &EpuTable, shift: f64) -> Result<f64> {
    let mut inside = 0usize;
    for r in reports {
        let epu = table.lookup(r.nacp as i64)?;
        let err = match ptt.position(r.toa - shift) {
            Ok(p) => (p - r.pos).norm(),
            Err(_) => f64::INFINITY,
        };
        if epu.contains(err) {
            inside += 1;
        }
    }
    Ok(inside as f64 / reports.len() as f64)
}

/// MTPES restricted to shifts that keep at least 95% of residuals inside
/// the reported EPU. Feasibility is scanned at `tol` spacing across the
/// bracket.
pub fn epu_constrained_latency(
    reports: &[AdsbReport],
    ptt: &PseudoTruthTrack,
    table: &EpuTable,
    cfg: &ShiftConfig,
) -> Result<EpuVariant> {
    let used = usable_for_shift(reports, ptt, cfg)?;
    let free = mtpes(reports, ptt, cfg)?;
    let frac = epu_contained_fraction(&used, ptt, table, free.ul)?;
    if frac >= EPU_CONTAINMENT {
        return Ok(EpuVariant::Feasible { ul: free.ul, contained_fraction: frac });
    }
    let (lo, hi) = cfg.bracket;
    let steps = ((hi - lo) / cfg.tol).round() as usize;
    let mut best: Option<(f64, f64, f64)> = None;
    let mut best_fraction = frac;
    for k in 0..=steps {
        let dt = (lo + k as f64 * cfg.tol).min(hi);
        let f = epu_contained_fraction(&used, ptt, table, dt)?;
        best_fraction = best_fraction.max(f);
        if f >= EPU_CONTAINMENT {
            let obj = shift_objective(&used, ptt, dt);
            if best.is_none_or(|b| obj < b.1) {
                best = Some((dt, obj, f));
            }
        }
    }
    Ok(match best {
        Some((ul, _, contained_fraction)) => EpuVariant::Feasible { ul, contained_fraction },
        None => EpuVariant::Infeasible { best_fraction },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyConfig {
    pub speed_floor: f64,
    pub bin_width: f64,
    pub shift: ShiftConfig,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self { speed_floor: DEFAULT_SPEED_FLOOR, bin_width: DEFAULT_BIN_WIDTH, shift: ShiftConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLatencySummary {
    pub icao: Icao,
    pub track_index: usize,
    pub n_used: usize,
    pub n_excluded: usize,
    pub mean_ul: f64,
    pub std_ul: f64,
    pub histogram: Histogram,
    pub mtpes_ul: f64,
    pub mtpes_residual: f64,
    pub epu_variant: EpuVariant,
    pub fit: FitDiagnostics,
}

/// Runs all three estimators on one track.
pub fn summarize_track(
    reports: &[AdsbReport],
    ptt: &PseudoTruthTrack,
    table: &EpuTable,
    cfg: &LatencyConfig,
) -> Result<(Vec<LatencyEstimate>, TrackLatencySummary)> {
    let (estimates, stats) = atpe_track(reports, ptt, cfg.speed_floor, cfg.bin_width)?;
    let shift = mtpes(reports, ptt, &cfg.shift)?;
    let epu_variant = epu_constrained_latency(reports, ptt, table, &cfg.shift)?;
    let summary = TrackLatencySummary {
        icao: ptt.icao,
        track_index: ptt.track_index,
        n_used: stats.n_used,
        n_excluded: stats.n_excluded,
        mean_ul: stats.mean_ul,
        std_ul: stats.std_ul,
        histogram: stats.histogram,
        mtpes_ul: shift.ul,
        mtpes_residual: shift.residual,
        epu_variant,
        fit: ptt.diagnostics.clone(),
    };
    Ok((estimates, summary))
}

/// Full per-track pipeline: pseudo-truth fit, then all three estimators over
/// the reports inside the track span.
pub fn analyze_track(
    track: &Track,
    reports: &[AdsbReport],
    table: &EpuTable,
    cfg: &LatencyConfig,
    accel_margin: f64,
) -> Result<(PseudoTruthTrack, Vec<LatencyEstimate>, TrackLatencySummary)> {
    let inside: Vec<AdsbReport> = reports.iter().filter(|r| track.contains_time(r.toa)).cloned().collect();
    if inside.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let schedule = schedule_for_track(track, &inside, table)?;
    let ptt = fit_pseudo_truth(track, &inside, &schedule, accel_margin)?;
    let (estimates, summary) = summarize_track(&inside, &ptt, table, cfg)?;
    Ok((ptt, estimates, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetEntry {
    /// Position in the fleet-wide plot order.
    pub seq: usize,
    pub track_index: usize,
    pub mean_ul: f64,
    pub std_ul: f64,
    pub mtpes_ul: f64,
    pub class: UlClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftGroup {
    pub icao: Icao,
    pub tracks: Vec<FleetEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FleetReport {
    pub aircraft: Vec<AircraftGroup>,
    pub n_tracks: usize,
    pub mean_of_means: Option<f64>,
    pub std_of_means: Option<f64>,
    pub max_abs_mtpes_atpe_gap: Option<f64>,
    pub class_counts: BTreeMap<UlClass, usize>,
}

/// Groups per-track results by aircraft (first-appearance order, track
/// order kept) and classifies each track mean against the budget.
pub fn aggregate_fleet(summaries: &[TrackLatencySummary], budget: &UlBudget) -> Result<FleetReport> {
    let mut report = FleetReport::default();
    let mut order: Vec<Icao> = Vec::new();
    let mut groups: BTreeMap<Icao, Vec<&TrackLatencySummary>> = BTreeMap::new();
    for s in summaries {
        if !groups.contains_key(&s.icao) {
            order.push(s.icao);
        }
        groups.entry(s.icao).or_default().push(s);
    }
    let mut seq = 0;
    for icao in order {
        let tracks = groups[&icao]
            .iter()
            .map(|s| {
                let class = budget.classify(s.mean_ul)?;
                *report.class_counts.entry(class).or_default() += 1;
                let e = FleetEntry {
                    seq,
                    track_index: s.track_index,
                    mean_ul: s.mean_ul,
                    std_ul: s.std_ul,
                    mtpes_ul: s.mtpes_ul,
                    class,
                };
                seq += 1;
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        report.aircraft.push(AircraftGroup { icao, tracks });
    }
    report.n_tracks = summaries.len();
    let means: Vec<f64> = summaries.iter().map(|s| s.mean_ul).collect();
    if let Some((m, sd)) = mean_std(&means) {
        report.mean_of_means = Some(m);
        report.std_of_means = Some(sd);
    }
    report.max_abs_mtpes_atpe_gap = summaries
        .iter()
        .map(|s| (s.mtpes_ul - s.mean_ul).abs())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(report)
}
