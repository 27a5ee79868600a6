use std::path::PathBuf;

use adsb_latency::anomaly::AnomalyConfig;
use adsb_latency::ingest::{FilterCriteria, ParseOptions, DEFAULT_GAP_THRESHOLD};
use adsb_latency::latency::{LatencyConfig, ShiftConfig};
use adsb_latency::spline::DEFAULT_ACCEL_MARGIN;
use adsb_latency::validation::{Tolerances, ValidationConfig};
use adsb_latency::{EpuTable, UlBudget};
use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::InputError;

/// Effective settings for one command: defaults, then the `--config` file,
/// then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub reports: Option<PathBuf>,
    pub tracks: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gap_threshold: f64,
    pub max_malformed_fraction: f64,
    pub accel_margin: f64,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub scan_step: f64,
    pub bin_width: f64,
    pub speed_floor: f64,
    pub ul_budget: (f64, f64),
    pub epu_table: Option<PathBuf>,
    pub filter: FilterCriteria,
    pub anomaly: AnomalyConfig,
    pub tolerances: Tolerances,
    pub oracle_scenarios: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub verbose: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        let latency = LatencyConfig::default();
        let budget = UlBudget::default();
        let validation = ValidationConfig::default();
        Self {
            reports: None,
            tracks: None,
            scenario: None,
            out: None,
            gap_threshold: DEFAULT_GAP_THRESHOLD,
            max_malformed_fraction: ParseOptions::default().max_malformed_fraction,
            accel_margin: DEFAULT_ACCEL_MARGIN,
            bracket: latency.shift.bracket,
            tol: latency.shift.tol,
            scan_step: latency.shift.scan_step,
            bin_width: latency.bin_width,
            speed_floor: latency.speed_floor,
            ul_budget: (budget.min_ul, budget.max_ul),
            epu_table: None,
            filter: FilterCriteria::default(),
            anomaly: AnomalyConfig::default(),
            tolerances: Tolerances::default(),
            oracle_scenarios: validation.oracle_scenarios,
            seed: validation.seed,
            jobs: None,
            verbose: 0,
        }
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

/// Flags shared by every subcommand. Each one overrides the matching
/// config-file field.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON file with any subset of the run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report JSONL input.
    #[arg(long)]
    pub reports: Option<PathBuf>,
    /// Track JSONL input.
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    /// Scenario JSON (simulate only).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Seconds between track samples that starts a new track.
    #[arg(long)]
    pub gap_threshold: Option<f64>,
    #[arg(long)]
    pub max_malformed_fraction: Option<f64>,
    /// m/s² added to both ends of the reported acceleration envelope.
    #[arg(long)]
    pub accel_margin: Option<f64>,
    /// Time-shift search interval, seconds, as LO,HI.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub bracket: Option<(f64, f64)>,
    /// Time-shift search tolerance, seconds.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub scan_step: Option<f64>,
    /// Histogram bin width, seconds.
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Reports slower than this (m/s) get no along-track estimate.
    #[arg(long)]
    pub speed_floor: Option<f64>,
    /// Allowed latency range, seconds, as MIN,MAX.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub ul_budget: Option<(f64, f64)>,
    /// `nacp_N = meters` table replacing the built-in EPU bounds.
    #[arg(long)]
    pub epu_table: Option<PathBuf>,
    #[arg(long)]
    pub nacp_min: Option<u8>,
    #[arg(long)]
    pub nacp_max: Option<u8>,
    #[arg(long)]
    pub min_tracks: Option<usize>,
    /// Keep UTC-coupled aircraft during ingest.
    #[arg(long)]
    pub allow_utc_coupled: bool,
    /// Seconds from an epoch that still count as on-epoch.
    #[arg(long)]
    pub epoch_tolerance: Option<f64>,
    /// Median speed disagreement (m/s) that flags an aircraft.
    #[arg(long)]
    pub speed_threshold: Option<f64>,
    #[arg(long)]
    pub min_epoch_reports: Option<usize>,
    /// Comma-separated compliant link versions.
    #[arg(long, value_delimiter = ',')]
    pub compliant_link_versions: Option<Vec<u8>>,
    /// Run anomaly checks on every aircraft, not only UTC-coupled ones.
    #[arg(long)]
    pub all_icaos: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub oracle_scenarios: Option<usize>,
    #[arg(long)]
    pub atpe_tolerance: Option<f64>,
    #[arg(long)]
    pub mtpes_tolerance: Option<f64>,
    #[arg(long)]
    pub agreement_tolerance: Option<f64>,
    #[arg(long)]
    pub cross_track_tolerance: Option<f64>,
    #[arg(long)]
    pub oracle_tolerance: Option<f64>,
    #[arg(long)]
    pub epu_shift_tolerance: Option<f64>,
    /// Worker threads for per-track work.
    #[arg(long, short)]
    pub jobs: Option<usize>,
    #[arg(long, short, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunConfig {
    pub fn load(o: &Overrides) -> Result<Self> {
        let mut cfg = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))
                    .map_err(InputError::wrap)?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
                    .map_err(InputError::wrap)?
            }
            None => RunConfig::default(),
        };
        let path = |p: &Option<PathBuf>| p.clone().map(Some);
        set(&mut cfg.reports, path(&o.reports));
        set(&mut cfg.tracks, path(&o.tracks));
        set(&mut cfg.scenario, path(&o.scenario));
        set(&mut cfg.out, path(&o.out));
        set(&mut cfg.epu_table, path(&o.epu_table));
        set(&mut cfg.gap_threshold, o.gap_threshold);
        set(&mut cfg.max_malformed_fraction, o.max_malformed_fraction);
        set(&mut cfg.accel_margin, o.accel_margin);
        set(&mut cfg.bracket, o.bracket);
        set(&mut cfg.tol, o.tol);
        set(&mut cfg.scan_step, o.scan_step);
        set(&mut cfg.bin_width, o.bin_width);
        set(&mut cfg.speed_floor, o.speed_floor);
        set(&mut cfg.ul_budget, o.ul_budget);
        set(&mut cfg.filter.nacp_min, o.nacp_min);
        set(&mut cfg.filter.nacp_max, o.nacp_max);
        set(&mut cfg.filter.min_tracks_per_icao, o.min_tracks);
        if o.allow_utc_coupled {
            cfg.filter.require_non_utc_coupled = false;
        }
        set(&mut cfg.anomaly.epoch_tolerance, o.epoch_tolerance);
        set(&mut cfg.anomaly.speed_threshold, o.speed_threshold);
        set(&mut cfg.anomaly.min_epoch_reports, o.min_epoch_reports);
        set(&mut cfg.anomaly.compliant_link_versions, o.compliant_link_versions.clone().map(|v| v.into_iter().collect()));
        if o.all_icaos {
            cfg.anomaly.all_icaos = true;
        }
        set(&mut cfg.seed, o.seed);
        set(&mut cfg.oracle_scenarios, o.oracle_scenarios);
        let t = &mut cfg.tolerances;
        set(&mut t.atpe_mean, o.atpe_tolerance);
        set(&mut t.mtpes, o.mtpes_tolerance);
        set(&mut t.agreement, o.agreement_tolerance);
        set(&mut t.cross_track, o.cross_track_tolerance);
        set(&mut t.oracle, o.oracle_tolerance);
        set(&mut t.epu_shift, o.epu_shift_tolerance);
        if o.jobs.is_some() {
            cfg.jobs = o.jobs;
        }
        cfg.verbose = cfg.verbose.max(o.verbose);
        Ok(cfg)
    }

    pub fn epu(&self) -> Result<EpuTable> {
        match &self.epu_table {
            Some(p) => EpuTable::load(p)
                .with_context(|| format!("loading EPU table {}", p.display()))
                .map_err(InputError::wrap),
            None => Ok(EpuTable::default()),
        }
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions { max_malformed_fraction: self.max_malformed_fraction }
    }

    pub fn latency(&self) -> LatencyConfig {
        LatencyConfig {
            speed_floor: self.speed_floor,
            bin_width: self.bin_width,
            shift: ShiftConfig { bracket: self.bracket, tol: self.tol, scan_step: self.scan_step },
        }
    }

    pub fn budget(&self) -> Result<UlBudget> {
        UlBudget::new(self.ul_budget.0, self.ul_budget.1).map_err(|e| InputError::wrap(e.into()))
    }

    pub fn validation(&self) -> Result<ValidationConfig> {
        Ok(ValidationConfig {
            table: self.epu()?,
            tolerances: self.tolerances,
            latency: self.latency(),
            accel_margin: self.accel_margin,
            budget: self.budget()?,
            anomaly: self.anomaly.clone(),
            oracle_scenarios: self.oracle_scenarios,
            seed: self.seed,
            ..ValidationConfig::default()
        })
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        self.out.clone().ok_or_else(|| InputError::msg("--out is required"))
    }

    /// Enforces "input files or a scenario, never both".
    pub fn require_inputs(&self, tracks: bool) -> Result<()> {
        if self.scenario.is_some() {
            return Err(InputError::msg("--scenario cannot be combined with this command"));
        }
        if self.reports.is_none() {
            return Err(InputError::msg("--reports is required"));
        }
        if tracks && self.tracks.is_none() {
            return Err(InputError::msg("--tracks is required"));
        }
        Ok(())
    }

    pub fn require_scenario(&self) -> Result<PathBuf> {
        if self.reports.is_some() || self.tracks.is_some() {
            return Err(InputError::msg("--reports/--tracks cannot be combined with --scenario"));
        }
        self.scenario.clone().ok_or_else(|| InputError::msg("--scenario is required"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"tol": 0.002, "bin_width": 0.02, "anomaly": {"speed_threshold": 40.0}}"#).unwrap();
        let o = Overrides { config: Some(path), tol: Some(0.0005), ..Default::default() };
        let cfg = RunConfig::load(&o).unwrap();
        assert_eq!(cfg.tol, 0.0005);
        assert_eq!(cfg.bin_width, 0.02);
        assert_eq!(cfg.anomaly.speed_threshold, 40.0);
        assert_eq!(cfg.anomaly.epoch_tolerance, 0.001);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"tolerance": 1}"#).unwrap();
        let o = Overrides { config: Some(path), ..Default::default() };
        assert!(RunConfig::load(&o).is_err());
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("-1,1"), Ok((-1.0, 1.0)));
        assert!(parse_pair("1").is_err());
    }
}
