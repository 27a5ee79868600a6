//! Synthetic trajectories and ADS-B report streams with known injected
//! latency.
//!
//! Timing model per report, with `t_R` the broadcast time on the report-rate
//! grid: draw a latency `ul`, set the true time of applicability
//! `t* = t_R − ul`, report the truth at `t*` plus position noise, and stamp
//! the report with `t_R` rounded to 1/128 s (non-UTC-coupled) or to the
//! nearest 200 ms epoch (UTC-coupled).
//!
//! Position/TOA desynchronization is injected as alternating jitter: report
//! `k` takes its position at `t* − (−1)^k·d`. A constant offset would shift
//! every position equally and stay invisible to inter-report speed checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdsbReport, EpuTable, Icao, TrackPoint, MAX_NACP};
use crate::scalar::Vec2;

/// Documented random source, written alongside simulation outputs.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9); stream 0 = reports, stream 1 = tracker points";

const REPORT_STREAM: u64 = 0;
const TRACKER_STREAM: u64 = 1;

/// 1/128 s ground-station rounding for non-UTC-coupled reports.
pub const NON_UTC_TICKS_PER_SECOND: f64 = 128.0;
/// 200 ms epochs for UTC-coupled reports.
pub const UTC_EPOCHS_PER_SECOND: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Straight,
    CoordinatedTurn,
    Piecewise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    /// rad/s, positive counter-clockwise.
    pub turn_rate: f64,
}

fn default_rate() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryProfile {
    pub kind: ProfileKind,
    /// Meters, local tangent plane.
    pub initial_position: [f64; 2],
    /// m/s.
    pub speed: f64,
    /// Radians from +x, counter-clockwise.
    pub heading: f64,
    #[serde(default)]
    pub turn_rate: f64,
    /// Seconds.
    pub duration: f64,
    /// Hz.
    #[serde(default = "default_rate")]
    pub report_rate: f64,
    /// Only for `piecewise`; the last segment continues past its duration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<Segment>,
}

impl TrajectoryProfile {
    pub fn straight(initial: Vec2<f64>, speed: f64, heading: f64, duration: f64) -> Self {
        Self {
            kind: ProfileKind::Straight,
            initial_position: [initial.x, initial.y],
            speed,
            heading,
            turn_rate: 0.0,
            duration,
            report_rate: default_rate(),
            segments: Vec::new(),
        }
    }

    pub fn coordinated_turn(initial: Vec2<f64>, speed: f64, heading: f64, turn_rate: f64, duration: f64) -> Self {
        Self { kind: ProfileKind::CoordinatedTurn, turn_rate, ..Self::straight(initial, speed, heading, duration) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::InvalidInput(format!("speed {} must be positive", self.speed)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidInput(format!("duration {} must be positive", self.duration)));
        }
        if !(self.report_rate > 0.0 && self.report_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("report rate {} must be positive", self.report_rate)));
        }
        if self.kind == ProfileKind::Piecewise && self.segments.is_empty() {
            return Err(Error::InvalidInput("piecewise profile needs at least one segment".into()));
        }
        if self.segments.iter().any(|s| !(s.duration > 0.0) || !s.turn_rate.is_finite()) {
            return Err(Error::InvalidInput("segment durations must be positive".into()));
        }
        Ok(())
    }

    fn segment_list(&self) -> Vec<Segment> {
        match self.kind {
            ProfileKind::Straight => vec![Segment { duration: self.duration, turn_rate: 0.0 }],
            ProfileKind::CoordinatedTurn => vec![Segment { duration: self.duration, turn_rate: self.turn_rate }],
            ProfileKind::Piecewise => self.segments.clone(),
        }
    }

    fn start_state(&self) -> ArcState {
        ArcState {
            pos: Vec2::new(self.initial_position[0], self.initial_position[1]),
            heading: self.heading,
        }
    }

    /// Truth state at any `t`, extrapolating the first/last segment outside
    /// `[0, duration]`.
    pub fn state_unchecked(&self, t: f64) -> KinematicState {
        let segments = self.segment_list();
        let mut state = self.start_state();
        let mut t0 = 0.0;
        for (i, seg) in segments.iter().enumerate() {
            let last = i + 1 == segments.len();
            if t < t0 + seg.duration || last || t < t0 {
                return state.advance(self.speed, seg.turn_rate, t - t0);
            }
            state = state.advance(self.speed, seg.turn_rate, seg.duration).arc();
            t0 += seg.duration;
        }
        unreachable!("segment list is never empty")
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::OutOfDomain { t, start: 0.0, end: self.duration });
        }
        Ok(())
    }

    pub fn state(&self, t: f64) -> Result<KinematicState> {
        self.check_domain(t)?;
        Ok(self.state_unchecked(t))
    }

    /// Number of grid samples `0, 1/rate, …` that fit in `[0, duration]`.
    fn grid_len(&self, rate: f64) -> usize {
        (self.duration * rate + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy)]
struct ArcState {
    pos: Vec2<f64>,
    heading: f64,
}

/// Position, velocity and acceleration of the truth trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub pos: Vec2<f64>,
    pub vel: Vec2<f64>,
    pub acc: Vec2<f64>,
    pub heading: f64,
}

impl KinematicState {
    fn arc(self) -> ArcState {
        ArcState { pos: self.pos, heading: self.heading }
    }
}

impl ArcState {
    /// Constant-speed arc: heading turns at `rate`; a zero rate is a line.
    fn advance(self, speed: f64, rate: f64, dt: f64) -> KinematicState {
        let half = 0.5 * rate * dt;
        // 2·sin(ωτ/2)/ω, the chord length per unit speed.
        let chord = if half == 0.0 { dt } else { 2.0 * half.sin() / rate };
        let mid = self.heading + half;
        let heading = self.heading + rate * dt;
        let (sh, ch) = heading.sin_cos();
        KinematicState {
            pos: self.pos + Vec2::new(mid.cos(), mid.sin()).scale(speed * chord),
            vel: Vec2::new(ch, sh).scale(speed),
            acc: Vec2::new(-sh, ch).scale(speed * rate),
            heading,
        }
    }
}

/// Truth position at `t` seconds into the profile.
pub fn truth_position(profile: &TrajectoryProfile, t: f64) -> Result<Vec2<f64>> {
    Ok(profile.state(t)?.pos)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UlModel {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Cycled when shorter than the report count.
    PerReportList { values: Vec<f64> },
}

impl UlModel {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            UlModel::Constant { value } => value.is_finite(),
            UlModel::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            UlModel::PerReportList { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
        };
        if ok { Ok(()) } else { Err(Error::InvalidInput(format!("bad latency model {self:?}"))) }
    }

    fn draw<R: Rng>(&self, k: usize, rng: &mut R) -> f64 {
        match self {
            UlModel::Constant { value } => *value,
            UlModel::Uniform { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..*hi)
                }
            }
            UlModel::PerReportList { values } => values[k % values.len()],
        }
    }
}

fn default_true() -> bool {
    true
}
fn default_link_version() -> u8 {
    2
}
fn default_icao() -> Icao {
    Icao::new(0xA0_0001).expect("fits 24 bits")
}

/// Tracker stand-in: truth sampled at `rate` Hz with isotropic noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub sigma: f64,
    pub rate: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { sigma: 20.0, rate: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    #[serde(default = "default_icao")]
    pub icao: Icao,
    /// UTC seconds-of-day of profile time 0.
    #[serde(default)]
    pub start_time: f64,
    pub profile: TrajectoryProfile,
    pub ul_model: UlModel,
    pub nacp: u8,
    #[serde(default)]
    pub utc_coupled: bool,
    /// Amplitude of the alternating position/TOA mismatch, seconds.
    #[serde(default)]
    pub desync_offset: f64,
    #[serde(default = "default_link_version")]
    pub link_version: u8,
    pub seed: u64,
    /// Position noise on/off.
    #[serde(default = "default_true")]
    pub noise: bool,
    /// Per-axis position sigma override, meters. Defaults to EPU(nacp)/2.45.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    /// Per-axis reported-velocity sigma, m/s.
    #[serde(default)]
    pub velocity_sigma: f64,
    #[serde(default)]
    pub tracker: TrackerConfig,
}

impl SyntheticScenario {
    pub fn new(profile: TrajectoryProfile, ul_model: UlModel, nacp: u8, seed: u64) -> Self {
        Self {
            icao: default_icao(),
            start_time: 0.0,
            profile,
            ul_model,
            nacp,
            utc_coupled: false,
            desync_offset: 0.0,
            link_version: default_link_version(),
            seed,
            noise: true,
            noise_sigma: None,
            velocity_sigma: 0.0,
            tracker: TrackerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.ul_model.validate()?;
        if self.nacp > MAX_NACP {
            return Err(Error::InvalidNacp(self.nacp as i64));
        }
        if !(self.start_time.is_finite() && self.start_time >= 0.0) {
            return Err(Error::InvalidInput("start_time must be finite and >= 0".into()));
        }
        if !self.desync_offset.is_finite() || !(self.velocity_sigma >= 0.0) {
            return Err(Error::InvalidInput("bad desync offset or velocity sigma".into()));
        }
        if let Some(s) = self.noise_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidInput(format!("noise sigma {s} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Per-axis position noise sigma in effect, meters.
    pub fn position_sigma(&self, table: &EpuTable) -> Result<f64> {
        if !self.noise {
            return Ok(0.0);
        }
        if let Some(s) = self.noise_sigma {
            return Ok(s);
        }
        table
            .sigma(self.nacp as i64)?
            .ok_or_else(|| Error::InvalidInput(format!("NACp {} has no EPU bound; set noise_sigma", self.nacp)))
    }

    /// Ground-station TOA stamp for an absolute broadcast time.
    pub fn stamp(&self, t_abs: f64) -> f64 {
        let ticks = if self.utc_coupled { UTC_EPOCHS_PER_SECOND } else { NON_UTC_TICKS_PER_SECOND };
        (t_abs * ticks).round() / ticks
    }
}

/// What actually happened behind one synthetic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub icao: Icao,
    pub toa_s: f64,
    pub ul_s: f64,
    pub t_star_s: f64,
    /// Unrounded broadcast time.
    pub t_r_s: f64,
    pub true_x_m: f64,
    pub true_y_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticReports {
    pub reports: Vec<AdsbReport>,
    pub truth: Vec<GroundTruth>,
}

fn gaussian(sigma: f64) -> Result<Option<Normal<f64>>> {
    if sigma == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, sigma).map(Some).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn jitter<R: Rng>(n: &Option<Normal<f64>>, rng: &mut R) -> Vec2<f64> {
    match n {
        Some(n) => Vec2::new(n.sample(rng), n.sample(rng)),
        None => Vec2::default(),
    }
}

/// Generates the report stream and its per-report ground truth.
pub fn generate_reports(scenario: &SyntheticScenario, table: &EpuTable) -> Result<SyntheticReports> {
    scenario.validate()?;
    let profile = &scenario.profile;
    let pos_noise = gaussian(scenario.position_sigma(table)?)?;
    let vel_noise = gaussian(scenario.velocity_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(REPORT_STREAM);

    let n = profile.grid_len(profile.report_rate);
    let mut reports = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for k in 0..n {
        let t_r = k as f64 / profile.report_rate;
        let ul = scenario.ul_model.draw(k, &mut rng);
        let t_star = t_r - ul;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let t_pos = t_star - sign * scenario.desync_offset;
        let true_state = profile.state_unchecked(t_star);
        let state = profile.state_unchecked(t_pos);
        let pos = state.pos + jitter(&pos_noise, &mut rng);
        let vel = state.vel + jitter(&vel_noise, &mut rng);
        let t_r_abs = scenario.start_time + t_r;
        let toa = scenario.stamp(t_r_abs);
        reports.push(AdsbReport {
            icao: scenario.icao,
            toa,
            pos,
            vel,
            nacp: scenario.nacp,
            utc_coupled: scenario.utc_coupled,
            link_version: scenario.link_version,
            link: None,
            source_tag: format!("sim:{}", scenario.seed),
        });
        truth.push(GroundTruth {
            icao: scenario.icao,
            toa_s: toa,
            ul_s: ul,
            t_star_s: scenario.start_time + t_star,
            t_r_s: t_r_abs,
            true_x_m: true_state.pos.x,
            true_y_m: true_state.pos.y,
        });
    }
    Ok(SyntheticReports { reports, truth })
}

/// Tracker samples at `rate` Hz with per-axis noise `sigma`; velocities are
/// the truth.
pub fn generate_track_points(scenario: &SyntheticScenario, sigma: f64, rate: f64) -> Result<Vec<TrackPoint>> {
    scenario.validate()?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidInput(format!("tracker rate {rate} must be positive")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("tracker sigma {sigma} must be >= 0")));
    }
    let noise = gaussian(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(TRACKER_STREAM);
    let profile = &scenario.profile;
    Ok((0..profile.grid_len(rate))
        .map(|k| {
            let t = k as f64 / rate;
            let s = profile.state_unchecked(t);
            TrackPoint { t: scenario.start_time + t, pos: s.pos + jitter(&noise, &mut rng), vel: s.vel }
        })
        .collect())
}

/// Tracker samples using the scenario's own tracker settings.
pub fn generate_scenario_track(scenario: &SyntheticScenario) -> Result<Vec<TrackPoint>> {
    generate_track_points(scenario, scenario.tracker.sigma, scenario.tracker.rate)
}

/// A scenario file holds one scenario or a list of them.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    One(Box<SyntheticScenario>),
    Many(Vec<SyntheticScenario>),
}

pub fn parse_scenarios(text: &str) -> Result<Vec<SyntheticScenario>> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let list = match file {
        ScenarioFile::One(s) => vec![*s],
        ScenarioFile::Many(v) => v,
    };
    for s in &list {
        s.validate()?;
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight() -> TrajectoryProfile {
        TrajectoryProfile::straight(Vec2::new(0.0, 0.0), 100.0, 0.0, 240.0)
    }

    #[test]
    fn truth_position_examples() {
        let p = straight();
        assert_eq!(truth_position(&p, 2.0).unwrap(), Vec2::new(200.0, 0.0));
        assert_eq!(truth_position(&p, 0.0).unwrap(), Vec2::new(0.0, 0.0));
        assert!(matches!(truth_position(&p, 240.5), Err(Error::OutOfDomain { .. })));
        assert!(truth_position(&p, -0.1).is_err());
    }

    #[test]
    fn turn_state_is_consistent() {
        let p = TrajectoryProfile::coordinated_turn(Vec2::new(0.0, 0.0), 100.0, 0.3, 0.02, 100.0);
        let s = p.state(50.0).unwrap();
        assert!((s.vel.norm() - 100.0).abs() < 1e-9);
        assert!((s.acc.norm() - 2.0).abs() < 1e-9);
        assert!(s.acc.dot(s.vel).abs() < 1e-9);
        // Velocity is the derivative of position.
        let h = 1e-4;
        let fd = (p.state(50.0 + h).unwrap().pos - p.state(50.0 - h).unwrap().pos).scale(0.5 / h);
        assert!((fd - s.vel).norm() < 1e-5);
    }

    #[test]
    fn piecewise_joins_continuously() {
        let mut p = straight();
        p.kind = ProfileKind::Piecewise;
        p.segments = vec![
            Segment { duration: 60.0, turn_rate: 0.0 },
            Segment { duration: 60.0, turn_rate: 0.03 },
            Segment { duration: 120.0, turn_rate: 0.0 },
        ];
        for t in [60.0, 120.0] {
            let a = p.state(t - 1e-9).unwrap();
            let b = p.state(t + 1e-9).unwrap();
            assert!((a.pos - b.pos).norm() < 1e-5);
            assert!((a.vel - b.vel).norm() < 1e-5);
        }
        assert_eq!(p.state(30.0).unwrap().acc, Vec2::new(0.0, 0.0));
        assert!((p.state(90.0).unwrap().acc.norm() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_zero_latency_lies_on_truth() {
        let mut sc = SyntheticScenario::new(straight(), UlModel::Constant { value: 0.0 }, 9, 1);
        sc.noise = false;
        sc.start_time = 1000.3;
        let out = generate_reports(&sc, &EpuTable::default()).unwrap();
        assert_eq!(out.reports.len(), 481);
        for (r, g) in out.reports.iter().zip(&out.truth) {
            let t_r = g.t_r_s - sc.start_time;
            let truth = truth_position(&sc.profile, t_r).unwrap();
            assert!((r.pos - truth).norm() < 1e-9);
            assert!((r.toa - g.t_r_s).abs() <= 1.0 / 256.0 + 1e-12);
        }
    }

    #[test]
    fn budget_extremes_displace_along_track() {
        for ul in [0.400, -0.200] {
            let mut sc = SyntheticScenario::new(straight(), UlModel::Constant { value: ul }, 9, 1);
            sc.noise = false;
            let out = generate_reports(&sc, &EpuTable::default()).unwrap();
            for (r, g) in out.reports.iter().zip(&out.truth).skip(1) {
                let at_tr = truth_position(&sc.profile, g.t_r_s).unwrap();
                let lag = (at_tr - r.pos).x;
                assert!((lag - ul * 100.0).abs() < 1e-9, "lag {lag}");
            }
        }
    }

    #[test]
    fn utc_coupled_stamps_on_epochs() {
        let mut sc = SyntheticScenario::new(straight(), UlModel::Constant { value: 0.1 }, 9, 5);
        sc.utc_coupled = true;
        sc.start_time = 46800.137;
        let out = generate_reports(&sc, &EpuTable::default()).unwrap();
        for r in &out.reports {
            let e = r.toa * 5.0;
            assert_eq!(e, e.round());
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let mut sc = SyntheticScenario::new(straight(), UlModel::Uniform { lo: -0.1, hi: 0.3 }, 9, 99);
        sc.velocity_sigma = 1.0;
        let a = generate_reports(&sc, &EpuTable::default()).unwrap();
        let b = generate_reports(&sc, &EpuTable::default()).unwrap();
        assert_eq!(a, b);
        sc.seed = 100;
        let c = generate_reports(&sc, &EpuTable::default()).unwrap();
        assert_ne!(a.reports[3].pos, c.reports[3].pos);
    }

    #[test]
    fn track_point_counts() {
        let mut p = straight();
        p.duration = 10.0;
        let sc = SyntheticScenario::new(p, UlModel::Constant { value: 0.0 }, 9, 1);
        assert_eq!(generate_track_points(&sc, 0.0, 0.5).unwrap().len(), 6);
        let sc = SyntheticScenario::new(straight(), UlModel::Constant { value: 0.0 }, 9, 1);
        let pts = generate_track_points(&sc, 0.0, 1.0).unwrap();
        assert_eq!(pts.len(), 241);
        for p in &pts {
            assert_eq!(p.pos, truth_position(&sc.profile, p.t).unwrap());
        }
        assert!(generate_track_points(&sc, 1.0, 0.0).is_err());
    }

    #[test]
    fn per_report_list_cycles() {
        let mut sc = SyntheticScenario::new(straight(), UlModel::PerReportList { values: vec![0.1, 0.2] }, 9, 1);
        sc.noise = false;
        let out = generate_reports(&sc, &EpuTable::default()).unwrap();
        assert_eq!(out.truth[0].ul_s, 0.1);
        assert_eq!(out.truth[3].ul_s, 0.2);
    }

    #[test]
    fn scenario_json_single_or_list() {
        let one = r#"{"profile": {"kind": "straight", "initial_position": [0, 0], "speed": 100,
            "heading": 0, "duration": 60}, "ul_model": {"kind": "constant", "value": 0.1},
            "nacp": 9, "seed": 7}"#;
        let v = parse_scenarios(one).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].profile.report_rate, 2.0);
        assert_eq!(v[0].link_version, 2);
        let many = format!("[{one}, {one}]");
        assert_eq!(parse_scenarios(&many).unwrap().len(), 2);
        assert!(parse_scenarios(&one.replace("\"speed\": 100", "\"speed\": -1")).is_err());
    }
}
