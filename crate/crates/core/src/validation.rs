//! Synthetic-oracle acceptance suite.
//!
//! Each criterion generates its own scenarios from fixed seeds, runs the
//! production pipeline and compares against injected truth or against the
//! independent implementations in [`oracle`].

use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anomaly::{check_epoch_quantization, check_link_version, check_speed_consistency, AnomalyConfig, Evidence};
use crate::error::{Error, Result};
use crate::export::simulate_files;
use crate::latency::{analyze_track, atpe_single, EpuVariant, LatencyConfig, LatencyEstimate, TrackLatencySummary};
use crate::model::{AdsbReport, EpuTable, Icao, Track, UlBudget, UlClass};
use crate::scalar::Vec2;
use crate::simgen::{generate_reports, generate_scenario_track, GroundTruth, SyntheticScenario, TrajectoryProfile, UlModel};
use crate::spline::{fit_smoothing_spline, schedule_for_track, PseudoTruthTrack, Spline1D, DEFAULT_ACCEL_MARGIN};

/// Independent reference implementations used only for checking.
pub mod oracle {
    use crate::model::AdsbReport;
    use crate::spline::PseudoTruthTrack;

    /// Sum of squared position residuals at a shift, summed directly from
    /// the spline over reports that stay in the domain across `bracket`.
    pub fn shift_objective(reports: &[AdsbReport], ptt: &PseudoTruthTrack, bracket: (f64, f64), shift: f64) -> f64 {
        let (start, end) = ptt.domain();
        let mut sum = 0.0;
        for r in reports {
            if r.toa - bracket.1 < start || r.toa - bracket.0 > end {
                continue;
            }
            let t = r.toa - shift;
            let dx = ptt.x.evaluate(t, 0).expect("inside domain") - r.pos.x;
            let dy = ptt.y.evaluate(t, 0).expect("inside domain") - r.pos.y;
            sum += dx * dx + dy * dy;
        }
        sum
    }

    /// Exhaustive argmin of [`shift_objective`] on a uniform grid.
    pub fn grid_argmin(reports: &[AdsbReport], ptt: &PseudoTruthTrack, bracket: (f64, f64), step: f64) -> f64 {
        let n = ((bracket.1 - bracket.0) / step).round() as usize;
        let mut best = (bracket.0, f64::INFINITY);
        for k in 0..=n {
            let dt = bracket.0 + k as f64 * step;
            let v = shift_objective(reports, ptt, bracket, dt);
            if v < best.1 {
                best = (dt, v);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Mean ATPE vs injected latency, seconds.
    pub atpe_mean: f64,
    /// MTPES vs injected latency, seconds.
    pub mtpes: f64,
    /// |MTPES − mean ATPE|, seconds.
    pub agreement: f64,
    /// Per-report ATPE change under cross-track perturbation, seconds.
    pub cross_track: f64,
    pub spline_interpolation: f64,
    pub spline_residual: f64,
    pub spline_continuity: f64,
    pub spline_linear: f64,
    /// Golden-section vs grid oracle, seconds.
    pub oracle: f64,
    /// EPU-constrained estimate vs injected shift, seconds.
    pub epu_shift: f64,
    /// Wall-clock limit per recovery scenario, seconds.
    pub scenario_seconds: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atpe_mean: 0.020,
            mtpes: 0.010,
            agreement: 0.010,
            cross_track: 1e-9,
            spline_interpolation: 1e-9,
            spline_residual: 1e-6,
            spline_continuity: 1e-6,
            spline_linear: 1e-9,
            oracle: 0.001,
            epu_shift: 0.001,
            scenario_seconds: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    #[serde(skip)]
    pub table: EpuTable,
    pub tolerances: Tolerances,
    pub latency: LatencyConfig,
    pub accel_margin: f64,
    pub budget: UlBudget,
    pub anomaly: AnomalyConfig,
    /// Injected latencies for the recovery scenarios, seconds.
    pub injected: Vec<f64>,
    pub oracle_scenarios: usize,
    pub desync_offset: f64,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            table: EpuTable::default(),
            tolerances: Tolerances::default(),
            latency: LatencyConfig::default(),
            accel_margin: DEFAULT_ACCEL_MARGIN,
            budget: UlBudget::default(),
            anomaly: AnomalyConfig::default(),
            injected: vec![-0.200, -0.050, 0.0, 0.100, 0.400],
            oracle_scenarios: 20,
            desync_offset: 0.050,
            seed: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub expected: String,
    pub measured: String,
    pub pass: bool,
}

impl CriterionResult {
    fn errored(id: u32, name: &str, expected: String, e: Error) -> Self {
        Self { id, name: name.into(), expected, measured: format!("error: {e}"), pass: false }
    }
}

/// Everything produced by running one scenario through the pipeline.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub reports: Vec<AdsbReport>,
    pub truth: Vec<GroundTruth>,
    pub track: Track,
    pub ptt: PseudoTruthTrack,
    pub estimates: Vec<LatencyEstimate>,
    pub summary: TrackLatencySummary,
    pub seconds: f64,
}

pub fn run_scenario(sc: &SyntheticScenario, cfg: &ValidationConfig) -> Result<ScenarioRun> {
    let started = Instant::now();
    let sim = generate_reports(sc, &cfg.table)?;
    let track = Track::new(sc.icao, 0, generate_scenario_track(sc)?)?;
    let (ptt, estimates, summary) = analyze_track(&track, &sim.reports, &cfg.table, &cfg.latency, cfg.accel_margin)?;
    Ok(ScenarioRun {
        reports: sim.reports,
        truth: sim.truth,
        track,
        ptt,
        estimates,
        summary,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// 240 s straight leg at 100 m/s, NACp 9, default tracker.
pub fn recovery_scenario(ul: f64, seed: u64) -> SyntheticScenario {
    let profile = TrajectoryProfile::straight(Vec2::new(-12_000.0, 4_000.0), 100.0, 0.4, 240.0);
    let mut sc = SyntheticScenario::new(profile, UlModel::Constant { value: ul }, 9, seed);
    sc.start_time = 43_200.0;
    sc
}

fn fmt_ms(s: f64) -> String {
    format!("{:.2} ms", s * 1e3)
}

/// Runs the recovery scenarios shared by criteria 1 and 2.
pub fn recovery_runs(cfg: &ValidationConfig) -> Result<Vec<(f64, ScenarioRun)>> {
    cfg.injected
        .iter()
        .enumerate()
        .map(|(i, &ul)| Ok((ul, run_scenario(&recovery_scenario(ul, cfg.seed + i as u64), cfg)?)))
        .collect()
}

pub fn criterion_ul_recovery(cfg: &ValidationConfig, runs: &[(f64, ScenarioRun)]) -> CriterionResult {
    let tol = &cfg.tolerances;
    let mut worst_atpe: f64 = 0.0;
    let mut worst_mtpes: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    let mut parts = Vec::new();
    for (ul, run) in runs {
        let ea = run.summary.mean_ul - ul;
        let em = run.summary.mtpes_ul - ul;
        worst_atpe = worst_atpe.max(ea.abs());
        worst_mtpes = worst_mtpes.max(em.abs());
        slowest = slowest.max(run.seconds);
        parts.push(format!("{:+.0}: atpe {:+.1} mtpes {:+.1}", ul * 1e3, ea * 1e3, em * 1e3));
    }
    let pass = worst_atpe <= tol.atpe_mean && worst_mtpes <= tol.mtpes && slowest < tol.scenario_seconds;
    CriterionResult {
        id: 1,
        name: "UL recovery (straight track)".into(),
        expected: format!(
            "|mean ATPE − UL| ≤ {}, |MTPES − UL| ≤ {}, < {} s/scenario",
            fmt_ms(tol.atpe_mean),
            fmt_ms(tol.mtpes),
            tol.scenario_seconds
        ),
        measured: format!(
            "max ATPE err {}, max MTPES err {}, slowest {:.2} s [errors ms: {}]",
            fmt_ms(worst_atpe),
            fmt_ms(worst_mtpes),
            slowest,
            parts.join("; ")
        ),
        pass,
    }
}

pub fn criterion_agreement(cfg: &ValidationConfig, runs: &[(f64, ScenarioRun)]) -> CriterionResult {
    let gap = runs
        .iter()
        .map(|(_, r)| (r.summary.mtpes_ul - r.summary.mean_ul).abs())
        .fold(0.0, f64::max);
    CriterionResult {
        id: 2,
        name: "ATPE/MTPES agreement".into(),
        expected: format!("|MTPES − mean ATPE| ≤ {}", fmt_ms(cfg.tolerances.agreement)),
        measured: format!("max gap {} over {} scenarios", fmt_ms(gap), runs.len()),
        pass: !runs.is_empty() && gap <= cfg.tolerances.agreement,
    }
}

pub fn criterion_budget(cfg: &ValidationConfig) -> CriterionResult {
    let name = "UL budget classification";
    let cases = [
        (-0.200, UlClass::Within),
        (0.400, UlClass::Within),
        (-0.201, UlClass::OverCompensatedExcess),
        (0.401, UlClass::UnderCompensatedExcess),
    ];
    let expected = "−200/+400 ms within; −201 over, +401 under".to_string();
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, (ul, want)) in cases.iter().enumerate() {
        let mut sc = recovery_scenario(*ul, cfg.seed + 200 + i as u64);
        sc.profile.duration = 20.0;
        let sim = match generate_reports(&sc, &cfg.table) {
            Ok(s) => s,
            Err(e) => return CriterionResult::errored(3, name, expected, e),
        };
        let classes: Result<Vec<UlClass>> = sim.truth.iter().map(|g| cfg.budget.classify(g.ul_s)).collect();
        match classes {
            Ok(c) => {
                let ok = c.iter().all(|x| x == want);
                pass &= ok;
                parts.push(format!("{:+.0} ms → {:?}{}", ul * 1e3, c[0], if ok { "" } else { " (mismatch)" }));
            }
            Err(e) => return CriterionResult::errored(3, name, expected, e),
        }
    }
    CriterionResult { id: 3, name: name.into(), expected, measured: parts.join(", "), pass }
}

pub fn criterion_cross_track(cfg: &ValidationConfig, runs: &[(f64, ScenarioRun)]) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 400);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (_, run) in runs {
        for (r, e0) in run.reports.iter().zip(&run.estimates) {
            let Some(ul0) = e0.ul else { continue };
            let speed = r.vel.norm();
            let n = r.vel.perp().scale(1.0 / speed);
            let mut moved = r.clone();
            moved.pos = r.pos + n.scale(rng.random_range(-100.0..=100.0));
            let e1 = atpe_single(&moved, &run.ptt, cfg.latency.speed_floor);
            match e1.ul {
                Some(ul1) => worst = worst.max((ul1 - ul0).abs()),
                None => worst = f64::INFINITY,
            }
            compared += 1;
        }
    }
    CriterionResult {
        id: 4,
        name: "Cross-track invariance".into(),
        expected: format!("|ΔATPE| < {:e} s for cross-track moves ≤ 100 m", cfg.tolerances.cross_track),
        measured: format!("max |ΔATPE| {worst:.3e} s over {compared} reports"),
        pass: compared > 0 && worst < cfg.tolerances.cross_track,
    }
}

fn max_rel_interp_error(t: &[f64], y: &[f64]) -> Result<f64> {
    let g = fit_smoothing_spline(t, y, 0.0)?;
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for (ti, yi) in t.iter().zip(y) {
        worst = worst.max((g.evaluate(*ti, 0)? - yi).abs() / scale);
    }
    Ok(worst)
}

/// Largest jump in value, slope and curvature across interior knots,
/// relative to the largest magnitude of that derivative at the knots.
pub fn max_continuity_jump(s: &Spline1D<f64>) -> f64 {
    let n = s.knots().len();
    let limits: Vec<_> = (1..n - 1).filter_map(|k| s.knot_limits(k)).collect();
    let mut worst: f64 = 0.0;
    for order in 0..3 {
        let scale = limits
            .iter()
            .map(|(l, r)| l[order].abs().max(r[order].abs()))
            .fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        for (l, r) in &limits {
            worst = worst.max((l[order] - r[order]).abs() / scale);
        }
    }
    worst
}

fn linear_error(s: f64) -> Result<f64> {
    let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.5 + 0.13 * ((i * 7) % 3) as f64).collect();
    let line = |x: f64| 1_500.0 - 73.25 * x;
    let y: Vec<f64> = t.iter().map(|x| line(*x)).collect();
    let g = fit_smoothing_spline(&t, &y, s)?;
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for w in t.windows(2) {
        for x in [w[0], 0.5 * (w[0] + w[1])] {
            worst = worst.max((g.evaluate(x, 0)? - line(x)).abs() / scale);
        }
    }
    Ok(worst)
}

pub fn criterion_spline(cfg: &ValidationConfig, runs: &[(f64, ScenarioRun)]) -> CriterionResult {
    let name = "Spline properties";
    let tol = &cfg.tolerances;
    let expected = format!(
        "interp ≤ {:e} rel; RSS ≤ s·(1+{:e}); C² jump ≤ {:e} rel; line ≤ {:e} rel",
        tol.spline_interpolation, tol.spline_residual, tol.spline_continuity, tol.spline_linear
    );
    let inner = || -> Result<(f64, f64, f64, f64, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 500);
        let mut interp: f64 = 0.0;
        for _ in 0..10 {
            let mut t = Vec::with_capacity(60);
            let mut x = 43_200.0;
            for _ in 0..60 {
                x += rng.random_range(0.2..3.0);
                t.push(x);
            }
            let y: Vec<f64> = (0..60).map(|_| rng.random_range(-5_000.0..5_000.0)).collect();
            interp = interp.max(max_rel_interp_error(&t, &y)?);
        }

        // Every budget of every recovery track's smoothing schedule.
        let mut residual_ratio: f64 = 0.0;
        let mut fits = 0;
        for (_, run) in runs {
            let d = &run.ptt.diagnostics;
            for r in [d.residual_sum_x, d.residual_sum_y] {
                residual_ratio = residual_ratio.max(excess(r, d.s_final));
            }
            let schedule = schedule_for_track(&run.track, &run.reports, &cfg.table)?;
            let t: Vec<f64> = run.track.points.iter().map(|p| p.t).collect();
            let xs: Vec<f64> = run.track.points.iter().map(|p| p.pos.x).collect();
            let ys: Vec<f64> = run.track.points.iter().map(|p| p.pos.y).collect();
            for s in schedule.budgets() {
                for v in [&xs, &ys] {
                    let g = fit_smoothing_spline(&t, v, s)?;
                    residual_ratio = residual_ratio.max(excess(g.residual_sum(&t, v)?, s));
                    fits += 1;
                }
            }
        }

        let mut jump: f64 = 0.0;
        for (_, run) in runs {
            jump = jump.max(max_continuity_jump(&run.ptt.x)).max(max_continuity_jump(&run.ptt.y));
        }

        let mut linear: f64 = 0.0;
        for s in [0.0, 1e-6, 1e-2, 1.0, 1e2, 1e4, 1e8, 1e12] {
            linear = linear.max(linear_error(s)?);
        }
        Ok((interp, residual_ratio, jump, linear, fits))
    };
    match inner() {
        Ok((interp, residual, jump, linear, fits)) => CriterionResult {
            id: 5,
            name: name.into(),
            expected,
            measured: format!(
                "interp {interp:.2e}; RSS excess {residual:.2e} over {fits} fits; C² jump {jump:.2e}; line {linear:.2e}"
            ),
            pass: interp <= tol.spline_interpolation
                && residual <= tol.spline_residual
                && jump <= tol.spline_continuity
                && linear <= tol.spline_linear,
        },
        Err(e) => CriterionResult::errored(5, name, expected, e),
    }
}

/// Relative amount by which `rss` exceeds the budget `s` (0 when within).
fn excess(rss: f64, s: f64) -> f64 {
    if rss <= s {
        0.0
    } else if s == 0.0 {
        f64::INFINITY
    } else {
        rss / s - 1.0
    }
}

/// Randomized scenario for the oracle comparison.
pub fn random_scenario(rng: &mut ChaCha8Rng, seed: u64) -> SyntheticScenario {
    let speed = rng.random_range(60.0..250.0);
    let heading = rng.random_range(0.0..TAU);
    let start = Vec2::new(rng.random_range(-30_000.0..30_000.0), rng.random_range(-30_000.0..30_000.0));
    // Turns stay below 0.4 m/s² lateral: a natural spline has zero
    // acceleration at its ends, so a sustained turn harder than the bound
    // margin can never pass the acceleration check.
    let profile = if rng.random_bool(0.5) {
        TrajectoryProfile::straight(start, speed, heading, 120.0)
    } else {
        let max_rate = 0.4 / speed;
        TrajectoryProfile::coordinated_turn(start, speed, heading, rng.random_range(-max_rate..max_rate), 120.0)
    };
    let ul = rng.random_range(-0.3..0.5);
    let nacp = [8u8, 9, 10][rng.random_range(0..3)];
    let mut sc = SyntheticScenario::new(profile, UlModel::Constant { value: ul }, nacp, seed);
    sc.start_time = rng.random_range(0.0..80_000.0_f64).round();
    sc.icao = Icao::new(0xB0_0000 + seed as u32 % 0x1_0000).expect("fits 24 bits");
    sc
}

pub fn criterion_oracle(cfg: &ValidationConfig) -> CriterionResult {
    let name = "MTPES oracle equivalence";
    let expected = format!(
        "|golden − 1 ms grid| ≤ {} on {} scenarios",
        fmt_ms(cfg.tolerances.oracle),
        cfg.oracle_scenarios
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 600);
    let mut worst: f64 = 0.0;
    for i in 0..cfg.oracle_scenarios {
        let sc = random_scenario(&mut rng, cfg.seed + 600 + i as u64);
        let run = match run_scenario(&sc, cfg) {
            Ok(r) => r,
            Err(e) => return CriterionResult::errored(6, name, expected, e),
        };
        let grid = oracle::grid_argmin(&run.reports, &run.ptt, cfg.latency.shift.bracket, 0.001);
        worst = worst.max((run.summary.mtpes_ul - grid).abs());
    }
    CriterionResult {
        id: 6,
        name: name.into(),
        expected,
        measured: format!("max |golden − grid| {}", fmt_ms(worst)),
        pass: cfg.oracle_scenarios > 0 && worst <= cfg.tolerances.oracle,
    }
}

pub fn criterion_epu_variant(cfg: &ValidationConfig) -> CriterionResult {
    let name = "EPU-constrained variant";
    let expected = format!(
        "noiseless NACp 9: feasible, |ul − shift| ≤ {}; NACp 11 with noise ≫ EPU: infeasible",
        fmt_ms(cfg.tolerances.epu_shift)
    );
    let inner = || -> Result<(bool, String)> {
        let mut pass = true;
        let mut parts = Vec::new();
        for (i, shift) in [-0.200, 0.0, 0.150, 0.400].into_iter().enumerate() {
            let mut sc = recovery_scenario(shift, cfg.seed + 700 + i as u64);
            sc.profile.heading = 1.3 * i as f64;
            sc.profile.speed = 80.0 + 40.0 * i as f64;
            sc.noise = false;
            sc.tracker.sigma = 0.0;
            let run = run_scenario(&sc, cfg)?;
            match run.summary.epu_variant {
                EpuVariant::Feasible { ul, .. } => {
                    let err = ul - shift;
                    pass &= err.abs() <= cfg.tolerances.epu_shift;
                    parts.push(format!("{:+.0} ms feasible err {:+.3} ms", shift * 1e3, err * 1e3));
                }
                EpuVariant::Infeasible { best_fraction } => {
                    pass = false;
                    parts.push(format!("{:+.0} ms infeasible ({best_fraction:.2})", shift * 1e3));
                }
            }
        }
        let mut sc = recovery_scenario(0.100, cfg.seed + 710);
        sc.nacp = 11;
        sc.noise_sigma = Some(30.0);
        let run = run_scenario(&sc, cfg)?;
        match run.summary.epu_variant {
            EpuVariant::Infeasible { best_fraction } => {
                parts.push(format!("NACp 11 infeasible (best contained {best_fraction:.3})"))
            }
            EpuVariant::Feasible { ul, .. } => {
                pass = false;
                parts.push(format!("NACp 11 unexpectedly feasible at {}", fmt_ms(ul)));
            }
        }
        Ok((pass, parts.join("; ")))
    };
    match inner() {
        Ok((pass, measured)) => CriterionResult { id: 7, name: name.into(), expected, measured, pass },
        Err(e) => CriterionResult::errored(7, name, expected, e),
    }
}

fn fleet_aircraft(cfg: &ValidationConfig, index: u32, utc: bool, rng: &mut ChaCha8Rng) -> Result<Vec<AdsbReport>> {
    let profile = TrajectoryProfile::straight(Vec2::new(0.0, 0.0), rng.random_range(80.0..200.0), rng.random_range(0.0..TAU), 60.0);
    let mut sc = SyntheticScenario::new(profile, UlModel::Uniform { lo: -0.1, hi: 0.3 }, 9, cfg.seed + 800 + index as u64);
    sc.icao = Icao::new(0xC0_0000 + index)?;
    sc.utc_coupled = utc;
    sc.start_time = 46_800.0 + rng.random_range(0.0..600.0);
    Ok(generate_reports(&sc, &cfg.table)?.reports)
}

fn median_offset(reports: &[AdsbReport], threshold: f64) -> (bool, f64) {
    let f = check_speed_consistency(reports, threshold);
    let m = match f.evidence {
        Evidence::Speed { median_offset_mps, .. } => median_offset_mps,
        _ => f64::NAN,
    };
    (f.triggered, m)
}

pub fn criterion_anomaly(cfg: &ValidationConfig) -> CriterionResult {
    let name = "Anomaly detectors";
    let a = &cfg.anomaly;
    let expected = format!(
        "epoch: 100% UTC / 0% non-UTC; link v1 flagged; ±{} desync at 100 m/s flags speed (> {} m/s)",
        fmt_ms(cfg.desync_offset),
        a.speed_threshold
    );
    let inner = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 800);
        let per_class = 5;
        let mut utc_hits = 0;
        let mut non_hits = 0;
        let mut min_reports = usize::MAX;
        for i in 0..2 * per_class {
            let utc = i < per_class;
            let reports = fleet_aircraft(cfg, i as u32, utc, &mut rng)?;
            min_reports = min_reports.min(reports.len());
            let f = check_epoch_quantization(&reports, a.epoch_tolerance, a.epoch_spacing, a.min_epoch_reports);
            match (utc, f.triggered) {
                (true, true) => utc_hits += 1,
                (false, true) => non_hits += 1,
                _ => {}
            }
        }
        let epoch_ok = utc_hits == per_class && non_hits == 0 && min_reports >= 50;

        let mut v1 = fleet_aircraft(cfg, 20, true, &mut rng)?;
        for r in &mut v1 {
            r.link_version = 1;
        }
        let v2 = fleet_aircraft(cfg, 21, true, &mut rng)?;
        let link_ok = check_link_version(&v1, &a.compliant_link_versions).triggered
            && !check_link_version(&v2, &a.compliant_link_versions).triggered;

        let profile = TrajectoryProfile::straight(Vec2::new(0.0, 0.0), 100.0, 0.0, 120.0);
        let mut sc = SyntheticScenario::new(profile, UlModel::Constant { value: 0.0 }, 9, cfg.seed + 830);
        sc.noise = false;
        sc.start_time = 46_800.0;
        let control = generate_reports(&sc, &cfg.table)?.reports;
        sc.desync_offset = cfg.desync_offset;
        let desync = generate_reports(&sc, &cfg.table)?.reports;
        let (control_hit, control_median) = median_offset(&control, a.speed_threshold);
        let (desync_hit, desync_median) = median_offset(&desync, a.speed_threshold);
        let speed_ok = desync_hit && !control_hit;

        let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
        let measured = format!(
            "epoch {}/{} UTC, {}/{} non-UTC, ≥{} reports [{}]; link [{}]; speed median {:.1} m/s desync, {:.1} m/s control [{}]",
            utc_hits,
            per_class,
            non_hits,
            per_class,
            min_reports,
            mark(epoch_ok),
            mark(link_ok),
            desync_median,
            control_median,
            mark(speed_ok)
        );
        Ok((epoch_ok && link_ok && speed_ok, measured))
    };
    match inner() {
        Ok((pass, measured)) => CriterionResult { id: 8, name: name.into(), expected, measured, pass },
        Err(e) => CriterionResult::errored(8, name, expected, e),
    }
}

/// Scenario set used by the determinism check and the CLI examples.
pub fn determinism_scenarios(seed: u64) -> Vec<SyntheticScenario> {
    let mut a = recovery_scenario(0.120, seed);
    a.profile.duration = 60.0;
    let mut b = SyntheticScenario::new(
        TrajectoryProfile::coordinated_turn(Vec2::new(5_000.0, 0.0), 150.0, 2.0, -0.015, 60.0),
        UlModel::Uniform { lo: -0.2, hi: 0.4 },
        8,
        seed + 1,
    );
    b.icao = Icao::new(0xA0_0002).expect("fits 24 bits");
    b.start_time = 50_000.0;
    vec![a, b]
}

pub fn criterion_determinism(cfg: &ValidationConfig) -> CriterionResult {
    let name = "Simulation determinism";
    let expected = "byte-identical outputs across two runs".to_string();
    let scenarios = determinism_scenarios(cfg.seed + 900);
    let run = || simulate_files(&scenarios, &cfg.table);
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let bytes: usize = a.iter().map(|(_, v)| v.len()).sum();
            let same = a == b;
            CriterionResult {
                id: 9,
                name: name.into(),
                expected,
                measured: format!("{} files, {bytes} bytes, identical: {same}", a.len()),
                pass: same,
            }
        }
        (Err(e), _) | (_, Err(e)) => CriterionResult::errored(9, name, expected, e),
    }
}

/// Runs criteria 1–9 in order.
pub fn run_all(cfg: &ValidationConfig) -> Vec<CriterionResult> {
    let runs = recovery_runs(cfg);
    let mut out = Vec::new();
    match &runs {
        Ok(runs) => {
            out.push(criterion_ul_recovery(cfg, runs));
            out.push(criterion_agreement(cfg, runs));
        }
        Err(e) => {
            out.push(CriterionResult::errored(1, "UL recovery (straight track)", String::new(), clone_err(e)));
            out.push(CriterionResult::errored(2, "ATPE/MTPES agreement", String::new(), clone_err(e)));
        }
    }
    out.push(criterion_budget(cfg));
    let runs = runs.unwrap_or_default();
    out.push(criterion_cross_track(cfg, &runs));
    out.push(criterion_spline(cfg, &runs));
    out.push(criterion_oracle(cfg));
    out.push(criterion_epu_variant(cfg));
    out.push(criterion_anomaly(cfg));
    out.push(criterion_determinism(cfg));
    out
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidInput(e.to_string())
}

/// Plain-text table of results.
pub fn render_table(results: &[CriterionResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "[{}] {}. {}\n    expected: {}\n    measured: {}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.expected,
            r.measured
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_objective_matches_production() {
        let cfg = ValidationConfig::default();
        let mut sc = recovery_scenario(0.1, 3);
        sc.profile.duration = 60.0;
        let run = run_scenario(&sc, &cfg).unwrap();
        let bracket = cfg.latency.shift.bracket;
        let used = crate::latency::shiftable_reports(&run.reports, &run.ptt, bracket);
        for shift in [-0.5, 0.0, 0.1, 0.7] {
            let a = oracle::shift_objective(&run.reports, &run.ptt, bracket, shift);
            let b = crate::latency::shift_objective(&used, &run.ptt, shift);
            assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn excess_examples() {
        assert_eq!(excess(1.0, 2.0), 0.0);
        assert_eq!(excess(0.0, 0.0), 0.0);
        assert!(excess(1e-30, 0.0).is_infinite());
        assert!((excess(2.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn budget_criterion_passes() {
        assert!(criterion_budget(&ValidationConfig::default()).pass);
    }
}
