use adsb_latency::simgen::{
    generate_reports, generate_track_points, ProfileKind, Segment, SyntheticScenario, TrajectoryProfile, UlModel,
};
use adsb_latency::{EpuTable, UlClass, UlBudget, Vec2};

/// Fourth-order Runge–Kutta on (x, y, heading), restarted at each segment
/// boundary so every step sees a single turn rate.
fn rk4(profile: &TrajectoryProfile, t_end: f64, h: f64) -> Vec2<f64> {
    let segments = match profile.kind {
        ProfileKind::Straight => vec![Segment { duration: profile.duration, turn_rate: 0.0 }],
        ProfileKind::CoordinatedTurn => vec![Segment { duration: profile.duration, turn_rate: profile.turn_rate }],
        ProfileKind::Piecewise => profile.segments.clone(),
    };
    let v = profile.speed;
    let mut s = [profile.initial_position[0], profile.initial_position[1], profile.heading];
    let mut t0 = 0.0;
    for seg in segments {
        let span = (t_end - t0).min(seg.duration);
        if span <= 0.0 {
            break;
        }
        let f = |s: [f64; 3]| [v * s[2].cos(), v * s[2].sin(), seg.turn_rate];
        let add = |a: [f64; 3], k: [f64; 3], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]];
        let steps = (span / h).ceil() as usize;
        let dt = span / steps as f64;
        for _ in 0..steps {
            let k1 = f(s);
            let k2 = f(add(s, k1, dt / 2.0));
            let k3 = f(add(s, k2, dt / 2.0));
            let k4 = f(add(s, k3, dt));
            for j in 0..3 {
                s[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        t0 += seg.duration;
    }
    Vec2::new(s[0], s[1])
}

#[test]
fn coordinated_turn_matches_rk4() {
    let p = TrajectoryProfile::coordinated_turn(Vec2::new(1_000.0, -500.0), 140.0, 0.7, 0.025, 200.0);
    for t in [10.0, 55.0, 120.0, 200.0] {
        let exact = p.state(t).unwrap().pos;
        let num = rk4(&p, t, 0.005);
        assert!((exact - num).norm() < 1e-6, "t={t}: {:?} vs {:?}", exact, num);
    }
}

#[test]
fn piecewise_matches_rk4() {
    let mut p = TrajectoryProfile::straight(Vec2::new(0.0, 0.0), 90.0, -0.3, 150.0);
    p.kind = ProfileKind::Piecewise;
    p.segments = vec![
        Segment { duration: 40.0, turn_rate: 0.0 },
        Segment { duration: 50.0, turn_rate: -0.03 },
        Segment { duration: 60.0, turn_rate: 0.01 },
    ];
    for t in [30.0, 75.0, 150.0] {
        let exact = p.state(t).unwrap().pos;
        let num = rk4(&p, t, 0.005);
        assert!((exact - num).norm() < 1e-6, "t={t}: {:?} vs {:?}", exact, num);
    }
}

#[test]
fn tracker_noise_has_requested_variance() {
    let profile = TrajectoryProfile::straight(Vec2::new(0.0, 0.0), 100.0, 0.0, 4_000.0);
    let sc = SyntheticScenario::new(profile.clone(), UlModel::Constant { value: 0.0 }, 9, 77);
    let pts = generate_track_points(&sc, 20.0, 1.0).unwrap();
    let n = pts.len() as f64;
    for axis in 0..2 {
        let errs: Vec<f64> = pts
            .iter()
            .map(|p| {
                let truth = profile.state(p.t).unwrap().pos;
                if axis == 0 { p.pos.x - truth.x } else { p.pos.y - truth.y }
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / n;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = 400.0 * (2.0 / (n - 1.0)).sqrt();
        assert!((var - 400.0).abs() < 3.0 * se, "axis {axis}: var {var}, se {se}");
    }
}

#[test]
fn stamps_follow_coupling() {
    let profile = TrajectoryProfile::straight(Vec2::new(0.0, 0.0), 100.0, 0.0, 30.0);
    let mut sc = SyntheticScenario::new(profile, UlModel::Uniform { lo: -0.2, hi: 0.4 }, 9, 5);
    sc.start_time = 46_800.123;
    let table = EpuTable::default();
    let non = generate_reports(&sc, &table).unwrap();
    for r in &non.reports {
        assert_eq!((r.toa * 128.0).fract(), 0.0);
    }
    sc.utc_coupled = true;
    let utc = generate_reports(&sc, &table).unwrap();
    for r in &utc.reports {
        let e = r.toa * 5.0;
        assert_eq!(e, e.round());
    }
}

#[test]
fn desync_alternates_position_time() {
    let profile = TrajectoryProfile::straight(Vec2::new(0.0, 0.0), 100.0, 0.0, 10.0);
    let mut sc = SyntheticScenario::new(profile, UlModel::Constant { value: 0.0 }, 9, 1);
    sc.noise = false;
    sc.desync_offset = 0.05;
    let r = generate_reports(&sc, &EpuTable::default()).unwrap().reports;
    assert!((r[0].pos.x - -5.0).abs() < 1e-9);
    assert!((r[1].pos.x - 55.0).abs() < 1e-9);
    assert!((r[2].pos.x - 95.0).abs() < 1e-9);
}

#[test]
fn ground_truth_rows_match_reports_and_budget_extremes_are_within() {
    let budget = UlBudget::default();
    for ul in [-0.2, 0.4] {
        let profile = TrajectoryProfile::straight(Vec2::new(0.0, 0.0), 100.0, 0.0, 30.0);
        let sc = SyntheticScenario::new(profile, UlModel::Constant { value: ul }, 9, 2);
        let sim = generate_reports(&sc, &EpuTable::default()).unwrap();
        assert_eq!(sim.truth.len(), sim.reports.len());
        for g in &sim.truth {
            assert_eq!(budget.classify(g.ul_s).unwrap(), UlClass::Within);
        }
    }
}

#[test]
fn same_seed_same_stream() {
    let profile = TrajectoryProfile::straight(Vec2::new(0.0, 0.0), 100.0, 0.0, 30.0);
    let sc = SyntheticScenario::new(profile, UlModel::Uniform { lo: 0.0, hi: 0.3 }, 8, 42);
    let table = EpuTable::default();
    assert_eq!(generate_reports(&sc, &table).unwrap(), generate_reports(&sc, &table).unwrap());
    let mut other = sc.clone();
    other.seed = 43;
    assert_ne!(generate_reports(&sc, &table).unwrap().reports, generate_reports(&other, &table).unwrap().reports);
}
