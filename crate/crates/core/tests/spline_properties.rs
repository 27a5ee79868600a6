use adsb_latency::spline::fit_smoothing_spline;
use adsb_latency::validation::max_continuity_jump;
use proptest::prelude::*;

fn abscissae(gaps: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(gaps.len());
    let mut x = 100.0;
    for g in gaps {
        x += g;
        t.push(x);
    }
    t
}

fn samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (6usize..40).prop_flat_map(|n| {
        (prop::collection::vec(0.1f64..5.0, n), prop::collection::vec(-1e4f64..1e4, n))
            .prop_map(|(g, y)| (abscissae(&g), y))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_budget_interpolates((t, y) in samples()) {
        let g = fit_smoothing_spline(&t, &y, 0.0).unwrap();
        let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (ti, yi) in t.iter().zip(&y) {
            prop_assert!((g.evaluate(*ti, 0).unwrap() - yi).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn residual_within_budget((t, y) in samples(), log_s in -3.0f64..10.0) {
        let s = 10f64.powf(log_s);
        let g = fit_smoothing_spline(&t, &y, s).unwrap();
        prop_assert!(g.residual_sum(&t, &y).unwrap() <= s * (1.0 + 1e-6));
    }

    #[test]
    fn second_order_continuity((t, y) in samples(), log_s in -3.0f64..10.0) {
        let g = fit_smoothing_spline(&t, &y, 10f64.powf(log_s)).unwrap();
        prop_assert!(max_continuity_jump(&g) <= 1e-6);
    }

    #[test]
    fn lines_are_reproduced(gaps in prop::collection::vec(0.1f64..5.0, 5..30), a in -1e4f64..1e4, b in -300.0f64..300.0, log_s in -6.0f64..12.0) {
        let t = abscissae(&gaps);
        let y: Vec<f64> = t.iter().map(|x| a + b * x).collect();
        let g = fit_smoothing_spline(&t, &y, 10f64.powf(log_s)).unwrap();
        let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for w in t.windows(2) {
            let m = 0.5 * (w[0] + w[1]);
            prop_assert!((g.evaluate(m, 0).unwrap() - (a + b * m)).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn larger_budget_never_rougher((t, y) in samples(), log_s in 0.0f64..8.0) {
        // Roughness ∫g''² shrinks as the budget grows; compare via the
        // second-derivative sums at the knots.
        let s1 = 10f64.powf(log_s);
        let g1 = fit_smoothing_spline(&t, &y, s1).unwrap();
        let g2 = fit_smoothing_spline(&t, &y, 4.0 * s1).unwrap();
        let rough = |g: &adsb_latency::Spline| -> f64 {
            t.windows(2).map(|w| {
                let a = g.evaluate(w[0], 2).unwrap();
                let b = g.evaluate(w[1], 2).unwrap();
                (w[1] - w[0]) * (a * a + a * b + b * b) / 3.0
            }).sum()
        };
        prop_assert!(rough(&g2) <= rough(&g1) * (1.0 + 1e-9) + 1e-12);
    }
}

#[test]
fn single_and_double_precision_agree() {
    let t64: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let y64: Vec<f64> = t64.iter().map(|x| (x * 0.3).sin() * 50.0).collect();
    let t32: Vec<f32> = t64.iter().map(|v| *v as f32).collect();
    let y32: Vec<f32> = y64.iter().map(|v| *v as f32).collect();
    let g64 = fit_smoothing_spline(&t64, &y64, 100.0).unwrap();
    let g32 = fit_smoothing_spline(&t32, &y32, 100.0f32).unwrap();
    for x in [0.5, 7.25, 14.0, 28.9] {
        let a = g64.evaluate(x, 0).unwrap();
        let b = g32.evaluate(x as f32, 0).unwrap() as f64;
        assert!((a - b).abs() < 1e-2, "{x}: {a} vs {b}");
    }
}
