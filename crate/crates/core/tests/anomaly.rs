use adsb_latency::anomaly::{check_epoch_quantization, epoch_residual};
use adsb_latency::{AdsbReport, Vec2};
use proptest::prelude::*;

fn reports(toas: &[f64]) -> Vec<AdsbReport> {
    toas.iter()
        .map(|&toa| AdsbReport {
            icao: "A637E1".parse().unwrap(),
            toa,
            pos: Vec2::new(0.0, 0.0),
            vel: Vec2::new(100.0, 0.0),
            nacp: 9,
            utc_coupled: true,
            link_version: 2,
            link: None,
            source_tag: String::new(),
        })
        .collect()
}

proptest! {
    #[test]
    fn whole_second_shift_is_invariant(ticks in prop::collection::vec(0u32..128 * 600, 10..60), shift in 0u32..80_000) {
        let toas: Vec<f64> = ticks.iter().map(|k| 40_000.0 + *k as f64 / 128.0).collect();
        let shifted: Vec<f64> = toas.iter().map(|t| t + shift as f64).collect();
        let a = check_epoch_quantization(&reports(&toas), 0.001, 0.2, 10);
        let b = check_epoch_quantization(&reports(&shifted), 0.001, 0.2, 10);
        prop_assert_eq!(a.triggered, b.triggered);
    }

    #[test]
    fn off_epoch_128th_stamp_blocks_trigger(epochs in prop::collection::vec(0u32..5 * 3600, 10..60), k in 1u32..128) {
        // k/128 s lands on a 200 ms epoch only for whole seconds, and its
        // distance from one is at least 1/640 s, above the 1 ms tolerance.
        let mut toas: Vec<f64> = epochs.iter().map(|e| 30_000.0 + *e as f64 / 5.0).collect();
        prop_assert!(check_epoch_quantization(&reports(&toas), 0.001, 0.2, 10).triggered);
        toas.push(31_000.0 + k as f64 / 128.0);
        prop_assert!(epoch_residual(31_000.0 + k as f64 / 128.0, 0.2) >= 1.0 / 640.0 - 1e-12);
        prop_assert!(!check_epoch_quantization(&reports(&toas), 0.001, 0.2, 10).triggered);
    }
}
