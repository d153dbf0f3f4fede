use multiscan::penalties::{d_norm, gamma_pen, gamma_v_pen};
use multiscan::StatisticKind;
use multiscan_web::{curves, null_sample, run_detection, DetectionRequest, MAX_SIDE};

fn request(stat: StatisticKind, mu: f64) -> DetectionRequest {
    DetectionRequest {
        m: 16,
        stat,
        row: 3,
        col: 7,
        side: 5,
        mu,
        alpha: 0.05,
        reps: 200,
        seed: 11,
    }
}

#[test]
fn strong_square_is_found_where_it_was_planted() {
    for stat in [StatisticKind::Multiscale, StatisticKind::Scan] {
        let d = run_detection(&request(stat, 2.0)).unwrap();
        assert!(d.reject(), "{:?}: {} <= {}", stat, d.value(), d.kappa());
        assert_eq!(d.values().len(), 256);
        let (lo, hi) = (d.argmax_lo(), d.argmax_hi());
        // overlaps rows 3..7, cols 7..11
        assert!(lo[0] <= 7 && hi[0] >= 3 && lo[1] <= 11 && hi[1] >= 7, "{:?} {:?}", lo, hi);
    }
}

#[test]
fn detection_is_reproducible_and_null_grid_has_no_signal() {
    let a = run_detection(&request(StatisticKind::Alr, 0.0)).unwrap();
    let b = run_detection(&request(StatisticKind::Alr, 0.0)).unwrap();
    assert_eq!(a, b);
    let shifted = run_detection(&request(StatisticKind::Alr, 1.0)).unwrap();
    // the same noise plus a positive bump
    let diff: Vec<f64> = shifted.values().iter().zip(a.values()).map(|(x, y)| x - y).collect();
    assert_eq!(diff.iter().filter(|&&x| (x - 1.0).abs() < 1e-12).count(), 25);
    assert_eq!(diff.iter().filter(|&&x| x == 0.0).count(), 256 - 25);
}

#[test]
fn rejects_oversized_grids() {
    let mut req = request(StatisticKind::Scan, 1.0);
    req.m = MAX_SIDE + 1;
    assert!(run_detection(&req).is_err());
    assert!(null_sample(0, StatisticKind::Scan, 100, 1).is_err());
}

#[test]
fn curve_columns_match_penalty_functions() {
    let n = 9;
    let c = curves(4.0, 1e-4, n).unwrap();
    assert_eq!(c.len(), 4 * n);
    assert!((c[0] - 1e-4).abs() < 1e-16 && c[n - 1] == 1.0);
    for i in 0..n {
        let r = c[i];
        assert_eq!(c[n + i], gamma_pen(r).unwrap());
        assert_eq!(c[2 * n + i], gamma_v_pen(r, 4.0).unwrap());
        assert_eq!(c[3 * n + i], d_norm(r).unwrap());
    }
    assert!(curves(1.0, 0.0, 5).is_err());
}

#[test]
fn null_sample_is_sorted() {
    let s = null_sample(6, StatisticKind::Multiscale, 120, 3).unwrap();
    assert_eq!(s.len(), 120);
    assert!(s.windows(2).all(|w| w[0] <= w[1]));
}
