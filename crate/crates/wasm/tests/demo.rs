use mplab_wasm::{scaling_sweep_impl, schedule_curve_impl, toy_margins_impl};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn schedule_curve_is_monotone_and_slopes_one_inside_the_band() {
    let (eps, gap) = (0.03, 0.005);
    let v = schedule_curve_impl(eps, gap, -0.1, 0.1, 401).unwrap();
    let pts: Vec<(f64, f64)> = v.chunks(2).map(|c| (c[0], c[1])).collect();
    assert!(pts.windows(2).all(|w| w[1].1 >= w[0].1));
    for (m, e) in pts {
        if m > -eps + gap && m < eps + gap {
            assert!((e - (m - gap)).abs() < 1e-15);
        }
    }
}

#[test]
fn sweep_repeats_exactly_for_a_seed() {
    let a = scaling_sweep_impl("pd", 0.5, 0.0, 16, 2, 10, 4).unwrap();
    let b = scaling_sweep_impl("pd", 0.5, 0.0, 16, 2, 10, 4).unwrap();
    let c = scaling_sweep_impl("pd", 0.5, 0.0, 16, 2, 10, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn toy_margin_estimators_agree_on_the_bulk() {
    let v = toy_margins_impl(3, 150, 15, 8.0 / 255.0, 3).unwrap();
    let n = v[0] as usize;
    let deepfool = median(v[1..1 + n].to_vec());
    let fast = median(v[1 + n..].to_vec());
    assert!((deepfool - fast).abs() <= 0.1 * deepfool.abs().max(1e-3), "deepfool {deepfool} fast {fast}");
}
