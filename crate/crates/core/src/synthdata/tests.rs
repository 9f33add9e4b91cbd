use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn quiet(spec: &TaskSpec) -> TaskSpec {
    TaskSpec { noise_std: 0.0, ..spec.clone() }
}

#[test]
fn empty_request_gives_empty_set() {
    assert!(generate_normal(&TaskSpec::with_pool_seed(0), 0, 1).unwrap().is_empty());
}

#[test]
fn generation_is_seeded() {
    let spec = TaskSpec::with_pool_seed(3);
    let a = generate_normal(&spec, 4, 10).unwrap();
    assert_eq!(a, generate_normal(&spec, 4, 10).unwrap());
    let mut r1 = ChaCha8Rng::seed_from_u64(10);
    let mut r2 = ChaCha8Rng::seed_from_u64(11);
    assert_ne!(random_route(&spec, &mut r1), random_route(&spec, &mut r2));
    assert_eq!(a[0].len(), 450);
    assert!(a.iter().all(|s| !s.is_anomalous() && s.label_hit_window.iter().all(|b| !b)));
}

#[test]
fn routes_visit_eight_to_ten_waypoints_and_return() {
    let spec = TaskSpec::with_pool_seed(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut counts = Vec::new();
    for _ in 0..200 {
        let route = random_route(&spec, &mut rng);
        assert_eq!((route[0], route.last()), (0, Some(&0)));
        counts.push(route.len() - 1);
    }
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    assert!((8.0..=10.0).contains(&mean), "mean waypoints per route {mean}");

    let seq = &generate_normal(&quiet(&spec), 1, 7).unwrap()[0];
    assert_eq!(seq.x.first(), seq.x.last());
}

#[test]
fn positions_stay_in_limits_and_speed_below_cap() {
    let spec = TaskSpec::with_pool_seed(8);
    for seq in generate_normal(&spec, 20, 9).unwrap() {
        for row in &seq.x {
            for (v, &(lo, hi)) in row.iter().zip(&spec.joint_limits) {
                assert!((lo..=hi).contains(v));
            }
        }
    }
    let cap = spec.max_speed * spec.dt();
    for seq in generate_normal(&quiet(&spec), 20, 9).unwrap() {
        for w in seq.x.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!((a - b).abs() <= cap + 1e-12);
            }
        }
    }
}

#[test]
fn waypoint_outside_limits_is_infeasible() {
    let mut spec = TaskSpec::with_pool_seed(0);
    spec.waypoint_pool[3][1] = 5.0;
    assert!(matches!(generate_normal(&spec, 1, 0), Err(DataError::Infeasible(_))));
}

#[test]
fn zero_magnitude_hits_only_touch_the_window_label() {
    let spec = TaskSpec::with_pool_seed(1);
    let seq = &generate_normal(&spec, 1, 2).unwrap()[0];
    let hits = HitSpec { magnitude_min: 0.0, magnitude_max: 0.0, ..HitSpec::default() };
    let out = inject_hits(seq, 2, &hits, 3).unwrap();
    assert_eq!(out.x, seq.x);
    assert!(out.label_torque_proxy.iter().all(|b| !b));
    assert_eq!(out.hit_commands.len(), 2);
    assert!(out.label_hit_window.iter().filter(|&&b| b).count() >= 60);
}

#[test]
fn injection_is_causal_and_labels_are_consistent() {
    let spec = TaskSpec::with_pool_seed(2);
    for (i, seq) in generate_normal(&spec, 10, 4).unwrap().iter().enumerate() {
        let out = inject_hits(seq, 1 + i % 3, &HitSpec::default(), i as u64).unwrap();
        let first = out.hit_commands[0];
        assert_eq!(out.x[..first], seq.x[..first]);
        assert_ne!(out.x[first], seq.x[first]);
        assert_eq!(out.label_hit_window, hit_window_labels(&out.hit_commands, out.len(), out.dt));
        for t in 0..out.len() {
            let expected = out.hit_commands.iter().any(|&h| h + 60 > t && h <= t);
            assert_eq!(out.label_hit_window[t], expected);
        }
    }
}

#[test]
fn torque_label_fires_at_onset_of_large_hits() {
    let spec = TaskSpec::with_pool_seed(2);
    let seq = &generate_normal(&spec, 1, 5).unwrap()[0];
    let hs = HitSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..30 {
        let hit = Hit { step: rng.random_range(0..400), direction: random_direction(&mut rng), magnitude: rng.random_range(0.05..0.3) };
        let out = apply_hits(seq, std::slice::from_ref(&hit), &hs).unwrap();
        // the jump at onset exceeds the threshold whenever magnitude/dt does
        assert!(hit.magnitude / seq.dt > hs.torque_threshold(seq.dt));
        let onset = out.label_torque_proxy.iter().position(|&b| b).unwrap();
        assert!(onset.abs_diff(hit.step) <= 1);
    }
}

#[test]
fn out_of_range_hit_is_rejected() {
    let seq = &generate_normal(&TaskSpec::with_pool_seed(0), 1, 0).unwrap()[0];
    let hit = Hit { step: 450, direction: [0.0; JOINTS], magnitude: 0.1 };
    assert!(matches!(
        apply_hits(seq, &[hit], &HitSpec::default()),
        Err(DataError::HitOutOfRange { step: 450, len: 450 })
    ));
}

#[test]
fn dataset_text_round_trip() {
    let spec = TaskSpec { duration: 2.0, ..TaskSpec::with_pool_seed(4) };
    let mut seqs = generate_normal(&spec, 3, 1).unwrap();
    seqs[1] = inject_hits(&seqs[1], 2, &HitSpec::default(), 9).unwrap();
    let ds = Dataset::new(JOINTS, spec.rate, seqs);
    assert_eq!(Dataset::from_text(&ds.to_text()).unwrap(), ds);
    let empty = Dataset::new(JOINTS, 15.0, vec![]);
    assert_eq!(Dataset::from_text(&empty.to_text()).unwrap(), empty);
}

#[test]
fn malformed_line_is_reported() {
    let spec = TaskSpec { duration: 1.0, ..TaskSpec::with_pool_seed(4) };
    let ds = Dataset::new(JOINTS, spec.rate, generate_normal(&spec, 2, 1).unwrap());
    let mut lines: Vec<String> = ds.to_text().lines().map(str::to_string).collect();
    // drop one value on the 5th line of the file
    let cut = lines[4].find(',').unwrap();
    lines[4] = lines[4][cut + 1..].to_string();
    match Dataset::from_text(&lines.join("\n")) {
        Err(DataError::Parse { line: 5, message }) => assert!(message.contains("fields")),
        other => panic!("{other:?}"),
    }
    let text = ds.to_text().replace("15.0\n", "15.0,1\n");
    assert!(matches!(Dataset::from_text(&text), Err(DataError::Parse { line: 1, .. })));
}

#[test]
fn split_matches_reference_proportions() {
    assert_eq!(split_sizes(1008), (640, 160, 208));
    assert_eq!(split_sizes(0), (0, 0, 0));
    let (a, b, c) = split_sizes(320);
    assert_eq!(a + b + c, 320);
}

proptest! {
    #[test]
    fn window_labels_follow_hits(hits in prop::collection::vec(0usize..200, 0..4), len in 1usize..200) {
        let hits: Vec<usize> = hits.into_iter().filter(|&h| h < len).collect();
        let labels = hit_window_labels(&hits, len, 1.0 / 15.0);
        for t in 0..len {
            let any = hits.iter().any(|&h| t >= h && t - h < 60);
            prop_assert_eq!(labels[t], any);
        }
    }
}
