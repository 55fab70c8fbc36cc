mod common;

use bridge_core::engine::Threshold;
use bridge_core::simulator::{
    evaluate_run, generate_stream, metrics_csv, run_engine, sweep_thresholds, Intent, Scenario, Segment,
    METRICS_CSV_HEADER,
};

use common::{clean, recount};

fn noisy(seed: u64) -> Scenario {
    Scenario::new(
        format!("noisy-{seed}"),
        seed,
        vec![
            Segment::noisy(Intent::Neutral, 6.0, 0.2),
            Segment::noisy(Intent::Task, 3.0, 0.2),
            Segment::noisy(Intent::Neutral, 6.0, 0.2),
            Segment::noisy(Intent::Task, 3.0, 0.2),
            Segment::noisy(Intent::Neutral, 6.0, 0.2),
        ],
    )
    .unwrap()
}

#[test]
fn scenario_file_format_round_trips() {
    let text = r#"{"name":"demo","rateHz":10,"seed":42,"segments":[
        {"intent":"neutral","durationSeconds":2,"flipProbability":0.1,"powerMean":0.1},
        {"intent":"task","durationSeconds":1.5,"flipProbability":0,"powerMean":0.8}]}"#;
    let s = Scenario::from_json(text).unwrap();
    assert_eq!(s.rate_hz, 10.0);
    assert_eq!(s.action.as_str(), "push");
    assert_eq!(generate_stream(&s).len(), 35);
    assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);

    for bad in [
        r#"{"name":"x","seed":1,"segments":[]}"#,
        r#"{"name":"x","seed":1,"segments":[{"intent":"task","durationSeconds":1,"flipProbability":0.6,"powerMean":0.5}]}"#,
        r#"{"name":"x","seed":1,"segments":[{"intent":"task","durationSeconds":0,"flipProbability":0.1,"powerMean":0.5}]}"#,
        r#"{"name":"x","seed":1,"segments":[{"intent":"task","durationSeconds":1,"flipProbability":0.1,"powerMean":1.5}]}"#,
        r#"{"name":"x","rateHz":0,"seed":1,"segments":[{"intent":"task","durationSeconds":1,"flipProbability":0.1,"powerMean":0.5}]}"#,
    ] {
        assert!(Scenario::from_json(bad).is_err(), "{bad}");
    }
}

#[test]
fn identical_seed_gives_identical_stream_and_reports() {
    let a = noisy(5);
    assert_eq!(generate_stream(&a), generate_stream(&noisy(5)));
    assert_eq!(metrics_csv(&sweep_thresholds(&a)), metrics_csv(&sweep_thresholds(&noisy(5))));
    assert_ne!(generate_stream(&a), generate_stream(&noisy(6)));
}

#[test]
fn zero_noise_latency_is_window_fill_time() {
    for rate in [10.0, 20.0] {
        let s = clean(&[(Intent::Neutral, 2.0), (Intent::Task, 1.5), (Intent::Neutral, 2.0), (Intent::Task, 1.0)], rate);
        let labels: Vec<bool> = generate_stream(&s).iter().map(|x| x.label().is_task()).collect();
        for r in sweep_thresholds(&s) {
            let t = r.threshold as usize;
            // Oracle: trailing recount over the generated labels.
            let fill = (0..labels.len()).find(|&i| recount(&labels, i) >= t).unwrap();
            let seg_start = (2.0 * rate) as usize;
            let expected = (fill - seg_start) as f64 / rate;
            assert!((expected - (t as f64 - 1.0) / rate).abs() < 1e-9);
            assert_eq!(r.missed_segments, 0, "t={t}");
            assert_eq!(r.false_activations, 0, "t={t}");
            assert_eq!(r.detection_latencies.len(), 2);
            for lat in &r.detection_latencies {
                assert!((lat - expected).abs() < 1e-9, "t={t} lat={lat} want {expected}");
            }
        }
    }
}

#[test]
fn task_shorter_than_fill_time_is_missed_at_high_thresholds() {
    let s = clean(&[(Intent::Neutral, 2.0), (Intent::Task, 0.5), (Intent::Neutral, 2.0)], 10.0);
    for r in sweep_thresholds(&s) {
        let fits = (r.threshold as usize) <= 5;
        assert_eq!(r.missed_segments, usize::from(!fits), "t={}", r.threshold);
    }
}

#[test]
fn reports_partition_events() {
    for seed in 0..20 {
        let s = noisy(seed);
        let samples = generate_stream(&s);
        for t in Threshold::all() {
            let log = run_engine(&s, &samples, t, 1.0).unwrap();
            let r = evaluate_run(&s, &log, t);
            assert_eq!(r.false_activations + r.task_activations, log.len());
            assert!(r.missed_segments <= s.task_segments());
            assert_eq!(r.detection_latencies.len(), s.task_segments() - r.missed_segments);
        }
    }
}

#[test]
fn false_activations_at_ten_never_exceed_those_at_one() {
    let mut pair_violations = [0usize; 9];
    for seed in 0..200 {
        let reports = sweep_thresholds(&noisy(seed));
        assert!(
            reports[9].false_activations <= reports[0].false_activations,
            "seed {seed}: t=10 {} > t=1 {}",
            reports[9].false_activations,
            reports[0].false_activations
        );
        for k in 0..9 {
            if reports[k + 1].false_activations > reports[k].false_activations {
                pair_violations[k] += 1;
            }
        }
    }
    // Adjacent pairs are not guaranteed monotone at the event level; report the trend.
    println!("adjacent-threshold false-activation increases over 200 seeds: {pair_violations:?}");
}

#[test]
fn csv_layout() {
    let csv = metrics_csv(&sweep_thresholds(&clean(&[(Intent::Neutral, 1.0), (Intent::Task, 2.0)], 10.0)));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], METRICS_CSV_HEADER);
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[1], "1,0,0,0.0000");
    assert_eq!(lines[10], "10,0,0,0.9000");
}
