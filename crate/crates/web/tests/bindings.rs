use csvel::ingest::generate_synthetic;
use csvel::track::Method;
use csvel_web::{mu_sweep_json, simulate, simulate_json, tf_map, tf_map_json, DemoParams};
use serde_json::Value;

fn quick() -> DemoParams {
    DemoParams {
        n_frames: 80,
        np: 32,
        ..DemoParams::default()
    }
}

#[test]
fn scene_fits_the_trajectory() {
    for (a, b) in [(1.0, 4.0), (-3.0, -3.0), (5.0, -5.0), (0.0, 0.0)] {
        let p = DemoParams {
            vx_start: a,
            vx_end: b,
            ..DemoParams::default()
        };
        let (_, truth) = generate_synthetic(&p.scene()).unwrap();
        assert_eq!(truth.velocity.len(), 121);
    }
}

#[test]
fn simulate_reports_three_methods() {
    let r = simulate(&quick()).unwrap();
    assert_eq!(r.tracks.len(), 3);
    assert_eq!(r.truth.len(), 80);
    assert_eq!(r.available.len(), (80.0f64 * 0.545).round() as usize);
    for t in &r.tracks {
        assert_eq!(t.velocity.len(), 80);
        assert_eq!(t.mu, 0.25);
    }
    // bin width at Np=32, μ=0.25 is about 0.785
    let err = |i: usize| r.tracks[i].rmse.unwrap();
    assert!(err(1) < 1.0 && err(2) < 1.0);
    assert!(err(2) < err(0));
}

#[test]
fn map_rows_are_normalised_and_gaps_are_null() {
    let p = DemoParams {
        keep_ratio: 0.3,
        ..quick()
    };
    let m = tf_map(&p, Method::CsSm).unwrap();
    assert_eq!(m.velocity_axis.len(), 32);
    assert!(m.velocity_axis.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(m.rows.len(), m.times.len());
    assert!(m.rows.iter().any(Option::is_none));
    for (row, ridge) in m.rows.iter().zip(&m.ridge) {
        match row {
            Some(r) => {
                assert_eq!(r.len(), 32);
                let peak = r.iter().cloned().fold(0.0f32, f32::max);
                assert!(peak == 1.0 || peak == 0.0);
            }
            None => assert!(ridge.is_none()),
        }
    }
}

#[test]
fn json_entry_points_round_trip() {
    let params = r#"{"n_frames": 80, "np": 32}"#;
    let v: Value = serde_json::from_str(&simulate_json(params).unwrap()).unwrap();
    assert_eq!(v["tracks"].as_array().unwrap().len(), 3);
    assert_eq!(v["tracks"][0]["method"], "initial_sm");

    let v: Value = serde_json::from_str(&tf_map_json(params, "cs_spec").unwrap()).unwrap();
    assert_eq!(v["np"], 32);

    let v: Value = serde_json::from_str(&mu_sweep_json(params, "[0.1, 0.2, 0.3]", "cs_sm").unwrap()).unwrap();
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    let chosen = v["selected_mu"].as_f64().unwrap();
    let best = points
        .iter()
        .filter(|p| p["gap_fraction"].as_f64().unwrap() <= 0.5)
        .min_by(|a, b| {
            let tv = |p: &Value| p["total_variation"].as_f64().unwrap();
            tv(a).total_cmp(&tv(b))
        })
        .unwrap();
    assert_eq!(best["mu"].as_f64().unwrap(), chosen);
}

#[test]
fn bad_input_is_an_error_not_a_panic() {
    assert!(simulate_json("{not json").is_err());
    assert!(simulate_json(r#"{"np": 33}"#).is_err());
    assert!(simulate_json(r#"{"mu": -1}"#).is_err());
    assert!(simulate_json(r#"{"vx_start": 100}"#).is_err());
    assert!(simulate_json(r#"{"colour": 1}"#).is_err());
    assert!(tf_map_json("{}", "wigner").is_err());
    assert!(mu_sweep_json("{}", "[]", "cs_sm").is_err());
}
