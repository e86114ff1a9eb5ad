use psdxc_web::{bound_curve_json, john_ellipse_json, rescale_trajectory_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn ellipse_of_the_cross_is_the_unit_disk() {
    let v = parse(john_ellipse_json(&[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]).unwrap());
    assert_eq!(v["k"], 2);
    let t = &v["t"];
    let tt = |i: usize, j: usize| {
        (0..2)
            .map(|k| t[i][k].as_f64().unwrap() * t[j][k].as_f64().unwrap())
            .sum::<f64>()
    };
    assert!((tt(0, 0) - 1.0).abs() < 1e-6 && (tt(1, 1) - 1.0).abs() < 1e-6 && tt(0, 1).abs() < 1e-6);
    let w: Vec<f64> = v["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(w.iter().all(|x| (x - 0.5).abs() < 1e-6));
}

#[test]
fn collinear_points_give_a_segment() {
    let v = parse(john_ellipse_json(&[1.0, 1.0, -2.0, -2.0, 0.5, 0.5]).unwrap());
    assert_eq!(v["k"], 1);
    assert_eq!(v["contacts"].as_array().unwrap().len(), 1);
}

#[test]
fn ellipse_rejects_bad_input() {
    assert!(john_ellipse_json(&[1.0, 2.0, 3.0]).is_err());
    assert!(john_ellipse_json(&[]).is_err());
    assert!(john_ellipse_json(&[0.0, 0.0]).is_err());
}

#[test]
fn trajectory_descends_to_the_target() {
    let v = parse(rescale_trajectory_json("cube", 2, 7).unwrap());
    assert_eq!(v["certificate"], Value::Bool(true));
    let phis: Vec<f64> = v["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["phi"].as_f64().unwrap())
        .collect();
    assert!(phis.len() > 1);
    assert!(phis.windows(2).all(|w| w[1] < w[0]));
    let target = v["target"].as_f64().unwrap();
    assert!(*phis.last().unwrap() <= (target * 1.05).powi(2));
    assert_eq!(rescale_trajectory_json("cube", 2, 7).unwrap(), rescale_trajectory_json("cube", 2, 7).unwrap());
}

#[test]
fn trajectory_rejects_bad_input() {
    assert!(rescale_trajectory_json("cube", 9, 7).is_err());
    assert!(rescale_trajectory_json("moment_polygon", 4, 7).is_err());
    assert!(rescale_trajectory_json("tesseract", 2, 7).is_err());
}

#[test]
fn curves() {
    let v = parse(bound_curve_json("xc01", 16, 20, 0.0).unwrap());
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 5);
    let first = pts[0]["log2"].as_f64().unwrap().exp2();
    assert!((4.25..=4.35).contains(&first));

    let v = parse(bound_curve_json("counting", 2, 6, 2.0).unwrap());
    assert!(v[0]["other_log2"].is_number());

    assert!(bound_curve_json("polygon", 2, 10, 0.0).is_err());
    assert!(bound_curve_json("xc01", 10, 2, 0.0).is_err());
    assert!(bound_curve_json("magic", 2, 3, 0.0).is_err());
}
