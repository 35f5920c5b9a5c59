use caging::{auc, average_precision, cli, default_config, likelihoods, scenario_names, simulate};
use pyo3::prelude::*;

#[test]
fn plain_functions() {
    assert_eq!(scenario_names(), ["pushing", "balance", "toppling", "well"]);
    let p = likelihoods(vec![0.0, std::f64::consts::LN_2], 1.0);
    assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
    let s = vec![0.9, 0.6, 0.4, 0.1];
    let l = vec![true, false, true, false];
    assert_eq!(auc(s.clone(), l.clone()).unwrap(), 0.75);
    assert!((average_precision(s, l).unwrap() - 5.0 / 6.0).abs() < 1e-12);
    assert!(auc(vec![0.1, 0.2], vec![true, true]).is_err());
}

#[test]
fn results_become_python_objects() {
    Python::attach(|py| {
        let rec = simulate(py, "toppling", 3, 5, 1, None).unwrap();
        let rec = rec.bind(py);
        assert_eq!(
            rec.get_item("scenario")
                .unwrap()
                .extract::<String>()
                .unwrap(),
            "toppling"
        );
        assert_eq!(rec.get_item("frames").unwrap().len().unwrap(), 5);
        let cfg = default_config(py, "well").unwrap();
        assert_eq!(
            cfg.bind(py)
                .get_item("name")
                .unwrap()
                .extract::<String>()
                .unwrap(),
            "well"
        );
        assert!(default_config(py, "juggling").is_err());
        assert_eq!(
            cli(
                py,
                vec!["simulate".into(), "--scenario".into(), "nope".into()]
            ),
            2
        );
    });
}
